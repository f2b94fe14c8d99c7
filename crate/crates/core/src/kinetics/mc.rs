//! Monte Carlo unraveling of the momentum-diagonal kinetic equation
//!
//! dϱ(p)/dt = ∫ d³q [λ(p − q, q) ϱ(p − q) − λ(p, q) ϱ(p)]
//!
//! as independent pure-jump trajectories. Waiting times are generated by
//! thinning: candidate events arrive at the dominating rate Λ(p) of the
//! current state and are accepted with probability λ/μ, which makes both the
//! holding time and the jump law exact without evaluating Γ(p).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::kernel::{CollisionKernel, KernelVariant};
use crate::error::{Error, Result};
use crate::vec3::{self, Vec3};

/// Jump counts above this per trajectory are treated as a pathological kernel.
const MAX_EVENTS: u64 = 1 << 34;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-trajectory seed: `splitmix64(seed ^ splitmix64(index))`.
///
/// Trajectory randomness depends only on (seed, index), so results do not
/// depend on scheduling.
pub fn trajectory_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition {
    Fixed(Vec3),
    /// Each component drawn from N(0, mass / beta).
    Maxwell { mass: f64, beta: f64 },
}

impl InitialCondition {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec3 {
        match *self {
            InitialCondition::Fixed(p) => p,
            InitialCondition::Maxwell { mass, beta } => {
                let sigma = (mass / beta).sqrt();
                let mut p = [0.0; 3];
                for c in &mut p {
                    *c = sigma * rng.sample::<f64, _>(StandardNormal);
                }
                p
            }
        }
    }
}

/// What each trajectory records.
#[derive(Debug, Clone, PartialEq)]
pub enum Recording {
    /// The initial state at t = 0 and the state after every jump.
    Jumps,
    /// The state at each of these strictly increasing times in [0, horizon].
    Snapshots(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub id: usize,
    pub seed: u64,
    /// (time, momentum) pairs with strictly increasing times.
    pub points: Vec<(f64, Vec3)>,
    pub jumps: u64,
}

impl Trajectory {
    /// Momentum at time `t`: the last recorded point at or before `t`.
    ///
    /// With [`Recording::Snapshots`] this is exact only at snapshot times.
    pub fn momentum_at(&self, t: f64) -> Vec3 {
        let i = self.points.partition_point(|(s, _)| *s <= t);
        self.points[i.saturating_sub(1)].1
    }

    pub fn final_momentum(&self) -> Vec3 {
        self.points.last().map(|x| x.1).unwrap_or([0.0; 3])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalEnsemble {
    pub trajectories: Vec<Trajectory>,
    pub horizon: f64,
    pub variant: KernelVariant,
    pub recording: Recording,
}

impl DiagonalEnsemble {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn mean_momentum(&self, t: f64) -> Vec3 {
        let n = self.trajectories.len() as f64;
        let mut sum = [0.0; 3];
        for tr in &self.trajectories {
            sum = vec3::add(&sum, &tr.momentum_at(t));
        }
        vec3::scale(&sum, 1.0 / n)
    }

    pub fn total_jumps(&self) -> u64 {
        self.trajectories.iter().map(|t| t.jumps).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub horizon: f64,
    pub n_traj: usize,
    pub seed: u64,
    pub recording: Recording,
}

fn run_trajectory(
    kernel: &CollisionKernel,
    initial: &InitialCondition,
    config: &McConfig,
    id: usize,
) -> Result<Trajectory> {
    let seed = trajectory_seed(config.seed, id as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = initial.draw(&mut rng);
    let mut t = 0.0;
    let mut jumps = 0u64;
    let mut events = 0u64;
    let snapshots: &[f64] = match &config.recording {
        Recording::Jumps => &[],
        Recording::Snapshots(times) => times,
    };
    let mut next_snapshot = 0;
    let mut points = Vec::new();
    if matches!(config.recording, Recording::Jumps) {
        points.push((0.0, p));
    }

    loop {
        let bound = kernel.proposal_rate(&p)?;
        if bound == 0.0 {
            break;
        }
        let u: f64 = rng.random();
        t += -(-u).ln_1p() / bound;
        if t > config.horizon {
            break;
        }
        events += 1;
        if events > MAX_EVENTS {
            return Err(Error::RateOverflow(format!(
                "trajectory {id} exceeded {MAX_EVENTS} candidate events before t = {}",
                config.horizon
            )));
        }
        let (q, accept) = kernel.propose(&p, &mut rng);
        if rng.random::<f64>() < accept {
            while next_snapshot < snapshots.len() && snapshots[next_snapshot] < t {
                points.push((snapshots[next_snapshot], p));
                next_snapshot += 1;
            }
            p = vec3::add(&p, &q);
            if !p.iter().all(|x| x.is_finite()) {
                return Err(Error::RateOverflow(format!(
                    "non-finite momentum in trajectory {id} at t = {t}"
                )));
            }
            jumps += 1;
            if matches!(config.recording, Recording::Jumps) {
                points.push((t, p));
            }
        }
    }
    for &s in &snapshots[next_snapshot..] {
        points.push((s, p));
    }
    Ok(Trajectory {
        id,
        seed,
        points,
        jumps,
    })
}

/// Simulates `config.n_traj` independent trajectories up to `config.horizon`.
pub fn mc_evolve(
    kernel: &CollisionKernel,
    initial: InitialCondition,
    config: &McConfig,
) -> Result<DiagonalEnsemble> {
    if !(config.horizon > 0.0) || !config.horizon.is_finite() {
        return Err(crate::error::invalid(
            "horizon",
            format!("must be positive and finite, got {}", config.horizon),
        ));
    }
    if config.n_traj == 0 {
        return Err(crate::error::invalid("n_traj", "must be >= 1"));
    }
    if let Recording::Snapshots(times) = &config.recording {
        if times.windows(2).any(|w| w[1] <= w[0])
            || times.iter().any(|&s| s < 0.0 || s > config.horizon)
        {
            return Err(crate::error::invalid(
                "snapshots",
                "times must be strictly increasing within [0, horizon]",
            ));
        }
    }
    let trajectories = (0..config.n_traj)
        .into_par_iter()
        .map(|id| run_trajectory(kernel, &initial, config, id))
        .collect::<Result<Vec<_>>>()?;
    Ok(DiagonalEnsemble {
        trajectories,
        horizon: config.horizon,
        variant: kernel.variant(),
        recording: config.recording.clone(),
    })
}
