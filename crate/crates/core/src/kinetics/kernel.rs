//! Collision kernel of the quantum linear Boltzmann equation.
//!
//! The jump intensity for a particle of momentum p to absorb momentum q is
//!
//! λ(p, q) = (2π/ħ)(2πħ)³ n |t̃(q)|² S(q, E(q, p)),
//!
//! and the jump operator amplitude of the Poisson-type generator is its square
//! root, L(q, p) = √λ(p, q). The loss rate Γ(p) = ∫ d³q λ(p, q).
//!
//! Sampling uses a dominating intensity μ_p(q) ≥ λ(p, q) with a closed-form
//! total mass: the Gaussian factor of S is bounded by its maximum over q·p and
//! |t̃|² is bounded by an envelope B(|q|) (exact for the Gaussian potential,
//! piecewise constant for tables). Candidates drawn from μ_p and accepted with
//! probability λ/μ_p are exact draws from λ.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::physics::{GasSpec, ParticleSpec, PotentialSpec, UnitSystem, Validate};
use crate::quadrature::QuadratureSpec;
use crate::structure_factor::{
    energy_transfer, energy_transfer_1d, scattering_rate, SpectralFunction,
};
use crate::vec3::{self, Vec3};

/// Which structure factor drives the collisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelVariant {
    /// Exact Maxwell-Boltzmann structure factor.
    Exact,
    /// Small energy transfer limit, giving the Brownian-limit master equation.
    BrownianLimit,
}

impl KernelVariant {
    pub fn spectral(self, gas: GasSpec) -> SpectralFunction {
        match self {
            KernelVariant::Exact => SpectralFunction::MbExact(gas),
            KernelVariant::BrownianLimit => SpectralFunction::MbLimit(gas),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelVariant::Exact => "exact",
            KernelVariant::BrownianLimit => "brownian_limit",
        }
    }
}

/// Dominating radial profile q·B(q) with B ≥ |t̃|².
#[derive(Debug, Clone, PartialEq)]
enum RadialEnvelope {
    Zero,
    /// B = |t̃|² = amp² exp(−q²/width²) exactly.
    Gaussian { width2: f64, mass: f64 },
    /// B = bound[i] on [edges[i], edges[i+1]].
    Piecewise {
        edges: Vec<f64>,
        bounds: Vec<f64>,
        cumulative: Vec<f64>,
    },
    /// Flat Gaussian (zero range): ∫ q |t̃|² dq diverges.
    Unbounded,
}

impl RadialEnvelope {
    fn new(potential: &PotentialSpec, units: &UnitSystem) -> Self {
        if potential.is_zero() {
            return RadialEnvelope::Zero;
        }
        match potential {
            PotentialSpec::Gaussian { range, .. } => {
                if *range == 0.0 {
                    return RadialEnvelope::Unbounded;
                }
                let width2 = (units.hbar / range).powi(2);
                let peak = potential.ft_sq(0.0, units);
                RadialEnvelope::Gaussian {
                    width2,
                    mass: 0.5 * peak * width2,
                }
            }
            PotentialSpec::Tabulated(table) => {
                let q = table.nodes();
                let t = table.values();
                let mut bounds = Vec::with_capacity(q.len() - 1);
                let mut cumulative = Vec::with_capacity(q.len() - 1);
                let mut total = 0.0;
                for i in 0..q.len() - 1 {
                    // |linear|² is convex, so its maximum sits at an endpoint
                    let b = (t[i] * t[i]).max(t[i + 1] * t[i + 1]);
                    total += 0.5 * b * (q[i + 1] * q[i + 1] - q[i] * q[i]);
                    bounds.push(b);
                    cumulative.push(total);
                }
                RadialEnvelope::Piecewise {
                    edges: q.to_vec(),
                    bounds,
                    cumulative,
                }
            }
        }
    }

    /// ∫ q B(q) dq.
    fn mass(&self) -> f64 {
        match self {
            RadialEnvelope::Zero => 0.0,
            RadialEnvelope::Gaussian { mass, .. } => *mass,
            RadialEnvelope::Piecewise { cumulative, .. } => *cumulative.last().unwrap_or(&0.0),
            RadialEnvelope::Unbounded => f64::INFINITY,
        }
    }

    fn bound(&self, q: f64, potential: &PotentialSpec, units: &UnitSystem) -> f64 {
        match self {
            RadialEnvelope::Gaussian { .. } => potential.ft_sq(q, units),
            RadialEnvelope::Piecewise { edges, bounds, .. } => {
                let i = edges.partition_point(|&x| x <= q).clamp(1, bounds.len()) - 1;
                bounds[i]
            }
            RadialEnvelope::Zero | RadialEnvelope::Unbounded => 0.0,
        }
    }

    /// Draws |q| with density ∝ q B(q).
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            RadialEnvelope::Gaussian { width2, .. } => {
                let u: f64 = rng.random();
                (-width2 * (-u).ln_1p()).sqrt()
            }
            RadialEnvelope::Piecewise {
                edges, cumulative, ..
            } => {
                let total = *cumulative.last().unwrap();
                let target = rng.random::<f64>() * total;
                let i = cumulative
                    .partition_point(|&c| c <= target)
                    .min(cumulative.len() - 1);
                let (a2, b2) = (edges[i] * edges[i], edges[i + 1] * edges[i + 1]);
                (a2 + rng.random::<f64>() * (b2 - a2)).sqrt()
            }
            RadialEnvelope::Zero | RadialEnvelope::Unbounded => 0.0,
        }
    }
}

/// Rate and jump distribution of the collision process at fixed physics.
#[derive(Debug, Clone)]
pub struct CollisionKernel {
    gas: GasSpec,
    particle: ParticleSpec,
    potential: PotentialSpec,
    units: UnitSystem,
    variant: KernelVariant,
    spectral: SpectralFunction,
    prefactor: f64,
    envelope: RadialEnvelope,
}

impl CollisionKernel {
    pub fn build(
        gas: GasSpec,
        particle: ParticleSpec,
        potential: PotentialSpec,
        variant: KernelVariant,
        units: UnitSystem,
    ) -> Result<Self> {
        gas.validate()?;
        particle.validate()?;
        potential.validate()?;
        units.validate()?;
        let prefactor = 2.0 * PI / units.hbar * units.phase_space_cell() * gas.density;
        let envelope = RadialEnvelope::new(&potential, &units);
        Ok(Self {
            gas,
            particle,
            spectral: variant.spectral(gas),
            potential,
            units,
            variant,
            prefactor,
            envelope,
        })
    }

    pub fn gas(&self) -> &GasSpec {
        &self.gas
    }
    pub fn particle(&self) -> &ParticleSpec {
        &self.particle
    }
    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }
    pub fn units(&self) -> &UnitSystem {
        &self.units
    }
    pub fn variant(&self) -> KernelVariant {
        self.variant
    }
    pub fn spectral(&self) -> &SpectralFunction {
        &self.spectral
    }

    /// (2π/ħ)(2πħ)³ n.
    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }

    pub fn is_inert(&self) -> bool {
        matches!(self.envelope, RadialEnvelope::Zero)
    }

    /// λ(p, q): rate density for p → p + q.
    pub fn intensity(&self, p: &Vec3, q: &Vec3) -> f64 {
        let qm = vec3::norm(q);
        let t2 = self.potential.ft_sq(qm, &self.units);
        if t2 == 0.0 || qm == 0.0 {
            return 0.0;
        }
        let e = energy_transfer(q, p, self.particle.mass);
        self.prefactor * t2 * self.spectral.value_or_zero(qm, e)
    }

    /// L(q, p) = √λ(p, q), the jump operator amplitude of the Poisson part.
    pub fn jump_amplitude(&self, q: &Vec3, p: &Vec3) -> f64 {
        self.intensity(p, q).sqrt()
    }

    /// One-dimensional analogue of λ for collinear p and q.
    ///
    /// The 3D measure d³q = 2π q² dq d(cos θ) is collapsed onto the axis of
    /// p, giving the weight 2π q² |t̃(q)|² S(|q|, E(q, p)) per unit dq. The
    /// weight vanishes at q = 0 and keeps detailed balance with respect to
    /// the Maxwell distribution at the particle mass.
    pub fn line_intensity(&self, q: f64, p: f64) -> f64 {
        let qm = q.abs();
        if qm == 0.0 {
            return 0.0;
        }
        let t2 = self.potential.ft_sq(qm, &self.units);
        if t2 == 0.0 {
            return 0.0;
        }
        let e = energy_transfer_1d(q, p, self.particle.mass);
        self.prefactor * 2.0 * PI * q * q * t2 * self.spectral.value_or_zero(qm, e)
    }

    /// Γ(p) by quadrature.
    pub fn rate(&self, p: &Vec3, quad: &QuadratureSpec) -> Result<f64> {
        if self.is_inert() {
            return Ok(0.0);
        }
        Ok(scattering_rate(
            &self.potential,
            &self.spectral,
            vec3::norm(p),
            self.particle.mass,
            &self.units,
            quad,
        )?
        .value)
    }

    /// 1 / Γ at the root-mean-square thermal momentum √(3M/β) of the particle.
    pub fn mean_free_time(&self, quad: &QuadratureSpec) -> Result<f64> {
        let p_rms = (3.0 * self.particle.mass / self.gas.beta).sqrt();
        let rate = self.rate(&[p_rms, 0.0, 0.0], quad)?;
        if rate == 0.0 {
            return Err(Error::Domain("inert kernel has no mean free time".into()));
        }
        Ok(1.0 / rate)
    }

    fn gaussian_bound_log(&self, p: f64) -> f64 {
        match self.variant {
            KernelVariant::Exact => 0.0,
            KernelVariant::BrownianLimit => {
                let (m, big_m, beta) = (self.gas.mass, self.particle.mass, self.gas.beta);
                let a = beta / (8.0 * m) * (1.0 + 2.0 * m / big_m);
                let b = beta * p / (2.0 * big_m);
                b * b / (4.0 * a)
            }
        }
    }

    /// Total mass Λ(p) of the dominating intensity μ_p, which bounds Γ(p).
    pub fn proposal_rate(&self, p: &Vec3) -> Result<f64> {
        let mass = self.envelope.mass();
        if mass == 0.0 {
            return Ok(0.0);
        }
        let norm = (self.gas.beta * self.gas.mass / (2.0 * PI)).sqrt();
        let rate = self.prefactor
            * norm
            * 4.0
            * PI
            * mass
            * self.gaussian_bound_log(vec3::norm(p)).exp();
        if !rate.is_finite() {
            return Err(Error::RateOverflow(format!(
                "dominating jump rate is not finite at |p| = {} (envelope mass {mass:e}); \
                 the potential must decay in momentum",
                vec3::norm(p)
            )));
        }
        Ok(rate)
    }

    /// Draws a candidate q from μ_p and returns it with its acceptance
    /// probability λ(p, q) / μ_p(q).
    pub fn propose<R: Rng + ?Sized>(&self, p: &Vec3, rng: &mut R) -> (Vec3, f64) {
        let qm = self.envelope.sample(rng);
        let cos: f64 = 2.0 * rng.random::<f64>() - 1.0;
        let sin = (1.0 - cos * cos).max(0.0).sqrt();
        let phi = 2.0 * PI * rng.random::<f64>();
        let q = [qm * sin * phi.cos(), qm * sin * phi.sin(), qm * cos];
        if qm == 0.0 {
            return (q, 0.0);
        }
        let bound = self.envelope.bound(qm, &self.potential, &self.units);
        if bound == 0.0 {
            return (q, 0.0);
        }
        let potential_ratio = self.potential.ft_sq(qm, &self.units) / bound;
        let (m, big_m, beta) = (self.gas.mass, self.particle.mass, self.gas.beta);
        let e = energy_transfer(&q, p, big_m);
        let log_gauss = match self.variant {
            KernelVariant::Exact => {
                let s = 2.0 * m * e + qm * qm;
                -beta / (8.0 * m) * s * s / (qm * qm)
            }
            KernelVariant::BrownianLimit => -beta * qm * qm / (8.0 * m) - 0.5 * beta * e,
        };
        let accept = potential_ratio * (log_gauss - self.gaussian_bound_log(vec3::norm(p))).exp();
        (q, accept.min(1.0))
    }

    /// Exact draw of a momentum transfer with density ∝ λ(p, ·).
    pub fn sample<R: Rng + ?Sized>(&self, p: &Vec3, rng: &mut R) -> Result<Vec3> {
        if self.is_inert() {
            return Err(Error::Domain("inert kernel has no jump distribution".into()));
        }
        self.proposal_rate(p)?;
        const MAX_TRIES: usize = 10_000_000;
        for _ in 0..MAX_TRIES {
            let (q, accept) = self.propose(p, rng);
            if rng.random::<f64>() < accept {
                return Ok(q);
            }
        }
        Err(Error::RateOverflow(format!(
            "rejection sampler accepted nothing in {MAX_TRIES} proposals at p = {p:?}"
        )))
    }
}
