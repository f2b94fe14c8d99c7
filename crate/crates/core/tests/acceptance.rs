//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Tolerances are fixed here and must not be loosened.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qlbe_core::brownian::{
    evolve_grid, evolve_moments, generator_bound, positivity_check, translation_covariance_grid,
    Coefficients, GaussianState1D, GridDensityMatrix, GridSchedule, PositionGrid, ThermalSpreads,
};
use qlbe_core::friction::{compare_with_mc, eta, eta_gradient_form_residual};
use qlbe_core::kinetics::{
    covariance_test, mc_evolve, BandState, CollisionKernel, InitialCondition, KernelVariant,
    McConfig, MomentumGrid1D, Recording,
};
use qlbe_core::physics::{GasSpec, ParticleSpec, PotentialSpec, UnitSystem};
use qlbe_core::quadrature::{integrate_2d, QuadratureSpec};
use qlbe_core::stats::{chi_square, ks_distance_normal};
use qlbe_core::structure_factor::{
    detailed_balance_residual, fdt_phi, fdt_phi_from_response, momentum_cutoff, scattering_rate,
    total_cross_section, SpectralFunction,
};
use qlbe_core::Result;

const DETAILED_BALANCE_TOL: f64 = 1e-12;
const FDT_ABS_TOL: f64 = 1e-8;
const LOSS_IDENTITY_REL_TOL: f64 = 1e-6;
const KS_FACTOR: f64 = 3.0;
const FRICTION_MC_TOL: f64 = 0.10;
const THERMALIZATION_REL_TOL: f64 = 1e-3;
const IDENTITY_ULPS: f64 = 4.0;
const TRACE_TOL: f64 = 1e-8;
const MIN_EIGENVALUE_TOL: f64 = -1e-7;
const BAND_COVARIANCE_TOL: f64 = 1e-10;
const GRID_COVARIANCE_TOL: f64 = 1e-8;
const CHI_SQUARE_P_MIN: f64 = 0.01;
const GRADIENT_FORM_TOL: f64 = 1e-10;

struct Outcome {
    pass: bool,
    detail: String,
}

fn unit_gas() -> GasSpec {
    GasSpec::new(1.0, 1.0, 1.0).unwrap()
}

fn units() -> UnitSystem {
    UnitSystem::default()
}

fn kernel(variant: KernelVariant, big_m: f64) -> Result<CollisionKernel> {
    CollisionKernel::build(
        unit_gas(),
        ParticleSpec::new(big_m)?,
        PotentialSpec::gaussian(1.0, 1.0)?,
        variant,
        units(),
    )
}

fn detailed_balance() -> Result<Outcome> {
    let mut worst = 0.0f64;
    for s in [SpectralFunction::MbExact(unit_gas()), SpectralFunction::MbLimit(unit_gas())] {
        for i in 0..10 {
            let q = 0.5 + 0.5 * i as f64;
            for j in 0..10 {
                let e = -4.5 + j as f64;
                let r = detailed_balance_residual(&s, &[q, 0.0, 0.0], e)?;
                worst = worst.max(r.abs());
            }
        }
    }
    Ok(Outcome {
        pass: worst < DETAILED_BALANCE_TOL,
        detail: format!("max relative residual {worst:.3e} (tol {DETAILED_BALANCE_TOL:e})"),
    })
}

fn fdt_cross_form() -> Result<Outcome> {
    let s = SpectralFunction::MbExact(unit_gas());
    let quad = QuadratureSpec::with_tolerances(1e-13, 1e-12);
    let mut worst = 0.0f64;
    for (q, t) in [(0.3, 0.5), (1.0, 1.0), (2.0, 0.2), (0.7, 3.0), (4.0, 0.05)] {
        let a = fdt_phi(&s, &[q, 0.0, 0.0], t, &units(), &quad)?;
        let b = fdt_phi_from_response(&s, &[q, 0.0, 0.0], t, &units(), &quad)?;
        worst = worst
            .max((a.phi_minus - b.phi_minus).abs())
            .max((a.phi_plus - b.phi_plus).abs());
    }
    Ok(Outcome {
        pass: worst < FDT_ABS_TOL,
        detail: format!("max |Δφ∓| {worst:.3e} over 5 (q, t) points (tol {FDT_ABS_TOL:e})"),
    })
}

fn loss_identity() -> Result<Outcome> {
    let s = SpectralFunction::MbExact(unit_gas());
    let pot = PotentialSpec::gaussian(1.0, 1.0)?;
    let quad = QuadratureSpec::with_tolerances(1e-13, 1e-10);
    let big_m = 2.0;
    let mut worst = 0.0f64;
    for p in [0.5, 1.5, 4.0] {
        let xs = total_cross_section(&pot, &s, &[p, 0.0, 0.0], big_m, &units(), &quad)?;
        let gamma = scattering_rate(&pot, &s, p, big_m, &units(), &quad)?.value;
        // loss term of the master equation is −½{Γ, ρ}
        let rel = (xs.loss_rate - 0.5 * gamma).abs() / (0.5 * gamma);
        worst = worst.max(rel);
    }
    Ok(Outcome {
        pass: worst < LOSS_IDENTITY_REL_TOL,
        detail: format!("max relative mismatch {worst:.3e} at |p| = 0.5, 1.5, 4 (tol {LOSS_IDENTITY_REL_TOL:e})"),
    })
}

fn stationarity() -> Result<Outcome> {
    let big_m = 3.0;
    let k = kernel(KernelVariant::Exact, big_m)?;
    let tau = k.mean_free_time(&QuadratureSpec::default())?;
    let horizon = 5.0 * tau;
    let n_traj = 10_000;
    let cfg = McConfig {
        horizon,
        n_traj,
        seed: 20_240_611,
        recording: Recording::Snapshots(vec![horizon]),
    };
    let ens = mc_evolve(&k, InitialCondition::Maxwell { mass: big_m, beta: 1.0 }, &cfg)?;
    let px: Vec<f64> = ens.trajectories.iter().map(|t| t.final_momentum()[0]).collect();
    let d = ks_distance_normal(&px, 0.0, big_m.sqrt())?;
    let tol = KS_FACTOR / (n_traj as f64).sqrt();
    Ok(Outcome {
        pass: d < tol,
        detail: format!(
            "KS distance {d:.4} (tol {tol:.4}) after {:.1} jumps/trajectory",
            ens.total_jumps() as f64 / n_traj as f64
        ),
    })
}

fn friction_run(big_m: f64, seed: u64) -> Result<(f64, f64)> {
    let gas = unit_gas();
    let particle = ParticleSpec::new(big_m)?;
    let pot = PotentialSpec::gaussian(1.0, 1.0)?;
    let report = eta(&gas, &particle, &pot, &units(), &QuadratureSpec::default())?;
    let k = kernel(KernelVariant::BrownianLimit, big_m)?;
    let horizon = 1.0 / report.eta;
    let times: Vec<f64> = (0..=20).map(|i| horizon * i as f64 / 20.0).collect();
    let cfg = McConfig {
        horizon,
        n_traj: 10_000,
        seed,
        recording: Recording::Snapshots(times),
    };
    // far enough from equilibrium that the O(m/M) drift nonlinearity exceeds MC noise
    let p0 = 15.0 * big_m.sqrt();
    let ens = mc_evolve(&k, InitialCondition::Fixed([p0, 0.0, 0.0]), &cfg)?;
    let cmp = compare_with_mc(&report, &ens)?.expect("non-zero friction");
    Ok((cmp.deviation, cmp.fit.rate_se / report.eta))
}

fn friction_consistency() -> Result<Outcome> {
    let (d2, se2) = friction_run(100.0, 11)?;
    let (d3, se3) = friction_run(1000.0, 12)?;
    Ok(Outcome {
        pass: d2 < FRICTION_MC_TOL && d3 < d2,
        detail: format!(
            "m/M=0.01: deviation {d2:.4} (fit se {se2:.1e}, tol {FRICTION_MC_TOL}); \
             m/M=0.001: deviation {d3:.4} (fit se {se3:.1e})"
        ),
    })
}

/// Shared setup for the diffusive-limit grid: ħ = M = β = 1, η = 4.
fn brownian_setup() -> Result<(Coefficients, PositionGrid)> {
    Ok((Coefficients::new(4.0, 1.0, 1.0, &units())?, PositionGrid::centered(0.2, 128)?))
}

fn thermalization() -> Result<Outcome> {
    let u = units();
    let (c, grid) = brownian_setup()?;
    let (mass, beta) = (1.0, 1.0);
    let target = mass / beta;
    let t_end = 6.0 / c.eta;
    let dt = 5e-4;
    let schedule = GridSchedule {
        dt,
        steps: (t_end / dt).round() as usize,
        monitor_every: 500,
    };
    let starts = [
        GaussianState1D::coherent(0.0, 0.0, 0.1, &u)?,
        GaussianState1D::new(0.0, 0.0, 1.0, 4.0, 0.0, &u)?,
        GaussianState1D::coherent(2.0, 3.0, 0.25, &u)?,
    ];
    let mut worst = 0.0f64;
    for s0 in &starts {
        let moments = evolve_moments(s0, &c, mass, t_end)?;
        let rho = GridDensityMatrix::gaussian(grid, s0, &u)?;
        let run = evolve_grid(&rho, &c, mass, &u, &schedule)?;
        let grid_vp = run.state.moments(&u).var_p;
        worst = worst
            .max((moments.var_p - target).abs() / target)
            .max((grid_vp - target).abs() / target);
    }
    let mut identity = 0.0f64;
    let mut uncertainty = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let eta_v = 10f64.powf(rng.random_range(-4.0..3.0));
        let m = 10f64.powf(rng.random_range(-2.0..4.0));
        let b = 10f64.powf(rng.random_range(-2.0..2.0));
        let uu = UnitSystem::new(10f64.powf(rng.random_range(-1.0..1.0)))?;
        let cc = Coefficients::new(eta_v, m, b, &uu)?;
        identity = identity.max(cc.minimal_invasiveness_residual(&uu) / f64::EPSILON);
        let s = ThermalSpreads::new(m, b, &uu)?;
        uncertainty = uncertainty.max((s.uncertainty_product() - uu.hbar / 2.0).abs() / (uu.hbar / 2.0) / f64::EPSILON);
    }
    Ok(Outcome {
        pass: worst < THERMALIZATION_REL_TOL && identity <= IDENTITY_ULPS && uncertainty <= IDENTITY_ULPS,
        detail: format!(
            "max |var_p − M/β|/(M/β) {worst:.3e} over 3 states × 2 solvers (tol {THERMALIZATION_REL_TOL:e}); \
             D_pp·D_xx identity {identity:.1} eps, dp·dx identity {uncertainty:.1} eps (tol {IDENTITY_ULPS} eps)"
        ),
    })
}

fn positivity_and_trace() -> Result<Outcome> {
    let u = units();
    let c = Coefficients::new(4.0, 1.0, 1.0, &u)?;
    let grid = PositionGrid::centered(0.25, 64)?;
    let dt = 1.0 / generator_bound(&grid, &c, 1.0, &u);
    let rho = GridDensityMatrix::gaussian(grid, &GaussianState1D::coherent(1.0, 2.0, 0.2, &u)?, &u)?;
    let initial_min = positivity_check(&rho);
    let run = evolve_grid(
        &rho,
        &c,
        1.0,
        &u,
        &GridSchedule {
            dt,
            steps: 1000,
            monitor_every: 1,
        },
    )?;
    let drift = run.max_trace_drift().max((run.samples[0].trace - 1.0).abs());
    let min_eig = run.min_eigenvalue().min(initial_min);
    Ok(Outcome {
        pass: drift < TRACE_TOL && min_eig >= MIN_EIGENVALUE_TOL && run.samples.len() == 1001,
        detail: format!(
            "1000 steps of dt = {dt:.3e}: max trace drift {drift:.3e} (tol {TRACE_TOL:e}), \
             min eigenvalue {min_eig:.3e} (tol {MIN_EIGENVALUE_TOL:e})"
        ),
    })
}

fn translation_covariance() -> Result<Outcome> {
    let u = units();
    // coherence bands of a random pure state
    let k = kernel(KernelVariant::Exact, 3.0)?;
    let grid = MomentumGrid1D::symmetric(0.25, 48)?;
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let raw: Vec<Complex64> = grid
        .momenta()
        .iter()
        .map(|&p| {
            let env = (-p * p / 4.0).exp();
            Complex64::new(env * rng.random_range(-1.0..1.0), env * rng.random_range(-1.0..1.0))
        })
        .collect();
    let norm = (raw.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.spacing()).sqrt();
    let psi: Vec<Complex64> = raw.iter().map(|z| z / norm).collect();
    let bands: Vec<BandState> = [0i64, 1, -3, 7, 12]
        .iter()
        .map(|&o| BandState::from_wavefunction(grid, o, &psi))
        .collect::<Result<_>>()?;
    let band_residual = covariance_test(&k, &bands, 1.0, 0.01, 200)?;

    let (c, _) = brownian_setup()?;
    let pgrid = PositionGrid::centered(0.25, 64)?;
    let rho = GridDensityMatrix::gaussian(pgrid, &GaussianState1D::coherent(-0.5, 1.0, 0.3, &u)?, &u)?;
    let dt = 1.0 / generator_bound(&pgrid, &c, 1.0, &u);
    let grid_residual = translation_covariance_grid(
        &c,
        1.0,
        &u,
        &rho,
        pgrid.dx,
        &GridSchedule {
            dt,
            steps: 400,
            monitor_every: 400,
        },
    )?;
    Ok(Outcome {
        pass: band_residual < BAND_COVARIANCE_TOL && grid_residual < GRID_COVARIANCE_TOL,
        detail: format!(
            "band residual {band_residual:.3e} (tol {BAND_COVARIANCE_TOL:e}), \
             grid residual {grid_residual:.3e} (tol {GRID_COVARIANCE_TOL:e})"
        ),
    })
}

fn sampler_correctness() -> Result<Outcome> {
    let big_m = 4.0;
    let k = kernel(KernelVariant::Exact, big_m)?;
    let p = [0.0, 0.0, 1.5];
    let draws = 100_000usize;
    let q_cut = momentum_cutoff(k.potential(), k.spectral(), 1.5, big_m, &units())?;
    let q_bins = 12usize;
    let c_bins = 6usize;
    let q_edge = |i: usize| q_cut * i as f64 / q_bins as f64;
    let quad = QuadratureSpec::with_tolerances(1e-14, 1e-10);
    let mut mass = Vec::with_capacity(q_bins * c_bins);
    for i in 0..q_bins {
        for j in 0..c_bins {
            let (c0, c1) = (-1.0 + 2.0 * j as f64 / c_bins as f64, -1.0 + 2.0 * (j + 1) as f64 / c_bins as f64);
            let r = integrate_2d(
                |q: f64, c: f64| {
                    let s = (1.0 - c * c).max(0.0).sqrt();
                    2.0 * PI * q * q * k.intensity(&p, &[q * s, 0.0, q * c])
                },
                q_edge(i),
                q_edge(i + 1),
                &[],
                |_| (c0, c1, vec![]),
                &quad,
                &quad,
            )?;
            mass.push(r.value);
        }
    }
    let total: f64 = mass.iter().sum();
    let expected: Vec<f64> = mass.iter().map(|m| m / total * draws as f64).collect();
    let mut observed = vec![0u64; q_bins * c_bins];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..draws {
        let q = k.sample(&p, &mut rng)?;
        let qm = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt();
        let c = q[2] / qm;
        let i = ((qm / q_cut * q_bins as f64) as usize).min(q_bins - 1);
        let j = (((c + 1.0) / 2.0 * c_bins as f64) as usize).min(c_bins - 1);
        observed[i * c_bins + j] += 1;
    }
    let chi = chi_square(&observed, &expected)?;
    let gamma = k.rate(&p, &QuadratureSpec::default())?;
    Ok(Outcome {
        pass: chi.p_value > CHI_SQUARE_P_MIN,
        detail: format!(
            "chi² = {:.2} on {} dof, p = {:.4} (min {CHI_SQUARE_P_MIN}); bin mass / Γ = {:.3e}",
            chi.statistic,
            chi.dof,
            chi.p_value,
            (total / gamma - 1.0).abs()
        ),
    })
}

fn gradient_form() -> Result<Outcome> {
    let gas = unit_gas();
    let particle = ParticleSpec::new(100.0)?;
    let quad = QuadratureSpec::default();
    let mut worst = eta_gradient_form_residual(&gas, &particle, &PotentialSpec::gaussian(1.0, 1.0)?, &units(), &quad)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..5 {
        let nodes = 6;
        let q: Vec<f64> = (0..nodes).map(|i| 0.6 * i as f64).collect();
        let mut t: Vec<f64> = (0..nodes).map(|_| rng.random_range(-1.0..1.0)).collect();
        t[nodes - 1] = 0.0;
        let pot = PotentialSpec::tabulated(q, t)?;
        worst = worst.max(eta_gradient_form_residual(&gas, &particle, &pot, &units(), &quad)?);
    }
    Ok(Outcome {
        pass: worst < GRADIENT_FORM_TOL,
        detail: format!("max relative residual {worst:.3e} over Gaussian + 5 random tables (tol {GRADIENT_FORM_TOL:e})"),
    })
}

fn main() -> ExitCode {
    type Criterion = fn() -> Result<Outcome>;
    let criteria: [(&str, Criterion); 10] = [
        ("detailed balance", detailed_balance),
        ("FDT cross-form", fdt_cross_form),
        ("loss-term identity", loss_identity),
        ("Maxwell stationarity", stationarity),
        ("friction consistency", friction_consistency),
        ("diffusive thermalization", thermalization),
        ("positivity and trace", positivity_and_trace),
        ("translation covariance", translation_covariance),
        ("sampler correctness", sampler_correctness),
        ("gradient-form identity", gradient_form),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run().unwrap_or_else(|e| Outcome {
            pass: false,
            detail: format!("error: {e}"),
        });
        if !outcome.pass {
            failures += 1;
        }
        println!(
            "[{}] {:>2}. {name}: {} ({:.1} s)",
            if outcome.pass { "PASS" } else { "FAIL" },
            i + 1,
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
