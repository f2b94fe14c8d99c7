//! Microscopic friction coefficient
//!
//! η = (β/2M)(2π/ħ)(2πħ)³ n ∫ d³q |t̃(q)|² (q²/3) S(q, 0),
//!
//! its gradient-correlation form, and its comparison with the relaxation of
//! the mean momentum in Monte Carlo runs of the Brownian-limit kernel.

use std::f64::consts::PI;

use crate::brownian::Coefficients;
use crate::error::{invalid, Error, Result};
use crate::kinetics::{DiagonalEnsemble, KernelVariant, Recording};
use crate::physics::{GasSpec, ParticleSpec, PotentialSpec, UnitSystem, Validate};
use crate::quadrature::{self, decay_cutoff, QuadratureSpec};
use crate::stats::{fit_exponential, ExponentialFit};
use crate::structure_factor::SpectralFunction;
use crate::vec3;

/// Radial truncation: the integrand is dropped once it stays below this
/// fraction of its peak.
pub const RADIAL_CUTOFF_REL: f64 = 1e-18;

/// Number of (q, q²|t̃|²S(q,0)) pairs stored in a report.
pub const SAMPLE_COUNT: usize = 256;

/// η for the Gaussian potential g = r = 1 with m = β = n = ħ = 1 and
/// M = 100, as produced by `examples/friction_reference.rs` (adaptive
/// Gauss–Kronrod and 10⁶-point trapezoid agree to 1e−8 relative).
pub const REFERENCE_ETA: f64 = 8.36130185142268e-5;

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FrictionReport {
    pub eta: f64,
    pub error_estimate: f64,
    pub q_max: f64,
    pub d_pp: f64,
    pub d_xx: f64,
    /// (q, q²|t̃(q)|²S(q,0)) on a uniform grid over (0, q_max].
    pub samples: Vec<(f64, f64)>,
    pub mc_rate: Option<f64>,
    pub mc_deviation: Option<f64>,
    pub mass_ratio: f64,
}

struct Setup {
    spectral: SpectralFunction,
    q_max: f64,
}

impl Setup {
    fn new(
        gas: &GasSpec,
        particle: &ParticleSpec,
        potential: &PotentialSpec,
        units: &UnitSystem,
    ) -> Result<Self> {
        gas.validate()?;
        particle.validate()?;
        potential.validate()?;
        units.validate()?;
        let spectral = SpectralFunction::MbExact(*gas);
        let thermal = (gas.mass / gas.beta).sqrt();
        let scale = potential.momentum_scale(units).map_or(thermal, |s| s.min(thermal));
        let limit = potential.support_end().unwrap_or(1e4 * scale);
        let profile = |q: f64| q * q * weight(potential, &spectral, units, q);
        let q_max = if potential.is_zero() {
            0.0
        } else {
            decay_cutoff(profile, scale, RADIAL_CUTOFF_REL, limit)
        };
        Ok(Self { spectral, q_max })
    }
}

/// q²|t̃(q)|²S(q, 0)
fn weight(potential: &PotentialSpec, s: &SpectralFunction, units: &UnitSystem, q: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    let t2 = potential.ft_sq(q, units);
    if t2 == 0.0 {
        return 0.0;
    }
    q * q * t2 * s.value_or_zero(q, 0.0)
}

fn prefactor(gas: &GasSpec, particle: &ParticleSpec, units: &UnitSystem) -> f64 {
    gas.beta / (2.0 * particle.mass) * (2.0 * PI / units.hbar) * units.phase_space_cell() * gas.density
}

/// Radial quadrature of the friction integral.
pub fn eta(
    gas: &GasSpec,
    particle: &ParticleSpec,
    potential: &PotentialSpec,
    units: &UnitSystem,
    quad: &QuadratureSpec,
) -> Result<FrictionReport> {
    quad.validate()?;
    let setup = Setup::new(gas, particle, potential, units)?;
    let c = prefactor(gas, particle, units) * 4.0 * PI / 3.0;
    let (value, error) = if setup.q_max == 0.0 {
        (0.0, 0.0)
    } else {
        let r = quadrature::integrate_with_points(
            |q| c * q * q * weight(potential, &setup.spectral, units, q),
            0.0,
            setup.q_max,
            potential.kinks(),
            quad,
        )?;
        (r.value, r.error)
    };
    let samples = (1..=SAMPLE_COUNT)
        .map(|i| {
            let q = setup.q_max * i as f64 / SAMPLE_COUNT as f64;
            (q, weight(potential, &setup.spectral, units, q))
        })
        .collect();
    let coeff = Coefficients::new(value, particle.mass, gas.beta, units)?;
    Ok(FrictionReport {
        eta: value,
        error_estimate: error,
        q_max: setup.q_max,
        d_pp: coeff.d_pp,
        d_xx: coeff.d_xx,
        samples,
        mc_rate: None,
        mc_deviation: None,
        mass_ratio: particle.mass_ratio(gas),
    })
}

/// Same integral by the composite trapezoid rule with `points` nodes on
/// [0, q_max].
pub fn eta_trapezoid(
    gas: &GasSpec,
    particle: &ParticleSpec,
    potential: &PotentialSpec,
    units: &UnitSystem,
    points: usize,
) -> Result<f64> {
    let setup = Setup::new(gas, particle, potential, units)?;
    if setup.q_max == 0.0 {
        return Ok(0.0);
    }
    let c = prefactor(gas, particle, units) * 4.0 * PI / 3.0;
    Ok(quadrature::trapezoid(
        |q| c * q * q * weight(potential, &setup.spectral, units, q),
        0.0,
        setup.q_max,
        points,
    ))
}

/// (1/N)∫dt ⟨ρ_q† ρ_q(t)⟩ = 2πħ S(q, 0).
pub fn density_autocorrelation_integral(s: &SpectralFunction, q: f64, units: &UnitSystem) -> f64 {
    2.0 * PI * units.hbar * s.value_or_zero(q, 0.0)
}

/// Relative difference between η and the gradient-correlation form
///
/// (β/6M)(2π/ħ)(2πħ)² n ∫ d³q |t̃|² (1/N)∫dt ⟨∇ρ_q†·∇ρ_q(t)⟩,
///
/// with ∇ρ_q = q ρ_q. Defined as 0 for a vanishing potential.
pub fn eta_gradient_form_residual(
    gas: &GasSpec,
    particle: &ParticleSpec,
    potential: &PotentialSpec,
    units: &UnitSystem,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let report = eta(gas, particle, potential, units, quad)?;
    if report.eta == 0.0 {
        return Ok(0.0);
    }
    let s = SpectralFunction::MbExact(*gas);
    let c = gas.beta / (6.0 * particle.mass)
        * (2.0 * PI / units.hbar)
        * (2.0 * PI * units.hbar).powi(2)
        * gas.density;
    let gradient = |q: f64| {
        let t2 = potential.ft_sq(q, units);
        if t2 == 0.0 || q <= 0.0 {
            return 0.0;
        }
        let qv = [q, 0.0, 0.0];
        // ⟨∇ρ†·∇ρ⟩ = |q|² ⟨ρ†ρ⟩
        let corr = vec3::dot(&qv, &qv) * density_autocorrelation_integral(&s, q, units);
        c * 4.0 * PI * q * q * t2 * corr
    };
    let r = quadrature::integrate_with_points(gradient, 0.0, report.q_max, potential.kinks(), quad)?;
    Ok((r.value - report.eta).abs() / report.eta)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct McComparison {
    pub fit: ExponentialFit,
    pub deviation: f64,
}

/// Fits ⟨p(t)⟩·e, with e the direction of the initial mean momentum, to an
/// exponential and returns |γ − η|/η. Returns `None` when η = 0.
///
/// Uses the snapshot times for [`Recording::Snapshots`] and 33 uniform times
/// over the horizon otherwise.
pub fn compare_with_mc(
    report: &FrictionReport,
    ensemble: &DiagonalEnsemble,
) -> Result<Option<McComparison>> {
    if report.eta == 0.0 {
        return Ok(None);
    }
    if ensemble.variant != KernelVariant::BrownianLimit {
        return Err(invalid("ensemble", "needs the BrownianLimit kernel variant"));
    }
    if report.mass_ratio > 0.01 * (1.0 + 1e-12) {
        return Err(invalid(
            "mass_ratio",
            format!("m/M = {} exceeds 0.01", report.mass_ratio),
        ));
    }
    if ensemble.is_empty() {
        return Err(invalid("ensemble", "no trajectories"));
    }
    let times: Vec<f64> = match &ensemble.recording {
        Recording::Snapshots(t) => t.clone(),
        Recording::Jumps => (0..=32).map(|i| ensemble.horizon * i as f64 / 32.0).collect(),
    };
    let p0 = ensemble.mean_momentum(times[0]);
    let norm = vec3::norm(&p0);
    if norm == 0.0 {
        return Err(Error::Fit("initial mean momentum vanishes".into()));
    }
    let e = vec3::scale(&p0, 1.0 / norm);
    let values: Vec<f64> = times
        .iter()
        .map(|&t| vec3::dot(&ensemble.mean_momentum(t), &e))
        .collect();
    let fit = fit_exponential(&times, &values)?;
    Ok(Some(McComparison {
        fit,
        deviation: (fit.rate - report.eta).abs() / report.eta,
    }))
}

impl FrictionReport {
    pub fn with_mc(mut self, cmp: &McComparison) -> Self {
        self.mc_rate = Some(cmp.fit.rate);
        self.mc_deviation = Some(cmp.deviation);
        self
    }
}

/// Closed form for the Gaussian potential g e^{−q²r²/2ħ²}/(2πħ)³.
pub fn eta_gaussian_closed_form(
    gas: &GasSpec,
    particle: &ParticleSpec,
    strength: f64,
    range: f64,
    units: &UnitSystem,
) -> f64 {
    let hbar = units.hbar;
    let a = range * range / (hbar * hbar) + gas.beta / (8.0 * gas.mass);
    gas.beta / (2.0 * particle.mass) * (2.0 * PI / hbar) * (4.0 * PI / 3.0) * gas.density
        * strength
        * strength
        * (gas.beta * gas.mass / (2.0 * PI)).sqrt()
        / (units.phase_space_cell() * 2.0 * a * a)
}
