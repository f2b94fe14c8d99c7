//! Dynamic structure factors S(q, E) of the medium and the quantities built
//! from them: response function, fluctuation-dissipation correlation
//! functions, phonon spectral atoms and Born scattering cross-sections.
//!
//! Sign convention: momentum `q` and energy `E` are positive when transferred
//! *to the test particle*. Every other module uses this convention.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::physics::{GasSpec, PotentialSpec, UnitSystem, Validate};
use crate::quadrature::{self, decay_cutoff, QuadResult, QuadratureSpec};
use crate::vec3::{self, Vec3};

/// ln(1e16): energy windows are truncated where the Gaussian of the
/// Maxwell-Boltzmann structure factor drops below 1e-16 of its peak.
const ENERGY_WINDOW_LOG: f64 = 36.841_361_487_904_734;

/// Radial momentum integrals are truncated where the integrand falls below
/// this fraction of its peak.
pub const RADIAL_CUTOFF_REL: f64 = 1e-18;

/// Phonon dispersion relation q -> ω_q.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dispersion {
    /// Flat optical branch, ω_q = ω.
    Einstein { omega: f64 },
    /// Linear acoustic branch, ω_q = c |q| / ħ.
    Acoustic { sound_speed: f64 },
}

impl Dispersion {
    pub fn omega(&self, q: f64, units: &UnitSystem) -> f64 {
        match *self {
            Dispersion::Einstein { omega } => omega,
            Dispersion::Acoustic { sound_speed } => sound_speed * q.abs() / units.hbar,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhononBath {
    pub dispersion: Dispersion,
    pub beta: f64,
}

/// The two-point correlation function of the medium, S(q, E).
///
/// S is the energy Fourier transform of the density autocorrelation
/// `⟨ρ_q† ρ_q(t)⟩ / N`, equivalently a thermally weighted sum of squared
/// density matrix elements over energy-conserving transitions. For the phonon
/// bath the density-displacement autocorrelation replaces the density one and
/// S collapses to two delta functions, which are returned as atoms by
/// [`phonon_spectral`] rather than evaluated pointwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralFunction {
    /// Free Maxwell-Boltzmann gas, exact form.
    MbExact(GasSpec),
    /// Small energy transfer limit of the Maxwell-Boltzmann form.
    MbLimit(GasSpec),
    Phonon(PhononBath),
}

impl SpectralFunction {
    pub fn gas(&self) -> Option<&GasSpec> {
        match self {
            SpectralFunction::MbExact(g) | SpectralFunction::MbLimit(g) => Some(g),
            SpectralFunction::Phonon(_) => None,
        }
    }

    pub fn beta(&self) -> f64 {
        match self {
            SpectralFunction::MbExact(g) | SpectralFunction::MbLimit(g) => g.beta,
            SpectralFunction::Phonon(b) => b.beta,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SpectralFunction::MbExact(_) => "mb_exact",
            SpectralFunction::MbLimit(_) => "mb_limit",
            SpectralFunction::Phonon(_) => "phonon",
        }
    }

    fn smooth_gas(&self) -> Result<&GasSpec> {
        self.gas().ok_or_else(|| {
            Error::Domain("phonon spectral function is a sum of delta atoms, not a density".into())
        })
    }

    /// ln S(|q|, E) for the smooth variants.
    pub fn ln_value(&self, q: f64, energy: f64) -> Result<f64> {
        let gas = self.smooth_gas()?;
        let q = q.abs();
        if q == 0.0 || !q.is_finite() {
            return Err(Error::Domain(format!(
                "structure factor needs a non-zero finite momentum transfer, got |q| = {q}"
            )));
        }
        let (m, beta) = (gas.mass, gas.beta);
        let norm = 0.5 * (beta * m / (2.0 * PI)).ln() - q.ln();
        Ok(match self {
            SpectralFunction::MbExact(_) => {
                let s = 2.0 * m * energy + q * q;
                norm - beta / (8.0 * m) * s * s / (q * q)
            }
            SpectralFunction::MbLimit(_) => norm - beta * q * q / (8.0 * m) - 0.5 * beta * energy,
            SpectralFunction::Phonon(_) => unreachable!(),
        })
    }

    /// S(|q|, E) for the smooth variants.
    pub fn value(&self, q: f64, energy: f64) -> Result<f64> {
        Ok(self.ln_value(q, energy)?.exp())
    }

    /// Infallible evaluation for quadrature integrands: 0 at q = 0.
    pub(crate) fn value_or_zero(&self, q: f64, energy: f64) -> f64 {
        self.value(q, energy).unwrap_or(0.0)
    }
}

/// E(q, p) = ((p + q)² − p²) / 2M, the energy gained by a particle of
/// momentum `p` absorbing momentum `q`.
pub fn energy_transfer(q: &Vec3, p: &Vec3, mass: f64) -> f64 {
    let pq = vec3::add(p, q);
    (vec3::dot(&pq, &pq) - vec3::dot(p, p)) / (2.0 * mass)
}

/// Energy transfer along a line: q and p collinear scalars.
#[inline]
pub(crate) fn energy_transfer_1d(q: f64, p: f64, mass: f64) -> f64 {
    (q * q + 2.0 * p * q) / (2.0 * mass)
}

/// Energy transfer with |q|, |p| and the cosine of the angle between them.
#[inline]
pub(crate) fn energy_transfer_polar(q: f64, p: f64, cos: f64, mass: f64) -> f64 {
    (q * q + 2.0 * p * q * cos) / (2.0 * mass)
}

/// S(q, E) for a momentum transfer vector.
pub fn s_eval(s: &SpectralFunction, q: &Vec3, energy: f64) -> Result<f64> {
    s.value(vec3::norm(q), energy)
}

/// [S(q, E) − e^{−βE} S(−q, −E)] / S(q, E), evaluated in log space so that
/// it stays meaningful where S itself underflows.
pub fn detailed_balance_residual(s: &SpectralFunction, q: &Vec3, energy: f64) -> Result<f64> {
    let forward = s.ln_value(vec3::norm(q), energy)?;
    let backward = s.ln_value(vec3::norm(&vec3::neg(q)), -energy)?;
    Ok(-(backward - s.beta() * energy - forward).exp_m1())
}

/// χ''(q, E) = π (1 − e^{βE}) S(q, E). Undefined (0/0 form) at E = 0, see
/// [`response_slope_at_zero`].
pub fn response_function(s: &SpectralFunction, q: &Vec3, energy: f64) -> Result<f64> {
    if energy == 0.0 {
        return Err(Error::Domain(
            "response function at E = 0 is a removable singularity; use response_slope_at_zero"
                .into(),
        ));
    }
    let value = s_eval(s, q, energy)?;
    Ok(PI * -(s.beta() * energy).exp_m1() * value)
}

/// lim_{E→0} χ''(q, E) / E = −πβ S(q, 0).
pub fn response_slope_at_zero(s: &SpectralFunction, q: &Vec3) -> Result<f64> {
    Ok(-PI * s.beta() * s_eval(s, q, 0.0)?)
}

/// The real correlation functions φ∓(q, t) of the density operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationPair {
    pub phi_minus: f64,
    pub phi_plus: f64,
    /// Sum of the two quadrature error estimates.
    pub error: f64,
}

fn fdt_window(s: &SpectralFunction, q: f64) -> Result<(f64, f64)> {
    match s {
        SpectralFunction::MbExact(gas) => {
            let recoil = q * q / (2.0 * gas.mass);
            let half_width = q * (2.0 * ENERGY_WINDOW_LOG / (gas.beta * gas.mass)).sqrt();
            let lo = -recoil - half_width;
            // the upper edge of the Gaussian can lie above E = 0
            Ok((lo, (-recoil + half_width).min(0.0)))
        }
        SpectralFunction::MbLimit(_) => Err(Error::Domain(
            "the small-energy limit grows like e^{-βE/2} for E → −∞; \
             the fluctuation-dissipation integrals over (−∞, 0] diverge"
                .into(),
        )),
        SpectralFunction::Phonon(_) => Err(Error::Domain(
            "phonon atoms have no smooth integrand; use phonon_spectral".into(),
        )),
    }
}

fn fdt_integrate<F: Fn(f64) -> f64>(
    s: &SpectralFunction,
    q: f64,
    t: f64,
    hbar: f64,
    quad: &QuadratureSpec,
    minus_weight: F,
    plus_weight: impl Fn(f64) -> f64,
    prefactor: f64,
) -> Result<CorrelationPair> {
    quad.validate()?;
    let (lo, hi) = fdt_window(s, q)?;
    let minus = quadrature::integrate(
        |e| (e * t / hbar).sin() * minus_weight(e),
        lo,
        hi,
        quad,
    )?;
    let plus = quadrature::integrate(|e| (e * t / hbar).cos() * plus_weight(e), lo, hi, quad)?;
    Ok(CorrelationPair {
        phi_minus: prefactor * minus.value,
        phi_plus: prefactor * plus.value,
        error: prefactor.abs() * (minus.error + plus.error),
    })
}

/// φ∓(q, t) from the structure factor:
///
/// φ⁻ = −(2/ħ) ∫_{−∞}^0 dE sin(Et/ħ) (1 − e^{βE}) S(q, E)
/// φ⁺ = −(2/ħ) ∫_{−∞}^0 dE cos(Et/ħ) coth(βE/2) (1 − e^{βE}) S(q, E)
pub fn fdt_phi(
    s: &SpectralFunction,
    q: &Vec3,
    t: f64,
    units: &UnitSystem,
    quad: &QuadratureSpec,
) -> Result<CorrelationPair> {
    let qm = vec3::norm(q);
    let beta = s.beta();
    let one_minus = |e: f64| -(beta * e).exp_m1();
    fdt_integrate(
        s,
        qm,
        t,
        units.hbar,
        quad,
        |e| one_minus(e) * s.value_or_zero(qm, e),
        |e| one_minus(e) / (0.5 * beta * e).tanh() * s.value_or_zero(qm, e),
        -2.0 / units.hbar,
    )
}

/// φ∓(q, t) from the response function χ'' = [`response_function`]:
///
/// φ⁻ = −(2/πħ) ∫_{−∞}^0 dE sin(Et/ħ) χ''(q, E)
/// φ⁺ = −(2/πħ) ∫_{−∞}^0 dE cos(Et/ħ) coth(βE/2) χ''(q, E)
pub fn fdt_phi_from_response(
    s: &SpectralFunction,
    q: &Vec3,
    t: f64,
    units: &UnitSystem,
    quad: &QuadratureSpec,
) -> Result<CorrelationPair> {
    let beta = s.beta();
    let chi = |e: f64| response_function(s, q, e).unwrap_or(0.0);
    fdt_integrate(
        s,
        vec3::norm(q),
        t,
        units.hbar,
        quad,
        chi,
        |e| chi(e) / (0.5 * beta * e).tanh(),
        -2.0 / (PI * units.hbar),
    )
}

/// ∫ dE S(q, E), the zeroth energy moment (unity for the exact MB form).
pub fn zeroth_moment(s: &SpectralFunction, q: f64, quad: &QuadratureSpec) -> Result<QuadResult> {
    let gas = s.smooth_gas()?;
    if matches!(s, SpectralFunction::MbLimit(_)) {
        return Err(Error::Domain(
            "the small-energy limit is not normalizable over E".into(),
        ));
    }
    let recoil = q * q / (2.0 * gas.mass);
    let half = q * (2.0 * ENERGY_WINDOW_LOG / (gas.beta * gas.mass)).sqrt();
    quadrature::integrate(
        |e| s.value_or_zero(q, e),
        -recoil - half,
        -recoil + half,
        quad,
    )
}

/// One delta-function atom of a singular spectral function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralAtom {
    pub energy: f64,
    pub weight: f64,
}

/// Bose occupation N_β(x) = 1 / (e^{βx} − 1).
pub fn bose_occupation(beta: f64, energy: f64) -> f64 {
    1.0 / (beta * energy).exp_m1()
}

/// Phonon spectral function at momentum `q` as two atoms:
/// emission at E = −ħω_q with weight 1 + N_β, absorption at E = +ħω_q with
/// weight N_β.
pub fn phonon_spectral(bath: &PhononBath, q: f64, units: &UnitSystem) -> Result<[SpectralAtom; 2]> {
    let quantum = units.hbar * bath.dispersion.omega(q, units);
    if !(quantum > 0.0) || !quantum.is_finite() {
        return Err(Error::Domain(format!(
            "phonon energy must be positive and finite, got ħω = {quantum}"
        )));
    }
    if !(bath.beta > 0.0) {
        return Err(Error::Domain(format!(
            "inverse temperature must be positive, got {}",
            bath.beta
        )));
    }
    let occupation = bose_occupation(bath.beta, quantum);
    Ok([
        SpectralAtom {
            energy: -quantum,
            weight: 1.0 + occupation,
        },
        SpectralAtom {
            energy: quantum,
            weight: occupation,
        },
    ])
}

fn require_smooth(s: &SpectralFunction) -> Result<()> {
    s.smooth_gas()?.validate()
}

/// Born differential cross-section d²σ / dΩ' dE' for p → p' = p + q:
/// (2πħ)⁶ (M / 2πħ²)² (p'/p) |t̃(q)|² S(q, E(q, p)).
pub fn born_cross_section(
    potential: &PotentialSpec,
    s: &SpectralFunction,
    p: &Vec3,
    q: &Vec3,
    mass: f64,
    units: &UnitSystem,
) -> Result<f64> {
    require_smooth(s)?;
    let p_in = vec3::norm(p);
    if p_in == 0.0 {
        return Err(Error::Domain("incoming momentum must be non-zero".into()));
    }
    let p_out = vec3::norm(&vec3::add(p, q));
    if p_out == 0.0 {
        return Err(Error::Domain("outgoing momentum must be non-zero".into()));
    }
    let t2 = potential.ft_sq(vec3::norm(q), units);
    if t2 == 0.0 {
        return Ok(0.0);
    }
    let energy = energy_transfer(q, p, mass);
    Ok(born_prefactor(mass, units) * (p_out / p_in) * t2 * s_eval(s, q, energy)?)
}

fn born_prefactor(mass: f64, units: &UnitSystem) -> f64 {
    let h = units.hbar;
    (2.0 * PI * h).powi(6) * (mass / (2.0 * PI * h * h)).powi(2)
}

/// Total cross-section σ(p) and the corresponding loss rate (n / 2M) |p| σ(p).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossSection {
    pub sigma: f64,
    pub loss_rate: f64,
    pub error: f64,
}

/// Upper bound on the momentum transfers that matter for a particle of
/// momentum `p`: beyond it the collision integrand is below
/// [`RADIAL_CUTOFF_REL`] of its peak (or t̃ vanishes identically).
pub fn momentum_cutoff(
    potential: &PotentialSpec,
    s: &SpectralFunction,
    p: f64,
    mass: f64,
    units: &UnitSystem,
) -> Result<f64> {
    let gas = *s.smooth_gas()?;
    let gas_scale = (gas.mass / gas.beta).sqrt();
    let scale = potential
        .momentum_scale(units)
        .map_or(gas_scale, |s| s.min(gas_scale));
    let ratio = gas.mass / mass;
    let profile = |q: f64| {
        let mut best = 0.0f64;
        let mut cosines = vec![-1.0, 0.0, 1.0];
        if matches!(s, SpectralFunction::MbExact(_)) && p > 0.0 {
            // where 2mE + q² vanishes the Gaussian factor is maximal
            let c = -q * (1.0 + ratio) / (2.0 * ratio * p);
            if c.abs() <= 1.0 {
                cosines.push(c);
            }
        }
        for c in cosines {
            best = best.max(s.value_or_zero(q, energy_transfer_polar(q, p, c, mass)));
        }
        q * q * potential.ft_sq(q, units) * best
    };
    let limit = potential
        .support_end()
        .unwrap_or(f64::INFINITY)
        .min(1e4 * scale.max(p));
    Ok(decay_cutoff(profile, scale, RADIAL_CUTOFF_REL, limit))
}

/// Outgoing-state integral of [`born_cross_section`] over dΩ' dE'.
///
/// The polar angle of p' around p is parametrized by u with cos θ' = 1 − u²
/// so that the integrable 1/q singularity at p' = p is regularized.
pub fn total_cross_section(
    potential: &PotentialSpec,
    s: &SpectralFunction,
    p: &Vec3,
    mass: f64,
    units: &UnitSystem,
    quad: &QuadratureSpec,
) -> Result<CrossSection> {
    require_smooth(s)?;
    quad.validate()?;
    let p_in = vec3::norm(p);
    if p_in == 0.0 {
        return Err(Error::Domain(
            "incoming momentum must be non-zero (flux undefined)".into(),
        ));
    }
    let density = s.gas().map(|g| g.density).unwrap_or(0.0);
    if potential.is_zero() {
        return Ok(CrossSection {
            sigma: 0.0,
            loss_rate: 0.0,
            error: 0.0,
        });
    }
    let q_cut = momentum_cutoff(potential, s, p_in, mass, units)?;
    let p_lo = (p_in - q_cut).max(0.0);
    let p_hi = p_in + q_cut;
    let e_in = p_in * p_in / (2.0 * mass);
    let prefactor = born_prefactor(mass, units);
    let kinks = potential.kinks().to_vec();

    let integrand = |e_out: f64, u: f64| {
        let p_out = (2.0 * mass * e_out).sqrt();
        let dp = p_out - p_in;
        let q = (dp * dp + 2.0 * p_in * p_out * u * u).sqrt();
        if q == 0.0 {
            return 0.0;
        }
        let t2 = potential.ft_sq(q, units);
        if t2 == 0.0 {
            return 0.0;
        }
        let sv = s.value_or_zero(q, e_out - e_in);
        // dΩ' = 2π d(cos θ') = 4π u du
        4.0 * PI * u * prefactor * (p_out / p_in) * t2 * sv
    };
    let inner = |e_out: f64| {
        let p_out = (2.0 * mass * e_out).sqrt();
        let dp = p_out - p_in;
        // tabulated kinks at |q| = k map to u = sqrt((k² − dp²) / (2 p p'))
        let mut points: Vec<f64> = kinks
            .iter()
            .filter(|&&k| k > dp.abs() && p_out > 0.0)
            .map(|&k| ((k * k - dp * dp) / (2.0 * p_in * p_out)).sqrt())
            .collect();
        if p_out > 0.0 && dp.abs() > 0.0 {
            // scale where q changes from |dp| dominated to angular dominated
            points.push(dp.abs() / (2.0 * p_in * p_out).sqrt());
        }
        (0.0, 2f64.sqrt(), points)
    };
    let outer_points = vec![e_in];
    let inner_spec = QuadratureSpec {
        abs_tol: quad.abs_tol * 1e-3,
        rel_tol: quad.rel_tol * 1e-2,
        max_intervals: quad.max_intervals,
    };
    let r = quadrature::integrate_2d(
        integrand,
        p_lo * p_lo / (2.0 * mass),
        p_hi * p_hi / (2.0 * mass),
        &outer_points,
        inner,
        quad,
        &inner_spec,
    )?;
    let sigma = r.value;
    Ok(CrossSection {
        sigma,
        loss_rate: density / (2.0 * mass) * p_in * sigma,
        error: r.error,
    })
}

/// Collision rate Γ(p) = (2π/ħ)(2πħ)³ n ∫ d³q |t̃(q)|² S(q, E(q, p)), the
/// scalar symbol of the anticommutator (loss) term of the master equation.
pub fn scattering_rate(
    potential: &PotentialSpec,
    s: &SpectralFunction,
    p: f64,
    mass: f64,
    units: &UnitSystem,
    quad: &QuadratureSpec,
) -> Result<QuadResult> {
    require_smooth(s)?;
    quad.validate()?;
    if potential.is_zero() {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    let density = s.gas().map(|g| g.density).unwrap_or(0.0);
    let prefactor = 2.0 * PI / units.hbar * units.phase_space_cell() * density;
    let q_cut = momentum_cutoff(potential, s, p, mass, units)?;
    let integrand = |q: f64, c: f64| {
        let t2 = potential.ft_sq(q, units);
        if t2 == 0.0 {
            return 0.0;
        }
        2.0 * PI * q * q * t2 * s.value_or_zero(q, energy_transfer_polar(q, p, c, mass))
    };
    let inner_spec = QuadratureSpec {
        abs_tol: quad.abs_tol * 1e-3,
        rel_tol: quad.rel_tol * 1e-2,
        max_intervals: quad.max_intervals,
    };
    let r = quadrature::integrate_2d(
        integrand,
        0.0,
        q_cut,
        potential.kinks(),
        |_| (-1.0, 1.0, vec![]),
        &QuadratureSpec {
            abs_tol: quad.abs_tol / prefactor,
            ..*quad
        },
        &inner_spec,
    )?;
    Ok(QuadResult {
        value: prefactor * r.value,
        error: prefactor * r.error,
        intervals: r.intervals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit_gas() -> GasSpec {
        GasSpec::new(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn energy_transfer_examples() {
        assert_eq!(energy_transfer(&[0.0; 3], &[3.0, -1.0, 2.0], 2.0), 0.0);
        assert_eq!(energy_transfer(&[1.0, 0.0, 0.0], &[0.0; 3], 1.0), 0.5);
        assert_eq!(energy_transfer(&[1.0, 0.0, 0.0], &[-1.0, 0.0, 0.0], 1.0), -0.5);
    }

    #[test]
    fn mb_values_at_zero_energy() {
        let expected = (1.0 / (2.0 * PI)).sqrt() * (-0.125f64).exp();
        let exact = SpectralFunction::MbExact(unit_gas());
        let limit = SpectralFunction::MbLimit(unit_gas());
        let q = [1.0, 0.0, 0.0];
        assert_relative_eq!(s_eval(&exact, &q, 0.0).unwrap(), expected, max_relative = 1e-15);
        assert_relative_eq!(s_eval(&limit, &q, 0.0).unwrap(), expected, max_relative = 1e-15);
        assert_relative_eq!(expected, 0.352065, max_relative = 2e-6);
    }

    #[test]
    fn zero_momentum_is_a_domain_error() {
        let s = SpectralFunction::MbExact(unit_gas());
        assert!(matches!(s_eval(&s, &[0.0; 3], 1.0), Err(Error::Domain(_))));
        assert!(detailed_balance_residual(&s, &[0.0; 3], 1.0).is_err());
    }

    #[test]
    fn detailed_balance_at_sample_point() {
        for s in [
            SpectralFunction::MbExact(unit_gas()),
            SpectralFunction::MbLimit(unit_gas()),
        ] {
            let r = detailed_balance_residual(&s, &[1.0, 0.0, 0.0], 0.5).unwrap();
            assert!(r.abs() < 1e-14, "{r}");
            // isotropy at E = 0
            assert_eq!(detailed_balance_residual(&s, &[0.3, -0.2, 0.7], 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn limit_converges_to_exact_for_small_energy() {
        // fixed q, E -> 0: relative difference shrinks linearly
        let gas = GasSpec::new(1.0, 2.0, 1.0).unwrap();
        let exact = SpectralFunction::MbExact(gas);
        let limit = SpectralFunction::MbLimit(gas);
        let q = 0.8;
        let mut previous = f64::INFINITY;
        for k in 1..8 {
            let e = 10f64.powi(-k);
            let a = exact.value(q, e).unwrap();
            let b = limit.value(q, e).unwrap();
            let rel = ((a - b) / a).abs();
            assert!(rel < previous, "E = {e}: {rel} !< {previous}");
            previous = rel;
        }
        assert!(previous < 1e-6);
    }

    #[test]
    fn response_function_properties() {
        let s = SpectralFunction::MbExact(GasSpec::new(1.3, 0.7, 1.0).unwrap());
        let q = [0.4, 0.3, -0.2];
        for e in [-2.0, -0.3, 0.01, 0.5, 3.0] {
            let a = response_function(&s, &q, e).unwrap();
            let b = response_function(&s, &vec3::neg(&q), -e).unwrap();
            assert!((a + b).abs() <= 1e-10 * a.abs().max(1e-300), "E = {e}");
            if e > 0.0 {
                assert!(a < 0.0);
            }
        }
        assert!(response_function(&s, &q, 0.0).is_err());
        let slope = response_slope_at_zero(&s, &q).unwrap();
        for e in [1e-4, 1e-6, -1e-6] {
            let ratio = response_function(&s, &q, e).unwrap() / e;
            assert_relative_eq!(ratio, slope, max_relative = 1e-3);
        }
    }

    #[test]
    fn fdt_routes_agree_and_have_expected_signs() {
        let s = SpectralFunction::MbExact(unit_gas());
        let u = UnitSystem::default();
        let quad = QuadratureSpec::with_tolerances(1e-13, 1e-12);
        let q = [0.0, 0.0, 1.2];
        let at_zero = fdt_phi(&s, &q, 0.0, &u, &quad).unwrap();
        assert_eq!(at_zero.phi_minus, 0.0);
        assert!(at_zero.phi_plus > 0.0);
        for t in [0.3, 1.0, 4.0] {
            let a = fdt_phi(&s, &q, t, &u, &quad).unwrap();
            let b = fdt_phi_from_response(&s, &q, t, &u, &quad).unwrap();
            assert!((a.phi_minus - b.phi_minus).abs() < 1e-8);
            assert!((a.phi_plus - b.phi_plus).abs() < 1e-8);
        }
        assert!(fdt_phi(&SpectralFunction::MbLimit(unit_gas()), &q, 1.0, &u, &quad).is_err());
    }

    #[test]
    fn normalization_of_exact_form() {
        let quad = QuadratureSpec::with_tolerances(1e-12, 1e-12);
        for gas in [unit_gas(), GasSpec::new(4.0, 0.25, 2.0).unwrap()] {
            let s = SpectralFunction::MbExact(gas);
            for q in [0.05, 1.0, 7.0] {
                let r = zeroth_moment(&s, q, &quad).unwrap();
                assert_relative_eq!(r.value, 1.0, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn phonon_atoms() {
        let u = UnitSystem::default();
        let bath = PhononBath {
            dispersion: Dispersion::Einstein { omega: 1.0 },
            beta: 1.0,
        };
        let atoms = phonon_spectral(&bath, 0.5, &u).unwrap();
        let n = 1.0 / (std::f64::consts::E - 1.0);
        assert_relative_eq!(atoms[1].weight, n, max_relative = 1e-15);
        assert_relative_eq!(atoms[1].weight, 0.581977, max_relative = 1e-6);
        assert_relative_eq!(atoms[0].weight, 1.0 + n, max_relative = 1e-15);
        assert_relative_eq!(atoms[1].weight / atoms[0].weight, (-1f64).exp(), max_relative = 1e-14);

        let cold = PhononBath {
            beta: 1e6,
            ..bath
        };
        let atoms = phonon_spectral(&cold, 0.5, &u).unwrap();
        assert_eq!(atoms[0].weight, 1.0);
        assert_eq!(atoms[1].weight, 0.0);
        assert_eq!(atoms[0].energy, -1.0);

        let acoustic = PhononBath {
            dispersion: Dispersion::Acoustic { sound_speed: 2.0 },
            beta: 1.0,
        };
        assert!(phonon_spectral(&acoustic, 0.0, &u).is_err());
        assert_eq!(phonon_spectral(&acoustic, 0.25, &u).unwrap()[1].energy, 0.5);
    }

    #[test]
    fn cross_section_edge_cases() {
        let u = UnitSystem::default();
        let s = SpectralFunction::MbExact(unit_gas());
        let zero = PotentialSpec::gaussian(0.0, 1.0).unwrap();
        let pot = PotentialSpec::gaussian(1.0, 1.0).unwrap();
        let p = [1.0, 0.0, 0.0];
        assert_eq!(born_cross_section(&zero, &s, &p, &[0.1, 0.2, 0.0], 2.0, &u).unwrap(), 0.0);
        assert!(born_cross_section(&pot, &s, &[0.0; 3], &[0.1, 0.0, 0.0], 2.0, &u).is_err());
        assert!(born_cross_section(&pot, &s, &p, &[-1.0, 0.0, 0.0], 2.0, &u).is_err());

        // elastic: |p'| = |p|, so the flux ratio is one
        let q = [-1.0, 1.0, 0.0];
        let value = born_cross_section(&pot, &s, &p, &q, 2.0, &u).unwrap();
        let expected = born_prefactor(2.0, &u)
            * pot.ft_sq(2f64.sqrt(), &u)
            * s_eval(&s, &q, 0.0).unwrap();
        assert_relative_eq!(value, expected, max_relative = 1e-14);

        // forward scattering: E ∝ q, so S and σ grow like 1/q
        let small = |eps: f64| born_cross_section(&pot, &s, &p, &[eps, 0.0, 0.0], 2.0, &u).unwrap();
        let ratio = small(1e-4) / small(2e-4);
        assert!((ratio - 2.0).abs() < 0.01, "{ratio}");

        let quad = QuadratureSpec::default();
        let xs = total_cross_section(&zero, &s, &p, 2.0, &u, &quad).unwrap();
        assert_eq!(xs.sigma, 0.0);
        assert!(total_cross_section(&pot, &s, &[0.0; 3], 2.0, &u, &quad).is_err());
    }

    proptest! {
        #[test]
        fn positive_and_detailed_balanced(
            q in 1e-2f64..10.0, e in -5.0f64..5.0, m in 0.1f64..10.0, beta in 0.1f64..10.0
        ) {
            let gas = GasSpec::new(m, beta, 1.0).unwrap();
            for s in [SpectralFunction::MbExact(gas), SpectralFunction::MbLimit(gas)] {
                let r = detailed_balance_residual(&s, &[q, 0.0, 0.0], e).unwrap();
                // round-off of the log-space difference grows with the exponent size
                let scale = 1.0 + s.ln_value(q, e).unwrap().abs() + s.ln_value(q, -e).unwrap().abs();
                prop_assert!(r.abs() < 8.0 * f64::EPSILON * scale, "{} {}", s.name(), r);
                prop_assert!(s.value(q, e).unwrap() >= 0.0);
            }
        }
    }
}
