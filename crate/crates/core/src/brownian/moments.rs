//! Closed-form first and second moments under the diffusive master equation.
//!
//! The equation is quadratic in x and p, so Gaussian states stay Gaussian and
//! the moments obey the closed linear system
//!
//! d⟨x⟩/dt = ⟨p⟩/M,              d⟨p⟩/dt = −η⟨p⟩,
//! dV_p/dt = −2η V_p + 2D_pp,    dC/dt = V_p/M − ηC,
//! dV_x/dt = 2C/M + 2D_xx,
//!
//! with C = ⟨xp + px⟩/2 − ⟨x⟩⟨p⟩.

use super::coefficients::Coefficients;
use crate::error::{invalid, Result};
use crate::physics::UnitSystem;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GaussianState1D {
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_x: f64,
    pub var_p: f64,
    pub cov_xp: f64,
}

impl GaussianState1D {
    /// Validated state: finite entries, non-negative variances and the
    /// Robertson–Schrödinger bound var_x var_p − cov² ≥ ħ²/4 (to 1e−10).
    pub fn new(
        mean_x: f64,
        mean_p: f64,
        var_x: f64,
        var_p: f64,
        cov_xp: f64,
        units: &UnitSystem,
    ) -> Result<Self> {
        let s = Self {
            mean_x,
            mean_p,
            var_x,
            var_p,
            cov_xp,
        };
        if ![mean_x, mean_p, var_x, var_p, cov_xp].iter().all(|v| v.is_finite()) {
            return Err(invalid("gaussian_state", "entries must be finite"));
        }
        if var_x < 0.0 || var_p < 0.0 {
            return Err(invalid("gaussian_state", "variances must be >= 0"));
        }
        let bound = 0.25 * units.hbar * units.hbar;
        if s.uncertainty() < bound * (1.0 - 1e-10) {
            return Err(invalid(
                "gaussian_state",
                format!("uncertainty {} below ħ²/4 = {bound}", s.uncertainty()),
            ));
        }
        Ok(s)
    }

    /// Minimum-uncertainty packet with position variance `var_x`.
    pub fn coherent(mean_x: f64, mean_p: f64, var_x: f64, units: &UnitSystem) -> Result<Self> {
        Self::new(mean_x, mean_p, var_x, 0.25 * units.hbar * units.hbar / var_x, 0.0, units)
    }

    /// var_x var_p − cov_xp²
    pub fn uncertainty(&self) -> f64 {
        self.var_x * self.var_p - self.cov_xp * self.cov_xp
    }
}

/// (1 − e^{−ηt})/η, tending to t as η → 0.
fn g1(eta: f64, t: f64) -> f64 {
    if eta == 0.0 {
        t
    } else {
        -(-eta * t).exp_m1() / eta
    }
}

/// (1 − e^{−2ηt})/(2η).
fn h1(eta: f64, t: f64) -> f64 {
    g1(2.0 * eta, t)
}

/// ∫₀ᵗ g1(s)² ds.
fn g1_sq_integral(eta: f64, t: f64) -> f64 {
    let x = eta * t;
    if x < 0.5 {
        // (1/η³) Σ_{n≥3} (−1)^{n+1} (2^{n−1} − 2) xⁿ/n!, written as (t³/3) K(x)
        let mut sum = 0.0;
        let mut term = x.powi(3) / 6.0; // xⁿ/n! at n = 3
        for n in 3..40 {
            let c = (2f64.powi(n - 1) - 2.0) * if n % 2 == 1 { 1.0 } else { -1.0 };
            sum += c * term;
            term *= x / (n + 1) as f64;
        }
        let k = if x == 0.0 { 1.0 } else { 3.0 * sum / x.powi(3) };
        t.powi(3) / 3.0 * k
    } else {
        (t - 2.0 * g1(eta, t) + h1(eta, t)) / (eta * eta)
    }
}

/// Moments at time `t` starting from `state`.
pub fn evolve_moments(
    state: &GaussianState1D,
    coeff: &Coefficients,
    mass: f64,
    t: f64,
) -> Result<GaussianState1D> {
    if !(mass > 0.0) {
        return Err(invalid("particle_mass_M", "must be positive"));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid("t", "must be finite and >= 0"));
    }
    let eta = coeff.eta;
    let decay = (-eta * t).exp();
    let g = g1(eta, t);
    let h = h1(eta, t);
    let k = g1_sq_integral(eta, t);
    let (vp0, c0) = (state.var_p, state.cov_xp);
    Ok(GaussianState1D {
        mean_x: state.mean_x + state.mean_p * g / mass,
        mean_p: state.mean_p * decay,
        var_p: vp0 * decay * decay + 2.0 * coeff.d_pp * h,
        cov_xp: decay * (c0 + vp0 * g / mass) + coeff.d_pp / mass * g * g,
        var_x: state.var_x
            + 2.0 * coeff.d_xx * t
            + 2.0 / mass * (c0 * g + vp0 / mass * 0.5 * g * g + coeff.d_pp / mass * k),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rhs(s: &[f64; 5], c: &Coefficients, m: f64) -> [f64; 5] {
        let [_, p, _, vp, cv] = *s;
        [
            p / m,
            -c.eta * p,
            2.0 * cv / m + 2.0 * c.d_xx,
            -2.0 * c.eta * vp + 2.0 * c.d_pp,
            vp / m - c.eta * cv,
        ]
    }

    fn integrate_ode(s0: &GaussianState1D, c: &Coefficients, m: f64, t: f64, n: usize) -> [f64; 5] {
        let mut s = [s0.mean_x, s0.mean_p, s0.var_x, s0.var_p, s0.cov_xp];
        let dt = t / n as f64;
        let add = |a: &[f64; 5], b: &[f64; 5], h: f64| std::array::from_fn(|i| a[i] + h * b[i]);
        for _ in 0..n {
            let k1 = rhs(&s, c, m);
            let k2 = rhs(&add(&s, &k1, dt / 2.0), c, m);
            let k3 = rhs(&add(&s, &k2, dt / 2.0), c, m);
            let k4 = rhs(&add(&s, &k3, dt), c, m);
            s = std::array::from_fn(|i| s[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        }
        s
    }

    #[test]
    fn closed_form_matches_ode_integration() {
        let u = UnitSystem::default();
        let s0 = GaussianState1D::new(0.3, 1.7, 0.5, 2.0, 0.4, &u).unwrap();
        for eta in [0.0, 1e-3, 0.3, 2.0, 7.0] {
            let c = Coefficients::new(eta, 2.0, 1.5, &u).unwrap();
            for t in [0.01, 0.2, 1.0, 3.0] {
                let a = evolve_moments(&s0, &c, 2.0, t).unwrap();
                let b = integrate_ode(&s0, &c, 2.0, t, 20_000);
                for (x, y) in [a.mean_x, a.mean_p, a.var_x, a.var_p, a.cov_xp].iter().zip(&b) {
                    assert!((x - y).abs() <= 1e-10 * (1.0 + y.abs()), "eta {eta} t {t}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn series_and_closed_form_meet() {
        let eta = 1.3;
        let t = 0.5 / eta;
        let below = g1_sq_integral(eta, t * (1.0 - 1e-12));
        let closed = (t - 2.0 * g1(eta, t) + h1(eta, t)) / (eta * eta);
        assert_relative_eq!(below, closed, max_relative = 1e-9);
        assert_eq!(g1_sq_integral(0.0, 2.0), 8.0 / 3.0);
    }

    #[test]
    fn limits() {
        let u = UnitSystem::default();
        let s0 = GaussianState1D::coherent(1.0, 2.0, 0.3, &u).unwrap();
        let c = Coefficients::new(0.0, 1.0, 1.0, &u).unwrap();
        let t = 2.5;
        let s = evolve_moments(&s0, &c, 4.0, t).unwrap();
        let expected = s0.var_x + 2.0 * s0.cov_xp * t / 4.0 + s0.var_p * t * t / 16.0;
        assert_relative_eq!(s.var_x, expected, max_relative = 1e-14);

        let c = Coefficients::new(0.7, 4.0, 2.0, &u).unwrap();
        let s = evolve_moments(&s0, &c, 4.0, 200.0).unwrap();
        assert_relative_eq!(s.var_p, 2.0, max_relative = 1e-12);
        let s = evolve_moments(&s0, &c, 4.0, 1.1).unwrap();
        assert!((s.mean_p - 2.0 * (-0.7f64 * 1.1).exp()).abs() < 1e-12);
    }

    #[test]
    fn uncertainty_is_validated() {
        let u = UnitSystem::default();
        assert!(GaussianState1D::new(0.0, 0.0, 0.1, 1.0, 0.0, &u).is_err());
        assert!(GaussianState1D::new(0.0, 0.0, 0.25, 1.0, 0.0, &u).is_ok());
        assert!(GaussianState1D::new(0.0, 0.0, -1.0, 1.0, 0.0, &u).is_err());
    }
}
