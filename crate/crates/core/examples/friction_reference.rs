//! Regenerates `friction::REFERENCE_ETA`: the Gaussian-potential friction
//! coefficient (g = r = 1, m = β = n = ħ = 1, M = 100) by adaptive
//! Gauss–Kronrod quadrature and by a 10⁶-point trapezoid rule.

use qlbe_core::friction::{eta, eta_gaussian_closed_form, eta_trapezoid};
use qlbe_core::physics::{GasSpec, ParticleSpec, PotentialSpec, UnitSystem};
use qlbe_core::quadrature::QuadratureSpec;

fn main() -> qlbe_core::Result<()> {
    let gas = GasSpec::new(1.0, 1.0, 1.0)?;
    let particle = ParticleSpec::new(100.0)?;
    let potential = PotentialSpec::gaussian(1.0, 1.0)?;
    let units = UnitSystem::default();
    let quad = QuadratureSpec::with_tolerances(1e-16, 1e-13);
    let adaptive = eta(&gas, &particle, &potential, &units, &quad)?;
    let trapezoid = eta_trapezoid(&gas, &particle, &potential, &units, 1_000_001)?;
    let closed = eta_gaussian_closed_form(&gas, &particle, 1.0, 1.0, &units);
    let rel = (adaptive.eta - trapezoid).abs() / adaptive.eta;
    println!("adaptive     {:.17e} (error {:.3e}, q_max {})", adaptive.eta, adaptive.error_estimate, adaptive.q_max);
    println!("trapezoid    {trapezoid:.17e}");
    println!("closed form  {closed:.17e}");
    println!("agreement    {rel:.3e}");
    assert!(rel < 1e-8, "quadratures disagree");
    println!("pub const REFERENCE_ETA: f64 = {:e};", adaptive.eta);
    Ok(())
}
