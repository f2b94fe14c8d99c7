use qlbe_core::friction::{
    compare_with_mc, eta, eta_gaussian_closed_form, eta_trapezoid, REFERENCE_ETA,
};
use qlbe_core::kinetics::{mc_evolve, CollisionKernel, InitialCondition, KernelVariant, McConfig, Recording};
use qlbe_core::physics::{GasSpec, ParticleSpec, PotentialSpec, UnitSystem};
use qlbe_core::quadrature::QuadratureSpec;

fn reference() -> (GasSpec, ParticleSpec, PotentialSpec, UnitSystem) {
    (
        GasSpec::new(1.0, 1.0, 1.0).unwrap(),
        ParticleSpec::new(100.0).unwrap(),
        PotentialSpec::gaussian(1.0, 1.0).unwrap(),
        UnitSystem::default(),
    )
}

#[test]
fn reference_value_is_reproduced() {
    let (gas, particle, pot, u) = reference();
    let adaptive = eta(&gas, &particle, &pot, &u, &QuadratureSpec::default()).unwrap().eta;
    assert!((adaptive - REFERENCE_ETA).abs() < 1e-8 * REFERENCE_ETA);
    let trapezoid = eta_trapezoid(&gas, &particle, &pot, &u, 1_000_001).unwrap();
    assert!((trapezoid - adaptive).abs() < 1e-8 * adaptive);
    let closed = eta_gaussian_closed_form(&gas, &particle, 1.0, 1.0, &u);
    assert!((closed - REFERENCE_ETA).abs() < 1e-12 * REFERENCE_ETA);
}

#[test]
fn report_carries_diffusion_coefficients() {
    let (gas, particle, pot, u) = reference();
    let r = eta(&gas, &particle, &pot, &u, &QuadratureSpec::default()).unwrap();
    assert!((r.d_pp - 100.0 * r.eta).abs() < 1e-15);
    assert!((r.d_xx - r.eta / 1600.0).abs() < 1e-20);
    assert!(r.samples.iter().all(|&(q, w)| q > 0.0 && w >= 0.0));
    assert!(r.q_max > 0.0);
}

#[test]
fn zero_friction_skips_mc_comparison() {
    let (gas, particle, _, u) = reference();
    let zero = PotentialSpec::gaussian(0.0, 1.0).unwrap();
    let r = eta(&gas, &particle, &zero, &u, &QuadratureSpec::default()).unwrap();
    let k = CollisionKernel::build(gas, particle, zero, KernelVariant::BrownianLimit, u).unwrap();
    let cfg = McConfig {
        horizon: 1.0,
        n_traj: 4,
        seed: 0,
        recording: Recording::Jumps,
    };
    let ens = mc_evolve(&k, InitialCondition::Fixed([5.0, 0.0, 0.0]), &cfg).unwrap();
    assert!(compare_with_mc(&r, &ens).unwrap().is_none());
    assert_eq!(ens.mean_momentum(1.0), [5.0, 0.0, 0.0]);
}

#[test]
fn comparison_requires_brownian_kernel() {
    let (gas, particle, pot, u) = reference();
    let r = eta(&gas, &particle, &pot, &u, &QuadratureSpec::default()).unwrap();
    let k = CollisionKernel::build(gas, particle, pot, KernelVariant::Exact, u).unwrap();
    let cfg = McConfig {
        horizon: 1.0,
        n_traj: 4,
        seed: 0,
        recording: Recording::Jumps,
    };
    let ens = mc_evolve(&k, InitialCondition::Fixed([5.0, 0.0, 0.0]), &cfg).unwrap();
    assert!(compare_with_mc(&r, &ens).is_err());
}
