use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use qlbe_core::brownian::{
    self, evolve_grid, generator_bound, GaussianState1D, GridDensityMatrix, GridSchedule,
    PositionGrid,
};
use qlbe_core::friction;
use qlbe_core::kinetics::{
    mc_evolve, CollisionKernel, InitialCondition, KernelVariant, McConfig, Recording,
};
use qlbe_core::physics::{GasSpec, ParticleSpec, PotentialSpec, UnitSystem};
use qlbe_core::quadrature::QuadratureSpec;
use qlbe_core::structure_factor::{self as sf, SpectralFunction};

fn py_err(e: qlbe_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn units(hbar: f64) -> PyResult<UnitSystem> {
    UnitSystem::new(hbar).map_err(py_err)
}

fn variant(name: &str) -> PyResult<KernelVariant> {
    match name {
        "exact" => Ok(KernelVariant::Exact),
        "brownian_limit" | "limit" => Ok(KernelVariant::BrownianLimit),
        other => Err(PyValueError::new_err(format!(
            "variant must be 'exact' or 'brownian_limit', got '{other}'"
        ))),
    }
}

/// Ideal Maxwell-Boltzmann gas.
#[pyclass(frozen)]
struct Gas {
    inner: GasSpec,
}

#[pymethods]
impl Gas {
    #[new]
    #[pyo3(signature = (mass, beta, density = 1.0))]
    fn new(mass: f64, beta: f64, density: f64) -> PyResult<Self> {
        Ok(Self {
            inner: GasSpec::new(mass, beta, density).map_err(py_err)?,
        })
    }

    #[getter]
    fn mass(&self) -> f64 {
        self.inner.mass
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    #[getter]
    fn density(&self) -> f64 {
        self.inner.density
    }

    fn __repr__(&self) -> String {
        format!(
            "Gas(mass={}, beta={}, density={})",
            self.inner.mass, self.inner.beta, self.inner.density
        )
    }
}

/// Scattering potential: a Gaussian or a tabulated Fourier transform.
#[pyclass(frozen)]
struct Potential {
    inner: PotentialSpec,
}

#[pymethods]
impl Potential {
    #[staticmethod]
    fn gaussian(strength: f64, range: f64) -> PyResult<Self> {
        Ok(Self {
            inner: PotentialSpec::gaussian(strength, range).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn tabulated(q: Vec<f64>, t: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: PotentialSpec::tabulated(q, t).map_err(py_err)?,
        })
    }

    #[pyo3(signature = (q, hbar = 1.0))]
    fn ft(&self, q: f64, hbar: f64) -> PyResult<f64> {
        Ok(self.inner.ft(q, &units(hbar)?))
    }
}

#[pyfunction]
#[pyo3(signature = (gas, q, energy, variant = "exact"))]
fn structure_factor(gas: &Gas, q: f64, energy: f64, variant: &str) -> PyResult<f64> {
    spectral_variant(variant)?(gas.inner).value(q, energy).map_err(py_err)
}

fn spectral_variant(name: &str) -> PyResult<fn(GasSpec) -> SpectralFunction> {
    match name {
        "exact" => Ok(SpectralFunction::MbExact),
        "limit" => Ok(SpectralFunction::MbLimit),
        other => Err(PyValueError::new_err(format!(
            "variant must be 'exact' or 'limit', got '{other}'"
        ))),
    }
}

#[pyfunction]
#[pyo3(signature = (gas, q, energy, variant = "exact"))]
fn detailed_balance_residual(gas: &Gas, q: f64, energy: f64, variant: &str) -> PyResult<f64> {
    let s = spectral_variant(variant)?(gas.inner);
    sf::detailed_balance_residual(&s, &[q, 0.0, 0.0], energy).map_err(py_err)
}

/// (φ⁻, φ⁺) at (q, t), from S or from the response function.
#[pyfunction]
#[pyo3(signature = (gas, q, t, from_response = false, hbar = 1.0))]
fn correlation(gas: &Gas, q: f64, t: f64, from_response: bool, hbar: f64) -> PyResult<(f64, f64)> {
    let s = SpectralFunction::MbExact(gas.inner);
    let quad = QuadratureSpec::with_tolerances(1e-13, 1e-12);
    let u = units(hbar)?;
    let r = if from_response {
        sf::fdt_phi_from_response(&s, &[q, 0.0, 0.0], t, &u, &quad)
    } else {
        sf::fdt_phi(&s, &[q, 0.0, 0.0], t, &u, &quad)
    }
    .map_err(py_err)?;
    Ok((r.phi_minus, r.phi_plus))
}

/// Collision kernel of a heavy particle in the gas.
#[pyclass(frozen)]
struct Kernel {
    inner: CollisionKernel,
}

#[pymethods]
impl Kernel {
    #[new]
    #[pyo3(signature = (gas, particle_mass, potential, variant = "exact", hbar = 1.0))]
    fn new(gas: &Gas, particle_mass: f64, potential: &Potential, variant: &str, hbar: f64) -> PyResult<Self> {
        let inner = CollisionKernel::build(
            gas.inner,
            ParticleSpec::new(particle_mass).map_err(py_err)?,
            potential.inner.clone(),
            self::variant(variant)?,
            units(hbar)?,
        )
        .map_err(py_err)?;
        Ok(Self { inner })
    }

    /// Total collision rate Γ(p).
    fn rate(&self, p: [f64; 3]) -> PyResult<f64> {
        self.inner.rate(&p, &QuadratureSpec::default()).map_err(py_err)
    }

    fn mean_free_time(&self) -> PyResult<f64> {
        self.inner.mean_free_time(&QuadratureSpec::default()).map_err(py_err)
    }

    /// (σ, loss rate) for incoming momentum |p| along x.
    fn cross_section(&self, p: f64) -> PyResult<(f64, f64)> {
        let k = &self.inner;
        let xs = sf::total_cross_section(
            k.potential(),
            k.spectral(),
            &[p, 0.0, 0.0],
            k.particle().mass,
            k.units(),
            &QuadratureSpec::with_tolerances(1e-13, 1e-10),
        )
        .map_err(py_err)?;
        Ok((xs.sigma, xs.loss_rate))
    }

    /// Final momenta of `n_traj` trajectories; Maxwell initial state unless `p0` is given.
    #[pyo3(signature = (n_traj, horizon, seed, p0 = None))]
    fn simulate(&self, n_traj: usize, horizon: f64, seed: u64, p0: Option<[f64; 3]>) -> PyResult<Vec<[f64; 3]>> {
        let initial = match p0 {
            Some(p) => InitialCondition::Fixed(p),
            None => InitialCondition::Maxwell {
                mass: self.inner.particle().mass,
                beta: self.inner.gas().beta,
            },
        };
        let cfg = McConfig {
            horizon,
            n_traj,
            seed,
            recording: Recording::Snapshots(vec![horizon]),
        };
        let ens = mc_evolve(&self.inner, initial, &cfg).map_err(py_err)?;
        Ok(ens.trajectories.iter().map(|t| t.final_momentum()).collect())
    }
}

/// η, D_pp, D_xx and the integration details.
#[pyclass(frozen, get_all)]
struct FrictionReport {
    eta: f64,
    error_estimate: f64,
    q_max: f64,
    d_pp: f64,
    d_xx: f64,
}

#[pyfunction]
#[pyo3(signature = (gas, particle_mass, potential, hbar = 1.0))]
fn friction_eta(gas: &Gas, particle_mass: f64, potential: &Potential, hbar: f64) -> PyResult<FrictionReport> {
    let particle = ParticleSpec::new(particle_mass).map_err(py_err)?;
    let r = friction::eta(
        &gas.inner,
        &particle,
        &potential.inner,
        &units(hbar)?,
        &QuadratureSpec::with_tolerances(1e-16, 1e-13),
    )
    .map_err(py_err)?;
    Ok(FrictionReport {
        eta: r.eta,
        error_estimate: r.error_estimate,
        q_max: r.q_max,
        d_pp: r.d_pp,
        d_xx: r.d_xx,
    })
}

/// Returns (eta, d_pp, d_xx).
#[pyfunction]
#[pyo3(signature = (eta, mass, beta, hbar = 1.0))]
fn coefficients(eta: f64, mass: f64, beta: f64, hbar: f64) -> PyResult<(f64, f64, f64)> {
    let c = brownian::coefficients(eta, mass, beta, &units(hbar)?).map_err(py_err)?;
    Ok((c.eta, c.d_pp, c.d_xx))
}

/// First and second moments of a Gaussian state.
#[pyclass(frozen, get_all, skip_from_py_object)]
#[derive(Clone, Copy)]
struct Moments {
    mean_x: f64,
    mean_p: f64,
    var_x: f64,
    var_p: f64,
    cov_xp: f64,
}

#[pymethods]
impl Moments {
    #[new]
    #[pyo3(signature = (mean_x, mean_p, var_x, var_p, cov_xp = 0.0))]
    fn new(mean_x: f64, mean_p: f64, var_x: f64, var_p: f64, cov_xp: f64) -> Self {
        Self {
            mean_x,
            mean_p,
            var_x,
            var_p,
            cov_xp,
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Moments(mean_x={}, mean_p={}, var_x={}, var_p={}, cov_xp={})",
            self.mean_x, self.mean_p, self.var_x, self.var_p, self.cov_xp
        )
    }
}

impl Moments {
    fn to_core(self, u: &UnitSystem) -> PyResult<GaussianState1D> {
        GaussianState1D::new(self.mean_x, self.mean_p, self.var_x, self.var_p, self.cov_xp, u).map_err(py_err)
    }
}

impl From<GaussianState1D> for Moments {
    fn from(s: GaussianState1D) -> Self {
        Self::new(s.mean_x, s.mean_p, s.var_x, s.var_p, s.cov_xp)
    }
}

#[pyfunction]
#[pyo3(signature = (state, eta, mass, beta, t, hbar = 1.0))]
fn evolve_moments(state: &Moments, eta: f64, mass: f64, beta: f64, t: f64, hbar: f64) -> PyResult<Moments> {
    let u = units(hbar)?;
    let c = brownian::coefficients(eta, mass, beta, &u).map_err(py_err)?;
    let s = brownian::evolve_moments(&state.to_core(&u)?, &c, mass, t).map_err(py_err)?;
    Ok(s.into())
}

/// Density-matrix evolution on a position grid; returns (t, moments, min eigenvalue) samples.
#[pyfunction]
#[pyo3(signature = (state, eta, mass, beta, dx, count, steps, monitor_every = 10, dt = None, hbar = 1.0))]
#[allow(clippy::too_many_arguments)]
fn evolve_grid_moments(
    state: &Moments,
    eta: f64,
    mass: f64,
    beta: f64,
    dx: f64,
    count: usize,
    steps: usize,
    monitor_every: usize,
    dt: Option<f64>,
    hbar: f64,
) -> PyResult<Vec<(f64, Moments, f64)>> {
    let u = units(hbar)?;
    let c = brownian::coefficients(eta, mass, beta, &u).map_err(py_err)?;
    let grid = PositionGrid::centered(dx, count).map_err(py_err)?;
    let rho = GridDensityMatrix::gaussian(grid, &state.to_core(&u)?, &u).map_err(py_err)?;
    let dt = dt.unwrap_or_else(|| 0.1 / generator_bound(&grid, &c, mass, &u));
    let run = evolve_grid(&rho, &c, mass, &u, &GridSchedule { dt, steps, monitor_every }).map_err(py_err)?;
    Ok(run
        .samples
        .iter()
        .map(|s| (s.time, s.moments.into(), s.min_eigenvalue))
        .collect())
}

#[pymodule]
fn qlbe(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Gas>()?;
    m.add_class::<Potential>()?;
    m.add_class::<Kernel>()?;
    m.add_class::<FrictionReport>()?;
    m.add_class::<Moments>()?;
    m.add_function(wrap_pyfunction!(structure_factor, m)?)?;
    m.add_function(wrap_pyfunction!(detailed_balance_residual, m)?)?;
    m.add_function(wrap_pyfunction!(correlation, m)?)?;
    m.add_function(wrap_pyfunction!(friction_eta, m)?)?;
    m.add_function(wrap_pyfunction!(coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(evolve_moments, m)?)?;
    m.add_function(wrap_pyfunction!(evolve_grid_moments, m)?)?;
    m.add("REFERENCE_ETA", friction::REFERENCE_ETA)?;
    Ok(())
}
