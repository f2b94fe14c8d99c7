//! Position-grid integrator for the diffusive master equation
//!
//! dρ/dt = −(i/ħ)[p²/2M, ρ] − (iη/2ħ)[x, {p, ρ}]
//!         − (D_pp/ħ²)[x, [x, ρ]] − (D_xx/ħ²)[p, [p, ρ]].
//!
//! x is diagonal on the grid and p is the periodic spectral derivative, so
//! every term is a diagonal multiplication in either the position or the
//! momentum representation. The friction term is applied literally as
//! [X, {P, ρ}] with the discrete matrices X and P. When D_pp D_xx = (ħη/4)²
//! the discrete generator is then of Lindblad form with the single operator
//! μX + iνP, so positivity is only limited by the time step.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::coefficients::Coefficients;
use super::moments::GaussianState1D;
use crate::error::{invalid, Error, Result};
use crate::physics::UnitSystem;

pub const MAX_GRID_POINTS: usize = 256;
/// Evolution aborts when the minimum eigenvalue drops below this.
pub const POSITIVITY_ABORT: f64 = -1e-5;
/// RK4 requires dt times the generator's spectral bound below this.
pub const RK4_BOUND: f64 = 2.5;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionGrid {
    pub x_min: f64,
    pub dx: f64,
    pub count: usize,
}

impl PositionGrid {
    pub fn new(x_min: f64, dx: f64, count: usize) -> Result<Self> {
        if !(2..=MAX_GRID_POINTS).contains(&count) {
            return Err(invalid(
                "grid.count",
                format!("need 2..={MAX_GRID_POINTS} points, got {count}"),
            ));
        }
        if !(dx > 0.0 && dx.is_finite() && x_min.is_finite()) {
            return Err(invalid("grid.dx", "need finite x_min and dx > 0"));
        }
        Ok(Self { x_min, dx, count })
    }

    /// Grid centred on zero.
    pub fn centered(dx: f64, count: usize) -> Result<Self> {
        Self::new(-0.5 * dx * (count as f64 - 1.0), dx, count)
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + self.dx * i as f64
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.x(i)).collect()
    }

    /// Momenta conjugate to the grid, in FFT order.
    pub fn momenta(&self, hbar: f64) -> Vec<f64> {
        let n = self.count as i64;
        let dp = 2.0 * std::f64::consts::PI * hbar / (n as f64 * self.dx);
        (0..n)
            .map(|a| if a < (n + 1) / 2 { a } else { a - n } as f64 * dp)
            .collect()
    }
}

/// Density matrix ρ_ij = Δx ρ(x_i, x_j), stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensityMatrix {
    grid: PositionGrid,
    values: Vec<Complex64>,
}

impl GridDensityMatrix {
    /// Validates Hermiticity (1e−12) and unit trace (1e−8).
    pub fn new(grid: PositionGrid, values: Vec<Complex64>) -> Result<Self> {
        let n = grid.count;
        if values.len() != n * n {
            return Err(invalid("rho", format!("expected {} entries", n * n)));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(invalid("rho", "entries must be finite"));
        }
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        for i in 0..n {
            for j in 0..=i {
                if (values[i * n + j] - values[j * n + i].conj()).norm() > 1e-12 * scale.max(1.0) {
                    return Err(invalid("rho", "matrix is not Hermitian"));
                }
            }
        }
        let rho = Self { grid, values };
        let tr = rho.trace();
        if (tr - 1.0).abs() > 1e-8 {
            return Err(invalid("rho", format!("trace {tr} differs from 1")));
        }
        Ok(rho)
    }

    /// Gaussian state with the given moments, sampled on the grid and
    /// renormalized to unit trace.
    pub fn gaussian(grid: PositionGrid, state: &GaussianState1D, units: &UnitSystem) -> Result<Self> {
        let hbar = units.hbar;
        if !(state.var_x > 0.0) {
            return Err(invalid("gaussian_state", "var_x must be positive"));
        }
        let s = state.var_p - state.cov_xp * state.cov_xp / state.var_x;
        let n = grid.count;
        let mut values = vec![ZERO; n * n];
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (grid.x(i), grid.x(j));
                let centre = 0.5 * (x + y) - state.mean_x;
                let d = x - y;
                let amp = (-centre * centre / (2.0 * state.var_x) - s * d * d / (2.0 * hbar * hbar)).exp();
                let k = state.mean_p + state.cov_xp * centre / state.var_x;
                values[i * n + j] = Complex64::from_polar(amp, k * d / hbar);
            }
        }
        let tr: f64 = (0..n).map(|i| values[i * n + i].re).sum();
        if !(tr > 0.0) {
            return Err(invalid("gaussian_state", "state has no weight on the grid"));
        }
        for v in &mut values {
            *v /= tr;
        }
        hermitize(&mut values, n);
        Ok(Self { grid, values })
    }

    /// Identity / N.
    pub fn maximally_mixed(grid: PositionGrid) -> Self {
        let n = grid.count;
        let mut values = vec![ZERO; n * n];
        for i in 0..n {
            values[i * n + i] = Complex64::new(1.0 / n as f64, 0.0);
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &PositionGrid {
        &self.grid
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.grid.count + j]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn trace(&self) -> f64 {
        let n = self.grid.count;
        (0..n).map(|i| self.values[i * n + i].re).sum()
    }

    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        let n = self.grid.count;
        DMatrix::from_fn(n, n, |i, j| self.values[i * n + j])
    }

    /// Cyclic shift by `cells` grid points: ρ_ij → ρ_{i−s, j−s}.
    pub fn shifted(&self, cells: i64) -> Self {
        let n = self.grid.count;
        let s = cells.rem_euclid(n as i64) as usize;
        let mut values = vec![ZERO; n * n];
        for i in 0..n {
            for j in 0..n {
                values[((i + s) % n) * n + (j + s) % n] = self.values[i * n + j];
            }
        }
        Self {
            grid: self.grid,
            values,
        }
    }

    /// Means, variances and symmetrized covariance of x and p.
    pub fn moments(&self, units: &UnitSystem) -> GaussianState1D {
        Spectral::new(&self.grid, units.hbar).moments(&self.values)
    }
}

/// Smallest eigenvalue of the Hermitian matrix.
pub fn positivity_check(rho: &GridDensityMatrix) -> f64 {
    rho.to_matrix()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

fn hermitize(values: &mut [Complex64], n: usize) {
    for i in 0..n {
        values[i * n + i].im = 0.0;
        for j in 0..i {
            let avg = 0.5 * (values[i * n + j] + values[j * n + i].conj());
            values[i * n + j] = avg;
            values[j * n + i] = avg.conj();
        }
    }
}

fn transpose(a: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in 0..i {
            a.swap(i * n + j, j * n + i);
        }
    }
}

struct Spectral {
    n: usize,
    x: Vec<f64>,
    p: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Spectral {
    fn new(grid: &PositionGrid, hbar: f64) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n: grid.count,
            x: grid.positions(),
            p: grid.momenta(hbar),
            forward: planner.plan_fft_forward(grid.count),
            inverse: planner.plan_fft_inverse(grid.count),
        }
    }

    /// ρ̃ = F ρ F† with the unitary DFT F.
    fn to_momentum(&self, a: &mut [Complex64]) {
        self.inverse.process(a);
        transpose(a, self.n);
        self.forward.process(a);
        transpose(a, self.n);
        let s = 1.0 / self.n as f64;
        a.iter_mut().for_each(|v| *v *= s);
    }

    /// ρ = F† ρ̃ F.
    fn to_position(&self, a: &mut [Complex64]) {
        self.forward.process(a);
        transpose(a, self.n);
        self.inverse.process(a);
        transpose(a, self.n);
        let s = 1.0 / self.n as f64;
        a.iter_mut().for_each(|v| *v *= s);
    }

    fn moments(&self, rho: &[Complex64]) -> GaussianState1D {
        let n = self.n;
        let (mut mx, mut mxx) = (0.0, 0.0);
        for i in 0..n {
            let w = rho[i * n + i].re;
            mx += w * self.x[i];
            mxx += w * self.x[i] * self.x[i];
        }
        let mut t = rho.to_vec();
        self.to_momentum(&mut t);
        let (mut mp, mut mpp) = (0.0, 0.0);
        for a in 0..n {
            let w = t[a * n + a].re;
            mp += w * self.p[a];
            mpp += w * self.p[a] * self.p[a];
        }
        // Re Tr(X P ρ)
        for a in 0..n {
            for b in 0..n {
                t[a * n + b] *= self.p[a];
            }
        }
        self.to_position(&mut t);
        let sym: f64 = (0..n).map(|i| self.x[i] * t[i * n + i].re).sum();
        GaussianState1D {
            mean_x: mx,
            mean_p: mp,
            var_x: mxx - mx * mx,
            var_p: mpp - mp * mp,
            cov_xp: sym - mx * mp,
        }
    }
}

/// Precomputed generator tables.
struct Generator {
    spectral: Spectral,
    /// momentum-representation factor for kinetic and position-diffusion terms
    p_factor: Vec<Complex64>,
    /// p_a + p_b
    p_sum: Vec<f64>,
    /// −(iη/2ħ)(x_i − x_j)
    x_friction: Vec<Complex64>,
    /// −(D_pp/ħ²)(x_i − x_j)²
    x_diffusion: Vec<f64>,
    bound: f64,
}

impl Generator {
    fn new(grid: &PositionGrid, coeff: &Coefficients, mass: f64, hbar: f64) -> Self {
        let spectral = Spectral::new(grid, hbar);
        let n = grid.count;
        let (x, p) = (&spectral.x, &spectral.p);
        let mut p_factor = vec![ZERO; n * n];
        let mut p_sum = vec![0.0; n * n];
        let mut x_friction = vec![ZERO; n * n];
        let mut x_diffusion = vec![0.0; n * n];
        let (mut kin, mut pd, mut fr, mut xd) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        let hb2 = hbar * hbar;
        for a in 0..n {
            for b in 0..n {
                let k = a * n + b;
                let dp = p[a] - p[b];
                let omega = (p[a] * p[a] - p[b] * p[b]) / (2.0 * mass * hbar);
                let damp = coeff.d_xx * dp * dp / hb2;
                p_factor[k] = Complex64::new(-damp, -omega);
                p_sum[k] = p[a] + p[b];
                let dx = x[a] - x[b];
                x_friction[k] = Complex64::new(0.0, -coeff.eta * dx / (2.0 * hbar));
                x_diffusion[k] = -coeff.d_pp * dx * dx / hb2;
                kin = kin.max(omega.abs());
                pd = pd.max(damp);
                fr = fr.max(coeff.eta * dx.abs() / (2.0 * hbar));
                xd = xd.max(-x_diffusion[k]);
            }
        }
        let p_sum_max = p.iter().fold(0.0f64, |m, v| m.max(v.abs())) * 2.0;
        Self {
            spectral,
            p_factor,
            p_sum,
            x_friction,
            x_diffusion,
            bound: kin + pd + fr * p_sum_max + xd,
        }
    }

    fn apply(&self, rho: &[Complex64], out: &mut [Complex64], scratch: &mut [Complex64]) {
        out.copy_from_slice(rho);
        self.spectral.to_momentum(out);
        for k in 0..out.len() {
            scratch[k] = out[k] * self.p_sum[k];
            out[k] *= self.p_factor[k];
        }
        self.spectral.to_position(out);
        self.spectral.to_position(scratch);
        for k in 0..out.len() {
            out[k] += self.x_friction[k] * scratch[k] + rho[k] * self.x_diffusion[k];
        }
    }

    fn rk4_step(&self, rho: &mut [Complex64], dt: f64, work: &mut RkWork) {
        let RkWork {
            k1,
            k2,
            k3,
            k4,
            tmp,
            scratch,
        } = work;
        self.apply(rho, k1, scratch);
        for i in 0..rho.len() {
            tmp[i] = rho[i] + k1[i] * (0.5 * dt);
        }
        self.apply(tmp, k2, scratch);
        for i in 0..rho.len() {
            tmp[i] = rho[i] + k2[i] * (0.5 * dt);
        }
        self.apply(tmp, k3, scratch);
        for i in 0..rho.len() {
            tmp[i] = rho[i] + k3[i] * dt;
        }
        self.apply(tmp, k4, scratch);
        for i in 0..rho.len() {
            rho[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0);
        }
    }
}

struct RkWork {
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    tmp: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl RkWork {
    fn new(len: usize) -> Self {
        let z = vec![ZERO; len];
        Self {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            tmp: z.clone(),
            scratch: z,
        }
    }
}

/// Step size, step count and how often to record diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSchedule {
    pub dt: f64,
    pub steps: usize,
    /// Record a [`GridSample`] every this many steps (≥ 1); the initial and
    /// final states are always recorded.
    pub monitor_every: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GridSample {
    pub step: usize,
    pub time: f64,
    pub trace: f64,
    pub min_eigenvalue: f64,
    pub moments: GaussianState1D,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRun {
    pub state: GridDensityMatrix,
    pub samples: Vec<GridSample>,
}

impl GridRun {
    pub fn min_eigenvalue(&self) -> f64 {
        self.samples.iter().map(|s| s.min_eigenvalue).fold(f64::INFINITY, f64::min)
    }

    pub fn max_trace_drift(&self) -> f64 {
        let t0 = self.samples.first().map_or(1.0, |s| s.trace);
        self.samples.iter().map(|s| (s.trace - t0).abs()).fold(0.0, f64::max)
    }
}

/// Spectral bound of the discrete generator used for the step check.
pub fn generator_bound(grid: &PositionGrid, coeff: &Coefficients, mass: f64, units: &UnitSystem) -> f64 {
    Generator::new(grid, coeff, mass, units.hbar).bound
}

/// Integrates with explicit RK4, restoring exact Hermiticity after each step.
pub fn evolve_grid(
    rho: &GridDensityMatrix,
    coeff: &Coefficients,
    mass: f64,
    units: &UnitSystem,
    schedule: &GridSchedule,
) -> Result<GridRun> {
    if !(mass > 0.0) {
        return Err(invalid("particle_mass_M", "must be positive"));
    }
    if schedule.monitor_every == 0 {
        return Err(invalid("monitor_every", "must be >= 1"));
    }
    let generator = Generator::new(&rho.grid, coeff, mass, units.hbar);
    let product = schedule.dt * generator.bound;
    if !(schedule.dt > 0.0) || product >= RK4_BOUND {
        return Err(Error::Stability {
            product,
            bound: RK4_BOUND,
        });
    }
    let n = rho.grid.count;
    let mut state = rho.clone();
    let mut work = RkWork::new(n * n);
    let mut samples = Vec::new();
    let sample = |step: usize, state: &GridDensityMatrix| -> Result<GridSample> {
        let min_eigenvalue = positivity_check(state);
        if min_eigenvalue < POSITIVITY_ABORT {
            return Err(Error::Positivity {
                min_eigenvalue,
                step,
            });
        }
        Ok(GridSample {
            step,
            time: step as f64 * schedule.dt,
            trace: state.trace(),
            min_eigenvalue,
            moments: generator.spectral.moments(&state.values),
        })
    };
    samples.push(sample(0, &state)?);
    for step in 1..=schedule.steps {
        generator.rk4_step(&mut state.values, schedule.dt, &mut work);
        hermitize(&mut state.values, n);
        if step % schedule.monitor_every == 0 || step == schedule.steps {
            samples.push(sample(step, &state)?);
        }
    }
    Ok(GridRun { state, samples })
}

/// max |shift(evolve(ρ)) − evolve(shift(ρ))| for a shift by a whole number
/// of grid cells. The wrap-around makes this exact only for states that stay
/// away from the grid edges.
pub fn translation_covariance_grid(
    coeff: &Coefficients,
    mass: f64,
    units: &UnitSystem,
    rho: &GridDensityMatrix,
    shift: f64,
    schedule: &GridSchedule,
) -> Result<f64> {
    let cells = shift / rho.grid.dx;
    if (cells - cells.round()).abs() > 1e-9 * cells.abs().max(1.0) {
        return Err(invalid(
            "shift",
            format!("{shift} is not a multiple of the grid spacing {}", rho.grid.dx),
        ));
    }
    let cells = cells.round() as i64;
    if cells == 0 {
        return Ok(0.0);
    }
    let a = evolve_grid(rho, coeff, mass, units, schedule)?.state.shifted(cells);
    let b = evolve_grid(&rho.shifted(cells), coeff, mass, units, schedule)?.state;
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max))
}
