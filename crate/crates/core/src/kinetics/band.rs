//! Momentum-representation evolution of the statistical operator on a 1D
//! grid, one coherence band at a time.
//!
//! A band collects the matrix elements ρ(p, p − k) at fixed offset k. The
//! generator is translation covariant, so it maps each band onto itself:
//!
//! d/dt ρ(p, p−k) = −(i/ħ)(ε(p) − ε(p−k)) ρ(p, p−k)
//!     + Σ_q L(q, p−q) L(q, p−k−q) ρ(p−q, p−k−q)
//!     − ½ [Γ(p) + Γ(p−k)] ρ(p, p−k),
//!
//! where L(q, p) = √(Δp λ₁(q, p)) is built from the kernel's
//! [`line_intensity`](super::kernel::CollisionKernel::line_intensity) and
//! Γ(p) = Σ_q L(q, p)². Jumps that would leave the grid are dropped from both
//! the gain and the loss terms, which keeps the truncated generator in
//! Lindblad form: the k = 0 band conserves probability exactly and stays
//! non-negative, and |ρ(p, p−k)| can only decay.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::kernel::CollisionKernel;
use super::mc::trajectory_seed;
use crate::error::{invalid, Error, Result};

/// Explicit stepping requires dt · (fastest band rate) below this bound.
pub const STEP_BOUND: f64 = 0.1;

/// Uniform momentum grid including both end points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumGrid1D {
    pub p_min: f64,
    pub p_max: f64,
    pub count: usize,
}

impl MomentumGrid1D {
    pub fn new(p_min: f64, p_max: f64, count: usize) -> Result<Self> {
        let g = Self {
            p_min,
            p_max,
            count,
        };
        g.validate()?;
        Ok(g)
    }

    /// Grid symmetric about zero with spacing `dp` and `count` points.
    pub fn symmetric(dp: f64, count: usize) -> Result<Self> {
        let half = 0.5 * dp * (count as f64 - 1.0);
        Self::new(-half, half, count)
    }

    pub fn validate(&self) -> Result<()> {
        if self.count < 16 {
            return Err(invalid("grid.count", format!("need >= 16 points, got {}", self.count)));
        }
        if !(self.p_min.is_finite() && self.p_max.is_finite()) || self.p_min >= self.p_max {
            return Err(invalid("grid.p_min", "need finite p_min < p_max"));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        (self.p_max - self.p_min) / (self.count - 1) as f64
    }

    pub fn momentum(&self, i: usize) -> f64 {
        self.p_min + self.spacing() * i as f64
    }

    pub fn momenta(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.momentum(i)).collect()
    }

    /// Index range `[lo, hi)` of rows j with both j and j − offset on the grid.
    pub fn band_range(&self, offset: i64) -> (usize, usize) {
        let n = self.count as i64;
        let lo = offset.max(0).min(n);
        let hi = (n + offset.min(0)).max(lo);
        (lo as usize, hi as usize)
    }
}

/// Matrix elements ρ(p_j, p_j − k) for k = `offset` grid cells.
///
/// Values are densities in momentum: the trace of the k = 0 band is
/// `Σ_j values[j] Δp`. Entries outside [`MomentumGrid1D::band_range`] are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BandState {
    pub grid: MomentumGrid1D,
    pub offset: i64,
    pub values: Vec<Complex64>,
}

impl BandState {
    pub fn new(grid: MomentumGrid1D, offset: i64, values: Vec<Complex64>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.count {
            return Err(invalid(
                "band.values",
                format!("expected {} values, got {}", grid.count, values.len()),
            ));
        }
        if offset.unsigned_abs() as usize >= grid.count {
            return Err(invalid("band.offset", "offset exceeds the grid"));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(invalid("band.values", "entries must be finite"));
        }
        let (lo, hi) = grid.band_range(offset);
        let mut values = values;
        for (j, v) in values.iter_mut().enumerate() {
            if j < lo || j >= hi {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        if offset == 0 {
            if values.iter().any(|v| v.im != 0.0 || v.re < 0.0) {
                return Err(invalid(
                    "band.values",
                    "diagonal band must be real and non-negative",
                ));
            }
            let trace: f64 = values.iter().map(|v| v.re).sum::<f64>() * grid.spacing();
            if trace > 1.0 + 1e-9 {
                return Err(invalid("band.values", format!("trace {trace} exceeds 1")));
            }
        }
        Ok(Self {
            grid,
            offset,
            values,
        })
    }

    /// Band k = `offset` of the pure state ψ(p) (a momentum amplitude with
    /// Σ |ψ|² Δp = 1): ρ(p, p−k) = ψ(p) ψ*(p−k).
    pub fn from_wavefunction(grid: MomentumGrid1D, offset: i64, psi: &[Complex64]) -> Result<Self> {
        let (lo, hi) = grid.band_range(offset);
        let mut values = vec![Complex64::new(0.0, 0.0); grid.count];
        for j in lo..hi {
            values[j] = psi[j] * psi[(j as i64 - offset) as usize].conj();
        }
        if offset == 0 {
            for v in &mut values {
                *v = Complex64::new(v.re, 0.0);
            }
        }
        Self::new(grid, offset, values)
    }

    /// Coherence offset in momentum units.
    pub fn k(&self) -> f64 {
        self.offset as f64 * self.grid.spacing()
    }

    /// Σ_j ρ_j Δp (meaningful for the diagonal band).
    pub fn trace(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() * self.grid.spacing()
    }

    /// Σ_j |ρ_j| Δp.
    pub fn l1_mass(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).sum::<f64>() * self.grid.spacing()
    }
}

/// Jump amplitudes L(q_l, p_i) on the grid, with q_l = l Δp.
#[derive(Debug, Clone)]
pub struct BandGenerator {
    grid: MomentumGrid1D,
    particle_mass: f64,
    hbar: f64,
    /// amplitude[(l + n − 1) n + i] for l in −(n−1)..=(n−1); zero when
    /// i + l is off the grid.
    amplitude: Vec<f64>,
    gamma: Vec<f64>,
}

impl BandGenerator {
    pub fn new(kernel: &CollisionKernel, grid: MomentumGrid1D) -> Result<Self> {
        Self::from_amplitude(grid, kernel.particle().mass, kernel.units().hbar, |q, p| {
            (grid.spacing() * kernel.line_intensity(q, p)).sqrt()
        })
    }

    /// Builds the generator from a single jump amplitude callback L(q, p);
    /// both the gain and the loss terms are derived from it.
    pub fn from_amplitude<F: Fn(f64, f64) -> f64>(
        grid: MomentumGrid1D,
        particle_mass: f64,
        hbar: f64,
        amplitude_fn: F,
    ) -> Result<Self> {
        grid.validate()?;
        let n = grid.count;
        let dp = grid.spacing();
        let mut amplitude = vec![0.0; (2 * n - 1) * n];
        let mut gamma = vec![0.0; n];
        for l in -(n as i64 - 1)..=(n as i64 - 1) {
            if l == 0 {
                continue;
            }
            let row = ((l + n as i64 - 1) as usize) * n;
            for i in 0..n {
                let target = i as i64 + l;
                if target < 0 || target >= n as i64 {
                    continue;
                }
                let a = amplitude_fn(l as f64 * dp, grid.momentum(i));
                if !a.is_finite() || a < 0.0 {
                    return Err(Error::RateOverflow(format!(
                        "invalid jump amplitude {a} at q = {}, p = {}",
                        l as f64 * dp,
                        grid.momentum(i)
                    )));
                }
                amplitude[row + i] = a;
                gamma[i] += a * a;
            }
        }
        Ok(Self {
            grid,
            particle_mass,
            hbar,
            amplitude,
            gamma,
        })
    }

    pub fn grid(&self) -> &MomentumGrid1D {
        &self.grid
    }

    /// L(q_l, p_i), zero if the jump leaves the grid.
    pub fn amplitude(&self, l: i64, i: usize) -> f64 {
        let n = self.grid.count as i64;
        if l.abs() >= n {
            return 0.0;
        }
        self.amplitude[((l + n - 1) as usize) * self.grid.count + i]
    }

    /// Γ(p_i) restricted to jumps that stay on the grid.
    pub fn loss_rates(&self) -> &[f64] {
        &self.gamma
    }

    pub fn operator(&self, offset: i64) -> BandOperator {
        let n = self.grid.count;
        let (lo, hi) = self.grid.band_range(offset);
        let mut diag = vec![Complex64::new(0.0, 0.0); n];
        let mut gain = vec![0.0; n * n];
        let inv = 1.0 / (2.0 * self.particle_mass * self.hbar);
        for j in lo..hi {
            let jk = (j as i64 - offset) as usize;
            let (p, pk) = (self.grid.momentum(j), self.grid.momentum(jk));
            diag[j] = Complex64::new(
                -0.5 * (self.gamma[j] + self.gamma[jk]),
                -(p * p - pk * pk) * inv,
            );
            for src in lo..hi {
                if src == j {
                    continue;
                }
                let l = j as i64 - src as i64;
                let srck = (src as i64 - offset) as usize;
                gain[j * n + src] = self.amplitude(l, src) * self.amplitude(l, srck);
            }
        }
        BandOperator {
            offset,
            lo,
            hi,
            n,
            diag,
            gain,
        }
    }

    /// Evolves one band by `steps` explicit RK4 steps of size `dt`.
    pub fn evolve(&self, state: &BandState, dt: f64, steps: usize) -> Result<BandState> {
        if state.grid != self.grid {
            return Err(invalid("band.grid", "state and generator grids differ"));
        }
        let op = self.operator(state.offset);
        op.check_step(dt)?;
        let mut values = state.values.clone();
        for _ in 0..steps {
            op.rk4_step(&mut values, dt);
        }
        Ok(BandState {
            grid: state.grid,
            offset: state.offset,
            values,
        })
    }

    /// Discrete collision integral (gain − loss) applied to a diagonal density.
    pub fn collision_integral(&self, density: &[f64]) -> Vec<f64> {
        let op = self.operator(0);
        let values: Vec<Complex64> = density.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let mut out = vec![Complex64::new(0.0, 0.0); values.len()];
        op.apply(&values, &mut out);
        out.into_iter().map(|c| c.re).collect()
    }
}

/// The generator restricted to one band: diagonal part plus dense gain matrix.
#[derive(Debug, Clone)]
pub struct BandOperator {
    offset: i64,
    lo: usize,
    hi: usize,
    n: usize,
    diag: Vec<Complex64>,
    gain: Vec<f64>,
}

impl BandOperator {
    pub fn offset(&self) -> i64 {
        self.offset
    }

    /// Fastest decay or rotation rate in the band.
    pub fn max_rate(&self) -> f64 {
        self.diag.iter().map(|d| d.norm()).fold(0.0, f64::max)
    }

    pub fn check_step(&self, dt: f64) -> Result<()> {
        let product = dt * self.max_rate();
        if !(dt > 0.0) || product >= STEP_BOUND {
            return Err(Error::Stability {
                product,
                bound: STEP_BOUND,
            });
        }
        Ok(())
    }

    pub fn apply(&self, v: &[Complex64], out: &mut [Complex64]) {
        for x in out.iter_mut() {
            *x = Complex64::new(0.0, 0.0);
        }
        for j in self.lo..self.hi {
            let row = &self.gain[j * self.n + self.lo..j * self.n + self.hi];
            let mut acc = self.diag[j] * v[j];
            for (w, x) in row.iter().zip(&v[self.lo..self.hi]) {
                acc += *x * *w;
            }
            out[j] = acc;
        }
    }

    pub fn rk4_step(&self, v: &mut [Complex64], dt: f64) {
        let n = v.len();
        let mut k1 = vec![Complex64::new(0.0, 0.0); n];
        let mut k2 = k1.clone();
        let mut k3 = k1.clone();
        let mut k4 = k1.clone();
        let mut tmp = k1.clone();
        self.apply(v, &mut k1);
        for i in 0..n {
            tmp[i] = v[i] + k1[i] * (0.5 * dt);
        }
        self.apply(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = v[i] + k2[i] * (0.5 * dt);
        }
        self.apply(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = v[i] + k3[i] * dt;
        }
        self.apply(&tmp, &mut k4);
        for i in 0..n {
            v[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0);
        }
    }
}

/// Evolves a band under the kernel's 1D generator.
pub fn band_evolve(
    state: &BandState,
    kernel: &CollisionKernel,
    dt: f64,
    steps: usize,
) -> Result<BandState> {
    BandGenerator::new(kernel, state.grid)?.evolve(state, dt, steps)
}

/// Translation by `shift` multiplies band k by e^{−ika/ħ}.
pub fn translate_band(state: &BandState, shift: f64, hbar: f64) -> BandState {
    let phase = Complex64::from_polar(1.0, -state.k() * shift / hbar);
    BandState {
        grid: state.grid,
        offset: state.offset,
        values: state.values.iter().map(|v| v * phase).collect(),
    }
}

/// max |evolve(translate(ρ)) − translate(evolve(ρ))| over all bands of a
/// (possibly multi-band) state.
pub fn covariance_test(
    kernel: &CollisionKernel,
    bands: &[BandState],
    shift: f64,
    dt: f64,
    steps: usize,
) -> Result<f64> {
    let hbar = kernel.units().hbar;
    let mut residual = 0.0f64;
    let mut generator: Option<BandGenerator> = None;
    for band in bands {
        let generator = match &generator {
            Some(g) if *g.grid() == band.grid => g,
            _ => generator.insert(BandGenerator::new(kernel, band.grid)?),
        };
        let a = generator.evolve(&translate_band(band, shift, hbar), dt, steps)?;
        let b = translate_band(&generator.evolve(band, dt, steps)?, shift, hbar);
        for (x, y) in a.values.iter().zip(&b.values) {
            residual = residual.max((x - y).norm());
        }
    }
    Ok(residual)
}

/// Maxwell density exp(−βp²/2M) on the grid, normalized to Σ ρ Δp = 1.
pub fn maxwell_density(grid: &MomentumGrid1D, mass: f64, beta: f64) -> Vec<f64> {
    let raw: Vec<f64> = grid
        .momenta()
        .iter()
        .map(|p| (-beta * p * p / (2.0 * mass)).exp())
        .collect();
    let norm = raw.iter().sum::<f64>() * grid.spacing();
    raw.into_iter().map(|x| x / norm).collect()
}

/// Stochastic simulation of the diagonal band as a lattice jump process.
///
/// Returns the number of trajectories found in each grid cell at `horizon`,
/// starting from cell probabilities proportional to `initial`.
pub fn lattice_histogram(
    generator: &BandGenerator,
    initial: &[f64],
    horizon: f64,
    n_traj: usize,
    seed: u64,
) -> Result<Vec<u64>> {
    let n = generator.grid.count;
    if initial.len() != n || initial.iter().any(|&x| !(x >= 0.0)) {
        return Err(invalid("initial", "need one non-negative weight per grid cell"));
    }
    let cumulative_init: Vec<f64> = initial
        .iter()
        .scan(0.0, |acc, &x| {
            *acc += x;
            Some(*acc)
        })
        .collect();
    let total = cumulative_init[n - 1];
    if !(total > 0.0) {
        return Err(invalid("initial", "weights sum to zero"));
    }
    // per-site cumulative jump rates over l
    let jumps: Vec<(Vec<i64>, Vec<f64>)> = (0..n)
        .map(|i| {
            let mut ls = Vec::new();
            let mut cum = Vec::new();
            let mut acc = 0.0;
            for l in -(n as i64 - 1)..=(n as i64 - 1) {
                let a = generator.amplitude(l, i);
                if a > 0.0 {
                    acc += a * a;
                    ls.push(l);
                    cum.push(acc);
                }
            }
            (ls, cum)
        })
        .collect();

    let finals: Vec<usize> = (0..n_traj)
        .into_par_iter()
        .map(|id| {
            let mut rng = ChaCha8Rng::seed_from_u64(trajectory_seed(seed, id as u64));
            let u = rng.random::<f64>() * total;
            let mut site = cumulative_init.partition_point(|&c| c <= u).min(n - 1);
            let mut t = 0.0;
            loop {
                let (ls, cum) = &jumps[site];
                let Some(&rate) = cum.last() else { break };
                t += -(-rng.random::<f64>()).ln_1p() / rate;
                if t > horizon {
                    break;
                }
                let u = rng.random::<f64>() * rate;
                let k = cum.partition_point(|&c| c <= u).min(ls.len() - 1);
                site = (site as i64 + ls[k]) as usize;
            }
            site
        })
        .collect();
    let mut counts = vec![0u64; n];
    for s in finals {
        counts[s] += 1;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::kernel::KernelVariant;
    use crate::physics::{GasSpec, ParticleSpec, PotentialSpec, UnitSystem};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn kernel(variant: KernelVariant) -> CollisionKernel {
        CollisionKernel::build(
            GasSpec::new(1.0, 1.0, 1.0).unwrap(),
            ParticleSpec::new(3.0).unwrap(),
            PotentialSpec::gaussian(1.0, 1.0).unwrap(),
            variant,
            UnitSystem::default(),
        )
        .unwrap()
    }

    fn gaussian_packet(grid: &MomentumGrid1D, p0: f64, sigma: f64, x0: f64) -> Vec<Complex64> {
        let raw: Vec<Complex64> = grid
            .momenta()
            .iter()
            .map(|&p| {
                let a = (-(p - p0) * (p - p0) / (4.0 * sigma * sigma)).exp();
                Complex64::from_polar(a, -p * x0)
            })
            .collect();
        let norm = (raw.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.spacing()).sqrt();
        raw.into_iter().map(|z| z / norm).collect()
    }

    /// Dense Poisson-form generator Σ_l [J_l ρ J_l† − ½{J_l† J_l, ρ}] − i[H, ρ]/ħ
    /// with J_l = Σ_i L(q_l, p_i) |i + l⟩⟨i|, all from one amplitude callback.
    fn dense_generator(
        rho: &[Vec<Complex64>],
        grid: &MomentumGrid1D,
        mass: f64,
        amp: &dyn Fn(f64, f64) -> f64,
    ) -> Vec<Vec<Complex64>> {
        let n = grid.count;
        let dp = grid.spacing();
        let mut out = vec![vec![c(0.0, 0.0); n]; n];
        for a in 0..n {
            for b in 0..n {
                let (pa, pb) = (grid.momentum(a), grid.momentum(b));
                out[a][b] += c(0.0, -(pa * pa - pb * pb) / (2.0 * mass)) * rho[a][b];
            }
        }
        for l in -(n as i64 - 1)..=(n as i64 - 1) {
            if l == 0 {
                continue;
            }
            let q = l as f64 * dp;
            // J_l as a list of (target, source, amplitude)
            let j: Vec<(usize, usize, f64)> = (0..n)
                .filter_map(|i| {
                    let t = i as i64 + l;
                    (t >= 0 && t < n as i64).then(|| (t as usize, i, amp(q, grid.momentum(i))))
                })
                .collect();
            for &(ta, sa, wa) in &j {
                for &(tb, sb, wb) in &j {
                    out[ta][tb] += rho[sa][sb] * (wa * wb);
                }
            }
            for &(_, s, w) in &j {
                for b in 0..n {
                    out[s][b] -= rho[s][b] * (0.5 * w * w);
                    out[b][s] -= rho[b][s] * (0.5 * w * w);
                }
            }
        }
        out
    }

    #[test]
    fn grid_validation_and_ranges() {
        assert!(MomentumGrid1D::new(0.0, 1.0, 8).is_err());
        assert!(MomentumGrid1D::new(1.0, 1.0, 32).is_err());
        let g = MomentumGrid1D::symmetric(0.5, 21).unwrap();
        assert_eq!(g.momentum(10), 0.0);
        assert_eq!(g.band_range(0), (0, 21));
        assert_eq!(g.band_range(3), (3, 21));
        assert_eq!(g.band_range(-3), (0, 18));
    }

    #[test]
    fn diagonal_band_must_be_a_density() {
        let g = MomentumGrid1D::symmetric(0.5, 16).unwrap();
        assert!(BandState::new(g, 0, vec![c(-1e-3, 0.0); 16]).is_err());
        assert!(BandState::new(g, 0, vec![c(1.0, 0.0); 16]).is_err());
        assert!(BandState::new(g, 0, vec![c(0.1, 0.0); 16]).is_ok());
        assert!(BandState::new(g, 2, vec![c(0.1, 0.3); 16]).is_ok());
    }

    #[test]
    fn generator_matches_dense_poisson_form() {
        let k = kernel(KernelVariant::Exact);
        let grid = MomentumGrid1D::symmetric(0.4, 17).unwrap();
        let dp = grid.spacing();
        let amp = |q: f64, p: f64| (dp * k.line_intensity(q, p)).sqrt();
        let gen = BandGenerator::from_amplitude(grid, 3.0, 1.0, amp).unwrap();
        let psi = gaussian_packet(&grid, 0.5, 0.8, 1.3);
        let rho: Vec<Vec<Complex64>> = (0..grid.count)
            .map(|a| (0..grid.count).map(|b| psi[a] * psi[b].conj()).collect())
            .collect();
        let dense = dense_generator(&rho, &grid, 3.0, &amp);
        for offset in -16..=16i64 {
            let band = BandState::from_wavefunction(grid, offset, &psi).unwrap();
            let op = gen.operator(offset);
            let mut out = vec![c(0.0, 0.0); grid.count];
            op.apply(&band.values, &mut out);
            let (lo, hi) = grid.band_range(offset);
            for j in lo..hi {
                let expected = dense[j][(j as i64 - offset) as usize];
                assert!((out[j] - expected).norm() < 1e-13, "offset {offset}, row {j}");
            }
        }
    }

    #[test]
    fn band_evolution_matches_full_matrix_evolution() {
        // two bands evolved separately equal the corresponding entries of
        // the full density matrix evolved with the dense generator
        let k = kernel(KernelVariant::BrownianLimit);
        let grid = MomentumGrid1D::symmetric(0.4, 17).unwrap();
        let dp = grid.spacing();
        let amp = |q: f64, p: f64| (dp * k.line_intensity(q, p)).sqrt();
        let gen = BandGenerator::new(&k, grid).unwrap();
        let psi = gaussian_packet(&grid, -0.3, 0.7, 0.0);
        let n = grid.count;
        let mut rho: Vec<Vec<Complex64>> = (0..n)
            .map(|a| (0..n).map(|b| psi[a] * psi[b].conj()).collect())
            .collect();
        let (dt, steps) = (0.05, 40);
        for _ in 0..steps {
            let k1 = dense_generator(&rho, &grid, 3.0, &amp);
            let add = |r: &Vec<Vec<Complex64>>, d: &Vec<Vec<Complex64>>, h: f64| {
                r.iter()
                    .zip(d)
                    .map(|(x, y)| x.iter().zip(y).map(|(a, b)| a + b * h).collect())
                    .collect::<Vec<Vec<Complex64>>>()
            };
            let k2 = dense_generator(&add(&rho, &k1, 0.5 * dt), &grid, 3.0, &amp);
            let k3 = dense_generator(&add(&rho, &k2, 0.5 * dt), &grid, 3.0, &amp);
            let k4 = dense_generator(&add(&rho, &k3, dt), &grid, 3.0, &amp);
            for a in 0..n {
                for b in 0..n {
                    rho[a][b] += (k1[a][b] + (k2[a][b] + k3[a][b]) * 2.0 + k4[a][b]) * (dt / 6.0);
                }
            }
        }
        for offset in [0i64, 3] {
            let band = BandState::from_wavefunction(grid, offset, &psi).unwrap();
            let evolved = gen.evolve(&band, dt, steps).unwrap();
            let (lo, hi) = grid.band_range(offset);
            for j in lo..hi {
                let expected = rho[j][(j as i64 - offset) as usize];
                assert!((evolved.values[j] - expected).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn trace_positivity_and_decoherence() {
        let k = kernel(KernelVariant::Exact);
        let grid = MomentumGrid1D::symmetric(0.25, 64).unwrap();
        let gen = BandGenerator::new(&k, grid).unwrap();
        let psi = gaussian_packet(&grid, 1.0, 1.0, 0.0);
        let diag = BandState::from_wavefunction(grid, 0, &psi).unwrap();
        let op = gen.operator(0);
        let dt = 0.5 * STEP_BOUND / op.max_rate();
        let mut v = diag.values.clone();
        let t0 = diag.trace().re;
        for _ in 0..1000 {
            op.rk4_step(&mut v, dt);
            assert!(v.iter().all(|x| x.re >= -1e-12 && x.im == 0.0));
        }
        let t1: f64 = v.iter().map(|x| x.re).sum::<f64>() * grid.spacing();
        assert!((t1 - t0).abs() < 1e-8, "{t0} -> {t1}");

        let coh = BandState::from_wavefunction(grid, 6, &psi).unwrap();
        let op = gen.operator(6);
        let dt = 0.5 * STEP_BOUND / op.max_rate();
        let mut v = coh.values.clone();
        let mut mass = coh.l1_mass();
        for _ in 0..500 {
            op.rk4_step(&mut v, dt);
            let next = v.iter().map(|x| x.norm()).sum::<f64>() * grid.spacing();
            assert!(next <= mass + 1e-10, "{mass} -> {next}");
            mass = next;
        }
        assert!(mass < coh.l1_mass());
    }

    #[test]
    fn step_bound_is_enforced() {
        let k = kernel(KernelVariant::Exact);
        let grid = MomentumGrid1D::symmetric(0.25, 32).unwrap();
        let psi = gaussian_packet(&grid, 0.0, 1.0, 0.0);
        let band = BandState::from_wavefunction(grid, 0, &psi).unwrap();
        let err = band_evolve(&band, &k, 1e3, 1).unwrap_err();
        assert!(matches!(err, Error::Stability { .. }));
    }

    #[test]
    fn maxwell_is_stationary_on_the_grid() {
        for variant in [KernelVariant::Exact, KernelVariant::BrownianLimit] {
            let k = kernel(variant);
            let grid = MomentumGrid1D::symmetric(0.2, 81).unwrap();
            let gen = BandGenerator::new(&k, grid).unwrap();
            let rho = maxwell_density(&grid, 3.0, 1.0);
            let r = gen.collision_integral(&rho);
            let scale = gen
                .loss_rates()
                .iter()
                .zip(&rho)
                .map(|(g, x)| g * x)
                .fold(0.0, f64::max);
            let worst = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            assert!(worst < 1e-12 * scale.max(1.0), "{variant:?}: {worst} vs {scale}");
        }
    }

    #[test]
    fn translation_phases_commute_with_evolution() {
        let k = kernel(KernelVariant::Exact);
        let grid = MomentumGrid1D::symmetric(0.25, 48).unwrap();
        let psi = gaussian_packet(&grid, 0.5, 1.0, -0.4);
        let bands: Vec<BandState> = [0i64, 2, -5]
            .iter()
            .map(|&o| BandState::from_wavefunction(grid, o, &psi).unwrap())
            .collect();
        let r0 = covariance_test(&k, &bands[..1], 3.7, 0.01, 50).unwrap();
        assert_eq!(r0, 0.0);
        let r = covariance_test(&k, &bands, 1.0, 0.01, 50).unwrap();
        assert!(r < 1e-12, "{r}");
    }
}
