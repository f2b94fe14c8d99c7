use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, Normal};

use qlbe_core::brownian::{
    evolve_grid, evolve_moments, generator_bound, translation_covariance_grid, Coefficients,
    GaussianState1D, GridDensityMatrix, GridSample, GridSchedule, PositionGrid, ThermalSpreads,
};
use qlbe_core::friction::{self, REFERENCE_ETA};
use qlbe_core::kinetics::band::STEP_BOUND;
use qlbe_core::kinetics::{
    covariance_test, mc_evolve, BandGenerator, BandState, CollisionKernel, InitialCondition,
    KernelVariant, McConfig, MomentumGrid1D, Recording,
};
use qlbe_core::physics::{GasSpec, ParticleSpec, PotentialSpec, UnitSystem};
use qlbe_core::stats::ks_distance_normal;
use qlbe_core::structure_factor::{
    detailed_balance_residual, fdt_phi, fdt_phi_from_response, scattering_rate,
    total_cross_section, zeroth_moment, SpectralFunction,
};

use crate::config::{McInitial, RunConfig, Scenario};

pub const DETAILED_BALANCE_TOL: f64 = 1e-12;
pub const NORMALIZATION_TOL: f64 = 1e-8;
pub const FDT_ABS_TOL: f64 = 1e-8;
pub const LOSS_IDENTITY_REL_TOL: f64 = 1e-6;
pub const KS_FACTOR: f64 = 3.0;
pub const TRACE_TOL: f64 = 1e-8;
pub const BAND_DIAGONAL_MIN: f64 = -1e-12;
pub const COHERENCE_GROWTH_TOL: f64 = 1e-10;
pub const MIN_EIGENVALUE_TOL: f64 = -1e-7;
pub const MOMENT_AGREEMENT_TOL: f64 = 1e-4;
pub const IDENTITY_ULPS: f64 = 4.0;
pub const QUADRATURE_AGREEMENT_TOL: f64 = 1e-8;
pub const GRADIENT_FORM_TOL: f64 = 1e-10;
pub const REFERENCE_TOL: f64 = 1e-8;
pub const BAND_COVARIANCE_TOL: f64 = 1e-10;
pub const GRID_COVARIANCE_TOL: f64 = 1e-8;
pub const TRAPEZOID_POINTS: usize = 1_000_000;
pub const DEFAULT_STEP_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `value <= tolerance`.
    pub fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }

    /// Passes when `value >= tolerance`.
    pub fn at_least(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            pass: value >= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub input_digest: String,
    pub seed: Option<u64>,
    pub results: BTreeMap<String, Value>,
    pub outputs: Vec<String>,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub wall_time_s: f64,
}

fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

struct Csv {
    text: String,
}

impl Csv {
    fn new(header: &[&str]) -> Self {
        Self {
            text: header.join(",") + "\n",
        }
    }

    fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }
}

struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(path)
    }
}

#[derive(Default)]
struct Report {
    results: BTreeMap<String, Value>,
    checks: Vec<Check>,
}

impl Report {
    fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.results.insert(key.into(), value.into());
    }
}

/// SHA-256 over the scenario, the effective seed and the config text.
pub fn input_digest(scenario: Scenario, seed: Option<u64>, config_text: &str) -> String {
    let mut h = Sha256::new();
    h.update(scenario.name().as_bytes());
    h.update(b"\n");
    h.update(seed.map(|s| s.to_string()).unwrap_or_default().as_bytes());
    h.update(b"\n");
    h.update(config_text.as_bytes());
    h.finalize().iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn particle(cfg: &RunConfig) -> Result<ParticleSpec> {
    cfg.particle.context("particle.mass is required")
}

fn potential(cfg: &RunConfig) -> Result<&PotentialSpec> {
    cfg.potential.as_ref().context("potential settings are required")
}

fn kernel(cfg: &RunConfig, variant: KernelVariant) -> Result<CollisionKernel> {
    Ok(CollisionKernel::build(
        cfg.gas,
        particle(cfg)?,
        potential(cfg)?.clone(),
        variant,
        cfg.units,
    )?)
}

/// Runs the configured scenario, writing `<scenario>.csv`, any auxiliary
/// files and finally `summary.json` into `out_dir`.
pub fn run(cfg: &RunConfig, config_text: &str, out_dir: &Path) -> Result<RunSummary> {
    let start = Instant::now();
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut out = Output {
        dir: out_dir.to_path_buf(),
        files: Vec::new(),
    };
    let mut report = Report::default();
    match cfg.scenario {
        Scenario::Dsf => dsf(cfg, &mut out, &mut report),
        Scenario::Fdt => fdt(cfg, &mut out, &mut report),
        Scenario::Xsec => xsec(cfg, &mut out, &mut report),
        Scenario::Kinetic => kinetic(cfg, &mut out, &mut report),
        Scenario::Brownian => brownian(cfg, &mut out, &mut report),
        Scenario::Friction => friction_run(cfg, &mut out, &mut report),
        Scenario::Covariance => covariance(cfg, &mut out, &mut report),
    }
    .with_context(|| format!("scenario `{}` failed", cfg.scenario))?;

    let passed = report.checks.iter().all(|c| c.pass);
    let summary = RunSummary {
        scenario: cfg.scenario.name().into(),
        input_digest: input_digest(cfg.scenario, cfg.seed, config_text),
        seed: cfg.seed,
        results: report.results,
        outputs: out.files.clone(),
        checks: report.checks,
        passed,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let text = serde_json::to_string_pretty(&summary)? + "\n";
    out.write("summary.json", &text)?;
    Ok(summary)
}

fn dsf(cfg: &RunConfig, out: &mut Output, report: &mut Report) -> Result<()> {
    let d = &cfg.dsf;
    let qs = linspace(d.q_min, d.q_max, d.q_count);
    let es = linspace(d.e_min, d.e_max, d.e_count);
    let mut csv = Csv::new(&["q", "E", "value", "variant"]);
    let mut min_value = f64::INFINITY;
    for s in [SpectralFunction::MbExact(cfg.gas), SpectralFunction::MbLimit(cfg.gas)] {
        let mut residual = 0.0f64;
        for &q in &qs {
            for &e in &es {
                let v = s.value(q, e)?;
                min_value = min_value.min(v);
                residual = residual.max(detailed_balance_residual(&s, &[q, 0.0, 0.0], e)?.abs());
                csv.row(&[sci(q), sci(e), sci(v), s.name().into()]);
            }
        }
        report.checks.push(Check::at_most(
            &format!("detailed_balance_{}", s.name()),
            residual,
            DETAILED_BALANCE_TOL,
        ));
    }
    let exact = SpectralFunction::MbExact(cfg.gas);
    let mut norm = 0.0f64;
    for &q in &qs {
        norm = norm.max((zeroth_moment(&exact, q, &cfg.quad)?.value - 1.0).abs());
    }
    report.checks.push(Check::at_most("normalization_exact", norm, NORMALIZATION_TOL));
    report.checks.push(Check::at_least("non_negative", min_value, 0.0));
    report.set("points", qs.len() * es.len());
    out.write("dsf.csv", &csv.text)?;
    Ok(())
}

fn fdt(cfg: &RunConfig, out: &mut Output, report: &mut Report) -> Result<()> {
    let s = SpectralFunction::MbExact(cfg.gas);
    let mut csv = Csv::new(&["q", "t", "value", "variant"]);
    let mut worst = 0.0f64;
    for &(q, t) in &cfg.fdt.points {
        let qv = [q, 0.0, 0.0];
        let a = fdt_phi(&s, &qv, t, &cfg.units, &cfg.quad)?;
        let b = fdt_phi_from_response(&s, &qv, t, &cfg.units, &cfg.quad)?;
        worst = worst
            .max((a.phi_minus - b.phi_minus).abs())
            .max((a.phi_plus - b.phi_plus).abs());
        for (v, name) in [
            (a.phi_minus, "phi_minus_dsf"),
            (a.phi_plus, "phi_plus_dsf"),
            (b.phi_minus, "phi_minus_response"),
            (b.phi_plus, "phi_plus_response"),
        ] {
            csv.row(&[sci(q), sci(t), sci(v), name.into()]);
        }
    }
    report.checks.push(Check::at_most("fdt_cross_form", worst, FDT_ABS_TOL));
    report.set("points", cfg.fdt.points.len());
    out.write("fdt.csv", &csv.text)?;
    Ok(())
}

fn xsec(cfg: &RunConfig, out: &mut Output, report: &mut Report) -> Result<()> {
    let big_m = particle(cfg)?.mass;
    let pot = potential(cfg)?;
    let s = cfg.xsec.variant.spectral(cfg.gas);
    let mut csv = Csv::new(&["p", "sigma", "loss_rate", "half_rate"]);
    let mut worst = 0.0f64;
    for &p in &cfg.xsec.momenta {
        let xs = total_cross_section(pot, &s, &[p, 0.0, 0.0], big_m, &cfg.units, &cfg.quad)?;
        let half = 0.5 * scattering_rate(pot, &s, p, big_m, &cfg.units, &cfg.quad)?.value;
        let residual = if half == 0.0 {
            xs.loss_rate.abs()
        } else {
            (xs.loss_rate - half).abs() / half
        };
        worst = worst.max(residual);
        csv.row(&[sci(p), sci(xs.sigma), sci(xs.loss_rate), sci(half)]);
    }
    report.checks.push(Check::at_most("loss_identity", worst, LOSS_IDENTITY_REL_TOL));
    report.set("variant", cfg.xsec.variant.name());
    out.write("xsec.csv", &csv.text)?;
    Ok(())
}

fn band_step(generator: &BandGenerator, offsets: &[i64], requested: Option<f64>) -> Result<f64> {
    let rate = offsets
        .iter()
        .map(|&o| generator.operator(o).max_rate())
        .fold(0.0, f64::max);
    let dt = match requested {
        Some(dt) => dt,
        None if rate > 0.0 => 0.5 * STEP_BOUND / rate,
        None => 0.01,
    };
    for &o in offsets {
        generator.operator(o).check_step(dt)?;
    }
    Ok(dt)
}

fn gaussian_wavefunction(grid: &MomentumGrid1D, center: f64, width: f64) -> Vec<Complex64> {
    let raw: Vec<f64> = grid
        .momenta()
        .iter()
        .map(|p| (-(p - center).powi(2) / (4.0 * width * width)).exp())
        .collect();
    let norm = (raw.iter().map(|x| x * x).sum::<f64>() * grid.spacing()).sqrt();
    raw.iter().map(|x| Complex64::new(x / norm, 0.0)).collect()
}

fn kinetic(cfg: &RunConfig, out: &mut Output, report: &mut Report) -> Result<()> {
    let seed = cfg.seed.context("run.seed is required")?;
    let k = kernel(cfg, cfg.kernel_variant)?;
    let big_m = k.particle().mass;
    let mft = if k.is_inert() { None } else { Some(k.mean_free_time(&cfg.quad)?) };
    let horizon = match (cfg.mc.horizon, mft) {
        (Some(h), _) => h,
        (None, Some(tau)) => 5.0 * tau,
        (None, None) => bail!("the collision rate vanishes; set mc.horizon explicitly"),
    };
    let times = linspace(0.0, horizon, cfg.mc.snapshots);
    let initial = match cfg.mc.initial {
        McInitial::Maxwell => InitialCondition::Maxwell {
            mass: big_m,
            beta: cfg.gas.beta,
        },
        McInitial::Fixed(p) => InitialCondition::Fixed(p),
    };
    let ens = mc_evolve(
        &k,
        initial,
        &McConfig {
            horizon,
            n_traj: cfg.mc.n_traj,
            seed,
            recording: Recording::Snapshots(times),
        },
    )?;

    let mut csv = Csv::new(&["t", "px", "py", "pz", "traj_id"]);
    let mut disorder = 0usize;
    for tr in &ens.trajectories {
        disorder += tr.points.windows(2).filter(|w| w[1].0 <= w[0].0).count();
        for (t, p) in &tr.points {
            csv.row(&[sci(*t), sci(p[0]), sci(p[1]), sci(p[2]), tr.id.to_string()]);
        }
    }
    out.write("kinetic.csv", &csv.text)?;
    report.checks.push(Check::at_most("trajectory_order", disorder as f64, 0.0));

    let sd = (big_m / cfg.gas.beta).sqrt();
    let finals: Vec<f64> = ens.trajectories.iter().map(|t| t.final_momentum()[0]).collect();
    let ks = ks_distance_normal(&finals, 0.0, sd)?;
    if matches!(initial, InitialCondition::Maxwell { .. }) && k.variant() == KernelVariant::Exact {
        let tol = KS_FACTOR / (finals.len() as f64).sqrt();
        report.checks.push(Check::at_most("maxwell_stationarity_ks", ks, tol));
    }

    let normal = Normal::new(0.0, sd)?;
    let edges = linspace(-4.0 * sd, 4.0 * sd, cfg.mc.bins + 1);
    let mut hist = Csv::new(&["p_lo", "p_hi", "count", "maxwell_expected"]);
    for w in edges.windows(2) {
        let count = finals.iter().filter(|&&p| p >= w[0] && p < w[1]).count();
        let expected = finals.len() as f64 * (normal.cdf(w[1]) - normal.cdf(w[0]));
        hist.row(&[sci(w[0]), sci(w[1]), count.to_string(), sci(expected)]);
    }
    out.write("kinetic_histogram.csv", &hist.text)?;

    let b = &cfg.band;
    let grid = MomentumGrid1D::symmetric(b.dp, b.count)?;
    let generator = BandGenerator::new(&k, grid)?;
    let mut offsets = b.offsets.clone();
    if !offsets.contains(&0) {
        offsets.insert(0, 0);
    }
    let dt = band_step(&generator, &offsets, b.dt)?;
    let psi = gaussian_wavefunction(&grid, b.center, b.width);
    let marks: Vec<usize> = (0..b.snapshots)
        .map(|i| (i * b.steps + (b.snapshots - 1) / 2) / (b.snapshots - 1))
        .collect();
    let mut bands_csv = Csv::new(&["p", "re", "im", "k", "t"]);
    let (mut drift, mut diag_min, mut growth) = (0.0f64, f64::INFINITY, f64::NEG_INFINITY);
    for &o in &offsets {
        let mut state = BandState::from_wavefunction(grid, o, &psi)?;
        let trace0 = state.trace().re;
        let mut l1 = state.l1_mass();
        let mut done = 0;
        for &m in &marks {
            state = generator.evolve(&state, dt, m - done)?;
            done = m;
            let t = m as f64 * dt;
            let (lo, hi) = grid.band_range(o);
            for j in lo..hi {
                let v = state.values[j];
                bands_csv.row(&[sci(grid.momentum(j)), sci(v.re), sci(v.im), sci(state.k()), sci(t)]);
            }
            if o == 0 {
                drift = drift.max((state.trace().re - trace0).abs() / t.max(1.0));
                diag_min = diag_min.min(state.values.iter().map(|v| v.re).fold(f64::INFINITY, f64::min));
            } else {
                growth = growth.max(state.l1_mass() - l1);
                l1 = state.l1_mass();
            }
        }
    }
    out.write("kinetic_bands.csv", &bands_csv.text)?;
    report.checks.push(Check::at_most("band_trace_drift_per_time", drift, TRACE_TOL));
    report.checks.push(Check::at_least("band_diagonal_min", diag_min, BAND_DIAGONAL_MIN));
    if offsets.iter().any(|&o| o != 0) {
        report.checks.push(Check::at_most("coherence_l1_growth", growth, COHERENCE_GROWTH_TOL));
    }

    report.set("variant", k.variant().name());
    report.set("mean_free_time", mft);
    report.set("horizon", horizon);
    report.set("trajectories", ens.len());
    report.set("total_jumps", ens.total_jumps());
    report.set("final_mean_px", ens.mean_momentum(horizon)[0]);
    report.set("ks_distance", ks);
    report.set("band_dt", dt);
    report.set("band_steps", b.steps);
    Ok(())
}

fn friction_eta(cfg: &RunConfig, given: Option<f64>) -> Result<f64> {
    match given {
        Some(eta) => Ok(eta),
        None => Ok(friction::eta(&cfg.gas, &particle(cfg)?, potential(cfg)?, &cfg.units, &cfg.quad)?.eta),
    }
}

fn initial_state(cfg: &RunConfig, spreads: &ThermalSpreads) -> Result<GaussianState1D> {
    let [mx, mp, vx, vp, c] = cfg.brownian.state;
    let var_x = vx.unwrap_or(spreads.dx_th * spreads.dx_th);
    let var_p = vp.unwrap_or(0.25 * cfg.units.hbar * cfg.units.hbar / var_x);
    Ok(GaussianState1D::new(
        mx.unwrap_or(0.0),
        mp.unwrap_or(0.0),
        var_x,
        var_p,
        c.unwrap_or(0.0),
        &cfg.units,
    )?)
}

struct BrownianSetup {
    mass: f64,
    coeff: Coefficients,
    spreads: ThermalSpreads,
    grid: PositionGrid,
    state: GaussianState1D,
    dt: f64,
}

fn brownian_setup(cfg: &RunConfig) -> Result<BrownianSetup> {
    let mass = particle(cfg)?.mass;
    let eta = friction_eta(cfg, cfg.brownian.eta)?;
    let coeff = Coefficients::new(eta, mass, cfg.gas.beta, &cfg.units)?;
    let spreads = ThermalSpreads::new(mass, cfg.gas.beta, &cfg.units)?;
    let grid = PositionGrid::centered(cfg.brownian.dx.unwrap_or(spreads.dx_th), cfg.brownian.count)?;
    let state = initial_state(cfg, &spreads)?;
    let dt = cfg
        .brownian
        .dt
        .unwrap_or_else(|| DEFAULT_STEP_FRACTION / generator_bound(&grid, &coeff, mass, &cfg.units));
    Ok(BrownianSetup {
        mass,
        coeff,
        spreads,
        grid,
        state,
        dt,
    })
}

/// Largest component-wise deviation, each scaled by its thermal size.
fn moment_deviation(a: &GaussianState1D, b: &GaussianState1D, spreads: &ThermalSpreads) -> f64 {
    let (sx, sp) = (spreads.dx_th, spreads.dp_th);
    let rel = |x: f64, y: f64, scale: f64| (x - y).abs() / y.abs().max(scale);
    rel(a.mean_x, b.mean_x, sx)
        .max(rel(a.mean_p, b.mean_p, sp))
        .max(rel(a.var_x, b.var_x, sx * sx))
        .max(rel(a.var_p, b.var_p, sp * sp))
        .max(rel(a.cov_xp, b.cov_xp, sx * sp))
}

fn write_matrix(text: &mut String, rho: &GridDensityMatrix, step: usize, t: f64) {
    let n = rho.grid().count;
    let _ = writeln!(text, "# step {step} t {} count {n}", sci(t));
    for i in 0..n {
        let row: Vec<String> = (0..n)
            .flat_map(|j| {
                let v = rho.get(i, j);
                [sci(v.re), sci(v.im)]
            })
            .collect();
        let _ = writeln!(text, "{}", row.join(" "));
    }
    text.push('\n');
}

fn brownian(cfg: &RunConfig, out: &mut Output, report: &mut Report) -> Result<()> {
    let s = brownian_setup(cfg)?;
    let b = &cfg.brownian;
    let chunk = if b.matrix_every > 0 { b.matrix_every } else { b.steps.max(1) };
    let mut rho = GridDensityMatrix::gaussian(s.grid, &s.state, &cfg.units)?;
    let mut samples: Vec<GridSample> = Vec::new();
    let mut matrices = String::new();
    if b.matrix_every > 0 {
        write_matrix(&mut matrices, &rho, 0, 0.0);
    }
    let mut done = 0;
    while done < b.steps || samples.is_empty() {
        let n = chunk.min(b.steps - done);
        let run = evolve_grid(
            &rho,
            &s.coeff,
            s.mass,
            &cfg.units,
            &GridSchedule {
                dt: s.dt,
                steps: n,
                monitor_every: b.monitor_every,
            },
        )?;
        let skip = usize::from(!samples.is_empty());
        for mut sample in run.samples.into_iter().skip(skip) {
            sample.step += done;
            sample.time = sample.step as f64 * s.dt;
            samples.push(sample);
        }
        done += n;
        rho = run.state;
        if b.matrix_every > 0 && n > 0 {
            write_matrix(&mut matrices, &rho, done, done as f64 * s.dt);
        }
        if n == 0 {
            break;
        }
    }

    let mut csv = Csv::new(&["t", "mean_x", "mean_p", "var_x", "var_p", "cov_xp", "min_eig"]);
    let mut deviation = 0.0f64;
    for sm in &samples {
        let m = sm.moments;
        let exact = evolve_moments(&s.state, &s.coeff, s.mass, sm.time)?;
        deviation = deviation.max(moment_deviation(&m, &exact, &s.spreads));
        csv.row(&[
            sci(sm.time),
            sci(m.mean_x),
            sci(m.mean_p),
            sci(m.var_x),
            sci(m.var_p),
            sci(m.cov_xp),
            sci(sm.min_eigenvalue),
        ]);
    }
    out.write("brownian.csv", &csv.text)?;
    if b.matrix_every > 0 {
        out.write("brownian_matrix.txt", &matrices)?;
    }

    let t0 = samples[0].trace;
    let drift = samples
        .iter()
        .map(|x| (x.trace - t0).abs())
        .fold((t0 - 1.0).abs(), f64::max);
    let min_eig = samples.iter().map(|x| x.min_eigenvalue).fold(f64::INFINITY, f64::min);
    let identity = s.coeff.minimal_invasiveness_residual(&cfg.units) / f64::EPSILON;
    let half = cfg.units.hbar / 2.0;
    let uncertainty = (s.spreads.uncertainty_product() - half).abs() / half / f64::EPSILON;
    report.checks.push(Check::at_most("trace_drift", drift, TRACE_TOL));
    report.checks.push(Check::at_least("min_eigenvalue", min_eig, MIN_EIGENVALUE_TOL));
    report.checks.push(Check::at_most("moments_cross_solver", deviation, MOMENT_AGREEMENT_TOL));
    report.checks.push(Check::at_most("diffusion_identity_ulps", identity, IDENTITY_ULPS));
    report.checks.push(Check::at_most("uncertainty_identity_ulps", uncertainty, IDENTITY_ULPS));

    report.set("eta", s.coeff.eta);
    report.set("d_pp", s.coeff.d_pp);
    report.set("d_xx", s.coeff.d_xx);
    report.set("dt", s.dt);
    report.set("steps", b.steps);
    report.set("grid_dx", s.grid.dx);
    report.set("grid_count", s.grid.count);
    Ok(())
}

fn is_reference(gas: &GasSpec, particle: &ParticleSpec, pot: &PotentialSpec, units: &UnitSystem) -> bool {
    *gas == GasSpec { mass: 1.0, beta: 1.0, density: 1.0 }
        && particle.mass == 100.0
        && *pot == PotentialSpec::Gaussian { strength: 1.0, range: 1.0 }
        && units.hbar == 1.0
}

fn friction_run(cfg: &RunConfig, out: &mut Output, report: &mut Report) -> Result<()> {
    let part = particle(cfg)?;
    let pot = potential(cfg)?;
    let r = friction::eta(&cfg.gas, &part, pot, &cfg.units, &cfg.quad)?;

    let mut csv = Csv::new(&["q", "weight"]);
    for &(q, w) in &r.samples {
        csv.row(&[sci(q), sci(w)]);
    }
    let samples_path = out.write("friction.csv", &csv.text)?;

    let rel = |x: f64| if r.eta == 0.0 { x.abs() } else { (x - r.eta).abs() / r.eta };
    let trap = friction::eta_trapezoid(&cfg.gas, &part, pot, &cfg.units, TRAPEZOID_POINTS)?;
    report.checks.push(Check::at_most("quadrature_agreement", rel(trap), QUADRATURE_AGREEMENT_TOL));
    if let PotentialSpec::Gaussian { strength, range } = *pot {
        let closed = friction::eta_gaussian_closed_form(&cfg.gas, &part, strength, range, &cfg.units);
        report.checks.push(Check::at_most("closed_form_agreement", rel(closed), QUADRATURE_AGREEMENT_TOL));
    }
    let gradient = friction::eta_gradient_form_residual(&cfg.gas, &part, pot, &cfg.units, &cfg.quad)?;
    report.checks.push(Check::at_most("gradient_form", gradient, GRADIENT_FORM_TOL));
    if is_reference(&cfg.gas, &part, pot, &cfg.units) {
        let dev = (r.eta - REFERENCE_ETA).abs() / REFERENCE_ETA;
        report.checks.push(Check::at_most("reference_eta", dev, REFERENCE_TOL));
    }

    let json_report = json!({
        "eta": r.eta,
        "error_estimate": r.error_estimate,
        "q_max": r.q_max,
        "samples_path": samples_path.display().to_string(),
    });
    out.write("friction_report.json", &(serde_json::to_string_pretty(&json_report)? + "\n"))?;
    report.set("eta", r.eta);
    report.set("error_estimate", r.error_estimate);
    report.set("q_max", r.q_max);
    report.set("samples_path", samples_path.display().to_string());
    report.set("d_pp", r.d_pp);
    report.set("d_xx", r.d_xx);
    report.set("mass_ratio", r.mass_ratio);
    Ok(())
}

fn covariance(cfg: &RunConfig, out: &mut Output, report: &mut Report) -> Result<()> {
    let seed = cfg.seed.context("run.seed is required")?;
    let b = &cfg.band;
    let k = kernel(cfg, KernelVariant::Exact)?;
    let grid = MomentumGrid1D::symmetric(b.dp, b.count)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<Complex64> = grid
        .momenta()
        .iter()
        .map(|&p| {
            let env = (-(p - b.center).powi(2) / (4.0 * b.width * b.width)).exp();
            Complex64::new(env * rng.random_range(-1.0..1.0), env * rng.random_range(-1.0..1.0))
        })
        .collect();
    let norm = (raw.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.spacing()).sqrt();
    let psi: Vec<Complex64> = raw.iter().map(|z| z / norm).collect();
    let bands: Vec<BandState> = b
        .offsets
        .iter()
        .map(|&o| BandState::from_wavefunction(grid, o, &psi))
        .collect::<qlbe_core::Result<_>>()?;
    let dt = band_step(&BandGenerator::new(&k, grid)?, &b.offsets, b.dt)?;
    let band_residual = covariance_test(&k, &bands, b.shift, dt, b.steps)?;

    let s = brownian_setup(cfg)?;
    let rho = GridDensityMatrix::gaussian(s.grid, &s.state, &cfg.units)?;
    let steps = cfg.brownian.steps;
    let grid_residual = translation_covariance_grid(
        &s.coeff,
        s.mass,
        &cfg.units,
        &rho,
        s.grid.dx,
        &GridSchedule {
            dt: s.dt,
            steps,
            monitor_every: steps.max(1),
        },
    )?;

    let mut csv = Csv::new(&["test", "shift", "residual", "tolerance"]);
    csv.row(&["band".into(), sci(b.shift), sci(band_residual), sci(BAND_COVARIANCE_TOL)]);
    csv.row(&["grid".into(), sci(s.grid.dx), sci(grid_residual), sci(GRID_COVARIANCE_TOL)]);
    out.write("covariance.csv", &csv.text)?;
    report.checks.push(Check::at_most("band_covariance", band_residual, BAND_COVARIANCE_TOL));
    report.checks.push(Check::at_most("grid_covariance", grid_residual, GRID_COVARIANCE_TOL));
    report.set("band_dt", dt);
    report.set("grid_dt", s.dt);
    report.set("eta", s.coeff.eta);
    Ok(())
}
