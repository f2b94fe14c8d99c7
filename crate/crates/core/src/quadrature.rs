//! Adaptive Gauss–Kronrod (10/21 point) quadrature on finite intervals.
//!
//! Every integrand in this crate is analytic or piecewise analytic and decays
//! like a Gaussian, so integration ranges are truncated with [`decay_cutoff`]
//! and split at known kinks instead of being mapped to infinite domains.

use std::cell::Cell;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_980_380_310,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Convergence controls: stop once `error <= max(abs_tol, rel_tol * |value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_intervals: 2000,
        }
    }
}

impl QuadratureSpec {
    pub fn with_tolerances(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol >= 0.0 && self.rel_tol >= 0.0) || self.abs_tol + self.rel_tol <= 0.0 {
            return Err(crate::error::invalid(
                "quad.tolerance",
                "tolerances must be non-negative and not both zero",
            ));
        }
        if self.max_intervals == 0 {
            return Err(crate::error::invalid("quad.max_intervals", "must be >= 1"));
        }
        Ok(())
    }

    fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    let mut res_abs = kronrod.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = kronrod * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    if !value.is_finite() {
        error = f64::INFINITY;
    }
    Panel { a, b, value, error }
}

/// Integrates `f` over `[a, b]`, bisecting the worst panel until converged.
pub fn integrate<F: FnMut(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<QuadResult> {
    integrate_with_points(f, a, b, &[], spec)
}

/// Like [`integrate`], with the initial panels split at `points` inside `(a, b)`.
pub fn integrate_with_points<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    points: &[f64],
    spec: &QuadratureSpec,
) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut edges: Vec<f64> = points
        .iter()
        .copied()
        .filter(|&x| x > lo && x < hi)
        .collect();
    edges.push(lo);
    edges.push(hi);
    edges.sort_by(f64::total_cmp);
    edges.dedup();

    let mut heap = BinaryHeap::new();
    let (mut value, mut error) = (0.0, 0.0);
    for w in edges.windows(2) {
        let panel = gk21(&mut f, w[0], w[1]);
        value += panel.value;
        error += panel.error;
        heap.push(panel);
    }

    while !(error <= spec.target(value)) {
        if heap.len() >= spec.max_intervals {
            return Err(Error::Quadrature {
                lower: lo,
                upper: hi,
                estimate: error,
                tolerance: spec.target(value),
                intervals: heap.len(),
            });
        }
        let worst = heap.pop().expect("at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // panel can no longer be split in floating point
            heap.push(worst);
            return Err(Error::Quadrature {
                lower: lo,
                upper: hi,
                estimate: error,
                tolerance: spec.target(value),
                intervals: heap.len(),
            });
        }
        let left = gk21(&mut f, worst.a, mid);
        let right = gk21(&mut f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        if heap.len() % 64 == 0 || !error.is_finite() {
            // resum to stop cancellation drift in the running totals
            value = heap.iter().map(|p| p.value).sum();
            error = heap.iter().map(|p| p.error).sum();
        }
    }
    value = heap.iter().map(|p| p.value).sum();
    error = heap.iter().map(|p| p.error).sum();
    Ok(QuadResult {
        value: sign * value,
        error,
        intervals: heap.len(),
    })
}

/// Composite trapezoid rule with `n` points (n >= 2) on `[a, b]`.
pub fn trapezoid<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, n: usize) -> f64 {
    assert!(n >= 2, "trapezoid rule needs at least two points");
    let h = (b - a) / (n - 1) as f64;
    let mut sum = 0.5 * (f(a) + f(b));
    for i in 1..n - 1 {
        sum += f(a + h * i as f64);
    }
    sum * h
}

/// Nested adaptive quadrature of `f(x, y)` over `x in [a, b]`, `y in inner(x)`.
///
/// `inner` returns `(y_lo, y_hi, breakpoints)` for each outer abscissa. The
/// returned error is the outer estimate plus the integrated inner estimates.
pub fn integrate_2d<F, G>(
    f: F,
    a: f64,
    b: f64,
    outer_points: &[f64],
    inner: G,
    outer_spec: &QuadratureSpec,
    inner_spec: &QuadratureSpec,
) -> Result<QuadResult>
where
    F: Fn(f64, f64) -> f64,
    G: Fn(f64) -> (f64, f64, Vec<f64>),
{
    let failure: Cell<Option<Error>> = Cell::new(None);
    let inner_error = Cell::new(0.0f64);
    let outer = integrate_with_points(
        |x| {
            let (lo, hi, pts) = inner(x);
            match integrate_with_points(|y| f(x, y), lo, hi, &pts, inner_spec) {
                Ok(r) => {
                    inner_error.set(inner_error.get().max(r.error));
                    r.value
                }
                Err(e) => {
                    let prev = failure.take();
                    failure.set(Some(prev.unwrap_or(e)));
                    f64::NAN
                }
            }
        },
        a,
        b,
        outer_points,
        outer_spec,
    );
    if let Some(e) = failure.take() {
        return Err(e);
    }
    let mut outer = outer?;
    outer.error += inner_error.get() * (b - a).abs();
    Ok(outer)
}

/// Smallest `x > 0` past the peak of a non-negative radial profile `f` where
/// `f` has dropped below `rel * peak` and stays there for a few samples.
///
/// Sampling uses step `scale / 64`; `limit` caps the search. Returns `limit`
/// if the profile has not decayed by then.
pub fn decay_cutoff<F: Fn(f64) -> f64>(f: F, scale: f64, rel: f64, limit: f64) -> f64 {
    let h = scale / 64.0;
    let mut peak = 0.0f64;
    let mut below = 0usize;
    let mut x = 0.0;
    while x < limit {
        x += h;
        let v = f(x).abs();
        if v > peak {
            peak = v;
            below = 0;
        } else if peak > 0.0 && v < rel * peak {
            below += 1;
            if below >= 8 {
                return x;
            }
        } else {
            below = 0;
        }
    }
    limit
}
