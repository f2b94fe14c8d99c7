//! Goodness-of-fit helpers used by the stochastic checks.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Kolmogorov–Smirnov distance between the empirical CDF of `samples` and
/// N(mean, sd²).
pub fn ks_distance_normal(samples: &[f64], mean: f64, sd: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Fit("no samples".into()));
    }
    let normal = Normal::new(mean, sd).map_err(|e| Error::Fit(e.to_string()))?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson test of `observed` counts against `expected` counts. Bins with
/// expected count below 5 are pooled into their neighbour.
pub fn chi_square(observed: &[u64], expected: &[f64]) -> Result<ChiSquare> {
    if observed.len() != expected.len() {
        return Err(Error::Fit("observed and expected differ in length".into()));
    }
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&ob, &ex) in observed.iter().zip(expected) {
        o += ob as f64;
        e += ex;
        if e >= 5.0 {
            pooled.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => pooled.push((o, e)),
        }
    }
    if pooled.len() < 2 {
        return Err(Error::Fit("fewer than two usable bins".into()));
    }
    let statistic: f64 = pooled.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = pooled.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::Fit(e.to_string()))?;
    Ok(ChiSquare {
        statistic,
        dof,
        p_value: 1.0 - dist.cdf(statistic),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ExponentialFit {
    /// Decay rate γ in y ≈ y₀ e^{−γt}.
    pub rate: f64,
    /// Standard error of γ from the regression residuals.
    pub rate_se: f64,
    pub amplitude: f64,
}

/// Least-squares fit of ln y against t.
pub fn fit_exponential(times: &[f64], values: &[f64]) -> Result<ExponentialFit> {
    if times.len() != values.len() || times.len() < 3 {
        return Err(Error::Fit("need at least three (t, y) pairs".into()));
    }
    if let Some(v) = values.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::Fit(format!(
            "non-positive value {v}: not in the exponential regime"
        )));
    }
    let n = times.len() as f64;
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let tm = times.iter().sum::<f64>() / n;
    let lm = logs.iter().sum::<f64>() / n;
    let sxx: f64 = times.iter().map(|t| (t - tm) * (t - tm)).sum();
    let sxy: f64 = times.iter().zip(&logs).map(|(t, l)| (t - tm) * (l - lm)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all times coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = lm - slope * tm;
    let ssr: f64 = times
        .iter()
        .zip(&logs)
        .map(|(t, l)| (l - intercept - slope * t).powi(2))
        .sum();
    Ok(ExponentialFit {
        rate: -slope,
        rate_se: (ssr / (n - 2.0) / sxx).sqrt(),
        amplitude: intercept.exp(),
    })
}
