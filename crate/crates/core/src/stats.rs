//! Statistical tools: KS tests, power-law fits, occupancy and exponent estimates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bbm::simulate_leaves;
use crate::error::{Error, Result};
use crate::front::FrontSurface;
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    /// `n1 n2 / (n1 + n2)`, or `n` for a one-sample test.
    pub effective_n: f64,
}

impl KsResult {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Asymptotic Kolmogorov tail `Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2)`.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// `c` with `Q(c) = alpha`.
pub fn kolmogorov_quantile(alpha: f64) -> f64 {
    let (mut lo, mut hi) = (0.2, 10.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_tail(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn sorted(x: &[f64]) -> Result<Vec<f64>> {
    if x.iter().any(|v| v.is_nan()) {
        return Err(Error::Domain("sample contains NaN".into()));
    }
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Sup distance between two empirical CDFs, exact under ties.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Parameter("KS needs non-empty samples".into()));
    }
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] == v {
            i += 1;
        }
        while j < b.len() && b[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / n1 - j as f64 / n2).abs());
    }
    Ok(d)
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.len() < 10 || b.len() < 10 {
        return Err(Error::Parameter(format!(
            "KS two-sample test needs at least 10 points per sample (got {} and {})",
            a.len(),
            b.len()
        )));
    }
    let statistic = ks_statistic(a, b)?;
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let effective_n = n1 * n2 / (n1 + n2);
    Ok(KsResult { statistic, p_value: kolmogorov_tail(effective_n.sqrt() * statistic), effective_n })
}

/// One-sample KS test against a continuous CDF.
pub fn ks_one_sample(a: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    if a.len() < 10 {
        return Err(Error::Parameter("KS one-sample test needs at least 10 points".into()));
    }
    let v = sorted(a)?;
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in v.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    Ok(KsResult { statistic: d, p_value: kolmogorov_tail(n.sqrt() * d), effective_n: n })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
}

/// Least-squares fit of `log h = log C + exponent log s`.
pub fn fit_power_law(s: &[f64], h: &[f64]) -> Result<PowerLawFit> {
    if s.len() != h.len() {
        return Err(Error::Parameter("s and h lengths differ".into()));
    }
    if s.len() < 3 {
        return Err(Error::Parameter(format!("power-law fit needs at least 3 points, got {}", s.len())));
    }
    if s.iter().chain(h).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain("power-law fit needs strictly positive finite values".into()));
    }
    let x: Vec<f64> = s.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all s values coincide".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(&y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(PowerLawFit { exponent: slope, prefactor: icpt.exp(), r_squared })
}

/// Median of a non-empty sample (mean of the two middle values for even n).
pub fn median(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::Parameter("median of empty sample".into()));
    }
    let v = sorted(x)?;
    let n = v.len();
    Ok(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Pool-adjacent-violators fit of a non-decreasing sequence.
pub fn isotonic_increasing(values: &[f64], weights: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, f64, usize)> = Vec::new(); // (mean, weight, count)
    for (v, w) in values.iter().zip(weights) {
        blocks.push((*v, w.max(1e-300), 1));
        while blocks.len() > 1 {
            let n = blocks.len();
            if blocks[n - 2].0 <= blocks[n - 1].0 {
                break;
            }
            let b = blocks.pop().unwrap();
            let a = blocks.last_mut().unwrap();
            let wt = a.1 + b.1;
            a.0 = (a.0 * a.1 + b.0 * b.1) / wt;
            a.1 = wt;
            a.2 += b.2;
        }
    }
    blocks.iter().flat_map(|(m, _, c)| std::iter::repeat_n(*m, *c)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_hits(hits: usize, n: usize) -> Self {
        let p = hits as f64 / n as f64;
        Estimate { value: p, stderr: (p * (1.0 - p) / n as f64).sqrt(), n }
    }
}

/// Occupancy `u(t, x_i)` for several points from one common set of replicas:
/// the fraction of replicas with some particle within `radius` of `x_i` at time `t`.
pub fn estimate_occupancy_profile(
    dim: usize,
    t: f64,
    xs: &[Vec<f64>],
    radius: f64,
    replicas: usize,
    rng: &RngStream,
    particle_cap: usize,
) -> Result<Vec<Estimate>> {
    if replicas == 0 {
        return Err(Error::Parameter("replicas must be positive".into()));
    }
    if !(radius > 0.0) {
        return Err(Error::Parameter(format!("radius must be positive, got {radius}")));
    }
    if xs.iter().any(|x| x.len() != dim) {
        return Err(Error::Parameter("query point dimension mismatch".into()));
    }
    let r2 = radius * radius;
    let per_rep: Vec<Vec<bool>> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let leaves = simulate_leaves(dim, t, &rng.derive(i as u64), particle_cap)?;
            Ok(xs
                .iter()
                .map(|x| leaves.chunks_exact(dim).any(|p| p.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>() <= r2))
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..xs.len())
        .map(|k| Estimate::from_hits(per_rep.iter().filter(|r| r[k]).count(), replicas))
        .collect())
}

/// Occupancy at a single point.
pub fn estimate_occupancy(
    dim: usize,
    t: f64,
    x: &[f64],
    radius: f64,
    replicas: usize,
    rng: &RngStream,
    particle_cap: usize,
) -> Result<Estimate> {
    Ok(estimate_occupancy_profile(dim, t, &[x.to_vec()], radius, replicas, rng, particle_cap)?[0])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    pub fit: PowerLawFit,
    pub s: Vec<f64>,
    pub median_height: Vec<f64>,
    pub replicas: usize,
}

/// Power-law fit of the pooled (replicas x thetas) median height against `s`
/// over `s_window = [lo, hi]`.
pub fn exponent_report(ensemble: &[FrontSurface], s_window: (f64, f64)) -> Result<ExponentReport> {
    let first = ensemble.first().ok_or_else(|| Error::Parameter("empty ensemble".into()))?;
    if ensemble.iter().any(|f| f.s != first.s) {
        return Err(Error::Parameter("ensemble surfaces use different s grids".into()));
    }
    let (lo, hi) = s_window;
    let idx: Vec<usize> = (0..first.s.len()).filter(|&i| first.s[i] >= lo && first.s[i] <= hi).collect();
    if idx.is_empty() {
        return Err(Error::Parameter(format!("s window [{lo}, {hi}] contains no grid point")));
    }
    let mut s = Vec::new();
    let mut med = Vec::new();
    for i in idx {
        let pooled: Vec<f64> = ensemble.iter().flat_map(|f| f.row(i).iter().copied()).collect();
        s.push(first.s[i]);
        med.push(median(&pooled)?);
    }
    let fit = fit_power_law(&s, &med)?;
    Ok(ExponentReport { fit, s, median_height: med, replicas: ensemble.len() })
}

/// One line of a verification report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check_id: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    pub n: usize,
    pub seed: u64,
    /// Why a check could not be evaluated, when it could not.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckRecord>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, id: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.check_id == id)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
