//! The transform `rho(s) = sqrt(sup_sigma sigma (s - R_sigma))` of a Bessel(3) path.

use crate::error::{Error, Result};
use crate::front::{FrontSurface, ThetaSet};
use crate::paths::{brownian_with, PathGrid, TimeGrid};
use crate::rng::RngStream;

/// `P(last exit of a Bessel(3) from [0,a] > c a^2) < 1e-3` for `c` at least this.
///
/// The last exit time from `[0,a]` has the law of `a^2 / Z^2`, so the tail is
/// `2 Phi(1/sqrt(c)) - 1`, and `1/sqrt(c) = Phi^{-1}(0.5005) = 1.25331e-3`.
pub const LAST_EXIT_FACTOR: f64 = 6.3662e5;

/// Horizon past which a Bessel(3) from 0 exceeds `level` forever with
/// probability at least `1 - 1e-3`.
pub fn required_horizon(level: f64) -> f64 {
    LAST_EXIT_FACTOR * level * level
}

#[derive(Clone, Debug, PartialEq)]
pub struct RhoConfig {
    /// Smallest positive sigma, relative to the smallest positive `s^2`.
    pub sigma_first: f64,
    pub per_decade: usize,
    /// Explicit sigma horizon; `None` uses the last-exit rule.
    pub horizon: Option<f64>,
    /// Points inserted around each coarse argmax.
    pub refine_points: usize,
    /// The horizon may double at most this many times.
    pub max_doublings: usize,
}

impl Default for RhoConfig {
    fn default() -> Self {
        RhoConfig { sigma_first: 1e-4, per_decade: 2000, horizon: None, refine_points: 32, max_doublings: 20 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RhoSample {
    pub s: Vec<f64>,
    pub rho: Vec<f64>,
    pub argmax_sigma: Vec<f64>,
    /// Final sigma horizon after adaptive extension.
    pub horizon: f64,
}

/// `(sup_j sigma_j (s - path_j), argmax)` over a scalar path that starts at
/// `sigma = 0`. Ties go to the smallest sigma.
pub fn legendre_sup(path: &PathGrid, s: f64) -> Result<(f64, f64)> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("s must be >= 0, got {s}")));
    }
    if path.is_empty() || path.times[0] != 0.0 {
        return Err(Error::Grid("path must start at sigma = 0".into()));
    }
    Ok(sup_scalar(&path.times, &path.values[..], path.dim, s))
}

fn sup_scalar(times: &[f64], values: &[f64], stride: usize, s: f64) -> (f64, f64) {
    let mut best = (f64::NEG_INFINITY, 0.0);
    for (i, &sig) in times.iter().enumerate() {
        let v = sig * (s - values[i * stride]);
        if v > best.0 {
            best = (v, sig);
        }
    }
    best
}

fn validate_s(s_grid: &[f64]) -> Result<()> {
    if s_grid.is_empty() {
        return Err(Error::Parameter("s grid is empty".into()));
    }
    if s_grid.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
        return Err(Error::Domain("s values must be finite and >= 0".into()));
    }
    Ok(())
}

/// One realization of `rho` on `s_grid`, sharing a single Bessel(3) path and a
/// single sigma grid across all `s`, so `rho^2` is exactly convex in `s`.
pub fn sample_rho(s_grid: &[f64], cfg: &RhoConfig, rng: &RngStream) -> Result<RhoSample> {
    validate_s(s_grid)?;
    let s_max = s_grid.iter().copied().fold(0.0, f64::max);
    let s_min_pos = s_grid.iter().copied().filter(|s| *s > 0.0).fold(f64::INFINITY, f64::min);
    if s_max == 0.0 {
        return Ok(RhoSample { s: s_grid.to_vec(), rho: vec![0.0; s_grid.len()], argmax_sigma: vec![0.0; s_grid.len()], horizon: 0.0 });
    }
    let need = required_horizon(s_max);
    let horizon = match cfg.horizon {
        Some(h) if h < need => {
            return Err(Error::Configuration(format!(
                "sigma_horizon {h} is below the last-exit requirement {need:.4e} for s_max = {s_max}"
            )))
        }
        Some(h) => h,
        None => need,
    };
    let first = (cfg.sigma_first * s_min_pos * s_min_pos).min(horizon / 10.0);
    let grid = TimeGrid::geometric(first, horizon, cfg.per_decade)?;
    let mut g = rng.generator();
    let mut bm = brownian_with(3, &grid, &mut g);

    // Extend until the path stays above s_max on the last quarter.
    let mut h = horizon;
    let ratio = 10f64.powf(1.0 / cfg.per_decade as f64);
    let mut doublings = 0;
    loop {
        let norms = bm.norms();
        let ok = bm.times.iter().zip(&norms).filter(|(t, _)| **t >= 0.75 * h).all(|(_, r)| *r > s_max);
        if ok {
            break;
        }
        if doublings == cfg.max_doublings {
            return Err(Error::Truncation { horizon: h, required: 2.0 * h });
        }
        let mut extra = Vec::new();
        let mut t = h * ratio;
        while t < 2.0 * h {
            extra.push(t);
            t *= ratio;
        }
        extra.push(2.0 * h);
        bm = bm.refine_brownian(&extra, &mut g);
        h *= 2.0;
        doublings += 1;
    }

    // Refine around each coarse argmax; the union keeps one common grid.
    let norms = bm.norms();
    let mut extra = Vec::new();
    for &s in s_grid {
        if s == 0.0 {
            continue;
        }
        let (_, arg) = sup_scalar(&bm.times, &norms, 1, s);
        let k = bm.times.iter().position(|&t| t == arg).unwrap();
        let lo = if k > 0 { bm.times[k - 1] } else { 0.0 };
        let hi = if k + 1 < bm.len() { bm.times[k + 1] } else { bm.times[k] };
        for j in 1..=cfg.refine_points {
            extra.push(lo + (hi - lo) * j as f64 / (cfg.refine_points + 1) as f64);
        }
    }
    let bm = bm.refine_brownian(&extra, &mut g);
    let norms = bm.norms();

    let mut rho = Vec::with_capacity(s_grid.len());
    let mut argmax = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        if s == 0.0 {
            rho.push(0.0);
            argmax.push(0.0);
            continue;
        }
        let (v, a) = sup_scalar(&bm.times, &norms, 1, s);
        rho.push(v.max(0.0).sqrt());
        argmax.push(a);
    }
    Ok(RhoSample { s: s_grid.to_vec(), rho, argmax_sigma: argmax, horizon: h })
}

/// Rotationally symmetric surface `h(s, theta) = rho(s)`.
pub fn revolve_surface(sample: &RhoSample, thetas: &ThetaSet) -> FrontSurface {
    let nt = thetas.len();
    let mut heights = Vec::with_capacity(sample.s.len() * nt);
    for r in &sample.rho {
        heights.extend(std::iter::repeat_n(*r, nt));
    }
    FrontSurface { dim: thetas.dim, s: sample.s.clone(), thetas: thetas.directions.clone(), heights }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_constant_path() {
        let p = PathGrid { times: vec![0.0, 1.0, 2.0], dim: 1, values: vec![0.0; 3] };
        assert_eq!(legendre_sup(&p, 1.0).unwrap(), (2.0, 2.0));
        assert_eq!(legendre_sup(&p, 0.0).unwrap(), (0.0, 0.0));
        assert!(matches!(legendre_sup(&p, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn legendre_tie_goes_to_smallest() {
        // sigma (1 - x): 1*(1-0)=1 and 2*(1-0.5)=1.
        let p = PathGrid { times: vec![0.0, 1.0, 2.0], dim: 1, values: vec![0.0, 0.0, 0.5] };
        assert_eq!(legendre_sup(&p, 1.0).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn rho_basic_invariants() {
        let s: Vec<f64> = (0..=16).map(|i| i as f64 * 0.25).collect();
        for seed in 0..20 {
            let r = sample_rho(&s, &RhoConfig::default(), &RngStream::new(seed)).unwrap();
            assert_eq!(r.rho[0], 0.0);
            for w in r.rho.windows(2) {
                assert!(w[1] >= w[0]);
            }
            let sq: Vec<f64> = r.rho.iter().map(|x| x * x).collect();
            for i in 1..sq.len() - 1 {
                let second = sq[i + 1] - 2.0 * sq[i] + sq[i - 1];
                assert!(second >= -1e-9 * sq[i + 1].max(1.0), "seed {seed} i {i} second {second}");
            }
        }
    }

    #[test]
    fn short_horizon_rejected() {
        let cfg = RhoConfig { horizon: Some(10.0), ..Default::default() };
        assert!(matches!(sample_rho(&[1.0], &cfg, &RngStream::new(1)), Err(Error::Configuration(_))));
    }

    #[test]
    fn deterministic() {
        let a = sample_rho(&[0.5, 1.0], &RhoConfig::default(), &RngStream::new(3)).unwrap();
        let b = sample_rho(&[0.5, 1.0], &RhoConfig::default(), &RngStream::new(3)).unwrap();
        assert_eq!(a, b);
    }
}
