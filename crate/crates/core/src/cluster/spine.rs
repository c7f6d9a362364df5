//! The spine `(A, Y)` of the limiting cluster.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use super::gr::{GrTable, LOG_CORRECTION};
use crate::error::{Error, Result};
use crate::paths::{brownian_with, PathGrid, TimeGrid};
use crate::rng::RngStream;

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SpineMode {
    /// `A_s = -sqrt2 s - R_s` with `R` a Bessel(3) process.
    #[default]
    Approximate,
    /// Exact law: `Gamma^{(b)} - sqrt2 s` under the exponential tilt, by
    /// importance resampling.
    Tilted,
}

impl std::str::FromStr for SpineMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "approximate" => Ok(SpineMode::Approximate),
            "tilted" => Ok(SpineMode::Tilted),
            _ => Err(Error::Parameter(format!("spine mode must be approximate|tilted, got {s}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TiltConfig {
    /// Number of proposals per resampled spine.
    pub pool: usize,
    /// Mean of the exponential proposal for `b`.
    pub proposal_mean: f64,
}

impl Default for TiltConfig {
    fn default() -> Self {
        TiltConfig { pool: 64, proposal_mean: 2.0 }
    }
}

#[derive(Clone, Debug)]
pub struct SpinePath {
    pub mode: SpineMode,
    pub dim: usize,
    pub times: Vec<f64>,
    pub a: Vec<f64>,
    /// `-a - sqrt2 t`.
    pub a_hat: Vec<f64>,
    /// Transverse `(d-1)`-dimensional Brownian path.
    pub y: PathGrid,
    /// `sup_s (A_s + sqrt2 s)` (tilted mode).
    pub b: Option<f64>,
    /// `exp(-2 int_0^H G_r(sqrt2 Gamma_r) dr)`; 1 in approximate mode.
    pub weight: f64,
    /// Upper bound on the omitted part `2 int_H^inf G_r dr` of the tilt exponent.
    pub tail_bias: f64,
    /// Grid time at which the Brownian phase hit `b` (tilted mode).
    pub hit_time: Option<f64>,
    // Underlying 3-d motion whose norm is -a - sqrt2 t (approximate mode only).
    bessel: Option<PathGrid>,
}

impl SpinePath {
    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of an exact grid time.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times.binary_search_by(|s| s.total_cmp(&t)).ok()
    }

    /// `A_hat` at an arbitrary time by linear interpolation.
    pub fn a_hat_at(&self, t: f64) -> f64 {
        let i = self.times.partition_point(|&s| s <= t);
        if i == 0 {
            return self.a_hat[0];
        }
        if i == self.len() {
            return self.a_hat[i - 1];
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        self.a_hat[i - 1] + (self.a_hat[i] - self.a_hat[i - 1]) * (t - t0) / (t1 - t0)
    }

    /// Spine with extra grid times. In approximate mode the new points are
    /// exact conditional samples (Brownian bridges of the 3-d motion and of
    /// `Y`); in tilted mode `A` is interpolated linearly and `Y` bridged.
    pub fn refined_at(&self, extra: &[f64], rng: &RngStream) -> SpinePath {
        let mut g = rng.generator();
        let y = self.y.refine_brownian(extra, &mut g);
        let (a, bessel): (Vec<f64>, Option<PathGrid>) = match &self.bessel {
            Some(b3) => {
                let b3 = b3.refine_brownian(extra, &mut g);
                let a = b3.norms().iter().zip(&b3.times).map(|(r, t)| -SQRT2 * t - r).collect();
                (a, Some(b3))
            }
            None => {
                let p = PathGrid { times: self.times.clone(), dim: 1, values: self.a.clone() };
                (y.times.iter().map(|&t| p.interpolate(0, t)).collect(), None)
            }
        };
        let a_hat = hat(&a, &y.times);
        SpinePath { times: y.times.clone(), a, a_hat, y, bessel, ..self.clone() }
    }
}

fn hat(a: &[f64], t: &[f64]) -> Vec<f64> {
    a.iter().zip(t).map(|(a, t)| -a - SQRT2 * t).collect()
}

fn transverse(dim: usize, grid: &TimeGrid, rng: &RngStream) -> PathGrid {
    let mut g = rng.generator();
    if dim <= 1 {
        return PathGrid { times: grid.points().to_vec(), dim: 0, values: Vec::new() };
    }
    brownian_with(dim - 1, grid, &mut g)
}

/// Trapezoid integral of `G_r(sqrt2 gamma_r)` over the grid.
fn tilt_exponent(gr: &GrTable, times: &[f64], gamma: &[f64]) -> f64 {
    let f: Vec<f64> = times.iter().zip(gamma).map(|(t, x)| gr.eval(*t, SQRT2 * x)).collect();
    times.windows(2).zip(f.windows(2)).map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1])).sum()
}

/// Bound on `2 int_H^inf G_r(sqrt2 Gamma_r) dr` in expectation over the
/// Bessel tail, using `G_r(x) <= C max(z,1) e^{-sqrt2 z}`.
fn tail_bias_bound(gr: &GrTable, b: f64, h: f64) -> f64 {
    if h <= 1.0 {
        return f64::INFINITY;
    }
    // E[max(z,1) e^{-sqrt2 R_r}] <= r^{-3/2}(0.5642 (alpha log r + 1) + 1.197)
    // after pulling out e^{sqrt2 b} r^{-3/2}; integrate r^{-3}(...) from h.
    let alpha = LOG_CORRECTION;
    let integral = (0.5642 * (alpha * h.ln() + 1.0) + 1.197) / (2.0 * h * h) + 0.5642 * alpha / (4.0 * h * h);
    2.0 * gr.bound_c * (SQRT2 * b).exp() * integral
}

/// One proposal `Gamma^{(b)}` on the grid: Brownian until it reaches `b`
/// (crossings between grid points detected with the bridge probability),
/// then `b - R` for a fresh Bessel(3) `R`.
fn gamma_path<R: Rng>(b: f64, times: &[f64], g: &mut R) -> (Vec<f64>, Option<f64>) {
    let mut out = vec![0.0; times.len()];
    let mut hit: Option<usize> = None;
    let mut x = 0.0;
    for i in 1..times.len() {
        let dt = times[i] - times[i - 1];
        let z: f64 = g.sample(StandardNormal);
        let next = x + dt.sqrt() * z;
        let crossed = next >= b || {
            let p = (-2.0 * (b - x) * (b - next) / dt).exp();
            g.random::<f64>() < p
        };
        if crossed {
            hit = Some(i);
            out[i] = b;
            break;
        }
        x = next;
        out[i] = x;
    }
    if let Some(h) = hit {
        let mut c = [0.0f64; 3];
        for i in h + 1..times.len() {
            let sd = (times[i] - times[i - 1]).sqrt();
            for ck in c.iter_mut() {
                let z: f64 = g.sample(StandardNormal);
                *ck += sd * z;
            }
            out[i] = b - (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
        }
    }
    (out, hit.map(|i| times[i]))
}

pub fn sample_spine(
    mode: SpineMode,
    dim: usize,
    grid: &TimeGrid,
    rng: &RngStream,
    gr: Option<&GrTable>,
    tilt: &TiltConfig,
) -> Result<SpinePath> {
    if dim == 0 {
        return Err(Error::Parameter("dim must be at least 1".into()));
    }
    let times = grid.points().to_vec();
    let y = transverse(dim, grid, &rng.derive(1));
    match mode {
        SpineMode::Approximate => {
            let b3 = brownian_with(3, grid, &mut rng.derive(0).generator());
            let a: Vec<f64> = b3.norms().iter().zip(&times).map(|(r, t)| -SQRT2 * t - r).collect();
            let a_hat = hat(&a, &times);
            Ok(SpinePath {
                mode,
                dim,
                times,
                a,
                a_hat,
                y,
                b: None,
                weight: 1.0,
                tail_bias: 0.0,
                hit_time: None,
                bessel: Some(b3),
            })
        }
        SpineMode::Tilted => {
            let gr = gr.ok_or_else(|| Error::Configuration("tilted spine mode requires a GrTable".into()))?;
            if tilt.pool == 0 || !(tilt.proposal_mean > 0.0) {
                return Err(Error::Parameter("tilt pool must be positive with a positive proposal mean".into()));
            }
            let mu = tilt.proposal_mean;
            let mut cands = Vec::with_capacity(tilt.pool);
            let mut log_iw = Vec::with_capacity(tilt.pool);
            for k in 0..tilt.pool {
                let mut g = rng.derive_path(&[0, k as u64]).generator();
                let e: f64 = g.sample(Exp1);
                let b = mu * e;
                let (gamma, hit) = gamma_path(b, &times, &mut g);
                let expo = 2.0 * tilt_exponent(gr, &times, &gamma);
                // Target density is proportional to e^{-expo}; proposal is Exp(mean mu).
                log_iw.push(-expo + b / mu + mu.ln());
                cands.push((b, gamma, hit, expo));
            }
            let mx = log_iw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = log_iw.iter().map(|l| (l - mx).exp()).collect();
            let total: f64 = w.iter().sum();
            let u: f64 = rng.derive(2).generator().random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = tilt.pool - 1;
            for (k, wk) in w.iter().enumerate() {
                acc += wk;
                if u < acc {
                    pick = k;
                    break;
                }
            }
            let (b, gamma, hit, expo) = cands.swap_remove(pick);
            let a: Vec<f64> = gamma.iter().zip(&times).map(|(g, t)| g - SQRT2 * t).collect();
            let a_hat = hat(&a, &times);
            let h = *times.last().unwrap();
            Ok(SpinePath {
                mode,
                dim,
                times,
                a,
                a_hat,
                y,
                b: Some(b),
                weight: (-expo).exp(),
                tail_bias: tail_bias_bound(gr, b, h),
                hit_time: hit,
                bessel: None,
            })
        }
    }
}
