//! Time grids and sampled Brownian / Bessel(3) paths.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Strictly increasing, finite sequence of times starting at 0.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Grid("empty grid".into()));
        }
        if points[0] != 0.0 {
            return Err(Error::Grid(format!("grid must start at 0, got {}", points[0])));
        }
        for w in points.windows(2) {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::Grid(format!(
                    "grid not strictly increasing/finite at {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(TimeGrid { points })
    }

    /// `n` equal steps on [0, horizon].
    pub fn uniform(horizon: f64, n: usize) -> Result<Self> {
        if !(horizon > 0.0) || n == 0 {
            return Err(Error::Grid(format!("uniform grid needs horizon > 0 and n > 0 (horizon {horizon}, n {n})")));
        }
        let pts = (0..=n).map(|i| horizon * i as f64 / n as f64).collect();
        TimeGrid::new(pts)
    }

    /// 0 followed by a geometric sequence from `first` to `horizon` with
    /// `per_decade` points per factor of ten.
    pub fn geometric(first: f64, horizon: f64, per_decade: usize) -> Result<Self> {
        if !(first > 0.0) || !(horizon > first) || per_decade == 0 {
            return Err(Error::Grid(format!(
                "geometric grid needs 0 < first < horizon (first {first}, horizon {horizon})"
            )));
        }
        let decades = (horizon / first).log10();
        let n = (decades * per_decade as f64).ceil().max(1.0) as usize;
        let mut pts = Vec::with_capacity(n + 2);
        pts.push(0.0);
        for i in 0..n {
            pts.push(first * (horizon / first).powf(i as f64 / n as f64));
        }
        pts.push(horizon);
        TimeGrid::new(pts)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.points.last().unwrap()
    }

    /// Grid scaled by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        TimeGrid::new(self.points.iter().map(|t| t * factor).collect())
    }
}

/// Values of a `dim`-dimensional path on a time grid, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PathGrid {
    pub times: Vec<f64>,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl PathGrid {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn at(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// First coordinate at every grid point.
    pub fn scalar(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.values[i * self.dim]).collect()
    }

    /// Euclidean norm at every grid point.
    pub fn norms(&self) -> Vec<f64> {
        (0..self.len()).map(|i| norm(self.at(i))).collect()
    }

    /// Linear interpolation of coordinate `k` at time `t` (clamped to the grid).
    pub fn interpolate(&self, k: usize, t: f64) -> f64 {
        let i = self.times.partition_point(|&s| s <= t);
        if i == 0 {
            return self.values[k];
        }
        if i == self.len() {
            return self.values[(self.len() - 1) * self.dim + k];
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let (v0, v1) = (self.values[(i - 1) * self.dim + k], self.values[i * self.dim + k]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    /// Treating the path as a Brownian motion, insert the given times using exact
    /// bridge sampling (and free increments past the last point). Existing points
    /// are kept unchanged; duplicates are ignored.
    pub fn refine_brownian<R: Rng>(&self, new_times: &[f64], rng: &mut R) -> PathGrid {
        let mut extra: Vec<f64> = new_times
            .iter()
            .copied()
            .filter(|t| t.is_finite() && *t > self.times[0] && self.times.binary_search_by(|s| s.total_cmp(t)).is_err())
            .collect();
        extra.sort_by(f64::total_cmp);
        extra.dedup();

        let d = self.dim;
        let mut times: Vec<f64> = Vec::with_capacity(self.len() + extra.len());
        let mut values = Vec::with_capacity((self.len() + extra.len()) * d);
        let mut j = 0;
        for i in 0..self.len() {
            if i > 0 {
                // Bridge from the last emitted point to grid point i.
                let t1 = self.times[i];
                let x1 = self.at(i);
                while j < extra.len() && extra[j] < t1 {
                    let t = extra[j];
                    let t0: f64 = *times.last().unwrap();
                    let base = values.len() - d;
                    let sd = ((t - t0) * (t1 - t) / (t1 - t0)).sqrt();
                    let w = (t - t0) / (t1 - t0);
                    for k in 0..d {
                        let x0 = values[base + k];
                        let z: f64 = rng.sample(StandardNormal);
                        values.push(x0 + w * (x1[k] - x0) + sd * z);
                    }
                    times.push(t);
                    j += 1;
                }
            }
            times.push(self.times[i]);
            values.extend_from_slice(self.at(i));
        }
        while j < extra.len() {
            let t = extra[j];
            let t0: f64 = *times.last().unwrap();
            let base = values.len() - d;
            let sd = (t - t0).sqrt();
            for k in 0..d {
                let z: f64 = rng.sample(StandardNormal);
                values.push(values[base + k] + sd * z);
            }
            times.push(t);
            j += 1;
        }
        PathGrid { times, dim: d, values }
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Standard `dim`-dimensional Brownian motion from the origin, sampled on `grid`.
pub fn sample_brownian_path(dim: usize, grid: &TimeGrid, rng: &RngStream) -> Result<PathGrid> {
    if dim == 0 {
        return Err(Error::Parameter("dim must be at least 1".into()));
    }
    let mut g = rng.generator();
    Ok(brownian_with(dim, grid, &mut g))
}

pub(crate) fn brownian_with<R: Rng>(dim: usize, grid: &TimeGrid, rng: &mut R) -> PathGrid {
    let pts = grid.points();
    let mut values = vec![0.0; pts.len() * dim];
    for i in 1..pts.len() {
        let sd = (pts[i] - pts[i - 1]).sqrt();
        for k in 0..dim {
            let z: f64 = rng.sample(StandardNormal);
            values[i * dim + k] = values[(i - 1) * dim + k] + sd * z;
        }
    }
    PathGrid { times: pts.to_vec(), dim, values }
}

/// Bessel(3) process from 0 on `grid`: the norm of a 3-d Brownian motion.
pub fn sample_bessel3_path(grid: &TimeGrid, rng: &RngStream) -> Result<PathGrid> {
    let bm = sample_brownian_path(3, grid, rng)?;
    Ok(PathGrid { times: bm.times.clone(), dim: 1, values: bm.norms() })
}

/// Last time the scalar path sits in `[0, c]`, given the sampled values; 0 if never.
pub fn last_exit_time(times: &[f64], values: &[f64], c: f64) -> f64 {
    for i in (0..values.len()).rev() {
        if values[i] >= 0.0 && values[i] <= c {
            return times[i];
        }
    }
    0.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(vec![]).is_err());
        assert!(TimeGrid::new(vec![0.0, 1.0, 1.0]).is_err());
        assert!(TimeGrid::new(vec![0.5, 1.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, f64::NAN]).is_err());
        let g = TimeGrid::geometric(1e-3, 10.0, 8).unwrap();
        assert_eq!(g.points()[0], 0.0);
        assert_eq!(g.horizon(), 10.0);
    }

    #[test]
    fn brownian_increment_variance() {
        let grid = TimeGrid::uniform(10.0, 1000).unwrap();
        let p = sample_brownian_path(2, &grid, &RngStream::new(11)).unwrap();
        let dt = 0.01;
        let incs: Vec<f64> = (1..p.len())
            .flat_map(|i| (0..2).map(move |k| (i, k)))
            .map(|(i, k)| p.at(i)[k] - p.at(i - 1)[k])
            .collect();
        let n = incs.len() as f64;
        let var = incs.iter().map(|x| x * x).sum::<f64>() / n;
        // Var of the sample second moment is 2 dt^2 / n.
        let se = (2.0f64).sqrt() * dt / n.sqrt();
        assert!((var - dt).abs() < 3.0 * se, "var {var}");
    }

    #[test]
    fn bessel_second_moment() {
        let grid = TimeGrid::uniform(2.0, 4).unwrap();
        let n = 4000;
        let root = RngStream::new(5);
        let vals: Vec<f64> = (0..n)
            .map(|i| {
                let p = sample_bessel3_path(&grid, &root.derive(i)).unwrap();
                p.values[4].powi(2)
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        // R_2^2 / 2 is chi-square(3): variance of R_2^2 is 4 * 6 = 24.
        let se = (24.0 / n as f64).sqrt();
        assert!((mean - 6.0).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn refine_keeps_existing_points() {
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let p = sample_brownian_path(3, &grid, &RngStream::new(1)).unwrap();
        let mut g = RngStream::new(2).generator();
        let q = p.refine_brownian(&[0.1, 0.5, 0.6, 1.5], &mut g);
        assert_eq!(q.len(), p.len() + 3);
        for i in 0..p.len() {
            let j = q.times.iter().position(|&t| t == p.times[i]).unwrap();
            assert_eq!(q.at(j), p.at(i));
        }
        assert_eq!(*q.times.last().unwrap(), 1.5);
    }

    #[test]
    fn bridge_midpoint_law() {
        // Midpoint of a bridge pinned at 0 and 0 over [0,1] has variance 1/4.
        let p = PathGrid { times: vec![0.0, 1.0], dim: 1, values: vec![0.0, 0.0] };
        let mut g = RngStream::new(9).generator();
        let n = 20000;
        let s: f64 = (0..n).map(|_| p.refine_brownian(&[0.5], &mut g).values[1].powi(2)).sum();
        let var = s / n as f64;
        let se = (2.0f64).sqrt() * 0.25 / (n as f64).sqrt();
        assert!((var - 0.25).abs() < 3.0 * se, "var {var}");
    }

    #[test]
    fn last_exit() {
        let t = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(last_exit_time(&t, &[0.0, 0.5, 2.0, 3.0], 1.0), 1.0);
        assert_eq!(last_exit_time(&t, &[0.0, 0.5, 2.0, 0.9], 1.0), 3.0);
    }
}
