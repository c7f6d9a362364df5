//! Tabulated exceedance probabilities `G_r(x) = P(M_r >= sqrt2 r - x / sqrt2)`
//! for the maximum `M_r` of a one-dimensional BBM.

use std::path::Path;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::stats::isotonic_increasing;

const SQRT2: f64 = std::f64::consts::SQRT_2;
/// `3 / (2 sqrt2)`.
pub const LOG_CORRECTION: f64 = 1.060_660_171_779_821_2;

#[derive(Clone, Debug, PartialEq)]
pub struct GrConfig {
    pub r_grid: Vec<f64>,
    pub x_grid: Vec<f64>,
    pub replicas: usize,
    /// Rows with `r` above this use the tail bound instead of simulation.
    pub sim_r_max: f64,
    pub particle_cap: usize,
}

impl Default for GrConfig {
    fn default() -> Self {
        GrConfig {
            r_grid: (0..=16).map(|i| i as f64 * 0.5).collect(),
            x_grid: (-40..=40).map(|i| i as f64 * 0.25).collect(),
            replicas: 4000,
            sim_r_max: 8.0,
            particle_cap: crate::bbm::DEFAULT_PARTICLE_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrTable {
    pub r: Vec<f64>,
    pub x: Vec<f64>,
    /// Row-major in `r`.
    pub values: Vec<f64>,
    /// NaN for rows filled from the bound.
    pub stderr: Vec<f64>,
    pub replicas: usize,
    pub sim_r_max: f64,
    /// Constant of the tail bound `min(1, C max(z,1) e^{-sqrt2 z})`.
    pub bound_c: f64,
}

/// `z` such that the level `sqrt2 r - x/sqrt2` equals `m_r + z`.
fn tail_z(r: f64, x: f64) -> f64 {
    LOG_CORRECTION * r.max(1.0).ln() - x / SQRT2
}

fn tail_shape(z: f64) -> f64 {
    z.max(1.0) * (-SQRT2 * z).exp()
}

/// Running maxima of a 1-d BBM at each of the sorted `times` (alive particles only).
fn running_maxima<R: Rng>(times: &[f64], g: &mut R, cap: usize) -> Result<Vec<f64>> {
    let horizon = *times.last().unwrap();
    let mut out = vec![f64::NEG_INFINITY; times.len()];
    let mut stack = vec![(0.0f64, 0.0f64)];
    let mut count = 0usize;
    while let Some((t, x)) = stack.pop() {
        count += 1;
        if count > cap {
            return Err(Error::Capacity { cap, time: t });
        }
        let life: f64 = g.sample(Exp1);
        let end = (t + life).min(horizon);
        let mut cur_t = t;
        let mut cur_x = x;
        // Grid times in [t, end); the horizon itself when this is a leaf.
        let mut k = times.partition_point(|&s| s < t);
        while k < times.len() && (times[k] < end || (times[k] == horizon && t + life >= horizon)) {
            let dt = times[k] - cur_t;
            if dt > 0.0 {
                let z: f64 = g.sample(StandardNormal);
                cur_x += dt.sqrt() * z;
                cur_t = times[k];
            }
            out[k] = out[k].max(cur_x);
            k += 1;
        }
        if t + life < horizon {
            let z: f64 = g.sample(StandardNormal);
            cur_x += (end - cur_t).sqrt() * z;
            stack.push((end, cur_x));
            stack.push((end, cur_x));
        }
    }
    Ok(out)
}

pub fn build_gr_table(cfg: &GrConfig, rng: &RngStream) -> Result<GrTable> {
    if cfg.r_grid.is_empty() || cfg.x_grid.is_empty() {
        return Err(Error::Grid("GrTable needs non-empty r and x grids".into()));
    }
    for g in [&cfg.r_grid, &cfg.x_grid] {
        if g.windows(2).any(|w| !(w[1] > w[0])) || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Grid("GrTable grids must be strictly increasing and finite".into()));
        }
    }
    if cfg.r_grid[0] < 0.0 {
        return Err(Error::Grid("r grid must be non-negative".into()));
    }
    if cfg.replicas == 0 {
        return Err(Error::Parameter("replicas must be positive".into()));
    }
    let sim_r: Vec<f64> = cfg.r_grid.iter().copied().filter(|&r| r <= cfg.sim_r_max && r > 0.0).collect();
    let maxima: Vec<Vec<f64>> = if sim_r.is_empty() {
        Vec::new()
    } else {
        (0..cfg.replicas)
            .into_par_iter()
            .map(|i| running_maxima(&sim_r, &mut rng.derive(i as u64).generator(), cfg.particle_cap))
            .collect::<Result<_>>()?
    };

    let (nr, nx) = (cfg.r_grid.len(), cfg.x_grid.len());
    let mut values = vec![0.0; nr * nx];
    let mut stderr = vec![f64::NAN; nr * nx];
    let n = cfg.replicas as f64;
    let mut bound_c: f64 = 0.0;
    for (i, &r) in cfg.r_grid.iter().enumerate() {
        if r == 0.0 {
            for (j, &x) in cfg.x_grid.iter().enumerate() {
                values[i * nx + j] = if x >= 0.0 { 1.0 } else { 0.0 };
                stderr[i * nx + j] = 0.0;
            }
            continue;
        }
        let Some(k) = sim_r.iter().position(|&s| s == r) else { continue };
        let mut col: Vec<f64> = maxima.iter().map(|m| m[k]).collect();
        col.sort_by(f64::total_cmp);
        for (j, &x) in cfg.x_grid.iter().enumerate() {
            let level = SQRT2 * r - x / SQRT2;
            let hits = col.len() - col.partition_point(|&m| m < level);
            let p = hits as f64 / n;
            values[i * nx + j] = p;
            stderr[i * nx + j] = (p * (1.0 - p) / n).sqrt();
            let z = tail_z(r, x);
            if r >= 2.0 && z >= 1.0 && hits >= 20 {
                bound_c = bound_c.max(p / tail_shape(z));
            }
        }
    }
    if bound_c == 0.0 {
        bound_c = 1.0;
    }
    let mut table = GrTable {
        r: cfg.r_grid.clone(),
        x: cfg.x_grid.clone(),
        values,
        stderr,
        replicas: cfg.replicas,
        sim_r_max: cfg.sim_r_max,
        bound_c,
    };
    for (i, &r) in cfg.r_grid.iter().enumerate() {
        if r > cfg.sim_r_max {
            for (j, &x) in cfg.x_grid.iter().enumerate() {
                table.values[i * nx + j] = table.bound(r, x);
            }
        }
    }
    table.make_monotone();
    Ok(table)
}

impl GrTable {
    /// Tail bound used beyond the simulated range.
    pub fn bound(&self, r: f64, x: f64) -> f64 {
        (self.bound_c * tail_shape(tail_z(r, x))).min(1.0)
    }

    fn make_monotone(&mut self) {
        let nx = self.x.len();
        for i in 0..self.r.len() {
            let row = &self.values[i * nx..(i + 1) * nx];
            let w: Vec<f64> = self.stderr[i * nx..(i + 1) * nx]
                .iter()
                .map(|s| if s.is_finite() && *s > 0.0 { 1.0 / (s * s) } else { 1e12 })
                .collect();
            let fixed = isotonic_increasing(row, &w);
            self.values[i * nx..(i + 1) * nx].copy_from_slice(&fixed);
        }
    }

    fn row_value(&self, i: usize, x: f64) -> f64 {
        let nx = self.x.len();
        let row = &self.values[i * nx..(i + 1) * nx];
        // Off the grid: a single lineage bounds from below, the expected count from above.
        let r = self.r[i];
        let lineage = || {
            if r <= 0.0 {
                return if x >= 0.0 { 1.0 } else { 0.0 };
            }
            0.5 * erfc((SQRT2 * r - x / SQRT2) / (SQRT2 * r.sqrt()))
        };
        if x <= self.x[0] {
            let first_moment = (r.exp() * lineage()).min(1.0);
            return row[0].min(self.bound(r.max(1.0), x)).min(first_moment);
        }
        if x >= self.x[nx - 1] {
            return row[nx - 1].max(lineage());
        }
        let j = self.x.partition_point(|&v| v <= x);
        let w = (x - self.x[j - 1]) / (self.x[j] - self.x[j - 1]);
        row[j - 1] + w * (row[j] - row[j - 1])
    }

    /// `G_r(x)` by bilinear interpolation inside the simulated block, the tail
    /// bound beyond it, and `1{x >= 0}` at `r = 0`.
    pub fn eval(&self, r: f64, x: f64) -> f64 {
        if r <= 0.0 {
            return if x >= 0.0 { 1.0 } else { 0.0 };
        }
        let last_sim = self.r.iter().rposition(|&v| v <= self.sim_r_max).unwrap_or(0);
        if r > self.r[last_sim] {
            return self.bound(r, x);
        }
        let i = self.r.partition_point(|&v| v <= r);
        if i == 0 {
            return self.row_value(0, x);
        }
        if i == self.r.len() || self.r[i - 1] == r {
            return self.row_value(i - 1, x);
        }
        let w = (r - self.r[i - 1]) / (self.r[i] - self.r[i - 1]);
        (1.0 - w) * self.row_value(i - 1, x) + w * self.row_value(i, x)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["r", "x", "value", "stderr"])?;
        let nx = self.x.len();
        for (i, r) in self.r.iter().enumerate() {
            for (j, x) in self.x.iter().enumerate() {
                w.write_record([
                    r.to_string(),
                    x.to_string(),
                    self.values[i * nx + j].to_string(),
                    self.stderr[i * nx + j].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a table written by `write_csv`. Rows with NaN stderr are taken as
    /// bound rows; the bound constant is re-fitted from them.
    pub fn read_csv(path: &Path, replicas: usize) -> Result<GrTable> {
        let mut rd = csv::Reader::from_path(path)?;
        let mut rows: Vec<(f64, f64, f64, f64)> = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let f = |k: usize| -> Result<f64> {
                rec.get(k)
                    .ok_or_else(|| Error::Parameter("short GrTable row".into()))?
                    .parse::<f64>()
                    .map_err(|e| Error::Parameter(format!("bad GrTable value: {e}")))
            };
            rows.push((f(0)?, f(1)?, f(2)?, f(3)?));
        }
        let mut r: Vec<f64> = rows.iter().map(|t| t.0).collect();
        r.dedup();
        let nx = rows.len() / r.len().max(1);
        if nx * r.len() != rows.len() || nx == 0 {
            return Err(Error::Grid("GrTable CSV is not a full r by x grid".into()));
        }
        let x: Vec<f64> = rows[..nx].iter().map(|t| t.1).collect();
        let values = rows.iter().map(|t| t.2).collect();
        let stderr: Vec<f64> = rows.iter().map(|t| t.3).collect();
        let sim_r_max = r
            .iter()
            .enumerate()
            .filter(|(i, _)| stderr[i * nx].is_finite())
            .map(|(_, v)| *v)
            .fold(0.0, f64::max);
        let mut t = GrTable { r, x, values, stderr, replicas, sim_r_max, bound_c: 1.0 };
        // Recover C from a bound row if there is one.
        for (i, &rv) in t.r.iter().enumerate() {
            if rv > t.sim_r_max {
                for (j, &xv) in t.x.iter().enumerate() {
                    let v = t.values[i * nx + j];
                    if v > 0.0 && v < 1.0 {
                        t.bound_c = v / tail_shape(tail_z(rv, xv));
                        return Ok(t);
                    }
                }
            }
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GrTable {
        let cfg = GrConfig {
            r_grid: vec![0.0, 1.0, 2.0, 4.0, 20.0],
            x_grid: (-8..=8).map(|i| i as f64).collect(),
            replicas: 400,
            sim_r_max: 4.0,
            ..Default::default()
        };
        build_gr_table(&cfg, &RngStream::new(2)).unwrap()
    }

    #[test]
    fn values_in_unit_interval_and_monotone() {
        let t = small();
        let nx = t.x.len();
        for i in 0..t.r.len() {
            let row = &t.values[i * nx..(i + 1) * nx];
            assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
            for w in row.windows(2) {
                assert!(w[1] >= w[0]);
            }
        }
        assert!(t.stderr[4 * nx].is_nan());
    }

    #[test]
    fn r_one_matches_single_particle_tail_roughly() {
        // At r = 1 and x = 0, M_1 >= sqrt2. P(B_1 >= sqrt2) = 0.0786 is a lower bound.
        let t = small();
        assert!(t.eval(1.0, 0.0) >= 0.05);
        assert_eq!(t.eval(0.0, -1.0), 0.0);
        assert_eq!(t.eval(0.0, 0.0), 1.0);
    }

    #[test]
    fn csv_roundtrip() {
        let t = small();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("gr.csv");
        t.write_csv(&p).unwrap();
        let u = GrTable::read_csv(&p, t.replicas).unwrap();
        assert_eq!(u.r, t.r);
        assert_eq!(u.x, t.x);
        assert_eq!(u.values, t.values);
        assert!((u.bound_c - t.bound_c).abs() < 1e-9 * t.bound_c);
    }

    #[test]
    fn running_maxima_law_matches_leaf_simulation() {
        let root = RngStream::new(8);
        let a: Vec<f64> = (0..1500)
            .map(|i| running_maxima(&[0.7, 2.5], &mut root.derive(i).generator(), 1 << 20).unwrap()[1])
            .collect();
        let b: Vec<f64> = (0..1500)
            .map(|i| {
                let leaves = crate::bbm::simulate_leaves(1, 2.5, &root.derive(10_000 + i), 1 << 20).unwrap();
                leaves.into_iter().fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let ks = crate::stats::ks_two_sample(&a, &b).unwrap();
        assert!(!ks.rejects(0.01), "{ks:?}");
    }
}
