//! The limiting extremal cluster: spine, branching times, conditioned clouds,
//! and the derived `X_L` process and simplified front.

mod branching;
mod cloud;
mod gr;
mod spine;

pub use branching::{sample_branching_times, BranchingTimes, IntensityMode};
pub use cloud::{sample_conditioned_cloud, sample_unconditioned_cloud, CloudExtent, CloudRequest, CloudSample};
pub use gr::{build_gr_table, GrConfig, GrTable, LOG_CORRECTION};
pub use spine::{sample_spine, SpineMode, SpinePath, TiltConfig};

use crate::error::{Error, Result};
use crate::front::{FrontParams, FrontSurface, PointCloud, Tag};
use crate::paths::{last_exit_time, TimeGrid};
use crate::rho::required_horizon;
use crate::rng::RngStream;

/// `{0}` together with every cloud in cluster coordinates.
pub fn assemble_cluster(spine: &SpinePath, times: &[f64], clouds: &[CloudSample]) -> Result<PointCloud> {
    if clouds.len() != times.len() {
        return Err(Error::Assembly(format!("{} clouds for {} branching times", clouds.len(), times.len())));
    }
    let mut out = PointCloud::new(spine.dim);
    out.push(&vec![0.0; spine.dim], Tag::Origin, None);
    for (i, (c, &t)) in clouds.iter().zip(times).enumerate() {
        if c.index != i || c.branch_time != t {
            return Err(Error::Assembly(format!(
                "cloud {} (time {}) does not match branching time {i} ({t})",
                c.index, c.branch_time
            )));
        }
        if c.points.dim != spine.dim {
            return Err(Error::Assembly(format!("cloud {i} has dimension {}", c.points.dim)));
        }
        let abs = c.absolute();
        for j in 0..abs.len() {
            out.push(abs.point(j), abs.tags[j], abs.times[j]);
        }
    }
    Ok(out)
}

/// Spine horizon needed so the last exit of `A_hat` from `[0, level]` is
/// inside the horizon with probability at least `1 - 1e-3`.
pub fn required_spine_horizon(spine: &SpinePath, level: f64) -> Result<f64> {
    match spine.mode {
        SpineMode::Approximate => Ok(required_horizon(level)),
        SpineMode::Tilted => {
            let b = spine.b.unwrap_or(0.0);
            let hit = spine.hit_time.ok_or(Error::Truncation { horizon: spine.horizon(), required: f64::INFINITY })?;
            Ok(hit + required_horizon(level + b))
        }
    }
}

/// `X_L(s) = sqrt(sup_sigma sigma (s - A_hat_{sigma L^2} / L))` with `sigma`
/// running over the spine grid divided by `L^2`.
pub fn compute_xl(spine: &SpinePath, l: f64, s_grid: &[f64]) -> Result<Vec<f64>> {
    if !(l > 0.0) {
        return Err(Error::Parameter(format!("L must be positive, got {l}")));
    }
    if s_grid.iter().any(|s| !(*s >= 0.0)) || s_grid.is_empty() {
        return Err(Error::Domain("s grid must be non-empty with s >= 0".into()));
    }
    let s_max = s_grid.iter().copied().fold(0.0, f64::max);
    let need = required_spine_horizon(spine, s_max * l)?;
    if spine.horizon() < need {
        return Err(Error::Truncation { horizon: spine.horizon(), required: need });
    }
    let l2 = l * l;
    Ok(s_grid
        .iter()
        .map(|&s| {
            let mut best: f64 = 0.0;
            for (t, ah) in spine.times.iter().zip(&spine.a_hat) {
                best = best.max(t / l2 * (s - ah / l));
            }
            best.sqrt()
        })
        .collect())
}

/// Last time `A_hat` is in `[0, c]` on the spine grid.
pub fn last_exit(spine: &SpinePath, c: f64) -> f64 {
    last_exit_time(&spine.times, &spine.a_hat, c)
}

/// Window `[L^1.4, tau_{TL}(A_hat)]` of the simplified front, `T = max s`.
pub fn simplified_window(spine: &SpinePath, l: f64, s_max: f64) -> (f64, f64) {
    (l.powf(1.4), last_exit(spine, s_max * l))
}

/// Simplified front `L^{-3/2} max_i Z_L^i(s, theta)` over clouds whose branch
/// time is in the window. `clouds[i]` belongs to `times[i]` and may be
/// `None` outside the window. Heights are `|Y(v)|` of cloud particles with
/// `X(v) + A_tau` in `(-sL, -sL + slab_width]` and `Y(v) + Y_tau` in the cone.
pub fn simplified_front(
    spine: &SpinePath,
    times: &[f64],
    clouds: &[Option<CloudSample>],
    l: f64,
    params: &FrontParams,
) -> Result<FrontSurface> {
    params.validate()?;
    if !(l > 0.0) {
        return Err(Error::Parameter(format!("L must be positive, got {l}")));
    }
    if params.thetas.dim != spine.dim {
        return Err(Error::Parameter("theta set dimension does not match the spine".into()));
    }
    if clouds.len() != times.len() {
        return Err(Error::Assembly("clouds and times differ in length".into()));
    }
    let s_max = params.s_grid.iter().copied().fold(0.0, f64::max);
    let (lo, hi) = simplified_window(spine, l, s_max);
    let nt = params.thetas.len();
    let thr = 1.0 - params.epsilon;
    let mut heights = vec![0.0f64; params.s_grid.len() * nt];
    let mut dir = vec![0.0; spine.dim - 1];
    for (i, &tau) in times.iter().enumerate() {
        if tau < lo || tau > hi {
            continue;
        }
        let c = clouds[i]
            .as_ref()
            .ok_or_else(|| Error::Assembly(format!("no cloud for branching time {i} ({tau}) inside the window")))?;
        for p in c.points.iter() {
            let u = p[0] + c.anchor_a;
            let h = crate::paths::norm(&p[1..]);
            if h == 0.0 {
                continue;
            }
            for (k, d) in dir.iter_mut().enumerate() {
                *d = p[k + 1] + c.anchor_y[k];
            }
            let dn = crate::paths::norm(&dir);
            if dn == 0.0 {
                continue;
            }
            for (js, &s) in params.s_grid.iter().enumerate() {
                if !(u > -s * l && u <= -s * l + params.slab_width) {
                    continue;
                }
                for (jt, theta) in params.thetas.directions.iter().enumerate() {
                    let dot: f64 = theta.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>() / dn;
                    let ok = match params.cone_mode {
                        crate::front::ConeMode::Signed => dot >= thr,
                        crate::front::ConeMode::Absolute => dot.abs() >= thr,
                    };
                    let cell = &mut heights[js * nt + jt];
                    if ok && h > *cell {
                        *cell = h;
                    }
                }
            }
        }
    }
    let scale = l.powf(-1.5);
    for v in heights.iter_mut() {
        *v *= scale;
    }
    Ok(FrontSurface { dim: spine.dim, s: params.s_grid.clone(), thetas: params.thetas.directions.clone(), heights })
}

/// Settings for sampling a whole limiting cluster.
#[derive(Clone, Debug)]
pub struct ClusterConfig {
    pub dim: usize,
    /// Branching times are drawn on `[0, horizon]`.
    pub horizon: f64,
    pub grid_steps: usize,
    pub spine_mode: SpineMode,
    pub intensity_mode: IntensityMode,
    pub extent: CloudExtent,
    pub budget: u64,
    pub particle_cap: usize,
    pub tilt: TiltConfig,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            dim: 2,
            horizon: 6.0,
            grid_steps: 600,
            spine_mode: SpineMode::Approximate,
            intensity_mode: IntensityMode::Rate2,
            extent: CloudExtent::Full,
            budget: 10_000,
            particle_cap: crate::bbm::DEFAULT_PARTICLE_CAP,
            tilt: TiltConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LimitCluster {
    pub spine: SpinePath,
    pub times: Vec<f64>,
    pub clouds: Vec<CloudSample>,
    pub cloud: PointCloud,
}

/// Spine on `rng.derive(0)`, branching times on `derive(1)`, spine refinement
/// at the branching times on `derive(2)`, cloud `i` on `derive(3).derive(i)`.
pub fn sample_limit_cluster(cfg: &ClusterConfig, gr: Option<&GrTable>, rng: &RngStream) -> Result<LimitCluster> {
    if cfg.dim < 2 {
        return Err(Error::Parameter(format!("cluster needs dim >= 2, got {}", cfg.dim)));
    }
    if !(cfg.horizon > 0.0) {
        return Err(Error::Parameter(format!("cluster horizon must be positive, got {}", cfg.horizon)));
    }
    let grid = TimeGrid::uniform(cfg.horizon, cfg.grid_steps.max(1))?;
    let spine = sample_spine(cfg.spine_mode, cfg.dim, &grid, &rng.derive(0), gr, &cfg.tilt)?;
    let times = sample_branching_times(&spine, cfg.horizon, &rng.derive(1), cfg.intensity_mode, gr)?.times;
    let spine = spine.refined_at(&times, &rng.derive(2));
    let mut clouds = Vec::with_capacity(times.len());
    for (i, &tau) in times.iter().enumerate() {
        let k = spine.index_of(tau).expect("refined spine contains branching times");
        let req = CloudRequest {
            index: i,
            tau,
            anchor_a: spine.a[k],
            anchor_y: spine.y.at(k),
            dim: cfg.dim,
            extent: cfg.extent,
            particle_cap: cfg.particle_cap,
        };
        clouds.push(sample_conditioned_cloud(&req, &rng.derive(3).derive(i as u64), cfg.budget)?);
    }
    let cloud = assemble_cluster(&spine, &times, &clouds)?;
    Ok(LimitCluster { spine, times, clouds, cloud })
}

/// Result of one simplified-front replica.
#[derive(Clone, Debug)]
pub struct SimplifiedRun {
    pub xl: Vec<f64>,
    pub front: FrontSurface,
    pub window: (f64, f64),
    pub clouds_used: usize,
    pub miss_bound: f64,
}

impl SimplifiedRun {
    /// `sup_{s, theta} |8^{-1/4} h(s, theta) - X_L(s)|`.
    pub fn coupling_gap(&self) -> f64 {
        let c = 8f64.powf(-0.25);
        let nt = self.front.thetas.len();
        let mut gap: f64 = 0.0;
        for (i, x) in self.xl.iter().enumerate() {
            for j in 0..nt {
                gap = gap.max((c * self.front.height(i, j) - x).abs());
            }
        }
        gap
    }
}

/// One approximate-mode replica of `X_L` and the simplified front, with
/// unconditioned window-pruned clouds for every branching time in the window.
/// Streams: spine `derive(0)`, times `derive(1)`, refinement `derive(2)`,
/// clouds `derive(3).derive(i)`.
pub fn simplified_front_run(
    l: f64,
    params: &FrontParams,
    per_decade: usize,
    particle_cap: usize,
    rng: &RngStream,
) -> Result<SimplifiedRun> {
    params.validate()?;
    let dim = params.thetas.dim;
    let s_max = params.s_grid.iter().copied().fold(0.0, f64::max);
    let horizon = required_horizon((s_max * l).max(1.0));
    let grid = TimeGrid::geometric(1e-3, horizon, per_decade)?;
    let spine = sample_spine(SpineMode::Approximate, dim, &grid, &rng.derive(0), None, &TiltConfig::default())?;
    let xl = compute_xl(&spine, l, &params.s_grid)?;
    let (lo, hi) = simplified_window(&spine, l, s_max);
    let times = sample_branching_times(&spine, hi.min(horizon), &rng.derive(1), IntensityMode::Rate2, None)?.times;
    let spine = spine.refined_at(&times, &rng.derive(2));
    let mut clouds = Vec::with_capacity(times.len());
    let mut used = 0;
    let mut miss = 0.0;
    for (i, &tau) in times.iter().enumerate() {
        if tau < lo || tau > hi {
            clouds.push(None);
            continue;
        }
        let k = spine.index_of(tau).expect("refined spine contains branching times");
        let req = CloudRequest {
            index: i,
            tau,
            anchor_a: spine.a[k],
            anchor_y: spine.y.at(k),
            dim,
            extent: CloudExtent::Window { depth: s_max * l },
            particle_cap,
        };
        let c = sample_unconditioned_cloud(&req, &rng.derive(3).derive(i as u64))?;
        miss += c.miss_bound;
        used += 1;
        clouds.push(Some(c));
    }
    let front = simplified_front(&spine, &times, &clouds, l, params)?;
    Ok(SimplifiedRun { xl, front, window: (lo, hi), clouds_used: used, miss_bound: miss })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::front::ThetaSet;

    fn spine(h: f64, seed: u64) -> SpinePath {
        let grid = TimeGrid::uniform(h, 200).unwrap();
        sample_spine(SpineMode::Approximate, 2, &grid, &RngStream::new(seed), None, &TiltConfig::default()).unwrap()
    }

    #[test]
    fn assemble_counts_and_signs() {
        let cfg = ClusterConfig { horizon: 3.0, grid_steps: 60, ..Default::default() };
        let lc = sample_limit_cluster(&cfg, None, &RngStream::new(5)).unwrap();
        let expected = 1 + lc.clouds.iter().map(|c| c.points.len()).sum::<usize>();
        assert_eq!(lc.cloud.len(), expected);
        assert_eq!(lc.cloud.tags[0], Tag::Origin);
        for i in 1..lc.cloud.len() {
            assert!(lc.cloud.point(i)[0] < 0.0);
        }
    }

    #[test]
    fn assemble_empty_and_mismatch() {
        let s = spine(1.0, 1);
        let c = assemble_cluster(&s, &[], &[]).unwrap();
        assert_eq!(c.len(), 1);
        assert!(matches!(assemble_cluster(&s, &[0.5], &[]), Err(Error::Assembly(_))));
    }

    #[test]
    fn xl_properties() {
        let l = 2.0;
        let h = required_horizon(2.0 * l) * 1.01;
        let grid = TimeGrid::geometric(1e-3, h, 48).unwrap();
        let s_grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.1).collect();
        for seed in 0..10 {
            let sp = sample_spine(SpineMode::Approximate, 2, &grid, &RngStream::new(seed), None, &TiltConfig::default()).unwrap();
            let x = compute_xl(&sp, l, &s_grid).unwrap();
            assert_eq!(x[0], 0.0);
            for w in x.windows(2) {
                assert!(w[1] >= w[0]);
            }
            let sq: Vec<f64> = x.iter().map(|v| v * v).collect();
            for i in 1..sq.len() - 1 {
                assert!(sq[i + 1] - 2.0 * sq[i] + sq[i - 1] >= -1e-9);
            }
        }
        let short = spine(10.0, 1);
        assert!(matches!(compute_xl(&short, l, &s_grid), Err(Error::Truncation { .. })));
    }

    #[test]
    fn simplified_front_empty_window_is_zero() {
        let s = spine(5.0, 2);
        let p = FrontParams::new(vec![0.0, 0.5, 1.0], ThetaSet::grid(2, 1).unwrap(), 0.2);
        // L = 10: window starts at 10^1.4 > horizon.
        let f = simplified_front(&s, &[], &[], 10.0, &p).unwrap();
        assert!(f.heights.iter().all(|h| *h == 0.0));
    }

    #[test]
    fn simplified_run_small_l() {
        let p = FrontParams::new(vec![0.25, 0.5, 0.75, 1.0], ThetaSet::grid(2, 1).unwrap(), 0.2);
        let run = simplified_front_run(2.0, &p, 24, 1 << 21, &RngStream::new(3)).unwrap();
        assert!(run.front.heights.iter().all(|h| h.is_finite() && *h >= 0.0));
        assert!(run.coupling_gap().is_finite());
        assert_eq!(run.xl.len(), 4);
    }
}
