//! BBM point clouds emitted at the branching times.

use crate::bbm::{simulate_leaves, simulate_pruned_cloud, DEFAULT_PRUNE_DELTA};
use crate::error::{Error, Result};
use crate::front::{PointCloud, Tag};
use crate::rng::RngStream;

/// Which part of a cloud to keep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CloudExtent {
    /// Every particle (exact simulation, bounded by the particle cap).
    Full,
    /// Only particles whose cluster first coordinate `A_tau + X` is at least
    /// `-depth`; branches that cannot reach that level are pruned.
    Window { depth: f64 },
}

#[derive(Clone, Debug)]
pub struct CloudSample {
    pub index: usize,
    pub branch_time: f64,
    /// Spine position `(A_tau, Y_tau)` the cloud is attached to.
    pub anchor_a: f64,
    pub anchor_y: Vec<f64>,
    /// Cloud positions `(X, Y)` relative to the anchor.
    pub points: PointCloud,
    /// Attempts used by the rejection sampler (1 for unconditioned clouds).
    pub attempts: u64,
    /// Probability bound for a lost relevant particle (pruned clouds), else 0.
    pub miss_bound: f64,
    pub extent: CloudExtent,
}

impl CloudSample {
    /// Points in cluster coordinates `(A_tau + X, Y_tau + Y)`.
    pub fn absolute(&self) -> PointCloud {
        let d = self.points.dim;
        let mut out = PointCloud::new(d);
        let mut p = vec![0.0; d];
        for q in self.points.iter() {
            p[0] = q[0] + self.anchor_a;
            for k in 1..d {
                p[k] = q[k] + self.anchor_y[k - 1];
            }
            out.push(&p, Tag::Cloud(self.index), Some(self.branch_time));
        }
        out
    }

    /// Largest first coordinate in cluster coordinates (`-inf` if empty).
    pub fn max_first(&self) -> f64 {
        self.points.iter().map(|p| p[0] + self.anchor_a).fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct CloudRequest<'a> {
    pub index: usize,
    pub tau: f64,
    pub anchor_a: f64,
    pub anchor_y: &'a [f64],
    pub dim: usize,
    pub extent: CloudExtent,
    pub particle_cap: usize,
}

fn draw(req: &CloudRequest<'_>, rng: &RngStream) -> Result<(PointCloud, f64)> {
    let d = req.dim;
    let mut cloud = PointCloud::new(d);
    let (flat, miss) = match req.extent {
        CloudExtent::Full => (simulate_leaves(d, req.tau, rng, req.particle_cap)?, 0.0),
        CloudExtent::Window { depth } => {
            if !(depth >= 0.0) {
                return Err(Error::Parameter(format!("window depth must be >= 0, got {depth}")));
            }
            let x_lo = -req.anchor_a - depth;
            let p = simulate_pruned_cloud(d, req.tau, x_lo, DEFAULT_PRUNE_DELTA, rng, req.particle_cap)?;
            (p.positions, p.miss_bound)
        }
    };
    for x in flat.chunks_exact(d) {
        cloud.push(x, Tag::Cloud(req.index), Some(req.tau));
    }
    Ok((cloud, miss))
}

fn check(req: &CloudRequest<'_>) -> Result<()> {
    if req.dim == 0 || req.anchor_y.len() + 1 != req.dim {
        return Err(Error::Parameter("cloud anchor dimension mismatch".into()));
    }
    if !(req.tau >= 0.0) {
        return Err(Error::Parameter(format!("branch time must be >= 0, got {}", req.tau)));
    }
    Ok(())
}

/// Cloud conditioned on `max_v (A_tau + X(v)) < 0`, by rejection. Attempt `k`
/// uses `rng.derive(k)`.
pub fn sample_conditioned_cloud(req: &CloudRequest<'_>, rng: &RngStream, budget: u64) -> Result<CloudSample> {
    check(req)?;
    for k in 0..budget {
        let (pts, miss) = draw(req, &rng.derive(k))?;
        let accept = pts.iter().all(|p| p[0] + req.anchor_a < 0.0);
        if accept {
            return Ok(CloudSample {
                index: req.index,
                branch_time: req.tau,
                anchor_a: req.anchor_a,
                anchor_y: req.anchor_y.to_vec(),
                points: pts,
                attempts: k + 1,
                miss_bound: miss,
                extent: req.extent,
            });
        }
    }
    Err(Error::Budget { attempts: budget, accepted: 0 })
}

/// Plain BBM cloud attached to the spine (no conditioning).
pub fn sample_unconditioned_cloud(req: &CloudRequest<'_>, rng: &RngStream) -> Result<CloudSample> {
    check(req)?;
    let (pts, miss) = draw(req, rng)?;
    Ok(CloudSample {
        index: req.index,
        branch_time: req.tau,
        anchor_a: req.anchor_a,
        anchor_y: req.anchor_y.to_vec(),
        points: pts,
        attempts: 1,
        miss_bound: miss,
        extent: req.extent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(tau: f64, a: f64, extent: CloudExtent) -> CloudRequest<'static> {
        CloudRequest { index: 0, tau, anchor_a: a, anchor_y: &[0.5], dim: 2, extent, particle_cap: 1 << 20 }
    }

    #[test]
    fn accepted_clouds_are_below_zero() {
        let root = RngStream::new(3);
        for i in 0..50 {
            let r = req(3.0, -5.0, CloudExtent::Full);
            let c = sample_conditioned_cloud(&r, &root.derive(i), 1000).unwrap();
            assert!(c.max_first() < 0.0);
            assert!(c.attempts >= 1);
            let abs = c.absolute();
            assert_eq!(abs.len(), c.points.len());
            assert_eq!(abs.point(0)[1], c.points.point(0)[1] + 0.5);
        }
    }

    #[test]
    fn budget_exhaustion() {
        // Anchored far above zero: every cloud violates the event.
        let r = req(1.0, 50.0, CloudExtent::Full);
        assert!(matches!(sample_conditioned_cloud(&r, &RngStream::new(1), 5), Err(Error::Budget { attempts: 5, .. })));
    }

    #[test]
    fn window_is_filtered_full_cloud_when_nothing_pruned() {
        // Shallow horizon, deep window: the pruning rule never fires and the
        // window cloud equals the filtered full cloud draw for draw.
        let s = RngStream::new(11);
        let full = sample_unconditioned_cloud(&req(2.0, -2.0, CloudExtent::Full), &s).unwrap();
        let win = sample_unconditioned_cloud(&req(2.0, -2.0, CloudExtent::Window { depth: 30.0 }), &s).unwrap();
        let kept: Vec<&[f64]> = full.points.iter().filter(|p| p[0] - 2.0 >= -30.0).collect();
        assert_eq!(kept.len(), win.points.len());
        assert!(win.miss_bound == 0.0);
    }
}
