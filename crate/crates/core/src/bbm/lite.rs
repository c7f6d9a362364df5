//! Depth-first BBM samplers that keep no genealogy. Same law as
//! `simulate_bbm` at the horizon, far cheaper when only leaf positions matter.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Per-killed-branch bound on the expected number of retained leaves lost.
pub const DEFAULT_PRUNE_DELTA: f64 = 1e-9;

/// Runs the DFS and hands every leaf to `visit`. `keep(x1, t)` may stop a
/// branch that died at time `t` with first coordinate `x1`.
fn dfs<V, K>(dim: usize, horizon: f64, rng: &RngStream, cap: usize, mut visit: V, mut keep: K) -> Result<u64>
where
    V: FnMut(&[f64]),
    K: FnMut(f64, f64) -> bool,
{
    let mut g = rng.generator();
    let mut times = vec![0.0f64];
    let mut pos = vec![0.0f64; dim];
    let mut leaf = vec![0.0f64; dim];
    let mut count: u64 = 0;
    while let Some(t) = times.pop() {
        count += 1;
        if count as usize > cap {
            return Err(Error::Capacity { cap, time: t });
        }
        let base = pos.len() - dim;
        let life: f64 = g.sample(Exp1);
        if t + life >= horizon {
            let sd = (horizon - t).sqrt();
            for k in 0..dim {
                let z: f64 = g.sample(StandardNormal);
                leaf[k] = pos[base + k] + sd * z;
            }
            pos.truncate(base);
            visit(&leaf);
        } else {
            let death = t + life;
            let sd = life.sqrt();
            for k in 0..dim {
                let z: f64 = g.sample(StandardNormal);
                pos[base + k] += sd * z;
            }
            if keep(pos[base], death) {
                pos.extend_from_within(base..base + dim);
                times.push(death);
                times.push(death);
            } else {
                pos.truncate(base);
            }
        }
    }
    Ok(count)
}

/// Positions of all particles alive at `horizon`, row-major.
pub fn simulate_leaves(dim: usize, horizon: f64, rng: &RngStream, cap: usize) -> Result<Vec<f64>> {
    check(dim, horizon)?;
    let mut out = Vec::new();
    dfs(dim, horizon, rng, cap, |x| out.extend_from_slice(x), |_, _| true)?;
    Ok(out)
}

/// Maximal norm at `horizon` without storing anything.
pub fn sample_max_norm(dim: usize, horizon: f64, rng: &RngStream, cap: usize) -> Result<f64> {
    check(dim, horizon)?;
    let mut best = 0.0f64;
    dfs(
        dim,
        horizon,
        rng,
        cap,
        |x| {
            let n = x.iter().map(|v| v * v).sum::<f64>();
            if n > best {
                best = n;
            }
        },
        |_, _| true,
    )?;
    Ok(best.sqrt())
}

fn check(dim: usize, horizon: f64) -> Result<()> {
    if dim == 0 {
        return Err(Error::Parameter("dim must be at least 1".into()));
    }
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::Parameter(format!("horizon must be finite and >= 0, got {horizon}")));
    }
    Ok(())
}

/// Leaves of a BBM run to time `tau` whose first coordinate is at least `x_lo`.
#[derive(Clone, Debug)]
pub struct PrunedCloud {
    pub dim: usize,
    pub positions: Vec<f64>,
    pub nodes_visited: u64,
    pub branches_killed: u64,
    /// Upper bound on the probability that some leaf above `x_lo` was lost.
    pub miss_bound: f64,
}

/// log of an upper bound on the standard normal upper tail at `z > 0`.
fn log_tail_bound(z: f64) -> f64 {
    let half = 0.5f64.ln();
    if z <= 0.0 {
        return 0.0;
    }
    let mills = -0.5 * z * z - (z * (2.0 * std::f64::consts::PI).sqrt()).ln();
    mills.min(half)
}

/// Simulates the BBM but drops any branch whose expected number of
/// descendants with first coordinate `>= x_lo` at `tau` is below `delta`
/// (checked at branch times via the first-moment bound
/// `e^{tau-r} P(N(0,tau-r) >= x_lo - x)`). Each killed branch is a child of a
/// visited node, so the total miss probability is at most `delta` times the
/// number of kills.
pub fn simulate_pruned_cloud(
    dim: usize,
    tau: f64,
    x_lo: f64,
    delta: f64,
    rng: &RngStream,
    cap: usize,
) -> Result<PrunedCloud> {
    check(dim, tau)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!("prune delta must lie in (0,1), got {delta}")));
    }
    let log_delta = delta.ln();
    let mut positions = Vec::new();
    let mut killed = 0u64;
    let nodes = dfs(
        dim,
        tau,
        rng,
        cap,
        |x| {
            if x[0] >= x_lo {
                positions.extend_from_slice(x);
            }
        },
        |x1, r| {
            let gap = x_lo - x1;
            if gap <= 0.0 {
                return true;
            }
            let u = tau - r;
            let keep = u + log_tail_bound(gap / u.sqrt()) >= log_delta;
            if !keep {
                killed += 1;
            }
            keep
        },
    )?;
    Ok(PrunedCloud {
        dim,
        positions,
        nodes_visited: nodes,
        branches_killed: killed,
        miss_bound: delta * killed as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaves_count_mean() {
        let root = RngStream::new(77);
        let n = 2000;
        let mean = (0..n)
            .map(|i| simulate_leaves(2, 3.0, &root.derive(i), 1 << 20).unwrap().len() as f64 / 2.0)
            .sum::<f64>()
            / n as f64;
        // Var of population at t is e^{2t} - e^t for binary rate-1 splitting.
        let se = ((6f64).exp() - 3f64.exp()).sqrt() / (n as f64).sqrt();
        assert!((mean - 3f64.exp()).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn max_norm_matches_leaves() {
        let s = RngStream::new(3);
        let leaves = simulate_leaves(3, 4.0, &s, 1 << 20).unwrap();
        let m = leaves.chunks(3).map(|x| (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()).fold(0.0, f64::max);
        assert_eq!(m, sample_max_norm(3, 4.0, &s, 1 << 20).unwrap());
    }

    #[test]
    fn pruned_keeps_retained_leaves_exactly_when_nothing_killed() {
        // With an absurdly low threshold nothing gets killed and the
        // retained set equals the filtered full cloud.
        let s = RngStream::new(5);
        let full = simulate_leaves(2, 3.0, &s, 1 << 20).unwrap();
        let p = simulate_pruned_cloud(2, 3.0, -100.0, 1e-300, &s, 1 << 20).unwrap();
        assert_eq!(p.branches_killed, 0);
        assert_eq!(p.positions, full);
    }

    #[test]
    fn tail_bound_dominates() {
        // Compare against a crude numerical tail at a few points.
        for &z in &[0.1f64, 1.0, 2.0, 5.0, 10.0] {
            let n = 200_000;
            let h = 40.0 / n as f64;
            let tail: f64 = (0..n)
                .map(|i| {
                    let x = z + (i as f64 + 0.5) * h;
                    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt() * h
                })
                .sum();
            assert!(log_tail_bound(z) >= tail.ln() - 1e-9, "z {z}");
        }
    }

    #[test]
    fn capacity() {
        assert!(matches!(
            simulate_leaves(1, 15.0, &RngStream::new(1), 500),
            Err(Error::Capacity { cap: 500, .. })
        ));
    }
}
