//! Named verification suites. Each produces `CheckRecord`s with the
//! statistic, the threshold it is compared against, and the verdict.

use rayon::prelude::*;

use crate::bbm::{
    centering, clan_leaders, max_norm_particle, occupancy_front, sample_max_norm, simulate_bbm, split_time, BbmTree,
    DEFAULT_PARTICLE_CAP,
};
use crate::cluster::{sample_conditioned_cloud, simplified_front_run, CloudExtent, CloudRequest};
use crate::error::{Error, Result};
use crate::front::{front_of_point_process, FrontParams, FrontSurface, PointCloud, ThetaSet};
use crate::paths::{norm, PathGrid};
use crate::rho::{legendre_sup, sample_rho, RhoConfig};
use crate::rng::RngStream;
use crate::stats::{
    estimate_occupancy_profile, exponent_report, fit_power_law, kolmogorov_quantile, ks_two_sample, median, CheckRecord,
};

const SQRT2: f64 = std::f64::consts::SQRT_2;

pub const SUITES: &[&str] = &[
    "rho-scaling",
    "rho-convexity",
    "rho-exponent",
    "simplified-exponent",
    "coupling",
    "centering",
    "tail-shape",
    "crude-bound",
    "occupancy-band",
    "conditioning",
    "oracles",
];

fn rec(id: impl Into<String>, statistic: f64, threshold: f64, pass: bool, n: usize, seed: u64) -> CheckRecord {
    CheckRecord { check_id: id.into(), statistic, threshold, pass, n, seed, note: None }
}

/// Runs one named suite. `replicas` overrides each check's default size.
pub fn run_suite(name: &str, replicas: Option<usize>, seed: u64) -> Result<Vec<CheckRecord>> {
    let root = RngStream::new(seed);
    match name {
        "rho-scaling" => rho_scaling(replicas.unwrap_or(2000), seed, &root.derive(1)),
        "rho-convexity" => rho_convexity(replicas.unwrap_or(2000), seed, &root.derive(2)),
        "rho-exponent" => rho_exponent(replicas.unwrap_or(500), seed, &root.derive(3)),
        "simplified-exponent" => simplified_exponent(30.0, replicas.unwrap_or(200), seed, &root.derive(4)),
        "coupling" => coupling(30.0, replicas.unwrap_or(200), seed, &root.derive(5)),
        "centering" => centering_check(replicas.unwrap_or(500), seed, &root.derive(6)),
        "tail-shape" => tail_shape(replicas.unwrap_or(100_000), seed, &root.derive(7)),
        "crude-bound" => crude_bound(replicas.unwrap_or(2000), seed, &root.derive(8)),
        "occupancy-band" => occupancy_band(replicas.unwrap_or(2000), seed, &root.derive(9)),
        "conditioning" => conditioning(replicas.unwrap_or(200), seed, &root.derive(10)),
        "oracles" => oracles(replicas.unwrap_or(200), seed, &root.derive(11)),
        "all" => {
            let mut out = Vec::new();
            for s in SUITES {
                out.extend(run_suite(s, replicas, seed)?);
            }
            Ok(out)
        }
        _ => Err(Error::Parameter(format!("unknown suite {name}; expected one of {} or all", SUITES.join(", ")))),
    }
}

fn rho_ensemble(s_grid: &[f64], n: usize, rng: &RngStream) -> Result<Vec<Vec<f64>>> {
    let cfg = RhoConfig::default();
    (0..n)
        .into_par_iter()
        .map(|i| Ok(sample_rho(s_grid, &cfg, &rng.derive(i as u64))?.rho))
        .collect()
}

/// `rho(s) / s^{3/2}` against `rho(1)`, independent streams per `s`.
pub fn rho_scaling(n: usize, seed: u64, rng: &RngStream) -> Result<Vec<CheckRecord>> {
    let base: Vec<f64> = rho_ensemble(&[1.0], n, &rng.derive(0))?.into_iter().map(|r| r[0]).collect();
    let mut out = Vec::new();
    for (k, s) in [0.5f64, 2.0, 4.0].into_iter().enumerate() {
        let scaled: Vec<f64> =
            rho_ensemble(&[s], n, &rng.derive(k as u64 + 1))?.into_iter().map(|r| r[0] / s.powf(1.5)).collect();
        let ks = ks_two_sample(&scaled, &base)?;
        let crit = kolmogorov_quantile(0.01) / ks.effective_n.sqrt();
        out.push(rec(format!("rho_scaling_s{s}"), ks.statistic, crit, !ks.rejects(0.01), n, seed));
    }
    Ok(out)
}

/// Rounding allowance for a second difference `a - 2b + c` of values that
/// passed through `sqrt` and back: `1e-12` plus a few ulps of the magnitudes.
pub fn convexity_tolerance(a: f64, b: f64, c: f64) -> f64 {
    1e-12 + 4.0 * f64::EPSILON * (a.abs() + 2.0 * b.abs() + c.abs())
}

/// Midpoint convexity of `rho^2` on a uniform `s` grid, every replica.
/// The worst-case record reports the largest violation over its tolerance.
pub fn rho_convexity(n: usize, seed: u64, rng: &RngStream) -> Result<Vec<CheckRecord>> {
    let s: Vec<f64> = (0..=16).map(|i| i as f64 * 0.25).collect();
    let paths = rho_ensemble(&s, n, rng)?;
    let mut worst: f64 = 0.0;
    let mut good = 0;
    for r in &paths {
        let sq: Vec<f64> = r.iter().map(|v| v * v).collect();
        let ratio = (1..sq.len() - 1)
            .map(|i| -(sq[i + 1] - 2.0 * sq[i] + sq[i - 1]) / convexity_tolerance(sq[i - 1], sq[i], sq[i + 1]))
            .fold(0.0, f64::max);
        worst = worst.max(ratio);
        if ratio <= 1.0 {
            good += 1;
        }
    }
    let frac = good as f64 / n as f64;
    Ok(vec![rec("rho_convexity", frac, 1.0, good == n, n, seed), rec("rho_convexity_worst", worst, 1.0, worst <= 1.0, n, seed)])
}

/// Log-log slope of the median of `rho(s)` over `s in [0.5, 4]`.
pub fn rho_exponent(n: usize, seed: u64, rng: &RngStream) -> Result<Vec<CheckRecord>> {
    let s: Vec<f64> = (0..8).map(|i| 0.5 * 2f64.powf(i as f64 * 3.0 / 7.0)).collect();
    let paths = rho_ensemble(&s, n, rng)?;
    let med: Vec<f64> = (0..s.len())
        .map(|j| median(&paths.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .collect::<Result<_>>()?;
    let fit = fit_power_law(&s, &med)?;
    Ok(vec![rec("rho_exponent", fit.exponent, 1.5, (1.35..=1.65).contains(&fit.exponent), n, seed)])
}

fn d2_params(s: Vec<f64>) -> FrontParams {
    FrontParams::new(s, ThetaSet::grid(2, 1).expect("d = 2 theta set"), 0.2)
}

/// Slope of the pooled median simplified front at scale `l`.
pub fn simplified_exponent(l: f64, n: usize, seed: u64, rng: &RngStream) -> Result<Vec<CheckRecord>> {
    let params = d2_params((4..=16).map(|i| i as f64 * 0.125).collect());
    let id = format!("simplified_exponent_L{l}");
    let mut fronts: Vec<FrontSurface> = Vec::with_capacity(n);
    for i in 0..n {
        match simplified_front_run(l, &params, 48, DEFAULT_PARTICLE_CAP, &rng.derive(i as u64)) {
            Ok(run) => fronts.push(run.front),
            Err(e @ Error::Capacity { .. }) => {
                let mut r = rec(id, f64::NAN, 1.5, false, i, seed);
                r.note = Some(format!("replica {i}: {e}"));
                return Ok(vec![r]);
            }
            Err(e) => return Err(e),
        }
    }
    match exponent_report(&fronts, (0.5, 2.0)) {
        Ok(r) => Ok(vec![rec(id, r.fit.exponent, 1.5, (1.2..=1.8).contains(&r.fit.exponent), n, seed)]),
        Err(Error::Domain(_)) => Ok(vec![rec(id, f64::NAN, 1.5, false, n, seed)]),
        Err(e) => Err(e),
    }
}

/// Median over replicas of `sup |8^{-1/4} h - X_L|` at scale `l`.
pub fn coupling(l: f64, n: usize, seed: u64, rng: &RngStream) -> Result<Vec<CheckRecord>> {
    let params = d2_params((0..=10).map(|i| i as f64 * 0.1).collect());
    let id = format!("coupling_L{l}");
    let mut gaps = Vec::with_capacity(n);
    for i in 0..n {
        match simplified_front_run(l, &params, 48, DEFAULT_PARTICLE_CAP, &rng.derive(i as u64)) {
            Ok(run) => gaps.push(run.coupling_gap()),
            Err(e @ Error::Capacity { .. }) => {
                let mut r = rec(id, f64::NAN, 0.35, false, i, seed);
                r.note = Some(format!("replica {i}: {e}"));
                return Ok(vec![r]);
            }
            Err(e) => return Err(e),
        }
    }
    let m = median(&gaps)?;
    Ok(vec![rec(id, m, 0.35, m <= 0.35, n, seed)])
}

pub fn centering_check(n: usize, seed: u64, rng: &RngStream) -> Result<Vec<CheckRecord>> {
    let t = 10.0;
    let m = centering(2, t);
    let vals: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| Ok(max_norm_particle(&simulate_bbm(2, t, &rng.derive(i as u64), DEFAULT_PARTICLE_CAP)?).norm - m))
        .collect::<Result<_>>()?;
    let med = median(&vals)?;
    Ok(vec![rec("centering_d2_t10", med.abs(), 3.0, med.abs() <= 3.0, n, seed)])
}

/// Ratio `P(R* >= m + 1) / P(R* >= m + 2)` in 1-d at `t = 10`.
pub fn tail_shape(n: usize, seed: u64, rng: &RngStream) -> Result<Vec<CheckRecord>> {
    let t = 10.0;
    let m = centering(1, t);
    let vals: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| sample_max_norm(1, t, &rng.derive(i as u64), DEFAULT_PARTICLE_CAP))
        .collect::<Result<_>>()?;
    let p1 = vals.iter().filter(|v| **v >= m + 1.0).count() as f64;
    let p2 = vals.iter().filter(|v| **v >= m + 2.0).count() as f64;
    let target = SQRT2.exp() / 2.0;
    let ratio = if p2 > 0.0 { p1 / p2 } else { f64::INFINITY };
    let pass = ratio >= target / 2.0 && ratio <= target * 2.0;
    Ok(vec![rec("tail_ratio", ratio, target, pass, n, seed)])
}

pub fn crude_bound(n: usize, seed: u64, rng: &RngStream) -> Result<Vec<CheckRecord>> {
    let s = 5.0;
    let vals: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| sample_max_norm(2, s, &rng.derive(i as u64), DEFAULT_PARTICLE_CAP))
        .collect::<Result<_>>()?;
    Ok([8.0f64, 10.0, 12.0]
        .iter()
        .map(|&z| {
            let p = vals.iter().filter(|v| **v >= z).count() as f64 / n as f64;
            let bound = 10.0 * (s - z * z / (3.0 * s)).exp();
            rec(format!("crude_bound_z{z}"), p, bound, p <= bound, n, seed)
        })
        .collect())
}

pub fn occupancy_band(n: usize, seed: u64, rng: &RngStream) -> Result<Vec<CheckRecord>> {
    let t = 8.0;
    let front = occupancy_front(2, t);
    let radii = [0.0, 3.0, 6.0, front, 11.0];
    let xs: Vec<Vec<f64>> = radii.iter().map(|r| vec![*r, 0.0]).collect();
    let est = estimate_occupancy_profile(2, t, &xs, 0.25, n, rng, DEFAULT_PARTICLE_CAP)?;
    let u = est[3].value;
    let worst_increase = est.windows(2).map(|w| w[1].value - w[0].value).fold(f64::NEG_INFINITY, f64::max);
    Ok(vec![
        rec("occupancy_band", u, 0.05, (0.05..=0.95).contains(&u), n, seed),
        rec("occupancy_monotone", worst_increase, 0.0, worst_increase <= 0.0, n, seed),
    ])
}

/// Acceptance rate of the cloud conditioning at `tau = 50`, `A = -sqrt2 tau - sqrt tau`.
pub fn conditioning(n: usize, seed: u64, rng: &RngStream) -> Result<Vec<CheckRecord>> {
    let tau: f64 = 50.0;
    let a = -SQRT2 * tau - tau.sqrt();
    let y = [0.0];
    let req = CloudRequest {
        index: 0,
        tau,
        anchor_a: a,
        anchor_y: &y,
        dim: 2,
        extent: CloudExtent::Window { depth: 0.0 },
        particle_cap: DEFAULT_PARTICLE_CAP,
    };
    let accepted = (0..n)
        .into_par_iter()
        .map(|i| match sample_conditioned_cloud(&req, &rng.derive(i as u64), 1) {
            Ok(_) => Ok(1usize),
            Err(Error::Budget { .. }) => Ok(0),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    let rate = accepted as f64 / n as f64;
    Ok(vec![rec("conditioning_tau50", rate, 0.9, rate >= 0.9, n, seed)])
}

/// Front by scanning every point for every `(s, theta)` cell.
pub fn brute_front(cloud: &PointCloud, params: &FrontParams) -> Vec<f64> {
    let mut out = Vec::new();
    for &s in &params.s_grid {
        for theta in &params.thetas.directions {
            let mut best: f64 = 0.0;
            for p in cloud.iter() {
                if !(p[0] > -s && p[0] <= -s + params.slab_width) {
                    continue;
                }
                let r = norm(&p[1..]);
                if r == 0.0 {
                    continue;
                }
                let dot: f64 = theta.iter().zip(&p[1..]).map(|(a, b)| a * b).sum::<f64>() / r;
                let ok = match params.cone_mode {
                    crate::front::ConeMode::Signed => dot >= 1.0 - params.epsilon,
                    crate::front::ConeMode::Absolute => dot.abs() >= 1.0 - params.epsilon,
                };
                if ok {
                    best = best.max(r);
                }
            }
            out.push(best);
        }
    }
    out
}

fn ancestors(tree: &BbmTree, mut id: usize) -> Vec<usize> {
    let mut v = vec![id];
    while let Some(p) = tree.nodes[id].parent {
        v.push(p);
        id = p;
    }
    v
}

/// Split time via explicit ancestor sets.
pub fn brute_split_time(tree: &BbmTree, u: usize, v: usize) -> f64 {
    if u == v {
        return tree.horizon;
    }
    let au = ancestors(tree, u);
    let av = ancestors(tree, v);
    let common = au.iter().find(|a| av.contains(a)).expect("root is common");
    tree.nodes[*common].final_time
}

/// Clan leader ids via pairwise split times.
pub fn brute_clan_leaders(tree: &BbmTree, ell: f64) -> Vec<usize> {
    let level = tree.horizon - ell;
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &u in &tree.leaf_ids {
        match groups.iter_mut().find(|g| brute_split_time(tree, g[0], u) >= level) {
            Some(g) => g.push(u),
            None => groups.push(vec![u]),
        }
    }
    let mut out: Vec<usize> = groups
        .iter()
        .map(|g| {
            *g.iter()
                .max_by(|a, b| {
                    norm(tree.final_position(**a))
                        .total_cmp(&norm(tree.final_position(**b)))
                        .then(b.cmp(a))
                })
                .unwrap()
        })
        .collect();
    out.sort_unstable();
    out
}

pub fn oracles(n: usize, seed: u64, rng: &RngStream) -> Result<Vec<CheckRecord>> {
    use rand::Rng;
    let mut front_bad = 0usize;
    let mut clan_bad = 0usize;
    let mut split_bad = 0usize;
    let mut leg_bad = 0usize;
    for i in 0..n {
        let mut g = rng.derive_path(&[0, i as u64]).generator();
        // Front on a random normalized cloud of at most 200 points.
        let dim = 2 + (i % 2);
        let size = g.random_range(1..200usize);
        let mut cloud = PointCloud::new(dim);
        cloud.push(&vec![0.0; dim], crate::front::Tag::Origin, None);
        for _ in 0..size {
            let mut p: Vec<f64> = (0..dim).map(|_| g.random_range(-3.0..3.0)).collect();
            p[0] = -g.random_range(0.0..6.0);
            cloud.push(&p, crate::front::Tag::Unlabeled, None);
        }
        let mut params = FrontParams::new(
            (0..=12).map(|k| k as f64 * 0.5).collect(),
            ThetaSet::grid(dim, 6)?,
            g.random_range(0.05..0.9),
        );
        if i % 3 == 0 {
            params.cone_mode = crate::front::ConeMode::Absolute;
        }
        if front_of_point_process(&cloud, &params)?.heights != brute_front(&cloud, &params) {
            front_bad += 1;
        }

        // Genealogy on trees with at most 50 leaves.
        let tree = simulate_bbm(2, 2.5, &rng.derive_path(&[1, i as u64]), DEFAULT_PARTICLE_CAP)?;
        if tree.population() <= 50 {
            for ell in [0.3, 1.0, 2.5] {
                let mut fast: Vec<usize> = clan_leaders(&tree, ell)?.iter().map(|c| c.leader.id).collect();
                fast.sort_unstable();
                if fast != brute_clan_leaders(&tree, ell) {
                    clan_bad += 1;
                }
            }
            for &u in &tree.leaf_ids {
                for &v in &tree.leaf_ids {
                    if split_time(&tree, u, v)? != brute_split_time(&tree, u, v) {
                        split_bad += 1;
                    }
                }
            }
        }

        // Legendre sup on a 20-point path with deliberate ties.
        let mut times = vec![0.0];
        for _ in 1..20 {
            times.push(times.last().unwrap() + g.random_range(1..4) as f64 * 0.5);
        }
        let values: Vec<f64> = (0..20).map(|k| if k == 0 { 0.0 } else { g.random_range(0..8) as f64 * 0.25 }).collect();
        let path = PathGrid { times: times.clone(), dim: 1, values: values.clone() };
        let s = g.random_range(0..12) as f64 * 0.25;
        let (v, arg) = legendre_sup(&path, s)?;
        let mut bv = f64::NEG_INFINITY;
        let mut ba = 0.0;
        for k in 0..20 {
            let x = times[k] * (s - values[k]);
            if x > bv {
                bv = x;
                ba = times[k];
            }
        }
        if v != bv || arg != ba {
            leg_bad += 1;
        }
    }
    Ok(vec![
        rec("oracle_front", front_bad as f64, 0.0, front_bad == 0, n, seed),
        rec("oracle_clans", clan_bad as f64, 0.0, clan_bad == 0, n, seed),
        rec("oracle_split", split_bad as f64, 0.0, split_bad == 0, n, seed),
        rec("oracle_legendre", leg_bad as f64, 0.0, leg_bad == 0, n, seed),
    ])
}
