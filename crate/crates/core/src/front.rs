//! Extremal clusters, their fronts, and the extremal landscape of a BBM tree.

use serde::{Deserialize, Serialize};

use crate::bbm::{centering, clan_leaders, max_norm_particle, BbmTree};
use crate::error::{Error, Result};
use crate::paths::norm;

/// Where a point of a cloud came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tag {
    Origin,
    Particle(usize),
    Cloud(usize),
    Unlabeled,
}

/// Finite point set in `R^dim`, row-major, with one tag per point.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    pub dim: usize,
    pub points: Vec<f64>,
    pub tags: Vec<Tag>,
    /// Optional per-point time (branching time of the cloud a point came from).
    pub times: Vec<Option<f64>>,
}

impl PointCloud {
    pub fn new(dim: usize) -> Self {
        PointCloud { dim, points: Vec::new(), tags: Vec::new(), times: Vec::new() }
    }

    pub fn from_points(dim: usize, pts: &[Vec<f64>]) -> Self {
        let mut c = PointCloud::new(dim);
        for p in pts {
            c.push(p, Tag::Unlabeled, None);
        }
        c
    }

    pub fn push(&mut self, p: &[f64], tag: Tag, time: Option<f64>) {
        debug_assert_eq!(p.len(), self.dim);
        self.points.extend_from_slice(p);
        self.tags.push(tag);
        self.times.push(time);
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    /// Applies `f` to the transverse part (coordinates 2..d) of every point.
    pub fn map_transverse(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> PointCloud {
        let mut out = self.clone();
        for i in 0..self.len() {
            let y = f(&self.point(i)[1..]);
            out.points[i * self.dim + 1..(i + 1) * self.dim].copy_from_slice(&y);
        }
        out
    }
}

/// Orthogonal linear map of `R^dim`, stored as a row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Rotation {
    pub dim: usize,
    pub matrix: Vec<f64>,
}

impl Rotation {
    pub fn identity(dim: usize) -> Self {
        let mut matrix = vec![0.0; dim * dim];
        for i in 0..dim {
            matrix[i * dim + i] = 1.0;
        }
        Rotation { dim, matrix }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d).map(|i| (0..d).map(|j| self.matrix[i * d + j] * x[j]).sum()).collect()
    }
}

/// Rotation taking the unit vector `theta` to `e1` and fixing the orthogonal
/// complement of `span{theta, e1}`. For `theta = -e1` it is the half-turn in
/// the `(e1, e2)` plane; in one dimension it is `x -> -x`.
pub fn rotation_to_e1(theta: &[f64]) -> Result<Rotation> {
    let d = theta.len();
    if d == 0 {
        return Err(Error::Parameter("theta must be non-empty".into()));
    }
    let n = norm(theta);
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::Parameter(format!("theta must be a unit vector, norm is {n}")));
    }
    let c = theta[0].clamp(-1.0, 1.0);
    let mut r = Rotation::identity(d);
    // Component of e1 orthogonal to theta.
    let mut v: Vec<f64> = theta.iter().map(|t| -c * t).collect();
    v[0] += 1.0;
    let vn = norm(&v);
    if vn < 1e-12 {
        if c > 0.0 {
            return Ok(r);
        }
        if d == 1 {
            r.matrix[0] = -1.0;
            return Ok(r);
        }
        r.matrix[0] = -1.0;
        r.matrix[d + 1] = -1.0;
        return Ok(r);
    }
    for x in v.iter_mut() {
        *x /= vn;
    }
    let s = vn; // sine of the angle between theta and e1
    let u = theta;
    // R = I + (c-1)(u u^T + v v^T) + s (v u^T - u v^T)
    for i in 0..d {
        for j in 0..d {
            r.matrix[i * d + j] += (c - 1.0) * (u[i] * u[j] + v[i] * v[j]) + s * (v[i] * u[j] - u[i] * v[j]);
        }
    }
    Ok(r)
}

/// All leaves of `tree` recentred at `leader` and rotated so the leader's
/// direction becomes `e1`.
fn cluster_around(tree: &BbmTree, leader: usize, direction: &[f64]) -> PointCloud {
    let rot = rotation_to_e1(direction).expect("direction is a unit vector");
    let base = tree.final_position(leader).to_vec();
    let mut cloud = PointCloud::new(tree.dim);
    let mut diff = vec![0.0; tree.dim];
    for &v in &tree.leaf_ids {
        if v == leader {
            cloud.push(&vec![0.0; tree.dim], Tag::Origin, None);
            continue;
        }
        for (k, x) in tree.final_position(v).iter().enumerate() {
            diff[k] = x - base[k];
        }
        cloud.push(&rot.apply(&diff), Tag::Particle(v), None);
    }
    cloud
}

/// The cluster seen from the maximal-norm particle, rotated to `e1`.
pub fn extremal_cluster(tree: &BbmTree) -> PointCloud {
    let top = max_norm_particle(tree);
    cluster_around(tree, top.id, &top.direction)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ConeMode {
    /// `theta . a >= 1 - eps`
    #[default]
    Signed,
    /// `|theta . a| >= 1 - eps`
    Absolute,
}

impl std::str::FromStr for ConeMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "signed" => Ok(ConeMode::Signed),
            "absolute" => Ok(ConeMode::Absolute),
            _ => Err(Error::Parameter(format!("cone mode must be signed|absolute, got {s}"))),
        }
    }
}

/// Finite set of unit vectors in `R^{d-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaSet {
    pub dim: usize,
    pub directions: Vec<Vec<f64>>,
}

impl ThetaSet {
    pub fn new(dim: usize, directions: Vec<Vec<f64>>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Parameter(format!("fronts need dim >= 2, got {dim}")));
        }
        if directions.is_empty() {
            return Err(Error::Parameter("theta set is empty".into()));
        }
        for t in &directions {
            if t.len() != dim - 1 || (norm(t) - 1.0).abs() > 1e-9 {
                return Err(Error::Parameter(format!("theta {t:?} is not a unit vector in R^{}", dim - 1)));
            }
        }
        Ok(ThetaSet { dim, directions })
    }

    /// `{+1, -1}` for `d = 2`; `steps` equally spaced angles for `d = 3`;
    /// a hyperspherical product grid with `steps` values per angle above that.
    pub fn grid(dim: usize, steps: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Parameter(format!("fronts need dim >= 2, got {dim}")));
        }
        if dim == 2 {
            return ThetaSet::new(2, vec![vec![1.0], vec![-1.0]]);
        }
        if steps == 0 {
            return Err(Error::Parameter("theta_steps must be positive".into()));
        }
        let m = dim - 1;
        let polar: Vec<f64> = (0..steps).map(|k| (k as f64 + 0.5) * std::f64::consts::PI / steps as f64).collect();
        let azimuth: Vec<f64> = (0..steps).map(|k| k as f64 * 2.0 * std::f64::consts::PI / steps as f64).collect();
        let mut out = Vec::new();
        let n_polar = m - 2;
        let total = steps.pow(n_polar as u32);
        for idx in 0..total {
            let mut rem = idx;
            let mut angles = Vec::with_capacity(n_polar);
            for _ in 0..n_polar {
                angles.push(polar[rem % steps]);
                rem /= steps;
            }
            for &phi in &azimuth {
                let mut v = Vec::with_capacity(m);
                let mut sin_prod = 1.0;
                for &a in &angles {
                    v.push(sin_prod * a.cos());
                    sin_prod *= a.sin();
                }
                v.push(sin_prod * phi.cos());
                v.push(sin_prod * phi.sin());
                out.push(v);
            }
        }
        ThetaSet::new(dim, out)
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrontParams {
    pub s_grid: Vec<f64>,
    pub thetas: ThetaSet,
    pub epsilon: f64,
    pub slab_width: f64,
    pub cone_mode: ConeMode,
}

impl FrontParams {
    pub fn new(s_grid: Vec<f64>, thetas: ThetaSet, epsilon: f64) -> Self {
        FrontParams { s_grid, thetas, epsilon, slab_width: 1.0, cone_mode: ConeMode::Signed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Parameter(format!("epsilon ∈ (0,1) required, got {}", self.epsilon)));
        }
        if !(self.slab_width > 0.0) || !self.slab_width.is_finite() {
            return Err(Error::Parameter(format!("slab_width must be positive, got {}", self.slab_width)));
        }
        if self.s_grid.is_empty() {
            return Err(Error::Parameter("s grid is empty".into()));
        }
        if self.s_grid.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(Error::Parameter("s grid values must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// `s in [0, s_max]` with `steps` intervals.
pub fn linear_s_grid(s_max: f64, steps: usize) -> Vec<f64> {
    if steps == 0 {
        return vec![s_max];
    }
    (0..=steps).map(|i| s_max * i as f64 / steps as f64).collect()
}

/// Heights `h(s, theta)` on an `s` by `theta` grid, `s`-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FrontSurface {
    pub dim: usize,
    pub s: Vec<f64>,
    pub thetas: Vec<Vec<f64>>,
    pub heights: Vec<f64>,
}

impl FrontSurface {
    pub fn height(&self, i_s: usize, i_theta: usize) -> f64 {
        self.heights[i_s * self.thetas.len() + i_theta]
    }

    /// Heights at one `s` across all thetas.
    pub fn row(&self, i_s: usize) -> &[f64] {
        let n = self.thetas.len();
        &self.heights[i_s * n..(i_s + 1) * n]
    }
}

fn cone_ok(mode: ConeMode, theta: &[f64], a: &[f64], threshold: f64) -> bool {
    let dot: f64 = theta.iter().zip(a).map(|(t, x)| t * x).sum();
    match mode {
        ConeMode::Signed => dot >= threshold,
        ConeMode::Absolute => dot.abs() >= threshold,
    }
}

fn check_normalized(cloud: &PointCloud) -> Result<()> {
    let has_zero = cloud.iter().any(|p| p.iter().all(|&x| x == 0.0));
    if !has_zero {
        return Err(Error::Precondition("cloud does not contain the origin".into()));
    }
    let max1 = cloud.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
    let scale = cloud.iter().map(|p| p[0].abs()).fold(0.0, f64::max);
    if max1 > 1e-9 * (1.0 + scale) {
        return Err(Error::Precondition(format!(
            "origin is not the maximal first coordinate (max is {max1})"
        )));
    }
    Ok(())
}

/// `h(s,theta)`: the largest transverse norm among points whose first
/// coordinate lies in `(-s, -s + slab_width]` and whose transverse direction is
/// in the cone around `theta`. Empty maxima are 0.
pub fn front_of_point_process(cloud: &PointCloud, params: &FrontParams) -> Result<FrontSurface> {
    params.validate()?;
    if cloud.dim < 2 || cloud.dim != params.thetas.dim {
        return Err(Error::Parameter(format!(
            "cloud dim {} does not match theta dim {}",
            cloud.dim, params.thetas.dim
        )));
    }
    check_normalized(cloud)?;
    let d = cloud.dim;
    let thr = 1.0 - params.epsilon;
    let nt = params.thetas.len();

    // (first coordinate, transverse norm, transverse direction) for points
    // with a non-zero transverse part; sorted by first coordinate.
    let mut pts: Vec<(f64, f64, Vec<f64>)> = cloud
        .iter()
        .filter_map(|p| {
            let r = norm(&p[1..]);
            (r > 0.0).then(|| (p[0], r, p[1..].iter().map(|y| y / r).collect()))
        })
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut heights = vec![0.0; params.s_grid.len() * nt];
    for (i, &s) in params.s_grid.iter().enumerate() {
        let lo = -s;
        let hi = -s + params.slab_width;
        let start = pts.partition_point(|p| p.0 <= lo);
        let end = pts.partition_point(|p| p.0 <= hi);
        for (_, r, a) in &pts[start..end] {
            for (j, theta) in params.thetas.directions.iter().enumerate() {
                let h = &mut heights[i * nt + j];
                if *r > *h && cone_ok(params.cone_mode, theta, a, thr) {
                    *h = *r;
                }
            }
        }
    }
    Ok(FrontSurface { dim: d, s: params.s_grid.clone(), thetas: params.thetas.directions.clone(), heights })
}

/// Front of the extremal cluster of `tree`.
pub fn front_of_bbm(tree: &BbmTree, params: &FrontParams) -> Result<FrontSurface> {
    front_of_point_process(&extremal_cluster(tree), params)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LandscapeEntry {
    pub ancestor: usize,
    pub leader: usize,
    /// Leader norm minus the centering `m_t`.
    pub recentered_norm: f64,
    pub direction: Vec<f64>,
}

/// Clan leaders of a tree at scale `ell`, each with a lazily built cluster.
#[derive(Clone, Debug)]
pub struct Landscape<'a> {
    tree: &'a BbmTree,
    pub ell: f64,
    /// Sorted by decreasing recentred norm.
    pub entries: Vec<LandscapeEntry>,
}

impl Landscape<'_> {
    /// All of the tree's leaves seen from entry `i`'s leader, rotated to `e1`.
    pub fn cluster(&self, i: usize) -> PointCloud {
        let e = &self.entries[i];
        cluster_around(self.tree, e.leader, &e.direction)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn extremal_landscape(tree: &BbmTree, ell: f64) -> Result<Landscape<'_>> {
    let m = centering(tree.dim, tree.horizon);
    let entries = clan_leaders(tree, ell)?
        .into_iter()
        .map(|c| LandscapeEntry {
            ancestor: c.ancestor,
            leader: c.leader.id,
            recentered_norm: c.leader.norm - m,
            direction: c.leader.direction,
        })
        .collect();
    Ok(Landscape { tree, ell, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bbm::{simulate_bbm, DEFAULT_PARTICLE_CAP};
    use crate::rng::RngStream;

    fn params(dim: usize, s: Vec<f64>, eps: f64) -> FrontParams {
        FrontParams::new(s, ThetaSet::grid(dim, 8).unwrap(), eps)
    }

    #[test]
    fn rotation_sends_theta_to_e1() {
        let cases = [
            vec![0.0, 1.0, 0.0],
            vec![0.6, 0.8, 0.0],
            vec![-1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![-0.5, 0.5, 0.70710678118654757],
        ];
        for th in cases {
            let r = rotation_to_e1(&th).unwrap();
            let img = r.apply(&th);
            assert!((img[0] - 1.0).abs() < 1e-12 && img[1].abs() < 1e-12 && img[2].abs() < 1e-12, "{img:?}");
            // Orthogonality.
            for i in 0..3 {
                for j in 0..3 {
                    let dot: f64 = (0..3).map(|k| r.matrix[k * 3 + i] * r.matrix[k * 3 + j]).sum();
                    assert!((dot - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
                }
            }
        }
        assert!(rotation_to_e1(&[0.5, 0.5]).is_err());
    }

    #[test]
    fn rotation_fixes_complement() {
        let th = [0.6, 0.8, 0.0, 0.0];
        let r = rotation_to_e1(&th).unwrap();
        assert_eq!(r.apply(&[0.0, 0.0, 1.0, 0.0]), vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(r.apply(&[0.0, 0.0, 0.0, 2.0]), vec![0.0, 0.0, 0.0, 2.0]);
    }

    #[test]
    fn single_point_front() {
        let cloud = PointCloud::from_points(3, &[vec![0.0, 0.0, 0.0], vec![-0.5, 3.0, 0.0]]);
        let p = FrontParams::new(vec![1.0, 3.0], ThetaSet::new(3, vec![vec![1.0, 0.0]]).unwrap(), 0.1);
        let f = front_of_point_process(&cloud, &p).unwrap();
        assert_eq!(f.height(0, 0), 3.0);
        assert_eq!(f.height(1, 0), 0.0);
    }

    #[test]
    fn precondition_and_params() {
        let bad = PointCloud::from_points(2, &[vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert!(matches!(front_of_point_process(&bad, &params(2, vec![1.0], 0.1)), Err(Error::Precondition(_))));
        let nozero = PointCloud::from_points(2, &[vec![-1.0, 0.0]]);
        assert!(matches!(front_of_point_process(&nozero, &params(2, vec![1.0], 0.1)), Err(Error::Precondition(_))));
        let ok = PointCloud::from_points(2, &[vec![0.0, 0.0]]);
        let e = front_of_point_process(&ok, &params(2, vec![1.0], 1.0)).unwrap_err();
        assert!(e.to_string().contains("epsilon ∈ (0,1)"));
    }

    #[test]
    fn d2_cone_signs() {
        let cloud = PointCloud::from_points(2, &[vec![0.0, 0.0], vec![-0.5, 2.0], vec![-0.7, -3.0]]);
        let mut p = params(2, vec![1.0], 0.5);
        let f = front_of_point_process(&cloud, &p).unwrap();
        assert_eq!(f.row(0), &[2.0, 3.0]);
        p.cone_mode = ConeMode::Absolute;
        let f = front_of_point_process(&cloud, &p).unwrap();
        assert_eq!(f.row(0), &[3.0, 3.0]);
    }

    #[test]
    fn landscape_top_entry_is_extremal_cluster() {
        let tree = simulate_bbm(2, 5.0, &RngStream::new(12), DEFAULT_PARTICLE_CAP).unwrap();
        let land = extremal_landscape(&tree, 2.0).unwrap();
        assert_eq!(land.cluster(0), extremal_cluster(&tree));
        for i in 0..land.len() {
            assert!(land.cluster(i).iter().any(|p| p.iter().all(|&x| x == 0.0)));
        }
        for w in land.entries.windows(2) {
            assert!(w[0].recentered_norm >= w[1].recentered_norm);
        }
    }

    #[test]
    fn extremal_cluster_is_normalized() {
        for seed in 0..5 {
            let tree = simulate_bbm(3, 4.0, &RngStream::new(seed), DEFAULT_PARTICLE_CAP).unwrap();
            let c = extremal_cluster(&tree);
            assert_eq!(c.len(), tree.population());
            check_normalized(&c).unwrap();
            assert!(front_of_bbm(&tree, &params(3, linear_s_grid(3.0, 6), 0.2)).is_ok());
        }
    }

    #[test]
    fn theta_grids() {
        assert_eq!(ThetaSet::grid(2, 5).unwrap().len(), 2);
        assert_eq!(ThetaSet::grid(3, 12).unwrap().len(), 12);
        assert_eq!(ThetaSet::grid(5, 4).unwrap().len(), 64);
        assert!(ThetaSet::grid(1, 4).is_err());
    }
}
