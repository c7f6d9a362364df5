//! Exact simulation of d-dimensional binary branching Brownian motion and
//! genealogical queries on the resulting tree.

mod lite;

pub use lite::{
    sample_max_norm, simulate_leaves, simulate_pruned_cloud, PrunedCloud, DEFAULT_PRUNE_DELTA,
};

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::paths::norm;
use crate::rng::RngStream;

pub const DEFAULT_PARTICLE_CAP: usize = 2_000_000;

/// Centering of the maximal norm: `sqrt2 t + (d-4)/(2 sqrt2) log t`, with the
/// log term dropped for `t <= 1`.
pub fn centering(dim: usize, t: f64) -> f64 {
    let s2 = std::f64::consts::SQRT_2;
    let log_term = if t > 1.0 { t.ln() } else { 0.0 };
    s2 * t + (dim as f64 - 4.0) / (2.0 * s2) * log_term
}

/// Front location for the occupancy profile: `sqrt2 t - (d+2)/(2 sqrt2) log t`.
pub fn occupancy_front(dim: usize, t: f64) -> f64 {
    let s2 = std::f64::consts::SQRT_2;
    let log_term = if t > 1.0 { t.ln() } else { 0.0 };
    s2 * t - (dim as f64 + 2.0) / (2.0 * s2) * log_term
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub birth_time: f64,
    /// Death time for internal nodes, the horizon for leaves.
    pub final_time: f64,
    pub children: Option<[usize; 2]>,
}

#[derive(Clone, Debug)]
pub struct BbmTree {
    pub dim: usize,
    pub horizon: f64,
    pub nodes: Vec<ParticleNode>,
    final_positions: Vec<f64>,
    pub leaf_ids: Vec<usize>,
}

impl BbmTree {
    pub fn node(&self, id: usize) -> Result<&ParticleNode> {
        self.nodes.get(id).ok_or(Error::Lookup(id))
    }

    pub fn final_position(&self, id: usize) -> &[f64] {
        &self.final_positions[id * self.dim..(id + 1) * self.dim]
    }

    /// Position at birth: the parent's final position, or the origin for the root.
    pub fn birth_position(&self, id: usize) -> Vec<f64> {
        match self.nodes[id].parent {
            Some(p) => self.final_position(p).to_vec(),
            None => vec![0.0; self.dim],
        }
    }

    pub fn population(&self) -> usize {
        self.leaf_ids.len()
    }

    /// Lifetimes of internal nodes (the ones that actually branched).
    pub fn branch_lifetimes(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .filter(|n| n.children.is_some())
            .map(|n| n.final_time - n.birth_time)
            .collect()
    }

    fn depth(&self, mut id: usize) -> usize {
        let mut d = 0;
        while let Some(p) = self.nodes[id].parent {
            id = p;
            d += 1;
        }
        d
    }
}

struct Event {
    time: f64,
    id: usize,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    // Reversed so the heap pops the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.id.cmp(&self.id))
    }
}

/// Simulate one BBM tree up to `horizon`, processing branch events in time order.
pub fn simulate_bbm(dim: usize, horizon: f64, rng: &RngStream, particle_cap: usize) -> Result<BbmTree> {
    if dim == 0 {
        return Err(Error::Parameter("dim must be at least 1".into()));
    }
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::Parameter(format!("horizon must be finite and >= 0, got {horizon}")));
    }
    if particle_cap == 0 {
        return Err(Error::Capacity { cap: 0, time: 0.0 });
    }
    let mut g = rng.generator();
    let mut nodes: Vec<ParticleNode> = Vec::new();
    let mut pos: Vec<f64> = Vec::new();
    let mut leaves = Vec::new();
    let mut heap = BinaryHeap::new();

    // Creates a node born at `t` with parent `parent`; leaves get their final
    // position immediately, internal nodes when their event fires.
    let spawn = |parent: Option<usize>,
                     t: f64,
                     nodes: &mut Vec<ParticleNode>,
                     pos: &mut Vec<f64>,
                     leaves: &mut Vec<usize>,
                     heap: &mut BinaryHeap<Event>,
                     g: &mut crate::rng::Generator| {
        let id = nodes.len();
        let life: f64 = g.sample(Exp1);
        let death = t + life;
        let leaf = death >= horizon;
        let final_time = if leaf { horizon } else { death };
        nodes.push(ParticleNode { id, parent, birth_time: t, final_time, children: None });
        pos.extend(std::iter::repeat_n(0.0, dim));
        if leaf {
            let sd = (horizon - t).sqrt();
            for k in 0..dim {
                let base = parent.map_or(0.0, |p| pos[p * dim + k]);
                let z: f64 = g.sample(StandardNormal);
                pos[id * dim + k] = base + sd * z;
            }
            leaves.push(id);
        } else {
            heap.push(Event { time: death, id });
        }
    };

    spawn(None, 0.0, &mut nodes, &mut pos, &mut leaves, &mut heap, &mut g);
    while let Some(Event { time, id }) = heap.pop() {
        let birth = nodes[id].birth_time;
        let sd = (time - birth).sqrt();
        for k in 0..dim {
            let base = nodes[id].parent.map_or(0.0, |p| pos[p * dim + k]);
            let z: f64 = g.sample(StandardNormal);
            pos[id * dim + k] = base + sd * z;
        }
        if nodes.len() + 2 > particle_cap {
            return Err(Error::Capacity { cap: particle_cap, time });
        }
        let a = nodes.len();
        spawn(Some(id), time, &mut nodes, &mut pos, &mut leaves, &mut heap, &mut g);
        spawn(Some(id), time, &mut nodes, &mut pos, &mut leaves, &mut heap, &mut g);
        nodes[id].children = Some([a, a + 1]);
    }
    leaves.sort_unstable();
    Ok(BbmTree { dim, horizon, nodes, final_positions: pos, leaf_ids: leaves })
}

/// A particle alive at the horizon, with its norm and direction.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtremalRecord {
    pub id: usize,
    pub norm: f64,
    /// Unit vector; `e1` when the particle sits at the origin.
    pub direction: Vec<f64>,
}

fn record(tree: &BbmTree, id: usize) -> ExtremalRecord {
    let x = tree.final_position(id);
    let n = norm(x);
    let direction = if n > 0.0 {
        x.iter().map(|v| v / n).collect()
    } else {
        let mut e = vec![0.0; tree.dim];
        e[0] = 1.0;
        e
    };
    ExtremalRecord { id, norm: n, direction }
}

/// Leaf of maximal norm; ties go to the smallest id.
pub fn max_norm_particle(tree: &BbmTree) -> ExtremalRecord {
    let mut best = tree.leaf_ids[0];
    let mut best_n = norm(tree.final_position(best));
    for &id in &tree.leaf_ids[1..] {
        let n = norm(tree.final_position(id));
        if n > best_n {
            best = id;
            best_n = n;
        }
    }
    record(tree, best)
}

/// Death time of the most recent common ancestor of two leaves; the horizon
/// when `u == v`.
pub fn split_time(tree: &BbmTree, u: usize, v: usize) -> Result<f64> {
    for id in [u, v] {
        let n = tree.node(id)?;
        if n.children.is_some() {
            return Err(Error::Lookup(id));
        }
    }
    if u == v {
        return Ok(tree.horizon);
    }
    let (mut a, mut b) = (u, v);
    let (mut da, mut db) = (tree.depth(a), tree.depth(b));
    while da > db {
        a = tree.nodes[a].parent.unwrap();
        da -= 1;
    }
    while db > da {
        b = tree.nodes[b].parent.unwrap();
        db -= 1;
    }
    while a != b {
        a = tree.nodes[a].parent.unwrap();
        b = tree.nodes[b].parent.unwrap();
    }
    Ok(tree.nodes[a].final_time)
}

/// Leader of one clan: the maximal-norm descendant of an ancestor alive at `t - ell`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClanLeader {
    pub ancestor: usize,
    pub leader: ExtremalRecord,
}

/// For each ancestor alive at `horizon - ell`, the maximal-norm leaf among its
/// descendants. Sorted by decreasing norm (ties by leaf id).
///
/// Two leaves are in the same clan iff their split time is at least
/// `horizon - ell`; the representative ancestor of a leaf is the earliest node
/// on its lineage whose final time reaches that level.
pub fn clan_leaders(tree: &BbmTree, ell: f64) -> Result<Vec<ClanLeader>> {
    if !(ell > 0.0 && ell <= tree.horizon) {
        return Err(Error::Parameter(format!("ell must lie in (0, {}], got {ell}", tree.horizon)));
    }
    let level = tree.horizon - ell;
    let n = tree.nodes.len();
    // Parents always precede children in id order.
    let mut clan = vec![0usize; n];
    for node in &tree.nodes {
        clan[node.id] = match node.parent {
            Some(p) if tree.nodes[p].final_time >= level => clan[p],
            _ => node.id,
        };
    }
    let mut best: Vec<Option<(f64, usize)>> = vec![None; n];
    for &leaf in &tree.leaf_ids {
        let c = clan[leaf];
        let r = norm(tree.final_position(leaf));
        match best[c] {
            Some((bn, bid)) if bn > r || (bn == r && bid < leaf) => {}
            _ => best[c] = Some((r, leaf)),
        }
    }
    let mut out: Vec<ClanLeader> = best
        .iter()
        .enumerate()
        .filter_map(|(a, b)| b.map(|(_, leaf)| ClanLeader { ancestor: a, leader: record(tree, leaf) }))
        .collect();
    out.sort_by(|x, y| y.leader.norm.total_cmp(&x.leader.norm).then(x.leader.id.cmp(&y.leader.id)));
    Ok(out)
}
