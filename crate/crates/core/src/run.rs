//! Configured ensemble runs writing CSV/JSON artifacts and a manifest.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bbm::{centering, max_norm_particle, simulate_bbm, BbmTree, DEFAULT_PARTICLE_CAP};
use crate::cluster::{
    build_gr_table, sample_limit_cluster, simplified_front_run, CloudExtent, ClusterConfig, GrConfig, GrTable,
    IntensityMode, LimitCluster, SimplifiedRun, SpineMode, TiltConfig,
};
use crate::error::{Error, Result};
use crate::front::{extremal_landscape, front_of_bbm, linear_s_grid, ConeMode, FrontParams, FrontSurface, Tag, ThetaSet};
use crate::rho::{revolve_surface, sample_rho, RhoConfig, RhoSample};
use crate::rng::{derive_stream, RngStream};
use crate::stats::VerifyReport;
use crate::verify::{run_suite, SUITES};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "FRONTLAB_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "frontlab-out";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Bbm,
    Front,
    Landscape,
    Cluster,
    Rho,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Bbm => "bbm",
            Command::Front => "front",
            Command::Landscape => "landscape",
            Command::Cluster => "cluster",
            Command::Rho => "rho",
            Command::Verify => "verify",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::Parameter(format!("format must be csv|json, got {s}"))),
        }
    }
}

/// Everything a run depends on. `None` fields take per-command defaults in
/// [`RunConfig::resolved`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub dim: usize,
    /// BBM time `t`, or the branching horizon for `cluster`.
    pub horizon: Option<f64>,
    /// Scale for the simplified front (cluster command only).
    pub l: Option<f64>,
    pub epsilon: f64,
    pub slab_width: f64,
    pub s_max: Option<f64>,
    pub s_steps: usize,
    pub theta_steps: usize,
    pub sigma_horizon: Option<f64>,
    pub replicas: Option<usize>,
    pub seed: u64,
    pub particle_cap: usize,
    pub spine_mode: SpineMode,
    pub intensity_mode: IntensityMode,
    pub cone_mode: ConeMode,
    /// Clan scale for `landscape`.
    pub ell: f64,
    /// Number of landscape entries whose clusters are exported.
    pub clusters: usize,
    /// Cloud window depth for `cluster`; full clouds when absent.
    pub window_depth: Option<f64>,
    pub budget: u64,
    pub grid_steps: usize,
    /// Cached GrTable CSV, built on first use (tilted modes).
    pub gr_table: Option<PathBuf>,
    pub gr_replicas: usize,
    /// Also export `rho` as a rotationally symmetric surface.
    pub surface: bool,
    pub suite: String,
    pub output: Option<PathBuf>,
    pub format: Format,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            dim: 2,
            horizon: None,
            l: None,
            epsilon: 0.2,
            slab_width: 1.0,
            s_max: None,
            s_steps: 20,
            theta_steps: 8,
            sigma_horizon: None,
            replicas: None,
            seed: 0,
            particle_cap: DEFAULT_PARTICLE_CAP,
            spine_mode: SpineMode::Approximate,
            intensity_mode: IntensityMode::Rate2,
            cone_mode: ConeMode::Signed,
            ell: 1.0,
            clusters: 5,
            window_depth: None,
            budget: 10_000,
            grid_steps: 600,
            gr_table: None,
            gr_replicas: 4000,
            surface: false,
            suite: "all".into(),
            output: None,
            format: Format::Csv,
        }
    }

    /// Fills per-command defaults. The output directory falls back to
    /// `$FRONTLAB_OUT_DIR`, then `frontlab-out`.
    pub fn resolved(&self) -> RunConfig {
        let mut c = self.clone();
        c.horizon.get_or_insert(match c.command {
            Command::Cluster => 6.0,
            _ => 10.0,
        });
        c.s_max.get_or_insert(match c.command {
            Command::Rho => 4.0,
            Command::Cluster => 1.0,
            _ => 10.0,
        });
        if c.command != Command::Verify {
            c.replicas.get_or_insert(1);
        }
        if c.output.is_none() {
            c.output = Some(std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| DEFAULT_OUT_DIR.into()));
        }
        c
    }

    fn needs_front_dim(&self) -> bool {
        matches!(self.command, Command::Front | Command::Landscape | Command::Cluster | Command::Rho)
    }

    fn needs_gr(&self) -> bool {
        self.command == Command::Cluster
            && (self.spine_mode == SpineMode::Tilted || self.intensity_mode == IntensityMode::Tilted)
    }
}

/// Violations of the config's invariants, each starting with the field name.
pub fn validate(cfg: &RunConfig) -> Vec<String> {
    let mut v = Vec::new();
    let c = cfg.resolved();
    if c.dim == 0 {
        v.push("dim: dim >= 1 required".to_string());
    } else if c.needs_front_dim() && c.dim < 2 {
        v.push(format!("dim: d ≥ 2 required for {} (got {})", c.command.name(), c.dim));
    }
    if !(c.epsilon > 0.0 && c.epsilon < 1.0) {
        v.push(format!("epsilon: epsilon ∈ (0,1) required (got {})", c.epsilon));
    }
    if !(c.slab_width > 0.0 && c.slab_width.is_finite()) {
        v.push(format!("slab_width: must be positive and finite (got {})", c.slab_width));
    }
    let h = c.horizon.unwrap_or(0.0);
    if !(h >= 0.0 && h.is_finite()) {
        v.push(format!("horizon: must be finite and >= 0 (got {h})"));
    } else if c.command == Command::Cluster && h <= 0.0 {
        v.push("horizon: cluster horizon must be positive".to_string());
    }
    let s_max = c.s_max.unwrap_or(1.0);
    if !(s_max > 0.0 && s_max.is_finite()) {
        v.push(format!("s_max: must be positive and finite (got {s_max})"));
    }
    if c.s_steps == 0 {
        v.push("s_steps: must be >= 1".to_string());
    }
    if c.theta_steps == 0 {
        v.push("theta_steps: must be >= 1".to_string());
    }
    if let Some(sh) = c.sigma_horizon {
        if !(sh > 0.0 && sh.is_finite()) {
            v.push(format!("sigma_horizon: must be positive and finite (got {sh})"));
        }
    }
    if c.replicas == Some(0) {
        v.push("replicas: replicas ≥ 1 required".to_string());
    }
    if c.particle_cap == 0 {
        v.push("particle_cap: must be >= 1".to_string());
    }
    if let Some(l) = c.l {
        if !(l >= 1.0 && l.is_finite()) {
            v.push(format!("l: L >= 1 required (got {l})"));
        }
    }
    if c.command == Command::Landscape && !(c.ell > 0.0 && c.ell <= h) {
        v.push(format!("ell: ell ∈ (0, horizon] required (got {})", c.ell));
    }
    if let Some(d) = c.window_depth {
        if !(d >= 0.0 && d.is_finite()) {
            v.push(format!("window_depth: must be finite and >= 0 (got {d})"));
        }
    }
    if c.budget == 0 {
        v.push("budget: must be >= 1".to_string());
    }
    if c.grid_steps == 0 {
        v.push("grid_steps: must be >= 1".to_string());
    }
    if c.needs_gr() && c.gr_table.is_none() {
        v.push("gr_table: tilted modes need a GrTable path".to_string());
    }
    if c.gr_replicas == 0 {
        v.push("gr_replicas: must be >= 1".to_string());
    }
    if c.command == Command::Verify && c.suite != "all" && !SUITES.contains(&c.suite.as_str()) {
        v.push(format!("suite: unknown suite {} (expected one of {} or all)", c.suite, SUITES.join(", ")));
    }
    v
}

/// Process exit code for an error class.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Capacity { .. } => 3,
        Error::Budget { .. } => 4,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => 5,
        _ => 2,
    }
}

/// One-line JSON description of an error.
pub fn error_json(e: &Error) -> String {
    serde_json::json!({ "error": e.kind(), "message": e.to_string(), "exit_code": exit_code(e) }).to_string()
}

/// A table cell. Floats print with Rust's shortest round-trip formatting.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    F(f64),
    U(u64),
    S(String),
    Null,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::F(x) => x.to_string(),
            Cell::U(x) => x.to_string(),
            Cell::S(s) => s.clone(),
            Cell::Null => String::new(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::F(x) => serde_json::json!(x),
            Cell::U(x) => serde_json::json!(x),
            Cell::S(s) => serde_json::json!(s),
            Cell::Null => serde_json::Value::Null,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::csv))?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    /// `{"columns": [...], "rows": [[...], ...]}`, NaN as null.
    pub fn to_json(&self) -> Result<Vec<u8>> {
        let rows: Vec<Vec<serde_json::Value>> = self.rows.iter().map(|r| r.iter().map(Cell::json).collect()).collect();
        let mut out = serde_json::to_vec(&serde_json::json!({ "columns": self.columns, "rows": rows }))?;
        out.push(b'\n');
        Ok(out)
    }
}

fn coords(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("{prefix}{k}")).collect()
}

fn floats(x: &[f64]) -> impl Iterator<Item = Cell> + '_ {
    x.iter().map(|v| Cell::F(*v))
}

/// Front CSV: `s,theta_index,theta_1..theta_{d-1},height`.
pub fn front_table(f: &FrontSurface) -> Table {
    let mut cols = vec!["s".to_string(), "theta_index".to_string()];
    cols.extend(coords("theta_", f.dim - 1));
    cols.push("height".into());
    let mut t = Table::new(cols);
    for (i, s) in f.s.iter().enumerate() {
        for (j, th) in f.thetas.iter().enumerate() {
            let mut row = vec![Cell::F(*s), Cell::U(j as u64)];
            row.extend(floats(th));
            row.push(Cell::F(f.height(i, j)));
            t.push(row);
        }
    }
    t
}

/// Tree CSV: `replica,id,parent_id,birth_time,final_time,x1..xd`.
pub fn tree_table(trees: &[BbmTree]) -> Table {
    let d = trees.first().map_or(1, |t| t.dim);
    let mut cols: Vec<String> = ["replica", "id", "parent_id", "birth_time", "final_time"].map(String::from).into();
    cols.extend(coords("x", d));
    let mut t = Table::new(cols);
    for (r, tree) in trees.iter().enumerate() {
        for n in &tree.nodes {
            let mut row = vec![
                Cell::U(r as u64),
                Cell::U(n.id as u64),
                n.parent.map_or(Cell::Null, |p| Cell::U(p as u64)),
                Cell::F(n.birth_time),
                Cell::F(n.final_time),
            ];
            row.extend(floats(tree.final_position(n.id)));
            t.push(row);
        }
    }
    t
}

/// Cluster CSV: `replica,point_index,x1..xd,source,branch_time`.
pub fn cluster_table(clusters: &[LimitCluster]) -> Table {
    let d = clusters.first().map_or(2, |c| c.cloud.dim);
    let mut cols = vec!["replica".to_string(), "point_index".to_string()];
    cols.extend(coords("x", d));
    cols.push("source".into());
    cols.push("branch_time".into());
    let mut t = Table::new(cols);
    for (r, c) in clusters.iter().enumerate() {
        for i in 0..c.cloud.len() {
            let mut row = vec![Cell::U(r as u64), Cell::U(i as u64)];
            row.extend(floats(c.cloud.point(i)));
            row.push(Cell::S(match c.cloud.tags[i] {
                Tag::Origin => "origin".into(),
                Tag::Cloud(k) => format!("cloud_{k}"),
                Tag::Particle(k) => format!("particle_{k}"),
                Tag::Unlabeled => "unlabeled".into(),
            }));
            row.push(c.cloud.times[i].map_or(Cell::Null, Cell::F));
            t.push(row);
        }
    }
    t
}

/// rho CSV: `replica,s,rho,argmax_sigma`.
pub fn rho_table(samples: &[RhoSample]) -> Table {
    let mut t = Table::new(["replica", "s", "rho", "argmax_sigma"]);
    for (r, smp) in samples.iter().enumerate() {
        for k in 0..smp.s.len() {
            t.push(vec![Cell::U(r as u64), Cell::F(smp.s[k]), Cell::F(smp.rho[k]), Cell::F(smp.argmax_sigma[k])]);
        }
    }
    t
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<serde_json::Value>,
    pub config: RunConfig,
    pub artifacts: Vec<Artifact>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Outcome of a successful run.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub output: PathBuf,
    pub artifacts: Vec<Artifact>,
    /// Present for `verify`.
    pub report: Option<VerifyReport>,
}

struct Writer {
    dir: PathBuf,
    format: Format,
    artifacts: Vec<Artifact>,
}

impl Writer {
    fn bytes(&mut self, name: String, data: &[u8]) -> Result<()> {
        std::fs::write(self.dir.join(&name), data)?;
        let digest = Sha256::digest(data);
        let sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.artifacts.push(Artifact { file: name, sha256 });
        Ok(())
    }

    fn table(&mut self, stem: &str, t: &Table) -> Result<()> {
        match self.format {
            Format::Csv => self.bytes(format!("{stem}.csv"), &t.to_csv()?),
            Format::Json => self.bytes(format!("{stem}.json"), &t.to_json()?),
        }
    }
}

/// Runs replicas in parallel; the error of the lowest failing index wins.
fn ensemble<T: Send>(n: usize, root: &RngStream, f: impl Fn(usize, &RngStream) -> Result<T> + Sync) -> Result<Vec<T>> {
    let out: Vec<Result<T>> = (0..n).into_par_iter().map(|i| f(i, &derive_stream(root, i as u64))).collect();
    out.into_iter().collect()
}

fn front_params(c: &RunConfig) -> Result<FrontParams> {
    let p = FrontParams {
        s_grid: linear_s_grid(c.s_max.unwrap_or(1.0), c.s_steps),
        thetas: ThetaSet::grid(c.dim, c.theta_steps)?,
        epsilon: c.epsilon,
        slab_width: c.slab_width,
        cone_mode: c.cone_mode,
    };
    p.validate()?;
    Ok(p)
}

fn load_gr(c: &RunConfig) -> Result<Option<GrTable>> {
    if !c.needs_gr() {
        return Ok(None);
    }
    let path = c.gr_table.as_ref().ok_or_else(|| Error::Configuration("tilted modes need a GrTable path".into()))?;
    if path.exists() {
        return GrTable::read_csv(path, c.gr_replicas).map(Some);
    }
    let cfg = GrConfig { replicas: c.gr_replicas, particle_cap: c.particle_cap, ..GrConfig::default() };
    let table = build_gr_table(&cfg, &RngStream::new(c.seed).derive_path(&[u64::MAX, 0]))?;
    table.write_csv(path)?;
    Ok(Some(table))
}

fn execute(c: &RunConfig, w: &mut Writer) -> Result<Option<VerifyReport>> {
    let root = RngStream::new(c.seed);
    let n = c.replicas.unwrap_or(1);
    let t = c.horizon.unwrap_or(0.0);
    let cap = c.particle_cap;
    match c.command {
        Command::Bbm => {
            let trees = ensemble(n, &root, |_, r| simulate_bbm(c.dim, t, r, cap))?;
            w.table("bbm_tree", &tree_table(&trees))?;
            let m = centering(c.dim, t);
            let mut s = Table::new(["replica", "population", "max_norm", "recentered_max"]);
            for (i, tree) in trees.iter().enumerate() {
                let rec = max_norm_particle(tree);
                s.push(vec![Cell::U(i as u64), Cell::U(tree.population() as u64), Cell::F(rec.norm), Cell::F(rec.norm - m)]);
            }
            w.table("bbm_max", &s)?;
        }
        Command::Front => {
            let params = front_params(c)?;
            let fronts = ensemble(n, &root, |_, r| front_of_bbm(&simulate_bbm(c.dim, t, r, cap)?, &params))?;
            for (i, f) in fronts.iter().enumerate() {
                w.table(&format!("front_r{i:04}"), &front_table(f))?;
            }
        }
        Command::Landscape => {
            let tables = ensemble(n, &root, |_, r| {
                let tree = simulate_bbm(c.dim, t, r, cap)?;
                let land = extremal_landscape(&tree, c.ell)?;
                let mut cols = vec!["entry_index".to_string(), "recentered_norm".to_string()];
                cols.extend(coords("dir_", c.dim));
                let mut entries = Table::new(cols);
                for (k, e) in land.entries.iter().enumerate() {
                    let mut row = vec![Cell::U(k as u64), Cell::F(e.recentered_norm)];
                    row.extend(floats(&e.direction));
                    entries.push(row);
                }
                let mut cols = vec!["entry_index".to_string(), "point_index".to_string()];
                cols.extend(coords("x", c.dim));
                let mut clusters = Table::new(cols);
                for k in 0..land.len().min(c.clusters) {
                    let cl = land.cluster(k);
                    for (j, p) in cl.iter().enumerate() {
                        let mut row = vec![Cell::U(k as u64), Cell::U(j as u64)];
                        row.extend(floats(p));
                        clusters.push(row);
                    }
                }
                Ok((entries, clusters))
            })?;
            for (i, (e, cl)) in tables.iter().enumerate() {
                w.table(&format!("landscape_r{i:04}"), e)?;
                w.table(&format!("landscape_clusters_r{i:04}"), cl)?;
            }
        }
        Command::Cluster => {
            let gr = load_gr(c)?;
            let cfg = ClusterConfig {
                dim: c.dim,
                horizon: t,
                grid_steps: c.grid_steps,
                spine_mode: c.spine_mode,
                intensity_mode: c.intensity_mode,
                extent: c.window_depth.map_or(CloudExtent::Full, |depth| CloudExtent::Window { depth }),
                budget: c.budget,
                particle_cap: cap,
                tilt: TiltConfig::default(),
            };
            let clusters = ensemble(n, &root, |_, r| sample_limit_cluster(&cfg, gr.as_ref(), r))?;
            w.table("cluster", &cluster_table(&clusters))?;
            let mut cols: Vec<String> = ["replica", "t", "a", "a_hat"].map(String::from).into();
            cols.extend(coords("y", c.dim - 1));
            cols.push("weight".into());
            let mut sp = Table::new(cols);
            for (i, cl) in clusters.iter().enumerate() {
                let s = &cl.spine;
                for k in 0..s.len() {
                    let mut row = vec![Cell::U(i as u64), Cell::F(s.times[k]), Cell::F(s.a[k]), Cell::F(s.a_hat[k])];
                    row.extend(floats(s.y.at(k)));
                    row.push(Cell::F(s.weight));
                    sp.push(row);
                }
            }
            w.table("cluster_spine", &sp)?;
            if let Some(l) = c.l {
                let params = front_params(c)?;
                let runs: Vec<SimplifiedRun> =
                    ensemble(n, &root.derive(u64::MAX), |_, r| simplified_front_run(l, &params, 48, cap, r))?;
                let mut xl = Table::new(["replica", "s", "xl"]);
                let mut summary =
                    Table::new(["replica", "window_lo", "window_hi", "clouds_used", "miss_bound", "coupling_gap"]);
                for (i, run) in runs.iter().enumerate() {
                    for (s, x) in params.s_grid.iter().zip(&run.xl) {
                        xl.push(vec![Cell::U(i as u64), Cell::F(*s), Cell::F(*x)]);
                    }
                    summary.push(vec![
                        Cell::U(i as u64),
                        Cell::F(run.window.0),
                        Cell::F(run.window.1),
                        Cell::U(run.clouds_used as u64),
                        Cell::F(run.miss_bound),
                        Cell::F(run.coupling_gap()),
                    ]);
                    w.table(&format!("simplified_front_r{i:04}"), &front_table(&run.front))?;
                }
                w.table("simplified_xl", &xl)?;
                w.table("simplified_summary", &summary)?;
            }
        }
        Command::Rho => {
            let rcfg = RhoConfig { horizon: c.sigma_horizon, ..RhoConfig::default() };
            let s = linear_s_grid(c.s_max.unwrap_or(1.0), c.s_steps);
            let samples = ensemble(n, &root, |_, r| sample_rho(&s, &rcfg, r))?;
            w.table("rho", &rho_table(&samples))?;
            if c.surface {
                let thetas = ThetaSet::grid(c.dim, c.theta_steps)?;
                for (i, smp) in samples.iter().enumerate() {
                    w.table(&format!("rho_surface_r{i:04}"), &front_table(&revolve_surface(smp, &thetas)))?;
                }
            }
        }
        Command::Verify => {
            let report = VerifyReport { checks: run_suite(&c.suite, c.replicas, c.seed)? };
            let mut json = report.to_json()?.into_bytes();
            json.push(b'\n');
            w.bytes("verify.json".into(), &json)?;
            if w.format == Format::Csv {
                let mut t = Table::new(["check_id", "statistic", "threshold", "pass", "n", "seed", "note"]);
                for r in &report.checks {
                    t.push(vec![
                        Cell::S(r.check_id.clone()),
                        Cell::F(r.statistic),
                        Cell::F(r.threshold),
                        Cell::S(r.pass.to_string()),
                        Cell::U(r.n as u64),
                        Cell::U(r.seed),
                        r.note.clone().map_or(Cell::Null, Cell::S),
                    ]);
                }
                w.table("verify", &t)?;
            }
            return Ok(Some(report));
        }
    }
    Ok(None)
}

fn write_manifest(dir: &Path, m: &Manifest) -> Result<()> {
    let mut s = serde_json::to_vec_pretty(m)?;
    s.push(b'\n');
    std::fs::write(dir.join(MANIFEST_FILE), s)?;
    Ok(())
}

/// Validates, runs and writes artifacts plus `manifest.json` into the output
/// directory. A manifest is written on failure too, once the directory exists.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    let c = config.resolved();
    let violations = validate(&c);
    let dir = c.output.clone().expect("resolved output");
    if !violations.is_empty() {
        let e = Error::Configuration(violations.join("; "));
        if std::fs::create_dir_all(&dir).is_ok() {
            let _ = write_manifest(&dir, &manifest(&c, Vec::new(), Some(&e)));
        }
        return Err(e);
    }
    std::fs::create_dir_all(&dir)?;
    let mut w = Writer { dir: dir.clone(), format: c.format, artifacts: Vec::new() };
    match execute(&c, &mut w) {
        Ok(report) => {
            write_manifest(&dir, &manifest(&c, w.artifacts.clone(), None))?;
            Ok(RunSummary { output: dir, artifacts: w.artifacts, report })
        }
        Err(e) => {
            let _ = write_manifest(&dir, &manifest(&c, w.artifacts, Some(&e)));
            Err(e)
        }
    }
}

fn manifest(c: &RunConfig, artifacts: Vec<Artifact>, err: Option<&Error>) -> Manifest {
    Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        status: if err.is_some() { "error".into() } else { "ok".into() },
        error: err.map(|e| serde_json::json!({ "kind": e.kind(), "message": e.to_string(), "exit_code": exit_code(e) })),
        config: c.clone(),
        artifacts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(cmd: Command) -> RunConfig {
        let mut c = RunConfig::new(cmd);
        c.output = Some("unused".into());
        c
    }

    #[test]
    fn valid_default_configs() {
        for cmd in [Command::Bbm, Command::Front, Command::Landscape, Command::Cluster, Command::Rho, Command::Verify] {
            assert!(validate(&cfg(cmd)).is_empty(), "{cmd:?}: {:?}", validate(&cfg(cmd)));
        }
    }

    #[test]
    fn epsilon_violation_names_field() {
        let mut c = cfg(Command::Front);
        c.epsilon = 1.5;
        let v = validate(&c);
        assert_eq!(v.len(), 1);
        assert!(v[0].starts_with("epsilon") && v[0].contains("epsilon ∈ (0,1)"));
    }

    #[test]
    fn dim_one_front_rejected() {
        let mut c = cfg(Command::Front);
        c.dim = 1;
        let v = validate(&c);
        assert!(v.iter().any(|s| s.starts_with("dim") && s.contains("d ≥ 2")), "{v:?}");
        // bbm allows d = 1
        let mut b = cfg(Command::Bbm);
        b.dim = 1;
        assert!(validate(&b).is_empty());
    }

    #[test]
    fn tilted_needs_table() {
        let mut c = cfg(Command::Cluster);
        c.spine_mode = SpineMode::Tilted;
        assert!(validate(&c).iter().any(|s| s.starts_with("gr_table")));
    }

    #[test]
    fn exit_codes_per_class() {
        assert_eq!(exit_code(&Error::Capacity { cap: 1, time: 0.0 }), 3);
        assert_eq!(exit_code(&Error::Budget { attempts: 1, accepted: 0 }), 4);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), 5);
        assert_eq!(exit_code(&Error::Configuration("x".into())), 2);
        let j: serde_json::Value = serde_json::from_str(&error_json(&Error::Budget { attempts: 3, accepted: 0 })).unwrap();
        assert_eq!(j["exit_code"], 4);
        assert_eq!(j["error"], "budget");
    }

    #[test]
    fn csv_and_json_mirror() {
        let mut t = Table::new(["a", "b"]);
        t.push(vec![Cell::F(0.5), Cell::Null]);
        t.push(vec![Cell::U(3), Cell::F(f64::NAN)]);
        assert_eq!(String::from_utf8(t.to_csv().unwrap()).unwrap(), "a,b\n0.5,\n3,NaN\n");
        let j: serde_json::Value = serde_json::from_slice(&t.to_json().unwrap()).unwrap();
        assert_eq!(j["columns"][1], "b");
        assert_eq!(j["rows"][0][0], 0.5);
        assert!(j["rows"][1][1].is_null());
    }
}
