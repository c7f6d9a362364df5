use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use frontlab::cluster::{IntensityMode, SpineMode};
use frontlab::front::ConeMode;
use frontlab::run::{error_json, exit_code, run, validate, Command, Format, RunConfig};

#[derive(Parser)]
#[command(name = "frontlab", version, about = "Extremal fronts of multidimensional branching Brownian motion")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate BBM genealogies and export the particle trees.
    Bbm(Opts),
    /// Fronts of extremal clusters of simulated BBM.
    Front(Opts),
    /// Clan leaders and their clusters.
    Landscape(Opts),
    /// Limiting clusters; with --l also X_L and the simplified front.
    Cluster(Opts),
    /// The rho transform of Bessel(3) paths.
    Rho(Opts),
    /// Run verification suites and write a JSON report.
    Verify(Opts),
}

#[derive(Args)]
struct Opts {
    #[arg(long)]
    dim: Option<usize>,
    /// Time horizon.
    #[arg(long = "t", visible_alias = "horizon")]
    horizon: Option<f64>,
    #[arg(long = "l", visible_alias = "L")]
    l: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    slab_width: Option<f64>,
    #[arg(long)]
    s_max: Option<f64>,
    #[arg(long)]
    s_steps: Option<usize>,
    #[arg(long)]
    theta_steps: Option<usize>,
    #[arg(long)]
    sigma_horizon: Option<f64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    particle_cap: Option<usize>,
    /// approximate | tilted
    #[arg(long)]
    spine_mode: Option<SpineMode>,
    /// rate2 | tilted
    #[arg(long)]
    intensity_mode: Option<IntensityMode>,
    /// signed | absolute
    #[arg(long)]
    cone_mode: Option<ConeMode>,
    #[arg(long)]
    ell: Option<f64>,
    /// Landscape entries whose clusters are exported.
    #[arg(long)]
    clusters: Option<usize>,
    /// Keep only cloud particles within this depth of zero.
    #[arg(long)]
    window_depth: Option<f64>,
    /// Rejection attempts per conditioned cloud.
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    grid_steps: Option<usize>,
    /// GrTable CSV, built and saved if missing.
    #[arg(long)]
    gr_table: Option<PathBuf>,
    #[arg(long)]
    gr_replicas: Option<usize>,
    /// Also write rho as a surface over the theta grid.
    #[arg(long)]
    surface: bool,
    #[arg(long)]
    suite: Option<String>,
    /// Output directory (default: $FRONTLAB_OUT_DIR or ./frontlab-out).
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// csv | json
    #[arg(long)]
    format: Option<Format>,
}

fn config(cmd: Cmd) -> RunConfig {
    let (command, o) = match cmd {
        Cmd::Bbm(o) => (Command::Bbm, o),
        Cmd::Front(o) => (Command::Front, o),
        Cmd::Landscape(o) => (Command::Landscape, o),
        Cmd::Cluster(o) => (Command::Cluster, o),
        Cmd::Rho(o) => (Command::Rho, o),
        Cmd::Verify(o) => (Command::Verify, o),
    };
    let mut c = RunConfig::new(command);
    macro_rules! set {
        ($($f:ident),*) => { $( if let Some(v) = o.$f { c.$f = v; } )* };
    }
    set!(dim, epsilon, slab_width, s_steps, theta_steps, seed, particle_cap, spine_mode, intensity_mode, cone_mode);
    set!(ell, clusters, budget, grid_steps, gr_replicas, suite, format);
    c.horizon = o.horizon;
    c.l = o.l;
    c.s_max = o.s_max;
    c.sigma_horizon = o.sigma_horizon;
    c.replicas = o.replicas;
    c.window_depth = o.window_depth;
    c.gr_table = o.gr_table;
    c.output = o.output;
    c.surface = o.surface;
    c
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let line = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", serde_json::json!({ "error": "usage", "message": line, "exit_code": 2 }));
            return ExitCode::from(2);
        }
    };
    let cfg = config(cli.command);
    let violations = validate(&cfg);
    if !violations.is_empty() {
        // run() still writes the error manifest
        let _ = run(&cfg);
        eprintln!("{}", serde_json::json!({ "error": "usage", "violations": violations, "exit_code": 2 }));
        return ExitCode::from(2);
    }
    match run(&cfg) {
        Ok(summary) => {
            println!("{}", summary.output.display());
            for a in &summary.artifacts {
                println!("  {} {}", a.sha256, a.file);
            }
            if let Some(r) = &summary.report {
                for c in &r.checks {
                    println!("{} {} statistic={} threshold={}", if c.pass { "PASS" } else { "FAIL" }, c.check_id, c.statistic, c.threshold);
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
