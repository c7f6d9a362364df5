//! Limiting cluster samples, and X_L against the simplified front at small L.
use frontlab::bbm::DEFAULT_PARTICLE_CAP;
use frontlab::cluster::{sample_limit_cluster, simplified_front_run, ClusterConfig};
use frontlab::front::{linear_s_grid, FrontParams, ThetaSet};
use frontlab::RngStream;

fn main() -> frontlab::Result<()> {
    let root = RngStream::new(5);
    let cfg = ClusterConfig { horizon: 5.0, ..ClusterConfig::default() };
    let c = sample_limit_cluster(&cfg, None, &root.derive(0))?;
    let attempts: u64 = c.clouds.iter().map(|k| k.attempts).sum();
    println!(
        "cluster: {} points from {} clouds ({attempts} rejection attempts)",
        c.cloud.len(),
        c.clouds.len()
    );

    let params = FrontParams::new(linear_s_grid(1.0, 10), ThetaSet::grid(2, 1)?, 0.2);
    for l in [2.0, 3.0, 4.0] {
        let run = simplified_front_run(l, &params, 48, DEFAULT_PARTICLE_CAP, &root.derive(1))?;
        println!(
            "L={l}: window [{:.2}, {:.2}], {} clouds, X_L(1)={:.3}, coupling gap {:.3}",
            run.window.0,
            run.window.1,
            run.clouds_used,
            run.xl.last().copied().unwrap_or(0.0),
            run.coupling_gap()
        );
    }
    Ok(())
}
