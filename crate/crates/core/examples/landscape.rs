//! Extremal landscape: clan leaders with their recentred norms and clusters.
use frontlab::bbm::{simulate_bbm, DEFAULT_PARTICLE_CAP};
use frontlab::front::extremal_landscape;
use frontlab::RngStream;

fn main() -> frontlab::Result<()> {
    let tree = simulate_bbm(2, 9.0, &RngStream::new(3), DEFAULT_PARTICLE_CAP)?;
    let land = extremal_landscape(&tree, 2.0)?;
    println!("{} clans at scale {}", land.len(), land.ell);
    for (k, e) in land.entries.iter().take(5).enumerate() {
        let cl = land.cluster(k);
        let near = cl.iter().filter(|p| p[0] > -2.0).count();
        println!(
            "#{k}: recentred norm {:+.3}, direction ({:+.3}, {:+.3}), {near} points within 2 behind the leader",
            e.recentered_norm, e.direction[0], e.direction[1]
        );
    }
    Ok(())
}
