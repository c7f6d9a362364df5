//! Simulate a 2-d BBM to time 8 and inspect its genealogy.
use frontlab::bbm::{centering, clan_leaders, max_norm_particle, simulate_bbm, split_time, DEFAULT_PARTICLE_CAP};
use frontlab::RngStream;

fn main() -> frontlab::Result<()> {
    let t = 8.0;
    let tree = simulate_bbm(2, t, &RngStream::new(42), DEFAULT_PARTICLE_CAP)?;
    let top = max_norm_particle(&tree);
    println!("particles at t={t}: {}", tree.population());
    println!("max norm {:.4} (centering {:.4}), direction {:?}", top.norm, centering(2, t), top.direction);

    let leaders = clan_leaders(&tree, 1.0)?;
    println!("clans at scale 1: {}", leaders.len());
    if leaders.len() >= 2 {
        let (a, b) = (leaders[0].leader.id, leaders[1].leader.id);
        println!("two highest clan leaders split at time {:.4}", split_time(&tree, a, b)?);
    }
    Ok(())
}
