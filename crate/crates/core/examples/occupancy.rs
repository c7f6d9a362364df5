//! Occupancy probability along a ray around the occupancy front.
use frontlab::bbm::{occupancy_front, DEFAULT_PARTICLE_CAP};
use frontlab::stats::estimate_occupancy_profile;
use frontlab::RngStream;

fn main() -> frontlab::Result<()> {
    let t = 8.0;
    let m = occupancy_front(2, t);
    let radii = [0.0, 3.0, 6.0, m, 11.0];
    let xs: Vec<Vec<f64>> = radii.iter().map(|r| vec![*r, 0.0]).collect();
    let est = estimate_occupancy_profile(2, t, &xs, 0.25, 1000, &RngStream::new(9), DEFAULT_PARTICLE_CAP)?;
    println!("occupancy front at t={t}: {m:.3}");
    for (r, e) in radii.iter().zip(&est) {
        println!("|x|={r:>6.3}: {:.4} ± {:.4}", e.value, e.stderr);
    }
    Ok(())
}
