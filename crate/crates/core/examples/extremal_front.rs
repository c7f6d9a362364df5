//! Front of the extremal cluster of a 3-d BBM at time 8.
use frontlab::bbm::{simulate_bbm, DEFAULT_PARTICLE_CAP};
use frontlab::front::{front_of_bbm, linear_s_grid, ConeMode, FrontParams, ThetaSet};
use frontlab::RngStream;

fn main() -> frontlab::Result<()> {
    let tree = simulate_bbm(3, 8.0, &RngStream::new(7), DEFAULT_PARTICLE_CAP)?;
    let mut params = FrontParams::new(linear_s_grid(8.0, 8), ThetaSet::grid(3, 4)?, 0.2);
    params.cone_mode = ConeMode::Signed;
    let front = front_of_bbm(&tree, &params)?;
    print!("{:>6}", "s");
    for th in &front.thetas {
        print!(" ({:+.2},{:+.2})", th[0], th[1]);
    }
    println!();
    for (i, s) in front.s.iter().enumerate() {
        print!("{s:>6.2}");
        for h in front.row(i) {
            print!(" {h:>13.4}");
        }
        println!();
    }
    Ok(())
}
