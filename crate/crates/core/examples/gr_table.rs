//! Build a small GrTable, save it, and sample a tilted-mode spine with it.
use frontlab::cluster::{build_gr_table, sample_spine, GrConfig, GrTable, SpineMode, TiltConfig};
use frontlab::paths::TimeGrid;
use frontlab::RngStream;

fn main() -> frontlab::Result<()> {
    let cfg = GrConfig { replicas: 400, ..GrConfig::default() };
    let table = build_gr_table(&cfg, &RngStream::new(1))?;
    let path = std::env::temp_dir().join("frontlab_gr_example.csv");
    table.write_csv(&path)?;
    let table = GrTable::read_csv(&path, cfg.replicas)?;
    println!("G(4, 0) = {:.4}, G(4, 4) = {:.4}, tail constant {:.3}", table.eval(4.0, 0.0), table.eval(4.0, 4.0), table.bound_c);

    let grid = TimeGrid::uniform(20.0, 400)?;
    let spine = sample_spine(SpineMode::Tilted, 2, &grid, &RngStream::new(2), Some(&table), &TiltConfig::default())?;
    println!(
        "tilted spine: b={:.3}, weight={:.3e}, tail bias <= {:.2e}, A at horizon {:.3}",
        spine.b.unwrap_or(f64::NAN),
        spine.weight,
        spine.tail_bias,
        spine.a.last().unwrap()
    );
    Ok(())
}
