//! Median of rho(s) over replicas and its log-log slope.
use frontlab::rho::{sample_rho, RhoConfig};
use frontlab::stats::{fit_power_law, median};
use frontlab::RngStream;

fn main() -> frontlab::Result<()> {
    let s: Vec<f64> = (0..8).map(|i| 0.5 * 2f64.powf(i as f64 * 3.0 / 7.0)).collect();
    let root = RngStream::new(11);
    let paths: Vec<Vec<f64>> = (0..300)
        .map(|i| sample_rho(&s, &RhoConfig::default(), &root.derive(i)).map(|r| r.rho))
        .collect::<frontlab::Result<_>>()?;
    let med: Vec<f64> =
        (0..s.len()).map(|j| median(&paths.iter().map(|p| p[j]).collect::<Vec<_>>())).collect::<frontlab::Result<_>>()?;
    for (a, m) in s.iter().zip(&med) {
        println!("s={a:.3} median rho={m:.4}");
    }
    let fit = fit_power_law(&s, &med)?;
    println!("slope {:.3} (r^2 {:.4})", fit.exponent, fit.r_squared);
    Ok(())
}
