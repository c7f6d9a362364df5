//! Run a couple of quick verification suites and print the JSON report.
use frontlab::stats::VerifyReport;
use frontlab::verify::run_suite;

fn main() -> frontlab::Result<()> {
    let mut checks = run_suite("oracles", Some(50), 1)?;
    checks.extend(run_suite("conditioning", Some(50), 1)?);
    let report = VerifyReport { checks };
    println!("{}", report.to_json()?);
    println!("all pass: {}", report.all_pass());
    Ok(())
}
