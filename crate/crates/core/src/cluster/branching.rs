//! Branching times of the cloud-emitting point process along the spine.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::gr::GrTable;
use super::spine::SpinePath;
use crate::error::{Error, Result};
use crate::rng::RngStream;

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum IntensityMode {
    /// Homogeneous rate 2.
    #[default]
    Rate2,
    /// Rate `2 P_{A_t}(M_t < 0)`, by thinning the rate-2 process.
    Tilted,
}

impl std::str::FromStr for IntensityMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rate2" => Ok(IntensityMode::Rate2),
            "tilted" => Ok(IntensityMode::Tilted),
            _ => Err(Error::Parameter(format!("intensity mode must be rate2|tilted, got {s}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BranchingTimes {
    pub times: Vec<f64>,
    pub mode: IntensityMode,
}

/// Times on `[0, horizon]`. Both modes consume the same (gap, uniform) pairs
/// from `rng`, so the tilted times are always a subset of the rate-2 times
/// drawn from the same stream.
pub fn sample_branching_times(
    spine: &SpinePath,
    horizon: f64,
    rng: &RngStream,
    mode: IntensityMode,
    gr: Option<&GrTable>,
) -> Result<BranchingTimes> {
    if !(horizon >= 0.0) || horizon > spine.horizon() {
        return Err(Error::Parameter(format!(
            "branching horizon {horizon} must lie in [0, {}]",
            spine.horizon()
        )));
    }
    if mode == IntensityMode::Tilted && gr.is_none() {
        return Err(Error::Configuration("tilted intensity requires a GrTable".into()));
    }
    let mut g = rng.generator();
    let mut t = 0.0;
    let mut times = Vec::new();
    loop {
        let gap: f64 = g.sample(Exp1);
        let u: f64 = g.random();
        t += gap / 2.0;
        if t > horizon {
            break;
        }
        let keep = match mode {
            IntensityMode::Rate2 => true,
            IntensityMode::Tilted => {
                // P_{A_t}(M_t < 0) = 1 - G_t(-sqrt2 A_hat_t).
                let p = 1.0 - gr.unwrap().eval(t, -SQRT2 * spine.a_hat_at(t));
                u < p
            }
        };
        if keep {
            times.push(t);
        }
    }
    Ok(BranchingTimes { times, mode })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::gr::{build_gr_table, GrConfig};
    use crate::cluster::spine::{sample_spine, SpineMode, TiltConfig};
    use crate::paths::TimeGrid;

    #[test]
    fn poisson_count_mean() {
        let grid = TimeGrid::uniform(10.0, 100).unwrap();
        let spine = sample_spine(SpineMode::Approximate, 2, &grid, &RngStream::new(1), None, &TiltConfig::default()).unwrap();
        let n = 2000;
        let total: usize = (0..n)
            .map(|i| sample_branching_times(&spine, 10.0, &RngStream::new(7).derive(i), IntensityMode::Rate2, None).unwrap().times.len())
            .sum();
        let mean = total as f64 / n as f64;
        let se = (20.0 / n as f64).sqrt();
        assert!((mean - 20.0).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn thinning_is_a_subset() {
        let grid = TimeGrid::uniform(10.0, 200).unwrap();
        let cfg = GrConfig {
            r_grid: vec![0.0, 1.0, 2.0, 4.0],
            x_grid: (-20..=20).map(|i| i as f64 * 0.5).collect(),
            replicas: 200,
            sim_r_max: 4.0,
            ..Default::default()
        };
        let gr = build_gr_table(&cfg, &RngStream::new(2)).unwrap();
        for seed in 0..10 {
            let spine = sample_spine(SpineMode::Approximate, 2, &grid, &RngStream::new(seed), None, &TiltConfig::default()).unwrap();
            let s = RngStream::new(100 + seed);
            let a = sample_branching_times(&spine, 10.0, &s, IntensityMode::Rate2, None).unwrap();
            let b = sample_branching_times(&spine, 10.0, &s, IntensityMode::Tilted, Some(&gr)).unwrap();
            assert!(b.times.len() <= a.times.len());
            assert!(b.times.iter().all(|t| a.times.contains(t)));
        }
    }
}
