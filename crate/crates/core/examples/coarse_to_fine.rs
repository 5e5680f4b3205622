//! A faint large disk under strong single-site speckle. The boundary error of
//! the disk shrinks long before the speckle sites stop flipping.

use stss::descent::{run_descent_with, DescentConfig, IntensityTerm};
use stss::fixtures::{offset_disk, two_scale};
use stss::grid::{LabelField, Partition};
use stss::solvers::SolverConfig;

fn main() -> stss::Result<()> {
    let fx = two_scale();
    let (w, h) = fx.image.dims();
    let coarse_error = |l: &LabelField| {
        (0..w * h)
            .filter(|&k| !fx.speckle.contains_index(k) && l.labels()[k] != fx.truth.labels()[k])
            .count()
    };
    let term = IntensityTerm { channels: std::slice::from_ref(&fx.image) };
    for seed in 0..3 {
        let mut history = Vec::new();
        let initial = Partition::from_labels(&offset_disk(w, h, seed), 2)?;
        run_descent_with(&term, initial, &DescentConfig::default(), &SolverConfig::default(), |_, l| {
            history.push(l.clone())
        })?;
        let e0 = coarse_error(&history[0]);
        let halved = history.iter().position(|l| 2 * coarse_error(l) <= e0);
        let speckle_settled = (1..history.len())
            .rfind(|&k| fx.speckle.indices().any(|i| history[k].labels()[i] != history[k - 1].labels()[i]))
            .unwrap_or(0);
        println!(
            "seed {seed}: coarse error {e0} -> {}; halved at iteration {halved:?}, speckle settled at {speckle_settled}",
            coarse_error(history.last().expect("at least one observation"))
        );
    }
    Ok(())
}
