//! Two-region segmentation of the noisy block fixture from a wrong vertical
//! split. Pass a directory to also write labels, overlay and trace there.

use std::path::PathBuf;

use stss::descent::{run_descent, DescentConfig};
use stss::fixtures::{blocks, coarse_split};
use stss::grid::Partition;
use stss::io::{write_labels_pgm, write_overlay_png};
use stss::solvers::SolverConfig;

fn main() -> stss::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from);
    for sigma in [0.0, 0.1, 0.3] {
        let (image, truth) = blocks(sigma, 7);
        let initial = Partition::from_labels(&coarse_split(32, 32), 2)?;
        let channels = [image];
        let (p, trace) = run_descent(&channels, initial, &DescentConfig::default(), &SolverConfig::default())?;
        let labels = p.hard_labels();
        println!(
            "sigma {sigma}: {} iterations, converged {}, {} of 1024 sites wrong",
            trace.len(),
            trace.converged,
            labels.count_changed(&truth)
        );
        if let Some(dir) = &out {
            std::fs::create_dir_all(dir).map_err(|source| stss::Error::Io { path: dir.clone(), source })?;
            write_labels_pgm(&dir.join(format!("labels_{sigma}.pgm")), &labels)?;
            write_overlay_png(&dir.join(format!("overlay_{sigma}.png")), &channels, &labels)?;
            trace.write_csv(&dir.join(format!("trace_{sigma}.csv")))?;
        }
    }
    Ok(())
}
