//! Motion segmentation of a textured square sliding over a textured
//! background: warp estimation, descent on the robust residuals, and the same
//! run backwards in time. Pass a directory to write the frames, occlusion
//! mask and flow for the command line tool.

use std::path::PathBuf;

use stss::descent::{run_descent_with, DescentConfig};
use stss::fixtures::moving_square;
use stss::grid::{dilate, hausdorff_distance, LabelField, Partition, ScalarField};
use stss::io::{write_flo, write_image, write_mask_pgm};
use stss::motion::{estimate_warp, propagate_labels, FlowField, FramePair, MotionTerm, RobustNorm, WarpKind};
use stss::solvers::SolverConfig;

fn segment(pair: &FramePair, truth: &LabelField) -> stss::Result<LabelField> {
    let rho = RobustNorm::default();
    let grown = dilate(&truth.mask(1), 3);
    let (w, h) = pair.dims();
    let init = LabelField::from_fn(w, h, |x, y| usize::from(grown.contains(x, y)));
    let warps = (0..2)
        .map(|k| estimate_warp(pair, &init.mask(k), WarpKind::Translation, rho))
        .collect::<stss::Result<Vec<_>>>()?;
    println!("  estimated warps {warps:?}");
    let term = MotionTerm { pair, warps: &warps, rho };
    let (p, trace) = run_descent_with(
        &term,
        Partition::from_labels(&init, 2)?,
        &DescentConfig::default(),
        &SolverConfig::default(),
        |_, _| {},
    )?;
    let labels = p.hard_labels();
    println!(
        "  {} iterations, {} sites wrong, hausdorff {:?}",
        trace.len(),
        labels.count_changed(truth),
        hausdorff_distance(&labels.mask(1), &truth.mask(1))?
    );
    Ok(labels)
}

fn main() -> stss::Result<()> {
    let sq = moving_square();
    println!("forward:");
    let forward = segment(&sq.pair, &sq.truth)?;
    println!("backward:");
    let backward = segment(&sq.backward, &sq.truth_backward)?;
    let (moved, _) = propagate_labels(&Partition::from_labels(&forward, 2)?, &sq.warps)?;
    println!("forward labels carried to frame 1 differ from the backward run at {} sites", moved.hard_labels().count_changed(&backward));

    if let Some(dir) = std::env::args().nth(1).map(PathBuf::from) {
        std::fs::create_dir_all(&dir).map_err(|source| stss::Error::Io { path: dir.clone(), source })?;
        write_image(&dir.join("frame0.pgm"), sq.pair.frame0())?;
        write_image(&dir.join("frame1.pgm"), sq.pair.frame1())?;
        if let Some(o) = sq.pair.occlusion() {
            write_mask_pgm(&dir.join("occlusion.pgm"), o)?;
        }
        let (w, h) = sq.pair.dims();
        let shift = |k: usize| if sq.truth.get(k % w, k / w) == 1 { 2.0 } else { 0.0 };
        let flow = FlowField::new(
            ScalarField::from_vec(w, h, (0..w * h).map(shift).collect())?,
            ScalarField::zeros(w, h),
        )?;
        write_flo(&dir.join("flow.flo"), &flow)?;
        println!("wrote frames, occlusion and flow to {}", dir.display());
    }
    Ok(())
}
