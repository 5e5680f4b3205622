//! Synthetic inputs with known answers, shared by the examples, the
//! validation suite and the tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::grid::{LabelField, RegionMask, ScalarField};
use crate::motion::{FramePair, WarpModel};

/// A 32x32 frame split into a 16x16 block (label 1) and its surround.
pub fn block_truth() -> LabelField {
    LabelField::from_fn(32, 32, |x, y| usize::from((8..24).contains(&x) && (6..22).contains(&y)))
}

/// Block fixture with intensity equal to the label, plus Gaussian noise of
/// standard deviation `sigma` drawn from `seed`.
pub fn blocks(sigma: f64, seed: u64) -> (ScalarField, LabelField) {
    let truth = block_truth();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma.max(0.0)).expect("finite sigma");
    let image = ScalarField::from_fn(32, 32, |x, y| {
        let v = truth.get(x, y) as f64;
        if sigma > 0.0 {
            v + noise.sample(&mut rng)
        } else {
            v
        }
    });
    (image, truth)
}

/// A deliberately wrong vertical split used as a starting point.
pub fn coarse_split(width: usize, height: usize) -> LabelField {
    LabelField::from_fn(width, height, |x, _| usize::from(8 * x >= 3 * width))
}

/// Large low-contrast disk with sparse high-contrast single-site speckle.
#[derive(Clone, Debug)]
pub struct TwoScale {
    pub image: ScalarField,
    /// The disk (label 1) against the background.
    pub truth: LabelField,
    pub speckle: RegionMask,
}

/// 64x64 two-scale fixture: disk of radius 20 at contrast 0.1 around 0.5,
/// and 5% of sites replaced by 0 or 1.
pub fn two_scale() -> TwoScale {
    let n = 64;
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let disk = |x: usize, y: usize| (x as f64 - 31.5).powi(2) + (y as f64 - 31.5).powi(2) < 400.0;
    let mut speckle = RegionMask::empty(n, n);
    let image = ScalarField::from_fn(n, n, |x, y| {
        if rng.random_bool(0.05) {
            speckle.set(x, y, true);
            if rng.random_bool(0.5) {
                0.0
            } else {
                1.0
            }
        } else if disk(x, y) {
            0.55
        } else {
            0.45
        }
    });
    TwoScale {
        image,
        truth: LabelField::from_fn(n, n, |x, y| usize::from(disk(x, y))),
        speckle,
    }
}

/// A disk of radius in `[10, 14)` whose center is displaced by up to 8 sites
/// from the frame center, drawn from `seed`.
pub fn offset_disk(width: usize, height: usize, seed: u64) -> LabelField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cx = (width as f64 - 1.0) / 2.0 + rng.random_range(-8.0..8.0);
    let cy = (height as f64 - 1.0) / 2.0 + rng.random_range(-8.0..8.0);
    let r: f64 = rng.random_range(10.0..14.0);
    LabelField::from_fn(width, height, |x, y| {
        usize::from((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) < r * r)
    })
}

/// Textured square moving over a static textured background.
#[derive(Clone, Debug)]
pub struct MovingSquare {
    pub pair: FramePair,
    /// Square (label 1) in frame-0 coordinates.
    pub truth: LabelField,
    /// Background then square.
    pub warps: [WarpModel; 2],
    /// The same scene run from frame 1 back to frame 0.
    pub backward: FramePair,
    /// Square in frame-1 coordinates.
    pub truth_backward: LabelField,
}

/// 64x64 pair: a 20x20 square at (22, 22) shifts by (2, 0). Background sites
/// of frame 0 that the square covers in frame 1 are occluded. The shared
/// mask holds them all; per region, only the background is occluded there
/// since the square stays in view.
pub fn moving_square() -> MovingSquare {
    let n = 64;
    let (x0, y0, side, dx) = (22usize, 22usize, 20usize, 2usize);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let background = ScalarField::from_fn(n, n, |_, _| rng.random_range(0.0..1.0));
    let square = ScalarField::from_fn(side, side, |_, _| rng.random_range(0.0..1.0));
    let inside = |x: usize, y: usize, ox: usize| (ox..ox + side).contains(&x) && (y0..y0 + side).contains(&y);
    let frame = |ox: usize| {
        ScalarField::from_fn(n, n, |x, y| {
            if inside(x, y, ox) {
                square.get(x - ox, y - y0)
            } else {
                background.get(x, y)
            }
        })
    };
    let layered = |from: usize, to: usize| -> FramePair {
        let hidden = RegionMask::from_fn(n, n, |x, y| inside(x, y, to) && !inside(x, y, from));
        FramePair::new(vec![frame(from)], vec![frame(to)], Some(hidden.clone()))
            .and_then(|p| p.with_region_occlusion(0, hidden))
            .and_then(|p| p.with_region_occlusion(1, RegionMask::empty(n, n)))
            .expect("matching frames")
    };
    MovingSquare {
        pair: layered(x0, x0 + dx),
        truth: LabelField::from_fn(n, n, |x, y| usize::from(inside(x, y, x0))),
        warps: [
            WarpModel::IDENTITY,
            WarpModel::Translation {
                dx: dx as f64,
                dy: 0.0,
            },
        ],
        backward: layered(x0 + dx, x0),
        truth_backward: LabelField::from_fn(n, n, |x, y| usize::from(inside(x, y, x0 + dx))),
    }
}

/// Connected mask inside a `width x height` frame: the largest component of
/// a union of random disks.
pub fn random_connected_mask(width: usize, height: usize, seed: u64) -> RegionMask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let blobs: Vec<(f64, f64, f64)> = (0..rng.random_range(3..7))
            .map(|_| {
                (
                    rng.random_range(0.0..width as f64),
                    rng.random_range(0.0..height as f64),
                    rng.random_range(3.0..(width.min(height) as f64 / 3.0).max(4.0)),
                )
            })
            .collect();
        let raw = RegionMask::from_fn(width, height, |x, y| {
            blobs
                .iter()
                .any(|&(cx, cy, r)| (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) < r * r)
        });
        if let Some(mask) = raw.components().into_iter().max_by_key(RegionMask::count) {
            if mask.count() >= 16 {
                return mask;
            }
        }
    }
}

/// Sum of a few low-frequency cosines with random phases, values near [0, 1].
pub fn smooth_random_image(width: usize, height: usize, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = std::f64::consts::TAU;
    let waves: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.random_range(0.0..1.5) / width as f64,
                rng.random_range(0.0..1.5) / height as f64,
                rng.random_range(0.0..tau),
                rng.random_range(0.05..0.2),
            )
        })
        .collect();
    ScalarField::from_fn(width, height, |x, y| {
        0.5 + waves
            .iter()
            .map(|&(kx, ky, p, a)| a * (tau * (kx * x as f64 + ky * y as f64) + p).cos())
            .sum::<f64>()
    })
}
