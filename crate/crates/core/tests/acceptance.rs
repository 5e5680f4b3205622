//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the table always reaches the output; exits nonzero on any FAIL.

use std::path::Path;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use stss::cli::RunConfig;
use stss::descent::{run_descent, run_descent_with, DescentConfig, IntensityTerm};
use stss::fixtures::{blocks, coarse_split, moving_square, offset_disk, random_connected_mask, smooth_random_image, two_scale};
use stss::gradient::compute_region_gradient;
use stss::grid::{dilate, hausdorff_distance, LabelField, Partition, RegionMask, ScalarField};
use stss::motion::{estimate_warp, motion_energy, EnergyMode, MotionTerm, RobustNorm, WarpKind};
use stss::oracle::{
    compute_scale_space, default_t_max, flip_scan, fourier_transfer_check, lambda_backward, lambda_direct,
    lambda_zero_streaming, OracleConfig,
};
use stss::solvers::{heat_step, solve_screened_poisson, solve_zero_mean_poisson, RegionStencil, SolverConfig};

type Outcome = (bool, String);

fn rel_l2(a: &ScalarField, b: &ScalarField, r: &RegionMask) -> f64 {
    let num: f64 = r.indices().map(|k| (a.values()[k] - b.values()[k]).powi(2)).sum();
    let den: f64 = r.indices().map(|k| b.values()[k].powi(2)).sum();
    (num / den).sqrt()
}

/// The oracle is first order in its time step, so the gap is also reported
/// at the coarser step to show it shrinking with the step.
fn poisson_limit() -> Outcome {
    let (mut worst, mut worst_coarse) = (0.0f64, 0.0f64);
    for seed in 0..5u64 {
        let (w, h) = (32 - 2 * seed as usize, 24 + 2 * seed as usize);
        let r = random_connected_mask(w, h, 40 + seed);
        let img = smooth_random_image(w, h, 60 + seed);
        // horizon 10 diam^2
        let diam = r.geodesic_diameter() as f64;
        let t = 10.0 * diam * diam;
        assert_eq!(t, default_t_max(&r));
        let a = r.indices().map(|k| img.values()[k]).sum::<f64>() / r.count() as f64;
        let poisson = solve_zero_mean_poisson(&img.map(|v| a - v), &r, &SolverConfig::default()).unwrap();
        let fine = lambda_zero_streaming(&img, &r, t, 0.1).unwrap();
        let coarse = lambda_zero_streaming(&img, &r, t, 0.2).unwrap();
        worst = worst.max(rel_l2(&fine, &poisson, &r));
        worst_coarse = worst_coarse.max(rel_l2(&coarse, &poisson, &r));
    }
    (
        worst <= 1e-2,
        format!("worst relative L2 gap over 5 masks {worst:.2e} at oracle step 0.1 ({worst_coarse:.2e} at 0.2)"),
    )
}

fn backward_adjoint() -> Outcome {
    let img = ScalarField::from_fn(16, 16, |x, y| 0.5 + 0.3 * ((x as f64) * 0.4).sin() * ((y as f64) * 0.25).cos());
    let r = RegionMask::full(16, 16);
    let s = compute_scale_space(&img, &r, default_t_max(&r), 0.2).unwrap();
    let back = lambda_backward(&s).unwrap();
    let direct = lambda_direct(&s, 0.0).unwrap();
    let peak = direct.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gap = back.values().iter().zip(direct.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    (gap / peak <= 1e-2, format!("relative Linf gap {:.2e}", gap / peak))
}

/// `sum_w |u_hat(w)|^2 / N * (1 - exp(-2 mu T)) / (2 mu)` by a direct DFT.
fn spectral_energy(img: &ScalarField, t: f64) -> f64 {
    let (w, h) = img.dims();
    let tau = std::f64::consts::TAU;
    let mut total = 0.0;
    for l in 0..h {
        for k in 0..w {
            if k == 0 && l == 0 {
                continue;
            }
            let (mut re, mut im) = (0.0, 0.0);
            for y in 0..h {
                for x in 0..w {
                    let p = tau * (k as f64 * x as f64 / w as f64 + l as f64 * y as f64 / h as f64);
                    re += img.get(x, y) * p.cos();
                    im -= img.get(x, y) * p.sin();
                }
            }
            let mu = 4.0 * ((std::f64::consts::PI * k as f64 / w as f64).sin().powi(2)
                + (std::f64::consts::PI * l as f64 / h as f64).sin().powi(2));
            total += (re * re + im * im) / (w * h) as f64 * (1.0 - (-2.0 * mu * t).exp()) / (2.0 * mu);
        }
    }
    total
}

fn parseval() -> Outcome {
    let (w, h) = (16usize, 12usize);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut noise_err = 0.0f64;
    for t in [1.0, 10.0, 100.0] {
        let raw = ScalarField::from_fn(w, h, |_, _| rng.random_range(-1.0..1.0));
        let m = raw.values().iter().sum::<f64>() / (w * h) as f64;
        let img = raw.map(|v| v - m);
        let c = fourier_transfer_check(&img, t).unwrap();
        let want = spectral_energy(&img, t);
        noise_err = noise_err.max((c.energy - want).abs() / want);
    }
    let mut mode_err = 0.0f64;
    for (k, l, t) in [(1usize, 0usize, 30.0), (2, 3, 2.0), (5, 1, 0.7)] {
        let tau = std::f64::consts::TAU;
        let img = ScalarField::from_fn(w, h, |x, y| (tau * (k as f64 * x as f64 / w as f64 + l as f64 * y as f64 / h as f64)).sin());
        let mu = 4.0 * ((std::f64::consts::PI * k as f64 / w as f64).sin().powi(2)
            + (std::f64::consts::PI * l as f64 / h as f64).sin().powi(2));
        // a sine mode has mean square 1/2 and decays as exp(-mu t)
        let want = 0.5 * (w * h) as f64 * (1.0 - (-2.0 * mu * t).exp()) / (2.0 * mu);
        let c = fourier_transfer_check(&img, t).unwrap();
        mode_err = mode_err.max((c.energy - want).abs() / want).max((c.spectral - want).abs() / want);
    }
    (
        noise_err <= 1e-3 && mode_err <= 1e-10,
        format!("random inputs {noise_err:.2e}, single modes {mode_err:.2e}"),
    )
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn flip_sign() -> Outcome {
    let n = 32;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let noise = Normal::new(0.0, 0.1).unwrap();
    let img = ScalarField::from_fn(n, n, |x, _| if x < 16 { 0.2 } else { 0.8 } + noise.sample(&mut rng));
    // split off the step by 2 to 4 columns, alternating every 8 rows
    let labels = LabelField::from_fn(n, n, |x, y| usize::from(x >= if (y / 8) % 2 == 0 { 12 } else { 18 }));
    let grads: Vec<_> = (0..2)
        .map(|k| compute_region_gradient(std::slice::from_ref(&img), &labels.mask(k), k, 3, &SolverConfig::default()).unwrap())
        .collect();
    let diam = (0..2).map(|k| labels.mask(k).geodesic_diameter()).max().unwrap() as f64;
    let flips = flip_scan(&img, &labels, OracleConfig::new(diam * diam)).unwrap();
    let brute: Vec<f64> = flips.iter().map(|f| f.delta).collect();
    let predicted: Vec<f64> = flips
        .iter()
        .map(|f| {
            let k = f.site.1 * n + f.site.0;
            grads[f.to].g.values()[k] - grads[f.from].g.values()[k]
        })
        .collect();
    let agree = brute.iter().zip(&predicted).filter(|(a, b)| a.signum() == b.signum()).count() as f64 / brute.len() as f64;
    let r = pearson(&brute, &predicted);
    (
        agree >= 0.85 && r >= 0.8,
        format!("{} boundary flips, sign agreement {agree:.3}, pearson {r:.3}", brute.len()),
    )
}

fn conservation() -> Outcome {
    let r = random_connected_mask(28, 28, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let img = ScalarField::from_fn(28, 28, |_, _| rng.random_range(0.0..1.0));
    let mass = |u: &[f64]| u.iter().sum::<f64>();

    let stencil = RegionStencil::new(&r);
    let mut u = stencil.gather(&img);
    let mut scratch = vec![0.0; u.len()];
    let m0 = mass(&u);
    for _ in 0..1000 {
        stencil.heat_step_in_place(&mut u, 0.2, &mut scratch);
    }
    let drift = (mass(&u) - m0).abs() / m0;

    let inside: Vec<f64> = r.indices().map(|k| img.values()[k]).collect();
    let (lo, hi) = inside.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mut v = img.clone();
    let mut bounded = true;
    for _ in 0..300 {
        v = heat_step(&v, &r, 0.25).unwrap();
        bounded &= r.indices().all(|k| v.values()[k] >= lo && v.values()[k] <= hi);
    }

    let a = mass(&inside) / inside.len() as f64;
    let lambda = solve_zero_mean_poisson(&img.map(|p| a - p), &r, &SolverConfig::default()).unwrap();
    let lambda_mean = (r.indices().map(|k| lambda.values()[k]).sum::<f64>() / r.count() as f64).abs();

    let s = solve_screened_poisson(&img, &r, 20.0, &SolverConfig::default()).unwrap();
    let s_mean = r.indices().map(|k| s.values()[k]).sum::<f64>() / r.count() as f64;
    let screened = (s_mean - a).abs() / a;
    (
        drift < 1e-10 && bounded && lambda_mean <= 1e-10 && screened <= 1e-8,
        format!("mass drift {drift:.1e}, max principle {bounded}, mean lambda0 {lambda_mean:.1e}, screened mean {screened:.1e}"),
    )
}

fn block_segmentation() -> Outcome {
    let run = |sigma: f64, seed: u64| {
        let (img, truth) = blocks(sigma, seed);
        let p0 = Partition::from_labels(&coarse_split(32, 32), 2).unwrap();
        let (p, _) = run_descent(&[img], p0, &DescentConfig::default(), &SolverConfig::default()).unwrap();
        p.hard_labels().count_changed(&truth)
    };
    let clean = run(0.0, 0);
    let noisy: Vec<usize> = (0..10u64).into_par_iter().map(|s| run(0.1, 100 + s)).collect();
    let good = noisy.iter().filter(|&&e| e * 100 <= 1024).count();
    (
        clean == 0 && good >= 9,
        format!("clean wrong {clean}; sigma 0.1 wrong per seed {noisy:?}, {good}/10 within 1%"),
    )
}

fn coarse_to_fine() -> Outcome {
    let fx = two_scale();
    let (w, h) = fx.image.dims();
    let coarse_error = |l: &LabelField| {
        (0..w * h)
            .filter(|&k| !fx.speckle.contains_index(k) && l.labels()[k] != fx.truth.labels()[k])
            .count()
    };
    let rows: Vec<(usize, usize)> = (0..10u64)
        .into_par_iter()
        .map(|seed| {
            let mut history = Vec::new();
            let term = IntensityTerm { channels: std::slice::from_ref(&fx.image) };
            let p0 = Partition::from_labels(&offset_disk(w, h, seed), 2).unwrap();
            run_descent_with(&term, p0, &DescentConfig::default(), &SolverConfig::default(), |_, l| {
                history.push(l.clone())
            })
            .unwrap();
            let e0 = coarse_error(&history[0]);
            let halved = history.iter().position(|l| 2 * coarse_error(l) <= e0).unwrap_or(usize::MAX);
            let settled = (1..history.len())
                .rfind(|&k| fx.speckle.indices().any(|i| history[k].labels()[i] != history[k - 1].labels()[i]))
                .unwrap_or(0);
            (halved, settled)
        })
        .collect();
    let ok = rows.iter().filter(|(a, b)| a < b).count();
    (ok >= 9, format!("{ok}/10 seeds halve the coarse error first; (halved, speckle settled) {rows:?}"))
}

fn motion() -> Outcome {
    let sq = moving_square();
    let rho = RobustNorm::default();
    let grown = dilate(&sq.truth.mask(1), 3);
    let init = LabelField::from_fn(64, 64, |x, y| usize::from(grown.contains(x, y)));
    let on_init: Vec<_> = (0..2).map(|k| estimate_warp(&sq.pair, &init.mask(k), WarpKind::Translation, rho).unwrap()).collect();
    let on_truth: Vec<_> = (0..2).map(|k| estimate_warp(&sq.pair, &sq.truth.mask(k), WarpKind::Translation, rho).unwrap()).collect();
    let exact = on_init == sq.warps && on_truth == sq.warps;

    let term = MotionTerm { pair: &sq.pair, warps: &on_init, rho };
    let (p, _) = run_descent_with(
        &term,
        Partition::from_labels(&init, 2).unwrap(),
        &DescentConfig::default(),
        &SolverConfig::default(),
        |_, _| {},
    )
    .unwrap();
    let hd = hausdorff_distance(&p.hard_labels().mask(1), &sq.truth.mask(1)).unwrap().unwrap_or(f64::INFINITY);

    let shifted = |dx: i64, dy: i64| {
        LabelField::from_fn(64, 64, |x, y| {
            let (sx, sy) = (x as i64 - dx, y as i64 - dy);
            if (0..64).contains(&sx) && (0..64).contains(&sy) {
                sq.truth.get(sx as usize, sy as usize)
            } else {
                0
            }
        })
    };
    let mut lower = true;
    let mut margin = f64::INFINITY;
    let diam = sq.truth.mask(1).geodesic_diameter() as f64;
    for mode in [EnergyMode::Surrogate(SolverConfig::default()), EnergyMode::Oracle(OracleConfig::new(diam * diam))] {
        let e = |l: &LabelField| motion_energy(&sq.pair, l, &sq.warps, rho, mode.clone()).unwrap().total;
        let at_truth = e(&sq.truth);
        for (dx, dy) in [(2, 0), (-2, 0), (0, 2), (0, -2), (2, 2), (2, -2), (-2, 2), (-2, -2)] {
            let d = e(&shifted(dx, dy)) - at_truth;
            lower &= d > 0.0;
            margin = margin.min(d);
        }
    }
    (
        exact && hd <= 1.0 && lower,
        format!("warps exact {exact}, hausdorff {hd}, smallest energy margin over 2 px shifts {margin:.3e}"),
    )
}

fn defaults() -> Outcome {
    let cfg = RunConfig::default();
    let echo = cfg.echo();
    let solver = SolverConfig::default();
    let descent = DescentConfig::default();
    let ok = solver.alpha == 20.0
        && descent.epsilon == 0.005
        && cfg.alpha == 20.0
        && cfg.epsilon == 0.005
        && echo.lines().any(|l| l == "alpha=20")
        && echo.lines().any(|l| l == "epsilon=0.005");
    (ok, format!("alpha {}, epsilon {} in the library and the config echo", solver.alpha, descent.epsilon))
}

fn write_pgm(path: &Path, img: &ScalarField) {
    let (w, h) = img.dims();
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    bytes.extend(img.values().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    std::fs::write(path, bytes).unwrap();
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (img, _) = blocks(0.15, 21);
    let input = dir.path().join("in.pgm");
    write_pgm(&input, &img.map(|v| 0.25 + 0.5 * v));
    let run = |tag: &str| {
        let out = dir.path().join(tag);
        let status = Command::new(env!("CARGO_BIN_EXE_stss"))
            .args(["--input", input.to_str().unwrap(), "--init", "kmeans", "--seed", "17", "--n-regions", "3"])
            .args(["--out", out.to_str().unwrap()])
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out.join("labels.pgm")).unwrap()
    };
    let (a, b) = (run("a"), run("b"));
    // a third run from the echoed config alone
    let echoed = dir.path().join("a").join("config.txt");
    let out_c = dir.path().join("c");
    let status = Command::new(env!("CARGO_BIN_EXE_stss"))
        .args(["--config", echoed.to_str().unwrap(), "--out", out_c.to_str().unwrap()])
        .status()
        .unwrap();
    let c = std::fs::read(out_c.join("labels.pgm")).unwrap();
    (
        status.success() && a == b && a == c,
        format!("{} byte label maps, repeat identical {}, echo rerun identical {}", a.len(), a == b, a == c),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 adjoint at t=0 matches the zero-mean poisson solve", poisson_limit),
        ("2 backward adjoint matches the direct sum", backward_adjoint),
        ("3 periodic energy matches its spectral sum", parseval),
        ("4 analytic flip prediction vs exhaustive flips", flip_sign),
        ("5 conservation suite", conservation),
        ("6 block segmentation, clean and sigma 0.1", block_segmentation),
        ("7 coarse structure settles before speckle", coarse_to_fine),
        ("8 moving square", motion),
        ("9 shipped defaults alpha=20 epsilon=0.005", defaults),
        ("10 repeated cli runs are bit-identical", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = std::time::Instant::now();
        let (pass, detail) = match std::panic::catch_unwind(check) {
            Ok(r) => r,
            Err(_) => (false, "panicked".to_string()),
        };
        failed += usize::from(!pass);
        println!(
            "{} criterion {name}: {detail} ({:.1}s)",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
