//! Oracle suite: the fast solvers checked against brute-force scale-space
//! computations on built-in fixtures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::fixtures::{random_connected_mask, smooth_random_image};
use crate::gradient::compute_region_gradient;
use crate::grid::{pairwise_sum, LabelField, RegionMask, ScalarField};
use crate::oracle::{
    compute_scale_space, default_t_max, flip_scan, fourier_transfer_check, lambda_backward, lambda_direct,
    lambda_zero_streaming, periodic_eigenvalue, OracleConfig,
};
use crate::solvers::{
    heat_step, solve_screened_poisson, solve_zero_mean_poisson, RegionStencil, SolverConfig,
};

/// Outcome of one check.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }
}

/// Relative L2 gap between the long-horizon adjoint at t = 0 and the
/// zero-mean Poisson solution, worst over five random masks. The oracle's
/// error is first order in its step; 0.1 keeps it well under the bound.
pub fn check_poisson_limit() -> Result<Check> {
    let mut worst = 0.0f64;
    for seed in 0..5u64 {
        let (w, h) = (20 + 3 * seed as usize, 32 - 2 * seed as usize);
        let r = random_connected_mask(w, h, 100 + seed);
        let img = smooth_random_image(w, h, 200 + seed);
        let direct = lambda_zero_streaming(&img, &r, default_t_max(&r), 0.1)?;
        let a = img.mean_over(&r);
        let poisson = solve_zero_mean_poisson(&img.map(|v| a - v), &r, &SolverConfig::default())?;
        let diff = direct.zip_with(&poisson, |p, q| p - q)?;
        worst = worst.max(diff.norm_over(&r) / poisson.norm_over(&r));
    }
    Ok(Check::new("poisson limit of the adjoint", worst <= 1e-2, format!("worst rel L2 {worst:.2e} (<= 1e-2)")))
}

/// Backward-in-time adjoint against the direct sum at t = 0.
pub fn check_backward_adjoint() -> Result<Check> {
    let img = ScalarField::from_fn(16, 16, |x, y| ((x as f64) * 0.2).cos() + ((y as f64) * 0.15 + 0.3).sin());
    let r = RegionMask::full(16, 16);
    let s = compute_scale_space(&img, &r, default_t_max(&r), 0.2)?;
    let back = lambda_backward(&s)?;
    let direct = lambda_direct(&s, 0.0)?;
    let rel = back.zip_with(&direct, |p, q| p - q)?.max_abs() / direct.max_abs();
    Ok(Check::new("backward adjoint", rel <= 1e-2, format!("rel Linf {rel:.2e} (<= 1e-2)")))
}

/// Periodic energy against its spectral sum, on noise and on single modes.
pub fn check_parseval() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut noise_err = 0.0f64;
    for _ in 0..3 {
        let raw = ScalarField::from_fn(16, 12, |_, _| rng.random_range(-1.0..1.0));
        let m = pairwise_sum(raw.values()) / raw.len() as f64;
        let c = fourier_transfer_check(&raw.map(|v| v - m), 6.0)?;
        noise_err = noise_err.max(c.relative_error());
    }
    let (w, h) = (16usize, 12usize);
    let tau = std::f64::consts::TAU;
    let mut mode_err = 0.0f64;
    for (k, l) in [(1usize, 0usize), (3, 2), (5, 5)] {
        let img = ScalarField::from_fn(w, h, |x, y| (tau * (k as f64 * x as f64 / w as f64 + l as f64 * y as f64 / h as f64)).cos());
        let t = 4.0;
        // mean square of a non-Nyquist cosine is 1/2
        let mu = periodic_eigenvalue(w, h, k, l);
        let expect = 0.5 * (w * h) as f64 / (2.0 * mu) * (1.0 - (-2.0 * mu * t).exp());
        let c = fourier_transfer_check(&img, t)?;
        mode_err = mode_err.max((c.energy - expect).abs() / expect).max((c.spectral - expect).abs() / expect);
    }
    Ok(Check::new(
        "periodic parseval",
        noise_err <= 1e-3 && mode_err <= 1e-10,
        format!("noise rel {noise_err:.2e} (<= 1e-3), single modes {mode_err:.2e} (<= 1e-10)"),
    ))
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Analytic flip prediction `G_to - G_from` against exhaustive one-site flips
/// on a noisy 32x32 step with a jagged split.
pub fn check_flip_prediction() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let noise = Normal::new(0.0, 0.1).expect("finite sigma");
    let img = ScalarField::from_fn(32, 32, |x, _| f64::from(u8::from(x >= 16)) + noise.sample(&mut rng));
    let labels = LabelField::from_fn(32, 32, |x, y| usize::from(x >= 13 + (y / 8) % 2 * 5));
    let grads = (0..2)
        .map(|k| compute_region_gradient(std::slice::from_ref(&img), &labels.mask(k), k, 3, &SolverConfig::default()))
        .collect::<Result<Vec<_>>>()?;
    let diam = (0..2).map(|k| labels.mask(k).geodesic_diameter()).max().unwrap_or(1) as f64;
    let flips = flip_scan(&img, &labels, OracleConfig::new(diam * diam))?;
    let (fd, an): (Vec<f64>, Vec<f64>) = flips
        .iter()
        .map(|f| {
            let k = f.site.1 * 32 + f.site.0;
            (f.delta, grads[f.to].g.values()[k] - grads[f.from].g.values()[k])
        })
        .unzip();
    let agree = fd.iter().zip(&an).filter(|(a, b)| (**a > 0.0) == (**b > 0.0)).count() as f64 / fd.len() as f64;
    let r = pearson(&fd, &an);
    Ok(Check::new(
        "flip prediction",
        agree >= 0.85 && r >= 0.8,
        format!("{} flips, sign agreement {agree:.3} (>= 0.85), pearson {r:.3} (>= 0.8)", fd.len()),
    ))
}

/// Mass, maximum principle, zero-mean adjoint and screened mean.
pub fn check_conservation() -> Result<Check> {
    let r = random_connected_mask(24, 24, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let img = ScalarField::from_fn(24, 24, |_, _| rng.random_range(0.0..1.0));

    let stencil = RegionStencil::new(&r);
    let mut u = stencil.gather(&img);
    let mut scratch = vec![0.0; u.len()];
    let m0 = pairwise_sum(&u);
    for _ in 0..1000 {
        stencil.heat_step_in_place(&mut u, 0.2, &mut scratch);
    }
    let drift = (pairwise_sum(&u) - m0).abs() / m0.abs();

    let (lo, hi) = r.indices().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), k| {
        (a.min(img.values()[k]), b.max(img.values()[k]))
    });
    let mut v = img.clone();
    let mut bounded = true;
    for _ in 0..200 {
        v = heat_step(&v, &r, 0.2)?;
        bounded &= r.indices().all(|k| (lo..=hi).contains(&v.values()[k]));
    }

    let a = img.mean_over(&r);
    let lambda = solve_zero_mean_poisson(&img.map(|p| a - p), &r, &SolverConfig::default())?;
    let lambda_mean = lambda.mean_over(&r).abs();

    let smooth = solve_screened_poisson(&img, &r, 20.0, &SolverConfig::default())?;
    let screened = (smooth.mean_over(&r) - a).abs() / a.abs();

    Ok(Check::new(
        "conservation",
        drift < 1e-10 && bounded && lambda_mean <= 1e-10 && screened <= 1e-8,
        format!(
            "mass drift {drift:.1e} (< 1e-10), max principle {}, |mean lambda0| {lambda_mean:.1e} (<= 1e-10), screened mean {screened:.1e} (<= 1e-8)",
            if bounded { "held" } else { "violated" }
        ),
    ))
}

type Named = (&'static str, fn() -> Result<Check>);

/// Runs every check; a check that errors counts as failed.
pub fn run_suite() -> Vec<Check> {
    let suite: [Named; 5] = [
        ("poisson limit of the adjoint", check_poisson_limit),
        ("backward adjoint", check_backward_adjoint),
        ("periodic parseval", check_parseval),
        ("flip prediction", check_flip_prediction),
        ("conservation", check_conservation),
    ];
    suite
        .iter()
        .map(|(name, f)| f().unwrap_or_else(|e| Check::new(name, false, format!("error: {e}"))))
        .collect()
}

/// One `PASS`/`FAIL` line per check.
pub fn render(checks: &[Check]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    checks
        .iter()
        .map(|c| format!("{} {:width$}  {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail))
        .collect()
}
