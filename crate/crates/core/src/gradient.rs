//! Boundary gradient from two native-scale solves per region.

use crate::error::{Error, Result};
use crate::grid::{central_gradient, dilate, pairwise_dot, RegionMask, ScalarField};
use crate::solvers::{solve_screened_poisson_from, solve_zero_mean_poisson_from, SolverConfig};

/// Per-region solve state and the normal-speed field `G`.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionGradient {
    pub region_index: usize,
    /// The undilated region `R`.
    pub region: RegionMask,
    /// The solve domain `D(R)`.
    pub domain: RegionMask,
    /// `G` on the domain, zero elsewhere.
    pub g: ScalarField,
    /// Zero-mean multiplier per channel.
    pub lambda0: Vec<ScalarField>,
    /// Screened-Poisson smoothing per channel.
    pub v: Vec<ScalarField>,
    /// Per-channel mean of the data over `R`.
    pub means: Vec<f64>,
    /// Data channels the solves ran on.
    pub channels: Vec<ScalarField>,
}

impl RegionGradient {
    /// Native-scale energy estimate `-1/2 sum_R lambda0 (I - a)`, summed over
    /// channels. For an infinite horizon this is the exact discrete energy.
    pub fn surrogate_energy(&self) -> f64 {
        let idx: Vec<usize> = self.region.indices().collect();
        let mut total = 0.0;
        for ((lam, img), &a) in self.lambda0.iter().zip(&self.channels).zip(&self.means) {
            let l: Vec<f64> = idx.iter().map(|&i| lam.values()[i]).collect();
            let d: Vec<f64> = idx.iter().map(|&i| img.values()[i] - a).collect();
            total -= 0.5 * pairwise_dot(&l, &d);
        }
        total
    }
}

/// Computes `G = sum_c [-1/2 |grad lambda_c|^2 - lambda_c (I_c - a_c)]` on
/// `D(region)`, where `v_c` solves the screened Poisson problem for `I_c` and
/// `lambda_c` the zero-mean Poisson problem with right-hand side `v_c - I_c`.
pub fn compute_region_gradient(
    image: &[ScalarField],
    region: &RegionMask,
    region_index: usize,
    dilation_radius: usize,
    cfg: &SolverConfig,
) -> Result<RegionGradient> {
    compute_region_gradient_warm(image, region, region_index, dilation_radius, cfg, None)
}

/// As [`compute_region_gradient`], seeding both solves from `previous`.
pub fn compute_region_gradient_warm(
    image: &[ScalarField],
    region: &RegionMask,
    region_index: usize,
    dilation_radius: usize,
    cfg: &SolverConfig,
    previous: Option<&RegionGradient>,
) -> Result<RegionGradient> {
    gradient_on(image, region, region, region_index, dilation_radius, cfg, previous)
        .map_err(|e| e.in_region(region_index))
}

/// Shared core. `mean_region` is where the data mean is taken; it differs from
/// `region` only when some sites are excluded from the data term.
pub(crate) fn gradient_on(
    channels: &[ScalarField],
    region: &RegionMask,
    mean_region: &RegionMask,
    region_index: usize,
    dilation_radius: usize,
    cfg: &SolverConfig,
    previous: Option<&RegionGradient>,
) -> Result<RegionGradient> {
    cfg.validate()?;
    let first = channels
        .first()
        .ok_or_else(|| Error::invalid("image", "at least one channel is required"))?;
    for c in channels {
        if c.dims() != region.dims() {
            return Err(Error::DimensionMismatch {
                expected: region.dims(),
                found: c.dims(),
            });
        }
    }
    if region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let (w, h) = first.dims();
    let domain = dilate(region, dilation_radius);
    let mean_over = if mean_region.is_empty() { region } else { mean_region };
    let previous = previous.filter(|p| p.lambda0.len() == channels.len() && p.g.dims() == (w, h));

    let mut g = ScalarField::zeros(w, h);
    let mut lambdas = Vec::with_capacity(channels.len());
    let mut vs = Vec::with_capacity(channels.len());
    let mut means = Vec::with_capacity(channels.len());
    for (c, img) in channels.iter().enumerate() {
        let a = img.mean_over(mean_over);
        let v_init = previous.map(|p| {
            ScalarField::from_fn(w, h, |x, y| {
                if p.domain.contains(x, y) {
                    p.v[c].get(x, y)
                } else {
                    img.get(x, y)
                }
            })
        });
        let v = solve_screened_poisson_from(img, &domain, cfg.alpha, cfg, v_init.as_ref())?.field;
        let rhs = v.zip_with(img, |v, i| v - i)?;
        let lam_init = previous.map(|p| &p.lambda0[c]);
        let lambda = solve_zero_mean_poisson_from(&rhs, &domain, cfg, lam_init)?.field;
        for (x, y) in domain.sites() {
            let (gx, gy) = central_gradient(&lambda, &domain, x, y);
            let l = lambda.get(x, y);
            let add = -0.5 * (gx * gx + gy * gy) - l * (img.get(x, y) - a);
            g.set(x, y, g.get(x, y) + add);
        }
        lambdas.push(lambda);
        vs.push(v);
        means.push(a);
    }
    Ok(RegionGradient {
        region_index,
        region: region.clone(),
        domain,
        g,
        lambda0: lambdas,
        v: vs,
        means,
        channels: channels.to_vec(),
    })
}

/// `G_i - G_j` on the band `D(R_i) ∩ D(R_j)` (zero elsewhere), and the band.
pub fn compute_band_force(
    grads: &[RegionGradient],
    i: usize,
    j: usize,
) -> Result<(ScalarField, RegionMask)> {
    if i == j {
        return Err(Error::invalid("j", "band force needs two distinct regions"));
    }
    let find = |k: usize| {
        grads
            .iter()
            .find(|g| g.region_index == k)
            .ok_or(Error::MissingGradient(k))
    };
    let (gi, gj) = (find(i)?, find(j)?);
    let band = gi.domain.intersection(&gj.domain)?;
    let (w, h) = gi.g.dims();
    let mut force = ScalarField::zeros(w, h);
    for k in band.indices() {
        force.values_mut()[k] = gi.g.values()[k] - gj.g.values()[k];
    }
    Ok((force, band))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{masked_laplacian, LabelField};
    use crate::oracle::{flip_scan, OracleConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn noisy(w: usize, h: usize, seed: u64, f: impl Fn(usize, usize) -> f64) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = Normal::new(0.0, 1.0).unwrap();
        ScalarField::from_fn(w, h, |x, y| f(x, y) + 0.1 * n.sample(&mut rng))
    }

    fn tight() -> SolverConfig {
        SolverConfig {
            cg_tolerance: 1e-11,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn constant_image_has_zero_gradient() {
        let img = ScalarField::filled(10, 8, 0.3);
        let r = RegionMask::rect(10, 8, 0, 0, 5, 8);
        let g = compute_region_gradient(&[img], &r, 0, 3, &SolverConfig::default()).unwrap();
        assert!(g.g.max_abs() < 1e-12);
        assert!(g.lambda0[0].max_abs() < 1e-12);
        assert_eq!(g.domain, dilate(&r, 3));
    }

    #[test]
    fn lambda_is_zero_mean_on_domain() {
        let img = noisy(16, 12, 1, |x, _| if x < 7 { 0.2 } else { 0.8 });
        let r = RegionMask::rect(16, 12, 0, 0, 7, 12);
        let g = compute_region_gradient(&[img], &r, 0, 3, &tight()).unwrap();
        assert!(g.lambda0[0].mean_over(&g.domain).abs() < 1e-10);
        assert!(g.g.is_finite());
    }

    #[test]
    fn channels_add() {
        let a = noisy(12, 12, 2, |x, y| (x + y) as f64 * 0.05);
        let b = noisy(12, 12, 3, |x, _| if x < 5 { 0.0 } else { 1.0 });
        let r = RegionMask::rect(12, 12, 0, 2, 6, 10);
        let cfg = tight();
        let both = compute_region_gradient(&[a.clone(), b.clone()], &r, 0, 2, &cfg).unwrap();
        let ga = compute_region_gradient(&[a], &r, 0, 2, &cfg).unwrap();
        let gb = compute_region_gradient(&[b], &r, 0, 2, &cfg).unwrap();
        for k in 0..both.g.len() {
            let sum = ga.g.values()[k] + gb.g.values()[k];
            assert!((both.g.values()[k] - sum).abs() < 1e-12);
        }
    }

    #[test]
    fn shift_and_scale_behaviour() {
        let img = noisy(14, 10, 4, |x, _| x as f64 * 0.07);
        let r = RegionMask::rect(14, 10, 3, 0, 11, 10);
        let cfg = tight();
        let base = compute_region_gradient(std::slice::from_ref(&img), &r, 0, 3, &cfg).unwrap();
        let shifted = compute_region_gradient(&[img.map(|v| v + 5.0)], &r, 0, 3, &cfg).unwrap();
        let scaled = compute_region_gradient(&[img.scaled(3.0)], &r, 0, 3, &cfg).unwrap();
        let m = base.g.max_abs();
        for k in 0..base.g.len() {
            assert!((shifted.g.values()[k] - base.g.values()[k]).abs() < 1e-8 * m);
            assert!((scaled.g.values()[k] - 9.0 * base.g.values()[k]).abs() < 1e-8 * m);
        }
    }

    #[test]
    fn warm_start_matches_cold() {
        let img = noisy(20, 20, 5, |x, y| if x + y < 20 { 0.1 } else { 0.9 });
        let mut r = RegionMask::from_fn(20, 20, |x, y| x + y < 20);
        let cfg = SolverConfig {
            cg_tolerance: 1e-10,
            ..SolverConfig::default()
        };
        let before = compute_region_gradient(std::slice::from_ref(&img), &r, 0, 3, &cfg).unwrap();
        r.set(10, 10, true);
        let warm = compute_region_gradient_warm(std::slice::from_ref(&img), &r, 0, 3, &cfg, Some(&before)).unwrap();
        let cold = compute_region_gradient(std::slice::from_ref(&img), &r, 0, 3, &cfg).unwrap();
        // Both solves stop at relative residual <= tol, so the difference of
        // the two solutions is within 2 tol in the operator norm.
        let d = &cold.domain;
        let norm = |f: &ScalarField| f.norm_over(d);
        let dv = warm.v[0].zip_with(&cold.v[0], |a, b| a - b).unwrap();
        let lap = masked_laplacian(&dv, d).unwrap();
        let op_dv = dv.zip_with(&lap, |u, l| u - cfg.alpha * l).unwrap();
        assert!(norm(&op_dv) <= 2.0 * cfg.cg_tolerance * norm(&img) * (1.0 + 1e-6));
        let dl = warm.lambda0[0].zip_with(&cold.lambda0[0], |a, b| a - b).unwrap();
        let op_dl = masked_laplacian(&dl, d).unwrap();
        let rhs = cold.v[0].zip_with(&img, |v, i| v - i).unwrap();
        let rhs = rhs.map(|r| r - rhs.mean_over(d));
        let bound = 2.0 * cfg.cg_tolerance * norm(&rhs) + norm(&dv);
        assert!(norm(&op_dl) <= bound * (1.0 + 1e-6));
        assert!(warm.g.zip_with(&cold.g, |a, b| a - b).unwrap().max_abs() < 1e-6 * cold.g.max_abs());
    }

    #[test]
    fn band_force_is_antisymmetric() {
        let img = noisy(12, 8, 6, |x, _| if x < 6 { 0.0 } else { 1.0 });
        let labels = LabelField::from_fn(12, 8, |x, _| usize::from(x >= 6));
        let cfg = SolverConfig::default();
        let grads: Vec<_> = (0..2)
            .map(|k| compute_region_gradient(std::slice::from_ref(&img), &labels.mask(k), k, 3, &cfg).unwrap())
            .collect();
        let (fij, band) = compute_band_force(&grads, 0, 1).unwrap();
        let (fji, band2) = compute_band_force(&grads, 1, 0).unwrap();
        assert_eq!(band, band2);
        assert_eq!(band.count(), 6 * 8);
        for k in 0..fij.len() {
            assert_eq!(fij.values()[k], -fji.values()[k]);
        }
        assert!(matches!(compute_band_force(&grads, 0, 2), Err(Error::MissingGradient(2))));
    }

    #[test]
    fn constant_image_has_zero_force() {
        let img = ScalarField::filled(10, 10, 0.7);
        let labels = LabelField::from_fn(10, 10, |x, _| usize::from(x >= 4));
        let grads: Vec<_> = (0..2)
            .map(|k| {
                compute_region_gradient(std::slice::from_ref(&img), &labels.mask(k), k, 3, &SolverConfig::default())
                    .unwrap()
            })
            .collect();
        assert!(compute_band_force(&grads, 0, 1).unwrap().0.max_abs() < 1e-12);
    }

    /// True step at x = 8; the current split sits at 8 - off or 8 + off. The
    /// force on the misassigned boundary column must push toward the step.
    #[test]
    fn noisy_step_force_points_at_step() {
        for off in 1..=3usize {
            for (split, expect_grow_0) in [(8 - off, true), (8 + off, false)] {
                let img = noisy(16, 16, 7 + off as u64, |x, _| if x < 8 { 0.0 } else { 1.0 });
                let labels = LabelField::from_fn(16, 16, |x, _| usize::from(x >= split));
                let grads: Vec<_> = (0..2)
                    .map(|k| {
                        compute_region_gradient(std::slice::from_ref(&img), &labels.mask(k), k, 3, &SolverConfig::default())
                            .unwrap()
                    })
                    .collect();
                let (force, _) = compute_band_force(&grads, 0, 1).unwrap();
                // column the boundary should move through next
                let col = if expect_grow_0 { split } else { split - 1 };
                let mean: f64 = (0..16).map(|y| force.get(col, y)).sum::<f64>() / 16.0;
                // region 0 grows where G_0 - G_1 < 0
                assert_eq!(mean < 0.0, expect_grow_0, "off {off} split {split} mean {mean}");
            }
        }
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    /// Noisy vertical step with a jagged current boundary; every boundary
    /// flip is scored by the brute-force oracle.
    #[test]
    fn sign_agrees_with_flip_scan() {
        let img = noisy(24, 24, 12, |x, _| if x < 12 { 0.0 } else { 1.0 });
        let labels = LabelField::from_fn(24, 24, |x, y| usize::from(x >= 10 + (y / 6) % 2 * 4));
        let cfg = SolverConfig {
            alpha: 400.0,
            ..SolverConfig::default()
        };
        let grads: Vec<_> = (0..2)
            .map(|k| compute_region_gradient(std::slice::from_ref(&img), &labels.mask(k), k, 3, &cfg).unwrap())
            .collect();
        let diam = (0..2).map(|k| labels.mask(k).geodesic_diameter()).max().unwrap() as f64;
        let t_max = diam * diam;
        let flips = flip_scan(&img, &labels, OracleConfig::new(t_max)).unwrap();
        let mut fd = Vec::new();
        let mut an = Vec::new();
        for f in &flips {
            let k = f.site.1 * 24 + f.site.0;
            fd.push(f.delta);
            an.push(grads[f.to].g.values()[k] - grads[f.from].g.values()[k]);
        }
        let agree = fd.iter().zip(&an).filter(|(a, b)| (**a > 0.0) == (**b > 0.0)).count();
        let frac = agree as f64 / fd.len() as f64;
        let r = pearson(&fd, &an);
        assert!(frac >= 0.85, "sign agreement {frac}");
        assert!(r >= 0.8, "pearson {r}");
    }
}
