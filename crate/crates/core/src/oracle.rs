//! Brute-force scale space.
//!
//! Everything here time-steps the region-restricted heat equation explicitly
//! and integrates numerically. It is slow on purpose: the production gradient
//! path in [`crate::gradient`] replaces all of it with two elliptic solves,
//! and these routines exist to check that shortcut.

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::{pairwise_dot, pairwise_sum, LabelField, RegionMask, ScalarField};
use crate::solvers::{check_dt, RegionStencil};

/// Default horizon for a region: ten squared geodesic diameters, long enough
/// for the slowest Neumann mode to have decayed.
pub fn default_t_max(region: &RegionMask) -> f64 {
    let d = region.geodesic_diameter().max(1) as f64;
    10.0 * d * d
}

/// Uniform step count and step size covering `[0, t_max]` with steps no
/// larger than `dt`.
fn time_grid(t_max: f64, dt: f64) -> Result<(usize, f64)> {
    check_dt(dt)?;
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::invalid("t_max", "must be positive and finite"));
    }
    let steps = (t_max / dt - 1e-9).ceil().max(1.0) as usize;
    Ok((steps, t_max / steps as f64))
}

/// Time-indexed stack of heat-equation solutions on one region.
#[derive(Clone, Debug)]
pub struct ScaleSpace {
    times: Vec<f64>,
    slices: Vec<ScalarField>,
    region: RegionMask,
}

impl ScaleSpace {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn slices(&self) -> &[ScalarField] {
        &self.slices
    }

    pub fn region(&self) -> &RegionMask {
        &self.region
    }

    pub fn t_max(&self) -> f64 {
        *self.times.last().expect("scale space has at least one slice")
    }

    /// Region mean of the initial slice; every later slice has the same mean.
    pub fn mean(&self) -> f64 {
        self.slices[0].mean_over(&self.region)
    }
}

/// Forward-Euler scale space of `image` on `region`, storing every step.
pub fn compute_scale_space(
    image: &ScalarField,
    region: &RegionMask,
    t_max: f64,
    dt: f64,
) -> Result<ScaleSpace> {
    compute_scale_space_strided(image, region, t_max, dt, 1)
}

/// As [`compute_scale_space`] but keeps only every `stride`-th step (plus the
/// final one). Quadrature over a strided stack is correspondingly coarser.
pub fn compute_scale_space_strided(
    image: &ScalarField,
    region: &RegionMask,
    t_max: f64,
    dt: f64,
    stride: usize,
) -> Result<ScaleSpace> {
    if image.dims() != region.dims() {
        return Err(Error::DimensionMismatch {
            expected: image.dims(),
            found: region.dims(),
        });
    }
    if region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let stride = stride.max(1);
    let (steps, h) = time_grid(t_max, dt)?;
    let stencil = RegionStencil::new(region);
    let mut u = stencil.gather(image);
    let mut scratch = vec![0.0; u.len()];
    let mut times = vec![0.0];
    let mut slices = vec![image.clone()];
    for k in 1..=steps {
        stencil.heat_step_in_place(&mut u, h, &mut scratch);
        if k % stride == 0 || k == steps {
            times.push(if k == steps { t_max } else { k as f64 * h });
            slices.push(stencil.scatter_into(image, &u));
        }
    }
    Ok(ScaleSpace {
        times,
        slices,
        region: region.clone(),
    })
}

/// Trapezoidal quadrature of `sum_R |u(t) - a|^2` over the stored times.
pub fn energy_direct(space: &ScaleSpace) -> f64 {
    let a = space.mean();
    let stencil = RegionStencil::new(&space.region);
    let integrand: Vec<f64> = space
        .slices
        .iter()
        .map(|s| {
            let d: Vec<f64> = stencil.gather(s).iter().map(|v| v - a).collect();
            pairwise_dot(&d, &d)
        })
        .collect();
    trapezoid(&space.times, &integrand)
}

fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    let parts: Vec<f64> = times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .collect();
    pairwise_sum(&parts)
}

/// The same quadrature as [`energy_direct`] without storing the stack.
pub fn region_energy(image: &ScalarField, region: &RegionMask, t_max: f64, dt: f64) -> Result<f64> {
    if region.is_empty() {
        return Ok(0.0);
    }
    let (steps, h) = time_grid(t_max, dt)?;
    let stencil = RegionStencil::new(region);
    let mut u = stencil.gather(image);
    let a = pairwise_sum(&u) / u.len() as f64;
    let mut scratch = vec![0.0; u.len()];
    let sq = |u: &[f64]| {
        let d: Vec<f64> = u.iter().map(|v| v - a).collect();
        pairwise_dot(&d, &d)
    };
    let mut parts = Vec::with_capacity(steps);
    let mut prev = sq(&u);
    for _ in 0..steps {
        stencil.heat_step_in_place(&mut u, h, &mut scratch);
        let next = sq(&u);
        parts.push(0.5 * h * (prev + next));
        prev = next;
    }
    Ok(pairwise_sum(&parts))
}

/// `lambda(t) = -int_t^{T_max - t} (u(tau) - a) dtau`, the explicit multiplier
/// with horizon `T = T_max / 2` written after the substitution
/// `tau = 2s - t`. The integrand is interpolated linearly between slices.
pub fn lambda_direct(space: &ScaleSpace, t: f64) -> Result<ScalarField> {
    let t_max = space.t_max();
    if !(0.0..=0.5 * t_max).contains(&t) {
        return Err(Error::OutOfRange {
            t,
            min: 0.0,
            max: 0.5 * t_max,
        });
    }
    let (lo, hi) = (t, t_max - t);
    let a = space.mean();
    let stencil = RegionStencil::new(&space.region);
    let n = stencil.len();
    let sample = |k: usize| -> Vec<f64> { stencil.gather(&space.slices[k]).iter().map(|v| v - a).collect() };
    let mut acc = vec![0.0; n];
    let times = &space.times;
    for k in 0..times.len() - 1 {
        let (t0, t1) = (times[k], times[k + 1]);
        let (s0, s1) = (t0.max(lo), t1.min(hi));
        if s1 <= s0 {
            continue;
        }
        let f0 = sample(k);
        let f1 = sample(k + 1);
        let span = t1 - t0;
        // Exact integral of the linear interpolant over [s0, s1].
        let w0 = (s0 - t0) / span;
        let w1 = (s1 - t0) / span;
        let len = s1 - s0;
        for i in 0..n {
            let g0 = f0[i] + (f1[i] - f0[i]) * w0;
            let g1 = f0[i] + (f1[i] - f0[i]) * w1;
            acc[i] += 0.5 * len * (g0 + g1);
        }
    }
    let neg: Vec<f64> = acc.iter().map(|v| -v).collect();
    Ok(stencil.scatter(&neg))
}

/// `lambda(0) = -int_0^{t_max} (u - a)` computed while stepping, without
/// storing the stack.
pub fn lambda_zero_streaming(
    image: &ScalarField,
    region: &RegionMask,
    t_max: f64,
    dt: f64,
) -> Result<ScalarField> {
    if region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let (steps, h) = time_grid(t_max, dt)?;
    let stencil = RegionStencil::new(region);
    let mut u = stencil.gather(image);
    let a = pairwise_sum(&u) / u.len() as f64;
    let mut scratch = vec![0.0; u.len()];
    let mut acc: Vec<f64> = u.iter().map(|v| 0.5 * h * (v - a)).collect();
    for k in 1..=steps {
        stencil.heat_step_in_place(&mut u, h, &mut scratch);
        let w = if k == steps { 0.5 * h } else { h };
        for (s, v) in acc.iter_mut().zip(&u) {
            *s += w * (v - a);
        }
    }
    let neg: Vec<f64> = acc.iter().map(|v| -v).collect();
    Ok(stencil.scatter(&neg))
}

/// Integrates the adjoint equation `lambda_t + lap(lambda) = 2 (u - a)`
/// backwards from `lambda(T) = 0` with `T = T_max / 2`, returning
/// `lambda(0)`. The forcing is averaged over each step. Requires an
/// unstrided stack.
pub fn lambda_backward(space: &ScaleSpace) -> Result<ScalarField> {
    let times = &space.times;
    let h = times[1] - times[0];
    let uniform = times
        .windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.max(1.0));
    if !uniform {
        return Err(Error::invalid("space", "backward integration needs an unstrided stack"));
    }
    check_dt(h)?;
    let half = 0.5 * space.t_max();
    let last = times.iter().rposition(|&t| t <= half + 1e-9 * half).unwrap_or(0);
    let a = space.mean();
    let stencil = RegionStencil::new(&space.region);
    let forcing = |k: usize| -> Vec<f64> { stencil.gather(&space.slices[k]).iter().map(|v| v - a).collect() };
    let mut lambda = vec![0.0; stencil.len()];
    let mut lap = vec![0.0; stencil.len()];
    let mut f_hi = forcing(last);
    for k in (1..=last).rev() {
        let f_lo = forcing(k - 1);
        stencil.laplacian(&lambda, &mut lap);
        for i in 0..lambda.len() {
            lambda[i] += h * lap[i] - h * (f_hi[i] + f_lo[i]);
        }
        f_hi = f_lo;
    }
    Ok(stencil.scatter(&lambda))
}

/// Energy and spectral prediction for the periodic-domain transfer identity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransferCheck {
    /// Time integral of `sum |u(t)|^2` on the torus, computed in real space.
    pub energy: f64,
    /// `sum_w (1 - exp(-2 mu T)) / (2 mu) |I^(w)|^2 / |Omega|` over nonzero
    /// frequencies, `mu` the periodic 5-point eigenvalue.
    pub spectral: f64,
}

impl TransferCheck {
    pub fn relative_error(&self) -> f64 {
        let scale = self.spectral.abs().max(self.energy.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.energy - self.spectral).abs() / scale
        }
    }
}

fn periodic_laplacian(w: usize, h: usize, x: &[f64], out: &mut [f64]) {
    for y in 0..h {
        let up = (y + h - 1) % h;
        let down = (y + 1) % h;
        for xx in 0..w {
            let left = (xx + w - 1) % w;
            let right = (xx + 1) % w;
            let c = x[y * w + xx];
            out[y * w + xx] =
                x[y * w + left] + x[y * w + right] + x[up * w + xx] + x[down * w + xx] - 4.0 * c;
        }
    }
}

/// Eigenvalue of the negated periodic 5-point Laplacian at frequency `(k, l)`.
pub fn periodic_eigenvalue(width: usize, height: usize, k: usize, l: usize) -> f64 {
    let sx = (std::f64::consts::PI * k as f64 / width as f64).sin();
    let sy = (std::f64::consts::PI * l as f64 / height as f64).sin();
    4.0 * (sx * sx + sy * sy)
}

/// Real-space energy `int_0^T |u(t)|^2 dt` for the periodic heat flow.
///
/// Each step applies the propagator `exp(h L)` as a Taylor series and adds the
/// exact in-step integral `h <u, phi(2 h L) u>` with `phi(z) = (e^z - 1) / z`,
/// so the result carries no time-discretization error.
fn periodic_energy(image: &ScalarField, t_max: f64) -> f64 {
    const STEP: f64 = 0.05;
    const TERMS: usize = 40;
    let (w, h) = image.dims();
    let n = w * h;
    let mut u = image.values().to_vec();
    let mut term = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut prop = vec![0.0; n];
    let mut quad = vec![0.0; n];
    let mut parts = Vec::new();
    let mut t = 0.0;
    while t < t_max {
        let step = STEP.min(t_max - t);
        // quad = sum_m (2 h L)^m u / (m + 1)!, with `term` holding (2 h L)^m u / m!
        term.copy_from_slice(&u);
        quad.copy_from_slice(&u);
        for m in 1..TERMS {
            periodic_laplacian(w, h, &term, &mut next);
            let scale = 2.0 * step / m as f64;
            for i in 0..n {
                term[i] = scale * next[i];
                quad[i] += term[i] / (m + 1) as f64;
            }
        }
        parts.push(step * pairwise_dot(&u, &quad));
        // prop = exp(h L) u
        term.copy_from_slice(&u);
        prop.copy_from_slice(&u);
        for m in 1..TERMS {
            periodic_laplacian(w, h, &term, &mut next);
            let scale = step / m as f64;
            for i in 0..n {
                term[i] = scale * next[i];
                prop[i] += term[i];
            }
        }
        u.copy_from_slice(&prop);
        t += step;
    }
    pairwise_sum(&parts)
}

/// Spectral side: 2-D DFT of `image` weighted by the finite-horizon transfer
/// `(1 - exp(-2 mu T)) / (2 mu)`.
fn periodic_spectral_energy(image: &ScalarField, t_max: f64) -> f64 {
    let (w, h) = image.dims();
    let mut planner = FftPlanner::<f64>::new();
    let row_fft = planner.plan_fft_forward(w);
    let col_fft = planner.plan_fft_forward(h);
    let mut data: Vec<Complex<f64>> = image.values().iter().map(|&v| Complex::new(v, 0.0)).collect();
    for row in data.chunks_mut(w) {
        row_fft.process(row);
    }
    let mut column = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            column[y] = data[y * w + x];
        }
        col_fft.process(&mut column);
        for y in 0..h {
            data[y * w + x] = column[y];
        }
    }
    let mut parts = Vec::with_capacity(w * h);
    for l in 0..h {
        for k in 0..w {
            if k == 0 && l == 0 {
                continue;
            }
            let mu = periodic_eigenvalue(w, h, k, l);
            let transfer = -(-2.0 * mu * t_max).exp_m1() / (2.0 * mu);
            parts.push(transfer * data[l * w + k].norm_sqr());
        }
    }
    pairwise_sum(&parts) / (w * h) as f64
}

/// Compares the time-integrated energy of the periodic heat flow with its
/// spectral form. `image` must have zero mean: the zero frequency has an
/// unbounded transfer.
pub fn fourier_transfer_check(image: &ScalarField, t_max: f64) -> Result<TransferCheck> {
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::invalid("t_max", "must be positive and finite"));
    }
    let mean = pairwise_sum(image.values()) / image.len().max(1) as f64;
    if mean.abs() > 1e-9 * image.max_abs().max(f64::MIN_POSITIVE) {
        return Err(Error::NonZeroMean { mean });
    }
    Ok(TransferCheck {
        energy: periodic_energy(image, t_max),
        spectral: periodic_spectral_energy(image, t_max),
    })
}

/// Horizon and step for the brute-force energy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleConfig {
    pub t_max: f64,
    pub dt: f64,
}

impl OracleConfig {
    pub fn new(t_max: f64) -> Self {
        Self { t_max, dt: 0.2 }
    }
}

/// Total brute-force energy of a labelling: the sum of [`region_energy`] over
/// every label in `0..region_count`.
pub fn partition_energy(
    image: &ScalarField,
    labels: &LabelField,
    region_count: usize,
    cfg: OracleConfig,
) -> Result<f64> {
    let mut total = 0.0;
    for mask in labels.masks(region_count) {
        total += region_energy(image, &mask, cfg.t_max, cfg.dt)?;
    }
    Ok(total)
}

/// Change in total energy when `site` moves from its current region to the
/// neighbouring region `to`: `E(after) - E(before)`. Only the two affected
/// regions are recomputed.
pub fn boundary_gradient_fd(
    image: &ScalarField,
    labels: &LabelField,
    site: (usize, usize),
    to: usize,
    cfg: OracleConfig,
) -> Result<f64> {
    let (x, y) = site;
    let (w, h) = labels.dims();
    let from = labels.get(x, y);
    let adjacent = crate::grid::neighbors4(x, y, w, h).any(|(nx, ny)| labels.get(nx, ny) == to);
    if from == to || !adjacent {
        return Err(Error::NotOnBoundary { x, y, from, to });
    }
    let before_from = labels.mask(from);
    let before_to = labels.mask(to);
    let mut after_from = before_from.clone();
    after_from.set(x, y, false);
    let mut after_to = before_to.clone();
    after_to.set(x, y, true);
    let e = |m: &RegionMask| region_energy(image, m, cfg.t_max, cfg.dt);
    Ok(e(&after_from)? + e(&after_to)? - e(&before_from)? - e(&before_to)?)
}

/// One entry of an exhaustive flip scan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlipSample {
    pub site: (usize, usize),
    pub from: usize,
    pub to: usize,
    pub delta: f64,
}

/// Every `(site, neighbour label)` pair on an inter-region boundary, in
/// row-major order with targets ascending.
pub fn boundary_flips(labels: &LabelField) -> Vec<((usize, usize), usize)> {
    let (w, h) = labels.dims();
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let from = labels.get(x, y);
            let mut targets: Vec<usize> = crate::grid::neighbors4(x, y, w, h)
                .map(|(nx, ny)| labels.get(nx, ny))
                .filter(|&l| l != from)
                .collect();
            targets.sort_unstable();
            targets.dedup();
            out.extend(targets.into_iter().map(|t| ((x, y), t)));
        }
    }
    out
}

/// [`boundary_gradient_fd`] for every boundary flip, fanned out across sites.
pub fn flip_scan(image: &ScalarField, labels: &LabelField, cfg: OracleConfig) -> Result<Vec<FlipSample>> {
    boundary_flips(labels)
        .into_par_iter()
        .map(|(site, to)| {
            let delta = boundary_gradient_fd(image, labels, site, to, cfg)?;
            Ok(FlipSample {
                site,
                from: labels.get(site.0, site.1),
                to,
                delta,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::{solve_zero_mean_poisson, SolverConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_input_is_flat() {
        let img = ScalarField::filled(6, 5, 0.4);
        let r = RegionMask::rect(6, 5, 1, 0, 5, 4);
        let s = compute_scale_space(&img, &r, 5.0, 0.2).unwrap();
        assert!(s.slices().iter().all(|sl| sl == &img));
        // the region mean of a constant is exact up to rounding
        assert!(energy_direct(&s) < 1e-25);
        let l = lambda_direct(&s, 1.0).unwrap();
        assert!(l.max_abs() < 1e-12);
    }

    #[test]
    fn first_slice_is_input_and_mean_is_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let img = ScalarField::from_fn(10, 10, |_, _| rng.random_range(0.0..1.0));
        let r = RegionMask::rect(10, 10, 2, 1, 9, 8);
        let s = compute_scale_space(&img, &r, 20.0, 0.2).unwrap();
        assert_eq!(s.slices()[0], img);
        let m0 = s.mean();
        for sl in s.slices() {
            assert!((sl.mean_over(&r) - m0).abs() <= 1e-10 * m0.abs());
        }
        assert_eq!(s.times().len(), 101);
        assert_eq!(s.t_max(), 20.0);
    }

    #[test]
    fn rejects_unstable_step() {
        let img = ScalarField::zeros(3, 3);
        assert!(compute_scale_space(&img, &RegionMask::full(3, 3), 1.0, 0.3).is_err());
    }

    /// Two sites with values (0, 2): the difference mode has eigenvalue 2, so
    /// under forward Euler with step h the deviation from the mean is
    /// (1 - 2h)^k and the trapezoid sum is a geometric series.
    #[test]
    fn two_site_energy_matches_mode_decay() {
        let img = ScalarField::from_vec(2, 1, vec![0.0, 2.0]).unwrap();
        let r = RegionMask::full(2, 1);
        let (t_max, h) = (30.0, 0.1);
        let s = compute_scale_space(&img, &r, t_max, h).unwrap();
        let e = energy_direct(&s);
        let steps = (t_max / h).round() as i32;
        let q: f64 = (1.0 - 2.0 * h) * (1.0 - 2.0 * h);
        // integrand at step k: 2 * q^k
        let geometric = 2.0 * h * ((1.0 - q.powi(steps + 1)) / (1.0 - q) - 0.5 * (1.0 + q.powi(steps)));
        assert!((e - geometric).abs() < 1e-12 * geometric);
        // and the continuum value int 2 e^{-4t} dt = 1/2 to first order in h
        assert!((e - 0.5).abs() < 0.5 * h);
    }

    #[test]
    fn streaming_energy_matches_stored() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let img = ScalarField::from_fn(8, 7, |_, _| rng.random_range(0.0..1.0));
        let r = RegionMask::rect(8, 7, 0, 0, 6, 7);
        let s = compute_scale_space(&img, &r, 12.0, 0.2).unwrap();
        let a = energy_direct(&s);
        let b = region_energy(&img, &r, 12.0, 0.2).unwrap();
        assert!((a - b).abs() <= 1e-12 * a);
        let l0 = lambda_direct(&s, 0.0).unwrap();
        let l1 = lambda_zero_streaming(&img, &r, 12.0, 0.2).unwrap();
        let d = l0.zip_with(&l1, |x, y| x - y).unwrap();
        assert!(d.max_abs() < 1e-12 * l0.max_abs());
    }

    #[test]
    fn coarser_input_has_lower_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let img = ScalarField::from_fn(9, 9, |_, _| rng.random_range(0.0..1.0));
        let r = RegionMask::full(9, 9);
        let t = default_t_max(&r);
        let e0 = region_energy(&img, &r, t, 0.2).unwrap();
        let smoother = crate::solvers::heat_step(&img, &r, 0.2).unwrap();
        let e1 = region_energy(&smoother, &r, t, 0.2).unwrap();
        assert!(e1 < e0);
    }

    #[test]
    fn lambda_time_range_is_checked() {
        let img = ScalarField::zeros(3, 3);
        let s = compute_scale_space(&img, &RegionMask::full(3, 3), 2.0, 0.2).unwrap();
        assert!(matches!(lambda_direct(&s, 1.5), Err(Error::OutOfRange { .. })));
        assert!(lambda_direct(&s, 1.0).is_ok());
    }

    #[test]
    fn lambda_zero_approaches_poisson() {
        let img = ScalarField::from_fn(18, 14, |x, y| ((x as f64) * 0.3).sin() + 0.1 * y as f64);
        let r = RegionMask::rect(18, 14, 1, 0, 17, 12);
        let t = default_t_max(&r);
        let direct = lambda_zero_streaming(&img, &r, t, 0.2).unwrap();
        let a = img.mean_over(&r);
        let rhs = img.map(|v| a - v);
        let poisson = solve_zero_mean_poisson(&rhs, &r, &SolverConfig::default()).unwrap();
        let diff = direct.zip_with(&poisson, |x, y| x - y).unwrap();
        assert!(diff.norm_over(&r) / poisson.norm_over(&r) < 1e-2);
        assert!(direct.mean_over(&r).abs() < 1e-6);
    }

    #[test]
    fn backward_adjoint_matches_direct() {
        let img = ScalarField::from_fn(16, 16, |x, y| ((x as f64) * 0.2).cos() + ((y as f64) * 0.15 + 0.3).sin());
        let r = RegionMask::full(16, 16);
        let s = compute_scale_space(&img, &r, default_t_max(&r), 0.2).unwrap();
        let back = lambda_backward(&s).unwrap();
        let direct = lambda_direct(&s, 0.0).unwrap();
        let diff = back.zip_with(&direct, |x, y| x - y).unwrap();
        let rel = diff.max_abs() / direct.max_abs();
        assert!(rel < 1e-2, "{rel}");
    }

    /// A unit-RMS Fourier mode with eigenvalue mu has energy
    /// |Omega| / (2 mu) * (1 - exp(-2 mu T)) on both sides.
    #[test]
    fn fourier_single_mode_closed_form() {
        let (w, h) = (16usize, 12usize);
        let tau = 2.0 * std::f64::consts::PI;
        for (k, l, t) in [(3usize, 2usize, 7.5), (1, 0, 40.0), (8, 6, 0.3)] {
            let img = ScalarField::from_fn(w, h, |x, y| {
                let phase = tau * (k as f64 * x as f64 / w as f64 + l as f64 * y as f64 / h as f64);
                // the Nyquist mode is already +-1
                if 2 * k == w && 2 * l == h {
                    phase.cos()
                } else {
                    std::f64::consts::SQRT_2 * phase.cos()
                }
            });
            let mu = periodic_eigenvalue(w, h, k, l);
            let expect = (w * h) as f64 / (2.0 * mu) * (1.0 - (-2.0 * mu * t).exp());
            let c = fourier_transfer_check(&img, t).unwrap();
            assert!((c.energy - expect).abs() <= 1e-10 * expect, "{} vs {expect}", c.energy);
            assert!((c.spectral - expect).abs() <= 1e-10 * expect, "{} vs {expect}", c.spectral);
        }
    }

    #[test]
    fn fourier_zero_and_nonzero_mean() {
        let c = fourier_transfer_check(&ScalarField::zeros(4, 4), 3.0).unwrap();
        assert_eq!((c.energy, c.spectral), (0.0, 0.0));
        assert!(matches!(
            fourier_transfer_check(&ScalarField::filled(4, 4, 1.0), 3.0),
            Err(Error::NonZeroMean { .. })
        ));
    }

    #[test]
    fn flip_errors_off_boundary() {
        let labels = LabelField::from_fn(6, 6, |x, _| usize::from(x >= 3));
        let img = ScalarField::zeros(6, 6);
        let cfg = OracleConfig::new(2.0);
        assert!(matches!(
            boundary_gradient_fd(&img, &labels, (0, 0), 1, cfg),
            Err(Error::NotOnBoundary { .. })
        ));
        assert_eq!(boundary_gradient_fd(&img, &labels, (2, 3), 1, cfg).unwrap(), 0.0);
        let flips = boundary_flips(&labels);
        assert_eq!(flips.len(), 12);
    }
}
