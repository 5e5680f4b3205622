//! Masked-domain linear solvers: explicit heat stepping, the screened Poisson
//! smoother `v - alpha * lap(v) = I`, and the zero-mean pure-Neumann Poisson
//! problem `-lap(lambda) = rhs - mean(rhs)`.
//!
//! The elliptic problems are solved with Jacobi-preconditioned conjugate
//! gradients on a compact copy of the region; components of at most
//! [`GAUSS_SEIDEL_MAX_SITES`] sites use symmetric Gauss-Seidel instead.

use crate::error::{Error, Result};
use crate::grid::{neighbors4, pairwise_dot, pairwise_sum, RegionMask, ScalarField};

/// Explicit stability bound for the unit-spacing 2-D 5-point Laplacian.
pub const MAX_HEAT_DT: f64 = 0.25;

/// Regions this small skip CG setup and are relaxed directly.
pub const GAUSS_SEIDEL_MAX_SITES: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Relative residual target, measured over the solve domain.
    pub cg_tolerance: f64,
    /// Iteration cap; `None` means `10 * sqrt(|R|)` clamped to `[50, 5000]`.
    pub max_iterations: Option<usize>,
    pub heat_dt: f64,
    /// Screened-Poisson scale. `f64::INFINITY` selects the infinite-time
    /// limit, where the smoothed image collapses to the region mean.
    pub alpha: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cg_tolerance: 1e-8,
            max_iterations: None,
            heat_dt: 0.2,
            alpha: 20.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cg_tolerance > 0.0) {
            return Err(Error::invalid("cg_tolerance", "must be positive"));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::invalid("alpha", "must be positive"));
        }
        check_dt(self.heat_dt)?;
        Ok(())
    }

    pub fn iteration_cap(&self, sites: usize) -> usize {
        self.max_iterations
            .unwrap_or_else(|| ((10.0 * (sites as f64).sqrt()).ceil() as usize).clamp(50, 5000))
    }
}

pub(crate) fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt <= MAX_HEAT_DT {
        Ok(())
    } else {
        Err(Error::invalid(
            "dt",
            format!("{dt} outside the explicit stability range (0, {MAX_HEAT_DT}]"),
        ))
    }
}

fn check_dims(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: a,
            found: b,
        })
    }
}

/// Compact adjacency of a region: member sites renumbered `0..n` with their
/// in-region 4-neighbors in CSR layout.
#[derive(Clone, Debug)]
pub struct RegionStencil {
    width: usize,
    height: usize,
    sites: Vec<usize>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl RegionStencil {
    pub fn new(region: &RegionMask) -> Self {
        let (w, h) = region.dims();
        let sites: Vec<usize> = region.indices().collect();
        let mut local = vec![usize::MAX; w * h];
        for (k, &i) in sites.iter().enumerate() {
            local[i] = k;
        }
        let mut offsets = Vec::with_capacity(sites.len() + 1);
        let mut neighbors = Vec::with_capacity(sites.len() * 4);
        offsets.push(0);
        for &i in &sites {
            let (x, y) = (i % w, i / w);
            for (nx, ny) in neighbors4(x, y, w, h) {
                let j = local[ny * w + nx];
                if j != usize::MAX {
                    neighbors.push(j);
                }
            }
            offsets.push(neighbors.len());
        }
        Self {
            width: w,
            height: h,
            sites,
            offsets,
            neighbors,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    #[inline]
    fn degree(&self, k: usize) -> usize {
        self.offsets[k + 1] - self.offsets[k]
    }

    #[inline]
    fn neighbors_of(&self, k: usize) -> &[usize] {
        &self.neighbors[self.offsets[k]..self.offsets[k + 1]]
    }

    /// Values of `field` at the member sites.
    pub fn gather(&self, field: &ScalarField) -> Vec<f64> {
        self.sites.iter().map(|&i| field.values()[i]).collect()
    }

    /// Writes compact values back into a copy of `base`.
    pub fn scatter_into(&self, base: &ScalarField, values: &[f64]) -> ScalarField {
        let mut out = base.clone();
        let dst = out.values_mut();
        for (&i, &v) in self.sites.iter().zip(values) {
            dst[i] = v;
        }
        out
    }

    pub fn scatter(&self, values: &[f64]) -> ScalarField {
        self.scatter_into(&ScalarField::zeros(self.width, self.height), values)
    }

    /// `out = lap(x)` with zero-flux edges.
    pub fn laplacian(&self, x: &[f64], out: &mut [f64]) {
        for k in 0..self.sites.len() {
            let c = x[k];
            let mut acc = 0.0;
            for &j in self.neighbors_of(k) {
                acc += x[j] - c;
            }
            out[k] = acc;
        }
    }

    /// One explicit Euler step `u += dt * lap(u)`; `scratch` has length n.
    pub fn heat_step_in_place(&self, u: &mut [f64], dt: f64, scratch: &mut [f64]) {
        self.laplacian(u, scratch);
        for (v, l) in u.iter_mut().zip(scratch.iter()) {
            *v += dt * l;
        }
    }
}

/// Outcome of an iterative solve on one domain.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub field: ScalarField,
    pub iterations: usize,
    pub residual: f64,
}

/// Symmetric positive (semi)definite operator `a * x - b * lap(x)` on a stencil.
#[derive(Clone, Copy)]
struct ShiftedLaplacian<'a> {
    stencil: &'a RegionStencil,
    shift: f64,
    scale: f64,
}

impl ShiftedLaplacian<'_> {
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let s = self.stencil;
        for k in 0..s.len() {
            let c = x[k];
            let mut acc = 0.0;
            for &j in s.neighbors_of(k) {
                acc += c - x[j];
            }
            out[k] = self.shift * c + self.scale * acc;
        }
    }

    fn diagonal(&self, k: usize) -> f64 {
        self.shift + self.scale * self.stencil.degree(k) as f64
    }
}

fn norm(v: &[f64]) -> f64 {
    pairwise_dot(v, v).sqrt()
}

fn project_zero_mean(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let mean = pairwise_sum(v) / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

/// Jacobi-preconditioned CG from initial guess `x`. Returns
/// `(iterations, relative residual)`. For the singular Neumann operator the
/// right-hand side must already be orthogonal to constants.
fn pcg(op: ShiftedLaplacian<'_>, b: &[f64], x: &mut [f64], tol: f64, cap: usize) -> Result<(usize, f64)> {
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok((0, 0.0));
    }
    let inv_diag: Vec<f64> = (0..n)
        .map(|k| {
            let d = op.diagonal(k);
            if d > 0.0 {
                1.0 / d
            } else {
                1.0
            }
        })
        .collect();
    let mut ax = vec![0.0; n];
    op.apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut rel = norm(&r) / b_norm;
    if rel <= tol {
        return Ok((0, rel));
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = pairwise_dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=cap {
        op.apply(&p, &mut ap);
        let pap = pairwise_dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let step = rz / pap;
        for k in 0..n {
            x[k] += step * p[k];
            r[k] -= step * ap[k];
        }
        rel = norm(&r) / b_norm;
        if rel <= tol {
            // Recompute the true residual; the recurrence can drift.
            op.apply(x, &mut ax);
            let true_rel = norm(&b.iter().zip(&ax).map(|(b, a)| b - a).collect::<Vec<_>>()) / b_norm;
            if true_rel <= tol {
                return Ok((it, true_rel));
            }
            r = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            rel = true_rel;
        }
        for k in 0..n {
            z[k] = r[k] * inv_diag[k];
        }
        let rz_next = pairwise_dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::NotConverged {
        iterations: cap,
        residual: rel,
    })
}

/// Symmetric Gauss-Seidel sweeps for tiny domains.
fn gauss_seidel(
    op: ShiftedLaplacian<'_>,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    cap: usize,
    zero_mean: bool,
) -> Result<(usize, f64)> {
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok((0, 0.0));
    }
    let s = op.stencil;
    let mut ax = vec![0.0; n];
    let mut rel = f64::INFINITY;
    // Small systems converge slowly per sweep but each sweep is trivial.
    let sweeps = cap.max(200) * 20;
    for it in 0..=sweeps {
        op.apply(x, &mut ax);
        rel = norm(&b.iter().zip(&ax).map(|(b, a)| b - a).collect::<Vec<_>>()) / b_norm;
        if rel <= tol {
            return Ok((it, rel));
        }
        let order: Box<dyn Iterator<Item = usize>> = if it % 2 == 0 {
            Box::new(0..n)
        } else {
            Box::new((0..n).rev())
        };
        for k in order {
            let off: f64 = s.neighbors_of(k).iter().map(|&j| x[j]).sum();
            let d = op.diagonal(k);
            if d > 0.0 {
                x[k] = (b[k] + op.scale * off) / d;
            }
        }
        if zero_mean {
            project_zero_mean(x);
        }
    }
    Err(Error::NotConverged {
        iterations: sweeps,
        residual: rel,
    })
}

fn solve_component(
    op: ShiftedLaplacian<'_>,
    b: &[f64],
    x: &mut [f64],
    cfg: &SolverConfig,
    zero_mean: bool,
) -> Result<(usize, f64)> {
    let cap = cfg.iteration_cap(b.len());
    let out = if b.len() <= GAUSS_SEIDEL_MAX_SITES {
        gauss_seidel(op, b, x, cfg.cg_tolerance, cap, zero_mean)?
    } else {
        pcg(op, b, x, cfg.cg_tolerance, cap)?
    };
    if zero_mean {
        project_zero_mean(x);
    }
    Ok(out)
}

/// One explicit heat step on `region`; sites outside are unchanged.
pub fn heat_step(u: &ScalarField, region: &RegionMask, dt: f64) -> Result<ScalarField> {
    check_dt(dt)?;
    check_dims(u.dims(), region.dims())?;
    let stencil = RegionStencil::new(region);
    let mut values = stencil.gather(u);
    let mut scratch = vec![0.0; values.len()];
    stencil.heat_step_in_place(&mut values, dt, &mut scratch);
    Ok(stencil.scatter_into(u, &values))
}

/// Solves `v - alpha * lap(v) = image` on `region` with zero-flux edges.
/// Sites outside the region are zero in the result.
pub fn solve_screened_poisson(
    image: &ScalarField,
    region: &RegionMask,
    alpha: f64,
    cfg: &SolverConfig,
) -> Result<ScalarField> {
    solve_screened_poisson_from(image, region, alpha, cfg, None).map(|r| r.field)
}

/// As [`solve_screened_poisson`], starting CG from `initial` where given.
pub fn solve_screened_poisson_from(
    image: &ScalarField,
    region: &RegionMask,
    alpha: f64,
    cfg: &SolverConfig,
    initial: Option<&ScalarField>,
) -> Result<SolveReport> {
    check_dims(image.dims(), region.dims())?;
    if region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha", "must be positive"));
    }
    if !(cfg.cg_tolerance > 0.0) {
        return Err(Error::invalid("cg_tolerance", "must be positive"));
    }
    let (w, h) = image.dims();
    let mut out = ScalarField::zeros(w, h);
    let mut iterations = 0;
    let mut residual: f64 = 0.0;
    for component in region.components() {
        let stencil = RegionStencil::new(&component);
        let b = stencil.gather(image);
        let x = if alpha.is_infinite() {
            let mean = pairwise_sum(&b) / b.len() as f64;
            vec![mean; b.len()]
        } else {
            let op = ShiftedLaplacian {
                stencil: &stencil,
                shift: 1.0,
                scale: alpha,
            };
            let mut x = match initial {
                Some(init) => {
                    check_dims(init.dims(), image.dims())?;
                    stencil.gather(init)
                }
                None => b.clone(),
            };
            let (it, res) = solve_component(op, &b, &mut x, cfg, false)?;
            iterations = iterations.max(it);
            residual = residual.max(res);
            x
        };
        for (&i, v) in stencil.sites().iter().zip(x) {
            out.values_mut()[i] = v;
        }
    }
    Ok(SolveReport {
        field: out,
        iterations,
        residual,
    })
}

/// Solves `-lap(lambda) = rhs - mean(rhs)` with zero-flux edges and
/// `mean(lambda) = 0`, independently on each connected component of `region`.
pub fn solve_zero_mean_poisson(
    rhs: &ScalarField,
    region: &RegionMask,
    cfg: &SolverConfig,
) -> Result<ScalarField> {
    solve_zero_mean_poisson_from(rhs, region, cfg, None).map(|r| r.field)
}

pub fn solve_zero_mean_poisson_from(
    rhs: &ScalarField,
    region: &RegionMask,
    cfg: &SolverConfig,
    initial: Option<&ScalarField>,
) -> Result<SolveReport> {
    check_dims(rhs.dims(), region.dims())?;
    if region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    if !(cfg.cg_tolerance > 0.0) {
        return Err(Error::invalid("cg_tolerance", "must be positive"));
    }
    let (w, h) = rhs.dims();
    let mut out = ScalarField::zeros(w, h);
    let mut iterations = 0;
    let mut residual: f64 = 0.0;
    for component in region.components() {
        let stencil = RegionStencil::new(&component);
        let mut b = stencil.gather(rhs);
        project_zero_mean(&mut b);
        let op = ShiftedLaplacian {
            stencil: &stencil,
            shift: 0.0,
            scale: 1.0,
        };
        let mut x = match initial {
            Some(init) => {
                check_dims(init.dims(), rhs.dims())?;
                let mut x = stencil.gather(init);
                project_zero_mean(&mut x);
                x
            }
            None => vec![0.0; b.len()],
        };
        let (it, res) = solve_component(op, &b, &mut x, cfg, true)?;
        iterations = iterations.max(it);
        residual = residual.max(res);
        for (&i, v) in stencil.sites().iter().zip(x) {
            out.values_mut()[i] = v;
        }
    }
    Ok(SolveReport {
        field: out,
        iterations,
        residual,
    })
}
