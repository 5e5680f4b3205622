//! Motion data term: robust warped residuals segmented through the same
//! multi-scale machinery as intensities.

use rayon::prelude::*;

use crate::descent::DataTerm;
use crate::error::{Error, Result};
use crate::gradient::{gradient_on, RegionGradient};
use crate::grid::{pairwise_sum, LabelField, Partition, RegionMask, ScalarField};
use crate::oracle::{region_energy, OracleConfig};
use crate::solvers::SolverConfig;

/// Two frames of the same size. `occlusion` marks frame-0 sites whose
/// residual must be ignored. A region can carry its own mask instead, for
/// when it is known which layer each occluded site belongs to.
#[derive(Clone, Debug, PartialEq)]
pub struct FramePair {
    frame0: Vec<ScalarField>,
    frame1: Vec<ScalarField>,
    occlusion: Option<RegionMask>,
    region_occlusion: Vec<Option<RegionMask>>,
}

impl FramePair {
    pub fn new(frame0: Vec<ScalarField>, frame1: Vec<ScalarField>, occlusion: Option<RegionMask>) -> Result<Self> {
        let dims = frame0
            .first()
            .ok_or_else(|| Error::invalid("frame0", "at least one channel is required"))?
            .dims();
        if frame0.len() != frame1.len() {
            return Err(Error::invalid("frame1", "channel count differs from frame0"));
        }
        for f in frame0.iter().chain(&frame1) {
            if f.dims() != dims {
                return Err(Error::DimensionMismatch {
                    expected: dims,
                    found: f.dims(),
                });
            }
        }
        if let Some(o) = &occlusion {
            if o.dims() != dims {
                return Err(Error::DimensionMismatch {
                    expected: dims,
                    found: o.dims(),
                });
            }
        }
        Ok(Self {
            frame0,
            frame1,
            occlusion,
            region_occlusion: Vec::new(),
        })
    }

    /// Replaces the shared mask for region `index` only.
    pub fn with_region_occlusion(mut self, index: usize, mask: RegionMask) -> Result<Self> {
        if mask.dims() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                found: mask.dims(),
            });
        }
        if self.region_occlusion.len() <= index {
            self.region_occlusion.resize(index + 1, None);
        }
        self.region_occlusion[index] = Some(mask);
        Ok(self)
    }

    /// Mask used for region `index`: its own if set, else the shared one.
    pub fn occlusion_for(&self, index: usize) -> Option<&RegionMask> {
        self.region_occlusion
            .get(index)
            .and_then(Option::as_ref)
            .or(self.occlusion.as_ref())
    }

    pub fn frame0(&self) -> &[ScalarField] {
        &self.frame0
    }

    pub fn frame1(&self) -> &[ScalarField] {
        &self.frame1
    }

    pub fn occlusion(&self) -> Option<&RegionMask> {
        self.occlusion.as_ref()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frame0[0].dims()
    }

    /// The pair with frames swapped. Occlusion masks are dropped since they
    /// live in frame-0 coordinates.
    pub fn reversed(&self) -> Self {
        Self {
            frame0: self.frame1.clone(),
            frame1: self.frame0.clone(),
            occlusion: None,
            region_occlusion: Vec::new(),
        }
    }

    fn occluded(&self, k: usize) -> bool {
        self.occlusion.as_ref().is_some_and(|o| o.contains_index(k))
    }

    fn occluded_for(&self, index: Option<usize>, k: usize) -> bool {
        match index {
            Some(i) => self.occlusion_for(i).is_some_and(|o| o.contains_index(k)),
            None => self.occluded(k),
        }
    }
}

/// Parametric map from frame-0 sites into frame 1, in pixel units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WarpModel {
    Translation { dx: f64, dy: f64 },
    /// `x' = m[0][0] x + m[0][1] y + m[0][2]`, `y' = m[1][0] x + m[1][1] y + m[1][2]`.
    Affine { m: [[f64; 3]; 2] },
}

/// Which model [`estimate_warp`] fits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WarpKind {
    Translation,
    Affine,
}

impl WarpModel {
    pub const IDENTITY: WarpModel = WarpModel::Translation { dx: 0.0, dy: 0.0 };

    pub fn affine(m: [[f64; 3]; 2]) -> Result<Self> {
        let w = WarpModel::Affine { m };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            WarpModel::Translation { dx, dy } => dx.is_finite() && dy.is_finite(),
            WarpModel::Affine { m } => m.iter().flatten().all(|v| v.is_finite()),
        };
        if !ok {
            return Err(Error::invalid("warp", "parameters must be finite"));
        }
        if self.det().abs() <= 1e-6 {
            return Err(Error::invalid("warp", "linear part is singular"));
        }
        Ok(())
    }

    pub fn det(&self) -> f64 {
        match self {
            WarpModel::Translation { .. } => 1.0,
            WarpModel::Affine { m } => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        }
    }

    pub fn kind(&self) -> WarpKind {
        match self {
            WarpModel::Translation { .. } => WarpKind::Translation,
            WarpModel::Affine { .. } => WarpKind::Affine,
        }
    }

    /// Parameters as a flat list: `[dx, dy]` or the six affine entries row by row.
    pub fn parameters(&self) -> Vec<f64> {
        match self {
            WarpModel::Translation { dx, dy } => vec![*dx, *dy],
            WarpModel::Affine { m } => m.iter().flatten().copied().collect(),
        }
    }

    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        match self {
            WarpModel::Translation { dx, dy } => (x + dx, y + dy),
            WarpModel::Affine { m } => (
                m[0][0] * x + m[0][1] * y + m[0][2],
                m[1][0] * x + m[1][1] * y + m[1][2],
            ),
        }
    }

    pub fn inverse(&self) -> Result<Self> {
        self.validate()?;
        Ok(match *self {
            WarpModel::Translation { dx, dy } => WarpModel::Translation { dx: -dx, dy: -dy },
            WarpModel::Affine { m } => {
                let d = self.det();
                let (a, b, c, e) = (m[1][1] / d, -m[0][1] / d, -m[1][0] / d, m[0][0] / d);
                WarpModel::Affine {
                    m: [
                        [a, b, -(a * m[0][2] + b * m[1][2])],
                        [c, e, -(c * m[0][2] + e * m[1][2])],
                    ],
                }
            }
        })
    }

    fn as_affine(&self) -> [[f64; 3]; 2] {
        match *self {
            WarpModel::Translation { dx, dy } => [[1.0, 0.0, dx], [0.0, 1.0, dy]],
            WarpModel::Affine { m } => m,
        }
    }
}

/// Robust penalty on brightness-constancy violations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RobustNorm {
    /// `min(|d|, threshold)`.
    TruncatedLinear { threshold: f64 },
}

impl Default for RobustNorm {
    fn default() -> Self {
        RobustNorm::TruncatedLinear { threshold: 0.2 }
    }
}

impl RobustNorm {
    pub fn validate(&self) -> Result<()> {
        let RobustNorm::TruncatedLinear { threshold } = self;
        if !(*threshold > 0.0 && threshold.is_finite()) {
            return Err(Error::invalid("threshold", "must be positive and finite"));
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, d: f64) -> f64 {
        let RobustNorm::TruncatedLinear { threshold } = self;
        d.abs().min(*threshold)
    }

    /// Largest value the penalty can take.
    pub fn ceiling(&self) -> f64 {
        let RobustNorm::TruncatedLinear { threshold } = self;
        *threshold
    }
}

/// Bilinear sample; `None` outside the frame.
#[inline]
fn sample(f: &ScalarField, x: f64, y: f64) -> Option<f64> {
    let (w, h) = f.dims();
    const SLACK: f64 = 1e-9;
    if !(x >= -SLACK && y >= -SLACK && x <= (w - 1) as f64 + SLACK && y <= (h - 1) as f64 + SLACK) {
        return None;
    }
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let x0 = (x.floor() as usize).min(w.saturating_sub(2));
    let y0 = (y.floor() as usize).min(h.saturating_sub(2));
    let (tx, ty) = (x - x0 as f64, y - y0 as f64);
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let top = (1.0 - tx) * f.get(x0, y0) + tx * f.get(x1, y0);
    let bottom = (1.0 - tx) * f.get(x0, y1) + tx * f.get(x1, y1);
    Some((1.0 - ty) * top + ty * bottom)
}

/// Brightness-constancy violation `|I1(w(x)) - I0(x)|` (Euclidean over
/// channels) at frame-0 site `k`, or `None` when the warped position leaves
/// the frame.
#[inline]
fn raw_difference(pair: &FramePair, w: &WarpModel, x: usize, y: usize) -> Option<f64> {
    let (wx, wy) = w.apply(x as f64, y as f64);
    let mut sq = 0.0;
    for (c0, c1) in pair.frame0.iter().zip(&pair.frame1) {
        let d = sample(c1, wx, wy)? - c0.get(x, y);
        sq += d * d;
    }
    Some(sq.sqrt())
}

/// Robust residual on a region with its validity mask. Excluded sites
/// (occluded, warped out of frame, or outside the region) are not in `valid`
/// and hold zero in `values`.
#[derive(Clone, Debug, PartialEq)]
pub struct Residual {
    pub values: ScalarField,
    pub valid: RegionMask,
}

impl Residual {
    /// Mean over the valid sites, `None` if there are none.
    pub fn mean(&self) -> Option<f64> {
        if self.valid.is_empty() {
            None
        } else {
            Some(self.values.mean_over(&self.valid))
        }
    }

    /// Values with excluded sites replaced by `fill`.
    pub fn filled(&self, fill: f64) -> ScalarField {
        let (w, h) = self.values.dims();
        ScalarField::from_fn(w, h, |x, y| {
            if self.valid.contains(x, y) {
                self.values.get(x, y)
            } else {
                fill
            }
        })
    }
}

/// `rho(|I1(w(x)) - I0(x)|)` for every site of `region`, skipping the
/// shared occlusion mask.
pub fn residual_field(pair: &FramePair, w: &WarpModel, region: &RegionMask, rho: RobustNorm) -> Result<Residual> {
    residual_masked(pair, None, w, region, rho)
}

/// As [`residual_field`], with the occlusion mask of region `index`.
pub fn region_residual(
    pair: &FramePair,
    index: usize,
    w: &WarpModel,
    region: &RegionMask,
    rho: RobustNorm,
) -> Result<Residual> {
    residual_masked(pair, Some(index), w, region, rho)
}

fn residual_masked(
    pair: &FramePair,
    index: Option<usize>,
    w: &WarpModel,
    region: &RegionMask,
    rho: RobustNorm,
) -> Result<Residual> {
    w.validate()?;
    rho.validate()?;
    if region.dims() != pair.dims() {
        return Err(Error::DimensionMismatch {
            expected: pair.dims(),
            found: region.dims(),
        });
    }
    let (width, height) = pair.dims();
    let mut values = ScalarField::zeros(width, height);
    let mut valid = RegionMask::empty(width, height);
    for (x, y) in region.sites() {
        if pair.occluded_for(index, y * width + x) {
            continue;
        }
        if let Some(d) = raw_difference(pair, w, x, y) {
            values.set(x, y, rho.eval(d));
            valid.set(x, y, true);
        }
    }
    Ok(Residual { values, valid })
}

/// Search radius of the integer translation scan.
pub const SEARCH_RADIUS: i32 = 8;
/// Smallest region [`estimate_warp`] accepts.
pub const MIN_WARP_SITES: usize = 64;

/// Robust cost of a warp on `region`; sites warped out of frame pay the
/// penalty ceiling, occluded sites are skipped.
fn warp_cost(pair: &FramePair, w: &WarpModel, sites: &[(usize, usize)], rho: RobustNorm) -> f64 {
    let width = pair.dims().0;
    let costs: Vec<f64> = sites
        .iter()
        .filter(|&&(x, y)| !pair.occluded(y * width + x))
        .map(|&(x, y)| raw_difference(pair, w, x, y).map_or(rho.ceiling(), |d| rho.eval(d)))
        .collect();
    pairwise_sum(&costs)
}

/// Fits a warp of `kind` on `region`: exhaustive integer translation search
/// over `±SEARCH_RADIUS`, then Gauss-Newton refinement on the inliers,
/// keeping only steps that lower the robust cost.
pub fn estimate_warp(pair: &FramePair, region: &RegionMask, kind: WarpKind, rho: RobustNorm) -> Result<WarpModel> {
    rho.validate()?;
    if region.dims() != pair.dims() {
        return Err(Error::DimensionMismatch {
            expected: pair.dims(),
            found: region.dims(),
        });
    }
    if region.count() < MIN_WARP_SITES {
        return Err(Error::invalid(
            "region",
            format!("{} sites; motion needs at least {MIN_WARP_SITES}", region.count()),
        ));
    }
    let variance: f64 = pair.frame0.iter().map(|c| c.variance_over(region)).sum();
    if variance < 1e-6 {
        return Err(Error::DegenerateRegion { variance });
    }
    let sites: Vec<(usize, usize)> = region.sites().collect();

    let candidates: Vec<(i32, i32)> = (-SEARCH_RADIUS..=SEARCH_RADIUS)
        .flat_map(|dy| (-SEARCH_RADIUS..=SEARCH_RADIUS).map(move |dx| (dx, dy)))
        .collect();
    let costs: Vec<f64> = candidates
        .par_iter()
        .map(|&(dx, dy)| {
            let w = WarpModel::Translation {
                dx: dx as f64,
                dy: dy as f64,
            };
            warp_cost(pair, &w, &sites, rho)
        })
        .collect();
    // ties go to the smallest shift, then scan order
    let mut best = 0;
    for k in 1..candidates.len() {
        let norm = |(dx, dy): (i32, i32)| dx * dx + dy * dy;
        if costs[k] < costs[best] || (costs[k] == costs[best] && norm(candidates[k]) < norm(candidates[best])) {
            best = k;
        }
    }
    let (dx, dy) = candidates[best];
    let mut warp = WarpModel::Translation {
        dx: dx as f64,
        dy: dy as f64,
    };
    if kind == WarpKind::Affine {
        warp = WarpModel::Affine { m: warp.as_affine() };
    }
    let mut cost = costs[best];
    for _ in 0..30 {
        let Some(step) = gauss_newton_step(pair, &warp, &sites, rho) else {
            break;
        };
        let trial = apply_step(&warp, &step);
        if trial.validate().is_err() {
            break;
        }
        let c = warp_cost(pair, &trial, &sites, rho);
        if c < cost {
            let small = step.iter().all(|s| s.abs() < 1e-6);
            warp = trial;
            cost = c;
            if small {
                break;
            }
        } else {
            break;
        }
    }
    Ok(warp)
}

fn apply_step(w: &WarpModel, step: &[f64]) -> WarpModel {
    match *w {
        WarpModel::Translation { dx, dy } => WarpModel::Translation {
            dx: dx + step[0],
            dy: dy + step[1],
        },
        WarpModel::Affine { m } => WarpModel::Affine {
            m: [
                [m[0][0] + step[1], m[0][1] + step[2], m[0][2] + step[0]],
                [m[1][0] + step[4], m[1][1] + step[5], m[1][2] + step[3]],
            ],
        },
    }
}

/// Least-squares update on sites whose difference is below the truncation
/// threshold. Parameter order: `[dx, dy]`, or `[tx, a, b, ty, c, d]` for affine.
fn gauss_newton_step(pair: &FramePair, w: &WarpModel, sites: &[(usize, usize)], rho: RobustNorm) -> Option<Vec<f64>> {
    let width = pair.dims().0;
    let n = match w.kind() {
        WarpKind::Translation => 2,
        WarpKind::Affine => 6,
    };
    let mut jtj = vec![vec![0.0; n]; n];
    let mut jtr = vec![0.0; n];
    let mut used = 0usize;
    for &(x, y) in sites {
        if pair.occluded(y * width + x) {
            continue;
        }
        let (wx, wy) = w.apply(x as f64, y as f64);
        for (c0, c1) in pair.frame0.iter().zip(&pair.frame1) {
            let (Some(v), Some(xp), Some(xm), Some(yp), Some(ym)) = (
                sample(c1, wx, wy),
                sample(c1, wx + 0.5, wy),
                sample(c1, wx - 0.5, wy),
                sample(c1, wx, wy + 0.5),
                sample(c1, wx, wy - 0.5),
            ) else {
                continue;
            };
            let r = v - c0.get(x, y);
            if r.abs() >= rho.ceiling() {
                continue;
            }
            let (gx, gy) = (xp - xm, yp - ym);
            let (fx, fy) = (x as f64, y as f64);
            let j: Vec<f64> = if n == 2 {
                vec![gx, gy]
            } else {
                vec![gx, gx * fx, gx * fy, gy, gy * fx, gy * fy]
            };
            for a in 0..n {
                jtr[a] += j[a] * r;
                for b in 0..n {
                    jtj[a][b] += j[a] * j[b];
                }
            }
            used += 1;
        }
    }
    if used < n {
        return None;
    }
    let step = solve_dense(jtj, jtr.iter().map(|v| -v).collect())?;
    step.iter().all(|v| v.is_finite()).then_some(step)
}

/// Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            let pivot_row = a[col].clone();
            for (v, p) in a[row].iter_mut().zip(&pivot_row).skip(col) {
                *v -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Dense displacement field: site `(x, y)` of frame 0 moves to
/// `(x + u, y + v)` in frame 1.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    u: ScalarField,
    v: ScalarField,
}

/// Flow components above this magnitude mark unknown vectors.
pub const UNKNOWN_FLOW: f64 = 1e9;

impl FlowField {
    pub fn new(u: ScalarField, v: ScalarField) -> Result<Self> {
        if u.dims() != v.dims() {
            return Err(Error::DimensionMismatch {
                expected: u.dims(),
                found: v.dims(),
            });
        }
        Ok(Self { u, v })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.u.dims()
    }

    pub fn u(&self) -> &ScalarField {
        &self.u
    }

    pub fn v(&self) -> &ScalarField {
        &self.v
    }

    fn known(&self, k: usize) -> bool {
        let (u, v) = (self.u.values()[k], self.v.values()[k]);
        u.is_finite() && v.is_finite() && u.abs() < UNKNOWN_FLOW && v.abs() < UNKNOWN_FLOW
    }
}

/// Warp of `kind` matching the flow on `region`: the componentwise median
/// for a translation, so a minority of foreign sites has no pull, and a
/// least-squares plane per component for an affine map.
pub fn warp_from_flow(flow: &FlowField, region: &RegionMask, kind: WarpKind) -> Result<WarpModel> {
    if region.dims() != flow.dims() {
        return Err(Error::DimensionMismatch {
            expected: flow.dims(),
            found: region.dims(),
        });
    }
    let width = flow.dims().0;
    let sites: Vec<usize> = region.indices().filter(|&k| flow.known(k)).collect();
    if sites.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let (u, v) = (flow.u.values(), flow.v.values());
    match kind {
        WarpKind::Translation => {
            let median = |c: &[f64]| {
                let mut vals: Vec<f64> = sites.iter().map(|&k| c[k]).collect();
                vals.sort_by(f64::total_cmp);
                let m = vals.len() / 2;
                if vals.len() % 2 == 1 {
                    vals[m]
                } else {
                    0.5 * (vals[m - 1] + vals[m])
                }
            };
            Ok(WarpModel::Translation {
                dx: median(u),
                dy: median(v),
            })
        }
        WarpKind::Affine => {
            let mut ata = vec![vec![0.0; 3]; 3];
            let (mut bx, mut by) = (vec![0.0; 3], vec![0.0; 3]);
            for &k in &sites {
                let (x, y) = ((k % width) as f64, (k / width) as f64);
                let row = [x, y, 1.0];
                for a in 0..3 {
                    bx[a] += row[a] * (x + u[k]);
                    by[a] += row[a] * (y + v[k]);
                    for b in 0..3 {
                        ata[a][b] += row[a] * row[b];
                    }
                }
            }
            let degenerate = || Error::invalid("region", "flow sites are collinear; an affine fit is undetermined");
            let mx = solve_dense(ata.clone(), bx).ok_or_else(degenerate)?;
            let my = solve_dense(ata, by).ok_or_else(degenerate)?;
            WarpModel::affine([[mx[0], mx[1], mx[2]], [my[0], my[1], my[2]]])
        }
    }
}

/// How the multi-scale part of the motion energy is evaluated.
#[derive(Clone, Debug, PartialEq)]
pub enum EnergyMode {
    /// Explicit scale space up to the given horizon.
    Oracle(OracleConfig),
    /// Native-scale estimate from the gradient solves.
    Surrogate(SolverConfig),
    /// Plain robust energy: squared residuals at the finest scale, no
    /// centering and no mean term.
    SingleScaleReference,
}

/// Motion energy with its per-region parts.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionEnergy {
    pub total: f64,
    /// `|<Res_i>|^2` per region.
    pub mean_terms: Vec<f64>,
    /// Multi-scale (or reference) term per region.
    pub scale_terms: Vec<f64>,
    /// Regions with no valid residual site; they contribute zero.
    pub empty_regions: Vec<usize>,
}

/// Region residuals with excluded sites filled by the region's mean residual.
fn filled_residual(
    pair: &FramePair,
    index: usize,
    w: &WarpModel,
    region: &RegionMask,
    rho: RobustNorm,
) -> Result<Option<(Residual, f64)>> {
    let res = region_residual(pair, index, w, region, rho)?;
    Ok(res.mean().map(|m| (res, m)))
}

/// Sum over regions of the squared mean residual plus the scale-space term of
/// the centered residual, evaluated as `mode` says.
pub fn motion_energy(
    pair: &FramePair,
    labels: &LabelField,
    warps: &[WarpModel],
    rho: RobustNorm,
    mode: EnergyMode,
) -> Result<MotionEnergy> {
    let masks = labels.masks(warps.len());
    if labels.max_label().is_some_and(|m| m >= warps.len()) {
        return Err(Error::invalid("warps", "one warp per region is required"));
    }
    let parts: Vec<Result<Option<(f64, f64)>>> = masks
        .par_iter()
        .zip(warps.par_iter())
        .enumerate()
        .map(|(i, (mask, w))| {
            if mask.is_empty() {
                return Ok(None);
            }
            let Some((res, m)) = filled_residual(pair, i, w, mask, rho)? else {
                return Ok(None);
            };
            let filled = res.filled(m);
            let scale = match &mode {
                EnergyMode::Oracle(cfg) => region_energy(&filled, mask, cfg.t_max, cfg.dt)?,
                EnergyMode::Surrogate(cfg) => {
                    gradient_on(&[filled], mask, &res.valid, i, 0, cfg, None)?.surrogate_energy()
                }
                EnergyMode::SingleScaleReference => {
                    let sq: Vec<f64> = res.valid.indices().map(|k| res.values.values()[k].powi(2)).collect();
                    return Ok(Some((0.0, pairwise_sum(&sq))));
                }
            };
            Ok(Some((m * m, scale)))
        })
        .collect();
    let mut out = MotionEnergy {
        total: 0.0,
        mean_terms: vec![0.0; warps.len()],
        scale_terms: vec![0.0; warps.len()],
        empty_regions: Vec::new(),
    };
    for (i, p) in parts.into_iter().enumerate() {
        match p.map_err(|e| e.in_region(i))? {
            Some((mean, scale)) => {
                out.mean_terms[i] = mean;
                out.scale_terms[i] = scale;
                out.total += mean + scale;
            }
            None => out.empty_regions.push(i),
        }
    }
    Ok(out)
}

/// Motion data term for the descent with one fixed warp per region.
#[derive(Clone, Debug)]
pub struct MotionTerm<'a> {
    pub pair: &'a FramePair,
    pub warps: &'a [WarpModel],
    pub rho: RobustNorm,
}

impl DataTerm for MotionTerm<'_> {
    fn dims(&self) -> (usize, usize) {
        self.pair.dims()
    }

    fn region_gradient(
        &self,
        index: usize,
        region: &RegionMask,
        dilation_radius: usize,
        solver: &SolverConfig,
        previous: Option<&RegionGradient>,
    ) -> Result<RegionGradient> {
        let warp = self.warps.get(index).ok_or(Error::MissingGradient(index))?;
        motion_region_gradient(self.pair, warp, region, index, self.rho, dilation_radius, solver, previous)
            .map_err(|e| e.in_region(index))
    }

    fn extra_energy(&self, labels: &LabelField, region_count: usize) -> f64 {
        labels
            .masks(region_count)
            .iter()
            .zip(self.warps)
            .enumerate()
            .filter_map(|(i, (mask, w))| region_residual(self.pair, i, w, mask, self.rho).ok()?.mean())
            .map(|m| m * m)
            .sum()
    }
}

#[allow(clippy::too_many_arguments)]
fn motion_region_gradient(
    pair: &FramePair,
    warp: &WarpModel,
    region: &RegionMask,
    index: usize,
    rho: RobustNorm,
    dilation_radius: usize,
    solver: &SolverConfig,
    previous: Option<&RegionGradient>,
) -> Result<RegionGradient> {
    let (w, h) = pair.dims();
    // residual over the whole frame so the dilated band sees real data
    let full = region_residual(pair, index, warp, &RegionMask::full(w, h), rho)?;
    let in_region = full.valid.intersection(region)?;
    let m = if in_region.is_empty() {
        0.0
    } else {
        full.values.mean_over(&in_region)
    };
    let data = full.filled(m);
    let mut grad = gradient_on(std::slice::from_ref(&data), region, &in_region, index, dilation_radius, solver, previous)?;
    // first-order change of |<Res>|^2 when a valid site joins the region
    let n = in_region.count().max(1) as f64;
    for k in grad.domain.indices() {
        if full.valid.contains_index(k) {
            grad.g.values_mut()[k] += 2.0 * m * (full.values.values()[k] - m) / n;
        }
    }
    Ok(grad)
}

/// Region gradients of the motion energy for the hard labels of `partition`.
pub fn motion_gradient(
    pair: &FramePair,
    partition: &Partition,
    warps: &[WarpModel],
    rho: RobustNorm,
    dilation_radius: usize,
    solver: &SolverConfig,
) -> Result<Vec<RegionGradient>> {
    let n = partition.region_count();
    if warps.len() != n {
        return Err(Error::invalid("warps", "one warp per region is required"));
    }
    let term = MotionTerm { pair, warps, rho };
    partition
        .hard_labels()
        .masks(n)
        .into_par_iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(i, m)| term.region_gradient(i, &m, dilation_radius, solver, None))
        .collect()
}

/// Forward-warps hard labels: each frame-0 site of region `i` lands on the
/// nearest site to `w_i(x)`. Regions are written in ascending index order,
/// so later regions win collisions; unreached sites take label 0. Returns
/// the propagated partition and the regions left empty.
pub fn propagate_labels(partition: &Partition, warps: &[WarpModel]) -> Result<(Partition, Vec<usize>)> {
    let n = partition.region_count();
    if warps.len() != n {
        return Err(Error::invalid("warps", "one warp per region is required"));
    }
    for w in warps {
        w.validate()?;
    }
    let labels = partition.hard_labels();
    let (w, h) = labels.dims();
    let mut out = vec![0usize; w * h];
    for (i, warp) in warps.iter().enumerate() {
        for (x, y) in labels.mask(i).sites() {
            let (wx, wy) = warp.apply(x as f64, y as f64);
            let (tx, ty) = (wx.round(), wy.round());
            if tx >= 0.0 && ty >= 0.0 && (tx as usize) < w && (ty as usize) < h {
                out[ty as usize * w + tx as usize] = i;
            }
        }
    }
    let moved = LabelField::from_vec(w, h, out)?;
    let empty = (0..n).filter(|&i| moved.mask(i).is_empty()).collect();
    Ok((Partition::from_labels(&moved, n)?, empty))
}
