//! Lattice substrate: scalar fields, region masks, relaxed partitions and the
//! region-aware finite-difference operators everything else is built from.
//!
//! All stencils are 4-connected with unit spacing. A neighbor that lies
//! outside the region (or outside the frame) is treated as a mirrored ghost
//! cell holding the center value, which makes the flux across that edge zero.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Sums a slice by recursive halving. The result does not depend on thread
/// count or on how callers chunk the data.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Dot product with pairwise summation of the elementwise products.
pub fn pairwise_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    const LEAF: usize = 32;
    if a.len() <= LEAF {
        let mut acc = 0.0;
        for (x, y) in a.iter().zip(b) {
            acc += x * y;
        }
        return acc;
    }
    let mid = a.len() / 2;
    pairwise_dot(&a[..mid], &b[..mid]) + pairwise_dot(&a[mid..], &b[mid..])
}

/// In-frame 4-neighbors of `(x, y)` in the order left, right, up, down.
#[inline]
pub fn neighbors4(
    x: usize,
    y: usize,
    width: usize,
    height: usize,
) -> impl Iterator<Item = (usize, usize)> {
    let left = (x > 0).then(|| (x - 1, y));
    let right = (x + 1 < width).then(|| (x + 1, y));
    let up = (y > 0).then(|| (x, y - 1));
    let down = (y + 1 < height).then(|| (x, y + 1));
    [left, right, up, down].into_iter().flatten()
}

fn check_dims(expected: (usize, usize), found: (usize, usize)) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// A real value per lattice site, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            values: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::invalid(
                "values",
                format!(
                    "{} values for a {width}x{height} lattice",
                    values.len()
                ),
            ));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid("values", format!("non-finite value {bad}")));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            values,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.values[y * self.width + x] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination of two fields of equal size.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        check_dims(self.dims(), other.dims())?;
        Ok(Self {
            width: self.width,
            height: self.height,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sum_over(&self, region: &RegionMask) -> f64 {
        debug_assert_eq!(self.dims(), region.dims());
        let selected: Vec<f64> = region.indices().map(|i| self.values[i]).collect();
        pairwise_sum(&selected)
    }

    /// Mean over the member sites of `region`; zero for an empty region.
    pub fn mean_over(&self, region: &RegionMask) -> f64 {
        let n = region.count();
        if n == 0 {
            0.0
        } else {
            self.sum_over(region) / n as f64
        }
    }

    pub fn variance_over(&self, region: &RegionMask) -> f64 {
        let n = region.count();
        if n == 0 {
            return 0.0;
        }
        let mean = self.mean_over(region);
        let sq: Vec<f64> = region
            .indices()
            .map(|i| (self.values[i] - mean).powi(2))
            .collect();
        pairwise_sum(&sq) / n as f64
    }

    /// L2 norm restricted to `region`.
    pub fn norm_over(&self, region: &RegionMask) -> f64 {
        let sq: Vec<f64> = region.indices().map(|i| self.values[i].powi(2)).collect();
        pairwise_sum(&sq).sqrt()
    }

    /// Maximum absolute value restricted to `region`.
    pub fn max_abs_over(&self, region: &RegionMask) -> f64 {
        region
            .indices()
            .fold(0.0, |m, i| m.max(self.values[i].abs()))
    }

    /// Copy of `self` with every site outside `region` set to zero.
    pub fn restricted_to(&self, region: &RegionMask) -> Self {
        let mut out = Self::zeros(self.width, self.height);
        for i in region.indices() {
            out.values[i] = self.values[i];
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Boolean lattice subset; the discrete analogue of a region `R`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RegionMask {
    width: usize,
    height: usize,
    members: Vec<bool>,
    count: usize,
}

impl RegionMask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            members: vec![false; width * height],
            count: 0,
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            members: vec![true; width * height],
            count: width * height,
        }
    }

    pub fn from_vec(width: usize, height: usize, members: Vec<bool>) -> Result<Self> {
        if members.len() != width * height {
            return Err(Error::invalid(
                "members",
                format!("{} sites for a {width}x{height} lattice", members.len()),
            ));
        }
        let count = members.iter().filter(|&&m| m).count();
        Ok(Self {
            width,
            height,
            members,
            count,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut members = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                members.push(f(x, y));
            }
        }
        let count = members.iter().filter(|&&m| m).count();
        Self {
            width,
            height,
            members,
            count,
        }
    }

    /// Axis-aligned rectangle `[x0, x1) x [y0, y1)`, clipped to the frame.
    pub fn rect(width: usize, height: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        Self::from_fn(width, height, |x, y| x >= x0 && x < x1 && y >= y0 && y < y1)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Number of member sites.
    #[inline]
    pub fn count(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.members[y * self.width + x]
    }

    #[inline]
    pub fn contains_index(&self, i: usize) -> bool {
        self.members[i]
    }

    pub fn set(&mut self, x: usize, y: usize, member: bool) {
        let i = y * self.width + x;
        match (self.members[i], member) {
            (false, true) => self.count += 1,
            (true, false) => self.count -= 1,
            _ => {}
        }
        self.members[i] = member;
    }

    pub fn members(&self) -> &[bool] {
        &self.members
    }

    /// Flat indices of member sites in row-major order.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.members
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
    }

    /// `(x, y)` coordinates of member sites in row-major order.
    pub fn sites(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.indices().map(move |i| (i % w, i / w))
    }

    /// A member is a boundary site iff one of its in-frame 4-neighbors is not
    /// a member. Frame edges are walls, not outside.
    pub fn is_boundary(&self, x: usize, y: usize) -> bool {
        self.contains(x, y)
            && neighbors4(x, y, self.width, self.height).any(|(nx, ny)| !self.contains(nx, ny))
    }

    pub fn boundary(&self) -> RegionMask {
        RegionMask::from_fn(self.width, self.height, |x, y| self.is_boundary(x, y))
    }

    pub fn interior(&self) -> RegionMask {
        RegionMask::from_fn(self.width, self.height, |x, y| {
            self.contains(x, y) && !self.is_boundary(x, y)
        })
    }

    pub fn complement(&self) -> RegionMask {
        RegionMask::from_fn(self.width, self.height, |x, y| !self.contains(x, y))
    }

    pub fn union(&self, other: &RegionMask) -> Result<RegionMask> {
        check_dims(self.dims(), other.dims())?;
        RegionMask::from_vec(
            self.width,
            self.height,
            self.members
                .iter()
                .zip(&other.members)
                .map(|(&a, &b)| a || b)
                .collect(),
        )
    }

    pub fn intersection(&self, other: &RegionMask) -> Result<RegionMask> {
        check_dims(self.dims(), other.dims())?;
        RegionMask::from_vec(
            self.width,
            self.height,
            self.members
                .iter()
                .zip(&other.members)
                .map(|(&a, &b)| a && b)
                .collect(),
        )
    }

    pub fn difference(&self, other: &RegionMask) -> Result<RegionMask> {
        check_dims(self.dims(), other.dims())?;
        RegionMask::from_vec(
            self.width,
            self.height,
            self.members
                .iter()
                .zip(&other.members)
                .map(|(&a, &b)| a && !b)
                .collect(),
        )
    }

    pub fn is_subset_of(&self, other: &RegionMask) -> bool {
        self.dims() == other.dims()
            && self
                .members
                .iter()
                .zip(&other.members)
                .all(|(&a, &b)| !a || b)
    }

    /// 4-connected components, each as its own mask, ordered by their first
    /// site in row-major order.
    pub fn components(&self) -> Vec<RegionMask> {
        let mut seen = vec![false; self.members.len()];
        let mut out = Vec::new();
        let mut queue = VecDeque::new();
        for start in self.indices() {
            if seen[start] {
                continue;
            }
            let mut comp = RegionMask::empty(self.width, self.height);
            seen[start] = true;
            queue.push_back(start);
            while let Some(i) = queue.pop_front() {
                let (x, y) = (i % self.width, i / self.width);
                comp.set(x, y, true);
                for (nx, ny) in neighbors4(x, y, self.width, self.height) {
                    let j = ny * self.width + nx;
                    if self.members[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }

    /// Longest shortest 4-connected path (in sites) between two members of the
    /// same component. Diffusion time scales with the square of this length.
    pub fn geodesic_diameter(&self) -> usize {
        let mut best = 0;
        let mut dist = vec![usize::MAX; self.members.len()];
        let mut queue = VecDeque::new();
        for start in self.indices() {
            dist.iter_mut().for_each(|d| *d = usize::MAX);
            dist[start] = 0;
            queue.push_back(start);
            while let Some(i) = queue.pop_front() {
                let d = dist[i];
                best = best.max(d);
                let (x, y) = (i % self.width, i / self.width);
                for (nx, ny) in neighbors4(x, y, self.width, self.height) {
                    let j = ny * self.width + nx;
                    if self.members[j] && dist[j] == usize::MAX {
                        dist[j] = d + 1;
                        queue.push_back(j);
                    }
                }
            }
        }
        best
    }
}

/// Hard label per site.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelField {
    width: usize,
    height: usize,
    labels: Vec<usize>,
}

impl LabelField {
    pub fn from_vec(width: usize, height: usize, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::invalid(
                "labels",
                format!("{} labels for a {width}x{height} lattice", labels.len()),
            ));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> usize) -> Self {
        let mut labels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                labels.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            labels,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> usize {
        self.labels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, label: usize) {
        self.labels[y * self.width + x] = label;
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn max_label(&self) -> Option<usize> {
        self.labels.iter().copied().max()
    }

    pub fn mask(&self, label: usize) -> RegionMask {
        let members = self.labels.iter().map(|&l| l == label).collect();
        RegionMask::from_vec(self.width, self.height, members).expect("dims match")
    }

    /// One mask per label in `0..region_count`.
    pub fn masks(&self, region_count: usize) -> Vec<RegionMask> {
        (0..region_count).map(|i| self.mask(i)).collect()
    }

    /// Number of sites whose label differs from `other`.
    pub fn count_changed(&self, other: &LabelField) -> usize {
        self.labels
            .iter()
            .zip(&other.labels)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// Relaxed indicators `phi_i` with values in `[0, 1]`; hard labels are the
/// per-site argmax.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    indicators: Vec<ScalarField>,
}

impl Partition {
    pub fn new(indicators: Vec<ScalarField>) -> Result<Self> {
        let first = indicators
            .first()
            .ok_or_else(|| Error::invalid("indicators", "need at least one region"))?;
        let dims = first.dims();
        for phi in &indicators {
            check_dims(dims, phi.dims())?;
            if phi.values().iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::invalid("indicators", "values must lie in [0, 1]"));
            }
        }
        Ok(Self { indicators })
    }

    /// One-hot indicators from a label field.
    pub fn from_labels(labels: &LabelField, region_count: usize) -> Result<Self> {
        if region_count == 0 {
            return Err(Error::invalid("region_count", "must be at least 1"));
        }
        if let Some(max) = labels.max_label() {
            if max >= region_count {
                return Err(Error::invalid(
                    "labels",
                    format!("label {max} out of range for {region_count} regions"),
                ));
            }
        }
        let (w, h) = labels.dims();
        let indicators = (0..region_count)
            .map(|i| ScalarField::from_fn(w, h, |x, y| f64::from(u8::from(labels.get(x, y) == i))))
            .collect();
        Ok(Self { indicators })
    }

    pub fn region_count(&self) -> usize {
        self.indicators.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.indicators[0].dims()
    }

    pub fn indicators(&self) -> &[ScalarField] {
        &self.indicators
    }

    pub(crate) fn indicators_mut(&mut self) -> &mut [ScalarField] {
        &mut self.indicators
    }

    pub fn hard_labels(&self) -> LabelField {
        hard_labels(self)
    }
}

/// 5-point Laplacian restricted to `region` with zero-flux edges toward
/// non-members and the frame. Zero outside the region.
pub fn masked_laplacian(f: &ScalarField, region: &RegionMask) -> Result<ScalarField> {
    check_dims(f.dims(), region.dims())?;
    let (w, h) = f.dims();
    let mut out = ScalarField::zeros(w, h);
    for (x, y) in region.sites() {
        let center = f.get(x, y);
        let mut acc = 0.0;
        for (nx, ny) in neighbors4(x, y, w, h) {
            if region.contains(nx, ny) {
                acc += f.get(nx, ny) - center;
            }
        }
        out.set(x, y, acc);
    }
    Ok(out)
}

/// Neumann Laplacian on the whole frame.
pub fn neumann_laplacian(f: &ScalarField) -> ScalarField {
    let (w, h) = f.dims();
    ScalarField::from_fn(w, h, |x, y| {
        let center = f.get(x, y);
        neighbors4(x, y, w, h).map(|(nx, ny)| f.get(nx, ny) - center).sum()
    })
}

/// Morphological dilation by the L-infinity ball of `radius`, clipped to the
/// frame.
pub fn dilate(region: &RegionMask, radius: usize) -> RegionMask {
    if radius == 0 || region.is_empty() {
        return region.clone();
    }
    let (w, h) = region.dims();
    // Separable: a square structuring element is a row pass then a column pass.
    let mut rows = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            if region.contains(x, y) {
                let lo = x.saturating_sub(radius);
                let hi = (x + radius).min(w - 1);
                for xx in lo..=hi {
                    rows[y * w + xx] = true;
                }
            }
        }
    }
    let mut out = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            if rows[y * w + x] {
                let lo = y.saturating_sub(radius);
                let hi = (y + radius).min(h - 1);
                for yy in lo..=hi {
                    out[yy * w + x] = true;
                }
            }
        }
    }
    RegionMask::from_vec(w, h, out).expect("dims match")
}

/// Symmetric Hausdorff distance between two site sets, in Euclidean site
/// units. `None` if either set is empty.
pub fn hausdorff_distance(a: &RegionMask, b: &RegionMask) -> Result<Option<f64>> {
    check_dims(a.dims(), b.dims())?;
    if a.is_empty() || b.is_empty() {
        return Ok(None);
    }
    let directed = |from: &RegionMask, to: &RegionMask| {
        let targets: Vec<(usize, usize)> = to.sites().collect();
        from.sites()
            .filter(|&(x, y)| !to.contains(x, y))
            .map(|(x, y)| {
                targets
                    .iter()
                    .map(|&(tx, ty)| {
                        let (dx, dy) = (x as f64 - tx as f64, y as f64 - ty as f64);
                        dx * dx + dy * dy
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    Ok(Some(directed(a, b).max(directed(b, a)).sqrt()))
}

/// Per-site argmax over the indicators; the lowest index wins ties.
pub fn hard_labels(partition: &Partition) -> LabelField {
    let (w, h) = partition.dims();
    let phis = partition.indicators();
    LabelField::from_fn(w, h, |x, y| {
        let mut best = 0;
        let mut best_value = phis[0].get(x, y);
        for (i, phi) in phis.iter().enumerate().skip(1) {
            let v = phi.get(x, y);
            if v > best_value {
                best = i;
                best_value = v;
            }
        }
        best
    })
}

/// Finite-difference scheme for `|grad f|`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradientScheme {
    /// Central differences with mirrored ghost cells; used for `|grad lambda|^2`.
    Central,
    /// Godunov upwinding for `f_t + F |grad f| = 0` with `F > 0`.
    UpwindPositive,
    /// Godunov upwinding for `F < 0`.
    UpwindNegative,
}

/// Gradient magnitude on `region` (zero outside it). Neighbors outside the
/// region or frame are mirrored, so one-sided differences toward them vanish.
pub fn spatial_gradient_magnitude(
    f: &ScalarField,
    region: &RegionMask,
    scheme: GradientScheme,
) -> Result<ScalarField> {
    check_dims(f.dims(), region.dims())?;
    let (w, h) = f.dims();
    let mut out = ScalarField::zeros(w, h);
    for (x, y) in region.sites() {
        let g = match scheme {
            GradientScheme::Central => {
                let (gx, gy) = central_gradient(f, region, x, y);
                (gx * gx + gy * gy).sqrt()
            }
            GradientScheme::UpwindPositive => godunov(f, region, x, y, true),
            GradientScheme::UpwindNegative => godunov(f, region, x, y, false),
        };
        out.set(x, y, g);
    }
    Ok(out)
}

/// Upwind gradient magnitude where the upwind side at each site follows the
/// sign of `speed` there. Sites with zero speed get zero.
pub fn upwind_gradient_magnitude(
    f: &ScalarField,
    speed: &ScalarField,
    region: &RegionMask,
) -> Result<ScalarField> {
    check_dims(f.dims(), region.dims())?;
    check_dims(f.dims(), speed.dims())?;
    let (w, h) = f.dims();
    let mut out = ScalarField::zeros(w, h);
    for (x, y) in region.sites() {
        let s = speed.get(x, y);
        if s != 0.0 {
            out.set(x, y, godunov(f, region, x, y, s > 0.0));
        }
    }
    Ok(out)
}

/// Value of the neighbor at `(nx, ny)` if it is an in-frame member, else the
/// mirrored center value.
#[inline]
fn ghost(f: &ScalarField, region: &RegionMask, x: usize, y: usize, nx: Option<usize>, ny: Option<usize>) -> f64 {
    match (nx, ny) {
        (Some(nx), Some(ny)) if nx < f.width() && ny < f.height() && region.contains(nx, ny) => {
            f.get(nx, ny)
        }
        _ => f.get(x, y),
    }
}

/// One-sided differences `(D-x, D+x, D-y, D+y)` at a member site.
#[inline]
fn one_sided(f: &ScalarField, region: &RegionMask, x: usize, y: usize) -> (f64, f64, f64, f64) {
    let c = f.get(x, y);
    let left = ghost(f, region, x, y, x.checked_sub(1), Some(y));
    let right = ghost(f, region, x, y, Some(x + 1), Some(y));
    let up = ghost(f, region, x, y, Some(x), y.checked_sub(1));
    let down = ghost(f, region, x, y, Some(x), Some(y + 1));
    (c - left, right - c, c - up, down - c)
}

#[inline]
pub(crate) fn central_gradient(f: &ScalarField, region: &RegionMask, x: usize, y: usize) -> (f64, f64) {
    let (dmx, dpx, dmy, dpy) = one_sided(f, region, x, y);
    (0.5 * (dmx + dpx), 0.5 * (dmy + dpy))
}

#[inline]
fn godunov(f: &ScalarField, region: &RegionMask, x: usize, y: usize, positive: bool) -> f64 {
    let (dmx, dpx, dmy, dpy) = one_sided(f, region, x, y);
    let sq = if positive {
        dmx.max(0.0).powi(2) + dpx.min(0.0).powi(2) + dmy.max(0.0).powi(2) + dpy.min(0.0).powi(2)
    } else {
        dmx.min(0.0).powi(2) + dpx.max(0.0).powi(2) + dmy.min(0.0).powi(2) + dpy.max(0.0).powi(2)
    };
    sq.sqrt()
}
