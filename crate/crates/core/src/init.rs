//! Starting partitions for the descent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{LabelField, ScalarField};

/// Regular tiles: `ceil(sqrt(n))` columns and as many rows as needed, tiles
/// past the last region folded into it.
pub fn tiles(width: usize, height: usize, region_count: usize) -> Result<LabelField> {
    if region_count < 2 {
        return Err(Error::invalid("region_count", "at least two regions are required"));
    }
    if region_count > width * height {
        return Err(Error::invalid("region_count", "more regions than sites"));
    }
    let cols = (region_count as f64).sqrt().ceil() as usize;
    let rows = region_count.div_ceil(cols);
    Ok(LabelField::from_fn(width, height, |x, y| {
        let (c, r) = (x * cols / width, y * rows / height);
        (r * cols + c).min(region_count - 1)
    }))
}

const KMEANS_MAX_ROUNDS: usize = 100;

/// k-means on per-site channel vectors, seeded by k-means++ from `seed`.
/// Clusters are numbered by increasing mean of their center so the result
/// does not depend on the draw order.
pub fn kmeans(channels: &[ScalarField], region_count: usize, seed: u64) -> Result<LabelField> {
    let first = channels.first().ok_or_else(|| Error::invalid("channels", "at least one channel is required"))?;
    let (w, h) = first.dims();
    if region_count < 2 {
        return Err(Error::invalid("region_count", "at least two regions are required"));
    }
    let n = w * h;
    let point = |k: usize| -> Vec<f64> { channels.iter().map(|c| c.values()[k]).collect() };
    let dist = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum() };
    let points: Vec<Vec<f64>> = (0..n).map(point).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![points[rng.random_range(0..n)].clone()];
    let mut nearest: Vec<f64> = points.iter().map(|p| dist(p, &centers[0])).collect();
    while centers.len() < region_count {
        let total: f64 = nearest.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid(
                "region_count",
                format!("image has fewer than {region_count} distinct values"),
            ));
        }
        let mut target = rng.random_range(0.0..total);
        let mut pick = n - 1;
        for (k, &d) in nearest.iter().enumerate() {
            if target < d {
                pick = k;
                break;
            }
            target -= d;
        }
        centers.push(points[pick].clone());
        for (m, p) in nearest.iter_mut().zip(&points) {
            *m = m.min(dist(p, centers.last().expect("just pushed")));
        }
    }

    let assign = |centers: &[Vec<f64>]| -> Vec<usize> {
        points
            .iter()
            .map(|p| {
                (0..centers.len())
                    .min_by(|&a, &b| dist(p, &centers[a]).total_cmp(&dist(p, &centers[b])))
                    .expect("nonempty")
            })
            .collect()
    };
    let mut labels = assign(&centers);
    for _ in 0..KMEANS_MAX_ROUNDS {
        let dim = channels.len();
        let mut sums = vec![vec![0.0; dim]; region_count];
        let mut counts = vec![0usize; region_count];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        for ((c, s), &m) in centers.iter_mut().zip(sums).zip(&counts) {
            // an emptied cluster keeps its old center
            if m > 0 {
                *c = s.into_iter().map(|v| v / m as f64).collect();
            }
        }
        let next = assign(&centers);
        if next == labels {
            break;
        }
        labels = next;
    }

    let mut order: Vec<usize> = (0..region_count).collect();
    let key = |c: &Vec<f64>| c.iter().sum::<f64>();
    order.sort_by(|&a, &b| key(&centers[a]).total_cmp(&key(&centers[b])).then(a.cmp(&b)));
    let mut rank = vec![0; region_count];
    for (r, &c) in order.iter().enumerate() {
        rank[c] = r;
    }
    let out = LabelField::from_vec(w, h, labels.into_iter().map(|l| rank[l]).collect())?;
    if let Some(empty) = (0..region_count).find(|&l| out.mask(l).is_empty()) {
        return Err(Error::invalid("region_count", format!("k-means left region {empty} empty")));
    }
    Ok(out)
}

/// Checks a loaded label map against the frame size and region count.
pub fn from_label_map(labels: LabelField, dims: (usize, usize), region_count: usize) -> Result<LabelField> {
    if labels.dims() != dims {
        return Err(Error::DimensionMismatch {
            expected: dims,
            found: labels.dims(),
        });
    }
    if let Some(m) = labels.max_label().filter(|&m| m >= region_count) {
        return Err(Error::invalid("init", format!("mask holds label {m} but only {region_count} regions exist")));
    }
    Ok(labels)
}
