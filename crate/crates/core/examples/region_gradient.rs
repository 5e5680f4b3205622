//! Region gradients on a noisy step with a misplaced split, and the predicted
//! energy change of single-site flips next to the brute-force value.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use stss::gradient::{compute_band_force, compute_region_gradient};
use stss::grid::{LabelField, ScalarField};
use stss::oracle::{flip_scan, OracleConfig};
use stss::solvers::SolverConfig;

fn main() -> stss::Result<()> {
    let (w, h) = (20, 20);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let noise = Normal::new(0.0, 0.1).expect("finite sigma");
    let image = ScalarField::from_fn(w, h, |x, _| f64::from(u8::from(x >= 10)) + noise.sample(&mut rng));
    let labels = LabelField::from_fn(w, h, |x, _| usize::from(x >= 7));
    let grads = (0..2)
        .map(|k| compute_region_gradient(std::slice::from_ref(&image), &labels.mask(k), k, 3, &SolverConfig::default()))
        .collect::<stss::Result<Vec<_>>>()?;
    let (force, band) = compute_band_force(&grads, 0, 1)?;
    println!("band of {} sites; mean force per column (negative grows region 0):", band.count());
    for x in 4..11 {
        let col: Vec<f64> = (0..h).filter(|&y| band.contains(x, y)).map(|y| force.get(x, y)).collect();
        if !col.is_empty() {
            println!("  x={x:>2}  {:+.4}", col.iter().sum::<f64>() / col.len() as f64);
        }
    }
    let diam = (0..2).map(|k| labels.mask(k).geodesic_diameter()).max().unwrap_or(1) as f64;
    let flips = flip_scan(&image, &labels, OracleConfig::new(diam * diam))?;
    println!("\n{:>8} {:>4} {:>12} {:>12}", "site", "to", "brute", "predicted");
    for f in flips.iter().take(10) {
        let k = f.site.1 * w + f.site.0;
        let predicted = grads[f.to].g.values()[k] - grads[f.from].g.values()[k];
        println!("{:>8?} {:>4} {:>12.5} {:>12.5}", f.site, f.to, f.delta, predicted);
    }
    Ok(())
}
