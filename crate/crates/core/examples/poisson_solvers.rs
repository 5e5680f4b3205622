//! Screened Poisson smoothing at several scales and the zero-mean Poisson
//! solve, both restricted to a region.

use stss::fixtures::{random_connected_mask, smooth_random_image};
use stss::grid::masked_laplacian;
use stss::solvers::{solve_screened_poisson_from, solve_zero_mean_poisson_from, SolverConfig};

fn main() -> stss::Result<()> {
    let region = random_connected_mask(40, 30, 11);
    let image = smooth_random_image(40, 30, 12);
    let cfg = SolverConfig::default();
    println!("region of {} sites, image mean {:.6}", region.count(), image.mean_over(&region));
    for alpha in [0.5, 20.0, 400.0, f64::INFINITY] {
        let rep = solve_screened_poisson_from(&image, &region, alpha, &cfg, None)?;
        println!(
            "alpha {alpha:>6}: {:>4} iterations, mean {:.6}, std {:.4}",
            rep.iterations,
            rep.field.mean_over(&region),
            rep.field.variance_over(&region).sqrt()
        );
    }
    let a = image.mean_over(&region);
    let rhs = image.map(|v| a - v);
    // solves -lap(lambda) = rhs
    let rep = solve_zero_mean_poisson_from(&rhs, &region, &cfg, None)?;
    let lap = masked_laplacian(&rep.field, &region)?;
    let residual = lap.zip_with(&rhs, |l, r| l + r)?.norm_over(&region) / rhs.norm_over(&region);
    println!(
        "zero-mean poisson: {} iterations, mean {:.1e}, relative residual {residual:.1e}",
        rep.iterations,
        rep.field.mean_over(&region)
    );
    Ok(())
}
