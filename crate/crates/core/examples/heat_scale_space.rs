//! Diffuses noise inside an irregular mask and prints how the region energy
//! and the spread of values decay with scale.

use stss::fixtures::random_connected_mask;
use stss::grid::ScalarField;
use stss::oracle::{compute_scale_space, default_t_max, energy_direct};

fn main() -> stss::Result<()> {
    let region = random_connected_mask(32, 32, 3);
    let image = ScalarField::from_fn(32, 32, |x, y| (((x * 7 + y * 13) % 11) as f64) / 10.0);
    let t_max = default_t_max(&region);
    let space = compute_scale_space(&image, &region, t_max, 0.2)?;
    println!("{} sites, horizon {t_max:.0}, {} slices", region.count(), space.slices().len());
    println!("{:>10} {:>12} {:>12}", "t", "mean", "std");
    let mut next = 0.0;
    for (t, u) in space.times().iter().zip(space.slices()) {
        if *t >= next {
            println!("{t:>10.1} {:>12.6} {:>12.3e}", u.mean_over(&region), u.variance_over(&region).sqrt());
            next = if next == 0.0 { 1.0 } else { next * 4.0 };
        }
    }
    println!("energy over the whole horizon: {:.6}", energy_direct(&space));
    Ok(())
}
