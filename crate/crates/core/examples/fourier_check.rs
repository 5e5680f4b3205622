//! Periodic heat energy computed in space and as a spectral sum.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stss::grid::ScalarField;
use stss::oracle::fourier_transfer_check;

fn main() -> stss::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let raw = ScalarField::from_fn(24, 16, |_, _| rng.random_range(-1.0..1.0));
    let mean = raw.values().iter().sum::<f64>() / raw.len() as f64;
    let image = raw.map(|v| v - mean);
    for t in [0.5, 5.0, 50.0, 500.0] {
        let c = fourier_transfer_check(&image, t)?;
        println!(
            "T={t:>6}: spatial {:.10}  spectral {:.10}  rel {:.1e}",
            c.energy,
            c.spectral,
            c.relative_error()
        );
    }
    Ok(())
}
