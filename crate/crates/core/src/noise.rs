//! Reproducible readout noise for exercising the fitters.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Result};
use crate::series::TimeSeries;

/// Adds independent N(0, σ²) samples to every column of `series`.
///
/// The stream is ChaCha8 seeded with `seed`, drawn column by column, and the
/// seed is recorded in the series metadata.
pub fn add_gaussian_noise(series: &mut TimeSeries, sigma: f64, seed: u64) -> Result<()> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(invalid("noise sigma must be finite and >= 0"));
    }
    let normal = Normal::new(0.0, sigma).map_err(|_| invalid("bad noise sigma"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for column in series.columns_mut() {
        for v in column.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    series.metadata.noise_seed = Some(seed);
    series.metadata.notes.push(alloc::format!(
        "gaussian noise sigma={sigma:e} seed={seed} (ChaCha8)"
    ));
    Ok(())
}
