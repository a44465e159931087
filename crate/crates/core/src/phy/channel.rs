//! Complex AWGN at a given Es/N0.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

/// Noise variance per complex symbol for unit symbol energy. This is the
/// single place where the SNR reference is fixed (Es/N0); `+inf` gives 0.
pub fn noise_variance(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Adds circularly symmetric Gaussian noise, `σ²/2` per component.
pub fn awgn_channel<R: Rng + ?Sized>(symbols: &[Complex64], snr_db: f64, rng: &mut R) -> Vec<Complex64> {
    let sigma2 = noise_variance(snr_db);
    if sigma2 == 0.0 {
        return symbols.to_vec();
    }
    let sd = (sigma2 / 2.0).sqrt();
    symbols
        .iter()
        .map(|s| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            s + Complex64::new(sd * re, sd * im)
        })
        .collect()
}
