//! Gray-mapped QPSK and max-log LLR demapping.

use num_complex::Complex64;

const A: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Maps bit pairs to unit-energy symbols; an odd trailing bit is padded with 0.
pub fn qpsk_modulate(bits: &[u8]) -> Vec<Complex64> {
    let comp = |b: u8| if b == 0 { A } else { -A };
    bits.chunks(2)
        .map(|p| Complex64::new(comp(p[0]), comp(p.get(1).copied().unwrap_or(0))))
        .collect()
}

/// Two LLRs per symbol, `2·√2·y/σ²`, positive meaning bit 0.
pub fn qpsk_llr(symbols: &[Complex64], noise_variance: f64) -> Vec<f32> {
    let scale = 2.0 * std::f64::consts::SQRT_2 / noise_variance;
    symbols
        .iter()
        .flat_map(|s| [(scale * s.re) as f32, (scale * s.im) as f32])
        .collect()
}
