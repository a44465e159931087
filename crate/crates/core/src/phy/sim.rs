//! Monte-Carlo block error rate estimation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::channel::{awgn_channel, noise_variance};
use super::ldpc::{DecodeOutput, InfoBlockSize, LdpcCode, MinSumDecoder};
use super::modem::{qpsk_llr, qpsk_modulate};
use super::rate_match::{e_bits, rate_match, rate_recover, CodeRate};
use super::PhyError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub info_block: InfoBlockSize,
    pub code_rate: CodeRate,
    pub max_decode_iterations: usize,
    /// Es/N0 in dB; `f64::INFINITY` disables noise.
    pub snr_db: f64,
    pub seed: u64,
}

impl LinkConfig {
    pub fn new(info_block: InfoBlockSize, code_rate: CodeRate, snr_db: f64, seed: u64) -> Self {
        Self {
            info_block,
            code_rate,
            max_decode_iterations: 20,
            snr_db,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), PhyError> {
        if self.max_decode_iterations == 0 {
            return Err(PhyError::InvalidConfig(
                "max_decode_iterations must be at least 1".into(),
            ));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(PhyError::InvalidConfig(format!("snr_db {}", self.snr_db)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkResult {
    pub blocks_sent: u64,
    pub block_errors: u64,
    pub bler: f64,
    pub seed: u64,
}

/// Decodes LLRs laid out as produced by [`rate_match`].
pub fn decode_rate_matched(
    code: &LdpcCode,
    decoder: &mut MinSumDecoder,
    llrs: &[f32],
    max_iter: usize,
) -> DecodeOutput {
    decoder.decode(&rate_recover(code, llrs), max_iter)
}

/// Decoder rows needed for a given rate: rows whose parity column carries no
/// transmitted bit contribute nothing and are skipped.
fn active_rows(code: &LdpcCode, rate: CodeRate) -> usize {
    let e = e_bits(code.k(), rate).min(code.buffer_len());
    code.rows_for_span(2 * code.lifting_size() + e)
}

/// Block `i` draws its message and noise from stream `i` of the seed, so the
/// result does not depend on how blocks are spread over threads, and
/// different SNRs reuse the same underlying noise draws.
pub fn simulate_bler(config: &LinkConfig, num_blocks: u64) -> Result<LinkResult, PhyError> {
    config.validate()?;
    if num_blocks == 0 {
        return Err(PhyError::InvalidConfig("num_blocks must be at least 1".into()));
    }
    let code = LdpcCode::new(config.info_block);
    let rows = active_rows(&code, config.code_rate);
    let sigma2 = noise_variance(config.snr_db);
    // Noise-free LLR magnitude stays finite.
    let llr_var = sigma2.max(1e-3);

    let block_errors = (0..num_blocks)
        .into_par_iter()
        .map_init(
            || MinSumDecoder::new(&code, rows),
            |decoder, block| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(block);
                let message: Vec<u8> = (0..code.k()).map(|_| rng.random::<bool>() as u8).collect();
                let codeword = code.encode(&message).expect("message has length K");
                let tx = rate_match(&code, &codeword, config.code_rate);
                let rx = awgn_channel(&qpsk_modulate(&tx), config.snr_db, &mut rng);
                let mut llrs = qpsk_llr(&rx, llr_var);
                llrs.truncate(tx.len());
                let out = decode_rate_matched(&code, decoder, &llrs, config.max_decode_iterations);
                (out.message != message) as u64
            },
        )
        .sum::<u64>();

    Ok(LinkResult {
        blocks_sent: num_blocks,
        block_errors,
        bler: block_errors as f64 / num_blocks as f64,
        seed: config.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_noise_every_rate() {
        for rate in CodeRate::ALL {
            let cfg = LinkConfig::new(InfoBlockSize::B1056, rate, f64::INFINITY, 3);
            let r = simulate_bler(&cfg, 20).unwrap();
            assert_eq!(r.block_errors, 0, "{rate}");
        }
    }

    #[test]
    fn high_snr_clean() {
        let cfg = LinkConfig::new(InfoBlockSize::B1056, CodeRate::OneThird, 16.0, 0);
        let r = simulate_bler(&cfg, 100).unwrap();
        assert_eq!(r.bler, 0.0);
    }

    #[test]
    fn hopeless_snr_fails() {
        let cfg = LinkConfig::new(InfoBlockSize::B1056, CodeRate::FiveSixths, -5.0, 0);
        let r = simulate_bler(&cfg, 20).unwrap();
        assert_eq!(r.block_errors, 20);
    }

    #[test]
    fn replay_is_identical() {
        let cfg = LinkConfig::new(InfoBlockSize::B1056, CodeRate::TwoThirds, 2.0, 77);
        assert_eq!(simulate_bler(&cfg, 60).unwrap(), simulate_bler(&cfg, 60).unwrap());
    }

    #[test]
    fn independent_of_thread_count() {
        let cfg = LinkConfig::new(InfoBlockSize::B1056, CodeRate::OneHalf, 1.0, 5);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate_bler(&cfg, 64).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn rejects_bad_config() {
        let mut cfg = LinkConfig::new(InfoBlockSize::B1056, CodeRate::OneHalf, 1.0, 5);
        assert!(simulate_bler(&cfg, 0).is_err());
        cfg.max_decode_iterations = 0;
        assert!(simulate_bler(&cfg, 1).is_err());
    }

    #[test]
    fn trimmed_rows_match_full_graph() {
        // Rows beyond the transmitted span only see erased parity bits.
        let code = LdpcCode::new(InfoBlockSize::B1056);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let message: Vec<u8> = (0..code.k()).map(|_| rng.random::<bool>() as u8).collect();
        let tx = rate_match(&code, &code.encode(&message).unwrap(), CodeRate::FiveSixths);
        let rx = awgn_channel(&qpsk_modulate(&tx), 8.0, &mut rng);
        let llrs = qpsk_llr(&rx, noise_variance(8.0));
        let mut trimmed = MinSumDecoder::new(&code, active_rows(&code, CodeRate::FiveSixths));
        let mut full = MinSumDecoder::new(&code, 46);
        let a = decode_rate_matched(&code, &mut trimmed, &llrs, 20);
        let b = decode_rate_matched(&code, &mut full, &llrs, 1);
        let a1 = decode_rate_matched(&code, &mut trimmed, &llrs, 1);
        assert_eq!(a1.message, b.message);
        assert_eq!(a.message, message);
    }
}
