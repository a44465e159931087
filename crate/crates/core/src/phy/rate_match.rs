//! Redundancy-version-0 rate matching over the circular buffer.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ldpc::LdpcCode;
use super::PhyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CodeRate {
    OneThird,
    OneHalf,
    TwoThirds,
    FiveSixths,
}

impl CodeRate {
    /// Ascending order.
    pub const ALL: [CodeRate; 4] = [
        CodeRate::OneThird,
        CodeRate::OneHalf,
        CodeRate::TwoThirds,
        CodeRate::FiveSixths,
    ];

    pub fn fraction(self) -> (u64, u64) {
        match self {
            CodeRate::OneThird => (1, 3),
            CodeRate::OneHalf => (1, 2),
            CodeRate::TwoThirds => (2, 3),
            CodeRate::FiveSixths => (5, 6),
        }
    }

    pub fn value(self) -> f64 {
        let (n, d) = self.fraction();
        n as f64 / d as f64
    }
}

impl fmt::Display for CodeRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (n, d) = self.fraction();
        write!(f, "{n}/{d}")
    }
}

impl FromStr for CodeRate {
    type Err = PhyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CodeRate::ALL
            .into_iter()
            .find(|r| r.to_string() == s.trim())
            .ok_or_else(|| PhyError::UnknownRate(s.to_string()))
    }
}

/// Transmitted bits for `k` information bits: `k / rate` rounded half-up to
/// an even number.
pub fn e_bits(k: usize, rate: CodeRate) -> usize {
    let (num, den) = rate.fraction();
    let half = (k as u64 * den + num) / (2 * num);
    2 * half as usize
}

/// Reads `e_bits` bits circularly from the codeword, starting after the two
/// punctured systematic columns.
pub fn rate_match(code: &LdpcCode, codeword: &[u8], rate: CodeRate) -> Vec<u8> {
    let start = 2 * code.lifting_size();
    let ncb = code.buffer_len();
    (0..e_bits(code.k(), rate)).map(|i| codeword[start + i % ncb]).collect()
}

/// Maps received LLRs back onto the full codeword layout. Repeated positions
/// are combined by summing; untransmitted ones stay 0.
pub fn rate_recover(code: &LdpcCode, llrs: &[f32]) -> Vec<f32> {
    let start = 2 * code.lifting_size();
    let ncb = code.buffer_len();
    let mut out = vec![0.0; code.n_full()];
    for (i, &l) in llrs.iter().enumerate() {
        out[start + i % ncb] += l;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::ldpc::InfoBlockSize;

    #[test]
    fn e_values() {
        assert_eq!(e_bits(8448, CodeRate::OneThird), 25_344);
        assert_eq!(e_bits(1056, CodeRate::OneHalf), 2_112);
        assert_eq!(e_bits(1056, CodeRate::FiveSixths), 1_268);
        assert_eq!(e_bits(8448, CodeRate::FiveSixths), 10_138);
        assert_eq!(e_bits(1056, CodeRate::TwoThirds), 1_584);
        assert_eq!(e_bits(1056, CodeRate::OneThird), 3_168);
    }

    #[test]
    fn e_is_even_and_nearest() {
        for k in [1056, 8448] {
            for r in CodeRate::ALL {
                let e = e_bits(k, r);
                assert_eq!(e % 2, 0);
                assert!((e as f64 - k as f64 / r.value()).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn fits_buffer_at_supported_sizes() {
        for size in [InfoBlockSize::B1056, InfoBlockSize::A8448] {
            let code = LdpcCode::new(size);
            for r in CodeRate::ALL {
                assert!(e_bits(code.k(), r) <= code.buffer_len());
            }
        }
    }

    #[test]
    fn parse_and_display() {
        for r in CodeRate::ALL {
            assert_eq!(r.to_string().parse::<CodeRate>().unwrap(), r);
        }
        assert!("3/4".parse::<CodeRate>().is_err());
    }

    #[test]
    fn skips_punctured_columns() {
        let code = LdpcCode::new(InfoBlockSize::B1056);
        let cw: Vec<u8> = (0..code.n_full()).map(|i| (i % 7 == 0) as u8).collect();
        let tx = rate_match(&code, &cw, CodeRate::OneHalf);
        assert_eq!(tx.len(), 2112);
        assert_eq!(tx[..], cw[96..96 + 2112]);
    }

    #[test]
    fn recover_places_llrs() {
        let code = LdpcCode::new(InfoBlockSize::B1056);
        let llrs: Vec<f32> = (0..1268).map(|i| i as f32 + 1.0).collect();
        let full = rate_recover(&code, &llrs);
        assert!(full[..96].iter().all(|&l| l == 0.0));
        assert_eq!(full[96], 1.0);
        assert_eq!(full[96 + 1267], 1268.0);
        assert!(full[96 + 1268..].iter().all(|&l| l == 0.0));
    }

    #[test]
    fn recover_sums_wrapped_positions() {
        let code = LdpcCode::with_base(crate::phy::BaseGraph::bg1(), 2);
        let ncb = code.buffer_len();
        let llrs = vec![1.0f32; ncb + 3];
        let full = rate_recover(&code, &llrs);
        assert_eq!(&full[4..7], &[2.0, 2.0, 2.0]);
        assert_eq!(full[7], 1.0);
    }
}
