//! 5G-NR style link-level simulation: LDPC base graph 1, rate matching,
//! QPSK over AWGN and Monte-Carlo BLER estimation.

pub mod base_graph;
pub mod channel;
pub mod ldpc;
pub mod modem;
pub mod rate_match;
pub mod segment;
pub mod sim;

use thiserror::Error;

pub use base_graph::BaseGraph;
pub use channel::{awgn_channel, noise_variance};
pub use ldpc::{DecodeOutput, InfoBlockSize, LdpcCode, MinSumDecoder};
pub use modem::{qpsk_llr, qpsk_modulate};
pub use rate_match::{e_bits, rate_match, rate_recover, CodeRate};
pub use segment::{segment_payload, Segmentation};
pub use sim::{decode_rate_matched, simulate_bler, LinkConfig, LinkResult};

#[derive(Debug, Error, PartialEq)]
pub enum PhyError {
    #[error("base graph descriptor: {0}")]
    Descriptor(String),
    #[error("length mismatch: expected {expected} bits, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("empty payload")]
    EmptyPayload,
    #[error("invalid link configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown code rate {0:?}")]
    UnknownRate(String),
}
