//! Lifted base-graph-1 LDPC code: systematic encoder and a flooding
//! normalized min-sum decoder.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::base_graph::{BaseGraph, BG1_INFO_COLS, BG1_ROWS};
use super::PhyError;

/// Information block sizes: 22·384 and 22·48.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InfoBlockSize {
    A8448,
    B1056,
}

impl InfoBlockSize {
    pub fn bits(self) -> usize {
        match self {
            InfoBlockSize::A8448 => 8448,
            InfoBlockSize::B1056 => 1056,
        }
    }

    pub fn lifting_size(self) -> usize {
        match self {
            InfoBlockSize::A8448 => 384,
            InfoBlockSize::B1056 => 48,
        }
    }

    pub fn from_bits(bits: usize) -> Option<Self> {
        match bits {
            8448 => Some(InfoBlockSize::A8448),
            1056 => Some(InfoBlockSize::B1056),
            _ => None,
        }
    }
}

/// Normalization factor of the min-sum check update.
pub const MIN_SUM_SCALE: f32 = 0.75;

#[derive(Debug, Clone)]
pub struct LdpcCode {
    base: Arc<BaseGraph>,
    zc: usize,
}

impl LdpcCode {
    pub fn new(size: InfoBlockSize) -> Self {
        Self::with_base(BaseGraph::bg1(), size.lifting_size())
    }

    /// Lifts an arbitrary base-graph-1-shaped table by `zc`.
    pub fn with_base(base: Arc<BaseGraph>, zc: usize) -> Self {
        Self { base, zc }
    }

    pub fn lifting_size(&self) -> usize {
        self.zc
    }

    pub fn base(&self) -> &BaseGraph {
        &self.base
    }

    /// Information bits K = 22·Zc.
    pub fn k(&self) -> usize {
        BG1_INFO_COLS * self.zc
    }

    /// Lifted codeword length 68·Zc, including the two punctured systematic
    /// columns.
    pub fn n_full(&self) -> usize {
        self.base.cols() * self.zc
    }

    /// Length of the circular buffer that rate matching reads from: 66·Zc.
    pub fn buffer_len(&self) -> usize {
        self.n_full() - 2 * self.zc
    }

    fn shift(&self, row: usize, col: usize) -> Option<usize> {
        self.base.shift(row, col).map(|s| s as usize % self.zc)
    }

    /// `acc ^= P^s · block`, where `(P^s x)[k] = x[(k + s) mod Zc]`.
    fn accumulate(&self, acc: &mut [u8], bits: &[u8], col: usize, s: usize) {
        let z = self.zc;
        let block = &bits[col * z..(col + 1) * z];
        for (k, a) in acc.iter_mut().enumerate() {
            *a ^= block[(k + s) % z];
        }
    }

    /// Systematic encoding. Returns all 68·Zc code bits; the first K equal
    /// the message.
    pub fn encode(&self, message: &[u8]) -> Result<Vec<u8>, PhyError> {
        let (z, k) = (self.zc, self.k());
        if message.len() != k {
            return Err(PhyError::LengthMismatch {
                expected: k,
                got: message.len(),
            });
        }
        let mut cw = vec![0u8; self.n_full()];
        cw[..k].copy_from_slice(message);

        let mut s = vec![vec![0u8; z]; 4];
        for (r, acc) in s.iter_mut().enumerate() {
            for c in 0..BG1_INFO_COLS {
                if let Some(sh) = self.shift(r, c) {
                    self.accumulate(acc, &cw, c, sh);
                }
            }
        }
        // Core rows:
        //   r0: s0 + P^a p0 + p1 = 0
        //   r1: s1 + P^b p0 + p1 + p2 = 0
        //   r2: s2 + p2 + p3 = 0
        //   r3: s3 + P^a p0 + p3 = 0
        // Summing all four leaves P^b p0 = s0 + s1 + s2 + s3.
        let a = self.shift(0, 22).expect("core column");
        let b = self.shift(1, 22).expect("core column");
        let sum: Vec<u8> = (0..z).map(|i| s[0][i] ^ s[1][i] ^ s[2][i] ^ s[3][i]).collect();
        let p0: Vec<u8> = (0..z).map(|i| sum[(i + z - b) % z]).collect();
        let rot = |v: &[u8], sh: usize| -> Vec<u8> { (0..z).map(|i| v[(i + sh) % z]).collect() };
        let p0a = rot(&p0, a);
        let p1: Vec<u8> = (0..z).map(|i| s[0][i] ^ p0a[i]).collect();
        let p0b = rot(&p0, b);
        let p2: Vec<u8> = (0..z).map(|i| s[1][i] ^ p0b[i] ^ p1[i]).collect();
        let p3: Vec<u8> = (0..z).map(|i| s[2][i] ^ p2[i]).collect();
        for (j, p) in [p0, p1, p2, p3].into_iter().enumerate() {
            cw[(22 + j) * z..(23 + j) * z].copy_from_slice(&p);
        }

        for r in 4..BG1_ROWS {
            let own = 22 + r;
            let mut acc = vec![0u8; z];
            for (c, _) in self.base.row_entries(r).filter(|&(c, _)| c < own) {
                self.accumulate(&mut acc, &cw, c, self.shift(r, c).unwrap());
            }
            cw[own * z..(own + 1) * z].copy_from_slice(&acc);
        }
        Ok(cw)
    }

    /// Base rows needed to protect the first `transmitted_end` code bits:
    /// the four core rows plus one extension row per extension column touched.
    pub fn rows_for_span(&self, transmitted_end: usize) -> usize {
        let cols = transmitted_end.div_ceil(self.zc).min(self.base.cols());
        cols.saturating_sub(BG1_INFO_COLS).clamp(4, BG1_ROWS)
    }
}

/// Result of one decoding attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeOutput {
    pub message: Vec<u8>,
    pub converged: bool,
    pub iterations: usize,
}

/// Tanner graph of the first `rows` base rows, expanded, with scratch buffers.
#[derive(Debug, Clone)]
pub struct MinSumDecoder {
    k: usize,
    n_vars: usize,
    check_ptr: Vec<usize>,
    edge_var: Vec<usize>,
    check_msgs: Vec<f32>,
    posterior: Vec<f32>,
}

impl MinSumDecoder {
    pub fn new(code: &LdpcCode, rows: usize) -> Self {
        let z = code.zc;
        let rows = rows.clamp(1, code.base.rows());
        let n_vars = (BG1_INFO_COLS + rows).min(code.base.cols()) * z;
        let mut check_ptr = vec![0];
        let mut edge_var = Vec::new();
        for r in 0..rows {
            let entries: Vec<(usize, usize)> = code
                .base
                .row_entries(r)
                .map(|(c, _)| (c, code.shift(r, c).unwrap()))
                .collect();
            for k in 0..z {
                for &(c, s) in &entries {
                    edge_var.push(c * z + (k + s) % z);
                }
                check_ptr.push(edge_var.len());
            }
        }
        let edges = edge_var.len();
        Self {
            k: code.k(),
            n_vars,
            check_ptr,
            edge_var,
            check_msgs: vec![0.0; edges],
            posterior: vec![0.0; n_vars],
        }
    }

    pub fn variable_count(&self) -> usize {
        self.n_vars
    }

    /// Decodes from per-code-bit channel LLRs (positive favours 0). Entries
    /// beyond the decoder's variable count are ignored; missing ones count
    /// as erasures.
    pub fn decode(&mut self, channel: &[f32], max_iter: usize) -> DecodeOutput {
        let n = self.n_vars;
        let ch: Vec<f32> = (0..n).map(|i| channel.get(i).copied().unwrap_or(0.0)).collect();
        self.check_msgs.iter_mut().for_each(|m| *m = 0.0);
        self.posterior.copy_from_slice(&ch);
        let mut converged = false;
        let mut iterations = 0;
        for _ in 0..max_iter {
            iterations += 1;
            for c in 0..self.check_ptr.len() - 1 {
                let (lo, hi) = (self.check_ptr[c], self.check_ptr[c + 1]);
                let (mut min1, mut min2, mut arg) = (f32::INFINITY, f32::INFINITY, lo);
                let mut negative = false;
                for e in lo..hi {
                    let q = self.posterior[self.edge_var[e]] - self.check_msgs[e];
                    negative ^= q < 0.0;
                    let mag = q.abs();
                    if mag < min1 {
                        min2 = min1;
                        min1 = mag;
                        arg = e;
                    } else if mag < min2 {
                        min2 = mag;
                    }
                }
                for e in lo..hi {
                    let q = self.posterior[self.edge_var[e]] - self.check_msgs[e];
                    let mag = MIN_SUM_SCALE * if e == arg { min2 } else { min1 };
                    let sign_neg = negative ^ (q < 0.0);
                    self.check_msgs[e] = if sign_neg { -mag } else { mag };
                }
            }
            self.posterior.copy_from_slice(&ch);
            for (e, &v) in self.edge_var.iter().enumerate() {
                self.posterior[v] += self.check_msgs[e];
            }
            if self.parity_satisfied() {
                converged = true;
                break;
            }
        }
        DecodeOutput {
            message: self.posterior[..self.k].iter().map(|&l| (l < 0.0) as u8).collect(),
            converged,
            iterations,
        }
    }

    /// All checks satisfied by the hard decisions, and no variable is left
    /// without a decision (zero posterior).
    fn parity_satisfied(&self) -> bool {
        if self.posterior.contains(&0.0) {
            return false;
        }
        self.check_ptr.windows(2).all(|w| {
            !self.edge_var[w[0]..w[1]]
                .iter()
                .fold(false, |acc, &v| acc ^ (self.posterior[v] < 0.0))
        })
    }
}
