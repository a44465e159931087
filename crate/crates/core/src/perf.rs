//! Throughput and latency model on top of link results and payload sizes.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::codec::{encode_semantics, CodecConfig, CodecError};
use crate::model::{SceneAnnotation, SceneGraph};
use crate::phy::{simulate_bler, CodeRate, InfoBlockSize, LinkConfig, PhyError, Segmentation};
use crate::select::{SelectError, Selection};

#[derive(Debug, Error)]
pub enum PerfError {
    #[error("invalid grant: {0} must be positive")]
    InvalidGrant(&'static str),
    #[error("no BLER entry for K={k}, rate {rate}, {snr_db} dB")]
    MissingTableEntry { k: usize, rate: CodeRate, snr_db: f64 },
    #[error("invalid latency profile: {0}")]
    InvalidProfile(String),
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Select(#[from] SelectError),
    #[error(transparent)]
    Phy(#[from] PhyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GrantConfig {
    pub n_rb: u32,
    pub subcarriers_per_rb: u32,
    pub symbols_per_slot: u32,
    pub slots_per_second: u32,
    pub bits_per_symbol: u32,
}

impl Default for GrantConfig {
    fn default() -> Self {
        Self {
            n_rb: 2,
            subcarriers_per_rb: 12,
            symbols_per_slot: 14,
            slots_per_second: 1000,
            bits_per_symbol: 2,
        }
    }
}

impl GrantConfig {
    pub fn validate(&self) -> Result<(), PerfError> {
        for (name, v) in [
            ("n_rb", self.n_rb),
            ("subcarriers_per_rb", self.subcarriers_per_rb),
            ("symbols_per_slot", self.symbols_per_slot),
            ("slots_per_second", self.slots_per_second),
            ("bits_per_symbol", self.bits_per_symbol),
        ] {
            if v == 0 {
                return Err(PerfError::InvalidGrant(name));
            }
        }
        Ok(())
    }
}

/// Resource elements per second on the grant.
pub fn symbol_rate(grant: &GrantConfig) -> Result<f64, PerfError> {
    grant.validate()?;
    Ok(grant.n_rb as f64
        * grant.subcarriers_per_rb as f64
        * grant.symbols_per_slot as f64
        * grant.slots_per_second as f64)
}

/// Information bits per second delivered without retransmission.
pub fn link_goodput(grant: &GrantConfig, rate: CodeRate, bler: f64) -> Result<f64, PerfError> {
    Ok(symbol_rate(grant)? * grant.bits_per_symbol as f64 * rate.value() * (1.0 - bler.clamp(0.0, 1.0)))
}

pub fn throughput_images_per_second(payload_bits: f64, goodput: f64) -> Result<f64, PerfError> {
    if payload_bits.is_nan() || payload_bits <= 0.0 {
        return Err(PerfError::NonPositive("payload_bits"));
    }
    Ok(goodput / payload_bits)
}

/// Code block class of a selection: long blocks for dense kinds.
pub fn block_size_for(sel: &Selection) -> InfoBlockSize {
    if sel.kind.is_text() {
        InfoBlockSize::B1056
    } else {
        InfoBlockSize::A8448
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlerEntry {
    pub info_block: InfoBlockSize,
    pub rate: CodeRate,
    pub snr_db: f64,
    pub bler: f64,
}

/// Estimated BLER per (block size, rate, SNR).
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BlerTable {
    entries: Vec<BlerEntry>,
}

impl BlerTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, info_block: InfoBlockSize, rate: CodeRate, snr_db: f64, bler: f64) {
        match self.find_mut(info_block, rate, snr_db) {
            Some(e) => e.bler = bler,
            None => self.entries.push(BlerEntry {
                info_block,
                rate,
                snr_db,
                bler,
            }),
        }
    }

    fn find_mut(&mut self, info_block: InfoBlockSize, rate: CodeRate, snr_db: f64) -> Option<&mut BlerEntry> {
        self.entries
            .iter_mut()
            .find(|e| e.info_block == info_block && e.rate == rate && e.snr_db.to_bits() == snr_db.to_bits())
    }

    pub fn get(&self, info_block: InfoBlockSize, rate: CodeRate, snr_db: f64) -> Result<f64, PerfError> {
        self.entries
            .iter()
            .find(|e| e.info_block == info_block && e.rate == rate && e.snr_db.to_bits() == snr_db.to_bits())
            .map(|e| e.bler)
            .ok_or(PerfError::MissingTableEntry {
                k: info_block.bits(),
                rate,
                snr_db,
            })
    }

    pub fn entries(&self) -> &[BlerEntry] {
        &self.entries
    }

    /// Runs the link simulation for every combination. All cells share one
    /// seed, so noise draws are common across SNRs and rates.
    pub fn simulate(
        sizes: &[InfoBlockSize],
        rates: &[CodeRate],
        snrs: &[f64],
        blocks: u64,
        seed: u64,
    ) -> Result<Self, PerfError> {
        let mut table = Self::new();
        for &size in sizes {
            for &rate in rates {
                for &snr in snrs {
                    let r = simulate_bler(&LinkConfig::new(size, rate, snr, seed), blocks)?;
                    table.insert(size, rate, snr, r.bler);
                }
            }
        }
        Ok(table)
    }
}

/// Highest rate meeting the BLER target at this SNR, else the lowest rate.
pub fn rate_adaptation(
    snr_db: f64,
    info_block: InfoBlockSize,
    table: &BlerTable,
    target_bler: f64,
) -> Result<CodeRate, PerfError> {
    let mut best = CodeRate::OneThird;
    for rate in CodeRate::ALL {
        if table.get(info_block, rate, snr_db)? <= target_bler {
            best = rate;
        }
    }
    Ok(best)
}

pub const DEFAULT_TARGET_BLER: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateChoice {
    Auto,
    Fixed(CodeRate),
}

impl FromStr for RateChoice {
    type Err = PhyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "auto" => Ok(RateChoice::Auto),
            other => other.parse().map(RateChoice::Fixed),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub grant: GrantConfig,
    pub codec: CodecConfig,
    pub rate: RateChoice,
    pub target_bler: f64,
    /// Ignore block errors in the goodput.
    pub ideal_link: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            grant: GrantConfig::default(),
            codec: CodecConfig::default(),
            rate: RateChoice::Auto,
            target_bler: DEFAULT_TARGET_BLER,
            ideal_link: false,
        }
    }
}

/// A scene with its filtered graph, if one was computed.
#[derive(Debug, Clone)]
pub struct PreparedScene {
    pub scene: SceneAnnotation,
    pub filtered: Option<SceneGraph>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub kind: String,
    pub snr_db: f64,
    pub code_rate: CodeRate,
    pub bler: f64,
    pub avg_payload_bits: f64,
    pub images_per_second: f64,
}

pub const CSV_HEADER: &str = "kind,snr_db,code_rate,bler,avg_payload_bits,images_per_second";

/// Section bits of one selection for one scene.
pub fn payload_bits(sel: &Selection, scene: &PreparedScene, codec: &CodecConfig) -> Result<usize, PerfError> {
    let graph = if sel.needs_filtered_graph() {
        scene.filtered.as_ref().ok_or(SelectError::MissingFilteredGraph(*sel))?
    } else {
        &scene.scene.graph
    };
    Ok(encode_semantics(sel.kind, &scene.scene, graph, codec)?.bit_count)
}

/// Mean transmitted bits per image, padding to whole code blocks included.
pub fn average_padded_bits(sel: &Selection, scenes: &[PreparedScene], codec: &CodecConfig) -> Result<f64, PerfError> {
    if scenes.is_empty() {
        return Err(PerfError::NonPositive("scene count"));
    }
    let k = block_size_for(sel).bits();
    let total = scenes.iter().try_fold(0usize, |acc, s| -> Result<usize, PerfError> {
        Ok(acc + Segmentation::for_length(payload_bits(sel, s, codec)?, k)?.padded_bits())
    })?;
    Ok(total as f64 / scenes.len() as f64)
}

/// One row per (kind, SNR), in input order.
pub fn sweep_throughput(
    scenes: &[PreparedScene],
    kinds: &[Selection],
    snrs: &[f64],
    table: &BlerTable,
    config: &SweepConfig,
) -> Result<Vec<SweepRow>, PerfError> {
    let averages = kinds
        .iter()
        .map(|k| average_padded_bits(k, scenes, &config.codec))
        .collect::<Result<Vec<_>, _>>()?;
    let cells: Vec<(usize, f64)> = (0..kinds.len())
        .flat_map(|i| snrs.iter().map(move |&s| (i, s)))
        .collect();
    cells
        .par_iter()
        .map(|&(i, snr_db)| {
            let sel = &kinds[i];
            let size = block_size_for(sel);
            let code_rate = match config.rate {
                RateChoice::Auto => rate_adaptation(snr_db, size, table, config.target_bler)?,
                RateChoice::Fixed(r) => r,
            };
            let bler = table.get(size, code_rate, snr_db)?;
            let effective = if config.ideal_link { 0.0 } else { bler };
            let goodput = link_goodput(&config.grant, code_rate, effective)?;
            Ok(SweepRow {
                kind: sel.to_string(),
                snr_db,
                code_rate,
                bler,
                avg_payload_bits: averages[i],
                images_per_second: throughput_images_per_second(averages[i], goodput)?,
            })
        })
        .collect()
}

pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:.6},{:.1},{:.6}",
            r.kind, r.snr_db, r.code_rate, r.bler, r.avg_payload_bits, r.images_per_second
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineMode {
    Sequential,
    Pipelined,
}

impl FromStr for PipelineMode {
    type Err = PerfError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sequential" => Ok(PipelineMode::Sequential),
            "pipelined" => Ok(PipelineMode::Pipelined),
            other => Err(PerfError::InvalidProfile(format!("unknown mode {other:?}"))),
        }
    }
}

/// Stage latencies in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatencyProfile {
    pub tau_se: f64,
    pub tau_ce: f64,
    pub tau_tx: Option<f64>,
    pub tau_cd: f64,
    pub tau_task: f64,
}

impl LatencyProfile {
    /// Parses `key=value` pairs separated by commas or newlines; `#` starts a
    /// comment. `tau_ce` defaults to 0 and `tau_tx` may be left out.
    pub fn parse(text: &str) -> Result<Self, PerfError> {
        let mut vals: [Option<f64>; 5] = [None; 5];
        const KEYS: [&str; 5] = ["tau_se", "tau_ce", "tau_tx", "tau_cd", "tau_task"];
        for item in text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(|l| l.split(','))
            .map(str::trim)
            .filter(|s| !s.is_empty())
        {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| PerfError::InvalidProfile(format!("expected key=value, got {item:?}")))?;
            let idx = KEYS
                .iter()
                .position(|&key| key == k.trim())
                .ok_or_else(|| PerfError::InvalidProfile(format!("unknown key {:?}", k.trim())))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| PerfError::InvalidProfile(format!("{}: not a number: {:?}", k.trim(), v.trim())))?;
            if v.is_nan() || v < 0.0 || v.is_infinite() {
                return Err(PerfError::InvalidProfile(format!(
                    "{} must be a finite value >= 0",
                    k.trim()
                )));
            }
            vals[idx] = Some(v);
        }
        let need = |i: usize| vals[i].ok_or_else(|| PerfError::InvalidProfile(format!("missing {}", KEYS[i])));
        Ok(Self {
            tau_se: need(0)?,
            tau_ce: vals[1].unwrap_or(0.0),
            tau_tx: vals[2],
            tau_cd: need(3)?,
            tau_task: need(4)?,
        })
    }

    pub fn with_tau_tx(mut self, tau_tx: f64) -> Self {
        self.tau_tx = Some(tau_tx);
        self
    }

    fn stages(&self) -> Result<[f64; 5], PerfError> {
        let tx = self
            .tau_tx
            .ok_or_else(|| PerfError::InvalidProfile("tau_tx not resolved".into()))?;
        Ok([self.tau_se, self.tau_ce, tx, self.tau_cd, self.tau_task])
    }

    pub fn total(&self) -> Result<f64, PerfError> {
        Ok(self.stages()?.iter().sum())
    }
}

/// Air time in milliseconds for a payload at a goodput.
pub fn transmission_latency_ms(padded_bits: f64, goodput: f64) -> Result<f64, PerfError> {
    if goodput.is_nan() || goodput <= 0.0 {
        return Err(PerfError::NonPositive("goodput"));
    }
    Ok(1000.0 * padded_bits / goodput)
}

pub fn tasks_per_second(profile: &LatencyProfile, mode: PipelineMode) -> Result<f64, PerfError> {
    let stages = profile.stages()?;
    let denom = match mode {
        PipelineMode::Sequential => stages.iter().sum(),
        PipelineMode::Pipelined => stages.iter().cloned().fold(0.0, f64::max),
    };
    if denom.is_nan() || denom <= 0.0 {
        return Err(PerfError::NonPositive("total latency"));
    }
    Ok(1000.0 / denom)
}
