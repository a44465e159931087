//! LDPC base graph descriptors.

use std::sync::{Arc, OnceLock};

use super::PhyError;

/// Base graph 1 shift values for lifting-size set index 1 (`Zc = 3·2^j`),
/// which contains both supported lifting sizes, 48 and 384.
const BG1_DESCRIPTOR: &str = include_str!("../../data/bg1_ils1.txt");

pub const BG1_ROWS: usize = 46;
pub const BG1_COLS: usize = 68;
/// Systematic columns of base graph 1.
pub const BG1_INFO_COLS: usize = 22;

/// A base matrix of shift values; `None` marks the all-zero block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseGraph {
    rows: usize,
    cols: usize,
    shifts: Vec<Option<u32>>,
}

impl BaseGraph {
    /// Parses a whitespace-separated integer table, one base row per line,
    /// with -1 for absent blocks.
    pub fn from_descriptor(text: &str) -> Result<Self, PhyError> {
        let mut shifts = Vec::new();
        let mut rows = 0;
        let mut cols = None;
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let row: Vec<Option<u32>> = line
                .split_whitespace()
                .map(|t| match t.parse::<i64>() {
                    Ok(-1) => Ok(None),
                    Ok(v) if v >= 0 => Ok(Some(v as u32)),
                    _ => Err(PhyError::Descriptor(format!("line {}: bad entry {t:?}", i + 1))),
                })
                .collect::<Result<_, _>>()?;
            match cols {
                None => cols = Some(row.len()),
                Some(c) if c != row.len() => {
                    return Err(PhyError::Descriptor(format!(
                        "line {}: {} entries, expected {c}",
                        i + 1,
                        row.len()
                    )))
                }
                _ => {}
            }
            shifts.extend(row);
            rows += 1;
        }
        let cols = cols.ok_or_else(|| PhyError::Descriptor("empty descriptor".into()))?;
        Ok(Self { rows, cols, shifts })
    }

    /// The shipped base graph 1 table.
    pub fn bg1() -> Arc<BaseGraph> {
        static BG1: OnceLock<Arc<BaseGraph>> = OnceLock::new();
        BG1.get_or_init(|| {
            let g = BaseGraph::from_descriptor(BG1_DESCRIPTOR).expect("shipped descriptor parses");
            assert_eq!((g.rows, g.cols), (BG1_ROWS, BG1_COLS));
            Arc::new(g)
        })
        .clone()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shift(&self, row: usize, col: usize) -> Option<u32> {
        self.shifts[row * self.cols + col]
    }

    /// Non-empty blocks of a row as `(column, raw shift value)`.
    pub fn row_entries(&self, row: usize) -> impl Iterator<Item = (usize, u32)> + '_ {
        (0..self.cols).filter_map(move |c| self.shift(row, c).map(|s| (c, s)))
    }

    pub fn edge_count(&self) -> usize {
        self.shifts.iter().filter(|s| s.is_some()).count()
    }
}
