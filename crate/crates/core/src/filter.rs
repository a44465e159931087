//! Scene-graph filtering.
//!
//! Two stages run in order: relations whose predicate is nearly certain given
//! their endpoint labels are dropped first, then sub-graphs whose sentence
//! embedding is (nearly) explained by the remaining sentences are dropped one
//! at a time until every residual clears the threshold.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::{conditional_probability, RelationStats};
use crate::embedding::{EmbedError, Embedder, EmbeddingVector};
use crate::model::{to_sentences, SceneGraph};

/// Residuals within this distance of the minimum count as tied.
const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("threshold {name} = {value} outside [0, 1]")]
    InvalidThreshold { name: &'static str, value: f64 },
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("embedder returned {got} vectors for {expected} sentences")]
    EmbeddingCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub enum ProjectionOrder {
    /// Project out survivors in ascending relation index, using their original vectors.
    #[default]
    AscendingIndex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FilterConfig {
    pub tau_f: f64,
    pub tau_r: f64,
    pub projection_order: ProjectionOrder,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            tau_f: 0.8,
            tau_r: 0.8,
            projection_order: ProjectionOrder::AscendingIndex,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), FilterError> {
        for (name, value) in [("tau_f", self.tau_f), ("tau_r", self.tau_r)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(FilterError::InvalidThreshold { name, value });
            }
        }
        Ok(())
    }
}

/// A relation identified by endpoints, predicate and rendered sentence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TripleRecord {
    pub subject_id: u32,
    pub predicate: String,
    pub object_id: u32,
    pub sentence: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LessInformative {
    pub triple: TripleRecord,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Redundant {
    pub triple: TripleRecord,
    pub residual_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterReport {
    pub stage_order: [&'static str; 2],
    pub config: FilterConfig,
    pub input_relations: usize,
    pub removed_by_alg1: Vec<LessInformative>,
    pub removed_by_alg2: Vec<Redundant>,
    pub kept: Vec<TripleRecord>,
    pub retention_fraction: f64,
    /// Outer iterations of the redundancy loop, including the final one that
    /// found nothing to remove.
    pub redundancy_iterations: usize,
}

fn records(graph: &SceneGraph) -> Vec<TripleRecord> {
    graph
        .relations
        .iter()
        .zip(to_sentences(graph))
        .map(|(r, s)| TripleRecord {
            subject_id: r.subject_id,
            predicate: r.predicate.clone(),
            object_id: r.object_id,
            sentence: s.render(),
        })
        .collect()
}

/// Drops every relation with `P(predicate | subject, object) >= tau_f`.
/// Objects are never removed.
pub fn filter_less_informative(
    graph: &SceneGraph,
    stats: &RelationStats,
    tau_f: f64,
) -> (SceneGraph, Vec<LessInformative>) {
    let sentences = to_sentences(graph);
    let probs: Vec<f64> = sentences
        .iter()
        .map(|s| conditional_probability(stats, &s.subject_label, &s.predicate, &s.object_label))
        .collect();
    let removed = records(graph)
        .into_iter()
        .zip(&probs)
        .filter(|(_, &p)| p >= tau_f)
        .map(|(triple, &probability)| LessInformative { triple, probability })
        .collect();
    (graph.with_relations(|i| probs[i] < tau_f), removed)
}

/// Norm of `vectors[k]` after sequentially subtracting its projection onto
/// every other vector, in ascending index order.
pub fn residual_norm(k: usize, vectors: &[EmbeddingVector]) -> f64 {
    let mut r = vectors[k].components().to_vec();
    for (j, g) in vectors.iter().enumerate() {
        if j == k {
            continue;
        }
        let c: f64 = r.iter().zip(g.components()).map(|(a, b)| a * b).sum();
        for (ri, gi) in r.iter_mut().zip(g.components()) {
            *ri -= c * gi;
        }
    }
    r.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Norm of the component of `vectors[k]` orthogonal to the span of all other
/// vectors. The others are orthonormalized with twice-applied modified
/// Gram-Schmidt; numerically dependent directions are dropped.
pub fn span_residual_oracle(k: usize, vectors: &[EmbeddingVector]) -> f64 {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let subtract_basis = |v: &mut Vec<f64>, basis: &[Vec<f64>]| {
        for _ in 0..2 {
            for q in basis {
                let c = dot(v, q);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
            }
        }
    };
    for (j, g) in vectors.iter().enumerate() {
        if j == k {
            continue;
        }
        let mut v = g.components().to_vec();
        subtract_basis(&mut v, &basis);
        let n = dot(&v, &v).sqrt();
        if n > 1e-10 {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    let mut r = vectors[k].components().to_vec();
    subtract_basis(&mut r, &basis);
    dot(&r, &r).sqrt()
}

/// Result of the redundancy loop over a fixed vector list.
#[derive(Debug, Clone, PartialEq)]
pub struct RedundancyOutcome {
    /// Surviving indices, ascending.
    pub survivors: Vec<usize>,
    /// Removed indices with the residual norm at removal, in removal order.
    pub removed: Vec<(usize, f64)>,
    pub iterations: usize,
}

/// Repeatedly removes the vector with the smallest residual while that
/// residual is below `tau_r`. Ties go to the largest index.
pub fn redundancy_loop(vectors: &[EmbeddingVector], tau_r: f64) -> RedundancyOutcome {
    let mut survivors: Vec<usize> = (0..vectors.len()).collect();
    let mut removed = Vec::new();
    let mut iterations = 0;
    while !survivors.is_empty() {
        iterations += 1;
        let working: Vec<EmbeddingVector> = survivors.iter().map(|&i| vectors[i].clone()).collect();
        let norms: Vec<f64> = (0..working.len())
            .into_par_iter()
            .map(|k| residual_norm(k, &working))
            .collect();
        let min = norms.iter().copied().fold(f64::INFINITY, f64::min);
        let pos = norms
            .iter()
            .rposition(|&n| n <= min + TIE_EPS)
            .expect("non-empty working set");
        if norms[pos] < tau_r {
            removed.push((survivors.remove(pos), norms[pos]));
        } else {
            break;
        }
    }
    RedundancyOutcome {
        survivors,
        removed,
        iterations,
    }
}

/// Partial report of the redundancy stage.
#[derive(Debug, Clone, PartialEq)]
pub struct RedundancyReport {
    pub removed: Vec<Redundant>,
    pub iterations: usize,
}

/// Embeds each relation's sentence once and runs the redundancy loop.
pub fn filter_redundant(
    graph: &SceneGraph,
    embedder: &dyn Embedder,
    tau_r: f64,
) -> Result<(SceneGraph, RedundancyReport), FilterError> {
    if graph.relations.is_empty() {
        return Ok((
            graph.clone(),
            RedundancyReport {
                removed: Vec::new(),
                iterations: 0,
            },
        ));
    }
    let sentences: Vec<String> = to_sentences(graph).iter().map(|s| s.render()).collect();
    let vectors = embedder.embed(&sentences)?;
    if vectors.len() != sentences.len() {
        return Err(FilterError::EmbeddingCount {
            expected: sentences.len(),
            got: vectors.len(),
        });
    }
    let outcome = redundancy_loop(&vectors, tau_r);
    let recs = records(graph);
    let removed = outcome
        .removed
        .iter()
        .map(|&(i, residual_norm)| Redundant {
            triple: recs[i].clone(),
            residual_norm,
        })
        .collect();
    let mut keep = vec![false; graph.relations.len()];
    for &i in &outcome.survivors {
        keep[i] = true;
    }
    Ok((
        graph.with_relations(|i| keep[i]),
        RedundancyReport {
            removed,
            iterations: outcome.iterations,
        },
    ))
}

/// Less-informative filtering followed by redundancy filtering.
pub fn filter_scene_graph(
    graph: &SceneGraph,
    stats: &RelationStats,
    embedder: &dyn Embedder,
    config: &FilterConfig,
) -> Result<(SceneGraph, FilterReport), FilterError> {
    config.validate()?;
    let (stage1, removed_by_alg1) = filter_less_informative(graph, stats, config.tau_f);
    let (out, red) = filter_redundant(&stage1, embedder, config.tau_r)?;
    let input = graph.relations.len();
    let report = FilterReport {
        stage_order: ["less_informative", "redundant"],
        config: *config,
        input_relations: input,
        removed_by_alg1,
        removed_by_alg2: red.removed,
        kept: records(&out),
        retention_fraction: out.relations.len() as f64 / input.max(1) as f64,
        redundancy_iterations: red.iterations,
    };
    Ok((out, report))
}
