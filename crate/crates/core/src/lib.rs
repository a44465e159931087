//! Task-adaptive visual semantic communication.
//!
//! Scene-graph annotations are ingested into relation statistics, pruned of
//! predictable and redundant sub-graphs, encoded into per-task payloads and
//! carried over a simulated LDPC/QPSK/AWGN link whose block error rates feed
//! a throughput and latency model.

pub mod codec;
pub mod corpus;
pub mod embedding;
pub mod filter;
pub mod model;
pub mod perf;
pub mod phy;
pub mod select;
pub mod vocab;

pub use codec::{CodecConfig, CodecError, PayloadMetrics};
pub use corpus::{CorpusError, RelationStats};
pub use embedding::{Backend, EmbedError, Embedder, EmbedderConfig, EmbeddingVector};
pub use filter::{FilterConfig, FilterError, FilterReport};
pub use model::{
    BoundingBox, FeatureMapSpec, ObjectInstance, RelationInstance, SceneAnnotation, SceneGraph, SegmentationGrid,
    SemanticKind, SemanticPayload, SubGraphSentence, Violation,
};
pub use perf::{BlerTable, GrantConfig, LatencyProfile, PerfError, PipelineMode, RateChoice, SweepConfig, SweepRow};
pub use phy::{CodeRate, InfoBlockSize, LinkConfig, LinkResult, PhyError};
pub use select::{FidelityLevel, Policy, SelectError, Selection, TaskKind};
pub use vocab::Vocabulary;
