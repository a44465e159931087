//! Scene annotation loading and relation co-occurrence statistics.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    validate_scene_with, BoundingBox, ObjectInstance, RelationInstance, SceneAnnotation, SceneGraph, Violation,
};
use crate::vocab::{normalize_label, Vocabulary};

const STATS_MAGIC: &[u8; 4] = b"SCST";
const STATS_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("validation error: {}", format_violations(.0))]
    Validation(Vec<Violation>),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("format error: {0}")]
    Format(String),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Deserialize, Serialize)]
struct RawObject {
    id: u32,
    label: String,
    bbox: [i64; 4],
}

#[derive(Deserialize, Serialize)]
struct RawRelation {
    subject_id: u32,
    predicate: String,
    object_id: u32,
}

#[derive(Deserialize, Serialize)]
struct RawScene {
    image_id: String,
    width: u32,
    height: u32,
    objects: Vec<RawObject>,
    relations: Vec<RawRelation>,
}

/// Parses and validates one annotation document against the default vocabularies.
pub fn load_scene(document: &[u8]) -> Result<SceneAnnotation, CorpusError> {
    load_scene_with(document, &Vocabulary::objects(), &Vocabulary::predicates())
}

pub fn load_scene_with(
    document: &[u8],
    objects: &Vocabulary,
    predicates: &Vocabulary,
) -> Result<SceneAnnotation, CorpusError> {
    let raw: RawScene = serde_json::from_slice(document).map_err(|e| {
        use serde_json::error::Category;
        match e.classify() {
            Category::Data => CorpusError::Schema(e.to_string()),
            _ => CorpusError::Parse(e.to_string()),
        }
    })?;

    let mut layouts = BTreeMap::new();
    let graph_objects = raw
        .objects
        .into_iter()
        .map(|o| {
            let label = normalize_label(&o.label);
            let [x, y, w, h] = o.bbox;
            layouts.insert(o.id, BoundingBox::new(x, y, w, h));
            // Unknown labels get an out-of-range id so validation reports them.
            let class_id = objects.id_of(&label).unwrap_or(objects.len()) as u32;
            ObjectInstance {
                id: o.id,
                label,
                class_id,
            }
        })
        .collect();
    let relations = raw
        .relations
        .into_iter()
        .map(|r| {
            let predicate = normalize_label(&r.predicate);
            let predicate_id = predicates.id_of(&predicate).unwrap_or(predicates.len()) as u32;
            RelationInstance {
                subject_id: r.subject_id,
                object_id: r.object_id,
                predicate,
                predicate_id,
            }
        })
        .collect();

    let scene = SceneAnnotation {
        image_id: raw.image_id,
        width: raw.width,
        height: raw.height,
        graph: SceneGraph {
            objects: graph_objects,
            relations,
        },
        layouts,
    };
    let violations = validate_scene_with(&scene, objects, predicates);
    if violations.is_empty() {
        Ok(scene)
    } else {
        Err(CorpusError::Validation(violations))
    }
}

/// Serializes a scene, with `graph` in place of its own, in the annotation
/// document format. Objects without a layout get an empty box.
pub fn scene_document(scene: &SceneAnnotation, graph: &SceneGraph) -> String {
    let raw = RawScene {
        image_id: scene.image_id.clone(),
        width: scene.width,
        height: scene.height,
        objects: graph
            .objects
            .iter()
            .map(|o| {
                let b = scene
                    .layouts
                    .get(&o.id)
                    .copied()
                    .unwrap_or(BoundingBox::new(0, 0, 0, 0));
                RawObject {
                    id: o.id,
                    label: o.label.clone(),
                    bbox: [b.x, b.y, b.w, b.h],
                }
            })
            .collect(),
        relations: graph
            .relations
            .iter()
            .map(|r| RawRelation {
                subject_id: r.subject_id,
                predicate: r.predicate.clone(),
                object_id: r.object_id,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&raw).expect("plain data serializes")
}

pub fn load_scene_file(path: &Path) -> Result<SceneAnnotation, CorpusError> {
    let bytes = fs::read(path).map_err(|source| CorpusError::Io {
        path: path.into(),
        source,
    })?;
    load_scene(&bytes)
}

/// Loads every `*.json` file of a directory, sorted by file name.
pub fn load_corpus(dir: &Path) -> Result<Vec<SceneAnnotation>, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: dir.into(),
        source,
    };
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| load_scene_file(p)).collect()
}

/// Ordered (subject, object) pair key.
pub type PairKey = (String, String);
/// (subject, predicate, object) key.
pub type TripleKey = (String, String, String);

/// Co-occurrence counts backing `P(predicate | subject, object)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RelationStats {
    pub pair_counts: BTreeMap<PairKey, u64>,
    pub triple_counts: BTreeMap<TripleKey, u64>,
    pub corpus_size: u64,
}

impl RelationStats {
    pub fn add_triple(&mut self, subject: &str, predicate: &str, object: &str, count: u64) {
        *self
            .triple_counts
            .entry((subject.to_owned(), predicate.to_owned(), object.to_owned()))
            .or_default() += count;
        *self
            .pair_counts
            .entry((subject.to_owned(), object.to_owned()))
            .or_default() += count;
    }

    /// Adds another set of counts into this one.
    pub fn merge(mut self, other: RelationStats) -> RelationStats {
        for ((s, p, o), c) in other.triple_counts {
            self.add_triple(&s, &p, &o, c);
        }
        self.corpus_size += other.corpus_size;
        self
    }

    pub fn is_empty(&self) -> bool {
        self.triple_counts.is_empty()
    }
}

/// Counts every ordered relation triple across the scenes.
pub fn build_relation_stats(scenes: &[SceneAnnotation]) -> RelationStats {
    let mut stats = RelationStats {
        corpus_size: scenes.len() as u64,
        ..Default::default()
    };
    for scene in scenes {
        let graph = &scene.graph;
        for r in &graph.relations {
            let (Some(s), Some(o)) = (graph.object(r.subject_id), graph.object(r.object_id)) else {
                continue;
            };
            stats.add_triple(&s.label, &r.predicate, &o.label, 1);
        }
    }
    stats
}

/// Empirical `P(predicate | subject, object)`; 0 for an unseen ordered pair.
pub fn conditional_probability(stats: &RelationStats, subject: &str, predicate: &str, object: &str) -> f64 {
    let pair = stats
        .pair_counts
        .get(&(subject.to_owned(), object.to_owned()))
        .copied()
        .unwrap_or(0);
    if pair == 0 {
        return 0.0;
    }
    let triple = stats
        .triple_counts
        .get(&(subject.to_owned(), predicate.to_owned(), object.to_owned()))
        .copied()
        .unwrap_or(0);
    triple as f64 / pair as f64
}

/// Add-one smoothed variant over a predicate vocabulary of `num_predicates`
/// entries. Unseen pairs still return 0 so they are never filtered.
pub fn conditional_probability_smoothed(
    stats: &RelationStats,
    subject: &str,
    predicate: &str,
    object: &str,
    num_predicates: usize,
) -> f64 {
    let pair = stats
        .pair_counts
        .get(&(subject.to_owned(), object.to_owned()))
        .copied()
        .unwrap_or(0);
    if pair == 0 {
        return 0.0;
    }
    let triple = stats
        .triple_counts
        .get(&(subject.to_owned(), predicate.to_owned(), object.to_owned()))
        .copied()
        .unwrap_or(0);
    (triple + 1) as f64 / (pair + num_predicates as u64) as f64
}

fn write_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

/// Serializes stats: magic, u32 version, u64 corpus size, u64 record count,
/// then `(subject, object, predicate, u64 count)` records sorted by key.
/// Integers are little-endian; strings are u32-length-prefixed UTF-8.
pub fn encode_stats(stats: &RelationStats) -> Vec<u8> {
    let mut records: Vec<(&str, &str, &str, u64)> = stats
        .triple_counts
        .iter()
        .map(|((s, p, o), c)| (s.as_str(), o.as_str(), p.as_str(), *c))
        .collect();
    records.sort();
    let mut out = Vec::new();
    out.extend_from_slice(STATS_MAGIC);
    out.extend_from_slice(&STATS_VERSION.to_le_bytes());
    out.extend_from_slice(&stats.corpus_size.to_le_bytes());
    out.extend_from_slice(&(records.len() as u64).to_le_bytes());
    for (s, o, p, c) in records {
        write_str(&mut out, s);
        write_str(&mut out, o);
        write_str(&mut out, p);
        out.extend_from_slice(&c.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CorpusError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| CorpusError::Format(format!("truncated at byte {} (need {n} more)", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CorpusError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CorpusError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, CorpusError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| CorpusError::Format(format!("invalid utf-8: {e}")))
    }
}

pub fn decode_stats(bytes: &[u8]) -> Result<RelationStats, CorpusError> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    if cur.take(4)? != STATS_MAGIC {
        return Err(CorpusError::Format("bad magic".into()));
    }
    let version = cur.u32()?;
    if version != STATS_VERSION {
        return Err(CorpusError::Format(format!("unsupported version {version}")));
    }
    let mut stats = RelationStats {
        corpus_size: cur.u64()?,
        ..Default::default()
    };
    let n = cur.u64()?;
    for _ in 0..n {
        let s = cur.string()?;
        let o = cur.string()?;
        let p = cur.string()?;
        let c = cur.u64()?;
        stats.add_triple(&s, &p, &o, c);
    }
    if cur.pos != bytes.len() {
        return Err(CorpusError::Format(format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    Ok(stats)
}

pub fn persist_stats(stats: &RelationStats, path: &Path) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.into(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io_err)?;
    f.write_all(&encode_stats(stats)).map_err(io_err)
}

pub fn load_stats(path: &Path) -> Result<RelationStats, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.into(),
        source,
    };
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(io_err)?;
    decode_stats(&bytes)
}
