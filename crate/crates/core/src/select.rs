//! Task-adaptive selection of semantic kinds and payload assembly.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::codec::{encode_semantics, write_container, CodecConfig, CodecError, MAGIC_BITS, SECTION_HEADER_BITS};
use crate::model::{SceneAnnotation, SceneGraph, SemanticKind, SemanticPayload};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TaskKind {
    Classification,
    Localization,
    Detection,
    Retrieval,
    Generation,
}

impl TaskKind {
    pub const ALL: [TaskKind; 5] = [
        TaskKind::Classification,
        TaskKind::Localization,
        TaskKind::Detection,
        TaskKind::Retrieval,
        TaskKind::Generation,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum FidelityLevel {
    Minimal,
    Standard,
    Rich,
    Full,
}

impl FidelityLevel {
    pub const ALL: [FidelityLevel; 4] = [
        FidelityLevel::Minimal,
        FidelityLevel::Standard,
        FidelityLevel::Rich,
        FidelityLevel::Full,
    ];
}

#[derive(Debug, Error, PartialEq)]
pub enum SelectError {
    #[error("a filtered scene graph is required for {0}")]
    MissingFilteredGraph(Selection),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("policy line {line}: {message}")]
    Policy { line: usize, message: String },
    #[error("unknown {what} {value:?}")]
    Unknown { what: &'static str, value: String },
}

macro_rules! name_table {
    ($ty:ty, $what:literal, { $($variant:path => $name:literal),* $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($variant => $name),* })
            }
        }
        impl FromStr for $ty {
            type Err = SelectError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($name => Ok($variant),)*
                    _ => Err(SelectError::Unknown { what: $what, value: s.to_owned() }),
                }
            }
        }
    };
}

name_table!(TaskKind, "task", {
    TaskKind::Classification => "classification",
    TaskKind::Localization => "localization",
    TaskKind::Detection => "detection",
    TaskKind::Retrieval => "retrieval",
    TaskKind::Generation => "generation",
});

name_table!(FidelityLevel, "fidelity", {
    FidelityLevel::Minimal => "minimal",
    FidelityLevel::Standard => "standard",
    FidelityLevel::Rich => "rich",
    FidelityLevel::Full => "full",
});

/// A semantic kind plus whether its scene graph is the filtered one.
/// `filtered` is only meaningful for `SceneGraphLayouts`; the other graph
/// kinds fix it by definition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Selection {
    pub kind: SemanticKind,
    pub filtered: bool,
}

impl Selection {
    pub fn new(kind: SemanticKind) -> Self {
        Self {
            kind,
            filtered: kind == SemanticKind::SceneGraphFiltered,
        }
    }

    pub fn filtered(kind: SemanticKind) -> Self {
        Self { kind, filtered: true }
    }

    pub fn needs_filtered_graph(&self) -> bool {
        self.filtered
    }
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.kind == SemanticKind::SceneGraphLayouts && !self.filtered {
            f.write_str("sg_layouts_full")
        } else {
            f.write_str(self.kind.name())
        }
    }
}

impl FromStr for Selection {
    type Err = SelectError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "sg_layouts" => Ok(Selection::filtered(SemanticKind::SceneGraphLayouts)),
            "sg_layouts_full" => Ok(Selection {
                kind: SemanticKind::SceneGraphLayouts,
                filtered: false,
            }),
            other => SemanticKind::from_name(other)
                .map(Selection::new)
                .ok_or_else(|| SelectError::Unknown {
                    what: "kind",
                    value: s.clone(),
                }),
        }
    }
}

/// Table from (task, fidelity) to the semantics to send.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    table: HashMap<(TaskKind, FidelityLevel), Vec<Selection>>,
}

impl Default for Policy {
    fn default() -> Self {
        use FidelityLevel::*;
        use SemanticKind::*;
        use TaskKind::*;
        let mut table = HashMap::new();
        for f in FidelityLevel::ALL {
            table.insert((Classification, f), vec![Selection::new(Objects)]);
            table.insert((Localization, f), vec![Selection::new(Layouts)]);
            let detection = if f <= Standard { ObjectsLayouts } else { SegMap };
            table.insert((Detection, f), vec![Selection::new(detection)]);
        }
        let sg_layouts = Selection::filtered(SceneGraphLayouts);
        table.insert((Retrieval, Minimal), vec![Selection::new(Objects)]);
        table.insert((Retrieval, Standard), vec![Selection::new(ObjectsLayouts)]);
        table.insert((Retrieval, Rich), vec![sg_layouts]);
        table.insert((Retrieval, Full), vec![Selection::new(FeatureMap)]);
        table.insert((Generation, Minimal), vec![Selection::new(SceneGraphFiltered)]);
        table.insert((Generation, Standard), vec![sg_layouts]);
        table.insert((Generation, Rich), vec![sg_layouts]);
        table.insert((Generation, Full), vec![Selection::new(FeatureMap)]);
        Self { table }
    }
}

impl Policy {
    /// Sends the unfiltered scene graph with layouts for rich generation.
    pub fn with_unfiltered_rich_generation(mut self) -> Self {
        self.table.insert(
            (TaskKind::Generation, FidelityLevel::Rich),
            vec![Selection {
                kind: SemanticKind::SceneGraphLayouts,
                filtered: false,
            }],
        );
        self
    }

    /// Applies override lines of the form `task,fidelity=kind+kind`. Blank
    /// lines and lines starting with `#` are ignored.
    pub fn with_overrides(mut self, text: &str) -> Result<Self, SelectError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| SelectError::Policy { line: i + 1, message };
            let (key, kinds) = line.split_once('=').ok_or_else(|| err("missing '='".into()))?;
            let (task, fidelity) = key.split_once(',').ok_or_else(|| err("missing ','".into()))?;
            let task: TaskKind = task.parse().map_err(|e: SelectError| err(e.to_string()))?;
            let fidelity: FidelityLevel = fidelity.parse().map_err(|e: SelectError| err(e.to_string()))?;
            let kinds = kinds
                .split('+')
                .map(|k| k.parse::<Selection>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| err(e.to_string()))?;
            if kinds.is_empty() {
                return Err(err("no kinds".into()));
            }
            self.table.insert((task, fidelity), kinds);
        }
        Ok(self)
    }

    pub fn lookup(&self, task: TaskKind, fidelity: FidelityLevel) -> Vec<Selection> {
        self.table.get(&(task, fidelity)).cloned().unwrap_or_default()
    }
}

/// Semantics required for a task at a fidelity under the default policy.
pub fn required_semantics(task: TaskKind, fidelity: FidelityLevel) -> Vec<Selection> {
    Policy::default().lookup(task, fidelity)
}

/// Encoded sections ready for the container.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledPayload {
    pub sections: Vec<SemanticPayload>,
    /// Container header plus every section padded to whole bytes.
    pub bit_count: usize,
    pub source_image: (u32, u32),
}

impl AssembledPayload {
    pub fn to_bytes(&self) -> Vec<u8> {
        write_container(&self.sections)
    }
}

/// Encodes each selection of a scene and wraps them in one container.
pub fn assemble_payload(
    scene: &SceneAnnotation,
    selections: &[Selection],
    filtered: Option<&SceneGraph>,
    config: &CodecConfig,
) -> Result<AssembledPayload, SelectError> {
    let mut sections = Vec::with_capacity(selections.len());
    let mut bit_count = MAGIC_BITS;
    for sel in selections {
        let graph = if sel.needs_filtered_graph() {
            filtered.ok_or(SelectError::MissingFilteredGraph(*sel))?
        } else {
            &scene.graph
        };
        let p = encode_semantics(sel.kind, scene, graph, config)?;
        bit_count += SECTION_HEADER_BITS + p.bit_count.div_ceil(8) * 8;
        sections.push(p);
    }
    Ok(AssembledPayload {
        sections,
        bit_count,
        source_image: (scene.width, scene.height),
    })
}
