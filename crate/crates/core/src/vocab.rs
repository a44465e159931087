//! Object and predicate vocabularies.
//!
//! The defaults are the 150 object classes and 50 predicate classes of the
//! common Visual Genome scene-graph split, each preceded by a background entry
//! at index 0 (151 and 51 entries in total). Multi-word entries use
//! underscores so that every label is a single whitespace-free token.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

const OBJECT_LABELS: [&str; 150] = [
    "airplane",
    "animal",
    "arm",
    "bag",
    "banana",
    "basket",
    "beach",
    "bear",
    "bed",
    "bench",
    "bike",
    "bird",
    "board",
    "boat",
    "book",
    "boot",
    "bottle",
    "bowl",
    "box",
    "boy",
    "branch",
    "building",
    "bus",
    "cabinet",
    "cap",
    "car",
    "cat",
    "chair",
    "child",
    "clock",
    "coat",
    "counter",
    "cow",
    "cup",
    "curtain",
    "desk",
    "dog",
    "door",
    "drawer",
    "ear",
    "elephant",
    "engine",
    "eye",
    "face",
    "fence",
    "finger",
    "flag",
    "flower",
    "food",
    "fork",
    "fruit",
    "giraffe",
    "girl",
    "glass",
    "glove",
    "guy",
    "hair",
    "hand",
    "handle",
    "hat",
    "head",
    "helmet",
    "hill",
    "horse",
    "house",
    "jacket",
    "jean",
    "kid",
    "kite",
    "lady",
    "lamp",
    "laptop",
    "leaf",
    "leg",
    "letter",
    "light",
    "logo",
    "man",
    "men",
    "motorcycle",
    "mountain",
    "mouth",
    "neck",
    "nose",
    "number",
    "orange",
    "pant",
    "paper",
    "paw",
    "people",
    "person",
    "phone",
    "pillow",
    "pizza",
    "plane",
    "plant",
    "plate",
    "player",
    "pole",
    "post",
    "pot",
    "racket",
    "railing",
    "rock",
    "roof",
    "room",
    "screen",
    "seat",
    "sheep",
    "shelf",
    "shirt",
    "shoe",
    "short",
    "sidewalk",
    "sign",
    "sink",
    "skateboard",
    "ski",
    "skier",
    "sneaker",
    "snow",
    "sock",
    "stand",
    "street",
    "surfboard",
    "table",
    "tail",
    "tie",
    "tile",
    "tire",
    "toilet",
    "towel",
    "tower",
    "track",
    "train",
    "tree",
    "truck",
    "trunk",
    "umbrella",
    "vase",
    "vegetable",
    "vehicle",
    "wave",
    "wheel",
    "window",
    "windshield",
    "wing",
    "wire",
    "woman",
    "zebra",
];

const PREDICATE_LABELS: [&str; 50] = [
    "above",
    "across",
    "against",
    "along",
    "and",
    "at",
    "attached_to",
    "behind",
    "belonging_to",
    "between",
    "carrying",
    "covered_in",
    "covering",
    "eating",
    "flying_in",
    "for",
    "from",
    "growing_on",
    "hanging_from",
    "has",
    "holding",
    "in",
    "in_front_of",
    "laying_on",
    "looking_at",
    "lying_on",
    "made_of",
    "mounted_on",
    "near",
    "of",
    "on",
    "on_back_of",
    "over",
    "painted_on",
    "parked_on",
    "part_of",
    "playing",
    "riding",
    "says",
    "sitting_on",
    "standing_on",
    "to",
    "under",
    "using",
    "walking_in",
    "walking_on",
    "watching",
    "wearing",
    "wears",
    "with",
];

/// Label reserved for index 0 of both default vocabularies.
pub const BACKGROUND: &str = "__background__";

/// An indexed list of lowercase, space-free labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary from labels in index order. Labels are lowercased;
    /// internal whitespace is replaced by underscores.
    pub fn from_labels<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let labels: Vec<String> = labels.into_iter().map(|l| normalize_label(l.as_ref())).collect();
        let index = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        Self { labels, index }
    }

    /// The default 151-entry object vocabulary.
    pub fn objects() -> Arc<Vocabulary> {
        static V: OnceLock<Arc<Vocabulary>> = OnceLock::new();
        V.get_or_init(|| {
            Arc::new(Self::from_labels(
                std::iter::once(BACKGROUND).chain(OBJECT_LABELS.iter().copied()),
            ))
        })
        .clone()
    }

    /// The default 51-entry predicate vocabulary.
    pub fn predicates() -> Arc<Vocabulary> {
        static V: OnceLock<Arc<Vocabulary>> = OnceLock::new();
        V.get_or_init(|| {
            Arc::new(Self::from_labels(
                std::iter::once(BACKGROUND).chain(PREDICATE_LABELS.iter().copied()),
            ))
        })
        .clone()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn id_of(&self, label: &str) -> Option<usize> {
        self.index.get(&normalize_label(label)).copied()
    }

    pub fn label(&self, id: usize) -> Option<&str> {
        self.labels.get(id).map(String::as_str)
    }
}

/// Lowercases a label and joins whitespace-separated words with underscores.
pub fn normalize_label(label: &str) -> String {
    label.split_whitespace().collect::<Vec<_>>().join("_").to_lowercase()
}
