//! Core domain types for visual semantics.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::vocab::Vocabulary;

/// A detected entity in a scene.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub id: u32,
    pub label: String,
    pub class_id: u32,
}

/// Axis-aligned box in pixel units, top-left anchored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

impl BoundingBox {
    pub fn new(x: i64, y: i64, w: i64, h: i64) -> Self {
        Self { x, y, w, h }
    }

    /// True if the pixel centre `(px + 0.5, py + 0.5)` lies inside the box.
    pub fn contains_center(&self, px: f64, py: f64) -> bool {
        px >= self.x as f64 && px < (self.x + self.w) as f64 && py >= self.y as f64 && py < (self.y + self.h) as f64
    }
}

/// A directed predicate between two objects of the same scene.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationInstance {
    pub subject_id: u32,
    pub object_id: u32,
    pub predicate: String,
    pub predicate_id: u32,
}

/// Objects (nodes) and relations (edges). Each relation is one sub-graph
/// triple `(subject, predicate, object)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub objects: Vec<ObjectInstance>,
    pub relations: Vec<RelationInstance>,
}

impl SceneGraph {
    pub fn object(&self, id: u32) -> Option<&ObjectInstance> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// Objects that take part in no relation, in object-list order.
    pub fn isolated_objects(&self) -> Vec<&ObjectInstance> {
        let linked: HashSet<u32> = self
            .relations
            .iter()
            .flat_map(|r| [r.subject_id, r.object_id])
            .collect();
        self.objects.iter().filter(|o| !linked.contains(&o.id)).collect()
    }

    /// Copy of this graph keeping only the relations selected by `keep`
    /// (indexed like `relations`). Objects are always kept.
    pub fn with_relations<F: FnMut(usize) -> bool>(&self, mut keep: F) -> SceneGraph {
        SceneGraph {
            objects: self.objects.clone(),
            relations: self
                .relations
                .iter()
                .enumerate()
                .filter(|(i, _)| keep(*i))
                .map(|(_, r)| r.clone())
                .collect(),
        }
    }
}

/// Sentence form of a sub-graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubGraphSentence {
    pub subject_label: String,
    pub predicate: String,
    pub object_label: String,
}

impl SubGraphSentence {
    pub fn new(subject: &str, predicate: &str, object: &str) -> Self {
        Self {
            subject_label: subject.to_lowercase(),
            predicate: predicate.to_lowercase(),
            object_label: object.to_lowercase(),
        }
    }

    /// Canonical rendering: `"{subject} {predicate} {object}"`.
    pub fn render(&self) -> String {
        self.to_string()
    }

    /// Parses a canonical rendering back into its three tokens.
    pub fn parse(text: &str) -> Option<Self> {
        let mut it = text.split(' ');
        let (s, p, o) = (it.next()?, it.next()?, it.next()?);
        if it.next().is_some() || s.is_empty() || p.is_empty() || o.is_empty() {
            return None;
        }
        Some(Self::new(s, p, o))
    }
}

impl fmt::Display for SubGraphSentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.subject_label, self.predicate, self.object_label)
    }
}

/// Discretized semantic segmentation map; 0 is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationGrid {
    pub width_cells: u32,
    pub height_cells: u32,
    pub cells: Vec<u32>,
}

impl SegmentationGrid {
    /// Rasterizes the scene's boxes onto a `width_cells × height_cells` grid.
    /// A cell takes the class of a box containing its centre; boxes are drawn in
    /// ascending object id order, so later ids overwrite earlier ones.
    pub fn rasterize(scene: &SceneAnnotation, width_cells: u32, height_cells: u32) -> Self {
        let mut cells = vec![0u32; width_cells as usize * height_cells as usize];
        let mut objects: Vec<&ObjectInstance> = scene.graph.objects.iter().collect();
        objects.sort_by_key(|o| o.id);
        let sx = scene.width as f64 / width_cells as f64;
        let sy = scene.height as f64 / height_cells as f64;
        for obj in objects {
            let Some(b) = scene.layouts.get(&obj.id) else { continue };
            for cy in 0..height_cells {
                let py = (cy as f64 + 0.5) * sy;
                for cx in 0..width_cells {
                    let px = (cx as f64 + 0.5) * sx;
                    if b.contains_center(px, py) {
                        cells[(cy * width_cells + cx) as usize] = obj.class_id;
                    }
                }
            }
        }
        Self {
            width_cells,
            height_cells,
            cells,
        }
    }
}

/// Shape (and optionally values) of a dense feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMapSpec {
    pub channels: u32,
    pub width: u32,
    pub height: u32,
    pub quant_bits: u32,
    pub values: Option<Vec<f32>>,
}

impl FeatureMapSpec {
    /// The directly decodable 4×64×64 map at 8 bits, without values.
    pub fn decodable_default() -> Self {
        Self {
            channels: 4,
            width: 64,
            height: 64,
            quant_bits: 8,
            values: None,
        }
    }

    pub fn element_count(&self) -> usize {
        self.channels as usize * self.width as usize * self.height as usize
    }

    /// Fills `values` with a deterministic synthetic pattern in [-1, 1].
    pub fn with_synthetic_values(mut self, seed: u64) -> Self {
        let n = self.element_count();
        let phase = (seed % 1024) as f32 * 0.01;
        self.values = Some((0..n).map(|i| ((i as f32) * 0.137 + phase).sin()).collect());
        self
    }
}

/// One image's ground-truth semantics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SceneAnnotation {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub graph: SceneGraph,
    pub layouts: BTreeMap<u32, BoundingBox>,
}

impl SceneAnnotation {
    /// Objects paired with their boxes, in object-list order.
    pub fn objects_with_layouts(&self) -> Vec<(&ObjectInstance, BoundingBox)> {
        self.graph
            .objects
            .iter()
            .filter_map(|o| self.layouts.get(&o.id).map(|b| (o, *b)))
            .collect()
    }

    pub fn pixel_count(&self) -> u64 {
        self.width as u64 * self.height as u64
    }
}

/// Kinds of visual semantics that can be transmitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SemanticKind {
    Objects,
    Layouts,
    ObjectsLayouts,
    SegMap,
    SceneGraphFull,
    SceneGraphFiltered,
    SceneGraphLayouts,
    FeatureMap,
    CompressedImage,
}

impl SemanticKind {
    pub const ALL: [SemanticKind; 9] = [
        SemanticKind::Objects,
        SemanticKind::Layouts,
        SemanticKind::ObjectsLayouts,
        SemanticKind::SegMap,
        SemanticKind::SceneGraphFull,
        SemanticKind::SceneGraphFiltered,
        SemanticKind::SceneGraphLayouts,
        SemanticKind::FeatureMap,
        SemanticKind::CompressedImage,
    ];

    /// Container tag byte.
    pub fn tag(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.get(tag.checked_sub(1)? as usize).copied()
    }

    /// Symbolic kinds are ASCII text and use the short code block.
    pub fn is_text(self) -> bool {
        !matches!(
            self,
            SemanticKind::SegMap | SemanticKind::FeatureMap | SemanticKind::CompressedImage
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            SemanticKind::Objects => "objects",
            SemanticKind::Layouts => "layouts",
            SemanticKind::ObjectsLayouts => "objects_layouts",
            SemanticKind::SegMap => "segmap",
            SemanticKind::SceneGraphFull => "sg",
            SemanticKind::SceneGraphFiltered => "sg_filtered",
            SemanticKind::SceneGraphLayouts => "sg_layouts",
            SemanticKind::FeatureMap => "feature_map",
            SemanticKind::CompressedImage => "compressed_image",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.name() == name)
    }
}

impl fmt::Display for SemanticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A serialized semantic section. `bits` holds `bit_count` bits MSB-first,
/// zero-padded to a whole byte.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticPayload {
    pub kind: SemanticKind,
    pub bits: Vec<u8>,
    pub bit_count: usize,
    pub source_image: (u32, u32),
}

/// The invariant a [`Violation`] reports on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Rule {
    PositiveDimensions,
    UniqueObjectId,
    ClassIdRange,
    LabelMatchesVocabulary,
    DistinctEndpoints,
    PredicateIdRange,
    PredicateMatchesVocabulary,
    ReferentialIntegrity,
    DuplicateTriple,
    MissingLayout,
    OrphanLayout,
    BoxSize,
    BoxBounds,
}

/// One broken invariant of a scene.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub rule: Rule,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {:?}: {}", self.field, self.rule, self.message)
    }
}

/// Checks every scene invariant against the default vocabularies.
pub fn validate_scene(scene: &SceneAnnotation) -> Vec<Violation> {
    validate_scene_with(scene, &Vocabulary::objects(), &Vocabulary::predicates())
}

pub fn validate_scene_with(scene: &SceneAnnotation, objects: &Vocabulary, predicates: &Vocabulary) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |field: String, rule: Rule, message: String| out.push(Violation { field, rule, message });

    if scene.width == 0 || scene.height == 0 {
        push(
            "width/height".into(),
            Rule::PositiveDimensions,
            format!("image is {}x{}", scene.width, scene.height),
        );
    }

    let mut ids = HashSet::new();
    for (i, o) in scene.graph.objects.iter().enumerate() {
        let field = format!("objects[{i}]");
        if !ids.insert(o.id) {
            push(field.clone(), Rule::UniqueObjectId, format!("id {} repeated", o.id));
        }
        match objects.label(o.class_id as usize) {
            None => push(
                field.clone(),
                Rule::ClassIdRange,
                format!("class_id {} outside [0, {})", o.class_id, objects.len()),
            ),
            Some(l) if l != o.label => push(
                field.clone(),
                Rule::LabelMatchesVocabulary,
                format!("label {:?} but vocabulary[{}] = {:?}", o.label, o.class_id, l),
            ),
            _ => {}
        }
        match scene.layouts.get(&o.id) {
            None => push(field, Rule::MissingLayout, format!("object {} has no box", o.id)),
            Some(b) => {
                let field = format!("layouts[{}]", o.id);
                if b.w < 1 || b.h < 1 {
                    push(field.clone(), Rule::BoxSize, format!("w={} h={}", b.w, b.h));
                }
                if b.x < 0 || b.y < 0 || b.x + b.w > scene.width as i64 || b.y + b.h > scene.height as i64 {
                    push(
                        field,
                        Rule::BoxBounds,
                        format!(
                            "box [{},{},{},{}] exceeds {}x{}",
                            b.x, b.y, b.w, b.h, scene.width, scene.height
                        ),
                    );
                }
            }
        }
    }
    for id in scene.layouts.keys() {
        if !ids.contains(id) {
            push(
                format!("layouts[{id}]"),
                Rule::OrphanLayout,
                format!("no object with id {id}"),
            );
        }
    }

    let mut triples = HashSet::new();
    for (i, r) in scene.graph.relations.iter().enumerate() {
        let field = format!("relations[{i}]");
        if r.subject_id == r.object_id {
            push(
                field.clone(),
                Rule::DistinctEndpoints,
                format!("self-loop on {}", r.subject_id),
            );
        }
        for end in [r.subject_id, r.object_id] {
            if !ids.contains(&end) {
                push(
                    field.clone(),
                    Rule::ReferentialIntegrity,
                    format!("object {end} not present"),
                );
            }
        }
        match predicates.label(r.predicate_id as usize) {
            None => push(
                field.clone(),
                Rule::PredicateIdRange,
                format!("predicate_id {} outside [0, {})", r.predicate_id, predicates.len()),
            ),
            Some(l) if l != r.predicate => push(
                field.clone(),
                Rule::PredicateMatchesVocabulary,
                format!(
                    "predicate {:?} but vocabulary[{}] = {:?}",
                    r.predicate, r.predicate_id, l
                ),
            ),
            _ => {}
        }
        if !triples.insert((r.subject_id, r.predicate_id, r.object_id)) {
            push(
                field,
                Rule::DuplicateTriple,
                format!("({}, {}, {}) repeated", r.subject_id, r.predicate, r.object_id),
            );
        }
    }
    out
}

/// One sentence per relation, in relation order.
pub fn to_sentences(graph: &SceneGraph) -> Vec<SubGraphSentence> {
    let labels: HashMap<u32, &str> = graph.objects.iter().map(|o| (o.id, o.label.as_str())).collect();
    graph
        .relations
        .iter()
        .map(|r| {
            let s = labels.get(&r.subject_id).copied().unwrap_or("?");
            let o = labels.get(&r.object_id).copied().unwrap_or("?");
            SubGraphSentence::new(s, &r.predicate, o)
        })
        .collect()
}


#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;

    #[test]
    fn valid_fixture_has_no_violations() {
        assert!(validate_scene(&ski()).is_empty());
    }

    #[test]
    fn empty_scene_is_valid() {
        let s = scene(10, 10, &[], &[]);
        assert!(validate_scene(&s).is_empty());
    }

    #[test]
    fn dangling_relation_reported() {
        let mut s = ski();
        s.graph.relations[0].object_id = 99;
        let v = validate_scene(&s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::ReferentialIntegrity);
        assert_eq!(v[0].field, "relations[0]");
    }

    #[test]
    fn box_out_of_bounds_reported() {
        let s = scene(100, 100, &[("man", [50, 0, 60, 10])], &[]);
        let v = validate_scene(&s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::BoxBounds);
    }

    #[test]
    fn other_rules() {
        let s = scene(
            100,
            100,
            &[("man", [0, 0, 0, 10]), ("hat", [0, 0, 5, 5])],
            &[(0, "wearing", 0), (0, "wearing", 1), (0, "wearing", 1)],
        );
        let rules: Vec<Rule> = validate_scene(&s).into_iter().map(|v| v.rule).collect();
        assert!(rules.contains(&Rule::BoxSize));
        assert!(rules.contains(&Rule::DistinctEndpoints));
        assert!(rules.contains(&Rule::DuplicateTriple));

        let mut s = ski();
        s.graph.objects[0].class_id = 500;
        s.graph.relations[0].predicate = "rides".into();
        s.layouts.insert(42, BoundingBox::new(0, 0, 1, 1));
        let rules: Vec<Rule> = validate_scene(&s).into_iter().map(|v| v.rule).collect();
        assert_eq!(
            rules,
            vec![Rule::ClassIdRange, Rule::OrphanLayout, Rule::PredicateMatchesVocabulary]
        );
    }

    #[test]
    fn sentences_follow_relation_order() {
        let s = scene(
            100,
            100,
            &[("man", [0, 0, 5, 5]), ("pole", [0, 0, 5, 5]), ("hand", [0, 0, 5, 5])],
            &[(0, "holding", 1), (1, "in", 2)],
        );
        let got: Vec<String> = to_sentences(&s.graph).iter().map(|x| x.render()).collect();
        assert_eq!(got, vec!["man holding pole", "pole in hand"]);
        assert_eq!(to_sentences(&ski().graph)[0].render(), "man riding ski");
        assert!(to_sentences(&SceneGraph::default()).is_empty());
    }

    #[test]
    fn sentence_parse_round_trip() {
        let s = SubGraphSentence::new("Man", "in_front_of", "tree");
        assert_eq!(s.render(), "man in_front_of tree");
        assert_eq!(SubGraphSentence::parse(&s.render()), Some(s));
        assert_eq!(SubGraphSentence::parse("man riding"), None);
        assert_eq!(SubGraphSentence::parse("a b c d"), None);
    }

    #[test]
    fn kind_tags_round_trip() {
        for k in SemanticKind::ALL {
            assert_eq!(SemanticKind::from_tag(k.tag()), Some(k));
            assert_eq!(SemanticKind::from_name(k.name()), Some(k));
        }
        assert_eq!(SemanticKind::from_tag(0), None);
    }

    #[test]
    fn rasterize_later_ids_overwrite() {
        let s = scene(4, 4, &[("man", [0, 0, 4, 4]), ("hat", [0, 0, 2, 2])], &[]);
        let g = SegmentationGrid::rasterize(&s, 2, 2);
        let man = Vocabulary::objects().id_of("man").unwrap() as u32;
        let hat = Vocabulary::objects().id_of("hat").unwrap() as u32;
        assert_eq!(g.cells, vec![hat, man, man, man]);
    }
}
