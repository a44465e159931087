//! Bit-exact source coding of each semantic kind and payload metrics.
//!
//! Symbolic kinds are rendered as ASCII text (8 bits per character). Feature
//! maps are uniformly quantized; segmentation grids are packed at a fixed
//! number of bits per cell. Sections are wrapped in an `SPAY` container.

use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{
    BoundingBox, FeatureMapSpec, SceneAnnotation, SceneGraph, SegmentationGrid, SemanticKind, SemanticPayload,
    SubGraphSentence,
};

pub const CONTAINER_MAGIC: &[u8; 4] = b"SPAY";
/// Container header bits: the magic plus, per section, a kind tag and a length.
pub const MAGIC_BITS: usize = 32;
pub const SECTION_HEADER_BITS: usize = 8 + 32;
/// Raw RGB reference for the compression rate.
pub const RAW_BITS_PER_PIXEL: f64 = 24.0;

#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("malformed payload: {0}")]
    MalformedPayload(String),
    #[error("class id {class_id} at cell {cell} does not fit in {bits} bits")]
    ClassIdOverflow { cell: usize, class_id: u32, bits: u32 },
    #[error("feature map has no values")]
    MissingValues,
    #[error("feature map has {got} values, shape needs {expected}")]
    ValueCount { expected: usize, got: usize },
    #[error("invalid codec configuration: {0}")]
    InvalidConfig(String),
    #[error("{0} is not handled by this encoder")]
    UnsupportedKind(SemanticKind),
    #[error("compressed image size not configured")]
    MissingImageSize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodecConfig {
    pub segmap_grid: (u32, u32),
    pub segmap_bits_per_cell: u32,
    pub featuremap_quant_bits: u32,
    /// Shape `(channels, width, height)` of the transmitted feature map.
    pub featuremap_shape: (u32, u32, u32),
    pub compressed_image_bytes: Option<u64>,
    /// Size of the compressed image relative to each scene's pixel count;
    /// used when no fixed byte size is set.
    pub compressed_image_bpp: Option<f64>,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            segmap_grid: (128, 128),
            segmap_bits_per_cell: 8,
            featuremap_quant_bits: 8,
            featuremap_shape: (4, 64, 64),
            compressed_image_bytes: None,
            compressed_image_bpp: None,
        }
    }
}

impl CodecConfig {
    pub fn validate(&self) -> Result<(), CodecError> {
        if !(1..=16).contains(&self.featuremap_quant_bits) {
            return Err(CodecError::InvalidConfig(format!(
                "featuremap_quant_bits {} outside [1, 16]",
                self.featuremap_quant_bits
            )));
        }
        if !(1..=32).contains(&self.segmap_bits_per_cell) {
            return Err(CodecError::InvalidConfig(format!(
                "segmap_bits_per_cell {} outside [1, 32]",
                self.segmap_bits_per_cell
            )));
        }
        let (w, h) = self.segmap_grid;
        if w == 0 || h == 0 || w > u16::MAX as u32 || h > u16::MAX as u32 {
            return Err(CodecError::InvalidConfig(format!("segmap grid {w}x{h}")));
        }
        let (c, x, y) = self.featuremap_shape;
        if c == 0 || x == 0 || y == 0 {
            return Err(CodecError::InvalidConfig(format!("feature map shape {c}x{x}x{y}")));
        }
        if let Some(bpp) = self.compressed_image_bpp {
            if bpp.is_nan() || bpp <= 0.0 || bpp.is_infinite() {
                return Err(CodecError::InvalidConfig(format!("compressed image bpp {bpp}")));
            }
        }
        Ok(())
    }

    /// Compressed-image bytes for an image of the given size.
    pub fn compressed_image_size(&self, width: u32, height: u32) -> Option<u64> {
        self.compressed_image_bytes
            .or_else(|| self.compressed_image_bpp.map(|bpp| bpp_to_bytes(bpp, width, height)))
    }

    /// Configures the compressed-image size from a target bits-per-pixel.
    pub fn with_image_bpp(mut self, bpp: f64, width: u32, height: u32) -> Self {
        self.compressed_image_bytes = Some(bpp_to_bytes(bpp, width, height));
        self
    }
}

fn bpp_to_bytes(bpp: f64, width: u32, height: u32) -> u64 {
    (bpp * width as f64 * height as f64 / 8.0).ceil() as u64
}

/// MSB-first bit packer.
#[derive(Debug, Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    len: usize,
}

impl BitWriter {
    pub fn push(&mut self, value: u64, bits: u32) {
        for i in (0..bits).rev() {
            if self.len.is_multiple_of(8) {
                self.bytes.push(0);
            }
            if (value >> i) & 1 == 1 {
                *self.bytes.last_mut().unwrap() |= 0x80 >> (self.len % 8);
            }
            self.len += 1;
        }
    }

    pub fn finish(self) -> (Vec<u8>, usize) {
        (self.bytes, self.len)
    }
}

/// MSB-first bit reader.
#[derive(Debug)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    limit: usize,
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8], limit: usize) -> Self {
        Self {
            bytes,
            limit: limit.min(bytes.len() * 8),
            pos: 0,
        }
    }

    pub fn read(&mut self, bits: u32) -> Result<u64, CodecError> {
        if self.pos + bits as usize > self.limit {
            return Err(CodecError::MalformedPayload(format!(
                "needs {bits} bits at offset {}, only {} available",
                self.pos, self.limit
            )));
        }
        let mut v = 0u64;
        for _ in 0..bits {
            let bit = (self.bytes[self.pos / 8] >> (7 - self.pos % 8)) & 1;
            v = (v << 1) | bit as u64;
            self.pos += 1;
        }
        Ok(v)
    }

    pub fn remaining(&self) -> usize {
        self.limit - self.pos
    }
}

fn payload(kind: SemanticKind, bits: Vec<u8>, bit_count: usize, scene: &SceneAnnotation) -> SemanticPayload {
    SemanticPayload {
        kind,
        bits,
        bit_count,
        source_image: (scene.width, scene.height),
    }
}

/// Canonical ASCII rendering of a symbolic kind. `graph` supplies the
/// relations for scene-graph kinds; objects and boxes come from `scene`.
pub fn render_text(kind: SemanticKind, scene: &SceneAnnotation, graph: &SceneGraph) -> Result<String, CodecError> {
    let mut out = String::new();
    let objects_layouts = |out: &mut String| {
        for (o, b) in scene.objects_with_layouts() {
            let _ = writeln!(out, "{} {},{},{},{}", o.label, b.x, b.y, b.w, b.h);
        }
    };
    match kind {
        SemanticKind::Objects => {
            for o in &scene.graph.objects {
                let _ = writeln!(out, "{}", o.label);
            }
        }
        SemanticKind::Layouts => {
            for (_, b) in scene.objects_with_layouts() {
                let _ = writeln!(out, "{},{},{},{}", b.x, b.y, b.w, b.h);
            }
        }
        SemanticKind::ObjectsLayouts => objects_layouts(&mut out),
        SemanticKind::SceneGraphFull | SemanticKind::SceneGraphFiltered => {
            for s in crate::model::to_sentences(graph) {
                let _ = writeln!(out, "{s}");
            }
            for o in graph.isolated_objects() {
                let _ = writeln!(out, "{}", o.label);
            }
        }
        SemanticKind::SceneGraphLayouts => {
            if graph.relations.is_empty() && scene.graph.objects.is_empty() {
                return Ok(out);
            }
            for s in crate::model::to_sentences(graph) {
                let _ = writeln!(out, "{s}");
            }
            out.push('\n');
            objects_layouts(&mut out);
        }
        other => return Err(CodecError::UnsupportedKind(other)),
    }
    Ok(out)
}

/// ASCII-encodes a symbolic kind at 8 bits per character.
pub fn encode_text_semantics(
    kind: SemanticKind,
    scene: &SceneAnnotation,
    graph: &SceneGraph,
) -> Result<SemanticPayload, CodecError> {
    let text = render_text(kind, scene, graph)?;
    debug_assert!(text.is_ascii());
    let bytes = text.into_bytes();
    let n = bytes.len() * 8;
    Ok(payload(kind, bytes, n, scene))
}

/// Structural content of a text payload. Which fields are filled depends on
/// the kind; object identity is positional.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TextSemantics {
    pub labels: Vec<String>,
    pub boxes: Vec<BoundingBox>,
    pub sentences: Vec<SubGraphSentence>,
    pub isolated: Vec<String>,
}

/// The structure [`decode_text_semantics`] should recover for this input.
pub fn expected_text_semantics(kind: SemanticKind, scene: &SceneAnnotation, graph: &SceneGraph) -> TextSemantics {
    let mut t = TextSemantics::default();
    let with_boxes = scene.objects_with_layouts();
    match kind {
        SemanticKind::Objects => t.labels = scene.graph.objects.iter().map(|o| o.label.clone()).collect(),
        SemanticKind::Layouts => t.boxes = with_boxes.iter().map(|(_, b)| *b).collect(),
        SemanticKind::ObjectsLayouts => {
            t.labels = with_boxes.iter().map(|(o, _)| o.label.clone()).collect();
            t.boxes = with_boxes.iter().map(|(_, b)| *b).collect();
        }
        SemanticKind::SceneGraphFull | SemanticKind::SceneGraphFiltered => {
            t.sentences = crate::model::to_sentences(graph);
            t.isolated = graph.isolated_objects().iter().map(|o| o.label.clone()).collect();
        }
        SemanticKind::SceneGraphLayouts => {
            t.sentences = crate::model::to_sentences(graph);
            t.labels = with_boxes.iter().map(|(o, _)| o.label.clone()).collect();
            t.boxes = with_boxes.iter().map(|(_, b)| *b).collect();
        }
        _ => {}
    }
    t
}

fn parse_box(field: &str) -> Result<BoundingBox, CodecError> {
    let parts: Vec<&str> = field.split(',').collect();
    if parts.len() != 4 {
        return Err(CodecError::MalformedPayload(format!("box {field:?} needs 4 fields")));
    }
    let mut v = [0i64; 4];
    for (slot, p) in v.iter_mut().zip(parts) {
        *slot = p
            .parse()
            .map_err(|_| CodecError::MalformedPayload(format!("non-numeric box field {p:?}")))?;
    }
    Ok(BoundingBox::new(v[0], v[1], v[2], v[3]))
}

fn parse_object_layout(line: &str) -> Result<(String, BoundingBox), CodecError> {
    let (label, b) = line
        .split_once(' ')
        .ok_or_else(|| CodecError::MalformedPayload(format!("expected \"label x,y,w,h\", got {line:?}")))?;
    Ok((label.to_owned(), parse_box(b)?))
}

pub fn decode_text_semantics(kind: SemanticKind, payload: &SemanticPayload) -> Result<TextSemantics, CodecError> {
    if !payload.bit_count.is_multiple_of(8) || payload.bit_count / 8 > payload.bits.len() {
        return Err(CodecError::MalformedPayload("text payload is not whole bytes".into()));
    }
    let text = std::str::from_utf8(&payload.bits[..payload.bit_count / 8])
        .ok()
        .filter(|t| t.is_ascii())
        .ok_or_else(|| CodecError::MalformedPayload("payload is not ASCII".into()))?;
    if !text.is_empty() && !text.ends_with('\n') {
        return Err(CodecError::MalformedPayload("missing final newline".into()));
    }
    let lines: Vec<&str> = text.lines().collect();
    let mut t = TextSemantics::default();
    match kind {
        SemanticKind::Objects => t.labels = lines.iter().map(|l| l.to_string()).collect(),
        SemanticKind::Layouts => t.boxes = lines.iter().map(|l| parse_box(l)).collect::<Result<_, _>>()?,
        SemanticKind::ObjectsLayouts => {
            for l in lines {
                let (label, b) = parse_object_layout(l)?;
                t.labels.push(label);
                t.boxes.push(b);
            }
        }
        SemanticKind::SceneGraphFull | SemanticKind::SceneGraphFiltered => {
            for l in lines {
                match l.split(' ').count() {
                    1 if !l.is_empty() => t.isolated.push(l.to_owned()),
                    3 => t.sentences.push(
                        SubGraphSentence::parse(l)
                            .ok_or_else(|| CodecError::MalformedPayload(format!("bad sentence {l:?}")))?,
                    ),
                    _ => return Err(CodecError::MalformedPayload(format!("bad line {l:?}"))),
                }
            }
        }
        SemanticKind::SceneGraphLayouts => {
            if lines.is_empty() {
                return Ok(t);
            }
            let split = lines
                .iter()
                .position(|l| l.is_empty())
                .ok_or_else(|| CodecError::MalformedPayload("missing layout section".into()))?;
            for l in &lines[..split] {
                t.sentences.push(
                    SubGraphSentence::parse(l)
                        .ok_or_else(|| CodecError::MalformedPayload(format!("bad sentence {l:?}")))?,
                );
            }
            for l in &lines[split + 1..] {
                let (label, b) = parse_object_layout(l)?;
                t.labels.push(label);
                t.boxes.push(b);
            }
        }
        other => return Err(CodecError::UnsupportedKind(other)),
    }
    Ok(t)
}

/// Uniform scalar quantizer parameters: `value ≈ offset + code × scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantizer {
    pub scale: f32,
    pub offset: f32,
    pub bits: u32,
}

impl Quantizer {
    pub fn fit(values: &[f32], bits: u32) -> Self {
        let (min, max) = values.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        let levels = ((1u64 << bits) - 1) as f64;
        let scale = if max > min {
            ((max as f64 - min as f64) / levels) as f32
        } else {
            0.0
        };
        Self {
            scale,
            offset: min,
            bits,
        }
    }

    pub fn max_code(&self) -> u64 {
        (1u64 << self.bits) - 1
    }

    pub fn quantize(&self, v: f32) -> u64 {
        if self.scale == 0.0 {
            return 0;
        }
        let c = ((v as f64 - self.offset as f64) / self.scale as f64).round();
        c.clamp(0.0, self.max_code() as f64) as u64
    }

    pub fn dequantize(&self, code: u64) -> f32 {
        (self.offset as f64 + code as f64 * self.scale as f64) as f32
    }
}

/// Quantizes a feature map: 64-bit header (f32 scale, f32 offset, big-endian
/// bit order like the codes) followed by `C×X×Y` codes of `quant_bits` each.
pub fn encode_feature_map(spec: &FeatureMapSpec, source_image: (u32, u32)) -> Result<SemanticPayload, CodecError> {
    if !(1..=16).contains(&spec.quant_bits) {
        return Err(CodecError::InvalidConfig(format!(
            "quant_bits {} outside [1, 16]",
            spec.quant_bits
        )));
    }
    let values = spec.values.as_ref().ok_or(CodecError::MissingValues)?;
    if values.len() != spec.element_count() {
        return Err(CodecError::ValueCount {
            expected: spec.element_count(),
            got: values.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(CodecError::MalformedPayload("non-finite feature value".into()));
    }
    let q = Quantizer::fit(values, spec.quant_bits);
    let mut w = BitWriter::default();
    w.push(q.scale.to_bits() as u64, 32);
    w.push(q.offset.to_bits() as u64, 32);
    for &v in values {
        w.push(q.quantize(v), spec.quant_bits);
    }
    let (bits, bit_count) = w.finish();
    Ok(SemanticPayload {
        kind: SemanticKind::FeatureMap,
        bits,
        bit_count,
        source_image,
    })
}

/// Inverse of [`encode_feature_map`] for a known shape and bit depth.
pub fn decode_feature_map(
    payload: &SemanticPayload,
    element_count: usize,
    quant_bits: u32,
) -> Result<Vec<f32>, CodecError> {
    let mut r = BitReader::new(&payload.bits, payload.bit_count);
    let scale = f32::from_bits(r.read(32)? as u32);
    let offset = f32::from_bits(r.read(32)? as u32);
    let q = Quantizer {
        scale,
        offset,
        bits: quant_bits,
    };
    (0..element_count)
        .map(|_| Ok(q.dequantize(r.read(quant_bits)?)))
        .collect()
}

/// Packs a grid: u16 width, u16 height, then row-major cells.
pub fn encode_segmentation_map(
    grid: &SegmentationGrid,
    bits_per_cell: u32,
    source_image: (u32, u32),
) -> Result<SemanticPayload, CodecError> {
    if !(1..=32).contains(&bits_per_cell) {
        return Err(CodecError::InvalidConfig(format!(
            "bits_per_cell {bits_per_cell} outside [1, 32]"
        )));
    }
    if grid.width_cells > u16::MAX as u32 || grid.height_cells > u16::MAX as u32 {
        return Err(CodecError::InvalidConfig("grid dimension exceeds 16 bits".into()));
    }
    if grid.cells.len() != grid.width_cells as usize * grid.height_cells as usize {
        return Err(CodecError::MalformedPayload("cell count does not match grid".into()));
    }
    let mut w = BitWriter::default();
    w.push(grid.width_cells as u64, 16);
    w.push(grid.height_cells as u64, 16);
    for (cell, &c) in grid.cells.iter().enumerate() {
        if (c as u64) >> bits_per_cell != 0 {
            return Err(CodecError::ClassIdOverflow {
                cell,
                class_id: c,
                bits: bits_per_cell,
            });
        }
        w.push(c as u64, bits_per_cell);
    }
    let (bits, bit_count) = w.finish();
    Ok(SemanticPayload {
        kind: SemanticKind::SegMap,
        bits,
        bit_count,
        source_image,
    })
}

pub fn decode_segmentation_map(payload: &SemanticPayload, bits_per_cell: u32) -> Result<SegmentationGrid, CodecError> {
    let mut r = BitReader::new(&payload.bits, payload.bit_count);
    let width_cells = r.read(16)? as u32;
    let height_cells = r.read(16)? as u32;
    let cells = (0..width_cells as usize * height_cells as usize)
        .map(|_| Ok(r.read(bits_per_cell)? as u32))
        .collect::<Result<_, _>>()?;
    Ok(SegmentationGrid {
        width_cells,
        height_cells,
        cells,
    })
}

/// Size-only stand-in for an externally compressed image.
pub fn compressed_image_payload(bytes: u64, source_image: (u32, u32)) -> SemanticPayload {
    SemanticPayload {
        kind: SemanticKind::CompressedImage,
        bits: vec![0; bytes as usize],
        bit_count: bytes as usize * 8,
        source_image,
    }
}

/// Deterministic seed for synthetic feature values of a scene.
fn image_seed(image_id: &str) -> u64 {
    image_id.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Encodes one kind of a scene. `graph` is the (possibly filtered) graph used
/// by scene-graph kinds.
pub fn encode_semantics(
    kind: SemanticKind,
    scene: &SceneAnnotation,
    graph: &SceneGraph,
    config: &CodecConfig,
) -> Result<SemanticPayload, CodecError> {
    config.validate()?;
    let src = (scene.width, scene.height);
    match kind {
        SemanticKind::SegMap => {
            let (w, h) = config.segmap_grid;
            encode_segmentation_map(
                &SegmentationGrid::rasterize(scene, w, h),
                config.segmap_bits_per_cell,
                src,
            )
        }
        SemanticKind::FeatureMap => {
            let (channels, width, height) = config.featuremap_shape;
            let spec = FeatureMapSpec {
                channels,
                width,
                height,
                quant_bits: config.featuremap_quant_bits,
                values: None,
            }
            .with_synthetic_values(image_seed(&scene.image_id));
            encode_feature_map(&spec, src)
        }
        SemanticKind::CompressedImage => {
            let bytes = config
                .compressed_image_size(scene.width, scene.height)
                .ok_or(CodecError::MissingImageSize)?;
            Ok(compressed_image_payload(bytes, src))
        }
        text => encode_text_semantics(text, scene, graph),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayloadMetrics {
    pub bpp: f64,
    pub compression_rate: f64,
}

/// Bits per pixel and rate relative to 24-bit raw RGB.
pub fn payload_metrics(bit_count: usize, image_width: u32, image_height: u32) -> PayloadMetrics {
    let pixels = image_width as f64 * image_height as f64;
    PayloadMetrics {
        bpp: bit_count as f64 / pixels,
        compression_rate: bit_count as f64 / (RAW_BITS_PER_PIXEL * pixels),
    }
}

/// Serializes sections: `SPAY`, then per section a u8 kind tag, a u32
/// little-endian bit length and the section bits padded to a byte.
pub fn write_container(sections: &[SemanticPayload]) -> Vec<u8> {
    let mut out = CONTAINER_MAGIC.to_vec();
    for s in sections {
        out.push(s.kind.tag());
        out.extend_from_slice(&(s.bit_count as u32).to_le_bytes());
        out.extend_from_slice(&s.bits[..s.bit_count.div_ceil(8)]);
    }
    out
}

pub fn read_container(bytes: &[u8], source_image: (u32, u32)) -> Result<Vec<SemanticPayload>, CodecError> {
    let bad = |m: &str| CodecError::MalformedPayload(m.to_owned());
    if bytes.get(..4) != Some(CONTAINER_MAGIC.as_slice()) {
        return Err(bad("bad container magic"));
    }
    let mut pos = 4;
    let mut out = Vec::new();
    while pos < bytes.len() {
        let header = bytes.get(pos..pos + 5).ok_or_else(|| bad("truncated section header"))?;
        let kind = SemanticKind::from_tag(header[0]).ok_or_else(|| bad("unknown kind tag"))?;
        let bit_count = u32::from_le_bytes(header[1..5].try_into().unwrap()) as usize;
        pos += 5;
        let body = bytes
            .get(pos..pos + bit_count.div_ceil(8))
            .ok_or_else(|| bad("truncated section body"))?;
        pos += body.len();
        out.push(SemanticPayload {
            kind,
            bits: body.to_vec(),
            bit_count,
            source_image,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testutil::{scene, ski};
    use proptest::prelude::*;

    #[test]
    fn objects_text_size() {
        let s = scene(10, 10, &[("man", [0, 0, 1, 1]), ("ski", [0, 0, 1, 1])], &[]);
        let p = encode_text_semantics(SemanticKind::Objects, &s, &s.graph).unwrap();
        assert_eq!(p.bits, b"man\nski\n");
        assert_eq!(p.bit_count, 64);
    }

    #[test]
    fn sentence_text_size() {
        let s = scene(
            10,
            10,
            &[("man", [0, 0, 1, 1]), ("ski", [0, 0, 1, 1])],
            &[(0, "riding", 1)],
        );
        let p = encode_text_semantics(SemanticKind::SceneGraphFull, &s, &s.graph).unwrap();
        assert_eq!(p.bits, b"man riding ski\n");
        assert_eq!(p.bit_count, 120);
    }

    #[test]
    fn empty_graph_is_empty_text() {
        let s = scene(10, 10, &[], &[]);
        for k in SemanticKind::ALL.into_iter().filter(|k| k.is_text()) {
            assert_eq!(encode_text_semantics(k, &s, &s.graph).unwrap().bit_count, 0, "{k}");
        }
    }

    #[test]
    fn renderings() {
        let s = ski();
        let sg = s.graph.with_relations(|i| i < 2);
        assert_eq!(
            render_text(SemanticKind::SceneGraphFiltered, &s, &sg).unwrap(),
            "man riding ski\nman holding pole\nhand\nhead\n"
        );
        let s2 = scene(
            100,
            100,
            &[("man", [1, 2, 30, 40]), ("ski", [0, 90, 50, 5])],
            &[(0, "riding", 1)],
        );
        assert_eq!(
            render_text(SemanticKind::Layouts, &s2, &s2.graph).unwrap(),
            "1,2,30,40\n0,90,50,5\n"
        );
        assert_eq!(
            render_text(SemanticKind::SceneGraphLayouts, &s2, &s2.graph).unwrap(),
            "man riding ski\n\nman 1,2,30,40\nski 0,90,50,5\n"
        );
    }

    #[test]
    fn object_layout_round_trip_on_fixture() {
        let s = ski();
        let p = encode_text_semantics(SemanticKind::ObjectsLayouts, &s, &s.graph).unwrap();
        assert_eq!(
            decode_text_semantics(SemanticKind::ObjectsLayouts, &p).unwrap(),
            expected_text_semantics(SemanticKind::ObjectsLayouts, &s, &s.graph)
        );
        let filtered = s.graph.with_relations(|i| i != 1);
        let p = encode_text_semantics(SemanticKind::SceneGraphLayouts, &s, &filtered).unwrap();
        let d = decode_text_semantics(SemanticKind::SceneGraphLayouts, &p).unwrap();
        assert_eq!(
            d,
            expected_text_semantics(SemanticKind::SceneGraphLayouts, &s, &filtered)
        );
        assert_eq!(d.sentences.len(), 4);
    }

    #[test]
    fn malformed_text() {
        let mk = |t: &str| SemanticPayload {
            kind: SemanticKind::ObjectsLayouts,
            bits: t.as_bytes().to_vec(),
            bit_count: t.len() * 8,
            source_image: (1, 1),
        };
        assert!(matches!(
            decode_text_semantics(SemanticKind::ObjectsLayouts, &mk("man 1,x,3,4\n")),
            Err(CodecError::MalformedPayload(_))
        ));
        assert!(decode_text_semantics(SemanticKind::Layouts, &mk("1,2,3\n")).is_err());
        assert!(decode_text_semantics(SemanticKind::SceneGraphFull, &mk("a b\n")).is_err());
        assert!(decode_text_semantics(SemanticKind::Objects, &mk("man")).is_err());
        assert!(decode_text_semantics(SemanticKind::SceneGraphLayouts, &mk("a b c\n")).is_err());
    }

    #[test]
    fn feature_map_size() {
        let spec = FeatureMapSpec::decodable_default().with_synthetic_values(1);
        let p = encode_feature_map(&spec, (512, 512)).unwrap();
        assert_eq!(p.bit_count, 131_136);
        let m = payload_metrics(p.bit_count, 512, 512);
        assert!((m.compression_rate - 131_136.0 / (24.0 * 512.0 * 512.0)).abs() < 1e-15);
        assert!((m.compression_rate - 0.0208).abs() < 1e-4);
    }

    #[test]
    fn feature_map_constant_and_two_level() {
        let spec = FeatureMapSpec {
            channels: 1,
            width: 2,
            height: 2,
            quant_bits: 8,
            values: Some(vec![0.25; 4]),
        };
        let p = encode_feature_map(&spec, (1, 1)).unwrap();
        let mut r = BitReader::new(&p.bits, p.bit_count);
        r.read(64).unwrap();
        for _ in 0..4 {
            assert_eq!(r.read(8).unwrap(), 0);
        }
        assert_eq!(decode_feature_map(&p, 4, 8).unwrap(), vec![0.25; 4]);

        let vals = vec![0.0, 1.0, 1.0, 0.0, 1.0];
        let spec = FeatureMapSpec {
            channels: 5,
            width: 1,
            height: 1,
            quant_bits: 1,
            values: Some(vals.clone()),
        };
        let p = encode_feature_map(&spec, (1, 1)).unwrap();
        assert_eq!(p.bit_count, 64 + 5);
        assert_eq!(decode_feature_map(&p, 5, 1).unwrap(), vals);
    }

    #[test]
    fn feature_map_errors() {
        let spec = FeatureMapSpec::decodable_default();
        assert_eq!(encode_feature_map(&spec, (1, 1)), Err(CodecError::MissingValues));
        let spec = FeatureMapSpec {
            values: Some(vec![0.0; 3]),
            ..FeatureMapSpec::decodable_default()
        };
        assert!(matches!(
            encode_feature_map(&spec, (1, 1)),
            Err(CodecError::ValueCount { .. })
        ));
        let spec = FeatureMapSpec {
            channels: 1,
            width: 1,
            height: 1,
            quant_bits: 17,
            values: Some(vec![0.0]),
        };
        assert!(matches!(
            encode_feature_map(&spec, (1, 1)),
            Err(CodecError::InvalidConfig(_))
        ));
    }

    #[test]
    fn segmentation_sizes() {
        let g = SegmentationGrid {
            width_cells: 128,
            height_cells: 128,
            cells: vec![3; 128 * 128],
        };
        assert_eq!(encode_segmentation_map(&g, 8, (1, 1)).unwrap().bit_count, 32 + 131_072);
        let g = SegmentationGrid {
            width_cells: 1,
            height_cells: 1,
            cells: vec![7],
        };
        let p = encode_segmentation_map(&g, 8, (1, 1)).unwrap();
        assert_eq!(p.bit_count, 40);
        assert_eq!(decode_segmentation_map(&p, 8).unwrap(), g);
        let g = SegmentationGrid {
            width_cells: 1,
            height_cells: 1,
            cells: vec![300],
        };
        assert!(matches!(
            encode_segmentation_map(&g, 8, (1, 1)),
            Err(CodecError::ClassIdOverflow { class_id: 300, .. })
        ));
    }

    #[test]
    fn metrics_identities() {
        let (w, h) = (640u32, 480u32);
        let bits = (0.18 * (w * h) as f64).round() as usize;
        assert!((payload_metrics(bits, w, h).bpp - 0.18).abs() < 1e-12);
        assert_eq!(payload_metrics(24 * (w * h) as usize, w, h).compression_rate, 1.0);
    }

    #[test]
    fn container_round_trip() {
        let s = ski();
        let a = encode_text_semantics(SemanticKind::Objects, &s, &s.graph).unwrap();
        let b = encode_feature_map(
            &FeatureMapSpec {
                channels: 1,
                width: 1,
                height: 3,
                quant_bits: 3,
                values: Some(vec![0.1, 0.2, 0.3]),
            },
            (512, 512),
        )
        .unwrap();
        let bytes = write_container(&[a.clone(), b.clone()]);
        assert_eq!(bytes.len() * 8, MAGIC_BITS + 2 * SECTION_HEADER_BITS + a.bit_count + 80);
        let back = read_container(&bytes, (512, 512)).unwrap();
        assert_eq!(back[0], a);
        assert_eq!(back[1].bit_count, b.bit_count);
        assert!(read_container(&bytes[..bytes.len() - 1], (1, 1)).is_err());
        assert!(read_container(b"XPAY", (1, 1)).is_err());
    }

    #[test]
    fn compressed_image_needs_size() {
        let s = ski();
        let cfg = CodecConfig::default();
        assert_eq!(
            encode_semantics(SemanticKind::CompressedImage, &s, &s.graph, &cfg),
            Err(CodecError::MissingImageSize)
        );
        let cfg = cfg.with_image_bpp(0.18, 512, 512);
        let p = encode_semantics(SemanticKind::CompressedImage, &s, &s.graph, &cfg).unwrap();
        assert_eq!(p.bit_count, 47_192);
        let per_scene = CodecConfig {
            compressed_image_bpp: Some(0.18),
            ..CodecConfig::default()
        };
        let p = encode_semantics(SemanticKind::CompressedImage, &s, &s.graph, &per_scene).unwrap();
        assert_eq!(p.bit_count, 47_192);
        assert!(CodecConfig {
            compressed_image_bpp: Some(-1.0),
            ..CodecConfig::default()
        }
        .validate()
        .is_err());
    }

    proptest! {
        #[test]
        fn dequantization_error_bounded(
            vals in prop::collection::vec(-4.0f32..4.0, 1..200),
            bits in 1u32..=16,
        ) {
            let n = vals.len() as u32;
            let spec = FeatureMapSpec { channels: 1, width: n, height: 1, quant_bits: bits, values: Some(vals.clone()) };
            let p = encode_feature_map(&spec, (1, 1)).unwrap();
            prop_assert_eq!(p.bit_count, 64 + vals.len() * bits as usize);
            let back = decode_feature_map(&p, vals.len(), bits).unwrap();
            let (lo, hi) = vals.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v as f64), b.max(v as f64)));
            let step = (hi - lo) / ((1u64 << bits) - 1) as f64;
            for (a, b) in vals.iter().zip(back) {
                prop_assert!(((*a as f64) - (b as f64)).abs() <= step / 2.0 + 1e-6);
            }
        }

        #[test]
        fn text_is_ascii_and_metrics_linear(bits in 0usize..1_000_000, k in 1usize..5) {
            let m1 = payload_metrics(bits, 320, 240);
            let mk = payload_metrics(bits * k, 320, 240);
            prop_assert!((mk.bpp - k as f64 * m1.bpp).abs() <= 1e-9 * mk.bpp.max(1.0));
            let s = ski();
            for kind in SemanticKind::ALL.into_iter().filter(|k| k.is_text()) {
                let p = encode_text_semantics(kind, &s, &s.graph).unwrap();
                prop_assert_eq!(p.bit_count % 8, 0);
                prop_assert!(p.bits.iter().all(|b| b.is_ascii()));
            }
        }
    }
}
