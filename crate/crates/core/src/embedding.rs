//! Unit-norm sentence embeddings behind one interface.
//!
//! Three backends: a seeded bag-of-tokens hash embedder (no model needed), a
//! lookup table loaded from a binary embeddings file, and an HTTP client for an
//! external embedding service.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_DIM: usize = 384;
const FILE_MAGIC: &[u8; 4] = b"SEMB";
const FILE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("no embedding for sentence {0:?}")]
    MissingEmbedding(String),
    #[error("embedding service returned {status}: {body}")]
    ServiceError { status: u16, body: String },
    #[error("embedding service timed out")]
    Timeout,
    #[error("empty sentence at index {0}")]
    EmptySentence(usize),
    #[error("invalid embedder configuration: {0}")]
    InvalidConfig(String),
    #[error("embedding file {path}: {message}")]
    File { path: PathBuf, message: String },
}

/// A unit-norm embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// Normalizes `components` to unit length. Returns `None` for a zero vector.
    pub fn normalized(components: Vec<f64>) -> Option<Self> {
        let norm = components.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return None;
        }
        Some(Self(components.into_iter().map(|x| x / norm).collect()))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &EmbeddingVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Backend {
    Hash,
    File,
    Remote,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedderConfig {
    pub backend: Backend,
    pub dim: usize,
    pub seed: u64,
    pub path: Option<PathBuf>,
    pub endpoint_url: Option<String>,
    pub timeout_ms: u64,
    pub max_retries: u32,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            backend: Backend::Hash,
            dim: DEFAULT_DIM,
            seed: 0,
            path: None,
            endpoint_url: None,
            timeout_ms: 10_000,
            max_retries: 2,
        }
    }
}

/// Maps sentences to unit-norm vectors, aligned by index.
pub trait Embedder: Send + Sync {
    fn embed(&self, sentences: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError>;
}

fn check_sentences(sentences: &[String]) -> Result<(), EmbedError> {
    match sentences.iter().position(|s| s.trim().is_empty()) {
        Some(i) => Err(EmbedError::EmptySentence(i)),
        None => Ok(()),
    }
}

/// Builds the backend selected by `config`.
pub fn from_config(config: &EmbedderConfig) -> Result<Box<dyn Embedder>, EmbedError> {
    if config.dim < 2 {
        return Err(EmbedError::InvalidConfig(format!(
            "dim must be >= 2, got {}",
            config.dim
        )));
    }
    if config.timeout_ms == 0 {
        return Err(EmbedError::InvalidConfig("timeout_ms must be positive".into()));
    }
    Ok(match config.backend {
        Backend::Hash => Box::new(HashEmbedder::new(config.dim, config.seed)),
        Backend::File => {
            let path = config
                .path
                .as_deref()
                .ok_or_else(|| EmbedError::InvalidConfig("file backend needs a path".into()))?;
            Box::new(FileEmbedder::load(path)?)
        }
        Backend::Remote => {
            let url = config
                .endpoint_url
                .clone()
                .ok_or_else(|| EmbedError::InvalidConfig("remote backend needs an endpoint".into()))?;
            Box::new(RemoteEmbedder::new(url, config.timeout_ms, config.max_retries))
        }
    })
}

/// 64-bit FNV-1a.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Seeded bag-of-tokens embedder. Each whitespace token maps to a Gaussian
/// direction drawn from a generator keyed on `(seed, token)`; a sentence is
/// the normalized sum of its token directions, summed in sorted token order.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
    seed: u64,
}

impl HashEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self { dim, seed }
    }

    fn token_direction(&self, token: &str) -> Vec<f64> {
        let key = fnv1a(token.as_bytes()) ^ self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    pub fn embed_one(&self, sentence: &str) -> EmbeddingVector {
        let mut tokens: Vec<&str> = sentence.split_whitespace().collect();
        tokens.sort_unstable();
        let mut acc = vec![0.0; self.dim];
        for t in tokens {
            for (a, d) in acc.iter_mut().zip(self.token_direction(t)) {
                *a += d;
            }
        }
        EmbeddingVector::normalized(acc).unwrap_or_else(|| {
            let mut e = vec![0.0; self.dim];
            e[0] = 1.0;
            EmbeddingVector(e)
        })
    }
}

impl Embedder for HashEmbedder {
    fn embed(&self, sentences: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        check_sentences(sentences)?;
        Ok(sentences.iter().map(|s| self.embed_one(s)).collect())
    }
}

/// Lookup of precomputed vectors.
#[derive(Debug, Clone, Default)]
pub struct FileEmbedder {
    dim: usize,
    table: HashMap<String, EmbeddingVector>,
}

impl FileEmbedder {
    pub fn from_table(dim: usize, entries: impl IntoIterator<Item = (String, Vec<f64>)>) -> Result<Self, EmbedError> {
        let mut table = HashMap::new();
        for (sentence, v) in entries {
            if v.len() != dim {
                return Err(EmbedError::InvalidConfig(format!(
                    "vector for {sentence:?} has {} components, expected {dim}",
                    v.len()
                )));
            }
            let v = EmbeddingVector::normalized(v)
                .ok_or_else(|| EmbedError::InvalidConfig(format!("zero vector for {sentence:?}")))?;
            table.insert(sentence, v);
        }
        Ok(Self { dim, table })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Reads an embeddings file: magic `SEMB`, u32 version, u32 dim, then
    /// records of (u32 length, UTF-8 sentence, dim × f32), little-endian.
    pub fn load(path: &Path) -> Result<Self, EmbedError> {
        let err = |message: String| EmbedError::File {
            path: path.into(),
            message,
        };
        let bytes = fs::read(path).map_err(|e| err(e.to_string()))?;
        let mut cur = Cursor { bytes: &bytes, pos: 0 };
        let mut take = |n: usize| cur.take(n).ok_or_else(|| err("truncated file".into()));
        if take(4)? != FILE_MAGIC {
            return Err(err("bad magic".into()));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if version != FILE_VERSION {
            return Err(err(format!("unsupported version {version}")));
        }
        let dim = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let mut entries = Vec::new();
        while cur.pos < bytes.len() {
            let mut take = |n: usize| cur.take(n).ok_or_else(|| err("truncated file".into()));
            let n = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
            let sentence = String::from_utf8(take(n)?.to_vec()).map_err(|e| err(e.to_string()))?;
            let raw = take(4 * dim)?;
            let v = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect();
            entries.push((sentence, v));
        }
        Self::from_table(dim, entries).map_err(|e| err(e.to_string()))
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.bytes.get(self.pos..self.pos.checked_add(n)?)?;
        self.pos += n;
        Some(s)
    }
}

/// Writes an embeddings file readable by [`FileEmbedder::load`].
pub fn write_embedding_file(path: &Path, dim: usize, entries: &[(String, Vec<f64>)]) -> std::io::Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(FILE_MAGIC);
    out.extend_from_slice(&FILE_VERSION.to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for (sentence, v) in entries {
        assert_eq!(v.len(), dim, "vector length must equal dim");
        out.extend_from_slice(&(sentence.len() as u32).to_le_bytes());
        out.extend_from_slice(sentence.as_bytes());
        for x in v {
            out.extend_from_slice(&(*x as f32).to_le_bytes());
        }
    }
    fs::write(path, out)
}

impl Embedder for FileEmbedder {
    fn embed(&self, sentences: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        check_sentences(sentences)?;
        sentences
            .iter()
            .map(|s| {
                self.table
                    .get(s)
                    .cloned()
                    .ok_or_else(|| EmbedError::MissingEmbedding(s.clone()))
            })
            .collect()
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

/// Client for `POST {"texts": [..]}` → `{"vectors": [[..]]}`.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    agent: ureq::Agent,
    url: String,
    max_retries: u32,
}

impl RemoteEmbedder {
    pub fn new(url: String, timeout_ms: u64, max_retries: u32) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            url,
            max_retries,
        }
    }

    fn attempt(&self, sentences: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let transport = |e: ureq::Error| match e {
            ureq::Error::Timeout(_) => EmbedError::Timeout,
            other => EmbedError::ServiceError {
                status: 0,
                body: other.to_string(),
            },
        };
        let mut resp = self
            .agent
            .post(&self.url)
            .send_json(EmbedRequest { texts: sentences })
            .map_err(transport)?;
        let status = resp.status().as_u16();
        if status != 200 {
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(EmbedError::ServiceError {
                status,
                body: excerpt(&body),
            });
        }
        let parsed: EmbedResponse = resp.body_mut().read_json().map_err(|e| match e {
            ureq::Error::Timeout(_) => EmbedError::Timeout,
            other => EmbedError::ServiceError {
                status,
                body: excerpt(&other.to_string()),
            },
        })?;
        if parsed.vectors.len() != sentences.len() {
            return Err(EmbedError::ServiceError {
                status,
                body: format!("expected {} vectors, got {}", sentences.len(), parsed.vectors.len()),
            });
        }
        parsed
            .vectors
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                EmbeddingVector::normalized(v).ok_or_else(|| EmbedError::ServiceError {
                    status,
                    body: format!("zero vector at index {i}"),
                })
            })
            .collect()
    }
}

fn excerpt(body: &str) -> String {
    body.chars().take(200).collect()
}

impl Embedder for RemoteEmbedder {
    fn embed(&self, sentences: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        check_sentences(sentences)?;
        if sentences.is_empty() {
            return Ok(Vec::new());
        }
        let mut last = None;
        for _ in 0..=self.max_retries {
            match self.attempt(sentences) {
                Ok(v) => return Ok(v),
                Err(e) => last = Some(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    fn s(x: &str) -> String {
        x.to_string()
    }

    #[test]
    fn hash_is_deterministic_and_unit() {
        let e = HashEmbedder::new(4, 7);
        let v = e.embed(&[s("man riding ski"), s("man riding ski")]).unwrap();
        assert_eq!(v[0], v[1]);
        assert!((v[0].norm() - 1.0).abs() < 1e-6);
        assert_eq!(v[0].dim(), 4);
        assert_ne!(HashEmbedder::new(4, 8).embed_one("man riding ski"), v[0]);
    }

    #[test]
    fn hash_is_order_insensitive() {
        let e = HashEmbedder::new(64, 1);
        assert_eq!(e.embed_one("man riding ski"), e.embed_one("ski man riding"));
    }

    #[test]
    fn hash_disjoint_tokens_nearly_orthogonal() {
        let e = HashEmbedder::new(64, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut word = |prefix: char| format!("{prefix}{}", rng.random::<u64>());
        let mut large = 0;
        for _ in 0..1000 {
            let a = format!("{} {} {}", word('a'), word('a'), word('a'));
            let b = format!("{} {} {}", word('b'), word('b'), word('b'));
            if e.embed_one(&a).dot(&e.embed_one(&b)).abs() >= 0.5 {
                large += 1;
            }
        }
        assert!(large <= 10, "{large} of 1000 pairs had |cos| >= 0.5");
    }

    #[test]
    fn empty_sentence_rejected() {
        assert!(matches!(
            HashEmbedder::new(8, 0).embed(&[s("a"), s("  ")]),
            Err(EmbedError::EmptySentence(1))
        ));
    }

    #[test]
    fn config_validation() {
        let cfg = EmbedderConfig {
            dim: 1,
            ..Default::default()
        };
        assert!(matches!(from_config(&cfg), Err(EmbedError::InvalidConfig(_))));
        let cfg = EmbedderConfig {
            timeout_ms: 0,
            ..Default::default()
        };
        assert!(matches!(from_config(&cfg), Err(EmbedError::InvalidConfig(_))));
        let cfg = EmbedderConfig {
            backend: Backend::File,
            ..Default::default()
        };
        assert!(matches!(from_config(&cfg), Err(EmbedError::InvalidConfig(_))));
    }

    #[test]
    fn file_backend_lookup_and_missing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.semb");
        write_embedding_file(&path, 3, &[(s("man riding ski"), vec![3.0, 0.0, 4.0])]).unwrap();
        let cfg = EmbedderConfig {
            backend: Backend::File,
            path: Some(path),
            ..Default::default()
        };
        let e = from_config(&cfg).unwrap();
        let v = e.embed(&[s("man riding ski")]).unwrap();
        assert!((v[0].components()[0] - 0.6).abs() < 1e-6);
        assert!((v[0].components()[2] - 0.8).abs() < 1e-6);
        match e.embed(&[s("cat wearing hat")]) {
            Err(EmbedError::MissingEmbedding(x)) => assert_eq!(x, "cat wearing hat"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn file_backend_rejects_truncated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.semb");
        write_embedding_file(&path, 3, &[(s("a b c"), vec![1.0, 0.0, 0.0])]).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 2]).unwrap();
        assert!(matches!(FileEmbedder::load(&path), Err(EmbedError::File { .. })));
    }

    /// Minimal HTTP/1.1 server answering each request with the next scripted
    /// response; status 200 responses echo one vector per requested text.
    fn serve(script: Vec<u16>) -> (String, Arc<AtomicUsize>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/embed", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let counter = hits.clone();
        std::thread::spawn(move || {
            for (i, stream) in listener.incoming().enumerate() {
                let mut stream = stream.unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut body = vec![0; len];
                reader.read_exact(&mut body).unwrap();
                counter.fetch_add(1, Ordering::SeqCst);
                let status = script.get(i).copied().unwrap_or(200);
                let reply = if status == 200 {
                    let req: serde_json::Value = serde_json::from_slice(&body).unwrap();
                    let texts = req["texts"].as_array().unwrap();
                    let vectors: Vec<Vec<f64>> = texts
                        .iter()
                        .enumerate()
                        .map(|(k, _)| (0..4).map(|d| if d == k % 4 { 2.0 } else { 0.0 }).collect())
                        .collect();
                    serde_json::json!({ "vectors": vectors }).to_string()
                } else {
                    "overloaded".to_string()
                };
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                    reply.len()
                );
            }
        });
        (url, hits)
    }

    #[test]
    fn remote_success_preserves_order() {
        let (url, _) = serve(vec![200]);
        let e = RemoteEmbedder::new(url, 5_000, 0);
        let v = e.embed(&[s("a b c"), s("d e f")]).unwrap();
        assert_eq!(v[0].components(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(v[1].components(), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn remote_retries_then_succeeds() {
        let (url, hits) = serve(vec![503, 200]);
        let e = RemoteEmbedder::new(url, 5_000, 2);
        assert_eq!(e.embed(&[s("x y z")]).unwrap().len(), 1);
        assert_eq!(hits.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn remote_reports_status_after_retries() {
        let (url, hits) = serve(vec![500, 500, 500]);
        let e = RemoteEmbedder::new(url, 5_000, 2);
        match e.embed(&[s("x y z")]) {
            Err(EmbedError::ServiceError { status, body }) => {
                assert_eq!(status, 500);
                assert_eq!(body, "overloaded");
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(hits.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn remote_timeout() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/embed", listener.local_addr().unwrap());
        std::thread::spawn(move || {
            let _held: Vec<_> = listener.incoming().take(1).collect();
            std::thread::sleep(Duration::from_secs(3));
        });
        let e = RemoteEmbedder::new(url, 200, 0);
        assert!(matches!(e.embed(&[s("x y z")]), Err(EmbedError::Timeout)));
    }
}
