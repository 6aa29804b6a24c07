use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use serde::Deserialize;
use unicode_segmentation::UnicodeSegmentation;

use super::EmbeddingError;
use crate::graph::NodeRecord;
use crate::rng::{hash_str, splitmix64};

/// Maps text (and nodes) to fixed-length feature vectors.
pub trait TextEncoder: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn encode(&self, text: &str) -> Vec<f64>;

    fn encode_node(&self, node: &NodeRecord) -> Vec<f64> {
        self.encode(&node.text)
    }
}

/// Signed feature hashing over lowercased Unicode words, L2-normalized.
#[derive(Debug, Clone)]
pub struct HashingEncoder {
    dim: usize,
    name: String,
}

impl HashingEncoder {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "encoder dimension must be positive");
        Self { dim, name: format!("hashing-{dim}") }
    }
}

pub fn encode_text_hashed(text: &str, dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    for word in text.unicode_words() {
        let h = hash_str(&word.to_lowercase());
        let bucket = (h % dim as u64) as usize;
        let sign = if splitmix64(h) >> 63 == 0 { 1.0 } else { -1.0 };
        v[bucket] += sign;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

impl TextEncoder for HashingEncoder {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, text: &str) -> Vec<f64> {
        encode_text_hashed(text, self.dim)
    }
}

/// Node vectors loaded from a file; edge texts and unknown nodes fall back
/// to hashing at the same dimension.
#[derive(Debug, Clone)]
pub struct PrecomputedEncoder {
    vectors: HashMap<String, Vec<f64>>,
    fallback: HashingEncoder,
    name: String,
}

#[derive(Deserialize)]
struct Line {
    node_id: String,
    vector: Vec<f64>,
}

impl PrecomputedEncoder {
    pub fn from_map(vectors: HashMap<String, Vec<f64>>, name: impl Into<String>) -> Result<Self, EmbeddingError> {
        let mut dims = vectors.values().map(Vec::len);
        let dim = dims.next().ok_or_else(|| EmbeddingError::Encoder("no vectors".into()))?;
        if dim == 0 || dims.any(|d| d != dim) {
            return Err(EmbeddingError::Encoder("vectors must share one positive length".into()));
        }
        Ok(Self { vectors, fallback: HashingEncoder::new(dim), name: name.into() })
    }

    /// Line-delimited JSON: `{"node_id": ..., "vector": [...]}`.
    pub fn from_jsonl(path: &Path) -> Result<Self, EmbeddingError> {
        let file =
            std::fs::File::open(path).map_err(|e| EmbeddingError::Encoder(format!("{}: {e}", path.display())))?;
        let mut vectors = HashMap::new();
        for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| EmbeddingError::Encoder(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Line = serde_json::from_str(&line)
                .map_err(|e| EmbeddingError::Encoder(format!("{} line {}: {e}", path.display(), i + 1)))?;
            if rec.vector.iter().any(|x| !x.is_finite()) {
                return Err(EmbeddingError::Encoder(format!("line {}: non-finite value", i + 1)));
            }
            vectors.insert(rec.node_id, rec.vector);
        }
        Self::from_map(vectors, format!("precomputed:{}", path.display()))
    }
}

impl TextEncoder for PrecomputedEncoder {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.fallback.dim()
    }

    fn encode(&self, text: &str) -> Vec<f64> {
        self.fallback.encode(text)
    }

    fn encode_node(&self, node: &NodeRecord) -> Vec<f64> {
        match self.vectors.get(&node.node_id) {
            Some(v) => v.clone(),
            None => self.fallback.encode(&node.text),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Role;

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn basics() {
        assert_eq!(encode_text_hashed("", 16), vec![0.0; 16]);
        assert_eq!(encode_text_hashed("  ,.; ", 16), vec![0.0; 16]);
        let a = encode_text_hashed("night cream", 256);
        assert_eq!(a, encode_text_hashed("Night  CREAM!", 256));
        assert!((cosine(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pinned_buckets() {
        // guards against accidental changes to tokenization or hashing
        let v = encode_text_hashed("night cream", 256);
        let nz: Vec<usize> = v.iter().enumerate().filter(|(_, x)| **x != 0.0).map(|(i, _)| i).collect();
        let expect: Vec<usize> = {
            let mut b: Vec<usize> = ["night", "cream"].iter().map(|w| (hash_str(w) % 256) as usize).collect();
            b.sort();
            b.dedup();
            b
        };
        assert_eq!(nz, expect);
    }

    #[test]
    fn disjoint_vocabularies_are_nearly_orthogonal() {
        use rand::Rng;
        let mut rng = crate::rng::substream(1, "corpus", &[]);
        let mut vocab: Vec<String> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        while vocab.len() < 5000 {
            let len = rng.random_range(3..10);
            let w: String = (0..len).map(|_| rng.random_range(b'a'..=b'z') as char).collect();
            if seen.insert(w.clone()) {
                vocab.push(w);
            }
        }
        let mut worst: f64 = 0.0;
        let mut total = 0.0;
        for p in 0..100 {
            let a = vocab[p * 50..p * 50 + 25].join(" ");
            let b = vocab[p * 50 + 25..p * 50 + 50].join(" ");
            let c = cosine(&encode_text_hashed(&a, 256), &encode_text_hashed(&b, 256)).abs();
            worst = worst.max(c);
            total += c;
        }
        assert!(worst < 0.2, "{worst}");
        assert!(total / 100.0 < 0.1, "{}", total / 100.0);
    }

    #[test]
    fn precomputed_lookup_and_fallback() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("emb.jsonl");
        std::fs::write(&p, "{\"node_id\":\"a\",\"vector\":[1,0,0]}\n{\"node_id\":\"b\",\"vector\":[0,1,0]}\n").unwrap();
        let enc = PrecomputedEncoder::from_jsonl(&p).unwrap();
        assert_eq!(enc.dim(), 3);
        assert_eq!(enc.encode_node(&NodeRecord::new("a", Role::Both, "x")), vec![1.0, 0.0, 0.0]);
        assert_eq!(enc.encode_node(&NodeRecord::new("z", Role::Both, "x")), encode_text_hashed("x", 3));

        std::fs::write(&p, "{\"node_id\":\"a\",\"vector\":[1,0,0]}\n{\"node_id\":\"b\",\"vector\":[0,1]}\n").unwrap();
        assert!(PrecomputedEncoder::from_jsonl(&p).is_err());
    }
}
