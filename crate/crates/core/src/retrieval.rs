//! Alternative repo-context retrieval: Okapi BM25 over whole files and
//! RandomNN over randomly sampled line chunks.

use std::collections::HashMap;

use rand::seq::index::sample as sample_indices;

use crate::hole_gen::{delimiter_tokenize, TargetHole};
use crate::repo_model::RepoIndex;
use crate::util::{fnv1a, rng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.5, b: 0.75 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredFile {
    pub rel_path: String,
    pub score: f64,
}

/// Delimiter tokens of every line of `text`.
pub fn text_tokens(text: &str) -> Vec<&str> {
    text.lines()
        .flat_map(|l| delimiter_tokenize(l).into_iter().map(|(t, _)| t))
        .collect()
}

#[derive(Debug, Clone)]
struct Doc {
    path: String,
    tf: HashMap<String, usize>,
    len: usize,
}

/// Term statistics over all files of one repository. Ranking for a hole
/// leaves the hole's own file out of the document set, including its
/// contribution to document frequencies and the average length.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    docs: Vec<Doc>,
    df: HashMap<String, usize>,
    total_len: usize,
}

impl Bm25Index {
    pub fn new(index: &RepoIndex) -> Self {
        Self::from_docs(
            index
                .files
                .iter()
                .map(|(p, f)| (p.as_str(), f.source.content.as_str())),
        )
    }

    /// Builds from `(name, text)` pairs.
    pub fn from_docs<'a>(docs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let mut out = Bm25Index {
            docs: Vec::new(),
            df: HashMap::new(),
            total_len: 0,
        };
        for (path, text) in docs {
            let toks = text_tokens(text);
            let mut tf: HashMap<String, usize> = HashMap::new();
            for t in &toks {
                *tf.entry((*t).to_string()).or_default() += 1;
            }
            for t in tf.keys() {
                *out.df.entry(t.clone()).or_default() += 1;
            }
            out.total_len += toks.len();
            out.docs.push(Doc {
                path: path.to_string(),
                tf,
                len: toks.len(),
            });
        }
        out
    }

    /// Scores every document except `exclude` against the query tokens
    /// (counted with multiplicity). Descending score, ties by path.
    pub fn rank(
        &self,
        query: &[&str],
        exclude: Option<&str>,
        params: Bm25Params,
    ) -> Vec<ScoredFile> {
        let excluded = exclude.and_then(|p| self.docs.iter().find(|d| d.path == p));
        let n = self.docs.len() - usize::from(excluded.is_some());
        let total_len = self.total_len - excluded.map_or(0, |d| d.len);
        let avgdl = if n == 0 {
            0.0
        } else {
            total_len as f64 / n as f64
        };

        let idf = |term: &str| -> f64 {
            let mut df = self.df.get(term).copied().unwrap_or(0);
            if excluded.is_some_and(|d| d.tf.contains_key(term)) {
                df -= 1;
            }
            okapi_idf(n, df)
        };
        let idfs: Vec<f64> = query.iter().map(|q| idf(q)).collect();

        let mut out: Vec<ScoredFile> = self
            .docs
            .iter()
            .filter(|d| Some(d.path.as_str()) != exclude)
            .map(|d| {
                let norm = if avgdl > 0.0 {
                    params.k1 * (1.0 - params.b + params.b * d.len as f64 / avgdl)
                } else {
                    params.k1
                };
                let score = query
                    .iter()
                    .zip(&idfs)
                    .map(|(q, idf)| {
                        let tf = d.tf.get(*q).copied().unwrap_or(0) as f64;
                        if tf == 0.0 {
                            0.0
                        } else {
                            idf * tf * (params.k1 + 1.0) / (tf + norm)
                        }
                    })
                    .sum();
                ScoredFile {
                    rel_path: d.path.clone(),
                    score,
                }
            })
            .collect();
        out.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.rel_path.cmp(&b.rel_path))
        });
        out
    }
}

/// `ln((N − n + 0.5) / (n + 0.5) + 1)`; never negative.
pub fn okapi_idf(n_docs: usize, doc_freq: usize) -> f64 {
    let (n, df) = (n_docs as f64, doc_freq as f64);
    ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
}

/// BM25 ranking of the repository's other files against the hole's
/// surrounding context.
pub fn bm25_rank(hole: &TargetHole, index: &RepoIndex, params: Bm25Params) -> Vec<ScoredFile> {
    let bm = Bm25Index::new(index);
    bm.rank(
        &text_tokens(&hole.surrounding_context),
        Some(&hole.rel_path),
        params,
    )
}

/// Text → fixed-dimension vector.
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Vec<f64>;
}

/// Hashed bag of delimiter tokens, L2-normalised.
#[derive(Debug, Clone, Copy)]
pub struct HashedBagEmbedder {
    pub dim: usize,
}

impl Default for HashedBagEmbedder {
    fn default() -> Self {
        Self { dim: 1024 }
    }
}

impl Embedder for HashedBagEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        embed_bag(text, self.dim)
    }
}

pub fn embed_bag(text: &str, dim: usize) -> Vec<f64> {
    assert!(dim >= 1, "embedding dimension must be positive");
    let mut v = vec![0.0; dim];
    for t in text_tokens(text) {
        v[(fnv1a(t.as_bytes()) % dim as u64) as usize] += 1.0;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    pub rel_path: String,
    pub line_start: usize,
    /// Exclusive.
    pub line_end: usize,
    pub text: String,
}

#[derive(Debug, Clone, Copy)]
pub struct RandomNnParams {
    pub chunk_lines: usize,
    pub n_candidates: usize,
    pub k: usize,
    pub seed: u64,
}

impl Default for RandomNnParams {
    fn default() -> Self {
        Self {
            chunk_lines: 10,
            n_candidates: 512,
            k: 32,
            seed: 0,
        }
    }
}

/// Consecutive `chunk_lines`-line windows of every file except `exclude`.
pub fn repo_chunks(index: &RepoIndex, chunk_lines: usize, exclude: Option<&str>) -> Vec<Chunk> {
    let chunk_lines = chunk_lines.max(1);
    let mut out = Vec::new();
    for (path, f) in &index.files {
        if Some(path.as_str()) == exclude {
            continue;
        }
        let src = &f.source;
        let mut start = 0;
        while start < src.line_count() {
            let end = (start + chunk_lines).min(src.line_count());
            let text = src.content[src.line_spans[start].start..src.line_text_span(end - 1).end]
                .to_string();
            out.push(Chunk {
                rel_path: path.clone(),
                line_start: start,
                line_end: end,
                text,
            });
            start = end;
        }
    }
    out
}

/// Top-`k` of `n_candidates` uniformly sampled chunks by cosine similarity
/// to the hole's surrounding context. Fewer than `k` chunks → all, ranked.
pub fn random_nn(
    hole: &TargetHole,
    index: &RepoIndex,
    params: RandomNnParams,
    embedder: &dyn Embedder,
) -> Vec<Chunk> {
    let chunks = repo_chunks(index, params.chunk_lines, Some(&hole.rel_path));
    let take = params.n_candidates.min(chunks.len());
    let mut picked = sample_indices(&mut rng(params.seed), chunks.len(), take).into_vec();
    picked.sort_unstable();

    let query = embedder.embed(&hole.surrounding_context);
    let mut scored: Vec<(f64, &Chunk)> = picked
        .into_iter()
        .map(|i| (cosine(&query, &embedder.embed(&chunks[i].text)), &chunks[i]))
        .collect();
    scored.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| a.1.rel_path.cmp(&b.1.rel_path))
            .then_with(|| a.1.line_start.cmp(&b.1.line_start))
    });
    scored
        .into_iter()
        .take(params.k)
        .map(|(_, c)| c.clone())
        .collect()
}
