//! Turns ranked contexts into exactly N repo contexts of at most `l`
//! tokens each.
//!
//! Four strategies:
//!
//! * `t_rank`: the i-th non-empty context, truncated to `l` tokens, fills slot i.
//! * `t_rand`: `t_rank`, then the slots are shuffled.
//! * `nt_rank`: contexts are cut into `⌈L/l⌉` chunks and emitted whole, in
//!   rank order, until N slots are filled.
//! * `nt_prior_last`: `nt_rank` over everything but the prior context,
//!   whose chunks always take the final slots.
//!
//! Unused slots are padded so every example has exactly N repo contexts.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hole_gen::delimiter_tokenize;
use crate::prompt_proposals::{Ppc, PRIOR_NAME};
use crate::util::{derive_seed, rng};

pub const PAD_NAME: &str = "pad";
pub const DEFAULT_N_CONTEXTS: usize = 32;
pub const DEFAULT_CONTEXT_LEN: usize = 768;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    TRank,
    TRand,
    NtRank,
    NtPriorLast,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::TRank => "t-rank",
            Strategy::TRand => "t-rand",
            Strategy::NtRank => "nt-rank",
            Strategy::NtPriorLast => "nt-prior-last",
        }
    }

    fn truncates(self) -> bool {
        matches!(self, Strategy::TRank | Strategy::TRand)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "t-rank" => Ok(Strategy::TRank),
            "t-rand" => Ok(Strategy::TRand),
            "nt-rank" => Ok(Strategy::NtRank),
            "nt-prior-last" => Ok(Strategy::NtPriorLast),
            _ => Err(Error::Config(format!("unknown packing strategy `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackingConfig {
    pub strategy: Strategy,
    pub n_contexts: usize,
    /// Chunk budget in tokens. The name and surrounding-context segments
    /// are not counted.
    pub context_len: usize,
    pub include_surrounding: bool,
    /// Fill every slot from this one context.
    pub repeat_single: Option<String>,
    pub seed: u64,
}

impl Default for PackingConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::NtPriorLast,
            n_contexts: DEFAULT_N_CONTEXTS,
            context_len: DEFAULT_CONTEXT_LEN,
            include_surrounding: true,
            repeat_single: None,
            seed: 0,
        }
    }
}

impl PackingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_contexts == 0 || self.context_len == 0 {
            return Err(Error::Config(
                "n_contexts and context_len must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A named candidate context, in rank order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedContext {
    pub name: String,
    pub text: String,
}

impl RankedContext {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            text: text.into(),
        }
    }
}

impl From<Ppc> for RankedContext {
    fn from(p: Ppc) -> Self {
        Self {
            name: p.name(),
            text: p.text,
        }
    }
}

impl From<&Ppc> for RankedContext {
    fn from(p: &Ppc) -> Self {
        Self {
            name: p.name(),
            text: p.text.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoContext {
    pub slot_index: usize,
    pub ppc_name: String,
    pub chunk_text: String,
    pub formatted_text: String,
    pub chunk_token_count: usize,
}

impl RepoContext {
    pub fn is_pad(&self) -> bool {
        self.ppc_name == PAD_NAME
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackedExample {
    pub hole_id: String,
    pub target: String,
    pub surrounding: String,
    pub rcs: Vec<RepoContext>,
}

/// Byte offsets at which tokens start: delimiter tokens of every line plus
/// one token per `\n`.
pub fn token_starts(text: &str) -> Vec<usize> {
    let mut out = Vec::new();
    let mut line_start = 0;
    for line in text.split('\n') {
        out.extend(
            delimiter_tokenize(line)
                .into_iter()
                .map(|(_, o)| line_start + o),
        );
        let nl = line_start + line.len();
        if nl < text.len() {
            out.push(nl);
        }
        line_start = nl + 1;
    }
    out
}

pub fn count_tokens(text: &str) -> usize {
    token_starts(text).len()
}

/// Splits `text` at token boundaries into chunks of exactly `l` tokens,
/// except possibly the last. Chunks concatenate back to `text`.
pub fn chunk_ppc(text: &str, l: usize) -> Vec<String> {
    assert!(l >= 1, "chunk length must be positive");
    let starts = token_starts(text);
    if starts.is_empty() {
        return Vec::new();
    }
    let n_chunks = starts.len().div_ceil(l);
    (0..n_chunks)
        .map(|i| {
            let from = if i == 0 { 0 } else { starts[i * l] };
            let to = starts.get((i + 1) * l).copied().unwrap_or(text.len());
            text[from..to].to_string()
        })
        .collect()
}

/// The first `l` tokens of `text`.
pub fn truncate_tokens(text: &str, l: usize) -> String {
    let starts = token_starts(text);
    match starts.get(l) {
        Some(&cut) => text[..cut].to_string(),
        None => text.to_string(),
    }
}

pub fn format_rc(
    ppc_name: &str,
    chunk: &str,
    surrounding: &str,
    include_surrounding: bool,
) -> String {
    if include_surrounding {
        format!("rule_name: {ppc_name}\nrule_context: {chunk}\nhole_context: {surrounding}")
    } else {
        format!("rule_name: {ppc_name}\nrule_context: {chunk}")
    }
}

/// Recovers `(ppc_name, chunk)` from a formatted repo context, given the
/// surrounding context it was formatted with.
pub fn parse_rc<'a>(formatted: &'a str, surrounding: &str) -> Option<(&'a str, &'a str)> {
    let rest = formatted.strip_prefix("rule_name: ")?;
    let (name, rest) = rest.split_once('\n')?;
    let rest = rest.strip_prefix("rule_context: ")?;
    let suffix = format!("\nhole_context: {surrounding}");
    let chunk = rest.strip_suffix(suffix.as_str()).unwrap_or(rest);
    Some((name, chunk))
}

struct Piece {
    name: String,
    chunk: String,
}

impl Piece {
    fn pad() -> Self {
        Self {
            name: PAD_NAME.into(),
            chunk: String::new(),
        }
    }
}

/// Every chunk of each context in order, stopping once `limit` are taken.
fn chunks_in_order<'a>(
    contexts: impl IntoIterator<Item = &'a RankedContext>,
    l: usize,
    limit: usize,
) -> Vec<Piece> {
    let mut out = Vec::new();
    for c in contexts {
        for chunk in chunk_ppc(&c.text, l) {
            if out.len() == limit {
                return out;
            }
            out.push(Piece {
                name: c.name.clone(),
                chunk,
            });
        }
    }
    out
}

/// Packs ranked contexts for one hole.
pub fn pack(
    hole_id: &str,
    target: &str,
    surrounding: &str,
    contexts: &[RankedContext],
    config: &PackingConfig,
) -> Result<PackedExample> {
    config.validate()?;
    let n = config.n_contexts;
    let l = config.context_len;

    let mut pieces: Vec<Piece> = if let Some(name) = &config.repeat_single {
        let ctx = contexts
            .iter()
            .find(|c| &c.name == name)
            .ok_or_else(|| Error::UnknownProposals(vec![name.clone()]))?;
        let chunks = if config.strategy.truncates() {
            vec![truncate_tokens(&ctx.text, l)]
        } else {
            chunk_ppc(&ctx.text, l)
        };
        let chunks = if chunks.is_empty() {
            vec![String::new()]
        } else {
            chunks
        };
        chunks
            .iter()
            .cycle()
            .take(n)
            .map(|c| Piece {
                name: ctx.name.clone(),
                chunk: c.clone(),
            })
            .collect()
    } else {
        match config.strategy {
            Strategy::TRank | Strategy::TRand => contexts
                .iter()
                .filter(|c| count_tokens(&c.text) > 0)
                .take(n)
                .map(|c| Piece {
                    name: c.name.clone(),
                    chunk: truncate_tokens(&c.text, l),
                })
                .collect(),
            Strategy::NtRank => chunks_in_order(contexts, l, n),
            Strategy::NtPriorLast => {
                let prior = contexts.iter().find(|c| c.name == PRIOR_NAME);
                let mut prior_chunks = prior.map(|p| chunk_ppc(&p.text, l)).unwrap_or_default();
                if prior_chunks.len() > n {
                    // keep the chunks closest to the hole
                    prior_chunks.drain(..prior_chunks.len() - n);
                }
                let reserved = prior_chunks.len();
                let mut out = chunks_in_order(
                    contexts.iter().filter(|c| c.name != PRIOR_NAME),
                    l,
                    n - reserved,
                );
                out.resize_with(n - reserved, Piece::pad);
                out.extend(prior_chunks.into_iter().map(|chunk| Piece {
                    name: PRIOR_NAME.into(),
                    chunk,
                }));
                out
            }
        }
    };
    pieces.resize_with(n, Piece::pad);

    if config.strategy == Strategy::TRand && config.repeat_single.is_none() {
        pieces.shuffle(&mut rng(derive_seed(config.seed, hole_id)));
    }

    let rcs = pieces
        .into_iter()
        .enumerate()
        .map(|(slot_index, p)| RepoContext {
            slot_index,
            formatted_text: format_rc(&p.name, &p.chunk, surrounding, config.include_surrounding),
            chunk_token_count: count_tokens(&p.chunk),
            ppc_name: p.name,
            chunk_text: p.chunk,
        })
        .collect();
    Ok(PackedExample {
        hole_id: hole_id.to_string(),
        target: target.to_string(),
        surrounding: surrounding.to_string(),
        rcs,
    })
}
