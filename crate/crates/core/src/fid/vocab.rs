use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::hole_gen::delimiter_tokenize;

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
pub const NEWLINE: u32 = 3;
pub const UNK: u32 = 4;
pub const N_SPECIALS: usize = 5;

const SPECIAL_NAMES: [&str; N_SPECIALS] = ["<pad>", "<bos>", "<eos>", "\n", "<unk>"];

/// Lossless tokenization for the model: delimiter tokens, the whitespace
/// runs between them, and `\n`. Concatenating the result gives back `text`.
pub fn model_tokens(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut line_start = 0;
    for (li, line) in text.split('\n').enumerate() {
        if li > 0 {
            out.push(&text[line_start - 1..line_start]);
        }
        let mut cursor = 0;
        for (tok, off) in delimiter_tokenize(line) {
            if off > cursor {
                out.push(&line[cursor..off]);
            }
            out.push(tok);
            cursor = off + tok.len();
        }
        if cursor < line.len() {
            out.push(&line[cursor..]);
        }
        line_start += line.len() + 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    tokens: Vec<String>,
    #[serde(skip)]
    ids: HashMap<String, u32>,
}

/// Specials first, then corpus tokens by descending frequency, ties broken
/// lexicographically.
pub fn build_vocab<'a>(corpus: impl IntoIterator<Item = &'a str>) -> Vocab {
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for text in corpus {
        for tok in model_tokens(text) {
            if tok != "\n" {
                *freq.entry(tok).or_default() += 1;
            }
        }
    }
    let mut ranked: Vec<(&str, usize)> = freq.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    Vocab::from_tokens(
        SPECIAL_NAMES
            .iter()
            .map(|s| s.to_string())
            .chain(ranked.into_iter().map(|(t, _)| t.to_string()))
            .collect(),
    )
}

impl Vocab {
    fn from_tokens(tokens: Vec<String>) -> Self {
        let ids = tokens
            .iter()
            .enumerate()
            .skip(N_SPECIALS)
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self { tokens, ids }
    }

    /// Rebuilds the lookup table after deserialization.
    pub fn reindex(self) -> Self {
        Self::from_tokens(self.tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> u32 {
        if token == "\n" {
            return NEWLINE;
        }
        self.ids.get(token).copied().unwrap_or(UNK)
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        model_tokens(text).into_iter().map(|t| self.id(t)).collect()
    }

    /// Inverse of [`Vocab::encode`] for known tokens; pad, bos, eos and unk
    /// produce no text.
    pub fn decode(&self, ids: &[u32]) -> String {
        ids.iter()
            .filter_map(|&id| match id {
                NEWLINE => Some("\n"),
                PAD | BOS | EOS | UNK => None,
                _ => self.token(id),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn frequency_then_lexicographic() {
        // " " and "a" both occur twice; " " sorts first
        let v = build_vocab(["a a b"]);
        assert_eq!(v.len(), N_SPECIALS + 3);
        assert_eq!(v.id(" "), 5);
        assert_eq!(v.id("a"), 6);
        assert_eq!(v.id("b"), 7);
        let w = build_vocab(["b;b;b", "a;"]);
        assert_eq!(w.id(";"), 5);
        assert_eq!(w.id("b"), 6);
        assert_eq!(w.id("a"), 7);
        assert_eq!(v, build_vocab(["a a b"]));
        assert_eq!(v.id("zzz"), UNK);
        assert_eq!(build_vocab([]).len(), N_SPECIALS);
    }

    #[test]
    fn tokens_cover_text() {
        let text = "  int x = foo(a, b);\n\treturn x;\n";
        let toks = model_tokens(text);
        assert_eq!(toks.concat(), text);
        assert!(toks.contains(&"(") && toks.contains(&"\t") && toks.contains(&"\n"));
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(text in "[a-z(){};., \t\n]{0,60}") {
            prop_assert_eq!(model_tokens(&text).concat(), text.clone());
            let v = build_vocab([text.as_str()]);
            prop_assert_eq!(v.decode(&v.encode(&text)), text);
        }
    }
}
