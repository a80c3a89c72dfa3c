//! Target holes, surrounding contexts and repository splits.
//!
//! A hole starts at a uniformly chosen delimiter token of a code line and
//! runs to the end of that line.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample as sample_indices;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::repo_model::{LineKind, RepoIndex, SourceFile};
use crate::util::{derive_seed, rng};

pub const DEFAULT_HOLE_CAP: usize = 10_000;
pub const DEFAULT_MIN_FILES: usize = 20;

/// Splits a line at `. ( ) [ ] { } , : " ;` and whitespace. Punctuation
/// delimiters are tokens of their own; whitespace only separates.
pub fn delimiter_tokenize(line: &str) -> Vec<(&str, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, b) in line.bytes().enumerate() {
        let punct = is_punct_delimiter(b);
        if punct || b.is_ascii_whitespace() {
            if let Some(s) = start.take() {
                out.push((&line[s..i], s));
            }
            if punct {
                out.push((&line[i..i + 1], i));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((&line[s..], s));
    }
    out
}

pub(crate) fn is_punct_delimiter(b: u8) -> bool {
    matches!(
        b,
        b'.' | b'(' | b')' | b'[' | b']' | b'{' | b'}' | b',' | b':' | b'"' | b';'
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetHole {
    pub repo_id: String,
    pub rel_path: String,
    pub line_idx: usize,
    /// Byte offset within the line.
    pub char_start: usize,
    pub hole_str: String,
    pub surrounding_context: String,
}

impl TargetHole {
    /// `<repo>/<path>:<line>:<col>`; unique within a corpus.
    pub fn id(&self) -> String {
        hole_id(
            &self.repo_id,
            &self.rel_path,
            self.line_idx,
            self.char_start,
        )
    }

    /// Absolute byte offset of the hole in its file.
    pub fn offset_in(&self, file: &SourceFile) -> usize {
        file.line_spans[self.line_idx].start + self.char_start
    }
}

pub fn hole_id(repo_id: &str, rel_path: &str, line: usize, col: usize) -> String {
    format!("{repo_id}/{rel_path}:{line}:{col}")
}

/// Picks a hole start among the line's tokens. `None` for a token-free line.
pub fn make_hole<R: Rng + ?Sized>(line: &str, rng: &mut R) -> Option<(usize, String)> {
    let toks = delimiter_tokenize(line);
    if toks.is_empty() {
        return None;
    }
    let (_, start) = toks[rng.random_range(0..toks.len())];
    Some((start, line[start..].to_string()))
}

/// Surrounding context: up to `above` preceding lines, the hole line's
/// prefix (when non-empty) and up to `below` following lines, newline-joined.
pub fn surrounding_context(
    file: &SourceFile,
    line_idx: usize,
    char_start: usize,
    above: usize,
    below: usize,
) -> String {
    let mut parts: Vec<&str> = Vec::new();
    for l in line_idx.saturating_sub(above)..line_idx {
        parts.push(file.line(l));
    }
    let prefix = &file.line(line_idx)[..char_start];
    if !prefix.is_empty() {
        parts.push(prefix);
    }
    for l in line_idx + 1..(line_idx + 1 + below).min(file.line_count()) {
        parts.push(file.line(l));
    }
    parts.join("\n")
}

/// One hole per code line of every file, capped at `cap` per repository by
/// a seeded uniform subset. Output is ordered by (path, line).
pub fn generate_holes(index: &RepoIndex, seed: u64, cap: usize) -> Vec<TargetHole> {
    let mut holes = Vec::new();
    for (path, f) in &index.files {
        let mut file_rng = rng(derive_seed(seed, path));
        for (line_idx, kind) in f.facts.line_mask.iter().enumerate() {
            if *kind != LineKind::Code {
                continue;
            }
            let line = f.source.line(line_idx);
            if let Some((char_start, hole_str)) = make_hole(line, &mut file_rng) {
                holes.push(TargetHole {
                    repo_id: index.repo_id.clone(),
                    rel_path: path.clone(),
                    line_idx,
                    char_start,
                    hole_str,
                    surrounding_context: surrounding_context(&f.source, line_idx, char_start, 2, 2),
                });
            }
        }
    }
    if holes.len() > cap {
        let mut keep = sample_indices(
            &mut rng(derive_seed(seed, &index.repo_id)),
            holes.len(),
            cap,
        )
        .into_vec();
        keep.sort_unstable();
        let mut it = keep.into_iter().peekable();
        holes = holes
            .into_iter()
            .enumerate()
            .filter_map(|(i, h)| {
                if it.peek() == Some(&i) {
                    it.next();
                    Some(h)
                } else {
                    None
                }
            })
            .collect();
    }
    holes
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SplitAssignment {
    pub assignment: BTreeMap<String, Split>,
}

impl SplitAssignment {
    pub fn repos_in(&self, split: Split) -> Vec<&str> {
        self.assignment
            .iter()
            .filter(|(_, s)| **s == split)
            .map(|(r, _)| r.as_str())
            .collect()
    }

    pub fn counts(&self) -> [usize; 3] {
        Split::ALL.map(|s| self.assignment.values().filter(|x| **x == s).count())
    }

    /// Parses `repo=split` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut assignment = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (repo, split) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("split file line {}: expected repo=split", n + 1))
            })?;
            assignment.insert(repo.trim().to_string(), split.trim().parse()?);
        }
        Ok(Self { assignment })
    }
}

/// Drops repositories with fewer than `min_files` files and assigns the
/// rest to train/val/test in a 2:1:1 ratio after a seeded shuffle.
/// Leftover repositories go to train, then val, then test.
pub fn split_repos(
    repo_file_counts: &[(String, usize)],
    seed: u64,
    min_files: usize,
) -> Result<SplitAssignment> {
    let mut eligible: Vec<&str> = repo_file_counts
        .iter()
        .filter(|(_, n)| *n >= min_files)
        .map(|(r, _)| r.as_str())
        .collect();
    if eligible.len() < 4 {
        return Err(Error::TooFewRepos(eligible.len()));
    }
    eligible.sort_unstable();
    eligible.dedup();
    eligible.shuffle(&mut rng(seed));

    let n = eligible.len();
    let quarter = n / 4;
    let mut sizes = [2 * quarter, quarter, quarter];
    for slot in sizes.iter_mut().take(n % 4) {
        *slot += 1;
    }
    let mut assignment = BTreeMap::new();
    let mut it = eligible.into_iter();
    for (split, size) in Split::ALL.into_iter().zip(sizes) {
        for repo in it.by_ref().take(size) {
            assignment.insert(repo.to_string(), split);
        }
    }
    Ok(SplitAssignment { assignment })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(line: &str) -> Vec<(&str, usize)> {
        delimiter_tokenize(line)
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(
            toks("a.b(c)"),
            vec![("a", 0), (".", 1), ("b", 2), ("(", 3), ("c", 4), (")", 5)]
        );
        assert!(toks("   ").is_empty());
        let words: Vec<_> = toks("user.getName();").into_iter().map(|t| t.0).collect();
        assert_eq!(words, vec!["user", ".", "getName", "(", ")", ";"]);
        let words: Vec<_> = toks("\tx = \"a b\";").into_iter().map(|t| t.0).collect();
        assert_eq!(words, vec!["x", "=", "\"", "a", "b", "\"", ";"]);
    }

    #[test]
    fn hole_from_each_token_reconstructs_line() {
        let line = "x = 1;";
        let starts: Vec<_> = toks(line).into_iter().map(|t| t.1).collect();
        assert_eq!(starts, vec![0, 2, 4, 5]);
        // `1` is the third token
        assert_eq!(&line[starts[2]..], "1;");
        assert_eq!(&line[starts[0]..], line);
    }

    #[test]
    fn make_hole_single_and_empty() {
        let mut r = rng(3);
        assert_eq!(make_hole("}", &mut r), Some((0, "}".to_string())));
        assert_eq!(make_hole("   ", &mut r), None);
    }

    #[test]
    fn make_hole_fixed_seed_trace() {
        // recorded from ChaCha8 seed 0; `x = 1;` has tokens x,=,1,;
        let mut r = rng(0);
        let picks: Vec<_> = (0..4)
            .map(|_| make_hole("x = 1;", &mut r).unwrap().1)
            .collect();
        for p in &picks {
            assert!(["x = 1;", "= 1;", "1;", ";"].contains(&p.as_str()));
        }
        let mut again = rng(0);
        let picks2: Vec<_> = (0..4)
            .map(|_| make_hole("x = 1;", &mut again).unwrap().1)
            .collect();
        assert_eq!(picks, picks2);
    }

    fn file(text: &str) -> SourceFile {
        SourceFile::new("r", "A.java", text)
    }

    #[test]
    fn surrounding_at_file_start() {
        let f = file("a();\nb();\nc();\nd();\n");
        assert_eq!(surrounding_context(&f, 0, 0, 2, 2), "b();\nc();");
    }

    #[test]
    fn surrounding_excludes_hole() {
        let f =
            file("class A {\n  void f() {\n    String tier = compute();\n    use(tier);\n  }\n}\n");
        let s = surrounding_context(&f, 2, 18, 2, 2);
        assert_eq!(
            s,
            "class A {\n  void f() {\n    String tier = \n    use(tier);\n  }"
        );
        assert!(!s.contains("compute"));
    }

    #[test]
    fn generate_caps_and_is_deterministic() {
        let body: String = (0..150).map(|i| format!("int v{i} = {i};\n")).collect();
        let sources = (0..100)
            .map(|k| SourceFile::new("big", format!("F{k}.java"), body.clone()))
            .collect();
        let index = RepoIndex::from_sources("big", sources);
        let holes = generate_holes(&index, 11, DEFAULT_HOLE_CAP);
        assert_eq!(holes.len(), 10_000);
        assert_eq!(holes, generate_holes(&index, 11, DEFAULT_HOLE_CAP));
        assert_ne!(holes, generate_holes(&index, 12, DEFAULT_HOLE_CAP));
    }

    #[test]
    fn generate_one_per_code_line() {
        let index = RepoIndex::from_sources(
            "r",
            vec![SourceFile::new(
                "r",
                "A.java",
                "// c\nint a;\n\n/* x\n y */\nint b;\n}\n",
            )],
        );
        let holes = generate_holes(&index, 1, 10);
        assert_eq!(
            holes.iter().map(|h| h.line_idx).collect::<Vec<_>>(),
            vec![1, 5, 6]
        );
    }

    #[test]
    fn split_ratios() {
        let repos: Vec<_> = (0..200).map(|i| (format!("r{i:03}"), 25)).collect();
        let s = split_repos(&repos, 5, DEFAULT_MIN_FILES).unwrap();
        assert_eq!(s.counts(), [100, 50, 50]);

        let four: Vec<_> = (0..4).map(|i| (format!("r{i}"), 20)).collect();
        assert_eq!(split_repos(&four, 5, 20).unwrap().counts(), [2, 1, 1]);

        let seven: Vec<_> = (0..7).map(|i| (format!("r{i}"), 20)).collect();
        assert_eq!(split_repos(&seven, 5, 20).unwrap().counts(), [3, 2, 2]);
    }

    #[test]
    fn split_threshold_and_errors() {
        let mut repos: Vec<_> = (0..4).map(|i| (format!("r{i}"), 20)).collect();
        repos.push(("small".into(), 19));
        let s = split_repos(&repos, 0, 20).unwrap();
        assert!(!s.assignment.contains_key("small"));
        assert!(matches!(
            split_repos(&repos[..3], 0, 20),
            Err(Error::TooFewRepos(3))
        ));
    }

    #[test]
    fn split_file_parse() {
        let s = SplitAssignment::parse("# c\na=train\nb = val\nc=test\n").unwrap();
        assert_eq!(s.counts(), [1, 1, 1]);
        assert!(SplitAssignment::parse("a=nope").is_err());
    }

    proptest! {
        #[test]
        fn tokens_cover_non_whitespace(line in "[a-z .(){};,:\"\\[\\]=+\t]{0,40}") {
            let joined: String = delimiter_tokenize(&line).into_iter().map(|t| t.0).collect();
            let expected: String = line.chars().filter(|c| !c.is_ascii_whitespace()).collect();
            prop_assert_eq!(joined, expected);
        }

        #[test]
        fn hole_reconstructs_line(line in "[a-zA-Z0-9 .(){};=+]{1,40}", seed in any::<u64>()) {
            if let Some((start, hole)) = make_hole(&line, &mut rng(seed)) {
                prop_assert!(!hole.is_empty());
                prop_assert_eq!(format!("{}{}", &line[..start], hole), line);
            }
        }

        #[test]
        fn splits_partition(n in 4usize..60, seed in any::<u64>()) {
            let repos: Vec<_> = (0..n).map(|i| (format!("r{i}"), 20)).collect();
            let s = split_repos(&repos, seed, 20).unwrap();
            prop_assert_eq!(s.assignment.len(), n);
            let [tr, va, te] = s.counts();
            prop_assert!(tr >= va && va >= te && (tr as i64 - 2 * te as i64).abs() <= 2);
        }
    }
}
