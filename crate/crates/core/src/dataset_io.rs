//! Stack-Repo layout: `<root>/<split>/<repo>/` holds the repository's Java
//! sources in their original tree plus one newline-delimited JSON file per
//! context kind, `hole_and_context_<kind>.json`. Each line is one hole:
//!
//! ```json
//! {"location":{"file":"src/A.java","line":3,"col":8},"hole":"x);","surrounding":"...","repo_contexts":["..."]}
//! ```
//!
//! `line` and `col` are 0-based; `col` is a byte offset within the line.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hole_gen::{hole_id, Split};
use crate::packing::{count_tokens, parse_rc, PackedExample, RepoContext};
use crate::repo_model::RepoIndex;

/// Bumped whenever the record layout changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Location {
    pub file: String,
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoleRecord {
    pub location: Location,
    pub hole: String,
    pub surrounding: String,
    pub repo_contexts: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ContextKind {
    Pp,
    Bm25,
    RandomNn,
}

impl ContextKind {
    pub const ALL: [ContextKind; 3] = [ContextKind::Pp, ContextKind::Bm25, ContextKind::RandomNn];

    pub fn as_str(self) -> &'static str {
        match self {
            ContextKind::Pp => "pp",
            ContextKind::Bm25 => "bm25",
            ContextKind::RandomNn => "random_nn",
        }
    }

    pub fn file_name(self) -> String {
        format!("hole_and_context_{}.json", self.as_str())
    }
}

impl fmt::Display for ContextKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ContextKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "pp" => Ok(ContextKind::Pp),
            "bm25" => Ok(ContextKind::Bm25),
            "random_nn" | "randomnn" => Ok(ContextKind::RandomNn),
            _ => Err(Error::Config(format!("unknown context kind `{s}`"))),
        }
    }
}

/// A record together with the repository it belongs to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetEntry {
    pub repo_id: String,
    pub record: HoleRecord,
}

impl DatasetEntry {
    pub fn hole_id(&self) -> String {
        let loc = &self.record.location;
        hole_id(&self.repo_id, &loc.file, loc.line, loc.col)
    }

    /// Rebuilds the packed form of this record by parsing each stored repo
    /// context back into its proposal name and chunk.
    pub fn to_packed(&self) -> Result<PackedExample> {
        let id = self.hole_id();
        let rcs = self
            .record
            .repo_contexts
            .iter()
            .enumerate()
            .map(|(slot_index, formatted)| {
                let (name, chunk) =
                    parse_rc(formatted, &self.record.surrounding).ok_or_else(|| {
                        Error::Config(format!(
                            "{id}: repo context {slot_index} is not in rule_name/rule_context form"
                        ))
                    })?;
                Ok(RepoContext {
                    slot_index,
                    ppc_name: name.to_string(),
                    chunk_text: chunk.to_string(),
                    formatted_text: formatted.clone(),
                    chunk_token_count: count_tokens(chunk),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PackedExample {
            hole_id: id,
            target: self.record.hole.clone(),
            surrounding: self.record.surrounding.clone(),
            rcs,
        })
    }
}

impl HoleRecord {
    pub fn from_packed(location: Location, packed: &PackedExample) -> Self {
        Self {
            location,
            hole: packed.target.clone(),
            surrounding: packed.surrounding.clone(),
            repo_contexts: packed
                .rcs
                .iter()
                .map(|rc| rc.formatted_text.clone())
                .collect(),
        }
    }
}

/// Writes one JSON object per line.
pub fn write_ndjson<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut w, row).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads one JSON object per line; any malformed line is an error naming
/// the file and 1-based line number.
pub fn read_ndjson<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let row = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(row);
    }
    Ok(out)
}

/// Writes the hole records of one repository.
pub fn write_dataset(
    split_dir: &Path,
    repo_id: &str,
    records: &[HoleRecord],
    kind: ContextKind,
) -> Result<PathBuf> {
    let path = split_dir.join(repo_id).join(kind.file_name());
    write_ndjson(&path, records)?;
    Ok(path)
}

/// Copies a repository's indexed sources into `<split_dir>/<repo_id>/`.
pub fn write_repo_sources(split_dir: &Path, index: &RepoIndex) -> Result<()> {
    let base = split_dir.join(&index.repo_id);
    for (rel, f) in &index.files {
        let path = base.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, &f.source.content).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Repository directories of a split, sorted.
pub fn repo_dirs(split_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(split_dir).map_err(|e| Error::io(split_dir, e))? {
        let entry = entry.map_err(|e| Error::io(split_dir, e))?;
        if entry
            .file_type()
            .map_err(|e| Error::io(entry.path(), e))?
            .is_dir()
        {
            out.push(entry.path());
        }
    }
    out.sort();
    Ok(out)
}

/// Reads one kind of record for every repository of a split, in repository
/// then file order. Repositories without that file are skipped.
pub fn read_dataset(split_dir: &Path, kind: ContextKind) -> Result<Vec<DatasetEntry>> {
    let mut out = Vec::new();
    for dir in repo_dirs(split_dir)? {
        let path = dir.join(kind.file_name());
        if !path.is_file() {
            continue;
        }
        let repo_id = dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        for record in read_ndjson::<HoleRecord>(&path)? {
            out.push(DatasetEntry {
                repo_id: repo_id.clone(),
                record,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitStats {
    pub n_repos: usize,
    pub n_files: usize,
    pub n_holes: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub train: SplitStats,
    pub val: SplitStats,
    pub test: SplitStats,
    /// Splits whose directory was absent; reported as zeros.
    pub missing_splits: Vec<Split>,
}

impl CorpusStats {
    pub fn get(&self, split: Split) -> &SplitStats {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    fn get_mut(&mut self, split: Split) -> &mut SplitStats {
        match split {
            Split::Train => &mut self.train,
            Split::Val => &mut self.val,
            Split::Test => &mut self.test,
        }
    }
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<16}{:>10}{:>10}{:>10}", "", "train", "val", "test")?;
        let row = |f: &mut fmt::Formatter<'_>, name: &str, pick: fn(&SplitStats) -> usize| {
            writeln!(
                f,
                "{:<16}{:>10}{:>10}{:>10}",
                name,
                pick(&self.train),
                pick(&self.val),
                pick(&self.test)
            )
        };
        row(f, "# repositories", |s| s.n_repos)?;
        row(f, "# files", |s| s.n_files)?;
        row(f, "# holes", |s| s.n_holes)?;
        for s in &self.missing_splits {
            writeln!(f, "warning: split `{s}` is missing")?;
        }
        Ok(())
    }
}

fn count_lines(path: &Path) -> Result<usize> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut n = 0;
    for line in BufReader::new(file).lines() {
        line.map_err(|e| Error::io(path, e))?;
        n += 1;
    }
    Ok(n)
}

/// Repository, file and hole counts per split. Holes are counted from the
/// first context kind present in each repository (PP, BM25, RandomNN).
pub fn stats(dataset_root: &Path) -> Result<CorpusStats> {
    let mut out = CorpusStats::default();
    for split in Split::ALL {
        let dir = dataset_root.join(split.as_str());
        if !dir.is_dir() {
            out.missing_splits.push(split);
            continue;
        }
        let s = out.get_mut(split);
        for repo in repo_dirs(&dir)? {
            s.n_repos += 1;
            for entry in walkdir::WalkDir::new(&repo) {
                let entry = entry.map_err(|e| Error::io(&repo, e.into()))?;
                if entry.file_type().is_file()
                    && entry.path().extension().is_some_and(|x| x == "java")
                {
                    s.n_files += 1;
                }
            }
            if let Some(path) = ContextKind::ALL
                .iter()
                .map(|k| repo.join(k.file_name()))
                .find(|p| p.is_file())
            {
                s.n_holes += count_lines(&path)?;
            }
        }
    }
    Ok(out)
}
