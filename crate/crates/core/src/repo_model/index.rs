use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use walkdir::WalkDir;

use super::analyze::{analyze_file_with_limit, JavaLiteFacts, DEFAULT_FACTS_LIMIT};
use super::source::{file_name, parent_dir, stem};
use super::SourceFile;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexedFile {
    pub source: SourceFile,
    pub facts: JavaLiteFacts,
}

/// A scanned repository. Immutable once built.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RepoIndex {
    pub repo_id: String,
    pub files: BTreeMap<String, IndexedFile>,
    pub import_edges: BTreeMap<String, Vec<String>>,
    pub dir_index: BTreeMap<String, Vec<String>>,
    pub name_token_index: BTreeMap<String, Vec<String>>,
    /// Files that were found but could not be decoded as UTF-8.
    pub skipped: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct ScanOptions {
    pub facts_limit: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            facts_limit: DEFAULT_FACTS_LIMIT,
        }
    }
}

/// Scans every `.java` file under `root`. The repository id is the final
/// path component of `root`.
pub fn scan_repo(root: impl AsRef<Path>) -> Result<RepoIndex> {
    scan_repo_with(root, ScanOptions::default())
}

pub fn scan_repo_with(root: impl AsRef<Path>, opts: ScanOptions) -> Result<RepoIndex> {
    let root = root.as_ref();
    let meta = std::fs::metadata(root).map_err(|e| Error::io(root, e))?;
    if !meta.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotADirectory, "not a directory"),
        ));
    }
    let repo_id = root
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();

    let mut paths = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            Error::io(path, e.into())
        })?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|x| x == "java") {
            let rel = entry
                .path()
                .strip_prefix(root)
                .expect("walkdir yields paths under root")
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            paths.push((rel, entry.into_path()));
        }
    }

    let loaded: Vec<(String, Result<Option<String>>)> = paths
        .par_iter()
        .map(|(rel, abs)| {
            let res = match std::fs::read(abs) {
                Ok(bytes) => Ok(String::from_utf8(bytes).ok()),
                Err(e) => Err(Error::io(abs, e)),
            };
            (rel.clone(), res)
        })
        .collect();

    let mut sources = Vec::new();
    let mut skipped = Vec::new();
    for (rel, res) in loaded {
        match res? {
            Some(text) => sources.push(SourceFile::new(repo_id.clone(), rel, text)),
            None => {
                log::warn!("{repo_id}: skipping undecodable file {rel}");
                skipped.push(rel);
            }
        }
    }
    let mut index = RepoIndex::from_sources_with(repo_id, sources, opts);
    index.skipped = skipped;
    Ok(index)
}

impl RepoIndex {
    /// Builds an index from in-memory files.
    pub fn from_sources(repo_id: impl Into<String>, sources: Vec<SourceFile>) -> Self {
        Self::from_sources_with(repo_id, sources, ScanOptions::default())
    }

    pub fn from_sources_with(
        repo_id: impl Into<String>,
        sources: Vec<SourceFile>,
        opts: ScanOptions,
    ) -> Self {
        let analyzed: Vec<IndexedFile> = sources
            .into_par_iter()
            .map(|source| {
                let facts = analyze_file_with_limit(&source, opts.facts_limit);
                IndexedFile { source, facts }
            })
            .collect();

        let mut index = RepoIndex {
            repo_id: repo_id.into(),
            ..Default::default()
        };
        for f in analyzed {
            index.files.insert(f.source.rel_path.clone(), f);
        }
        for path in index.files.keys() {
            index
                .dir_index
                .entry(parent_dir(path).to_string())
                .or_default()
                .push(path.clone());
            let mut toks = name_tokens(stem(path));
            toks.dedup();
            for t in toks {
                let entry = index.name_token_index.entry(t).or_default();
                if !entry.contains(path) {
                    entry.push(path.clone());
                }
            }
        }
        let edges: BTreeMap<String, Vec<String>> = index
            .files
            .keys()
            .map(|p| (p.clone(), index.compute_imports(p)))
            .collect();
        index.import_edges = edges;
        index
    }

    pub fn get(&self, rel_path: &str) -> Option<&IndexedFile> {
        self.files.get(rel_path)
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn total_lines(&self) -> usize {
        self.files.values().map(|f| f.source.line_count()).sum()
    }

    fn compute_imports(&self, rel_path: &str) -> Vec<String> {
        let Some(file) = self.files.get(rel_path) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for import in &file.facts.imports {
            if let Some(pkg) = import.strip_suffix(".*") {
                let dir_suffix = pkg.replace('.', "/");
                for (dir, members) in &self.dir_index {
                    if path_ends_with(dir, &dir_suffix) {
                        out.extend(members.iter().cloned());
                    }
                }
            } else {
                let qualified = format!("{}.java", import.replace('.', "/"));
                let exact: Vec<_> = self
                    .files
                    .keys()
                    .filter(|p| path_ends_with(p, &qualified))
                    .cloned()
                    .collect();
                if !exact.is_empty() {
                    out.extend(exact);
                } else {
                    let simple = import.rsplit('.').next().unwrap_or(import);
                    let wanted = format!("{simple}.java");
                    out.extend(
                        self.files
                            .keys()
                            .filter(|p| file_name(p) == wanted)
                            .cloned(),
                    );
                }
            }
        }
        out.retain(|p| p != rel_path);
        out.sort();
        out.dedup();
        out
    }

    /// In-repo files imported by `rel_path`.
    pub fn resolve_imports(&self, rel_path: &str) -> Vec<String> {
        self.import_edges.get(rel_path).cloned().unwrap_or_default()
    }

    /// Files sharing at least one filename token with `rel_path`.
    pub fn similar_name_files(&self, rel_path: &str) -> Vec<String> {
        let mut out: Vec<String> = name_tokens(stem(rel_path))
            .iter()
            .filter_map(|t| self.name_token_index.get(t))
            .flatten()
            .filter(|p| p.as_str() != rel_path)
            .cloned()
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// Other files in the same directory.
    pub fn sibling_files(&self, rel_path: &str) -> Vec<String> {
        self.dir_index
            .get(parent_dir(rel_path))
            .map(|v| {
                v.iter()
                    .filter(|p| p.as_str() != rel_path)
                    .cloned()
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Files whose primary class is a parent class of `rel_path`, in
    /// `extends` order. Parents declared in the same file are skipped.
    pub fn parent_class_files(&self, rel_path: &str) -> Vec<String> {
        let Some(file) = self.files.get(rel_path) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for parent in &file.facts.extends_names {
            let candidates = name_tokens(parent)
                .first()
                .and_then(|t| self.name_token_index.get(t))
                .cloned()
                .unwrap_or_default();
            for cand in candidates {
                if cand == rel_path || out.contains(&cand) {
                    continue;
                }
                let primary = self.files[&cand]
                    .facts
                    .class_names
                    .first()
                    .map(String::as_str)
                    .unwrap_or_else(|| stem(&cand));
                if stem(&cand) == parent || primary == parent {
                    out.push(cand);
                }
            }
        }
        out
    }
}

fn path_ends_with(path: &str, suffix: &str) -> bool {
    path == suffix || path.ends_with(&format!("/{suffix}"))
}

/// Splits a file stem into lowercase tokens at camelCase boundaries,
/// underscores and digits. Digit runs are separators, not tokens.
pub fn name_tokens(stem: &str) -> Vec<String> {
    let chars: Vec<char> = stem.chars().collect();
    let mut out = Vec::new();
    let mut cur = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if !c.is_alphabetic() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur).to_lowercase());
            }
            continue;
        }
        if c.is_uppercase() && !cur.is_empty() {
            let prev_lower = chars[i - 1].is_lowercase();
            let next_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
            let prev_upper = chars[i - 1].is_uppercase();
            // fooBar | HTTPServer (split before the S)
            if prev_lower || (prev_upper && next_lower) {
                out.push(std::mem::take(&mut cur).to_lowercase());
            }
        }
        cur.push(c);
    }
    if !cur.is_empty() {
        out.push(cur.to_lowercase());
    }
    out
}
