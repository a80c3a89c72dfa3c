//! End-to-end dataset construction: scan repositories, cut holes, gather
//! contexts of each kind, pack them and write a Stack-Repo tree.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset_io::{write_dataset, write_repo_sources, ContextKind, HoleRecord, Location};
use crate::error::{Error, Result};
use crate::hole_gen::{
    generate_holes, split_repos, Split, SplitAssignment, TargetHole, DEFAULT_HOLE_CAP,
    DEFAULT_MIN_FILES,
};
use crate::packing::{pack, PackedExample, PackingConfig, RankedContext};
use crate::prompt_proposals::{default_ranking, prior_ppc, PpcExtractor, PromptProposal};
use crate::repo_model::{scan_repo, RepoIndex};
use crate::retrieval::{
    random_nn, text_tokens, Bm25Index, Bm25Params, HashedBagEmbedder, RandomNnParams,
};
use crate::util::derive_seed;

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub seed: u64,
    /// Maximum holes per repository.
    pub hole_cap: usize,
    /// Repositories with fewer files are left out of automatic splits.
    pub min_files: usize,
    pub packing: PackingConfig,
    pub ranking: Vec<PromptProposal>,
    pub kinds: Vec<ContextKind>,
    pub bm25: Bm25Params,
    /// Files kept per hole for BM25 contexts.
    pub bm25_top_k: usize,
    pub random_nn: RandomNnParams,
    /// Explicit split assignment; when absent, repositories are split 2:1:1.
    pub splits: Option<SplitAssignment>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        let packing = PackingConfig::default();
        Self {
            seed: 0,
            hole_cap: DEFAULT_HOLE_CAP,
            min_files: DEFAULT_MIN_FILES,
            bm25_top_k: packing.n_contexts,
            packing,
            ranking: default_ranking(),
            kinds: ContextKind::ALL.to_vec(),
            bm25: Bm25Params::default(),
            random_nn: RandomNnParams::default(),
            splits: None,
        }
    }
}

/// Scans every immediate subdirectory of `root` as one repository, in name
/// order.
pub fn scan_corpus(root: &Path) -> Result<Vec<RepoIndex>> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        if entry
            .file_type()
            .map_err(|e| Error::io(entry.path(), e))?
            .is_dir()
        {
            dirs.push(entry.path());
        }
    }
    dirs.sort();
    dirs.par_iter().map(scan_repo).collect()
}

/// Per-repository retrieval state shared by all of its holes.
pub struct RepoContexts<'a> {
    index: &'a RepoIndex,
    bm25: Option<Bm25Index>,
    options: &'a BuildOptions,
}

impl<'a> RepoContexts<'a> {
    pub fn new(index: &'a RepoIndex, options: &'a BuildOptions) -> Self {
        let bm25 = options
            .kinds
            .contains(&ContextKind::Bm25)
            .then(|| Bm25Index::new(index));
        Self {
            index,
            bm25,
            options,
        }
    }

    /// Ranked contexts of one kind. BM25 and RandomNN lists start with the
    /// prior-lines context so that prior-last packing has it available.
    pub fn ranked(&self, kind: ContextKind, hole: &TargetHole) -> Result<Vec<RankedContext>> {
        let file = self.index.get(&hole.rel_path).ok_or_else(|| {
            Error::Config(format!("hole {} refers to an unindexed file", hole.id()))
        })?;
        match kind {
            ContextKind::Pp => {
                let x = PpcExtractor::new(self.index, hole).expect("file is indexed");
                Ok(x.extract_ranked(&self.options.ranking)
                    .into_iter()
                    .map(RankedContext::from)
                    .collect())
            }
            ContextKind::Bm25 => {
                let owned;
                let bm = match &self.bm25 {
                    Some(b) => b,
                    None => {
                        owned = Bm25Index::new(self.index);
                        &owned
                    }
                };
                let mut out = vec![RankedContext::from(prior_ppc(hole, &file.source))];
                let query = text_tokens(&hole.surrounding_context);
                for scored in bm
                    .rank(&query, Some(&hole.rel_path), self.options.bm25)
                    .into_iter()
                    .take(self.options.bm25_top_k)
                {
                    let text = &self.index.files[&scored.rel_path].source.content;
                    out.push(RankedContext::new(
                        format!("bm25/{}", scored.rel_path),
                        text.clone(),
                    ));
                }
                Ok(out)
            }
            ContextKind::RandomNn => {
                let params = RandomNnParams {
                    seed: derive_seed(self.options.seed, &hole.id()),
                    ..self.options.random_nn
                };
                let mut out = vec![RankedContext::from(prior_ppc(hole, &file.source))];
                for c in random_nn(hole, self.index, params, &HashedBagEmbedder::default()) {
                    out.push(RankedContext::new(
                        format!(
                            "random_nn/{}#L{}-{}",
                            c.rel_path,
                            c.line_start + 1,
                            c.line_end
                        ),
                        c.text,
                    ));
                }
                Ok(out)
            }
        }
    }

    pub fn packed(&self, kind: ContextKind, hole: &TargetHole) -> Result<PackedExample> {
        let ranked = self.ranked(kind, hole)?;
        pack(
            &hole.id(),
            &hole.hole_str,
            &hole.surrounding_context,
            &ranked,
            &self.options.packing,
        )
    }
}

pub fn location(hole: &TargetHole) -> Location {
    Location {
        file: hole.rel_path.clone(),
        line: hole.line_idx,
        col: hole.char_start,
    }
}

/// Packed examples of one kind for the given holes, in hole order.
pub fn pack_holes(
    index: &RepoIndex,
    holes: &[TargetHole],
    kind: ContextKind,
    options: &BuildOptions,
) -> Result<Vec<PackedExample>> {
    let ctx = RepoContexts::new(index, options);
    holes.par_iter().map(|h| ctx.packed(kind, h)).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RepoSummary {
    pub repo_id: String,
    pub split: Option<Split>,
    pub n_files: usize,
    pub n_holes: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct BuildSummary {
    pub repos: Vec<RepoSummary>,
    pub files_written: Vec<PathBuf>,
}

/// Assigns repositories to splits, using the explicit assignment when
/// given. Repositories it names that were not scanned are an error.
pub fn assign_splits(indexes: &[RepoIndex], options: &BuildOptions) -> Result<SplitAssignment> {
    match &options.splits {
        Some(s) => {
            let missing: Vec<&str> = s
                .assignment
                .keys()
                .filter(|r| !indexes.iter().any(|i| &i.repo_id == *r))
                .map(String::as_str)
                .collect();
            if !missing.is_empty() {
                return Err(Error::Config(format!(
                    "split file names unknown repositories: {}",
                    missing.join(", ")
                )));
            }
            Ok(s.clone())
        }
        None => {
            let counts: Vec<(String, usize)> = indexes
                .iter()
                .map(|i| (i.repo_id.clone(), i.len()))
                .collect();
            split_repos(&counts, options.seed, options.min_files)
        }
    }
}

/// Builds a Stack-Repo tree under `out_root`, which must be empty or absent.
pub fn build_dataset(
    corpus_root: &Path,
    out_root: &Path,
    options: &BuildOptions,
) -> Result<BuildSummary> {
    options.packing.validate()?;
    if out_root.exists()
        && fs::read_dir(out_root)
            .map_err(|e| Error::io(out_root, e))?
            .next()
            .is_some()
    {
        return Err(Error::Config(format!(
            "output directory {} is not empty",
            out_root.display()
        )));
    }
    let indexes = scan_corpus(corpus_root)?;
    let assignment = assign_splits(&indexes, options)?;
    let mut summary = BuildSummary::default();
    for index in &indexes {
        let split = assignment.assignment.get(&index.repo_id).copied();
        let mut repo = RepoSummary {
            repo_id: index.repo_id.clone(),
            split,
            n_files: index.len(),
            n_holes: 0,
        };
        let Some(split) = split else {
            log::warn!(
                "repository {} is not assigned to a split; skipped",
                index.repo_id
            );
            summary.repos.push(repo);
            continue;
        };
        let split_dir = out_root.join(split.as_str());
        write_repo_sources(&split_dir, index)?;
        let holes = generate_holes(index, options.seed, options.hole_cap);
        repo.n_holes = holes.len();
        for &kind in &options.kinds {
            let packed = pack_holes(index, &holes, kind, options)?;
            let records: Vec<HoleRecord> = holes
                .iter()
                .zip(&packed)
                .map(|(h, p)| HoleRecord::from_packed(location(h), p))
                .collect();
            summary
                .files_written
                .push(write_dataset(&split_dir, &index.repo_id, &records, kind)?);
        }
        summary.repos.push(repo);
    }
    Ok(summary)
}
