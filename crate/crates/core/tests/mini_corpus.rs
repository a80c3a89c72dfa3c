use std::collections::BTreeMap;
use std::path::PathBuf;

use repoctx::dataset_io::{read_dataset, stats, ContextKind};
use repoctx::hole_gen::{generate_holes, Split, SplitAssignment, DEFAULT_HOLE_CAP};
use repoctx::packing::{count_tokens, PackingConfig, Strategy, PAD_NAME};
use repoctx::pipeline::{build_dataset, pack_holes, scan_corpus, BuildOptions};
use repoctx::prompt_proposals::{PromptProposal, PRIOR_NAME};
use repoctx::repo_model::LineKind;
use serde_json::Value;

fn corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini_corpus")
}

fn manifest() -> Value {
    serde_json::from_str(&std::fs::read_to_string(corpus().join("manifest.json")).unwrap()).unwrap()
}

fn strings(v: &Value) -> Vec<String> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|s| s.as_str().unwrap().to_string())
        .collect()
}

#[test]
fn scan_matches_manifest() {
    let m = manifest();
    let indexes = scan_corpus(&corpus()).unwrap();
    assert_eq!(indexes.len(), 3);
    for index in &indexes {
        let repo = &m["repos"][&index.repo_id];
        assert_eq!(
            index.len() as u64,
            repo["n_files"].as_u64().unwrap(),
            "{}",
            index.repo_id
        );
        for (path, f) in &index.files {
            let code = f
                .facts
                .line_mask
                .iter()
                .filter(|k| **k == LineKind::Code)
                .count() as u64;
            assert_eq!(
                code,
                repo["code_lines_per_file"][path].as_u64().unwrap(),
                "{path}"
            );
            assert_eq!(
                index.sibling_files(path),
                strings(&repo["siblings"][path]),
                "{path}"
            );
        }
        assert!(index.skipped.is_empty());
    }
    let by_id: BTreeMap<_, _> = indexes.iter().map(|i| (i.repo_id.as_str(), i)).collect();
    let split_key = |k: &str| {
        let (repo, path) = k.split_once('/').unwrap();
        (by_id[repo], path.to_string())
    };
    for (k, want) in m["annotations"]["wildcard_imports"].as_object().unwrap() {
        let (index, path) = split_key(k);
        assert_eq!(index.resolve_imports(&path), strings(want), "{k}");
    }
    for (k, want) in m["annotations"]["parent_classes"].as_object().unwrap() {
        let (index, path) = split_key(k);
        assert_eq!(index.parent_class_files(&path), strings(want), "{k}");
    }
    for (k, want) in m["annotations"]["methods"].as_object().unwrap() {
        let (index, path) = split_key(k);
        let names: Vec<String> = index.files[&path]
            .facts
            .method_spans
            .iter()
            .map(|s| s.name.clone())
            .collect();
        assert_eq!(names, strings(want), "{k}");
    }
}

#[test]
fn one_hole_per_code_line() {
    let m = manifest();
    for index in scan_corpus(&corpus()).unwrap() {
        let holes = generate_holes(&index, 7, DEFAULT_HOLE_CAP);
        assert_eq!(
            holes.len() as u64,
            m["repos"][&index.repo_id]["n_code_lines"].as_u64().unwrap()
        );
        assert_eq!(generate_holes(&index, 7, 40).len(), 40);
        for h in &holes {
            let line = index.files[&h.rel_path].source.line(h.line_idx);
            assert_eq!(&line[h.char_start..], h.hole_str);
        }
    }
}

fn split_file() -> SplitAssignment {
    SplitAssignment::parse(&std::fs::read_to_string(corpus().join("splits.txt")).unwrap()).unwrap()
}

#[test]
fn built_tree_round_trips_and_matches_manifest_stats() {
    let m = manifest();
    let out = tempfile::tempdir().unwrap();
    let root = out.path().join("ds");
    let options = BuildOptions {
        seed: 1,
        splits: Some(split_file()),
        ..BuildOptions::default()
    };
    let summary = build_dataset(&corpus(), &root, &options).unwrap();
    assert_eq!(summary.files_written.len(), 9);

    let s = stats(&root).unwrap();
    assert!(s.missing_splits.is_empty());
    for (repo, split) in m["annotations"]["splits"].as_object().unwrap() {
        let split: Split = split.as_str().unwrap().parse().unwrap();
        let r = &m["repos"][repo];
        let got = s.get(split);
        assert_eq!(got.n_repos, 1);
        assert_eq!(got.n_files as u64, r["n_files"].as_u64().unwrap());
        assert_eq!(got.n_holes as u64, r["n_code_lines"].as_u64().unwrap());
    }

    let indexes = scan_corpus(&corpus()).unwrap();
    for index in &indexes {
        let split = split_file().assignment[&index.repo_id];
        let holes = generate_holes(index, options.seed, options.hole_cap);
        for kind in ContextKind::ALL {
            let read = read_dataset(&root.join(split.as_str()), kind).unwrap();
            let packed = pack_holes(index, &holes, kind, &options).unwrap();
            assert_eq!(read.len(), packed.len());
            for (entry, p) in read.iter().zip(&packed) {
                assert_eq!(entry.repo_id, index.repo_id);
                assert_eq!(&entry.to_packed().unwrap(), p);
                assert_eq!(entry.record.repo_contexts.len(), options.packing.n_contexts);
            }
        }
        // sources copied byte for byte
        for (path, f) in &index.files {
            let copy =
                std::fs::read_to_string(root.join(split.as_str()).join(&index.repo_id).join(path))
                    .unwrap();
            assert_eq!(copy, f.source.content);
        }
    }
    assert!(
        build_dataset(&corpus(), &root, &options).is_err(),
        "non-empty output must be refused"
    );
}

#[test]
fn automatic_split_needs_four_repositories() {
    let out = tempfile::tempdir().unwrap();
    let options = BuildOptions {
        min_files: 1,
        ..BuildOptions::default()
    };
    assert!(matches!(
        build_dataset(&corpus(), &out.path().join("x"), &options),
        Err(repoctx::Error::TooFewRepos(3))
    ));
}

#[test]
fn retrieval_kinds_put_prior_last() {
    let options = BuildOptions {
        packing: PackingConfig {
            strategy: Strategy::NtPriorLast,
            n_contexts: 8,
            context_len: 64,
            ..PackingConfig::default()
        },
        bm25_top_k: 3,
        ..BuildOptions::default()
    };
    let index = &scan_corpus(&corpus()).unwrap()[1];
    let holes = generate_holes(index, 3, 25);
    for kind in ContextKind::ALL {
        for (h, p) in holes
            .iter()
            .zip(pack_holes(index, &holes, kind, &options).unwrap())
        {
            assert_eq!(p.rcs.len(), 8);
            assert!(p.rcs.iter().all(|rc| count_tokens(&rc.chunk_text) <= 64));
            let file = &index.files[&h.rel_path].source;
            let prior_nonempty = h.line_idx > 0 || h.char_start > 0;
            let last = p.rcs.last().unwrap();
            if prior_nonempty && count_tokens(&file.content[..h.offset_in(file)]) > 0 {
                assert_eq!(last.ppc_name, PRIOR_NAME, "{kind} {}", h.id());
            }
            let prefix = match kind {
                ContextKind::Pp => None,
                ContextKind::Bm25 => Some("bm25/"),
                ContextKind::RandomNn => Some("random_nn/"),
            };
            for rc in &p.rcs {
                let ok = rc.ppc_name == PRIOR_NAME
                    || rc.ppc_name == PAD_NAME
                    || match prefix {
                        Some(pre) => rc.ppc_name.starts_with(pre),
                        None => rc.ppc_name.parse::<PromptProposal>().is_ok(),
                    };
                assert!(ok, "{kind}: {}", rc.ppc_name);
            }
        }
    }
}
