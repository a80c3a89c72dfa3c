use std::fmt;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use repoctx::dataset_io::{read_dataset, stats, write_ndjson, ContextKind};
use repoctx::eval_harness::{
    builtin_provider, evaluate, CompletionProvider, EvalOptions, BUILTIN_PROVIDERS,
};
use repoctx::fid::{
    encode_packed, load_model, save_model, train_with, vocab_for, Fid, FidProvider, ModelConfig,
    TrainConfig,
};
use repoctx::hole_gen::{generate_holes, SplitAssignment};
use repoctx::packing::{PackedExample, PackingConfig};
use repoctx::pipeline::{build_dataset, pack_holes, scan_corpus, BuildOptions};
use repoctx::prompt_proposals::{default_ranking, parse_ranking};
use repoctx::repo_model::{scan_repo, RepoIndex};
use repoctx::retrieval::RandomNnParams;
use repoctx::util::{derive_seed, rng};
use serde::Serialize;

use crate::args::*;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

impl From<repoctx::Error> for CliError {
    fn from(e: repoctx::Error) -> Self {
        match e {
            repoctx::Error::Config(_) | repoctx::Error::UnknownProposals(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

type CliResult<T = ()> = Result<T, CliError>;

struct Output {
    path: Option<PathBuf>,
    w: BufWriter<Box<dyn Write>>,
}

impl Output {
    fn open(path: Option<&Path>) -> CliResult<Self> {
        let w: Box<dyn Write> = match path {
            Some(p) => {
                if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(parent).map_err(io_err(parent))?;
                }
                Box::new(fs::File::create(p).map_err(io_err(p))?)
            }
            None => Box::new(io::stdout().lock()),
        };
        Ok(Self {
            path: path.map(Path::to_path_buf),
            w: BufWriter::new(w),
        })
    }

    fn fail(&self, e: impl fmt::Display) -> CliError {
        let target = self
            .path
            .as_ref()
            .map_or("standard output".to_string(), |p| p.display().to_string());
        CliError::Data(format!("{target}: {e}"))
    }

    fn line(&mut self, text: &str) -> CliResult {
        writeln!(self.w, "{text}").map_err(|e| self.fail(e))
    }

    fn json<T: Serialize>(&mut self, value: &T) -> CliResult {
        let text = serde_json::to_string(value).map_err(|e| self.fail(e))?;
        self.line(&text)
    }

    fn finish(mut self) -> CliResult {
        self.w.flush().map_err(|e| self.fail(e))
    }
}

fn load_repos(input: &InputArgs) -> CliResult<Vec<RepoIndex>> {
    if input.corpus {
        Ok(scan_corpus(&input.root)?)
    } else {
        Ok(vec![scan_repo(&input.root)?])
    }
}

#[derive(Serialize)]
struct ScanSummary<'a> {
    repo_id: &'a str,
    n_files: usize,
    n_lines: usize,
    skipped: &'a [String],
}

pub fn scan(a: &ScanArgs) -> CliResult {
    let repos = load_repos(&a.input)?;
    let mut out = Output::open(a.output.out.as_deref())?;
    if !a.json {
        out.line(&format!(
            "{:<24}{:>8}{:>10}{:>9}",
            "repository", "files", "lines", "skipped"
        ))?;
    }
    for r in &repos {
        let s = ScanSummary {
            repo_id: &r.repo_id,
            n_files: r.len(),
            n_lines: r.total_lines(),
            skipped: &r.skipped,
        };
        if a.json {
            out.json(&s)?;
        } else {
            out.line(&format!(
                "{:<24}{:>8}{:>10}{:>9}",
                s.repo_id,
                s.n_files,
                s.n_lines,
                s.skipped.len()
            ))?;
            for path in s.skipped {
                out.line(&format!("  skipped: {path}"))?;
            }
        }
    }
    out.finish()
}

pub fn holes(a: &HolesArgs, seed: u64) -> CliResult {
    let mut out = Output::open(a.output.out.as_deref())?;
    for r in load_repos(&a.input)? {
        for h in generate_holes(&r, seed, a.cap) {
            out.json(&h)?;
        }
    }
    out.finish()
}

fn build_options(p: &PackingArgs, seed: u64) -> CliResult<BuildOptions> {
    let ranking = match &p.ranking {
        Some(path) => parse_ranking(&fs::read_to_string(path).map_err(io_err(path))?)?,
        None => default_ranking(),
    };
    let packing = PackingConfig {
        strategy: p.strategy.into(),
        n_contexts: p.n_contexts,
        context_len: p.context_len,
        include_surrounding: !p.no_surrounding,
        repeat_single: p.repeat_single.clone(),
        seed,
    };
    packing.validate()?;
    Ok(BuildOptions {
        seed,
        hole_cap: p.hole_cap,
        bm25_top_k: p.bm25_top_k.unwrap_or(p.n_contexts),
        random_nn: RandomNnParams {
            chunk_lines: p.random_nn_chunk_lines,
            n_candidates: p.random_nn_candidates,
            k: p.n_contexts,
            seed,
        },
        packing,
        ranking,
        ..BuildOptions::default()
    })
}

pub fn build(a: &BuildArgs, seed: u64) -> CliResult {
    let mut options = build_options(&a.packing, seed)?;
    options.kinds = a.kinds.iter().map(|&k| k.into()).collect();
    options.kinds.dedup();
    options.min_files = a.min_files;
    if let Some(path) = &a.splits {
        options.splits = Some(SplitAssignment::parse(
            &fs::read_to_string(path).map_err(io_err(path))?,
        )?);
    }
    if a.force && a.out.exists() {
        fs::remove_dir_all(&a.out).map_err(io_err(&a.out))?;
    }
    let summary = build_dataset(&a.corpus, &a.out, &options)?;
    for r in &summary.repos {
        match r.split {
            Some(s) => println!(
                "{:<24} {:<6} files={:<6} holes={}",
                r.repo_id, s, r.n_files, r.n_holes
            ),
            None => println!("{:<24} skipped (no split)", r.repo_id),
        }
    }
    println!(
        "wrote {} context files under {}",
        summary.files_written.len(),
        a.out.display()
    );
    Ok(())
}

pub fn pack(a: &PackArgs, seed: u64) -> CliResult {
    let mut options = build_options(&a.packing, seed)?;
    let kind: ContextKind = a.kind.into();
    options.kinds = vec![kind];
    let mut out = Output::open(a.output.out.as_deref())?;
    for r in load_repos(&a.input)? {
        let holes = generate_holes(&r, seed, options.hole_cap);
        for p in pack_holes(&r, &holes, kind, &options)? {
            out.json(&p)?;
        }
    }
    out.finish()
}

fn load_packed(split_dir: &Path, kind: ContextKind) -> CliResult<Vec<PackedExample>> {
    let entries = read_dataset(split_dir, kind)?;
    Ok(entries
        .iter()
        .map(|e| e.to_packed())
        .collect::<repoctx::Result<_>>()?)
}

fn provider(spec: &str) -> CliResult<Box<dyn CompletionProvider>> {
    if let Some(dir) = spec.strip_prefix("fid:") {
        return Ok(Box::new(load_model(Path::new(dir))?));
    }
    builtin_provider(spec).map_err(|e| match e {
        repoctx::Error::Config(_) => CliError::Usage(format!("{e}; or fid:<model dir>")),
        other => other.into(),
    })
}

pub fn eval(a: &EvalArgs) -> CliResult {
    let provider = provider(&a.provider)?;
    let examples = load_packed(&a.split_dir, a.kind.into())?;
    if examples.is_empty() {
        return Err(CliError::Data(format!(
            "no {} records under {}",
            ContextKind::from(a.kind).file_name(),
            a.split_dir.display()
        )));
    }
    let options = EvalOptions {
        strict_bytes: a.strict_bytes,
    };
    let (result, outcomes) = evaluate(provider.as_ref(), &examples, options)?;
    println!(
        "{:<18}{:>8}{:>11}{:>15}{:>10}",
        "provider", "n", "successes", "success rate", "stderr"
    );
    println!(
        "{:<18}{:>8}{:>11}{:>15.3}{:>10.3}",
        provider.name(),
        result.n,
        result.successes,
        result.success_rate,
        result.stderr
    );
    if let Some(path) = &a.outcomes {
        write_ndjson(path, &outcomes)?;
    }
    if let Some(path) = &a.summary {
        let mut out = Output::open(Some(path))?;
        out.json(&result)?;
        out.finish()?;
    }
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary {
    n_examples: usize,
    steps: usize,
    final_loss: f64,
    n_params: usize,
    train_successes: usize,
    train_success_rate: f64,
}

pub fn train_toy(a: &TrainArgs, seed: u64) -> CliResult {
    let mut examples = load_packed(&a.split_dir, a.kind.into())?;
    if examples.is_empty() {
        return Err(CliError::Data(format!(
            "no records under {}",
            a.split_dir.display()
        )));
    }
    if a.examples > 0 && a.examples < examples.len() {
        let mut keep = sample(
            &mut rng(derive_seed(seed, "examples")),
            examples.len(),
            a.examples,
        )
        .into_vec();
        keep.sort_unstable();
        examples = keep.into_iter().map(|i| examples[i].clone()).collect();
    }
    let n_contexts = examples[0].rcs.len();
    if n_contexts == 0 || examples.iter().any(|e| e.rcs.len() != n_contexts) {
        return Err(CliError::Data(
            "records must all carry the same non-zero number of repo contexts".into(),
        ));
    }
    let vocab = vocab_for(&examples);
    let config = ModelConfig {
        vocab_size: vocab.len(),
        d_model: a.d_model,
        n_heads: a.heads,
        d_ff: a.d_ff,
        n_enc_layers: a.enc_layers,
        n_dec_layers: a.dec_layers,
        max_rc_tokens: a.max_rc_tokens,
        n_contexts,
        cross_position_bias: !a.no_cross_bias,
    };
    let model = Fid::new(config)?;
    let toys: Vec<_> = examples
        .iter()
        .map(|e| encode_packed(&vocab, e, a.max_rc_tokens))
        .collect();
    let cfg = TrainConfig {
        steps: a.steps,
        lr: a.lr,
        batch_size: a.batch_size,
        seed,
        ..TrainConfig::default()
    };
    let trained = train_with(&model, &toys, &cfg, |step, loss| {
        if step % 100 == 0 {
            log::info!("step {step} loss {loss:.6}");
        }
    })?;
    save_model(&a.out, &model, &trained.params, &vocab)?;
    repoctx::fid::write_loss_curve(&a.out.join("loss.csv"), &trained.loss_curve)?;

    let provider = FidProvider {
        model,
        params: trained.params,
        vocab,
    };
    let (result, _) = evaluate(&provider, &examples, EvalOptions::default())?;
    let summary = TrainSummary {
        n_examples: examples.len(),
        steps: a.steps,
        final_loss: trained.loss_curve.last().copied().unwrap_or(f64::NAN),
        n_params: provider.model.n_params(),
        train_successes: result.successes,
        train_success_rate: result.success_rate,
    };
    let mut out = Output::open(Some(&a.out.join("train_summary.json")))?;
    out.json(&summary)?;
    out.finish()?;
    println!(
        "trained {} params on {} examples for {} steps; final loss {:.6}; train exact match {}",
        summary.n_params, summary.n_examples, summary.steps, summary.final_loss, result
    );
    Ok(())
}

pub fn stats_cmd(a: &StatsArgs) -> CliResult {
    let s = stats(&a.root)?;
    if a.json {
        println!(
            "{}",
            serde_json::to_string(&s).map_err(|e| CliError::Data(e.to_string()))?
        );
    } else {
        print!("{s}");
    }
    Ok(())
}

pub fn provider_names() -> String {
    format!("{}, fid:<model dir>", BUILTIN_PROVIDERS.join(", "))
}
