//! Exact-match evaluation of completion providers.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset_io::read_ndjson;
use crate::error::{Error, Result};
use crate::packing::{parse_rc, PackedExample};
use crate::prompt_proposals::POST_NAME;

/// Generation budget every provider should respect.
pub const MAX_NEW_TOKENS: usize = 128;

pub trait CompletionProvider: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, example: &PackedExample) -> Result<String>;
}

/// The predicted hole: everything before the first newline.
pub fn predicted_hole(prediction: &str) -> &str {
    prediction.split('\n').next().unwrap_or("")
}

/// Compares the first line of `prediction` to `target`. Unless `strict`,
/// trailing whitespace is ignored on both sides.
pub fn exact_match(prediction: &str, target: &str, strict: bool) -> bool {
    let pred = predicted_hole(prediction);
    if strict {
        pred == target
    } else {
        pred.trim_end() == target.trim_end()
    }
}

/// Standard error of a proportion `p` over `n` trials.
pub fn success_stderr(p: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (p * (1.0 - p) / n as f64).max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub n: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub stderr: f64,
}

impl EvalResult {
    pub fn from_counts(successes: usize, n: usize) -> Self {
        let p = if n == 0 {
            0.0
        } else {
            successes as f64 / n as f64
        };
        Self {
            n,
            successes,
            success_rate: p,
            stderr: success_stderr(p, n),
        }
    }
}

impl fmt::Display for EvalResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} successes={} success_rate={:.3} ± {:.3}",
            self.n, self.successes, self.success_rate, self.stderr
        )
    }
}

/// Per-example outcome, dumped as NDJSON for analysis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub hole_id: String,
    pub target: String,
    pub prediction: Option<String>,
    pub success: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EvalOptions {
    pub strict_bytes: bool,
}

/// Runs `provider` on every example. Provider errors count as failures.
pub fn evaluate(
    provider: &dyn CompletionProvider,
    examples: &[PackedExample],
    options: EvalOptions,
) -> Result<(EvalResult, Vec<Outcome>)> {
    if examples.is_empty() {
        return Err(Error::Config("cannot evaluate an empty dataset".into()));
    }
    let outcomes: Vec<Outcome> = examples
        .par_iter()
        .map(|ex| match provider.complete(ex) {
            Ok(pred) => Outcome {
                hole_id: ex.hole_id.clone(),
                target: ex.target.clone(),
                success: exact_match(&pred, &ex.target, options.strict_bytes),
                prediction: Some(pred),
                error: None,
            },
            Err(e) => {
                log::debug!(
                    "provider `{}` failed on {}: {e}",
                    provider.name(),
                    ex.hole_id
                );
                Outcome {
                    hole_id: ex.hole_id.clone(),
                    target: ex.target.clone(),
                    prediction: None,
                    success: false,
                    error: Some(e.to_string()),
                }
            }
        })
        .collect();
    let failed = outcomes.iter().filter(|o| o.error.is_some()).count();
    if failed > 0 {
        log::warn!(
            "provider `{}` failed on {failed} of {} examples (counted as misses)",
            provider.name(),
            outcomes.len()
        );
    }
    let successes = outcomes.iter().filter(|o| o.success).count();
    Ok((EvalResult::from_counts(successes, outcomes.len()), outcomes))
}

/// Returns the target itself.
#[derive(Debug, Default, Clone, Copy)]
pub struct OracleCopy;

impl CompletionProvider for OracleCopy {
    fn name(&self) -> &str {
        "oracle-copy"
    }

    fn complete(&self, example: &PackedExample) -> Result<String> {
        Ok(example.target.clone())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prediction {
    pub hole_id: String,
    pub prediction: String,
}

/// Serves predictions recorded elsewhere, keyed by hole id.
#[derive(Debug, Default, Clone)]
pub struct Replay {
    predictions: HashMap<String, String>,
}

impl Replay {
    pub fn new(predictions: impl IntoIterator<Item = Prediction>) -> Self {
        Self {
            predictions: predictions
                .into_iter()
                .map(|p| (p.hole_id, p.prediction))
                .collect(),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Ok(Self::new(read_ndjson::<Prediction>(path)?))
    }
}

impl CompletionProvider for Replay {
    fn name(&self) -> &str {
        "replay"
    }

    fn complete(&self, example: &PackedExample) -> Result<String> {
        self.predictions
            .get(&example.hole_id)
            .cloned()
            .ok_or_else(|| Error::Provider(format!("no prediction for {}", example.hole_id)))
    }
}

/// Predicts the first line of the post-lines context, i.e. the line that
/// follows the hole line.
#[derive(Debug, Default, Clone, Copy)]
pub struct PostFirstLine;

impl CompletionProvider for PostFirstLine {
    fn name(&self) -> &str {
        "post-first-line"
    }

    fn complete(&self, example: &PackedExample) -> Result<String> {
        example
            .rcs
            .iter()
            .filter_map(|rc| parse_rc(&rc.formatted_text, &example.surrounding))
            .find(|(name, _)| *name == POST_NAME)
            .map(|(_, chunk)| predicted_hole(chunk).to_string())
            .ok_or_else(|| Error::Provider(format!("{}: no {POST_NAME} context", example.hole_id)))
    }
}

/// Names accepted by [`builtin_provider`].
pub const BUILTIN_PROVIDERS: [&str; 3] = ["oracle-copy", "replay:<file>", "post-first-line"];

/// Resolves a provider spec such as `oracle-copy` or `replay:preds.json`.
pub fn builtin_provider(spec: &str) -> Result<Box<dyn CompletionProvider>> {
    let norm = |s: &str| s.replace('_', "-").to_ascii_lowercase();
    if let Some((kind, arg)) = spec.split_once(':') {
        if norm(kind) == "replay" {
            return Ok(Box::new(Replay::from_file(Path::new(arg))?));
        }
    }
    match norm(spec).as_str() {
        "oracle-copy" => Ok(Box::new(OracleCopy)),
        "post-first-line" => Ok(Box::new(PostFirstLine)),
        _ => Err(Error::Config(format!(
            "unknown provider `{spec}` (expected one of {})",
            BUILTIN_PROVIDERS.join(", ")
        ))),
    }
}
