use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{Fid, ModelConfig, Params, TensorSpec, ToyExample};
use super::vocab::{build_vocab, Vocab, BOS, EOS, NEWLINE, PAD};
use crate::error::{Error, Result};
use crate::eval_harness::{CompletionProvider, MAX_NEW_TOKENS};
use crate::packing::PackedExample;
use crate::util::{derive_seed, rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Examples per step; the step gradient is their mean.
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_size: 8,
            seed: 0,
        }
    }
}

pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, cfg: &TrainConfig) -> Self {
        Self {
            lr: cfg.lr,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: Params,
    /// Mean batch loss of every step, before that step's update.
    pub loss_curve: Vec<f64>,
}

/// Deterministic single-threaded Adam training. Batches walk through
/// reshuffled epochs.
pub fn train(model: &Fid, data: &[ToyExample], cfg: &TrainConfig) -> Result<TrainOutput> {
    train_with(model, data, cfg, |_, _| {})
}

/// Like [`train`], calling `on_step(step, loss)` after every step.
pub fn train_with(
    model: &Fid,
    data: &[ToyExample],
    cfg: &TrainConfig,
    mut on_step: impl FnMut(usize, f64),
) -> Result<TrainOutput> {
    let mut trainer = Trainer::new(model, data, cfg)?;
    while trainer.steps_done() < cfg.steps {
        let loss = trainer.step()?;
        on_step(trainer.steps_done() - 1, loss);
    }
    Ok(trainer.finish())
}

/// Step-by-step form of [`train`], for callers that inspect the model
/// between steps.
pub struct Trainer<'a> {
    model: &'a Fid,
    data: &'a [ToyExample],
    batch_size: usize,
    params: Params,
    adam: Adam,
    order_rng: rand_chacha::ChaCha8Rng,
    order: Vec<usize>,
    grad: Vec<f64>,
    curve: Vec<f64>,
}

impl<'a> Trainer<'a> {
    pub fn new(model: &'a Fid, data: &'a [ToyExample], cfg: &TrainConfig) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Config("training set is empty".into()));
        }
        if cfg.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        for ex in data {
            model.check_example(ex)?;
        }
        let params = model.init(cfg.seed);
        Ok(Self {
            model,
            data,
            batch_size: cfg.batch_size.min(data.len()),
            adam: Adam::new(params.data.len(), cfg),
            grad: vec![0.0; params.data.len()],
            params,
            order_rng: rng(derive_seed(cfg.seed, "batches")),
            order: Vec::new(),
            curve: Vec::new(),
        })
    }

    pub fn steps_done(&self) -> usize {
        self.curve.len()
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn loss_curve(&self) -> &[f64] {
        &self.curve
    }

    /// One Adam update on the next batch; returns the batch's mean loss
    /// before the update.
    pub fn step(&mut self) -> Result<f64> {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
        let bs = self.batch_size;
        let mut loss = 0.0;
        for _ in 0..bs {
            if self.order.is_empty() {
                self.order = (0..self.data.len()).collect();
                self.order.shuffle(&mut self.order_rng);
            }
            let ex = &self.data[self.order.pop().expect("refilled")];
            loss +=
                self.model
                    .accumulate_grad(&self.params, ex, 1.0 / bs as f64, &mut self.grad)?
                    / bs as f64;
        }
        if !loss.is_finite() || self.grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged {
                step: self.curve.len(),
                loss,
            });
        }
        self.adam.step(&mut self.params.data, &self.grad);
        self.curve.push(loss);
        Ok(loss)
    }

    pub fn finish(self) -> TrainOutput {
        TrainOutput {
            params: self.params,
            loss_curve: self.curve,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub ids: Vec<u32>,
    /// True when generation stopped at the token cap rather than at eos or
    /// a newline.
    pub truncated: bool,
}

/// Greedy decoding from bos until eos, a newline, or `max_tokens` tokens.
pub fn greedy_decode(
    model: &Fid,
    params: &Params,
    ex: &ToyExample,
    max_tokens: usize,
) -> Result<Decoded> {
    let mut prefix = vec![BOS];
    let mut ids = Vec::new();
    while ids.len() < max_tokens {
        let logits = model.next_logits(params, ex, &prefix)?;
        let mut best = 0;
        for (j, &v) in logits.iter().enumerate() {
            if v > logits[best] {
                best = j;
            }
        }
        let best = best as u32;
        if best == EOS || best == NEWLINE {
            return Ok(Decoded {
                ids,
                truncated: false,
            });
        }
        ids.push(best);
        prefix.push(best);
    }
    Ok(Decoded {
        ids,
        truncated: true,
    })
}

/// Converts packed examples to model inputs. Each formatted repo context
/// keeps its last `max_rc_tokens` tokens, which hold the chunk's end and the
/// surrounding context.
pub fn encode_packed(vocab: &Vocab, ex: &PackedExample, max_rc_tokens: usize) -> ToyExample {
    let rc_ids = ex
        .rcs
        .iter()
        .map(|rc| {
            let ids = vocab.encode(&rc.formatted_text);
            ids[ids.len().saturating_sub(max_rc_tokens)..].to_vec()
        })
        .collect();
    let mut target_ids = vocab.encode(&ex.target);
    target_ids.truncate(MAX_NEW_TOKENS - 1);
    target_ids.push(EOS);
    ToyExample { rc_ids, target_ids }
}

/// Vocabulary over every repo context and target of `examples`.
pub fn vocab_for(examples: &[PackedExample]) -> Vocab {
    build_vocab(examples.iter().flat_map(|e| {
        e.rcs
            .iter()
            .map(|rc| rc.formatted_text.as_str())
            .chain(std::iter::once(e.target.as_str()))
    }))
}

/// A trained model used as a completion provider.
pub struct FidProvider {
    pub model: Fid,
    pub params: Params,
    pub vocab: Vocab,
}

impl FidProvider {
    pub fn decode(&self, ex: &PackedExample) -> Result<(String, bool)> {
        let toy = encode_packed(&self.vocab, ex, self.model.config.max_rc_tokens);
        let out = greedy_decode(&self.model, &self.params, &toy, MAX_NEW_TOKENS)?;
        Ok((self.vocab.decode(&out.ids), out.truncated))
    }
}

impl CompletionProvider for FidProvider {
    fn name(&self) -> &str {
        "fid"
    }

    fn complete(&self, example: &PackedExample) -> Result<String> {
        Ok(self.decode(example)?.0)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    format: String,
    config: ModelConfig,
    n_params: usize,
    tensors: Vec<TensorSpec>,
}

const PARAMS_BIN: &str = "params.bin";
const PARAMS_MANIFEST: &str = "params.json";
const VOCAB_FILE: &str = "vocab.json";

/// Writes `params.bin` (little-endian f64, layout order), `params.json`
/// (config and tensor shapes) and `vocab.json` into `dir`.
pub fn save_model(dir: &Path, model: &Fid, params: &Params, vocab: &Vocab) -> Result<()> {
    model.check_params(params)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let bin = dir.join(PARAMS_BIN);
    let mut bytes = Vec::with_capacity(params.data.len() * 8);
    for v in &params.data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))?;
    let manifest = Manifest {
        format: "f64-le".into(),
        config: model.config.clone(),
        n_params: model.n_params(),
        tensors: model.tensors().to_vec(),
    };
    write_json(&dir.join(PARAMS_MANIFEST), &manifest)?;
    write_json(&dir.join(VOCAB_FILE), vocab)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::io(path, e.into()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn load_model(dir: &Path) -> Result<FidProvider> {
    let manifest: Manifest = read_json(&dir.join(PARAMS_MANIFEST))?;
    let model = Fid::new(manifest.config)?;
    if model.tensors() != manifest.tensors.as_slice() {
        return Err(Error::Shape(
            "tensor manifest does not match the model layout".into(),
        ));
    }
    let bin = dir.join(PARAMS_BIN);
    let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    if bytes.len() != model.n_params() * 8 {
        return Err(Error::Shape(format!(
            "{} holds {} bytes, expected {}",
            bin.display(),
            bytes.len(),
            model.n_params() * 8
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let vocab: Vocab = read_json(&dir.join(VOCAB_FILE))?;
    Ok(FidProvider {
        model,
        params: Params { data },
        vocab: vocab.reindex(),
    })
}

/// Writes `step,loss` rows.
pub fn write_loss_curve(path: &Path, curve: &[f64]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::from("step,loss\n");
    for (i, l) in curve.iter().enumerate() {
        text.push_str(&format!("{i},{l:.17e}\n"));
    }
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Pads every context of `ex` to exactly `len` ids.
pub fn pad_contexts(ex: &mut ToyExample, len: usize) {
    for rc in &mut ex.rc_ids {
        rc.resize(len, PAD);
    }
}
