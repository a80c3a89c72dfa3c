use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::vocab::{BOS, PAD};
use crate::error::{Error, Result};
use crate::util::rng;

const LN_EPS: f64 = 1e-5;
const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub n_enc_layers: usize,
    pub n_dec_layers: usize,
    /// Per-context token budget; longer contexts are rejected by `forward`.
    pub max_rc_tokens: usize,
    pub n_contexts: usize,
    /// Adds a learned bias over concatenated encoder positions to every
    /// cross-attention score, making the decoder sensitive to context order.
    pub cross_position_bias: bool,
}

impl ModelConfig {
    pub fn new(vocab_size: usize, n_contexts: usize, max_rc_tokens: usize) -> Self {
        Self {
            vocab_size,
            d_model: 64,
            n_heads: 2,
            d_ff: 256,
            n_enc_layers: 1,
            n_dec_layers: 1,
            max_rc_tokens,
            n_contexts,
            cross_position_bias: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return bad(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            ));
        }
        if !self.d_model.is_multiple_of(2) {
            return bad("d_model must be even for sinusoidal positions".into());
        }
        if self.vocab_size <= BOS as usize + 1
            || self.n_contexts == 0
            || self.max_rc_tokens == 0
            || self.d_ff == 0
        {
            return bad(format!("degenerate model config {self:?}"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, Copy)]
struct Attn {
    wq: usize,
    bq: usize,
    wk: usize,
    bk: usize,
    wv: usize,
    bv: usize,
    wo: usize,
    bo: usize,
}

#[derive(Debug, Clone, Copy)]
struct Norm {
    g: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy)]
struct Ffn {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

#[derive(Debug, Clone, Copy)]
struct EncLayer {
    attn: Attn,
    ln1: Norm,
    ffn: Ffn,
    ln2: Norm,
}

#[derive(Debug, Clone, Copy)]
struct DecLayer {
    self_attn: Attn,
    ln1: Norm,
    cross: Attn,
    ln2: Norm,
    ffn: Ffn,
    ln3: Norm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Init {
    Normal,
    Zeros,
    Ones,
}

struct LayoutBuilder {
    tensors: Vec<TensorSpec>,
    inits: Vec<Init>,
    len: usize,
}

impl LayoutBuilder {
    fn add(&mut self, name: String, shape: &[usize], init: Init) -> usize {
        let spec = TensorSpec {
            name,
            shape: shape.to_vec(),
            offset: self.len,
        };
        self.len += spec.len();
        self.tensors.push(spec);
        self.inits.push(init);
        self.tensors.len() - 1
    }

    fn attn(&mut self, p: &str, d: usize) -> Attn {
        let mut w = |n: &str| self.add(format!("{p}.{n}"), &[d, d], Init::Normal);
        let (wq, wk, wv, wo) = (w("wq"), w("wk"), w("wv"), w("wo"));
        let mut b = |n: &str| self.add(format!("{p}.{n}"), &[d], Init::Zeros);
        let (bq, bk, bv, bo) = (b("bq"), b("bk"), b("bv"), b("bo"));
        Attn {
            wq,
            bq,
            wk,
            bk,
            wv,
            bv,
            wo,
            bo,
        }
    }

    fn norm(&mut self, p: &str, d: usize) -> Norm {
        Norm {
            g: self.add(format!("{p}.g"), &[d], Init::Ones),
            b: self.add(format!("{p}.b"), &[d], Init::Zeros),
        }
    }

    fn ffn(&mut self, p: &str, d: usize, f: usize) -> Ffn {
        Ffn {
            w1: self.add(format!("{p}.w1"), &[d, f], Init::Normal),
            b1: self.add(format!("{p}.b1"), &[f], Init::Zeros),
            w2: self.add(format!("{p}.w2"), &[f, d], Init::Normal),
            b2: self.add(format!("{p}.b2"), &[d], Init::Zeros),
        }
    }
}

/// Parameters as one flat buffer; the owning [`Fid`] knows the layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub data: Vec<f64>,
}

impl Params {
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// One training or inference instance in token ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyExample {
    /// `n_contexts` sequences of at most `max_rc_tokens` ids; pad ids are
    /// masked out.
    pub rc_ids: Vec<Vec<u32>>,
    /// Labels, normally ending in eos. Pad labels are ignored by the loss.
    pub target_ids: Vec<u32>,
}

/// Attention weights and encoder states of one forward pass, for inspection.
#[derive(Debug, Clone)]
pub struct Trace {
    pub logits: Array2<f64>,
    /// `n_contexts * max_rc_tokens` rows; rows of masked positions are zero.
    pub encoder_states: Array2<f64>,
    pub encoder_valid: Vec<bool>,
    /// `[context][layer][head]`, absent for fully padded contexts.
    pub encoder_attention: Vec<Vec<Vec<Array2<f64>>>>,
    /// `[layer][head]`
    pub decoder_self_attention: Vec<Vec<Array2<f64>>>,
    /// `[layer][head]`, columns indexed by concatenated encoder position.
    pub cross_attention: Vec<Vec<Array2<f64>>>,
}

/// Architecture plus parameter layout of the fusion-in-decoder model.
#[derive(Debug, Clone)]
pub struct Fid {
    pub config: ModelConfig,
    tensors: Vec<TensorSpec>,
    inits: Vec<Init>,
    n_params: usize,
    emb: usize,
    enc: Vec<EncLayer>,
    dec: Vec<DecLayer>,
    cross_bias: Option<usize>,
    w_out: usize,
    b_out: usize,
}

fn gelu(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
    0.5 * x * (1.0 + (C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4;
    let t = (C * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * C * (1.0 + 3.0 * 0.044715 * x * x)
}

/// Sinusoidal position table with `n` rows.
pub fn sinusoidal(n: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |(t, j)| {
        let angle = t as f64 / 10000f64.powf((2 * (j / 2)) as f64 / d as f64);
        if j % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

struct NormCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

struct FfnCache {
    x: Array2<f64>,
    pre: Array2<f64>,
    h: Array2<f64>,
}

struct AttnCache {
    xq: Array2<f64>,
    xkv: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    a: Vec<Array2<f64>>,
    o: Array2<f64>,
}

struct EncCache {
    attn: AttnCache,
    ln1: NormCache,
    ffn: FfnCache,
    ln2: NormCache,
}

struct DecCache {
    self_attn: AttnCache,
    ln1: NormCache,
    cross: AttnCache,
    ln2: NormCache,
    ffn: FfnCache,
    ln3: NormCache,
}

struct RcPass {
    ids: Vec<u32>,
    layers: Vec<EncCache>,
}

struct Pass {
    rcs: Vec<Option<RcPass>>,
    enc: Array2<f64>,
    enc_valid: Vec<bool>,
    dec_ids: Vec<u32>,
    dec: Vec<DecCache>,
    dec_out: Array2<f64>,
    logits: Array2<f64>,
}

fn norm_forward(
    x: &Array2<f64>,
    g: ArrayView1<f64>,
    b: ArrayView1<f64>,
) -> (Array2<f64>, NormCache) {
    let mean = x.mean_axis(Axis(1)).expect("non-empty rows");
    let xc = x - &mean.insert_axis(Axis(1));
    let var = xc
        .mapv(|v| v * v)
        .mean_axis(Axis(1))
        .expect("non-empty rows");
    let inv_std = var.mapv(|v| 1.0 / (v + LN_EPS).sqrt());
    let xhat = xc * inv_std.view().insert_axis(Axis(1));
    let y = &xhat * &g + b;
    (y, NormCache { xhat, inv_std })
}

fn norm_backward(
    dy: &Array2<f64>,
    c: &NormCache,
    g: ArrayView1<f64>,
) -> (Array2<f64>, Array1<f64>, Array1<f64>) {
    let dg = (dy * &c.xhat).sum_axis(Axis(0));
    let db = dy.sum_axis(Axis(0));
    let dxhat = dy * &g;
    let d = dy.ncols() as f64;
    let s1 = dxhat.sum_axis(Axis(1)).insert_axis(Axis(1));
    let s2 = (&dxhat * &c.xhat).sum_axis(Axis(1)).insert_axis(Axis(1));
    let scale = (&c.inv_std / d).insert_axis(Axis(1));
    let dx = (dxhat * d - &s1 - &c.xhat * &s2) * &scale;
    (dx, dg, db)
}

/// Accumulates gradients into a flat buffer with the model's layout.
struct GradSink<'a> {
    model: &'a Fid,
    g: &'a mut [f64],
}

impl GradSink<'_> {
    fn m(&mut self, i: usize, x: &Array2<f64>) {
        let mut view = self.model.m_mut(self.g, i);
        view += x;
    }

    fn v(&mut self, i: usize, x: &Array1<f64>) {
        let mut view = self.model.v_mut(self.g, i);
        view += x;
    }
}

impl Fid {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let d = config.d_model;
        let f = config.d_ff;
        let v = config.vocab_size;
        let mut b = LayoutBuilder {
            tensors: Vec::new(),
            inits: Vec::new(),
            len: 0,
        };
        let emb = b.add("emb".into(), &[v, d], Init::Normal);
        let enc = (0..config.n_enc_layers)
            .map(|i| EncLayer {
                attn: b.attn(&format!("enc{i}.attn"), d),
                ln1: b.norm(&format!("enc{i}.ln1"), d),
                ffn: b.ffn(&format!("enc{i}.ffn"), d, f),
                ln2: b.norm(&format!("enc{i}.ln2"), d),
            })
            .collect();
        let dec = (0..config.n_dec_layers)
            .map(|i| DecLayer {
                self_attn: b.attn(&format!("dec{i}.self"), d),
                ln1: b.norm(&format!("dec{i}.ln1"), d),
                cross: b.attn(&format!("dec{i}.cross"), d),
                ln2: b.norm(&format!("dec{i}.ln2"), d),
                ffn: b.ffn(&format!("dec{i}.ffn"), d, f),
                ln3: b.norm(&format!("dec{i}.ln3"), d),
            })
            .collect();
        let cross_bias = config.cross_position_bias.then(|| {
            b.add(
                "cross_bias".into(),
                &[config.n_contexts * config.max_rc_tokens],
                Init::Normal,
            )
        });
        let w_out = b.add("out.w".into(), &[d, v], Init::Normal);
        let b_out = b.add("out.b".into(), &[v], Init::Zeros);
        Ok(Self {
            config,
            tensors: b.tensors,
            inits: b.inits,
            n_params: b.len,
            emb,
            enc,
            dec,
            cross_bias,
            w_out,
            b_out,
        })
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn tensors(&self) -> &[TensorSpec] {
        &self.tensors
    }

    pub fn tensor(&self, name: &str) -> Option<&TensorSpec> {
        self.tensors.iter().find(|t| t.name == name)
    }

    /// Seeded initialization: weights and embeddings from N(0, 0.02²),
    /// biases zero, norm gains one.
    pub fn init(&self, seed: u64) -> Params {
        let mut r = rng(seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let mut data = vec![0.0; self.n_params];
        for (t, init) in self.tensors.iter().zip(&self.inits) {
            for x in &mut data[t.range()] {
                *x = match init {
                    Init::Normal => normal.sample(&mut r),
                    Init::Zeros => 0.0,
                    Init::Ones => 1.0,
                };
            }
        }
        Params { data }
    }

    pub fn check_params(&self, p: &Params) -> Result<()> {
        if p.data.len() != self.n_params {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.n_params,
                p.data.len()
            )));
        }
        Ok(())
    }

    fn m<'a>(&self, data: &'a [f64], i: usize) -> ArrayView2<'a, f64> {
        let t = &self.tensors[i];
        ArrayView2::from_shape((t.shape[0], t.shape[1]), &data[t.range()]).expect("layout")
    }

    fn v<'a>(&self, data: &'a [f64], i: usize) -> ArrayView1<'a, f64> {
        ArrayView1::from(&data[self.tensors[i].range()])
    }

    fn m_mut<'a>(&self, data: &'a mut [f64], i: usize) -> ArrayViewMut2<'a, f64> {
        let t = &self.tensors[i];
        ArrayViewMut2::from_shape((t.shape[0], t.shape[1]), &mut data[t.range()]).expect("layout")
    }

    fn v_mut<'a>(&self, data: &'a mut [f64], i: usize) -> ArrayViewMut1<'a, f64> {
        ArrayViewMut1::from(&mut data[self.tensors[i].range()])
    }

    /// Validates ids and lengths before any arithmetic.
    pub fn check_example(&self, ex: &ToyExample) -> Result<()> {
        let c = &self.config;
        if ex.rc_ids.len() != c.n_contexts {
            return Err(Error::Shape(format!(
                "expected {} contexts, got {}",
                c.n_contexts,
                ex.rc_ids.len()
            )));
        }
        for (i, rc) in ex.rc_ids.iter().enumerate() {
            if rc.len() > c.max_rc_tokens {
                return Err(Error::Shape(format!(
                    "context {i} has {} tokens, limit {}",
                    rc.len(),
                    c.max_rc_tokens
                )));
            }
        }
        let v = c.vocab_size as u32;
        if let Some(bad) = ex
            .rc_ids
            .iter()
            .flatten()
            .chain(&ex.target_ids)
            .find(|&&id| id >= v)
        {
            return Err(Error::Shape(format!(
                "token id {bad} outside vocabulary of {v}"
            )));
        }
        Ok(())
    }

    fn embed(&self, p: &[f64], ids: &[u32]) -> Array2<f64> {
        let d = self.config.d_model;
        let emb = self.m(p, self.emb);
        let scale = (d as f64).sqrt();
        let mut x = sinusoidal(ids.len(), d);
        for (t, &id) in ids.iter().enumerate() {
            x.row_mut(t).scaled_add(scale, &emb.row(id as usize));
        }
        x
    }

    fn embed_backward(&self, sink: &mut GradSink<'_>, ids: &[u32], dx: &Array2<f64>) {
        let scale = (self.config.d_model as f64).sqrt();
        let mut demb = self.m_mut(sink.g, self.emb);
        for (t, &id) in ids.iter().enumerate() {
            demb.row_mut(id as usize).scaled_add(scale, &dx.row(t));
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn attn_forward(
        &self,
        p: &[f64],
        ix: &Attn,
        xq: &Array2<f64>,
        xkv: &Array2<f64>,
        key_valid: &[bool],
        causal: bool,
        bias: Option<ArrayView1<f64>>,
    ) -> (Array2<f64>, AttnCache) {
        let d = self.config.d_model;
        let heads = self.config.n_heads;
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let q = xq.dot(&self.m(p, ix.wq)) + self.v(p, ix.bq);
        let k = xkv.dot(&self.m(p, ix.wk)) + self.v(p, ix.bk);
        let v = xkv.dot(&self.m(p, ix.wv)) + self.v(p, ix.bv);
        let mut o = Array2::zeros((xq.nrows(), d));
        let mut weights = Vec::with_capacity(heads);
        for h in 0..heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let mut sc = q.slice(cols).dot(&k.slice(cols).t()) * scale;
            for (i, mut row) in sc.rows_mut().into_iter().enumerate() {
                let allowed = |j: usize| key_valid[j] && (!causal || j <= i);
                let mut max = f64::NEG_INFINITY;
                for j in 0..row.len() {
                    if allowed(j) {
                        row[j] += bias.as_ref().map_or(0.0, |b| b[j]);
                        max = max.max(row[j]);
                    }
                }
                if max == f64::NEG_INFINITY {
                    row.fill(0.0);
                    continue;
                }
                let mut sum = 0.0;
                for j in 0..row.len() {
                    row[j] = if allowed(j) {
                        (row[j] - max).exp()
                    } else {
                        0.0
                    };
                    sum += row[j];
                }
                row /= sum;
            }
            o.slice_mut(cols).assign(&sc.dot(&v.slice(cols)));
            weights.push(sc);
        }
        let y = o.dot(&self.m(p, ix.wo)) + self.v(p, ix.bo);
        let cache = AttnCache {
            xq: xq.clone(),
            xkv: xkv.clone(),
            q,
            k,
            v,
            a: weights,
            o,
        };
        (y, cache)
    }

    /// Returns gradients with respect to the query and key/value inputs.
    fn attn_backward(
        &self,
        p: &[f64],
        sink: &mut GradSink<'_>,
        ix: &Attn,
        c: &AttnCache,
        dy: &Array2<f64>,
        mut dbias: Option<&mut Array1<f64>>,
    ) -> (Array2<f64>, Array2<f64>) {
        let d = self.config.d_model;
        let heads = self.config.n_heads;
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        sink.m(ix.wo, &c.o.t().dot(dy));
        sink.v(ix.bo, &dy.sum_axis(Axis(0)));
        let d_o = dy.dot(&self.m(p, ix.wo).t());
        let mut dq = Array2::zeros(c.q.raw_dim());
        let mut dk = Array2::zeros(c.k.raw_dim());
        let mut dv = Array2::zeros(c.v.raw_dim());
        for h in 0..heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let a = &c.a[h];
            let doh = d_o.slice(cols);
            dv.slice_mut(cols).assign(&a.t().dot(&doh));
            let da = doh.dot(&c.v.slice(cols).t());
            let row_dot = (&da * a).sum_axis(Axis(1)).insert_axis(Axis(1));
            let ds = a * &(da - &row_dot);
            if let Some(db) = dbias.as_deref_mut() {
                *db += &ds.sum_axis(Axis(0));
            }
            dq.slice_mut(cols)
                .assign(&(ds.dot(&c.k.slice(cols)) * scale));
            dk.slice_mut(cols)
                .assign(&(ds.t().dot(&c.q.slice(cols)) * scale));
        }
        sink.m(ix.wq, &c.xq.t().dot(&dq));
        sink.v(ix.bq, &dq.sum_axis(Axis(0)));
        sink.m(ix.wk, &c.xkv.t().dot(&dk));
        sink.v(ix.bk, &dk.sum_axis(Axis(0)));
        sink.m(ix.wv, &c.xkv.t().dot(&dv));
        sink.v(ix.bv, &dv.sum_axis(Axis(0)));
        let dxq = dq.dot(&self.m(p, ix.wq).t());
        let dxkv = dk.dot(&self.m(p, ix.wk).t()) + dv.dot(&self.m(p, ix.wv).t());
        (dxq, dxkv)
    }

    fn ffn_forward(&self, p: &[f64], ix: &Ffn, x: &Array2<f64>) -> (Array2<f64>, FfnCache) {
        let pre = x.dot(&self.m(p, ix.w1)) + self.v(p, ix.b1);
        let h = pre.mapv(gelu);
        let y = h.dot(&self.m(p, ix.w2)) + self.v(p, ix.b2);
        (
            y,
            FfnCache {
                x: x.clone(),
                pre,
                h,
            },
        )
    }

    fn ffn_backward(
        &self,
        p: &[f64],
        sink: &mut GradSink<'_>,
        ix: &Ffn,
        c: &FfnCache,
        dy: &Array2<f64>,
    ) -> Array2<f64> {
        sink.m(ix.w2, &c.h.t().dot(dy));
        sink.v(ix.b2, &dy.sum_axis(Axis(0)));
        let dh = dy.dot(&self.m(p, ix.w2).t());
        let dpre = dh * &c.pre.mapv(gelu_grad);
        sink.m(ix.w1, &c.x.t().dot(&dpre));
        sink.v(ix.b1, &dpre.sum_axis(Axis(0)));
        dpre.dot(&self.m(p, ix.w1).t())
    }

    fn norm(&self, p: &[f64], ix: &Norm, x: &Array2<f64>) -> (Array2<f64>, NormCache) {
        norm_forward(x, self.v(p, ix.g), self.v(p, ix.b))
    }

    fn norm_back(
        &self,
        p: &[f64],
        sink: &mut GradSink<'_>,
        ix: &Norm,
        c: &NormCache,
        dy: &Array2<f64>,
    ) -> Array2<f64> {
        let (dx, dg, db) = norm_backward(dy, c, self.v(p, ix.g));
        sink.v(ix.g, &dg);
        sink.v(ix.b, &db);
        dx
    }

    fn run(&self, p: &Params, ex: &ToyExample, dec_ids: &[u32]) -> Result<Pass> {
        self.check_params(p)?;
        self.check_example(ex)?;
        let p = p.data.as_slice();
        let c = &self.config;
        let l = c.max_rc_tokens;
        let mut enc = Array2::zeros((c.n_contexts * l, c.d_model));
        let mut enc_valid = vec![false; c.n_contexts * l];
        let mut rcs = Vec::with_capacity(c.n_contexts);
        for (i, ids) in ex.rc_ids.iter().enumerate() {
            let valid: Vec<bool> = ids.iter().map(|&t| t != PAD).collect();
            if !valid.iter().any(|&v| v) {
                rcs.push(None);
                continue;
            }
            let mut x = self.embed(p, ids);
            let mut layers = Vec::with_capacity(self.enc.len());
            for layer in &self.enc {
                let (a, attn) = self.attn_forward(p, &layer.attn, &x, &x, &valid, false, None);
                let (x1, ln1) = self.norm(p, &layer.ln1, &(&x + &a));
                let (f, ffn) = self.ffn_forward(p, &layer.ffn, &x1);
                let (x2, ln2) = self.norm(p, &layer.ln2, &(&x1 + &f));
                layers.push(EncCache {
                    attn,
                    ln1,
                    ffn,
                    ln2,
                });
                x = x2;
            }
            for (t, &ok) in valid.iter().enumerate() {
                if ok {
                    enc.row_mut(i * l + t).assign(&x.row(t));
                    enc_valid[i * l + t] = true;
                }
            }
            rcs.push(Some(RcPass {
                ids: ids.clone(),
                layers,
            }));
        }

        let bias = self.cross_bias.map(|b| self.v(p, b));
        let all_valid = vec![true; dec_ids.len()];
        let mut x = self.embed(p, dec_ids);
        let mut dec = Vec::with_capacity(self.dec.len());
        for layer in &self.dec {
            let (a, self_attn) =
                self.attn_forward(p, &layer.self_attn, &x, &x, &all_valid, true, None);
            let (x1, ln1) = self.norm(p, &layer.ln1, &(&x + &a));
            let (ca, cross) =
                self.attn_forward(p, &layer.cross, &x1, &enc, &enc_valid, false, bias);
            let (x2, ln2) = self.norm(p, &layer.ln2, &(&x1 + &ca));
            let (f, ffn) = self.ffn_forward(p, &layer.ffn, &x2);
            let (x3, ln3) = self.norm(p, &layer.ln3, &(&x2 + &f));
            dec.push(DecCache {
                self_attn,
                ln1,
                cross,
                ln2,
                ffn,
                ln3,
            });
            x = x3;
        }
        let logits = x.dot(&self.m(p, self.w_out)) + self.v(p, self.b_out);
        Ok(Pass {
            rcs,
            enc,
            enc_valid,
            dec_ids: dec_ids.to_vec(),
            dec,
            dec_out: x,
            logits,
        })
    }

    /// Decoder input for teacher forcing: bos followed by all labels but the
    /// last.
    fn teacher_input(target: &[u32]) -> Vec<u32> {
        std::iter::once(BOS)
            .chain(target.iter().copied().take(target.len().saturating_sub(1)))
            .collect()
    }

    /// Logits for every target position under teacher forcing.
    pub fn forward(&self, p: &Params, ex: &ToyExample) -> Result<Array2<f64>> {
        Ok(self
            .run(p, ex, &Self::teacher_input(&ex.target_ids))?
            .logits)
    }

    /// Forward pass keeping attention weights and encoder states.
    pub fn trace(&self, p: &Params, ex: &ToyExample) -> Result<Trace> {
        let pass = self.run(p, ex, &Self::teacher_input(&ex.target_ids))?;
        Ok(Trace {
            encoder_attention: pass
                .rcs
                .iter()
                .map(|rc| {
                    rc.as_ref()
                        .map(|rc| rc.layers.iter().map(|l| l.attn.a.clone()).collect())
                        .unwrap_or_default()
                })
                .collect(),
            decoder_self_attention: pass.dec.iter().map(|l| l.self_attn.a.clone()).collect(),
            cross_attention: pass.dec.iter().map(|l| l.cross.a.clone()).collect(),
            encoder_states: pass.enc,
            encoder_valid: pass.enc_valid,
            logits: pass.logits,
        })
    }

    /// Logits of the next token after `prefix` (which should start with bos).
    pub fn next_logits(&self, p: &Params, ex: &ToyExample, prefix: &[u32]) -> Result<Array1<f64>> {
        let pass = self.run(p, ex, prefix)?;
        Ok(pass.logits.row(prefix.len() - 1).to_owned())
    }

    /// Mean cross-entropy over non-pad labels, and its softmax gradient with
    /// respect to the logits.
    fn cross_entropy(logits: &Array2<f64>, target: &[u32]) -> Result<(f64, Array2<f64>)> {
        let count = target.iter().filter(|&&t| t != PAD).count();
        if count == 0 {
            return Err(Error::Shape("example has no non-pad target tokens".into()));
        }
        let mut dlogits = Array2::zeros(logits.raw_dim());
        let mut total = 0.0;
        for (t, &label) in target.iter().enumerate() {
            if label == PAD {
                continue;
            }
            let row = logits.row(t);
            let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
            let lse = max + sum.ln();
            total += lse - row[label as usize];
            let mut drow = dlogits.row_mut(t);
            for (j, v) in row.iter().enumerate() {
                drow[j] = (v - lse).exp() / count as f64;
            }
            drow[label as usize] -= 1.0 / count as f64;
        }
        Ok((total / count as f64, dlogits))
    }

    pub fn loss(&self, p: &Params, ex: &ToyExample) -> Result<f64> {
        let logits = self.forward(p, ex)?;
        Ok(Self::cross_entropy(&logits, &ex.target_ids)?.0)
    }

    /// Loss and its exact gradient, laid out like `p.data`.
    pub fn loss_and_grad(&self, p: &Params, ex: &ToyExample) -> Result<(f64, Vec<f64>)> {
        let mut g = vec![0.0; self.n_params];
        let loss = self.accumulate_grad(p, ex, 1.0, &mut g)?;
        Ok((loss, g))
    }

    /// Adds `weight` times the gradient of the loss on `ex` into `g`.
    pub fn accumulate_grad(
        &self,
        params: &Params,
        ex: &ToyExample,
        weight: f64,
        g: &mut [f64],
    ) -> Result<f64> {
        let pass = self.run(params, ex, &Self::teacher_input(&ex.target_ids))?;
        let (loss, dlogits) = Self::cross_entropy(&pass.logits, &ex.target_ids)?;
        let dlogits = dlogits * weight;
        let p = params.data.as_slice();
        let mut sink = GradSink { model: self, g };

        sink.m(self.w_out, &pass.dec_out.t().dot(&dlogits));
        sink.v(self.b_out, &dlogits.sum_axis(Axis(0)));
        let mut dx = dlogits.dot(&self.m(p, self.w_out).t());
        let mut denc = Array2::zeros(pass.enc.raw_dim());
        let mut dbias = self
            .cross_bias
            .map(|b| Array1::zeros(self.tensors[b].len()));
        for (layer, c) in self.dec.iter().zip(&pass.dec).rev() {
            let ds3 = self.norm_back(p, &mut sink, &layer.ln3, &c.ln3, &dx);
            let dx2 = &ds3 + &self.ffn_backward(p, &mut sink, &layer.ffn, &c.ffn, &ds3);
            let ds2 = self.norm_back(p, &mut sink, &layer.ln2, &c.ln2, &dx2);
            let (dq, dkv) =
                self.attn_backward(p, &mut sink, &layer.cross, &c.cross, &ds2, dbias.as_mut());
            denc += &dkv;
            let dx1 = &ds2 + &dq;
            let ds1 = self.norm_back(p, &mut sink, &layer.ln1, &c.ln1, &dx1);
            let (dq, dkv) =
                self.attn_backward(p, &mut sink, &layer.self_attn, &c.self_attn, &ds1, None);
            dx = ds1 + dq + dkv;
        }
        if let (Some(b), Some(db)) = (self.cross_bias, &dbias) {
            sink.v(b, db);
        }
        self.embed_backward(&mut sink, &pass.dec_ids, &dx);

        let l = self.config.max_rc_tokens;
        for (i, rc) in pass.rcs.iter().enumerate() {
            let Some(rc) = rc else { continue };
            let n = rc.ids.len();
            let mut dx = denc.slice(s![i * l..i * l + n, ..]).to_owned();
            for (layer, c) in self.enc.iter().zip(&rc.layers).rev() {
                let ds2 = self.norm_back(p, &mut sink, &layer.ln2, &c.ln2, &dx);
                let dx1 = &ds2 + &self.ffn_backward(p, &mut sink, &layer.ffn, &c.ffn, &ds2);
                let ds1 = self.norm_back(p, &mut sink, &layer.ln1, &c.ln1, &dx1);
                let (dq, dkv) = self.attn_backward(p, &mut sink, &layer.attn, &c.attn, &ds1, None);
                dx = ds1 + dq + dkv;
            }
            self.embed_backward(&mut sink, &rc.ids, &dx);
        }
        Ok(loss)
    }
}
