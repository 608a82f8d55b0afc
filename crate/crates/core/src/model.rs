//! Multi-level embedding network.
//!
//! Each local descriptor of a [`Sample`] runs through a stack of affine +
//! rectifier layers. Every hidden layer is pooled across descriptors (global
//! max or global average). The deepest pooled vector feeds an affine base
//! head producing `f[0]`; shallower pooled vectors feed shift heads whose
//! outputs are accumulated: `f[j] = f[j-1] + shift[j-1]`.
//!
//! Parameters are enumerated in a fixed order, used by checkpoints and the
//! optimizer alike:
//!
//! 1. `backbone.{l}.weight`, `backbone.{l}.bias` for `l = 0..L`
//! 2. `base.weight`, `base.bias`
//! 3. `shift.{j}.inner.weight`, `shift.{j}.inner.bias`,
//!    `shift.{j}.outer.weight`, `shift.{j}.outer.bias` for `j = 1..=M`
//!
//! Weights are row-major `out × in`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::RandomSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    /// Element-wise maximum over descriptors.
    Gmp,
    /// Element-wise mean over descriptors.
    Gap,
}

/// One input item: an identity label and a bag of local descriptors.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub identity: u32,
    pub descriptors: Vec<Vec<f64>>,
}

impl Sample {
    pub fn new(identity: u32, descriptors: Vec<Vec<f64>>) -> Result<Self> {
        let first = descriptors.first().ok_or(Error::Empty("sample has no descriptors"))?;
        let dim = first.len();
        for d in &descriptors {
            if d.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: d.len() });
            }
        }
        Ok(Self { identity, descriptors })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub d_in: usize,
    #[serde(default = "default_hidden")]
    pub hidden_dims: Vec<usize>,
    #[serde(default = "default_emb")]
    pub d_emb: usize,
    /// Number of shift stages `M`.
    #[serde(default = "default_stages")]
    pub stages: usize,
    #[serde(default = "default_pooling")]
    pub pooling: Pooling,
    /// Hidden layer feeding shift head `j` (entry `j-1`). Defaults to the
    /// next-shallower layer per stage: deepest → base, then `L-2`, `L-3`, ...
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_sources: Option<Vec<usize>>,
    /// Width of the inner shift-head layer. Defaults to the source width.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift_hidden: Option<usize>,
}

fn default_hidden() -> Vec<usize> {
    vec![32, 32, 32]
}
fn default_emb() -> usize {
    32
}
fn default_stages() -> usize {
    2
}
fn default_pooling() -> Pooling {
    Pooling::Gmp
}

impl ModelConfig {
    /// Default layout: three hidden layers, two shift stages, max pooling.
    pub fn new(d_in: usize) -> Self {
        Self {
            d_in,
            hidden_dims: default_hidden(),
            d_emb: default_emb(),
            stages: default_stages(),
            pooling: default_pooling(),
            stage_sources: None,
            shift_hidden: None,
        }
    }

    /// Hidden layer index feeding shift head `j` (1-based).
    pub fn stage_source(&self, j: usize) -> usize {
        match &self.stage_sources {
            Some(s) => s[j - 1],
            None => self.hidden_dims.len().wrapping_sub(1 + j),
        }
    }

    fn shift_width(&self, j: usize) -> usize {
        self.shift_hidden.unwrap_or(self.hidden_dims[self.stage_source(j)])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.d_in == 0 || self.d_emb == 0 {
            return bad("d_in and d_emb must be positive".into());
        }
        if self.hidden_dims.is_empty() || self.hidden_dims.contains(&0) {
            return bad("hidden_dims must be non-empty with positive sizes".into());
        }
        if self.shift_hidden == Some(0) {
            return bad("shift_hidden must be positive".into());
        }
        match &self.stage_sources {
            Some(s) if s.len() != self.stages => {
                return bad(format!("stage_sources has {} entries, stages is {}", s.len(), self.stages))
            }
            Some(s) => {
                if let Some(&l) = s.iter().find(|&&l| l >= self.hidden_dims.len()) {
                    return bad(format!("stage source {l} is not a hidden layer"));
                }
            }
            None if self.stages >= self.hidden_dims.len() => {
                return bad(format!(
                    "{} stages need explicit stage_sources with {} hidden layers",
                    self.stages,
                    self.hidden_dims.len()
                ))
            }
            None => {}
        }
        Ok(())
    }
}

/// Dense affine layer, row-major `out × in` weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self { in_dim, out_dim, weight: vec![0.0; in_dim * out_dim], bias: vec![0.0; out_dim] }
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weight.chunks_exact(self.in_dim).zip(&self.bias).map(|(row, b)| {
            b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        }));
    }

    /// Accumulate `dW += g ⊗ x`, `db += g` and return `Wᵀ g` into `dx`.
    fn backprop(&self, grad: &mut Layer, g: &[f64], x: &[f64], dx: Option<&mut Vec<f64>>) {
        for ((grow, gb), &go) in grad.weight.chunks_exact_mut(self.in_dim).zip(&mut grad.bias).zip(g) {
            *gb += go;
            if go != 0.0 {
                for (gw, xv) in grow.iter_mut().zip(x) {
                    *gw += go * xv;
                }
            }
        }
        if let Some(dx) = dx {
            dx.clear();
            dx.resize(self.in_dim, 0.0);
            for (row, &go) in self.weight.chunks_exact(self.in_dim).zip(g) {
                if go != 0.0 {
                    for (d, w) in dx.iter_mut().zip(row) {
                        *d += go * w;
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftHead {
    pub inner: Layer,
    pub outer: Layer,
}

/// All learnable weights. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub backbone: Vec<Layer>,
    pub base: Layer,
    pub shifts: Vec<ShiftHead>,
}

pub type Gradients = ModelParams;

impl ModelParams {
    /// All-zero parameters shaped for `cfg`.
    pub fn zeros(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let mut backbone = Vec::with_capacity(cfg.hidden_dims.len());
        let mut prev = cfg.d_in;
        for &h in &cfg.hidden_dims {
            backbone.push(Layer::zeros(prev, h));
            prev = h;
        }
        let base = Layer::zeros(prev, cfg.d_emb);
        let shifts = (1..=cfg.stages)
            .map(|j| {
                let src = cfg.hidden_dims[cfg.stage_source(j)];
                let width = cfg.shift_width(j);
                ShiftHead { inner: Layer::zeros(src, width), outer: Layer::zeros(width, cfg.d_emb) }
            })
            .collect();
        Ok(Self { backbone, base, shifts })
    }

    fn layers(&self) -> impl Iterator<Item = (String, &Layer)> {
        let bb = self.backbone.iter().enumerate().map(|(l, x)| (format!("backbone.{l}"), x));
        let base = core::iter::once((String::from("base"), &self.base));
        let shifts = self.shifts.iter().enumerate().flat_map(|(j, h)| {
            [(format!("shift.{}.inner", j + 1), &h.inner), (format!("shift.{}.outer", j + 1), &h.outer)]
        });
        bb.chain(base).chain(shifts)
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Layer> {
        self.backbone
            .iter_mut()
            .chain(core::iter::once(&mut self.base))
            .chain(self.shifts.iter_mut().flat_map(|h| [&mut h.inner, &mut h.outer]))
    }

    /// Named tensors in enumeration order.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for (name, layer) in self.layers() {
            out.push((format!("{name}.weight"), layer.weight.as_slice()));
            out.push((format!("{name}.bias"), layer.bias.as_slice()));
        }
        out
    }

    /// Mutable tensors in enumeration order.
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in self.layers_mut() {
            out.push(layer.weight.as_mut_slice());
            out.push(layer.bias.as_mut_slice());
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().into_iter().flat_map(|(_, t)| t.iter().copied()).collect()
    }

    /// Rebuild from a flat vector in enumeration order.
    pub fn from_flat(cfg: &ModelConfig, flat: &[f64]) -> Result<Self> {
        let mut params = Self::zeros(cfg)?;
        let count = params.param_count();
        if flat.len() != count {
            return Err(Error::ShapeMismatch(format!("expected {count} parameters, got {}", flat.len())));
        }
        let mut rest = flat;
        for t in params.tensors_mut() {
            let (head, tail) = rest.split_at(t.len());
            t.copy_from_slice(head);
            rest = tail;
        }
        Ok(params)
    }

    /// Element-wise `self += other`. Shapes must agree.
    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.layers_mut().zip(other.layers().map(|(_, l)| l)) {
            a.weight.iter_mut().zip(&b.weight).for_each(|(x, y)| *x += y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += y);
        }
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.backbone.len() == other.backbone.len()
            && self.shifts.len() == other.shifts.len()
            && self
                .layers()
                .zip(other.layers())
                .all(|((_, a), (_, b))| a.in_dim == b.in_dim && a.out_dim == b.out_dim)
    }
}

/// Weights ~ N(0, 2 / fan_in), biases zero, drawn in enumeration order.
pub fn init_params(cfg: &ModelConfig, rng: &mut RandomSource) -> Result<ModelParams> {
    let mut params = ModelParams::zeros(cfg)?;
    for layer in params.layers_mut() {
        let std = libm::sqrt(2.0 / layer.in_dim as f64);
        for w in layer.weight.iter_mut() {
            *w = std * rng.standard_normal();
        }
    }
    Ok(params)
}

/// Per-sample embeddings of every stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageEmbeddings {
    /// `f[0]` is the base embedding, `f[j] = f[j-1] + shifts[j-1]`.
    pub f: Vec<Vec<f64>>,
    pub shifts: Vec<Vec<f64>>,
}

impl StageEmbeddings {
    /// Inference embedding `f[M]`.
    pub fn last(&self) -> &[f64] {
        self.f.last().expect("at least the base stage")
    }
}

impl AsRef<[Vec<f64>]> for StageEmbeddings {
    fn as_ref(&self) -> &[Vec<f64>] {
        &self.f
    }
}

/// Embed every sample.
pub fn embed_all(params: &ModelParams, cfg: &ModelConfig, samples: &[Sample]) -> Result<Vec<StageEmbeddings>> {
    check_params(params, cfg)?;
    samples.iter().map(|s| forward_trace(params, cfg, s).map(|t| t.out)).collect()
}

/// Global pooling over a non-empty list of equal-length vectors.
pub fn pool<V: AsRef<[f64]>>(vectors: &[V], mode: Pooling) -> Result<Vec<f64>> {
    let first = vectors.first().ok_or(Error::Empty("pool needs at least one vector"))?;
    let dim = first.as_ref().len();
    if let Some(v) = vectors.iter().find(|v| v.as_ref().len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: v.as_ref().len() });
    }
    let mut out = Vec::new();
    let mut arg = Vec::new();
    pool_into(vectors, mode, &mut out, &mut arg);
    Ok(out)
}

/// For GMP, `arg[e]` records the lowest descriptor index attaining the max.
fn pool_into<V: AsRef<[f64]>>(vectors: &[V], mode: Pooling, out: &mut Vec<f64>, arg: &mut Vec<usize>) {
    out.clear();
    out.extend_from_slice(vectors[0].as_ref());
    match mode {
        Pooling::Gmp => {
            arg.clear();
            arg.resize(out.len(), 0);
            for (r, v) in vectors.iter().enumerate().skip(1) {
                for ((o, a), &x) in out.iter_mut().zip(arg.iter_mut()).zip(v.as_ref()) {
                    if x > *o {
                        *o = x;
                        *a = r;
                    }
                }
            }
        }
        Pooling::Gap => {
            for v in vectors.iter().skip(1) {
                out.iter_mut().zip(v.as_ref()).for_each(|(o, x)| *o += x);
            }
            let inv = vectors.len() as f64;
            out.iter_mut().for_each(|o| *o /= inv);
        }
    }
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub(crate) struct Trace {
    /// Post-rectifier activations, `acts[l][r]`.
    acts: Vec<Vec<Vec<f64>>>,
    pooled: Vec<Vec<f64>>,
    argmax: Vec<Vec<usize>>,
    /// Post-rectifier inner activations of each shift head.
    shift_hidden: Vec<Vec<f64>>,
    pub(crate) out: StageEmbeddings,
}

fn relu_in_place(v: &mut [f64]) {
    v.iter_mut().for_each(|x| {
        if *x < 0.0 {
            *x = 0.0
        }
    });
}

pub(crate) fn forward_trace(params: &ModelParams, cfg: &ModelConfig, s: &Sample) -> Result<Trace> {
    if s.descriptors.is_empty() {
        return Err(Error::Empty("sample has no descriptors"));
    }
    if let Some(d) = s.descriptors.iter().find(|d| d.len() != cfg.d_in) {
        return Err(Error::DimensionMismatch { expected: cfg.d_in, found: d.len() });
    }
    let n_layers = params.backbone.len();
    let mut acts: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n_layers);
    for (l, layer) in params.backbone.iter().enumerate() {
        let inputs = if l == 0 { &s.descriptors } else { &acts[l - 1] };
        let mut level = Vec::with_capacity(inputs.len());
        for x in inputs {
            let mut h = Vec::with_capacity(layer.out_dim);
            layer.apply(x, &mut h);
            relu_in_place(&mut h);
            level.push(h);
        }
        acts.push(level);
    }
    let mut pooled = Vec::with_capacity(n_layers);
    let mut argmax = Vec::with_capacity(n_layers);
    for level in &acts {
        let (mut p, mut a) = (Vec::new(), Vec::new());
        pool_into(level, cfg.pooling, &mut p, &mut a);
        pooled.push(p);
        argmax.push(a);
    }

    let mut f0 = Vec::new();
    params.base.apply(&pooled[n_layers - 1], &mut f0);
    let mut f = Vec::with_capacity(cfg.stages + 1);
    f.push(f0);
    let mut shifts = Vec::with_capacity(cfg.stages);
    let mut shift_hidden = Vec::with_capacity(cfg.stages);
    for (j, head) in params.shifts.iter().enumerate() {
        let src = &pooled[cfg.stage_source(j + 1)];
        let mut h = Vec::new();
        head.inner.apply(src, &mut h);
        relu_in_place(&mut h);
        let mut sv = Vec::new();
        head.outer.apply(&h, &mut sv);
        let next: Vec<f64> = f[j].iter().zip(&sv).map(|(a, b)| a + b).collect();
        f.push(next);
        shifts.push(sv);
        shift_hidden.push(h);
    }
    Ok(Trace { acts, pooled, argmax, shift_hidden, out: StageEmbeddings { f, shifts } })
}

/// Stage embeddings of one sample.
pub fn forward(params: &ModelParams, cfg: &ModelConfig, s: &Sample) -> Result<StageEmbeddings> {
    check_params(params, cfg)?;
    forward_trace(params, cfg, s).map(|t| t.out)
}

fn check_params(params: &ModelParams, cfg: &ModelConfig) -> Result<()> {
    let expected = ModelParams::zeros(cfg)?;
    if !expected.same_shape(params) {
        return Err(Error::ShapeMismatch("parameters do not match the model configuration".into()));
    }
    Ok(())
}

/// Accumulate the gradient of `⟨upstream, f⟩` for one traced sample.
pub(crate) fn backward_trace(
    params: &ModelParams,
    cfg: &ModelConfig,
    s: &Sample,
    trace: &Trace,
    upstream: &[Vec<f64>],
    grads: &mut Gradients,
) -> Result<()> {
    if upstream.len() != cfg.stages + 1 {
        return Err(Error::ShapeMismatch(format!(
            "upstream has {} stages, model has {}",
            upstream.len(),
            cfg.stages + 1
        )));
    }
    if let Some(u) = upstream.iter().find(|u| u.len() != cfg.d_emb) {
        return Err(Error::DimensionMismatch { expected: cfg.d_emb, found: u.len() });
    }
    let n_layers = params.backbone.len();
    let mut d_pooled: Vec<Vec<f64>> = cfg.hidden_dims.iter().map(|&h| vec![0.0; h]).collect();

    // f[j] = f[0] + Σ_{k≤j} shift[k], so shift k collects Σ_{j≥k} upstream[j]
    // and f[0] collects all of them.
    let mut suffix = upstream[cfg.stages].clone();
    let mut scratch = Vec::new();
    for j in (1..=cfg.stages).rev() {
        let head = &params.shifts[j - 1];
        let ghead = &mut grads.shifts[j - 1];
        let h = &trace.shift_hidden[j - 1];
        let mut dh = Vec::new();
        head.outer.backprop(&mut ghead.outer, &suffix, h, Some(&mut dh));
        for (d, &hv) in dh.iter_mut().zip(h) {
            if hv <= 0.0 {
                *d = 0.0;
            }
        }
        let src = cfg.stage_source(j);
        head.inner.backprop(&mut ghead.inner, &dh, &trace.pooled[src], Some(&mut scratch));
        d_pooled[src].iter_mut().zip(&scratch).for_each(|(a, b)| *a += b);
        suffix.iter_mut().zip(&upstream[j - 1]).for_each(|(a, b)| *a += b);
    }
    params.base.backprop(&mut grads.base, &suffix, &trace.pooled[n_layers - 1], Some(&mut scratch));
    d_pooled[n_layers - 1].iter_mut().zip(&scratch).for_each(|(a, b)| *a += b);

    let r_count = s.descriptors.len();
    // Gradient w.r.t. post-rectifier activations of the layer above, per descriptor.
    let mut from_above: Vec<Vec<f64>> = Vec::new();
    for l in (0..n_layers).rev() {
        let width = cfg.hidden_dims[l];
        let mut d_act: Vec<Vec<f64>> = if from_above.is_empty() {
            vec![vec![0.0; width]; r_count]
        } else {
            core::mem::take(&mut from_above)
        };
        let dp = &d_pooled[l];
        match cfg.pooling {
            Pooling::Gmp => {
                for (e, (&r, &g)) in trace.argmax[l].iter().zip(dp).enumerate() {
                    d_act[r][e] += g;
                }
            }
            Pooling::Gap => {
                let inv = r_count as f64;
                for row in d_act.iter_mut() {
                    row.iter_mut().zip(dp).for_each(|(a, g)| *a += g / inv);
                }
            }
        }
        let mut below = Vec::with_capacity(if l > 0 { r_count } else { 0 });
        for (r, dz) in d_act.iter_mut().enumerate() {
            for (d, &a) in dz.iter_mut().zip(&trace.acts[l][r]) {
                if a <= 0.0 {
                    *d = 0.0;
                }
            }
            let input = if l == 0 { &s.descriptors[r] } else { &trace.acts[l - 1][r] };
            if l > 0 {
                let mut dx = Vec::new();
                params.backbone[l].backprop(&mut grads.backbone[l], dz, input, Some(&mut dx));
                below.push(dx);
            } else {
                params.backbone[l].backprop(&mut grads.backbone[l], dz, input, None);
            }
        }
        from_above = below;
    }
    Ok(())
}

/// Gradient of `Σ_samples Σ_j ⟨upstream[s][j], f_j(s)⟩` w.r.t. every parameter.
///
/// Max pooling routes gradient to the lowest-index arg-max descriptor;
/// average pooling spreads it uniformly. Samples are accumulated in order.
pub fn backward(
    params: &ModelParams,
    cfg: &ModelConfig,
    batch: &[Sample],
    upstream: &[Vec<Vec<f64>>],
) -> Result<Gradients> {
    check_params(params, cfg)?;
    if batch.len() != upstream.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} samples but {} upstream gradients",
            batch.len(),
            upstream.len()
        )));
    }
    let mut grads = ModelParams::zeros(cfg)?;
    for (s, up) in batch.iter().zip(upstream) {
        let trace = forward_trace(params, cfg, s)?;
        backward_trace(params, cfg, s, &trace, up, &mut grads)?;
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(stages: usize) -> ModelConfig {
        ModelConfig { hidden_dims: vec![4, 4, 4], d_emb: 4, stages, ..ModelConfig::new(8) }
    }

    fn sample(rng: &mut RandomSource, r: usize, d: usize) -> Sample {
        Sample::new(0, (0..r).map(|_| (0..d).map(|_| rng.standard_normal()).collect()).collect()).unwrap()
    }

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let cfg = small_cfg(2);
        let a = init_params(&cfg, &mut RandomSource::new(7)).unwrap();
        let b = init_params(&cfg, &mut RandomSource::new(7)).unwrap();
        assert_eq!(a, b);
        for (name, t) in a.tensors() {
            if name.ends_with(".bias") {
                assert!(t.iter().all(|&x| x == 0.0), "{name}");
            }
        }
    }

    #[test]
    fn parameter_count_matches_shapes() {
        // backbone 8·4+4 + 2·(4·4+4) = 76, base 4·4+4 = 20, two shift heads of
        // (4·4+4) + (4·4+4) = 40 each.
        let p = init_params(&small_cfg(2), &mut RandomSource::new(1)).unwrap();
        assert_eq!(p.param_count(), 76 + 20 + 80);
        assert_eq!(p.flatten().len(), 176);
    }

    #[test]
    fn default_sources_walk_down_the_stack() {
        let cfg = small_cfg(2);
        assert_eq!(cfg.stage_source(1), 1);
        assert_eq!(cfg.stage_source(2), 0);
        let too_many = small_cfg(3);
        assert!(too_many.validate().is_err());
        let explicit = ModelConfig { stage_sources: Some(vec![2, 2, 2]), ..small_cfg(3) };
        explicit.validate().unwrap();
        let out_of_range = ModelConfig { stage_sources: Some(vec![3]), ..small_cfg(1) };
        assert!(out_of_range.validate().is_err());
    }

    #[test]
    fn no_stages_gives_base_only() {
        let cfg = small_cfg(0);
        let mut rng = RandomSource::new(2);
        let p = init_params(&cfg, &mut rng).unwrap();
        let e = forward(&p, &cfg, &sample(&mut rng, 3, 8)).unwrap();
        assert_eq!(e.f.len(), 1);
        assert!(e.shifts.is_empty());
    }

    #[test]
    fn zero_shift_heads_leave_embedding_unchanged() {
        let cfg = small_cfg(2);
        let mut rng = RandomSource::new(3);
        let mut p = init_params(&cfg, &mut rng).unwrap();
        for h in &mut p.shifts {
            h.inner = Layer::zeros(h.inner.in_dim, h.inner.out_dim);
            h.outer = Layer::zeros(h.outer.in_dim, h.outer.out_dim);
        }
        let e = forward(&p, &cfg, &sample(&mut rng, 3, 8)).unwrap();
        assert_eq!(e.f[1], e.f[0]);
        assert_eq!(e.f[2], e.f[0]);
    }

    #[test]
    fn single_descriptor_pooling_modes_agree() {
        let mut rng = RandomSource::new(4);
        let gmp = small_cfg(2);
        let gap = ModelConfig { pooling: Pooling::Gap, ..gmp.clone() };
        let p = init_params(&gmp, &mut rng).unwrap();
        let s = sample(&mut rng, 1, 8);
        assert_eq!(forward(&p, &gmp, &s).unwrap(), forward(&p, &gap, &s).unwrap());
    }

    #[test]
    fn pool_examples() {
        let v = [[1.0, 5.0], [3.0, 2.0]];
        assert_eq!(pool(&v, Pooling::Gmp).unwrap(), vec![3.0, 5.0]);
        assert_eq!(pool(&v, Pooling::Gap).unwrap(), vec![2.0, 3.5]);
        let empty: [[f64; 2]; 0] = [];
        assert!(matches!(pool(&empty, Pooling::Gmp), Err(Error::Empty(_))));
    }

    #[test]
    fn forward_rejects_wrong_input_dim() {
        let cfg = small_cfg(1);
        let mut rng = RandomSource::new(5);
        let p = init_params(&cfg, &mut rng).unwrap();
        let s = sample(&mut rng, 2, 7);
        assert_eq!(forward(&p, &cfg, &s), Err(Error::DimensionMismatch { expected: 8, found: 7 }));
    }

    #[test]
    fn zero_upstream_zero_gradient() {
        let cfg = small_cfg(2);
        let mut rng = RandomSource::new(6);
        let p = init_params(&cfg, &mut rng).unwrap();
        let batch = vec![sample(&mut rng, 3, 8), sample(&mut rng, 2, 8)];
        let up = vec![vec![vec![0.0; 4]; 3]; 2];
        let g = backward(&p, &cfg, &batch, &up).unwrap();
        assert!(g.flatten().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn base_only_upstream_leaves_shift_heads_silent() {
        let cfg = small_cfg(2);
        let mut rng = RandomSource::new(8);
        let p = init_params(&cfg, &mut rng).unwrap();
        let batch = vec![sample(&mut rng, 3, 8)];
        let up = vec![vec![vec![1.0, -2.0, 0.5, 3.0], vec![0.0; 4], vec![0.0; 4]]];
        let g = backward(&p, &cfg, &batch, &up).unwrap();
        for h in &g.shifts {
            assert!(h.inner.weight.iter().chain(&h.inner.bias).all(|&x| x == 0.0));
            assert!(h.outer.weight.iter().chain(&h.outer.bias).all(|&x| x == 0.0));
        }
        assert!(g.base.weight.iter().any(|&x| x != 0.0));
    }

    #[test]
    fn backward_rejects_bad_upstream() {
        let cfg = small_cfg(2);
        let mut rng = RandomSource::new(9);
        let p = init_params(&cfg, &mut rng).unwrap();
        let batch = vec![sample(&mut rng, 3, 8)];
        let up = vec![vec![vec![0.0; 4]; 2]];
        assert!(matches!(backward(&p, &cfg, &batch, &up), Err(Error::ShapeMismatch(_))));
        assert!(matches!(backward(&p, &cfg, &batch, &[]), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn flat_round_trip() {
        let cfg = small_cfg(2);
        let p = init_params(&cfg, &mut RandomSource::new(10)).unwrap();
        assert_eq!(ModelParams::from_flat(&cfg, &p.flatten()).unwrap(), p);
        assert!(ModelParams::from_flat(&cfg, &[0.0; 3]).is_err());
    }
}
