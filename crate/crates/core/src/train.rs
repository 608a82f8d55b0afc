//! The training loop: sampler schedule → batch → forward → batch-hard
//! mining on `f_M` → joint loss → backward → Adam.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::loss::{joint_loss, LossReport, MarginSchedule};
use crate::mining::{
    batch_hard_triplets, epoch_sampler_schedule, ghis_batch, ghis_groups, mean_distance_matrix, random_pk_batch,
    BatchSpec, GhisConfig, IdentityGroup, SamplerMode,
};
use crate::model::{backward_trace, forward_trace, init_params, ModelConfig, ModelParams, StageEmbeddings};
use crate::numeric::RandomSource;
use crate::optim::{adam_step, AdamConfig, LrSchedule, OptimizerState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    /// Defaults to `ceil(samples / (P·K))`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batches_per_epoch: Option<usize>,
    #[serde(default = "default_lr")]
    pub base_lr: f64,
    #[serde(default = "default_breakpoint")]
    pub lr_breakpoint: usize,
    #[serde(default)]
    pub adam: AdamConfig,
    #[serde(default)]
    pub batch: BatchSpec,
    #[serde(default)]
    pub ghis: GhisConfig,
    /// Alternate random and GHIS epochs; `false` samples randomly throughout.
    #[serde(default = "default_true")]
    pub use_ghis: bool,
    /// Samples per identity probed for the mean distance matrix.
    #[serde(default = "default_k_probe")]
    pub k_probe: usize,
    #[serde(default = "default_margins")]
    pub margins: MarginSchedule,
    /// Stage weights; defaults to all ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_every: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

fn default_epochs() -> usize {
    60
}
fn default_lr() -> f64 {
    2e-4
}
fn default_breakpoint() -> usize {
    30
}
fn default_true() -> bool {
    true
}
fn default_k_probe() -> usize {
    4
}
fn default_margins() -> MarginSchedule {
    MarginSchedule::new(4.0, vec![3.0, 3.0]).expect("valid default margins")
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: default_epochs(),
            batches_per_epoch: None,
            base_lr: default_lr(),
            lr_breakpoint: default_breakpoint(),
            adam: AdamConfig::default(),
            batch: BatchSpec::default(),
            ghis: GhisConfig::default(),
            use_ghis: true,
            k_probe: default_k_probe(),
            margins: default_margins(),
            lambdas: None,
            checkpoint_every: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn lambdas(&self) -> Vec<f64> {
        self.lambdas.clone().unwrap_or_else(|| vec![1.0; self.margins.stages() + 1])
    }

    pub fn lr_schedule(&self) -> LrSchedule {
        LrSchedule { base_lr: self.base_lr, breakpoint: self.lr_breakpoint, epochs: self.epochs }
    }

    /// Learning rate at 1-based epoch `t`.
    pub fn lr_at(&self, t: usize) -> Result<f64> {
        self.lr_schedule().lr_at(t)
    }

    pub fn batches_for(&self, dataset: &Dataset) -> usize {
        self.batches_per_epoch.unwrap_or_else(|| dataset.len().div_ceil(self.batch.batch_size()))
    }

    pub fn validate(&self, model: &ModelConfig) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        model.validate()?;
        self.adam.validate()?;
        self.batch.validate()?;
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if !(self.base_lr > 0.0) {
            return bad(format!("base_lr must be positive, got {}", self.base_lr));
        }
        if self.lr_breakpoint == 0 {
            return bad("lr_breakpoint must be positive".into());
        }
        if self.margins.stages() != model.stages {
            return bad(format!(
                "margin schedule has {} increments, model has {} shift stages",
                self.margins.stages(),
                model.stages
            ));
        }
        if self.lambdas().len() != model.stages + 1 {
            return bad(format!("need {} lambdas", model.stages + 1));
        }
        if self.k_probe == 0 {
            return bad("k_probe must be positive".into());
        }
        if self.batches_per_epoch == Some(0) || self.checkpoint_every == Some(0) {
            return bad("batches_per_epoch and checkpoint_every must be positive".into());
        }
        Ok(())
    }
}

/// One metrics-log row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    /// 0-based epoch.
    pub epoch: usize,
    /// Global 0-based iteration.
    pub iter: usize,
    pub sampler: SamplerMode,
    pub lr: f64,
    #[serde(flatten)]
    pub report: LossReport,
}

/// Callbacks for streaming outputs. Errors abort training.
pub trait TrainObserver {
    fn on_iteration(&mut self, _row: &MetricsRow) -> core::result::Result<(), String> {
        Ok(())
    }
    /// After `epochs_done` complete epochs, every `checkpoint_every` epochs.
    fn on_checkpoint(&mut self, _epochs_done: usize, _params: &ModelParams) -> core::result::Result<(), String> {
        Ok(())
    }
    /// Hard identity sets computed at the start of a GHIS epoch (slots).
    fn on_ghis(&mut self, _epoch: usize, _groups: &[IdentityGroup]) -> core::result::Result<(), String> {
        Ok(())
    }
}

impl TrainObserver for () {}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub metrics: Vec<MetricsRow>,
}

/// Seeded streams: parameter init, batch sampling, D̄ probing.
struct Streams {
    init: RandomSource,
    sampler: RandomSource,
    probe: RandomSource,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let mut master = RandomSource::new(seed);
        Self { init: master.fork(), sampler: master.fork(), probe: master.fork() }
    }
}

/// Initial parameters for a run; identical to the ones `train` starts from.
pub fn initial_params(model: &ModelConfig, cfg: &TrainConfig) -> Result<ModelParams> {
    init_params(model, &mut Streams::new(cfg.seed).init)
}

/// Train from scratch. Deterministic in `(dataset, model, cfg)`.
pub fn train(
    dataset: &Dataset,
    model: &ModelConfig,
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    cfg.validate(model)?;
    if dataset.d_in() != model.d_in {
        return Err(Error::DimensionMismatch { expected: model.d_in, found: dataset.d_in() });
    }
    if dataset.identity_count() < cfg.batch.p {
        return Err(Error::NotEnoughIdentities { needed: cfg.batch.p, available: dataset.identity_count() });
    }
    if cfg.use_ghis {
        cfg.ghis.validate(dataset.identity_count(), &cfg.batch)?;
    }
    let obs = |r: core::result::Result<(), String>| r.map_err(Error::InvalidConfig);

    let mut streams = Streams::new(cfg.seed);
    let mut params = init_params(model, &mut streams.init)?;
    let mut state = OptimizerState::new(model)?;
    let lambdas = cfg.lambdas();
    let batches = cfg.batches_for(dataset);
    let mut metrics = Vec::with_capacity(cfg.epochs * batches);
    let mut iter = 0;

    for epoch in 0..cfg.epochs {
        let mode = if cfg.use_ghis { epoch_sampler_schedule(epoch) } else { SamplerMode::Random };
        let groups = if mode == SamplerMode::Ghis {
            let dbar = mean_distance_matrix(dataset, &params, model, cfg.k_probe, &mut streams.probe)?;
            let groups = ghis_groups(&dbar, &cfg.ghis, &mut streams.sampler)?;
            obs(observer.on_ghis(epoch, &groups))?;
            Some(groups)
        } else {
            None
        };
        let lr = cfg.lr_at(epoch + 1)?;
        for _ in 0..batches {
            // Degenerate distance matrices (e.g. collapsed embeddings) can make
            // disjoint groups impossible; such batches are drawn randomly and
            // logged as random.
            let ghis = match &groups {
                Some(g) => match ghis_batch(g, &cfg.batch, &cfg.ghis, dataset, &mut streams.sampler) {
                    Ok(b) => Some(b),
                    Err(Error::GroupAssembly { .. }) => None,
                    Err(e) => return Err(e),
                },
                None => None,
            };
            let (batch, sampler) = match ghis {
                Some(b) => (b, SamplerMode::Ghis),
                None => (random_pk_batch(dataset, &cfg.batch, &mut streams.sampler)?, SamplerMode::Random),
            };
            let report = step(dataset, &batch, model, cfg, &lambdas, lr, &mut params, &mut state)?;
            let row = MetricsRow { epoch, iter, sampler, lr, report };
            obs(observer.on_iteration(&row))?;
            metrics.push(row);
            iter += 1;
        }
        if cfg.checkpoint_every.is_some_and(|c| (epoch + 1) % c == 0) {
            obs(observer.on_checkpoint(epoch + 1, &params))?;
        }
    }
    Ok(TrainOutcome { params, metrics })
}

#[allow(clippy::too_many_arguments)]
fn step(
    dataset: &Dataset,
    batch: &[usize],
    model: &ModelConfig,
    cfg: &TrainConfig,
    lambdas: &[f64],
    lr: f64,
    params: &mut ModelParams,
    state: &mut OptimizerState,
) -> Result<LossReport> {
    let samples: Vec<_> = batch.iter().map(|&i| &dataset.samples()[i]).collect();
    let traces = samples.iter().map(|s| forward_trace(params, model, s)).collect::<Result<Vec<_>>>()?;
    let labels: Vec<u32> = samples.iter().map(|s| s.identity).collect();
    let embs: Vec<StageEmbeddings> = traces.iter().map(|t| t.out.clone()).collect();
    let finals: Vec<&[f64]> = embs.iter().map(StageEmbeddings::last).collect();
    let triplets = batch_hard_triplets(&finals, &labels)?;
    let (report, upstream) = joint_loss(&embs, &triplets, &cfg.margins, lambdas)?;
    if !report.total.is_finite() {
        return Err(Error::NonFinite(format!("training loss ({})", report.total)));
    }
    let mut grads = ModelParams::zeros(model)?;
    for ((s, t), up) in samples.iter().zip(&traces).zip(&upstream) {
        backward_trace(params, model, s, t, up, &mut grads)?;
    }
    adam_step(params, &grads, state, lr, &cfg.adam)?;
    Ok(report)
}
