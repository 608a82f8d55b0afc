//! Central finite differences of the full objective (model + joint loss)
//! with the mined triplets held fixed.
#![allow(dead_code)]

use litm_core::loss::{joint_loss, MarginSchedule, Triplet};
use litm_core::mining::batch_hard_triplets;
use litm_core::model::{backward, embed_all, init_params, ModelConfig, ModelParams, Pooling, Sample};
use litm_core::RandomSource;

pub const STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;
pub const ABS_FLOOR: f64 = 1e-8;

pub struct Case {
    pub cfg: ModelConfig,
    pub params: ModelParams,
    pub batch: Vec<Sample>,
    pub triplets: Vec<Triplet>,
    pub sched: MarginSchedule,
    pub lambdas: Vec<f64>,
}

/// Random config with `d_in ≤ 8`, hidden widths `≤ 8`, `R ≤ 4`, `M ≤ 2`.
pub fn random_case(seed: u64, stages: usize) -> Case {
    let mut rng = RandomSource::new(seed);
    let layers = stages + 1 + rng.below(3 - stages.min(2));
    let layers = layers.min(3).max(stages + 1);
    let cfg = ModelConfig {
        d_in: 2 + rng.below(7),
        hidden_dims: (0..layers).map(|_| 2 + rng.below(7)).collect(),
        d_emb: 2 + rng.below(7),
        stages,
        pooling: if rng.below(2) == 0 { Pooling::Gmp } else { Pooling::Gap },
        stage_sources: None,
        shift_hidden: None,
    };
    let mut params = init_params(&cfg, &mut rng).unwrap();
    // Non-zero biases so no gradient path is trivially silent.
    for t in params.tensors_mut() {
        for x in t.iter_mut() {
            if *x == 0.0 {
                *x = 0.1 * rng.standard_normal();
            }
        }
    }
    let r = 1 + rng.below(4);
    let ids = 3;
    let per = 2;
    let batch: Vec<Sample> = (0..ids * per)
        .map(|i| {
            let d = (0..r).map(|_| (0..cfg.d_in).map(|_| rng.standard_normal()).collect()).collect();
            Sample::new((i / per) as u32, d).unwrap()
        })
        .collect();
    let embs = embed_all(&params, &cfg, &batch).unwrap();
    let finals: Vec<&[f64]> = embs.iter().map(|e| e.last()).collect();
    let labels: Vec<u32> = batch.iter().map(|s| s.identity).collect();
    let triplets = batch_hard_triplets(&finals, &labels).unwrap();
    let sched = MarginSchedule::new(4.0, vec![3.0; stages]).unwrap();
    let lambdas = (0..=stages).map(|_| rng.uniform_in(0.5, 1.5)).collect();
    Case { cfg, params, batch, triplets, sched, lambdas }
}

pub fn objective(case: &Case, params: &ModelParams) -> f64 {
    let embs = embed_all(params, &case.cfg, &case.batch).unwrap();
    joint_loss(&embs, &case.triplets, &case.sched, &case.lambdas).unwrap().0.total
}

pub fn analytic(case: &Case) -> Vec<f64> {
    let embs = embed_all(&case.params, &case.cfg, &case.batch).unwrap();
    let (_, up) = joint_loss(&embs, &case.triplets, &case.sched, &case.lambdas).unwrap();
    backward(&case.params, &case.cfg, &case.batch, &up).unwrap().flatten()
}

fn shifted(case: &Case, flat: &[f64], i: usize, h: f64) -> f64 {
    let mut p = flat.to_vec();
    p[i] += h;
    objective(case, &ModelParams::from_flat(&case.cfg, &p).unwrap())
}

/// Central differences at [`STEP`] for every parameter.
pub fn numeric(case: &Case) -> Vec<f64> {
    let flat = case.params.flatten();
    (0..flat.len()).map(|i| (shifted(case, &flat, i, STEP) - shifted(case, &flat, i, -STEP)) / (2.0 * STEP)).collect()
}

pub fn agrees(a: f64, n: f64) -> bool {
    let err = (a - n).abs();
    err <= ABS_FLOOR || err <= REL_TOL * a.abs().max(n.abs())
}

/// Steps tried after [`STEP`] when it disagrees. A larger step tames
/// roundoff on exactly-zero gradients (loss values are O(10²), so
/// `ε·|f|/h` approaches the absolute floor); smaller ones and one-sided
/// differences step around a ReLU/max/hinge kink lying within `STEP` of the
/// evaluation point.
pub const FALLBACK_STEPS: [f64; 2] = [1e-4, 1e-6];
pub const ONE_SIDED_STEP: f64 = 1e-6;

/// Whether `a` matches one of the fallback estimates for parameter `i`.
pub fn fallback_agrees(case: &Case, flat: &[f64], i: usize, a: f64) -> bool {
    let f0 = objective(case, &case.params);
    FALLBACK_STEPS
        .iter()
        .any(|&h| agrees(a, (shifted(case, flat, i, h) - shifted(case, flat, i, -h)) / (2.0 * h)))
        || agrees(a, (shifted(case, flat, i, ONE_SIDED_STEP) - f0) / ONE_SIDED_STEP)
        || agrees(a, (f0 - shifted(case, flat, i, -ONE_SIDED_STEP)) / ONE_SIDED_STEP)
}

pub struct Check {
    pub params: usize,
    /// Parameters that needed a fallback step.
    pub fallback: usize,
    /// `(index, analytic, central difference at STEP)`.
    pub mismatches: Vec<(usize, f64, f64)>,
}

pub fn check(case: &Case) -> Check {
    let flat = case.params.flatten();
    let mut out = Check { params: flat.len(), fallback: 0, mismatches: Vec::new() };
    for (i, (a, n)) in analytic(case).into_iter().zip(numeric(case)).enumerate() {
        if agrees(a, n) {
            continue;
        }
        if fallback_agrees(case, &flat, i, a) {
            out.fallback += 1;
        } else {
            out.mismatches.push((i, a, n));
        }
    }
    out
}

/// Parameters whose analytic gradient matches no finite-difference estimate.
pub fn mismatches(case: &Case) -> Vec<(usize, f64, f64)> {
    check(case).mismatches
}
