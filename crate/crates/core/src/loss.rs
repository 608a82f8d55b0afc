//! Hinge triplet loss, staged losses with incremental margins, and the
//! weighted joint objective. All gradients are taken w.r.t. embeddings.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::StageEmbeddings;
use crate::numeric::sq_dist;

/// Base margin and strictly positive per-stage increments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule")]
pub struct MarginSchedule {
    m0: f64,
    deltas: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    m0: f64,
    deltas: Vec<f64>,
}

impl TryFrom<RawSchedule> for MarginSchedule {
    type Error = Error;
    fn try_from(raw: RawSchedule) -> Result<Self> {
        Self::new(raw.m0, raw.deltas)
    }
}

impl MarginSchedule {
    pub fn new(m0: f64, deltas: Vec<f64>) -> Result<Self> {
        if !(m0 > 0.0 && m0.is_finite()) {
            return Err(Error::InvalidConfig(format!("base margin must be positive, got {m0}")));
        }
        if let Some(d) = deltas.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
            return Err(Error::InvalidConfig(format!("margin increments must be positive, got {d}")));
        }
        Ok(Self { m0, deltas })
    }

    pub fn base(&self) -> f64 {
        self.m0
    }

    pub fn increments(&self) -> &[f64] {
        &self.deltas
    }

    pub fn stages(&self) -> usize {
        self.deltas.len()
    }

    /// `[m0, m0 + Δ1, m0 + Δ1 + Δ2, ...]`.
    pub fn margins(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.deltas.len() + 1);
        let mut m = self.m0;
        out.push(m);
        for d in &self.deltas {
            m += d;
            out.push(m);
        }
        out
    }
}

/// Indices into a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

impl Triplet {
    pub fn new(anchor: usize, positive: usize, negative: usize) -> Self {
        Self { anchor, positive, negative }
    }
}

/// Per-iteration loss summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    /// `L_j` for each stage.
    pub losses: Vec<f64>,
    /// `Σ λ_j L_j`.
    pub total: f64,
    /// Mean anchor-positive squared distance over the triplets, per stage.
    pub d_ap: Vec<f64>,
    pub d_an: Vec<f64>,
    pub gap: Vec<f64>,
}

pub(crate) struct StageLoss {
    pub loss: f64,
    pub grads: Vec<Vec<f64>>,
    pub mean_ap: f64,
    pub mean_an: f64,
}

fn stage_loss<V: AsRef<[f64]>>(embs: &[V], triplets: &[Triplet], margin: f64) -> Result<StageLoss> {
    let dim = embs.first().map_or(0, |e| e.as_ref().len());
    if let Some(e) = embs.iter().find(|e| e.as_ref().len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: e.as_ref().len() });
    }
    if let Some(t) = triplets
        .iter()
        .find(|t| t.anchor >= embs.len() || t.positive >= embs.len() || t.negative >= embs.len())
    {
        return Err(Error::OutOfRange(format!("triplet {t:?} indexes a batch of {}", embs.len())));
    }
    let mut grads = vec![vec![0.0; dim]; embs.len()];
    let (mut loss, mut sum_ap, mut sum_an) = (0.0, 0.0, 0.0);
    for t in triplets {
        let a = embs[t.anchor].as_ref();
        let p = embs[t.positive].as_ref();
        let n = embs[t.negative].as_ref();
        let d_ap = sq_dist(a, p);
        let d_an = sq_dist(a, n);
        sum_ap += d_ap;
        sum_an += d_an;
        let hinge = d_ap - d_an + margin;
        if hinge > 0.0 {
            loss += hinge;
            for k in 0..dim {
                // ∂/∂a = 2(n - p), ∂/∂p = 2(p - a), ∂/∂n = 2(a - n)
                grads[t.anchor][k] += 2.0 * (n[k] - p[k]);
                grads[t.positive][k] += 2.0 * (p[k] - a[k]);
                grads[t.negative][k] += 2.0 * (a[k] - n[k]);
            }
        }
    }
    let count = triplets.len().max(1) as f64;
    Ok(StageLoss { loss, grads, mean_ap: sum_ap / count, mean_an: sum_an / count })
}

/// `Σ_i [d²(a_i, p_i) - d²(a_i, n_i) + m]_+` and its subgradient per embedding
/// (zero at the hinge kink). Not averaged over triplets.
pub fn triplet_loss<V: AsRef<[f64]>>(
    embs: &[V],
    triplets: &[Triplet],
    margin: f64,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let s = stage_loss(embs, triplets, margin)?;
    Ok((s.loss, s.grads))
}

/// Per-sample, per-stage gradient vectors: `grads[sample][stage]`.
pub type StageGradients = Vec<Vec<Vec<f64>>>;

/// Weighted sum of stage losses, stage `j` using `f_j` and margin `m_j`.
///
/// The returned gradients are w.r.t. each `f_j`; the model's backward pass
/// carries them into the base and shift paths.
pub fn joint_loss(
    stage_embs: &[StageEmbeddings],
    triplets: &[Triplet],
    sched: &MarginSchedule,
    lambdas: &[f64],
) -> Result<(LossReport, StageGradients)> {
    let stages = sched.stages() + 1;
    if lambdas.len() != stages {
        return Err(Error::ShapeMismatch(format!("{} lambdas for {stages} stages", lambdas.len())));
    }
    if let Some(e) = stage_embs.iter().find(|e| e.f.len() != stages) {
        return Err(Error::ShapeMismatch(format!(
            "embeddings carry {} stages, schedule has {stages}",
            e.f.len()
        )));
    }
    let margins = sched.margins();
    let mut report = LossReport {
        losses: Vec::with_capacity(stages),
        total: 0.0,
        d_ap: Vec::with_capacity(stages),
        d_an: Vec::with_capacity(stages),
        gap: Vec::with_capacity(stages),
    };
    let mut grads: StageGradients = vec![Vec::with_capacity(stages); stage_embs.len()];
    for (j, (&m, &lambda)) in margins.iter().zip(lambdas).enumerate() {
        let embs: Vec<&[f64]> = stage_embs.iter().map(|e| e.f[j].as_slice()).collect();
        let s = stage_loss(&embs, triplets, m)?;
        report.total += lambda * s.loss;
        report.losses.push(s.loss);
        report.d_ap.push(s.mean_ap);
        report.d_an.push(s.mean_an);
        report.gap.push(s.mean_an - s.mean_ap);
        for (dst, mut g) in grads.iter_mut().zip(s.grads) {
            g.iter_mut().for_each(|x| *x *= lambda);
            dst.push(g);
        }
    }
    Ok((report, grads))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margin_examples() {
        assert_eq!(MarginSchedule::new(4.0, vec![3.0, 3.0]).unwrap().margins(), vec![4.0, 7.0, 10.0]);
        assert_eq!(MarginSchedule::new(1.0, vec![]).unwrap().margins(), vec![1.0]);
        assert_eq!(MarginSchedule::new(2.0, vec![0.5]).unwrap().margins(), vec![2.0, 2.5]);
    }

    #[test]
    fn margin_rejects_non_positive() {
        assert!(MarginSchedule::new(4.0, vec![3.0, 0.0]).is_err());
        assert!(MarginSchedule::new(4.0, vec![-1.0]).is_err());
        assert!(MarginSchedule::new(0.0, vec![]).is_err());
    }

    #[test]
    fn margin_schedule_deserialization_validates() {
        // serde_json is not a core dependency; exercise TryFrom directly.
        let bad = RawSchedule { m0: 1.0, deltas: vec![0.0] };
        assert!(MarginSchedule::try_from(bad).is_err());
    }

    // Points on a line: a = 0, p at sqrt(d_ap), n at -sqrt(d_an).
    fn line(d_ap: f64, d_an: f64) -> Vec<Vec<f64>> {
        vec![vec![0.0], vec![libm::sqrt(d_ap)], vec![-libm::sqrt(d_an)]]
    }

    #[test]
    fn active_hinge() {
        let (loss, grads) = triplet_loss(&line(2.0, 5.0), &[Triplet::new(0, 1, 2)], 4.0).unwrap();
        assert!((loss - 1.0).abs() < 1e-12);
        assert!(grads.iter().any(|g| g[0] != 0.0));
    }

    #[test]
    fn inactive_hinge() {
        let (loss, grads) = triplet_loss(&line(1.0, 9.0), &[Triplet::new(0, 1, 2)], 4.0).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.iter().all(|g| g[0] == 0.0));
    }

    #[test]
    fn empty_triplets_zero() {
        let (loss, grads) = triplet_loss(&line(1.0, 1.0), &[], 4.0).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(grads.len(), 3);
        assert!(grads.iter().all(|g| g[0] == 0.0));
    }

    #[test]
    fn rejects_bad_index() {
        assert!(matches!(
            triplet_loss(&line(1.0, 1.0), &[Triplet::new(0, 1, 3)], 1.0),
            Err(Error::OutOfRange(_))
        ));
    }

    fn stage_embs(rows: &[[f64; 2]], stages: usize) -> Vec<StageEmbeddings> {
        rows.iter()
            .map(|r| {
                let f: Vec<Vec<f64>> = (0..=stages).map(|j| vec![r[0] * (j + 1) as f64, r[1]]).collect();
                let shifts = (1..=stages).map(|j| vec![f[j][0] - f[j - 1][0], 0.0]).collect();
                StageEmbeddings { f, shifts }
            })
            .collect()
    }

    #[test]
    fn unit_lambdas_sum_stages() {
        let embs = stage_embs(&[[0.0, 0.0], [0.5, 0.0], [1.0, 1.0], [0.2, 0.3]], 2);
        let t = [Triplet::new(0, 1, 2), Triplet::new(3, 1, 2)];
        let sched = MarginSchedule::new(4.0, vec![3.0, 3.0]).unwrap();
        let (r, g) = joint_loss(&embs, &t, &sched, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(r.total, r.losses[0] + r.losses[1] + r.losses[2]);
        assert_eq!(g.len(), 4);
        assert!(g.iter().all(|s| s.len() == 3));
        for j in 0..3 {
            assert_eq!(r.gap[j], r.d_an[j] - r.d_ap[j]);
        }
    }

    #[test]
    fn baseline_weights_reduce_to_plain_loss() {
        let embs = stage_embs(&[[0.0, 0.0], [0.5, 0.0], [1.0, 1.0]], 2);
        let t = [Triplet::new(0, 1, 2)];
        let sched = MarginSchedule::new(4.0, vec![3.0, 3.0]).unwrap();
        let (r, _) = joint_loss(&embs, &t, &sched, &[1.0, 0.0, 0.0]).unwrap();
        let f0: Vec<&Vec<f64>> = embs.iter().map(|e| &e.f[0]).collect();
        let (plain, _) = triplet_loss(&f0, &t, 4.0).unwrap();
        assert_eq!(r.total, plain);
    }

    #[test]
    fn joint_rejects_mismatched_stages() {
        let embs = stage_embs(&[[0.0, 0.0], [0.5, 0.0], [1.0, 1.0]], 1);
        let t = [Triplet::new(0, 1, 2)];
        let sched = MarginSchedule::new(4.0, vec![3.0, 3.0]).unwrap();
        assert!(joint_loss(&embs, &t, &sched, &[1.0, 1.0, 1.0]).is_err());
        let sched1 = MarginSchedule::new(4.0, vec![3.0]).unwrap();
        assert!(joint_loss(&embs, &t, &sched1, &[1.0, 1.0, 1.0]).is_err());
    }
}
