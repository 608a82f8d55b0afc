//! Batch construction: random PK sampling, global hard identity searching
//! (GHIS), the alternating sampler schedule, and batch-hard triplet mining.
//!
//! Identities are addressed by their slot in [`Dataset::identities`].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::loss::Triplet;
use crate::model::{forward_trace, ModelConfig, ModelParams};
use crate::numeric::{pairwise_distances, sq_dist, RandomSource};

/// `P` identities × `K` samples per batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSpec {
    pub p: usize,
    pub k: usize,
}

impl BatchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.p < 2 || self.k < 2 {
            return Err(Error::InvalidConfig(format!("P and K must be at least 2, got P={} K={}", self.p, self.k)));
        }
        Ok(())
    }

    pub fn batch_size(&self) -> usize {
        self.p * self.k
    }
}

impl Default for BatchSpec {
    fn default() -> Self {
        Self { p: 20, k: 4 }
    }
}

/// Candidate pool size `g` and hard identities per seed `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GhisConfig {
    pub g: usize,
    pub q: usize,
}

impl Default for GhisConfig {
    fn default() -> Self {
        Self { g: 5, q: 3 }
    }
}

impl GhisConfig {
    /// Requires `q < g < n` and `(q + 1) | P`.
    pub fn validate(&self, n_ids: usize, spec: &BatchSpec) -> Result<()> {
        if self.q == 0 || self.q >= self.g {
            return Err(Error::InvalidConfig(format!("need 0 < q < g, got q={} g={}", self.q, self.g)));
        }
        if self.g >= n_ids {
            return Err(Error::InvalidConfig(format!("g={} must be below the identity count {n_ids}", self.g)));
        }
        if spec.p % (self.q + 1) != 0 {
            return Err(Error::InvalidConfig(format!("q+1={} must divide P={}", self.q + 1, spec.p)));
        }
        Ok(())
    }
}

/// Identity dissimilarities `D̄`, diagonal masked to `+∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanDistanceMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl MeanDistanceMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.entries[u * self.n + v]
    }

    pub fn row(&self, u: usize) -> &[f64] {
        &self.entries[u * self.n..(u + 1) * self.n]
    }

    /// `D̄[u][v] = (1/(K_u K_v)) Σ_l Σ_r d²(e^u_l, e^v_r)` over the given
    /// per-identity embeddings, then `D̄[u][u] = +∞`.
    pub fn from_embeddings<V: AsRef<[f64]>>(per_identity: &[Vec<V>]) -> Result<Self> {
        let n = per_identity.len();
        if let Some(u) = per_identity.iter().position(Vec::is_empty) {
            return Err(Error::InvalidConfig(format!("identity slot {u} has no embeddings")));
        }
        let dim = per_identity.first().map_or(0, |e| e[0].as_ref().len());
        for e in per_identity.iter().flatten() {
            if e.as_ref().len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: e.as_ref().len() });
            }
        }
        let mut entries = vec![0.0; n * n];
        for u in 0..n {
            entries[u * n + u] = f64::INFINITY;
            for v in (u + 1)..n {
                let mut sum = 0.0;
                for a in &per_identity[u] {
                    for b in &per_identity[v] {
                        sum += sq_dist(a.as_ref(), b.as_ref());
                    }
                }
                let d = sum / (per_identity[u].len() * per_identity[v].len()) as f64;
                entries[u * n + v] = d;
                entries[v * n + u] = d;
            }
        }
        Ok(Self { n, entries })
    }
}

/// `k` sample indices from `members`: distinct when possible, otherwise
/// uniformly with replacement.
fn draw_members(members: &[usize], k: usize, rng: &mut RandomSource) -> Vec<usize> {
    if members.len() >= k {
        rng.choose_distinct(members.len(), k).into_iter().map(|i| members[i]).collect()
    } else {
        (0..k).map(|_| members[rng.below(members.len())]).collect()
    }
}

/// Probe `k_probe` samples per identity, embed them with `f_M`, and build
/// the mean distance matrix.
pub fn mean_distance_matrix(
    dataset: &Dataset,
    params: &ModelParams,
    cfg: &ModelConfig,
    k_probe: usize,
    rng: &mut RandomSource,
) -> Result<MeanDistanceMatrix> {
    if k_probe == 0 {
        return Err(Error::InvalidConfig("K_probe must be at least 1".into()));
    }
    let mut per_identity = Vec::with_capacity(dataset.identity_count());
    for slot in 0..dataset.identity_count() {
        let members = dataset.members(slot);
        if members.is_empty() {
            return Err(Error::Empty("identity without samples"));
        }
        let embs = draw_members(members, k_probe, rng)
            .into_iter()
            .map(|i| forward_trace(params, cfg, &dataset.samples()[i]).map(|t| t.out.f.last().unwrap().clone()))
            .collect::<Result<Vec<_>>>()?;
        per_identity.push(embs);
    }
    MeanDistanceMatrix::from_embeddings(&per_identity)
}

/// A seed identity and its sampled hard identities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentityGroup {
    pub seed: usize,
    pub hard: Vec<usize>,
}

/// The `g` nearest identities of `u` by `D̄`, ties to the lower slot.
pub fn candidates(dbar: &MeanDistanceMatrix, u: usize, g: usize) -> Vec<usize> {
    let row = dbar.row(u);
    let mut order: Vec<usize> = (0..dbar.len()).filter(|&v| v != u).collect();
    order.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
    order.truncate(g);
    order
}

/// One group per identity: `q` identities drawn uniformly from the `g`
/// nearest candidates. `q == g` is accepted and returns the candidates.
pub fn ghis_groups(dbar: &MeanDistanceMatrix, cfg: &GhisConfig, rng: &mut RandomSource) -> Result<Vec<IdentityGroup>> {
    if dbar.len() <= cfg.g {
        return Err(Error::NotEnoughIdentities { needed: cfg.g + 1, available: dbar.len() });
    }
    if cfg.q > cfg.g {
        return Err(Error::InvalidConfig(format!("q={} exceeds g={}", cfg.q, cfg.g)));
    }
    Ok((0..dbar.len())
        .map(|u| {
            let pool = candidates(dbar, u, cfg.g);
            let hard = rng.choose_distinct(pool.len(), cfg.q).into_iter().map(|i| pool[i]).collect();
            IdentityGroup { seed: u, hard }
        })
        .collect())
}

/// Redraws allowed per group before the assembly restarts.
pub const MAX_GROUP_REDRAWS: usize = 100;
/// Full assembly restarts before giving up.
pub const MAX_BATCH_RESTARTS: usize = 100;

/// Pick `count` groups with pairwise-disjoint members, or `None` when some
/// group cannot be placed within [`MAX_GROUP_REDRAWS`] redraws.
fn assemble_groups(groups: &[IdentityGroup], count: usize, rng: &mut RandomSource) -> Option<Vec<usize>> {
    let n = groups.len();
    let mut chosen = Vec::new();
    let mut taken = vec![false; n];
    for _ in 0..count {
        let mut accepted = false;
        for _ in 0..=MAX_GROUP_REDRAWS {
            let group = &groups[rng.below(n)];
            let mut ids: Vec<usize> = core::iter::once(group.seed).chain(group.hard.iter().copied()).collect();
            ids.sort_unstable();
            ids.dedup();
            if ids.len() == group.hard.len() + 1 && ids.iter().all(|&v| !taken[v]) {
                ids.iter().for_each(|&v| taken[v] = true);
                chosen.push(group.seed);
                chosen.extend(group.hard.iter().copied());
                accepted = true;
                break;
            }
        }
        if !accepted {
            return None;
        }
    }
    Some(chosen)
}

/// Assemble a batch from `P / (q+1)` identity groups with distinct members.
/// Returns dataset sample indices, `K` per identity, identity-major.
///
/// A group overlapping already chosen identities is redrawn; if a group
/// cannot be placed the whole assembly starts over.
pub fn ghis_batch(
    groups: &[IdentityGroup],
    spec: &BatchSpec,
    cfg: &GhisConfig,
    dataset: &Dataset,
    rng: &mut RandomSource,
) -> Result<Vec<usize>> {
    spec.validate()?;
    let size = cfg.q + 1;
    if spec.p % size != 0 {
        return Err(Error::InvalidConfig(format!("q+1={size} must divide P={}", spec.p)));
    }
    let n = dataset.identity_count();
    if groups.len() != n {
        return Err(Error::ShapeMismatch(format!("{} groups for {n} identities", groups.len())));
    }
    if let Some(g) = groups.iter().find(|g| g.hard.len() != cfg.q || g.seed >= n || g.hard.iter().any(|&h| h >= n)) {
        return Err(Error::ShapeMismatch(format!("group {g:?} does not fit q={} over {n} identities", cfg.q)));
    }
    if n < spec.p {
        return Err(Error::NotEnoughIdentities { needed: spec.p, available: n });
    }
    for _ in 0..MAX_BATCH_RESTARTS {
        if let Some(chosen) = assemble_groups(groups, spec.p / size, rng) {
            return Ok(chosen.into_iter().flat_map(|slot| draw_members(dataset.members(slot), spec.k, rng)).collect());
        }
    }
    Err(Error::GroupAssembly { needed: spec.p, attempts: MAX_BATCH_RESTARTS * MAX_GROUP_REDRAWS })
}

/// `P` distinct identities uniformly, `K` samples each.
pub fn random_pk_batch(dataset: &Dataset, spec: &BatchSpec, rng: &mut RandomSource) -> Result<Vec<usize>> {
    spec.validate()?;
    let n = dataset.identity_count();
    if n < spec.p {
        return Err(Error::NotEnoughIdentities { needed: spec.p, available: n });
    }
    let ids = rng.choose_distinct(n, spec.p);
    Ok(ids.into_iter().flat_map(|slot| draw_members(dataset.members(slot), spec.k, rng)).collect())
}

/// For every anchor: the farthest same-label sample and the nearest
/// different-label sample. Ties go to the lowest index.
pub fn batch_hard_triplets<V: AsRef<[f64]>>(embs: &[V], labels: &[u32]) -> Result<Vec<Triplet>> {
    if embs.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!("{} embeddings, {} labels", embs.len(), labels.len())));
    }
    for &l in labels {
        if labels.iter().filter(|&&x| x == l).count() < 2 {
            return Err(Error::SingletonLabel(l));
        }
    }
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::SingleIdentity);
    }
    let dist = pairwise_distances(embs)?;
    let mut out = Vec::with_capacity(embs.len());
    for (a, &la) in labels.iter().enumerate() {
        let row = dist.row(a);
        let (mut pos, mut pos_d) = (usize::MAX, f64::NEG_INFINITY);
        let (mut neg, mut neg_d) = (usize::MAX, f64::INFINITY);
        for (j, (&lj, &d)) in labels.iter().zip(row).enumerate() {
            if lj == la {
                if j != a && (pos == usize::MAX || d > pos_d) {
                    pos = j;
                    pos_d = d;
                }
            } else if neg == usize::MAX || d < neg_d {
                neg = j;
                neg_d = d;
            }
        }
        out.push(Triplet::new(a, pos, neg));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerMode {
    Random,
    Ghis,
}

/// Two random-sampling epochs, then one GHIS epoch, repeating.
pub fn epoch_sampler_schedule(epoch: usize) -> SamplerMode {
    if epoch % 3 == 2 {
        SamplerMode::Ghis
    } else {
        SamplerMode::Random
    }
}
