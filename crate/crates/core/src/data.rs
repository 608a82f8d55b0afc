//! In-memory datasets and the synthetic identity generator.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Sample;
use crate::numeric::{sq_dist, RandomSource};

/// A set of samples with a per-identity index.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    d_in: usize,
    descriptors: usize,
    samples: Vec<Sample>,
    ids: Vec<u32>,
    members: Vec<Vec<usize>>,
}

impl Dataset {
    /// All samples must share descriptor count and dimension.
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        let first = samples.first().ok_or(Error::Empty("dataset has no samples"))?;
        let descriptors = first.descriptors.len();
        let d_in = first.descriptors.first().map_or(0, |d| d.len());
        if descriptors == 0 || d_in == 0 {
            return Err(Error::Empty("samples need at least one non-empty descriptor"));
        }
        for s in &samples {
            if s.descriptors.len() != descriptors {
                return Err(Error::DimensionMismatch { expected: descriptors, found: s.descriptors.len() });
            }
            if let Some(d) = s.descriptors.iter().find(|d| d.len() != d_in) {
                return Err(Error::DimensionMismatch { expected: d_in, found: d.len() });
            }
        }
        let mut ids: Vec<u32> = samples.iter().map(|s| s.identity).collect();
        ids.sort_unstable();
        ids.dedup();
        let mut members = alloc::vec![Vec::new(); ids.len()];
        for (i, s) in samples.iter().enumerate() {
            let slot = ids.binary_search(&s.identity).expect("identity indexed above");
            members[slot].push(i);
        }
        Ok(Self { d_in, descriptors, samples, ids, members })
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    /// Descriptors per sample.
    pub fn descriptors(&self) -> usize {
        self.descriptors
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Distinct identity labels, ascending.
    pub fn identities(&self) -> &[u32] {
        &self.ids
    }

    pub fn identity_count(&self) -> usize {
        self.ids.len()
    }

    /// Sample indices of the identity at position `slot` in [`Self::identities`].
    pub fn members(&self, slot: usize) -> &[usize] {
        &self.members[slot]
    }

    /// Split each identity's samples: the first `ceil(fraction · n)` (at least
    /// one, at most `n - 1`) of a seeded shuffle go to the first set.
    pub fn split_per_identity(&self, fraction: f64, rng: &mut RandomSource) -> Result<(Dataset, Dataset)> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::OutOfRange(format!("split fraction {fraction} not in [0, 1]")));
        }
        let (mut first, mut second) = (Vec::new(), Vec::new());
        for (slot, members) in self.members.iter().enumerate() {
            if members.len() < 2 {
                return Err(Error::InvalidConfig(format!(
                    "identity {} needs at least two samples to split",
                    self.ids[slot]
                )));
            }
            let mut order = members.clone();
            rng.shuffle(&mut order);
            let take = (libm::ceil(fraction * order.len() as f64) as usize).clamp(1, order.len() - 1);
            first.extend(order[..take].iter().map(|&i| self.samples[i].clone()));
            second.extend(order[take..].iter().map(|&i| self.samples[i].clone()));
        }
        Ok((Dataset::new(first)?, Dataset::new(second)?))
    }
}

/// Synthetic identities: Gaussian descriptor clouds around per-identity
/// centers, with some identities paired into close "twins".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_ids: usize,
    pub samples_per_id: usize,
    pub d_in: usize,
    /// Descriptors per sample.
    pub descriptors: usize,
    /// Per-coordinate standard deviation of descriptor noise.
    pub cluster_spread: f64,
    pub hard_pair_fraction: f64,
    pub twin_distance: f64,
    /// Side length of the hypercube holding identity centers.
    #[serde(default = "default_range")]
    pub center_range: f64,
    /// Share of each sample's descriptors drawn around the identity center
    /// (at least one per sample). The rest are identity-free background
    /// descriptors: noise of the same scale around the origin.
    #[serde(default = "default_foreground")]
    pub foreground_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_range() -> f64 {
    1.0
}

fn default_foreground() -> f64 {
    1.0
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.n_ids < 4 {
            return bad("n_ids must be at least 4");
        }
        if self.samples_per_id < 2 {
            return bad("samples_per_id must be at least 2");
        }
        if self.d_in == 0 || self.descriptors == 0 {
            return bad("d_in and descriptors must be positive");
        }
        if !(0.0..=1.0).contains(&self.hard_pair_fraction) {
            return bad("hard_pair_fraction must lie in [0, 1]");
        }
        if !(self.foreground_fraction > 0.0 && self.foreground_fraction <= 1.0) {
            return bad("foreground_fraction must lie in (0, 1]");
        }
        if !(self.cluster_spread >= 0.0) || !(self.twin_distance > 0.0) || !(self.center_range > 0.0) {
            return bad("cluster_spread must be non-negative, twin_distance and center_range positive");
        }
        // Mean distance between uniform points in a cube of side s is about s·sqrt(d/6).
        let typical = self.center_range * libm::sqrt(self.d_in as f64 / 6.0);
        if self.twin_distance >= typical {
            return Err(Error::InvalidConfig(format!(
                "twin_distance {} must be below the typical center distance {typical:.3}",
                self.twin_distance
            )));
        }
        Ok(())
    }

    /// Identity-bearing descriptors per sample.
    pub fn foreground_descriptors(&self) -> usize {
        (libm::round(self.foreground_fraction * self.descriptors as f64) as usize).clamp(1, self.descriptors)
    }

    pub fn twin_pairs(&self) -> usize {
        libm::floor(self.hard_pair_fraction * self.n_ids as f64 / 2.0) as usize
    }
}

/// Generator output: the dataset plus the ground truth behind it.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub dataset: Dataset,
    pub centers: Vec<Vec<f64>>,
    /// Partner identity for twinned identities.
    pub twin_of: Vec<Option<usize>>,
}

const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

/// Identity `i` gets label `i`; samples are stored identity-major.
///
/// Non-partner centers are kept more than `2 · twin_distance` apart, so only
/// twins sit at `twin_distance`.
pub fn generate(cfg: &SynthConfig) -> Result<Synthetic> {
    cfg.validate()?;
    let mut rng = RandomSource::new(cfg.seed);
    let n = cfg.n_ids;
    let mut twin_of = alloc::vec![None; n];
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    for pair in order.chunks_exact(2).take(cfg.twin_pairs()) {
        twin_of[pair[0]] = Some(pair[1]);
        twin_of[pair[1]] = Some(pair[0]);
    }

    let min_sep = 2.0 * cfg.twin_distance;
    let mut centers: Vec<Option<Vec<f64>>> = alloc::vec![None; n];
    for i in 0..n {
        let partner = twin_of[i].and_then(|p| centers[p].clone());
        let mut placed = None;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let c: Vec<f64> = match &partner {
                Some(p) => {
                    let dir: Vec<f64> = (0..cfg.d_in).map(|_| rng.standard_normal()).collect();
                    let norm = libm::sqrt(dir.iter().map(|x| x * x).sum::<f64>());
                    p.iter().zip(&dir).map(|(a, d)| a + cfg.twin_distance * d / norm).collect()
                }
                None => (0..cfg.d_in).map(|_| rng.uniform_in(0.0, cfg.center_range)).collect(),
            };
            let clear = centers.iter().enumerate().all(|(k, other)| match other {
                Some(o) if Some(k) != twin_of[i] => sq_dist(o, &c) > min_sep * min_sep,
                _ => true,
            });
            if clear {
                placed = Some(c);
                break;
            }
        }
        let c = placed.ok_or_else(|| {
            Error::InvalidConfig(format!("could not place identity {i}; centers are too crowded"))
        })?;
        centers[i] = Some(c);
    }
    let centers: Vec<Vec<f64>> = centers.into_iter().map(|c| c.expect("all placed")).collect();

    let foreground = cfg.foreground_descriptors();
    let mut samples = Vec::with_capacity(n * cfg.samples_per_id);
    for (i, c) in centers.iter().enumerate() {
        for _ in 0..cfg.samples_per_id {
            let mut descriptors: Vec<Vec<f64>> = (0..cfg.descriptors)
                .map(|r| {
                    let noise = (0..cfg.d_in).map(|_| cfg.cluster_spread * rng.standard_normal());
                    if r < foreground {
                        c.iter().zip(noise).map(|(x, e)| x + e).collect()
                    } else {
                        noise.collect()
                    }
                })
                .collect();
            if foreground < cfg.descriptors {
                rng.shuffle(&mut descriptors);
            }
            samples.push(Sample { identity: i as u32, descriptors });
        }
    }
    Ok(Synthetic { dataset: Dataset::new(samples)?, centers, twin_of })
}
