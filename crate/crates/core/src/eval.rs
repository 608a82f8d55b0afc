//! Retrieval metrics (CMC, mAP) and pair-distance diagnostics.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::sq_dist;

/// An embedding with its identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub embedding: Vec<f64>,
    pub identity: u32,
}

/// Single-query retrieval: every query is ranked against the whole gallery.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalSplit {
    pub queries: Vec<Item>,
    pub gallery: Vec<Item>,
}

impl RetrievalSplit {
    pub fn validate(&self) -> Result<()> {
        if self.queries.is_empty() || self.gallery.is_empty() {
            return Err(Error::Empty("queries and gallery must be non-empty"));
        }
        let dim = self.gallery[0].embedding.len();
        for it in self.queries.iter().chain(&self.gallery) {
            if it.embedding.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: it.embedding.len() });
            }
        }
        for q in &self.queries {
            if !self.gallery.iter().any(|g| g.identity == q.identity) {
                return Err(Error::MissingPositive(q.identity));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `cmc[k-1]` is CMC@k.
    pub cmc: Vec<f64>,
    pub map: f64,
    pub queries: usize,
    pub gallery: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<usize>,
}

/// Gallery indices by ascending squared distance, ties to the lower index.
pub fn rank_gallery(query: &[f64], gallery: &[Item]) -> Result<Vec<usize>> {
    if gallery.is_empty() {
        return Err(Error::Empty("gallery is empty"));
    }
    if let Some(g) = gallery.iter().find(|g| g.embedding.len() != query.len()) {
        return Err(Error::DimensionMismatch { expected: query.len(), found: g.embedding.len() });
    }
    let dist: Vec<f64> = gallery.iter().map(|g| sq_dist(query, &g.embedding)).collect();
    let mut order: Vec<usize> = (0..gallery.len()).collect();
    order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
    Ok(order)
}

/// CMC@1..=k_max and mAP over all queries.
pub fn cmc_map(split: &RetrievalSplit, k_max: usize) -> Result<EvalReport> {
    split.validate()?;
    if k_max == 0 {
        return Err(Error::OutOfRange("k_max must be at least 1".into()));
    }
    let mut hits = vec![0usize; k_max];
    let mut ap_sum = 0.0;
    for q in &split.queries {
        let order = rank_gallery(&q.embedding, &split.gallery)?;
        let mut found = 0usize;
        let mut precision_sum = 0.0;
        let mut first = None;
        for (rank, &g) in order.iter().enumerate() {
            if split.gallery[g].identity == q.identity {
                found += 1;
                precision_sum += found as f64 / (rank + 1) as f64;
                first.get_or_insert(rank);
            }
        }
        if let Some(r) = first {
            hits.iter_mut().skip(r).for_each(|h| *h += 1);
        }
        ap_sum += precision_sum / found as f64;
    }
    let nq = split.queries.len() as f64;
    Ok(EvalReport {
        cmc: hits.into_iter().map(|h| h as f64 / nq).collect(),
        map: ap_sum / nq,
        queries: split.queries.len(),
        gallery: split.gallery.len(),
        stage: None,
    })
}

/// Mean squared distances of positive and negative pairs at one stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub d_ap: f64,
    pub d_an: f64,
    pub gap: f64,
}

/// Per-stage means over all unordered same-identity pairs (`d_ap`) and
/// cross-identity pairs (`d_an`), with `gap = d_an - d_ap`.
///
/// `embs[i]` lists sample `i`'s embedding at every stage.
pub fn pair_distance_stats<S: AsRef<[Vec<f64>]>>(embs: &[S], labels: &[u32]) -> Result<Vec<PairStats>> {
    if embs.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!("{} embeddings, {} labels", embs.len(), labels.len())));
    }
    let mut distinct: Vec<u32> = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::SingleIdentity);
    }
    if let Some(&l) = distinct.iter().find(|&&l| labels.iter().filter(|&&x| x == l).count() < 2) {
        return Err(Error::SingletonLabel(l));
    }
    let stages = embs[0].as_ref().len();
    if let Some(e) = embs.iter().find(|e| e.as_ref().len() != stages) {
        return Err(Error::ShapeMismatch(format!("{} stages, expected {stages}", e.as_ref().len())));
    }
    let mut out = Vec::with_capacity(stages);
    for j in 0..stages {
        let (mut sp, mut np, mut sn, mut nn) = (0.0, 0usize, 0.0, 0usize);
        for a in 0..embs.len() {
            for b in (a + 1)..embs.len() {
                let (x, y) = (&embs[a].as_ref()[j], &embs[b].as_ref()[j]);
                if x.len() != y.len() {
                    return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
                }
                let d = sq_dist(x, y);
                if labels[a] == labels[b] {
                    sp += d;
                    np += 1;
                } else {
                    sn += d;
                    nn += 1;
                }
            }
        }
        let d_ap = sp / np as f64;
        let d_an = sn / nn as f64;
        out.push(PairStats { d_ap, d_an, gap: d_an - d_ap });
    }
    Ok(out)
}
