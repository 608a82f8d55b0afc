//! Brute-force reference implementations, written from the definitions and
//! sharing no code with the library paths they check.
#![allow(dead_code)]

use litm_core::loss::Triplet;

pub fn sq(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..a.len() {
        let d = a[k] - b[k];
        s += d * d;
    }
    s
}

/// Exhaustive search over every valid (p, n) per anchor for the largest
/// `d_ap - d_an`; ties go to the lexicographically smallest (p, n).
pub fn batch_hard(embs: &[Vec<f64>], labels: &[u32]) -> Vec<Triplet> {
    let n = embs.len();
    let mut out = Vec::new();
    for a in 0..n {
        let mut best: Option<(f64, f64, usize, usize)> = None;
        for p in 0..n {
            if p == a || labels[p] != labels[a] {
                continue;
            }
            for q in 0..n {
                if labels[q] == labels[a] {
                    continue;
                }
                let (dp, dn) = (sq(&embs[a], &embs[p]), sq(&embs[a], &embs[q]));
                let better = match best {
                    None => true,
                    Some((bp, bn, _, _)) => dp > bp || (dp == bp && dn < bn),
                };
                if better {
                    best = Some((dp, dn, p, q));
                }
            }
        }
        let (_, _, p, q) = best.expect("anchor has a positive and a negative");
        out.push(Triplet::new(a, p, q));
    }
    out
}

/// Hinge value of one (a, p, n) choice.
pub fn hinge(embs: &[Vec<f64>], a: usize, p: usize, n: usize, m: f64) -> f64 {
    (sq(&embs[a], &embs[p]) - sq(&embs[a], &embs[n]) + m).max(0.0)
}

/// Double sum over probe embeddings, diagonal at infinity.
pub fn mean_distance(per_identity: &[Vec<Vec<f64>>]) -> Vec<Vec<f64>> {
    let n = per_identity.len();
    let mut d = vec![vec![0.0; n]; n];
    for u in 0..n {
        for v in 0..n {
            if u == v {
                d[u][v] = f64::INFINITY;
                continue;
            }
            let (lo, hi) = if u < v { (u, v) } else { (v, u) };
            let mut s = 0.0;
            for x in &per_identity[lo] {
                for y in &per_identity[hi] {
                    s += sq(x, y);
                }
            }
            d[u][v] = s / (per_identity[lo].len() * per_identity[hi].len()) as f64;
        }
    }
    d
}

/// CMC@1..=k_max and mAP from rank definitions: the rank of gallery item g
/// is one plus the number of items strictly ahead of it.
pub fn cmc_map(
    queries: &[(Vec<f64>, u32)],
    gallery: &[(Vec<f64>, u32)],
    k_max: usize,
) -> (Vec<f64>, f64) {
    let mut cmc = vec![0.0; k_max];
    let mut ap_total = 0.0;
    for (q, qid) in queries {
        let d: Vec<f64> = gallery.iter().map(|(g, _)| sq(q, g)).collect();
        let rank_of = |g: usize| 1 + (0..gallery.len()).filter(|&h| d[h] < d[g] || (d[h] == d[g] && h < g)).count();
        let mut pos_ranks: Vec<usize> =
            (0..gallery.len()).filter(|&g| gallery[g].1 == *qid).map(rank_of).collect();
        pos_ranks.sort_unstable();
        for k in 1..=k_max {
            if pos_ranks.iter().any(|&r| r <= k) {
                cmc[k - 1] += 1.0;
            }
        }
        let mut sum = 0.0;
        for (i, &r) in pos_ranks.iter().enumerate() {
            sum += (i + 1) as f64 / r as f64;
        }
        ap_total += sum / pos_ranks.len() as f64;
    }
    let nq = queries.len() as f64;
    (cmc.into_iter().map(|c| c / nq).collect(), ap_total / nq)
}

/// (d_ap, d_an, gap) per stage over all unordered pairs.
pub fn pair_stats(embs: &[Vec<Vec<f64>>], labels: &[u32]) -> Vec<(f64, f64, f64)> {
    let stages = embs[0].len();
    (0..stages)
        .map(|j| {
            let (mut sp, mut np, mut sn, mut nn) = (0.0, 0.0, 0.0, 0.0);
            for a in 0..embs.len() {
                for b in (a + 1)..embs.len() {
                    let d = sq(&embs[a][j], &embs[b][j]);
                    if labels[a] == labels[b] {
                        sp += d;
                        np += 1.0;
                    } else {
                        sn += d;
                        nn += 1.0;
                    }
                }
            }
            (sp / np, sn / nn, sn / nn - sp / np)
        })
        .collect()
}

/// Scalar Adam written straight from the update equations.
pub struct ScalarAdam {
    pub m: f64,
    pub v: f64,
    pub t: i32,
}

impl ScalarAdam {
    pub fn new() -> Self {
        Self { m: 0.0, v: 0.0, t: 0 }
    }

    pub fn step(&mut self, x: f64, g: f64, lr: f64, b1: f64, b2: f64, eps: f64) -> f64 {
        self.t += 1;
        self.m = b1 * self.m + (1.0 - b1) * g;
        self.v = b2 * self.v + (1.0 - b2) * g * g;
        let mh = self.m / (1.0 - b1.powi(self.t));
        let vh = self.v / (1.0 - b2.powi(self.t));
        x - lr * mh / (vh.sqrt() + eps)
    }
}
