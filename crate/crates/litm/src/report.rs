//! Plain-text tables and CSV dumps for training logs and evaluations.

use std::fmt::Write;

use litm_core::eval::{EvalReport, PairStats};
use litm_core::mining::{IdentityGroup, SamplerMode};
use litm_core::train::MetricsRow;
use serde::{Deserialize, Serialize};

/// Right-aligned columns, left-aligned first column.
pub fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &mut dyn Iterator<Item = &str>| {
        let mut s = String::new();
        for (i, (c, w)) in cells.zip(&widths).enumerate() {
            if i == 0 {
                write!(s, "{c:<w$}").unwrap();
            } else {
                write!(s, "  {c:>w$}").unwrap();
            }
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    line(&mut headers.iter().copied());
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    line(&mut rule.iter().map(String::as_str));
    for r in rows {
        line(&mut r.iter().map(String::as_str));
    }
    out
}

fn num(v: f64) -> String {
    format!("{v:.4}")
}

/// Per-epoch means of the logged quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSummary {
    pub epoch: usize,
    pub iterations: usize,
    /// Iterations drawn by GHIS.
    pub ghis: usize,
    pub lr: f64,
    pub total: f64,
    pub losses: Vec<f64>,
    pub d_ap: Vec<f64>,
    pub d_an: Vec<f64>,
    pub gap: Vec<f64>,
}

impl EpochSummary {
    fn sampler(&self) -> &'static str {
        match self.ghis {
            0 => "random",
            g if g == self.iterations => "ghis",
            _ => "mixed",
        }
    }
}

fn add(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

pub fn summarize(rows: &[MetricsRow]) -> Vec<EpochSummary> {
    let mut out: Vec<EpochSummary> = Vec::new();
    for r in rows {
        if out.last().is_none_or(|s| s.epoch != r.epoch) {
            let m = r.report.losses.len();
            out.push(EpochSummary {
                epoch: r.epoch,
                iterations: 0,
                ghis: 0,
                lr: r.lr,
                total: 0.0,
                losses: vec![0.0; m],
                d_ap: vec![0.0; m],
                d_an: vec![0.0; m],
                gap: vec![0.0; m],
            });
        }
        let s = out.last_mut().unwrap();
        s.iterations += 1;
        s.ghis += usize::from(r.sampler == SamplerMode::Ghis);
        s.total += r.report.total;
        add(&mut s.losses, &r.report.losses);
        add(&mut s.d_ap, &r.report.d_ap);
        add(&mut s.d_an, &r.report.d_an);
        add(&mut s.gap, &r.report.gap);
    }
    for s in &mut out {
        let n = s.iterations as f64;
        s.total /= n;
        for v in s.losses.iter_mut().chain(&mut s.d_ap).chain(&mut s.d_an).chain(&mut s.gap) {
            *v /= n;
        }
    }
    out
}

/// One row per stage: loss and mined-triplet distances averaged over the
/// last `tail` epochs.
pub fn stage_table(summaries: &[EpochSummary], tail: usize) -> String {
    let Some(last) = summaries.last() else {
        return "no iterations logged\n".into();
    };
    let window = &summaries[summaries.len().saturating_sub(tail.max(1))..];
    let mean = |f: &dyn Fn(&EpochSummary) -> f64| window.iter().map(f).sum::<f64>() / window.len() as f64;
    let rows = (0..last.losses.len())
        .map(|j| {
            vec![
                format!("f{j}"),
                num(mean(&|s| s.losses[j])),
                num(mean(&|s| s.d_ap[j])),
                num(mean(&|s| s.d_an[j])),
                num(mean(&|s| s.gap[j])),
            ]
        })
        .collect::<Vec<_>>();
    table(&["stage", "loss", "d_ap", "d_an", "gap"], &rows)
}

pub fn epoch_table(summaries: &[EpochSummary]) -> String {
    let m = summaries.first().map_or(0, |s| s.losses.len());
    let mut headers = vec!["epoch".to_string(), "sampler".into(), "lr".into(), "total".into()];
    headers.extend((0..m).map(|j| format!("loss{j}")));
    headers.extend((0..m).map(|j| format!("gap{j}")));
    let rows: Vec<Vec<String>> = summaries
        .iter()
        .map(|s| {
            let mut r = vec![s.epoch.to_string(), s.sampler().into(), format!("{:.3e}", s.lr), num(s.total)];
            r.extend(s.losses.iter().map(|&v| num(v)));
            r.extend(s.gap.iter().map(|&v| num(v)));
            r
        })
        .collect();
    let headers: Vec<&str> = headers.iter().map(String::as_str).collect();
    table(&headers, &rows)
}

/// Per-epoch curves, one column per stage and quantity.
pub fn epochs_csv(summaries: &[EpochSummary]) -> String {
    let m = summaries.first().map_or(0, |s| s.losses.len());
    let mut out = String::from("epoch,sampler,lr,total");
    for q in ["loss", "d_ap", "d_an", "gap"] {
        for j in 0..m {
            write!(out, ",{q}{j}").unwrap();
        }
    }
    out.push('\n');
    for s in summaries {
        write!(out, "{},{},{},{}", s.epoch, s.sampler(), s.lr, s.total).unwrap();
        for v in s.losses.iter().chain(&s.d_ap).chain(&s.d_an).chain(&s.gap) {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// What `eval` writes: the retrieval report plus the distance statistics of
/// the evaluated embeddings (when every identity has two samples).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalDocument {
    /// `f<j>`, or `external` for imported embeddings.
    pub stage: String,
    #[serde(flatten)]
    pub report: EvalReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<PairStats>,
}

const CMC_RANKS: [usize; 4] = [1, 5, 10, 20];

pub fn eval_table(docs: &[EvalDocument]) -> String {
    let k_max = docs.iter().map(|d| d.report.cmc.len()).min().unwrap_or(0);
    let ranks: Vec<usize> = CMC_RANKS.iter().copied().filter(|&k| k <= k_max).collect();
    let mut headers: Vec<String> = vec!["stage".into(), "mAP".into()];
    headers.extend(ranks.iter().map(|k| format!("CMC@{k}")));
    headers.extend(["d_ap", "d_an", "gap"].map(String::from));
    let rows: Vec<Vec<String>> = docs
        .iter()
        .map(|d| {
            let mut r = vec![d.stage.clone(), num(d.report.map)];
            r.extend(ranks.iter().map(|&k| num(d.report.cmc[k - 1])));
            match &d.pairs {
                Some(p) => r.extend([num(p.d_ap), num(p.d_an), num(p.gap)]),
                None => r.extend(["-", "-", "-"].map(String::from)),
            }
            r
        })
        .collect();
    let headers: Vec<&str> = headers.iter().map(String::as_str).collect();
    let mut out = table(&headers, &rows);
    if let Some(d) = docs.first() {
        writeln!(out, "{} queries, {} gallery items", d.report.queries, d.report.gallery).unwrap();
    }
    out
}

pub fn cmc_csv(docs: &[EvalDocument]) -> String {
    let mut out = String::from("rank");
    for d in docs {
        write!(out, ",{}", d.stage).unwrap();
    }
    out.push('\n');
    let k_max = docs.iter().map(|d| d.report.cmc.len()).min().unwrap_or(0);
    for k in 0..k_max {
        write!(out, "{}", k + 1).unwrap();
        for d in docs {
            write!(out, ",{}", d.report.cmc[k]).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Hard identity sets of one GHIS epoch, by identity label.
pub fn ghis_table(epoch: usize, groups: &[IdentityGroup], labels: &[u32]) -> String {
    let rows: Vec<Vec<String>> = groups
        .iter()
        .map(|g| {
            let hard: Vec<String> = g.hard.iter().map(|&v| labels[v].to_string()).collect();
            vec![labels[g.seed].to_string(), hard.join(" ")]
        })
        .collect();
    format!("epoch {epoch}\n{}", table(&["identity", "hard identities"], &rows))
}
