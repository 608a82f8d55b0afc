//! Query/gallery evaluation of checkpoints and imported embeddings.

use std::str::FromStr;

use litm_core::data::Dataset;
use litm_core::eval::{cmc_map, pair_distance_stats, Item, RetrievalSplit};
use litm_core::model::{embed_all, ModelConfig, ModelParams};
use litm_core::RandomSource;

use crate::error::LitmError;
use crate::report::EvalDocument;

/// Which embedding stage to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageSelection {
    Stage(usize),
    Final,
    All,
}

impl FromStr for StageSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "final" => Ok(Self::Final),
            "all" => Ok(Self::All),
            _ => s.parse().map(Self::Stage).map_err(|_| format!("expected a stage index, 'final' or 'all', got '{s}'")),
        }
    }
}

impl StageSelection {
    fn resolve(self, stages: usize) -> Result<Vec<usize>, LitmError> {
        match self {
            Self::Stage(j) if j < stages => Ok(vec![j]),
            Self::Stage(j) => Err(LitmError::Eval(format!("stage {j} requested, model has stages 0..={}", stages - 1))),
            Self::Final => Ok(vec![stages - 1]),
            Self::All => Ok((0..stages).collect()),
        }
    }
}

/// Per identity, the first `ceil(fraction · n)` (at least one, at most
/// `n - 1`) items of a seeded shuffle become queries, the rest gallery.
pub fn split_items(items: &[Item], query_fraction: f64, rng: &mut RandomSource) -> Result<RetrievalSplit, LitmError> {
    if !(query_fraction > 0.0 && query_fraction < 1.0) {
        return Err(LitmError::Eval(format!("query fraction {query_fraction} must lie in (0, 1)")));
    }
    let mut ids: Vec<u32> = items.iter().map(|it| it.identity).collect();
    ids.sort_unstable();
    ids.dedup();
    let (mut queries, mut gallery) = (Vec::new(), Vec::new());
    for id in ids {
        let mut members: Vec<usize> = (0..items.len()).filter(|&i| items[i].identity == id).collect();
        if members.len() < 2 {
            return Err(LitmError::Eval(format!("identity {id} needs at least two samples")));
        }
        rng.shuffle(&mut members);
        let take = ((query_fraction * members.len() as f64).ceil() as usize).clamp(1, members.len() - 1);
        queries.extend(members[..take].iter().map(|&i| items[i].clone()));
        gallery.extend(members[take..].iter().map(|&i| items[i].clone()));
    }
    Ok(RetrievalSplit { queries, gallery })
}

fn evaluate(stage: String, items: &[Item], query_fraction: f64, k_max: usize, seed: u64) -> Result<EvalDocument, LitmError> {
    let split = split_items(items, query_fraction, &mut RandomSource::new(seed))?;
    let k_max = k_max.min(split.gallery.len()).max(1);
    let report = cmc_map(&split, k_max).map_err(|e| LitmError::Eval(e.to_string()))?;
    let single: Vec<[Vec<f64>; 1]> = items.iter().map(|it| [it.embedding.clone()]).collect();
    let labels: Vec<u32> = items.iter().map(|it| it.identity).collect();
    let pairs = pair_distance_stats(&single, &labels).map_err(|e| LitmError::Eval(e.to_string()))?;
    Ok(EvalDocument { stage, report, pairs: pairs.first().copied() })
}

/// Embed `dataset` with a trained model and evaluate the selected stages on
/// one seeded query/gallery split (the same split for every stage).
pub fn evaluate_model(
    cfg: &ModelConfig,
    params: &ModelParams,
    dataset: &Dataset,
    query_fraction: f64,
    stages: StageSelection,
    k_max: usize,
    seed: u64,
) -> Result<Vec<EvalDocument>, LitmError> {
    if dataset.d_in() != cfg.d_in {
        return Err(LitmError::Eval(format!("dataset has d_in {}, model expects {}", dataset.d_in(), cfg.d_in)));
    }
    let embs = embed_all(params, cfg, dataset.samples())?;
    let mut docs = Vec::new();
    for j in stages.resolve(cfg.stages + 1)? {
        let items: Vec<Item> = embs
            .iter()
            .zip(dataset.samples())
            .map(|(e, s)| Item { embedding: e.f[j].clone(), identity: s.identity })
            .collect();
        let mut doc = evaluate(format!("f{j}"), &items, query_fraction, k_max, seed)?;
        doc.report.stage = Some(j);
        docs.push(doc);
    }
    Ok(docs)
}

pub fn evaluate_embeddings(items: &[Item], query_fraction: f64, k_max: usize, seed: u64) -> Result<EvalDocument, LitmError> {
    evaluate("external".into(), items, query_fraction, k_max, seed)
}
