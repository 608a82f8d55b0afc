use litm_core::data::{generate, Dataset, SynthConfig};
use litm_core::mining::{
    candidates, ghis_batch, ghis_groups, mean_distance_matrix, random_pk_batch, BatchSpec, GhisConfig,
};
use litm_core::model::{init_params, ModelConfig, Sample};
use litm_core::RandomSource;

fn grid(n: u32, per: usize) -> Dataset {
    let samples = (0..n)
        .flat_map(|id| (0..per).map(move |r| Sample::new(id, vec![vec![id as f64, r as f64]]).unwrap()))
        .collect();
    Dataset::new(samples).unwrap()
}

#[test]
fn random_pk_inclusion_is_uniform() {
    let data = grid(10, 3);
    let spec = BatchSpec { p: 5, k: 2 };
    let mut rng = RandomSource::new(99);
    let draws = 10_000;
    let mut counts = [0usize; 10];
    for _ in 0..draws {
        let batch = random_pk_batch(&data, &spec, &mut rng).unwrap();
        let mut ids: Vec<u32> = batch.iter().map(|&i| data.samples()[i].identity).collect();
        ids.dedup();
        assert_eq!(ids.len(), 5);
        ids.iter().for_each(|&id| counts[id as usize] += 1);
    }
    // Binomial(10⁴, 0.5): σ = 50.
    let sigma = (draws as f64 * 0.25).sqrt();
    for c in counts {
        assert!((c as f64 - draws as f64 / 2.0).abs() <= 3.0 * sigma, "{counts:?}");
    }
}

#[test]
fn small_identities_sampled_with_replacement() {
    let data = grid(4, 1);
    let batch = random_pk_batch(&data, &BatchSpec { p: 4, k: 3 }, &mut RandomSource::new(1)).unwrap();
    assert_eq!(batch.len(), 12);
}

fn twinned(seed: u64) -> (Dataset, Vec<Option<usize>>) {
    let s = generate(&SynthConfig {
        n_ids: 20,
        samples_per_id: 4,
        d_in: 8,
        descriptors: 3,
        cluster_spread: 0.05,
        hard_pair_fraction: 0.5,
        twin_distance: 0.05,
        center_range: 2.0,
        foreground_fraction: 1.0,
        seed,
    })
    .unwrap();
    (s.dataset, s.twin_of)
}

#[test]
fn twins_land_in_each_others_candidate_pools() {
    let model = ModelConfig { hidden_dims: vec![16, 16, 16], d_emb: 8, ..ModelConfig::new(8) };
    let (mut hits, mut total) = (0, 0);
    for seed in 0..10 {
        let (data, twin_of) = twinned(seed);
        let mut rng = RandomSource::new(seed);
        let params = init_params(&model, &mut rng).unwrap();
        let dbar = mean_distance_matrix(&data, &params, &model, 4, &mut rng).unwrap();
        for (u, t) in twin_of.iter().enumerate() {
            if let Some(t) = t {
                total += 1;
                hits += usize::from(candidates(&dbar, u, 5).contains(t));
            }
        }
    }
    assert!(hits as f64 >= 0.9 * total as f64, "{hits}/{total}");
}

#[test]
fn ghis_hard_sets_come_from_nearest_candidates() {
    let (data, _) = twinned(3);
    let model = ModelConfig { hidden_dims: vec![8, 8, 8], d_emb: 8, ..ModelConfig::new(8) };
    let mut rng = RandomSource::new(5);
    let params = init_params(&model, &mut rng).unwrap();
    let dbar = mean_distance_matrix(&data, &params, &model, 4, &mut rng).unwrap();
    let cfg = GhisConfig { g: 5, q: 3 };
    let groups = ghis_groups(&dbar, &cfg, &mut rng).unwrap();
    for g in &groups {
        let pool = candidates(&dbar, g.seed, 5);
        assert!(g.hard.iter().all(|h| pool.contains(h)));
        assert!(!g.hard.contains(&g.seed));
        let worst_in = g.hard.iter().map(|&h| dbar.get(g.seed, h)).fold(f64::MIN, f64::max);
        let outside = (0..20).filter(|v| *v != g.seed && !pool.contains(v));
        assert!(outside.map(|v| dbar.get(g.seed, v)).all(|d| d >= worst_in));
    }
    let spec = BatchSpec { p: 8, k: 4 };
    for _ in 0..20 {
        let batch = ghis_batch(&groups, &spec, &cfg, &data, &mut rng).unwrap();
        let mut ids: Vec<u32> = batch.iter().map(|&i| data.samples()[i].identity).collect();
        assert_eq!(ids.len(), 32);
        ids.dedup();
        assert_eq!(ids.len(), 8);
    }
}
