use mehk_core::controllers::{ElmanController, HkController, HkParams};
use mehk_core::cppn::{CppnGenome, MutationParams};
use mehk_core::morphology::{decode, sparsity_score, sparsity_scores, MorphDescriptor, DEFAULT_CONTENT_THRESHOLD, HEAD, MAX_COMPONENTS};
use mehk_core::ncmaes::{novelty_score, novelty_weight, rank, Evaluation, ObjectiveWeights};
use mehk_core::seeds;
use mehk_core::selection::{dominates, pareto_front, ScoredDesign};
use mehk_core::sim::{coverage_score, ArenaSpec};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn genome(seed: u64, mutations: usize) -> CppnGenome {
    let mut rng = seeds::rng(seed);
    let params = MutationParams::default();
    let mut g = CppnGenome::random(&mut rng, &params);
    for _ in 0..mutations {
        g = g.mutate(&params, &mut rng);
    }
    g
}

fn point(id: u64, f: f64, s: f64) -> ScoredDesign {
    ScoredDesign { individual_id: id, design_id: id, fitness: f, sparsity: s }
}

fn brute_front(points: &[ScoredDesign]) -> Vec<ScoredDesign> {
    points.iter().filter(|p| !points.iter().any(|q| dominates(q, p))).cloned().collect()
}

fn descriptor(entries: &[(u8, u8, u8, u8)]) -> MorphDescriptor {
    MorphDescriptor::from_entries(entries.iter().map(|&(x, y, z, v)| ([x, y, z], v)))
}

fn dense_distance(a: &MorphDescriptor, b: &MorphDescriptor) -> f64 {
    a.dense().iter().zip(b.dense()).map(|(&x, y)| (x as f64 - y as f64).powi(2)).sum::<f64>().sqrt()
}

fn descriptors() -> impl Strategy<Value = Vec<MorphDescriptor>> {
    prop::collection::vec(prop::collection::vec((0u8..11, 0u8..11, 0u8..11, 1u8..5), 0..8), 2..30)
        .prop_map(|all| all.iter().map(|e| descriptor(e)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mutation_chains_keep_genomes_valid(seed in any::<u64>(), steps in 0usize..40) {
        let g = genome(seed, steps);
        prop_assert!(g.validate().is_ok());
        prop_assert!(g.connections().iter().all(|c| c.weight.abs() <= MutationParams::default().weight_bound));
    }

    #[test]
    fn decoded_designs_satisfy_invariants(seed in any::<u64>(), steps in 0usize..20, theta in 0.0f64..0.9) {
        let d = decode(&genome(seed, steps), theta);
        prop_assert!(d.validate().is_ok());
        prop_assert!(d.components().len() <= MAX_COMPONENTS);
        prop_assert_eq!(d.at(HEAD), mehk_core::morphology::VoxelContent::Chassis);
    }

    #[test]
    fn genome_json_round_trip(seed in any::<u64>(), steps in 0usize..10) {
        let g = genome(seed, steps);
        prop_assert_eq!(CppnGenome::from_json(&g.to_json().unwrap()).unwrap(), g);
    }

    #[test]
    fn descriptor_distance_matches_dense(a in prop::collection::vec((0u8..11, 0u8..11, 0u8..11, 1u8..5), 0..8),
                                         b in prop::collection::vec((0u8..11, 0u8..11, 0u8..11, 1u8..5), 0..8)) {
        let (da, db) = (descriptor(&a), descriptor(&b));
        prop_assert!((da.distance(&db) - dense_distance(&da, &db)).abs() < 1e-12);
        prop_assert_eq!(da.distance(&db), db.distance(&da));
    }

    #[test]
    fn sparsity_is_permutation_invariant(descs in descriptors(), rot in 0usize..30) {
        let k = 15.min(descs.len() - 1);
        let base = sparsity_scores(&descs, k).unwrap();
        let r = rot % descs.len();
        let mut rotated = descs.clone();
        rotated.rotate_left(r);
        let again = sparsity_scores(&rotated, k).unwrap();
        for i in 0..descs.len() {
            prop_assert!((base[i] - again[(i + descs.len() - r) % descs.len()]).abs() < 1e-12);
        }
    }

    #[test]
    fn sparsity_matches_brute_force(descs in descriptors()) {
        let k = 15.min(descs.len() - 1);
        let all = sparsity_scores(&descs, k).unwrap();
        for (i, d) in descs.iter().enumerate() {
            let pool: Vec<MorphDescriptor> = descs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, p)| p.clone()).collect();
            let mut dist: Vec<f64> = pool.iter().map(|p| dense_distance(d, p)).collect();
            dist.sort_by(f64::total_cmp);
            let oracle = dist[..k].iter().sum::<f64>() / k as f64;
            prop_assert!((all[i] - oracle).abs() < 1e-12);
            prop_assert!((sparsity_score(d, &pool, k).unwrap() - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn pareto_front_matches_dominance_oracle(raw in prop::collection::vec((0u8..8, 0u8..8), 1..60)) {
        // Coarse coordinates force ties and duplicates.
        let pts: Vec<ScoredDesign> = raw.iter().enumerate().map(|(i, &(f, s))| point(i as u64, f as f64, s as f64)).collect();
        let front = pareto_front(&pts);
        prop_assert_eq!(&front, &brute_front(&pts));
        prop_assert_eq!(pareto_front(&front), front);
    }

    #[test]
    fn elman_flatten_is_a_bijection(n in 1usize..8, m in 1usize..6, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = seeds::rng(seed);
        let params: Vec<f64> = (0..ElmanController::param_count(n, m)).map(|_| rng.random_range(-2.0..2.0)).collect();
        let e = ElmanController::from_flat(n, m, &params).unwrap();
        prop_assert_eq!(e.flat(), params);
        prop_assert!(ElmanController::from_flat(n, m, &[0.0; 3]).is_err() || ElmanController::param_count(n, m) == 3);
    }

    #[test]
    fn hk_parameters_stay_inside_the_clip(seed in any::<u64>(), scale in 1.0f64..1e6) {
        use rand::Rng;
        let mut rng = seeds::rng(seed);
        let p = HkParams { clip: 2.0, eps_c: 5.0, eps_a: 5.0, ..Default::default() };
        let mut hk = HkController::with_parameters(
            DMatrix::from_fn(2, 3, |_, _| rng.random_range(-1.0..1.0)),
            DVector::zeros(2),
            DMatrix::from_fn(3, 2, |_, _| rng.random_range(-1.0..1.0)),
            DVector::zeros(3),
            p,
        ).unwrap();
        for _ in 0..50 {
            let s: Vec<f64> = (0..3).map(|_| rng.random_range(-scale..scale)).collect();
            let out = hk.step(&s).unwrap();
            prop_assert!(out.action.iter().all(|a| a.is_finite() && a.abs() <= 1.0));
            prop_assert!(hk.flat().iter().all(|v| v.abs() <= p.clip));
        }
    }

    #[test]
    fn novelty_matches_brute_force(pool in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 0..200),
                                   b in (-5.0f64..5.0, -5.0f64..5.0), k in 1usize..20) {
        let pool: Vec<[f64; 2]> = pool.into_iter().map(|(x, y)| [x, y]).collect();
        let mut d: Vec<f64> = pool.iter().map(|p| ((p[0] - b.0).powi(2) + (p[1] - b.1).powi(2)).sqrt()).collect();
        d.sort_by(f64::total_cmp);
        let kk = k.min(d.len());
        let oracle = if kk == 0 { 0.0 } else { d[..kk].iter().sum::<f64>() / kk as f64 };
        prop_assert!((novelty_score([b.0, b.1], &pool, k) - oracle).abs() < 1e-12);
    }

    #[test]
    fn task_only_ranking_is_task_argsort(tasks in prop::collection::vec(-10.0f64..10.0, 2..60), seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = seeds::rng(seed);
        let evals: Vec<Evaluation> = tasks.iter().map(|&t| Evaluation { task: t, behavior: [0.0, 0.0], fault: false }).collect();
        let novelty: Vec<f64> = tasks.iter().map(|_| rng.random_range(0.0..5.0)).collect();
        let mut oracle: Vec<usize> = (0..tasks.len()).collect();
        oracle.sort_by(|&a, &b| tasks[b].total_cmp(&tasks[a]));
        prop_assert_eq!(rank(&evals, &novelty, ObjectiveWeights::task_only()), oracle);
    }

    #[test]
    fn weights_always_sum_to_one(g in 0u64..1000) {
        let w = ObjectiveWeights::at_generation(g);
        prop_assert!((w.w_novelty + w.w_task - 1.0).abs() < 1e-15);
        prop_assert_eq!(w.w_novelty, novelty_weight(g));
        prop_assert!((0.0..=1.0).contains(&w.w_novelty));
    }

    #[test]
    fn coverage_never_decreases(path in prop::collection::vec((0.0f64..4.0, 0.0f64..4.0), 1..100)) {
        let arena = ArenaSpec::exploration();
        let pts: Vec<[f64; 2]> = path.into_iter().map(|(x, y)| [x, y]).collect();
        let mut last = 0.0;
        for i in 1..=pts.len() {
            let c = coverage_score(pts[..i].iter().copied(), &arena);
            prop_assert!(c >= last && c <= 1.0 && c >= 1.0 / 64.0);
            last = c;
        }
    }
}

#[test]
fn default_content_threshold() {
    assert_eq!(DEFAULT_CONTENT_THRESHOLD, 0.3);
}
