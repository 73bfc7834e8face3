mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use shape_motif::descriptor::js_divergence;
use shape_motif::dictionary::{train_dictionary, DictionaryParams, WordId};
use shape_motif::ensemble::decide;
use shape_motif::evaluation::{metrics, rank_of, Prediction};
use shape_motif::motif::{beta_from, gamma_from, match_activation, HierarchyParams, MotifHierarchy, WordMotif};

use common::{brute_force_embeddings, exhaustive_assign, instance, random_simplex};

fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.0f64..1.0, n).prop_filter_map("zero mass", |w| {
        let s: f64 = w.iter().sum();
        (s > 1e-9).then(|| w.into_iter().map(|x| x / s).collect())
    })
}

fn graph(max: usize) -> impl Strategy<Value = (Vec<u32>, Vec<(usize, usize)>)> {
    (1..=max).prop_flat_map(|n| {
        (
            proptest::collection::vec(0u32..3, n),
            proptest::collection::vec((0..n, 0..n), 0..=n * 2)
                .prop_map(|e| e.into_iter().filter(|(a, b)| a != b).collect::<Vec<_>>()),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn js_is_bounded_and_symmetric(p in simplex(12), q in simplex(12)) {
        let pq = js_divergence(&p, &q);
        prop_assert!((0.0..=std::f64::consts::LN_2 + 1e-12).contains(&pq));
        prop_assert_eq!(pq, js_divergence(&q, &p));
    }

    #[test]
    fn beta_and_gamma_are_distributions(
        alphas in proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 3), 1..6),
        priors in proptest::collection::vec(simplex(3), 6),
    ) {
        let p_y_v = &priors[..alphas.len()];
        let beta = beta_from(&alphas, p_y_v, 3);
        let total: f64 = beta.iter().sum();
        prop_assert!(total == 0.0 || (total - 1.0).abs() < 1e-9);
        let gamma = gamma_from(&[beta.clone(), beta], &priors[..2], 3);
        let total: f64 = gamma.iter().sum();
        prop_assert!(total == 0.0 || (total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn decision_scores_sum_to_one_or_reject(gammas in proptest::collection::vec(simplex(4), 1..5), threshold in 0.0f64..1.0) {
        let r = decide(gammas, 4, threshold);
        prop_assert!((r.scores.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        match r.label {
            Some(y) => {
                prop_assert!(r.confidence >= threshold);
                prop_assert_eq!(rank_of(y, &r.scores), 1);
            }
            None => prop_assert!(r.confidence < threshold),
        }
    }

    #[test]
    fn matching_equals_brute_force(target in graph(6), motif in graph(4)) {
        let word = |w: u32| WordId::new(2, w);
        let t = WordMotif::new(target.0.iter().map(|&w| word(w)).collect(), target.1).unwrap();
        let m = WordMotif::new(motif.0.iter().map(|&w| word(w)).collect(), motif.1).unwrap();
        prop_assert_eq!(match_activation(&m, &t), brute_force_embeddings(&m, &t));
    }

    #[test]
    fn training_instance_activates_itself(g in graph(5), seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let descriptions: Vec<Vec<f64>> = g.0.iter().map(|_| random_simplex(&mut rng, 5)).collect();
        let inst = instance(&g.0, &descriptions, &g.1, 2);
        let mut h = MotifHierarchy::new(2, vec!["a".into()], HierarchyParams::default()).unwrap();
        h.train_instance(&inst, "a").unwrap();
        // Level 1 holds one vertex per distinct word motif of a single segment.
        let distinct: std::collections::BTreeSet<u32> = g.0.iter().copied().collect();
        prop_assert_eq!(h.level_sizes()[0].0, distinct.len());
        let response = h.respond(&inst).unwrap();
        prop_assert!(response.is_active());
        prop_assert!((response.gamma.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dictionary_assignment_is_nearest_centroid(seed in 0u64..500, levels in 1u32..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<Vec<f64>> = (0..40).map(|_| random_simplex(&mut rng, 4)).collect();
        let dict = train_dictionary(&data, DictionaryParams { n_levels: levels, kmeans_restarts: 2, seed }).unwrap();
        for f in 1..=levels {
            prop_assert!(dict.level(f).unwrap().len() <= 1 << f);
            for q in data.iter().take(10) {
                prop_assert_eq!(dict.assign(q, f).unwrap(), exhaustive_assign(&dict, q, f));
            }
        }
    }

    #[test]
    fn confusion_rows_count_every_instance(truths in proptest::collection::vec((0usize..3, proptest::option::of(0usize..3)), 0..40)) {
        let labels: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let preds: Vec<Prediction> = truths
            .iter()
            .map(|&(t, p)| Prediction { truth: t, predicted: p, scores: vec![0.2, 0.3, 0.5] })
            .collect();
        let m = metrics(&labels, &preds);
        for y in 0..3 {
            prop_assert_eq!(m.confusion.row_sums()[y], truths.iter().filter(|(t, _)| *t == y).count());
        }
        let wrong = truths.iter().filter(|(t, p)| *p != Some(*t)).count();
        let expected = if truths.is_empty() { 0.0 } else { wrong as f64 / truths.len() as f64 };
        prop_assert!((m.error - expected).abs() < 1e-12);
    }
}
