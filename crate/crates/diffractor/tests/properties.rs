//! Property tests for the structural invariants: list construction produces
//! permutations with the greedy property, index distance is a metric,
//! persistence round-trips, and text perturbation preserves token counts.

use diffractor::diffract::{ConfigTag, Diffractor, ListBank};
use diffractor::embedding::{euclidean_sq, EmbeddingModel};
use diffractor::list::{build_list, Backend, WordList};
use diffractor::mechanisms::MechanismConfig;
use diffractor::tokenize::tokenize;
use proptest::prelude::*;

/// A random small embedding model: 2..=40 words, 1..=6 dims.
fn arb_model() -> impl Strategy<Value = EmbeddingModel> {
    (2usize..=40, 1usize..=6).prop_flat_map(|(n, dim)| {
        proptest::collection::vec(-100.0f32..100.0, n * dim).prop_map(move |vectors| {
            let words = (0..n).map(|i| format!("w{i:03}")).collect();
            EmbeddingModel::from_parts("prop", dim, words, vectors, false).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn built_lists_are_permutations(model in arb_model(), seed in 0u64..1000) {
        let list = build_list(&model, seed, Backend::Exact).unwrap();
        let mut got: Vec<&str> = list.words().iter().map(|s| s.as_str()).collect();
        got.sort_unstable();
        let mut want: Vec<&str> = model.words().iter().map(|s| s.as_str()).collect();
        want.sort_unstable();
        prop_assert_eq!(got, want);
        // exact inverse map
        for (i, w) in list.words().iter().enumerate() {
            prop_assert_eq!(list.index_of(w), Some(i));
        }
    }

    #[test]
    fn exact_builds_are_deterministic(model in arb_model(), seed in 0u64..1000) {
        let a = build_list(&model, seed, Backend::Exact).unwrap();
        let b = build_list(&model, seed, Backend::Exact).unwrap();
        prop_assert_eq!(a.words(), b.words());
        prop_assert_eq!(a.meta(), b.meta());
    }

    #[test]
    fn greedy_step_is_locally_nearest(model in arb_model(), seed in 0u64..1000) {
        // After step i, every word placed later is at least as far from
        // words[i-1] as words[i] is.
        let list = build_list(&model, seed, Backend::Exact).unwrap();
        let pos: Vec<usize> = list
            .words()
            .iter()
            .map(|w| model.index_of(w).unwrap())
            .collect();
        for i in 1..pos.len() {
            let prev = model.vector(pos[i - 1]);
            let chosen = euclidean_sq(prev, model.vector(pos[i]));
            for later in &pos[i + 1..] {
                let other = euclidean_sq(prev, model.vector(*later));
                prop_assert!(chosen <= other,
                    "step {i}: chosen {chosen} vs later candidate {other}");
            }
        }
    }

    #[test]
    fn index_distance_is_a_metric(model in arb_model(), seed in 0u64..1000) {
        let list = build_list(&model, seed, Backend::Exact).unwrap();
        let words = list.words();
        let n = words.len().min(12);
        for a in 0..n {
            prop_assert_eq!(list.distance(&words[a], &words[a]).unwrap(), 0);
            for b in 0..n {
                let dab = list.distance(&words[a], &words[b]).unwrap();
                prop_assert_eq!(dab, list.distance(&words[b], &words[a]).unwrap());
                if a != b {
                    prop_assert!(dab > 0);
                }
                for c in 0..n {
                    let dac = list.distance(&words[a], &words[c]).unwrap();
                    let dcb = list.distance(&words[c], &words[b]).unwrap();
                    prop_assert!(dab <= dac + dcb);
                }
            }
        }
    }

    #[test]
    fn save_load_round_trips(model in arb_model(), seed in 0u64..1000) {
        let list = build_list(&model, seed, Backend::Exact).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("list.txt");
        list.save(&path).unwrap();
        let loaded = WordList::load(&path).unwrap();
        prop_assert_eq!(&list, &loaded);
    }

    #[test]
    fn token_count_is_preserved_under_passthrough(
        words in proptest::collection::vec("[a-z]{1,6}|[0-9]{1,3}|[.,!?]", 0..30),
        eps in 0.1f64..5.0,
        seed in 0u64..100,
    ) {
        let vocab: Vec<String> = (0..20).map(|i| format!("v{i}")).collect();
        let list = WordList::from_words("m", vocab).unwrap();
        let d = Diffractor::new(
            MechanismConfig::geometric(eps, seed).unwrap(),
            ListBank::new(vec![list], ConfigTag::Custom).unwrap(),
        )
        .unwrap();
        let text = words.join(" ");
        let (out, _) = d.perturb_text(&text, 0);
        prop_assert_eq!(tokenize(&out).len(), tokenize(&text).len());
    }

    #[test]
    fn perturb_text_is_reproducible(
        eps in 0.1f64..5.0,
        seed in 0u64..100,
        line in 0u64..50,
    ) {
        let vocab: Vec<String> = (0..40).map(|i| format!("v{i}")).collect();
        let text = "v0 v5 v12 , v33 v7 ! v1 v1 v1";
        let list = WordList::from_words("m", vocab).unwrap();
        let d = Diffractor::new(
            MechanismConfig::geometric(eps, seed).unwrap(),
            ListBank::new(vec![list], ConfigTag::Custom).unwrap(),
        )
        .unwrap();
        let (a, recs_a) = d.perturb_text(text, line);
        let (b, recs_b) = d.perturb_text(text, line);
        prop_assert_eq!(a, b);
        prop_assert_eq!(recs_a, recs_b);
    }

    #[test]
    fn sampler_stays_in_range_and_pmf_sums_to_one(
        eps in 0.05f64..6.0,
        v in 1usize..60,
        seed in 0u64..50,
    ) {
        use diffractor::mechanisms::{geometric_exact_pmf, perturb_index_geometric};
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let index = (seed as usize * 7) % v;
        for _ in 0..50 {
            let out = perturb_index_geometric(index, eps, v, &mut rng).unwrap();
            prop_assert!(out < v);
        }
        let pmf = geometric_exact_pmf(index, eps, v);
        let total: f64 = pmf.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }
}
