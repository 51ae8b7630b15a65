mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use subprof::corpus::TermBag;
use subprof::profiles::{ProfileKey, ProfileRef, Subprofile};
use subprof::retrieval::{lm_score, search, Index, Query};
use subprof::splitter::distribute_frequency;
use subprof::topicselect::{
    brute_force_select, measure_score, select_count, Measure, SortedTopicDist,
};

use common::{generic_measure, indicator, random_sorted};

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn scores_match_generic_definitions() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..500 {
        let k = rng.random_range(2..=30);
        let zeros = rng.random_bool(0.5);
        let dist = random_sorted(&mut rng, k, zeros);
        let has_zero = dist.positive_count() < k;
        for m in Measure::ALL {
            if has_zero && m.needs_positive() {
                continue;
            }
            for j in 1..=k {
                let fast = measure_score(&dist, j, m).unwrap();
                let slow = generic_measure(m, dist.probs(), &indicator(k, j));
                assert!(
                    close(fast, slow),
                    "{m} j={j} {fast} vs {slow} on {:?}",
                    dist.probs()
                );
            }
        }
    }
}

fn dist_strategy() -> impl Strategy<Value = (SortedTopicDist, bool)> {
    (2usize..=50, any::<u64>(), any::<bool>()).prop_map(|(k, seed, zeros)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (random_sorted(&mut rng, k, zeros), zeros)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn every_measure_collapses_to_its_strategy((dist, _) in dist_strategy()) {
        let has_zero = dist.positive_count() < dist.k();
        for m in Measure::ALL {
            if has_zero && m.needs_positive() {
                continue;
            }
            prop_assert_eq!(
                brute_force_select(&dist, m).unwrap(),
                select_count(&dist, m.strategy()).unwrap(),
                "{}", m
            );
        }
    }

    #[test]
    fn distance_monotonicity((dist, _) in dist_strategy()) {
        let series = |m| (1..=dist.k()).map(|j| measure_score(&dist, j, m).unwrap()).collect::<Vec<_>>();
        prop_assert!(series(Measure::Euclidean).windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(series(Measure::Hamming).windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(series(Measure::Camberra).windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn selection_is_within_positive_support((dist, _) in dist_strategy()) {
        for s in subprof::topicselect::Strategy::ALL {
            let n = select_count(&dist, s).unwrap();
            prop_assert!(n >= 1 && n <= dist.positive_count());
        }
    }

    #[test]
    fn distribution_conserves_frequency(
        freq in 0u32..500,
        raw in prop::collection::vec(0.0f64..1.0, 1..12),
    ) {
        let total: f64 = raw.iter().sum();
        prop_assume!(total > 0.0);
        let probs: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let counts = distribute_frequency(freq, &probs);
        prop_assert_eq!(counts.len(), probs.len());
        prop_assert_eq!(counts.iter().sum::<u32>(), freq);
        for (c, p) in counts.iter().zip(&probs) {
            prop_assert!((*c as f64 - freq as f64 * p).abs() < probs.len() as f64);
        }
    }
}

fn random_bag(rng: &mut ChaCha8Rng, vocab: u32, max_terms: usize) -> TermBag {
    let n = rng.random_range(1..=max_terms);
    let mut bag = TermBag::new();
    for _ in 0..n {
        *bag.entry(rng.random_range(0..vocab)).or_insert(0) += rng.random_range(1..4);
    }
    bag
}

fn random_units(rng: &mut ChaCha8Rng, n: usize) -> Vec<Subprofile> {
    (0..n)
        .map(|i| {
            let key = ProfileKey::Topic(i % 5);
            Subprofile::new(
                ProfileRef::new(format!("c{}", i / 5), key),
                random_bag(rng, 40, 25),
            )
        })
        .collect()
}

#[test]
fn search_matches_exhaustive_scoring() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for round in 0..60 {
        let n = rng.random_range(1..60);
        let units = random_units(&mut rng, n);
        let index = Index::build(units.clone()).unwrap();
        // Terms 40.. never occur in the collection.
        let query = Query {
            id: format!("q{round}"),
            terms: random_bag(&mut rng, 45, 5),
        };
        let mu = [10.0, 2000.0][round % 2];
        let top = rng.random_range(1..80);

        let mut expected: Vec<(ProfileRef, f64)> = index
            .units()
            .iter()
            .filter(|u| query.terms.keys().any(|t| u.terms.contains_key(t)))
            .map(|u| (u.id.clone(), lm_score(&query, u, &index, mu)))
            .collect();
        expected.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        expected.truncate(top);

        let hits = search(&query, &index, mu, top);
        assert_eq!(hits.len(), expected.len());
        for (i, (h, (id, s))) in hits.iter().zip(&expected).enumerate() {
            assert_eq!(h.rank, i + 1);
            assert_eq!(&h.target, id);
            assert_eq!(h.score, *s);
            assert!(h.score <= 0.0);
        }
    }
}

#[test]
fn lm_score_invariances() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..40 {
        let units = random_units(&mut rng, 30);
        let index = Index::build(units.clone()).unwrap();
        let mut shuffled = units.clone();
        shuffled.shuffle(&mut rng);
        let reordered = Index::build(shuffled).unwrap();
        assert_eq!(index, reordered);

        let query = Query {
            id: "q".into(),
            terms: random_bag(&mut rng, 40, 6),
        };
        let mut with_unknown = query.clone();
        with_unknown.terms.insert(999, 3);
        let doubled = Query {
            id: "q".into(),
            terms: query.terms.iter().map(|(&t, &c)| (t, 2 * c)).collect(),
        };
        for u in index.units() {
            let s = lm_score(&query, u, &index, 2000.0);
            assert_eq!(lm_score(&with_unknown, u, &index, 2000.0), s);
            assert!(close(lm_score(&doubled, u, &index, 2000.0), 2.0 * s));
        }
    }
}
