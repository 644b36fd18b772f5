use mmp_ood::metrics::{auroc, fpr_at_tpr, ks_statistic};
use mmp_ood::store::{decode_embedding_set, encode_embedding_set};
use mmp_ood::{mcm_score, mmp_score, EmbeddingRecord, EmbeddingSet, Modality, PrototypeSet, ScoreConfig};
use proptest::prelude::*;

fn scores() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![-1.0f64..1.0, (0i32..4).prop_map(|k| k as f64 / 2.0)], 1..40)
}

fn embedding_set() -> impl Strategy<Value = EmbeddingSet> {
    (1usize..6, 1usize..5).prop_flat_map(|(dim, classes)| {
        prop::collection::vec(
            // The file stores f32, so draw values that survive the narrowing.
            (prop::collection::vec((-5.0f32..5.0).prop_map(f64::from), dim), prop::option::of(0..classes)),
            0..12,
        )
        .prop_map(move |rows| {
            let records = rows
                .into_iter()
                .enumerate()
                .map(|(i, (v, l))| EmbeddingRecord::new(i.to_string(), l, v))
                .collect();
            let names = (0..classes).map(|c| format!("c{c}")).collect();
            EmbeddingSet::new(dim, names, Modality::Image, false, records).unwrap()
        })
    })
}

fn protos(c: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-1.0f64..1.0, d), c)
}

proptest! {
    #[test]
    fn embedding_files_round_trip_bit_exactly(set in embedding_set()) {
        let bytes = encode_embedding_set(&set).unwrap();
        prop_assert_eq!(decode_embedding_set(&bytes).unwrap(), set);
    }

    #[test]
    fn metrics_stay_in_the_unit_interval(id in scores(), ood in scores()) {
        let a = auroc(&id, &ood).unwrap();
        let k = ks_statistic(&id, &ood).unwrap();
        let (f, _) = fpr_at_tpr(&id, &ood, 0.95).unwrap();
        for x in [a, k, f] {
            prop_assert!((0.0..=1.0).contains(&x));
        }
    }

    #[test]
    fn auroc_swapping_sides_complements(id in scores(), ood in scores()) {
        let forward = auroc(&id, &ood).unwrap();
        let backward = auroc(&ood, &id).unwrap();
        prop_assert!((forward + backward - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ks_is_symmetric(id in scores(), ood in scores()) {
        prop_assert_eq!(ks_statistic(&id, &ood).unwrap(), ks_statistic(&ood, &id).unwrap());
    }

    #[test]
    fn mcm_lies_between_uniform_and_one(
        (p, x) in (1usize..8, 2usize..8).prop_flat_map(|(c, d)| (protos(c, d), prop::collection::vec(-1.0f64..1.0, d))),
        tau in 0.01f64..2.0,
    ) {
        prop_assume!(p.iter().chain([&x]).all(|v| v.iter().any(|t| t.abs() > 1e-3)));
        let c = p.len() as f64;
        let set = PrototypeSet::new(Modality::Text, p, false).unwrap();
        let s = mcm_score(&x, &set, &ScoreConfig::new(tau).unwrap()).unwrap();
        prop_assert!(s >= 1.0 / c - 1e-12 && s <= 1.0 + 1e-12);
    }

    #[test]
    fn mmp_is_symmetric_in_its_two_prototype_sets(
        (a, b, x) in (1usize..6, 2usize..6).prop_flat_map(|(c, d)| (protos(c, d), protos(c, d), prop::collection::vec(-1.0f64..1.0, d))),
    ) {
        prop_assume!(a.iter().chain(&b).chain([&x]).all(|v| v.iter().any(|t| t.abs() > 1e-3)));
        let cfg = ScoreConfig::default();
        let ta = PrototypeSet::new(Modality::Text, a.clone(), false).unwrap();
        let ib = PrototypeSet::new(Modality::Image, b.clone(), false).unwrap();
        let tb = PrototypeSet::new(Modality::Text, b, false).unwrap();
        let ia = PrototypeSet::new(Modality::Image, a, false).unwrap();
        let s1 = mmp_score(&x, &ta, &ib, &cfg).unwrap();
        let s2 = mmp_score(&x, &tb, &ia, &cfg).unwrap();
        prop_assert!((s1 - s2).abs() < 1e-12);
    }
}
