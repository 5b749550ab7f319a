use proptest::prelude::*;
use seen_core::synth::{generate, split_sizes, Dataset, DatasetKind, Split};

fn check_invariants(d: &Dataset) {
    d.validate().unwrap();
    let base = d.name.base_classes();
    for v in 0..d.num_nodes() {
        assert_eq!(d.motif_mask[v], !base.contains(&d.labels[v]), "node {v}");
        assert_eq!(d.motif_mask[v], d.motif_id[v].is_some());
    }
    let (train, val, test) = split_sizes(d.num_nodes());
    assert_eq!(d.nodes_in(Split::Train).len(), train);
    assert_eq!(d.nodes_in(Split::Val).len(), val);
    assert_eq!(d.nodes_in(Split::Test).len(), test);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn generators_keep_invariants(seed in any::<u64>(), which in 0usize..4) {
        let d = generate(DatasetKind::ALL[which], seed);
        check_invariants(&d);
    }
}

#[test]
fn regeneration_is_byte_identical() {
    for kind in DatasetKind::ALL {
        let a = serde_json::to_string(&generate(kind, 3)).unwrap();
        let b = serde_json::to_string(&generate(kind, 3)).unwrap();
        assert_eq!(a, b, "{kind}");
        let back: Dataset = serde_json::from_str(&a).unwrap();
        assert_eq!(back, generate(kind, 3));
    }
}

#[test]
fn different_seeds_differ() {
    let a = generate(DatasetKind::BaShapes, 1);
    let b = generate(DatasetKind::BaShapes, 2);
    assert_ne!(a.graph, b.graph);
}

#[test]
fn split_size_arithmetic() {
    assert_eq!(split_sizes(10), (8, 1, 1));
    assert_eq!(split_sizes(700), (560, 70, 70));
    assert_eq!(split_sizes(1400), (1120, 140, 140));
}
