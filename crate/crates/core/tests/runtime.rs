use packed_forest::baseline::{poly_compile, poly_eval};
use packed_forest::forest::parse_forest;
use packed_forest::runtime::{
    count_mismatches, decode, encode_features, infer, one_hot, traverse_oracle, ModelMode,
    PartyConfig,
};
use packed_forest::staging::{compile, Quantizer};
use packed_forest::synth::{self, ForestShape};
use packed_forest::vm::Vm;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn packed_result_equals_traversal(seed in any::<u64>(), p in prop::sample::select(vec![4u32, 8, 16])) {
        let mut rng = synth::rng(seed);
        let forest = synth::random_forest(&mut rng, &ForestShape::default().with_precision(p));
        let model = compile(&forest, Quantizer::new(p, 0).unwrap()).unwrap();
        let queries: Vec<Vec<f64>> = (0..8).map(|_| synth::random_query(&mut rng, &forest, p)).collect();
        prop_assert_eq!(count_mismatches(&forest, &model, &PartyConfig::default(), &queries).unwrap(), 0);
    }

    #[test]
    fn padding_and_mode_do_not_change_the_result(seed in any::<u64>(), extra in 0usize..4) {
        let mut rng = synth::rng(seed);
        let forest = synth::random_forest(&mut rng, &ForestShape::default());
        let q = Quantizer::new(8, 0).unwrap();
        let model = compile(&forest, q).unwrap();
        let values = synth::random_query(&mut rng, &forest, 8);
        let k = model.meta.max_multiplicity;
        let run = |cfg: PartyConfig| {
            let query = encode_features(&values, model.meta.num_features, q, cfg.group_width(&model)).unwrap();
            infer(&model, &query, &cfg).unwrap()
        };
        let base = run(PartyConfig::default());
        let padded = run(PartyConfig::default().with_k_declared(k + extra));
        let plain = run(PartyConfig::new(ModelMode::Plaintext).with_k_declared(k + extra));
        prop_assert_eq!(base.labels.peek(), padded.labels.peek());
        prop_assert_eq!(base.labels.peek(), plain.labels.peek());
        if model.meta.branching >= 1 {
            prop_assert!(plain.ledger.counts.mult_ct_ct < padded.ledger.counts.mult_ct_ct);
            prop_assert!(plain.ledger.max_depth <= padded.ledger.max_depth);
        }
    }

    #[test]
    fn baseline_labels_equal_traversal(seed in any::<u64>()) {
        let mut rng = synth::rng(seed);
        let forest = synth::random_forest(&mut rng, &ForestShape::default());
        let q = Quantizer::new(8, 0).unwrap();
        let poly = poly_compile(&forest, q).unwrap();
        prop_assert_eq!(poly.trees.iter().map(Vec::len).sum::<usize>(), forest.num_leaves());
        let values = synth::random_query(&mut rng, &forest, 8);
        let leaves = traverse_oracle(&forest, &values, q).unwrap();
        let expected: Vec<usize> = leaves.iter().map(|&l| forest.leaves()[l].label).collect();
        let got = poly_eval(&Vm::new(), &poly, &values, ModelMode::Encrypted).unwrap();
        prop_assert_eq!(got.labels, expected);
    }
}

#[test]
fn fractional_thresholds_quantize_consistently() {
    let forest =
        parse_forest("labels lo hi\nbranch 0 2.5 leaf 0 leaf 1\nbranch 1 0.75 leaf 0 leaf 1\n")
            .unwrap();
    let q = Quantizer::new(8, 2).unwrap();
    let model = compile(&forest, q).unwrap();
    let queries = vec![
        vec![2.5, 0.75],
        vec![2.75, 0.5],
        vec![2.3, 1.0],
        vec![0.0, 63.75],
    ];
    assert_eq!(
        count_mismatches(&forest, &model, &PartyConfig::default(), &queries).unwrap(),
        0
    );
    // 2.75 > 2.5 goes right, 0.5 > 0.75 does not
    let query = encode_features(&queries[1], 2, q, model.meta.group_width).unwrap();
    let r = infer(&model, &query, &PartyConfig::default()).unwrap();
    let d = decode(r.labels.peek(), &model.codebook).unwrap();
    assert_eq!(d.label_names(&model.codebook), vec!["hi", "lo"]);
}

#[test]
fn single_leaf_forest_costs_nothing() {
    let forest = parse_forest("labels A B\nleaf 1\nleaf 0\nleaf 1\n").unwrap();
    let q = Quantizer::new(8, 0).unwrap();
    let model = compile(&forest, q).unwrap();
    let query = encode_features(&[], 0, q, 0).unwrap();
    let r = infer(&model, &query, &PartyConfig::default()).unwrap();
    assert_eq!(r.labels.peek(), &one_hot(&[0, 1, 2], 3));
    assert_eq!(r.ledger.counts.total(), 0);
}

#[test]
fn undersized_padding_is_rejected() {
    let forest = packed_forest::forest::demo_forest();
    let q = Quantizer::new(8, 0).unwrap();
    let model = compile(&forest, q).unwrap();
    let query = encode_features(&[0.0, 5.0], 2, q, 2).unwrap();
    assert!(infer(&model, &query, &PartyConfig::default().with_k_declared(2)).is_err());
}

#[test]
fn depth_fits_budget_at_the_bound() {
    let forest = packed_forest::forest::demo_forest();
    let q = Quantizer::new(8, 0).unwrap();
    let model = compile(&forest, q).unwrap();
    let query = encode_features(&[0.0, 5.0], 2, q, 3).unwrap();
    // 2*lg 8 + lg 3 + 2
    assert!(infer(&model, &query, &PartyConfig::default().with_max_depth(10)).is_ok());
    let exact = infer(&model, &query, &PartyConfig::default())
        .unwrap()
        .ledger
        .max_depth;
    assert!(infer(
        &model,
        &query,
        &PartyConfig::default().with_max_depth(exact)
    )
    .is_ok());
    let err = infer(
        &model,
        &query,
        &PartyConfig::default().with_max_depth(exact - 1),
    )
    .unwrap_err();
    assert!(err.is_depth_budget());
}
