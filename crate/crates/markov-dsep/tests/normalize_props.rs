//! Normalization: order independence, idempotence, and interface stability.

mod common;

use common::*;
use markov_dsep::diagram::iso_equal;
use markov_dsep::normalize::{
    eliminable_boxes, eliminate_box, is_normalized, normalize, normalize_with_seed,
};

#[test]
fn normalize_is_idempotent() {
    let mut r = rng(0xa0_01);
    for _ in 0..150 {
        let d = random_diagram(&mut r, 9);
        let once = normalize(&d);
        assert!(is_normalized(&once));
        let twice = normalize(&once);
        assert!(iso_equal(&once, &twice), "second pass changed the diagram");
    }
}

#[test]
fn normalize_is_order_independent() {
    let mut r = rng(0xa0_02);
    for _ in 0..120 {
        let d = random_diagram(&mut r, 9);
        let reference = normalize(&d);
        for seed in 0..5 {
            let shuffled = normalize_with_seed(&d, seed);
            assert!(
                iso_equal(&reference, &shuffled),
                "elimination order {seed} reached a different normal form"
            );
        }
    }
}

#[test]
fn normalize_preserves_the_interface() {
    let mut r = rng(0xa0_03);
    for _ in 0..100 {
        let d = random_diagram(&mut r, 9);
        let n = normalize(&d);
        let names = |d: &markov_dsep::diagram::StringDiagram, leg: &[usize]| -> Vec<String> {
            leg.iter().map(|&w| d.wire_name(w).to_string()).collect()
        };
        assert_eq!(names(&d, d.inputs()), names(&n, n.inputs()));
        assert_eq!(names(&d, d.outputs()), names(&n, n.outputs()));
        assert_eq!(d.input_types(), n.input_types());
        assert_eq!(d.output_types(), n.output_types());
    }
}

#[test]
fn single_step_elimination_commutes_with_full_normalization() {
    let mut r = rng(0xa0_04);
    for _ in 0..80 {
        let d = random_diagram(&mut r, 9);
        for b in eliminable_boxes(&d) {
            let stepped = eliminate_box(&d, b).unwrap();
            assert!(
                iso_equal(&normalize(&stepped), &normalize(&d)),
                "eliminating one box first changed the normal form"
            );
        }
    }
}

#[test]
fn eliminating_a_live_box_is_refused() {
    let m = fork();
    let d = m.diagram();
    for b in 0..d.box_count() {
        assert!(eliminate_box(d, b).is_err(), "every box in a causal model is live");
    }
}

#[test]
fn marginal_keeps_the_requested_outputs() {
    let m = diamond();
    let marg = m.marginalize_by_name(["x", "y", "z"]).unwrap();
    let names: Vec<String> = marg
        .diagram()
        .outputs()
        .iter()
        .map(|&w| marg.diagram().wire_name(w).to_string())
        .collect();
    assert_eq!(names, ["x", "y", "z"]);
    // Dropping w removes its mechanism entirely.
    assert!(marg.diagram().box_index("mk_w").is_none());
    assert!(is_normalized(marg.diagram()));
}

#[test]
fn marginal_to_the_full_leg_changes_nothing() {
    let mut r = rng(0xa0_05);
    for _ in 0..60 {
        let m = random_general_model(&mut r, 8);
        let all = m.output_set();
        let marg = m.marginalize(&all).unwrap();
        assert!(iso_equal(m.diagram(), marg.diagram()));
    }
}

#[test]
fn pure_bloom_version_extends_and_restricts_back() {
    let mut r = rng(0xa0_06);
    for _ in 0..60 {
        let m = random_general_model(&mut r, 8);
        let bloom = m.pure_bloom_version();
        assert!(bloom.is_pure_bloom());
        let back = bloom.marginalize(&m.output_set()).unwrap();
        assert!(
            iso_equal(m.diagram(), back.diagram()),
            "restricting the pure bloom to the original leg must recover the model"
        );
    }
}
