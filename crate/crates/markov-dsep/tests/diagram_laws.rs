//! The comonoid and discard laws checked diagrammatically: copy, discard,
//! and swap are built as interface-only diagrams, combined with compose and
//! tensor, and compared up to iso after normalization.

mod common;

use std::sync::Arc;

use common::*;
use markov_dsep::diagram::{compose, iso_equal, tensor, DiagramBuilder, Signature, StringDiagram};
use markov_dsep::hypergraph::Hypergraph;
use markov_dsep::normalize::normalize;

fn sig_abc() -> Arc<Signature> {
    let mut g = Hypergraph::new();
    g.add_wire("A").add_wire("B").add_wire("C");
    g.add_box("f", ["A"], ["B"]);
    g.add_box("g", ["B"], ["C"]);
    g.add_box("h", ["C"], ["A"]);
    sig(g)
}

/// A wiring-only diagram: one wire per (name, type) pair, no boxes, with the
/// given interface legs.
fn wiring(
    s: &Arc<Signature>,
    wires: &[(&str, &str)],
    ins: &[&str],
    outs: &[&str],
) -> StringDiagram {
    let mut b = DiagramBuilder::new(s);
    for (w, t) in wires {
        b = b.wire(*w, *t);
    }
    b.inputs(ins.iter().copied()).outputs(outs.iter().copied()).build().unwrap()
}

fn copy_of(s: &Arc<Signature>, t: &str) -> StringDiagram {
    wiring(s, &[("w", t)], &["w"], &["w", "w"])
}

fn id_of(s: &Arc<Signature>, t: &str) -> StringDiagram {
    wiring(s, &[("w", t)], &["w"], &["w"])
}

fn del_of(s: &Arc<Signature>, t: &str) -> StringDiagram {
    wiring(s, &[("w", t)], &["w"], &[])
}

fn swap_of(s: &Arc<Signature>, t1: &str, t2: &str) -> StringDiagram {
    wiring(s, &[("u", t1), ("v", t2)], &["u", "v"], &["v", "u"])
}

/// The one-box diagram for generator f: A → B.
fn gen_f(s: &Arc<Signature>) -> StringDiagram {
    DiagramBuilder::new(s)
        .wire("a", "A")
        .wire("b", "B")
        .box_("bf", "f", ["a"], ["b"])
        .inputs(["a"])
        .outputs(["b"])
        .build()
        .unwrap()
}

#[test]
fn copy_is_coassociative() {
    let s = sig_abc();
    let copy = copy_of(&s, "A");
    let id = id_of(&s, "A");
    let left = compose(&copy, &tensor(&copy, &id).unwrap()).unwrap();
    let right = compose(&copy, &tensor(&id, &copy).unwrap()).unwrap();
    assert!(iso_equal(&left, &right));
}

#[test]
fn discarding_one_copy_is_the_identity() {
    let s = sig_abc();
    let copy = copy_of(&s, "A");
    let id = id_of(&s, "A");
    let del = del_of(&s, "A");
    let left = compose(&copy, &tensor(&del, &id).unwrap()).unwrap();
    let right = compose(&copy, &tensor(&id, &del).unwrap()).unwrap();
    assert!(iso_equal(&normalize(&left), &id));
    assert!(iso_equal(&normalize(&right), &id));
}

#[test]
fn copy_is_cocommutative() {
    let s = sig_abc();
    let copy = copy_of(&s, "A");
    let swap = swap_of(&s, "A", "A");
    let swapped = compose(&copy, &swap).unwrap();
    assert!(iso_equal(&swapped, &copy));
}

#[test]
fn copy_of_a_pair_interleaves_componentwise_copies() {
    let s = sig_abc();
    // Copy on A ⊗ B in one step: both inputs fan out to (a, b, a, b).
    let pair_copy = wiring(&s, &[("a", "A"), ("b", "B")], &["a", "b"], &["a", "b", "a", "b"]);
    // Componentwise copies followed by the middle swap.
    let both = tensor(&copy_of(&s, "A"), &copy_of(&s, "B")).unwrap();
    let mid_swap = wiring(
        &s,
        &[("p", "A"), ("q", "A"), ("r", "B"), ("t", "B")],
        &["p", "q", "r", "t"],
        &["p", "r", "q", "t"],
    );
    let interleaved = compose(&both, &mid_swap).unwrap();
    assert!(iso_equal(&pair_copy, &interleaved));
}

#[test]
fn discard_of_a_pair_is_componentwise() {
    let s = sig_abc();
    let pair_del = wiring(&s, &[("a", "A"), ("b", "B")], &["a", "b"], &[]);
    let both = tensor(&del_of(&s, "A"), &del_of(&s, "B")).unwrap();
    assert!(iso_equal(&pair_del, &both));
}

#[test]
fn copy_and_discard_on_the_unit_are_the_identity() {
    let s = sig_abc();
    let empty = wiring(&s, &[], &[], &[]);
    let tensored = tensor(&empty, &empty).unwrap();
    let composed = compose(&empty, &empty).unwrap();
    assert!(iso_equal(&empty, &tensored));
    assert!(iso_equal(&empty, &composed));
}

#[test]
fn discard_is_natural_after_normalization() {
    let s = sig_abc();
    let f = gen_f(&s);
    let del_b = del_of(&s, "B");
    let del_a = del_of(&s, "A");
    let discarded = compose(&f, &del_b).unwrap();
    assert!(iso_equal(&normalize(&discarded), &del_a));
}

#[test]
fn composition_is_associative_up_to_iso() {
    let s = sig_abc();
    let f = gen_f(&s);
    let g = DiagramBuilder::new(&s)
        .wire("b", "B")
        .wire("c", "C")
        .box_("bg", "g", ["b"], ["c"])
        .inputs(["b"])
        .outputs(["c"])
        .build()
        .unwrap();
    let h = DiagramBuilder::new(&s)
        .wire("c", "C")
        .wire("a", "A")
        .box_("bh", "h", ["c"], ["a"])
        .inputs(["c"])
        .outputs(["a"])
        .build()
        .unwrap();
    let left = compose(&compose(&f, &g).unwrap(), &h).unwrap();
    let right = compose(&f, &compose(&g, &h).unwrap()).unwrap();
    assert!(iso_equal(&left, &right));
}

#[test]
fn iso_equal_ignores_names_but_not_structure() {
    let s = sig_abc();
    let f1 = gen_f(&s);
    let f2 = DiagramBuilder::new(&s)
        .wire("in", "A")
        .wire("out", "B")
        .box_("machine", "f", ["in"], ["out"])
        .inputs(["in"])
        .outputs(["out"])
        .build()
        .unwrap();
    assert!(iso_equal(&f1, &f2));
    assert!(!iso_equal(&f1, &id_of(&s, "A")));
    assert!(!iso_equal(&fork().diagram(), chain().diagram()));
}

#[test]
fn composing_with_identities_changes_nothing() {
    let s = sig_abc();
    let f = gen_f(&s);
    let pre = compose(&id_of(&s, "A"), &f).unwrap();
    let post = compose(&f, &id_of(&s, "B")).unwrap();
    assert!(iso_equal(&pre, &f));
    assert!(iso_equal(&post, &f));
}

#[test]
fn type_mismatch_in_composition_is_an_error() {
    let s = sig_abc();
    let f = gen_f(&s);
    assert!(compose(&f, &gen_f(&s)).is_err(), "B does not feed an A input");
}
