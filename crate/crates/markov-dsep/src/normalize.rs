//! Normal forms and causal models.
//!
//! A box is *eliminable* when none of its output wires is observed: no
//! output-leg occurrence and no consuming box. Eliminating it deletes the
//! box and its output wires (plus any input wire left with no producer, no
//! consumer, and no interface occurrence). A diagram with no eliminable
//! boxes is *normalized*; elimination is confluent, so the normal form is
//! independent of the order boxes are removed in.
//!
//! A [`CausalModel`] is a normalized diagram whose output leg is injective —
//! each wire observed at most once. Marginalization restricts the output leg
//! and re-normalizes; the model is a *pure bloom* when every wire is
//! observed.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::diagram::{RawDiagram, StringDiagram};
use crate::hypergraph::Name;

/// Is the box eliminable: does every one of its output wires go unobserved?
pub fn box_eliminable(d: &StringDiagram, b: usize) -> bool {
    d.box_info(b)
        .outputs()
        .iter()
        .all(|&w| d.output_positions(w).is_empty() && d.consumers(w).is_empty())
}

/// All eliminable boxes, ascending. Empty iff the diagram is normalized.
pub fn eliminable_boxes(d: &StringDiagram) -> Vec<usize> {
    (0..d.box_count()).filter(|&b| box_eliminable(d, b)).collect()
}

pub fn is_normalized(d: &StringDiagram) -> bool {
    (0..d.box_count()).all(|b| !box_eliminable(d, b))
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EliminateError {
    #[error("box \"{0}\" is not eliminable")]
    NotEliminable(Name),
}

/// Remove one eliminable box: the box goes, its output wires go, and any of
/// its input wires left fully dangling (no producer, no other consumer, no
/// interface occurrence) go too.
pub fn eliminate_box(d: &StringDiagram, b: usize) -> Result<StringDiagram, EliminateError> {
    if !box_eliminable(d, b) {
        return Err(EliminateError::NotEliminable(d.box_info(b).name().clone()));
    }
    let mut alive_wire = vec![true; d.wire_count()];
    let mut alive_box = vec![true; d.box_count()];
    alive_box[b] = false;
    for &w in d.box_info(b).outputs() {
        alive_wire[w] = false;
    }
    for u in d.box_info(b).in_set() {
        let dangling = d.producer(u).is_none()
            && d.input_pos(u).is_none()
            && d.output_positions(u).is_empty()
            && d.consumers(u).iter().all(|&(c, _)| c == b);
        if dangling {
            alive_wire[u] = false;
        }
    }
    Ok(rebuild(d, &alive_wire, &alive_box))
}

/// Restrict the diagram to the flagged wires and boxes, keeping order,
/// names, and interface legs.
fn rebuild(d: &StringDiagram, alive_wire: &[bool], alive_box: &[bool]) -> StringDiagram {
    let full = d.to_raw();
    let mut raw = RawDiagram::default();
    for (i, w) in full.body.wires.iter().enumerate() {
        if alive_wire[i] {
            raw.body.wires.push(w.clone());
            raw.typing.wire_map.insert(w.clone(), full.typing.wire_map[w].clone());
        }
    }
    for (i, b) in full.body.boxes.iter().enumerate() {
        if alive_box[i] {
            raw.body.boxes.push(b.clone());
            raw.typing.box_map.insert(b.name.clone(), full.typing.box_map[&b.name].clone());
        }
    }
    raw.inputs = full.inputs;
    raw.outputs = full.outputs;
    StringDiagram::build(Arc::clone(d.sig()), raw)
        .expect("removing an eliminable box preserves validity")
}

/// Normalize: eliminate boxes until none is eliminable. One worklist pass,
/// one rebuild.
pub fn normalize(d: &StringDiagram) -> StringDiagram {
    let nb = d.box_count();
    let nw = d.wire_count();
    let mut alive_box = vec![true; nb];
    let mut alive_wire = vec![true; nw];
    // Alive consuming ports per wire.
    let mut cons: Vec<usize> = (0..nw).map(|w| d.consumers(w).len()).collect();

    let mut stack: Vec<usize> = (0..nb).collect();
    let mut queued = vec![true; nb];
    while let Some(b) = stack.pop() {
        queued[b] = false;
        if !alive_box[b] {
            continue;
        }
        let elim = d
            .box_info(b)
            .outputs()
            .iter()
            .all(|&w| cons[w] == 0 && d.output_positions(w).is_empty());
        if !elim {
            continue;
        }
        alive_box[b] = false;
        for &w in d.box_info(b).outputs() {
            alive_wire[w] = false;
        }
        for &u in d.box_info(b).inputs() {
            cons[u] -= 1;
        }
        for u in d.box_info(b).in_set() {
            if cons[u] > 0 || !d.output_positions(u).is_empty() {
                continue;
            }
            match d.producer(u) {
                Some((p, _)) => {
                    // The producer may have just become eliminable.
                    if alive_box[p] && !queued[p] {
                        queued[p] = true;
                        stack.push(p);
                    }
                }
                None => {
                    if d.input_pos(u).is_none() {
                        alive_wire[u] = false;
                    }
                }
            }
        }
    }
    rebuild(d, &alive_wire, &alive_box)
}

/// Normalize by repeated *random* single eliminations. Confluence makes the
/// seed irrelevant to the result; tests lean on that.
pub fn normalize_with_seed(d: &StringDiagram, seed: u64) -> StringDiagram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cur = d.clone();
    loop {
        let elim = eliminable_boxes(&cur);
        if elim.is_empty() {
            return cur;
        }
        let pick = elim[rng.gen_range(0..elim.len())];
        cur = eliminate_box(&cur, pick).expect("listed box must be eliminable");
    }
}

/// Reflexive-transitive ancestor closure of a set of wires. A wire `u` is a
/// parent of `v` when the box producing `v` consumes `u`.
pub fn ancestors(d: &StringDiagram, seed: impl IntoIterator<Item = usize>) -> BTreeSet<usize> {
    let mut seen: BTreeSet<usize> = seed.into_iter().collect();
    let mut frontier: Vec<usize> = seen.iter().copied().collect();
    while let Some(v) = frontier.pop() {
        if let Some((b, _)) = d.producer(v) {
            for u in d.box_info(b).in_set() {
                if seen.insert(u) {
                    frontier.push(u);
                }
            }
        }
    }
    seen
}

/// Reflexive-transitive descendant closure of a set of wires.
pub fn descendants(d: &StringDiagram, seed: impl IntoIterator<Item = usize>) -> BTreeSet<usize> {
    let mut seen: BTreeSet<usize> = seed.into_iter().collect();
    let mut frontier: Vec<usize> = seen.iter().copied().collect();
    while let Some(u) = frontier.pop() {
        for &(b, _) in d.consumers(u) {
            for v in d.box_info(b).out_set() {
                if seen.insert(v) {
                    frontier.push(v);
                }
            }
        }
    }
    seen
}

/// Boxes none of whose output wires feed another box.
pub fn final_boxes(d: &StringDiagram) -> Vec<usize> {
    (0..d.box_count())
        .filter(|&b| d.box_info(b).outputs().iter().all(|&w| d.consumers(w).is_empty()))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("diagram is not normalized: box \"{0}\" is eliminable")]
    NotNormalized(Name),
    #[error("output leg not injective: wire \"{0}\" is observed more than once")]
    OutputLegNotInjective(Name),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum MarginalizeError {
    #[error("wire \"{0}\" is not an output of the model")]
    NotAnOutput(Name),
}

/// A causal model: a normalized string diagram whose output leg is
/// injective, so each wire is observed at most once. The model is a *pure
/// bloom* when the output leg is bijective (every wire observed).
#[derive(Clone, Debug, PartialEq)]
pub struct CausalModel {
    d: StringDiagram,
    pure_bloom: bool,
}

impl CausalModel {
    pub fn new(d: StringDiagram) -> Result<Self, ModelError> {
        if let Some(&b) = eliminable_boxes(&d).first() {
            return Err(ModelError::NotNormalized(d.box_info(b).name().clone()));
        }
        for &w in d.outputs() {
            if d.output_positions(w).len() > 1 {
                return Err(ModelError::OutputLegNotInjective(d.wire_name(w).clone()));
            }
        }
        let pure_bloom = d.outputs().len() == d.wire_count();
        Ok(CausalModel { d, pure_bloom })
    }

    pub fn diagram(&self) -> &StringDiagram {
        &self.d
    }

    pub fn into_diagram(self) -> StringDiagram {
        self.d
    }

    pub fn is_pure_bloom(&self) -> bool {
        self.pure_bloom
    }

    /// Output wires as a set of wire indices.
    pub fn output_set(&self) -> BTreeSet<usize> {
        self.d.outputs().iter().copied().collect()
    }

    /// Input wires as a set of wire indices.
    pub fn input_set(&self) -> BTreeSet<usize> {
        self.d.inputs().iter().copied().collect()
    }

    /// Marginalize over a set of output wires: drop every other observation
    /// from the output leg (the input leg stays put) and re-normalize.
    pub fn marginalize(&self, keep: &BTreeSet<usize>) -> Result<CausalModel, MarginalizeError> {
        let out_set = self.output_set();
        for &w in keep {
            if !out_set.contains(&w) {
                return Err(MarginalizeError::NotAnOutput(self.d.wire_name(w).clone()));
            }
        }
        let mut raw = self.d.to_raw();
        raw.outputs = self
            .d
            .outputs()
            .iter()
            .filter(|w| keep.contains(w))
            .map(|&w| self.d.wire_name(w).clone())
            .collect();
        let restricted = StringDiagram::build(Arc::clone(self.d.sig()), raw)
            .expect("restricting the output leg preserves validity");
        Ok(CausalModel::new(normalize(&restricted))
            .expect("marginalization preserves model validity"))
    }

    /// Marginalize, naming the wires to keep.
    pub fn marginalize_by_name(
        &self,
        keep: impl IntoIterator<Item = impl AsRef<str>>,
    ) -> Result<CausalModel, MarginalizeError> {
        let mut set = BTreeSet::new();
        for w in keep {
            let w = w.as_ref();
            match self.d.wire_index(w) {
                Some(i) => {
                    set.insert(i);
                }
                None => return Err(MarginalizeError::NotAnOutput(crate::hypergraph::name(w))),
            }
        }
        self.marginalize(&set)
    }

    /// The pure bloom with the same body: wires missing from the output leg
    /// are appended in declaration order; existing observations keep their
    /// positions.
    pub fn pure_bloom_version(&self) -> CausalModel {
        let mut raw = self.d.to_raw();
        let observed: BTreeSet<usize> = self.output_set();
        for w in 0..self.d.wire_count() {
            if !observed.contains(&w) {
                raw.outputs.push(self.d.wire_name(w).clone());
            }
        }
        let d = StringDiagram::build(Arc::clone(self.d.sig()), raw)
            .expect("extending the output leg preserves validity");
        CausalModel::new(d).expect("extending the output leg preserves normality")
    }

    pub fn ancestors(&self, seed: impl IntoIterator<Item = usize>) -> BTreeSet<usize> {
        ancestors(&self.d, seed)
    }

    pub fn descendants(&self, seed: impl IntoIterator<Item = usize>) -> BTreeSet<usize> {
        descendants(&self.d, seed)
    }

    pub fn final_boxes(&self) -> Vec<usize> {
        final_boxes(&self.d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::{iso_equal, DiagramBuilder, Signature};
    use crate::hypergraph::Hypergraph;

    fn chain_sig() -> Arc<Signature> {
        let mut g = Hypergraph::new();
        g.add_wire("A").add_wire("B").add_wire("C");
        g.add_box("r", [] as [&str; 0], ["A"]);
        g.add_box("s", ["A"], ["B"]);
        g.add_box("t", ["B"], ["C"]);
        g.add_box("z", ["A"], [] as [&str; 0]);
        Arc::new(Signature::new(g).unwrap())
    }

    fn chain(outputs: &[&str]) -> StringDiagram {
        DiagramBuilder::new(&chain_sig())
            .wire("a", "A")
            .wire("b", "B")
            .wire("c", "C")
            .box_("mk_a", "r", [] as [&str; 0], ["a"])
            .box_("mk_b", "s", ["a"], ["b"])
            .box_("mk_c", "t", ["b"], ["c"])
            .outputs(outputs.iter().copied())
            .build()
            .unwrap()
    }

    #[test]
    fn cascade_elimination() {
        // Observing only `a` lets mk_c go first, which then frees mk_b.
        let d = chain(&["a"]);
        assert_eq!(eliminable_boxes(&d), vec![2]);
        let n = normalize(&d);
        assert_eq!(n.box_count(), 1);
        assert_eq!(n.wire_count(), 1);
        assert!(n.wire_index("a").is_some());
        assert!(is_normalized(&n));
        // Fully observed: nothing to do.
        let full = chain(&["a", "b", "c"]);
        assert_eq!(normalize(&full), full);
    }

    #[test]
    fn zero_output_box_is_vacuously_eliminable() {
        let d = DiagramBuilder::new(&chain_sig())
            .wire("a", "A")
            .box_("mk_a", "r", [] as [&str; 0], ["a"])
            .box_("sink", "z", ["a"], [] as [&str; 0])
            .outputs(["a"])
            .build()
            .unwrap();
        assert_eq!(eliminable_boxes(&d), vec![1]);
        let n = normalize(&d);
        assert_eq!(n.box_count(), 1);
        assert_eq!(n.box_info(0).name().as_ref(), "mk_a");
    }

    #[test]
    fn dangling_unproduced_wire_is_collected() {
        // `a` has no producer and is not on the interface; once `use_a` goes,
        // so does `a`.
        let d = DiagramBuilder::new(&chain_sig())
            .wire("a", "A")
            .wire("b", "B")
            .box_("use_a", "s", ["a"], ["b"])
            .outputs([] as [&str; 0])
            .build()
            .unwrap();
        let n = normalize(&d);
        assert_eq!(n.box_count(), 0);
        assert_eq!(n.wire_count(), 0);
    }

    #[test]
    fn interface_input_wire_survives() {
        let d = DiagramBuilder::new(&chain_sig())
            .wire("a", "A")
            .wire("b", "B")
            .box_("use_a", "s", ["a"], ["b"])
            .inputs(["a"])
            .outputs([] as [&str; 0])
            .build()
            .unwrap();
        let n = normalize(&d);
        assert_eq!(n.box_count(), 0);
        assert_eq!(n.wire_count(), 1);
        assert_eq!(n.inputs().len(), 1);
    }

    #[test]
    fn pre_existing_orphan_wire_is_kept() {
        let d = DiagramBuilder::new(&chain_sig())
            .wire("a", "A")
            .wire("stray", "C")
            .box_("mk_a", "r", [] as [&str; 0], ["a"])
            .outputs(["a"])
            .build()
            .unwrap();
        let n = normalize(&d);
        assert_eq!(n.wire_count(), 2);
        assert!(n.wire_index("stray").is_some());
    }

    #[test]
    fn seeded_orders_agree_with_worklist() {
        let d = chain(&["a"]);
        let n = normalize(&d);
        for seed in 0..6 {
            assert_eq!(normalize_with_seed(&d, seed), n);
        }
        assert!(iso_equal(&n, &normalize(&n)));
    }

    #[test]
    fn eliminate_box_rejects_needed_boxes() {
        let d = chain(&["a"]);
        assert!(matches!(eliminate_box(&d, 0), Err(EliminateError::NotEliminable(_))));
        let one = eliminate_box(&d, 2).unwrap();
        assert_eq!(one.box_count(), 2);
        assert!(one.wire_index("c").is_none());
    }

    #[test]
    fn model_constructor_checks() {
        assert!(matches!(
            CausalModel::new(chain(&["a"])),
            Err(ModelError::NotNormalized(_))
        ));
        let doubled = chain(&["a", "b", "c", "c"]);
        match CausalModel::new(doubled) {
            Err(ModelError::OutputLegNotInjective(w)) => assert_eq!(w.as_ref(), "c"),
            other => panic!("expected output-leg error, got {other:?}"),
        }
        let m = CausalModel::new(chain(&["a", "b", "c"])).unwrap();
        assert!(m.is_pure_bloom());
        // Observing only b and c keeps a alive as a latent ancestor.
        let partial = CausalModel::new(normalize(&chain(&["b", "c"]))).unwrap();
        assert!(!partial.is_pure_bloom());
        assert_eq!(partial.diagram().wire_count(), 3);
    }

    #[test]
    fn marginalize_restricts_and_normalizes() {
        let m = CausalModel::new(chain(&["a", "b", "c"])).unwrap();
        let keep = [m.diagram().wire_index("b").unwrap()].into_iter().collect();
        let mb = m.marginalize(&keep).unwrap();
        assert_eq!(mb.diagram().box_count(), 2);
        assert!(mb.diagram().wire_index("c").is_none());
        // Survivors are exactly the boxes producing an ancestor of what we
        // keep — mk_a and mk_b here.
        assert!(mb.diagram().box_index("mk_a").is_some());
        assert!(mb.diagram().box_index("mk_b").is_some());
        let err = m.marginalize_by_name(["nope"]).unwrap_err();
        assert_eq!(err, MarginalizeError::NotAnOutput(crate::hypergraph::name("nope")));
    }

    #[test]
    fn pure_bloom_version_appends_missing() {
        let m = CausalModel::new(normalize(&chain(&["c"]))).unwrap();
        // Normalizing with only c observed keeps the whole chain alive.
        assert_eq!(m.diagram().box_count(), 3);
        let pb = m.pure_bloom_version();
        assert!(pb.is_pure_bloom());
        let names: Vec<&str> =
            pb.diagram().outputs().iter().map(|&w| &**pb.diagram().wire_name(w)).collect();
        assert_eq!(names, vec!["c", "a", "b"]);
    }

    #[test]
    fn closures_and_final_boxes() {
        let d = chain(&["a", "b", "c"]);
        let idx = |w: &str| d.wire_index(w).unwrap();
        let an = ancestors(&d, [idx("c")]);
        assert_eq!(an, [idx("a"), idx("b"), idx("c")].into_iter().collect());
        let dec = descendants(&d, [idx("a")]);
        assert_eq!(dec, [idx("a"), idx("b"), idx("c")].into_iter().collect());
        assert_eq!(ancestors(&d, [idx("a")]), [idx("a")].into_iter().collect());
        assert_eq!(final_boxes(&d), vec![2]);
    }
}
