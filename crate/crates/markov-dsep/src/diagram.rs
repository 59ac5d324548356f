//! String diagrams over a signature: an acyclic, left-monogamous hypergraph
//! body plus ordered input/output interface legs, typed over a signature
//! hypergraph.
//!
//! Copying and discarding are wire-level phenomena here, not boxes: a wire
//! listed twice in the outputs leg is copied, a wire absent from the outputs
//! is discarded. Swaps are interface reindexings. That keeps left monogamy a
//! purely local check (each wire is *produced* at most once — by the input
//! leg or by a box output port) while fan-out in consumption stays free.
//!
//! [`StringDiagram`] values are always valid: construction goes through
//! [`StringDiagram::build`], which reports every violation it finds instead
//! of erroring one at a time. Equality of the underlying morphisms (diagrams
//! up to renaming of wires and boxes, with the interface held pointwise
//! fixed) is [`iso_equal`].

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use thiserror::Error;

use crate::hypergraph::{
    name, BoxDecl, Hypergraph, HypergraphMorphism, MorphismViolation, Name, Violation,
};
use crate::unionfind::UnionFind;

/// A validated hypergraph acting as the signature: its wires are the types
/// and its boxes are the generating box types.
#[derive(Clone, Debug)]
pub struct Signature {
    graph: Hypergraph,
    wire_idx: HashMap<Name, usize>,
    box_idx: HashMap<Name, usize>,
    /// Per box type: its port types as type indices.
    btype_inputs: Vec<Vec<usize>>,
    btype_outputs: Vec<Vec<usize>>,
}

impl PartialEq for Signature {
    fn eq(&self, other: &Self) -> bool {
        self.graph == other.graph
    }
}
impl Eq for Signature {}

impl Signature {
    pub fn new(graph: Hypergraph) -> Result<Self, Vec<Violation>> {
        let violations = graph.validate();
        if !violations.is_empty() {
            return Err(violations);
        }
        let wire_idx: HashMap<Name, usize> =
            graph.wires.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let box_idx =
            graph.boxes.iter().enumerate().map(|(i, b)| (b.name.clone(), i)).collect();
        let btype_inputs = graph
            .boxes
            .iter()
            .map(|b| b.inputs.iter().map(|w| wire_idx[w]).collect())
            .collect();
        let btype_outputs = graph
            .boxes
            .iter()
            .map(|b| b.outputs.iter().map(|w| wire_idx[w]).collect())
            .collect();
        Ok(Signature { graph, wire_idx, box_idx, btype_inputs, btype_outputs })
    }

    pub fn graph(&self) -> &Hypergraph {
        &self.graph
    }

    pub fn type_count(&self) -> usize {
        self.graph.wires.len()
    }

    pub fn type_index(&self, t: &str) -> Option<usize> {
        self.wire_idx.get(t).copied()
    }

    pub fn type_name(&self, i: usize) -> &Name {
        &self.graph.wires[i]
    }

    pub fn box_type_count(&self) -> usize {
        self.graph.boxes.len()
    }

    pub fn box_type_index(&self, b: &str) -> Option<usize> {
        self.box_idx.get(b).copied()
    }

    pub fn box_type(&self, i: usize) -> &BoxDecl {
        &self.graph.boxes[i]
    }

    /// Input port types of box type `i`, as type indices.
    pub fn box_input_types(&self, i: usize) -> &[usize] {
        &self.btype_inputs[i]
    }

    /// Output port types of box type `i`, as type indices.
    pub fn box_output_types(&self, i: usize) -> &[usize] {
        &self.btype_outputs[i]
    }
}

/// A wire of a diagram body: its name and the index of its type in Σ.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WireInfo {
    pub(crate) name: Name,
    pub(crate) ty: usize,
}

impl WireInfo {
    pub fn name(&self) -> &Name {
        &self.name
    }
    pub fn ty(&self) -> usize {
        self.ty
    }
}

/// A box of a diagram body: name, box type index, and ports as wire indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoxInfo {
    pub(crate) name: Name,
    pub(crate) ty: usize,
    pub(crate) inputs: Vec<usize>,
    pub(crate) outputs: Vec<usize>,
}

impl BoxInfo {
    pub fn name(&self) -> &Name {
        &self.name
    }
    pub fn ty(&self) -> usize {
        self.ty
    }
    pub fn inputs(&self) -> &[usize] {
        &self.inputs
    }
    pub fn outputs(&self) -> &[usize] {
        &self.outputs
    }
    /// Distinct input wires, ascending.
    pub fn in_set(&self) -> Vec<usize> {
        let mut v = self.inputs.clone();
        v.sort_unstable();
        v.dedup();
        v
    }
    /// Distinct output wires, ascending.
    pub fn out_set(&self) -> Vec<usize> {
        let mut v = self.outputs.clone();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Unvalidated diagram data: body, typing, and interface legs, all by name.
/// This is what loaders and builders produce; [`StringDiagram::build`]
/// validates and indexes it.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawDiagram {
    pub body: Hypergraph,
    pub typing: HypergraphMorphism,
    pub inputs: Vec<Name>,
    pub outputs: Vec<Name>,
}

/// A violation found while building a [`StringDiagram`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DiagramViolation {
    Body(Violation),
    Typing(MorphismViolation),
    UnknownInterfaceWire { output: bool, index: usize, wire: Name },
    /// The wire is produced more than once (interface-input occurrences plus
    /// box output ports exceed one).
    NotLeftMonogamous { wire: Name, produced: usize },
    /// A directed cycle through the listed wires.
    NotAcyclic { cycle: Vec<Name> },
}

impl fmt::Display for DiagramViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiagramViolation::Body(v) => write!(f, "body: {v}"),
            DiagramViolation::Typing(v) => write!(f, "typing: {v}"),
            DiagramViolation::UnknownInterfaceWire { output, index, wire } => {
                let leg = if *output { "outputs" } else { "inputs" };
                write!(f, "interface {leg}[{index}] references unknown wire \"{wire}\"")
            }
            DiagramViolation::NotLeftMonogamous { wire, produced } => {
                write!(f, "not left monogamous: wire \"{wire}\" is produced {produced} times")
            }
            DiagramViolation::NotAcyclic { cycle } => {
                let names: Vec<&str> = cycle.iter().map(|n| &**n).collect();
                write!(f, "not acyclic: cycle through wires [{}]", names.join(", "))
            }
        }
    }
}

/// True iff every wire is produced at most once: its occurrences in the
/// input leg plus output ports over all boxes total ≤ 1.
pub fn check_left_monogamous(body: &Hypergraph, inputs: &[Name]) -> bool {
    body.wires.iter().all(|w| {
        let from_leg = inputs.iter().filter(|x| x == &w).count();
        from_leg + body.production_count(w) <= 1
    })
}

/// True iff the body has no directed cycle (no family of wires and boxes
/// where each box consumes the current wire and produces the next, wrapping
/// around).
pub fn check_acyclic(body: &Hypergraph) -> bool {
    find_cycle(body).is_none()
}

/// Find a directed cycle if one exists, returned as the wires along it.
/// Traversal runs over the bipartite wire/box graph so that a box consuming
/// and producing the same wire counts as a (length-one) cycle.
pub fn find_cycle(body: &Hypergraph) -> Option<Vec<Name>> {
    let wire_idx: HashMap<&str, usize> =
        body.wires.iter().enumerate().map(|(i, w)| (&**w, i)).collect();
    let nw = body.wires.len();
    let nb = body.boxes.len();
    // Nodes 0..nw are wires, nw..nw+nb are boxes.
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); nw + nb];
    for (bi, b) in body.boxes.iter().enumerate() {
        for w in &b.inputs {
            if let Some(&wi) = wire_idx.get(&**w) {
                succ[wi].push(nw + bi);
            }
        }
        for w in &b.outputs {
            if let Some(&wi) = wire_idx.get(&**w) {
                succ[nw + bi].push(wi);
            }
        }
    }
    // Iterative DFS with colors; on a back edge, read the cycle off the stack.
    #[derive(Clone, Copy, PartialEq)]
    enum Color {
        White,
        Gray,
        Black,
    }
    let mut color = vec![Color::White; nw + nb];
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for start in 0..nw + nb {
        if color[start] != Color::White {
            continue;
        }
        color[start] = Color::Gray;
        stack.push((start, 0));
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if *next < succ[node].len() {
                let child = succ[node][*next];
                *next += 1;
                match color[child] {
                    Color::White => {
                        color[child] = Color::Gray;
                        stack.push((child, 0));
                    }
                    Color::Gray => {
                        // Found a cycle: collect the wire nodes above `child`.
                        let pos = stack.iter().position(|&(n, _)| n == child).unwrap();
                        let cycle = stack[pos..]
                            .iter()
                            .filter(|&&(n, _)| n < nw)
                            .map(|&(n, _)| body.wires[n].clone())
                            .collect();
                        return Some(cycle);
                    }
                    Color::Black => {}
                }
            } else {
                color[node] = Color::Black;
                stack.pop();
            }
        }
    }
    None
}

/// A gs-monoidal string diagram: validated, indexed, with adjacency caches.
#[derive(Clone, Debug)]
pub struct StringDiagram {
    sig: Arc<Signature>,
    wires: Vec<WireInfo>,
    boxes: Vec<BoxInfo>,
    inputs: Vec<usize>,
    outputs: Vec<usize>,
    wire_idx: HashMap<Name, usize>,
    box_idx: HashMap<Name, usize>,
    /// Per wire: the (box, output port) producing it, if any.
    producer: Vec<Option<(usize, usize)>>,
    /// Per wire: (box, input port) pairs consuming it.
    consumers: Vec<Vec<(usize, usize)>>,
    /// Per wire: its position in the input leg, if any (unique by monogamy).
    input_pos: Vec<Option<usize>>,
    /// Per wire: its positions in the output leg.
    output_pos: Vec<Vec<usize>>,
}

impl PartialEq for StringDiagram {
    fn eq(&self, other: &Self) -> bool {
        self.sig == other.sig
            && self.wires == other.wires
            && self.boxes == other.boxes
            && self.inputs == other.inputs
            && self.outputs == other.outputs
    }
}

impl StringDiagram {
    /// Validate `raw` against `sig` and index it. Returns every violation
    /// found; structural checks (monogamy, acyclicity) are only meaningful
    /// once body and typing are sound, so they run only in that case.
    pub fn build(sig: Arc<Signature>, raw: RawDiagram) -> Result<Self, Vec<DiagramViolation>> {
        let mut violations: Vec<DiagramViolation> = Vec::new();
        for v in raw.body.validate() {
            violations.push(DiagramViolation::Body(v));
        }
        for v in raw.typing.validate(&raw.body, sig.graph()) {
            violations.push(DiagramViolation::Typing(v));
        }

        let wire_names: HashSet<&str> = raw.body.wires.iter().map(|w| &**w).collect();
        for (index, w) in raw.inputs.iter().enumerate() {
            if !wire_names.contains(&**w) {
                violations.push(DiagramViolation::UnknownInterfaceWire {
                    output: false,
                    index,
                    wire: w.clone(),
                });
            }
        }
        for (index, w) in raw.outputs.iter().enumerate() {
            if !wire_names.contains(&**w) {
                violations.push(DiagramViolation::UnknownInterfaceWire {
                    output: true,
                    index,
                    wire: w.clone(),
                });
            }
        }

        if !violations.is_empty() {
            return Err(violations);
        }

        for w in &raw.body.wires {
            let from_leg = raw.inputs.iter().filter(|x| x == &w).count();
            let produced = from_leg + raw.body.production_count(w);
            if produced > 1 {
                violations
                    .push(DiagramViolation::NotLeftMonogamous { wire: w.clone(), produced });
            }
        }
        if let Some(cycle) = find_cycle(&raw.body) {
            violations.push(DiagramViolation::NotAcyclic { cycle });
        }
        if !violations.is_empty() {
            return Err(violations);
        }

        let wire_idx: HashMap<Name, usize> =
            raw.body.wires.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let wires: Vec<WireInfo> = raw
            .body
            .wires
            .iter()
            .map(|w| {
                let ty_name = &raw.typing.wire_map[w];
                WireInfo { name: w.clone(), ty: sig.type_index(ty_name).unwrap() }
            })
            .collect();
        let boxes: Vec<BoxInfo> = raw
            .body
            .boxes
            .iter()
            .map(|b| {
                let ty_name = &raw.typing.box_map[&b.name];
                BoxInfo {
                    name: b.name.clone(),
                    ty: sig.box_type_index(ty_name).unwrap(),
                    inputs: b.inputs.iter().map(|w| wire_idx[w]).collect(),
                    outputs: b.outputs.iter().map(|w| wire_idx[w]).collect(),
                }
            })
            .collect();
        let box_idx = boxes.iter().enumerate().map(|(i, b)| (b.name.clone(), i)).collect();
        let inputs: Vec<usize> = raw.inputs.iter().map(|w| wire_idx[w]).collect();
        let outputs: Vec<usize> = raw.outputs.iter().map(|w| wire_idx[w]).collect();

        let n = wires.len();
        let mut producer = vec![None; n];
        let mut consumers = vec![Vec::new(); n];
        for (bi, b) in boxes.iter().enumerate() {
            for (port, &w) in b.inputs.iter().enumerate() {
                consumers[w].push((bi, port));
            }
            for (port, &w) in b.outputs.iter().enumerate() {
                producer[w] = Some((bi, port));
            }
        }
        let mut input_pos = vec![None; n];
        for (pos, &w) in inputs.iter().enumerate() {
            input_pos[w] = Some(pos);
        }
        let mut output_pos = vec![Vec::new(); n];
        for (pos, &w) in outputs.iter().enumerate() {
            output_pos[w].push(pos);
        }

        Ok(StringDiagram {
            sig,
            wires,
            boxes,
            inputs,
            outputs,
            wire_idx,
            box_idx,
            producer,
            consumers,
            input_pos,
            output_pos,
        })
    }

    pub fn sig(&self) -> &Arc<Signature> {
        &self.sig
    }

    pub fn wire_count(&self) -> usize {
        self.wires.len()
    }

    pub fn wires(&self) -> &[WireInfo] {
        &self.wires
    }

    pub fn wire_name(&self, i: usize) -> &Name {
        &self.wires[i].name
    }

    pub fn wire_type(&self, i: usize) -> usize {
        self.wires[i].ty
    }

    pub fn wire_index(&self, w: &str) -> Option<usize> {
        self.wire_idx.get(w).copied()
    }

    pub fn box_count(&self) -> usize {
        self.boxes.len()
    }

    pub fn boxes(&self) -> &[BoxInfo] {
        &self.boxes
    }

    pub fn box_info(&self, i: usize) -> &BoxInfo {
        &self.boxes[i]
    }

    pub fn box_index(&self, b: &str) -> Option<usize> {
        self.box_idx.get(b).copied()
    }

    /// The input leg: wire indices in interface order.
    pub fn inputs(&self) -> &[usize] {
        &self.inputs
    }

    /// The output leg: wire indices in interface order.
    pub fn outputs(&self) -> &[usize] {
        &self.outputs
    }

    pub fn producer(&self, w: usize) -> Option<(usize, usize)> {
        self.producer[w]
    }

    pub fn consumers(&self, w: usize) -> &[(usize, usize)] {
        &self.consumers[w]
    }

    pub fn input_pos(&self, w: usize) -> Option<usize> {
        self.input_pos[w]
    }

    pub fn output_positions(&self, w: usize) -> &[usize] {
        &self.output_pos[w]
    }

    /// Domain as a sequence of type indices.
    pub fn input_types(&self) -> Vec<usize> {
        self.inputs.iter().map(|&w| self.wires[w].ty).collect()
    }

    /// Codomain as a sequence of type indices.
    pub fn output_types(&self) -> Vec<usize> {
        self.outputs.iter().map(|&w| self.wires[w].ty).collect()
    }

    /// Boxes in a topological order (producers before consumers), smallest
    /// index first among ready boxes, so the order is deterministic.
    pub fn topo_boxes(&self) -> Vec<usize> {
        let nb = self.boxes.len();
        // Indegree counts input ports fed by some box.
        let mut indegree = vec![0usize; nb];
        for (bi, b) in self.boxes.iter().enumerate() {
            for &w in &b.inputs {
                if self.producer[w].is_some() {
                    indegree[bi] += 1;
                }
            }
        }
        let mut ready: std::collections::BTreeSet<usize> = indegree
            .iter()
            .enumerate()
            .filter(|(_, &d)| d == 0)
            .map(|(i, _)| i)
            .collect();
        let mut order = Vec::with_capacity(nb);
        while let Some(&b) = ready.iter().next() {
            ready.remove(&b);
            order.push(b);
            for &w in &self.boxes[b].outputs {
                for &(c, _) in &self.consumers[w] {
                    indegree[c] -= 1;
                    if indegree[c] == 0 {
                        ready.insert(c);
                    }
                }
            }
        }
        debug_assert_eq!(order.len(), nb, "acyclic diagram must topo-sort completely");
        order
    }

    /// Export back to the name-based form (e.g. for serialization).
    pub fn to_raw(&self) -> RawDiagram {
        let mut body = Hypergraph::new();
        let mut typing = HypergraphMorphism::default();
        for w in &self.wires {
            body.wires.push(w.name.clone());
            typing.wire_map.insert(w.name.clone(), self.sig.type_name(w.ty).clone());
        }
        for b in &self.boxes {
            body.boxes.push(BoxDecl {
                name: b.name.clone(),
                inputs: b.inputs.iter().map(|&w| self.wires[w].name.clone()).collect(),
                outputs: b.outputs.iter().map(|&w| self.wires[w].name.clone()).collect(),
            });
            typing.box_map.insert(b.name.clone(), self.sig.box_type(b.ty).name.clone());
        }
        RawDiagram {
            body,
            typing,
            inputs: self.inputs.iter().map(|&w| self.wires[w].name.clone()).collect(),
            outputs: self.outputs.iter().map(|&w| self.wires[w].name.clone()).collect(),
        }
    }
}

/// Chainable construction of a [`RawDiagram`] plus the final validating
/// build. Types and box types are given by name against the signature.
#[derive(Clone, Debug)]
pub struct DiagramBuilder {
    sig: Arc<Signature>,
    raw: RawDiagram,
}

impl DiagramBuilder {
    pub fn new(sig: &Arc<Signature>) -> Self {
        DiagramBuilder { sig: Arc::clone(sig), raw: RawDiagram::default() }
    }

    pub fn wire(mut self, w: impl AsRef<str>, ty: impl AsRef<str>) -> Self {
        let w = name(w);
        self.raw.body.wires.push(w.clone());
        self.raw.typing.wire_map.insert(w, name(ty));
        self
    }

    pub fn box_(
        mut self,
        b: impl AsRef<str>,
        ty: impl AsRef<str>,
        inputs: impl IntoIterator<Item = impl AsRef<str>>,
        outputs: impl IntoIterator<Item = impl AsRef<str>>,
    ) -> Self {
        let b = name(b);
        self.raw.body.boxes.push(BoxDecl::new(&*b, inputs, outputs));
        self.raw.typing.box_map.insert(b, name(ty));
        self
    }

    pub fn inputs(mut self, ws: impl IntoIterator<Item = impl AsRef<str>>) -> Self {
        self.raw.inputs = ws.into_iter().map(name).collect();
        self
    }

    pub fn outputs(mut self, ws: impl IntoIterator<Item = impl AsRef<str>>) -> Self {
        self.raw.outputs = ws.into_iter().map(name).collect();
        self
    }

    pub fn raw(&self) -> &RawDiagram {
        &self.raw
    }

    pub fn build(self) -> Result<StringDiagram, Vec<DiagramViolation>> {
        StringDiagram::build(self.sig, self.raw)
    }
}

/// Errors from [`compose`] and [`tensor`].
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ComposeError {
    #[error("diagrams are over different signatures")]
    SignatureMismatch,
    #[error("interface length mismatch: left has {left} outputs, right has {right} inputs")]
    InterfaceLength { left: usize, right: usize },
    #[error("interface type mismatch at position {pos}: left output is \"{left}\", right input is \"{right}\"")]
    InterfaceType { pos: usize, left: Name, right: Name },
}

/// Pick a name not yet in `used`, preferring `base` and falling back to
/// `base#2`, `base#3`, …; records the winner in `used`.
fn fresh_name(base: &Name, used: &mut HashSet<Name>) -> Name {
    if used.insert(base.clone()) {
        return base.clone();
    }
    let mut k = 2usize;
    loop {
        let cand = name(format!("{base}#{k}"));
        if used.insert(cand.clone()) {
            return cand;
        }
        k += 1;
    }
}

/// Sequential composition `f` then `g`: the i-th output wire of `f` is glued
/// to the i-th input wire of `g`. Inputs come from `f`, outputs from `g`.
/// The result is generally *not* normalized.
///
/// Merged wires keep the name from `f`'s side; `g`-only wires and boxes are
/// renamed on collision.
pub fn compose(f: &StringDiagram, g: &StringDiagram) -> Result<StringDiagram, ComposeError> {
    if f.sig != g.sig {
        return Err(ComposeError::SignatureMismatch);
    }
    if f.outputs.len() != g.inputs.len() {
        return Err(ComposeError::InterfaceLength {
            left: f.outputs.len(),
            right: g.inputs.len(),
        });
    }
    for (pos, (&fo, &gi)) in f.outputs.iter().zip(g.inputs.iter()).enumerate() {
        if f.wires[fo].ty != g.wires[gi].ty {
            return Err(ComposeError::InterfaceType {
                pos,
                left: f.sig.type_name(f.wires[fo].ty).clone(),
                right: g.sig.type_name(g.wires[gi].ty).clone(),
            });
        }
    }

    let nf = f.wires.len();
    let n = nf + g.wires.len();
    let mut uf = UnionFind::new(n);
    for (i, &fo) in f.outputs.iter().enumerate() {
        uf.union(fo, nf + g.inputs[i]);
    }

    // One result wire per class. Each class contains at most one f-wire
    // (g input-leg wires are pairwise distinct), which donates its name.
    let mut class_wire: HashMap<usize, usize> = HashMap::new();
    let mut used_wire_names: HashSet<Name> = HashSet::new();
    let mut body = Hypergraph::new();
    let mut typing = HypergraphMorphism::default();
    let push_wire = |body: &mut Hypergraph,
                         typing: &mut HypergraphMorphism,
                         used: &mut HashSet<Name>,
                         base: &Name,
                         ty: usize,
                         sig: &Signature|
     -> usize {
        let w = fresh_name(base, used);
        body.wires.push(w.clone());
        typing.wire_map.insert(w, sig.type_name(ty).clone());
        body.wires.len() - 1
    };
    for (i, w) in f.wires.iter().enumerate() {
        let root = uf.find(i);
        let slot =
            push_wire(&mut body, &mut typing, &mut used_wire_names, &w.name, w.ty, &f.sig);
        class_wire.insert(root, slot);
    }
    for (j, w) in g.wires.iter().enumerate() {
        let root = uf.find(nf + j);
        class_wire.entry(root).or_insert_with(|| {
            
            push_wire(&mut body, &mut typing, &mut used_wire_names, &w.name, w.ty, &f.sig)
        });
    }

    let wire_of_f = |uf: &mut UnionFind, cw: &HashMap<usize, usize>, i: usize| cw[&uf.find(i)];
    let wire_of_g =
        |uf: &mut UnionFind, cw: &HashMap<usize, usize>, j: usize| cw[&uf.find(nf + j)];

    let mut used_box_names: HashSet<Name> = HashSet::new();
    for b in &f.boxes {
        let bname = fresh_name(&b.name, &mut used_box_names);
        body.boxes.push(BoxDecl {
            name: bname.clone(),
            inputs: b
                .inputs
                .iter()
                .map(|&w| body_wire_name(&body, wire_of_f(&mut uf, &class_wire, w)))
                .collect(),
            outputs: b
                .outputs
                .iter()
                .map(|&w| body_wire_name(&body, wire_of_f(&mut uf, &class_wire, w)))
                .collect(),
        });
        typing.box_map.insert(bname, f.sig.box_type(b.ty).name.clone());
    }
    for b in &g.boxes {
        let bname = fresh_name(&b.name, &mut used_box_names);
        body.boxes.push(BoxDecl {
            name: bname.clone(),
            inputs: b
                .inputs
                .iter()
                .map(|&w| body_wire_name(&body, wire_of_g(&mut uf, &class_wire, w)))
                .collect(),
            outputs: b
                .outputs
                .iter()
                .map(|&w| body_wire_name(&body, wire_of_g(&mut uf, &class_wire, w)))
                .collect(),
        });
        typing.box_map.insert(bname, g.sig.box_type(b.ty).name.clone());
    }

    let raw = RawDiagram {
        inputs: f
            .inputs
            .iter()
            .map(|&w| body_wire_name(&body, wire_of_f(&mut uf, &class_wire, w)))
            .collect(),
        outputs: g
            .outputs
            .iter()
            .map(|&w| body_wire_name(&body, wire_of_g(&mut uf, &class_wire, w)))
            .collect(),
        body,
        typing,
    };
    Ok(StringDiagram::build(Arc::clone(&f.sig), raw)
        .expect("composite of valid diagrams must be valid"))
}

fn body_wire_name(body: &Hypergraph, idx: usize) -> Name {
    body.wires[idx].clone()
}

/// Parallel composition: disjoint union of bodies, legs concatenated.
/// `g`-side wires and boxes are renamed on collision.
pub fn tensor(f: &StringDiagram, g: &StringDiagram) -> Result<StringDiagram, ComposeError> {
    if f.sig != g.sig {
        return Err(ComposeError::SignatureMismatch);
    }
    let mut body = Hypergraph::new();
    let mut typing = HypergraphMorphism::default();
    let mut used_wires: HashSet<Name> = HashSet::new();
    let mut used_boxes: HashSet<Name> = HashSet::new();

    let mut f_wire_names: Vec<Name> = Vec::with_capacity(f.wires.len());
    for w in &f.wires {
        let nm = fresh_name(&w.name, &mut used_wires);
        body.wires.push(nm.clone());
        typing.wire_map.insert(nm.clone(), f.sig.type_name(w.ty).clone());
        f_wire_names.push(nm);
    }
    let mut g_wire_names: Vec<Name> = Vec::with_capacity(g.wires.len());
    for w in &g.wires {
        let nm = fresh_name(&w.name, &mut used_wires);
        body.wires.push(nm.clone());
        typing.wire_map.insert(nm.clone(), g.sig.type_name(w.ty).clone());
        g_wire_names.push(nm);
    }
    for b in &f.boxes {
        let nm = fresh_name(&b.name, &mut used_boxes);
        body.boxes.push(BoxDecl {
            name: nm.clone(),
            inputs: b.inputs.iter().map(|&w| f_wire_names[w].clone()).collect(),
            outputs: b.outputs.iter().map(|&w| f_wire_names[w].clone()).collect(),
        });
        typing.box_map.insert(nm, f.sig.box_type(b.ty).name.clone());
    }
    for b in &g.boxes {
        let nm = fresh_name(&b.name, &mut used_boxes);
        body.boxes.push(BoxDecl {
            name: nm.clone(),
            inputs: b.inputs.iter().map(|&w| g_wire_names[w].clone()).collect(),
            outputs: b.outputs.iter().map(|&w| g_wire_names[w].clone()).collect(),
        });
        typing.box_map.insert(nm, g.sig.box_type(b.ty).name.clone());
    }
    let raw = RawDiagram {
        inputs: f
            .inputs
            .iter()
            .map(|&w| f_wire_names[w].clone())
            .chain(g.inputs.iter().map(|&w| g_wire_names[w].clone()))
            .collect(),
        outputs: f
            .outputs
            .iter()
            .map(|&w| f_wire_names[w].clone())
            .chain(g.outputs.iter().map(|&w| g_wire_names[w].clone()))
            .collect(),
        body,
        typing,
    };
    Ok(StringDiagram::build(Arc::clone(&f.sig), raw)
        .expect("tensor of valid diagrams must be valid"))
}

/// Errors from the generator constructors.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("unknown type \"{0}\"")]
    UnknownType(Name),
    #[error("unknown box type \"{0}\"")]
    UnknownBoxType(Name),
}

fn resolve_types(sig: &Signature, types: &[&str]) -> Result<Vec<usize>, GenError> {
    types
        .iter()
        .map(|t| sig.type_index(t).ok_or_else(|| GenError::UnknownType(name(*t))))
        .collect()
}

/// The empty diagram — the monoidal unit I.
pub fn empty_diagram(sig: &Arc<Signature>) -> StringDiagram {
    StringDiagram::build(Arc::clone(sig), RawDiagram::default())
        .expect("empty diagram is valid")
}

/// Identity on a list of types: bare wires passed straight through.
pub fn identity(sig: &Arc<Signature>, types: &[&str]) -> Result<StringDiagram, GenError> {
    resolve_types(sig, types)?;
    let mut b = DiagramBuilder::new(sig);
    let ws: Vec<String> = (0..types.len()).map(|i| format!("x{i}")).collect();
    for (w, t) in ws.iter().zip(types) {
        b = b.wire(w, *t);
    }
    Ok(b.inputs(ws.iter()).outputs(ws.iter()).build().expect("identity is valid"))
}

/// Interface permutation on a list of types: outputs are the input wires
/// reordered by `perm` (output j is input wire `perm[j]`). Swaps are the
/// two-element case.
pub fn permutation(
    sig: &Arc<Signature>,
    types: &[&str],
    perm: &[usize],
) -> Result<StringDiagram, GenError> {
    assert_eq!(types.len(), perm.len(), "perm must cover the whole interface");
    resolve_types(sig, types)?;
    let mut b = DiagramBuilder::new(sig);
    let ws: Vec<String> = (0..types.len()).map(|i| format!("x{i}")).collect();
    for (w, t) in ws.iter().zip(types) {
        b = b.wire(w, *t);
    }
    let outs: Vec<&String> = perm.iter().map(|&i| &ws[i]).collect();
    Ok(b.inputs(ws.iter()).outputs(outs).build().expect("permutation is valid"))
}

/// The wire crossing S ⊗ T → T ⊗ S.
pub fn swap_diagram(sig: &Arc<Signature>, s: &str, t: &str) -> Result<StringDiagram, GenError> {
    permutation(sig, &[s, t], &[1, 0])
}

/// copy: one wire, listed twice in the outputs.
pub fn copy_diagram(sig: &Arc<Signature>, t: &str) -> Result<StringDiagram, GenError> {
    copy_many(sig, &[t])
}

/// n-wire copy: X₁…Xₙ → X₁…Xₙ ⊗ X₁…Xₙ.
pub fn copy_many(sig: &Arc<Signature>, types: &[&str]) -> Result<StringDiagram, GenError> {
    resolve_types(sig, types)?;
    let mut b = DiagramBuilder::new(sig);
    let ws: Vec<String> = (0..types.len()).map(|i| format!("x{i}")).collect();
    for (w, t) in ws.iter().zip(types) {
        b = b.wire(w, *t);
    }
    let outs: Vec<&String> = ws.iter().chain(ws.iter()).collect();
    Ok(b.inputs(ws.iter()).outputs(outs).build().expect("copy is valid"))
}

/// del: one wire, consumed and absent from the outputs.
pub fn del_diagram(sig: &Arc<Signature>, t: &str) -> Result<StringDiagram, GenError> {
    del_many(sig, &[t])
}

/// n-wire discard: X₁…Xₙ → I.
pub fn del_many(sig: &Arc<Signature>, types: &[&str]) -> Result<StringDiagram, GenError> {
    resolve_types(sig, types)?;
    let mut b = DiagramBuilder::new(sig);
    let ws: Vec<String> = (0..types.len()).map(|i| format!("x{i}")).collect();
    for (w, t) in ws.iter().zip(types) {
        b = b.wire(w, *t);
    }
    Ok(b.inputs(ws.iter()).outputs([] as [&str; 0]).build().expect("del is valid"))
}

/// The one-box diagram for a box type: fresh input wires x0…, output wires
/// y0…, interface legs in port order.
pub fn box_diagram(sig: &Arc<Signature>, box_type: &str) -> Result<StringDiagram, GenError> {
    let bt = sig
        .box_type_index(box_type)
        .ok_or_else(|| GenError::UnknownBoxType(name(box_type)))?;
    let decl = sig.box_type(bt);
    let mut b = DiagramBuilder::new(sig);
    let ins: Vec<String> = (0..decl.inputs.len()).map(|i| format!("x{i}")).collect();
    let outs: Vec<String> = (0..decl.outputs.len()).map(|i| format!("y{i}")).collect();
    for (w, t) in ins.iter().zip(&decl.inputs) {
        b = b.wire(w, t);
    }
    for (w, t) in outs.iter().zip(&decl.outputs) {
        b = b.wire(w, t);
    }
    Ok(b.box_("b0", box_type, ins.iter(), outs.iter())
        .inputs(ins.iter())
        .outputs(outs.iter())
        .build()
        .expect("generator box diagram is valid"))
}

// ---------------------------------------------------------------------------
// Isomorphism-class equality
// ---------------------------------------------------------------------------

fn hash_of(items: &[u64]) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    items.hash(&mut h);
    h.finish()
}

/// Iteratively refined invariant labels for wires and boxes. The labels are
/// preserved by any interface-respecting isomorphism, so they serve both as
/// a cheap pre-filter and to narrow candidate pairs in the search.
fn refine_labels(d: &StringDiagram) -> (Vec<u64>, Vec<u64>) {
    let mut wire_lab: Vec<u64> = d
        .wires()
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let mut items = vec![1u64, w.ty as u64];
            items.push(match d.input_pos(i) {
                Some(p) => p as u64 + 1,
                None => 0,
            });
            for &p in d.output_positions(i) {
                items.push(1000 + p as u64);
            }
            hash_of(&items)
        })
        .collect();
    let mut box_lab: Vec<u64> = d.boxes().iter().map(|b| hash_of(&[2u64, b.ty as u64])).collect();

    for _ in 0..3 {
        let new_box: Vec<u64> = d
            .boxes()
            .iter()
            .enumerate()
            .map(|(bi, b)| {
                let mut items = vec![3u64, box_lab[bi]];
                items.extend(b.inputs.iter().map(|&w| wire_lab[w]));
                items.push(u64::MAX);
                items.extend(b.outputs.iter().map(|&w| wire_lab[w]));
                hash_of(&items)
            })
            .collect();
        let new_wire: Vec<u64> = d
            .wires()
            .iter()
            .enumerate()
            .map(|(i, _)| {
                let mut items = vec![4u64, wire_lab[i]];
                if let Some((b, port)) = d.producer(i) {
                    items.push(new_box[b]);
                    items.push(port as u64);
                }
                items.push(u64::MAX);
                let mut cons: Vec<u64> =
                    d.consumers(i).iter().map(|&(b, port)| new_box[b] ^ (port as u64)).collect();
                cons.sort_unstable();
                items.extend(cons);
                hash_of(&items)
            })
            .collect();
        box_lab = new_box;
        wire_lab = new_wire;
    }
    (wire_lab, box_lab)
}

struct IsoSearch<'a> {
    f: &'a StringDiagram,
    g: &'a StringDiagram,
    wmap: Vec<Option<usize>>,
    wrev: Vec<Option<usize>>,
    bmap: Vec<Option<usize>>,
    brev: Vec<Option<usize>>,
    trail: Vec<usize>,
}

impl<'a> IsoSearch<'a> {
    fn pin_wire(&mut self, wf: usize, wg: usize) -> bool {
        match self.wmap[wf] {
            Some(x) => x == wg,
            None => {
                if self.wrev[wg].is_some() {
                    return false;
                }
                if self.f.wires[wf].ty != self.g.wires[wg].ty {
                    return false;
                }
                self.wmap[wf] = Some(wg);
                self.wrev[wg] = Some(wf);
                self.trail.push(wf);
                true
            }
        }
    }

    fn undo_to(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let wf = self.trail.pop().unwrap();
            let wg = self.wmap[wf].take().unwrap();
            self.wrev[wg] = None;
        }
    }

    fn try_box(&mut self, bf: usize, bg: usize) -> bool {
        let fb = &self.f.boxes[bf];
        let gb = &self.g.boxes[bg];
        if fb.ty != gb.ty {
            return false;
        }
        for (&wf, &wg) in fb.inputs.iter().zip(&gb.inputs) {
            if !self.pin_wire(wf, wg) {
                return false;
            }
        }
        for (&wf, &wg) in fb.outputs.iter().zip(&gb.outputs) {
            if !self.pin_wire(wf, wg) {
                return false;
            }
        }
        true
    }

    fn solve(&mut self, order: &[usize], candidates: &[Vec<usize>], k: usize) -> bool {
        let Some(&bf) = order.get(k) else { return true };
        for &bg in &candidates[bf] {
            if self.brev[bg].is_some() {
                continue;
            }
            let mark = self.trail.len();
            self.bmap[bf] = Some(bg);
            self.brev[bg] = Some(bf);
            if self.try_box(bf, bg) && self.solve(order, candidates, k + 1) {
                return true;
            }
            self.undo_to(mark);
            self.bmap[bf] = None;
            self.brev[bg] = None;
        }
        false
    }
}

/// Equality of isomorphism classes: is there a typing-preserving renaming of
/// wires and boxes carrying `f` to `g` and commuting with both interface
/// legs (interface wires matched pointwise by position)?
///
/// Backtracking search over box pairings, seeded from the pinned interface
/// and pruned by the refined labels of [`refine_labels`].
pub fn iso_equal(f: &StringDiagram, g: &StringDiagram) -> bool {
    if f.sig != g.sig {
        return false;
    }
    if f.wires.len() != g.wires.len()
        || f.boxes.len() != g.boxes.len()
        || f.inputs.len() != g.inputs.len()
        || f.outputs.len() != g.outputs.len()
    {
        return false;
    }

    let (f_wl, f_bl) = refine_labels(f);
    let (g_wl, g_bl) = refine_labels(g);
    let sorted = |v: &[u64]| {
        let mut s = v.to_vec();
        s.sort_unstable();
        s
    };
    if sorted(&f_wl) != sorted(&g_wl) || sorted(&f_bl) != sorted(&g_bl) {
        return false;
    }

    let mut search = IsoSearch {
        f,
        g,
        wmap: vec![None; f.wires.len()],
        wrev: vec![None; g.wires.len()],
        bmap: vec![None; f.boxes.len()],
        brev: vec![None; g.boxes.len()],
        trail: Vec::new(),
    };
    for (&wf, &wg) in f.inputs.iter().zip(&g.inputs) {
        if !search.pin_wire(wf, wg) {
            return false;
        }
    }
    for (&wf, &wg) in f.outputs.iter().zip(&g.outputs) {
        if !search.pin_wire(wf, wg) {
            return false;
        }
    }

    let candidates: Vec<Vec<usize>> = (0..f.boxes.len())
        .map(|bf| (0..g.boxes.len()).filter(|&bg| f_bl[bf] == g_bl[bg]).collect::<Vec<_>>())
        .collect();
    if candidates.iter().any(|c| c.is_empty()) {
        return false;
    }
    let mut order: Vec<usize> = (0..f.boxes.len()).collect();
    order.sort_by_key(|&b| candidates[b].len());

    search.solve(&order, &candidates, 0)
    // Wires not touched by any box or leg are interchangeable within a type;
    // the per-type counts already agree via the label multiset check.
}
