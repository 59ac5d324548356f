//! Shared fixtures, seeded generators, and independent oracles for the
//! integration suites.
//!
//! The oracles recompute their answers from first principles — explicit path
//! enumeration, explicit marginal sums, exhaustive function search — so the
//! library is checked against independent code paths, not against itself.

#![allow(dead_code)] // each test binary uses a different slice of this module

use std::collections::BTreeSet;
use std::sync::Arc;

use markov_dsep::backend::Backend;
use markov_dsep::diagram::{DiagramBuilder, Signature, StringDiagram};
use markov_dsep::finstoch::{FinFactor, FinObject, FinStoch, StochKernel};
use markov_dsep::gauss::{Gauss, GaussKernel, GaussObject};
use markov_dsep::hypergraph::Hypergraph;
use markov_dsep::markov::Interpretation;
use markov_dsep::normalize::{normalize, CausalModel};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const NONE: [&str; 0] = [];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn sig(g: Hypergraph) -> Arc<Signature> {
    Arc::new(Signature::new(g).expect("fixture signature is valid"))
}

pub fn model(d: StringDiagram) -> CausalModel {
    CausalModel::new(d).expect("fixture is a causal model")
}

// ---------------------------------------------------------------------------
// Named fixtures
// ---------------------------------------------------------------------------

/// Fork X ← Z → Y, all three observed.
pub fn fork() -> CausalModel {
    let mut g = Hypergraph::new();
    g.add_wire("Z").add_wire("X").add_wire("Y");
    g.add_box("r", NONE, ["Z"]);
    g.add_box("f", ["Z"], ["X"]);
    g.add_box("g", ["Z"], ["Y"]);
    let d = DiagramBuilder::new(&sig(g))
        .wire("z", "Z")
        .wire("x", "X")
        .wire("y", "Y")
        .box_("mk_z", "r", NONE, ["z"])
        .box_("mk_x", "f", ["z"], ["x"])
        .box_("mk_y", "g", ["z"], ["y"])
        .outputs(["x", "z", "y"])
        .build()
        .unwrap();
    model(d)
}

/// Chain X → Z → Y, all three observed.
pub fn chain() -> CausalModel {
    let mut g = Hypergraph::new();
    g.add_wire("X").add_wire("Z").add_wire("Y");
    g.add_box("a", NONE, ["X"]);
    g.add_box("s", ["X"], ["Z"]);
    g.add_box("t", ["Z"], ["Y"]);
    let d = DiagramBuilder::new(&sig(g))
        .wire("x", "X")
        .wire("z", "Z")
        .wire("y", "Y")
        .box_("mk_x", "a", NONE, ["x"])
        .box_("mk_z", "s", ["x"], ["z"])
        .box_("mk_y", "t", ["z"], ["y"])
        .outputs(["x", "z", "y"])
        .build()
        .unwrap();
    model(d)
}

/// Collider X → Z ← Y with a further descendant W of Z; all four observed.
pub fn collider() -> CausalModel {
    let mut g = Hypergraph::new();
    g.add_wire("X").add_wire("Y").add_wire("Z").add_wire("W");
    g.add_box("a", NONE, ["X"]);
    g.add_box("b", NONE, ["Y"]);
    g.add_box("c", ["X", "Y"], ["Z"]);
    g.add_box("d", ["Z"], ["W"]);
    let d = DiagramBuilder::new(&sig(g))
        .wire("x", "X")
        .wire("y", "Y")
        .wire("z", "Z")
        .wire("w", "W")
        .box_("mk_x", "a", NONE, ["x"])
        .box_("mk_y", "b", NONE, ["y"])
        .box_("mk_z", "c", ["x", "y"], ["z"])
        .box_("mk_w", "d", ["z"], ["w"])
        .outputs(["x", "y", "z", "w"])
        .build()
        .unwrap();
    model(d)
}

/// Fork plus an extra observed descendant W of Z; restricting to {X, Y, Z}
/// must recover the plain fork.
pub fn fork_with_descendant() -> CausalModel {
    let mut g = Hypergraph::new();
    g.add_wire("Z").add_wire("X").add_wire("Y").add_wire("W");
    g.add_box("r", NONE, ["Z"]);
    g.add_box("f", ["Z"], ["X"]);
    g.add_box("g", ["Z"], ["Y"]);
    g.add_box("h", ["Z"], ["W"]);
    let d = DiagramBuilder::new(&sig(g))
        .wire("z", "Z")
        .wire("x", "X")
        .wire("y", "Y")
        .wire("w", "W")
        .box_("mk_z", "r", NONE, ["z"])
        .box_("mk_x", "f", ["z"], ["x"])
        .box_("mk_y", "g", ["z"], ["y"])
        .box_("mk_w", "h", ["z"], ["w"])
        .outputs(["x", "z", "y", "w"])
        .build()
        .unwrap();
    model(d)
}

/// Diamond Z → X, Z → Y, (X, Y) → W, all four observed.
pub fn diamond() -> CausalModel {
    let mut g = Hypergraph::new();
    g.add_wire("Z").add_wire("X").add_wire("Y").add_wire("W");
    g.add_box("r", NONE, ["Z"]);
    g.add_box("f", ["Z"], ["X"]);
    g.add_box("g", ["Z"], ["Y"]);
    g.add_box("h", ["X", "Y"], ["W"]);
    let d = DiagramBuilder::new(&sig(g))
        .wire("z", "Z")
        .wire("x", "X")
        .wire("y", "Y")
        .wire("w", "W")
        .box_("mk_z", "r", NONE, ["z"])
        .box_("mk_x", "f", ["z"], ["x"])
        .box_("mk_y", "g", ["z"], ["y"])
        .box_("mk_w", "h", ["x", "y"], ["w"])
        .outputs(["x", "y", "z", "w"])
        .build()
        .unwrap();
    model(d)
}

/// Instrumental scenario: instrument X and confounder L are roots,
/// A depends on both, B depends on A and L; all four observed.
pub fn instrumental() -> CausalModel {
    let mut g = Hypergraph::new();
    g.add_wire("X").add_wire("L").add_wire("A").add_wire("B");
    g.add_box("rx", NONE, ["X"]);
    g.add_box("rl", NONE, ["L"]);
    g.add_box("fa", ["X", "L"], ["A"]);
    g.add_box("fb", ["A", "L"], ["B"]);
    let d = DiagramBuilder::new(&sig(g))
        .wire("x", "X")
        .wire("l", "L")
        .wire("a", "A")
        .wire("b", "B")
        .box_("mk_x", "rx", NONE, ["x"])
        .box_("mk_l", "rl", NONE, ["l"])
        .box_("mk_a", "fa", ["x", "l"], ["a"])
        .box_("mk_b", "fb", ["a", "l"], ["b"])
        .outputs(["x", "a", "b", "l"])
        .build()
        .unwrap();
    model(d)
}

/// Two sources produced jointly by a single box: r emits (Z1, Z2) at once,
/// X is derived from Z1 and Y from Z2; output leg (x, z1, z2, y).
pub fn two_source() -> CausalModel {
    let mut g = Hypergraph::new();
    g.add_wire("Z1").add_wire("Z2").add_wire("X").add_wire("Y");
    g.add_box("r", NONE, ["Z1", "Z2"]);
    g.add_box("f", ["Z1"], ["X"]);
    g.add_box("g", ["Z2"], ["Y"]);
    let d = DiagramBuilder::new(&sig(g))
        .wire("z1", "Z1")
        .wire("z2", "Z2")
        .wire("x", "X")
        .wire("y", "Y")
        .box_("mk_zz", "r", NONE, ["z1", "z2"])
        .box_("mk_x", "f", ["z1"], ["x"])
        .box_("mk_y", "g", ["z2"], ["y"])
        .outputs(["x", "z1", "z2", "y"])
        .build()
        .unwrap();
    model(d)
}

/// The DAG fixtures suitable for the classical decider (closed, pure bloom,
/// every box single-output).
pub fn dag_fixtures() -> Vec<(&'static str, CausalModel)> {
    vec![
        ("fork", fork()),
        ("chain", chain()),
        ("collider", collider()),
        ("fork_with_descendant", fork_with_descendant()),
        ("diamond", diamond()),
        ("instrumental", instrumental()),
    ]
}

// ---------------------------------------------------------------------------
// Seeded random models
// ---------------------------------------------------------------------------

/// A closed, pure-bloom model whose boxes each have exactly one output: the
/// string-diagram form of a DAG model. Every wire is observed; the output
/// leg is shuffled so nothing depends on declaration order.
pub fn random_dag_model(rng: &mut ChaCha8Rng, max_wires: usize) -> CausalModel {
    let n = rng.gen_range(2..=max_wires);
    let mut g = Hypergraph::new();
    for i in 0..n {
        g.add_wire(format!("T{i}"));
    }
    let mut parents: Vec<Vec<usize>> = Vec::with_capacity(n);
    for i in 0..n {
        let ps: Vec<usize> = (0..i).filter(|_| rng.gen_bool(0.45)).collect();
        let ins: Vec<String> = ps.iter().map(|p| format!("T{p}")).collect();
        g.add_box(format!("c{i}"), ins, [format!("T{i}")]);
        parents.push(ps);
    }
    let s = sig(g);
    let mut b = DiagramBuilder::new(&s);
    for i in 0..n {
        b = b.wire(format!("w{i}"), format!("T{i}"));
    }
    for (i, ps) in parents.iter().enumerate() {
        let ins: Vec<String> = ps.iter().map(|p| format!("w{p}")).collect();
        b = b.box_(format!("n{i}"), format!("c{i}"), ins, [format!("w{i}")]);
    }
    let mut leg: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
    leg.shuffle(rng);
    model(b.outputs(leg).build().unwrap())
}

/// A general causal model: multi-output boxes, optional global inputs
/// (which are passed through to the output leg so conditional-independence
/// queries over them stay meaningful), and latent wires dropped from the
/// output leg. The diagram is normalized before being wrapped, so dead
/// branches become genuine latent structure rather than violations.
pub fn random_general_model(rng: &mut ChaCha8Rng, max_wires: usize) -> CausalModel {
    loop {
        let n = rng.gen_range(3..=max_wires);
        let n_inputs = if rng.gen_bool(0.4) { rng.gen_range(1..=2.min(n - 2)) } else { 0 };
        let mut g = Hypergraph::new();
        for i in 0..n {
            g.add_wire(format!("T{i}"));
        }

        // Wires 0..n_inputs are global inputs; the rest are produced by
        // boxes, occasionally two at a time.
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut i = n_inputs;
        while i < n {
            let take = if i + 1 < n && rng.gen_bool(0.3) { 2 } else { 1 };
            groups.push((i..i + take).collect());
            i += take;
        }
        let mut box_inputs: Vec<Vec<usize>> = Vec::new();
        for grp in &groups {
            let first = grp[0];
            let ins: Vec<usize> = (0..first).filter(|_| rng.gen_bool(0.5)).collect();
            let in_tys: Vec<String> = ins.iter().map(|p| format!("T{p}")).collect();
            let out_tys: Vec<String> = grp.iter().map(|p| format!("T{p}")).collect();
            g.add_box(format!("c{first}"), in_tys, out_tys);
            box_inputs.push(ins);
        }

        let s = sig(g);
        let mut b = DiagramBuilder::new(&s);
        for i in 0..n {
            b = b.wire(format!("w{i}"), format!("T{i}"));
        }
        for (grp, ins) in groups.iter().zip(&box_inputs) {
            let first = grp[0];
            let in_ws: Vec<String> = ins.iter().map(|p| format!("w{p}")).collect();
            let out_ws: Vec<String> = grp.iter().map(|p| format!("w{p}")).collect();
            b = b.box_(format!("n{first}"), format!("c{first}"), in_ws, out_ws);
        }

        // Observe every input wire plus a random subset of produced wires.
        let mut leg: Vec<usize> = (0..n_inputs).collect();
        leg.extend((n_inputs..n).filter(|_| rng.gen_bool(0.7)));
        leg.shuffle(rng);
        let leg_names: Vec<String> = leg.iter().map(|i| format!("w{i}")).collect();
        let in_names: Vec<String> = (0..n_inputs).map(|i| format!("w{i}")).collect();

        let d = b.inputs(in_names).outputs(leg_names).build().unwrap();
        let d = normalize(&d);
        let m = CausalModel::new(d).expect("normalized diagram with injective leg");
        // Keep only models with at least two observed non-input wires, so a
        // d-separation query has something to talk about.
        let observed = m.output_set().len();
        if observed >= n_inputs + 2 {
            return m;
        }
    }
}

/// A closed pure-bloom model with occasional two-output boxes: every wire
/// observed, every box type used once. This is the shape for which the
/// compatibility decision can run its reconstruction.
pub fn random_pure_bloom_model(rng: &mut ChaCha8Rng, max_wires: usize) -> CausalModel {
    let n = rng.gen_range(2..=max_wires);
    let mut g = Hypergraph::new();
    for i in 0..n {
        g.add_wire(format!("T{i}"));
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut i = 0;
    while i < n {
        let take = if i + 1 < n && rng.gen_bool(0.3) { 2 } else { 1 };
        groups.push((i..i + take).collect());
        i += take;
    }
    let mut box_inputs: Vec<Vec<usize>> = Vec::new();
    for grp in &groups {
        let first = grp[0];
        let ins: Vec<usize> = (0..first).filter(|_| rng.gen_bool(0.5)).collect();
        let in_tys: Vec<String> = ins.iter().map(|p| format!("T{p}")).collect();
        let out_tys: Vec<String> = grp.iter().map(|p| format!("T{p}")).collect();
        g.add_box(format!("c{first}"), in_tys, out_tys);
        box_inputs.push(ins);
    }
    let s = sig(g);
    let mut b = DiagramBuilder::new(&s);
    for i in 0..n {
        b = b.wire(format!("w{i}"), format!("T{i}"));
    }
    for (grp, ins) in groups.iter().zip(&box_inputs) {
        let first = grp[0];
        let in_ws: Vec<String> = ins.iter().map(|p| format!("w{p}")).collect();
        let out_ws: Vec<String> = grp.iter().map(|p| format!("w{p}")).collect();
        b = b.box_(format!("n{first}"), format!("c{first}"), in_ws, out_ws);
    }
    let mut leg: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
    leg.shuffle(rng);
    model(b.outputs(leg).build().unwrap())
}

/// An arbitrary well-formed diagram, typically not normalized: plenty of
/// discarded wires and dead boxes so elimination order matters.
pub fn random_diagram(rng: &mut ChaCha8Rng, max_wires: usize) -> StringDiagram {
    let n = rng.gen_range(2..=max_wires);
    let n_inputs = if rng.gen_bool(0.3) { 1 } else { 0 };
    let mut g = Hypergraph::new();
    for i in 0..n {
        g.add_wire(format!("T{i}"));
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut i = n_inputs;
    while i < n {
        let take = if i + 1 < n && rng.gen_bool(0.25) { 2 } else { 1 };
        groups.push((i..i + take).collect());
        i += take;
    }
    let mut box_inputs: Vec<Vec<usize>> = Vec::new();
    for grp in &groups {
        let first = grp[0];
        let ins: Vec<usize> = (0..first).filter(|_| rng.gen_bool(0.4)).collect();
        let in_tys: Vec<String> = ins.iter().map(|p| format!("T{p}")).collect();
        let out_tys: Vec<String> = grp.iter().map(|p| format!("T{p}")).collect();
        g.add_box(format!("c{first}"), in_tys, out_tys);
        box_inputs.push(ins);
    }
    let s = sig(g);
    let mut b = DiagramBuilder::new(&s);
    for i in 0..n {
        b = b.wire(format!("w{i}"), format!("T{i}"));
    }
    for (grp, ins) in groups.iter().zip(&box_inputs) {
        let first = grp[0];
        let in_ws: Vec<String> = ins.iter().map(|p| format!("w{p}")).collect();
        let out_ws: Vec<String> = grp.iter().map(|p| format!("w{p}")).collect();
        b = b.box_(format!("n{first}"), format!("c{first}"), in_ws, out_ws);
    }
    // A sparse output leg leaves most branches discarded.
    let leg: Vec<String> =
        (n_inputs..n).filter(|_| rng.gen_bool(0.35)).map(|i| format!("w{i}")).collect();
    let in_names: Vec<String> = (0..n_inputs).map(|i| format!("w{i}")).collect();
    b.inputs(in_names).outputs(leg).build().unwrap()
}

// ---------------------------------------------------------------------------
// Seeded random interpretations and tables
// ---------------------------------------------------------------------------

fn labels(card: usize) -> Vec<String> {
    (0..card).map(|v| v.to_string()).collect()
}

/// A positive random probability vector (normalized exponentials).
pub fn random_probs(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..len).map(|_| -f64::ln(rng.gen_range(1e-12..1.0))).collect();
    let total: f64 = v.iter().sum();
    for x in &mut v {
        *x /= total;
    }
    v
}

/// A random finite-stochastic interpretation for every type and box type in
/// the model's signature, with per-type cardinalities in 1..=max_card.
pub fn random_fin_interp(
    rng: &mut ChaCha8Rng,
    m: &CausalModel,
    max_card: usize,
) -> Interpretation<FinStoch> {
    let s = m.diagram().sig().clone();
    let mut interp = Interpretation::new(FinStoch);
    for t in 0..s.type_count() {
        let card = rng.gen_range(1..=max_card);
        let name = s.type_name(t).to_string();
        interp = interp.object(&name, FinObject::of([FinFactor::new(&name, labels(card))]));
    }
    let obj = |tys: &[usize], interp: &Interpretation<FinStoch>| -> FinObject {
        FinObject::of(
            tys.iter().map(|&t| interp.objects[s.type_name(t)].factors[0].clone()),
        )
    };
    for bt in 0..s.box_type_count() {
        let dom = obj(s.box_input_types(bt), &interp);
        let cod = obj(s.box_output_types(bt), &interp);
        let (rows, cols) = (dom.size(), cod.size());
        let mut table = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            table.extend(random_probs(rng, cols));
        }
        let k = StochKernel::new(dom, cod, table).unwrap();
        interp = interp.kernel(s.box_type(bt).name.to_string(), k);
    }
    interp
}

/// A random Gaussian interpretation: dimensions 1..=2 per type, uniformly
/// random affine maps, and well-conditioned covariances S = LLᵀ + 0.1·I.
pub fn random_gauss_interp(rng: &mut ChaCha8Rng, m: &CausalModel) -> Interpretation<Gauss> {
    let s = m.diagram().sig().clone();
    let mut interp = Interpretation::new(Gauss);
    for t in 0..s.type_count() {
        let dim = rng.gen_range(1..=2);
        interp = interp.object(s.type_name(t).to_string(), GaussObject::of([dim]));
    }
    let obj = |tys: &[usize], interp: &Interpretation<Gauss>| -> GaussObject {
        GaussObject::of(tys.iter().map(|&t| interp.objects[s.type_name(t)].dims[0]))
    };
    for bt in 0..s.box_type_count() {
        let dom = obj(s.box_input_types(bt), &interp);
        let cod = obj(s.box_output_types(bt), &interp);
        let (d, c) = (dom.dim(), cod.dim());
        let a = DMatrix::from_fn(c, d, |_, _| rng.gen_range(-1.0..1.0));
        let b = DVector::from_fn(c, |_, _| rng.gen_range(-1.0..1.0));
        let l = DMatrix::from_fn(c, c, |_, _| rng.gen_range(-1.0..1.0));
        let cov = &l * l.transpose() + DMatrix::identity(c, c) * 0.1;
        let k = GaussKernel::new(dom, cod, a, b, cov).unwrap();
        interp = interp.kernel(s.box_type(bt).name.to_string(), k);
    }
    interp
}

/// A random joint state over the given codomain object.
pub fn random_state(rng: &mut ChaCha8Rng, cod: &FinObject) -> StochKernel {
    StochKernel::state(cod.clone(), random_probs(rng, cod.size())).unwrap()
}

// ---------------------------------------------------------------------------
// Independent oracle: exhaustive path-blocking d-separation on a DAG
// ---------------------------------------------------------------------------

/// The underlying DAG of a model, extracted directly from the diagram:
/// wires are nodes and u → v holds when some box consumes u and emits v.
pub fn underlying_dag_edges(m: &CausalModel) -> Vec<Vec<usize>> {
    let d = m.diagram();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); d.wire_count()];
    for bx in d.boxes() {
        for &u in bx.inputs() {
            for &v in bx.outputs() {
                if !children[u].contains(&v) {
                    children[u].push(v);
                }
            }
        }
    }
    children
}

fn dag_descendants(children: &[Vec<usize>], start: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![start];
    while let Some(u) = stack.pop() {
        for &v in &children[u] {
            if seen.insert(v) {
                stack.push(v);
            }
        }
    }
    seen
}

/// Exhaustive path-blocking d-separation with the per-model structures
/// (reverse edges, descendant closures) computed once up front.
pub struct PathOracle {
    children: Vec<Vec<usize>>,
    parents: Vec<Vec<usize>>,
    desc: Vec<BTreeSet<usize>>,
}

impl PathOracle {
    pub fn new(children: Vec<Vec<usize>>) -> Self {
        let n = children.len();
        let mut parents: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (u, ch) in children.iter().enumerate() {
            for &v in ch {
                parents[v].push(u);
            }
        }
        let desc = (0..n).map(|u| dag_descendants(&children, u)).collect();
        PathOracle { children, parents, desc }
    }

    pub fn for_model(m: &CausalModel) -> Self {
        PathOracle::new(underlying_dag_edges(m))
    }

    /// Enumerate every simple undirected path between X and Y and test the
    /// textbook blocking rule at each interior node (non-collider in Z, or
    /// collider with no descendant in Z). Exponential, fine for the
    /// ≤ 8-node models it serves.
    pub fn separated(&self, x: &BTreeSet<usize>, y: &BTreeSet<usize>, z: &BTreeSet<usize>) -> bool {
        path_blocking_separated_impl(&self.children, &self.parents, &self.desc, x, y, z)
    }
}

/// One-shot form of [`PathOracle::separated`].
pub fn path_blocking_separated(
    children: &[Vec<usize>],
    x: &BTreeSet<usize>,
    y: &BTreeSet<usize>,
    z: &BTreeSet<usize>,
) -> bool {
    PathOracle::new(children.to_vec()).separated(x, y, z)
}

fn path_blocking_separated_impl(
    children: &[Vec<usize>],
    parents: &[Vec<usize>],
    desc: &[BTreeSet<usize>],
    x: &BTreeSet<usize>,
    y: &BTreeSet<usize>,
    z: &BTreeSet<usize>,
) -> bool {
    let n = children.len();
    // z_or_below[u]: u or some descendant of u lies in Z.
    let z_or_below: Vec<bool> =
        (0..n).map(|u| z.contains(&u) || desc[u].iter().any(|v| z.contains(v))).collect();

    // A path step remembers the direction of the edge that reached the
    // node: true if the edge points toward it (u → node).
    fn blocked(
        path: &[(usize, bool)],
        z: &BTreeSet<usize>,
        z_or_below: &[bool],
    ) -> bool {
        for i in 1..path.len() - 1 {
            let (node, arrived_forward) = path[i];
            let leaves_forward = path[i + 1].1;
            let is_collider = arrived_forward && !leaves_forward;
            if is_collider {
                if !z_or_below[node] {
                    return true;
                }
            } else if z.contains(&node) {
                return true;
            }
        }
        false
    }

    // Returns true as soon as some unblocked path into Y is found. A path
    // may also pass through Y nodes and continue, so reaching Y does not
    // stop the search.
    #[allow(clippy::too_many_arguments)]
    fn explore(
        node: usize,
        path: &mut Vec<(usize, bool)>,
        on_path: &mut Vec<bool>,
        children: &[Vec<usize>],
        parents: &[Vec<usize>],
        y: &BTreeSet<usize>,
        z: &BTreeSet<usize>,
        z_or_below: &[bool],
    ) -> bool {
        if y.contains(&node) && path.len() > 1 && !blocked(path, z, z_or_below) {
            return true;
        }
        let steps: Vec<(usize, bool)> = children[node]
            .iter()
            .map(|&v| (v, true))
            .chain(parents[node].iter().map(|&v| (v, false)))
            .collect();
        for (next, forward) in steps {
            if on_path[next] {
                continue;
            }
            path.push((next, forward));
            on_path[next] = true;
            let open =
                explore(next, path, on_path, children, parents, y, z, z_or_below);
            path.pop();
            on_path[next] = false;
            if open {
                return true;
            }
        }
        false
    }

    for &sx in x {
        let mut path = vec![(sx, false)];
        let mut on_path = vec![false; n];
        on_path[sx] = true;
        if explore(sx, &mut path, &mut on_path, children, parents, y, z, &z_or_below) {
            return false;
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Independent oracle: elementary conditional independence of a finite state
// ---------------------------------------------------------------------------

/// Marginal probability of an assignment to a subset of positions, computed
/// by direct summation over the full table.
fn assignment_prob(table: &[f64], sizes: &[usize], fixed: &[(usize, usize)]) -> f64 {
    let total: usize = sizes.iter().product();
    let mut p = 0.0;
    'outer: for idx in 0..total {
        let mut rem = idx;
        let mut digits = vec![0usize; sizes.len()];
        for i in (0..sizes.len()).rev() {
            digits[i] = rem % sizes[i];
            rem /= sizes[i];
        }
        for &(pos, val) in fixed {
            if digits[pos] != val {
                continue 'outer;
            }
        }
        p += table[idx];
    }
    p
}

/// Textbook conditional independence X ⊥ Y | Z for a joint table over
/// positions 0..sizes.len(): P(x,y,z)·P(z) = P(x,z)·P(y,z) for every cell.
pub fn state_ci_oracle(
    table: &[f64],
    sizes: &[usize],
    xs: &[usize],
    ys: &[usize],
    zs: &[usize],
    tol: f64,
) -> bool {
    let total: usize = sizes.iter().product();
    for idx in 0..total {
        let mut rem = idx;
        let mut digits = vec![0usize; sizes.len()];
        for i in (0..sizes.len()).rev() {
            digits[i] = rem % sizes[i];
            rem /= sizes[i];
        }
        let fix = |ps: &[usize]| -> Vec<(usize, usize)> {
            ps.iter().map(|&p| (p, digits[p])).collect()
        };
        let xz: Vec<(usize, usize)> =
            fix(xs).into_iter().chain(fix(zs)).collect();
        let yz: Vec<(usize, usize)> =
            fix(ys).into_iter().chain(fix(zs)).collect();
        let xyz: Vec<(usize, usize)> =
            fix(xs).into_iter().chain(fix(ys)).chain(fix(zs)).collect();
        let lhs = assignment_prob(table, sizes, &xyz) * assignment_prob(table, sizes, &fix(zs));
        let rhs = assignment_prob(table, sizes, &xz) * assignment_prob(table, sizes, &yz);
        if (lhs - rhs).abs() > tol {
            return false;
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Independent oracle: deterministic-mediator search for the two-source model
// ---------------------------------------------------------------------------

/// Does the bipartite distribution factor through a deterministic map
/// d: Z1 → Z2, i.e. omega(z1, z2) = s(z1)·[d(z1) = z2]? Searched by brute
/// force over all |Z2|^|Z1| functions.
fn factors_deterministically(omega: &[f64], n1: usize, n2: usize, tol: f64) -> bool {
    let s: Vec<f64> = (0..n1).map(|i| omega[i * n2..(i + 1) * n2].iter().sum()).collect();
    let total = n2.pow(n1 as u32);
    'funcs: for code in 0..total {
        let mut rem = code;
        let mut d = vec![0usize; n1];
        for slot in d.iter_mut() {
            *slot = rem % n2;
            rem /= n2;
        }
        for z1 in 0..n1 {
            for z2 in 0..n2 {
                let want = if d[z1] == z2 { s[z1] } else { 0.0 };
                if (omega[z1 * n2 + z2] - want).abs() > tol {
                    continue 'funcs;
                }
            }
        }
        return true;
    }
    false
}

fn transpose_table(omega: &[f64], n1: usize, n2: usize) -> Vec<f64> {
    let mut t = vec![0.0; omega.len()];
    for z1 in 0..n1 {
        for z2 in 0..n2 {
            t[z2 * n1 + z1] = omega[z1 * n2 + z2];
        }
    }
    t
}

/// Compatibility oracle for the two-source structure, by exhaustive search:
/// the joint must be copy-shaped (X a copy of Z2 and Y a copy of Z1,
/// matching the leg order x, z1, z2, y) and its bipartite core must factor
/// through an almost-surely deterministic map in both directions.
pub fn two_source_det_oracle(t: &[f64], n1: usize, n2: usize, tol: f64) -> bool {
    // Extract the (z1, z2) core and check the copy constraints on support.
    let mut omega = vec![0.0; n1 * n2];
    for x in 0..n2 {
        for z1 in 0..n1 {
            for z2 in 0..n2 {
                for y in 0..n1 {
                    let p = t[((x * n1 + z1) * n2 + z2) * n1 + y];
                    if x == z2 && y == z1 {
                        omega[z1 * n2 + z2] += p;
                    } else if p.abs() > tol {
                        return false; // not of the copy shape
                    }
                }
            }
        }
    }
    factors_deterministically(&omega, n1, n2, tol)
        && factors_deterministically(&transpose_table(&omega, n1, n2), n2, n1, tol)
}

/// The copy-shaped joint over (x, z1, z2, y) induced by a bipartite
/// distribution omega on (z1, z2): x mirrors z2 and y mirrors z1.
pub fn copy_shaped_joint(omega: &[f64], n1: usize, n2: usize) -> Vec<f64> {
    let mut t = vec![0.0; n2 * n1 * n2 * n1];
    for z1 in 0..n1 {
        for z2 in 0..n2 {
            t[((z2 * n1 + z1) * n2 + z2) * n1 + z1] = omega[z1 * n2 + z2];
        }
    }
    t
}

// ---------------------------------------------------------------------------
// Conditional-independence helper over named outputs
// ---------------------------------------------------------------------------

/// Test X ⊥ Y | Z on a kernel whose codomain factors follow the model's
/// output leg: reindex to the (X, Y, Z) order and ask the backend.
pub fn ci_holds<B: Backend>(
    bk: &B,
    m: &CausalModel,
    f: &B::Ker,
    x: &BTreeSet<usize>,
    y: &BTreeSet<usize>,
    z: &BTreeSet<usize>,
    tol: f64,
) -> bool {
    let leg = m.diagram().outputs();
    let pos_of = |w: usize| leg.iter().position(|&o| o == w).expect("query wire on leg");
    let mut map: Vec<usize> = Vec::new();
    for &w in x {
        map.push(pos_of(w));
    }
    for &w in y {
        map.push(pos_of(w));
    }
    for &w in z {
        map.push(pos_of(w));
    }
    let g = bk.reindex_codomain(f, &map);
    let xr: Vec<usize> = (0..x.len()).collect();
    let yr: Vec<usize> = (x.len()..x.len() + y.len()).collect();
    let zr: Vec<usize> = (x.len() + y.len()..map.len()).collect();
    bk.ci_kernel(&g, &xr, &yr, &zr, tol)
}
