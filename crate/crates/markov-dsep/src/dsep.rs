//! d-separation, decided two ways.
//!
//! The diagrammatic criterion: marginalize the model over X ∪ Y ∪ Z, cut the
//! Z wires out, and ask whether any X wire is still connected to any Y wire
//! in the underlying undirected incidence graph. [`d_separated_categorical`]
//! decides exactly that without materializing the intermediate diagrams;
//! [`d_separated_by_cutting`] is the literal pipeline and exists so tests can
//! pin the two against each other.
//!
//! The classical criterion applies when the model is the bloom of a DAG —
//! closed, pure bloom, every box a single-output mechanism. [`underlying_dag`]
//! extracts the DAG and [`d_separated_classical`] runs a Bayes-ball style
//! reachability over it. On the shared domain the two criteria agree.

use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::diagram::{RawDiagram, Signature, StringDiagram};
use crate::hypergraph::{BoxDecl, Hypergraph, Name};
use crate::normalize::CausalModel;
use crate::unionfind::UnionFind;

/// A d-separation query: three disjoint sets of output wires.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DSepQuery {
    pub x: BTreeSet<usize>,
    pub y: BTreeSet<usize>,
    pub z: BTreeSet<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("unknown wire \"{0}\"")]
    UnknownWire(Name),
    #[error("wire \"{0}\" appears in more than one of X, Y, Z")]
    Overlap(Name),
    #[error("wire \"{0}\" is not an output of the model")]
    NotAnOutput(Name),
}

impl DSepQuery {
    pub fn new(
        x: impl IntoIterator<Item = usize>,
        y: impl IntoIterator<Item = usize>,
        z: impl IntoIterator<Item = usize>,
    ) -> Self {
        DSepQuery {
            x: x.into_iter().collect(),
            y: y.into_iter().collect(),
            z: z.into_iter().collect(),
        }
    }

    /// Resolve wire names against a diagram.
    pub fn from_names(
        d: &StringDiagram,
        x: impl IntoIterator<Item = impl AsRef<str>>,
        y: impl IntoIterator<Item = impl AsRef<str>>,
        z: impl IntoIterator<Item = impl AsRef<str>>,
    ) -> Result<Self, QueryError> {
        let resolve = |ws: Vec<String>| -> Result<BTreeSet<usize>, QueryError> {
            ws.iter()
                .map(|w| {
                    d.wire_index(w)
                        .ok_or_else(|| QueryError::UnknownWire(crate::hypergraph::name(w)))
                })
                .collect()
        };
        Ok(DSepQuery {
            x: resolve(x.into_iter().map(|s| s.as_ref().to_owned()).collect())?,
            y: resolve(y.into_iter().map(|s| s.as_ref().to_owned()).collect())?,
            z: resolve(z.into_iter().map(|s| s.as_ref().to_owned()).collect())?,
        })
    }

    /// Check disjointness and that every named wire is observed by the model.
    pub fn validate(&self, m: &CausalModel) -> Result<(), QueryError> {
        let d = m.diagram();
        for (&a, b) in [(&self.x, &self.y), (&self.x, &self.z), (&self.y, &self.z)]
            .iter()
            .flat_map(|(a, b)| a.iter().map(move |w| (w, *b)))
        {
            if b.contains(&a) {
                return Err(QueryError::Overlap(d.wire_name(a).clone()));
            }
        }
        let out = m.output_set();
        for &w in self.x.iter().chain(&self.y).chain(&self.z) {
            if !out.contains(&w) {
                return Err(QueryError::NotAnOutput(d.wire_name(w).clone()));
            }
        }
        Ok(())
    }
}

/// Remove a set of wires outright: every port referencing them disappears
/// (box arities drop) and so do their interface occurrences. The result is
/// typed over a fresh signature with one box type per surviving box, since
/// the surgery changes arities.
pub fn cut(d: &StringDiagram, z: &BTreeSet<usize>) -> StringDiagram {
    let ty_name = |w: usize| d.sig().type_name(d.wire_type(w)).clone();

    let mut siggraph = Hypergraph::new();
    for t in 0..d.sig().type_count() {
        siggraph.add_wire(&**d.sig().type_name(t));
    }
    for b in d.boxes() {
        let ins: Vec<Name> =
            b.inputs().iter().filter(|w| !z.contains(w)).map(|&w| ty_name(w)).collect();
        let outs: Vec<Name> =
            b.outputs().iter().filter(|w| !z.contains(w)).map(|&w| ty_name(w)).collect();
        siggraph.add_box(&**b.name(), ins, outs);
    }
    let sig = Arc::new(Signature::new(siggraph).expect("cut signature is valid"));

    let mut raw = RawDiagram::default();
    for (i, w) in d.wires().iter().enumerate() {
        if !z.contains(&i) {
            raw.body.wires.push(w.name().clone());
            raw.typing.wire_map.insert(w.name().clone(), ty_name(i));
        }
    }
    for b in d.boxes() {
        let keep = |ws: &[usize]| -> Vec<Name> {
            ws.iter().filter(|w| !z.contains(w)).map(|&w| d.wire_name(w).clone()).collect()
        };
        raw.body.boxes.push(BoxDecl {
            name: b.name().clone(),
            inputs: keep(b.inputs()),
            outputs: keep(b.outputs()),
        });
        raw.typing.box_map.insert(b.name().clone(), b.name().clone());
    }
    raw.inputs = d
        .inputs()
        .iter()
        .filter(|w| !z.contains(w))
        .map(|&w| d.wire_name(w).clone())
        .collect();
    raw.outputs = d
        .outputs()
        .iter()
        .filter(|w| !z.contains(w))
        .map(|&w| d.wire_name(w).clone())
        .collect();
    StringDiagram::build(sig, raw).expect("cutting preserves validity")
}

/// Connectivity in the undirected incidence graph: wires are nodes, each box
/// links every wire attached to it.
pub fn undirected_reachable(
    d: &StringDiagram,
    from: &BTreeSet<usize>,
    to: &BTreeSet<usize>,
) -> bool {
    if from.intersection(to).next().is_some() {
        return true;
    }
    let mut uf = UnionFind::new(d.wire_count());
    for b in d.boxes() {
        let mut ws = b.inputs().iter().chain(b.outputs().iter());
        if let Some(&first) = ws.next() {
            for &w in ws {
                uf.union(first, w);
            }
        }
    }
    let roots: HashSet<usize> = from.iter().map(|&w| uf.find(w)).collect();
    to.iter().any(|&w| roots.contains(&uf.find(w)))
}

/// Decide d-separation by running the definition literally: marginalize over
/// X ∪ Y ∪ Z, cut Z, test connectivity. Reference implementation.
pub fn d_separated_by_cutting(m: &CausalModel, q: &DSepQuery) -> Result<bool, QueryError> {
    q.validate(m)?;
    if q.x.is_empty() || q.y.is_empty() {
        return Ok(true);
    }
    let w: BTreeSet<usize> = q.x.iter().chain(&q.y).chain(&q.z).copied().collect();
    let marg = m.marginalize(&w).expect("validated query wires are outputs");
    let md = marg.diagram();
    let reindex = |s: &BTreeSet<usize>| -> BTreeSet<usize> {
        s.iter()
            .map(|&i| {
                md.wire_index(m.diagram().wire_name(i))
                    .expect("marginal keeps every queried wire")
            })
            .collect()
    };
    let cutd = cut(md, &reindex(&q.z));
    let x = q
        .x
        .iter()
        .map(|&i| cutd.wire_index(m.diagram().wire_name(i)).expect("X wires survive the cut"))
        .collect();
    let y = q
        .y
        .iter()
        .map(|&i| cutd.wire_index(m.diagram().wire_name(i)).expect("Y wires survive the cut"))
        .collect();
    Ok(!undirected_reachable(&cutd, &x, &y))
}

/// Decide d-separation diagrammatically. Equivalent to
/// [`d_separated_by_cutting`] but runs in one pass over the model: a
/// worklist figures out which boxes survive marginalization over X ∪ Y ∪ Z,
/// then union-find connects box neighborhoods while skipping Z wires.
pub fn d_separated_categorical(m: &CausalModel, q: &DSepQuery) -> Result<bool, QueryError> {
    q.validate(m)?;
    if q.x.is_empty() || q.y.is_empty() {
        return Ok(true);
    }
    let d = m.diagram();
    let nw = d.wire_count();
    let nb = d.box_count();

    let mut in_w = vec![false; nw];
    for &w in q.x.iter().chain(&q.y).chain(&q.z) {
        in_w[w] = true;
    }

    // Which boxes survive marginalizing the output leg down to W: eliminate
    // boxes whose every output is outside W and unconsumed, to a fixpoint.
    let mut alive = vec![true; nb];
    let mut cons: Vec<usize> = (0..nw).map(|w| d.consumers(w).len()).collect();
    let mut queued = vec![true; nb];
    let mut stack: Vec<usize> = (0..nb).collect();
    while let Some(b) = stack.pop() {
        queued[b] = false;
        if !alive[b] {
            continue;
        }
        let bx = d.box_info(b);
        if !bx.outputs().iter().all(|&w| cons[w] == 0 && !in_w[w]) {
            continue;
        }
        alive[b] = false;
        for &u in bx.inputs() {
            cons[u] -= 1;
        }
        for u in bx.in_set() {
            if cons[u] == 0 && !in_w[u] {
                if let Some((p, _)) = d.producer(u) {
                    if alive[p] && !queued[p] {
                        queued[p] = true;
                        stack.push(p);
                    }
                }
            }
        }
    }

    // Connectivity over non-Z wires through surviving boxes.
    let mut uf = UnionFind::new(nw);
    for (bi, b) in d.boxes().iter().enumerate() {
        if !alive[bi] {
            continue;
        }
        let mut prev: Option<usize> = None;
        for &w in b.inputs().iter().chain(b.outputs().iter()) {
            if q.z.contains(&w) {
                continue;
            }
            if let Some(p) = prev {
                uf.union(p, w);
            }
            prev = Some(w);
        }
    }
    let roots: HashSet<usize> = q.x.iter().map(|&w| uf.find(w)).collect();
    Ok(!q.y.iter().any(|&w| roots.contains(&uf.find(w))))
}

/// Errors that make the classical criterion inapplicable.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ClassicalError {
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("classical criterion needs a closed model, but the model has global inputs")]
    HasInputs,
    #[error("classical criterion needs a pure bloom, but wire \"{0}\" is not observed")]
    NotPureBloom(Name),
    #[error("classical criterion needs single-output mechanisms, but box \"{0}\" has {1} outputs")]
    NotSingleOutput(Name, usize),
    #[error("classical criterion needs every wire produced, but \"{0}\" has no producing box")]
    UnproducedWire(Name),
}

/// A DAG extracted from a bloom-of-a-DAG model. Node indices coincide with
/// the model's wire indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dag {
    pub names: Vec<Name>,
    pub parents: Vec<Vec<usize>>,
    pub children: Vec<Vec<usize>>,
}

/// Recover the DAG a model is the bloom of: one node per wire, with an edge
/// u → v whenever the mechanism producing v reads u. Applicable only to
/// closed pure blooms whose boxes each produce exactly one wire.
pub fn underlying_dag(m: &CausalModel) -> Result<Dag, ClassicalError> {
    let d = m.diagram();
    if !d.inputs().is_empty() {
        return Err(ClassicalError::HasInputs);
    }
    if !m.is_pure_bloom() {
        let observed = m.output_set();
        let w = (0..d.wire_count()).find(|w| !observed.contains(w)).unwrap();
        return Err(ClassicalError::NotPureBloom(d.wire_name(w).clone()));
    }
    for b in d.boxes() {
        if b.outputs().len() != 1 {
            return Err(ClassicalError::NotSingleOutput(b.name().clone(), b.outputs().len()));
        }
    }
    let n = d.wire_count();
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut children = vec![Vec::new(); n];
    for (v, pv) in parents.iter_mut().enumerate() {
        match d.producer(v) {
            None => return Err(ClassicalError::UnproducedWire(d.wire_name(v).clone())),
            Some((b, _)) => {
                for u in d.box_info(b).in_set() {
                    pv.push(u);
                    children[u].push(v);
                }
            }
        }
    }
    for c in children.iter_mut() {
        c.sort_unstable();
        c.dedup();
    }
    Ok(Dag { names: d.wires().iter().map(|w| w.name().clone()).collect(), parents, children })
}

/// Classical d-separation on the underlying DAG, by ball-passing
/// reachability: a state is a node plus the direction the ball arrived from
/// (`up` = from a child, `down` = from a parent). From (v, up) with v ∉ Z
/// the ball continues to parents (up) and children (down); from (v, down) it
/// bounces to parents (up) when v is an ancestor of Z — the open-collider
/// rule — and continues to children (down) when v ∉ Z. X and Y are
/// d-connected iff some Y node is ever reached.
pub fn d_separated_classical(m: &CausalModel, q: &DSepQuery) -> Result<bool, ClassicalError> {
    q.validate(m)?;
    let dag = underlying_dag(m)?;
    if q.x.is_empty() || q.y.is_empty() {
        return Ok(true);
    }
    let n = dag.names.len();
    let mut in_z = vec![false; n];
    for &w in &q.z {
        in_z[w] = true;
    }
    // Reflexive ancestors of Z.
    let mut an_z = in_z.clone();
    let mut frontier: Vec<usize> = q.z.iter().copied().collect();
    while let Some(v) = frontier.pop() {
        for &p in &dag.parents[v] {
            if !an_z[p] {
                an_z[p] = true;
                frontier.push(p);
            }
        }
    }

    const UP: usize = 0;
    const DOWN: usize = 1;
    let mut visited = vec![[false; 2]; n];
    let mut stack: Vec<(usize, usize)> = Vec::new();
    let mut connected = false;
    let push = |stack: &mut Vec<(usize, usize)>,
                    visited: &mut Vec<[bool; 2]>,
                    connected: &mut bool,
                    v: usize,
                    dir: usize| {
        if !visited[v][dir] {
            visited[v][dir] = true;
            if q.y.contains(&v) {
                *connected = true;
            }
            stack.push((v, dir));
        }
    };
    for &x in &q.x {
        push(&mut stack, &mut visited, &mut connected, x, UP);
    }
    while let Some((v, dir)) = stack.pop() {
        if connected {
            break;
        }
        match dir {
            UP => {
                if !in_z[v] {
                    for &p in &dag.parents[v] {
                        push(&mut stack, &mut visited, &mut connected, p, UP);
                    }
                    for &c in &dag.children[v] {
                        push(&mut stack, &mut visited, &mut connected, c, DOWN);
                    }
                }
            }
            _ => {
                if an_z[v] {
                    for &p in &dag.parents[v] {
                        push(&mut stack, &mut visited, &mut connected, p, UP);
                    }
                }
                if !in_z[v] {
                    for &c in &dag.children[v] {
                        push(&mut stack, &mut visited, &mut connected, c, DOWN);
                    }
                }
            }
        }
    }
    Ok(!connected)
}

/// Exhaustive enumeration is feasible up to this many observed wires
/// (4^10 ≈ 10⁶ assignments); larger models get sampled.
pub const EXHAUSTIVE_TRIPLE_LIMIT: usize = 10;

/// Default number of sampled triples beyond the exhaustive limit.
pub const DEFAULT_TRIPLE_BUDGET: usize = 10_000;

/// The triples produced by [`enumerate_dsep_triples`], each tagged with its
/// d-separation verdict.
#[derive(Clone, Debug)]
pub struct TripleList {
    pub items: Vec<(DSepQuery, bool)>,
    pub exhaustive: bool,
}

/// Enumerate disjoint triples (X, Y, Z) of observed wires with X and Y
/// nonempty and every global input placed in Y ∪ Z, tagging each with its
/// categorical d-separation verdict. Exhaustive for small interfaces,
/// seeded sampling (deduplicated) beyond [`EXHAUSTIVE_TRIPLE_LIMIT`].
pub fn enumerate_dsep_triples(m: &CausalModel, seed: u64, budget: usize) -> TripleList {
    let outs: Vec<usize> = m.diagram().outputs().to_vec();
    let k = outs.len();
    let input_set = m.input_set();
    let mut items = Vec::new();

    let consider = |digits: &[u8], items: &mut Vec<(DSepQuery, bool)>| {
        let mut q = DSepQuery::new([], [], []);
        for (i, &dg) in digits.iter().enumerate() {
            match dg {
                1 => {
                    q.x.insert(outs[i]);
                }
                2 => {
                    q.y.insert(outs[i]);
                }
                3 => {
                    q.z.insert(outs[i]);
                }
                _ => {}
            }
        }
        if q.x.is_empty() || q.y.is_empty() {
            return;
        }
        if !input_set.iter().all(|w| q.y.contains(w) || q.z.contains(w)) {
            return;
        }
        let sep = d_separated_categorical(m, &q).expect("enumerated triples are valid");
        items.push((q, sep));
    };

    let exhaustive = k <= EXHAUSTIVE_TRIPLE_LIMIT;
    if exhaustive {
        let mut digits = vec![0u8; k];
        loop {
            consider(&digits, &mut items);
            let mut pos = 0;
            loop {
                if pos == k {
                    return TripleList { items, exhaustive };
                }
                if digits[pos] < 3 {
                    digits[pos] += 1;
                    break;
                }
                digits[pos] = 0;
                pos += 1;
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: HashSet<Vec<u8>> = HashSet::new();
    for _ in 0..budget {
        let digits: Vec<u8> = (0..k).map(|_| rng.gen_range(0..4u8)).collect();
        if seen.insert(digits.clone()) {
            consider(&digits, &mut items);
        }
    }
    TripleList { items, exhaustive }
}
