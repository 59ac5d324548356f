//! Interpretations, evaluation, and the Markov-property checks.
//!
//! An [`Interpretation`] assigns a backend object to every wire type and a
//! kernel to every box type; [`evaluate`] then pushes kernels through a
//! diagram in topological order, producing one kernel from the input leg to
//! the output leg. Copying and discarding need no explicit generators: a
//! wire consumed twice is copied, a wire that is never used again is
//! marginalized out.
//!
//! Going the other way, [`check_local_markov`] and [`check_global_markov`]
//! test whether a *given* kernel over a model's output leg satisfies the
//! conditional independences that d-separation predicts, and
//! [`decide_compatibility`] decides whether the kernel could have been
//! produced by *some* interpretation of the model — by disintegrating the
//! kernel box by box when the model supports it, and by hunting for a
//! violated independence when it does not.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::backend::Backend;
use crate::diagram::StringDiagram;
use crate::dsep::{d_separated_categorical, enumerate_dsep_triples, DSepQuery, DEFAULT_TRIPLE_BUDGET};
use crate::hypergraph::Name;
use crate::normalize::CausalModel;

/// Tolerance used for kernel equality and conditional-independence checks
/// unless the caller overrides it.
pub const EQUALITY_TOL: f64 = 1e-9;

/// Assignment of semantics: one object per wire type, one kernel per box
/// type.
#[derive(Clone, Debug)]
pub struct Interpretation<B: Backend> {
    pub backend: B,
    pub objects: BTreeMap<Name, B::Obj>,
    pub kernels: BTreeMap<Name, B::Ker>,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum EvalError {
    #[error("no object assigned to wire type \"{0}\"")]
    MissingObject(Name),
    #[error("no kernel assigned to box type \"{0}\"")]
    MissingKernel(Name),
    #[error("object for wire type \"{0}\" must be a single factor")]
    NotSingleFactor(Name),
    #[error("kernel for box type \"{0}\" does not match the declared input types")]
    DomMismatch(Name),
    #[error("kernel for box type \"{0}\" does not match the declared output types")]
    CodMismatch(Name),
    #[error("wire \"{0}\" is used but never produced and is not an input")]
    Unproduced(Name),
}

impl<B: Backend> Interpretation<B> {
    pub fn new(backend: B) -> Self {
        Interpretation { backend, objects: BTreeMap::new(), kernels: BTreeMap::new() }
    }

    pub fn object(mut self, ty: impl AsRef<str>, o: B::Obj) -> Self {
        self.objects.insert(crate::hypergraph::name(ty.as_ref()), o);
        self
    }

    pub fn kernel(mut self, ty: impl AsRef<str>, k: B::Ker) -> Self {
        self.kernels.insert(crate::hypergraph::name(ty.as_ref()), k);
        self
    }

    fn wire_obj(&self, d: &StringDiagram, w: usize) -> Result<&B::Obj, EvalError> {
        let ty = d.sig().type_name(d.wires()[w].ty());
        let o = self.objects.get(ty).ok_or_else(|| EvalError::MissingObject(ty.clone()))?;
        if self.backend.factor_count(o) != 1 {
            return Err(EvalError::NotSingleFactor(ty.clone()));
        }
        Ok(o)
    }

    fn leg_obj(&self, d: &StringDiagram, leg: &[usize]) -> Result<B::Obj, EvalError> {
        let mut acc = self.backend.unit_obj();
        for &w in leg {
            acc = self.backend.tensor_objs(&acc, self.wire_obj(d, w)?);
        }
        Ok(acc)
    }

    /// Check that the interpretation covers a diagram and respects its
    /// signature's arities.
    pub fn validate(&self, d: &StringDiagram) -> Result<(), EvalError> {
        for w in 0..d.wires().len() {
            self.wire_obj(d, w)?;
        }
        let sig = d.sig();
        let mut seen = std::collections::BTreeSet::new();
        for bx in d.boxes() {
            if !seen.insert(bx.ty()) {
                continue;
            }
            let bt = sig.box_type(bx.ty());
            let k = self
                .kernels
                .get(&bt.name)
                .ok_or_else(|| EvalError::MissingKernel(bt.name.clone()))?;
            let want_dom = self.type_leg_obj(sig, sig.box_input_types(bx.ty()))?;
            let want_cod = self.type_leg_obj(sig, sig.box_output_types(bx.ty()))?;
            if self.backend.dom(k) != want_dom {
                return Err(EvalError::DomMismatch(bt.name.clone()));
            }
            if self.backend.cod(k) != want_cod {
                return Err(EvalError::CodMismatch(bt.name.clone()));
            }
        }
        Ok(())
    }

    fn type_leg_obj(
        &self,
        sig: &crate::diagram::Signature,
        tys: &[usize],
    ) -> Result<B::Obj, EvalError> {
        let mut acc = self.backend.unit_obj();
        for &t in tys {
            let name = sig.type_name(t);
            let o = self
                .objects
                .get(name)
                .ok_or_else(|| EvalError::MissingObject(name.clone()))?;
            if self.backend.factor_count(o) != 1 {
                return Err(EvalError::NotSingleFactor(name.clone()));
            }
            acc = self.backend.tensor_objs(&acc, o);
        }
        Ok(acc)
    }
}

/// Evaluate a diagram to a single kernel from its input leg to its output
/// leg.
///
/// Boxes are swept in topological order. A frontier of live wires is kept
/// as the codomain of the running kernel; when a box fires, one reindexing
/// brings its input ports to the front (copying wires that are consumed
/// several times or still needed later, and dropping wires whose last use
/// has passed), and the box's kernel is applied to that prefix.
pub fn evaluate<B: Backend>(
    d: &StringDiagram,
    interp: &Interpretation<B>,
) -> Result<B::Ker, EvalError> {
    interp.validate(d)?;
    let bk = &interp.backend;
    let nw = d.wires().len();

    let mut uses = vec![0usize; nw];
    for bx in d.boxes() {
        for &w in bx.inputs() {
            uses[w] += 1;
        }
    }
    for &w in d.outputs() {
        uses[w] += 1;
    }

    let mut frontier: Vec<usize> = d.inputs().to_vec();
    let mut cur = bk.identity(&interp.leg_obj(d, d.inputs())?);

    for bi in d.topo_boxes() {
        let bx = &d.boxes()[bi];
        let slot: HashMap<usize, usize> =
            frontier.iter().enumerate().map(|(i, &w)| (w, i)).collect();
        for &w in bx.inputs() {
            if !slot.contains_key(&w) {
                return Err(EvalError::Unproduced(d.wires()[w].name().clone()));
            }
        }
        for &w in bx.inputs() {
            uses[w] -= 1;
        }
        let kept: Vec<usize> =
            frontier.iter().copied().filter(|&w| uses[w] > 0).collect();
        let mut map: Vec<usize> = bx.inputs().iter().map(|&w| slot[&w]).collect();
        map.extend(kept.iter().map(|w| slot[w]));
        cur = bk.reindex_codomain(&cur, &map);
        let bt = &d.sig().box_type(bx.ty()).name;
        let k = &interp.kernels[bt];
        cur = bk.apply_prefix(&cur, k);
        let mut next = bx.outputs().to_vec();
        next.extend(kept);
        frontier = next;
    }

    let slot: HashMap<usize, usize> =
        frontier.iter().enumerate().map(|(i, &w)| (w, i)).collect();
    let mut map = Vec::with_capacity(d.outputs().len());
    for &w in d.outputs() {
        match slot.get(&w) {
            Some(&i) => map.push(i),
            None => return Err(EvalError::Unproduced(d.wires()[w].name().clone())),
        }
    }
    Ok(bk.reindex_codomain(&cur, &map))
}

/// Options shared by the Markov-property checks.
#[derive(Clone, Copy, Debug)]
pub struct MarkovOptions {
    /// Numerical tolerance for independence and equality tests.
    pub tol: f64,
    /// Seed for triple sampling on large output legs.
    pub seed: u64,
    /// How many sampled triples to try when exhaustive enumeration is off.
    pub budget: usize,
}

impl Default for MarkovOptions {
    fn default() -> Self {
        MarkovOptions { tol: EQUALITY_TOL, seed: 0, budget: DEFAULT_TRIPLE_BUDGET }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum CompatError {
    #[error("kernel does not match the model: {0}")]
    Shape(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// A conditional independence that was predicted but not observed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CiFailure {
    /// The box whose local statement failed, if the failure came from the
    /// local check.
    pub box_name: Option<Name>,
    pub x: Vec<Name>,
    pub y: Vec<Name>,
    pub z: Vec<Name>,
}

impl std::fmt::Display for CiFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let list = |v: &[Name]| {
            if v.is_empty() {
                "∅".to_string()
            } else {
                v.iter().map(|n| n.as_ref()).collect::<Vec<_>>().join(", ")
            }
        };
        write!(f, "{{{}}} ⊥ {{{}}} | {{{}}}", list(&self.x), list(&self.y), list(&self.z))?;
        if let Some(b) = &self.box_name {
            write!(f, " (local statement of box \"{b}\")")?;
        }
        Ok(())
    }
}

fn ci_failure(d: &StringDiagram, q: &DSepQuery, box_name: Option<Name>) -> CiFailure {
    let names = |s: &std::collections::BTreeSet<usize>| {
        s.iter().map(|&w| d.wires()[w].name().clone()).collect()
    };
    CiFailure { box_name, x: names(&q.x), y: names(&q.y), z: names(&q.z) }
}

/// Positions of the model's output wires within its output leg.
fn leg_positions(d: &StringDiagram) -> HashMap<usize, usize> {
    d.outputs().iter().enumerate().map(|(i, &w)| (w, i)).collect()
}

/// Test one conditional independence of a kernel over the output leg.
fn ci_on<B: Backend>(
    bk: &B,
    f: &B::Ker,
    pos: &HashMap<usize, usize>,
    q: &DSepQuery,
    tol: f64,
) -> bool {
    let xp: Vec<usize> = q.x.iter().map(|w| pos[w]).collect();
    let yp: Vec<usize> = q.y.iter().map(|w| pos[w]).collect();
    let zp: Vec<usize> = q.z.iter().map(|w| pos[w]).collect();
    let mut map = xp.clone();
    map.extend(&yp);
    map.extend(&zp);
    let g = bk.reindex_codomain(f, &map);
    let xs: Vec<usize> = (0..xp.len()).collect();
    let ys: Vec<usize> = (xp.len()..xp.len() + yp.len()).collect();
    let zs: Vec<usize> = (xp.len() + yp.len()..map.len()).collect();
    bk.ci_kernel(&g, &xs, &ys, &zs, tol)
}

fn check_shape<B: Backend>(bk: &B, m: &CausalModel, f: &B::Ker) -> Result<(), CompatError> {
    let want = m.diagram().outputs().len();
    let got = bk.factor_count(&bk.cod(f));
    if got != want {
        return Err(CompatError::Shape(format!(
            "kernel codomain has {got} factors but the model observes {want} wires"
        )));
    }
    Ok(())
}

/// Result of sweeping d-separated triples against a kernel.
#[derive(Clone, Debug)]
pub struct GlobalReport {
    pub holds: bool,
    /// Whether every admissible triple was enumerated (small output legs)
    /// or only a sampled subset.
    pub exhaustive: bool,
    /// Number of d-separated triples whose independence was tested.
    pub separated: usize,
    pub failures: Vec<CiFailure>,
}

/// Check the global Markov property: every d-separation the model exhibits
/// must show up as a conditional independence of the kernel.
pub fn check_global_markov<B: Backend>(
    bk: &B,
    m: &CausalModel,
    f: &B::Ker,
    opts: &MarkovOptions,
) -> Result<GlobalReport, CompatError> {
    check_shape(bk, m, f)?;
    let d = m.diagram();
    let pos = leg_positions(d);
    let triples = enumerate_dsep_triples(m, opts.seed, opts.budget);
    let mut failures = Vec::new();
    let mut separated = 0;
    for (q, sep) in &triples.items {
        if !sep {
            continue;
        }
        separated += 1;
        if !ci_on(bk, f, &pos, q, opts.tol) {
            failures.push(ci_failure(d, q, None));
        }
    }
    Ok(GlobalReport {
        holds: failures.is_empty(),
        exhaustive: triples.exhaustive,
        separated,
        failures,
    })
}

/// One box's local Markov statement.
#[derive(Clone, Debug)]
pub struct LocalCheck {
    pub box_name: Name,
    pub query: DSepQuery,
    pub holds: bool,
}

#[derive(Clone, Debug)]
pub struct LocalReport {
    pub holds: bool,
    pub checks: Vec<LocalCheck>,
    /// Boxes whose statement could not be formed because some parent or
    /// output wire is not observed.
    pub skipped: Vec<Name>,
}

/// Check the local Markov property: each box's outputs are independent of
/// its non-descendants given its direct inputs.
pub fn check_local_markov<B: Backend>(
    bk: &B,
    m: &CausalModel,
    f: &B::Ker,
    opts: &MarkovOptions,
) -> Result<LocalReport, CompatError> {
    check_shape(bk, m, f)?;
    let d = m.diagram();
    let pos = leg_positions(d);
    let leg = m.output_set();
    let mut checks = Vec::new();
    let mut skipped = Vec::new();
    for bx in d.boxes() {
        let x: Vec<usize> =
            bx.out_set().into_iter().filter(|w| leg.contains(w)).collect();
        if x.is_empty() {
            continue;
        }
        let z = bx.in_set();
        if x.len() < bx.out_set().len() || !z.iter().all(|w| leg.contains(w)) {
            skipped.push(bx.name().clone());
            continue;
        }
        let dec = m.descendants(bx.outputs().iter().copied());
        let y: Vec<usize> = leg
            .iter()
            .copied()
            .filter(|w| !dec.contains(w) && !z.contains(w))
            .collect();
        if y.is_empty() {
            continue;
        }
        let q = DSepQuery::new(x, y, z);
        let holds = ci_on(bk, f, &pos, &q, opts.tol);
        checks.push(LocalCheck { box_name: bx.name().clone(), query: q, holds });
    }
    Ok(LocalReport {
        holds: checks.iter().all(|c| c.holds),
        checks,
        skipped,
    })
}

/// Outcome of a compatibility decision.
#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    /// An interpretation reproducing the kernel was constructed.
    Compatible,
    /// A d-separated triple violates conditional independence, so no
    /// interpretation can exist.
    Incompatible(CiFailure),
    /// Neither a reconstruction nor a refutation was found.
    Unknown(String),
}

/// The decision together with the reconstructed interpretation when one
/// was found.
#[derive(Clone, Debug)]
pub struct CompatReport<B: Backend> {
    pub verdict: Verdict,
    pub reconstruction: Option<Interpretation<B>>,
}

/// Read off one object per wire type from the factors of a kernel over the
/// output leg.
fn objects_from_factors<B: Backend>(
    bk: &B,
    m: &CausalModel,
    f: &B::Ker,
) -> Result<BTreeMap<Name, B::Obj>, CompatError> {
    let d = m.diagram();
    let cod = bk.cod(f);
    let mut map: BTreeMap<Name, B::Obj> = BTreeMap::new();
    for (i, &w) in d.outputs().iter().enumerate() {
        let ty = d.sig().type_name(d.wires()[w].ty()).clone();
        let obj = bk.factor(&cod, i);
        match map.get(&ty) {
            Some(o) if *o == obj => {}
            Some(_) => {
                return Err(CompatError::Shape(format!(
                    "wires of type \"{ty}\" carry different kernel factors"
                )))
            }
            None => {
                map.insert(ty, obj);
            }
        }
    }
    Ok(map)
}

/// Peel final boxes off a pure-bloom model, disintegrating the kernel as
/// we go; returns one kernel per box type.
fn reconstruct<B: Backend>(
    bk: &B,
    m: &CausalModel,
    f: &B::Ker,
    tol: f64,
) -> Result<BTreeMap<Name, B::Ker>, String> {
    let mut cur_m = m.clone();
    let mut cur_f = f.clone();
    let mut kernels = BTreeMap::new();
    while !cur_m.diagram().boxes().is_empty() {
        let d = cur_m.diagram();
        let bi = cur_m
            .final_boxes()
            .into_iter()
            .min_by(|&a, &b| d.boxes()[a].name().cmp(d.boxes()[b].name()))
            .expect("acyclic diagram with boxes has a final box");
        let bx = d.boxes()[bi].clone();
        let pos = leg_positions(d);
        let cod = bk.cod(&cur_f);

        let x: Vec<usize> = bx.outputs().iter().map(|w| pos[w]).collect();
        let zw = bx.in_set();
        let z: Vec<usize> = zw.iter().map(|w| pos[w]).collect();
        let in_xz: std::collections::BTreeSet<usize> =
            x.iter().chain(&z).copied().collect();
        let y: Vec<usize> = (0..d.outputs().len()).filter(|i| !in_xz.contains(i)).collect();

        let k = bk.ci_kernel_witness(&cur_f, &x, &y, &z, tol).ok_or_else(|| {
            format!(
                "no mediator through the inputs of box \"{}\" within tolerance",
                bx.name()
            )
        })?;

        // The witness reads the box's distinct input wires in ascending
        // order; precompose a selection so the kernel reads the ports as
        // declared, including repeats.
        let mut port_obj = bk.unit_obj();
        for &w in bx.inputs() {
            let o = bk.factor(&cod, pos[&w]);
            port_obj = bk.tensor_objs(&port_obj, &o);
        }
        let sel: Vec<usize> = zw
            .iter()
            .map(|&w| bx.inputs().iter().position(|&p| p == w).expect("port present"))
            .collect();
        let dsel = bk.reindex_codomain(&bk.identity(&port_obj), &sel);
        let h = bk.compose(&dsel, &k);
        let ty_name = d.sig().box_type(bx.ty()).name.clone();
        kernels.insert(ty_name, h);

        let keep: std::collections::BTreeSet<usize> = cur_m
            .output_set()
            .into_iter()
            .filter(|w| !bx.outputs().contains(w))
            .collect();
        let newmap: Vec<usize> = d
            .outputs()
            .iter()
            .enumerate()
            .filter(|(_, w)| keep.contains(w))
            .map(|(i, _)| i)
            .collect();
        cur_m = cur_m
            .marginalize(&keep)
            .map_err(|e| format!("marginalizing past \"{}\": {e}", bx.name()))?;
        cur_f = bk.reindex_codomain(&cur_f, &newmap);
    }
    Ok(kernels)
}

/// Decide whether a kernel over the model's output leg is compatible with
/// the model, i.e. whether some interpretation of its boxes evaluates to
/// exactly this kernel.
///
/// Models whose every wire is observed and whose box types are pairwise
/// distinct are decided by reconstruction; any other model gets a
/// soundness sweep over d-separated triples, which can refute
/// compatibility but not certify it.
pub fn decide_compatibility<B: Backend + Clone>(
    bk: &B,
    m: &CausalModel,
    f: &B::Ker,
    opts: &MarkovOptions,
) -> Result<CompatReport<B>, CompatError> {
    check_shape(bk, m, f)?;
    let d = m.diagram();

    let mut ty_counts: HashMap<usize, usize> = HashMap::new();
    for bx in d.boxes() {
        *ty_counts.entry(bx.ty()).or_insert(0) += 1;
    }
    let distinct = ty_counts.values().all(|&c| c == 1);

    if !m.is_pure_bloom() || !distinct {
        let report = check_global_markov(bk, m, f, opts)?;
        if let Some(fail) = report.failures.into_iter().next() {
            return Ok(CompatReport { verdict: Verdict::Incompatible(fail), reconstruction: None });
        }
        let why = if m.is_pure_bloom() {
            "several boxes share a type"
        } else {
            "some wires are latent"
        };
        return Ok(CompatReport {
            verdict: Verdict::Unknown(format!(
                "reconstruction unavailable ({why}); no independence violations found among {} d-separated triples{}",
                report.separated,
                if report.exhaustive { "" } else { " (sampled)" }
            )),
            reconstruction: None,
        });
    }

    let local = check_local_markov(bk, m, f, opts)?;
    for c in &local.checks {
        if !c.holds && d_separated_categorical(m, &c.query) == Ok(true) {
            return Ok(CompatReport {
                verdict: Verdict::Incompatible(ci_failure(d, &c.query, Some(c.box_name.clone()))),
                reconstruction: None,
            });
        }
    }
    if !local.holds {
        return Ok(CompatReport {
            verdict: Verdict::Unknown(
                "a local independence failed but could not be confirmed d-separated".into(),
            ),
            reconstruction: None,
        });
    }

    let objects = objects_from_factors(bk, m, f)?;
    match reconstruct(bk, m, f, opts.tol) {
        Ok(kernels) => {
            let interp = Interpretation { backend: bk.clone(), objects, kernels };
            let f_rec = evaluate(d, &interp)?;
            if bk.equal_within(&f_rec, f, opts.tol) {
                Ok(CompatReport { verdict: Verdict::Compatible, reconstruction: Some(interp) })
            } else {
                Ok(CompatReport {
                    verdict: Verdict::Unknown(
                        "reconstructed kernels do not reproduce the joint within tolerance".into(),
                    ),
                    reconstruction: None,
                })
            }
        }
        Err(msg) => Ok(CompatReport { verdict: Verdict::Unknown(msg), reconstruction: None }),
    }
}
