//! The on-disk JSON format, `"markov-dsep/1"`.
//!
//! A model file carries a signature, a diagram over it, and optionally an
//! interpretation (finite-stochastic or Gaussian). A kernel file carries a
//! single concrete kernel, used as the candidate joint for compatibility
//! checking.
//!
//! Serialization is canonical: signature types, signature boxes, diagram
//! wires, and diagram boxes are sorted by name, map keys are sorted, and
//! interface legs and port lists keep their declared order (those orders
//! are meaningful). Loading a file and saving it again is idempotent from
//! the first save onward.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::backend::Backend;
use crate::diagram::{DiagramBuilder, Signature, StringDiagram};
use crate::finstoch::{FinFactor, FinObject, FinStoch, StochKernel};
use crate::gauss::{Gauss, GaussKernel, GaussObject};
use crate::hypergraph::Hypergraph;
use crate::markov::Interpretation;

pub const FORMAT: &str = "markov-dsep/1";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub signature: SigSpec,
    pub diagram: DiagSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interpretation: Option<InterpSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SigSpec {
    pub types: Vec<String>,
    pub boxes: Vec<BoxTypeSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoxTypeSpec {
    pub name: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiagSpec {
    pub wires: Vec<WireSpec>,
    pub boxes: Vec<BoxSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WireSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoxSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "lowercase")]
pub enum InterpSpec {
    Finstoch {
        /// Labels of each wire type's finite set.
        objects: BTreeMap<String, Vec<String>>,
        /// Row-major conditional probability tables, one per box type; the
        /// last codomain factor varies fastest.
        kernels: BTreeMap<String, Vec<f64>>,
    },
    Gauss {
        /// Dimension of each wire type.
        objects: BTreeMap<String, usize>,
        kernels: BTreeMap<String, GaussKernelSpec>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GaussKernelSpec {
    /// Linear map, one row per codomain coordinate.
    pub a: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelFile {
    pub format: String,
    pub kernel: KernelSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "lowercase")]
pub enum KernelSpec {
    Finstoch {
        dom: Vec<FactorSpec>,
        cod: Vec<FactorSpec>,
        table: Vec<f64>,
    },
    Gauss {
        dom: Vec<usize>,
        cod: Vec<usize>,
        a: Vec<Vec<f64>>,
        offset: Vec<f64>,
        cov: Vec<Vec<f64>>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FactorSpec {
    pub name: String,
    pub labels: Vec<String>,
}

/// Why a file could not be loaded. Parse-level problems and content-level
/// problems exit differently in the command-line tool.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LoadError {
    /// The file is not syntactically well-formed JSON for the schema.
    Parse(String),
    /// The format tag is missing or names an unsupported version.
    Format(String),
    /// The file parsed but describes an invalid object.
    Invalid(String),
}

impl std::fmt::Display for LoadError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LoadError::Parse(m) => write!(f, "parse error: {m}"),
            LoadError::Format(m) => write!(f, "format error: {m}"),
            LoadError::Invalid(m) => write!(f, "invalid content: {m}"),
        }
    }
}

impl std::error::Error for LoadError {}

impl LoadError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LoadError::Parse(_) | LoadError::Format(_) => 3,
            LoadError::Invalid(_) => 1,
        }
    }
}

fn check_format(found: &str) -> Result<(), LoadError> {
    if found == FORMAT {
        Ok(())
    } else {
        Err(LoadError::Format(format!(
            "expected format \"{FORMAT}\", found \"{found}\""
        )))
    }
}

/// A loaded interpretation, tagged by backend.
#[derive(Clone, Debug)]
pub enum AnyInterp {
    Fin(Interpretation<FinStoch>),
    Gauss(Interpretation<Gauss>),
}

/// A loaded concrete kernel, tagged by backend.
#[derive(Clone, Debug)]
pub enum AnyKernel {
    Fin(StochKernel),
    Gauss(GaussKernel),
}

/// A fully loaded model file.
#[derive(Clone, Debug)]
pub struct LoadedModel {
    pub diagram: StringDiagram,
    pub interpretation: Option<AnyInterp>,
}

pub fn parse_model(json: &str) -> Result<LoadedModel, LoadError> {
    let file: ModelFile =
        serde_json::from_str(json).map_err(|e| LoadError::Parse(e.to_string()))?;
    check_format(&file.format)?;
    load_model(&file)
}

pub fn load_model(file: &ModelFile) -> Result<LoadedModel, LoadError> {
    let mut g = Hypergraph::new();
    for t in &file.signature.types {
        g.add_wire(t);
    }
    for b in &file.signature.boxes {
        g.add_box(&b.name, b.inputs.iter(), b.outputs.iter());
    }
    let sig = Signature::new(g).map_err(|vs| {
        LoadError::Invalid(
            vs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "),
        )
    })?;
    let sig = Arc::new(sig);

    let mut builder = DiagramBuilder::new(&sig);
    for w in &file.diagram.wires {
        builder = builder.wire(&w.name, &w.ty);
    }
    for b in &file.diagram.boxes {
        builder = builder.box_(&b.name, &b.ty, b.inputs.iter(), b.outputs.iter());
    }
    builder = builder.inputs(file.diagram.inputs.iter());
    builder = builder.outputs(file.diagram.outputs.iter());
    let diagram = builder.build().map_err(|vs| {
        LoadError::Invalid(
            vs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "),
        )
    })?;

    let interpretation = match &file.interpretation {
        None => None,
        Some(spec) => Some(load_interp(spec, &sig)?),
    };
    Ok(LoadedModel { diagram, interpretation })
}

fn load_interp(spec: &InterpSpec, sig: &Arc<Signature>) -> Result<AnyInterp, LoadError> {
    match spec {
        InterpSpec::Finstoch { objects, kernels } => {
            let mut interp = Interpretation::new(FinStoch);
            for (ty, labels) in objects {
                if labels.is_empty() {
                    return Err(LoadError::Invalid(format!(
                        "type \"{ty}\" has no labels"
                    )));
                }
                interp.objects.insert(
                    crate::hypergraph::name(ty),
                    FinObject::of([FinFactor::new(ty, labels.iter())]),
                );
            }
            for (bt, table) in kernels {
                let (dom, cod) = box_type_objects(&interp, sig, bt)?;
                let k = StochKernel::new(dom, cod, table.clone()).map_err(|e| {
                    LoadError::Invalid(format!("kernel for box type \"{bt}\": {e}"))
                })?;
                interp.kernels.insert(crate::hypergraph::name(bt), k);
            }
            Ok(AnyInterp::Fin(interp))
        }
        InterpSpec::Gauss { objects, kernels } => {
            let mut interp = Interpretation::new(Gauss);
            for (ty, &dim) in objects {
                interp
                    .objects
                    .insert(crate::hypergraph::name(ty), GaussObject::of([dim]));
            }
            for (bt, ks) in kernels {
                let (dom, cod) = box_type_objects(&interp, sig, bt)?;
                let a = matrix_from_rows(&ks.a, cod.dim(), dom.dim())
                    .map_err(|m| LoadError::Invalid(format!("kernel \"{bt}\": {m}")))?;
                let cov = matrix_from_rows(&ks.cov, cod.dim(), cod.dim())
                    .map_err(|m| LoadError::Invalid(format!("kernel \"{bt}\": {m}")))?;
                if ks.offset.len() != cod.dim() {
                    return Err(LoadError::Invalid(format!(
                        "kernel \"{bt}\": offset has {} entries, expected {}",
                        ks.offset.len(),
                        cod.dim()
                    )));
                }
                let b = DVector::from_row_slice(&ks.offset);
                let k = GaussKernel::new(dom, cod, a, b, cov).map_err(|e| {
                    LoadError::Invalid(format!("kernel for box type \"{bt}\": {e}"))
                })?;
                interp.kernels.insert(crate::hypergraph::name(bt), k);
            }
            Ok(AnyInterp::Gauss(interp))
        }
    }
}

/// Domain and codomain objects of a box type, from the interpretation's
/// object assignment.
fn box_type_objects<B: Backend>(
    interp: &Interpretation<B>,
    sig: &Arc<Signature>,
    bt: &str,
) -> Result<(B::Obj, B::Obj), LoadError> {
    let bi = sig
        .box_type_index(bt)
        .ok_or_else(|| LoadError::Invalid(format!("unknown box type \"{bt}\"")))?;
    let leg = |tys: &[usize]| -> Result<B::Obj, LoadError> {
        let mut acc = interp.backend.unit_obj();
        for &t in tys {
            let tn = sig.type_name(t);
            let o = interp.objects.get(tn).ok_or_else(|| {
                LoadError::Invalid(format!(
                    "box type \"{bt}\" uses type \"{tn}\" which has no object"
                ))
            })?;
            acc = interp.backend.tensor_objs(&acc, o);
        }
        Ok(acc)
    };
    Ok((leg(sig.box_input_types(bi))?, leg(sig.box_output_types(bi))?))
}

fn matrix_from_rows(
    rows: &[Vec<f64>],
    nr: usize,
    nc: usize,
) -> Result<DMatrix<f64>, String> {
    if rows.len() != nr {
        return Err(format!("matrix has {} rows, expected {nr}", rows.len()));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != nc {
            return Err(format!("row {i} has {} entries, expected {nc}", r.len()));
        }
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

pub fn parse_kernel(json: &str) -> Result<AnyKernel, LoadError> {
    let file: KernelFile =
        serde_json::from_str(json).map_err(|e| LoadError::Parse(e.to_string()))?;
    check_format(&file.format)?;
    match &file.kernel {
        KernelSpec::Finstoch { dom, cod, table } => {
            let obj = |fs: &[FactorSpec]| {
                FinObject::of(fs.iter().map(|f| FinFactor::new(&f.name, f.labels.iter())))
            };
            let k = StochKernel::new(obj(dom), obj(cod), table.clone())
                .map_err(|e| LoadError::Invalid(e.to_string()))?;
            Ok(AnyKernel::Fin(k))
        }
        KernelSpec::Gauss { dom, cod, a, offset, cov } => {
            let dom = GaussObject::of(dom.iter().copied());
            let cod = GaussObject::of(cod.iter().copied());
            let am = matrix_from_rows(a, cod.dim(), dom.dim())
                .map_err(LoadError::Invalid)?;
            let cm = matrix_from_rows(cov, cod.dim(), cod.dim())
                .map_err(LoadError::Invalid)?;
            if offset.len() != cod.dim() {
                return Err(LoadError::Invalid(format!(
                    "offset has {} entries, expected {}",
                    offset.len(),
                    cod.dim()
                )));
            }
            let k = GaussKernel::new(dom, cod, am, DVector::from_row_slice(offset), cm)
                .map_err(|e| LoadError::Invalid(e.to_string()))?;
            Ok(AnyKernel::Gauss(k))
        }
    }
}

/// Render a diagram (plus optional interpretation) as canonical JSON.
pub fn to_model_file(d: &StringDiagram, interp: Option<&AnyInterp>) -> ModelFile {
    let sig = d.sig();
    let graph = sig.graph();

    let mut types: Vec<String> =
        graph.wires.iter().map(|w| w.to_string()).collect();
    types.sort();
    let mut sig_boxes: Vec<BoxTypeSpec> = graph
        .boxes
        .iter()
        .map(|b| BoxTypeSpec {
            name: b.name.to_string(),
            inputs: b.inputs.iter().map(|t| t.to_string()).collect(),
            outputs: b.outputs.iter().map(|t| t.to_string()).collect(),
        })
        .collect();
    sig_boxes.sort_by(|a, b| a.name.cmp(&b.name));

    let mut wires: Vec<WireSpec> = d
        .wires()
        .iter()
        .map(|w| WireSpec {
            name: w.name().to_string(),
            ty: sig.type_name(w.ty()).to_string(),
        })
        .collect();
    wires.sort_by(|a, b| a.name.cmp(&b.name));
    let wname = |i: &usize| d.wires()[*i].name().to_string();
    let mut boxes: Vec<BoxSpec> = d
        .boxes()
        .iter()
        .map(|b| BoxSpec {
            name: b.name().to_string(),
            ty: sig.box_type(b.ty()).name.to_string(),
            inputs: b.inputs().iter().map(wname).collect(),
            outputs: b.outputs().iter().map(wname).collect(),
        })
        .collect();
    boxes.sort_by(|a, b| a.name.cmp(&b.name));

    ModelFile {
        format: FORMAT.to_string(),
        signature: SigSpec { types, boxes: sig_boxes },
        diagram: DiagSpec {
            wires,
            boxes,
            inputs: d.inputs().iter().map(wname).collect(),
            outputs: d.outputs().iter().map(wname).collect(),
        },
        interpretation: interp.map(interp_spec),
    }
}

fn interp_spec(interp: &AnyInterp) -> InterpSpec {
    match interp {
        AnyInterp::Fin(i) => InterpSpec::Finstoch {
            objects: i
                .objects
                .iter()
                .map(|(ty, o)| {
                    let labels = o.factors[0]
                        .labels
                        .iter()
                        .map(|l| l.to_string())
                        .collect();
                    (ty.to_string(), labels)
                })
                .collect(),
            kernels: i
                .kernels
                .iter()
                .map(|(bt, k)| (bt.to_string(), k.table().to_vec()))
                .collect(),
        },
        AnyInterp::Gauss(i) => InterpSpec::Gauss {
            objects: i
                .objects
                .iter()
                .map(|(ty, o)| (ty.to_string(), o.dims[0]))
                .collect(),
            kernels: i
                .kernels
                .iter()
                .map(|(bt, k)| {
                    (bt.to_string(), GaussKernelSpec {
                        a: matrix_rows(k.matrix()),
                        offset: k.offset().iter().copied().collect(),
                        cov: matrix_rows(k.cov()),
                    })
                })
                .collect(),
        },
    }
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn to_model_json(d: &StringDiagram, interp: Option<&AnyInterp>) -> String {
    let mut s = serde_json::to_string_pretty(&to_model_file(d, interp))
        .expect("model serialization cannot fail");
    s.push('\n');
    s
}

pub fn to_kernel_json(k: &AnyKernel) -> String {
    let spec = match k {
        AnyKernel::Fin(k) => KernelSpec::Finstoch {
            dom: factor_specs(k.dom()),
            cod: factor_specs(k.cod()),
            table: k.table().to_vec(),
        },
        AnyKernel::Gauss(k) => KernelSpec::Gauss {
            dom: k.dom().dims.clone(),
            cod: k.cod().dims.clone(),
            a: matrix_rows(k.matrix()),
            offset: k.offset().iter().copied().collect(),
            cov: matrix_rows(k.cov()),
        },
    };
    let mut s = serde_json::to_string_pretty(&KernelFile {
        format: FORMAT.to_string(),
        kernel: spec,
    })
    .expect("kernel serialization cannot fail");
    s.push('\n');
    s
}

fn factor_specs(o: &FinObject) -> Vec<FactorSpec> {
    o.factors
        .iter()
        .map(|f| FactorSpec {
            name: f.name.to_string(),
            labels: f.labels.iter().map(|l| l.to_string()).collect(),
        })
        .collect()
}
