//! Directed hypergraphs: named wires plus boxes carrying ordered input and
//! output port lists.
//!
//! Hypergraphs play two roles here: as *signatures* (wires are types, boxes
//! are the generating box types) and as the *bodies* of string diagrams.
//! A `Hypergraph` is plain data and may be malformed — [`Hypergraph::validate`]
//! reports violations as values rather than failing, so loaders can surface
//! every problem at once.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Shared immutable identifier. Cheap to clone, compares by content.
pub type Name = Arc<str>;

/// Convenience constructor for [`Name`].
pub fn name(s: impl AsRef<str>) -> Name {
    Arc::from(s.as_ref())
}

/// A box (hyperedge) with ordered input and output ports. The same wire may
/// appear on several ports; the port lists are the source of truth and all
/// counts are derived from them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoxDecl {
    pub name: Name,
    pub inputs: Vec<Name>,
    pub outputs: Vec<Name>,
}

impl BoxDecl {
    pub fn new(
        name_: impl AsRef<str>,
        inputs: impl IntoIterator<Item = impl AsRef<str>>,
        outputs: impl IntoIterator<Item = impl AsRef<str>>,
    ) -> Self {
        BoxDecl {
            name: name(name_),
            inputs: inputs.into_iter().map(name).collect(),
            outputs: outputs.into_iter().map(name).collect(),
        }
    }

    /// (number of input ports, number of output ports).
    pub fn arity(&self) -> (usize, usize) {
        (self.inputs.len(), self.outputs.len())
    }

    /// How many input ports of this box are attached to `wire`.
    pub fn in_count(&self, wire: &str) -> usize {
        self.inputs.iter().filter(|w| &***w == wire).count()
    }

    /// How many output ports of this box are attached to `wire`.
    pub fn out_count(&self, wire: &str) -> usize {
        self.outputs.iter().filter(|w| &***w == wire).count()
    }

    /// The distinct input wires (repeats collapsed).
    pub fn in_set(&self) -> BTreeSet<Name> {
        self.inputs.iter().cloned().collect()
    }

    /// The distinct output wires (repeats collapsed).
    pub fn out_set(&self) -> BTreeSet<Name> {
        self.outputs.iter().cloned().collect()
    }

    /// All wires attached to any port of this box, inputs first.
    pub fn attached_wires(&self) -> impl Iterator<Item = &Name> {
        self.inputs.iter().chain(self.outputs.iter())
    }
}

/// A directed hypergraph. `wires` and `boxes` keep declaration order, which
/// downstream code uses as the canonical order for reports and indexing.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Hypergraph {
    pub wires: Vec<Name>,
    pub boxes: Vec<BoxDecl>,
}

/// A well-formedness violation found by [`Hypergraph::validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    DuplicateWire { wire: Name },
    DuplicateBox { box_name: Name },
    /// A box port references a wire that was never declared.
    UndeclaredWire { box_name: Name, port: PortRef, wire: Name },
}

/// Identifies one port of a box (0-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PortRef {
    In(usize),
    Out(usize),
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PortRef::In(i) => write!(f, "inputs[{i}]"),
            PortRef::Out(i) => write!(f, "outputs[{i}]"),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateWire { wire } => write!(f, "duplicate wire \"{wire}\""),
            Violation::DuplicateBox { box_name } => write!(f, "duplicate box \"{box_name}\""),
            Violation::UndeclaredWire { box_name, port, wire } => {
                write!(f, "box \"{box_name}\" {port} references undeclared wire \"{wire}\"")
            }
        }
    }
}

/// Error for checked lookups against a hypergraph.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LookupError {
    #[error("unknown wire \"{0}\"")]
    UnknownWire(Name),
    #[error("unknown box \"{0}\"")]
    UnknownBox(Name),
}

impl Hypergraph {
    pub fn new() -> Self {
        Hypergraph::default()
    }

    /// Build from wire names and box declarations in one go.
    pub fn from_parts(
        wires: impl IntoIterator<Item = impl AsRef<str>>,
        boxes: impl IntoIterator<Item = BoxDecl>,
    ) -> Self {
        Hypergraph {
            wires: wires.into_iter().map(name).collect(),
            boxes: boxes.into_iter().collect(),
        }
    }

    pub fn add_wire(&mut self, w: impl AsRef<str>) -> &mut Self {
        self.wires.push(name(w));
        self
    }

    pub fn add_box(
        &mut self,
        name_: impl AsRef<str>,
        inputs: impl IntoIterator<Item = impl AsRef<str>>,
        outputs: impl IntoIterator<Item = impl AsRef<str>>,
    ) -> &mut Self {
        self.boxes.push(BoxDecl::new(name_, inputs, outputs));
        self
    }

    pub fn has_wire(&self, w: &str) -> bool {
        self.wires.iter().any(|x| &**x == w)
    }

    pub fn box_decl(&self, b: &str) -> Option<&BoxDecl> {
        self.boxes.iter().find(|d| &*d.name == b)
    }

    /// Check every structural invariant; an empty result means well-formed.
    /// Total: never panics on arbitrary data.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut seen_wires: BTreeSet<&str> = BTreeSet::new();
        for w in &self.wires {
            if !seen_wires.insert(w) {
                out.push(Violation::DuplicateWire { wire: w.clone() });
            }
        }
        let mut seen_boxes: BTreeSet<&str> = BTreeSet::new();
        for b in &self.boxes {
            if !seen_boxes.insert(&b.name) {
                out.push(Violation::DuplicateBox { box_name: b.name.clone() });
            }
            for (i, w) in b.inputs.iter().enumerate() {
                if !seen_wires.contains(&**w) {
                    out.push(Violation::UndeclaredWire {
                        box_name: b.name.clone(),
                        port: PortRef::In(i),
                        wire: w.clone(),
                    });
                }
            }
            for (i, w) in b.outputs.iter().enumerate() {
                if !seen_wires.contains(&**w) {
                    out.push(Violation::UndeclaredWire {
                        box_name: b.name.clone(),
                        port: PortRef::Out(i),
                        wire: w.clone(),
                    });
                }
            }
        }
        out
    }

    /// Checked variant of [`BoxDecl::in_count`]: errors on unknown names.
    pub fn in_count(&self, b: &str, w: &str) -> Result<usize, LookupError> {
        let decl = self.box_decl(b).ok_or_else(|| LookupError::UnknownBox(name(b)))?;
        if !self.has_wire(w) {
            return Err(LookupError::UnknownWire(name(w)));
        }
        Ok(decl.in_count(w))
    }

    /// Checked variant of [`BoxDecl::out_count`].
    pub fn out_count(&self, b: &str, w: &str) -> Result<usize, LookupError> {
        let decl = self.box_decl(b).ok_or_else(|| LookupError::UnknownBox(name(b)))?;
        if !self.has_wire(w) {
            return Err(LookupError::UnknownWire(name(w)));
        }
        Ok(decl.out_count(w))
    }

    /// Total number of output ports attached to `w` across all boxes.
    /// Together with interface-input occurrences this is what left monogamy
    /// bounds by one.
    pub fn production_count(&self, w: &str) -> usize {
        self.boxes.iter().map(|b| b.out_count(w)).sum()
    }

    /// Total number of input ports attached to `w` across all boxes.
    pub fn consumption_count(&self, w: &str) -> usize {
        self.boxes.iter().map(|b| b.in_count(w)).sum()
    }
}

/// A structure-preserving map between hypergraphs: wires to wires, boxes to
/// boxes, preserving arities and port attachment.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HypergraphMorphism {
    pub wire_map: BTreeMap<Name, Name>,
    pub box_map: BTreeMap<Name, Name>,
}

/// A violation found by [`HypergraphMorphism::validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MorphismViolation {
    MissingWireImage { wire: Name },
    MissingBoxImage { box_name: Name },
    UnknownWireImage { wire: Name, image: Name },
    UnknownBoxImage { box_name: Name, image: Name },
    ArityMismatch { box_name: Name, src_arity: (usize, usize), dst_arity: (usize, usize) },
    /// Port attachment does not commute: the image of the port's wire is not
    /// the corresponding port's wire on the image box.
    PortMismatch { box_name: Name, port: PortRef, expected: Name, found: Name },
}

impl fmt::Display for MorphismViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use MorphismViolation::*;
        match self {
            MissingWireImage { wire } => write!(f, "wire \"{wire}\" has no image"),
            MissingBoxImage { box_name } => write!(f, "box \"{box_name}\" has no image"),
            UnknownWireImage { wire, image } => {
                write!(f, "wire \"{wire}\" maps to unknown wire \"{image}\"")
            }
            UnknownBoxImage { box_name, image } => {
                write!(f, "box \"{box_name}\" maps to unknown box \"{image}\"")
            }
            ArityMismatch { box_name, src_arity, dst_arity } => write!(
                f,
                "box \"{box_name}\" of arity {}→{} maps to a box of arity {}→{}",
                src_arity.0, src_arity.1, dst_arity.0, dst_arity.1
            ),
            PortMismatch { box_name, port, expected, found } => write!(
                f,
                "box \"{box_name}\" {port}: wire maps to \"{found}\" but the image box has \"{expected}\" there"
            ),
        }
    }
}

impl HypergraphMorphism {
    /// The identity morphism on `g`.
    pub fn identity(g: &Hypergraph) -> Self {
        HypergraphMorphism {
            wire_map: g.wires.iter().map(|w| (w.clone(), w.clone())).collect(),
            box_map: g.boxes.iter().map(|b| (b.name.clone(), b.name.clone())).collect(),
        }
    }

    pub fn map_wire(&self, w: &str) -> Option<&Name> {
        self.wire_map.get(w)
    }

    pub fn map_box(&self, b: &str) -> Option<&Name> {
        self.box_map.get(b)
    }

    /// Composition `self` then `next` (for `self: F→G`, `next: G→H`).
    pub fn then(&self, next: &HypergraphMorphism) -> HypergraphMorphism {
        let chase = |m: &BTreeMap<Name, Name>, next_m: &BTreeMap<Name, Name>| {
            m.iter()
                .filter_map(|(k, v)| next_m.get(v).map(|v2| (k.clone(), v2.clone())))
                .collect()
        };
        HypergraphMorphism {
            wire_map: chase(&self.wire_map, &next.wire_map),
            box_map: chase(&self.box_map, &next.box_map),
        }
    }

    /// Check totality, arity preservation, and that both port squares commute
    /// for every box and port index.
    pub fn validate(&self, src: &Hypergraph, dst: &Hypergraph) -> Vec<MorphismViolation> {
        use MorphismViolation::*;
        let mut out = Vec::new();

        let dst_wires: BTreeSet<&str> = dst.wires.iter().map(|w| &**w).collect();
        let dst_boxes: HashMap<&str, &BoxDecl> =
            dst.boxes.iter().map(|b| (&*b.name, b)).collect();

        for w in &src.wires {
            match self.wire_map.get(w) {
                None => out.push(MissingWireImage { wire: w.clone() }),
                Some(img) if !dst_wires.contains(&**img) => {
                    out.push(UnknownWireImage { wire: w.clone(), image: img.clone() })
                }
                Some(_) => {}
            }
        }

        for b in &src.boxes {
            let img = match self.box_map.get(&b.name) {
                None => {
                    out.push(MissingBoxImage { box_name: b.name.clone() });
                    continue;
                }
                Some(img) => img,
            };
            let tgt = match dst_boxes.get(&**img) {
                None => {
                    out.push(UnknownBoxImage { box_name: b.name.clone(), image: img.clone() });
                    continue;
                }
                Some(tgt) => *tgt,
            };
            if b.arity() != tgt.arity() {
                out.push(ArityMismatch {
                    box_name: b.name.clone(),
                    src_arity: b.arity(),
                    dst_arity: tgt.arity(),
                });
                continue;
            }
            let ports = b
                .inputs
                .iter()
                .zip(&tgt.inputs)
                .enumerate()
                .map(|(i, (w, tw))| (PortRef::In(i), w, tw))
                .chain(
                    b.outputs
                        .iter()
                        .zip(&tgt.outputs)
                        .enumerate()
                        .map(|(i, (w, tw))| (PortRef::Out(i), w, tw)),
                );
            for (port, w, expected) in ports {
                // A missing wire image is already reported above; skip here.
                if let Some(found) = self.wire_map.get(w) {
                    if found != expected {
                        out.push(PortMismatch {
                            box_name: b.name.clone(),
                            port,
                            expected: expected.clone(),
                            found: found.clone(),
                        });
                    }
                }
            }
        }
        out
    }
}
