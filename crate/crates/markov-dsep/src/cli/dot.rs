//! Graphviz rendering of a diagram: wires as ellipses, boxes as rectangles,
//! with arrowheads following the flow of information. Interface legs get
//! their own small arrow nodes so copying and discarding at the boundary
//! stay visible.

use std::fmt::Write;

use crate::diagram::StringDiagram;

fn quoted(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

pub fn to_dot(d: &StringDiagram) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph diagram {{");
    let _ = writeln!(out, "  rankdir=LR;");
    let _ = writeln!(out, "  node [fontname=\"Helvetica\"];");

    for w in d.wires() {
        let ty = d.sig().type_name(w.ty());
        let _ = writeln!(
            out,
            "  {} [shape=ellipse, label={}];",
            quoted(&format!("w:{}", w.name())),
            quoted(&format!("{} : {}", w.name(), ty)),
        );
    }
    for b in d.boxes() {
        let ty = &d.sig().box_type(b.ty()).name;
        let _ = writeln!(
            out,
            "  {} [shape=box, style=filled, fillcolor=lightgrey, label={}];",
            quoted(&format!("b:{}", b.name())),
            quoted(&format!("{} : {}", b.name(), ty)),
        );
    }
    for b in d.boxes() {
        let bn = quoted(&format!("b:{}", b.name()));
        for (p, &w) in b.inputs().iter().enumerate() {
            let _ = writeln!(
                out,
                "  {} -> {} [label=\"{}\"];",
                quoted(&format!("w:{}", d.wires()[w].name())),
                bn,
                p,
            );
        }
        for (p, &w) in b.outputs().iter().enumerate() {
            let _ = writeln!(
                out,
                "  {} -> {} [label=\"{}\"];",
                bn,
                quoted(&format!("w:{}", d.wires()[w].name())),
                p,
            );
        }
    }
    for (p, &w) in d.inputs().iter().enumerate() {
        let port = format!("in:{p}");
        let _ = writeln!(out, "  {} [shape=plaintext, label={}];", quoted(&port), quoted(&port));
        let _ = writeln!(
            out,
            "  {} -> {};",
            quoted(&port),
            quoted(&format!("w:{}", d.wires()[w].name())),
        );
    }
    for (p, &w) in d.outputs().iter().enumerate() {
        let port = format!("out:{p}");
        let _ = writeln!(out, "  {} [shape=plaintext, label={}];", quoted(&port), quoted(&port));
        let _ = writeln!(
            out,
            "  {} -> {};",
            quoted(&format!("w:{}", d.wires()[w].name())),
            quoted(&port),
        );
    }
    let _ = writeln!(out, "}}");
    out
}
