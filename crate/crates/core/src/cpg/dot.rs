use std::fmt::Write;

use super::{EdgeKind, PropertyGraph};

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => {}
            _ => out.push(c),
        }
    }
    out
}

fn style(kind: EdgeKind) -> &'static str {
    match kind {
        EdgeKind::Ast => "style=solid, color=black",
        EdgeKind::Cfg => "style=dashed, color=red",
        EdgeKind::Cdg => "style=dotted, color=purple",
        // Graphviz has no dash-dot pattern; bold dashes stand in for it.
        EdgeKind::Ddg => "style=\"dashed,bold\", color=green",
    }
}

/// Graphviz rendering: AST solid black, CFG dashed red, CDG dotted purple,
/// DDG dash-dot green labelled with the variable.
pub fn to_dot(graph: &PropertyGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph \"{}\" {{", escape(&graph.name));
    out.push_str("  node [shape=box, fontname=\"monospace\"];\n");
    for n in &graph.nodes {
        let code: String = n.code.split_whitespace().collect::<Vec<_>>().join(" ");
        let _ = writeln!(out, "  n{} [label=\"{}: {}\\n{}\"];", n.id, n.id, n.label, escape(&code));
    }
    for e in &graph.edges {
        let _ = write!(out, "  n{} -> n{} [{}", e.src, e.dst, style(e.kind));
        if let Some(v) = &e.var {
            let _ = write!(out, ", label=\"{}\"", escape(v));
        }
        out.push_str("];\n");
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpg::build_cpg;
    use crate::frontend::parse_function;

    #[test]
    fn empty_function_has_three_nodes() {
        let g = build_cpg(&parse_function("void f(){}").unwrap()).unwrap();
        let dot = to_dot(&g);
        assert_eq!(dot.lines().filter(|l| l.contains("[label=")).count(), 3);
        assert_eq!(dot, to_dot(&g));
    }

    #[test]
    fn escapes_quotes() {
        let g = build_cpg(&parse_function("void f(){ puts(\"a\\\"b\"); }").unwrap()).unwrap();
        assert!(to_dot(&g).contains("puts(\\\"a\\\\\\\"b\\\")"));
    }
}
