//! Code property graph: the syntax tree plus control-flow, data-dependence
//! and control-dependence edges over one shared node set.

mod cdg;
mod cfg;
mod ddg;
mod dot;

use std::fmt;

use serde::Serialize;

use crate::frontend::{AstNode, FunctionAst, NodeId, NodeLabel};

pub use cdg::{build_cdg, post_dominators};
pub use cfg::{build_cfg, CfgError};
pub use ddg::{build_ddg, def_use, Def, DefUse};
pub use dot::to_dot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum EdgeKind {
    #[serde(rename = "AST")]
    Ast,
    #[serde(rename = "CFG")]
    Cfg,
    #[serde(rename = "DDG")]
    Ddg,
    #[serde(rename = "CDG")]
    Cdg,
}

impl EdgeKind {
    pub const ALL: [EdgeKind; 4] = [EdgeKind::Ast, EdgeKind::Cfg, EdgeKind::Ddg, EdgeKind::Cdg];

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Ast => "AST",
            EdgeKind::Cfg => "CFG",
            EdgeKind::Ddg => "DDG",
            EdgeKind::Cdg => "CDG",
        }
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CpgEdge {
    pub src: NodeId,
    pub dst: NodeId,
    pub kind: EdgeKind,
    /// Variable carried by a data dependence.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub var: Option<String>,
}

impl CpgEdge {
    pub fn new(src: NodeId, dst: NodeId, kind: EdgeKind) -> Self {
        CpgEdge { src, dst, kind, var: None }
    }

    pub fn data(src: NodeId, dst: NodeId, var: impl Into<String>) -> Self {
        CpgEdge { src, dst, kind: EdgeKind::Ddg, var: Some(var.into()) }
    }
}

/// One function's code property graph. Node `i` has id `NodeId(i)`; `entry` is
/// the METHOD node and `exit` the METHOD_RETURN node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyGraph {
    pub name: String,
    pub nodes: Vec<AstNode>,
    pub edges: Vec<CpgEdge>,
    pub entry: NodeId,
    pub exit: NodeId,
}

impl PropertyGraph {
    /// The node set of `ast` with no edges yet.
    pub fn from_ast(ast: &FunctionAst) -> Self {
        PropertyGraph {
            name: ast.name.clone(),
            nodes: ast.nodes.clone(),
            edges: Vec::new(),
            entry: ast.root().id,
            exit: ast.method_return(),
        }
    }

    pub fn node(&self, id: NodeId) -> &AstNode {
        &self.nodes[id.index()]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edges_of(&self, kind: EdgeKind) -> impl Iterator<Item = &CpgEdge> {
        self.edges.iter().filter(move |e| e.kind == kind)
    }

    pub fn count(&self, kind: EdgeKind) -> usize {
        self.edges_of(kind).count()
    }

    pub fn count_label(&self, label: NodeLabel) -> usize {
        self.nodes.iter().filter(|n| n.label == label).count()
    }

    /// Successor lists indexed by node id, restricted to one edge kind.
    pub fn successors(&self, kind: EdgeKind) -> Vec<Vec<NodeId>> {
        let mut succ = vec![Vec::new(); self.nodes.len()];
        for e in self.edges_of(kind) {
            succ[e.src.index()].push(e.dst);
        }
        succ
    }

    /// Nodes taking part in control flow (entry and exit always included), ascending.
    pub fn cfg_nodes(&self) -> Vec<NodeId> {
        let mut seen = vec![false; self.nodes.len()];
        seen[self.entry.index()] = true;
        seen[self.exit.index()] = true;
        for e in self.edges_of(EdgeKind::Cfg) {
            seen[e.src.index()] = true;
            seen[e.dst.index()] = true;
        }
        seen.iter().enumerate().filter(|(_, s)| **s).map(|(i, _)| NodeId(i)).collect()
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("graph serialization is infallible")
    }
}

/// One AST edge per parent-child pair, children in order.
pub fn build_ast_edges(ast: &FunctionAst) -> Vec<CpgEdge> {
    ast.tree_edges().into_iter().map(|(p, c)| CpgEdge::new(p, c, EdgeKind::Ast)).collect()
}

/// Builds the full code property graph of a parsed function.
pub fn build_cpg(ast: &FunctionAst) -> Result<PropertyGraph, CfgError> {
    let mut graph = PropertyGraph::from_ast(ast);
    graph.edges = build_ast_edges(ast);
    let cfg = build_cfg(&graph)?;
    graph.edges.extend(cfg);
    let ddg = build_ddg(&graph);
    let cdg = build_cdg(&graph);
    graph.edges.extend(ddg);
    graph.edges.extend(cdg);
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_function;

    #[test]
    fn empty_function() {
        let ast = parse_function("void f(){}").unwrap();
        let g = build_cpg(&ast).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.count(EdgeKind::Ast), 2);
        let cfg: Vec<_> = g.edges_of(EdgeKind::Cfg).map(|e| (e.src, e.dst)).collect();
        assert_eq!(cfg, vec![(g.entry, g.exit)]);
        assert_eq!(g.count(EdgeKind::Ddg), 0);
        assert_eq!(g.count(EdgeKind::Cdg), 0);
    }

    #[test]
    fn ast_edge_count_is_nodes_minus_one() {
        let ast = parse_function("int f(int a){ int b = a * 2; if (b > 3) { b = 0; } return b; }").unwrap();
        assert_eq!(build_ast_edges(&ast).len(), ast.len() - 1);
    }
}
