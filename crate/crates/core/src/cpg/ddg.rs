//! Data dependence through reaching definitions.
//!
//! Writes through `*p`, `p[i]`, `p->f` or `s.f` define the surrogate variable
//! `*p` (the syntactic base identifier) as a weak update: they generate a
//! definition but kill nothing. Reads through the same forms use `*p`.

use std::collections::{BTreeMap, BTreeSet};

use fixedbitset::FixedBitSet;

use super::{CpgEdge, EdgeKind, PropertyGraph};
use crate::frontend::{ControlKind, NodeId, NodeLabel, Operator, OperatorKind};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Def {
    /// The node that performs the definition (a statement, or a PARAM at entry).
    pub site: NodeId,
    pub var: String,
    /// Strong definitions kill earlier definitions of the same variable.
    pub strong: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DefUse {
    pub defs: Vec<Def>,
    pub uses: BTreeSet<String>,
}

const COMPOUND_ASSIGN: &[&str] = &["+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>="];
const STEP_OPS: &[&str] = &["preIncrement", "preDecrement", "postDecrement"];

/// Definitions and uses of one control-flow node. Within a node, uses are
/// read before definitions take effect.
pub fn def_use(graph: &PropertyGraph, id: NodeId) -> DefUse {
    let mut du = DefUse::default();
    let node = graph.node(id);
    if id == graph.entry {
        for &c in &node.children {
            let p = graph.node(c);
            if let (NodeLabel::Param, Some(name)) = (p.label, &p.name) {
                du.defs.push(Def { site: c, var: name.clone(), strong: true });
            }
        }
        return du;
    }
    let mut walker = Walker { graph, site: id, du: &mut du };
    for root in expression_roots(graph, id) {
        walker.read(root);
    }
    du
}

fn expression_roots(graph: &PropertyGraph, id: NodeId) -> Vec<NodeId> {
    let node = graph.node(id);
    match node.label {
        NodeLabel::Method | NodeLabel::MethodReturn | NodeLabel::JumpTarget | NodeLabel::Unknown => vec![],
        NodeLabel::Return => node.children.clone(),
        NodeLabel::ControlStructure => match node.control {
            Some(ControlKind::If { .. } | ControlKind::While | ControlKind::Switch) => vec![node.children[0]],
            Some(ControlKind::DoWhile) => vec![node.children[1]],
            Some(ControlKind::For { init, cond: true, .. }) => vec![node.children[usize::from(init)]],
            _ => vec![],
        },
        _ => vec![id],
    }
}

struct Walker<'a> {
    graph: &'a PropertyGraph,
    site: NodeId,
    du: &'a mut DefUse,
}

impl Walker<'_> {
    fn use_var(&mut self, v: String) {
        self.du.uses.insert(v);
    }

    fn def_var(&mut self, var: String, strong: bool) {
        self.du.defs.push(Def { site: self.site, var, strong });
    }

    fn read(&mut self, id: NodeId) {
        let node = self.graph.node(id);
        let ch = &node.children;
        match (node.label, &node.operator) {
            (NodeLabel::Identifier, _) => {
                if let Some(name) = &node.name {
                    self.use_var(name.clone());
                }
            }
            (NodeLabel::Call, Some(Operator::Known(OperatorKind::Assignment))) => {
                self.read(ch[1]);
                self.write(ch[0], false);
            }
            (NodeLabel::Call, Some(Operator::Unlisted(s))) if COMPOUND_ASSIGN.contains(&s.as_str()) => {
                self.read(ch[1]);
                self.write(ch[0], true);
            }
            (NodeLabel::Call, Some(op))
                if op.is(OperatorKind::PostIncrement) || STEP_OPS.contains(&op.as_str()) =>
            {
                self.write(ch[0], true);
            }
            (NodeLabel::Call, Some(Operator::Known(k))) if is_access(*k) => {
                if let Some(b) = base_identifier(self.graph, ch[0]) {
                    self.use_var(format!("*{b}"));
                }
                for &c in ch {
                    self.read(c);
                }
            }
            _ => {
                for &c in ch {
                    self.read(c);
                }
            }
        }
    }

    fn write(&mut self, id: NodeId, compound: bool) {
        let node = self.graph.node(id);
        match (node.label, node.operator.as_ref().and_then(Operator::kind)) {
            (NodeLabel::Identifier, _) => {
                if let Some(name) = &node.name {
                    if compound {
                        self.use_var(name.clone());
                    }
                    self.def_var(name.clone(), true);
                }
            }
            (NodeLabel::Call, Some(k)) if is_access(k) => {
                if let Some(b) = base_identifier(self.graph, node.children[0]) {
                    let surrogate = format!("*{b}");
                    if compound {
                        self.use_var(surrogate.clone());
                    }
                    self.def_var(surrogate, false);
                }
                for &c in &node.children {
                    self.read(c);
                }
            }
            _ => self.read(id),
        }
    }
}

fn is_access(k: OperatorKind) -> bool {
    matches!(
        k,
        OperatorKind::Indirection
            | OperatorKind::IndirectIndexAccess
            | OperatorKind::FieldAccess
            | OperatorKind::IndirectFieldAccess
    )
}

/// The identifier an lvalue expression is rooted at, e.g. `p` for `*(p + 1)`.
fn base_identifier(graph: &PropertyGraph, id: NodeId) -> Option<String> {
    let node = graph.node(id);
    match node.label {
        NodeLabel::Identifier => node.name.clone(),
        NodeLabel::Call => {
            let op = node.operator.as_ref()?;
            let through = match op {
                Operator::Known(k) => {
                    is_access(*k)
                        || matches!(
                            k,
                            OperatorKind::Addition | OperatorKind::Subtraction | OperatorKind::Cast | OperatorKind::PostIncrement
                        )
                }
                Operator::Unlisted(s) => STEP_OPS.contains(&s.as_str()),
            };
            if through {
                base_identifier(graph, *node.children.first()?)
            } else {
                None
            }
        }
        _ => None,
    }
}

/// Def-use edges from reaching definitions over the CFG edges already in `graph`.
pub fn build_ddg(graph: &PropertyGraph) -> Vec<CpgEdge> {
    let nodes = graph.cfg_nodes();
    let index: BTreeMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let per_node: Vec<DefUse> = nodes.iter().map(|&n| def_use(graph, n)).collect();

    let mut defs: Vec<&Def> = Vec::new();
    let mut gen = Vec::with_capacity(nodes.len());
    for du in &per_node {
        let mut set = FixedBitSet::new();
        let start = defs.len();
        defs.extend(du.defs.iter());
        set.grow(defs.len());
        set.insert_range(start..defs.len());
        gen.push(set);
    }
    let universe = defs.len();
    let mut by_var: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, d) in defs.iter().enumerate() {
        by_var.entry(d.var.as_str()).or_default().push(i);
    }
    let kill: Vec<FixedBitSet> = per_node
        .iter()
        .enumerate()
        .map(|(n, du)| {
            let mut set = FixedBitSet::with_capacity(universe);
            for d in du.defs.iter().filter(|d| d.strong) {
                for &other in &by_var[d.var.as_str()] {
                    if !gen[n].contains(other) {
                        set.insert(other);
                    }
                }
            }
            set
        })
        .collect();
    for g in &mut gen {
        g.grow(universe);
    }

    let mut preds = vec![Vec::new(); nodes.len()];
    for e in graph.edges_of(EdgeKind::Cfg) {
        preds[index[&e.dst]].push(index[&e.src]);
    }

    let mut reach_in = vec![FixedBitSet::with_capacity(universe); nodes.len()];
    let mut reach_out = gen.clone();
    let mut changed = true;
    while changed {
        changed = false;
        for n in 0..nodes.len() {
            let mut inn = FixedBitSet::with_capacity(universe);
            for &p in &preds[n] {
                inn.union_with(&reach_out[p]);
            }
            let mut out = inn.clone();
            out.difference_with(&kill[n]);
            out.union_with(&gen[n]);
            if out != reach_out[n] {
                reach_out[n] = out;
                changed = true;
            }
            reach_in[n] = inn;
        }
    }

    let mut edges = BTreeSet::new();
    for (n, du) in per_node.iter().enumerate() {
        for var in &du.uses {
            let Some(candidates) = by_var.get(var.as_str()) else { continue };
            for &d in candidates {
                if reach_in[n].contains(d) && defs[d].site != nodes[n] {
                    edges.insert((defs[d].site, nodes[n], var.clone()));
                }
            }
        }
    }
    edges.into_iter().map(|(s, d, v)| CpgEdge::data(s, d, v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpg::build_cpg;
    use crate::frontend::parse_function;

    fn ddg(src: &str) -> (PropertyGraph, Vec<(String, String, String)>) {
        let g = build_cpg(&parse_function(src).unwrap()).unwrap();
        let edges = g
            .edges_of(EdgeKind::Ddg)
            .map(|e| (g.node(e.src).code.clone(), g.node(e.dst).code.clone(), e.var.clone().unwrap()))
            .collect();
        (g, edges)
    }

    #[test]
    fn single_def_use() {
        let (_, e) = ddg("void f(){ int a=1; int b=a; }");
        assert_eq!(e, vec![("a=1".into(), "b=a".into(), "a".into())]);
    }

    #[test]
    fn later_definition_kills_earlier() {
        let (_, e) = ddg("void f(){ x=1; x=2; y=x; }");
        assert_eq!(e, vec![("x=2".into(), "y=x".into(), "x".into())]);
    }

    #[test]
    fn weak_update_through_pointer() {
        let (_, e) = ddg("void f(int *p){ *p = 1; p[2] = 3; g(*p); }");
        let into_use: Vec<_> = e.iter().filter(|(_, d, v)| d == "g(*p)" && v == "*p").map(|(s, _, _)| s.as_str()).collect();
        // The second write does not kill the first.
        assert_eq!(into_use, vec!["*p = 1", "p[2] = 3"]);
        assert!(e.iter().any(|(s, d, v)| s == "int *p" && d == "g(*p)" && v == "p"));
    }

    #[test]
    fn params_define_at_entry() {
        let (_, e) = ddg("void f(float Data){ float data = Data; }");
        assert_eq!(e, vec![("float Data".into(), "data = Data".into(), "Data".into())]);
    }

    #[test]
    fn loop_carried_dependence() {
        let (_, e) = ddg("void f(){ int i = 0; while (i < 3) { i++; } }");
        assert!(e.contains(&("i++".into(), "while (i < 3)".into(), "i".into())));
        assert!(e.contains(&("i = 0".into(), "i++".into(), "i".into())));
        assert!(e.iter().all(|(s, d, _)| s != d));
    }

    #[test]
    fn compound_assignment_reads_and_writes() {
        let (g, _) = ddg("void f(){ x += y; }");
        let stmt = g.nodes.iter().find(|n| n.code == "x += y").unwrap().id;
        let du = def_use(&g, stmt);
        assert_eq!(du.uses, ["x", "y"].iter().map(|s| s.to_string()).collect());
        assert_eq!(du.defs.len(), 1);
    }
}
