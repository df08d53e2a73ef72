use std::collections::BTreeMap;

use fixedbitset::FixedBitSet;

use super::{CpgEdge, EdgeKind, PropertyGraph};
use crate::frontend::NodeId;

/// Reflexive post-dominator sets over the CFG nodes, as the greatest fixed
/// point of `pdom(n) = {n} ∪ ⋂ pdom(succ(n))` with `pdom(exit) = {exit}`.
/// Nodes that cannot reach the exit end up post-dominated by every node.
pub fn post_dominators(graph: &PropertyGraph) -> BTreeMap<NodeId, Vec<NodeId>> {
    let (nodes, sets) = pdom_sets(graph);
    nodes.iter().zip(sets).map(|(&n, set)| (n, set.ones().map(|i| nodes[i]).collect())).collect()
}

fn pdom_sets(graph: &PropertyGraph) -> (Vec<NodeId>, Vec<FixedBitSet>) {
    let nodes = graph.cfg_nodes();
    let index: BTreeMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let n = nodes.len();
    let mut succ = vec![Vec::new(); n];
    for e in graph.edges_of(EdgeKind::Cfg) {
        succ[index[&e.src]].push(index[&e.dst]);
    }
    let exit = index[&graph.exit];
    let mut full = FixedBitSet::with_capacity(n);
    full.insert_range(..);
    let mut pdom = vec![full.clone(); n];
    pdom[exit] = FixedBitSet::with_capacity(n);
    pdom[exit].insert(exit);

    let mut changed = true;
    while changed {
        changed = false;
        for v in (0..n).rev() {
            if v == exit {
                continue;
            }
            let mut set = full.clone();
            for &s in &succ[v] {
                set.intersect_with(&pdom[s]);
            }
            set.insert(v);
            if set != pdom[v] {
                pdom[v] = set;
                changed = true;
            }
        }
    }
    (nodes, pdom)
}

/// `c -> s` when `s` post-dominates some CFG successor of `c` but does not
/// post-dominate `c`.
pub fn build_cdg(graph: &PropertyGraph) -> Vec<CpgEdge> {
    let (nodes, pdom) = pdom_sets(graph);
    let index: BTreeMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let mut succ = vec![Vec::new(); nodes.len()];
    for e in graph.edges_of(EdgeKind::Cfg) {
        succ[index[&e.src]].push(index[&e.dst]);
    }
    let mut edges = Vec::new();
    for c in 0..nodes.len() {
        if succ[c].len() < 2 {
            continue;
        }
        let mut dependents = FixedBitSet::with_capacity(nodes.len());
        for &x in &succ[c] {
            dependents.union_with(&pdom[x]);
        }
        dependents.difference_with(&pdom[c]);
        edges.extend(dependents.ones().map(|s| CpgEdge::new(nodes[c], nodes[s], EdgeKind::Cdg)));
    }
    edges
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpg::build_cpg;
    use crate::frontend::parse_function;

    fn cdg(src: &str) -> Vec<(String, String)> {
        let g = build_cpg(&parse_function(src).unwrap()).unwrap();
        g.edges_of(EdgeKind::Cdg).map(|e| (g.node(e.src).code.clone(), g.node(e.dst).code.clone())).collect()
    }

    #[test]
    fn straight_line_has_no_control_dependence() {
        assert!(cdg("void f(){ a(); b(); c(); }").is_empty());
    }

    #[test]
    fn if_without_else() {
        assert_eq!(cdg("void f(){ if(c){a();} b(); }"), vec![("if(c)".to_string(), "a()".to_string())]);
    }

    #[test]
    fn loop_body_depends_on_condition() {
        let e = cdg("void f(){ while(c) { a(); } b(); }");
        assert_eq!(e, vec![("while(c)".to_string(), "a()".to_string())]);
    }

    #[test]
    fn exit_post_dominates_everything() {
        let g = build_cpg(&parse_function("void f(int x){ if (x) { a(); } else { b(); } }").unwrap()).unwrap();
        let pdom = post_dominators(&g);
        assert!(pdom.values().all(|set| set.contains(&g.exit)));
    }
}
