mod common;

use std::collections::BTreeSet;

use grapheye::cpg::*;
use grapheye::frontend::{parse_function, parse_unit, NodeId, NodeLabel, OperatorKind};

fn cpg(src: &str) -> PropertyGraph {
    build_cpg(&parse_function(src).unwrap()).unwrap()
}

fn find(g: &PropertyGraph, code: &str) -> NodeId {
    g.nodes.iter().find(|n| n.code == code).unwrap_or_else(|| panic!("no node `{code}`")).id
}

fn cfg_pairs(g: &PropertyGraph) -> BTreeSet<(NodeId, NodeId)> {
    g.edges_of(EdgeKind::Cfg).map(|e| (e.src, e.dst)).collect()
}

#[test]
fn ast_edges_follow_the_tree() {
    let ast = parse_function(common::BAD).unwrap();
    let edges = build_ast_edges(&ast);
    assert_eq!(edges.len(), ast.len() - 1);
    let g = cpg(common::BAD);
    let method = g.entry;
    let param = g.nodes.iter().find(|n| n.label == NodeLabel::Param).unwrap().id;
    let block = g.node(method).children[1];
    let local = g.nodes.iter().find(|n| n.label == NodeLabel::Local).unwrap().id;
    let pairs: BTreeSet<_> = edges.iter().map(|e| (e.src, e.dst)).collect();
    assert!(pairs.contains(&(method, param)));
    assert!(pairs.contains(&(method, block)));
    assert!(pairs.contains(&(block, local)));
    let div = g.nodes.iter().find(|n| n.is_operator(OperatorKind::Division)).unwrap().id;
    let cast = g.nodes.iter().find(|n| n.is_operator(OperatorKind::Cast)).unwrap().id;
    assert!(pairs.contains(&(cast, div)));
    assert!(edges.iter().all(|e| e.kind == EdgeKind::Ast && e.var.is_none()));
    assert!(build_ast_edges(&parse_function("void f(){}").unwrap()).len() == 2);
}

#[test]
fn straight_line_cfg() {
    let g = cpg("void f() { a = 1; b = 2; c = 3; }");
    let (s1, s2, s3) = (find(&g, "a = 1"), find(&g, "b = 2"), find(&g, "c = 3"));
    assert_eq!(cfg_pairs(&g), BTreeSet::from([(g.entry, s1), (s1, s2), (s2, s3), (s3, g.exit)]));
    assert!(build_cdg(&g).is_empty());
}

#[test]
fn while_loop_cfg() {
    let g = cpg("void f(int c) { while (c) s = 1; }");
    let cond = g.nodes.iter().find(|n| n.label == NodeLabel::ControlStructure).unwrap().id;
    let s = find(&g, "s = 1");
    assert_eq!(cfg_pairs(&g), BTreeSet::from([(g.entry, cond), (cond, s), (s, cond), (cond, g.exit)]));
}

#[test]
fn good_if_has_two_successors_that_reconverge() {
    let g = cpg(common::GOOD);
    let cond = g.nodes.iter().find(|n| n.label == NodeLabel::ControlStructure).unwrap().id;
    let succ = &g.successors(EdgeKind::Cfg)[cond.index()];
    assert_eq!(succ.len(), 2);
    let then_entry = find(&g, "result = (int)(100.0/data)");
    let else_entry = find(&g, "printLine(\"This would result in a divide by zero\")");
    assert_eq!(BTreeSet::from_iter(succ.iter().copied()), BTreeSet::from([then_entry, else_entry]));
    let pdom = post_dominators(&g);
    for &s in succ {
        assert!(pdom[&s].contains(&g.exit));
    }
    assert!(pdom[&cond].contains(&g.exit));
}

#[test]
fn return_and_goto_edges() {
    let g = cpg("int f(int n) { again: n = n - 1; if (n > 0) goto again; return n; }");
    let label = g.nodes.iter().find(|n| n.label == NodeLabel::JumpTarget).unwrap().id;
    let goto = g.nodes.iter().find(|n| n.code.starts_with("goto")).unwrap().id;
    let ret = g.nodes.iter().find(|n| n.label == NodeLabel::Return).unwrap().id;
    let pairs = cfg_pairs(&g);
    assert!(pairs.contains(&(goto, label)));
    assert!(pairs.contains(&(ret, g.exit)));
}

#[test]
fn undefined_label_is_an_error() {
    let ast = parse_function("void f() { goto nowhere; }").unwrap();
    assert!(matches!(build_cpg(&ast), Err(CfgError::UndefinedLabel { .. })));
}

#[test]
fn single_def_use() {
    let g = cpg("void f() { int a = 1; int b = a; }");
    let ddg = common::ddg_edges(&g);
    assert_eq!(ddg, BTreeSet::from([(find(&g, "a = 1"), find(&g, "b = a"), "a".to_string())]));
}

#[test]
fn listing_bad_ddg() {
    let g = cpg(common::BAD);
    let param = g.nodes.iter().find(|n| n.label == NodeLabel::Param).unwrap().id;
    let copy = find(&g, "data = Data");
    let div = find(&g, "result = (int)(100.0/data)");
    let print = find(&g, "printIntLine(result)");
    assert_eq!(
        common::ddg_edges(&g),
        BTreeSet::from([
            (param, copy, "Data".to_string()),
            (copy, div, "data".to_string()),
            (div, print, "result".to_string()),
        ])
    );
}

#[test]
fn killed_definition_has_no_edge() {
    let g = cpg("void f() { x = 1; x = 2; y = x; }");
    assert_eq!(common::ddg_edges(&g), BTreeSet::from([(find(&g, "x = 2"), find(&g, "y = x"), "x".to_string())]));
}

#[test]
fn pointer_writes_are_weak() {
    let g = cpg("void f(int *p) { *p = 1; p[2] = 3; y = *p; }");
    let into_y: BTreeSet<_> =
        common::ddg_edges(&g).into_iter().filter(|(_, d, v)| *d == find(&g, "y = *p") && v == "*p").collect();
    assert_eq!(into_y.len(), 2);
}

#[test]
fn good_cdg_covers_both_branches() {
    let g = cpg(common::GOOD);
    let cond = g.nodes.iter().find(|n| n.label == NodeLabel::ControlStructure).unwrap().id;
    let expected = BTreeSet::from([
        (cond, find(&g, "result = (int)(100.0/data)")),
        (cond, find(&g, "printIntLine(result)")),
        (cond, find(&g, "printLine(\"This would result in a divide by zero\")")),
    ]);
    assert_eq!(common::cdg_edges(&g), expected);
}

#[test]
fn if_without_else_cdg() {
    let g = cpg("void f(int c) { if (c) { a = 1; } b = 2; }");
    let cond = g.nodes.iter().find(|n| n.label == NodeLabel::ControlStructure).unwrap().id;
    assert_eq!(common::cdg_edges(&g), BTreeSet::from([(cond, find(&g, "a = 1"))]));
}

#[test]
fn listings_edge_kinds() {
    let fns = parse_unit(common::LISTINGS).unwrap();
    let bad = build_cpg(&fns[0]).unwrap();
    let good = build_cpg(&fns[1]).unwrap();
    for k in [EdgeKind::Ast, EdgeKind::Cfg, EdgeKind::Ddg] {
        assert!(bad.count(k) > 0 && good.count(k) > 0, "{k:?}");
    }
    assert_eq!(bad.count(EdgeKind::Cdg), 0);
    assert!(good.count(EdgeKind::Cdg) > 0);
}

#[test]
fn empty_function_graph() {
    let g = cpg("void f(){}");
    assert_eq!(g.len(), 3);
    assert_eq!(g.count(EdgeKind::Ast), 2);
    assert_eq!(cfg_pairs(&g), BTreeSet::from([(g.entry, g.exit)]));
    assert_eq!(g.count(EdgeKind::Ddg) + g.count(EdgeKind::Cdg), 0);
    assert_eq!(g.node(g.entry).label, NodeLabel::Method);
    assert_eq!(g.node(g.exit).label, NodeLabel::MethodReturn);
}

#[test]
fn dot_output() {
    let empty = to_dot(&cpg("void f(){}"));
    assert_eq!(empty.lines().filter(|l| l.trim_start().starts_with('n') && l.contains("[label=")).count(), 3);

    let g = cpg(common::BAD);
    let dot = to_dot(&g);
    assert_eq!(dot, to_dot(&g));
    let styled = |needle: &str| dot.lines().filter(|l| l.contains("->") && l.contains(needle)).count();
    assert_eq!(styled("color=black"), g.count(EdgeKind::Ast));
    assert_eq!(styled("color=red"), g.count(EdgeKind::Cfg));
    assert_eq!(styled("color=green"), g.count(EdgeKind::Ddg));
    assert_eq!(styled("color=purple"), g.count(EdgeKind::Cdg));
    assert_eq!(dot.lines().filter(|l| l.contains("->")).count(), g.edges.len());
}

#[test]
fn json_schema() {
    let v = cpg(common::GOOD).to_json_value();
    assert!(v["nodes"].is_array());
    assert_eq!(v["entry"], 0);
    assert!(v["exit"].is_u64());
    for e in v["edges"].as_array().unwrap() {
        let kind = e["kind"].as_str().unwrap();
        assert!(["AST", "CFG", "DDG", "CDG"].contains(&kind));
        assert_eq!(e.get("var").is_some(), kind == "DDG");
        assert!(e["src"].is_u64() && e["dst"].is_u64());
    }
}

#[test]
fn edge_kinds_partition_and_no_duplicates() {
    for src in common::corpus_sources() {
        let g = cpg(&src);
        let ast = parse_function(&src).unwrap();
        let mut staged = PropertyGraph::from_ast(&ast);
        staged.edges = build_ast_edges(&ast);
        let cfg = build_cfg(&staged).unwrap();
        staged.edges.extend(cfg.iter().cloned());
        let ddg = build_ddg(&staged);
        let cdg = build_cdg(&staged);
        assert_eq!(g.edges.len(), staged.edges.len() + ddg.len() + cdg.len());
        for k in EdgeKind::ALL {
            let of_kind: Vec<_> = g.edges_of(k).collect();
            let unique: BTreeSet<_> = of_kind.iter().map(|e| (e.src, e.dst, e.var.clone())).collect();
            assert_eq!(unique.len(), of_kind.len(), "duplicate {k:?} edge in {src}");
        }
        assert!(g.edges.iter().filter(|e| e.kind != EdgeKind::Ast).all(|e| e.src != e.dst));
    }
}

#[test]
fn every_statement_is_on_an_entry_exit_path() {
    for src in common::corpus_sources() {
        let g = cpg(&src);
        let succ = g.successors(EdgeKind::Cfg);
        let mut pred = vec![Vec::new(); g.len()];
        for e in g.edges_of(EdgeKind::Cfg) {
            pred[e.dst.index()].push(e.src);
        }
        let reach = |start: NodeId, adj: &Vec<Vec<NodeId>>| {
            let mut seen = BTreeSet::from([start]);
            let mut stack = vec![start];
            while let Some(v) = stack.pop() {
                for &w in &adj[v.index()] {
                    if seen.insert(w) {
                        stack.push(w);
                    }
                }
            }
            seen
        };
        let fwd = reach(g.entry, &succ);
        let bwd = reach(g.exit, &pred);
        for n in g.cfg_nodes() {
            assert!(fwd.contains(&n) && bwd.contains(&n), "node {n} off the entry-exit paths in {src}");
        }
    }
}

#[test]
fn ddg_matches_path_enumeration() {
    let mut checked = 0;
    for src in common::corpus_sources() {
        let g = cpg(&src);
        if g.cfg_nodes().len() <= 12 {
            assert_eq!(common::ddg_edges(&g), common::ddg_oracle(&g), "{src}");
            checked += 1;
        }
    }
    assert!(checked >= 20, "only {checked} small functions");
}

#[test]
fn cdg_matches_post_dominance_by_definition() {
    let mut checked = 0;
    for src in common::corpus_sources() {
        let g = cpg(&src);
        if g.cfg_nodes().len() <= 12 {
            assert_eq!(common::cdg_edges(&g), common::cdg_oracle(&g), "{src}");
            checked += 1;
        }
    }
    assert!(checked >= 20, "only {checked} small functions");
}
