#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{BTreeMap, BTreeSet};

use grapheye::cpg::{def_use, EdgeKind, PropertyGraph};
use grapheye::frontend::NodeId;
use grapheye::gcgat::{loss_and_gradients, loss_at, DropoutMasks, GcGatConfig, Graph, Params};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const LISTINGS: &str = include_str!("../fixtures/listings.c");
pub const BAD: &str = include_str!("../fixtures/bad.c");
pub const GOOD: &str = include_str!("../fixtures/good.c");

/// Random small graph: binary features with one label bit per row, sparse
/// directed adjacency without self-loops.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, width: usize) -> (Array2<f64>, Array2<f64>) {
    let x = Array2::from_shape_fn((n, width), |(_, c)| if c >= 15 && rng.gen_bool(0.08) { 1.0 } else { 0.0 });
    let mut x = x;
    for i in 0..n {
        x[[i, rng.gen_range(0..13)]] = 1.0;
    }
    let a = Array2::from_shape_fn((n, n), |(i, j)| if i != j && rng.gen_bool(0.3) { 1.0 } else { 0.0 });
    (x, a)
}

pub struct GradCheck {
    pub max_rel: f64,
    pub worst: String,
    pub checked: usize,
    pub nodes: usize,
}

/// Central differences over every parameter against the analytic gradient.
/// Relative error is `|a - n| / max(|a|, |n|, floor)`.
pub fn gradient_check(seed: u64, n: usize, eps: f64, floor: f64, threads: usize) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = GcGatConfig { seed, ..GcGatConfig::default() };
    let (x, a) = random_graph(&mut rng, n, cfg.input_dim);
    let g = Graph::new(&x, &a).unwrap();
    let params = Params::init(&cfg, &mut rng);
    let label = rng.gen_range(0..2);
    let weights = [0.6, 1.7];
    let masks = (seed % 2 == 1).then(|| DropoutMasks::sample(&cfg, n, &mut rng));
    let (_, grad) = loss_and_gradients(&params, &cfg, &g, label, weights, masks.as_ref()).unwrap();

    let analytic: Vec<(String, f64)> = grad
        .tensors()
        .iter()
        .flat_map(|t| t.data.iter().enumerate().map(move |(i, v)| (format!("{}[{i}]", t.name), *v)))
        .collect();
    let total = analytic.len();
    let chunk = total.div_ceil(threads);
    let results: Vec<(f64, usize)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let (params, cfg, g, masks, analytic) = (&params, &cfg, &g, masks.as_ref(), &analytic);
                s.spawn(move || {
                    let mut p = params.clone();
                    let mut worst = (0.0f64, usize::MAX);
                    for k in t * chunk..((t + 1) * chunk).min(total) {
                        let orig = flat_get(&p, k);
                        flat_set(&mut p, k, orig + eps);
                        let up = loss_at(&p, cfg, g, label, weights, masks).unwrap();
                        flat_set(&mut p, k, orig - eps);
                        let down = loss_at(&p, cfg, g, label, weights, masks).unwrap();
                        flat_set(&mut p, k, orig);
                        let numeric = (up - down) / (2.0 * eps);
                        let a = analytic[k].1;
                        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
                        if rel > worst.0 || worst.1 == usize::MAX {
                            worst = (rel, k);
                        }
                    }
                    worst
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let (max_rel, k) = results.into_iter().filter(|r| r.1 != usize::MAX).fold((0.0, 0), |m, r| if r.0 > m.0 { r } else { m });
    GradCheck { max_rel, worst: analytic[k].0.clone(), checked: total, nodes: n }
}

fn flat_get(p: &Params, mut k: usize) -> f64 {
    for t in p.tensors() {
        if k < t.data.len() {
            return t.data[k];
        }
        k -= t.data.len();
    }
    panic!("index out of range")
}

fn flat_set(p: &mut Params, mut k: usize, v: f64) {
    for t in p.tensors_mut() {
        if k < t.data.len() {
            t.data[k] = v;
            return;
        }
        k -= t.data.len();
    }
    panic!("index out of range")
}

pub fn threads() -> usize {
    std::thread::available_parallelism().map_or(4, |n| n.get())
}

pub type DdgEdge = (NodeId, NodeId, String);

/// DDG by enumerating simple CFG paths from each definition: an edge exists
/// when some path reaches a use of the variable without passing a node that
/// strongly redefines it.
pub fn ddg_oracle(graph: &PropertyGraph) -> BTreeSet<DdgEdge> {
    let succ = graph.successors(EdgeKind::Cfg);
    let nodes = graph.cfg_nodes();
    let du: BTreeMap<NodeId, _> = nodes.iter().map(|&n| (n, def_use(graph, n))).collect();
    let mut edges = BTreeSet::new();
    for &n in &nodes {
        for d in &du[&n].defs {
            let mut visited = BTreeSet::from([n]);
            walk(n, &d.var, d.site, &succ, &du, &mut visited, &mut edges);
        }
    }
    edges
}

fn walk(
    at: NodeId,
    var: &str,
    site: NodeId,
    succ: &[Vec<NodeId>],
    du: &BTreeMap<NodeId, grapheye::cpg::DefUse>,
    visited: &mut BTreeSet<NodeId>,
    edges: &mut BTreeSet<DdgEdge>,
) {
    for &w in &succ[at.index()] {
        if visited.contains(&w) {
            continue;
        }
        if du[&w].uses.contains(var) {
            edges.insert((site, w, var.to_string()));
        }
        if du[&w].defs.iter().any(|d| d.strong && d.var == var) {
            continue;
        }
        visited.insert(w);
        walk(w, var, site, succ, du, visited, edges);
        visited.remove(&w);
    }
}

pub fn ddg_edges(graph: &PropertyGraph) -> BTreeSet<DdgEdge> {
    graph.edges_of(EdgeKind::Ddg).map(|e| (e.src, e.dst, e.var.clone().expect("DDG edges carry a variable"))).collect()
}

/// `q` post-dominates `p` when `p == q` or the exit is unreachable from `p`
/// once `q` is removed.
pub fn post_dominates(graph: &PropertyGraph, q: NodeId, p: NodeId) -> bool {
    if p == q {
        return true;
    }
    let succ = graph.successors(EdgeKind::Cfg);
    let mut seen = BTreeSet::from([p]);
    let mut stack = vec![p];
    while let Some(v) = stack.pop() {
        if v == graph.exit {
            return false;
        }
        for &w in &succ[v.index()] {
            if w != q && seen.insert(w) {
                stack.push(w);
            }
        }
    }
    true
}

/// Control dependence by definition: `s` post-dominates a successor of `c`
/// but not `c` itself.
pub fn cdg_oracle(graph: &PropertyGraph) -> BTreeSet<(NodeId, NodeId)> {
    let succ = graph.successors(EdgeKind::Cfg);
    let nodes = graph.cfg_nodes();
    let mut edges = BTreeSet::new();
    for &c in &nodes {
        for &s in &nodes {
            if !post_dominates(graph, s, c) && succ[c.index()].iter().any(|&t| post_dominates(graph, s, t)) {
                edges.insert((c, s));
            }
        }
    }
    edges
}

pub fn cdg_edges(graph: &PropertyGraph) -> BTreeSet<(NodeId, NodeId)> {
    graph.edges_of(EdgeKind::Cdg).map(|e| (e.src, e.dst)).collect()
}

/// Hand-written functions covering every statement form, plus a seeded
/// synthetic corpus of all three templates.
pub fn corpus_sources() -> Vec<String> {
    let mut out: Vec<String> = HANDWRITTEN.iter().map(|s| s.to_string()).collect();
    out.push(BAD.to_string());
    out.push(GOOD.to_string());
    for cwe in grapheye::datakit::Cwe::ALL {
        out.extend(grapheye::datakit::synth_generate(cwe, 40, 5).into_iter().map(|f| f.source));
    }
    out
}

pub const HANDWRITTEN: &[&str] = &[
    "void f() { a = 1; b = 2; c = 3; }",
    "void f() { int a = 1; int b = a; }",
    "void f() { x = 1; x = 2; y = x; }",
    "void f(int c) { while (c) c = c - 1; }",
    "void f(int c) { if (c) { a = 1; } b = a; }",
    "int f(int c) { if (c > 0) { return 1; } else { c = -c; } return c; }",
    "int f(int n) { int s = 0; for (int i = 0; i < n; i++) { s += i; } return s; }",
    "void f(int n) { do { n--; } while (n > 0); printIntLine(n); }",
    "void f(int k) { switch (k) { case 1: a = 1; break; case 2: a = 2; default: a = 3; } b = a; }",
    "void f(int k) { switch (k) { case 1: a = 1; break; } b = a; }",
    "void f(int n) { again: n = n - 1; if (n > 0) goto again; printIntLine(n); }",
    "void f(int *p, int i) { p[i] = 1; *p = 2; x = p[0]; }",
    "void f(int n) { while (n) { if (n == 3) break; if (n == 5) { n = n - 2; continue; } n--; } }",
    "void f(struct s *p) { p->v = 1; y = p->v; p = 0; z = p->v; }",
    "int f(int a, int b) { if (a && b) return a; else if (a || b) return b; return 0; }",
    "void f(int n) { for (;;) { if (n) break; } }",
    "void f(int n) { int i; for (i = 0; i < n; i++) ; }",
];

/// Checks every per-row block constraint of a feature matrix and the
/// adjacency rules; returns a description of the first violation.
pub fn check_vec_cpg(graph: &PropertyGraph, v: &grapheye::veccpg::VecCpg) -> Result<(), String> {
    use grapheye::frontend::NodeLabel;
    use grapheye::veccpg::*;
    let n = graph.len();
    if v.x.dim() != (n, FEATURE_WIDTH) || FEATURE_WIDTH != 133 {
        return Err(format!("feature matrix is {:?}", v.x.dim()));
    }
    if v.a.dim() != (n, n) {
        return Err(format!("adjacency is {:?}", v.a.dim()));
    }
    for (i, row) in v.x.rows().into_iter().enumerate() {
        let node = &graph.nodes[i];
        let bits: Vec<u8> = row.iter().map(|&b| b as u8).collect();
        if row.iter().any(|&b| b != 0.0 && b != 1.0) {
            return Err(format!("row {i} is not binary"));
        }
        let pop = |from: usize, to: usize| bits[from..to].iter().filter(|&&b| b == 1).count();
        let label = pop(LABEL_OFFSET, LABEL_OFFSET + 14);
        let op = pop(OPERATOR_OFFSET, FUNCTION_OFFSET);
        let func = pop(FUNCTION_OFFSET, LITERAL_OFFSET);
        let lit = pop(LITERAL_OFFSET, TYPE_OFFSET);
        let basic = pop(TYPE_OFFSET, TYPE_OFFSET + COMPLEX_OFFSET);
        let reserved = [
            LABEL_OFFSET + 14,
            OPERATOR_OFFSET + 26,
            FUNCTION_OFFSET + 40,
            TYPE_OFFSET + 10,
            TYPE_OFFSET + 17,
        ];
        let is_call = node.label == NodeLabel::Call;
        let problem = if label != 1 {
            Some("label popcount")
        } else if op > 1 || (op == 1 && !is_call) {
            Some("operator block")
        } else if func > 1 || (func == 1 && !is_call) {
            Some("function block")
        } else if lit > 0 && node.label != NodeLabel::Literal {
            Some("literal block on a non-literal")
        } else if basic > 1 {
            Some("basic type block")
        } else if reserved.iter().any(|&r| bits[r] != 0) {
            Some("reserved bit set")
        } else {
            None
        };
        if let Some(p) = problem {
            return Err(format!("row {i} ({} `{}`): {p}", node.label, node.code));
        }
    }
    let mut pairs = BTreeSet::new();
    for e in graph.edges.iter().filter(|e| e.kind != EdgeKind::Cdg) {
        pairs.insert((e.src.index(), e.dst.index()));
    }
    for ((i, j), &val) in v.a.indexed_iter() {
        if val != 0.0 && val != 1.0 {
            return Err(format!("adjacency entry ({i},{j}) = {val}"));
        }
        if i == j && val != 0.0 {
            return Err(format!("self-loop at {i}"));
        }
        if (val == 1.0) != pairs.contains(&(i, j)) {
            return Err(format!("adjacency entry ({i},{j}) disagrees with the edge list"));
        }
    }
    Ok(())
}

/// Synthetic pairs as training samples, with a vocabulary built over them.
pub fn synth_samples(
    cwe: grapheye::datakit::Cwe,
    pairs: usize,
    seed: u64,
) -> (Vec<grapheye::gcgat::Sample>, grapheye::veccpg::FunctionVocabulary) {
    let functions = grapheye::datakit::synth_generate(cwe, pairs, seed);
    let graphs: Vec<PropertyGraph> = functions
        .iter()
        .map(|f| grapheye::cpg::build_cpg(&grapheye::frontend::parse_function(&f.source).unwrap()).unwrap())
        .collect();
    let vocab = grapheye::veccpg::build_vocab(&graphs).unwrap();
    let samples = graphs
        .iter()
        .zip(&functions)
        .map(|(g, f)| grapheye::gcgat::Sample { graph: grapheye::veccpg::VecCpg::new(g, &vocab), label: f.label })
        .collect();
    (samples, vocab)
}

pub fn listing_graph(src: &str) -> PropertyGraph {
    grapheye::cpg::build_cpg(&grapheye::frontend::parse_function(src).unwrap()).unwrap()
}
