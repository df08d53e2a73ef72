//! Node feature rows and adjacency for a code property graph.
//!
//! A row is 133 bits wide, laid out as label (15), operator (27), function
//! (41), literal (32) and type (18) blocks. The adjacency matrix has a 1 for
//! every ordered pair joined by at least one AST, CFG or DDG edge.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cpg::{EdgeKind, PropertyGraph};
use crate::frontend::{AstNode, LiteralValue, NodeLabel, Operator, OperatorKind, TypeAnnotation};

pub const LABEL_WIDTH: usize = 15;
pub const OPERATOR_WIDTH: usize = 27;
pub const FUNCTION_WIDTH: usize = 41;
pub const LITERAL_WIDTH: usize = 32;
pub const TYPE_WIDTH: usize = 18;
pub const FEATURE_WIDTH: usize = LABEL_WIDTH + OPERATOR_WIDTH + FUNCTION_WIDTH + LITERAL_WIDTH + TYPE_WIDTH;

pub const LABEL_OFFSET: usize = 0;
pub const OPERATOR_OFFSET: usize = LABEL_OFFSET + LABEL_WIDTH;
pub const FUNCTION_OFFSET: usize = OPERATOR_OFFSET + OPERATOR_WIDTH;
pub const LITERAL_OFFSET: usize = FUNCTION_OFFSET + FUNCTION_WIDTH;
pub const TYPE_OFFSET: usize = LITERAL_OFFSET + LITERAL_WIDTH;

pub const VOCAB_CAPACITY: usize = 39;
pub const UNKNOWN_OPERATOR: usize = 25;
pub const UNKNOWN_FUNCTION: usize = 39;
/// First bit of the complex-type sub-block inside the type block.
pub const COMPLEX_OFFSET: usize = 11;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VocabError {
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("vocabulary holds {0} names, at most 39 allowed")]
    TooLarge(usize),
    #[error("duplicate vocabulary name `{0}`")]
    Duplicate(String),
}

/// Up to 39 API function names, each owning one slot of the function block.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VocabRepr", into = "VocabRepr")]
pub struct FunctionVocabulary {
    names: Vec<String>,
    slots: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VocabRepr {
    names: Vec<String>,
}

impl TryFrom<VocabRepr> for FunctionVocabulary {
    type Error = VocabError;
    fn try_from(r: VocabRepr) -> Result<Self, VocabError> {
        FunctionVocabulary::new(r.names)
    }
}

impl From<FunctionVocabulary> for VocabRepr {
    fn from(v: FunctionVocabulary) -> Self {
        VocabRepr { names: v.names }
    }
}

impl FunctionVocabulary {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self, VocabError> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() > VOCAB_CAPACITY {
            return Err(VocabError::TooLarge(names.len()));
        }
        let mut slots = HashMap::new();
        for (i, n) in names.iter().enumerate() {
            if slots.insert(n.clone(), i).is_some() {
                return Err(VocabError::Duplicate(n.clone()));
            }
        }
        Ok(FunctionVocabulary { names, slots })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Slot of `name`, or the unknown slot (39) when unlisted.
    pub fn slot(&self, name: &str) -> usize {
        self.slots.get(name).copied().unwrap_or(UNKNOWN_FUNCTION)
    }
}

/// Names of functions defined in the corpus, including the unqualified tail
/// of qualified names.
fn defined_names(corpus: &[PropertyGraph]) -> BTreeSet<&str> {
    let mut out = BTreeSet::new();
    for g in corpus {
        out.insert(g.name.as_str());
        if let Some(tail) = g.name.rsplit("::").next() {
            out.insert(tail);
        }
    }
    out
}

/// The 39 most frequent callees not defined inside the corpus; ties go to the
/// lexicographically smaller name.
pub fn build_vocab(corpus: &[PropertyGraph]) -> Result<FunctionVocabulary, VocabError> {
    if corpus.is_empty() {
        return Err(VocabError::EmptyCorpus);
    }
    let defined = defined_names(corpus);
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for g in corpus {
        for n in &g.nodes {
            if let (NodeLabel::Call, Some(c)) = (n.label, n.callee.as_deref()) {
                if !defined.contains(c) {
                    *freq.entry(c).or_default() += 1;
                }
            }
        }
    }
    let mut ranked: Vec<(&str, usize)> = freq.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    FunctionVocabulary::new(ranked.into_iter().take(VOCAB_CAPACITY).map(|(n, _)| n.to_string()))
}

fn one_hot<const N: usize>(bit: Option<usize>) -> [u8; N] {
    let mut out = [0u8; N];
    if let Some(b) = bit {
        out[b] = 1;
    }
    out
}

pub fn encode_label(label: NodeLabel) -> [u8; LABEL_WIDTH] {
    one_hot(Some(label.index()))
}

pub fn encode_operator(op: Option<&Operator>) -> [u8; OPERATOR_WIDTH] {
    one_hot(op.map(|o| o.kind().map_or(UNKNOWN_OPERATOR, OperatorKind::index)))
}

pub fn encode_function(callee: Option<&str>, vocab: &FunctionVocabulary) -> [u8; FUNCTION_WIDTH] {
    one_hot(callee.map(|c| vocab.slot(c)))
}

/// 32 bits, most significant first: two's complement for integers, IEEE-754
/// single precision for floats, code point for chars, byte length for strings.
pub fn encode_literal(lit: Option<&LiteralValue>) -> [u8; LITERAL_WIDTH] {
    let word: u32 = match lit {
        None | Some(LiteralValue::OutOfRange) => 0,
        Some(LiteralValue::Int32(v)) => *v as u32,
        Some(LiteralValue::Float32(f)) => f.to_bits(),
        Some(LiteralValue::Char(c)) => *c,
        Some(LiteralValue::String(len)) => *len,
    };
    let mut out = [0u8; LITERAL_WIDTH];
    for (i, bit) in out.iter_mut().enumerate() {
        *bit = ((word >> (31 - i)) & 1) as u8;
    }
    out
}

pub fn encode_type(ty: Option<&TypeAnnotation>) -> [u8; TYPE_WIDTH] {
    let mut out = [0u8; TYPE_WIDTH];
    if let Some(t) = ty {
        out[t.basic.index()] = 1;
        for c in &t.complex {
            out[COMPLEX_OFFSET + c.index()] = 1;
        }
    }
    out
}

/// The 133-wide feature row of one node.
pub fn encode_node(node: &AstNode, vocab: &FunctionVocabulary) -> [u8; FEATURE_WIDTH] {
    let mut row = [0u8; FEATURE_WIDTH];
    row[LABEL_OFFSET..OPERATOR_OFFSET].copy_from_slice(&encode_label(node.label));
    if node.label == NodeLabel::Call {
        row[OPERATOR_OFFSET..FUNCTION_OFFSET].copy_from_slice(&encode_operator(node.operator.as_ref()));
        row[FUNCTION_OFFSET..LITERAL_OFFSET].copy_from_slice(&encode_function(node.callee.as_deref(), vocab));
    }
    if node.label == NodeLabel::Literal {
        row[LITERAL_OFFSET..TYPE_OFFSET].copy_from_slice(&encode_literal(node.literal.as_ref()));
    }
    row[TYPE_OFFSET..].copy_from_slice(&encode_type(node.type_ann.as_ref()));
    row
}

/// `|V| × 133` matrix, row `i` describing node `i`.
pub fn build_feature_matrix(graph: &PropertyGraph, vocab: &FunctionVocabulary) -> Array2<f64> {
    let mut x = Array2::zeros((graph.len(), FEATURE_WIDTH));
    for (i, node) in graph.nodes.iter().enumerate() {
        for (j, bit) in encode_node(node, vocab).into_iter().enumerate() {
            x[[i, j]] = f64::from(bit);
        }
    }
    x
}

/// Directed binary adjacency over AST, CFG and DDG edges.
pub fn build_adjacency(graph: &PropertyGraph) -> Array2<f64> {
    let n = graph.len();
    let mut a = Array2::zeros((n, n));
    for e in graph.edges.iter().filter(|e| e.kind != EdgeKind::Cdg) {
        a[[e.src.index(), e.dst.index()]] = 1.0;
    }
    a
}

/// A vectorized graph: feature matrix `x` and adjacency `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct VecCpg {
    pub x: Array2<f64>,
    pub a: Array2<f64>,
}

impl VecCpg {
    pub fn new(graph: &PropertyGraph, vocab: &FunctionVocabulary) -> Self {
        VecCpg { x: build_feature_matrix(graph, vocab), a: build_adjacency(graph) }
    }

    pub fn num_nodes(&self) -> usize {
        self.x.nrows()
    }

    /// `{"x": [[0|1,...],...], "a": [[0|1,...],...]}`
    pub fn to_json_value(&self) -> serde_json::Value {
        fn rows(m: &Array2<f64>) -> Vec<Vec<u8>> {
            m.rows().into_iter().map(|r| r.iter().map(|&v| v as u8).collect()).collect()
        }
        serde_json::json!({ "x": rows(&self.x), "a": rows(&self.a) })
    }
}
