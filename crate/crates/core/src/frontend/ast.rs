use std::collections::BTreeSet;
use std::fmt;

use serde::{Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Node labels, in the fixed order used by the feature encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NodeLabel {
    Identifier,
    Literal,
    Local,
    Block,
    MethodReturn,
    Method,
    ControlStructure,
    FieldIdentifier,
    Unknown,
    Return,
    Param,
    JumpTarget,
    Call,
}

impl NodeLabel {
    pub const ALL: [NodeLabel; 13] = [
        NodeLabel::Identifier,
        NodeLabel::Literal,
        NodeLabel::Local,
        NodeLabel::Block,
        NodeLabel::MethodReturn,
        NodeLabel::Method,
        NodeLabel::ControlStructure,
        NodeLabel::FieldIdentifier,
        NodeLabel::Unknown,
        NodeLabel::Return,
        NodeLabel::Param,
        NodeLabel::JumpTarget,
        NodeLabel::Call,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeLabel::Identifier => "IDENTIFIER",
            NodeLabel::Literal => "LITERAL",
            NodeLabel::Local => "LOCAL",
            NodeLabel::Block => "BLOCK",
            NodeLabel::MethodReturn => "METHOD_RETURN",
            NodeLabel::Method => "METHOD",
            NodeLabel::ControlStructure => "CONTROL_STRUCTURE",
            NodeLabel::FieldIdentifier => "FIELD_IDENTIFIER",
            NodeLabel::Unknown => "UNKNOWN",
            NodeLabel::Return => "RETURN",
            NodeLabel::Param => "PARAM",
            NodeLabel::JumpTarget => "JUMP_TARGET",
            NodeLabel::Call => "CALL",
        }
    }
}

impl fmt::Display for NodeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The 25 tabled operator meanings, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OperatorKind {
    Assignment,
    IndirectIndexAccess,
    SizeOf,
    Multiplication,
    Cast,
    Subtraction,
    FieldAccess,
    LessThan,
    PostIncrement,
    AddressOf,
    Addition,
    Equals,
    Indirection,
    Minus,
    NotEquals,
    GreaterEqualsThan,
    IndirectFieldAccess,
    LogicalOr,
    Division,
    LogicalAnd,
    Delete,
    And,
    GreaterThan,
    Modulo,
    New,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 25] = [
        OperatorKind::Assignment,
        OperatorKind::IndirectIndexAccess,
        OperatorKind::SizeOf,
        OperatorKind::Multiplication,
        OperatorKind::Cast,
        OperatorKind::Subtraction,
        OperatorKind::FieldAccess,
        OperatorKind::LessThan,
        OperatorKind::PostIncrement,
        OperatorKind::AddressOf,
        OperatorKind::Addition,
        OperatorKind::Equals,
        OperatorKind::Indirection,
        OperatorKind::Minus,
        OperatorKind::NotEquals,
        OperatorKind::GreaterEqualsThan,
        OperatorKind::IndirectFieldAccess,
        OperatorKind::LogicalOr,
        OperatorKind::Division,
        OperatorKind::LogicalAnd,
        OperatorKind::Delete,
        OperatorKind::And,
        OperatorKind::GreaterThan,
        OperatorKind::Modulo,
        OperatorKind::New,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OperatorKind::Assignment => "assignment",
            OperatorKind::IndirectIndexAccess => "indirectIndexAccess",
            OperatorKind::SizeOf => "sizeOf",
            OperatorKind::Multiplication => "multiplication",
            OperatorKind::Cast => "cast",
            OperatorKind::Subtraction => "subtraction",
            OperatorKind::FieldAccess => "fieldAccess",
            OperatorKind::LessThan => "lessThan",
            OperatorKind::PostIncrement => "postIncrement",
            OperatorKind::AddressOf => "addressOf",
            OperatorKind::Addition => "addition",
            OperatorKind::Equals => "equals",
            OperatorKind::Indirection => "indirection",
            OperatorKind::Minus => "minus",
            OperatorKind::NotEquals => "notEquals",
            OperatorKind::GreaterEqualsThan => "greaterEqualsThan",
            OperatorKind::IndirectFieldAccess => "indirectFieldAccess",
            OperatorKind::LogicalOr => "logicalOr",
            OperatorKind::Division => "division",
            OperatorKind::LogicalAnd => "logicalAnd",
            OperatorKind::Delete => "delete",
            OperatorKind::And => "and",
            OperatorKind::GreaterThan => "greaterThan",
            OperatorKind::Modulo => "modulo",
            OperatorKind::New => "new",
        }
    }

    /// Binary infix operators that have a tabled meaning.
    pub fn binary(symbol: &str) -> Option<OperatorKind> {
        Some(match symbol {
            "=" => OperatorKind::Assignment,
            "*" => OperatorKind::Multiplication,
            "-" => OperatorKind::Subtraction,
            "<" => OperatorKind::LessThan,
            "+" => OperatorKind::Addition,
            "==" => OperatorKind::Equals,
            "!=" => OperatorKind::NotEquals,
            ">=" => OperatorKind::GreaterEqualsThan,
            "||" => OperatorKind::LogicalOr,
            "/" => OperatorKind::Division,
            "&&" => OperatorKind::LogicalAnd,
            "&" => OperatorKind::And,
            ">" => OperatorKind::GreaterThan,
            "%" => OperatorKind::Modulo,
            _ => return None,
        })
    }

    /// Prefix unary operators that have a tabled meaning.
    pub fn prefix(symbol: &str) -> Option<OperatorKind> {
        Some(match symbol {
            "-" => OperatorKind::Minus,
            "*" => OperatorKind::Indirection,
            "&" => OperatorKind::AddressOf,
            _ => return None,
        })
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Operator carried by an operator-application CALL node. Operators outside
/// the 25 tabled meanings keep their spelling and encode as "unknown".
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Operator {
    Known(OperatorKind),
    Unlisted(String),
}

impl Operator {
    pub fn kind(&self) -> Option<OperatorKind> {
        match self {
            Operator::Known(k) => Some(*k),
            Operator::Unlisted(_) => None,
        }
    }

    pub fn is(&self, kind: OperatorKind) -> bool {
        self.kind() == Some(kind)
    }

    pub fn as_str(&self) -> &str {
        match self {
            Operator::Known(k) => k.as_str(),
            Operator::Unlisted(s) => s,
        }
    }
}

impl From<OperatorKind> for Operator {
    fn from(k: OperatorKind) -> Self {
        Operator::Known(k)
    }
}

impl Serialize for Operator {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BasicType {
    Char,
    Int,
    Short,
    Float,
    Double,
    Long,
    String,
    Void,
    Struct,
    Union,
}

impl BasicType {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BasicType::Char => "char",
            BasicType::Int => "int",
            BasicType::Short => "short",
            BasicType::Float => "float",
            BasicType::Double => "double",
            BasicType::Long => "long",
            BasicType::String => "string",
            BasicType::Void => "void",
            BasicType::Struct => "struct",
            BasicType::Union => "union",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ComplexType {
    Signed,
    Unsigned,
    Pointer,
    Array,
    Map,
    Vector,
}

impl ComplexType {
    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct TypeAnnotation {
    pub basic: BasicType,
    pub complex: BTreeSet<ComplexType>,
}

impl TypeAnnotation {
    pub fn basic(basic: BasicType) -> Self {
        TypeAnnotation { basic, complex: BTreeSet::new() }
    }

    pub fn with(mut self, c: ComplexType) -> Self {
        self.complex.insert(c);
        self
    }
}

impl fmt::Display for TypeAnnotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.complex {
            match c {
                ComplexType::Signed => f.write_str("signed ")?,
                ComplexType::Unsigned => f.write_str("unsigned ")?,
                _ => {}
            }
        }
        f.write_str(self.basic.as_str())?;
        for c in &self.complex {
            match c {
                ComplexType::Pointer => f.write_str(" *")?,
                ComplexType::Array => f.write_str("[]")?,
                ComplexType::Map => f.write_str(" map")?,
                ComplexType::Vector => f.write_str(" vector")?,
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LiteralValue {
    Int32(i32),
    Float32(f32),
    Char(u32),
    /// Byte length of the decoded string contents.
    String(u32),
    /// Integer literal that does not fit in 32 bits; encodes as all zeros.
    OutOfRange,
}

/// Structural detail for CONTROL_STRUCTURE and JUMP_TARGET nodes.
///
/// Child layout: `If` = [cond, then, else?], `While` = [cond, body],
/// `DoWhile` = [body, cond], `For` = [init?, cond?, update?, body],
/// `Switch` = [cond, body]. Jumps and targets have no children.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControlKind {
    If { has_else: bool },
    While,
    DoWhile,
    For { init: bool, cond: bool, update: bool },
    Switch,
    Goto,
    Break,
    Continue,
    Label,
    Case,
    Default,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AstNode {
    pub id: NodeId,
    pub label: NodeLabel,
    pub code: String,
    /// Variable, parameter, label or member name where one applies.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub operator: Option<Operator>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub callee: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub literal: Option<LiteralValue>,
    #[serde(rename = "type", skip_serializing_if = "Option::is_none")]
    pub type_ann: Option<TypeAnnotation>,
    #[serde(skip)]
    pub control: Option<ControlKind>,
    #[serde(skip)]
    pub line: u32,
    #[serde(skip)]
    pub children: Vec<NodeId>,
}

impl AstNode {
    pub fn new(id: NodeId, label: NodeLabel, code: impl Into<String>) -> Self {
        AstNode {
            id,
            label,
            code: code.into(),
            name: None,
            operator: None,
            callee: None,
            literal: None,
            type_ann: None,
            control: None,
            line: 0,
            children: Vec::new(),
        }
    }

    pub fn is_operator(&self, kind: OperatorKind) -> bool {
        self.operator.as_ref().is_some_and(|op| op.is(kind))
    }
}

/// A parsed function: nodes are stored in pre-order, so `nodes[i].id == NodeId(i)`
/// and the METHOD root is node 0.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionAst {
    pub name: String,
    pub nodes: Vec<AstNode>,
    /// Names of functions called by name from the body.
    pub callees: BTreeSet<String>,
    /// Source text of the whole definition.
    pub text: String,
    pub line: u32,
}

impl FunctionAst {
    pub fn root(&self) -> &AstNode {
        &self.nodes[0]
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

    /// Parent-child pairs in pre-order, children in order.
    pub fn tree_edges(&self) -> Vec<(NodeId, NodeId)> {
        self.nodes.iter().flat_map(|n| n.children.iter().map(move |&c| (n.id, c))).collect()
    }

    pub fn method_return(&self) -> NodeId {
        *self.root().children.last().expect("METHOD always has a METHOD_RETURN child")
    }

    pub fn count_label(&self, label: NodeLabel) -> usize {
        self.nodes.iter().filter(|n| n.label == label).count()
    }
}

#[derive(Serialize)]
struct AstDocument<'a> {
    function: &'a str,
    nodes: &'a [AstNode],
    edges: Vec<[usize; 2]>,
}

impl FunctionAst {
    /// `{function, nodes: [...], edges: [[parent, child], ...]}`
    pub fn to_json_value(&self) -> serde_json::Value {
        let doc = AstDocument {
            function: &self.name,
            nodes: &self.nodes,
            edges: self.tree_edges().into_iter().map(|(p, c)| [p.0, c.0]).collect(),
        };
        serde_json::to_value(doc).expect("AST serialization is infallible")
    }
}
