//! Recursive-descent parser for the supported C subset.
//!
//! Statements the grammar does not cover are kept as UNKNOWN nodes when the
//! parser can find where they end (a `;` or a balanced block at nesting depth
//! zero); only unrecoverable violations surface as [`ParseError`].

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use super::ast::*;
use super::token::{tokenize, LexError, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at {line}:{col}: expected {expected}, found {found}")]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub expected: String,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

type PResult<T> = Result<T, ParseError>;

const MAX_DEPTH: usize = 200;

/// Parses a source containing exactly one function definition.
pub fn parse_function(source: &str) -> Result<FunctionAst, FrontendError> {
    let mut functions = parse_unit(source)?;
    match functions.len() {
        1 => Ok(functions.remove(0)),
        n => {
            let tokens = tokenize(source)?;
            let (line, col) = tokens.last().map_or((1, 1), |t| (t.line, t.col));
            Err(ParseError {
                line,
                col,
                expected: "exactly one function definition".into(),
                found: format!("{n} function definitions"),
            }
            .into())
        }
    }
}

/// Parses every function definition of a translation unit, in source order.
/// Top-level content other than function definitions is skipped.
pub fn parse_unit(source: &str) -> Result<Vec<FunctionAst>, FrontendError> {
    let tokens = tokenize(source)?;
    let mut parser = Parser::new(source, &tokens);
    Ok(parser.unit()?)
}

// Intermediate owned tree; flattened into pre-order ids once a function is done.
#[derive(Debug, Clone)]
struct PNode {
    label: NodeLabel,
    code: String,
    name: Option<String>,
    operator: Option<Operator>,
    callee: Option<String>,
    literal: Option<LiteralValue>,
    type_ann: Option<TypeAnnotation>,
    control: Option<ControlKind>,
    line: u32,
    children: Vec<PNode>,
}

impl PNode {
    fn new(label: NodeLabel, code: impl Into<String>, line: u32) -> Self {
        PNode {
            label,
            code: code.into(),
            name: None,
            operator: None,
            callee: None,
            literal: None,
            type_ann: None,
            control: None,
            line,
            children: Vec::new(),
        }
    }

    fn with_children(mut self, children: Vec<PNode>) -> Self {
        self.children = children;
        self
    }

    fn flatten(self, nodes: &mut Vec<AstNode>) -> NodeId {
        let id = NodeId(nodes.len());
        let mut node = AstNode::new(id, self.label, self.code);
        node.name = self.name;
        node.operator = self.operator;
        node.callee = self.callee;
        node.literal = self.literal;
        node.type_ann = self.type_ann;
        node.control = self.control;
        node.line = self.line;
        nodes.push(node);
        let children = self.children.into_iter().map(|c| c.flatten(nodes)).collect();
        nodes[id.index()].children = children;
        id
    }
}

struct ParsedType {
    ty: TypeAnnotation,
    /// Whether the base type came from an identifier we know nothing about.
    guessed: bool,
}

const QUALIFIERS: &[&str] =
    &["const", "volatile", "static", "extern", "register", "inline", "auto", "virtual", "typename", "restrict"];
const BASE_TYPE_KEYWORDS: &[&str] = &["char", "int", "short", "float", "double", "long", "void", "bool", "_Bool"];

fn known_typedef(name: &str) -> Option<TypeAnnotation> {
    use BasicType as B;
    use ComplexType as C;
    let last = name.rsplit("::").next().unwrap_or(name);
    let t = match last {
        "size_t" | "uintptr_t" => TypeAnnotation::basic(B::Long).with(C::Unsigned),
        "ssize_t" | "intptr_t" | "ptrdiff_t" | "off_t" | "time_t" | "int64_t" | "__int64" => {
            TypeAnnotation::basic(B::Long)
        }
        "uint64_t" => TypeAnnotation::basic(B::Long).with(C::Unsigned),
        "int32_t" => TypeAnnotation::basic(B::Int),
        "uint32_t" => TypeAnnotation::basic(B::Int).with(C::Unsigned),
        "int16_t" => TypeAnnotation::basic(B::Short),
        "uint16_t" => TypeAnnotation::basic(B::Short).with(C::Unsigned),
        "int8_t" => TypeAnnotation::basic(B::Char).with(C::Signed),
        "uint8_t" | "BYTE" => TypeAnnotation::basic(B::Char).with(C::Unsigned),
        "wchar_t" | "char16_t" | "char32_t" => TypeAnnotation::basic(B::Char),
        "string" | "wstring" => TypeAnnotation::basic(B::String),
        "FILE" => TypeAnnotation::basic(B::Struct),
        _ if last.ends_with("_t") => TypeAnnotation::basic(B::Struct),
        _ => return None,
    };
    Some(t)
}

struct Parser<'a> {
    src: &'a str,
    toks: &'a [Token],
    pos: usize,
    scopes: Vec<HashMap<String, TypeAnnotation>>,
    callees: BTreeSet<String>,
    depth: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, toks: &'a [Token]) -> Self {
        Parser { src, toks, pos: 0, scopes: Vec::new(), callees: BTreeSet::new(), depth: 0 }
    }

    // ---- token helpers ----

    fn peek(&self) -> Option<&'a Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, n: usize) -> Option<&'a Token> {
        self.toks.get(self.pos + n)
    }

    fn at_punct(&self, p: &str) -> bool {
        self.peek().is_some_and(|t| t.is_punct(p))
    }

    fn at_op(&self, p: &str) -> bool {
        self.peek().is_some_and(|t| t.is_op(p))
    }

    fn at_kw(&self, k: &str) -> bool {
        self.peek().is_some_and(|t| t.is_keyword(k))
    }

    fn at_ident(&self) -> bool {
        self.peek().is_some_and(|t| t.kind == TokenKind::Identifier)
    }

    fn advance(&mut self) -> &'a Token {
        let t = &self.toks[self.pos];
        self.pos += 1;
        t
    }

    fn line(&self) -> u32 {
        self.peek().or_else(|| self.toks.last()).map_or(1, |t| t.line)
    }

    fn error(&self, expected: impl Into<String>) -> ParseError {
        match self.peek() {
            Some(t) => ParseError { line: t.line, col: t.col, expected: expected.into(), found: format!("`{}`", t.text) },
            None => {
                let (line, col) = self.toks.last().map_or((1, 1), |t| (t.line, t.col + t.text.chars().count() as u32));
                ParseError { line, col, expected: expected.into(), found: "end of input".into() }
            }
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.at_punct(p) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("`{p}`")))
        }
    }

    fn expect_ident(&mut self) -> PResult<&'a Token> {
        if self.at_ident() {
            Ok(self.advance())
        } else {
            Err(self.error("identifier"))
        }
    }

    /// Source excerpt from token `start` up to the last consumed token.
    fn code_from(&self, start: usize) -> String {
        if self.pos <= start {
            return String::new();
        }
        let from = self.toks[start].offset;
        let to = self.toks[self.pos - 1].end();
        self.src[from..to].to_string()
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.error("shallower nesting"));
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    // ---- scopes ----

    fn lookup(&self, name: &str) -> Option<&TypeAnnotation> {
        self.scopes.iter().rev().find_map(|s| s.get(name))
    }

    fn declare(&mut self, name: &str, ty: &TypeAnnotation) {
        if let Some(scope) = self.scopes.last_mut() {
            scope.insert(name.to_string(), ty.clone());
        }
    }

    // ---- translation unit ----

    fn unit(&mut self) -> PResult<Vec<FunctionAst>> {
        let mut functions = Vec::new();
        while let Some(t) = self.peek() {
            if t.is_punct(";") || t.is_punct("}") {
                self.pos += 1;
            } else if t.is_keyword("namespace") {
                self.pos += 1;
                while self.at_ident() || self.at_op("::") {
                    self.pos += 1;
                }
                if self.at_punct("{") {
                    self.pos += 1;
                }
            } else if t.is_keyword("extern") && self.peek_at(1).is_some_and(|n| n.kind == TokenKind::StringLiteral) {
                self.pos += 2;
                if self.at_punct("{") {
                    self.pos += 1;
                }
            } else if t.is_keyword("using") || t.is_keyword("typedef") || t.is_keyword("template") {
                self.skip_item();
            } else if self.function_header_ahead() {
                functions.push(self.function_definition()?);
            } else {
                self.skip_item();
            }
        }
        Ok(functions)
    }

    /// Skips one top-level item: up to a `;` at depth zero, or through a balanced
    /// brace block (and a directly following `;`).
    fn skip_item(&mut self) {
        let mut depth = 0i32;
        while let Some(t) = self.peek() {
            if t.kind == TokenKind::Punctuation {
                match t.text.as_str() {
                    "(" | "[" => depth += 1,
                    ")" | "]" => depth -= 1,
                    ";" if depth <= 0 => {
                        self.pos += 1;
                        return;
                    }
                    "{" => {
                        self.skip_braces();
                        if depth <= 0 {
                            if self.at_punct(";") {
                                self.pos += 1;
                            }
                            return;
                        }
                        continue;
                    }
                    "}" => {
                        self.pos += 1;
                        return;
                    }
                    _ => {}
                }
            }
            self.pos += 1;
        }
    }

    /// Consumes a balanced `{ ... }`; returns false if input ends first.
    fn skip_braces(&mut self) -> bool {
        let mut depth = 0usize;
        while let Some(t) = self.peek() {
            self.pos += 1;
            if t.is_punct("{") {
                depth += 1;
            } else if t.is_punct("}") {
                depth -= 1;
                if depth == 0 {
                    return true;
                }
            }
        }
        false
    }

    fn function_header_ahead(&mut self) -> bool {
        let save = self.pos;
        let ok = (|| {
            self.parse_type()?;
            self.skip_pointer_marks();
            self.qualified_name()?;
            if !self.at_punct("(") {
                return None;
            }
            let mut depth = 0usize;
            loop {
                let t = self.peek()?;
                self.pos += 1;
                if t.is_punct("(") {
                    depth += 1;
                } else if t.is_punct(")") {
                    depth -= 1;
                    if depth == 0 {
                        break;
                    }
                } else if t.is_punct("{") || t.is_punct(";") {
                    return None;
                }
            }
            if self.at_kw("const") {
                self.pos += 1;
            }
            self.at_punct("{").then_some(())
        })()
        .is_some();
        self.pos = save;
        ok
    }

    fn qualified_name(&mut self) -> Option<String> {
        if !self.at_ident() {
            return None;
        }
        let mut name = self.advance().text.clone();
        while self.at_op("::") && self.peek_at(1).is_some_and(|t| t.kind == TokenKind::Identifier) {
            self.pos += 1;
            name.push_str("::");
            name.push_str(&self.advance().text);
        }
        Some(name)
    }

    fn skip_pointer_marks(&mut self) -> usize {
        let mut n = 0;
        loop {
            if self.at_op("*") || self.at_op("&") || self.at_op("&&") {
                n += 1;
                self.pos += 1;
            } else if self.at_kw("const") || self.at_kw("volatile") || self.at_kw("restrict") {
                self.pos += 1;
            } else {
                return n;
            }
        }
    }

    fn function_definition(&mut self) -> PResult<FunctionAst> {
        let start = self.pos;
        let line = self.line();
        while self.at_kw("static") || self.at_kw("inline") || self.at_kw("extern") {
            self.pos += 1;
        }
        let ret_start = self.pos;
        let ret = self.parse_type().ok_or_else(|| self.error("return type"))?;
        let mut ret_ty = ret.ty;
        if self.skip_pointer_marks() > 0 {
            ret_ty.complex.insert(ComplexType::Pointer);
        }
        let ret_code = self.code_from(ret_start);
        let name = self.qualified_name().ok_or_else(|| self.error("function name"))?;

        self.scopes.clear();
        self.scopes.push(HashMap::new());
        self.callees.clear();

        self.expect_punct("(")?;
        let mut params = Vec::new();
        if self.at_kw("void") && self.peek_at(1).is_some_and(|t| t.is_punct(")")) {
            self.pos += 1;
        }
        while !self.at_punct(")") {
            if self.at_op("...") {
                self.pos += 1;
            } else {
                params.push(self.parameter()?);
            }
            if self.at_punct(",") {
                self.pos += 1;
            } else if !self.at_punct(")") {
                return Err(self.error("`,` or `)`"));
            }
        }
        self.pos += 1;
        let signature = self.code_from(start);
        if self.at_kw("const") {
            self.pos += 1;
        }
        if !self.at_punct("{") {
            return Err(self.error("`{`"));
        }
        let body = self.block()?;
        let text = self.code_from(start);

        let mut method_return = PNode::new(NodeLabel::MethodReturn, ret_code, self.toks[self.pos - 1].line);
        method_return.type_ann = Some(ret_ty);
        let mut method = PNode::new(NodeLabel::Method, signature, line);
        method.name = Some(name.clone());
        method.children = params;
        method.children.push(body);
        method.children.push(method_return);

        let mut nodes = Vec::new();
        method.flatten(&mut nodes);
        self.scopes.clear();
        Ok(FunctionAst { name, nodes, callees: std::mem::take(&mut self.callees), text, line })
    }

    fn parameter(&mut self) -> PResult<PNode> {
        let start = self.pos;
        let line = self.line();
        let base = self.parse_type().ok_or_else(|| self.error("parameter type"))?;
        let mut ty = base.ty;
        if self.skip_pointer_marks() > 0 {
            ty.complex.insert(ComplexType::Pointer);
        }
        let name = if self.at_ident() { Some(self.advance().text.clone()) } else { None };
        self.array_suffix(&mut ty)?;
        if let Some(n) = &name {
            self.declare(n, &ty);
        }
        let mut p = PNode::new(NodeLabel::Param, self.code_from(start), line);
        p.name = name;
        p.type_ann = Some(ty);
        Ok(p)
    }

    fn array_suffix(&mut self, ty: &mut TypeAnnotation) -> PResult<()> {
        while self.at_punct("[") {
            self.pos += 1;
            if !self.at_punct("]") {
                self.conditional()?;
            }
            self.expect_punct("]")?;
            ty.complex.insert(ComplexType::Array);
        }
        Ok(())
    }

    // ---- types ----

    /// Speculatively parses declaration specifiers; restores the position on failure.
    /// Identifiers are accepted as type names unless they name a variable in scope.
    fn parse_type(&mut self) -> Option<ParsedType> {
        let save = self.pos;
        let result = self.parse_type_inner();
        if result.is_none() {
            self.pos = save;
        }
        result
    }

    fn parse_type_inner(&mut self) -> Option<ParsedType> {
        let mut words: Vec<&str> = Vec::new();
        let mut complex = BTreeSet::new();
        let mut tagged: Option<BasicType> = None;
        let mut named: Option<(TypeAnnotation, bool)> = None;
        while let Some(t) = self.peek() {
            match t.kind {
                TokenKind::Keyword if QUALIFIERS.contains(&t.text.as_str()) => {
                    self.pos += 1;
                }
                TokenKind::Keyword if t.text == "signed" => {
                    complex.insert(ComplexType::Signed);
                    self.pos += 1;
                }
                TokenKind::Keyword if t.text == "unsigned" => {
                    complex.insert(ComplexType::Unsigned);
                    self.pos += 1;
                }
                TokenKind::Keyword if BASE_TYPE_KEYWORDS.contains(&t.text.as_str()) => {
                    if tagged.is_some() || named.is_some() {
                        break;
                    }
                    words.push(t.text.as_str());
                    self.pos += 1;
                }
                TokenKind::Keyword if matches!(t.text.as_str(), "struct" | "union" | "enum" | "class") => {
                    if tagged.is_some() || named.is_some() || !words.is_empty() {
                        break;
                    }
                    tagged = Some(match t.text.as_str() {
                        "union" => BasicType::Union,
                        "enum" => BasicType::Int,
                        _ => BasicType::Struct,
                    });
                    self.pos += 1;
                    if self.at_ident() {
                        self.qualified_name();
                    }
                }
                TokenKind::Identifier => {
                    if tagged.is_some() || named.is_some() || !words.is_empty() || !complex.is_empty() {
                        break;
                    }
                    // A variable in scope is never a type name.
                    if self.lookup(&t.text).is_some() {
                        break;
                    }
                    let name = self.qualified_name()?;
                    let last = name.rsplit("::").next().unwrap_or(&name).to_string();
                    let known = known_typedef(&name);
                    if self.at_op("<") {
                        named = Some((self.template_args(&last)?, false));
                    } else {
                        let guessed = known.is_none();
                        named = Some((known.unwrap_or_else(|| TypeAnnotation::basic(BasicType::Struct)), guessed));
                    }
                }
                _ => break,
            }
        }
        let (mut ty, guessed) = if let Some(b) = tagged {
            (TypeAnnotation::basic(b), false)
        } else if let Some(n) = named {
            n
        } else if !words.is_empty() || !complex.is_empty() {
            let has = |w: &str| words.contains(&w);
            let basic = if has("char") {
                BasicType::Char
            } else if has("short") {
                BasicType::Short
            } else if has("float") {
                BasicType::Float
            } else if has("double") {
                BasicType::Double
            } else if has("long") {
                BasicType::Long
            } else if has("void") {
                BasicType::Void
            } else {
                BasicType::Int
            };
            (TypeAnnotation::basic(basic), false)
        } else {
            return None;
        };
        ty.complex.extend(complex);
        Some(ParsedType { ty, guessed })
    }

    /// `vector<T>` and `map<K, V>`; other templates keep a struct base type.
    fn template_args(&mut self, name: &str) -> Option<TypeAnnotation> {
        self.pos += 1; // <
        let mut args = Vec::new();
        loop {
            let mut t = self.parse_type()?.ty;
            if self.skip_pointer_marks() > 0 {
                t.complex.insert(ComplexType::Pointer);
            }
            args.push(t);
            if self.at_punct(",") {
                self.pos += 1;
            } else if self.at_op(">") {
                self.pos += 1;
                break;
            } else {
                return None;
            }
        }
        let last = args.last().cloned()?;
        Some(match name {
            "vector" => TypeAnnotation { basic: last.basic, complex: last.complex }.with(ComplexType::Vector),
            "map" => TypeAnnotation { basic: last.basic, complex: last.complex }.with(ComplexType::Map),
            "basic_string" => TypeAnnotation::basic(BasicType::String),
            _ => TypeAnnotation::basic(BasicType::Struct),
        })
    }

    fn declaration_ahead(&mut self) -> bool {
        let Some(t) = self.peek() else { return false };
        if t.kind == TokenKind::Keyword {
            let w = t.text.as_str();
            return QUALIFIERS.contains(&w)
                || BASE_TYPE_KEYWORDS.contains(&w)
                || matches!(w, "signed" | "unsigned" | "struct" | "union" | "enum" | "class");
        }
        if t.kind != TokenKind::Identifier {
            return false;
        }
        let save = self.pos;
        let ok = self.parse_type().is_some() && {
            self.skip_pointer_marks();
            self.at_ident()
                && self.peek_at(1).is_some_and(|n| {
                    n.is_op("=") || n.is_punct(";") || n.is_punct(",") || n.is_punct("[")
                })
        };
        self.pos = save;
        ok
    }

    fn cast_ahead(&mut self) -> bool {
        if !self.at_punct("(") {
            return false;
        }
        let save = self.pos;
        self.pos += 1;
        let ok = match self.parse_type() {
            Some(parsed) => {
                let stars = self.skip_pointer_marks();
                let known_ident = parsed.guessed && {
                    // An unknown identifier only reads as a type with a pointer mark.
                    stars > 0
                };
                self.at_punct(")") && (!parsed.guessed || known_ident)
            }
            None => false,
        };
        self.pos = save;
        ok
    }

    // ---- statements ----

    fn block(&mut self) -> PResult<PNode> {
        let start = self.pos;
        let line = self.line();
        self.expect_punct("{")?;
        self.scopes.push(HashMap::new());
        let mut children = Vec::new();
        while !self.at_punct("}") {
            if self.peek().is_none() {
                self.scopes.pop();
                return Err(self.error("`}`"));
            }
            children.extend(self.statement_recovering()?);
        }
        self.pos += 1;
        self.scopes.pop();
        let _ = start;
        Ok(PNode::new(NodeLabel::Block, "{...}", line).with_children(children))
    }

    fn statement_recovering(&mut self) -> PResult<Vec<PNode>> {
        let start = self.pos;
        let scope_depth = self.scopes.len();
        let depth = self.depth;
        match self.statement() {
            Ok(v) => Ok(v),
            Err(e) => {
                self.scopes.truncate(scope_depth);
                self.depth = depth;
                match self.recover(start) {
                    Some(n) => Ok(vec![n]),
                    None => {
                        self.pos = start;
                        Err(e)
                    }
                }
            }
        }
    }

    /// Re-scans from `start` to the end of the statement and wraps it as UNKNOWN.
    fn recover(&mut self, start: usize) -> Option<PNode> {
        self.pos = start;
        let line = self.line();
        let mut depth = 0i32;
        while let Some(t) = self.peek() {
            if t.kind == TokenKind::Punctuation {
                match t.text.as_str() {
                    "(" | "[" => depth += 1,
                    ")" | "]" => depth -= 1,
                    ";" if depth <= 0 => {
                        self.pos += 1;
                        break;
                    }
                    "{" => {
                        if !self.skip_braces() {
                            return None;
                        }
                        if depth <= 0 {
                            if self.at_punct(";") {
                                self.pos += 1;
                            }
                            break;
                        }
                        continue;
                    }
                    "}" => break,
                    _ => {}
                }
            }
            self.pos += 1;
        }
        if self.pos == start {
            return None;
        }
        if self.peek().is_none() && !self.toks[self.pos - 1].is_punct(";") && !self.toks[self.pos - 1].is_punct("}") {
            return None;
        }
        Some(PNode::new(NodeLabel::Unknown, self.code_from(start), line))
    }

    /// A statement used as the body of a control structure: always one node.
    fn body_statement(&mut self) -> PResult<PNode> {
        let line = self.line();
        self.scopes.push(HashMap::new());
        let stmts = self.statement_recovering();
        self.scopes.pop();
        let mut stmts = stmts?;
        if stmts.len() == 1 {
            Ok(stmts.remove(0))
        } else {
            Ok(PNode::new(NodeLabel::Block, "{...}", line).with_children(stmts))
        }
    }

    fn statement(&mut self) -> PResult<Vec<PNode>> {
        self.enter()?;
        let r = self.statement_inner();
        self.leave();
        r
    }

    fn statement_inner(&mut self) -> PResult<Vec<PNode>> {
        let Some(t) = self.peek() else { return Err(self.error("statement")) };
        let start = self.pos;
        let line = t.line;
        if t.is_punct("{") {
            return Ok(vec![self.block()?]);
        }
        if t.is_punct(";") {
            self.pos += 1;
            return Ok(vec![]);
        }
        if t.kind == TokenKind::Keyword {
            match t.text.as_str() {
                "if" => return Ok(vec![self.if_statement()?]),
                "while" => {
                    self.pos += 1;
                    let cond = self.paren_condition()?;
                    let code = self.code_from(start);
                    let body = self.body_statement()?;
                    return Ok(vec![control(ControlKind::While, code, line, vec![cond, body])]);
                }
                "do" => {
                    self.pos += 1;
                    let body = self.body_statement()?;
                    if !self.at_kw("while") {
                        return Err(self.error("`while`"));
                    }
                    let head = self.pos;
                    self.pos += 1;
                    let cond = self.paren_condition()?;
                    let code = format!("do ... {}", self.code_from(head));
                    self.expect_punct(";")?;
                    return Ok(vec![control(ControlKind::DoWhile, code, line, vec![body, cond])]);
                }
                "for" => return self.for_statement(),
                "switch" => {
                    self.pos += 1;
                    let cond = self.paren_condition()?;
                    let code = self.code_from(start);
                    let body = self.body_statement()?;
                    return Ok(vec![control(ControlKind::Switch, code, line, vec![cond, body])]);
                }
                "return" => {
                    self.pos += 1;
                    let mut children = Vec::new();
                    if !self.at_punct(";") {
                        children.push(self.expression()?);
                    }
                    self.expect_punct(";")?;
                    return Ok(vec![PNode::new(NodeLabel::Return, self.code_from(start), line).with_children(children)]);
                }
                "goto" => {
                    self.pos += 1;
                    let label = self.expect_ident()?.text.clone();
                    self.expect_punct(";")?;
                    let mut n = control(ControlKind::Goto, self.code_from(start), line, vec![]);
                    n.name = Some(label);
                    return Ok(vec![n]);
                }
                "break" | "continue" => {
                    let kind = if t.text == "break" { ControlKind::Break } else { ControlKind::Continue };
                    self.pos += 1;
                    self.expect_punct(";")?;
                    return Ok(vec![control(kind, self.code_from(start), line, vec![])]);
                }
                "case" => {
                    self.pos += 1;
                    self.conditional()?;
                    self.expect_punct(":")?;
                    let mut n = PNode::new(NodeLabel::JumpTarget, self.code_from(start), line);
                    n.control = Some(ControlKind::Case);
                    return Ok(vec![n]);
                }
                "default" => {
                    self.pos += 1;
                    self.expect_punct(":")?;
                    let mut n = PNode::new(NodeLabel::JumpTarget, self.code_from(start), line);
                    n.control = Some(ControlKind::Default);
                    return Ok(vec![n]);
                }
                _ => {}
            }
        }
        if t.kind == TokenKind::Identifier && self.peek_at(1).is_some_and(|n| n.is_punct(":")) {
            self.pos += 2;
            let mut n = PNode::new(NodeLabel::JumpTarget, self.code_from(start), line);
            n.name = Some(t.text.clone());
            n.control = Some(ControlKind::Label);
            return Ok(vec![n]);
        }
        if self.declaration_ahead() {
            return self.declaration();
        }
        let e = self.expression()?;
        self.expect_punct(";")?;
        Ok(vec![e])
    }

    fn paren_condition(&mut self) -> PResult<PNode> {
        self.expect_punct("(")?;
        let cond = self.expression()?;
        self.expect_punct(")")?;
        Ok(cond)
    }

    fn if_statement(&mut self) -> PResult<PNode> {
        let start = self.pos;
        let line = self.line();
        self.pos += 1;
        let cond = self.paren_condition()?;
        let code = self.code_from(start);
        let then = self.body_statement()?;
        let mut children = vec![cond, then];
        if self.at_kw("else") {
            self.pos += 1;
            children.push(self.body_statement()?);
        }
        let has_else = children.len() == 3;
        Ok(control(ControlKind::If { has_else }, code, line, children))
    }

    fn for_statement(&mut self) -> PResult<Vec<PNode>> {
        let start = self.pos;
        let line = self.line();
        self.pos += 1;
        self.expect_punct("(")?;
        self.scopes.push(HashMap::new());
        let result = (|| {
            let mut hoisted = Vec::new();
            let init = if self.at_punct(";") {
                self.pos += 1;
                None
            } else if self.declaration_ahead() {
                let (locals, mut inits): (Vec<_>, Vec<_>) =
                    self.declaration()?.into_iter().partition(|n| n.label == NodeLabel::Local);
                hoisted = locals;
                match inits.len() {
                    0 => None,
                    1 => inits.pop(),
                    _ => Some(unlisted_call("comma", String::new(), line, inits)),
                }
            } else {
                let e = self.expression()?;
                self.expect_punct(";")?;
                Some(e)
            };
            let cond = if self.at_punct(";") { None } else { Some(self.expression()?) };
            self.expect_punct(";")?;
            let update = if self.at_punct(")") { None } else { Some(self.expression()?) };
            self.expect_punct(")")?;
            let code = self.code_from(start);
            let body = self.body_statement()?;
            let kind = ControlKind::For { init: init.is_some(), cond: cond.is_some(), update: update.is_some() };
            let mut children: Vec<PNode> = [init, cond, update].into_iter().flatten().collect();
            children.push(body);
            hoisted.push(control(kind, code, line, children));
            Ok(hoisted)
        })();
        self.scopes.pop();
        result
    }

    fn declaration(&mut self) -> PResult<Vec<PNode>> {
        let spec_start = self.pos;
        let base = self.parse_type().ok_or_else(|| self.error("type"))?.ty;
        let spec = self.code_from(spec_start);
        let mut out = Vec::new();
        loop {
            let decl_start = self.pos;
            let line = self.line();
            let mut ty = base.clone();
            if self.skip_pointer_marks() > 0 {
                ty.complex.insert(ComplexType::Pointer);
            }
            let name = self.expect_ident()?.text.clone();
            self.array_suffix(&mut ty)?;
            let declarator = self.code_from(decl_start);
            self.declare(&name, &ty);
            let mut local = PNode::new(NodeLabel::Local, format!("{spec} {declarator}"), line);
            local.name = Some(name.clone());
            local.type_ann = Some(ty.clone());
            out.push(local);
            if self.at_op("=") {
                self.pos += 1;
                let rhs = if self.at_punct("{") { self.brace_initializer()? } else { self.assignment()? };
                let mut target = PNode::new(NodeLabel::Identifier, name.clone(), line);
                target.name = Some(name);
                target.type_ann = Some(ty);
                let mut assign = PNode::new(NodeLabel::Call, self.code_from(decl_start), line);
                assign.operator = Some(OperatorKind::Assignment.into());
                assign.children = vec![target, rhs];
                out.push(assign);
            }
            if self.at_punct(",") {
                self.pos += 1;
            } else {
                break;
            }
        }
        self.expect_punct(";")?;
        Ok(out)
    }

    fn brace_initializer(&mut self) -> PResult<PNode> {
        let start = self.pos;
        let line = self.line();
        self.enter()?;
        self.expect_punct("{")?;
        let mut items = Vec::new();
        while !self.at_punct("}") {
            items.push(if self.at_punct("{") { self.brace_initializer()? } else { self.assignment()? });
            if self.at_punct(",") {
                self.pos += 1;
            } else if !self.at_punct("}") {
                return Err(self.error("`,` or `}`"));
            }
        }
        self.pos += 1;
        self.leave();
        Ok(unlisted_call("arrayInitializer", self.code_from(start), line, items))
    }

    // ---- expressions ----

    /// Full expression including the comma operator.
    fn expression(&mut self) -> PResult<PNode> {
        let start = self.pos;
        let line = self.line();
        let first = self.assignment()?;
        if !self.at_punct(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.at_punct(",") {
            self.pos += 1;
            items.push(self.assignment()?);
        }
        Ok(unlisted_call("comma", self.code_from(start), line, items))
    }

    fn assignment(&mut self) -> PResult<PNode> {
        self.enter()?;
        let start = self.pos;
        let line = self.line();
        let lhs = self.conditional()?;
        let result = match self.peek() {
            Some(t)
                if t.kind == TokenKind::Operator
                    && matches!(
                        t.text.as_str(),
                        "=" | "+=" | "-=" | "*=" | "/=" | "%=" | "&=" | "|=" | "^=" | "<<=" | ">>="
                    ) =>
            {
                self.pos += 1;
                let rhs = self.assignment()?;
                let op = match t.text.as_str() {
                    "=" => Operator::Known(OperatorKind::Assignment),
                    s => Operator::Unlisted(s.to_string()),
                };
                op_call(op, self.code_from(start), line, vec![lhs, rhs])
            }
            _ => lhs,
        };
        self.leave();
        Ok(result)
    }

    fn conditional(&mut self) -> PResult<PNode> {
        let start = self.pos;
        let line = self.line();
        let cond = self.binary(1)?;
        if !self.at_op("?") {
            return Ok(cond);
        }
        self.pos += 1;
        let then = self.expression()?;
        self.expect_punct(":")?;
        let otherwise = self.conditional()?;
        Ok(unlisted_call("conditional", self.code_from(start), line, vec![cond, then, otherwise]))
    }

    fn binary_precedence(t: &Token) -> Option<u8> {
        if t.kind != TokenKind::Operator {
            return None;
        }
        Some(match t.text.as_str() {
            "||" => 1,
            "&&" => 2,
            "|" => 3,
            "^" => 4,
            "&" => 5,
            "==" | "!=" => 6,
            "<" | ">" | "<=" | ">=" => 7,
            "<<" | ">>" => 8,
            "+" | "-" => 9,
            "*" | "/" | "%" => 10,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> PResult<PNode> {
        let start = self.pos;
        let line = self.line();
        let mut left = self.unary()?;
        while let Some(t) = self.peek() {
            let Some(prec) = Self::binary_precedence(t) else { break };
            if prec < min_prec {
                break;
            }
            self.pos += 1;
            let right = self.binary(prec + 1)?;
            let op = match OperatorKind::binary(&t.text) {
                Some(k) => Operator::Known(k),
                None => Operator::Unlisted(t.text.clone()),
            };
            left = op_call(op, self.code_from(start), line, vec![left, right]);
        }
        Ok(left)
    }

    fn unary(&mut self) -> PResult<PNode> {
        self.enter()?;
        let r = self.unary_inner();
        self.leave();
        r
    }

    fn unary_inner(&mut self) -> PResult<PNode> {
        let Some(t) = self.peek() else { return Err(self.error("expression")) };
        let start = self.pos;
        let line = t.line;
        if t.kind == TokenKind::Operator {
            let op = match t.text.as_str() {
                "++" => Some(Operator::Unlisted("preIncrement".into())),
                "--" => Some(Operator::Unlisted("preDecrement".into())),
                "+" => Some(Operator::Unlisted("plus".into())),
                "!" => Some(Operator::Unlisted("logicalNot".into())),
                "~" => Some(Operator::Unlisted("not".into())),
                s => OperatorKind::prefix(s).map(Operator::Known),
            };
            if let Some(op) = op {
                self.pos += 1;
                let operand = self.unary()?;
                return Ok(op_call(op, self.code_from(start), line, vec![operand]));
            }
        }
        if t.is_keyword("sizeof") {
            self.pos += 1;
            if self.cast_ahead() || (self.at_punct("(") && self.type_in_parens()) {
                self.pos += 1;
                let mut ty = self.parse_type().ok_or_else(|| self.error("type"))?.ty;
                if self.skip_pointer_marks() > 0 {
                    ty.complex.insert(ComplexType::Pointer);
                }
                self.expect_punct(")")?;
                let mut n = op_call(OperatorKind::SizeOf.into(), self.code_from(start), line, vec![]);
                n.type_ann = Some(ty);
                return Ok(n);
            }
            let operand = self.unary()?;
            return Ok(op_call(OperatorKind::SizeOf.into(), self.code_from(start), line, vec![operand]));
        }
        if t.is_keyword("new") {
            self.pos += 1;
            let mut ty = self.parse_type().ok_or_else(|| self.error("type"))?.ty;
            self.skip_pointer_marks();
            ty.complex.insert(ComplexType::Pointer);
            let mut children = Vec::new();
            if self.at_punct("[") {
                self.pos += 1;
                children.push(self.expression()?);
                self.expect_punct("]")?;
            } else if self.at_punct("(") {
                children = self.call_arguments()?;
            }
            let mut n = op_call(OperatorKind::New.into(), self.code_from(start), line, children);
            n.type_ann = Some(ty);
            return Ok(n);
        }
        if t.is_keyword("delete") {
            self.pos += 1;
            if self.at_punct("[") {
                self.pos += 1;
                self.expect_punct("]")?;
            }
            let operand = self.unary()?;
            return Ok(op_call(OperatorKind::Delete.into(), self.code_from(start), line, vec![operand]));
        }
        if self.cast_ahead() {
            self.pos += 1;
            let mut ty = self.parse_type().ok_or_else(|| self.error("type"))?.ty;
            if self.skip_pointer_marks() > 0 {
                ty.complex.insert(ComplexType::Pointer);
            }
            self.expect_punct(")")?;
            let operand = self.unary()?;
            let mut n = op_call(OperatorKind::Cast.into(), self.code_from(start), line, vec![operand]);
            n.type_ann = Some(ty);
            return Ok(n);
        }
        self.postfix()
    }

    // `sizeof(T)` where T is an identifier that is not a variable in scope.
    fn type_in_parens(&mut self) -> bool {
        let save = self.pos;
        self.pos += 1;
        let ok = self.parse_type().is_some() && {
            self.skip_pointer_marks();
            self.at_punct(")")
        };
        self.pos = save;
        ok
    }

    fn call_arguments(&mut self) -> PResult<Vec<PNode>> {
        self.expect_punct("(")?;
        let mut args = Vec::new();
        while !self.at_punct(")") {
            args.push(self.assignment()?);
            if self.at_punct(",") {
                self.pos += 1;
            } else if !self.at_punct(")") {
                return Err(self.error("`,` or `)`"));
            }
        }
        self.pos += 1;
        Ok(args)
    }

    fn postfix(&mut self) -> PResult<PNode> {
        let start = self.pos;
        let line = self.line();
        let mut e = self.primary()?;
        loop {
            if self.at_punct("[") {
                self.pos += 1;
                let idx = self.expression()?;
                self.expect_punct("]")?;
                e = op_call(OperatorKind::IndirectIndexAccess.into(), self.code_from(start), line, vec![e, idx]);
            } else if self.at_punct("(") {
                let args = self.call_arguments()?;
                let code = self.code_from(start);
                let mut call = PNode::new(NodeLabel::Call, code, line);
                match e.label {
                    NodeLabel::Identifier | NodeLabel::FieldIdentifier => {
                        let name = e.name.clone().unwrap_or_else(|| e.code.clone());
                        self.callees.insert(name.clone());
                        call.callee = Some(name);
                        call.children = args;
                    }
                    NodeLabel::Call
                        if e.operator.as_ref().is_some_and(|o| {
                            o.is(OperatorKind::FieldAccess) || o.is(OperatorKind::IndirectFieldAccess)
                        }) =>
                    {
                        // Method call: receiver first, then arguments.
                        let mut parts = e.children;
                        let member = parts.pop().expect("member access has two operands");
                        let name = member.name.unwrap_or(member.code);
                        self.callees.insert(name.clone());
                        call.callee = Some(name);
                        call.children = parts;
                        call.children.extend(args);
                    }
                    _ => {
                        call.children = vec![e];
                        call.children.extend(args);
                    }
                }
                e = call;
            } else if self.at_op(".") || self.at_op("->") {
                let kind =
                    if self.at_op(".") { OperatorKind::FieldAccess } else { OperatorKind::IndirectFieldAccess };
                self.pos += 1;
                let member_tok = self.expect_ident()?;
                let mut member = PNode::new(NodeLabel::FieldIdentifier, member_tok.text.clone(), member_tok.line);
                member.name = Some(member_tok.text.clone());
                e = op_call(kind.into(), self.code_from(start), line, vec![e, member]);
            } else if self.at_op("++") {
                self.pos += 1;
                e = op_call(OperatorKind::PostIncrement.into(), self.code_from(start), line, vec![e]);
            } else if self.at_op("--") {
                self.pos += 1;
                e = op_call(Operator::Unlisted("postDecrement".into()), self.code_from(start), line, vec![e]);
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> PResult<PNode> {
        let Some(t) = self.peek() else { return Err(self.error("expression")) };
        let start = self.pos;
        let line = t.line;
        match t.kind {
            TokenKind::Identifier => {
                let name = self.qualified_name().expect("at identifier");
                if name.contains("::") {
                    let mut n = PNode::new(NodeLabel::FieldIdentifier, name.clone(), line);
                    n.name = Some(name);
                    return Ok(n);
                }
                let mut n = PNode::new(NodeLabel::Identifier, name.clone(), line);
                n.type_ann = self.lookup(&name).cloned();
                n.name = Some(name);
                Ok(n)
            }
            TokenKind::Operator if t.text == "::" => {
                self.pos += 1;
                let name = self.qualified_name().ok_or_else(|| self.error("identifier"))?;
                let mut n = PNode::new(NodeLabel::FieldIdentifier, format!("::{name}"), line);
                n.name = Some(name);
                Ok(n)
            }
            TokenKind::IntegerLiteral => {
                self.pos += 1;
                let (value, ty) = int_literal(&t.text);
                Ok(literal(t.text.clone(), line, value, ty))
            }
            TokenKind::FloatLiteral => {
                self.pos += 1;
                let (value, ty) = float_literal(&t.text);
                Ok(literal(t.text.clone(), line, value, ty))
            }
            TokenKind::CharLiteral => {
                self.pos += 1;
                let cp = char_literal_value(&t.text);
                Ok(literal(t.text.clone(), line, LiteralValue::Char(cp), TypeAnnotation::basic(BasicType::Char)))
            }
            TokenKind::StringLiteral => {
                let mut len = 0u32;
                while let Some(s) = self.peek().filter(|s| s.kind == TokenKind::StringLiteral) {
                    len = len.saturating_add(string_literal_len(&s.text));
                    self.pos += 1;
                }
                let ty = TypeAnnotation::basic(BasicType::Char).with(ComplexType::Array);
                Ok(literal(self.code_from(start), line, LiteralValue::String(len), ty))
            }
            TokenKind::Keyword => match t.text.as_str() {
                "true" | "false" => {
                    self.pos += 1;
                    let v = i32::from(t.text == "true");
                    Ok(literal(t.text.clone(), line, LiteralValue::Int32(v), TypeAnnotation::basic(BasicType::Int)))
                }
                "nullptr" => {
                    self.pos += 1;
                    let ty = TypeAnnotation::basic(BasicType::Void).with(ComplexType::Pointer);
                    Ok(literal(t.text.clone(), line, LiteralValue::Int32(0), ty))
                }
                "this" => {
                    self.pos += 1;
                    let mut n = PNode::new(NodeLabel::Identifier, "this", line);
                    n.name = Some("this".into());
                    Ok(n)
                }
                _ => Err(self.error("expression")),
            },
            TokenKind::Punctuation if t.text == "(" => {
                self.pos += 1;
                let e = self.expression()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            _ => Err(self.error("expression")),
        }
    }
}

fn control(kind: ControlKind, code: String, line: u32, children: Vec<PNode>) -> PNode {
    let mut n = PNode::new(NodeLabel::ControlStructure, code, line).with_children(children);
    n.control = Some(kind);
    n
}

fn op_call(op: Operator, code: String, line: u32, children: Vec<PNode>) -> PNode {
    let mut n = PNode::new(NodeLabel::Call, code, line).with_children(children);
    n.operator = Some(op);
    n
}

fn unlisted_call(name: &str, code: String, line: u32, children: Vec<PNode>) -> PNode {
    op_call(Operator::Unlisted(name.to_string()), code, line, children)
}

fn literal(code: String, line: u32, value: LiteralValue, ty: TypeAnnotation) -> PNode {
    let mut n = PNode::new(NodeLabel::Literal, code, line);
    n.literal = Some(value);
    n.type_ann = Some(ty);
    n
}

fn int_literal(text: &str) -> (LiteralValue, TypeAnnotation) {
    let lower = text.to_ascii_lowercase();
    let digits = lower.trim_end_matches(['u', 'l']);
    let suffix = &lower[digits.len()..];
    let parsed = if let Some(hex) = digits.strip_prefix("0x") {
        u64::from_str_radix(hex, 16)
    } else if digits.len() > 1 && digits.starts_with('0') {
        u64::from_str_radix(&digits[1..], 8)
    } else {
        digits.parse::<u64>()
    };
    let value = match parsed {
        Ok(v) if v <= i32::MAX as u64 => LiteralValue::Int32(v as i32),
        _ => LiteralValue::OutOfRange,
    };
    let mut ty = TypeAnnotation::basic(if suffix.contains('l') { BasicType::Long } else { BasicType::Int });
    if suffix.contains('u') {
        ty.complex.insert(ComplexType::Unsigned);
    }
    (value, ty)
}

fn float_literal(text: &str) -> (LiteralValue, TypeAnnotation) {
    let lower = text.to_ascii_lowercase();
    let digits = lower.trim_end_matches(['f', 'l']);
    let single = lower.ends_with('f');
    let value = digits.parse::<f64>().map_or(LiteralValue::OutOfRange, |v| LiteralValue::Float32(v as f32));
    let ty = TypeAnnotation::basic(if single { BasicType::Float } else { BasicType::Double });
    (value, ty)
}

fn strip_quotes(text: &str, quote: char) -> &str {
    let open = text.find(quote).map_or(0, |i| i + 1);
    let close = text.rfind(quote).filter(|&i| i >= open).unwrap_or(text.len());
    &text[open..close]
}

/// Decodes C escapes; each escape yields one unit, plain characters their code point.
fn decode_units(body: &str) -> Vec<(u32, bool)> {
    let mut out = Vec::new();
    let mut chars = body.chars().peekable();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push((c as u32, false));
            continue;
        }
        let Some(e) = chars.next() else { break };
        let v = match e {
            'n' => 10,
            't' => 9,
            'r' => 13,
            'a' => 7,
            'b' => 8,
            'f' => 12,
            'v' => 11,
            'x' => {
                let mut v = 0u32;
                while let Some(d) = chars.peek().and_then(|d| d.to_digit(16)) {
                    v = v.wrapping_mul(16).wrapping_add(d);
                    chars.next();
                }
                v
            }
            '0'..='7' => {
                let mut v = e.to_digit(8).unwrap_or(0);
                for _ in 0..2 {
                    match chars.peek().and_then(|d| d.to_digit(8)) {
                        Some(d) => {
                            v = v * 8 + d;
                            chars.next();
                        }
                        None => break,
                    }
                }
                v
            }
            other => other as u32,
        };
        out.push((v, true));
    }
    out
}

fn char_literal_value(text: &str) -> u32 {
    decode_units(strip_quotes(text, '\'')).first().map_or(0, |u| u.0)
}

fn string_literal_len(text: &str) -> u32 {
    decode_units(strip_quotes(text, '"'))
        .iter()
        .map(|&(v, escaped)| if escaped { 1 } else { char::from_u32(v).map_or(1, |c| c.len_utf8() as u32) })
        .sum()
}
