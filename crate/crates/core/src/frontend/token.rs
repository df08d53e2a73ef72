use std::fmt;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenKind {
    Keyword,
    Identifier,
    IntegerLiteral,
    FloatLiteral,
    CharLiteral,
    StringLiteral,
    Operator,
    Punctuation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub line: u32,
    pub col: u32,
    /// Byte offset of the first character in the source.
    #[serde(skip)]
    pub offset: usize,
}

impl Token {
    pub fn end(&self) -> usize {
        self.offset + self.text.len()
    }

    pub fn is(&self, kind: TokenKind, text: &str) -> bool {
        self.kind == kind && self.text == text
    }

    pub fn is_punct(&self, text: &str) -> bool {
        self.is(TokenKind::Punctuation, text)
    }

    pub fn is_op(&self, text: &str) -> bool {
        self.is(TokenKind::Operator, text)
    }

    pub fn is_keyword(&self, text: &str) -> bool {
        self.is(TokenKind::Keyword, text)
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} `{}` at {}:{}", self.kind, self.text, self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("lex error at {line}:{col}: {message}")]
pub struct LexError {
    pub line: u32,
    pub col: u32,
    pub message: String,
}

pub const KEYWORDS: &[&str] = &[
    "auto", "bool", "break", "case", "catch", "char", "class", "const", "continue", "default",
    "delete", "do", "double", "else", "enum", "extern", "false", "float", "for", "goto", "if",
    "inline", "int", "long", "namespace", "new", "nullptr", "operator", "private", "protected",
    "public", "register", "restrict", "return", "short", "signed", "sizeof", "static", "struct",
    "switch", "template", "this", "throw", "true", "try", "typedef", "typename", "union",
    "unsigned", "using", "virtual", "void", "volatile", "while", "_Bool",
];

// Longest first within each leading character.
const OPERATORS: &[&str] = &[
    "<<=", ">>=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=",
    "-=", "*=", "/=", "%=", "&=", "|=", "^=", "::", "+", "-", "*", "/", "%", "=", "<", ">", "!",
    "~", "&", "|", "^", ".", "?",
];

const PUNCTUATION: &[char] = &['(', ')', '{', '}', '[', ']', ';', ',', ':'];

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    col: u32,
    // Only whitespace seen since the last newline; preprocessor lines start here.
    at_line_start: bool,
}

impl<'a> Lexer<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
            self.at_line_start = true;
        } else {
            self.col += 1;
            if !c.is_whitespace() {
                self.at_line_start = false;
            }
        }
        Some(c)
    }

    fn error(&self, line: u32, col: u32, message: impl Into<String>) -> LexError {
        LexError { line, col, message: message.into() }
    }

    fn skip_trivia(&mut self) -> Result<(), LexError> {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('/') if self.peek_at(1) == Some('/') => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                Some('/') if self.peek_at(1) == Some('*') => {
                    let (line, col) = (self.line, self.col);
                    self.bump();
                    self.bump();
                    loop {
                        match self.bump() {
                            None => return Err(self.error(line, col, "unterminated block comment")),
                            Some('*') if self.peek() == Some('/') => {
                                self.bump();
                                break;
                            }
                            Some(_) => {}
                        }
                    }
                }
                Some('#') if self.at_line_start => {
                    // Preprocessor directive, including backslash continuations.
                    while let Some(c) = self.peek() {
                        if c == '\\' && self.peek_at(1) == Some('\n') {
                            self.bump();
                            self.bump();
                            continue;
                        }
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn quoted(&mut self, quote: char, line: u32, col: u32) -> Result<(), LexError> {
        // Opening quote already consumed.
        loop {
            match self.peek() {
                None | Some('\n') => {
                    let what = if quote == '"' { "string" } else { "character" };
                    return Err(self.error(line, col, format!("unterminated {what} literal")));
                }
                Some('\\') => {
                    self.bump();
                    if self.peek().is_some_and(|c| c != '\n') {
                        self.bump();
                    }
                }
                Some(c) => {
                    self.bump();
                    if c == quote {
                        return Ok(());
                    }
                }
            }
        }
    }

    fn number(&mut self) -> TokenKind {
        let start = self.pos;
        let mut float = false;
        if self.peek() == Some('0') && matches!(self.peek_at(1), Some('x' | 'X')) {
            self.bump();
            self.bump();
            while self.peek().is_some_and(|c| c.is_ascii_hexdigit()) {
                self.bump();
            }
        } else {
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.bump();
            }
            if self.peek() == Some('.') {
                float = true;
                self.bump();
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.bump();
                }
            }
            if matches!(self.peek(), Some('e' | 'E')) {
                let sign = matches!(self.peek_at(1), Some('+' | '-'));
                let digit_at = if sign { 2 } else { 1 };
                if self.peek_at(digit_at).is_some_and(|c| c.is_ascii_digit()) {
                    float = true;
                    for _ in 0..digit_at {
                        self.bump();
                    }
                    while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                        self.bump();
                    }
                }
            }
        }
        while let Some(c) = self.peek() {
            match c {
                'u' | 'U' | 'l' | 'L' => {
                    self.bump();
                }
                'f' | 'F' if float || !self.src[start..self.pos].starts_with("0x") => {
                    float = true;
                    self.bump();
                }
                _ => break,
            }
        }
        if float {
            TokenKind::FloatLiteral
        } else {
            TokenKind::IntegerLiteral
        }
    }

    fn next_token(&mut self) -> Result<Option<Token>, LexError> {
        self.skip_trivia()?;
        let Some(c) = self.peek() else { return Ok(None) };
        let (start, line, col) = (self.pos, self.line, self.col);
        let kind = if c.is_ascii_alphabetic() || c == '_' {
            while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') {
                self.bump();
            }
            let word = &self.src[start..self.pos];
            match (word, self.peek()) {
                ("L" | "u" | "U" | "u8", Some(q @ ('\'' | '"'))) => {
                    self.bump();
                    self.quoted(q, line, col)?;
                    if q == '"' {
                        TokenKind::StringLiteral
                    } else {
                        TokenKind::CharLiteral
                    }
                }
                _ if KEYWORDS.contains(&word) => TokenKind::Keyword,
                _ => TokenKind::Identifier,
            }
        } else if c.is_ascii_digit() || (c == '.' && self.peek_at(1).is_some_and(|d| d.is_ascii_digit())) {
            self.number()
        } else if c == '"' || c == '\'' {
            self.bump();
            self.quoted(c, line, col)?;
            if c == '"' {
                TokenKind::StringLiteral
            } else {
                TokenKind::CharLiteral
            }
        } else if PUNCTUATION.contains(&c) && !(c == ':' && self.peek_at(1) == Some(':')) {
            self.bump();
            TokenKind::Punctuation
        } else if let Some(op) = OPERATORS.iter().find(|op| self.src[self.pos..].starts_with(**op)) {
            for _ in 0..op.len() {
                self.bump();
            }
            TokenKind::Operator
        } else {
            return Err(self.error(line, col, format!("illegal character {c:?}")));
        };
        Ok(Some(Token { kind, text: self.src[start..self.pos].to_string(), line, col, offset: start }))
    }
}

/// Splits C source into tokens. Comments, whitespace and preprocessor lines are skipped.
pub fn tokenize(source: &str) -> Result<Vec<Token>, LexError> {
    let mut lexer = Lexer { src: source, pos: 0, line: 1, col: 1, at_line_start: true };
    let mut tokens = Vec::new();
    while let Some(tok) = lexer.next_token()? {
        tokens.push(tok);
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<(TokenKind, String)> {
        tokenize(src).unwrap().into_iter().map(|t| (t.kind, t.text)).collect()
    }

    #[test]
    fn simple_declaration() {
        use TokenKind::*;
        assert_eq!(
            kinds("int a = 5;"),
            vec![
                (Keyword, "int".into()),
                (Identifier, "a".into()),
                (Operator, "=".into()),
                (IntegerLiteral, "5".into()),
                (Punctuation, ";".into()),
            ]
        );
    }

    #[test]
    fn comments_are_skipped() {
        assert_eq!(kinds("/* POTENTIAL FLAW */ x"), vec![(TokenKind::Identifier, "x".into())]);
        assert_eq!(kinds("x // trailing\ny"), vec![(TokenKind::Identifier, "x".into()), (TokenKind::Identifier, "y".into())]);
    }

    #[test]
    fn unterminated_string() {
        let err = tokenize("\"abc").unwrap_err();
        assert_eq!((err.line, err.col), (1, 1));
        assert!(err.message.contains("unterminated"));
    }

    #[test]
    fn unterminated_comment() {
        let err = tokenize("a /* b").unwrap_err();
        assert_eq!((err.line, err.col), (1, 3));
    }

    #[test]
    fn illegal_character() {
        let err = tokenize("a @ b").unwrap_err();
        assert_eq!((err.line, err.col), (1, 3));
    }

    #[test]
    fn numbers_and_literals() {
        use TokenKind::*;
        let toks = kinds("100.0 0x1F 1e5 3.5f 10L 'a' L\"w\" .5");
        let k: Vec<_> = toks.iter().map(|t| t.0).collect();
        assert_eq!(
            k,
            vec![FloatLiteral, IntegerLiteral, FloatLiteral, FloatLiteral, IntegerLiteral, CharLiteral, StringLiteral, FloatLiteral]
        );
    }

    #[test]
    fn preprocessor_lines_skipped() {
        let toks = kinds("#include <stdio.h>\n#define X \\\n 1\nint a;");
        assert_eq!(toks.len(), 3);
        assert_eq!(toks[0].1, "int");
    }

    #[test]
    fn maximal_munch_operators() {
        let toks = kinds("a->b <<= c::d ... e");
        let ops: Vec<_> = toks.iter().filter(|t| t.0 == TokenKind::Operator).map(|t| t.1.as_str()).collect();
        assert_eq!(ops, vec!["->", "<<=", "::", "..."]);
    }

    #[test]
    fn positions_are_one_based() {
        let toks = tokenize("int\n  x;").unwrap();
        assert_eq!((toks[1].line, toks[1].col), (2, 3));
    }
}
