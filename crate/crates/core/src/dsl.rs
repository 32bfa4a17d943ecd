//! The `.ckn` declaration language.
//!
//! One flat statement per network edge, each terminated by `;`:
//!
//! ```text
//! // comment
//! concept Teeth#Royal_Elephant;
//! ako Royal_Elephant Elephant;
//! cause Presence#King#Thailand Presence#Royal_Elephant#Thailand;
//! value Color#Elephant gray;
//! ```
//!
//! Mentioning a chained concept implicitly declares all its enclosing
//! contexts. The parser recovers at statement boundaries so that one run
//! reports every malformed statement.

use std::fmt;

use thiserror::Error;

use crate::algebra::Sign;
use crate::model::{Assertion, Atom, Categorizer, ConceptPath, ModelError, UNIVERSAL};

/// Source position of a token or declaration; line and column are 1-based
/// and counted in characters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Span {
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub span: Span,
    pub message: String,
}

impl Diagnostic {
    fn error(span: Span, message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            severity: Severity::Error,
            span,
            message: message.into(),
        }
    }

    fn warning(span: Span, message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            severity: Severity::Warning,
            span,
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}: {}: {}", self.span, level, self.message)
    }
}

/// A top-level statement.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Declaration {
    Concept(ConceptPath),
    Assertion(Assertion),
}

/// Parsed declarations in author order, before inheritance compilation.
#[derive(Clone, Debug, Default)]
pub struct SourceKb {
    declarations: Vec<Declaration>,
    spans: Vec<Span>,
}

impl SourceKb {
    pub fn new() -> SourceKb {
        SourceKb::default()
    }

    pub fn push(&mut self, declaration: Declaration) {
        self.push_with_span(declaration, Span::default());
    }

    pub fn push_with_span(&mut self, declaration: Declaration, span: Span) {
        self.declarations.push(declaration);
        self.spans.push(span);
    }

    /// Appends every declaration of `other`, e.g. when loading several files.
    pub fn extend(&mut self, other: SourceKb) {
        self.declarations.extend(other.declarations);
        self.spans.extend(other.spans);
    }

    pub fn declarations(&self) -> &[Declaration] {
        &self.declarations
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Declaration, Span)> {
        self.declarations.iter().zip(self.spans.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.declarations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.declarations.is_empty()
    }
}

/// Equality ignores source spans.
impl PartialEq for SourceKb {
    fn eq(&self, other: &Self) -> bool {
        self.declarations == other.declarations
    }
}

impl Eq for SourceKb {}

impl FromIterator<Declaration> for SourceKb {
    fn from_iter<I: IntoIterator<Item = Declaration>>(iter: I) -> Self {
        let mut kb = SourceKb::new();
        for decl in iter {
            kb.push(decl);
        }
        kb
    }
}

/// A successful parse, possibly with warnings.
#[derive(Clone, Debug)]
pub struct Parsed {
    pub kb: SourceKb,
    pub warnings: Vec<Diagnostic>,
}

/// A failed parse: at least one diagnostic is an error.
#[derive(Clone, Debug, Error)]
#[error("{}", render_diagnostics(.diagnostics))]
pub struct ParseFailure {
    pub diagnostics: Vec<Diagnostic>,
}

impl ParseFailure {
    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.is_error())
    }
}

fn render_diagnostics(diagnostics: &[Diagnostic]) -> String {
    diagnostics
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("invalid concept `{input}`: {message}")]
pub struct ConceptSyntaxError {
    pub input: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Word(String),
    Quoted(String),
    Hash,
    Semi,
    /// Lexically invalid input, already diagnosed.
    Error,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    span: Span,
}

fn lex(text: &str, diagnostics: &mut Vec<Diagnostic>) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let (mut pos, mut line, mut col) = (0usize, 1usize, 1usize);

    while pos < chars.len() {
        let ch = chars[pos];
        let start = Span {
            line,
            column: col,
            length: 1,
        };
        if ch == '\n' {
            pos += 1;
            line += 1;
            col = 1;
            continue;
        }
        if ch.is_whitespace() {
            pos += 1;
            col += 1;
            continue;
        }
        match ch {
            '/' if chars.get(pos + 1) == Some(&'/') => {
                while pos < chars.len() && chars[pos] != '\n' {
                    pos += 1;
                }
            }
            '#' => {
                tokens.push(Token {
                    tok: Tok::Hash,
                    span: start,
                });
                pos += 1;
                col += 1;
            }
            ';' => {
                tokens.push(Token {
                    tok: Tok::Semi,
                    span: start,
                });
                pos += 1;
                col += 1;
            }
            '"' => {
                let mut end = pos + 1;
                while end < chars.len() && chars[end] != '"' && chars[end] != '\n' {
                    end += 1;
                }
                let length = end - pos + 1;
                if end < chars.len() && chars[end] == '"' {
                    let name: String = chars[pos + 1..end].iter().collect();
                    tokens.push(Token {
                        tok: Tok::Quoted(name),
                        span: Span { length, ..start },
                    });
                    col += length;
                    pos = end + 1;
                } else {
                    let span = Span {
                        length: end - pos,
                        ..start
                    };
                    diagnostics.push(Diagnostic::error(span, "unterminated quoted atom"));
                    tokens.push(Token {
                        tok: Tok::Error,
                        span,
                    });
                    col += end - pos;
                    pos = end;
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut end = pos + 1;
                while end < chars.len()
                    && (chars[end].is_ascii_alphanumeric()
                        || chars[end] == '_'
                        || chars[end] == '-')
                {
                    end += 1;
                }
                let mut word: String = chars[pos..end].iter().collect();
                if word == "influence" && chars.get(end) == Some(&'+') {
                    word.push('+');
                    end += 1;
                }
                let length = end - pos;
                tokens.push(Token {
                    tok: Tok::Word(word),
                    span: Span { length, ..start },
                });
                col += length;
                pos = end;
            }
            other => {
                diagnostics.push(Diagnostic::error(
                    start,
                    format!("unexpected character `{other}`"),
                ));
                tokens.push(Token {
                    tok: Tok::Error,
                    span: start,
                });
                pos += 1;
                col += 1;
            }
        }
    }
    tokens
}

enum Keyword {
    Concept,
    Categorizer(Categorizer),
    Interaction(Sign),
    Value,
}

fn keyword(word: &str) -> Option<Keyword> {
    Some(match word {
        "concept" => Keyword::Concept,
        "ako" => Keyword::Categorizer(Categorizer::Ako),
        "partof" => Keyword::Categorizer(Categorizer::Partof),
        "eqv" => Keyword::Categorizer(Categorizer::Eqv),
        "sc" => Keyword::Categorizer(Categorizer::Sc),
        "value" => Keyword::Value,
        _ => Keyword::Interaction(sign_for_keyword(word)?),
    })
}

pub fn sign_for_keyword(word: &str) -> Option<Sign> {
    Some(match word {
        "assoc" => Sign::Association,
        "precede" => Sign::Precedence,
        "influence+" => Sign::Positive,
        "influence-" => Sign::Negative,
        "cause" => Sign::Cause,
        "inhibit" => Sign::Inhibition,
        _ => return None,
    })
}

pub fn keyword_for_sign(sign: Sign) -> &'static str {
    match sign {
        Sign::Association => "assoc",
        Sign::Precedence => "precede",
        Sign::Positive => "influence+",
        Sign::Negative => "influence-",
        Sign::Cause => "cause",
        Sign::Inhibition => "inhibit",
    }
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    diagnostics: Vec<Diagnostic>,
}

/// Marker for a statement that already produced a diagnostic.
struct Failed;

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<&'a Token> {
        let tok = self.tokens.get(self.pos);
        if tok.is_some() {
            self.pos += 1;
        }
        tok
    }

    fn last_span(&self) -> Span {
        self.pos
            .checked_sub(1)
            .and_then(|k| self.tokens.get(k))
            .map(|t| t.span)
            .unwrap_or(Span {
                line: 1,
                column: 1,
                length: 0,
            })
    }

    fn skip_past_semicolon(&mut self) {
        while let Some(tok) = self.next() {
            if tok.tok == Tok::Semi {
                break;
            }
        }
    }

    fn atom(&mut self) -> Result<(Atom, Span), Failed> {
        let Some(token) = self.next() else {
            let span = self.last_span();
            self.diagnostics.push(Diagnostic::error(
                span,
                "expected an atom, found end of input",
            ));
            return Err(Failed);
        };
        let name = match &token.tok {
            Tok::Word(w) | Tok::Quoted(w) => w,
            Tok::Hash => {
                self.diagnostics
                    .push(Diagnostic::error(token.span, "expected an atom, found `#`"));
                return Err(Failed);
            }
            Tok::Error => return Err(Failed),
            Tok::Semi => {
                // let the statement-level recovery see the `;`
                self.pos -= 1;
                self.diagnostics
                    .push(Diagnostic::error(token.span, "expected an atom, found `;`"));
                return Err(Failed);
            }
        };
        match Atom::new(name) {
            Ok(atom) => Ok((atom, token.span)),
            Err(ModelError::ReservedAtom) => {
                self.diagnostics.push(Diagnostic::error(
                    token.span,
                    "reserved atom `T` cannot be used as a concept segment",
                ));
                Err(Failed)
            }
            Err(err) => {
                self.diagnostics
                    .push(Diagnostic::error(token.span, err.to_string()));
                Err(Failed)
            }
        }
    }

    fn concept(&mut self) -> Result<ConceptPath, Failed> {
        let (first, start) = self.atom()?;
        let mut atoms = vec![first];
        let mut end = start;
        while matches!(self.peek(), Some(Token { tok: Tok::Hash, .. })) {
            self.next();
            let (atom, span) = self.atom()?;
            atoms.push(atom);
            end = span;
        }
        let concept = ConceptPath::new(atoms).expect("at least one atom");
        if concept.has_repeated_segment() {
            let length = if end.line == start.line {
                end.column + end.length - start.column
            } else {
                start.length
            };
            self.diagnostics.push(Diagnostic::warning(
                Span { length, ..start },
                format!("concept `{}` repeats a segment", concept.to_source()),
            ));
        }
        Ok(concept)
    }

    fn statement(&mut self) -> Option<(Declaration, Span)> {
        let head = self.next()?;
        let word = match &head.tok {
            Tok::Word(w) => w,
            Tok::Semi => {
                self.diagnostics
                    .push(Diagnostic::error(head.span, "empty statement"));
                return None;
            }
            Tok::Error => {
                self.skip_past_semicolon();
                return None;
            }
            _ => {
                self.diagnostics.push(Diagnostic::error(
                    head.span,
                    "expected a declaration keyword",
                ));
                self.skip_past_semicolon();
                return None;
            }
        };
        let Some(kw) = keyword(word) else {
            self.diagnostics.push(Diagnostic::error(
                head.span,
                format!("unknown keyword `{word}`"),
            ));
            self.skip_past_semicolon();
            return None;
        };

        let body = match kw {
            Keyword::Concept => self.concept().map(Declaration::Concept),
            Keyword::Categorizer(kind) => self.concept().and_then(|child| {
                let parent = self.concept()?;
                Ok(Declaration::Assertion(Assertion::Categorization {
                    child,
                    kind,
                    parent,
                }))
            }),
            Keyword::Interaction(sign) => self.concept().and_then(|source| {
                let target = self.concept()?;
                Ok(Declaration::Assertion(Assertion::interaction(
                    source, sign, target,
                )))
            }),
            Keyword::Value => self.concept().and_then(|attribute| {
                let (value, _) = self.atom()?;
                Ok(Declaration::Assertion(Assertion::ValueAssignment {
                    attribute,
                    value,
                }))
            }),
        };
        let Ok(decl) = body else {
            self.skip_past_semicolon();
            return None;
        };

        let end = self.last_span();
        match self.peek() {
            Some(Token { tok: Tok::Semi, .. }) => {
                self.next();
            }
            Some(Token {
                tok: Tok::Word(w), ..
            }) if keyword(w).is_some() => {
                // Missing terminator before the next statement: resume there.
                self.diagnostics.push(Diagnostic::error(
                    Span {
                        column: end.column + end.length,
                        length: 0,
                        ..end
                    },
                    "missing `;`",
                ));
                return None;
            }
            Some(tok) => {
                if tok.tok != Tok::Error {
                    self.diagnostics
                        .push(Diagnostic::error(tok.span, "expected `;`"));
                }
                self.skip_past_semicolon();
                return None;
            }
            None => {
                self.diagnostics.push(Diagnostic::error(
                    Span {
                        column: end.column + end.length,
                        length: 0,
                        ..end
                    },
                    "missing `;`",
                ));
                return None;
            }
        }
        let close = self.last_span();
        let length = if close.line == head.span.line {
            close.column + 1 - head.span.column
        } else {
            head.span.length
        };
        Some((
            decl,
            Span {
                length,
                ..head.span
            },
        ))
    }
}

/// Parses a `.ckn` document.
pub fn parse(text: &str) -> Result<Parsed, ParseFailure> {
    let mut diagnostics = Vec::new();
    let tokens = lex(text, &mut diagnostics);
    let mut parser = Parser {
        tokens: &tokens,
        pos: 0,
        diagnostics,
    };
    let mut kb = SourceKb::new();
    while parser.peek().is_some() {
        if let Some((decl, span)) = parser.statement() {
            kb.push_with_span(decl, span);
        }
    }
    let mut diagnostics = parser.diagnostics;
    diagnostics.sort_by_key(|d| (d.span.line, d.span.column));
    if diagnostics.iter().any(Diagnostic::is_error) {
        Err(ParseFailure { diagnostics })
    } else {
        Ok(Parsed {
            kb,
            warnings: diagnostics,
        })
    }
}

/// Parses a single concept such as `Teeth#Elephant` or `"Royal Elephant" # Thailand`.
/// A lone `T` denotes the universal concept.
pub fn parse_concept(text: &str) -> Result<ConceptPath, ConceptSyntaxError> {
    let fail = |message: String| ConceptSyntaxError {
        input: text.to_string(),
        message,
    };
    let mut diagnostics = Vec::new();
    let tokens = lex(text, &mut diagnostics);
    if let Some(d) = diagnostics.first() {
        return Err(fail(d.message.clone()));
    }
    if let [Token {
        tok: Tok::Word(w), ..
    }] = tokens.as_slice()
    {
        if w == UNIVERSAL {
            return Ok(ConceptPath::universal());
        }
    }
    let mut parser = Parser {
        tokens: &tokens,
        pos: 0,
        diagnostics: Vec::new(),
    };
    let concept = parser.concept();
    let first_error = parser
        .diagnostics
        .iter()
        .find(|d| d.is_error())
        .map(|d| d.message.clone());
    match (concept, first_error) {
        (Ok(concept), None) if parser.pos == tokens.len() => Ok(concept),
        (Ok(_), None) => Err(fail("unexpected trailing input".to_string())),
        (_, Some(message)) => Err(fail(message)),
        (Err(Failed), None) => Err(fail("expected a concept".to_string())),
    }
}

fn render_declaration(decl: &Declaration) -> String {
    match decl {
        Declaration::Concept(c) => format!("concept {};", c.to_source()),
        Declaration::Assertion(Assertion::Categorization {
            child,
            kind,
            parent,
        }) => format!(
            "{} {} {};",
            kind.keyword(),
            child.to_source(),
            parent.to_source()
        ),
        Declaration::Assertion(Assertion::Interaction(edge)) => format!(
            "{} {} {};",
            keyword_for_sign(edge.sign),
            edge.source.to_source(),
            edge.target.to_source()
        ),
        Declaration::Assertion(Assertion::ValueAssignment { attribute, value }) => {
            format!("value {} {};", attribute.to_source(), value.to_source())
        }
    }
}

/// Canonical text: one declaration per line, LF line endings.
pub fn serialize(kb: &SourceKb) -> String {
    let mut out = String::new();
    for decl in kb.declarations() {
        out.push_str(&render_declaration(decl));
        out.push('\n');
    }
    out
}
