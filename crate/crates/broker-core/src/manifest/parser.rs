//! Hand-rolled lexer and recursive-descent parser for the manifest DSL.

use thiserror::Error;
use url::Url;

use crate::model::ComponentKind;

use super::{
    CloudType, ComponentBinding, ComponentSelector, DeploymentManifest, DeploymentOption, Lifecycle,
    ManifestError,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: expected {expected}, found {found}")]
    SyntaxError { line: u32, column: u32, expected: String, found: String },
    #[error("duplicate selector at line {0}")]
    DuplicateSelector(u32),
    #[error("manifest does not declare governance.lifecycle")]
    MissingLifecycle,
    #[error("invalid option arguments at line {line}: {reason}")]
    InvalidOptionArgs { line: u32, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Comma,
    Dot,
    Eq,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(w) => format!("{w:?}"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::LBrace => "'{'".to_string(),
            Tok::RBrace => "'}'".to_string(),
            Tok::LBracket => "'['".to_string(),
            Tok::RBracket => "']'".to_string(),
            Tok::LParen => "'('".to_string(),
            Tok::RParen => "')'".to_string(),
            Tok::Comma => "','".to_string(),
            Tok::Dot => "'.'".to_string(),
            Tok::Eq => "'='".to_string(),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: u32,
    column: u32,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut tokens = Vec::new();
    let mut line: u32 = 1;
    let mut column: u32 = 1;
    let mut chars = text.chars().peekable();

    macro_rules! push {
        ($tok:expr, $line:expr, $col:expr) => {
            tokens.push(Spanned { tok: $tok, line: $line, column: $col })
        };
    }

    while let Some(&c) = chars.peek() {
        let (tok_line, tok_col) = (line, column);
        match c {
            '\n' => {
                chars.next();
                line += 1;
                column = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                column += 1;
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    column += 1;
                }
            }
            '{' => {
                chars.next();
                column += 1;
                push!(Tok::LBrace, tok_line, tok_col);
            }
            '}' => {
                chars.next();
                column += 1;
                push!(Tok::RBrace, tok_line, tok_col);
            }
            '[' => {
                chars.next();
                column += 1;
                push!(Tok::LBracket, tok_line, tok_col);
            }
            ']' => {
                chars.next();
                column += 1;
                push!(Tok::RBracket, tok_line, tok_col);
            }
            '(' => {
                chars.next();
                column += 1;
                push!(Tok::LParen, tok_line, tok_col);
            }
            ')' => {
                chars.next();
                column += 1;
                push!(Tok::RParen, tok_line, tok_col);
            }
            ',' => {
                chars.next();
                column += 1;
                push!(Tok::Comma, tok_line, tok_col);
            }
            '.' => {
                chars.next();
                column += 1;
                push!(Tok::Dot, tok_line, tok_col);
            }
            '=' => {
                chars.next();
                column += 1;
                push!(Tok::Eq, tok_line, tok_col);
            }
            '"' => {
                chars.next();
                column += 1;
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some('"') => {
                            column += 1;
                            break;
                        }
                        Some('\n') | None => {
                            return Err(ParseError::SyntaxError {
                                line: tok_line,
                                column: tok_col,
                                expected: "closing '\"'".to_string(),
                                found: "end of line".to_string(),
                            });
                        }
                        Some(c) => {
                            column += 1;
                            s.push(c);
                        }
                    }
                }
                push!(Tok::Str(s), tok_line, tok_col);
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut word = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        word.push(c);
                        chars.next();
                        column += 1;
                    } else {
                        break;
                    }
                }
                push!(Tok::Ident(word), tok_line, tok_col);
            }
            other => {
                return Err(ParseError::SyntaxError {
                    line: tok_line,
                    column: tok_col,
                    expected: "a token".to_string(),
                    found: format!("{other:?}"),
                });
            }
        }
    }
    tokens.push(Spanned { tok: Tok::Eof, line, column });
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Spanned {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, at: &Spanned, expected: impl Into<String>) -> ParseError {
        ParseError::SyntaxError {
            line: at.line,
            column: at.column,
            expected: expected.into(),
            found: at.tok.describe(),
        }
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<Spanned, ParseError> {
        let t = self.next();
        if t.tok == tok {
            Ok(t)
        } else {
            Err(self.error(&t, expected))
        }
    }

    fn expect_ident(&mut self, word: &str) -> Result<Spanned, ParseError> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(w) if w == word => Ok(t),
            _ => Err(self.error(&t, format!("{word:?}"))),
        }
    }

    fn expect_string(&mut self, expected: &str) -> Result<(String, Spanned), ParseError> {
        let t = self.next();
        match &t.tok {
            Tok::Str(s) => Ok((s.clone(), t.clone())),
            _ => Err(self.error(&t, expected)),
        }
    }

    fn parse_manifest(&mut self) -> Result<DeploymentManifest, ParseError> {
        self.expect_ident("broker")?;
        self.expect(Tok::LBrace, "'{'")?;
        let lifecycle = self.parse_lifecycle()?;

        let mut bindings = Vec::new();
        loop {
            let t = self.peek().clone();
            match &t.tok {
                Tok::RBrace => {
                    self.next();
                    break;
                }
                Tok::Ident(word) => {
                    let Some(kind) = ComponentKind::from_keyword(word) else {
                        return Err(self.error(
                            &t,
                            "a component kind (dataSource, domainClasses, controllers, views, services) or '}'",
                        ));
                    };
                    self.next();
                    self.parse_kind_block(kind, &mut bindings)?;
                }
                _ => return Err(self.error(&t, "a component kind or '}'")),
            }
        }
        self.expect(Tok::Eof, "end of input")?;

        let manifest = DeploymentManifest { lifecycle, bindings };
        match manifest.validate() {
            Ok(()) => Ok(manifest),
            Err(ManifestError::DuplicateSelector(line)) => Err(ParseError::DuplicateSelector(line)),
            Err(ManifestError::DuplicateName { line, .. }) => Err(ParseError::DuplicateSelector(line)),
            Err(other) => Err(ParseError::InvalidOptionArgs { line: 0, reason: other.to_string() }),
        }
    }

    fn parse_lifecycle(&mut self) -> Result<Lifecycle, ParseError> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Ident(word) if word == "governance" => {
                self.next();
                self.expect(Tok::Dot, "'.'")?;
                self.expect_ident("lifecycle")?;
                self.expect(Tok::Eq, "'='")?;
                let value = self.next();
                match &value.tok {
                    Tok::Ident(w) if w == "active" => Ok(Lifecycle::Active),
                    Tok::Ident(w) if w == "passive" => Ok(Lifecycle::Passive),
                    _ => Err(self.error(&value, "\"active\" or \"passive\"")),
                }
            }
            // A kind block or immediate '}' where the lifecycle declaration
            // belongs means the declaration is missing, not malformed.
            Tok::RBrace => Err(ParseError::MissingLifecycle),
            Tok::Ident(word) if ComponentKind::from_keyword(word).is_some() => {
                Err(ParseError::MissingLifecycle)
            }
            _ => Err(self.error(&t, "\"governance.lifecycle\"")),
        }
    }

    fn parse_kind_block(
        &mut self,
        kind: ComponentKind,
        bindings: &mut Vec<ComponentBinding>,
    ) -> Result<(), ParseError> {
        self.expect(Tok::LBrace, "'{'")?;
        let mut any = false;
        loop {
            let t = self.peek().clone();
            if t.tok == Tok::RBrace {
                if !any {
                    return Err(self.error(&t, "at least one binding"));
                }
                self.next();
                return Ok(());
            }
            let binding = self.parse_binding(kind)?;
            bindings.push(binding);
            any = true;
        }
    }

    fn parse_binding(&mut self, kind: ComponentKind) -> Result<ComponentBinding, ParseError> {
        let t = self.peek().clone();
        let selector = match &t.tok {
            Tok::Ident(word) if word == "all" => {
                self.next();
                ComponentSelector::all_of(kind)
            }
            Tok::Ident(word) if word == "environments" => {
                if kind != ComponentKind::DataSource {
                    return Err(self.error(&t, "'all' or a name list (environment selectors are only valid in dataSource blocks)"));
                }
                self.next();
                self.expect(Tok::LBracket, "'['")?;
                let (env, _) = self.expect_string("an environment name string")?;
                self.expect(Tok::RBracket, "']'")?;
                self.expect(Tok::Dot, "'.'")?;
                let name_tok = self.next();
                let Tok::Ident(name) = &name_tok.tok else {
                    return Err(self.error(&name_tok, "a component identifier"));
                };
                ComponentSelector::environment(kind, env, name.clone())
            }
            Tok::LBracket => {
                self.next();
                let mut names = Vec::new();
                let (first, _) = self.expect_string("a component name string")?;
                names.push(first);
                loop {
                    let t = self.next();
                    match t.tok {
                        Tok::Comma => {
                            let (name, _) = self.expect_string("a component name string")?;
                            names.push(name);
                        }
                        Tok::RBracket => break,
                        _ => return Err(self.error(&t, "',' or ']'")),
                    }
                }
                ComponentSelector::named(kind, names)
            }
            _ => return Err(self.error(&t, "'all', a name list, or an environment selector")),
        };

        let option = self.parse_option()?;
        Ok(ComponentBinding { selector, option, source_line: t.line })
    }

    fn parse_option(&mut self) -> Result<DeploymentOption, ParseError> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(w) if w == "economy" => Ok(DeploymentOption::Economy),
            Tok::Ident(w) if w == "bestEffort" => Ok(DeploymentOption::BestEffort),
            Tok::Ident(w) if w == "privateCloud" => {
                self.expect(Tok::LParen, "'('")?;
                let (endpoint, endpoint_tok) = self.expect_string("an endpoint URL string")?;
                self.expect(Tok::Comma, "','")?;
                let type_tok = self.next();
                let cloud_type = match &type_tok.tok {
                    Tok::Ident(w) => CloudType::from_keyword(w).ok_or(ParseError::InvalidOptionArgs {
                        line: type_tok.line,
                        reason: format!("unknown cloud type {w:?} (expected iaas, paas, or saas)"),
                    })?,
                    _ => {
                        return Err(ParseError::InvalidOptionArgs {
                            line: type_tok.line,
                            reason: format!("expected a cloud type, found {}", type_tok.tok.describe()),
                        })
                    }
                };
                self.expect(Tok::Comma, "','")?;
                let (provider_id, _) = self.expect_string("a provider id string")?;
                self.expect(Tok::RParen, "')'")?;
                if Url::parse(&endpoint).is_err() {
                    return Err(ParseError::InvalidOptionArgs {
                        line: endpoint_tok.line,
                        reason: format!("endpoint {endpoint:?} is not an absolute URL"),
                    });
                }
                Ok(DeploymentOption::PrivateCloud { endpoint, cloud_type, provider_id })
            }
            _ => Err(self.error(&t, "an option (economy, bestEffort, or privateCloud)")),
        }
    }
}

/// Parses DSL source text into a validated manifest. Bindings keep their
/// source order and carry the line they start on.
pub fn parse_manifest(text: &str) -> Result<DeploymentManifest, ParseError> {
    let tokens = lex(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    parser.parse_manifest()
}
