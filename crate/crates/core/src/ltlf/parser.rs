//! Recursive-descent parser for LTLf formulas.
//!
//! ```text
//! formula := or ( "->" formula )?
//! or      := and ( "|" and )*
//! and     := until ( "&" until )*
//! until   := unary ( "U" until )?
//! unary   := ( "!" | "X" | "F" | "G" ) unary | primary
//! primary := "(" formula ")" | "true" | "false" | IDENT
//! ```
//!
//! `a -> b` is read as `!a | b`.

use thiserror::Error;

use super::ast::{Ltlf, PropTable};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown proposition `{name}` at offset {position}")]
    UnknownProp { name: String, position: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
    Not,
    And,
    Or,
    Implies,
    Next,
    Until,
    Eventually,
    Globally,
    True,
    False,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Not => "`!`".into(),
        Tok::And => "`&`".into(),
        Tok::Or => "`|`".into(),
        Tok::Implies => "`->`".into(),
        Tok::Next => "`X`".into(),
        Tok::Until => "`U`".into(),
        Tok::Eventually => "`F`".into(),
        Tok::Globally => "`G`".into(),
        Tok::True => "`true`".into(),
        Tok::False => "`false`".into(),
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '!' => Some(Tok::Not),
            '&' => Some(Tok::And),
            '|' => Some(Tok::Or),
            _ => None,
        };
        if let Some(t) = single {
            out.push((t, pos));
            i += 1;
            continue;
        }
        if c == '-' {
            if chars.get(i + 1).map(|x| x.1) == Some('>') {
                out.push((Tok::Implies, pos));
                i += 2;
                continue;
            }
            return Err(ParseError::Syntax {
                position: pos,
                message: "expected `->`".into(),
            });
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].1.is_ascii_alphanumeric() || chars[i].1 == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().map(|x| x.1).collect();
            let tok = match word.as_str() {
                "X" => Tok::Next,
                "U" => Tok::Until,
                "F" => Tok::Eventually,
                "G" => Tok::Globally,
                "true" => Tok::True,
                "false" => Tok::False,
                _ => Tok::Ident(word),
            };
            out.push((tok, pos));
            continue;
        }
        return Err(ParseError::Syntax {
            position: pos,
            message: format!("unexpected character `{c}`"),
        });
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
    props: Option<&'a PropTable>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.1).unwrap_or(self.end)
    }

    fn error(&self, expected: &str) -> ParseError {
        let found = match self.peek() {
            Some(t) => describe(t),
            None => "end of input".into(),
        };
        ParseError::Syntax {
            position: self.offset(),
            message: format!("expected {expected}, found {found}"),
        }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn formula(&mut self) -> Result<Ltlf, ParseError> {
        let lhs = self.or()?;
        if self.eat(&Tok::Implies) {
            let rhs = self.formula()?;
            return Ok(Ltlf::or(Ltlf::not(lhs), rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Ltlf, ParseError> {
        let mut lhs = self.and()?;
        while self.eat(&Tok::Or) {
            let rhs = self.and()?;
            lhs = Ltlf::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Ltlf, ParseError> {
        let mut lhs = self.until()?;
        while self.eat(&Tok::And) {
            let rhs = self.until()?;
            lhs = Ltlf::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<Ltlf, ParseError> {
        let lhs = self.unary()?;
        if self.eat(&Tok::Until) {
            let rhs = self.until()?;
            return Ok(Ltlf::until(lhs, rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Ltlf, ParseError> {
        let wrap: Option<fn(Ltlf) -> Ltlf> = match self.peek() {
            Some(Tok::Not) => Some(Ltlf::not),
            Some(Tok::Next) => Some(Ltlf::next),
            Some(Tok::Eventually) => Some(Ltlf::eventually),
            Some(Tok::Globally) => Some(Ltlf::globally),
            _ => None,
        };
        match wrap {
            Some(w) => {
                self.pos += 1;
                Ok(w(self.unary()?))
            }
            None => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Ltlf, ParseError> {
        let at = self.offset();
        match self.peek().cloned() {
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.formula()?;
                if !self.eat(&Tok::RParen) {
                    return Err(self.error("`)`"));
                }
                Ok(inner)
            }
            Some(Tok::True) => {
                self.pos += 1;
                Ok(Ltlf::True)
            }
            Some(Tok::False) => {
                self.pos += 1;
                Ok(Ltlf::False)
            }
            Some(Tok::Ident(name)) => {
                if let Some(table) = self.props {
                    if !table.contains(&name) {
                        return Err(ParseError::UnknownProp { name, position: at });
                    }
                }
                self.pos += 1;
                Ok(Ltlf::Atom(name))
            }
            _ => Err(self.error("a proposition, `(`, or a unary operator")),
        }
    }
}

fn run(text: &str, props: Option<&PropTable>) -> Result<Ltlf, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
        props,
    };
    let f = p.formula()?;
    if p.peek().is_some() {
        return Err(p.error("end of input"));
    }
    Ok(f)
}

/// Parses `text`, resolving every atom against `props`.
pub fn parse_formula(text: &str, props: &PropTable) -> Result<Ltlf, ParseError> {
    run(text, Some(props))
}

/// Parses without checking atom names.
pub fn parse_unchecked(text: &str) -> Result<Ltlf, ParseError> {
    run(text, None)
}
