//! Parsers for the mean-model and pair-covariate formulas.
//!
//! Mean formulas: `term ("+" term)*` with `term := factor (":" factor)*` and
//! `factor := ident | "C(" ident ")"`. An intercept is always included; an
//! empty formula (or a literal `1`) is intercept-only.
//!
//! Correlation formulas: `cterm ("+" cterm)*` where `cterm` is one of
//! `intercept`, `same(c)`, `botheq(c, v)`, `diff(c)`, `absdiff(c)`,
//! `sqdiff(c)`, `logabsdiff(c)`. The intercept must be written explicitly.

use std::fmt;

use crate::error::{GcrError, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Quoted(String),
    Plus,
    Colon,
    Comma,
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '+' => {
                out.push((pos, Tok::Plus));
                i += 1
            }
            ':' => {
                out.push((pos, Tok::Colon));
                i += 1
            }
            ',' => {
                out.push((pos, Tok::Comma));
                i += 1
            }
            '(' => {
                out.push((pos, Tok::LParen));
                i += 1
            }
            ')' => {
                out.push((pos, Tok::RParen));
                i += 1
            }
            '"' | '\'' => {
                let quote = c;
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        Some(&(_, ch)) if ch == quote => break,
                        Some(&(_, ch)) => {
                            s.push(ch);
                            i += 1
                        }
                        None => {
                            return Err(GcrError::Formula {
                                position: pos,
                                message: "unterminated string".into(),
                            })
                        }
                    }
                }
                i += 1;
                out.push((pos, Tok::Quoted(s)));
            }
            c if c.is_ascii_digit() || c == '-' || c == '.' => {
                let mut s = String::new();
                while let Some(&(_, ch)) = chars.get(i) {
                    if ch.is_ascii_alphanumeric() || matches!(ch, '.' | '-' | '+' | '_')
                        && !(ch == '+' && !s.ends_with(['e', 'E']))
                    {
                        s.push(ch);
                        i += 1;
                    } else {
                        break;
                    }
                }
                out.push((pos, Tok::Number(s)));
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&(_, ch)) = chars.get(i) {
                    if ch.is_alphanumeric() || ch == '_' || ch == '.' {
                        s.push(ch);
                        i += 1;
                    } else {
                        break;
                    }
                }
                out.push((pos, Tok::Ident(s)));
            }
            other => {
                return Err(GcrError::Formula {
                    position: pos,
                    message: format!("unexpected character '{other}'"),
                })
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
}

impl Parser {
    fn new(text: &str) -> Result<Self> {
        Ok(Parser { toks: tokenize(text)?, at: 0, end: text.len() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(GcrError::Formula { position: self.pos(), message: message.into() })
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.at).map(|(_, t)| t.clone());
        self.at += 1;
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&want) {
            self.at += 1;
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.at += 1;
                Ok(s)
            }
            _ => self.err("expected a column name"),
        }
    }

    fn done(&self) -> bool {
        self.at >= self.toks.len()
    }
}

/// One additive term of a mean formula.
#[derive(Debug, Clone, PartialEq)]
pub enum MeanTerm {
    /// A column used as is. String-valued columns are expanded as
    /// categorical at design build time.
    Numeric(String),
    /// `C(col)`: indicator columns for all levels except the smallest.
    Categorical(String),
    Interaction(Box<MeanTerm>, Box<MeanTerm>),
}

impl fmt::Display for MeanTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeanTerm::Numeric(c) => write!(f, "{c}"),
            MeanTerm::Categorical(c) => write!(f, "C({c})"),
            MeanTerm::Interaction(a, b) => write!(f, "{a}:{b}"),
        }
    }
}

/// Parsed mean formula. The intercept is implicit.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeanFormula {
    pub terms: Vec<MeanTerm>,
}

impl fmt::Display for MeanFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.terms.iter().map(ToString::to_string).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

pub fn parse_mean_formula(text: &str) -> Result<MeanFormula> {
    let mut p = Parser::new(text)?;
    let mut terms = Vec::new();
    if p.done() {
        return Ok(MeanFormula { terms });
    }
    loop {
        if let Some(Tok::Number(n)) = p.peek() {
            if n == "1" {
                p.at += 1;
            } else {
                return p.err("unexpected number");
            }
        } else {
            let mut term = mean_factor(&mut p)?;
            while p.peek() == Some(&Tok::Colon) {
                p.at += 1;
                let rhs = mean_factor(&mut p)?;
                term = MeanTerm::Interaction(Box::new(term), Box::new(rhs));
            }
            terms.push(term);
        }
        match p.next() {
            None => break,
            Some(Tok::Plus) => continue,
            Some(_) => {
                p.at -= 1;
                return p.err("expected '+' or end of formula");
            }
        }
    }
    Ok(MeanFormula { terms })
}

fn mean_factor(p: &mut Parser) -> Result<MeanTerm> {
    let name = p.ident()?;
    if p.peek() == Some(&Tok::LParen) {
        if name != "C" {
            return p.err(format!("unknown function '{name}'"));
        }
        p.at += 1;
        let col = p.ident()?;
        p.expect(Tok::RParen, "')'")?;
        Ok(MeanTerm::Categorical(col))
    } else {
        Ok(MeanTerm::Numeric(name))
    }
}

/// One pair-covariate term; each produces one column of `W`.
#[derive(Debug, Clone, PartialEq)]
pub enum CorrTerm {
    Intercept,
    /// 1 when both observations share the value of the column.
    Same(String),
    /// 1 when both observations take the given value.
    BothEq(String, String),
    /// Signed difference `c_j - c_k` for the pair `(j, k)`, `j > k`.
    Diff(String),
    AbsDiff(String),
    SqDiff(String),
    LogAbsDiff(String),
}

impl CorrTerm {
    pub fn column(&self) -> Option<&str> {
        match self {
            CorrTerm::Intercept => None,
            CorrTerm::Same(c)
            | CorrTerm::BothEq(c, _)
            | CorrTerm::Diff(c)
            | CorrTerm::AbsDiff(c)
            | CorrTerm::SqDiff(c)
            | CorrTerm::LogAbsDiff(c) => Some(c),
        }
    }
}

impl fmt::Display for CorrTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorrTerm::Intercept => write!(f, "intercept"),
            CorrTerm::Same(c) => write!(f, "same({c})"),
            CorrTerm::BothEq(c, v) => write!(f, "botheq({c},{v})"),
            CorrTerm::Diff(c) => write!(f, "diff({c})"),
            CorrTerm::AbsDiff(c) => write!(f, "absdiff({c})"),
            CorrTerm::SqDiff(c) => write!(f, "sqdiff({c})"),
            CorrTerm::LogAbsDiff(c) => write!(f, "logabsdiff({c})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorrFormula {
    pub terms: Vec<CorrTerm>,
}

impl fmt::Display for CorrFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.terms.iter().map(ToString::to_string).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

pub fn parse_corr_formula(text: &str) -> Result<CorrFormula> {
    let mut p = Parser::new(text)?;
    if p.done() {
        return p.err("correlation formula is empty (write 'intercept' explicitly)");
    }
    let mut terms = Vec::new();
    loop {
        terms.push(corr_term(&mut p)?);
        match p.next() {
            None => break,
            Some(Tok::Plus) => continue,
            Some(_) => {
                p.at -= 1;
                return p.err("expected '+' or end of formula");
            }
        }
    }
    Ok(CorrFormula { terms })
}

fn corr_term(p: &mut Parser) -> Result<CorrTerm> {
    let start = p.at;
    let name = p.ident()?;
    if name == "intercept" {
        return Ok(CorrTerm::Intercept);
    }
    if p.peek() != Some(&Tok::LParen) {
        p.at = start;
        return p.err(format!("unknown correlation term '{name}'"));
    }
    p.at += 1;
    let col = p.ident()?;
    let term = match name.as_str() {
        "same" => CorrTerm::Same(col),
        "diff" => CorrTerm::Diff(col),
        "absdiff" => CorrTerm::AbsDiff(col),
        "sqdiff" => CorrTerm::SqDiff(col),
        "logabsdiff" => CorrTerm::LogAbsDiff(col),
        "botheq" => {
            p.expect(Tok::Comma, "','")?;
            let value = match p.next() {
                Some(Tok::Ident(s)) | Some(Tok::Number(s)) | Some(Tok::Quoted(s)) => s,
                _ => {
                    p.at -= 1;
                    return p.err("expected a value");
                }
            };
            CorrTerm::BothEq(col, value)
        }
        _ => {
            p.at = start;
            return p.err(format!("unknown correlation term '{name}'"));
        }
    };
    p.expect(Tok::RParen, "')'")?;
    Ok(term)
}
