//! Declarative text format for covariance specs.
//!
//! ```text
//! kappa = 3
//! potts { beta = 1.0 }
//! term { coeff = 0.25, p = 2, exponents = [1, 2], vectors = [[1, 0, 0], [0, 1, 0]] }
//! ```
//!
//! `#` starts a comment. Fields inside a block may be separated by commas or
//! newlines. Unknown keys are rejected.

use super::{CovarianceSpec, InteractionTerm, WeightedTerm};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Eq,
    LBrace,
    RBrace,
    LBrack,
    RBrack,
    Comma,
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("");
        let chars: Vec<char> = body.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let single = match c {
                '=' => Some(Tok::Eq),
                '{' => Some(Tok::LBrace),
                '}' => Some(Tok::RBrace),
                '[' => Some(Tok::LBrack),
                ']' => Some(Tok::RBrack),
                ',' => Some(Tok::Comma),
                _ => None,
            };
            if let Some(t) = single {
                out.push((t, line));
                i += 1;
            } else if c.is_whitespace() {
                i += 1;
            } else if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push((Tok::Ident(chars[start..i].iter().collect()), line));
            } else if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' {
                let start = i;
                i += 1;
                while i < chars.len()
                    && (chars[i].is_ascii_alphanumeric() || matches!(chars[i], '.' | '-' | '+'))
                {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                let v: f64 = s.parse().map_err(|_| err(line, format!("invalid number `{s}`")))?;
                out.push((Tok::Num(v), line));
            } else {
                return Err(err(line, format!("unexpected character `{c}`")));
            }
        }
    }
    Ok(out)
}

#[derive(Debug)]
enum Value {
    Num(f64),
    List(Vec<Value>),
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    last_line: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn line(&self) -> usize {
        self.toks.get(self.pos).map_or(self.last_line, |t| t.1)
    }

    fn next(&mut self) -> Result<Tok> {
        let line = self.line();
        let t = self.toks.get(self.pos).cloned().ok_or_else(|| err(line, "unexpected end of input"))?;
        self.pos += 1;
        Ok(t.0)
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        let line = self.line();
        let got = self.next()?;
        if got == want {
            Ok(())
        } else {
            Err(err(line, format!("expected {what}, found {got:?}")))
        }
    }

    fn value(&mut self) -> Result<Value> {
        let line = self.line();
        match self.next()? {
            Tok::Num(v) => Ok(Value::Num(v)),
            Tok::LBrack => {
                let mut items = Vec::new();
                loop {
                    if self.peek() == Some(&Tok::RBrack) {
                        self.pos += 1;
                        break;
                    }
                    items.push(self.value()?);
                    match self.peek() {
                        Some(Tok::Comma) => self.pos += 1,
                        Some(Tok::RBrack) => {}
                        _ => return Err(err(self.line(), "expected `,` or `]` in list")),
                    }
                }
                Ok(Value::List(items))
            }
            t => Err(err(line, format!("expected a number or list, found {t:?}"))),
        }
    }

    /// Parses `{ key = value, ... }` and returns the fields with their lines.
    fn block(&mut self) -> Result<Vec<(String, Value, usize)>> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut fields = Vec::new();
        loop {
            let line = self.line();
            match self.next()? {
                Tok::RBrace => break,
                Tok::Comma => continue,
                Tok::Ident(key) => {
                    self.expect(Tok::Eq, "`=`")?;
                    let v = self.value()?;
                    if fields.iter().any(|(k, _, _): &(String, Value, usize)| *k == key) {
                        return Err(err(line, format!("duplicate key `{key}`")));
                    }
                    fields.push((key, v, line));
                }
                t => return Err(err(line, format!("expected a key or `}}`, found {t:?}"))),
            }
        }
        Ok(fields)
    }
}

fn as_num(v: &Value, key: &str, line: usize) -> Result<f64> {
    match v {
        Value::Num(x) => Ok(*x),
        Value::List(_) => Err(err(line, format!("`{key}` must be a number"))),
    }
}

fn as_uint(v: &Value, key: &str, line: usize) -> Result<u32> {
    let x = as_num(v, key, line)?;
    if x.fract() != 0.0 || x < 0.0 || x > u32::MAX as f64 {
        return Err(err(line, format!("`{key}` must be a nonnegative integer, got {x}")));
    }
    Ok(x as u32)
}

fn as_list<'a>(v: &'a Value, key: &str, line: usize) -> Result<&'a [Value]> {
    match v {
        Value::List(items) => Ok(items),
        Value::Num(_) => Err(err(line, format!("`{key}` must be a list"))),
    }
}

fn take<'a>(fields: &'a [(String, Value, usize)], key: &str, block: &str, line: usize) -> Result<(&'a Value, usize)> {
    fields
        .iter()
        .find(|(k, _, _)| k == key)
        .map(|(_, v, l)| (v, *l))
        .ok_or_else(|| err(line, format!("`{block}` block is missing `{key}`")))
}

fn reject_unknown(fields: &[(String, Value, usize)], allowed: &[&str], block: &str) -> Result<()> {
    for (k, _, l) in fields {
        if !allowed.contains(&k.as_str()) {
            return Err(err(*l, format!("unknown key `{k}` in `{block}` block")));
        }
    }
    Ok(())
}

pub(super) fn parse(text: &str) -> Result<CovarianceSpec> {
    let toks = tokenize(text)?;
    let last_line = text.lines().count().max(1);
    let mut p = Parser { toks, pos: 0, last_line };
    let mut kappa: Option<usize> = None;
    // (line, term) pairs; dimensions are checked once kappa is known
    let mut pending: Vec<(usize, PendingTerm)> = Vec::new();

    while p.peek().is_some() {
        let line = p.line();
        match p.next()? {
            Tok::Ident(kw) => match kw.as_str() {
                "kappa" => {
                    p.expect(Tok::Eq, "`=`")?;
                    let v = p.value()?;
                    if kappa.is_some() {
                        return Err(err(line, "`kappa` given twice"));
                    }
                    let k = as_uint(&v, "kappa", line)? as usize;
                    if k < 2 {
                        return Err(err(line, "`kappa` must be >= 2"));
                    }
                    kappa = Some(k);
                }
                "potts" => {
                    let fields = p.block()?;
                    reject_unknown(&fields, &["beta"], "potts")?;
                    let (v, l) = take(&fields, "beta", "potts", line)?;
                    let beta = as_num(v, "beta", l)?;
                    if !beta.is_finite() {
                        return Err(err(l, "`beta` must be finite"));
                    }
                    pending.push((line, PendingTerm::Potts(beta)));
                }
                "term" => {
                    let fields = p.block()?;
                    reject_unknown(&fields, &["coeff", "p", "exponents", "vectors"], "term")?;
                    let (v, l) = take(&fields, "coeff", "term", line)?;
                    let coeff = as_num(v, "coeff", l)?;
                    if !coeff.is_finite() || coeff < 0.0 {
                        return Err(err(l, format!("`coeff` must be finite and >= 0, got {coeff}")));
                    }
                    let (v, l) = take(&fields, "p", "term", line)?;
                    let pp = as_uint(v, "p", l)?;
                    let (v, l) = take(&fields, "exponents", "term", line)?;
                    let exponents = as_list(v, "exponents", l)?
                        .iter()
                        .map(|x| as_uint(x, "exponents", l))
                        .collect::<Result<Vec<_>>>()?;
                    let (v, l) = take(&fields, "vectors", "term", line)?;
                    let vectors = as_list(v, "vectors", l)?
                        .iter()
                        .map(|row| {
                            as_list(row, "vectors", l)?
                                .iter()
                                .map(|x| as_num(x, "vectors", l))
                                .collect::<Result<Vec<_>>>()
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let term = InteractionTerm::new(pp, exponents, vectors).map_err(|e| err(line, e.to_string()))?;
                    pending.push((line, PendingTerm::Term(coeff, term)));
                }
                other => return Err(err(line, format!("unknown key `{other}`"))),
            },
            t => return Err(err(line, format!("expected `kappa`, `potts` or `term`, found {t:?}"))),
        }
    }

    let kappa = kappa.ok_or_else(|| err(1, "missing `kappa`"))?;
    let mut terms = Vec::with_capacity(pending.len());
    for (line, t) in pending {
        match t {
            PendingTerm::Potts(beta) => terms.push(WeightedTerm { coeff: beta * beta, term: InteractionTerm::potts(kappa) }),
            PendingTerm::Term(coeff, term) => {
                if term.kappa() != kappa {
                    return Err(err(line, format!("vectors have length {} but kappa = {kappa}", term.kappa())));
                }
                terms.push(WeightedTerm { coeff, term });
            }
        }
    }
    CovarianceSpec::new(kappa, terms)
}

enum PendingTerm {
    Potts(f64),
    Term(f64, InteractionTerm),
}

fn fmt_list<T: std::fmt::Display>(xs: &[T]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| x.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

/// Floats are written with Rust's shortest round-trip representation.
pub(super) fn to_text(spec: &CovarianceSpec) -> String {
    let mut out = format!("kappa = {}\n", spec.kappa);
    for t in &spec.terms {
        let exps: Vec<u32> = t.term.factors.iter().map(|f| f.exponent).collect();
        let vecs: Vec<String> = t.term.factors.iter().map(|f| fmt_list(&f.w)).collect();
        out.push_str(&format!(
            "term {{ coeff = {:?}, p = {}, exponents = {}, vectors = [{}] }}\n",
            t.coeff,
            t.term.p,
            fmt_list(&exps),
            vecs.join(", ")
        ));
    }
    out
}
