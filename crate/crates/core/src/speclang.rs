//! The small text format describing shift systems (`.shift` files).
//!
//! A file holds one system description:
//!
//! ```text
//! # golden-mean shift
//! sft {
//!     alphabet = "01";
//!     forbid = ["11"];
//! }
//! ```
//!
//! Kinds: `full`, `periodic`, `sft`, `substitution`, `sturmian`, `noninv`,
//! `product`. Entries are `key = value;` with values that are numbers
//! (integer, decimal, or fraction `p/q` / `p/2^e`), quoted strings (no escape
//! sequences), identifiers, or bracketed lists. `#` starts a comment running
//! to the end of the line.
//!
//! Parsing is a pure function of the input text. Product references are kept
//! as written and resolved against the file system only when an oracle is
//! built from the description.

use std::fmt::Write as _;
use std::str::FromStr;

use num_integer::Integer;
use thiserror::Error;

use crate::dyadic::Dyadic;
use crate::words::RealWord;

/// Denominator cap for rational rotation numbers; enumeration scans a full
/// period, so unbounded denominators would defeat the budget checks.
pub const MAX_ROTATION_DENOMINATOR: u64 = 100_000;

/// The rational slope the symbolic name `golden` denotes: a convergent of
/// the golden rotation with denominator comfortably past the default
/// complexity horizons.
pub const GOLDEN_SLOPE: (u64, u64) = (377, 610);

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}, col {col}: {msg}")]
pub struct SpecError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl SpecError {
    fn new(pos: Pos, msg: impl Into<String>) -> Self {
        SpecError { line: pos.line, col: pos.col, msg: msg.into() }
    }
}

/// A parsed, semantically checked system description.
#[derive(Debug, Clone, PartialEq)]
pub enum SystemSpec {
    /// Full shift over the given alphabet.
    Full { alphabet: Vec<String> },
    /// Union of the orbits of the given periodic words.
    Periodic { words: Vec<Vec<String>> },
    /// Shift of finite type given by forbidden factors.
    Sft { alphabet: Vec<String>, forbidden: Vec<Vec<String>> },
    /// Substitution system (primitivity is checked when the oracle is built).
    Substitution { alphabet: Vec<String>, rules: Vec<(String, Vec<String>)> },
    /// Coding of the rotation by `num/den` over the two-cell partition
    /// split at `1 - num/den`.
    Sturmian { num: u64, den: u64 },
    /// Staged non-invertible construction seeded by `x0`.
    Noninv { x0: RealWord, d_max: Option<u64> },
    /// Product of two referenced system files (paths relative to this file).
    Product { left: String, right: String },
}

impl SystemSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            SystemSpec::Full { .. } => "full",
            SystemSpec::Periodic { .. } => "periodic",
            SystemSpec::Sft { .. } => "sft",
            SystemSpec::Substitution { .. } => "substitution",
            SystemSpec::Sturmian { .. } => "sturmian",
            SystemSpec::Noninv { .. } => "noninv",
            SystemSpec::Product { .. } => "product",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pos {
    line: usize,
    col: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Int(i64),
    Rat(i64, u64),
    Dec(f64),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Eq,
    Semi,
    Comma,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier {s:?}"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Int(n) => format!("number {n}"),
            Tok::Rat(p, q) => format!("number {p}/{q}"),
            Tok::Dec(v) => format!("number {v}"),
            Tok::LBrace => "'{'".into(),
            Tok::RBrace => "'}'".into(),
            Tok::LBracket => "'['".into(),
            Tok::RBracket => "']'".into(),
            Tok::Eq => "'='".into(),
            Tok::Semi => "';'".into(),
            Tok::Comma => "','".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, SpecError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize| {
        if chars[*i] == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
        *i += 1;
    };
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        match c {
            ' ' | '\t' | '\r' | '\n' => advance(&mut i, &mut line, &mut col),
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    advance(&mut i, &mut line, &mut col);
                }
            }
            '{' | '}' | '[' | ']' | '=' | ';' | ',' => {
                out.push((
                    match c {
                        '{' => Tok::LBrace,
                        '}' => Tok::RBrace,
                        '[' => Tok::LBracket,
                        ']' => Tok::RBracket,
                        '=' => Tok::Eq,
                        ';' => Tok::Semi,
                        _ => Tok::Comma,
                    },
                    pos,
                ));
                advance(&mut i, &mut line, &mut col);
            }
            '"' => {
                advance(&mut i, &mut line, &mut col);
                let start = i;
                while i < chars.len() && chars[i] != '"' && chars[i] != '\n' {
                    advance(&mut i, &mut line, &mut col);
                }
                if i >= chars.len() || chars[i] != '"' {
                    return Err(SpecError::new(pos, "unterminated string"));
                }
                out.push((Tok::Str(chars[start..i].iter().collect()), pos));
                advance(&mut i, &mut line, &mut col);
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    advance(&mut i, &mut line, &mut col);
                }
                out.push((Tok::Ident(chars[start..i].iter().collect()), pos));
            }
            _ if c.is_ascii_digit() || c == '-' => {
                let start = i;
                advance(&mut i, &mut line, &mut col);
                while i < chars.len() && chars[i].is_ascii_digit() {
                    advance(&mut i, &mut line, &mut col);
                }
                let int_part: String = chars[start..i].iter().collect();
                let int_val = i64::from_str(&int_part)
                    .map_err(|_| SpecError::new(pos, format!("bad number {int_part:?}")))?;
                if i < chars.len() && chars[i] == '.' {
                    advance(&mut i, &mut line, &mut col);
                    let frac_start = i;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        advance(&mut i, &mut line, &mut col);
                    }
                    if i == frac_start {
                        return Err(SpecError::new(pos, "missing digits after decimal point"));
                    }
                    let lit: String = chars[start..i].iter().collect();
                    let v = f64::from_str(&lit)
                        .map_err(|_| SpecError::new(pos, format!("bad number {lit:?}")))?;
                    out.push((Tok::Dec(v), pos));
                } else if i < chars.len() && chars[i] == '/' {
                    advance(&mut i, &mut line, &mut col);
                    let den = if i + 1 < chars.len() && chars[i] == '2' && chars[i + 1] == '^' {
                        advance(&mut i, &mut line, &mut col);
                        advance(&mut i, &mut line, &mut col);
                        let e_start = i;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            advance(&mut i, &mut line, &mut col);
                        }
                        let e_lit: String = chars[e_start..i].iter().collect();
                        let e = u32::from_str(&e_lit)
                            .map_err(|_| SpecError::new(pos, "bad exponent in denominator"))?;
                        1u64.checked_shl(e)
                            .ok_or_else(|| SpecError::new(pos, "denominator too large"))?
                    } else {
                        let d_start = i;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            advance(&mut i, &mut line, &mut col);
                        }
                        let d_lit: String = chars[d_start..i].iter().collect();
                        u64::from_str(&d_lit)
                            .map_err(|_| SpecError::new(pos, "bad denominator"))?
                    };
                    if den == 0 {
                        return Err(SpecError::new(pos, "zero denominator"));
                    }
                    out.push((Tok::Rat(int_val, den), pos));
                } else {
                    out.push((Tok::Int(int_val), pos));
                }
            }
            _ => return Err(SpecError::new(pos, format!("unexpected character {c:?}"))),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Ident(String),
    Str(String),
    Int(i64),
    Rat(i64, u64),
    Dec(f64),
    List(Vec<(Value, Pos)>),
}

impl Value {
    fn type_name(&self) -> &'static str {
        match self {
            Value::Ident(_) => "identifier",
            Value::Str(_) => "string",
            Value::Int(_) | Value::Rat(..) | Value::Dec(_) => "number",
            Value::List(_) => "list",
        }
    }
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    end: Pos,
}

impl Parser {
    fn peek(&self) -> Option<&(Tok, Pos)> {
        self.toks.get(self.at)
    }

    fn next(&mut self, expected: &str) -> Result<(Tok, Pos), SpecError> {
        let t = self
            .toks
            .get(self.at)
            .cloned()
            .ok_or_else(|| SpecError::new(self.end, format!("expected {expected}, found end of input")))?;
        self.at += 1;
        Ok(t)
    }

    fn expect(&mut self, want: Tok, expected: &str) -> Result<Pos, SpecError> {
        let (t, pos) = self.next(expected)?;
        if t == want {
            Ok(pos)
        } else {
            Err(SpecError::new(pos, format!("expected {expected}, found {}", t.describe())))
        }
    }

    fn value(&mut self) -> Result<(Value, Pos), SpecError> {
        let (t, pos) = self.next("a value")?;
        let v = match t {
            Tok::Ident(s) => Value::Ident(s),
            Tok::Str(s) => Value::Str(s),
            Tok::Int(n) => Value::Int(n),
            Tok::Rat(p, q) => Value::Rat(p, q),
            Tok::Dec(v) => Value::Dec(v),
            Tok::LBracket => {
                let mut items = Vec::new();
                loop {
                    if let Some((Tok::RBracket, _)) = self.peek() {
                        self.at += 1;
                        break;
                    }
                    items.push(self.value()?);
                    match self.next("',' or ']'")? {
                        (Tok::Comma, _) => continue,
                        (Tok::RBracket, _) => break,
                        (other, p) => {
                            return Err(SpecError::new(
                                p,
                                format!("expected ',' or ']', found {}", other.describe()),
                            ))
                        }
                    }
                }
                Value::List(items)
            }
            other => {
                return Err(SpecError::new(pos, format!("expected a value, found {}", other.describe())))
            }
        };
        Ok((v, pos))
    }
}

/// Parses and semantically checks a system description.
pub fn parse_spec(text: &str) -> Result<SystemSpec, SpecError> {
    let toks = lex(text)?;
    let end = toks
        .last()
        .map(|&(_, p)| Pos { line: p.line, col: p.col + 1 })
        .unwrap_or(Pos { line: 1, col: 1 });
    let mut p = Parser { toks, at: 0, end };

    let (kind_tok, kind_pos) = p.next("a system kind")?;
    let kind = match kind_tok {
        Tok::Ident(s) => s,
        other => {
            return Err(SpecError::new(
                kind_pos,
                format!("expected a system kind, found {}", other.describe()),
            ))
        }
    };
    p.expect(Tok::LBrace, "'{'")?;
    let mut entries: Vec<(String, Value, Pos)> = Vec::new();
    loop {
        let (t, pos) = p.next("a key or '}'")?;
        match t {
            Tok::RBrace => break,
            Tok::Ident(key) => {
                if entries.iter().any(|(k, _, _)| *k == key) {
                    return Err(SpecError::new(pos, format!("duplicate key {key:?}")));
                }
                p.expect(Tok::Eq, "'='")?;
                let (v, _) = p.value()?;
                p.expect(Tok::Semi, "';'")?;
                entries.push((key, v, pos));
            }
            other => {
                return Err(SpecError::new(pos, format!("expected a key or '}}', found {}", other.describe())))
            }
        }
    }
    if let Some((t, pos)) = p.peek() {
        return Err(SpecError::new(*pos, format!("trailing {} after system block", t.describe())));
    }

    realize(&kind, kind_pos, entries)
}

struct Entries {
    kind_pos: Pos,
    items: Vec<(String, Value, Pos)>,
}

impl Entries {
    fn take(&mut self, key: &str) -> Option<(Value, Pos)> {
        let idx = self.items.iter().position(|(k, _, _)| k == key)?;
        let (_, v, pos) = self.items.remove(idx);
        Some((v, pos))
    }

    fn require(&mut self, key: &str) -> Result<(Value, Pos), SpecError> {
        self.take(key)
            .ok_or_else(|| SpecError::new(self.kind_pos, format!("missing key {key:?}")))
    }

    fn finish(self) -> Result<(), SpecError> {
        if let Some((k, _, pos)) = self.items.into_iter().next() {
            return Err(SpecError::new(pos, format!("unknown key {k:?}")));
        }
        Ok(())
    }
}

fn string_value(v: Value, pos: Pos, what: &str) -> Result<String, SpecError> {
    match v {
        Value::Str(s) => Ok(s),
        other => Err(SpecError::new(pos, format!("{what} must be a string, found {}", other.type_name()))),
    }
}

fn string_list(v: Value, pos: Pos, what: &str) -> Result<Vec<(String, Pos)>, SpecError> {
    match v {
        Value::List(items) => items
            .into_iter()
            .map(|(v, p)| string_value(v, p, what).map(|s| (s, p)))
            .collect(),
        other => Err(SpecError::new(pos, format!("{what} must be a list, found {}", other.type_name()))),
    }
}

fn alphabet_value(v: Value, pos: Pos) -> Result<Vec<String>, SpecError> {
    let s = string_value(v, pos, "alphabet")?;
    let symbols: Vec<String> = s.chars().map(|c| c.to_string()).collect();
    if symbols.is_empty() {
        return Err(SpecError::new(pos, "alphabet is empty"));
    }
    if symbols.len() > 255 {
        return Err(SpecError::new(pos, "alphabet has more than 255 symbols"));
    }
    for (i, a) in symbols.iter().enumerate() {
        if symbols[..i].contains(a) {
            return Err(SpecError::new(pos, format!("alphabet repeats symbol {a:?}")));
        }
    }
    Ok(symbols)
}

fn word_over(s: &str, alphabet: &[String], pos: Pos, what: &str) -> Result<Vec<String>, SpecError> {
    if s.is_empty() {
        return Err(SpecError::new(pos, format!("{what} is empty")));
    }
    s.chars()
        .map(|c| {
            let sym = c.to_string();
            if alphabet.contains(&sym) {
                Ok(sym)
            } else {
                Err(SpecError::new(pos, format!("{what} uses symbol {sym:?} outside the alphabet")))
            }
        })
        .collect()
}

fn dyadic_value(v: &Value, pos: Pos, what: &str) -> Result<Dyadic, SpecError> {
    match v {
        Value::Int(n) => Ok(Dyadic::from_int(*n)),
        Value::Dec(x) => Dyadic::from_f64(*x)
            .ok_or_else(|| SpecError::new(pos, format!("{what} is not finite"))),
        Value::Rat(p, q) => {
            if !q.is_power_of_two() {
                return Err(SpecError::new(
                    pos,
                    format!("{what} must be dyadic (denominator a power of two), got {p}/{q}"),
                ));
            }
            Ok(Dyadic::ratio(*p, q.trailing_zeros()))
        }
        other => Err(SpecError::new(pos, format!("{what} must be a number, found {}", other.type_name()))),
    }
}

fn realize(kind: &str, kind_pos: Pos, items: Vec<(String, Value, Pos)>) -> Result<SystemSpec, SpecError> {
    let mut e = Entries { kind_pos, items };
    let spec = match kind {
        "full" => {
            let (v, pos) = e.require("alphabet")?;
            SystemSpec::Full { alphabet: alphabet_value(v, pos)? }
        }
        "periodic" => {
            let (v, pos) = e.require("words")?;
            let raw = string_list(v, pos, "periodic word")?;
            if raw.is_empty() {
                return Err(SpecError::new(pos, "periodic system needs at least one word"));
            }
            let mut alphabet: Vec<String> = raw
                .iter()
                .flat_map(|(w, _)| w.chars().map(|c| c.to_string()))
                .collect();
            alphabet.sort();
            alphabet.dedup();
            let words = raw
                .into_iter()
                .map(|(w, p)| word_over(&w, &alphabet, p, "periodic word"))
                .collect::<Result<Vec<_>, _>>()?;
            SystemSpec::Periodic { words }
        }
        "sft" => {
            let (av, apos) = e.require("alphabet")?;
            let alphabet = alphabet_value(av, apos)?;
            let (fv, fpos) = e.require("forbid")?;
            let forbidden = string_list(fv, fpos, "forbidden factor")?
                .into_iter()
                .map(|(w, p)| word_over(&w, &alphabet, p, "forbidden factor"))
                .collect::<Result<Vec<_>, _>>()?;
            SystemSpec::Sft { alphabet, forbidden }
        }
        "substitution" => {
            let (av, apos) = e.require("alphabet")?;
            let alphabet = alphabet_value(av, apos)?;
            let (rv, rpos) = e.require("rules")?;
            let raw = string_list(rv, rpos, "substitution rule")?;
            let mut rules: Vec<(String, Vec<String>)> = Vec::new();
            for (r, p) in raw {
                let (lhs, rhs) = r
                    .split_once("->")
                    .ok_or_else(|| SpecError::new(p, format!("rule {r:?} is not of the form a->image")))?;
                let lhs = lhs.trim();
                let rhs = rhs.trim();
                if lhs.chars().count() != 1 || !alphabet.contains(&lhs.to_string()) {
                    return Err(SpecError::new(p, format!("rule {r:?} must map a single alphabet symbol")));
                }
                if rules.iter().any(|(a, _)| a == lhs) {
                    return Err(SpecError::new(p, format!("duplicate rule for symbol {lhs:?}")));
                }
                rules.push((lhs.to_string(), word_over(rhs, &alphabet, p, "rule image")?));
            }
            for a in &alphabet {
                if !rules.iter().any(|(l, _)| l == a) {
                    return Err(SpecError::new(rpos, format!("no rule for symbol {a:?}")));
                }
            }
            SystemSpec::Substitution { alphabet, rules }
        }
        "sturmian" => {
            let (v, pos) = e.require("alpha")?;
            let (num, den) = match v {
                Value::Ident(name) if name == "golden" => GOLDEN_SLOPE,
                Value::Rat(p, q) => {
                    if p <= 0 {
                        return Err(SpecError::new(pos, "alpha must be positive"));
                    }
                    (p as u64, q)
                }
                other => {
                    return Err(SpecError::new(
                        pos,
                        format!("alpha must be a fraction p/q or `golden`, found {}", other.type_name()),
                    ))
                }
            };
            let g = num.gcd(&den);
            let (num, den) = (num / g, den / g);
            if num >= den {
                return Err(SpecError::new(pos, "alpha must lie strictly between 0 and 1"));
            }
            if den > MAX_ROTATION_DENOMINATOR {
                return Err(SpecError::new(
                    pos,
                    format!("alpha denominator exceeds the cap {MAX_ROTATION_DENOMINATOR}"),
                ));
            }
            SystemSpec::Sturmian { num, den }
        }
        "noninv" => {
            let (v, pos) = e.require("x0")?;
            let items = match v {
                Value::List(items) => items,
                other => {
                    return Err(SpecError::new(pos, format!("x0 must be a list, found {}", other.type_name())))
                }
            };
            if items.is_empty() {
                return Err(SpecError::new(pos, "x0 is empty"));
            }
            let x0: RealWord = items
                .iter()
                .map(|(v, p)| {
                    let d = dyadic_value(v, *p, "x0 entry")?;
                    if d.is_negative() || d > Dyadic::one() {
                        return Err(SpecError::new(*p, format!("x0 entry {d} is outside [0, 1]")));
                    }
                    Ok(d)
                })
                .collect::<Result<_, _>>()?;
            if x0.iter().all(Dyadic::is_zero) {
                return Err(SpecError::new(pos, "x0 must have a nonzero entry"));
            }
            let d_max = match e.take("dmax") {
                None => None,
                Some((Value::Int(n), p)) => {
                    if n < 1 {
                        return Err(SpecError::new(p, "dmax must be at least 1"));
                    }
                    Some(n as u64)
                }
                Some((other, p)) => {
                    return Err(SpecError::new(p, format!("dmax must be an integer, found {}", other.type_name())))
                }
            };
            SystemSpec::Noninv { x0, d_max }
        }
        "product" => {
            let (lv, lpos) = e.require("left")?;
            let (rv, rpos) = e.require("right")?;
            let left = string_value(lv, lpos, "left reference")?;
            let right = string_value(rv, rpos, "right reference")?;
            if left.is_empty() || right.is_empty() {
                return Err(SpecError::new(kind_pos, "product references must be nonempty paths"));
            }
            SystemSpec::Product { left, right }
        }
        other => {
            return Err(SpecError::new(kind_pos, format!("unknown system kind {other:?}")));
        }
    };
    e.finish()?;
    Ok(spec)
}

/// Renders a description in canonical form; `parse_spec` inverts this.
pub fn pretty_print(spec: &SystemSpec) -> String {
    fn quote(s: &str) -> String {
        format!("\"{s}\"")
    }
    fn quoted_list(words: &[Vec<String>]) -> String {
        let items: Vec<String> = words.iter().map(|w| quote(&w.concat())).collect();
        format!("[{}]", items.join(", "))
    }
    let mut out = String::new();
    match spec {
        SystemSpec::Full { alphabet } => {
            let _ = writeln!(out, "full {{");
            let _ = writeln!(out, "    alphabet = {};", quote(&alphabet.concat()));
        }
        SystemSpec::Periodic { words } => {
            let _ = writeln!(out, "periodic {{");
            let _ = writeln!(out, "    words = {};", quoted_list(words));
        }
        SystemSpec::Sft { alphabet, forbidden } => {
            let _ = writeln!(out, "sft {{");
            let _ = writeln!(out, "    alphabet = {};", quote(&alphabet.concat()));
            let _ = writeln!(out, "    forbid = {};", quoted_list(forbidden));
        }
        SystemSpec::Substitution { alphabet, rules } => {
            let _ = writeln!(out, "substitution {{");
            let _ = writeln!(out, "    alphabet = {};", quote(&alphabet.concat()));
            let items: Vec<String> = rules
                .iter()
                .map(|(l, img)| quote(&format!("{l}->{}", img.concat())))
                .collect();
            let _ = writeln!(out, "    rules = [{}];", items.join(", "));
        }
        SystemSpec::Sturmian { num, den } => {
            let _ = writeln!(out, "sturmian {{");
            let _ = writeln!(out, "    alpha = {num}/{den};");
        }
        SystemSpec::Noninv { x0, d_max } => {
            let _ = writeln!(out, "noninv {{");
            let items: Vec<String> = x0.iter().map(Dyadic::to_string).collect();
            let _ = writeln!(out, "    x0 = [{}];", items.join(", "));
            if let Some(d) = d_max {
                let _ = writeln!(out, "    dmax = {d};");
            }
        }
        SystemSpec::Product { left, right } => {
            let _ = writeln!(out, "product {{");
            let _ = writeln!(out, "    left = {};", quote(left));
            let _ = writeln!(out, "    right = {};", quote(right));
        }
    }
    out.push_str("}\n");
    out
}
