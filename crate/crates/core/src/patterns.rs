//! Conjunctive patterns over attributes and group coverage.
//!
//! A pattern is a conjunction of simple predicates `attr op value`. The
//! empty conjunction is the tautology. Predicates are kept sorted by
//! `(attr, op, value)`, so equal predicate sets compare and hash equal.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use crate::error::{Error, Result};
use crate::tabular::{AggregateView, Column, Dataset, Kind, MISSING};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Op {
    Eq,
    Lt,
    Gt,
    Le,
    Ge,
}

impl Op {
    pub fn symbol(self) -> &'static str {
        match self {
            Op::Eq => "=",
            Op::Lt => "<",
            Op::Gt => ">",
            Op::Le => "<=",
            Op::Ge => ">=",
        }
    }

    fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Op::Eq => lhs == rhs,
            Op::Lt => lhs < rhs,
            Op::Gt => lhs > rhs,
            Op::Le => lhs <= rhs,
            Op::Ge => lhs >= rhs,
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Right-hand side of a predicate.
#[derive(Debug, Clone)]
pub enum Literal {
    Text(String),
    Number(f64),
}

impl Literal {
    fn rank(&self) -> u8 {
        match self {
            Literal::Text(_) => 0,
            Literal::Number(_) => 1,
        }
    }
}

impl PartialEq for Literal {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Literal {}

impl PartialOrd for Literal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Literal {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Literal::Text(a), Literal::Text(b)) => a.cmp(b),
            (Literal::Number(a), Literal::Number(b)) => a.total_cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl Hash for Literal {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Literal::Text(s) => {
                0u8.hash(state);
                s.hash(state);
            }
            Literal::Number(v) => {
                1u8.hash(state);
                v.to_bits().hash(state);
            }
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Number(v) => write!(f, "{v}"),
            Literal::Text(s) if needs_quotes(s) => {
                f.write_str("\"")?;
                for ch in s.chars() {
                    if ch == '"' || ch == '\\' {
                        f.write_str("\\")?;
                    }
                    write!(f, "{ch}")?;
                }
                f.write_str("\"")
            }
            Literal::Text(s) => f.write_str(s),
        }
    }
}

fn needs_quotes(s: &str) -> bool {
    s.is_empty() || s.chars().any(|c| c.is_whitespace() || matches!(c, '"' | '\\' | '<' | '>' | '='))
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimplePredicate {
    pub attr: String,
    pub op: Op,
    pub value: Literal,
}

impl SimplePredicate {
    pub fn new(attr: impl Into<String>, op: Op, value: Literal) -> SimplePredicate {
        SimplePredicate {
            attr: attr.into(),
            op,
            value,
        }
    }

    pub fn eq(attr: impl Into<String>, value: impl Into<String>) -> SimplePredicate {
        SimplePredicate::new(attr, Op::Eq, Literal::Text(value.into()))
    }
}

impl fmt::Display for SimplePredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.attr, self.op, self.value)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pattern {
    preds: Vec<SimplePredicate>,
}

impl Pattern {
    pub fn empty() -> Pattern {
        Pattern::default()
    }

    /// Canonicalizes the predicates. Rejects two predicates sharing an
    /// `(attr, op)` pair, which also rules out contradictory equalities.
    pub fn new(mut preds: Vec<SimplePredicate>) -> Result<Pattern> {
        preds.sort();
        preds.dedup();
        for w in preds.windows(2) {
            if w[0].attr == w[1].attr && w[0].op == w[1].op {
                return Err(Error::Pattern(format!("conflicting predicates {} and {}", w[0], w[1])));
            }
        }
        Ok(Pattern { preds })
    }

    pub fn single(pred: SimplePredicate) -> Pattern {
        Pattern { preds: vec![pred] }
    }

    pub fn predicates(&self) -> &[SimplePredicate] {
        &self.preds
    }

    pub fn len(&self) -> usize {
        self.preds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.preds.is_empty()
    }

    /// Distinct attributes, sorted.
    pub fn attrs(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.preds.iter().map(|p| p.attr.as_str()).collect();
        out.dedup();
        out
    }

    pub fn with(&self, pred: SimplePredicate) -> Result<Pattern> {
        let mut preds = self.preds.clone();
        preds.push(pred);
        Pattern::new(preds)
    }

    /// The patterns obtained by dropping exactly one predicate.
    pub fn parents(&self) -> impl Iterator<Item = Pattern> + '_ {
        (0..self.preds.len()).map(move |skip| Pattern {
            preds: self
                .preds
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != skip)
                .map(|(_, p)| p.clone())
                .collect(),
        })
    }

    pub fn is_subpattern_of(&self, other: &Pattern) -> bool {
        self.preds.iter().all(|p| other.preds.binary_search(p).is_ok())
    }

    /// Parses `attr op value [AND attr op value ...]`, typing each literal by
    /// the attribute's kind in `d`. Empty text is the tautology.
    pub fn parse(text: &str, d: &Dataset) -> Result<Pattern> {
        let text = text.trim();
        if text.is_empty() {
            return Ok(Pattern::empty());
        }
        let mut preds = Vec::new();
        for part in split_conjuncts(text)? {
            let (attr, op, raw) = split_predicate(&part)?;
            let value = match d.kind(&attr)? {
                Kind::Categorical => Literal::Text(raw.value),
                Kind::Numeric => {
                    if raw.quoted {
                        return Err(Error::Pattern(format!("{attr} is numeric but got a quoted value")));
                    }
                    let v: f64 = raw
                        .value
                        .parse()
                        .ok()
                        .filter(|v: &f64| v.is_finite())
                        .ok_or_else(|| Error::Pattern(format!("{attr}: {:?} is not a number", raw.value)))?;
                    Literal::Number(v)
                }
            };
            preds.push(SimplePredicate::new(attr, op, value));
        }
        let p = Pattern::new(preds)?;
        p.compile(d)?;
        Ok(p)
    }

    /// Binds the pattern to a dataset for fast row evaluation.
    pub fn compile<'a>(&self, d: &'a Dataset) -> Result<CompiledPattern<'a>> {
        let mut preds = Vec::with_capacity(self.preds.len());
        for p in &self.preds {
            let col = d.column_by_name(&p.attr)?;
            preds.push(match (col, &p.value) {
                (Column::Categorical { codes, domain }, Literal::Text(v)) => {
                    if p.op != Op::Eq {
                        return Err(Error::Pattern(format!(
                            "ordering operator on categorical attribute in {p}"
                        )));
                    }
                    let code = domain.binary_search(v).ok().map(|c| c as u32);
                    CompiledPred::CatEq { codes, code }
                }
                (Column::Numeric { values, .. }, Literal::Number(v)) => CompiledPred::Num {
                    values,
                    op: p.op,
                    rhs: *v,
                },
                (Column::Categorical { .. }, Literal::Number(_)) => {
                    return Err(Error::Pattern(format!("numeric literal on categorical attribute in {p}")))
                }
                (Column::Numeric { .. }, Literal::Text(_)) => {
                    return Err(Error::Pattern(format!("text literal on numeric attribute in {p}")))
                }
            });
        }
        Ok(CompiledPattern { preds })
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.preds.iter().enumerate() {
            if i > 0 {
                f.write_str(" AND ")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

struct RawValue {
    value: String,
    quoted: bool,
}

fn split_conjuncts(text: &str) -> Result<Vec<String>> {
    let mut parts = Vec::new();
    let mut current = String::new();
    let mut in_quotes = false;
    let mut escaped = false;
    let bytes: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if in_quotes {
            current.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_quotes = false;
            }
            i += 1;
            continue;
        }
        if c == '"' {
            in_quotes = true;
            current.push(c);
            i += 1;
            continue;
        }
        let rest: String = bytes[i..bytes.len().min(i + 5)].iter().collect();
        if rest == " AND " {
            parts.push(std::mem::take(&mut current));
            i += 5;
            continue;
        }
        current.push(c);
        i += 1;
    }
    if in_quotes {
        return Err(Error::Pattern(format!("unterminated quote in {text:?}")));
    }
    parts.push(current);
    Ok(parts)
}

fn split_predicate(part: &str) -> Result<(String, Op, RawValue)> {
    let pos = part
        .find(['<', '>', '=', '≤', '≥'])
        .ok_or_else(|| Error::Pattern(format!("no operator in {part:?}")))?;
    let attr = part[..pos].trim();
    if attr.is_empty() {
        return Err(Error::Pattern(format!("missing attribute in {part:?}")));
    }
    let rest = &part[pos..];
    let (op, len) = if rest.starts_with("<=") {
        (Op::Le, 2)
    } else if rest.starts_with(">=") {
        (Op::Ge, 2)
    } else if rest.starts_with('≤') {
        (Op::Le, '≤'.len_utf8())
    } else if rest.starts_with('≥') {
        (Op::Ge, '≥'.len_utf8())
    } else if rest.starts_with('<') {
        (Op::Lt, 1)
    } else if rest.starts_with('>') {
        (Op::Gt, 1)
    } else {
        (Op::Eq, 1)
    };
    let raw = rest[len..].trim();
    let value = if let Some(body) = raw.strip_prefix('"') {
        let mut out = String::new();
        let mut chars = body.chars();
        let mut closed = false;
        while let Some(c) = chars.next() {
            match c {
                '\\' => out.push(chars.next().ok_or_else(|| Error::Pattern("dangling escape".into()))?),
                '"' => {
                    closed = true;
                    break;
                }
                c => out.push(c),
            }
        }
        if !closed || !chars.as_str().trim().is_empty() {
            return Err(Error::Pattern(format!("malformed quoted value in {part:?}")));
        }
        RawValue { value: out, quoted: true }
    } else {
        if raw.is_empty() {
            return Err(Error::Pattern(format!("missing value in {part:?}")));
        }
        RawValue {
            value: raw.to_string(),
            quoted: false,
        }
    };
    Ok((attr.to_string(), op, value))
}

enum CompiledPred<'a> {
    CatEq { codes: &'a [u32], code: Option<u32> },
    Num { values: &'a [Option<f64>], op: Op, rhs: f64 },
}

impl CompiledPred<'_> {
    #[inline]
    fn holds(&self, row: usize) -> bool {
        match self {
            CompiledPred::CatEq { codes, code } => match code {
                Some(c) => codes[row] == *c && *c != MISSING,
                None => false,
            },
            CompiledPred::Num { values, op, rhs } => match values[row] {
                Some(v) => op.holds(v, *rhs),
                None => false,
            },
        }
    }
}

/// A pattern bound to one dataset's columns.
pub struct CompiledPattern<'a> {
    preds: Vec<CompiledPred<'a>>,
}

impl CompiledPattern<'_> {
    /// Missing cells never satisfy a predicate.
    #[inline]
    pub fn matches(&self, row: usize) -> bool {
        self.preds.iter().all(|p| p.holds(row))
    }

    pub fn filter(&self, rows: &[usize]) -> Vec<usize> {
        rows.iter().copied().filter(|&r| self.matches(r)).collect()
    }
}

/// Evaluates `p` on one row of `d`.
pub fn matches(p: &Pattern, d: &Dataset, row: usize) -> Result<bool> {
    Ok(p.compile(d)?.matches(row))
}

/// Indices of the view's groups whose rows satisfy `pg`. Every attribute of
/// `pg` must be a grouping attribute, so one representative row decides for
/// the whole group.
pub fn covered_groups(
    pg: &Pattern,
    d: &Dataset,
    grouping_attrs: &[String],
    view: &AggregateView,
) -> Result<Vec<usize>> {
    for attr in pg.attrs() {
        if !grouping_attrs.iter().any(|a| a == attr) {
            return Err(Error::Pattern(format!(
                "{attr} is not functionally determined by the group-by attributes"
            )));
        }
    }
    let compiled = pg.compile(d)?;
    Ok(view
        .representatives
        .iter()
        .enumerate()
        .filter(|&(_, &r)| compiled.matches(r))
        .map(|(g, _)| g)
        .collect())
}

/// Equal-frequency cut points splitting sorted values into `bins` bins.
/// Cuts equal to the maximum are dropped since `> cut` would be empty.
pub fn quantile_cuts(sorted: &[f64], bins: usize) -> Vec<f64> {
    let n = sorted.len();
    if n == 0 || bins < 2 {
        return Vec::new();
    }
    let max = sorted[n - 1];
    let mut cuts: Vec<f64> = (1..bins)
        .map(|b| sorted[(b * n).div_ceil(bins) - 1])
        .filter(|&c| c < max)
        .collect();
    cuts.dedup();
    cuts
}
