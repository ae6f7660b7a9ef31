//! Base sequences Q = (q_n) and weight sequences α = (α_n).
//!
//! A [`SequenceSpec`] is parsed from a short text form (`const:2`,
//! `periodic:2,3`, `eventually:5|2,3`, `expr:2^n`, `table:path`) and can be
//! evaluated at any index n ≥ 1. A [`CumulativeCache`] grows the partial
//! sums log Q_n (base) or α(n) (weight) append-only and hands out exact
//! products Q_n on request, up to a bit cap.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rug::Integer;

use crate::error::{Error, Result};
use crate::expr::{EvalError, Expr};
use crate::real::{Floor, LogReal};

/// Working precision for term evaluation and partial sums.
pub const DEFAULT_PRECISION: u32 = 256;

/// Exact products above this many bits are not materialized.
pub const DEFAULT_CAP_BITS: u64 = 1 << 20;

/// Indices probed when an expression spec is parsed.
const PROBE_TERMS: u64 = 16;

/// Floors that remain ambiguous stop escalating at this precision unless
/// the value itself is wider.
const MIN_ESCALATION_PREC: u32 = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Base,
    Weight,
}

impl Target {
    fn name(self) -> &'static str {
        match self {
            Target::Base => "base",
            Target::Weight => "weight",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpecKind {
    Constant(Expr),
    Periodic(Vec<Expr>),
    EventuallyPeriodic { preperiod: Vec<Expr>, period: Vec<Expr> },
    Expression(Expr),
    Table(Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Base(Integer),
    Weight(LogReal),
}

#[derive(Clone)]
pub struct SequenceSpec {
    target: Target,
    kind: SpecKind,
    text: String,
    precision: u32,
    /// Pre-evaluated values for every kind except `Expression`, laid out as
    /// preperiod followed by period (or the table rows).
    fixed: Vec<Term>,
}

impl fmt::Debug for SequenceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SequenceSpec({:?}, {:?})", self.target, self.text)
    }
}

impl SequenceSpec {
    pub fn parse(text: &str, target: Target) -> Result<Self> {
        Self::parse_with_precision(text, target, DEFAULT_PRECISION)
    }

    pub fn parse_with_precision(text: &str, target: Target, precision: u32) -> Result<Self> {
        if precision < 32 {
            return Err(Error::InvalidArgument(format!(
                "precision must be at least 32 bits, got {precision}"
            )));
        }
        let Some(colon) = text.find(':') else {
            return Err(Error::Parse {
                pos: 0,
                msg: "expected '<kind>:<payload>'".into(),
            });
        };
        let kind_name = text[..colon].trim();
        let payload = &text[colon + 1..];
        let offset = colon + 1;
        let kind = match kind_name {
            "const" => SpecKind::Constant(constant_item(payload, offset)?),
            "periodic" => SpecKind::Periodic(item_list(payload, offset)?),
            "eventually" => {
                let Some(bar) = payload.find('|') else {
                    return Err(Error::Parse {
                        pos: offset + payload.len(),
                        msg: "expected '|' between preperiod and period".into(),
                    });
                };
                SpecKind::EventuallyPeriodic {
                    preperiod: item_list(&payload[..bar], offset)?,
                    period: item_list(&payload[bar + 1..], offset + bar + 1)?,
                }
            }
            "expr" => SpecKind::Expression(Expr::parse(payload, offset)?),
            "table" => SpecKind::Table(read_table(payload.trim())?),
            other => {
                return Err(Error::Parse {
                    pos: 0,
                    msg: format!(
                        "unknown sequence kind '{other}' (const, periodic, eventually, expr, table)"
                    ),
                })
            }
        };
        let mut spec = SequenceSpec {
            target,
            kind,
            text: text.to_string(),
            precision,
            fixed: Vec::new(),
        };
        let items: Vec<Expr> = match &spec.kind {
            SpecKind::Constant(e) => vec![e.clone()],
            SpecKind::Periodic(v) | SpecKind::Table(v) => v.clone(),
            SpecKind::EventuallyPeriodic { preperiod, period } => {
                preperiod.iter().chain(period).cloned().collect()
            }
            SpecKind::Expression(_) => Vec::new(),
        };
        let mut fixed = Vec::with_capacity(items.len());
        for item in &items {
            fixed.push(spec.eval_item(item, 1, precision, false)?);
        }
        spec.fixed = fixed;
        if let SpecKind::Expression(_) = spec.kind {
            for n in 1..=PROBE_TERMS {
                spec.term(n as usize)?;
            }
        }
        Ok(spec)
    }

    pub fn target(&self) -> Target {
        self.target
    }

    pub fn kind(&self) -> &SpecKind {
        &self.kind
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    /// Preperiod and period of a base sequence with a fixed repeating
    /// structure (`const`, `periodic`, `eventually`).
    pub fn periodic_base(&self) -> Option<(Vec<Integer>, Vec<Integer>)> {
        if self.target != Target::Base {
            return None;
        }
        let ints: Vec<Integer> = self
            .fixed
            .iter()
            .map(|t| match t {
                Term::Base(q) => q.clone(),
                Term::Weight(_) => unreachable!("base spec holds base terms"),
            })
            .collect();
        match &self.kind {
            SpecKind::Constant(_) | SpecKind::Periodic(_) => Some((Vec::new(), ints)),
            SpecKind::EventuallyPeriodic { preperiod, .. } => {
                let k = preperiod.len();
                Some((ints[..k].to_vec(), ints[k..].to_vec()))
            }
            _ => None,
        }
    }

    /// Preperiod and period of a weight sequence with a fixed repeating
    /// structure.
    pub fn periodic_weight(&self) -> Option<(Vec<LogReal>, Vec<LogReal>)> {
        if self.target != Target::Weight {
            return None;
        }
        let vals: Vec<LogReal> = self
            .fixed
            .iter()
            .map(|t| match t {
                Term::Weight(w) => w.clone(),
                Term::Base(_) => unreachable!("weight spec holds weight terms"),
            })
            .collect();
        match &self.kind {
            SpecKind::Constant(_) | SpecKind::Periodic(_) => Some((Vec::new(), vals)),
            SpecKind::EventuallyPeriodic { preperiod, .. } => {
                let k = preperiod.len();
                Some((vals[..k].to_vec(), vals[k..].to_vec()))
            }
            _ => None,
        }
    }

    /// Position in `fixed` holding term n, for non-expression kinds.
    fn fixed_index(&self, n: usize) -> Result<usize> {
        match &self.kind {
            SpecKind::Constant(_) => Ok(0),
            SpecKind::Periodic(p) => Ok((n - 1) % p.len()),
            SpecKind::EventuallyPeriodic { preperiod, period } => {
                let k = preperiod.len();
                if n <= k {
                    Ok(n - 1)
                } else {
                    Ok(k + (n - k - 1) % period.len())
                }
            }
            SpecKind::Table(rows) => {
                if n > rows.len() {
                    Err(Error::OutOfRange { n, len: rows.len() })
                } else {
                    Ok(n - 1)
                }
            }
            SpecKind::Expression(_) => unreachable!("expressions have no fixed table"),
        }
    }

    fn check_index(n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::InvalidArgument("sequence index must be >= 1".into()));
        }
        Ok(())
    }

    /// The n-th term: q_n for base specs, α_n for weight specs.
    pub fn term(&self, n: usize) -> Result<Term> {
        Self::check_index(n)?;
        match &self.kind {
            SpecKind::Expression(e) => self.eval_item(e, n as u64, self.precision, true),
            _ => Ok(self.fixed[self.fixed_index(n)?].clone()),
        }
    }

    pub fn base_term(&self, n: usize) -> Result<Integer> {
        self.expect(Target::Base)?;
        match self.term(n)? {
            Term::Base(q) => Ok(q),
            Term::Weight(_) => unreachable!(),
        }
    }

    pub fn weight_term(&self, n: usize) -> Result<LogReal> {
        self.weight_term_at(n, self.precision)
    }

    /// α_n evaluated at an explicit precision.
    pub fn weight_term_at(&self, n: usize, prec: u32) -> Result<LogReal> {
        self.expect(Target::Weight)?;
        Self::check_index(n)?;
        if prec == self.precision {
            if let SpecKind::Expression(_) = self.kind {
            } else {
                return match &self.fixed[self.fixed_index(n)?] {
                    Term::Weight(w) => Ok(w.clone()),
                    Term::Base(_) => unreachable!(),
                };
            }
        }
        let expr = match &self.kind {
            SpecKind::Expression(e) => e,
            SpecKind::Constant(e) => e,
            SpecKind::Periodic(v) | SpecKind::Table(v) => &v[self.fixed_index(n)?],
            SpecKind::EventuallyPeriodic { preperiod, period } => {
                let i = self.fixed_index(n)?;
                if i < preperiod.len() {
                    &preperiod[i]
                } else {
                    &period[i - preperiod.len()]
                }
            }
        };
        match self.eval_item(expr, n as u64, prec, true)? {
            Term::Weight(w) => Ok(w),
            Term::Base(_) => unreachable!(),
        }
    }

    /// log q_n (base) or α_n (weight) at precision `prec`.
    pub fn log_term_at(&self, n: usize, prec: u32) -> Result<LogReal> {
        match self.target {
            Target::Base => {
                let q = self.base_term(n)?;
                LogReal::from_integer(prec, &q).ln().map_err(Error::Domain)
            }
            Target::Weight => self.weight_term_at(n, prec),
        }
    }

    /// Σ_{i≤n} of [`log_term_at`](Self::log_term_at), summed left to right
    /// from scratch. Matches the cached value bit for bit at the spec's own
    /// precision.
    pub fn partial_sum_at(&self, n: usize, prec: u32) -> Result<LogReal> {
        let mut acc = LogReal::zero(prec);
        for i in 1..=n {
            acc = &acc + &self.log_term_at(i, prec)?;
        }
        Ok(acc)
    }

    fn expect(&self, target: Target) -> Result<()> {
        if self.target != target {
            return Err(Error::WrongTarget {
                expected: target.name(),
                found: self.target.name(),
            });
        }
        Ok(())
    }

    fn eval_item(&self, expr: &Expr, n: u64, prec: u32, floor_result: bool) -> Result<Term> {
        let is_expression = matches!(self.kind, SpecKind::Expression(_));
        match self.target {
            Target::Base => {
                let mut p = prec;
                loop {
                    let (value, ambiguous_inside) = match expr.eval(n, p, false) {
                        Ok(v) => (v, false),
                        Err(EvalError::Domain(m)) => return Err(domain_at(n, m)),
                        Err(EvalError::AmbiguousFloor) => (
                            expr.eval(n, p, true)
                                .map_err(|e| domain_at(n, format!("{e:?}")))?,
                            true,
                        ),
                    };
                    if !value.is_finite() {
                        return Err(domain_at(n, "term is not finite".into()));
                    }
                    if !ambiguous_inside {
                        if is_expression && floor_result {
                            if let Floor::Exact(q) = value.floor() {
                                return check_base(q, n);
                            }
                        } else if value.is_exact() {
                            if value.mid().is_integer() {
                                return check_base(value.mid().to_integer().expect("finite"), n);
                            }
                            return Err(domain_at(
                                n,
                                format!("base terms must be integers, got {value}"),
                            ));
                        } else if let Floor::Exact(_) = value.floor() {
                            if value.lower().floor() != value.lower() {
                                return Err(domain_at(
                                    n,
                                    format!("base terms must be integers, got {value}"),
                                ));
                            }
                        }
                    }
                    let wide = value.mid().get_exp().unwrap_or(0).max(0) as u32;
                    if p >= MIN_ESCALATION_PREC.max(wide.saturating_add(256)) {
                        // Still straddling an integer: take the midpoint's floor.
                        let mut m = value.mid().clone();
                        m.floor_mut();
                        return check_base(m.to_integer().expect("finite"), n);
                    }
                    p = p.saturating_mul(2);
                }
            }
            Target::Weight => {
                let mut p = prec;
                loop {
                    let v = match expr.eval(n, p, p >= MIN_ESCALATION_PREC) {
                        Ok(v) => v,
                        Err(EvalError::Domain(m)) => return Err(domain_at(n, m)),
                        Err(EvalError::AmbiguousFloor) => {
                            p = p.saturating_mul(2);
                            continue;
                        }
                    };
                    if !v.is_finite() {
                        return Err(domain_at(n, "weight is not finite".into()));
                    }
                    match v.sign() {
                        Some(std::cmp::Ordering::Less) => {
                            return Err(domain_at(n, format!("weight {v} is negative")))
                        }
                        None if p < MIN_ESCALATION_PREC => {
                            p = p.saturating_mul(2);
                            continue;
                        }
                        None if v.mid().cmp0() == Some(std::cmp::Ordering::Less) => {
                            return Err(domain_at(n, format!("weight {v} may be negative")))
                        }
                        _ => {}
                    }
                    let v = if p == prec { v } else { v.with_prec(prec) };
                    return Ok(Term::Weight(v));
                }
            }
        }
    }
}

fn domain_at(n: u64, msg: String) -> Error {
    Error::Domain(format!("at n = {n}: {msg}"))
}

fn check_base(q: Integer, n: u64) -> Result<Term> {
    if q < 2 {
        return Err(domain_at(n, format!("base term {q} is below 2")));
    }
    Ok(Term::Base(q))
}

fn constant_item(text: &str, offset: usize) -> Result<Expr> {
    let e = Expr::parse(text, offset)?;
    if e.uses_n() {
        return Err(Error::Parse {
            pos: offset,
            msg: "constant terms may not depend on n (use expr:)".into(),
        });
    }
    Ok(e)
}

fn item_list(text: &str, offset: usize) -> Result<Vec<Expr>> {
    let mut out = Vec::new();
    let mut start = 0;
    for piece in text.split(',') {
        out.push(constant_item(piece, offset + start)?);
        start += piece.len() + 1;
    }
    Ok(out)
}

fn read_table(path: &str) -> Result<Vec<Expr>> {
    let body = std::fs::read_to_string(Path::new(path))?;
    let mut rows = Vec::new();
    for (lineno, line) in body.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let e = Expr::parse(line, 0).map_err(|e| match e {
            Error::Parse { pos, msg } => Error::Parse {
                pos,
                msg: format!("{path}:{}: {msg}", lineno + 1),
            },
            other => other,
        })?;
        if e.uses_n() {
            return Err(Error::Parse {
                pos: 0,
                msg: format!("{path}:{}: table rows may not depend on n", lineno + 1),
            });
        }
        rows.push(e);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            pos: 0,
            msg: format!("{path}: table is empty"),
        });
    }
    Ok(rows)
}

/// Append-only cache of partial sums and exact partial products.
///
/// Extension needs `&mut self`; reads through `&self` are safe to share
/// across threads once a prefix has been materialized.
#[derive(Debug, Clone)]
pub struct CumulativeCache {
    spec: SequenceSpec,
    sums: Vec<LogReal>,
    exact_products: BTreeMap<usize, Integer>,
    cap_bits: u64,
}

impl CumulativeCache {
    pub fn new(spec: SequenceSpec) -> Self {
        CumulativeCache {
            spec,
            sums: Vec::new(),
            exact_products: BTreeMap::new(),
            cap_bits: DEFAULT_CAP_BITS,
        }
    }

    pub fn with_cap_bits(mut self, cap_bits: u64) -> Self {
        self.cap_bits = cap_bits;
        self
    }

    pub fn parse(text: &str, target: Target) -> Result<Self> {
        Ok(Self::new(SequenceSpec::parse(text, target)?))
    }

    pub fn spec(&self) -> &SequenceSpec {
        &self.spec
    }

    pub fn cap_bits(&self) -> u64 {
        self.cap_bits
    }

    pub fn precision(&self) -> u32 {
        self.spec.precision
    }

    /// Number of materialized partial sums.
    pub fn len(&self) -> usize {
        self.sums.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sums.is_empty()
    }

    pub fn extend_to(&mut self, n: usize) -> Result<()> {
        let prec = self.spec.precision;
        self.sums.reserve(n.saturating_sub(self.sums.len()));
        while self.sums.len() < n {
            let i = self.sums.len() + 1;
            let term = self.spec.log_term_at(i, prec)?;
            let next = match self.sums.last() {
                Some(prev) => prev + &term,
                None => &LogReal::zero(prec) + &term,
            };
            self.sums.push(next);
        }
        Ok(())
    }

    /// log Q_n or α(n), extending the cache if needed.
    pub fn sum(&mut self, n: usize) -> Result<&LogReal> {
        SequenceSpec::check_index(n)?;
        self.extend_to(n)?;
        Ok(&self.sums[n - 1])
    }

    /// The partial sum at precision `prec`: the cached ball when the cache
    /// is at least that precise, otherwise a fresh summation.
    pub fn sum_at(&mut self, n: usize, prec: u32) -> Result<LogReal> {
        if prec <= self.spec.precision {
            Ok(self.sum(n)?.clone())
        } else {
            self.spec.partial_sum_at(n, prec)
        }
    }

    /// A previously materialized partial sum.
    pub fn cached_sum(&self, n: usize) -> Option<&LogReal> {
        n.checked_sub(1).and_then(|i| self.sums.get(i))
    }

    /// Σ_{i≤n} log q_i with its accumulated rounding radius.
    pub fn log_partial_product(&mut self, n: usize) -> Result<&LogReal> {
        self.spec.expect(Target::Base)?;
        self.sum(n)
    }

    /// α(n) = Σ_{i≤n} α_i with its accumulated rounding radius.
    pub fn alpha_partial_sum(&mut self, n: usize) -> Result<&LogReal> {
        self.spec.expect(Target::Weight)?;
        self.sum(n)
    }

    pub fn base_term(&self, n: usize) -> Result<Integer> {
        self.spec.base_term(n)
    }

    pub fn weight_term(&self, n: usize) -> Result<LogReal> {
        self.spec.weight_term(n)
    }

    /// Exact Q_n = q_1⋯q_n, or `CapExceeded` when it has more than
    /// `cap_bits` bits. Q_0 = 1.
    pub fn partial_product(&mut self, n: usize) -> Result<&Integer> {
        self.spec.expect(Target::Base)?;
        if n == 0 {
            self.exact_products.entry(0).or_insert_with(|| Integer::from(1));
            return Ok(&self.exact_products[&0]);
        }
        if !self.exact_products.contains_key(&n) {
            // Cheap rejection from the log-domain value before multiplying.
            let log_q = self.sum(n)?.clone();
            let bits_lower = {
                let lo = log_q.lower();
                (lo.to_f64() / std::f64::consts::LN_2).floor()
            };
            if bits_lower > self.cap_bits as f64 {
                return Err(Error::CapExceeded {
                    n,
                    bits: bits_lower as u64 + 1,
                    cap_bits: self.cap_bits,
                });
            }
            let (start, mut acc) = match self.exact_products.range(..n).next_back() {
                Some((&k, v)) => (k, v.clone()),
                None => (0, Integer::from(1)),
            };
            for i in start + 1..=n {
                acc *= self.spec.base_term(i)?;
                let bits = u64::from(acc.significant_bits());
                if bits > self.cap_bits {
                    return Err(Error::CapExceeded {
                        n,
                        bits,
                        cap_bits: self.cap_bits,
                    });
                }
            }
            self.exact_products.insert(n, acc);
        }
        Ok(&self.exact_products[&n])
    }

    /// q_{m+1}⋯q_{m+k}, the product driving the shifted map T^k after m steps.
    pub fn product_range(&self, m: usize, k: usize) -> Result<Integer> {
        self.spec.expect(Target::Base)?;
        let mut acc = Integer::from(1);
        for i in m + 1..=m + k {
            acc *= self.spec.base_term(i)?;
        }
        Ok(acc)
    }

    /// Q_n mod `modulus`, without forming Q_n.
    pub fn product_mod(&self, n: usize, modulus: &Integer) -> Result<Integer> {
        self.spec.expect(Target::Base)?;
        let mut acc = Integer::from(1) % modulus;
        for i in 1..=n {
            acc *= self.spec.base_term(i)? % modulus;
            acc %= modulus;
        }
        Ok(acc)
    }
}
