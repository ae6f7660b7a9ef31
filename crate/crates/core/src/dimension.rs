//! Pressure P(s) = limsup (1/n)[(1−s)·log Q_n − s·α(n)], its zero (the Bowen
//! parameter), the closed form limsup log Q_n/(log Q_n + α(n)), and the
//! closed forms for the standard families.
//!
//! Every limsup is replaced by a maximum over the tail window
//! [⌈w·N⌉, N]; the residual compares it with the maximum over the upper half
//! of that window.

use std::fmt;

use rug::Integer;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::real::LogReal;
use crate::sequences::{CumulativeCache, SequenceSpec, Target};

pub const DEFAULT_WINDOW: f64 = 0.5;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const MAX_BISECTION_STEPS: usize = 60;
/// Relative spread of α_n/log q_n above which the corollary reports no limit.
pub const NO_LIMIT_SPREAD: f64 = 1e-3;
/// Growth of α_n/log q_n across the window treated as divergence to ∞.
pub const DIVERGENCE_GROWTH: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedFormLimsup,
    BowenBisection,
    CorollaryLimit,
    FamilyFormula,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    /// The ratio α_n/log q_n does not settle inside the window.
    NoLimit,
    /// The ratio grows through the window; reported as L = ∞.
    Divergent,
}

#[derive(Debug, Clone, Serialize)]
pub struct DimensionEstimate {
    pub value: f64,
    pub method: Method,
    pub window: (usize, usize),
    pub residual: f64,
    pub flag: Option<Flag>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PressureProfile {
    pub s: f64,
    pub window: (usize, usize),
    /// (n, f_n(s)) in increasing n.
    pub samples: Vec<(usize, f64)>,
}

/// f64 snapshots of log Q_n and α(n) over a tail window.
struct Window {
    lo: usize,
    hi: usize,
    log_q: Vec<f64>,
    alpha: Vec<f64>,
}

impl Window {
    fn load(
        q: &mut CumulativeCache,
        alpha: &mut CumulativeCache,
        n_hi: usize,
        window_fraction: f64,
    ) -> Result<Self> {
        if n_hi < 10 {
            return Err(Error::InvalidArgument(format!("n-max must be >= 10, got {n_hi}")));
        }
        if !(window_fraction > 0.0 && window_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "window fraction must lie in (0, 1), got {window_fraction}"
            )));
        }
        q.log_partial_product(n_hi)?;
        alpha.alpha_partial_sum(n_hi)?;
        let lo = ((window_fraction * n_hi as f64).ceil() as usize).clamp(1, n_hi);
        let snap = |c: &CumulativeCache| -> Vec<f64> {
            (lo..=n_hi)
                .map(|n| c.cached_sum(n).expect("extended above").to_f64())
                .collect()
        };
        Ok(Window {
            lo,
            hi: n_hi,
            log_q: snap(q),
            alpha: snap(alpha),
        })
    }

    /// Offset of the first index of the upper half.
    fn half(&self) -> usize {
        (self.hi - self.lo) / 2
    }

    fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.lo..=self.hi
    }

    fn pressure_term(&self, i: usize, s: f64) -> f64 {
        let n = (self.lo + i) as f64;
        ((1.0 - s) * self.log_q[i] - s * self.alpha[i]) / n
    }

    fn pressure_from(&self, start: usize, s: f64) -> f64 {
        (start..self.log_q.len())
            .map(|i| self.pressure_term(i, s))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn g(&self, i: usize) -> f64 {
        let l = self.log_q[i];
        l / (l + self.alpha[i])
    }

    fn g_max_from(&self, start: usize) -> f64 {
        (start..self.log_q.len()).map(|i| self.g(i)).fold(0.0, f64::max)
    }

    /// Bisection for the sign change of the windowed pressure.
    fn bowen_from(&self, start: usize, tol: f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..MAX_BISECTION_STEPS {
            if hi - lo < tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.pressure_from(start, mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

fn check_s(s: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidArgument(format!("{what} must lie in [0, 1], got {s}")));
    }
    Ok(())
}

/// Maximum of f_n(s) over the tail window, with the sampled profile.
pub fn pressure_estimate(
    q: &mut CumulativeCache,
    alpha: &mut CumulativeCache,
    s: f64,
    n_hi: usize,
    window_fraction: f64,
) -> Result<(f64, PressureProfile)> {
    check_s(s, "s")?;
    let w = Window::load(q, alpha, n_hi, window_fraction)?;
    let samples: Vec<(usize, f64)> = w
        .indices()
        .enumerate()
        .map(|(i, n)| (n, w.pressure_term(i, s)))
        .collect();
    let value = samples.iter().map(|&(_, v)| v).fold(f64::NEG_INFINITY, f64::max);
    Ok((
        value,
        PressureProfile {
            s,
            window: (w.lo, w.hi),
            samples,
        },
    ))
}

/// f_n(s) as a ball, from the cached partial sums.
pub fn pressure_term(
    q: &mut CumulativeCache,
    alpha: &mut CumulativeCache,
    n: usize,
    s: &LogReal,
) -> Result<LogReal> {
    let log_q = q.log_partial_product(n)?.clone();
    let a = alpha.alpha_partial_sum(n)?.clone();
    let prec = log_q.prec();
    let one = LogReal::from_i64(prec, 1);
    let numer = &(&(&one - s) * &log_q) - &(s * &a);
    numer
        .div(&LogReal::from_i64(prec, n as i64))
        .map_err(Error::Domain)
}

/// The zero of the windowed pressure by bisection on [0, 1].
pub fn bowen_parameter(
    q: &mut CumulativeCache,
    alpha: &mut CumulativeCache,
    n_hi: usize,
    tol: f64,
    window_fraction: f64,
) -> Result<DimensionEstimate> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument(format!("tol must be > 0, got {tol}")));
    }
    let w = Window::load(q, alpha, n_hi, window_fraction)?;
    let value = w.bowen_from(0, tol);
    let upper = w.bowen_from(w.half(), tol);
    Ok(DimensionEstimate {
        value,
        method: Method::BowenBisection,
        window: (w.lo, w.hi),
        residual: (value - upper).abs(),
        flag: None,
    })
}

/// Maximum of g_n = log Q_n/(log Q_n + α(n)) over the tail window.
pub fn dimension_limsup(
    q: &mut CumulativeCache,
    alpha: &mut CumulativeCache,
    n_hi: usize,
    window_fraction: f64,
) -> Result<DimensionEstimate> {
    let w = Window::load(q, alpha, n_hi, window_fraction)?;
    let value = w.g_max_from(0);
    let upper = w.g_max_from(w.half());
    Ok(DimensionEstimate {
        value,
        method: Method::ClosedFormLimsup,
        window: (w.lo, w.hi),
        residual: (value - upper).abs(),
        flag: None,
    })
}

/// (n, g_n) over the tail window.
pub fn limsup_profile(
    q: &mut CumulativeCache,
    alpha: &mut CumulativeCache,
    n_hi: usize,
    window_fraction: f64,
) -> Result<Vec<(usize, f64)>> {
    let w = Window::load(q, alpha, n_hi, window_fraction)?;
    Ok(w.indices().enumerate().map(|(i, n)| (n, w.g(i))).collect())
}

/// 1/(1+L) with L estimated as the mean of α_n/log q_n over the window.
pub fn corollary_limit(
    q: &mut CumulativeCache,
    alpha: &mut CumulativeCache,
    n_hi: usize,
    window_fraction: f64,
) -> Result<DimensionEstimate> {
    let w = Window::load(q, alpha, n_hi, window_fraction)?;
    // Single terms as differences of consecutive cached sums, taken at the
    // cache's precision before rounding to f64.
    let term = |c: &CumulativeCache, n: usize| -> f64 {
        let cur = c.cached_sum(n).expect("extended above").mid();
        match n.checked_sub(1).and_then(|m| c.cached_sum(m)) {
            Some(prev) => rug::Float::with_val(cur.prec(), cur - prev.mid()).to_f64(),
            None => cur.to_f64(),
        }
    };
    let ratios: Vec<f64> = w.indices().map(|n| term(alpha, n) / term(q, n)).collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let (min, max) = ratios
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &r| (a.min(r), b.max(r)));
    let spread = max - min;
    let window = (w.lo, w.hi);

    let first = ratios[0];
    let last = *ratios.last().expect("window is nonempty");
    let monotone = ratios.windows(2).all(|p| p[1] >= p[0]);
    if monotone && last > 0.0 && (first <= 0.0 || last / first >= DIVERGENCE_GROWTH) {
        return Ok(DimensionEstimate {
            value: 0.0,
            method: Method::CorollaryLimit,
            window,
            residual: spread,
            flag: Some(Flag::Divergent),
        });
    }
    let flag = (spread > NO_LIMIT_SPREAD * mean.abs().max(1.0)).then_some(Flag::NoLimit);
    Ok(DimensionEstimate {
        value: 1.0 / (1.0 + mean),
        method: Method::CorollaryLimit,
        window,
        residual: spread,
        flag,
    })
}

/// The families with a known closed-form dimension.
#[derive(Debug, Clone)]
pub enum Family {
    /// Eventually periodic Q with α ≡ c: log G/(log G + c), G the geometric
    /// mean of the period.
    EventuallyPeriodic { period: Vec<Integer>, c: Expr },
    /// q_n ~ n^k with α_n = c·log n: k/(k + c).
    Polynomial { k: Expr, c: Expr },
    /// q_n ~ b^n with α_n = c·n: log b/(log b + c).
    Exponential { b: Expr, c: Expr },
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::EventuallyPeriodic { period, .. } => {
                let p: Vec<String> = period.iter().map(|q| q.to_string()).collect();
                write!(f, "eventually periodic, period ({})", p.join(","))
            }
            Family::Polynomial { .. } => f.write_str("polynomial growth"),
            Family::Exponential { .. } => f.write_str("exponential growth"),
        }
    }
}

fn constant(text: &str) -> Result<Expr> {
    let e = Expr::parse(text, 0)?;
    if e.uses_n() {
        return Err(Error::InvalidArgument(format!("'{text}' must not depend on n")));
    }
    Ok(e)
}

fn eval_constant(e: &Expr, prec: u32) -> Result<LogReal> {
    e.eval(1, prec, false)
        .map_err(|err| Error::Domain(format!("{err:?}")))
}

impl Family {
    /// Parses `periodic:2,3;c=1`, `eventually:5|2,3;c=1`, `poly:k=1/6;c=1`
    /// or `exp:b=2;c=log(2)`.
    pub fn parse(text: &str) -> Result<Self> {
        let unsupported = || Error::UnsupportedFamily(text.to_string());
        let mut parts = text.split(';').map(str::trim);
        let head = parts.next().ok_or_else(unsupported)?;
        let mut params = std::collections::BTreeMap::new();
        for part in parts {
            let (k, v) = part.split_once('=').ok_or_else(unsupported)?;
            params.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |key: &str, params: &std::collections::BTreeMap<String, String>| {
            params
                .get(key)
                .ok_or_else(|| Error::InvalidArgument(format!("family '{text}' needs '{key}='")))
                .and_then(|v| constant(v))
        };
        let (kind, rest) = head.split_once(':').ok_or_else(unsupported)?;
        if !rest.trim().is_empty() {
            // Inline parameter, e.g. `poly:k=1/6`.
            if let Some((k, v)) = rest.split_once('=') {
                params.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        let family = match kind.trim() {
            "periodic" | "eventually" | "const" => {
                let spec = SequenceSpec::parse(head, Target::Base)?;
                let (_, period) = spec.periodic_base().ok_or_else(unsupported)?;
                Family::EventuallyPeriodic {
                    period,
                    c: get("c", &params)?,
                }
            }
            "poly" => Family::Polynomial {
                k: get("k", &params)?,
                c: get("c", &params)?,
            },
            "exp" => Family::Exponential {
                b: get("b", &params)?,
                c: get("c", &params)?,
            },
            _ => return Err(unsupported()),
        };
        Ok(family)
    }

    /// Recognizes an eventually periodic Q paired with a constant α.
    pub fn infer(q: &SequenceSpec, alpha: &SequenceSpec) -> Result<Self> {
        let unsupported = || {
            Error::UnsupportedFamily(format!(
                "no closed form known for Q = {}, alpha = {}",
                q.text(),
                alpha.text()
            ))
        };
        let (_, period) = q.periodic_base().ok_or_else(unsupported)?;
        let (pre, per) = alpha.periodic_weight().ok_or_else(unsupported)?;
        let first = per.first().ok_or_else(unsupported)?;
        let constant_alpha = pre.is_empty()
            && per
                .iter()
                .all(|v| v.mid() == first.mid() && v.rad() == first.rad());
        if !constant_alpha {
            return Err(unsupported());
        }
        let c = match alpha.kind() {
            crate::sequences::SpecKind::Constant(e) => e.clone(),
            crate::sequences::SpecKind::Periodic(v) => v[0].clone(),
            _ => return Err(unsupported()),
        };
        Ok(Family::EventuallyPeriodic { period, c })
    }

    /// The closed-form dimension at precision `prec`.
    pub fn dimension(&self, prec: u32) -> Result<LogReal> {
        let (num, c) = match self {
            Family::EventuallyPeriodic { period, c } => {
                let mut sum = LogReal::zero(prec);
                for p in period {
                    sum = &sum + &LogReal::from_integer(prec, p).ln().map_err(Error::Domain)?;
                }
                let m = LogReal::from_i64(prec, period.len() as i64);
                (sum.div(&m).map_err(Error::Domain)?, eval_constant(c, prec)?)
            }
            Family::Polynomial { k, c } => {
                let k = eval_constant(k, prec)?;
                if k.sign() != Some(std::cmp::Ordering::Greater) {
                    return Err(Error::InvalidArgument("k must be > 0".into()));
                }
                (k, eval_constant(c, prec)?)
            }
            Family::Exponential { b, c } => {
                let log_b = eval_constant(b, prec)?.ln().map_err(Error::Domain)?;
                if log_b.sign() != Some(std::cmp::Ordering::Greater) {
                    return Err(Error::InvalidArgument("b must be > 1".into()));
                }
                (log_b, eval_constant(c, prec)?)
            }
        };
        if c.sign() == Some(std::cmp::Ordering::Less) {
            return Err(Error::InvalidArgument("c must be >= 0".into()));
        }
        num.div(&(&num + &c)).map_err(Error::Domain)
    }
}

pub fn family_formula(family: &Family, prec: u32) -> Result<LogReal> {
    family.dimension(prec)
}

#[derive(Debug, Clone, Serialize)]
pub struct StolzReport {
    pub n: usize,
    /// a_N/b_N.
    pub term_ratio: f64,
    /// a_{⌈N/2⌉}/b_{⌈N/2⌉}, to show whether the term ratio is still moving.
    pub term_ratio_half: f64,
    /// (a_1+…+a_N)/(b_1+…+b_N).
    pub sum_ratio: f64,
    pub gap: f64,
}

/// Compares the term ratio a_n/b_n with the partial-sum ratio at N.
pub fn stolz_check(a: &mut CumulativeCache, b: &mut CumulativeCache, n_hi: usize) -> Result<StolzReport> {
    if n_hi == 0 {
        return Err(Error::InvalidArgument("n-max must be >= 1".into()));
    }
    let ratio = |x: LogReal, y: LogReal| -> Result<f64> {
        if y.sign() != Some(std::cmp::Ordering::Greater) {
            return Err(Error::InvalidArgument(
                "the denominator sequence b must be positive".into(),
            ));
        }
        Ok(x.div(&y).map_err(Error::Domain)?.to_f64())
    };
    let half = n_hi.div_ceil(2);
    let term_ratio = ratio(a.weight_term(n_hi)?, b.weight_term(n_hi)?)?;
    let term_ratio_half = ratio(a.weight_term(half)?, b.weight_term(half)?)?;
    let sum_ratio = ratio(a.sum(n_hi)?.clone(), b.sum(n_hi)?.clone())?;
    Ok(StolzReport {
        n: n_hi,
        term_ratio,
        term_ratio_half,
        sum_ratio,
        gap: (term_ratio - sum_ratio).abs(),
    })
}
