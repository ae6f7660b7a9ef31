//! Shrinking targets Δ_{n,j} = {x : ‖x − j/Q_n‖ ≤ e^{−α(n)}/Q_n}, membership
//! of orbits in them, and the matching Diophantine view through Q-adic
//! heights and ψ(n) = e^{−α(n)}/Q_n.

use std::cmp::Ordering;

use rug::{Integer, Rational};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expansion::{iterate, nearest_integer_distance, nearest_qadic, ExactPoint};
use crate::real::LogReal;
use crate::sequences::CumulativeCache;

/// Starting precision for verdicts.
pub const DEFAULT_HIT_PRECISION: u32 = 128;
/// Escalation stops once this precision has been tried.
pub const MAX_HIT_PRECISION: u32 = 1024;
/// Terms scanned by [`height`] for sequences without a repeating structure.
pub const DEFAULT_HEIGHT_SCAN: usize = 10_000;

/// Level-n target data in the log domain.
#[derive(Debug, Clone)]
pub struct TargetLevel {
    pub n: usize,
    pub log_qn: LogReal,
    pub alpha_n: LogReal,
    /// −α(n) − log Q_n, the log of each target's half-length.
    pub log_radius: LogReal,
}

pub fn make_level(q: &mut CumulativeCache, alpha: &mut CumulativeCache, n: usize) -> Result<TargetLevel> {
    let log_qn = q.log_partial_product(n)?.clone();
    let alpha_n = alpha.alpha_partial_sum(n)?.clone();
    let log_radius = -(&log_qn + &alpha_n);
    Ok(TargetLevel {
        n,
        log_qn,
        alpha_n,
        log_radius,
    })
}

/// log ψ(n) = −α(n) − log Q_n.
pub fn psi(q: &mut CumulativeCache, alpha: &mut CumulativeCache, n: usize) -> Result<LogReal> {
    Ok(make_level(q, alpha, n)?.log_radius)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Hit,
    Miss,
    Uncertain,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Hit => "hit",
            Status::Miss => "miss",
            Status::Uncertain => "uncertain",
        }
    }
}

#[derive(Debug, Clone)]
pub struct HitVerdict {
    pub status: Status,
    /// log‖T_Q^n x‖ + α(n); `None` when the distance is exactly 0.
    pub margin: Option<LogReal>,
}

impl HitVerdict {
    fn from_margin(margin: LogReal) -> Self {
        let status = match margin.sign() {
            Some(Ordering::Less) | Some(Ordering::Equal) => Status::Hit,
            Some(Ordering::Greater) => Status::Miss,
            None => Status::Uncertain,
        };
        HitVerdict {
            status,
            margin: Some(margin),
        }
    }

    fn exact_hit() -> Self {
        HitVerdict {
            status: Status::Hit,
            margin: None,
        }
    }
}

fn log_rational(r: &Rational, prec: u32) -> Result<LogReal> {
    let num = LogReal::from_integer(prec, r.numer()).ln().map_err(Error::Domain)?;
    let den = LogReal::from_integer(prec, r.denom()).ln().map_err(Error::Domain)?;
    Ok(num - den)
}

/// Decides `log(value) + extra(p) ≤ 0` with escalating precision.
fn decide<F>(value: &Rational, precision: u32, mut extra: F) -> Result<HitVerdict>
where
    F: FnMut(u32) -> Result<LogReal>,
{
    if *value == 0 {
        return Ok(HitVerdict::exact_hit());
    }
    let mut p = precision.max(2);
    loop {
        let verdict = HitVerdict::from_margin(log_rational(value, p)? + extra(p)?);
        if verdict.status != Status::Uncertain || p >= MAX_HIT_PRECISION.max(precision) {
            return Ok(verdict);
        }
        p *= 2;
    }
}

fn verdict_for_distance(
    dist: &Rational,
    alpha: &mut CumulativeCache,
    n: usize,
    precision: u32,
) -> Result<HitVerdict> {
    decide(dist, precision, |p| alpha.sum_at(n, p))
}

/// Is ‖T_Q^n x‖ ≤ e^{−α(n)}?
pub fn hit_test(
    x: &ExactPoint,
    q: &CumulativeCache,
    alpha: &mut CumulativeCache,
    n: usize,
    precision: u32,
) -> Result<HitVerdict> {
    let dist = nearest_integer_distance(iterate(x, q, n)?.value());
    verdict_for_distance(&dist, alpha, n, precision)
}

/// Every level n ≤ `n_max` whose verdict is not a miss, in increasing order.
pub fn hit_levels(
    x: &ExactPoint,
    q: &CumulativeCache,
    alpha: &mut CumulativeCache,
    n_max: usize,
    precision: u32,
) -> Result<Vec<(usize, HitVerdict)>> {
    if n_max == 0 {
        return Err(Error::InvalidArgument("n-max must be >= 1".into()));
    }
    let mut out = Vec::new();
    let mut y = x.clone();
    for n in 1..=n_max {
        // One step of the orbit: T_{Q,n}.
        y = ExactPoint::new(Rational::from(y.value() * q.base_term(n)?));
        let verdict = verdict_for_distance(&nearest_integer_distance(y.value()), alpha, n, precision)?;
        if verdict.status != Status::Miss {
            out.push((n, verdict));
        }
    }
    Ok(out)
}

/// H_Q(w), the least n ≥ 1 with w·Q_n ∈ ℤ.
///
/// Sequences with a repeating structure are decided exactly; others are
/// scanned for `scan` terms.
pub fn height(w: &ExactPoint, q: &CumulativeCache, scan: usize) -> Result<usize> {
    let mut r = w.value().denom().clone();
    if let Some((pre, period)) = q.spec().periodic_base() {
        let mut rest = r.clone();
        for p in &pre {
            strip(&mut rest, p);
        }
        let period_product: Integer = period.iter().product();
        strip_fully(&mut rest, &period_product);
        if rest != 1 {
            return Err(Error::NotQAdic {
                scanned: pre.len() + period.len(),
                exhaustive: true,
            });
        }
        // Termination is now guaranteed.
        let mut n = 1;
        loop {
            strip(&mut r, &q.base_term(n)?);
            if r == 1 {
                return Ok(n);
            }
            n += 1;
        }
    }
    for n in 1..=scan.max(1) {
        strip(&mut r, &q.base_term(n)?);
        if r == 1 {
            return Ok(n);
        }
    }
    Err(Error::NotQAdic {
        scanned: scan.max(1),
        exhaustive: false,
    })
}

/// r ← r / gcd(r, q).
fn strip(r: &mut Integer, q: &Integer) {
    let g = Integer::from(r.gcd_ref(q));
    *r /= g;
}

/// Removes from r every prime that divides q.
fn strip_fully(r: &mut Integer, q: &Integer) {
    loop {
        let g = Integer::from(r.gcd_ref(q));
        if g == 1 {
            return;
        }
        *r /= g;
    }
}

#[derive(Debug, Clone)]
pub enum Witness {
    /// w = index/Q_n with |x − w| ≤ ψ(n) on the circle.
    Found {
        w: ExactPoint,
        index: Integer,
        distance: Rational,
        height: usize,
        margin: Option<LogReal>,
    },
    Absent {
        margin: LogReal,
    },
    Uncertain {
        margin: LogReal,
    },
}

impl Witness {
    pub fn status(&self) -> Status {
        match self {
            Witness::Found { .. } => Status::Hit,
            Witness::Absent { .. } => Status::Miss,
            Witness::Uncertain { .. } => Status::Uncertain,
        }
    }
}

/// The nearest order-n grid point, if it lies within ψ(n) of x.
///
/// Compares log|x − w| + α(n) + log Q_n against 0, independently of
/// the orbit computation in [`hit_test`].
pub fn witness_search(
    x: &ExactPoint,
    q: &mut CumulativeCache,
    alpha: &mut CumulativeCache,
    n: usize,
    precision: u32,
) -> Result<Witness> {
    let near = nearest_qadic(x, q, n)?;
    let verdict = decide(&near.distance, precision, |p| {
        Ok(alpha.sum_at(n, p)? + q.sum_at(n, p)?)
    })?;
    Ok(match verdict.status {
        Status::Hit => {
            let w = near.point();
            let height = height(&w, q, n)?;
            Witness::Found {
                w,
                index: near.index,
                distance: near.distance,
                height,
                margin: verdict.margin,
            }
        }
        Status::Miss => Witness::Absent {
            margin: verdict.margin.expect("misses carry a margin"),
        },
        Status::Uncertain => Witness::Uncertain {
            margin: verdict.margin.expect("uncertain verdicts carry a margin"),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequences::Target;
    use rug::Float;

    fn q(text: &str) -> CumulativeCache {
        CumulativeCache::parse(text, Target::Base).unwrap()
    }

    fn a(text: &str) -> CumulativeCache {
        CumulativeCache::parse(text, Target::Weight).unwrap()
    }

    fn pt(s: &str) -> ExactPoint {
        s.parse().unwrap()
    }

    fn close(ball: &LogReal, value: f64) -> bool {
        (ball.to_f64() - value).abs() < 1e-12
    }

    #[test]
    fn level_examples() {
        let ln2 = std::f64::consts::LN_2;
        let l = make_level(&mut q("const:2"), &mut a("const:0"), 3).unwrap();
        assert!(close(&l.log_radius, -3.0 * ln2));
        let l = make_level(&mut q("periodic:2,3"), &mut a("const:1"), 2).unwrap();
        assert!(close(&l.log_radius, -2.0 - 6f64.ln()));
        let l = make_level(&mut q("expr:2^n"), &mut a("expr:n*log(2)"), 2).unwrap();
        assert!(close(&l.log_radius, -6.0 * ln2));
        assert!(close(&psi(&mut q("const:2"), &mut a("const:0"), 1).unwrap(), -ln2));
    }

    #[test]
    fn radii_strictly_decrease() {
        let mut qc = q("expr:n+1");
        let mut ac = a("expr:log(n)");
        let mut prev = psi(&mut qc, &mut ac, 1).unwrap();
        for n in 2..50 {
            let cur = psi(&mut qc, &mut ac, n).unwrap();
            assert_eq!(cur.cmp_certified(&prev), Some(Ordering::Less));
            prev = cur;
        }
    }

    #[test]
    fn hit_examples() {
        let qc = q("periodic:2,3");
        let mut ac = a("const:1");
        let v = hit_test(&pt("1/6"), &qc, &mut ac, 2, 128).unwrap();
        assert_eq!(v.status, Status::Hit);
        assert!(v.margin.is_none());
        let v = hit_test(&pt("1/4"), &qc, &mut ac, 2, 128).unwrap();
        assert_eq!(v.status, Status::Miss);
        assert!(close(v.margin.as_ref().unwrap(), 0.5f64.ln() + 2.0));
    }

    #[test]
    fn straddling_margin_is_uncertain() {
        // ‖T¹(1/2)‖ = 1/2 under base 3 (3/2 mod 1), and α(1) = log 2 makes
        // the margin log(1/2) + log 2 = 0 up to rounding.
        let qc = q("const:3");
        let mut ac = a("const:log(2)");
        let v = hit_test(&pt("1/2"), &qc, &mut ac, 1, 64).unwrap();
        assert_eq!(v.status, Status::Uncertain);
        assert!(v.margin.unwrap().sign().is_none());
    }

    #[test]
    fn hit_level_examples() {
        let qc = q("periodic:2,3");
        let mut c1 = a("const:1");
        let all: Vec<usize> = hit_levels(&ExactPoint::zero(), &qc, &mut c1, 10, 128)
            .unwrap()
            .into_iter()
            .map(|(n, _)| n)
            .collect();
        assert_eq!(all, (1..=10).collect::<Vec<_>>());

        let mut c3 = a("const:3");
        assert!(hit_levels(&pt("1/5"), &qc, &mut c3, 4, 128).unwrap().is_empty());

        let hits: Vec<usize> = hit_levels(&pt("5/6"), &qc, &mut c1, 4, 128)
            .unwrap()
            .into_iter()
            .map(|(n, _)| n)
            .collect();
        // ‖T¹(5/6)‖ = 1/3 < e^{−1}, then the orbit sits at 0.
        assert_eq!(hits, [1, 2, 3, 4]);
    }

    #[test]
    fn hit_levels_agree_with_hit_test() {
        let qc = q("expr:n+1");
        let mut ac = a("expr:log(n)/2");
        for x in ["1/7", "3/11", "5/6", "2/9"] {
            let x = pt(x);
            let levels = hit_levels(&x, &qc, &mut ac, 12, 128).unwrap();
            for n in 1..=12 {
                let direct = hit_test(&x, &qc, &mut ac, n, 128).unwrap().status;
                let listed = levels.iter().find(|(m, _)| *m == n).map(|(_, v)| v.status);
                assert_eq!(listed.unwrap_or(Status::Miss), direct, "x={x} n={n}");
            }
        }
    }

    #[test]
    fn height_examples() {
        let qc = q("periodic:2,3");
        assert_eq!(height(&pt("1/2"), &qc, 100).unwrap(), 1);
        assert_eq!(height(&pt("1/3"), &qc, 100).unwrap(), 2);
        assert_eq!(height(&ExactPoint::zero(), &qc, 100).unwrap(), 1);
        assert_eq!(height(&pt("1/64"), &qc, 100).unwrap(), 11);
        assert!(matches!(
            height(&pt("1/5"), &qc, 100),
            Err(Error::NotQAdic { exhaustive: true, .. })
        ));
        let e = q("expr:n+1");
        assert_eq!(height(&pt("1/5"), &e, 100).unwrap(), 4);
        assert!(matches!(
            height(&pt("1/1009"), &e, 100),
            Err(Error::NotQAdic { scanned: 100, exhaustive: false })
        ));
    }

    #[test]
    fn height_matches_scan_definition() {
        let mut qc = q("eventually:5|2,3");
        for den in 1..=60u64 {
            for num in 0..den {
                let w = ExactPoint::new(Rational::from((num, den)));
                let by_scan = (1..=40).find(|&n| {
                    let qn = qc.partial_product(n).unwrap().clone();
                    Rational::from(w.value() * &qn).is_integer()
                });
                match (height(&w, &qc, 1000), by_scan) {
                    (Ok(h), Some(s)) => assert_eq!(h, s),
                    (Err(Error::NotQAdic { .. }), None) => {}
                    other => panic!("w={w}: {other:?}"),
                }
            }
        }
    }

    #[test]
    fn witness_examples() {
        let mut qc = q("periodic:2,3");
        let mut ac = a("const:1");
        match witness_search(&pt("1/6"), &mut qc, &mut ac, 2, 128).unwrap() {
            Witness::Found { w, distance, height, .. } => {
                assert_eq!(w, pt("1/6"));
                assert_eq!(distance, 0);
                assert_eq!(height, 2);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            witness_search(&pt("1/4"), &mut qc, &mut ac, 2, 128).unwrap(),
            Witness::Absent { .. }
        ));
        let mut zero = a("const:0");
        for x in ["1/7", "3/11", "1/2", "2/3"] {
            for n in 1..6 {
                let r = witness_search(&pt(x), &mut qc, &mut zero, n, 128).unwrap();
                assert!(matches!(r, Witness::Found { .. }));
            }
        }
    }

    #[test]
    fn margin_matches_scaled_distance() {
        let mut qc = q("periodic:2,3");
        let mut ac = a("const:1");
        for x in ["1/7", "3/13", "2/5"] {
            let x = pt(x);
            for n in 1..10 {
                let v = hit_test(&x, &qc, &mut ac, n, 128).unwrap();
                let near = nearest_qadic(&x, &mut qc, n).unwrap();
                let scaled = Rational::from(&near.distance * &near.modulus);
                let expect = log_rational(&scaled, 128).unwrap() + ac.sum(n).unwrap().clone();
                let diff = (v.margin.unwrap() - expect).abs();
                assert!(diff.upper() < Float::with_val(64, 1e-30));
            }
        }
    }
}
