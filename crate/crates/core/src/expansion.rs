//! Exact Q-Cantor series digits and the non-autonomous maps
//! T_{Q,n}(x) = q_n·x mod 1, T_Q^n = T_{Q,n} ∘ ⋯ ∘ T_{Q,1}, on rationals.

use std::fmt;
use std::str::FromStr;

use rug::{Integer, Rational};

use crate::error::{Error, Result};
use crate::expr::parse_decimal;
use crate::sequences::CumulativeCache;

/// A point of ℝ/ℤ, stored as its reduced representative in [0, 1).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExactPoint(Rational);

impl ExactPoint {
    /// Reduces any rational modulo 1.
    pub fn new(value: Rational) -> Self {
        ExactPoint(frac(&value))
    }

    pub fn zero() -> Self {
        ExactPoint(Rational::new())
    }

    pub fn from_ratio(num: i64, den: u64) -> Self {
        ExactPoint::new(Rational::from((Integer::from(num), Integer::from(den))))
    }

    pub fn value(&self) -> &Rational {
        &self.0
    }

    pub fn into_inner(self) -> Rational {
        self.0
    }
}

impl fmt::Display for ExactPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for ExactPoint {
    type Err = Error;

    /// Accepts `p/q` or a decimal literal; decimals are read exactly.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let parsed = if let Some((p, q)) = s.split_once('/') {
            let p = Integer::from_str(p.trim()).map_err(|_| bad_point(s))?;
            let q = Integer::from_str(q.trim()).map_err(|_| bad_point(s))?;
            if q == 0 {
                return Err(Error::InvalidArgument(format!("zero denominator in '{s}'")));
            }
            Rational::from((p, q))
        } else {
            parse_decimal(s).ok_or_else(|| bad_point(s))?
        };
        Ok(ExactPoint::new(parsed))
    }
}

fn bad_point(s: &str) -> Error {
    Error::InvalidArgument(format!("'{s}' is not a rational p/q or a decimal"))
}

/// Fractional part in [0, 1).
pub fn frac(y: &Rational) -> Rational {
    let (f, _) = y.clone().fract_floor(Integer::new());
    f
}

/// ω_1..ω_n together with the exact remainder T_Q^n(x).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigitString {
    pub digits: Vec<Integer>,
    pub remainder: ExactPoint,
}

/// T_Q^n(x) = frac(Q_n·x).
///
/// Only Q_n modulo the denominator of x matters, so the exact product is
/// never formed and there is no size cap on n.
pub fn iterate(x: &ExactPoint, cache: &CumulativeCache, n: usize) -> Result<ExactPoint> {
    iterate_from(x, cache, 0, n)
}

/// T_{Q,m+k} ∘ ⋯ ∘ T_{Q,m+1}(x): k further steps of the system started at
/// time m.
pub fn iterate_from(
    x: &ExactPoint,
    cache: &CumulativeCache,
    m: usize,
    k: usize,
) -> Result<ExactPoint> {
    let den = x.0.denom().clone();
    let mut residue = Integer::from(1);
    for i in m + 1..=m + k {
        residue *= cache.base_term(i)? % &den;
        residue %= &den;
    }
    let num = Integer::from(x.0.numer() * &residue) % &den;
    Ok(ExactPoint(Rational::from((num, den))))
}

/// Digits by ω_j = ⌊q_j·T_Q^{j−1}(x)⌋.
///
/// At Q-adic rationals this yields the terminating expansion (trailing
/// zeros), never the one ending in q_j − 1 forever.
pub fn cantor_digits(x: &ExactPoint, cache: &CumulativeCache, n: usize) -> Result<DigitString> {
    if n == 0 {
        return Err(Error::InvalidArgument("digit count must be >= 1".into()));
    }
    let mut digits = Vec::with_capacity(n);
    let mut y = x.0.clone();
    for j in 1..=n {
        let q = cache.base_term(j)?;
        let scaled = y * q;
        let (f, w) = scaled.fract_floor(Integer::new());
        digits.push(w);
        y = f;
    }
    Ok(DigitString {
        digits,
        remainder: ExactPoint(y),
    })
}

/// Σ_j ω_j/(q_1⋯q_j) for a finite digit string.
pub fn reconstruct(digits: &[Integer], cache: &CumulativeCache) -> Result<ExactPoint> {
    let mut bases = Vec::with_capacity(digits.len());
    for (i, w) in digits.iter().enumerate() {
        let q = cache.base_term(i + 1)?;
        if *w < 0 || *w >= q {
            return Err(Error::InvalidDigit {
                index: i + 1,
                digit: w.to_string(),
                base: q.to_string(),
            });
        }
        bases.push(q);
    }
    // Horner from the tail: v ← (ω_j + v)/q_j.
    let mut v = Rational::new();
    for (w, q) in digits.iter().zip(&bases).rev() {
        v += w;
        v /= q;
    }
    Ok(ExactPoint(v))
}

/// ‖y‖, the distance from y to the nearest integer.
pub fn nearest_integer_distance(y: &Rational) -> Rational {
    let f = frac(y);
    let g = Rational::from(1) - &f;
    if g < f {
        g
    } else {
        f
    }
}

/// The grid point j/Q_n nearest to x on the circle, with its distance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NearestQAdic {
    pub index: Integer,
    pub distance: Rational,
    /// Q_n, so callers can form j/Q_n.
    pub modulus: Integer,
}

impl NearestQAdic {
    pub fn point(&self) -> ExactPoint {
        ExactPoint::new(Rational::from((self.index.clone(), self.modulus.clone())))
    }
}

/// Nearest order-n Q-adic rational; ties go to the smaller index.
pub fn nearest_qadic(x: &ExactPoint, cache: &mut CumulativeCache, n: usize) -> Result<NearestQAdic> {
    let qn = cache.partial_product(n)?.clone();
    let scaled = Rational::from(&x.0 * &qn);
    let (f, j0) = scaled.fract_floor(Integer::new());
    let half = Rational::from((1, 2));
    let (index, offset) = match f.cmp(&half) {
        std::cmp::Ordering::Less => (j0, f),
        std::cmp::Ordering::Greater => {
            let up = Integer::from(&j0 + 1) % &qn;
            (up, Rational::from(1) - f)
        }
        std::cmp::Ordering::Equal => {
            let up = Integer::from(&j0 + 1) % &qn;
            (if up < j0 { up } else { j0 }, f)
        }
    };
    Ok(NearestQAdic {
        index,
        distance: offset / &qn,
        modulus: qn,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequences::Target;

    fn q(text: &str) -> CumulativeCache {
        CumulativeCache::parse(text, Target::Base).unwrap()
    }

    fn pt(s: &str) -> ExactPoint {
        s.parse().unwrap()
    }

    fn rat(n: i64, d: u64) -> Rational {
        Rational::from((n, d))
    }

    #[test]
    fn points_reduce_mod_one() {
        assert_eq!(pt("7/5"), pt("2/5"));
        assert_eq!(pt("-1/4"), pt("3/4"));
        assert_eq!(pt("0.25"), pt("1/4"));
        assert_eq!(pt("1"), ExactPoint::zero());
        assert!("1/0".parse::<ExactPoint>().is_err());
        assert!("abc".parse::<ExactPoint>().is_err());
    }

    #[test]
    fn iterate_examples() {
        let c = q("periodic:2,3");
        assert_eq!(iterate(&pt("1/5"), &c, 2).unwrap(), pt("1/5"));
        assert_eq!(iterate(&pt("5/6"), &c, 2).unwrap(), ExactPoint::zero());
        assert_eq!(iterate(&pt("1/5"), &c, 0).unwrap(), pt("1/5"));
        for n in 0..10 {
            assert_eq!(iterate(&ExactPoint::zero(), &c, n).unwrap(), ExactPoint::zero());
        }
    }

    #[test]
    fn iterate_matches_direct_product() {
        let mut c = q("expr:n+1");
        let x = pt("355/113");
        for n in 1..15 {
            let qn = c.partial_product(n).unwrap().clone();
            let direct = ExactPoint::new(Rational::from(x.value() * &qn));
            assert_eq!(iterate(&x, &c, n).unwrap(), direct);
        }
    }

    #[test]
    fn digit_examples() {
        let c = q("periodic:2,3");
        let d = cantor_digits(&pt("5/6"), &c, 2).unwrap();
        assert_eq!(d.digits, [1, 2]);
        assert_eq!(d.remainder, ExactPoint::zero());

        let b = q("const:2");
        let d = cantor_digits(&ExactPoint::zero(), &b, 5).unwrap();
        assert_eq!(d.digits, [0, 0, 0, 0, 0]);
        let d = cantor_digits(&pt("1/2"), &b, 1).unwrap();
        assert_eq!(d.digits, [1]);
        assert_eq!(d.remainder, ExactPoint::zero());
        assert!(cantor_digits(&pt("1/2"), &b, 0).is_err());
    }

    #[test]
    fn reconstruct_examples() {
        let c = q("periodic:2,3");
        let x = reconstruct(&[Integer::from(1), Integer::from(2)], &c).unwrap();
        assert_eq!(x, pt("5/6"));
        let zeros = vec![Integer::new(); 7];
        assert_eq!(reconstruct(&zeros, &c).unwrap(), ExactPoint::zero());
        let b = q("const:2");
        assert!(matches!(
            reconstruct(&[Integer::from(2)], &b),
            Err(Error::InvalidDigit { index: 1, .. })
        ));
    }

    #[test]
    fn nearest_integer_distance_examples() {
        assert_eq!(nearest_integer_distance(&rat(1, 5)), rat(1, 5));
        assert_eq!(nearest_integer_distance(&rat(2, 3)), rat(1, 3));
        assert_eq!(nearest_integer_distance(&rat(1, 2)), rat(1, 2));
        assert_eq!(nearest_integer_distance(&rat(-7, 3)), rat(1, 3));
    }

    /// Scan every grid point and take the first minimizer.
    fn scan_nearest(x: &Rational, qn: u64) -> (u64, Rational) {
        let mut best = (0, Rational::from(2));
        for j in 0..qn {
            let d = nearest_integer_distance(&(x.clone() - Rational::from((j, qn))));
            if d < best.1 {
                best = (j, d);
            }
        }
        best
    }

    #[test]
    fn nearest_qadic_examples() {
        let mut c = q("periodic:2,3");
        let r = nearest_qadic(&pt("1/5"), &mut c, 2).unwrap();
        assert_eq!((r.index.to_u64().unwrap(), r.distance.clone()), scan_nearest(&rat(1, 5), 6));
        assert_eq!(r.index, 1);
        assert_eq!(r.distance, rat(1, 30));

        let r = nearest_qadic(&pt("4/6"), &mut c, 2).unwrap();
        assert_eq!((r.index, r.distance), (Integer::from(4), Rational::new()));

        let mut b = q("const:2");
        let r = nearest_qadic(&pt("1/4"), &mut b, 1).unwrap();
        assert_eq!(scan_nearest(&rat(1, 4), 2), (0, rat(1, 4)));
        assert_eq!((r.index, r.distance), (Integer::from(0), rat(1, 4)));

        // Tie across the wrap point 0 ≡ 1 picks index 0.
        let r = nearest_qadic(&pt("3/4"), &mut b, 1).unwrap();
        assert_eq!((r.index, r.distance), (Integer::from(0), rat(1, 4)));
    }

    #[test]
    fn nearest_qadic_agrees_with_scan() {
        let mut c = q("periodic:2,3");
        for den in 1..40u64 {
            for num in 0..den {
                let x = Rational::from((num, den));
                for n in 1..=4 {
                    let qn = c.partial_product(n).unwrap().to_u64().unwrap();
                    let r = nearest_qadic(&ExactPoint::new(x.clone()), &mut c, n).unwrap();
                    assert_eq!((r.index.to_u64().unwrap(), r.distance), scan_nearest(&x, qn));
                }
            }
        }
    }

    #[test]
    fn nearest_qadic_respects_cap() {
        let mut c = q("expr:2^n").with_cap_bits(64);
        assert!(matches!(
            nearest_qadic(&pt("1/3"), &mut c, 20),
            Err(Error::CapExceeded { .. })
        ));
    }
}
