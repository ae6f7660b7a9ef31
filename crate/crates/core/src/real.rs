//! Midpoint-radius reals over MPFR.
//!
//! A [`LogReal`] is a ball `mid ± rad`: `mid` is an MPFR float at the working
//! precision, `rad` a 64-bit MPFR float that is always rounded upward. Every
//! operation returns a ball guaranteed to contain the exact result whenever
//! the inputs contain theirs. Most values in this crate are logarithms
//! (log Q_n, α(n), log radii), hence the name.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rug::float::Round;
use rug::ops::PowAssignRound;
use rug::{Assign, Float, Integer, Rational};

/// Precision of the radius component.
const RAD_PREC: u32 = 64;

#[derive(Clone, PartialEq)]
pub struct LogReal {
    mid: Float,
    rad: Float,
}

/// Outcome of taking the floor of a ball.
#[derive(Debug, Clone, PartialEq)]
pub enum Floor {
    Exact(Integer),
    /// The ball straddles an integer; carries the floor of the midpoint.
    Ambiguous(Integer),
}

fn rad_zero() -> Float {
    Float::new(RAD_PREC)
}

/// Bound on the error of a correctly rounded result: half an ulp is at most
/// |mid|·2^{-prec}.
fn rounding_error(mid: &Float, ord: Ordering) -> Float {
    if ord == Ordering::Equal {
        return rad_zero();
    }
    if mid.is_zero() {
        let mut tiny = rad_zero();
        tiny.next_up();
        return tiny;
    }
    let mut r = Float::with_val_round(RAD_PREC, mid.abs_ref(), Round::Up).0;
    r >>= mid.prec();
    r
}

fn up_abs(x: &Float) -> Float {
    Float::with_val_round(RAD_PREC, x.abs_ref(), Round::Up).0
}

fn rad_sum(a: &Float, b: &Float) -> Float {
    Float::with_val_round(RAD_PREC, a + b, Round::Up).0
}

fn rad_prod(a: &Float, b: &Float) -> Float {
    Float::with_val_round(RAD_PREC, a * b, Round::Up).0
}

/// `a − b` rounded up, for `a ≥ b`.
fn rad_diff(a: &Float, b: &Float) -> Float {
    Float::with_val_round(RAD_PREC, a - b, Round::Up).0
}

impl LogReal {
    pub fn zero(prec: u32) -> Self {
        LogReal {
            mid: Float::new(prec),
            rad: rad_zero(),
        }
    }

    pub fn from_i64(prec: u32, v: i64) -> Self {
        let (mid, ord) = Float::with_val_round(prec, v, Round::Nearest);
        let rad = rounding_error(&mid, ord);
        LogReal { mid, rad }
    }

    /// Exact conversion of a finite double (rounded if `prec < 53`).
    pub fn from_f64(prec: u32, v: f64) -> Self {
        assert!(v.is_finite(), "non-finite f64 in LogReal::from_f64");
        let (mid, ord) = Float::with_val_round(prec, v, Round::Nearest);
        let rad = rounding_error(&mid, ord);
        LogReal { mid, rad }
    }

    pub fn from_integer(prec: u32, v: &Integer) -> Self {
        let (mid, ord) = Float::with_val_round(prec, v, Round::Nearest);
        let rad = rounding_error(&mid, ord);
        LogReal { mid, rad }
    }

    pub fn from_rational(prec: u32, v: &Rational) -> Self {
        let (mid, ord) = Float::with_val_round(prec, v, Round::Nearest);
        let rad = rounding_error(&mid, ord);
        LogReal { mid, rad }
    }

    /// Builds a ball from an explicit midpoint and radius; the radius is
    /// rounded up to the internal radius precision.
    pub fn from_parts(mid: Float, rad: &Float) -> Self {
        LogReal {
            mid,
            rad: up_abs(rad),
        }
    }

    /// log 2 as a ball.
    pub fn ln2(prec: u32) -> Self {
        LogReal::from_i64(prec, 2).ln().expect("log 2 is defined")
    }

    pub fn prec(&self) -> u32 {
        self.mid.prec()
    }

    pub fn mid(&self) -> &Float {
        &self.mid
    }

    pub fn rad(&self) -> &Float {
        &self.rad
    }

    pub fn is_exact(&self) -> bool {
        self.rad.is_zero()
    }

    pub fn is_finite(&self) -> bool {
        self.mid.is_finite() && self.rad.is_finite()
    }

    /// Rounds the midpoint to `prec` bits, widening the radius accordingly.
    pub fn with_prec(&self, prec: u32) -> Self {
        let (mid, ord) = Float::with_val_round(prec, &self.mid, Round::Nearest);
        let rad = rad_sum(&self.rad, &rounding_error(&mid, ord));
        LogReal { mid, rad }
    }

    pub fn lower(&self) -> Float {
        Float::with_val_round(self.prec(), &self.mid - &self.rad, Round::Down).0
    }

    pub fn upper(&self) -> Float {
        Float::with_val_round(self.prec(), &self.mid + &self.rad, Round::Up).0
    }

    pub fn to_f64(&self) -> f64 {
        self.mid.to_f64()
    }

    /// Certified sign: `None` when the ball contains zero without being
    /// exactly zero.
    pub fn sign(&self) -> Option<Ordering> {
        if self.mid.is_zero() && self.rad.is_zero() {
            return Some(Ordering::Equal);
        }
        if self.lower().cmp0() == Some(Ordering::Greater) {
            Some(Ordering::Greater)
        } else if self.upper().cmp0() == Some(Ordering::Less) {
            Some(Ordering::Less)
        } else {
            None
        }
    }

    /// Certified comparison against another ball.
    pub fn cmp_certified(&self, other: &LogReal) -> Option<Ordering> {
        (self - other).sign()
    }

    pub fn abs(&self) -> LogReal {
        LogReal {
            mid: Float::with_val(self.prec(), self.mid.abs_ref()),
            rad: self.rad.clone(),
        }
    }

    /// The ball with the larger midpoint.
    pub fn max(&self, other: &LogReal) -> LogReal {
        if self.mid >= other.mid {
            self.clone()
        } else {
            other.clone()
        }
    }

    pub fn mul_integer(&self, k: &Integer) -> LogReal {
        self * &LogReal::from_integer(self.prec(), k)
    }

    pub fn div(&self, other: &LogReal) -> Result<LogReal, String> {
        let prec = self.prec().max(other.prec());
        let blo = other.lower();
        let bhi = other.upper();
        let positive = blo.cmp0() == Some(Ordering::Greater);
        let negative = bhi.cmp0() == Some(Ordering::Less);
        if !positive && !negative {
            return Err("division by a value that may be zero".into());
        }
        let (mid, ord) = Float::with_val_round(prec, &self.mid / &other.mid, Round::Nearest);
        let mut rad = rounding_error(&mid, ord);
        if !self.rad.is_zero() || !other.rad.is_zero() {
            // |a/b − am/bm| ≤ (ra + |am/bm|·rb) / (|bm| − rb)
            let ratio = Float::with_val_round(
                RAD_PREC,
                up_abs(&self.mid) / &Float::with_val_round(RAD_PREC, other.mid.abs_ref(), Round::Down).0,
                Round::Up,
            )
            .0;
            let num = rad_sum(&self.rad, &rad_prod(&ratio, &other.rad));
            let dist = if positive {
                Float::with_val_round(RAD_PREC, &blo, Round::Down).0
            } else {
                Float::with_val_round(RAD_PREC, -bhi, Round::Down).0
            };
            let prop = Float::with_val_round(RAD_PREC, &num / &dist, Round::Up).0;
            rad = rad_sum(&rad, &prop);
        }
        Ok(LogReal { mid, rad })
    }

    /// Applies a monotone function through directed rounding of the ball's
    /// endpoints.
    fn monotone<F>(&self, increasing: bool, f: F) -> LogReal
    where
        F: Fn(&mut Float, Round) -> Ordering,
    {
        let mut mid = self.mid.clone();
        let ord = f(&mut mid, Round::Nearest);
        if self.rad.is_zero() {
            let rad = rounding_error(&mid, ord);
            return LogReal { mid, rad };
        }
        let mut lo = self.lower();
        let mut hi = self.upper();
        if increasing {
            f(&mut lo, Round::Down);
            f(&mut hi, Round::Up);
        } else {
            f(&mut lo, Round::Up);
            f(&mut hi, Round::Down);
            std::mem::swap(&mut lo, &mut hi);
        }
        let below = rad_diff(&mid, &lo);
        let above = rad_diff(&hi, &mid);
        let rad = if below > above { below } else { above };
        LogReal { mid, rad }
    }

    pub fn ln(&self) -> Result<LogReal, String> {
        if self.lower().cmp0() != Some(Ordering::Greater) {
            return Err(format!("log of a non-positive value ({})", self));
        }
        Ok(self.monotone(true, |x, r| x.ln_round(r)))
    }

    pub fn exp(&self) -> Result<LogReal, String> {
        let out = self.monotone(true, |x, r| x.exp_round(r));
        if !out.is_finite() {
            return Err("exp overflow".into());
        }
        Ok(out)
    }

    pub fn sqrt(&self) -> Result<LogReal, String> {
        if self.mid.cmp0() == Some(Ordering::Less) {
            return Err(format!("sqrt of a negative value ({})", self));
        }
        if self.lower().cmp0() == Some(Ordering::Less) {
            // Ball touches negatives; clamp the lower end to zero.
            let hi = self.upper();
            let mut top = hi.clone();
            top.sqrt_round(Round::Up);
            let mut mid = self.mid.clone();
            mid.sqrt_round(Round::Nearest);
            return Ok(LogReal {
                rad: up_abs(&top),
                mid,
            });
        }
        Ok(self.monotone(true, |x, r| x.sqrt_round(r)))
    }

    pub fn cbrt(&self) -> LogReal {
        self.monotone(true, |x, r| x.cbrt_round(r))
    }

    pub fn cos(&self) -> LogReal {
        let mut mid = self.mid.clone();
        let ord = mid.cos_round(Round::Nearest);
        let two = Float::with_val(RAD_PREC, 2);
        let spread = if self.rad > two { two } else { self.rad.clone() };
        let rad = rad_sum(&spread, &rounding_error(&mid, ord));
        LogReal { mid, rad }
    }

    pub fn floor(&self) -> Floor {
        let mut lo = self.lower();
        lo.floor_mut();
        let mut hi = self.upper();
        hi.floor_mut();
        if lo == hi {
            Floor::Exact(lo.to_integer().expect("finite floor"))
        } else {
            let mut m = self.mid.clone();
            m.floor_mut();
            Floor::Ambiguous(m.to_integer().expect("finite floor"))
        }
    }

    pub fn pow(&self, exponent: &LogReal) -> Result<LogReal, String> {
        let prec = self.prec().max(exponent.prec());
        let int_exp = if exponent.is_exact() && exponent.mid.is_integer() {
            exponent.mid.to_i32_saturating().filter(|k| k.unsigned_abs() < i32::MAX as u32)
        } else {
            None
        };
        if let Some(k) = int_exp {
            if k == 0 {
                return Ok(LogReal::from_i64(prec, 1));
            }
            if k < 0 {
                let one = LogReal::from_i64(prec, 1);
                return one.div(&self.pow(&LogReal::from_i64(prec, -(k as i64)))?);
            }
            let mut mid = Float::with_val(prec, &self.mid);
            let ord = mid.pow_assign_round(k, Round::Nearest);
            let mut rad = rounding_error(&mid, ord);
            if !self.rad.is_zero() {
                // |x^k − m^k| ≤ k·(|m| + r)^{k−1}·r
                let mut base = rad_sum(&up_abs(&self.mid), &self.rad);
                base.pow_assign_round(k - 1, Round::Up);
                let kf = Float::with_val(RAD_PREC, k);
                let prop = rad_prod(&rad_prod(&kf, &base), &self.rad);
                rad = rad_sum(&rad, &prop);
            }
            if !mid.is_finite() || !rad.is_finite() {
                return Err("power overflow".into());
            }
            return Ok(LogReal { mid, rad });
        }
        if self.is_exact() && exponent.is_exact() && self.mid.is_zero() {
            return if exponent.mid.cmp0() == Some(Ordering::Greater) {
                Ok(LogReal::zero(prec))
            } else {
                Err("zero raised to a non-positive power".into())
            };
        }
        if self.lower().cmp0() != Some(Ordering::Greater) {
            return Err("non-integer power of a value that may be non-positive".into());
        }
        if self.is_exact() && exponent.is_exact() {
            let mut mid = Float::with_val(prec, &self.mid);
            let ord = mid.pow_assign_round(&exponent.mid, Round::Nearest);
            let rad = rounding_error(&mid, ord);
            if !mid.is_finite() {
                return Err("power overflow".into());
            }
            return Ok(LogReal { mid, rad });
        }
        (exponent * &self.ln()?).exp()
    }
}

impl Neg for &LogReal {
    type Output = LogReal;
    fn neg(self) -> LogReal {
        LogReal {
            mid: Float::with_val(self.prec(), -&self.mid),
            rad: self.rad.clone(),
        }
    }
}

impl Neg for LogReal {
    type Output = LogReal;
    fn neg(self) -> LogReal {
        LogReal {
            mid: -self.mid,
            rad: self.rad,
        }
    }
}

impl Add for &LogReal {
    type Output = LogReal;
    fn add(self, other: &LogReal) -> LogReal {
        let prec = self.prec().max(other.prec());
        let (mid, ord) = Float::with_val_round(prec, &self.mid + &other.mid, Round::Nearest);
        let rad = rad_sum(&rad_sum(&self.rad, &other.rad), &rounding_error(&mid, ord));
        LogReal { mid, rad }
    }
}

impl Sub for &LogReal {
    type Output = LogReal;
    fn sub(self, other: &LogReal) -> LogReal {
        let prec = self.prec().max(other.prec());
        let (mid, ord) = Float::with_val_round(prec, &self.mid - &other.mid, Round::Nearest);
        let rad = rad_sum(&rad_sum(&self.rad, &other.rad), &rounding_error(&mid, ord));
        LogReal { mid, rad }
    }
}

impl Mul for &LogReal {
    type Output = LogReal;
    fn mul(self, other: &LogReal) -> LogReal {
        let prec = self.prec().max(other.prec());
        let (mid, ord) = Float::with_val_round(prec, &self.mid * &other.mid, Round::Nearest);
        let mut rad = rounding_error(&mid, ord);
        if !self.rad.is_zero() || !other.rad.is_zero() {
            let a = rad_prod(&up_abs(&self.mid), &other.rad);
            let b = rad_prod(&up_abs(&other.mid), &self.rad);
            let c = rad_prod(&self.rad, &other.rad);
            rad = rad_sum(&rad_sum(&rad_sum(&a, &b), &c), &rad);
        }
        LogReal { mid, rad }
    }
}

impl Add for LogReal {
    type Output = LogReal;
    fn add(self, other: LogReal) -> LogReal {
        &self + &other
    }
}

impl Sub for LogReal {
    type Output = LogReal;
    fn sub(self, other: LogReal) -> LogReal {
        &self - &other
    }
}

impl Mul for LogReal {
    type Output = LogReal;
    fn mul(self, other: LogReal) -> LogReal {
        &self * &other
    }
}

impl fmt::Display for LogReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = ((self.prec() as f64) * std::f64::consts::LOG10_2).ceil() as usize;
        write!(
            f,
            "{}±{:.3e}",
            self.mid.to_string_radix(10, Some(digits.min(60))),
            self.rad.to_f64()
        )
    }
}

impl fmt::Debug for LogReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Sums balls pairwise (binary-counter cascade), keeping the rounding error
/// at O(log N) ulps for long runs of similar terms.
#[derive(Default)]
pub struct PairwiseSum {
    stack: Vec<(u32, LogReal)>,
}

impl PairwiseSum {
    pub fn new() -> Self {
        PairwiseSum::default()
    }

    pub fn push(&mut self, value: LogReal) {
        let mut level = 0;
        let mut acc = value;
        while let Some((top_level, _)) = self.stack.last() {
            if *top_level != level {
                break;
            }
            let (_, top) = self.stack.pop().expect("non-empty");
            acc = &top + &acc;
            level += 1;
        }
        self.stack.push((level, acc));
    }

    pub fn finish(self, prec: u32) -> LogReal {
        let mut total = LogReal::zero(prec);
        for (_, v) in self.stack.into_iter().rev() {
            total = &total + &v;
        }
        total
    }
}

/// Assigns a decimal string to a float; helper for tests and output.
pub fn float_from_str(prec: u32, s: &str) -> Option<Float> {
    let parsed = Float::parse(s).ok()?;
    let mut f = Float::new(prec);
    f.assign(parsed);
    Some(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn contains(ball: &LogReal, exact: &Float) -> bool {
        ball.lower() <= *exact && *exact <= ball.upper()
    }

    #[test]
    fn exact_integers_have_zero_radius() {
        let x = LogReal::from_i64(128, 12345);
        assert!(x.is_exact());
        assert_eq!(x.sign(), Some(Ordering::Greater));
        assert_eq!(LogReal::zero(64).sign(), Some(Ordering::Equal));
    }

    #[test]
    fn ln_encloses_high_precision_value() {
        let ball = LogReal::from_i64(64, 3).ln().unwrap();
        let reference = Float::with_val(512, 3).ln();
        assert!(contains(&ball, &reference));
        assert!(!ball.is_exact());
        assert!(ball.rad().to_f64() < 1e-18);
    }

    #[test]
    fn ln_of_one_is_exact_zero() {
        let ball = LogReal::from_i64(256, 1).ln().unwrap();
        assert_eq!(ball.sign(), Some(Ordering::Equal));
    }

    #[test]
    fn radius_propagates_through_arithmetic() {
        let third = LogReal::from_i64(64, 1)
            .div(&LogReal::from_i64(64, 3))
            .unwrap();
        let e = third.exp().unwrap();
        let reference = Float::with_val(512, Float::with_val(512, 1) / 3u32).exp();
        assert!(contains(&e, &reference));
        let sq = (&e * &e).sqrt().unwrap();
        assert!(contains(&sq, &reference));
        let cube = e.pow(&LogReal::from_i64(64, 3)).unwrap().cbrt();
        assert!(contains(&cube, &reference));
    }

    #[test]
    fn exp_ln_round_trip_stays_enclosing() {
        let x = LogReal::from_f64(128, 0.8125);
        let back = x.exp().unwrap().ln().unwrap();
        assert!(contains(&back, &Float::with_val(128, 0.8125)));
    }

    #[test]
    fn log_domain_errors() {
        assert!(LogReal::zero(64).ln().is_err());
        assert!(LogReal::from_i64(64, -1).sqrt().is_err());
        assert!(LogReal::from_i64(64, 1).div(&LogReal::zero(64)).is_err());
    }

    #[test]
    fn floor_detects_straddle() {
        let x = LogReal::from_f64(64, 2.5);
        assert_eq!(x.floor(), Floor::Exact(Integer::from(2)));
        let almost3 = LogReal::from_i64(64, 3)
            .ln()
            .unwrap()
            .div(&LogReal::from_i64(64, 3).ln().unwrap())
            .unwrap();
        assert!(matches!(almost3.floor(), Floor::Ambiguous(_)));
    }

    #[test]
    fn pairwise_sum_matches_product() {
        let third = LogReal::from_i64(128, 1)
            .div(&LogReal::from_i64(128, 3))
            .unwrap();
        let mut acc = PairwiseSum::new();
        for _ in 0..3000 {
            acc.push(third.clone());
        }
        let total = acc.finish(128);
        assert!(contains(&total, &Float::with_val(128, 1000)));
        assert!(total.rad().to_f64() < 1e-30);
    }

    #[test]
    fn cos_radius_is_capped() {
        let wide = LogReal::from_parts(Float::with_val(64, 0), &Float::with_val(64, 100));
        assert!(wide.cos().rad().to_f64() <= 2.0 + 1e-12);
    }
}
