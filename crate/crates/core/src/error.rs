use std::fmt;

use thiserror::Error;

/// Which constraint of a level schedule could not be met.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    /// α(n_1) > log 2, needed for the first family to be disjoint.
    AlphaExceedsLog2,
    /// (1−s)·log Q_n − s·α(n) ≥ ½·P̂(s)·n.
    PressureGrowth,
    /// ½·P̂(s)·n_l ≥ (l+1)·log 2 + Σ_{i<l} α(n_i) − log C.
    FrostmanBudget,
    /// (Q_{n_l}/Q_{n_{l−1}})·e^{−α(n_{l−1})} ≥ 4, which turns the counting
    /// bound into its halved form.
    CountingMargin,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Constraint::AlphaExceedsLog2 => "alpha(n_1) > log 2",
            Constraint::PressureGrowth => "(1-s) log Q_n - s alpha(n) >= P(s) n / 2",
            Constraint::FrostmanBudget => {
                "P(s) n_l / 2 >= (l+1) log 2 + sum_{i<l} alpha(n_i) - log C"
            }
            Constraint::CountingMargin => "(Q_{n_l}/Q_{n_{l-1}}) exp(-alpha(n_{l-1})) >= 4",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("exact product Q_{n} needs {bits} bits, above the cap of {cap_bits}")]
    CapExceeded { n: usize, bits: u64, cap_bits: u64 },

    #[error("level {level} would enumerate {count} intervals, above the cap of {cap}")]
    EnumerationCap { level: usize, count: u128, cap: u64 },

    #[error("digit {index} is {digit}, but the base there is {base}")]
    InvalidDigit {
        index: usize,
        digit: String,
        base: String,
    },

    #[error("{}", not_qadic_message(*.scanned, *.exhaustive))]
    NotQAdic { scanned: usize, exhaustive: bool },

    #[error("sequence is a {found} sequence, expected a {expected} sequence")]
    WrongTarget {
        expected: &'static str,
        found: &'static str,
    },

    #[error("table has {len} entries, index {n} requested")]
    OutOfRange { n: usize, len: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported family: {0}")]
    UnsupportedFamily(String),

    #[error("no admissible n <= {n_cap} at level {level}: {constraint}")]
    ScheduleInfeasible {
        level: usize,
        n_cap: usize,
        constraint: Constraint,
    },

    #[error("precondition unmet: {0}")]
    PreconditionUnmet(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn not_qadic_message(scanned: usize, exhaustive: bool) -> String {
    if exhaustive {
        "not Q-adic: a prime of the denominator divides no term of Q".to_string()
    } else {
        format!("not Q-adic within scan horizon ({scanned} terms)")
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
