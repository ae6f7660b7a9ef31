//! The leveled Cantor-type subset behind the lower bound on the dimension,
//! its mass distribution, and numerical checks of every estimate used on it;
//! plus the covering sums behind the upper bound.
//!
//! Level l holds the targets Δ_{n_l, j} that lie inside a surviving target of
//! level l − 1. A parent centered at j/Q_{n_l} keeps exactly the children
//! k = jM + d (mod Q_{n_{l+1}}), |d| ≤ D, where M = Q_{n_{l+1}}/Q_{n_l} and
//! D = M·e^{−α(n_l)} − e^{−α(n_{l+1})}, so every parent has 2⌊D⌋ + 1 children.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::float::Round;
use rug::ops::RemRounding;
use rug::{Float, Integer, Rational};
use serde::Serialize;

use crate::dimension::{dimension_limsup, pressure_estimate, DEFAULT_WINDOW};
use crate::error::{Constraint, Error, Result};
use crate::expansion::nearest_integer_distance;
use crate::real::{Floor, LogReal, PairwiseSum};
use crate::sequences::{CumulativeCache, SequenceSpec};

pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;
pub const TREE_FORMAT_VERSION: u32 = 1;
/// Precisions tried after the cache's own when a decision is undecided.
const ESCALATION: [u32; 2] = [512, 1024];
/// Rejections kept per level in a schedule witness.
const MAX_RECORDED_REJECTIONS: usize = 64;
/// Cover-count failures kept verbatim in a Frostman report.
const MAX_LOGGED_FAILURES: usize = 16;

fn ge_zero(x: &LogReal) -> bool {
    matches!(x.sign(), Some(Ordering::Greater) | Some(Ordering::Equal))
}

fn ln_integer(prec: u32, v: &Integer) -> Result<LogReal> {
    LogReal::from_integer(prec, v).ln().map_err(Error::Domain)
}

fn ln_rational(prec: u32, v: &Rational) -> Result<LogReal> {
    Ok(ln_integer(prec, v.numer())? - ln_integer(prec, v.denom())?)
}

fn exp_ball(x: &LogReal) -> Result<LogReal> {
    x.exp().map_err(Error::Domain)
}

/// How the constant C in m(B(x, r)) ≤ C·r^s is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FrostmanConstant {
    /// A given log C; the budget constraint then restricts every level.
    Fixed(f64),
    /// Levels are chosen without the budget constraint and log C is set to
    /// the smallest value that satisfies it afterwards.
    Fitted,
}

impl Default for FrostmanConstant {
    fn default() -> Self {
        FrostmanConstant::Fixed(0.0)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstraintCheck {
    pub constraint: Constraint,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelWitness {
    pub level: usize,
    pub n: usize,
    pub checks: Vec<ConstraintCheck>,
    /// Candidates turned down on the way, with the first failing constraint.
    pub rejected: Vec<(usize, Constraint)>,
    pub rejected_total: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelSchedule {
    pub s: f64,
    pub levels: Vec<usize>,
    pub log_c: f64,
    /// Windowed pressure estimate at s.
    pub p_hat: f64,
    pub witnesses: Vec<LevelWitness>,
}

impl LevelSchedule {
    /// True when every recorded constraint check holds.
    pub fn is_sound(&self) -> bool {
        self.witnesses
            .iter()
            .all(|w| w.checks.iter().all(|c| c.holds))
    }
}

struct ScheduleContext<'a> {
    q: &'a mut CumulativeCache,
    alpha: &'a mut CumulativeCache,
    s: LogReal,
    half_p: LogReal,
    log_c: Option<LogReal>,
    prec: u32,
}

impl ScheduleContext<'_> {
    fn ball(&self, v: f64) -> LogReal {
        LogReal::from_f64(self.prec, v)
    }

    /// Σ_{i<l} α(n_i) + (l+1)·log 2, the budget's right side without log C.
    fn budget_base(&mut self, prev: &[usize]) -> Result<LogReal> {
        let l = prev.len() + 1;
        let mut acc = LogReal::ln2(self.prec).mul_integer(&Integer::from(l + 1));
        for &m in prev {
            acc = &acc + self.alpha.sum(m)?;
        }
        Ok(acc)
    }

    fn check(&mut self, constraint: Constraint, n: usize, prev: &[usize]) -> Result<ConstraintCheck> {
        let (lhs, rhs, strict) = match constraint {
            Constraint::AlphaExceedsLog2 => {
                (self.alpha.sum(n)?.clone(), LogReal::ln2(self.prec), true)
            }
            Constraint::PressureGrowth => {
                let one = self.ball(1.0);
                let lq = self.q.sum(n)?.clone();
                let a = self.alpha.sum(n)?.clone();
                let lhs = &(&(&one - &self.s) * &lq) - &(&self.s * &a);
                let rhs = self.half_p.mul_integer(&Integer::from(n));
                (lhs, rhs, false)
            }
            Constraint::FrostmanBudget => {
                let lhs = self.half_p.mul_integer(&Integer::from(n));
                let log_c = self.log_c.clone().unwrap_or_else(|| self.ball(0.0));
                let rhs = &self.budget_base(prev)? - &log_c;
                (lhs, rhs, false)
            }
            Constraint::CountingMargin => {
                let p = *prev.last().expect("counting margin needs a previous level");
                let ln = self.q.sum(n)?.clone();
                let lhs = &(&ln - self.q.sum(p)?) - self.alpha.sum(p)?;
                let rhs = LogReal::ln2(self.prec).mul_integer(&Integer::from(2));
                (lhs, rhs, false)
            }
        };
        let diff = &lhs - &rhs;
        let holds = if strict {
            diff.sign() == Some(Ordering::Greater)
        } else {
            ge_zero(&diff)
        };
        Ok(ConstraintCheck {
            constraint,
            lhs: lhs.to_f64(),
            rhs: rhs.to_f64(),
            holds,
        })
    }

    /// The constraints that apply at level `prev.len() + 1`, monotone ones
    /// first.
    fn constraints(&self, l: usize) -> Vec<Constraint> {
        let mut out = Vec::new();
        if l == 1 {
            out.push(Constraint::AlphaExceedsLog2);
        } else {
            out.push(Constraint::CountingMargin);
            if self.log_c.is_some() {
                out.push(Constraint::FrostmanBudget);
            }
        }
        out.push(Constraint::PressureGrowth);
        out
    }

    fn first_failure(&mut self, n: usize, prev: &[usize], monotone_only: bool) -> Result<Option<Constraint>> {
        for c in self.constraints(prev.len() + 1) {
            if monotone_only && c == Constraint::PressureGrowth {
                continue;
            }
            if !self.check(c, n, prev)?.holds {
                return Ok(Some(c));
            }
        }
        Ok(None)
    }

    fn witness(&mut self, n: usize, prev: &[usize]) -> Result<Vec<ConstraintCheck>> {
        let mut checks = Vec::new();
        for c in self.constraints(prev.len() + 1) {
            checks.push(self.check(c, n, prev)?);
        }
        Ok(checks)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ScheduleOptions {
    pub frostman: FrostmanConstant,
    pub window_fraction: f64,
}

impl Default for ScheduleOptions {
    fn default() -> Self {
        ScheduleOptions {
            frostman: FrostmanConstant::default(),
            window_fraction: DEFAULT_WINDOW,
        }
    }
}

fn pressure_for_schedule(
    q: &mut CumulativeCache,
    alpha: &mut CumulativeCache,
    s: f64,
    horizon: usize,
    window_fraction: f64,
) -> Result<f64> {
    if !(0.0..1.0).contains(&s) {
        return Err(Error::PreconditionUnmet(format!("s must lie in [0, 1), got {s}")));
    }
    let horizon = horizon.max(10);
    let dim = dimension_limsup(q, alpha, horizon, window_fraction)?;
    if s >= dim.value {
        return Err(Error::PreconditionUnmet(format!(
            "s = {s} is not below the dimension estimate {}",
            dim.value
        )));
    }
    let (p_hat, _) = pressure_estimate(q, alpha, s, horizon, window_fraction)?;
    if p_hat <= 0.0 {
        return Err(Error::PreconditionUnmet(format!(
            "windowed pressure at s = {s} is {p_hat}, not positive"
        )));
    }
    Ok(p_hat)
}

/// Greedy level choice: each n_l is the smallest n ≤ `n_cap` meeting every
/// constraint, found by doubling and bisection over the monotone constraints
/// and a forward scan for the pressure-growth one.
pub fn choose_levels(
    q: &mut CumulativeCache,
    alpha: &mut CumulativeCache,
    s: f64,
    depth: usize,
    n_cap: usize,
    opts: ScheduleOptions,
) -> Result<LevelSchedule> {
    if depth == 0 {
        return Err(Error::InvalidArgument("the schedule needs at least one level".into()));
    }
    let p_hat = pressure_for_schedule(q, alpha, s, n_cap, opts.window_fraction)?;
    q.extend_to(n_cap)?;
    alpha.extend_to(n_cap)?;
    let prec = q.precision().max(alpha.precision());
    let fixed = match opts.frostman {
        FrostmanConstant::Fixed(c) => Some(LogReal::from_f64(prec, c)),
        FrostmanConstant::Fitted => None,
    };
    let mut ctx = ScheduleContext {
        q,
        alpha,
        s: LogReal::from_f64(prec, s),
        half_p: LogReal::from_f64(prec, p_hat * 0.5),
        log_c: fixed,
        prec,
    };

    let mut levels: Vec<usize> = Vec::new();
    let mut witnesses = Vec::new();
    for l in 1..=depth {
        let start = levels.last().map_or(1, |&p| p + 1);
        let mut rejected = Vec::new();
        let mut rejected_total = 0usize;
        let mut reject = |n: usize, c: Constraint, list: &mut Vec<(usize, Constraint)>| {
            rejected_total += 1;
            if list.len() < MAX_RECORDED_REJECTIONS {
                list.push((n, c));
            }
        };
        let infeasible = |constraint| Error::ScheduleInfeasible {
            level: l,
            n_cap,
            constraint,
        };
        if start > n_cap {
            return Err(infeasible(Constraint::PressureGrowth));
        }

        // Smallest n in [start, n_cap] passing the monotone constraints.
        let mut last_fail = start - 1;
        let mut step = 1usize;
        let mut hi = start;
        loop {
            match ctx.first_failure(hi, &levels, true)? {
                None => break,
                Some(c) => {
                    reject(hi, c, &mut rejected);
                    if hi == n_cap {
                        return Err(infeasible(c));
                    }
                    last_fail = hi;
                    hi = (start + step).min(n_cap);
                    step *= 2;
                }
            }
        }
        while hi - last_fail > 1 {
            let mid = last_fail + (hi - last_fail) / 2;
            match ctx.first_failure(mid, &levels, true)? {
                None => hi = mid,
                Some(c) => {
                    reject(mid, c, &mut rejected);
                    last_fail = mid;
                }
            }
        }

        let mut n = hi;
        loop {
            if ctx.check(Constraint::PressureGrowth, n, &levels)?.holds {
                break;
            }
            reject(n, Constraint::PressureGrowth, &mut rejected);
            if n == n_cap {
                return Err(infeasible(Constraint::PressureGrowth));
            }
            n += 1;
        }
        let checks = ctx.witness(n, &levels)?;
        levels.push(n);
        witnesses.push(LevelWitness {
            level: l,
            n,
            checks,
            rejected,
            rejected_total,
        });
    }

    let log_c = finish_constant(&mut ctx, &levels, &mut witnesses, opts.frostman)?;
    Ok(LevelSchedule {
        s,
        levels,
        log_c,
        p_hat,
        witnesses,
    })
}

/// Fixes log C and records the budget checks when C is fitted.
fn finish_constant(
    ctx: &mut ScheduleContext<'_>,
    levels: &[usize],
    witnesses: &mut [LevelWitness],
    frostman: FrostmanConstant,
) -> Result<f64> {
    match frostman {
        FrostmanConstant::Fixed(c) => Ok(c),
        FrostmanConstant::Fitted => {
            let mut need = 0.0f64;
            for l in 2..=levels.len() {
                let base = ctx.budget_base(&levels[..l - 1])?;
                let gap = &base - &ctx.half_p.mul_integer(&Integer::from(levels[l - 1]));
                need = need.max(gap.upper().to_f64_round(Round::Up));
            }
            // One ulp of slack keeps the recorded check certified.
            let log_c = need + need.abs().max(1.0) * f64::EPSILON * 4.0;
            ctx.log_c = Some(LogReal::from_f64(ctx.prec, log_c));
            for l in 2..=levels.len() {
                let check = ctx.check(Constraint::FrostmanBudget, levels[l - 1], &levels[..l - 1])?;
                witnesses[l - 1].checks.push(check);
            }
            Ok(log_c)
        }
    }
}

/// A schedule with given levels; constraint checks are recorded, not
/// enforced.
pub fn manual_schedule(
    q: &mut CumulativeCache,
    alpha: &mut CumulativeCache,
    s: f64,
    levels: &[usize],
    horizon: usize,
    opts: ScheduleOptions,
) -> Result<LevelSchedule> {
    if levels.is_empty() || levels[0] == 0 || levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "levels must be a nonempty strictly increasing list of positive integers".into(),
        ));
    }
    let p_hat = pressure_for_schedule(q, alpha, s, horizon, opts.window_fraction)?;
    let prec = q.precision().max(alpha.precision());
    let fixed = match opts.frostman {
        FrostmanConstant::Fixed(c) => Some(LogReal::from_f64(prec, c)),
        FrostmanConstant::Fitted => None,
    };
    let mut ctx = ScheduleContext {
        q,
        alpha,
        s: LogReal::from_f64(prec, s),
        half_p: LogReal::from_f64(prec, p_hat * 0.5),
        log_c: fixed,
        prec,
    };
    let mut witnesses = Vec::new();
    for (i, &n) in levels.iter().enumerate() {
        witnesses.push(LevelWitness {
            level: i + 1,
            n,
            checks: ctx.witness(n, &levels[..i])?,
            rejected: Vec::new(),
            rejected_total: 0,
        });
    }
    let log_c = finish_constant(&mut ctx, levels, &mut witnesses, opts.frostman)?;
    Ok(LevelSchedule {
        s,
        levels: levels.to_vec(),
        log_c,
        p_hat,
        witnesses,
    })
}

#[derive(Debug, Clone)]
pub struct Node {
    /// j, the target being centered at j/Q_{n_l}.
    pub center: Integer,
    pub parent: Option<usize>,
    pub child_count: u64,
    pub mass: Rational,
}

#[derive(Debug, Clone)]
pub struct CoverTree {
    pub schedule: LevelSchedule,
    /// Q_{n_l} per level.
    pub moduli: Vec<Integer>,
    /// α(n_l) per level.
    pub alpha_sums: Vec<LogReal>,
    /// e^{−α(n_l)}/Q_{n_l} per level.
    pub radii: Vec<LogReal>,
    pub levels: Vec<Vec<Node>>,
    /// Children admitted because containment could not be decided.
    pub undecided_ties: u64,
    pub q_spec: String,
    pub alpha_spec: SequenceSpec,
}

impl CoverTree {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    fn alpha_at(&self, l: usize, prec: u32) -> Result<LogReal> {
        if prec <= self.alpha_sums[l].prec() {
            Ok(self.alpha_sums[l].clone())
        } else {
            self.alpha_spec.partial_sum_at(self.schedule.levels[l], prec)
        }
    }

    /// M·e^{−α(n_l)} for the step from level index l to l + 1.
    fn scaled_radius(&self, l: usize, prec: u32) -> Result<LogReal> {
        let m = Integer::from(&self.moduli[l + 1] / &self.moduli[l]);
        Ok(exp_ball(&-self.alpha_at(l, prec)?)?.mul_integer(&m))
    }
}

/// Builds the levels R_1, …, R_L with their masses.
pub fn build_cover(
    q: &mut CumulativeCache,
    alpha: &mut CumulativeCache,
    schedule: &LevelSchedule,
    enumeration_cap: u64,
) -> Result<CoverTree> {
    let ns = &schedule.levels;
    let mut moduli = Vec::with_capacity(ns.len());
    let mut alpha_sums = Vec::with_capacity(ns.len());
    let mut radii = Vec::with_capacity(ns.len());
    for &n in ns {
        let qn = q.partial_product(n)?.clone();
        let a = alpha.alpha_partial_sum(n)?.clone();
        let prec = a.prec();
        let inv_q = LogReal::from_rational(prec, &Rational::from((Integer::from(1), qn.clone())));
        radii.push(&exp_ball(&-a.clone())? * &inv_q);
        moduli.push(qn);
        alpha_sums.push(a);
    }
    if (&alpha_sums[0] - &LogReal::ln2(alpha_sums[0].prec())).sign() != Some(Ordering::Greater) {
        return Err(Error::PreconditionUnmet(
            "alpha(n_1) > log 2 is needed for disjoint targets".into(),
        ));
    }
    for w in moduli.windows(2) {
        if !w[1].is_divisible(&w[0]) {
            return Err(Error::InvalidArgument("levels must be increasing".into()));
        }
    }

    let mut tree = CoverTree {
        schedule: schedule.clone(),
        moduli,
        alpha_sums,
        radii,
        levels: Vec::with_capacity(ns.len()),
        undecided_ties: 0,
        q_spec: q.spec().text().to_string(),
        alpha_spec: alpha.spec().clone(),
    };

    let q1 = tree.moduli[0].clone();
    if q1 > enumeration_cap {
        return Err(Error::EnumerationCap {
            level: 1,
            count: q1.to_u128().unwrap_or(u128::MAX),
            cap: enumeration_cap,
        });
    }
    let m1 = Rational::from((Integer::from(1), q1.clone()));
    let q1 = q1.to_u64().expect("below the enumeration cap");
    tree.levels.push(
        (0..q1)
            .map(|j| Node {
                center: Integer::from(j),
                parent: None,
                child_count: 0,
                mass: m1.clone(),
            })
            .collect(),
    );

    for l in 0..ns.len() - 1 {
        // D ≥ 2e^{−α(n_l)} − e^{−α(n_{l+1})} > 0, so this only trips on a
        // ball too wide to certify the sign.
        let (k, ties) = half_width(&tree, l)?;
        let Some(k) = k else {
            return Err(Error::PreconditionUnmet(format!(
                "level {} is empty: no target of level {} fits inside its parent",
                l + 2,
                l + 2
            )));
        };
        let parents = tree.levels[l].len() as u128;
        let count = (Integer::from(&k * 2u32) + 1u32) * parents;
        let count = count.to_u128().unwrap_or(u128::MAX);
        if count > enumeration_cap as u128 {
            return Err(Error::EnumerationCap {
                level: l + 2,
                count,
                cap: enumeration_cap,
            });
        }
        let k = k.to_u64().expect("count is within the enumeration cap");
        let per_parent = 2 * k + 1;
        if ties {
            tree.undecided_ties += 2 * parents as u64;
        }
        let modulus = tree.moduli[l + 1].clone();
        let m = Integer::from(&modulus / &tree.moduli[l]);
        let mut next = Vec::with_capacity(count as usize);
        for (pi, parent) in tree.levels[l].iter_mut().enumerate() {
            parent.child_count = per_parent;
            let mass = Rational::from(&parent.mass / per_parent);
            let base = Integer::from(&parent.center * &m);
            for d in -(k as i64)..=(k as i64) {
                let c = Integer::from(&base + d).rem_euc(&modulus);
                next.push(Node {
                    center: c,
                    parent: Some(pi),
                    child_count: 0,
                    mass: mass.clone(),
                });
            }
        }
        tree.levels.push(next);
    }
    Ok(tree)
}

/// ⌊D⌋ for the step from level index l to l + 1, or `None` when D < 0;
/// the flag is set when D could not be separated from an integer.
fn half_width(tree: &CoverTree, l: usize) -> Result<(Option<Integer>, bool)> {
    let base_prec = tree.alpha_sums[l].prec();
    let mut precs = vec![base_prec];
    precs.extend(ESCALATION.iter().copied().filter(|&p| p > base_prec));
    let mut last = None;
    for &p in &precs {
        let d = &tree.scaled_radius(l, p)? - &exp_ball(&-tree.alpha_at(l + 1, p)?)?;
        if let Floor::Exact(k) = d.floor() {
            return Ok(((k >= 0).then_some(k), false));
        }
        last = Some(d);
    }
    // Tie: the boundary child is admitted.
    let d = last.expect("at least one precision tried");
    let mut hi = d.upper();
    hi.floor_mut();
    Ok((hi.to_integer().filter(|k| *k >= 0), true))
}

#[derive(Debug, Clone, Serialize)]
pub struct NestingReport {
    pub checked: u64,
    pub violations: u64,
    pub undecided: u64,
    /// Parents where the next grid point beyond the outermost child also
    /// fits, i.e. a child was missed.
    pub missing_children: u64,
}

impl NestingReport {
    pub fn holds(&self) -> bool {
        self.violations == 0 && self.missing_children == 0
    }
}

/// Verifies each child against its parent by circle distance:
/// ‖c_child − c_parent‖ + ρ_{l+1} ≤ ρ_l.
pub fn verify_nesting(tree: &CoverTree) -> NestingReport {
    let mut report = NestingReport {
        checked: 0,
        violations: 0,
        undecided: 0,
        missing_children: 0,
    };
    for l in 0..tree.depth().saturating_sub(1) {
        let (q, q_next) = (&tree.moduli[l], &tree.moduli[l + 1]);
        let room = &tree.radii[l] - &tree.radii[l + 1];
        let prec = room.prec();
        let fits = |child: &Integer, parent: &Integer| -> Option<Ordering> {
            let a = Rational::from((child.clone(), q_next.clone()));
            let b = Rational::from((parent.clone(), q.clone()));
            let dist = nearest_integer_distance(&(a - b));
            (&room - &LogReal::from_rational(prec, &dist)).sign()
        };
        for node in &tree.levels[l + 1] {
            let parent = &tree.levels[l][node.parent.expect("deeper nodes have parents")];
            report.checked += 1;
            match fits(&node.center, &parent.center) {
                Some(Ordering::Less) => report.violations += 1,
                None => report.undecided += 1,
                _ => {}
            }
        }
        let m = Integer::from(q_next / q);
        for parent in &tree.levels[l] {
            let k = (parent.child_count as i64 - 1) / 2;
            let base = Integer::from(&parent.center * &m);
            for d in [-(k + 1), k + 1] {
                let c = Integer::from(&base + d).rem_euc(q_next);
                if matches!(
                    fits(&c, &parent.center),
                    Some(Ordering::Greater) | Some(Ordering::Equal)
                ) {
                    report.missing_children += 1;
                }
            }
        }
    }
    report
}

/// Exact Σ m_l over each level.
pub fn level_masses(tree: &CoverTree) -> Vec<Rational> {
    tree.levels
        .iter()
        .map(|nodes| {
            let mut sum = Rational::new();
            for n in nodes {
                sum += &n.mass;
            }
            sum
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CountingLevel {
    pub level: usize,
    pub nodes: u64,
    pub min_children: u64,
    pub max_children: u64,
    /// (Q_{n_{l+1}}/Q_{n_l})·e^{−α(n_l)} − 2.
    pub weak_bound: f64,
    /// |Δ|·Q_{n_{l+1}} − 2, twice the scaled radius minus 2.
    pub full_length_bound: f64,
    /// ½·(Q_{n_{l+1}}/Q_{n_l})·e^{−α(n_l)}.
    pub strong_bound: f64,
    pub weak_violations: u64,
    pub full_length_violations: u64,
    pub strong_failures: u64,
    pub undecided: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CountingReport {
    pub levels: Vec<CountingLevel>,
    pub weak_holds: bool,
    pub strong_holds: bool,
}

/// `count ≥ bound`: Some(true) certified, Some(false) certified violation.
pub fn count_meets(count: u64, bound: &LogReal) -> Option<bool> {
    let c = LogReal::from_integer(bound.prec(), &Integer::from(count));
    match (&c - bound).sign()? {
        Ordering::Less => Some(false),
        _ => Some(true),
    }
}

pub fn counting_inequality_check(tree: &CoverTree) -> Result<CountingReport> {
    let mut levels = Vec::new();
    for l in 0..tree.depth().saturating_sub(1) {
        let prec = tree.alpha_sums[l].prec();
        let scaled = tree.scaled_radius(l, prec)?;
        let two = LogReal::from_i64(prec, 2);
        let weak = &scaled - &two;
        let full = &(&scaled * &two) - &two;
        let strong = scaled.div(&two).map_err(Error::Domain)?;
        let mut row = CountingLevel {
            level: l + 1,
            nodes: tree.levels[l].len() as u64,
            min_children: u64::MAX,
            max_children: 0,
            weak_bound: weak.to_f64(),
            full_length_bound: full.to_f64(),
            strong_bound: strong.to_f64(),
            weak_violations: 0,
            full_length_violations: 0,
            strong_failures: 0,
            undecided: 0,
        };
        for node in &tree.levels[l] {
            let c = node.child_count;
            row.min_children = row.min_children.min(c);
            row.max_children = row.max_children.max(c);
            for (bound, counter) in [
                (&weak, &mut row.weak_violations),
                (&full, &mut row.full_length_violations),
                (&strong, &mut row.strong_failures),
            ] {
                match count_meets(c, bound) {
                    Some(true) => {}
                    Some(false) => *counter += 1,
                    None => row.undecided += 1,
                }
            }
        }
        levels.push(row);
    }
    let weak_holds = levels
        .iter()
        .all(|r| r.weak_violations == 0 && r.full_length_violations == 0);
    let strong_holds = levels.iter().all(|r| r.strong_failures == 0);
    Ok(CountingReport {
        levels,
        weak_holds,
        strong_holds,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CylinderLevel {
    pub level: usize,
    pub nodes: u64,
    pub distinct_masses: u64,
    /// log of the bound 2^{l−1}·exp(Σ_{i<l} α(n_i))/Q_{n_l}.
    pub log_bound: f64,
    /// Largest log m(Δ) on the level.
    pub log_max_mass: f64,
    pub violations: u64,
    pub undecided: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CylinderReport {
    pub skipped: Option<String>,
    pub levels: Vec<CylinderLevel>,
    pub holds: bool,
}

/// m(Δ) ≤ 2^{l−1}·exp(α(n_1) + … + α(n_{l−1}))/Q_{n_l} at every node.
pub fn cylinder_estimate_check(tree: &CoverTree) -> Result<CylinderReport> {
    let counting = counting_inequality_check(tree)?;
    if !counting.strong_holds {
        return Ok(CylinderReport {
            skipped: Some("the halved counting bound fails at some level".into()),
            levels: Vec::new(),
            holds: false,
        });
    }
    let mut levels = Vec::new();
    for l in 0..tree.depth() {
        let mut distinct: BTreeMap<&Rational, u64> = BTreeMap::new();
        for node in &tree.levels[l] {
            *distinct.entry(&node.mass).or_default() += 1;
        }
        let mut row = CylinderLevel {
            level: l + 1,
            nodes: tree.levels[l].len() as u64,
            distinct_masses: distinct.len() as u64,
            log_bound: 0.0,
            log_max_mass: f64::NEG_INFINITY,
            violations: 0,
            undecided: 0,
        };
        if l == 0 {
            // Exact: the bound is 1/Q_{n_1}.
            let bound = Rational::from((Integer::from(1), tree.moduli[0].clone()));
            row.log_bound = -ln_integer(64, &tree.moduli[0])?.to_f64();
            for (m, count) in &distinct {
                row.log_max_mass = row.log_max_mass.max(ln_rational(64, m)?.to_f64());
                if **m > bound {
                    row.violations += count;
                }
            }
            levels.push(row);
            continue;
        }
        let base_prec = tree.alpha_sums[0].prec();
        for (m, count) in &distinct {
            let mut verdict = None;
            for p in std::iter::once(base_prec).chain(ESCALATION.iter().copied().filter(|&p| p > base_prec)) {
                let mut exponent = LogReal::ln2(p).mul_integer(&Integer::from(l));
                for i in 0..l {
                    exponent = &exponent + &tree.alpha_at(i, p)?;
                }
                let log_bound = &exponent - &ln_integer(p, &tree.moduli[l])?;
                let log_m = ln_rational(p, m)?;
                row.log_bound = log_bound.to_f64();
                row.log_max_mass = row.log_max_mass.max(log_m.to_f64());
                verdict = (&log_bound - &log_m).sign();
                if verdict.is_some() {
                    break;
                }
            }
            match verdict {
                Some(Ordering::Less) => row.violations += count,
                None => row.undecided += count,
                _ => {}
            }
        }
        levels.push(row);
    }
    let holds = levels.iter().all(|r| r.violations == 0);
    Ok(CylinderReport {
        skipped: None,
        levels,
        holds,
    })
}

/// Sorted centers and prefix masses per level, for ball masses.
pub struct MassIndex<'a> {
    tree: &'a CoverTree,
    sorted: Vec<Vec<(Integer, Rational)>>,
    prefix: Vec<Vec<Rational>>,
}

impl<'a> MassIndex<'a> {
    pub fn new(tree: &'a CoverTree) -> Self {
        let mut sorted = Vec::with_capacity(tree.depth());
        let mut prefix = Vec::with_capacity(tree.depth());
        for nodes in &tree.levels {
            let mut s: Vec<(Integer, Rational)> =
                nodes.iter().map(|n| (n.center.clone(), n.mass.clone())).collect();
            s.sort_by(|a, b| a.0.cmp(&b.0));
            let mut p = Vec::with_capacity(s.len() + 1);
            let mut acc = Rational::new();
            p.push(acc.clone());
            for (_, m) in &s {
                acc += m;
                p.push(acc.clone());
            }
            sorted.push(s);
            prefix.push(p);
        }
        MassIndex { tree, sorted, prefix }
    }

    /// Largest level index whose radius is ≥ r, if any.
    pub fn radius_level(&self, r: f64) -> Option<usize> {
        (0..self.tree.depth())
            .rev()
            .find(|&l| self.tree.radii[l].to_f64() >= r)
    }

    /// m(B(x, r)): total mass of the targets at level min(l + 1, L) that meet
    /// the ball, l being the deepest level with radius ≥ r. Returns the mass
    /// and the level (1-based) used.
    pub fn ball_mass(&self, x: &Rational, r: f64) -> (Rational, usize) {
        let depth = self.tree.depth();
        let lvl = self.radius_level(r).map_or(0, |l| (l + 1).min(depth - 1));
        (self.mass_at_level(lvl, x, r), lvl + 1)
    }

    fn mass_at_level(&self, lvl: usize, x: &Rational, r: f64) -> Rational {
        let total = self.prefix[lvl].last().expect("prefix has a zero entry").clone();
        let q = &self.tree.moduli[lvl];
        let prec = q.significant_bits() + 128;
        let reach = Float::with_val_round(prec, r + self.tree.radii[lvl].upper().to_f64_round(Round::Up), Round::Up).0;
        if reach >= 0.5 {
            return total;
        }
        let xf = Float::with_val(prec, x);
        let lo = Float::with_val_round(prec, &xf - &reach, Round::Down).0;
        let lo = Float::with_val_round(prec, lo * q, Round::Down).0;
        let hi = Float::with_val_round(prec, &xf + &reach, Round::Up).0;
        let hi = Float::with_val_round(prec, hi * q, Round::Up).0;
        let lo = lo.ceil().to_integer().expect("finite");
        let hi = hi.floor().to_integer().expect("finite");
        if hi < lo {
            return Rational::new();
        }
        let span = Integer::from(&hi - &lo) + 1u32;
        if span >= *q {
            return total;
        }
        let start = lo.rem_euc(q);
        let end = Integer::from(&start + &span);
        if end <= *q {
            self.range_mass(lvl, &start, &end)
        } else {
            let wrapped = Integer::from(&end - q);
            self.range_mass(lvl, &start, q) + self.range_mass(lvl, &Integer::new(), &wrapped)
        }
    }

    /// Mass of the nodes with center index in [a, b).
    fn range_mass(&self, lvl: usize, a: &Integer, b: &Integer) -> Rational {
        let s = &self.sorted[lvl];
        let i = s.partition_point(|(c, _)| c < a);
        let j = s.partition_point(|(c, _)| c < b);
        Rational::from(&self.prefix[lvl][j] - &self.prefix[lvl][i])
    }
}

/// m(B(x, r)) with a freshly built index.
pub fn ball_mass(tree: &CoverTree, x: &Rational, r: f64) -> Rational {
    MassIndex::new(tree).ball_mass(x, r).0
}

#[derive(Debug, Clone, Serialize)]
pub struct FrostmanWorst {
    pub x: String,
    pub r: f64,
    pub level: usize,
    pub mass: String,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FrostmanReport {
    pub s: f64,
    pub samples: u64,
    pub c_observed: f64,
    pub log_c: f64,
    /// C_observed ≤ C.
    pub bound_holds: bool,
    pub worst: Option<FrostmanWorst>,
    /// Samples with r·Q_{n_{l+1}} < 2, where the cover-count step
    /// r·Q + 2 ≤ 2r·Q does not apply.
    pub cover_count_failures: u64,
    pub cover_count_log: Vec<(f64, usize)>,
}

/// Samples m(B(x, r))/r^s with x at deepest-level centers and r stratified
/// log-uniformly over (ρ_L, ρ_1).
pub fn frostman_check(
    tree: &CoverTree,
    s: f64,
    sample_count: usize,
    radii_per_sample: usize,
    seed: u64,
) -> Result<FrostmanReport> {
    if tree.depth() < 2 {
        return Err(Error::PreconditionUnmet("the Frostman check needs at least two levels".into()));
    }
    let index = MassIndex::new(tree);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let deepest = tree.levels.last().expect("depth checked");
    let q_last = tree.moduli.last().expect("depth checked");
    let ln_lo = tree.radii.last().expect("depth checked").to_f64().ln();
    let ln_hi = tree.radii[0].to_f64().ln();
    let mut report = FrostmanReport {
        s,
        samples: 0,
        c_observed: 0.0,
        log_c: tree.schedule.log_c,
        bound_holds: true,
        worst: None,
        cover_count_failures: 0,
        cover_count_log: Vec::new(),
    };
    for _ in 0..sample_count {
        let node = &deepest[rng.gen_range(0..deepest.len())];
        let x = Rational::from((node.center.clone(), q_last.clone()));
        for i in 0..radii_per_sample {
            let u = (i as f64 + rng.gen::<f64>()) / radii_per_sample as f64;
            let r = (ln_lo + u * (ln_hi - ln_lo)).exp();
            let (mass, level) = index.ball_mass(&x, r);
            let ratio = mass.to_f64() / r.powf(s);
            report.samples += 1;
            if let Some(l) = index.radius_level(r) {
                if l + 1 < tree.depth() {
                    let log_count = r.ln() + ln_integer(64, &tree.moduli[l + 1])?.to_f64();
                    if log_count < std::f64::consts::LN_2 {
                        report.cover_count_failures += 1;
                        if report.cover_count_log.len() < MAX_LOGGED_FAILURES {
                            report.cover_count_log.push((r, l + 1));
                        }
                    }
                }
            }
            if ratio > report.c_observed {
                report.c_observed = ratio;
                report.worst = Some(FrostmanWorst {
                    x: x.to_string(),
                    r,
                    level,
                    mass: mass.to_string(),
                    ratio,
                });
            }
        }
    }
    report.bound_holds = report.c_observed.ln() <= report.log_c;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct HausdorffSum {
    /// Σ_j |Δ_{n,j}|^t over all Q_n targets, when enumerable.
    pub direct: Option<LogReal>,
    /// 2^t·Q_n^{1−t}·e^{−tα(n)}.
    pub closed: LogReal,
    pub relative_error: Option<f64>,
}

pub fn hausdorff_sum(
    q: &mut CumulativeCache,
    alpha: &mut CumulativeCache,
    t: f64,
    n: usize,
    prec: u32,
    enumeration_cap: u64,
) -> Result<HausdorffSum> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!("t must lie in [0, 1], got {t}")));
    }
    let tb = LogReal::from_f64(prec, t);
    let one = LogReal::from_i64(prec, 1);
    let log_q = q.sum_at(n, prec)?.with_prec(prec);
    let a = alpha.sum_at(n, prec)?.with_prec(prec);
    let ln2 = LogReal::ln2(prec);
    let closed_log = &(&(&tb * &ln2) + &(&(&one - &tb) * &log_q)) - &(&tb * &a);
    let closed = exp_ball(&closed_log)?;

    let qn = match q.partial_product(n) {
        Ok(v) => Some(v.clone()),
        Err(Error::CapExceeded { .. }) => None,
        Err(e) => return Err(e),
    };
    let direct = match qn {
        Some(qn) if qn <= enumeration_cap => {
            let log_len = &(&ln2 - &a) - &ln_integer(prec, &qn)?;
            let term = exp_ball(&(&tb * &log_len))?;
            let mut sum = PairwiseSum::new();
            for _ in 0..qn.to_u64().expect("below the enumeration cap") {
                sum.push(term.clone());
            }
            Some(sum.finish(prec))
        }
        _ => None,
    };
    let relative_error = direct.as_ref().map(|d| {
        let diff = Float::with_val(prec, d.mid() - closed.mid());
        Float::with_val(prec, diff / closed.mid()).abs().to_f64()
    });
    Ok(HausdorffSum {
        direct,
        closed,
        relative_error,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesReport {
    pub t: f64,
    pub p_hat: f64,
    pub window: (usize, usize),
    /// Tail n where Σ_j |Δ_{n,j}|^t > 2^t·exp(½·P̂(t)·n).
    pub violations: u64,
    /// max over the window of log(sum) − log(bound); negative when it holds.
    pub max_excess: f64,
    /// (N, log Σ_{n=N}^{N_hi} Σ_j |Δ_{n,j}|^t) at several starting points.
    pub log_tail_sums: Vec<(usize, f64)>,
    /// log of the geometric bound 2^t·Σ_{n≥N_lo} exp(½·P̂(t)·n).
    pub log_geometric_bound: f64,
    pub decaying: bool,
}

fn log_sum_exp(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Checks Σ_j |Δ_{n,j}|^t ≤ 2^t·exp(½·P̂(t)·n) over the tail window and
/// reports the decay of the tail sums.
pub fn upper_bound_series_check(
    q: &mut CumulativeCache,
    alpha: &mut CumulativeCache,
    t: f64,
    n_hi: usize,
    window_fraction: f64,
) -> Result<SeriesReport> {
    let (p_hat, profile) = pressure_estimate(q, alpha, t, n_hi, window_fraction)?;
    if p_hat >= 0.0 {
        return Err(Error::PreconditionUnmet(format!(
            "windowed pressure at t = {t} is {p_hat}, not negative"
        )));
    }
    let ln2 = std::f64::consts::LN_2;
    let mut violations = 0;
    let mut max_excess = f64::NEG_INFINITY;
    let mut logs = Vec::with_capacity(profile.samples.len());
    for &(n, f) in &profile.samples {
        let lhs = t * ln2 + n as f64 * f;
        let rhs = t * ln2 + 0.5 * p_hat * n as f64;
        if lhs > rhs {
            violations += 1;
        }
        max_excess = max_excess.max(lhs - rhs);
        logs.push(lhs);
    }
    let (lo, hi) = profile.window;
    let len = hi - lo;
    let starts = [lo, lo + len / 4, lo + len / 2, lo + 3 * len / 4];
    let log_tail_sums: Vec<(usize, f64)> = starts
        .iter()
        .map(|&s| (s, log_sum_exp(logs[s - lo..].iter().copied())))
        .collect();
    let half = 0.5 * p_hat;
    let log_geometric_bound = t * ln2 + half * lo as f64 - (-(half.exp_m1())).ln();
    let decaying = log_tail_sums.windows(2).all(|w| w[1].1 < w[0].1)
        && log_tail_sums[0].1 <= log_geometric_bound;
    Ok(SeriesReport {
        t,
        p_hat,
        window: profile.window,
        violations,
        max_excess,
        log_tail_sums,
        log_geometric_bound,
        decaying,
    })
}

fn decimal(x: &Float, round: Round) -> String {
    x.to_string_radix_round(10, Some(20), round)
}

/// Writes the tree as tab-separated text, one node per line.
pub fn export_tree<W: Write>(tree: &CoverTree, out: &mut W) -> Result<()> {
    writeln!(out, "# cantor-shrink cover tree v{TREE_FORMAT_VERSION}")?;
    writeln!(out, "# q: {}", tree.q_spec)?;
    writeln!(out, "# alpha: {}", tree.alpha_spec.text())?;
    writeln!(out, "# s: {}", tree.schedule.s)?;
    let levels: Vec<String> = tree.schedule.levels.iter().map(|n| n.to_string()).collect();
    writeln!(out, "# levels: {}", levels.join(" "))?;
    writeln!(out, "# log_c: {}", tree.schedule.log_c)?;
    writeln!(out, "level\tindex\tcenter\tradius_lower\tradius_upper\tmass\tchildren")?;
    for (l, nodes) in tree.levels.iter().enumerate() {
        let lo = decimal(&tree.radii[l].lower(), Round::Down);
        let hi = decimal(&tree.radii[l].upper(), Round::Up);
        for node in nodes {
            writeln!(
                out,
                "{}\t{}\t{}/{}\t{}\t{}\t{}\t{}",
                l + 1,
                node.center,
                node.center,
                tree.moduli[l],
                lo,
                hi,
                node.mass,
                node.child_count
            )?;
        }
    }
    Ok(())
}
