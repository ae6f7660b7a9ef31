//! Command-line front end. Every subcommand writes a stream of flat records
//! in one of three framings; the schema is documented in the README.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use crate::covertree::{
    self, build_cover, choose_levels, counting_inequality_check, cylinder_estimate_check,
    export_tree, frostman_check, hausdorff_sum, level_masses, manual_schedule,
    upper_bound_series_check, verify_nesting, CoverTree, FrostmanConstant, ScheduleOptions,
};
use crate::dimension::{
    self, bowen_parameter, corollary_limit, dimension_limsup, family_formula, limsup_profile,
    pressure_estimate, stolz_check, DimensionEstimate, Family,
};
use crate::error::Error;
use crate::expansion::{cantor_digits, iterate, ExactPoint};
use crate::real::LogReal;
use crate::sequences::{CumulativeCache, SequenceSpec, Target, DEFAULT_CAP_BITS, DEFAULT_PRECISION};
use crate::targets::{self, height, hit_levels, hit_test, witness_search, Witness};

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_COMPUTATION: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    JsonLines,
    Csv,
    Human,
}

#[derive(Debug, Args)]
struct Common {
    /// Output framing.
    #[arg(long, value_enum, default_value = "json-lines", global = true)]
    format: Format,
    /// Write records to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Working precision in bits for verdicts and closed forms.
    #[arg(long, default_value_t = 128, global = true)]
    precision: u32,
    /// Largest exact partial product Q_n kept, in bits.
    #[arg(long, default_value_t = DEFAULT_CAP_BITS, global = true)]
    cap_bits: u64,
}

#[derive(Debug, Args)]
struct BaseArg {
    /// Base sequence Q, e.g. `periodic:2,3` or `expr:n+1`.
    #[arg(long)]
    q: String,
}

#[derive(Debug, Args)]
struct PairArgs {
    /// Base sequence Q.
    #[arg(long)]
    q: String,
    /// Weight sequence alpha, e.g. `const:1` or `expr:2*log(n)`.
    #[arg(long)]
    alpha: String,
}

#[derive(Debug, Args)]
struct WindowArgs {
    /// Upper end N of the tail window.
    #[arg(long)]
    n_max: usize,
    /// The window is [ceil(window * N), N].
    #[arg(long, default_value_t = dimension::DEFAULT_WINDOW)]
    window: f64,
}

#[derive(Debug, Args)]
struct TreeArgs {
    #[command(flatten)]
    pair: PairArgs,
    /// Target exponent s, below the dimension.
    #[arg(long)]
    s: f64,
    /// Depth L (`3`) or an explicit list of levels (`1,5,27`).
    #[arg(long)]
    levels: String,
    /// Largest n considered when choosing levels; also the pressure horizon.
    #[arg(long, default_value_t = 1000)]
    n_max: usize,
    /// log C for the Frostman budget.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    log_c: f64,
    /// Fit C after choosing levels instead of fixing it.
    #[arg(long, conflicts_with = "log_c")]
    fit_c: bool,
    /// Most intervals enumerated per level.
    #[arg(long, default_value_t = covertree::DEFAULT_ENUMERATION_CAP)]
    enum_cap: u64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cantor series digits of x and the remainder T^n x.
    Expand {
        #[command(flatten)]
        q: BaseArg,
        /// Rational `p/q` or decimal.
        #[arg(long, allow_negative_numbers = true)]
        x: String,
        #[arg(long)]
        n: usize,
    },
    /// T_Q^n x, exactly.
    Iterate {
        #[command(flatten)]
        q: BaseArg,
        #[arg(long, allow_negative_numbers = true)]
        x: String,
        #[arg(long)]
        n: usize,
    },
    /// Hit test at one level (`--n`) or all non-miss levels up to `--n-max`.
    Hits {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, allow_negative_numbers = true)]
        x: String,
        #[arg(long, conflicts_with = "n_max", required_unless_present = "n_max")]
        n: Option<usize>,
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Q-adic height of x.
    Height {
        #[command(flatten)]
        q: BaseArg,
        #[arg(long, allow_negative_numbers = true)]
        x: String,
        /// Scan horizon for sequences without a repeating structure.
        #[arg(long, default_value_t = targets::DEFAULT_HEIGHT_SCAN)]
        n_max: usize,
    },
    /// Order-n Q-adic witness within psi(n) of x.
    Witness {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, allow_negative_numbers = true)]
        x: String,
        #[arg(long)]
        n: usize,
    },
    /// Windowed pressure at s.
    Pressure {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long)]
        s: f64,
        #[command(flatten)]
        window: WindowArgs,
        /// Emit (n, f_n(s)) for every n in the window.
        #[arg(long)]
        profile: bool,
    },
    /// Zero of the windowed pressure by bisection.
    Bowen {
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        window: WindowArgs,
        #[arg(long, default_value_t = dimension::DEFAULT_TOL)]
        tol: f64,
    },
    /// Windowed limsup of log Q_n / (log Q_n + alpha(n)).
    Dimension {
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        window: WindowArgs,
        /// Emit (n, g_n) for every n in the window.
        #[arg(long)]
        profile: bool,
    },
    /// 1/(1+L) with L the limit of alpha_n / log q_n.
    Corollary {
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        window: WindowArgs,
    },
    /// Closed-form dimension of a standard family.
    Family {
        /// `periodic:2,3;c=1`, `poly:k=1/6;c=1` or `exp:b=2;c=log(2)`.
        #[arg(long, required_unless_present_all = ["q", "alpha"])]
        family: Option<String>,
        /// Infer the family from Q and alpha instead.
        #[arg(long, requires = "alpha", conflicts_with = "family")]
        q: Option<String>,
        #[arg(long, requires = "q")]
        alpha: Option<String>,
    },
    /// Choose levels and build the leveled cover.
    CoverBuild {
        #[command(flatten)]
        tree: TreeArgs,
        /// Write the tree dump here.
        #[arg(long)]
        tree_out: Option<PathBuf>,
    },
    /// Build the cover and run every check on it.
    CoverCheck {
        #[command(flatten)]
        tree: TreeArgs,
        /// Points sampled by the Frostman check.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Radii per sampled point.
        #[arg(long, default_value_t = 50)]
        radii: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Direct and closed-form sum of |Delta_{n,j}|^t.
    Hsum {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = covertree::DEFAULT_ENUMERATION_CAP)]
        enum_cap: u64,
    },
    /// Tail check of the covering sums at an exponent t above the dimension.
    SeriesCheck {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long)]
        t: f64,
        #[command(flatten)]
        window: WindowArgs,
    },
    /// Term ratio a_n/b_n against the partial-sum ratio.
    Stolz {
        /// Numerator sequence (nonnegative reals).
        #[arg(long)]
        a: String,
        /// Denominator sequence (positive reals).
        #[arg(long)]
        b: String,
        #[arg(long)]
        n_max: usize,
    },
}

#[derive(Debug, Parser)]
#[command(
    name = "cantor-shrink",
    version,
    about = "Shrinking targets for Cantor series expansions: digits, hits, pressure and dimension"
)]
struct Root {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// A JSON-compatible scalar or list; integers keep their exact digits.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(String),
    Num(f64),
    Str(String),
    Bool(bool),
    Null,
    List(Vec<Value>),
    /// Already-serialized JSON, emitted verbatim.
    Json(String),
}

impl Value {
    fn json(&self) -> String {
        match self {
            Value::Int(s) | Value::Json(s) => s.clone(),
            Value::Num(x) if x.is_finite() => format!("{x:?}"),
            Value::Num(_) | Value::Null => "null".into(),
            Value::Str(s) => serde_json::to_string(s).expect("strings serialize"),
            Value::Bool(b) => b.to_string(),
            Value::List(v) => {
                let parts: Vec<String> = v.iter().map(Value::json).collect();
                format!("[{}]", parts.join(","))
            }
        }
    }

    fn plain(&self) -> String {
        match self {
            Value::Str(s) => s.clone(),
            Value::Null => String::new(),
            other => other.json(),
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Num(x)
    }
}

impl From<usize> for Value {
    fn from(x: usize) -> Self {
        Value::Int(x.to_string())
    }
}

impl From<u64> for Value {
    fn from(x: u64) -> Self {
        Value::Int(x.to_string())
    }
}

impl From<bool> for Value {
    fn from(x: bool) -> Self {
        Value::Bool(x)
    }
}

impl From<&str> for Value {
    fn from(x: &str) -> Self {
        Value::Str(x.to_string())
    }
}

impl From<String> for Value {
    fn from(x: String) -> Self {
        Value::Str(x)
    }
}

impl From<&rug::Integer> for Value {
    fn from(x: &rug::Integer) -> Self {
        Value::Int(x.to_string())
    }
}

impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(x: Option<T>) -> Self {
        x.map_or(Value::Null, Into::into)
    }
}

/// One output row: ordered (key, value) pairs.
pub type Record = Vec<(&'static str, Value)>;

fn nested<T: serde::Serialize>(v: &T) -> Value {
    Value::Json(serde_json::to_string(v).expect("reports serialize"))
}

fn write_records(out: &mut dyn Write, format: Format, records: &[Record]) -> io::Result<()> {
    match format {
        Format::JsonLines => {
            for r in records {
                let fields: Vec<String> = r
                    .iter()
                    .map(|(k, v)| format!("{}:{}", Value::Str(k.to_string()).json(), v.json()))
                    .collect();
                writeln!(out, "{{{}}}", fields.join(","))?;
            }
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            if let Some(first) = records.first() {
                w.write_record(first.iter().map(|(k, _)| *k))?;
            }
            for r in records {
                w.write_record(r.iter().map(|(_, v)| v.plain()))?;
            }
            w.flush()?;
        }
        Format::Human => {
            for r in records {
                let width = r.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
                for (k, v) in r {
                    writeln!(out, "{k:<width$}  {}", v.plain())?;
                }
                if records.len() > 1 {
                    writeln!(out)?;
                }
            }
        }
    }
    Ok(())
}

/// Failures, classified by exit code.
enum Failure {
    Usage(String),
    Computation(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. } | Error::InvalidArgument(_) | Error::UnsupportedFamily(_) => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Computation(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Computation(e.to_string())
    }
}

/// Spec parsing happens before any computation; every failure there is a
/// usage error.
fn cache(text: &str, target: Target, common: &Common) -> Result<CumulativeCache, Failure> {
    let prec = common.precision.max(DEFAULT_PRECISION);
    let spec = SequenceSpec::parse_with_precision(text, target, prec)
        .map_err(|e| Failure::Usage(format!("sequence '{text}': {e}")))?;
    Ok(CumulativeCache::new(spec).with_cap_bits(common.cap_bits))
}

fn pair(p: &PairArgs, common: &Common) -> Result<(CumulativeCache, CumulativeCache), Failure> {
    Ok((cache(&p.q, Target::Base, common)?, cache(&p.alpha, Target::Weight, common)?))
}

fn point(x: &str) -> Result<ExactPoint, Failure> {
    x.parse().map_err(|e: Error| Failure::Usage(e.to_string()))
}

fn ball_fields(b: &LogReal) -> [(&'static str, Value); 2] {
    [("value", b.to_f64().into()), ("radius", b.rad().to_f64().into())]
}

fn decimal(b: &LogReal, digits: usize) -> String {
    b.mid().to_string_radix(10, Some(digits))
}

fn estimate_record(e: &DimensionEstimate) -> Record {
    vec![
        ("value", e.value.into()),
        ("method", serialize_enum(&e.method)),
        ("window_lo", e.window.0.into()),
        ("window_hi", e.window.1.into()),
        ("residual", e.residual.into()),
        ("flag", e.flag.as_ref().map_or(Value::Null, serialize_enum)),
    ]
}

fn serialize_enum<T: serde::Serialize>(v: &T) -> Value {
    match serde_json::to_value(v).expect("enums serialize") {
        serde_json::Value::String(s) => Value::Str(s),
        other => Value::Str(other.to_string()),
    }
}

fn parse_levels(text: &str) -> Result<Result<usize, Vec<usize>>, Failure> {
    let bad = || Failure::Usage(format!("--levels '{text}': expected a depth like 3 or a list like 1,5,27"));
    if text.contains(',') {
        let v: Result<Vec<usize>, _> = text
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse::<usize>())
            .collect();
        Ok(Err(v.map_err(|_| bad())?))
    } else {
        Ok(Ok(text.trim().parse().map_err(|_| bad())?))
    }
}

fn build_tree(t: &TreeArgs, common: &Common) -> Result<CoverTree, Failure> {
    let (mut q, mut a) = pair(&t.pair, common)?;
    let opts = ScheduleOptions {
        frostman: if t.fit_c {
            FrostmanConstant::Fitted
        } else {
            FrostmanConstant::Fixed(t.log_c)
        },
        ..Default::default()
    };
    let schedule = match parse_levels(&t.levels)? {
        Ok(depth) => choose_levels(&mut q, &mut a, t.s, depth, t.n_max, opts)?,
        Err(list) => manual_schedule(&mut q, &mut a, t.s, &list, t.n_max, opts)?,
    };
    Ok(build_cover(&mut q, &mut a, &schedule, t.enum_cap)?)
}

fn level_list(levels: &[usize]) -> Value {
    Value::List(levels.iter().map(|&n| n.into()).collect())
}

fn execute(command: &Command, common: &Common) -> Result<Vec<Record>, Failure> {
    let prec = common.precision;
    if prec < 32 {
        return Err(Failure::Usage(format!("--precision must be at least 32, got {prec}")));
    }
    let records = match command {
        Command::Expand { q, x, n } => {
            let c = cache(&q.q, Target::Base, common)?;
            let x = point(x)?;
            let d = cantor_digits(&x, &c, *n)?;
            vec![vec![
                ("x", x.to_string().into()),
                ("n", (*n).into()),
                ("digits", Value::List(d.digits.iter().map(Into::into).collect())),
                ("remainder", d.remainder.to_string().into()),
            ]]
        }
        Command::Iterate { q, x, n } => {
            let c = cache(&q.q, Target::Base, common)?;
            let x = point(x)?;
            let y = iterate(&x, &c, *n)?;
            vec![vec![
                ("x", x.to_string().into()),
                ("n", (*n).into()),
                ("value", y.to_string().into()),
            ]]
        }
        Command::Hits { pair: p, x, n, n_max } => {
            let (q, mut a) = pair(p, common)?;
            let x = point(x)?;
            let levels = match (n, n_max) {
                (Some(n), _) => vec![(*n, hit_test(&x, &q, &mut a, *n, prec)?)],
                (None, Some(m)) => hit_levels(&x, &q, &mut a, *m, prec)?,
                (None, None) => unreachable!("clap requires one of --n, --n-max"),
            };
            levels
                .into_iter()
                .map(|(n, v)| {
                    vec![
                        ("x", x.to_string().into()),
                        ("n", n.into()),
                        ("verdict", v.status.name().into()),
                        ("margin", v.margin.as_ref().map(|m| m.to_f64()).into()),
                        ("margin_radius", v.margin.as_ref().map(|m| m.rad().to_f64()).into()),
                    ]
                })
                .collect()
        }
        Command::Height { q, x, n_max } => {
            let c = cache(&q.q, Target::Base, common)?;
            let x = point(x)?;
            let h = height(&x, &c, *n_max)?;
            vec![vec![("x", x.to_string().into()), ("height", h.into())]]
        }
        Command::Witness { pair: p, x, n } => {
            let (mut q, mut a) = pair(p, common)?;
            let x = point(x)?;
            let w = witness_search(&x, &mut q, &mut a, *n, prec)?;
            let margin = |m: Option<&LogReal>| -> Value { m.map(|m| m.to_f64()).into() };
            let (w_str, index, distance, h, m) = match &w {
                Witness::Found {
                    w,
                    index,
                    distance,
                    height,
                    margin: mg,
                } => (
                    Value::from(w.to_string()),
                    Value::from(index),
                    Value::from(distance.to_string()),
                    Value::from(*height),
                    margin(mg.as_ref()),
                ),
                Witness::Absent { margin: mg } | Witness::Uncertain { margin: mg } => {
                    (Value::Null, Value::Null, Value::Null, Value::Null, margin(Some(mg)))
                }
            };
            vec![vec![
                ("x", x.to_string().into()),
                ("n", (*n).into()),
                ("verdict", w.status().name().into()),
                ("w", w_str),
                ("index", index),
                ("distance", distance),
                ("height", h),
                ("margin", m),
            ]]
        }
        Command::Pressure {
            pair: p,
            s,
            window,
            profile,
        } => {
            let (mut q, mut a) = pair(p, common)?;
            let (v, prof) = pressure_estimate(&mut q, &mut a, *s, window.n_max, window.window)?;
            if *profile {
                prof.samples
                    .iter()
                    .map(|&(n, f)| vec![("n", n.into()), ("value", f.into())])
                    .collect()
            } else {
                vec![vec![
                    ("s", (*s).into()),
                    ("value", v.into()),
                    ("window_lo", prof.window.0.into()),
                    ("window_hi", prof.window.1.into()),
                ]]
            }
        }
        Command::Bowen { pair: p, window, tol } => {
            let (mut q, mut a) = pair(p, common)?;
            vec![estimate_record(&bowen_parameter(
                &mut q,
                &mut a,
                window.n_max,
                *tol,
                window.window,
            )?)]
        }
        Command::Dimension {
            pair: p,
            window,
            profile,
        } => {
            let (mut q, mut a) = pair(p, common)?;
            if *profile {
                limsup_profile(&mut q, &mut a, window.n_max, window.window)?
                    .into_iter()
                    .map(|(n, g)| vec![("n", n.into()), ("value", g.into())])
                    .collect()
            } else {
                vec![estimate_record(&dimension_limsup(
                    &mut q,
                    &mut a,
                    window.n_max,
                    window.window,
                )?)]
            }
        }
        Command::Corollary { pair: p, window } => {
            let (mut q, mut a) = pair(p, common)?;
            vec![estimate_record(&corollary_limit(
                &mut q,
                &mut a,
                window.n_max,
                window.window,
            )?)]
        }
        Command::Family { family, q, alpha } => {
            let fam = match (family, q, alpha) {
                (Some(f), _, _) => Family::parse(f)?,
                (None, Some(q), Some(a)) => {
                    let q = cache(q, Target::Base, common)?;
                    let a = cache(a, Target::Weight, common)?;
                    Family::infer(q.spec(), a.spec())?
                }
                _ => unreachable!("clap requires --family or both --q and --alpha"),
            };
            let v = family_formula(&fam, prec)?;
            let [value, radius] = ball_fields(&v);
            vec![vec![
                ("family", fam.to_string().into()),
                value,
                radius,
                ("decimal", decimal(&v, 30).into()),
                ("method", serialize_enum(&dimension::Method::FamilyFormula)),
            ]]
        }
        Command::CoverBuild { tree, tree_out } => {
            let t = build_tree(tree, common)?;
            if let Some(path) = tree_out {
                let mut f = io::BufWriter::new(File::create(path)?);
                export_tree(&t, &mut f)?;
                f.flush()?;
            }
            vec![vec![
                ("levels", level_list(&t.schedule.levels)),
                ("log_c", t.schedule.log_c.into()),
                ("p_hat", t.schedule.p_hat.into()),
                ("schedule_sound", t.schedule.is_sound().into()),
                (
                    "nodes",
                    Value::List(t.levels.iter().map(|l| l.len().into()).collect()),
                ),
                ("undecided_ties", t.undecided_ties.into()),
                ("witnesses", nested(&t.schedule.witnesses)),
            ]]
        }
        Command::CoverCheck {
            tree,
            samples,
            radii,
            seed,
        } => {
            let t = build_tree(tree, common)?;
            let masses = level_masses(&t);
            let conserved = masses.iter().all(|m| *m == 1);
            let nesting = verify_nesting(&t);
            let counting = counting_inequality_check(&t)?;
            let cylinder = cylinder_estimate_check(&t)?;
            let frostman = frostman_check(&t, t.schedule.s, *samples, *radii, *seed)?;
            let mass_strings: Vec<String> = masses.iter().map(|m| m.to_string()).collect();
            let row = |check: &str, holds: bool, detail: Value| -> Record {
                vec![
                    ("check", check.into()),
                    ("levels", level_list(&t.schedule.levels)),
                    ("holds", holds.into()),
                    ("detail", detail),
                ]
            };
            vec![
                row("schedule", t.schedule.is_sound(), nested(&t.schedule.witnesses)),
                row("mass_conservation", conserved, nested(&mass_strings)),
                row("nesting", nesting.holds(), nested(&nesting)),
                row("counting_weak", counting.weak_holds, nested(&counting)),
                row("counting_strong", counting.strong_holds, nested(&counting)),
                row("cylinder", cylinder.holds, nested(&cylinder)),
                row("frostman", frostman.bound_holds, nested(&frostman)),
            ]
        }
        Command::Hsum {
            pair: p,
            t,
            n,
            enum_cap,
        } => {
            let (mut q, mut a) = pair(p, common)?;
            let h = hausdorff_sum(&mut q, &mut a, *t, *n, prec, *enum_cap)?;
            vec![vec![
                ("t", (*t).into()),
                ("n", (*n).into()),
                ("direct", h.direct.as_ref().map(|d| d.to_f64()).into()),
                ("closed", h.closed.to_f64().into()),
                ("relative_error", h.relative_error.into()),
            ]]
        }
        Command::SeriesCheck { pair: p, t, window } => {
            let (mut q, mut a) = pair(p, common)?;
            let r = upper_bound_series_check(&mut q, &mut a, *t, window.n_max, window.window)?;
            vec![vec![
                ("t", r.t.into()),
                ("p_hat", r.p_hat.into()),
                ("window_lo", r.window.0.into()),
                ("window_hi", r.window.1.into()),
                ("violations", r.violations.into()),
                ("max_excess", r.max_excess.into()),
                ("log_geometric_bound", r.log_geometric_bound.into()),
                ("decaying", r.decaying.into()),
                (
                    "log_tail_sums",
                    Value::List(
                        r.log_tail_sums
                            .iter()
                            .map(|&(n, v)| Value::List(vec![n.into(), v.into()]))
                            .collect(),
                    ),
                ),
            ]]
        }
        Command::Stolz { a, b, n_max } => {
            let mut ca = cache(a, Target::Weight, common)?;
            let mut cb = cache(b, Target::Weight, common)?;
            let r = stolz_check(&mut ca, &mut cb, *n_max)?;
            vec![vec![
                ("n", r.n.into()),
                ("term_ratio", r.term_ratio.into()),
                ("term_ratio_half", r.term_ratio_half.into()),
                ("sum_ratio", r.sum_ratio.into()),
                ("gap", r.gap.into()),
            ]]
        }
    };
    Ok(records)
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let root = match Root::try_parse_from(args) {
        Ok(r) => r,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(sink, "{text}");
            return code;
        }
    };
    let outcome = execute(&root.command, &root.common).and_then(|records| {
        match &root.common.out {
            Some(path) => {
                let mut f = io::BufWriter::new(File::create(path)?);
                write_records(&mut f, root.common.format, &records)?;
                f.flush()?;
            }
            None => write_records(stdout, root.common.format, &records)?,
        }
        Ok(())
    });
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Computation(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_COMPUTATION
        }
    }
}
