use std::fmt;

use anyhow::anyhow;
use clap::{Args, ValueEnum};

use cfdim_core::arith::{self, format_rational, parse_rational};
use cfdim_core::audit::{full_audit, AuditOptions, Fault};
use cfdim_core::cantor::{enumerate_level, sample_point, Construction, EnumerationMode};
use cfdim_core::cf::{cassels_check, cf_expand, cf_expand_full, dirichlet_solve, CfWord};
use cfdim_core::classify::{dimension_formula, lower_order_tau, membership_evidence, series_classify};
use cfdim_core::dimension::{
    box_count_cover, holder_audit_balls, holder_audit_intervals, level_stats, mdp_lower_bound, BallConfig,
    DimensionEstimate, MassCover,
};
use cfdim_core::pressure::{
    assign_measure, normalization_audit, solve_with, BlockSpectrum, MeasureTree, PressureError, PressureSolution,
    DEFAULT_TERM_BUDGET,
};
use cfdim_core::{CantorSchedule, PsiSpec, Rational};

use crate::config::{ExperimentConfig, ScheduleConfig, EFFECTIVE_PRECISION_BITS};
use crate::output::{join, num, plot_data, Sink, Table};

/// How a command finished when it did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Clean,
    /// Findings were reported or only part of the output was produced.
    Findings,
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub const EXIT_FINDINGS: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_INTERNAL: u8 = 3;

pub trait ResultExt<T> {
    fn usage(self) -> Result<T, CliError>;
    fn internal(self) -> Result<T, CliError>;
}

impl<T, E: Into<anyhow::Error>> ResultExt<T> for Result<T, E> {
    fn usage(self) -> Result<T, CliError> {
        self.map_err(|e| CliError { code: EXIT_USAGE, error: e.into() })
    }
    fn internal(self) -> Result<T, CliError> {
        self.map_err(|e| CliError { code: EXIT_INTERNAL, error: e.into() })
    }
}

pub type CmdResult = Result<Outcome, CliError>;

fn parse_value(s: &str) -> Result<Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Quotients(pub Vec<u64>);

fn parse_word(s: &str) -> Result<Quotients, String> {
    let s = s.trim().trim_start_matches('[').trim_end_matches(']');
    if s.trim().is_empty() {
        return Ok(Quotients(Vec::new()));
    }
    s.split(',')
        .map(|t| t.trim().parse::<u64>().map_err(|e| format!("bad quotient {t:?}: {e}")))
        .collect::<Result<_, _>>()
        .map(Quotients)
}

fn word_text(word: &CfWord) -> String {
    format!("[{}]", join(word.quotients(), ","))
}

// --- cf ----------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct CfArgs {
    /// Rational in [0, 1), written p/q, an integer or a decimal.
    #[arg(value_parser = parse_value)]
    pub x: Rational,
    /// Stop the expansion after this many quotients.
    #[arg(long)]
    pub depth: Option<usize>,
    /// Solve Dirichlet's problem `1 <= q < t, |qx - p| <= 1/t`.
    #[arg(long = "dirichlet-t", value_parser = parse_value)]
    pub dirichlet_t: Option<Rational>,
}

pub fn cmd_cf(args: &CfArgs, sink: &mut Sink) -> CmdResult {
    let full = cf_expand_full(&args.x).usage()?;
    let word = match args.depth {
        Some(d) => cf_expand(&args.x, d).usage()?,
        None => full.clone(),
    };
    let dirichlet = match &args.dirichlet_t {
        Some(t) => Some(dirichlet_solve(&args.x, t).usage()?),
        None => None,
    };

    let mut summary = format!("x,{}\nword,\"{}\"\n", format_rational(&args.x), word_text(&word));
    if let (Some(t), Some((p, q))) = (&args.dirichlet_t, &dirichlet) {
        summary.push_str(&format!("dirichlet_t,{}\ndirichlet_solution,\"({p},{q})\"\n", format_rational(t)));
    }
    sink.emit("cf_summary.csv", &summary).internal()?;

    let mut conv = Table::new(&["n", "a_n", "p_n", "q_n"]);
    for n in 0..=word.len() {
        let a = if n == 0 { "0".to_string() } else { word.a(n).to_string() };
        conv.row([n.to_string(), a, word.p(n as isize).to_string(), word.q(n as isize).to_string()]);
    }
    sink.emit("cf_convergents.csv", &conv.finish()).internal()?;

    let mut cassels = Table::new(&["n", "theta_next", "phi_n", "lhs", "rhs", "residual"]);
    for n in 1..full.len().min(word.len() + 1) {
        let r = cassels_check(&args.x, n).internal()?;
        cassels.row([
            n.to_string(),
            format_rational(&r.theta_next),
            format_rational(&r.phi_n),
            format_rational(&r.lhs),
            format_rational(&r.rhs),
            format_rational(&r.residual),
        ]);
    }
    sink.emit("cf_cassels.csv", &cassels.finish()).internal()?;
    Ok(Outcome::Clean)
}

// --- pressure ----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapSweep(pub Vec<u64>);

fn parse_sweep(s: &str) -> Result<CapSweep, String> {
    let mut caps = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|_| format!("bad range start in {part:?}"))?;
            let b: u64 = b.trim().parse().map_err(|_| format!("bad range end in {part:?}"))?;
            if a > b {
                return Err(format!("empty range {part:?}"));
            }
            caps.extend(a..=b);
        } else {
            caps.push(part.parse().map_err(|_| format!("bad cap {part:?}"))?);
        }
    }
    Ok(CapSweep(caps))
}

#[derive(Debug, Args)]
pub struct PressureArgs {
    /// Block length L, at least 2.
    #[arg(long = "L")]
    pub block_len: usize,
    /// Caps M: a value, an inclusive range `a..b`, or a comma list of either.
    #[arg(long = "M", value_parser = parse_sweep)]
    pub caps: CapSweep,
    #[arg(long, value_parser = parse_value)]
    pub tau: Rational,
    /// Largest number of length-L words the solver may sum over.
    #[arg(long, default_value_t = DEFAULT_TERM_BUDGET)]
    pub budget: u64,
}

pub fn cmd_pressure(args: &PressureArgs, config: &ExperimentConfig, sink: &mut Sink) -> CmdResult {
    if args.block_len < 2 {
        return Err(anyhow!("--L must be at least 2, got {}", args.block_len)).usage();
    }
    if let Some(&m) = args.caps.0.iter().find(|&&m| m < 2) {
        return Err(anyhow!("every cap M must be at least 2, got {m}")).usage();
    }
    if args.tau < arith::int(0) {
        return Err(anyhow!("tau must be nonnegative")).usage();
    }
    let limit = 2.0 / (2.0 + arith::to_f64(&args.tau));
    let mut table = Table::new(&["L", "M", "tau", "S", "residual", "evaluations", "distance_to_limit"]);
    let mut outcome = Outcome::Clean;
    for &m in &args.caps.0 {
        let spectrum = match BlockSpectrum::new(args.block_len, m, args.budget) {
            Ok(s) => s,
            Err(e @ PressureError::Explosion { .. }) => {
                eprintln!("warning: stopping the sweep at M = {m}: {e}");
                outcome = Outcome::Findings;
                break;
            }
            Err(e) => return Err(e).usage(),
        };
        let sol = solve_with(&spectrum, &args.tau, config.tol).internal()?;
        table.row([
            args.block_len.to_string(),
            m.to_string(),
            format_rational(&args.tau),
            num(sol.s),
            num(sol.residual),
            sol.evaluations.to_string(),
            num((sol.s - limit).abs()),
        ]);
    }
    sink.emit("pressure.csv", &table.finish()).internal()?;
    Ok(outcome)
}

// --- cantor ------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct CantorArgs {
    /// Number of seeded sample points to draw.
    #[arg(long, default_value_t = 8)]
    pub samples: usize,
}

fn construction(config: &ExperimentConfig) -> Result<&dyn Construction, CliError> {
    Ok(match config.schedule().usage()? {
        ScheduleConfig::Cantor(s) => s,
        ScheduleConfig::General(g) => g,
    })
}

pub fn cmd_cantor(args: &CantorArgs, config: &ExperimentConfig, sink: &mut Sink) -> CmdResult {
    let c = construction(config)?;
    let seed = config.seed().usage()?;
    let mut outcome = Outcome::Clean;
    let mut levels = Table::new(&["level", "count", "truncated", "mean_length", "min_length", "max_length"]);
    for n in 1..=config.depth {
        let set = enumerate_level(c, n, config.node_budget, EnumerationMode::Truncate).usage()?;
        let lengths: Vec<f64> = set.entries.iter().map(|e| arith::to_f64(&e.interval.length())).collect();
        let mean = cfdim_core::stats::compensated_sum(lengths.iter().copied()) / lengths.len() as f64;
        let min = lengths.iter().copied().fold(f64::INFINITY, f64::min);
        let max = lengths.iter().copied().fold(0.0, f64::max);
        if set.truncated {
            outcome = Outcome::Findings;
            eprintln!("warning: level {n} truncated at {} entries", config.node_budget);
        }
        levels.row([
            n.to_string(),
            set.entries.len().to_string(),
            set.truncated.to_string(),
            num(mean),
            num(min),
            num(max),
        ]);
    }
    sink.emit("cantor_levels.csv", &levels.finish()).internal()?;

    let mut samples = Table::new(&["index", "seed", "word", "value"]);
    for i in 0..args.samples {
        let s = seed.wrapping_add(i as u64);
        let word = sample_point(c, config.depth, s).usage()?;
        let value = cfdim_core::cf::word_value(&word);
        samples.row([i.to_string(), s.to_string(), format!("\"{}\"", word_text(&word)), num(arith::to_f64(&value))]);
    }
    sink.emit("cantor_samples.csv", &samples.finish()).internal()?;
    Ok(outcome)
}

// --- measure -----------------------------------------------------------------

fn solve_for(schedule: &CantorSchedule, config: &ExperimentConfig) -> Result<PressureSolution, CliError> {
    let spectrum = BlockSpectrum::new(schedule.block_len(), schedule.cap(), DEFAULT_TERM_BUDGET).usage()?;
    solve_with(&spectrum, schedule.tau(), config.tol).internal()
}

fn build_measure(config: &ExperimentConfig) -> Result<MeasureTree, CliError> {
    let schedule = config.schedule().usage()?.cantor().usage()?;
    let sol = solve_for(schedule, config)?;
    assign_measure(schedule, &sol, config.depth, config.node_budget).usage()
}

pub fn cmd_measure(config: &ExperimentConfig, sink: &mut Sink) -> CmdResult {
    let measure = build_measure(config)?;
    let mut table = Table::new(&[
        "level",
        "role",
        "nodes",
        "total",
        "total_error",
        "max_parent_error",
        "min_mass",
        "passed",
    ]);
    let mut outcome = Outcome::Clean;
    for n in 0..=measure.depth() {
        let r = normalization_audit(&measure, n);
        if !r.passed {
            outcome = Outcome::Findings;
        }
        table.row([
            r.level.to_string(),
            r.role.to_string(),
            r.nodes.to_string(),
            num(r.total),
            num(r.total_error),
            num(r.max_parent_error),
            num(r.min_mass),
            r.passed.to_string(),
        ]);
    }
    sink.emit("measure.csv", &table.finish()).internal()?;
    Ok(outcome)
}

// --- dimension ---------------------------------------------------------------

#[derive(Debug, Args)]
pub struct DimensionArgs {
    /// Centers drawn for the ball audit.
    #[arg(long, default_value_t = 64)]
    pub centers: usize,
    /// Radii drawn per level and center.
    #[arg(long, default_value_t = 3)]
    pub radii: usize,
}

pub fn cmd_dimension(args: &DimensionArgs, config: &ExperimentConfig, sink: &mut Sink) -> CmdResult {
    let psi = config.psi().usage()?;
    let formula = dimension_formula(&psi).usage()?;
    if config.schedule.is_none() {
        // Nothing to estimate against: report the formula alone.
        eprintln!("note: no schedule configured, reporting the dimension formula only");
        let mut summary = Table::new(&["estimator", "value"]);
        summary.row(["formula".to_string(), formula.to_string()]);
        summary.row(["formula_decimal".to_string(), num(formula.to_f64())]);
        sink.emit("dimension_summary.csv", &summary.finish()).internal()?;
        return Ok(Outcome::Clean);
    }
    let seed = config.seed().usage()?;
    let measure = build_measure(config)?;
    let sol = measure.solution().clone();
    let depth = measure.depth();

    let mut levels = Table::new(&["level", "role", "count", "mean_length", "min_mass", "max_mass"]);
    for n in 0..=depth {
        let st = level_stats(&measure, n);
        let masses = measure.masses(n);
        let min = masses.iter().copied().fold(f64::INFINITY, f64::min);
        let max = masses.iter().copied().fold(0.0, f64::max);
        levels.row([
            n.to_string(),
            measure.role(n).to_string(),
            st.count.to_string(),
            num(st.mean_length),
            num(min),
            num(max),
        ]);
    }
    sink.emit("dimension_levels.csv", &levels.finish()).internal()?;

    let all_levels: Vec<usize> = (1..=depth).collect();
    let target = sol.holder_target();
    let mut estimates: Vec<(String, Result<DimensionEstimate, String>)> = Vec::new();
    estimates.push((
        "box-count".into(),
        box_count_cover(&measure, &all_levels).map_err(|e| e.to_string()),
    ));
    let ball_config = BallConfig {
        centers: args.centers,
        radii_per_level: args.radii,
        seed,
        ..BallConfig::default()
    };
    let balls = holder_audit_balls(&measure, target, &ball_config).map_err(|e| e.to_string());
    estimates.push((
        "mdp-fit".into(),
        balls.as_ref().map_err(Clone::clone).and_then(|b| mdp_lower_bound(b).map_err(|e| e.to_string())),
    ));
    let holder = holder_audit_intervals(&measure, &all_levels, target, config.margin);
    let holder_estimate = holder.as_ref().map_err(|e| e.to_string()).map(|h| DimensionEstimate {
        method: cfdim_core::dimension::EstimateMethod::MdpFit,
        value: h.fitted_slope.clamp(0.0, 1.0),
        raw: h.fitted_slope,
        levels_used: h.levels.clone(),
        residual: h.fit.rms_residual,
        plot: Vec::new(),
    });
    estimates.push(("interval-holder".into(), holder_estimate));

    let mut summary = Table::new(&[
        "estimator",
        "value",
        "raw",
        "residual",
        "levels",
        "S",
        "formula",
        "formula_decimal",
        "distance_to_S",
        "distance_to_formula",
    ]);
    let mut outcome = Outcome::Clean;
    for (name, est) in &estimates {
        match est {
            Ok(e) => summary.row([
                name.clone(),
                num(e.value),
                num(e.raw),
                num(e.residual),
                join(&e.levels_used, ";"),
                num(sol.s),
                formula.to_string(),
                num(formula.to_f64()),
                num((e.value - sol.s).abs()),
                num((e.value - formula.to_f64()).abs()),
            ]),
            Err(msg) => {
                eprintln!("warning: {name}: {msg}");
                outcome = Outcome::Findings;
                summary.row([
                    name.clone(),
                    "nan".into(),
                    "nan".into(),
                    "nan".into(),
                    String::new(),
                    num(sol.s),
                    formula.to_string(),
                    num(formula.to_f64()),
                    "nan".into(),
                    "nan".into(),
                ]);
            }
        }
    }
    sink.emit("dimension_summary.csv", &summary.finish()).internal()?;

    if let Ok(e) = &estimates[0].1 {
        sink.emit("plot_box_count.dat", &plot_data(&e.plot)).internal()?;
    }
    if let Ok(e) = &estimates[1].1 {
        sink.emit("plot_mdp_fit.dat", &plot_data(&e.plot)).internal()?;
    }
    if holder.is_ok() {
        let mut pts = Vec::new();
        for n in 1..=depth {
            for i in 0..measure.len(n) {
                let len = arith::to_f64(&measure.interval(n, i).length());
                let m = measure.mass(n, i);
                if len > 0.0 && m > 0.0 {
                    pts.push((len.ln(), m.ln()));
                }
            }
        }
        sink.emit("plot_interval_holder.dat", &plot_data(&pts)).internal()?;
    }
    Ok(outcome)
}

// --- audit -------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FaultArg {
    FlipGapBound,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Test hook: corrupt one audited bound so the run must report it.
    #[arg(long = "inject-fault", value_enum)]
    pub inject_fault: Option<FaultArg>,
    /// Seeded words checked for `K(3Ψ) ⊂ G(Ψ) ⊂ K(Ψ/4)`.
    #[arg(long, default_value_t = 200)]
    pub inclusion_samples: usize,
}

pub fn cmd_audit(args: &AuditArgs, config: &ExperimentConfig, sink: &mut Sink) -> CmdResult {
    let seed = config.seed().usage()?;
    let measure = build_measure(config)?;
    let options = AuditOptions {
        depth: config.depth,
        node_budget: config.node_budget,
        inclusion_samples: args.inclusion_samples,
        margin: config.margin,
        seed,
        fault: args.inject_fault.map(|f| match f {
            FaultArg::FlipGapBound => Fault::FlipGapBound,
        }),
    };
    let run = full_audit(&measure, &options).usage()?;
    let mut body = String::new();
    for f in &run.findings {
        body.push_str(&f.to_json_line());
        body.push('\n');
    }
    sink.emit("findings.jsonl", &body).internal()?;
    eprintln!(
        "audit: {} nodes to depth {}, {} findings",
        run.geometry.nodes,
        run.geometry.depth,
        run.findings.len()
    );
    Ok(if run.findings.is_empty() { Outcome::Clean } else { Outcome::Findings })
}

// --- classify ----------------------------------------------------------------

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Use `Ψ(q) = q^τ` instead of the configured function.
    #[arg(long, value_parser = parse_value)]
    pub tau: Option<Rational>,
    /// Exponents in (0, 1) for the series test, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_value)]
    pub s: Vec<Rational>,
    /// Partial quotients to check for membership evidence, e.g. 1,4,2.
    #[arg(long, value_parser = parse_word)]
    pub word: Option<Quotients>,
    /// Constant C in `a_n a_{n+1} > C Ψ(q_n)`.
    #[arg(long, default_value = "1", value_parser = parse_value)]
    pub c: Rational,
}

pub fn cmd_classify(args: &ClassifyArgs, config: &ExperimentConfig, sink: &mut Sink) -> CmdResult {
    let psi: PsiSpec = match &args.tau {
        Some(t) => PsiSpec::power(t.clone()),
        None => config.psi().usage()?,
    };
    let tau = lower_order_tau(&psi);
    let mut body = Table::new(&["key", "value"]);
    body.row(["lower_order".to_string(), serde_json::to_string(&tau).internal()?.replace(',', ";")]);
    match dimension_formula(&psi) {
        Ok(v) => body.row(["dimension_formula".to_string(), v.to_string()]),
        Err(e) => body.row(["dimension_formula".to_string(), format!("undefined ({e})")]),
    }
    for s in &args.s {
        let v = series_classify(&psi, s).usage()?;
        let verdict = serde_json::to_value(v.verdict).internal()?;
        let method = serde_json::to_value(v.method).internal()?;
        body.row([
            format!("series_s={}", format_rational(s)),
            format!("{} via {}", verdict.as_str().unwrap_or("?"), method.as_str().unwrap_or("?")),
        ]);
    }
    if let Some(w) = &args.word {
        let word = CfWord::new(&w.0).usage()?;
        let e = membership_evidence(&word, &psi, &args.c);
        body.row(["word".to_string(), format!("\"{}\"", word_text(&word))]);
        body.row(["g_witnesses".to_string(), join(&e.g_witnesses, ";")]);
        body.row(["k_witnesses".to_string(), join(&e.k_witnesses, ";")]);
        body.row(["d_status".to_string(), e.d_status.to_string()]);
    }
    sink.emit("classify.csv", &body.finish()).internal()?;
    Ok(Outcome::Clean)
}

pub fn effective_precision_note(requested: u32) -> Option<String> {
    (requested > EFFECTIVE_PRECISION_BITS).then(|| {
        format!(
            "note: precision_bits = {requested} requested; masses and sums run in binary64 ({EFFECTIVE_PRECISION_BITS} bits) with compensated summation, geometry stays exact"
        )
    })
}
