//! Verbs, option parsing and dispatch.

use std::ffi::OsString;
use std::f64::consts::PI;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use nonctx_core::constructions::{
    effect_decomposition, hardy_decomposition, pbr_bound, pbr_copy_condition, pbr_pvm_canonical, pbr_pvm_search,
    product_states, thm1_support_closure, thm2_check, thm2_scenario, thm3_disjointness, thm3_overlap_fixture,
    thm3_scenario, trans_to_prep_reduction, verify_antidistinguishing, AntidistinguishingPVM, SearchOptions,
};
use nonctx_core::error::Error;
use nonctx_core::feasibility::{
    certificate_terms, hardy_table, poss_nc_feasible, possibility_table, prob_nc_feasible_deterministic, LpOptions,
    PossOptions, PossibilityTable, Status, DEFAULT_MAX_TYPES,
};
use nonctx_core::linalg::eigh;
use nonctx_core::ontomodel::{beltrametti_bugajski, epsilon_bb_model};
use nonctx_core::qcore::{bloch_state, born_probability, choi_state, rank_of, Channel, Effect};
use nonctx_core::relations::{
    check_assumption, trans_poss_op_equiv, trans_prob_op_equiv, Assumption, CheckOptions, OntKind, OpKind, Target,
};

use crate::io::{self, matrix_from_json, MatrixJson, ModelFile, ScenarioFile, TableFile};
use crate::report::{self, Report, Verdict};
use crate::CliError;

pub const MAX_TYPES_ENV: &str = "NONCTX_MAX_TYPES";

#[derive(Parser, Debug)]
#[command(name = "nonctx", version, about = "Noncontextuality checks for finite quantum scenarios and ontological models")]
pub struct Cli {
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the report to this file instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Table,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check reproduction, faithfulness and optional assumptions of a model.
    CheckModel(CheckModelArgs),
    /// List every operationally related pair and the violated ones.
    CheckAssumption(CheckAssumptionArgs),
    /// Same-kernel decomposition of two preparations or two effects.
    Decompose(DecomposeArgs),
    /// Possibilistic feasibility of the four-state scenario parametrised by phi.
    WitnessThm2(WitnessThm2Args),
    /// Overlap bound below which N-copy product states can be antidistinguished.
    Bound(BoundArgs),
    /// Antidistinguishing projective measurement for N copies of two qubit states.
    Pvm(PvmArgs),
    /// Support-disjointness chain for a faithful model of the N-copy scenario.
    #[command(name = "disjointness-thm3")]
    DisjointnessThm3(Thm3Args),
    /// Noncontextual feasibility of a possibility table or scenario.
    Feasible(FeasibleArgs),
    /// Smoothed scenario and its smoothed Beltrametti-Bugajski model.
    EpsilonModel(EpsilonArgs),
    /// The two-qubit Hardy possibility table.
    HardyTable(HardyTableArgs),
    /// Choi state of a channel, optionally compared with a second channel.
    Choi(ChoiArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TolArgs {
    /// Entrywise tolerance for operational equality.
    #[arg(long, default_value_t = 1e-9)]
    pub tol_op: f64,
    /// Relative eigenvalue tolerance for kernels.
    #[arg(long, default_value_t = 1e-9)]
    pub tol_kernel: f64,
    /// Threshold for supports, response sets and ontological equality.
    #[arg(long, default_value_t = 1e-12)]
    pub tol_ont: f64,
    /// Reproduction tolerance.
    #[arg(long, default_value_t = 1e-9)]
    pub tol_repro: f64,
    /// Do not treat coarse-grainings of equal effects as equivalent contexts.
    #[arg(long)]
    pub strict_coarse_graining: bool,
}

impl TolArgs {
    fn check_options(&self) -> CheckOptions {
        CheckOptions {
            tol_op: self.tol_op,
            tol_kernel: self.tol_kernel,
            tol_ont: self.tol_ont,
            tol_repro: self.tol_repro,
            assume_coarse_grainings_equivalent: !self.strict_coarse_graining,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CheckModelArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Assumption name, e.g. `hardy:prep`, `poss`, `eps:0.1:f=sqrt`. Repeatable.
    #[arg(long = "assumption", visible_alias = "assume")]
    pub assumptions: Vec<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub tol: TolArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CheckAssumptionArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "assume", visible_alias = "assumption", required = true)]
    pub assumptions: Vec<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub tol: TolArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(group(clap::ArgGroup::new("pair").required(true).args(["preps", "effects"])))]
pub struct DecomposeArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Two preparation ids `RHO0 RHO1`.
    #[arg(long, num_args = 2, value_names = ["RHO0", "RHO1"])]
    pub preps: Option<Vec<String>>,
    /// Two outcomes `MEAS:K MEAS:K`.
    #[arg(long, num_args = 2, value_names = ["E1", "E2"])]
    pub effects: Option<Vec<String>>,
    /// Replay the support closure for the preparation pair on this model.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub tol: TolArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct FeasibilityArgs {
    /// Possibility threshold: probabilities at most this are zero.
    #[arg(long)]
    pub tol_zero: Option<f64>,
    #[arg(long, default_value_t = 1e-9)]
    pub tol_kernel: f64,
    /// Size guard on candidate ontic-state types; overrides NONCTX_MAX_TYPES.
    #[arg(long)]
    pub max_types: Option<u128>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct WitnessThm2Args {
    /// Angle in radians, as a decimal or `pi/NN`.
    #[arg(long, value_parser = parse_angle, allow_hyphen_values = true)]
    pub phi: f64,
    /// `poss[:prep|meas|all]`, `trichotomy[:meas]` or `none`. Repeatable; default `poss:all`.
    #[arg(long = "assume", visible_alias = "assumption")]
    pub assumptions: Vec<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub feas: FeasibilityArgs,
    /// Also replay the argument on this model.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-9)]
    pub tol_repro: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(group(clap::ArgGroup::new("which").required(true).args(["n", "n_max"])))]
pub struct BoundArgs {
    #[arg(long = "N", value_parser = clap::value_parser!(u32).range(1..))]
    #[serde(rename = "N")]
    pub n: Option<u32>,
    /// Table of `N, bound, 1 - 1/(2N)` for `N = 1..=N_MAX`.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=10_000))]
    pub n_max: Option<u32>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct QubitPairArgs {
    #[arg(long = "N", default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..=5))]
    #[serde(rename = "N")]
    pub n: u32,
    /// Bloch angle of the first state.
    #[arg(long, default_value = "0", value_parser = parse_angle, allow_hyphen_values = true)]
    pub theta_a: f64,
    /// Bloch angle of the second state.
    #[arg(long, default_value = "pi/2", value_parser = parse_angle, allow_hyphen_values = true)]
    pub theta_b: f64,
    /// Use the closed-form two-copy measurement for |0>, |+>.
    #[arg(long)]
    pub canonical: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 16)]
    pub restarts: usize,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

impl QubitPairArgs {
    fn search_options(&self) -> SearchOptions {
        SearchOptions { max_iters: self.max_iters, restarts: self.restarts, seed: self.seed, tol: self.tol }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PvmArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub pair: QubitPairArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Fixture {
    /// Beltrametti-Bugajski model of the scenario.
    Bb,
    /// Faithful model whose two supports share an ontic state.
    Overlap,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Thm3Args {
    #[command(flatten)]
    #[serde(flatten)]
    pub pair: QubitPairArgs,
    /// Model file using the generated ids; overrides `--fixture`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Fixture::Bb)]
    pub fixture: Fixture,
    /// Weight on the shared ontic state of the overlap fixture.
    #[arg(long, default_value_t = 1e-10)]
    pub delta: f64,
    /// Add the joint contexts `{|nu><nu|, Pi_nu, rest}`.
    #[arg(long)]
    pub joint_contexts: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub tol: TolArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Thresholded possibility pattern.
    Poss,
    /// Exact LP over deterministic noncontextual assignments.
    Prob,
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(group(clap::ArgGroup::new("input").required(true).args(["table", "scenario"])))]
pub struct FeasibleArgs {
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Poss)]
    pub mode: Mode,
    /// Possibilistic mode: `poss[:prep|meas|all]`, `trichotomy[:meas]` or `none`.
    #[arg(long = "assume", visible_alias = "assumption")]
    pub assumptions: Vec<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub feas: FeasibilityArgs,
    /// Disable the product rule for joint outcomes.
    #[arg(long)]
    pub no_product_rule: bool,
    /// Denominator bound when rationalizing probabilities.
    #[arg(long, default_value_t = 1_000_000)]
    pub max_den: u64,
    /// Half-width of interval rows when the exact table is infeasible.
    #[arg(long, default_value_t = 1e-6)]
    pub delta: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EpsilonArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub out_scenario: Option<PathBuf>,
    #[arg(long)]
    pub out_model: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-9)]
    pub tol_repro: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct HardyTableArgs {
    /// Also write the table file here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(group(clap::ArgGroup::new("first").required(true).args(["channel", "kraus"])))]
pub struct ChoiArgs {
    /// `identity:D`, `dephasing:P` or `depolarizing:D:P`.
    #[arg(long)]
    pub channel: Option<String>,
    /// JSON file holding a list of Kraus matrices.
    #[arg(long)]
    pub kraus: Option<PathBuf>,
    #[arg(long, conflicts_with = "compare_kraus")]
    pub compare: Option<String>,
    #[arg(long)]
    pub compare_kraus: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-9)]
    pub tol_op: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub tol_kernel: f64,
}

/// Decimal radians or multiples of pi: `0.7854`, `pi`, `-pi/4`, `3pi/4`, `3*pi/4`.
pub fn parse_angle(s: &str) -> Result<f64, String> {
    let t = s.trim();
    if let Ok(x) = t.parse::<f64>() {
        return if x.is_finite() { Ok(x) } else { Err(format!("angle '{s}' is not finite")) };
    }
    let bad = || format!("angle '{s}' is neither a number nor of the form [k][*]pi[/n]");
    let (sign, body) = match t.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, t.strip_prefix('+').unwrap_or(t)),
    };
    let idx = body.find("pi").ok_or_else(bad)?;
    let coef = body[..idx].trim_end_matches('*');
    let k = if coef.is_empty() { 1.0 } else { coef.parse::<f64>().map_err(|_| bad())? };
    let rest = &body[idx + 2..];
    let den = match rest.strip_prefix('/') {
        Some(d) => d.parse::<f64>().map_err(|_| bad())?,
        None if rest.is_empty() => 1.0,
        None => return Err(bad()),
    };
    if den == 0.0 {
        return Err(bad());
    }
    Ok(sign * k * PI / den)
}

pub fn resolve_max_types(flag: Option<u128>) -> Result<u128, CliError> {
    if let Some(v) = flag {
        return Ok(v);
    }
    match std::env::var(MAX_TYPES_ENV) {
        Ok(v) => v
            .trim()
            .parse::<u128>()
            .map_err(|_| CliError::Usage(format!("{MAX_TYPES_ENV}='{v}' is not a nonnegative integer"))),
        Err(_) => Ok(DEFAULT_MAX_TYPES),
    }
}

/// Possibilistic options implied by assumption names.
pub fn poss_options_for(names: &[String], base: PossOptions) -> Result<PossOptions, CliError> {
    if names.is_empty() {
        return Ok(base);
    }
    let mut o = PossOptions { prep_nc: false, meas_nc: false, trichotomy: false, ..base };
    for name in names {
        if name == "none" {
            continue;
        }
        let a: Assumption = name.parse()?;
        match (a.op, a.ont) {
            (OpKind::Poss, OntKind::Poss) => {
                o.prep_nc |= a.targets.contains(&Target::Preparations);
                o.meas_nc |= a.targets.contains(&Target::Measurements);
            }
            (OpKind::Prob, OntKind::Trichotomy) => {
                if a.targets.contains(&Target::Preparations) && !a.targets.contains(&Target::Measurements) {
                    return Err(CliError::Usage("trichotomy constraints act on measurements".into()));
                }
                o.trichotomy = true;
            }
            _ => {
                return Err(CliError::Usage(format!(
                    "'{name}': possibilistic feasibility handles poss and trichotomy assumptions; use --mode prob for prob"
                )))
            }
        }
    }
    Ok(o)
}

fn options_value<T: Serialize>(args: &T) -> Value {
    serde_json::to_value(args).expect("options serialize")
}

fn core_input(e: Error) -> CliError {
    CliError::Input(e.to_string())
}

// ---------------------------------------------------------------------------------------------
// Commands

fn assumptions_of(names: &[String]) -> Result<Vec<Assumption>, CliError> {
    names.iter().map(|n| n.parse::<Assumption>().map_err(|e| CliError::Usage(e.to_string()))).collect()
}

fn reproduction_value(rep: &nonctx_core::ontomodel::ReproductionReport) -> Value {
    json!({
        "ok": rep.ok,
        "worst_deviation": rep.worst_deviation,
        "worst_entry": rep.worst_entry.as_ref().map(|(p, t, m, k)| json!({"prep": p, "trans": t, "meas": m, "outcome": k})),
        "entries_checked": rep.entries_checked,
    })
}

fn check_model(a: &CheckModelArgs) -> Result<Report, CliError> {
    let assumptions = assumptions_of(&a.assumptions)?;
    let scenario = io::read_scenario(&a.scenario)?;
    let model = io::read_model(&a.model)?;
    let opts = a.tol.check_options();
    let rep = model.reproduces(&scenario, opts.tol_repro).map_err(core_input)?;
    let faithful = model.is_faithful(&scenario, opts.tol_op).map_err(core_input)?;
    let mut results = Vec::new();
    let mut all_hold = true;
    if rep.ok {
        for assumption in &assumptions {
            let r = check_assumption(&model, &scenario, assumption, &opts).map_err(core_input)?;
            all_hold &= r.holds();
            results.push(report::assumption_report(&r, false));
        }
    }
    let verdict = Verdict::of(rep.ok && all_hold);
    Ok(Report::new("check-model", options_value(a), verdict)
        .with("status", if verdict == Verdict::Pass { "pass" } else { "fail" })
        .with("reproduction", reproduction_value(&rep))
        .with(
            "faithfulness",
            json!({
                "faithful": faithful.faithful,
                "offending": faithful.offending.as_ref().map(|((m1, k1), (m2, k2))| json!([format!("{m1}[{k1}]"), format!("{m2}[{k2}]")])),
            }),
        )
        .with("assumptions", Value::Array(results)))
}

fn check_assumption_cmd(a: &CheckAssumptionArgs) -> Result<Report, CliError> {
    let assumptions = assumptions_of(&a.assumptions)?;
    let scenario = io::read_scenario(&a.scenario)?;
    let model = io::read_model(&a.model)?;
    let opts = a.tol.check_options();
    let mut results = Vec::new();
    let mut all_hold = true;
    for assumption in &assumptions {
        let r = check_assumption(&model, &scenario, assumption, &opts).map_err(core_input)?;
        all_hold &= r.holds();
        results.push(report::assumption_report(&r, true));
    }
    let verdict = Verdict::of(all_hold);
    Ok(Report::new("check-assumption", options_value(a), verdict)
        .with("status", if all_hold { "pass" } else { "fail" })
        .with("assumptions", Value::Array(results)))
}

fn parse_outcome(s: &str) -> Result<(String, usize), CliError> {
    let (m, k) = s.rsplit_once(':').ok_or_else(|| CliError::Usage(format!("outcome '{s}' must be MEAS:K")))?;
    let k = k.parse().map_err(|_| CliError::Usage(format!("outcome '{s}': K must be an integer")))?;
    Ok((m.to_string(), k))
}

fn decompose(a: &DecomposeArgs) -> Result<Report, CliError> {
    let scenario = io::read_scenario(&a.scenario)?;
    let tol = a.tol.tol_kernel;
    let mut r = Report::new("decompose", options_value(a), Verdict::Pass);
    if let Some(p) = &a.preps {
        let (r0, r1) = (&scenario.prep(&p[0]).map_err(core_input)?.density, &scenario.prep(&p[1]).map_err(core_input)?.density);
        let dec = hardy_decomposition(r0, r1, tol).map_err(core_input)?;
        let s = dec.sigma0.matrix();
        let rec = s.affine(1.0 - dec.weight, r1.matrix(), dec.weight).max_abs_diff(r0.matrix());
        r.set("kind", "preparations");
        r.set(
            "decomposition",
            json!({
                "sigma0": report::matrix(s),
                "weight": dec.weight,
                "alpha0_min": dec.alpha0_min,
                "alpha1_max": dec.alpha1_max,
                "degenerate": dec.degenerate,
                "reconstruction_error": rec,
                "sigma0_min_eigenvalue": eigh(s).min_value(),
            }),
        );
        if let Some(path) = &a.model {
            let model = io::read_model(path)?;
            let rep = thm1_support_closure(&scenario, &model, Some((&p[0], &p[1])), &a.tol.check_options())
                .map_err(core_input)?;
            let pairs: Vec<Value> = rep
                .pairs
                .iter()
                .map(|c| json!({"a": c.a, "b": c.b, "equal_supports": c.equal_supports, "chain": report::facts(&c.chain)}))
                .collect();
            r.set(
                "support_closure",
                json!({
                    "premise_holds": rep.premise_holds,
                    "premise_violations": rep.premise_violations.iter().map(report::violation).collect::<Vec<_>>(),
                    "pairs": pairs,
                    "vacuous": rep.vacuous(),
                }),
            );
            r.verdict = Verdict::of(rep.passed());
        }
    } else if let Some(e) = &a.effects {
        if a.model.is_some() {
            return Err(CliError::Usage("--model applies to --preps only".into()));
        }
        let effect = |s: &str| -> Result<Effect, CliError> {
            let (m, k) = parse_outcome(s)?;
            let meas = &scenario.measurement(&m).map_err(core_input)?.measurement;
            meas.effect(k).cloned().ok_or_else(|| CliError::Input(format!("measurement '{m}' has no outcome {k}")))
        };
        let (e1, e2) = (effect(&e[0])?, effect(&e[1])?);
        let dec = effect_decomposition(&e1, &e2, tol).map_err(core_input)?;
        let rec = e2.matrix().affine(dec.a, dec.e3.matrix(), 1.0 - dec.a).max_abs_diff(e1.matrix());
        r.set("kind", "effects");
        r.set(
            "decomposition",
            json!({"a": dec.a, "e3": report::matrix(dec.e3.matrix()), "degenerate": dec.degenerate, "reconstruction_error": rec}),
        );
    }
    let status = if r.verdict == Verdict::Pass { "pass" } else { "fail" };
    Ok(r.with("status", status))
}

fn poss_report(
    command: &str,
    options: Value,
    table: &PossibilityTable,
    opts: &PossOptions,
) -> Result<Report, CliError> {
    let res = poss_nc_feasible(table, opts)?;
    let verdict = Verdict::of(res.status == Status::Sat);
    let zeros: Vec<Value> =
        table.impossible_entries().iter().map(|(p, m, k)| json!({"prep": p, "meas": m, "outcome": k})).collect();
    let mut r = Report::new(command, options, verdict)
        .with("status", res.status.name())
        .with("options_used", {
            let mut o = report::poss_options(opts);
            o["tol_zero"] = json!(table.tol_zero);
            o
        })
        .with("impossible_entries", Value::Array(zeros))
        .with("prep_classes", json!(table.prep_classes));
    if let Some(m) = &res.model {
        r.set("model", report::poss_model(m));
    }
    if let Some(c) = &res.certificate {
        let replay = c.replay(table, opts)?;
        r.set("certificate", report::conflict(c, Some(replay)));
    }
    Ok(r)
}

fn size_guard(e: CliError) -> CliError {
    match e {
        CliError::Core(Error::SearchTooLarge { count, limit }) => CliError::Input(format!(
            "search space too large: {count} candidate types exceeds {limit}; raise --max-types or {MAX_TYPES_ENV}"
        )),
        other => other,
    }
}

fn witness_thm2(a: &WitnessThm2Args) -> Result<Report, CliError> {
    let max_types = resolve_max_types(a.feas.max_types)?;
    let opts = poss_options_for(&a.assumptions, PossOptions { max_types, ..PossOptions::default() })?;
    let scenario = thm2_scenario(a.phi).map_err(core_input)?;
    let tol_zero = a.feas.tol_zero.unwrap_or(1e-9);
    let table = possibility_table(&scenario, tol_zero, a.feas.tol_kernel)?;
    let mut options = options_value(a);
    options["max_types"] = json!(max_types.to_string());
    options["tol_zero"] = json!(tol_zero);
    let mut r = poss_report("witness-thm2", options, &table, &opts).map_err(size_guard)?.with("phi", a.phi);
    if let Some(path) = &a.model {
        let model = io::read_model(path)?;
        let rep = thm2_check(&model, a.phi, a.tol_repro).map_err(core_input)?;
        let ((p, m, k), prob) = &rep.failing_probability;
        r.set(
            "model_check",
            json!({
                "failed_step": format!("{:?}", rep.failed_step),
                "model_is_contextual": rep.model_is_contextual(),
                "witness": rep.witness,
                "chain": report::facts(&rep.chain),
                "failing_probability": {"prep": p, "meas": m, "outcome": k, "value": prob},
            }),
        );
    }
    Ok(r)
}

/// Rows `(N, pbr_bound(N), 1 - 1/(2N))` for `N = 1..=n_max`.
pub fn emit_bound_table(n_max: u32) -> Vec<(u32, f64, f64)> {
    (1..=n_max).map(|n| (n, pbr_bound(n), 1.0 - 1.0 / (2.0 * n as f64))).collect()
}

fn bound(a: &BoundArgs) -> Result<Report, CliError> {
    let mut r = Report::new("bound", options_value(a), Verdict::Pass);
    if let Some(n) = a.n {
        r.set("N", n);
        r.set("bound", pbr_bound(n));
        r.set("copy_condition", pbr_copy_condition(n));
        r.set("asymptote", 1.0 - 1.0 / (2.0 * n as f64));
    }
    if let Some(n_max) = a.n_max {
        let rows: Vec<Value> = emit_bound_table(n_max)
            .into_iter()
            .map(|(n, b, c)| json!({"N": n, "bound": b, "one_minus_half_over_N": c}))
            .collect();
        r.set("rows", Value::Array(rows));
    }
    Ok(r)
}

fn qubit_pair(p: &QubitPairArgs) -> (Vec<nonctx_core::linalg::C64>, Vec<nonctx_core::linalg::C64>) {
    (bloch_state(p.theta_a), bloch_state(p.theta_b))
}

fn build_pvm(p: &QubitPairArgs) -> Result<Result<AntidistinguishingPVM, Error>, CliError> {
    if p.canonical {
        if p.n != 2 || p.theta_a != 0.0 || (p.theta_b - PI / 2.0).abs() > 1e-15 {
            return Err(CliError::Usage("--canonical is the N = 2 measurement for |0>, |+>".into()));
        }
        return Ok(Ok(pbr_pvm_canonical()));
    }
    let (a, b) = qubit_pair(p);
    match pbr_pvm_search(&a, &b, p.n as usize, &p.search_options()) {
        Err(e @ Error::NotFound { .. }) => Ok(Err(e)),
        other => other.map(Ok).map_err(core_input),
    }
}

fn pvm_value(pvm: &AntidistinguishingPVM, states: &[Vec<nonctx_core::linalg::C64>]) -> Result<Value, CliError> {
    let n = pvm.n;
    let mut worst = 0.0f64;
    let mut rows = Vec::new();
    for (nu, (v, state)) in pvm.vectors().iter().zip(states).enumerate() {
        let p = born_probability(&nonctx_core::qcore::DensityMatrix::pure(state)?, &Effect::projector(v)?)?;
        worst = worst.max(p);
        rows.push(json!({"nu": nonctx_core::constructions::pbr::nu_label(nu, n), "vector": serde_json::to_value(io::vector_to_json(v)).unwrap(), "p_nu_given_nu": p}));
    }
    Ok(json!({"N": n, "dim": pvm.dim(), "projectors": rows, "max_p_nu_given_nu": worst}))
}

fn pvm(a: &PvmArgs) -> Result<Report, CliError> {
    let p = &a.pair;
    let (sa, sb) = qubit_pair(p);
    let overlap = nonctx_core::qcore::squared_overlap(&sa, &sb);
    let mut r = Report::new("pvm", options_value(a), Verdict::Pass)
        .with("overlap", overlap)
        .with("copy_condition", pbr_copy_condition(p.n))
        .with("bound", pbr_bound(p.n));
    match build_pvm(p)? {
        Ok(pvm) => {
            let states = product_states(&sa, &sb, p.n as usize);
            let ok = verify_antidistinguishing(&pvm, &states, p.tol);
            r.verdict = Verdict::of(ok);
            r.set("status", if ok { "found" } else { "failed_verification" });
            r.set("verified", ok);
            r.set("pvm", pvm_value(&pvm, &states)?);
        }
        Err(e) => {
            r.verdict = Verdict::Fail;
            r.set("status", "not_found");
            r.set("reason", e.to_string());
        }
    }
    Ok(r)
}

fn thm3(a: &Thm3Args) -> Result<Report, CliError> {
    let p = &a.pair;
    let pvm = match build_pvm(p)? {
        Ok(pvm) => pvm,
        Err(e) => return Err(CliError::Input(format!("no antidistinguishing measurement: {e}"))),
    };
    let (sa, sb) = qubit_pair(p);
    let (scenario, layout) = thm3_scenario(&sa, &sb, &pvm, a.joint_contexts).map_err(core_input)?;
    let (model, source) = match &a.model {
        Some(path) => (io::read_model(path)?, "file"),
        None => match a.fixture {
            Fixture::Bb => (beltrametti_bugajski(&scenario)?, "bb"),
            Fixture::Overlap => (thm3_overlap_fixture(&scenario, &layout, a.delta)?, "overlap"),
        },
    };
    let rep = thm3_disjointness(&model, &scenario, &layout, &a.tol.check_options()).map_err(core_input)?;
    let ok = rep.disjoint() || !rep.in_scope;
    Ok(Report::new("disjointness-thm3", options_value(a), Verdict::of(ok))
        .with("status", if ok { "pass" } else { "fail" })
        .with("model_source", source)
        .with("overlap", rep.overlap)
        .with("bound", rep.bound)
        .with("in_scope", rep.in_scope)
        .with("disjoint", rep.disjoint())
        .with("intersection", json!(rep.intersection))
        .with("chain", report::facts(&rep.chain))
        .with("contradiction", rep.contradiction.as_ref().map(|(l, nu)| json!({"lambda": l, "nu": nu})))
        .with(
            "layout",
            json!({"psi1": layout.psi1, "psi2": layout.psi2, "nu_measurements": layout.nu_measurements, "pvm": layout.pvm_measurement, "contexts": layout.contexts}),
        ))
}

fn feasible(a: &FeasibleArgs) -> Result<Report, CliError> {
    let max_types = resolve_max_types(a.feas.max_types)?;
    let mut options = options_value(a);
    options["max_types"] = json!(max_types.to_string());
    match a.mode {
        Mode::Poss => {
            let (table, file_opts) = match (&a.table, &a.scenario) {
                (Some(path), _) => {
                    let (mut t, o) = io::read_table(path)?;
                    if let Some(z) = a.feas.tol_zero {
                        t.tol_zero = z;
                    }
                    (t, o)
                }
                (None, Some(path)) => {
                    let s = io::read_scenario(path)?;
                    (possibility_table(&s, a.feas.tol_zero.unwrap_or(1e-9), a.feas.tol_kernel).map_err(core_input)?, Default::default())
                }
                (None, None) => unreachable!("clap requires an input"),
            };
            let mut base = PossOptions { max_types, ..PossOptions::default() };
            file_opts.apply(&mut base);
            if a.no_product_rule {
                base.product_rule = false;
            }
            let opts = poss_options_for(&a.assumptions, base)?;
            options["tol_zero"] = json!(table.tol_zero);
            poss_report("feasible", options, &table, &opts).map_err(size_guard)
        }
        Mode::Prob => {
            let path = a.scenario.as_ref().ok_or_else(|| CliError::Usage("--mode prob needs --scenario".into()))?;
            for name in &a.assumptions {
                let asm: Assumption = name.parse()?;
                if (asm.op, asm.ont) != (OpKind::Prob, OntKind::Prob) {
                    return Err(CliError::Usage(format!("'{name}': --mode prob decides prob assumptions only")));
                }
            }
            let s = io::read_scenario(path)?;
            let lp = LpOptions { max_den: a.max_den, delta: a.delta, tol_equal: 1e-9, max_types };
            let res = prob_nc_feasible_deterministic(&s, &lp).map_err(|e| size_guard(CliError::Core(e)))?;
            let verdict = Verdict::of(res.status == Status::Sat);
            let mut r = Report::new("feasible", options, verdict)
                .with("status", res.status.name())
                .with(
                    "options_used",
                    json!({"max_den": lp.max_den, "delta": lp.delta, "tol_equal": lp.tol_equal, "max_types": lp.max_types.to_string()}),
                )
                .with("units", json!(res.units))
                .with("assignments", res.assignments.len())
                .with("used_interval_rows", res.used_interval_rows)
                .with("rationalization_error", res.rationalization_error);
            if let Some(weights) = &res.weights {
                let mut w = Map::new();
                for (prep, ws) in weights {
                    let entries: Vec<Value> = ws
                        .iter()
                        .zip(&res.assignments)
                        .filter(|(x, _)| !num_traits::Zero::is_zero(*x))
                        .map(|(x, asg)| {
                            let label: Vec<String> =
                                res.units.iter().zip(&asg.outcomes).map(|(u, o)| format!("{u}={o}")).collect();
                            json!({"assignment": label.join(" "), "weight": x.to_string()})
                        })
                        .collect();
                    w.insert(prep.clone(), Value::Array(entries));
                }
                r.set("weights", Value::Object(w));
            }
            if let Some(c) = &res.certificate {
                let terms: Vec<Value> =
                    certificate_terms(&res).into_iter().map(|(row, y)| json!({"row": row, "multiplier": y})).collect();
                r.set(
                    "certificate",
                    json!({"verified": c.verify(&res.system), "value": c.value(&res.system).to_string(), "terms": terms}),
                );
            }
            Ok(r)
        }
    }
}

fn epsilon_model(a: &EpsilonArgs) -> Result<Report, CliError> {
    let s = io::read_scenario(&a.scenario)?;
    let (smoothed, model) = epsilon_bb_model(&s, a.eps).map_err(core_input)?;
    let rep = model.reproduces(&smoothed, a.tol_repro)?;
    let mut dev = 0.0f64;
    for row in s.rows() {
        for (k, p) in row.probs.iter().enumerate() {
            dev = dev.max((model.predict(&row.prep, row.trans.as_deref(), &row.meas, k)? - p).abs());
        }
    }
    let sf = ScenarioFile::from_scenario(&smoothed);
    let mf = ModelFile::from_model(&model);
    if let Some(p) = &a.out_scenario {
        io::write_json(p, &sf)?;
    }
    if let Some(p) = &a.out_model {
        io::write_json(p, &mf)?;
    }
    Ok(Report::new("epsilon-model", options_value(a), Verdict::of(rep.ok))
        .with("status", if rep.ok { "built" } else { "fail" })
        .with("lambda_size", model.size())
        .with("smoothed_deviation", rep.worst_deviation)
        .with("unsmoothed_deviation", dev)
        .with("scenario", serde_json::to_value(&sf).expect("scenario"))
        .with("model", serde_json::to_value(&mf).expect("model")))
}

fn hardy_table_cmd(a: &HardyTableArgs) -> Result<Report, CliError> {
    let t = hardy_table()?;
    let file = TableFile::from_table(&t);
    if let Some(p) = &a.out {
        io::write_json(p, &file)?;
    }
    let res = poss_nc_feasible(&t, &PossOptions::default())?;
    let zeros: Vec<Value> =
        t.impossible_entries().iter().map(|(p, m, k)| json!({"prep": p, "meas": m, "outcome": k})).collect();
    Ok(Report::new("hardy-table", options_value(a), Verdict::Pass)
        .with("status", "built")
        .with("table", serde_json::to_value(&file).expect("table"))
        .with("impossible_entries", Value::Array(zeros))
        .with("feasibility", res.status.name()))
}

fn channel_of(spec: Option<&String>, kraus: Option<&PathBuf>) -> Result<Channel, CliError> {
    if let Some(path) = kraus {
        let ms: Vec<MatrixJson> = io::read_json(path)?;
        let ks = ms.iter().enumerate().map(|(i, m)| matrix_from_json(m, &format!("Kraus operator {i}"))).collect::<Result<Vec<_>, _>>()?;
        return Channel::new(ks).map_err(|e| CliError::Input(format!("{}: {e}", path.display())));
    }
    let s = spec.ok_or_else(|| CliError::Usage("no channel given".into()))?;
    let parts: Vec<&str> = s.split(':').collect();
    let num = |x: &str| x.parse::<f64>().map_err(|_| CliError::Usage(format!("channel '{s}': '{x}' is not a number")));
    let dim = |x: &str| x.parse::<usize>().map_err(|_| CliError::Usage(format!("channel '{s}': '{x}' is not a dimension")));
    let ch = match parts.as_slice() {
        ["identity", d] => Channel::identity(dim(d)?),
        ["dephasing", p] => Channel::dephasing(num(p)?),
        ["depolarizing", d, p] => Channel::depolarizing(dim(d)?, num(p)?),
        _ => return Err(CliError::Usage(format!("channel '{s}': expected identity:D, dephasing:P or depolarizing:D:P"))),
    };
    ch.map_err(core_input)
}

fn choi(a: &ChoiArgs) -> Result<Report, CliError> {
    let ch = channel_of(a.channel.as_ref(), a.kraus.as_ref())?;
    let j = choi_state(&ch)?;
    let mut r = Report::new("choi", options_value(a), Verdict::Pass)
        .with("status", "built")
        .with("d_in", ch.d_in())
        .with("d_out", ch.d_out())
        .with("choi", report::matrix(j.matrix()))
        .with("rank", rank_of(j.matrix(), a.tol_kernel));
    if a.compare.is_some() || a.compare_kraus.is_some() {
        let other = channel_of(a.compare.as_ref(), a.compare_kraus.as_ref())?;
        let poss = trans_poss_op_equiv(&ch, &other, a.tol_kernel);
        let red = trans_to_prep_reduction(&ch, &other, a.tol_kernel).map_err(core_input)?;
        r.set(
            "comparison",
            json!({
                "prob_equivalent": trans_prob_op_equiv(&ch, &other, a.tol_op),
                "poss_equivalent": poss,
                "reduction_equivalent": red.equivalent,
                "other_choi": report::matrix(choi_state(&other)?.matrix()),
            }),
        );
        r.verdict = Verdict::of(poss);
        r.set("status", if poss { "equivalent" } else { "inequivalent" });
    }
    Ok(r)
}

// ---------------------------------------------------------------------------------------------
// Entry point

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub code: u8,
    pub stdout: String,
    pub stderr: String,
}

pub fn dispatch(command: &Command) -> Result<Report, CliError> {
    match command {
        Command::CheckModel(a) => check_model(a),
        Command::CheckAssumption(a) => check_assumption_cmd(a),
        Command::Decompose(a) => decompose(a),
        Command::WitnessThm2(a) => witness_thm2(a),
        Command::Bound(a) => bound(a),
        Command::Pvm(a) => pvm(a),
        Command::DisjointnessThm3(a) => thm3(a),
        Command::Feasible(a) => feasible(a),
        Command::EpsilonModel(a) => epsilon_model(a),
        Command::HardyTable(a) => hardy_table_cmd(a),
        Command::Choi(a) => choi(a),
    }
}

pub fn run<I, T>(args: I) -> Output
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    Output { code: 0, stdout: text, stderr: String::new() }
                }
                _ => Output { code: 2, stdout: String::new(), stderr: text },
            };
        }
    };
    match dispatch(&cli.command) {
        Ok(mut report) => {
            if let Value::Object(m) = &mut report.options {
                m.insert("format".into(), json!(cli.format));
            }
            let text = match cli.format {
                Format::Json => report.to_json(),
                Format::Table => report.to_table(),
            };
            let code = report.verdict.exit_code();
            match &cli.output {
                Some(path) => match std::fs::write(path, &text) {
                    Ok(()) => Output { code, stdout: String::new(), stderr: String::new() },
                    Err(e) => Output { code: 2, stdout: String::new(), stderr: format!("error: io: {}: {e}\n", path.display()) },
                },
                None => Output { code, stdout: text, stderr: String::new() },
            }
        }
        Err(e) => Output { code: 2, stdout: String::new(), stderr: format!("error: {e}\n") },
    }
}
