//! Operational and ontological relations, and the checker for assumptions of the form
//! "operationally related procedures have ontologically related representations".
//!
//! An [`Assumption`] pairs an operational relation with an ontological one and names the kinds
//! of procedure it quantifies over. The usual ones:
//!
//! | name         | operational | ontological  |
//! |--------------|-------------|--------------|
//! | `prob`       | Prob        | Prob         |
//! | `poss`       | Poss        | Poss         |
//! | `hardy`      | Prob        | Poss         |
//! | `trichotomy` | Prob        | Trichotomy   |
//! | `eps:<e>`    | Eps(e)      | EpsF(f)      |
//!
//! Procedures are compared by declared id, so two recipes for the same density matrix form a
//! related pair even though the matrices coincide.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::ontomodel::{
    response_sets, support_of, transformation_support, OntologicalModel, PreparationMeasure, ResponseFunction,
    Scenario, TransformationKernel, SUPPORT_THRESHOLD,
};
use crate::qcore::{self, Channel, DensityMatrix, Effect};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OpKind {
    Prob,
    Poss,
    /// Trace-norm distance at most the given value.
    Eps(f64),
}

/// Bound `f(eps)` on the L1 distance of preparation measures.
#[derive(Clone, Copy, Debug)]
pub enum EpsFn {
    Identity,
    Sqrt,
    Custom(fn(f64) -> f64),
}

impl EpsFn {
    pub fn apply(&self, eps: f64) -> f64 {
        match self {
            EpsFn::Identity => eps,
            EpsFn::Sqrt => libm::sqrt(eps),
            EpsFn::Custom(f) => f(eps),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EpsFn::Identity => "id",
            EpsFn::Sqrt => "sqrt",
            EpsFn::Custom(_) => "custom",
        }
    }
}

impl PartialEq for EpsFn {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (EpsFn::Identity, EpsFn::Identity) | (EpsFn::Sqrt, EpsFn::Sqrt) => true,
            (EpsFn::Custom(a), EpsFn::Custom(b)) => core::ptr::fn_addr_eq(*a, *b),
            _ => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OntKind {
    Prob,
    Poss,
    Trichotomy,
    EpsF(EpsFn),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Target {
    Preparations,
    Measurements,
    Transformations,
}

impl Target {
    pub const ALL: [Target; 3] = [Target::Preparations, Target::Measurements, Target::Transformations];

    pub fn suffix(&self) -> &'static str {
        match self {
            Target::Preparations => "prep",
            Target::Measurements => "meas",
            Target::Transformations => "trans",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Assumption {
    pub op: OpKind,
    pub ont: OntKind,
    pub targets: Vec<Target>,
}

impl Assumption {
    pub fn new(op: OpKind, ont: OntKind, targets: &[Target]) -> Result<Self> {
        if let OpKind::Eps(e) = op {
            if e.is_nan() || e < 0.0 {
                return Err(Error::InvalidArgument(format!("eps must be nonnegative, got {e}")));
            }
            if targets.iter().any(|t| *t != Target::Preparations) {
                return Err(Error::Unsupported("eps relations are defined for preparations only".into()));
            }
        }
        if matches!(ont, OntKind::EpsF(_)) != matches!(op, OpKind::Eps(_)) {
            return Err(Error::InvalidArgument("eps relations must be paired with each other".into()));
        }
        if targets.is_empty() {
            return Err(Error::InvalidArgument("assumption needs at least one target".into()));
        }
        let mut targets = targets.to_vec();
        targets.sort();
        targets.dedup();
        Ok(Self { op, ont, targets })
    }

    pub fn prob(targets: &[Target]) -> Self {
        Self::new(OpKind::Prob, OntKind::Prob, targets).expect("valid")
    }

    pub fn poss(targets: &[Target]) -> Self {
        Self::new(OpKind::Poss, OntKind::Poss, targets).expect("valid")
    }

    pub fn hardy(targets: &[Target]) -> Self {
        Self::new(OpKind::Prob, OntKind::Poss, targets).expect("valid")
    }

    pub fn trichotomy(targets: &[Target]) -> Self {
        Self::new(OpKind::Prob, OntKind::Trichotomy, targets).expect("valid")
    }

    fn base_name(&self) -> String {
        match (self.op, self.ont) {
            (OpKind::Prob, OntKind::Prob) => "prob".into(),
            (OpKind::Poss, OntKind::Poss) => "poss".into(),
            (OpKind::Prob, OntKind::Poss) => "hardy".into(),
            (OpKind::Prob, OntKind::Trichotomy) => "trichotomy".into(),
            (OpKind::Eps(e), OntKind::EpsF(f)) => format!("eps:{e}:f={}", f.name()),
            (op, ont) => format!("{op:?}/{ont:?}"),
        }
    }
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = if self.targets.len() == 3 {
            "all".to_string()
        } else {
            self.targets.iter().map(|t| t.suffix()).collect::<Vec<_>>().join("+")
        };
        write!(f, "{}:{}", self.base_name(), t)
    }
}

impl FromStr for Assumption {
    type Err = Error;

    /// `name[:target]` with `name` one of `prob`, `poss`, `hardy`, `trichotomy`, or
    /// `eps:<value>[:f=id|sqrt]`, and target `prep`, `meas`, `trans` or `all` (the default,
    /// except for `eps`, which only applies to preparations).
    fn from_str(s: &str) -> Result<Self> {
        let mut parts: Vec<&str> = s.trim().split(':').collect();
        let bad = |why: &str| Error::Parse(format!("assumption '{s}': {why}"));
        let name = parts.remove(0);
        let (op, ont) = match name {
            "prob" => (OpKind::Prob, OntKind::Prob),
            "poss" => (OpKind::Poss, OntKind::Poss),
            "hardy" => (OpKind::Prob, OntKind::Poss),
            "trichotomy" => (OpKind::Prob, OntKind::Trichotomy),
            "eps" => {
                if parts.is_empty() {
                    return Err(bad("missing eps value"));
                }
                let v: f64 = parts.remove(0).parse().map_err(|_| bad("eps value is not a number"))?;
                let mut f = EpsFn::Identity;
                if let Some(p) = parts.first() {
                    if let Some(name) = p.strip_prefix("f=") {
                        f = match name {
                            "id" => EpsFn::Identity,
                            "sqrt" => EpsFn::Sqrt,
                            _ => return Err(bad("f must be id or sqrt")),
                        };
                        parts.remove(0);
                    }
                }
                (OpKind::Eps(v), OntKind::EpsF(f))
            }
            _ => return Err(bad("unknown assumption name")),
        };
        let targets = match parts.as_slice() {
            [] | ["all"] if matches!(op, OpKind::Eps(_)) => vec![Target::Preparations],
            [] | ["all"] => Target::ALL.to_vec(),
            ["prep"] => vec![Target::Preparations],
            ["meas"] => vec![Target::Measurements],
            ["trans"] => vec![Target::Transformations],
            _ => return Err(bad("target must be prep, meas, trans or all")),
        };
        Assumption::new(op, ont, &targets)
    }
}

// ---------------------------------------------------------------------------------------------
// Operational relations

/// Density matrices equal entrywise within `tol`.
pub fn prob_op_equiv(a: &DensityMatrix, b: &DensityMatrix, tol: f64) -> bool {
    a.dim() == b.dim() && a.matrix().max_abs_diff(b.matrix()) <= tol
}

/// Equal kernels: the same outcomes of every measurement have zero probability.
pub fn poss_op_equiv(a: &DensityMatrix, b: &DensityMatrix, tol_kernel: f64) -> bool {
    a.dim() == b.dim() && qcore::same_kernel(a, b, tol_kernel).unwrap_or(false)
}

/// Trace-norm distance at most `eps`, boundary included.
pub fn eps_op_related(a: &DensityMatrix, b: &DensityMatrix, eps: f64) -> bool {
    const SLACK: f64 = 1e-12;
    match qcore::trace_distance(a, b) {
        Ok(d) => d <= eps + SLACK,
        Err(_) => false,
    }
}

pub fn meas_prob_op_equiv(a: &Effect, b: &Effect, tol: f64) -> bool {
    a.dim() == b.dim() && a.matrix().max_abs_diff(b.matrix()) <= tol
}

pub fn meas_poss_op_equiv(a: &Effect, b: &Effect, tol_kernel: f64) -> bool {
    a.dim() == b.dim() && qcore::same_kernel(a, b, tol_kernel).unwrap_or(false)
}

/// Equal Choi states.
pub fn trans_prob_op_equiv(a: &Channel, b: &Channel, tol: f64) -> bool {
    match (qcore::choi_state(a), qcore::choi_state(b)) {
        (Ok(x), Ok(y)) => prob_op_equiv(&x, &y, tol),
        _ => false,
    }
}

/// Equal Choi kernels.
pub fn trans_poss_op_equiv(a: &Channel, b: &Channel, tol_kernel: f64) -> bool {
    match (qcore::choi_state(a), qcore::choi_state(b)) {
        (Ok(x), Ok(y)) => poss_op_equiv(&x, &y, tol_kernel),
        _ => false,
    }
}

// ---------------------------------------------------------------------------------------------
// Ontological relations

fn first_difference(a: &[f64], b: &[f64], tol: f64) -> Option<usize> {
    if a.len() != b.len() {
        return Some(a.len().min(b.len()));
    }
    a.iter().zip(b).position(|(x, y)| (x - y).abs() > tol)
}

pub fn prob_ont_equiv(a: &PreparationMeasure, b: &PreparationMeasure, tol: f64) -> bool {
    first_difference(a.weights(), b.weights(), tol).is_none()
}

pub fn poss_ont_equiv(a: &PreparationMeasure, b: &PreparationMeasure, threshold: f64) -> bool {
    support_of(a, threshold) == support_of(b, threshold)
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn eps_ont_related(a: &PreparationMeasure, b: &PreparationMeasure, eps: f64, f: EpsFn) -> bool {
    const SLACK: f64 = 1e-12;
    a.len() == b.len() && l1_distance(a.weights(), b.weights()) <= f.apply(eps) + SLACK
}

pub fn meas_prob_ont_equiv(a: &[f64], b: &[f64], tol: f64) -> bool {
    first_difference(a, b, tol).is_none()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Trichotomy {
    Impossible,
    Possible,
    Certain,
}

impl Trichotomy {
    pub fn of(x: f64, tol: f64) -> Self {
        if x <= tol {
            Trichotomy::Impossible
        } else if x >= 1.0 - tol {
            Trichotomy::Certain
        } else {
            Trichotomy::Possible
        }
    }

    /// The symbols 0, 1/2 and 1.
    pub fn value(&self) -> f64 {
        match self {
            Trichotomy::Impossible => 0.0,
            Trichotomy::Possible => 0.5,
            Trichotomy::Certain => 1.0,
        }
    }
}

pub fn trichotomy_class(xi: &ResponseFunction, k: usize, lambda: usize, tol: f64) -> Trichotomy {
    Trichotomy::of(xi.value(k, lambda), tol)
}

fn trichotomy_difference(a: &[f64], b: &[f64], tol: f64) -> Option<usize> {
    a.iter().zip(b).position(|(&x, &y)| Trichotomy::of(x, tol) != Trichotomy::of(y, tol))
}

// ---------------------------------------------------------------------------------------------
// Assumption checker

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOptions {
    /// Entrywise tolerance for operational matrix equality.
    pub tol_op: f64,
    pub tol_kernel: f64,
    /// Threshold for ontological comparisons, supports and response sets.
    pub tol_ont: f64,
    pub tol_repro: f64,
    pub assume_coarse_grainings_equivalent: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            tol_op: 1e-9,
            tol_kernel: 1e-9,
            tol_ont: SUPPORT_THRESHOLD,
            tol_repro: 1e-9,
            assume_coarse_grainings_equivalent: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ElementRef {
    Prep(String),
    Outcome(String, usize),
    Trans(String),
}

impl fmt::Display for ElementRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElementRef::Prep(id) | ElementRef::Trans(id) => write!(f, "{id}"),
            ElementRef::Outcome(m, k) => write!(f, "{m}[{k}]"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Witness {
    /// Ontic state at which the two representations disagree.
    Lambda { index: usize, label: String },
    /// Transition `source -> target` on which two kernels disagree.
    Transition { source: usize, target: usize },
    Distance { value: f64, bound: f64 },
    /// Certainty sets differ although coarse-grainings are taken as equivalent.
    CertaintySet { index: usize, label: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub pair: (ElementRef, ElementRef),
    pub witness: Witness,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionReport {
    pub assumption: Assumption,
    pub examined: Vec<(ElementRef, ElementRef)>,
    pub violations: Vec<Violation>,
}

impl AssumptionReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

fn lambda_witness(model: &OntologicalModel, index: usize) -> Witness {
    Witness::Lambda { index, label: model.space.labels()[index].clone() }
}

fn support_difference(a: &[f64], b: &[f64], threshold: f64) -> Option<usize> {
    a.iter().zip(b).position(|(&x, &y)| (x > threshold) != (y > threshold))
}

/// Enumerates every operationally related pair of the assumption's targets and records those
/// whose ontological representations are not related.
///
/// Refuses models that do not reproduce the scenario.
pub fn check_assumption(
    model: &OntologicalModel,
    scenario: &Scenario,
    assumption: &Assumption,
    opts: &CheckOptions,
) -> Result<AssumptionReport> {
    let rep = model.reproduces(scenario, opts.tol_repro)?;
    if !rep.ok {
        return Err(Error::NotReproducing(format!(
            "worst deviation {} at {:?}",
            rep.worst_deviation, rep.worst_entry
        )));
    }
    let mut report = AssumptionReport { assumption: assumption.clone(), examined: Vec::new(), violations: Vec::new() };
    for target in &assumption.targets {
        match target {
            Target::Preparations => check_preparations(model, scenario, assumption, opts, &mut report)?,
            Target::Measurements => check_measurements(model, scenario, assumption, opts, &mut report)?,
            Target::Transformations => check_transformations(model, scenario, assumption, opts, &mut report)?,
        }
    }
    Ok(report)
}

fn check_preparations(
    model: &OntologicalModel,
    scenario: &Scenario,
    a: &Assumption,
    opts: &CheckOptions,
    report: &mut AssumptionReport,
) -> Result<()> {
    let preps = scenario.preparations();
    for i in 0..preps.len() {
        for j in i + 1..preps.len() {
            let (p, q) = (&preps[i], &preps[j]);
            let related = match a.op {
                OpKind::Prob => prob_op_equiv(&p.density, &q.density, opts.tol_op),
                OpKind::Poss => poss_op_equiv(&p.density, &q.density, opts.tol_kernel),
                OpKind::Eps(e) => eps_op_related(&p.density, &q.density, e),
            };
            if !related {
                continue;
            }
            let pair = (ElementRef::Prep(p.id.clone()), ElementRef::Prep(q.id.clone()));
            report.examined.push(pair.clone());
            let (mu, nu) = (model.prep(&p.id)?, model.prep(&q.id)?);
            let (wa, wb) = (mu.weights(), nu.weights());
            let witness = match a.ont {
                OntKind::Prob => first_difference(wa, wb, opts.tol_ont).map(|l| lambda_witness(model, l)),
                OntKind::Poss => support_difference(wa, wb, opts.tol_ont).map(|l| lambda_witness(model, l)),
                OntKind::Trichotomy => trichotomy_difference(wa, wb, opts.tol_ont).map(|l| lambda_witness(model, l)),
                OntKind::EpsF(f) => {
                    let e = match a.op {
                        OpKind::Eps(e) => e,
                        _ => 0.0,
                    };
                    if eps_ont_related(mu, nu, e, f) {
                        None
                    } else {
                        Some(Witness::Distance { value: l1_distance(wa, wb), bound: f.apply(e) })
                    }
                }
            };
            if let Some(witness) = witness {
                report.violations.push(Violation { pair, witness });
            }
        }
    }
    Ok(())
}

fn check_measurements(
    model: &OntologicalModel,
    scenario: &Scenario,
    a: &Assumption,
    opts: &CheckOptions,
    report: &mut AssumptionReport,
) -> Result<()> {
    let mut outcomes: Vec<(String, usize, &Effect, &ResponseFunction)> = Vec::new();
    for m in scenario.measurements() {
        let xi = model.response(&m.id)?;
        for (k, e) in m.measurement.effects().iter().enumerate() {
            outcomes.push((m.id.clone(), k, e, xi));
        }
    }
    for i in 0..outcomes.len() {
        for j in i + 1..outcomes.len() {
            let (x, y) = (&outcomes[i], &outcomes[j]);
            let equal_effects = meas_prob_op_equiv(x.2, y.2, opts.tol_op);
            let related = match a.op {
                OpKind::Prob => equal_effects,
                OpKind::Poss => meas_poss_op_equiv(x.2, y.2, opts.tol_kernel),
                OpKind::Eps(_) => return Err(Error::Unsupported("eps relations are defined for preparations only".into())),
            };
            if !related {
                continue;
            }
            let pair = (ElementRef::Outcome(x.0.clone(), x.1), ElementRef::Outcome(y.0.clone(), y.1));
            report.examined.push(pair.clone());
            let (ca, cb) = (x.3.column(x.1), y.3.column(y.1));
            let witness = match a.ont {
                OntKind::Prob => first_difference(&ca, &cb, opts.tol_ont).map(|l| lambda_witness(model, l)),
                OntKind::Trichotomy => trichotomy_difference(&ca, &cb, opts.tol_ont).map(|l| lambda_witness(model, l)),
                OntKind::Poss => {
                    let (ra, ta) = response_sets(x.3, x.1, opts.tol_ont);
                    let (rb, tb) = response_sets(y.3, y.1, opts.tol_ont);
                    let t_diff = (0..model.size()).find(|&l| ta.contains(l) != tb.contains(l));
                    match t_diff {
                        Some(l) => Some(lambda_witness(model, l)),
                        None if opts.assume_coarse_grainings_equivalent && equal_effects => (0..model.size())
                            .find(|&l| ra.contains(l) != rb.contains(l))
                            .map(|l| Witness::CertaintySet { index: l, label: model.space.labels()[l].clone() }),
                        None => None,
                    }
                }
                OntKind::EpsF(_) => {
                    return Err(Error::Unsupported("eps relations are defined for preparations only".into()))
                }
            };
            if let Some(witness) = witness {
                report.violations.push(Violation { pair, witness });
            }
        }
    }
    Ok(())
}

fn kernel_difference(
    a: &TransformationKernel,
    b: &TransformationKernel,
    differ: impl Fn(f64, f64) -> bool,
) -> Option<Witness> {
    let n = a.size();
    for source in 0..n {
        for target in 0..n {
            if differ(a.value(target, source), b.value(target, source)) {
                return Some(Witness::Transition { source, target });
            }
        }
    }
    None
}

fn check_transformations(
    model: &OntologicalModel,
    scenario: &Scenario,
    a: &Assumption,
    opts: &CheckOptions,
    report: &mut AssumptionReport,
) -> Result<()> {
    let ts = scenario.transformations();
    let chois = ts.iter().map(|t| qcore::choi_state(&t.channel)).collect::<Result<Vec<_>>>()?;
    for i in 0..ts.len() {
        for j in i + 1..ts.len() {
            let related = match a.op {
                OpKind::Prob => prob_op_equiv(&chois[i], &chois[j], opts.tol_op),
                OpKind::Poss => poss_op_equiv(&chois[i], &chois[j], opts.tol_kernel),
                OpKind::Eps(_) => return Err(Error::Unsupported("eps relations are defined for preparations only".into())),
            };
            if !related {
                continue;
            }
            let pair = (ElementRef::Trans(ts[i].id.clone()), ElementRef::Trans(ts[j].id.clone()));
            report.examined.push(pair.clone());
            let (g, h) = (model.kernel(&ts[i].id)?, model.kernel(&ts[j].id)?);
            let tol = opts.tol_ont;
            let witness = match a.ont {
                OntKind::Prob => kernel_difference(g, h, |x, y| (x - y).abs() > tol),
                OntKind::Poss => {
                    if transformation_support(g, tol) == transformation_support(h, tol) {
                        None
                    } else {
                        kernel_difference(g, h, |x, y| (x > tol) != (y > tol))
                    }
                }
                OntKind::Trichotomy => kernel_difference(g, h, |x, y| Trichotomy::of(x, tol) != Trichotomy::of(y, tol)),
                OntKind::EpsF(_) => {
                    return Err(Error::Unsupported("eps relations are defined for preparations only".into()))
                }
            };
            if let Some(witness) = witness {
                report.violations.push(Violation { pair, witness });
            }
        }
    }
    Ok(())
}

/// Whether two matrices are equal within `tol`; convenience for callers holding raw matrices.
pub fn matrices_equal(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
    a.rows() == b.rows() && a.cols() == b.cols() && a.max_abs_diff(b) <= tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontomodel::{beltrametti_bugajski, epsilon_bb_model, MeasSpec, OnticSpace, PrepSpec, ScenarioSpec};
    use crate::qcore::{bloch_state, Measurement};
    use core::f64::consts::PI;

    fn qubit(phi: f64) -> DensityMatrix {
        DensityMatrix::pure(&bloch_state(phi)).unwrap()
    }

    fn basis(phi: f64) -> Measurement {
        Measurement::from_basis(&[bloch_state(phi), bloch_state(phi + PI)]).unwrap()
    }

    fn two_recipes() -> Scenario {
        ScenarioSpec::new(2)
            .prep(PrepSpec::atomic("zero", qubit(0.0)))
            .prep(PrepSpec::atomic("one", qubit(PI)))
            .prep(PrepSpec::atomic("plus", qubit(PI / 2.0)))
            .prep(PrepSpec::atomic("minus", qubit(-PI / 2.0)))
            .prep(PrepSpec::mixture("mixed_z", &[("zero", 0.5), ("one", 0.5)]))
            .prep(PrepSpec::mixture("mixed_x", &[("plus", 0.5), ("minus", 0.5)]))
            .meas(MeasSpec::new("Z", basis(0.0)))
            .meas(MeasSpec::new("X", basis(PI / 2.0)))
            .build()
            .unwrap()
    }

    #[test]
    fn parse_assumptions() {
        let a: Assumption = "hardy:prep".parse().unwrap();
        assert_eq!(a, Assumption::hardy(&[Target::Preparations]));
        let a: Assumption = "poss".parse().unwrap();
        assert_eq!(a.targets, Target::ALL.to_vec());
        let a: Assumption = "eps:0.25:f=sqrt".parse().unwrap();
        assert_eq!((a.op, a.ont), (OpKind::Eps(0.25), OntKind::EpsF(EpsFn::Sqrt)));
        assert_eq!(a.targets, vec![Target::Preparations]);
        let a: Assumption = "trichotomy:meas".parse().unwrap();
        assert_eq!(a.to_string(), "trichotomy:meas");
        assert!("eps:0.1:meas".parse::<Assumption>().is_err());
        assert!("eps:-1".parse::<Assumption>().is_err());
        assert!("fine".parse::<Assumption>().is_err());
        assert!("prob:everything".parse::<Assumption>().is_err());
        for s in ["prob:all", "poss:trans", "hardy:meas", "eps:0.5:f=id:prep"] {
            let a: Assumption = s.parse().unwrap();
            assert_eq!(a.to_string().parse::<Assumption>().unwrap(), a);
        }
    }

    #[test]
    fn operational_examples() {
        let s = two_recipes();
        let (mz, mx) = (&s.prep("mixed_z").unwrap().density, &s.prep("mixed_x").unwrap().density);
        assert!(prob_op_equiv(mz, mx, 1e-9));
        let a = DensityMatrix::diagonal(&[0.75, 0.25]).unwrap();
        let b = DensityMatrix::diagonal(&[0.25, 0.75]).unwrap();
        assert!(!prob_op_equiv(&a, &b, 1e-9));
        assert!(prob_op_equiv(&a, &a, 0.0));

        assert!(poss_op_equiv(&a, &b, 1e-9));
        assert!(!poss_op_equiv(&qubit(0.0), mz, 1e-9));

        assert!(eps_op_related(&a, &a, 0.0));
        assert!(!eps_op_related(&qubit(0.0), &qubit(PI), 1.9));
        assert!(eps_op_related(&a, mz, 0.5));
    }

    #[test]
    fn ontological_examples() {
        let u = PreparationMeasure::uniform(2).unwrap();
        let biased = PreparationMeasure::new(vec![0.3, 0.7]).unwrap();
        let point = PreparationMeasure::point(2, 0).unwrap();
        assert!(prob_ont_equiv(&u, &u, 1e-12));
        assert!(!prob_ont_equiv(&u, &biased, 1e-12));
        assert!(poss_ont_equiv(&u, &biased, 1e-12));
        assert!(!poss_ont_equiv(&point, &u, 1e-12));
        assert!(eps_ont_related(&u, &u, 0.0, EpsFn::Identity));
        let other = PreparationMeasure::point(2, 1).unwrap();
        assert!(!eps_ont_related(&point, &other, 1.9, EpsFn::Identity));
        assert!(eps_ont_related(&point, &other, 4.0, EpsFn::Sqrt));

        let s = two_recipes();
        let bb = beltrametti_bugajski(&s).unwrap();
        assert!(!prob_ont_equiv(bb.prep("mixed_z").unwrap(), bb.prep("mixed_x").unwrap(), 1e-12));
        assert_eq!(l1_distance(bb.prep("zero").unwrap().weights(), bb.prep("plus").unwrap().weights()), 2.0);
    }

    #[test]
    fn trichotomy_examples() {
        let xi = ResponseFunction::new(vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.3, 0.7]]).unwrap();
        assert_eq!(trichotomy_class(&xi, 0, 0, 1e-12), Trichotomy::Impossible);
        assert_eq!(trichotomy_class(&xi, 0, 1, 1e-12), Trichotomy::Certain);
        assert_eq!(trichotomy_class(&xi, 0, 2, 1e-12).value(), 0.5);
    }

    #[test]
    fn transformation_examples() {
        let a = Channel::dephasing(0.3).unwrap();
        let b = Channel::dephasing(0.7).unwrap();
        assert!(trans_poss_op_equiv(&a, &b, 1e-9));
        assert!(!trans_prob_op_equiv(&a, &b, 1e-9));
        let id = Channel::identity(2).unwrap();
        let dep = Channel::depolarizing(2, 1.0).unwrap();
        assert!(!trans_poss_op_equiv(&id, &dep, 1e-9));
        assert!(trans_poss_op_equiv(&dep, &dep, 1e-9));
    }

    #[test]
    fn bb_is_preparation_contextual() {
        let s = two_recipes();
        let bb = beltrametti_bugajski(&s).unwrap();
        let rep = check_assumption(&bb, &s, &Assumption::prob(&[Target::Preparations]), &CheckOptions::default()).unwrap();
        assert!(!rep.holds());
        assert_eq!(rep.violations[0].pair, (ElementRef::Prep("mixed_z".into()), ElementRef::Prep("mixed_x".into())));
        let meas = check_assumption(&bb, &s, &Assumption::prob(&[Target::Measurements]), &CheckOptions::default()).unwrap();
        assert!(meas.holds());
    }

    #[test]
    fn epsilon_model_is_universally_possibilistic() {
        let s = two_recipes();
        let (smoothed, model) = epsilon_bb_model(&s, 0.1).unwrap();
        let rep = check_assumption(&model, &smoothed, &Assumption::poss(&Target::ALL), &CheckOptions::default()).unwrap();
        assert!(rep.holds());
        assert!(!rep.examined.is_empty());
        // Against the unsmoothed table the model is refused.
        assert!(matches!(
            check_assumption(&model, &s, &Assumption::poss(&Target::ALL), &CheckOptions::default()),
            Err(Error::NotReproducing(_))
        ));
    }

    #[test]
    fn empty_relation_is_vacuous() {
        let s = ScenarioSpec::new(2)
            .prep(PrepSpec::atomic("zero", qubit(0.0)))
            .prep(PrepSpec::atomic("plus", qubit(PI / 2.0)))
            .meas(MeasSpec::new("Z", basis(0.0)))
            .build()
            .unwrap();
        let bb = beltrametti_bugajski(&s).unwrap();
        let rep = check_assumption(&bb, &s, &Assumption::prob(&Target::ALL), &CheckOptions::default()).unwrap();
        assert!(rep.examined.is_empty() && rep.holds());
    }

    #[test]
    fn coarse_graining_flag_controls_certainty_sets() {
        let s = ScenarioSpec::new(2)
            .prep(PrepSpec::atomic("zero", qubit(0.0)))
            .prep(PrepSpec::atomic("one", qubit(PI)))
            .meas(MeasSpec::new("Z1", basis(0.0)))
            .meas(MeasSpec::new(
                "Z3",
                Measurement::new(vec![
                    Effect::projector(&bloch_state(0.0)).unwrap(),
                    Effect::new(ComplexMatrix::diag(&[0.0, 0.5])).unwrap(),
                    Effect::new(ComplexMatrix::diag(&[0.0, 0.5])).unwrap(),
                ])
                .unwrap(),
            ))
            .build()
            .unwrap();
        // Three ontic states; on l2 outcome |0> is certain in Z1 but only possible in Z3.
        let m = OntologicalModel::new(OnticSpace::numbered(3).unwrap())
            .with_prep("zero", PreparationMeasure::new(vec![0.5, 0.0, 0.5]).unwrap())
            .with_prep("one", PreparationMeasure::point(3, 1).unwrap())
            .with_response("Z1", ResponseFunction::new(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap())
            .with_response(
                "Z3",
                ResponseFunction::new(vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.5, 0.5], vec![1.0, 0.0, 0.0]]).unwrap(),
            );
        assert!(m.reproduces(&s, 1e-9).unwrap().ok);
        let a = Assumption::poss(&[Target::Measurements]);
        assert!(check_assumption(&m, &s, &a, &CheckOptions::default()).unwrap().holds());

        let m3 = OntologicalModel::new(OnticSpace::numbered(3).unwrap())
            .with_prep("zero", PreparationMeasure::point(3, 0).unwrap())
            .with_prep("one", PreparationMeasure::point(3, 1).unwrap())
            .with_response("Z1", ResponseFunction::new(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap())
            .with_response(
                "Z3",
                ResponseFunction::new(vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.5, 0.5], vec![0.5, 0.25, 0.25]]).unwrap(),
            );
        assert!(m3.reproduces(&s, 1e-9).unwrap().ok);
        let a = Assumption::hardy(&[Target::Measurements]);
        let strict = check_assumption(&m3, &s, &a, &CheckOptions::default()).unwrap();
        assert!(matches!(strict.violations[0].witness, Witness::CertaintySet { index: 2, .. }));
        let loose = CheckOptions { assume_coarse_grainings_equivalent: false, ..CheckOptions::default() };
        assert!(check_assumption(&m3, &s, &a, &loose).unwrap().holds());
    }
}
