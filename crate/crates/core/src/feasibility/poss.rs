//! Possibilistic feasibility: does some finite ontological model reproduce a possibility table
//! under the chosen noncontextuality constraints?
//!
//! Every constraint except "this possible entry has a witness" restricts one ontic state at a
//! time, so a model exists iff each possible entry has its own witness type; the witnesses then
//! form the model. Each witness is found by DPLL over a type's variables: membership in every
//! atomic preparation's support and, per outcome, whether the outcome is allowed.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use super::sat::{self, is_pos, neg, pos, var, Lit};
use crate::error::{Error, Result};
use crate::ontomodel::Scenario;
use crate::relations::{meas_poss_op_equiv, meas_prob_op_equiv, poss_op_equiv};

/// Default cap on the number of candidate ontic-state types.
pub const DEFAULT_MAX_TYPES: u128 = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Flag {
    Impossible,
    Possible,
    /// Probability one; acts as possible unless the trichotomy constraints are switched on.
    Certain,
    /// Neither demanded nor forbidden.
    Unconstrained,
}

impl Flag {
    pub fn of(p: f64, tol_zero: f64) -> Self {
        if p <= tol_zero {
            Flag::Impossible
        } else if p >= 1.0 - tol_zero {
            Flag::Certain
        } else {
            Flag::Possible
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Flag::Impossible => "impossible",
            Flag::Possible => "possible",
            Flag::Certain => "certain",
            Flag::Unconstrained => "unconstrained",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "impossible" | "0" => Some(Flag::Impossible),
            "possible" | "1" => Some(Flag::Possible),
            "certain" => Some(Flag::Certain),
            "unconstrained" | "*" => Some(Flag::Unconstrained),
            _ => None,
        }
    }

    fn demanded(self) -> bool {
        matches!(self, Flag::Possible | Flag::Certain)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableMeasurement {
    pub id: String,
    pub outcomes: usize,
    /// Local measurement ids and outcome counts of a product measurement, first factor most
    /// significant in the outcome index.
    pub parts: Option<Vec<(String, usize)>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Context {
    pub prep: String,
    pub meas: String,
    pub flags: Vec<Flag>,
}

/// Threshold pattern of a scenario, plus the operational equivalences the constraints refer to.
#[derive(Clone, Debug, PartialEq)]
pub struct PossibilityTable {
    pub atomic: Vec<String>,
    /// Mixture id and its components (atomic or earlier mixtures) with positive weight.
    pub mixtures: Vec<(String, Vec<String>)>,
    pub measurements: Vec<TableMeasurement>,
    pub contexts: Vec<Context>,
    /// Classes of possibilistically equivalent preparations.
    pub prep_classes: Vec<Vec<String>>,
    /// Classes of possibilistically equivalent (same-kernel) outcomes.
    pub effect_classes: Vec<Vec<(String, usize)>>,
    /// Classes of equal effects.
    pub equal_effects: Vec<Vec<(String, usize)>>,
    pub tol_zero: f64,
}

impl PossibilityTable {
    pub fn context(&self, prep: &str, meas: &str) -> Option<&Context> {
        self.contexts.iter().find(|c| c.prep == prep && c.meas == meas)
    }

    pub fn context_mut(&mut self, prep: &str, meas: &str) -> Option<&mut Context> {
        self.contexts.iter_mut().find(|c| c.prep == prep && c.meas == meas)
    }

    /// Entries flagged impossible, in context order.
    pub fn impossible_entries(&self) -> Vec<(String, String, usize)> {
        let mut out = Vec::new();
        for c in &self.contexts {
            for (k, f) in c.flags.iter().enumerate() {
                if *f == Flag::Impossible {
                    out.push((c.prep.clone(), c.meas.clone(), k));
                }
            }
        }
        out
    }

    fn preps(&self) -> impl Iterator<Item = &str> {
        self.atomic.iter().map(String::as_str).chain(self.mixtures.iter().map(|(m, _)| m.as_str()))
    }

    fn measurement(&self, id: &str) -> Option<&TableMeasurement> {
        self.measurements.iter().find(|m| m.id == id)
    }

    /// Atomic members of every preparation's support. Validates ids and acyclicity.
    fn resolved_supports(&self) -> Result<BTreeMap<String, BTreeSet<usize>>> {
        let mut out: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
        for (i, a) in self.atomic.iter().enumerate() {
            if out.insert(a.clone(), BTreeSet::from([i])).is_some() {
                return Err(Error::DuplicateId(a.clone()));
            }
        }
        for (m, parts) in &self.mixtures {
            if out.contains_key(m) {
                return Err(Error::DuplicateId(m.clone()));
            }
            if parts.is_empty() {
                return Err(Error::InvalidArgument(format!("mixture '{m}' has no components")));
            }
            let mut set = BTreeSet::new();
            for p in parts {
                let s = out.get(p).ok_or_else(|| {
                    Error::InvalidArgument(format!("mixture '{m}' refers to '{p}', which is not declared before it"))
                })?;
                set.extend(s.iter().copied());
            }
            out.insert(m.clone(), set);
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        let supports = self.resolved_supports()?;
        let mut seen = BTreeSet::new();
        for m in &self.measurements {
            if !seen.insert(m.id.as_str()) {
                return Err(Error::DuplicateId(m.id.clone()));
            }
            if m.outcomes == 0 {
                return Err(Error::InvalidArgument(format!("measurement '{}' has no outcomes", m.id)));
            }
            if let Some(parts) = &m.parts {
                let prod: usize = parts.iter().map(|p| p.1).product();
                if prod != m.outcomes || parts.iter().any(|p| p.1 == 0) {
                    return Err(Error::InvalidArgument(format!(
                        "product measurement '{}' has {} outcomes but its parts give {prod}",
                        m.id, m.outcomes
                    )));
                }
            }
        }
        let mut ctx = BTreeSet::new();
        for c in &self.contexts {
            if !supports.contains_key(&c.prep) {
                return Err(Error::UnknownId(c.prep.clone()));
            }
            let m = self.measurement(&c.meas).ok_or_else(|| Error::UnknownId(c.meas.clone()))?;
            if c.flags.len() != m.outcomes {
                return Err(Error::DimensionMismatch { expected: m.outcomes, found: c.flags.len() });
            }
            if !ctx.insert((c.prep.as_str(), c.meas.as_str())) {
                return Err(Error::DuplicateId(format!("context ({}, {})", c.prep, c.meas)));
            }
            if c.flags.iter().all(|f| *f == Flag::Impossible) {
                return Err(Error::InvalidArgument(format!(
                    "context ({}, {}) has every outcome impossible",
                    c.prep, c.meas
                )));
            }
        }
        for class in &self.prep_classes {
            for p in class {
                if !supports.contains_key(p) {
                    return Err(Error::UnknownId(p.clone()));
                }
            }
        }
        for class in self.effect_classes.iter().chain(&self.equal_effects) {
            for (m, k) in class {
                let meas = self.measurement(m).ok_or_else(|| Error::UnknownId(m.clone()))?;
                if *k >= meas.outcomes {
                    return Err(Error::InvalidArgument(format!("outcome {k} out of range for '{m}'")));
                }
            }
        }
        Ok(())
    }
}

fn group_classes<T: Clone>(items: &[T], mut same: impl FnMut(&T, &T) -> bool) -> Vec<Vec<T>> {
    let mut classes: Vec<Vec<T>> = Vec::new();
    for it in items {
        match classes.iter_mut().find(|c| same(&c[0], it)) {
            Some(c) => c.push(it.clone()),
            None => classes.push(vec![it.clone()]),
        }
    }
    classes.retain(|c| c.len() > 1);
    classes
}

/// Thresholds a scenario's table. Equivalence classes use `tol_kernel` for kernels and for
/// effect equality.
pub fn possibility_table(scenario: &Scenario, tol_zero: f64, tol_kernel: f64) -> Result<PossibilityTable> {
    if !scenario.transformations().is_empty() {
        return Err(Error::Unsupported(
            "possibility tables cover preparation-measurement scenarios; transformation rows are not supported".into(),
        ));
    }
    let preps = scenario.preparations();
    let atomic: Vec<String> = preps.iter().filter(|p| p.is_atomic()).map(|p| p.id.clone()).collect();
    let mixtures = preps
        .iter()
        .filter_map(|p| {
            p.mixture.as_ref().map(|parts| {
                (p.id.clone(), parts.iter().filter(|(_, w)| *w > 0.0).map(|(c, _)| c.clone()).collect())
            })
        })
        .collect::<Vec<(String, Vec<String>)>>();
    // Mixtures may be declared in any order in a scenario; emit them dependency-first.
    let mut ordered: Vec<(String, Vec<String>)> = Vec::new();
    let mut done: BTreeSet<String> = atomic.iter().cloned().collect();
    let mut pending = mixtures;
    while !pending.is_empty() {
        let before = pending.len();
        let mut rest = Vec::new();
        for (m, parts) in pending {
            if parts.iter().all(|p| done.contains(p)) {
                done.insert(m.clone());
                ordered.push((m, parts));
            } else {
                rest.push((m, parts));
            }
        }
        if rest.len() == before {
            return Err(Error::Invariant("mixture declarations are cyclic".into()));
        }
        pending = rest;
    }
    let locals: BTreeMap<&str, usize> =
        scenario.local_measurements().iter().map(|(id, m)| (id.as_str(), m.len())).collect();
    let measurements = scenario
        .measurements()
        .iter()
        .map(|m| {
            let parts = m.parts.as_ref().map(|ps| {
                ps.iter().map(|p| (p.clone(), locals.get(p.as_str()).copied().unwrap_or(0))).collect::<Vec<_>>()
            });
            TableMeasurement { id: m.id.clone(), outcomes: m.measurement.len(), parts }
        })
        .collect();
    let contexts = scenario
        .table()
        .iter()
        .filter(|(k, _)| k.trans.is_none())
        .map(|(k, probs)| Context {
            prep: preps[k.prep].id.clone(),
            meas: scenario.measurements()[k.meas].id.clone(),
            flags: probs.iter().map(|&p| Flag::of(p, tol_zero)).collect(),
        })
        .collect();
    let idx: Vec<usize> = (0..preps.len()).collect();
    let prep_classes = group_classes(&idx, |&a, &b| poss_op_equiv(&preps[a].density, &preps[b].density, tol_kernel))
        .into_iter()
        .map(|c| c.into_iter().map(|i| preps[i].id.clone()).collect())
        .collect();
    let outcomes: Vec<(usize, usize)> = scenario
        .measurements()
        .iter()
        .enumerate()
        .flat_map(|(mi, m)| (0..m.measurement.len()).map(move |k| (mi, k)))
        .collect();
    let effect = |&(mi, k): &(usize, usize)| &scenario.measurements()[mi].measurement.effects()[k];
    let name = |cls: Vec<Vec<(usize, usize)>>| -> Vec<Vec<(String, usize)>> {
        cls.into_iter()
            .map(|c| c.into_iter().map(|(mi, k)| (scenario.measurements()[mi].id.clone(), k)).collect())
            .collect()
    };
    let effect_classes = name(group_classes(&outcomes, |a, b| meas_poss_op_equiv(effect(a), effect(b), tol_kernel)));
    let equal_effects = name(group_classes(&outcomes, |a, b| meas_prob_op_equiv(effect(a), effect(b), tol_kernel)));
    Ok(PossibilityTable {
        atomic,
        mixtures: ordered,
        measurements,
        contexts,
        prep_classes,
        effect_classes,
        equal_effects,
        tol_zero,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PossOptions {
    /// Possibilistically equivalent preparations share their support.
    pub prep_nc: bool,
    /// Possibilistically equivalent outcomes share their set of allowing ontic states.
    pub meas_nc: bool,
    /// Equal effects share their certainty set; certain entries force certainty on the support.
    pub trichotomy: bool,
    /// Joint outcomes of product measurements are allowed iff every local outcome is.
    pub product_rule: bool,
    pub max_types: u128,
}

impl Default for PossOptions {
    fn default() -> Self {
        Self { prep_nc: true, meas_nc: true, trichotomy: false, product_rule: true, max_types: DEFAULT_MAX_TYPES }
    }
}

impl PossOptions {
    pub fn unconstrained() -> Self {
        Self { prep_nc: false, meas_nc: false, trichotomy: false, ..Self::default() }
    }
}

/// A named constraint of the search; certificates are sets of these.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Constraint {
    /// `Pr(k | P, M) > 0`: some ontic state in `S(P)` allows outcome `k`.
    Witness { prep: String, meas: String, outcome: usize },
    /// `S(P)` is nonempty.
    Support { prep: String },
    /// `Pr(k | P, M) = 0`: no ontic state in `S(P)` allows outcome `k`.
    Impossible { prep: String, meas: String, outcome: usize },
    /// Every ontic state allows some outcome of the measurement (or local factor).
    Normalization { unit: String },
    /// A mixture's support is the union of its components' supports.
    Mixture { prep: String },
    /// A joint outcome is allowed iff all of its local outcomes are.
    Product { meas: String },
    /// Possibilistically equivalent preparations have equal supports.
    PrepNc { a: String, b: String },
    /// Possibilistically equivalent outcomes are allowed by the same ontic states.
    MeasNc { a: (String, usize), b: (String, usize) },
    /// Equal effects are certain on the same ontic states.
    Trichotomy { a: (String, usize), b: (String, usize) },
    /// `Pr(k | P, M) = 1`: outcome `k` is certain on all of `S(P)`.
    Certain { prep: String, meas: String, outcome: usize },
}

impl Constraint {
    /// Whether the constraint is one of the instance's defining conditions rather than the goal.
    pub fn is_goal(&self) -> bool {
        matches!(self, Constraint::Witness { .. } | Constraint::Support { .. })
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Witness { prep, meas, outcome } => {
                write!(f, "Pr({outcome} | {prep}, {meas}) > 0: some lambda in S({prep}) allows it")
            }
            Constraint::Support { prep } => write!(f, "S({prep}) is nonempty"),
            Constraint::Impossible { prep, meas, outcome } => {
                write!(f, "Pr({outcome} | {prep}, {meas}) = 0: no lambda in S({prep}) allows it")
            }
            Constraint::Normalization { unit } => write!(f, "every lambda allows some outcome of {unit}"),
            Constraint::Mixture { prep } => write!(f, "S({prep}) is the union of its components' supports"),
            Constraint::Product { meas } => write!(f, "outcomes of {meas} are allowed iff all local outcomes are"),
            Constraint::PrepNc { a, b } => write!(f, "{a} ~Poss {b} implies S({a}) = S({b})"),
            Constraint::MeasNc { a, b } => {
                write!(f, "{}[{}] ~Poss {}[{}] implies equal T sets", a.0, a.1, b.0, b.1)
            }
            Constraint::Trichotomy { a, b } => {
                write!(f, "{}[{}] = {}[{}] implies equal R sets", a.0, a.1, b.0, b.1)
            }
            Constraint::Certain { prep, meas, outcome } => {
                write!(f, "Pr({outcome} | {prep}, {meas}) = 1: lambda in S({prep}) allows only that outcome")
            }
        }
    }
}

/// CNF encoding of one ontic-state type.
struct Encoding {
    names: Vec<String>,
    /// Support indicator of every preparation.
    prep_var: BTreeMap<String, usize>,
    /// Allowance indicator of every measurement outcome.
    outcome_var: BTreeMap<String, Vec<usize>>,
    /// Independent outcome units (measurements or positioned local factors) and their variables.
    units: Vec<(String, Vec<usize>)>,
    n_atomic: usize,
    groups: Vec<(Constraint, Vec<Vec<Lit>>)>,
}

impl Encoding {
    fn fresh(&mut self, name: String) -> usize {
        self.names.push(name);
        self.names.len() - 1
    }

    fn iff(a: usize, b: usize) -> [Vec<Lit>; 2] {
        [vec![neg(a), pos(b)], vec![pos(a), neg(b)]]
    }

    /// `c <-> (x_k and not x_j for j != k)`.
    fn certainty_def(&mut self, meas: &str, k: usize) -> (usize, Vec<Vec<Lit>>) {
        let vars = self.outcome_var[meas].clone();
        let c = self.fresh(format!("lambda is certain of {meas}[{k}]"));
        let mut clauses = vec![vec![neg(c), pos(vars[k])]];
        let mut back = vec![pos(c), neg(vars[k])];
        for (j, &v) in vars.iter().enumerate() {
            if j != k {
                clauses.push(vec![neg(c), neg(v)]);
                back.push(pos(v));
            }
        }
        clauses.push(back);
        (c, clauses)
    }

    fn build(table: &PossibilityTable, opts: &PossOptions) -> Result<Self> {
        table.validate()?;
        let supports = table.resolved_supports()?;
        let mut e = Encoding {
            names: Vec::new(),
            prep_var: BTreeMap::new(),
            outcome_var: BTreeMap::new(),
            units: Vec::new(),
            n_atomic: table.atomic.len(),
            groups: Vec::new(),
        };
        for a in &table.atomic {
            let v = e.fresh(format!("lambda ∈ S({a})"));
            e.prep_var.insert(a.clone(), v);
        }
        let mut unit_index: BTreeMap<String, usize> = BTreeMap::new();
        for m in &table.measurements {
            match (&m.parts, opts.product_rule) {
                (Some(parts), true) => {
                    let mut locals = Vec::new();
                    for (pos_i, (lid, n)) in parts.iter().enumerate() {
                        let key = format!("{lid}@{pos_i}");
                        let ui = match unit_index.get(&key) {
                            Some(&ui) => ui,
                            None => {
                                let vars = (0..*n).map(|k| e.fresh(format!("lambda allows {key}[{k}]"))).collect();
                                e.units.push((key.clone(), vars));
                                unit_index.insert(key, e.units.len() - 1);
                                e.units.len() - 1
                            }
                        };
                        locals.push(ui);
                    }
                    let joint: Vec<usize> =
                        (0..m.outcomes).map(|k| e.fresh(format!("lambda allows {}[{k}]", m.id))).collect();
                    let mut clauses = Vec::new();
                    for (k, &jv) in joint.iter().enumerate() {
                        let mut rem = k;
                        let mut digits = vec![0; parts.len()];
                        for (i, (_, n)) in parts.iter().enumerate().rev() {
                            digits[i] = rem % n;
                            rem /= n;
                        }
                        let mut back = vec![pos(jv)];
                        for (i, &ui) in locals.iter().enumerate() {
                            let lv = e.units[ui].1[digits[i]];
                            clauses.push(vec![neg(jv), pos(lv)]);
                            back.push(neg(lv));
                        }
                        clauses.push(back);
                    }
                    e.groups.push((Constraint::Product { meas: m.id.clone() }, clauses));
                    e.outcome_var.insert(m.id.clone(), joint);
                }
                _ => {
                    let vars: Vec<usize> =
                        (0..m.outcomes).map(|k| e.fresh(format!("lambda allows {}[{k}]", m.id))).collect();
                    e.units.push((m.id.clone(), vars.clone()));
                    e.outcome_var.insert(m.id.clone(), vars);
                }
            }
        }
        let mut count: u128 = 1u128.checked_shl(table.atomic.len() as u32).unwrap_or(u128::MAX);
        let base: u128 = if opts.trichotomy { 3 } else { 2 };
        for (_, vars) in &e.units {
            for _ in vars {
                count = count.saturating_mul(base);
            }
        }
        if count > opts.max_types {
            return Err(Error::SearchTooLarge { count, limit: opts.max_types });
        }
        for (unit, vars) in e.units.clone() {
            e.groups.push((Constraint::Normalization { unit }, vec![vars.iter().map(|&v| pos(v)).collect()]));
        }
        for (m, _) in &table.mixtures {
            let s = e.fresh(format!("lambda ∈ S({m})"));
            let members: Vec<usize> = supports[m].iter().map(|&i| e.prep_var[&table.atomic[i]]).collect();
            let mut clauses: Vec<Vec<Lit>> = members.iter().map(|&v| vec![neg(v), pos(s)]).collect();
            let mut back = vec![neg(s)];
            back.extend(members.iter().map(|&v| pos(v)));
            clauses.push(back);
            e.groups.push((Constraint::Mixture { prep: m.clone() }, clauses));
            e.prep_var.insert(m.clone(), s);
        }
        for c in &table.contexts {
            let s = e.prep_var[&c.prep];
            let vars = e.outcome_var[&c.meas].clone();
            for (k, f) in c.flags.iter().enumerate() {
                if *f == Flag::Impossible {
                    e.groups.push((
                        Constraint::Impossible { prep: c.prep.clone(), meas: c.meas.clone(), outcome: k },
                        vec![vec![neg(s), neg(vars[k])]],
                    ));
                }
                if opts.trichotomy && *f == Flag::Certain {
                    let clauses = (0..vars.len()).filter(|&j| j != k).map(|j| vec![neg(s), neg(vars[j])]).collect();
                    e.groups.push((Constraint::Certain { prep: c.prep.clone(), meas: c.meas.clone(), outcome: k }, clauses));
                }
            }
        }
        if opts.prep_nc {
            for class in &table.prep_classes {
                for other in &class[1..] {
                    let clauses = Self::iff(e.prep_var[&class[0]], e.prep_var[other]).to_vec();
                    e.groups.push((Constraint::PrepNc { a: class[0].clone(), b: other.clone() }, clauses));
                }
            }
        }
        if opts.meas_nc {
            for class in &table.effect_classes {
                let (m0, k0) = &class[0];
                for (m, k) in &class[1..] {
                    let clauses = Self::iff(e.outcome_var[m0][*k0], e.outcome_var[m][*k]).to_vec();
                    e.groups.push((Constraint::MeasNc { a: (m0.clone(), *k0), b: (m.clone(), *k) }, clauses));
                }
            }
        }
        if opts.trichotomy {
            for class in &table.equal_effects {
                let (m0, k0) = &class[0];
                for (m, k) in &class[1..] {
                    let (c0, mut clauses) = e.certainty_def(m0, *k0);
                    let (c1, more) = e.certainty_def(m, *k);
                    clauses.extend(more);
                    clauses.extend(Self::iff(c0, c1));
                    e.groups.push((Constraint::Trichotomy { a: (m0.clone(), *k0), b: (m.clone(), *k) }, clauses));
                }
            }
        }
        Ok(e)
    }

    fn goal_clauses(&self, goal: &Constraint) -> Vec<Vec<Lit>> {
        match goal {
            Constraint::Witness { prep, meas, outcome } => {
                vec![vec![pos(self.prep_var[prep])], vec![pos(self.outcome_var[meas][*outcome])]]
            }
            Constraint::Support { prep } => vec![vec![pos(self.prep_var[prep])]],
            _ => Vec::new(),
        }
    }

    fn clauses_for(&self, keep: &[bool], goal: &Constraint) -> (Vec<Vec<Lit>>, Vec<usize>) {
        let mut clauses = Vec::new();
        let mut owner = Vec::new();
        for (gi, (_, cs)) in self.groups.iter().enumerate() {
            if keep[gi] {
                for c in cs {
                    clauses.push(c.clone());
                    owner.push(gi);
                }
            }
        }
        for c in self.goal_clauses(goal) {
            clauses.push(c);
            owner.push(usize::MAX);
        }
        (clauses, owner)
    }

    fn solve(&self, keep: &[bool], goal: &Constraint) -> Option<Vec<bool>> {
        let (clauses, _) = self.clauses_for(keep, goal);
        sat::solve(self.names.len(), &clauses)
    }

    fn lambda_type(&self, a: &[bool], table: &PossibilityTable) -> LambdaType {
        let membership = (0..self.n_atomic).map(|i| a[self.prep_var[&table.atomic[i]]]).collect();
        let mut allowed = BTreeMap::new();
        for (m, vars) in &self.outcome_var {
            allowed.insert(m.clone(), vars.iter().map(|&v| a[v]).collect());
        }
        for (u, vars) in &self.units {
            allowed.insert(u.clone(), vars.iter().map(|&v| a[v]).collect());
        }
        LambdaType { membership, allowed }
    }
}

/// One ontic state of a possibilistic model.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct LambdaType {
    /// Membership in each atomic preparation's support, in table order.
    pub membership: Vec<bool>,
    /// Allowed outcomes per measurement id, plus per local factor `id@position` under the
    /// product rule.
    pub allowed: BTreeMap<String, Vec<bool>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PossModel {
    pub atomic: Vec<String>,
    pub types: Vec<LambdaType>,
}

impl PossModel {
    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    /// Direct check of the binary semantics against `table` under `opts`.
    pub fn verify(&self, table: &PossibilityTable, opts: &PossOptions) -> bool {
        let Ok(supports) = table.resolved_supports() else {
            return false;
        };
        if table.atomic != self.atomic {
            return false;
        }
        let in_support = |t: &LambdaType, p: &str| supports[p].iter().any(|&i| t.membership[i]);
        let allows = |t: &LambdaType, m: &str, k: usize| t.allowed.get(m).map(|v| v[k]).unwrap_or(false);
        let certain = |t: &LambdaType, m: &str, k: usize| {
            t.allowed.get(m).map(|v| v[k] && v.iter().filter(|&&b| b).count() == 1).unwrap_or(false)
        };
        for t in &self.types {
            if t.membership.len() != self.atomic.len() {
                return false;
            }
            for m in &table.measurements {
                let Some(v) = t.allowed.get(&m.id) else { return false };
                if v.len() != m.outcomes || !v.iter().any(|&b| b) {
                    return false;
                }
                if let (Some(parts), true) = (&m.parts, opts.product_rule) {
                    for (k, &jb) in v.iter().enumerate() {
                        let mut rem = k;
                        let mut all = true;
                        for (i, (lid, n)) in parts.iter().enumerate().rev() {
                            let digit = rem % n;
                            rem /= n;
                            let key = format!("{lid}@{i}");
                            match t.allowed.get(&key) {
                                Some(lv) if lv.len() == *n && lv.iter().any(|&b| b) => all &= lv[digit],
                                _ => return false,
                            }
                        }
                        if jb != all {
                            return false;
                        }
                    }
                }
            }
            for c in &table.contexts {
                if !in_support(t, &c.prep) {
                    continue;
                }
                for (k, f) in c.flags.iter().enumerate() {
                    if *f == Flag::Impossible && allows(t, &c.meas, k) {
                        return false;
                    }
                    if opts.trichotomy && *f == Flag::Certain && !certain(t, &c.meas, k) {
                        return false;
                    }
                }
            }
            if opts.prep_nc
                && table.prep_classes.iter().any(|cl| cl.iter().any(|p| in_support(t, p) != in_support(t, &cl[0])))
            {
                return false;
            }
            if opts.meas_nc
                && table.effect_classes.iter().any(|cl| {
                    cl.iter().any(|(m, k)| allows(t, m, *k) != allows(t, &cl[0].0, cl[0].1))
                })
            {
                return false;
            }
            if opts.trichotomy
                && table.equal_effects.iter().any(|cl| {
                    cl.iter().any(|(m, k)| certain(t, m, *k) != certain(t, &cl[0].0, cl[0].1))
                })
            {
                return false;
            }
        }
        let preps: Vec<&str> = table.preps().collect();
        if preps.iter().any(|p| !self.types.iter().any(|t| in_support(t, p))) {
            return false;
        }
        table.contexts.iter().all(|c| {
            c.flags.iter().enumerate().all(|(k, f)| {
                !f.demanded() || self.types.iter().any(|t| in_support(t, &c.prep) && allows(t, &c.meas, k))
            })
        })
    }
}

/// One forced literal in the propagation replay of a conflict.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainStep {
    pub fact: String,
    pub because: Constraint,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Conflict {
    /// The entry (or nonempty support) that admits no witness.
    pub goal: Constraint,
    /// A minimal set of constraints that, with the goal, is unsatisfiable.
    pub constraints: Vec<Constraint>,
    /// Unit-propagation replay from the goal; ends with the violated constraint when
    /// propagation alone refutes the goal.
    pub chain: Vec<ChainStep>,
    pub violated: Option<Constraint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Replay {
    pub unsatisfiable: bool,
    /// Dropping any single constraint makes the goal satisfiable.
    pub minimal: bool,
}

impl Conflict {
    /// Rebuilds the listed constraints from `table` and re-decides them.
    pub fn replay(&self, table: &PossibilityTable, opts: &PossOptions) -> Result<Replay> {
        let enc = Encoding::build(table, opts)?;
        let keep_of = |drop: Option<&Constraint>| -> Result<Vec<bool>> {
            for c in &self.constraints {
                if !enc.groups.iter().any(|(k, _)| k == c) {
                    return Err(Error::Invariant(format!("certificate constraint not entailed by the table: {c}")));
                }
            }
            Ok(enc.groups.iter().map(|(k, _)| self.constraints.contains(k) && Some(k) != drop).collect())
        };
        let unsatisfiable = enc.solve(&keep_of(None)?, &self.goal).is_none();
        let mut minimal = true;
        for c in &self.constraints {
            if enc.solve(&keep_of(Some(c))?, &self.goal).is_none() {
                minimal = false;
                break;
            }
        }
        Ok(Replay { unsatisfiable, minimal })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Sat,
    Unsat,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Sat => "SAT",
            Status::Unsat => "UNSAT",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PossFeasibility {
    pub status: Status,
    pub model: Option<PossModel>,
    pub certificate: Option<Conflict>,
    pub options: PossOptions,
    pub tol_zero: f64,
}

fn minimize(enc: &Encoding, goal: &Constraint) -> Vec<bool> {
    let mut keep = vec![true; enc.groups.len()];
    for gi in 0..enc.groups.len() {
        keep[gi] = false;
        if enc.solve(&keep, goal).is_some() {
            keep[gi] = true;
        }
    }
    keep
}

fn chain_of(enc: &Encoding, keep: &[bool], goal: &Constraint) -> (Vec<ChainStep>, Option<Constraint>) {
    let (clauses, owner) = enc.clauses_for(keep, goal);
    let (log, conflict) = sat::propagation_trace(enc.names.len(), &clauses);
    let key = |ci: usize| if owner[ci] == usize::MAX { goal.clone() } else { enc.groups[owner[ci]].0.clone() };
    let steps = log
        .into_iter()
        .map(|(l, ci)| ChainStep {
            fact: if is_pos(l) { enc.names[var(l)].clone() } else { format!("not ({})", enc.names[var(l)]) },
            because: key(ci),
        })
        .collect();
    (steps, conflict.map(key))
}

/// Decides whether a model reproducing `table`'s possibility pattern exists under `opts`.
pub fn poss_nc_feasible(table: &PossibilityTable, opts: &PossOptions) -> Result<PossFeasibility> {
    let enc = Encoding::build(table, opts)?;
    let all = vec![true; enc.groups.len()];
    let mut goals: Vec<Constraint> = Vec::new();
    for c in &table.contexts {
        for (k, f) in c.flags.iter().enumerate() {
            if f.demanded() {
                goals.push(Constraint::Witness { prep: c.prep.clone(), meas: c.meas.clone(), outcome: k });
            }
        }
    }
    for p in table.preps() {
        goals.push(Constraint::Support { prep: p.to_string() });
    }
    let mut witnesses: Vec<Vec<bool>> = Vec::new();
    for goal in &goals {
        let covered = witnesses.iter().any(|w| match goal {
            Constraint::Witness { prep, meas, outcome } => w[enc.prep_var[prep]] && w[enc.outcome_var[meas][*outcome]],
            Constraint::Support { prep } => w[enc.prep_var[prep]],
            _ => true,
        });
        if covered {
            continue;
        }
        match enc.solve(&all, goal) {
            Some(w) => witnesses.push(w),
            None => {
                let keep = minimize(&enc, goal);
                let (chain, violated) = chain_of(&enc, &keep, goal);
                let constraints = enc.groups.iter().zip(&keep).filter(|(_, &k)| k).map(|(g, _)| g.0.clone()).collect();
                return Ok(PossFeasibility {
                    status: Status::Unsat,
                    model: None,
                    certificate: Some(Conflict { goal: goal.clone(), constraints, chain, violated }),
                    options: *opts,
                    tol_zero: table.tol_zero,
                });
            }
        }
    }
    let mut types: Vec<LambdaType> = witnesses.iter().map(|w| enc.lambda_type(w, table)).collect();
    types.dedup();
    Ok(PossFeasibility {
        status: Status::Sat,
        model: Some(PossModel { atomic: table.atomic.clone(), types }),
        certificate: None,
        options: *opts,
        tol_zero: table.tol_zero,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::thm2::thm2_scenario;
    use crate::linalg::c64;
    use crate::ontomodel::{epsilon_bb_model, MeasSpec, PrepSpec, ScenarioSpec};
    use crate::qcore::{DensityMatrix, Measurement};
    use core::f64::consts::PI;

    fn z_scenario() -> Scenario {
        let z = Measurement::from_basis(&[vec![c64(1.0, 0.0), c64(0.0, 0.0)], vec![c64(0.0, 0.0), c64(1.0, 0.0)]])
            .unwrap();
        ScenarioSpec::new(2)
            .prep(PrepSpec::atomic("zero", DensityMatrix::diagonal(&[1.0, 0.0]).unwrap()))
            .prep(PrepSpec::atomic("one", DensityMatrix::diagonal(&[0.0, 1.0]).unwrap()))
            .meas(MeasSpec::new("Z", z))
            .build()
            .unwrap()
    }

    #[test]
    fn z_basis_pattern_is_diagonal() {
        let t = possibility_table(&z_scenario(), 1e-9, 1e-9).unwrap();
        assert_eq!(t.context("zero", "Z").unwrap().flags, vec![Flag::Certain, Flag::Impossible]);
        assert_eq!(t.context("one", "Z").unwrap().flags, vec![Flag::Impossible, Flag::Certain]);
        let r = poss_nc_feasible(&t, &PossOptions::default()).unwrap();
        assert_eq!(r.status, Status::Sat);
        assert!(r.model.unwrap().verify(&t, &PossOptions::default()));
    }

    #[test]
    fn thm2_zero_entries() {
        let t = possibility_table(&thm2_scenario(PI / 4.0).unwrap(), 1e-9, 1e-9).unwrap();
        let zeros = t.impossible_entries();
        assert_eq!(zeros.len(), 3);
        assert!(zeros.contains(&("half_pi".into(), "M_half_pi".into(), 1)));
        assert!(zeros.contains(&("minus_half_pi".into(), "M_half_pi".into(), 0)));
        assert!(zeros.contains(&("phi".into(), "M_phi".into(), 1)));
        assert_eq!(t.prep_classes, vec![vec!["A".to_string(), "B".to_string()]]);
    }

    #[test]
    fn thm2_unsat_with_replayable_chain() {
        for phi in [PI / 6.0, PI / 4.0, PI / 3.0] {
            let t = possibility_table(&thm2_scenario(phi).unwrap(), 1e-9, 1e-9).unwrap();
            let opts = PossOptions::default();
            let r = poss_nc_feasible(&t, &opts).unwrap();
            assert_eq!(r.status, Status::Unsat);
            let cert = r.certificate.unwrap();
            assert!(cert.constraints.contains(&Constraint::PrepNc { a: "A".into(), b: "B".into() }));
            assert!(cert.violated.is_some());
            assert_eq!(cert.replay(&t, &opts).unwrap(), Replay { unsatisfiable: true, minimal: true });
            let free = poss_nc_feasible(&t, &PossOptions::unconstrained()).unwrap();
            assert_eq!(free.status, Status::Sat);
            assert!(free.model.unwrap().verify(&t, &PossOptions::unconstrained()));
        }
    }

    #[test]
    fn single_context_needs_one_state() {
        let z = Measurement::from_basis(&[vec![c64(1.0, 0.0), c64(0.0, 0.0)], vec![c64(0.0, 0.0), c64(1.0, 0.0)]])
            .unwrap();
        let s = ScenarioSpec::new(2)
            .prep(PrepSpec::atomic("mixed", DensityMatrix::maximally_mixed(2).unwrap()))
            .meas(MeasSpec::new("Z", z))
            .build()
            .unwrap();
        let t = possibility_table(&s, 1e-9, 1e-9).unwrap();
        let r = poss_nc_feasible(&t, &PossOptions::default()).unwrap();
        assert_eq!(r.model.unwrap().len(), 1);
    }

    #[test]
    fn smoothed_thm2_is_sat() {
        let (smoothed, _) = epsilon_bb_model(&thm2_scenario(PI / 4.0).unwrap(), 0.1).unwrap();
        let t = possibility_table(&smoothed, 1e-9, 1e-9).unwrap();
        assert!(t.impossible_entries().is_empty());
        let r = poss_nc_feasible(&t, &PossOptions::default()).unwrap();
        assert_eq!(r.status, Status::Sat);
        assert!(r.model.unwrap().verify(&t, &PossOptions::default()));
    }

    #[test]
    fn size_guard() {
        let t = possibility_table(&thm2_scenario(PI / 4.0).unwrap(), 1e-9, 1e-9).unwrap();
        let opts = PossOptions { max_types: 100, ..PossOptions::default() };
        assert!(matches!(poss_nc_feasible(&t, &opts), Err(Error::SearchTooLarge { count: 256, limit: 100 })));
    }

    #[test]
    fn malformed_tables_rejected() {
        let mut t = possibility_table(&z_scenario(), 1e-9, 1e-9).unwrap();
        t.contexts[0].flags = vec![Flag::Impossible, Flag::Impossible];
        assert!(poss_nc_feasible(&t, &PossOptions::default()).is_err());
        let mut t = possibility_table(&z_scenario(), 1e-9, 1e-9).unwrap();
        t.contexts[0].meas = "nope".into();
        assert!(matches!(t.validate(), Err(Error::UnknownId(_))));
    }
}
