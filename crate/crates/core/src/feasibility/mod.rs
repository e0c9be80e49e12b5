//! Exact decision procedures for the existence of noncontextual ontological models.
//!
//! * [`poss`]: thresholded possibility tables and a witness search over ontic-state types, with
//!   minimal conflict certificates.
//! * [`lp`]: an exact rational simplex used by [`prob_nc_feasible_deterministic`], which asks
//!   whether a mixture of deterministic noncontextual assignments reproduces a scenario.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};

use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::linalg::{c64, C64};
use crate::ontomodel::{
    MeasSpec, OnticSpace, OntologicalModel, PrepSpec, PreparationMeasure, ResponseFunction, Scenario, ScenarioSpec,
};
use crate::qcore::{bloch_state, DensityMatrix, Measurement};
use crate::relations::{meas_prob_op_equiv, prob_op_equiv};

pub mod lp;
pub mod poss;
mod sat;

pub use lp::{rationalize, FarkasCertificate, LinearSystem, LpOutcome, Row, RowKind};
pub use poss::{
    poss_nc_feasible, possibility_table, ChainStep, Conflict, Constraint, Context, Flag, LambdaType, PossFeasibility,
    PossModel, PossOptions, PossibilityTable, Replay, Status, TableMeasurement, DEFAULT_MAX_TYPES,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LpOptions {
    /// Denominator bound for rationalizing table entries.
    pub max_den: u64,
    /// Half-width of the interval rows used when the exact rationalized table is infeasible.
    pub delta: f64,
    /// Tolerance for equal densities and equal effects.
    pub tol_equal: f64,
    pub max_types: u128,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self { max_den: 1_000_000, delta: 1e-6, tol_equal: 1e-9, max_types: DEFAULT_MAX_TYPES }
    }
}

/// A deterministic noncontextual assignment: one outcome per independent unit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    pub outcomes: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct LpFeasibility {
    pub status: Status,
    /// Independent units (plain measurements and positioned local factors).
    pub units: Vec<String>,
    pub assignments: Vec<Assignment>,
    pub system: LinearSystem,
    /// Exact weights on `assignments` for each atomic preparation (SAT).
    pub weights: Option<BTreeMap<String, Vec<BigRational>>>,
    pub model: Option<OntologicalModel>,
    pub certificate: Option<FarkasCertificate>,
    /// Largest `|p - rationalized p|` over the table.
    pub rationalization_error: f64,
    /// Whether the interval rows of half-width `delta` were needed.
    pub used_interval_rows: bool,
    pub options: LpOptions,
}

struct Units {
    names: Vec<String>,
    sizes: Vec<usize>,
    /// Per measurement: unit index of each factor (one factor for plain measurements).
    factors: Vec<Vec<usize>>,
}

fn units_of(scenario: &Scenario) -> Result<Units> {
    let mut names: Vec<String> = Vec::new();
    let mut sizes = Vec::new();
    let mut factors = Vec::new();
    let locals: BTreeMap<&str, usize> =
        scenario.local_measurements().iter().map(|(id, m)| (id.as_str(), m.len())).collect();
    let unit = |name: String, size: usize, names: &mut Vec<String>, sizes: &mut Vec<usize>| -> usize {
        match names.iter().position(|n| *n == name) {
            Some(i) => i,
            None => {
                names.push(name);
                sizes.push(size);
                names.len() - 1
            }
        }
    };
    for m in scenario.measurements() {
        match &m.parts {
            Some(parts) => {
                let mut f = Vec::new();
                for (i, p) in parts.iter().enumerate() {
                    let n = *locals.get(p.as_str()).ok_or_else(|| Error::UnknownId(p.clone()))?;
                    f.push(unit(format!("{p}@{i}"), n, &mut names, &mut sizes));
                }
                factors.push(f);
            }
            None => factors.push(vec![unit(m.id.clone(), m.measurement.len(), &mut names, &mut sizes)]),
        }
    }
    Ok(Units { names, sizes, factors })
}

fn outcome_of(units: &Units, meas: usize, a: &[usize]) -> usize {
    units.factors[meas].iter().fold(0, |acc, &u| acc * units.sizes[u] + a[u])
}

/// Fine's route: Λ is the set of deterministic outcome assignments that give equal effects equal
/// values, and each atomic preparation gets exact weights on Λ. Preparations with equal density
/// share their measure; mixtures inherit their components' weights.
pub fn prob_nc_feasible_deterministic(scenario: &Scenario, opts: &LpOptions) -> Result<LpFeasibility> {
    if !scenario.transformations().is_empty() {
        return Err(Error::Unsupported("deterministic feasibility covers preparation-measurement scenarios".into()));
    }
    let units = units_of(scenario)?;
    let count = units.sizes.iter().fold(1u128, |acc, &s| acc.saturating_mul(s as u128));
    if count > opts.max_types {
        return Err(Error::SearchTooLarge { count, limit: opts.max_types });
    }
    let meas = scenario.measurements();
    let outcomes: Vec<(usize, usize)> =
        meas.iter().enumerate().flat_map(|(mi, m)| (0..m.measurement.len()).map(move |k| (mi, k))).collect();
    let mut equal_pairs = Vec::new();
    for (i, &(m1, k1)) in outcomes.iter().enumerate() {
        for &(m2, k2) in &outcomes[i + 1..] {
            let (e1, e2) = (&meas[m1].measurement.effects()[k1], &meas[m2].measurement.effects()[k2]);
            if meas_prob_op_equiv(e1, e2, opts.tol_equal) {
                equal_pairs.push(((m1, k1), (m2, k2)));
            }
        }
    }
    let mut assignments = Vec::new();
    let mut a = vec![0usize; units.sizes.len()];
    'outer: loop {
        let consistent = equal_pairs.iter().all(|&((m1, k1), (m2, k2))| {
            (outcome_of(&units, m1, &a) == k1) == (outcome_of(&units, m2, &a) == k2)
        });
        if consistent {
            assignments.push(Assignment { outcomes: a.clone() });
        }
        for u in (0..a.len()).rev() {
            a[u] += 1;
            if a[u] < units.sizes[u] {
                continue 'outer;
            }
            a[u] = 0;
        }
        break;
    }
    let n_l = assignments.len();
    let preps = scenario.preparations();
    let atomic: Vec<usize> = (0..preps.len()).filter(|&i| preps[i].is_atomic()).collect();
    let col = |ai: usize, l: usize| ai * n_l + l;
    // Measure of every preparation as rational combination of atomic measures.
    let mut rat_err: f64 = 0.0;
    let combo: Vec<Vec<(usize, BigRational)>> = (0..preps.len())
        .map(|p| {
            scenario
                .atomic_decomposition(p)
                .into_iter()
                .filter(|(_, w)| *w > 0.0)
                .map(|(i, w)| {
                    let r = rationalize(w, opts.max_den);
                    rat_err = rat_err.max((lp::to_f64(&r) - w).abs());
                    (atomic.iter().position(|&x| x == i).expect("atomic component"), r)
                })
                .collect()
        })
        .collect();
    let mut exact_rows: Vec<Row> = Vec::new();
    for (ai, &p) in atomic.iter().enumerate() {
        exact_rows.push(Row {
            label: format!("normalization of {}", preps[p].id),
            coeffs: (0..n_l).map(|l| (col(ai, l), BigRational::from_integer(1.into()))).collect(),
            kind: RowKind::Eq,
            rhs: BigRational::from_integer(1.into()),
        });
    }
    for p in 0..preps.len() {
        for q in p + 1..preps.len() {
            if !prob_op_equiv(&preps[p].density, &preps[q].density, opts.tol_equal) {
                continue;
            }
            for l in 0..n_l {
                let mut coeffs: BTreeMap<usize, BigRational> = BTreeMap::new();
                for (ai, w) in &combo[p] {
                    *coeffs.entry(col(*ai, l)).or_insert_with(BigRational::zero) += w;
                }
                for (ai, w) in &combo[q] {
                    *coeffs.entry(col(*ai, l)).or_insert_with(BigRational::zero) -= w;
                }
                coeffs.retain(|_, v| !v.is_zero());
                if !coeffs.is_empty() {
                    exact_rows.push(Row {
                        label: format!("mu({}) = mu({}) on assignment {l}", preps[p].id, preps[q].id),
                        coeffs: coeffs.into_iter().collect(),
                        kind: RowKind::Eq,
                        rhs: BigRational::zero(),
                    });
                }
            }
        }
    }
    let mut table_rows: Vec<(String, Vec<(usize, BigRational)>, BigRational)> = Vec::new();
    for (key, probs) in scenario.table() {
        for (k, &p) in probs.iter().enumerate() {
            let mut coeffs: BTreeMap<usize, BigRational> = BTreeMap::new();
            for (l, asg) in assignments.iter().enumerate() {
                if outcome_of(&units, key.meas, &asg.outcomes) == k {
                    for (ai, w) in &combo[key.prep] {
                        *coeffs.entry(col(*ai, l)).or_insert_with(BigRational::zero) += w;
                    }
                }
            }
            let r = rationalize(p, opts.max_den);
            rat_err = rat_err.max((lp::to_f64(&r) - p).abs());
            table_rows.push((
                format!("Pr({k} | {}, {})", preps[key.prep].id, meas[key.meas].id),
                coeffs.into_iter().filter(|(_, v)| !v.is_zero()).collect(),
                r,
            ));
        }
    }
    let var_labels: Vec<String> = atomic
        .iter()
        .flat_map(|&p| (0..n_l).map(move |l| format!("mu({})[{l}]", preps[p].id)))
        .collect();
    let exact = LinearSystem {
        n_vars: atomic.len() * n_l,
        var_labels: var_labels.clone(),
        rows: exact_rows
            .iter()
            .cloned()
            .chain(table_rows.iter().map(|(label, c, r)| Row {
                label: label.clone(),
                coeffs: c.clone(),
                kind: RowKind::Eq,
                rhs: r.clone(),
            }))
            .collect(),
    };
    let (system, outcome, used_interval_rows) = match lp::solve(&exact) {
        LpOutcome::Feasible(x) => (exact, LpOutcome::Feasible(x), false),
        LpOutcome::Infeasible(_) => {
            let delta = rationalize(opts.delta, opts.max_den.max(1_000_000_000));
            let mut rows = exact_rows;
            for (label, c, r) in &table_rows {
                rows.push(Row {
                    label: format!("{label} <= p + delta"),
                    coeffs: c.clone(),
                    kind: RowKind::Le,
                    rhs: r + &delta,
                });
                rows.push(Row {
                    label: format!("{label} >= p - delta"),
                    coeffs: c.clone(),
                    kind: RowKind::Ge,
                    rhs: r - &delta,
                });
            }
            let relaxed = LinearSystem { n_vars: atomic.len() * n_l, var_labels, rows };
            let out = lp::solve(&relaxed);
            (relaxed, out, true)
        }
    };
    let mut result = LpFeasibility {
        status: Status::Unsat,
        units: units.names.clone(),
        assignments,
        system,
        weights: None,
        model: None,
        certificate: None,
        rationalization_error: rat_err,
        used_interval_rows,
        options: *opts,
    };
    match outcome {
        LpOutcome::Infeasible(cert) => {
            if !cert.verify(&result.system) {
                return Err(Error::Numerical("infeasibility certificate failed exact verification".into()));
            }
            result.certificate = Some(cert);
        }
        LpOutcome::Feasible(x) => {
            let weights: BTreeMap<String, Vec<BigRational>> = atomic
                .iter()
                .enumerate()
                .map(|(ai, &p)| (preps[p].id.clone(), x[ai * n_l..(ai + 1) * n_l].to_vec()))
                .collect();
            result.model = Some(deterministic_model(scenario, &units, &result.assignments, &weights, &combo, &atomic)?);
            result.weights = Some(weights);
            result.status = Status::Sat;
        }
    }
    Ok(result)
}

fn deterministic_model(
    scenario: &Scenario,
    units: &Units,
    assignments: &[Assignment],
    weights: &BTreeMap<String, Vec<BigRational>>,
    combo: &[Vec<(usize, BigRational)>],
    atomic: &[usize],
) -> Result<OntologicalModel> {
    let preps = scenario.preparations();
    // Keep only assignments carrying weight somewhere.
    let used: Vec<usize> = (0..assignments.len())
        .filter(|&l| weights.values().any(|w| w[l].is_positive()))
        .collect();
    let labels = used
        .iter()
        .map(|&l| {
            let parts: Vec<String> = units
                .names
                .iter()
                .zip(&assignments[l].outcomes)
                .map(|(u, k)| format!("{u}={k}"))
                .collect();
            parts.join(",")
        })
        .collect();
    let mut model = OntologicalModel::new(OnticSpace::new(labels)?);
    for (p, prep) in preps.iter().enumerate() {
        let mut mu = vec![0.0; used.len()];
        for (ai, w) in &combo[p] {
            let wa = &weights[&preps[atomic[*ai]].id];
            for (slot, &l) in used.iter().enumerate() {
                mu[slot] += lp::to_f64(&(w * &wa[l]));
            }
        }
        let total: f64 = mu.iter().sum();
        for v in mu.iter_mut() {
            *v /= total;
        }
        model = model.with_prep(&prep.id, PreparationMeasure::new(mu)?);
    }
    for (mi, m) in scenario.measurements().iter().enumerate() {
        let outs: Vec<usize> = used.iter().map(|&l| outcome_of(units, mi, &assignments[l].outcomes)).collect();
        model = model.with_response(&m.id, ResponseFunction::deterministic(&outs, m.measurement.len())?);
    }
    Ok(model)
}

fn z_basis() -> Vec<Vec<C64>> {
    vec![vec![c64(1.0, 0.0), c64(0.0, 0.0)], vec![c64(0.0, 0.0), c64(1.0, 0.0)]]
}

fn x_basis() -> Vec<Vec<C64>> {
    let h = FRAC_1_SQRT_2;
    vec![vec![c64(h, 0.0), c64(h, 0.0)], vec![c64(h, 0.0), c64(-h, 0.0)]]
}

/// Two qubits in `(|01> + |10> + |11>)/sqrt 3` with `Z` and `X` measured on each side.
///
/// Three joint outcomes never occur, `(Z=0, Z=0)`, `(Z=1, X=-)` and `(X=-, Z=1)`, while `(X=-, X=-)`
/// has probability 1/12.
pub fn hardy_scenario() -> Result<Scenario> {
    let s = 1.0 / libm::sqrt(3.0);
    let psi = [c64(0.0, 0.0), c64(s, 0.0), c64(s, 0.0), c64(s, 0.0)];
    let mut spec = ScenarioSpec::new(4)
        .prep(PrepSpec::atomic("hardy", DensityMatrix::pure(&psi)?))
        .local("Z", Measurement::from_basis(&z_basis())?)
        .local("X", Measurement::from_basis(&x_basis())?);
    for (a, b) in [("Z", "Z"), ("Z", "X"), ("X", "Z"), ("X", "X")] {
        spec = spec.meas(MeasSpec::product(&format!("{a}{b}"), &[a, b]));
    }
    spec.build()
}

/// Possibility table of [`hardy_scenario`] at zero threshold `1e-9`.
pub fn hardy_table() -> Result<PossibilityTable> {
    possibility_table(&hardy_scenario()?, 1e-9, 1e-9)
}

/// Singlet with Alice measuring at Bloch angles `0, pi/2` and Bob at `pi/4, -pi/4`, the
/// correlations reaching `2 sqrt 2`.
pub fn chsh_scenario() -> Result<Scenario> {
    let h = FRAC_1_SQRT_2;
    let singlet = [c64(0.0, 0.0), c64(h, 0.0), c64(-h, 0.0), c64(0.0, 0.0)];
    let basis = |t: f64| Measurement::from_basis(&[bloch_state(t), bloch_state(t + PI)]);
    let mut spec = ScenarioSpec::new(4)
        .prep(PrepSpec::atomic("singlet", DensityMatrix::pure(&singlet)?))
        .local("A0", basis(0.0)?)
        .local("A1", basis(PI / 2.0)?)
        .local("B0", basis(PI / 4.0)?)
        .local("B1", basis(-PI / 4.0)?);
    for a in ["A0", "A1"] {
        for b in ["B0", "B1"] {
            spec = spec.meas(MeasSpec::product(&format!("{a}{b}"), &[a, b]));
        }
    }
    spec.build()
}

/// Two perfectly correlated classical coins: `(|00><00| + |11><11|)/2` measured in `Z` on each side.
pub fn correlated_coins_scenario() -> Result<Scenario> {
    ScenarioSpec::new(4)
        .prep(PrepSpec::atomic("coins", DensityMatrix::diagonal(&[0.5, 0.0, 0.0, 0.5])?))
        .local("Z", Measurement::from_basis(&z_basis())?)
        .meas(MeasSpec::product("ZZ", &["Z", "Z"]))
        .build()
}

/// CHSH value `E00 + E01 + E10 - E11` of a table from [`chsh_scenario`].
pub fn chsh_value(scenario: &Scenario) -> Result<f64> {
    let corr = |m: &str| -> Result<f64> {
        let p: Vec<f64> = (0..4).map(|k| scenario.probability("singlet", None, m, k)).collect::<Result<_>>()?;
        Ok(p[0] - p[1] - p[2] + p[3])
    };
    Ok(corr("A0B0")? + corr("A0B1")? + corr("A1B0")? - corr("A1B1")?)
}

pub(crate) fn describe_certificate(sys: &LinearSystem, cert: &FarkasCertificate) -> Vec<(String, String)> {
    sys.rows
        .iter()
        .zip(&cert.y)
        .filter(|(_, y)| !y.is_zero())
        .map(|(r, y)| (r.label.clone(), y.to_string()))
        .collect()
}

/// Nonzero multipliers of a certificate by row label.
pub fn certificate_terms(result: &LpFeasibility) -> Vec<(String, String)> {
    match &result.certificate {
        Some(c) => describe_certificate(&result.system, c),
        None => Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relations::{check_assumption, Assumption, CheckOptions, Target};

    #[test]
    fn hardy_pattern() {
        let t = hardy_table().unwrap();
        let zeros = t.impossible_entries();
        assert_eq!(zeros.len(), 3);
        assert!(zeros.contains(&("hardy".into(), "ZZ".into(), 0)));
        assert!(zeros.contains(&("hardy".into(), "ZX".into(), 3)));
        assert!(zeros.contains(&("hardy".into(), "XZ".into(), 3)));
        let s = hardy_scenario().unwrap();
        assert!((s.probability("hardy", None, "XX", 3).unwrap() - 1.0 / 12.0).abs() < 1e-12);
        for row in s.rows() {
            for (k, p) in row.probs.iter().enumerate() {
                let zero = zeros.contains(&(row.prep.clone(), row.meas.clone(), k));
                assert_eq!(*p == 0.0, zero, "{} {} {k} {p}", row.prep, row.meas);
            }
        }
    }

    #[test]
    fn hardy_unsat_and_minimal() {
        let t = hardy_table().unwrap();
        let opts = PossOptions::default();
        let r = poss_nc_feasible(&t, &opts).unwrap();
        assert_eq!(r.status, Status::Unsat);
        let cert = r.certificate.unwrap();
        assert_eq!(cert.replay(&t, &opts).unwrap(), Replay { unsatisfiable: true, minimal: true });
        for (p, m, k) in t.impossible_entries() {
            let mut dropped = t.clone();
            dropped.context_mut(&p, &m).unwrap().flags[k] = Flag::Unconstrained;
            let r = poss_nc_feasible(&dropped, &opts).unwrap();
            assert_eq!(r.status, Status::Sat, "dropping ({p}, {m}, {k})");
            assert!(r.model.unwrap().verify(&dropped, &opts));
        }
    }

    #[test]
    fn chsh_separates_routes() {
        let s = chsh_scenario().unwrap();
        assert!((chsh_value(&s).unwrap().abs() - 2.0 * core::f64::consts::SQRT_2).abs() < 1e-9);
        let lp = prob_nc_feasible_deterministic(&s, &LpOptions::default()).unwrap();
        assert_eq!(lp.status, Status::Unsat);
        assert_eq!(lp.assignments.len(), 16);
        assert!(lp.certificate.as_ref().unwrap().verify(&lp.system));
        let t = possibility_table(&s, 1e-9, 1e-9).unwrap();
        assert!(t.impossible_entries().is_empty());
        let r = poss_nc_feasible(&t, &PossOptions::default()).unwrap();
        assert_eq!(r.status, Status::Sat);
    }

    #[test]
    fn coins_are_classical() {
        let s = correlated_coins_scenario().unwrap();
        let lp = prob_nc_feasible_deterministic(&s, &LpOptions::default()).unwrap();
        assert_eq!(lp.status, Status::Sat);
        assert!(!lp.used_interval_rows);
        let model = lp.model.unwrap();
        assert!(model.reproduces(&s, 1e-12).unwrap().ok);
        let rep = check_assumption(&model, &s, &Assumption::prob(&Target::ALL), &CheckOptions::default()).unwrap();
        assert!(rep.holds());
    }

    #[test]
    fn equal_effects_restrict_assignments() {
        let z = Measurement::from_basis(&z_basis()).unwrap();
        let s = ScenarioSpec::new(2)
            .prep(PrepSpec::atomic("zero", DensityMatrix::diagonal(&[1.0, 0.0]).unwrap()))
            .meas(MeasSpec::new("Z1", z.clone()))
            .meas(MeasSpec::new("Z2", z))
            .build()
            .unwrap();
        let lp = prob_nc_feasible_deterministic(&s, &LpOptions::default()).unwrap();
        assert_eq!(lp.assignments.len(), 2);
        assert_eq!(lp.status, Status::Sat);
    }

    #[test]
    fn size_guard() {
        let opts = LpOptions { max_types: 8, ..LpOptions::default() };
        assert!(matches!(
            prob_nc_feasible_deterministic(&chsh_scenario().unwrap(), &opts),
            Err(Error::SearchTooLarge { count: 16, limit: 8 })
        ));
    }
}
