//! Same-kernel decompositions and the support closure they force under Hardy noncontextuality.
//!
//! For density matrices with equal kernels let `a0` be the smallest nonzero eigenvalue of `rho0`
//! and `a1` the largest eigenvalue of `rho1`. With `w = a0 / a1` the matrix
//! `sigma0 = (rho0 - w rho1) / (1 - w)` is a state, and `rho0` can be prepared as the mixture
//! `(1 - w) sigma0 + w rho1`. A model that represents probabilistically equivalent procedures with
//! equal supports then has `S(rho1) ⊆ S(rho0)`; the symmetric construction gives equality.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{set_string, Fact};
use crate::error::{invariant, Error, Result};
use crate::linalg::{eigh, ComplexMatrix};
use crate::ontomodel::{MeasSpec, OntologicalModel, PrepSpec, Scenario, ScenarioSpec};
use crate::qcore::{self, DensityMatrix, Effect, Measurement};
use crate::relations::{self, check_assumption, Assumption, CheckOptions, Target, Violation};

#[derive(Clone, Debug, PartialEq)]
pub struct HardyDecomposition {
    pub sigma0: DensityMatrix,
    pub weight: f64,
    pub alpha0_min: f64,
    pub alpha1_max: f64,
    /// Both states are maximally mixed on their common support; `sigma0 = rho1`, `w = 1`.
    pub degenerate: bool,
}

/// Relative gap below which `w` is treated as 1.
const DEGENERATE_GAP: f64 = 1e-9;

const SIGMA_PSD_TOL: f64 = 1e-9;

pub fn hardy_decomposition(rho0: &DensityMatrix, rho1: &DensityMatrix, tol_kernel: f64) -> Result<HardyDecomposition> {
    if rho0.dim() != rho1.dim() {
        return Err(Error::DimensionMismatch { expected: rho0.dim(), found: rho1.dim() });
    }
    if !qcore::same_kernel(rho0, rho1, tol_kernel)? {
        return Err(Error::KernelMismatch);
    }
    let e0 = rho0.eigen();
    let lmax0 = e0.max_value();
    let alpha0_min = e0
        .values
        .iter()
        .copied()
        .filter(|&x| x > tol_kernel * lmax0)
        .fold(f64::INFINITY, f64::min);
    let alpha1_max = rho1.eigen().max_value();
    let w = alpha0_min / alpha1_max;
    if w > 1.0 + DEGENERATE_GAP {
        return Err(Error::Numerical(format!("alpha0_min {alpha0_min} exceeds alpha1_max {alpha1_max}")));
    }
    if 1.0 - w <= DEGENERATE_GAP {
        return Ok(HardyDecomposition { sigma0: rho1.clone(), weight: 1.0, alpha0_min, alpha1_max, degenerate: true });
    }
    let sigma = rho0.matrix().affine(1.0 / (1.0 - w), rho1.matrix(), -w / (1.0 - w));
    let min = eigh(&sigma).min_value();
    if min < -SIGMA_PSD_TOL {
        return Err(Error::Numerical(format!("sigma0 has eigenvalue {min} below -{}", SIGMA_PSD_TOL)));
    }
    let sigma0 = DensityMatrix::new(sigma)?;
    Ok(HardyDecomposition { sigma0, weight: w, alpha0_min, alpha1_max, degenerate: false })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EffectDecomposition {
    pub a: f64,
    pub e3: Effect,
    pub degenerate: bool,
}

const BISECTION_RESOLUTION: f64 = 1e-10;

/// Largest `a` in `[0, 1)` with `E3 = (E1 - a E2) / (1 - a)` an effect, found by bisection.
///
/// The feasible set is an interval containing 0, so bisection finds its right end. When the
/// right end is 0 no decomposition with positive `a` exists and an error is returned.
pub fn effect_decomposition(e1: &Effect, e2: &Effect, tol_kernel: f64) -> Result<EffectDecomposition> {
    if e1.dim() != e2.dim() {
        return Err(Error::DimensionMismatch { expected: e1.dim(), found: e2.dim() });
    }
    if e1.matrix().max_abs() == 0.0 || e2.matrix().max_abs() == 0.0 {
        return Err(Error::InvalidArgument("effects must be nonzero".into()));
    }
    if !qcore::same_kernel(e1, e2, tol_kernel)? {
        return Err(Error::KernelMismatch);
    }
    if e1.matrix().max_abs_diff(e2.matrix()) <= 1e-12 {
        return Ok(EffectDecomposition { a: 1.0, e3: e2.clone(), degenerate: true });
    }
    let d = e1.dim();
    let id = ComplexMatrix::identity(d);
    const SLACK: f64 = 1e-13;
    let feasible = |a: f64| {
        let x = e1.matrix().affine(1.0, e2.matrix(), -a);
        let lo = eigh(&x).min_value();
        let hi = eigh(&x.affine(1.0, &id, -(1.0 - a))).max_value();
        lo >= -SLACK && hi <= SLACK
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > BISECTION_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo <= 0.0 {
        return Err(Error::Numerical(
            "no decomposition E1 = a E2 + (1 - a) E3 with a > 0 and E3 an effect".to_string(),
        ));
    }
    let e3 = Effect::new(e1.matrix().affine(1.0 / (1.0 - lo), e2.matrix(), -lo / (1.0 - lo)))?;
    Ok(EffectDecomposition { a: lo, e3, degenerate: false })
}

// ---------------------------------------------------------------------------------------------
// Scenario realising both decompositions

/// Preparation ids in a scenario built by [`thm1_scenario`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Thm1Ids {
    pub r0: String,
    pub r1: String,
    pub s0: String,
    pub s1: String,
    pub q0: String,
    pub q1: String,
}

fn eigen_mixture(
    spec: &mut ScenarioSpec,
    id: &str,
    rho: &DensityMatrix,
    tol_kernel: f64,
) -> Result<()> {
    let eig = rho.eigen();
    let lmax = eig.max_value();
    let mut parts = Vec::new();
    for (k, &x) in eig.values.iter().enumerate() {
        if x > tol_kernel * lmax {
            parts.push((k, x));
        }
    }
    let total: f64 = parts.iter().map(|p| p.1).sum();
    let mut mixture = Vec::new();
    for (k, x) in parts {
        let aid = format!("{id}_e{k}");
        spec.preparations.push(PrepSpec::atomic(&aid, DensityMatrix::pure(&eig.vector(k))?));
        mixture.push((aid, x / total));
    }
    spec.preparations.push(PrepSpec { id: id.to_string(), density: None, mixture: Some(mixture) });
    Ok(())
}

/// Scenario with pure eigenvector preparations and the declared mixtures
/// `R0 = rho0`, `R1 = rho1`, `S0 = sigma0`, `S1 = sigma1`, `Q0 = (1 - w) S0 + w R1` and
/// `Q1 = (1 - w') S1 + w' R0`; the kernel is spanned by extra pure preparations.
pub fn thm1_scenario(rho0: &DensityMatrix, rho1: &DensityMatrix, tol_kernel: f64) -> Result<(Scenario, Thm1Ids)> {
    let forward = hardy_decomposition(rho0, rho1, tol_kernel)?;
    let backward = hardy_decomposition(rho1, rho0, tol_kernel)?;
    let d = rho0.dim();
    let ids = Thm1Ids {
        r0: "R0".into(),
        r1: "R1".into(),
        s0: "S0".into(),
        s1: "S1".into(),
        q0: "Q0".into(),
        q1: "Q1".into(),
    };
    let mut spec = ScenarioSpec::new(d);
    eigen_mixture(&mut spec, &ids.r0, rho0, tol_kernel)?;
    eigen_mixture(&mut spec, &ids.r1, rho1, tol_kernel)?;
    eigen_mixture(&mut spec, &ids.s0, &forward.sigma0, tol_kernel)?;
    eigen_mixture(&mut spec, &ids.s1, &backward.sigma0, tol_kernel)?;
    for (k, v) in qcore::kernel_basis(rho0.matrix(), tol_kernel)?.basis_vectors.iter().enumerate() {
        spec.preparations.push(PrepSpec::atomic(&format!("ker_e{k}"), DensityMatrix::pure(v)?));
    }
    spec.preparations.push(PrepSpec {
        id: ids.q0.clone(),
        density: None,
        mixture: Some(alloc::vec![(ids.s0.clone(), 1.0 - forward.weight), (ids.r1.clone(), forward.weight)]),
    });
    spec.preparations.push(PrepSpec {
        id: ids.q1.clone(),
        density: None,
        mixture: Some(alloc::vec![(ids.s1.clone(), 1.0 - backward.weight), (ids.r0.clone(), backward.weight)]),
    });
    for (mid, rho) in [("M_R0", rho0), ("M_R1", rho1)] {
        let eig = rho.eigen();
        let basis: Vec<_> = (0..d).map(|k| eig.vector(k)).collect();
        spec.measurements.push(MeasSpec::new(mid, Measurement::from_basis(&basis)?));
    }
    Ok((spec.build()?, ids))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairClosure {
    pub a: String,
    pub b: String,
    pub chain: Vec<Fact>,
    pub equal_supports: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Thm1Report {
    pub premise_holds: bool,
    pub premise_violations: Vec<Violation>,
    pub pairs: Vec<PairClosure>,
}

impl Thm1Report {
    pub fn passed(&self) -> bool {
        self.premise_holds && self.pairs.iter().all(|p| p.equal_supports)
    }

    pub fn vacuous(&self) -> bool {
        self.premise_holds && self.pairs.is_empty()
    }
}

/// A declared mixture with density `target` and a direct component with density `part`.
fn find_witness(scenario: &Scenario, target: &DensityMatrix, part: &DensityMatrix, tol: f64) -> Option<(String, String)> {
    for p in scenario.preparations() {
        let Some(mix) = &p.mixture else { continue };
        if !relations::prob_op_equiv(&p.density, target, tol) {
            continue;
        }
        for (c, w) in mix {
            if *w <= 0.0 {
                continue;
            }
            let cp = scenario.prep(c).ok()?;
            if relations::prob_op_equiv(&cp.density, part, tol) {
                return Some((p.id.clone(), c.clone()));
            }
        }
    }
    None
}

fn inclusion_chain(
    model: &OntologicalModel,
    scenario: &Scenario,
    x: &str,
    y: &str,
    tol: f64,
    chain: &mut Vec<Fact>,
) -> Result<bool> {
    let (px, py) = (scenario.prep(x)?, scenario.prep(y)?);
    let (q, c) = find_witness(scenario, &px.density, &py.density, tol).ok_or_else(|| {
        invariant(format!(
            "scenario lacks a declared mixture with the density of '{x}' and a component with the density of '{y}'"
        ))
    })?;
    let labels = model.space.labels();
    let (sx, sy, sq, sc) = (model.support(x)?, model.support(y)?, model.support(&q)?, model.support(&c)?);
    chain.push(Fact::new(
        format!("S({q}) = S({x}) = {}", set_string(labels, &sx)),
        "hardy-nc",
        &[&q, x],
        sq == sx,
    ));
    chain.push(Fact::new(format!("S({c}) = S({y}) = {}", set_string(labels, &sy)), "hardy-nc", &[&c, y], sc == sy));
    chain.push(Fact::new(format!("S({c}) ⊆ S({q})"), "mixture-support-union", &[&c, &q], sc.is_subset(&sq)));
    let ok = sy.is_subset(&sx);
    chain.push(Fact::new(format!("S({y}) ⊆ S({x})"), "transitivity", &[y, x], ok));
    Ok(ok)
}

/// Replays the support-closure argument for every same-kernel pair of preparations (or just
/// `pair`) on a model that is Hardy noncontextual for preparations.
pub fn thm1_support_closure(
    scenario: &Scenario,
    model: &OntologicalModel,
    pair: Option<(&str, &str)>,
    opts: &CheckOptions,
) -> Result<Thm1Report> {
    let premise = check_assumption(model, scenario, &Assumption::hardy(&[Target::Preparations]), opts)?;
    if !premise.holds() {
        return Ok(Thm1Report { premise_holds: false, premise_violations: premise.violations, pairs: Vec::new() });
    }
    let mut candidates = Vec::new();
    match pair {
        Some((a, b)) => {
            let (pa, pb) = (scenario.prep(a)?, scenario.prep(b)?);
            if !relations::poss_op_equiv(&pa.density, &pb.density, opts.tol_kernel) {
                return Err(Error::KernelMismatch);
            }
            candidates.push((a.to_string(), b.to_string()));
        }
        None => {
            let preps = scenario.preparations();
            for i in 0..preps.len() {
                for j in i + 1..preps.len() {
                    let (p, q) = (&preps[i], &preps[j]);
                    if relations::poss_op_equiv(&p.density, &q.density, opts.tol_kernel)
                        && !relations::prob_op_equiv(&p.density, &q.density, opts.tol_op)
                    {
                        candidates.push((p.id.clone(), q.id.clone()));
                    }
                }
            }
        }
    }
    let mut pairs = Vec::new();
    for (a, b) in candidates {
        let mut chain = Vec::new();
        let forward = inclusion_chain(model, scenario, &a, &b, opts.tol_op, &mut chain)?;
        let backward = inclusion_chain(model, scenario, &b, &a, opts.tol_op, &mut chain)?;
        let equal = forward && backward;
        chain.push(Fact::new(format!("S({a}) = S({b})"), "antisymmetry", &[&a, &b], equal));
        pairs.push(PairClosure { a, b, chain, equal_supports: equal });
    }
    Ok(Thm1Report { premise_holds: true, premise_violations: Vec::new(), pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontomodel::{beltrametti_bugajski, epsilon_bb_model};
    use crate::qcore::bloch_state;
    use core::f64::consts::PI;

    #[test]
    fn decomposition_example() {
        let rho0 = DensityMatrix::maximally_mixed(2).unwrap();
        let rho1 = DensityMatrix::diagonal(&[0.75, 0.25]).unwrap();
        let h = hardy_decomposition(&rho0, &rho1, 1e-9).unwrap();
        assert!((h.weight - 2.0 / 3.0).abs() < 1e-12);
        assert!(h.sigma0.matrix().max_abs_diff(&ComplexMatrix::diag(&[0.0, 1.0])) < 1e-12);
        assert!(!h.degenerate);
    }

    #[test]
    fn degenerate_decomposition() {
        let mm = DensityMatrix::maximally_mixed(2).unwrap();
        let h = hardy_decomposition(&mm, &mm, 1e-9).unwrap();
        assert!(h.degenerate && h.weight == 1.0);
        assert_eq!(h.alpha0_min, h.alpha1_max);
    }

    #[test]
    fn decomposition_needs_same_kernel() {
        let a = DensityMatrix::diagonal(&[1.0, 0.0]).unwrap();
        let b = DensityMatrix::diagonal(&[0.5, 0.5]).unwrap();
        assert!(matches!(hardy_decomposition(&a, &b, 1e-9), Err(Error::KernelMismatch)));
    }

    #[test]
    fn effect_examples() {
        let e1 = Effect::new(ComplexMatrix::identity(2).scale(0.5)).unwrap();
        let e2 = Effect::new(ComplexMatrix::diag(&[0.6, 0.4])).unwrap();
        let dec = effect_decomposition(&e1, &e2, 1e-9).unwrap();
        assert!((dec.a - 5.0 / 6.0).abs() < 1e-9);
        let rec = e2.matrix().affine(dec.a, dec.e3.matrix(), 1.0 - dec.a);
        assert!(rec.max_abs_diff(e1.matrix()) < 1e-9);

        let same = effect_decomposition(&e2, &e2, 1e-9).unwrap();
        assert!(same.degenerate && same.a == 1.0);

        let f1 = Effect::new(ComplexMatrix::diag(&[1.0, 0.5])).unwrap();
        let f2 = Effect::new(ComplexMatrix::diag(&[0.5, 1.0])).unwrap();
        assert!(effect_decomposition(&f1, &f2, 1e-9).is_err());
    }

    fn tilted_pair() -> (DensityMatrix, DensityMatrix) {
        let a = DensityMatrix::pure(&bloch_state(0.3)).unwrap();
        let b = DensityMatrix::pure(&bloch_state(2.0)).unwrap();
        let rho0 = DensityMatrix::mixture(&[(0.7, &a), (0.3, &b)]).unwrap();
        let rho1 = DensityMatrix::diagonal(&[0.4, 0.6]).unwrap();
        (rho0, rho1)
    }

    #[test]
    fn closure_on_smoothed_model() {
        let (rho0, rho1) = tilted_pair();
        let (s, ids) = thm1_scenario(&rho0, &rho1, 1e-9).unwrap();
        let (smoothed, model) = epsilon_bb_model(&s, 0.05).unwrap();
        let rep = thm1_support_closure(&smoothed, &model, Some((&ids.r0, &ids.r1)), &CheckOptions::default()).unwrap();
        assert!(rep.passed());
        assert!(rep.pairs[0].chain.iter().all(|f| f.holds));
    }

    #[test]
    fn bb_fails_premise() {
        let (rho0, rho1) = tilted_pair();
        let (s, _) = thm1_scenario(&rho0, &rho1, 1e-9).unwrap();
        let bb = beltrametti_bugajski(&s).unwrap();
        let rep = thm1_support_closure(&s, &bb, None, &CheckOptions::default()).unwrap();
        assert!(!rep.premise_holds && !rep.premise_violations.is_empty());
    }

    #[test]
    fn pure_family_is_vacuous() {
        let qubit = |t: f64| DensityMatrix::pure(&bloch_state(t)).unwrap();
        let s = ScenarioSpec::new(2)
            .prep(PrepSpec::atomic("a", qubit(0.0)))
            .prep(PrepSpec::atomic("b", qubit(PI / 3.0)))
            .meas(MeasSpec::new("Z", Measurement::from_basis(&[bloch_state(0.0), bloch_state(PI)]).unwrap()))
            .build()
            .unwrap();
        let bb = beltrametti_bugajski(&s).unwrap();
        let rep = thm1_support_closure(&s, &bb, None, &CheckOptions::default()).unwrap();
        assert!(rep.vacuous() && rep.passed());
    }

    #[test]
    fn missing_declarations_are_reported() {
        let qubit = |t: f64| DensityMatrix::pure(&bloch_state(t)).unwrap();
        let s = ScenarioSpec::new(2)
            .prep(PrepSpec::atomic("zero", qubit(0.0)))
            .prep(PrepSpec::atomic("one", qubit(PI)))
            .prep(PrepSpec::mixture("m1", &[("zero", 0.4), ("one", 0.6)]))
            .prep(PrepSpec::mixture("m2", &[("zero", 0.7), ("one", 0.3)]))
            .meas(MeasSpec::new("Z", Measurement::from_basis(&[bloch_state(0.0), bloch_state(PI)]).unwrap()))
            .build()
            .unwrap();
        let (smoothed, model) = epsilon_bb_model(&s, 0.1).unwrap();
        assert!(thm1_support_closure(&smoothed, &model, None, &CheckOptions::default()).is_err());
    }
}
