//! Four pure qubit states on which possibilistic preparation noncontextuality fails.
//!
//! With `|t> = cos(t/2)|0> + sin(t/2)|1>` and `0 < phi < pi/2`, the mixtures
//! `A = (|phi> + |-pi/2>)/2` and `B = (|-phi> + |pi/2>)/2` are both full rank and hence
//! possibilistically equivalent. Equal supports for A and B, together with the disjointness of
//! the orthogonal states `|pi/2>` and `|-pi/2>`, put `S(pi/2)` inside `S(phi)`; but outcome
//! `|pi + phi>` is possible for `|pi/2>` and impossible for `|phi>`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::{set_string, Fact};
use crate::error::{Error, Result};
use crate::ontomodel::{
    MeasSpec, OnticSpace, OntologicalModel, PrepSpec, PreparationMeasure, ResponseFunction, Scenario, ScenarioSpec,
    SUPPORT_THRESHOLD,
};
use crate::qcore::{bloch_state, born_probability, DensityMatrix, Effect, Measurement};

pub const PHI: &str = "phi";
pub const MINUS_PHI: &str = "minus_phi";
pub const HALF_PI: &str = "half_pi";
pub const MINUS_HALF_PI: &str = "minus_half_pi";
pub const MIX_A: &str = "A";
pub const MIX_B: &str = "B";
pub const M_HALF_PI: &str = "M_half_pi";
pub const M_PHI: &str = "M_phi";

fn check_phi(phi: f64) -> Result<()> {
    if !(phi > 0.0 && phi < PI / 2.0) {
        return Err(Error::InvalidArgument(format!("phi = {phi} must lie strictly between 0 and pi/2")));
    }
    Ok(())
}

pub fn thm2_scenario(phi: f64) -> Result<Scenario> {
    check_phi(phi)?;
    let state = |t: f64| DensityMatrix::pure(&bloch_state(t));
    ScenarioSpec::new(2)
        .prep(PrepSpec::atomic(PHI, state(phi)?))
        .prep(PrepSpec::atomic(MINUS_PHI, state(-phi)?))
        .prep(PrepSpec::atomic(HALF_PI, state(PI / 2.0)?))
        .prep(PrepSpec::atomic(MINUS_HALF_PI, state(-PI / 2.0)?))
        .prep(PrepSpec::mixture(MIX_A, &[(PHI, 0.5), (MINUS_HALF_PI, 0.5)]))
        .prep(PrepSpec::mixture(MIX_B, &[(MINUS_PHI, 0.5), (HALF_PI, 0.5)]))
        .meas(MeasSpec::new(M_HALF_PI, Measurement::from_basis(&[bloch_state(PI / 2.0), bloch_state(-PI / 2.0)])?))
        .meas(MeasSpec::new(M_PHI, Measurement::from_basis(&[bloch_state(phi), bloch_state(PI + phi)])?))
        .build()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Thm2Step {
    /// `S(A) = S(B)` fails: the model is possibilistically preparation contextual.
    EqualMixtureSupports,
    /// `S(pi/2) ∩ S(-pi/2) = ∅` fails: some ontic state carries weight below the reproduction
    /// tolerance.
    OrthogonalDisjoint,
    /// `S(pi/2) ⊆ S(phi)` fails.
    Containment,
    /// An ontic state in `S(pi/2) ⊆ S(phi)` makes `|pi + phi>` possible for `|phi>`.
    ImpossibleOutcome,
    /// No step failed; only possible for a model that does not reproduce the scenario.
    InternalError,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContradictionReport {
    pub phi: f64,
    pub chain: Vec<Fact>,
    pub failed_step: Thm2Step,
    /// Entry `(prep, meas, outcome)` and its quantum probability driving the last step.
    pub failing_probability: ((String, String, usize), f64),
    /// Ontic state exhibiting the final contradiction, if reached.
    pub witness: Option<String>,
}

impl ContradictionReport {
    pub fn model_is_contextual(&self) -> bool {
        self.failed_step == Thm2Step::EqualMixtureSupports
    }
}

/// Replays the argument on `model`, returning the first step that fails.
pub fn thm2_check(model: &OntologicalModel, phi: f64, tol_repro: f64) -> Result<ContradictionReport> {
    let scenario = thm2_scenario(phi)?;
    let rep = model.reproduces(&scenario, tol_repro)?;
    if !rep.ok {
        return Err(Error::NotReproducing(format!(
            "worst deviation {} at {:?}",
            rep.worst_deviation, rep.worst_entry
        )));
    }
    let labels = model.space.labels();
    let p_key = (HALF_PI.to_string(), M_PHI.to_string(), 1);
    let p_value = scenario.probability(HALF_PI, None, M_PHI, 1)?;
    let mut chain = Vec::new();
    let done = |chain: Vec<Fact>, step, witness| ContradictionReport {
        phi,
        chain,
        failed_step: step,
        failing_probability: (p_key.clone(), p_value),
        witness,
    };

    let (sa, sb) = (model.support(MIX_A)?, model.support(MIX_B)?);
    let equal = sa == sb;
    chain.push(Fact::new(
        format!("S(A) = {} , S(B) = {}", set_string(labels, &sa), set_string(labels, &sb)),
        "poss-nc: A ~Poss B (both full rank)",
        &[MIX_A, MIX_B],
        equal,
    ));
    if !equal {
        return Ok(done(chain, Thm2Step::EqualMixtureSupports, None));
    }

    let (sh, smh, sp) = (model.support(HALF_PI)?, model.support(MINUS_HALF_PI)?, model.support(PHI)?);
    let overlap = sh.intersection(&smh);
    chain.push(Fact::new(
        format!("S(half_pi) ∩ S(minus_half_pi) = {}", set_string(labels, &overlap)),
        "orthogonal preparations share no ontic state",
        &[HALF_PI, MINUS_HALF_PI, M_HALF_PI],
        overlap.is_empty(),
    ));
    if !overlap.is_empty() {
        let w = overlap.indices()[0];
        return Ok(done(chain, Thm2Step::OrthogonalDisjoint, Some(labels[w].clone())));
    }

    let contained = sh.is_subset(&sp);
    chain.push(Fact::new(
        "S(half_pi) = [S(phi) ∪ S(minus_half_pi)] ∩ S(half_pi) ⊆ S(phi)",
        "intersect S(B) = S(A) with S(half_pi)",
        &[HALF_PI, PHI],
        contained,
    ));
    if !contained {
        return Ok(done(chain, Thm2Step::Containment, None));
    }

    let xi = model.response(M_PHI)?;
    let mu_h = model.prep(HALF_PI)?;
    let mu_p = model.prep(PHI)?;
    let witness = sh
        .indices()
        .into_iter()
        .filter(|&l| xi.value(1, l) > SUPPORT_THRESHOLD)
        .max_by(|&a, &b| (mu_h.weights()[a] * xi.value(1, a)).total_cmp(&(mu_h.weights()[b] * xi.value(1, b))));
    match witness {
        Some(l) => {
            let implied = mu_p.weights()[l] * xi.value(1, l);
            chain.push(Fact::new(
                format!(
                    "{} ∈ S(half_pi) ⊆ S(phi) with xi(pi+phi | {}) = {:.6e} (needed for Pr(pi+phi | half_pi) \
                     = {:.6}), so Pr(pi+phi | phi) >= {:.3e} > 0, yet the Born rule gives Pr(pi+phi | phi) = 0",
                    labels[l],
                    labels[l],
                    xi.value(1, l),
                    p_value,
                    implied
                ),
                "reproduction forces the outcome possible and impossible",
                &[HALF_PI, PHI, M_PHI],
                false,
            ));
            Ok(done(chain, Thm2Step::ImpossibleOutcome, Some(labels[l].clone())))
        }
        None => {
            chain.push(Fact::new(
                "no ontic state in S(half_pi) makes |pi+phi> possible",
                "reproduction of Pr(pi+phi | half_pi) > 0",
                &[HALF_PI, M_PHI],
                true,
            ));
            Ok(done(chain, Thm2Step::InternalError, None))
        }
    }
}

/// Model of [`thm2_scenario`] with equal mixture supports, at the price of weight `delta` on
/// ontic states that only a tolerance-level reproduction admits.
pub fn thm2_model_fixture(phi: f64, delta: f64) -> Result<OntologicalModel> {
    check_phi(phi)?;
    let labels = vec![PHI.to_string(), MINUS_PHI.to_string(), HALF_PI.to_string(), MINUS_HALF_PI.to_string()];
    let states: Vec<DensityMatrix> = [phi, -phi, PI / 2.0, -PI / 2.0]
        .iter()
        .map(|&t| DensityMatrix::pure(&bloch_state(t)))
        .collect::<Result<_>>()?;
    let response = |basis: [f64; 2]| -> Result<ResponseFunction> {
        let effects: Vec<Effect> = basis.iter().map(|&t| Effect::projector(&bloch_state(t))).collect::<Result<_>>()?;
        let table = states
            .iter()
            .map(|s| effects.iter().map(|e| born_probability(s, e)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        ResponseFunction::new(table)
    };
    let mu = |w: [f64; 4]| PreparationMeasure::new(w.to_vec());
    let phi_m = mu([1.0 - 2.0 * delta, delta, delta, 0.0])?;
    let mphi_m = mu([delta, 1.0 - 2.0 * delta, 0.0, delta])?;
    let h_m = mu([0.0, 0.0, 1.0, 0.0])?;
    let mh_m = mu([0.0, 0.0, 0.0, 1.0])?;
    let a = PreparationMeasure::mixture(&[(0.5, &phi_m), (0.5, &mh_m)])?;
    let b = PreparationMeasure::mixture(&[(0.5, &mphi_m), (0.5, &h_m)])?;
    Ok(OntologicalModel::new(OnticSpace::new(labels)?)
        .with_prep(PHI, phi_m)
        .with_prep(MINUS_PHI, mphi_m)
        .with_prep(HALF_PI, h_m)
        .with_prep(MINUS_HALF_PI, mh_m)
        .with_prep(MIX_A, a)
        .with_prep(MIX_B, b)
        .with_response(M_HALF_PI, response([PI / 2.0, -PI / 2.0])?)
        .with_response(M_PHI, response([phi, PI + phi])?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontomodel::beltrametti_bugajski;
    use crate::relations::{check_assumption, poss_op_equiv, Assumption, CheckOptions, Target};

    #[test]
    fn scenario_examples() {
        let s = thm2_scenario(PI / 4.0).unwrap();
        let p = s.probability(HALF_PI, None, M_PHI, 1).unwrap();
        assert!((p - 0.14645).abs() < 1e-5 && p > 0.0);
        let (a, b) = (&s.prep(MIX_A).unwrap().density, &s.prep(MIX_B).unwrap().density);
        assert!(poss_op_equiv(a, b, 1e-9));
        assert!(s.probability(HALF_PI, None, M_HALF_PI, 1).unwrap() < 1e-15);
        assert!(thm2_scenario(0.0).is_err());
        assert!(thm2_scenario(PI / 2.0).is_err());
    }

    #[test]
    fn bb_fails_at_mixture_supports() {
        let s = thm2_scenario(PI / 4.0).unwrap();
        let bb = beltrametti_bugajski(&s).unwrap();
        let rep = thm2_check(&bb, PI / 4.0, 1e-9).unwrap();
        assert_eq!(rep.failed_step, Thm2Step::EqualMixtureSupports);
        assert!(rep.model_is_contextual());
    }

    #[test]
    fn fixture_reaches_final_contradiction() {
        for phi in [PI / 6.0, PI / 4.0, PI / 3.0] {
            let s = thm2_scenario(phi).unwrap();
            let m = thm2_model_fixture(phi, 1e-10).unwrap();
            assert!(m.reproduces(&s, 1e-9).unwrap().ok);
            let nc = check_assumption(&m, &s, &Assumption::poss(&[Target::Preparations]), &CheckOptions::default())
                .unwrap();
            assert!(nc.holds());
            let rep = thm2_check(&m, phi, 1e-9).unwrap();
            assert_eq!(rep.failed_step, Thm2Step::ImpossibleOutcome);
            assert_eq!(rep.witness.as_deref(), Some(HALF_PI));
            assert_eq!(rep.chain.len(), 4);
        }
    }

    #[test]
    fn non_reproducing_model_is_refused() {
        let m = thm2_model_fixture(PI / 4.0, 1e-3).unwrap();
        assert!(matches!(thm2_check(&m, PI / 4.0, 1e-9), Err(Error::NotReproducing(_))));
    }
}
