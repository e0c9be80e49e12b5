//! Channels as preparations: `chA` and `chB` become their Choi states on system ⊗ reference, and
//! the maximally entangled projector supplies the effect that recovers the action of each channel.

use alloc::vec;

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::ontomodel::{MeasSpec, PrepSpec, Scenario, ScenarioSpec};
use crate::qcore::{choi_state, max_entangled, Channel, Effect, Measurement};
use crate::relations::poss_op_equiv;

pub const CHOI_A: &str = "choi_a";
pub const CHOI_B: &str = "choi_b";
pub const BELL: &str = "bell";

#[derive(Clone, Debug)]
pub struct TransReduction {
    pub scenario: Scenario,
    pub prep_a: &'static str,
    pub prep_b: &'static str,
    pub measurement: &'static str,
    /// Possibilistic equivalence of the two Choi preparations.
    pub equivalent: bool,
}

pub fn trans_to_prep_reduction(cha: &Channel, chb: &Channel, tol_kernel: f64) -> Result<TransReduction> {
    for ch in [cha, chb] {
        if ch.d_in() != ch.d_out() {
            return Err(Error::DimensionMismatch { expected: ch.d_in(), found: ch.d_out() });
        }
    }
    if cha.d_in() != chb.d_in() {
        return Err(Error::DimensionMismatch { expected: cha.d_in(), found: chb.d_in() });
    }
    let d = cha.d_in();
    let (ja, jb) = (choi_state(cha)?, choi_state(chb)?);
    let equivalent = poss_op_equiv(&ja, &jb, tol_kernel);
    let phi = ComplexMatrix::projector(&max_entangled(d));
    let rest = ComplexMatrix::identity(d * d).sub(&phi);
    let bell = Measurement::new(vec![Effect::new(phi)?, Effect::new(rest)?])?;
    let scenario = ScenarioSpec::new(d * d)
        .prep(PrepSpec::atomic(CHOI_A, ja))
        .prep(PrepSpec::atomic(CHOI_B, jb))
        .meas(MeasSpec::new(BELL, bell))
        .build()?;
    Ok(TransReduction { scenario, prep_a: CHOI_A, prep_b: CHOI_B, measurement: BELL, equivalent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relations::trans_poss_op_equiv;

    #[test]
    fn reduction_examples() {
        let (d3, d7) = (Channel::dephasing(0.3).unwrap(), Channel::dephasing(0.7).unwrap());
        assert!(trans_to_prep_reduction(&d3, &d7, 1e-9).unwrap().equivalent);
        let id = Channel::identity(2).unwrap();
        let dep = Channel::depolarizing(2, 1.0).unwrap();
        let r = trans_to_prep_reduction(&id, &dep, 1e-9).unwrap();
        assert!(!r.equivalent);
        assert_eq!(r.equivalent, trans_poss_op_equiv(&id, &dep, 1e-9));
        assert!(trans_to_prep_reduction(&id, &id, 1e-9).unwrap().equivalent);
        // The identity's Choi state is the Bell state itself.
        assert!((r.scenario.probability(CHOI_A, None, BELL, 0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let a = Channel::identity(2).unwrap();
        let b = Channel::identity(3).unwrap();
        assert!(trans_to_prep_reduction(&a, &b, 1e-9).is_err());
    }
}
