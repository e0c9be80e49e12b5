//! Constructive arguments run as algorithms on concrete scenarios and models.
//!
//! * [`hardy`]: the same-kernel decomposition `rho0 = (1 - w) sigma0 + w rho1`, the support
//!   closure it implies under Hardy noncontextuality, and the analogous effect decomposition.
//! * [`thm2`]: the four-state qubit scenario on which no reproducing model is possibilistically
//!   preparation noncontextual, and a step-by-step replay of that argument on a given model.
//! * [`pbr`]: the antidistinguishability bound, antidistinguishing product-state PVMs (explicit for
//!   two copies, numerical search otherwise) and the support-disjointness chain for faithful models.
//! * [`reduction`]: channels to Choi preparations with a Bell-state effect.

use alloc::string::String;
use alloc::vec::Vec;

pub mod hardy;
pub mod pbr;
pub mod reduction;
pub mod thm2;

pub use hardy::{
    effect_decomposition, hardy_decomposition, thm1_scenario, thm1_support_closure, EffectDecomposition,
    HardyDecomposition, Thm1Ids, Thm1Report,
};
pub use pbr::{
    pbr_bound, pbr_copy_condition, pbr_pvm_canonical, pbr_pvm_search, product_states, thm3_disjointness,
    thm3_overlap_fixture, thm3_scenario, verify_antidistinguishing, AntidistinguishingPVM, SearchOptions, Thm3Layout, Thm3Report,
};
pub use reduction::{trans_to_prep_reduction, TransReduction};
pub use thm2::{thm2_check, thm2_model_fixture, thm2_scenario, ContradictionReport, Thm2Step};

/// One step of an audit chain.
#[derive(Clone, Debug, PartialEq)]
pub struct Fact {
    pub fact: String,
    pub rule: String,
    pub refs: Vec<String>,
    pub holds: bool,
}

impl Fact {
    pub(crate) fn new(fact: impl Into<String>, rule: &str, refs: &[&str], holds: bool) -> Self {
        Self {
            fact: fact.into(),
            rule: rule.into(),
            refs: refs.iter().map(|s| String::from(*s)).collect(),
            holds,
        }
    }
}

pub(crate) fn set_string(labels: &[String], set: &crate::ontomodel::SupportSet) -> String {
    let names: Vec<&str> = set.indices().into_iter().map(|i| labels[i].as_str()).collect();
    let mut s = String::from("{");
    s.push_str(&names.join(", "));
    s.push('}');
    s
}
