//! Antidistinguishability of product states and the support-disjointness chain for faithful
//! models.
//!
//! Product indices `nu ∈ {a,b}^N` are encoded as integers, most significant qubit first, with bit
//! value 0 for `a` and 1 for `b`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{set_string, Fact};
use crate::error::{Error, Result};
use crate::linalg::{c64, expi_hermitian, inner, kron_vec, nearest_unitary, normalized, solve_real, ComplexMatrix, C64};
use crate::ontomodel::{
    response_sets, MeasSpec, OnticSpace, OntologicalModel, PrepSpec, PreparationMeasure, ResponseFunction, Scenario,
    ScenarioSpec, SupportSet,
};
use crate::qcore::{born_probability, squared_overlap, DensityMatrix, Effect, Measurement, MAX_DIM};
use crate::relations::CheckOptions;

/// Largest `|<psi1|psi2>|^2` covered by the disjointness theorem for `N` qubit copies,
/// `cos^{2N}(2 atan(2^{1/(2N)} - 1))`.
pub fn pbr_bound(n: u32) -> f64 {
    let n = n.max(1) as f64;
    let theta = 2.0 * libm::atan(libm::pow(2.0, 1.0 / (2.0 * n)) - 1.0);
    libm::pow(libm::cos(theta), 2.0 * n)
}

/// Largest single-copy `|<a|b>|^2` for which an `N`-copy antidistinguishing product PVM is known
/// to exist, `cos^2(2 atan(2^{1/N} - 1))`.
pub fn pbr_copy_condition(n: u32) -> f64 {
    let n = n.max(1) as f64;
    let theta = 2.0 * libm::atan(libm::pow(2.0, 1.0 / n) - 1.0);
    let c = libm::cos(theta);
    c * c
}

/// Rank-one projectors indexed by `nu`, acting on `N` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct AntidistinguishingPVM {
    pub n: usize,
    pub projectors: Vec<ComplexMatrix>,
}

impl AntidistinguishingPVM {
    pub fn from_vectors(n: usize, vectors: &[Vec<C64>]) -> Result<Self> {
        let d = 1usize << n;
        if vectors.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: vectors.len() });
        }
        let projectors = vectors
            .iter()
            .map(|v| {
                if v.len() != d {
                    return Err(Error::DimensionMismatch { expected: d, found: v.len() });
                }
                let u = normalized(v).ok_or_else(|| Error::InvalidArgument("zero vector".into()))?;
                Ok(ComplexMatrix::projector(&u))
            })
            .collect::<Result<_>>()?;
        Ok(Self { n, projectors })
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn measurement(&self) -> Result<Measurement> {
        Measurement::new(self.projectors.iter().map(|p| Effect::new(p.clone())).collect::<Result<_>>()?)
    }

    /// Unit vector spanning each projector, phase fixed so its largest entry is real positive.
    pub fn vectors(&self) -> Vec<Vec<C64>> {
        self.projectors
            .iter()
            .map(|p| {
                let d = p.rows();
                let j = (0..d).max_by(|&a, &b| p[(a, a)].re.total_cmp(&p[(b, b)].re)).unwrap_or(0);
                let scale = 1.0 / libm::sqrt(p[(j, j)].re.max(1e-300));
                (0..d).map(|i| p[(i, j)] * scale).collect()
            })
            .collect()
    }
}

fn orthogonal_qubit(v: &[C64]) -> Vec<C64> {
    vec![-v[1].conj(), v[0].conj()]
}

fn check_qubit(v: &[C64], name: &str) -> Result<Vec<C64>> {
    if v.len() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: v.len() });
    }
    normalized(v).ok_or_else(|| Error::InvalidArgument(format!("{name} is the zero vector")))
}

/// All `|nu> = ⊗_i |nu_i>` in index order.
pub fn product_states(a: &[C64], b: &[C64], n: usize) -> Vec<Vec<C64>> {
    (0..1usize << n)
        .map(|nu| {
            let mut v = vec![c64(1.0, 0.0)];
            for q in (0..n).rev() {
                v = kron_vec(&v, if (nu >> q) & 1 == 0 { a } else { b });
            }
            v
        })
        .collect()
}

pub fn nu_label(nu: usize, n: usize) -> String {
    (0..n).rev().map(|q| if (nu >> q) & 1 == 0 { 'a' } else { 'b' }).collect()
}

/// The explicit two-copy measurement for `|a> = |0>`, `|b> = |+>`.
pub fn pbr_pvm_canonical() -> AntidistinguishingPVM {
    let h = core::f64::consts::FRAC_1_SQRT_2;
    let zero = [c64(1.0, 0.0), c64(0.0, 0.0)];
    let one = [c64(0.0, 0.0), c64(1.0, 0.0)];
    let plus = [c64(h, 0.0), c64(h, 0.0)];
    let minus = [c64(h, 0.0), c64(-h, 0.0)];
    let pair = |x: &[C64], y: &[C64], z: &[C64], w: &[C64]| -> Vec<C64> {
        kron_vec(x, y).iter().zip(kron_vec(z, w)).map(|(p, q)| (p + q) * h).collect()
    };
    let vectors = [
        pair(&zero, &one, &one, &zero),
        pair(&zero, &minus, &one, &plus),
        pair(&plus, &one, &minus, &zero),
        pair(&plus, &minus, &minus, &plus),
    ];
    AntidistinguishingPVM::from_vectors(2, &vectors).expect("canonical vectors are well formed")
}

/// Completeness, rank one, and `<nu| Pi_nu |nu> <= tol` for every listed state.
pub fn verify_antidistinguishing(pvm: &AntidistinguishingPVM, states: &[Vec<C64>], tol: f64) -> bool {
    let d = pvm.dim();
    if pvm.projectors.len() != states.len() || states.iter().any(|s| s.len() != d) {
        return false;
    }
    let mut sum = ComplexMatrix::zeros(d, d);
    for p in &pvm.projectors {
        if p.rows() != d || !p.is_square() || !p.is_hermitian(tol) {
            return false;
        }
        if (p.trace().re - 1.0).abs() > tol || p.matmul(p).max_abs_diff(p) > tol {
            return false;
        }
        sum = sum.add(p);
    }
    if sum.max_abs_diff(&ComplexMatrix::identity(d)) > tol {
        return false;
    }
    pvm.projectors.iter().zip(states).all(|(p, s)| {
        let u = match normalized(s) {
            Some(u) => u,
            None => return false,
        };
        inner(&u, &p.mat_vec(&u)).re.abs() <= tol
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchOptions {
    pub max_iters: usize,
    pub restarts: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { max_iters: 500, restarts: 16, seed: 0, tol: 1e-9 }
    }
}

fn residuals(u: &ComplexMatrix, states: &[Vec<C64>]) -> Vec<C64> {
    states.iter().enumerate().map(|(j, s)| inner(s, &u.column(j))).collect()
}

fn max_residual(r: &[C64]) -> f64 {
    r.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Damped Gauss-Newton on `U exp(i H)` driving `<nu_j| U e_j>` to zero.
fn polish(mut u: ComplexMatrix, states: &[Vec<C64>], steps: usize) -> ComplexMatrix {
    let d = u.rows();
    for _ in 0..steps {
        let r = residuals(&u, states);
        if max_residual(&r) < 1e-15 {
            break;
        }
        // w[j][l] = <nu_j| U e_l>
        let w: Vec<Vec<C64>> = states.iter().map(|s| (0..d).map(|l| inner(s, &u.column(l))).collect()).collect();
        // Generators: E_kk, E_kl + E_lk, -i E_kl + i E_lk (k < l).
        let mut gens: Vec<(usize, usize, C64)> = Vec::with_capacity(d * d);
        for k in 0..d {
            gens.push((k, k, c64(1.0, 0.0)));
            for l in k + 1..d {
                gens.push((k, l, c64(1.0, 0.0)));
                gens.push((k, l, c64(0.0, -1.0)));
            }
        }
        let i = c64(0.0, 1.0);
        // Row 2j is Re r_j, row 2j+1 is Im r_j.
        let mut jac = vec![vec![0.0; gens.len()]; 2 * d];
        for (g, &(k, l, z)) in gens.iter().enumerate() {
            // G[k][l] = z, G[l][k] = conj z; derivative of r_j is i * sum_m w[j][m] G[m][j].
            let mut touch = |j: usize, val: C64| {
                let dv = i * val;
                jac[2 * j][g] += dv.re;
                jac[2 * j + 1][g] += dv.im;
            };
            if k == l {
                touch(k, w[k][k] * z);
            } else {
                touch(l, w[l][k] * z);
                touch(k, w[k][l] * z.conj());
            }
        }
        let rv: Vec<f64> = r.iter().flat_map(|z| [z.re, z.im]).collect();
        let damping = 1e-12;
        let jjt: Vec<Vec<f64>> = (0..2 * d)
            .map(|a| {
                (0..2 * d)
                    .map(|b| {
                        let s: f64 = jac[a].iter().zip(&jac[b]).map(|(x, y)| x * y).sum();
                        if a == b { s + damping } else { s }
                    })
                    .collect()
            })
            .collect();
        let y = match solve_real(jjt, rv) {
            Some(y) => y,
            None => break,
        };
        let mut h = ComplexMatrix::zeros(d, d);
        for (g, &(k, l, z)) in gens.iter().enumerate() {
            let coef: f64 = -(0..2 * d).map(|a| jac[a][g] * y[a]).sum::<f64>();
            h[(k, l)] += z * coef;
            if k != l {
                h[(l, k)] += z.conj() * coef;
            }
        }
        u = u.matmul(&expi_hermitian(&h));
    }
    u
}

/// Seeded numerical search for a rank-one PVM with `<nu| Pi_nu |nu> = 0` for all `nu`.
///
/// Alternates between the per-column annihilation constraints and the nearest unitary, then
/// polishes with Gauss-Newton steps. Any returned PVM passes [`verify_antidistinguishing`] at
/// `opts.tol`; failure yields [`Error::NotFound`].
pub fn pbr_pvm_search(a: &[C64], b: &[C64], n: usize, opts: &SearchOptions) -> Result<AntidistinguishingPVM> {
    let a = check_qubit(a, "a")?;
    let b = check_qubit(b, "b")?;
    if n == 0 || (1usize << n.min(usize::BITS as usize - 1)) > MAX_DIM {
        return Err(Error::DimensionTooLarge(1usize << n.min(usize::BITS as usize - 1)));
    }
    let states = product_states(&a, &b, n);
    let d = states.len();
    let mut best = f64::INFINITY;
    let mut total = 0usize;
    for restart in 0..opts.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(restart as u64));
        let mut u = crate::random::unitary(&mut rng, d);
        for _ in 0..opts.max_iters {
            total += 1;
            let mut w = u.clone();
            for (j, s) in states.iter().enumerate() {
                let col = w.column(j);
                let p = inner(s, &col);
                let proj: Vec<C64> = col.iter().zip(s).map(|(c, si)| c - p * si).collect();
                w.set_column(j, &proj);
            }
            u = match nearest_unitary(&w) {
                Some(v) => v,
                None => break,
            };
            if max_residual(&residuals(&u, &states)) < 1e-12 {
                break;
            }
        }
        u = polish(u, &states, 200);
        let res = max_residual(&residuals(&u, &states));
        best = best.min(res);
        let vectors: Vec<Vec<C64>> = (0..d).map(|j| u.column(j)).collect();
        let pvm = AntidistinguishingPVM::from_vectors(n, &vectors)?;
        if verify_antidistinguishing(&pvm, &states, opts.tol) {
            return Ok(pvm);
        }
    }
    Err(Error::NotFound { iterations: total, residual: best })
}

/// Identifiers of the preparations and measurements built by [`thm3_scenario`].
#[derive(Clone, Debug, PartialEq)]
pub struct Thm3Layout {
    pub n: usize,
    pub psi1: String,
    pub psi2: String,
    /// Product measurement for each `nu`; outcome 0 is `|nu><nu|`.
    pub nu_measurements: Vec<String>,
    pub pvm_measurement: String,
    /// Joint context `{|nu><nu|, Pi_nu, rest}` for each `nu`, if built.
    pub contexts: Vec<String>,
    pub overlap: f64,
}

/// Scenario with `psi1 = a^{⊗N}`, `psi2 = b^{⊗N}`, every local product measurement, the PVM and
/// optionally the joint contexts.
pub fn thm3_scenario(
    a: &[C64],
    b: &[C64],
    pvm: &AntidistinguishingPVM,
    include_joint_contexts: bool,
) -> Result<(Scenario, Thm3Layout)> {
    let a = check_qubit(a, "a")?;
    let b = check_qubit(b, "b")?;
    let n = pvm.n;
    let d = pvm.dim();
    if d > MAX_DIM {
        return Err(Error::DimensionTooLarge(d));
    }
    let states = product_states(&a, &b, n);
    let mut spec = ScenarioSpec::new(d)
        .prep(PrepSpec::atomic("psi1", DensityMatrix::pure(&states[0])?))
        .prep(PrepSpec::atomic("psi2", DensityMatrix::pure(&states[d - 1])?))
        .local("a", Measurement::from_basis(&[a.clone(), orthogonal_qubit(&a)])?)
        .local("b", Measurement::from_basis(&[b.clone(), orthogonal_qubit(&b)])?);
    let mut nu_measurements = Vec::with_capacity(d);
    for nu in 0..d {
        let label = nu_label(nu, n);
        let parts: Vec<&str> = label.chars().map(|c| if c == 'a' { "a" } else { "b" }).collect();
        let id = format!("M_{label}");
        spec = spec.meas(MeasSpec::product(&id, &parts));
        nu_measurements.push(id);
    }
    spec = spec.meas(MeasSpec::new("pvm", pvm.measurement()?));
    let mut contexts = Vec::new();
    if include_joint_contexts {
        for (nu, pi) in pvm.projectors.iter().enumerate() {
            let p = ComplexMatrix::projector(&states[nu]);
            let rest = ComplexMatrix::identity(d).sub(&p).sub(pi);
            let m = Measurement::new(vec![Effect::new(p)?, Effect::new(pi.clone())?, Effect::new(rest)?])?;
            let id = format!("C_{}", nu_label(nu, n));
            spec = spec.meas(MeasSpec::new(&id, m));
            contexts.push(id);
        }
    }
    let overlap = squared_overlap(&states[0], &states[d - 1]);
    let layout = Thm3Layout {
        n,
        psi1: "psi1".into(),
        psi2: "psi2".into(),
        nu_measurements,
        pvm_measurement: "pvm".into(),
        contexts,
        overlap,
    };
    Ok((spec.build()?, layout))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Thm3Report {
    pub overlap: f64,
    pub bound: f64,
    /// `overlap <= bound`; outside this range a nonempty intersection is no contradiction.
    pub in_scope: bool,
    pub intersection: Vec<String>,
    pub chain: Vec<Fact>,
    /// Ontic state and `nu` where `R(|nu><nu|) ∩ T(Pi_nu)` is nonempty.
    pub contradiction: Option<(String, String)>,
}

impl Thm3Report {
    pub fn disjoint(&self) -> bool {
        self.intersection.is_empty()
    }
}

/// Replays the disjointness chain `I ⊆ ∩ R_nu`, `R_nu ∩ T_nu = ∅`, `∪ T_nu = Λ` on `model`.
pub fn thm3_disjointness(
    model: &OntologicalModel,
    scenario: &Scenario,
    layout: &Thm3Layout,
    opts: &CheckOptions,
) -> Result<Thm3Report> {
    let rep = model.reproduces(scenario, opts.tol_repro)?;
    if !rep.ok {
        return Err(Error::NotReproducing(format!(
            "worst deviation {} at {:?}",
            rep.worst_deviation, rep.worst_entry
        )));
    }
    let faith = model.is_faithful(scenario, opts.tol_op)?;
    if !faith.faithful {
        let ((m1, k1), (m2, k2)) = faith.offending.unwrap_or_default();
        return Err(Error::Unfaithful(format!("equal effects {m1}[{k1}] and {m2}[{k2}] have different R/T sets")));
    }
    let labels = model.space.labels();
    let size = model.size();
    let n = layout.n;
    let bound = pbr_bound(n as u32);
    let overlap = layout.overlap;
    let in_scope = overlap <= bound + 1e-12;
    let inter = model.support(&layout.psi1)?.intersection(&model.support(&layout.psi2)?);
    let mut chain = vec![Fact::new(
        format!("I = S(psi1) ∩ S(psi2) = {}", set_string(labels, &inter)),
        "support intersection",
        &[&layout.psi1, &layout.psi2],
        true,
    )];

    let mut all_r = SupportSet::full(size);
    let mut r_sets = Vec::with_capacity(layout.nu_measurements.len());
    for id in &layout.nu_measurements {
        let (r, _) = response_sets(model.response(id)?, 0, opts.tol_ont);
        all_r = all_r.intersection(&r);
        r_sets.push(r);
    }
    chain.push(Fact::new(
        format!("I ⊆ ∩_nu R(|nu><nu|) = {}", set_string(labels, &all_r)),
        "only |nu> is possible for both psi1 and psi2 in product measurement nu",
        &[&layout.psi1, &layout.psi2],
        inter.is_subset(&all_r),
    ));

    let pvm_xi = model.response(&layout.pvm_measurement)?;
    let mut contradiction = None;
    let mut union_t = SupportSet::empty(size);
    for (nu, r) in r_sets.iter().enumerate() {
        let (_, t) = response_sets(pvm_xi, nu, opts.tol_ont);
        union_t = union_t.union(&t);
        let clash = r.intersection(&t);
        if let Some(&l) = clash.indices().first() {
            if contradiction.is_none() {
                contradiction = Some((labels[l].clone(), nu_label(nu, n)));
            }
        }
    }
    let rt_holds = contradiction.is_none();
    chain.push(Fact::new(
        match &contradiction {
            Some((l, nu)) => format!(
                "R(|{nu}><{nu}|) ∩ T(Pi_{nu}) contains {l}: certain |{nu}> yet Pi_{nu} possible in a joint context"
            ),
            None => "R(|nu><nu|) ∩ T(Pi_nu) = ∅ for every nu".to_string(),
        },
        "faithfulness and the context {|nu><nu|, Pi_nu, rest}",
        &[&layout.pvm_measurement],
        rt_holds,
    ));
    let covers = union_t.len() == size;
    chain.push(Fact::new(
        format!("∪_nu T(Pi_nu) = {}", set_string(labels, &union_t)),
        "some PVM outcome occurs for every ontic state",
        &[&layout.pvm_measurement],
        covers,
    ));
    chain.push(Fact::new(
        format!("I ⊆ [∩ R] ∩ [∪ T] = ∅; observed I = {}", set_string(labels, &inter)),
        "combine the inclusions",
        &[&layout.psi1, &layout.psi2],
        inter.is_empty(),
    ));
    Ok(Thm3Report {
        overlap,
        bound,
        in_scope,
        intersection: inter.indices().into_iter().map(|i| labels[i].clone()).collect(),
        chain,
        contradiction,
    })
}

/// Model on `{psi1, psi2, lambda*}` in which both states put weight `delta` on `lambda*`, where
/// every product measurement answers outcome 0 with certainty and the PVM answers uniformly.
/// Reproduces the scenario up to `delta` and is faithful, so its supports overlap.
pub fn thm3_overlap_fixture(scenario: &Scenario, layout: &Thm3Layout, delta: f64) -> Result<OntologicalModel> {
    let labels = vec![layout.psi1.clone(), layout.psi2.clone(), "lambda*".to_string()];
    let psi = [&scenario.prep(&layout.psi1)?.density, &scenario.prep(&layout.psi2)?.density];
    let mut model = OntologicalModel::new(OnticSpace::new(labels)?)
        .with_prep(&layout.psi1, PreparationMeasure::new(vec![1.0 - delta, 0.0, delta])?)
        .with_prep(&layout.psi2, PreparationMeasure::new(vec![0.0, 1.0 - delta, delta])?);
    for m in scenario.measurements() {
        let k = m.measurement.len();
        let mut table = Vec::new();
        for rho in psi {
            table.push(m.measurement.effects().iter().map(|e| born_probability(rho, e)).collect::<Result<Vec<f64>>>()?);
        }
        if m.id == layout.pvm_measurement {
            table.push(vec![1.0 / k as f64; k]);
        } else {
            let mut row = vec![0.0; k];
            row[0] = 1.0;
            table.push(row);
        }
        model = model.with_response(&m.id, ResponseFunction::new(table)?);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontomodel::beltrametti_bugajski;

    fn zero() -> Vec<C64> {
        vec![c64(1.0, 0.0), c64(0.0, 0.0)]
    }

    fn plus() -> Vec<C64> {
        let h = core::f64::consts::FRAC_1_SQRT_2;
        vec![c64(h, 0.0), c64(h, 0.0)]
    }

    #[test]
    fn bound_values() {
        assert!((pbr_bound(1) - 0.5).abs() < 1e-12);
        assert!((pbr_bound(2) - 0.7509).abs() < 1e-3);
        assert!(pbr_bound(50) >= 0.98);
        for n in 1..64 {
            assert!(pbr_bound(n + 1) > pbr_bound(n));
        }
        assert!(pbr_copy_condition(1).abs() < 1e-15);
        assert!((pbr_copy_condition(2) - 0.5).abs() < 1e-12);
        assert!((squared_overlap(&zero(), &plus()) - pbr_bound(1)).abs() < 1e-12);
    }

    #[test]
    fn canonical_pvm_annihilates_products() {
        let pvm = pbr_pvm_canonical();
        let states = product_states(&zero(), &plus(), 2);
        assert!(verify_antidistinguishing(&pvm, &states, 1e-9));
        for (p, s) in pvm.projectors.iter().zip(&states) {
            assert!(inner(s, &p.mat_vec(s)).re.abs() <= 1e-9);
        }
        let mut swapped = pvm.clone();
        swapped.projectors.swap(0, 1);
        assert!(!verify_antidistinguishing(&swapped, &states, 1e-9));
    }

    #[test]
    fn orthogonal_single_copy() {
        let one = vec![c64(0.0, 0.0), c64(1.0, 0.0)];
        let pvm = pbr_pvm_search(&zero(), &one, 1, &SearchOptions::default()).unwrap();
        assert!(pvm.projectors[0].max_abs_diff(&ComplexMatrix::projector(&one)) < 1e-9);
        assert!(pvm.projectors[1].max_abs_diff(&ComplexMatrix::projector(&zero())) < 1e-9);
        let states = product_states(&zero(), &one, 1);
        assert!(verify_antidistinguishing(&pvm, &states, 1e-9));
    }

    #[test]
    fn search_two_copies() {
        let pvm = pbr_pvm_search(&zero(), &plus(), 2, &SearchOptions::default()).unwrap();
        let states = product_states(&zero(), &plus(), 2);
        assert!(verify_antidistinguishing(&pvm, &states, 1e-9));
        // The pair sits on the copy-condition boundary, where the solution is a degenerate root.
        let canonical = pbr_pvm_canonical();
        for (p, q) in pvm.projectors.iter().zip(&canonical.projectors) {
            assert!(p.max_abs_diff(q) < 1e-6);
        }
    }

    #[test]
    fn search_is_deterministic() {
        let opts = SearchOptions { seed: 7, ..SearchOptions::default() };
        let x = pbr_pvm_search(&zero(), &plus(), 2, &opts).unwrap();
        let y = pbr_pvm_search(&zero(), &plus(), 2, &opts).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn search_fails_above_copy_condition() {
        let t = 0.3f64;
        let b = vec![c64(libm::cos(t), 0.0), c64(libm::sin(t), 0.0)];
        assert!(squared_overlap(&zero(), &b) > pbr_bound(1));
        let opts = SearchOptions { max_iters: 100, restarts: 2, ..SearchOptions::default() };
        assert!(matches!(pbr_pvm_search(&zero(), &b, 1, &opts), Err(Error::NotFound { .. })));
    }

    #[test]
    fn bb_model_gives_empty_intersection() {
        let (s, layout) = thm3_scenario(&zero(), &plus(), &pbr_pvm_canonical(), true).unwrap();
        let bb = beltrametti_bugajski(&s).unwrap();
        let rep = thm3_disjointness(&bb, &s, &layout, &CheckOptions::default()).unwrap();
        assert!(rep.disjoint() && rep.in_scope);
        assert!(rep.chain.iter().all(|f| f.holds));
        assert!((rep.overlap - 0.25).abs() < 1e-12);
    }

    #[test]
    fn overlapping_fixture_pinpoints_clash() {
        let (s, layout) = thm3_scenario(&zero(), &plus(), &pbr_pvm_canonical(), false).unwrap();
        let model = thm3_overlap_fixture(&s, &layout, 1e-10).unwrap();
        let rep = thm3_disjointness(&model, &s, &layout, &CheckOptions::default()).unwrap();
        assert_eq!(rep.intersection, vec!["lambda*".to_string()]);
        assert!(rep.chain[1].holds);
        assert!(!rep.chain[2].holds);
        assert_eq!(rep.contradiction, Some(("lambda*".to_string(), "aa".to_string())));
    }

    #[test]
    fn non_reproducing_refused() {
        let (s, layout) = thm3_scenario(&zero(), &plus(), &pbr_pvm_canonical(), false).unwrap();
        let model = thm3_overlap_fixture(&s, &layout, 0.1).unwrap();
        assert!(matches!(
            thm3_disjointness(&model, &s, &layout, &CheckOptions::default()),
            Err(Error::NotReproducing(_))
        ));
    }

    #[test]
    fn identical_states_out_of_scope() {
        let (s, layout) = thm3_scenario(&zero(), &zero(), &pbr_pvm_canonical(), false).unwrap();
        let bb = beltrametti_bugajski(&s).unwrap();
        let rep = thm3_disjointness(&bb, &s, &layout, &CheckOptions::default()).unwrap();
        assert!(!rep.in_scope);
        assert_eq!(rep.intersection, vec!["psi1".to_string()]);
    }
}
