//! Prints one PASS/FAIL line per acceptance criterion and exits nonzero if any fails.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use nonctx_core::constructions::{
    effect_decomposition, hardy_decomposition, pbr_bound, pbr_pvm_canonical, thm2_scenario, thm3_disjointness,
    thm3_overlap_fixture, thm3_scenario, trans_to_prep_reduction, verify_antidistinguishing,
};
use nonctx_core::feasibility::{
    chsh_scenario, hardy_table, poss_nc_feasible, possibility_table, prob_nc_feasible_deterministic, Flag,
    LpOptions, PossOptions, Status,
};
use nonctx_core::linalg::{c64, eigh, ComplexMatrix};
use nonctx_core::ontomodel::{beltrametti_bugajski, epsilon_bb_model, PrepSpec, Scenario, ScenarioSpec};
use nonctx_core::qcore::{bloch_state, Channel, DensityMatrix};
use nonctx_core::random;
use nonctx_core::relations::{
    check_assumption, poss_op_equiv, prob_op_equiv, trans_poss_op_equiv, Assumption, CheckOptions, Target,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn criterion1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_eig, mut worst_tr, mut worst_rec) = (0.0f64, 0.0f64, 0.0f64);
    let mut count = 0;
    for d in 2..=4 {
        for _ in 0..200 {
            let rank = rng.random_range(1..=d);
            let (r0, r1) = random::same_kernel_pair(&mut rng, d, rank);
            let dec = hardy_decomposition(&r0, &r1, 1e-9).map_err(|e| format!("d={d} rank={rank}: {e}"))?;
            let s = dec.sigma0.matrix();
            worst_eig = worst_eig.max(-eigh(s).min_value());
            worst_tr = worst_tr.max((s.trace().re - 1.0).abs());
            let rec = s.affine(1.0 - dec.weight, r1.matrix(), dec.weight);
            worst_rec = worst_rec.max(rec.max_abs_diff(r0.matrix()));
            count += 1;
        }
    }
    ensure(worst_eig <= 1e-9 && worst_tr <= 1e-9 && worst_rec <= 1e-9, || {
        format!("-min eig {worst_eig:.2e}, trace error {worst_tr:.2e}, reconstruction {worst_rec:.2e}")
    })?;
    for d in 2..=4 {
        for rank in 1..=d {
            let u = random::unitary(&mut rng, d);
            let flat = DensityMatrix::new(
                u.matmul(&ComplexMatrix::diag(&(0..d).map(|i| if i < rank { 1.0 / rank as f64 } else { 0.0 }).collect::<Vec<_>>()))
                    .matmul(&u.adjoint()),
            )
            .map_err(|e| e.to_string())?;
            let dec = hardy_decomposition(&flat, &flat, 1e-9).map_err(|e| e.to_string())?;
            ensure(dec.weight == 1.0 && dec.degenerate, || format!("flat d={d} rank={rank}: w = {}", dec.weight))?;
        }
    }
    let t = start.elapsed().as_secs_f64();
    ensure(t < 10.0, || format!("took {t:.2} s"))?;
    Ok(format!(
        "{count} pairs, -min eig {worst_eig:.1e}, trace err {worst_tr:.1e}, reconstruction {worst_rec:.1e}; flat pairs w = 1; {t:.2} s"
    ))
}

fn criterion2() -> Outcome {
    let mut notes = Vec::new();
    for (name, phi) in [("pi/6", PI / 6.0), ("pi/4", PI / 4.0), ("pi/3", PI / 3.0)] {
        let start = Instant::now();
        let table = possibility_table(&thm2_scenario(phi).map_err(|e| e.to_string())?, 1e-9, 1e-9)
            .map_err(|e| e.to_string())?;
        let opts = PossOptions::default();
        let res = poss_nc_feasible(&table, &opts).map_err(|e| e.to_string())?;
        ensure(res.status == Status::Unsat, || format!("phi={name}: expected UNSAT"))?;
        let cert = res.certificate.as_ref().ok_or("UNSAT without certificate")?;
        let replay = cert.replay(&table, &opts).map_err(|e| e.to_string())?;
        ensure(replay.unsatisfiable && replay.minimal && !cert.chain.is_empty(), || {
            format!("phi={name}: certificate replay {replay:?}")
        })?;
        let free = poss_nc_feasible(&table, &PossOptions::unconstrained()).map_err(|e| e.to_string())?;
        let model_ok = free.model.as_ref().is_some_and(|m| m.verify(&table, &PossOptions::unconstrained()));
        ensure(free.status == Status::Sat && model_ok, || format!("phi={name}: unconstrained search not SAT"))?;
        let t = start.elapsed().as_secs_f64();
        ensure(t < 10.0, || format!("phi={name} took {t:.2} s"))?;
        notes.push(format!("{name}: UNSAT ({} constraints, chain {}), free SAT, {t:.3} s", cert.constraints.len(), cert.chain.len()));
    }
    Ok(notes.join("; "))
}

fn criterion3() -> Outcome {
    ensure((pbr_bound(1) - 0.5).abs() <= 1e-12, || format!("pbr_bound(1) = {}", pbr_bound(1)))?;
    ensure((pbr_bound(2) - 0.7509).abs() <= 1e-3, || format!("pbr_bound(2) = {}", pbr_bound(2)))?;
    ensure((1..64).all(|n| pbr_bound(n + 1) >= pbr_bound(n)), || "bound not monotone".into())?;
    ensure(pbr_bound(50) >= 0.98, || format!("pbr_bound(50) = {}", pbr_bound(50)))?;
    let zero = vec![c64(1.0, 0.0), c64(0.0, 0.0)];
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let plus = vec![c64(h, 0.0), c64(h, 0.0)];
    let pvm = pbr_pvm_canonical();
    let states = nonctx_core::constructions::product_states(&zero, &plus, 2);
    ensure(verify_antidistinguishing(&pvm, &states, 1e-9), || "canonical PVM fails verification".into())?;
    let opts = CheckOptions::default();
    let (s, layout) = thm3_scenario(&zero, &plus, &pvm, true).map_err(|e| e.to_string())?;
    let bb = beltrametti_bugajski(&s).map_err(|e| e.to_string())?;
    let rep = thm3_disjointness(&bb, &s, &layout, &opts).map_err(|e| e.to_string())?;
    ensure(rep.disjoint() && rep.in_scope, || format!("BB intersection {:?}", rep.intersection))?;
    let (s, layout) = thm3_scenario(&zero, &plus, &pvm, false).map_err(|e| e.to_string())?;
    let fixture = thm3_overlap_fixture(&s, &layout, 1e-10).map_err(|e| e.to_string())?;
    let rep = thm3_disjointness(&fixture, &s, &layout, &opts).map_err(|e| e.to_string())?;
    let (lambda, nu) = rep.contradiction.clone().ok_or("fixture: no contradiction located")?;
    ensure(rep.intersection == vec![lambda.clone()], || format!("fixture intersection {:?}", rep.intersection))?;
    Ok(format!(
        "bound(1) = {:.12}, bound(2) = {:.6}, bound(50) = {:.6}; canonical PVM verified; BB disjoint; fixture clash at {lambda} in R∩T for nu = {nu}",
        pbr_bound(1),
        pbr_bound(2),
        pbr_bound(50)
    ))
}

fn criterion4() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut scenarios: Vec<(String, Scenario)> = (0..3)
        .map(|i| {
            let n_preps = rng.random_range(2..=4);
            let n_meas = rng.random_range(1..=3);
            (format!("random{i}"), common::random_pure_scenario(&mut rng, n_preps, n_meas))
        })
        .collect();
    scenarios.push(("thm2(pi/4)".into(), thm2_scenario(PI / 4.0).map_err(|e| e.to_string())?));
    let mut worst_repro = 0.0f64;
    let mut worst_dev = Vec::new();
    for eps in [0.1, 0.01] {
        let mut dev_eps = 0.0f64;
        for (name, s) in &scenarios {
            let (smoothed, model) = epsilon_bb_model(s, eps).map_err(|e| format!("{name}: {e}"))?;
            let rep = model.reproduces(&smoothed, 1e-9).map_err(|e| e.to_string())?;
            worst_repro = worst_repro.max(rep.worst_deviation);
            ensure(rep.ok, || format!("{name}, eps={eps}: smoothed deviation {:.2e}", rep.worst_deviation))?;
            for row in s.rows() {
                for (k, p) in row.probs.iter().enumerate() {
                    let q = model.predict(&row.prep, row.trans.as_deref(), &row.meas, k).map_err(|e| e.to_string())?;
                    dev_eps = dev_eps.max((q - p).abs());
                }
            }
            let report = check_assumption(&model, &smoothed, &Assumption::poss(&Target::ALL), &CheckOptions::default())
                .map_err(|e| e.to_string())?;
            ensure(report.holds(), || format!("{name}, eps={eps}: {} violations", report.violations.len()))?;
        }
        ensure(dev_eps <= eps, || format!("eps={eps}: deviation from the unsmoothed table {dev_eps}"))?;
        worst_dev.push(format!("{dev_eps:.4} <= {eps}"));
    }
    let t = start.elapsed().as_secs_f64();
    ensure(t < 5.0, || format!("took {t:.2} s"))?;
    Ok(format!(
        "{} scenarios, smoothed deviation {worst_repro:.1e}, unsmoothed deviation {}; (Poss,Poss) holds on all targets; {t:.2} s",
        scenarios.len(),
        worst_dev.join(", ")
    ))
}

fn criterion5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let d = rng.random_range(2..=3);
        let rank = rng.random_range(1..=d);
        let u = random::unitary(&mut rng, d);
        let e1 = random::effect_on_support(&mut rng, &u, rank, 0.05, 0.95);
        let e2 = random::effect_on_support(&mut rng, &u, rank, 0.05, 0.95);
        let dec = effect_decomposition(&e1, &e2, 1e-9).map_err(|e| format!("pair {i}: {e}"))?;
        let e3 = dec.e3.matrix();
        let spec = eigh(e3);
        ensure(spec.min_value() >= -1e-9 && spec.max_value() <= 1.0 + 1e-9, || format!("pair {i}: E3 not an effect"))?;
        let rec = e2.matrix().affine(dec.a, e3, 1.0 - dec.a);
        worst = worst.max(rec.max_abs_diff(e1.matrix()));
    }
    ensure(worst <= 1e-9, || format!("effect reconstruction error {worst:.2e}"))?;

    let mut pairs: Vec<(Channel, Channel)> = vec![
        (Channel::dephasing(0.3).map_err(|e| e.to_string())?, Channel::dephasing(0.7).map_err(|e| e.to_string())?),
        (Channel::identity(2).map_err(|e| e.to_string())?, Channel::depolarizing(2, 1.0).map_err(|e| e.to_string())?),
    ];
    while pairs.len() < 50 {
        let d = rng.random_range(2..=3);
        let ka = rng.random_range(1..=d * d);
        let kb = rng.random_range(1..=d * d);
        pairs.push((random::channel(&mut rng, d, d, ka), random::channel(&mut rng, d, d, kb)));
    }
    let mut equivalent = 0;
    for (i, (a, b)) in pairs.iter().enumerate() {
        let red = trans_to_prep_reduction(a, b, 1e-9).map_err(|e| e.to_string())?;
        let direct = trans_poss_op_equiv(a, b, 1e-9);
        ensure(red.equivalent == direct, || format!("channel pair {i}: reduction {} vs direct {direct}", red.equivalent))?;
        if i == 0 {
            ensure(direct, || "dephasing pair not equivalent".into())?;
        }
        if i == 1 {
            ensure(!direct, || "identity and depolarizing equivalent".into())?;
        }
        equivalent += usize::from(direct);
    }
    Ok(format!(
        "100 effect pairs, reconstruction {worst:.1e}; 50 channel pairs agree ({equivalent} equivalent)"
    ))
}

fn criterion6() -> Outcome {
    let chsh = chsh_scenario().map_err(|e| e.to_string())?;
    let lp = prob_nc_feasible_deterministic(&chsh, &LpOptions::default()).map_err(|e| e.to_string())?;
    let cert_ok = lp.certificate.as_ref().is_some_and(|c| c.verify(&lp.system));
    ensure(lp.status == Status::Unsat && cert_ok, || "CHSH not LP-UNSAT with a verified certificate".into())?;
    let table = possibility_table(&chsh, 1e-9, 1e-9).map_err(|e| e.to_string())?;
    let poss = poss_nc_feasible(&table, &PossOptions::default()).map_err(|e| e.to_string())?;
    ensure(poss.status == Status::Sat, || "CHSH possibilistically UNSAT".into())?;

    let pure = |t: f64| DensityMatrix::pure(&bloch_state(t));
    let bb_scenario = ScenarioSpec::new(2)
        .prep(PrepSpec::atomic("zero", pure(0.0).map_err(|e| e.to_string())?))
        .prep(PrepSpec::atomic("one", pure(PI).map_err(|e| e.to_string())?))
        .prep(PrepSpec::atomic("plus", pure(PI / 2.0).map_err(|e| e.to_string())?))
        .prep(PrepSpec::atomic("minus", pure(3.0 * PI / 2.0).map_err(|e| e.to_string())?))
        .prep(PrepSpec::mixture("mix_z", &[("zero", 0.5), ("one", 0.5)]))
        .prep(PrepSpec::mixture("mix_x", &[("plus", 0.5), ("minus", 0.5)]))
        .build()
        .map_err(|e| e.to_string())?;
    let bb = beltrametti_bugajski(&bb_scenario).map_err(|e| e.to_string())?;
    let rep = check_assumption(&bb, &bb_scenario, &Assumption::prob(&[Target::Preparations]), &CheckOptions::default())
        .map_err(|e| e.to_string())?;
    ensure(!rep.holds(), || "BB satisfies (Prob,Prob) on preparations".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut prob_pairs, mut poss_only) = (0, 0);
    for i in 0..500 {
        let d = rng.random_range(2..=3);
        let (ra, rb) = (rng.random_range(1..=d), rng.random_range(1..=d));
        let (a, b) = if i % 2 == 0 {
            let a = random::density_of_rank(&mut rng, d, ra);
            let b = DensityMatrix::new(a.eigen().reconstruct_with(|x| x).hermitian_part()).map_err(|e| e.to_string())?;
            (a, b)
        } else if i % 4 == 1 {
            random::same_kernel_pair(&mut rng, d, ra)
        } else {
            (random::density_of_rank(&mut rng, d, ra), random::density_of_rank(&mut rng, d, rb))
        };
        let prob = prob_op_equiv(&a, &b, 1e-9);
        let poss = poss_op_equiv(&a, &b, 1e-9);
        ensure(!prob || poss, || format!("pair {i}: ProbOp without PossOp"))?;
        prob_pairs += usize::from(prob);
        poss_only += usize::from(poss && !prob);
    }
    ensure(prob_pairs >= 250, || format!("only {prob_pairs} ProbOp pairs"))?;

    let hardy = hardy_table().map_err(|e| e.to_string())?;
    let opts = PossOptions::default();
    ensure(poss_nc_feasible(&hardy, &opts).map_err(|e| e.to_string())?.status == Status::Unsat, || "Hardy table SAT".into())?;
    let zeros = hardy.impossible_entries();
    for (p, m, k) in &zeros {
        let mut t = hardy.clone();
        t.context_mut(p, m).ok_or("missing context")?.flags[*k] = Flag::Unconstrained;
        let r = poss_nc_feasible(&t, &opts).map_err(|e| e.to_string())?;
        ensure(r.status == Status::Sat, || format!("dropping {m}[{k}] for {p} leaves UNSAT"))?;
    }
    Ok(format!(
        "CHSH LP-UNSAT (certificate verified) and poss-SAT; BB {} (Prob,Prob) violations; 500 pairs: {prob_pairs} ProbOp, {poss_only} PossOp only; Hardy UNSAT, each of {} zeros dropped gives SAT",
        rep.violations.len(),
        zeros.len()
    ))
}

fn criterion7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let opts = PossOptions::default();
    let (mut matches, mut sat) = (0, 0);
    let mut mismatches = Vec::new();
    for i in 0..100 {
        let table = common::random_poss_table(&mut rng);
        table.validate().map_err(|e| format!("table {i}: {e}"))?;
        let res = poss_nc_feasible(&table, &opts).map_err(|e| e.to_string())?;
        let brute = common::brute_force_poss(&table, true, true, 4);
        if (res.status == Status::Sat) == brute {
            matches += 1;
        } else {
            mismatches.push(i);
        }
        sat += usize::from(brute);
    }
    ensure(mismatches.is_empty(), || format!("{matches}/100 match; mismatching tables {mismatches:?}"))?;
    Ok(format!("100/100 verdicts match ({sat} SAT, {} UNSAT)", 100 - sat))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("decomposition of same-kernel pairs", criterion1),
        ("possibilistic UNSAT certificate", criterion2),
        ("bound, PVM and disjointness chain", criterion3),
        ("smoothed model", criterion4),
        ("effect decomposition and channel reduction", criterion5),
        ("strict-weakness separations", criterion6),
        ("oracle equivalence", criterion7),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {detail}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

