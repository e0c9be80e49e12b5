#![allow(dead_code)]

use nonctx_core::feasibility::{Context, Flag, PossibilityTable, TableMeasurement};
use nonctx_core::ontomodel::{MeasSpec, PrepSpec, Scenario, ScenarioSpec};
use nonctx_core::qcore::{DensityMatrix, Measurement};
use nonctx_core::random;
use rand::Rng;

/// Qubit scenario with `n_preps` random pure states, `n_meas` random bases and, when possible, a
/// mixture of the first two states.
pub fn random_pure_scenario<R: Rng>(rng: &mut R, n_preps: usize, n_meas: usize) -> Scenario {
    let mut spec = ScenarioSpec::new(2);
    for i in 0..n_preps {
        let v = random::pure_vector(rng, 2);
        spec = spec.prep(PrepSpec::atomic(&format!("p{i}"), DensityMatrix::pure(&v).unwrap()));
    }
    if n_preps >= 2 {
        let w = rng.random_range(0.1..0.9);
        spec = spec.prep(PrepSpec::mixture("mix", &[("p0", w), ("p1", 1.0 - w)]));
    }
    for j in 0..n_meas {
        let u = random::unitary(rng, 2);
        let m = Measurement::from_basis(&[u.column(0), u.column(1)]).unwrap();
        spec = spec.meas(MeasSpec::new(&format!("m{j}"), m));
    }
    spec.build().unwrap()
}

/// Random binary-outcome possibility table with up to three preparations (one possibly a
/// mixture) and up to two measurements.
pub fn random_poss_table<R: Rng>(rng: &mut R) -> PossibilityTable {
    let n_atomic = rng.random_range(1..=3usize);
    let atomic: Vec<String> = (0..n_atomic).map(|i| format!("p{i}")).collect();
    let mut mixtures = Vec::new();
    if n_atomic == 2 && rng.random_bool(0.5) {
        mixtures.push(("mix".to_string(), vec!["p0".to_string(), "p1".to_string()]));
    }
    let n_meas = rng.random_range(1..=2usize);
    let measurements: Vec<TableMeasurement> =
        (0..n_meas).map(|j| TableMeasurement { id: format!("m{j}"), outcomes: 2, parts: None }).collect();
    let preps: Vec<String> = atomic.iter().cloned().chain(mixtures.iter().map(|m| m.0.clone())).collect();
    let mut contexts = Vec::new();
    for p in &preps {
        for m in &measurements {
            let flags = match rng.random_range(0..4) {
                0 => vec![Flag::Impossible, Flag::Possible],
                1 => vec![Flag::Possible, Flag::Impossible],
                _ => vec![Flag::Possible, Flag::Possible],
            };
            contexts.push(Context { prep: p.clone(), meas: m.id.clone(), flags });
        }
    }
    let mut prep_classes = Vec::new();
    if preps.len() >= 2 && rng.random_bool(0.5) {
        let a = rng.random_range(0..preps.len());
        let b = (a + rng.random_range(1..preps.len())) % preps.len();
        prep_classes.push(vec![preps[a].clone(), preps[b].clone()]);
    }
    let mut effect_classes = Vec::new();
    if rng.random_bool(0.4) {
        let outs: Vec<(String, usize)> =
            measurements.iter().flat_map(|m| (0..2).map(move |k| (m.id.clone(), k))).collect();
        let a = rng.random_range(0..outs.len());
        let b = (a + rng.random_range(1..outs.len())) % outs.len();
        effect_classes.push(vec![outs[a].clone(), outs[b].clone()]);
    }
    PossibilityTable {
        atomic,
        mixtures,
        measurements,
        contexts,
        prep_classes,
        effect_classes,
        equal_effects: Vec::new(),
        tol_zero: 1e-9,
    }
}

/// Exhaustive search over models with at most `max_lambda` ontic states, for binary-outcome
/// tables without products or trichotomy. Returns whether some model fits.
pub fn brute_force_poss(table: &PossibilityTable, prep_nc: bool, meas_nc: bool, max_lambda: usize) -> bool {
    let na = table.atomic.len();
    let meas: Vec<&str> = table.measurements.iter().map(|m| m.id.as_str()).collect();
    let components = |p: &str| -> Vec<usize> {
        if let Some(i) = table.atomic.iter().position(|a| a == p) {
            return vec![i];
        }
        let (_, parts) = table.mixtures.iter().find(|(m, _)| m == p).expect("declared prep");
        parts.iter().map(|c| table.atomic.iter().position(|a| a == c).expect("atomic component")).collect()
    };
    let preps: Vec<String> = table.atomic.iter().cloned().chain(table.mixtures.iter().map(|m| m.0.clone())).collect();
    // Allowed patterns per binary measurement: {0}, {1}, {0,1}.
    let patterns = [[true, false], [false, true], [true, true]];
    let mut demands: Vec<(usize, Option<(usize, usize)>)> = Vec::new();
    for (pi, p) in preps.iter().enumerate() {
        demands.push((pi, None));
        for c in table.contexts.iter().filter(|c| c.prep == *p) {
            let mi = meas.iter().position(|m| *m == c.meas).unwrap();
            for (k, f) in c.flags.iter().enumerate() {
                if matches!(f, Flag::Possible | Flag::Certain) {
                    demands.push((pi, Some((mi, k))));
                }
            }
        }
    }
    let full: u64 = if demands.len() == 64 { u64::MAX } else { (1u64 << demands.len()) - 1 };
    let mut masks: Vec<u64> = Vec::new();
    let n_pat = patterns.len().pow(meas.len() as u32);
    for membership in 0..(1usize << na) {
        for pat in 0..n_pat {
            let allowed: Vec<[bool; 2]> =
                (0..meas.len()).map(|j| patterns[(pat / patterns.len().pow(j as u32)) % patterns.len()]).collect();
            let inside = |p: &str| components(p).iter().any(|&i| (membership >> i) & 1 == 1);
            let mut valid = true;
            for c in &table.contexts {
                let mi = meas.iter().position(|m| *m == c.meas).unwrap();
                for (k, f) in c.flags.iter().enumerate() {
                    if *f == Flag::Impossible && inside(&c.prep) && allowed[mi][k] {
                        valid = false;
                    }
                }
            }
            if prep_nc {
                for cl in &table.prep_classes {
                    if cl.iter().any(|p| inside(p) != inside(&cl[0])) {
                        valid = false;
                    }
                }
            }
            if meas_nc {
                for cl in &table.effect_classes {
                    let val = |(m, k): &(String, usize)| allowed[meas.iter().position(|x| x == m).unwrap()][*k];
                    if cl.iter().any(|o| val(o) != val(&cl[0])) {
                        valid = false;
                    }
                }
            }
            if !valid {
                continue;
            }
            let mut mask = 0u64;
            for (bit, (pi, entry)) in demands.iter().enumerate() {
                let ok = inside(&preps[*pi]) && entry.map(|(mi, k)| allowed[mi][k]).unwrap_or(true);
                if ok {
                    mask |= 1 << bit;
                }
            }
            masks.push(mask);
        }
    }
    fn search(masks: &[u64], start: usize, acc: u64, left: usize, full: u64) -> bool {
        if acc == full {
            return true;
        }
        if left == 0 {
            return false;
        }
        (start..masks.len()).any(|i| search(masks, i + 1, acc | masks[i], left - 1, full))
    }
    search(&masks, 0, 0, max_lambda, full)
}
