//! Finite operational scenarios and finite ontological models for them.
//!
//! A [`Scenario`] lists declared preparation, transformation and measurement procedures of
//! one finite-dimensional system together with the table `Pr(k | P, [T], M)`. Procedures are
//! identified by id, so two recipes for the same density matrix stay distinct.
//!
//! An [`OntologicalModel`] has a finite ontic space; every subset is measurable, so supports
//! are plain finite sets and "up to measure zero" statements become exact.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invariant, Error, Result};
use crate::linalg::ComplexMatrix;
use crate::qcore::{self, born_probability, Channel, DensityMatrix, Effect, Measurement, Tolerances};

/// Default absolute threshold for supports and response sets.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;

/// Default tolerance for probability normalisation and table comparison.
pub const TOL_PROB: f64 = 1e-9;

// ---------------------------------------------------------------------------------------------
// Scenario

#[derive(Clone, Debug, PartialEq)]
pub struct Preparation {
    pub id: String,
    pub density: DensityMatrix,
    /// Declared recipe as `(component id, weight)`.
    pub mixture: Option<Vec<(String, f64)>>,
}

impl Preparation {
    pub fn is_atomic(&self) -> bool {
        self.mixture.is_none()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedMeasurement {
    pub id: String,
    pub measurement: Measurement,
    /// Local measurement ids when this is a product measurement; joint outcomes are row-major.
    pub parts: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedChannel {
    pub id: String,
    pub channel: Channel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntryKey {
    pub prep: usize,
    pub trans: Option<usize>,
    pub meas: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    pub prep: String,
    pub trans: Option<String>,
    pub meas: String,
    pub probs: Vec<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct PrepSpec {
    pub id: String,
    pub density: Option<DensityMatrix>,
    pub mixture: Option<Vec<(String, f64)>>,
}

impl PrepSpec {
    pub fn atomic(id: &str, density: DensityMatrix) -> Self {
        Self { id: id.to_string(), density: Some(density), mixture: None }
    }

    pub fn mixture(id: &str, parts: &[(&str, f64)]) -> Self {
        Self {
            id: id.to_string(),
            density: None,
            mixture: Some(parts.iter().map(|(c, w)| (c.to_string(), *w)).collect()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct MeasSpec {
    pub id: String,
    pub measurement: Option<Measurement>,
    pub parts: Option<Vec<String>>,
}

impl MeasSpec {
    pub fn new(id: &str, measurement: Measurement) -> Self {
        Self { id: id.to_string(), measurement: Some(measurement), parts: None }
    }

    pub fn product(id: &str, parts: &[&str]) -> Self {
        Self { id: id.to_string(), measurement: None, parts: Some(parts.iter().map(|s| s.to_string()).collect()) }
    }
}

/// Unvalidated description of a scenario; [`ScenarioSpec::build`] checks every invariant.
#[derive(Clone, Debug)]
pub struct ScenarioSpec {
    pub d: usize,
    pub preparations: Vec<PrepSpec>,
    pub local_measurements: Vec<(String, Measurement)>,
    pub measurements: Vec<MeasSpec>,
    pub transformations: Vec<NamedChannel>,
    pub table: Option<Vec<TableRow>>,
    pub tol: f64,
}

impl ScenarioSpec {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            preparations: Vec::new(),
            local_measurements: Vec::new(),
            measurements: Vec::new(),
            transformations: Vec::new(),
            table: None,
            tol: TOL_PROB,
        }
    }

    pub fn prep(mut self, p: PrepSpec) -> Self {
        self.preparations.push(p);
        self
    }

    pub fn meas(mut self, m: MeasSpec) -> Self {
        self.measurements.push(m);
        self
    }

    pub fn local(mut self, id: &str, m: Measurement) -> Self {
        self.local_measurements.push((id.to_string(), m));
        self
    }

    pub fn trans(mut self, id: &str, ch: Channel) -> Self {
        self.transformations.push(NamedChannel { id: id.to_string(), channel: ch });
        self
    }

    pub fn build(self) -> Result<Scenario> {
        Scenario::from_spec(self)
    }
}

/// Validated finite operational scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    d: usize,
    preparations: Vec<Preparation>,
    local_measurements: Vec<(String, Measurement)>,
    measurements: Vec<NamedMeasurement>,
    transformations: Vec<NamedChannel>,
    table: BTreeMap<EntryKey, Vec<f64>>,
    tol: f64,
}

fn unique_ids<'a>(kind: &str, ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if id.is_empty() {
            return Err(invariant(format!("empty {kind} id")));
        }
        if !seen.insert(id) {
            return Err(Error::DuplicateId(format!("{kind} '{id}'")));
        }
    }
    Ok(())
}

fn check_weights(id: &str, parts: &[(String, f64)], tol: f64) -> Result<()> {
    if parts.is_empty() {
        return Err(invariant(format!("mixture '{id}' has no components")));
    }
    let mut sum = 0.0;
    for (c, w) in parts {
        if !w.is_finite() || *w < 0.0 {
            return Err(invariant(format!("mixture '{id}' has invalid weight {w} for '{c}'")));
        }
        sum += w;
    }
    if (sum - 1.0).abs() > tol {
        return Err(invariant(format!("mixture '{id}' weights sum to {sum}")));
    }
    Ok(())
}

impl Scenario {
    fn from_spec(spec: ScenarioSpec) -> Result<Self> {
        let d = spec.d;
        let tol = spec.tol;
        if d == 0 {
            return Err(invariant("scenario dimension must be positive"));
        }
        if d > qcore::MAX_DIM {
            return Err(Error::DimensionTooLarge(d));
        }
        unique_ids("preparation", spec.preparations.iter().map(|p| p.id.as_str()))?;
        unique_ids("measurement", spec.measurements.iter().map(|m| m.id.as_str()))?;
        unique_ids("local measurement", spec.local_measurements.iter().map(|m| m.0.as_str()))?;
        unique_ids("transformation", spec.transformations.iter().map(|t| t.id.as_str()))?;
        if spec.preparations.is_empty() {
            return Err(invariant("scenario has no preparations"));
        }

        let preparations = resolve_preparations(&spec.preparations, d, tol)?;

        let local: BTreeMap<&str, &Measurement> =
            spec.local_measurements.iter().map(|(id, m)| (id.as_str(), m)).collect();
        let mut measurements = Vec::with_capacity(spec.measurements.len());
        for m in &spec.measurements {
            let parts_meas = match &m.parts {
                Some(parts) => {
                    let ms = parts
                        .iter()
                        .map(|p| local.get(p.as_str()).copied().ok_or_else(|| Error::UnknownId(format!("local measurement '{p}'"))))
                        .collect::<Result<Vec<_>>>()?;
                    Some(Measurement::product(&ms)?)
                }
                None => None,
            };
            let measurement = match (&m.measurement, parts_meas) {
                (Some(explicit), Some(prod)) => {
                    let close = explicit.len() == prod.len()
                        && explicit.dim() == prod.dim()
                        && explicit
                            .effects()
                            .iter()
                            .zip(prod.effects())
                            .all(|(a, b)| a.matrix().max_abs_diff(b.matrix()) <= tol);
                    if !close {
                        return Err(invariant(format!("measurement '{}' effects differ from the product of its parts", m.id)));
                    }
                    explicit.clone()
                }
                (Some(explicit), None) => explicit.clone(),
                (None, Some(prod)) => prod,
                (None, None) => return Err(invariant(format!("measurement '{}' has neither effects nor parts", m.id))),
            };
            if measurement.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: measurement.dim() });
            }
            measurements.push(NamedMeasurement { id: m.id.clone(), measurement, parts: m.parts.clone() });
        }
        for t in &spec.transformations {
            if t.channel.d_in() != d || t.channel.d_out() != d {
                return Err(invariant(format!("transformation '{}' must map dimension {d} to itself", t.id)));
            }
        }

        let mut scenario = Scenario {
            d,
            preparations,
            local_measurements: spec.local_measurements,
            measurements,
            transformations: spec.transformations,
            table: BTreeMap::new(),
            tol,
        };
        scenario.table = scenario.derive_table()?;
        if let Some(rows) = spec.table {
            scenario.check_declared_table(&rows)?;
        }
        Ok(scenario)
    }

    fn derive_table(&self) -> Result<BTreeMap<EntryKey, Vec<f64>>> {
        let mut table = BTreeMap::new();
        for (pi, p) in self.preparations.iter().enumerate() {
            let mut states = vec![(None, p.density.clone())];
            for (ti, t) in self.transformations.iter().enumerate() {
                states.push((Some(ti), t.channel.apply(&p.density)?));
            }
            for (trans, rho) in &states {
                for (mi, m) in self.measurements.iter().enumerate() {
                    let probs = m
                        .measurement
                        .effects()
                        .iter()
                        .map(|e| born_probability(rho, e))
                        .collect::<Result<Vec<_>>>()?;
                    table.insert(EntryKey { prep: pi, trans: *trans, meas: mi }, probs);
                }
            }
        }
        Ok(table)
    }

    fn check_declared_table(&self, rows: &[TableRow]) -> Result<()> {
        for row in rows {
            let key = self.key(&row.prep, row.trans.as_deref(), &row.meas)?;
            let derived = &self.table[&key];
            if derived.len() != row.probs.len() {
                return Err(invariant(format!(
                    "table row ({}, {}) has {} outcomes, expected {}",
                    row.prep,
                    row.meas,
                    row.probs.len(),
                    derived.len()
                )));
            }
            for (k, (a, b)) in derived.iter().zip(&row.probs).enumerate() {
                if (a - b).abs() > self.tol {
                    return Err(invariant(format!(
                        "table entry ({}, {}, {k}) is {b} but the Born rule gives {a}",
                        row.prep, row.meas
                    )));
                }
            }
        }
        Ok(())
    }

    /// Spec that rebuilds this scenario; useful for deriving modified scenarios.
    pub fn to_spec(&self) -> ScenarioSpec {
        ScenarioSpec {
            d: self.d,
            preparations: self
                .preparations
                .iter()
                .map(|p| PrepSpec {
                    id: p.id.clone(),
                    density: if p.is_atomic() { Some(p.density.clone()) } else { None },
                    mixture: p.mixture.clone(),
                })
                .collect(),
            local_measurements: self.local_measurements.clone(),
            measurements: self
                .measurements
                .iter()
                .map(|m| MeasSpec { id: m.id.clone(), measurement: Some(m.measurement.clone()), parts: m.parts.clone() })
                .collect(),
            transformations: self.transformations.clone(),
            table: None,
            tol: self.tol,
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn preparations(&self) -> &[Preparation] {
        &self.preparations
    }

    pub fn measurements(&self) -> &[NamedMeasurement] {
        &self.measurements
    }

    pub fn local_measurements(&self) -> &[(String, Measurement)] {
        &self.local_measurements
    }

    pub fn transformations(&self) -> &[NamedChannel] {
        &self.transformations
    }

    pub fn table(&self) -> &BTreeMap<EntryKey, Vec<f64>> {
        &self.table
    }

    pub fn prep_index(&self, id: &str) -> Result<usize> {
        self.preparations
            .iter()
            .position(|p| p.id == id)
            .ok_or_else(|| Error::UnknownId(format!("preparation '{id}'")))
    }

    pub fn meas_index(&self, id: &str) -> Result<usize> {
        self.measurements
            .iter()
            .position(|m| m.id == id)
            .ok_or_else(|| Error::UnknownId(format!("measurement '{id}'")))
    }

    pub fn trans_index(&self, id: &str) -> Result<usize> {
        self.transformations
            .iter()
            .position(|t| t.id == id)
            .ok_or_else(|| Error::UnknownId(format!("transformation '{id}'")))
    }

    pub fn prep(&self, id: &str) -> Result<&Preparation> {
        Ok(&self.preparations[self.prep_index(id)?])
    }

    pub fn measurement(&self, id: &str) -> Result<&NamedMeasurement> {
        Ok(&self.measurements[self.meas_index(id)?])
    }

    pub fn transformation(&self, id: &str) -> Result<&NamedChannel> {
        Ok(&self.transformations[self.trans_index(id)?])
    }

    pub fn key(&self, prep: &str, trans: Option<&str>, meas: &str) -> Result<EntryKey> {
        Ok(EntryKey {
            prep: self.prep_index(prep)?,
            trans: trans.map(|t| self.trans_index(t)).transpose()?,
            meas: self.meas_index(meas)?,
        })
    }

    pub fn probability(&self, prep: &str, trans: Option<&str>, meas: &str, k: usize) -> Result<f64> {
        let row = &self.table[&self.key(prep, trans, meas)?];
        row.get(k).copied().ok_or_else(|| Error::InvalidArgument(format!("outcome {k} out of range")))
    }

    pub fn rows(&self) -> Vec<TableRow> {
        self.table
            .iter()
            .map(|(k, v)| TableRow {
                prep: self.preparations[k.prep].id.clone(),
                trans: k.trans.map(|t| self.transformations[t].id.clone()),
                meas: self.measurements[k.meas].id.clone(),
                probs: v.clone(),
            })
            .collect()
    }

    /// The atomic preparations every mixture eventually decomposes into, with weights.
    pub fn atomic_decomposition(&self, prep: usize) -> BTreeMap<usize, f64> {
        let mut out = BTreeMap::new();
        self.accumulate_atomic(prep, 1.0, &mut out);
        out
    }

    fn accumulate_atomic(&self, prep: usize, w: f64, out: &mut BTreeMap<usize, f64>) {
        match &self.preparations[prep].mixture {
            None => *out.entry(prep).or_insert(0.0) += w,
            Some(parts) => {
                for (c, cw) in parts {
                    let ci = self.prep_index(c).expect("validated mixture component");
                    self.accumulate_atomic(ci, w * cw, out);
                }
            }
        }
    }
}

fn resolve_preparations(specs: &[PrepSpec], d: usize, tol: f64) -> Result<Vec<Preparation>> {
    let index: BTreeMap<&str, usize> = specs.iter().enumerate().map(|(i, p)| (p.id.as_str(), i)).collect();
    let mut densities: Vec<Option<DensityMatrix>> = vec![None; specs.len()];
    let mut state = vec![0u8; specs.len()]; // 0 new, 1 visiting, 2 done

    fn visit(
        i: usize,
        specs: &[PrepSpec],
        index: &BTreeMap<&str, usize>,
        densities: &mut Vec<Option<DensityMatrix>>,
        state: &mut Vec<u8>,
        d: usize,
        tol: f64,
    ) -> Result<()> {
        match state[i] {
            2 => return Ok(()),
            1 => return Err(invariant(format!("mixture cycle through '{}'", specs[i].id))),
            _ => {}
        }
        state[i] = 1;
        let spec = &specs[i];
        let from_mixture = match &spec.mixture {
            None => None,
            Some(parts) => {
                check_weights(&spec.id, parts, tol)?;
                let mut acc = ComplexMatrix::zeros(d, d);
                for (c, w) in parts {
                    let ci = *index
                        .get(c.as_str())
                        .ok_or_else(|| Error::UnknownId(format!("mixture component '{c}' of '{}'", spec.id)))?;
                    if ci == i {
                        return Err(invariant(format!("mixture '{}' lists itself", spec.id)));
                    }
                    visit(ci, specs, index, densities, state, d, tol)?;
                    acc = acc.add(&densities[ci].as_ref().expect("visited").matrix().scale(*w));
                }
                let tr = acc.trace().re;
                Some(DensityMatrix::new(acc.scale(1.0 / tr))?)
            }
        };
        let density = match (&spec.density, from_mixture) {
            (Some(rho), Some(mix)) => {
                let dev = rho.matrix().max_abs_diff(mix.matrix());
                if dev > tol {
                    return Err(invariant(format!(
                        "density of '{}' differs from its declared mixture by {dev}",
                        spec.id
                    )));
                }
                rho.clone()
            }
            (Some(rho), None) => rho.clone(),
            (None, Some(mix)) => mix,
            (None, None) => return Err(invariant(format!("preparation '{}' has neither density nor mixture", spec.id))),
        };
        if density.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: density.dim() });
        }
        densities[i] = Some(density);
        state[i] = 2;
        Ok(())
    }

    for i in 0..specs.len() {
        visit(i, specs, &index, &mut densities, &mut state, d, tol)?;
    }
    Ok(specs
        .iter()
        .zip(densities)
        .map(|(s, rho)| Preparation { id: s.id.clone(), density: rho.expect("resolved"), mixture: s.mixture.clone() })
        .collect())
}

// ---------------------------------------------------------------------------------------------
// Ontological models

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OnticSpace {
    labels: Vec<String>,
}

impl OnticSpace {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(invariant("ontic space must be nonempty"));
        }
        unique_ids("ontic state", labels.iter().map(|s| s.as_str()))?;
        Ok(Self { labels })
    }

    /// Labels `l0, l1, ...`.
    pub fn numbered(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| format!("l{i}")).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

fn check_distribution(what: &str, w: &[f64], tol: f64) -> Result<()> {
    let mut s = 0.0;
    for &x in w {
        if !x.is_finite() || x < -tol {
            return Err(invariant(format!("{what} has negative or non-finite entry {x}")));
        }
        s += x;
    }
    if (s - 1.0).abs() > tol {
        return Err(invariant(format!("{what} sums to {s}")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreparationMeasure {
    weights: Vec<f64>,
}

impl PreparationMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(invariant("empty preparation measure"));
        }
        check_distribution("preparation measure", &weights, TOL_PROB)?;
        Ok(Self { weights })
    }

    pub fn point(n: usize, at: usize) -> Result<Self> {
        if at >= n {
            return Err(Error::InvalidArgument(format!("point {at} outside ontic space of size {n}")));
        }
        let mut w = vec![0.0; n];
        w[at] = 1.0;
        Self::new(w)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![1.0 / n as f64; n])
    }

    /// Convex combination of measures on the same space.
    pub fn mixture(parts: &[(f64, &PreparationMeasure)]) -> Result<Self> {
        let n = parts.first().map(|p| p.1.len()).ok_or_else(|| invariant("empty mixture"))?;
        let mut w = vec![0.0; n];
        for (c, mu) in parts {
            if mu.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: mu.len() });
            }
            for (acc, x) in w.iter_mut().zip(&mu.weights) {
                *acc += c * x;
            }
        }
        Self::new(w)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// `table[lambda][k] = xi(k | lambda)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponseFunction {
    table: Vec<Vec<f64>>,
}

impl ResponseFunction {
    pub fn new(table: Vec<Vec<f64>>) -> Result<Self> {
        let k = table.first().map(|r| r.len()).ok_or_else(|| invariant("empty response function"))?;
        if k == 0 {
            return Err(invariant("response function has no outcomes"));
        }
        for (l, row) in table.iter().enumerate() {
            if row.len() != k {
                return Err(invariant(format!("response row {l} has {} outcomes, expected {k}", row.len())));
            }
            if row.iter().any(|&x| x > 1.0 + TOL_PROB) {
                return Err(invariant(format!("response row {l} has an entry above 1")));
            }
            check_distribution("response row", row, TOL_PROB)?;
        }
        Ok(Self { table })
    }

    /// Deterministic response `xi(outcome[l] | l) = 1`.
    pub fn deterministic(outcomes: &[usize], k: usize) -> Result<Self> {
        Self::new(
            outcomes
                .iter()
                .map(|&o| (0..k).map(|j| if j == o { 1.0 } else { 0.0 }).collect())
                .collect(),
        )
    }

    pub fn outcomes(&self) -> usize {
        self.table[0].len()
    }

    pub fn space_size(&self) -> usize {
        self.table.len()
    }

    pub fn value(&self, k: usize, lambda: usize) -> f64 {
        self.table[lambda][k]
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.table.iter().map(|r| r[k]).collect()
    }

    pub fn table(&self) -> &[Vec<f64>] {
        &self.table
    }
}

/// `table[target][source] = Gamma(target | source)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformationKernel {
    table: Vec<Vec<f64>>,
}

impl TransformationKernel {
    pub fn new(table: Vec<Vec<f64>>) -> Result<Self> {
        let n = table.len();
        if n == 0 || table.iter().any(|r| r.len() != n) {
            return Err(invariant("transformation kernel must be square and nonempty"));
        }
        for src in 0..n {
            let col: Vec<f64> = table.iter().map(|r| r[src]).collect();
            check_distribution("transformation kernel column", &col, TOL_PROB)?;
        }
        Ok(Self { table })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect())
    }

    /// Deterministic map `source -> map[source]`.
    pub fn from_map(map: &[usize]) -> Result<Self> {
        let n = map.len();
        let mut t = vec![vec![0.0; n]; n];
        for (src, &dst) in map.iter().enumerate() {
            if dst >= n {
                return Err(Error::InvalidArgument(format!("target {dst} outside ontic space")));
            }
            t[dst][src] = 1.0;
        }
        Self::new(t)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![vec![1.0 / n as f64; n]; n])
    }

    pub fn size(&self) -> usize {
        self.table.len()
    }

    pub fn value(&self, target: usize, source: usize) -> f64 {
        self.table[target][source]
    }

    pub fn table(&self) -> &[Vec<f64>] {
        &self.table
    }

    pub fn apply(&self, mu: &[f64]) -> Vec<f64> {
        self.table.iter().map(|row| row.iter().zip(mu).map(|(g, m)| g * m).sum()).collect()
    }

    /// `second` after `self`.
    pub fn then(&self, second: &TransformationKernel) -> Result<Self> {
        let n = self.size();
        if second.size() != n {
            return Err(Error::DimensionMismatch { expected: n, found: second.size() });
        }
        let t = (0..n)
            .map(|i| (0..n).map(|j| (0..n).map(|m| second.table[i][m] * self.table[m][j]).sum()).collect())
            .collect();
        Self::new(t)
    }
}

/// Subset of the ontic space, stored as membership flags.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SupportSet {
    members: Vec<bool>,
    threshold_bits: u64,
}

impl SupportSet {
    pub fn from_flags(members: Vec<bool>, threshold: f64) -> Self {
        Self { members, threshold_bits: threshold.to_bits() }
    }

    pub fn from_indices(n: usize, idx: impl IntoIterator<Item = usize>, threshold: f64) -> Self {
        let mut members = vec![false; n];
        for i in idx {
            members[i] = true;
        }
        Self::from_flags(members, threshold)
    }

    pub fn empty(n: usize) -> Self {
        Self::from_flags(vec![false; n], SUPPORT_THRESHOLD)
    }

    pub fn full(n: usize) -> Self {
        Self::from_flags(vec![true; n], SUPPORT_THRESHOLD)
    }

    pub fn threshold(&self) -> f64 {
        f64::from_bits(self.threshold_bits)
    }

    pub fn space_size(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.get(i).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.members.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.members.iter().any(|&b| b)
    }

    pub fn flags(&self) -> &[bool] {
        &self.members
    }

    pub fn indices(&self) -> Vec<usize> {
        self.members.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
    }

    fn zip_with(&self, other: &Self, f: impl Fn(bool, bool) -> bool) -> Self {
        Self {
            members: self.members.iter().zip(&other.members).map(|(&a, &b)| f(a, b)).collect(),
            threshold_bits: self.threshold_bits,
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.members.iter().zip(&other.members).all(|(&a, &b)| !a || b)
    }

    /// Same members, thresholds ignored.
    pub fn same_members(&self, other: &Self) -> bool {
        self.members == other.members
    }
}

pub fn support_of(mu: &PreparationMeasure, threshold: f64) -> SupportSet {
    SupportSet::from_flags(mu.weights.iter().map(|&w| w > threshold).collect(), threshold)
}

/// `R = {xi >= 1 - tol}` and `T = {xi > tol}` for outcome `k`.
pub fn response_sets(xi: &ResponseFunction, k: usize, tol: f64) -> (SupportSet, SupportSet) {
    let col = xi.column(k);
    let r = SupportSet::from_flags(col.iter().map(|&x| x >= 1.0 - tol).collect(), tol);
    let t = SupportSet::from_flags(col.iter().map(|&x| x > tol).collect(), tol);
    (r, t)
}

/// Pairs `(source, target)` with `Gamma(target | source) > threshold`.
pub fn transformation_support(gamma: &TransformationKernel, threshold: f64) -> BTreeSet<(usize, usize)> {
    let n = gamma.size();
    let mut out = BTreeSet::new();
    for src in 0..n {
        for dst in 0..n {
            if gamma.value(dst, src) > threshold {
                out.insert((src, dst));
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct OntologicalModel {
    pub space: OnticSpace,
    pub preps: BTreeMap<String, PreparationMeasure>,
    pub responses: BTreeMap<String, ResponseFunction>,
    pub kernels: BTreeMap<String, TransformationKernel>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReproductionReport {
    pub ok: bool,
    pub worst_deviation: f64,
    /// `(prep, trans, meas, outcome)` attaining the worst deviation.
    pub worst_entry: Option<(String, Option<String>, String, usize)>,
    pub entries_checked: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FaithfulnessReport {
    pub faithful: bool,
    /// `((meas, k), (meas, k))` with equal effects but different R or T sets.
    pub offending: Option<((String, usize), (String, usize))>,
}

impl OntologicalModel {
    pub fn new(space: OnticSpace) -> Self {
        Self { space, preps: BTreeMap::new(), responses: BTreeMap::new(), kernels: BTreeMap::new() }
    }

    pub fn size(&self) -> usize {
        self.space.len()
    }

    pub fn with_prep(mut self, id: &str, mu: PreparationMeasure) -> Self {
        self.preps.insert(id.to_string(), mu);
        self
    }

    pub fn with_response(mut self, id: &str, xi: ResponseFunction) -> Self {
        self.responses.insert(id.to_string(), xi);
        self
    }

    pub fn with_kernel(mut self, id: &str, g: TransformationKernel) -> Self {
        self.kernels.insert(id.to_string(), g);
        self
    }

    pub fn prep(&self, id: &str) -> Result<&PreparationMeasure> {
        self.preps.get(id).ok_or_else(|| Error::UnknownId(format!("preparation '{id}' in model")))
    }

    pub fn response(&self, id: &str) -> Result<&ResponseFunction> {
        self.responses.get(id).ok_or_else(|| Error::UnknownId(format!("measurement '{id}' in model")))
    }

    pub fn kernel(&self, id: &str) -> Result<&TransformationKernel> {
        self.kernels.get(id).ok_or_else(|| Error::UnknownId(format!("transformation '{id}' in model")))
    }

    pub fn support(&self, prep: &str) -> Result<SupportSet> {
        Ok(support_of(self.prep(prep)?, SUPPORT_THRESHOLD))
    }

    /// `sum_{l, l'} mu(l) Gamma(l' | l) xi(k | l')`.
    pub fn predict(&self, prep: &str, trans: Option<&str>, meas: &str, k: usize) -> Result<f64> {
        let mu = self.prep(prep)?;
        let xi = self.response(meas)?;
        if k >= xi.outcomes() {
            return Err(Error::InvalidArgument(format!("outcome {k} out of range for '{meas}'")));
        }
        let n = self.size();
        if mu.len() != n || xi.space_size() != n {
            return Err(Error::DimensionMismatch { expected: n, found: mu.len().max(xi.space_size()) });
        }
        let weights = match trans {
            Some(t) => self.kernel(t)?.apply(mu.weights()),
            None => mu.weights().to_vec(),
        };
        Ok(weights.iter().enumerate().map(|(l, w)| w * xi.value(k, l)).sum())
    }

    /// Checks ids, shapes and the convex representation of declared mixtures.
    pub fn check_bound(&self, scenario: &Scenario, tol: f64) -> Result<()> {
        let n = self.size();
        for mu in self.preps.values() {
            if mu.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: mu.len() });
            }
        }
        for xi in self.responses.values() {
            if xi.space_size() != n {
                return Err(Error::DimensionMismatch { expected: n, found: xi.space_size() });
            }
        }
        for g in self.kernels.values() {
            if g.size() != n {
                return Err(Error::DimensionMismatch { expected: n, found: g.size() });
            }
        }
        for p in scenario.preparations() {
            self.prep(&p.id)?;
        }
        for m in scenario.measurements() {
            let xi = self.response(&m.id)?;
            if xi.outcomes() != m.measurement.len() {
                return Err(invariant(format!(
                    "response for '{}' has {} outcomes, the measurement has {}",
                    m.id,
                    xi.outcomes(),
                    m.measurement.len()
                )));
            }
        }
        for t in scenario.transformations() {
            self.kernel(&t.id)?;
        }
        for p in scenario.preparations() {
            if let Some(parts) = &p.mixture {
                let comps = parts
                    .iter()
                    .map(|(c, w)| Ok((*w, self.prep(c)?)))
                    .collect::<Result<Vec<_>>>()?;
                let mix = PreparationMeasure::mixture(&comps)?;
                let mu = self.prep(&p.id)?;
                let dev = mix.weights.iter().zip(&mu.weights).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                if dev > tol {
                    return Err(invariant(format!(
                        "model measure of mixture '{}' is not the convex mixture of its components (deviation {dev})",
                        p.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn reproduces(&self, scenario: &Scenario, tol: f64) -> Result<ReproductionReport> {
        self.check_bound(scenario, tol)?;
        let mut worst = 0.0f64;
        let mut worst_entry = None;
        let mut count = 0;
        for row in scenario.rows() {
            for (k, p) in row.probs.iter().enumerate() {
                let q = self.predict(&row.prep, row.trans.as_deref(), &row.meas, k)?;
                let dev = (q - p).abs();
                count += 1;
                if dev > worst || worst_entry.is_none() {
                    if dev > worst {
                        worst = dev;
                    }
                    worst_entry = Some((row.prep.clone(), row.trans.clone(), row.meas.clone(), k));
                }
            }
        }
        Ok(ReproductionReport { ok: worst <= tol, worst_deviation: worst, worst_entry, entries_checked: count })
    }

    /// Equal effects (within `effect_tol`) must have equal R and T sets.
    pub fn is_faithful(&self, scenario: &Scenario, effect_tol: f64) -> Result<FaithfulnessReport> {
        let mut outcomes: Vec<(String, usize, &Effect, SupportSet, SupportSet)> = Vec::new();
        for m in scenario.measurements() {
            let xi = self.response(&m.id)?;
            for (k, e) in m.measurement.effects().iter().enumerate() {
                let (r, t) = response_sets(xi, k, SUPPORT_THRESHOLD);
                outcomes.push((m.id.clone(), k, e, r, t));
            }
        }
        for i in 0..outcomes.len() {
            for j in i + 1..outcomes.len() {
                let (a, b) = (&outcomes[i], &outcomes[j]);
                if a.2.matrix().max_abs_diff(b.2.matrix()) <= effect_tol && (a.3 != b.3 || a.4 != b.4) {
                    return Ok(FaithfulnessReport {
                        faithful: false,
                        offending: Some(((a.0.clone(), a.1), (b.0.clone(), b.1))),
                    });
                }
            }
        }
        Ok(FaithfulnessReport { faithful: true, offending: None })
    }
}

// ---------------------------------------------------------------------------------------------
// Model builders

/// Distinct pure states among the atomic preparations, labelled by the first preparation id.
struct PureStates {
    labels: Vec<String>,
    states: Vec<DensityMatrix>,
    /// Atomic preparation index -> lambda.
    of_prep: BTreeMap<usize, usize>,
}

fn collect_pure_states(scenario: &Scenario) -> Result<PureStates> {
    let tol = Tolerances::default();
    let mut labels = Vec::new();
    let mut states: Vec<DensityMatrix> = Vec::new();
    let mut of_prep = BTreeMap::new();
    for (i, p) in scenario.preparations().iter().enumerate() {
        if !p.is_atomic() {
            continue;
        }
        if p.density.pure_vector(tol.kernel).is_none() {
            return Err(invariant(format!("atomic preparation '{}' is not pure", p.id)));
        }
        let found = states.iter().position(|s| s.matrix().max_abs_diff(p.density.matrix()) <= scenario.tol());
        let l = match found {
            Some(l) => l,
            None => {
                labels.push(p.id.clone());
                states.push(p.density.clone());
                states.len() - 1
            }
        };
        of_prep.insert(i, l);
    }
    Ok(PureStates { labels, states, of_prep })
}

fn lambda_of_state(ps: &PureStates, rho: &DensityMatrix, tol: f64) -> Option<usize> {
    ps.states.iter().position(|s| s.matrix().max_abs_diff(rho.matrix()) <= tol)
}

fn bb_kernels(scenario: &Scenario, ps: &PureStates) -> Result<Vec<(String, TransformationKernel)>> {
    let mut out = Vec::new();
    for t in scenario.transformations() {
        let mut map = Vec::with_capacity(ps.states.len());
        for (l, s) in ps.states.iter().enumerate() {
            let img = t.channel.apply(s)?;
            let target = lambda_of_state(ps, &img, 1e-8).ok_or_else(|| {
                Error::Unsupported(format!(
                    "transformation '{}' maps ontic state '{}' outside the scenario's pure states",
                    t.id, ps.labels[l]
                ))
            })?;
            map.push(target);
        }
        out.push((t.id.clone(), TransformationKernel::from_map(&map)?));
    }
    Ok(out)
}

fn bb_responses(scenario: &Scenario, ps: &PureStates) -> Result<Vec<(String, ResponseFunction)>> {
    let mut out = Vec::new();
    for m in scenario.measurements() {
        let mut table = Vec::with_capacity(ps.states.len());
        for s in &ps.states {
            table.push(
                m.measurement
                    .effects()
                    .iter()
                    .map(|e| born_probability(s, e))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        out.push((m.id.clone(), ResponseFunction::new(table)?));
    }
    Ok(out)
}

fn mixture_measures(
    scenario: &Scenario,
    atomic: impl Fn(usize) -> Result<PreparationMeasure>,
) -> Result<Vec<(String, PreparationMeasure)>> {
    let mut out = Vec::new();
    for (i, p) in scenario.preparations().iter().enumerate() {
        let decomposition = scenario.atomic_decomposition(i);
        let parts = decomposition
            .iter()
            .map(|(&a, &w)| Ok((w, atomic(a)?)))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<(f64, &PreparationMeasure)> = parts.iter().map(|(w, m)| (*w, m)).collect();
        out.push((p.id.clone(), PreparationMeasure::mixture(&refs)?));
    }
    Ok(out)
}

/// The model whose ontic states are the scenario's pure states and whose responses are the Born
/// rule.
pub fn beltrametti_bugajski(scenario: &Scenario) -> Result<OntologicalModel> {
    let ps = collect_pure_states(scenario)?;
    let n = ps.states.len();
    let mut model = OntologicalModel::new(OnticSpace::new(ps.labels.clone())?);
    for (id, mu) in mixture_measures(scenario, |a| PreparationMeasure::point(n, ps.of_prep[&a]))? {
        model.preps.insert(id, mu);
    }
    for (id, xi) in bb_responses(scenario, &ps)? {
        model.responses.insert(id, xi);
    }
    for (id, g) in bb_kernels(scenario, &ps)? {
        model.kernels.insert(id, g);
    }
    Ok(model)
}

/// Smoothed scenario and its smoothed Beltrametti-Bugajski model.
///
/// Every atomic density `rho` becomes `(1 - eps) rho + eps tau`, with `tau` the uniform mixture
/// of the scenario's pure states, and every channel `T` becomes `(1 - eps) T + eps tr(.) tau`.
/// The model puts weight `eps / |Lambda|` on every ontic state, so all supports are the whole
/// space and the statistics of the smoothed scenario are reproduced exactly.
pub fn epsilon_bb_model(scenario: &Scenario, eps: f64) -> Result<(Scenario, OntologicalModel)> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("eps {eps} not in (0,1)")));
    }
    let ps = collect_pure_states(scenario)?;
    let n = ps.states.len();
    let parts: Vec<(f64, &DensityMatrix)> = ps.states.iter().map(|s| (1.0 / n as f64, s)).collect();
    let tau = DensityMatrix::mixture(&parts)?;
    if tau.rank(Tolerances::default().kernel) != scenario.dim() {
        return Err(invariant("the scenario's pure states do not span the Hilbert space; smoothing target is rank deficient"));
    }

    let mut spec = scenario.to_spec();
    for p in spec.preparations.iter_mut() {
        if let Some(rho) = &p.density {
            if p.mixture.is_none() {
                p.density = Some(qcore::smooth_state(rho, eps, &tau)?);
            }
        }
    }
    let replace = Channel::replacement(scenario.dim(), &tau)?;
    for t in spec.transformations.iter_mut() {
        t.channel = t.channel.convex_mix(eps, &replace)?;
    }
    let smoothed = spec.build()?;

    let uniform = PreparationMeasure::uniform(n)?;
    let mut model = OntologicalModel::new(OnticSpace::new(ps.labels.clone())?);
    for (id, mu) in mixture_measures(scenario, |a| {
        let point = PreparationMeasure::point(n, ps.of_prep[&a])?;
        PreparationMeasure::mixture(&[(1.0 - eps, &point), (eps, &uniform)])
    })? {
        model.preps.insert(id, mu);
    }
    for (id, xi) in bb_responses(scenario, &ps)? {
        model.responses.insert(id, xi);
    }
    let flat = TransformationKernel::uniform(n)?;
    for (id, g) in bb_kernels(scenario, &ps)? {
        let t = (0..n)
            .map(|i| (0..n).map(|j| (1.0 - eps) * g.value(i, j) + eps * flat.value(i, j)).collect())
            .collect();
        model.kernels.insert(id, TransformationKernel::new(t)?);
    }
    Ok((smoothed, model))
}
