//! JSON file formats for scenarios, ontological models and possibility tables.
//!
//! Complex entries are written as a number when real and as `[re, im]` otherwise; both forms
//! are accepted on input. Matrices are arrays of rows.

use std::collections::BTreeMap;
use std::path::Path;

use nonctx_core::feasibility::{Context, Flag, PossOptions, PossibilityTable, TableMeasurement};
use nonctx_core::linalg::{c64, ComplexMatrix, C64};
use nonctx_core::ontomodel::{
    MeasSpec, NamedChannel, OnticSpace, OntologicalModel, PrepSpec, PreparationMeasure, ResponseFunction, Scenario,
    ScenarioSpec, TableRow, TransformationKernel,
};
use nonctx_core::qcore::{bloch_state, Channel, DensityMatrix, Effect, Measurement, Tolerances};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    pub fn value(self) -> C64 {
        match self {
            Entry::Real(x) => c64(x, 0.0),
            Entry::Complex([re, im]) => c64(re, im),
        }
    }

    pub fn of(z: C64) -> Self {
        if z.im == 0.0 {
            Entry::Real(z.re)
        } else {
            Entry::Complex([z.re, z.im])
        }
    }
}

pub type MatrixJson = Vec<Vec<Entry>>;
pub type VectorJson = Vec<Entry>;

pub fn matrix_to_json(m: &ComplexMatrix) -> MatrixJson {
    (0..m.rows()).map(|i| (0..m.cols()).map(|j| Entry::of(m[(i, j)])).collect()).collect()
}

pub fn matrix_from_json(m: &MatrixJson, what: &str) -> Result<ComplexMatrix, CliError> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    if rows == 0 || m.iter().any(|r| r.len() != cols) {
        return Err(CliError::Input(format!("{what}: matrix rows must be nonempty and of equal length")));
    }
    let data = m.iter().flatten().map(|e| e.value()).collect();
    Ok(ComplexMatrix::from_vec(rows, cols, data)?)
}

pub fn vector_to_json(v: &[C64]) -> VectorJson {
    v.iter().map(|&z| Entry::of(z)).collect()
}

pub fn vector_from_json(v: &VectorJson) -> Vec<C64> {
    v.iter().map(|e| e.value()).collect()
}

/// Reads and deserializes `path`, reporting the JSON path of the offending field on failure.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_json(&text).map_err(|e| match e {
        CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "?" || path == "." {
            CliError::Input(format!("malformed JSON: {inner}"))
        } else {
            CliError::Input(format!("malformed JSON at field `{path}`: {inner}"))
        }
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

// ---------------------------------------------------------------------------------------------
// Scenarios

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub dim: usize,
    pub preparations: Vec<PrepFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub local_measurements: Vec<MeasFile>,
    #[serde(default)]
    pub measurements: Vec<MeasFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transformations: Vec<TransFile>,
    /// Sequential measurements: rejected, their possibilistic semantics would need a state-update rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequences: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<RowFile>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrepFile {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<MatrixJson>,
    /// Pure state vector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<VectorJson>,
    /// Qubit state `cos(t/2)|0> + sin(t/2)|1>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture: Option<Vec<PartFile>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartFile {
    pub id: String,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasFile {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effects: Option<Vec<MatrixJson>>,
    /// Orthonormal basis; outcome `k` projects on vector `k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<Vec<VectorJson>>,
    /// Qubit basis given by Bloch angles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angles: Option<Vec<f64>>,
    /// Local measurement ids of a product measurement.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parts: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransFile {
    pub id: String,
    pub kraus: Vec<MatrixJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowFile {
    pub prep: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trans: Option<String>,
    pub meas: String,
    pub probs: Vec<f64>,
}

fn measurement_of(m: &MeasFile) -> Result<Option<Measurement>, CliError> {
    let given = [m.effects.is_some(), m.basis.is_some(), m.angles.is_some()].iter().filter(|&&b| b).count();
    if given > 1 {
        return Err(CliError::Input(format!("measurement '{}': give only one of effects, basis, angles", m.id)));
    }
    let base = if let Some(effects) = &m.effects {
        let es = effects
            .iter()
            .enumerate()
            .map(|(k, e)| Ok(Effect::new(matrix_from_json(e, &format!("measurement '{}' effect {k}", m.id))?)?))
            .collect::<Result<Vec<_>, CliError>>()?;
        Some(es)
    } else if let Some(basis) = &m.basis {
        let vs: Vec<Vec<C64>> = basis.iter().map(vector_from_json).collect();
        Some(Measurement::from_basis(&vs)?.effects().to_vec())
    } else if let Some(angles) = &m.angles {
        let vs: Vec<Vec<C64>> = angles.iter().map(|&t| bloch_state(t)).collect();
        Some(Measurement::from_basis(&vs)?.effects().to_vec())
    } else {
        None
    };
    let Some(effects) = base else { return Ok(None) };
    let labels = match &m.labels {
        Some(l) => l.clone(),
        None => (0..effects.len()).map(|k| k.to_string()).collect(),
    };
    Ok(Some(Measurement::with_labels(effects, labels, &Tolerances::default())?))
}

impl ScenarioFile {
    pub fn to_scenario(&self) -> Result<Scenario, CliError> {
        if self.sequences.is_some() {
            return Err(CliError::Input(
                "sequential measurements are not supported: their possibilistic semantics needs a state-update rule"
                    .into(),
            ));
        }
        let mut spec = ScenarioSpec::new(self.dim);
        if let Some(t) = self.tol {
            spec.tol = t;
        }
        for p in &self.preparations {
            let given = [p.density.is_some(), p.state.is_some(), p.angle.is_some(), p.mixture.is_some()]
                .iter()
                .filter(|&&b| b)
                .count();
            if given != 1 {
                return Err(CliError::Input(format!(
                    "preparation '{}': give exactly one of density, state, angle, mixture",
                    p.id
                )));
            }
            let prep = if let Some(m) = &p.density {
                PrepSpec::atomic(&p.id, DensityMatrix::new(matrix_from_json(m, &format!("preparation '{}'", p.id))?)?)
            } else if let Some(v) = &p.state {
                PrepSpec::atomic(&p.id, DensityMatrix::pure(&vector_from_json(v))?)
            } else if let Some(t) = p.angle {
                PrepSpec::atomic(&p.id, DensityMatrix::pure(&bloch_state(t))?)
            } else {
                let parts: Vec<(&str, f64)> =
                    p.mixture.as_ref().unwrap().iter().map(|q| (q.id.as_str(), q.weight)).collect();
                PrepSpec::mixture(&p.id, &parts)
            };
            spec = spec.prep(prep);
        }
        for m in &self.local_measurements {
            if m.parts.is_some() {
                return Err(CliError::Input(format!("local measurement '{}' cannot be a product", m.id)));
            }
            let meas = measurement_of(m)?
                .ok_or_else(|| CliError::Input(format!("local measurement '{}' has no effects", m.id)))?;
            spec = spec.local(&m.id, meas);
        }
        for m in &self.measurements {
            let meas = measurement_of(m)?;
            spec.measurements.push(MeasSpec { id: m.id.clone(), measurement: meas, parts: m.parts.clone() });
        }
        for t in &self.transformations {
            let kraus = t
                .kraus
                .iter()
                .map(|k| matrix_from_json(k, &format!("transformation '{}'", t.id)))
                .collect::<Result<Vec<_>, _>>()?;
            spec.transformations.push(NamedChannel { id: t.id.clone(), channel: Channel::new(kraus)? });
        }
        if let Some(rows) = &self.table {
            spec.table = Some(
                rows.iter()
                    .map(|r| TableRow { prep: r.prep.clone(), trans: r.trans.clone(), meas: r.meas.clone(), probs: r.probs.clone() })
                    .collect(),
            );
        }
        Ok(spec.build()?)
    }

    pub fn from_scenario(s: &Scenario) -> Self {
        let labels_of = |m: &Measurement| {
            let default = m.labels().iter().enumerate().all(|(k, l)| *l == k.to_string());
            (!default).then(|| m.labels().to_vec())
        };
        let preparations = s
            .preparations()
            .iter()
            .map(|p| match &p.mixture {
                Some(parts) => PrepFile {
                    id: p.id.clone(),
                    density: None,
                    state: None,
                    angle: None,
                    mixture: Some(parts.iter().map(|(c, w)| PartFile { id: c.clone(), weight: *w }).collect()),
                },
                None => PrepFile {
                    id: p.id.clone(),
                    density: Some(matrix_to_json(p.density.matrix())),
                    state: None,
                    angle: None,
                    mixture: None,
                },
            })
            .collect();
        let effects_of = |m: &Measurement| Some(m.effects().iter().map(|e| matrix_to_json(e.matrix())).collect());
        let local_measurements = s
            .local_measurements()
            .iter()
            .map(|(id, m)| MeasFile {
                id: id.clone(),
                effects: effects_of(m),
                basis: None,
                angles: None,
                parts: None,
                labels: labels_of(m),
            })
            .collect();
        let measurements = s
            .measurements()
            .iter()
            .map(|m| MeasFile {
                id: m.id.clone(),
                effects: if m.parts.is_some() { None } else { effects_of(&m.measurement) },
                basis: None,
                angles: None,
                parts: m.parts.clone(),
                labels: if m.parts.is_some() { None } else { labels_of(&m.measurement) },
            })
            .collect();
        let transformations = s
            .transformations()
            .iter()
            .map(|t| TransFile { id: t.id.clone(), kraus: t.channel.kraus().iter().map(matrix_to_json).collect() })
            .collect();
        ScenarioFile {
            dim: s.dim(),
            preparations,
            local_measurements,
            measurements,
            transformations,
            sequences: None,
            table: None,
            tol: None,
        }
    }
}

pub fn read_scenario(path: &Path) -> Result<Scenario, CliError> {
    read_json::<ScenarioFile>(path)?.to_scenario().map_err(|e| match e {
        CliError::Core(err) => CliError::Input(format!("{}: {err}", path.display())),
        other => other,
    })
}

// ---------------------------------------------------------------------------------------------
// Ontological models

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    /// Ontic state labels.
    pub lambda: Vec<String>,
    pub preparations: BTreeMap<String, Vec<f64>>,
    /// Per measurement, `table[lambda][k]`.
    pub responses: BTreeMap<String, Vec<Vec<f64>>>,
    /// Per transformation, `table[target][source]`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub kernels: BTreeMap<String, Vec<Vec<f64>>>,
}

impl ModelFile {
    pub fn to_model(&self) -> Result<OntologicalModel, CliError> {
        let mut model = OntologicalModel::new(OnticSpace::new(self.lambda.clone())?);
        let n = self.lambda.len();
        for (id, w) in &self.preparations {
            if w.len() != n {
                return Err(CliError::Input(format!("preparation '{id}': {} weights for {n} ontic states", w.len())));
            }
            model = model.with_prep(id, PreparationMeasure::new(w.clone())?);
        }
        for (id, t) in &self.responses {
            if t.len() != n {
                return Err(CliError::Input(format!("response '{id}': {} rows for {n} ontic states", t.len())));
            }
            model = model.with_response(id, ResponseFunction::new(t.clone())?);
        }
        for (id, t) in &self.kernels {
            model = model.with_kernel(id, TransformationKernel::new(t.clone())?);
        }
        Ok(model)
    }

    pub fn from_model(m: &OntologicalModel) -> Self {
        ModelFile {
            lambda: m.space.labels().to_vec(),
            preparations: m.preps.iter().map(|(k, v)| (k.clone(), v.weights().to_vec())).collect(),
            responses: m.responses.iter().map(|(k, v)| (k.clone(), v.table().to_vec())).collect(),
            kernels: m.kernels.iter().map(|(k, v)| (k.clone(), v.table().to_vec())).collect(),
        }
    }
}

pub fn read_model(path: &Path) -> Result<OntologicalModel, CliError> {
    read_json::<ModelFile>(path)?.to_model().map_err(|e| match e {
        CliError::Core(err) => CliError::Input(format!("{}: {err}", path.display())),
        other => other,
    })
}

// ---------------------------------------------------------------------------------------------
// Possibility tables

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableFile {
    /// Atomic preparations; defaults to the non-mixture preparations of `contexts` in order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atomic: Option<Vec<String>>,
    /// Mixture id to component ids.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub mixtures: BTreeMap<String, Vec<String>>,
    /// Defaults to one plain measurement per distinct `meas` of `contexts`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurements: Option<Vec<TableMeasFile>>,
    pub contexts: Vec<ContextFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub prep_classes: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub effect_classes: Vec<Vec<(String, usize)>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub equal_effects: Vec<Vec<(String, usize)>>,
    #[serde(default)]
    pub options: TableOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableMeasFile {
    pub id: String,
    pub outcomes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parts: Option<Vec<(String, usize)>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextFile {
    pub prep: String,
    pub meas: String,
    pub flags: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trichotomy: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_zero: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prep_nc: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meas_nc: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub product_rule: Option<bool>,
}

impl TableOptions {
    pub fn apply(&self, opts: &mut PossOptions) {
        if let Some(b) = self.trichotomy {
            opts.trichotomy = b;
        }
        if let Some(b) = self.prep_nc {
            opts.prep_nc = b;
        }
        if let Some(b) = self.meas_nc {
            opts.meas_nc = b;
        }
        if let Some(b) = self.product_rule {
            opts.product_rule = b;
        }
    }
}

/// Mixtures ordered so that every component precedes the mixtures using it.
fn dependency_order(mixtures: &BTreeMap<String, Vec<String>>) -> Result<Vec<(String, Vec<String>)>, CliError> {
    let mut out: Vec<(String, Vec<String>)> = Vec::new();
    let mut pending: Vec<(&String, &Vec<String>)> = mixtures.iter().collect();
    while !pending.is_empty() {
        let before = pending.len();
        pending.retain(|(id, parts)| {
            let ready = parts.iter().all(|c| !mixtures.contains_key(c) || out.iter().any(|(o, _)| o == c));
            if ready {
                out.push(((*id).clone(), (*parts).clone()));
            }
            !ready
        });
        if pending.len() == before {
            return Err(CliError::Input(format!("mixtures form a cycle through '{}'", pending[0].0)));
        }
    }
    Ok(out)
}

impl TableFile {
    pub fn to_table(&self) -> Result<PossibilityTable, CliError> {
        let mixtures = dependency_order(&self.mixtures)?;
        let mut contexts = Vec::new();
        for c in &self.contexts {
            let flags = c
                .flags
                .iter()
                .map(|f| {
                    Flag::parse(f).ok_or_else(|| {
                        CliError::Input(format!("context ({}, {}): unknown flag '{f}'", c.prep, c.meas))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            contexts.push(Context { prep: c.prep.clone(), meas: c.meas.clone(), flags });
        }
        let atomic = match &self.atomic {
            Some(a) => a.clone(),
            None => {
                let mut a: Vec<String> = Vec::new();
                let mut note = |p: &String| {
                    if !self.mixtures.contains_key(p) && !a.contains(p) {
                        a.push(p.clone());
                    }
                };
                for c in &self.contexts {
                    note(&c.prep);
                }
                for parts in self.mixtures.values() {
                    parts.iter().for_each(&mut note);
                }
                a
            }
        };
        let measurements = match &self.measurements {
            Some(ms) => ms
                .iter()
                .map(|m| TableMeasurement { id: m.id.clone(), outcomes: m.outcomes, parts: m.parts.clone() })
                .collect(),
            None => {
                let mut ms: Vec<TableMeasurement> = Vec::new();
                for c in &contexts {
                    if let Some(m) = ms.iter().find(|m| m.id == c.meas) {
                        if m.outcomes != c.flags.len() {
                            return Err(CliError::Input(format!(
                                "measurement '{}' has {} outcomes in one context and {} in another",
                                c.meas,
                                m.outcomes,
                                c.flags.len()
                            )));
                        }
                    } else {
                        ms.push(TableMeasurement { id: c.meas.clone(), outcomes: c.flags.len(), parts: None });
                    }
                }
                ms
            }
        };
        let table = PossibilityTable {
            atomic,
            mixtures,
            measurements,
            contexts,
            prep_classes: self.prep_classes.clone(),
            effect_classes: self.effect_classes.clone(),
            equal_effects: self.equal_effects.clone(),
            tol_zero: self.options.tol_zero.unwrap_or(1e-9),
        };
        table.validate().map_err(|e| CliError::Input(e.to_string()))?;
        Ok(table)
    }

    pub fn from_table(t: &PossibilityTable) -> Self {
        TableFile {
            atomic: Some(t.atomic.clone()),
            mixtures: t.mixtures.iter().cloned().collect(),
            measurements: Some(
                t.measurements
                    .iter()
                    .map(|m| TableMeasFile { id: m.id.clone(), outcomes: m.outcomes, parts: m.parts.clone() })
                    .collect(),
            ),
            contexts: t
                .contexts
                .iter()
                .map(|c| ContextFile {
                    prep: c.prep.clone(),
                    meas: c.meas.clone(),
                    flags: c.flags.iter().map(|f| f.name().to_string()).collect(),
                })
                .collect(),
            prep_classes: t.prep_classes.clone(),
            effect_classes: t.effect_classes.clone(),
            equal_effects: t.equal_effects.clone(),
            options: TableOptions { tol_zero: Some(t.tol_zero), ..TableOptions::default() },
        }
    }
}

pub fn read_table(path: &Path) -> Result<(PossibilityTable, TableOptions), CliError> {
    let file = read_json::<TableFile>(path)?;
    let table = file.to_table().map_err(|e| match e {
        CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    Ok((table, file.options))
}
