//! Report envelope, JSON converters for core results and the aligned-text renderer.

use serde_json::{json, Map, Value};

use nonctx_core::constructions::Fact;
use nonctx_core::feasibility::{Conflict, PossModel, PossOptions, Replay};
use nonctx_core::linalg::ComplexMatrix;
use nonctx_core::relations::{AssumptionReport, Violation, Witness};

use crate::io::matrix_to_json;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Verdict in the shell sense: 0 passed / SAT / built, 1 failed / UNSAT.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn of(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn exit_code(self) -> u8 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub command: String,
    pub options: Value,
    pub verdict: Verdict,
    pub body: Map<String, Value>,
}

impl Report {
    pub fn new(command: &str, options: Value, verdict: Verdict) -> Self {
        Report { command: command.to_string(), options, verdict, body: Map::new() }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.body.insert(key.to_string(), value.into());
        self
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.body.insert(key.to_string(), value.into());
    }

    /// Report fields plus `schema_version`, `tool_version`, `command` and `options`. Keys are
    /// sorted, so equal reports serialize to identical bytes.
    pub fn to_value(&self) -> Value {
        let mut m = self.body.clone();
        m.insert("schema_version".into(), json!(SCHEMA_VERSION));
        m.insert("tool_version".into(), json!(TOOL_VERSION));
        m.insert("command".into(), json!(self.command));
        m.insert("options".into(), self.options.clone());
        Value::Object(m)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_value()).expect("reports are plain JSON");
        s.push('\n');
        s
    }

    pub fn to_table(&self) -> String {
        render_table(&self.to_value())
    }
}

pub fn matrix(m: &ComplexMatrix) -> Value {
    serde_json::to_value(matrix_to_json(m)).expect("matrix")
}

pub fn fact(f: &Fact) -> Value {
    json!({"fact": f.fact, "rule": f.rule, "refs": f.refs, "holds": f.holds})
}

pub fn facts(fs: &[Fact]) -> Value {
    Value::Array(fs.iter().map(fact).collect())
}

pub fn witness(w: &Witness) -> Value {
    match w {
        Witness::Lambda { index, label } => json!({"kind": "lambda", "index": index, "label": label}),
        Witness::Transition { source, target } => json!({"kind": "transition", "source": source, "target": target}),
        Witness::Distance { value, bound } => json!({"kind": "distance", "value": value, "bound": bound}),
        Witness::CertaintySet { index, label } => json!({"kind": "certainty_set", "index": index, "label": label}),
    }
}

pub fn violation(v: &Violation) -> Value {
    json!({"pair": [v.pair.0.to_string(), v.pair.1.to_string()], "witness": witness(&v.witness)})
}

pub fn assumption_report(r: &AssumptionReport, list_pairs: bool) -> Value {
    let mut m = Map::new();
    m.insert("assumption".into(), json!(r.assumption.to_string()));
    m.insert("holds".into(), json!(r.holds()));
    m.insert("examined".into(), json!(r.examined.len()));
    m.insert("violations".into(), Value::Array(r.violations.iter().map(violation).collect()));
    if list_pairs {
        let pairs: Vec<Value> = r.examined.iter().map(|(a, b)| json!([a.to_string(), b.to_string()])).collect();
        m.insert("examined_pairs".into(), Value::Array(pairs));
    }
    Value::Object(m)
}

pub fn poss_options(o: &PossOptions) -> Value {
    json!({
        "prep_nc": o.prep_nc,
        "meas_nc": o.meas_nc,
        "trichotomy": o.trichotomy,
        "product_rule": o.product_rule,
        "max_types": o.max_types.to_string(),
    })
}

pub fn conflict(c: &Conflict, replay: Option<Replay>) -> Value {
    let mut m = Map::new();
    m.insert("goal".into(), json!(c.goal.to_string()));
    m.insert("constraints".into(), json!(c.constraints.iter().map(|x| x.to_string()).collect::<Vec<_>>()));
    m.insert(
        "chain".into(),
        Value::Array(c.chain.iter().map(|s| json!({"fact": s.fact, "because": s.because.to_string()})).collect()),
    );
    m.insert("violated".into(), json!(c.violated.as_ref().map(|v| v.to_string())));
    if let Some(r) = replay {
        m.insert("replay".into(), json!({"unsatisfiable": r.unsatisfiable, "minimal": r.minimal}));
    }
    Value::Object(m)
}

pub fn poss_model(m: &PossModel) -> Value {
    let types: Vec<Value> = m
        .types
        .iter()
        .map(|t| {
            let support: Vec<&String> = m.atomic.iter().zip(&t.membership).filter(|(_, &b)| b).map(|(a, _)| a).collect();
            let allowed: Map<String, Value> = t
                .allowed
                .iter()
                .map(|(k, v)| {
                    let outs: Vec<usize> = v.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
                    (k.clone(), json!(outs))
                })
                .collect();
            json!({"support_of": support, "allowed": allowed})
        })
        .collect();
    json!({"size": m.len(), "types": types})
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some("-".into()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        _ => None,
    }
}

/// Arrays of flat objects with equal keys become column tables; other nested values are printed as
/// compact JSON.
fn as_rows(v: &Value) -> Option<(Vec<String>, Vec<Vec<String>>)> {
    let arr = v.as_array()?;
    let first = arr.first()?.as_object()?;
    let keys: Vec<String> = first.keys().cloned().collect();
    let mut rows = Vec::new();
    for item in arr {
        let obj = item.as_object()?;
        if obj.keys().ne(keys.iter()) {
            return None;
        }
        rows.push(keys.iter().map(|k| scalar(&obj[k]).unwrap_or_else(|| obj[k].to_string())).collect());
    }
    Some((keys, rows))
}

fn columns(header: &[String], rows: &[Vec<String>], indent: &str, out: &mut String) {
    let mut width: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String], out: &mut String| {
        let parts: Vec<String> =
            cells.iter().zip(&width).map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count()))).collect();
        out.push_str(indent);
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(header, out);
    for r in rows {
        line(r, out);
    }
}

pub fn render_table(v: &Value) -> String {
    let mut out = String::new();
    let Some(obj) = v.as_object() else {
        return format!("{v}\n");
    };
    let mut simple: Vec<(String, String)> = Vec::new();
    let mut nested: Vec<(&String, &Value)> = Vec::new();
    for (k, val) in obj {
        match scalar(val) {
            Some(s) => simple.push((k.clone(), s)),
            None => nested.push((k, val)),
        }
    }
    let w = simple.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
    for (k, s) in &simple {
        out.push_str(&format!("{k}{}  {s}\n", " ".repeat(w - k.chars().count())));
    }
    for (k, val) in nested {
        out.push_str(&format!("\n{k}:\n"));
        if let Some((header, rows)) = as_rows(val) {
            columns(&header, &rows, "  ", &mut out);
        } else if let Some(inner) = val.as_object() {
            let w = inner.keys().map(|k| k.chars().count()).max().unwrap_or(0);
            for (ik, iv) in inner {
                let s = scalar(iv).unwrap_or_else(|| iv.to_string());
                out.push_str(&format!("  {ik}{}  {s}\n", " ".repeat(w - ik.chars().count())));
            }
        } else if let Some(arr) = val.as_array() {
            for item in arr {
                out.push_str(&format!("  {}\n", scalar(item).unwrap_or_else(|| item.to_string())));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_and_sorting() {
        let r = Report::new("bound", json!({"N": 1}), Verdict::Pass).with("bound", 0.5);
        let v = r.to_value();
        assert_eq!(v["bound"], json!(0.5));
        assert_eq!(v["schema_version"], json!(SCHEMA_VERSION));
        let text = r.to_json();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(serde_json::from_str::<Value>(&text).unwrap(), v);
    }

    #[test]
    fn table_rendering() {
        let v = json!({"status": "SAT", "rows": [{"N": 1, "bound": 0.5}, {"N": 2, "bound": 0.75}], "x": {"a": 1}});
        let t = render_table(&v);
        assert!(t.starts_with("status  SAT\n"), "{t}");
        assert!(t.contains("  N  bound\n  1  0.5\n  2  0.75\n"), "{t}");
        assert!(t.contains("x:\n  a  1\n"), "{t}");
    }
}
