//! Grid files: explicit candidates and/or a base table crossed with value
//! lists.
//!
//! ```toml
//! [base]
//! family = "svm"
//! kernel = { type = "rbf", gamma = 0.1 }
//! class_weighted = true
//!
//! [grid]
//! c = [1.0, 10.0, 100.0, 1000.0]
//! "kernel.gamma" = [0.01, 0.1, 1.0]
//! ```
//!
//! Candidates enumerate in file order, the last grid key varying fastest.

use serde::Deserialize;
use serde_json::{Map, Value};

use pollen_core::learn::ModelParams;

use crate::{Result, WorkbenchError};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    #[serde(default)]
    candidates: Vec<toml::Value>,
    base: Option<toml::Value>,
    #[serde(default)]
    grid: toml::Table,
}

fn invalid(msg: impl Into<String>) -> WorkbenchError {
    WorkbenchError::Invalid(msg.into())
}

fn set_dotted(target: &mut Value, key: &str, v: Value) -> Result<()> {
    let mut cur = target;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let map = cur
            .as_object_mut()
            .ok_or_else(|| invalid(format!("grid key {key:?} goes through a non-table")))?;
        if i + 1 == parts.len() {
            map.insert(part.to_string(), v);
            return Ok(());
        }
        cur = map.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

fn to_params(v: Value) -> Result<ModelParams> {
    serde_json::from_value(v).map_err(|e| invalid(format!("bad candidate: {e}")))
}

fn json(v: toml::Value) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| invalid(e.to_string()))
}

pub fn parse_grid(text: &str) -> Result<Vec<ModelParams>> {
    let file: GridFile = toml::from_str(text).map_err(|e| invalid(format!("grid file: {e}")))?;
    let mut out = file.candidates.into_iter().map(|c| to_params(json(c)?)).collect::<Result<Vec<_>>>()?;
    if let Some(base) = file.base {
        let base = json(base)?;
        let axes: Vec<(String, Vec<Value>)> = file
            .grid
            .into_iter()
            .map(|(k, v)| match v {
                toml::Value::Array(a) if !a.is_empty() => Ok((k, a.into_iter().map(json).collect::<Result<_>>()?)),
                _ => Err(invalid(format!("grid entry {k:?} must be a non-empty array"))),
            })
            .collect::<Result<_>>()?;
        let total: usize = axes.iter().map(|(_, v)| v.len()).product();
        for mut i in 0..total {
            let mut cand = base.clone();
            let mut picks = Vec::with_capacity(axes.len());
            for (_, values) in axes.iter().rev() {
                picks.push(i % values.len());
                i /= values.len();
            }
            picks.reverse();
            for ((key, values), &p) in axes.iter().zip(&picks) {
                set_dotted(&mut cand, key, values[p].clone())?;
            }
            out.push(to_params(cand)?);
        }
    } else if !file.grid.is_empty() {
        return Err(invalid("a [grid] table needs a [base] table"));
    }
    if out.is_empty() {
        return Err(invalid("grid file defines no candidates"));
    }
    Ok(out)
}
