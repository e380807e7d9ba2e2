//! Layering of JSON config files under command-line flags.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::CliError;

pub fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

pub fn read_as<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_value(read_json(path)?).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// Flags that were not given serialize as null, false or an empty list and
/// leave the file's value in place.
fn given(v: &Value) -> bool {
    match v {
        Value::Null | Value::Bool(false) => false,
        Value::Array(a) => !a.is_empty(),
        Value::Object(o) => !o.is_empty(),
        _ => true,
    }
}

/// `flags` over the contents of `config`; flags win.
pub fn layered<T: Serialize + DeserializeOwned>(flags: &T, config: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = config else {
        return Ok(
            serde_json::from_value(serde_json::to_value(flags).expect("args serialize")).expect("args round-trip")
        );
    };
    let Value::Object(mut merged) = read_json(path)? else {
        return Err(CliError::config(format!("{}: config must be a JSON object", path.display())));
    };
    let Value::Object(over) = serde_json::to_value(flags).expect("args serialize") else { unreachable!() };
    for (k, v) in over {
        if given(&v) {
            merged.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// Overlay `over` onto the object `base`, refusing keys `base` lacks.
pub fn overlay(base: &mut Value, over: &Map<String, Value>, what: &str) -> Result<(), CliError> {
    let obj = base.as_object_mut().expect("object");
    for (k, v) in over {
        if !obj.contains_key(k) {
            return Err(CliError::config(format!("unknown {what} `{k}`")));
        }
        obj.insert(k.clone(), v.clone());
    }
    Ok(())
}

/// Parse `key=value` pairs; values are JSON when they parse as JSON and
/// strings otherwise.
pub fn parse_sets(sets: &[String]) -> Result<Map<String, Value>, CliError> {
    let mut out = Map::new();
    for s in sets {
        let (k, v) =
            s.split_once('=').ok_or_else(|| CliError::config(format!("--set expects key=value, got `{s}`")))?;
        let val = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
        out.insert(k.trim().to_string(), val);
    }
    Ok(out)
}
