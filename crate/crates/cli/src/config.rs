//! JSON configuration with `key=value` overrides.

use crate::CliError;
use serde::de::DeserializeOwned;
use serde_json::{Map, Value};
use std::path::Path;

/// Reads the config file (an empty object when absent), applies overrides
/// in order and deserialises the result.
pub fn load<T: DeserializeOwned>(path: Option<&Path>, overrides: &[(String, Value)]) -> Result<T, CliError> {
    let mut root = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::config(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str::<Value>(&text)
                .map_err(|e| CliError::config(format!("config {} is not valid JSON: {e}", p.display())))?
        }
        None => Value::Object(Map::new()),
    };
    if !root.is_object() {
        return Err(CliError::config("config must be a JSON object"));
    }
    for (key, value) in overrides {
        set_path(&mut root, key, value.clone())?;
    }
    serde_json::from_value(root).map_err(|e| CliError::config(format!("invalid config: {e}")))
}

/// Parses `key=value`; the value is read as JSON when possible and as a
/// plain string otherwise.
pub fn parse_override(s: &str) -> Result<(String, Value), CliError> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("override '{s}' is not of the form key=value")))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(CliError::config(format!("override '{s}' has an empty key")));
    }
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.to_string(), value))
}

/// Sets a dotted path, creating intermediate objects.
fn set_path(root: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    let parts: Vec<&str> = key.split('.').collect();
    let mut cur = root;
    for (i, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| CliError::config(format!("cannot set '{key}': '{}' is not an object", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Deserialize, Debug, PartialEq)]
    struct Inner {
        x: f64,
    }

    #[derive(Deserialize, Debug, PartialEq)]
    struct Outer {
        name: String,
        inner: Inner,
    }

    #[test]
    fn overrides_build_nested_values() {
        let o = vec![parse_override("name=abc").unwrap(), parse_override("inner.x=2.5").unwrap()];
        let v: Outer = load(None, &o).unwrap();
        assert_eq!(v, Outer { name: "abc".into(), inner: Inner { x: 2.5 } });
        assert!(parse_override("novalue").is_err());
        assert!(parse_override("=3").is_err());
        let bad = vec![parse_override("name=1").unwrap(), parse_override("name.y=2").unwrap()];
        assert!(load::<Outer>(None, &bad).is_err());
    }
}
