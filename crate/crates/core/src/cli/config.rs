//! Config files: flat `key = value` text or a JSON object.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Parses `key = value` lines (`#` starts a comment) into a JSON object.
/// Values that parse as JSON scalars keep their type; anything else is a
/// string.
pub fn parse_key_values(text: &str) -> Result<Map<String, Value>> {
    let mut map = Map::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected key = value, got {raw:?}", i + 1))
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        let value = value.trim();
        let parsed = match serde_json::from_str::<Value>(value) {
            Ok(v) if !v.is_object() && !v.is_array() => v,
            _ => Value::String(value.to_string()),
        };
        if map.insert(key.to_string(), parsed).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key {key:?}", i + 1)));
        }
    }
    Ok(map)
}

/// Reads a config object from either format. JSON is detected by a
/// leading `{`.
pub fn read_object(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_object(&text)
}

pub fn parse_object(text: &str) -> Result<Value> {
    if text.trim_start().starts_with('{') {
        let v: Value = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
        Ok(v)
    } else {
        Ok(Value::Object(parse_key_values(text)?))
    }
}

/// Deserializes with serde's messages (unknown or mistyped keys) turned
/// into config errors.
pub fn from_object<T: DeserializeOwned>(value: Value) -> Result<T> {
    serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
}

/// Applies `BTX_SEED` when it is set.
pub fn seed_override() -> Result<Option<u64>> {
    match std::env::var("BTX_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("BTX_SEED is not an integer: {s:?}"))),
        Err(_) => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::TrainConfig;

    #[test]
    fn key_values_keep_types() {
        let m = parse_key_values("# comment\nlearning_rate = 0.5\nlr_halving=true\nname = toy # x\n")
            .unwrap();
        assert_eq!(m["learning_rate"], Value::from(0.5));
        assert_eq!(m["lr_halving"], Value::Bool(true));
        assert_eq!(m["name"], Value::from("toy"));
    }

    #[test]
    fn malformed_lines_rejected() {
        assert!(parse_key_values("just words").is_err());
        assert!(parse_key_values("a = 1\na = 2").is_err());
        assert!(parse_key_values(" = 2").is_err());
    }

    #[test]
    fn both_formats_give_the_same_config() {
        let kv: TrainConfig = from_object(parse_object("batch_size = 8\nseed = 3").unwrap()).unwrap();
        let js: TrainConfig =
            from_object(parse_object(r#"{"batch_size": 8, "seed": 3}"#).unwrap()).unwrap();
        assert_eq!(kv, js);
        assert_eq!(kv.batch_size, 8);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = from_object::<TrainConfig>(parse_object("learning_rat = 0.1").unwrap()).unwrap_err();
        assert!(err.to_string().contains("learning_rat"));
    }
}
