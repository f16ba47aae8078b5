//! JSON run configurations.

use std::fs;
use std::path::Path;

use mackrl_core::trainer::RunConfig;
use serde_json::Value;

use crate::error::{HarnessError, Result};

pub fn load_config(path: &Path) -> Result<RunConfig> {
    if !path.is_file() {
        return Err(HarnessError::MissingConfig(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_config(&text).map_err(|msg| HarnessError::BadConfig {
        path: path.to_path_buf(),
        msg,
    })
}

/// Parses and validates a config.
pub fn parse_config(text: &str) -> std::result::Result<RunConfig, String> {
    let config: RunConfig = serde_json::from_str(text).map_err(|e| e.to_string())?;
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

pub fn config_to_json(config: &RunConfig) -> String {
    serde_json::to_string_pretty(config).expect("configs serialize")
}

pub fn save_config(path: &Path, config: &RunConfig) -> Result<()> {
    fs::write(path, config_to_json(config)).map_err(|e| HarnessError::io(path, e))
}

/// Resolves `name` to a dotted path into the config tree.
///
/// A full path (`hyper.actor_lr`, `env.matrix.flip_p`) is taken as is; otherwise
/// `name` must be the key of exactly one field anywhere in the tree. Hyphens
/// read as underscores.
pub fn resolve_param(config: &Value, name: &str) -> Option<Vec<String>> {
    let name = name.replace('-', "_");
    let path: Vec<String> = name.split('.').map(str::to_string).collect();
    if lookup(config, &path).is_some() {
        return Some(path);
    }
    let mut found = Vec::new();
    find_key(config, &name, &mut Vec::new(), &mut found);
    (found.len() == 1).then(|| found.pop().unwrap())
}

fn lookup<'a>(v: &'a Value, path: &[String]) -> Option<&'a Value> {
    path.iter().try_fold(v, |v, k| v.as_object()?.get(k))
}

fn find_key(v: &Value, key: &str, prefix: &mut Vec<String>, found: &mut Vec<Vec<String>>) {
    let Some(obj) = v.as_object() else { return };
    for (k, child) in obj {
        prefix.push(k.clone());
        if k == key {
            found.push(prefix.clone());
        }
        find_key(child, key, prefix, found);
        prefix.pop();
    }
}

/// `config` with the field at `path` replaced by `value`, validated.
pub fn with_param(
    config: &RunConfig,
    path: &[String],
    value: &Value,
) -> std::result::Result<RunConfig, String> {
    let mut tree = serde_json::to_value(config).map_err(|e| e.to_string())?;
    let (last, parents) = path.split_last().ok_or("empty parameter path")?;
    let mut slot = &mut tree;
    for k in parents {
        slot = slot.get_mut(k).ok_or_else(|| format!("no field {k}"))?;
    }
    let obj = slot
        .as_object_mut()
        .ok_or_else(|| format!("{} is not an object", parents.join(".")))?;
    if !obj.contains_key(last) {
        return Err(format!("no field {}", path.join(".")));
    }
    obj.insert(last.clone(), value.clone());
    let out: RunConfig =
        serde_json::from_value(tree).map_err(|e| format!("{} = {value}: {e}", path.join(".")))?;
    out.validate().map_err(|e| e.to_string())?;
    Ok(out)
}
