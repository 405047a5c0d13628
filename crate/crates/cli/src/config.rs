//! Effective configuration: built-in defaults, overlaid by the config file
//! section, overlaid by command-line flags.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

pub fn load(path: &Path) -> Result<toml::Table> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.parse::<toml::Table>()
        .with_context(|| format!("parsing {}", path.display()))
}

fn overlay(base: &mut Map<String, Value>, layer: Map<String, Value>, origin: &str) -> Result<()> {
    for (k, v) in layer {
        if !base.contains_key(&k) {
            let known: Vec<&String> = base.keys().collect();
            bail!("unknown key '{k}' in {origin}; expected one of {known:?}");
        }
        if !v.is_null() {
            base.insert(k, v);
        }
    }
    Ok(())
}

/// Merges defaults of `C`, table `section` of `file`, and the flags in `args`
/// (fields left `None` are skipped), then validates by deserializing into `C`.
pub fn resolve<C, A>(file: Option<&toml::Table>, section: &str, args: &A) -> Result<Value>
where
    C: Serialize + DeserializeOwned + Default,
    A: Serialize,
{
    let Value::Object(mut merged) = serde_json::to_value(C::default())? else {
        unreachable!("configs serialize to objects")
    };
    if let Some(table) = file {
        if let Some(sec) = table.get(section) {
            let Value::Object(layer) = serde_json::to_value(sec)? else {
                bail!("config section [{section}] must be a table");
            };
            overlay(&mut merged, layer, &format!("config section [{section}]"))?;
        }
    }
    let Value::Object(flags) = serde_json::to_value(args)? else {
        unreachable!("arguments serialize to objects")
    };
    overlay(&mut merged, flags, "command-line flags")?;
    let value = Value::Object(merged);
    let typed: C = serde_json::from_value(value.clone()).context("invalid configuration")?;
    // Re-serialize so the echo is in canonical form.
    Ok(serde_json::to_value(typed)?)
}
