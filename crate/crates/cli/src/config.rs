//! `--config FILE` support. The file holds one table per subcommand:
//!
//! ```toml
//! [eval]
//! manifest = "corpus/manifest.json"
//! regimes = ["sage"]
//! workers = 4
//! ```
//!
//! Keys become flags (`v_thresh` and `v-thresh` both map to `--v-thresh`)
//! and are spliced in after the subcommand name unless the same flag was
//! given on the command line.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use sage_core::{Error, Result};
use toml::Value;

const SUBCOMMANDS: [&str; 5] = ["synth-gen", "sage-gen", "pipeline-run", "eval", "viz"];

fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter().skip(1);
    while let Some(arg) = it.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

fn config_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn scalar(path: &Path, key: &str, v: &Value) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Integer(i) => Ok(i.to_string()),
        Value::Float(f) => Ok(f.to_string()),
        other => Err(config_err(
            path,
            format!(
                "`{key}` must be a string, number, boolean or array, found {}",
                other.type_str()
            ),
        )),
    }
}

fn flags_for(path: &Path, table: &toml::Table, given: &BTreeSet<String>) -> Result<Vec<OsString>> {
    let mut out = Vec::new();
    for (key, value) in table {
        let flag = format!("--{}", key.replace('_', "-"));
        if flag == "--config" {
            return Err(config_err(
                path,
                "`config` cannot be set from a config file",
            ));
        }
        if given.contains(&flag) {
            continue;
        }
        match value {
            Value::Boolean(true) => out.push(flag.into()),
            Value::Boolean(false) => {}
            Value::Array(items) => {
                for item in items {
                    out.push(flag.clone().into());
                    out.push(scalar(path, key, item)?.into());
                }
            }
            v => {
                out.push(flag.into());
                out.push(scalar(path, key, v)?.into());
            }
        }
    }
    Ok(out)
}

/// Returns `argv` with the config file's values for the chosen subcommand
/// inserted. Without `--config` the arguments pass through untouched.
pub fn expand_args(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    let doc: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| config_err(&path, e.message()))?;
    for key in doc.keys() {
        let norm = key.replace('_', "-");
        if !SUBCOMMANDS.contains(&norm.as_str()) {
            return Err(config_err(&path, format!("unknown section `{key}`")));
        }
    }

    let Some(pos) = argv
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()))
    else {
        return Ok(argv);
    };
    let sub = argv[pos].to_string_lossy().into_owned();
    let section = doc
        .iter()
        .find(|(k, _)| k.replace('_', "-") == sub)
        .map(|(_, v)| v);
    let table = match section {
        None => return Ok(argv),
        Some(Value::Table(t)) => t,
        Some(_) => return Err(config_err(&path, format!("`{sub}` must be a table"))),
    };

    let given: BTreeSet<String> = argv[pos + 1..]
        .iter()
        .filter_map(|a| {
            let s = a.to_string_lossy();
            s.starts_with("--")
                .then(|| s.split('=').next().unwrap_or_default().to_owned())
        })
        .collect();
    let extra = flags_for(&path, table, &given)?;
    let mut out = argv;
    out.splice(pos + 1..pos + 1, extra);
    Ok(out)
}
