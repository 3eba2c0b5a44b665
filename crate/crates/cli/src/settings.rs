//! Flat JSON settings, flag overrides, run manifests and exit codes.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_NUMERIC,
            message: message.into(),
        }
    }

    /// Prefixes the message, keeping the exit code.
    pub fn context(self, what: impl fmt::Display) -> Self {
        CliError {
            code: self.code,
            message: format!("{what}: {}", self.message),
        }
    }
}

impl From<tcn_impedance::Error> for CliError {
    fn from(e: tcn_impedance::Error) -> Self {
        use tcn_impedance::Error::*;
        match e {
            NonFinite(_) | Diverged { .. } | NonDeterministic { .. } => CliError::numeric(e.to_string()),
            _ => CliError::input(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::input(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn as_object(v: Value, what: &str) -> CliResult<Map<String, Value>> {
    match v {
        Value::Object(m) => Ok(m),
        _ => Err(CliError::input(format!("{what} must be a JSON object"))),
    }
}

/// Defaults, then the `--config` file, then explicit flags.
///
/// The file is either a flat object of settings or a manifest written by a
/// previous run of the same command, whose `config` is used.
pub fn resolve<S>(command: &str, file: Option<&Path>, flags: &impl Serialize) -> CliResult<S>
where
    S: Serialize + DeserializeOwned + Default,
{
    let mut merged = as_object(serde_json::to_value(S::default()).expect("settings serialize"), "settings")?;
    if let Some(path) = file {
        let text = fs::read_to_string(path).map_err(|e| CliError::from(e).context(path.display()))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let mut obj = as_object(value, "config file")?;
        if let (Some(Value::String(cmd)), Some(_)) = (obj.get("command"), obj.get("config")) {
            if cmd != command {
                return Err(CliError::input(format!(
                    "{}: manifest is from `{cmd}`, not `{command}`",
                    path.display()
                )));
            }
            obj = as_object(obj.remove("config").unwrap(), "manifest config")?;
        }
        for (k, v) in obj {
            if !merged.contains_key(&k) {
                return Err(CliError::input(format!("{}: unknown setting `{k}`", path.display())));
            }
            merged.insert(k, v);
        }
    }
    let flags = as_object(serde_json::to_value(flags).expect("flags serialize"), "flags")?;
    merged.extend(flags);
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::input(format!("invalid settings: {e}")))
}

pub fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
    path.as_deref()
        .ok_or_else(|| CliError::input(format!("missing --{flag} (flag or config key `{}`)", flag.replace('-', "_"))))
}

#[derive(Debug, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to rerun a command: `tcn-ai <command> --config manifest.json`.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub config: Value,
    pub inputs: BTreeMap<String, FileRecord>,
    pub outputs: BTreeMap<String, FileRecord>,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::from(e).context(path.display()))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

fn records(files: &[(&str, &Path)]) -> CliResult<BTreeMap<String, FileRecord>> {
    files
        .iter()
        .map(|(name, path)| {
            Ok((
                name.to_string(),
                FileRecord {
                    path: path.display().to_string(),
                    sha256: sha256_file(path)?,
                },
            ))
        })
        .collect()
}

pub fn write_manifest(
    out_dir: &Path,
    command: &str,
    seed: Option<u64>,
    config: &impl Serialize,
    inputs: &[(&str, &Path)],
    outputs: &[(&str, &Path)],
) -> CliResult<PathBuf> {
    let manifest = Manifest {
        tool: "tcn-ai",
        version: env!("CARGO_PKG_VERSION"),
        command: command.to_string(),
        seed,
        config: serde_json::to_value(config).expect("settings serialize"),
        inputs: records(inputs)?,
        outputs: records(outputs)?,
    };
    let path = out_dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| CliError::from(e).context(path.display()))?;
    Ok(path)
}
