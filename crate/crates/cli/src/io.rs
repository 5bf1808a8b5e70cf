//! Configuration loading, input parsing and report writing.

use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::Path;

use qcdeform_core::config::OutputFormat;
use qcdeform_core::{Error, RunConfig};
use serde::Serialize;
use serde_json::Value;

use crate::{Format, GlobalArgs};

/// A failed run: exit code 1 for usage or configuration errors, 2 for
/// numerical failures.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Display) -> Self {
        Self { code: 1, message: message.to_string() }
    }

    pub fn numerical(message: impl Display) -> Self {
        Self { code: 2, message: message.to_string() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Self::numerical(e)
        } else {
            Self::usage(e)
        }
    }
}

pub type CliResult<T> = Result<T, Failure>;

fn read_json(path: &Path) -> CliResult<Value> {
    let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("reading {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::usage(format!("parsing {}: {e}", path.display())))
}

/// Resolved configuration, subcommand input and whether the output format was
/// chosen explicitly.
pub struct Loaded {
    pub config: RunConfig,
    pub input: Option<Value>,
    pub explicit_format: bool,
}

pub fn load(global: &GlobalArgs) -> CliResult<Loaded> {
    let mut input = None;
    let mut explicit_format = false;
    let mut config = match &global.config {
        Some(path) => {
            let mut v = read_json(path)?;
            let obj = v.as_object_mut().ok_or_else(|| Failure::usage("the config file must hold a JSON object"))?;
            input = obj.remove("input");
            explicit_format = obj.contains_key("format");
            serde_json::from_value(v).map_err(|e| Failure::usage(format!("config: {e}")))?
        }
        None => RunConfig::default(),
    };
    if let Some(path) = &global.input {
        input = Some(read_json(path)?);
    }
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    if let Some(f) = global.format {
        explicit_format = true;
        config.format = match f {
            Format::Json => OutputFormat::Json,
            Format::Csv => OutputFormat::Csv,
        };
    }
    if let Some(t) = global.tol {
        config.tolerances.coeff = t;
        config.tolerances.norm = t;
        config.tolerances.neumann = t;
    }
    config.validate().map_err(|e| Failure::usage(format!("config: {e}")))?;
    Ok(Loaded { config, input, explicit_format })
}

pub fn parse<T: serde::de::DeserializeOwned>(v: Value, what: &str) -> CliResult<T> {
    serde_json::from_value(v).map_err(|e| Failure::usage(format!("{what}: {e}")))
}

pub fn require(input: Option<Value>, command: &str) -> CliResult<Value> {
    input.ok_or_else(|| Failure::usage(format!("`{command}` needs an input (--in PATH or an \"input\" key in --config)")))
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    config: &'a RunConfig,
    result: T,
}

pub fn json_report<T: Serialize>(command: &str, config: &RunConfig, result: T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(&Envelope { command, config, result })
        .map_err(|e| Failure::numerical(format!("serializing the report: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// CSV preceded by `#` comment lines carrying the command and the configuration.
pub fn csv_report(command: &str, config: &RunConfig, notes: &[String], header: &[&str], rows: &[Vec<String>]) -> CliResult<String> {
    let cfg = serde_json::to_string(config).map_err(|e| Failure::numerical(e.to_string()))?;
    let mut out = format!("# qcdeform {command}\n# config: {cfg}\n");
    for n in notes {
        out.push_str(&format!("# {n}\n"));
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    Ok(out)
}

pub fn emit(global: &GlobalArgs, text: &str) -> CliResult<()> {
    match &global.out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::usage(format!("writing {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| Failure::usage(format!("writing stdout: {e}")))
        }
    }
}

/// Shortest round-trip representation of a float.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}
