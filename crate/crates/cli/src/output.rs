use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::args::{Format, GlobalArgs};
use crate::Failure;

pub const SCHEMA_VERSION: u32 = 1;

/// Everything needed to re-run a command bit-identically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub model_file: Option<PathBuf>,
    pub flags: BTreeMap<String, String>,
    pub seed: u64,
    pub artifact_version: String,
    pub outputs: Vec<PathBuf>,
    pub timestamp: String,
    /// Full argument vector, program name excluded.
    pub argv: Vec<String>,
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

// `--key value` and `--key=value` pairs; bare switches map to "true".
fn flag_map(argv: &[String]) -> BTreeMap<String, String> {
    let mut flags = BTreeMap::new();
    let mut i = 0;
    while i < argv.len() {
        if let Some(key) = argv[i].strip_prefix("--") {
            if let Some((k, v)) = key.split_once('=') {
                flags.insert(k.to_string(), v.to_string());
            } else if i + 1 < argv.len() && (!argv[i + 1].starts_with("--")) {
                flags.insert(key.to_string(), argv[i + 1].clone());
                i += 1;
            } else {
                flags.insert(key.to_string(), "true".to_string());
            }
        }
        i += 1;
    }
    flags
}

/// A command result renderable as JSON or CSV.
pub struct Payload {
    pub json: Value,
    pub csv: String,
    pub default_format: Format,
}

pub struct RunContext<'a> {
    pub global: &'a GlobalArgs,
    pub command: &'a str,
    pub argv: &'a [String],
    pub model_file: Option<PathBuf>,
}

pub fn render(payload: &Payload, format: Option<Format>) -> String {
    match format.unwrap_or(payload.default_format) {
        Format::Json => {
            let mut s =
                serde_json::to_string_pretty(&payload.json).expect("JSON values always serialise");
            s.push('\n');
            s
        }
        Format::Csv => payload.csv.clone(),
    }
}

pub fn emit(ctx: &RunContext<'_>, payload: &Payload) -> Result<(), Failure> {
    let body = render(payload, ctx.global.format);
    match &ctx.global.out {
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(body.as_bytes())
                .and_then(|_| stdout.flush())
                .context("cannot write to stdout")
                .map_err(Failure::Internal)?;
        }
        Some(out) => {
            fs::write(out, &body)
                .with_context(|| format!("cannot write {}", out.display()))
                .map_err(Failure::Usage)?;
            let mut argv = ctx.argv.to_vec();
            if !argv
                .iter()
                .any(|a| a == "--seed" || a.starts_with("--seed="))
            {
                argv.extend(["--seed".to_string(), ctx.global.seed.to_string()]);
            }
            let manifest = RunManifest {
                command: ctx.command.to_string(),
                model_file: ctx.model_file.clone(),
                flags: flag_map(&argv),
                seed: ctx.global.seed,
                artifact_version: env!("CARGO_PKG_VERSION").to_string(),
                outputs: vec![out.clone()],
                timestamp: chrono::Utc::now().to_rfc3339(),
                argv,
            };
            let path = manifest_path(out);
            let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
            fs::write(&path, text + "\n")
                .with_context(|| format!("cannot write {}", path.display()))
                .map_err(Failure::Usage)?;
        }
    }
    Ok(())
}

/// Joins floats as CSV fields with shortest round-trip formatting.
pub fn csv_num(v: f64) -> String {
    format!("{v}")
}

pub fn csv_opt(v: Option<f64>) -> String {
    v.map(csv_num).unwrap_or_default()
}

/// Header comment lines carried by every CSV.
pub fn csv_preamble(pairs: &[(&str, String)]) -> String {
    let mut s = format!("# schema_version={SCHEMA_VERSION}\n");
    for (k, v) in pairs {
        s.push_str(&format!("# {k}={v}\n"));
    }
    s
}

/// Quotes a text field when it contains a separator or quote.
pub fn csv_text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
