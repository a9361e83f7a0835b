//! `key = value` run files merged under the command line.
//!
//! Keys are long flag names (`mesh-order` or `mesh_order`). A `command`
//! key supplies the subcommand when none is given. Flags on the command
//! line win over file entries.

use std::path::Path;

use anyhow::{bail, Context, Result};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigEntry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

pub fn parse_config(text: &str) -> Result<Vec<ConfigEntry>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected key = value, got {raw:?}", i + 1);
        };
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            bail!("config line {}: empty key", i + 1);
        }
        out.push(ConfigEntry { key, value: v.trim().to_string(), line: i + 1 });
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> Result<Vec<ConfigEntry>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in {}", path.display()))
}

const SUBCOMMANDS: &[&str] = &["fit", "simulate", "study", "diagnose", "extract", "plot", "help"];

fn has_flag(args: &[String], key: &str) -> bool {
    let long = format!("--{key}");
    let eq = format!("--{key}=");
    args.iter().any(|a| *a == long || a.starts_with(&eq))
}

/// Pulls `--config <file>` out of `args` and appends the file's entries
/// that the command line does not already set.
pub fn merge_args(mut args: Vec<String>) -> Result<Vec<String>> {
    let mut path = None;
    let mut i = 1;
    while i < args.len() {
        if args[i] == "--config" {
            if i + 1 >= args.len() {
                bail!("--config needs a file");
            }
            path = Some(args.remove(i + 1));
            args.remove(i);
        } else if let Some(p) = args[i].strip_prefix("--config=") {
            path = Some(p.to_string());
            args.remove(i);
        } else {
            i += 1;
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let entries = load_config(Path::new(&path))?;

    let has_command = args.iter().skip(1).any(|a| SUBCOMMANDS.contains(&a.as_str()));
    if !has_command {
        match entries.iter().find(|e| e.key == "command") {
            Some(e) => args.insert(1.min(args.len()), e.value.clone()),
            None => bail!("no subcommand given and {path} has no `command` entry"),
        }
    }
    for e in entries.iter().filter(|e| e.key != "command") {
        if has_flag(&args, &e.key) {
            continue;
        }
        match e.value.as_str() {
            "true" => args.push(format!("--{}", e.key)),
            "false" => {}
            v => {
                args.push(format!("--{}", e.key));
                args.push(v.to_string());
            }
        }
    }
    Ok(args)
}

/// Hex SHA-256 of a canonical rendering of the effective settings.
pub fn config_hash(canonical: &str) -> String {
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
