//! `key = value` configuration files merged underneath command-line flags.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::Path;

/// Parsed entries in file order.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`", n + 1))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(format!("line {}: empty key or value", n + 1));
        }
        if !seen.insert(key.clone()) {
            return Err(format!("line {}: duplicate key `{key}`", n + 1));
        }
        out.push((key, value));
    }
    Ok(out)
}

pub fn read_config(path: &Path) -> Result<Vec<(String, String)>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Insert `--key value` pairs right after the subcommand token so that
/// flags given on the command line, which come later, take precedence.
/// Keys must name a flag in `allowed`.
pub fn merge_args(
    argv: &[OsString],
    subcommand: &str,
    entries: &[(String, String)],
    allowed: &BTreeSet<String>,
) -> Result<Vec<OsString>, String> {
    for (k, _) in entries {
        if !allowed.contains(k) {
            return Err(format!("unknown configuration key `{k}` for `{subcommand}`"));
        }
    }
    let pos = argv
        .iter()
        .position(|a| a.to_str() == Some(subcommand))
        .ok_or_else(|| format!("subcommand `{subcommand}` not found in arguments"))?;
    let mut out: Vec<OsString> = argv[..=pos].to_vec();
    for (k, v) in entries {
        out.push(format!("--{k}").into());
        out.push(v.into());
    }
    out.extend_from_slice(&argv[pos + 1..]);
    Ok(out)
}
