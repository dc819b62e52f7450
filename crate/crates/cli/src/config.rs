//! Optional `key = value` config files, merged under the command line.

use std::ffi::OsString;
use std::fs;

/// Value of `--config` in `args`, if any.
fn config_path(args: &[OsString]) -> Option<String> {
    let mut it = args.iter().map(|a| a.to_string_lossy().into_owned());
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

/// Parse `key = value` lines; `#` starts a comment, keys may use `_` or `-`.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!("config line {}: expected key = value", k + 1));
        };
        let key = key.trim().replace('_', "-");
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(format!("config line {}: bad key '{}'", k + 1, key));
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

/// Append the config entries as flags unless the command line already sets them.
/// Values are normalised the way flags would be: `radial_power` → `radial-power`.
pub fn merge(args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some(path) = config_path(&args) else { return Ok(args) };
    let text = fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let given: Vec<String> = args.iter().map(|a| a.to_string_lossy().split('=').next().unwrap_or("").to_string()).collect();
    let mut out = args;
    for (key, value) in parse(&text)? {
        let flag = format!("--{key}");
        if key == "config" || given.contains(&flag) {
            continue;
        }
        match value.as_str() {
            "true" => out.push(flag.into()),
            "false" => {}
            v if key == "weight" => out.push(format!("{flag}={}", v.replace('_', "-")).into()),
            v => out.push(format!("{flag}={v}").into()),
        }
    }
    Ok(out)
}
