//! `--config FILE` support. Each `key=value` line becomes `--key value`
//! (`key=true` becomes a bare `--key`, `key=false` is dropped) and is
//! inserted right after the subcommand name, so later command-line flags
//! override it.

use std::ffi::OsString;
use std::path::Path;

const SUBCOMMANDS: [&str; 7] = [
    "scan",
    "holes",
    "build-dataset",
    "pack",
    "eval",
    "train-toy",
    "stats",
];

pub fn parse_config(text: &str, path: &Path) -> Result<Vec<OsString>, String> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("{}:{}: expected key=value", path.display(), n + 1))?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        let value = value.trim();
        match value {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                out.push(format!("--{key}").into());
                out.push(value.into());
            }
        }
    }
    Ok(out)
}

/// Locates `--config` in raw arguments.
fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

/// Returns `args` with the config file's flags spliced in.
pub fn inject(args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let extra = parse_config(&text, path)?;
    let Some(pos) = args
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()))
    else {
        return Ok(args);
    };
    let mut out = args[..=pos].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[pos + 1..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lines_become_flags() {
        let flags = parse_config(
            "n = 4\n# comment\nno_surrounding=true\nforce=false\n",
            Path::new("c"),
        )
        .unwrap();
        assert_eq!(flags, ["--n", "4", "--no-surrounding"].map(OsString::from));
        assert!(parse_config("oops", Path::new("c")).is_err());
    }
}
