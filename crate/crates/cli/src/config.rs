//! `key = value` run-configuration files.
//!
//! Each entry becomes the long flag `--key value` (`true` and `false` switch
//! boolean flags). The entries are spliced into the argument list where
//! `--config` appeared, so flags given after it take precedence.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};

pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected `key = value`, found {line:?}", i + 1);
        };
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            bail!("config line {}: empty key", i + 1);
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

fn config_args(path: &Path) -> Result<Vec<OsString>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut args = Vec::new();
    for (k, v) in parse_config(&text)? {
        match v.as_str() {
            "true" => args.push(format!("--{k}").into()),
            "false" => {}
            _ => {
                args.push(format!("--{k}").into());
                args.push(v.into());
            }
        }
    }
    Ok(args)
}

/// Replaces every `--config FILE` (or `--config=FILE`) with the file's flags.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut out = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            let Some(path) = it.next() else { bail!("--config needs a file") };
            out.extend(config_args(Path::new(&path))?);
        } else if let Some(path) = s.strip_prefix("--config=") {
            out.extend(config_args(Path::new(path))?);
        } else {
            out.push(a);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_entries() {
        let c = parse_config("# run\nmetric = angular\nclusters=6 # six sides\n\nallow_nonmanifold = true\n").unwrap();
        assert_eq!(
            c,
            vec![
                ("metric".into(), "angular".into()),
                ("clusters".into(), "6".into()),
                ("allow-nonmanifold".into(), "true".into())
            ]
        );
        assert!(parse_config("metric angular").is_err());
    }

    #[test]
    fn splices_in_place() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.cfg");
        std::fs::write(&p, "clusters = 4\nverbose = false\nflag = true\n").unwrap();
        let args: Vec<OsString> = ["fss", "segment", "--config", p.to_str().unwrap(), "--clusters", "5"]
            .iter()
            .map(OsString::from)
            .collect();
        let got = expand_config(args).unwrap();
        let got: Vec<String> = got.iter().map(|a| a.to_string_lossy().into_owned()).collect();
        assert_eq!(got, ["fss", "segment", "--clusters", "4", "--flag", "--clusters", "5"]);
    }
}
