//! `--config FILE`: a JSON object whose keys are long flag names.
//!
//! Values are spliced in right after the subcommand, ahead of the flags given
//! on the command line, so explicit flags override them.

use std::ffi::OsString;
use std::path::Path;

use serde_json::Value;

const SUBCOMMANDS: [&str; 7] = [
    "construct",
    "validate",
    "sharpness",
    "robustness",
    "simulate",
    "estimate",
    "compare",
];

#[derive(Debug)]
pub struct ConfigError {
    pub io: bool,
    pub message: String,
}

fn config_path(argv: &[OsString]) -> Option<OsString> {
    let mut iter = argv.iter();
    while let Some(arg) = iter.next() {
        let text = arg.to_string_lossy();
        if text == "--config" {
            return iter.next().cloned();
        }
        if let Some(rest) = text.strip_prefix("--config=") {
            return Some(rest.into());
        }
    }
    None
}

fn scalar(key: &str, v: &Value) -> Result<String, ConfigError> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        _ => Err(ConfigError {
            io: false,
            message: format!("config value for {key:?} must be a string or number"),
        }),
    }
}

pub fn config_flags(path: &Path) -> Result<Vec<OsString>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        io: true,
        message: format!("{}: {e}", path.display()),
    })?;
    let value: Value = serde_json::from_str(&text).map_err(|e| ConfigError {
        io: false,
        message: format!("{}: {e}", path.display()),
    })?;
    let Value::Object(map) = value else {
        return Err(ConfigError {
            io: false,
            message: "config must be a JSON object".into(),
        });
    };
    let mut flags = Vec::new();
    for (key, v) in &map {
        if key == "config" {
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        match v {
            Value::Bool(true) => flags.push(flag.into()),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                for item in items {
                    flags.push(flag.clone().into());
                    flags.push(scalar(key, item)?.into());
                }
            }
            other => {
                flags.push(flag.into());
                flags.push(scalar(key, other)?.into());
            }
        }
    }
    Ok(flags)
}

pub fn expand_args(argv: Vec<OsString>) -> Result<Vec<OsString>, ConfigError> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let flags = config_flags(Path::new(&path))?;
    let at = argv
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()))
        .map_or(argv.len(), |i| i + 1);
    let mut out = argv[..at].to_vec();
    out.extend(flags);
    out.extend_from_slice(&argv[at..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(list: &[&str]) -> Vec<OsString> {
        list.iter().map(OsString::from).collect()
    }

    #[test]
    fn flags_follow_the_subcommand() {
        let dir = std::env::temp_dir().join(format!("mjm-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.json");
        std::fs::write(&path, r#"{"n": 3, "target": ["1,2", "3,4"], "verbose": true, "skip": false}"#).unwrap();
        let p = path.to_str().unwrap();
        let out = expand_args(args(&["bin", "--config", p, "estimate", "--n", "4"])).unwrap();
        assert_eq!(
            out,
            args(&[
                "bin", "--config", p, "estimate", "--n", "3", "--target", "1,2", "--target", "3,4", "--verbose", "--n",
                "4"
            ])
        );
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn without_config_nothing_changes() {
        let a = args(&["bin", "compare", "--k", "1"]);
        assert_eq!(expand_args(a.clone()).ok(), Some(a));
    }

    #[test]
    fn rejects_non_objects() {
        let dir = std::env::temp_dir().join(format!("mjm-config-bad-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.json");
        std::fs::write(&path, "[1, 2]").unwrap();
        let err = config_flags(&path).err().unwrap();
        assert!(!err.io);
        assert!(config_flags(&dir.join("missing.json")).err().unwrap().io);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
