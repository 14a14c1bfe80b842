//! `--config` support: each `key = value` line becomes `--key value`,
//! inserted right after the subcommand. Keys whose flag is already on the
//! command line are dropped, so explicit flags win.

use std::path::Path;

use crate::Failure;

const GLOBAL_WITH_VALUE: [&str; 2] = ["--seed", "--config"];

fn config_path(argv: &[String]) -> Option<String> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

/// Index of the subcommand token, skipping global options and their values.
fn subcommand_index(argv: &[String]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let a = &argv[i];
        if GLOBAL_WITH_VALUE.contains(&a.as_str()) {
            i += 2;
        } else if a.starts_with('-') {
            i += 1;
        } else {
            return Some(i);
        }
    }
    None
}

fn flag_values(key: &str, value: &toml::Value) -> Result<Vec<String>, Failure> {
    let flag = format!("--{}", key.replace('_', "-"));
    let scalar = |v: &toml::Value| -> Result<String, Failure> {
        match v {
            toml::Value::String(s) => Ok(s.clone()),
            toml::Value::Integer(i) => Ok(i.to_string()),
            toml::Value::Float(f) => Ok(f.to_string()),
            other => Err(Failure::usage(format!("config key {key:?}: unsupported value {other}"))),
        }
    };
    Ok(match value {
        toml::Value::Boolean(true) => vec![flag],
        toml::Value::Boolean(false) => Vec::new(),
        toml::Value::Array(items) => {
            let parts = items.iter().map(scalar).collect::<Result<Vec<_>, _>>()?;
            vec![flag, parts.join(",")]
        }
        v => vec![flag, scalar(v)?],
    })
}

/// Returns `argv` with the config file's settings spliced in.
pub fn expand(argv: Vec<String>) -> Result<Vec<String>, Failure> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(Path::new(&path))
        .map_err(|e| Failure::usage(format!("cannot read config {path}: {e}")))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| Failure::usage(format!("config {path}: {e}")))?;
    let Some(at) = subcommand_index(&argv) else {
        return Ok(argv);
    };
    let given = |key: &str| {
        let flag = format!("--{}", key.replace('_', "-"));
        argv.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}=")))
    };
    let mut extra = Vec::new();
    for (key, value) in &table {
        if key == "config" || given(key) || (key == "seed" && std::env::var_os("SOLICIT_SEED").is_some()) {
            continue;
        }
        if let toml::Value::Table(_) = value {
            return Err(Failure::usage(format!("config key {key:?}: sections are not supported")));
        }
        extra.extend(flag_values(key, value)?);
    }
    let mut out = argv[..=at].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[at + 1..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn finds_subcommand_after_globals() {
        assert_eq!(subcommand_index(&v(&["solicit", "--seed", "3", "train", "--kind", "svm"])), Some(3));
        assert_eq!(subcommand_index(&v(&["solicit", "--config", "a.toml", "eval"])), Some(3));
        assert_eq!(subcommand_index(&v(&["solicit", "--help"])), None);
    }

    #[test]
    fn values_become_flags() {
        assert_eq!(flag_values("min_fraction", &toml::Value::Float(0.1)).unwrap(), v(&["--min-fraction", "0.1"]));
        assert_eq!(flag_values("budget", &toml::Value::Integer(50)).unwrap(), v(&["--budget", "50"]));
        let arr = toml::Value::Array(vec![toml::Value::Integer(25), toml::Value::Integer(50)]);
        assert_eq!(flag_values("sizes", &arr).unwrap(), v(&["--sizes", "25,50"]));
        assert!(flag_values("x", &toml::Value::Boolean(false)).unwrap().is_empty());
    }

    #[test]
    fn splices_after_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("solicit.toml");
        std::fs::write(&p, "kind = \"svm\"\nbenefit = 3\n").unwrap();
        let argv = v(&["solicit", "--config", p.to_str().unwrap(), "train", "--benefit=4"]);
        let out = expand(argv).unwrap();
        assert_eq!(&out[3..], &v(&["train", "--kind", "svm", "--benefit=4"])[..]);
    }
}
