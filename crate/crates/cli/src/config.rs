//! `--config FILE` support: `key=value` lines whose keys are long flag names.
//! Flags given on the command line win over the file, which wins over the
//! built-in defaults.

use std::ffi::OsString;

use perc_core::percolation::parse_metadata;

/// Returns `argv` with the config file's entries appended as flags, skipping
/// keys already present on the command line and the `--config` flag itself.
pub fn merge(argv: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let strings: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let Some(path) = config_path(&strings) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let entries = parse_metadata(&text).map_err(|e| format!("config {path}: {e}"))?;
    let mut out = argv;
    for (key, value) in entries {
        if key == "config" || given(&strings, &key) {
            continue;
        }
        match value.as_str() {
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

fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(v.to_string());
        }
    }
    None
}

fn given(args: &[String], key: &str) -> bool {
    let flag = format!("--{key}");
    args.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}=")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn flags_override_file() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "# defaults\nseed=5\niterations=1000\nedges=true\nquiet=false").unwrap();
        let path = f.path().to_str().unwrap().to_string();
        let merged = merge(os(&["perc", "--config", &path, "simulate", "--seed", "9"])).unwrap();
        let merged: Vec<String> = merged.iter().map(|a| a.to_string_lossy().into_owned()).collect();
        assert_eq!(merged.iter().filter(|a| *a == "--seed").count(), 1);
        assert!(merged.ends_with(&["--edges".to_string(), "--iterations".to_string(), "1000".to_string()]));
    }

    #[test]
    fn no_config_is_identity() {
        let argv = os(&["perc", "simulate", "--p", "0.3"]);
        assert_eq!(merge(argv.clone()).unwrap(), argv);
        assert!(merge(os(&["perc", "--config", "/nonexistent/file"])).is_err());
    }
}
