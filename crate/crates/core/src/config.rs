//! Run configuration: strict flag parsing with an optional flat key-value
//! config file (section headers select the command); flags override file
//! entries and unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Command {
    Simulate,
    Sweep,
    Bounds,
    Verify,
}

impl Command {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "simulate" => Ok(Command::Simulate),
            "sweep" => Ok(Command::Sweep),
            "bounds" => Ok(Command::Bounds),
            "verify" => Ok(Command::Verify),
            other => Err(Error::usage(format!(
                "unknown command `{other}` (expected simulate, sweep, bounds, verify)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
            Command::Bounds => "bounds",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Fully validated run configuration with documented defaults
/// (trials = 10^4, format = csv, seed = 0).
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub model: Option<String>,
    pub mech: Option<String>,
    pub n: Option<usize>,
    pub ns: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub out: Option<String>,
    pub format: OutputFormat,
    pub claim: Option<String>,
    pub nmax: usize,
    pub q_trials: usize,
    pub track_alloc: bool,
}

impl RunConfig {
    fn defaults(command: Command) -> Self {
        RunConfig {
            command,
            model: None,
            mech: None,
            n: None,
            ns: Vec::new(),
            trials: 10_000,
            seed: 0,
            out: None,
            format: OutputFormat::Csv,
            claim: None,
            nmax: 100_000,
            q_trials: 2_000,
            track_alloc: false,
        }
    }
}

const VALID_KEYS: &[&str] = &[
    "model", "mech", "n", "ns", "trials", "seed", "out", "format", "claim", "nmax", "q-trials",
    "track-alloc", "config",
];

/// Parses `<command> [--config FILE] [--key value ...]`. The config file is
/// flat `key = value` lines under `[command]` section headers; flags
/// override file entries.
pub fn parse_config(args: &[String]) -> Result<RunConfig> {
    let command = Command::parse(
        args.first()
            .ok_or_else(|| Error::usage("missing command (simulate, sweep, bounds, verify)"))?,
    )?;

    // flags into key/value pairs
    let mut flags: BTreeMap<String, String> = BTreeMap::new();
    let mut it = args[1..].iter().peekable();
    while let Some(a) = it.next() {
        let key = a
            .strip_prefix("--")
            .ok_or_else(|| Error::usage(format!("expected --flag, got `{a}`")))?;
        if key == "track-alloc" && it.peek().is_none_or(|v| v.starts_with("--")) {
            flags.insert(key.to_string(), "true".to_string());
            continue;
        }
        let val = it
            .next()
            .ok_or_else(|| Error::usage(format!("flag --{key} needs a value")))?;
        flags.insert(key.to_string(), val.clone());
    }
    for k in flags.keys() {
        if !VALID_KEYS.contains(&k.as_str()) {
            return Err(Error::usage(format!(
                "unknown flag --{k}; valid flags: {}",
                VALID_KEYS.join(", ")
            )));
        }
    }

    // file entries first, then flags on top
    let mut merged: BTreeMap<String, String> = BTreeMap::new();
    if let Some(path) = flags.get("config") {
        for (k, v) in read_config_file(Path::new(path), command.name())? {
            merged.insert(k, v);
        }
    }
    for (k, v) in &flags {
        if k != "config" {
            merged.insert(k.clone(), v.clone());
        }
    }

    let mut cfg = RunConfig::defaults(command);
    for (k, v) in &merged {
        match k.as_str() {
            "model" => cfg.model = Some(v.clone()),
            "mech" => cfg.mech = Some(v.clone()),
            "n" => cfg.n = Some(parse_num(k, v)?),
            "ns" => {
                cfg.ns = v
                    .split(',')
                    .filter(|t| !t.trim().is_empty())
                    .map(|t| parse_num("ns", t.trim()))
                    .collect::<Result<_>>()?
            }
            "trials" => cfg.trials = parse_num(k, v)?,
            "seed" => {
                cfg.seed = v
                    .trim()
                    .parse::<u64>()
                    .map_err(|_| Error::usage(format!("bad --seed `{v}`")))?
            }
            "out" => cfg.out = Some(v.clone()),
            "format" => {
                cfg.format = match v.trim() {
                    "csv" => OutputFormat::Csv,
                    "json" => OutputFormat::Json,
                    other => {
                        return Err(Error::usage(format!(
                            "unknown format `{other}` (expected csv or json)"
                        )))
                    }
                }
            }
            "claim" => cfg.claim = Some(v.clone()),
            "nmax" => cfg.nmax = parse_num(k, v)?,
            "q-trials" => cfg.q_trials = parse_num(k, v)?,
            "track-alloc" => {
                cfg.track_alloc = matches!(v.trim(), "true" | "1" | "yes");
            }
            _ => unreachable!("keys validated above"),
        }
    }
    validate(&cfg)?;
    Ok(cfg)
}

fn parse_num(key: &str, v: &str) -> Result<usize> {
    v.trim()
        .parse::<usize>()
        .map_err(|_| Error::usage(format!("bad --{key} `{v}` (expected a positive integer)")))
}

fn validate(cfg: &RunConfig) -> Result<()> {
    match cfg.command {
        Command::Simulate => {
            if cfg.model.is_none() {
                return Err(Error::usage("simulate requires --model"));
            }
            if cfg.mech.is_none() {
                return Err(Error::usage(format!(
                    "simulate requires --mech; valid ids: {}",
                    crate::mechanism::MECHANISM_IDS.join(", ")
                )));
            }
            if cfg.n.is_none() {
                return Err(Error::usage("simulate requires --n"));
            }
        }
        Command::Sweep => {
            if cfg.model.is_none() || cfg.mech.is_none() {
                return Err(Error::usage("sweep requires --model and --mech"));
            }
            if cfg.ns.is_empty() {
                return Err(Error::usage("sweep requires --ns n1,n2,..."));
            }
        }
        Command::Bounds => {
            if cfg.claim.is_none() {
                return Err(Error::usage(
                    "bounds requires --claim (mdp or static-opt)",
                ));
            }
        }
        Command::Verify => {}
    }
    if cfg.trials == 0 {
        return Err(Error::usage("--trials must be >= 1"));
    }
    Ok(())
}

/// Reads the `[section]` of a flat key=value file; keys outside any section
/// apply to every command. Unknown keys are rejected.
fn read_config_file(path: &Path, section: &str) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    let mut in_scope = true; // top-of-file entries apply everywhere
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            in_scope = name.trim() == section;
            continue;
        }
        if !in_scope {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::usage(format!(
                "{}:{}: expected `key = value`, got `{line}`",
                path.display(),
                lineno + 1
            ))
        })?;
        let key = k.trim().to_string();
        if key == "config" || !VALID_KEYS.contains(&key.as_str()) {
            return Err(Error::usage(format!(
                "{}:{}: unknown key `{key}`",
                path.display(),
                lineno + 1
            )));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn simulate_flags_parse() {
        let cfg = parse_config(&args(&[
            "simulate",
            "--model",
            "separable: alphas=[1,0], type=exp(1)",
            "--mech",
            "dyn-sep",
            "--n",
            "100",
            "--trials",
            "1000",
            "--seed",
            "7",
        ]))
        .unwrap();
        assert_eq!(cfg.command, Command::Simulate);
        assert_eq!(cfg.n, Some(100));
        assert_eq!(cfg.trials, 1000);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.format, OutputFormat::Csv);
    }

    #[test]
    fn missing_mech_is_usage_error() {
        let err = parse_config(&args(&[
            "simulate",
            "--model",
            "independent: [exp(1)]",
            "--n",
            "10",
        ]))
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("--mech") && msg.contains("ladder"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unknown_flag_rejected() {
        assert!(parse_config(&args(&["simulate", "--bogus", "1"])).is_err());
    }

    #[test]
    fn bounds_claim() {
        let cfg =
            parse_config(&args(&["bounds", "--claim", "mdp", "--nmax", "100000"])).unwrap();
        assert_eq!(cfg.command, Command::Bounds);
        assert_eq!(cfg.claim.as_deref(), Some("mdp"));
        assert_eq!(cfg.nmax, 100_000);
    }

    #[test]
    fn config_file_merge_and_override() {
        let dir = std::env::temp_dir().join(format!("ppmlab-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.cfg");
        std::fs::write(
            &path,
            "seed = 11\n[simulate]\nmodel = independent: [exp(1)]\nmech = ladder\nn = 9\ntrials = 55\n[sweep]\nns = 2,4\n",
        )
        .unwrap();
        let cfg = parse_config(&args(&[
            "simulate",
            "--config",
            path.to_str().unwrap(),
            "--trials",
            "77",
        ]))
        .unwrap();
        assert_eq!(cfg.seed, 11);
        assert_eq!(cfg.n, Some(9));
        assert_eq!(cfg.trials, 77); // flag wins
        assert_eq!(cfg.mech.as_deref(), Some("ladder"));

        std::fs::write(&path, "[simulate]\nwhatever = 3\n").unwrap();
        assert!(parse_config(&args(&[
            "simulate",
            "--config",
            path.to_str().unwrap()
        ]))
        .is_err());
        std::fs::remove_dir_all(&dir).ok();
    }
}
