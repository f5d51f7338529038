//! INI-style experiment configuration.
//!
//! Sections and keys are checked against a fixed schema; anything else is a
//! validation error. Every value read (including defaults) is recorded so
//! the run can echo the resolved configuration.

use crate::CliError;
use ini::Ini;
use serde_json::{Map, Value};
use std::sync::Mutex;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    GenMeasure,
    Frostman,
    Mollify,
    Estimate,
    Telescope,
    LambdaScan,
    Spectral,
    OmegaVerify,
    Search,
}

impl Kind {
    pub const ALL: [Kind; 9] = [
        Kind::GenMeasure,
        Kind::Frostman,
        Kind::Mollify,
        Kind::Estimate,
        Kind::Telescope,
        Kind::LambdaScan,
        Kind::Spectral,
        Kind::OmegaVerify,
        Kind::Search,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::GenMeasure => "gen-measure",
            Kind::Frostman => "frostman",
            Kind::Mollify => "mollify",
            Kind::Estimate => "estimate",
            Kind::Telescope => "telescope",
            Kind::LambdaScan => "lambda-scan",
            Kind::Spectral => "spectral",
            Kind::OmegaVerify => "omega-verify",
            Kind::Search => "search",
        }
    }
}

impl FromStr for Kind {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Kind, CliError> {
        Kind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| CliError::Validation(format!("unknown experiment kind `{s}`")))
    }
}

const SCHEMA: &[(&str, &[&str])] = &[
    ("experiment", &["kind", "seed", "threads", "out", "svg"]),
    ("measure", &["kind", "depth", "dim", "center", "path", "s"]),
    ("mollify", &["epsilon", "epsilons", "halfwidth", "grid", "truncation", "write_density"]),
    ("pattern", &["kind", "dim", "count", "vertices", "edges", "eta"]),
    ("estimate", &["lambda", "lambdas", "samples"]),
    ("frostman", &["r_min", "r_max", "radii", "centers", "tau"]),
    (
        "spectral",
        &["spacing", "half_count", "xi_min", "xi_max", "xi_count", "lambda", "samples"],
    ),
    ("omega", &["case", "instances", "dims", "nodes", "tolerance"]),
    (
        "search",
        &["lambda_min", "lambda_max", "tolerance", "budget", "noise", "plant"],
    ),
];

#[derive(Debug)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: u64,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub svg: bool,
    values: BTreeMap<String, BTreeMap<String, String>>,
    resolved: Mutex<BTreeMap<String, BTreeMap<String, String>>>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        ExperimentConfig::parse(&text)
    }

    pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
        let ini = Ini::load_from_str(text).map_err(|e| CliError::Validation(format!("config syntax: {e}")))?;
        let mut values: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        for (section, props) in ini.iter() {
            let Some(section) = section else {
                if let Some((k, _)) = props.iter().next() {
                    return Err(CliError::Validation(format!("key `{k}` must sit inside a section")));
                }
                continue;
            };
            let allowed = SCHEMA
                .iter()
                .find(|(s, _)| *s == section)
                .map(|(_, keys)| *keys)
                .ok_or_else(|| CliError::Validation(format!("unknown section [{section}]")))?;
            let entry = values.entry(section.to_string()).or_default();
            for (k, v) in props.iter() {
                if !allowed.contains(&k) {
                    return Err(CliError::Validation(format!("unknown key `{k}` in [{section}]")));
                }
                if entry.insert(k.to_string(), v.trim().to_string()).is_some() {
                    return Err(CliError::Validation(format!("key `{k}` repeated in [{section}]")));
                }
            }
        }
        let mut cfg = ExperimentConfig {
            kind: Kind::Estimate,
            seed: 0,
            threads: None,
            out: None,
            svg: false,
            values,
            resolved: Mutex::default(),
        };
        cfg.kind = cfg.required::<String>("experiment", "kind")?.parse()?;
        cfg.seed = cfg.get_or("experiment", "seed", 0u64)?;
        cfg.threads = cfg.get("experiment", "threads")?;
        cfg.out = cfg.get::<String>("experiment", "out")?.map(PathBuf::from);
        cfg.svg = cfg.get_or("experiment", "svg", false)?;
        Ok(cfg)
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.values.contains_key(section)
    }

    fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.values.get(section).and_then(|s| s.get(key)).map(String::as_str)
    }

    fn record(&self, section: &str, key: &str, value: String) {
        self.resolved
            .lock().expect("config lock")
            .entry(section.to_string())
            .or_default()
            .insert(key.to_string(), value);
    }

    pub fn get<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>, CliError> {
        match self.raw(section, key) {
            None => Ok(None),
            Some(v) => {
                let parsed = v
                    .parse()
                    .map_err(|_| CliError::Validation(format!("[{section}] {key} = `{v}` is not a valid value")))?;
                self.record(section, key, v.to_string());
                Ok(Some(parsed))
            }
        }
    }

    pub fn get_or<T: FromStr + ToString>(&self, section: &str, key: &str, default: T) -> Result<T, CliError> {
        match self.get(section, key)? {
            Some(v) => Ok(v),
            None => {
                self.record(section, key, default.to_string());
                Ok(default)
            }
        }
    }

    pub fn required<T: FromStr>(&self, section: &str, key: &str) -> Result<T, CliError> {
        self.get(section, key)?
            .ok_or_else(|| CliError::Validation(format!("[{section}] {key} is required")))
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>, CliError> {
        let Some(v) = self.raw(section, key) else {
            return Ok(None);
        };
        let items = v
            .split(',')
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| CliError::Validation(format!("[{section}] {key}: `{s}` is not a valid entry")))
            })
            .collect::<Result<Vec<T>, _>>()?;
        if items.is_empty() {
            return Err(CliError::Validation(format!("[{section}] {key} is empty")));
        }
        self.record(section, key, v.to_string());
        Ok(Some(items))
    }

    /// Points written as `x y z; x y z; …`.
    pub fn points(&self, section: &str, key: &str) -> Result<Option<Vec<Vec<f64>>>, CliError> {
        let Some(v) = self.raw(section, key) else {
            return Ok(None);
        };
        let pts = v
            .split(';')
            .map(|p| {
                p.split_whitespace()
                    .map(|x| {
                        x.parse::<f64>()
                            .map_err(|_| CliError::Validation(format!("[{section}] {key}: `{x}` is not a number")))
                    })
                    .collect::<Result<Vec<f64>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.record(section, key, v.to_string());
        Ok(Some(pts))
    }

    pub fn record_resolved(&self, section: &str, key: &str, value: impl ToString) {
        self.record(section, key, value.to_string());
    }

    /// Resolved values as JSON, with the command-line overrides applied.
    pub fn echo(&self) -> Value {
        self.record("experiment", "kind", self.kind.name().to_string());
        self.record("experiment", "seed", self.seed.to_string());
        if let Some(t) = self.threads {
            self.record("experiment", "threads", t.to_string());
        }
        if let Some(o) = &self.out {
            self.record("experiment", "out", o.display().to_string());
        }
        let mut root = Map::new();
        for (section, keys) in self.resolved.lock().expect("config lock").iter() {
            let obj: Map<String, Value> = keys.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
            root.insert(section.clone(), Value::Object(obj));
        }
        Value::Object(root)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_echoes() {
        let cfg = ExperimentConfig::parse("[experiment]\nkind = estimate\nseed = 7\n[mollify]\nepsilons = 0.5, 0.25\n").unwrap();
        assert_eq!(cfg.kind, Kind::Estimate);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.list::<f64>("mollify", "epsilons").unwrap().unwrap(), vec![0.5, 0.25]);
        assert_eq!(cfg.get_or("mollify", "grid", 64usize).unwrap(), 64);
        let echo = cfg.echo();
        assert_eq!(echo["mollify"]["grid"], "64");
        assert_eq!(echo["experiment"]["seed"], "7");
    }

    #[test]
    fn rejects_unknown_keys_and_sections() {
        assert!(ExperimentConfig::parse("[experiment]\nkind = estimate\nbogus = 1\n").is_err());
        assert!(ExperimentConfig::parse("[experiment]\nkind = estimate\n[nowhere]\nx = 1\n").is_err());
        assert!(ExperimentConfig::parse("[experiment]\nkind = sideways\n").is_err());
        assert!(ExperimentConfig::parse("kind = estimate\n").is_err());
    }

    #[test]
    fn parses_point_lists() {
        let cfg = ExperimentConfig::parse("[experiment]\nkind = search\n[pattern]\nvertices = 0 0; 1 0; 0 1\n").unwrap();
        let p = cfg.points("pattern", "vertices").unwrap().unwrap();
        assert_eq!(p, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]);
    }
}
