//! INI-style experiment configs.
//!
//! ```text
//! # comment
//! [kernel]
//! family = se          # se | matern
//! l = 0.2
//! nu = 1.5             # matern only
//! d = 1
//! [ensemble]
//! epsilon = 0.1
//! B = 1
//! w0 = 0.05            # optional inner-width override
//! [noise]
//! sigma = 0.1
//! [run]
//! T = 400
//! seeds_per_member = 5
//! grid_resolution = 256
//! [algorithm]
//! kind = gp_ucb        # gp_ucb | uniform | elimination | oracle
//! beta = theoretical   # or a positive constant for beta_t^(1/2)
//! seed = 0
//! [bounds]
//! C = 1
//! C_prime = 1
//! [output]
//! dir = out
//! formats = csv,json
//! ```
//!
//! Comments run from `#` or `;` to the end of the line. Unknown sections,
//! unknown keys and repeated sections or keys are errors.

use std::collections::BTreeMap;
use std::path::PathBuf;

use needlebound_core::algorithms::{AlgorithmConfig, AlgorithmKind, BetaSchedule};
use needlebound_core::kernels::{KernelFamily, KernelSpec};

use crate::{CliError, Result};

/// `(section, key, default)`; `None` marks a required key.
const SCHEMA: &[(&str, &str, Option<&str>)] = &[
    ("kernel", "family", None),
    ("kernel", "l", None),
    ("kernel", "nu", Some("")),
    ("kernel", "d", None),
    ("ensemble", "epsilon", None),
    ("ensemble", "B", None),
    ("ensemble", "w0", Some("")),
    ("noise", "sigma", None),
    ("run", "T", None),
    ("run", "seeds_per_member", Some("1")),
    ("run", "grid_resolution", Some("256")),
    ("algorithm", "kind", Some("gp_ucb")),
    ("algorithm", "beta", Some("theoretical")),
    ("algorithm", "seed", Some("0")),
    ("bounds", "C", Some("1")),
    ("bounds", "C_prime", Some("1")),
    ("output", "dir", Some("out")),
    ("output", "formats", Some("csv,json")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Formats {
    pub csv: bool,
    pub json: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub spec: KernelSpec,
    pub epsilon: f64,
    pub budget: f64,
    pub w0: Option<f64>,
    pub sigma: f64,
    pub horizon: usize,
    pub seeds_per_member: usize,
    pub algorithm: AlgorithmConfig,
    pub c: f64,
    pub c_prime: f64,
    pub output_dir: PathBuf,
    pub formats: Formats,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| config_err(format!("{key}: expected a number, got '{v}'")))?;
    if !x.is_finite() {
        return Err(config_err(format!("{key}: expected a finite number, got '{v}'")));
    }
    Ok(x)
}

fn parse_positive(key: &str, v: &str) -> Result<f64> {
    let x = parse_f64(key, v)?;
    if x <= 0.0 {
        return Err(config_err(format!("{key} must be positive, got {x}")));
    }
    Ok(x)
}

fn parse_count(key: &str, v: &str, min: usize) -> Result<usize> {
    let n: usize = v
        .parse()
        .map_err(|_| config_err(format!("{key}: expected an integer, got '{v}'")))?;
    if n < min {
        return Err(config_err(format!("{key} must be at least {min}, got {n}")));
    }
    Ok(n)
}

/// Raw `section.key -> value` pairs, checked against the schema.
fn parse_entries(text: &str) -> Result<BTreeMap<(String, String), String>> {
    let mut out = BTreeMap::new();
    let mut section: Option<String> = None;
    let mut seen: Vec<String> = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.find(['#', ';']).map_or(raw, |i| &raw[..i]).trim();
        if line.is_empty() {
            continue;
        }
        let at = |msg: String| config_err(format!("line {}: {msg}", no + 1));
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| at(format!("malformed section header '{line}'")))?
                .trim();
            if !SCHEMA.iter().any(|(s, _, _)| *s == name) {
                return Err(at(format!("unknown section [{name}]")));
            }
            if seen.iter().any(|s| s == name) {
                return Err(at(format!("repeated section [{name}]")));
            }
            seen.push(name.to_string());
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| at(format!("expected 'key = value', got '{line}'")))?;
        let (key, value) = (key.trim(), value.trim());
        let sec = section
            .as_deref()
            .ok_or_else(|| at(format!("key '{key}' appears before any [section]")))?;
        if !SCHEMA.iter().any(|(s, k, _)| *s == sec && *k == key) {
            return Err(at(format!("unknown key '{key}' in [{sec}]")));
        }
        if value.is_empty() {
            return Err(at(format!("empty value for {sec}.{key}")));
        }
        if out
            .insert((sec.to_string(), key.to_string()), value.to_string())
            .is_some()
        {
            return Err(at(format!("repeated key {sec}.{key}")));
        }
    }
    Ok(out)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let entries = parse_entries(text)?;
        let get = |sec: &str, key: &str| -> Result<Option<&str>> {
            let found = entries
                .get(&(sec.to_string(), key.to_string()))
                .map(String::as_str);
            match (
                found,
                SCHEMA
                    .iter()
                    .find(|(s, k, _)| *s == sec && *k == key)
                    .and_then(|e| e.2),
            ) {
                (Some(v), _) => Ok(Some(v)),
                (None, Some("")) => Ok(None),
                (None, Some(default)) => Ok(Some(default)),
                (None, None) => Err(config_err(format!("missing required key {sec}.{key}"))),
            }
        };
        let req = |sec: &str, key: &str| get(sec, key).map(|v| v.expect("required keys have values"));

        let family = match req("kernel", "family")? {
            "se" | "squared_exponential" => KernelFamily::SquaredExponential,
            "matern" => KernelFamily::Matern,
            other => {
                return Err(config_err(format!(
                    "kernel.family: expected se or matern, got '{other}'"
                )))
            }
        };
        let l = parse_positive("kernel.l", req("kernel", "l")?)?;
        let d = parse_count("kernel.d", req("kernel", "d")?, 1)?;
        let nu = match (family, get("kernel", "nu")?) {
            (KernelFamily::Matern, Some(v)) => parse_positive("kernel.nu", v)?,
            (KernelFamily::Matern, None) => {
                return Err(config_err("missing required key kernel.nu for matern"))
            }
            (KernelFamily::SquaredExponential, Some(_)) => {
                return Err(config_err("kernel.nu applies only to the matern family"))
            }
            (KernelFamily::SquaredExponential, None) => f64::INFINITY,
        };
        let spec = KernelSpec::new(family, l, nu, d)?;

        let epsilon = parse_positive("ensemble.epsilon", req("ensemble", "epsilon")?)?;
        let budget = parse_positive("ensemble.B", req("ensemble", "B")?)?;
        let w0 = get("ensemble", "w0")?
            .map(|v| parse_positive("ensemble.w0", v))
            .transpose()?;
        let sigma = parse_positive("noise.sigma", req("noise", "sigma")?)?;
        let horizon = parse_count("run.T", req("run", "T")?, 1)?;
        let seeds_per_member = parse_count("run.seeds_per_member", req("run", "seeds_per_member")?, 1)?;
        let grid_resolution = parse_count("run.grid_resolution", req("run", "grid_resolution")?, 2)?;

        let kind = match req("algorithm", "kind")? {
            "gp_ucb" => AlgorithmKind::GpUcb,
            "uniform" => AlgorithmKind::Uniform,
            "elimination" => AlgorithmKind::Elimination,
            "oracle" => AlgorithmKind::Oracle,
            other => {
                return Err(config_err(format!(
                    "algorithm.kind: expected gp_ucb, uniform, elimination or oracle, got '{other}'"
                )))
            }
        };
        let beta = match req("algorithm", "beta")? {
            "theoretical" => BetaSchedule::TheoreticalRkhs,
            v => BetaSchedule::Constant(parse_positive("algorithm.beta", v)?),
        };
        let seed_text = req("algorithm", "seed")?;
        let seed: u64 = seed_text
            .parse()
            .map_err(|_| config_err(format!("algorithm.seed: expected an integer, got '{seed_text}'")))?;
        let algorithm = AlgorithmConfig::new(kind, beta, grid_resolution, seed)?;

        let c = parse_positive("bounds.C", req("bounds", "C")?)?;
        let c_prime = parse_positive("bounds.C_prime", req("bounds", "C_prime")?)?;
        let output_dir = PathBuf::from(req("output", "dir")?);
        let mut formats = Formats {
            csv: false,
            json: false,
        };
        for f in req("output", "formats")?.split(',').map(str::trim) {
            match f {
                "csv" => formats.csv = true,
                "json" => formats.json = true,
                other => return Err(config_err(format!("output.formats: unknown format '{other}'"))),
            }
        }
        Ok(Self {
            spec,
            epsilon,
            budget,
            w0,
            sigma,
            horizon,
            seeds_per_member,
            algorithm,
            c,
            c_prime,
            output_dir,
            formats,
        })
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.algorithm.seed = seed;
        self
    }

    /// Every setting, defaults included, as `section.key = value` pairs in
    /// schema order. Re-parsing the rendered form gives back the same config.
    pub fn resolved(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut put = |k: &str, v: String| out.push((k.to_string(), v));
        let family = match self.spec.family() {
            KernelFamily::SquaredExponential => "se",
            KernelFamily::Matern => "matern",
        };
        put("kernel.family", family.into());
        put("kernel.l", self.spec.lengthscale().to_string());
        if self.spec.family() == KernelFamily::Matern {
            put("kernel.nu", self.spec.nu().to_string());
        }
        put("kernel.d", self.spec.dim().to_string());
        put("ensemble.epsilon", self.epsilon.to_string());
        put("ensemble.B", self.budget.to_string());
        if let Some(w0) = self.w0 {
            put("ensemble.w0", w0.to_string());
        }
        put("noise.sigma", self.sigma.to_string());
        put("run.T", self.horizon.to_string());
        put("run.seeds_per_member", self.seeds_per_member.to_string());
        put("run.grid_resolution", self.algorithm.grid_resolution.to_string());
        put("algorithm.kind", self.algorithm.kind.name().into());
        put(
            "algorithm.beta",
            match self.algorithm.beta {
                BetaSchedule::TheoreticalRkhs => "theoretical".into(),
                BetaSchedule::Constant(c) => c.to_string(),
            },
        );
        put("algorithm.seed", self.algorithm.seed.to_string());
        put("bounds.C", self.c.to_string());
        put("bounds.C_prime", self.c_prime.to_string());
        put("output.dir", self.output_dir.display().to_string());
        let formats: Vec<&str> = [(self.formats.csv, "csv"), (self.formats.json, "json")]
            .iter()
            .filter(|(on, _)| *on)
            .map(|(_, n)| *n)
            .collect();
        put("output.formats", formats.join(","));
        out
    }

    /// The resolved config in the INI syntax accepted by [`Self::parse`].
    pub fn to_ini(&self) -> String {
        let mut text = String::new();
        let mut current = "";
        for (key, value) in self.resolved() {
            let (sec, k) = key.split_once('.').expect("resolved keys are qualified");
            if sec != current {
                text.push_str(&format!("[{sec}]\n"));
                current = SCHEMA
                    .iter()
                    .find(|(s, _, _)| *s == sec)
                    .map(|e| e.0)
                    .unwrap_or("");
            }
            text.push_str(&format!("{k} = {value}\n"));
        }
        text
    }
}
