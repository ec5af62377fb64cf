use std::collections::BTreeMap;
use std::path::Path;

use sel_core::ScalarFn;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub problem: Problem,
    #[serde(default)]
    pub functions: Functions,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub output: Output,
}

/// Scalars, modes and grids.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Problem {
    pub command: Option<String>,
    #[serde(rename = "N")]
    pub dim: Option<usize>,
    #[serde(rename = "R")]
    pub radius: Option<f64>,
    #[serde(rename = "R0")]
    pub r0: Option<f64>,
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    /// Linear coefficient for `blowup`, central value of `u` for `solve-system`.
    pub a: Option<f64>,
    /// Central value of `v` for `solve-system`.
    pub b: Option<f64>,
    pub b0: Option<f64>,
    pub sigma: Option<f64>,
    pub grad_p: Option<f64>,
    pub grad_coef: Option<f64>,
    /// `ball` or `interval`.
    pub mode: Option<String>,
    /// `k`, `sqrt-k` or `ode`.
    pub variant: Option<String>,
    /// `ball`, `annulus` or `exterior`.
    pub domain: Option<String>,
    pub outer_value: Option<f64>,
    pub vanishing_radius: Option<f64>,
    pub c: Option<f64>,
    pub alpha: Option<f64>,
    pub nu: Option<f64>,
    pub rho: Option<f64>,
    pub ell1: Option<f64>,
    pub zeta: Option<f64>,
    pub theta: Option<f64>,
    pub ell_star: Option<f64>,
    pub ell_sup: Option<f64>,
    pub c_tilde: Option<f64>,
    /// `pure-power`, `eta-nonzero` or `eta-zero-tau`.
    pub case: Option<String>,
    /// Gradient exponent of the Young constant.
    pub p: Option<f64>,
    pub a_lim: Option<f64>,
    pub lambda1: Option<f64>,
    /// `exp-a`, `inv-s` or `inv-ln-s`.
    pub kind: Option<String>,
    #[serde(rename = "D")]
    pub d: Option<f64>,
    /// `tail` or `origin`.
    pub end: Option<String>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub levels: Option<Vec<f64>>,
    pub lambdas: Option<Vec<f64>>,
    pub mus: Option<Vec<f64>>,
    pub powers: Option<Vec<f64>>,
}

/// Expression strings in the variable `t`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Functions {
    pub f: Option<String>,
    pub g: Option<String>,
    pub k: Option<String>,
    pub p: Option<String>,
    pub q: Option<String>,
    #[serde(rename = "K")]
    pub k_pot: Option<String>,
    pub a: Option<String>,
    pub b: Option<String>,
    pub source: Option<String>,
    pub psi: Option<String>,
    pub phi: Option<String>,
    pub gap: Option<String>,
    #[serde(rename = "S")]
    pub s: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    pub tol: Option<f64>,
    pub panels: Option<usize>,
    pub grid: Option<usize>,
    pub u_max: Option<f64>,
    pub probes: Option<usize>,
    pub s_min: Option<f64>,
    pub s_max: Option<f64>,
    pub eps_b: Option<f64>,
    pub t_max: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    /// Base name of the written files; defaults to the command.
    pub name: Option<String>,
    pub csv: Option<bool>,
    pub json: Option<bool>,
}

pub const COMMANDS: &[&str] = &[
    "check-ko",
    "classify",
    "analyze-f",
    "ell",
    "make-k",
    "profile",
    "xi0",
    "chi",
    "solve-entire",
    "solve-system",
    "blowup",
    "rate",
    "eigen",
    "lef",
    "sweep",
    "gelfand",
    "young",
];

/// Read a config file (if any), apply `key=value` overrides and validate.
/// Bare override keys go to `[problem]`; `section.key` selects a section.
pub fn load(path: Option<&Path>, command: Option<&str>, overrides: &[String]) -> Result<Config, CliError> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            text.parse::<toml::Table>()
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{item}` is not of the form key=value")))?;
        let (section, key) = key.trim().split_once('.').unwrap_or(("problem", key.trim()));
        let value = parse_value(raw.trim());
        let entry = table
            .entry(section.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        let toml::Value::Table(t) = entry else {
            return Err(CliError::Config(format!("`{section}` is not a section")));
        };
        t.insert(key.to_string(), value);
    }
    if let Some(c) = command {
        let entry = table
            .entry("problem".to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        if let toml::Value::Table(t) = entry {
            t.insert("command".into(), toml::Value::String(c.into()));
        }
    }
    let cfg: Config = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    match cfg.problem.command.as_deref() {
        None => return Err(CliError::Config("missing required key `command` in [problem]".into())),
        Some(c) if !COMMANDS.contains(&c) => {
            return Err(CliError::Config(format!("unknown command `{c}`; expected one of {}", COMMANDS.join(", "))))
        }
        _ => {}
    }
    Ok(cfg)
}

/// Integers, floats, booleans and arrays as TOML; anything else as a string.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or(toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

impl Config {
    pub fn command(&self) -> &str {
        self.problem.command.as_deref().unwrap_or_default()
    }

    /// Parse every expression present, so that nothing runs on a bad input.
    pub fn parse_functions(&self) -> Result<BTreeMap<&'static str, ScalarFn>, CliError> {
        let f = &self.functions;
        let all = [
            ("f", &f.f),
            ("g", &f.g),
            ("k", &f.k),
            ("p", &f.p),
            ("q", &f.q),
            ("K", &f.k_pot),
            ("a", &f.a),
            ("b", &f.b),
            ("source", &f.source),
            ("psi", &f.psi),
            ("phi", &f.phi),
            ("gap", &f.gap),
            ("S", &f.s),
        ];
        let mut out = BTreeMap::new();
        for (name, src) in all {
            if let Some(src) = src {
                let sf = ScalarFn::parse(src)
                    .map_err(|e| CliError::Config(format!("functions.{name} = \"{src}\": {e}")))?;
                out.insert(name, sf);
            }
        }
        Ok(out)
    }
}

pub fn require<T: Clone>(v: &Option<T>, key: &str) -> Result<T, CliError> {
    v.clone()
        .ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
}
