//! Experiment configuration in a plain `key = value` format.
//!
//! ```text
//! # comments start with '#'
//! command   = meta            # statics | phase | sample | simulate | gap | meta
//! n         = 12, 16          # even system sizes
//! a         = 0.2             # boundary height fraction, 0 < a < 1/2
//! lambda    = 8, 1:20:0.5     # values or start:stop:step ranges
//! a_grid    = 0.01:0.49:0.01  # phase command only
//! seed      = 7
//! replicas  = 500             # samples, trajectories or exit times per point
//! t_cap     = none            # fixed exit-time cap, or none for adaptive
//! horizon   = 100             # simulate command
//! enum_cap  = 16              # largest N cross-checked by enumeration
//! state_cap = 200000          # largest generator built
//! threads   = 1
//! out       = wetting-out
//! ```
//!
//! Every key is optional. [`ExperimentConfig::to_text`] writes the expanded
//! values with shortest round-trip float formatting, so parsing its output
//! gives back the same configuration.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::ValueEnum;
use wetting_core::metastability::metastable_well;
use wetting_core::spectral::DEFAULT_STATE_CAP;
use wetting_core::statics::{log_partition, PathSpec};
use wetting_core::{Ensemble, Error, ModelParams};

use crate::error::{CliError, CliResult};

/// Largest `N` whose paths may be enumerated.
pub const MAX_ENUM_CAP: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, ValueEnum)]
pub enum Command {
    Statics,
    Phase,
    Sample,
    Simulate,
    Gap,
    Meta,
}

impl Command {
    pub const ALL: [Command; 6] =
        [Command::Statics, Command::Phase, Command::Sample, Command::Simulate, Command::Gap, Command::Meta];

    pub fn name(self) -> &'static str {
        match self {
            Command::Statics => "statics",
            Command::Phase => "phase",
            Command::Sample => "sample",
            Command::Simulate => "simulate",
            Command::Gap => "gap",
            Command::Meta => "meta",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| CliError::config(format!("unknown command '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub n: Vec<usize>,
    pub a: f64,
    pub lambda: Vec<f64>,
    pub a_grid: Vec<f64>,
    pub seed: u64,
    pub replicas: usize,
    pub t_cap: Option<f64>,
    pub horizon: f64,
    pub enum_cap: usize,
    pub state_cap: usize,
    pub threads: usize,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            command: Command::Statics,
            n: vec![10],
            a: 0.2,
            lambda: vec![8.0],
            a_grid: (1..=49).map(|k| k as f64 / 100.0).collect(),
            seed: 0,
            replicas: 500,
            t_cap: None,
            horizon: 100.0,
            enum_cap: 16,
            state_cap: DEFAULT_STATE_CAP,
            threads: 1,
            out: PathBuf::from("wetting-out"),
        }
    }
}

const KEYS: [&str; 13] = [
    "command",
    "n",
    "a",
    "lambda",
    "a_grid",
    "seed",
    "replicas",
    "t_cap",
    "horizon",
    "enum_cap",
    "state_cap",
    "threads",
    "out",
];

fn parse_num<T: FromStr>(key: &str, s: &str) -> CliResult<T> {
    s.trim().parse().map_err(|_| CliError::config(format!("{key}: cannot parse '{}'", s.trim())))
}

fn parse_list<T: FromStr>(key: &str, s: &str) -> CliResult<Vec<T>> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(|t| parse_num(key, t)).collect()
}

/// Comma list whose items are numbers or inclusive `start:stop:step` ranges.
pub fn parse_grid(key: &str, s: &str) -> CliResult<Vec<f64>> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts[..] {
            [x] => out.push(parse_num(key, x)?),
            [lo, hi, step] => {
                let (lo, hi, step): (f64, f64, f64) = (parse_num(key, lo)?, parse_num(key, hi)?, parse_num(key, step)?);
                if !(step > 0.0 && lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(CliError::config(format!("{key}: bad range '{item}'")));
                }
                let count = ((hi - lo) / step + 1e-9).floor() as usize;
                out.extend((0..=count).map(|k| lo + k as f64 * step));
            }
            _ => return Err(CliError::config(format!("{key}: bad item '{item}'"))),
        }
    }
    Ok(out)
}

fn join<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut cfg = Self::default();
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("line {}: expected key = value", i + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(CliError::config(format!("line {}: unknown key '{key}'", i + 1)));
            }
            if seen.contains(&key) {
                return Err(CliError::config(format!("line {}: duplicate key '{key}'", i + 1)));
            }
            seen.push(key);
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        match key {
            "command" => self.command = value.parse()?,
            "n" => self.n = parse_list(key, value)?,
            "a" => self.a = parse_num(key, value)?,
            "lambda" => self.lambda = parse_grid(key, value)?,
            "a_grid" => self.a_grid = parse_grid(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "replicas" => self.replicas = parse_num(key, value)?,
            "t_cap" => self.t_cap = if value == "none" { None } else { Some(parse_num(key, value)?) },
            "horizon" => self.horizon = parse_num(key, value)?,
            "enum_cap" => self.enum_cap = parse_num(key, value)?,
            "state_cap" => self.state_cap = parse_num(key, value)?,
            "threads" => self.threads = parse_num(key, value)?,
            "out" => self.out = PathBuf::from(value),
            _ => unreachable!("key list checked by the caller"),
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let t_cap = self.t_cap.map_or_else(|| "none".to_string(), |t| t.to_string());
        let out = self.out.to_string_lossy();
        [
            ("command", self.command.to_string()),
            ("n", join(&self.n)),
            ("a", self.a.to_string()),
            ("lambda", join(&self.lambda)),
            ("a_grid", join(&self.a_grid)),
            ("seed", self.seed.to_string()),
            ("replicas", self.replicas.to_string()),
            ("t_cap", t_cap),
            ("horizon", self.horizon.to_string()),
            ("enum_cap", self.enum_cap.to_string()),
            ("state_cap", self.state_cap.to_string()),
            ("threads", self.threads.to_string()),
            ("out", out.into_owned()),
        ]
        .iter()
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
    }

    /// `(N, lambda)` grid points in row-major order.
    pub fn points(&self) -> Vec<(usize, f64)> {
        self.n.iter().flat_map(|&n| self.lambda.iter().map(move |&l| (n, l))).collect()
    }

    /// Checks every precondition of the selected command, including caps,
    /// before any output is produced.
    pub fn validate(&self) -> CliResult<()> {
        if self.threads == 0 {
            return Err(CliError::config("threads must be >= 1"));
        }
        if self.out.as_os_str().is_empty() {
            return Err(CliError::config("out must name a directory"));
        }
        if self.command == Command::Phase {
            if self.a_grid.is_empty() {
                return Err(CliError::config("a_grid is empty"));
            }
            if let Some(a) = self.a_grid.iter().find(|&&a| !(a > 0.0 && a < 0.5)) {
                return Err(CliError::config(format!("a_grid: a = {a} must lie in (0, 1/2)")));
            }
            return Ok(());
        }
        if self.lambda.is_empty() {
            return Err(CliError::config("lambda grid is empty"));
        }
        if self.n.is_empty() {
            return Err(CliError::config("N grid is empty"));
        }
        let params = self
            .points()
            .into_iter()
            .map(|(n, l)| ModelParams::new(n, self.a, l))
            .collect::<wetting_core::Result<Vec<_>>>()?;
        match self.command {
            Command::Statics => {
                if self.enum_cap > MAX_ENUM_CAP {
                    return Err(CliError::config(format!("enum_cap = {}: at most {MAX_ENUM_CAP}", self.enum_cap)));
                }
            }
            Command::Sample | Command::Simulate | Command::Meta if self.replicas == 0 => {
                return Err(CliError::config("replicas must be >= 1"));
            }
            _ => {}
        }
        if self.command == Command::Simulate && !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(CliError::config(format!("horizon = {}: must be positive", self.horizon)));
        }
        if self.command == Command::Meta {
            if let Some(t) = self.t_cap {
                if !(t > 0.0) {
                    return Err(CliError::config(format!("t_cap = {t}: must be positive")));
                }
            }
            for p in &params {
                metastable_well(p.a(), p.lambda())?;
            }
        }
        if self.command == Command::Gap {
            for p in &params {
                let states = state_count(p)?;
                if states > self.state_cap as f64 {
                    return Err(
                        Error::CapExceeded { what: "state space", size: states as usize, cap: self.state_cap }.into()
                    );
                }
            }
        }
        Ok(())
    }
}

/// Number of elevated paths, read off the partition function at `lambda = 1`.
pub fn state_count(params: &ModelParams) -> CliResult<f64> {
    let unit = params.with_lambda(1.0)?;
    Ok(log_partition(&PathSpec::from_params(&unit, Ensemble::Elevated))?.exp().round())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c);
        assert_eq!(ExperimentConfig::parse("").unwrap(), c);
    }

    #[test]
    fn ranges_expand() {
        let g = parse_grid("lambda", "1:2:0.25, 5").unwrap();
        assert_eq!(g, vec![1.0, 1.25, 1.5, 1.75, 2.0, 5.0]);
        assert_eq!(parse_grid("a_grid", "0.01:0.49:0.01").unwrap().len(), 49);
        assert!(parse_grid("lambda", "2:1:0.5").is_err());
        assert!(parse_grid("lambda", "1:2").is_err());
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(ExperimentConfig::parse("n 12").is_err());
        assert!(ExperimentConfig::parse("size = 12").is_err());
        assert!(ExperimentConfig::parse("n = 12\nn = 14").is_err());
        assert!(ExperimentConfig::parse("command = plot").is_err());
        assert!(ExperimentConfig::parse("seed = -1").is_err());
    }

    #[test]
    fn validation() {
        let ok = ExperimentConfig { command: Command::Gap, n: vec![10], ..Default::default() };
        ok.validate().unwrap();
        let odd = ExperimentConfig { n: vec![11], ..ok.clone() };
        assert_eq!(odd.validate().unwrap_err().exit_code(), 2);
        let capped = ExperimentConfig { state_cap: 10, ..ok.clone() };
        assert_eq!(capped.validate().unwrap_err().exit_code(), 3);
        let empty = ExperimentConfig { command: Command::Statics, lambda: vec![], ..ok.clone() };
        assert!(empty.validate().is_err());
        let single_well = ExperimentConfig { command: Command::Meta, lambda: vec![2.0], ..ok.clone() };
        assert_eq!(single_well.validate().unwrap_err().exit_code(), 2);
        let phase = ExperimentConfig { command: Command::Phase, a_grid: vec![0.5], ..ok };
        assert!(phase.validate().is_err());
    }

    #[test]
    fn counts_paths() {
        // N = 4, boundary 2: all 6 bridges stay non-negative
        assert_eq!(state_count(&ModelParams::new(4, 0.5 - 1e-3, 3.0).unwrap()).unwrap(), 6.0);
        assert_eq!(state_count(&ModelParams::new(24, 0.2, 8.0).unwrap()).unwrap(), 2_661_652.0);
    }
}
