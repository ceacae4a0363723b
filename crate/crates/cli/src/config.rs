//! Resolution of run settings from config file plus flag overrides.
//!
//! The config file is plain text, one `key = value` per line, `#` comments.
//! Keys use the long flag names without the leading dashes. Command-line
//! flags always win over file values.

use std::collections::HashMap;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use zvgarch::model::{DistKind, H1Policy};

use crate::{CliError, CommonArgs};

const KNOWN_KEYS: &[&str] = &[
    "data",
    "mode",
    "dist",
    "sampler",
    "draws",
    "burnin",
    "seed",
    "prior-var",
    "epsilon",
    "leapfrog-steps",
    "out",
    "date-col",
    "value-col",
    "h1",
    "sequential",
    "save-chain",
    "zv-split",
    "chain",
    "replications",
    "sizes",
    "truth",
    "shape",
    "pilot-draws",
    "pilot-epsilon",
    "target-accept",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Prices,
    Returns,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Hmc,
    Rwm,
    Both,
}

/// Fully resolved run settings, echoed verbatim into metadata.json.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub mode: Mode,
    pub dist: DistKind,
    pub sampler: SamplerKind,
    pub draws: usize,
    pub burnin: usize,
    pub seed: u64,
    pub prior_var: f64,
    pub epsilon: Option<f64>,
    pub leapfrog_steps: usize,
    pub out: PathBuf,
    pub date_col: String,
    pub value_col: String,
    pub h1: H1Policy,
    pub sequential: bool,
}

pub struct Resolver {
    file: HashMap<String, String>,
}

impl Resolver {
    pub fn new(common: &CommonArgs) -> Result<Self, CliError> {
        let mut file = HashMap::new();
        if let Some(path) = &common.config {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read config file {}: {e}", path.display()))
            })?;
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let Some((key, value)) = line.split_once('=') else {
                    return Err(CliError::Config(format!(
                        "config line {}: expected `key = value`, got `{raw}`",
                        lineno + 1
                    )));
                };
                let key = key.trim().to_string();
                if !KNOWN_KEYS.contains(&key.as_str()) {
                    return Err(CliError::Config(format!(
                        "config line {}: unknown key `{key}`",
                        lineno + 1
                    )));
                }
                file.insert(key, value.trim().to_string());
            }
        }
        Ok(Resolver { file })
    }

    pub fn get<T: FromStr>(
        &self,
        key: &str,
        cli: Option<T>,
        default: Option<T>,
    ) -> Result<Option<T>, CliError> {
        if cli.is_some() {
            return Ok(cli);
        }
        if let Some(raw) = self.file.get(key) {
            return raw
                .parse::<T>()
                .map(Some)
                .map_err(|_| CliError::Config(format!("config key `{key}`: cannot parse `{raw}`")));
        }
        Ok(default)
    }

    pub fn require<T: FromStr>(&self, key: &str, cli: Option<T>) -> Result<T, CliError> {
        self.get(key, cli, None)?
            .ok_or_else(|| CliError::Config(format!("missing required option --{key}")))
    }

    pub fn flag(&self, key: &str, cli: bool) -> Result<bool, CliError> {
        if cli {
            return Ok(true);
        }
        match self.file.get(key).map(String::as_str) {
            None => Ok(false),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some("false") | Some("0") | Some("no") => Ok(false),
            Some(other) => {
                Err(CliError::Config(format!("config key `{key}`: cannot parse `{other}` as bool")))
            }
        }
    }
}

pub fn parse_mode(s: &str) -> Result<Mode, CliError> {
    match s {
        "prices" => Ok(Mode::Prices),
        "returns" => Ok(Mode::Returns),
        other => Err(CliError::Config(format!(
            "mode must be `prices` or `returns`, got `{other}`"
        ))),
    }
}

pub fn parse_dist(s: &str) -> Result<DistKind, CliError> {
    match s {
        "normal" => Ok(DistKind::Normal),
        "t" => Ok(DistKind::StudentT),
        "ged" => Ok(DistKind::Ged),
        "gt" => Ok(DistKind::GeneralizedT),
        other => Err(CliError::Config(format!(
            "dist must be one of normal|t|ged|gt, got `{other}`"
        ))),
    }
}

pub fn parse_sampler(s: &str, allow_both: bool) -> Result<SamplerKind, CliError> {
    match s {
        "hmc" => Ok(SamplerKind::Hmc),
        "rwm" => Ok(SamplerKind::Rwm),
        "both" if allow_both => Ok(SamplerKind::Both),
        other => Err(CliError::Config(format!(
            "sampler must be hmc|rwm{}, got `{other}`",
            if allow_both { "|both" } else { "" }
        ))),
    }
}

pub fn parse_h1(s: &str) -> Result<H1Policy, CliError> {
    match s {
        "unconditional" => Ok(H1Policy::Unconditional),
        "sample-variance" => Ok(H1Policy::SampleVariance),
        other => Err(CliError::Config(format!(
            "h1 must be `unconditional` or `sample-variance`, got `{other}`"
        ))),
    }
}

/// Resolves the flags shared by data-driven commands. `default_prior_var`
/// differs between real-data fits (100) and the simulation study (1000).
pub fn resolve_common(
    common: &CommonArgs,
    resolver: &Resolver,
    default_prior_var: f64,
    allow_both_samplers: bool,
    default_sampler: SamplerKind,
) -> Result<RunConfig, CliError> {
    let mode = match resolver.get("mode", common.mode.clone(), None)? {
        Some(s) => parse_mode(&s)?,
        None => Mode::Returns,
    };
    let dist = match resolver.get("dist", common.dist.clone(), None)? {
        Some(s) => parse_dist(&s)?,
        None => DistKind::Normal,
    };
    let sampler = match resolver.get("sampler", common.sampler.clone(), None)? {
        Some(s) => parse_sampler(&s, allow_both_samplers)?,
        None => default_sampler,
    };
    let h1 = match resolver.get("h1", common.h1.clone(), None)? {
        Some(s) => parse_h1(&s)?,
        None => H1Policy::Unconditional,
    };
    let prior_var = resolver.get("prior-var", common.prior_var, Some(default_prior_var))?.unwrap();
    if !(prior_var > 0.0) {
        return Err(CliError::Config(format!("prior-var must be > 0, got {prior_var}")));
    }
    Ok(RunConfig {
        data: resolver.get("data", common.data.clone(), None)?,
        mode,
        dist,
        sampler,
        draws: resolver.get("draws", common.draws, Some(2000))?.unwrap(),
        burnin: resolver.get("burnin", common.burnin, Some(1000))?.unwrap(),
        seed: resolver.get("seed", common.seed, Some(42))?.unwrap(),
        prior_var,
        epsilon: resolver.get("epsilon", common.epsilon, None)?,
        leapfrog_steps: resolver
            .get("leapfrog-steps", common.leapfrog_steps, Some(20))?
            .unwrap(),
        out: resolver.require("out", common.out.clone())?,
        date_col: resolver
            .get("date-col", common.date_col.clone(), Some("date".to_string()))?
            .unwrap(),
        value_col: resolver
            .get("value-col", common.value_col.clone(), Some("value".to_string()))?
            .unwrap(),
        h1,
        sequential: resolver.flag("sequential", common.sequential)?,
    })
}
