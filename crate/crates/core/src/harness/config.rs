//! Experiment configuration files.
//!
//! Line-oriented `key = value` pairs under `[section]` headers; lists are
//! comma-separated. Only the keys documented below are accepted.
//!
//! ```text
//! [experiment]
//! trials = 100
//! master_seed = 1
//! k_list = 20, 30, 40
//! estimators = SMI, FML, RCML_EL, RCML_FIXED(5), CNCML_ML, CNCML_EL
//! output = results
//!
//! [scenario]
//! n = 20
//! noise_power = 1
//! jammer_powers = 100, 1e4, 1e6
//! jammer_angles = 20, 40, 60
//! jammer_bandwidths = 0.2, 0, 0.3
//!
//! [corruption]
//! fraction = 0.5
//! amplitude = 50
//! angle = 0
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;

use crate::error::{Error, Result};
use crate::scenario::{steering_vector_with, AngleMode, CorruptionSpec, Jammer, ScenarioConfig, SincConvention};

/// An estimator together with the way its constraint is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorSpec {
    Smi,
    Fml,
    /// Rank chosen by expected likelihood with the noise power known.
    RcmlEl,
    /// Rank and noise power chosen jointly by expected likelihood.
    RcmlElJoint,
    RcmlFixed(usize),
    /// Condition-number bound at its ML value `max(d₁/σ², 1)`.
    CncmlMl,
    /// Condition-number bound chosen by expected likelihood.
    CncmlEl,
    /// Diagonal loading chosen by expected likelihood.
    LsmiEl,
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorSpec::Smi => f.write_str("SMI"),
            EstimatorSpec::Fml => f.write_str("FML"),
            EstimatorSpec::RcmlEl => f.write_str("RCML_EL"),
            EstimatorSpec::RcmlElJoint => f.write_str("RCML_EL_JOINT"),
            EstimatorSpec::RcmlFixed(r) => write!(f, "RCML_FIXED({r})"),
            EstimatorSpec::CncmlMl => f.write_str("CNCML_ML"),
            EstimatorSpec::CncmlEl => f.write_str("CNCML_EL"),
            EstimatorSpec::LsmiEl => f.write_str("LSMI_EL"),
        }
    }
}

impl FromStr for EstimatorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_uppercase();
        Ok(match t.as_str() {
            "SMI" => EstimatorSpec::Smi,
            "FML" => EstimatorSpec::Fml,
            "RCML_EL" => EstimatorSpec::RcmlEl,
            "RCML_EL_JOINT" => EstimatorSpec::RcmlElJoint,
            "CNCML_ML" => EstimatorSpec::CncmlMl,
            "CNCML_EL" => EstimatorSpec::CncmlEl,
            "LSMI_EL" => EstimatorSpec::LsmiEl,
            _ => {
                let r = t
                    .strip_prefix("RCML_FIXED(")
                    .and_then(|rest| rest.strip_suffix(')'))
                    .and_then(|v| v.trim().parse::<usize>().ok())
                    .ok_or_else(|| Error::Config(format!("unknown estimator \"{}\"", s.trim())))?;
                EstimatorSpec::RcmlFixed(r)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionConfig {
    pub fraction: f64,
    pub amplitude: f64,
    /// Angle of the target-like component, in degrees.
    pub angle_deg: f64,
}

impl CorruptionConfig {
    pub fn spec(&self, scenario: &ScenarioConfig) -> CorruptionSpec {
        CorruptionSpec {
            fraction: self.fraction,
            amplitude: self.amplitude,
            steering: steering_vector_with(scenario.n, self.angle_deg, scenario.angle_mode),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub k_list: Vec<usize>,
    pub trials: usize,
    pub master_seed: u64,
    pub estimators: Vec<EstimatorSpec>,
    pub lr0_table_path: Option<PathBuf>,
    /// Monte-Carlo trials when the reference LR has to be computed.
    pub lr0_trials: usize,
    pub lr0_seed: u64,
    pub autocompute_lr0: bool,
    /// Steering angles in degrees. Empty selects the default grid.
    pub steering_grid: Vec<f64>,
    pub corruption: Option<CorruptionConfig>,
    pub output_dir: PathBuf,
    /// Noise power given to the estimators that assume it known.
    /// `None` uses the scenario noise power.
    pub sigma2: Option<f64>,
    /// Starting rank for the rank searches. `None` uses the jammer count.
    pub rank_init: Option<usize>,
    /// Steering angle for the NMF tie-break of the joint selector.
    pub nmf_angle: f64,
    /// Adds a wall-clock column to the per-trial CSV.
    pub record_timing: bool,
}

impl ExperimentConfig {
    pub fn new(scenario: ScenarioConfig, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            scenario,
            k_list: vec![],
            trials: 1,
            master_seed: 0,
            estimators: vec![EstimatorSpec::Smi],
            lr0_table_path: None,
            lr0_trials: 20000,
            lr0_seed: 0,
            autocompute_lr0: true,
            steering_grid: vec![],
            corruption: None,
            output_dir: output_dir.into(),
            sigma2: None,
            rank_init: None,
            nmf_angle: 0.0,
            record_timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.k_list.is_empty() || self.k_list.contains(&0) {
            return Err(Error::Config("k_list must be a non-empty list of positive counts".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("no estimators configured".into()));
        }
        if let Some(c) = &self.corruption {
            if !(0.0..=1.0).contains(&c.fraction) {
                return Err(Error::Config(format!("corruption fraction {} outside [0, 1]", c.fraction)));
            }
        }
        if let Some(s) = self.sigma2 {
            if !(s > 0.0) {
                return Err(Error::Config("sigma2 must be positive".into()));
            }
        }
        Ok(())
    }

    /// The configured steering angles, or 19 angles from −90° to 90° in 10°
    /// steps with those within 1° of a jammer removed.
    pub fn steering_angles(&self) -> Vec<f64> {
        if !self.steering_grid.is_empty() {
            return self.steering_grid.clone();
        }
        (0..19)
            .map(|i| -90.0 + 10.0 * i as f64)
            .filter(|a| self.scenario.jammers.iter().all(|j| (a - j.angle_deg).abs() > 1.0))
            .collect()
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2.unwrap_or(self.scenario.noise_power)
    }

    pub fn rank_init(&self) -> usize {
        self.rank_init.unwrap_or(self.scenario.jammers.len()).min(self.scenario.n)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_str_at(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Parses configuration text; relative paths are resolved against `base`.
    pub fn from_str_at(text: &str, base: &Path) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut exp = Section::new("experiment", EXPERIMENT_KEYS);
        let mut scen = Section::new("scenario", SCENARIO_KEYS);
        let mut corr = Section::new("corruption", CORRUPTION_KEYS);
        for (name, props) in ini.iter() {
            let target = match name {
                Some("experiment") => &mut exp,
                Some("scenario") => &mut scen,
                Some("corruption") => &mut corr,
                Some(other) => return Err(Error::Config(format!("unknown section [{other}]"))),
                None if props.is_empty() => continue,
                None => return Err(Error::Config("keys must appear under a [section] header".into())),
            };
            for (k, v) in props.iter() {
                target.insert(k, v)?;
            }
        }

        let powers: Vec<f64> = scen.list("jammer_powers")?.unwrap_or_default();
        let angles: Vec<f64> = scen.list("jammer_angles")?.unwrap_or_default();
        let bandwidths: Vec<f64> = match scen.list("jammer_bandwidths")? {
            Some(b) => b,
            None => vec![0.0; powers.len()],
        };
        if angles.len() != powers.len() || bandwidths.len() != powers.len() {
            return Err(Error::Config(format!(
                "jammer lists differ in length: {} powers, {} angles, {} bandwidths",
                powers.len(),
                angles.len(),
                bandwidths.len()
            )));
        }
        let jammers = powers
            .iter()
            .zip(&angles)
            .zip(&bandwidths)
            .map(|((&power, &angle_deg), &bandwidth)| Jammer {
                power,
                angle_deg,
                bandwidth,
            })
            .collect();
        let scenario = ScenarioConfig {
            n: scen.required("n")?,
            jammers,
            noise_power: scen.value("noise_power")?.unwrap_or(1.0),
            sinc: match scen.raw("sinc") {
                None | Some("unnormalized") => SincConvention::Unnormalized,
                Some("normalized") => SincConvention::Normalized,
                Some(v) => return Err(Error::Config(format!("sinc must be unnormalized or normalized, got \"{v}\""))),
            },
            angle_mode: match scen.raw("angle_mode") {
                None | Some("phase") => AngleMode::Phase,
                Some("sine") => AngleMode::ArraySine,
                Some(v) => return Err(Error::Config(format!("angle_mode must be phase or sine, got \"{v}\""))),
            },
        };

        let corruption = if corr.is_empty() {
            None
        } else {
            Some(CorruptionConfig {
                fraction: corr.required("fraction")?,
                amplitude: corr.required("amplitude")?,
                angle_deg: corr.value("angle")?.unwrap_or(0.0),
            })
        };

        let resolve = |p: &str| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        let estimators = match exp.raw("estimators") {
            Some(v) => split_list(v).map(EstimatorSpec::from_str).collect::<Result<Vec<_>>>()?,
            None => vec![EstimatorSpec::Smi],
        };
        let cfg = ExperimentConfig {
            scenario,
            k_list: exp.list("k_list")?.ok_or_else(|| Error::Config("[experiment] k_list is required".into()))?,
            trials: exp.required("trials")?,
            master_seed: exp.value("master_seed")?.unwrap_or(0),
            estimators,
            lr0_table_path: exp.raw("lr0_table").map(resolve),
            lr0_trials: exp.value("lr0_trials")?.unwrap_or(20000),
            lr0_seed: exp.value("lr0_seed")?.unwrap_or(0),
            autocompute_lr0: exp.value("autocompute_lr0")?.unwrap_or(true),
            steering_grid: exp.list("steering_grid")?.unwrap_or_default(),
            corruption,
            output_dir: resolve(exp.raw("output").unwrap_or("results")),
            sigma2: exp.value("sigma2")?,
            rank_init: exp.value("rank_init")?,
            nmf_angle: exp.value("nmf_angle")?.unwrap_or(0.0),
            record_timing: exp.value("record_timing")?.unwrap_or(false),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

const EXPERIMENT_KEYS: &[&str] = &[
    "trials",
    "master_seed",
    "k_list",
    "estimators",
    "lr0_table",
    "lr0_trials",
    "lr0_seed",
    "autocompute_lr0",
    "steering_grid",
    "output",
    "sigma2",
    "rank_init",
    "nmf_angle",
    "record_timing",
];
const SCENARIO_KEYS: &[&str] = &[
    "n",
    "noise_power",
    "jammer_powers",
    "jammer_angles",
    "jammer_bandwidths",
    "sinc",
    "angle_mode",
];
const CORRUPTION_KEYS: &[&str] = &["fraction", "amplitude", "angle"];

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

/// The key/value pairs of one section, checked against its allowed keys.
struct Section {
    name: &'static str,
    allowed: &'static [&'static str],
    entries: Vec<(String, String)>,
}

impl Section {
    fn new(name: &'static str, allowed: &'static [&'static str]) -> Self {
        Self {
            name,
            allowed,
            entries: Vec::new(),
        }
    }

    fn insert(&mut self, key: &str, value: &str) -> Result<()> {
        if !self.allowed.contains(&key) {
            return Err(Error::Config(format!("unknown key \"{key}\" in [{}]", self.name)));
        }
        if self.raw(key).is_some() {
            return Err(Error::Config(format!("duplicate key \"{key}\" in [{}]", self.name)));
        }
        self.entries.push((key.to_string(), value.trim().to_string()));
        Ok(())
    }

    fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn value<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::Config(format!("[{}] {key}: cannot parse \"{v}\"", self.name)))
            })
            .transpose()
    }

    fn required<T: FromStr>(&self, key: &str) -> Result<T> {
        self.value(key)?
            .ok_or_else(|| Error::Config(format!("[{}] {key} is required", self.name)))
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        self.raw(key)
            .map(|v| {
                split_list(v)
                    .map(|item| {
                        item.parse::<T>().map_err(|_| {
                            Error::Config(format!("[{}] {key}: cannot parse list item \"{item}\"", self.name))
                        })
                    })
                    .collect()
            })
            .transpose()
    }
}
