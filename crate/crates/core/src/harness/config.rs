//! Flat key-value experiment configuration with lossless round-tripping.
//!
//! The file format is one `key = value` assignment per line; `#` starts a
//! comment; keys are snake_case and unknown keys are errors. Lists are
//! comma-separated. Example:
//!
//! ```text
//! scenario = a
//! n_total = 6
//! snr_db = 5,15,30
//! trials = 500
//! seed = 42
//! estimators = stieltjes,classical
//! ```

use crate::error::{Error, Result};
use crate::estimators::Method;
use crate::model::{scenario_a, scenario_b, Constellation, ScenarioSpec};
use crate::types::{NoiseLevel, PowerProfile, SystemShape};

/// Named scenario selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    A,
    B,
    Custom,
}

/// Separability sweep selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// Critical sensor ratio `c_0` against the power ratio `P_1/P_2`.
    C0VsRatio,
    /// Critical sample ratio `c` against the noise variance.
    CVsSigma2,
}

/// Experiment configuration. Every field is optional; defaults are applied
/// where the runners consume them, so parse/serialize round-trips exactly.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentConfig {
    pub scenario: Option<ScenarioKind>,
    pub n_total: Option<usize>,
    pub powers: Option<Vec<f64>>,
    pub mults: Option<Vec<usize>>,
    pub sensors: Option<usize>,
    pub samples: Option<usize>,
    pub sigma2: Option<f64>,
    pub snr_db: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub estimators: Option<Vec<Method>>,
    pub constellation: Option<Constellation>,
    pub grid_points: Option<usize>,
    pub grid_min: Option<f64>,
    pub grid_max: Option<f64>,
    pub y_offset: Option<f64>,
    pub k_max: Option<usize>,
    pub tau: Option<f64>,
    pub even_sizes: Option<bool>,
    pub dump_trials: Option<bool>,
    pub overlay: Option<bool>,
    pub sweep: Option<SweepKind>,
    pub sweep_values: Option<Vec<f64>>,
    pub c0: Option<f64>,
    pub cap: Option<f64>,
}

impl ExperimentConfig {
    /// Parse the documented key-value format.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(cfg)
    }

    /// Assign one key; used both by the parser and by CLI overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "scenario" => {
                self.scenario = Some(match value {
                    "a" => ScenarioKind::A,
                    "b" => ScenarioKind::B,
                    "custom" => ScenarioKind::Custom,
                    other => {
                        return Err(Error::Config(format!(
                            "scenario must be a, b or custom, got '{other}'"
                        )))
                    }
                })
            }
            "n_total" => self.n_total = Some(parse_one(key, value)?),
            "powers" => self.powers = Some(parse_list(key, value)?),
            "mults" => self.mults = Some(parse_list(key, value)?),
            "sensors" => self.sensors = Some(parse_one(key, value)?),
            "samples" => self.samples = Some(parse_one(key, value)?),
            "sigma2" => self.sigma2 = Some(parse_one(key, value)?),
            "snr_db" => self.snr_db = Some(parse_list(key, value)?),
            "trials" => self.trials = Some(parse_one(key, value)?),
            "seed" => self.seed = Some(parse_one(key, value)?),
            "out" => self.out = Some(value.to_string()),
            "estimators" => {
                let mut methods = Vec::new();
                for item in value.split(',') {
                    methods.push(item.trim().parse::<Method>()?);
                }
                self.estimators = Some(methods);
            }
            "constellation" => {
                self.constellation = Some(match value {
                    "qpsk" => Constellation::Qpsk,
                    "gaussian" => Constellation::GaussianComplex,
                    other => {
                        return Err(Error::Config(format!(
                            "constellation must be qpsk or gaussian, got '{other}'"
                        )))
                    }
                })
            }
            "grid_points" => self.grid_points = Some(parse_one(key, value)?),
            "grid_min" => self.grid_min = Some(parse_one(key, value)?),
            "grid_max" => self.grid_max = Some(parse_one(key, value)?),
            "y_offset" => self.y_offset = Some(parse_one(key, value)?),
            "k_max" => self.k_max = Some(parse_one(key, value)?),
            "tau" => self.tau = Some(parse_one(key, value)?),
            "even_sizes" => self.even_sizes = Some(parse_bool(key, value)?),
            "dump_trials" => self.dump_trials = Some(parse_bool(key, value)?),
            "overlay" => self.overlay = Some(parse_bool(key, value)?),
            "sweep" => {
                self.sweep = Some(match value {
                    "c0-vs-ratio" => SweepKind::C0VsRatio,
                    "c-vs-sigma2" => SweepKind::CVsSigma2,
                    other => {
                        return Err(Error::Config(format!(
                            "sweep must be c0-vs-ratio or c-vs-sigma2, got '{other}'"
                        )))
                    }
                })
            }
            "sweep_values" => self.sweep_values = Some(parse_list(key, value)?),
            "c0" => self.c0 = Some(parse_one(key, value)?),
            "cap" => self.cap = Some(parse_one(key, value)?),
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Serialize to the same format [`ExperimentConfig::parse_str`] reads.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let mut put = |key: &str, value: String| {
            s.push_str(key);
            s.push_str(" = ");
            s.push_str(&value);
            s.push('\n');
        };
        if let Some(v) = self.scenario {
            put(
                "scenario",
                match v {
                    ScenarioKind::A => "a",
                    ScenarioKind::B => "b",
                    ScenarioKind::Custom => "custom",
                }
                .into(),
            );
        }
        if let Some(v) = self.n_total {
            put("n_total", v.to_string());
        }
        if let Some(v) = &self.powers {
            put("powers", join_floats(v));
        }
        if let Some(v) = &self.mults {
            put("mults", v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","));
        }
        if let Some(v) = self.sensors {
            put("sensors", v.to_string());
        }
        if let Some(v) = self.samples {
            put("samples", v.to_string());
        }
        if let Some(v) = self.sigma2 {
            put("sigma2", format!("{v:?}"));
        }
        if let Some(v) = &self.snr_db {
            put("snr_db", join_floats(v));
        }
        if let Some(v) = self.trials {
            put("trials", v.to_string());
        }
        if let Some(v) = self.seed {
            put("seed", v.to_string());
        }
        if let Some(v) = &self.out {
            put("out", v.clone());
        }
        if let Some(v) = &self.estimators {
            put("estimators", v.iter().map(|m| m.name()).collect::<Vec<_>>().join(","));
        }
        if let Some(v) = self.constellation {
            put(
                "constellation",
                match v {
                    Constellation::Qpsk => "qpsk",
                    Constellation::GaussianComplex => "gaussian",
                }
                .into(),
            );
        }
        if let Some(v) = self.grid_points {
            put("grid_points", v.to_string());
        }
        if let Some(v) = self.grid_min {
            put("grid_min", format!("{v:?}"));
        }
        if let Some(v) = self.grid_max {
            put("grid_max", format!("{v:?}"));
        }
        if let Some(v) = self.y_offset {
            put("y_offset", format!("{v:?}"));
        }
        if let Some(v) = self.k_max {
            put("k_max", v.to_string());
        }
        if let Some(v) = self.tau {
            put("tau", format!("{v:?}"));
        }
        if let Some(v) = self.even_sizes {
            put("even_sizes", v.to_string());
        }
        if let Some(v) = self.dump_trials {
            put("dump_trials", v.to_string());
        }
        if let Some(v) = self.overlay {
            put("overlay", v.to_string());
        }
        if let Some(v) = self.sweep {
            put(
                "sweep",
                match v {
                    SweepKind::C0VsRatio => "c0-vs-ratio",
                    SweepKind::CVsSigma2 => "c-vs-sigma2",
                }
                .into(),
            );
        }
        if let Some(v) = &self.sweep_values {
            put("sweep_values", join_floats(v));
        }
        if let Some(v) = self.c0 {
            put("c0", format!("{v:?}"));
        }
        if let Some(v) = self.cap {
            put("cap", format!("{v:?}"));
        }
        s
    }

    /// Number of Monte Carlo trials (default 500).
    pub fn trials(&self) -> usize {
        self.trials.unwrap_or(500)
    }

    /// Base seed (default 42).
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(42)
    }

    /// Estimator set (default: all three).
    pub fn estimators(&self) -> Vec<Method> {
        self.estimators
            .clone()
            .unwrap_or_else(|| vec![Method::Stieltjes, Method::Classical, Method::Moment])
    }

    /// Noise grid as `(snr_db, sigma2)` pairs; a fixed `sigma2` wins over an
    /// SNR grid.
    pub fn noise_grid(&self) -> Result<Vec<(f64, f64)>> {
        if let Some(s2) = self.sigma2 {
            if s2 <= 0.0 {
                return Err(Error::Config("sigma2 must be > 0".into()));
            }
            return Ok(vec![(-10.0 * s2.log10(), s2)]);
        }
        if let Some(grid) = &self.snr_db {
            if grid.is_empty() {
                return Err(Error::Config("snr_db grid must be nonempty".into()));
            }
            return Ok(grid
                .iter()
                .map(|&snr| (snr, NoiseLevel::from_snr_db(snr).sigma2()))
                .collect());
        }
        Err(Error::Config("either sigma2 or snr_db must be given".into()))
    }

    /// Scenario spec at a given noise variance, seeded with the base seed.
    pub fn spec_at(&self, sigma2: f64) -> Result<ScenarioSpec> {
        let scenario = self.scenario.ok_or_else(|| {
            Error::Config("scenario must be set (a, b or custom)".into())
        })?;
        let mut spec = match scenario {
            ScenarioKind::A => scenario_a(self.n_total.unwrap_or(6), 0.0)
                .map_err(|e| Error::Config(e.to_string()))?,
            ScenarioKind::B => scenario_b(0.0),
            ScenarioKind::Custom => {
                let powers = self
                    .powers
                    .as_ref()
                    .ok_or_else(|| Error::Config("custom scenario needs powers".into()))?;
                let mults = self
                    .mults
                    .as_ref()
                    .ok_or_else(|| Error::Config("custom scenario needs mults".into()))?;
                let profile = PowerProfile::new(powers, mults)
                    .map_err(|e| Error::Config(e.to_string()))?;
                let sensors = self
                    .sensors
                    .ok_or_else(|| Error::Config("custom scenario needs sensors".into()))?;
                let samples = self
                    .samples
                    .ok_or_else(|| Error::Config("custom scenario needs samples".into()))?;
                let antennas = profile.total_antennas();
                ScenarioSpec {
                    profile,
                    shape: SystemShape::new(sensors, samples, antennas)
                        .map_err(|e| Error::Config(e.to_string()))?,
                    noise: NoiseLevel::new(1.0).unwrap(),
                    constellation: Constellation::Qpsk,
                    seed: 0,
                }
            }
        };
        spec.noise = NoiseLevel::new(sigma2).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(c) = self.constellation {
            spec.constellation = c;
        }
        spec.seed = self.seed();
        Ok(spec)
    }
}

fn parse_one<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::Config(format!("cannot parse '{value}' for key '{key}'")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|item| parse_one(key, item.trim())).collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(Error::Config(format!("key '{key}' expects true/false, got '{other}'"))),
    }
}

fn join_floats(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_round_trips() {
        let text = "\
# scenario (a) sweep
scenario = a
n_total = 6
snr_db = 5,15,30
trials = 100
seed = 7
estimators = stieltjes,classical
tau = 0.0
even_sizes = false
grid_points = 800
";
        let cfg = ExperimentConfig::parse_str(text).unwrap();
        assert_eq!(cfg.scenario, Some(ScenarioKind::A));
        assert_eq!(cfg.snr_db.as_deref(), Some(&[5.0, 15.0, 30.0][..]));
        assert_eq!(cfg.trials(), 100);
        let round = ExperimentConfig::parse_str(&cfg.to_config_string()).unwrap();
        assert_eq!(cfg, round);
    }

    #[test]
    fn round_trips_with_floats_and_custom_fields() {
        let mut cfg = ExperimentConfig::default();
        cfg.scenario = Some(ScenarioKind::Custom);
        cfg.powers = Some(vec![0.0625, 0.25, 1.0]);
        cfg.mults = Some(vec![4, 4, 4]);
        cfg.sensors = Some(24);
        cfg.samples = Some(128);
        cfg.sigma2 = Some(0.017782794100389226);
        cfg.y_offset = Some(1e-7);
        cfg.sweep = Some(SweepKind::CVsSigma2);
        cfg.sweep_values = Some(vec![0.1, 0.5, 1.0, 2.0]);
        cfg.c0 = Some(10.0);
        let round = ExperimentConfig::parse_str(&cfg.to_config_string()).unwrap();
        assert_eq!(cfg, round);
    }

    #[test]
    fn unknown_keys_are_errors() {
        assert!(matches!(
            ExperimentConfig::parse_str("bogus = 1\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::parse_str("scenario = q\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::parse_str("just a line\n"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn spec_resolution() {
        let cfg = ExperimentConfig::parse_str("scenario = b\nsigma2 = 0.01\n").unwrap();
        let grid = cfg.noise_grid().unwrap();
        assert_eq!(grid.len(), 1);
        assert!((grid[0].0 - 20.0).abs() < 1e-12);
        let spec = cfg.spec_at(grid[0].1).unwrap();
        assert_eq!(spec.shape.sensors(), 24);
        assert_eq!(spec.seed, 42);
    }
}
