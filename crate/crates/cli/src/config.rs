use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use plab_core::analytics::{DEFAULT_RISK_FREE, DEFAULT_TRADING_DAYS};
use plab_core::mvp::DEFAULT_SAMPLES;
use plab_core::{DateSplit, Hyperparams};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Neural-agent settings, the `rl.*` keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlConfig {
    pub window: usize,
    pub episodes: usize,
    pub batch_size: usize,
    pub rebalance_period: usize,
    pub learning_rate: f64,
    pub gamma: f64,
    pub eps_start: f64,
    pub eps_min: f64,
    pub eps_decay: f64,
    pub step_delta: f64,
    pub hidden_dims: Vec<usize>,
    pub replay_capacity: usize,
}

impl Default for RlConfig {
    fn default() -> Self {
        let hp = Hyperparams::default();
        Self {
            window: hp.window,
            episodes: hp.episodes,
            batch_size: hp.batch_size,
            rebalance_period: hp.rebalance_period,
            learning_rate: hp.learning_rate,
            gamma: hp.gamma,
            eps_start: hp.eps_start,
            eps_min: hp.eps_min,
            eps_decay: hp.eps_decay,
            step_delta: hp.step_delta,
            hidden_dims: hp.hidden_dims,
            replay_capacity: hp.replay_capacity,
        }
    }
}

/// One run: data, split, shared settings and agent hyperparameters.
/// Relative paths are resolved against the directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: PathBuf,
    /// Row label in the comparison table.
    pub dataset: String,
    #[serde(with = "toml_date")]
    pub train_end: NaiveDate,
    #[serde(with = "toml_date")]
    pub test_start: NaiveDate,
    pub trading_days: usize,
    pub risk_free: f64,
    pub mc_samples: usize,
    pub frontier_bins: usize,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub rl: RlConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: PathBuf::from("data/synthetic_prices.csv"),
            dataset: "synthetic".into(),
            train_end: NaiveDate::from_ymd_opt(2019, 8, 30).expect("valid date"),
            test_start: NaiveDate::from_ymd_opt(2019, 9, 3).expect("valid date"),
            trading_days: DEFAULT_TRADING_DAYS,
            risk_free: DEFAULT_RISK_FREE,
            mc_samples: DEFAULT_SAMPLES,
            frontier_bins: 50,
            output_dir: PathBuf::from("out"),
            seed: 0,
            rl: RlConfig::default(),
        }
    }
}

/// Accepts a bare TOML date (`2019-08-30`) or a quoted ISO date.
mod toml_date {
    use chrono::NaiveDate;
    use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Date(toml::value::Datetime),
        Text(String),
    }

    pub fn serialize<S: Serializer>(d: &NaiveDate, s: S) -> Result<S::Ok, S::Error> {
        d.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveDate, D::Error> {
        let text = match Raw::deserialize(d)? {
            Raw::Date(dt) if dt.time.is_none() && dt.offset.is_none() => dt.to_string(),
            Raw::Date(dt) => return Err(de::Error::custom(format!("expected a date without time, found {dt}"))),
            Raw::Text(t) => t,
        };
        NaiveDate::parse_from_str(&text, "%Y-%m-%d").map_err(|e| de::Error::custom(format!("bad date {text:?}: {e}")))
    }
}

fn invalid(key: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {message}"))
}

impl RunConfig {
    /// Parses TOML text. Errors are one line and name the offending line.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let location = e
                .span()
                .map(|span| {
                    let line_no = text[..span.start].matches('\n').count() + 1;
                    let line = text.lines().nth(line_no - 1).unwrap_or("").trim();
                    format!("line {line_no} `{line}`: ")
                })
                .unwrap_or_default();
            CliError::Config(format!("{location}{}", e.message().trim()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and anchors its relative paths at the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)
            .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.detail())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.data = base.join(&cfg.data);
        cfg.output_dir = base.join(&cfg.output_dir);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.trading_days == 0 {
            return Err(invalid("trading_days", "must be positive"));
        }
        if !self.risk_free.is_finite() {
            return Err(invalid("risk_free", "must be finite"));
        }
        if self.mc_samples == 0 {
            return Err(invalid("mc_samples", "must be positive"));
        }
        if self.frontier_bins == 0 {
            return Err(invalid("frontier_bins", "must be positive"));
        }
        if self.dataset.is_empty() || self.dataset.contains([',', '"', '\n']) {
            return Err(invalid("dataset", "must be a non-empty label without commas or quotes"));
        }
        self.split()?;
        self.hyperparams()?;
        Ok(())
    }

    pub fn split(&self) -> Result<DateSplit, CliError> {
        DateSplit::new(self.train_end, self.test_start).map_err(|e| invalid("train_end", e))
    }

    pub fn hyperparams(&self) -> Result<Hyperparams, CliError> {
        let rl = &self.rl;
        let hp = Hyperparams {
            window: rl.window,
            episodes: rl.episodes,
            batch_size: rl.batch_size,
            rebalance_period: rl.rebalance_period,
            learning_rate: rl.learning_rate,
            gamma: rl.gamma,
            eps_start: rl.eps_start,
            eps_min: rl.eps_min,
            eps_decay: rl.eps_decay,
            step_delta: rl.step_delta,
            hidden_dims: rl.hidden_dims.clone(),
            replay_capacity: rl.replay_capacity,
            seed: self.seed,
            trading_days: self.trading_days,
        };
        hp.validate().map_err(|e| match e {
            plab_core::Error::Hyperparam { name, message } => invalid(&format!("rl.{name}"), message),
            other => CliError::Config(other.to_string()),
        })?;
        Ok(hp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.mc_samples, 10_000);
        assert_eq!(cfg.trading_days, 252);
        assert_eq!(cfg.risk_free, 0.01);
        assert_eq!(cfg.hyperparams().unwrap(), Hyperparams::default());
    }

    #[test]
    fn dotted_rl_keys() {
        let cfg = RunConfig::from_toml("seed = 9\nrl.window = 20\nrl.hidden_dims = [16]\n").unwrap();
        assert_eq!(cfg.rl.window, 20);
        let hp = cfg.hyperparams().unwrap();
        assert_eq!((hp.seed, hp.window, hp.hidden_dims), (9, 20, vec![16]));
    }

    #[test]
    fn errors_name_the_key() {
        let e = RunConfig::from_toml("seed = 1\ntrading_days = \"x\"\n").unwrap_err().to_string();
        assert!(e.contains("trading_days"), "{e}");
        assert!(!e.contains('\n'));
        let e = RunConfig::from_toml("rl.gama = 0.5\n").unwrap_err().to_string();
        assert!(e.contains("gama"), "{e}");
        let e = RunConfig::from_toml("rl.gamma = 1.5\n").unwrap_err().to_string();
        assert!(e.contains("rl.gamma"), "{e}");
        let e = RunConfig::from_toml("train_end = 2019-09-03\ntest_start = 2019-09-03\n")
            .unwrap_err()
            .to_string();
        assert!(e.contains("train_end"), "{e}");
    }
}
