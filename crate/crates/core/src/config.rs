//! `key = value` configuration overrides for the detector and the learners.

use std::path::Path;

use thiserror::Error;

use crate::regressors::Hyperparameters;
use crate::spectral::SpectralConfig;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value `{value}` for `{key}`")]
    InvalidValue { line: usize, key: String, value: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TelescopeConfig {
    pub spectral: SpectralConfig,
    pub hyper: Hyperparameters,
}

pub const KEYS: &[&str] = &[
    "spectral.peak_fraction",
    "spectral.median_ratio",
    "spectral.false_alarm",
    "spectral.max_count",
    "cart.max_depth",
    "cart.min_leaf",
    "cart.folds",
    "forest.trees",
    "forest.max_depth",
    "forest.min_leaf",
    "boosting.rounds",
    "boosting.learning_rate",
    "boosting.max_depth",
    "boosting.min_leaf",
];

impl TelescopeConfig {
    /// Applies overrides on top of the defaults. Blank lines and `#`
    /// comments are ignored.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            cfg.set(line, key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    fn set(&mut self, line: usize, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::InvalidValue {
            line,
            key: key.to_string(),
            value: value.to_string(),
        };
        let real = || -> Result<f64, ConfigError> {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v > 0.0)
                .ok_or_else(bad)
        };
        let count = || -> Result<usize, ConfigError> { value.parse::<usize>().map_err(|_| bad()) };
        let positive =
            || -> Result<usize, ConfigError> { count().and_then(|v| if v == 0 { Err(bad()) } else { Ok(v) }) };
        let (s, h) = (&mut self.spectral, &mut self.hyper);
        match key {
            "spectral.peak_fraction" => {
                s.peak_fraction = real().and_then(|v| if v <= 1.0 { Ok(v) } else { Err(bad()) })?
            }
            "spectral.median_ratio" => s.median_ratio = real()?,
            "spectral.false_alarm" => s.false_alarm = real().and_then(|v| if v < 1.0 { Ok(v) } else { Err(bad()) })?,
            "spectral.max_count" => s.max_count = positive()?,
            "cart.max_depth" => h.cart.max_depth = count()?,
            "cart.min_leaf" => h.cart.min_leaf = positive()?,
            "cart.folds" => h.cart.folds = count()?,
            "forest.trees" => h.forest.trees = positive()?,
            "forest.max_depth" => h.forest.max_depth = count()?,
            "forest.min_leaf" => h.forest.min_leaf = positive()?,
            "boosting.rounds" => h.boosting.rounds = count()?,
            "boosting.learning_rate" => h.boosting.learning_rate = real()?,
            "boosting.max_depth" => h.boosting.max_depth = count()?,
            "boosting.min_leaf" => h.boosting.min_leaf = positive()?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_apply() {
        let cfg = TelescopeConfig::parse(
            "# tuned\nboosting.rounds = 50\n\nspectral.max_count=2  # fewer\nforest.trees = 10\n",
        )
        .unwrap();
        assert_eq!(cfg.hyper.boosting.rounds, 50);
        assert_eq!(cfg.spectral.max_count, 2);
        assert_eq!(cfg.hyper.forest.trees, 10);
        assert_eq!(cfg.hyper.cart, Hyperparameters::default().cart);
    }

    #[test]
    fn errors_name_the_line() {
        assert_eq!(TelescopeConfig::parse("a\n"), Err(ConfigError::Syntax { line: 1 }));
        assert!(matches!(
            TelescopeConfig::parse("\nfoo = 1"),
            Err(ConfigError::UnknownKey { line: 2, .. })
        ));
        assert!(matches!(
            TelescopeConfig::parse("forest.trees = 0"),
            Err(ConfigError::InvalidValue { line: 1, .. })
        ));
        assert!(TelescopeConfig::parse("boosting.learning_rate = nan").is_err());
    }

    #[test]
    fn every_key_is_accepted() {
        for key in KEYS {
            let value = if key.contains("fraction") || key.contains("alarm") || key.contains("rate") {
                "0.5"
            } else {
                "3"
            };
            TelescopeConfig::parse(&format!("{key} = {value}")).unwrap();
        }
    }
}
