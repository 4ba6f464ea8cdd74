//! Experiment manifest: a flat TOML table, overridden key by key from flags.
//!
//! ```toml
//! b = [-7.0, -10.0, -13.0]   # stage values, each < -6
//! m = [5, 6, 6]              # block exponents; omit for the minimal ones
//! allow_invalid_overrides = false
//! depth = 3                  # keep the first `depth` stages
//! seed = 1
//! out = "out"
//! times = [0, 5]             # render times
//! resolution = "1024x1024"
//! window = [0.0, 0.0, 2.4, 2.4]  # cx, cy, width, height; omit for the default
//! horizon = 3
//! tail_margin = 2
//! palette = "classic"
//! overlays = ["A:1"]
//! samples = 1000
//! radii_samples = 10000
//! grid_n = 36
//! codes = 16
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config {path}: {source}")]
    Parse {
        path: PathBuf,
        source: Box<toml::de::Error>,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub b: Option<Vec<f64>>,
    pub m: Option<Vec<u32>>,
    pub allow_invalid_overrides: Option<bool>,
    pub depth: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub times: Option<Vec<u64>>,
    pub resolution: Option<String>,
    pub window: Option<[f64; 4]>,
    pub horizon: Option<usize>,
    pub tail_margin: Option<usize>,
    pub palette: Option<String>,
    pub overlays: Option<Vec<String>>,
    pub samples: Option<usize>,
    pub radii_samples: Option<usize>,
    pub grid_n: Option<usize>,
    pub codes: Option<usize>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source: Box::new(source),
        })
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Keys set in `other` replace those in `self`.
    pub fn overlay(self, other: Config) -> Config {
        Config {
            b: other.b.or(self.b),
            m: other.m.or(self.m),
            allow_invalid_overrides: other.allow_invalid_overrides.or(self.allow_invalid_overrides),
            depth: other.depth.or(self.depth),
            seed: other.seed.or(self.seed),
            out: other.out.or(self.out),
            times: other.times.or(self.times),
            resolution: other.resolution.or(self.resolution),
            window: other.window.or(self.window),
            horizon: other.horizon.or(self.horizon),
            tail_margin: other.tail_margin.or(self.tail_margin),
            palette: other.palette.or(self.palette),
            overlays: other.overlays.or(self.overlays),
            samples: other.samples.or(self.samples),
            radii_samples: other.radii_samples.or(self.radii_samples),
            grid_n: other.grid_n.or(self.grid_n),
            codes: other.codes.or(self.codes),
        }
    }
}

/// Parses `WxH`.
pub fn parse_resolution(s: &str) -> Result<(usize, usize), ConfigError> {
    let bad = || ConfigError::Invalid(format!("resolution must look like 1024x768, got {s:?}"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let w: usize = w.trim().parse().map_err(|_| bad())?;
    let h: usize = h.trim().parse().map_err(|_| bad())?;
    if w < 2 || h < 2 {
        return Err(ConfigError::Invalid(format!("resolution must be at least 2x2, got {s}")));
    }
    Ok((w, h))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Config::parse("b = [-7.0]\ncolour = 1\n").is_err());
        assert!(Config::parse("b = \"-7\"\n").is_err());
        let c = Config::parse("b = [-7.0, -10.0]\nseed = 3\n").unwrap();
        assert_eq!(c.b, Some(vec![-7.0, -10.0]));
        assert_eq!(c.seed, Some(3));
    }

    #[test]
    fn flags_win() {
        let file = Config::parse("seed = 3\ndepth = 2\n").unwrap();
        let flags = Config {
            seed: Some(9),
            ..Config::default()
        };
        let merged = file.overlay(flags);
        assert_eq!(merged.seed, Some(9));
        assert_eq!(merged.depth, Some(2));
    }

    #[test]
    fn resolutions() {
        assert_eq!(parse_resolution("1024x768").unwrap(), (1024, 768));
        assert!(parse_resolution("1x5").is_err());
        assert!(parse_resolution("10by10").is_err());
    }
}
