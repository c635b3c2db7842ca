use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::Deserialize;

/// Service settings: a TOML file, then `CURATOR_*` environment overrides.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub data_dir: PathBuf,
    /// Defaults to `<data_dir>/archive`.
    pub archive_dir: Option<PathBuf>,
    pub bind: SocketAddr,
    pub annotator_dir: PathBuf,
    pub thumb_edge: u32,
    /// Built web UI, served under `/`.
    pub static_dir: PathBuf,
    pub annotator_workers: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            data_dir: PathBuf::from("curator-data"),
            archive_dir: None,
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            annotator_dir: PathBuf::from("annotators"),
            thumb_edge: 128,
            static_dir: PathBuf::from("web/dist"),
            annotator_workers: 2,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("{var}: {message}")]
    Env { var: &'static str, message: String },
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Config, toml::de::Error> {
        toml::from_str(text)
    }

    /// Reads `path` if given, then applies environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Config, ConfigError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                    path: p.to_path_buf(),
                    source,
                })?;
                Config::from_toml(&text).map_err(|source| ConfigError::Parse {
                    path: p.to_path_buf(),
                    source,
                })?
            }
            None => Config::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = get("CURATOR_DATA_DIR") {
            self.data_dir = v.into();
        }
        if let Some(v) = get("CURATOR_ARCHIVE_DIR") {
            self.archive_dir = Some(v.into());
        }
        if let Some(v) = get("CURATOR_ANNOTATOR_DIR") {
            self.annotator_dir = v.into();
        }
        if let Some(v) = get("CURATOR_BIND") {
            self.bind = v.parse().map_err(|e: std::net::AddrParseError| ConfigError::Env {
                var: "CURATOR_BIND",
                message: e.to_string(),
            })?;
        }
        if let Some(v) = get("CURATOR_THUMB_EDGE") {
            self.thumb_edge = v.parse().map_err(|e: std::num::ParseIntError| ConfigError::Env {
                var: "CURATOR_THUMB_EDGE",
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn archive_dir(&self) -> PathBuf {
        self.archive_dir.clone().unwrap_or_else(|| self.data_dir.join("archive"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_overrides_file() {
        let mut cfg = Config::from_toml("data_dir = \"/srv/c\"\nthumb_edge = 64\n").unwrap();
        assert_eq!(cfg.archive_dir(), PathBuf::from("/srv/c/archive"));
        cfg.apply_env(|k| match k {
            "CURATOR_THUMB_EDGE" => Some("256".into()),
            "CURATOR_BIND" => Some("0.0.0.0:9000".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(cfg.thumb_edge, 256);
        assert_eq!(cfg.bind.port(), 9000);
        assert_eq!(cfg.data_dir, PathBuf::from("/srv/c"));
    }

    #[test]
    fn default_bind_is_loopback() {
        assert!(Config::default().bind.ip().is_loopback());
        assert!(Config::from_toml("bogus = 1").is_err());
    }
}
