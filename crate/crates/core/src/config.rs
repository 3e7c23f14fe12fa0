//! `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are
//! errors so typos do not silently fall back to defaults.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::pipeline::PipelineConfig;
use crate::recognizer::PlateFormat;
use crate::trackstore::DEFAULT_PBKDF2_ITERATIONS;

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";
pub const DEFAULT_TOKEN_TTL_S: u64 = 12 * 3600;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected key = value")]
    Syntax { line: usize },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for {key}: {message}")]
    Value { line: usize, key: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone)]
pub struct AppConfig {
    pub store_dir: Option<PathBuf>,
    pub bind: String,
    pub pipeline: PipelineConfig,
    pub pbkdf2_iterations: u32,
    pub token_ttl_s: u64,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            store_dir: None,
            bind: DEFAULT_BIND.into(),
            pipeline: PipelineConfig::default(),
            pbkdf2_iterations: DEFAULT_PBKDF2_ITERATIONS,
            token_ttl_s: DEFAULT_TOKEN_TTL_S,
        }
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::Value { line, key: key.into(), message: e.to_string() })
}

impl AppConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(ConfigError::Syntax { line });
            }
            cfg.set(line, key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, line: usize, key: &str, value: &str) -> Result<(), ConfigError> {
        let p = &mut self.pipeline;
        let d = &mut p.detector;
        let r = &mut p.recognize;
        match key {
            "store_dir" => self.store_dir = Some(PathBuf::from(value)),
            "bind" => self.bind = value.to_string(),
            "pbkdf2_iterations" => self.pbkdf2_iterations = parse_value(line, key, value)?,
            "token_ttl_s" => self.token_ttl_s = parse_value(line, key, value)?,
            "plate_pattern" => {
                p.plate_format = PlateFormat::new(value).map_err(|e| ConfigError::Value {
                    line,
                    key: key.into(),
                    message: e.to_string(),
                })?
            }
            "min_confidence" => p.min_confidence = parse_value(line, key, value)?,
            "dedup_window_s" => {
                let s: f64 = parse_value(line, key, value)?;
                if !(s.is_finite() && s >= 0.0) {
                    return Err(ConfigError::Value { line, key: key.into(), message: "must be >= 0".into() });
                }
                p.dedup_window_ms = (s * 1000.0).round() as i64;
            }
            "crop_padding" => p.crop_padding = parse_value(line, key, value)?,
            "score_threshold" => d.score_threshold = parse_value(line, key, value)?,
            "nms_iou_threshold" => d.nms_iou_threshold = parse_value(line, key, value)?,
            "stride" => d.stride = parse_value(line, key, value)?,
            "min_box_area" => d.min_box_area = parse_value(line, key, value)?,
            "max_box_area" => d.max_box_area = parse_value(line, key, value)?,
            "aspect_min" => d.aspect_min = parse_value(line, key, value)?,
            "aspect_max" => d.aspect_max = parse_value(line, key, value)?,
            "min_mean_pixel" => d.min_mean_pixel = parse_value(line, key, value)?,
            "closing_width" => d.closing_width = parse_value(line, key, value)?,
            "min_edge_magnitude" => d.min_edge_magnitude = parse_value(line, key, value)?,
            "blur_sigma" => r.blur_sigma = parse_value(line, key, value)?,
            "blur_ksize" => r.blur_ksize = parse_value(line, key, value)?,
            "reject_threshold" => r.reject_threshold = parse_value(line, key, value)?,
            _ => return Err(ConfigError::UnknownKey { line, key: key.into() }),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.pipeline.detector.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let p = &self.pipeline;
        if !(0.0..=1.0).contains(&p.min_confidence) {
            return Err(ConfigError::Invalid(format!("min_confidence {} not in [0, 1]", p.min_confidence)));
        }
        if !(0.0..=1.0).contains(&p.recognize.reject_threshold) {
            return Err(ConfigError::Invalid(format!(
                "reject_threshold {} not in [0, 1]",
                p.recognize.reject_threshold
            )));
        }
        if !(p.crop_padding >= 0.0 && p.crop_padding <= 2.0) {
            return Err(ConfigError::Invalid(format!("crop_padding {} not in [0, 2]", p.crop_padding)));
        }
        if !(p.recognize.blur_sigma > 0.0) || p.recognize.blur_ksize.is_multiple_of(2) {
            return Err(ConfigError::Invalid("blur needs sigma > 0 and an odd kernel size".into()));
        }
        if self.pbkdf2_iterations == 0 || self.token_ttl_s == 0 {
            return Err(ConfigError::Invalid("pbkdf2_iterations and token_ttl_s must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_default() {
        let cfg = AppConfig::parse("# nothing\n\n").unwrap();
        assert_eq!(cfg.bind, DEFAULT_BIND);
        assert_eq!(cfg.pipeline.min_confidence, 0.6);
        assert_eq!(cfg.pipeline.dedup_window_ms, 5000);
    }

    #[test]
    fn keys_applied() {
        let cfg = AppConfig::parse(
            "store_dir = /var/lib/plates\nbind=0.0.0.0:9000\nscore_threshold = 0.7\n\
             plate_pattern = [A-Z]{3}[0-9]{3}\ndedup_window_s = 2.5\nmin_confidence = 0\n",
        )
        .unwrap();
        assert_eq!(cfg.store_dir.as_deref(), Some(Path::new("/var/lib/plates")));
        assert_eq!(cfg.bind, "0.0.0.0:9000");
        assert_eq!(cfg.pipeline.detector.score_threshold, 0.7);
        assert!(cfg.pipeline.plate_format.matches("ABC123"));
        assert!(!cfg.pipeline.plate_format.matches("ABC1234"));
        assert_eq!(cfg.pipeline.dedup_window_ms, 2500);
        assert_eq!(cfg.pipeline.min_confidence, 0.0);
    }

    #[test]
    fn errors_name_the_line() {
        assert!(matches!(AppConfig::parse("bind\n"), Err(ConfigError::Syntax { line: 1 })));
        assert!(matches!(AppConfig::parse("\nfoo = 1"), Err(ConfigError::UnknownKey { line: 2, .. })));
        assert!(matches!(AppConfig::parse("stride = x"), Err(ConfigError::Value { line: 1, .. })));
        assert!(matches!(AppConfig::parse("plate_pattern = [A-"), Err(ConfigError::Value { line: 1, .. })));
    }

    #[test]
    fn range_checks() {
        assert!(matches!(AppConfig::parse("score_threshold = 1.5"), Err(ConfigError::Invalid(_))));
        assert!(matches!(AppConfig::parse("min_confidence = 2"), Err(ConfigError::Invalid(_))));
        assert!(matches!(AppConfig::parse("blur_ksize = 4"), Err(ConfigError::Invalid(_))));
        assert!(matches!(AppConfig::parse("dedup_window_s = -1"), Err(ConfigError::Value { .. })));
    }
}
