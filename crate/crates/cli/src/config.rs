//! `key = value` run configuration with per-key validation.
//!
//! Lines are `key = value`; `#` starts a comment. Every key has a default,
//! an empty value is reported as missing, and unknown keys are rejected.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ecap_core::harness::{TrainConfig, Variant};
use ecap_core::pseudo_label::EmaConfig;
use thiserror::Error;

pub const OUT_DIR_ENV: &str = "ECAP_OUT_DIR";

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown key {key:?}")]
    UnknownKey { key: String },
    #[error("missing value for {key:?}")]
    Missing { key: String },
    #[error("invalid value for {key:?}: {message}")]
    Invalid { key: String, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub variant: Variant,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Augmented-sample PNG triplets written by `run`.
    pub samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            variant: Variant::Ecap,
            seed: 0,
            out_dir: PathBuf::from("ecap-out"),
            samples: 4,
        }
    }
}

type Setter = fn(&mut RunConfig, &str) -> Result<(), String>;
type Getter = fn(&RunConfig) -> String;

struct Key {
    name: &'static str,
    help: &'static str,
    get: Getter,
    set: Setter,
}

fn num<T: FromStr>(v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse {v:?}"))
}

fn unit(v: &str, lo_open: bool, hi_open: bool) -> Result<f64, String> {
    let x: f64 = num(v)?;
    let ok = x.is_finite()
        && if lo_open { x > 0.0 } else { x >= 0.0 }
        && if hi_open { x < 1.0 } else { x <= 1.0 };
    let range = format!(
        "{}0, 1{}",
        if lo_open { "(" } else { "[" },
        if hi_open { ")" } else { "]" }
    );
    ok.then_some(x).ok_or(format!("{x} outside valid range {range}"))
}

fn at_least(v: &str, min: usize) -> Result<usize, String> {
    let x: usize = num(v)?;
    (x >= min).then_some(x).ok_or(format!("{x} outside valid range >= {min}"))
}

fn positive(v: &str) -> Result<f64, String> {
    let x: f64 = num(v)?;
    (x > 0.0 && x.is_finite()).then_some(x).ok_or(format!("{x} outside valid range > 0"))
}

fn non_negative(v: &str) -> Result<f64, String> {
    let x: f64 = num(v)?;
    (x >= 0.0 && x.is_finite()).then_some(x).ok_or(format!("{x} outside valid range >= 0"))
}

fn flag(v: &str) -> Result<bool, String> {
    match v {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        _ => Err(format!("expected on/off, got {v:?}")),
    }
}

fn on_off(b: bool) -> String {
    if b { "on" } else { "off" }.into()
}

fn class_list(v: &str) -> Result<Vec<usize>, String> {
    if v == "none" {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| num(s.trim())).collect()
}

const KEYS: &[Key] = &[
    Key { name: "variant", help: "baseline | ecap | denoise | oracle", get: |c| c.variant.to_string(), set: |c, v| { c.variant = v.parse().map_err(|e: ecap_core::EcapError| e.to_string())?; Ok(()) } },
    Key { name: "seed", help: "data and training seed", get: |c| c.seed.to_string(), set: |c, v| { c.seed = num(v)?; Ok(()) } },
    Key { name: "iterations", help: ">= 1", get: |c| c.train.iterations.to_string(), set: |c, v| { c.train.iterations = at_least(v, 1)?; Ok(()) } },
    Key { name: "out_dir", help: "artifact directory", get: |c| c.out_dir.display().to_string(), set: |c, v| { c.out_dir = PathBuf::from(v); Ok(()) } },
    Key { name: "samples", help: "augmented-sample PNG triplets to export", get: |c| c.samples.to_string(), set: |c, v| { c.samples = at_least(v, 0)?; Ok(()) } },
    Key { name: "n0", help: "maximum gate probability, [0, 1]", get: |c| c.train.sampler.n0.to_string(), set: |c, v| { c.train.sampler.n0 = unit(v, false, false)?; Ok(()) } },
    Key { name: "beta", help: "MEC at which the gate is half open, (0, 1)", get: |c| c.train.sampler.beta.to_string(), set: |c, v| { c.train.sampler.beta = unit(v, true, true)?; Ok(()) } },
    Key { name: "gamma", help: "gate temperature, > 0", get: |c| c.train.sampler.gamma.to_string(), set: |c, v| { c.train.sampler.gamma = positive(v)?; Ok(()) } },
    Key { name: "n_top", help: "bank entries eligible for sampling, >= 1", get: |c| c.train.sampler.n_top.to_string(), set: |c, v| { c.train.sampler.n_top = at_least(v, 1)?; Ok(()) } },
    Key { name: "mec_excludes_disabled", help: "on | off", get: |c| on_off(c.train.sampler.mec_excludes_disabled), set: |c, v| { c.train.sampler.mec_excludes_disabled = flag(v)?; Ok(()) } },
    Key { name: "disabled_classes", help: "comma-separated class ids or none", get: |c| if c.train.disabled_classes.is_empty() { "none".into() } else { c.train.disabled_classes.iter().map(usize::to_string).collect::<Vec<_>>().join(",") }, set: |c, v| { c.train.disabled_classes = class_list(v)?; Ok(()) } },
    Key { name: "transforms", help: "random scale/flip/translate, on | off", get: |c| on_off(c.train.transforms.enabled), set: |c, v| { c.train.transforms.enabled = flag(v)?; Ok(()) } },
    Key { name: "scale_min", help: "(0, 1]", get: |c| c.train.transforms.scale_min.to_string(), set: |c, v| { c.train.transforms.scale_min = unit(v, true, false)?; Ok(()) } },
    Key { name: "scale_max", help: "(0, 1]", get: |c| c.train.transforms.scale_max.to_string(), set: |c, v| { c.train.transforms.scale_max = unit(v, true, false)?; Ok(()) } },
    Key { name: "tau", help: "pseudo-label confidence threshold, (0, 1)", get: |c| c.train.tau.to_string(), set: |c, v| { c.train.tau = unit(v, true, true)?; Ok(()) } },
    Key { name: "ema_decay", help: "[0, 1)", get: |c| c.train.ema.decay().to_string(), set: |c, v| { c.train.ema = EmaConfig::new(unit(v, false, true)?).map_err(|e| e.to_string())?; Ok(()) } },
    Key { name: "ema_warmup", help: "on | off", get: |c| on_off(c.train.ema_warmup), set: |c, v| { c.train.ema_warmup = flag(v)?; Ok(()) } },
    Key { name: "lr", help: ">= 0", get: |c| c.train.lr.to_string(), set: |c, v| { c.train.lr = non_negative(v)?; Ok(()) } },
    Key { name: "momentum", help: "[0, 1)", get: |c| c.train.momentum.to_string(), set: |c, v| { c.train.momentum = unit(v, false, true)?; Ok(()) } },
    Key { name: "hidden", help: "classifier hidden units, >= 1", get: |c| c.train.hidden.to_string(), set: |c, v| { c.train.hidden = at_least(v, 1)?; Ok(()) } },
    Key { name: "metric_window", help: "final iterations pooled for noise metrics, >= 1", get: |c| c.train.metric_window.to_string(), set: |c, v| { c.train.metric_window = at_least(v, 1)?; Ok(()) } },
    Key { name: "split_window", help: "final iterations pooled for the bank/image split, >= 1", get: |c| c.train.split_window.to_string(), set: |c, v| { c.train.split_window = at_least(v, 1)?; Ok(()) } },
    Key { name: "height", help: "scene height, >= 4", get: |c| c.train.scene.height.to_string(), set: |c, v| { c.train.scene.height = at_least(v, 4)?; Ok(()) } },
    Key { name: "width", help: "scene width, >= 4", get: |c| c.train.scene.width.to_string(), set: |c, v| { c.train.scene.width = at_least(v, 4)?; Ok(()) } },
    Key { name: "num_classes", help: "2..=255", get: |c| c.train.scene.num_classes.to_string(), set: |c, v| {
        let n = at_least(v, 2)?;
        if n > 255 { return Err(format!("{n} outside valid range 2..=255")); }
        c.train.scene.num_classes = n;
        c.train.scene.palette = ecap_core::harness::scene::default_palette(n);
        Ok(())
    } },
    Key { name: "shapes_min", help: "things per scene, lower bound", get: |c| c.train.scene.shapes_min.to_string(), set: |c, v| { c.train.scene.shapes_min = at_least(v, 0)?; Ok(()) } },
    Key { name: "shapes_max", help: "things per scene, upper bound", get: |c| c.train.scene.shapes_max.to_string(), set: |c, v| { c.train.scene.shapes_max = at_least(v, 0)?; Ok(()) } },
    Key { name: "color_jitter", help: ">= 0", get: |c| c.train.scene.color_jitter.to_string(), set: |c, v| { c.train.scene.color_jitter = non_negative(v)? as f32; Ok(()) } },
    Key { name: "pixel_noise", help: ">= 0", get: |c| c.train.scene.pixel_noise.to_string(), set: |c, v| { c.train.scene.pixel_noise = non_negative(v)? as f32; Ok(()) } },
    Key { name: "domain_shift", help: "target colour shift, on | off", get: |c| on_off(!c.train.scene.shift.is_identity()), set: |c, v| {
        c.train.scene.shift = if flag(v)? { Default::default() } else { ecap_core::harness::DomainShift::none() };
        Ok(())
    } },
    Key { name: "n_source", help: "source scenes, >= 1", get: |c| c.train.scene.n_source.to_string(), set: |c, v| { c.train.scene.n_source = at_least(v, 1)?; Ok(()) } },
    Key { name: "n_target", help: "target scenes incl. held-out, >= 2", get: |c| c.train.scene.n_target.to_string(), set: |c, v| { c.train.scene.n_target = at_least(v, 2)?; Ok(()) } },
    Key { name: "eval_fraction", help: "held-out share of target scenes, (0, 1)", get: |c| c.train.scene.eval_fraction.to_string(), set: |c, v| { c.train.scene.eval_fraction = unit(v, true, true)?; Ok(()) } },
];

fn lookup(key: &str) -> Result<&'static Key, ConfigError> {
    KEYS.iter()
        .find(|k| k.name == key)
        .ok_or_else(|| ConfigError::UnknownKey { key: key.into() })
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let entry = lookup(key)?;
        let value = value.trim();
        if value.is_empty() {
            return Err(ConfigError::Missing { key: key.into() });
        }
        (entry.set)(self, value).map_err(|message| ConfigError::Invalid { key: key.into(), message })
    }

    pub fn get(&self, key: &str) -> Result<String, ConfigError> {
        Ok((lookup(key)?.get)(self))
    }

    /// Applies `key = value` lines on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                text: raw.into(),
            })?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.into(),
            message: e.to_string(),
        })?;
        self.apply_text(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Cross-key checks; per-key ranges are enforced by [`RunConfig::set`].
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |key: &str, message: String| {
            Err(ConfigError::Invalid { key: key.into(), message })
        };
        let t = &self.train;
        if t.transforms.scale_min > t.transforms.scale_max {
            return invalid("scale_min", format!("{} exceeds scale_max {}", t.transforms.scale_min, t.transforms.scale_max));
        }
        if t.scene.shapes_min > t.scene.shapes_max {
            return invalid("shapes_min", format!("{} exceeds shapes_max {}", t.scene.shapes_min, t.scene.shapes_max));
        }
        if let Some(c) = t.disabled_classes.iter().find(|&&c| c >= t.scene.num_classes) {
            return invalid("disabled_classes", format!("class {c} outside 0..{}", t.scene.num_classes));
        }
        let eval = (t.scene.n_target as f64 * t.scene.eval_fraction).round() as usize;
        if eval == 0 || eval >= t.scene.n_target {
            return invalid("eval_fraction", format!("leaves no training or no held-out scenes out of {}", t.scene.n_target));
        }
        t.validate().map_err(|e| ConfigError::Invalid { key: "config".into(), message: e.to_string() })
    }

    /// Every key in canonical order; parses back to an equal config.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        for k in KEYS {
            let _ = writeln!(s, "{} = {}", k.name, (k.get)(self));
        }
        s
    }
}

/// Key reference with defaults, for `--help`.
pub fn key_help() -> String {
    let d = RunConfig::default();
    let mut s = String::from("Config keys (default in brackets):\n");
    for k in KEYS {
        let _ = writeln!(s, "  {:<22} {} [{}]", k.name, k.help, (k.get)(&d));
    }
    let _ = write!(s, "The default out_dir is taken from ${OUT_DIR_ENV} when set.");
    s
}
