use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use magseq::{PhysicsParams, TrainConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Default locations used when a command is given no explicit path.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub dataset: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

/// Everything one invocation needs, merged from defaults, the config file and flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub physics: PhysicsParams,
    pub train: TrainConfig,
    pub paths: Paths,
    pub desk_scale: bool,
    /// True when the config file set `physics` itself.
    #[serde(skip)]
    pub physics_explicit: bool,
}

const KEYS: [&str; 4] = ["physics", "train", "paths", "desk_scale"];

impl RunConfig {
    pub fn defaults(desk_scale: bool) -> Self {
        RunConfig {
            physics: PhysicsParams::reference(),
            train: if desk_scale {
                TrainConfig::desk_scale()
            } else {
                TrainConfig::full_scale()
            },
            paths: Paths::default(),
            desk_scale,
            physics_explicit: false,
        }
    }

    /// Builds the config. `train` values in the file override the full or
    /// desk defaults field by field.
    pub fn load(path: Option<&Path>, desk_flag: bool) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::defaults(desk_flag));
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let doc: Value =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        Self::from_value(doc, desk_flag).with_context(|| format!("config {}", path.display()))
    }

    pub fn from_value(doc: Value, desk_flag: bool) -> Result<Self> {
        let Value::Object(map) = doc else {
            bail!("config must be a JSON object");
        };
        if let Some(key) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            bail!("unknown config key `{key}`");
        }
        let desk_scale = desk_flag
            || match map.get("desk_scale") {
                None => false,
                Some(v) => v.as_bool().context("`desk_scale` must be a boolean")?,
            };
        let mut cfg = Self::defaults(desk_scale);

        if let Some(physics) = map.get("physics") {
            cfg.physics = serde_json::from_value(physics.clone()).context("field `physics`")?;
            cfg.physics_explicit = true;
        }
        if let Some(train) = map.get("train") {
            let Value::Object(overrides) = train else {
                bail!("`train` must be an object");
            };
            let mut merged = serde_json::to_value(&cfg.train)?;
            let base = merged
                .as_object_mut()
                .expect("TrainConfig serializes to an object");
            for (k, v) in overrides {
                if !base.contains_key(k) {
                    bail!("unknown train key `{k}`");
                }
                base.insert(k.clone(), v.clone());
            }
            cfg.train = serde_json::from_value(merged).context("field `train`")?;
        }
        if let Some(paths) = map.get("paths") {
            cfg.paths = serde_json::from_value(paths.clone()).context("field `paths`")?;
        }
        cfg.physics.validate()?;
        Ok(cfg)
    }
}
