use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use super::MonitorError;
use crate::temporal::Pooling;

/// File name of the rank history when the manifest does not set one.
pub const DEFAULT_HISTORY: &str = "rank_history.jsonl";

/// Describes one training run's embedding dumps.
///
/// Containers live at `root/step-<step>/layer-<layer>.rkmt` unless `paths`
/// overrides a cell with a `"<step>/<layer>"` key. Relative paths in a
/// manifest file are resolved against the directory holding the file.
///
/// ```toml
/// run_id = "c50-m8"
/// root = "dumps"
/// layers = [0, 3, 6, 9]
/// steps = [20000, 40000, 60000]
/// sample_k = 10000
/// sample_seed = 42
/// pooling = "sum"                  # optional, sum | mean
/// history = "ranks.jsonl"          # optional, default <root>/rank_history.jsonl
///
/// [hyper_params]                   # optional, free-form
/// clusters = 50
/// mask_prob = 0.08
///
/// [paths]                          # optional per-cell overrides
/// "40000/6" = "elsewhere/l6.rkmt"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub run_id: String,
    pub root: PathBuf,
    pub layers: Vec<u32>,
    pub steps: Vec<u64>,
    pub sample_k: usize,
    pub sample_seed: u64,
    #[serde(default)]
    pub pooling: Pooling,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history: Option<PathBuf>,
    #[serde(
        default,
        deserialize_with = "scalar_map",
        skip_serializing_if = "BTreeMap::is_empty"
    )]
    pub hyper_params: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub paths: BTreeMap<String, PathBuf>,
}

fn scalar_map<'de, D: Deserializer<'de>>(de: D) -> Result<BTreeMap<String, String>, D::Error> {
    let raw = BTreeMap::<String, toml::Value>::deserialize(de)?;
    raw.into_iter()
        .map(|(k, v)| {
            let s = match v {
                toml::Value::String(s) => s,
                toml::Value::Integer(i) => i.to_string(),
                toml::Value::Float(f) => f.to_string(),
                toml::Value::Boolean(b) => b.to_string(),
                other => {
                    return Err(serde::de::Error::custom(format!(
                        "hyper_params.{k} must be a scalar, got {}",
                        other.type_str()
                    )))
                }
            };
            Ok((k, s))
        })
        .collect()
}

fn strictly_increasing<T: PartialOrd>(v: &[T]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl RunManifest {
    pub fn validate(&self) -> Result<(), MonitorError> {
        let bad = |reason: &str| {
            Err(MonitorError::InvalidManifest {
                reason: reason.to_string(),
            })
        };
        if self.run_id.is_empty() {
            return bad("run_id must be nonempty");
        }
        if self.layers.is_empty() || !strictly_increasing(&self.layers) {
            return bad("layers must be nonempty and strictly increasing");
        }
        if self.steps.is_empty() || !strictly_increasing(&self.steps) {
            return bad("steps must be nonempty and strictly increasing");
        }
        if self.sample_k == 0 {
            return bad("sample_k must be at least 1");
        }
        for key in self.paths.keys() {
            let ok = key
                .split_once('/')
                .and_then(|(s, l)| Some((s.parse::<u64>().ok()?, l.parse::<u32>().ok()?)))
                .is_some();
            if !ok {
                return bad(&format!("paths key '{key}' is not of the form <step>/<layer>"));
            }
        }
        Ok(())
    }

    /// Parses a manifest from TOML text without resolving paths.
    pub fn from_toml(text: &str) -> Result<Self, MonitorError> {
        let m: Self = toml::from_str(text).map_err(|e| MonitorError::InvalidManifest {
            reason: e.to_string(),
        })?;
        m.validate()?;
        Ok(m)
    }

    /// Reads a manifest file and resolves its relative paths.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, MonitorError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| MonitorError::file(path, e))?;
        let mut m = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        m.resolve_against(base);
        Ok(m)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), MonitorError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml()).map_err(|e| MonitorError::file(path, e))
    }

    fn resolve_against(&mut self, base: &Path) {
        if self.root.is_relative() {
            self.root = base.join(&self.root);
        }
        if let Some(h) = &self.history {
            if h.is_relative() {
                self.history = Some(base.join(h));
            }
        }
        for p in self.paths.values_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn container_path(&self, step: u64, layer: u32) -> PathBuf {
        self.paths
            .get(&format!("{step}/{layer}"))
            .cloned()
            .unwrap_or_else(|| default_container_path(&self.root, step, layer))
    }

    pub fn history_path(&self) -> PathBuf {
        self.history
            .clone()
            .unwrap_or_else(|| self.root.join(DEFAULT_HISTORY))
    }
}

/// `root/step-<step>/layer-<layer>.rkmt`
pub fn default_container_path(root: &Path, step: u64, layer: u32) -> PathBuf {
    root.join(format!("step-{step}"))
        .join(format!("layer-{layer}.rkmt"))
}
