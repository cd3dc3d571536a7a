//! Flat `key = value` configuration with `[section]` headers.
//!
//! Every key has a home section and a name that is unique across sections,
//! so it can be written either bare (`seed`) or qualified (`run.seed`), in a
//! file or as a `--key value` flag. Flags override the file.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mlgw::eval::{Mode, ProtocolConfig};
use mlgw::graph::{LoadOptions, Regime};
use mlgw::nn::OptimizerKind;
use mlgw::synth::PlantedConfig;
use mlgw::{HyperParams, Variant};

use crate::CliError;

/// `(section, key, default)`; an empty default means "unset".
pub const KEYS: &[(&str, &str, &str)] = &[
    ("data", "nodes", ""),
    ("data", "edges", ""),
    ("data", "symmetrize", "false"),
    ("data", "normalize", "true"),
    ("data", "edge_dim", ""),
    ("model", "variant", "reg"),
    ("model", "walk_length", "10"),
    ("model", "walks_per_node", "3"),
    ("model", "gamma", "0.9"),
    ("model", "alpha", "1"),
    ("model", "beta", "0.1"),
    ("model", "learning_rate", "0.01"),
    ("model", "hidden_dim", "128"),
    ("model", "epochs", "20"),
    ("model", "batch_size", "32"),
    ("model", "optimizer", "adam"),
    ("model", "reward_baseline", "false"),
    ("run", "seed", "0"),
    ("run", "workers", "0"),
    ("run", "out", "mlgw-out"),
    ("run", "checkpoint_every", "0"),
    ("run", "log_wall_time", "false"),
    ("eval", "mode", "trans"),
    ("eval", "regime", "tr4"),
    ("eval", "folds", "5"),
    ("eval", "fold_seed", "0"),
    ("eval", "max_configurations", ""),
    ("eval", "eval_nodes", "labeled"),
    ("eval", "baseline", "false"),
    ("analysis", "include_start", "false"),
    ("analysis", "normalize_heatmap", "true"),
    ("synth", "node_count", "500"),
    ("synth", "label_count", "4"),
    ("synth", "feature_dim", "300"),
    ("synth", "edge_feature_dim", "8"),
    ("synth", "edges_per_node", "12"),
    ("synth", "homophily", "0.95"),
    ("synth", "noise", "6"),
    ("synth", "extra_label_prob", "0.2"),
    ("synth", "cooccurrence", ""),
    ("synth", "labeled_fraction", "0.2"),
];

fn lookup(name: &str) -> Option<&'static str> {
    let bare = match name.split_once('.') {
        Some((section, key)) => KEYS
            .iter()
            .find(|(s, k, _)| *s == section && *k == key)
            .map(|(_, k, _)| *k),
        None => KEYS.iter().find(|(_, k, _)| *k == name).map(|(_, k, _)| *k),
    };
    bare.or_else(|| {
        let dashed = name.replace('-', "_");
        (dashed != name).then(|| lookup(&dashed)).flatten()
    })
}

/// Whether `name` (bare, qualified, or with dashes) is a configuration key.
pub fn is_key(name: &str) -> bool {
    lookup(name).is_some()
}

/// Resolved configuration: every key mapped to its raw string value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    values: BTreeMap<&'static str, String>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            values: KEYS.iter().map(|(_, k, d)| (*k, d.to_string())).collect(),
        }
    }
}

impl Config {
    /// Parses a configuration file on top of the defaults. Relative data
    /// paths are resolved against the file's directory.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let mut cfg =
            Self::parse(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for key in ["nodes", "edges"] {
            let v = &cfg.values[key];
            if !v.is_empty() && Path::new(v).is_relative() {
                let joined = base.join(v).display().to_string();
                cfg.values.insert(key, joined);
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut cfg = Self::default();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`", i + 1))?;
            let k = k.trim();
            let name = if section.is_empty() || k.contains('.') {
                k.to_string()
            } else {
                format!("{section}.{k}")
            };
            cfg.set(&name, v.trim())
                .map_err(|e| format!("line {}: {e}", i + 1))?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, name: &str, value: &str) -> Result<(), String> {
        let key = lookup(name).ok_or_else(|| format!("unknown configuration key `{name}`"))?;
        self.values.insert(key, value.to_string());
        Ok(())
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map_or("", String::as_str)
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        let raw = self.raw(key);
        raw.parse()
            .map_err(|e| CliError::Input(format!("invalid value `{raw}` for `{key}`: {e}")))
    }

    fn optional<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        if self.raw(key).is_empty() {
            Ok(None)
        } else {
            self.get(key).map(Some)
        }
    }

    fn path(&self, key: &str) -> Result<PathBuf, CliError> {
        match self.raw(key) {
            "" => Err(CliError::Input(format!("`{key}` is not set"))),
            p => Ok(PathBuf::from(p)),
        }
    }

    pub fn graph_paths(&self) -> Result<(PathBuf, PathBuf), CliError> {
        Ok((self.path("nodes")?, self.path("edges")?))
    }

    pub fn load_options(&self) -> Result<LoadOptions, CliError> {
        Ok(LoadOptions {
            symmetrize: self.get("symmetrize")?,
            normalize: self.get("normalize")?,
            edge_dim: self.optional("edge_dim")?,
        })
    }

    pub fn hyper_params(&self) -> Result<HyperParams, CliError> {
        let optimizer = match self.raw("optimizer").to_ascii_lowercase().as_str() {
            "adam" => OptimizerKind::Adam,
            "sgd" => OptimizerKind::Sgd,
            other => {
                return Err(CliError::Input(format!(
                    "invalid value `{other}` for `optimizer`: expected adam or sgd"
                )))
            }
        };
        let hp = HyperParams {
            walk_length: self.get("walk_length")?,
            walks_per_node: self.get("walks_per_node")?,
            gamma: self.get("gamma")?,
            alpha: self.get("alpha")?,
            beta: self.get("beta")?,
            learning_rate: self.get("learning_rate")?,
            hidden_dim: self.get("hidden_dim")?,
            epochs: self.get("epochs")?,
            batch_size: self.get("batch_size")?,
            variant: self.get::<Variant>("variant")?,
            seed: self.get("seed")?,
            optimizer,
            reward_baseline: self.get("reward_baseline")?,
        };
        hp.validate().map_err(|e| CliError::Input(e.to_string()))?;
        Ok(hp)
    }

    pub fn protocol(&self) -> Result<ProtocolConfig, CliError> {
        Ok(ProtocolConfig {
            mode: self.get::<Mode>("mode")?,
            regime: self.get::<Regime>("regime")?,
            folds: self.get("folds")?,
            fold_seed: self.get("fold_seed")?,
            max_configurations: self.optional("max_configurations")?,
        })
    }

    pub fn planted(&self) -> Result<PlantedConfig, CliError> {
        Ok(PlantedConfig {
            nodes: self.get("node_count")?,
            labels: self.get("label_count")?,
            feature_dim: self.get("feature_dim")?,
            edge_dim: self.get("edge_feature_dim")?,
            edges_per_node: self.get("edges_per_node")?,
            homophily: self.get("homophily")?,
            noise: self.get("noise")?,
            extra_label_prob: self.get("extra_label_prob")?,
            cooccurrence: self.optional("cooccurrence")?,
            labeled_fraction: self.get("labeled_fraction")?,
        })
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.get("seed")
    }

    pub fn workers(&self) -> Result<usize, CliError> {
        self.get("workers")
    }

    pub fn out_dir(&self) -> Result<PathBuf, CliError> {
        self.path("out")
    }

    pub fn checkpoint_every(&self) -> Result<usize, CliError> {
        self.get("checkpoint_every")
    }

    pub fn flag(&self, key: &str) -> Result<bool, CliError> {
        self.get(key)
    }

    /// Every key with its section and value, in declaration order.
    pub fn entries(&self) -> Vec<(&'static str, &'static str, &str)> {
        KEYS.iter().map(|(s, k, _)| (*s, *k, self.raw(k))).collect()
    }

    /// The configuration as a file `parse` reads back unchanged.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        let mut section = "";
        for (s, k, v) in self.entries() {
            if s != section {
                if !out.is_empty() {
                    out.push('\n');
                }
                out.push_str(&format!("[{s}]\n"));
                section = s;
            }
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}
