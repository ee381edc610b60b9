//! Flat `key = value` run configuration.
//!
//! ```text
//! # comments start with '#'
//! num_anchors = 1000
//! decoder = rotate
//! ```
//!
//! Unknown keys, repeated keys and malformed values are errors. Missing keys
//! take the [`RunConfig::default`] values.

use std::collections::HashSet;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::anchors::SelectionStrategy;
use crate::decoder::DecoderKind;
use crate::error::{Error, Result};
use crate::train::{LossConfig, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Nssal,
    Bce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TiePolicyKind {
    Canonical,
    Stochastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorStrategyKind {
    Mixed,
    Degree,
    PageRank,
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub num_anchors: usize,
    pub anchors_per_node: usize,
    pub context_size: usize,
    pub anchor_strategy: AnchorStrategyKind,
    pub tie_policy: TiePolicyKind,
    pub dim: usize,
    pub encoder_hidden: usize,
    pub encoder_layers: usize,
    pub use_distances: bool,
    pub dropout: f64,
    pub decoder: DecoderKind,
    pub loss: LossKind,
    pub margin: f64,
    pub adv_temperature: f64,
    pub num_negatives: usize,
    pub label_smoothing: f64,
    pub filter_negatives: bool,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub train_path: Option<PathBuf>,
    pub valid_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            num_anchors: 1000,
            anchors_per_node: 20,
            context_size: 15,
            anchor_strategy: AnchorStrategyKind::Mixed,
            tie_policy: TiePolicyKind::Canonical,
            dim: 200,
            encoder_hidden: 400,
            encoder_layers: 2,
            use_distances: true,
            dropout: 0.1,
            decoder: DecoderKind::RotatE,
            loss: LossKind::Nssal,
            margin: 15.0,
            adv_temperature: 1.0,
            num_negatives: 20,
            label_smoothing: 0.4,
            filter_negatives: false,
            lr: 0.0005,
            batch_size: 512,
            epochs: 400,
            seed: 0,
            train_path: None,
            valid_path: None,
            test_path: None,
        }
    }
}

fn value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T>
where
    T::Err: Display,
{
    raw.parse().map_err(|e| Error::Parse {
        line,
        message: format!("bad value {raw:?} for {key}: {e}"),
    })
}

fn choice<T: Copy>(line: usize, key: &str, raw: &str, options: &[(&str, T)]) -> Result<T> {
    options
        .iter()
        .find(|(name, _)| *name == raw)
        .map(|&(_, v)| v)
        .ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            Error::Parse {
                line,
                message: format!("{key} must be one of {}, got {raw:?}", names.join("|")),
            }
        })
}

impl RunConfig {
    /// Parses config text. Relative paths are resolved against `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut c = RunConfig::default();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, val) = content.split_once('=').ok_or_else(|| Error::Parse {
                line,
                message: format!("expected key = value, got {content:?}"),
            })?;
            let (key, val) = (key.trim(), val.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate key {key}"),
                });
            }
            let path = |v: &str| match base {
                Some(b) if Path::new(v).is_relative() => b.join(v),
                _ => PathBuf::from(v),
            };
            match key {
                "num_anchors" => c.num_anchors = value(line, key, val)?,
                "anchors_per_node" => c.anchors_per_node = value(line, key, val)?,
                "context_size" => c.context_size = value(line, key, val)?,
                "anchor_strategy" => {
                    c.anchor_strategy = choice(
                        line,
                        key,
                        val,
                        &[
                            ("mixed", AnchorStrategyKind::Mixed),
                            ("degree", AnchorStrategyKind::Degree),
                            ("pagerank", AnchorStrategyKind::PageRank),
                            ("random", AnchorStrategyKind::Random),
                        ],
                    )?
                }
                "tie_policy" => {
                    c.tie_policy = choice(
                        line,
                        key,
                        val,
                        &[
                            ("canonical", TiePolicyKind::Canonical),
                            ("stochastic", TiePolicyKind::Stochastic),
                        ],
                    )?
                }
                "dim" => c.dim = value(line, key, val)?,
                "encoder_hidden" => c.encoder_hidden = value(line, key, val)?,
                "encoder_layers" => c.encoder_layers = value(line, key, val)?,
                "use_distances" => c.use_distances = value(line, key, val)?,
                "dropout" => c.dropout = value(line, key, val)?,
                "decoder" => c.decoder = value(line, key, val)?,
                "loss" => {
                    c.loss = choice(line, key, val, &[("nssal", LossKind::Nssal), ("bce", LossKind::Bce)])?
                }
                "margin" => c.margin = value(line, key, val)?,
                "adv_temperature" => c.adv_temperature = value(line, key, val)?,
                "num_negatives" => c.num_negatives = value(line, key, val)?,
                "label_smoothing" => c.label_smoothing = value(line, key, val)?,
                "filter_negatives" => c.filter_negatives = value(line, key, val)?,
                "lr" => c.lr = value(line, key, val)?,
                "batch_size" => c.batch_size = value(line, key, val)?,
                "epochs" => c.epochs = value(line, key, val)?,
                "seed" => c.seed = value(line, key, val)?,
                "train_path" => c.train_path = Some(path(val)),
                "valid_path" => c.valid_path = Some(path(val)),
                "test_path" => c.test_path = Some(path(val)),
                other => {
                    return Err(Error::Parse {
                        line,
                        message: format!("unknown key {other}"),
                    })
                }
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.parent())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::invalid(m.to_string()));
        if self.dim == 0 || self.encoder_layers == 0 {
            return fail("dim and encoder_layers must be positive");
        }
        if self.encoder_layers > 1 && self.encoder_hidden == 0 {
            return fail("encoder_hidden must be positive");
        }
        if self.anchors_per_node + self.context_size == 0 {
            return fail("anchors_per_node + context_size must be positive");
        }
        if self.anchors_per_node > self.num_anchors {
            return fail("anchors_per_node cannot exceed num_anchors");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail("dropout must be in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.label_smoothing) {
            return fail("label_smoothing must be in [0, 1]");
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return fail("lr must be a non-negative number");
        }
        if self.batch_size == 0 || self.num_negatives == 0 {
            return fail("batch_size and num_negatives must be positive");
        }
        if !self.margin.is_finite() || !self.adv_temperature.is_finite() {
            return fail("margin and adv_temperature must be finite");
        }
        self.decoder.check_dim(self.dim)
    }

    pub fn selection_strategy(&self) -> SelectionStrategy {
        match self.anchor_strategy {
            AnchorStrategyKind::Mixed => SelectionStrategy::default_mixed(),
            AnchorStrategyKind::Degree => SelectionStrategy::TopDegree,
            AnchorStrategyKind::PageRank => SelectionStrategy::TopPageRank(Default::default()),
            AnchorStrategyKind::Random => SelectionStrategy::Random,
        }
    }

    pub fn loss_config(&self) -> LossConfig {
        match self.loss {
            LossKind::Nssal => LossConfig::Nssal {
                margin: self.margin,
                temperature: self.adv_temperature,
            },
            LossKind::Bce => LossConfig::Bce {
                label_smoothing: self.label_smoothing,
            },
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            num_negatives: self.num_negatives,
            loss: self.loss_config(),
            dropout: self.dropout,
            seed,
            filter_negatives: self.filter_negatives,
        }
    }
}
