//! Experiment files: the model keys at the top level plus optional
//! `[strategy]` and `[output]` tables.
//!
//! ```toml
//! variances = [10.0, 5.0, 1.0, 0.5]
//! request_probs = [0.1, 0.3, 0.4, 0.2]
//!
//! [channel]
//! kind = "rayleigh"
//! scale = 3.0
//!
//! [strategy]
//! kind = "ltsm"
//! delay = [1, 3, 9]
//! power_db = [0.0, 10.0]
//! blocks = 100000
//! seed = 7
//!
//! [output]
//! dir = "out"
//! format = "both"
//! ```

use std::path::{Path, PathBuf};

use ltfade_core::{ChannelConfig, CompositeSource, Error, FadingChannel, Result};
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            Self::One(x) => vec![x.clone()],
            Self::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Svg,
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        matches!(self, Self::Csv | Self::Both)
    }

    pub fn svg(self) -> bool {
        matches!(self, Self::Svg | Self::Both)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySection {
    pub kind: Option<OneOrMany<String>>,
    pub delay: Option<OneOrMany<usize>>,
    pub power_db: Option<OneOrMany<f64>>,
    pub blocks: Option<usize>,
    pub calibration_blocks: Option<usize>,
    pub seed: Option<u64>,
    /// `analytic` or `sampled`.
    pub mode: Option<String>,
    pub u_max: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub variances: Option<Vec<f64>>,
    pub request_probs: Option<Vec<f64>>,
    pub channel: Option<ChannelConfig>,
    #[serde(default)]
    pub strategy: StrategySection,
    #[serde(default)]
    pub output: OutputSection,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Source from the file, or `fallback` when the file names none.
    pub fn source(&self, fallback: CompositeSource) -> Result<CompositeSource> {
        match (&self.variances, &self.request_probs) {
            (Some(v), Some(p)) => CompositeSource::new(v.clone(), p.clone()),
            (None, None) => Ok(fallback),
            _ => Err(Error::Config("variances and request_probs must be given together".into())),
        }
    }

    pub fn channel(&self, fallback: FadingChannel) -> Result<FadingChannel> {
        match &self.channel {
            Some(c) => c.build(),
            None => Ok(fallback),
        }
    }

    pub fn has_model(&self) -> bool {
        self.variances.is_some() || self.channel.is_some()
    }
}
