//! TOML description of a source and channel.
//!
//! ```toml
//! variances = [10.0, 5.0, 1.0, 0.5]
//! request_probs = [0.1, 0.3, 0.4, 0.2]
//!
//! [channel]
//! kind = "rayleigh"
//! scale = 3.0
//! ```
//!
//! A discrete channel lists `[magnitude, probability]` pairs instead:
//! `kind = "discrete"`, `states = [[3.1623, 0.1], [2.2361, 0.3], ...]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CompositeSource, FadingChannel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ChannelConfig {
    Discrete { states: Vec<[f64; 2]> },
    Rayleigh { scale: f64 },
}

impl ChannelConfig {
    pub fn build(&self) -> Result<FadingChannel> {
        match self {
            Self::Discrete { states } => {
                FadingChannel::discrete(states.iter().map(|s| (s[0], s[1])).collect())
            }
            Self::Rayleigh { scale } => FadingChannel::rayleigh(*scale),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub variances: Vec<f64>,
    pub request_probs: Vec<f64>,
    pub channel: ChannelConfig,
}

impl ModelConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn build(&self) -> Result<(CompositeSource, FadingChannel)> {
        let source = CompositeSource::new(self.variances.clone(), self.request_probs.clone())?;
        Ok((source, self.channel.build()?))
    }
}
