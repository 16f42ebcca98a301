//! Shared fixtures for the benchmarks.

use ltfade_core::{CompositeSource, FadingChannel, StrategyConfig, StrategyKind};

pub fn source() -> CompositeSource {
    CompositeSource::reference()
}

pub fn channels() -> [(&'static str, FadingChannel); 2] {
    [("discrete", FadingChannel::reference_discrete()), ("rayleigh", FadingChannel::reference_rayleigh())]
}

/// A strategy with a fixed multiplier, so benches skip calibration.
pub fn strategy(kind: StrategyKind, delay: usize, channel: &FadingChannel) -> StrategyConfig {
    StrategyConfig::new(kind, delay, 10.0, &source(), channel)
        .and_then(|c| c.with_mu(4.0))
        .expect("fixture is valid")
}
