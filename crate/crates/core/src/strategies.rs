//! Buffered linear transmission with hard (LTHM) and soft (LTSM) matching.
//!
//! Each block stores `d̄` fresh measurements and then spends `d̄` channel
//! accesses on them. The channel magnitude picks a set `m` of the partition;
//! a stored parameter-`m` measurement is sent if there is one. Otherwise LTHM
//! stays silent and LTSM sends the stored parameter whose set midpoint is
//! nearest to `|h|`. Anything still buffered at the end of the block expires.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{build_partition, classify, ChannelPartition, CompositeSource, FadingChannel};
use crate::rng::{BlockStreams, Purpose};
use crate::waterfill::{
    csi_distortion, csi_gain, csi_power, lthm_power_rule, mmse_gain, solve_multiplier,
    transmitted_distortion, Monotonicity,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrategyKind {
    Lthm,
    Ltsm,
}

impl StrategyKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Lthm => "lthm",
            Self::Ltsm => "ltsm",
        }
    }
}

/// Buffer depth `d̄ = ⌊(d+1)/2⌋`, so a measurement waits at most `2d̄ − 1 ≤ d` slots.
pub fn buffer_depth(delay: usize) -> usize {
    delay.div_ceil(2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub delay: usize,
    pub depth: usize,
    /// Average power target.
    pub power: f64,
    /// Power-rule multiplier; zero until calibrated.
    pub mu: f64,
    pub partition: ChannelPartition,
}

impl StrategyConfig {
    pub fn new(
        kind: StrategyKind,
        delay: usize,
        power: f64,
        source: &CompositeSource,
        channel: &FadingChannel,
    ) -> Result<Self> {
        if delay == 0 {
            return Err(Error::Contract("delay must be at least 1".into()));
        }
        if !(power.is_finite() && power >= 0.0) {
            return Err(Error::Contract(format!("average power {power} must be ≥ 0")));
        }
        Ok(Self {
            kind,
            delay,
            depth: buffer_depth(delay),
            power,
            mu: 0.0,
            partition: build_partition(source, channel),
        })
    }

    pub fn with_mu(mut self, mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(Error::Contract(format!("multiplier {mu} must be ≥ 0")));
        }
        self.mu = mu;
        Ok(self)
    }
}

/// Transmission buffer: stored measurement values grouped by parameter.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BufferState {
    stored: Vec<Vec<f64>>,
}

impl BufferState {
    pub fn new(parameters: usize) -> Self {
        Self { stored: vec![Vec::new(); parameters] }
    }

    /// Buffer holding `counts[m]` zero-valued measurements of each parameter.
    pub fn with_counts(counts: &[usize]) -> Self {
        Self { stored: counts.iter().map(|&b| vec![0.0; b]).collect() }
    }

    pub fn push(&mut self, param: usize, value: f64) {
        self.stored[param].push(value);
    }

    pub fn count(&self, param: usize) -> usize {
        self.stored[param].len()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.stored.iter().map(Vec::len).collect()
    }

    pub fn total(&self) -> usize {
        self.stored.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.stored.iter().all(Vec::is_empty)
    }

    /// Removes one parameter-`m` measurement chosen uniformly at random.
    pub fn take<R: Rng + ?Sized>(&mut self, param: usize, rng: &mut R) -> Option<f64> {
        let values = &mut self.stored[param];
        match values.len() {
            0 => None,
            1 => values.pop(),
            n => Some(values.swap_remove(rng.random_range(0..n))),
        }
    }

    /// Empties the buffer, yielding `(parameter, value)` in parameter order.
    pub fn drain(&mut self) -> Vec<(usize, f64)> {
        let mut out = Vec::with_capacity(self.total());
        for (m, values) in self.stored.iter_mut().enumerate() {
            out.extend(values.drain(..).map(|v| (m, v)));
        }
        out
    }
}

/// Parameter to serve when the channel lies in `set`, given buffer counts.
pub fn select_parameter(
    kind: StrategyKind,
    counts: &[usize],
    set: usize,
    magnitude: f64,
    midpoints: &[f64],
) -> Option<usize> {
    if counts[set] > 0 {
        return Some(set);
    }
    match kind {
        StrategyKind::Lthm => None,
        StrategyKind::Ltsm => {
            let mut best: Option<(usize, f64)> = None;
            for (k, &b) in counts.iter().enumerate() {
                if b == 0 {
                    continue;
                }
                let dist = (magnitude - midpoints[k]).abs();
                if best.is_none_or(|(_, d)| dist < d) {
                    best = Some((k, dist));
                }
            }
            best.map(|(k, _)| k)
        }
    }
}

/// Picks and removes the measurement to send in the current slot.
pub fn select_measurement<R: Rng + ?Sized>(
    config: &StrategyConfig,
    buffer: &mut BufferState,
    set: usize,
    magnitude: f64,
    rng: &mut R,
) -> Option<(usize, f64)> {
    let param =
        select_parameter(config.kind, &buffer.counts(), set, magnitude, config.partition.midpoints())?;
    buffer.take(param, rng).map(|v| (param, v))
}

/// How squared error is accounted for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum EstimatorMode {
    /// Conditional MMSE given request and channel.
    #[default]
    Analytic,
    /// Draws receiver noise and decodes with the linear MMSE gain.
    NoiseSampled,
}

/// One channel access.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotRecord {
    pub magnitude: f64,
    pub set: usize,
    pub selected: Option<usize>,
    pub power: f64,
    /// Conditional distortion of the sent measurement (`NaN` for silent slots).
    pub distortion: f64,
}

/// Counters of one block. Requests per parameter are `Z̄ₘ` and channel visits
/// per set are `Ẑₘ`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BlockSimResult {
    pub requested: Vec<u64>,
    pub transmitted: Vec<u64>,
    pub dropped: Vec<u64>,
    pub channel_visits: Vec<u64>,
    pub power: Vec<f64>,
    pub sq_error: Vec<f64>,
    pub slots: u64,
}

impl BlockSimResult {
    fn new(parameters: usize) -> Self {
        Self {
            requested: vec![0; parameters],
            transmitted: vec![0; parameters],
            dropped: vec![0; parameters],
            channel_visits: vec![0; parameters],
            power: vec![0.0; parameters],
            sq_error: vec![0.0; parameters],
            slots: 0,
        }
    }

    pub fn measurements(&self) -> u64 {
        self.requested.iter().sum()
    }

    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }

    pub fn total_sq_error(&self) -> f64 {
        self.sq_error.iter().sum()
    }
}

fn sampled_error<R: Rng + ?Sized>(
    value: f64,
    gain: f64,
    magnitude: f64,
    variance: f64,
    noise: &mut R,
) -> f64 {
    let z: f64 = noise.sample(StandardNormal);
    let y = magnitude * gain * value + z;
    let estimate = mmse_gain(gain, magnitude, variance) * y;
    (value - estimate).powi(2)
}

/// Simulates one block of `d̄` measurements and `d̄` channel accesses.
pub fn run_block(
    config: &StrategyConfig,
    source: &CompositeSource,
    channel: &FadingChannel,
    streams: &mut BlockStreams,
    mode: EstimatorMode,
    mut trace: Option<&mut Vec<SlotRecord>>,
) -> BlockSimResult {
    let j = source.len();
    let mut result = BlockSimResult::new(j);
    let mut buffer = BufferState::new(j);
    for _ in 0..config.depth {
        let m = source.sample_request(&mut streams.source);
        let s = source.sample_measurement(m, &mut streams.source);
        buffer.push(m, s);
        result.requested[m] += 1;
    }
    for _ in 0..config.depth {
        let h = channel.sample(&mut streams.channel);
        let set = classify(&config.partition, h, &mut streams.select);
        result.channel_visits[set] += 1;
        result.slots += 1;
        let picked = select_measurement(config, &mut buffer, set, h, &mut streams.select);
        let mut record = SlotRecord { magnitude: h, set, selected: None, power: 0.0, distortion: f64::NAN };
        if let Some((m, s)) = picked {
            let var = source.variance(m);
            let p = lthm_power_rule(config.mu, h, source.std_dev(m));
            let expected = transmitted_distortion(p, h, var);
            result.transmitted[m] += 1;
            result.power[m] += p;
            result.sq_error[m] += match mode {
                EstimatorMode::Analytic => expected,
                EstimatorMode::NoiseSampled => sampled_error(s, (p / var).sqrt(), h, var, &mut streams.noise),
            };
            record = SlotRecord { selected: Some(m), power: p, distortion: expected, ..record };
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(record);
        }
    }
    for (m, s) in buffer.drain() {
        result.dropped[m] += 1;
        result.sq_error[m] += match mode {
            EstimatorMode::Analytic => source.variance(m),
            EstimatorMode::NoiseSampled => s * s,
        };
    }
    result
}

/// One slot of the strict-delay optimal rule with water level `λ`, drawing
/// from the same streams as [`run_block`] does for `d = 1`.
pub fn run_strict_block(
    lambda: f64,
    source: &CompositeSource,
    channel: &FadingChannel,
    streams: &mut BlockStreams,
    mode: EstimatorMode,
    trace: Option<&mut Vec<SlotRecord>>,
) -> BlockSimResult {
    let mut result = BlockSimResult::new(source.len());
    let m = source.sample_request(&mut streams.source);
    let s = source.sample_measurement(m, &mut streams.source);
    let h = channel.sample(&mut streams.channel);
    let (sd, var) = (source.std_dev(m), source.variance(m));
    let p = csi_power(lambda, h, sd);
    let expected = csi_distortion(lambda, h, sd);
    result.requested[m] = 1;
    result.transmitted[m] = 1;
    result.slots = 1;
    result.power[m] = p;
    result.sq_error[m] = match mode {
        EstimatorMode::Analytic => expected,
        EstimatorMode::NoiseSampled => sampled_error(s, csi_gain(lambda, h, sd), h, var, &mut streams.noise),
    };
    if let Some(t) = trace {
        t.push(SlotRecord { magnitude: h, set: m, selected: Some(m), power: p, distortion: expected });
    }
    result
}

/// Outcome of the power calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub mu: f64,
    pub target: f64,
    /// Average power of the calibration sample at `mu`.
    pub achieved_power: f64,
    pub blocks: usize,
    pub seed: u64,
    pub key: u64,
    pub transmissions: u64,
    pub slots: u64,
}

/// Finds `μ` so that the average power over a fixed calibration batch equals
/// `target`.
///
/// Which measurement is sent over which channel never depends on `μ`, so the
/// batch is simulated once and its `(parameter, |h|)` transmissions are
/// reused for every candidate `μ`.
pub fn calibrate_mu(
    config: &StrategyConfig,
    source: &CompositeSource,
    channel: &FadingChannel,
    target: f64,
    blocks: usize,
    seed: u64,
    key: u64,
) -> Result<Calibration> {
    if !(target.is_finite() && target >= 0.0) {
        return Err(Error::Contract(format!("power target {target} must be ≥ 0")));
    }
    if blocks == 0 {
        return Err(Error::Contract("calibration needs at least one block".into()));
    }
    let logs: Vec<(Vec<(usize, f64)>, u64)> = (0..blocks as u64)
        .into_par_iter()
        .map(|b| {
            let mut streams = BlockStreams::new(seed, Purpose::Calibrate, key, b);
            let mut trace = Vec::with_capacity(config.depth);
            let r =
                run_block(config, source, channel, &mut streams, EstimatorMode::Analytic, Some(&mut trace));
            let sent = trace.iter().filter_map(|t| t.selected.map(|m| (m, t.magnitude))).collect();
            (sent, r.slots)
        })
        .collect();
    let slots: u64 = logs.iter().map(|l| l.1).sum();
    // Merge identical (parameter, |h|) pairs; discrete channels collapse to a few cells.
    let mut merged: BTreeMap<(usize, u64), f64> = BTreeMap::new();
    let mut transmissions = 0u64;
    for (sent, _) in &logs {
        for &(m, h) in sent {
            *merged.entry((m, h.to_bits())).or_insert(0.0) += 1.0;
            transmissions += 1;
        }
    }
    let cells: Vec<(f64, f64, f64)> = merged
        .into_iter()
        .map(|((m, bits), w)| (source.std_dev(m), f64::from_bits(bits), w / slots as f64))
        .collect();
    let avg_power = |mu: f64| -> f64 { cells.iter().map(|&(sd, h, w)| w * lthm_power_rule(mu, h, sd)).sum() };
    if target > 0.0 && cells.is_empty() {
        return Err(Error::Calibration("no transmissions in the calibration batch".into()));
    }
    let mult = solve_multiplier(avg_power, target, Monotonicity::Increasing)
        .map_err(|e| Error::Calibration(format!("power multiplier search failed: {e}")))?;
    Ok(Calibration {
        mu: mult.value,
        target,
        achieved_power: mult.achieved,
        blocks,
        seed,
        key,
        transmissions,
        slots,
    })
}

/// Large-delay limit of LTHM and LTSM when every parameter is matched to one
/// channel state with `σₘ/|ĥₘ| = q` and equal probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticMatchedResult {
    pub q: f64,
    pub mu: f64,
    pub power: f64,
    pub distortion: f64,
}

const MATCH_TOL: f64 = 1e-9;

pub fn asymptotic_matched(
    source: &CompositeSource,
    channel: &FadingChannel,
    power: f64,
) -> Result<AsymptoticMatchedResult> {
    if !(power.is_finite() && power >= 0.0) {
        return Err(Error::Contract(format!("average power {power} must be ≥ 0")));
    }
    let states = match channel {
        FadingChannel::Discrete(states) => states,
        FadingChannel::Rayleigh { .. } => {
            return Err(Error::Precondition("matching needs a discrete channel".into()))
        }
    };
    if states.len() != source.len() {
        return Err(Error::Precondition(format!(
            "{} channel states for {} parameters",
            states.len(),
            source.len()
        )));
    }
    let q = source.std_dev(0) / states[0].magnitude;
    for (m, s) in states.iter().enumerate() {
        let ratio = source.std_dev(m) / s.magnitude;
        if (ratio - q).abs() > MATCH_TOL {
            return Err(Error::Precondition(format!("parameter {m}: σ/|ĥ| = {ratio} differs from q = {q}")));
        }
        if (s.prob - source.prob(m)).abs() > MATCH_TOL {
            return Err(Error::Precondition(format!(
                "parameter {m}: request probability {} differs from state probability {}",
                source.prob(m),
                s.prob
            )));
        }
    }
    let cell_power = |mu: f64, m: usize| (mu * q - 1.0 / states[m].magnitude.powi(2)).max(0.0);
    let avg = |mu: f64| (0..source.len()).map(|m| cell_power(mu, m) * source.prob(m)).sum::<f64>();
    let mult = solve_multiplier(avg, power, Monotonicity::Increasing)?;
    let mu = mult.value;
    let distortion = (0..source.len())
        .map(|m| {
            source.variance(m) / (states[m].magnitude.powi(2) * cell_power(mu, m) + 1.0) * source.prob(m)
        })
        .sum();
    Ok(AsymptoticMatchedResult { q, mu, power: mult.achieved, distortion })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn config(kind: StrategyKind, delay: usize) -> StrategyConfig {
        StrategyConfig::new(
            kind,
            delay,
            10.0,
            &CompositeSource::reference(),
            &FadingChannel::reference_discrete(),
        )
        .unwrap()
    }

    #[test]
    fn depth_rule() {
        assert_eq!(buffer_depth(1), 1);
        assert_eq!(buffer_depth(2), 1);
        assert_eq!(buffer_depth(3), 2);
        assert_eq!(buffer_depth(4), 2);
        assert_eq!(buffer_depth(201), 101);
    }

    #[test]
    fn hard_match_selection() {
        let cfg = config(StrategyKind::Lthm, 7);
        let mut rng = rand::rng();
        let mut b = BufferState::with_counts(&[2, 0, 1, 0]);
        assert_eq!(select_measurement(&cfg, &mut b, 0, 3.0, &mut rng).map(|x| x.0), Some(0));
        assert_eq!(b.counts(), vec![1, 0, 1, 0]);
        let mut b = BufferState::with_counts(&[0, 0, 1, 0]);
        assert_eq!(select_measurement(&cfg, &mut b, 0, 3.0, &mut rng), None);
        assert_eq!(b.counts(), vec![0, 0, 1, 0]);
    }

    #[test]
    fn soft_match_nearest_midpoint() {
        let mids = [6.4, 4.9, 2.9, 1.2];
        assert_eq!(select_parameter(StrategyKind::Ltsm, &[0, 0, 1, 1], 0, 7.0, &mids), Some(2));
        assert_eq!(select_parameter(StrategyKind::Ltsm, &[0, 0, 0, 0], 0, 7.0, &mids), None);
        // tie between 1 and 3 goes to the smaller index
        let tie = [0.0, 2.0, 0.0, 4.0];
        assert_eq!(select_parameter(StrategyKind::Ltsm, &[0, 1, 0, 1], 0, 3.0, &tie), Some(1));
        assert_eq!(select_parameter(StrategyKind::Ltsm, &[1, 1, 0, 1], 3, 3.0, &tie), Some(3));
    }

    #[test]
    fn block_conservation() {
        let src = CompositeSource::reference();
        let ch = FadingChannel::reference_rayleigh();
        for kind in [StrategyKind::Lthm, StrategyKind::Ltsm] {
            let cfg = StrategyConfig::new(kind, 9, 10.0, &src, &ch).unwrap().with_mu(3.0).unwrap();
            for b in 0..200 {
                let mut st = BlockStreams::new(1, Purpose::Evaluate, 0, b);
                let r = run_block(&cfg, &src, &ch, &mut st, EstimatorMode::Analytic, None);
                assert_eq!(r.measurements(), 5);
                assert_eq!(r.slots, 5);
                for m in 0..4 {
                    assert_eq!(r.transmitted[m] + r.dropped[m], r.requested[m]);
                }
                if kind == StrategyKind::Ltsm {
                    assert_eq!(r.dropped.iter().sum::<u64>(), 0);
                }
            }
        }
    }

    #[test]
    fn asymptotic_matched_cases() {
        let src = CompositeSource::reference();
        let ch = FadingChannel::reference_discrete();
        let zero = asymptotic_matched(&src, &ch, 0.0).unwrap();
        assert!((zero.distortion - 3.0).abs() < 1e-12);
        let r = asymptotic_matched(&src, &ch, 10.0).unwrap();
        assert!((r.q - 1.0).abs() < 1e-12);
        assert!((r.mu - 10.87).abs() < 1e-9, "{}", r.mu);
        assert!((r.distortion - 1.0 / 10.87).abs() < 1e-9);
        let off = FadingChannel::discrete(vec![
            (10f64.sqrt(), 0.1),
            (5f64.sqrt(), 0.3),
            (1.1, 0.4),
            (0.5f64.sqrt(), 0.2),
        ])
        .unwrap();
        match asymptotic_matched(&src, &off, 10.0) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("parameter 2"), "{msg}"),
            other => panic!("{other:?}"),
        }
        assert!(asymptotic_matched(&src, &FadingChannel::reference_rayleigh(), 1.0).is_err());
    }

    #[test]
    fn calibration_hits_target_on_its_sample() {
        let src = CompositeSource::reference();
        let ch = FadingChannel::reference_discrete();
        let cfg = StrategyConfig::new(StrategyKind::Ltsm, 3, 10.0, &src, &ch).unwrap();
        let c = calibrate_mu(&cfg, &src, &ch, 10.0, 500, 3, 0).unwrap();
        assert!((c.achieved_power - 10.0).abs() < 1e-8);
        assert!(calibrate_mu(&cfg, &src, &ch, -1.0, 10, 3, 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn hard_match_drops_are_the_excess_requests(delay in 1usize..40, block in any::<u64>(), rayleigh in any::<bool>()) {
            let src = CompositeSource::reference();
            let ch = if rayleigh { FadingChannel::reference_rayleigh() } else { FadingChannel::reference_discrete() };
            let cfg = StrategyConfig::new(StrategyKind::Lthm, delay, 10.0, &src, &ch).unwrap().with_mu(4.0).unwrap();
            let mut st = BlockStreams::new(9, Purpose::Evaluate, 0, block);
            let r = run_block(&cfg, &src, &ch, &mut st, EstimatorMode::Analytic, None);
            for m in 0..src.len() {
                prop_assert_eq!(r.dropped[m], r.requested[m].saturating_sub(r.channel_visits[m]));
                prop_assert_eq!(r.transmitted[m], r.requested[m].min(r.channel_visits[m]));
            }
        }

        #[test]
        fn soft_match_never_idles(delay in 1usize..40, block in any::<u64>()) {
            let src = CompositeSource::reference();
            let ch = FadingChannel::reference_rayleigh();
            let cfg = StrategyConfig::new(StrategyKind::Ltsm, delay, 10.0, &src, &ch).unwrap().with_mu(4.0).unwrap();
            let mut st = BlockStreams::new(9, Purpose::Evaluate, 0, block);
            let mut trace = Vec::new();
            let r = run_block(&cfg, &src, &ch, &mut st, EstimatorMode::Analytic, Some(&mut trace));
            prop_assert!(trace.iter().all(|s| s.selected.is_some()));
            prop_assert_eq!(r.dropped.iter().sum::<u64>(), 0);
        }

        #[test]
        fn own_set_has_priority(
            counts in prop::collection::vec(0usize..3, 4),
            set in 0usize..4,
            h in 0.0f64..8.0,
            soft in any::<bool>(),
        ) {
            let kind = if soft { StrategyKind::Ltsm } else { StrategyKind::Lthm };
            let got = select_parameter(kind, &counts, set, h, &[6.4, 4.9, 2.9, 1.2]);
            let total: usize = counts.iter().sum();
            if counts[set] > 0 {
                prop_assert_eq!(got, Some(set));
            } else if soft {
                prop_assert_eq!(got.is_some(), total > 0);
                if let Some(k) = got {
                    prop_assert!(counts[k] > 0);
                }
            } else {
                prop_assert_eq!(got, None);
            }
        }

        #[test]
        fn blocks_are_reproducible(delay in 1usize..20, block in any::<u64>(), seed in any::<u64>()) {
            let src = CompositeSource::reference();
            let ch = FadingChannel::reference_rayleigh();
            let cfg = StrategyConfig::new(StrategyKind::Ltsm, delay, 10.0, &src, &ch).unwrap().with_mu(4.0).unwrap();
            let run = || {
                let mut st = BlockStreams::new(seed, Purpose::Evaluate, 1, block);
                run_block(&cfg, &src, &ch, &mut st, EstimatorMode::NoiseSampled, None)
            };
            prop_assert_eq!(run(), run());
        }
    }
}
