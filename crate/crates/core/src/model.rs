//! Composite Gaussian source, fading channel laws and the channel partition
//! used by the hard/soft matching strategies.
//!
//! Indices are zero-based throughout: parameter `0` is the largest-variance
//! component and set `0` holds the strongest channel magnitudes.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::quadrature;

const PROB_TOL: f64 = 1e-12;

/// A switch over `J` independent zero-mean Gaussian components. One component
/// is requested per time slot according to `request_probs`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeSource {
    variances: Vec<f64>,
    probs: Vec<f64>,
}

impl CompositeSource {
    /// Builds a source, reordering the components by descending variance.
    pub fn new(variances: Vec<f64>, request_probs: Vec<f64>) -> Result<Self> {
        if variances.is_empty() {
            return Err(Error::InvalidModel("source needs at least one component".into()));
        }
        if variances.len() != request_probs.len() {
            return Err(Error::InvalidModel(format!(
                "{} variances but {} request probabilities",
                variances.len(),
                request_probs.len()
            )));
        }
        if let Some(v) = variances.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidModel(format!("variance {v} is not positive")));
        }
        if let Some(p) = request_probs.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return Err(Error::InvalidModel(format!("request probability {p} is not positive")));
        }
        let total: f64 = request_probs.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidModel(format!("request probabilities sum to {total}, not 1")));
        }
        let mut pairs: Vec<(f64, f64)> = variances.into_iter().zip(request_probs).collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let (variances, probs) = pairs.into_iter().unzip();
        Ok(Self { variances, probs })
    }

    /// Variances `{10, 5, 1, 0.5}` requested with `{0.1, 0.3, 0.4, 0.2}`.
    pub fn reference() -> Self {
        Self::new(vec![10.0, 5.0, 1.0, 0.5], vec![0.1, 0.3, 0.4, 0.2]).expect("reference source is valid")
    }

    pub fn len(&self) -> usize {
        self.variances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variances.is_empty()
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn request_probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn variance(&self, m: usize) -> f64 {
        self.variances[m]
    }

    pub fn std_dev(&self, m: usize) -> f64 {
        self.variances[m].sqrt()
    }

    pub fn prob(&self, m: usize) -> f64 {
        self.probs[m]
    }

    /// `E[σ²]`, the distortion reached with zero power.
    pub fn mean_variance(&self) -> f64 {
        self.variances.iter().zip(&self.probs).map(|(v, p)| v * p).sum()
    }

    pub fn sample_request<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (m, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return m;
            }
        }
        self.probs.len() - 1
    }

    pub fn sample_measurement<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.std_dev(m) * z
    }
}

/// One discrete fading state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelState {
    pub magnitude: f64,
    pub prob: f64,
}

/// Law of the fading magnitude `|h|`. The sign of `h` never enters any
/// quantity computed here, so only magnitudes are modelled.
#[derive(Debug, Clone, PartialEq)]
pub enum FadingChannel {
    /// Finitely many magnitudes, stored by descending magnitude.
    Discrete(Vec<ChannelState>),
    /// Rayleigh magnitude with scale `ω`: `F(x) = 1 − exp(−x²/(2ω²))`.
    Rayleigh { scale: f64 },
}

impl FadingChannel {
    pub fn discrete(states: Vec<(f64, f64)>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidModel("discrete channel needs a state".into()));
        }
        let mut states: Vec<ChannelState> =
            states.into_iter().map(|(magnitude, prob)| ChannelState { magnitude, prob }).collect();
        for s in &states {
            if !(s.magnitude.is_finite() && s.magnitude > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "channel magnitude {} is not positive",
                    s.magnitude
                )));
            }
            if !(s.prob.is_finite() && s.prob > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "channel state probability {} is not positive",
                    s.prob
                )));
            }
        }
        let total: f64 = states.iter().map(|s| s.prob).sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidModel(format!("channel probabilities sum to {total}, not 1")));
        }
        states.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude));
        if states.windows(2).any(|w| w[0].magnitude == w[1].magnitude) {
            return Err(Error::InvalidModel("duplicate channel magnitude".into()));
        }
        Ok(Self::Discrete(states))
    }

    pub fn rayleigh(scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidModel(format!("Rayleigh scale {scale} is not positive")));
        }
        Ok(Self::Rayleigh { scale })
    }

    /// States `{√10, √5, 1, √0.5}` with probabilities `{0.1, 0.3, 0.4, 0.2}`.
    pub fn reference_discrete() -> Self {
        Self::discrete(vec![(10f64.sqrt(), 0.1), (5f64.sqrt(), 0.3), (1.0, 0.4), (0.5f64.sqrt(), 0.2)])
            .expect("reference channel is valid")
    }

    /// Rayleigh with `ω = 3`.
    pub fn reference_rayleigh() -> Self {
        Self::Rayleigh { scale: 3.0 }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, Self::Rayleigh { .. })
    }

    /// Discrete states by descending magnitude; empty for continuous laws.
    pub fn states(&self) -> &[ChannelState] {
        match self {
            Self::Discrete(states) => states,
            Self::Rayleigh { .. } => &[],
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Self::Discrete(states) => {
                let mass: f64 = states.iter().filter(|s| s.magnitude <= x).map(|s| s.prob).sum();
                mass.min(1.0)
            }
            Self::Rayleigh { scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-x * x / (2.0 * scale * scale)).exp_m1()
                }
            }
        }
    }

    /// Generalized inverse `inf{x : F(x) ≥ u}`; exact inverse for Rayleigh.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            Self::Discrete(states) => {
                let mut acc = 0.0;
                for s in states.iter().rev() {
                    acc += s.prob;
                    if acc >= u - 1e-15 {
                        return s.magnitude;
                    }
                }
                states[0].magnitude
            }
            Self::Rayleigh { scale } => {
                if u <= 0.0 {
                    0.0
                } else if u >= 1.0 {
                    f64::INFINITY
                } else {
                    scale * (-2.0 * (-u).ln_1p()).sqrt()
                }
            }
        }
    }

    /// Density of `|h|`; `None` for discrete laws.
    pub fn density(&self, x: f64) -> Option<f64> {
        match self {
            Self::Discrete(_) => None,
            Self::Rayleigh { scale } => {
                if x < 0.0 {
                    Some(0.0)
                } else {
                    let s2 = scale * scale;
                    Some(x / s2 * (-x * x / (2.0 * s2)).exp())
                }
            }
        }
    }

    /// `E[|h|²]`.
    pub fn mean_square(&self) -> f64 {
        match self {
            Self::Discrete(states) => states.iter().map(|s| s.prob * s.magnitude.powi(2)).sum(),
            Self::Rayleigh { scale } => 2.0 * scale * scale,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Discrete(states) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for s in states {
                    acc += s.prob;
                    if u < acc {
                        return s.magnitude;
                    }
                }
                states[states.len() - 1].magnitude
            }
            Self::Rayleigh { .. } => {
                let u: f64 = rng.random();
                self.quantile(u)
            }
        }
    }

    /// Weighted magnitude points representing the law: the atoms for a
    /// discrete channel, quadrature nodes in the CDF domain for a continuous
    /// one. `breaks` are magnitudes where the integrand has a kink.
    pub fn nodes(&self, breaks: &[f64]) -> Vec<(f64, f64)> {
        match self {
            Self::Discrete(states) => states.iter().map(|s| (s.magnitude, s.prob)).collect(),
            Self::Rayleigh { .. } => {
                let cuts: Vec<f64> = breaks.iter().map(|&b| self.cdf(b)).collect();
                quadrature::unit_nodes(&cuts).into_iter().map(|(u, w)| (self.quantile(u), w)).collect()
            }
        }
    }

    /// `E[g(|h|)]` under this law.
    pub fn expect<F: Fn(f64) -> f64>(&self, g: F, breaks: &[f64]) -> f64 {
        self.nodes(breaks).into_iter().map(|(h, w)| w * g(h)).sum()
    }
}

/// One time slot's draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub request: usize,
    pub measurement: f64,
    pub magnitude: f64,
}

/// Draws the requested parameter, its measurement and the channel magnitude
/// from a single stream.
pub fn sample_step<R: Rng + ?Sized>(source: &CompositeSource, channel: &FadingChannel, rng: &mut R) -> Step {
    let request = source.sample_request(rng);
    let measurement = source.sample_measurement(request, rng);
    let magnitude = channel.sample(rng);
    Step { request, measurement, magnitude }
}

/// How one real discrete state is shared among the sets.
#[derive(Debug, Clone, PartialEq)]
pub struct StateShares {
    pub magnitude: f64,
    pub prob: f64,
    /// `(set, conditional probability)`; conditionals sum to one.
    pub shares: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
enum Layout {
    /// `boundaries[m] = H'_m`, from `H'_0 = ∞` down to `H'_J = 0`.
    Intervals {
        boundaries: Vec<f64>,
    },
    Sets {
        table: Vec<StateShares>,
    },
}

/// Split of the channel magnitudes into `J` sets, set `m` having the request
/// probability of parameter `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPartition {
    layout: Layout,
    midpoints: Vec<f64>,
}

impl ChannelPartition {
    pub fn len(&self) -> usize {
        self.midpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.midpoints.is_empty()
    }

    /// Interval boundaries `H'_0 = ∞ ≥ … ≥ H'_J = 0`; `None` for discrete channels.
    pub fn boundaries(&self) -> Option<&[f64]> {
        match &self.layout {
            Layout::Intervals { boundaries } => Some(boundaries),
            Layout::Sets { .. } => None,
        }
    }

    /// Virtual-state table; `None` for continuous channels.
    pub fn virtual_states(&self) -> Option<&[StateShares]> {
        match &self.layout {
            Layout::Intervals { .. } => None,
            Layout::Sets { table } => Some(table),
        }
    }

    /// Representative magnitude `h'_m` of each set, used by soft matching.
    pub fn midpoints(&self) -> &[f64] {
        &self.midpoints
    }

    /// Probability that the channel falls into set `m`.
    pub fn mass(&self, channel: &FadingChannel, m: usize) -> f64 {
        match &self.layout {
            Layout::Intervals { boundaries } => {
                let upper = if m == 0 { 1.0 } else { channel.cdf_left(boundaries[m]) };
                upper - channel.cdf_left(boundaries[m + 1])
            }
            Layout::Sets { table } => table
                .iter()
                .flat_map(|s| s.shares.iter().filter(|(k, _)| *k == m).map(move |(_, c)| c * s.prob))
                .sum(),
        }
    }
}

impl FadingChannel {
    /// `Pr{|h| < x}`.
    fn cdf_left(&self, x: f64) -> f64 {
        match self {
            Self::Discrete(states) => states.iter().filter(|s| s.magnitude < x).map(|s| s.prob).sum(),
            Self::Rayleigh { .. } => self.cdf(x),
        }
    }
}

/// Builds the hard-matching partition of the channel magnitudes.
///
/// Continuous laws get intervals `[H'_m, H'_{m-1})` with
/// `H'_m = F⁻¹(1 − Σ_{j≤m} p_M(j))` and midpoints splitting each interval
/// into two equally likely halves. Discrete laws are scanned from the
/// strongest state down, filling each set to its request probability and
/// splitting the straddling state into virtual states; the midpoint of a set
/// is the plain mean of its member magnitudes.
pub fn build_partition(source: &CompositeSource, channel: &FadingChannel) -> ChannelPartition {
    let j = source.len();
    match channel {
        FadingChannel::Rayleigh { .. } => {
            let mut boundaries = Vec::with_capacity(j + 1);
            boundaries.push(f64::INFINITY);
            let mut cum = 0.0;
            for m in 0..j - 1 {
                cum += source.prob(m);
                boundaries.push(channel.quantile((1.0 - cum).max(0.0)));
            }
            boundaries.push(0.0);
            let midpoints = (0..j)
                .map(|m| {
                    let hi = if m == 0 { 1.0 } else { channel.cdf(boundaries[m]) };
                    let lo = channel.cdf(boundaries[m + 1]);
                    channel.quantile(0.5 * (hi + lo))
                })
                .collect();
            ChannelPartition { layout: Layout::Intervals { boundaries }, midpoints }
        }
        FadingChannel::Discrete(states) => {
            let mut table: Vec<StateShares> = states
                .iter()
                .map(|s| StateShares { magnitude: s.magnitude, prob: s.prob, shares: Vec::new() })
                .collect();
            let mut set = 0usize;
            let mut set_left = source.prob(0);
            for entry in table.iter_mut() {
                let mut state_left = entry.prob;
                while state_left > 1e-15 && set < j {
                    let take = state_left.min(set_left);
                    if take > 0.0 {
                        entry.shares.push((set, take / entry.prob));
                    }
                    state_left -= take;
                    set_left -= take;
                    if set_left <= 1e-15 {
                        set += 1;
                        if set < j {
                            set_left = source.prob(set);
                        }
                    }
                }
                if entry.shares.is_empty() {
                    // Rounding residue at the tail: keep the state reachable.
                    entry.shares.push((j - 1, 1.0));
                }
                let total: f64 = entry.shares.iter().map(|(_, c)| c).sum();
                for (_, c) in entry.shares.iter_mut() {
                    *c /= total;
                }
            }
            let midpoints = (0..j)
                .map(|m| {
                    let members: Vec<f64> = table
                        .iter()
                        .filter(|s| s.shares.iter().any(|(k, _)| *k == m))
                        .map(|s| s.magnitude)
                        .collect();
                    if members.is_empty() {
                        0.0
                    } else {
                        members.iter().sum::<f64>() / members.len() as f64
                    }
                })
                .collect();
            ChannelPartition { layout: Layout::Sets { table }, midpoints }
        }
    }
}

/// Set index of the magnitude `|h|`. Intervals are half-open
/// `[H'_m, H'_{m-1})`; split discrete states are assigned at random according
/// to their conditional shares (randomness is only drawn for split states).
pub fn classify<R: Rng + ?Sized>(partition: &ChannelPartition, magnitude: f64, rng: &mut R) -> usize {
    match &partition.layout {
        Layout::Intervals { boundaries } => {
            let j = boundaries.len() - 1;
            (0..j).find(|&m| magnitude >= boundaries[m + 1]).unwrap_or(j - 1)
        }
        Layout::Sets { table } => {
            let entry = table
                .iter()
                .min_by(|a, b| (a.magnitude - magnitude).abs().total_cmp(&(b.magnitude - magnitude).abs()))
                .expect("partition has states");
            if entry.shares.len() == 1 {
                return entry.shares[0].0;
            }
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for &(m, c) in &entry.shares {
                acc += c;
                if u < acc {
                    return m;
                }
            }
            entry.shares[entry.shares.len() - 1].0
        }
    }
}


#[cfg(test)]
mod props {
    use super::*;
    use crate::testkit;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #[test]
        fn rayleigh_quantile_round_trip(scale in 0.1f64..10.0, u in 1e-9f64..0.999_999) {
            let ch = FadingChannel::rayleigh(scale).unwrap();
            let x = ch.quantile(u);
            prop_assert!((ch.cdf(x) - u).abs() < 1e-12);
        }

        #[test]
        fn partition_masses_match_requests(src in testkit::source(5), ch in testkit::discrete_channel(6)) {
            let p = build_partition(&src, &ch);
            for m in 0..src.len() {
                prop_assert!((p.mass(&ch, m) - src.prob(m)).abs() < 1e-9);
            }
        }

        #[test]
        fn rayleigh_partition_masses_match_requests(src in testkit::source(5), scale in 0.5f64..5.0) {
            let ch = FadingChannel::rayleigh(scale).unwrap();
            let p = build_partition(&src, &ch);
            for m in 0..src.len() {
                prop_assert!((p.mass(&ch, m) - src.prob(m)).abs() < 1e-9);
            }
        }

        #[test]
        fn classify_respects_state_shares(src in testkit::source(4), ch in testkit::discrete_channel(5), seed in any::<u64>()) {
            let p = build_partition(&src, &ch);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for v in p.virtual_states().unwrap() {
                let k = classify(&p, v.magnitude, &mut rng);
                prop_assert!(v.shares.iter().any(|(j, c)| *j == k && *c > 0.0));
            }
        }
    }
}
