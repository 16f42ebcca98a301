//! Lagrange-multiplier bisection and the water-filling allocators.
//!
//! Every allocator here has one scalar multiplier whose constraint function
//! is continuous and monotone, so a bracketing bisection is enough.

use crate::error::{Error, Result};
use crate::model::{CompositeSource, FadingChannel};

const MAX_ITERATIONS: usize = 200;
const MAX_GROWTH: usize = 2000;
/// Relative tolerance on the achieved constraint.
pub const CONSTRAINT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotonicity {
    Increasing,
    Decreasing,
}

/// Result of a multiplier search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Multiplier {
    pub value: f64,
    pub target: f64,
    pub achieved: f64,
    pub tolerance: f64,
}

/// Finds `x ≥ 0` with `constraint(x) = target`.
///
/// The upper bracket grows geometrically until the constraint overshoots.
/// For `target = 0` the returned value is the edge of the zero set (the
/// largest `x` with zero constraint for increasing functions, the smallest
/// for decreasing ones), i.e. the water level at which allocation starts.
pub fn solve_multiplier<F>(constraint: F, target: f64, direction: Monotonicity) -> Result<Multiplier>
where
    F: Fn(f64) -> f64,
{
    if !(target.is_finite() && target >= 0.0) {
        return Err(Error::Contract(format!("constraint target {target} must be finite and ≥ 0")));
    }
    let tolerance = CONSTRAINT_TOL * target.max(1.0);
    // `above(x)` is true on the side of the root where the constraint exceeds target.
    let exceeds = |x: f64| -> bool {
        let v = constraint(x);
        if target == 0.0 {
            v > 0.0
        } else {
            v >= target
        }
    };

    let (mut lo, mut hi) = match direction {
        Monotonicity::Increasing => {
            let mut hi = 1.0;
            let mut grown = 0;
            while !exceeds(hi) {
                hi *= 2.0;
                grown += 1;
                if grown > MAX_GROWTH || !hi.is_finite() {
                    return Err(Error::Numerical("multiplier bracket did not overshoot".into()));
                }
            }
            (0.0, hi)
        }
        Monotonicity::Decreasing => {
            // exceeds(lo) must hold, exceeds(hi) must not
            let mut hi = 1.0;
            let mut grown = 0;
            while exceeds(hi) {
                hi *= 2.0;
                grown += 1;
                if grown > MAX_GROWTH || !hi.is_finite() {
                    return Err(Error::Numerical("multiplier bracket did not undershoot".into()));
                }
            }
            let mut lo = hi * 0.5;
            let mut shrunk = 0;
            while !exceeds(lo) {
                lo *= 0.5;
                shrunk += 1;
                if shrunk > MAX_GROWTH || lo == 0.0 {
                    return Err(Error::Numerical("multiplier bracket did not overshoot".into()));
                }
            }
            (lo, hi)
        }
    };

    for _ in 0..MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let mid_exceeds = exceeds(mid);
        match (direction, mid_exceeds) {
            (Monotonicity::Increasing, true) | (Monotonicity::Decreasing, false) => hi = mid,
            _ => lo = mid,
        }
    }

    let value = if target == 0.0 {
        match direction {
            Monotonicity::Increasing => lo,
            Monotonicity::Decreasing => hi,
        }
    } else {
        let (fl, fh) = (constraint(lo), constraint(hi));
        if (fl - target).abs() <= (fh - target).abs() {
            lo
        } else {
            hi
        }
    };
    let achieved = constraint(value);
    let hit = (achieved - target).abs() <= tolerance;
    if !hit {
        return Err(Error::Numerical(format!("multiplier search reached {achieved} for target {target}")));
    }
    Ok(Multiplier { value, target, achieved, tolerance })
}

/// Optimal encoder gain with CSI: `√[λ/(|h|σ) − 1/(|h|²σ²)]⁺`.
pub fn csi_gain(lambda: f64, magnitude: f64, std_dev: f64) -> f64 {
    (lambda / (magnitude * std_dev) - 1.0 / (magnitude * std_dev).powi(2)).max(0.0).sqrt()
}

/// `(σ/|h|)·[λ − 1/(|h|σ)]⁺`.
pub fn csi_power(lambda: f64, magnitude: f64, std_dev: f64) -> f64 {
    std_dev / magnitude * (lambda - 1.0 / (magnitude * std_dev)).max(0.0)
}

/// `(σ/|h|)·min(1/λ, |h|σ)`: the reciprocal-mirror image of the water level.
pub fn csi_distortion(lambda: f64, magnitude: f64, std_dev: f64) -> f64 {
    std_dev / magnitude * (1.0 / lambda).min(magnitude * std_dev)
}

/// Buffered-strategy power rule `[μσ/|h| − 1/|h|²]⁺`.
pub fn lthm_power_rule(mu: f64, magnitude: f64, std_dev: f64) -> f64 {
    (mu * std_dev / magnitude - 1.0 / (magnitude * magnitude)).max(0.0)
}

/// Distortion of a transmitted measurement, `σ²/(|h|²P + 1)`.
pub fn transmitted_distortion(power: f64, magnitude: f64, variance: f64) -> f64 {
    variance / (magnitude * magnitude * power + 1.0)
}

/// Linear MMSE decoder gain `|h|fσ²/(|h|²f²σ² + 1)`.
pub fn mmse_gain(gain: f64, magnitude: f64, variance: f64) -> f64 {
    magnitude * gain * variance / (magnitude * magnitude * gain * gain * variance + 1.0)
}

/// One `(parameter, channel magnitude)` pair with its probability weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub param: usize,
    pub std_dev: f64,
    pub magnitude: f64,
    pub weight: f64,
}

/// A probability measure over `(σ, |h|)` pairs on which the CSI water-fill
/// is solved.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CellMeasure {
    pub cells: Vec<Cell>,
}

impl CellMeasure {
    /// Product measure of the source request law and the channel points.
    pub fn product(source: &CompositeSource, channel_nodes: &[(f64, f64)]) -> Self {
        let mut cells = Vec::with_capacity(source.len() * channel_nodes.len());
        for m in 0..source.len() {
            let (sd, p) = (source.std_dev(m), source.prob(m));
            for &(h, w) in channel_nodes {
                if w > 0.0 && h > 0.0 {
                    cells.push(Cell { param: m, std_dev: sd, magnitude: h, weight: p * w });
                }
            }
        }
        Self { cells }
    }

    pub fn power(&self, lambda: f64) -> f64 {
        self.cells.iter().map(|c| c.weight * csi_power(lambda, c.magnitude, c.std_dev)).sum()
    }

    pub fn distortion(&self, lambda: f64) -> f64 {
        self.cells.iter().map(|c| c.weight * csi_distortion(lambda, c.magnitude, c.std_dev)).sum()
    }

    pub fn solve(&self, power: f64) -> Result<Multiplier> {
        solve_multiplier(|l| self.power(l), power, Monotonicity::Increasing)
    }
}

/// Magnitudes where `[λ/(|h|σ) − …]⁺` switches on, one per component.
pub(crate) fn csi_kinks(lambda: f64, std_devs: impl Iterator<Item = f64>) -> Vec<f64> {
    if lambda <= 0.0 {
        return Vec::new();
    }
    std_devs.map(|sd| 1.0 / (lambda * sd)).collect()
}

/// Solves a water-fill whose quadrature depends on where the kinks sit: one
/// solve without breakpoints, then re-solves with panel edges at the kinks of
/// the previous multiplier. Discrete measures are solved once.
pub(crate) fn solve_refined<B, K>(
    continuous: bool,
    build: B,
    kinks: K,
    power: f64,
) -> Result<(CellMeasure, Multiplier, Vec<f64>)>
where
    B: Fn(&[f64]) -> CellMeasure,
    K: Fn(f64) -> Vec<f64>,
{
    let mut breaks = Vec::new();
    let mut measure = build(&breaks);
    let mut mult = measure.solve(power)?;
    if continuous {
        for _ in 0..2 {
            breaks = kinks(mult.value);
            measure = build(&breaks);
            mult = measure.solve(power)?;
        }
    }
    Ok((measure, mult, breaks))
}

/// How an [`AllocationTable`] maps `(|h|, m)` to power.
#[derive(Debug, Clone, PartialEq)]
pub enum AllocationRule {
    /// Encoder knows `|h|`: water level `λ`.
    Csi { lambda: f64 },
    /// Encoder does not know `|h|`: one power per parameter.
    NoCsi { powers: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocationEntry {
    pub magnitude: f64,
    pub param: usize,
    pub power: f64,
    pub distortion: f64,
    pub gain: f64,
}

/// Per-cell power/distortion of a strict-delay allocation. `entries` is
/// filled for discrete channels only; continuous laws are queried through
/// [`AllocationTable::power`] and friends.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationTable {
    pub multiplier: Multiplier,
    pub rule: AllocationRule,
    pub variances: Vec<f64>,
    pub entries: Vec<AllocationEntry>,
    pub average_power: f64,
    pub average_distortion: f64,
}

impl AllocationTable {
    pub fn power(&self, magnitude: f64, param: usize) -> f64 {
        match &self.rule {
            AllocationRule::Csi { lambda } => csi_power(*lambda, magnitude, self.variances[param].sqrt()),
            AllocationRule::NoCsi { powers } => powers[param],
        }
    }

    pub fn gain(&self, magnitude: f64, param: usize) -> f64 {
        let var = self.variances[param];
        match &self.rule {
            AllocationRule::Csi { lambda } => csi_gain(*lambda, magnitude, var.sqrt()),
            AllocationRule::NoCsi { powers } => (powers[param] / var).sqrt(),
        }
    }

    pub fn distortion(&self, magnitude: f64, param: usize) -> f64 {
        let var = self.variances[param];
        match &self.rule {
            AllocationRule::Csi { lambda } => csi_distortion(*lambda, magnitude, var.sqrt()),
            AllocationRule::NoCsi { powers } => transmitted_distortion(powers[param], magnitude, var),
        }
    }

    pub(crate) fn fill_entries(&mut self, channel: &FadingChannel) {
        let mut entries = Vec::new();
        for s in channel.states() {
            for m in 0..self.variances.len() {
                entries.push(AllocationEntry {
                    magnitude: s.magnitude,
                    param: m,
                    power: self.power(s.magnitude, m),
                    distortion: self.distortion(s.magnitude, m),
                    gain: self.gain(s.magnitude, m),
                });
            }
        }
        self.entries = entries;
    }
}

/// Optimal strict-delay allocation when both ends know the channel:
/// water-filling reflected on a reciprocal mirror.
pub fn strict_delay_optimal(
    source: &CompositeSource,
    channel: &FadingChannel,
    power: f64,
) -> Result<AllocationTable> {
    if !(power.is_finite() && power >= 0.0) {
        return Err(Error::Contract(format!("average power {power} must be ≥ 0")));
    }
    let sds: Vec<f64> = (0..source.len()).map(|m| source.std_dev(m)).collect();
    let (measure, multiplier, _) = solve_refined(
        channel.is_continuous(),
        |breaks| CellMeasure::product(source, &channel.nodes(breaks)),
        |l| csi_kinks(l, sds.iter().copied()),
        power,
    )?;
    let lambda = multiplier.value;
    let mut table = AllocationTable {
        multiplier,
        rule: AllocationRule::Csi { lambda },
        variances: source.variances().to_vec(),
        entries: Vec::new(),
        average_power: measure.power(lambda),
        average_distortion: measure.distortion(lambda),
    };
    table.fill_entries(channel);
    Ok(table)
}

/// Ergodic capacity with transmitter CSI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capacity {
    /// Water level `α*`; `None` when the encoder has no CSI.
    pub alpha: Option<Multiplier>,
    pub bits: f64,
}

/// Capacity-achieving water-fill `P(h) = [α − 1/|h|²]⁺`, capacity in bits per use.
pub fn ergodic_capacity(channel: &FadingChannel, power: f64) -> Result<Capacity> {
    if !(power.is_finite() && power >= 0.0) {
        return Err(Error::Contract(format!("average power {power} must be ≥ 0")));
    }
    let eval = |nodes: &[(f64, f64)], alpha: f64| -> f64 {
        nodes.iter().map(|&(h, w)| w * (alpha - 1.0 / (h * h)).max(0.0)).sum()
    };
    let mut nodes = channel.nodes(&[]);
    let mut alpha = solve_multiplier(|a| eval(&nodes, a), power, Monotonicity::Increasing)?;
    if channel.is_continuous() {
        for _ in 0..2 {
            let kink = if alpha.value > 0.0 { vec![alpha.value.sqrt().recip()] } else { vec![] };
            nodes = channel.nodes(&kink);
            alpha = solve_multiplier(|a| eval(&nodes, a), power, Monotonicity::Increasing)?;
        }
    }
    let bits = nodes.iter().map(|&(h, w)| w * 0.5 * (h * h * alpha.value).max(1.0).log2()).sum();
    Ok(Capacity { alpha: Some(alpha), bits })
}

/// Ergodic capacity `E[½ log₂(1 + |h|²P)]` with constant power.
pub fn ergodic_capacity_no_csi(channel: &FadingChannel, power: f64) -> Result<Capacity> {
    if !(power.is_finite() && power >= 0.0) {
        return Err(Error::Contract(format!("average power {power} must be ≥ 0")));
    }
    let bits = channel.expect(|h| 0.5 * (h * h * power).ln_1p() / std::f64::consts::LN_2, &[]);
    Ok(Capacity { alpha: None, bits })
}

/// Reverse water-filling of a composite Gaussian source at a target rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RateAllocation {
    pub beta: Multiplier,
    pub rates: Vec<f64>,
    pub distortions: Vec<f64>,
    pub average_distortion: f64,
}

/// `R*(σ) = ½[log₂(σ²/β)]⁺`, `D*(σ) = min(β, σ²)` with `E[R*] = rate`.
pub fn reverse_waterfill(source: &CompositeSource, rate: f64) -> Result<RateAllocation> {
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(Error::Contract(format!("rate {rate} must be ≥ 0")));
    }
    let avg_rate = |beta: f64| -> f64 {
        source
            .variances()
            .iter()
            .zip(source.request_probs())
            .map(|(v, p)| p * 0.5 * (v / beta).log2().max(0.0))
            .sum()
    };
    let beta = solve_multiplier(avg_rate, rate, Monotonicity::Decreasing)?;
    let rates: Vec<f64> = source.variances().iter().map(|v| 0.5 * (v / beta.value).log2().max(0.0)).collect();
    let distortions: Vec<f64> = source.variances().iter().map(|v| beta.value.min(*v)).collect();
    let average_distortion = distortions.iter().zip(source.request_probs()).map(|(d, p)| d * p).sum();
    Ok(RateAllocation { beta, rates, distortions, average_distortion })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> (CompositeSource, FadingChannel) {
        (
            CompositeSource::new(vec![1.0], vec![1.0]).unwrap(),
            FadingChannel::discrete(vec![(1.0, 0.5), (2.0, 0.5)]).unwrap(),
        )
    }

    #[test]
    fn mmse_gain_values() {
        assert_eq!(mmse_gain(0.0, 1.0, 1.0), 0.0);
        assert!((mmse_gain(1.0, 1.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((mmse_gain(1.0, 2.0, 1.0) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn power_rule_values() {
        assert_eq!(lthm_power_rule(0.0, 1.0, 1.0), 0.0);
        let p = lthm_power_rule(2.0, 1.0, 1.0);
        assert!((p - 1.0).abs() < 1e-15);
        assert!((transmitted_distortion(p, 1.0, 1.0) - 0.5).abs() < 1e-15);
        // μσ|h| < 1 is clipped
        assert_eq!(lthm_power_rule(0.5, 1.0, 1.0), 0.0);
        assert_eq!(transmitted_distortion(0.0, 1.0, 3.0), 3.0);
    }

    #[test]
    fn zero_power_gives_prior() {
        let t =
            strict_delay_optimal(&CompositeSource::reference(), &FadingChannel::reference_discrete(), 0.0)
                .unwrap();
        assert!(t.entries.iter().all(|e| e.power == 0.0));
        assert!((t.average_distortion - 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_cell_waterfill() {
        let src = CompositeSource::new(vec![1.0], vec![1.0]).unwrap();
        let ch = FadingChannel::discrete(vec![(1.0, 1.0)]).unwrap();
        let t = strict_delay_optimal(&src, &ch, 1.0).unwrap();
        assert!((t.entries[0].power - 1.0).abs() < 1e-9);
        assert!((t.average_distortion - 0.5).abs() < 1e-9);
    }

    #[test]
    fn two_state_closed_form() {
        let (src, ch) = two_state();
        let t = strict_delay_optimal(&src, &ch, 1.0).unwrap();
        assert!((t.multiplier.value - 13.0 / 6.0).abs() < 1e-12);
        assert!((t.average_distortion - 4.5 / 13.0).abs() < 1e-12);
    }

    #[test]
    fn negative_power_rejected() {
        let (src, ch) = two_state();
        assert!(matches!(strict_delay_optimal(&src, &ch, -1.0), Err(Error::Contract(_))));
        assert!(matches!(reverse_waterfill(&src, -0.1), Err(Error::Contract(_))));
        assert!(ergodic_capacity(&ch, -2.0).is_err());
    }

    #[test]
    fn capacity_special_cases() {
        let ch = FadingChannel::discrete(vec![(1.0, 1.0)]).unwrap();
        assert!((ergodic_capacity(&ch, 3.0).unwrap().bits - 1.0).abs() < 1e-9);
        assert!(ergodic_capacity(&ch, 0.0).unwrap().bits.abs() < 1e-12);
        assert!((ergodic_capacity_no_csi(&ch, 3.0).unwrap().bits - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reverse_waterfill_cases() {
        let one = CompositeSource::new(vec![1.0], vec![1.0]).unwrap();
        let r = reverse_waterfill(&one, 1.0).unwrap();
        assert!((r.beta.value - 0.25).abs() < 1e-9);
        assert!((r.average_distortion - 0.25).abs() < 1e-9);
        let zero = reverse_waterfill(&CompositeSource::reference(), 0.0).unwrap();
        assert!(zero.beta.value >= 10.0 - 1e-9);
        assert!((zero.average_distortion - 3.0).abs() < 1e-9);
    }

    #[test]
    fn bisection_decreasing_and_zero_target() {
        let m = solve_multiplier(|x| 4.0 / x, 2.0, Monotonicity::Decreasing).unwrap();
        assert!((m.value - 2.0).abs() < 1e-9);
        let edge = solve_multiplier(|x| (x - 3.0).max(0.0), 0.0, Monotonicity::Increasing).unwrap();
        assert!((edge.value - 3.0).abs() < 1e-9);
        assert!(solve_multiplier(|_| 0.0, 1.0, Monotonicity::Increasing).is_err());
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use crate::testkit;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn spends_exactly_the_budget(src in testkit::source(4), ch in testkit::discrete_channel(5), p in 0.0f64..50.0) {
            let t = strict_delay_optimal(&src, &ch, p).unwrap();
            prop_assert!((t.average_power - p).abs() <= 1e-9 * p.max(1.0));
            prop_assert!(t.average_distortion <= src.mean_variance() + 1e-12);
        }

        #[test]
        fn no_feasible_reallocation_does_better(
            src in testkit::source(3),
            ch in testkit::discrete_channel(4),
            p in 0.1f64..20.0,
            raw in prop::collection::vec(0.0f64..1.0, 12),
        ) {
            let t = strict_delay_optimal(&src, &ch, p).unwrap();
            let cells: Vec<(f64, usize, f64)> = ch
                .states()
                .iter()
                .flat_map(|s| (0..src.len()).map(move |m| (s.magnitude, m, s.prob)))
                .collect();
            let w: Vec<f64> = cells.iter().enumerate().map(|(i, _)| raw[i % raw.len()] + 1e-3).collect();
            let spend: f64 = cells.iter().zip(&w).map(|(&(_, m, q), x)| q * src.prob(m) * x).sum();
            let scale = p / spend;
            let d: f64 = cells
                .iter()
                .zip(&w)
                .map(|(&(h, m, q), x)| q * src.prob(m) * transmitted_distortion(x * scale, h, src.variance(m)))
                .sum();
            prop_assert!(d >= t.average_distortion - 1e-12, "{d} < {}", t.average_distortion);
        }

        #[test]
        fn distortion_is_decreasing_and_convex_in_power(
            src in testkit::source(4),
            ch in testkit::discrete_channel(4),
            a in 0.0f64..20.0,
            gap in 0.01f64..20.0,
        ) {
            let d = |p: f64| strict_delay_optimal(&src, &ch, p).unwrap().average_distortion;
            let (lo, mid, hi) = (d(a), d(a + gap / 2.0), d(a + gap));
            prop_assert!(lo >= mid - 1e-12 && mid >= hi - 1e-12);
            prop_assert!(mid <= 0.5 * (lo + hi) + 1e-10);
        }

        #[test]
        fn csi_capacity_dominates(ch in testkit::discrete_channel(5), p in 0.0f64..100.0) {
            let with = ergodic_capacity(&ch, p).unwrap().bits;
            let without = ergodic_capacity_no_csi(&ch, p).unwrap().bits;
            prop_assert!(with >= without - 1e-9);
        }

        #[test]
        fn reverse_waterfill_hits_rate(src in testkit::source(4), rate in 0.0f64..6.0) {
            let r = reverse_waterfill(&src, rate).unwrap();
            let spent: f64 = r.rates.iter().zip(src.request_probs()).map(|(x, q)| x * q).sum();
            prop_assert!((spent - rate).abs() < 1e-9);
            for (dm, v) in r.distortions.iter().zip(src.variances()) {
                prop_assert!(*dm <= *v);
            }
        }
    }
}
