//! Linear transmission when only the receiver knows the channel.
//!
//! The encoder can only scale by parameter, so the strict-delay optimum gives
//! each parameter a constant power found from `Ψ(P) = E[|h|²/(|h|²P+1)²]`.
//! Also evaluates the two-measurement example showing that one-to-one
//! mappings between measurements and channels are not optimal here.

use crate::bounds::{tlb, BoundResult};
use crate::error::{Error, Result};
use crate::model::{CompositeSource, FadingChannel};
use crate::waterfill::{
    solve_multiplier, transmitted_distortion, AllocationRule, AllocationTable, Monotonicity,
};

/// `Ψ` on a fixed set of channel points, with its inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiCurve {
    nodes: Vec<(f64, f64)>,
    at_zero: f64,
    /// `(P, Ψ(P))` on a coarse grid, checked for strict decrease.
    samples: Vec<(f64, f64)>,
    decreasing: bool,
}

impl PsiCurve {
    pub fn new(channel: &FadingChannel) -> Self {
        let nodes = channel.nodes(&[]);
        let value = |p: f64| psi_on(&nodes, p);
        let at_zero = value(0.0);
        let samples: Vec<(f64, f64)> = (-8..=8)
            .map(|k| 10f64.powf(k as f64 * 0.5))
            .chain(std::iter::once(0.0))
            .map(|p| (p, value(p)))
            .collect();
        let mut sorted = samples.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let decreasing = sorted.windows(2).all(|w| w[1].1 < w[0].1);
        Self { nodes, at_zero, samples: sorted, decreasing }
    }

    pub fn value(&self, power: f64) -> f64 {
        psi_on(&self.nodes, power)
    }

    /// `Ψ(0) = E[|h|²]`.
    pub fn at_zero(&self) -> f64 {
        self.at_zero
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn is_decreasing(&self) -> bool {
        self.decreasing
    }

    /// `[Ψ⁻¹(y)]⁺`: zero power when `y ≥ Ψ(0)`.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        if !(y.is_finite() && y > 0.0) {
            return Err(Error::Contract(format!("Ψ⁻¹ argument {y} must be positive")));
        }
        if y >= self.at_zero {
            return Ok(0.0);
        }
        let m = solve_multiplier(|p| self.value(p), y, Monotonicity::Decreasing)?;
        Ok(m.value)
    }
}

fn psi_on(nodes: &[(f64, f64)], power: f64) -> f64 {
    nodes
        .iter()
        .map(|&(h, w)| {
            let h2 = h * h;
            w * h2 / (h2 * power + 1.0).powi(2)
        })
        .sum()
}

/// Optimal strict-delay allocation without encoder CSI.
pub fn no_csi_strict(
    source: &CompositeSource,
    channel: &FadingChannel,
    power: f64,
) -> Result<AllocationTable> {
    if !(power.is_finite() && power >= 0.0) {
        return Err(Error::Contract(format!("average power {power} must be ≥ 0")));
    }
    let psi = PsiCurve::new(channel);
    let powers_at = |lambda: f64| -> Result<Vec<f64>> {
        source.variances().iter().map(|v| psi.inverse(lambda / v)).collect()
    };
    let avg = |lambda: f64| -> f64 {
        match powers_at(lambda) {
            Ok(p) => p.iter().zip(source.request_probs()).map(|(p, q)| p * q).sum(),
            Err(_) => f64::NAN,
        }
    };
    let multiplier = solve_multiplier(avg, power, Monotonicity::Decreasing)?;
    let powers = powers_at(multiplier.value)?;
    let nodes = channel.nodes(&[]);
    let distortions: Vec<f64> = powers
        .iter()
        .zip(source.variances())
        .map(|(&p, &v)| nodes.iter().map(|&(h, w)| w * transmitted_distortion(p, h, v)).sum())
        .collect();
    let average_power = powers.iter().zip(source.request_probs()).map(|(p, q)| p * q).sum();
    let average_distortion = distortions.iter().zip(source.request_probs()).map(|(d, q)| d * q).sum();
    let mut table = AllocationTable {
        multiplier,
        rule: AllocationRule::NoCsi { powers },
        variances: source.variances().to_vec(),
        entries: Vec::new(),
        average_power,
        average_distortion,
    };
    table.fill_entries(channel);
    Ok(table)
}

/// Two-parameter, two-state example with `σ₂² = 0` and `ĥ₂ = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterexampleSpec {
    pub p1: f64,
    pub variance: f64,
    pub magnitude: f64,
    pub power: f64,
    pub p11: f64,
    pub p12: f64,
    pub p21: f64,
}

const BUDGET_TOL: f64 = 1e-9;

impl CounterexampleSpec {
    pub fn new(
        p1: f64,
        variance: f64,
        magnitude: f64,
        power: f64,
        (p11, p12, p21): (f64, f64, f64),
    ) -> Result<Self> {
        if !(p1 > 0.0 && p1 < 1.0) {
            return Err(Error::Contract(format!("p1 = {p1} must lie in (0, 1)")));
        }
        if !(variance.is_finite() && variance > 0.0) {
            return Err(Error::Contract(format!("variance {variance} must be positive")));
        }
        if !(magnitude.is_finite() && magnitude > 0.0) {
            return Err(Error::Contract(format!("channel magnitude {magnitude} must be positive")));
        }
        if [power, p11, p12, p21].iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::Contract("powers must be finite and ≥ 0".into()));
        }
        let spec = Self { p1, variance, magnitude, power, p11, p12, p21 };
        let spent = spec.spent_power();
        if (spent - power).abs() > BUDGET_TOL * power.max(1.0) {
            return Err(Error::Contract(format!("split spends {spent}, budget is {power}")));
        }
        Ok(spec)
    }

    /// Split giving `P₁₁` to same-parameter pairs and the rest evenly to
    /// `P₁₂ = P₂₁`.
    pub fn from_split(p1: f64, variance: f64, magnitude: f64, power: f64, p11: f64) -> Result<Self> {
        let p2 = 1.0 - p1;
        let cross = (2.0 * power - p11 * p1 * p1) / (2.0 * p1 * p2);
        Self::new(p1, variance, magnitude, power, (p11, cross.max(0.0), cross.max(0.0)))
    }

    /// `P₁₁ = P₁₂ = P₂₁`.
    pub fn equal_split(p1: f64, variance: f64, magnitude: f64, power: f64) -> Result<Self> {
        let p2 = 1.0 - p1;
        let x = 2.0 * power / (p1 * p1 + 2.0 * p1 * p2);
        Self::new(p1, variance, magnitude, power, (x, x, x))
    }

    /// `p₁ = 0.5`, `σ₁² = 1`, `ĥ₁ = 1`, `P = 1`, equal split.
    pub fn reference() -> Self {
        Self::equal_split(0.5, 1.0, 1.0, 1.0).expect("reference split is feasible")
    }

    /// `½[P₁₁p₁² + (P₁₂ + P₂₁)p₁p₂]`.
    pub fn spent_power(&self) -> f64 {
        let p2 = 1.0 - self.p1;
        0.5 * (self.p11 * self.p1 * self.p1 + (self.p12 + self.p21) * self.p1 * p2)
    }
}

/// `(D̄₁, D̄₂)`: the one-to-one scheme and the scheme that repeats the lone
/// parameter-1 measurement over both channels.
pub fn counterexample(spec: &CounterexampleSpec) -> (f64, f64) {
    let (p1, s) = (spec.p1, spec.variance);
    let p2 = 1.0 - p1;
    let h2 = spec.magnitude * spec.magnitude;
    let d = |p: f64| s / (h2 * p + 1.0);
    let same = p1 * p1 * (p1 * d(spec.p11 / 2.0) + p2 * s);
    let diagonal = same + 0.5 * p1 * p2 * (p1 * d(spec.p12) + p1 * d(spec.p21) + 2.0 * p2 * s);
    let repeated = same
        + 0.5
            * p1
            * p2
            * (2.0 * p2 * p2 * s
                + p1 * p1 * d(spec.p12)
                + p1 * p1 * d(spec.p21)
                + 2.0 * p1 * p2 * d(spec.p12 / 2.0)
                + 2.0 * p1 * p2 * d(spec.p21 / 2.0));
    (diagonal, repeated)
}

/// TLB when only the receiver knows the channel.
pub fn tlb_no_csi(source: &CompositeSource, channel: &FadingChannel, power: f64) -> Result<BoundResult> {
    tlb(source, channel, power, false)
}


#[cfg(test)]
mod props {
    use super::*;
    use crate::testkit;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn psi_decreases_and_inverts(ch in testkit::discrete_channel(5), p in 0.0f64..100.0, dp in 0.01f64..10.0) {
            let psi = PsiCurve::new(&ch);
            prop_assert!(psi.is_decreasing());
            prop_assert!(psi.value(p + dp) < psi.value(p));
            let back = psi.inverse(psi.value(p)).unwrap();
            prop_assert!((back - p).abs() < 1e-7 * p.max(1.0), "{back} vs {p}");
        }

        #[test]
        fn no_csi_spends_budget_and_loses_to_csi(src in testkit::source(4), ch in testkit::discrete_channel(4), p in 0.01f64..50.0) {
            let t = no_csi_strict(&src, &ch, p).unwrap();
            prop_assert!((t.average_power - p).abs() < 1e-7 * p.max(1.0));
            let csi = crate::waterfill::strict_delay_optimal(&src, &ch, p).unwrap();
            prop_assert!(t.average_distortion >= csi.average_distortion - 1e-9);
        }

        #[test]
        fn repetition_wins_with_any_cross_power(
            p1 in 0.05f64..0.95,
            var in 0.1f64..10.0,
            h in 0.1f64..5.0,
            power in 0.01f64..20.0,
            a in 0.0f64..0.99,
            s in 0.0f64..1.0,
        ) {
            let p2 = 1.0 - p1;
            let p11 = a * 2.0 * power / (p1 * p1);
            let cross = (1.0 - a) * 2.0 * power / (p1 * p2);
            let spec = CounterexampleSpec::new(p1, var, h, power, (p11, s * cross, (1.0 - s) * cross)).unwrap();
            let (d1, d2) = counterexample(&spec);
            prop_assert!(d2 < d1);
        }
    }
}
