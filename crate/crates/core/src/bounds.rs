//! Distortion lower bounds.
//!
//! The TLB evaluates the distortion-rate function of the composite source at
//! the ergodic capacity of the channel. The LLB lets a linear encoder see a
//! whole window of measurements and channels in advance and optimally match
//! the sorted measurements to the strongest channels.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{CompositeSource, FadingChannel};
use crate::parallel::{solve_parallel, ParallelProblem};
use crate::waterfill::{
    ergodic_capacity, ergodic_capacity_no_csi, reverse_waterfill, Capacity, RateAllocation,
};

/// Default cap on the number of look-ahead measurements searched by the LLB.
pub const DEFAULT_U_MAX: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundKind {
    TlbCsi,
    TlbNoCsi,
    Llb,
}

impl BoundKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::TlbCsi => "tlb_csi",
            Self::TlbNoCsi => "tlb_no_csi",
            Self::Llb => "llb",
        }
    }
}

/// `D̄*(d, ū, P)` for one window length `ū`.
#[derive(Debug, Clone, PartialEq)]
pub struct LlbPoint {
    pub measurements: usize,
    pub distortion: Option<f64>,
    pub multiplier: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundDetail {
    Tlb {
        capacity: Capacity,
        rates: RateAllocation,
    },
    Llb {
        curve: Vec<LlbPoint>,
        best_u: usize,
        /// Water level of the maximising window.
        zeta: f64,
        /// The maximum sits on the search cap.
        capped: bool,
        failures: Vec<(usize, String)>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundResult {
    pub kind: BoundKind,
    pub power: f64,
    pub distortion: f64,
    pub detail: BoundDetail,
}

impl BoundResult {
    /// `true` when the LLB maximum was found on the search cap.
    pub fn capped(&self) -> bool {
        matches!(self.detail, BoundDetail::Llb { capped: true, .. })
    }
}

/// Theoretical lower bound with or without encoder CSI.
pub fn tlb(
    source: &CompositeSource,
    channel: &FadingChannel,
    power: f64,
    encoder_csi: bool,
) -> Result<BoundResult> {
    let capacity = if encoder_csi {
        ergodic_capacity(channel, power)?
    } else {
        ergodic_capacity_no_csi(channel, power)?
    };
    let rates = reverse_waterfill(source, capacity.bits)?;
    Ok(BoundResult {
        kind: if encoder_csi { BoundKind::TlbCsi } else { BoundKind::TlbNoCsi },
        power,
        distortion: rates.average_distortion,
        detail: BoundDetail::Tlb { capacity, rates },
    })
}

/// Linear-transmission lower bound for delay `d`: the largest over
/// `ū ∈ [1, u_max]` of the ordered parallel-channel optimum with `ū`
/// measurements riding the strongest `ū` of `d + ū − 1` channels.
pub fn llb(
    source: &CompositeSource,
    channel: &FadingChannel,
    delay: usize,
    power: f64,
    u_max: usize,
) -> Result<BoundResult> {
    if delay == 0 {
        return Err(Error::Contract("delay must be at least 1".into()));
    }
    if u_max == 0 {
        return Err(Error::Contract("search cap must be at least 1".into()));
    }
    if !(power.is_finite() && power >= 0.0) {
        return Err(Error::Contract(format!("average power {power} must be ≥ 0")));
    }
    let solved: Vec<(usize, Result<(f64, f64)>)> = (1..=u_max)
        .into_par_iter()
        .map(|u| {
            let problem = ParallelProblem { source, channel, measurements: u, offset: delay - 1, power };
            (u, solve_parallel(&problem).map(|s| (s.average_distortion, s.multiplier.value)))
        })
        .collect();
    let mut curve = Vec::with_capacity(u_max);
    let mut failures = Vec::new();
    let mut best: Option<(usize, f64, f64)> = None;
    for (u, r) in solved {
        match r {
            Ok((d, lambda)) => {
                if best.is_none_or(|(_, bd, _)| d > bd) {
                    best = Some((u, d, lambda));
                }
                curve.push(LlbPoint { measurements: u, distortion: Some(d), multiplier: Some(lambda) });
            }
            Err(e) => {
                failures.push((u, e.to_string()));
                curve.push(LlbPoint { measurements: u, distortion: None, multiplier: None });
            }
        }
    }
    let (best_u, distortion, zeta) = best.ok_or_else(|| {
        Error::Numerical(format!("no window length solved; first failure: {}", failures[0].1))
    })?;
    Ok(BoundResult {
        kind: BoundKind::Llb,
        power,
        distortion,
        detail: BoundDetail::Llb { curve, best_u, zeta, capped: best_u == u_max && u_max > 1, failures },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tlb_zero_power_is_prior() {
        let src = CompositeSource::reference();
        for ch in [FadingChannel::reference_discrete(), FadingChannel::reference_rayleigh()] {
            for csi in [true, false] {
                assert!((tlb(&src, &ch, 0.0, csi).unwrap().distortion - 3.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn tlb_single_state() {
        // C = 1 bit, one component: D = σ²·2^{-2C}
        let src = CompositeSource::new(vec![2.0], vec![1.0]).unwrap();
        let ch = FadingChannel::discrete(vec![(1.0, 1.0)]).unwrap();
        let r = tlb(&src, &ch, 3.0, false).unwrap();
        assert!((r.distortion - 0.5).abs() < 1e-9);
    }

    #[test]
    fn llb_without_diversity_is_flat() {
        let src = CompositeSource::new(vec![2.0], vec![1.0]).unwrap();
        let ch = FadingChannel::discrete(vec![(1.5, 1.0)]).unwrap();
        let r = llb(&src, &ch, 3, 4.0, 8).unwrap();
        let expect = 2.0 / (1.5f64.powi(2) * 4.0 + 1.0);
        assert!((r.distortion - expect).abs() < 1e-9);
        if let BoundDetail::Llb { curve, .. } = &r.detail {
            for p in curve {
                assert!((p.distortion.unwrap() - expect).abs() < 1e-9);
            }
        }
        assert!(llb(&src, &ch, 0, 1.0, 4).is_err());
    }

    #[test]
    fn llb_non_increasing_in_delay() {
        let src = CompositeSource::reference();
        let ch = FadingChannel::reference_rayleigh();
        let values: Vec<f64> =
            [1, 3, 5, 9].iter().map(|&d| llb(&src, &ch, d, 10.0, 16).unwrap().distortion).collect();
        assert!(values.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{values:?}");
    }

    #[test]
    fn strict_delay_llb_is_the_single_window() {
        let src = CompositeSource::reference();
        let ch = FadingChannel::reference_discrete();
        let r = llb(&src, &ch, 1, 10.0, 8).unwrap();
        let strict = crate::waterfill::strict_delay_optimal(&src, &ch, 10.0).unwrap();
        assert!((r.distortion - strict.average_distortion).abs() < 1e-10);
        assert!(!r.capped());
        // with spare channels the curve keeps rising toward the cap
        assert!(llb(&src, &ch, 3, 10.0, 8).unwrap().capped());
    }

    #[test]
    fn high_power_tlbs_meet() {
        let src = CompositeSource::reference();
        let ch = FadingChannel::reference_discrete();
        let a = tlb(&src, &ch, 1e4, true).unwrap().distortion;
        let b = tlb(&src, &ch, 1e4, false).unwrap().distortion;
        assert!(b >= a && (b - a) / a < 0.01);
    }
}
