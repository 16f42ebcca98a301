//! Marginal laws of the `t`-th smallest of `N` i.i.d. draws.
//!
//! Discrete laws are given as a pmf over indices in ascending order with the
//! convention `F(-1) = 0`. Note that [`CompositeSource`] and discrete
//! [`FadingChannel`]s are stored in descending order; callers reverse them
//! before asking for ascending ranks.

use crate::error::{Error, Result};
use crate::model::{CompositeSource, FadingChannel};
use crate::quadrature;

/// `C(n, k)` in floating point.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

/// `Pr{at least t of N draws fall at or below a point with CDF f}`, which is
/// the CDF of the rank-`t` order statistic.
pub fn rank_cdf(n: usize, t: usize, f: f64) -> f64 {
    if f <= 0.0 {
        return 0.0;
    }
    if f >= 1.0 {
        return 1.0;
    }
    (t..=n).map(|b| binomial(n, b) * f.powi(b as i32) * (1.0 - f).powi((n - b) as i32)).sum()
}

/// Sample size and rank of an order statistic; `1 ≤ rank ≤ sample_size`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderStatistic {
    sample_size: usize,
    rank: usize,
    /// `t·C(N,t)`
    coef: f64,
}

impl OrderStatistic {
    pub fn new(sample_size: usize, rank: usize) -> Result<Self> {
        if sample_size == 0 || rank == 0 || rank > sample_size {
            return Err(Error::Contract(format!("rank {rank} out of range for sample size {sample_size}")));
        }
        Ok(Self { sample_size, rank, coef: rank as f64 * binomial(sample_size, rank) })
    }

    pub fn sample_size(&self) -> usize {
        self.sample_size
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Density of the rank in the CDF domain: the Beta(t, N−t+1) density
    /// `t·C(N,t)·u^{t−1}(1−u)^{N−t}`.
    pub fn unit_density(&self, u: f64) -> f64 {
        let (n, t) = (self.sample_size, self.rank);
        self.coef * u.powi(t as i32 - 1) * (1.0 - u).powi((n - t) as i32)
    }

    /// `t·p(h)·C(N,t)·F(h)^{t−1}(1−F(h))^{N−t}` for a continuous channel.
    pub fn continuous_density(&self, channel: &FadingChannel, h: f64) -> Result<f64> {
        let p = channel
            .density(h)
            .ok_or_else(|| Error::Contract("continuous order density needs a continuous law".into()))?;
        Ok(p * self.unit_density(channel.cdf(h)))
    }

    pub fn cdf(&self, f: f64) -> f64 {
        rank_cdf(self.sample_size, self.rank, f)
    }

    /// Probability that the rank-`t` draw equals ascending index `m`.
    pub fn discrete_pmf(&self, pmf: &[f64], m: usize) -> Result<f64> {
        if m >= pmf.len() {
            return Err(Error::Contract(format!("index {m} outside support of size {}", pmf.len())));
        }
        let upper: f64 = pmf[..=m].iter().sum();
        let lower: f64 = pmf[..m].iter().sum();
        Ok((self.cdf(upper.min(1.0)) - self.cdf(lower)).max(0.0))
    }

    /// The whole rank-`t` pmf over ascending indices.
    pub fn discrete_pmf_all(&self, pmf: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(pmf.len());
        let mut lower = 0.0;
        let mut prev = 0.0;
        for (m, p) in pmf.iter().enumerate() {
            let upper = if m + 1 == pmf.len() { 1.0 } else { (lower + p).min(1.0) };
            let c = self.cdf(upper);
            out.push((c - prev).max(0.0));
            prev = c;
            lower += p;
        }
        out
    }

    /// Law of the rank-`t` channel magnitude as weighted points, same
    /// representation as [`FadingChannel::nodes`].
    pub fn channel_nodes(&self, channel: &FadingChannel, breaks: &[f64]) -> Vec<(f64, f64)> {
        match channel {
            FadingChannel::Discrete(states) => {
                let ascending: Vec<f64> = states.iter().rev().map(|s| s.prob).collect();
                let pmf = self.discrete_pmf_all(&ascending);
                states.iter().rev().zip(pmf).map(|(s, w)| (s.magnitude, w)).collect()
            }
            FadingChannel::Rayleigh { .. } => {
                let cuts: Vec<f64> = breaks.iter().map(|&b| channel.cdf(b)).collect();
                quadrature::unit_nodes(&cuts)
                    .into_iter()
                    .map(|(u, w)| (channel.quantile(u), w * self.unit_density(u)))
                    .collect()
            }
        }
    }

    /// Rank-`t` law of the requested parameter among `N` requests, where rank
    /// 1 is the smallest variance. Returned in the source's own (descending
    /// variance) index order.
    pub fn parameter_pmf(&self, source: &CompositeSource) -> Vec<f64> {
        let ascending: Vec<f64> = source.request_probs().iter().rev().copied().collect();
        let mut pmf = self.discrete_pmf_all(&ascending);
        pmf.reverse();
        pmf
    }
}
