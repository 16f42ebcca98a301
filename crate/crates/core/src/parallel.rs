//! Optimal diagonal linear transmission of `N` measurements over parallel
//! fading channels, with the encoder knowing every channel.
//!
//! The encoder sorts measurements by variance and channels by magnitude and
//! sends the rank-`t` measurement on the rank-`t + ē` channel, where `ē`
//! weakest channels are left unused. Sorting only changes the marginal laws
//! of each rank, so the problem reduces to one water-fill over the
//! rank-averaged `(σ, |h|)` measure with the rank-`t` parameter and channel
//! treated as independent.

use crate::error::{Error, Result};
use crate::model::{CompositeSource, FadingChannel};
use crate::order_stats::OrderStatistic;
use crate::waterfill::{
    csi_gain, csi_kinks, solve_refined, transmitted_distortion, Cell, CellMeasure, Multiplier,
};

#[derive(Debug, Clone, Copy)]
pub struct ParallelProblem<'a> {
    pub source: &'a CompositeSource,
    pub channel: &'a FadingChannel,
    /// Number of measurements `N` (and of used channels).
    pub measurements: usize,
    /// Number `ē` of weakest channels discarded out of `N + ē`.
    pub offset: usize,
    pub power: f64,
}

impl ParallelProblem<'_> {
    fn validate(&self) -> Result<()> {
        if self.measurements == 0 {
            return Err(Error::Contract("parallel problem needs N ≥ 1".into()));
        }
        if !(self.power.is_finite() && self.power >= 0.0) {
            return Err(Error::Contract(format!("average power {} must be ≥ 0", self.power)));
        }
        Ok(())
    }

    fn channels(&self) -> usize {
        self.measurements + self.offset
    }
}

/// Marginal laws of rank `t` (1-based, ascending variance / magnitude).
#[derive(Debug, Clone, PartialEq)]
pub struct RankLaw {
    pub rank: usize,
    /// Rank-`t` parameter pmf in the source's storage order.
    pub param_pmf: Vec<f64>,
    /// Rank-`(t + ē)` channel magnitude law as weighted points.
    pub channel_nodes: Vec<(f64, f64)>,
}

fn rank_laws(problem: &ParallelProblem<'_>, breaks: &[f64]) -> Result<Vec<RankLaw>> {
    let n = problem.measurements;
    (1..=n)
        .map(|t| {
            let param = OrderStatistic::new(n, t)?;
            let chan = OrderStatistic::new(problem.channels(), t + problem.offset)?;
            Ok(RankLaw {
                rank: t,
                param_pmf: param.parameter_pmf(problem.source),
                channel_nodes: chan.channel_nodes(problem.channel, breaks),
            })
        })
        .collect()
}

/// Rank-averaged measure `(1/N) Σ_t p_{M(t)}(m)·p_{H(t+ē)}(h)` over cells.
fn pooled_measure(source: &CompositeSource, laws: &[RankLaw]) -> CellMeasure {
    let n = laws.len() as f64;
    let nodes = laws[0].channel_nodes.len();
    let mut cells = Vec::with_capacity(source.len() * nodes);
    for m in 0..source.len() {
        let sd = source.std_dev(m);
        for k in 0..nodes {
            let magnitude = laws[0].channel_nodes[k].0;
            let weight: f64 =
                laws.iter().map(|law| law.param_pmf[m] * law.channel_nodes[k].1).sum::<f64>() / n;
            if weight > 0.0 && magnitude > 0.0 {
                cells.push(Cell { param: m, std_dev: sd, magnitude, weight });
            }
        }
    }
    CellMeasure { cells }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalSolution {
    pub multiplier: Multiplier,
    pub ranks: Vec<RankLaw>,
    pub variances: Vec<f64>,
    pub average_power: f64,
    pub average_distortion: f64,
}

impl DiagonalSolution {
    /// Encoder gain of rank `t` at channel magnitude `|h|` for parameter `m`.
    pub fn gain(&self, _rank: usize, magnitude: f64, param: usize) -> f64 {
        csi_gain(self.multiplier.value, magnitude, self.variances[param].sqrt())
    }

    /// Power and distortion of arbitrary per-rank gains on this solution's
    /// rank laws.
    pub fn evaluate<G>(&self, gains: G) -> (f64, f64)
    where
        G: Fn(usize, f64, usize) -> f64,
    {
        evaluate_on(&self.ranks, &self.variances, gains)
    }
}

fn evaluate_on<G>(laws: &[RankLaw], variances: &[f64], gains: G) -> (f64, f64)
where
    G: Fn(usize, f64, usize) -> f64,
{
    let n = laws.len() as f64;
    let mut power = 0.0;
    let mut distortion = 0.0;
    for law in laws {
        for (m, &pm) in law.param_pmf.iter().enumerate() {
            if pm == 0.0 {
                continue;
            }
            let var = variances[m];
            for &(h, w) in &law.channel_nodes {
                let f = gains(law.rank, h, m);
                let p = f * f * var;
                power += pm * w * p;
                distortion += pm * w * transmitted_distortion(p, h, var);
            }
        }
    }
    (power / n, distortion / n)
}

/// Solves the ordered diagonal allocation with one multiplier for all ranks.
pub fn solve_parallel(problem: &ParallelProblem<'_>) -> Result<DiagonalSolution> {
    problem.validate()?;
    let sds: Vec<f64> = (0..problem.source.len()).map(|m| problem.source.std_dev(m)).collect();
    let (measure, multiplier, breaks) = solve_refined(
        problem.channel.is_continuous(),
        |breaks| {
            let laws = rank_laws(problem, breaks).expect("ranks validated");
            pooled_measure(problem.source, &laws)
        },
        |l| csi_kinks(l, sds.iter().copied()),
        problem.power,
    )?;
    let lambda = multiplier.value;
    Ok(DiagonalSolution {
        multiplier,
        ranks: rank_laws(problem, &breaks)?,
        variances: problem.source.variances().to_vec(),
        average_power: measure.power(lambda),
        average_distortion: measure.distortion(lambda),
    })
}

/// Exact rank-averaged power and distortion of user-supplied per-rank gains
/// `gains(t, |h|, m)`.
pub fn evaluate_fixed_mapping<G>(problem: &ParallelProblem<'_>, gains: G) -> Result<(f64, f64)>
where
    G: Fn(usize, f64, usize) -> f64,
{
    problem.validate()?;
    let laws = rank_laws(problem, &[])?;
    Ok(evaluate_on(&laws, problem.source.variances(), gains))
}
