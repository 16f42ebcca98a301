//! Monte Carlo estimates of distortion and power with batch-means
//! confidence intervals.
//!
//! Blocks are split into contiguous batches that run in parallel; per-batch
//! sums are merged in batch order, so results do not depend on the thread
//! count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{CompositeSource, FadingChannel};
use crate::rng::{point_key, BlockStreams, Purpose};
use crate::strategies::{
    calibrate_mu, run_block, run_strict_block, BlockSimResult, EstimatorMode, StrategyConfig, StrategyKind,
};
use crate::waterfill::strict_delay_optimal;

/// Number of batches behind a confidence interval.
pub const CI_BATCHES: usize = 30;
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SimStrategy {
    /// Optimal strict-delay rule with the analytic water level.
    StrictDelay,
    Lthm,
    Ltsm,
}

impl SimStrategy {
    pub fn name(self) -> &'static str {
        match self {
            Self::StrictDelay => "strict",
            Self::Lthm => "lthm",
            Self::Ltsm => "ltsm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "strict" | "strict-delay" | "strict_delay" => Some(Self::StrictDelay),
            "lthm" => Some(Self::Lthm),
            "ltsm" => Some(Self::Ltsm),
            _ => None,
        }
    }

    fn kind(self) -> Option<StrategyKind> {
        match self {
            Self::StrictDelay => None,
            Self::Lthm => Some(StrategyKind::Lthm),
            Self::Ltsm => Some(StrategyKind::Ltsm),
        }
    }
}

/// `10^{dB/10}`; `-∞` dB is zero power.
pub fn db_to_linear(db: f64) -> f64 {
    if db == f64::NEG_INFINITY {
        0.0
    } else {
        10f64.powf(db / 10.0)
    }
}

pub fn linear_to_db(p: f64) -> f64 {
    10.0 * p.log10()
}

/// One grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSpec {
    pub strategy: SimStrategy,
    pub delay: usize,
    pub power_db: f64,
    pub blocks: usize,
    /// Blocks in the calibration batch; defaults to `blocks` when zero.
    pub calibration_blocks: usize,
    pub seed: u64,
    pub mode: EstimatorMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub strategies: Vec<SimStrategy>,
    pub delays: Vec<usize>,
    pub powers_db: Vec<f64>,
    pub blocks: usize,
    pub calibration_blocks: usize,
    pub seed: u64,
    pub mode: EstimatorMode,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() || self.delays.is_empty() || self.powers_db.is_empty() {
            return Err(Error::Contract("sweep grids must be non-empty".into()));
        }
        if self.blocks == 0 {
            return Err(Error::Contract("blocks must be at least 1".into()));
        }
        if self.delays.contains(&0) {
            return Err(Error::Contract("delays must be at least 1".into()));
        }
        if let Some(p) = self.powers_db.iter().find(|p| p.is_nan() || **p == f64::INFINITY) {
            return Err(Error::Contract(format!("power {p} dB is not usable")));
        }
        Ok(())
    }

    /// Grid points in sweep order. The strict-delay rule ignores the delay
    /// grid and is run once per power at `d = 1`.
    pub fn points(&self) -> Vec<PointSpec> {
        let mut out = Vec::new();
        for &strategy in &self.strategies {
            let delays: &[usize] = if strategy == SimStrategy::StrictDelay { &[1] } else { &self.delays };
            for &delay in delays {
                for &power_db in &self.powers_db {
                    out.push(PointSpec {
                        strategy,
                        delay,
                        power_db,
                        blocks: self.blocks,
                        calibration_blocks: self.calibration_blocks,
                        seed: self.seed,
                        mode: self.mode,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatePoint {
    pub strategy: SimStrategy,
    pub delay: usize,
    pub power_db: f64,
    pub mse: f64,
    /// 95% half-width; `∞` when there are too few blocks for batch means.
    pub mse_ci95: f64,
    pub avg_power: f64,
    pub avg_power_ci95: f64,
    pub mu: f64,
    pub blocks: usize,
    pub seed: u64,
    pub mode: EstimatorMode,
    /// Set when calibration or simulation failed at this point.
    pub failure: Option<String>,
}

impl EstimatePoint {
    pub fn reliable(&self) -> bool {
        self.failure.is_none() && self.mse_ci95.is_finite()
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    sq_error: f64,
    measurements: f64,
    power: f64,
    slots: f64,
}

impl Sums {
    fn add(&mut self, r: &BlockSimResult) {
        self.sq_error += r.total_sq_error();
        self.measurements += r.measurements() as f64;
        self.power += r.total_power();
        self.slots += r.slots as f64;
    }
}

/// Ratio estimate with a batch-means 95% half-width.
fn ratio_ci(batches: &[Sums], num: fn(&Sums) -> f64, den: fn(&Sums) -> f64) -> (f64, f64) {
    let total_num: f64 = batches.iter().map(num).sum();
    let total_den: f64 = batches.iter().map(den).sum();
    let mean = total_num / total_den;
    if batches.len() < CI_BATCHES {
        return (mean, f64::INFINITY);
    }
    let means: Vec<f64> = batches.iter().map(|b| num(b) / den(b)).collect();
    let k = means.len() as f64;
    let avg = means.iter().sum::<f64>() / k;
    let var = means.iter().map(|x| (x - avg).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, Z95 * (var / k).sqrt())
}

/// Runs `blocks` evaluation blocks through `block` and aggregates them.
fn evaluate<F>(blocks: usize, seed: u64, key: u64, block: F) -> (f64, f64, f64, f64)
where
    F: Fn(&mut BlockStreams) -> BlockSimResult + Sync,
{
    let batches = if blocks >= CI_BATCHES { CI_BATCHES } else { 1 };
    let sums: Vec<Sums> = (0..batches)
        .into_par_iter()
        .map(|k| {
            let start = k * blocks / batches;
            let end = (k + 1) * blocks / batches;
            let mut s = Sums::default();
            for b in start..end {
                let mut streams = BlockStreams::new(seed, Purpose::Evaluate, key, b as u64);
                s.add(&block(&mut streams));
            }
            s
        })
        .collect();
    let (mse, mse_ci) = ratio_ci(&sums, |s| s.sq_error, |s| s.measurements);
    let (pow, pow_ci) = ratio_ci(&sums, |s| s.power, |s| s.slots);
    (mse, mse_ci, pow, pow_ci)
}

/// Calibrates (when needed) and simulates one grid point.
pub fn run_point(
    spec: &PointSpec,
    source: &CompositeSource,
    channel: &FadingChannel,
) -> Result<EstimatePoint> {
    if spec.blocks == 0 {
        return Err(Error::Contract("blocks must be at least 1".into()));
    }
    let power = db_to_linear(spec.power_db);
    let key = point_key(power);
    let mu = point_mu(spec, source, channel, power)?;
    let (mse, mse_ci95, avg_power, avg_power_ci95) = match spec.strategy.kind() {
        None => evaluate(spec.blocks, spec.seed, key, |st| {
            run_strict_block(mu, source, channel, st, spec.mode, None)
        }),
        Some(kind) => {
            let config = StrategyConfig::new(kind, spec.delay, power, source, channel)?.with_mu(mu)?;
            evaluate(spec.blocks, spec.seed, key, |st| {
                run_block(&config, source, channel, st, spec.mode, None)
            })
        }
    };
    if !mse.is_finite() || !avg_power.is_finite() {
        return Err(Error::Numerical("simulation produced a non-finite estimate".into()));
    }
    Ok(EstimatePoint {
        strategy: spec.strategy,
        delay: spec.delay,
        power_db: spec.power_db,
        mse,
        mse_ci95,
        avg_power,
        avg_power_ci95,
        mu,
        blocks: spec.blocks,
        seed: spec.seed,
        mode: spec.mode,
        failure: None,
    })
}

/// Power-rule multiplier used at a point: the analytic water level for the
/// strict-delay rule, a calibrated `μ` for the buffered strategies.
pub fn point_mu(
    spec: &PointSpec,
    source: &CompositeSource,
    channel: &FadingChannel,
    power: f64,
) -> Result<f64> {
    match spec.strategy.kind() {
        None => Ok(strict_delay_optimal(source, channel, power)?.multiplier.value),
        Some(kind) => {
            let config = StrategyConfig::new(kind, spec.delay, power, source, channel)?;
            let blocks = if spec.calibration_blocks == 0 { spec.blocks } else { spec.calibration_blocks };
            Ok(calibrate_mu(&config, source, channel, power, blocks, spec.seed, point_key(power))?.mu)
        }
    }
}

/// Runs every grid point; failed points are returned with `failure` set.
pub fn run_sweep(
    spec: &SweepSpec,
    source: &CompositeSource,
    channel: &FadingChannel,
) -> Result<Vec<EstimatePoint>> {
    spec.validate()?;
    Ok(spec
        .points()
        .iter()
        .map(|p| {
            run_point(p, source, channel).unwrap_or_else(|e| EstimatePoint {
                strategy: p.strategy,
                delay: p.delay,
                power_db: p.power_db,
                mse: f64::NAN,
                mse_ci95: f64::INFINITY,
                avg_power: f64::NAN,
                avg_power_ci95: f64::INFINITY,
                mu: f64::NAN,
                blocks: p.blocks,
                seed: p.seed,
                mode: p.mode,
                failure: Some(e.to_string()),
            })
        })
        .collect())
}

/// Analytic and noise-sampled estimates at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeComparison {
    pub analytic: EstimatePoint,
    pub sampled: EstimatePoint,
    /// `|Δ| ≤ 4·√(ci₁² + ci₂²)`.
    pub agree: bool,
}

pub fn compare_modes(
    spec: &PointSpec,
    source: &CompositeSource,
    channel: &FadingChannel,
) -> Result<ModeComparison> {
    let analytic = run_point(&PointSpec { mode: EstimatorMode::Analytic, ..*spec }, source, channel)?;
    let sampled = run_point(&PointSpec { mode: EstimatorMode::NoiseSampled, ..*spec }, source, channel)?;
    let band = 4.0 * analytic.mse_ci95.hypot(sampled.mse_ci95);
    let agree = (analytic.mse - sampled.mse).abs() <= band;
    Ok(ModeComparison { analytic, sampled, agree })
}

/// Like [`compare_modes`] but reports disagreement as a validation error.
pub fn ensure_agreement(
    spec: &PointSpec,
    source: &CompositeSource,
    channel: &FadingChannel,
) -> Result<ModeComparison> {
    let c = compare_modes(spec, source, channel)?;
    if !c.agree {
        return Err(Error::Validation(format!(
            "{} d={} at {} dB: analytic {} ± {} vs sampled {} ± {}",
            spec.strategy.name(),
            spec.delay,
            spec.power_db,
            c.analytic.mse,
            c.analytic.mse_ci95,
            c.sampled.mse,
            c.sampled.mse_ci95
        )));
    }
    Ok(c)
}
