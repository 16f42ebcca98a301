//! Delay-constrained linear transmission of composite Gaussian sources over
//! fading channels.
//!
//! A sensor observes one of `J` Gaussian parameters per time slot and sends
//! a scaled copy of each measurement over a fading channel within `d` slots.
//! The crate computes the optimal strict-delay allocation, simulates the
//! buffered hard/soft matching strategies, and evaluates lower bounds on the
//! achievable mean squared error.

pub mod bounds;
pub mod config;
pub mod error;
pub mod model;
pub mod no_csi;
pub mod order_stats;
pub mod parallel;
pub mod quadrature;
pub mod rng;
pub mod sim;
pub mod strategies;
#[cfg(test)]
mod testkit;
pub mod waterfill;

pub use bounds::{llb, tlb, BoundDetail, BoundKind, BoundResult, LlbPoint, DEFAULT_U_MAX};
pub use config::{ChannelConfig, ModelConfig};
pub use error::{Error, Result};
pub use model::{
    build_partition, classify, sample_step, ChannelPartition, ChannelState, CompositeSource, FadingChannel,
    StateShares, Step,
};
pub use no_csi::{counterexample, no_csi_strict, tlb_no_csi, CounterexampleSpec, PsiCurve};
pub use order_stats::OrderStatistic;
pub use parallel::{evaluate_fixed_mapping, solve_parallel, DiagonalSolution, ParallelProblem, RankLaw};
pub use rng::{BlockStreams, Purpose};
pub use sim::{
    compare_modes, db_to_linear, ensure_agreement, linear_to_db, run_point, run_sweep, EstimatePoint,
    ModeComparison, PointSpec, SimStrategy, SweepSpec,
};
pub use strategies::{
    asymptotic_matched, buffer_depth, calibrate_mu, run_block, run_strict_block, select_measurement,
    AsymptoticMatchedResult, BlockSimResult, BufferState, Calibration, EstimatorMode, SlotRecord,
    StrategyConfig, StrategyKind,
};
pub use waterfill::{
    ergodic_capacity, ergodic_capacity_no_csi, reverse_waterfill, solve_multiplier, strict_delay_optimal,
    AllocationEntry, AllocationRule, AllocationTable, Capacity, CellMeasure, Multiplier, RateAllocation,
};
