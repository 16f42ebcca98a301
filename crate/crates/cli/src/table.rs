//! The one CSV schema every command writes.

use std::io;

use ltfade_core::EstimatePoint;
use serde::{Deserialize, Serialize};

pub const HEADER: &str = "strategy,d,power_db,mse,mse_ci95,avg_power,mu,blocks,seed";

/// One output row. Analytic rows have `blocks = 0` and `mse_ci95 = 0`;
/// rows that do not depend on the delay have `d = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub strategy: String,
    pub d: usize,
    pub power_db: f64,
    pub mse: f64,
    pub mse_ci95: f64,
    pub avg_power: f64,
    pub mu: f64,
    pub blocks: usize,
    pub seed: u64,
}

impl Row {
    /// Row for a closed-form value.
    pub fn analytic(
        strategy: &str,
        d: usize,
        power_db: f64,
        mse: f64,
        avg_power: f64,
        mu: f64,
        seed: u64,
    ) -> Self {
        Self {
            strategy: strategy.to_string(),
            d,
            power_db,
            mse,
            mse_ci95: 0.0,
            avg_power,
            mu,
            blocks: 0,
            seed,
        }
    }

    pub fn from_estimate(p: &EstimatePoint) -> Self {
        Self {
            strategy: p.strategy.name().to_string(),
            d: p.delay,
            power_db: p.power_db,
            mse: p.mse,
            mse_ci95: p.mse_ci95,
            avg_power: p.avg_power,
            mu: p.mu,
            blocks: p.blocks,
            seed: p.seed,
        }
    }
}

pub fn write_csv<W: io::Write>(rows: &[Row], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(HEADER.split(','))?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(rows: &[Row]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

pub fn read_csv(text: &str) -> csv::Result<Vec<Row>> {
    csv::Reader::from_reader(text.as_bytes()).deserialize().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_keeps_every_bit() {
        let rows = vec![
            Row::analytic("tlb_csi", 0, f64::NEG_INFINITY, 3.0, 0.0, 0.1 + 0.2, 7),
            Row { mse_ci95: f64::INFINITY, blocks: 10, ..Row::analytic("ltsm", 3, 12.5, 1e-7, 10.0, 2.0, 7) },
        ];
        let text = to_csv_string(&rows);
        assert!(text.starts_with(HEADER));
        assert_eq!(read_csv(&text).unwrap(), rows);
        assert_eq!(to_csv_string(&[]).trim(), HEADER);
    }
}
