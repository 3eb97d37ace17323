//! Cross-seed reports over directories of run logs.

use std::io::Write;
use std::path::Path;

use super::HarnessError;
use crate::analysis::{
    aggregate, read_runlog_dir, significance_protocol, write_aggregate, AggregateRow, Column,
    ProtocolResult,
};

pub const BIN_SIZE: usize = 1000;

fn binned_runs(dir: &Path, column: Column) -> Result<Vec<Vec<f64>>, HarnessError> {
    Ok(read_runlog_dir(dir)?
        .iter()
        .map(|log| log.binned(column, BIN_SIZE))
        .collect())
}

/// Per-bin quartiles of the extrinsic reward across all seeds in `dir`.
pub fn aggregate_dir(dir: &Path) -> Result<Vec<AggregateRow>, HarnessError> {
    Ok(aggregate(&binned_runs(dir, Column::ExtrinsicReward)?))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareReport {
    pub curve_a: Vec<AggregateRow>,
    pub curve_b: Vec<AggregateRow>,
    pub protocol: ProtocolResult,
    pub first_shift_step: u64,
}

impl CompareReport {
    /// `1` when A's post-shift mean is higher, `-1` when lower, `0` on a tie.
    pub fn direction(&self) -> i8 {
        let (a, b) = (self.protocol.mean_a(), self.protocol.mean_b());
        if a > b {
            1
        } else if a < b {
            -1
        } else {
            0
        }
    }
}

/// Rank-sum comparison of the binned extrinsic rewards of two run sets.
pub fn compare(dir_a: &Path, dir_b: &Path, first_shift_step: u64) -> Result<CompareReport, HarnessError> {
    let a = binned_runs(dir_a, Column::ExtrinsicReward)?;
    let b = binned_runs(dir_b, Column::ExtrinsicReward)?;
    Ok(CompareReport {
        curve_a: aggregate(&a),
        curve_b: aggregate(&b),
        protocol: significance_protocol(&a, &b, first_shift_step, BIN_SIZE)?,
        first_shift_step,
    })
}

/// Writes `aggregate_a.csv`, `aggregate_b.csv` and `compare.csv` into `out`.
pub fn write_compare_report(report: &CompareReport, out: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(out)?;
    write_aggregate(&report.curve_a, std::fs::File::create(out.join("aggregate_a.csv"))?)?;
    write_aggregate(&report.curve_b, std::fs::File::create(out.join("aggregate_b.csv"))?)?;
    let p = &report.protocol;
    let mut f = std::fs::File::create(out.join("compare.csv"))?;
    writeln!(f, "first_shift_step,n_a,n_b,mean_a,mean_b,statistic,p_value,exact")?;
    writeln!(
        f,
        "{},{},{},{},{},{},{},{}",
        report.first_shift_step,
        p.sample_a.len(),
        p.sample_b.len(),
        p.mean_a(),
        p.mean_b(),
        p.test.statistic,
        p.test.p_value,
        p.test.exact
    )?;
    Ok(())
}
