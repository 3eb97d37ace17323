//! Evaluation pipeline: binning, seed aggregation, smoothing, rank-sum
//! significance testing and loss-trace changepoint detection.

mod changepoint;
mod runlog;
mod wilcoxon;

use std::io::Write;

use thiserror::Error;

pub use changepoint::{detect_changepoints, detect_in_bins, ChangepointReport, Detection, DetectorParams};
pub use runlog::{parse_runlog, read_runlog, read_runlog_dir, Column, RunLog, RunLogWriter, RunRow};
pub use wilcoxon::{midranks, wilcoxon_exact, wilcoxon_normal, wilcoxon_rank_sum, RankSum};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("series too short: need at least {needed} bins, found {found}")]
    TooShort { needed: usize, found: usize },
    #[error("no bins after step {first_shift_step} (logs cover {bins} bins)")]
    NoPostShiftBins { first_shift_step: u64, bins: usize },
    #[error("run log is missing column `{0}`")]
    MissingColumn(String),
    #[error("run log schema: {0}")]
    Schema(String),
    #[error("no run logs in {0}")]
    NoRuns(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Means of consecutive complete bins; a trailing partial bin is dropped.
pub fn bin_average(series: &[f64], bin_size: usize) -> Vec<f64> {
    series
        .chunks_exact(bin_size)
        .map(|c| c.iter().sum::<f64>() / bin_size as f64)
        .collect()
}

/// Linearly interpolated quantile of sorted data (inclusive convention).
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// `(q25, median, q75)`.
pub fn iqr(values: &[f64]) -> (f64, f64, f64) {
    assert!(!values.is_empty(), "iqr of an empty sample");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    (
        quantile_sorted(&v, 0.25),
        quantile_sorted(&v, 0.5),
        quantile_sorted(&v, 0.75),
    )
}

/// `s_0 = x_0`, `s_t = kappa s_{t-1} + (1 - kappa) x_t`.
pub fn ema(series: &[f64], kappa: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(series.len());
    let mut s = match series.first() {
        Some(&x) => x,
        None => return out,
    };
    for (t, &x) in series.iter().enumerate() {
        if t > 0 {
            s = kappa * s + (1.0 - kappa) * x;
        }
        out.push(s);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AggregateRow {
    pub bin: usize,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

/// Per-bin quartiles across seeds, over the bins all seeds cover.
pub fn aggregate(curves: &[Vec<f64>]) -> Vec<AggregateRow> {
    let len = curves.iter().map(Vec::len).min().unwrap_or(0);
    (0..len)
        .map(|bin| {
            let values: Vec<f64> = curves.iter().map(|c| c[bin]).collect();
            let (q25, median, q75) = iqr(&values);
            AggregateRow { bin, q25, median, q75 }
        })
        .collect()
}

pub fn write_aggregate<W: Write>(rows: &[AggregateRow], out: W) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin", "q25", "median", "q75"])?;
    for r in rows {
        w.write_record([
            r.bin.to_string(),
            r.q25.to_string(),
            r.median.to_string(),
            r.q75.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolResult {
    pub test: RankSum,
    pub sample_a: Vec<f64>,
    pub sample_b: Vec<f64>,
}

impl ProtocolResult {
    pub fn mean_a(&self) -> f64 {
        self.sample_a.iter().sum::<f64>() / self.sample_a.len() as f64
    }

    pub fn mean_b(&self) -> f64 {
        self.sample_b.iter().sum::<f64>() / self.sample_b.len() as f64
    }
}

/// Every 10th bin starting at the first bin that begins at or after
/// `first_shift_step`, pooled across seeds.
pub fn post_shift_sample(curves: &[Vec<f64>], first_shift_step: u64, bin_size: usize) -> Vec<f64> {
    let first = first_shift_step.div_ceil(bin_size as u64) as usize;
    curves
        .iter()
        .flat_map(|c| c.iter().skip(first).step_by(10).copied())
        .collect()
}

/// Rank-sum comparison of two sets of binned runs after the first shift.
pub fn significance_protocol(
    runs_a: &[Vec<f64>],
    runs_b: &[Vec<f64>],
    first_shift_step: u64,
    bin_size: usize,
) -> Result<ProtocolResult, AnalysisError> {
    let sample_a = post_shift_sample(runs_a, first_shift_step, bin_size);
    let sample_b = post_shift_sample(runs_b, first_shift_step, bin_size);
    if sample_a.is_empty() || sample_b.is_empty() {
        let bins = runs_a.iter().chain(runs_b).map(Vec::len).max().unwrap_or(0);
        return Err(AnalysisError::NoPostShiftBins { first_shift_step, bins });
    }
    Ok(ProtocolResult {
        test: wilcoxon_rank_sum(&sample_a, &sample_b),
        sample_a,
        sample_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binning_examples() {
        assert_eq!(bin_average(&[2.5; 3000], 1000), vec![2.5; 3]);
        let alt: Vec<f64> = (0..2000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert_eq!(bin_average(&alt, 1000), vec![0.0, 0.0]);
        assert_eq!(bin_average(&[1.0; 1999], 1000).len(), 1);
    }

    #[test]
    fn quartile_examples() {
        assert_eq!(iqr(&[4.0, 4.0, 4.0]), (4.0, 4.0, 4.0));
        assert_eq!(iqr(&[5.0, 1.0, 3.0, 2.0, 4.0]), (2.0, 3.0, 4.0));
        assert_eq!(iqr(&[7.5]), (7.5, 7.5, 7.5));
        assert_eq!(iqr(&[1.0, 2.0, 3.0, 4.0]), (1.75, 2.5, 3.25));
    }

    #[test]
    fn ema_examples() {
        let x = [0.3, -1.0, 2.0];
        assert_eq!(ema(&x, 0.0), x.to_vec());
        assert_eq!(ema(&[2.0; 5], 0.9), vec![2.0; 5]);
        let mut step = vec![0.0];
        step.extend([1.0; 10]);
        let s = ema(&step, 0.9);
        for k in 1..=10 {
            assert!((s[k] - (1.0 - 0.9f64.powi(k as i32))).abs() < 1e-12);
        }
    }

    #[test]
    fn protocol_examples() {
        let a: Vec<Vec<f64>> = (0..5)
            .map(|s| (0..200).map(|b| ((s * 31 + b) as f64 * 0.7).sin()).collect())
            .collect();
        assert!(significance_protocol(&a, &a, 50_000, 1000).unwrap().test.p_value >= 0.99);
        let b: Vec<Vec<f64>> = a.iter().map(|c| c.iter().map(|v| v + 10.0).collect()).collect();
        let r = significance_protocol(&b, &a, 50_000, 1000).unwrap();
        assert!(r.test.p_value < 0.01);
        assert_eq!(r.sample_a.len(), 5 * 15);
        assert!(significance_protocol(&a, &a, 500_000, 1000).is_err());
    }

    #[test]
    fn aggregate_orders_quartiles() {
        let curves = vec![vec![1.0, 5.0], vec![3.0, 2.0], vec![2.0, 9.0, 4.0]];
        let rows = aggregate(&curves);
        assert_eq!(rows.len(), 2);
        assert_eq!((rows[0].q25, rows[0].median, rows[0].q75), (1.5, 2.0, 2.5));
        let mut buf = Vec::new();
        write_aggregate(&rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("bin,q25,median,q75\n0,1.5,2,2.5\n"));
    }
}
