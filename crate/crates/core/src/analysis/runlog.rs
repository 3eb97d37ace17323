//! Per-step run log persisted as `seed_<S>.csv`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::AnalysisError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Column {
    Step,
    ExtrinsicReward,
    MixedReward,
    IntrinsicObs,
    IntrinsicRewardModel,
    ForwardLoss,
    InverseLoss,
    RewardModelLoss,
    Epsilon,
}

impl Column {
    pub const ALL: [Column; 9] = [
        Column::Step,
        Column::ExtrinsicReward,
        Column::MixedReward,
        Column::IntrinsicObs,
        Column::IntrinsicRewardModel,
        Column::ForwardLoss,
        Column::InverseLoss,
        Column::RewardModelLoss,
        Column::Epsilon,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Column::Step => "step",
            Column::ExtrinsicReward => "extrinsic_reward",
            Column::MixedReward => "mixed_reward",
            Column::IntrinsicObs => "intrinsic_obs",
            Column::IntrinsicRewardModel => "intrinsic_reward_model",
            Column::ForwardLoss => "forward_loss",
            Column::InverseLoss => "inverse_loss",
            Column::RewardModelLoss => "reward_model_loss",
            Column::Epsilon => "epsilon",
        }
    }

    pub fn from_name(name: &str) -> Option<Column> {
        Column::ALL.into_iter().find(|c| c.name() == name)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunRow {
    pub step: u64,
    pub extrinsic_reward: f64,
    pub mixed_reward: f64,
    pub intrinsic_obs: Option<f64>,
    pub intrinsic_reward_model: Option<f64>,
    pub forward_loss: Option<f64>,
    pub inverse_loss: Option<f64>,
    pub reward_model_loss: Option<f64>,
    pub epsilon: Option<f64>,
}

impl RunRow {
    pub fn get(&self, column: Column) -> Option<f64> {
        match column {
            Column::Step => Some(self.step as f64),
            Column::ExtrinsicReward => Some(self.extrinsic_reward),
            Column::MixedReward => Some(self.mixed_reward),
            Column::IntrinsicObs => self.intrinsic_obs,
            Column::IntrinsicRewardModel => self.intrinsic_reward_model,
            Column::ForwardLoss => self.forward_loss,
            Column::InverseLoss => self.inverse_loss,
            Column::RewardModelLoss => self.reward_model_loss,
            Column::Epsilon => self.epsilon,
        }
    }

    fn fields(&self) -> [String; 9] {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        [
            self.step.to_string(),
            self.extrinsic_reward.to_string(),
            self.mixed_reward.to_string(),
            opt(self.intrinsic_obs),
            opt(self.intrinsic_reward_model),
            opt(self.forward_loss),
            opt(self.inverse_loss),
            opt(self.reward_model_loss),
            opt(self.epsilon),
        ]
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunLog {
    pub seed: u64,
    pub config_hash: String,
    pub rows: Vec<RunRow>,
}

impl RunLog {
    /// Values of a column with missing entries skipped.
    pub fn series(&self, column: Column) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.get(column)).collect()
    }

    pub fn binned(&self, column: Column, bin_size: usize) -> Vec<f64> {
        super::bin_average(&self.series(column), bin_size)
    }
}

/// Streaming CSV writer; rows are flushed to the sink as they are written.
pub struct RunLogWriter<W: Write> {
    inner: csv::Writer<W>,
    last_step: Option<u64>,
    rows: usize,
}

impl RunLogWriter<BufWriter<File>> {
    pub fn create(path: &Path) -> Result<Self, AnalysisError> {
        Self::new(BufWriter::new(File::create(path)?))
    }
}

impl<W: Write> RunLogWriter<W> {
    pub fn new(sink: W) -> Result<Self, AnalysisError> {
        let mut inner = csv::Writer::from_writer(sink);
        inner.write_record(Column::ALL.map(Column::name))?;
        Ok(Self {
            inner,
            last_step: None,
            rows: 0,
        })
    }

    pub fn write(&mut self, row: &RunRow) -> Result<(), AnalysisError> {
        if let Some(prev) = self.last_step {
            if row.step <= prev {
                return Err(AnalysisError::Schema(format!(
                    "step {} does not follow step {prev}",
                    row.step
                )));
            }
        }
        self.inner.write_record(row.fields())?;
        self.last_step = Some(row.step);
        self.rows += 1;
        if self.rows % 1000 == 0 {
            self.inner.flush()?;
        }
        Ok(())
    }

    pub fn rows_written(&self) -> usize {
        self.rows
    }

    pub fn flush(&mut self) -> Result<(), AnalysisError> {
        self.inner.flush()?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, AnalysisError> {
        self.inner.flush()?;
        self.inner
            .into_inner()
            .map_err(|e| AnalysisError::Io(std::io::Error::other(e.to_string())))
    }
}

fn parse_field(raw: &str, column: Column, line: u64) -> Result<Option<f64>, AnalysisError> {
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse::<f64>().map(Some).map_err(|_| {
        AnalysisError::Schema(format!("line {line}: `{}` value `{raw}` is not a number", column.name()))
    })
}

/// Parses a run log. Every column must be present in the header.
pub fn parse_runlog<R: std::io::Read>(reader: R, seed: u64) -> Result<RunLog, AnalysisError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut index = [0usize; 9];
    for (slot, column) in index.iter_mut().zip(Column::ALL) {
        *slot = headers
            .iter()
            .position(|h| h == column.name())
            .ok_or_else(|| AnalysisError::MissingColumn(column.name().to_string()))?;
    }
    let mut rows: Vec<RunRow> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let line = i as u64 + 2;
        let mut vals = [None; 9];
        for ((v, &idx), column) in vals.iter_mut().zip(&index).zip(Column::ALL) {
            *v = parse_field(record.get(idx).unwrap_or(""), column, line)?;
        }
        let required = |k: usize| {
            vals[k].ok_or_else(|| {
                AnalysisError::Schema(format!("line {line}: `{}` is empty", Column::ALL[k].name()))
            })
        };
        let step_raw = record.get(index[0]).unwrap_or("");
        let step: u64 = step_raw
            .parse()
            .map_err(|_| AnalysisError::Schema(format!("line {line}: step `{step_raw}` is not an integer")))?;
        if let Some(prev) = rows.last() {
            if step <= prev.step {
                return Err(AnalysisError::Schema(format!("line {line}: step {step} is not increasing")));
            }
        }
        rows.push(RunRow {
            step,
            extrinsic_reward: required(1)?,
            mixed_reward: required(2)?,
            intrinsic_obs: vals[3],
            intrinsic_reward_model: vals[4],
            forward_loss: vals[5],
            inverse_loss: vals[6],
            reward_model_loss: vals[7],
            epsilon: vals[8],
        });
    }
    Ok(RunLog {
        seed,
        config_hash: String::new(),
        rows,
    })
}

fn seed_from_name(path: &Path) -> Option<u64> {
    path.file_name()?
        .to_str()?
        .strip_prefix("seed_")?
        .strip_suffix(".csv")?
        .parse()
        .ok()
}

fn meta_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.toml")
}

/// Reads `seed_<S>.csv` plus its `.meta.toml` sidecar when present.
pub fn read_runlog(path: &Path) -> Result<RunLog, AnalysisError> {
    let seed = seed_from_name(path).unwrap_or(0);
    let mut log = parse_runlog(File::open(path)?, seed)?;
    if let Ok(text) = std::fs::read_to_string(meta_path(path)) {
        if let Ok(meta) = text.parse::<toml::Table>() {
            if let Some(h) = meta.get("config_hash").and_then(|v| v.as_str()) {
                log.config_hash = h.to_string();
            }
        }
    }
    Ok(log)
}

/// All `seed_<S>.csv` logs in a directory, ordered by seed.
pub fn read_runlog_dir(dir: &Path) -> Result<Vec<RunLog>, AnalysisError> {
    let mut paths: Vec<(u64, PathBuf)> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter_map(|p| seed_from_name(&p).map(|s| (s, p)))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(AnalysisError::NoRuns(dir.display().to_string()));
    }
    paths.iter().map(|(_, p)| read_runlog(p)).collect()
}
