//! Result records: one JSON document per run, plus optional CSV tables.

use std::path::{Path, PathBuf};
use std::time::Instant;

use driftlab::RngStream;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{ExperimentConfig, Params};
use crate::CliError;

/// A numeric table written as CSV next to the JSON record.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str], rows: Vec<Vec<f64>>) -> Self {
        Self { name: name.into(), header: header.iter().map(|h| h.to_string()).collect(), rows }
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(e.into()))?;
        w.write_record(&self.header).map_err(|e| CliError::Io(e.into()))?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string())).map_err(|e| CliError::Io(e.into()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// What one replica of an experiment produces.
#[derive(Debug, Clone)]
pub struct ReplicaOutput {
    pub value: f64,
    pub output: Value,
    pub tables: Vec<Table>,
}

impl ReplicaOutput {
    pub fn new(value: f64, output: Value) -> Self {
        Self { value, output, tables: Vec::new() }
    }

    pub fn with_table(mut self, t: Table) -> Self {
        self.tables.push(t);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaRecord {
    pub replica: u32,
    pub seed: u64,
    pub stream: u64,
    /// The experiment's metric; `null` when it is not finite.
    pub value: Option<f64>,
    pub output: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub metric: String,
    /// Replicas with a finite metric.
    pub count: usize,
    pub mean: Option<f64>,
    pub stddev: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl Summary {
    fn new(metric: &str, values: &[Option<f64>]) -> Self {
        let xs: Vec<f64> = values.iter().flatten().cloned().collect();
        let (mean, var) = driftlab::stats::mean_var(&xs);
        let some = |v: f64| (!xs.is_empty()).then_some(v);
        Self {
            metric: metric.into(),
            count: xs.len(),
            mean: some(mean),
            stddev: (xs.len() > 1).then(|| var.sqrt()),
            min: some(xs.iter().cloned().fold(f64::INFINITY, f64::min)),
            max: some(xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    /// The resolved config; running it again reproduces `replicas`.
    pub config: ExperimentConfig,
    pub claim: String,
    pub version: String,
    pub wall_time_s: f64,
    pub replicas: Vec<ReplicaRecord>,
    pub summary: Summary,
}

pub struct RunOutput {
    pub record: ResultRecord,
    /// Tables per replica, in replica order.
    pub tables: Vec<Vec<Table>>,
}

/// Validates `config` and runs its replicas on streams `(seed, 0..replicas)`.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let (config, exp) = config.resolve()?;
    let start = Instant::now();
    let params = Params(&config.parameters);
    let outs = driftlab::par::map_range(config.replicas as usize, |r| (exp.run)(&params, RngStream::new(config.seed, r as u64)));
    let mut replicas = Vec::with_capacity(outs.len());
    let mut tables = Vec::with_capacity(outs.len());
    for (r, out) in outs.into_iter().enumerate() {
        let out = out.map_err(|e| CliError::from_core(e, r))?;
        replicas.push(ReplicaRecord {
            replica: r as u32,
            seed: config.seed,
            stream: r as u64,
            value: out.value.is_finite().then_some(out.value),
            output: out.output,
        });
        tables.push(out.tables);
    }
    let values: Vec<Option<f64>> = replicas.iter().map(|r| r.value).collect();
    let record = ResultRecord {
        claim: exp.claim.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        wall_time_s: start.elapsed().as_secs_f64(),
        summary: Summary::new(exp.metric, &values),
        replicas,
        config,
    };
    Ok(RunOutput { record, tables })
}

/// Writes the record as pretty JSON and, if `csv`, every table as
/// `<stem>.<table>.r<replica>.csv` beside it. Returns the CSV paths.
pub fn write(out: &RunOutput, path: &Path, csv: bool) -> Result<Vec<PathBuf>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let text = serde_json::to_string_pretty(&out.record).expect("records serialize");
    std::fs::write(path, text + "\n")?;
    let mut written = Vec::new();
    if csv {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("result");
        for (r, tables) in out.tables.iter().enumerate() {
            for t in tables {
                let p = path.with_file_name(format!("{stem}.{}.r{r}.csv", t.name));
                t.write_csv(&p)?;
                written.push(p);
            }
        }
    }
    Ok(written)
}
