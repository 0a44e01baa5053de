use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::benchmark::BenchmarkConfig;
use super::method::Method;
use crate::analysis::{quartiles, Quartiles};
use crate::{Error, Result};

pub const REPORT_VERSION: &str = "dear-report/1";

/// One method on one instance under one seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub seed: u64,
    pub method: Method,
    pub instance_id: usize,
    /// Re-verified against the classifier.
    pub success: bool,
    pub l1_cost: f64,
    pub cv_count: usize,
    /// Neighbourhood agreement in `[0, 1]`; successes only.
    pub ynn: Option<f64>,
    pub iterations: usize,
    pub runtime_ms: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub instances: usize,
    pub successes: usize,
    pub errors: usize,
    pub sr: f64,
    /// Over successful outcomes only.
    pub cost: Option<Quartiles>,
    /// Raw successful costs in record order, for boxplots.
    pub costs: Vec<f64>,
    /// Fraction of outcomes touching an immutable feature.
    pub cv_rate: f64,
    pub mean_cv: f64,
    pub mean_ynn: Option<f64>,
}

impl MethodSummary {
    fn from_records<'a>(method: Method, records: impl Iterator<Item = &'a MetricRecord>) -> Self {
        let records: Vec<&MetricRecord> = records.filter(|r| r.method == method).collect();
        let n = records.len();
        let ok: Vec<&&MetricRecord> = records.iter().filter(|r| r.success).collect();
        let costs: Vec<f64> = ok.iter().map(|r| r.l1_cost).collect();
        let ynn: Vec<f64> = ok.iter().filter_map(|r| r.ynn).collect();
        let frac = |count: usize| if n == 0 { 0.0 } else { count as f64 / n as f64 };
        MethodSummary {
            method,
            instances: n,
            successes: ok.len(),
            errors: records.iter().filter(|r| r.error.is_some()).count(),
            sr: frac(ok.len()),
            cost: quartiles(&costs),
            costs,
            cv_rate: frac(records.iter().filter(|r| r.cv_count > 0).count()),
            mean_cv: if n == 0 { 0.0 } else { records.iter().map(|r| r.cv_count as f64).sum::<f64>() / n as f64 },
            mean_ynn: (!ynn.is_empty()).then(|| ynn.iter().sum::<f64>() / ynn.len() as f64),
        }
    }

    pub fn median_cost(&self) -> Option<f64> {
        self.cost.map(|q| q.median)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub methods: Vec<MethodSummary>,
}

/// Aggregated benchmark results. Holds no timings, so equal seeds and
/// configuration give byte-identical JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub version: String,
    pub config: BenchmarkConfig,
    pub target: f64,
    pub instances: Vec<usize>,
    pub per_seed: Vec<SeedSummary>,
    pub pooled: Vec<MethodSummary>,
}

impl BenchmarkReport {
    pub fn aggregate(config: &BenchmarkConfig, target: f64, instances: &[usize], records: &[MetricRecord]) -> Self {
        let per_seed = config
            .seeds
            .iter()
            .map(|&seed| SeedSummary {
                seed,
                methods: config
                    .methods
                    .iter()
                    .map(|&m| MethodSummary::from_records(m, records.iter().filter(|r| r.seed == seed)))
                    .collect(),
            })
            .collect();
        let pooled = config.methods.iter().map(|&m| MethodSummary::from_records(m, records.iter())).collect();
        BenchmarkReport {
            version: REPORT_VERSION.to_string(),
            config: config.clone(),
            target,
            instances: instances.to_vec(),
            per_seed,
            pooled,
        }
    }

    pub fn pooled(&self, method: Method) -> Option<&MethodSummary> {
        self.pooled.iter().find(|s| s.method == method)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: BenchmarkReport = serde_json::from_str(text)?;
        if report.version != REPORT_VERSION {
            return Err(Error::BundleVersion(report.version));
        }
        Ok(report)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

pub fn write_records_csv<W: Write>(writer: W, records: &[MetricRecord]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    for r in records {
        csv.serialize(r)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn save_records_csv(path: impl AsRef<Path>, records: &[MetricRecord]) -> Result<()> {
    write_records_csv(std::fs::File::create(path)?, records)
}
