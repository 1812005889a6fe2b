use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// One estimator run on one replicate. Column order of the results CSV
/// follows the field order; `runtime_ms` is kept out of it so that reruns
/// are byte-identical, and goes to the timings file instead.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub kind: String,
    pub n: usize,
    pub model: String,
    /// `N / C(n,2)`, or `p` without replacement.
    pub alpha: f64,
    /// Comparisons actually observed in the replicate.
    pub budget: u64,
    pub lambda: f64,
    pub replicate: usize,
    pub seed: u64,
    pub estimator: String,
    pub stages: usize,
    pub lambda_hat: Option<f64>,
    pub d_kt: u64,
    pub l1: u64,
    pub linf: u64,
    #[serde(skip)]
    pub runtime_ms: f64,
}

#[derive(Serialize)]
struct TimingRow<'a> {
    kind: &'a str,
    n: usize,
    model: &'a str,
    alpha: f64,
    lambda: f64,
    replicate: usize,
    estimator: &'a str,
    runtime_ms: f64,
}

pub fn write_rows<W: Write>(rows: &[ResultRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_rows_to(rows: &[ResultRow], path: &Path) -> Result<()> {
    write_rows(rows, std::fs::File::create(path)?)
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    Ok(rdr.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn write_timings<W: Write>(rows: &[ResultRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(TimingRow {
            kind: &r.kind,
            n: r.n,
            model: &r.model,
            alpha: r.alpha,
            lambda: r.lambda,
            replicate: r.replicate,
            estimator: &r.estimator,
            runtime_ms: r.runtime_ms,
        })?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Stats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    /// Sample statistics; `std` is 0 for a single value.
    pub fn of(values: &[f64]) -> Stats {
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
        } else {
            0.0
        };
        Stats {
            mean,
            std,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Aggregate over the replicates of one cell and estimator.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub kind: String,
    pub n: usize,
    pub model: String,
    pub alpha: f64,
    pub lambda: f64,
    pub estimator: String,
    pub count: usize,
    pub d_kt: Stats,
    pub l1: Stats,
    pub linf: Stats,
    pub lambda_hat: Option<Stats>,
}

impl SummaryRow {
    pub const CSV_HEADER: &'static str = "kind,n,model,alpha,lambda,estimator,count,\
d_kt_mean,d_kt_std,d_kt_min,d_kt_max,l1_mean,l1_std,l1_min,l1_max,\
linf_mean,linf_std,linf_min,linf_max,lambda_hat_mean,lambda_hat_std";

    pub fn csv_row(&self) -> String {
        let s = |x: &Stats| format!("{},{},{},{}", x.mean, x.std, x.min, x.max);
        let lh = self
            .lambda_hat
            .map(|x| format!("{},{}", x.mean, x.std))
            .unwrap_or_else(|| ",".to_string());
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.kind,
            self.n,
            self.model,
            self.alpha,
            self.lambda,
            self.estimator,
            self.count,
            s(&self.d_kt),
            s(&self.l1),
            s(&self.linf),
            lh
        )
    }
}

type CellKey = (String, usize, String, u64, u64, String);

/// One summary row per (kind, cell, estimator), in first-appearance order.
pub fn summarize(rows: &[ResultRow]) -> Result<Vec<SummaryRow>> {
    if rows.is_empty() {
        return Err(HarnessError::config("no rows to summarize"));
    }
    let mut order: Vec<CellKey> = Vec::new();
    let mut groups: BTreeMap<CellKey, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        let key = (
            r.kind.clone(),
            r.n,
            r.model.clone(),
            r.alpha.to_bits(),
            r.lambda.to_bits(),
            r.estimator.clone(),
        );
        let entry = groups.entry(key.clone()).or_default();
        if entry.is_empty() {
            order.push(key);
        }
        entry.push(r);
    }
    Ok(order
        .into_iter()
        .map(|key| {
            let g = &groups[&key];
            let col =
                |f: fn(&ResultRow) -> f64| Stats::of(&g.iter().map(|r| f(r)).collect::<Vec<_>>());
            let lh: Vec<f64> = g.iter().filter_map(|r| r.lambda_hat).collect();
            SummaryRow {
                kind: key.0.clone(),
                n: key.1,
                model: key.2.clone(),
                alpha: f64::from_bits(key.3),
                lambda: f64::from_bits(key.4),
                estimator: key.5.clone(),
                count: g.len(),
                d_kt: col(|r| r.d_kt as f64),
                l1: col(|r| r.l1 as f64),
                linf: col(|r| r.linf as f64),
                lambda_hat: (lh.len() == g.len()).then(|| Stats::of(&lh)),
            }
        })
        .collect())
}

pub fn write_summary<W: Write>(summary: &[SummaryRow], mut w: W) -> Result<()> {
    writeln!(w, "{}", SummaryRow::CSV_HEADER)?;
    for s in summary {
        writeln!(w, "{}", s.csv_row())?;
    }
    Ok(())
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(HarnessError::config("slope needs at least two points"));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(HarnessError::config("slope needs positive coordinates"));
    }
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = points.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(HarnessError::config("slope needs distinct x values"));
    }
    Ok(sxy / sxx)
}

/// Slope of mean `d_KT` against `n` for one estimator.
pub fn slope_vs_n(summary: &[SummaryRow], estimator: &str) -> Result<f64> {
    let pts: Vec<_> = summary
        .iter()
        .filter(|s| s.estimator == estimator)
        .map(|s| (s.n as f64, s.d_kt.mean))
        .collect();
    loglog_slope(&pts)
}

/// Slope of mean `d_KT` against `1/α` for one estimator.
pub fn slope_vs_inverse_alpha(summary: &[SummaryRow], estimator: &str) -> Result<f64> {
    let pts: Vec<_> = summary
        .iter()
        .filter(|s| s.estimator == estimator)
        .map(|s| (1.0 / s.alpha, s.d_kt.mean))
        .collect();
    loglog_slope(&pts)
}
