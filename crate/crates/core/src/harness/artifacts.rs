use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the issuance auction of an epoch was cleared and checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verification {
    /// No coins were auctioned.
    Skipped,
    Central,
    /// Consensus result accepted by the manager.
    Consensus,
    /// Manager rejected the consensus result and cleared centrally.
    Fallback,
    Verified,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub price: f64,
    pub s_max: f64,
    pub s_outstanding: f64,
    pub s_effective: f64,
    pub br: f64,
    pub auc: f64,
    pub collateral_ratio: f64,
    pub control: f64,
    pub mpc_objective: f64,
    pub auction_payments: f64,
    pub consensus_iterations: usize,
    pub verification: Verification,
}

pub const EPOCH_HEADER: [&str; 13] = [
    "epoch",
    "price",
    "s_max",
    "s_outstanding",
    "s_effective",
    "br",
    "auc",
    "collateral_ratio",
    "control",
    "mpc_objective",
    "auction_payments",
    "consensus_iterations",
    "verification",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Population variance of the price column.
    pub price_variance: f64,
    /// Mean absolute distance of the price from its target.
    pub peg_deviation: f64,
    pub mean_price: f64,
    pub total_payments: f64,
    pub mean_consensus_iterations: f64,
}

impl Summary {
    pub fn of(rows: &[EpochRow], target: f64) -> Summary {
        if rows.is_empty() {
            return Summary {
                price_variance: 0.0,
                peg_deviation: 0.0,
                mean_price: 0.0,
                total_payments: 0.0,
                mean_consensus_iterations: 0.0,
            };
        }
        let n = rows.len() as f64;
        let mean = rows.iter().map(|r| r.price).sum::<f64>() / n;
        Summary {
            price_variance: rows.iter().map(|r| (r.price - mean).powi(2)).sum::<f64>() / n,
            peg_deviation: rows.iter().map(|r| (r.price - target).abs()).sum::<f64>() / n,
            mean_price: mean,
            total_payments: rows.iter().map(|r| r.auction_payments).sum(),
            mean_consensus_iterations: rows.iter().map(|r| r.consensus_iterations as f64).sum::<f64>() / n,
        }
    }

    pub fn metrics(&self) -> [(&'static str, f64); 5] {
        [
            ("price_variance", self.price_variance),
            ("peg_deviation", self.peg_deviation),
            ("mean_price", self.mean_price),
            ("total_payments", self.total_payments),
            ("mean_consensus_iterations", self.mean_consensus_iterations),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub rows: Vec<EpochRow>,
    /// Price the run tries to hold; enters the peg deviation.
    pub target: f64,
    pub summary: Summary,
}

impl RunArtifacts {
    pub fn new(rows: Vec<EpochRow>, target: f64) -> Self {
        let summary = Summary::of(&rows, target);
        RunArtifacts { rows, target, summary }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_epochs_csv(&self.rows, w)
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::parse(line, format!("{other:?}")),
    }
}

pub fn write_epochs_csv<W: Write>(rows: &[EpochRow], w: W) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wr.write_record(EPOCH_HEADER).map_err(csv_err)?;
    for row in rows {
        wr.serialize(row).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_epochs_csv<R: Read>(r: R) -> Result<Vec<EpochRow>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.iter().ne(EPOCH_HEADER) {
        return Err(Error::SchemaMismatch(format!(
            "epoch header is {:?}, expected {:?}",
            header.iter().collect::<Vec<_>>(),
            EPOCH_HEADER
        )));
    }
    let mut rows = Vec::new();
    for rec in rd.deserialize::<EpochRow>() {
        let row = rec.map_err(csv_err)?;
        if row.epoch != rows.len() {
            return Err(Error::parse(rows.len() + 2, format!("epoch {} out of sequence", row.epoch)));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_summary_csv<W: Write>(summary: &Summary, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["metric", "value"]).map_err(csv_err)?;
    for (name, v) in summary.metrics() {
        wr.write_record([name.to_string(), v.to_string()]).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricDelta {
    pub metric: &'static str,
    pub a: f64,
    pub b: f64,
    /// `a − b`.
    pub delta: f64,
    /// `a / b`; 1 when both are zero.
    pub ratio: f64,
}

pub fn compare_runs(a: &RunArtifacts, b: &RunArtifacts) -> Result<Vec<MetricDelta>> {
    if a.rows.len() != b.rows.len() {
        return Err(Error::SchemaMismatch(format!(
            "runs have {} and {} epochs",
            a.rows.len(),
            b.rows.len()
        )));
    }
    Ok(a.summary
        .metrics()
        .into_iter()
        .zip(b.summary.metrics())
        .map(|((metric, va), (_, vb))| MetricDelta {
            metric,
            a: va,
            b: vb,
            delta: va - vb,
            ratio: if va == vb { 1.0 } else { va / vb },
        })
        .collect())
}

pub fn write_comparison_csv<W: Write>(deltas: &[MetricDelta], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["metric", "a", "b", "delta", "ratio"]).map_err(csv_err)?;
    for d in deltas {
        wr.write_record([
            d.metric.to_string(),
            d.a.to_string(),
            d.b.to_string(),
            d.delta.to_string(),
            d.ratio.to_string(),
        ])
        .map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}
