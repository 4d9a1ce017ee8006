//! Instance files and outcome tables.
//!
//! ```toml
//! y_max = [10.0, 8.0]
//!
//! [[cost]]
//! k0 = 0.5
//! k2 = 0.1
//!
//! [[user]]
//! a = [0.0, 0.0]
//! b = [4.0, 3.0]
//! c = [1.0, 0.5]
//! x_min = [0.0, 0.0]
//! x_max = [5.0, 5.0]
//! # x = [2.0, 3.0]   reported demand; defaults to the valuation peak
//! ```
//!
//! Users take ids in file order. The number of slots is the length of `y_max`.

use serde::{Deserialize, Serialize};

use super::probe::AuctionInstance;
use super::solve::AuctionOutcome;
use super::types::{check_shapes, DemandReport, IssuanceBounds, IssuanceCost, SlotDemand, Valuation, ValuationModel};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    y_max: Vec<f64>,
    cost: Vec<IssuanceCost>,
    user: Vec<UserFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UserFile {
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    x_min: Vec<f64>,
    x_max: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x: Option<Vec<f64>>,
}

fn toml_error(e: toml::de::Error, src: &str) -> Error {
    let line = e
        .span()
        .map(|s| src[..s.start.min(src.len())].matches('\n').count() + 1)
        .unwrap_or(0);
    Error::Parse {
        line,
        msg: e.message().to_string(),
    }
}

impl AuctionInstance {
    pub fn from_toml_str(src: &str) -> Result<Self> {
        let file: InstanceFile = toml::from_str(src).map_err(|e| toml_error(e, src))?;
        let slots = file.y_max.len();
        if file.cost.len() != slots {
            return Err(Error::SchemaMismatch(format!(
                "{} cost entries for {slots} slots",
                file.cost.len()
            )));
        }
        let mut reports = Vec::new();
        let mut users = Vec::new();
        for (i, u) in file.user.iter().enumerate() {
            let lens = [u.a.len(), u.b.len(), u.c.len(), u.x_min.len(), u.x_max.len()];
            if lens.iter().any(|&l| l != slots) || u.x.as_ref().is_some_and(|x| x.len() != slots) {
                return Err(Error::SchemaMismatch(format!("user {i} does not list {slots} slots")));
            }
            let vals: Vec<Valuation> = (0..slots).map(|t| Valuation::new(u.a[t], u.b[t], u.c[t])).collect();
            let slot_demands = (0..slots)
                .map(|t| {
                    let x = match &u.x {
                        Some(x) => x[t],
                        None => vals[t].argmax_in(u.x_min[t], u.x_max[t]),
                    };
                    SlotDemand::new(u.x_min[t], x, u.x_max[t])
                })
                .collect();
            reports.push(DemandReport { user: i, slots: slot_demands });
            users.push(vals);
        }
        let inst = AuctionInstance {
            reports,
            valuations: ValuationModel { users, cost: file.cost },
            bounds: IssuanceBounds { y_max: file.y_max },
        };
        check_shapes(&inst.reports, &inst.valuations, &inst.bounds)?;
        Ok(inst)
    }

    pub fn to_toml_string(&self) -> String {
        let slots = self.valuations.slots();
        let file = InstanceFile {
            y_max: self.bounds.y_max.clone(),
            cost: self.valuations.cost.clone(),
            user: self
                .reports
                .iter()
                .zip(&self.valuations.users)
                .map(|(r, vs)| UserFile {
                    a: vs.iter().map(|v| v.a).collect(),
                    b: vs.iter().map(|v| v.b).collect(),
                    c: vs.iter().map(|v| v.c).collect(),
                    x_min: r.slots.iter().map(|s| s.x_min).collect(),
                    x_max: r.slots.iter().map(|s| s.x_max).collect(),
                    x: Some((0..slots).map(|t| r.slots[t].x).collect()),
                })
                .collect(),
        };
        toml::to_string(&file).expect("instance serialises")
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct OutcomeRow {
    user: usize,
    slot: usize,
    allocation: f64,
    payment: f64,
}

/// `user,slot,allocation,payment` rows in user-major order.
pub fn write_outcome_csv<W: std::io::Write>(outcome: &AuctionOutcome, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for (i, (xs, ps)) in outcome.allocation.iter().zip(&outcome.payments).enumerate() {
        for (t, (&x, &p)) in xs.iter().zip(ps).enumerate() {
            out.serialize(OutcomeRow { user: i, slot: t, allocation: x, payment: p })
                .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads outcome rows back as `(allocation, payments)` matrices.
pub fn read_outcome_csv<R: std::io::Read>(r: R) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for (k, rec) in rdr.deserialize::<OutcomeRow>().enumerate() {
        rows.push(rec.map_err(|e| Error::Parse { line: k + 2, msg: e.to_string() })?);
    }
    let users = rows.iter().map(|r| r.user + 1).max().unwrap_or(0);
    let slots = rows.iter().map(|r| r.slot + 1).max().unwrap_or(0);
    if rows.len() != users * slots {
        return Err(Error::SchemaMismatch(format!(
            "{} rows do not cover {users} users × {slots} slots",
            rows.len()
        )));
    }
    let mut alloc = vec![vec![f64::NAN; slots]; users];
    let mut pay = vec![vec![f64::NAN; slots]; users];
    for r in rows {
        if !alloc[r.user][r.slot].is_nan() {
            return Err(Error::SchemaMismatch(format!("duplicate row for user {} slot {}", r.user, r.slot)));
        }
        alloc[r.user][r.slot] = r.allocation;
        pay[r.user][r.slot] = r.payment;
    }
    Ok((alloc, pay))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
y_max = [4.0]

[[cost]]
k0 = 0.1
k2 = 0.2

[[user]]
a = [0.0]
b = [4.0]
c = [1.0]
x_min = [0.0]
x_max = [4.0]

[[user]]
a = [0.0]
b = [3.0]
c = [0.5]
x_min = [0.0]
x_max = [5.0]
x = [3.0]
"#;

    #[test]
    fn instance_round_trip() {
        let inst = AuctionInstance::from_toml_str(SAMPLE).unwrap();
        assert_eq!(inst.reports[0].slots[0].x, 2.0);
        let back = AuctionInstance::from_toml_str(&inst.to_toml_string()).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn bad_instances_are_rejected() {
        assert!(matches!(
            AuctionInstance::from_toml_str("y_max = [1.0]\ncost = []\nuser = []\n"),
            Err(Error::SchemaMismatch(_))
        ));
        assert!(matches!(
            AuctionInstance::from_toml_str("y_max = [1.0]\nbogus = 3\n"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn outcome_csv_round_trip() {
        let inst = AuctionInstance::from_toml_str(SAMPLE).unwrap();
        let out = inst.run().unwrap();
        let mut buf = Vec::new();
        write_outcome_csv(&out, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("user,slot,allocation,payment"));
        let (a, p) = read_outcome_csv(buf.as_slice()).unwrap();
        assert_eq!(a, out.allocation);
        assert_eq!(p, out.payments);
    }
}
