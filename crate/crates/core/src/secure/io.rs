use super::committed::{Finding, VerificationReport};
use crate::error::{Error, Result};

/// `node,round,check,detail` rows, one per finding.
pub fn write_report_csv<W: std::io::Write>(report: &VerificationReport, w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(["node", "round", "check", "detail"])
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    for f in &report.findings {
        out.serialize(f).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_report_csv<R: std::io::Read>(r: R) -> Result<Vec<Finding>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers().map_err(|e| Error::parse(1, e.to_string()))?.clone();
    if headers.iter().ne(["node", "round", "check", "detail"]) {
        return Err(Error::SchemaMismatch(format!("unexpected report header {headers:?}")));
    }
    rdr.deserialize::<Finding>()
        .enumerate()
        .map(|(k, rec)| rec.map_err(|e| Error::parse(k + 2, e.to_string())))
        .collect()
}
