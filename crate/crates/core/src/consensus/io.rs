use super::run::RoundRecord;
use crate::error::{Error, Result};

/// Per-round `iteration,primal,dual,active_users,active_edges` rows.
pub fn write_trace_csv<W: std::io::Write>(trace: &[RoundRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in trace {
        out.serialize(r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: std::io::Read>(r: R) -> Result<Vec<RoundRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers().map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?.clone();
    let expected = ["iteration", "primal", "dual", "active_users", "active_edges"];
    if headers.iter().ne(expected.iter().copied()) {
        return Err(Error::SchemaMismatch(format!("unexpected trace header {headers:?}")));
    }
    rdr.deserialize()
        .enumerate()
        .map(|(k, rec)| rec.map_err(|e| Error::Parse { line: k + 2, msg: e.to_string() }))
        .collect()
}
