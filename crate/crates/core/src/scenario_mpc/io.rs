//! Text format for scenario problems.
//!
//! ```toml
//! horizon = 2
//! lambda = 0.5
//! consensus_horizon = 1
//! input_penalty = 0.1
//! x0 = [1.0]
//!
//! [system]
//! a = [[0.9]]          # rows of A
//! b = [[-1.0]]
//! c_y = [[1.0]]
//! c_z = [[1.0]]
//!
//! [inputs]
//! lower = [[-1.0], [-1.0]]   # one row per step
//! upper = [[1.0], [1.0]]
//!
//! [[scenario]]
//! noise = [[0.1], [0.0]]     # one row per step
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ocp::ScenarioOcp;
use super::system::LinearSystem;
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OcpFile {
    horizon: usize,
    lambda: f64,
    consensus_horizon: usize,
    #[serde(default)]
    input_penalty: f64,
    x0: Vec<f64>,
    system: SystemFile,
    inputs: InputsFile,
    scenario: Vec<ScenarioFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    c_y: Vec<Vec<f64>>,
    c_z: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InputsFile {
    lower: Vec<Vec<f64>>,
    upper: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    noise: Vec<Vec<f64>>,
}

pub(crate) fn matrix_from_rows(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::DimensionMismatch(format!("{name} has ragged rows")));
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        cols,
        rows.iter().flatten().copied(),
    ))
}

pub(crate) fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn vectors(rows: &[Vec<f64>]) -> Vec<DVector<f64>> {
    rows.iter().map(|r| DVector::from_column_slice(r)).collect()
}

impl ScenarioOcp {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let f: OcpFile = toml::from_str(text).map_err(|e| Error::parse(0, e.to_string()))?;
        let sys = LinearSystem::new(
            matrix_from_rows("a", &f.system.a)?,
            matrix_from_rows("b", &f.system.b)?,
            matrix_from_rows("c_y", &f.system.c_y)?,
            matrix_from_rows("c_z", &f.system.c_z)?,
        )?;
        let ocp = ScenarioOcp {
            sys,
            x0: DVector::from_column_slice(&f.x0),
            horizon: f.horizon,
            noise: f.scenario.iter().map(|s| vectors(&s.noise)).collect(),
            lambda_tradeoff: f.lambda,
            u_lower: vectors(&f.inputs.lower),
            u_upper: vectors(&f.inputs.upper),
            consensus_horizon: f.consensus_horizon,
            input_penalty: f.input_penalty,
        };
        ocp.validate()?;
        Ok(ocp)
    }

    pub fn to_toml_string(&self) -> String {
        let rows = |v: &[DVector<f64>]| -> Vec<Vec<f64>> {
            v.iter().map(|x| x.iter().copied().collect()).collect()
        };
        let f = OcpFile {
            horizon: self.horizon,
            lambda: self.lambda_tradeoff,
            consensus_horizon: self.consensus_horizon,
            input_penalty: self.input_penalty,
            x0: self.x0.iter().copied().collect(),
            system: SystemFile {
                a: matrix_rows(&self.sys.a),
                b: matrix_rows(&self.sys.b),
                c_y: matrix_rows(&self.sys.c_y),
                c_z: matrix_rows(&self.sys.c_z),
            },
            inputs: InputsFile {
                lower: rows(&self.u_lower),
                upper: rows(&self.u_upper),
            },
            scenario: self
                .noise
                .iter()
                .map(|w| ScenarioFile { noise: rows(w) })
                .collect(),
        };
        toml::to_string(&f).expect("scenario problem serialises")
    }
}
