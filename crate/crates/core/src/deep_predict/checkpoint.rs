//! Plain-text checkpoints.
//!
//! ```text
//! monpol-net v1
//! layers 2
//! layer 3 4 relu        # inputs, outputs, activation
//! 0.1 0.2 0.3           # one line per output row
//! ...
//! layer 4 1 identity
//! 0.5 -0.2 0.0 1.0
//! ```

use std::fmt::Write;

use nalgebra::DMatrix;

use super::network::{Activation, LayeredNetwork};
use crate::error::{Error, Result};

const MAGIC: &str = "monpol-net v1";
const MAX_WIDTH: usize = 1 << 16;

impl LayeredNetwork {
    pub fn to_checkpoint(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "layers {}", self.layers());
        for (w, h) in self.weights.iter().zip(&self.activations) {
            let _ = writeln!(out, "layer {} {} {}", w.ncols(), w.nrows(), h.name());
            for row in w.row_iter() {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
                let _ = writeln!(out, "{}", cells.join(" "));
            }
        }
        out
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::parse(0, format!("unexpected end of checkpoint, expected {what}")))
        };
        let (ln, magic) = next("header")?;
        if magic != MAGIC {
            return Err(Error::parse(ln, format!("bad header {magic:?}")));
        }
        let (ln, count) = next("layer count")?;
        let layers = match count.split_whitespace().collect::<Vec<_>>()[..] {
            ["layers", n] => n.parse::<usize>().map_err(|e| Error::parse(ln, e.to_string()))?,
            _ => return Err(Error::parse(ln, "expected `layers <n>`")),
        };
        if layers == 0 || layers > 1024 {
            return Err(Error::parse(ln, format!("unsupported layer count {layers}")));
        }
        let mut weights = Vec::with_capacity(layers);
        let mut activations = Vec::with_capacity(layers);
        for _ in 0..layers {
            let (ln, head) = next("layer header")?;
            let (cols, rows, act) = match head.split_whitespace().collect::<Vec<_>>()[..] {
                ["layer", c, r, a] => {
                    let c = c.parse::<usize>().map_err(|e| Error::parse(ln, e.to_string()))?;
                    let r = r.parse::<usize>().map_err(|e| Error::parse(ln, e.to_string()))?;
                    let a = Activation::from_name(a)
                        .ok_or_else(|| Error::parse(ln, format!("unknown activation {a:?}")))?;
                    (c, r, a)
                }
                _ => return Err(Error::parse(ln, "expected `layer <in> <out> <activation>`")),
            };
            if cols == 0 || rows == 0 || cols > MAX_WIDTH || rows > MAX_WIDTH {
                return Err(Error::parse(ln, format!("unsupported layer shape {rows}x{cols}")));
            }
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (ln, row) = next("weight row")?;
                let before = data.len();
                for cell in row.split_whitespace() {
                    let v: f64 = cell
                        .parse()
                        .map_err(|_| Error::parse(ln, format!("bad number {cell:?}")))?;
                    if !v.is_finite() {
                        return Err(Error::parse(ln, "non-finite weight"));
                    }
                    data.push(v);
                }
                if data.len() - before != cols {
                    return Err(Error::parse(
                        ln,
                        format!("expected {cols} values, found {}", data.len() - before),
                    ));
                }
            }
            weights.push(DMatrix::from_row_slice(rows, cols, &data));
            activations.push(act);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(Error::parse(ln, "trailing content after last layer"));
        }
        LayeredNetwork::new(weights, activations)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::stream;

    #[test]
    fn round_trip_is_exact() {
        let mut rng = stream(1, "ckpt");
        let net = LayeredNetwork::random(&[3, 5, 2], Activation::Relu, &mut rng).unwrap();
        let back = LayeredNetwork::from_checkpoint(&net.to_checkpoint()).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn malformed_inputs_report_lines() {
        let good = "monpol-net v1\nlayers 1\nlayer 2 1 identity\n1 2\n";
        assert!(LayeredNetwork::from_checkpoint(good).is_ok());
        let cases = [
            ("monpol-net v2\n", 1),
            ("monpol-net v1\nlayers x\n", 2),
            ("monpol-net v1\nlayers 1\nlayer 2 1 tanh\n", 3),
            ("monpol-net v1\nlayers 1\nlayer 2 1 identity\n1 2 3\n", 4),
            ("monpol-net v1\nlayers 1\nlayer 2 1 identity\n1 2\nextra\n", 5),
        ];
        for (text, line) in cases {
            match LayeredNetwork::from_checkpoint(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?} gave {other:?}"),
            }
        }
        assert!(LayeredNetwork::from_checkpoint("monpol-net v1\nlayers 2\n").is_err());
    }
}
