use std::io::Write;

use super::config::ExperimentConfig;
use crate::econ::{is_closed_loop_stable, taylor_closed_loop_matrix, TaylorParams};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityPoint {
    pub phi_y: f64,
    pub phi_pi: f64,
    pub stable: bool,
    pub spectral_radius: f64,
}

/// Largest eigenvalue modulus of the closed-loop matrix.
pub fn spectral_radius(params: &TaylorParams) -> f64 {
    let m = taylor_closed_loop_matrix(params);
    let half_trace = 0.5 * m.trace();
    let det = m.determinant();
    let disc = half_trace * half_trace - det;
    if disc >= 0.0 {
        let r = disc.sqrt();
        (half_trace + r).abs().max((half_trace - r).abs())
    } else {
        det.sqrt()
    }
}

fn grid(lo: f64, hi: f64, steps: usize) -> impl Iterator<Item = f64> {
    (0..steps).map(move |i| {
        if steps == 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (steps - 1) as f64
        }
    })
}

/// Classifies every `(φ_y, φ_π)` grid point of the configured sweep.
pub fn stability_region(cfg: &ExperimentConfig) -> Result<Vec<StabilityPoint>> {
    cfg.validate()?;
    let st = &cfg.stability;
    let base = cfg.taylor.params();
    let mut points = Vec::with_capacity(st.phi_y_steps * st.phi_pi_steps);
    for phi_y in grid(st.phi_y_min, st.phi_y_max, st.phi_y_steps) {
        for phi_pi in grid(st.phi_pi_min, st.phi_pi_max, st.phi_pi_steps) {
            let p = TaylorParams { phi_y, phi_pi, ..base };
            points.push(StabilityPoint {
                phi_y,
                phi_pi,
                stable: is_closed_loop_stable(&p),
                spectral_radius: spectral_radius(&p),
            });
        }
    }
    Ok(points)
}

pub fn write_stability_csv<W: Write>(points: &[StabilityPoint], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| std::io::Error::other(e.to_string());
    wr.write_record(["phi_y", "phi_pi", "stable", "spectral_radius"]).map_err(io)?;
    for p in points {
        wr.write_record([
            p.phi_y.to_string(),
            p.phi_pi.to_string(),
            (p.stable as u8).to_string(),
            p.spectral_radius.to_string(),
        ])
        .map_err(io)?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_matches_the_radius() {
        let cfg = ExperimentConfig::default();
        let points = stability_region(&cfg).unwrap();
        assert_eq!(points.len(), 61 * 61);
        assert!(points.iter().any(|p| p.stable) && points.iter().any(|p| !p.stable));
        for p in points {
            if (p.spectral_radius - 1.0).abs() > 1e-9 {
                assert_eq!(p.stable, p.spectral_radius < 1.0, "{p:?}");
            }
        }
    }

    #[test]
    fn csv_has_one_line_per_point() {
        let mut cfg = ExperimentConfig::default();
        cfg.stability.phi_y_steps = 3;
        cfg.stability.phi_pi_steps = 2;
        let mut buf = Vec::new();
        write_stability_csv(&stability_region(&cfg).unwrap(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(text.starts_with("phi_y,phi_pi,stable,spectral_radius\n0,0,"));
    }
}
