//! Positions from ranges (multilateration) or from one radar's range and
//! array phase (angle of arrival).

mod aoa;
mod multilat;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use aoa::{aoa_localize, estimate_aoa, AoaEstimate};
pub use multilat::{trilaterate, trilaterate_in, Observation, SolverOptions};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionEstimate {
    pub tag_id: Option<String>,
    /// Two or three coordinates.
    pub position_m: Vec<f64>,
    /// RMS range residual at the solution.
    pub residual_m: f64,
    pub used_radars: Vec<String>,
    pub iterations: usize,
}

impl PositionEstimate {
    /// Euclidean distance to `truth`, compared over this estimate's
    /// dimensions.
    pub fn error_to(&self, truth: &[f64]) -> f64 {
        self.position_m
            .iter()
            .zip(truth)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Writes `tag_id,x,y,z,residual_m` rows; `z` is empty for 2D estimates.
pub fn write_positions_csv<W: Write>(mut out: W, estimates: &[PositionEstimate]) -> Result<()> {
    writeln!(out, "tag_id,x,y,z,residual_m")?;
    for e in estimates {
        let coord = |i: usize| e.position_m.get(i).map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{}",
            e.tag_id.as_deref().unwrap_or(""),
            coord(0),
            coord(1),
            coord(2),
            e.residual_m
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_rows() {
        let e = vec![
            PositionEstimate {
                tag_id: Some("a".into()),
                position_m: vec![1.0, 2.5],
                residual_m: 0.0,
                used_radars: vec![],
                iterations: 0,
            },
            PositionEstimate {
                tag_id: None,
                position_m: vec![1.0, 2.0, 3.0],
                residual_m: 0.5,
                used_radars: vec![],
                iterations: 0,
            },
        ];
        let mut buf = Vec::new();
        write_positions_csv(&mut buf, &e).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "tag_id,x,y,z,residual_m\na,1,2.5,,0\n,1,2,3,0.5\n"
        );
    }
}
