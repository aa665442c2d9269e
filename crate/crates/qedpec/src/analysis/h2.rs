use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TABLE: &str = include_str!("../../data/table_s1.csv");

/// Coefficients of `g1 + g2 Z₁ + g3 Z₂ + g4 Z₁Z₂ + g5 X₁X₂` at distance `r` (Å).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct H2Coefficients {
    pub r: f64,
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
    pub g4: f64,
    pub g5: f64,
}

/// The shipped coefficient table, 45 rows in increasing `r`.
pub fn table_s1() -> Vec<H2Coefficients> {
    parse_table(TABLE).expect("shipped table parses")
}

fn parse_table(text: &str) -> Result<Vec<H2Coefficients>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse { position: i, message: e.to_string() })?;
        if v.len() != 6 {
            return Err(Error::Parse { position: i, message: format!("expected 6 columns, got {}", v.len()) });
        }
        rows.push(H2Coefficients { r: v[0], g1: v[1], g2: v[2], g3: v[3], g4: v[4], g5: v[5] });
    }
    Ok(rows)
}

impl H2Coefficients {
    /// Row with distance closest to `r` within 1e−9.
    pub fn at(r: f64) -> Result<H2Coefficients> {
        table_s1()
            .into_iter()
            .find(|c| (c.r - r).abs() < 1e-9)
            .ok_or_else(|| Error::InvalidParameter(format!("no coefficient row at R = {r}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct H2Expectations {
    pub z1: f64,
    pub z2: f64,
    pub z1z2: f64,
    pub x1x2: f64,
}

impl H2Expectations {
    /// Values for `exp(−iθY₁X₂/2)|00⟩`.
    pub fn ideal(theta: f64) -> Self {
        Self { z1: theta.cos(), z2: theta.cos(), z1z2: 1.0, x1x2: theta.sin() }
    }
}

pub fn h2_energy(e: &H2Expectations, c: &H2Coefficients) -> f64 {
    c.g1 + c.g2 * e.z1 + c.g3 * e.z2 + c.g4 * e.z1z2 + c.g5 * e.x1x2
}

/// `g1 + g4 − √((g2+g3)² + g5²)`, the minimum over the ideal ansatz.
pub fn analytic_minimum(c: &H2Coefficients) -> f64 {
    c.g1 + c.g4 - ((c.g2 + c.g3).powi(2) + c.g5 * c.g5).sqrt()
}
