use std::fmt::Write;

use serde::Serialize;

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateRow {
    pub n: usize,
    pub estimate: f64,
    pub stderr: f64,
}

/// Estimates indexed by the number of players with an unweighted
/// least-squares fit of `ln estimate` against `ln n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
    pub fitted_slope: f64,
    pub fitted_intercept: f64,
    pub r_squared: f64,
}

/// Least-squares line through `(x, y)`: `(slope, intercept, r^2)`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

impl RateTable {
    /// Table from rows with strictly increasing `n`. The fit is `NaN` when
    /// fewer than two rows are given or some estimate is not positive.
    pub fn new(rows: Vec<RateRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(invalid("rate table", "no rows"));
        }
        if rows.windows(2).any(|w| w[0].n >= w[1].n) {
            return Err(invalid("rate table", "n must be strictly increasing"));
        }
        if rows.iter().any(|r| !r.estimate.is_finite() || !r.stderr.is_finite()) {
            return Err(invalid("rate table", "estimates must be finite"));
        }
        let (slope, intercept, r2) = if rows.len() >= 2 && rows.iter().all(|r| r.estimate > 0.0) {
            let x: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
            let y: Vec<f64> = rows.iter().map(|r| r.estimate.ln()).collect();
            least_squares(&x, &y)
        } else {
            (f64::NAN, f64::NAN, f64::NAN)
        };
        Ok(Self {
            rows,
            fitted_slope: slope,
            fitted_intercept: intercept,
            r_squared: r2,
        })
    }

    pub fn estimates(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.estimate).collect()
    }

    /// CSV with header `n,estimate,stderr`; floats in round-trip
    /// scientific notation.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,estimate,stderr\n");
        for r in &self.rows {
            writeln!(out, "{},{:.16e},{:.16e}", r.n, r.estimate, r.stderr).unwrap();
        }
        out
    }

    /// Two columns `ln_n,ln_estimate` for log-log plots.
    pub fn plot_data(&self) -> String {
        let mut out = String::from("ln_n,ln_estimate\n");
        for r in &self.rows {
            writeln!(out, "{:.16e},{:.16e}", (r.n as f64).ln(), r.estimate.ln()).unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_is_recovered() {
        let rows = [8usize, 16, 32, 64]
            .iter()
            .map(|&n| RateRow {
                n,
                estimate: 3.0 / n as f64,
                stderr: 0.0,
            })
            .collect();
        let t = RateTable::new(rows).unwrap();
        assert!((t.fitted_slope + 1.0).abs() < 1e-12);
        assert!((t.fitted_intercept - 3f64.ln()).abs() < 1e-12);
        assert!((t.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_unsorted_rows() {
        let row = |n| RateRow {
            n,
            estimate: 1.0,
            stderr: 0.0,
        };
        assert!(RateTable::new(vec![row(16), row(8)]).is_err());
    }
}
