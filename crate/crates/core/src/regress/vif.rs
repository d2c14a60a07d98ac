use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{Dataset, RegressError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VifEntry {
    pub name: String,
    /// `1 / (1 − R²)`; infinite under perfect collinearity or zero variance.
    pub vif: f64,
    pub r_squared: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VifScreen {
    pub threshold: f64,
    pub entries: Vec<VifEntry>,
    pub dropped: Option<String>,
    pub kept: Vec<String>,
}

/// Centered R² of the OLS fit of column `j` on the others plus intercept.
fn auxiliary_r2(cols: &[&[f64]], j: usize) -> f64 {
    let n = cols[j].len();
    let others: Vec<&[f64]> = cols
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != j)
        .map(|(_, c)| *c)
        .collect();
    let k = others.len();
    let x = DMatrix::from_fn(n, k + 1, |r, c| if c < k { others[c][r] } else { 1.0 });
    let y = DVector::from_column_slice(cols[j]);
    let mean = y.mean();
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if sst <= f64::EPSILON * mean.abs().max(1.0) * n as f64 {
        return 1.0;
    }
    let svd = x.clone().svd(true, true);
    let eps = 1e-12 * svd.singular_values.max();
    let beta = svd.solve(&y, eps).expect("u and v computed");
    let resid = &y - &x * beta;
    let r2 = 1.0 - resid.norm_squared() / sst;
    r2.clamp(0.0, 1.0)
}

pub fn vif(data: &Dataset, threshold: f64) -> Result<Vec<VifEntry>, RegressError> {
    let names = data.regressor_names();
    if names.len() < 2 {
        return Err(RegressError::TooFewRegressors);
    }
    let cols: Vec<&[f64]> = names
        .iter()
        .map(|n| data.column(n).expect("listed column"))
        .collect();
    Ok(names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let r2 = auxiliary_r2(&cols, j);
            let vif = if r2 >= 1.0 - 1e-12 {
                f64::INFINITY
            } else {
                1.0 / (1.0 - r2)
            };
            VifEntry {
                name: name.clone(),
                vif,
                r_squared: r2,
                flagged: vif > threshold,
            }
        })
        .collect())
}

/// Flags regressors above `threshold` and, with `drop`, removes the single
/// flagged regressor with the highest VIF.
pub fn screen(data: &Dataset, threshold: f64, drop: bool) -> Result<VifScreen, RegressError> {
    let entries = vif(data, threshold)?;
    let dropped = if drop {
        entries
            .iter()
            .filter(|e| e.flagged)
            .max_by(|a, b| a.vif.total_cmp(&b.vif))
            .map(|e| e.name.clone())
    } else {
        None
    };
    let kept = entries
        .iter()
        .map(|e| e.name.clone())
        .filter(|n| Some(n) != dropped.as_ref())
        .collect();
    Ok(VifScreen {
        threshold,
        entries,
        dropped,
        kept,
    })
}
