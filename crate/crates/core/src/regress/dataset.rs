use std::hash::{DefaultHasher, Hash, Hasher};

use nalgebra::DMatrix;

use super::RegressError;

pub const INTERCEPT: &str = "const";

/// Count response plus named real regressors. The intercept is implicit and
/// always the last design column.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    ids: Vec<String>,
    response_name: String,
    response: Vec<u64>,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(
        ids: Vec<String>,
        response_name: impl Into<String>,
        response: Vec<u64>,
        columns: Vec<(String, Vec<f64>)>,
    ) -> Result<Self, RegressError> {
        let n = response.len();
        if ids.len() != n {
            return Err(RegressError::Shape(format!(
                "{} ids for {n} responses",
                ids.len()
            )));
        }
        let mut names = Vec::with_capacity(columns.len());
        let mut cols = Vec::with_capacity(columns.len());
        for (name, col) in columns {
            if col.len() != n {
                return Err(RegressError::Shape(format!(
                    "column `{name}` has {} rows, response has {n}",
                    col.len()
                )));
            }
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(RegressError::InvalidValue { column: name, row });
            }
            if names.contains(&name) || name == INTERCEPT {
                return Err(RegressError::Shape(format!("duplicate column `{name}`")));
            }
            names.push(name);
            cols.push(col);
        }
        let needed = names.len() + 2;
        if n < needed {
            return Err(RegressError::TooFewRows { rows: n, needed });
        }
        Ok(Self {
            ids,
            response_name: response_name.into(),
            response,
            names,
            columns: cols,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.response.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn response_name(&self) -> &str {
        &self.response_name
    }

    pub fn response(&self) -> &[u64] {
        &self.response
    }

    pub fn regressor_names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn has(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    /// Dataset restricted to the named regressors, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Dataset, RegressError> {
        let mut cols = Vec::with_capacity(names.len());
        for name in names {
            let col = self
                .column(name)
                .ok_or_else(|| RegressError::MissingColumn(name.to_string()))?;
            cols.push((name.to_string(), col.to_vec()));
        }
        Dataset::new(
            self.ids.clone(),
            self.response_name.clone(),
            self.response.clone(),
            cols,
        )
    }

    /// Copy with one regressor multiplied by `c`.
    pub fn scaled(&self, name: &str, c: f64) -> Result<Dataset, RegressError> {
        let idx = self
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| RegressError::MissingColumn(name.to_string()))?;
        let mut out = self.clone();
        for v in &mut out.columns[idx] {
            *v *= c;
        }
        Ok(out)
    }

    pub fn with_response(&self, response: Vec<u64>) -> Result<Dataset, RegressError> {
        Dataset::new(
            self.ids.clone(),
            self.response_name.clone(),
            response,
            self.names
                .iter()
                .cloned()
                .zip(self.columns.iter().cloned())
                .collect(),
        )
    }

    /// Coefficient labels, regressors then intercept.
    pub fn coefficient_names(&self) -> Vec<String> {
        let mut v = self.names.clone();
        v.push(INTERCEPT.to_string());
        v
    }

    /// `n × (k+1)` design with a trailing column of ones.
    pub fn design(&self) -> DMatrix<f64> {
        let n = self.n_obs();
        let k = self.names.len();
        DMatrix::from_fn(n, k + 1, |i, j| if j < k { self.columns[j][i] } else { 1.0 })
    }

    /// Hash of the response and regressors; equal data hashes equal.
    pub fn digest(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.response.hash(&mut h);
        self.names.hash(&mut h);
        for col in &self.columns {
            for v in col {
                v.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| i.to_string()).collect()
    }

    #[test]
    fn rejects_short_and_nonfinite() {
        let err = Dataset::new(ids(3), "cp", vec![1, 2, 3], vec![("m".into(), vec![1.0, 2.0, 3.0]), ("d".into(), vec![1.0, 2.0, 3.0])]);
        assert!(matches!(err, Err(RegressError::TooFewRows { rows: 3, needed: 4 })));
        let err = Dataset::new(ids(4), "cp", vec![1, 2, 3, 4], vec![("m".into(), vec![1.0, f64::NAN, 3.0, 4.0])]);
        assert!(matches!(err, Err(RegressError::InvalidValue { row: 1, .. })));
    }

    #[test]
    fn design_has_trailing_intercept() {
        let d = Dataset::new(ids(3), "cp", vec![0, 1, 2], vec![("m".into(), vec![5.0, 6.0, 7.0])]).unwrap();
        let x = d.design();
        assert_eq!(x.ncols(), 2);
        assert_eq!(x[(2, 0)], 7.0);
        assert_eq!(x[(2, 1)], 1.0);
        assert_eq!(d.coefficient_names(), vec!["m", "const"]);
    }
}
