use nalgebra::DMatrix;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{Dataset, RegressError, Stars};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Describe {
    pub name: String,
    pub obs: usize,
    pub mean: f64,
    /// Sample standard deviation (`n − 1` denominator); zero for one value.
    pub std_dev: f64,
    pub min: f64,
    pub max: f64,
}

impl Describe {
    pub fn of(name: &str, values: &[f64]) -> Result<Describe, RegressError> {
        if values.is_empty() {
            return Err(RegressError::EmptyColumn(name.to_string()));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        let std_dev = if values.len() > 1 {
            (ss / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Ok(Describe {
            name: name.to_string(),
            obs: values.len(),
            mean,
            std_dev,
            min: values.iter().cloned().fold(f64::INFINITY, f64::min),
            max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

/// Response first, then each regressor.
pub fn descriptive_stats(data: &Dataset) -> Result<Vec<Describe>, RegressError> {
    let y: Vec<f64> = data.response().iter().map(|&v| v as f64).collect();
    let mut out = vec![Describe::of(data.response_name(), &y)?];
    for name in data.regressor_names() {
        out.push(Describe::of(name, data.column(name).expect("listed column"))?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    #[serde(skip)]
    pub r: DMatrix<f64>,
    /// Two-sided p-values from the t-test with `n − 2` df; zero on the
    /// diagonal.
    #[serde(skip)]
    pub p: DMatrix<f64>,
    pub stars: Vec<Vec<Stars>>,
    pub n_obs: usize,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        Some(self.r[(i, j)])
    }
}

fn corr(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Correlations among the regressors.
pub fn pearson_corr(data: &Dataset, thresholds: &[f64; 3]) -> Result<CorrelationMatrix, RegressError> {
    let labels: Vec<String> = data.regressor_names().to_vec();
    let cols: Vec<&[f64]> = labels
        .iter()
        .map(|l| data.column(l).expect("listed column"))
        .collect();
    for (l, c) in labels.iter().zip(&cols) {
        let first = c[0];
        if c.iter().all(|&v| v == first) {
            return Err(RegressError::ZeroVariance(l.clone()));
        }
    }
    let k = labels.len();
    let n = data.n_obs();
    let df = (n - 2) as f64;
    let t_dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    let mut r = DMatrix::identity(k, k);
    let mut p = DMatrix::zeros(k, k);
    let mut stars = vec![vec![Stars::None; k]; k];
    for i in 0..k {
        for j in 0..i {
            let rij = corr(cols[i], cols[j]);
            let pij = if rij.abs() >= 1.0 {
                0.0
            } else {
                let t = rij * (df / (1.0 - rij * rij)).sqrt();
                2.0 * (1.0 - t_dist.cdf(t.abs()))
            };
            r[(i, j)] = rij;
            r[(j, i)] = rij;
            p[(i, j)] = pij;
            p[(j, i)] = pij;
            let s = Stars::from_p(pij, thresholds);
            stars[i][j] = s;
            stars[j][i] = s;
        }
    }
    Ok(CorrelationMatrix {
        labels,
        r,
        p,
        stars,
        n_obs: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const T: [f64; 3] = [0.10, 0.05, 0.01];

    fn data(cols: Vec<(&str, Vec<f64>)>) -> Dataset {
        let n = cols[0].1.len();
        Dataset::new(
            (0..n).map(|i| i.to_string()).collect(),
            "cp",
            (0..n as u64).collect(),
            cols.into_iter().map(|(a, b)| (a.to_string(), b)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn constant_column() {
        let d = Describe::of("x", &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!((d.mean, d.std_dev), (0.0, 0.0));
        assert!(matches!(Describe::of("x", &[]), Err(RegressError::EmptyColumn(_))));
    }

    #[test]
    fn pharmacology_cp_mean() {
        // 105 collaborations over 44 rows
        let mut y = vec![0.0; 44];
        y[0] = 13.0;
        y[1] = 92.0;
        let d = Describe::of("cp", &y).unwrap();
        assert!((d.mean - 2.386).abs() < 5e-4);
    }

    #[test]
    fn matches_direct_formulas() {
        let x = [1.5, 2.0, -0.3, 4.4, 2.2, 0.9];
        let d = Describe::of("x", &x).unwrap();
        // computed by hand: mean 1.783333..., sample sd via Σx² route
        let n = 6.0;
        let sum: f64 = x.iter().sum();
        let sumsq: f64 = x.iter().map(|v| v * v).sum();
        let var = (sumsq - sum * sum / n) / (n - 1.0);
        assert!((d.mean - 10.7 / 6.0).abs() < 1e-12);
        assert!((d.std_dev - var.sqrt()).abs() < 1e-12);
        assert_eq!((d.min, d.max), (-0.3, 4.4));
    }

    #[test]
    fn correlation_extremes_and_formula() {
        let x = vec![1.0, 2.0, 4.0, 3.0, 7.0];
        let y = vec![2.0, 1.0, 5.0, 5.5, 6.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let c = pearson_corr(&data(vec![("x", x.clone()), ("y", y.clone()), ("nx", neg)]), &T).unwrap();
        assert_eq!(c.get("x", "x"), Some(1.0));
        assert!((c.get("x", "nx").unwrap() + 1.0).abs() < 1e-15);
        // Σ(x−x̄)(y−ȳ)/((n−1)·sx·sy)
        let sx = Describe::of("x", &x).unwrap();
        let sy = Describe::of("y", &y).unwrap();
        let cov: f64 = x.iter().zip(&y).map(|(a, b)| (a - sx.mean) * (b - sy.mean)).sum::<f64>() / 4.0;
        let oracle = cov / (sx.std_dev * sy.std_dev);
        assert!((c.get("x", "y").unwrap() - oracle).abs() < 1e-12);
        assert_eq!(c.stars[0][2], Stars::Three);
    }

    #[test]
    fn zero_variance_rejected() {
        let d = data(vec![("x", vec![1.0, 2.0, 3.0, 4.0]), ("c", vec![5.0; 4])]);
        assert!(matches!(pearson_corr(&d, &T), Err(RegressError::ZeroVariance(c)) if c == "c"));
    }
}
