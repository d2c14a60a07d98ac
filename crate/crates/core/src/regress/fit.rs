use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::likelihood::{
    nb2_beta_derivs, nb2_hessian, nb2_loglik, nb2_loglik_fixed, nb2_obs_scores, nb2_score,
    poisson_hessian, poisson_loglik, poisson_obs_scores, poisson_score,
};
use super::{Dataset, RegressConfig, RegressError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Poisson,
    Negbin,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Poisson => "poisson",
            ModelKind::Negbin => "negbin",
        })
    }
}

/// Sandwich flavor for the robust covariance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceVariant {
    #[default]
    Hc0,
    /// HC0 scaled by `n / (n − p)`.
    Hc1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub model: ModelKind,
    /// Regressors then `const`.
    pub names: Vec<String>,
    pub beta: Vec<f64>,
    /// Dispersion; `None` for Poisson.
    pub alpha: Option<f64>,
    /// Standard errors of `ln α` (model, robust); `None` for Poisson or when
    /// α was fixed or clamped at the boundary.
    pub ln_alpha_se: Option<(f64, f64)>,
    /// Set when the dispersion estimate collapsed onto the lower clamp.
    pub alpha_at_boundary: bool,
    /// Covariance of `beta` from the inverse negative Hessian.
    pub cov_model: DMatrix<f64>,
    /// Sandwich covariance of `beta`.
    pub cov_robust: DMatrix<f64>,
    pub loglik: f64,
    pub n_obs: usize,
    pub converged: bool,
    pub iterations: usize,
    pub data_digest: u64,
}

impl RegressionFit {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|i| self.beta[i])
    }

    pub fn se_model(&self) -> Vec<f64> {
        self.cov_model.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect()
    }

    pub fn se_robust(&self) -> Vec<f64> {
        self.cov_robust.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect()
    }

    pub fn fitted_means(&self, data: &Dataset) -> Vec<f64> {
        let x = data.design();
        let beta = DVector::from_column_slice(&self.beta);
        (x * beta).iter().map(|e| e.exp()).collect()
    }
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn check_rank(x: &DMatrix<f64>) -> Result<(), RegressError> {
    // scale columns so the rank test is unit-free
    let mut xs = x.clone();
    for mut col in xs.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    let sv = xs.svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if max == 0.0 || min / max < 1e-10 {
        return Err(RegressError::RankDeficient);
    }
    Ok(())
}

/// Solves `(−H) δ = s`, adding Levenberg damping until `−H` is positive
/// definite.
fn newton_direction(h: &DMatrix<f64>, s: &DVector<f64>) -> Option<DVector<f64>> {
    let neg = -h;
    if let Some(ch) = neg.clone().cholesky() {
        return Some(ch.solve(s));
    }
    let scale = neg.diagonal().iter().fold(1e-12_f64, |m, v| m.max(v.abs()));
    let mut lambda = 1e-8 * scale;
    for _ in 0..40 {
        let damped = &neg + DMatrix::identity(neg.nrows(), neg.ncols()) * lambda;
        if let Some(ch) = damped.cholesky() {
            return Some(ch.solve(s));
        }
        lambda *= 10.0;
    }
    None
}

fn invert_neg(h: &DMatrix<f64>) -> Result<DMatrix<f64>, RegressError> {
    let neg = -h;
    let inv = match neg.clone().cholesky() {
        Some(ch) => ch.inverse(),
        None => neg.try_inverse().ok_or(RegressError::SingularHessian)?,
    };
    Ok(symmetrize(inv))
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

fn sandwich(
    bread: &DMatrix<f64>,
    obs_scores: &DMatrix<f64>,
    variant: CovarianceVariant,
) -> DMatrix<f64> {
    let meat = obs_scores.transpose() * obs_scores;
    let mut v = bread * meat * bread;
    if variant == CovarianceVariant::Hc1 {
        let (n, p) = (obs_scores.nrows() as f64, obs_scores.ncols() as f64);
        v *= n / (n - p);
    }
    symmetrize(v)
}

struct Trace {
    converged: bool,
    iterations: usize,
    max_score: f64,
}

/// Damped Newton ascent with step-halving. `eval` returns the objective, and
/// `derivs` the score and Hessian, at a parameter vector.
fn newton_ascent(
    theta: &mut DVector<f64>,
    cfg: &RegressConfig,
    eval: impl Fn(&DVector<f64>) -> f64,
    derivs: impl Fn(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>),
    mut stop_early: impl FnMut(&DVector<f64>) -> bool,
) -> Trace {
    let mut ll = eval(theta);
    let mut max_score = f64::INFINITY;
    for iter in 0..=cfg.max_iter {
        let (s, h) = derivs(theta);
        max_score = max_abs(&s);
        if max_score < cfg.score_tol {
            return Trace {
                converged: true,
                iterations: iter,
                max_score,
            };
        }
        if iter == cfg.max_iter {
            break;
        }
        let Some(dir) = newton_direction(&h, &s) else {
            break;
        };
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let cand = &*theta + &dir * t;
            let ll_c = eval(&cand);
            if ll_c.is_finite() && ll_c >= ll - 1e-12 * ll.abs().max(1.0) {
                accepted = Some((cand, ll_c));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, ll_c)) = accepted else {
            break;
        };
        let step = max_abs(&(&cand - &*theta));
        *theta = cand;
        ll = ll_c;
        if stop_early(theta) {
            return Trace {
                converged: false,
                iterations: iter + 1,
                max_score,
            };
        }
        let scale = 1.0 + max_abs(theta);
        if step < cfg.param_tol * scale {
            let (s, _) = derivs(theta);
            max_score = max_abs(&s);
            // at machine precision: accept only if the score is negligible
            // relative to the problem size
            let converged = max_score < cfg.score_tol.sqrt() * (theta.len() as f64);
            return Trace {
                converged,
                iterations: iter + 1,
                max_score,
            };
        }
    }
    Trace {
        converged: false,
        iterations: cfg.max_iter,
        max_score,
    }
}

pub fn fit_poisson(data: &Dataset, cfg: &RegressConfig) -> Result<RegressionFit, RegressError> {
    let x = data.design();
    let y = data.response();
    check_rank(&x)?;
    let ybar = y.iter().sum::<u64>() as f64 / y.len() as f64;
    if ybar == 0.0 {
        return Err(RegressError::AllZeroResponse);
    }
    let k = x.ncols();
    let mut beta = DVector::zeros(k);
    beta[k - 1] = ybar.ln();

    let trace = newton_ascent(
        &mut beta,
        cfg,
        |b| poisson_loglik(&x, y, b),
        |b| (poisson_score(&x, y, b), poisson_hessian(&x, b)),
        |_| false,
    );
    if !trace.converged {
        return Err(RegressError::NonConvergence {
            model: ModelKind::Poisson,
            iterations: trace.iterations,
            max_score: trace.max_score,
        });
    }
    let h = poisson_hessian(&x, &beta);
    let cov_model = invert_neg(&h)?;
    let cov_robust = sandwich(&cov_model, &poisson_obs_scores(&x, y, &beta), cfg.covariance);
    Ok(RegressionFit {
        model: ModelKind::Poisson,
        names: data.coefficient_names(),
        beta: beta.iter().copied().collect(),
        alpha: None,
        ln_alpha_se: None,
        alpha_at_boundary: false,
        cov_model,
        cov_robust,
        loglik: poisson_loglik(&x, y, &beta),
        n_obs: data.n_obs(),
        converged: true,
        iterations: trace.iterations,
        data_digest: data.digest(),
    })
}

/// Method-of-moments dispersion from Poisson residuals,
/// `Σ((y−μ)² − y) / Σμ²`, floored at `1e-4`.
fn moment_alpha(y: &[u64], mu: &[f64]) -> f64 {
    let num: f64 = y
        .iter()
        .zip(mu)
        .map(|(&yi, &m)| (yi as f64 - m).powi(2) - yi as f64)
        .sum();
    let den: f64 = mu.iter().map(|m| m * m).sum();
    (num / den).max(1e-4)
}

/// NB2 with the dispersion held fixed; only β is estimated.
pub fn fit_negbin_fixed_alpha(
    data: &Dataset,
    alpha: f64,
    cfg: &RegressConfig,
) -> Result<RegressionFit, RegressError> {
    let start = fit_poisson(data, cfg)?;
    let mut fit = fit_beta_given_alpha(data, DVector::from_column_slice(&start.beta), alpha, cfg)?;
    fit.iterations += start.iterations;
    Ok(fit)
}

fn fit_beta_given_alpha(
    data: &Dataset,
    mut beta: DVector<f64>,
    alpha: f64,
    cfg: &RegressConfig,
) -> Result<RegressionFit, RegressError> {
    let x = data.design();
    let y = data.response();
    let trace = newton_ascent(
        &mut beta,
        cfg,
        |b| nb2_loglik_fixed(&x, y, b, alpha),
        |b| {
            let (s, h, _) = nb2_beta_derivs(&x, y, b, alpha);
            (s, h)
        },
        |_| false,
    );
    if !trace.converged {
        return Err(RegressError::NonConvergence {
            model: ModelKind::Negbin,
            iterations: trace.iterations,
            max_score: trace.max_score,
        });
    }
    let (_, h, obs) = nb2_beta_derivs(&x, y, &beta, alpha);
    let cov_model = invert_neg(&h)?;
    let cov_robust = sandwich(&cov_model, &obs, cfg.covariance);
    Ok(RegressionFit {
        model: ModelKind::Negbin,
        names: data.coefficient_names(),
        beta: beta.iter().copied().collect(),
        alpha: Some(alpha),
        ln_alpha_se: None,
        alpha_at_boundary: false,
        cov_model,
        cov_robust,
        loglik: nb2_loglik_fixed(&x, y, &beta, alpha),
        n_obs: data.n_obs(),
        converged: true,
        iterations: trace.iterations,
        data_digest: data.digest(),
    })
}

/// Profile likelihood in `ln α` maximized by a coarse grid from the floor
/// to `ln 100` followed by golden-section refinement. Returns `ln α` (the
/// floor itself if the profile peaks there) and β at that value.
fn profile_ln_alpha(
    data: &Dataset,
    beta0: DVector<f64>,
    cfg: &RegressConfig,
) -> Result<(f64, DVector<f64>), RegressError> {
    let floor = cfg.alpha_floor.ln();
    let top = 100f64.ln();
    let mut beta = beta0;
    let profile = |t: f64, beta: &mut DVector<f64>| -> Result<f64, RegressError> {
        let fit = fit_beta_given_alpha(data, beta.clone(), t.exp(), cfg)?;
        *beta = DVector::from_vec(fit.beta);
        Ok(fit.loglik)
    };
    // walk down from the top so warm starts move towards the Poisson limit
    let steps = ((top - floor) / 0.5).ceil() as usize;
    let grid: Vec<f64> = (0..=steps).map(|i| (top - 0.5 * i as f64).max(floor)).collect();
    let mut best = (f64::NEG_INFINITY, 0usize);
    let mut betas = Vec::with_capacity(grid.len());
    for (i, &t) in grid.iter().enumerate() {
        let ll = profile(t, &mut beta)?;
        betas.push(beta.clone());
        if ll > best.0 {
            best = (ll, i);
        }
    }
    let i = best.1;
    if i == grid.len() - 1 {
        return Ok((floor, betas[i].clone()));
    }
    let (mut a, mut b) = (grid[(i + 1).min(grid.len() - 1)], grid[i.saturating_sub(1)]);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut beta = betas[i].clone();
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = profile(c, &mut beta)?;
    let mut fd = profile(d, &mut beta)?;
    while b - a > 1e-6 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = profile(c, &mut beta)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = profile(d, &mut beta)?;
        }
    }
    let t = 0.5 * (a + b);
    profile(t, &mut beta)?;
    Ok((t, beta))
}

/// Joint maximum likelihood over `(β, ln α)`. If α collapses below
/// `cfg.alpha_floor`, it is clamped there, β is refit at the clamp and the
/// fit is flagged.
pub fn fit_negbin(data: &Dataset, cfg: &RegressConfig) -> Result<RegressionFit, RegressError> {
    let pois = fit_poisson(data, cfg)?;
    let x = data.design();
    let y = data.response();
    let mu = pois.fitted_means(data);
    let alpha0 = moment_alpha(y, &mu);

    let k = x.ncols();
    let mut theta = DVector::zeros(k + 1);
    for j in 0..k {
        theta[j] = pois.beta[j];
    }
    theta[k] = alpha0.ln();
    let floor = cfg.alpha_floor.ln();

    let ascend = |theta: &mut DVector<f64>| {
        newton_ascent(
            theta,
            cfg,
            |t| nb2_loglik(&x, y, t),
            |t| (nb2_score(&x, y, t), nb2_hessian(&x, y, t)),
            |t| t[k] < floor,
        )
    };
    let mut trace = ascend(&mut theta);
    if !trace.converged && theta[k] >= floor {
        // the likelihood is far from concave in ln α away from the optimum;
        // restart from the profile maximum
        let (t, beta) = profile_ln_alpha(data, DVector::from_column_slice(&pois.beta), cfg)?;
        theta.rows_mut(0, k).copy_from(&beta);
        theta[k] = t;
        let iterations = trace.iterations;
        trace = if t <= floor {
            Trace {
                converged: true,
                iterations: 0,
                max_score: 0.0,
            }
        } else {
            ascend(&mut theta)
        };
        trace.iterations += iterations;
    }

    if theta[k] <= floor {
        let beta = theta.rows(0, k).into_owned();
        let mut fit = fit_beta_given_alpha(data, beta, cfg.alpha_floor, cfg)?;
        fit.alpha_at_boundary = true;
        fit.iterations += trace.iterations + pois.iterations;
        return Ok(fit);
    }
    if !trace.converged {
        return Err(RegressError::NonConvergence {
            model: ModelKind::Negbin,
            iterations: trace.iterations,
            max_score: trace.max_score,
        });
    }

    let h = nb2_hessian(&x, y, &theta);
    let cov_full = invert_neg(&h)?;
    let robust_full = sandwich(&cov_full, &nb2_obs_scores(&x, y, &theta), cfg.covariance);
    Ok(RegressionFit {
        model: ModelKind::Negbin,
        names: data.coefficient_names(),
        beta: theta.rows(0, k).iter().copied().collect(),
        alpha: Some(theta[k].exp()),
        ln_alpha_se: Some((
            cov_full[(k, k)].max(0.0).sqrt(),
            robust_full[(k, k)].max(0.0).sqrt(),
        )),
        alpha_at_boundary: false,
        cov_model: cov_full.view((0, 0), (k, k)).into_owned(),
        cov_robust: robust_full.view((0, 0), (k, k)).into_owned(),
        loglik: nb2_loglik(&x, y, &theta),
        n_obs: data.n_obs(),
        converged: true,
        iterations: trace.iterations + pois.iterations,
        data_digest: data.digest(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Gamma, Poisson};

    fn dataset(y: Vec<u64>, cols: Vec<(&str, Vec<f64>)>) -> Dataset {
        Dataset::new(
            (0..y.len()).map(|i| i.to_string()).collect(),
            "cp",
            y,
            cols.into_iter().map(|(a, b)| (a.to_string(), b)).collect(),
        )
        .unwrap()
    }

    fn simulated(seed: u64, n: usize, alpha: f64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..40.0)).collect();
        let d: Vec<f64> = (0..n).map(|_| rng.random_range(150.0..850.0)).collect();
        let y = m
            .iter()
            .zip(&d)
            .map(|(&m, &d)| {
                let mu: f64 = (0.3 + 0.05 * m - 0.002 * d).exp();
                let lam = if alpha > 0.0 {
                    Gamma::new(1.0 / alpha, alpha * mu).unwrap().sample(&mut rng)
                } else {
                    mu
                };
                if lam <= 0.0 {
                    0
                } else {
                    Poisson::new(lam).unwrap().sample(&mut rng) as u64
                }
            })
            .collect();
        dataset(y, vec![("m", m), ("d", d)])
    }

    fn intercept_only(y: Vec<u64>) -> Dataset {
        Dataset::new((0..y.len()).map(|i| i.to_string()).collect(), "cp", y, vec![]).unwrap()
    }

    #[test]
    fn intercept_only_poisson_is_log_mean() {
        let cfg = RegressConfig::default();
        let f = fit_poisson(&intercept_only(vec![0, 1, 4, 2, 3]), &cfg).unwrap();
        assert!((f.beta[0] - 2.0_f64.ln()).abs() < 1e-12);
        let f = fit_poisson(&intercept_only(vec![1; 6]), &cfg).unwrap();
        assert!(f.beta[0].abs() < 1e-14);
    }

    #[test]
    fn all_zero_and_rank_deficient_rejected() {
        let cfg = RegressConfig::default();
        assert!(matches!(
            fit_poisson(&intercept_only(vec![0; 5]), &cfg),
            Err(RegressError::AllZeroResponse)
        ));
        let d = dataset(
            vec![1, 2, 0, 3, 1],
            vec![("m", vec![1.0, 2.0, 3.0, 4.0, 5.0]), ("k", vec![2.0, 4.0, 6.0, 8.0, 10.0])],
        );
        assert!(matches!(fit_poisson(&d, &cfg), Err(RegressError::RankDeficient)));
        assert!(matches!(fit_negbin(&d, &cfg), Err(RegressError::RankDeficient)));
    }

    #[test]
    fn tiny_fixed_alpha_reproduces_poisson() {
        let cfg = RegressConfig::default();
        let d = simulated(3, 44, 0.5);
        let p = fit_poisson(&d, &cfg).unwrap();
        let nb = fit_negbin_fixed_alpha(&d, 1e-10, &cfg).unwrap();
        for (a, b) in p.beta.iter().zip(&nb.beta) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn negbin_converges_with_zero_score() {
        let cfg = RegressConfig::default();
        let d = simulated(11, 44, 0.6);
        let f = fit_negbin(&d, &cfg).unwrap();
        assert!(f.converged && !f.alpha_at_boundary);
        let mut theta = f.beta.clone();
        theta.push(f.alpha.unwrap().ln());
        let s = nb2_score(&d.design(), d.response(), &DVector::from_vec(theta));
        assert!(max_abs(&s) < 1e-8);
        let p = fit_poisson(&d, &cfg).unwrap();
        assert!(f.loglik >= p.loglik);
    }

    #[test]
    fn underdispersed_data_hits_boundary() {
        let cfg = RegressConfig::default();
        let d = intercept_only(vec![2, 2, 3, 2, 2, 3, 2, 2]);
        let f = fit_negbin(&d, &cfg).unwrap();
        assert!(f.alpha_at_boundary);
        assert_eq!(f.alpha, Some(cfg.alpha_floor));
        assert!(f.ln_alpha_se.is_none());
    }

    #[test]
    fn covariances_symmetric_and_positive_definite() {
        let cfg = RegressConfig::default();
        for seed in 0..5 {
            let d = simulated(seed, 44, 0.4);
            for f in [fit_poisson(&d, &cfg).unwrap(), fit_negbin(&d, &cfg).unwrap()] {
                for c in [&f.cov_model, &f.cov_robust] {
                    assert!((c - c.transpose()).amax() <= 1e-12 * c.amax());
                    assert!(c.clone().cholesky().is_some());
                }
            }
        }
    }

    #[test]
    fn scale_equivariance() {
        let cfg = RegressConfig::default();
        let d = simulated(5, 60, 0.5);
        let c = 0.01;
        let ds = d.scaled("d", c).unwrap();
        for (a, b) in [
            (fit_poisson(&d, &cfg).unwrap(), fit_poisson(&ds, &cfg).unwrap()),
            (fit_negbin(&d, &cfg).unwrap(), fit_negbin(&ds, &cfg).unwrap()),
        ] {
            assert!((a.loglik - b.loglik).abs() < 1e-8);
            assert!((a.beta[1] - b.beta[1] * c).abs() < 1e-8);
            assert!((a.beta[0] - b.beta[0]).abs() < 1e-8);
            assert!((a.beta[2] - b.beta[2]).abs() < 1e-8);
            for (x, y) in a.fitted_means(&d).iter().zip(b.fitted_means(&ds)) {
                assert!((x - y).abs() < 1e-8 * x.max(1.0));
            }
        }
    }

    #[test]
    fn hc1_scales_hc0() {
        let d = simulated(8, 44, 0.5);
        let a = fit_negbin(&d, &RegressConfig::default()).unwrap();
        let b = fit_negbin(
            &d,
            &RegressConfig {
                covariance: CovarianceVariant::Hc1,
                ..Default::default()
            },
        )
        .unwrap();
        // three coefficients plus ln α
        let ratio = 44.0 / 40.0;
        assert!((&a.cov_robust * ratio - &b.cov_robust).amax() < 1e-12 * b.cov_robust.amax());
    }

    #[test]
    fn fits_are_deterministic() {
        let cfg = RegressConfig::default();
        let d = simulated(21, 44, 0.5);
        let a = fit_negbin(&d, &cfg).unwrap();
        let b = fit_negbin(&d, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
