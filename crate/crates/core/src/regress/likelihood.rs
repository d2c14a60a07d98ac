//! Log-likelihoods, scores and Hessians for the Poisson and NB2 count models
//! with log link.
//!
//! NB2 is parameterized by `θ = (β, ln α)` with `Var(y) = μ + αμ²`. For
//! integer `y` the gamma-function ratios reduce to finite sums,
//! `lnΓ(y+r) − lnΓ(r) = Σ_{k<y} ln(r+k)` and likewise for the digamma and
//! trigamma differences, which keeps the small-α limit accurate.

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::ln_gamma;

pub(crate) fn ln_factorial(y: u64) -> f64 {
    ln_gamma(y as f64 + 1.0)
}

pub fn linear_predictor(x: &DMatrix<f64>, beta: &DVector<f64>) -> DVector<f64> {
    x * beta
}

pub fn poisson_loglik(x: &DMatrix<f64>, y: &[u64], beta: &DVector<f64>) -> f64 {
    let eta = linear_predictor(x, beta);
    y.iter()
        .zip(eta.iter())
        .map(|(&yi, &e)| yi as f64 * e - e.exp() - ln_factorial(yi))
        .sum()
}

pub fn poisson_score(x: &DMatrix<f64>, y: &[u64], beta: &DVector<f64>) -> DVector<f64> {
    let eta = linear_predictor(x, beta);
    let resid = DVector::from_iterator(
        y.len(),
        y.iter().zip(eta.iter()).map(|(&yi, &e)| yi as f64 - e.exp()),
    );
    x.transpose() * resid
}

pub fn poisson_hessian(x: &DMatrix<f64>, beta: &DVector<f64>) -> DMatrix<f64> {
    let mu = linear_predictor(x, beta).map(f64::exp);
    let mut xw = x.clone();
    for (i, mut row) in xw.row_iter_mut().enumerate() {
        row *= mu[i];
    }
    -(x.transpose() * xw)
}

/// Per-observation score contributions, one row per observation.
pub fn poisson_obs_scores(x: &DMatrix<f64>, y: &[u64], beta: &DVector<f64>) -> DMatrix<f64> {
    let eta = linear_predictor(x, beta);
    let mut s = x.clone();
    for (i, mut row) in s.row_iter_mut().enumerate() {
        row *= y[i] as f64 - eta[i].exp();
    }
    s
}

/// One observation's NB2 log-likelihood and derivatives in (η, φ = ln α).
#[derive(Debug, Clone, Copy)]
pub(crate) struct Nb2Point {
    pub ll: f64,
    pub d_eta: f64,
    pub d_phi: f64,
    pub d_eta_eta: f64,
    pub d_eta_phi: f64,
    pub d_phi_phi: f64,
}

pub(crate) fn nb2_point(y: u64, eta: f64, alpha: f64) -> Nb2Point {
    let mu = eta.exp();
    let r = 1.0 / alpha;
    let yf = y as f64;
    let rm = r + mu;

    let mut log_ratio = 0.0; // Σ ln((r+k)/(r+μ))
    let mut s1 = 0.0; // Σ 1/(r+k)
    let mut s2 = 0.0; // Σ 1/(r+k)²
    for k in 0..y {
        let rk = r + k as f64;
        log_ratio += ((k as f64 - mu) / rm).ln_1p();
        s1 += 1.0 / rk;
        s2 += 1.0 / (rk * rk);
    }
    let ll = log_ratio - r * (mu / r).ln_1p() + yf * eta - ln_factorial(y);

    let one_am = 1.0 + alpha * mu;
    let d_eta = (yf - mu) / one_am;
    let d_eta_eta = -mu * (1.0 + alpha * yf) / (one_am * one_am);
    let d_eta_phi = -(yf - mu) * alpha * mu / (one_am * one_am);

    let g = s1 - (mu / r).ln_1p() + (mu - yf) / rm;
    let g_prime = -s2 + mu / (r * rm) - (mu - yf) / (rm * rm);
    let d_phi = -r * g;
    let d_phi_phi = r * (g + r * g_prime);

    Nb2Point {
        ll,
        d_eta,
        d_phi,
        d_eta_eta,
        d_eta_phi,
        d_phi_phi,
    }
}

fn split(theta: &DVector<f64>) -> (DVector<f64>, f64) {
    let k = theta.len() - 1;
    (theta.rows(0, k).into_owned(), theta[k])
}

pub fn nb2_loglik(x: &DMatrix<f64>, y: &[u64], theta: &DVector<f64>) -> f64 {
    let (beta, phi) = split(theta);
    nb2_loglik_fixed(x, y, &beta, phi.exp())
}

/// NB2 log-likelihood at a fixed dispersion.
pub fn nb2_loglik_fixed(x: &DMatrix<f64>, y: &[u64], beta: &DVector<f64>, alpha: f64) -> f64 {
    let eta = linear_predictor(x, beta);
    y.iter()
        .zip(eta.iter())
        .map(|(&yi, &e)| nb2_point(yi, e, alpha).ll)
        .sum()
}

/// Per-observation NB2 scores; columns are β then ln α.
pub fn nb2_obs_scores(x: &DMatrix<f64>, y: &[u64], theta: &DVector<f64>) -> DMatrix<f64> {
    let (beta, phi) = split(theta);
    let alpha = phi.exp();
    let eta = linear_predictor(x, &beta);
    let k = beta.len();
    let mut s = DMatrix::zeros(y.len(), k + 1);
    for i in 0..y.len() {
        let pt = nb2_point(y[i], eta[i], alpha);
        for j in 0..k {
            s[(i, j)] = pt.d_eta * x[(i, j)];
        }
        s[(i, k)] = pt.d_phi;
    }
    s
}

pub fn nb2_score(x: &DMatrix<f64>, y: &[u64], theta: &DVector<f64>) -> DVector<f64> {
    let s = nb2_obs_scores(x, y, theta);
    s.row_sum().transpose()
}

pub fn nb2_hessian(x: &DMatrix<f64>, y: &[u64], theta: &DVector<f64>) -> DMatrix<f64> {
    let (beta, phi) = split(theta);
    let alpha = phi.exp();
    let eta = linear_predictor(x, &beta);
    let k = beta.len();
    let mut h = DMatrix::zeros(k + 1, k + 1);
    for i in 0..y.len() {
        let pt = nb2_point(y[i], eta[i], alpha);
        for a in 0..k {
            let xa = x[(i, a)];
            for b in 0..=a {
                h[(a, b)] += pt.d_eta_eta * xa * x[(i, b)];
            }
            h[(k, a)] += pt.d_eta_phi * xa;
        }
        h[(k, k)] += pt.d_phi_phi;
    }
    for a in 0..=k {
        for b in 0..a {
            h[(b, a)] = h[(a, b)];
        }
    }
    h
}

/// Score and Hessian in β alone at a fixed dispersion.
pub(crate) fn nb2_beta_derivs(
    x: &DMatrix<f64>,
    y: &[u64],
    beta: &DVector<f64>,
    alpha: f64,
) -> (DVector<f64>, DMatrix<f64>, DMatrix<f64>) {
    let eta = linear_predictor(x, beta);
    let k = beta.len();
    let mut obs = DMatrix::zeros(y.len(), k);
    let mut h = DMatrix::zeros(k, k);
    for i in 0..y.len() {
        let pt = nb2_point(y[i], eta[i], alpha);
        for a in 0..k {
            obs[(i, a)] = pt.d_eta * x[(i, a)];
            for b in 0..k {
                h[(a, b)] += pt.d_eta_eta * x[(i, a)] * x[(i, b)];
            }
        }
    }
    (obs.row_sum().transpose(), h, obs)
}
