//! Logistic propensity-score estimation and the estimated-score variance
//! corrections.
//!
//! When the selection probabilities are fitted rather than known, the
//! estimators' asymptotic variances pick up a term driven by the fit's
//! influence function `h(D, Z)`. For the maximum-likelihood logistic fit,
//! `h(D,Z) = (D - pi)/(pi(1-pi)) * Binv * grad_pi`, which simplifies exactly
//! to `Binv * (D - pi) x` under the logistic link.

use nalgebra::{DMatrix, DVector};

use crate::error::{ElwError, Result};
use crate::inference::MomentSet;
use crate::sample::MissingDataSample;
use crate::weights::ElwSolution;

const GRAD_TOL: f64 = 1e-8;
const MAX_ITER: usize = 100;
const SEPARATION_BETA_NORM: f64 = 1e3;

/// A fitted logistic selection model. `beta` includes the intercept when the
/// design matrix carries an intercept column.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    pub beta: DVector<f64>,
}

/// Fitted probability and its parameter gradient at one design row.
#[derive(Debug, Clone)]
pub struct ScoreDerivatives {
    pub pi: f64,
    /// `grad_beta pi = pi (1 - pi) x` under the logistic link.
    pub grad: DVector<f64>,
}

impl LogisticModel {
    /// Fitted probability at a design row.
    pub fn predict(&self, x_row: &[f64]) -> f64 {
        let lp: f64 = x_row.iter().zip(self.beta.iter()).map(|(a, b)| a * b).sum();
        sigmoid(lp)
    }

    /// Fitted probabilities for every row of a design matrix.
    pub fn predict_all(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows()).map(|i| self.predict(x.row(i).transpose().as_slice())).collect()
    }

    /// Probability and gradient at one design row.
    pub fn derivatives(&self, x_row: &[f64]) -> ScoreDerivatives {
        let pi = self.predict(x_row);
        let w = pi * (1.0 - pi);
        ScoreDerivatives { pi, grad: DVector::from_iterator(x_row.len(), x_row.iter().map(|v| w * v)) }
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn log_likelihood(x: &DMatrix<f64>, d: &[bool], beta: &DVector<f64>) -> f64 {
    let mut ll = 0.0;
    for (i, di) in d.iter().enumerate() {
        let lp: f64 = x.row(i).iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
        // log sigma(lp) and log(1 - sigma(lp)) in the overflow-safe form
        let (y, t) = if lp < 0.0 { (*di as u8 as f64, lp) } else { (1.0 - *di as u8 as f64, -lp) };
        ll += y * t - t.exp().ln_1p();
    }
    ll
}

/// Total score `X' (d - pi)` of the binomial log-likelihood.
pub fn logistic_gradient(x: &DMatrix<f64>, d: &[bool], beta: &DVector<f64>) -> DVector<f64> {
    let p = x.ncols();
    let mut grad = DVector::zeros(p);
    for (i, di) in d.iter().enumerate() {
        let lp: f64 = x.row(i).iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
        let resid = (*di as u8 as f64) - sigmoid(lp);
        for (g, v) in grad.iter_mut().zip(x.row(i).iter()) {
            *g += resid * v;
        }
    }
    grad
}

/// Binomial log-likelihood (exposed for the finite-difference check of the
/// analytic gradient).
pub fn logistic_log_likelihood(x: &DMatrix<f64>, d: &[bool], beta: &DVector<f64>) -> f64 {
    log_likelihood(x, d, beta)
}

/// Maximum-likelihood logistic fit of the selection indicator on a design
/// matrix (pass an explicit intercept column if one is wanted).
///
/// Damped Newton iterations with step halving; converges when the total score
/// norm drops below 1e-8. Detects complete separation (`|beta|` escaping with
/// a non-vanishing score) and a singular information matrix.
pub fn fit_logistic(x: &DMatrix<f64>, d: &[bool]) -> Result<LogisticModel> {
    let n = x.nrows();
    let p = x.ncols();
    if n != d.len() {
        return Err(ElwError::InvalidSample("design rows and indicators differ in length".into()));
    }
    if n < p {
        return Err(ElwError::InvalidConfig(format!("need at least p = {p} rows, got {n}")));
    }
    let mut beta = DVector::<f64>::zeros(p);
    let mut ll = log_likelihood(x, d, &beta);
    for _ in 0..MAX_ITER {
        let grad = logistic_gradient(x, d, &beta);
        let grad_norm = grad.norm();
        if grad_norm <= GRAD_TOL {
            return Ok(LogisticModel { beta });
        }
        if beta.norm() > SEPARATION_BETA_NORM {
            return Err(ElwError::Separation { beta_norm: beta.norm(), grad_norm });
        }
        // total information X' W X with W = diag(pi(1-pi))
        let mut info = DMatrix::<f64>::zeros(p, p);
        for i in 0..n {
            let lp: f64 = x.row(i).iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
            let pi = sigmoid(lp);
            let w = pi * (1.0 - pi);
            for k in 0..p {
                for l in 0..=k {
                    info[(k, l)] += w * x[(i, k)] * x[(i, l)];
                }
            }
        }
        info.fill_upper_triangle_with_lower_triangle();
        let chol = info
            .clone()
            .cholesky()
            .ok_or_else(|| ElwError::SingularMatrix("logistic information matrix".into()))?;
        let step = chol.solve(&grad);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = &beta + &step * t;
            let cand_ll = log_likelihood(x, d, &cand);
            if cand_ll > ll || (cand_ll - ll).abs() < 1e-14 {
                beta = cand;
                ll = cand_ll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let grad_norm = logistic_gradient(x, d, &beta).norm();
    if grad_norm <= GRAD_TOL {
        Ok(LogisticModel { beta })
    } else if beta.norm() > SEPARATION_BETA_NORM {
        Err(ElwError::Separation { beta_norm: beta.norm(), grad_norm })
    } else {
        Err(ElwError::NoConvergence(format!(
            "logistic fit stalled with score norm {grad_norm:.3e}"
        )))
    }
}

/// Per-unit influence values of the logistic MLE plus the list of units where
/// the generic form `(D - pi)/(pi(1-pi)) Binv grad_pi` is ill-defined
/// (`pi(1-pi) <= 1e-12`); the simplified logistic form used here stays exact
/// for them.
#[derive(Debug, Clone)]
pub struct InfluenceValues {
    pub h: Vec<DVector<f64>>,
    pub flagged: Vec<usize>,
    /// `(1/N) sum_i pi_i (1-pi_i) x_i x_i'`, the normalized information.
    pub info: DMatrix<f64>,
}

/// Influence function values `h(D_i, Z_i)` of the logistic MLE.
pub fn influence_mle(model: &LogisticModel, x: &DMatrix<f64>, d: &[bool]) -> Result<InfluenceValues> {
    let n = x.nrows();
    let p = x.ncols();
    if n != d.len() {
        return Err(ElwError::InvalidSample("design rows and indicators differ in length".into()));
    }
    let mut info = DMatrix::<f64>::zeros(p, p);
    let mut flagged = Vec::new();
    let mut resid_x = Vec::with_capacity(n);
    for i in 0..n {
        let row = x.row(i);
        let pi = model.predict(row.transpose().as_slice());
        let w = pi * (1.0 - pi);
        if w <= 1e-12 {
            flagged.push(i);
        }
        for k in 0..p {
            for l in 0..=k {
                info[(k, l)] += w * x[(i, k)] * x[(i, l)];
            }
        }
        let resid = (d[i] as u8 as f64) - pi;
        resid_x.push(DVector::from_iterator(p, row.iter().map(|v| resid * v)));
    }
    info.fill_upper_triangle_with_lower_triangle();
    info /= n as f64;
    let chol = info
        .clone()
        .cholesky()
        .ok_or_else(|| ElwError::SingularMatrix("normalized information matrix".into()))?;
    let h = resid_x.into_iter().map(|v| chol.solve(&v)).collect();
    Ok(InfluenceValues { h, flagged, info })
}

/// ELW variance under an estimated logistic score:
///
/// ```text
/// Bgg - theta theta' - G (B11 - 1) G'
///   - (G B1pd - Bgpd) Binv (G B1pd - Bgpd)'
/// ```
///
/// with ELW plug-in moments (`N sum p_i^2 ...`) for every `B` term and the
/// normalized logistic information for `Binv`. Requires a fully enumerated
/// sample whose rows align with the design matrix.
pub fn elw_variance_estimated_score(
    sample: &MissingDataSample,
    sol: &ElwSolution,
    theta: &DVector<f64>,
    model: &LogisticModel,
    x: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let q = sample.dim();
    let p = x.ncols();
    if !sample.is_fully_enumerated() || x.nrows() != sample.rows() {
        return Err(ElwError::InvalidSample(
            "estimated-score variance needs covariates for all N units".into(),
        ));
    }
    if sample.n_observed() < 2 {
        return Err(ElwError::DegenerateVariance(
            "variance estimation needs at least two observed units".into(),
        ));
    }
    let m = MomentSet::elw(
        sample.observed_units().map(|u| (u.g, sol.weights[u.row])),
        sample.n_total(),
        q,
        theta,
        false,
    );
    if m.b11 <= 1.0 + 1e-10 {
        return Err(ElwError::DegenerateVariance(format!("B11 = {} does not exceed 1", m.b11)));
    }
    let g_coef = m.g_coef.as_ref().unwrap();

    // ELW plug-ins for the score moments: b1pd = N sum p^2 grad_pi,
    // bgpd = N sum p^2 g grad_pi'
    let nf = sample.n_total() as f64;
    let mut b1pd = DVector::<f64>::zeros(p);
    let mut bgpd = DMatrix::<f64>::zeros(q, p);
    let mut info = DMatrix::<f64>::zeros(p, p);
    for i in 0..sample.rows() {
        let row = x.row(i);
        let der = model.derivatives(row.transpose().as_slice());
        let w = der.pi * (1.0 - der.pi);
        for k in 0..p {
            for l in 0..=k {
                info[(k, l)] += w * x[(i, k)] * x[(i, l)];
            }
        }
    }
    info.fill_upper_triangle_with_lower_triangle();
    info /= nf;
    for u in sample.observed_units() {
        let pw = sol.weights[u.row];
        let w2 = nf * pw * pw;
        let der = model.derivatives(x.row(u.row).transpose().as_slice());
        for k in 0..p {
            b1pd[k] += w2 * der.grad[k];
            for l in 0..q {
                bgpd[(l, k)] += w2 * u.g[l] * der.grad[k];
            }
        }
    }

    // sandwich term (G b1pd' - bgpd) info^{-1} (...)'
    let v = g_coef * b1pd.transpose() - &bgpd; // q x p
    let sandwich = if v.iter().all(|t| t.abs() == 0.0) {
        DMatrix::zeros(q, q)
    } else {
        let chol = info
            .clone()
            .cholesky()
            .ok_or_else(|| ElwError::SingularMatrix("normalized information matrix".into()))?;
        let solved = chol.solve(&v.transpose()); // p x q
        &v * solved
    };

    let mut sigma =
        &m.bgg - theta * theta.transpose() - g_coef * g_coef.transpose() * (m.b11 - 1.0) - sandwich;
    let t = sigma.transpose();
    sigma += t;
    sigma *= 0.5;
    Ok(sigma)
}

/// IPW variance under an estimated logistic score: the empirical second
/// moment of the per-unit influence values
/// `(D g/pi - theta) - Bgpd h(D, Z)`, with `Bgpd` estimated by
/// `(1/N) sum_{d=1} g grad_pi'/pi^2`.
pub fn ipw_variance_estimated_score(
    sample: &MissingDataSample,
    theta: &DVector<f64>,
    model: &LogisticModel,
    x: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    estimated_score_empirical(sample, theta, model, x, false)
}

/// SIPW variance under an estimated logistic score: empirical second moment
/// of `D (g - theta)/pi + (theta B1pd - Bgpd) h(D, Z)`.
pub fn sipw_variance_estimated_score(
    sample: &MissingDataSample,
    theta: &DVector<f64>,
    model: &LogisticModel,
    x: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    estimated_score_empirical(sample, theta, model, x, true)
}

fn estimated_score_empirical(
    sample: &MissingDataSample,
    theta: &DVector<f64>,
    model: &LogisticModel,
    x: &DMatrix<f64>,
    stabilized: bool,
) -> Result<DMatrix<f64>> {
    let q = sample.dim();
    let p = x.ncols();
    if !sample.is_fully_enumerated() || x.nrows() != sample.rows() {
        return Err(ElwError::InvalidSample(
            "estimated-score variance needs covariates for all N units".into(),
        ));
    }
    let d = sample.indicators();
    let nf = sample.n_total() as f64;

    // inverse-probability plug-ins for the score moments
    let mut b1pd = DVector::<f64>::zeros(p);
    let mut bgpd = DMatrix::<f64>::zeros(q, p);
    for u in sample.observed_units() {
        if u.pi <= 0.0 {
            return Err(ElwError::DivisionByZero { unit: u.row });
        }
        let der = model.derivatives(x.row(u.row).transpose().as_slice());
        let w = 1.0 / (nf * u.pi * u.pi);
        for k in 0..p {
            b1pd[k] += w * der.grad[k];
            for l in 0..q {
                bgpd[(l, k)] += w * u.g[l] * der.grad[k];
            }
        }
    }
    let coef: DMatrix<f64> = if stabilized {
        theta * b1pd.transpose() - &bgpd
    } else {
        -bgpd.clone()
    };
    // a vanishing score gradient removes the influence term (and makes the
    // information singular, so the solve must not even be attempted)
    let influence = if coef.iter().all(|t| *t == 0.0) {
        None
    } else {
        Some(influence_mle(model, x, d)?)
    };

    let mut sigma = DMatrix::<f64>::zeros(q, q);
    let mut obs = sample.observed_units();
    let mut next = obs.next();
    for i in 0..sample.rows() {
        // psi_i = (D g/pi - theta) [+ theta adjustment] + coef * h_i
        let mut psi = match &influence {
            Some(infl) => &coef * &infl.h[i],
            None => DVector::zeros(q),
        };
        if stabilized {
            if let Some(u) = &next {
                if u.row == i {
                    for (s, (g, t)) in psi.iter_mut().zip(u.g.iter().zip(theta.iter())) {
                        *s += (g - t) / u.pi;
                    }
                    next = obs.next();
                }
            }
        } else {
            psi -= theta;
            if let Some(u) = &next {
                if u.row == i {
                    for (s, g) in psi.iter_mut().zip(u.g.iter()) {
                        *s += g / u.pi;
                    }
                    next = obs.next();
                }
            }
        }
        sigma += &psi * psi.transpose();
    }
    sigma /= nf;
    let t = sigma.transpose();
    sigma += t;
    sigma *= 0.5;
    Ok(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn design_with_intercept(cov: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(cov.len(), 2, |i, j| if j == 0 { 1.0 } else { cov[i] })
    }

    fn simulate(beta0: f64, beta1: f64, n: usize, seed: u64) -> (DMatrix<f64>, Vec<bool>) {
        let mut rng = stream(seed, 0xF17, 0);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let cov: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        let d: Vec<bool> = cov
            .iter()
            .map(|c| {
                let pi = sigmoid(beta0 + beta1 * c);
                rng.gen::<f64>() < pi
            })
            .collect();
        (design_with_intercept(&cov), d)
    }

    #[test]
    fn gradient_matches_central_differences() {
        let (x, d) = simulate(0.4, -0.8, 250, 3);
        let beta = DVector::from_vec(vec![0.2, -0.3]);
        let grad = logistic_gradient(&x, &d, &beta);
        let step = 1e-6;
        for k in 0..2 {
            let mut up = beta.clone();
            up[k] += step;
            let mut down = beta.clone();
            down[k] -= step;
            let fd = (log_likelihood(&x, &d, &up) - log_likelihood(&x, &d, &down)) / (2.0 * step);
            assert_relative_eq!(grad[k], fd, max_relative = 1e-5);
        }
    }

    #[test]
    fn independent_indicator_gives_near_zero_coefficients() {
        let mut rng = stream(5, 0xF17, 1);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let n = 40_000;
        let cov: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        let d: Vec<bool> = (0..n).map(|_| rng.gen::<f64>() < 0.5).collect();
        let model = fit_logistic(&design_with_intercept(&cov), &d).unwrap();
        assert!(model.beta[0].abs() < 0.05, "intercept {}", model.beta[0]);
        assert!(model.beta[1].abs() < 0.05, "slope {}", model.beta[1]);
    }

    #[test]
    fn recovers_known_coefficients_within_three_se() {
        let (x, d) = simulate(0.5, -1.25, 100_000, 11);
        let model = fit_logistic(&x, &d).unwrap();
        // asymptotic se from the inverse information at the fit
        let infl = influence_mle(&model, &x, &d).unwrap();
        let inv = infl.info.clone().try_inverse().unwrap();
        let n = x.nrows() as f64;
        for (k, truth) in [(0usize, 0.5f64), (1, -1.25)] {
            let se = (inv[(k, k)] / n).sqrt();
            assert!(
                (model.beta[k] - truth).abs() <= 3.0 * se,
                "beta[{k}] = {} vs {truth} (se {se})",
                model.beta[k]
            );
        }
        // converged score
        assert!(logistic_gradient(&x, &d, &model.beta).norm() <= 1e-8);
    }

    #[test]
    fn separation_is_detected() {
        let cov: Vec<f64> = (0..40).map(|i| i as f64 / 40.0 - 0.5).collect();
        let d: Vec<bool> = cov.iter().map(|c| *c > 0.0).collect();
        let err = fit_logistic(&design_with_intercept(&cov), &d).unwrap_err();
        assert!(matches!(err, ElwError::Separation { .. } | ElwError::NoConvergence(_)));
    }

    #[test]
    fn rescaled_covariate_gives_identical_scores() {
        let (x, d) = simulate(0.3, 0.9, 2_000, 21);
        let model = fit_logistic(&x, &d).unwrap();
        let mut x2 = x.clone();
        for i in 0..x2.nrows() {
            x2[(i, 1)] *= 10.0;
        }
        let model2 = fit_logistic(&x2, &d).unwrap();
        for i in 0..x.nrows() {
            let p1 = model.predict(x.row(i).transpose().as_slice());
            let p2 = model2.predict(x2.row(i).transpose().as_slice());
            assert_relative_eq!(p1, p2, epsilon = 1e-8);
            assert!(p1 > 0.0 && p1 < 1.0);
        }
    }

    #[test]
    fn influence_values_have_zero_mean_and_match_unsimplified_form() {
        let (x, d) = simulate(0.2, 0.7, 3_000, 31);
        let model = fit_logistic(&x, &d).unwrap();
        let infl = influence_mle(&model, &x, &d).unwrap();
        let p = x.ncols();
        let mut mean = DVector::<f64>::zeros(p);
        for h in &infl.h {
            mean += h;
        }
        mean /= x.nrows() as f64;
        assert!(mean.norm() <= 1e-8, "mean influence norm {}", mean.norm());

        // unsimplified form (D - pi)/(pi(1-pi)) * Binv * grad_pi
        let chol = infl.info.clone().cholesky().unwrap();
        for i in (0..x.nrows()).step_by(617) {
            let row = x.row(i);
            let der = model.derivatives(row.transpose().as_slice());
            let scale = ((d[i] as u8 as f64) - der.pi) / (der.pi * (1.0 - der.pi));
            let h_raw = chol.solve(&(der.grad.clone() * scale));
            assert_relative_eq!((h_raw - &infl.h[i]).norm(), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn extreme_fitted_probability_is_flagged() {
        let cov = vec![-40.0, 0.1, 0.2, -0.1, 0.3, 0.15];
        let x = design_with_intercept(&cov);
        let d = vec![false, true, false, true, true, false];
        let model = LogisticModel { beta: DVector::from_vec(vec![0.0, 1.0]) };
        let infl = influence_mle(&model, &x, &d).unwrap();
        assert_eq!(infl.flagged, vec![0]);
        assert!(infl.h[0].iter().all(|v| v.is_finite()));
    }

    #[test]
    fn zero_gradient_design_reduces_to_known_score_variance() {
        // all-zero covariates: grad_pi = 0 and the correction vanishes
        let n = 60;
        let x = DMatrix::<f64>::zeros(n, 1);
        let model = LogisticModel { beta: DVector::from_vec(vec![0.3]) };
        let mut rng = stream(3, 0xF17, 9);
        let y: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0).collect();
        let pi = vec![0.5; n]; // sigmoid(0) with beta'x = 0
        let d: Vec<bool> = (0..n).map(|_| rng.gen::<f64>() < 0.5).collect();
        let sample = MissingDataSample::from_scalar_full(&d, &y, &pi).unwrap();
        let sol = crate::weights::elw_weights(&sample).unwrap();
        let report = crate::estimators::elw_mean_from(&sample, &sol);
        let known = crate::inference::elw_variance_missing(&sample, &sol, &report.theta_hat).unwrap();
        let est = elw_variance_estimated_score(&sample, &sol, &report.theta_hat, &model, &x).unwrap();
        assert_relative_eq!(known[(0, 0)], est[(0, 0)], epsilon = 1e-10);
    }

    #[test]
    fn estimated_score_variance_never_exceeds_known_score() {
        let (x, d) = simulate(0.1, 0.8, 4_000, 41);
        let model = fit_logistic(&x, &d).unwrap();
        let pi = model.predict_all(&x);
        let mut rng = stream(17, 0xF17, 2);
        let y: Vec<f64> = (0..x.nrows()).map(|_| rng.gen::<f64>() + 1.0).collect();
        let sample = MissingDataSample::from_scalar_full(&d, &y, &pi).unwrap();
        let sol = crate::weights::elw_weights(&sample).unwrap();
        let report = crate::estimators::elw_mean_from(&sample, &sol);
        let known = crate::inference::elw_variance_missing(&sample, &sol, &report.theta_hat).unwrap();
        let est = elw_variance_estimated_score(&sample, &sol, &report.theta_hat, &model, &x).unwrap();
        assert!(est[(0, 0)] <= known[(0, 0)] + 1e-10);
        assert!(est[(0, 0)].is_finite());
    }

    #[test]
    fn estimated_score_variance_matches_independent_summation() {
        // re-evaluate the closing display from scratch with plain loops
        let (x, d) = simulate(0.2, 0.6, 800, 51);
        let model = fit_logistic(&x, &d).unwrap();
        let pi = model.predict_all(&x);
        let mut rng = stream(19, 0xF17, 4);
        let y: Vec<f64> = (0..x.nrows()).map(|_| 2.0 * rng.gen::<f64>()).collect();
        let sample = MissingDataSample::from_scalar_full(&d, &y, &pi).unwrap();
        let sol = crate::weights::elw_weights(&sample).unwrap();
        let report = crate::estimators::elw_mean_from(&sample, &sol);
        let theta = report.theta_scalar();
        let sigma = elw_variance_estimated_score(&sample, &sol, &report.theta_hat, &model, &x).unwrap();

        let n = x.nrows();
        let nf = n as f64;
        let (mut b11, mut bg1, mut bgg) = (0.0, 0.0, 0.0);
        let mut b1pd = [0.0; 2];
        let mut bgpd = [0.0; 2];
        let mut info = [[0.0; 2]; 2];
        for i in 0..n {
            let w2 = nf * sol.weights[i] * sol.weights[i];
            b11 += w2;
            bg1 += w2 * y[i] * (d[i] as u8 as f64);
            bgg += w2 * y[i] * y[i] * (d[i] as u8 as f64);
            let grad_scale = pi[i] * (1.0 - pi[i]);
            for k in 0..2 {
                let g_k = grad_scale * x[(i, k)];
                if d[i] {
                    b1pd[k] += w2 * g_k;
                    bgpd[k] += w2 * y[i] * g_k;
                }
                for l in 0..2 {
                    info[k][l] += grad_scale * x[(i, k)] * x[(i, l)] / nf;
                }
            }
        }
        let g_coef = (bg1 - theta) / (b11 - 1.0);
        let v = [g_coef * b1pd[0] - bgpd[0], g_coef * b1pd[1] - bgpd[1]];
        // 2x2 solve for info^{-1} v
        let det = info[0][0] * info[1][1] - info[0][1] * info[1][0];
        let inv_v = [
            (info[1][1] * v[0] - info[0][1] * v[1]) / det,
            (-info[1][0] * v[0] + info[0][0] * v[1]) / det,
        ];
        let sandwich = v[0] * inv_v[0] + v[1] * inv_v[1];
        let oracle = bgg - theta * theta - g_coef * g_coef * (b11 - 1.0) - sandwich;
        assert_relative_eq!(sigma[(0, 0)], oracle, max_relative = 1e-9);
    }

    #[test]
    fn empirical_estimated_score_variances_reduce_when_gradient_vanishes() {
        let n = 80;
        let x = DMatrix::<f64>::zeros(n, 1);
        let model = LogisticModel { beta: DVector::from_vec(vec![0.0]) };
        let mut rng = stream(23, 0xF17, 3);
        let y: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 3.0).collect();
        let pi = vec![0.5; n];
        let d: Vec<bool> = (0..n).map(|_| rng.gen::<f64>() < 0.5).collect();
        let sample = MissingDataSample::from_scalar_full(&d, &y, &pi).unwrap();

        let ipw = crate::estimators::ipw_mean(&sample).unwrap();
        let known = crate::inference::ipw_variance_missing(&sample, &ipw.theta_hat).unwrap();
        let est = ipw_variance_estimated_score(&sample, &ipw.theta_hat, &model, &x).unwrap();
        assert_relative_eq!(known[(0, 0)], est[(0, 0)], epsilon = 1e-10);

        let sipw = crate::estimators::sipw_mean(&sample).unwrap();
        let known_s = crate::inference::sipw_variance_missing(&sample, &sipw.theta_hat).unwrap();
        let est_s = sipw_variance_estimated_score(&sample, &sipw.theta_hat, &model, &x).unwrap();
        assert_relative_eq!(known_s[(0, 0)], est_s[(0, 0)], epsilon = 1e-10);
    }
}
