//! Fitted selection scores: logistic regression of the indicator on a
//! covariate, estimation with the fitted probabilities, and the variance
//! correction that accounts for the fit.
//!
//! ```bash
//! cargo run --example estimated_propensity
//! ```

use elw::estimators::elw_mean_from;
use elw::inference::{elw_variance_missing, wald_interval};
use elw::propensity::{elw_variance_estimated_score, fit_logistic, influence_mle};
use elw::rng::stream;
use elw::sample::MissingDataSample;
use elw::weights::elw_weights;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn main() {
    // True selection model: logit pi = 0.3 + 1.1 x
    let n = 5000;
    let (b0, b1) = (0.3, 1.1);
    let mut rng = stream(11, 0xF0, 0);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let xcov: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
    let pi_true: Vec<f64> = xcov.iter().map(|x| 1.0 / (1.0 + (-(b0 + b1 * x)).exp())).collect();
    let d: Vec<bool> = pi_true.iter().map(|p| rng.gen::<f64>() < *p).collect();
    let y: Vec<f64> = xcov.iter().map(|x| 2.0 + 0.5 * x + 0.3 * normal.sample(&mut rng)).collect();

    let design = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { xcov[i] });
    let model = fit_logistic(&design, &d).unwrap();
    println!("fitted beta = ({:.4}, {:.4})  [truth: ({b0}, {b1})]", model.beta[0], model.beta[1]);

    let infl = influence_mle(&model, &design, &d).unwrap();
    let mean_h = infl.h.iter().sum::<nalgebra::DVector<f64>>() / n as f64;
    println!("mean influence value (should be ~0): {:+.2e}", mean_h.norm());

    // Estimate with the fitted scores in place of the true ones.
    let pi_hat = model.predict_all(&design);
    let sample = MissingDataSample::from_scalar_full(&d, &y, &pi_hat).unwrap();
    let sol = elw_weights(&sample).unwrap();
    let report = elw_mean_from(&sample, &sol);
    println!("\nELW estimate of E[Y]: {:.4}  (sample truth 2.0 + noise)", report.theta_scalar());

    // Fitting the scores changes the asymptotic variance; the corrected
    // estimator subtracts a sandwich term and can only shrink it.
    let known = elw_variance_missing(&sample, &sol, &report.theta_hat).unwrap();
    let corrected =
        elw_variance_estimated_score(&sample, &sol, &report.theta_hat, &model, &design).unwrap();
    println!("variance treating scores as known:  {:.4}", known[(0, 0)]);
    println!("variance accounting for the fit:    {:.4}", corrected[(0, 0)]);

    for (label, sigma) in [("known-score", known), ("estimated-score", corrected)] {
        let region = wald_interval(&report.theta_hat, &sigma, n, 0.95).unwrap();
        let (lo, hi) = region.bounds_scalar().unwrap();
        println!("95% interval ({label}): [{lo:.4}, {hi:.4}]");
    }
}
