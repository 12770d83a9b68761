//! The full estimator suite on one synthetic missing-data set, with Wald
//! intervals for the three estimators that carry variance estimators.
//!
//! ```bash
//! cargo run --example estimate_missing
//! ```

use elw::estimators::{estimate, EstimatorKind};
use elw::inference::{point_and_variance, wald_interval};
use elw::rng::stream;
use elw::simulation::{gen_example1, true_theta_example1};

fn main() {
    // Heavy-tailed selection: P(pi <= u) = u^0.5, so small probabilities are
    // common and the naive inverse-probability estimator is fragile.
    let (gamma, c, model, n_total) = (1.5, 0.1, 4, 2000);
    let mut rng = stream(2024, 0xDA, 0);
    let sample = gen_example1(gamma, c, model, n_total, &mut rng).unwrap();
    let theta = true_theta_example1(gamma, model);

    println!(
        "one draw: N = {}, observed n = {}, min observed pi = {:.5}",
        sample.n_total(),
        sample.n_observed(),
        sample.pi_observed().iter().cloned().fold(f64::INFINITY, f64::min),
    );
    println!("target mean: {theta:.4}\n");

    println!("estimator  estimate   error      95% interval");
    for kind in [
        EstimatorKind::Ipw,
        EstimatorKind::Sipw,
        EstimatorKind::Zzz,
        EstimatorKind::Chim,
        EstimatorKind::MwTrim { s: 1 },
        EstimatorKind::Elw,
    ] {
        let report = estimate(&sample, kind).unwrap();
        let est = report.theta_scalar();
        let interval = match kind {
            EstimatorKind::Ipw | EstimatorKind::Sipw | EstimatorKind::Elw => {
                let (r, sigma) = point_and_variance(&sample, kind).unwrap();
                let region = wald_interval(&r.theta_hat, &sigma, sample.n_total(), 0.95).unwrap();
                let (lo, hi) = region.bounds_scalar().unwrap();
                format!("[{lo:.4}, {hi:.4}]")
            }
            _ => "-".into(),
        };
        println!("{:<9}  {est:8.4}   {:+8.4}   {interval}", kind.label(), est - theta);
    }
}
