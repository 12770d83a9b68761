//! Unequal-probability sampling designs on one finite population:
//! Poisson, pivotal, and with-replacement probability-proportional-to-size
//! draws, each followed by the matching estimators and an ELW interval.
//!
//! ```bash
//! cargo run --example survey_designs
//! ```

use elw::designs::{inclusion_probs_proportional, pivotal_sample, poisson_sample, pps_wr_sample};
use elw::estimators::{elw_mean_wr_from, estimate, ipw_mean_wr, sipw_mean_wr, EstimatorKind};
use elw::inference::{elw_variance_missing, elw_variance_wor, wald_interval, wr_variance_with_fallback};
use elw::rng::stream;
use elw::sample::{MissingDataSample, WrSample};
use elw::simulation::gen_population_example2;
use elw::weights::{elw_weights, elw_weights_wr};

fn main() {
    let (n_total, n_draws, rho) = (3000, 500, 0.5);
    let mut rng_pop = stream(3, 0xD0, 0);
    let pop = gen_population_example2(rho, 2, n_total, &mut rng_pop);
    let theta = pop.theta();
    println!("finite population: N = {n_total}, realized mean = {theta:.4}\n");

    let pi = inclusion_probs_proportional(&pop.x, n_draws).unwrap();

    // Poisson: independent indicators, random realized size. Poisson data
    // are a missing-data problem, so the missing-data variance applies.
    let mut rng = stream(3, 0xD1, 0);
    let d = poisson_sample(&pi, &mut rng).unwrap();
    let sample = MissingDataSample::from_scalar_full(&d, &pop.y, &pi).unwrap();
    println!("Poisson draw: realized size {}", sample.n_observed());
    report_wor(&sample, theta, true);

    // Pivotal: fixed size, prescribed first-order inclusion probabilities.
    let mut rng = stream(3, 0xD2, 0);
    let d = pivotal_sample(&pi, &mut rng).unwrap();
    let sample = MissingDataSample::from_scalar_full(&d, &pop.y, &pi).unwrap();
    println!("pivotal draw: realized size {} (always exactly n)", sample.n_observed());
    report_wor(&sample, theta, false);

    // With-replacement PPS: n independent draws proportional to size.
    let total: f64 = pop.x.iter().sum();
    let q: Vec<f64> = pop.x.iter().map(|v| v / total).collect();
    let mut rng = stream(3, 0xD3, 0);
    let idx = pps_wr_sample(&q, n_draws, &mut rng).unwrap();
    let distinct: std::collections::HashSet<usize> = idx.iter().cloned().collect();
    println!("PPS draw: {} draws, {} distinct units", idx.len(), distinct.len());
    let y_drawn: Vec<f64> = idx.iter().map(|i| pop.y[*i]).collect();
    let q_drawn: Vec<f64> = idx.iter().map(|i| q[*i]).collect();
    let wr = WrSample::from_scalar(&y_drawn, &q_drawn, n_total).unwrap();
    let hh = ipw_mean_wr(&wr).unwrap();
    let hajek = sipw_mean_wr(&wr).unwrap();
    let sol = elw_weights_wr(&wr).unwrap();
    let elw = elw_mean_wr_from(&wr, &sol);
    let sigma = wr_variance_with_fallback(&wr, &sol, &elw.theta_hat).unwrap();
    // with-replacement intervals scale with the number of draws
    let region = wald_interval(&elw.theta_hat, &sigma, wr.n_draws(), 0.95).unwrap();
    let (lo, hi) = region.bounds_scalar().unwrap();
    println!("  Hansen-Hurwitz {:.4}  Hajek {:.4}  ELW {:.4}", hh.theta_scalar(), hajek.theta_scalar(), elw.theta_scalar());
    println!("  ELW 95% interval [{lo:.4}, {hi:.4}], covers target: {}", region.contains_scalar(theta));
}

fn report_wor(sample: &MissingDataSample, theta: f64, poisson: bool) {
    let ipw = estimate(sample, EstimatorKind::Ipw).unwrap();
    let sipw = estimate(sample, EstimatorKind::Sipw).unwrap();
    let zzz = estimate(sample, EstimatorKind::Zzz).unwrap();
    let sol = elw_weights(sample).unwrap();
    let elw = estimate(sample, EstimatorKind::Elw).unwrap();
    let sigma = if poisson {
        elw_variance_missing(sample, &sol, &elw.theta_hat).unwrap()
    } else {
        elw_variance_wor(sample, &sol, &elw.theta_hat).unwrap()
    };
    let region = wald_interval(&elw.theta_hat, &sigma, sample.n_total(), 0.95).unwrap();
    let (lo, hi) = region.bounds_scalar().unwrap();
    println!(
        "  HT {:.4}  Hajek {:.4}  ZZZ {:.4}  ELW {:.4}",
        ipw.theta_scalar(),
        sipw.theta_scalar(),
        zzz.theta_scalar(),
        elw.theta_scalar()
    );
    println!("  ELW 95% interval [{lo:.4}, {hi:.4}], covers target: {}\n", region.contains_scalar(theta));
}
