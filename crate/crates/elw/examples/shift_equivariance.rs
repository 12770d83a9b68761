//! Shift equivariance: adding a constant to every response should move every
//! mean estimate by exactly that constant. Estimators whose weights sum to 1
//! (ELW, the stabilized Hajek form) have this property; plain
//! inverse-probability weighting and its thresholded variant do not, which
//! is why their error explodes when the response mean moves away from zero.
//!
//! ```bash
//! cargo run --example shift_equivariance
//! ```

use elw::estimators::{estimate, EstimatorKind};
use elw::rng::stream;
use elw::simulation::{gen_example1, true_theta_example1};

fn main() {
    let (gamma, c, n_total) = (1.5, 0.1, 2000);
    let shift = 5.0;
    let mut rng = stream(99, 0x5F, 0);
    let sample = gen_example1(gamma, c, 2, n_total, &mut rng).unwrap();
    let shifted = sample.with_shifted_g(shift);
    let theta = true_theta_example1(gamma, 2);

    println!("same draw, response shifted by +{shift}:\n");
    println!("{:<10} {:>10} {:>12} {:>14}", "estimator", "error", "error+shift", "equivariant?");
    for kind in [EstimatorKind::Elw, EstimatorKind::Sipw, EstimatorKind::Ipw, EstimatorKind::Zzz] {
        let base = estimate(&sample, kind).unwrap().theta_scalar() - theta;
        let moved = estimate(&shifted, kind).unwrap().theta_scalar() - (theta + shift);
        let dev = (moved - base).abs();
        println!(
            "{:<10} {:>10.5} {:>12.5} {:>14}",
            kind.label(),
            base,
            moved,
            if dev < 1e-10 { "yes" } else { "no" }
        );
    }
    println!("\n(the error of a shift-equivariant estimator is identical in both columns)");
}
