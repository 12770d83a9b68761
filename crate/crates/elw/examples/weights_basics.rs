//! The EL weights themselves: solve for them, inspect the solution, and see
//! why they stay stable where inverse-probability weights blow up.
//!
//! ```bash
//! cargo run --example weights_basics
//! ```

use elw::sample::MissingDataSample;
use elw::weights::{elw_weights, k_function, max_weight_ratio};

fn main() {
    // Six units in total; three were observed, with selection probabilities
    // 0.2 / 0.5 / 0.8. The other three units are only known to exist.
    let y = [1.0, 2.0, 3.0];
    let pi = [0.2, 0.5, 0.8];
    let sample = MissingDataSample::from_scalar_observed(&y, &pi, 6).unwrap();

    let sol = elw_weights(&sample).unwrap();
    println!("bracket for alpha: [{:.4}, {:.4})", sol.bracket.0, sol.bracket.1);
    println!("alpha_hat = {:.6}, lambda = {:.6}", sol.alpha_hat, sol.lambda);
    println!("profile equation residual K(alpha_hat) = {:+.2e}", k_function(sol.alpha_hat, &pi, 6).unwrap());
    println!();

    println!("unit   pi     EL weight   1/(N pi)");
    for (i, (p, w)) in pi.iter().zip(&sol.weights).enumerate() {
        println!("  {i}    {p:.2}   {w:.6}    {:.6}", 1.0 / (6.0 * p));
    }
    let sum: f64 = sol.weights.iter().sum();
    let constraint: f64 = sol.weights.iter().zip(&pi).map(|(w, p)| w * (p - sol.alpha_hat)).sum();
    println!("sum of weights           = {sum:.12}");
    println!("sum of w * (pi - alpha)  = {constraint:+.2e}");
    println!("max weight ratio kappa   = {:.4}", max_weight_ratio(&sol, &pi, 6).unwrap());
    println!();

    // A zero selection probability is fatal for inverse weighting but fine
    // here: the EL weight of that unit stays finite and positive.
    let pi_zero = [0.0, 0.5, 0.8];
    let sample_zero = MissingDataSample::from_scalar_observed(&y, &pi_zero, 6).unwrap();
    let sol_zero = elw_weights(&sample_zero).unwrap();
    println!("with pi = (0.0, 0.5, 0.8):");
    println!("  EL weights = {:?}", sol_zero.weights.iter().map(|w| (w * 1e6).round() / 1e6).collect::<Vec<_>>());
    println!("  (an inverse-probability weight for the first unit would be 1/0)");
}
