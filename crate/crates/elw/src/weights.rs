//! Empirical-likelihood weight solver.
//!
//! Given the observed selection probabilities `pi_1..pi_n`, the observed
//! count `n`, and the total count `N`, the maximum-EL probability masses are
//!
//! ```text
//! p_i = (1 - alpha) / (N * (xi_i - alpha)),   xi_i = n/N + (1 - n/N) pi_i,
//! ```
//!
//! where `alpha` is the unique root of
//!
//! ```text
//! K(alpha) = sum_i (pi_i - alpha) / (xi_i - alpha) = 0
//! ```
//!
//! in `[min pi_i, min xi_i)`. `K` is strictly decreasing on that interval, so
//! a bisection search is guaranteed to converge. The weights sum to exactly 1
//! at the root, never involve `1/pi_i`, and stay well defined even when some
//! observed `pi_i` are zero.

use crate::error::{ElwError, Result};
use crate::sample::{MissingDataSample, WrSample};

/// Observed probabilities below this spread are treated as all equal, in
/// which case the solution collapses to `alpha = mean(pi)` and weights `1/n`.
const EQUAL_PI_SPREAD: f64 = 1e-12;

/// Switch `K` to compensated summation above this many observed units.
const KAHAN_THRESHOLD: usize = 10_000;

/// Solved EL weights: the root `alpha`, the multiplier `lambda(alpha)`, the
/// per-row weights (zero exactly on unobserved rows), and the root bracket
/// `(zeta_l, zeta_u)`.
#[derive(Debug, Clone)]
pub struct ElwSolution {
    pub alpha_hat: f64,
    pub lambda: f64,
    /// One weight per stored row of the input sample.
    pub weights: Vec<f64>,
    pub bracket: (f64, f64),
}

impl ElwSolution {
    /// Weights of observed units only, in row order.
    pub fn observed_weights<'a>(&'a self, observed: &'a [bool]) -> impl Iterator<Item = f64> + 'a {
        self.weights
            .iter()
            .zip(observed)
            .filter(|(_, s)| **s)
            .map(|(w, _)| *w)
    }
}

/// Shrunk scores `xi_i = n/N + (1 - n/N) pi_i` for the observed units.
///
/// `xi_i >= pi_i` and `xi_i >= n/N` whenever `pi_i <= 1`, which is what makes
/// the root bracket non-empty.
pub fn xi_values(pi_obs: &[f64], n_total: usize) -> Result<Vec<f64>> {
    let n = pi_obs.len();
    if n == 0 || n > n_total {
        return Err(ElwError::InvalidSample(format!(
            "observed count n = {n} outside 1..=N = {n_total}"
        )));
    }
    let f = n as f64 / n_total as f64;
    Ok(pi_obs.iter().map(|p| f + (1.0 - f) * p).collect())
}

fn kahan_sum(terms: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for t in terms {
        let y = t - c;
        let s = sum + y;
        c = (s - sum) - y;
        sum = s;
    }
    sum
}

fn k_value(alpha: f64, pi_obs: &[f64], xi: &[f64]) -> f64 {
    let terms = pi_obs.iter().zip(xi).map(|(p, x)| (p - alpha) / (x - alpha));
    if pi_obs.len() > KAHAN_THRESHOLD {
        kahan_sum(terms)
    } else {
        terms.sum()
    }
}

/// The profile equation `K(alpha) = sum_i (pi_i - alpha)/(xi_i - alpha)`.
///
/// Defined for `alpha < min xi_i`; strictly decreasing there.
pub fn k_function(alpha: f64, pi_obs: &[f64], n_total: usize) -> Result<f64> {
    let xi = xi_values(pi_obs, n_total)?;
    let min_xi = xi.iter().cloned().fold(f64::INFINITY, f64::min);
    if alpha >= min_xi {
        return Err(ElwError::Domain(format!(
            "alpha = {alpha} is not below min xi = {min_xi}"
        )));
    }
    Ok(k_value(alpha, pi_obs, &xi))
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Solve `K(alpha) = 0` for the unique root in `[zeta_l, zeta_u)` with
/// `zeta_l = min pi_i` and `zeta_u = min xi_i`.
///
/// Degenerate branches: with `n = N` the equation is linear and the root is
/// `mean(pi)`; with all observed `pi` equal the root is that common value.
/// Both are returned without iteration.
pub fn solve_alpha(pi_obs: &[f64], n_total: usize) -> Result<f64> {
    let n = pi_obs.len();
    if n == 0 {
        return Err(ElwError::InvalidSample("no observed units".into()));
    }
    if n > n_total {
        return Err(ElwError::InvalidSample(format!("n = {n} exceeds N = {n_total}")));
    }
    let (min_pi, max_pi) = min_max(pi_obs);
    if n == n_total || max_pi - min_pi < EQUAL_PI_SPREAD {
        return Ok(mean(pi_obs));
    }

    let xi = xi_values(pi_obs, n_total)?;
    let zeta_l = min_pi;
    let zeta_u = xi.iter().cloned().fold(f64::INFINITY, f64::min);
    let delta = 1e-14 * zeta_u.abs().max(1.0);
    let mut lo = zeta_l;
    let mut hi = zeta_u - delta;
    if hi <= lo {
        // Bracket collapsed; only possible when zeta_u <= zeta_l, i.e. some
        // working probability exceeds 1 (with-replacement inputs).
        return Err(ElwError::DegenerateLikelihood(format!(
            "empty root bracket [{zeta_l}, {zeta_u})"
        )));
    }
    let k_lo = k_value(lo, pi_obs, &xi);
    if k_lo <= 0.0 {
        // K(min pi) >= 0 with equality only in the all-equal case handled
        // above; tolerate tiny negatives from rounding.
        return Ok(lo);
    }
    if k_value(hi, pi_obs, &xi) >= 0.0 {
        return Err(ElwError::DegenerateLikelihood(
            "profile equation has no sign change in the root bracket".into(),
        ));
    }
    // Bisection; K is strictly decreasing on the bracket. Runs until the
    // bracket is exhausted in double precision, well inside the 1e-12 /
    // |K| <= 1e-9 contract.
    for _ in 0..120 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if k_value(mid, pi_obs, &xi) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn min_max(xs: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in xs {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    (lo, hi)
}

/// Core of [`elw_weights`]: observed-only weights from the probabilities,
/// observed count (= `pi_obs.len()`), and total count. Shared by the
/// missing-data and with-replacement entry points.
pub fn elw_weights_from_parts(pi_obs: &[f64], n_total: usize) -> Result<(f64, f64, Vec<f64>, (f64, f64))> {
    let n = pi_obs.len();
    let alpha = solve_alpha(pi_obs, n_total)?;
    let (min_pi, max_pi) = min_max(pi_obs);
    let f = n as f64 / n_total as f64;
    let bracket = (min_pi, f + (1.0 - f) * min_pi);

    if n == n_total {
        // No missing units: lambda = 0 and the EL weights are uniform.
        return Ok((alpha, 0.0, vec![1.0 / n as f64; n], bracket));
    }
    if 1.0 - alpha <= EQUAL_PI_SPREAD {
        return Err(ElwError::DegenerateLikelihood(
            "alpha = 1: all observed probabilities are 1 while some units are missing".into(),
        ));
    }
    let lambda = (n_total - n) as f64 / (n as f64 * (1.0 - alpha));
    if max_pi - min_pi < EQUAL_PI_SPREAD {
        return Ok((alpha, lambda, vec![1.0 / n as f64; n], bracket));
    }
    let nf = n_total as f64;
    let weights = pi_obs
        .iter()
        .map(|p| {
            let xi = f + (1.0 - f) * p;
            (1.0 - alpha) / (nf * (xi - alpha))
        })
        .collect();
    Ok((alpha, lambda, weights, bracket))
}

/// Solve for the EL weights of a missing-data sample.
///
/// The returned weight vector has one entry per stored row: zero exactly
/// where `d = 0`, positive where `d = 1`, summing to 1.
pub fn elw_weights(sample: &MissingDataSample) -> Result<ElwSolution> {
    let pi_obs = sample.pi_observed();
    let (alpha_hat, lambda, obs_weights, bracket) = elw_weights_from_parts(&pi_obs, sample.n_total())?;
    let mut weights = vec![0.0; sample.rows()];
    let mut k = 0;
    for (w, sel) in weights.iter_mut().zip(sample.indicators()) {
        if *sel {
            *w = obs_weights[k];
            k += 1;
        }
    }
    Ok(ElwSolution { alpha_hat, lambda, weights, bracket })
}

/// Solve for the EL weights of a with-replacement sample, using the working
/// probabilities `pi_i = n * q_i` (which may exceed 1).
pub fn elw_weights_wr(sample: &WrSample) -> Result<ElwSolution> {
    let pi = sample.pi();
    let (alpha_hat, lambda, weights, bracket) = elw_weights_from_parts(&pi, sample.n_total())?;
    Ok(ElwSolution { alpha_hat, lambda, weights, bracket })
}

/// Maximum ratio among the non-zero EL weights,
/// `(max xi_i - alpha) / (min xi_i - alpha)`.
///
/// Always at least 1, and bounded by `n / eps^3` whenever the observed
/// probabilities spread more than `eps` and the smallest value has observed
/// share below `1 - eps`.
pub fn max_weight_ratio(sol: &ElwSolution, pi_obs: &[f64], n_total: usize) -> Result<f64> {
    let xi = xi_values(pi_obs, n_total)?;
    let (min_xi, max_xi) = min_max(&xi);
    if max_xi - min_xi < EQUAL_PI_SPREAD {
        return Ok(1.0);
    }
    Ok((max_xi - sol.alpha_hat) / (min_xi - sol.alpha_hat))
}
