//! Unequal-probability sampling mechanisms and inclusion-probability
//! construction.
//!
//! All samplers are deterministic functions of their inputs and the supplied
//! RNG stream; parallel replicates must use disjoint streams (see
//! [`crate::rng`]).

use rand::distributions::WeightedIndex;
use rand::Rng;

use crate::error::{ElwError, Result};

/// First-order inclusion probabilities proportional to a positive size
/// variable: `pi_i = n x_i / sum_j x_j`. Values above 1 are an error, not
/// clipped (tolerance 1e-9 absorbs summation noise at the boundary).
pub fn inclusion_probs_proportional(x: &[f64], n_draws: usize) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(ElwError::InvalidSample("empty size vector".into()));
    }
    if n_draws > x.len() {
        return Err(ElwError::InvalidConfig(format!(
            "sample size {n_draws} exceeds population size {}",
            x.len()
        )));
    }
    for (i, v) in x.iter().enumerate() {
        if !v.is_finite() || *v <= 0.0 {
            return Err(ElwError::InvalidSample(format!("size variable x[{i}] = {v} is not positive")));
        }
    }
    let total: f64 = x.iter().sum();
    let mut out = Vec::with_capacity(x.len());
    for (i, v) in x.iter().enumerate() {
        let pi = n_draws as f64 * v / total;
        if pi > 1.0 + 1e-9 {
            return Err(ElwError::InvalidConfig(format!(
                "size variable too large: unit {i} gets inclusion probability {pi} > 1"
            )));
        }
        out.push(pi.min(1.0));
    }
    Ok(out)
}

/// Poisson sampling: independent Bernoulli(`pi_i`) indicators, random size.
pub fn poisson_sample<R: Rng + ?Sized>(pi: &[f64], rng: &mut R) -> Result<Vec<bool>> {
    validate_probs(pi)?;
    Ok(pi.iter().map(|p| rng.gen::<f64>() < *p).collect())
}

/// Sequential pivotal sampling: fixed size `sum(pi)` (which must be an
/// integer), marginal inclusion probabilities exactly `pi_i`, negatively
/// associated indicators.
///
/// Scans left to right keeping one "active" probability; each new unit is
/// resolved against it. When the pair sums below 1 one unit is settled as
/// unselected and the other carries the summed probability; otherwise one is
/// settled as selected and the other carries the excess. Both updates leave
/// each unit's expectation untouched and conserve the running total, so the
/// final active probability is 0 or 1 up to rounding.
pub fn pivotal_sample<R: Rng + ?Sized>(pi: &[f64], rng: &mut R) -> Result<Vec<bool>> {
    validate_probs(pi)?;
    let total: f64 = pi.iter().sum();
    if (total - total.round()).abs() > 1e-8 {
        return Err(ElwError::InvalidConfig(format!(
            "pivotal sampling needs an integer probability total, got {total}"
        )));
    }
    let mut selected = vec![false; pi.len()];
    let mut active: Option<(usize, f64)> = None;
    for (i, &p_new) in pi.iter().enumerate() {
        let (a, p_a) = match active {
            None => {
                active = Some((i, p_new));
                continue;
            }
            Some(pair) => pair,
        };
        let s = p_a + p_new;
        if s < 1.0 {
            // one unit dies, the other carries the mass
            if s <= 0.0 || rng.gen::<f64>() * s < p_new {
                active = Some((i, s));
            } else {
                active = Some((a, s));
            }
        } else {
            let excess = s - 1.0;
            let denom = 2.0 - s;
            // probability that the earlier unit is the selected one
            if denom <= 0.0 || rng.gen::<f64>() * denom < 1.0 - p_new {
                selected[a] = true;
                active = Some((i, excess));
            } else {
                selected[i] = true;
                active = Some((a, excess));
            }
        }
    }
    if let Some((a, p_a)) = active {
        // integer total forces p_a into {0, 1} up to accumulated rounding
        selected[a] = p_a > 0.5;
    }
    Ok(selected)
}

/// With-replacement draws with per-occasion probabilities `q` (summing to 1);
/// returns the `n_draws` drawn indices, duplicates allowed.
pub fn pps_wr_sample<R: Rng + ?Sized>(q: &[f64], n_draws: usize, rng: &mut R) -> Result<Vec<usize>> {
    if q.is_empty() {
        return Err(ElwError::InvalidSample("empty probability vector".into()));
    }
    let total: f64 = q.iter().sum();
    if (total - 1.0).abs() > 1e-8 {
        return Err(ElwError::InvalidConfig(format!("draw probabilities sum to {total}, not 1")));
    }
    if q.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(ElwError::InvalidSample("negative or non-finite draw probability".into()));
    }
    let dist = WeightedIndex::new(q).map_err(|e| ElwError::InvalidSample(e.to_string()))?;
    Ok((0..n_draws).map(|_| rng.sample(&dist)).collect())
}

/// Simple random sampling without replacement: a uniform size-`m` subset of
/// `0..n_total`.
pub fn srswor<R: Rng + ?Sized>(n_total: usize, m: usize, rng: &mut R) -> Result<Vec<usize>> {
    if m > n_total {
        return Err(ElwError::InvalidConfig(format!("subsample size {m} exceeds N = {n_total}")));
    }
    Ok(rand::seq::index::sample(rng, n_total, m).into_vec())
}

fn validate_probs(pi: &[f64]) -> Result<()> {
    for (i, p) in pi.iter().enumerate() {
        if !p.is_finite() || *p < 0.0 || *p > 1.0 {
            return Err(ElwError::InvalidSample(format!(
                "inclusion probability pi[{i}] = {p} outside [0, 1]"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn inclusion_probs_hand_examples() {
        let pi = inclusion_probs_proportional(&[1.0; 10], 5).unwrap();
        assert!(pi.iter().all(|p| (p - 0.5).abs() < 1e-12));

        let pi = inclusion_probs_proportional(&[1.0, 2.0, 3.0], 2).unwrap();
        assert!((pi[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((pi[1] - 2.0 / 3.0).abs() < 1e-12);
        assert!((pi[2] - 1.0).abs() < 1e-12);

        assert!(inclusion_probs_proportional(&[1.0, 1.0, 10.0], 2).is_err());
        assert!(inclusion_probs_proportional(&[1.0, -1.0], 1).is_err());
    }

    #[test]
    fn poisson_extremes_and_determinism() {
        let mut rng = stream(1, 0, 0);
        assert!(poisson_sample(&[1.0; 8], &mut rng).unwrap().iter().all(|d| *d));
        assert!(poisson_sample(&[0.0; 8], &mut rng).unwrap().iter().all(|d| !*d));

        let a = poisson_sample(&[0.3; 16], &mut stream(7, 1, 2)).unwrap();
        let b = poisson_sample(&[0.3; 16], &mut stream(7, 1, 2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn poisson_mean_size_matches_expectation() {
        let pi: Vec<f64> = (0..40).map(|i| 0.1 + 0.8 * (i as f64) / 39.0).collect();
        let expect: f64 = pi.iter().sum();
        let var: f64 = pi.iter().map(|p| p * (1.0 - p)).sum();
        let reps = 100_000;
        let mut total = 0usize;
        for r in 0..reps {
            let mut rng = stream(11, 3, r);
            total += poisson_sample(&pi, &mut rng).unwrap().iter().filter(|d| **d).count();
        }
        let mean = total as f64 / reps as f64;
        let tol = 3.0 * (var / reps as f64).sqrt();
        assert!((mean - expect).abs() <= tol, "mean {mean} vs {expect} (tol {tol})");
    }

    #[test]
    fn pivotal_two_units_and_degenerates() {
        let mut one_selected = [0usize; 2];
        for r in 0..2000 {
            let mut rng = stream(3, 5, r);
            let sel = pivotal_sample(&[0.5, 0.5], &mut rng).unwrap();
            assert_eq!(sel.iter().filter(|d| **d).count(), 1);
            if sel[0] {
                one_selected[0] += 1;
            } else {
                one_selected[1] += 1;
            }
        }
        // each unit selected with probability 1/2 (4 sigma band)
        let se = (2000.0f64 * 0.25).sqrt();
        assert!((one_selected[0] as f64 - 1000.0).abs() <= 4.0 * se);

        // full census
        let sel = pivotal_sample(&[1.0; 5], &mut stream(4, 5, 0)).unwrap();
        assert!(sel.iter().all(|d| *d));

        // non-integer total is an error
        assert!(pivotal_sample(&[0.5, 0.4], &mut stream(4, 5, 1)).is_err());
    }

    #[test]
    fn pivotal_fixed_size_and_marginals() {
        // N = 50 units with probabilities summing to 10
        let n_units = 50;
        let raw: Vec<f64> = (0..n_units).map(|i| ((i * 37 + 11) % 97) as f64 + 1.0).collect();
        let total: f64 = raw.iter().sum();
        let pi: Vec<f64> = raw.iter().map(|v| 10.0 * v / total).collect();
        assert!(pi.iter().all(|p| *p < 1.0));

        let reps = 100_000u64;
        let mut counts = vec![0u64; n_units];
        for r in 0..reps {
            let mut rng = stream(99, 6, r);
            let sel = pivotal_sample(&pi, &mut rng).unwrap();
            assert_eq!(sel.iter().filter(|d| **d).count(), 10, "size must be exactly n");
            for (c, s) in counts.iter_mut().zip(&sel) {
                if *s {
                    *c += 1;
                }
            }
        }
        for (c, p) in counts.iter().zip(&pi) {
            let freq = *c as f64 / reps as f64;
            let se = (p * (1.0 - p) / reps as f64).sqrt();
            assert!(
                (freq - p).abs() <= 4.0 * se,
                "inclusion frequency {freq} vs {p} (se {se})"
            );
        }
    }

    #[test]
    fn poisson_pairwise_independence_sanity() {
        let pi = [0.3, 0.7, 0.5, 0.2];
        let reps = 100_000;
        let (mut c1, mut c2, mut c12) = (0u64, 0u64, 0u64);
        for r in 0..reps {
            let mut rng = stream(21, 3, r);
            let sel = poisson_sample(&pi, &mut rng).unwrap();
            if sel[0] {
                c1 += 1;
            }
            if sel[2] {
                c2 += 1;
            }
            if sel[0] && sel[2] {
                c12 += 1;
            }
        }
        let reps = reps as f64;
        let cov = c12 as f64 / reps - (c1 as f64 / reps) * (c2 as f64 / reps);
        let se = (0.3 * 0.5 * (1.0 - 0.3 * 0.5) / reps).sqrt();
        assert!(cov.abs() <= 4.0 * se, "cov {cov} (se {se})");
    }

    #[test]
    fn pps_wr_examples() {
        // degenerate at one unit
        let idx = pps_wr_sample(&[0.0, 1.0, 0.0], 6, &mut stream(5, 7, 0)).unwrap();
        assert!(idx.iter().all(|i| *i == 1));

        // single-unit population
        let idx = pps_wr_sample(&[1.0], 4, &mut stream(5, 7, 1)).unwrap();
        assert!(idx.iter().all(|i| *i == 0));

        assert!(pps_wr_sample(&[0.5, 0.4], 2, &mut stream(5, 7, 2)).is_err());
    }

    #[test]
    fn pps_wr_counts_match_multinomial() {
        let q = [0.1, 0.2, 0.3, 0.4];
        let draws_per_rep = 5;
        let reps = 20_000u64;
        let mut counts = [0u64; 4];
        for r in 0..reps {
            let mut rng = stream(31, 7, r);
            for i in pps_wr_sample(&q, draws_per_rep, &mut rng).unwrap() {
                counts[i] += 1;
            }
        }
        let total = (reps * draws_per_rep as u64) as f64;
        for (c, p) in counts.iter().zip(&q) {
            let se = (p * (1.0 - p) * total).sqrt();
            assert!((*c as f64 - p * total).abs() <= 4.0 * se);
        }
    }

    #[test]
    fn srswor_examples_and_frequency() {
        let all = srswor(5, 5, &mut stream(6, 8, 0)).unwrap();
        let mut sorted = all.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3, 4]);

        assert!(srswor(4, 0, &mut stream(6, 8, 1)).unwrap().is_empty());
        assert!(srswor(3, 4, &mut stream(6, 8, 2)).is_err());

        let reps = 100_000u64;
        let mut counts = vec![0u64; 10];
        for r in 0..reps {
            let mut rng = stream(61, 8, r);
            for i in srswor(10, 3, &mut rng).unwrap() {
                counts[i] += 1;
            }
        }
        let p = 0.3;
        let se = (p * (1.0 - p) / reps as f64).sqrt();
        for c in counts {
            let freq = c as f64 / reps as f64;
            assert!((freq - p).abs() <= 4.0 * se, "{freq}");
        }
    }
}
