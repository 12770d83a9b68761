//! Point estimators of `theta = E{g(Z)}` (missing data) or the finite
//! population mean (survey designs): IPW/Horvitz-Thompson, the stabilized
//! Hajek form, ELW, and the thresholded/trimmed IPW competitors.

use nalgebra::{DMatrix, DVector};

use crate::error::{ElwError, Result};
use crate::sample::{MissingDataSample, WrSample};
use crate::weights::{elw_weights, elw_weights_wr, ElwSolution};

/// Estimator selector used by the CLI, the simulation harness, and the
/// resampling interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Ipw,
    Sipw,
    Elw,
    Zzz,
    Chim,
    /// Uncorrected trimmed IPW with the adaptive threshold `b_N(s)`.
    MwTrim { s: u8 },
}

impl EstimatorKind {
    /// Method tag for reports and CSV output.
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorKind::Ipw => "IPW",
            EstimatorKind::Sipw => "SIPW",
            EstimatorKind::Elw => "ELW",
            EstimatorKind::Zzz => "ZZZ",
            EstimatorKind::Chim => "CHIM",
            EstimatorKind::MwTrim { .. } => "MW-trim",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ipw" => Some(EstimatorKind::Ipw),
            "sipw" => Some(EstimatorKind::Sipw),
            "elw" => Some(EstimatorKind::Elw),
            "zzz" => Some(EstimatorKind::Zzz),
            "chim" => Some(EstimatorKind::Chim),
            "mw-trim" | "mw-trim-1" | "mwtrim1" => Some(EstimatorKind::MwTrim { s: 1 }),
            "mw-trim-2" | "mwtrim2" => Some(EstimatorKind::MwTrim { s: 2 }),
            _ => None,
        }
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Output of every point estimator.
#[derive(Debug, Clone)]
pub struct EstimatorReport {
    /// Point estimate, dimension `q`.
    pub theta_hat: DVector<f64>,
    pub method: EstimatorKind,
    /// Observed (or drawn) count.
    pub n: usize,
    pub n_total: usize,
    /// Variance of the normalized estimator, when a later inference step
    /// attached one. Symmetric positive semidefinite.
    pub variance: Option<DMatrix<f64>>,
    /// Set when the estimate is technically defined but suspect, e.g. the
    /// trimming threshold removed every observed unit.
    pub warning: Option<String>,
}

impl EstimatorReport {
    fn new(theta: DVector<f64>, method: EstimatorKind, n: usize, n_total: usize) -> Self {
        Self { theta_hat: theta, method, n, n_total, variance: None, warning: None }
    }

    /// First component, for the scalar-response case.
    pub fn theta_scalar(&self) -> f64 {
        self.theta_hat[0]
    }
}

/// Standard IPW estimator: `(1/N) sum_{d=1} g(z_i)/pi_i`.
pub fn ipw_mean(sample: &MissingDataSample) -> Result<EstimatorReport> {
    let q = sample.dim();
    let mut acc = DVector::zeros(q);
    for u in sample.observed_units() {
        if u.pi <= 0.0 {
            return Err(ElwError::DivisionByZero { unit: u.row });
        }
        for (a, v) in acc.iter_mut().zip(u.g) {
            *a += v / u.pi;
        }
    }
    acc /= sample.n_total() as f64;
    Ok(EstimatorReport::new(acc, EstimatorKind::Ipw, sample.n_observed(), sample.n_total()))
}

/// Hajek / stabilized IPW estimator: inverse-probability weights normalized
/// to sum to 1 over the observed units.
pub fn sipw_mean(sample: &MissingDataSample) -> Result<EstimatorReport> {
    let q = sample.dim();
    let mut num = DVector::zeros(q);
    let mut den = 0.0;
    for u in sample.observed_units() {
        if u.pi <= 0.0 {
            return Err(ElwError::DivisionByZero { unit: u.row });
        }
        for (a, v) in num.iter_mut().zip(u.g) {
            *a += v / u.pi;
        }
        den += 1.0 / u.pi;
    }
    num /= den;
    Ok(EstimatorReport::new(num, EstimatorKind::Sipw, sample.n_observed(), sample.n_total()))
}

/// ELW estimator `sum_i p_i g(z_i)` with freshly solved weights.
pub fn elw_mean(sample: &MissingDataSample) -> Result<EstimatorReport> {
    let sol = elw_weights(sample)?;
    Ok(elw_mean_from(sample, &sol))
}

/// ELW estimator from an already-solved weight vector.
pub fn elw_mean_from(sample: &MissingDataSample, sol: &ElwSolution) -> EstimatorReport {
    let q = sample.dim();
    let mut acc = DVector::zeros(q);
    for u in sample.observed_units() {
        let w = sol.weights[u.row];
        for (a, v) in acc.iter_mut().zip(u.g) {
            *a += w * v;
        }
    }
    EstimatorReport::new(acc, EstimatorKind::Elw, sample.n_observed(), sample.n_total())
}

/// Thresholding constant of the ZZZ estimator: with the probabilities of all
/// `N` units sorted ascending, `K` is the largest index with
/// `pi_(K) <= 1/(K+1)`; returns `pi_(K)`, or `None` when no index qualifies.
fn zzz_threshold(pi_all: &[f64]) -> Option<f64> {
    let mut sorted = pi_all.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut best = None;
    for (i, p) in sorted.iter().enumerate() {
        if *p <= 1.0 / (i as f64 + 2.0) {
            best = Some(*p);
        }
    }
    best
}

/// Thresholded IPW estimator: probabilities below the adaptive order-statistic
/// threshold are floored at it, then the plain IPW form is applied.
pub fn zzz_mean(sample: &MissingDataSample) -> Result<EstimatorReport> {
    if !sample.is_fully_enumerated() {
        return Err(ElwError::InvalidSample(
            "ZZZ needs the selection probabilities of all N units".into(),
        ));
    }
    let threshold = zzz_threshold(sample.pi());
    let q = sample.dim();
    let mut acc = DVector::zeros(q);
    for u in sample.observed_units() {
        let p = threshold.map_or(u.pi, |t| t.max(u.pi));
        if p <= 0.0 {
            return Err(ElwError::DivisionByZero { unit: u.row });
        }
        for (a, v) in acc.iter_mut().zip(u.g) {
            *a += v / p;
        }
    }
    acc /= sample.n_total() as f64;
    Ok(EstimatorReport::new(acc, EstimatorKind::Zzz, sample.n_observed(), sample.n_total()))
}

/// Trimming constant of the CHIM estimator (Crump-style rule).
///
/// With `Z_i = 1/(pi_i(1-pi_i))` over units with `pi_i(1-pi_i) > 0`, the rule
/// takes the smallest fixed point of `gamma = 2 * mean{Z : Z <= gamma}` and
/// converts it to the trim level via `1/(alpha(1-alpha)) = gamma`. The fixed
/// point is located exactly: between consecutive order statistics of `Z` the
/// right side is constant, so each candidate is checked against its interval.
fn chim_alpha(pi_all: &[f64]) -> Result<f64> {
    let mut z: Vec<f64> = pi_all
        .iter()
        .map(|p| p * (1.0 - p))
        .filter(|v| *v > 0.0)
        .map(|v| 1.0 / v)
        .collect();
    if z.is_empty() {
        return Err(ElwError::EmptyRetainedSet(
            "every unit has a degenerate probability (0 or 1)".into(),
        ));
    }
    z.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut sum = 0.0;
    let mut i = 0;
    let mut gamma = None;
    while i < z.len() {
        let mut j = i;
        while j < z.len() && z[j] <= z[i] {
            sum += z[j];
            j += 1;
        }
        let cand = 2.0 * sum / j as f64;
        let upper = if j < z.len() { z[j] } else { f64::INFINITY };
        if z[j - 1] <= cand && cand < upper {
            gamma = Some(cand);
            break;
        }
        i = j;
    }
    // Z >= 4 always, so gamma >= 8 and the quadratic below has a root in
    // (0, 1/2]. A missing fixed point means no trimming.
    match gamma {
        Some(g) => Ok(0.5 * (1.0 - (1.0 - 4.0 / g).max(0.0).sqrt())),
        None => Ok(0.0),
    }
}

/// Trimmed IPW estimator: units with `pi` outside `[alpha, 1-alpha]` are
/// dropped and the divisor counts every unit (selected or not) in range.
pub fn chim_mean(sample: &MissingDataSample) -> Result<EstimatorReport> {
    if !sample.is_fully_enumerated() {
        return Err(ElwError::InvalidSample(
            "CHIM needs the selection probabilities of all N units".into(),
        ));
    }
    let alpha = chim_alpha(sample.pi())?;
    let lo = alpha;
    let hi = 1.0 - alpha;
    let retained = sample.pi().iter().filter(|p| **p >= lo && **p <= hi).count();
    if retained == 0 {
        return Err(ElwError::EmptyRetainedSet(format!(
            "no unit has probability inside [{lo:.6}, {hi:.6}]"
        )));
    }
    let q = sample.dim();
    let mut acc = DVector::zeros(q);
    for u in sample.observed_units() {
        if u.pi < lo || u.pi > hi {
            continue;
        }
        if u.pi <= 0.0 {
            return Err(ElwError::DivisionByZero { unit: u.row });
        }
        for (a, v) in acc.iter_mut().zip(u.g) {
            *a += v / u.pi;
        }
    }
    acc /= retained as f64;
    Ok(EstimatorReport::new(acc, EstimatorKind::Chim, sample.n_observed(), sample.n_total()))
}

/// Tuning thresholds `(b_N, h_N)` of the trimmed estimator: the smallest
/// positive solutions of
///
/// ```text
/// b^s * #{pi_i <= b} = 1/2        and        h^5 * #{pi_i <= h} = 1.
/// ```
///
/// Both left sides are step-increasing in the threshold; within an interval
/// where the count `k` is constant the candidate root is `(1/(2k))^(1/s)`
/// (resp. `(1/k)^(1/5)`), accepted iff it lies in the interval. When no piece
/// contains a root the degenerate value 1 is reported.
pub fn mw_thresholds(pi_all: &[f64], s: u8) -> Result<(f64, f64)> {
    if pi_all.is_empty() {
        return Err(ElwError::InvalidSample("empty probability vector".into()));
    }
    if !(s == 1 || s == 2) {
        return Err(ElwError::InvalidConfig(format!("s must be 1 or 2, got {s}")));
    }
    let mut sorted = pi_all.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let solve = |target_inv: f64, power: f64| -> f64 {
        // target_inv = 2 for b (k * b^s = 1/2), 1 for h (k * h^5 = 1)
        let mut i = 0;
        while i < sorted.len() {
            let mut j = i;
            while j < sorted.len() && sorted[j] <= sorted[i] {
                j += 1;
            }
            let k = j as f64;
            let cand = (1.0 / (target_inv * k)).powf(1.0 / power);
            let lower = sorted[i];
            let upper = if j < sorted.len() { sorted[j] } else { f64::INFINITY };
            if cand >= lower && cand < upper && cand > 0.0 && cand <= 1.0 {
                return cand;
            }
            i = j;
        }
        1.0
    };
    Ok((solve(2.0, s as f64), solve(1.0, 5.0)))
}

/// Uncorrected trimmed IPW: observed units with `pi <= b_N` are dropped, the
/// rest enter the plain IPW sum. (The bias-correction companion of the
/// original proposal is intentionally not applied.)
pub fn mw_trim_mean(sample: &MissingDataSample, s: u8) -> Result<EstimatorReport> {
    if !sample.is_fully_enumerated() {
        return Err(ElwError::InvalidSample(
            "the trim threshold needs the selection probabilities of all N units".into(),
        ));
    }
    let (b_n, _) = mw_thresholds(sample.pi(), s)?;
    let q = sample.dim();
    let mut acc = DVector::zeros(q);
    let mut kept = 0usize;
    for u in sample.observed_units() {
        if u.pi <= b_n {
            continue;
        }
        kept += 1;
        for (a, v) in acc.iter_mut().zip(u.g) {
            *a += v / u.pi;
        }
    }
    acc /= sample.n_total() as f64;
    let mut report = EstimatorReport::new(acc, EstimatorKind::MwTrim { s }, sample.n_observed(), sample.n_total());
    if kept == 0 {
        report.warning = Some(format!("threshold b_N = {b_n} trimmed every observed unit"));
    }
    Ok(report)
}

/// Dispatch a point estimator by kind (missing-data / WOR regimes).
pub fn estimate(sample: &MissingDataSample, kind: EstimatorKind) -> Result<EstimatorReport> {
    match kind {
        EstimatorKind::Ipw => ipw_mean(sample),
        EstimatorKind::Sipw => sipw_mean(sample),
        EstimatorKind::Elw => elw_mean(sample),
        EstimatorKind::Zzz => zzz_mean(sample),
        EstimatorKind::Chim => chim_mean(sample),
        EstimatorKind::MwTrim { s } => mw_trim_mean(sample, s),
    }
}

/// Hansen-Hurwitz estimator under with-replacement sampling:
/// `(1/(nN)) sum_i g(z_i)/q_i`.
pub fn ipw_mean_wr(sample: &WrSample) -> Result<EstimatorReport> {
    let q = sample.dim();
    let n = sample.n_draws();
    let mut acc = DVector::zeros(q);
    for (i, qi) in sample.draw_probs().iter().enumerate() {
        for (a, v) in acc.iter_mut().zip(sample.g_row(i)) {
            *a += v / qi;
        }
    }
    acc /= (n * sample.n_total()) as f64;
    Ok(EstimatorReport::new(acc, EstimatorKind::Ipw, n, sample.n_total()))
}

/// Stabilized (Hajek-type) estimator under with-replacement sampling.
pub fn sipw_mean_wr(sample: &WrSample) -> Result<EstimatorReport> {
    let q = sample.dim();
    let mut num = DVector::zeros(q);
    let mut den = 0.0;
    for (i, qi) in sample.draw_probs().iter().enumerate() {
        for (a, v) in num.iter_mut().zip(sample.g_row(i)) {
            *a += v / qi;
        }
        den += 1.0 / qi;
    }
    num /= den;
    Ok(EstimatorReport::new(num, EstimatorKind::Sipw, sample.n_draws(), sample.n_total()))
}

/// ELW estimator under with-replacement sampling (working probabilities
/// `pi_i = n q_i`, no indicator vector).
pub fn elw_mean_wr(sample: &WrSample) -> Result<EstimatorReport> {
    let sol = elw_weights_wr(sample)?;
    Ok(elw_mean_wr_from(sample, &sol))
}

/// ELW estimator under with-replacement sampling from solved weights.
pub fn elw_mean_wr_from(sample: &WrSample, sol: &ElwSolution) -> EstimatorReport {
    let q = sample.dim();
    let mut acc = DVector::zeros(q);
    for (i, w) in sol.weights.iter().enumerate() {
        for (a, v) in acc.iter_mut().zip(sample.g_row(i)) {
            *a += w * v;
        }
    }
    EstimatorReport::new(acc, EstimatorKind::Elw, sample.n_draws(), sample.n_total())
}

/// Thresholded estimator under with-replacement sampling: the threshold rule
/// runs on the working probabilities `pi*_i = n q*_i` of all `N` population
/// units, then each draw is floored at it.
pub fn zzz_mean_wr(sample: &WrSample, pi_star_all: &[f64]) -> Result<EstimatorReport> {
    if pi_star_all.len() != sample.n_total() {
        return Err(ElwError::InvalidSample(
            "ZZZ needs the working probabilities of all N units".into(),
        ));
    }
    let threshold = zzz_threshold(pi_star_all);
    let q = sample.dim();
    let n = sample.n_draws() as f64;
    let mut acc = DVector::zeros(q);
    for (i, qi) in sample.draw_probs().iter().enumerate() {
        let pi = n * qi;
        let p = threshold.map_or(pi, |t| t.max(pi));
        for (a, v) in acc.iter_mut().zip(sample.g_row(i)) {
            *a += v / p;
        }
    }
    acc /= sample.n_total() as f64;
    Ok(EstimatorReport::new(acc, EstimatorKind::Zzz, sample.n_draws(), sample.n_total()))
}
