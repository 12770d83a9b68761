//! Variance estimators, Wald regions, and the subsample-resampling region.
//!
//! All variances are for the *normalized* estimator: `sqrt(N)(theta_hat -
//! theta)` in the missing-data and without-replacement regimes,
//! `sqrt(n)(theta_hat - theta)` under with-replacement sampling. Wald regions
//! therefore divide by the matching `scale_count`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::designs::srswor;
use crate::error::{ElwError, Result};
use crate::estimators::{elw_mean_from, ipw_mean, sipw_mean, EstimatorKind, EstimatorReport};
use crate::rng::{self, tag};
use crate::sample::{MissingDataSample, WrSample};
use crate::weights::{elw_weights, ElwSolution};

/// Guard: moment denominators must clear 1 by this margin.
const B11_MARGIN: f64 = 1e-10;
/// Eigenvalue floor used when inverting a near-singular variance.
const EIGEN_FLOOR: f64 = 1e-12;

/// Plug-in moment estimates entering the variance formulas.
///
/// `b11`, `bg1`, `bgg` estimate `E{1/pi}`, `E{g/pi}`, `E{g g'/pi}`; `b2`
/// estimates the population second moment of `g` (without-replacement use);
/// `g_coef` is `(bg1 - theta)/(b11 - 1)`, defined when `b11 > 1`.
#[derive(Debug, Clone)]
pub struct MomentSet {
    pub b11: f64,
    pub bg1: DVector<f64>,
    pub bgg: DMatrix<f64>,
    pub b2: Option<DMatrix<f64>>,
    pub g_coef: Option<DVector<f64>>,
}

impl MomentSet {
    /// ELW plug-ins: `b_fh = N sum_i p_i^2 f_i h_i'` over units with positive
    /// weight; `b2 = sum_i p_i g_i g_i'` when requested.
    pub fn elw<'a>(
        units: impl Iterator<Item = (&'a [f64], f64)>,
        n_total: usize,
        q: usize,
        theta: &DVector<f64>,
        with_b2: bool,
    ) -> Self {
        let nf = n_total as f64;
        let mut b11 = 0.0;
        let mut bg1 = vec![0.0; q];
        let mut bgg = vec![0.0; q * q];
        let mut b2 = vec![0.0; q * q];
        for (g, p) in units {
            let w2 = nf * p * p;
            b11 += w2;
            for k in 0..q {
                bg1[k] += w2 * g[k];
                for l in 0..q {
                    bgg[k * q + l] += w2 * g[k] * g[l];
                    if with_b2 {
                        b2[k * q + l] += p * g[k] * g[l];
                    }
                }
            }
        }
        Self::assemble(b11, bg1, bgg, with_b2.then_some(b2), q, theta)
    }

    /// Inverse-probability plug-ins: `b_fh = (1/N) sum_{d=1} f_i h_i'/pi_i^2`.
    /// Fails when an observed unit has `pi = 0`.
    pub fn inverse_probability<'a>(
        units: impl Iterator<Item = (usize, &'a [f64], f64)>,
        n_total: usize,
        q: usize,
        theta: &DVector<f64>,
    ) -> Result<Self> {
        let nf = n_total as f64;
        let mut b11 = 0.0;
        let mut bg1 = vec![0.0; q];
        let mut bgg = vec![0.0; q * q];
        for (row, g, pi) in units {
            if pi <= 0.0 {
                return Err(ElwError::DivisionByZero { unit: row });
            }
            let w = 1.0 / (nf * pi * pi);
            b11 += w;
            for k in 0..q {
                bg1[k] += w * g[k];
                for l in 0..q {
                    bgg[k * q + l] += w * g[k] * g[l];
                }
            }
        }
        Ok(Self::assemble(b11, bg1, bgg, None, q, theta))
    }

    fn assemble(
        b11: f64,
        bg1: Vec<f64>,
        bgg: Vec<f64>,
        b2: Option<Vec<f64>>,
        q: usize,
        theta: &DVector<f64>,
    ) -> Self {
        let bg1 = DVector::from_vec(bg1);
        let bgg = DMatrix::from_row_slice(q, q, &bgg);
        let b2 = b2.map(|v| DMatrix::from_row_slice(q, q, &v));
        let g_coef = (b11 > 1.0).then(|| (&bg1 - theta) / (b11 - 1.0));
        Self { b11, bg1, bgg, b2, g_coef }
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

fn outer(v: &DVector<f64>) -> DMatrix<f64> {
    v * v.transpose()
}

fn require_two_observed(n: usize) -> Result<()> {
    if n < 2 {
        return Err(ElwError::DegenerateVariance(
            "variance estimation needs at least two observed units".into(),
        ));
    }
    Ok(())
}

fn require_b11_above_one(b11: f64) -> Result<()> {
    if b11 <= 1.0 + B11_MARGIN {
        return Err(ElwError::DegenerateVariance(format!(
            "moment estimate B11 = {b11} does not exceed 1 (no estimable missingness correction)"
        )));
    }
    Ok(())
}

/// Variance of `sqrt(N)(theta_ELW - theta)` in the missing-data regime:
/// `(Bgg - theta theta') - (Bg1 - theta)(Bg1 - theta)'/(B11 - 1)` with ELW
/// plug-in moments.
pub fn elw_variance_missing(
    sample: &MissingDataSample,
    sol: &ElwSolution,
    theta: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    require_two_observed(sample.n_observed())?;
    let m = MomentSet::elw(
        sample.observed_units().map(|u| (u.g, sol.weights[u.row])),
        sample.n_total(),
        sample.dim(),
        theta,
        false,
    );
    require_b11_above_one(m.b11)?;
    let centered = &m.bg1 - theta;
    let mut sigma = &m.bgg - outer(theta) - outer(&centered) / (m.b11 - 1.0);
    symmetrize(&mut sigma);
    Ok(sigma)
}

/// Variance of `sqrt(N)(theta_IPW - theta)`: `Bgg - theta theta'` with
/// inverse-probability plug-in moments.
pub fn ipw_variance_missing(sample: &MissingDataSample, theta: &DVector<f64>) -> Result<DMatrix<f64>> {
    require_two_observed(sample.n_observed())?;
    let m = MomentSet::inverse_probability(
        sample.observed_units().map(|u| (u.row, u.g, u.pi)),
        sample.n_total(),
        sample.dim(),
        theta,
    )?;
    let mut sigma = &m.bgg - outer(theta);
    symmetrize(&mut sigma);
    Ok(sigma)
}

/// Variance of `sqrt(N)(theta_SIPW - theta)`:
/// `(Bgg - theta theta') - theta (Bg1 - theta)' - (Bg1 - theta) theta'
///  + theta theta' (B11 - 1)`.
pub fn sipw_variance_missing(sample: &MissingDataSample, theta: &DVector<f64>) -> Result<DMatrix<f64>> {
    require_two_observed(sample.n_observed())?;
    let m = MomentSet::inverse_probability(
        sample.observed_units().map(|u| (u.row, u.g, u.pi)),
        sample.n_total(),
        sample.dim(),
        theta,
    )?;
    let centered = &m.bg1 - theta;
    let mut sigma = &m.bgg - outer(theta) - theta * centered.transpose() - &centered * theta.transpose()
        + outer(theta) * (m.b11 - 1.0);
    symmetrize(&mut sigma);
    Ok(sigma)
}

/// Variance of `sqrt(N)(theta_ELW - theta)` under without-replacement
/// designs: `Bgg - B2 - (Bg1 - theta)(Bg1 - theta)'/(B11 - 1)`, where `B2`
/// uses single-power weights.
pub fn elw_variance_wor(
    sample: &MissingDataSample,
    sol: &ElwSolution,
    theta: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    require_two_observed(sample.n_observed())?;
    let m = MomentSet::elw(
        sample.observed_units().map(|u| (u.g, sol.weights[u.row])),
        sample.n_total(),
        sample.dim(),
        theta,
        true,
    );
    require_b11_above_one(m.b11)?;
    let centered = &m.bg1 - theta;
    let mut sigma = &m.bgg - m.b2.as_ref().unwrap() - outer(&centered) / (m.b11 - 1.0);
    symmetrize(&mut sigma);
    Ok(sigma)
}

/// Variance of `sqrt(n)(theta_ELW - theta)` under with-replacement sampling,
/// with `alpha0 = n/N`:
///
/// ```text
/// alpha0 Bgg - theta theta'
///   + (1-alpha0)^2 (theta B11 - Bg1)^x2 / ((alpha0 B11 - 1)(B11 - 1)^2)
///   - (alpha0 Bg1 - theta)^x2 / (alpha0 B11 - 1)
/// ```
pub fn elw_variance_wr(sample: &WrSample, sol: &ElwSolution, theta: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = sample.n_draws();
    require_two_observed(n)?;
    let alpha0 = n as f64 / sample.n_total() as f64;
    let m = MomentSet::elw(
        (0..n).map(|i| (sample.g_row(i), sol.weights[i])),
        sample.n_total(),
        sample.dim(),
        theta,
        false,
    );
    require_b11_above_one(m.b11)?;
    if alpha0 * m.b11 <= 1.0 + B11_MARGIN {
        return Err(ElwError::DegenerateVariance(format!(
            "alpha0 * B11 = {} does not exceed 1 (equal-probability boundary)",
            alpha0 * m.b11
        )));
    }
    let v1 = theta * m.b11 - &m.bg1;
    let v2 = &m.bg1 * alpha0 - theta;
    let mut sigma = &m.bgg * alpha0 - outer(theta)
        + outer(&v1) * ((1.0 - alpha0).powi(2) / ((alpha0 * m.b11 - 1.0) * (m.b11 - 1.0).powi(2)))
        - outer(&v2) / (alpha0 * m.b11 - 1.0);
    symmetrize(&mut sigma);
    Ok(sigma)
}

/// Plain sample variance of `g` over the draws. Used for Wald intervals in
/// the equal-probability with-replacement boundary case, where the formula
/// above is undefined. Already on the `sqrt(n)` scale.
pub fn wr_sample_variance(sample: &WrSample) -> Result<DMatrix<f64>> {
    let n = sample.n_draws();
    require_two_observed(n)?;
    let q = sample.dim();
    let mut mean = DVector::<f64>::zeros(q);
    for i in 0..n {
        for (a, v) in mean.iter_mut().zip(sample.g_row(i)) {
            *a += v;
        }
    }
    mean /= n as f64;
    let mut cov = DMatrix::<f64>::zeros(q, q);
    for i in 0..n {
        let d = DVector::from_column_slice(sample.g_row(i)) - &mean;
        cov += outer(&d);
    }
    cov /= (n - 1) as f64;
    Ok(cov)
}

/// Variance for a with-replacement ELW Wald interval, falling back to the
/// plain sample variance when the equal-probability guard trips.
pub fn wr_variance_with_fallback(
    sample: &WrSample,
    sol: &ElwSolution,
    theta: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    match elw_variance_wr(sample, sol, theta) {
        Ok(v) => Ok(v),
        Err(ElwError::DegenerateVariance(_)) => wr_sample_variance(sample),
        Err(e) => Err(e),
    }
}

/// Provenance of a confidence region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionKind {
    AsymptoticNormal,
    Resampling,
}

impl RegionKind {
    pub fn label(&self) -> &'static str {
        match self {
            RegionKind::AsymptoticNormal => "an",
            RegionKind::Resampling => "re",
        }
    }
}

/// Geometry of a confidence region.
#[derive(Debug, Clone)]
pub enum RegionShape {
    /// Componentwise interval (the scalar case).
    Interval { lower: DVector<f64>, upper: DVector<f64> },
    /// `{theta : ||transform (center - theta) - recentering|| <= radius}`.
    Ellipsoid { transform: DMatrix<f64>, radius: f64 },
}

/// A confidence region for `theta`, with its center, level, provenance, and
/// the resampling recentering term (zero for Wald regions).
#[derive(Debug, Clone)]
pub struct ConfidenceRegion {
    pub center: DVector<f64>,
    pub level: f64,
    pub kind: RegionKind,
    pub shape: RegionShape,
    pub recentering: DVector<f64>,
}

impl ConfidenceRegion {
    pub fn contains(&self, theta: &DVector<f64>) -> bool {
        match &self.shape {
            RegionShape::Interval { lower, upper } => theta
                .iter()
                .zip(lower.iter().zip(upper.iter()))
                .all(|(t, (l, u))| *l <= *t && *t <= *u),
            RegionShape::Ellipsoid { transform, radius } => {
                let dev = transform * (&self.center - theta) - &self.recentering;
                dev.norm() <= *radius
            }
        }
    }

    pub fn contains_scalar(&self, theta: f64) -> bool {
        self.contains(&DVector::from_element(1, theta))
    }

    /// Interval length in the scalar case.
    pub fn length(&self) -> Option<f64> {
        match &self.shape {
            RegionShape::Interval { lower, upper } if lower.len() == 1 => Some(upper[0] - lower[0]),
            _ => None,
        }
    }

    /// Scalar bounds, when the region is an interval.
    pub fn bounds_scalar(&self) -> Option<(f64, f64)> {
        match &self.shape {
            RegionShape::Interval { lower, upper } if lower.len() == 1 => Some((lower[0], upper[0])),
            _ => None,
        }
    }
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(ElwError::InvalidConfig(format!("level {level} outside (0, 1)")));
    }
    Ok(())
}

/// Inverse square root of a symmetric PSD matrix, flooring eigenvalues at
/// `EIGEN_FLOOR` so near-singular variances stay invertible.
fn inv_sqrt(mut sigma: DMatrix<f64>) -> DMatrix<f64> {
    symmetrize(&mut sigma);
    let eig = sigma.symmetric_eigen();
    let q = eig.eigenvalues.len();
    let mut out = DMatrix::<f64>::zeros(q, q);
    for k in 0..q {
        let lam = eig.eigenvalues[k].max(EIGEN_FLOOR);
        let col = eig.eigenvectors.column(k);
        out += col * col.transpose() / lam.sqrt();
    }
    out
}

/// Wald confidence region `theta_hat +/- z * sqrt(sigma/scale_count)` (scalar)
/// or a chi-square ellipsoid (vector case). `scale_count` is `N` in the
/// missing-data and without-replacement regimes and `n` under
/// with-replacement sampling.
pub fn wald_interval(
    theta: &DVector<f64>,
    sigma: &DMatrix<f64>,
    scale_count: usize,
    level: f64,
) -> Result<ConfidenceRegion> {
    check_level(level)?;
    if scale_count == 0 {
        return Err(ElwError::InvalidConfig("scale_count must be at least 1".into()));
    }
    if sigma.iter().any(|v| !v.is_finite()) {
        return Err(ElwError::DegenerateVariance("non-finite variance estimate".into()));
    }
    let q = theta.len();
    if sigma.nrows() != q || sigma.ncols() != q {
        return Err(ElwError::InvalidConfig("variance dimension mismatch".into()));
    }
    let scale = scale_count as f64;
    if q == 1 {
        let v = sigma[(0, 0)];
        if v < -1e-8 {
            return Err(ElwError::DegenerateVariance(format!("negative variance {v}")));
        }
        let se = (v.max(0.0) / scale).sqrt();
        let z = Normal::new(0.0, 1.0).unwrap().inverse_cdf(0.5 * (1.0 + level));
        let half = z * se;
        return Ok(ConfidenceRegion {
            center: theta.clone(),
            level,
            kind: RegionKind::AsymptoticNormal,
            shape: RegionShape::Interval {
                lower: DVector::from_element(1, theta[0] - half),
                upper: DVector::from_element(1, theta[0] + half),
            },
            recentering: DVector::zeros(1),
        });
    }
    let radius = ChiSquared::new(q as f64)
        .map_err(|e| ElwError::InvalidConfig(e.to_string()))?
        .inverse_cdf(level)
        .sqrt();
    let transform = inv_sqrt(sigma.clone()) * scale.sqrt();
    Ok(ConfidenceRegion {
        center: theta.clone(),
        level,
        kind: RegionKind::AsymptoticNormal,
        shape: RegionShape::Ellipsoid { transform, radius },
        recentering: DVector::zeros(q),
    })
}

/// Empirical quantile with the order-statistic convention `ceil(level * B)`.
fn empirical_quantile(sorted: &[f64], level: f64) -> f64 {
    let b = sorted.len();
    let idx = (level * b as f64).ceil() as usize;
    sorted[idx.clamp(1, b) - 1]
}

/// Point estimate plus matching missing-data variance for the estimators the
/// resampling interval supports.
pub fn point_and_variance(
    sample: &MissingDataSample,
    kind: EstimatorKind,
) -> Result<(EstimatorReport, DMatrix<f64>)> {
    match kind {
        EstimatorKind::Elw => {
            let sol = elw_weights(sample)?;
            let report = elw_mean_from(sample, &sol);
            let sigma = elw_variance_missing(sample, &sol, &report.theta_hat)?;
            Ok((report, sigma))
        }
        EstimatorKind::Ipw => {
            let report = ipw_mean(sample)?;
            let sigma = ipw_variance_missing(sample, &report.theta_hat)?;
            Ok((report, sigma))
        }
        EstimatorKind::Sipw => {
            let report = sipw_mean(sample)?;
            let sigma = sipw_variance_missing(sample, &report.theta_hat)?;
            Ok((report, sigma))
        }
        other => Err(ElwError::InvalidConfig(format!(
            "no variance estimator is defined for {other}"
        ))),
    }
}

/// Assemble the resampling region from the full-sample estimate, its
/// variance, and the normalized subsample statistics `T*_i`.
pub fn region_from_replicates(
    theta: &DVector<f64>,
    sigma: &DMatrix<f64>,
    n_total: usize,
    t_stars: &[DVector<f64>],
    level: f64,
) -> Result<ConfidenceRegion> {
    check_level(level)?;
    if t_stars.is_empty() {
        return Err(ElwError::InvalidConfig("no resampling replicates".into()));
    }
    let b = t_stars.len();
    let q = theta.len();
    let mut t_bar = DVector::<f64>::zeros(q);
    for t in t_stars {
        t_bar += t;
    }
    t_bar /= b as f64;
    let mut dists: Vec<f64> = t_stars.iter().map(|t| (t - &t_bar).norm()).collect();
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q_star = empirical_quantile(&dists, level);
    let scale = (n_total as f64).sqrt();

    if q == 1 {
        let se = sigma[(0, 0)].max(0.0).sqrt();
        // |sqrt(N)(theta_hat - theta)/se - t_bar| <= q* inverted for theta
        let lower = theta[0] - se * (t_bar[0] + q_star) / scale;
        let upper = theta[0] - se * (t_bar[0] - q_star) / scale;
        return Ok(ConfidenceRegion {
            center: theta.clone(),
            level,
            kind: RegionKind::Resampling,
            shape: RegionShape::Interval {
                lower: DVector::from_element(1, lower),
                upper: DVector::from_element(1, upper),
            },
            recentering: t_bar,
        });
    }
    let transform = inv_sqrt(sigma.clone()) * scale;
    Ok(ConfidenceRegion {
        center: theta.clone(),
        level,
        kind: RegionKind::Resampling,
        shape: RegionShape::Ellipsoid { transform, radius: q_star },
        recentering: t_bar,
    })
}

/// Resampling-based confidence region (missing-data regime).
///
/// Draws `b` subsamples of size `m` by simple random sampling without
/// replacement from all `N` rows (missing rows included), forms
/// `T*_i = sqrt(M) (Sigma*_i)^(-1/2) (theta*_i - theta_hat)`, and inverts the
/// empirical quantile of `||T*_i - T_bar||` around the full-sample statistic.
/// Degenerate replicates (no observed units, undefined variance, or an
/// all-equal probability subsample of an unequal-probability sample) are
/// redrawn, up to 10 attempts per replicate (a 10B global budget).
pub fn resample_interval(
    sample: &MissingDataSample,
    kind: EstimatorKind,
    b: usize,
    m: usize,
    level: f64,
    seed: u64,
) -> Result<ConfidenceRegion> {
    check_level(level)?;
    if b == 0 {
        return Err(ElwError::InvalidConfig("B must be at least 1".into()));
    }
    if m < 2 || m >= sample.n_total() {
        return Err(ElwError::InvalidConfig(format!(
            "subsample size M = {m} must satisfy 2 <= M < N = {}",
            sample.n_total()
        )));
    }
    let (report, sigma) = point_and_variance(sample, kind)?;
    let theta = &report.theta_hat;
    let q = theta.len();
    let pi_obs = sample.pi_observed();
    let full_spread = spread(&pi_obs);

    let replicate = |rep: usize| -> Option<DVector<f64>> {
        let mut rng = rng::stream(seed, tag::SUBSAMPLE, rep as u64);
        for _ in 0..10 {
            let idx = match srswor(sample.n_total(), m, &mut rng) {
                Ok(v) => v,
                Err(_) => return None,
            };
            let sub = match sample.subsample(&idx) {
                Ok(s) => s,
                Err(_) => continue,
            };
            if full_spread >= 1e-12 && spread(&sub.pi_observed()) < 1e-12 {
                continue;
            }
            let (rep_est, rep_sigma) = match point_and_variance(&sub, kind) {
                Ok(v) => v,
                Err(_) => continue,
            };
            let diff = &rep_est.theta_hat - theta;
            let t = if q == 1 {
                let v = rep_sigma[(0, 0)];
                if !v.is_finite() || v <= EIGEN_FLOOR {
                    continue;
                }
                DVector::from_element(1, (m as f64).sqrt() * diff[0] / v.sqrt())
            } else {
                if rep_sigma.iter().any(|v| !v.is_finite()) {
                    continue;
                }
                inv_sqrt(rep_sigma) * diff * (m as f64).sqrt()
            };
            if t.iter().all(|v| v.is_finite()) {
                return Some(t);
            }
        }
        None
    };

    let t_stars: Vec<Option<DVector<f64>>> = (0..b).into_par_iter().map(replicate).collect();
    let ok: Vec<DVector<f64>> = t_stars.iter().flatten().cloned().collect();
    if ok.len() < b {
        return Err(ElwError::ResamplingFailed { discarded: 10 * (b - ok.len()), budget: 10 * b });
    }
    region_from_replicates(theta, &sigma, sample.n_total(), &ok, level)
}

fn spread(xs: &[f64]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in xs {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    if xs.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// Default subsample size `floor(sqrt(N))`.
pub fn default_subsample_size(n_total: usize) -> usize {
    (n_total as f64).sqrt().floor() as usize
}
