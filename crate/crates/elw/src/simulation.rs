//! Data generators, replication runner, and accuracy metrics.
//!
//! Two benchmark set-ups are built in:
//!
//! * a missing-data generator where the selection probability is drawn from
//!   `P(pi <= u) = u^(gamma-1)`, the response is `mu(pi)` plus scaled
//!   chi-square noise, and the indicator is Bernoulli(`pi`);
//! * a finite-population generator with `x ~ U[0, 2]`,
//!   `y = mu(x) + sqrt(3(1-rho^2)) e`, sampled by a Poisson, pivotal, or
//!   with-replacement proportional-to-size design with `pi_i` proportional
//!   to `x_i`.
//!
//! Each replicate draws from its own RNG stream, so runs are reproducible
//! bit for bit on any number of workers.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Normal};
use rayon::prelude::*;

use crate::designs::{inclusion_probs_proportional, pivotal_sample, poisson_sample, pps_wr_sample};
use crate::error::{ElwError, Result};
use crate::estimators::{
    self, elw_mean_wr_from, ipw_mean_wr, sipw_mean_wr, zzz_mean_wr, EstimatorKind,
};
use crate::inference::{
    default_subsample_size, elw_variance_missing, elw_variance_wor, ipw_variance_missing,
    resample_interval, sipw_variance_missing, wald_interval, wr_variance_with_fallback,
};
use crate::propensity::{
    elw_variance_estimated_score, fit_logistic, ipw_variance_estimated_score,
    sipw_variance_estimated_score, LogisticModel,
};
use crate::rng::{self, tag};
use crate::sample::{MissingDataSample, WrSample};
use crate::weights::{elw_weights, elw_weights_wr};

/// Survey design selector for the finite-population set-up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignKind {
    Poisson,
    Pivotal,
    PpsWr,
}

impl DesignKind {
    pub fn label(&self) -> &'static str {
        match self {
            DesignKind::Poisson => "poisson",
            DesignKind::Pivotal => "pivotal",
            DesignKind::PpsWr => "pps",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "poisson" => Some(DesignKind::Poisson),
            "pivotal" => Some(DesignKind::Pivotal),
            "pps" | "pps-wr" | "ppswr" => Some(DesignKind::PpsWr),
            _ => None,
        }
    }
}

/// Which benchmark generates the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExampleConfig {
    /// Missing-data benchmark: tail index `gamma > 1`, noise scale `c`.
    MissingData { gamma: f64, c: f64 },
    /// Finite-population benchmark: correlation `rho`, design, sample size.
    Survey { rho: f64, design: DesignKind, n_draws: usize },
}

/// Interval estimators to attach to each replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalMode {
    None,
    /// Wald intervals from the asymptotic-normal variance estimates.
    Wald,
    /// Subsample-resampling intervals with `b` replicates of size `m`
    /// (default `floor(sqrt(N))`).
    Resampling { b: usize, m: Option<usize> },
    /// Both of the above.
    Both { b: usize, m: Option<usize> },
}

impl IntervalMode {
    fn wants_wald(&self) -> bool {
        matches!(self, IntervalMode::Wald | IntervalMode::Both { .. })
    }

    fn resampling_params(&self) -> Option<(usize, Option<usize>)> {
        match self {
            IntervalMode::Resampling { b, m } | IntervalMode::Both { b, m } => Some((*b, *m)),
            _ => None,
        }
    }
}

/// One simulation cell: generator, model, sizes, replication count, seed,
/// estimator set, and interval choice.
#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub example: ExampleConfig,
    /// Mean-function selector, 1..=4.
    pub model: u8,
    pub n_total: usize,
    pub reps: usize,
    pub seed: u64,
    pub estimators: Vec<EstimatorKind>,
    pub intervals: IntervalMode,
    pub level: f64,
    /// Missing-data benchmark only: fit a logistic score on a generated
    /// covariate instead of using the true probabilities.
    pub fit_scores: bool,
}

impl SimulationConfig {
    /// Estimator set matching the benchmark's published comparisons.
    pub fn default_estimators(example: &ExampleConfig) -> Vec<EstimatorKind> {
        match example {
            ExampleConfig::MissingData { .. } => vec![
                EstimatorKind::Ipw,
                EstimatorKind::Sipw,
                EstimatorKind::Zzz,
                EstimatorKind::Chim,
                EstimatorKind::Elw,
            ],
            ExampleConfig::Survey { .. } => vec![
                EstimatorKind::Ipw,
                EstimatorKind::Sipw,
                EstimatorKind::Zzz,
                EstimatorKind::Elw,
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.model) {
            return Err(ElwError::InvalidConfig(format!("model {} outside 1..=4", self.model)));
        }
        if self.reps == 0 {
            return Err(ElwError::InvalidConfig("reps must be at least 1".into()));
        }
        if self.n_total < 2 {
            return Err(ElwError::InvalidConfig("N must be at least 2".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(ElwError::InvalidConfig(format!("level {} outside (0, 1)", self.level)));
        }
        if self.estimators.is_empty() {
            return Err(ElwError::InvalidConfig("no estimators requested".into()));
        }
        match &self.example {
            ExampleConfig::MissingData { gamma, .. } => {
                if *gamma <= 1.0 {
                    return Err(ElwError::InvalidConfig(format!("gamma {} must exceed 1", gamma)));
                }
            }
            ExampleConfig::Survey { rho, n_draws, .. } => {
                if rho.abs() >= 1.0 {
                    return Err(ElwError::InvalidConfig(format!("rho {} outside (-1, 1)", rho)));
                }
                if *n_draws == 0 || *n_draws > self.n_total {
                    return Err(ElwError::InvalidConfig(format!(
                        "n = {} outside 1..=N = {}",
                        n_draws, self.n_total
                    )));
                }
                if self.estimators.iter().any(|k| {
                    matches!(k, EstimatorKind::Chim | EstimatorKind::MwTrim { .. })
                }) {
                    return Err(ElwError::InvalidConfig(
                        "CHIM and MW-trim are missing-data estimators; not defined under survey designs"
                            .into(),
                    ));
                }
                if self.intervals.resampling_params().is_some() {
                    return Err(ElwError::InvalidConfig(
                        "the resampling interval is validated for the missing-data regime only".into(),
                    ));
                }
                if self.fit_scores {
                    return Err(ElwError::InvalidConfig(
                        "survey designs have known inclusion probabilities; --fit-score does not apply"
                            .into(),
                    ));
                }
            }
        }
        if self.fit_scores && self.intervals.resampling_params().is_some() {
            return Err(ElwError::InvalidConfig(
                "resampling intervals with fitted scores are not supported".into(),
            ));
        }
        Ok(())
    }
}

/// Mean function of the missing-data benchmark.
pub fn mu_missing(model: u8, t: f64) -> f64 {
    match model {
        1 => (2.0 * std::f64::consts::PI * t).cos(),
        2 => 1.0 - t,
        3 => (2.0 * std::f64::consts::PI * t).cos() + 5.0,
        _ => 6.0 - t,
    }
}

/// Mean function of the finite-population benchmark.
pub fn mu_survey(model: u8, rho: f64, x: f64) -> f64 {
    let s3 = 3.0f64.sqrt();
    match model {
        1 => s3 * rho * x,
        2 => s3 * rho * (x + x * x),
        3 => s3 * rho * x + 5.0,
        _ => s3 * rho * (x + x * x) + 5.0,
    }
}

/// Raw vectors of one missing-data replicate: indicators, responses (defined
/// for every unit; only observed entries are used downstream), probabilities.
pub fn gen_example1_parts<R: Rng + ?Sized>(
    gamma: f64,
    c: f64,
    model: u8,
    n_total: usize,
    rng: &mut R,
) -> (Vec<bool>, Vec<f64>, Vec<f64>) {
    let chi = ChiSquared::new(4.0).unwrap();
    let inv_exp = 1.0 / (gamma - 1.0);
    let scale = 8.0f64.sqrt();
    let mut d = Vec::with_capacity(n_total);
    let mut y = Vec::with_capacity(n_total);
    let mut pi = Vec::with_capacity(n_total);
    for _ in 0..n_total {
        let p: f64 = rng.gen::<f64>().powf(inv_exp);
        let eta: f64 = chi.sample(rng);
        // the model enters only through mu, so one seed produces the same
        // (pi, noise, d) draws for all four models
        y.push(mu_missing(model, p) + c * (eta - 4.0) / scale);
        d.push(rng.gen::<f64>() < p);
        pi.push(p);
    }
    (d, y, pi)
}

/// One missing-data replicate as a sample.
pub fn gen_example1<R: Rng + ?Sized>(
    gamma: f64,
    c: f64,
    model: u8,
    n_total: usize,
    rng: &mut R,
) -> Result<MissingDataSample> {
    let (d, y, pi) = gen_example1_parts(gamma, c, model, n_total, rng);
    MissingDataSample::from_scalar_full(&d, &y, &pi)
}

/// `theta = E mu(pi)` for the missing-data benchmark, by adaptive quadrature
/// of `mu(u^(1/(gamma-1)))` over the uniform scale (absolute error 1e-11).
pub fn true_theta_example1(gamma: f64, model: u8) -> f64 {
    let inv_exp = 1.0 / (gamma - 1.0);
    adaptive_simpson(&|u: f64| mu_missing(model, u.powf(inv_exp)), 0.0, 1.0, 1e-11)
}

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, b - a);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 48)
}

/// A realized finite population with its (per-realization) target mean.
#[derive(Debug, Clone)]
pub struct Population {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Population {
    /// The finite-population parameter: the realized mean of `y`.
    pub fn theta(&self) -> f64 {
        self.y.iter().sum::<f64>() / self.y.len() as f64
    }
}

/// One realized finite population.
///
/// The noise scale is `sqrt(1 - rho^2)`: `sqrt(3) x` has unit standard
/// deviation for `x ~ U[0, 2]`, so this makes `rho` the exact correlation
/// between `x` and `y` in Model 1 (and reproduces the published benchmark
/// values, which a `sqrt(3(1 - rho^2))` scale does not).
pub fn gen_population_example2<R: Rng + ?Sized>(
    rho: f64,
    model: u8,
    n_total: usize,
    rng: &mut R,
) -> Population {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let noise = (1.0 - rho * rho).sqrt();
    let mut x = Vec::with_capacity(n_total);
    let mut y = Vec::with_capacity(n_total);
    for _ in 0..n_total {
        let xi: f64 = 2.0 * rng.gen::<f64>();
        let e: f64 = normal.sample(rng);
        x.push(xi);
        y.push(mu_survey(model, rho, xi) + noise * e);
    }
    Population { x, y }
}

/// Scaled root mean square error `sqrt(N) * RMS(estimate - theta)`.
///
/// The scale count is the population size `N` in both benchmarks, including
/// the survey designs that draw `n << N` units; multiply by `sqrt(n/N)` to
/// move a value onto the alternative `sqrt(n)` convention.
pub fn scaled_rmse(estimates: &[f64], theta: f64, n_scale: usize) -> f64 {
    let errors: Vec<f64> = estimates.iter().map(|e| e - theta).collect();
    scaled_rmse_from_errors(&errors, n_scale)
}

fn scaled_rmse_from_errors(errors: &[f64], n_scale: usize) -> f64 {
    if errors.is_empty() {
        return f64::NAN;
    }
    let mse = errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64;
    (n_scale as f64).sqrt() * mse.sqrt()
}

/// Fraction of regions containing `theta`, and their average scalar length.
pub fn coverage_and_length(regions: &[crate::inference::ConfidenceRegion], theta: f64) -> (f64, f64) {
    if regions.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let covered = regions.iter().filter(|r| r.contains_scalar(theta)).count();
    let total_len: f64 = regions.iter().filter_map(|r| r.length()).sum();
    (covered as f64 / regions.len() as f64, total_len / regions.len() as f64)
}

/// One line of a metrics table: estimator label (with an `-an`/`-re` suffix
/// when an interval is attached), scaled RMSE, bias, coverage, average
/// length, and how many replicates produced a value.
#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub estimator: String,
    pub rmse: f64,
    pub bias: f64,
    pub coverage: Option<f64>,
    pub avg_length: Option<f64>,
    pub reps_used: usize,
}

/// Aggregated results of one simulation cell.
#[derive(Debug, Clone)]
pub struct MetricsTable {
    pub config: SimulationConfig,
    pub rows: Vec<MetricsRow>,
}

impl MetricsTable {
    pub fn row(&self, label: &str) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.estimator == label)
    }

    /// CSV header shared by `write_csv` outputs.
    pub fn csv_header() -> &'static [&'static str] {
        &[
            "example", "design", "model", "gamma", "c", "rho", "n_total", "n_draws", "reps",
            "seed", "level", "estimator", "rmse", "bias", "coverage", "avg_length", "reps_used",
        ]
    }

    fn config_fields(&self) -> [String; 11] {
        let c = &self.config;
        let (example, design, gamma, cc, rho, n_draws) = match &c.example {
            ExampleConfig::MissingData { gamma, c } => {
                ("1".into(), String::new(), format!("{gamma}"), format!("{c}"), String::new(), String::new())
            }
            ExampleConfig::Survey { rho, design, n_draws } => (
                "2".into(),
                design.label().into(),
                String::new(),
                String::new(),
                format!("{rho}"),
                format!("{n_draws}"),
            ),
        };
        [
            example,
            design,
            c.model.to_string(),
            gamma,
            cc,
            rho,
            c.n_total.to_string(),
            n_draws,
            c.reps.to_string(),
            c.seed.to_string(),
            c.level.to_string(),
        ]
    }

    /// One CSV row per estimator label.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::csv_header())?;
        let cfg = self.config_fields();
        for row in &self.rows {
            let mut rec: Vec<String> = cfg.to_vec();
            rec.push(row.estimator.clone());
            rec.push(format!("{:.6}", row.rmse));
            rec.push(format!("{:.6}", row.bias));
            rec.push(row.coverage.map(|v| format!("{:.4}", v)).unwrap_or_default());
            rec.push(row.avg_length.map(|v| format!("{:.4}", v)).unwrap_or_default());
            rec.push(row.reps_used.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-replicate outcome: the estimation error and, when requested, interval
/// coverage indicators and lengths per estimator slot.
#[derive(Debug, Clone)]
struct RepOutcome {
    point: Vec<Option<f64>>,
    wald: Vec<Option<(bool, f64)>>,
    resample: Vec<Option<(bool, f64)>>,
}

fn supports_interval(kind: EstimatorKind) -> bool {
    matches!(kind, EstimatorKind::Ipw | EstimatorKind::Sipw | EstimatorKind::Elw)
}

/// One raw replicate outcome: the estimation error of one estimator in one
/// replicate. Exported for external distribution plots in place of any
/// built-in rendering.
#[derive(Debug, Clone)]
pub struct RawError {
    pub rep: usize,
    pub estimator: &'static str,
    pub error: f64,
}

/// Run every replicate of a simulation cell and aggregate the metrics.
///
/// Replicates are distributed over the rayon pool; each derives its RNG
/// streams from `(seed, purpose, replicate)`, so the output is independent
/// of scheduling. Per-replicate estimator failures are recorded (the row's
/// `reps_used` drops) and never abort the run.
pub fn run_replications(config: &SimulationConfig) -> Result<MetricsTable> {
    Ok(run_replications_detailed(config)?.0)
}

/// [`run_replications`] plus the per-replicate estimation errors.
pub fn run_replications_detailed(config: &SimulationConfig) -> Result<(MetricsTable, Vec<RawError>)> {
    config.validate()?;
    let theta_missing = match &config.example {
        ExampleConfig::MissingData { gamma, .. } => true_theta_example1(*gamma, config.model),
        ExampleConfig::Survey { .. } => f64::NAN,
    };

    let outcomes: Vec<RepOutcome> = (0..config.reps)
        .into_par_iter()
        .map(|rep| one_replicate(config, rep as u64, theta_missing))
        .collect();

    let mut rows = Vec::new();
    for (slot, kind) in config.estimators.iter().enumerate() {
        let errors: Vec<f64> = outcomes.iter().filter_map(|o| o.point[slot]).collect();
        let rmse = scaled_rmse_from_errors(&errors, config.n_total);
        let bias = errors.iter().sum::<f64>() / errors.len().max(1) as f64;
        let point_used = errors.len();

        // Wald intervals exist for IPW/SIPW/ELW in the missing-data regime
        // and for ELW only under the survey designs.
        let wald_available = supports_interval(*kind)
            && match config.example {
                ExampleConfig::MissingData { .. } => true,
                ExampleConfig::Survey { .. } => *kind == EstimatorKind::Elw,
            };
        let mut emitted_interval = false;
        if config.intervals.wants_wald() && wald_available {
            let vals: Vec<(bool, f64)> = outcomes.iter().filter_map(|o| o.wald[slot]).collect();
            rows.push(MetricsRow {
                estimator: format!("{}-an", kind.label()),
                rmse,
                bias,
                coverage: Some(mean_of(vals.iter().map(|(c, _)| *c as u8 as f64))),
                avg_length: Some(mean_of(vals.iter().map(|(_, l)| *l))),
                reps_used: vals.len(),
            });
            emitted_interval = true;
        }
        if config.intervals.resampling_params().is_some() && supports_interval(*kind) {
            let vals: Vec<(bool, f64)> = outcomes.iter().filter_map(|o| o.resample[slot]).collect();
            rows.push(MetricsRow {
                estimator: format!("{}-re", kind.label()),
                rmse,
                bias,
                coverage: Some(mean_of(vals.iter().map(|(c, _)| *c as u8 as f64))),
                avg_length: Some(mean_of(vals.iter().map(|(_, l)| *l))),
                reps_used: vals.len(),
            });
            emitted_interval = true;
        }
        if !emitted_interval {
            rows.push(MetricsRow {
                estimator: kind.label().to_string(),
                rmse,
                bias,
                coverage: None,
                avg_length: None,
                reps_used: point_used,
            });
        }
    }
    let mut raw = Vec::new();
    for (rep, outcome) in outcomes.iter().enumerate() {
        for (slot, kind) in config.estimators.iter().enumerate() {
            if let Some(err) = outcome.point[slot] {
                raw.push(RawError { rep, estimator: kind.label(), error: err });
            }
        }
    }
    Ok((MetricsTable { config: config.clone(), rows }, raw))
}

/// Write per-replicate errors as CSV: `rep,estimator,error`.
pub fn write_raw_errors<W: std::io::Write>(raw: &[RawError], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rep", "estimator", "error"])?;
    for r in raw {
        w.write_record(&[r.rep.to_string(), r.estimator.to_string(), format!("{}", r.error)])?;
    }
    w.flush()?;
    Ok(())
}

fn mean_of(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut k = 0usize;
    for v in values {
        sum += v;
        k += 1;
    }
    if k == 0 {
        f64::NAN
    } else {
        sum / k as f64
    }
}

fn one_replicate(config: &SimulationConfig, rep: u64, theta_missing: f64) -> RepOutcome {
    let slots = config.estimators.len();
    let mut out = RepOutcome {
        point: vec![None; slots],
        wald: vec![None; slots],
        resample: vec![None; slots],
    };
    match &config.example {
        ExampleConfig::MissingData { gamma, c } => {
            missing_data_replicate(config, rep, *gamma, *c, theta_missing, &mut out)
        }
        ExampleConfig::Survey { rho, design, n_draws } => {
            survey_replicate(config, rep, *rho, *design, *n_draws, &mut out)
        }
    }
    out
}

fn missing_data_replicate(
    config: &SimulationConfig,
    rep: u64,
    gamma: f64,
    c: f64,
    theta0: f64,
    out: &mut RepOutcome,
) {
    let mut rng = rng::stream(config.seed, tag::MISSING_DATA, rep);
    let (d, y, pi_true) = gen_example1_parts(gamma, c, config.model, config.n_total, &mut rng);

    // optionally refit the score on the implied logistic covariate
    let fitted: Option<(LogisticModel, DMatrix<f64>, Vec<f64>)> = if config.fit_scores {
        let x = DMatrix::from_fn(config.n_total, 2, |i, j| {
            if j == 0 {
                1.0
            } else {
                let p = pi_true[i].clamp(1e-12, 1.0 - 1e-12);
                (p / (1.0 - p)).ln()
            }
        });
        match fit_logistic(&x, &d) {
            Ok(model) => {
                let pi_hat = model.predict_all(&x);
                Some((model, x, pi_hat))
            }
            Err(_) => return,
        }
    } else {
        None
    };
    let pi = fitted.as_ref().map(|(_, _, p)| p.as_slice()).unwrap_or(&pi_true);
    let sample = match MissingDataSample::from_scalar_full(&d, &y, pi) {
        Ok(s) => s,
        Err(_) => return,
    };

    for (slot, kind) in config.estimators.iter().enumerate() {
        let report = match estimators::estimate(&sample, *kind) {
            Ok(r) => r,
            Err(_) => continue,
        };
        out.point[slot] = Some(report.theta_scalar() - theta0);

        if config.intervals.wants_wald() && supports_interval(*kind) {
            let sigma = match (&fitted, kind) {
                (None, EstimatorKind::Elw) => elw_weights(&sample)
                    .and_then(|sol| elw_variance_missing(&sample, &sol, &report.theta_hat)),
                (None, EstimatorKind::Ipw) => ipw_variance_missing(&sample, &report.theta_hat),
                (None, EstimatorKind::Sipw) => sipw_variance_missing(&sample, &report.theta_hat),
                (Some((model, x, _)), EstimatorKind::Elw) => elw_weights(&sample).and_then(|sol| {
                    elw_variance_estimated_score(&sample, &sol, &report.theta_hat, model, x)
                }),
                (Some((model, x, _)), EstimatorKind::Ipw) => {
                    ipw_variance_estimated_score(&sample, &report.theta_hat, model, x)
                }
                (Some((model, x, _)), EstimatorKind::Sipw) => {
                    sipw_variance_estimated_score(&sample, &report.theta_hat, model, x)
                }
                _ => unreachable!(),
            };
            if let Ok(sigma) = sigma {
                if let Ok(region) = wald_interval(&report.theta_hat, &sigma, config.n_total, config.level)
                {
                    out.wald[slot] =
                        Some((region.contains_scalar(theta0), region.length().unwrap_or(0.0)));
                }
            }
        }
        if let Some((b, m)) = config.intervals.resampling_params() {
            if supports_interval(*kind) {
                let m = m.unwrap_or_else(|| default_subsample_size(config.n_total));
                let sub_seed = rng::derive_seed(config.seed, tag::RESAMPLE_SEED, rep);
                if let Ok(region) = resample_interval(&sample, *kind, b, m, config.level, sub_seed) {
                    out.resample[slot] =
                        Some((region.contains_scalar(theta0), region.length().unwrap_or(0.0)));
                }
            }
        }
    }
}

fn survey_replicate(
    config: &SimulationConfig,
    rep: u64,
    rho: f64,
    design: DesignKind,
    n_draws: usize,
    out: &mut RepOutcome,
) {
    let mut rng_pop = rng::stream(config.seed, tag::POPULATION, rep);
    let pop = gen_population_example2(rho, config.model, config.n_total, &mut rng_pop);
    let theta0 = pop.theta();
    let mut rng_design = rng::stream(config.seed, tag::DESIGN, rep);

    match design {
        DesignKind::Poisson | DesignKind::Pivotal => {
            let pi = match inclusion_probs_proportional(&pop.x, n_draws) {
                Ok(p) => p,
                Err(_) => return,
            };
            let d = match design {
                DesignKind::Poisson => poisson_sample(&pi, &mut rng_design),
                _ => pivotal_sample(&pi, &mut rng_design),
            };
            let d = match d {
                Ok(v) => v,
                Err(_) => return,
            };
            let sample = match MissingDataSample::from_scalar_full(&d, &pop.y, &pi) {
                Ok(s) => s,
                Err(_) => return,
            };
            for (slot, kind) in config.estimators.iter().enumerate() {
                let report = match estimators::estimate(&sample, *kind) {
                    Ok(r) => r,
                    Err(_) => continue,
                };
                out.point[slot] = Some(report.theta_scalar() - theta0);
                if config.intervals.wants_wald() && *kind == EstimatorKind::Elw {
                    // Poisson sampling has independent indicators and is a
                    // missing-data problem, so its interval uses the
                    // missing-data variance; fixed-size pivotal sampling uses
                    // the without-replacement form.
                    let region = elw_weights(&sample)
                        .and_then(|sol| match design {
                            DesignKind::Poisson => {
                                elw_variance_missing(&sample, &sol, &report.theta_hat)
                            }
                            _ => elw_variance_wor(&sample, &sol, &report.theta_hat),
                        })
                        .and_then(|sigma| {
                            wald_interval(&report.theta_hat, &sigma, config.n_total, config.level)
                        });
                    if let Ok(region) = region {
                        out.wald[slot] =
                            Some((region.contains_scalar(theta0), region.length().unwrap_or(0.0)));
                    }
                }
            }
        }
        DesignKind::PpsWr => {
            let total: f64 = pop.x.iter().sum();
            let q: Vec<f64> = pop.x.iter().map(|v| v / total).collect();
            let idx = match pps_wr_sample(&q, n_draws, &mut rng_design) {
                Ok(v) => v,
                Err(_) => return,
            };
            let y_drawn: Vec<f64> = idx.iter().map(|i| pop.y[*i]).collect();
            let q_drawn: Vec<f64> = idx.iter().map(|i| q[*i]).collect();
            let wr = match WrSample::from_scalar(&y_drawn, &q_drawn, config.n_total) {
                Ok(s) => s,
                Err(_) => return,
            };
            let pi_star: Vec<f64> = q.iter().map(|v| n_draws as f64 * v).collect();
            for (slot, kind) in config.estimators.iter().enumerate() {
                let report = match kind {
                    EstimatorKind::Ipw => ipw_mean_wr(&wr),
                    EstimatorKind::Sipw => sipw_mean_wr(&wr),
                    EstimatorKind::Zzz => zzz_mean_wr(&wr, &pi_star),
                    EstimatorKind::Elw => elw_weights_wr(&wr).map(|sol| elw_mean_wr_from(&wr, &sol)),
                    _ => continue,
                };
                let report = match report {
                    Ok(r) => r,
                    Err(_) => continue,
                };
                out.point[slot] = Some(report.theta_scalar() - theta0);
                if config.intervals.wants_wald() && *kind == EstimatorKind::Elw {
                    // with-replacement variances live on the sqrt(n) scale
                    let region = elw_weights_wr(&wr)
                        .and_then(|sol| wr_variance_with_fallback(&wr, &sol, &report.theta_hat))
                        .and_then(|sigma| {
                            wald_interval(&report.theta_hat, &sigma, n_draws, config.level)
                        });
                    if let Ok(region) = region {
                        out.wald[slot] =
                            Some((region.contains_scalar(theta0), region.length().unwrap_or(0.0)));
                    }
                }
            }
        }
    }
}
