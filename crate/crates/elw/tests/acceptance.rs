//! Acceptance suite: re-runs the benchmark cells behind the recorded
//! reference values and checks every pinned number at its stated tolerance,
//! printing one PASS/FAIL line per assertion.
//!
//! Three assertions are known not to hold for this implementation and are
//! left failing on purpose rather than loosened; each carries a comment with
//! the measured value and the mechanical reason:
//!
//! * criterion 1, CHIM: the count-normalized trimmed estimator defined here
//!   is bias-dominated under the light-tail generator (the adaptive
//!   threshold lands near 0.10 and trims both tails of a distribution whose
//!   mass sits near 1), so it cannot reach the recorded 1.81, which equals
//!   the stabilized estimator's value;
//! * criterion 3, resampling coverage: with subsamples of size
//!   `floor(sqrt(N)) = 44` the subsample variance estimates are noisy, the
//!   normalized replicate statistics come out over-dispersed, and the
//!   resulting intervals over-cover (~98%) instead of matching the recorded
//!   94.3%;
//! * criterion 4, survey RMSE bands: the recorded IPW value (9.04) is a
//!   draw-specific tail statistic that per-replicate population regeneration
//!   cannot stably produce (it measures ~4.2 here), and the ELW/SIPW bands
//!   sit a few percent above this protocol's stable values.

use elw::estimators::{estimate, EstimatorKind};
use elw::inference::{elw_variance_missing, resample_interval};
use elw::propensity::{fit_logistic, logistic_gradient, logistic_log_likelihood};
use elw::rng::stream;
use elw::sample::MissingDataSample;
use elw::simulation::{
    run_replications, DesignKind, ExampleConfig, IntervalMode, SimulationConfig,
};
use elw::weights::{elw_weights, elw_weights_from_parts, k_function, max_weight_ratio, solve_alpha};

use nalgebra::{DMatrix, DVector};
use rand::Rng;

const SEED: u64 = 42;

struct Checks {
    name: &'static str,
    failures: Vec<String>,
}

impl Checks {
    fn new(name: &'static str) -> Self {
        Self { name, failures: Vec::new() }
    }

    fn within(&mut self, label: &str, value: f64, target: f64, tol: f64) {
        self.record(label, (value - target).abs() <= tol, format!("{value:.4} vs {target} +/- {tol}"));
    }

    fn record(&mut self, label: &str, pass: bool, detail: String) {
        if pass {
            println!("{} {label}: PASS ({detail})", self.name);
        } else {
            println!("{} {label}: FAIL ({detail})", self.name);
            self.failures.push(format!("{label}: {detail}"));
        }
    }

    fn finish(self) {
        assert!(
            self.failures.is_empty(),
            "{} failed assertions:\n  {}",
            self.name,
            self.failures.join("\n  ")
        );
    }
}

fn missing_cell(gamma: f64, c: f64, model: u8, reps: usize, intervals: IntervalMode, estimators: Vec<EstimatorKind>) -> elw::simulation::MetricsTable {
    run_replications(&SimulationConfig {
        example: ExampleConfig::MissingData { gamma, c },
        model,
        n_total: 2000,
        reps,
        seed: SEED,
        estimators,
        intervals,
        level: 0.95,
        fit_scores: false,
    })
    .expect("simulation cell runs")
}

fn survey_cell(model: u8, intervals: IntervalMode) -> elw::simulation::MetricsTable {
    let example = ExampleConfig::Survey { rho: 0.2, design: DesignKind::Poisson, n_draws: 500 };
    run_replications(&SimulationConfig {
        example,
        model,
        n_total: 3000,
        reps: 5000,
        seed: SEED,
        estimators: SimulationConfig::default_estimators(&example),
        intervals,
        level: 0.95,
        fit_scores: false,
    })
    .expect("simulation cell runs")
}

#[test]
fn criterion_1_light_tail_rmse_row() {
    let mut checks = Checks::new("criterion 1");
    let table = missing_cell(
        2.5,
        1.0,
        2,
        5000,
        IntervalMode::None,
        SimulationConfig::default_estimators(&ExampleConfig::MissingData { gamma: 2.5, c: 1.0 }),
    );
    let rmse = |label: &str| table.row(label).unwrap().rmse;
    checks.within("IPW rmse", rmse("IPW"), 2.06, 0.10);
    checks.within("SIPW rmse", rmse("SIPW"), 1.81, 0.10);
    checks.within("ZZZ rmse", rmse("ZZZ"), 1.90, 0.10);
    // Known red: measured ~2.70. The count-normalized trimmed estimator
    // targets E[Y | pi in [alpha, 1-alpha]] and its trimming bias (~+0.04,
    // i.e. ~1.9 after sqrt(N) scaling) dominates; the recorded 1.81 equals
    // the stabilized estimator and is unreachable for this form.
    checks.within("CHIM rmse", rmse("CHIM"), 1.81, 0.10);
    checks.within("ELW rmse", rmse("ELW"), 1.72, 0.10);
    for label in ["IPW", "SIPW", "ZZZ", "CHIM", "ELW"] {
        let row = table.row(label).unwrap();
        checks.record(
            &format!("{label} reps_used"),
            row.reps_used == 5000,
            format!("{}", row.reps_used),
        );
    }
    checks.finish();
}

#[test]
fn criterion_2_heavy_tail_rmse_row() {
    let mut checks = Checks::new("criterion 2");
    let table = missing_cell(
        1.5,
        0.1,
        4,
        5000,
        IntervalMode::None,
        vec![EstimatorKind::Ipw, EstimatorKind::Sipw, EstimatorKind::Zzz, EstimatorKind::Elw],
    );
    let rmse = |label: &str| table.row(label).unwrap().rmse;
    checks.within("ELW rmse", rmse("ELW"), 0.74, 0.15);
    checks.record(
        "ordering ELW < SIPW < ZZZ",
        rmse("ELW") < rmse("SIPW") && rmse("SIPW") < rmse("ZZZ"),
        format!("{:.2} < {:.2} < {:.2}", rmse("ELW"), rmse("SIPW"), rmse("ZZZ")),
    );
    checks.record(
        "IPW rmse > 10x ELW rmse",
        rmse("IPW") > 10.0 * rmse("ELW"),
        format!("{:.2} vs 10 x {:.2}", rmse("IPW"), rmse("ELW")),
    );
    checks.finish();
}

#[test]
fn criterion_3_interval_row() {
    let mut checks = Checks::new("criterion 3");
    let table = missing_cell(2.5, 0.1, 4, 5000, IntervalMode::Wald, vec![EstimatorKind::Elw]);
    let row = table.row("ELW-an").unwrap();
    checks.within("ELW-an coverage %", row.coverage.unwrap() * 100.0, 94.38, 1.0);
    checks.within("ELW-an avg length", row.avg_length.unwrap(), 0.035, 0.003);

    let table_re = missing_cell(
        2.5,
        0.1,
        4,
        1000,
        IntervalMode::Resampling { b: 1000, m: None },
        vec![EstimatorKind::Elw],
    );
    let row_re = table_re.row("ELW-re").unwrap();
    // Known red: measured ~97.9%. With M = floor(sqrt(2000)) = 44 the
    // subsample variance estimates (on ~26 observed units) are noisy, the
    // replicate statistics T* are over-dispersed relative to the full-sample
    // statistic, and the resampling quantile lands near 2.5 instead of 2.0,
    // so the intervals over-cover.
    checks.within("ELW-re coverage %", row_re.coverage.unwrap() * 100.0, 94.32, 2.0);
    checks.finish();
}

#[test]
fn criterion_4_survey_rmse_block() {
    let mut checks = Checks::new("criterion 4");
    let m1 = survey_cell(1, IntervalMode::None);
    let m3 = survey_cell(3, IntervalMode::None);
    let rmse = |t: &elw::simulation::MetricsTable, label: &str| t.row(label).unwrap().rmse;

    // Known red: the population is regenerated every replicate (the target
    // parameter is that replicate's realized mean). Under this protocol the
    // stable values measure ~3.64 (ELW), ~4.01 (SIPW), ~4.2 (IPW): the
    // recorded 3.93/4.34 sit a few percent higher and the recorded IPW 9.04
    // is a tail-configuration statistic of one specific population draw that
    // no regenerating run stably produces.
    checks.within("ELW rmse", rmse(&m1, "ELW"), 3.93, 0.25);
    checks.record(
        "IPW rmse within 10% of 9.04",
        (rmse(&m1, "IPW") - 9.04).abs() <= 0.904,
        format!("{:.3}", rmse(&m1, "IPW")),
    );
    checks.within("SIPW rmse", rmse(&m1, "SIPW"), 4.34, 0.25);

    checks.record(
        "shift rows: ELW rmse identical to 1e-6",
        (rmse(&m1, "ELW") - rmse(&m3, "ELW")).abs() <= 1e-6,
        format!("{:.9} vs {:.9}", rmse(&m1, "ELW"), rmse(&m3, "ELW")),
    );
    checks.record(
        "shift rows: SIPW rmse identical to 1e-6",
        (rmse(&m1, "SIPW") - rmse(&m3, "SIPW")).abs() <= 1e-6,
        format!("{:.9} vs {:.9}", rmse(&m1, "SIPW"), rmse(&m3, "SIPW")),
    );
    // "inflating ~4x" read as a factor in [3, 5]; measured ~6.4 under the
    // regenerating protocol (the recorded 4.0 divides two draw-specific
    // values), so this one is red as well.
    let inflation = rmse(&m3, "IPW") / rmse(&m1, "IPW");
    checks.record(
        "shift rows: IPW rmse inflates ~4x",
        (3.0..=5.0).contains(&inflation),
        format!("{inflation:.2}x"),
    );
    // ELW never errors on valid data
    checks.record(
        "ELW reps_used = reps",
        m1.row("ELW").unwrap().reps_used == 5000 && m3.row("ELW").unwrap().reps_used == 5000,
        "5000".into(),
    );
    checks.finish();
}

#[test]
fn criterion_5_survey_interval_row() {
    let mut checks = Checks::new("criterion 5");
    let table = survey_cell(1, IntervalMode::Wald);
    let row = table.row("ELW-an").unwrap();
    checks.within("ELW-an coverage %", row.coverage.unwrap() * 100.0, 93.86, 1.0);
    checks.within("ELW-an avg length", row.avg_length.unwrap(), 0.251, 0.01);
    checks.finish();
}

// ---------------------------------------------------------------------------
// criterion 6: the property suite
// ---------------------------------------------------------------------------

/// Independent root finder: dense grid scan for the first sign change of K,
/// then bisection inside the located cell. Shares no code with the
/// production solver.
fn oracle_solve_alpha(pi_obs: &[f64], n_total: usize) -> f64 {
    let n = pi_obs.len();
    let f = n as f64 / n_total as f64;
    let xi: Vec<f64> = pi_obs.iter().map(|p| f + (1.0 - f) * p).collect();
    let k = |a: f64| -> f64 { pi_obs.iter().zip(&xi).map(|(p, x)| (p - a) / (x - a)).sum() };
    let lo0 = pi_obs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi0 = xi.iter().cloned().fold(f64::INFINITY, f64::min) - 1e-13;
    // dense grid: 1e-6 steps on narrow brackets, at least 20000 points on
    // wide ones (a flat 1e-6 step over every bracket would cost ~1e11 flops
    // across the 1000 instances below)
    let step = ((hi0 - lo0) / 20_000.0).max(1e-6);
    let mut a = lo0;
    let mut ka = k(a);
    loop {
        let b = (a + step).min(hi0);
        let kb = k(b);
        if ka >= 0.0 && kb < 0.0 {
            let (mut l, mut h) = (a, b);
            while h - l > 1e-12 {
                let m = 0.5 * (l + h);
                if k(m) >= 0.0 {
                    l = m;
                } else {
                    h = m;
                }
            }
            return 0.5 * (l + h);
        }
        if b >= hi0 {
            return if kb >= 0.0 { hi0 } else { lo0 };
        }
        a = b;
        ka = kb;
    }
}

fn random_instance(rng: &mut impl Rng) -> (Vec<f64>, usize) {
    let n = rng.gen_range(2..=200);
    let n_total = n + rng.gen_range(1..=2 * n);
    let pi: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    (pi, n_total)
}

#[test]
fn criterion_6_solver_oracle_agreement_and_weight_identities() {
    let mut checks = Checks::new("criterion 6a");
    let mut rng = stream(SEED, 0x6a, 0);
    let mut max_dev: f64 = 0.0;
    let mut max_sum_dev: f64 = 0.0;
    let mut max_constraint: f64 = 0.0;
    for _ in 0..1000 {
        let (pi, n_total) = random_instance(&mut rng);
        let root = solve_alpha(&pi, n_total).unwrap();
        let oracle = oracle_solve_alpha(&pi, n_total);
        max_dev = max_dev.max((root - oracle).abs());

        let (alpha, _, weights, _) = elw_weights_from_parts(&pi, n_total).unwrap();
        let sum: f64 = weights.iter().sum();
        max_sum_dev = max_sum_dev.max((sum - 1.0).abs());
        let constraint: f64 = weights.iter().zip(&pi).map(|(w, p)| w * (p - alpha)).sum();
        max_constraint = max_constraint.max(constraint.abs());
        assert!(weights.iter().all(|w| *w > 0.0 && *w <= 1.0), "weights in (0, 1]");
    }
    checks.record(
        "solver-oracle agreement on 1000 instances (1e-8)",
        max_dev <= 1e-8,
        format!("max |dev| = {max_dev:.2e}"),
    );
    checks.record(
        "sum of weights = 1 (1e-10)",
        max_sum_dev <= 1e-10,
        format!("max |sum - 1| = {max_sum_dev:.2e}"),
    );
    checks.record(
        "sum of weights * (pi - alpha) = 0 (1e-8)",
        max_constraint <= 1e-8,
        format!("max |constraint| = {max_constraint:.2e}"),
    );
    checks.finish();
}

#[test]
fn criterion_6_weight_ratio_bound() {
    let mut checks = Checks::new("criterion 6b");
    let mut rng = stream(SEED, 0x6b, 0);
    let mut checked = 0usize;
    let mut worst_margin = f64::INFINITY;
    for _ in 0..500 {
        let (pi, n_total) = random_instance(&mut rng);
        let n = pi.len();
        let s = MissingDataSample::from_scalar_observed(&vec![1.0; n], &pi, n_total).unwrap();
        let sol = elw_weights(&s).unwrap();
        let kappa = max_weight_ratio(&sol, &pi, n_total).unwrap();
        assert!(kappa >= 1.0);
        let spread = pi.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - pi.iter().cloned().fold(f64::INFINITY, f64::min);
        for eps in [0.1, 0.2, 0.3] {
            // hypothesis: spread > eps and the smallest value's share of the
            // observations is below 1 - eps (continuous draws: share 1/n)
            if spread > eps && (1.0 / n as f64) < 1.0 - eps {
                checked += 1;
                let bound = n as f64 / (eps * eps * eps);
                worst_margin = worst_margin.min(bound - kappa);
                assert!(kappa <= bound, "kappa {kappa} exceeds n/eps^3 = {bound}");
            }
        }
    }
    checks.record(
        "kappa <= n/eps^3 whenever the hypothesis holds",
        checked > 500 && worst_margin >= 0.0,
        format!("{checked} hypothesis hits, smallest slack {worst_margin:.2}"),
    );
    checks.finish();
}

#[test]
fn criterion_6_shift_equivariance_and_efficiency_shadow() {
    let mut checks = Checks::new("criterion 6c");
    let mut rng = stream(SEED, 0x6c, 0);
    let mut max_shift_dev: f64 = 0.0;
    let mut shadow_ok = true;
    for _ in 0..300 {
        let (pi, n_total) = random_instance(&mut rng);
        let n = pi.len();
        let y: Vec<f64> = (0..n).map(|_| 4.0 * rng.gen::<f64>() - 2.0).collect();
        let s = MissingDataSample::from_scalar_observed(&y, &pi, n_total).unwrap();
        let c = 10.0 * rng.gen::<f64>() - 5.0;
        let shifted = s.with_shifted_g(c);

        let elw0 = estimate(&s, EstimatorKind::Elw).unwrap().theta_scalar();
        let elw1 = estimate(&shifted, EstimatorKind::Elw).unwrap().theta_scalar();
        max_shift_dev = max_shift_dev.max((elw1 - elw0 - c).abs());

        // convexity: the weighted mean stays inside the observed range
        let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(elw0 >= lo - 1e-12 && elw0 <= hi + 1e-12);

        if pi.iter().all(|p| *p > 0.0) {
            let sipw0 = estimate(&s, EstimatorKind::Sipw).unwrap().theta_scalar();
            let sipw1 = estimate(&shifted, EstimatorKind::Sipw).unwrap().theta_scalar();
            max_shift_dev = max_shift_dev.max((sipw1 - sipw0 - c).abs());
        }

        // finite-sample efficiency shadow: the missingness correction can
        // only shrink the uncorrected plug-in variance
        if n < n_total && n >= 2 {
            let sol = elw_weights(&s).unwrap();
            let theta = DVector::from_element(1, elw0);
            if let Ok(sigma) = elw_variance_missing(&s, &sol, &theta) {
                let nf = n_total as f64;
                let bgg: f64 = sol
                    .weights
                    .iter()
                    .zip(&y)
                    .map(|(w, v)| nf * w * w * v * v)
                    .sum();
                let uncorrected = bgg - elw0 * elw0;
                shadow_ok &= sigma[(0, 0)] <= uncorrected + 1e-10;
            }
        }
    }
    checks.record(
        "ELW/SIPW shift-equivariance (1e-10)",
        max_shift_dev <= 1e-10,
        format!("max |dev| = {max_shift_dev:.2e}"),
    );
    checks.record("variance never exceeds uncorrected plug-in", shadow_ok, "all samples".into());
    checks.finish();
}

#[test]
fn criterion_6_logistic_gradient_matches_finite_differences() {
    let mut checks = Checks::new("criterion 6d");
    let mut rng = stream(SEED, 0x6d, 0);
    let n = 400;
    let x = DMatrix::from_fn(n, 2, |_, j| if j == 0 { 1.0 } else { 2.0 * rng.gen::<f64>() - 1.0 });
    let d: Vec<bool> = (0..n)
        .map(|i| {
            let lp = 0.4 - 0.9 * x[(i, 1)];
            rng.gen::<f64>() < 1.0 / (1.0 + (-lp as f64).exp())
        })
        .collect();
    let model = fit_logistic(&x, &d).unwrap();
    let mut max_rel: f64 = 0.0;
    for beta in [DVector::from_vec(vec![0.1, -0.4]), model.beta.clone()] {
        let grad = logistic_gradient(&x, &d, &beta);
        for k in 0..2 {
            let step = 1e-6;
            let mut up = beta.clone();
            up[k] += step;
            let mut dn = beta.clone();
            dn[k] -= step;
            let fd = (logistic_log_likelihood(&x, &d, &up) - logistic_log_likelihood(&x, &d, &dn))
                / (2.0 * step);
            let rel = (grad[k] - fd).abs() / grad[k].abs().max(fd.abs()).max(1.0);
            max_rel = max_rel.max(rel);
        }
    }
    checks.record(
        "analytic gradient vs central differences (1e-5 relative)",
        max_rel <= 1e-5,
        format!("max rel dev = {max_rel:.2e}"),
    );
    checks.finish();
}

#[test]
fn criterion_6_pivotal_sampler() {
    let mut checks = Checks::new("criterion 6e");
    let n_units = 50;
    let raw: Vec<f64> = (0..n_units).map(|i| ((i * 53 + 17) % 101) as f64 + 1.0).collect();
    let total: f64 = raw.iter().sum();
    let target = 12.0;
    let pi: Vec<f64> = raw.iter().map(|v| target * v / total).collect();
    assert!(pi.iter().all(|p| *p < 1.0));

    let reps: u64 = 100_000;
    let mut counts = vec![0u64; n_units];
    let mut fixed_size = true;
    for r in 0..reps {
        let mut rng = stream(SEED, 0x6e, r);
        let sel = elw::designs::pivotal_sample(&pi, &mut rng).unwrap();
        fixed_size &= sel.iter().filter(|s| **s).count() == target as usize;
        for (c, s) in counts.iter_mut().zip(&sel) {
            if *s {
                *c += 1;
            }
        }
    }
    checks.record("fixed size on every draw", fixed_size, format!("{reps} draws of size {target}"));
    let mut worst_z: f64 = 0.0;
    for (c, p) in counts.iter().zip(&pi) {
        let freq = *c as f64 / reps as f64;
        let se = (p * (1.0 - p) / reps as f64).sqrt();
        worst_z = worst_z.max((freq - p).abs() / se);
    }
    checks.record(
        "inclusion frequencies within 4 sigma",
        worst_z <= 4.0,
        format!("worst |z| = {worst_z:.2}"),
    );
    checks.finish();
}
