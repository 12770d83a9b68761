//! CSV ingestion and the estimate workflow behind the command-line front end.
//!
//! Input dialect: comma-separated, header row required, UTF-8, `.` decimal
//! point. Missing responses are encoded as empty fields on unselected rows.
//! A missing-data file may carry all `N` rows (indicator column `d`, empty
//! `y` where `d = 0`) or only the observed rows together with `--n-total`.

use std::io::Write;
use std::path::PathBuf;

use nalgebra::DMatrix;

use crate::error::{ElwError, Result};
use crate::estimators::{self, EstimatorKind, EstimatorReport};
use crate::inference::{
    default_subsample_size, elw_variance_missing, elw_variance_wor, ipw_variance_missing,
    resample_interval, sipw_variance_missing, wald_interval, wr_variance_with_fallback,
    ConfidenceRegion,
};
use crate::propensity::{
    elw_variance_estimated_score, fit_logistic, ipw_variance_estimated_score,
    sipw_variance_estimated_score,
};
use crate::sample::{MissingDataSample, WrSample};
use crate::weights::{elw_weights, elw_weights_wr};

/// Which sampling regime produced the input file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Missing,
    Wor,
    Wr,
}

impl Regime {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "missing" => Some(Regime::Missing),
            "wor" => Some(Regime::Wor),
            "wr" => Some(Regime::Wr),
            _ => None,
        }
    }
}

/// Interval choice for the estimate command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalChoice {
    None,
    Wald,
    Resampling,
}

impl IntervalChoice {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Some(IntervalChoice::None),
            "an" | "wald" => Some(IntervalChoice::Wald),
            "re" | "resampling" => Some(IntervalChoice::Resampling),
            _ => None,
        }
    }
}

/// A fully resolved estimate request.
#[derive(Debug, Clone)]
pub struct EstimateRequest {
    pub input: PathBuf,
    pub regime: Regime,
    pub d_col: String,
    pub y_cols: Vec<String>,
    pub pi_col: String,
    pub q_col: String,
    pub x_cols: Vec<String>,
    pub fit_score: bool,
    pub n_total: Option<usize>,
    pub estimators: Vec<EstimatorKind>,
    pub interval: IntervalChoice,
    pub level: f64,
    pub seed: u64,
    pub b: usize,
    pub m: Option<usize>,
}

impl EstimateRequest {
    pub fn new(input: PathBuf, regime: Regime) -> Self {
        Self {
            input,
            regime,
            d_col: "d".into(),
            y_cols: vec!["y".into()],
            pi_col: "pi".into(),
            q_col: "q".into(),
            x_cols: Vec::new(),
            fit_score: false,
            n_total: None,
            estimators: vec![EstimatorKind::Ipw, EstimatorKind::Sipw, EstimatorKind::Elw],
            interval: IntervalChoice::Wald,
            level: 0.95,
            seed: 0,
            b: 1000,
            m: None,
        }
    }
}

/// One estimator's result: the report (variance attached when available),
/// the requested confidence region, and the count the variance normalizes by
/// (`N`, or the number of draws under with-replacement sampling).
#[derive(Debug, Clone)]
pub struct EstimateOutcome {
    pub report: EstimatorReport,
    pub region: Option<ConfidenceRegion>,
    pub scale_count: usize,
}

struct ParsedTable {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_table(path: &PathBuf) -> Result<ParsedTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.to_string()).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        rows.push(rec.iter().map(|f| f.to_string()).collect());
    }
    Ok(ParsedTable { headers, rows })
}

impl ParsedTable {
    fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.column(name).ok_or_else(|| {
            ElwError::InvalidConfig(format!(
                "column '{name}' not found; file has: {}",
                self.headers.join(", ")
            ))
        })
    }

    fn value(&self, row: usize, col: usize) -> &str {
        self.rows[row].get(col).map(|s| s.as_str()).unwrap_or("")
    }

    fn parse_f64(&self, row: usize, col: usize) -> Result<f64> {
        let raw = self.value(row, col);
        raw.parse::<f64>().map_err(|_| {
            ElwError::InvalidConfig(format!(
                "row {}: cannot parse '{}' in column '{}' as a number",
                row + 2,
                raw,
                self.headers[col]
            ))
        })
    }
}

fn parse_indicator(raw: &str, row: usize) -> Result<bool> {
    match raw {
        "1" | "true" | "TRUE" | "True" => Ok(true),
        "0" | "false" | "FALSE" | "False" => Ok(false),
        other => Err(ElwError::InvalidConfig(format!(
            "row {}: indicator value '{other}' is not 0/1",
            row + 2
        ))),
    }
}

/// Ingested missing-data/WOR input, with the covariate matrix when score
/// fitting was requested.
pub struct MissingInput {
    pub sample: MissingDataSample,
    pub design: Option<DMatrix<f64>>,
}

/// Read a missing-data or without-replacement CSV into a sample, fitting the
/// logistic score on the `x` columns when requested.
pub fn load_missing_csv(req: &EstimateRequest) -> Result<MissingInput> {
    let table = read_table(&req.input)?;
    let n_rows = table.rows.len();
    if n_rows == 0 {
        return Err(ElwError::InvalidConfig("input file has no data rows".into()));
    }
    let d_col = table.column(&req.d_col);
    let y_cols: Vec<usize> = req
        .y_cols
        .iter()
        .map(|c| table.require(c))
        .collect::<Result<_>>()?;

    let mut d = Vec::with_capacity(n_rows);
    for row in 0..n_rows {
        let sel = match d_col {
            Some(c) => parse_indicator(table.value(row, c), row)?,
            None => true,
        };
        d.push(sel);
    }

    let mut g: Vec<Option<Vec<f64>>> = Vec::with_capacity(n_rows);
    for (row, sel) in d.iter().enumerate() {
        if *sel {
            let mut v = Vec::with_capacity(y_cols.len());
            for &c in &y_cols {
                v.push(table.parse_f64(row, c)?);
            }
            g.push(Some(v));
        } else {
            g.push(None);
        }
    }

    let n_total = match req.n_total {
        Some(n) => {
            if n < n_rows {
                return Err(ElwError::InvalidConfig(format!(
                    "--n-total {n} is below the {n_rows} rows present"
                )));
            }
            n
        }
        None => n_rows,
    };

    if req.fit_score {
        if req.regime != Regime::Missing {
            return Err(ElwError::InvalidConfig(
                "--fit-score applies to the missing-data regime only".into(),
            ));
        }
        if req.x_cols.is_empty() {
            return Err(ElwError::InvalidConfig("--fit-score needs at least one --x-col".into()));
        }
        if n_total != n_rows {
            return Err(ElwError::InvalidConfig(
                "--fit-score needs covariate rows for all N units".into(),
            ));
        }
        let x_cols: Vec<usize> = req.x_cols.iter().map(|c| table.require(c)).collect::<Result<_>>()?;
        let p = x_cols.len() + 1;
        let mut x = DMatrix::<f64>::zeros(n_rows, p);
        for row in 0..n_rows {
            x[(row, 0)] = 1.0;
            for (j, &c) in x_cols.iter().enumerate() {
                x[(row, j + 1)] = table.parse_f64(row, c)?;
            }
        }
        let model = fit_logistic(&x, &d)?;
        let pi = model.predict_all(&x);
        let sample = MissingDataSample::new(d, pi, g, n_total)?;
        return Ok(MissingInput { sample, design: Some(x) });
    }

    let pi_col = table.require(&req.pi_col)?;
    let mut pi = Vec::with_capacity(n_rows);
    for row in 0..n_rows {
        pi.push(table.parse_f64(row, pi_col)?);
    }
    let sample = MissingDataSample::new(d, pi, g, n_total)?;
    Ok(MissingInput { sample, design: None })
}

/// Read a with-replacement CSV (`y` and per-draw probability `q` columns,
/// observed rows only) into a sample; `--n-total` is mandatory.
pub fn load_wr_csv(req: &EstimateRequest) -> Result<WrSample> {
    let table = read_table(&req.input)?;
    let n_rows = table.rows.len();
    if n_rows == 0 {
        return Err(ElwError::InvalidConfig("input file has no data rows".into()));
    }
    let n_total = req.n_total.ok_or_else(|| {
        ElwError::InvalidConfig("--n-total is required in the with-replacement regime".into())
    })?;
    let y_col = table.require(&req.y_cols[0])?;
    let q_col = table.require(&req.q_col)?;
    let mut y = Vec::with_capacity(n_rows);
    let mut q = Vec::with_capacity(n_rows);
    for row in 0..n_rows {
        y.push(table.parse_f64(row, y_col)?);
        q.push(table.parse_f64(row, q_col)?);
    }
    WrSample::from_scalar(&y, &q, n_total)
}

fn missing_outcome(
    input: &MissingInput,
    kind: EstimatorKind,
    req: &EstimateRequest,
    wor: bool,
) -> Result<EstimateOutcome> {
    let sample = &input.sample;
    let mut report = estimators::estimate(sample, kind)?;
    let variance_supported = matches!(
        kind,
        EstimatorKind::Ipw | EstimatorKind::Sipw | EstimatorKind::Elw
    ) && (!wor || kind == EstimatorKind::Elw);

    let mut region = None;
    if req.interval != IntervalChoice::None && variance_supported {
        let sigma = match (kind, &input.design, wor) {
            (EstimatorKind::Elw, _, true) => {
                let sol = elw_weights(sample)?;
                elw_variance_wor(sample, &sol, &report.theta_hat)?
            }
            (EstimatorKind::Elw, None, false) => {
                let sol = elw_weights(sample)?;
                elw_variance_missing(sample, &sol, &report.theta_hat)?
            }
            (EstimatorKind::Ipw, None, false) => ipw_variance_missing(sample, &report.theta_hat)?,
            (EstimatorKind::Sipw, None, false) => sipw_variance_missing(sample, &report.theta_hat)?,
            (EstimatorKind::Elw, Some(x), false) => {
                let sol = elw_weights(sample)?;
                let model = fit_logistic(x, sample.indicators())?;
                elw_variance_estimated_score(sample, &sol, &report.theta_hat, &model, x)?
            }
            (EstimatorKind::Ipw, Some(x), false) => {
                let model = fit_logistic(x, sample.indicators())?;
                ipw_variance_estimated_score(sample, &report.theta_hat, &model, x)?
            }
            (EstimatorKind::Sipw, Some(x), false) => {
                let model = fit_logistic(x, sample.indicators())?;
                sipw_variance_estimated_score(sample, &report.theta_hat, &model, x)?
            }
            _ => unreachable!(),
        };
        region = match req.interval {
            IntervalChoice::Wald => {
                Some(wald_interval(&report.theta_hat, &sigma, sample.n_total(), req.level)?)
            }
            IntervalChoice::Resampling => {
                if wor {
                    return Err(ElwError::InvalidConfig(
                        "the resampling interval is available in the missing-data regime only".into(),
                    ));
                }
                if input.design.is_some() {
                    return Err(ElwError::InvalidConfig(
                        "resampling intervals with fitted scores are not supported".into(),
                    ));
                }
                let m = req.m.unwrap_or_else(|| default_subsample_size(sample.n_total()));
                Some(resample_interval(sample, kind, req.b, m, req.level, req.seed)?)
            }
            IntervalChoice::None => None,
        };
        report.variance = Some(sigma);
    }
    let scale_count = sample.n_total();
    Ok(EstimateOutcome { report, region, scale_count })
}

fn wr_outcome(sample: &WrSample, kind: EstimatorKind, req: &EstimateRequest) -> Result<EstimateOutcome> {
    let mut report = match kind {
        EstimatorKind::Ipw => estimators::ipw_mean_wr(sample)?,
        EstimatorKind::Sipw => estimators::sipw_mean_wr(sample)?,
        EstimatorKind::Elw => estimators::elw_mean_wr(sample)?,
        other => {
            return Err(ElwError::InvalidConfig(format!(
                "{other} is not defined in the with-replacement regime"
            )))
        }
    };
    let mut region = None;
    if req.interval != IntervalChoice::None && kind == EstimatorKind::Elw {
        if req.interval == IntervalChoice::Resampling {
            return Err(ElwError::InvalidConfig(
                "the resampling interval is available in the missing-data regime only".into(),
            ));
        }
        let sol = elw_weights_wr(sample)?;
        let sigma = wr_variance_with_fallback(sample, &sol, &report.theta_hat)?;
        // with-replacement variances live on the sqrt(n) scale
        region = Some(wald_interval(&report.theta_hat, &sigma, sample.n_draws(), req.level)?);
        report.variance = Some(sigma);
    }
    Ok(EstimateOutcome { report, region, scale_count: sample.n_draws() })
}

/// Run the estimate workflow for every requested estimator.
pub fn run_estimate(req: &EstimateRequest) -> Result<Vec<EstimateOutcome>> {
    if !(req.level > 0.0 && req.level < 1.0) {
        return Err(ElwError::InvalidConfig(format!("level {} outside (0, 1)", req.level)));
    }
    if req.estimators.is_empty() {
        return Err(ElwError::InvalidConfig("no estimators requested".into()));
    }
    match req.regime {
        Regime::Missing | Regime::Wor => {
            let input = load_missing_csv(req)?;
            req.estimators
                .iter()
                .map(|k| missing_outcome(&input, *k, req, req.regime == Regime::Wor))
                .collect()
        }
        Regime::Wr => {
            let sample = load_wr_csv(req)?;
            req.estimators.iter().map(|k| wr_outcome(&sample, *k, req)).collect()
        }
    }
}

/// Machine-readable output: one row per estimator and component, with
/// shortest-roundtrip float formatting so the file re-reads losslessly.
pub fn write_estimate_csv(outcomes: &[EstimateOutcome], out: &mut dyn Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "estimator",
        "component",
        "theta_hat",
        "variance",
        "se",
        "lower",
        "upper",
        "interval",
        "level",
        "n",
        "n_total",
        "warning",
    ])?;
    for o in outcomes {
        let q = o.report.theta_hat.len();
        for k in 0..q {
            let variance = o.report.variance.as_ref().map(|v| v[(k, k)]);
            let se = variance.map(|v| (v.max(0.0) / o.scale_count as f64).sqrt());
            let bounds = o.region.as_ref().and_then(|r| match &r.shape {
                crate::inference::RegionShape::Interval { lower, upper } => Some((lower[k], upper[k])),
                _ => None,
            });
            w.write_record(&[
                o.report.method.label().to_string(),
                k.to_string(),
                format!("{}", o.report.theta_hat[k]),
                variance.map(|v| format!("{v}")).unwrap_or_default(),
                se.map(|v| format!("{v}")).unwrap_or_default(),
                bounds.map(|b| format!("{}", b.0)).unwrap_or_default(),
                bounds.map(|b| format!("{}", b.1)).unwrap_or_default(),
                o.region
                    .as_ref()
                    .map(|r| r.kind.label().to_string())
                    .unwrap_or_default(),
                o.region.as_ref().map(|r| format!("{}", r.level)).unwrap_or_default(),
                o.report.n.to_string(),
                o.report.n_total.to_string(),
                o.report.warning.clone().unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Human-readable lines for standard output.
pub fn format_estimates(outcomes: &[EstimateOutcome]) -> String {
    let mut out = String::new();
    for o in outcomes {
        let theta = if o.report.theta_hat.len() == 1 {
            format!("{:.6}", o.report.theta_hat[0])
        } else {
            let comps: Vec<String> = o.report.theta_hat.iter().map(|v| format!("{v:.6}")).collect();
            format!("({})", comps.join(", "))
        };
        out.push_str(&format!(
            "{:<8} theta_hat = {}  (n = {}, N = {})",
            o.report.method.label(),
            theta,
            o.report.n,
            o.report.n_total
        ));
        if let Some(region) = &o.region {
            if let Some((lo, hi)) = region.bounds_scalar() {
                out.push_str(&format!(
                    "  {}% {} interval: [{:.6}, {:.6}]",
                    region.level * 100.0,
                    region.kind.label(),
                    lo,
                    hi
                ));
            }
        }
        if let Some(warning) = &o.report.warning {
            out.push_str(&format!("  [warning: {warning}]"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn estimate_full_form_missing_csv() {
        let f = write_temp("d,y,pi\n1,2.0,0.5\n1,4.0,0.8\n0,,0.3\n");
        let req = EstimateRequest::new(f.path().to_path_buf(), Regime::Missing);
        let outcomes = run_estimate(&req).unwrap();
        assert_eq!(outcomes.len(), 3);
        let ipw = &outcomes[0];
        assert_eq!(ipw.report.method.label(), "IPW");
        assert!((ipw.report.theta_scalar() - 3.0).abs() < 1e-12);
        assert!(ipw.region.is_some());
    }

    #[test]
    fn estimate_observed_only_form_needs_consistent_total() {
        let f = write_temp("y,pi\n1.0,0.2\n2.0,0.5\n3.0,0.8\n");
        let mut req = EstimateRequest::new(f.path().to_path_buf(), Regime::Missing);
        req.n_total = Some(6);
        req.estimators = vec![EstimatorKind::Elw];
        let outcomes = run_estimate(&req).unwrap();
        assert!((outcomes[0].report.theta_scalar() - 1.688933329695708).abs() < 1e-9);

        req.n_total = Some(2);
        assert!(matches!(run_estimate(&req), Err(ElwError::InvalidConfig(_))));
    }

    #[test]
    fn estimate_rejects_missing_column_and_bad_numbers() {
        let f = write_temp("d,value,pi\n1,2.0,0.5\n");
        let req = EstimateRequest::new(f.path().to_path_buf(), Regime::Missing);
        let err = run_estimate(&req).unwrap_err();
        assert_eq!(err.exit_code(), 1);

        let f = write_temp("d,y,pi\n1,abc,0.5\n");
        let req = EstimateRequest::new(f.path().to_path_buf(), Regime::Missing);
        assert!(run_estimate(&req).is_err());
    }

    #[test]
    fn estimate_wr_regime() {
        let f = write_temp("y,q\n2.0,0.25\n4.0,0.5\n");
        let mut req = EstimateRequest::new(f.path().to_path_buf(), Regime::Wr);
        req.n_total = Some(8);
        let outcomes = run_estimate(&req).unwrap();
        assert!((outcomes[0].report.theta_scalar() - 1.0).abs() < 1e-12);
        // ELW interval present, IPW/SIPW point-only under WR
        assert!(outcomes[2].region.is_some());
        assert!(outcomes[0].region.is_none());

        req.n_total = None;
        assert!(matches!(run_estimate(&req), Err(ElwError::InvalidConfig(_))));
    }

    #[test]
    fn estimate_csv_output_roundtrips() {
        let f = write_temp("d,y,pi\n1,2.0,0.5\n1,4.0,0.8\n0,,0.3\n1,1.5,0.4\n");
        let mut req = EstimateRequest::new(f.path().to_path_buf(), Regime::Missing);
        req.estimators = vec![EstimatorKind::Elw];
        let outcomes = run_estimate(&req).unwrap();
        let mut buf = Vec::new();
        write_estimate_csv(&outcomes, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let rec = rdr.records().next().unwrap().unwrap();
        let theta: f64 = rec[2].parse().unwrap();
        assert_eq!(theta, outcomes[0].report.theta_scalar());
        let lower: f64 = rec[5].parse().unwrap();
        let (lo, _) = outcomes[0].region.as_ref().unwrap().bounds_scalar().unwrap();
        assert_eq!(lower, lo);
    }

    #[test]
    fn estimate_fit_score_path() {
        // logistic scores fitted from a covariate column
        let mut content = String::from("d,y,x\n");
        let mut rng_state = 88172645463325252u64;
        let mut next = || {
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..400 {
            let x = 2.0 * next() - 1.0;
            let pi = 1.0 / (1.0 + (-0.5 - x).exp());
            let d = next() < pi;
            if d {
                content.push_str(&format!("1,{:.6},{:.6}\n", x + 1.0, x));
            } else {
                content.push_str(&format!("0,,{:.6}\n", x));
            }
        }
        let f = write_temp(&content);
        let mut req = EstimateRequest::new(f.path().to_path_buf(), Regime::Missing);
        req.fit_score = true;
        req.x_cols = vec!["x".into()];
        let outcomes = run_estimate(&req).unwrap();
        for o in &outcomes {
            assert!(o.report.theta_scalar().is_finite());
            assert!(o.region.is_some(), "{}", o.report.method.label());
        }
    }

    #[test]
    fn wor_regime_rejects_resampling() {
        let f = write_temp("y,pi\n1.0,0.2\n2.0,0.5\n3.0,0.8\n");
        let mut req = EstimateRequest::new(f.path().to_path_buf(), Regime::Wor);
        req.n_total = Some(9);
        req.estimators = vec![EstimatorKind::Elw];
        req.interval = IntervalChoice::Resampling;
        assert!(matches!(run_estimate(&req), Err(ElwError::InvalidConfig(_))));
    }
}
