//! Input data containers.
//!
//! [`MissingDataSample`] covers the missing-data regime and without-replacement
//! designs: per-unit selection indicators, selection probabilities, and the
//! response vector on selected units. [`WrSample`] covers with-replacement
//! designs, where a unit may appear several times and no indicator vector
//! exists.

use crate::error::{ElwError, Result};

/// One observed unit of a [`MissingDataSample`].
#[derive(Debug, Clone, Copy)]
pub struct ObservedUnit<'a> {
    /// Row index within the sample (0-based).
    pub row: usize,
    /// Selection probability of this unit.
    pub pi: f64,
    /// Response vector `g(Z)`, length `q`.
    pub g: &'a [f64],
}

/// Per-unit records for the missing-data regime: selection indicator `d`,
/// selection probability `pi`, and the response `g(Z)` present exactly on
/// selected units, plus the total count `N`.
///
/// Two storage forms are accepted:
/// * fully enumerated: one row per population unit (`rows == n_total`), with
///   `pi` known for every unit;
/// * observed-only: one row per selected unit plus the total `n_total`; the
///   missing units are implicit and carry no usable information.
#[derive(Debug, Clone)]
pub struct MissingDataSample {
    observed: Vec<bool>,
    pi: Vec<f64>,
    /// Row-major responses of observed units in row order, `n_observed * q`.
    g: Vec<f64>,
    /// Row index -> position among observed units (unused entries are 0).
    obs_pos: Vec<u32>,
    q: usize,
    n_total: usize,
}

impl MissingDataSample {
    /// Build from explicit per-row records. `g` holds one entry per row:
    /// `Some` exactly where `d` is true.
    pub fn new(d: Vec<bool>, pi: Vec<f64>, g: Vec<Option<Vec<f64>>>, n_total: usize) -> Result<Self> {
        let rows = d.len();
        if pi.len() != rows || g.len() != rows {
            return Err(ElwError::InvalidSample(format!(
                "length mismatch: d = {}, pi = {}, g = {}",
                rows,
                pi.len(),
                g.len()
            )));
        }
        let mut q = 0usize;
        let mut flat = Vec::new();
        for (i, (sel, gi)) in d.iter().zip(&g).enumerate() {
            match (sel, gi) {
                (true, Some(v)) => {
                    if q == 0 {
                        q = v.len();
                        if q == 0 {
                            return Err(ElwError::InvalidSample(format!("unit {i}: empty response vector")));
                        }
                    } else if v.len() != q {
                        return Err(ElwError::InvalidSample(format!(
                            "unit {i}: response dimension {} differs from {q}",
                            v.len()
                        )));
                    }
                    flat.extend_from_slice(v);
                }
                (false, None) => {}
                (true, None) => {
                    return Err(ElwError::InvalidSample(format!("unit {i}: selected but response missing")))
                }
                (false, Some(_)) => {
                    return Err(ElwError::InvalidSample(format!("unit {i}: response present on a missing unit")))
                }
            }
        }
        Self::from_flat(d, pi, flat, q.max(1), n_total)
    }

    /// Fully enumerated scalar form: one row per population unit, `y` is read
    /// only where `d` is true.
    pub fn from_scalar_full(d: &[bool], y: &[f64], pi: &[f64]) -> Result<Self> {
        if y.len() != d.len() || pi.len() != d.len() {
            return Err(ElwError::InvalidSample("d, y, pi must have equal length".into()));
        }
        let g: Vec<f64> = d.iter().zip(y).filter(|(s, _)| **s).map(|(_, v)| *v).collect();
        Self::from_flat(d.to_vec(), pi.to_vec(), g, 1, d.len())
    }

    /// Observed-only scalar form: rows are the selected units, the remaining
    /// `n_total - rows` units are implicit.
    pub fn from_scalar_observed(y: &[f64], pi: &[f64], n_total: usize) -> Result<Self> {
        if y.len() != pi.len() {
            return Err(ElwError::InvalidSample("y and pi must have equal length".into()));
        }
        Self::from_flat(vec![true; y.len()], pi.to_vec(), y.to_vec(), 1, n_total)
    }

    fn from_flat(observed: Vec<bool>, pi: Vec<f64>, g: Vec<f64>, q: usize, n_total: usize) -> Result<Self> {
        let rows = observed.len();
        if n_total == 0 {
            return Err(ElwError::InvalidSample("n_total must be positive".into()));
        }
        if rows > n_total {
            return Err(ElwError::InvalidSample(format!(
                "{rows} rows exceed the stated total N = {n_total}"
            )));
        }
        for (i, p) in pi.iter().enumerate() {
            if !p.is_finite() || *p < 0.0 || *p > 1.0 {
                return Err(ElwError::InvalidSample(format!(
                    "unit {i}: selection probability {p} outside [0, 1]"
                )));
            }
        }
        let n_obs = observed.iter().filter(|b| **b).count();
        if n_obs == 0 {
            return Err(ElwError::InvalidSample("no observed units (n = 0)".into()));
        }
        if g.len() != n_obs * q {
            return Err(ElwError::InvalidSample(format!(
                "response storage {} does not match {} observed units of dimension {q}",
                g.len(),
                n_obs
            )));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(ElwError::InvalidSample("non-finite response value".into()));
        }
        let mut obs_pos = vec![0u32; rows];
        let mut pos = 0u32;
        for (slot, sel) in obs_pos.iter_mut().zip(&observed) {
            if *sel {
                *slot = pos;
                pos += 1;
            }
        }
        Ok(Self { observed, pi, g, obs_pos, q, n_total })
    }

    /// Total count `N`.
    pub fn n_total(&self) -> usize {
        self.n_total
    }

    /// Number of observed units `n = sum(d)`.
    pub fn n_observed(&self) -> usize {
        self.g.len() / self.q
    }

    /// Number of stored rows (equals `n_total` in the fully enumerated form).
    pub fn rows(&self) -> usize {
        self.observed.len()
    }

    /// Response dimension `q`.
    pub fn dim(&self) -> usize {
        self.q
    }

    /// Whether every population unit has a stored row (required by the
    /// estimators that threshold or trim over all `N` probabilities).
    pub fn is_fully_enumerated(&self) -> bool {
        self.observed.len() == self.n_total
    }

    /// Selection indicator per stored row.
    pub fn indicators(&self) -> &[bool] {
        &self.observed
    }

    /// Selection probability per stored row.
    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// Selection probabilities of observed units, in row order.
    pub fn pi_observed(&self) -> Vec<f64> {
        self.observed
            .iter()
            .zip(&self.pi)
            .filter(|(s, _)| **s)
            .map(|(_, p)| *p)
            .collect()
    }

    /// Iterate over observed units with their responses.
    pub fn observed_units(&self) -> impl Iterator<Item = ObservedUnit<'_>> {
        let q = self.q;
        self.observed
            .iter()
            .enumerate()
            .filter(|(_, s)| **s)
            .zip(self.g.chunks_exact(q))
            .map(move |((row, _), g)| ObservedUnit { row, pi: self.pi[row], g })
    }

    /// Copy with every response component shifted by `c` (test and
    /// equivariance-check helper).
    pub fn with_shifted_g(&self, c: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.g {
            *v += c;
        }
        out
    }

    /// Subsample of the stored-and-implicit rows at `indices` (values in
    /// `0..n_total`), forming a new sample with total count `indices.len()`.
    /// Indices at or beyond `rows()` address implicit missing units and
    /// contribute only to the new total.
    pub fn subsample(&self, indices: &[usize]) -> Result<Self> {
        let m = indices.len();
        let mut d = Vec::with_capacity(m);
        let mut pi = Vec::with_capacity(m);
        let mut g = Vec::new();
        // Map row -> observed position to locate response storage.
        for &idx in indices {
            if idx >= self.n_total {
                return Err(ElwError::InvalidSample(format!("subsample index {idx} out of range")));
            }
            if idx < self.observed.len() {
                d.push(self.observed[idx]);
                pi.push(self.pi[idx]);
                if self.observed[idx] {
                    let pos = self.obs_pos[idx] as usize;
                    g.extend_from_slice(&self.g[pos * self.q..(pos + 1) * self.q]);
                }
            } else {
                d.push(false);
                pi.push(0.0);
            }
        }
        Self::from_flat(d, pi, g, self.q, m)
    }
}

/// A with-replacement sample: the drawn responses, each draw's single-occasion
/// selection probability `q_i`, and the population size `N`. The working
/// probabilities are `pi_i = n * q_i`, which may exceed 1.
#[derive(Debug, Clone)]
pub struct WrSample {
    g: Vec<f64>,
    q: usize,
    draw_probs: Vec<f64>,
    n_total: usize,
}

impl WrSample {
    pub fn from_scalar(y: &[f64], draw_probs: &[f64], n_total: usize) -> Result<Self> {
        if y.len() != draw_probs.len() {
            return Err(ElwError::InvalidSample("y and q must have equal length".into()));
        }
        if y.is_empty() {
            return Err(ElwError::InvalidSample("empty with-replacement sample".into()));
        }
        if n_total == 0 {
            return Err(ElwError::InvalidSample("n_total must be positive".into()));
        }
        for (i, p) in draw_probs.iter().enumerate() {
            if !p.is_finite() || *p <= 0.0 || *p > 1.0 {
                return Err(ElwError::InvalidSample(format!(
                    "draw {i}: sampling probability {p} outside (0, 1]"
                )));
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(ElwError::InvalidSample("non-finite response value".into()));
        }
        Ok(Self { g: y.to_vec(), q: 1, draw_probs: draw_probs.to_vec(), n_total })
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    /// Number of draws `n`.
    pub fn n_draws(&self) -> usize {
        self.draw_probs.len()
    }

    pub fn dim(&self) -> usize {
        self.q
    }

    /// Single-occasion probabilities `q_i` per draw.
    pub fn draw_probs(&self) -> &[f64] {
        &self.draw_probs
    }

    /// Working probabilities `pi_i = n * q_i` per draw.
    pub fn pi(&self) -> Vec<f64> {
        let n = self.n_draws() as f64;
        self.draw_probs.iter().map(|q| n * q).collect()
    }

    /// Response of draw `i`.
    pub fn g_row(&self, i: usize) -> &[f64] {
        &self.g[i * self.q..(i + 1) * self.q]
    }

    pub fn with_shifted_g(&self, c: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.g {
            *v += c;
        }
        out
    }
}
