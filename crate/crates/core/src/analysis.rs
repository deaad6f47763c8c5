//! Deterministic rate calculators, path-statistics estimators and the
//! statistical test utilities shared by the convergence suites.

use crate::measures::{nu_truncated_second_moment, Axis};
use crate::record::{PathRecord, RecordError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("system size must be at least 3, got {0}")]
    SystemTooSmall(usize),
    #[error("need a positive cutoff, got {0}")]
    BadCutoff(f64),
    #[error("empty sample")]
    EmptySample,
    #[error("probe requires x > 0 and 0 <= y <= a")]
    BadProbe,
    #[error(transparent)]
    Record(#[from] RecordError),
}

/// The four closed-form per-unit-rescaled-time quantities for the half/half
/// configuration: large-jump rate bounds and truncated square-variation
/// rates, one per jump case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeuristicRates {
    pub large_jump_rate_case1: f64,
    pub large_jump_rate_case2: f64,
    pub qv_rate_case1: f64,
    pub qv_rate_case2: f64,
}

/// Closed-form jump-rate heuristics for the half/half configuration.
///
/// Both large-jump bounds are `(2/π)(1/log N)(1/ε²) z₁z₂`; the truncated
/// square-variation rates are `(1/log N) z₁z₂` times the truncated second
/// moment of ν at cutoff `εN/(2zᵢ)`, and tend to `(4/π) z₁z₂` each.
pub fn heuristic_rates(
    n: usize,
    eps: f64,
    z1: f64,
    z2: f64,
) -> Result<HeuristicRates, AnalysisError> {
    if n < 3 {
        return Err(AnalysisError::SystemTooSmall(n));
    }
    if !(eps > 0.0) {
        return Err(AnalysisError::BadCutoff(eps));
    }
    assert!(z1 >= 0.0 && z2 >= 0.0, "means must be nonnegative");
    let log_n = (n as f64).ln();
    let product = z1 * z2;
    let large = 2.0 / std::f64::consts::PI / log_n / (eps * eps) * product;
    let qv = |zi: f64, axis: Axis| {
        if product == 0.0 {
            return 0.0;
        }
        let cutoff = eps * n as f64 / (2.0 * zi);
        product / log_n * nu_truncated_second_moment(axis, cutoff)
    };
    Ok(HeuristicRates {
        large_jump_rate_case1: large,
        large_jump_rate_case2: large,
        qv_rate_case1: qv(z1, Axis::Axis1),
        qv_rate_case2: qv(z2, Axis::Axis2),
    })
}

/// Realized square variation of a record sampled on a uniform grid, as
/// running step functions, with the companion integral `(8/π)∫ z₁z₂ ds`
/// accumulated by the trapezoid rule.
#[derive(Debug, Clone)]
pub struct QvEstimate {
    pub times: Vec<f64>,
    pub qv1: Vec<f64>,
    pub qv2: Vec<f64>,
    pub companion: Vec<f64>,
}

/// Sum of squared increments of each total-mass coordinate. The record is
/// used as-is; feed it a rescaled view to estimate in rescaled time.
pub fn realized_qv(record: &PathRecord) -> Result<QvEstimate, AnalysisError> {
    if record.len() < 2 {
        return Err(AnalysisError::Record(RecordError::TooFewSamples(2)));
    }
    let rate = crate::reference::LIMIT_BRANCHING_RATE;
    let mut qv1 = vec![0.0];
    let mut qv2 = vec![0.0];
    let mut companion = vec![0.0];
    for i in 1..record.len() {
        let (a1, a2) = record.totals[i - 1];
        let (b1, b2) = record.totals[i];
        let dt = record.times[i] - record.times[i - 1];
        qv1.push(qv1[i - 1] + (b1 - a1) * (b1 - a1));
        qv2.push(qv2[i - 1] + (b2 - a2) * (b2 - a2));
        companion.push(companion[i - 1] + rate * 0.5 * (a1 * a2 + b1 * b2) * dt);
    }
    Ok(QvEstimate {
        times: record.times.clone(),
        qv1,
        qv2,
        companion,
    })
}

/// Jump census against the tail bound: counts logged events whose
/// total-mass displacement `|J|/N` exceeds `eps` up to rescaled time `t`,
/// and evaluates the bound `(4t/log N) ε⁻² z₁(0)z₂(0)`.
#[derive(Debug, Clone, Copy)]
pub struct JumpCensus {
    pub count: u64,
    pub bound: f64,
}

pub fn jump_census(
    record: &PathRecord,
    eps: f64,
    n: usize,
    t: f64,
) -> Result<JumpCensus, AnalysisError> {
    if n < 3 {
        return Err(AnalysisError::SystemTooSmall(n));
    }
    if !(eps > 0.0) {
        return Err(AnalysisError::BadCutoff(eps));
    }
    let jumps = record
        .jumps
        .as_ref()
        .ok_or(AnalysisError::Record(RecordError::MissingJumpLog))?;
    let beta = PathRecord::time_scale(n)?;
    let horizon_model = t * beta;
    let n_f = n as f64;
    let count = jumps
        .iter()
        .filter(|j| {
            let (d1, d2) = j.displacement;
            j.time <= horizon_model && (d1 * d1 + d2 * d2).sqrt() / n_f > eps
        })
        .count() as u64;
    let (z1, z2) = *record.totals.first().ok_or(AnalysisError::EmptySample)?;
    let bound = 4.0 * t / n_f.ln() / (eps * eps) * z1 * z2;
    Ok(JumpCensus { count, bound })
}

/// Two-sample Kolmogorov–Smirnov statistic with exact tie handling.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64, AnalysisError> {
    if a.is_empty() || b.is_empty() {
        return Err(AnalysisError::EmptySample);
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.total_cmp(q));
    ys.sort_by(|p, q| p.total_cmp(q));
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        // consume every copy of the current value from both samples
        while i < xs.len() && xs[i] == v {
            i += 1;
        }
        while j < ys.len() && ys[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

/// One-sample Kolmogorov–Smirnov statistic against a CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<f64, AnalysisError> {
    if sample.is_empty() {
        return Err(AnalysisError::EmptySample);
    }
    let mut xs = sample.to_vec();
    xs.sort_by(|p, q| p.total_cmp(q));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(d)
}

/// Asymptotic two-sample critical value `c(α)·sqrt((n+m)/(nm))` with
/// `c(α) = sqrt(-ln(α/2)/2)`.
pub fn ks_critical(alpha: f64, n: usize, m: usize) -> f64 {
    assert!(alpha > 0.0 && alpha < 1.0);
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Limiting distribution of `√n·D_n`: `K(x) = 1 - 2Σ (-1)^{k-1} e^{-2k²x²}`.
pub fn kolmogorov_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for k in 1..100 {
        let term = (-2.0 * (k as f64) * (k as f64) * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (1.0 - 2.0 * sum).clamp(0.0, 1.0)
}

/// Quantile of the Kolmogorov distribution by bisection.
pub fn kolmogorov_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0);
    let (mut lo, mut hi) = (1e-6, 4.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `N²/(N^{p_N} log N) · 1/(2-p_N)` with `p_N = 2 - 1/log N`; algebraically
/// equal to e for every system size.
pub fn moment_scale_constant(n: usize) -> Result<f64, AnalysisError> {
    if n < 3 {
        return Err(AnalysisError::SystemTooSmall(n));
    }
    let nf = n as f64;
    let log_n = nf.ln();
    let p = 2.0 - 1.0 / log_n;
    Ok(nf.powi(2) / (nf.powf(p) * log_n) / (2.0 - p))
}

/// Evaluates `|log(x+y)|` against the bound `a + |log x|` on one probe.
pub fn log_bound_check(x: f64, y: f64, a: f64) -> Result<(f64, f64), AnalysisError> {
    if !(x > 0.0) || !(0.0..=a).contains(&y) {
        return Err(AnalysisError::BadProbe);
    }
    Ok(((x + y).ln().abs(), a + x.ln().abs()))
}

/// Pass/fail record carrying its statistic, threshold and provenance.
#[derive(Debug, Clone)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub n: u64,
    pub verdict: Verdict,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

impl TestReport {
    /// Verdict is pass exactly when `statistic <= threshold`.
    pub fn new(name: impl Into<String>, statistic: f64, threshold: f64, n: u64, seed: u64) -> Self {
        Self {
            name: name.into(),
            statistic,
            threshold,
            n,
            verdict: if statistic <= threshold {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
            seed,
            config_hash: String::new(),
        }
    }

    pub fn with_hash(mut self, hash: &str) -> Self {
        self.config_hash = hash.to_string();
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Sample mean and its standard error.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, (var / n).sqrt())
}

/// Empirical quantile (nearest-rank on a copy).
pub fn quantile(xs: &[f64], p: f64) -> f64 {
    assert!(!xs.is_empty() && (0.0..=1.0).contains(&p));
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let idx = ((p * (v.len() - 1) as f64).round() as usize).min(v.len() - 1);
    v[idx]
}
