//! The duality-function toolkit: lozenge product, the bounded kernel
//! F = exp(◇), harmonicity and approximate-duality residuals, and the
//! iterated transform G_k for stationary finite-dimensional laws.
//!
//! Complex values are explicit (re, im) pairs. Products of many F-factors
//! underflow gracefully to 0 rather than erroring; |F(x,y)| ≤ 1 whenever
//! both arguments lie in the closed quadrant.

use crate::dynamics::{evolve_state, DynamicsError, Scheme, SimParams, SystemState};
use crate::measures::{harmonic_sample, BoundaryPoint, QuadrantPoint};
use crate::rng::derive_rng;
use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DualityError {
    #[error("harmonicity is asserted only for probes on the boundary")]
    InteriorProbe,
    #[error("probe grid and probe list must have equal length and increasing times")]
    BadGrid,
    #[error("mark sites must be distinct and in range")]
    BadMarks,
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// The lozenge product `x ◇ y = -(x₁+x₂)(y₁+y₂) + i (x₁-x₂)(y₁-y₂)`,
/// symmetric and bilinear; defined on all of ℝ².
pub fn lozenge(x: (f64, f64), y: (f64, f64)) -> Complex64 {
    Complex64::new(-(x.0 + x.1) * (y.0 + y.1), (x.0 - x.1) * (y.0 - y.1))
}

/// The duality kernel `F(x, y) = exp(x ◇ y)`.
pub fn lozenge_exp(x: (f64, f64), y: (f64, f64)) -> Complex64 {
    lozenge(x, y).exp()
}

/// Monte Carlo mean and combined standard error of a complex sample.
#[derive(Debug, Clone, Copy)]
pub struct ComplexEstimate {
    pub mean: Complex64,
    pub std_err: f64,
}

fn complex_mean(samples: &[Complex64]) -> ComplexEstimate {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<Complex64>() / n;
    let mut var_re = 0.0;
    let mut var_im = 0.0;
    for s in samples {
        var_re += (s.re - mean.re).powi(2);
        var_im += (s.im - mean.im).powi(2);
    }
    ComplexEstimate {
        mean,
        std_err: ((var_re + var_im) / (n * n)).sqrt(),
    }
}

/// Monte Carlo estimate of `∫ Q_θ(dx) F(x,y) - F(θ,y)`; the modulus is a
/// Monte Carlo zero for boundary probes y.
pub fn harmonicity_residual<R: Rng + ?Sized>(
    theta: QuadrantPoint,
    y: &BoundaryPoint,
    n_samples: usize,
    rng: &mut R,
) -> Result<ComplexEstimate, DualityError> {
    let probe = y.coords();
    let target = lozenge_exp(theta.coords(), probe);
    let samples: Vec<Complex64> = (0..n_samples)
        .map(|_| lozenge_exp(harmonic_sample(theta, rng).coords(), probe) - target)
        .collect();
    Ok(complex_mean(&samples))
}

/// How θ is chosen in the approximate-duality check.
#[derive(Debug, Clone, Copy)]
pub enum ThetaChoice {
    Fixed(QuadrantPoint),
    /// Use the replica's own total-mass pair at the conditioning time.
    ReplicaMean,
}

/// Configuration of one approximate-duality experiment.
#[derive(Debug, Clone)]
pub struct DualityRunConfig {
    pub initial: SystemState,
    /// Conditioning time (model units).
    pub t: f64,
    /// Window length (model units).
    pub s: f64,
    pub theta: ThetaChoice,
    /// Probes: (site index, boundary point).
    pub marks: Vec<(usize, BoundaryPoint)>,
    pub replicas: u64,
    pub seed: u64,
    pub h: f64,
    pub scheme: Scheme,
}

/// The three pieces of the approximate duality relation plus the paired
/// residual `lhs - main - remainder` and its standard error.
#[derive(Debug, Clone, Copy)]
pub struct DualityCheck {
    pub lhs: Complex64,
    pub rhs_main: Complex64,
    pub rhs_remainder: Complex64,
    pub residual: Complex64,
    pub residual_se: f64,
    /// Diagnostic bound on the remainder modulus,
    /// `(1-e^{-s}) · 2|Σy| · sup_r mean|Z_{t+r}-θ|`.
    pub remainder_bound: f64,
}

/// Shared-replica Monte Carlo of the approximate duality identity: the
/// conditional product expectation equals the explicit product term plus an
/// integral remainder carrying `e^{r-s}(Z_{t+r}-θ) ◇ Σy(j)`.
pub fn duality_residual(cfg: &DualityRunConfig) -> Result<DualityCheck, DualityError> {
    let n = cfg.initial.n_sites();
    {
        let mut seen = vec![false; n];
        for &(k, _) in &cfg.marks {
            if k >= n || seen[k] {
                return Err(DualityError::BadMarks);
            }
            seen[k] = true;
        }
    }
    let window_steps = (cfg.s / cfg.h).round() as usize;
    let base = SimParams {
        scheme: cfg.scheme,
        h: cfg.h,
        seed: cfg.seed,
        ..Default::default()
    };

    let mut lhs = Vec::with_capacity(cfg.replicas as usize);
    let mut main = Vec::with_capacity(cfg.replicas as usize);
    let mut remainder = Vec::with_capacity(cfg.replicas as usize);
    let mut paired = Vec::with_capacity(cfg.replicas as usize);
    // per-grid-point mean |Z - θ| for the diagnostic bound
    let mut dist_sums = vec![0.0f64; window_steps + 1];

    let sum_y: (f64, f64) = cfg
        .marks
        .iter()
        .fold((0.0, 0.0), |acc, (_, y)| {
            let (y1, y2) = y.coords();
            (acc.0 + y1, acc.1 + y2)
        });

    for r in 0..cfg.replicas {
        let mut rng = derive_rng(cfg.seed, "duality", r);
        let mut phase = SimParams {
            horizon: cfg.t,
            replica: r,
            ..base.clone()
        };
        let state_t = evolve_state(&cfg.initial, &phase, &mut rng)?;
        let theta = match cfg.theta {
            ThetaChoice::Fixed(q) => q,
            ThetaChoice::ReplicaMean => {
                let (z1, z2) = state_t.totals();
                QuadrantPoint::new(z1, z2)
            }
        };
        let th = theta.coords();

        // explicit product term at the conditioning time
        let mut main_r = Complex64::new(1.0, 0.0);
        let decay_s = (-cfg.s).exp();
        for (k, y) in &cfg.marks {
            let (y1, y2) = y.coords();
            let (x1, x2) = state_t.site(*k).coords();
            main_r *= lozenge_exp(th, (y1, y2));
            main_r *= lozenge_exp((x1 - th.0, x2 - th.1), (decay_s * y1, decay_s * y2));
        }

        // window evolution with trapezoid accumulation of the remainder
        let mut state = state_t;
        let mut rem_r = Complex64::new(0.0, 0.0);
        phase.horizon = cfg.h;
        for step in 0..=window_steps {
            if window_steps > 0 {
                let rr = step as f64 * cfg.h;
                let scale = (rr - cfg.s).exp();
                let mut product = Complex64::new(1.0, 0.0);
                for (k, y) in &cfg.marks {
                    let (y1, y2) = y.coords();
                    let x = state.site(*k).coords();
                    product *= lozenge_exp(x, (scale * y1, scale * y2));
                    product *= lozenge_exp(th, ((1.0 - scale) * y1, (1.0 - scale) * y2));
                }
                let (z1, z2) = state.totals();
                let dz = (z1 - th.0, z2 - th.1);
                dist_sums[step] += (dz.0 * dz.0 + dz.1 * dz.1).sqrt();
                let integrand = product * lozenge(dz, sum_y) * scale;
                let weight = if step == 0 || step == window_steps {
                    0.5
                } else {
                    1.0
                };
                rem_r += integrand * (weight * cfg.h);
            }
            if step < window_steps {
                match cfg.scheme {
                    Scheme::TauLeap => {
                        crate::dynamics::step_tau_leap(&mut state, &phase, &mut rng, None)?
                    }
                    Scheme::HarmonicSplit => {
                        crate::dynamics::step_harmonic_split(&mut state, &phase, &mut rng)?
                    }
                }
            }
        }

        let mut lhs_r = Complex64::new(1.0, 0.0);
        for (k, y) in &cfg.marks {
            lhs_r *= lozenge_exp(state.site(*k).coords(), y.coords());
        }
        lhs.push(lhs_r);
        main.push(main_r);
        remainder.push(rem_r);
        paired.push(lhs_r - main_r - rem_r);
    }

    let norm_y = (sum_y.0 * sum_y.0 + sum_y.1 * sum_y.1).sqrt();
    let sup_dist = dist_sums
        .iter()
        .map(|s| s / cfg.replicas as f64)
        .fold(0.0, f64::max);
    let res = complex_mean(&paired);
    Ok(DualityCheck {
        lhs: complex_mean(&lhs).mean,
        rhs_main: complex_mean(&main).mean,
        rhs_remainder: complex_mean(&remainder).mean,
        residual: res.mean,
        residual_se: res.std_err,
        remainder_bound: (1.0 - (-cfg.s).exp()) * 2.0 * norm_y * sup_dist,
    })
}

fn is_boundary(p: &QuadrantPoint) -> bool {
    p.x1 == 0.0 || p.x2 == 0.0
}

fn g_rec<R: Rng + ?Sized>(
    theta: (f64, f64),
    args: &[QuadrantPoint],
    s_grid: &[f64],
    n_samples: usize,
    rng: &mut R,
) -> Complex64 {
    let k = args.len();
    let last = args[k - 1];
    if k == 1 {
        if is_boundary(&last) {
            return lozenge_exp(theta, last.coords());
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for _ in 0..n_samples {
            acc += lozenge_exp(theta, harmonic_sample(last, rng).coords());
        }
        return acc / n_samples as f64;
    }
    let decay = (s_grid[k - 2] - s_grid[k - 1]).exp();
    let draws = if is_boundary(&last) { 1 } else { n_samples };
    let mut acc = Complex64::new(0.0, 0.0);
    let mut inner_args: Vec<QuadrantPoint> = args[..k - 1].to_vec();
    for _ in 0..draws {
        let z = harmonic_sample(last, rng);
        let (z1, z2) = z.coords();
        let prev = args[k - 2];
        inner_args[k - 2] = QuadrantPoint::new(prev.x1 + decay * z1, prev.x2 + decay * z2);
        let tail = lozenge_exp(theta, ((1.0 - decay) * z1, (1.0 - decay) * z2));
        acc += g_rec(theta, &inner_args, &s_grid[..k - 1], n_samples, rng) * tail;
    }
    acc / draws as f64
}

/// Nested Monte Carlo of the iterated transform
/// `G_k(θ, z₁, …, z_k)` over the time grid `s₁ < … < s_k`.
pub fn g_k_evaluate<R: Rng + ?Sized>(
    theta: QuadrantPoint,
    z_list: &[BoundaryPoint],
    s_grid: &[f64],
    n_samples: usize,
    rng: &mut R,
) -> Result<Complex64, DualityError> {
    if z_list.is_empty() || z_list.len() != s_grid.len() || s_grid.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(DualityError::BadGrid);
    }
    let args: Vec<QuadrantPoint> = z_list.iter().map(|&p| p.into()).collect();
    Ok(g_rec(theta.coords(), &args, s_grid, n_samples, rng))
}

/// Two-probe closed form: `G₂(θ,y₁,y₂) = F(θ,(1-e^{s₁-s₂})y₂) ·
/// ∫ Q_{y₁+e^{s₁-s₂}y₂}(dz) F(θ,z)`, the inner integral by exact draws.
/// Independent route used to cross-check the recursion.
pub fn g2_closed_form<R: Rng + ?Sized>(
    theta: QuadrantPoint,
    y1: &BoundaryPoint,
    y2: &BoundaryPoint,
    s1: f64,
    s2: f64,
    n_samples: usize,
    rng: &mut R,
) -> Complex64 {
    let decay = (s1 - s2).exp();
    let (a1, a2) = y1.coords();
    let (b1, b2) = y2.coords();
    let centre = QuadrantPoint::new(a1 + decay * b1, a2 + decay * b2);
    let th = theta.coords();
    let factor = lozenge_exp(th, ((1.0 - decay) * b1, (1.0 - decay) * b2));
    let mut acc = Complex64::new(0.0, 0.0);
    for _ in 0..n_samples {
        acc += lozenge_exp(th, harmonic_sample(centre, rng).coords());
    }
    factor * acc / n_samples as f64
}

/// Result of comparing stationary-path products against the transform.
#[derive(Debug, Clone, Copy)]
pub struct StationaryCheck {
    pub path_side: Complex64,
    pub transform_side: Complex64,
    pub residual: Complex64,
    pub combined_se: f64,
}

/// Simulates stationary paths of the non-spatial process and compares the
/// product expectation `E[Π F(Y_{s_k}, z_k)]` with `G_m(θ, z₁, …, z_m)`.
pub fn stationary_fdd_check<R: Rng + ?Sized>(
    theta: QuadrantPoint,
    s_grid: &[f64],
    z_list: &[BoundaryPoint],
    n_samples: usize,
    rng: &mut R,
) -> Result<StationaryCheck, DualityError> {
    if z_list.is_empty() || z_list.len() != s_grid.len() || s_grid.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(DualityError::BadGrid);
    }
    let mut path_samples = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let path = crate::reference::sample_stationary_path(theta, s_grid, rng)
            .map_err(|_| DualityError::BadGrid)?;
        let mut product = Complex64::new(1.0, 0.0);
        for (y, z) in path.iter().zip(z_list.iter()) {
            product *= lozenge_exp(y.coords(), z.coords());
        }
        path_samples.push(product);
    }
    let path_est = complex_mean(&path_samples);

    // independent estimate of the transform side with its own spread
    let batches = 16usize;
    let per_batch = (n_samples / batches).max(32);
    let mut batch_vals = Vec::with_capacity(batches);
    for _ in 0..batches {
        batch_vals.push(g_k_evaluate(theta, z_list, s_grid, per_batch, rng)?);
    }
    let transform_est = complex_mean(&batch_vals);

    let residual = path_est.mean - transform_est.mean;
    Ok(StationaryCheck {
        path_side: path_est.mean,
        transform_side: transform_est.mean,
        residual,
        combined_se: (path_est.std_err.powi(2) + transform_est.std_err.powi(2)).sqrt(),
    })
}

/// The documented boundary probe set: magnitudes {0.25, 1, 4} on each axis.
pub fn probe_boundary_set() -> Vec<BoundaryPoint> {
    let mut v = Vec::new();
    for m in [0.25, 1.0, 4.0] {
        v.push(BoundaryPoint::type1(m));
        v.push(BoundaryPoint::type2(m));
    }
    v
}

/// The documented quadrant probe set.
pub fn probe_quadrant_set() -> Vec<QuadrantPoint> {
    vec![
        QuadrantPoint::new(1.0, 0.0),
        QuadrantPoint::new(0.0, 1.0),
        QuadrantPoint::new(1.0, 1.0),
        QuadrantPoint::new(0.5, 2.0),
    ]
}
