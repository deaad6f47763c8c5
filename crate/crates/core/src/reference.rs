//! Reference processes the limits are compared against: the finite-rate
//! system, the limiting total-mass diffusion and the non-spatial process
//! with exact harmonic transitions.

use crate::measures::{harmonic_sample, BoundaryPoint, QuadrantPoint};
use crate::record::PathRecord;
use crate::rng::{derive_rng, StreamRng};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReferenceError {
    #[error("branching rate must be positive, got {0}")]
    BadGamma(f64),
    #[error("step size must be positive, got {0}")]
    BadStep(f64),
    #[error("time grid must be strictly increasing and nonnegative")]
    BadGrid,
}

/// Total-mass pair for the limiting diffusion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionState {
    pub z1: f64,
    pub z2: f64,
}

impl DiffusionState {
    pub fn new(z1: f64, z2: f64) -> Self {
        assert!(z1 >= 0.0 && z2 >= 0.0, "total masses must be nonnegative");
        Self { z1, z2 }
    }
}

/// Finite branching rate plus discretization parameters.
#[derive(Debug, Clone, Copy)]
pub struct GammaParams {
    pub gamma: f64,
    pub h: f64,
    pub seed: u64,
    pub replica: u64,
}

impl GammaParams {
    fn validate(&self) -> Result<(), ReferenceError> {
        if !(self.gamma > 0.0) {
            return Err(ReferenceError::BadGamma(self.gamma));
        }
        if !(self.h > 0.0) {
            return Err(ReferenceError::BadStep(self.h));
        }
        Ok(())
    }
}

/// Branching rate of the limiting total-mass diffusion, 8/π.
pub const LIMIT_BRANCHING_RATE: f64 = 8.0 / std::f64::consts::PI;

/// Result of a finite-rate run: the totals path plus the final per-site
/// configuration (sites live in the closed quadrant, not on its boundary).
#[derive(Debug, Clone)]
pub struct McbGammaRun {
    pub record: PathRecord,
    pub final_sites: Vec<QuadrantPoint>,
}

/// Euler–Maruyama simulation of the finite-rate system: mean-field drift
/// plus per-site, per-type noise `sqrt(γ x₁ x₂) dB`. Negative coordinates
/// are clamped to zero after each step.
pub fn simulate_mcb_gamma(
    initial: &[QuadrantPoint],
    params: &GammaParams,
    horizon: f64,
) -> Result<McbGammaRun, ReferenceError> {
    params.validate()?;
    let mut rng = derive_rng(params.seed, "mcb-gamma", params.replica);
    simulate_mcb_gamma_with_rng(initial, params, horizon, &mut rng)
}

pub fn simulate_mcb_gamma_with_rng(
    initial: &[QuadrantPoint],
    params: &GammaParams,
    horizon: f64,
    rng: &mut StreamRng,
) -> Result<McbGammaRun, ReferenceError> {
    params.validate()?;
    let n = initial.len();
    let mut x1: Vec<f64> = initial.iter().map(|p| p.x1).collect();
    let mut x2: Vec<f64> = initial.iter().map(|p| p.x2).collect();
    let mut record = PathRecord {
        replica: params.replica,
        n_sites: n,
        ..Default::default()
    };
    let totals = |a: &[f64], b: &[f64]| {
        (
            a.iter().sum::<f64>() / n as f64,
            b.iter().sum::<f64>() / n as f64,
        )
    };
    record.push(0.0, totals(&x1, &x2));
    let n_steps = (horizon / params.h).round() as u64;
    let h = params.h;
    let sqrt_h = h.sqrt();
    for step in 1..=n_steps {
        let z1 = x1.iter().sum::<f64>() / n as f64;
        let z2 = x2.iter().sum::<f64>() / n as f64;
        for k in 0..n {
            let diff = (params.gamma * x1[k] * x2[k]).max(0.0).sqrt() * sqrt_h;
            let g1: f64 = rng.sample(StandardNormal);
            let g2: f64 = rng.sample(StandardNormal);
            x1[k] = (x1[k] + h * (z1 - x1[k]) + diff * g1).max(0.0);
            x2[k] = (x2[k] + h * (z2 - x2[k]) + diff * g2).max(0.0);
        }
        record.push(step as f64 * h, totals(&x1, &x2));
    }
    let final_sites = x1
        .iter()
        .zip(x2.iter())
        .map(|(&a, &b)| QuadrantPoint::new(a, b))
        .collect();
    Ok(McbGammaRun {
        record,
        final_sites,
    })
}

/// Euler–Maruyama for the driftless limiting diffusion
/// `dZⁱ = sqrt((8/π) Z¹Z²) dBⁱ` with independent noises per coordinate and
/// clamping at zero. Once a coordinate hits zero the noise vanishes and the
/// state is frozen.
pub fn simulate_limit_diffusion(
    z0: DiffusionState,
    h: f64,
    horizon: f64,
    seed: u64,
    replica: u64,
) -> Result<PathRecord, ReferenceError> {
    if !(h > 0.0) {
        return Err(ReferenceError::BadStep(h));
    }
    let mut rng = derive_rng(seed, "limit-diffusion", replica);
    simulate_limit_diffusion_with_rng(z0, h, horizon, replica, &mut rng)
}

pub fn simulate_limit_diffusion_with_rng(
    z0: DiffusionState,
    h: f64,
    horizon: f64,
    replica: u64,
    rng: &mut StreamRng,
) -> Result<PathRecord, ReferenceError> {
    if !(h > 0.0) {
        return Err(ReferenceError::BadStep(h));
    }
    let mut record = PathRecord {
        replica,
        n_sites: 0,
        ..Default::default()
    };
    let (mut z1, mut z2) = (z0.z1, z0.z2);
    record.push(0.0, (z1, z2));
    let n_steps = (horizon / h).round() as u64;
    let sqrt_h = h.sqrt();
    for step in 1..=n_steps {
        let diff = (LIMIT_BRANCHING_RATE * z1 * z2).max(0.0).sqrt() * sqrt_h;
        if diff > 0.0 {
            let g1: f64 = rng.sample(StandardNormal);
            let g2: f64 = rng.sample(StandardNormal);
            z1 = (z1 + diff * g1).max(0.0);
            z2 = (z2 + diff * g2).max(0.0);
        }
        record.push(step as f64 * h, (z1, z2));
    }
    Ok(record)
}

/// Exact transition of the non-spatial process: a draw from the harmonic
/// measure at `e^{-s} y + (1-e^{-s}) θ`. Iterating along a time grid gives
/// exact finite-dimensional samples.
pub fn y_theta_step<R: Rng + ?Sized>(
    y: BoundaryPoint,
    theta: QuadrantPoint,
    s: f64,
    rng: &mut R,
) -> BoundaryPoint {
    assert!(s >= 0.0, "time increment must be nonnegative");
    let decay = (-s).exp();
    let pull = 1.0 - decay;
    let (y1, y2) = y.coords();
    harmonic_sample(
        QuadrantPoint::new(decay * y1 + pull * theta.x1, decay * y2 + pull * theta.x2),
        rng,
    )
}

/// Stationary path sampler: an initial draw from the harmonic measure at θ,
/// then exact transitions along the grid. Every marginal is that harmonic
/// law again.
pub fn sample_stationary_path<R: Rng + ?Sized>(
    theta: QuadrantPoint,
    times: &[f64],
    rng: &mut R,
) -> Result<Vec<BoundaryPoint>, ReferenceError> {
    if times.windows(2).any(|w| w[1] <= w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(ReferenceError::BadGrid);
    }
    let mut out = Vec::with_capacity(times.len());
    let mut current = harmonic_sample(theta, rng);
    let mut prev_t = 0.0;
    for &t in times {
        if t > prev_t || out.is_empty() {
            current = y_theta_step(current, theta, t - prev_t, rng);
        }
        out.push(current);
        prev_t = t;
    }
    Ok(out)
}

/// Euler–Maruyama step of the finite-rate non-spatial process
/// `dYⁱ = (θⁱ - Yⁱ) dt + sqrt(γ Y¹Y²) dWⁱ`, clamped at zero.
pub fn y_theta_gamma_step<R: Rng + ?Sized>(
    y: QuadrantPoint,
    theta: QuadrantPoint,
    gamma: f64,
    h: f64,
    rng: &mut R,
) -> Result<QuadrantPoint, ReferenceError> {
    if !(gamma > 0.0) {
        return Err(ReferenceError::BadGamma(gamma));
    }
    if !(h > 0.0) {
        return Err(ReferenceError::BadStep(h));
    }
    let diff = (gamma * y.x1 * y.x2).max(0.0).sqrt() * h.sqrt();
    let g1: f64 = rng.sample(StandardNormal);
    let g2: f64 = rng.sample(StandardNormal);
    Ok(QuadrantPoint::new(
        (y.x1 + h * (theta.x1 - y.x1) + diff * g1).max(0.0),
        (y.x2 + h * (theta.x2 - y.x2) + diff * g2).max(0.0),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{harmonic_type1_probability, SiteKind};
    use crate::rng::derive_rng;

    #[test]
    fn gamma_noise_vanishes_on_single_type_configurations() {
        // one type absent globally: pure heat flow
        let initial = vec![QuadrantPoint::new(2.0, 0.0), QuadrantPoint::new(1.0, 0.0)];
        let params = GammaParams {
            gamma: 50.0,
            h: 1e-3,
            seed: 1,
            replica: 0,
        };
        let run = simulate_mcb_gamma(&initial, &params, 1.0).unwrap();
        let (z1, z2) = run.record.final_totals();
        assert!((z1 - 1.5).abs() < 1e-9);
        assert_eq!(z2, 0.0);
        // heat flow contracts towards the mean
        assert!((run.final_sites[0].x1 - (1.5 + 0.5 * (-1.0f64).exp())).abs() < 1e-3);
    }

    #[test]
    fn gamma_total_mass_is_mean_preserving() {
        let initial = vec![QuadrantPoint::new(1.0, 1.0); 10];
        let replicas = 3000;
        let (mut sum, mut sumsq) = (0.0, 0.0);
        for r in 0..replicas {
            let params = GammaParams {
                gamma: 10.0,
                h: 1e-3,
                seed: 7,
                replica: r,
            };
            let run = simulate_mcb_gamma(&initial, &params, 1.0).unwrap();
            let (z1, _) = run.record.final_totals();
            sum += z1;
            sumsq += z1 * z1;
        }
        let n = replicas as f64;
        let mean = sum / n;
        let se = ((sumsq / n - mean * mean).max(0.0) / n).sqrt();
        assert!(
            (mean - 1.0).abs() <= 3.0 * se + 1e-3,
            "mean {mean}, 3se {}",
            3.0 * se
        );
    }

    #[test]
    fn large_gamma_drives_sites_to_the_boundary() {
        let initial = vec![QuadrantPoint::new(1.0, 1.0); 10];
        let mut interior_fraction = Vec::new();
        for gamma in [10.0, 50.0, 200.0] {
            let mut interior = 0usize;
            let mut total = 0usize;
            for r in 0..40 {
                let params = GammaParams {
                    gamma,
                    h: 1e-4,
                    seed: 21,
                    replica: r,
                };
                let run = simulate_mcb_gamma(&initial, &params, 1.0).unwrap();
                for p in &run.final_sites {
                    total += 1;
                    if p.x1.min(p.x2) > 0.05 {
                        interior += 1;
                    }
                }
            }
            interior_fraction.push(interior as f64 / total as f64);
        }
        assert!(
            interior_fraction[0] >= interior_fraction[2],
            "interior fractions {interior_fraction:?} not decreasing"
        );
        assert!(
            interior_fraction[2] < 0.05,
            "gamma=200 interior fraction {}",
            interior_fraction[2]
        );
    }

    #[test]
    fn limit_diffusion_absorbs_and_preserves_means() {
        // degenerate start: constant path
        let rec =
            simulate_limit_diffusion(DiffusionState::new(0.0, 3.0), 1e-3, 1.0, 3, 0).unwrap();
        for &(z1, z2) in &rec.totals {
            assert_eq!((z1, z2), (0.0, 3.0));
        }

        // driftless: means preserved; mixed moment does not increase
        let replicas = 4000;
        let (mut sum, mut sumsq, mut cross) = (0.0, 0.0, 0.0);
        for r in 0..replicas {
            let rec =
                simulate_limit_diffusion(DiffusionState::new(1.0, 1.0), 1e-3, 1.0, 13, r).unwrap();
            let (z1, z2) = rec.final_totals();
            sum += z1;
            sumsq += z1 * z1;
            cross += z1 * z2;
        }
        let n = replicas as f64;
        let mean = sum / n;
        let se = ((sumsq / n - mean * mean).max(0.0) / n).sqrt();
        assert!((mean - 1.0).abs() <= 3.0 * se + 1e-3, "mean {mean}");
        let mixed = cross / n;
        assert!(
            mixed <= 1.0 + 3.0 * se.max(0.03),
            "mixed moment {mixed} grew beyond its start"
        );
    }

    #[test]
    fn y_theta_fixed_points() {
        let mut rng = derive_rng(5, "y-theta", 0);
        // θ equal to the starting boundary point: frozen for every s
        let y = BoundaryPoint::type1(2.0);
        let theta = QuadrantPoint::new(2.0, 0.0);
        for s in [0.0, 0.5, 3.0] {
            assert_eq!(y_theta_step(y, theta, s, &mut rng), y);
        }
    }

    #[test]
    fn y_theta_long_time_marginal_is_the_harmonic_law() {
        let mut rng = derive_rng(6, "y-theta-longtime", 0);
        let theta = QuadrantPoint::new(1.0, 1.0);
        let n = 100_000;
        let mut type1 = 0usize;
        for _ in 0..n {
            let start = BoundaryPoint::type1(4.0);
            let y = y_theta_step(start, theta, 30.0, &mut rng);
            if y.kind() == SiteKind::Type1 {
                type1 += 1;
            }
        }
        let freq = type1 as f64 / n as f64;
        let want = harmonic_type1_probability(theta);
        let se = 0.5 / (n as f64).sqrt();
        assert!((freq - want).abs() <= 3.0 * se, "{freq} vs {want}");
    }

    #[test]
    fn y_theta_two_half_steps_match_one_step() {
        // semigroup property, sampling-only check
        let mut rng = derive_rng(8, "y-theta-ck", 0);
        let theta = QuadrantPoint::new(0.5, 2.0);
        let start = BoundaryPoint::type2(1.0);
        let n = 60_000;
        let mut one = Vec::with_capacity(n);
        let mut two = Vec::with_capacity(n);
        for _ in 0..n {
            let a = y_theta_step(start, theta, 1.0, &mut rng);
            let (a1, a2) = a.coords();
            one.push(a1 - a2);
            let b = y_theta_step(start, theta, 0.5, &mut rng);
            let b = y_theta_step(b, theta, 0.5, &mut rng);
            let (b1, b2) = b.coords();
            two.push(b1 - b2);
        }
        let d = crate::analysis::ks_distance(&one, &two).unwrap();
        let crit = crate::analysis::ks_critical(0.01, n, n);
        assert!(d < crit, "ks {d} ≥ critical {crit}");
    }

    #[test]
    fn stationary_path_marginals_and_boundary_theta() {
        let mut rng = derive_rng(9, "stationary", 0);
        // θ on the boundary: constant path at θ
        let theta = QuadrantPoint::new(0.0, 1.5);
        let path = sample_stationary_path(theta, &[0.5, 1.0, 2.0], &mut rng).unwrap();
        for p in &path {
            assert_eq!(*p, BoundaryPoint::type2(1.5));
        }

        // marginal type frequencies stay at the stationary value
        let theta = QuadrantPoint::new(1.0, 2.0);
        let want = harmonic_type1_probability(theta);
        let n = 40_000;
        let grid = [0.4, 0.8];
        let mut counts = [0usize; 2];
        let mut agree = 0usize;
        for _ in 0..n {
            let path = sample_stationary_path(theta, &grid, &mut rng).unwrap();
            for (i, p) in path.iter().enumerate() {
                if p.kind() == SiteKind::Type1 {
                    counts[i] += 1;
                }
            }
            if path[0].kind() == path[1].kind() {
                agree += 1;
            }
        }
        let se = 0.5 / (n as f64).sqrt();
        for c in counts {
            let freq = c as f64 / n as f64;
            assert!((freq - want).abs() <= 3.0 * se, "{freq} vs {want}");
        }
        // consecutive points are positively associated in type
        let p1 = counts[0] as f64 / n as f64;
        let baseline = p1 * p1 + (1.0 - p1) * (1.0 - p1);
        let agree_freq = agree as f64 / n as f64;
        assert!(
            agree_freq > baseline + 3.0 * se,
            "agreement {agree_freq} not above product baseline {baseline}"
        );

        assert!(sample_stationary_path(theta, &[1.0, 0.5], &mut rng).is_err());
    }

    #[test]
    fn y_theta_gamma_mean_reverts() {
        let theta = QuadrantPoint::new(1.0, 0.5);
        // axis start equal to θ's projection: drift and noise both vanish
        let mut rng = derive_rng(10, "y-theta-gamma", 0);
        let fixed = QuadrantPoint::new(2.0, 0.0);
        let theta_axis = QuadrantPoint::new(2.0, 0.0);
        let stepped = y_theta_gamma_step(fixed, theta_axis, 5.0, 1e-3, &mut rng).unwrap();
        assert_eq!(stepped, fixed);

        // E[Y_t] follows the linear drift flow
        let replicas = 4000;
        let t = 1.0;
        let h = 1e-3;
        let steps = (t / h) as usize;
        let y0 = QuadrantPoint::new(2.0, 2.0);
        let (mut sum, mut sumsq) = (0.0, 0.0);
        for r in 0..replicas {
            let mut rng = derive_rng(11, "y-theta-gamma-mean", r);
            let mut y = y0;
            for _ in 0..steps {
                y = y_theta_gamma_step(y, theta, 5.0, h, &mut rng).unwrap();
            }
            sum += y.x1;
            sumsq += y.x1 * y.x1;
        }
        let n = replicas as f64;
        let mean = sum / n;
        let se = ((sumsq / n - mean * mean).max(0.0) / n).sqrt();
        let want = (-t).exp() * y0.x1 + (1.0 - (-t).exp()) * theta.x1;
        assert!(
            (mean - want).abs() <= 3.0 * se + 5e-3,
            "mean {mean} vs {want} (3se {})",
            3.0 * se
        );
    }
}
