//! The N-site mean-field system at infinite branching rate: state, rates,
//! the jump map, two numerical schemes and the path simulator.
//!
//! Two independent schemes are provided and cross-validate each other:
//!
//! * `TauLeap` — direct discretization of the jump equation with truncated,
//!   compensated jumps and rates frozen per step;
//! * `HarmonicSplit` — per step, freeze the mean, flow every site towards it
//!   and resample from the quadrant harmonic measure at the flowed point.
//!   Exact one-point transitions at any step size; the default scheme.

use crate::measures::{
    harmonic_sample, Axis, BoundaryPoint, JumpMark, NuSampler, QuadrantPoint, SiteKind,
    TruncationWindow, AXIS2_MASS, AXIS2_MEAN,
};
use crate::record::{JumpEvent, PathRecord, RecordError, RecordMode};
use crate::rng::{derive_rng, StreamRng};
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("site index {0} out of range for {1} sites")]
    BadSite(usize, usize),
    #[error("jump applied to an origin site (its rate is zero; this is a bug)")]
    OriginJump,
    #[error("invalid step size {0}: must be positive")]
    BadStep(f64),
    #[error("invalid horizon {0}: must be nonnegative")]
    BadHorizon(f64),
    #[error("step budget of {0} steps exceeded; partial record flushed")]
    StepBudget(u64),
    #[error(transparent)]
    Record(#[from] RecordError),
}

/// Numerical scheme for the infinite-rate system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    TauLeap,
    #[default]
    HarmonicSplit,
}

/// Step size, truncation, horizon, seeding and recording choices.
#[derive(Debug, Clone)]
pub struct SimParams {
    pub scheme: Scheme,
    /// Step size in model time.
    pub h: f64,
    pub window: TruncationWindow,
    /// Horizon in model time.
    pub horizon: f64,
    pub seed: u64,
    pub replica: u64,
    pub record_mode: RecordMode,
    /// Record every this many steps (1 = every step).
    pub record_stride: usize,
    /// Recompute cached totals from scratch this often.
    pub recompute_period: u64,
    /// Hard cap on steps per run; exceeding it reports partial results.
    pub max_steps: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            scheme: Scheme::HarmonicSplit,
            h: 0.01,
            window: TruncationWindow::default(),
            horizon: 1.0,
            seed: 0,
            replica: 0,
            record_mode: RecordMode::TotalsOnly,
            record_stride: 1,
            recompute_period: 10_000,
            max_steps: u64::MAX,
        }
    }
}

impl SimParams {
    fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.h > 0.0) {
            return Err(DynamicsError::BadStep(self.h));
        }
        if !(self.horizon >= 0.0) {
            return Err(DynamicsError::BadHorizon(self.horizon));
        }
        Ok(())
    }
}

/// Configuration of N boundary sites with cached totals and the model clock.
#[derive(Debug, Clone)]
pub struct SystemState {
    sites: Vec<BoundaryPoint>,
    z1: f64,
    z2: f64,
    clock: f64,
    steps_since_recompute: u64,
}

impl SystemState {
    pub fn new(sites: Vec<BoundaryPoint>) -> Self {
        assert!(!sites.is_empty(), "need at least one site");
        let mut s = Self {
            sites,
            z1: 0.0,
            z2: 0.0,
            clock: 0.0,
            steps_since_recompute: 0,
        };
        s.recompute_totals();
        s
    }

    /// The half/half configuration: first half type 1, second half type 2,
    /// all with the given magnitude.
    pub fn half_half(n: usize, magnitude: f64) -> Self {
        let sites = (0..n)
            .map(|k| {
                if k < n / 2 {
                    BoundaryPoint::type1(magnitude)
                } else {
                    BoundaryPoint::type2(magnitude)
                }
            })
            .collect();
        Self::new(sites)
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn sites(&self) -> &[BoundaryPoint] {
        &self.sites
    }

    pub fn site(&self, k: usize) -> BoundaryPoint {
        self.sites[k]
    }

    /// Cached means (Z¹, Z²).
    pub fn totals(&self) -> (f64, f64) {
        (self.z1, self.z2)
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    /// Recompute the cached means from scratch.
    pub fn recompute_totals(&mut self) {
        let n = self.sites.len() as f64;
        let (mut s1, mut s2) = (0.0, 0.0);
        for p in &self.sites {
            let (x1, x2) = p.coords();
            s1 += x1;
            s2 += x2;
        }
        self.z1 = s1 / n;
        self.z2 = s2 / n;
        self.steps_since_recompute = 0;
    }

    fn replace_site(&mut self, k: usize, new: BoundaryPoint) {
        let n = self.sites.len() as f64;
        let (old1, old2) = self.sites[k].coords();
        let (new1, new2) = new.coords();
        self.z1 += (new1 - old1) / n;
        self.z2 += (new2 - old2) / n;
        self.sites[k] = new;
    }

    /// Largest coordinate present; a diagnostic only, no contract.
    pub fn max_coordinate(&self) -> f64 {
        self.sites.iter().map(|p| p.magnitude()).fold(0.0, f64::max)
    }
}

/// Mean-field drift at site `k`: `(Z¹ - x₁(k), Z² - x₂(k))`.
pub fn mean_field_drift(state: &SystemState, k: usize) -> Result<(f64, f64), DynamicsError> {
    let p = state
        .sites
        .get(k)
        .ok_or(DynamicsError::BadSite(k, state.n_sites()))?;
    let (x1, x2) = p.coords();
    Ok((state.z1 - x1, state.z2 - x2))
}

/// Jump intensity per unit ν-mass at site `k`: for a type-i site of
/// magnitude x this is (opposite-type mean)/x; zero at the origin or when
/// the opposite mean vanishes.
pub fn jump_rate(state: &SystemState, k: usize) -> Result<f64, DynamicsError> {
    let p = state
        .sites
        .get(k)
        .ok_or(DynamicsError::BadSite(k, state.n_sites()))?;
    Ok(match p.kind() {
        SiteKind::Origin => 0.0,
        SiteKind::Type1 => state.z2 / p.magnitude(),
        SiteKind::Type2 => state.z1 / p.magnitude(),
    })
}

/// The jump map: a same-axis mark multiplies the magnitude keeping the
/// type, a cross-axis mark switches the type and multiplies the magnitude.
pub fn apply_jump(x: BoundaryPoint, mark: &JumpMark) -> Result<BoundaryPoint, DynamicsError> {
    let m = x.magnitude();
    match x.kind() {
        SiteKind::Origin => Err(DynamicsError::OriginJump),
        SiteKind::Type1 => Ok(match mark.axis {
            Axis::Axis1 => BoundaryPoint::new(SiteKind::Type1, mark.value * m),
            Axis::Axis2 => BoundaryPoint::new(SiteKind::Type2, mark.value * m),
        }),
        SiteKind::Type2 => Ok(match mark.axis {
            Axis::Axis1 => BoundaryPoint::new(SiteKind::Type2, mark.value * m),
            Axis::Axis2 => BoundaryPoint::new(SiteKind::Type1, mark.value * m),
        }),
    }
}

/// Displacement vector the mark induces on the site, `J(y, x)`.
fn jump_displacement(x: BoundaryPoint, mark: &JumpMark) -> (f64, f64) {
    let m = x.magnitude();
    match (x.kind(), mark.axis) {
        (SiteKind::Type1, Axis::Axis1) => ((mark.value - 1.0) * m, 0.0),
        (SiteKind::Type1, Axis::Axis2) => (-m, mark.value * m),
        (SiteKind::Type2, Axis::Axis1) => (0.0, (mark.value - 1.0) * m),
        (SiteKind::Type2, Axis::Axis2) => (mark.value * m, -m),
        (SiteKind::Origin, _) => (0.0, 0.0),
    }
}

/// Shared per-run context for the tau-leap stepper.
struct TauLeapCtx {
    sampler: NuSampler,
    total_mass: f64,
    /// Signed first moment of kept axis-1 marks, `∫_{|y₁-1|≥δ}(y₁-1)ν(dy)`.
    kept_axis1_mean: f64,
}

impl TauLeapCtx {
    fn new(window: TruncationWindow) -> Self {
        let sampler = NuSampler::new(window);
        let total_mass = sampler.total_mass();
        Self {
            sampler,
            total_mass,
            kept_axis1_mean: crate::measures::nu_restricted_mean_axis1(window),
        }
    }

    /// Compensator of the *simulated* jump set per unit rate, as a
    /// displacement vector for the given (frozen) site.
    fn compensator(&self, site: BoundaryPoint) -> (f64, f64) {
        let m = site.magnitude();
        // same-axis marks keep the type: signed mean of kept (y-1) times m;
        // cross marks switch: mass 2/π leaves, mean 1 arrives on the other axis
        let along = m * (self.kept_axis1_mean - AXIS2_MASS);
        let across = m * AXIS2_MEAN;
        match site.kind() {
            SiteKind::Type1 => (along, across),
            SiteKind::Type2 => (across, along),
            SiteKind::Origin => (0.0, 0.0),
        }
    }
}

/// Project a raw post-step point back to the boundary: clamp negatives to
/// zero, then, if both coordinates are positive, resample from the harmonic
/// measure at that interior point (the infinite-rate exit mechanism).
fn project_to_boundary<R: Rng + ?Sized>(x1: f64, x2: f64, rng: &mut R) -> BoundaryPoint {
    let x1 = x1.max(0.0);
    let x2 = x2.max(0.0);
    if x1 > 0.0 && x2 > 0.0 {
        harmonic_sample(QuadrantPoint::new(x1, x2), rng)
    } else if x1 > 0.0 {
        BoundaryPoint::type1(x1)
    } else if x2 > 0.0 {
        BoundaryPoint::type2(x2)
    } else {
        BoundaryPoint::origin()
    }
}

/// One tau-leap step of size `params.h`: Poisson numbers of truncated jumps
/// at rates frozen at step start, explicit drift, subtraction of the
/// simulated jumps' compensator, then projection to the boundary.
pub fn step_tau_leap<R: Rng + ?Sized>(
    state: &mut SystemState,
    params: &SimParams,
    rng: &mut R,
    jump_log: Option<&mut Vec<JumpEvent>>,
) -> Result<(), DynamicsError> {
    params.validate()?;
    let ctx = TauLeapCtx::new(params.window);
    step_tau_leap_ctx(state, params, &ctx, rng, jump_log)
}

/// Above this expected per-step jump count the site relaxes within the
/// step; its one-point law at frozen mean is then the exact harmonic
/// transition, which replaces enumerating the jumps.
const MAX_EXPECTED_JUMPS: f64 = 256.0;

fn step_tau_leap_ctx<R: Rng + ?Sized>(
    state: &mut SystemState,
    params: &SimParams,
    ctx: &TauLeapCtx,
    rng: &mut R,
    mut jump_log: Option<&mut Vec<JumpEvent>>,
) -> Result<(), DynamicsError> {
    let h = params.h;
    let (z1, z2) = state.totals();
    let n = state.n_sites();
    for k in 0..n {
        let frozen = state.site(k);
        if frozen.is_origin() {
            continue;
        }
        let rate = match frozen.kind() {
            SiteKind::Type1 => z2 / frozen.magnitude(),
            SiteKind::Type2 => z1 / frozen.magnitude(),
            SiteKind::Origin => 0.0,
        };
        let mut current = frozen;
        if rate > 0.0 {
            let lambda = h * rate * ctx.total_mass;
            if lambda > MAX_EXPECTED_JUMPS {
                let (fx1, fx2) = frozen.coords();
                let decay = (-h).exp();
                let pull = 1.0 - decay;
                let target =
                    QuadrantPoint::new(decay * fx1 + pull * z1, decay * fx2 + pull * z2);
                state.replace_site(k, harmonic_sample(target, rng));
                continue;
            }
            let n_jumps = Poisson::new(lambda)
                .map(|p| p.sample(rng) as u64)
                .unwrap_or(0);
            for _ in 0..n_jumps {
                if current.is_origin() {
                    break;
                }
                let mark = ctx.sampler.sample(rng);
                let displacement = jump_displacement(current, &mark);
                current = apply_jump(current, &mark)?;
                if let Some(log) = jump_log.as_mut() {
                    log.push(JumpEvent {
                        time: state.clock + h,
                        site: k,
                        mark,
                        displacement,
                    });
                }
            }
        }
        let (mut x1, mut x2) = current.coords();
        // frozen drift and frozen compensator of the simulated jump set
        let (fx1, fx2) = frozen.coords();
        x1 += h * (z1 - fx1);
        x2 += h * (z2 - fx2);
        let (c1, c2) = ctx.compensator(frozen);
        x1 -= h * rate * c1;
        x2 -= h * rate * c2;
        let projected = project_to_boundary(x1, x2, rng);
        state.replace_site(k, projected);
    }
    finish_step(state, params, h);
    Ok(())
}

/// One splitting step: freeze the mean, flow each site towards it for time
/// `h` and draw the new site from the harmonic measure at the flowed point.
pub fn step_harmonic_split<R: Rng + ?Sized>(
    state: &mut SystemState,
    params: &SimParams,
    rng: &mut R,
) -> Result<(), DynamicsError> {
    params.validate()?;
    let h = params.h;
    let (z1, z2) = state.totals();
    let decay = (-h).exp();
    let pull = 1.0 - decay;
    let n = state.n_sites();
    for k in 0..n {
        let (x1, x2) = state.sites[k].coords();
        let target = QuadrantPoint::new(decay * x1 + pull * z1, decay * x2 + pull * z2);
        let fresh = harmonic_sample(target, rng);
        state.replace_site(k, fresh);
    }
    finish_step(state, params, h);
    Ok(())
}

fn finish_step(state: &mut SystemState, params: &SimParams, h: f64) {
    state.clock += h;
    state.steps_since_recompute += 1;
    if state.steps_since_recompute >= params.recompute_period {
        state.recompute_totals();
    }
}

/// Iterate the chosen stepper to the horizon, recording per `record_mode`.
/// Deterministic given `(seed, replica, scheme, h, δ, N)`.
pub fn simulate(initial: &SystemState, params: &SimParams) -> Result<PathRecord, DynamicsError> {
    params.validate()?;
    let mut rng = derive_rng(params.seed, "dynamics", params.replica);
    simulate_with_rng(initial, params, &mut rng)
}

/// As [`simulate`] but with a caller-provided stream (suites that chain
/// several phases on one replica use this).
pub fn simulate_with_rng(
    initial: &SystemState,
    params: &SimParams,
    rng: &mut StreamRng,
) -> Result<PathRecord, DynamicsError> {
    params.validate()?;
    let mut state = initial.clone();
    let mut record = PathRecord {
        replica: params.replica,
        n_sites: state.n_sites(),
        ..Default::default()
    };
    let mut jumps = match params.record_mode {
        RecordMode::JumpLog => Some(Vec::new()),
        _ => None,
    };
    let mut snapshots = match params.record_mode {
        RecordMode::FullConfig => Some(vec![state.sites().to_vec()]),
        _ => None,
    };
    record.push(0.0, state.totals());

    let n_steps = (params.horizon / params.h).round() as u64;
    let tau_ctx = match params.scheme {
        Scheme::TauLeap => Some(TauLeapCtx::new(params.window)),
        Scheme::HarmonicSplit => None,
    };
    let budget_hit = n_steps > params.max_steps;
    let run_steps = n_steps.min(params.max_steps);
    for step in 1..=run_steps {
        match params.scheme {
            Scheme::TauLeap => {
                let ctx = tau_ctx.as_ref().expect("ctx built for tau-leap");
                step_tau_leap_ctx(&mut state, params, ctx, rng, jumps.as_mut())?;
            }
            Scheme::HarmonicSplit => step_harmonic_split(&mut state, params, rng)?,
        }
        if step % params.record_stride as u64 == 0 || step == run_steps {
            record.push(step as f64 * params.h, state.totals());
            if let Some(s) = snapshots.as_mut() {
                s.push(state.sites().to_vec());
            }
        }
    }
    record.sites = snapshots;
    record.jumps = jumps;
    if budget_hit {
        // partial results are in the record; the caller decides what to keep
        return Err(DynamicsError::StepBudget(params.max_steps));
    }
    Ok(record)
}

/// Run the stepper and return the final state instead of a record.
pub fn evolve_state(
    initial: &SystemState,
    params: &SimParams,
    rng: &mut StreamRng,
) -> Result<SystemState, DynamicsError> {
    params.validate()?;
    let mut state = initial.clone();
    let n_steps = (params.horizon / params.h).round() as u64;
    let tau_ctx = match params.scheme {
        Scheme::TauLeap => Some(TauLeapCtx::new(params.window)),
        Scheme::HarmonicSplit => None,
    };
    for _ in 0..n_steps.min(params.max_steps) {
        match params.scheme {
            Scheme::TauLeap => {
                let ctx = tau_ctx.as_ref().expect("ctx built for tau-leap");
                step_tau_leap_ctx(&mut state, params, ctx, rng, None)?;
            }
            Scheme::HarmonicSplit => step_harmonic_split(&mut state, params, rng)?,
        }
    }
    Ok(state)
}

/// Deterministic mean-field smoothing `(e^{tA}x)(k) = e^{-t}x(k) +
/// (1-e^{-t})·mean(x)`, exact.
pub fn heat_flow(x0: &[QuadrantPoint], t: f64) -> Vec<QuadrantPoint> {
    assert!(t >= 0.0, "time must be nonnegative");
    let n = x0.len() as f64;
    let (mut m1, mut m2) = (0.0, 0.0);
    for p in x0 {
        m1 += p.x1;
        m2 += p.x2;
    }
    m1 /= n;
    m2 /= n;
    let decay = (-t).exp();
    let pull = 1.0 - decay;
    x0.iter()
        .map(|p| QuadrantPoint::new(decay * p.x1 + pull * m1, decay * p.x2 + pull * m2))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn assert_in_boundary(state: &SystemState) {
        for p in state.sites() {
            let (x1, x2) = p.coords();
            assert!(x1 == 0.0 || x2 == 0.0, "site off the boundary: ({x1},{x2})");
        }
    }

    #[test]
    fn drift_examples() {
        let s = SystemState::new(vec![BoundaryPoint::type1(1.0)]);
        assert_eq!(mean_field_drift(&s, 0).unwrap(), (0.0, 0.0));

        let s = SystemState::new(vec![BoundaryPoint::type1(1.0); 5]);
        for k in 0..5 {
            assert_eq!(mean_field_drift(&s, k).unwrap(), (0.0, 0.0));
        }

        // site (type 2, 2) with means (0.5, 0.5)
        let s = SystemState::new(vec![
            BoundaryPoint::type1(1.5),
            BoundaryPoint::type2(2.0),
            BoundaryPoint::type2(1.0),
            BoundaryPoint::origin(),
            BoundaryPoint::type1(0.5),
            BoundaryPoint::type2(0.0),
        ]);
        assert_eq!(s.totals(), (1.0 / 3.0, 0.5));
        let s = SystemState::new(vec![
            BoundaryPoint::type1(1.0),
            BoundaryPoint::type2(2.0),
            BoundaryPoint::type2(0.0),
            BoundaryPoint::type1(1.0),
        ]);
        assert_eq!(s.totals(), (0.5, 0.5));
        let d = mean_field_drift(&s, 1).unwrap();
        assert_eq!(d, (0.5, -1.5));

        assert!(mean_field_drift(&s, 9).is_err());
    }

    #[test]
    fn rate_examples() {
        // all sites the same type: opposite mean vanishes
        let s = SystemState::new(vec![BoundaryPoint::type1(2.0), BoundaryPoint::type1(1.0)]);
        assert_eq!(jump_rate(&s, 0).unwrap(), 0.0);

        // type-1 site of magnitude 2 with z2 = 1
        let s = SystemState::new(vec![BoundaryPoint::type1(2.0), BoundaryPoint::type2(2.0)]);
        assert_eq!(s.totals(), (1.0, 1.0));
        assert_eq!(jump_rate(&s, 0).unwrap(), 0.5);

        // single site: no opposite mass
        let s = SystemState::new(vec![BoundaryPoint::type1(3.0)]);
        assert_eq!(jump_rate(&s, 0).unwrap(), 0.0);

        // origin site
        let s = SystemState::new(vec![BoundaryPoint::origin(), BoundaryPoint::type2(1.0)]);
        assert_eq!(jump_rate(&s, 0).unwrap(), 0.0);
    }

    #[test]
    fn jump_map_cases() {
        let x = BoundaryPoint::type1(2.0);
        let y = apply_jump(
            x,
            &JumpMark {
                axis: Axis::Axis1,
                value: 1.5,
            },
        )
        .unwrap();
        assert_eq!(y, BoundaryPoint::type1(3.0));

        let y = apply_jump(
            x,
            &JumpMark {
                axis: Axis::Axis2,
                value: 0.25,
            },
        )
        .unwrap();
        assert_eq!(y, BoundaryPoint::type2(0.5));

        let y = apply_jump(
            BoundaryPoint::type2(4.0),
            &JumpMark {
                axis: Axis::Axis2,
                value: 0.5,
            },
        )
        .unwrap();
        assert_eq!(y, BoundaryPoint::type1(2.0));

        // unit same-axis multiplier is the identity
        for x in [BoundaryPoint::type1(0.7), BoundaryPoint::type2(3.0)] {
            let y = apply_jump(
                x,
                &JumpMark {
                    axis: Axis::Axis1,
                    value: 1.0,
                },
            )
            .unwrap();
            assert_eq!(y, x);
        }

        assert!(matches!(
            apply_jump(
                BoundaryPoint::origin(),
                &JumpMark {
                    axis: Axis::Axis1,
                    value: 2.0
                }
            ),
            Err(DynamicsError::OriginJump)
        ));
    }

    #[test]
    fn single_site_is_frozen_under_both_schemes() {
        for scheme in [Scheme::TauLeap, Scheme::HarmonicSplit] {
            let params = SimParams {
                scheme,
                horizon: 2.0,
                seed: 5,
                ..Default::default()
            };
            let initial = SystemState::new(vec![BoundaryPoint::type1(1.5)]);
            let record = simulate(&initial, &params).unwrap();
            for &(z1, z2) in &record.totals {
                assert_eq!((z1, z2), (1.5, 0.0));
            }
        }
    }

    #[test]
    fn zero_horizon_records_initial_state_only() {
        let params = SimParams {
            horizon: 0.0,
            ..Default::default()
        };
        let initial = SystemState::half_half(10, 1.0);
        let record = simulate(&initial, &params).unwrap();
        assert_eq!(record.len(), 1);
        assert_eq!(record.totals[0], (0.5, 0.5));
    }

    #[test]
    fn single_type_configuration_is_pure_heat_flow() {
        // all type 1: no jumps; after time t site k is e^{-t}x(k)+(1-e^{-t})z̄
        let sites = vec![
            BoundaryPoint::type1(2.0),
            BoundaryPoint::type1(1.0),
            BoundaryPoint::type1(0.5),
            BoundaryPoint::type1(0.0),
        ];
        let x0: Vec<QuadrantPoint> = sites.iter().map(|&p| p.into()).collect();
        let expected = heat_flow(&x0, 1.0);

        for (scheme, tol) in [(Scheme::HarmonicSplit, 1e-9), (Scheme::TauLeap, 2e-2)] {
            let params = SimParams {
                scheme,
                horizon: 1.0,
                seed: 11,
                record_mode: RecordMode::FullConfig,
                ..Default::default()
            };
            let initial = SystemState::new(sites.clone());
            let record = simulate(&initial, &params).unwrap();
            let last = record.sites.as_ref().unwrap().last().unwrap();
            for (got, want) in last.iter().zip(expected.iter()) {
                let (g1, g2) = got.coords();
                assert!(
                    (g1 - want.x1).abs() <= tol && (g2 - want.x2).abs() <= tol,
                    "{scheme:?}: site ({g1},{g2}) vs ({},{})",
                    want.x1,
                    want.x2
                );
            }
        }
    }

    #[test]
    fn heat_flow_examples() {
        let x0 = vec![QuadrantPoint::new(1.0, 0.0), QuadrantPoint::new(0.0, 1.0)];
        let out = heat_flow(&x0, 0.0);
        assert_eq!(out, x0);

        let out = heat_flow(&x0, 2.0f64.ln());
        assert_abs_diff_eq!(out[0].x1, 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(out[0].x2, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(out[1].x1, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(out[1].x2, 0.75, epsilon = 1e-12);

        let out = heat_flow(&x0, 700.0);
        assert_abs_diff_eq!(out[0].x1, 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(out[1].x2, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn states_stay_on_the_boundary_and_totals_stay_consistent() {
        for scheme in [Scheme::TauLeap, Scheme::HarmonicSplit] {
            let params = SimParams {
                scheme,
                horizon: 0.5,
                seed: 17,
                recompute_period: 7,
                ..Default::default()
            };
            let initial = SystemState::half_half(16, 1.0);
            let mut rng = derive_rng(params.seed, "boundary-test", 0);
            let mut state = initial.clone();
            for _ in 0..50 {
                match scheme {
                    Scheme::TauLeap => step_tau_leap(&mut state, &params, &mut rng, None).unwrap(),
                    Scheme::HarmonicSplit => {
                        step_harmonic_split(&mut state, &params, &mut rng).unwrap()
                    }
                }
                assert_in_boundary(&state);
                let (c1, c2) = state.totals();
                let mut fresh = state.clone();
                fresh.recompute_totals();
                let (e1, e2) = fresh.totals();
                assert!(
                    (c1 - e1).abs() <= 1e-9 * e1.max(1.0) && (c2 - e2).abs() <= 1e-9 * e2.max(1.0),
                    "cached totals drifted: ({c1},{c2}) vs ({e1},{e2})"
                );
            }
        }
    }

    #[test]
    fn mean_is_conserved_within_monte_carlo_error() {
        // totals are mean-preserving over replicas for each scheme
        for scheme in [Scheme::HarmonicSplit, Scheme::TauLeap] {
            let replicas = 2000u64;
            let (mut sum, mut sumsq) = (0.0, 0.0);
            for r in 0..replicas {
                let params = SimParams {
                    scheme,
                    horizon: 0.5,
                    seed: 23,
                    replica: r,
                    ..Default::default()
                };
                let record = simulate(&SystemState::half_half(8, 1.0), &params).unwrap();
                let (z1, _) = record.final_totals();
                sum += z1;
                sumsq += z1 * z1;
            }
            let n = replicas as f64;
            let mean = sum / n;
            let se = ((sumsq / n - mean * mean).max(0.0) / n).sqrt();
            assert!(
                (mean - 0.5).abs() <= 3.0 * se + 1e-4,
                "{scheme:?}: mean {mean} (3se = {})",
                3.0 * se
            );
        }
    }

    #[test]
    fn simulate_is_deterministic() {
        let params = SimParams {
            horizon: 0.3,
            seed: 99,
            replica: 4,
            ..Default::default()
        };
        let initial = SystemState::half_half(6, 1.0);
        let a = simulate(&initial, &params).unwrap();
        let b = simulate(&initial, &params).unwrap();
        assert_eq!(a.totals, b.totals);
    }

    #[test]
    fn step_budget_reports_partial_results() {
        let params = SimParams {
            horizon: 1.0,
            max_steps: 10,
            ..Default::default()
        };
        let initial = SystemState::half_half(4, 1.0);
        assert!(matches!(
            simulate(&initial, &params),
            Err(DynamicsError::StepBudget(10))
        ));
    }

    proptest! {
        #[test]
        fn jump_map_keeps_the_state_in_e(mag in 0.01f64..100.0, v in 0.0f64..20.0, axis_pick in 0..2) {
            let axis = if axis_pick == 0 { Axis::Axis1 } else { Axis::Axis2 };
            for x in [BoundaryPoint::type1(mag), BoundaryPoint::type2(mag)] {
                let y = apply_jump(x, &JumpMark { axis, value: v }).unwrap();
                let (y1, y2) = y.coords();
                prop_assert!(y1 == 0.0 || y2 == 0.0);
                prop_assert!(y1 >= 0.0 && y2 >= 0.0);
            }
        }
    }
}
