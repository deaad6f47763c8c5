//! Convergence suites: finite-rate → infinite-rate at fixed time, the
//! rescaled total-mass diffusion limit, and the per-site equilibration of
//! the transform probes. All acceptance is trend- or bound-based; exact
//! limiting values are not reachable at desk scale and the reports say so
//! through their thresholds.

use crate::analysis::{jump_census, ks_distance, mean_and_se, realized_qv, TestReport};
use crate::duality::lozenge_exp;
use crate::dynamics::{evolve_state, Scheme, SimParams, SystemState};
use crate::measures::{BoundaryPoint, QuadrantPoint, TruncationWindow};
use crate::record::{PathRecord, RecordMode};
use crate::reference::{
    simulate_limit_diffusion_with_rng, simulate_mcb_gamma_with_rng, DiffusionState, GammaParams,
};
use crate::rng::derive_rng;
use num_complex::Complex64;
use rayon::prelude::*;

/// Half/half unit-mass start used by every suite.
const START_MASS: f64 = 1.0;

fn half_half_points(n: usize) -> Vec<QuadrantPoint> {
    (0..n)
        .map(|k| {
            if k < n / 2 {
                QuadrantPoint::new(START_MASS, 0.0)
            } else {
                QuadrantPoint::new(0.0, START_MASS)
            }
        })
        .collect()
}

/// Final totals of `replicas` infinite-rate runs to model horizon.
fn mcb_final_totals(
    n: usize,
    horizon_model: f64,
    seed: u64,
    purpose: &str,
    replicas: u64,
) -> Vec<(f64, f64)> {
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let params = SimParams {
                horizon: horizon_model,
                seed,
                replica: r,
                ..Default::default()
            };
            let mut rng = derive_rng(seed, purpose, r);
            evolve_state(&SystemState::half_half(n, START_MASS), &params, &mut rng)
                .expect("valid parameters")
                .totals()
        })
        .collect()
}

fn ks_pair(a: &[(f64, f64)], b: &[(f64, f64)]) -> (f64, f64) {
    let a1: Vec<f64> = a.iter().map(|p| p.0).collect();
    let a2: Vec<f64> = a.iter().map(|p| p.1).collect();
    let b1: Vec<f64> = b.iter().map(|p| p.0).collect();
    let b2: Vec<f64> = b.iter().map(|p| p.1).collect();
    (
        ks_distance(&a1, &b1).expect("nonempty samples"),
        ks_distance(&a2, &b2).expect("nonempty samples"),
    )
}

fn mean_agreement_report(
    name: String,
    finals: &[(f64, f64)],
    target: (f64, f64),
    seed: u64,
) -> TestReport {
    let z1: Vec<f64> = finals.iter().map(|p| p.0).collect();
    let z2: Vec<f64> = finals.iter().map(|p| p.1).collect();
    let (m1, s1) = mean_and_se(&z1);
    let (m2, s2) = mean_and_se(&z2);
    let stat = (m1 - target.0).abs().max((m2 - target.1).abs());
    TestReport::new(name, stat, 3.0 * s1.max(s2), finals.len() as u64, seed)
}

fn trend_report(name: String, values: &[f64], slack: f64, n: u64, seed: u64) -> TestReport {
    let stat = values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    TestReport::new(name, stat, slack, n, seed)
}

/// Finite-rate versus infinite-rate at a fixed unrescaled time: the
/// Kolmogorov–Smirnov distance of the total-mass marginals must fall along
/// the branching-rate grid.
pub fn theorem0_suite(
    gamma_grid: &[f64],
    n: usize,
    t: f64,
    replicas: u64,
    seed: u64,
) -> Vec<TestReport> {
    assert!(
        gamma_grid.windows(2).all(|w| w[0] < w[1]),
        "rate grid must increase"
    );
    let mut reports = Vec::new();
    let infinite = mcb_final_totals(n, t, seed, "theorem0-infinite", replicas);
    let initial = half_half_points(n);
    let mut ks_values = Vec::new();
    for &gamma in gamma_grid {
        let h = (0.02 / gamma).min(1e-3);
        let purpose = format!("theorem0-gamma-{gamma}");
        let finals: Vec<(f64, f64)> = (0..replicas)
            .into_par_iter()
            .map(|r| {
                let params = GammaParams {
                    gamma,
                    h,
                    seed,
                    replica: r,
                };
                let mut rng = derive_rng(seed, &purpose, r);
                simulate_mcb_gamma_with_rng(&initial, &params, t, &mut rng)
                    .expect("valid parameters")
                    .record
                    .final_totals()
            })
            .collect();
        let (k1, k2) = ks_pair(&finals, &infinite);
        let ks = k1.max(k2);
        ks_values.push(ks);
        reports.push(TestReport::new(
            format!("theorem0/ks(gamma={gamma})"),
            ks,
            1.0,
            replicas,
            seed,
        ));
        reports.push(mean_agreement_report(
            format!("theorem0/mean-agreement(gamma={gamma})"),
            &finals,
            (0.5 * START_MASS, 0.5 * START_MASS),
            seed,
        ));
    }
    reports.push(trend_report(
        "theorem0/ks-trend".into(),
        &ks_values,
        0.0,
        replicas,
        seed,
    ));
    reports.push(TestReport::new(
        "theorem0/ks-final",
        *ks_values.last().expect("nonempty grid"),
        0.08,
        replicas,
        seed,
    ));
    reports
}

/// Configuration for the total-mass limit suite.
#[derive(Debug, Clone)]
pub struct Theorem1Config {
    pub n_grid: Vec<usize>,
    /// Rescaled horizon.
    pub t: f64,
    pub replicas: u64,
    pub qv_replicas: u64,
    pub census_replicas: u64,
    pub census_eps: f64,
    pub census_delta: f64,
    pub seed: u64,
}

impl Default for Theorem1Config {
    fn default() -> Self {
        Self {
            n_grid: vec![32, 128, 512],
            t: 1.0,
            replicas: 5000,
            qv_replicas: 600,
            census_replicas: 384,
            census_eps: 0.25,
            census_delta: 0.05,
            seed: 0,
        }
    }
}

/// Rescaled total masses versus the limiting diffusion: falling KS
/// distances along the system-size grid, the realized square-variation rate
/// near 8/π at the largest size, and the large-jump census bound at every
/// size.
pub fn theorem1_suite(n_grid: &[usize], t: f64, replicas: u64, seed: u64) -> Vec<TestReport> {
    theorem1_suite_with(&Theorem1Config {
        n_grid: n_grid.to_vec(),
        t,
        replicas,
        seed,
        ..Default::default()
    })
}

pub fn theorem1_suite_with(cfg: &Theorem1Config) -> Vec<TestReport> {
    assert!(
        cfg.n_grid.windows(2).all(|w| w[0] < w[1]) && cfg.n_grid.iter().all(|&n| n >= 3),
        "system-size grid must increase and sizes must be at least 3"
    );
    let mut reports = Vec::new();

    // limiting diffusion reference at the rescaled horizon
    let z0 = DiffusionState::new(0.5 * START_MASS, 0.5 * START_MASS);
    let diffusion: Vec<(f64, f64)> = (0..cfg.replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = derive_rng(cfg.seed, "theorem1-diffusion", r);
            simulate_limit_diffusion_with_rng(z0, 1e-3, cfg.t, r, &mut rng)
                .expect("valid parameters")
                .final_totals()
        })
        .collect();

    let mut ks_values = Vec::new();
    for &n in &cfg.n_grid {
        let beta = PathRecord::time_scale(n).expect("n >= 3");
        let finals = mcb_final_totals(n, cfg.t * beta, cfg.seed, "theorem1-mcb", cfg.replicas);
        let (k1, k2) = ks_pair(&finals, &diffusion);
        let ks = k1.max(k2);
        ks_values.push(ks);
        reports.push(TestReport::new(
            format!("theorem1/ks(n={n})"),
            ks,
            1.0,
            cfg.replicas,
            cfg.seed,
        ));
        reports.push(mean_agreement_report(
            format!("theorem1/mean-agreement(n={n})"),
            &finals,
            (0.5 * START_MASS, 0.5 * START_MASS),
            cfg.seed,
        ));
    }
    reports.push(trend_report(
        "theorem1/ks-trend".into(),
        &ks_values,
        0.0,
        cfg.replicas,
        cfg.seed,
    ));

    // realized square variation at the largest size, sampled on a grid of
    // roughly 0.01 rescaled time per increment
    let n_big = *cfg.n_grid.last().expect("nonempty grid");
    let beta = PathRecord::time_scale(n_big).expect("n >= 3");
    let stride = beta.round().max(1.0) as usize;
    let sums: Vec<(f64, f64)> = (0..cfg.qv_replicas)
        .into_par_iter()
        .map(|r| {
            let params = SimParams {
                horizon: cfg.t * beta,
                seed: cfg.seed,
                replica: r,
                record_stride: stride,
                ..Default::default()
            };
            let initial = SystemState::half_half(n_big, START_MASS);
            let mut rng = derive_rng(cfg.seed, "theorem1-qv", r);
            let record = crate::dynamics::simulate_with_rng(&initial, &params, &mut rng)
                .expect("valid parameters")
                .rescaled_view(n_big)
                .expect("n >= 3");
            let qv = realized_qv(&record).expect("enough samples");
            (
                qv.qv1.last().unwrap() + qv.qv2.last().unwrap(),
                2.0 * qv.companion.last().unwrap(),
            )
        })
        .collect();
    let qv_total: f64 = sums.iter().map(|s| s.0).sum();
    let companion_total: f64 = sums.iter().map(|s| s.1).sum();
    let ratio = qv_total / companion_total;
    reports.push(TestReport::new(
        format!("theorem1/qv-rate(n={n_big})"),
        (ratio - 1.0).abs(),
        0.25,
        cfg.qv_replicas,
        cfg.seed,
    ));

    // large-jump census bound at every size
    for &n in &cfg.n_grid {
        let beta = PathRecord::time_scale(n).expect("n >= 3");
        let counts: Vec<(f64, f64)> = (0..cfg.census_replicas)
            .into_par_iter()
            .map(|r| {
                let params = SimParams {
                    scheme: Scheme::TauLeap,
                    window: TruncationWindow::new(cfg.census_delta).expect("valid width"),
                    horizon: cfg.t * beta,
                    seed: cfg.seed,
                    replica: r,
                    record_mode: RecordMode::JumpLog,
                    record_stride: usize::MAX,
                    ..Default::default()
                };
                let initial = SystemState::half_half(n, START_MASS);
                let mut rng = derive_rng(cfg.seed, "theorem1-census", r);
                let record = crate::dynamics::simulate_with_rng(&initial, &params, &mut rng)
                    .expect("valid parameters");
                let census =
                    jump_census(&record, cfg.census_eps, n, cfg.t).expect("jump log present");
                (census.count as f64, census.bound)
            })
            .collect();
        let count_samples: Vec<f64> = counts.iter().map(|c| c.0).collect();
        let (mean_count, se) = mean_and_se(&count_samples);
        let bound = counts[0].1;
        reports.push(TestReport::new(
            format!("theorem1/jump-census(n={n})"),
            mean_count,
            bound + 3.0 * se,
            cfg.census_replicas,
            cfg.seed,
        ));
    }
    reports
}

/// One transform probe: a quadrant probe for the totals and boundary probes
/// for the tracked sites.
#[derive(Debug, Clone)]
pub struct TransformProbe {
    pub name: String,
    pub y0: QuadrantPoint,
    pub site_probes: Vec<BoundaryPoint>,
}

/// The documented probe combinations for the per-site equilibration suite.
pub fn theorem2_default_probes() -> Vec<TransformProbe> {
    vec![
        TransformProbe {
            name: "q(1,1)-b(0.25,0.25)".into(),
            y0: QuadrantPoint::new(1.0, 1.0),
            site_probes: vec![BoundaryPoint::type1(0.25), BoundaryPoint::type2(0.25)],
        },
        TransformProbe {
            name: "q(1,1)-b(1,1)".into(),
            y0: QuadrantPoint::new(1.0, 1.0),
            site_probes: vec![BoundaryPoint::type1(1.0), BoundaryPoint::type2(1.0)],
        },
        TransformProbe {
            name: "q(0.5,2)-b(1,0.25)".into(),
            y0: QuadrantPoint::new(0.5, 2.0),
            site_probes: vec![BoundaryPoint::type2(1.0), BoundaryPoint::type1(0.25)],
        },
        TransformProbe {
            name: "q(1,0)-b(4,0.25)".into(),
            y0: QuadrantPoint::new(1.0, 0.0),
            site_probes: vec![BoundaryPoint::type1(4.0), BoundaryPoint::type2(0.25)],
        },
    ]
}

/// Configuration for the per-site equilibration suite.
#[derive(Debug, Clone)]
pub struct Theorem2Config {
    pub n_grid: Vec<usize>,
    /// Rescaled horizon.
    pub t: f64,
    pub replicas: u64,
    pub probes: Vec<TransformProbe>,
    /// Model-time gap of the two-time probe.
    pub m2_window: f64,
    /// Exact harmonic draws per site for the transform side.
    pub m2_inner: usize,
    pub seed: u64,
}

impl Default for Theorem2Config {
    fn default() -> Self {
        Self {
            n_grid: vec![32, 128, 512],
            t: 1.0,
            replicas: 5000,
            probes: theorem2_default_probes(),
            m2_window: 1.0,
            m2_inner: 64,
            seed: 0,
        }
    }
}

struct Theorem2Sample {
    totals: (f64, f64),
    site1: BoundaryPoint,
    site2: BoundaryPoint,
    site1_late: BoundaryPoint,
    site2_late: BoundaryPoint,
    /// Inner harmonic means for the two-time transform side, one per site.
    inner: [Complex64; 2],
}

/// Per-site equilibration: transform probes of the joint (totals, sites)
/// law against the mixture target built from the limiting diffusion, with a
/// falling trend in the system size; plus a two-time probe at the largest
/// size matched against the iterated-transform structure.
pub fn theorem2_suite(n_grid: &[usize], t: f64, replicas: u64, seed: u64) -> Vec<TestReport> {
    theorem2_suite_with(&Theorem2Config {
        n_grid: n_grid.to_vec(),
        t,
        replicas,
        seed,
        ..Default::default()
    })
}

pub fn theorem2_suite_with(cfg: &Theorem2Config) -> Vec<TestReport> {
    assert!(
        cfg.n_grid.windows(2).all(|w| w[0] < w[1]) && cfg.n_grid.iter().all(|&n| n >= 4),
        "system-size grid must increase and sizes must be at least 4"
    );
    let mut reports = Vec::new();

    // mixture target from the limiting diffusion
    let z0 = DiffusionState::new(0.5 * START_MASS, 0.5 * START_MASS);
    let target_finals: Vec<(f64, f64)> = (0..cfg.replicas.max(20_000))
        .into_par_iter()
        .map(|r| {
            let mut rng = derive_rng(cfg.seed, "theorem2-target", r);
            simulate_limit_diffusion_with_rng(z0, 1e-3, cfg.t, r, &mut rng)
                .expect("valid parameters")
                .final_totals()
        })
        .collect();

    // two-time probe parameters (first probe, first two site probes)
    let m2_probe = &cfg.probes[0];
    let m2_decay = (-cfg.m2_window).exp();

    let mut per_probe_diffs: Vec<Vec<(f64, f64)>> = vec![Vec::new(); cfg.probes.len()];
    let mut m2_report: Option<TestReport> = None;

    for (gi, &n) in cfg.n_grid.iter().enumerate() {
        let beta = PathRecord::time_scale(n).expect("n >= 3");
        let is_largest = gi + 1 == cfg.n_grid.len();
        let k2 = n / 2;
        let samples: Vec<Theorem2Sample> = (0..cfg.replicas)
            .into_par_iter()
            .map(|r| {
                let params = SimParams {
                    horizon: cfg.t * beta,
                    seed: cfg.seed,
                    replica: r,
                    ..Default::default()
                };
                let initial = SystemState::half_half(n, START_MASS);
                let mut rng = derive_rng(cfg.seed, "theorem2-mcb", r);
                let state_t =
                    evolve_state(&initial, &params, &mut rng).expect("valid parameters");
                let totals = state_t.totals();
                let site1 = state_t.site(0);
                let site2 = state_t.site(k2);
                let (site1_late, site2_late, inner) = if is_largest {
                    // continue over the model-time window for the two-time probe
                    let late_params = SimParams {
                        horizon: cfg.m2_window,
                        seed: cfg.seed,
                        replica: r,
                        ..Default::default()
                    };
                    let state_late = evolve_state(&state_t, &late_params, &mut rng)
                        .expect("valid parameters");
                    // exact harmonic draws for the transform side
                    let mut inner = [Complex64::new(0.0, 0.0); 2];
                    for (slot, (site, y1)) in [
                        (site1, &m2_probe.site_probes[0]),
                        (site2, &m2_probe.site_probes[1]),
                    ]
                    .iter()
                    .enumerate()
                    {
                        let (p1, p2) = y1.coords();
                        let (q1, q2) = m2_probe.site_probes[1 - slot].coords();
                        // combined second argument y(j,1) + e^{-s} y(j,2)
                        let w = QuadrantPoint::new(p1 + m2_decay * q1, p2 + m2_decay * q2);
                        let mut acc = Complex64::new(0.0, 0.0);
                        for _ in 0..cfg.m2_inner {
                            let zeta = crate::measures::harmonic_sample(w, &mut rng);
                            acc += lozenge_exp(site.coords(), zeta.coords());
                        }
                        inner[slot] = acc / cfg.m2_inner as f64;
                    }
                    (state_late.site(0), state_late.site(k2), inner)
                } else {
                    (site1, site2, [Complex64::new(0.0, 0.0); 2])
                };
                Theorem2Sample {
                    totals,
                    site1,
                    site2,
                    site1_late,
                    site2_late,
                    inner,
                }
            })
            .collect();

        // one-time transform differences per probe
        for (pi, probe) in cfg.probes.iter().enumerate() {
            let y0 = probe.y0.coords();
            let lhs: Vec<Complex64> = samples
                .iter()
                .map(|s| {
                    lozenge_exp(s.totals, y0)
                        * lozenge_exp(s.site1.coords(), probe.site_probes[0].coords())
                        * lozenge_exp(s.site2.coords(), probe.site_probes[1].coords())
                })
                .collect();
            let target: Vec<Complex64> = target_finals
                .iter()
                .map(|z| {
                    lozenge_exp(*z, y0)
                        * lozenge_exp(*z, probe.site_probes[0].coords())
                        * lozenge_exp(*z, probe.site_probes[1].coords())
                })
                .collect();
            let (lm, ls) = complex_mean_se(&lhs);
            let (tm, ts) = complex_mean_se(&target);
            let diff = (lm - tm).norm();
            let se = (ls * ls + ts * ts).sqrt();
            per_probe_diffs[pi].push((diff, se));
            reports.push(TestReport::new(
                format!("theorem2/transform-diff(n={n},probe={})", probe.name),
                diff,
                1.0,
                cfg.replicas,
                cfg.seed,
            ));
        }

        // two-time probe at the largest size, shared replicas
        if is_largest {
            let y0 = m2_probe.y0.coords();
            let paired: Vec<Complex64> = samples
                .iter()
                .map(|s| {
                    let head = lozenge_exp(s.totals, y0);
                    let lhs = head
                        * lozenge_exp(s.site1.coords(), m2_probe.site_probes[0].coords())
                        * lozenge_exp(s.site1_late.coords(), m2_probe.site_probes[1].coords())
                        * lozenge_exp(s.site2.coords(), m2_probe.site_probes[1].coords())
                        * lozenge_exp(s.site2_late.coords(), m2_probe.site_probes[0].coords());
                    let theta = s.totals;
                    let tail = |y: (f64, f64)| {
                        lozenge_exp(theta, ((1.0 - m2_decay) * y.0, (1.0 - m2_decay) * y.1))
                    };
                    let rhs = head
                        * tail(m2_probe.site_probes[1].coords())
                        * s.inner[0]
                        * tail(m2_probe.site_probes[0].coords())
                        * s.inner[1];
                    lhs - rhs
                })
                .collect();
            let (mean, se) = complex_mean_se(&paired);
            m2_report = Some(TestReport::new(
                format!("theorem2/two-time-probe(n={n})"),
                mean.norm(),
                3.0 * se,
                cfg.replicas,
                cfg.seed,
            ));
        }
    }

    // falling trend within two standard errors of slack, per probe
    for (pi, probe) in cfg.probes.iter().enumerate() {
        let diffs = &per_probe_diffs[pi];
        let stat = diffs
            .windows(2)
            .map(|w| w[1].0 - w[0].0 - 2.0 * (w[0].1 * w[0].1 + w[1].1 * w[1].1).sqrt())
            .fold(f64::NEG_INFINITY, f64::max);
        reports.push(TestReport::new(
            format!("theorem2/transform-trend(probe={})", probe.name),
            stat,
            0.0,
            cfg.replicas,
            cfg.seed,
        ));
    }
    reports.push(m2_report.expect("grid is nonempty"));
    reports
}

fn complex_mean_se(samples: &[Complex64]) -> (Complex64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<Complex64>() / n;
    let mut var = 0.0;
    for s in samples {
        var += (s.re - mean.re).powi(2) + (s.im - mean.im).powi(2);
    }
    (mean, (var / (n * n)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theorem0_degenerate_start_is_exact() {
        // single-type start: both processes are the same deterministic heat
        // flow, so the distance vanishes up to discretization
        let n = 6;
        let initial: Vec<QuadrantPoint> =
            (0..n).map(|_| QuadrantPoint::new(1.0, 0.0)).collect();
        let params = GammaParams {
            gamma: 50.0,
            h: 1e-3,
            seed: 3,
            replica: 0,
        };
        let mut rng = derive_rng(3, "t0-degenerate", 0);
        let run = simulate_mcb_gamma_with_rng(&initial, &params, 1.0, &mut rng).unwrap();
        let (z1, z2) = run.record.final_totals();
        assert!((z1 - 1.0).abs() < 1e-9 && z2 == 0.0);

        let mut rng = derive_rng(3, "t0-degenerate-inf", 0);
        let state = evolve_state(
            &SystemState::new(vec![crate::measures::BoundaryPoint::type1(1.0); n]),
            &SimParams {
                horizon: 1.0,
                ..Default::default()
            },
            &mut rng,
        )
        .unwrap();
        assert_eq!(state.totals(), (1.0, 0.0));
    }

    #[test]
    fn theorem1_degenerate_start_gives_zero_distance() {
        // z = (c, 0): both sides are constant; KS of identical constants is 0
        let finals_a = vec![(0.7, 0.0); 128];
        let finals_b = vec![(0.7, 0.0); 128];
        let (k1, k2) = ks_pair(&finals_a, &finals_b);
        assert_eq!((k1, k2), (0.0, 0.0));
    }

    #[test]
    fn trend_report_flags_an_increase() {
        let ok = trend_report("t".into(), &[0.3, 0.2, 0.15], 0.0, 10, 0);
        assert!(ok.passed());
        let bad = trend_report("t".into(), &[0.3, 0.2, 0.25], 0.0, 10, 0);
        assert!(!bad.passed());
    }

    #[test]
    fn small_scale_suites_produce_consistent_reports() {
        // miniature instances: structure and determinism, not acceptance
        let reports = theorem0_suite(&[5.0, 20.0], 6, 0.5, 60, 7);
        assert!(reports.iter().any(|r| r.name.contains("ks-trend")));
        let again = theorem0_suite(&[5.0, 20.0], 6, 0.5, 60, 7);
        for (a, b) in reports.iter().zip(again.iter()) {
            assert_eq!(a.statistic.to_bits(), b.statistic.to_bits(), "{}", a.name);
        }

        let cfg = Theorem1Config {
            n_grid: vec![8, 16],
            t: 0.25,
            replicas: 48,
            qv_replicas: 8,
            census_replicas: 8,
            seed: 11,
            ..Default::default()
        };
        let reports = theorem1_suite_with(&cfg);
        assert!(reports.iter().any(|r| r.name.contains("jump-census")));
        assert!(reports.iter().any(|r| r.name.contains("qv-rate")));

        let cfg = Theorem2Config {
            n_grid: vec![8, 16],
            t: 0.25,
            replicas: 48,
            m2_inner: 8,
            seed: 13,
            ..Default::default()
        };
        let reports = theorem2_suite_with(&cfg);
        assert!(reports.iter().any(|r| r.name.contains("two-time-probe")));
    }
}
