//! Brute-force oracles for the verification battery.
//!
//! Nothing here is used by any simulation path; these routines exist solely
//! so the exact samplers and closed forms can be checked against methods
//! that share no code or mathematics with them.

use crate::measures::{BoundaryPoint, QuadrantPoint, SiteKind};
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::TAU;

/// Exit point of a fine-step Gaussian walk from the open quadrant.
///
/// Base step is `step_rel · min(x₁, x₂)` of the starting point; far from the
/// boundary the step grows proportionally to the current clearance (same
/// relative resolution, keeps the absorption scale fixed), which caps the
/// otherwise heavy-tailed running time. Absorbed when a coordinate reaches 0;
/// the overshooting coordinate is clamped.
pub fn walk_exit<R: Rng + ?Sized>(x: QuadrantPoint, step_rel: f64, rng: &mut R) -> BoundaryPoint {
    let clearance0 = x.x1.min(x.x2);
    if clearance0 == 0.0 {
        if x.x1 == 0.0 {
            return BoundaryPoint::new(SiteKind::Type2, x.x2);
        }
        return BoundaryPoint::new(SiteKind::Type1, x.x1);
    }
    let base = step_rel * clearance0;
    let (mut x1, mut x2) = (x.x1, x.x2);
    loop {
        let step = base * (x1.min(x2) / clearance0).max(1.0);
        let g1: f64 = rng.sample(StandardNormal);
        let g2: f64 = rng.sample(StandardNormal);
        x1 += step * g1;
        x2 += step * g2;
        if x1 <= 0.0 {
            return BoundaryPoint::new(SiteKind::Type2, x2.max(0.0));
        }
        if x2 <= 0.0 {
            return BoundaryPoint::new(SiteKind::Type1, x1.max(0.0));
        }
    }
}

/// Exit point via walk-on-spheres: repeatedly jump to a uniform point on
/// the largest circle inside the quadrant centred at the current position;
/// snap to the nearest axis once the clearance drops below `shell · scale`.
///
/// Uses only the isotropy of planar Brownian motion (uniform exit from a
/// disk), sharing nothing with the conformal-map construction.
pub fn walk_on_spheres_exit<R: Rng + ?Sized>(
    x: QuadrantPoint,
    shell: f64,
    rng: &mut R,
) -> BoundaryPoint {
    let scale = (x.x1.max(x.x2)).max(1e-12);
    let cutoff = shell * scale;
    let (mut x1, mut x2) = (x.x1, x.x2);
    loop {
        let r = x1.min(x2);
        if r <= cutoff {
            return if x1 <= x2 {
                BoundaryPoint::new(SiteKind::Type2, x2)
            } else {
                BoundaryPoint::new(SiteKind::Type1, x1)
            };
        }
        let angle = TAU * rng.random::<f64>();
        x1 += r * angle.cos();
        x2 += r * angle.sin();
        x1 = x1.max(0.0);
        x2 = x2.max(0.0);
    }
}
