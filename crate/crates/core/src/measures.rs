//! Densities, closed-form integrals, exact samplers and bounds for the jump
//! measure ν on the quadrant boundary and for the quadrant harmonic measure.
//!
//! ν lives on E = ∂(ℝ₊²) with Lebesgue densities
//!
//! ```text
//!   axis 1 (y₂ = 0):  (4/π) · y₁ / ((1-y₁)² (1+y₁)²)
//!   axis 2 (y₁ = 0):  (4/π) · y₂ / (1+y₂²)²
//! ```
//!
//! The axis-1 density has a non-integrable pole at y₁ = 1, so every sampler
//! works on the restriction that excludes `(1-δ, 1+δ)` there; the removed
//! window only matters through the principal value of its signed first
//! moment, which [`nu_pv_mean_axis1`] evaluates by quadrature.

use crate::quad;
use rand::Rng;
use std::f64::consts::{FRAC_2_PI, PI};
use thiserror::Error;

/// Total ν-mass of the second axis, `∫ ν(d(0,y₂)) = 2/π`.
pub const AXIS2_MASS: f64 = FRAC_2_PI;

/// Mean of y₂ under ν, `∫ y₂ ν(dy) = 1` in closed form.
pub const AXIS2_MEAN: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum MeasuresError {
    #[error("axis-1 density diverges at value 1")]
    PoleValue,
    #[error("interval ({0}, {1}) straddles the axis-1 pole at 1: infinite mass")]
    InfiniteMass(f64, f64),
    #[error("invalid interval ({0}, {1}): need 0 <= a < b")]
    InvalidInterval(f64, f64),
    #[error("truncation half-width must lie in (0, 1), got {0}")]
    InvalidWindow(f64),
    #[error("moment order must lie in (0, 2), got {0}")]
    InvalidExponent(f64),
}

/// Which boundary half-axis a jump mark (or site) occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Axis1,
    Axis2,
}

/// Which type a boundary site carries. The origin is its own kind so the
/// zero point has exactly one representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteKind {
    Type1,
    Type2,
    Origin,
}

/// A point of E = ∂(ℝ₊²): type flag plus nonnegative magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    kind: SiteKind,
    magnitude: f64,
}

impl BoundaryPoint {
    /// Canonical constructor: zero magnitude collapses to the origin.
    pub fn new(kind: SiteKind, magnitude: f64) -> Self {
        assert!(
            magnitude >= 0.0 && magnitude.is_finite(),
            "magnitude must be finite and nonnegative, got {magnitude}"
        );
        if magnitude == 0.0 || kind == SiteKind::Origin {
            assert!(
                magnitude == 0.0 || kind != SiteKind::Origin,
                "origin carries zero magnitude"
            );
            Self {
                kind: SiteKind::Origin,
                magnitude: 0.0,
            }
        } else {
            Self { kind, magnitude }
        }
    }

    pub fn type1(magnitude: f64) -> Self {
        Self::new(SiteKind::Type1, magnitude)
    }

    pub fn type2(magnitude: f64) -> Self {
        Self::new(SiteKind::Type2, magnitude)
    }

    pub fn origin() -> Self {
        Self {
            kind: SiteKind::Origin,
            magnitude: 0.0,
        }
    }

    pub fn kind(&self) -> SiteKind {
        self.kind
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    pub fn is_origin(&self) -> bool {
        self.kind == SiteKind::Origin
    }

    /// Coordinates (x₁, x₂) of the encoded quadrant-boundary point.
    pub fn coords(&self) -> (f64, f64) {
        match self.kind {
            SiteKind::Type1 => (self.magnitude, 0.0),
            SiteKind::Type2 => (0.0, self.magnitude),
            SiteKind::Origin => (0.0, 0.0),
        }
    }
}

/// A point of the closed quadrant ℝ₊².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadrantPoint {
    pub x1: f64,
    pub x2: f64,
}

impl QuadrantPoint {
    pub fn new(x1: f64, x2: f64) -> Self {
        assert!(
            x1 >= 0.0 && x2 >= 0.0 && x1.is_finite() && x2.is_finite(),
            "quadrant point needs finite nonnegative coordinates, got ({x1}, {x2})"
        );
        Self { x1, x2 }
    }

    pub fn coords(&self) -> (f64, f64) {
        (self.x1, self.x2)
    }
}

impl From<BoundaryPoint> for QuadrantPoint {
    fn from(p: BoundaryPoint) -> Self {
        let (x1, x2) = p.coords();
        QuadrantPoint { x1, x2 }
    }
}

/// A draw from ν: axis index plus coordinate value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpMark {
    pub axis: Axis,
    pub value: f64,
}

/// Half-width of the excluded interval around y₁ = 1 on axis 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationWindow {
    delta: f64,
}

impl TruncationWindow {
    /// Default half-width: removed jumps change magnitudes by < 0.1% each.
    pub const DEFAULT_DELTA: f64 = 1e-3;

    pub fn new(delta: f64) -> Result<Self, MeasuresError> {
        if delta > 0.0 && delta < 1.0 {
            Ok(Self { delta })
        } else {
            Err(MeasuresError::InvalidWindow(delta))
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

impl Default for TruncationWindow {
    fn default() -> Self {
        Self {
            delta: Self::DEFAULT_DELTA,
        }
    }
}

const FRAC_4_PI: f64 = 2.0 * FRAC_2_PI;

/// Lebesgue density of ν at a mark.
///
/// Errors on the axis-1 pole at value 1 where the density diverges.
pub fn nu_density(mark: &JumpMark) -> Result<f64, MeasuresError> {
    let y = mark.value;
    assert!(y >= 0.0, "mark value must be nonnegative");
    match mark.axis {
        Axis::Axis1 => {
            if y == 1.0 {
                return Err(MeasuresError::PoleValue);
            }
            let d = (1.0 - y) * (1.0 + y);
            Ok(FRAC_4_PI * y / (d * d))
        }
        Axis::Axis2 => {
            let d = 1.0 + y * y;
            Ok(FRAC_4_PI * y / (d * d))
        }
    }
}

/// Antiderivative of the axis-1 density, valid on each side of the pole.
fn axis1_antideriv(y: f64) -> f64 {
    if y.is_infinite() {
        0.0
    } else {
        FRAC_2_PI / (1.0 - y * y)
    }
}

/// ν-mass of axis 2 below `x`, `(2/π) x²/(1+x²)`.
fn axis2_cdf(x: f64) -> f64 {
    if x.is_infinite() {
        AXIS2_MASS
    } else {
        FRAC_2_PI * x * x / (1.0 + x * x)
    }
}

/// Exact ν-mass of the interval `(a, b)` on the given axis; `b` may be
/// infinite. Axis-1 intervals must not contain the pole at 1.
pub fn nu_interval_mass(axis: Axis, a: f64, b: f64) -> Result<f64, MeasuresError> {
    if !(0.0..f64::INFINITY).contains(&a) || b <= a {
        return Err(MeasuresError::InvalidInterval(a, b));
    }
    match axis {
        Axis::Axis2 => Ok(axis2_cdf(b) - axis2_cdf(a)),
        Axis::Axis1 => {
            if a < 1.0 && b > 1.0 {
                return Err(MeasuresError::InfiniteMass(a, b));
            }
            if b == 1.0 || a == 1.0 {
                return Err(MeasuresError::InfiniteMass(a, b));
            }
            Ok(axis1_antideriv(b) - axis1_antideriv(a))
        }
    }
}

/// ν-mass of the axis-1 complement `[0,∞) \ (1-eps, 1+eps)`.
///
/// Closed form: `(8/π)/(eps(4-eps²)) - 2/π` for `eps ≤ 1` and
/// `(2/π)/(eps(2+eps))` for `eps ≥ 1`.
pub fn nu_axis1_complement_mass(eps: f64) -> Result<f64, MeasuresError> {
    if eps <= 0.0 {
        return Err(MeasuresError::InvalidInterval(0.0, eps));
    }
    if eps >= 1.0 {
        Ok(FRAC_2_PI / (eps * (2.0 + eps)))
    } else {
        Ok(4.0 * FRAC_2_PI / (eps * (4.0 - eps * eps)) - FRAC_2_PI)
    }
}

/// Truncated second moment about the jump fixed point:
/// axis 1 gives `∫_(0,x) (y₁-1)² ν(dy)`, axis 2 gives `∫_(0,x) y₂² ν(dy)`.
pub fn nu_truncated_second_moment(axis: Axis, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    match axis {
        Axis::Axis1 => FRAC_4_PI * ((1.0 + x).ln() - x / (1.0 + x)),
        Axis::Axis2 => {
            let x2 = x * x;
            FRAC_2_PI * (1.0 + x2).ln() - FRAC_2_PI * x2 / (1.0 + x2)
        }
    }
}

/// `∫ y₂ ν(dy) = 1`, closed form.
pub fn nu_mean_axis2() -> f64 {
    AXIS2_MEAN
}

/// Quadrature cross-check route for [`nu_mean_axis2`].
pub fn nu_mean_axis2_quadrature() -> f64 {
    quad::integrate_to_inf(
        |y| {
            let d = 1.0 + y * y;
            y * FRAC_4_PI * y / (d * d)
        },
        0.0,
        quad::DEFAULT_ABS_TOL,
    )
}

/// Principal value of the signed first moment over the excluded window,
/// `PV ∫_{|y₁-1|<δ} (y₁-1) ν(dy)`.
///
/// The odd part cancels; what remains is the quadrature of the symmetrized
/// integrand `g(u) = (4/π)(f(u) + f(-u))`, `f(u) = (1+u)/(u(2+u)²)`, over
/// `(0, δ)`. Finite, continuous in δ and → 0 as δ → 0.
pub fn nu_pv_mean_axis1(window: TruncationWindow) -> f64 {
    let f = |u: f64| (1.0 + u) / (u * (2.0 + u) * (2.0 + u));
    quad::integrate(
        |u| FRAC_4_PI * (f(u) + f(-u)),
        0.0,
        window.delta(),
        quad::DEFAULT_ABS_TOL,
    )
}

/// Signed first moment of the *kept* axis-1 marks,
/// `∫_{|y₁-1|≥δ} (y₁-1) ν(dy)`, in closed form.
///
/// Together with [`nu_pv_mean_axis1`] it reconstitutes the full principal
/// value `2/π`; the pair is the compensator bookkeeping for truncated
/// simulation.
pub fn nu_restricted_mean_axis1(window: TruncationWindow) -> f64 {
    let d = window.delta();
    (((2.0 + d) / (2.0 - d)).ln() - 2.0 / (2.0 - d) + 2.0 / (2.0 + d) + 2.0) / PI
}

/// Exact inverse-CDF sampler for ν restricted to
/// `{axis 2} ∪ {axis 1 : |y₁-1| ≥ δ}`. No rejection loop anywhere.
#[derive(Debug, Clone)]
pub struct NuSampler {
    delta: f64,
    mass_axis2: f64,
    mass_lower: f64,
    mass_upper: f64,
}

impl NuSampler {
    pub fn new(window: TruncationWindow) -> Self {
        let d = window.delta();
        // lower branch (0, 1-δ) and upper branch (1+δ, ∞)
        let mass_lower = FRAC_2_PI * (1.0 / (d * (2.0 - d)) - 1.0);
        let mass_upper = FRAC_2_PI / (d * (2.0 + d));
        Self {
            delta: d,
            mass_axis2: AXIS2_MASS,
            mass_lower,
            mass_upper,
        }
    }

    /// Total mass of the restricted measure.
    pub fn total_mass(&self) -> f64 {
        self.mass_axis2 + self.mass_lower + self.mass_upper
    }

    /// Mass of the restricted axis-1 part.
    pub fn axis1_mass(&self) -> f64 {
        self.mass_lower + self.mass_upper
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Draw one mark; axis chosen proportionally to the restricted masses,
    /// value by closed-form inverse CDF on the selected branch.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> JumpMark {
        let u = rng.random::<f64>() * self.total_mass();
        if u < self.mass_axis2 {
            // (2/π) x²/(1+x²) = u  ⇒  x = sqrt(u/(2/π - u))
            let value = (u / (AXIS2_MASS - u)).sqrt();
            JumpMark {
                axis: Axis::Axis2,
                value,
            }
        } else if u < self.mass_axis2 + self.mass_lower {
            let w = u - self.mass_axis2;
            // (2/π)(1/(1-y²) - 1) = w on (0, 1-δ)
            let t = 1.0 + w / FRAC_2_PI;
            let value = (1.0 - 1.0 / t).sqrt();
            JumpMark {
                axis: Axis::Axis1,
                value,
            }
        } else {
            let w = u - self.mass_axis2 - self.mass_lower;
            // mass of (1+δ, y) = w on the upper branch
            let q = 1.0 / (self.delta * (2.0 + self.delta)) - w / FRAC_2_PI;
            let value = (1.0 + 1.0 / q).sqrt();
            JumpMark {
                axis: Axis::Axis1,
                value,
            }
        }
    }
}

/// Convenience one-shot form of [`NuSampler`].
pub fn sample_nu<R: Rng + ?Sized>(window: TruncationWindow, rng: &mut R) -> JumpMark {
    NuSampler::new(window).sample(rng)
}

/// One Cauchy(0, 1) draw.
fn std_cauchy<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    (PI * (rng.random::<f64>() - 0.5)).tan()
}

/// Exact draw from the quadrant harmonic measure Q_x.
///
/// The conformal map w = z² sends the quadrant to the upper half-plane; the
/// half-plane exit law from w = (x₁²-x₂²) + 2i·x₁x₂ is Cauchy with that
/// centre and scale on the real line. Real exit u ≥ 0 maps back to type 1
/// with magnitude √u, u < 0 to type 2 with magnitude √(-u). Boundary starts
/// return themselves.
pub fn harmonic_sample<R: Rng + ?Sized>(x: QuadrantPoint, rng: &mut R) -> BoundaryPoint {
    if x.x2 == 0.0 {
        return BoundaryPoint::new(SiteKind::Type1, x.x1);
    }
    if x.x1 == 0.0 {
        return BoundaryPoint::new(SiteKind::Type2, x.x2);
    }
    let centre = x.x1 * x.x1 - x.x2 * x.x2;
    let scale = 2.0 * x.x1 * x.x2;
    let u = centre + scale * std_cauchy(rng);
    if u >= 0.0 {
        BoundaryPoint::new(SiteKind::Type1, u.sqrt())
    } else {
        BoundaryPoint::new(SiteKind::Type2, (-u).sqrt())
    }
}

/// Exact type-1 probability of Q_x (closed form used by tests and tables).
pub fn harmonic_type1_probability(x: QuadrantPoint) -> f64 {
    if x.x2 == 0.0 {
        return 1.0;
    }
    if x.x1 == 0.0 {
        return 0.0;
    }
    let centre = x.x1 * x.x1 - x.x2 * x.x2;
    let scale = 2.0 * x.x1 * x.x2;
    0.5 + (centre / scale).atan() / PI
}

/// Monte Carlo p-th coordinate moment of Q_x with its closed-form bound.
#[derive(Debug, Clone, Copy)]
pub struct PthMomentEstimate {
    pub estimate: f64,
    pub bound: f64,
    pub std_err: f64,
}

/// Estimate `∫ y_i^p Q_x(dy)` by `n_samples` exact draws and report the
/// closed-form bound `2/(2-p) (x₁^p + x₂^p)`; the estimate stays below the
/// bound up to Monte Carlo error.
pub fn harmonic_pth_moment<R: Rng + ?Sized>(
    x: QuadrantPoint,
    p: f64,
    coord: Axis,
    n_samples: usize,
    rng: &mut R,
) -> Result<PthMomentEstimate, MeasuresError> {
    if !(0.0..2.0).contains(&p) || p == 0.0 {
        return Err(MeasuresError::InvalidExponent(p));
    }
    let bound = 2.0 / (2.0 - p) * (x.x1.powf(p) + x.x2.powf(p));
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for _ in 0..n_samples {
        let y = harmonic_sample(x, rng);
        let (y1, y2) = y.coords();
        let v = match coord {
            Axis::Axis1 => y1.powf(p),
            Axis::Axis2 => y2.powf(p),
        };
        sum += v;
        sumsq += v * v;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = (sumsq / n - mean * mean).max(0.0);
    Ok(PthMomentEstimate {
        estimate: mean,
        bound,
        std_err: (var / n).sqrt(),
    })
}

/// Quadrature evaluation of `∫ scale·|J(y,x)| 1{scale·|J(y,x)| > 1} ν(dy)`
/// against its closed-form bound `8 (x₁²+x₂²) scale²`.
///
/// For a type-bearing x the displacement magnitudes are `|y₁-1|·m` for
/// axis-1 marks and `√(1+y₂²)·m` for axis-2 marks, m the site magnitude.
pub fn large_jump_first_moment_bound(x: &BoundaryPoint, scale: f64) -> (f64, f64) {
    assert!(scale > 0.0, "scale must be positive");
    if x.is_origin() {
        return (0.0, 0.0);
    }
    let m = x.magnitude();
    let rhs = 8.0 * m * m * scale * scale;
    let c = 1.0 / (scale * m);
    let tol = quad::DEFAULT_ABS_TOL;

    let axis1_density = |y: f64| {
        let d = (1.0 - y) * (1.0 + y);
        FRAC_4_PI * y / (d * d)
    };
    let axis2_density = |y: f64| {
        let d = 1.0 + y * y;
        FRAC_4_PI * y / (d * d)
    };

    // axis 1: |y-1| > c
    let mut lhs = 0.0;
    if c < 1.0 {
        lhs += quad::integrate(|y| (1.0 - y) * axis1_density(y), 0.0, 1.0 - c, tol);
    }
    lhs += quad::integrate_to_inf(|y| (y - 1.0) * axis1_density(y), 1.0 + c, tol);

    // axis 2: sqrt(1+y²) > c
    let lo = if c > 1.0 { (c * c - 1.0).sqrt() } else { 0.0 };
    lhs += quad::integrate_to_inf(|y| (1.0 + y * y).sqrt() * axis2_density(y), lo, tol);

    (scale * m * lhs, rhs)
}

/// ν-mass of `{y : |J(y,(1,0))| ≥ L}` from the closed-form interval masses,
/// with the bound `2/L²`.
pub fn jump_tail_bound_check(l: f64) -> (f64, f64) {
    assert!(l > 0.0, "threshold must be positive");
    let bound = 2.0 / (l * l);
    // axis 1: |y₁ - 1| ≥ L
    let axis1 = nu_axis1_complement_mass(l).expect("positive threshold");
    // axis 2: |(-1, y₂)| = sqrt(1+y₂²) ≥ L
    let axis2 = if l <= 1.0 {
        AXIS2_MASS
    } else {
        nu_interval_mass(Axis::Axis2, (l * l - 1.0).sqrt(), f64::INFINITY)
            .expect("valid tail interval")
    };
    (axis1 + axis2, bound)
}
