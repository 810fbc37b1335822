//! Closed forms and quadratures for the headline fidelities and thresholds,
//! plus small Monte Carlo oracles that check them by a different route.

use core::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_3, FRAC_PI_4, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::certify::{chsh, ChshSettings};
use crate::geometry::{sample_uniform_sphere, sector_of, BitPair, T00};
use crate::montecarlo::{estimate_mean, Estimate, Executor};
use crate::protocols::Protocol;
use crate::quadrature::{integrate, integrate_2d, QuadratureResult};

/// Polar angle (about `t00`) of the edge of the quarter around `t00`, at
/// azimuth `phi`: `atan(sqrt(2)/cos(phi + pi/3))`, moved to `(pi/2, pi)`
/// where the cosine is negative.
pub fn gisin_boundary_angle(phi: f64) -> f64 {
    let c = libm::cos(phi + FRAC_PI_3);
    let u = libm::atan(SQRT_2 / c);
    if c < 0.0 {
        u + PI
    } else {
        u
    }
}

/// Boundary with the `pi/3` phase dropped. Used to check that the
/// fidelity target catches a broken boundary.
#[doc(hidden)]
pub fn gisin_boundary_angle_without_offset(phi: f64) -> f64 {
    let c = libm::cos(phi);
    let u = libm::atan(SQRT_2 / c);
    if c < 0.0 {
        u + PI
    } else {
        u
    }
}

/// `F = [1 + (3/pi) int_{pi/3}^{pi} (1/2) sin^2 u(phi) dphi] / 2`.
pub fn gisin_fidelity_quadrature(tol: f64) -> QuadratureResult {
    gisin_fidelity_quadrature_with(tol, gisin_boundary_angle)
}

/// [`gisin_fidelity_quadrature`] with a caller-supplied boundary `u(phi)`.
pub fn gisin_fidelity_quadrature_with<U: Fn(f64) -> f64>(tol: f64, u: U) -> QuadratureResult {
    // F depends on the integral through 3/(2 pi)
    let scale = 1.5 / PI;
    let r = integrate(
        |phi| {
            let s = libm::sin(u(phi));
            0.5 * s * s
        },
        FRAC_PI_3,
        PI,
        &[],
        tol / scale,
    );
    QuadratureResult {
        value: 0.5 + scale * r.value,
        abs_error_estimate: scale * r.abs_error_estimate,
        evaluations: r.evaluations,
    }
}

/// Same integral without the closed-form inner step:
/// `int dphi int_0^{u(phi)} cos(theta) sin(theta) dtheta`.
pub fn gisin_fidelity_quadrature_2d(tol: f64) -> QuadratureResult {
    let scale = 1.5 / PI;
    let r = integrate_2d(
        |_, theta| libm::cos(theta) * libm::sin(theta),
        FRAC_PI_3,
        PI,
        |_| 0.0,
        gisin_boundary_angle,
        &[],
        tol / scale,
    );
    QuadratureResult {
        value: 0.5 + scale * r.value,
        abs_error_estimate: scale * r.abs_error_estimate,
        evaluations: r.evaluations,
    }
}

/// Sector-restricted oracle: `(1/pi) int_{S00} (1 + t00 . a)/2 da`, as the mean
/// of `4 [a in S00] (1 + t00 . a)/2` over uniform `a`.
pub fn gisin_sector_monte_carlo<E: Executor + ?Sized>(samples: u64, seed: u64, executor: &E) -> Estimate {
    let origin = BitPair::new(false, false);
    estimate_mean(executor, samples, seed, |rng| {
        let a = sample_uniform_sphere(rng);
        if sector_of(a).index == origin {
            2.0 * (1.0 + T00.dot(a))
        } else {
            0.0
        }
    })
}

/// Fraction of the sphere where some component exceeds `1/sqrt(2)`: six caps
/// of solid angle `2 pi (1 - 1/sqrt(2))`.
pub fn cap_fraction() -> f64 {
    3.0 * (1.0 - FRAC_1_SQRT_2)
}

/// `[1 + pi/(8 (sqrt(2) - 1))]/2`.
pub fn pcrit_cap_fidelity_closed_form() -> f64 {
    0.5 * (1.0 + PI / (8.0 * (SQRT_2 - 1.0)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapFidelity {
    pub closed_form: f64,
    pub quadrature: QuadratureResult,
}

impl CapFidelity {
    pub fn discrepancy(&self) -> f64 {
        (self.closed_form - self.quadrature.value).abs()
    }
}

pub const CAP_QUADRATURE_TOL: f64 = 1e-10;

/// Fidelity over inputs with `z > 1/sqrt(2)`, where the capped vector is
/// `(cos phi, sin phi, 1)/sqrt(2)`: the closed form and the defining ratio
/// `[int a_cap . a dOmega] / cap area` by nested quadrature.
pub fn pcrit_cap_fidelity() -> CapFidelity {
    let area = 2.0 * PI * (1.0 - FRAC_1_SQRT_2);
    let q = integrate_2d(
        |phi, theta| {
            let (st, ct) = libm::sincos(theta);
            let (sp, cp) = libm::sincos(phi);
            let a = [st * cp, st * sp, ct];
            let capped = [cp * FRAC_1_SQRT_2, sp * FRAC_1_SQRT_2, FRAC_1_SQRT_2];
            (a[0] * capped[0] + a[1] * capped[1] + a[2] * capped[2]) * st
        },
        0.0,
        2.0 * PI,
        |_| 0.0,
        |_| FRAC_PI_4,
        &[],
        CAP_QUADRATURE_TOL * area * 2.0,
    );
    CapFidelity {
        closed_form: pcrit_cap_fidelity_closed_form(),
        quadrature: QuadratureResult {
            value: 0.5 * (1.0 + q.value / area),
            abs_error_estimate: 0.5 * q.abs_error_estimate / area,
            evaluations: q.evaluations,
        },
    }
}

/// Rejection-sampled oracle for the cap fidelity: uniform `a` restricted to
/// `z > 1/sqrt(2)`, averaging `(1 + a_cap . a)/2` with the capped vector
/// written out directly. The indicator is divided by the cap probability, so
/// the mean over all draws estimates the cap average.
pub fn pcrit_cap_monte_carlo<E: Executor + ?Sized>(samples: u64, seed: u64, executor: &E) -> Estimate {
    let frac = 0.5 * (1.0 - FRAC_1_SQRT_2);
    estimate_mean(executor, samples, seed, |rng| {
        let a = sample_uniform_sphere(rng);
        if a.z() > FRAC_1_SQRT_2 {
            let r = libm::sqrt(a.x() * a.x() + a.y() * a.y());
            let dot = FRAC_1_SQRT_2 * (r + a.z());
            0.5 * (1.0 + dot) / frac
        } else {
            0.0
        }
    })
}

/// `f F_cap + (1 - f)` with `f` the capped fraction of the sphere; inputs
/// outside the caps are teleported perfectly.
pub fn pcrit_total_fidelity_closed_form() -> f64 {
    let f = cap_fraction();
    f * pcrit_cap_fidelity_closed_form() + (1.0 - f)
}

/// Total fidelity from the combination formula, using the quadrature value
/// of the cap fidelity.
pub fn pcrit_total_fidelity() -> f64 {
    let f = cap_fraction();
    f * pcrit_cap_fidelity().quadrature.value + (1.0 - f)
}

/// `(1/sqrt(2), (1 + 1/sqrt(2))/2)`.
pub fn lambda_threshold_closed_form() -> (f64, f64) {
    (FRAC_1_SQRT_2, 0.5 * (1.0 + FRAC_1_SQRT_2))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaThreshold {
    pub lambda_crit: f64,
    pub fidelity_crit: f64,
    /// Root of `|CHSH(ideal lambda, canonical)| = 2` found by bisection.
    pub bisection: f64,
}

/// Bisection on the canonical-settings CHSH of the shrunk ideal protocol.
pub fn lambda_threshold_bisection(tol: f64) -> f64 {
    let excess = |lambda: f64| {
        chsh(&Protocol::Ideal { lambda }, &ChshSettings::canonical())
            .map(|r| r.magnitude() - 2.0)
            .unwrap_or(f64::NAN)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn lambda_threshold() -> LambdaThreshold {
    let (lambda_crit, fidelity_crit) = lambda_threshold_closed_form();
    LambdaThreshold {
        lambda_crit,
        fidelity_crit,
        bisection: lambda_threshold_bisection(1e-12),
    }
}
