//! Gaussian tail function and its inverse.

// Coefficient and reference tables are kept digit-for-digit as published.
#![allow(clippy::excessive_precision)]

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Gaussian tail probability `Q(x) = P(N(0,1) > x)`.
pub fn q_func(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Standard normal CDF.
pub fn phi(x: f64) -> f64 {
    q_func(-x)
}

// Acklam's rational approximation of the normal quantile (rel. error ~1e-9),
// refined below with Halley steps against erfc.
const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_690e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const P_LOW: f64 = 0.02425;

fn acklam(p: f64) -> f64 {
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Lower-tail normal quantile for `p <= 0.5`, accurate in relative terms deep into the tail.
fn lower_quantile(p: f64) -> f64 {
    let mut z = acklam(p);
    for _ in 0..3 {
        let half_sq = 0.5 * z * z;
        if half_sq > 700.0 {
            break;
        }
        let e = phi(z) - p;
        let u = e * (2.0 * PI).sqrt() * half_sq.exp();
        let step = u / (1.0 + 0.5 * z * u);
        z -= step;
        if step.abs() <= 1e-16 * z.abs().max(1.0) {
            break;
        }
    }
    z
}

/// Inverse Gaussian tail: the `x` with `Q(x) = eps`, for `0 < eps < 1`.
///
/// Returns NaN outside the open unit interval.
pub fn q_inv(eps: f64) -> f64 {
    if !(eps > 0.0 && eps < 1.0) {
        return f64::NAN;
    }
    if eps == 0.5 {
        0.0
    } else if eps < 0.5 {
        -lower_quantile(eps)
    } else {
        lower_quantile(1.0 - eps)
    }
}
