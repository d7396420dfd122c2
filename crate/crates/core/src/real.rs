//! Scalar abstraction shared by plain `f64` arithmetic, the recording tape,
//! and truncated Taylor jets.
//!
//! Physics code (ansatz transforms, residual operators, loss reductions) is
//! written once against [`Real`] and evaluated with whichever representation
//! the caller needs.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// A constant living in the same evaluation context as `self`.
    fn constant_like(&self, c: f64) -> Self;

    /// The primal value.
    fn value(&self) -> f64;

    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn tanh(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn powi(self, n: i32) -> Self;

    fn square(self) -> Self {
        self * self
    }
}

impl Real for f64 {
    #[inline]
    fn constant_like(&self, c: f64) -> Self {
        c
    }
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

/// Successive derivatives of `tanh` expressed as polynomials in `t = tanh(z)`.
///
/// Returns `[f, f', f'', f''', f'''', f''''']` evaluated at `z`.
pub fn tanh_derivatives(z: f64) -> [f64; 6] {
    let t = fast_tanh(z);
    let t2 = t * t;
    [
        t,
        1.0 - t2,
        -2.0 * t + 2.0 * t * t2,
        -2.0 + 8.0 * t2 - 6.0 * t2 * t2,
        16.0 * t - 40.0 * t * t2 + 24.0 * t * t2 * t2,
        16.0 - 136.0 * t2 + 240.0 * t2 * t2 - 120.0 * t2 * t2 * t2,
    ]
}

/// Fills `out[(o-1)·m .. o·m]` with the `o`-th derivative of `tanh` for
/// `o = 1..=orders`, given `t = tanh(z)` for `m` values.
pub fn tanh_derivative_rows(t: &[f64], out: &mut [f64], orders: usize) {
    let m = t.len();
    assert!(orders <= 5 && out.len() >= orders * m);
    for (o, dst) in out.chunks_exact_mut(m).take(orders).enumerate() {
        let it = dst.iter_mut().zip(t);
        match o + 1 {
            1 => it.for_each(|(d, &t)| *d = 1.0 - t * t),
            2 => it.for_each(|(d, &t)| *d = -2.0 * t + 2.0 * t * t * t),
            3 => it.for_each(|(d, &t)| {
                let t2 = t * t;
                *d = -2.0 + 8.0 * t2 - 6.0 * t2 * t2
            }),
            4 => it.for_each(|(d, &t)| {
                let t2 = t * t;
                *d = 16.0 * t - 40.0 * t * t2 + 24.0 * t * t2 * t2
            }),
            _ => it.for_each(|(d, &t)| {
                let t2 = t * t;
                *d = 16.0 - 136.0 * t2 + 240.0 * t2 * t2 - 120.0 * t2 * t2 * t2
            }),
        }
    }
}

/// `tanh` through a polynomial `exp`, accurate to a few ulps in absolute
/// terms. Branch-free so loops over it vectorize.
#[inline]
pub fn fast_tanh(z: f64) -> f64 {
    let a = (2.0 * z.abs()).min(40.0);
    let e = exp_reduced(a);
    (1.0 - 2.0 / (e + 1.0)).copysign(z)
}

/// `exp(x)` for `0 <= x <= 40` via range reduction and a degree-12 Taylor
/// polynomial.
#[inline]
fn exp_reduced(x: f64) -> f64 {
    const LN2_HI: f64 = 6.931_471_803_691_238_2e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    // adding 1.5·2⁵² rounds to an integer held in the low mantissa bits
    const SHIFT: f64 = 6_755_399_441_055_744.0;
    let kf = x * std::f64::consts::LOG2_E + SHIFT;
    let k = kf - SHIFT;
    let r = (x - k * LN2_HI) - k * LN2_LO;
    const INV_FACT: [f64; 12] = [
        1.0 / 39_916_800.0,
        1.0 / 3_628_800.0,
        1.0 / 362_880.0,
        1.0 / 40_320.0,
        1.0 / 5_040.0,
        1.0 / 720.0,
        1.0 / 120.0,
        1.0 / 24.0,
        1.0 / 6.0,
        0.5,
        1.0,
        1.0,
    ];
    let mut p = 1.0 / 479_001_600.0;
    for c in INV_FACT {
        p = p * r + c;
    }
    p * f64::from_bits(kf.to_bits().wrapping_add(1023) << 52)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tanh_derivative_polynomials_match_finite_differences() {
        let h = 1e-4;
        for &z in &[-1.3, -0.2, 0.0, 0.4, 1.7] {
            let d = tanh_derivatives(z);
            let dp = tanh_derivatives(z + h);
            let dm = tanh_derivatives(z - h);
            for k in 0..5 {
                let fd = (dp[k] - dm[k]) / (2.0 * h);
                assert!((fd - d[k + 1]).abs() < 1e-6, "order {} at {}: {} vs {}", k + 1, z, fd, d[k + 1]);
            }
        }
        assert_eq!(tanh_derivatives(0.0)[3], -2.0);
    }

    #[test]
    fn fast_tanh_tracks_libm() {
        let mut z = -30.0;
        while z < 30.0 {
            assert!((fast_tanh(z) - z.tanh()).abs() < 4e-16, "{z}");
            z += 0.0137;
        }
        for x in [0.0, 0.3, 1.0, 7.7, 20.0, 39.9] {
            assert!((exp_reduced(x) / x.exp() - 1.0).abs() < 4e-16, "{x}");
        }
        assert_eq!(fast_tanh(800.0), 1.0);
        assert_eq!(fast_tanh(-800.0), -1.0);
    }
}
