//! Mutation-kernel transforms: the Laplace transform K(p) of the mutation
//! distribution and its convex conjugate, evaluated to machine precision.

use serde::{Deserialize, Serialize};

use crate::real::{real, Real};

/// Laplace transform of a symmetric mutation distribution with finite
/// exponential moments. Only the transform is consumed, never the raw
/// density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MutationTransform {
    /// Standard Gaussian: K(p) = exp(|p|^2 / 2).
    Gaussian,
}

impl MutationTransform {
    /// K(s) for s = |p|.
    #[inline]
    pub fn k<T: Real>(&self, s: T) -> T {
        match self {
            MutationTransform::Gaussian => (s * s / real(2.0)).exp(),
        }
    }

    /// dK/ds.
    #[inline]
    pub fn k_prime<T: Real>(&self, s: T) -> T {
        match self {
            MutationTransform::Gaussian => s * (s * s / real(2.0)).exp(),
        }
    }

    /// Convex conjugate of K at w >= 0, returned as (value, maximizer p*).
    ///
    /// p* solves k'(p) = w; for the Gaussian this is p e^{p^2/2} = w, which
    /// has no closed form, so it is solved by a safeguarded Newton iteration
    /// in log form. The conjugate value then follows from e^{p*^2/2} = w/p*.
    pub fn conjugate<T: Real>(&self, w: T) -> (T, T) {
        match self {
            MutationTransform::Gaussian => gaussian_conjugate(w),
        }
    }

    /// Conjugate for a signed scalar argument (even function, odd maximizer).
    #[inline]
    pub fn conjugate_signed<T: Real>(&self, v: T) -> (T, T) {
        let (val, p) = self.conjugate(v.abs());
        (val, if v < T::zero() { -p } else { p })
    }
}

/// Solves p e^{p^2/2} = w for p >= 0 and returns (L(w), p*) where
/// L(w) = p* w - e^{p*^2/2}. Works in the log form ln p + p^2/2 = ln w,
/// which stays well conditioned for large w.
fn gaussian_conjugate<T: Real>(w: T) -> (T, T) {
    let zero = T::zero();
    if w == zero {
        return (-T::one(), zero);
    }
    let target = w.ln();
    let f = |p: T| p.ln() + p * p / real(2.0) - target;
    let fp = |p: T| T::one() / p + p;

    // Bracket the root. f is strictly increasing on (0, inf).
    let mut lo: T = real(1e-30);
    let mut hi = if w >= T::one() {
        (real::<T>(2.0) * target.max(T::zero()) + real(1.0)).sqrt() + T::one()
    } else {
        T::one()
    };
    while f(hi) < zero {
        hi = hi * real(2.0);
    }

    let mut p = if w < T::one() {
        w // k'(p) ~ p near 0
    } else {
        (real::<T>(2.0) * target + T::one()).max(real(0.25)).sqrt()
    };
    if p <= lo || p >= hi {
        p = (lo + hi) / real(2.0);
    }

    let tol = real::<T>(4.0) * T::epsilon() * (T::one() + target.abs());
    for _ in 0..80 {
        let fv = f(p);
        if fv.abs() <= tol {
            break;
        }
        if fv > zero {
            hi = p;
        } else {
            lo = p;
        }
        let step = fv / fp(p);
        let next = p - step;
        p = if next > lo && next < hi {
            next
        } else {
            (lo + hi) / real(2.0)
        };
    }

    // e^{p^2/2} = w / p exactly at the root.
    (p * w - w / p, p)
}
