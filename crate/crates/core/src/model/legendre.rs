//! Discrete Legendre transform (convex conjugate) on 1-d sample grids.

use crate::error::{Error, Result};
use crate::real::{as_f64, Real};

/// Discrete sup transform of convex samples `(ps, fs)` evaluated on the dual
/// grid: f*(v) = max_i (v p_i - f_i).
///
/// The input must be convex up to `tol_convex` in the discrete
/// second-difference sense; the output is convex exactly, being a pointwise
/// sup of affine functions. Dense O(N^2) evaluation; grids are small enough
/// that this stays cheap and it doubles as an unambiguous oracle.
pub fn legendre_conjugate<T: Real>(
    ps: &[T],
    fs: &[T],
    dual_grid: &[T],
    tol_convex: T,
) -> Result<Vec<T>> {
    if ps.len() != fs.len() || ps.len() < 3 {
        return Err(Error::Config(format!(
            "conjugate needs matching sample arrays of length >= 3, got {} and {}",
            ps.len(),
            fs.len()
        )));
    }
    for w in ps.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::Config(
                "conjugate sample abscissae must be strictly increasing".to_string(),
            ));
        }
    }
    for k in 1..ps.len() - 1 {
        let s_prev = (fs[k] - fs[k - 1]) / (ps[k] - ps[k - 1]);
        let s_next = (fs[k + 1] - fs[k]) / (ps[k + 1] - ps[k]);
        if s_next - s_prev < -tol_convex {
            return Err(Error::NonConvex {
                i0: k - 1,
                i1: k,
                i2: k + 1,
                f0: as_f64(fs[k - 1]),
                f1: as_f64(fs[k]),
                f2: as_f64(fs[k + 1]),
                second_diff: as_f64(s_next - s_prev),
                tol: as_f64(tol_convex),
            });
        }
    }

    Ok(dual_grid
        .iter()
        .map(|&v| {
            let mut best = v * ps[0] - fs[0];
            for (p, f) in ps.iter().zip(fs).skip(1) {
                best = best.max(v * *p - *f);
            }
            best
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
    }

    #[test]
    fn conjugate_of_square() {
        let ps = grid(-5.0, 5.0, 400);
        let fs: Vec<f64> = ps.iter().map(|p| p * p).collect();
        let vs = grid(-8.0, 8.0, 97);
        let out = legendre_conjugate(&ps, &fs, &vs, 1e-9).unwrap();
        let dp = 10.0 / 400.0;
        for (v, got) in vs.iter().zip(&out) {
            // Sampling the sup loses at most (dp/2)^2 for f = p^2.
            assert!((got - v * v / 4.0).abs() <= dp * dp / 4.0 + 1e-12);
        }
    }

    #[test]
    fn conjugate_of_abs_is_zero_inside_the_unit_ball() {
        let ps = grid(-5.0, 5.0, 200);
        let fs: Vec<f64> = ps.iter().map(|p| p.abs()).collect();
        let vs = grid(-0.99, 0.99, 21);
        let out = legendre_conjugate(&ps, &fs, &vs, 1e-9).unwrap();
        for got in out {
            assert_abs_diff_eq!(got, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn double_transform_recovers_interior_samples() {
        let ps = grid(-5.0, 5.0, 256);
        let fs: Vec<f64> = ps.iter().map(|p| p * p).collect();
        let vs = grid(-12.0, 12.0, 1024);
        let conj = legendre_conjugate(&ps, &fs, &vs, 1e-9).unwrap();
        // Brute-force second sup back onto the interior of the primal grid.
        let back = legendre_conjugate(&vs, &conj, &ps[64..192], 1e-9).unwrap();
        let dp: f64 = 10.0 / 256.0;
        let interp_bound = dp * dp / 4.0;
        for (p, got) in ps[64..192].iter().zip(&back) {
            assert!(
                (got - p * p).abs() <= 2.0 * interp_bound + 1e-10,
                "p={p}: {got} vs {}",
                p * p
            );
        }
    }

    #[test]
    fn non_convex_input_is_rejected_with_the_triple() {
        let ps = vec![0.0, 1.0, 2.0, 3.0];
        let fs = vec![0.0, 1.5, 1.0, 3.0];
        match legendre_conjugate(&ps, &fs, &[0.0], 1e-9) {
            Err(Error::NonConvex { i0, i2, .. }) => {
                assert_eq!(i0, 0);
                assert_eq!(i2, 2);
            }
            other => panic!("expected NonConvex, got {other:?}"),
        }
    }
}
