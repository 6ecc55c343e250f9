//! Tabulated convex functions loaded from two-column text files.

use crate::error::{Error, Result};
use crate::real::{as_f64, real, Real};

/// Samples of a convex scalar function on strictly increasing abscissae.
/// Evaluation is piecewise linear; the conjugate is the exact discrete sup.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexTable<T: Real> {
    pub abscissae: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Real> ConvexTable<T> {
    pub fn new(abscissae: Vec<T>, values: Vec<T>) -> Result<Self> {
        if abscissae.len() != values.len() {
            return Err(Error::Parse(format!(
                "table columns differ in length: {} vs {}",
                abscissae.len(),
                values.len()
            )));
        }
        if abscissae.len() < 3 {
            return Err(Error::Parse(
                "table needs at least 3 rows".to_string(),
            ));
        }
        for w in abscissae.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Parse(format!(
                    "table abscissae must be strictly increasing, got {} then {}",
                    as_f64(w[0]),
                    as_f64(w[1])
                )));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse("table values must be finite".to_string()));
        }
        Ok(ConvexTable { abscissae, values })
    }

    /// Parses the two-column text format: one `abscissa value` pair per line,
    /// blank lines and `#` comments ignored.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut ps = Vec::new();
        let mut vs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let mut parts = body.split_whitespace();
            let (a, b) = (parts.next(), parts.next());
            if parts.next().is_some() {
                return Err(Error::Parse(format!(
                    "line {}: expected two columns, got more",
                    lineno + 1
                )));
            }
            match (a, b) {
                (Some(a), Some(b)) => {
                    let pa: f64 = a.parse().map_err(|_| {
                        Error::Parse(format!("line {}: bad number {a:?}", lineno + 1))
                    })?;
                    let pb: f64 = b.parse().map_err(|_| {
                        Error::Parse(format!("line {}: bad number {b:?}", lineno + 1))
                    })?;
                    ps.push(real(pa));
                    vs.push(real(pb));
                }
                _ => {
                    return Err(Error::Parse(format!(
                        "line {}: expected two columns",
                        lineno + 1
                    )))
                }
            }
        }
        ConvexTable::new(ps, vs)
    }

    /// Verifies discrete convexity: successive slopes may not decrease by
    /// more than `tol`. On failure the offending triple is reported.
    pub fn check_convex(&self, tol: T) -> Result<()> {
        for k in 1..self.abscissae.len() - 1 {
            let s_prev = self.slope(k - 1);
            let s_next = self.slope(k);
            if s_next - s_prev < -tol {
                return Err(Error::NonConvex {
                    i0: k - 1,
                    i1: k,
                    i2: k + 1,
                    f0: as_f64(self.values[k - 1]),
                    f1: as_f64(self.values[k]),
                    f2: as_f64(self.values[k + 1]),
                    second_diff: as_f64(s_next - s_prev),
                    tol: as_f64(tol),
                });
            }
        }
        Ok(())
    }

    fn slope(&self, segment: usize) -> T {
        (self.values[segment + 1] - self.values[segment])
            / (self.abscissae[segment + 1] - self.abscissae[segment])
    }

    /// Piecewise-linear value and slope at `p`. Out-of-range is an error.
    pub fn eval(&self, p: T) -> Result<(T, T)> {
        let lo = self.abscissae[0];
        let hi = *self.abscissae.last().unwrap();
        if p < lo || p > hi {
            return Err(Error::OutOfBox {
                quantity: "p",
                value: as_f64(p),
                lo: as_f64(lo),
                hi: as_f64(hi),
            });
        }
        let seg = match self
            .abscissae
            .binary_search_by(|a| a.partial_cmp(&p).unwrap())
        {
            Ok(i) => i.min(self.abscissae.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.abscissae.len() - 2),
        };
        let s = self.slope(seg);
        Ok((self.values[seg] + s * (p - self.abscissae[seg]), s))
    }

    /// Exact discrete sup transform at `v`: max_i (v p_i - f_i), returned as
    /// (value, maximizing abscissa).
    pub fn conjugate_at(&self, v: T) -> (T, T) {
        let mut best = v * self.abscissae[0] - self.values[0];
        let mut arg = self.abscissae[0];
        for (p, f) in self.abscissae.iter().zip(&self.values).skip(1) {
            let cand = v * *p - *f;
            if cand > best {
                best = cand;
                arg = *p;
            }
        }
        (best, arg)
    }

    pub fn argmin_abscissa(&self) -> T {
        let mut best = self.values[0];
        let mut arg = self.abscissae[0];
        for (p, f) in self.abscissae.iter().zip(&self.values).skip(1) {
            if *f < best {
                best = *f;
                arg = *p;
            }
        }
        arg
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn square_table(n: usize) -> ConvexTable<f64> {
        let ps: Vec<f64> = (0..=n).map(|i| -5.0 + 10.0 * i as f64 / n as f64).collect();
        let vs: Vec<f64> = ps.iter().map(|p| p * p).collect();
        ConvexTable::new(ps, vs).unwrap()
    }

    #[test]
    fn parses_two_column_text() {
        let t = ConvexTable::<f64>::from_text("# comment\n-1 1\n0 0 # inline\n\n1 1\n").unwrap();
        assert_eq!(t.abscissae, vec![-1.0, 0.0, 1.0]);
        assert_eq!(t.values, vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn rejects_unsorted_abscissae() {
        assert!(ConvexTable::<f64>::from_text("0 0\n1 1\n1 2\n").is_err());
    }

    #[test]
    fn convexity_violation_reports_the_triple() {
        let t = ConvexTable::new(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 1.0]).unwrap();
        match t.check_convex(1e-9) {
            Err(Error::NonConvex { i0, i1, i2, .. }) => {
                assert_eq!((i0, i1, i2), (0, 1, 2));
            }
            other => panic!("expected NonConvex, got {other:?}"),
        }
    }

    #[test]
    fn conjugate_of_square_is_quarter_square() {
        let t = square_table(512);
        for &v in &[-4.0, -1.3, 0.0, 0.7, 3.9] {
            let (val, _) = t.conjugate_at(v);
            assert_abs_diff_eq!(val, v * v / 4.0, epsilon = (10.0 / 512.0f64).powi(2));
        }
    }

    #[test]
    fn eval_interpolates_and_bounds_check() {
        let t = square_table(100);
        let (v, s) = t.eval(1.0).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-2);
        assert_abs_diff_eq!(s, 2.0, epsilon = 0.11);
        assert!(t.eval(5.5).is_err());
    }
}
