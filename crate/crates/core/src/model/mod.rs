//! Hamiltonian/Lagrangian model definitions, analytic derivative evaluators,
//! numeric Legendre transforms, and assumption checkers.
//!
//! Two built-in families are provided:
//!
//! * quadratic:  H(I,x,p) = R(I,x) + |p|^2,  L(I,x,v) = |v|^2/4 - R(I,x)
//! * kernel:     H(I,x,p) = B(I,x) K(p) - D(I,x),
//!               L(I,x,v) = B K*(v/B) + D  (K* the conjugate of K)
//!
//! plus a custom kind whose p-dependence is a tabulated convex function.

mod assumptions;
mod kernel;
mod legendre;
mod tabulated;

pub use assumptions::{check_assumptions, AssumptionEntry, AssumptionReport, BoxSpec};
pub use kernel::MutationTransform;
pub use legendre::legendre_conjugate;
pub use tabulated::ConvexTable;

use crate::error::{Error, Result};
use crate::real::{as_f64, real, Real};

/// Growth rate of the quadratic family:
/// R(I, x) = a + b x_0 - curv |x - center|^2 - i_coeff I.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticGrowth<T: Real> {
    pub a: T,
    pub b: T,
    pub curv: T,
    pub center: T,
    pub i_coeff: T,
}

impl<T: Real> QuadraticGrowth<T> {
    pub fn eval(&self, i: T, x: &[T]) -> T {
        let mut r = self.a + self.b * x[0] - self.i_coeff * i;
        for &xa in x {
            let d = xa - self.center;
            r = r - self.curv * d * d;
        }
        r
    }

    pub fn d_x(&self, x: &[T], axis: usize) -> T {
        let two = real::<T>(2.0);
        let mut d = -two * self.curv * (x[axis] - self.center);
        if axis == 0 {
            d = d + self.b;
        }
        d
    }

    pub fn d_i(&self) -> T {
        -self.i_coeff
    }
}

/// Birth/death rates of the kernel family:
/// B(I, x) = amp exp(-width |x - center|^2) exp(-i_sens I) + floor,
/// D(I, x) = d_lin I + d_base.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelRates<T: Real> {
    pub amp: T,
    pub width: T,
    pub center: T,
    pub i_sens: T,
    pub floor: T,
    pub d_lin: T,
    pub d_base: T,
}

impl<T: Real> KernelRates<T> {
    fn gauss(&self, x: &[T]) -> T {
        let mut q = T::zero();
        for &xa in x {
            let d = xa - self.center;
            q = q + d * d;
        }
        (-self.width * q).exp()
    }

    pub fn birth(&self, i: T, x: &[T]) -> T {
        self.amp * self.gauss(x) * (-self.i_sens * i).exp() + self.floor
    }

    pub fn birth_d_i(&self, i: T, x: &[T]) -> T {
        -self.i_sens * self.amp * self.gauss(x) * (-self.i_sens * i).exp()
    }

    pub fn birth_d_x(&self, i: T, x: &[T], axis: usize) -> T {
        let core = self.amp * self.gauss(x) * (-self.i_sens * i).exp();
        -real::<T>(2.0) * self.width * (x[axis] - self.center) * core
    }

    pub fn death(&self, i: T) -> T {
        self.d_lin * i + self.d_base
    }

    pub fn death_d_i(&self) -> T {
        self.d_lin
    }
}

/// The super-linear lower-bound function Theta and its constant.
#[derive(Debug, Clone, PartialEq)]
enum ThetaSpec<T: Real> {
    /// Theta(r) = r^2 / 8 for the quadratic family.
    QuadraticBuiltin,
    /// Theta(r) = 1 + B_sup K*(r / B_sup) for the kernel family.
    KernelBuiltin { b_sup: T, transform: MutationTransform },
    /// Theta(r) = coeff r^exponent, supplied explicitly for custom models.
    Explicit { coeff: T, exponent: T },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelForm<T: Real> {
    Quadratic(QuadraticGrowth<T>),
    Kernel {
        rates: KernelRates<T>,
        transform: MutationTransform,
    },
    Custom {
        growth: QuadraticGrowth<T>,
        table: ConvexTable<T>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Quadratic,
    Kernel,
    CustomTabulated,
}

/// Validity box on which evaluations are accepted and assumptions sampled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidityBox<T: Real> {
    pub i_lo: T,
    pub i_hi: T,
    pub x_center: T,
    pub x_radius: T,
    pub pv_radius: T,
}

impl<T: Real> ValidityBox<T> {
    fn slack(hi: T) -> T {
        real::<T>(1e-9) * (T::one() + hi.abs())
    }
}

/// Value of H or L together with its partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeBundle<T: Real> {
    pub value: T,
    /// Derivative with respect to the multiplier I.
    pub d_i: T,
    /// Spatial gradient (length = dim; trailing entry unused in 1-d).
    pub d_x: [T; 2],
    /// Gradient in the momentum (for H) or velocity (for L) slot.
    pub d_pv: [T; 2],
}

/// A Hamiltonian/Lagrangian pair with derivative evaluators and the metadata
/// needed by the assumption checks. Immutable after construction; every
/// evaluator is a pure function, safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec<T: Real> {
    form: ModelForm<T>,
    theta: ThetaSpec<T>,
    c_theta: T,
    validity: ValidityBox<T>,
    dim: usize,
    symmetric: bool,
}

impl<T: Real> ModelSpec<T> {
    pub fn quadratic(growth: QuadraticGrowth<T>, validity: ValidityBox<T>, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        if growth.curv < T::zero() {
            return Err(Error::ModelInvalid(
                "quadratic growth needs curv >= 0".to_string(),
            ));
        }
        let mut spec = ModelSpec {
            symmetric: true,
            form: ModelForm::Quadratic(growth),
            theta: ThetaSpec::QuadraticBuiltin,
            c_theta: T::zero(),
            validity,
            dim,
        };
        // L = |v|^2/4 - R >= |v|^2/8 - C with C = sup R over the box.
        spec.c_theta = spec.sup_growth_over_box();
        Ok(spec)
    }

    pub fn kernel(
        rates: KernelRates<T>,
        transform: MutationTransform,
        validity: ValidityBox<T>,
        dim: usize,
    ) -> Result<Self> {
        check_dim(dim)?;
        let mut b_min = T::infinity();
        let mut b_sup = T::neg_infinity();
        let mut d_min = T::infinity();
        sample_box_1d(&validity, 129, 257, |i, x| {
            let b = rates.birth(i, &[x]);
            b_min = b_min.min(b);
            b_sup = b_sup.max(b);
            d_min = d_min.min(rates.death(i));
        });
        if !(b_min > T::zero()) {
            return Err(Error::ModelInvalid(format!(
                "kernel birth rate must be positive on the validity box (min {})",
                as_f64(b_min)
            )));
        }
        if d_min < T::zero() {
            return Err(Error::ModelInvalid(format!(
                "kernel death rate must be non-negative on the validity box (min {})",
                as_f64(d_min)
            )));
        }
        Ok(ModelSpec {
            form: ModelForm::Kernel { rates, transform },
            theta: ThetaSpec::KernelBuiltin { b_sup, transform },
            c_theta: T::one(),
            validity,
            dim,
            symmetric: true,
        })
    }

    pub fn custom(
        growth: QuadraticGrowth<T>,
        table: ConvexTable<T>,
        theta_coeff: T,
        theta_exponent: T,
        c_theta: T,
        validity: ValidityBox<T>,
    ) -> Result<Self> {
        table.check_convex(real(1e-9))?;
        if !(theta_exponent > T::one()) || !(theta_coeff > T::zero()) {
            return Err(Error::ModelInvalid(
                "custom models need a super-linear Theta: coeff > 0, exponent > 1".to_string(),
            ));
        }
        let symmetric = {
            let p0 = table.argmin_abscissa();
            p0.abs() <= real(1e-9)
        };
        Ok(ModelSpec {
            form: ModelForm::Custom { growth, table },
            theta: ThetaSpec::Explicit {
                coeff: theta_coeff,
                exponent: theta_exponent,
            },
            c_theta,
            validity,
            dim: 1,
            symmetric,
        })
    }

    /// R(I,x) = 1 - I - x^2 on a generous box; handy in tests. The I-box
    /// covers the default root-find bracket.
    pub fn quadratic_example() -> Self {
        ModelSpec::quadratic(
            QuadraticGrowth {
                a: T::one(),
                b: T::zero(),
                curv: T::one(),
                center: T::zero(),
                i_coeff: T::one(),
            },
            ValidityBox {
                i_lo: T::zero(),
                i_hi: real(12.0),
                x_center: T::zero(),
                x_radius: real(16.0),
                pv_radius: real(64.0),
            },
            1,
        )
        .expect("example model is valid")
    }

    pub fn kind(&self) -> ModelKind {
        match self.form {
            ModelForm::Quadratic(_) => ModelKind::Quadratic,
            ModelForm::Kernel { .. } => ModelKind::Kernel,
            ModelForm::Custom { .. } => ModelKind::CustomTabulated,
        }
    }

    pub fn form(&self) -> &ModelForm<T> {
        &self.form
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn validity(&self) -> &ValidityBox<T> {
        &self.validity
    }

    /// Whether H(I,x,.) is even, which implies the rest-velocity-minimum
    /// property of L.
    pub fn symmetric(&self) -> bool {
        self.symmetric
    }

    /// The super-linear lower-bound function.
    pub fn theta(&self, r: T) -> T {
        match &self.theta {
            ThetaSpec::QuadraticBuiltin => r * r / real(8.0),
            ThetaSpec::KernelBuiltin { b_sup, transform } => {
                T::one() + *b_sup * transform.conjugate(r.abs() / *b_sup).0
            }
            ThetaSpec::Explicit { coeff, exponent } => *coeff * r.abs().powf(*exponent),
        }
    }

    pub fn c_theta(&self) -> T {
        self.c_theta
    }

    /// Momentum at which H(I,x,.) attains its minimum (I,x-independent for
    /// every supported form).
    pub fn argmin_p(&self) -> T {
        match &self.form {
            ModelForm::Quadratic(_) | ModelForm::Kernel { .. } => T::zero(),
            ModelForm::Custom { table, .. } => table.argmin_abscissa(),
        }
    }

    /// If dL/dI is a constant q (growth linear in the multiplier), returns
    /// it. Steppers built from such models satisfy, exactly,
    /// u+(I) = u+(I0) + dt q (I - I0), which the constraint engine exploits.
    pub fn multiplier_linearity(&self) -> Option<T> {
        match &self.form {
            ModelForm::Quadratic(g) | ModelForm::Custom { growth: g, .. } => Some(g.i_coeff),
            ModelForm::Kernel { .. } => None,
        }
    }

    /// Coefficients (alpha, beta) with |d_x L| <= alpha + beta L on the box
    /// restricted to |x - x_center| <= k.
    pub fn dx_bound_coeffs(&self, k: T) -> (T, T) {
        let pad = real::<T>(1.05);
        match &self.form {
            ModelForm::Quadratic(g) | ModelForm::Custom { growth: g, .. } => {
                let reach = k + (self.validity.x_center - g.center).abs();
                (pad * (g.b.abs() + real::<T>(2.0) * g.curv * reach), T::zero())
            }
            ModelForm::Kernel { rates, .. } => {
                // |d_x L| = |d_x B| K(p*) <= |d_x ln B| (2B + L - D) with D >= 0.
                let mut s_logb = T::zero();
                let mut b_sup = T::neg_infinity();
                let vb = ValidityBox {
                    x_radius: k,
                    ..self.validity
                };
                sample_box_1d(&vb, 65, 513, |i, x| {
                    let b = rates.birth(i, &[x]);
                    let bx = rates.birth_d_x(i, &[x], 0);
                    s_logb = s_logb.max((bx / b).abs());
                    b_sup = b_sup.max(b);
                });
                (
                    pad * (real::<T>(2.0) * b_sup * s_logb),
                    pad * s_logb,
                )
            }
        }
    }

    /// sup over the validity I-range and [x_lo, x_hi] of |L(I, x, 0)|.
    pub fn sup_abs_resting_cost(&self, x_lo: T, x_hi: T) -> T {
        let mut sup = T::zero();
        let vb = ValidityBox {
            x_center: (x_lo + x_hi) / real(2.0),
            x_radius: (x_hi - x_lo) / real(2.0),
            ..self.validity
        };
        sample_box_1d(&vb, 65, 513, |i, x| {
            sup = sup.max(self.resting_cost(i, x).abs());
        });
        sup
    }

    fn resting_cost(&self, i: T, x: T) -> T {
        match &self.form {
            ModelForm::Quadratic(g) => -g.eval(i, &[x]),
            ModelForm::Kernel { rates, .. } => rates.death(i) - rates.birth(i, &[x]),
            ModelForm::Custom { growth, table } => {
                table.conjugate_at(T::zero()).0 - growth.eval(i, &[x])
            }
        }
    }

    fn sup_growth_over_box(&self) -> T {
        let mut sup = T::neg_infinity();
        sample_box_1d(&self.validity, 129, 513, |i, x| {
            if let ModelForm::Quadratic(g) = &self.form {
                sup = sup.max(g.eval(i, &[x]));
            }
        });
        sup
    }

    fn check_box(&self, i: T, x: &[T], pv: &[T], pv_name: &'static str) -> Result<()> {
        let vb = &self.validity;
        let si = ValidityBox::<T>::slack(vb.i_hi);
        if i < vb.i_lo - si || i > vb.i_hi + si {
            return Err(Error::OutOfBox {
                quantity: "I",
                value: as_f64(i),
                lo: as_f64(vb.i_lo),
                hi: as_f64(vb.i_hi),
            });
        }
        let sx = ValidityBox::<T>::slack(vb.x_radius);
        for &xa in x.iter().take(self.dim) {
            if (xa - vb.x_center).abs() > vb.x_radius + sx {
                return Err(Error::OutOfBox {
                    quantity: "x",
                    value: as_f64(xa),
                    lo: as_f64(vb.x_center - vb.x_radius),
                    hi: as_f64(vb.x_center + vb.x_radius),
                });
            }
        }
        let sp = ValidityBox::<T>::slack(vb.pv_radius);
        for &pa in pv.iter().take(self.dim) {
            if pa.abs() > vb.pv_radius + sp {
                return Err(Error::OutOfBox {
                    quantity: pv_name,
                    value: as_f64(pa),
                    lo: as_f64(-vb.pv_radius),
                    hi: as_f64(vb.pv_radius),
                });
            }
        }
        Ok(())
    }

    /// H with its partial derivatives, by the analytic formulas of the form.
    pub fn eval_hamiltonian(&self, i: T, x: &[T], p: &[T]) -> Result<DerivativeBundle<T>> {
        self.check_box(i, x, p, "p")?;
        let dim = self.dim;
        let mut d_x = [T::zero(); 2];
        let mut d_pv = [T::zero(); 2];
        match &self.form {
            ModelForm::Quadratic(g) => {
                let mut p2 = T::zero();
                for &pa in p.iter().take(dim) {
                    p2 = p2 + pa * pa;
                }
                for a in 0..dim {
                    d_x[a] = g.d_x(x, a);
                    d_pv[a] = real::<T>(2.0) * p[a];
                }
                Ok(DerivativeBundle {
                    value: g.eval(i, x) + p2,
                    d_i: g.d_i(),
                    d_x,
                    d_pv,
                })
            }
            ModelForm::Kernel { rates, transform } => {
                let mut p2 = T::zero();
                for &pa in p.iter().take(dim) {
                    p2 = p2 + pa * pa;
                }
                let s = p2.sqrt();
                let kv = transform.k(s);
                let b = rates.birth(i, x);
                // radial chain rule: dK/dp_a = p_a k'(s)/s = p_a e^{s^2/2}.
                for a in 0..dim {
                    d_x[a] = rates.birth_d_x(i, x, a) * kv;
                    d_pv[a] = b * p[a] * kv;
                }
                Ok(DerivativeBundle {
                    value: b * kv - rates.death(i),
                    d_i: rates.birth_d_i(i, x) * kv - rates.death_d_i(),
                    d_x,
                    d_pv,
                })
            }
            ModelForm::Custom { growth, table } => {
                let (phi, slope) = table.eval(p[0])?;
                d_x[0] = growth.d_x(x, 0);
                d_pv[0] = slope;
                Ok(DerivativeBundle {
                    value: growth.eval(i, x) + phi,
                    d_i: growth.d_i(),
                    d_x,
                    d_pv,
                })
            }
        }
    }

    /// L with its partial derivatives (closed forms for built-in kinds, the
    /// tabulated conjugate for custom models).
    pub fn eval_lagrangian(&self, i: T, x: &[T], v: &[T]) -> Result<DerivativeBundle<T>> {
        self.check_box(i, x, v, "v")?;
        let dim = self.dim;
        let mut d_x = [T::zero(); 2];
        let mut d_pv = [T::zero(); 2];
        match &self.form {
            ModelForm::Quadratic(g) => {
                let mut v2 = T::zero();
                for &va in v.iter().take(dim) {
                    v2 = v2 + va * va;
                }
                for a in 0..dim {
                    d_x[a] = -g.d_x(x, a);
                    d_pv[a] = v[a] / real(2.0);
                }
                Ok(DerivativeBundle {
                    value: v2 / real(4.0) - g.eval(i, x),
                    d_i: g.i_coeff,
                    d_x,
                    d_pv,
                })
            }
            ModelForm::Kernel { rates, transform } => {
                let b = rates.birth(i, x);
                if !(b > T::zero()) {
                    return Err(Error::ModelInvalid(format!(
                        "kernel birth rate non-positive at I={}, x={}",
                        as_f64(i),
                        as_f64(x[0])
                    )));
                }
                let mut v2 = T::zero();
                for &va in v.iter().take(dim) {
                    v2 = v2 + va * va;
                }
                let speed = v2.sqrt();
                let w = speed / b;
                let (ell, p_star) = transform.conjugate(w);
                // K(p*) = p* w - ell by Fenchel equality.
                let k_at_pstar = p_star * w - ell;
                for a in 0..dim {
                    let dir = if speed > T::zero() {
                        v[a] / speed
                    } else {
                        T::zero()
                    };
                    d_pv[a] = p_star * dir;
                    d_x[a] = -rates.birth_d_x(i, x, a) * k_at_pstar;
                }
                Ok(DerivativeBundle {
                    value: b * ell + rates.death(i),
                    d_i: -rates.birth_d_i(i, x) * k_at_pstar + rates.death_d_i(),
                    d_x,
                    d_pv,
                })
            }
            ModelForm::Custom { growth, table } => {
                let (phi_star, p_star) = table.conjugate_at(v[0]);
                d_x[0] = -growth.d_x(x, 0);
                d_pv[0] = p_star;
                Ok(DerivativeBundle {
                    value: phi_star - growth.eval(i, x),
                    d_i: growth.i_coeff,
                    d_x,
                    d_pv,
                })
            }
        }
    }

    /// Fast path: H value only, 1-d.
    #[inline]
    pub fn h_value_1d(&self, i: T, x: T, p: T) -> Result<T> {
        Ok(self.eval_hamiltonian(i, &[x], &[p])?.value)
    }

    /// Fast path: dH/dp, 1-d.
    #[inline]
    pub fn dp_h_1d(&self, i: T, x: T, p: T) -> Result<T> {
        Ok(self.eval_hamiltonian(i, &[x], &[p])?.d_pv[0])
    }

    /// Fast path: L value only, 1-d. Skips derivative work in the hot loop.
    #[inline]
    pub fn l_value_1d(&self, i: T, x: T, v: T) -> Result<T> {
        self.check_box(i, &[x], &[v], "v")?;
        match &self.form {
            ModelForm::Quadratic(g) => Ok(v * v / real(4.0) - g.eval(i, &[x])),
            ModelForm::Kernel { rates, transform } => {
                let b = rates.birth(i, &[x]);
                if !(b > T::zero()) {
                    return Err(Error::ModelInvalid(format!(
                        "kernel birth rate non-positive at I={}, x={}",
                        as_f64(i),
                        as_f64(x)
                    )));
                }
                let (ell, _) = transform.conjugate(v.abs() / b);
                Ok(b * ell + rates.death(i))
            }
            ModelForm::Custom { growth, table } => {
                Ok(table.conjugate_at(v).0 - growth.eval(i, &[x]))
            }
        }
    }

    /// L value with no validity-box checks, for inner loops whose argument
    /// ranges were validated up front (birth rate positivity included).
    #[inline]
    pub(crate) fn l_value_1d_unchecked(&self, i: T, x: T, v: T) -> T {
        match &self.form {
            ModelForm::Quadratic(g) => v * v / real(4.0) - g.eval(i, &[x]),
            ModelForm::Kernel { rates, transform } => {
                let b = rates.birth(i, &[x]);
                let (ell, _) = transform.conjugate(v.abs() / b);
                b * ell + rates.death(i)
            }
            ModelForm::Custom { growth, table } => {
                table.conjugate_at(v).0 - growth.eval(i, &[x])
            }
        }
    }

    /// One-shot range validation for hot loops: the multiplier, an x
    /// interval, and a symmetric p/v radius.
    pub(crate) fn validate_ranges(&self, i: T, x_lo: T, x_hi: T, pv_max: T) -> Result<()> {
        self.check_box(i, &[x_lo], &[pv_max], "v")?;
        self.check_box(i, &[x_hi], &[-pv_max], "v")?;
        Ok(())
    }

    /// H value with no validity-box checks, same contract as above.
    #[inline]
    pub(crate) fn h_value_1d_unchecked(&self, i: T, x: T, p: T) -> T {
        match &self.form {
            ModelForm::Quadratic(g) => g.eval(i, &[x]) + p * p,
            ModelForm::Kernel { rates, transform } => {
                rates.birth(i, &[x]) * transform.k(p.abs()) - rates.death(i)
            }
            ModelForm::Custom { growth, table } => {
                let phi = table.eval(p).map(|(v, _)| v).unwrap_or_else(|_| {
                    // outside the table: extend by the end slopes
                    let ps = &table.abscissae;
                    let fs = &table.values;
                    let n = ps.len();
                    if p < ps[0] {
                        let s = (fs[1] - fs[0]) / (ps[1] - ps[0]);
                        fs[0] + s * (p - ps[0])
                    } else {
                        let s = (fs[n - 1] - fs[n - 2]) / (ps[n - 1] - ps[n - 2]);
                        fs[n - 1] + s * (p - ps[n - 1])
                    }
                });
                growth.eval(i, &[x]) + phi
            }
        }
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 1 || dim == 2 {
        Ok(())
    } else {
        Err(Error::Config(format!("model dim must be 1 or 2, got {dim}")))
    }
}

/// Samples (I, x) over the box with the given lattice sizes. 1-d in x.
fn sample_box_1d<T: Real>(
    vb: &ValidityBox<T>,
    n_i: usize,
    n_x: usize,
    mut f: impl FnMut(T, T),
) {
    for ii in 0..n_i {
        let ti = real::<T>(ii as f64 / (n_i - 1) as f64);
        let i = vb.i_lo + (vb.i_hi - vb.i_lo) * ti;
        for ix in 0..n_x {
            let tx = real::<T>(ix as f64 / (n_x - 1) as f64);
            let x = vb.x_center - vb.x_radius + (vb.x_radius + vb.x_radius) * tx;
            f(i, x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn wide_box() -> ValidityBox<f64> {
        ValidityBox {
            i_lo: 0.0,
            i_hi: 3.0,
            x_center: 0.0,
            x_radius: 16.0,
            pv_radius: 64.0,
        }
    }

    fn gaussian_kernel_model() -> ModelSpec<f64> {
        ModelSpec::kernel(
            KernelRates {
                amp: 1.0,
                width: 1.0,
                center: 0.0,
                i_sens: 1.0,
                floor: 0.1,
                d_lin: 1.0,
                d_base: 0.0,
            },
            MutationTransform::Gaussian,
            wide_box(),
            1,
        )
        .unwrap()
    }

    fn unit_kernel_model() -> ModelSpec<f64> {
        // B = 1, D = 0: H = K(p), L = K*(v).
        ModelSpec::kernel(
            KernelRates {
                amp: 0.0,
                width: 0.0,
                center: 0.0,
                i_sens: 0.0,
                floor: 1.0,
                d_lin: 0.0,
                d_base: 0.0,
            },
            MutationTransform::Gaussian,
            wide_box(),
            1,
        )
        .unwrap()
    }

    #[test]
    fn quadratic_hamiltonian_at_the_fitness_zero() {
        // R(1, 0) = 1 - 1 - 0 = 0, p = 0.
        let m = ModelSpec::<f64>::quadratic_example();
        let h = m.eval_hamiltonian(1.0, &[0.0], &[0.0]).unwrap();
        assert_abs_diff_eq!(h.value, 0.0);
        assert_abs_diff_eq!(h.d_i, -1.0);
    }

    #[test]
    fn unit_kernel_hamiltonian_at_zero_momentum() {
        let m = unit_kernel_model();
        let h = m.eval_hamiltonian(0.0, &[0.0], &[0.0]).unwrap();
        assert_abs_diff_eq!(h.value, 1.0); // K(0) = 1 for a p.d.f.
    }

    #[test]
    fn quadratic_hamiltonian_is_squared_momentum_without_growth() {
        let m = ModelSpec::quadratic(
            QuadraticGrowth {
                a: 0.0,
                b: 0.0,
                curv: 0.0,
                center: 0.0,
                i_coeff: 0.0,
            },
            wide_box(),
            1,
        )
        .unwrap();
        let h = m.eval_hamiltonian(0.0, &[0.3], &[2.0]).unwrap();
        assert_abs_diff_eq!(h.value, 4.0);
    }

    #[test]
    fn quadratic_lagrangian_without_growth() {
        let m = ModelSpec::quadratic(
            QuadraticGrowth {
                a: 0.0,
                b: 0.0,
                curv: 0.0,
                center: 0.0,
                i_coeff: 0.0,
            },
            wide_box(),
            1,
        )
        .unwrap();
        let l = m.eval_lagrangian(0.0, &[0.0], &[2.0]).unwrap();
        assert_abs_diff_eq!(l.value, 1.0); // |v|^2 / 4
    }

    #[test]
    fn symmetric_models_have_zero_velocity_gradient_at_rest() {
        for m in [
            ModelSpec::<f64>::quadratic_example(),
            gaussian_kernel_model(),
        ] {
            let l = m.eval_lagrangian(1.0, &[0.5], &[0.0]).unwrap();
            assert_abs_diff_eq!(l.d_pv[0], 0.0);
            assert!(m.symmetric());
        }
    }

    #[test]
    fn unit_kernel_lagrangian_matches_root_find_oracle() {
        // Independent oracle: bisection on p e^{p^2/2} = v, then
        // L(v) = p* v - K(p*).
        let m = unit_kernel_model();
        let v = 1.0f64;
        let (mut lo, mut hi) = (0.0f64, 4.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * (mid * mid / 2.0).exp() < v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let p_star = 0.5 * (lo + hi);
        let expected = p_star * v - (p_star * p_star / 2.0).exp();
        let l = m.eval_lagrangian(0.0, &[0.0], &[v]).unwrap();
        assert_abs_diff_eq!(l.value, expected, epsilon = 1e-12);
    }

    #[test]
    fn out_of_box_evaluation_names_the_coordinate() {
        let m = ModelSpec::<f64>::quadratic_example();
        match m.eval_hamiltonian(20.0, &[0.0], &[0.0]) {
            Err(Error::OutOfBox { quantity, .. }) => assert_eq!(quantity, "I"),
            other => panic!("expected OutOfBox on I, got {other:?}"),
        }
        match m.eval_hamiltonian(1.0, &[40.0], &[0.0]) {
            Err(Error::OutOfBox { quantity, .. }) => assert_eq!(quantity, "x"),
            other => panic!("expected OutOfBox on x, got {other:?}"),
        }
    }

    #[test]
    fn gradients_match_central_differences_at_second_order() {
        // Observed convergence order on a halving sequence must be >= 1.8.
        let models = [ModelSpec::<f64>::quadratic_example(), gaussian_kernel_model()];
        for m in &models {
            let (i0, x0, p0) = (1.0, 0.7, 0.9);
            let exact = m.eval_hamiltonian(i0, &[x0], &[p0]).unwrap();
            let err = |h: f64| {
                let di = (m.h_value_1d(i0 + h, x0, p0).unwrap()
                    - m.h_value_1d(i0 - h, x0, p0).unwrap())
                    / (2.0 * h);
                let dx = (m.h_value_1d(i0, x0 + h, p0).unwrap()
                    - m.h_value_1d(i0, x0 - h, p0).unwrap())
                    / (2.0 * h);
                let dp = (m.h_value_1d(i0, x0, p0 + h).unwrap()
                    - m.h_value_1d(i0, x0, p0 - h).unwrap())
                    / (2.0 * h);
                (di - exact.d_i)
                    .abs()
                    .max((dx - exact.d_x[0]).abs())
                    .max((dp - exact.d_pv[0]).abs())
            };
            let (e1, e2) = (err(1e-2), err(5e-3));
            if e1 > 1e-12 {
                let order = (e1 / e2).log2();
                assert!(order >= 1.8, "observed order {order} too low (e1={e1}, e2={e2})");
            }
            // Same for the Lagrangian side.
            let exact_l = m.eval_lagrangian(i0, &[x0], &[p0]).unwrap();
            let err_l = |h: f64| {
                let di = (m.l_value_1d(i0 + h, x0, p0).unwrap()
                    - m.l_value_1d(i0 - h, x0, p0).unwrap())
                    / (2.0 * h);
                let dv = (m.l_value_1d(i0, x0, p0 + h).unwrap()
                    - m.l_value_1d(i0, x0, p0 - h).unwrap())
                    / (2.0 * h);
                (di - exact_l.d_i).abs().max((dv - exact_l.d_pv[0]).abs())
            };
            let (e1, e2) = (err_l(1e-2), err_l(5e-3));
            if e1 > 1e-12 {
                let order = (e1 / e2).log2();
                assert!(order >= 1.8, "lagrangian order {order} too low");
            }
        }
    }

    #[test]
    fn dual_gradients_are_reciprocal() {
        let models = [ModelSpec::<f64>::quadratic_example(), gaussian_kernel_model()];
        for m in &models {
            for k in 0..64 {
                let v = -6.0 + 12.0 * (k as f64 + 0.5) / 64.0;
                let l = m.eval_lagrangian(1.0, &[0.4], &[v]).unwrap();
                let h = m.eval_hamiltonian(1.0, &[0.4], &[l.d_pv[0]]).unwrap();
                assert_abs_diff_eq!(h.d_pv[0], v, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn fenchel_young_holds_with_equality_at_dual_pairs() {
        let models = [ModelSpec::<f64>::quadratic_example(), gaussian_kernel_model()];
        for m in &models {
            for ip in 0..24 {
                let p = -3.0 + 6.0 * ip as f64 / 23.0;
                for iv in 0..24 {
                    let v = -6.0 + 12.0 * iv as f64 / 23.0;
                    let h = m.eval_hamiltonian(1.0, &[0.2], &[p]).unwrap();
                    let l = m.eval_lagrangian(1.0, &[0.2], &[v]).unwrap();
                    assert!(h.value + l.value >= p * v - 1e-10);
                }
            }
            // Equality at dual pairs, with p small enough that the dual
            // velocity stays inside the validity box.
            for ip in 0..24 {
                let p = -2.0 + 4.0 * ip as f64 / 23.0;
                let h = m.eval_hamiltonian(1.0, &[0.2], &[p]).unwrap();
                let v_dual = h.d_pv[0];
                let l = m.eval_lagrangian(1.0, &[0.2], &[v_dual]).unwrap();
                assert_abs_diff_eq!(h.value + l.value, p * v_dual, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn numeric_conjugate_of_h_matches_analytic_lagrangian() {
        let models = [ModelSpec::<f64>::quadratic_example(), gaussian_kernel_model()];
        for m in &models {
            let (i0, x0) = (1.0, 0.3);
            let n = 1024;
            let pr = 6.0;
            let ps: Vec<f64> = (0..=n).map(|k| -pr + 2.0 * pr * k as f64 / n as f64).collect();
            let fs: Vec<f64> = ps.iter().map(|&p| m.h_value_1d(i0, x0, p).unwrap()).collect();
            let vs: Vec<f64> = (0..=40).map(|k| -4.0 + 8.0 * k as f64 / 40.0).collect();
            let conj = legendre_conjugate(&ps, &fs, &vs, 1e-9).unwrap();
            // Interpolation bound: (dp)^2/8 * sup |H''| over the sample range.
            let dp = 2.0 * pr / n as f64;
            let hpp_sup: f64 = match m.kind() {
                ModelKind::Quadratic => 2.0,
                _ => (1.0 + pr * pr) * (pr * pr / 2.0f64).exp() * 1.2,
            };
            let bound = dp * dp / 8.0 * hpp_sup;
            for (v, got) in vs.iter().zip(&conj) {
                let exact = m.l_value_1d(i0, x0, *v).unwrap();
                assert!(
                    (got - exact).abs() <= 2.0 * bound + 1e-9,
                    "v={v}: {got} vs {exact} (bound {bound})"
                );
            }
        }
    }

    #[test]
    fn custom_tabulated_model_mimics_the_quadratic_family() {
        let n = 2048;
        let ps: Vec<f64> = (0..=n).map(|k| -8.0 + 16.0 * k as f64 / n as f64).collect();
        let vals: Vec<f64> = ps.iter().map(|p| p * p).collect();
        let table = ConvexTable::new(ps, vals).unwrap();
        let growth = QuadraticGrowth {
            a: 1.0,
            b: 0.0,
            curv: 1.0,
            center: 0.0,
            i_coeff: 1.0,
        };
        let m = ModelSpec::custom(growth, table, 0.125, 2.0, 1.0, wide_box()).unwrap();
        let reference = ModelSpec::<f64>::quadratic_example();
        for &(i, x, v) in &[(1.0, 0.0, 0.0), (0.5, 1.0, 2.0), (2.0, -1.5, -3.0)] {
            let got = m.eval_lagrangian(i, &[x], &[v]).unwrap().value;
            let exact = reference.eval_lagrangian(i, &[x], &[v]).unwrap().value;
            assert_abs_diff_eq!(got, exact, epsilon = 3e-4);
        }
    }

    #[test]
    fn two_dimensional_quadratic_evaluations() {
        let mut vb = wide_box();
        vb.pv_radius = 8.0;
        let m = ModelSpec::quadratic(
            QuadraticGrowth {
                a: 1.0,
                b: 0.0,
                curv: 1.0,
                center: 0.0,
                i_coeff: 1.0,
            },
            vb,
            2,
        )
        .unwrap();
        let h = m.eval_hamiltonian(1.0, &[0.0, 0.0], &[1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(h.value, 5.0); // R = 0, |p|^2 = 5
        let l = m.eval_lagrangian(1.0, &[0.0, 0.0], &[2.0, 2.0]).unwrap();
        assert_abs_diff_eq!(l.value, 2.0); // |v|^2/4 - 0
    }
}
