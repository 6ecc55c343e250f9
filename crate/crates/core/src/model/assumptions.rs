//! Sampled verification of the structural conditions the solvers rely on:
//! convexity and super-linearity in the momentum/velocity slot, strict
//! monotonicity in the multiplier, the spatial-derivative envelope, the
//! rest-velocity minimum, and the conjugate growth bound for kernel models.

use serde::Serialize;

use crate::error::Result;
use crate::model::{ModelKind, ModelSpec};
use crate::real::{as_f64, real, Real};

/// Sample box for the checks: an I-interval, an x-ball, and a p/v-ball.
#[derive(Debug, Clone, Copy)]
pub struct BoxSpec<T: Real> {
    pub i_lo: T,
    pub i_hi: T,
    pub x_center: T,
    pub x_radius: T,
    pub pv_radius: T,
    /// Lattice density per axis.
    pub samples: usize,
}

impl<T: Real> BoxSpec<T> {
    pub fn from_model(model: &ModelSpec<T>) -> Self {
        let v = model.validity();
        BoxSpec {
            i_lo: v.i_lo,
            i_hi: v.i_hi,
            x_center: v.x_center,
            x_radius: v.x_radius,
            pv_radius: v.pv_radius,
            samples: 64,
        }
    }
}

/// Worst sampled point of one check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Witness {
    pub i: f64,
    pub x: f64,
    pub pv: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionEntry {
    pub name: &'static str,
    /// None when the check does not apply to this model kind.
    pub passed: Option<bool>,
    /// Failures here block time stepping; soft checks only gate diagnostics.
    pub hard: bool,
    pub tolerance: f64,
    pub worst: Witness,
    pub note: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    pub entries: Vec<AssumptionEntry>,
    /// Which multiplier interval the box used, e.g. "[0, J]" or "[-J, J]".
    pub i_interval: String,
}

impl AssumptionReport {
    pub fn hard_failures(&self) -> Vec<&AssumptionEntry> {
        self.entries
            .iter()
            .filter(|e| e.hard && e.passed == Some(false))
            .collect()
    }

    pub fn passed(&self, name: &str) -> Option<bool> {
        self.entries.iter().find(|e| e.name == name).and_then(|e| e.passed)
    }
}

struct Extremum<T: Real> {
    value: T,
    at: (T, T, T),
}

impl<T: Real> Extremum<T> {
    fn min() -> Self {
        Extremum { value: T::infinity(), at: (T::zero(), T::zero(), T::zero()) }
    }
    fn max() -> Self {
        Extremum { value: T::neg_infinity(), at: (T::zero(), T::zero(), T::zero()) }
    }
    fn take_min(&mut self, v: T, at: (T, T, T)) {
        if v < self.value {
            self.value = v;
            self.at = at;
        }
    }
    fn take_max(&mut self, v: T, at: (T, T, T)) {
        if v > self.value {
            self.value = v;
            self.at = at;
        }
    }
    fn witness(&self) -> Witness {
        Witness {
            i: as_f64(self.at.0),
            x: as_f64(self.at.1),
            pv: as_f64(self.at.2),
            value: as_f64(self.value),
        }
    }
}

/// Runs every applicable check on a sample lattice over the box. Failures are
/// report entries, never errors.
pub fn check_assumptions<T: Real>(
    model: &ModelSpec<T>,
    spec: &BoxSpec<T>,
) -> Result<AssumptionReport> {
    let n = spec.samples.max(8);
    let lin = |lo: T, hi: T, k: usize| lo + (hi - lo) * real::<T>(k as f64 / (n - 1) as f64);
    let tol: T = real::<T>(1e-9) * (T::one() + spec.pv_radius.abs());
    let fd_h: T = real::<T>(1e-4) * (T::one() + spec.pv_radius);

    let mut conv_p = Extremum::<T>::min();
    let mut conv_v = Extremum::<T>::min();
    let mut mono_h = Extremum::<T>::max();
    let mut mono_l = Extremum::<T>::min();
    let mut lower = Extremum::<T>::min();
    let mut dx_env = Extremum::<T>::max();
    let mut rest = Extremum::<T>::min();
    let mut growth_bound = Extremum::<T>::max();

    let (alpha, beta) = model.dx_bound_coeffs(spec.x_radius);

    for ki in 0..n {
        let i = lin(spec.i_lo, spec.i_hi, ki);
        for kx in 0..n {
            let x = lin(spec.x_center - spec.x_radius, spec.x_center + spec.x_radius, kx);
            let l_rest = model.eval_lagrangian(i, &[x], &[T::zero()])?.value;
            for kp in 0..n {
                let pv = lin(-spec.pv_radius, spec.pv_radius, kp);
                let at = (i, x, pv);

                // Interior second differences in the momentum slot.
                if pv.abs() + fd_h < spec.pv_radius {
                    let h2 = model.h_value_1d(i, x, pv + fd_h)?;
                    let h0 = model.h_value_1d(i, x, pv)?;
                    let h1 = model.h_value_1d(i, x, pv - fd_h)?;
                    conv_p.take_min((h2 - h0 - h0 + h1) / (fd_h * fd_h), at);
                    if model.kind() != ModelKind::CustomTabulated {
                        let l2 = model.l_value_1d(i, x, pv + fd_h)?;
                        let l0 = model.l_value_1d(i, x, pv)?;
                        let l1 = model.l_value_1d(i, x, pv - fd_h)?;
                        conv_v.take_min((l2 - l0 - l0 + l1) / (fd_h * fd_h), at);
                    }
                }

                let hb = model.eval_hamiltonian(i, &[x], &[pv])?;
                mono_h.take_max(hb.d_i, at);
                let lb = model.eval_lagrangian(i, &[x], &[pv])?;
                mono_l.take_min(lb.d_i, at);

                lower.take_min(lb.value - model.theta(pv.abs()) + model.c_theta(), at);
                dx_env.take_max(lb.d_x[0].abs() - alpha - beta * lb.value, at);
                rest.take_min(lb.value - l_rest, at);
            }
        }
    }

    // Super-linearity of H(I,x,.)/|p| and of Theta(r)/r at the largest radii.
    let mut superlin_ok = true;
    let mut superlin_worst = Extremum::<T>::max();
    {
        let i = spec.i_lo;
        let x = spec.x_center;
        let radii: Vec<T> = (0..4)
            .map(|k| spec.pv_radius * real::<T>(0.7 + 0.1 * k as f64))
            .collect();
        for sign in [T::one(), -T::one()] {
            let mut prev = T::neg_infinity();
            for &r in &radii {
                let p = r * sign;
                let ratio = model.h_value_1d(i, x, p)? / r;
                if ratio <= prev {
                    superlin_ok = false;
                    superlin_worst.take_max(prev - ratio, (i, x, p));
                }
                prev = ratio;
            }
        }
        let mut prev = T::neg_infinity();
        for &r in &radii {
            let ratio = model.theta(r) / r;
            if ratio <= prev {
                superlin_ok = false;
                superlin_worst.take_max(prev - ratio, (i, x, r));
            }
            prev = ratio;
        }
    }

    // Conjugate growth bound for transform-based models:
    // v K*'(v) <= 2 (1 + K*(v)).
    let growth_applicable = model.kind() == ModelKind::Kernel;
    if growth_applicable {
        if let crate::model::ModelForm::Kernel { transform, .. } = model.form() {
            for k in 0..n {
                let v = lin(-spec.pv_radius, spec.pv_radius, k);
                let (ell, p_star) = transform.conjugate_signed(v);
                growth_bound.take_max(
                    p_star * v - real::<T>(2.0) * (T::one() + ell),
                    (spec.i_lo, spec.x_center, v),
                );
            }
        }
    }

    let custom = model.kind() == ModelKind::CustomTabulated;
    let i_interval = if spec.i_lo < T::zero() {
        format!("[-{}, {}]", as_f64(spec.i_lo.abs()), as_f64(spec.i_hi))
    } else {
        format!("[{}, {}]", as_f64(spec.i_lo), as_f64(spec.i_hi))
    };

    let entries = vec![
        AssumptionEntry {
            name: "hamiltonian-convexity-p",
            passed: Some(conv_p.value > T::zero()),
            hard: true,
            tolerance: 0.0,
            worst: conv_p.witness(),
            note: "min second difference of H in p".to_string(),
        },
        AssumptionEntry {
            name: "hamiltonian-superlinearity-p",
            passed: Some(superlin_ok),
            hard: true,
            tolerance: 0.0,
            worst: superlin_worst.witness(),
            note: "H/|p| and Theta(r)/r increasing at the largest sampled radii".to_string(),
        },
        AssumptionEntry {
            name: "hamiltonian-monotonicity-i",
            passed: Some(mono_h.value < T::zero()),
            hard: true,
            tolerance: 0.0,
            worst: mono_h.witness(),
            note: "max dH/dI (must be negative)".to_string(),
        },
        AssumptionEntry {
            name: "lagrangian-convexity-v",
            passed: if custom { None } else { Some(conv_v.value > T::zero()) },
            hard: !custom,
            tolerance: 0.0,
            worst: conv_v.witness(),
            note: if custom {
                "piecewise-linear conjugate: convexity certified by the table slopes".to_string()
            } else {
                "min second difference of L in v".to_string()
            },
        },
        AssumptionEntry {
            name: "lagrangian-monotonicity-i",
            passed: Some(mono_l.value > T::zero()),
            hard: true,
            tolerance: 0.0,
            worst: mono_l.witness(),
            note: "min dL/dI (must be positive)".to_string(),
        },
        AssumptionEntry {
            name: "superlinear-lower-bound",
            passed: Some(lower.value >= -tol),
            hard: true,
            tolerance: as_f64(tol),
            worst: lower.witness(),
            note: "min of L - Theta(|v|) + C_Theta".to_string(),
        },
        AssumptionEntry {
            name: "spatial-derivative-bound",
            passed: Some(dx_env.value <= tol),
            hard: true,
            tolerance: as_f64(tol),
            worst: dx_env.witness(),
            note: format!(
                "max of |d_x L| - alpha - beta L with alpha = {}, beta = {}",
                as_f64(alpha),
                as_f64(beta)
            ),
        },
        AssumptionEntry {
            name: "rest-velocity-minimum",
            passed: Some(rest.value >= -tol),
            hard: false,
            tolerance: as_f64(tol),
            worst: rest.witness(),
            note: "min of L(I,x,v) - L(I,x,0); soft: only gates the pessimization check"
                .to_string(),
        },
        AssumptionEntry {
            name: "conjugate-growth-bound",
            passed: if growth_applicable {
                Some(growth_bound.value <= real(1e-8))
            } else {
                None
            },
            hard: growth_applicable,
            tolerance: 1e-8,
            worst: growth_bound.witness(),
            note: "max of v K*'(v) - 2 (1 + K*(v)) for the mutation transform".to_string(),
        },
    ];

    Ok(AssumptionReport { entries, i_interval })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{KernelRates, ModelSpec, MutationTransform, QuadraticGrowth, ValidityBox};

    fn tight_box() -> BoxSpec<f64> {
        BoxSpec {
            i_lo: 0.0,
            i_hi: 2.5,
            x_center: 0.0,
            x_radius: 3.0,
            pv_radius: 8.0,
            samples: 24,
        }
    }

    #[test]
    fn quadratic_model_passes_every_hard_check() {
        let m = ModelSpec::<f64>::quadratic_example();
        let report = check_assumptions(&m, &tight_box()).unwrap();
        assert!(report.hard_failures().is_empty(), "{report:#?}");
        assert_eq!(report.passed("rest-velocity-minimum"), Some(true));
        assert_eq!(report.i_interval, "[0, 2.5]");
    }

    #[test]
    fn growth_independent_of_the_multiplier_fails_monotonicity() {
        let m = ModelSpec::quadratic(
            QuadraticGrowth {
                a: 1.0,
                b: 0.0,
                curv: 1.0,
                center: 0.0,
                i_coeff: 0.0,
            },
            ValidityBox {
                i_lo: 0.0,
                i_hi: 3.0,
                x_center: 0.0,
                x_radius: 8.0,
                pv_radius: 32.0,
            },
            1,
        )
        .unwrap();
        let report = check_assumptions(&m, &tight_box()).unwrap();
        assert_eq!(report.passed("lagrangian-monotonicity-i"), Some(false));
        assert_eq!(report.passed("hamiltonian-monotonicity-i"), Some(false));
        let worst = &report
            .entries
            .iter()
            .find(|e| e.name == "lagrangian-monotonicity-i")
            .unwrap()
            .worst;
        assert_eq!(worst.value, 0.0); // witness dL/dI = 0
        assert!(!report.hard_failures().is_empty());
    }

    #[test]
    fn gaussian_kernel_model_passes_including_the_growth_bound() {
        let m = ModelSpec::kernel(
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
            ValidityBox {
                i_lo: 0.0,
                i_hi: 2.0,
                x_center: 0.0,
                x_radius: 3.0,
                pv_radius: 10.0,
            },
            1,
        )
        .unwrap();
        let mut bx = tight_box();
        bx.i_hi = 2.0;
        let report = check_assumptions(&m, &bx).unwrap();
        assert!(report.hard_failures().is_empty(), "{report:#?}");
        assert_eq!(report.passed("conjugate-growth-bound"), Some(true));
    }
}
