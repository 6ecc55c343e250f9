//! Scenario configuration: the TOML schema, validation with defaults, the
//! built-in scenario registry, and construction of ready-to-run inputs
//! (model, grid, initial field, solver settings).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd::FdScheme;
use crate::grid::{truncate_domain, Field, GridSpec, TruncationInfo};
use crate::model::{
    BoxSpec, ConvexTable, KernelRates, ModelSpec, MutationTransform, QuadraticGrowth, ValidityBox,
};
use crate::multiplier::{bracket_width_default, ConstraintSolve, Route};
use crate::real::{as_f64, real, Real};

fn default_one() -> f64 {
    1.0
}
fn default_zero() -> f64 {
    0.0
}

/// Raw TOML schema. Unknown keys are rejected, not ignored.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// Final time T.
    pub horizon: f64,
    #[serde(default = "default_routes")]
    pub routes: Vec<Route>,
    /// Snapshot times; defaults to five evenly spaced times including 0 and T.
    #[serde(default)]
    pub snapshots: Option<Vec<f64>>,
    pub model: ModelConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub fd: FdConfig,
    #[serde(default)]
    pub sl: SlConfig,
    #[serde(default)]
    pub eps: EpsConfig,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_routes() -> Vec<Route> {
    vec![Route::Fd, Route::Sl]
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKindConfig,
    // Quadratic / custom growth rate R = a + b x - curv (x - center)^2 - i_coeff I.
    #[serde(default = "default_one")]
    pub a: f64,
    #[serde(default = "default_zero")]
    pub b: f64,
    #[serde(default = "default_one")]
    pub curv: f64,
    #[serde(default = "default_zero")]
    pub center: f64,
    #[serde(default = "default_one")]
    pub i_coeff: f64,
    // Kernel rates B = amp exp(-width |x - center|^2) e^{-i_sens I} + floor,
    // D = d_lin I + d_base.
    #[serde(default = "default_one")]
    pub amp: f64,
    #[serde(default = "default_one")]
    pub width: f64,
    #[serde(default = "default_one")]
    pub i_sens: f64,
    #[serde(default = "default_zero")]
    pub floor: f64,
    #[serde(default = "default_one")]
    pub d_lin: f64,
    #[serde(default = "default_zero")]
    pub d_base: f64,
    #[serde(default)]
    pub transform: Option<MutationTransform>,
    // Custom-tabulated momentum dependence.
    #[serde(default)]
    pub table_path: Option<PathBuf>,
    #[serde(default)]
    pub theta_coeff: Option<f64>,
    #[serde(default)]
    pub theta_exponent: Option<f64>,
    #[serde(default)]
    pub c_theta: Option<f64>,
    #[serde(rename = "box", default)]
    pub validity: BoxConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKindConfig {
    Quadratic,
    Kernel,
    CustomTabulated,
}

#[derive(Debug, Clone, Copy, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    /// Lower multiplier bound; non-negative by default, override to allow
    /// signed burdens.
    #[serde(default)]
    pub i_min: Option<f64>,
    #[serde(default)]
    pub i_max: Option<f64>,
    #[serde(default)]
    pub x_radius: Option<f64>,
    #[serde(default)]
    pub pv_radius: Option<f64>,
    /// Assumption-check lattice density per axis.
    #[serde(default)]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub kind: InitialKindConfig,
    #[serde(default = "default_one")]
    pub scale: f64,
    #[serde(default = "default_zero")]
    pub center: f64,
    /// Double-well: lift of the second well.
    #[serde(default = "default_offset")]
    pub offset: f64,
    #[serde(default)]
    pub table_path: Option<PathBuf>,
}

fn default_offset() -> f64 {
    0.2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKindConfig {
    QuadraticWell,
    ShiftedWell,
    DoubleWell,
    Tabulated,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    /// Domain override; omitted = derive by the truncation rule.
    #[serde(default)]
    pub bounds: Option<(f64, f64)>,
    #[serde(default = "default_one")]
    pub safety: f64,
}

fn default_n() -> usize {
    800
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n: 800,
            bounds: None,
            safety: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FdConfig {
    #[serde(default = "default_scheme")]
    pub scheme: FdScheme,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
}

fn default_scheme() -> FdScheme {
    FdScheme::LaxFriedrichs
}
fn default_cfl() -> f64 {
    0.4
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig {
            scheme: FdScheme::LaxFriedrichs,
            cfl: 0.4,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SlConfig {
    /// Fixed step size; defaults to horizon / 400.
    #[serde(default)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EpsConfig {
    #[serde(default)]
    pub values: Vec<f64>,
    #[serde(default)]
    pub psi_table_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    #[serde(default = "default_zero")]
    pub bracket_min: f64,
    #[serde(default = "default_bracket_max")]
    pub bracket_max: f64,
    #[serde(default = "default_tol_constraint")]
    pub tol_constraint: f64,
    #[serde(default = "default_margin")]
    pub boundary_margin: usize,
}

fn default_bracket_max() -> f64 {
    10.0
}
fn default_tol_constraint() -> f64 {
    1e-8
}
fn default_margin() -> usize {
    5
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            bracket_min: 0.0,
            bracket_max: 10.0,
            tol_constraint: 1e-8,
            boundary_margin: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    #[serde(default = "default_tol_dual")]
    pub dual: f64,
    #[serde(default = "default_action_factor")]
    pub action_factor: f64,
    #[serde(default = "default_tol_convex")]
    pub convex: f64,
}

fn default_tol_dual() -> f64 {
    1e-6
}
fn default_action_factor() -> f64 {
    5.0
}
fn default_tol_convex() -> f64 {
    1e-9
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            dual: 1e-6,
            action_factor: 5.0,
            convex: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

/// Parses a TOML config document. Unknown keys, type mismatches, and
/// violated invariants are errors naming the offending key (parse errors
/// carry the line from the TOML span).
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &ScenarioConfig) -> Result<()> {
    if cfg.name.trim().is_empty() {
        return Err(Error::Config("name: must be non-empty".to_string()));
    }
    if !(cfg.horizon > 0.0) && !cfg.horizon.eq(&0.0) {
        return Err(Error::Config(format!(
            "horizon: must be positive, got {}",
            cfg.horizon
        )));
    }
    if cfg.horizon < 0.0 {
        return Err(Error::Config(format!(
            "horizon: must be positive, got {}",
            cfg.horizon
        )));
    }
    if cfg.routes.is_empty() {
        return Err(Error::Config("routes: must not be empty".to_string()));
    }
    if cfg.grid.n < 64 {
        return Err(Error::Config(format!(
            "grid.n: production grids need at least 64 cells, got {}",
            cfg.grid.n
        )));
    }
    if let Some((a, b)) = cfg.grid.bounds {
        if !(b > a) {
            return Err(Error::Config(format!(
                "grid.bounds: need b > a, got [{a}, {b}]"
            )));
        }
    }
    for &e in &cfg.eps.values {
        if !(e > 0.0 && e <= 1.0) {
            return Err(Error::Config(format!(
                "eps.values: entries must lie in (0, 1], got {e}"
            )));
        }
    }
    if cfg.routes.contains(&Route::Eps) {
        if cfg.eps.values.is_empty() {
            return Err(Error::Config(
                "eps.values: the eps route needs a non-empty list".to_string(),
            ));
        }
        if cfg.model.kind != ModelKindConfig::Quadratic {
            return Err(Error::Config(
                "routes: the eps route is defined for quadratic-kind models".to_string(),
            ));
        }
    }
    if !(cfg.solve.bracket_max > cfg.solve.bracket_min) {
        return Err(Error::Config(
            "solve.bracket_max: must exceed solve.bracket_min".to_string(),
        ));
    }
    if let Some(t) = &cfg.snapshots {
        for &s in t {
            if s < 0.0 || s > cfg.horizon * (1.0 + 1e-12) {
                return Err(Error::Config(format!(
                    "snapshots: time {s} outside [0, horizon]"
                )));
            }
        }
    }
    if cfg.model.kind == ModelKindConfig::CustomTabulated {
        if cfg.model.table_path.is_none() {
            return Err(Error::Config(
                "model.table_path: required for custom-tabulated models".to_string(),
            ));
        }
        if cfg.model.theta_coeff.is_none()
            || cfg.model.theta_exponent.is_none()
            || cfg.model.c_theta.is_none()
        {
            return Err(Error::Config(
                "model.theta_coeff/theta_exponent/c_theta: custom-tabulated models must \
                 supply the super-linear lower bound explicitly"
                    .to_string(),
            ));
        }
    }
    Ok(())
}

/// Piecewise-linear sampled function with linear end extrapolation, used for
/// tabulated initial data and weights.
#[derive(Debug, Clone)]
pub struct SampledFunction<T: Real> {
    xs: Vec<T>,
    vals: Vec<T>,
}

impl<T: Real> SampledFunction<T> {
    pub fn from_text(text: &str) -> Result<Self> {
        let table = ConvexTable::<T>::from_text(text)?;
        Ok(SampledFunction {
            xs: table.abscissae,
            vals: table.values,
        })
    }

    pub fn eval(&self, x: T) -> T {
        let n = self.xs.len();
        if x <= self.xs[0] {
            let s = (self.vals[1] - self.vals[0]) / (self.xs[1] - self.xs[0]);
            return self.vals[0] + s * (x - self.xs[0]);
        }
        if x >= self.xs[n - 1] {
            let s = (self.vals[n - 1] - self.vals[n - 2]) / (self.xs[n - 1] - self.xs[n - 2]);
            return self.vals[n - 1] + s * (x - self.xs[n - 1]);
        }
        let mut lo = 0usize;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.xs[mid] <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = (x - self.xs[lo]) / (self.xs[lo + 1] - self.xs[lo]);
        self.vals[lo] * (T::one() - t) + self.vals[lo + 1] * t
    }
}

/// Initial data g, before the additive normalization shift.
#[derive(Debug, Clone)]
pub enum InitialData<T: Real> {
    QuadraticWell { scale: T, center: T },
    DoubleWell { offset: T },
    Tabulated(SampledFunction<T>),
}

impl<T: Real> InitialData<T> {
    pub fn eval(&self, x: T) -> T {
        match self {
            InitialData::QuadraticWell { scale, center } => {
                let d = x - *center;
                *scale * d * d
            }
            InitialData::DoubleWell { offset } => {
                let l = (x + T::one()) * (x + T::one());
                let r = (x - T::one()) * (x - T::one()) + *offset;
                l.min(r)
            }
            InitialData::Tabulated(f) => f.eval(x),
        }
    }
}

/// Weight psi for the regularized route.
#[derive(Debug, Clone)]
pub enum Weight<T: Real> {
    One,
    Tabulated(SampledFunction<T>),
}

impl<T: Real> Weight<T> {
    pub fn eval(&self, x: T) -> T {
        match self {
            Weight::One => T::one(),
            Weight::Tabulated(f) => f.eval(x),
        }
    }
}

/// A fully resolved, validated, ready-to-run scenario.
pub struct Scenario<T: Real> {
    pub name: String,
    pub model: ModelSpec<T>,
    pub grid: GridSpec<T>,
    pub initial_field: Field<T>,
    pub initial_data: InitialData<T>,
    /// Additive shift applied so min g = 0 on the grid.
    pub g_shift: T,
    pub horizon: T,
    pub routes: Vec<Route>,
    pub snapshot_times: Vec<T>,
    pub solve: ConstraintSolve<T>,
    pub fd_scheme: FdScheme,
    pub sl_dt: T,
    pub eps_values: Vec<T>,
    pub psi: Weight<T>,
    pub truncation: TruncationInfo<T>,
    pub assumption_box: BoxSpec<T>,
    pub tol_dual: T,
    pub action_factor: T,
    pub output_dir: PathBuf,
}

impl<T: Real> Scenario<T> {
    /// Shifted initial data as a plain function.
    pub fn g(&self) -> impl Fn(T) -> T + '_ {
        let shift = self.g_shift;
        move |x| self.initial_data.eval(x) - shift
    }
}

/// Builds the runnable scenario: constructs the model, derives or accepts the
/// domain, normalizes the initial data, and validates the cross-constraints
/// between grid, validity box, and bracket.
pub fn build_scenario<T: Real>(cfg: &ScenarioConfig, base_dir: &Path) -> Result<Scenario<T>> {
    validate(cfg)?;

    let initial_data: InitialData<T> = match cfg.initial.kind {
        InitialKindConfig::QuadraticWell | InitialKindConfig::ShiftedWell => {
            if !(cfg.initial.scale > 0.0) {
                return Err(Error::Config(format!(
                    "initial.scale: must be positive, got {}",
                    cfg.initial.scale
                )));
            }
            InitialData::QuadraticWell {
                scale: real(cfg.initial.scale),
                center: real(cfg.initial.center),
            }
        }
        InitialKindConfig::DoubleWell => InitialData::DoubleWell {
            offset: real(cfg.initial.offset),
        },
        InitialKindConfig::Tabulated => {
            let path = cfg.initial.table_path.as_ref().ok_or_else(|| {
                Error::Config("initial.table_path: required for tabulated data".to_string())
            })?;
            let text = std::fs::read_to_string(base_dir.join(path))?;
            InitialData::Tabulated(SampledFunction::from_text(&text)?)
        }
    };

    // Provisional domain geometry for the validity-box defaults.
    let m = &cfg.model;
    let i_min = m.validity.i_min.unwrap_or(0.0);
    let i_max = m.validity.i_max.unwrap_or(cfg.solve.bracket_max);
    if !(i_max > i_min) {
        return Err(Error::Config(
            "model.box.i_max: must exceed model.box.i_min".to_string(),
        ));
    }
    let pv_default = match m.kind {
        ModelKindConfig::Kernel => 16.0,
        _ => 64.0,
    };
    let (guess_lo, guess_hi) = cfg.grid.bounds.unwrap_or((
        cfg.initial.center - 8.0,
        cfg.initial.center + 8.0,
    ));
    let x_center = 0.5 * (guess_lo + guess_hi);
    let x_radius = m
        .validity
        .x_radius
        .unwrap_or(1.5 * (guess_hi - guess_lo).max(8.0));
    let validity = ValidityBox {
        i_lo: real(i_min),
        i_hi: real(i_max),
        x_center: real(x_center),
        x_radius: real(x_radius),
        pv_radius: real(m.validity.pv_radius.unwrap_or(pv_default)),
    };

    let model: ModelSpec<T> = match m.kind {
        ModelKindConfig::Quadratic => ModelSpec::quadratic(
            QuadraticGrowth {
                a: real(m.a),
                b: real(m.b),
                curv: real(m.curv),
                center: real(m.center),
                i_coeff: real(m.i_coeff),
            },
            validity,
            1,
        )?,
        ModelKindConfig::Kernel => ModelSpec::kernel(
            KernelRates {
                amp: real(m.amp),
                width: real(m.width),
                center: real(m.center),
                i_sens: real(m.i_sens),
                floor: real(m.floor),
                d_lin: real(m.d_lin),
                d_base: real(m.d_base),
            },
            m.transform.unwrap_or(MutationTransform::Gaussian),
            validity,
            1,
        )?,
        ModelKindConfig::CustomTabulated => {
            let path = m.table_path.as_ref().expect("validated above");
            let text = std::fs::read_to_string(base_dir.join(path))?;
            let table = ConvexTable::from_text(&text)?;
            ModelSpec::custom(
                QuadraticGrowth {
                    a: real(m.a),
                    b: real(m.b),
                    curv: real(m.curv),
                    center: real(m.center),
                    i_coeff: real(m.i_coeff),
                },
                table,
                real(m.theta_coeff.expect("validated")),
                real(m.theta_exponent.expect("validated")),
                real(m.c_theta.expect("validated")),
                validity,
            )?
        }
    };

    // Domain: the truncation rule always runs (its rate constant feeds the
    // lower-bound diagnostic); explicit bounds take precedence for the grid.
    let g_raw = |x: T| initial_data.eval(x);
    let horizon: T = real(cfg.horizon);
    let truncation = truncate_domain(
        &g_raw,
        &model,
        horizon.max(real(1e-3)),
        real(cfg.grid.safety),
        cfg.grid.n,
    )?;
    let bounds: (T, T) = match cfg.grid.bounds {
        Some((a, b)) => (real(a), real(b)),
        None => truncation.bounds,
    };
    let grid = GridSpec::new_1d(bounds.0, bounds.1, cfg.grid.n)?;

    // Grid must sit inside the model's x-box.
    let vb = model.validity();
    for edge in [bounds.0, bounds.1] {
        if (edge - vb.x_center).abs() > vb.x_radius * (T::one() + real(1e-9)) {
            return Err(Error::Config(format!(
                "grid.bounds: edge {} outside the model x-box (center {}, radius {}); \
                 raise model.box.x_radius",
                as_f64(edge),
                as_f64(vb.x_center),
                as_f64(vb.x_radius)
            )));
        }
    }
    if real::<T>(cfg.solve.bracket_max) > vb.i_hi + real(1e-12) {
        return Err(Error::Config(
            "solve.bracket_max: exceeds model.box.i_max; widen the box or shrink the bracket"
                .to_string(),
        ));
    }

    // Normalize: shift so min g = 0 on the grid exactly.
    let raw_field = Field::from_fn(&grid, T::zero(), |x| initial_data.eval(x[0]));
    let shift = raw_field.min();
    let initial_field = Field {
        values: raw_field.values.iter().map(|&v| v - shift).collect(),
        ..raw_field
    };

    let snapshot_times: Vec<T> = match &cfg.snapshots {
        Some(list) => list.iter().map(|&t| real(t)).collect(),
        None => (0..=4)
            .map(|k| horizon * real(k as f64 / 4.0))
            .collect(),
    };

    let psi = match &cfg.eps.psi_table_path {
        None => Weight::One,
        Some(p) => {
            let text = std::fs::read_to_string(base_dir.join(p))?;
            Weight::Tabulated(SampledFunction::from_text(&text)?)
        }
    };

    let solve = ConstraintSolve {
        bracket: (real(cfg.solve.bracket_min), real(cfg.solve.bracket_max)),
        tol_constraint: real(cfg.solve.tol_constraint),
        bracket_width: bracket_width_default(),
        expand_cap: 6,
        boundary_margin: cfg.solve.boundary_margin,
    };

    let mut assumption_box = BoxSpec::from_model(&model);
    if let Some(s) = m.validity.samples {
        assumption_box.samples = s;
    }

    let output_dir = cfg
        .output
        .dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));

    Ok(Scenario {
        name: cfg.name.clone(),
        model,
        grid,
        initial_field,
        initial_data,
        g_shift: shift,
        horizon,
        routes: cfg.routes.clone(),
        snapshot_times,
        solve,
        fd_scheme: cfg.fd.scheme,
        sl_dt: real(cfg.sl.dt.unwrap_or(cfg.horizon / 400.0)),
        eps_values: cfg.eps.values.iter().map(|&e| real(e)).collect(),
        psi,
        truncation,
        assumption_box,
        tol_dual: real(cfg.tolerances.dual),
        action_factor: real(cfg.tolerances.action_factor),
        output_dir,
    })
}

/// Names of the shipped scenarios.
pub fn builtin_names() -> Vec<&'static str> {
    vec!["quadratic", "moving-optimum", "jump", "kernel-gaussian"]
}

/// The built-in scenario registry. These instances satisfy the structural
/// assumptions and exercise, in order: a constant burden with a closed-form
/// profile, a smoothly increasing burden, a discontinuous burden, and the
/// transform-based (kernel) model class.
pub fn builtin(name: &str) -> Option<ScenarioConfig> {
    let text = match name {
        "quadratic" => Some(QUADRATIC_TOML),
        "moving-optimum" => Some(MOVING_OPTIMUM_TOML),
        "jump" => Some(JUMP_TOML),
        "kernel-gaussian" => Some(KERNEL_GAUSSIAN_TOML),
        _ => None,
    }?;
    Some(parse_config(text).expect("builtin configs are valid"))
}

pub const QUADRATIC_TOML: &str = r#"
# Constant burden: R = 1 - I - x^2, g = x^2. The exact solution is
# u = a(t) x^2 with a' = 1 - 4 a^2 and I identically 1.
name = "quadratic"
horizon = 0.5
routes = ["fd", "sl", "eps"]

[model]
kind = "quadratic"
a = 1.0
curv = 1.0
center = 0.0
i_coeff = 1.0

[model.box]
i_max = 3.0
x_radius = 6.0
pv_radius = 64.0

[initial]
kind = "quadratic-well"

[grid]
n = 800
bounds = [-2.5, 2.5]

[fd]
scheme = "upwind_convex"

[sl]
dt = 0.005

[eps]
values = [0.1, 0.05, 0.025]

[solve]
bracket_max = 3.0
"#;

pub const MOVING_OPTIMUM_TOML: &str = r#"
# Drifting optimum: R = 2 - (x - 1)^2 - I, g = x^2. The burden climbs from
# 1 toward 2 as the population tracks the optimum.
name = "moving-optimum"
horizon = 2.0
routes = ["fd", "sl"]

[model]
kind = "quadratic"
a = 2.0
curv = 1.0
center = 1.0
i_coeff = 1.0

[model.box]
i_max = 3.0
x_radius = 8.0
pv_radius = 64.0

[initial]
kind = "quadratic-well"

[grid]
n = 800
bounds = [-3.0, 4.0]

[fd]
scheme = "upwind_convex"

[sl]
dt = 0.005

[solve]
bracket_max = 3.0
"#;

pub const JUMP_TOML: &str = r#"
# Double-well initial data with tilted fitness r(x) = 2 + x/2: the argmin
# hops from the left well to the right one and the burden jumps by 1.
name = "jump"
horizon = 0.6
routes = ["fd", "sl"]

[model]
kind = "quadratic"
a = 2.0
b = 0.5
curv = 0.0
center = 0.0
i_coeff = 1.0

[model.box]
i_max = 4.0
x_radius = 8.0
pv_radius = 64.0

[initial]
kind = "double-well"
offset = 0.2

[grid]
n = 800
bounds = [-3.0, 3.0]

[fd]
scheme = "upwind_convex"

[sl]
dt = 0.0015

[solve]
bracket_max = 4.0
"#;

pub const KERNEL_GAUSSIAN_TOML: &str = r#"
# Transform-based model: H = B K(p) - D with Gaussian K, B = e^{-x^2} e^{-I}
# + 0.1 and D = I. The burden settles at the root of B(I, 0) = I.
name = "kernel-gaussian"
horizon = 0.5
routes = ["fd", "sl"]

[model]
kind = "kernel"
amp = 1.0
width = 1.0
center = 0.0
i_sens = 1.0
floor = 0.1
d_lin = 1.0
d_base = 0.0
transform = "gaussian"

[model.box]
i_max = 2.0
x_radius = 4.0
pv_radius = 16.0

[initial]
kind = "quadratic-well"
scale = 0.25

[grid]
n = 200
bounds = [-2.0, 2.0]

[fd]
scheme = "upwind_convex"

[sl]
dt = 0.0033333333333333335

[solve]
bracket_max = 2.0
"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config(
            r#"
name = "mini"
horizon = 0.5
[model]
kind = "quadratic"
[initial]
kind = "quadratic-well"
"#,
        )
        .unwrap();
        assert_eq!(cfg.grid.n, 800);
        assert_eq!(cfg.routes, vec![Route::Fd, Route::Sl]);
        assert_eq!(cfg.solve.bracket_max, 10.0);
        let scenario: Scenario<f64> = build_scenario(&cfg, Path::new(".")).unwrap();
        assert_eq!(scenario.sl_dt, 0.5 / 400.0);
        assert_eq!(scenario.snapshot_times.len(), 5);
    }

    #[test]
    fn negative_horizon_names_the_key() {
        let err = parse_config(
            r#"
name = "bad"
horizon = -1.0
[model]
kind = "quadratic"
[initial]
kind = "quadratic-well"
"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("horizon"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse_config(
            r#"
name = "bad"
horizon = 1.0
wibble = 3
[model]
kind = "quadratic"
[initial]
kind = "quadratic-well"
"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("wibble"), "{err}");
    }

    #[test]
    fn offset_initial_data_is_shifted_and_recorded() {
        let cfg = parse_config(
            r#"
name = "offset"
horizon = 0.2
[model]
kind = "quadratic"
[initial]
kind = "double-well"
offset = 0.3
[grid]
n = 128
bounds = [-3.0, 3.0]
"#,
        )
        .unwrap();
        let s: Scenario<f64> = build_scenario(&cfg, Path::new(".")).unwrap();
        // double-well min sits between nodes: only a tiny grid-induced shift.
        assert!(s.g_shift.abs() <= 1e-2, "shift {}", s.g_shift);
        assert!(s.initial_field.min().abs() <= 1e-12);

        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("g.txt"),
            "-8 64.3\n-4 16.3\n-2 4.3\n-1 1.3\n0 0.3\n1 1.3\n2 4.3\n4 16.3\n8 64.3\n",
        )
        .unwrap();
        let cfg2 = parse_config(
            r#"
name = "offset2"
horizon = 0.2
[model]
kind = "quadratic"
[initial]
kind = "tabulated"
table_path = "g.txt"
[grid]
n = 128
bounds = [-2.0, 2.0]
"#,
        )
        .unwrap();
        let s2: Scenario<f64> = build_scenario(&cfg2, dir.path()).unwrap();
        assert!((s2.g_shift - 0.3).abs() <= 1e-9, "shift {}", s2.g_shift);
        assert!(s2.initial_field.min().abs() <= 1e-12);
    }

    #[test]
    fn builtins_parse_and_build() {
        for name in builtin_names() {
            let cfg = builtin(name).unwrap();
            let s: Scenario<f64> = build_scenario(&cfg, Path::new(".")).unwrap();
            assert_eq!(s.name, name);
            assert!(s.initial_field.min().abs() <= 1e-12, "{name}");
        }
        assert!(builtin("nope").is_none());
    }

    #[test]
    fn eps_route_requires_values_and_quadratic_kind() {
        let err = parse_config(
            r#"
name = "bad"
horizon = 1.0
routes = ["eps"]
[model]
kind = "quadratic"
[initial]
kind = "quadratic-well"
"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("eps.values"), "{err}");
    }

    #[test]
    fn small_grids_are_rejected_at_config_level() {
        let err = parse_config(
            r#"
name = "bad"
horizon = 1.0
[model]
kind = "quadratic"
[initial]
kind = "quadratic-well"
[grid]
n = 16
"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("grid.n"), "{err}");
    }
}
