//! Uniform spatial grids on a truncated domain, interpolation, and the
//! coercivity-based domain truncation rule.

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::real::{as_f64, real, Real};

/// Uniform grid over a box, dimension 1 or 2. Nodes are cell corners, so an
/// axis with `n` cells has `n + 1` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec<T: Real> {
    dim: usize,
    bounds: [(T, T); 2],
    n_cells: [usize; 2],
}

impl<T: Real> GridSpec<T> {
    pub fn new_1d(a: T, b: T, n_cells: usize) -> Result<Self> {
        Self::new(1, [(a, b), (T::zero(), T::one())], [n_cells, 1])
    }

    pub fn new(dim: usize, bounds: [(T, T); 2], n_cells: [usize; 2]) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Config(format!("grid dim must be 1 or 2, got {dim}")));
        }
        for axis in 0..dim {
            let (a, b) = bounds[axis];
            if !(b > a) || !a.is_finite() || !b.is_finite() {
                return Err(Error::Config(format!(
                    "grid bounds on axis {axis} must be finite with b > a, got [{}, {}]",
                    as_f64(a),
                    as_f64(b)
                )));
            }
            if n_cells[axis] < 2 {
                return Err(Error::Config(format!(
                    "grid needs at least 2 cells on axis {axis}, got {}",
                    n_cells[axis]
                )));
            }
        }
        Ok(GridSpec { dim, bounds, n_cells })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bounds(&self, axis: usize) -> (T, T) {
        self.bounds[axis]
    }

    pub fn n_cells(&self, axis: usize) -> usize {
        self.n_cells[axis]
    }

    pub fn n_nodes_axis(&self, axis: usize) -> usize {
        self.n_cells[axis] + 1
    }

    /// Total number of nodes.
    pub fn n_nodes(&self) -> usize {
        match self.dim {
            1 => self.n_cells[0] + 1,
            _ => (self.n_cells[0] + 1) * (self.n_cells[1] + 1),
        }
    }

    pub fn spacing(&self, axis: usize) -> T {
        let (a, b) = self.bounds[axis];
        (b - a) / real::<T>(self.n_cells[axis] as f64)
    }

    pub fn node_coord(&self, axis: usize, i: usize) -> T {
        let (a, _) = self.bounds[axis];
        a + self.spacing(axis) * real::<T>(i as f64)
    }

    /// Position of a node by flat index (row-major over axis 1 fastest).
    pub fn position(&self, flat: usize) -> [T; 2] {
        match self.dim {
            1 => [self.node_coord(0, flat), T::zero()],
            _ => {
                let ny = self.n_cells[1] + 1;
                [self.node_coord(0, flat / ny), self.node_coord(1, flat % ny)]
            }
        }
    }

    /// Distance of a flat node index to the nearest boundary, in cells.
    pub fn cells_to_boundary(&self, flat: usize) -> usize {
        match self.dim {
            1 => flat.min(self.n_cells[0] - flat),
            _ => {
                let ny = self.n_cells[1] + 1;
                let (i, j) = (flat / ny, flat % ny);
                i.min(self.n_cells[0] - i)
                    .min(j.min(self.n_cells[1] - j))
            }
        }
    }

    pub fn is_boundary(&self, flat: usize) -> bool {
        self.cells_to_boundary(flat) == 0
    }
}

/// Nodal scalar field at one time instant. Value-semantic snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T: Real> {
    pub grid: GridSpec<T>,
    pub values: Vec<T>,
    pub time: T,
}

impl<T: Real> Field<T> {
    pub fn from_fn(grid: &GridSpec<T>, time: T, f: impl Fn(&[T]) -> T) -> Self {
        let values = (0..grid.n_nodes())
            .map(|k| {
                let p = grid.position(k);
                f(&p[..grid.dim()])
            })
            .collect();
        Field { grid: grid.clone(), values, time }
    }

    pub fn constant(grid: &GridSpec<T>, time: T, c: T) -> Self {
        Field {
            grid: grid.clone(),
            values: vec![c; grid.n_nodes()],
            time,
        }
    }

    /// Minimum value with its flat node index (first occurrence wins, so the
    /// result is deterministic regardless of how values were produced).
    pub fn min_with_index(&self) -> (T, usize) {
        let mut best = self.values[0];
        let mut idx = 0;
        for (k, &v) in self.values.iter().enumerate().skip(1) {
            if v < best {
                best = v;
                idx = k;
            }
        }
        (best, idx)
    }

    pub fn min(&self) -> T {
        self.min_with_index().0
    }

    pub fn assert_finite(&self, time: T) -> Result<()> {
        for (k, &v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::BlowUp {
                    node: k,
                    x: as_f64(self.grid.position(k)[0]),
                    time: as_f64(time),
                });
            }
        }
        Ok(())
    }

    /// Largest |one-sided difference quotient| over the grid, a discrete
    /// Lipschitz constant. 1-d only.
    pub fn discrete_lipschitz(&self) -> T {
        let h = self.grid.spacing(0);
        let mut lip = T::zero();
        for w in self.values.windows(2) {
            lip = lip.max(((w[1] - w[0]) / h).abs());
        }
        lip
    }
}

/// Piecewise-linear (1-d) / bilinear (2-d) interpolation. Errors if `x` is
/// outside the bounds; no overshoot beyond the stencil values by construction.
pub fn interpolate<T: Real>(field: &Field<T>, x: &[T]) -> Result<T> {
    let grid = &field.grid;
    match grid.dim() {
        1 => {
            let (w0, w1, i) = cell_weights(grid, 0, x[0])?;
            Ok(field.values[i] * w0 + field.values[i + 1] * w1)
        }
        _ => {
            let (wx0, wx1, i) = cell_weights(grid, 0, x[0])?;
            let (wy0, wy1, j) = cell_weights(grid, 1, x[1])?;
            let ny = grid.n_nodes_axis(1);
            let v = |a: usize, b: usize| field.values[a * ny + b];
            Ok(v(i, j) * wx0 * wy0
                + v(i, j + 1) * wx0 * wy1
                + v(i + 1, j) * wx1 * wy0
                + v(i + 1, j + 1) * wx1 * wy1)
        }
    }
}

/// Returns (w_left, w_right, left node index) for the cell containing `x`.
fn cell_weights<T: Real>(grid: &GridSpec<T>, axis: usize, x: T) -> Result<(T, T, usize)> {
    let (a, b) = grid.bounds(axis);
    if x < a || x > b || !x.is_finite() {
        return Err(Error::OutOfDomain {
            x: as_f64(x),
            lo: as_f64(a),
            hi: as_f64(b),
            axis,
        });
    }
    let h = grid.spacing(axis);
    let n = grid.n_cells(axis);
    let raw = ((x - a) / h).floor();
    let i = as_f64(raw).max(0.0).min((n - 1) as f64) as usize;
    let t = ((x - a) / h - real::<T>(i as f64)).max(T::zero()).min(T::one());
    Ok((T::one() - t, t, i))
}

/// Output of the domain truncation rule: the chosen symmetric box plus the
/// quantities needed later by the travel-cost lower-bound diagnostic.
#[derive(Debug, Clone)]
pub struct TruncationInfo<T: Real> {
    pub bounds: (T, T),
    /// Approximate argmin of the initial data; the box is centred here.
    pub center: T,
    /// Rate constant of the lower bound min(|x-c|/2, ring-min of g) - C t.
    pub c_estimate: T,
    /// Margin achieved by the bound at the chosen boundary.
    pub margin: T,
}

/// Picks a symmetric box around the argmin of `g` on which the travel-cost
/// lower bound keeps candidate minimizers strictly interior up to time
/// `horizon`. The bound is evaluated in argmin-centred coordinates; the rule
/// is translation-invariant. 1-d only.
pub fn truncate_domain<T: Real>(
    g: &dyn Fn(T) -> T,
    model: &ModelSpec<T>,
    horizon: T,
    safety: T,
    n_cells: usize,
) -> Result<TruncationInfo<T>> {
    // Locate the argmin by coarse-to-fine scanning on an expanding window.
    let center = locate_argmin(g);
    let g_min = g(center);

    // Coercivity: ring minima at doubling radii may never decrease (they may
    // stall while a ring still contains a secondary well) and must have grown
    // substantially by the sampling cap.
    let mut prev = T::neg_infinity();
    let mut radius = T::one();
    let mut last_ring = T::zero();
    for _ in 0..8 {
        let ring = ring_min(g, center, radius);
        // slack covers the finite sampling of the rings
        let slack = real::<T>(1e-5) * (T::one() + prev.abs());
        if ring < prev - slack {
            return Err(Error::NotCoercive {
                radius: as_f64(radius),
                value: as_f64(ring),
            });
        }
        prev = ring;
        last_ring = ring;
        radius = radius * real(2.0);
    }
    if last_ring - g_min < real(2.0) {
        return Err(Error::NotCoercive {
            radius: as_f64(radius / real(2.0)),
            value: as_f64(last_ring),
        });
    }

    // Core region: smallest dyadic radius where g exceeds its minimum by 1.
    let mut r_core = T::one();
    while ring_min(g, center, r_core) < g_min + T::one() && r_core < real(128.0) {
        r_core = r_core * real(2.0);
    }

    // Rate constant for the lower bound, from the superlinearity data of the
    // model plus the resting cost |L(I, x, 0)| over the core region.
    let c_est = model.c_theta() + model.sup_abs_resting_cost(center - r_core, center + r_core);

    // Smallest half-width c such that the centred bound
    //   min(c/2, min_{|x'-center| >= c/2} g) - C*horizon >= 1.
    let margin_target = T::one();
    let mut half_width = r_core.max(T::one());
    let mut margin;
    loop {
        let bound = half_width / real(2.0);
        let ring = ring_min(g, center, bound);
        margin = bound.min(ring) - c_est * horizon;
        if margin >= margin_target {
            break;
        }
        half_width = half_width + (half_width / real(4.0)).max(real(0.25));
        if half_width > real(1e6) {
            return Err(Error::Config(format!(
                "domain truncation did not converge: half-width exceeded 1e6 \
                 (rate constant C = {}, horizon = {})",
                as_f64(c_est),
                as_f64(horizon)
            )));
        }
    }

    // Pad by safety * 5 cells and round the half-width up to a multiple of
    // 0.25 so the construction is reproducible.
    let pad = safety * real(5.0) * (half_width + half_width) / real(n_cells as f64);
    let padded = half_width + pad;
    let quarter: T = real(0.25);
    let aligned = (padded / quarter).ceil() * quarter;

    Ok(TruncationInfo {
        bounds: (center - aligned, center + aligned),
        center,
        c_estimate: c_est,
        margin,
    })
}

fn locate_argmin<T: Real>(g: &dyn Fn(T) -> T) -> T {
    let mut best_x = T::zero();
    let mut best = g(best_x);
    let half: T = real(64.0);
    let n = 4096usize;
    let step = (half + half) / real(n as f64);
    for i in 0..=n {
        let x = -half + step * real(i as f64);
        let v = g(x);
        if v < best {
            best = v;
            best_x = x;
        }
    }
    // One refinement pass around the coarse winner.
    let mut x = best_x;
    let mut fine = step;
    for _ in 0..20 {
        fine = fine / real(2.0);
        for cand in [x - fine, x + fine] {
            let v = g(cand);
            if v < best {
                best = v;
                x = cand;
            }
        }
    }
    x
}

/// min of g over sampled |x - center| >= radius (within a finite window).
fn ring_min<T: Real>(g: &dyn Fn(T) -> T, center: T, radius: T) -> T {
    let outer = radius * real(4.0);
    let n = 512usize;
    let step = (outer - radius) / real(n as f64);
    let mut m = T::infinity();
    for i in 0..=n {
        let r = radius + step * real(i as f64);
        m = m.min(g(center + r)).min(g(center - r));
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;
    use approx::assert_abs_diff_eq;

    fn grid(n: usize) -> GridSpec<f64> {
        GridSpec::new_1d(-2.0, 2.0, n).unwrap()
    }

    #[test]
    fn nodal_values_are_exact() {
        let g = grid(8);
        let f = Field::from_fn(&g, 0.0, |x| x[0] * x[0]);
        for i in 0..=8 {
            let x = g.node_coord(0, i);
            assert_abs_diff_eq!(interpolate(&f, &[x]).unwrap(), x * x, epsilon = 1e-15);
        }
    }

    #[test]
    fn midpoint_of_two_nodes() {
        let g = GridSpec::new_1d(0.0, 1.0, 2).unwrap();
        let f = Field {
            grid: g.clone(),
            values: vec![0.0, 2.0, 2.0],
            time: 0.0,
        };
        assert_abs_diff_eq!(interpolate(&f, &[0.25]).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn linear_fields_reproduce_exactly() {
        let g = grid(37);
        let f = Field::from_fn(&g, 0.0, |x| 3.0 * x[0]);
        for k in 0..200 {
            let x = -2.0 + 4.0 * (k as f64) / 199.0;
            assert_abs_diff_eq!(interpolate(&f, &[x]).unwrap(), 3.0 * x, epsilon = 1e-12);
        }
    }

    #[test]
    fn out_of_bounds_is_an_error() {
        let g = grid(8);
        let f = Field::from_fn(&g, 0.0, |x| x[0]);
        assert!(matches!(
            interpolate(&f, &[2.5]),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn bilinear_reproduces_affine() {
        let g = GridSpec::new(2, [(-1.0, 1.0), (0.0, 2.0)], [8, 10]).unwrap();
        let f = Field::from_fn(&g, 0.0, |x| 1.0 + 2.0 * x[0] - 0.5 * x[1]);
        for (x, y) in [(0.13, 0.77), (-0.9, 1.99), (0.0, 1.0)] {
            assert_abs_diff_eq!(
                interpolate(&f, &[x, y]).unwrap(),
                1.0 + 2.0 * x - 0.5 * y,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn truncation_covers_the_rate_times_horizon() {
        let model = ModelSpec::quadratic_example();
        let g = |x: f64| x * x;
        let info = truncate_domain(&g, &model, 1.0, 1.0, 800).unwrap();
        // Independent check of the bound at the returned boundary.
        let c = info.bounds.1 - info.center;
        assert!(c >= 2.0 * (info.c_estimate * 1.0).sqrt());
        let bound = (c / 2.0).min((c / 2.0) * (c / 2.0)) - info.c_estimate * 1.0;
        assert!(bound >= 1.0 - 1e-9, "margin violated: {bound}");
    }

    #[test]
    fn truncation_recenters_on_shifted_wells() {
        let model = ModelSpec::quadratic_example();
        let g = |x: f64| (x - 3.0) * (x - 3.0);
        let info = truncate_domain(&g, &model, 0.5, 1.0, 800).unwrap();
        assert_abs_diff_eq!(info.center, 3.0, epsilon = 1e-6);
        let mid = 0.5 * (info.bounds.0 + info.bounds.1);
        assert_abs_diff_eq!(mid, 3.0, epsilon = 1e-9);
    }

    #[test]
    fn bounded_initial_data_is_rejected() {
        let model = ModelSpec::quadratic_example();
        let g = |x: f64| 1.0 - 1.0 / (1.0 + x * x);
        assert!(matches!(
            truncate_domain(&g, &model, 0.5, 1.0, 800),
            Err(Error::NotCoercive { .. })
        ));
    }

    #[test]
    fn truncation_is_deterministic() {
        let model = ModelSpec::quadratic_example();
        let g = |x: f64| x * x;
        let a = truncate_domain(&g, &model, 0.7, 1.0, 800).unwrap();
        let b = truncate_domain(&g, &model, 0.7, 1.0, 800).unwrap();
        assert_eq!(a.bounds, b.bounds);
        assert_eq!(a.c_estimate, b.c_estimate);
    }
}
