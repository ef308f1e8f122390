//! Uniform tensor grids on intervals and rectangles.
//!
//! Only interior nodes are stored. The boundary is a ghost ring carrying a
//! single value (`Field::boundary_value`), which every stencil reads when it
//! steps off the interior.
//!
//! Node ordering in 2D is row-major with the first axis fastest:
//! `index = i + n_x * j`.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("dimension must be 1 or 2, got {0}")]
    BadDimension(usize),
    #[error("expected {expected} axis specifications, got {got}")]
    AxisCount { expected: usize, got: usize },
    #[error("axis {axis}: extent must be positive (bounds [{lo}, {hi}])")]
    NonPositiveExtent { axis: usize, lo: f64, hi: f64 },
    #[error("axis {axis}: at least 3 interior nodes required, got {n}")]
    TooFewNodes { axis: usize, n: usize },
    #[error("field has {got} values but grid has {expected} interior nodes")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("non-finite value {value} at node {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("weight field is not positive at node {index} (value {value})")]
    NonPositiveWeight { index: usize, value: f64 },
}

/// One axis of a tensor grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    /// Interior node count.
    pub n: usize,
    pub h: f64,
}

impl Axis {
    /// Coordinate of interior node `i` (zero based).
    pub fn coord(&self, i: usize) -> f64 {
        self.lo + (i + 1) as f64 * self.h
    }

    pub fn extent(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Uniform discretization of an interval (`dim = 1`) or rectangle (`dim = 2`).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    axes: Vec<Axis>,
}

impl Grid {
    /// Builds a grid with `n_per_axis[k]` interior nodes on `bounds[k]`.
    pub fn new(dim: usize, bounds: &[(f64, f64)], n_per_axis: &[usize]) -> Result<Self, GridError> {
        if dim != 1 && dim != 2 {
            return Err(GridError::BadDimension(dim));
        }
        if bounds.len() != dim {
            return Err(GridError::AxisCount { expected: dim, got: bounds.len() });
        }
        if n_per_axis.len() != dim {
            return Err(GridError::AxisCount { expected: dim, got: n_per_axis.len() });
        }
        let mut axes = Vec::with_capacity(dim);
        for (axis, (&(lo, hi), &n)) in bounds.iter().zip(n_per_axis).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(GridError::NonPositiveExtent { axis, lo, hi });
            }
            if n < 3 {
                return Err(GridError::TooFewNodes { axis, n });
            }
            axes.push(Axis { lo, hi, n, h: (hi - lo) / (n + 1) as f64 });
        }
        Ok(Self { axes })
    }

    pub fn interval(lo: f64, hi: f64, n: usize) -> Result<Self, GridError> {
        Self::new(1, &[(lo, hi)], &[n])
    }

    pub fn rectangle(x: (f64, f64), y: (f64, f64), nx: usize, ny: usize) -> Result<Self, GridError> {
        Self::new(2, &[x, y], &[nx, ny])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    /// Number of interior nodes.
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn h_min(&self) -> f64 {
        self.axes.iter().map(|a| a.h).fold(f64::INFINITY, f64::min)
    }

    /// Volume owned by one interior node, `prod h_k`.
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.h).product()
    }

    /// Measure of the domain.
    pub fn volume(&self) -> f64 {
        self.axes.iter().map(|a| a.extent()).product()
    }

    /// Sum of trapezoidal weights (in cell volumes) carried by boundary nodes:
    /// `prod (n_k + 1) - prod n_k`.
    fn boundary_weight(&self) -> f64 {
        let full: f64 = self.axes.iter().map(|a| (a.n + 1) as f64).product();
        let inner: f64 = self.axes.iter().map(|a| a.n as f64).product();
        full - inner
    }

    /// Coordinates of interior node `index`.
    pub fn point(&self, index: usize) -> Vec<f64> {
        let mut rem = index;
        self.axes
            .iter()
            .map(|a| {
                let i = rem % a.n;
                rem /= a.n;
                a.coord(i)
            })
            .collect()
    }

    /// Distance from interior node `index` to the boundary.
    pub fn boundary_distance(&self, index: usize) -> f64 {
        self.point(index).iter().zip(&self.axes).map(|(&x, a)| (x - a.lo).min(a.hi - x)).fold(f64::INFINITY, f64::min)
    }

    /// Samples `f` at every interior node.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.len()).map(|k| f(&self.point(k))).collect()
    }

    fn check(&self, f: &Field) -> Result<(), GridError> {
        if f.values.len() != self.len() {
            return Err(GridError::ShapeMismatch { expected: self.len(), got: f.values.len() });
        }
        Ok(())
    }

    /// Central second differences; neighbours outside the interior read the
    /// field's boundary value.
    pub fn laplacian(&self, f: &Field) -> Result<Field, GridError> {
        self.check(f)?;
        let mut out = vec![0.0; self.len()];
        self.laplacian_into(&f.values, f.boundary_value, &mut out);
        Ok(Field { values: out, boundary_value: 0.0 })
    }

    /// Allocation-free Laplacian used by the time stepper and iterative solvers.
    pub(crate) fn laplacian_into(&self, values: &[f64], boundary: f64, out: &mut [f64]) {
        match self.axes.as_slice() {
            [ax] => {
                let n = ax.n;
                let inv = 1.0 / (ax.h * ax.h);
                for i in 0..n {
                    let left = if i == 0 { boundary } else { values[i - 1] };
                    let right = if i + 1 == n { boundary } else { values[i + 1] };
                    out[i] = (left - 2.0 * values[i] + right) * inv;
                }
            }
            [ax, ay] => {
                let (nx, ny) = (ax.n, ay.n);
                let invx = 1.0 / (ax.h * ax.h);
                let invy = 1.0 / (ay.h * ay.h);
                for j in 0..ny {
                    for i in 0..nx {
                        let k = i + nx * j;
                        let c = values[k];
                        let w = if i == 0 { boundary } else { values[k - 1] };
                        let e = if i + 1 == nx { boundary } else { values[k + 1] };
                        let s = if j == 0 { boundary } else { values[k - nx] };
                        let nn = if j + 1 == ny { boundary } else { values[k + nx] };
                        out[k] = (w - 2.0 * c + e) * invx + (s - 2.0 * c + nn) * invy;
                    }
                }
            }
            _ => unreachable!("grid dimension validated at construction"),
        }
    }

    /// Trapezoidal quadrature over the closed domain: interior nodes carry a
    /// full cell volume, boundary nodes the usual fractional weights.
    pub fn integrate(&self, f: &Field) -> Result<f64, GridError> {
        self.check(f)?;
        Ok(self.integrate_raw(&f.values, f.boundary_value))
    }

    pub(crate) fn integrate_raw(&self, values: &[f64], boundary: f64) -> f64 {
        let interior: f64 = values.iter().sum();
        self.cell_volume() * (interior + boundary * self.boundary_weight())
    }

    /// Edge-based Dirichlet energy: sum over grid edges of squared difference
    /// quotients times the cell volume. Equals the exact energy of the
    /// piecewise-linear interpolant in 1D.
    pub fn dirichlet_energy(&self, f: &Field) -> Result<f64, GridError> {
        self.check(f)?;
        Ok(self.energy_raw(&f.values, f.boundary_value))
    }

    pub(crate) fn energy_raw(&self, values: &[f64], boundary: f64) -> f64 {
        self.bilinear_raw(values, boundary, values, boundary)
    }

    /// Bilinear form associated with [`Grid::dirichlet_energy`].
    pub fn energy_form(&self, f: &Field, g: &Field) -> Result<f64, GridError> {
        self.check(f)?;
        self.check(g)?;
        Ok(self.bilinear_raw(&f.values, f.boundary_value, &g.values, g.boundary_value))
    }

    fn bilinear_raw(&self, f: &[f64], fb: f64, g: &[f64], gb: f64) -> f64 {
        let vol = self.cell_volume();
        match self.axes.as_slice() {
            [ax] => {
                let n = ax.n;
                let mut acc = 0.0;
                for e in 0..=n {
                    let (fl, gl) = if e == 0 { (fb, gb) } else { (f[e - 1], g[e - 1]) };
                    let (fr, gr) = if e == n { (fb, gb) } else { (f[e], g[e]) };
                    acc += (fr - fl) * (gr - gl);
                }
                acc * vol / (ax.h * ax.h)
            }
            [ax, ay] => {
                let (nx, ny) = (ax.n, ay.n);
                let mut accx = 0.0;
                for j in 0..ny {
                    for e in 0..=nx {
                        let (fl, gl) = if e == 0 { (fb, gb) } else { (f[e - 1 + nx * j], g[e - 1 + nx * j]) };
                        let (fr, gr) = if e == nx { (fb, gb) } else { (f[e + nx * j], g[e + nx * j]) };
                        accx += (fr - fl) * (gr - gl);
                    }
                }
                let mut accy = 0.0;
                for i in 0..nx {
                    for e in 0..=ny {
                        let (fl, gl) = if e == 0 { (fb, gb) } else { (f[i + nx * (e - 1)], g[i + nx * (e - 1)]) };
                        let (fr, gr) = if e == ny { (fb, gb) } else { (f[i + nx * e], g[i + nx * e]) };
                        accy += (fr - fl) * (gr - gl);
                    }
                }
                vol * (accx / (ax.h * ax.h) + accy / (ay.h * ay.h))
            }
            _ => unreachable!("grid dimension validated at construction"),
        }
    }

    /// Discrete H^1_0 distance, `sqrt(E(f - g))`. The difference carries the
    /// boundary value `f.b - g.b`.
    pub fn h1_distance(&self, f: &Field, g: &Field) -> Result<f64, GridError> {
        let d = f.sub(g)?;
        Ok(self.dirichlet_energy(&d)?.max(0.0).sqrt())
    }

    /// Discrete L^2 distance using the same quadrature as [`Grid::integrate`].
    pub fn l2_distance(&self, f: &Field, g: &Field) -> Result<f64, GridError> {
        let d = f.sub(g)?;
        self.check(&d)?;
        let sq = d.map(|v| v * v);
        Ok(self.integrate(&sq)?.max(0.0).sqrt())
    }
}

/// `max_k |f_k / phi_k|` over interior nodes.
pub fn phi_weighted_sup(f: &Field, phi: &Field) -> Result<f64, GridError> {
    if f.values.len() != phi.values.len() {
        return Err(GridError::ShapeMismatch { expected: phi.values.len(), got: f.values.len() });
    }
    let mut sup: f64 = 0.0;
    for (k, (&v, &p)) in f.values.iter().zip(&phi.values).enumerate() {
        if p <= 0.0 || p.is_nan() {
            return Err(GridError::NonPositiveWeight { index: k, value: p });
        }
        sup = sup.max((v / p).abs());
    }
    Ok(sup)
}

/// Nodal samples on the interior of a grid plus the value on the boundary.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Field {
    values: Vec<f64>,
    boundary_value: f64,
}

impl Field {
    pub fn new(values: Vec<f64>, boundary_value: f64) -> Result<Self, GridError> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(GridError::NonFinite { index, value });
        }
        if !boundary_value.is_finite() {
            return Err(GridError::NonFinite { index: usize::MAX, value: boundary_value });
        }
        Ok(Self { values, boundary_value })
    }

    /// Field sized for `grid`, checked against it.
    pub fn on(grid: &Grid, values: Vec<f64>, boundary_value: f64) -> Result<Self, GridError> {
        let f = Self::new(values, boundary_value)?;
        grid.check(&f)?;
        Ok(f)
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self { values: vec![value; grid.len()], boundary_value: value }
    }

    pub fn from_fn(grid: &Grid, boundary_value: f64, f: impl Fn(&[f64]) -> f64) -> Result<Self, GridError> {
        Self::new(grid.sample(f), boundary_value)
    }

    pub(crate) fn from_parts_unchecked(values: Vec<f64>, boundary_value: f64) -> Self {
        Self { values, boundary_value }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn boundary_value(&self) -> f64 {
        self.boundary_value
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Applies `op` to every value, boundary included.
    pub fn map(&self, op: impl Fn(f64) -> f64) -> Field {
        Field { values: self.values.iter().map(|&v| op(v)).collect(), boundary_value: op(self.boundary_value) }
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    pub fn sub(&self, other: &Field) -> Result<Field, GridError> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Field) -> Result<Field, GridError> {
        self.zip_with(other, |a, b| a + b)
    }

    fn zip_with(&self, other: &Field, op: impl Fn(f64, f64) -> f64) -> Result<Field, GridError> {
        if self.values.len() != other.values.len() {
            return Err(GridError::ShapeMismatch { expected: self.values.len(), got: other.values.len() });
        }
        Ok(Field {
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| op(a, b)).collect(),
            boundary_value: op(self.boundary_value, other.boundary_value),
        })
    }

    /// Max-norm distance over interior nodes.
    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.boundary_value.is_finite() && self.values.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit(n: usize) -> Grid {
        Grid::interval(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn node_layout() {
        let g = unit(9);
        assert!((g.axes()[0].h - 0.1).abs() < 1e-15);
        let xs: Vec<f64> = (0..9).map(|k| g.point(k)[0]).collect();
        for (i, x) in xs.iter().enumerate() {
            assert!((x - 0.1 * (i + 1) as f64).abs() < 1e-14);
        }
        let sq = Grid::rectangle((0.0, 1.0), (0.0, 1.0), 9, 9).unwrap();
        assert_eq!(sq.len(), 81);
        assert_eq!(sq.point(10), vec![g.point(1)[0], g.point(1)[0]]);
        let g2 = Grid::interval(0.0, 2.0, 19).unwrap();
        assert!((g2.axes()[0].h - 0.1).abs() < 1e-15);
    }

    #[test]
    fn construction_errors() {
        assert_eq!(Grid::interval(0.0, 1.0, 2), Err(GridError::TooFewNodes { axis: 0, n: 2 }));
        assert!(matches!(Grid::interval(1.0, 1.0, 5), Err(GridError::NonPositiveExtent { .. })));
        assert!(matches!(Grid::interval(1.0, 0.0, 5), Err(GridError::NonPositiveExtent { .. })));
        assert_eq!(Grid::new(3, &[(0.0, 1.0); 3], &[5; 3]), Err(GridError::BadDimension(3)));
        assert!(matches!(Grid::new(2, &[(0.0, 1.0)], &[5, 5]), Err(GridError::AxisCount { .. })));
    }

    #[test]
    fn field_rejects_non_finite() {
        assert!(Field::new(vec![1.0, f64::NAN], 0.0).is_err());
        assert!(Field::new(vec![1.0], f64::INFINITY).is_err());
        let g = unit(5);
        assert!(matches!(Field::on(&g, vec![0.0; 4], 0.0), Err(GridError::ShapeMismatch { .. })));
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        for g in [unit(7), Grid::rectangle((0.0, 2.0), (-1.0, 1.0), 5, 8).unwrap()] {
            let f = Field::constant(&g, 3.25);
            let lap = g.laplacian(&f).unwrap();
            assert!(lap.values().iter().all(|v| v.abs() < 1e-9));
        }
    }

    #[test]
    fn laplacian_exact_on_quadratic() {
        let g = unit(99);
        let f = Field::from_fn(&g, 0.0, |p| p[0] * (1.0 - p[0]) / 2.0).unwrap();
        let lap = g.laplacian(&f).unwrap();
        for v in lap.values() {
            assert!((v + 1.0).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn laplacian_second_order_on_sine() {
        let err = |n: usize| {
            let g = unit(n);
            let f = Field::from_fn(&g, 0.0, |p| (PI * p[0]).sin()).unwrap();
            let lap = g.laplacian(&f).unwrap();
            lap.values().iter().zip(f.values()).map(|(l, s)| (l + PI * PI * s).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(19), err(39));
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn integrate_examples() {
        let g = unit(9);
        assert!((g.integrate(&Field::constant(&g, 1.0)).unwrap() - 1.0).abs() < 1e-14);
        let g = unit(99);
        let s = Field::from_fn(&g, 0.0, |p| (PI * p[0]).sin()).unwrap();
        let h = g.axes()[0].h;
        assert!((g.integrate(&s).unwrap() - 2.0 / PI).abs() < h * h);
        let w = Field::from_fn(&g, 0.0, |p| 6.0 * p[0] * (1.0 - p[0])).unwrap();
        assert!((g.integrate(&w).unwrap() - 1.0).abs() < h * h + 1e-14);
    }

    #[test]
    fn integrate_constant_on_rectangle() {
        let g = Grid::rectangle((0.0, 2.0), (1.0, 4.0), 4, 7).unwrap();
        let f = Field::constant(&g, 2.5);
        assert!((g.integrate(&f).unwrap() - 2.5 * 6.0).abs() < 1e-12);
        assert!((g.volume() - 6.0).abs() < 1e-15);
    }

    #[test]
    fn energy_examples() {
        let g = unit(99);
        let h = g.axes()[0].h;
        assert_eq!(g.dirichlet_energy(&Field::constant(&g, 0.0)).unwrap(), 0.0);
        let w = Field::from_fn(&g, 0.0, |p| 6.0 * p[0] * (1.0 - p[0])).unwrap();
        assert!((g.dirichlet_energy(&w).unwrap() - 12.0).abs() < 20.0 * h * h);
        let s = Field::from_fn(&g, 0.0, |p| PI / 2.0 * (PI * p[0]).sin()).unwrap();
        let e = g.dirichlet_energy(&s).unwrap();
        assert!((e - PI.powi(4) / 8.0).abs() < 20.0 * h * h, "{e}");
    }

    #[test]
    fn energy_matches_piecewise_linear_interpolant() {
        // Hand-integrated energy of the P1 interpolant of three nodal values.
        let g = Grid::interval(0.0, 2.0, 3).unwrap(); // h = 0.5
        let f = Field::new(vec![1.0, 3.0, 2.0], 0.5).unwrap();
        let slopes = [(1.0 - 0.5) / 0.5, (3.0 - 1.0) / 0.5, (2.0 - 3.0) / 0.5, (0.5 - 2.0) / 0.5];
        let exact: f64 = slopes.iter().map(|s| s * s * 0.5).sum();
        assert!((g.dirichlet_energy(&f).unwrap() - exact).abs() < 1e-13);
    }

    #[test]
    fn summation_by_parts() {
        for g in [unit(17), Grid::rectangle((0.0, 1.0), (0.0, 2.0), 6, 9).unwrap()] {
            let f = Field::from_fn(&g, 0.0, |p| p.iter().map(|x| (3.0 * x).sin() + x * x).sum()).unwrap();
            let q = Field::from_fn(&g, 0.0, |p| p.iter().map(|x| (5.0 * x).cos()).product::<f64>() + 0.3).unwrap();
            let lap = g.laplacian(&f).unwrap();
            let lhs: f64 = -lap.values().iter().zip(q.values()).map(|(a, b)| a * b).sum::<f64>() * g.cell_volume();
            let rhs = g.energy_form(&f, &q).unwrap();
            assert!((lhs - rhs).abs() < 1e-10 * rhs.abs().max(1.0), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn phi_weighted_sup_cases() {
        let g = unit(9);
        let phi = Field::from_fn(&g, 0.0, |p| p[0] * (1.0 - p[0]) / 2.0).unwrap();
        assert!((phi_weighted_sup(&phi, &phi).unwrap() - 1.0).abs() < 1e-15);
        assert!((phi_weighted_sup(&phi.scale(2.0), &phi).unwrap() - 2.0).abs() < 1e-15);
        let mut bad = phi.values().to_vec();
        bad[4] = 0.0;
        let bad = Field::new(bad, 0.0).unwrap();
        assert!(matches!(phi_weighted_sup(&phi, &bad), Err(GridError::NonPositiveWeight { index: 4, .. })));
    }

    #[test]
    fn h1_distance_of_sine_perturbation() {
        let g = unit(199);
        let base = Field::from_fn(&g, 0.0, |p| 6.0 * p[0] * (1.0 - p[0])).unwrap();
        let delta = 1e-2;
        let pert = Field::from_fn(&g, 0.0, |p| delta * (PI * p[0]).sin()).unwrap();
        let f = base.add(&pert).unwrap();
        let d = g.h1_distance(&f, &base).unwrap();
        let exact = delta * PI / 2f64.sqrt();
        assert!((d / exact - 1.0).abs() < 1e-4, "{d} vs {exact}");
        assert_eq!(g.h1_distance(&base, &base).unwrap(), 0.0);
        assert!((g.h1_distance(&base, &f).unwrap() - d).abs() < 1e-15);
    }
}
