//! Uniform 1-D grids, sampled fields, finite differences and trapezoidal
//! quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_POINTS: usize = 8;
pub const DEFAULT_POINTS: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub num_points: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, num_points: usize) -> Result<Self> {
        let grid = Grid1D {
            x_min,
            x_max,
            num_points,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.x_max > self.x_min) {
            return Err(Error::InvalidInput(format!(
                "grid needs finite x_min < x_max, got [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        if self.num_points < MIN_POINTS {
            return Err(Error::InvalidInput(format!(
                "grid needs at least {MIN_POINTS} points, got {}",
                self.num_points
            )));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.num_points - 1) as f64
    }

    /// Node coordinate; the last node is exactly `x_max`.
    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.num_points {
            self.x_max
        } else {
            self.x_min + i as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.num_points).map(|i| self.x(i)).collect()
    }

    /// Composite trapezoidal weights.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut w = vec![h; self.num_points];
        w[0] = 0.5 * h;
        w[self.num_points - 1] = 0.5 * h;
        w
    }

    pub fn is_unit_interval(&self) -> bool {
        self.x_min == 0.0 && self.x_max == 1.0
    }
}

/// Real field sampled on a [`Grid1D`].
///
/// A field tagged `dirichlet` has exactly zero boundary values, and its
/// derivatives use odd reflection across the boundary for ghost nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid1D,
    values: Vec<f64>,
    dirichlet: bool,
}

impl Field {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.num_points {
            return Err(Error::Shape(format!(
                "field has {} values for a {}-point grid",
                values.len(),
                grid.num_points
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite field value at node {i}"
            )));
        }
        Ok(Field {
            grid,
            values,
            dirichlet: false,
        })
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().into_iter().map(f).collect();
        Field::new(grid, values)
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Field {
            grid,
            values: vec![0.0; grid.num_points],
            dirichlet: false,
        }
    }

    pub fn constant(grid: Grid1D, c: f64) -> Self {
        Field {
            grid,
            values: vec![c; grid.num_points],
            dirichlet: false,
        }
    }

    /// Tags the field as homogeneous-Dirichlet. Boundary values within
    /// round-off of zero are set to exactly zero; anything larger is an error.
    pub fn into_dirichlet(mut self) -> Result<Self> {
        let scale = self.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let last = self.values.len() - 1;
        for i in [0, last] {
            if self.values[i].abs() > 1e-12 * scale {
                return Err(Error::InvalidInput(format!(
                    "dirichlet field has boundary value {} at node {i}",
                    self.values[i]
                )));
            }
            self.values[i] = 0.0;
        }
        self.dirichlet = true;
        Ok(self)
    }

    pub fn with_tag_of(mut self, other: &Field) -> Self {
        if other.dirichlet {
            let last = self.values.len() - 1;
            self.values[0] = 0.0;
            self.values[last] = 0.0;
        }
        self.dirichlet = other.dirichlet;
        self
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_dirichlet(&self) -> bool {
        self.dirichlet
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub(crate) fn from_parts(grid: Grid1D, values: Vec<f64>, dirichlet: bool) -> Self {
        debug_assert_eq!(values.len(), grid.num_points);
        Field {
            grid,
            values,
            dirichlet,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Shape(format!(
                "grid mismatch: {:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }
}

/// ∫ f g dx by the composite trapezoidal rule.
pub fn inner_product(f: &Field, g: &Field) -> Result<f64> {
    f.same_grid(g)?;
    Ok(weighted_sum(&f.grid, &f.values, &g.values))
}

pub(crate) fn weighted_sum(grid: &Grid1D, f: &[f64], g: &[f64]) -> f64 {
    let n = f.len();
    let interior: f64 = (1..n - 1).map(|i| f[i] * g[i]).sum();
    grid.spacing() * (interior + 0.5 * (f[0] * g[0] + f[n - 1] * g[n - 1]))
}

/// Second-order finite-difference derivative of order 1, 2 or 3.
///
/// Interior nodes use central stencils. Dirichlet-tagged fields take ghost
/// values by odd reflection (`u(-x) = -u(x)` about each boundary); untagged
/// fields fall back to one-sided second-order stencils where a central
/// stencil would leave the grid.
pub fn derivative(u: &Field, order: usize) -> Result<Field> {
    if !(1..=3).contains(&order) {
        return Err(Error::InvalidInput(format!(
            "derivative order must be 1, 2 or 3, got {order}"
        )));
    }
    let n = u.values.len();
    if n < 2 * order + 2 {
        return Err(Error::InvalidInput(format!(
            "order-{order} derivative needs at least {} points",
            2 * order + 2
        )));
    }
    let mut out = vec![0.0; n];
    derivative_into(&u.grid, &u.values, u.dirichlet, order, &mut out);
    Ok(Field::from_parts(u.grid, out, false))
}

pub(crate) fn derivative_into(
    grid: &Grid1D,
    v: &[f64],
    dirichlet: bool,
    order: usize,
    out: &mut [f64],
) {
    let n = v.len() as isize;
    let h = grid.spacing();
    let at = |i: isize| -> f64 {
        if i < 0 {
            -v[(-i) as usize]
        } else if i >= n {
            -v[(2 * (n - 1) - i) as usize]
        } else {
            v[i as usize]
        }
    };
    let reach: isize = if order == 3 { 2 } else { 1 };
    let central = |i: isize| -> f64 {
        match order {
            1 => (at(i + 1) - at(i - 1)) / (2.0 * h),
            2 => (at(i + 1) - 2.0 * at(i) + at(i - 1)) / (h * h),
            _ => (at(i + 2) - 2.0 * at(i + 1) + 2.0 * at(i - 1) - at(i - 2)) / (2.0 * h * h * h),
        }
    };
    for i in reach..n - reach {
        out[i as usize] = central(i);
    }
    let edges = (0..reach).chain(n - reach..n);
    if dirichlet {
        for i in edges {
            out[i as usize] = central(i);
        }
        return;
    }
    // one-sided stencils; `s = 1` reads forward, `s = -1` backward
    let one_sided = |i: isize, s: isize| -> f64 {
        let p = |k: isize| v[(i + s * k) as usize];
        let sign = s as f64;
        match order {
            1 => sign * (-3.0 * p(0) + 4.0 * p(1) - p(2)) / (2.0 * h),
            2 => (2.0 * p(0) - 5.0 * p(1) + 4.0 * p(2) - p(3)) / (h * h),
            _ => {
                sign * (-5.0 * p(0) + 18.0 * p(1) - 24.0 * p(2) + 14.0 * p(3) - 3.0 * p(4))
                    / (2.0 * h * h * h)
            }
        }
    };
    for i in edges {
        let s = if i < reach { 1 } else { -1 };
        out[i as usize] = one_sided(i, s);
    }
}

/// Node-wise `u^power`; `power = 0` gives the constant-one field.
pub fn pointwise_map(u: &Field, power: u32) -> Field {
    let values = u.values.iter().map(|v| v.powi(power as i32)).collect();
    Field::from_parts(u.grid, values, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn interior_max_err(got: &Field, exact: impl Fn(f64) -> f64, skip: usize) -> f64 {
        let g = got.grid();
        (skip..g.num_points - skip)
            .map(|i| (got.values()[i] - exact(g.x(i))).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn grid_validation() {
        assert!(Grid1D::new(0.0, 1.0, 7).is_err());
        assert!(Grid1D::new(1.0, 1.0, 10).is_err());
        let g = Grid1D::new(-1.0, 1.0, 201).unwrap();
        assert_eq!(g.x(200), 1.0);
        assert!((g.spacing() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn inner_product_constants_linear_sine() {
        let g = Grid1D::new(0.0, 1.0, 101).unwrap();
        let one = Field::constant(g, 1.0);
        assert_eq!(inner_product(&one, &one).unwrap(), 1.0);

        let x = Field::from_fn(g, |x| x).unwrap();
        assert!((inner_product(&x, &x).unwrap() - 1.0 / 3.0).abs() < 2e-4);

        let g2 = Grid1D::new(-1.0, 1.0, 201).unwrap();
        let s = Field::from_fn(g2, |x| (PI * (x + 1.0) / 2.0).sin()).unwrap();
        assert!((inner_product(&s, &s).unwrap() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn inner_product_grid_mismatch() {
        let a = Field::zeros(Grid1D::new(0.0, 1.0, 10).unwrap());
        let b = Field::zeros(Grid1D::new(0.0, 1.0, 11).unwrap());
        assert!(matches!(inner_product(&a, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn derivative_exact_on_linear() {
        let g = Grid1D::new(-2.0, 3.0, 40).unwrap();
        let u = Field::from_fn(g, |x| 1.5 - 0.75 * x).unwrap();
        let d = derivative(&u, 1).unwrap();
        assert!(d.values().iter().all(|v| (v + 0.75).abs() < 1e-12));
        for order in 2..=3 {
            let d = derivative(&u, order).unwrap();
            assert!(d.values().iter().all(|v| v.abs() < 1e-9));
        }
    }

    #[test]
    fn derivative_of_zero_is_zero() {
        let g = Grid1D::new(0.0, 1.0, 16).unwrap();
        for order in 1..=3 {
            let d = derivative(&Field::zeros(g), order).unwrap();
            assert!(d.values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn derivative_rejects_bad_order() {
        let g = Grid1D::new(0.0, 1.0, 16).unwrap();
        assert!(derivative(&Field::zeros(g), 0).is_err());
        assert!(derivative(&Field::zeros(g), 4).is_err());
    }

    #[test]
    fn second_derivative_of_sine() {
        let g = Grid1D::new(-1.0, 1.0, 201).unwrap();
        let u = Field::from_fn(g, |x| (PI * x).sin()).unwrap();
        let d2 = derivative(&u, 2).unwrap();
        let err = interior_max_err(&d2, |x| -PI * PI * (PI * x).sin(), 1);
        assert!(err <= 5e-3, "err = {err}");
    }

    #[test]
    fn one_sided_stencils_are_second_order() {
        // boundary error of untagged fields shrinks ~4x per refinement
        let f = |x: f64| (1.3 * x).exp();
        for order in 1..=3usize {
            let exact = |x: f64| 1.3f64.powi(order as i32) * (1.3 * x).exp();
            let errs: Vec<f64> = [41usize, 81]
                .iter()
                .map(|&n| {
                    let g = Grid1D::new(0.0, 1.0, n).unwrap();
                    let d = derivative(&Field::from_fn(g, f).unwrap(), order).unwrap();
                    (0..n)
                        .map(|i| (d.values()[i] - exact(g.x(i))).abs())
                        .fold(0.0, f64::max)
                })
                .collect();
            assert!(errs[0] / errs[1] > 3.5, "order {order}: {errs:?}");
        }
    }

    #[test]
    fn derivative_converges_at_second_order() {
        for order in 1..=3usize {
            let errs: Vec<f64> = [64usize, 127]
                .iter()
                .map(|&n| {
                    // doubling the number of intervals
                    let g = Grid1D::new(0.0, 2.0, n).unwrap();
                    let k = 2.0 * PI / 2.0;
                    let u = Field::from_fn(g, |x| (k * x).sin()).unwrap();
                    let d = derivative(&u, order).unwrap();
                    let exact = |x: f64| match order {
                        1 => k * (k * x).cos(),
                        2 => -k * k * (k * x).sin(),
                        _ => -k * k * k * (k * x).cos(),
                    };
                    interior_max_err(&d, exact, 2)
                })
                .collect();
            assert!(errs[0] / errs[1] >= 3.5, "order {order}: {errs:?}");
        }
    }

    #[test]
    fn odd_reflection_keeps_boundary_error_small() {
        for k in 1..=3 {
            let kk = k as f64 * PI / 2.0;
            let errs: Vec<f64> = [101usize, 201]
                .iter()
                .map(|&n| {
                    let g = Grid1D::new(-1.0, 1.0, n).unwrap();
                    let u = Field::from_fn(g, |x| (kk * (x + 1.0)).sin())
                        .unwrap()
                        .into_dirichlet()
                        .unwrap();
                    let d2 = derivative(&u, 2).unwrap();
                    let exact = |x: f64| -kk * kk * (kk * (x + 1.0)).sin();
                    [0, 1, n - 2, n - 1]
                        .iter()
                        .map(|&i| (d2.values()[i] - exact(g.x(i))).abs())
                        .fold(0.0, f64::max)
                })
                .collect();
            assert!(errs[0] < 1e-2 && errs[0] / errs[1] > 3.5, "k={k}: {errs:?}");
        }
    }

    #[test]
    fn dirichlet_tag_requires_zero_boundaries() {
        let g = Grid1D::new(0.0, 1.0, 10).unwrap();
        assert!(Field::constant(g, 1.0).into_dirichlet().is_err());
        let f = Field::from_fn(g, |x| x * (1.0 - x))
            .unwrap()
            .into_dirichlet()
            .unwrap();
        assert_eq!(f.values()[0], 0.0);
        assert_eq!(f.values()[9], 0.0);
    }

    #[test]
    fn pointwise_powers() {
        let g = Grid1D::new(0.0, 2.0, 9).unwrap();
        let u = Field::from_fn(g, |x| x).unwrap();
        assert_eq!(pointwise_map(&u, 1).values(), u.values());
        assert!(pointwise_map(&u, 0).values().iter().all(|&v| v == 1.0));
        let sq = pointwise_map(&u, 2);
        for i in 0..9 {
            assert_eq!(sq.values()[i], g.x(i) * g.x(i));
        }
    }

    #[test]
    fn inner_product_symmetric_bilinear() {
        let g = Grid1D::new(-1.0, 2.0, 33).unwrap();
        let f = Field::from_fn(g, |x| x.sin()).unwrap();
        let h = Field::from_fn(g, |x| x * x - 0.3).unwrap();
        let k = Field::from_fn(g, |x| (2.0 * x).cos()).unwrap();
        let fh = inner_product(&f, &h).unwrap();
        assert_eq!(fh, inner_product(&h, &f).unwrap());
        let combo = Field::new(
            g,
            f.values()
                .iter()
                .zip(k.values())
                .map(|(a, b)| 2.0 * a - 3.0 * b)
                .collect(),
        )
        .unwrap();
        let lhs = inner_product(&combo, &h).unwrap();
        let rhs = 2.0 * fh - 3.0 * inner_product(&k, &h).unwrap();
        assert!((lhs - rhs).abs() < 1e-14);
    }
}
