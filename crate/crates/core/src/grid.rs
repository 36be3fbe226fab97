//! Product-space discretization: uniform grids on a centered box in
//! R^n x R^m, lattice-aligned dyadic rectangles with their eccentricity,
//! and concentric rectangle dilation.
//!
//! Cells per axis are powers of two so every dyadic rectangle lands exactly
//! on cell boundaries. The box is centered at the origin, which keeps power
//! weights `(|x|+delta)^a` away from sampling their singularity: cell centers
//! never sit at zero.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which factor of the product space an operation acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Factor {
    First,
    Second,
}

/// Plain serializable description of a grid (the JSON interface form).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: u32,
    pub m: u32,
    pub extent_x: f64,
    pub extent_y: f64,
    pub cells_x: u32,
    pub cells_y: u32,
}

/// Uniform discretization of the centered box
/// `[-extent_x, extent_x]^n x [-extent_y, extent_y]^m`.
///
/// Immutable after construction; all derived quantities are precomputed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct ProductGrid {
    n: u32,
    m: u32,
    extent_x: f64,
    extent_y: f64,
    cells_x: u32,
    cells_y: u32,
    step_x: f64,
    step_y: f64,
}

impl TryFrom<GridSpec> for ProductGrid {
    type Error = Error;
    fn try_from(s: GridSpec) -> Result<Self> {
        ProductGrid::new(s.n, s.m, s.extent_x, s.extent_y, s.cells_x, s.cells_y)
    }
}

impl From<ProductGrid> for GridSpec {
    fn from(g: ProductGrid) -> Self {
        GridSpec {
            n: g.n,
            m: g.m,
            extent_x: g.extent_x,
            extent_y: g.extent_y,
            cells_x: g.cells_x,
            cells_y: g.cells_y,
        }
    }
}

impl ProductGrid {
    pub fn new(
        n: u32,
        m: u32,
        extent_x: f64,
        extent_y: f64,
        cells_x: u32,
        cells_y: u32,
    ) -> Result<Self> {
        if n == 0 || n > 2 {
            return Err(Error::UnsupportedDimension { which: "n", value: n });
        }
        if m == 0 || m > 2 {
            return Err(Error::UnsupportedDimension { which: "m", value: m });
        }
        if !(extent_x > 0.0 && extent_x.is_finite()) {
            return Err(Error::NonPositiveExtent { axis: "extent_x", value: extent_x });
        }
        if !(extent_y > 0.0 && extent_y.is_finite()) {
            return Err(Error::NonPositiveExtent { axis: "extent_y", value: extent_y });
        }
        if !cells_x.is_power_of_two() {
            return Err(Error::NonPowerOfTwoCells { axis: "cells_x", value: cells_x });
        }
        if !cells_y.is_power_of_two() {
            return Err(Error::NonPowerOfTwoCells { axis: "cells_y", value: cells_y });
        }
        Ok(Self {
            n,
            m,
            extent_x,
            extent_y,
            cells_x,
            cells_y,
            step_x: 2.0 * extent_x / cells_x as f64,
            step_y: 2.0 * extent_y / cells_y as f64,
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }
    pub fn m(&self) -> u32 {
        self.m
    }
    pub fn extent_x(&self) -> f64 {
        self.extent_x
    }
    pub fn extent_y(&self) -> f64 {
        self.extent_y
    }
    pub fn cells_x(&self) -> u32 {
        self.cells_x
    }
    pub fn cells_y(&self) -> u32 {
        self.cells_y
    }
    pub fn step_x(&self) -> f64 {
        self.step_x
    }
    pub fn step_y(&self) -> f64 {
        self.step_y
    }

    /// Volume of one cell of the first factor, `step_x^n`.
    pub fn cell_vol_x(&self) -> f64 {
        self.step_x.powi(self.n as i32)
    }

    /// Volume of one cell of the second factor, `step_y^m`.
    pub fn cell_vol_y(&self) -> f64 {
        self.step_y.powi(self.m as i32)
    }

    /// Volume of one product cell.
    pub fn cell_vol(&self) -> f64 {
        self.cell_vol_x() * self.cell_vol_y()
    }

    /// Number of cells of the first factor, `cells_x^n`.
    pub fn factor_cells_x(&self) -> usize {
        (self.cells_x as usize).pow(self.n)
    }

    /// Number of cells of the second factor, `cells_y^m`.
    pub fn factor_cells_y(&self) -> usize {
        (self.cells_y as usize).pow(self.m)
    }

    /// Total number of product cells.
    pub fn total_cells(&self) -> usize {
        self.factor_cells_x() * self.factor_cells_y()
    }

    fn axis_center(extent: f64, step: f64, i: u32) -> f64 {
        -extent + (i as f64 + 0.5) * step
    }

    /// Center coordinates of first-factor cell `ix` (flat, row-major for n=2).
    /// Only the first `n` slots of the returned array are meaningful.
    pub fn center_x(&self, ix: usize) -> [f64; 2] {
        match self.n {
            1 => [Self::axis_center(self.extent_x, self.step_x, ix as u32), 0.0],
            _ => {
                let cells = self.cells_x as usize;
                let a = (ix / cells) as u32;
                let b = (ix % cells) as u32;
                [
                    Self::axis_center(self.extent_x, self.step_x, a),
                    Self::axis_center(self.extent_x, self.step_x, b),
                ]
            }
        }
    }

    /// Center coordinates of second-factor cell `iy`.
    pub fn center_y(&self, iy: usize) -> [f64; 2] {
        match self.m {
            1 => [Self::axis_center(self.extent_y, self.step_y, iy as u32), 0.0],
            _ => {
                let cells = self.cells_y as usize;
                let a = (iy / cells) as u32;
                let b = (iy % cells) as u32;
                [
                    Self::axis_center(self.extent_y, self.step_y, a),
                    Self::axis_center(self.extent_y, self.step_y, b),
                ]
            }
        }
    }

    /// Euclidean distance between two first-factor cell centers.
    pub fn distance_x(&self, a: usize, b: usize) -> f64 {
        let pa = self.center_x(a);
        let pb = self.center_x(b);
        match self.n {
            1 => (pa[0] - pb[0]).abs(),
            _ => ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt(),
        }
    }

    /// Euclidean distance between two second-factor cell centers.
    pub fn distance_y(&self, a: usize, b: usize) -> f64 {
        let pa = self.center_y(a);
        let pb = self.center_y(b);
        match self.m {
            1 => (pa[0] - pb[0]).abs(),
            _ => ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt(),
        }
    }
}

/// Build a grid, wrapped for cheap sharing between functions and reports.
pub fn make_grid(
    n: u32,
    m: u32,
    extent_x: f64,
    extent_y: f64,
    cells_x: u32,
    cells_y: u32,
) -> Result<Arc<ProductGrid>> {
    Ok(Arc::new(ProductGrid::new(
        n, m, extent_x, extent_y, cells_x, cells_y,
    )?))
}

/// Real-valued samples on the product grid, one per cell, stored row-major:
/// the first-factor cell index varies slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Arc<ProductGrid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn from_values(grid: &Arc<ProductGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.total_cells() {
            return Err(Error::LengthMismatch {
                expected: grid.total_cells(),
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { index });
        }
        Ok(Self { grid: Arc::clone(grid), values })
    }

    pub fn zeros(grid: &Arc<ProductGrid>) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: vec![0.0; grid.total_cells()],
        }
    }

    pub fn constant(grid: &Arc<ProductGrid>, value: f64) -> Result<Self> {
        Self::from_values(grid, vec![value; grid.total_cells()])
    }

    /// Sample `f(x, y)` at every product cell center. The slices passed to
    /// `f` hold the first `n` and `m` coordinates respectively.
    pub fn from_fn(
        grid: &Arc<ProductGrid>,
        f: impl Fn(&[f64], &[f64]) -> f64,
    ) -> Result<Self> {
        let fcx = grid.factor_cells_x();
        let fcy = grid.factor_cells_y();
        let n = grid.n() as usize;
        let m = grid.m() as usize;
        let mut values = Vec::with_capacity(fcx * fcy);
        for ix in 0..fcx {
            let cx = grid.center_x(ix);
            for iy in 0..fcy {
                let cy = grid.center_y(iy);
                values.push(f(&cx[..n], &cy[..m]));
            }
        }
        Self::from_values(grid, values)
    }

    /// Indicator of a single product cell.
    pub fn single_cell(grid: &Arc<ProductGrid>, ix: usize, iy: usize) -> Result<Self> {
        let mut out = Self::zeros(grid);
        let idx = out.index(ix, iy);
        if idx >= out.values.len() {
            return Err(Error::LengthMismatch {
                expected: out.values.len(),
                got: idx + 1,
            });
        }
        out.values[idx] = 1.0;
        Ok(out)
    }

    /// Indicator of a dyadic rectangle (1 on its cells, 0 elsewhere).
    pub fn rectangle_indicator(grid: &Arc<ProductGrid>, rect: &DyadicRectangle) -> Result<Self> {
        rect.validate(grid)?;
        let mut out = Self::zeros(grid);
        for ix in rect.q_cells(grid) {
            for iy in rect.p_cells(grid) {
                let idx = out.index(ix, iy);
                out.values[idx] = 1.0;
            }
        }
        Ok(out)
    }

    pub fn grid(&self) -> &Arc<ProductGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        ix * self.grid.factor_cells_y() + iy
    }

    #[inline]
    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[self.index(ix, iy)]
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        self.grid == other.grid
    }

    /// Pointwise `self + c * other`.
    pub fn add_scaled(&self, other: &GridFunction, c: f64) -> Result<GridFunction> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + c * b)
            .collect();
        GridFunction::from_values(&self.grid, values)
    }

    pub fn scale(&self, c: f64) -> GridFunction {
        GridFunction {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub(crate) fn from_raw(grid: Arc<ProductGrid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.total_cells());
        Self { grid, values }
    }
}

/// Exponent tuple for the product operator and its characteristics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentConfig {
    pub n: u32,
    pub m: u32,
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
    pub q: f64,
    pub theta: f64,
}

impl ExponentConfig {
    pub fn new(n: u32, m: u32, alpha: f64, beta: f64, p: f64, q: f64, theta: f64) -> Result<Self> {
        if n == 0 || n > 2 {
            return Err(Error::UnsupportedDimension { which: "n", value: n });
        }
        if m == 0 || m > 2 {
            return Err(Error::UnsupportedDimension { which: "m", value: m });
        }
        if !(alpha > 0.0 && alpha < n as f64) {
            return Err(Error::InvalidExponent {
                name: "alpha",
                value: alpha,
                constraint: format!("0 < alpha < n = {n}"),
            });
        }
        if !(beta > 0.0 && beta < m as f64) {
            return Err(Error::InvalidExponent {
                name: "beta",
                value: beta,
                constraint: format!("0 < beta < m = {m}"),
            });
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidExponent {
                name: "p",
                value: p,
                constraint: "1 < p < inf".into(),
            });
        }
        if !(q >= p && q.is_finite()) {
            return Err(Error::InvalidExponent {
                name: "q",
                value: q,
                constraint: format!("p = {p} <= q < inf"),
            });
        }
        if !(theta > 1.0 && theta.is_finite()) {
            return Err(Error::InvalidExponent {
                name: "theta",
                value: theta,
                constraint: "theta > 1".into(),
            });
        }
        Ok(Self { n, m, alpha, beta, p, q, theta })
    }

    /// Check a bump exponent `t` against `1 < t <= theta` (or strict `< theta`).
    pub fn validate_t(&self, t: f64, strictly_below_theta: bool) -> Result<()> {
        let ok = t > 1.0 && if strictly_below_theta { t < self.theta } else { t <= self.theta };
        if !ok {
            return Err(Error::InvalidExponent {
                name: "t",
                value: t,
                constraint: if strictly_below_theta {
                    format!("1 < t < theta = {}", self.theta)
                } else {
                    format!("1 < t <= theta = {}", self.theta)
                },
            });
        }
        Ok(())
    }

    /// The grid this configuration expects.
    pub fn matches_grid(&self, grid: &ProductGrid) -> bool {
        self.n == grid.n() && self.m == grid.m()
    }
}

/// Product `Q x P` of a dyadic cube in each factor, in cell units.
///
/// `q_corner`/`p_corner` hold per-axis corner cell indices (only the first
/// `n` resp. `m` entries are used); sides are cell counts and powers of two.
/// Corners do not have to be multiples of the side: dilated cubes are valid
/// rectangles even though the enumerated lattice family is aligned-only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicRectangle {
    pub q_corner: [u32; 2],
    pub q_side: u32,
    pub p_corner: [u32; 2],
    pub p_side: u32,
}

impl DyadicRectangle {
    pub fn new(
        grid: &ProductGrid,
        q_corner: [u32; 2],
        q_side: u32,
        p_corner: [u32; 2],
        p_side: u32,
    ) -> Result<Self> {
        let rect = Self { q_corner, q_side, p_corner, p_side };
        rect.validate(grid)?;
        Ok(rect)
    }

    pub fn validate(&self, grid: &ProductGrid) -> Result<()> {
        if !self.q_side.is_power_of_two() {
            return Err(Error::RectangleOutOfGrid {
                reason: format!("q_side {} is not a power of two", self.q_side),
            });
        }
        if !self.p_side.is_power_of_two() {
            return Err(Error::RectangleOutOfGrid {
                reason: format!("p_side {} is not a power of two", self.p_side),
            });
        }
        for axis in 0..grid.n() as usize {
            if self.q_corner[axis] + self.q_side > grid.cells_x() {
                return Err(Error::RectangleOutOfGrid {
                    reason: format!(
                        "Q corner {} + side {} exceeds {} cells",
                        self.q_corner[axis],
                        self.q_side,
                        grid.cells_x()
                    ),
                });
            }
        }
        for axis in 0..grid.m() as usize {
            if self.p_corner[axis] + self.p_side > grid.cells_y() {
                return Err(Error::RectangleOutOfGrid {
                    reason: format!(
                        "P corner {} + side {} exceeds {} cells",
                        self.p_corner[axis],
                        self.p_side,
                        grid.cells_y()
                    ),
                });
            }
        }
        Ok(())
    }

    /// Physical side length of Q, `|Q|^{1/n}`.
    pub fn q_side_len(&self, grid: &ProductGrid) -> f64 {
        self.q_side as f64 * grid.step_x()
    }

    /// Physical side length of P, `|P|^{1/m}`.
    pub fn p_side_len(&self, grid: &ProductGrid) -> f64 {
        self.p_side as f64 * grid.step_y()
    }

    /// Measure of Q, `(q_side * step_x)^n`.
    pub fn q_measure(&self, grid: &ProductGrid) -> f64 {
        self.q_side_len(grid).powi(grid.n() as i32)
    }

    /// Measure of P.
    pub fn p_measure(&self, grid: &ProductGrid) -> f64 {
        self.p_side_len(grid).powi(grid.m() as i32)
    }

    /// Eccentricity `-log2(|Q|^{1/n} / |P|^{1/m})` as a real number.
    pub fn eccentricity(&self, grid: &ProductGrid) -> f64 {
        -(self.q_side_len(grid) / self.p_side_len(grid)).log2()
    }

    /// Eccentricity as an exact integer, when it is one. On grids with equal
    /// steps the side ratio is a ratio of powers of two and this never fails.
    pub fn eccentricity_int(&self, grid: &ProductGrid) -> Option<i32> {
        let e = self.eccentricity(grid);
        let rounded = e.round();
        if (e - rounded).abs() <= 1e-9 * rounded.abs().max(1.0) {
            Some(rounded as i32)
        } else {
            None
        }
    }

    /// Flat first-factor cell indices covered by Q.
    pub fn q_cells(&self, grid: &ProductGrid) -> Vec<usize> {
        cube_cells(self.q_corner, self.q_side, grid.cells_x(), grid.n())
    }

    /// Flat second-factor cell indices covered by P.
    pub fn p_cells(&self, grid: &ProductGrid) -> Vec<usize> {
        cube_cells(self.p_corner, self.p_side, grid.cells_y(), grid.m())
    }
}

fn cube_cells(corner: [u32; 2], side: u32, cells_per_axis: u32, dim: u32) -> Vec<usize> {
    match dim {
        1 => (corner[0]..corner[0] + side).map(|i| i as usize).collect(),
        _ => {
            let stride = cells_per_axis as usize;
            let mut out = Vec::with_capacity((side as usize).pow(2));
            for a in corner[0]..corner[0] + side {
                for b in corner[1]..corner[1] + side {
                    out.push(a as usize * stride + b as usize);
                }
            }
            out
        }
    }
}

/// Selection of a sub-family of the dyadic rectangle lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RectangleFilter {
    /// Every aligned lattice rectangle.
    All,
    /// Only rectangles whose eccentricity is exactly the given integer.
    Eccentricity(i32),
    /// Only rectangles with `|Q|^{1/n} = |P|^{1/m}`; identical to
    /// `Eccentricity(0)`.
    Diagonal,
}

/// Aligned dyadic cubes of one factor: every side `2^k <= cells`, corners at
/// multiples of the side. Returned in (side ascending, corner lexicographic)
/// order.
fn factor_cubes(cells: u32, dim: u32) -> Vec<([u32; 2], u32)> {
    let mut out = Vec::new();
    let mut side = 1u32;
    while side <= cells {
        let positions = cells / side;
        match dim {
            1 => {
                for i in 0..positions {
                    out.push(([i * side, 0], side));
                }
            }
            _ => {
                for a in 0..positions {
                    for b in 0..positions {
                        out.push(([a * side, b * side], side));
                    }
                }
            }
        }
        side *= 2;
    }
    out
}

/// Enumerate every aligned lattice rectangle matching the filter, exactly
/// once, in a deterministic order (Q cubes outer, P cubes inner, each in
/// side-ascending then corner-lexicographic order).
///
/// The continuum supremum ranges over arbitrary cubes; this finite aligned
/// family is the artifact's supremum domain throughout, so all reported
/// characteristics are comparable like for like.
pub fn enumerate_dyadic_rectangles(
    grid: &ProductGrid,
    filter: RectangleFilter,
) -> Vec<DyadicRectangle> {
    let q_family = factor_cubes(grid.cells_x(), grid.n());
    let p_family = factor_cubes(grid.cells_y(), grid.m());
    let mut out = Vec::new();
    for &(q_corner, q_side) in &q_family {
        for &(p_corner, p_side) in &p_family {
            let rect = DyadicRectangle { q_corner, q_side, p_corner, p_side };
            let keep = match filter {
                RectangleFilter::All => true,
                RectangleFilter::Eccentricity(ell) => {
                    rect.eccentricity_int(grid) == Some(ell)
                }
                RectangleFilter::Diagonal => rect.eccentricity_int(grid) == Some(0),
            };
            if keep {
                out.push(rect);
            }
        }
    }
    out
}

/// Shrink one factor of the rectangle concentrically: the selected cube's
/// side becomes `2^-ell` times the original, the other factor is unchanged.
///
/// When exact concentricity is impossible (the leftover `side - new_side`
/// is odd in cells), the cube shifts toward the lower corner; the tie-break
/// is deterministic and keeps the result on the cell lattice.
pub fn dilate_rectangle(
    grid: &ProductGrid,
    rect: &DyadicRectangle,
    ell: i32,
    factor: Factor,
) -> Result<DyadicRectangle> {
    if ell < 0 {
        return Err(Error::InvalidExponent {
            name: "ell",
            value: ell as f64,
            constraint: "ell >= 0".into(),
        });
    }
    let side = match factor {
        Factor::First => rect.q_side,
        Factor::Second => rect.p_side,
    };
    let k = side.trailing_zeros() as i32;
    if ell > k {
        return Err(Error::DilationTooSmall { side, ell });
    }
    let new_side = side >> ell;
    let shift = (side - new_side) / 2;
    let mut out = *rect;
    match factor {
        Factor::First => {
            out.q_side = new_side;
            out.q_corner = [rect.q_corner[0] + shift, rect.q_corner[1] + shift];
        }
        Factor::Second => {
            out.p_side = new_side;
            out.p_corner = [rect.p_corner[0] + shift, rect.p_corner[1] + shift];
        }
    }
    out.validate(grid)?;
    Ok(out)
}

/// Total box volume of one factor.
pub fn factor_box_volume(grid: &ProductGrid, factor: Factor) -> f64 {
    match factor {
        Factor::First => (2.0 * grid.extent_x()).powi(grid.n() as i32),
        Factor::Second => (2.0 * grid.extent_y()).powi(grid.m() as i32),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid(cells: u32) -> Arc<ProductGrid> {
        make_grid(1, 1, 1.0, 1.0, cells, cells).unwrap()
    }

    #[test]
    fn midpoint_centers_of_four_cells() {
        let g = unit_grid(4);
        assert_eq!(g.total_cells(), 16);
        let centers: Vec<f64> = (0..4).map(|i| g.center_x(i)[0]).collect();
        assert_eq!(centers, vec![-0.75, -0.25, 0.25, 0.75]);
    }

    #[test]
    fn rejects_non_power_of_two_cells() {
        assert!(matches!(
            ProductGrid::new(1, 1, 1.0, 1.0, 3, 4),
            Err(Error::NonPowerOfTwoCells { axis: "cells_x", value: 3 })
        ));
    }

    #[test]
    fn rejects_bad_extent_and_dimension() {
        assert!(ProductGrid::new(1, 1, 0.0, 1.0, 4, 4).is_err());
        assert!(ProductGrid::new(1, 1, -1.0, 1.0, 4, 4).is_err());
        assert!(ProductGrid::new(3, 1, 1.0, 1.0, 4, 4).is_err());
        assert!(ProductGrid::new(1, 0, 1.0, 1.0, 4, 4).is_err());
    }

    #[test]
    fn product_cell_count_with_first_factor_plane() {
        let g = make_grid(2, 1, 1.0, 2.0, 4, 8).unwrap();
        assert_eq!(g.total_cells(), 4 * 4 * 8);
    }

    #[test]
    fn cell_volume_times_count_is_box_volume() {
        for (n, m, cells) in [(1u32, 1u32, 8u32), (2, 1, 4), (1, 2, 4), (2, 2, 4)] {
            let g = make_grid(n, m, 1.5, 0.75, cells, cells).unwrap();
            let vx = g.cell_vol_x() * g.factor_cells_x() as f64;
            let bx = factor_box_volume(&g, Factor::First);
            assert!((vx - bx).abs() <= 1e-12 * bx);
            let vy = g.cell_vol_y() * g.factor_cells_y() as f64;
            let by = factor_box_volume(&g, Factor::Second);
            assert!((vy - by).abs() <= 1e-12 * by);
        }
    }

    /// Independent counting oracle: filter all (corner, side) pairs
    /// exhaustively instead of constructing the family.
    fn count_aligned_intervals(cells: u32) -> usize {
        let mut count = 0;
        for corner in 0..cells {
            for side in 1..=cells {
                if side.is_power_of_two() && corner % side == 0 && corner + side <= cells {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn rectangle_family_counts_on_4x4() {
        let g = unit_grid(4);
        let per_factor = count_aligned_intervals(4);
        assert_eq!(per_factor, 7);
        let all = enumerate_dyadic_rectangles(&g, RectangleFilter::All);
        assert_eq!(all.len(), per_factor * per_factor);
        assert_eq!(all.len(), 49);

        let ecc1 = enumerate_dyadic_rectangles(&g, RectangleFilter::Eccentricity(1));
        assert_eq!(ecc1.len(), 10);

        let far = enumerate_dyadic_rectangles(&g, RectangleFilter::Eccentricity(10));
        assert!(far.is_empty());
    }

    #[test]
    fn rectangles_are_unique() {
        let g = unit_grid(8);
        let all = enumerate_dyadic_rectangles(&g, RectangleFilter::All);
        let set: std::collections::HashSet<_> = all.iter().copied().collect();
        assert_eq!(set.len(), all.len());
    }

    #[test]
    fn eccentricity_families_partition_the_all_family() {
        let g = unit_grid(8);
        let all: std::collections::HashSet<_> =
            enumerate_dyadic_rectangles(&g, RectangleFilter::All)
                .into_iter()
                .collect();
        let mut union = std::collections::HashSet::new();
        for ell in -10..=10 {
            for r in enumerate_dyadic_rectangles(&g, RectangleFilter::Eccentricity(ell)) {
                assert!(union.insert(r), "rectangle in two eccentricity families");
            }
        }
        assert_eq!(union, all);
    }

    #[test]
    fn diagonal_equals_eccentricity_zero() {
        let g = unit_grid(8);
        let diag = enumerate_dyadic_rectangles(&g, RectangleFilter::Diagonal);
        let ecc0 = enumerate_dyadic_rectangles(&g, RectangleFilter::Eccentricity(0));
        assert_eq!(diag, ecc0);
    }

    #[test]
    fn eccentricity_matches_side_ratio_on_equal_steps() {
        let g = unit_grid(8);
        for r in enumerate_dyadic_rectangles(&g, RectangleFilter::All) {
            let ell = r.eccentricity_int(&g).unwrap();
            let ratio = r.q_side_len(&g) / r.p_side_len(&g);
            assert_eq!(ratio, 2f64.powi(-ell));
        }
    }

    #[test]
    fn dilate_concentric_halving() {
        let g = unit_grid(8);
        let r = DyadicRectangle::new(&g, [0, 0], 8, [0, 0], 8).unwrap();
        let d = dilate_rectangle(&g, &r, 1, Factor::First).unwrap();
        assert_eq!(d.q_corner[0], 2);
        assert_eq!(d.q_side, 4);
        assert_eq!(d.p_side, 8);
    }

    #[test]
    fn dilate_odd_remainder_shifts_to_lower_corner() {
        let g = unit_grid(8);
        let r = DyadicRectangle::new(&g, [0, 0], 8, [0, 0], 8).unwrap();
        let d = dilate_rectangle(&g, &r, 3, Factor::First).unwrap();
        assert_eq!(d.q_corner[0], 3);
        assert_eq!(d.q_side, 1);
    }

    #[test]
    fn dilate_below_one_cell_errors() {
        let g = unit_grid(8);
        let r = DyadicRectangle::new(&g, [0, 0], 2, [0, 0], 2).unwrap();
        assert!(matches!(
            dilate_rectangle(&g, &r, 2, Factor::First),
            Err(Error::DilationTooSmall { side: 2, ell: 2 })
        ));
    }

    #[test]
    fn dilate_volume_is_exact() {
        let g = unit_grid(16);
        for r in enumerate_dyadic_rectangles(&g, RectangleFilter::All) {
            let k = r.q_side.trailing_zeros() as i32;
            for ell in 0..=k {
                let d = dilate_rectangle(&g, &r, ell, Factor::First).unwrap();
                let expected = 2f64.powi(-(ell * g.n() as i32)) * r.q_measure(&g);
                assert_eq!(d.q_measure(&g), expected);
            }
        }
    }

    #[test]
    fn grid_function_validates_shape_and_finiteness() {
        let g = unit_grid(4);
        assert!(GridFunction::from_values(&g, vec![0.0; 15]).is_err());
        let mut vals = vec![0.0; 16];
        vals[3] = f64::NAN;
        assert!(matches!(
            GridFunction::from_values(&g, vals),
            Err(Error::NonFiniteValue { index: 3 })
        ));
    }

    #[test]
    fn exponent_config_validation() {
        assert!(ExponentConfig::new(1, 1, 0.5, 0.5, 2.0, 2.0, 3.0).is_ok());
        assert!(ExponentConfig::new(1, 1, 1.5, 0.5, 2.0, 2.0, 3.0).is_err());
        assert!(ExponentConfig::new(1, 1, 0.5, 0.5, 1.0, 2.0, 3.0).is_err());
        assert!(ExponentConfig::new(1, 1, 0.5, 0.5, 2.0, 1.5, 3.0).is_err());
        assert!(ExponentConfig::new(1, 1, 0.5, 0.5, 2.0, 2.0, 1.0).is_err());
        let cfg = ExponentConfig::new(1, 1, 0.5, 0.5, 2.0, 2.0, 3.0).unwrap();
        assert!(cfg.validate_t(3.0, false).is_ok());
        assert!(cfg.validate_t(3.0, true).is_err());
        assert!(cfg.validate_t(1.0, false).is_err());
    }

    #[test]
    fn grid_serializes_round_trip() {
        let g = make_grid(2, 1, 1.25, 2.0, 8, 16).unwrap();
        let json = serde_json::to_string(&*g).unwrap();
        let back: ProductGrid = serde_json::from_str(&json).unwrap();
        assert_eq!(*g, back);
    }

    mod proptests {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn eccentricity_union_equals_all(pow_x in 1u32..5, pow_y in 1u32..5, ext in 0.25f64..4.0) {
                // equal extents make the step ratio a power of two, so every
                // rectangle has an integer eccentricity
                let g = make_grid(1, 1, ext, ext, 1u32 << pow_x, 1u32 << pow_y).unwrap();
                let all = enumerate_dyadic_rectangles(&g, RectangleFilter::All);
                let mut matched = 0usize;
                for ell in -16..=16 {
                    matched += enumerate_dyadic_rectangles(&g, RectangleFilter::Eccentricity(ell)).len();
                }
                prop_assert_eq!(matched, all.len());
            }

            #[test]
            fn dilation_volume_ratio_exact(pow in 2u32..5, ell in 0i32..3) {
                let cells = 1u32 << pow;
                let g = make_grid(1, 1, 1.0, 1.0, cells, cells).unwrap();
                let r = DyadicRectangle::new(&g, [0, 0], cells, [0, 0], cells).unwrap();
                if ell <= cells.trailing_zeros() as i32 {
                    let d = dilate_rectangle(&g, &r, ell, Factor::First).unwrap();
                    prop_assert_eq!(d.q_measure(&g), 2f64.powi(-ell) * r.q_measure(&g));
                }
            }
        }
    }
}
