//! Uniform cell-centered Cartesian grids in one and two dimensions.
//!
//! Cells are stored row-major with the x index running fastest, so the flat
//! index of cell `(i, j)` is `j * nx + i`. In 1D, `ny == 1`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

/// Alignment tolerance, in units of cells.
const ALIGN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Distance from `x` to the interval (zero inside).
    pub fn distance(&self, x: f64) -> f64 {
        (self.lo - x).max(x - self.hi).max(0.0)
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }
}

/// Returns `Some(n)` when `value` is within tolerance of the integer `n`.
fn as_whole(value: f64) -> Option<usize> {
    let n = value.round();
    if n >= 0.0 && (value - n).abs() <= ALIGN_TOL * n.max(1.0) {
        Some(n as usize)
    } else {
        None
    }
}

fn axis_name(axis: usize) -> &'static str {
    ["x", "y"].get(axis).copied().unwrap_or("?")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    bounds: Vec<Interval>,
    dx: f64,
    cells: Vec<usize>,
}

impl Grid {
    /// Builds a grid over `bounds` (one interval per axis) with spacing `dx`.
    pub fn new(bounds: &[Interval], dx: f64) -> Result<Grid> {
        if bounds.is_empty() || bounds.len() > 2 {
            return config_err(format!(
                "grid dimension must be 1 or 2, got {}",
                bounds.len()
            ));
        }
        if !(dx > 0.0) || !dx.is_finite() {
            return config_err(format!("dx must be positive and finite, got {dx}"));
        }
        let mut cells = Vec::with_capacity(bounds.len());
        for (axis, b) in bounds.iter().enumerate() {
            if !(b.hi > b.lo) {
                return config_err(format!(
                    "axis {}: empty interval [{}, {}]",
                    axis_name(axis),
                    b.lo,
                    b.hi
                ));
            }
            let ratio = b.width() / dx;
            match as_whole(ratio) {
                Some(n) if n > 0 => cells.push(n),
                _ => {
                    let rem = (ratio - ratio.floor()) * dx;
                    return config_err(format!(
                        "axis {}: width {} is not a multiple of dx = {} (remainder {:e})",
                        axis_name(axis),
                        b.width(),
                        dx,
                        rem
                    ));
                }
            }
        }
        Ok(Grid {
            bounds: bounds.to_vec(),
            dx,
            cells,
        })
    }

    pub fn new_1d(lo: f64, hi: f64, dx: f64) -> Result<Grid> {
        Grid::new(&[Interval::new(lo, hi)], dx)
    }

    pub fn new_2d(x: Interval, y: Interval, dx: f64) -> Result<Grid> {
        Grid::new(&[x, y], dx)
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn bounds(&self) -> &[Interval] {
        &self.bounds
    }

    /// Cell count along `axis`; axes beyond the grid dimension report 1.
    pub fn cells(&self, axis: usize) -> usize {
        self.cells.get(axis).copied().unwrap_or(1)
    }

    pub fn nx(&self) -> usize {
        self.cells(0)
    }

    pub fn ny(&self) -> usize {
        self.cells(1)
    }

    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx.powi(self.dim() as i32)
    }

    pub fn volume(&self) -> f64 {
        self.bounds.iter().map(Interval::width).product()
    }

    /// Center of cell `i` along `axis`.
    ///
    /// Computed from the interval midpoint so that grids on symmetric boxes
    /// have exactly antisymmetric centers.
    pub fn center(&self, axis: usize, i: usize) -> f64 {
        let n = self.cells[axis] as f64;
        self.bounds[axis].mid() + (i as f64 + 0.5 - 0.5 * n) * self.dx
    }

    pub fn centers(&self, axis: usize) -> Vec<f64> {
        (0..self.cells(axis)).map(|i| self.center(axis, i)).collect()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx() + i
    }

    pub fn unravel(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx(), idx / self.nx())
    }

    /// Cell center as a point; the second coordinate is zero in 1D.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.unravel(idx);
        let y = if self.dim() == 2 { self.center(1, j) } else { 0.0 };
        [self.center(0, i), y]
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        (0..self.len()).map(|idx| self.point(idx)).collect()
    }

    /// Selects the cells whose centers lie inside `subbox`.
    pub fn restrict(&self, subbox: &[Interval]) -> Result<SubDomain> {
        if subbox.len() != self.dim() {
            return config_err(format!(
                "sub-box has {} axes, grid has {}",
                subbox.len(),
                self.dim()
            ));
        }
        let mut ranges = Vec::with_capacity(self.dim());
        for (axis, (sb, b)) in subbox.iter().zip(&self.bounds).enumerate() {
            let lo = (sb.lo - b.lo) / self.dx;
            let hi = (sb.hi - b.lo) / self.dx;
            let (Some(lo_i), Some(hi_i)) = (as_whole(lo), as_whole(hi)) else {
                return config_err(format!(
                    "axis {}: sub-box [{}, {}] does not align with grid faces (dx = {})",
                    axis_name(axis),
                    sb.lo,
                    sb.hi,
                    self.dx
                ));
            };
            if hi_i <= lo_i || hi_i > self.cells[axis] {
                return config_err(format!(
                    "axis {}: sub-box [{}, {}] is empty or leaves the grid [{}, {}]",
                    axis_name(axis),
                    sb.lo,
                    sb.hi,
                    b.lo,
                    b.hi
                ));
            }
            ranges.push(lo_i..hi_i);
        }
        Ok(SubDomain {
            parent: self.clone(),
            bounds: subbox.to_vec(),
            ranges,
        })
    }

    /// The whole grid viewed as a sub-domain of itself.
    pub fn full(&self) -> SubDomain {
        SubDomain {
            parent: self.clone(),
            bounds: self.bounds.clone(),
            ranges: self.cells.iter().map(|&n| 0..n).collect(),
        }
    }

    /// Whether a point lies inside the (closed) box `region`.
    pub fn point_in(region: &[Interval], p: &[f64; 2]) -> bool {
        region.iter().zip(p).all(|(r, &x)| r.contains(x))
    }
}

/// A face-aligned block of cells of a parent grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SubDomain {
    parent: Grid,
    bounds: Vec<Interval>,
    ranges: Vec<Range<usize>>,
}

impl SubDomain {
    pub fn parent(&self) -> &Grid {
        &self.parent
    }

    pub fn bounds(&self) -> &[Interval] {
        &self.bounds
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    fn range(&self, axis: usize) -> Range<usize> {
        self.ranges.get(axis).cloned().unwrap_or(0..1)
    }

    pub fn len(&self) -> usize {
        self.ranges.iter().map(|r| r.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn volume(&self) -> f64 {
        self.len() as f64 * self.parent.cell_volume()
    }

    pub fn contains(&self, idx: usize) -> bool {
        let (i, j) = self.parent.unravel(idx);
        self.range(0).contains(&i) && self.range(1).contains(&j)
    }

    /// Flat parent indices, in the sub-grid's own row-major order.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        let (rx, ry) = (self.range(0), self.range(1));
        ry.flat_map(move |j| rx.clone().map(move |i| self.parent.index(i, j)))
    }

    /// Flat parent indices of cells outside this sub-domain.
    pub fn complement(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.parent.len()).filter(move |&idx| !self.contains(idx))
    }

    /// A standalone grid covering exactly this sub-domain.
    pub fn grid(&self) -> Grid {
        Grid {
            bounds: self.bounds.clone(),
            dx: self.parent.dx,
            cells: self.ranges.iter().map(|r| r.len()).collect(),
        }
    }

    /// Copies the values of a parent-grid field that fall inside this sub-domain.
    pub fn extract(&self, field: &[f64]) -> Vec<f64> {
        self.indices().map(|idx| field[idx]).collect()
    }
}
