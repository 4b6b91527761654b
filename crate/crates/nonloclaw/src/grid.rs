//! Periodic uniform Cartesian grids in one and two dimensions, fields on
//! them, shifts, difference quotients and discrete norms.
//!
//! All reductions run in a fixed lexicographic cell order with compensated
//! accumulation, so results are bit-stable across runs and thread counts.

use crate::error::{Error, Result};
use std::io::{BufRead, Write};

/// Maximum supported dimension.
pub const MAX_DIM: usize = 2;

/// A periodic uniform Cartesian grid. Index arithmetic wraps modulo the
/// cell count on every axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    cells: Vec<usize>,
    spacing: Vec<f64>,
}

impl Grid {
    pub fn new(cells: &[usize], spacing: &[f64]) -> Result<Self> {
        if cells.is_empty() || cells.len() > MAX_DIM {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1 or 2, got {}",
                cells.len()
            )));
        }
        if cells.len() != spacing.len() {
            return Err(Error::InvalidGrid(
                "cells and spacing must have the same length".into(),
            ));
        }
        if cells.iter().any(|&n| n < 2) {
            return Err(Error::InvalidGrid("every axis needs at least 2 cells".into()));
        }
        if spacing.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
            return Err(Error::InvalidGrid("spacing must be strictly positive".into()));
        }
        Ok(Grid {
            cells: cells.to_vec(),
            spacing: spacing.to_vec(),
        })
    }

    /// 1D convenience constructor.
    pub fn line(cells: usize, spacing: f64) -> Result<Self> {
        Grid::new(&[cells], &[spacing])
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    /// Axis length `cells * spacing`.
    pub fn extent(&self, axis: usize) -> f64 {
        self.cells[axis] as f64 * self.spacing[axis]
    }

    pub fn num_cells(&self) -> usize {
        self.cells.iter().product()
    }

    /// Product of the spacings; the discrete measure of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Linear index of a (wrapped) multi-index. Lexicographic, axis 0 major.
    pub fn linear(&self, idx: &[isize]) -> usize {
        debug_assert_eq!(idx.len(), self.dim());
        let mut lin = 0usize;
        for (axis, &i) in idx.iter().enumerate() {
            let n = self.cells[axis] as isize;
            let wrapped = i.rem_euclid(n) as usize;
            lin = lin * self.cells[axis] + wrapped;
        }
        lin
    }

    /// Multi-index of a linear index.
    pub fn multi(&self, mut lin: usize) -> Vec<usize> {
        let mut idx = vec![0usize; self.dim()];
        for axis in (0..self.dim()).rev() {
            idx[axis] = lin % self.cells[axis];
            lin /= self.cells[axis];
        }
        idx
    }

    /// Physical coordinates of the cell center with the given linear index.
    pub fn center(&self, lin: usize) -> Vec<f64> {
        self.multi(lin)
            .iter()
            .zip(&self.spacing)
            .map(|(&i, &h)| (i as f64 + 0.5) * h)
            .collect()
    }

    /// Precompute `x -> x + s` as a linear-index permutation table.
    pub fn shift_table(&self, s: &ShiftVector) -> Result<Vec<u32>> {
        s.check(self)?;
        let n = self.num_cells();
        let mut table = vec![0u32; n];
        for (lin, slot) in table.iter_mut().enumerate() {
            let mut idx: Vec<isize> = self.multi(lin).iter().map(|&i| i as isize).collect();
            for (axis, o) in s.offsets().iter().enumerate() {
                idx[axis] += o;
            }
            *slot = self.linear(&idx) as u32;
        }
        Ok(table)
    }
}

/// A grid-aligned shift, in cells per axis (signed).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ShiftVector {
    offsets: Vec<isize>,
}

impl ShiftVector {
    pub fn new(offsets: &[isize]) -> Self {
        ShiftVector {
            offsets: offsets.to_vec(),
        }
    }

    pub fn offsets(&self) -> &[isize] {
        &self.offsets
    }

    pub fn is_zero(&self) -> bool {
        self.offsets.iter().all(|&o| o == 0)
    }

    pub fn negated(&self) -> Self {
        ShiftVector {
            offsets: self.offsets.iter().map(|o| -o).collect(),
        }
    }

    pub fn add(&self, other: &ShiftVector) -> Self {
        ShiftVector {
            offsets: self
                .offsets
                .iter()
                .zip(&other.offsets)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Euclidean length of the physical displacement `s * dx`.
    pub fn physical_norm(&self, grid: &Grid) -> f64 {
        self.offsets
            .iter()
            .zip(grid.spacing())
            .map(|(&o, &h)| (o as f64 * h).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn check(&self, grid: &Grid) -> Result<()> {
        if self.offsets.len() != grid.dim() {
            return Err(Error::InvalidShift(format!(
                "shift has {} components on a {}-d grid",
                self.offsets.len(),
                grid.dim()
            )));
        }
        for (axis, &o) in self.offsets.iter().enumerate() {
            if o.unsigned_abs() >= grid.cells()[axis] {
                return Err(Error::InvalidShift(format!(
                    "offset {} on axis {} exceeds the {}-cell period",
                    o,
                    axis,
                    grid.cells()[axis]
                )));
            }
        }
        Ok(())
    }
}

/// A real-valued function sampled on a grid; the discrete `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: Grid,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_cells() {
            return Err(Error::FieldMismatch(format!(
                "{} values for a grid with {} cells",
                values.len(),
                grid.num_cells()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "value {} at cell {}",
                values[pos], pos
            )));
        }
        Ok(GridField { grid, values })
    }

    pub fn constant(grid: Grid, c: f64) -> Result<Self> {
        let n = grid.num_cells();
        GridField::new(grid, vec![c; n])
    }

    /// Sample a function of the cell-center coordinates.
    pub fn sample<F: Fn(&[f64]) -> f64>(grid: Grid, f: F) -> Result<Self> {
        let values: Vec<f64> = (0..grid.num_cells()).map(|i| f(&grid.center(i))).collect();
        GridField::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// `result(x) = u(x + s)` with periodic wrap; an exact permutation.
    pub fn shift(&self, s: &ShiftVector) -> Result<GridField> {
        let table = self.grid.shift_table(s)?;
        let values: Vec<f64> = table.iter().map(|&j| self.values[j as usize]).collect();
        Ok(GridField {
            grid: self.grid.clone(),
            values,
        })
    }

    /// Difference quotient `(u(x+s) - u(x)) / |s * dx|`.
    pub fn diff_quotient(&self, s: &ShiftVector) -> Result<GridField> {
        if s.is_zero() {
            return Err(Error::InvalidShift(
                "difference quotient needs a nonzero shift".into(),
            ));
        }
        let norm = s.physical_norm(&self.grid);
        let shifted = self.shift(s)?;
        let values: Vec<f64> = shifted
            .values
            .iter()
            .zip(&self.values)
            .map(|(a, b)| (a - b) / norm)
            .collect();
        GridField::new(self.grid.clone(), values)
    }

    /// Discrete L^p norm, cell-volume weighted; `p = f64::INFINITY` for sup.
    pub fn norm(&self, p: f64) -> Result<f64> {
        if p.is_infinite() && p > 0.0 {
            return Ok(self
                .values
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs())));
        }
        if !(p >= 1.0) {
            return Err(Error::InvalidArgument(format!("norm order p = {p} < 1")));
        }
        let vol = self.grid.cell_volume();
        let sum = kahan_sum(self.values.iter().map(|v| v.abs().powf(p)));
        Ok((vol * sum).powf(1.0 / p))
    }

    /// Cell-volume-weighted sum; the discrete integral of u.
    pub fn mass(&self) -> f64 {
        self.grid.cell_volume() * kahan_sum(self.values.iter().copied())
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with<F: Fn(f64, f64) -> f64>(&self, other: &GridField, f: F) -> Result<GridField> {
        if self.grid != other.grid {
            return Err(Error::FieldMismatch("fields live on different grids".into()));
        }
        let values: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        GridField::new(self.grid.clone(), values)
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Result<GridField> {
        let values: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        GridField::new(self.grid.clone(), values)
    }

    pub fn add(&self, other: &GridField) -> Result<GridField> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridField) -> Result<GridField> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Result<GridField> {
        self.map(|v| c * v)
    }

    /// `axpy`: self + c * other.
    pub fn axpy(&self, c: f64, other: &GridField) -> Result<GridField> {
        self.zip_with(other, |a, b| a + c * b)
    }

    /// Write the field in the snapshot CSV format:
    /// a `# dim,cells,spacing` header, a value line for those, then one
    /// `index...,value` row per cell. Values use the shortest round-trip
    /// decimal representation, so re-reading is bit-exact.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# dim,cells,spacing")?;
        let cells = self
            .grid
            .cells()
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join("x");
        let spacing = self
            .grid
            .spacing()
            .iter()
            .map(|h| format!("{h}"))
            .collect::<Vec<_>>()
            .join("x");
        writeln!(w, "# {},{},{}", self.grid.dim(), cells, spacing)?;
        for (lin, v) in self.values.iter().enumerate() {
            let idx = self.grid.multi(lin);
            let idx = idx
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(",");
            writeln!(w, "{idx},{v}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<GridField> {
        let mut lines = r.lines().enumerate();
        let parse_err = |line: usize, message: &str| Error::Parse {
            line: line + 1,
            message: message.into(),
        };
        let (l0, header) = lines
            .next()
            .ok_or_else(|| parse_err(0, "empty file"))?;
        let header = header?;
        if header.trim() != "# dim,cells,spacing" {
            return Err(parse_err(l0, "expected `# dim,cells,spacing` header"));
        }
        let (l1, meta) = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing metadata line"))?;
        let meta = meta?;
        let meta = meta
            .trim()
            .strip_prefix('#')
            .ok_or_else(|| parse_err(l1, "metadata line must start with `#`"))?;
        let parts: Vec<&str> = meta.trim().split(',').collect();
        if parts.len() != 3 {
            return Err(parse_err(l1, "metadata must be `dim,cells,spacing`"));
        }
        let dim: usize = parts[0]
            .trim()
            .parse()
            .map_err(|_| parse_err(l1, "bad dimension"))?;
        let cells: Vec<usize> = parts[1]
            .split('x')
            .map(|s| s.trim().parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err(l1, "bad cell counts"))?;
        let spacing: Vec<f64> = parts[2]
            .split('x')
            .map(|s| s.trim().parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err(l1, "bad spacings"))?;
        if cells.len() != dim || spacing.len() != dim {
            return Err(parse_err(l1, "dimension mismatch in metadata"));
        }
        let grid = Grid::new(&cells, &spacing)?;
        let mut values = vec![f64::NAN; grid.num_cells()];
        for (lno, line) in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != dim + 1 {
                return Err(parse_err(lno, "wrong number of columns"));
            }
            let idx: Vec<isize> = fields[..dim]
                .iter()
                .map(|s| s.trim().parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| parse_err(lno, "bad cell index"))?;
            let v: f64 = fields[dim]
                .trim()
                .parse()
                .map_err(|_| parse_err(lno, "bad value"))?;
            values[grid.linear(&idx)] = v;
        }
        GridField::new(grid, values)
    }
}

/// Compensated (Kahan) summation in the iterator's order.
pub fn kahan_sum<I: Iterator<Item = f64>>(it: I) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in it {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field_1d(values: &[f64], dx: f64) -> GridField {
        GridField::new(Grid::line(values.len(), dx).unwrap(), values.to_vec()).unwrap()
    }

    #[test]
    fn shift_identity_and_wrap() {
        let u = field_1d(&[1.0, 2.0, 3.0, 4.0], 1.0);
        assert_eq!(u.shift(&ShiftVector::new(&[0])).unwrap().values(), u.values());
        assert_eq!(
            u.shift(&ShiftVector::new(&[1])).unwrap().values(),
            &[2.0, 3.0, 4.0, 1.0]
        );
    }

    #[test]
    fn shift_composition() {
        let u = field_1d(&[0.3, -1.2, 2.5, 0.0, 7.25, -0.5], 0.5);
        let a = ShiftVector::new(&[2]);
        let b = ShiftVector::new(&[-1]);
        let lhs = u.shift(&a).unwrap().shift(&b).unwrap();
        let rhs = u.shift(&a.add(&b)).unwrap();
        assert_eq!(lhs.values(), rhs.values());
    }

    #[test]
    fn shift_too_large_rejected() {
        let u = field_1d(&[1.0, 2.0, 3.0, 4.0], 1.0);
        assert!(u.shift(&ShiftVector::new(&[4])).is_err());
    }

    #[test]
    fn diff_quotient_constant_is_zero() {
        let u = field_1d(&[5.0; 8], 0.25);
        let d = u.diff_quotient(&ShiftVector::new(&[3])).unwrap();
        assert!(d.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn diff_quotient_spike() {
        let u = field_1d(&[0.0, 1.0, 0.0, 0.0], 1.0);
        let d = u.diff_quotient(&ShiftVector::new(&[1])).unwrap();
        assert_eq!(d.values(), &[1.0, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn diff_quotient_zero_shift_rejected() {
        let u = field_1d(&[1.0, 2.0], 1.0);
        assert!(u.diff_quotient(&ShiftVector::new(&[0])).is_err());
    }

    #[test]
    fn norms() {
        let u = field_1d(&[3.0, -4.0], 1.0);
        assert_eq!(u.norm(1.0).unwrap(), 7.0);
        assert_eq!(u.norm(f64::INFINITY).unwrap(), 4.0);
        assert!(u.norm(0.5).is_err());
    }

    #[test]
    fn summation_by_parts() {
        // Sum_x v * D^s u = Sum_x u * D^{-s} v on a periodic grid.
        let n = 16;
        let grid = Grid::line(n, 0.125).unwrap();
        let u = GridField::sample(grid.clone(), |x| (x[0] * 7.0).sin() + 0.3 * x[0]).unwrap();
        let v = GridField::sample(grid, |x| (x[0] * 3.0).cos() - x[0] * x[0]).unwrap();
        for off in [1isize, 2, 5, -3] {
            let s = ShiftVector::new(&[off]);
            let lhs = kahan_sum(
                v.values()
                    .iter()
                    .zip(u.diff_quotient(&s).unwrap().values())
                    .map(|(a, b)| a * b),
            );
            let rhs = kahan_sum(
                u.values()
                    .iter()
                    .zip(v.diff_quotient(&s.negated()).unwrap().values())
                    .map(|(a, b)| a * b),
            );
            assert!((lhs - rhs).abs() < 1e-13, "sbp failed for shift {off}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn interpolation_inequality() {
        let grid = Grid::line(32, 0.3).unwrap();
        let u = GridField::sample(grid, |x| (x[0] * 5.0).sin() * 2.0 + 0.7).unwrap();
        let n1 = u.norm(1.0).unwrap();
        let ninf = u.norm(f64::INFINITY).unwrap();
        for p in [2.0, 3.0] {
            let np = u.norm(p).unwrap();
            let bound = n1.powf(1.0 / p) * ninf.powf(1.0 - 1.0 / p);
            assert!(np <= bound * (1.0 + 1e-12), "p={p}: {np} > {bound}");
        }
    }

    #[test]
    fn shift_preserves_norms_2d() {
        let grid = Grid::new(&[6, 4], &[0.5, 0.25]).unwrap();
        let u = GridField::sample(grid, |x| x[0] * 2.0 - (x[1] * 9.0).sin()).unwrap();
        let s = ShiftVector::new(&[2, -1]);
        let v = u.shift(&s).unwrap();
        for p in [1.0, 2.0, f64::INFINITY] {
            assert_eq!(u.norm(p).unwrap(), v.norm(p).unwrap());
        }
        assert_eq!(u.mass(), v.mass());
    }

    #[test]
    fn csv_round_trip_exact() {
        let grid = Grid::new(&[3, 4], &[0.1, 0.7]).unwrap();
        let u = GridField::sample(grid, |x| (x[0] * 17.3).sin() / 3.0 + x[1]).unwrap();
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        let back = GridField::read_csv(&buf[..]).unwrap();
        assert_eq!(u.values(), back.values());
        assert_eq!(u.grid(), back.grid());
    }
}
