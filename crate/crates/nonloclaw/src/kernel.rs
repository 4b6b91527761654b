//! Interaction kernels: horizons, symmetry classes, the subinteraction
//! partition of the axes, and their compilation into grid-aligned
//! quadrature stencils.
//!
//! Quadrature nodes are integer cell multiples, so every shift in a
//! stencil is an exact permutation of the field and no interpolation
//! error enters the nonlocal operator. Weights are renormalized to unit
//! sum, enforcing the kernel normalization hypothesis discretely.

use crate::error::{Error, Result};
use crate::grid::{Grid, ShiftVector};

/// Symmetry class of a kernel's support.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    /// Support symmetric around the origin, kernel even.
    EvenSymmetric,
    /// Support in the nonnegative orthant with the origin in its closure.
    OneSided,
}

/// Radial profile of a kernel, evaluated on the scaled distance
/// `r^2 = sum_j (h_j / delta_j)^2` over the active axes.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Constant,
    /// `(1 - r)_+`
    Triangle,
    /// `(1 - r^2)_+`
    TruncatedQuadratic,
    /// 1D only: one raw weight per lattice ring `|s| = 1..m`.
    Tabulated(Vec<f64>),
}

impl Profile {
    pub fn by_name(name: &str) -> Option<Profile> {
        match name {
            "constant" => Some(Profile::Constant),
            "triangle" => Some(Profile::Triangle),
            "truncated_quadratic" => Some(Profile::TruncatedQuadratic),
            _ => None,
        }
    }
}

/// Kernel description for one or more subinteractions.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub symmetry: Symmetry,
    /// Horizon per axis; only the entries of active axes are read.
    pub horizon: Vec<f64>,
    pub profile: Profile,
    /// Disjoint nonempty axis sets covering `0..dim`, one per subinteraction.
    pub partition: Vec<Vec<usize>>,
}

impl KernelSpec {
    /// Single-subinteraction 1D kernel.
    pub fn line(symmetry: Symmetry, horizon: f64, profile: Profile) -> Self {
        KernelSpec {
            symmetry,
            horizon: vec![horizon],
            profile,
            partition: vec![vec![0]],
        }
    }

    pub fn subinteractions(&self) -> usize {
        self.partition.len()
    }

    /// Profile value at a physical shift, restricted to the given axes.
    /// Returns 0 outside the horizon box (and outside the positive orthant
    /// for one-sided kernels).
    fn profile_value(&self, h: &[f64], axes: &[usize], ring: usize) -> Result<f64> {
        for &axis in axes {
            let d = self.horizon[axis];
            match self.symmetry {
                Symmetry::EvenSymmetric => {
                    if h[axis].abs() > d * (1.0 + 1e-12) {
                        return Ok(0.0);
                    }
                }
                Symmetry::OneSided => {
                    if h[axis] <= 0.0 || h[axis] > d * (1.0 + 1e-12) {
                        return Ok(0.0);
                    }
                }
            }
        }
        let r2: f64 = axes
            .iter()
            .map(|&axis| (h[axis] / self.horizon[axis]).powi(2))
            .sum();
        let r = r2.sqrt();
        let v = match &self.profile {
            Profile::Constant => 1.0,
            Profile::Triangle => (1.0 - r).max(0.0),
            Profile::TruncatedQuadratic => (1.0 - r2).max(0.0),
            Profile::Tabulated(w) => {
                if axes.len() != 1 {
                    return Err(Error::InvalidKernel(
                        "tabulated profiles are 1D (single-axis) only".into(),
                    ));
                }
                if ring == 0 || ring > w.len() {
                    return Err(Error::InvalidKernel(format!(
                        "tabulated profile has {} entries but ring {} was requested",
                        w.len(),
                        ring
                    )));
                }
                w[ring - 1]
            }
        };
        Ok(v)
    }

    /// Check the kernel hypotheses: partition well-formedness, horizon
    /// positivity, nonnegativity of the profile sampled on the quadrature
    /// lattice of the given grid.
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let dim = grid.dim();
        if self.horizon.len() != dim {
            return Err(Error::InvalidKernel(format!(
                "horizon has {} entries on a {dim}-d grid",
                self.horizon.len()
            )));
        }
        if self.partition.is_empty() {
            return Err(Error::InvalidKernel("empty partition".into()));
        }
        let mut seen = vec![false; dim];
        for set in &self.partition {
            if set.is_empty() {
                return Err(Error::InvalidKernel("empty partition set".into()));
            }
            for &axis in set {
                if axis >= dim {
                    return Err(Error::InvalidKernel(format!(
                        "axis {axis} out of range for a {dim}-d grid"
                    )));
                }
                if seen[axis] {
                    return Err(Error::InvalidKernel(format!(
                        "partition sets overlap on axis {axis}"
                    )));
                }
                seen[axis] = true;
            }
        }
        if let Some(axis) = seen.iter().position(|&s| !s) {
            return Err(Error::InvalidKernel(format!(
                "axis {axis} is not covered by the partition"
            )));
        }
        for (axis, &d) in self.horizon.iter().enumerate() {
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::InvalidKernel(format!(
                    "horizon on axis {axis} must be positive"
                )));
            }
        }
        if let Profile::Tabulated(w) = &self.profile {
            if let Some(bad) = w.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::InvalidKernel(format!(
                    "tabulated profile sample {bad} is negative or non-finite"
                )));
            }
        }
        // Sample the profile on each subinteraction's quadrature lattice.
        for i in 0..self.subinteractions() {
            for entry in raw_entries(self, grid, i)? {
                if entry.raw_weight < 0.0 {
                    return Err(Error::InvalidKernel(format!(
                        "negative profile sample at shift {:?}",
                        entry.shift.offsets()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Compile subinteraction `i` into a quadrature stencil on `grid`.
    pub fn build_stencil(&self, grid: &Grid, i: usize) -> Result<Stencil> {
        self.validate(grid)?;
        if i >= self.subinteractions() {
            return Err(Error::InvalidKernel(format!(
                "subinteraction index {i} out of range"
            )));
        }
        let raw = raw_entries(self, grid, i)?;
        let total: f64 = raw.iter().map(|e| e.raw_weight).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidKernel(
                "kernel profile vanishes on the entire quadrature lattice".into(),
            ));
        }
        let entries: Vec<StencilEntry> = raw
            .into_iter()
            .filter(|e| e.raw_weight > 0.0)
            .map(|e| StencilEntry {
                weight: e.raw_weight / total,
                norm_factor: e.shift.physical_norm(grid),
                shift: e.shift,
            })
            .collect();
        Ok(Stencil {
            subinteraction: i,
            entries,
        })
    }

    /// Build every stencil of the partition.
    pub fn build_all(&self, grid: &Grid) -> Result<Vec<Stencil>> {
        (0..self.subinteractions())
            .map(|i| self.build_stencil(grid, i))
            .collect()
    }
}

struct RawEntry {
    shift: ShiftVector,
    raw_weight: f64,
}

/// Enumerate the lattice shifts of subinteraction `i` with their raw
/// midpoint weights `profile(s * dx) * active cell volume`, before
/// renormalization. Zero-weight nodes are kept here so `validate` can see
/// every sample; `build_stencil` drops them.
fn raw_entries(spec: &KernelSpec, grid: &Grid, i: usize) -> Result<Vec<RawEntry>> {
    let axes = &spec.partition[i];
    let dim = grid.dim();
    // Horizon resolution: delta must be a (positive) integer multiple of dx.
    let mut radii = vec![0usize; dim];
    for &axis in axes {
        let d = spec.horizon[axis];
        let h = grid.spacing()[axis];
        if d < h * (1.0 - 1e-9) {
            return Err(Error::HorizonUnresolved(format!(
                "horizon {d} on axis {axis} is below the grid spacing {h}"
            )));
        }
        let ratio = d / h;
        let m = ratio.round();
        if (ratio - m).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::HorizonUnresolved(format!(
                "horizon {d} on axis {axis} is not an integer multiple of the spacing {h}"
            )));
        }
        let m = m as usize;
        if m >= grid.cells()[axis] {
            return Err(Error::HorizonUnresolved(format!(
                "horizon {d} on axis {axis} spans {m} cells but the period has only {}",
                grid.cells()[axis]
            )));
        }
        radii[axis] = m;
    }
    // Active cell volume for the midpoint rule.
    let active_vol: f64 = axes.iter().map(|&a| grid.spacing()[a]).product();
    let mut entries = Vec::new();
    let mut offsets = vec![0isize; dim];
    enumerate_shifts(spec, grid, axes, &radii, 0, &mut offsets, &mut |offsets| {
        let s = ShiftVector::new(offsets);
        if s.is_zero() {
            // The integrand carries 1/|beta|; the origin is measure-zero.
            return Ok(());
        }
        let h: Vec<f64> = offsets
            .iter()
            .zip(grid.spacing())
            .map(|(&o, &dx)| o as f64 * dx)
            .collect();
        let ring = offsets.iter().map(|o| o.unsigned_abs()).max().unwrap_or(0);
        let p = spec.profile_value(&h, axes, ring)?;
        entries.push(RawEntry {
            shift: s,
            raw_weight: p * active_vol,
        });
        Ok(())
    })?;
    Ok(entries)
}

fn enumerate_shifts(
    spec: &KernelSpec,
    grid: &Grid,
    axes: &[usize],
    radii: &[usize],
    k: usize,
    offsets: &mut Vec<isize>,
    visit: &mut dyn FnMut(&[isize]) -> Result<()>,
) -> Result<()> {
    if k == axes.len() {
        return visit(offsets);
    }
    let axis = axes[k];
    let m = radii[axis] as isize;
    let range: Vec<isize> = match spec.symmetry {
        Symmetry::EvenSymmetric => (-m..=m).collect(),
        Symmetry::OneSided => (1..=m).collect(),
    };
    for o in range {
        offsets[axis] = o;
        enumerate_shifts(spec, grid, axes, radii, k + 1, offsets, visit)?;
    }
    offsets[axis] = 0;
    let _ = grid;
    Ok(())
}

/// One quadrature node of a subinteraction.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilEntry {
    pub shift: ShiftVector,
    /// Renormalized weight; the entries of a stencil sum to 1.
    pub weight: f64,
    /// Euclidean length of the physical shift.
    pub norm_factor: f64,
}

/// The quadrature realization of one subinteraction.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub subinteraction: usize,
    pub entries: Vec<StencilEntry>,
}

impl Stencil {
    /// `sum_j w_j / |beta_j|`, the discrete harmonic kernel mass that
    /// controls the operator's Lipschitz constant.
    pub fn harmonic_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.weight / e.norm_factor).sum()
    }

    pub fn weight_sum(&self) -> f64 {
        self.entries.iter().map(|e| e.weight).sum()
    }

    /// Physical first moment `sum_j w_j * (s_j * dx)` per axis.
    pub fn first_moment(&self, grid: &Grid) -> Vec<f64> {
        let mut m = vec![0.0; grid.dim()];
        for e in &self.entries {
            for (axis, &o) in e.shift.offsets().iter().enumerate() {
                m[axis] += e.weight * o as f64 * grid.spacing()[axis];
            }
        }
        m
    }
}
