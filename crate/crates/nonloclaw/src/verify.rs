//! The entropy auditor and the cross-cutting property harness: Kruzkov
//! entropy residuals of a trajectory against smooth space-time bumps, and
//! the semigroup property suite (integrability, maximum principle,
//! order preservation, equicontinuity, mass conservation).

use crate::error::{Error, Result};
use crate::flux::sign0;
use crate::grid::{kahan_sum, GridField, ShiftVector};
use crate::operator::OperatorAssembly;
use crate::resolvent::l1_plus;
use crate::semigroup::Trajectory;

/// Smooth compactly supported bump `(1 - s^2)^3` on `|s| < 1`.
pub fn bump(s: f64) -> f64 {
    let s2 = s * s;
    if s2 >= 1.0 {
        0.0
    } else {
        let t = 1.0 - s2;
        t * t * t
    }
}

/// A space-time test function: tensor-product polynomial bump, smooth,
/// nonnegative, vanishing near t = 0, t = T and wrapping smoothly in
/// space via the periodic distance.
#[derive(Debug, Clone)]
pub struct BumpTestFunction {
    /// Spatial center per axis.
    pub center: Vec<f64>,
    /// Spatial half-width per axis; must stay below half the extent.
    pub width: Vec<f64>,
    pub t_center: f64,
    pub t_width: f64,
}

impl BumpTestFunction {
    /// Evaluate at a cell center and time.
    pub fn eval(&self, x: &[f64], extent: &[f64], t: f64) -> f64 {
        let mut v = bump((t - self.t_center) / self.t_width);
        for axis in 0..x.len() {
            let l = extent[axis];
            let mut d = (x[axis] - self.center[axis]).rem_euclid(l);
            if d > l / 2.0 {
                d -= l;
            }
            v *= bump(d / self.width[axis]);
        }
        v
    }

    /// Sample onto the trajectory's grid at time `t`.
    pub fn sample(&self, grid: &crate::grid::Grid, t: f64) -> Result<GridField> {
        let extent: Vec<f64> = (0..grid.dim()).map(|a| grid.extent(a)).collect();
        GridField::sample(grid.clone(), |x| self.eval(x, &extent, t))
    }
}

/// A family of bump test functions covering the space-time box.
#[derive(Debug, Clone)]
pub struct TestFunctionFamily {
    pub members: Vec<BumpTestFunction>,
}

impl TestFunctionFamily {
    /// `nx x nt` tensor grid of bumps inside `[0, L) x (0, T)`.
    pub fn tensor_grid(grid: &crate::grid::Grid, t_final: f64, nx: usize, nt: usize) -> Self {
        let mut members = Vec::new();
        let l: Vec<f64> = (0..grid.dim()).map(|a| grid.extent(a)).collect();
        let t_width = t_final / (nt as f64 + 1.0);
        for it in 0..nt {
            let t_center = t_final * (it as f64 + 1.0) / (nt as f64 + 1.0);
            // Spatial centers along axis 0; higher axes use the mid-plane.
            for ix in 0..nx {
                let mut center = vec![0.0; grid.dim()];
                let mut width = vec![0.0; grid.dim()];
                center[0] = l[0] * (ix as f64 + 0.5) / nx as f64;
                width[0] = (l[0] / nx as f64).min(l[0] * 0.45);
                for axis in 1..grid.dim() {
                    center[axis] = 0.5 * l[axis];
                    width[axis] = 0.45 * l[axis];
                }
                members.push(BumpTestFunction {
                    center,
                    width,
                    t_center,
                    t_width,
                });
            }
        }
        TestFunctionFamily { members }
    }
}

/// Discrete Kruzkov entropy residual of a trajectory for one test
/// function and one constant `c`:
///
/// ```text
/// E(f, c) = sum_m dx^n [ |u^{m+1} - c| (f^{m+1} - f^m)
///    + dt sum_ij (w/|b|) (tau f^m sign0(tau u^{m+1} - c)
///                         - f^m sign0(u^{m+1} - c))
///                        (phi(u^{m+1}, tau u^{m+1}) - phi(c, c)) ]
/// ```
///
/// The forward time quotient paired with the post-step state matches the
/// telescoping of the implicit scheme, so `E >= -(solver residual budget)`
/// for every monotone-flux implicit trajectory. Entropy solutions make
/// this nonnegative; negative values beyond tolerance locate an
/// entropy-violating trajectory.
pub fn entropy_residual(
    traj: &Trajectory,
    op: &OperatorAssembly,
    f: &BumpTestFunction,
    c: f64,
) -> Result<f64> {
    let grid = op.grid();
    let vol = grid.cell_volume();
    let n = grid.num_cells();
    if traj.states.len() < 2 {
        return Err(Error::InvalidArgument("trajectory has no steps".into()));
    }
    // Precompute shift tables per stencil entry.
    struct Entry {
        won: f64,
        fwd: Vec<u32>,
    }
    let mut entries: Vec<(usize, Vec<Entry>)> = Vec::new();
    for (i, stencil) in op.stencils().iter().enumerate() {
        let mut es = Vec::new();
        for e in &stencil.entries {
            es.push(Entry {
                won: e.weight / e.norm_factor,
                fwd: grid.shift_table(&e.shift)?,
            });
        }
        entries.push((i, es));
    }
    let fluxes: Vec<_> = op.fluxes().cloned().collect();
    let mut f_curr = f.sample(grid, traj.times[0])?;
    if f_curr.values().iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidArgument("test function must be nonnegative".into()));
    }
    let mut terms: Vec<f64> = Vec::new();
    for m in 0..traj.states.len() - 1 {
        let dt = traj.times[m + 1] - traj.times[m];
        let f_next = f.sample(grid, traj.times[m + 1])?;
        let u = &traj.states[m + 1];
        let uv = u.values();
        let fv = f_curr.values();
        let fnv = f_next.values();
        for x in 0..n {
            terms.push(vol * (uv[x] - c).abs() * (fnv[x] - fv[x]));
        }
        for (i, es) in &entries {
            let flux = &fluxes[*i];
            let phicc = flux.phi(c, c);
            for e in es {
                for x in 0..n {
                    let y = e.fwd[x] as usize;
                    let q = (fv[y] * sign0(uv[y] - c) - fv[x] * sign0(uv[x] - c))
                        * (flux.phi(uv[x], uv[y]) - phicc);
                    terms.push(vol * dt * e.won * q);
                }
            }
        }
        f_curr = f_next;
    }
    Ok(kahan_sum(terms.into_iter()))
}

/// Per-(f, c) entry of an entropy report.
#[derive(Debug, Clone)]
pub struct EntropyEntry {
    pub member: usize,
    pub c: f64,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct EntropyReport {
    pub entries: Vec<EntropyEntry>,
    pub min_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// The offending (member index, c) when the audit fails.
    pub offender: Option<(usize, f64)>,
}

/// Kruzkov constants for the audit: quantiles of the trajectory's range
/// plus out-of-range sentinels at +/- (|u|_inf + 1).
pub fn c_samples(traj: &Trajectory, count: usize) -> Vec<f64> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in &traj.states {
        lo = lo.min(s.min());
        hi = hi.max(s.max());
    }
    let sup = lo.abs().max(hi.abs());
    let mut cs = Vec::new();
    let interior = count.saturating_sub(2).max(1);
    for i in 0..interior {
        let q = (i as f64 + 0.5) / interior as f64;
        cs.push(lo + q * (hi - lo));
    }
    cs.push(-(sup + 1.0));
    cs.push(sup + 1.0);
    cs
}

/// Evaluate the entropy residual over a family times a set of Kruzkov
/// constants. Passes iff the minimum residual stays above `-tolerance`.
pub fn entropy_audit(
    traj: &Trajectory,
    op: &OperatorAssembly,
    family: &TestFunctionFamily,
    c_count: usize,
    tolerance: f64,
) -> Result<EntropyReport> {
    let cs = c_samples(traj, c_count);
    let mut entries = Vec::new();
    let mut min_residual = f64::INFINITY;
    let mut offender = None;
    for (k, f) in family.members.iter().enumerate() {
        for &c in &cs {
            let r = entropy_residual(traj, op, f, c)?;
            if r < min_residual {
                min_residual = r;
                offender = Some((k, c));
            }
            entries.push(EntropyEntry {
                member: k,
                c,
                residual: r,
            });
        }
    }
    let pass = min_residual >= -tolerance;
    Ok(EntropyReport {
        entries,
        min_residual,
        tolerance,
        pass,
        offender: if pass { None } else { offender },
    })
}

/// Default audit tolerance: the same relative precision for every problem
/// size, plus the trajectory's actual solver-residual budget.
pub fn entropy_tolerance(traj: &Trajectory, u0: &GridField, t_final: f64) -> f64 {
    1e-8 * (1.0 + u0.norm(1.0).unwrap_or(1.0)) * t_final.max(1.0) + traj.residual_budget()
}

/// Margins of the semigroup theorem suite along a pair of implicit
/// trajectories; every field must be nonnegative (within tolerance) for a
/// contraction-semigroup evolution.
#[derive(Debug, Clone)]
pub struct TheoremSuiteReport {
    /// (i) `|u(t)|_p <= |u0|_1^{1/p} |u0|_inf^{1-1/p}`, worst over p and t.
    pub integrability_margin: f64,
    /// (ii) `-|u0^-|_inf <= u(t) <= |u0^+|_inf`, worst slack.
    pub max_principle_margin: f64,
    /// (iii) `|(u(t)-v(t))^+|_1 <= |(u0-v0)^+|_1`, worst slack.
    pub monotonicity_margin: f64,
    /// (iv) L1 modulus of continuity non-increasing, worst over probe shifts.
    pub equicontinuity_margin: f64,
    /// (v) worst |mass(u(t)) - mass(u0)|, to be compared against budget.
    pub mass_defect: f64,
    pub residual_budget: f64,
    pub pass: bool,
}

/// Run the implicit evolution on a pair of initial data and check the
/// contraction-semigroup properties at every snapshot.
pub fn theorem_suite(
    op: &OperatorAssembly,
    u0: &GridField,
    v0: &GridField,
    t_final: f64,
    eps: f64,
    opts: &crate::resolvent::ResolventOptions,
    tolerance: f64,
) -> Result<TheoremSuiteReport> {
    let tu = crate::semigroup::evolve_implicit(op, u0, t_final, eps, opts)?;
    let tv = crate::semigroup::evolve_implicit(op, v0, t_final, eps, opts)?;
    let budget = tu.residual_budget() + tv.residual_budget();

    let u0_1 = u0.norm(1.0)?;
    let u0_inf = u0.norm(f64::INFINITY)?;
    let u0_plus = u0.map(|v| v.max(0.0))?.norm(f64::INFINITY)?;
    let u0_minus = u0.map(|v| (-v).max(0.0))?.norm(f64::INFINITY)?;
    let d0_plus = l1_plus(u0, v0)?;

    let grid = op.grid();
    let mut probes = Vec::new();
    for axis in 0..grid.dim() {
        for off in [1isize, 2, grid.cells()[axis] as isize / 2] {
            let mut o = vec![0isize; grid.dim()];
            o[axis] = off;
            probes.push(ShiftVector::new(&o));
        }
    }
    let moduli0: Vec<f64> = probes
        .iter()
        .map(|s| u0.shift(s)?.sub(u0)?.norm(1.0))
        .collect::<Result<_>>()?;

    let mut integrability = f64::INFINITY;
    let mut maxprin = f64::INFINITY;
    let mut monot = f64::INFINITY;
    let mut equi = f64::INFINITY;
    let mut mass = 0.0f64;
    for (su, sv) in tu.states.iter().zip(&tv.states) {
        for p in [1.0, 2.0, f64::INFINITY] {
            let bound = if p.is_infinite() {
                u0_inf
            } else {
                u0_1.powf(1.0 / p) * u0_inf.powf(1.0 - 1.0 / p)
            };
            integrability = integrability.min(bound - su.norm(p)?);
        }
        maxprin = maxprin.min((u0_plus - su.max()).min(su.min() + u0_minus));
        monot = monot.min(d0_plus - l1_plus(su, sv)?);
        for (s, m0) in probes.iter().zip(&moduli0) {
            equi = equi.min(m0 - su.shift(s)?.sub(su)?.norm(1.0)?);
        }
        mass = mass.max((su.mass() - u0.mass()).abs());
    }
    let tol = tolerance + budget;
    let pass = integrability >= -tol
        && maxprin >= -tol
        && monot >= -tol
        && equi >= -tol
        && mass <= tol;
    Ok(TheoremSuiteReport {
        integrability_margin: integrability,
        max_principle_margin: maxprin,
        monotonicity_margin: monot,
        equicontinuity_margin: equi,
        mass_defect: mass,
        residual_budget: budget,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::{FluxKind, FluxPair};
    use crate::grid::Grid;
    use crate::kernel::{KernelSpec, Profile, Symmetry};
    use crate::resolvent::{assemble, ResolventOptions};
    use crate::semigroup::{evolve_implicit, Scheme};

    fn burgers_op(grid: &Grid, delta: f64, range: (f64, f64)) -> OperatorAssembly {
        let spec = KernelSpec::line(Symmetry::EvenSymmetric, delta, Profile::Triangle);
        let flux = FluxPair::new(FluxKind::EngquistOsherBurgers, range).unwrap();
        assemble(grid, &spec, vec![flux]).unwrap()
    }

    fn constant_trajectory(grid: &Grid, c0: f64, t_final: f64, steps: usize) -> Trajectory {
        let u = GridField::constant(grid.clone(), c0).unwrap();
        let dt = t_final / steps as f64;
        Trajectory {
            times: (0..=steps).map(|m| m as f64 * dt).collect(),
            states: vec![u; steps + 1],
            scheme: Scheme::Implicit,
            step: dt,
            reports: Vec::new(),
        }
    }

    #[test]
    fn constant_trajectory_residual_is_zero() {
        let grid = Grid::line(32, 0.125).unwrap();
        let op = burgers_op(&grid, 0.5, (-2.0, 2.0));
        let traj = constant_trajectory(&grid, 0.7, 0.5, 8);
        let f = BumpTestFunction {
            center: vec![2.0],
            width: vec![1.0],
            t_center: 0.25,
            t_width: 0.2,
        };
        // c equal to the state and c different from it: both vanish.
        for c in [0.7, -0.3] {
            let r = entropy_residual(&traj, &op, &f, c).unwrap();
            assert!(r.abs() < 1e-12, "c={c}: {r}");
        }
    }

    #[test]
    fn sentinel_constant_reduces_to_conservation() {
        // c above the range turns |u - c| affine; residual must vanish.
        let grid = Grid::line(48, 0.125).unwrap();
        let op = burgers_op(&grid, 0.5, (-2.0, 2.0));
        let u0 = GridField::sample(grid.clone(), |x| (x[0]).sin() * 0.8).unwrap();
        let opts = ResolventOptions::for_rhs(&u0);
        let traj = evolve_implicit(&op, &u0, 0.3, 0.05, &opts).unwrap();
        let f = BumpTestFunction {
            center: vec![3.0],
            width: vec![2.0],
            t_center: 0.15,
            t_width: 0.12,
        };
        for c in [2.0, -2.0] {
            let r = entropy_residual(&traj, &op, &f, c).unwrap();
            assert!(
                r.abs() <= 10.0 * (traj.residual_budget() + 1e-12),
                "c={c}: {r}"
            );
        }
    }

    #[test]
    fn implicit_shock_run_is_entropic() {
        let n = 96;
        let dx = 2.0 / n as f64;
        let grid = Grid::line(n, dx).unwrap();
        let op = burgers_op(&grid, 4.0 * dx, (-0.2, 1.2));
        let u0 = GridField::sample(grid.clone(), |x| {
            crate::oracle::burgers_indicator(0.25, 1.25, 0.0, x[0])
        })
        .unwrap();
        let opts = ResolventOptions::for_rhs(&u0);
        let t = 0.4;
        let traj = evolve_implicit(&op, &u0, t, t / 32.0, &opts).unwrap();
        let family = TestFunctionFamily::tensor_grid(&grid, t, 4, 3);
        let tol = entropy_tolerance(&traj, &u0, t);
        let rep = entropy_audit(&traj, &op, &family, 7, tol).unwrap();
        assert!(rep.pass, "min residual {}", rep.min_residual);
    }

    #[test]
    fn expansion_shock_fails_audit() {
        // Stationary profile u = -sign(x - L/2): a classical
        // entropy-violating expansion shock, frozen in time.
        let n = 128;
        let dx = 2.0 / n as f64;
        let grid = Grid::line(n, dx).unwrap();
        let op = burgers_op(&grid, 2.0 * dx, (-1.2, 1.2));
        let mid = 1.0;
        let u = GridField::sample(grid.clone(), |x| if x[0] < mid { 1.0 } else { -1.0 }).unwrap();
        let t = 0.4;
        let steps = 16;
        let traj = Trajectory {
            times: (0..=steps).map(|m| m as f64 * t / steps as f64).collect(),
            states: vec![u; steps + 1],
            scheme: Scheme::Implicit,
            step: t / steps as f64,
            reports: Vec::new(),
        };
        let f = BumpTestFunction {
            center: vec![mid],
            width: vec![0.5],
            t_center: t / 2.0,
            t_width: 0.4 * t,
        };
        let r = entropy_residual(&traj, &op, &f, 0.0).unwrap();
        assert!(r <= -1e-3, "expansion shock not flagged: residual {r}");
    }

    #[test]
    fn theorem_suite_passes_on_smooth_pair() {
        let grid = Grid::line(64, 0.0625).unwrap();
        let op = burgers_op(&grid, 0.25, (-2.0, 2.0));
        let u0 = GridField::sample(grid.clone(), |x| (x[0] * 3.1).sin()).unwrap();
        let v0 = GridField::sample(grid, |x| (x[0] * 3.1).sin() + 0.3).unwrap();
        let opts = ResolventOptions::for_rhs(&u0);
        let rep = theorem_suite(&op, &u0, &v0, 0.3, 0.05, &opts, 1e-8).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn theorem_suite_order_preservation() {
        let grid = Grid::line(48, 0.125).unwrap();
        let op = burgers_op(&grid, 0.5, (-2.0, 2.0));
        // v0 >= u0 pointwise: the positive-part distance of (u, v) is 0 and
        // must stay 0, i.e. order is preserved.
        let u0 = GridField::sample(grid.clone(), |x| (x[0] * 2.0).sin() * 0.5).unwrap();
        let v0 = u0.map(|v| v + 0.25).unwrap();
        let opts = ResolventOptions::for_rhs(&u0);
        let tu = evolve_implicit(&op, &u0, 0.3, 0.05, &opts).unwrap();
        let tv = evolve_implicit(&op, &v0, 0.3, 0.05, &opts).unwrap();
        let budget = tu.residual_budget() + tv.residual_budget();
        for (su, sv) in tu.states.iter().zip(&tv.states) {
            assert!(l1_plus(su, sv).unwrap() <= budget + 1e-12);
        }
    }
}
