//! Time evolution: the implicit Euler contraction semigroup, the explicit
//! monotone comparison scheme, forced evolution by first-order splitting,
//! and the vanishing-horizon study driver.

use crate::error::{Error, Result};
use crate::flux::{FluxKind, FluxPair};
use crate::grid::{Grid, GridField};
use crate::kernel::{KernelSpec, Profile, Symmetry};
use crate::operator::OperatorAssembly;
use crate::oracle;
use crate::resolvent::{solve_resolvent, ResolventOptions, SolveReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Implicit,
    Explicit,
    Forced,
}

/// A time-indexed sequence of states plus step metadata. Implicit
/// trajectories keep every resolvent report so verification tolerances can
/// be budgeted from actual residuals.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<GridField>,
    pub scheme: Scheme,
    pub step: f64,
    pub reports: Vec<SolveReport>,
}

impl Trajectory {
    pub fn final_state(&self) -> &GridField {
        self.states.last().expect("trajectory has at least the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Sum of the recorded solver residuals; the accumulated L1 error
    /// budget of the whole evolution.
    pub fn residual_budget(&self) -> f64 {
        self.reports.iter().map(|r| r.final_residual).sum()
    }
}

fn step_sizes(t_final: f64, step: f64) -> Result<Vec<f64>> {
    if !(t_final > 0.0) || !(step > 0.0) {
        return Err(Error::InvalidArgument(
            "final time and step must be positive".into(),
        ));
    }
    let mut steps = Vec::new();
    let mut t = 0.0;
    while t < t_final - 1e-12 * t_final {
        let dt = step.min(t_final - t);
        steps.push(dt);
        t += dt;
    }
    Ok(steps)
}

/// Crandall-Liggett implicit Euler: each step is one resolvent solve with
/// `lambda` equal to the step size. Unconditionally stable.
pub fn evolve_implicit(
    op: &OperatorAssembly,
    u0: &GridField,
    t_final: f64,
    eps: f64,
    opts: &ResolventOptions,
) -> Result<Trajectory> {
    let mut times = vec![0.0];
    let mut states = vec![u0.clone()];
    let mut reports = Vec::new();
    let mut t = 0.0;
    for dt in step_sizes(t_final, eps)? {
        let prev = states.last().unwrap();
        let (next, rep) = solve_resolvent(op, prev, dt, opts)?;
        t += dt;
        times.push(t);
        states.push(next);
        reports.push(rep);
    }
    Ok(Trajectory {
        times,
        states,
        scheme: Scheme::Implicit,
        step: eps,
        reports,
    })
}

/// Forward Euler comparison scheme; requires the explicit CFL bound.
pub fn evolve_explicit(
    op: &OperatorAssembly,
    u0: &GridField,
    t_final: f64,
    dt: f64,
) -> Result<Trajectory> {
    let mut times = vec![0.0];
    let mut states = vec![u0.clone()];
    let mut t = 0.0;
    for h in step_sizes(t_final, dt)? {
        let prev = states.last().unwrap();
        let next = op.explicit_step(prev, h)?;
        t += h;
        times.push(t);
        states.push(next);
    }
    Ok(Trajectory {
        times,
        states,
        scheme: Scheme::Explicit,
        step: dt,
        reports: Vec::new(),
    })
}

pub type ForcingFn<'a> = Box<dyn Fn(f64, &GridField) -> Result<GridField> + 'a>;

/// Time- and state-dependent forcing with its certified growth data.
pub struct ForcingSpec<'a> {
    pub g: ForcingFn<'a>,
    pub lipschitz_in_u: f64,
}

/// Mild-solution splitting for the forced problem: each step feeds
/// `u + dt * g(t, u)` through one resolvent solve. Left-endpoint sampling
/// of the forcing; first order.
pub fn evolve_forced(
    op: &OperatorAssembly,
    u0: &GridField,
    t_final: f64,
    dt: f64,
    forcing: &ForcingSpec,
    opts: &ResolventOptions,
) -> Result<Trajectory> {
    let mut times = vec![0.0];
    let mut states = vec![u0.clone()];
    let mut reports = Vec::new();
    let mut t = 0.0;
    for h in step_sizes(t_final, dt)? {
        let prev = states.last().unwrap();
        let forced = (forcing.g)(t, prev)?;
        if forced.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("forcing at t = {t}")));
        }
        let rhs = prev.axpy(h, &forced)?;
        let (next, rep) = solve_resolvent(op, &rhs, h, opts)?;
        t += h;
        times.push(t);
        states.push(next);
        reports.push(rep);
    }
    Ok(Trajectory {
        times,
        states,
        scheme: Scheme::Forced,
        step: dt,
        reports,
    })
}

/// Named closed-form references for the study driver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyOracle {
    /// Indicator datum `1 on [a, b)`: fan at `a`, shock of speed 1/2 at `b`.
    BurgersShock,
    /// `-1 / +1` datum: centered rarefaction, stationary seam shock.
    BurgersRarefaction,
    /// Linear advection of the indicator; exact transport.
    Advection,
}

impl StudyOracle {
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "burgers_shock" => Some(StudyOracle::BurgersShock),
            "burgers_rarefaction" => Some(StudyOracle::BurgersRarefaction),
            "advection" => Some(StudyOracle::Advection),
            _ => None,
        }
    }
}

/// One row of a local-limit error table.
#[derive(Debug, Clone)]
pub struct StudyRow {
    pub delta: f64,
    pub l1_error: f64,
    /// Empirical order against the previous row, when defined.
    pub order: Option<f64>,
}

/// Vanishing-horizon study: solve the nonlocal problem implicitly for each
/// horizon and compare in L1 against the closed-form local reference.
/// Horizons must be integer multiples of the spacing; the wrap-time guard
/// `t_final < extent / (2 * max wave speed)` keeps periodic images out of
/// the comparison.
pub fn local_limit_study(
    flux: &FluxPair,
    profile: &Profile,
    oracle_kind: StudyOracle,
    grid: &Grid,
    t_final: f64,
    deltas: &[f64],
    eps: f64,
) -> Result<Vec<StudyRow>> {
    if grid.dim() != 1 {
        return Err(Error::InvalidArgument("the study driver is 1D".into()));
    }
    let l = grid.extent(0);
    let max_speed = flux.range.0.abs().max(flux.range.1.abs()).max(1e-30);
    if t_final >= l / (2.0 * max_speed) {
        return Err(Error::InvalidArgument(format!(
            "t_final {t_final} exceeds the wrap-time guard {}",
            l / (2.0 * max_speed)
        )));
    }
    let (u0, reference): (GridField, GridField) = match oracle_kind {
        StudyOracle::BurgersShock => {
            let (a, b) = (0.125 * l, 0.625 * l);
            let u0 = GridField::sample(grid.clone(), |x| {
                oracle::burgers_indicator(a, b, 0.0, x[0])
            })?;
            let reference = GridField::sample(grid.clone(), |x| {
                oracle::burgers_indicator(a, b, t_final, x[0])
            })?;
            (u0, reference)
        }
        StudyOracle::BurgersRarefaction => {
            let mid = 0.5 * l;
            let u0 = GridField::sample(grid.clone(), |x| {
                oracle::burgers_pm_rarefaction(mid, 0.0, x[0])
            })?;
            let reference = GridField::sample(grid.clone(), |x| {
                oracle::burgers_pm_rarefaction(mid, t_final, x[0])
            })?;
            (u0, reference)
        }
        StudyOracle::Advection => {
            let (a, b) = (0.125 * l, 0.5 * l);
            let speed = match flux.kind {
                FluxKind::UpwindAdvection { speed } => speed,
                _ => {
                    return Err(Error::InvalidArgument(
                        "the advection oracle needs an upwind_advection flux".into(),
                    ))
                }
            };
            let profile_fn = move |x: f64| if x >= a && x < b { 1.0 } else { 0.0 };
            let u0 = GridField::sample(grid.clone(), |x| profile_fn(x[0]))?;
            let reference = oracle::advection_exact(grid, profile_fn, speed, t_final)?;
            (u0, reference)
        }
    };
    let mut rows: Vec<StudyRow> = Vec::new();
    for &delta in deltas {
        // One-sided kernels reproduce the unidirectional pair-interaction
        // model; with a monotone two-point flux they handle both wave
        // directions.
        let spec = KernelSpec::line(Symmetry::OneSided, delta, profile.clone());
        let stencil = spec.build_stencil(grid, 0)?;
        let op = OperatorAssembly::single(grid.clone(), stencil, flux.clone())?;
        let opts = ResolventOptions::for_rhs(&u0);
        let traj = evolve_implicit(&op, &u0, t_final, eps, &opts)?;
        let err = traj.final_state().sub(&reference)?.norm(1.0)?;
        let order = rows.last().and_then(|prev| {
            if prev.l1_error > 0.0 && err > 0.0 && prev.delta != delta {
                Some((prev.l1_error / err).ln() / (prev.delta / delta).ln())
            } else {
                None
            }
        });
        rows.push(StudyRow {
            delta,
            l1_error: err,
            order,
        });
    }
    Ok(rows)
}
