//! Closed-form reference solutions used by the local-limit study: exact
//! Riemann structures for Burgers' equation and exact transport for linear
//! advection. These are analytic formulas, independent of every solver
//! path in the crate.

use crate::error::Result;
use crate::grid::{Grid, GridField};

/// Exact entropy solution of the local Burgers equation for indicator
/// initial data `u0 = 1 on [a, b), 0 elsewhere` on the line: a rarefaction
/// fan opens at `a`, a Rankine-Hugoniot shock of speed 1/2 leaves `b`.
/// Valid while the fan head has not caught the shock, `t < 2 (b - a)`.
pub fn burgers_indicator(a: f64, b: f64, t: f64, x: f64) -> f64 {
    if t <= 0.0 {
        return if x >= a && x < b { 1.0 } else { 0.0 };
    }
    let shock = b + 0.5 * t;
    if x <= a || x >= shock {
        0.0
    } else if x < a + t {
        (x - a) / t
    } else {
        1.0
    }
}

/// Exact entropy solution of local Burgers for the two-state profile
/// `u0 = -1 on [seam, mid), +1 on [mid, seam + L)` viewed periodically:
/// a rarefaction fan opens at `mid`; the down-jump at the seam is a
/// stationary shock (speed (u_L + u_R)/2 = 0). `x` is taken relative to
/// the seam in `[0, L)`. Valid while the fan stays clear of the seam.
pub fn burgers_pm_rarefaction(mid: f64, t: f64, x: f64) -> f64 {
    if t <= 0.0 {
        return if x < mid { -1.0 } else { 1.0 };
    }
    let s = x - mid;
    if s <= -t {
        -1.0
    } else if s >= t {
        1.0
    } else {
        s / t
    }
}

/// Sample a reference solution onto a grid at time `t`.
pub fn sample_reference<F: Fn(f64, f64) -> f64>(grid: &Grid, t: f64, f: F) -> Result<GridField> {
    GridField::sample(grid.clone(), |x| f(t, x[0]))
}

/// Exact transport: `u(x, t) = u0((x - c t) mod L)` for periodic initial
/// profile `u0` given as a closure on `[0, L)`.
pub fn advection_exact<F: Fn(f64) -> f64>(
    grid: &Grid,
    u0: F,
    speed: f64,
    t: f64,
) -> Result<GridField> {
    let l = grid.extent(0);
    GridField::sample(grid.clone(), |x| {
        let y = (x[0] - speed * t).rem_euclid(l);
        u0(y)
    })
}
