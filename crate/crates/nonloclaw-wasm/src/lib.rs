//! Browser bindings: a stepping Burgers simulation, a stationary
//! resolvent solve, and a vanishing-horizon error curve. All state lives
//! in the exported handles; the page drives them frame by frame.

// `!(x > 0.0)` rejects NaN along with the sign.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use nonloclaw::flux::{FluxKind, FluxPair};
use nonloclaw::grid::{Grid, GridField};
use nonloclaw::kernel::{KernelSpec, Profile, Symmetry};
use nonloclaw::resolvent::{assemble, solve_resolvent, ResolventOptions};
use nonloclaw::semigroup::{local_limit_study, StudyOracle};
use nonloclaw::OperatorAssembly;
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn burgers_op(n: usize, horizon_cells: usize, range: (f64, f64)) -> Result<OperatorAssembly, JsValue> {
    let dx = 2.0 / n as f64;
    let grid = Grid::line(n, dx).map_err(js_err)?;
    let spec = KernelSpec::line(
        Symmetry::EvenSymmetric,
        horizon_cells as f64 * dx,
        Profile::Triangle,
    );
    let flux = FluxPair::new(FluxKind::EngquistOsherBurgers, range).map_err(js_err)?;
    assemble(&grid, &spec, vec![flux]).map_err(js_err)
}

/// An interactive implicit-Euler Burgers evolution on a period-2 torus.
#[wasm_bindgen]
pub struct BurgersDemo {
    op: OperatorAssembly,
    state: GridField,
    dt: f64,
    time: f64,
}

#[wasm_bindgen]
impl BurgersDemo {
    /// Riemann data `left` on [0, jump), `right` on [jump, 2).
    #[wasm_bindgen(constructor)]
    pub fn new(
        n: usize,
        horizon_cells: usize,
        dt: f64,
        left: f64,
        right: f64,
        jump: f64,
    ) -> Result<BurgersDemo, JsValue> {
        if !(dt > 0.0) {
            return Err(js_err("dt must be positive"));
        }
        let lo = left.min(right) - 0.2;
        let hi = left.max(right) + 0.2;
        let op = burgers_op(n, horizon_cells, (lo, hi))?;
        let state = GridField::sample(op.grid().clone(), |x| {
            if x[0] < jump {
                left
            } else {
                right
            }
        })
        .map_err(js_err)?;
        Ok(BurgersDemo {
            op,
            state,
            dt,
            time: 0.0,
        })
    }

    /// Advance one implicit step.
    pub fn step(&mut self) -> Result<(), JsValue> {
        let opts = ResolventOptions::for_rhs(&self.state);
        let (next, _) = solve_resolvent(&self.op, &self.state, self.dt, &opts).map_err(js_err)?;
        self.state = next;
        self.time += self.dt;
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        self.state.values().to_vec()
    }

    pub fn centers(&self) -> Vec<f64> {
        let grid = self.state.grid();
        (0..grid.num_cells()).map(|i| grid.center(i)[0]).collect()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn mass(&self) -> f64 {
        self.state.mass()
    }
}

/// Solve `u + lambda B u = g` for a Gaussian bump `g` and return the
/// solution interleaved with the data: [g..., u...].
#[wasm_bindgen]
pub fn resolvent_demo(
    n: usize,
    horizon_cells: usize,
    lambda: f64,
    amplitude: f64,
    width: f64,
) -> Result<Vec<f64>, JsValue> {
    let a = amplitude.abs().max(0.1);
    let op = burgers_op(n, horizon_cells, (-a - 0.5, a + 0.5))?;
    let g = GridField::sample(op.grid().clone(), |x| {
        let d = x[0] - 1.0;
        amplitude * (-d * d / (width * width)).exp()
    })
    .map_err(js_err)?;
    let opts = ResolventOptions::for_rhs(&g);
    let (u, _) = solve_resolvent(&op, &g, lambda, &opts).map_err(js_err)?;
    let mut out = g.values().to_vec();
    out.extend_from_slice(u.values());
    Ok(out)
}

/// L1 errors of the nonlocal Burgers shock against the exact local
/// solution, one per horizon (in cells). The local limit made visible.
#[wasm_bindgen]
pub fn study_demo(n: usize, horizon_cells: Vec<usize>, t_final: f64) -> Result<Vec<f64>, JsValue> {
    let dx = 2.0 / n as f64;
    let grid = Grid::line(n, dx).map_err(js_err)?;
    let flux = FluxPair::new(FluxKind::EngquistOsherBurgers, (-0.2, 1.2)).map_err(js_err)?;
    let deltas: Vec<f64> = horizon_cells.iter().map(|&c| c as f64 * dx).collect();
    let rows = local_limit_study(
        &flux,
        &Profile::Triangle,
        StudyOracle::BurgersShock,
        &grid,
        t_final,
        &deltas,
        t_final / 64.0,
    )
    .map_err(js_err)?;
    Ok(rows.iter().map(|r| r.l1_error).collect())
}
