//! Two-point monotone fluxes phi(a, b), their consistent local fluxes psi,
//! Lipschitz data on a certified range, and the Kruzkov-type entropy flux
//! q~(a, b, c) with its sign-decomposition cross-check.

use crate::error::{Error, Result};

/// `sign_0`: exact zero at zero, no smoothing.
pub fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Builtin two-point flux families.
#[derive(Debug, Clone, PartialEq)]
pub enum FluxKind {
    /// phi(a, b) = c * a with speed c > 0.
    UpwindAdvection { speed: f64 },
    /// phi(a, b) = max(a,0)^2/2 + min(b,0)^2/2 for psi(u) = u^2/2.
    EngquistOsherBurgers,
    /// phi(a, b) = (psi(a) + psi(b))/2 + alpha (a - b)/2 for Burgers psi.
    /// Monotone on [m, M] iff alpha >= max(|m|, |M|).
    LaxFriedrichsBurgers { alpha: f64 },
    /// phi = 0; pure forcing / quadrature problems.
    Zero,
    /// phi(a, b) = b. Deliberately violates monotonicity; negative control.
    NonMonotoneSecond,
}

/// A two-point flux with its consistent local flux and certified
/// Lipschitz constants on a validity range [m, M].
#[derive(Debug, Clone, PartialEq)]
pub struct FluxPair {
    pub kind: FluxKind,
    /// Validity interval [m, M]; monotonicity and K1/K2 are certified here.
    pub range: (f64, f64),
    /// Lipschitz constant of phi in its first argument on the range.
    pub k1: f64,
    /// Lipschitz constant of phi in its second argument on the range.
    pub k2: f64,
}

impl FluxPair {
    pub fn new(kind: FluxKind, range: (f64, f64)) -> Result<Self> {
        if !(range.0 <= range.1) || !range.0.is_finite() || !range.1.is_finite() {
            return Err(Error::InvalidFlux(format!(
                "invalid range [{}, {}]",
                range.0, range.1
            )));
        }
        let amax = range.0.abs().max(range.1.abs());
        let (k1, k2) = match &kind {
            FluxKind::UpwindAdvection { speed } => {
                if !(*speed > 0.0) {
                    return Err(Error::InvalidFlux("advection speed must be positive".into()));
                }
                (*speed, 0.0)
            }
            FluxKind::EngquistOsherBurgers => (amax, amax),
            FluxKind::LaxFriedrichsBurgers { alpha } => {
                if !(*alpha >= 0.0) {
                    return Err(Error::InvalidFlux("alpha must be nonnegative".into()));
                }
                ((amax + alpha) / 2.0, (amax + alpha) / 2.0)
            }
            FluxKind::Zero => (0.0, 0.0),
            FluxKind::NonMonotoneSecond => (0.0, 1.0),
        };
        Ok(FluxPair { kind, range, k1, k2 })
    }

    /// Flux pair on the invariant region of an initial datum: the range
    /// [-|u0^-|_inf, |u0^+|_inf] padded by 10%.
    pub fn for_initial_range(kind: FluxKind, lo: f64, hi: f64) -> Result<Self> {
        let lo = lo.min(0.0);
        let hi = hi.max(0.0);
        let pad = 0.1 * (hi - lo).max(1e-30);
        FluxPair::new(kind, (lo - pad, hi + pad))
    }

    pub fn phi(&self, a: f64, b: f64) -> f64 {
        match &self.kind {
            FluxKind::UpwindAdvection { speed } => speed * a,
            FluxKind::EngquistOsherBurgers => {
                let ap = a.max(0.0);
                let bm = b.min(0.0);
                0.5 * ap * ap + 0.5 * bm * bm
            }
            FluxKind::LaxFriedrichsBurgers { alpha } => {
                0.5 * (self.psi(a) + self.psi(b)) + 0.5 * alpha * (a - b)
            }
            FluxKind::Zero => 0.0,
            FluxKind::NonMonotoneSecond => b,
        }
    }

    /// The consistent local flux psi(a) = phi(a, a).
    pub fn psi(&self, a: f64) -> f64 {
        match &self.kind {
            FluxKind::UpwindAdvection { speed } => speed * a,
            FluxKind::EngquistOsherBurgers | FluxKind::LaxFriedrichsBurgers { .. } => 0.5 * a * a,
            FluxKind::Zero => 0.0,
            FluxKind::NonMonotoneSecond => a,
        }
    }

    /// Checked evaluation; rejects non-finite results.
    pub fn eval_phi(&self, a: f64, b: f64) -> Result<f64> {
        let v = self.phi(a, b);
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("phi({a}, {b}) = {v}")));
        }
        Ok(v)
    }

    /// Kruzkov-type entropy flux
    /// `q~(a,b,c) = phi(a v c, b v c) - phi(a ^ c, b ^ c)`.
    ///
    /// Both the max/min form and the sign-decomposition form are evaluated
    /// and cross-checked to 1e-12; disagreement is an internal-consistency
    /// error.
    pub fn entropy_flux_tilde(&self, a: f64, b: f64, c: f64) -> Result<f64> {
        let maxmin = self.phi(a.max(c), b.max(c)) - self.phi(a.min(c), b.min(c));
        let sa = sign0(a - c);
        let sb = sign0(b - c);
        let decomp = 0.5 * (sa + sb) * (self.phi(a, b) - self.phi(c, c))
            + 0.5 * (sa - sb) * (self.phi(a, c) - self.phi(c, b));
        let scale = 1.0 + maxmin.abs().max(decomp.abs());
        if (maxmin - decomp).abs() > 1e-12 * scale {
            return Err(Error::InvalidFlux(format!(
                "entropy flux forms disagree at ({a}, {b}, {c}): {maxmin} vs {decomp}"
            )));
        }
        Ok(maxmin)
    }

    /// Sample monotonicity (up in a, down in b) on a lattice over range^2.
    pub fn check_monotone(&self, samples: usize) -> Result<MonotoneReport> {
        if samples < 2 {
            return Err(Error::InvalidArgument("need at least 2 samples".into()));
        }
        let (m, mm) = self.range;
        let h = (mm - m) / (samples - 1) as f64;
        let grid: Vec<f64> = (0..samples).map(|i| m + i as f64 * h).collect();
        let mut worst = 0.0f64;
        let mut counterexample = None;
        for &a in &grid {
            for &b in &grid {
                if a + h <= mm + 1e-12 {
                    let d = self.phi(a + h, b) - self.phi(a, b);
                    if d < worst {
                        worst = d;
                        counterexample = Some((a, b, 0));
                    }
                }
                if b + h <= mm + 1e-12 {
                    let d = self.phi(a, b) - self.phi(a, b + h);
                    if d < worst {
                        worst = d;
                        counterexample = Some((a, b, 1));
                    }
                }
            }
        }
        Ok(MonotoneReport {
            pass: worst >= -1e-12,
            worst_violation: worst,
            counterexample,
        })
    }

    /// Audit the two entropy-flux inequalities on a lattice of triples:
    /// `sign_0(b-c) [phi(a,b) - phi(c,c)] <= q~(a,b,c)` and
    /// `[sign_0(b-c) - sign_0(a-c)] [phi(a,b) - phi(c,c)] <= 0`.
    pub fn flux_inequality_audit(&self, samples: usize) -> Result<InequalityReport> {
        if samples < 2 {
            return Err(Error::InvalidArgument("need at least 2 samples".into()));
        }
        let (m, mm) = self.range;
        let h = (mm - m) / (samples - 1) as f64;
        let grid: Vec<f64> = (0..samples).map(|i| m + i as f64 * h).collect();
        let mut worst_margin = f64::INFINITY;
        let mut offender = None;
        for &a in &grid {
            for &b in &grid {
                for &c in &grid {
                    let q = self.entropy_flux_tilde(a, b, c)?;
                    let dphi = self.phi(a, b) - self.phi(c, c);
                    let m1 = q - sign0(b - c) * dphi;
                    let m2 = -(sign0(b - c) - sign0(a - c)) * dphi;
                    let margin = m1.min(m2);
                    if margin < worst_margin {
                        worst_margin = margin;
                        offender = Some((a, b, c));
                    }
                }
            }
        }
        Ok(InequalityReport {
            pass: worst_margin >= -1e-12,
            worst_margin,
            offender,
        })
    }

    /// Verify that the stored K1/K2 dominate sampled difference quotients.
    pub fn check_lipschitz(&self, samples: usize) -> Result<bool> {
        let (m, mm) = self.range;
        let h = (mm - m) / (samples - 1) as f64;
        let grid: Vec<f64> = (0..samples).map(|i| m + i as f64 * h).collect();
        for &a in &grid {
            for &b in &grid {
                if a + h <= mm + 1e-12 {
                    let dq = (self.phi(a + h, b) - self.phi(a, b)).abs() / h;
                    if dq > self.k1 * (1.0 + 1e-10) + 1e-12 {
                        return Ok(false);
                    }
                }
                if b + h <= mm + 1e-12 {
                    let dq = (self.phi(a, b + h) - self.phi(a, b)).abs() / h;
                    if dq > self.k2 * (1.0 + 1e-10) + 1e-12 {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }
}

#[derive(Debug, Clone)]
pub struct MonotoneReport {
    pub pass: bool,
    /// Most negative forward difference observed (0 when monotone).
    pub worst_violation: f64,
    /// (a, b, argument index) of the worst violation, if any.
    pub counterexample: Option<(f64, f64, usize)>,
}

#[derive(Debug, Clone)]
pub struct InequalityReport {
    pub pass: bool,
    pub worst_margin: f64,
    pub offender: Option<(f64, f64, f64)>,
}
