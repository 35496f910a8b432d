//! Pressure functions of a single pipe.
//!
//! Gas uses the Renouard relation, which gives the difference of squared
//! end pressures (Pa²). Water uses Darcy–Weisbach with a Colebrook–White
//! friction factor and gives a plain pressure drop (Pa). Every function here
//! takes the flow magnitude; loop signs are applied by the solvers.

use std::f64::consts::PI;

use crate::network::{FluidSpec, GasSpec, Pipe, WaterSpec};
use crate::{Error, Result};

pub const RENOUARD_COEFFICIENT: f64 = 4810.0;
pub const RENOUARD_FLOW_EXPONENT: f64 = 1.82;
pub const RENOUARD_DIAMETER_EXPONENT: f64 = 4.82;

/// Below this Reynolds number the flow is laminar, λ = 64/Re.
pub const LAMINAR_RE: f64 = 2300.0;
/// Colebrook–White applies from here up; in between λ is blended linearly.
pub const TURBULENT_RE: f64 = 4000.0;

const COLEBROOK_MAX_ITER: usize = 100;
const COLEBROOK_TOL: f64 = 1e-12;

fn check_diameter(diameter: f64) -> Result<()> {
    if diameter > 0.0 && diameter.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("diameter must be positive, got {diameter}")))
    }
}

/// Renouard: F = 4810·ρr·L·Q^1.82 / δ^4.82, in Pa².
pub fn renouard_f(rel_density: f64, length: f64, q: f64, diameter: f64) -> Result<f64> {
    check_diameter(diameter)?;
    Ok(RENOUARD_COEFFICIENT * rel_density * length * q.powf(RENOUARD_FLOW_EXPONENT)
        / diameter.powf(RENOUARD_DIAMETER_EXPONENT))
}

/// dF/dQ of the Renouard relation, Pa²·s/m³.
pub fn renouard_df(rel_density: f64, length: f64, q: f64, diameter: f64) -> Result<f64> {
    check_diameter(diameter)?;
    Ok(RENOUARD_FLOW_EXPONENT * RENOUARD_COEFFICIENT * rel_density * length
        * q.powf(RENOUARD_FLOW_EXPONENT - 1.0)
        / diameter.powf(RENOUARD_DIAMETER_EXPONENT))
}

/// Re = 4ρQ / (πδμ).
pub fn reynolds(density: f64, viscosity: f64, q: f64, diameter: f64) -> Result<f64> {
    check_diameter(diameter)?;
    if !(viscosity > 0.0) {
        return Err(Error::Domain(format!("viscosity must be positive, got {viscosity}")));
    }
    Ok(4.0 * density * q / (PI * diameter * viscosity))
}

/// Solves Colebrook–White for the Darcy friction factor by fixed-point
/// iteration on x = 1/√λ, starting from the smooth-pipe Haaland estimate.
pub fn colebrook_lambda(re: f64, rel_roughness: f64) -> Result<f64> {
    if !(re > 0.0 && re.is_finite()) || !(rel_roughness >= 0.0) {
        return Err(Error::Domain(format!(
            "Colebrook needs Re > 0 and eps/D >= 0, got Re = {re}, eps/D = {rel_roughness}"
        )));
    }
    let rough = rel_roughness / 3.71;
    let mut x = (1.8 * (re / 6.9).log10()).max(1.0);
    for _ in 0..COLEBROOK_MAX_ITER {
        let next = -2.0 * (2.51 * x / re + rough).log10();
        if !next.is_finite() || next <= 0.0 {
            break;
        }
        if (next - x).abs() <= COLEBROOK_TOL {
            return Ok(1.0 / (next * next));
        }
        x = next;
    }
    Err(Error::ColebrookNoConvergence {
        reynolds: re,
        rel_roughness,
    })
}

/// |1/√λ − RHS| of the Colebrook–White equation.
pub fn colebrook_residual(lambda: f64, re: f64, rel_roughness: f64) -> f64 {
    let x = 1.0 / lambda.sqrt();
    (x + 2.0 * (2.51 * x / re + rel_roughness / 3.71).log10()).abs()
}

/// Darcy friction factor over the whole Reynolds range: laminar below
/// 2300, Colebrook–White from 4000, linear blend in between.
pub fn friction_factor(re: f64, rel_roughness: f64) -> Result<f64> {
    if !(re > 0.0) {
        return Err(Error::Domain(format!("Reynolds number must be positive, got {re}")));
    }
    if re < LAMINAR_RE {
        Ok(64.0 / re)
    } else if re < TURBULENT_RE {
        let lo = 64.0 / LAMINAR_RE;
        let hi = colebrook_lambda(TURBULENT_RE, rel_roughness)?;
        Ok(lo + (re - LAMINAR_RE) / (TURBULENT_RE - LAMINAR_RE) * (hi - lo))
    } else {
        colebrook_lambda(re, rel_roughness)
    }
}

/// Darcy–Weisbach: Δp = λ·L/δ⁵·8Q²/π²·ρ, in Pa.
pub fn darcy_weisbach_f(lambda: f64, length: f64, q: f64, diameter: f64, density: f64) -> Result<f64> {
    check_diameter(diameter)?;
    Ok(lambda * length / diameter.powi(5) * 8.0 * q * q / (PI * PI) * density)
}

/// dΔp/dQ with λ held fixed, Pa·s/m³.
pub fn darcy_weisbach_df(lambda: f64, length: f64, q: f64, diameter: f64, density: f64) -> Result<f64> {
    check_diameter(diameter)?;
    Ok(lambda * length / diameter.powi(5) * 16.0 * q / (PI * PI) * density)
}

/// Mean velocity v = 4·(p_n/p_a)·Q/(δ²π). Gas flows are quoted at normal
/// conditions; water uses a ratio of 1.
pub fn velocity(fluid: &FluidSpec, q: f64, diameter: f64) -> Result<f64> {
    check_diameter(diameter)?;
    Ok(4.0 * fluid.pressure_ratio() * q.abs() / (diameter * diameter * PI))
}

/// F and dF/dQ of one pipe at one flow magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipeEval {
    /// Pa² (gas) or Pa (water).
    pub f: f64,
    pub df_dq: f64,
    /// Water only.
    pub lambda: Option<f64>,
    /// Water only.
    pub reynolds: Option<f64>,
}

/// Evaluates the pressure function of a pipe.
pub trait FluidModel {
    /// F at `q_abs` and F′ at `max(q_abs, derivative_floor)`.
    fn eval(&self, pipe: &Pipe, q_abs: f64, derivative_floor: f64) -> Result<PipeEval>;
}

impl FluidModel for GasSpec {
    fn eval(&self, pipe: &Pipe, q_abs: f64, derivative_floor: f64) -> Result<PipeEval> {
        let rd = self.relative_density;
        Ok(PipeEval {
            f: renouard_f(rd, pipe.length, q_abs, pipe.diameter)?,
            df_dq: renouard_df(rd, pipe.length, q_abs.max(derivative_floor), pipe.diameter)?,
            lambda: None,
            reynolds: None,
        })
    }
}

impl WaterSpec {
    /// (Re, λ) at a flow magnitude.
    pub fn friction(&self, pipe: &Pipe, q_abs: f64) -> Result<(f64, f64)> {
        let re = reynolds(self.density, self.viscosity, q_abs, pipe.diameter)?;
        let lambda = friction_factor(re, pipe.roughness / pipe.diameter)?;
        Ok((re, lambda))
    }
}

impl FluidModel for WaterSpec {
    fn eval(&self, pipe: &Pipe, q_abs: f64, derivative_floor: f64) -> Result<PipeEval> {
        let qd = q_abs.max(derivative_floor);
        let (re, lambda) = if q_abs > 0.0 {
            self.friction(pipe, q_abs)?
        } else {
            self.friction(pipe, qd)?
        };
        let f = if q_abs > 0.0 {
            darcy_weisbach_f(lambda, pipe.length, q_abs, pipe.diameter, self.density)?
        } else {
            0.0
        };
        let lambda_d = if qd == q_abs { lambda } else { self.friction(pipe, qd)?.1 };
        Ok(PipeEval {
            f,
            df_dq: darcy_weisbach_df(lambda_d, pipe.length, qd, pipe.diameter, self.density)?,
            lambda: Some(lambda),
            reynolds: Some(re),
        })
    }
}

impl FluidModel for FluidSpec {
    fn eval(&self, pipe: &Pipe, q_abs: f64, derivative_floor: f64) -> Result<PipeEval> {
        match self {
            FluidSpec::Gas(g) => g.eval(pipe, q_abs, derivative_floor),
            FluidSpec::Water(w) => w.eval(pipe, q_abs, derivative_floor),
        }
    }
}
