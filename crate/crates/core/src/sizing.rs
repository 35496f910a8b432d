//! Inverse problem: flows held fixed, diameters adjusted until every loop
//! balances.
//!
//! Each sweep computes one correction per loop from the loop residual and
//! the diameter slopes, in the manner of Hardy Cross, and applies it to the
//! member pipes. Enlarging a pipe lowers its F, so a member pipe is widened
//! when it pushes the loop sum the wrong way and narrowed otherwise.

use std::collections::BTreeMap;
use std::fmt;

use crate::friction::{renouard_f, velocity, darcy_weisbach_f};
use crate::initial::check_feasible;
use crate::network::{ensure_valid, FluidSpec, Network, PipeId};
use crate::solver::{GAS_RESIDUAL_TOLERANCE, WATER_RESIDUAL_TOLERANCE};
use crate::state::FlowState;
use crate::topology::LoopBasis;
use crate::{Error, Result};

/// Recommended gas velocity band, m/s.
pub const GAS_VELOCITY_BAND: (f64, f64) = (10.0, 15.0);

/// Sweeps without a 1 % gain in the best residual, with some pipe pinned at
/// a bound, before the bounds are declared infeasible.
const STALL_SWEEPS: usize = 25;

/// dF/dδ of the Renouard relation: −4.82·4810·ρr·L·Q^1.82/δ^5.82, Pa²/m.
pub fn df_ddiameter_gas(rel_density: f64, length: f64, q: f64, diameter: f64) -> Result<f64> {
    Ok(-4.82 * renouard_f(rel_density, length, q, diameter)? / diameter)
}

/// dF/dδ of Darcy–Weisbach at frozen λ: −5·8·ρ·λ·L·Q²/(π²·δ⁶), Pa/m.
pub fn df_ddiameter_water(lambda: f64, length: f64, q: f64, diameter: f64, density: f64) -> Result<f64> {
    Ok(-5.0 * darcy_weisbach_f(lambda, length, q, diameter, density)? / diameter)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizingConfig {
    /// Global (lower, upper) diameter bounds, m.
    pub diameter_bounds: (f64, f64),
    /// Per-pipe overrides of the global bounds.
    pub pipe_bounds: BTreeMap<PipeId, (f64, f64)>,
    /// Largest |ΣF| accepted; `None` picks the fluid default.
    pub residual_tolerance: Option<f64>,
    pub max_iterations: usize,
    pub fixed_flows: FlowState,
}

impl SizingConfig {
    pub fn new(fixed_flows: FlowState) -> Self {
        Self {
            diameter_bounds: (0.01, 2.0),
            pipe_bounds: BTreeMap::new(),
            residual_tolerance: None,
            max_iterations: 200,
            fixed_flows,
        }
    }

    pub fn bounds(&self, pipe: PipeId) -> (f64, f64) {
        self.pipe_bounds.get(&pipe).copied().unwrap_or(self.diameter_bounds)
    }

    fn residual_tolerance_for(&self, fluid: &FluidSpec) -> f64 {
        self.residual_tolerance.unwrap_or(match fluid {
            FluidSpec::Gas(_) => GAS_RESIDUAL_TOLERANCE,
            FluidSpec::Water(_) => WATER_RESIDUAL_TOLERANCE,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SizingTermination {
    Converged,
    MaxIterations,
    InfeasibleWithinBounds,
}

impl fmt::Display for SizingTermination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SizingTermination::Converged => "converged",
            SizingTermination::MaxIterations => "max-iterations",
            SizingTermination::InfeasibleWithinBounds => "infeasible within bounds",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizingReport {
    pub diameters: BTreeMap<PipeId, f64>,
    /// Diameters after every sweep, starting with the input.
    pub iterations: Vec<Vec<f64>>,
    /// |ΣF| per loop for every entry of `iterations`.
    pub loop_residuals: Vec<Vec<f64>>,
    pub termination: SizingTermination,
    /// Pipes in no loop, left at their input diameter (clamped to bounds).
    pub tree_pipes: Vec<PipeId>,
    /// Pipes sitting on a bound at exit.
    pub at_bounds: Vec<PipeId>,
    /// Gas pipes whose velocity falls outside the recommended band.
    pub velocity_flags: Vec<(PipeId, f64)>,
}

impl SizingReport {
    pub fn converged(&self) -> bool {
        self.termination == SizingTermination::Converged
    }

    pub fn max_final_loop_residual(&self) -> f64 {
        self.loop_residuals
            .last()
            .map_or(0.0, |r| r.iter().fold(0.0, |m, v| m.max(*v)))
    }

    /// The network with the sized diameters.
    pub fn apply(&self, net: &Network) -> Network {
        net.map_diameters(|p| self.diameters.get(&p.id).copied().unwrap_or(p.diameter))
    }
}

/// F and dF/dδ of every pipe at the fixed flows.
fn pipe_terms(net: &Network, q: &[f64], diameters: &[f64]) -> Result<Vec<(f64, f64)>> {
    net.pipes()
        .iter()
        .zip(q)
        .zip(diameters)
        .map(|((p, &qi), &d)| {
            let qa = qi.abs();
            match net.fluid() {
                FluidSpec::Gas(g) => Ok((
                    renouard_f(g.relative_density, p.length, qa, d)?,
                    df_ddiameter_gas(g.relative_density, p.length, qa, d)?,
                )),
                FluidSpec::Water(w) => {
                    if qa == 0.0 {
                        return Ok((0.0, 0.0));
                    }
                    let sized = crate::network::Pipe { diameter: d, ..p.clone() };
                    let (_, lambda) = w.friction(&sized, qa)?;
                    Ok((
                        darcy_weisbach_f(lambda, p.length, qa, d, w.density)?,
                        df_ddiameter_water(lambda, p.length, qa, d, w.density)?,
                    ))
                }
            }
        })
        .collect()
}

fn loop_sums(basis: &LoopBasis, q: &[f64], terms: &[(f64, f64)]) -> Vec<f64> {
    (0..basis.len())
        .map(|l| basis.members(l).map(|(i, s)| s as f64 * q[i].signum() * terms[i].0).sum())
        .collect()
}

pub fn optimize_diameters(net: &Network, basis: &LoopBasis, config: &SizingConfig) -> Result<SizingReport> {
    ensure_valid(net)?;
    let (lo, hi) = config.diameter_bounds;
    let bounds_ok = |(lo, hi): (f64, f64)| lo > 0.0 && lo < hi && hi.is_finite();
    if !bounds_ok((lo, hi)) || !config.pipe_bounds.values().all(|&b| bounds_ok(b)) {
        return Err(Error::Domain("diameter bounds must satisfy 0 < lower < upper".into()));
    }
    if config.fixed_flows.pipe_ids() != net.pipe_ids().as_slice() || basis.pipes() != net.pipe_ids().as_slice() {
        return Err(Error::Dimension("fixed flows or loop basis do not match the network".into()));
    }
    check_feasible(net, &config.fixed_flows)?;

    let q = config.fixed_flows.as_slice();
    let in_loops = basis.pipes_in_loops();
    for (i, p) in net.pipes().iter().enumerate() {
        if in_loops[i] && q[i] == 0.0 {
            return Err(Error::Domain(format!("pipe {} is in a loop but carries no flow", p.id)));
        }
    }
    let bounds: Vec<(f64, f64)> = net.pipes().iter().map(|p| config.bounds(p.id)).collect();
    let tol = config.residual_tolerance_for(net.fluid());

    // start inside the bounds so every returned diameter honours them
    let mut d: Vec<f64> = net
        .pipes()
        .iter()
        .zip(&bounds)
        .map(|(p, &(lo, hi))| p.diameter.clamp(lo, hi))
        .collect();
    let mut terms = pipe_terms(net, q, &d)?;
    let mut sums = loop_sums(basis, q, &terms);
    let max_abs = |s: &[f64]| s.iter().fold(0.0_f64, |m, v| m.max(v.abs()));

    let mut iterations = vec![d.clone()];
    let mut loop_residuals = vec![sums.iter().map(|s| s.abs()).collect::<Vec<_>>()];
    let mut termination = SizingTermination::MaxIterations;
    let mut best = max_abs(&sums);
    let mut since_best = 0;

    for _ in 0..config.max_iterations {
        if max_abs(&sums) <= tol {
            termination = SizingTermination::Converged;
            break;
        }
        // Newton on the loop sum along δᵢ += s·sign(Qᵢ)·Δ:
        // dΣF/dΔ = Σ dF/dδᵢ = −Σ|dF/dδᵢ|, so Δ = +ΣF / Σ|dF/dδᵢ|.
        let mut next = d.clone();
        let mut clamped = false;
        for (l, sum) in sums.iter().enumerate() {
            let slope: f64 = basis.members(l).map(|(i, _)| terms[i].1.abs()).sum();
            if !(slope > 0.0) {
                return Err(Error::Domain(format!("loop {} has no diameter sensitivity", l + 1)));
            }
            let delta = sum / slope;
            for (i, s) in basis.members(l) {
                next[i] += s as f64 * q[i].signum() * delta;
            }
        }
        for (i, v) in next.iter_mut().enumerate() {
            let (lo, hi) = bounds[i];
            let c = v.clamp(lo, hi);
            clamped |= c != *v;
            *v = c;
        }
        d = next;
        terms = pipe_terms(net, q, &d)?;
        sums = loop_sums(basis, q, &terms);
        if sums.iter().any(|s| !s.is_finite()) {
            return Err(Error::Domain("non-finite loop residual during sizing".into()));
        }
        iterations.push(d.clone());
        loop_residuals.push(sums.iter().map(|s| s.abs()).collect());

        let r = max_abs(&sums);
        if r < 0.99 * best {
            best = r;
            since_best = 0;
        } else {
            since_best += 1;
        }
        let pinned = clamped || d.iter().zip(&bounds).any(|(&v, &(lo, hi))| v == lo || v == hi);
        if pinned && since_best >= STALL_SWEEPS {
            termination = SizingTermination::InfeasibleWithinBounds;
            break;
        }
    }
    if termination == SizingTermination::MaxIterations && max_abs(&sums) <= tol {
        termination = SizingTermination::Converged;
    }

    let at_bounds: Vec<PipeId> = net
        .pipes()
        .iter()
        .zip(&d)
        .zip(&bounds)
        .filter(|((_, &v), &(lo, hi))| v == lo || v == hi)
        .map(|((p, _), _)| p.id)
        .collect();
    if termination == SizingTermination::MaxIterations && !at_bounds.is_empty() {
        termination = SizingTermination::InfeasibleWithinBounds;
    }

    let mut velocity_flags = Vec::new();
    if let FluidSpec::Gas(_) = net.fluid() {
        for ((p, &qi), &di) in net.pipes().iter().zip(q).zip(&d) {
            let v = velocity(net.fluid(), qi, di)?;
            if v < GAS_VELOCITY_BAND.0 || v > GAS_VELOCITY_BAND.1 {
                velocity_flags.push((p.id, v));
            }
        }
    }

    Ok(SizingReport {
        diameters: net.pipes().iter().zip(&d).map(|(p, &v)| (p.id, v)).collect(),
        iterations,
        loop_residuals,
        termination,
        tree_pipes: net
            .pipes()
            .iter()
            .zip(&in_loops)
            .filter(|(_, &inl)| !inl)
            .map(|(p, _)| p.id)
            .collect(),
        at_bounds,
        velocity_flags,
    })
}
