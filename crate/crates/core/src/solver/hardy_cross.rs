use crate::numerics::{condition_estimate, solve_linear, DenseSystem};
use crate::state::FlowState;
use crate::topology::LoopBasis;
use crate::{Error, Result};

use super::LoopEval;

/// Below this Σ|F′| a loop correction is undefined.
const SLOPE_GUARD: f64 = 1e-30;

/// Independent per-loop corrections Δℓ = −ΣF(ℓ) / Σᵢ|F′ᵢ|; `None` if some
/// loop has no slope.
pub fn hardy_cross_corrections(eval: &LoopEval) -> Option<Vec<f64>> {
    eval.sums
        .iter()
        .zip(&eval.terms)
        .map(|(sum, terms)| {
            let denom: f64 = terms.iter().map(|t| t.slope).sum();
            (denom >= SLOPE_GUARD).then(|| -sum / denom)
        })
        .collect()
}

/// J(ℓ,m) = Σ over pipes shared by ℓ and m of s(ℓ,i)·s(m,i)·|F′ᵢ|.
pub fn loop_jacobian(basis: &LoopBasis, eval: &LoopEval) -> Vec<Vec<f64>> {
    let n = basis.len();
    let x = basis.pipes().len();
    let mut slope = vec![0.0; x];
    for t in eval.terms.iter().flatten() {
        slope[t.pipe_index] = t.slope;
    }
    (0..n)
        .map(|l| {
            (0..n)
                .map(|m| {
                    (0..x)
                        .map(|i| (basis.entry(l, i) * basis.entry(m, i)) as f64 * slope[i])
                        .sum()
                })
                .collect()
        })
        .collect()
}

/// Qᵢ + Σℓ s(ℓ,i)·Δℓ.
fn apply(basis: &LoopBasis, flows: &FlowState, deltas: &[f64]) -> Vec<f64> {
    let mut q = flows.as_slice().to_vec();
    for (l, d) in deltas.iter().enumerate() {
        for (i, s) in basis.members(l) {
            q[i] += s as f64 * d;
        }
    }
    q
}

pub(super) fn original_step(
    basis: &LoopBasis,
    flows: &FlowState,
    eval: &LoopEval,
) -> Result<Option<Vec<f64>>> {
    Ok(hardy_cross_corrections(eval).map(|d| apply(basis, flows, &d)))
}

pub(super) fn improved_step(
    basis: &LoopBasis,
    flows: &FlowState,
    eval: &LoopEval,
    conditions: &mut Vec<f64>,
) -> Result<Option<Vec<f64>>> {
    let rhs = eval.sums.iter().map(|s| -s).collect();
    let sys = DenseSystem::new(loop_jacobian(basis, eval), rhs)?;
    conditions.push(condition_estimate(&sys));
    match solve_linear(&sys) {
        Ok(d) => Ok(Some(apply(basis, flows, &d))),
        Err(Error::Singular { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::initial::feasible_initial_flows;
    use crate::solver::{evaluate_loops, LoopTerm};
    use crate::topology::loop_basis;

    #[test]
    fn first_fixture_correction() {
        let net = fixtures::gas_network();
        let basis = loop_basis(&net).unwrap();
        let q = feasible_initial_flows(&net, 0).unwrap();
        let e = evaluate_loops(&net, &basis, &q, 1e-7).unwrap();
        let d = hardy_cross_corrections(&e).unwrap();
        let expected = 851_330_634.0 / 2_991_819_421.0;
        assert!(((d[0] - expected) / expected).abs() < 5e-3, "{}", d[0]);
    }

    #[test]
    fn balanced_loop_is_left_alone() {
        let e = LoopEval {
            sums: vec![0.0],
            terms: vec![vec![
                LoopTerm { pipe_index: 0, sign: 1, flow: 1.0, slope: 2.0 },
                LoopTerm { pipe_index: 1, sign: -1, flow: 1.0, slope: 2.0 },
            ]],
            pipes: vec![],
        };
        assert_eq!(hardy_cross_corrections(&e).unwrap(), vec![0.0]);
    }

    #[test]
    fn zero_slope_guarded() {
        let e = LoopEval {
            sums: vec![1.0],
            terms: vec![vec![LoopTerm { pipe_index: 0, sign: 1, flow: 0.0, slope: 0.0 }]],
            pipes: vec![],
        };
        assert!(hardy_cross_corrections(&e).is_none());
    }

    #[test]
    fn jacobian_diagonal_is_slope_sum() {
        let net = fixtures::gas_network();
        let basis = loop_basis(&net).unwrap();
        let q = feasible_initial_flows(&net, 0).unwrap();
        let e = evaluate_loops(&net, &basis, &q, 1e-7).unwrap();
        let j = loop_jacobian(&basis, &e);
        for (l, terms) in e.terms.iter().enumerate() {
            let s: f64 = terms.iter().map(|t| t.slope).sum();
            assert!((j[l][l] - s).abs() <= 1e-9 * s);
            for m in 0..j.len() {
                assert_eq!(j[l][m], j[m][l]);
            }
        }
        // loops I and IV share pipe 3 with opposite signs
        assert!(j[0][3] < 0.0);
    }
}
