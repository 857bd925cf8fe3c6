//! Stacked horizon responses of one agent's dynamics.
//!
//! For a horizon `N`, the stacks collect the states `x_0..x_N` obtained by
//! iterating the agent LTI, expressed as a free response in the initial
//! state, impulse responses in every agent's input sequence, and a
//! disturbance response in the agent's own base-demand sequence.

use crate::chain::{AgentLti, STATE_DIM};
use nalgebra::DMatrix;
use std::collections::BTreeMap;

/// Free-, impulse-, and disturbance-response stacks over `horizon + 1` states.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrices {
    pub horizon: usize,
    /// `(N+1)*3 x 3`; block row `k` is `A^k`.
    pub a_stack: DMatrix<f64>,
    /// Per input agent `j`: `(N+1)*3 x N*(n_s+1)`, block `(k, l)` is
    /// `A^(k-1-l) B_j` for `l < k` and zero otherwise.
    pub b_stacks: BTreeMap<usize, DMatrix<f64>>,
    /// `(N+1)*3 x N`, same causal structure driven by the base demand.
    pub d_stack: DMatrix<f64>,
}

impl PredictionMatrices {
    /// Rows predicting states `x_0..x_{N-1}` (the stage-cost window).
    pub fn cost_rows(m: &DMatrix<f64>, horizon: usize) -> DMatrix<f64> {
        m.rows(0, STATE_DIM * horizon).into_owned()
    }

    /// Rows predicting states `x_1..x_N` (the constrained window).
    pub fn constraint_rows(m: &DMatrix<f64>, horizon: usize) -> DMatrix<f64> {
        m.rows(STATE_DIM, STATE_DIM * horizon).into_owned()
    }
}

/// Builds the stacked responses of one agent over the given horizon.
pub fn build_prediction(lti: &AgentLti, horizon: usize) -> PredictionMatrices {
    assert!(horizon >= 1, "prediction horizon must be >= 1");
    let n_rows = STATE_DIM * (horizon + 1);
    let action_dim = lti.b_self.ncols();

    // A^0..A^N
    let mut powers = Vec::with_capacity(horizon + 1);
    powers.push(DMatrix::identity(STATE_DIM, STATE_DIM));
    for k in 1..=horizon {
        let next = &powers[k - 1] * &lti.a;
        powers.push(next);
    }

    let mut a_stack = DMatrix::zeros(n_rows, STATE_DIM);
    for (k, p) in powers.iter().enumerate() {
        a_stack.view_mut((STATE_DIM * k, 0), (STATE_DIM, STATE_DIM)).copy_from(p);
    }

    let mut agents: Vec<usize> = lti.b_cross.keys().copied().collect();
    let own = (0..=agents.len())
        .find(|j| !agents.contains(j))
        .expect("own agent index");
    agents.push(own);
    agents.sort_unstable();

    let mut b_stacks = BTreeMap::new();
    for j in agents {
        let b = if j == own { &lti.b_self } else { &lti.b_cross[&j] };
        let mut stack = DMatrix::zeros(n_rows, action_dim * horizon);
        for k in 1..=horizon {
            for l in 0..k {
                let block = &powers[k - 1 - l] * b;
                stack
                    .view_mut((STATE_DIM * k, action_dim * l), (STATE_DIM, action_dim))
                    .copy_from(&block);
            }
        }
        b_stacks.insert(j, stack);
    }

    let mut d_stack = DMatrix::zeros(n_rows, horizon);
    for k in 1..=horizon {
        for l in 0..k {
            let block = &powers[k - 1 - l] * &lti.d;
            d_stack.view_mut((STATE_DIM * k, l), (STATE_DIM, 1)).copy_from(&block);
        }
    }

    PredictionMatrices { horizon, a_stack, b_stacks, d_stack }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{build_agent_lti, ChainParameters, ManufacturerParams, MarketParams, SupplierParams};
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn chain() -> ChainParameters {
        ChainParameters {
            market: MarketParams::new(DMatrix::from_row_slice(
                3,
                3,
                &[0.7, 0.3, 0.3, 0.3, 0.8, 0.3, 0.3, 0.3, 0.6],
            )),
            suppliers: vec![
                SupplierParams { rho0: 1.0, rho1: 0.1, o_max: 40.0 },
                SupplierParams { rho0: 1.5, rho1: 0.15, o_max: 40.0 },
            ],
            manufacturers: vec![
                ManufacturerParams { alpha: 0.9, gamma: 0.1, xi_safety: 25.0, xi_max: 50.0 },
                ManufacturerParams { alpha: 0.7, gamma: 0.1, xi_safety: 25.0, xi_max: 50.0 },
                ManufacturerParams { alpha: 0.5, gamma: 0.1, xi_safety: 25.0, xi_max: 50.0 },
            ],
            horizon: 15,
        }
    }

    #[test]
    fn one_step_stack_is_identity_over_a() {
        let lti = build_agent_lti(&chain(), 0).unwrap();
        let pred = build_prediction(&lti, 1);
        assert_eq!(pred.a_stack.rows(0, 3).clone_owned(), DMatrix::identity(3, 3));
        assert_eq!(pred.a_stack.rows(3, 3).clone_owned(), lti.a);
        assert_eq!(pred.b_stacks[&0].rows(0, 3).clone_owned(), DMatrix::zeros(3, 3));
        assert_eq!(pred.b_stacks[&0].rows(3, 3).clone_owned(), lti.b_self);
    }

    #[test]
    fn two_step_free_response_squares_a() {
        let lti = build_agent_lti(&chain(), 0).unwrap();
        let pred = build_prediction(&lti, 2);
        let a2 = pred.a_stack.rows(6, 3).clone_owned();
        assert_relative_eq!(a2[(0, 0)], 0.81, epsilon = 1e-14);
        assert_eq!(a2, &lti.a * &lti.a);
    }

    #[test]
    fn first_block_row_is_identity_and_inputs_causal() {
        let lti = build_agent_lti(&chain(), 1).unwrap();
        let pred = build_prediction(&lti, 4);
        assert_eq!(pred.a_stack.rows(0, 3).clone_owned(), DMatrix::identity(3, 3));
        for stack in pred.b_stacks.values() {
            assert_eq!(stack.rows(0, 3).clone_owned(), DMatrix::zeros(3, stack.ncols()));
            // block (k, l) must vanish for l >= k
            for k in 0..=4usize {
                for l in k..4 {
                    let block = stack.view((3 * k, 3 * l), (3, 3));
                    assert!(block.iter().all(|&x| x == 0.0), "non-causal block at ({k},{l})");
                }
            }
        }
    }

    #[test]
    fn stacked_prediction_matches_step_simulation() {
        let chain = chain();
        let horizon = 5;
        for v in 0..3 {
            let lti = build_agent_lti(&chain, v).unwrap();
            let pred = build_prediction(&lti, horizon);

            let mut seed = 42u64 + v as u64;
            let mut next_f = || {
                seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((seed >> 11) as f64) / ((1u64 << 53) as f64) * 5.0
            };
            let inputs: Vec<Vec<DVector<f64>>> = (0..horizon)
                .map(|_| (0..3).map(|_| DVector::from_fn(3, |_, _| next_f())).collect())
                .collect();
            let w: Vec<f64> = (0..horizon).map(|_| next_f()).collect();
            let x0 = DVector::from_column_slice(&[30.0, 1.0, 2.0]);

            // step-by-step simulation
            let mut xs = vec![x0.clone()];
            for k in 0..horizon {
                let mut x = &lti.a * xs.last().unwrap();
                for j in 0..3 {
                    x += lti.b_block(v, j) * &inputs[k][j];
                }
                x += &lti.d * w[k];
                xs.push(x);
            }

            // stacked prediction
            let mut predicted = &pred.a_stack * &x0;
            for j in 0..3 {
                let mut uj = DVector::zeros(3 * horizon);
                for k in 0..horizon {
                    uj.rows_mut(3 * k, 3).copy_from(&inputs[k][j]);
                }
                predicted += &pred.b_stacks[&j] * uj;
            }
            predicted += &pred.d_stack * DVector::from_column_slice(&w);

            for k in 0..=horizon {
                for r in 0..3 {
                    assert_relative_eq!(predicted[3 * k + r], xs[k][r], epsilon = 1e-12);
                }
            }
        }
    }
}
