//! Shared oracles for the integration suites.
//!
//! Everything here re-derives quantities from the scalar model maps or
//! first-order equilibrium conditions, independently of the condensation
//! and Newton paths it is used to check.

use chainsim_core::avi::AviProblem;
use chainsim_core::chain::{demand, stage_cost, step_inventory, AgentAction, AgentState, ChainParameters};
use chainsim_core::game::GameIndex;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Splits a stacked decision vector into per-stage actions of all agents.
pub fn decode_actions(index: &GameIndex, u: &DVector<f64>) -> Vec<Vec<AgentAction>> {
    (0..index.horizon)
        .map(|k| {
            (0..index.n_m)
                .map(|v| {
                    let off = index.stage_offset(v, k);
                    AgentAction::from_slice(u.rows(off, index.action_dim()).as_slice())
                })
                .collect()
        })
        .collect()
}

/// Horizon cost of agent `v` computed by stepping the scalar model maps,
/// using the builder's forecasts for every agent's base demand.
pub fn simulated_agent_cost(
    params: &ChainParameters,
    forecasts: &DMatrix<f64>,
    x0: &DVector<f64>,
    u: &DVector<f64>,
    v: usize,
) -> f64 {
    let index = GameIndex { n_m: params.n_m(), n_s: params.n_s(), horizon: params.horizon };
    let actions = decode_actions(&index, u);
    let mut state = AgentState::new(x0[3 * v], x0[3 * v + 1], x0[3 * v + 2]);
    let mut total = 0.0;
    for k in 0..params.horizon {
        let w_v = forecasts[(v, k)];
        total += stage_cost(params, v, &state, &actions[k], w_v).unwrap();
        let prices: Vec<f64> = actions[k].iter().map(|a| a.price).collect();
        let d = demand(&params.market, v, &prices, w_v).unwrap();
        state = AgentState::new(
            step_inventory(&params.manufacturers[v], &state),
            actions[k][v].production(),
            d,
        );
    }
    total
}

/// Worst constraint violation of `u` measured on simulated trajectories:
/// input bounds, per-stage supply caps, and inventory bounds at stages 1..N.
pub fn simulated_violation(
    params: &ChainParameters,
    forecasts: &DMatrix<f64>,
    x0: &DVector<f64>,
    u: &DVector<f64>,
) -> f64 {
    let index = GameIndex { n_m: params.n_m(), n_s: params.n_s(), horizon: params.horizon };
    let actions = decode_actions(&index, u);
    let mut worst = f64::NEG_INFINITY;
    for x in u.iter() {
        worst = worst.max(-x);
    }
    for stage in &actions {
        for (s, sup) in params.suppliers.iter().enumerate() {
            let total: f64 = stage.iter().map(|a| a.orders[s]).sum();
            worst = worst.max(total - sup.o_max);
        }
    }
    for v in 0..params.n_m() {
        let mut state = AgentState::new(x0[3 * v], x0[3 * v + 1], x0[3 * v + 2]);
        for k in 0..params.horizon {
            let prices: Vec<f64> = actions[k].iter().map(|a| a.price).collect();
            let d = demand(&params.market, v, &prices, forecasts[(v, k)]).unwrap();
            state = AgentState::new(
                step_inventory(&params.manufacturers[v], &state),
                actions[k][v].production(),
                d,
            );
            worst = worst.max(state.xi - params.manufacturers[v].xi_max);
            worst = worst.max(-state.xi);
        }
    }
    worst
}

/// A hand-built steady feasible input: constant prices of 10 and orders
/// that replace decay losses plus sales, split evenly across suppliers.
pub fn anchor_input(params: &ChainParameters, x0: &DVector<f64>) -> DVector<f64> {
    let index = GameIndex { n_m: params.n_m(), n_s: params.n_s(), horizon: params.horizon };
    let n_m = params.n_m();
    let n_s = params.n_s();
    let prices = vec![10.0; n_m];
    let mut u = DVector::zeros(index.input_dim());
    for v in 0..n_m {
        let d = demand(&params.market, v, &prices, 10.0).unwrap();
        let hold = d + (1.0 - params.manufacturers[v].alpha) * x0[3 * v];
        for k in 0..params.horizon {
            for s in 0..n_s {
                u[index.order_index(v, k, s)] = hold / n_s as f64;
            }
            u[index.price_index(v, k)] = 10.0;
        }
    }
    u
}

/// Draws inputs near the anchor until `count` of them are feasible for the
/// simulated constraints.
pub fn sample_feasible(
    params: &ChainParameters,
    forecasts: &DMatrix<f64>,
    x0: &DVector<f64>,
    rng: &mut impl Rng,
    count: usize,
    spread: f64,
) -> Vec<DVector<f64>> {
    let anchor = anchor_input(params, x0);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        assert!(attempts < 50 * count, "feasible sampler stalled");
        let candidate = anchor.map(|x| (x + rng.random_range(-spread..spread)).max(0.0));
        if simulated_violation(params, forecasts, x0, &candidate) <= 0.0 {
            out.push(candidate);
        }
    }
    out
}

/// Dykstra's alternating projection onto an intersection of half-spaces.
pub fn project_polyhedron(g_mat: &DMatrix<f64>, g_vec: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
    let m = g_mat.nrows();
    let n = g_mat.ncols();
    let mut x = z.clone();
    let mut corrections = vec![DVector::<f64>::zeros(n); m];
    let row_norms: Vec<f64> = (0..m).map(|i| g_mat.row(i).norm_squared()).collect();
    for _ in 0..200 {
        let mut moved = 0.0f64;
        for i in 0..m {
            let y = &x + &corrections[i];
            let viol = g_mat.row(i).transpose().dot(&y) - g_vec[i];
            let projected = if viol > 0.0 && row_norms[i] > 0.0 {
                &y - g_mat.row(i).transpose() * (viol / row_norms[i])
            } else {
                y.clone()
            };
            corrections[i] = &y - &projected;
            moved = moved.max((&projected - &x).amax());
            x = projected;
        }
        if moved < 1e-14 {
            break;
        }
    }
    x
}

/// Fixed point of the projected pseudo-gradient map, an independent
/// first-order characterization of the variational equilibrium. Requires a
/// positive-definite symmetric part; panics otherwise.
pub fn projected_gradient_equilibrium(problem: &AviProblem, tol: f64) -> DVector<f64> {
    let h = &problem.h;
    let n = h.nrows();
    let sym = (h + h.transpose()) * 0.5;
    let m_est = sym.symmetric_eigen().eigenvalues.min();
    assert!(m_est > 0.0, "projected-gradient oracle needs a strongly monotone map");
    let l_est = (h.transpose() * h).symmetric_eigen().eigenvalues.max().sqrt();
    let tau = m_est / (l_est * l_est);

    let mut u = DVector::zeros(n);
    u = project_polyhedron(&problem.g_mat, &problem.g_vec, &u);
    for _ in 0..2_000_000 {
        let step = &u - (h * &u + &problem.f) * tau;
        let next = project_polyhedron(&problem.g_mat, &problem.g_vec, &step);
        let delta = (&next - &u).amax();
        u = next;
        if delta < tol {
            return u;
        }
    }
    panic!("projected-gradient oracle did not reach {tol}");
}
