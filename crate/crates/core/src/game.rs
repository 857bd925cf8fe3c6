//! Condensation of the horizon-N coupled planning problems into a single
//! quadratic game in the stacked input sequence.
//!
//! The condensed form carries the stacked pseudo-gradient pair `(H, f)`
//! whose block row `v` is the gradient of agent `v`'s cost in its own
//! decisions, the polyhedral constraint pair `(G, g)` encoding input
//! bounds, inventory bounds, and shared supply capacities, and the full
//! per-agent quadratic cost forms used to report costs consistent with
//! stage-cost sums.
//!
//! Everything is built from one agent's belief: its parameter estimates
//! and its base-demand forecasts for every manufacturer. Under exact,
//! identical beliefs all agents build the same game.

use crate::avi::AviProblem;
use crate::chain::{build_agent_lti, AgentAction, ChainParameters, ModelError, STATE_DIM};
use crate::prediction::{build_prediction, PredictionMatrices};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GameError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(
        "suppliers[{index}].rho1 = {rho1} violates the convexity requirement rho1 >= 0; \
         the equilibrium solve is only well posed for nonnegative wholesale price slopes"
    )]
    ConvexityViolation { index: usize, rho1: f64 },
    #[error("{what}: expected dimension {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

/// Index arithmetic for the stacked decision vector and constraint rows.
///
/// The decision vector is agent-major, stage-second: agent `v`'s block
/// holds its `N` stage actions, each `(o_1..o_{n_s}, p)`. Constraint rows
/// are ordered input bounds, then inventory bounds (agent-major, stage
/// 1..N, upper before lower), then per-stage supply capacities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GameIndex {
    pub n_m: usize,
    pub n_s: usize,
    pub horizon: usize,
}

impl GameIndex {
    pub fn action_dim(&self) -> usize {
        self.n_s + 1
    }

    pub fn agent_dim(&self) -> usize {
        self.horizon * self.action_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.n_m * self.agent_dim()
    }

    pub fn agent_offset(&self, v: usize) -> usize {
        v * self.agent_dim()
    }

    pub fn stage_offset(&self, v: usize, k: usize) -> usize {
        self.agent_offset(v) + k * self.action_dim()
    }

    pub fn order_index(&self, v: usize, k: usize, s: usize) -> usize {
        self.stage_offset(v, k) + s
    }

    pub fn price_index(&self, v: usize, k: usize) -> usize {
        self.stage_offset(v, k) + self.n_s
    }

    pub fn bound_rows(&self) -> usize {
        self.input_dim()
    }

    pub fn inventory_rows(&self) -> usize {
        2 * self.horizon * self.n_m
    }

    pub fn capacity_rows(&self) -> usize {
        self.horizon * self.n_s
    }

    pub fn constraint_dim(&self) -> usize {
        self.bound_rows() + self.inventory_rows() + self.capacity_rows()
    }

    /// Row of the inventory bound for agent `v` at predicted stage `k` (1..=N).
    pub fn inventory_row(&self, v: usize, k: usize, upper: bool) -> usize {
        debug_assert!((1..=self.horizon).contains(&k));
        self.bound_rows() + 2 * (v * self.horizon + (k - 1)) + usize::from(!upper)
    }

    /// Row of the capacity constraint of supplier `s` at stage `k` (0..N).
    pub fn capacity_row(&self, k: usize, s: usize) -> usize {
        self.bound_rows() + self.inventory_rows() + k * self.n_s + s
    }
}

/// One agent's private view of the chain: parameter estimates plus a
/// base-demand forecast for every manufacturer over the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentBelief {
    pub params: ChainParameters,
    /// `n_m x N`; row `j` is the builder's forecast of agent `j`'s base demand.
    pub forecasts: DMatrix<f64>,
}

impl AgentBelief {
    pub fn new(params: ChainParameters, forecasts: DMatrix<f64>) -> Result<Self, GameError> {
        if forecasts.nrows() != params.n_m() || forecasts.ncols() != params.horizon {
            return Err(GameError::Dimension {
                what: "belief forecasts (n_m x N)",
                expected: params.n_m() * params.horizon,
                got: forecasts.nrows() * forecasts.ncols(),
            });
        }
        Ok(Self { params, forecasts })
    }

    /// Belief that every agent's base demand stays at the given constant.
    pub fn with_constant_demand(params: ChainParameters, w: &[f64]) -> Result<Self, GameError> {
        if w.len() != params.n_m() {
            return Err(GameError::Dimension {
                what: "constant base demand",
                expected: params.n_m(),
                got: w.len(),
            });
        }
        let horizon = params.horizon;
        let forecasts = DMatrix::from_fn(w.len(), horizon, |j, _| w[j]);
        Ok(Self { params, forecasts })
    }
}

/// Full quadratic form of one agent's condensed cost,
/// `J(u) = u' M u / 2 + c' u + constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentQuadraticCost {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub constant: f64,
}

impl AgentQuadraticCost {
    pub fn value(&self, u: &DVector<f64>) -> f64 {
        0.5 * (u.transpose() * &self.hessian * u)[(0, 0)] + self.linear.dot(u) + self.constant
    }
}

/// Condensed quadratic game over the stacked input sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct CondensedGame {
    pub index: GameIndex,
    /// Stacked pseudo-gradient matrix; block row `v` is agent `v`'s own-cost
    /// Hessian rows. Asymmetric for more than one agent.
    pub h: DMatrix<f64>,
    pub f: DVector<f64>,
    pub g_mat: DMatrix<f64>,
    pub g_vec: DVector<f64>,
    /// Per-agent condensed costs; `h`/`f` are extracted from these.
    pub costs: Vec<AgentQuadraticCost>,
    /// Per-agent predicted inventory response: plan is `xi_free + xi_response * u`
    /// over stages 0..=N.
    pub xi_free: Vec<DVector<f64>>,
    pub xi_response: Vec<DMatrix<f64>>,
}

impl CondensedGame {
    /// Stacked gradient `H u + f`; block `v` is agent `v`'s own gradient at `u`.
    pub fn pseudo_gradient(&self, u: &DVector<f64>) -> Result<DVector<f64>, GameError> {
        if u.len() != self.index.input_dim() {
            return Err(GameError::Dimension {
                what: "decision vector",
                expected: self.index.input_dim(),
                got: u.len(),
            });
        }
        Ok(&self.h * u + &self.f)
    }

    /// Agent `v`'s condensed cost at the joint decision `u`, including the
    /// input-independent constant, so it matches the stage-cost sum.
    pub fn agent_cost(&self, v: usize, u: &DVector<f64>) -> f64 {
        self.costs[v].value(u)
    }

    /// Stage-0 action of agent `v` inside `u` (the receding-horizon selector).
    pub fn stage0_action(&self, v: usize, u: &DVector<f64>) -> AgentAction {
        let off = self.index.stage_offset(v, 0);
        let block = u.rows(off, self.index.action_dim());
        AgentAction::from_slice(block.as_slice())
    }

    /// Predicted inventory trajectory of agent `v` over stages 0..=N at `u`.
    pub fn inventory_plan(&self, v: usize, u: &DVector<f64>) -> DVector<f64> {
        &self.xi_free[v] + &self.xi_response[v] * u
    }

    /// Maximum constraint violation of `u` (nonpositive iff feasible).
    pub fn constraint_violation(&self, u: &DVector<f64>) -> f64 {
        (&self.g_mat * u - &self.g_vec).max()
    }

    /// KKT variational-inequality problem of this game.
    pub fn avi_problem(&self) -> AviProblem {
        let avi = AviProblem::new(
            self.h.clone(),
            self.f.clone(),
            self.g_mat.clone(),
            self.g_vec.clone(),
        )
        .expect("condensed game dimensions are consistent");
        debug_assert!(self.own_blocks_convex(1e-8));
        avi
    }

    /// Checks that every agent's own-decision Hessian block is positive
    /// semidefinite (up to `tol`), which holds whenever all wholesale price
    /// slopes are nonnegative.
    pub fn own_blocks_convex(&self, tol: f64) -> bool {
        let nd = self.index.agent_dim();
        for v in 0..self.index.n_m {
            let off = self.index.agent_offset(v);
            let block = self.h.view((off, off), (nd, nd));
            let sym = (block + block.transpose()) * 0.5;
            let eig = sym.symmetric_eigenvalues();
            let scale = 1.0 + block.amax();
            if eig.min() < -tol * scale {
                return false;
            }
        }
        true
    }

    /// Best-response problem of agent `v` against fixed opponent blocks of
    /// `u_fixed`: a single-agent QP over agent `v`'s decisions under the
    /// joint constraints. Used for the unilateral-deviation equilibrium test.
    pub fn best_response_problem(&self, v: usize, u_fixed: &DVector<f64>) -> AviProblem {
        let idx = &self.index;
        let nd = idx.agent_dim();
        let off = idx.agent_offset(v);

        let cost = &self.costs[v];
        let h_own = cost.hessian.view((off, off), (nd, nd)).into_owned();
        // linear term: own rows of the Hessian applied to the fixed blocks
        let mut f_own = cost.linear.rows(off, nd).into_owned();
        for j in 0..idx.n_m {
            if j == v {
                continue;
            }
            let joff = idx.agent_offset(j);
            f_own += cost.hessian.view((off, joff), (nd, nd)) * u_fixed.rows(joff, nd);
        }

        let g_own = self.g_mat.columns(off, nd).into_owned();
        let mut rhs = self.g_vec.clone();
        let mut u_others = u_fixed.clone();
        u_others.rows_mut(off, nd).fill(0.0);
        rhs -= &self.g_mat * u_others;

        AviProblem::new(h_own, f_own, g_own, rhs).expect("consistent restriction")
    }
}

/// ξ-component rows (stages 0..=N) of a stacked prediction matrix.
fn xi_rows(m: &DMatrix<f64>, horizon: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(horizon + 1, m.ncols());
    for k in 0..=horizon {
        out.row_mut(k).copy_from(&m.row(STATE_DIM * k));
    }
    out
}

fn xi_entries(v: &DVector<f64>, horizon: usize) -> DVector<f64> {
    DVector::from_fn(horizon + 1, |k, _| v[STATE_DIM * k])
}

/// Condenses the belief's horizon-N coupled problems at the measured global
/// state into the quadratic game.
pub fn build_condensed_game(
    belief: &AgentBelief,
    x_global: &DVector<f64>,
) -> Result<CondensedGame, GameError> {
    let params = &belief.params;
    params.validate()?;
    for (s, sup) in params.suppliers.iter().enumerate() {
        if sup.rho1 < 0.0 {
            return Err(GameError::ConvexityViolation { index: s, rho1: sup.rho1 });
        }
    }
    let n_m = params.n_m();
    let n_s = params.n_s();
    let horizon = params.horizon;
    let idx = GameIndex { n_m, n_s, horizon };
    if x_global.len() != STATE_DIM * n_m {
        return Err(GameError::Dimension {
            what: "global state",
            expected: STATE_DIM * n_m,
            got: x_global.len(),
        });
    }
    if belief.forecasts.nrows() != n_m || belief.forecasts.ncols() != horizon {
        return Err(GameError::Dimension {
            what: "belief forecasts (n_m x N)",
            expected: n_m * horizon,
            got: belief.forecasts.nrows() * belief.forecasts.ncols(),
        });
    }

    let n_u = idx.input_dim();
    let nd = idx.agent_dim();

    // Per-agent predictions and inventory responses over stages 0..=N.
    let mut predictions: Vec<PredictionMatrices> = Vec::with_capacity(n_m);
    let mut xi_free_full: Vec<DVector<f64>> = Vec::with_capacity(n_m);
    let mut xi_resp_full: Vec<DMatrix<f64>> = Vec::with_capacity(n_m);
    for v in 0..n_m {
        let lti = build_agent_lti(params, v)?;
        let pred = build_prediction(&lti, horizon);
        let x_v = x_global.rows(STATE_DIM * v, STATE_DIM).into_owned();
        let w_v = belief.forecasts.row(v).transpose();
        let free = &pred.a_stack * &x_v + &pred.d_stack * &w_v;
        xi_free_full.push(xi_entries(&free, horizon));

        let mut resp = DMatrix::zeros(horizon + 1, n_u);
        for j in 0..n_m {
            resp.view_mut((0, idx.agent_offset(j)), (horizon + 1, nd))
                .copy_from(&xi_rows(&pred.b_stacks[&j], horizon));
        }
        xi_resp_full.push(resp);
        predictions.push(pred);
    }

    // Per-agent quadratic costs: instantaneous input terms plus the condensed
    // inventory tracking term over the cost window (stages 0..N-1).
    let mut costs: Vec<AgentQuadraticCost> = Vec::with_capacity(n_m);
    for v in 0..n_m {
        let man = &params.manufacturers[v];
        let gamma = man.gamma;
        let beta_row = params.market.beta.row(v);

        let mut hessian = DMatrix::zeros(n_u, n_u);
        let mut linear = DVector::zeros(n_u);

        for k in 0..horizon {
            // own stage block: orders 2*rho1, price 2*beta_vv
            for s in 0..n_s {
                let i = idx.order_index(v, k, s);
                hessian[(i, i)] = 2.0 * params.suppliers[s].rho1;
                linear[i] = params.suppliers[s].rho0;
            }
            let pi = idx.price_index(v, k);
            hessian[(pi, pi)] = 2.0 * beta_row[v];
            linear[pi] = -belief.forecasts[(v, k)];

            // bilinear couplings with every opponent block at the same stage
            for j in 0..n_m {
                if j == v {
                    continue;
                }
                for s in 0..n_s {
                    let i = idx.order_index(v, k, s);
                    let ij = idx.order_index(j, k, s);
                    hessian[(i, ij)] = params.suppliers[s].rho1;
                    hessian[(ij, i)] = params.suppliers[s].rho1;
                }
                let pj = idx.price_index(j, k);
                hessian[(pi, pj)] = -beta_row[j];
                hessian[(pj, pi)] = -beta_row[j];
            }
        }

        // tracking term gamma * || xi_k - xi_safety ||^2 over stages 0..N-1
        let resp_cost = xi_resp_full[v].rows(0, horizon).into_owned();
        let free_cost = xi_free_full[v].rows(0, horizon).into_owned();
        let deviation = free_cost.add_scalar(-man.xi_safety);
        hessian += 2.0 * gamma * resp_cost.transpose() * &resp_cost;
        linear += 2.0 * gamma * resp_cost.transpose() * &deviation;
        let constant = gamma * deviation.norm_squared();

        costs.push(AgentQuadraticCost { hessian, linear, constant });
    }

    // Stacked pseudo-gradient: block row v comes from agent v's own cost.
    let mut h = DMatrix::zeros(n_u, n_u);
    let mut f = DVector::zeros(n_u);
    for v in 0..n_m {
        let off = idx.agent_offset(v);
        h.view_mut((off, 0), (nd, n_u)).copy_from(&costs[v].hessian.view((off, 0), (nd, n_u)));
        f.rows_mut(off, nd).copy_from(&costs[v].linear.rows(off, nd));
    }

    // Constraints: input bounds, inventory bounds on stages 1..=N, capacities.
    let n_c = idx.constraint_dim();
    let mut g_mat = DMatrix::zeros(n_c, n_u);
    let mut g_vec = DVector::zeros(n_c);
    for i in 0..n_u {
        g_mat[(i, i)] = -1.0;
    }
    for v in 0..n_m {
        let xi_max = params.manufacturers[v].xi_max;
        for k in 1..=horizon {
            let up = idx.inventory_row(v, k, true);
            let lo = idx.inventory_row(v, k, false);
            let resp_row = xi_resp_full[v].row(k);
            g_mat.row_mut(up).copy_from(&resp_row);
            g_mat.row_mut(lo).copy_from(&(-resp_row));
            g_vec[up] = xi_max - xi_free_full[v][k];
            g_vec[lo] = xi_free_full[v][k];
        }
    }
    for k in 0..horizon {
        for s in 0..n_s {
            let row = idx.capacity_row(k, s);
            for v in 0..n_m {
                g_mat[(row, idx.order_index(v, k, s))] = 1.0;
            }
            g_vec[row] = params.suppliers[s].o_max;
        }
    }

    Ok(CondensedGame {
        index: idx,
        h,
        f,
        g_mat,
        g_vec,
        costs,
        xi_free: xi_free_full,
        xi_response: xi_resp_full,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{ManufacturerParams, MarketParams, SupplierParams};
    use approx::assert_relative_eq;

    fn table1() -> ChainParameters {
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

    fn table1_state() -> DVector<f64> {
        let mut x = DVector::zeros(9);
        for v in 0..3 {
            x[3 * v] = 30.0;
        }
        x
    }

    #[test]
    fn degenerate_single_agent_game_reduces_to_printed_form() {
        // n_m = 1, n_s = 1, N = 1, rho1 = 0, gamma ~ 0 in the cost sense:
        // stage 0 inventory is fixed, so the tracking term is constant and
        // H = 2*diag(0, beta), f = (rho0, -w0).
        let params = ChainParameters {
            market: MarketParams::new(DMatrix::from_row_slice(1, 1, &[0.7])),
            suppliers: vec![SupplierParams { rho0: 1.0, rho1: 0.0, o_max: 40.0 }],
            manufacturers: vec![ManufacturerParams {
                alpha: 0.9,
                gamma: 0.1,
                xi_safety: 25.0,
                xi_max: 50.0,
            }],
            horizon: 1,
        };
        let belief = AgentBelief::with_constant_demand(params, &[10.0]).unwrap();
        let x = DVector::from_column_slice(&[30.0, 0.0, 0.0]);
        let game = build_condensed_game(&belief, &x).unwrap();
        assert_eq!(game.h, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.4]));
        assert_eq!(game.f, DVector::from_column_slice(&[1.0, -10.0]));
        // the tracking constant is the day-0 deviation
        assert_relative_eq!(game.costs[0].constant, 0.1 * 25.0, epsilon = 1e-12);
    }

    #[test]
    fn table1_game_dimensions() {
        let belief = AgentBelief::with_constant_demand(table1(), &[10.0; 3]).unwrap();
        let game = build_condensed_game(&belief, &table1_state()).unwrap();
        assert_eq!(game.h.shape(), (135, 135));
        assert_eq!(game.g_mat.nrows(), 135 + 90 + 30);
        // capacity rows: one per stage and supplier, each summing the orders
        // of all three agents
        let idx = game.index;
        for k in 0..15 {
            for s in 0..2 {
                let row = game.g_mat.row(idx.capacity_row(k, s));
                let sum: f64 = row.iter().sum();
                assert_eq!(sum, 3.0);
                assert_eq!(game.g_vec[idx.capacity_row(k, s)], 40.0);
            }
        }
    }

    #[test]
    fn capacity_rhs_tiles_supply_caps() {
        let mut params = table1();
        params.suppliers[0].o_max = 17.0;
        params.suppliers[1].o_max = 23.0;
        let belief = AgentBelief::with_constant_demand(params, &[10.0; 3]).unwrap();
        let game = build_condensed_game(&belief, &table1_state()).unwrap();
        let idx = game.index;
        for k in 0..15 {
            assert_eq!(game.g_vec[idx.capacity_row(k, 0)], 17.0);
            assert_eq!(game.g_vec[idx.capacity_row(k, 1)], 23.0);
        }
    }

    #[test]
    fn pseudo_gradient_at_origin_is_f() {
        let belief = AgentBelief::with_constant_demand(table1(), &[10.0; 3]).unwrap();
        let game = build_condensed_game(&belief, &table1_state()).unwrap();
        let u = DVector::zeros(game.index.input_dim());
        assert_eq!(game.pseudo_gradient(&u).unwrap(), game.f);
    }

    #[test]
    fn pseudo_gradient_rejects_wrong_dimension() {
        let belief = AgentBelief::with_constant_demand(table1(), &[10.0; 3]).unwrap();
        let game = build_condensed_game(&belief, &table1_state()).unwrap();
        assert!(game.pseudo_gradient(&DVector::zeros(5)).is_err());
    }

    #[test]
    fn single_agent_h_is_symmetric_qp_gradient() {
        let params = ChainParameters {
            market: MarketParams::new(DMatrix::from_row_slice(1, 1, &[0.7])),
            suppliers: vec![SupplierParams { rho0: 1.0, rho1: 0.1, o_max: 40.0 }],
            manufacturers: vec![ManufacturerParams {
                alpha: 0.9,
                gamma: 0.1,
                xi_safety: 25.0,
                xi_max: 50.0,
            }],
            horizon: 6,
        };
        let belief = AgentBelief::with_constant_demand(params, &[10.0]).unwrap();
        let x = DVector::from_column_slice(&[30.0, 0.0, 0.0]);
        let game = build_condensed_game(&belief, &x).unwrap();
        let asym = (&game.h - game.h.transpose()).amax();
        assert!(asym < 1e-12, "single-agent H must be symmetric, asym = {asym}");
        assert_eq!(game.h, game.costs[0].hessian);
        assert_eq!(game.f, game.costs[0].linear);
    }

    #[test]
    fn multi_agent_h_is_asymmetric() {
        let belief = AgentBelief::with_constant_demand(table1(), &[10.0; 3]).unwrap();
        let game = build_condensed_game(&belief, &table1_state()).unwrap();
        assert!((&game.h - game.h.transpose()).amax() > 1e-6);
        assert!(game.own_blocks_convex(1e-8));
    }

    #[test]
    fn negative_rho1_is_rejected_at_build_time() {
        let mut params = table1();
        params.suppliers[1].rho1 = -0.05;
        let belief = AgentBelief::with_constant_demand(params, &[10.0; 3]).unwrap();
        let err = build_condensed_game(&belief, &table1_state()).unwrap_err();
        assert!(matches!(err, GameError::ConvexityViolation { index: 1, .. }));
        assert!(err.to_string().contains("convexity requirement"));
    }

    #[test]
    fn stage0_selector_round_trips() {
        let belief = AgentBelief::with_constant_demand(table1(), &[10.0; 3]).unwrap();
        let game = build_condensed_game(&belief, &table1_state()).unwrap();
        let idx = game.index;
        let u = DVector::from_fn(idx.input_dim(), |i, _| i as f64 * 0.25);
        for v in 0..3 {
            let action = game.stage0_action(v, &u);
            for s in 0..2 {
                assert_eq!(action.orders[s], u[idx.order_index(v, 0, s)]);
            }
            assert_eq!(action.price, u[idx.price_index(v, 0)]);
        }
    }

    #[test]
    fn inventory_plan_starts_at_measured_state() {
        let belief = AgentBelief::with_constant_demand(table1(), &[10.0; 3]).unwrap();
        let game = build_condensed_game(&belief, &table1_state()).unwrap();
        let u = DVector::from_element(game.index.input_dim(), 1.0);
        for v in 0..3 {
            let plan = game.inventory_plan(v, &u);
            assert_eq!(plan.len(), 16);
            assert_eq!(plan[0], 30.0);
        }
    }
}
