//! Physical and economic primitives of the supply chain.
//!
//! A chain consists of `n_s` suppliers selling a single raw material to
//! `n_m` manufacturers that produce, store, and price a finished product
//! for a common market. Demand is linear in all posted prices, wholesale
//! prices are affine in aggregate orders, and each manufacturer's
//! inventory follows a decay-plus-flow balance with a one-day production
//! and shipping delay. Augmenting the inventory with the delayed
//! production and demand gives each manufacturer a three-state LTI
//! realization; stacking those gives the global chain dynamics.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Per-agent state dimension: (inventory, previous production, previous demand).
pub const STATE_DIM: usize = 3;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("{what}: expected length {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("agent index {index} out of range (chain has {count} manufacturers)")]
    InvalidAgent { index: usize, count: usize },
    #[error("supplier index {index} out of range (chain has {count} suppliers)")]
    InvalidSupplier { index: usize, count: usize },
    #[error("{field}: {message}")]
    InvalidParameter { field: String, message: String },
}

fn param_err(field: impl Into<String>, message: impl Into<String>) -> ModelError {
    ModelError::InvalidParameter {
        field: field.into(),
        message: message.into(),
    }
}

/// Market-side demand model: row `v` of `beta` holds the price sensitivities
/// of manufacturer `v`'s demand (own-price on the diagonal, cross-price off it).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    pub beta: DMatrix<f64>,
}

impl MarketParams {
    pub fn new(beta: DMatrix<f64>) -> Self {
        Self { beta }
    }

    pub fn n_m(&self) -> usize {
        self.beta.nrows()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.beta.nrows() != self.beta.ncols() {
            return Err(param_err("market.beta", "must be a square n_m x n_m matrix"));
        }
        for v in 0..self.n_m() {
            for j in 0..self.n_m() {
                let b = self.beta[(v, j)];
                if !b.is_finite() || b < 0.0 {
                    return Err(param_err(
                        format!("market.beta[{}][{}]", v + 1, j + 1),
                        format!("must be finite and >= 0 (got {b})"),
                    ));
                }
            }
            if self.beta[(v, v)] <= 0.0 {
                return Err(param_err(
                    format!("market.beta[{v}][{v}]", v = v + 1),
                    "own-price coefficient must be > 0",
                ));
            }
        }
        Ok(())
    }
}

/// One supplier's wholesale price curve and daily capacity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupplierParams {
    /// Base price charged at zero aggregate orders.
    pub rho0: f64,
    /// Price slope in aggregate daily orders. Must be >= 0 for the
    /// game to stay convex in each agent's own decision; negative values
    /// pass type validation but are rejected when a game is built.
    pub rho1: f64,
    /// Maximum units the supplier can ship per day.
    pub o_max: f64,
}

impl SupplierParams {
    pub fn validate(&self, s: usize) -> Result<(), ModelError> {
        if !self.rho0.is_finite() || self.rho0 < 0.0 {
            return Err(param_err(
                format!("suppliers[{}].rho0", s + 1),
                format!("must be finite and >= 0 (got {})", self.rho0),
            ));
        }
        if !self.rho1.is_finite() {
            return Err(param_err(format!("suppliers[{}].rho1", s + 1), "must be finite"));
        }
        if !self.o_max.is_finite() || self.o_max <= 0.0 {
            return Err(param_err(
                format!("suppliers[{}].o_max", s + 1),
                format!("must be > 0 (got {})", self.o_max),
            ));
        }
        Ok(())
    }
}

/// One manufacturer's inventory dynamics and stage-cost weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManufacturerParams {
    /// Inventory decay per day; 1 means non-perishable.
    pub alpha: f64,
    /// Weight on squared deviation from the safety stock.
    pub gamma: f64,
    /// Safety (reference) inventory level.
    pub xi_safety: f64,
    /// Inventory capacity.
    pub xi_max: f64,
}

impl ManufacturerParams {
    pub fn validate(&self, v: usize) -> Result<(), ModelError> {
        let name = |f: &str| format!("manufacturers[{}].{f}", v + 1);
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(param_err(name("alpha"), format!("must be in (0, 1] (got {})", self.alpha)));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(param_err(name("gamma"), format!("must be > 0 (got {})", self.gamma)));
        }
        if !self.xi_max.is_finite() || self.xi_max <= 0.0 {
            return Err(param_err(name("xi_max"), format!("must be > 0 (got {})", self.xi_max)));
        }
        if !(0.0..=self.xi_max).contains(&self.xi_safety) {
            return Err(param_err(
                name("xi_safety"),
                format!("must lie in [0, xi_max] (got {})", self.xi_safety),
            ));
        }
        Ok(())
    }
}

/// Full parameter tuple of the chain plus the planning horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainParameters {
    pub market: MarketParams,
    pub suppliers: Vec<SupplierParams>,
    pub manufacturers: Vec<ManufacturerParams>,
    pub horizon: usize,
}

impl ChainParameters {
    pub fn n_m(&self) -> usize {
        self.manufacturers.len()
    }

    pub fn n_s(&self) -> usize {
        self.suppliers.len()
    }

    /// Per-agent, per-stage decision dimension: one order per supplier plus the price.
    pub fn action_dim(&self) -> usize {
        self.n_s() + 1
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.market.validate()?;
        if self.market.n_m() != self.manufacturers.len() {
            return Err(ModelError::DimensionMismatch {
                what: "market.beta rows vs manufacturers",
                expected: self.manufacturers.len(),
                got: self.market.n_m(),
            });
        }
        if self.manufacturers.is_empty() {
            return Err(param_err("manufacturers", "at least one manufacturer required"));
        }
        if self.suppliers.is_empty() {
            return Err(param_err("suppliers", "at least one supplier required"));
        }
        for (s, sup) in self.suppliers.iter().enumerate() {
            sup.validate(s)?;
        }
        for (v, man) in self.manufacturers.iter().enumerate() {
            man.validate(v)?;
        }
        if self.horizon == 0 {
            return Err(param_err("horizon", "must be >= 1"));
        }
        Ok(())
    }
}

/// Measured state of one manufacturer: inventory plus the one-step
/// production and demand delay states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub xi: f64,
    pub o_prev: f64,
    pub d_prev: f64,
}

impl AgentState {
    pub fn new(xi: f64, o_prev: f64, d_prev: f64) -> Self {
        Self { xi, o_prev, d_prev }
    }

    pub fn to_vector(self) -> DVector<f64> {
        DVector::from_column_slice(&[self.xi, self.o_prev, self.d_prev])
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self::new(x[0], x[1], x[2])
    }
}

/// One manufacturer's daily decision: orders per supplier and the posted price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentAction {
    pub orders: DVector<f64>,
    pub price: f64,
}

impl AgentAction {
    pub fn new(orders: DVector<f64>, price: f64) -> Self {
        Self { orders, price }
    }

    pub fn zeros(n_s: usize) -> Self {
        Self::new(DVector::zeros(n_s), 0.0)
    }

    /// Total production implied by the orders.
    pub fn production(&self) -> f64 {
        self.orders.iter().sum()
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let mut u = DVector::zeros(self.orders.len() + 1);
        u.rows_mut(0, self.orders.len()).copy_from(&self.orders);
        u[self.orders.len()] = self.price;
        u
    }

    pub fn from_slice(u: &[f64]) -> Self {
        let (orders, price) = u.split_at(u.len() - 1);
        Self::new(DVector::from_column_slice(orders), price[0])
    }
}

/// LTI realization of one manufacturer's augmented dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentLti {
    pub a: DMatrix<f64>,
    pub b_self: DMatrix<f64>,
    pub b_cross: BTreeMap<usize, DMatrix<f64>>,
    pub d: DVector<f64>,
}

impl AgentLti {
    /// Input block of agent `j` as seen by this agent's dynamics.
    pub fn b_block(&self, own: usize, j: usize) -> &DMatrix<f64> {
        if j == own {
            &self.b_self
        } else {
            &self.b_cross[&j]
        }
    }
}

/// Stacked LTI realization of the whole chain.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalLti {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl GlobalLti {
    /// One day of the global dynamics.
    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u + &self.d * w
    }
}

/// Linear market demand for manufacturer `v` given all posted prices and
/// its base demand. Not clipped at zero; negative values are a scenario
/// diagnostic, not a model error.
pub fn demand(market: &MarketParams, v: usize, prices: &[f64], w_v: f64) -> Result<f64, ModelError> {
    let n_m = market.n_m();
    if prices.len() != n_m {
        return Err(ModelError::DimensionMismatch {
            what: "prices",
            expected: n_m,
            got: prices.len(),
        });
    }
    if v >= n_m {
        return Err(ModelError::InvalidAgent { index: v, count: n_m });
    }
    // Accumulation order mirrors the LTI demand row (price terms in agent
    // order, base demand last) so direct and matrix simulation agree exactly.
    let mut d = 0.0;
    for j in 0..n_m {
        let coef = if j == v { -market.beta[(v, v)] } else { market.beta[(v, j)] };
        d += coef * prices[j];
    }
    d += w_v;
    Ok(d)
}

/// Wholesale price charged by one supplier at the given aggregate daily orders.
pub fn wholesale_price(supplier: &SupplierParams, total_orders: f64) -> f64 {
    supplier.rho0 + supplier.rho1 * total_orders
}

/// Raw inventory balance: decay plus delayed production minus delayed demand.
/// Constraint satisfaction is the policy's job, not this map's.
pub fn step_inventory(params: &ManufacturerParams, state: &AgentState) -> f64 {
    params.alpha * state.xi + state.o_prev - state.d_prev
}

/// Net cash flow of manufacturer `v` for one day: sales revenue minus raw
/// material cost, with wholesale prices set by aggregate orders.
pub fn net_cash_flow(
    chain: &ChainParameters,
    v: usize,
    actions: &[AgentAction],
    w_v: f64,
) -> Result<f64, ModelError> {
    let n_m = chain.n_m();
    if actions.len() != n_m {
        return Err(ModelError::DimensionMismatch {
            what: "actions",
            expected: n_m,
            got: actions.len(),
        });
    }
    let prices: Vec<f64> = actions.iter().map(|a| a.price).collect();
    let d_v = demand(&chain.market, v, &prices, w_v)?;
    let mut material_cost = 0.0;
    for (s, supplier) in chain.suppliers.iter().enumerate() {
        let total: f64 = actions.iter().map(|a| a.orders[s]).sum();
        material_cost += wholesale_price(supplier, total) * actions[v].orders[s];
    }
    Ok(actions[v].price * d_v - material_cost)
}

/// Stage cost of manufacturer `v`: squared deviation from the safety stock
/// minus the net cash flow.
pub fn stage_cost(
    chain: &ChainParameters,
    v: usize,
    state: &AgentState,
    actions: &[AgentAction],
    w_v: f64,
) -> Result<f64, ModelError> {
    let man = chain
        .manufacturers
        .get(v)
        .ok_or(ModelError::InvalidAgent { index: v, count: chain.n_m() })?;
    let dev = state.xi - man.xi_safety;
    Ok(man.gamma * dev * dev - net_cash_flow(chain, v, actions, w_v)?)
}

/// Closed-form LTI blocks of manufacturer `v`'s augmented dynamics.
pub fn build_agent_lti(chain: &ChainParameters, v: usize) -> Result<AgentLti, ModelError> {
    let n_m = chain.n_m();
    let n_s = chain.n_s();
    if v >= n_m {
        return Err(ModelError::InvalidAgent { index: v, count: n_m });
    }
    let man = &chain.manufacturers[v];

    let mut a = DMatrix::zeros(STATE_DIM, STATE_DIM);
    a[(0, 0)] = man.alpha;
    a[(0, 1)] = 1.0;
    a[(0, 2)] = -1.0;

    let mut b_self = DMatrix::zeros(STATE_DIM, n_s + 1);
    for s in 0..n_s {
        b_self[(1, s)] = 1.0;
    }
    b_self[(2, n_s)] = -chain.market.beta[(v, v)];

    let mut b_cross = BTreeMap::new();
    for j in 0..n_m {
        if j == v {
            continue;
        }
        let mut b = DMatrix::zeros(STATE_DIM, n_s + 1);
        b[(2, n_s)] = chain.market.beta[(v, j)];
        b_cross.insert(j, b);
    }

    let d = DVector::from_column_slice(&[0.0, 0.0, 1.0]);
    Ok(AgentLti { a, b_self, b_cross, d })
}

/// Global chain dynamics assembled from every agent's blocks.
pub fn build_global_lti(chain: &ChainParameters) -> Result<GlobalLti, ModelError> {
    let n_m = chain.n_m();
    let n_s = chain.n_s();
    let nx = STATE_DIM * n_m;
    let nu = (n_s + 1) * n_m;

    let mut a = DMatrix::zeros(nx, nx);
    let mut b = DMatrix::zeros(nx, nu);
    let mut d = DMatrix::zeros(nx, n_m);
    for v in 0..n_m {
        let lti = build_agent_lti(chain, v)?;
        a.view_mut((STATE_DIM * v, STATE_DIM * v), (STATE_DIM, STATE_DIM))
            .copy_from(&lti.a);
        for j in 0..n_m {
            b.view_mut((STATE_DIM * v, (n_s + 1) * j), (STATE_DIM, n_s + 1))
                .copy_from(lti.b_block(v, j));
        }
        d.view_mut((STATE_DIM * v, v), (STATE_DIM, 1)).copy_from(&lti.d);
    }
    Ok(GlobalLti { a, b, d })
}
