//! Receding-horizon game policy and the closed-loop chain model.
//!
//! Every day each manufacturer condenses the horizon game from its own
//! belief at the measured global state, solves for a variational
//! equilibrium, and applies the stage-0 block of its own plan. The true
//! chain then advances under the applied joint action and the realized
//! base demand. Beliefs influence the trajectory only through the actions.

use crate::avi::{
    check_regularity, kkt_residual, solve, AviSolution, KktResidual, RegularityReport, SolveStatus,
    SolverSettings,
};
use crate::chain::{
    build_global_lti, demand, net_cash_flow, stage_cost, AgentAction, AgentState, ChainParameters,
    ModelError, STATE_DIM,
};
use crate::game::{build_condensed_game, AgentBelief, GameError, GameIndex};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PolicyError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("{0}")]
    InvalidConfig(String),
}

/// How an agent extrapolates the base demand it has observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForecastMode {
    /// The agent knows the future realized base demand over its horizon.
    Perfect,
    /// The agent assumes the currently observed base demand persists.
    Persistence,
}

/// Where an agent takes the supply caps of its planning game from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapObservation {
    /// The caps currently in force are observed and assumed to persist.
    Current,
    /// The agent trusts its private capacity estimates.
    Belief,
}

/// Per-day solver diagnostics of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveDiagnostics {
    pub status: SolveStatus,
    pub iterations: usize,
    pub residual: f64,
    pub kkt: KktResidual,
    /// The equilibrium solve failed and a fallback action was applied.
    pub fallback: bool,
    pub regularity: Option<RegularityReport>,
}

/// One manufacturer's receding-horizon policy: private belief, forecast
/// mode, solver settings, and the warm-start cache carried between days.
#[derive(Debug, Clone)]
pub struct AgentPolicy {
    pub agent: usize,
    pub belief: ChainParameters,
    pub forecast_mode: ForecastMode,
    pub cap_observation: CapObservation,
    pub settings: SolverSettings,
    warm: Option<(DVector<f64>, DVector<f64>)>,
    last_price: f64,
}

/// Everything an agent observes on one day.
pub struct DayObservation<'a> {
    pub day: usize,
    /// Measured global state, all agents' (inventory, delay) blocks.
    pub state: &'a DVector<f64>,
    /// Realized base-demand series (days x agents); rows at or after `day`
    /// are only visible to agents with a perfect forecast.
    pub w_series: &'a DMatrix<f64>,
    /// Supply caps currently in force, observed by all agents.
    pub caps: &'a [f64],
}

/// Outcome of one policy evaluation.
pub struct PolicyStep {
    pub action: AgentAction,
    pub diagnostics: SolveDiagnostics,
    /// The agent's planned own-inventory trajectory over stages 0..=N.
    pub plan: Option<DVector<f64>>,
    /// The full joint equilibrium the agent solved for, when it converged.
    pub joint: Option<DVector<f64>>,
}

impl AgentPolicy {
    pub fn new(
        agent: usize,
        belief: ChainParameters,
        forecast_mode: ForecastMode,
        settings: SolverSettings,
    ) -> Self {
        Self {
            agent,
            belief,
            forecast_mode,
            cap_observation: CapObservation::Current,
            settings,
            warm: None,
            last_price: 0.0,
        }
    }

    /// Forecast matrix (n_m x N) for all agents as of `day`.
    pub fn forecasts(&self, w_series: &DMatrix<f64>, day: usize) -> DMatrix<f64> {
        let n_m = self.belief.n_m();
        let horizon = self.belief.horizon;
        let last = w_series.nrows() - 1;
        DMatrix::from_fn(n_m, horizon, |j, k| match self.forecast_mode {
            ForecastMode::Perfect => w_series[((day + k).min(last), j)],
            ForecastMode::Persistence => w_series[(day.min(last), j)],
        })
    }

    /// Builds the agent's private game at the measured state, solves it, and
    /// extracts the stage-0 action. On solver failure the shifted previous
    /// plan (or a neutral action) is applied and the day is flagged.
    pub fn policy_step(
        &mut self,
        obs: &DayObservation<'_>,
        record_plan: bool,
        regularity: bool,
    ) -> Result<PolicyStep, PolicyError> {
        let mut params = self.belief.clone();
        if self.cap_observation == CapObservation::Current {
            for (s, cap) in obs.caps.iter().enumerate() {
                params.suppliers[s].o_max = *cap;
            }
        }
        let forecasts = self.forecasts(obs.w_series, obs.day);
        let belief = AgentBelief::new(params, forecasts)?;
        let game = build_condensed_game(&belief, obs.state)?;
        let problem = game.avi_problem();

        // two warm-start candidates: the plan shifted one stage (tracks a
        // moving trajectory) and the raw previous plan (exact once the loop
        // reaches the turnpike, where plans are time-invariant); seed the
        // solver with whichever fits the new KKT system better
        let shifted = self.warm.as_ref().map(|(u, l)| shift_pair(u, l, &game.index));
        let warm = match (&self.warm, &shifted) {
            (Some(raw), Some(shifted)) => {
                let r_raw = kkt_residual(&problem, &raw.0, &raw.1).max();
                let r_shifted = kkt_residual(&problem, &shifted.0, &shifted.1).max();
                if r_raw < r_shifted {
                    Some(raw)
                } else {
                    Some(shifted)
                }
            }
            _ => None,
        };
        let solution = solve(&problem, &self.settings, warm.map(|(u, l)| (u, l)));

        let report = if regularity && solution.status == SolveStatus::Converged {
            Some(check_regularity(&problem, &solution, self.settings.tol.sqrt()))
        } else {
            None
        };

        let converged = solution.status == SolveStatus::Converged;
        let (action, plan, joint) = if converged {
            let mut action = game.stage0_action(self.agent, &solution.u);
            clip_nonnegative(&mut action);
            let plan = record_plan.then(|| game.inventory_plan(self.agent, &solution.u));
            self.warm = Some((solution.u.clone(), solution.lambda.clone()));
            self.last_price = action.price;
            (action, plan, Some(solution.u.clone()))
        } else {
            // fallback: stage 0 of the shifted previous plan, else stand still
            let action = match &shifted {
                Some((u, _)) => {
                    let mut a = game.stage0_action(self.agent, u);
                    clip_nonnegative(&mut a);
                    a
                }
                None => AgentAction::new(DVector::zeros(self.belief.n_s()), self.last_price),
            };
            // keep the cache sliding so later fallbacks stay time-aligned
            self.warm = shifted;
            self.last_price = action.price;
            (action, None, None)
        };

        Ok(PolicyStep {
            action,
            diagnostics: SolveDiagnostics {
                status: solution.status,
                iterations: solution.iterations,
                residual: solution.residual,
                kkt: solution.kkt,
                fallback: !converged,
                regularity: report,
            },
            plan,
            joint,
        })
    }
}

fn clip_nonnegative(action: &mut AgentAction) {
    for o in action.orders.iter_mut() {
        if *o < 0.0 {
            *o = 0.0;
        }
    }
    if action.price < 0.0 {
        action.price = 0.0;
    }
}

/// Shifts a previous solution one stage forward, duplicating the last stage,
/// for use as the next day's warm start.
pub fn shift_warm_start(previous: &AviSolution, index: &GameIndex) -> (DVector<f64>, DVector<f64>) {
    shift_pair(&previous.u, &previous.lambda, index)
}

fn shift_pair(
    u: &DVector<f64>,
    lambda: &DVector<f64>,
    index: &GameIndex,
) -> (DVector<f64>, DVector<f64>) {
    let n = index.horizon;
    let act = index.action_dim();
    let mut u_next = u.clone();
    for v in 0..index.n_m {
        for k in 0..n {
            let src = index.stage_offset(v, (k + 1).min(n - 1));
            let dst = index.stage_offset(v, k);
            for c in 0..act {
                u_next[dst + c] = u[src + c];
            }
        }
    }
    let mut l_next = lambda.clone();
    // input bound rows share the layout of u
    for v in 0..index.n_m {
        for k in 0..n {
            let src = index.stage_offset(v, (k + 1).min(n - 1));
            let dst = index.stage_offset(v, k);
            for c in 0..act {
                l_next[dst + c] = lambda[src + c];
            }
        }
        for k in 1..=n {
            let src_k = (k + 1).min(n);
            for upper in [true, false] {
                l_next[index.inventory_row(v, k, upper)] =
                    lambda[index.inventory_row(v, src_k, upper)];
            }
        }
    }
    for k in 0..n {
        let src_k = (k + 1).min(n - 1);
        for s in 0..index.n_s {
            l_next[index.capacity_row(k, s)] = lambda[index.capacity_row(src_k, s)];
        }
    }
    for l in l_next.iter_mut() {
        if *l < 0.0 {
            *l = 0.0;
        }
    }
    (u_next, l_next)
}

/// Closed-loop simulation setup: the true chain, one policy per
/// manufacturer, the realized base-demand series, per-day supply caps, and
/// the initial state.
#[derive(Debug, Clone)]
pub struct ClosedLoopConfig {
    pub true_params: ChainParameters,
    pub policies: Vec<AgentPolicy>,
    /// Realized base demand, days x agents.
    pub w_true: DMatrix<f64>,
    /// Supply caps in force, days x suppliers.
    pub cap_series: DMatrix<f64>,
    pub x0: Vec<AgentState>,
    pub record_plans: bool,
    pub check_regularity: bool,
}

impl ClosedLoopConfig {
    pub fn days(&self) -> usize {
        self.w_true.nrows()
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        self.true_params.validate()?;
        let n_m = self.true_params.n_m();
        let n_s = self.true_params.n_s();
        if self.w_true.nrows() == 0 {
            return Err(PolicyError::InvalidConfig("simulation length must be >= 1".into()));
        }
        if self.w_true.ncols() != n_m {
            return Err(PolicyError::InvalidConfig(format!(
                "base-demand series has {} columns, chain has {} manufacturers",
                self.w_true.ncols(),
                n_m
            )));
        }
        if self.cap_series.nrows() != self.w_true.nrows() || self.cap_series.ncols() != n_s {
            return Err(PolicyError::InvalidConfig("supply-cap series shape mismatch".into()));
        }
        if self.policies.len() != n_m {
            return Err(PolicyError::InvalidConfig(format!(
                "{} policies for {} manufacturers",
                self.policies.len(),
                n_m
            )));
        }
        for (v, p) in self.policies.iter().enumerate() {
            if p.agent != v {
                return Err(PolicyError::InvalidConfig(format!(
                    "policy {v} is configured for agent {}",
                    p.agent
                )));
            }
            if p.belief.n_m() != n_m || p.belief.n_s() != n_s {
                return Err(PolicyError::InvalidConfig(format!(
                    "agent {v} belief dimensions differ from the true chain"
                )));
            }
        }
        if self.x0.len() != n_m {
            return Err(PolicyError::InvalidConfig("one initial state per manufacturer".into()));
        }
        for (v, s) in self.x0.iter().enumerate() {
            let xi_max = self.true_params.manufacturers[v].xi_max;
            if !(0.0..=xi_max).contains(&s.xi) {
                return Err(PolicyError::InvalidConfig(format!(
                    "x0[{v}].xi = {} outside [0, {xi_max}]",
                    s.xi
                )));
            }
        }
        Ok(())
    }
}

/// One day of the closed loop, everything measured on the true chain.
#[derive(Debug, Clone, PartialEq)]
pub struct DayRecord {
    pub day: usize,
    /// States at the start of the day, before the update.
    pub states: Vec<AgentState>,
    /// Applied actions, after any rationing.
    pub actions: Vec<AgentAction>,
    pub realized_demand: Vec<f64>,
    pub wholesale_prices: Vec<f64>,
    pub aggregate_orders: Vec<f64>,
    pub stage_costs: Vec<f64>,
    pub net_cash_flows: Vec<f64>,
    pub base_demand: Vec<f64>,
    /// Per supplier: applied orders were scaled down to the capacity.
    pub rationed: Vec<bool>,
    pub diagnostics: Vec<SolveDiagnostics>,
    /// Per agent planned inventory trajectories, when recorded.
    pub plans: Option<Vec<DVector<f64>>>,
}

/// Full closed-loop record over the simulation length.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTrace {
    pub n_m: usize,
    pub n_s: usize,
    pub days: Vec<DayRecord>,
}

impl ScenarioTrace {
    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }
}

/// Runs the closed loop: every agent plans from the same measured state with
/// its own belief, the true chain applies the joint action (rationed to
/// physical supply capacity if beliefs disagree) and advances one day.
pub fn closed_loop_run(mut config: ClosedLoopConfig) -> Result<ScenarioTrace, PolicyError> {
    config.validate()?;
    let chain = config.true_params.clone();
    let n_m = chain.n_m();
    let n_s = chain.n_s();
    let global = build_global_lti(&chain)?;
    let days = config.days();

    let mut x = DVector::zeros(STATE_DIM * n_m);
    for (v, s) in config.x0.iter().enumerate() {
        x.rows_mut(STATE_DIM * v, STATE_DIM).copy_from(&s.to_vector());
    }

    let mut trace = ScenarioTrace { n_m, n_s, days: Vec::with_capacity(days) };

    for t in 0..days {
        let caps: Vec<f64> = (0..n_s).map(|s| config.cap_series[(t, s)]).collect();
        let obs = DayObservation { day: t, state: &x, w_series: &config.w_true, caps: &caps };

        let mut actions = Vec::with_capacity(n_m);
        let mut diagnostics = Vec::with_capacity(n_m);
        let mut plans = config.record_plans.then(Vec::new);
        for policy in config.policies.iter_mut() {
            let step = policy.policy_step(&obs, config.record_plans, config.check_regularity)?;
            actions.push(step.action);
            diagnostics.push(step.diagnostics);
            if let Some(plans) = plans.as_mut() {
                plans.push(step.plan.unwrap_or_else(|| DVector::zeros(0)));
            }
        }

        // physical rationing: a supplier cannot ship beyond its capacity
        let mut rationed = vec![false; n_s];
        let mut aggregate = vec![0.0; n_s];
        for s in 0..n_s {
            let total: f64 = actions.iter().map(|a| a.orders[s]).sum();
            if total > caps[s] * (1.0 + 1e-9) + 1e-12 {
                let scale = caps[s] / total;
                for a in actions.iter_mut() {
                    a.orders[s] *= scale;
                }
                rationed[s] = true;
            }
            aggregate[s] = actions.iter().map(|a| a.orders[s]).sum();
        }

        let w_row: Vec<f64> = (0..n_m).map(|j| config.w_true[(t, j)]).collect();
        let prices: Vec<f64> = actions.iter().map(|a| a.price).collect();
        let states: Vec<AgentState> = (0..n_m)
            .map(|v| AgentState::from_slice(x.rows(STATE_DIM * v, STATE_DIM).as_slice()))
            .collect();

        let mut realized = Vec::with_capacity(n_m);
        let mut cash = Vec::with_capacity(n_m);
        let mut costs = Vec::with_capacity(n_m);
        for v in 0..n_m {
            realized.push(demand(&chain.market, v, &prices, w_row[v])?);
            cash.push(net_cash_flow(&chain, v, &actions, w_row[v])?);
            costs.push(stage_cost(&chain, v, &states[v], &actions, w_row[v])?);
        }
        let wholesale: Vec<f64> = (0..n_s)
            .map(|s| crate::chain::wholesale_price(&chain.suppliers[s], aggregate[s]))
            .collect();

        let mut u = DVector::zeros((n_s + 1) * n_m);
        for (v, a) in actions.iter().enumerate() {
            u.rows_mut((n_s + 1) * v, n_s + 1).copy_from(&a.to_vector());
        }
        let w_vec = DVector::from_column_slice(&w_row);
        let x_next = global.step(&x, &u, &w_vec);

        trace.days.push(DayRecord {
            day: t,
            states,
            actions,
            realized_demand: realized,
            wholesale_prices: wholesale,
            aggregate_orders: aggregate,
            stage_costs: costs,
            net_cash_flows: cash,
            base_demand: w_row,
            rationed,
            diagnostics,
            plans,
        });
        x = x_next;
    }

    Ok(trace)
}
