//! Scenario programs over the closed loop.
//!
//! A scenario is a chain, a simulation length, a base-demand level, and a
//! set of timed mutations (demand multipliers, supply-cap reductions)
//! together with per-agent information settings (forecast mode, belief
//! perturbations). Running one produces a full trace plus summary metrics;
//! dedicated drivers cover the forecast-asymmetry comparison, the
//! coupling-misestimation sweep, and the turnpike diagnostic.

use crate::avi::SolverSettings;
use crate::chain::{AgentState, ChainParameters};
use crate::policy::{
    closed_loop_run, AgentPolicy, ClosedLoopConfig, ForecastMode, PolicyError, ScenarioTrace,
};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ScenarioError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("{0}")]
    InvalidScenario(String),
    #[error("trace has no recorded open-loop plans; rerun with record_plans enabled")]
    PlansMissing,
}

/// Multiplies the base demand of a set of agents over a day interval
/// (inclusive on both ends).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandEvent {
    pub agents: Vec<usize>,
    pub factor: f64,
    pub start_day: usize,
    pub end_day: usize,
}

/// Scales one supplier's capacity over a day interval (inclusive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupplyEvent {
    pub supplier: usize,
    pub factor: f64,
    pub start_day: usize,
    pub end_day: usize,
}

/// Scales one entry of an agent's believed demand-coefficient matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefScale {
    pub agent: usize,
    pub beta_row: usize,
    pub beta_col: usize,
    pub factor: f64,
}

/// A reproducible closed-loop experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub chain: ChainParameters,
    pub days: usize,
    /// Nominal base demand per agent; events multiply it.
    pub base_demand: Vec<f64>,
    pub x0: Vec<AgentState>,
    pub demand_events: Vec<DemandEvent>,
    pub supply_events: Vec<SupplyEvent>,
    pub forecast: Vec<ForecastMode>,
    pub belief_scales: Vec<BeliefScale>,
    pub settings: SolverSettings,
    pub record_plans: bool,
    pub check_regularity: bool,
}

impl Scenario {
    /// Baseline scenario skeleton: no events, persistence forecasts.
    pub fn new(name: impl Into<String>, chain: ChainParameters, days: usize, w: f64) -> Self {
        let n_m = chain.n_m();
        Self {
            name: name.into(),
            base_demand: vec![w; n_m],
            x0: vec![AgentState::new(30.0, 0.0, 0.0); n_m],
            forecast: vec![ForecastMode::Persistence; n_m],
            demand_events: Vec::new(),
            supply_events: Vec::new(),
            belief_scales: Vec::new(),
            settings: SolverSettings::default(),
            record_plans: false,
            check_regularity: false,
            chain,
            days,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let n_m = self.chain.n_m();
        let n_s = self.chain.n_s();
        if self.days == 0 {
            return Err(ScenarioError::InvalidScenario("days must be >= 1".into()));
        }
        if self.base_demand.len() != n_m {
            return Err(ScenarioError::InvalidScenario(
                "base_demand: one entry per manufacturer".into(),
            ));
        }
        if self.forecast.len() != n_m {
            return Err(ScenarioError::InvalidScenario(
                "forecast: one mode per manufacturer".into(),
            ));
        }
        for e in &self.demand_events {
            if e.start_day > e.end_day || e.end_day >= self.days {
                return Err(ScenarioError::InvalidScenario(format!(
                    "demand event interval [{}, {}] outside [0, {})",
                    e.start_day, e.end_day, self.days
                )));
            }
            if !(e.factor > 0.0) {
                return Err(ScenarioError::InvalidScenario("demand factor must be > 0".into()));
            }
            if e.agents.iter().any(|&v| v >= n_m) {
                return Err(ScenarioError::InvalidScenario("demand event agent out of range".into()));
            }
        }
        for e in &self.supply_events {
            if e.start_day > e.end_day || e.end_day >= self.days {
                return Err(ScenarioError::InvalidScenario(format!(
                    "supply event interval [{}, {}] outside [0, {})",
                    e.start_day, e.end_day, self.days
                )));
            }
            if !(e.factor > 0.0 && e.factor <= 1.0) {
                return Err(ScenarioError::InvalidScenario(
                    "supply cap factor must lie in (0, 1]".into(),
                ));
            }
            if e.supplier >= n_s {
                return Err(ScenarioError::InvalidScenario("supply event supplier out of range".into()));
            }
        }
        for b in &self.belief_scales {
            if b.agent >= n_m || b.beta_row >= n_m || b.beta_col >= n_m {
                return Err(ScenarioError::InvalidScenario("belief scale index out of range".into()));
            }
            if !(b.factor > 0.0) {
                return Err(ScenarioError::InvalidScenario("belief scale factor must be > 0".into()));
            }
        }
        Ok(())
    }

    /// Realized base-demand series (days x agents) with events applied.
    pub fn demand_series(&self) -> DMatrix<f64> {
        let n_m = self.chain.n_m();
        let mut w = DMatrix::from_fn(self.days, n_m, |_, j| self.base_demand[j]);
        for e in &self.demand_events {
            for t in e.start_day..=e.end_day {
                for &v in &e.agents {
                    w[(t, v)] *= e.factor;
                }
            }
        }
        w
    }

    /// Supply caps in force per day (days x suppliers) with events applied.
    pub fn cap_series(&self) -> DMatrix<f64> {
        let n_s = self.chain.n_s();
        let mut caps = DMatrix::from_fn(self.days, n_s, |_, s| self.chain.suppliers[s].o_max);
        for e in &self.supply_events {
            for t in e.start_day..=e.end_day {
                caps[(t, e.supplier)] *= e.factor;
            }
        }
        caps
    }

    /// Belief parameters of one agent: the true chain with that agent's
    /// perturbations applied.
    pub fn belief_for(&self, v: usize) -> ChainParameters {
        let mut belief = self.chain.clone();
        for b in &self.belief_scales {
            if b.agent == v {
                belief.market.beta[(b.beta_row, b.beta_col)] *= b.factor;
            }
        }
        belief
    }

    fn closed_loop_config(&self) -> ClosedLoopConfig {
        let policies = (0..self.chain.n_m())
            .map(|v| AgentPolicy::new(v, self.belief_for(v), self.forecast[v], self.settings))
            .collect();
        ClosedLoopConfig {
            true_params: self.chain.clone(),
            policies,
            w_true: self.demand_series(),
            cap_series: self.cap_series(),
            x0: self.x0.clone(),
            record_plans: self.record_plans,
            check_regularity: self.check_regularity,
        }
    }
}

/// Per-agent summary statistics of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentMetrics {
    pub cumulative_net_cash_flow: f64,
    pub mean_price: f64,
    pub max_price: f64,
    pub min_inventory: f64,
    pub max_inventory: f64,
    pub total_orders_per_supplier: Vec<f64>,
    pub rationed_days: usize,
    pub solver_failure_days: usize,
    pub negative_demand_days: usize,
}

/// Deterministic summary of a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub agents: Vec<AgentMetrics>,
}

impl MetricsSummary {
    pub fn from_trace(trace: &ScenarioTrace) -> Self {
        let days = trace.len().max(1) as f64;
        let agents = (0..trace.n_m)
            .map(|v| {
                let mut m = AgentMetrics {
                    cumulative_net_cash_flow: 0.0,
                    mean_price: 0.0,
                    max_price: f64::NEG_INFINITY,
                    min_inventory: f64::INFINITY,
                    max_inventory: f64::NEG_INFINITY,
                    total_orders_per_supplier: vec![0.0; trace.n_s],
                    rationed_days: 0,
                    solver_failure_days: 0,
                    negative_demand_days: 0,
                };
                for day in &trace.days {
                    m.cumulative_net_cash_flow += day.net_cash_flows[v];
                    m.mean_price += day.actions[v].price;
                    m.max_price = m.max_price.max(day.actions[v].price);
                    m.min_inventory = m.min_inventory.min(day.states[v].xi);
                    m.max_inventory = m.max_inventory.max(day.states[v].xi);
                    for s in 0..trace.n_s {
                        m.total_orders_per_supplier[s] += day.actions[v].orders[s];
                    }
                    if day.rationed.iter().any(|&r| r) && day.actions[v].orders.iter().any(|&o| o > 0.0)
                    {
                        m.rationed_days += 1;
                    }
                    if day.diagnostics[v].fallback {
                        m.solver_failure_days += 1;
                    }
                    if day.realized_demand[v] < 0.0 {
                        m.negative_demand_days += 1;
                    }
                }
                m.mean_price /= days;
                m
            })
            .collect();
        Self { agents }
    }

    /// Relative change (in percent) of every agent's cumulative net cash
    /// flow against a baseline summary. Zero against itself.
    pub fn relative_cash_flow_change(&self, baseline: &MetricsSummary) -> Vec<f64> {
        self.agents
            .iter()
            .zip(&baseline.agents)
            .map(|(a, b)| {
                let base = b.cumulative_net_cash_flow;
                if base == a.cumulative_net_cash_flow {
                    0.0
                } else {
                    100.0 * (a.cumulative_net_cash_flow - base) / base.abs()
                }
            })
            .collect()
    }
}

/// Runs one scenario and summarizes it.
pub fn run_scenario(scenario: &Scenario) -> Result<(ScenarioTrace, MetricsSummary), ScenarioError> {
    scenario.validate()?;
    let trace = closed_loop_run(scenario.closed_loop_config())?;
    let metrics = MetricsSummary::from_trace(&trace);
    Ok((trace, metrics))
}

/// Outcome of the demand-forecast information-asymmetry study: the same
/// spike scenario run once with a perfect forecast for the first agent and
/// once with no preview for anyone.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastAsymmetryOutcome {
    /// Case with agent 0 holding a perfect forecast.
    pub with_preview: (ScenarioTrace, MetricsSummary),
    /// Case where every agent extrapolates the current demand.
    pub without_preview: (ScenarioTrace, MetricsSummary),
}

/// Runs the paired forecast-asymmetry cases on a spike scenario. The input
/// scenario defines the chain, events, and settings; forecast modes are
/// overridden per case (everyone else stays on persistence).
pub fn run_forecast_asymmetry(base: &Scenario) -> Result<ForecastAsymmetryOutcome, ScenarioError> {
    let mut with_preview = base.clone();
    with_preview.name = format!("{}_preview", base.name);
    with_preview.forecast = vec![ForecastMode::Persistence; base.chain.n_m()];
    with_preview.forecast[0] = ForecastMode::Perfect;

    let mut without_preview = base.clone();
    without_preview.name = format!("{}_no_preview", base.name);
    without_preview.forecast = vec![ForecastMode::Persistence; base.chain.n_m()];

    Ok(ForecastAsymmetryOutcome {
        with_preview: run_scenario(&with_preview)?,
        without_preview: run_scenario(&without_preview)?,
    })
}

/// Which believed demand coefficient the sweep perturbs (two-manufacturer
/// study): the cross coefficient of the second agent's own demand, or the
/// first agent's own-price coefficient as modeled by the second agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepTarget {
    #[serde(rename = "beta_21")]
    Beta21,
    #[serde(rename = "beta_11")]
    Beta11,
}

impl SweepTarget {
    /// (row, col) of the scaled entry in the believed coefficient matrix.
    pub fn entry(self) -> (usize, usize) {
        match self {
            SweepTarget::Beta21 => (1, 0),
            SweepTarget::Beta11 => (0, 0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub factor: f64,
    /// Relative net-cash-flow change of each agent versus the exact-belief
    /// run, in percent.
    pub delta_pct: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub target: SweepTarget,
    pub rows: Vec<SweepRow>,
}

/// Sweeps the misestimation factor of the second agent's believed demand
/// coefficient on a two-manufacturer chain, reporting relative net-cash-flow
/// changes against the exact-belief baseline.
pub fn run_coupling_sweep(
    base: &Scenario,
    target: SweepTarget,
    factors: &[f64],
) -> Result<SweepTable, ScenarioError> {
    if base.chain.n_m() != 2 {
        return Err(ScenarioError::InvalidScenario(
            "coupling sweep requires a two-manufacturer chain".into(),
        ));
    }
    if factors.iter().any(|&f| !(f > 0.0)) {
        return Err(ScenarioError::InvalidScenario("sweep factors must be > 0".into()));
    }
    let mut baseline = base.clone();
    baseline.belief_scales.clear();
    let (_, baseline_metrics) = run_scenario(&baseline)?;

    let (row, col) = target.entry();
    let mut rows = Vec::with_capacity(factors.len());
    for &factor in factors {
        let mut s = baseline.clone();
        s.name = format!("{}_{:?}_{factor}", base.name, target);
        s.belief_scales.push(BeliefScale { agent: 1, beta_row: row, beta_col: col, factor });
        let (_, metrics) = run_scenario(&s)?;
        rows.push(SweepRow {
            factor,
            delta_pct: metrics.relative_cash_flow_change(&baseline_metrics),
        });
    }
    Ok(SweepTable { target, rows })
}

/// Turnpike diagnosis of one recorded open-loop inventory plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDiagnosis {
    pub day: usize,
    pub agent: usize,
    /// Median of the middle third of the plan.
    pub level: f64,
    /// First stage within tolerance of the level, if any.
    pub entry: Option<usize>,
    /// Last stage within tolerance of the level, if any.
    pub exit: Option<usize>,
    /// Whole middle third stays within tolerance of the level.
    pub middle_within: bool,
}

impl PlanDiagnosis {
    /// A turnpike is detected when the plan reaches the level strictly
    /// after the start, leaves it strictly before the end, and holds it
    /// through the middle third.
    pub fn detected(&self, horizon: usize) -> bool {
        matches!((self.entry, self.exit), (Some(e), Some(x)) if e > 0 && x < horizon)
            && self.middle_within
    }
}

/// Turnpike diagnostics over all recorded plans of a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnpikeReport {
    pub horizon: usize,
    pub eps: f64,
    pub plans: Vec<PlanDiagnosis>,
    /// Fraction of plans whose middle third stays within `eps` of the level.
    pub middle_within_fraction: f64,
}

impl TurnpikeReport {
    pub fn detected_fraction(&self) -> f64 {
        if self.plans.is_empty() {
            return 0.0;
        }
        let hits = self.plans.iter().filter(|p| p.detected(self.horizon)).count();
        hits as f64 / self.plans.len() as f64
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Diagnoses a single inventory plan: the turnpike level is the median of
/// the middle third, entry/exit are the first/last stages within `eps`.
pub fn diagnose_plan(day: usize, agent: usize, plan: &[f64], eps: f64) -> PlanDiagnosis {
    let n = plan.len();
    let lo = n / 3;
    let hi = (2 * n) / 3;
    let mut middle: Vec<f64> = plan[lo..hi.max(lo + 1)].to_vec();
    let level = median(&mut middle);
    let entry = plan.iter().position(|&x| (x - level).abs() <= eps);
    let exit = plan.iter().rposition(|&x| (x - level).abs() <= eps);
    let middle_within = plan[lo..hi.max(lo + 1)].iter().all(|&x| (x - level).abs() <= eps);
    PlanDiagnosis { day, agent, level, entry, exit, middle_within }
}

/// Computes turnpike diagnostics for every recorded plan in the trace.
pub fn turnpike_analysis(trace: &ScenarioTrace, eps: f64) -> Result<TurnpikeReport, ScenarioError> {
    let mut plans = Vec::new();
    let mut horizon = 0usize;
    for day in &trace.days {
        let recorded = day.plans.as_ref().ok_or(ScenarioError::PlansMissing)?;
        for (v, plan) in recorded.iter().enumerate() {
            if plan.is_empty() {
                return Err(ScenarioError::PlansMissing);
            }
            horizon = plan.len() - 1;
            plans.push(diagnose_plan(day.day, v, plan.as_slice(), eps));
        }
    }
    if plans.is_empty() {
        return Err(ScenarioError::PlansMissing);
    }
    let within = plans.iter().filter(|p| p.middle_within).count();
    let middle_within_fraction = within as f64 / plans.len() as f64;
    Ok(TurnpikeReport { horizon, eps, plans, middle_within_fraction })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn demand_series_applies_events_inclusively() {
        let mut s = Scenario::new("spike", presets::table1_chain(), 30, 10.0);
        s.demand_events.push(DemandEvent { agents: vec![0, 1], factor: 2.0, start_day: 10, end_day: 18 });
        let w = s.demand_series();
        assert_eq!(w[(9, 0)], 10.0);
        assert_eq!(w[(10, 0)], 20.0);
        assert_eq!(w[(18, 1)], 20.0);
        assert_eq!(w[(19, 1)], 10.0);
        assert_eq!(w[(14, 2)], 10.0);
    }

    #[test]
    fn cap_series_applies_events() {
        let mut s = Scenario::new("shock", presets::table1_chain(), 30, 10.0);
        s.supply_events.push(SupplyEvent { supplier: 0, factor: 0.3, start_day: 10, end_day: 18 });
        let caps = s.cap_series();
        assert_eq!(caps[(9, 0)], 30.0);
        assert_eq!(caps[(10, 0)], 9.0);
        assert_eq!(caps[(18, 0)], 9.0);
        assert_eq!(caps[(19, 0)], 30.0);
        assert_eq!(caps[(12, 1)], 30.0);
    }

    #[test]
    fn validation_rejects_bad_intervals_and_factors() {
        let mut s = Scenario::new("bad", presets::table1_chain(), 30, 10.0);
        s.demand_events.push(DemandEvent { agents: vec![0], factor: 2.0, start_day: 10, end_day: 30 });
        assert!(s.validate().is_err());

        let mut s = Scenario::new("bad", presets::table1_chain(), 30, 10.0);
        s.supply_events.push(SupplyEvent { supplier: 0, factor: 1.5, start_day: 1, end_day: 2 });
        assert!(s.validate().is_err());
    }

    #[test]
    fn belief_scales_touch_only_their_agent() {
        let mut s = Scenario::new("b", presets::table1_chain(), 5, 10.0);
        s.belief_scales.push(BeliefScale { agent: 1, beta_row: 1, beta_col: 0, factor: 2.0 });
        assert_eq!(s.belief_for(0).market.beta[(1, 0)], 0.3);
        assert_eq!(s.belief_for(1).market.beta[(1, 0)], 0.6);
        assert_eq!(s.belief_for(2), s.chain);
    }

    #[test]
    fn relative_change_is_zero_against_itself() {
        let chain = presets::table1_two_manufacturer_chain();
        let mut s = Scenario::new("base", chain, 3, 10.0);
        s.chain.horizon = 3;
        let (_, m) = run_scenario(&s).unwrap();
        assert_eq!(m.relative_cash_flow_change(&m), vec![0.0, 0.0]);
    }

    #[test]
    fn sweep_factor_one_changes_nothing() {
        let chain = presets::table1_two_manufacturer_chain();
        let mut s = Scenario::new("sweep", chain, 3, 10.0);
        s.chain.horizon = 3;
        let table = run_coupling_sweep(&s, SweepTarget::Beta21, &[1.0]).unwrap();
        assert_eq!(table.rows[0].delta_pct, vec![0.0, 0.0]);
    }

    #[test]
    fn constant_plan_diagnosis() {
        let plan = vec![25.0; 16];
        let d = diagnose_plan(0, 0, &plan, 1.0);
        assert_eq!(d.level, 25.0);
        assert_eq!(d.entry, Some(0));
        assert_eq!(d.exit, Some(15));
        assert!(d.middle_within);
        assert!(!d.detected(15)); // never leaves the level
    }

    #[test]
    fn v_shaped_plan_detects_turnpike() {
        let plan = vec![
            35.0, 30.0, 26.0, 25.0, 25.0, 25.0, 25.0, 25.0, 25.0, 25.0, 25.0, 25.0, 26.0, 30.0,
            35.0, 40.0,
        ];
        let d = diagnose_plan(3, 1, &plan, 1.0);
        assert!((d.level - 25.0).abs() < 1e-12);
        assert_eq!(d.entry, Some(2));
        assert_eq!(d.exit, Some(12));
        assert!(d.middle_within);
        assert!(d.detected(15));
    }

    #[test]
    fn turnpike_analysis_requires_recorded_plans() {
        let chain = presets::table1_two_manufacturer_chain();
        let mut s = Scenario::new("no_plans", chain, 2, 10.0);
        s.chain.horizon = 2;
        let (trace, _) = run_scenario(&s).unwrap();
        assert!(matches!(turnpike_analysis(&trace, 1.0), Err(ScenarioError::PlansMissing)));
    }

    #[test]
    fn determinism_same_scenario_same_trace() {
        let chain = presets::table1_two_manufacturer_chain();
        let mut s = Scenario::new("det", chain, 4, 10.0);
        s.chain.horizon = 4;
        s.record_plans = true;
        let (a, ma) = run_scenario(&s).unwrap();
        let (b, mb) = run_scenario(&s).unwrap();
        assert_eq!(a, b);
        assert_eq!(ma, mb);
    }

    #[test]
    fn event_locality_before_start_day() {
        let chain = presets::table1_two_manufacturer_chain();
        let mut base = Scenario::new("base", chain, 8, 10.0);
        base.chain.horizon = 4;
        let mut spiked = base.clone();
        spiked.demand_events.push(DemandEvent {
            agents: vec![0, 1],
            factor: 2.0,
            start_day: 5,
            end_day: 7,
        });
        let (a, _) = run_scenario(&base).unwrap();
        let (b, _) = run_scenario(&spiked).unwrap();
        // persistence forecasts carry no preview: identical up to day 5
        for t in 0..5 {
            assert_eq!(a.days[t], b.days[t], "trace diverged before the event at day {t}");
        }
        assert_ne!(a.days[5], b.days[5]);
    }

    #[test]
    fn forecast_modes_fill_the_matrix_correctly() {
        let chain = presets::table1_two_manufacturer_chain();
        let mut s = Scenario::new("fc", chain.clone(), 10, 10.0);
        s.chain.horizon = 4;
        s.demand_events.push(DemandEvent { agents: vec![0], factor: 3.0, start_day: 4, end_day: 5 });
        let w = s.demand_series();

        let perfect = AgentPolicy::new(0, s.chain.clone(), ForecastMode::Perfect, s.settings);
        let fc = perfect.forecasts(&w, 2);
        for k in 0..4 {
            assert_eq!(fc[(0, k)], w[(2 + k, 0)]);
        }
        assert_eq!(fc[(0, 2)], 30.0); // sees the spike at day 4

        let persist = AgentPolicy::new(0, s.chain.clone(), ForecastMode::Persistence, s.settings);
        let fc = persist.forecasts(&w, 2);
        for k in 0..4 {
            assert_eq!(fc[(0, k)], 10.0);
        }
        // on a spike day persistence extrapolates the spiked level
        let fc = persist.forecasts(&w, 4);
        for k in 0..4 {
            assert_eq!(fc[(0, k)], 30.0);
        }
    }

    #[test]
    fn forecast_cases_coincide_without_a_spike() {
        let chain = presets::table1_two_manufacturer_chain();
        let mut s = Scenario::new("flat", chain, 5, 10.0);
        s.chain.horizon = 3;
        let outcome = run_forecast_asymmetry(&s).unwrap();
        assert_eq!(outcome.with_preview.0, outcome.without_preview.0);
    }
}
