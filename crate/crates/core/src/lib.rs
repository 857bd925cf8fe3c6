// index-based loops over several parallel collections and NaN-rejecting
// validation comparisons are used deliberately throughout
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

//! Competitive supply chains as receding-horizon generalized Nash games.
//!
//! Each manufacturer plans orders and prices over a rolling horizon by
//! solving an open-loop equilibrium problem built from its private beliefs
//! about the market, re-plans every day, and applies only the first move.
//! The crate provides the chain model, the condensation of the multi-stage
//! game into an affine variational inequality, a semismooth Newton solver
//! for variational equilibria, the closed-loop policy, and scenario
//! programs with summary metrics and turnpike diagnostics.

pub mod avi;
pub mod chain;
pub mod game;
pub mod policy;
pub mod prediction;
pub mod presets;
pub mod scenario;

pub use avi::{
    check_regularity, fb_residual, kkt_residual, solve, AviProblem, AviSolution, KktResidual,
    RegularityReport, SolveStatus, SolverSettings,
};
pub use chain::{
    build_agent_lti, build_global_lti, demand, net_cash_flow, stage_cost, step_inventory,
    wholesale_price, AgentAction, AgentLti, AgentState, ChainParameters, GlobalLti,
    ManufacturerParams, MarketParams, ModelError, SupplierParams, STATE_DIM,
};
pub use game::{
    build_condensed_game, AgentBelief, AgentQuadraticCost, CondensedGame, GameError, GameIndex,
};
pub use policy::{
    closed_loop_run, shift_warm_start, AgentPolicy, CapObservation, ClosedLoopConfig, DayRecord,
    ForecastMode, PolicyError, ScenarioTrace, SolveDiagnostics,
};
pub use prediction::{build_prediction, PredictionMatrices};
pub use scenario::{
    run_coupling_sweep, run_forecast_asymmetry, run_scenario, turnpike_analysis, AgentMetrics,
    BeliefScale, DemandEvent, ForecastAsymmetryOutcome, MetricsSummary, PlanDiagnosis, Scenario,
    ScenarioError, SupplyEvent, SweepRow, SweepTable, SweepTarget, TurnpikeReport,
};
