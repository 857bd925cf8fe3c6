//! Experiment configuration files.
//!
//! A config is a single JSON document with nested sections: the chain
//! parameters, the simulation setup, an optional scenario block (events and
//! information settings), an optional sweep block, solver settings, and
//! output options. All agent and supplier indices in files are 1-based;
//! they are converted and validated on load with errors naming the
//! offending field and constraint.

use chainsim_core::avi::SolverSettings;
use chainsim_core::chain::{
    AgentState, ChainParameters, ManufacturerParams, MarketParams, SupplierParams,
};
use chainsim_core::policy::ForecastMode;
use chainsim_core::scenario::{BeliefScale, DemandEvent, Scenario, SupplyEvent, SweepTarget};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.into(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    pub beta: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupplierSection {
    pub rho0: f64,
    pub rho1: f64,
    pub o_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManufacturerSection {
    pub alpha: f64,
    pub gamma: f64,
    pub xi_safety: f64,
    pub xi_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    pub market: MarketSection,
    pub suppliers: Vec<SupplierSection>,
    pub manufacturers: Vec<ManufacturerSection>,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialStateSection {
    pub xi: f64,
    #[serde(default)]
    pub o_prev: f64,
    #[serde(default)]
    pub d_prev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub days: usize,
    pub base_demand: Vec<f64>,
    /// Defaults to inventory 30 with empty delay states for every agent.
    #[serde(default)]
    pub initial_state: Option<Vec<InitialStateSection>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandEventSection {
    /// 1-based manufacturer indices.
    pub agents: Vec<usize>,
    pub factor: f64,
    pub start_day: usize,
    /// Inclusive.
    pub end_day: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupplyEventSection {
    /// 1-based supplier index.
    pub supplier: usize,
    pub factor: f64,
    pub start_day: usize,
    /// Inclusive.
    pub end_day: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeliefScaleSection {
    /// 1-based manufacturer holding the belief.
    pub agent: usize,
    /// 1-based entry of the believed demand-coefficient matrix.
    pub beta_row: usize,
    pub beta_col: usize,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub demand_events: Vec<DemandEventSection>,
    pub supply_events: Vec<SupplyEventSection>,
    /// One mode per manufacturer; defaults to persistence for everyone.
    pub forecast: Option<Vec<ForecastMode>>,
    pub belief_scales: Vec<BeliefScaleSection>,
    pub record_plans: bool,
    pub check_regularity: bool,
    pub turnpike_eps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub target: SweepTarget,
    pub factors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub chain: ChainSection,
    pub simulation: SimulationSection,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub output: OutputSection,
}

impl ConfigFile {
    pub fn chain_parameters(&self) -> Result<ChainParameters, ConfigError> {
        let n_m = self.chain.manufacturers.len();
        if self.chain.market.beta.len() != n_m {
            return Err(invalid(
                "chain.market.beta",
                format!("{} rows for {} manufacturers", self.chain.market.beta.len(), n_m),
            ));
        }
        for (i, row) in self.chain.market.beta.iter().enumerate() {
            if row.len() != n_m {
                return Err(invalid(
                    format!("chain.market.beta[{}]", i + 1),
                    format!("row must have {n_m} entries (one per manufacturer), got {}", row.len()),
                ));
            }
        }
        let beta = DMatrix::from_fn(n_m, n_m, |i, j| self.chain.market.beta[i][j]);
        let params = ChainParameters {
            market: MarketParams::new(beta),
            suppliers: self
                .chain
                .suppliers
                .iter()
                .map(|s| SupplierParams { rho0: s.rho0, rho1: s.rho1, o_max: s.o_max })
                .collect(),
            manufacturers: self
                .chain
                .manufacturers
                .iter()
                .map(|m| ManufacturerParams {
                    alpha: m.alpha,
                    gamma: m.gamma,
                    xi_safety: m.xi_safety,
                    xi_max: m.xi_max,
                })
                .collect(),
            horizon: self.chain.horizon,
        };
        params.validate().map_err(|e| invalid("chain", e.to_string()))?;
        for (s, sup) in params.suppliers.iter().enumerate() {
            if sup.rho1 < 0.0 {
                return Err(invalid(
                    format!("chain.suppliers[{}].rho1", s + 1),
                    format!(
                        "{} violates the convexity requirement rho1 >= 0 of the equilibrium solve",
                        sup.rho1
                    ),
                ));
            }
        }
        Ok(params)
    }

    fn one_based(field: &str, index: usize, count: usize, what: &str) -> Result<usize, ConfigError> {
        if index == 0 || index > count {
            return Err(invalid(field, format!("{what} index {index} out of range 1..={count}")));
        }
        Ok(index - 1)
    }

    /// Builds the scenario described by the simulation and scenario sections.
    pub fn scenario(&self, name: &str) -> Result<Scenario, ConfigError> {
        let chain = self.chain_parameters()?;
        let n_m = chain.n_m();
        let n_s = chain.n_s();

        if self.simulation.base_demand.len() != n_m {
            return Err(invalid(
                "simulation.base_demand",
                format!("expected {n_m} entries, got {}", self.simulation.base_demand.len()),
            ));
        }
        let x0 = match &self.simulation.initial_state {
            None => vec![AgentState::new(30.0, 0.0, 0.0); n_m],
            Some(states) => {
                if states.len() != n_m {
                    return Err(invalid(
                        "simulation.initial_state",
                        format!("expected {n_m} entries, got {}", states.len()),
                    ));
                }
                states.iter().map(|s| AgentState::new(s.xi, s.o_prev, s.d_prev)).collect()
            }
        };

        let forecast = match &self.scenario.forecast {
            None => vec![ForecastMode::Persistence; n_m],
            Some(modes) => {
                if modes.len() != n_m {
                    return Err(invalid(
                        "scenario.forecast",
                        format!("expected {n_m} modes, got {}", modes.len()),
                    ));
                }
                modes.clone()
            }
        };

        let mut scenario = Scenario::new(name, chain, self.simulation.days, 0.0);
        scenario.base_demand = self.simulation.base_demand.clone();
        scenario.x0 = x0;
        scenario.forecast = forecast;
        scenario.settings = self.solver;
        scenario.record_plans = self.scenario.record_plans;
        scenario.check_regularity = self.scenario.check_regularity;

        for (i, e) in self.scenario.demand_events.iter().enumerate() {
            let field = format!("scenario.demand_events[{}]", i + 1);
            let agents = e
                .agents
                .iter()
                .map(|&a| Self::one_based(&field, a, n_m, "manufacturer"))
                .collect::<Result<Vec<_>, _>>()?;
            scenario.demand_events.push(DemandEvent {
                agents,
                factor: e.factor,
                start_day: e.start_day,
                end_day: e.end_day,
            });
        }
        for (i, e) in self.scenario.supply_events.iter().enumerate() {
            let field = format!("scenario.supply_events[{}]", i + 1);
            scenario.supply_events.push(SupplyEvent {
                supplier: Self::one_based(&field, e.supplier, n_s, "supplier")?,
                factor: e.factor,
                start_day: e.start_day,
                end_day: e.end_day,
            });
        }
        for (i, b) in self.scenario.belief_scales.iter().enumerate() {
            let field = format!("scenario.belief_scales[{}]", i + 1);
            scenario.belief_scales.push(BeliefScale {
                agent: Self::one_based(&field, b.agent, n_m, "manufacturer")?,
                beta_row: Self::one_based(&field, b.beta_row, n_m, "beta row")?,
                beta_col: Self::one_based(&field, b.beta_col, n_m, "beta column")?,
                factor: b.factor,
            });
        }

        scenario.validate().map_err(|e| invalid("scenario", e.to_string()))?;
        Ok(scenario)
    }

    pub fn turnpike_eps(&self) -> f64 {
        self.scenario.turnpike_eps.unwrap_or(1.0)
    }
}

/// Loads and validates a config file; errors name the offending field.
pub fn load_config(path: &Path) -> Result<ConfigFile, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let config: ConfigFile = serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
        path: path.display().to_string(),
        source,
    })?;
    // surface invariant violations eagerly with field-level messages
    config.chain_parameters()?;
    config.scenario("validation")?;
    Ok(config)
}

/// Writes a config back to disk; `load_config` of the result reproduces the
/// validated data model.
pub fn save_config(config: &ConfigFile, path: &Path) -> Result<(), ConfigError> {
    let text = serde_json::to_string_pretty(config).expect("config serializes");
    std::fs::write(path, text + "\n").map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })
}
