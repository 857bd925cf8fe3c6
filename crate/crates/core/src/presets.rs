//! Bundled chains and scenario programs for the standard case studies.
//!
//! The three-manufacturer, two-supplier chain uses the published study
//! parameters; nominal base demand (10 per agent), supply caps (30 per
//! supplier, slack at the baseline aggregate of about 25 but binding under
//! demand stress), and the 30-day length are the bundled defaults and can
//! be overridden through configuration.

use crate::chain::{ChainParameters, ManufacturerParams, MarketParams, SupplierParams};
use crate::scenario::{DemandEvent, Scenario, SupplyEvent};
use nalgebra::DMatrix;

pub const DEFAULT_BASE_DEMAND: f64 = 10.0;
pub const DEFAULT_SUPPLY_CAP: f64 = 30.0;
pub const DEFAULT_DAYS: usize = 30;
pub const DEFAULT_HORIZON: usize = 15;

/// Three manufacturers, two suppliers, horizon 15.
pub fn table1_chain() -> ChainParameters {
    ChainParameters {
        market: MarketParams::new(DMatrix::from_row_slice(
            3,
            3,
            &[0.7, 0.3, 0.3, 0.3, 0.8, 0.3, 0.3, 0.3, 0.6],
        )),
        suppliers: vec![
            SupplierParams { rho0: 1.0, rho1: 0.1, o_max: DEFAULT_SUPPLY_CAP },
            SupplierParams { rho0: 1.5, rho1: 0.15, o_max: DEFAULT_SUPPLY_CAP },
        ],
        manufacturers: vec![
            ManufacturerParams { alpha: 0.9, gamma: 0.1, xi_safety: 25.0, xi_max: 50.0 },
            ManufacturerParams { alpha: 0.7, gamma: 0.1, xi_safety: 25.0, xi_max: 50.0 },
            ManufacturerParams { alpha: 0.5, gamma: 0.1, xi_safety: 25.0, xi_max: 50.0 },
        ],
        horizon: DEFAULT_HORIZON,
    }
}

/// Restriction of the standard chain to the first two manufacturers, used
/// by the coupling-misestimation study.
pub fn table1_two_manufacturer_chain() -> ChainParameters {
    let full = table1_chain();
    ChainParameters {
        market: MarketParams::new(DMatrix::from_row_slice(2, 2, &[0.7, 0.3, 0.3, 0.8])),
        suppliers: full.suppliers.clone(),
        manufacturers: full.manufacturers[..2].to_vec(),
        horizon: full.horizon,
    }
}

/// Constant base demand, no events, persistence forecasts.
pub fn baseline_scenario() -> Scenario {
    Scenario::new("baseline", table1_chain(), DEFAULT_DAYS, DEFAULT_BASE_DEMAND)
}

/// Base demand of the first two manufacturers doubles on days 10..=18,
/// without preview.
pub fn demand_spike_scenario() -> Scenario {
    let mut s = baseline_scenario();
    s.name = "demand_spike".into();
    s.demand_events.push(DemandEvent { agents: vec![0, 1], factor: 2.0, start_day: 10, end_day: 18 });
    s
}

/// Supplier 1 loses 70% of its capacity on days 10..=18, without warning.
pub fn supply_shock_scenario() -> Scenario {
    let mut s = baseline_scenario();
    s.name = "supply_shock".into();
    s.supply_events.push(SupplyEvent { supplier: 0, factor: 0.3, start_day: 10, end_day: 18 });
    s
}

/// The demand-spike scenario used as the base of the forecast-asymmetry
/// study; forecast modes are assigned by the study driver.
pub fn forecast_asymmetry_scenario() -> Scenario {
    let mut s = demand_spike_scenario();
    s.name = "forecast_asymmetry".into();
    s
}

/// Two-manufacturer baseline for the coupling-misestimation sweep.
pub fn coupling_sweep_scenario() -> Scenario {
    let mut s = Scenario::new(
        "coupling_sweep",
        table1_two_manufacturer_chain(),
        DEFAULT_DAYS,
        DEFAULT_BASE_DEMAND,
    );
    s.x0.truncate(2);
    s
}

/// Default misestimation grid of the coupling sweep.
pub fn default_sweep_factors() -> Vec<f64> {
    vec![0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0]
}
