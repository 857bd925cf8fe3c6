//! Result serialization: long-format trace CSV with a reproducibility
//! header, companion metrics/diagnostics/plan files, sweep and turnpike
//! tables, and wide per-quantity files for plotting.
//!
//! All files are UTF-8 CSV with '.' decimals and a header row; floats are
//! written in shortest round-trip form, so identical runs produce
//! byte-identical files.

use chainsim_core::avi::SolverSettings;
use chainsim_core::policy::ScenarioTrace;
use chainsim_core::scenario::{MetricsSummary, SweepTable, TurnpikeReport};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn write_file(path: &Path, contents: &str) -> Result<(), OutputError> {
    std::fs::write(path, contents).map_err(|source| OutputError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Hex SHA-256 of the raw config bytes, embedded in every output header.
pub fn config_hash(config_text: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(config_text);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        let _ = write!(hex, "{byte:02x}");
    }
    hex
}

fn header_block(hash: &str, settings: &SolverSettings) -> String {
    format!(
        "# chainsim trace v1\n# config_sha256: {hash}\n# solver: tol={} max_iter={} \
         smoothing_init={} smoothing_decay={} regularization={} linesearch_factor={} \
         linesearch_min_step={}\n",
        settings.tol,
        settings.max_iter,
        settings.smoothing_init,
        settings.smoothing_decay,
        settings.regularization,
        settings.linesearch_factor,
        settings.linesearch_min_step,
    )
}

/// Names of the per-agent fields of one trace row group, in column order.
pub fn agent_fields(n_s: usize) -> Vec<String> {
    let mut fields = vec!["xi".to_string(), "o_prev".to_string(), "d_prev".to_string()];
    for s in 0..n_s {
        fields.push(format!("order_s{}", s + 1));
    }
    fields.extend(
        ["price", "demand", "base_demand", "stage_cost", "net_cash_flow"]
            .iter()
            .map(|s| s.to_string()),
    );
    fields
}

/// Per-supplier fields of one trace row group.
pub const SUPPLIER_FIELDS: [&str; 3] = ["wholesale_price", "aggregate_orders", "rationed"];

/// Writes the long-format trace, the metrics summary, solver diagnostics,
/// and (when recorded) the open-loop inventory plans. Returns the paths
/// written.
pub fn write_trace(
    trace: &ScenarioTrace,
    metrics: &MetricsSummary,
    hash: &str,
    settings: &SolverSettings,
    dir: &Path,
) -> Result<Vec<PathBuf>, OutputError> {
    std::fs::create_dir_all(dir).map_err(|source| OutputError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut written = Vec::new();

    // trace.csv: day,agent,field,value
    let mut out = header_block(hash, settings);
    out.push_str("day,agent,field,value\n");
    let fields = agent_fields(trace.n_s);
    for day in &trace.days {
        for v in 0..trace.n_m {
            let mut values = vec![day.states[v].xi, day.states[v].o_prev, day.states[v].d_prev];
            for s in 0..trace.n_s {
                values.push(day.actions[v].orders[s]);
            }
            values.extend([
                day.actions[v].price,
                day.realized_demand[v],
                day.base_demand[v],
                day.stage_costs[v],
                day.net_cash_flows[v],
            ]);
            for (field, value) in fields.iter().zip(values) {
                let _ = writeln!(out, "{},m{},{field},{value}", day.day, v + 1);
            }
        }
        for s in 0..trace.n_s {
            let _ = writeln!(out, "{},s{},wholesale_price,{}", day.day, s + 1, day.wholesale_prices[s]);
            let _ = writeln!(out, "{},s{},aggregate_orders,{}", day.day, s + 1, day.aggregate_orders[s]);
            let _ = writeln!(out, "{},s{},rationed,{}", day.day, s + 1, u8::from(day.rationed[s]));
        }
    }
    let path = dir.join("trace.csv");
    write_file(&path, &out)?;
    written.push(path);

    // metrics.csv: one row per agent
    let mut out = header_block(hash, settings);
    out.push_str("agent,cumulative_net_cash_flow,mean_price,max_price,min_inventory,max_inventory");
    for s in 0..trace.n_s {
        let _ = write!(out, ",total_orders_s{}", s + 1);
    }
    out.push_str(",rationed_days,solver_failure_days,negative_demand_days\n");
    for (v, m) in metrics.agents.iter().enumerate() {
        let _ = write!(
            out,
            "m{},{},{},{},{},{}",
            v + 1,
            m.cumulative_net_cash_flow,
            m.mean_price,
            m.max_price,
            m.min_inventory,
            m.max_inventory
        );
        for s in 0..trace.n_s {
            let _ = write!(out, ",{}", m.total_orders_per_supplier[s]);
        }
        let _ = writeln!(
            out,
            ",{},{},{}",
            m.rationed_days, m.solver_failure_days, m.negative_demand_days
        );
    }
    let path = dir.join("metrics.csv");
    write_file(&path, &out)?;
    written.push(path);

    // diagnostics.csv: per day and agent
    let mut out = header_block(hash, settings);
    out.push_str(
        "day,agent,status,iterations,residual,stationarity,primal,dual,complementarity,\
         fallback,licq_ok,second_order_ok\n",
    );
    for day in &trace.days {
        for (v, diag) in day.diagnostics.iter().enumerate() {
            let (licq, soc) = match &diag.regularity {
                Some(r) => (u8::from(r.licq_ok).to_string(), u8::from(r.second_order_ok).to_string()),
                None => (String::new(), String::new()),
            };
            let _ = writeln!(
                out,
                "{},m{},{},{},{},{},{},{},{},{},{licq},{soc}",
                day.day,
                v + 1,
                diag.status,
                diag.iterations,
                diag.residual,
                diag.kkt.stationarity,
                diag.kkt.primal_feasibility,
                diag.kkt.dual_feasibility,
                diag.kkt.complementarity,
                u8::from(diag.fallback),
            );
        }
    }
    let path = dir.join("diagnostics.csv");
    write_file(&path, &out)?;
    written.push(path);

    // plans.csv: per day, agent, stage
    if trace.days.iter().any(|d| d.plans.is_some()) {
        let mut out = header_block(hash, settings);
        out.push_str("day,agent,stage,xi_plan\n");
        for day in &trace.days {
            if let Some(plans) = &day.plans {
                for (v, plan) in plans.iter().enumerate() {
                    for (k, xi) in plan.iter().enumerate() {
                        let _ = writeln!(out, "{},m{},{k},{xi}", day.day, v + 1);
                    }
                }
            }
        }
        let path = dir.join("plans.csv");
        write_file(&path, &out)?;
        written.push(path);
    }

    Ok(written)
}

/// Wide per-quantity files mirroring the case-study figure panels.
pub fn write_plot_data(
    trace: &ScenarioTrace,
    hash: &str,
    settings: &SolverSettings,
    dir: &Path,
) -> Result<Vec<PathBuf>, OutputError> {
    let mut written = Vec::new();
    let agent_header: String =
        (1..=trace.n_m).map(|v| format!(",m{v}")).collect::<Vec<_>>().join("");

    type PanelValue<'a> = Box<dyn Fn(usize, usize) -> f64 + 'a>;
    let quantities: [(&str, PanelValue); 4] = [
        ("price", Box::new(|t, v| trace.days[t].actions[v].price)),
        ("demand", Box::new(|t, v| trace.days[t].realized_demand[v])),
        ("inventory", Box::new(|t, v| trace.days[t].states[v].xi)),
        ("net_cash_flow", Box::new(|t, v| trace.days[t].net_cash_flows[v])),
    ];
    for (name, value) in quantities {
        let mut out = header_block(hash, settings);
        let _ = writeln!(out, "day{agent_header}");
        for t in 0..trace.len() {
            let _ = write!(out, "{t}");
            for v in 0..trace.n_m {
                let _ = write!(out, ",{}", value(t, v));
            }
            out.push('\n');
        }
        let path = dir.join(format!("plot_{name}.csv"));
        write_file(&path, &out)?;
        written.push(path);
    }

    // per-agent per-supplier orders
    let mut out = header_block(hash, settings);
    out.push_str("day");
    for v in 1..=trace.n_m {
        for s in 1..=trace.n_s {
            let _ = write!(out, ",m{v}_s{s}");
        }
    }
    out.push('\n');
    for (t, day) in trace.days.iter().enumerate() {
        let _ = write!(out, "{t}");
        for v in 0..trace.n_m {
            for s in 0..trace.n_s {
                let _ = write!(out, ",{}", day.actions[v].orders[s]);
            }
        }
        out.push('\n');
    }
    let path = dir.join("plot_orders.csv");
    write_file(&path, &out)?;
    written.push(path);

    // wholesale prices per supplier
    let mut out = header_block(hash, settings);
    out.push_str("day");
    for s in 1..=trace.n_s {
        let _ = write!(out, ",s{s}");
    }
    out.push('\n');
    for (t, day) in trace.days.iter().enumerate() {
        let _ = write!(out, "{t}");
        for s in 0..trace.n_s {
            let _ = write!(out, ",{}", day.wholesale_prices[s]);
        }
        out.push('\n');
    }
    let path = dir.join("plot_wholesale.csv");
    write_file(&path, &out)?;
    written.push(path);

    Ok(written)
}

/// Sweep table: factor column plus per-agent relative changes in percent.
pub fn write_sweep(
    table: &SweepTable,
    hash: &str,
    settings: &SolverSettings,
    dir: &Path,
) -> Result<PathBuf, OutputError> {
    std::fs::create_dir_all(dir).map_err(|source| OutputError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut out = header_block(hash, settings);
    let target = match table.target {
        chainsim_core::scenario::SweepTarget::Beta21 => "beta_21",
        chainsim_core::scenario::SweepTarget::Beta11 => "beta_11",
    };
    let _ = writeln!(out, "# sweep_target: {target}");
    let agents = table.rows.first().map_or(0, |r| r.delta_pct.len());
    out.push_str("factor");
    for v in 1..=agents {
        let _ = write!(out, ",delta_ncf_pct_m{v}");
    }
    out.push('\n');
    for row in &table.rows {
        let _ = write!(out, "{}", row.factor);
        for d in &row.delta_pct {
            let _ = write!(out, ",{d}");
        }
        out.push('\n');
    }
    let path = dir.join("sweep.csv");
    write_file(&path, &out)?;
    Ok(path)
}

/// Turnpike report: one row per recorded plan plus summary comments.
pub fn write_turnpike(
    report: &TurnpikeReport,
    hash: &str,
    settings: &SolverSettings,
    dir: &Path,
) -> Result<PathBuf, OutputError> {
    std::fs::create_dir_all(dir).map_err(|source| OutputError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut out = header_block(hash, settings);
    let _ = writeln!(out, "# turnpike_eps: {}", report.eps);
    let _ = writeln!(out, "# middle_within_fraction: {}", report.middle_within_fraction);
    let _ = writeln!(out, "# detected_fraction: {}", report.detected_fraction());
    out.push_str("day,agent,level,entry,exit,middle_within,detected\n");
    for p in &report.plans {
        let entry = p.entry.map_or(String::new(), |e| e.to_string());
        let exit = p.exit.map_or(String::new(), |e| e.to_string());
        let _ = writeln!(
            out,
            "{},m{},{},{entry},{exit},{},{}",
            p.day,
            p.agent + 1,
            p.level,
            u8::from(p.middle_within),
            u8::from(p.detected(report.horizon)),
        );
    }
    let path = dir.join("turnpike.csv");
    write_file(&path, &out)?;
    Ok(path)
}
