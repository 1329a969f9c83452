//! Exhaustive abort sweeps: rerun a scenario with each party aborting at
//! every possible step and tabulate what the cheater gains.
//!
//! With the `parallel` feature (default) the runs fan out over a rayon
//! pool; the sequential variant is always available and produces the same
//! rows in the same order.

use serde::Serialize;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::scenario::{validate, ConfigError, ScenarioConfig, Topology};
use crate::strategy::Strategy;
use crate::swap::{run_swap, SwapWorld};

/// Outcome of one abort experiment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SweepRow {
    pub cheater: String,
    pub abort_step: u64,
    pub completed: bool,
    /// Cheater's pre-fee gain in micro-units (positive = stole value).
    pub cheater_gain_units: i64,
    /// Victim's pre-fee loss in micro-units.
    pub victim_loss_units: i64,
    pub max_abs_exposure_units: i64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub scenario: String,
    pub granularity_inverse: u64,
    pub unit_a: u64,
    pub unit_b: u64,
    pub rows: Vec<SweepRow>,
    pub max_gain_units: i64,
    pub max_victim_loss_units: i64,
}

/// Default ceiling on N for a sweep; 2(N+1) full sessions are simulated.
pub const DEFAULT_SWEEP_BOUND: u64 = 2000;

fn sweep_tasks(cfg: &ScenarioConfig) -> Result<Vec<(String, u64)>, ConfigError> {
    if cfg.topology != Topology::Direct {
        return Err(ConfigError {
            field: "topology".into(),
            message: "abort sweeps cover direct swaps only".into(),
        });
    }
    let n = cfg.terms.granularity_inverse;
    let mut tasks = Vec::with_capacity(2 * (n as usize + 1));
    for party in [&cfg.terms.party_a, &cfg.terms.party_b] {
        for step in 1..=n + 1 {
            tasks.push((party.clone(), step));
        }
    }
    Ok(tasks)
}

fn run_one(cfg: &ScenarioConfig, cheater: &str, abort_step: u64) -> SweepRow {
    let mut cfg = cfg.clone();
    cfg.strategies.clear();
    cfg.strategies
        .insert(cheater.to_string(), Strategy::AbortAt { step: abort_step });
    let validated = validate(&cfg).expect("sweep base scenario validated");
    let genesis = cfg
        .genesis
        .iter()
        .map(|(p, m)| (crate::simchain::PartyId::new(p), m.clone()))
        .collect();
    let mut world = SwapWorld::new(cfg.chain_a.clone(), cfg.chain_b.clone(), &genesis);
    let outcome = run_swap(
        &mut world,
        &validated.terms,
        &validated.strategy_a,
        &validated.strategy_b,
        validated.opts,
    );
    let victim = if cheater == cfg.terms.party_a {
        &validated.terms.party_b
    } else {
        &validated.terms.party_a
    };
    let cheater_id = crate::simchain::PartyId::new(cheater);
    SweepRow {
        cheater: cheater.to_string(),
        abort_step,
        completed: outcome.completed(),
        cheater_gain_units: outcome.net_units(&cheater_id),
        victim_loss_units: -outcome.net_units(victim),
        max_abs_exposure_units: outcome.max_abs_exposure_units,
    }
}

fn assemble(cfg: &ScenarioConfig, rows: Vec<SweepRow>) -> SweepResult {
    let validated = validate(cfg).expect("sweep base scenario validated");
    SweepResult {
        scenario: cfg.name.clone(),
        granularity_inverse: cfg.terms.granularity_inverse,
        unit_a: validated.terms.unit_a,
        unit_b: validated.terms.unit_b,
        max_gain_units: rows.iter().map(|r| r.cheater_gain_units).max().unwrap_or(0),
        max_victim_loss_units: rows.iter().map(|r| r.victim_loss_units).max().unwrap_or(0),
        rows,
    }
}

fn check_bound(cfg: &ScenarioConfig, bound: u64) -> Result<(), ConfigError> {
    if cfg.terms.granularity_inverse > bound {
        return Err(ConfigError {
            field: "terms.granularity_inverse".into(),
            message: format!("exceeds sweep bound {bound}"),
        });
    }
    Ok(())
}

/// Runs every abort experiment, data-parallel when the `parallel` feature
/// is enabled. Row order is deterministic either way.
pub fn sweep_aborts(cfg: &ScenarioConfig, bound: u64) -> Result<SweepResult, ConfigError> {
    check_bound(cfg, bound)?;
    let tasks = sweep_tasks(cfg)?;
    validate(cfg)?;
    #[cfg(feature = "parallel")]
    let rows: Vec<SweepRow> = tasks
        .par_iter()
        .map(|(cheater, step)| run_one(cfg, cheater, *step))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<SweepRow> = tasks
        .iter()
        .map(|(cheater, step)| run_one(cfg, cheater, *step))
        .collect();
    Ok(assemble(cfg, rows))
}

/// Single-threaded sweep, available regardless of features; used as the
/// benchmark baseline and as the oracle for the parallel path.
pub fn sweep_aborts_sequential(
    cfg: &ScenarioConfig,
    bound: u64,
) -> Result<SweepResult, ConfigError> {
    check_bound(cfg, bound)?;
    let tasks = sweep_tasks(cfg)?;
    validate(cfg)?;
    let rows: Vec<SweepRow> = tasks
        .iter()
        .map(|(cheater, step)| run_one(cfg, cheater, *step))
        .collect();
    Ok(assemble(cfg, rows))
}

/// CSV rendering for --sweep-aborts output.
pub fn render_csv(result: &SweepResult) -> String {
    let mut out = String::from(
        "cheater,abort_step,completed,cheater_gain_units,victim_loss_units,max_abs_exposure_units\n",
    );
    for r in &result.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.cheater,
            r.abort_step,
            r.completed,
            r.cheater_gain_units,
            r.victim_loss_units,
            r.max_abs_exposure_units
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::preset;

    fn small_cfg(n: u64) -> ScenarioConfig {
        let mut cfg = preset("wrap_rsk").unwrap();
        cfg.terms.granularity_inverse = n;
        cfg
    }

    #[test]
    fn sweep_matches_sequential_oracle() {
        let cfg = small_cfg(10);
        let par = sweep_aborts(&cfg, DEFAULT_SWEEP_BOUND).unwrap();
        let seq = sweep_aborts_sequential(&cfg, DEFAULT_SWEEP_BOUND).unwrap();
        assert_eq!(par.rows, seq.rows);
        assert_eq!(par.max_gain_units, seq.max_gain_units);
    }

    #[test]
    fn max_gain_is_exactly_one_unit() {
        let result = sweep_aborts(&small_cfg(10), DEFAULT_SWEEP_BOUND).unwrap();
        assert_eq!(result.rows.len(), 22);
        assert_eq!(result.max_gain_units, 1);
        assert_eq!(result.max_victim_loss_units, 1);
        for row in &result.rows {
            assert!(row.max_abs_exposure_units <= 1, "{row:?}");
            assert!(row.cheater_gain_units.abs() <= 1, "{row:?}");
        }
    }

    #[test]
    fn abort_past_last_step_completes() {
        let result = sweep_aborts(&small_cfg(4), DEFAULT_SWEEP_BOUND).unwrap();
        // Party B's last scheduled payment is step 4; aborting at step 5
        // never triggers for B, so the swap completes with zero gain.
        let row = result
            .rows
            .iter()
            .find(|r| r.cheater == "bob" && r.abort_step == 5)
            .unwrap();
        assert!(row.completed);
        assert_eq!(row.cheater_gain_units, 0);
    }

    #[test]
    fn bound_is_enforced() {
        let err = sweep_aborts(&small_cfg(10), 4).unwrap_err();
        assert_eq!(err.field, "terms.granularity_inverse");
    }

    #[test]
    fn hub_topology_rejected() {
        let cfg = preset("hub_composed").unwrap();
        let err = sweep_aborts(&cfg, DEFAULT_SWEEP_BOUND).unwrap_err();
        assert_eq!(err.field, "topology");
    }

    #[test]
    fn csv_has_header_and_rows() {
        let result = sweep_aborts(&small_cfg(2), DEFAULT_SWEEP_BOUND).unwrap();
        let csv = render_csv(&result);
        assert_eq!(csv.lines().count(), 1 + result.rows.len());
        assert!(csv.starts_with("cheater,abort_step,"));
    }
}
