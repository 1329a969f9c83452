//! Scenario runner: executes a swap scenario (from a file or a built-in
//! preset), writes the event log and report, and exits 0 on completion,
//! 2 on a protocol abort and 1 on a configuration error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;

use ppswap_core::scenario::{load_scenario, preset, run_scenario, ScenarioConfig, PRESET_NAMES};
use ppswap_core::sweep::{render_csv, sweep_aborts, DEFAULT_SWEEP_BOUND};

#[derive(Parser, Debug)]
#[command(
    name = "ppswap",
    about = "Deterministic simulator for ping-pong crosschain swaps"
)]
struct Args {
    /// Scenario JSON file to run.
    #[arg(long, conflicts_with = "preset")]
    scenario: Option<PathBuf>,

    /// Built-in preset name (see --list-presets).
    #[arg(long)]
    preset: Option<String>,

    /// Overrides the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory for events.jsonl and report.json.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Rerun the scenario with every abort point of either party and
    /// write sweep.csv / sweep.json instead of a single run.
    #[arg(long)]
    sweep_aborts: bool,

    /// Run the scenario N times with seeds seed..seed+N, each into
    /// out/run_<i>/.
    #[arg(long, value_name = "N")]
    batch: Option<u64>,

    /// List built-in presets and exit.
    #[arg(long)]
    list_presets: bool,
}

fn load_config(args: &Args) -> Result<ScenarioConfig> {
    let mut cfg = match (&args.scenario, &args.preset) {
        (Some(path), None) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            load_scenario(&text)?
        }
        (None, Some(name)) => {
            preset(name).with_context(|| format!("unknown preset '{name}'"))?
        }
        _ => bail!("exactly one of --scenario or --preset is required"),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn write_run(dir: &Path, cfg: &ScenarioConfig) -> Result<i32> {
    let result = run_scenario(cfg)?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("events.jsonl"), &result.log)?;
    fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(&result.report)? + "\n",
    )?;
    println!(
        "{}: {} (updates {}, on-chain txs {}, seed {}) -> {}",
        cfg.name,
        result.report.phase,
        result.report.accepted_updates_total,
        result.report.onchain_txs_total,
        cfg.seed,
        dir.display()
    );
    Ok(result.exit_code)
}

fn run(args: &Args) -> Result<i32> {
    if args.list_presets {
        for name in PRESET_NAMES {
            println!("{name}");
        }
        return Ok(0);
    }
    let cfg = load_config(args)?;

    if args.sweep_aborts {
        let result = sweep_aborts(&cfg, DEFAULT_SWEEP_BOUND)?;
        fs::create_dir_all(&args.out)?;
        fs::write(args.out.join("sweep.csv"), render_csv(&result))?;
        fs::write(
            args.out.join("sweep.json"),
            serde_json::to_string_pretty(&result)? + "\n",
        )?;
        println!(
            "{}: swept {} abort points, max cheater gain {} micro-units -> {}",
            cfg.name,
            result.rows.len(),
            result.max_gain_units,
            args.out.display()
        );
        return Ok(0);
    }

    if let Some(n) = args.batch {
        let mut worst = 0;
        for i in 0..n {
            let mut run_cfg = cfg.clone();
            run_cfg.seed = cfg.seed.wrapping_add(i);
            let code = write_run(&args.out.join(format!("run_{i}")), &run_cfg)?;
            worst = worst.max(code);
        }
        return Ok(worst);
    }

    write_run(&args.out, &cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
