use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use semiactive_cli::config::{self, ControllerKind, BUILTINS};
use semiactive_cli::report::{compare, format_table, read_summary};
use semiactive_cli::runner::{self, CacheUse, RunOptions};
use semiactive_cli::Result;
use semiactive_core::controllers::HinfSettings;

#[derive(Parser)]
#[command(name = "semiactive", version, about = "Semi-active suspension scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Overrides {
    /// Output directory (default: the config's `out`, else ./out)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for random road profiles
    #[arg(long)]
    seed: Option<u64>,
    /// Integration step (s)
    #[arg(long)]
    dt: Option<f64>,
    /// Simulated time (s)
    #[arg(long)]
    duration: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every controller of a scenario (config file or built-in name)
    Run {
        config: String,
        #[command(flatten)]
        overrides: Overrides,
        /// Also write SVG charts next to the plot CSVs
        #[arg(long)]
        svg: bool,
    },
    /// Rank the rows of one or more summary.csv files
    Compare {
        #[arg(required = true)]
        summaries: Vec<PathBuf>,
    },
    /// Synthesize and cache the scenario's H-infinity controllers only
    Synth {
        config: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// List the built-in scenarios
    ListBuiltins,
}

fn load(target: &str, o: &Overrides, svg: bool) -> Result<config::Scenario> {
    let mut scenario = config::load(target)?;
    let opts = RunOptions { out: o.out.clone(), seed: o.seed, dt: o.dt, duration: o.duration, svg };
    runner::apply_options(&mut scenario, &opts)?;
    Ok(scenario)
}

fn run(target: &str, o: &Overrides, svg: bool) -> Result<()> {
    let scenario = load(target, o, svg)?;
    let artifacts = runner::run_scenario(&scenario, svg)?;
    println!("{:<16} {:>14} {:>14} {:>8}", "controller", "rms_accel", "abs_power", "switches");
    for r in &artifacts.rows {
        println!("{:<16} {:>14.6} {:>14.6} {:>8}", r.controller, r.rms_accel, r.absorbed_power_final, r.switch_count);
    }
    println!("wrote {} and {} data files to {}", artifacts.summary.display(), artifacts.files.len(), scenario.out.display());
    Ok(())
}

fn synth(target: &str, o: &Overrides) -> Result<()> {
    let scenario = load(target, o, false)?;
    let mut jobs: Vec<(String, HinfSettings)> = scenario
        .controllers
        .iter()
        .filter_map(|c| match c.kind {
            ControllerKind::Hinf(s) => Some((c.name.clone(), s)),
            _ => None,
        })
        .collect();
    if jobs.is_empty() {
        jobs.push(("hinf".into(), HinfSettings::default()));
    }
    let dir = runner::cache_dir(&scenario.out);
    for (name, settings) in jobs {
        let s = runner::synthesize(&scenario.model, &settings, Some(&dir))?;
        let status = match s.cache {
            CacheUse::Hit => "cached",
            CacheUse::Stored => "synthesized",
            CacheUse::Disabled => unreachable!(),
        };
        println!(
            "{name}: {status}, gamma {:.6e} (infimum {:.6e}), order {}, {}",
            s.controller.gamma_achieved,
            s.controller.gamma_opt,
            s.controller.k.order(),
            semiactive_cli::cache::entry_path(&dir, &s.key).display()
        );
    }
    Ok(())
}

fn compare_files(paths: &[PathBuf]) -> Result<()> {
    let mut rows = vec![];
    for p in paths {
        rows.extend(read_summary(p)?);
    }
    print!("{}", format_table(&compare(rows)?));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, overrides, svg } => run(config, overrides, *svg),
        Command::Compare { summaries } => compare_files(summaries),
        Command::Synth { config, overrides } => synth(config, overrides),
        Command::ListBuiltins => {
            for b in BUILTINS {
                println!("{:<14} {}", b.name, b.summary);
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

