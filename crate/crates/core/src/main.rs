use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use ibnsim::export::{event_log, export_dag, export_dags, export_topology, metrics_csv, SavedRun};
use ibnsim::scenario::load_scenario;
use ibnsim::sim::run;
use ibnsim::DomainId;

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

/// Intent-based multi-domain IP-optical network simulator.
#[derive(Parser)]
#[command(name = "ibnsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write metrics.csv, events.log, topology.json,
    /// dag.dot and state.json.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse and validate a scenario.
    Validate { scenario: PathBuf },
    /// Print the intent DAG of a saved run as DOT.
    ExportDag {
        state: PathBuf,
        /// Only this domain.
        #[arg(long)]
        domain: Option<u32>,
    },
    /// Print the topology of a saved run as JSON.
    ExportTopology { state: PathBuf },
}

struct Failure(u8, String);

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure(EXIT_RUNTIME, format!("cannot write {}: {e}", path.display())))
}

fn load_state(path: &Path) -> Result<SavedRun, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure(EXIT_INPUT, format!("cannot read {}: {e}", path.display())))?;
    SavedRun::from_json(&text).map_err(|e| Failure(EXIT_INPUT, format!("{}: {e}", path.display())))
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { scenario, out, seed } => {
            let mut s = load_scenario(&scenario).map_err(|e| Failure(EXIT_INPUT, e.to_string()))?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let output = run(&s).map_err(|e| Failure(EXIT_RUNTIME, e.to_string()))?;
            fs::create_dir_all(&out)
                .map_err(|e| Failure(EXIT_RUNTIME, format!("cannot create {}: {e}", out.display())))?;
            write(&out.join("metrics.csv"), &metrics_csv(&output.metrics, &output.records))?;
            write(&out.join("events.log"), &event_log(&output.log))?;
            let topology = serde_json::to_string_pretty(&export_topology(&output.snapshot)).expect("json");
            write(&out.join("topology.json"), &(topology + "\n"))?;
            write(&out.join("dag.dot"), &export_dags(&output.snapshot))?;
            write(&out.join("state.json"), &SavedRun::from_output(&output).to_json())?;
            let m = &output.metrics;
            println!(
                "offered={} blocked={} installed={} recovered={} blocking={:.6}",
                m.offered,
                m.blocked,
                m.installed_ok,
                m.failures_recovered,
                m.blocking_probability()
            );
            info!("wrote results to {}", out.display());
        }
        Command::Validate { scenario } => {
            let s = load_scenario(&scenario).map_err(|e| Failure(EXIT_INPUT, e.to_string()))?;
            println!(
                "ok: {} domains, {} nodes, {} events",
                s.domains.len(),
                s.nodes().len(),
                s.events.len() + s.traffic.as_ref().map_or(0, |t| t.count)
            );
        }
        Command::ExportDag { state, domain } => {
            let saved = load_state(&state)?;
            match domain {
                Some(d) => {
                    let snap = saved
                        .domains
                        .iter()
                        .find(|s| s.id == DomainId(d))
                        .ok_or_else(|| Failure(EXIT_INPUT, format!("no domain {d} in {}", state.display())))?;
                    print!("{}", export_dag(&snap.dag));
                }
                None => print!("{}", export_dags(&saved.domains)),
            }
        }
        Command::ExportTopology { state } => {
            let saved = load_state(&state)?;
            println!("{}", serde_json::to_string_pretty(&export_topology(&saved.domains)).expect("json"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("IBNSIM_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
