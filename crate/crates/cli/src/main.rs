use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use photon_mux::analytic::{self, OracleParams};
use photon_mux::config::{parse_config, ExperimentConfig, RunMode};
use photon_mux::controller::ControllerMode;
use photon_mux::experiment::{run_experiment_traced, run_sweep};
use photon_mux::optics::G2SplitterParams;
use photon_mux::report;

const EXIT_CONFIG: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

#[derive(Parser)]
#[command(name = "photon-mux-sim", version, about = "Simulate a temporally multiplexed heralded single-photon source")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one configuration and write a one-row CSV
    Run(Common),
    /// Simulate once per value of a numeric configuration key
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Dotted configuration key, e.g. source.pump_power_mw
        #[arg(long)]
        axis: String,
        /// Comma-separated values
        #[arg(long, value_parser = parse_values, allow_hyphen_values = true)]
        values: Values,
    },
    /// Simulate the split-detection g² measurement
    G2(Common),
    /// Exact oracle rates for a configuration, or the stage-count table
    Analytic {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the single-photon probability against stage count for
        /// this per-switch loss instead
        #[arg(long)]
        stage_loss_db: Option<f64>,
        /// Mean pairs per bin for the stage table
        #[arg(long, default_value_t = 0.01)]
        mu: f64,
        #[arg(long, default_value_t = 6)]
        m_max: u32,
    },
    /// Check a configuration and print it with defaults filled in
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Cycles to simulate (default: grid.n_cycles)
    #[arg(long)]
    cycles: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mode: Option<RunMode>,
    /// Output CSV path (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write one line per simulated cycle to this file
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Clone, Debug)]
struct Values(Vec<f64>);

fn parse_values(s: &str) -> Result<Values, String> {
    if s.trim().is_empty() {
        return Ok(Values(Vec::new()));
    }
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}")))
        .collect::<Result<_, _>>()
        .map(Values)
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<photon_mux::Error> for Failure {
    fn from(e: photon_mux::Error) -> Self {
        if e.is_config_error() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, Failure> {
    let text = match path {
        Some(p) => fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    Ok(parse_config(&text)?)
}

fn resolve(common: &Common) -> Result<(ExperimentConfig, u64), Failure> {
    let mut cfg = load_config(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(mode) = common.mode {
        cfg.mode = mode;
    }
    let cycles = common.cycles.unwrap_or(cfg.grid.n_cycles);
    Ok((cfg, cycles))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn simulate_and_emit(cfg: &ExperimentConfig, cycles: u64, common: &Common) -> Result<(), Failure> {
    let result = run_experiment_traced(cfg, cycles, common.trace.is_some())?;
    if let Some(path) = &common.trace {
        let mut text = result.trace.join("\n");
        text.push('\n');
        fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    }
    emit(common.out.as_deref(), &report::run_csv(&result.report))
}

fn oracle_csv(cfg: &ExperimentConfig) -> Result<String, Failure> {
    let p = OracleParams::from_config(cfg)?;
    let mut s = String::from("# photon-mux-sim oracle v1\n");
    if cfg.grid.stages() == 1 {
        let f = analytic::analytic_improvement_factor(&p)?;
        s.push_str(&format!("# improvement_factor={f}\n"));
    }
    s.push_str("mode,p_gate,p_coincidence,p_accidental,p_r12,p_r13,p_c123,p_probe,signal_clicks_per_cycle,heralded_g2,g2_estimator_limit\n");
    for mode in [ControllerMode::Enabled, ControllerMode::Disabled] {
        let r = analytic::cycle_rates(&p, mode)?;
        let g2 = analytic::g2_of_distribution(&r.photons).map(|g| g.to_string()).unwrap_or_default();
        let est = r.g2_estimator_limit().map(|g| g.to_string()).unwrap_or_default();
        s.push_str(&format!(
            "{mode},{},{},{},{},{},{},{},{},{g2},{est}\n",
            r.p_gate, r.p_coincidence, r.p_accidental, r.p_r12, r.p_r13, r.p_c123, r.p_probe, r.signal_clicks
        ));
    }
    Ok(s)
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(common) => {
            let (cfg, cycles) = resolve(&common)?;
            simulate_and_emit(&cfg, cycles, &common)
        }
        Command::G2(common) => {
            let (mut cfg, cycles) = resolve(&common)?;
            cfg.g2.get_or_insert_with(G2SplitterParams::default);
            cfg.validate()?;
            simulate_and_emit(&cfg, cycles, &common)
        }
        Command::Sweep { common, axis, values } => {
            let (cfg, cycles) = resolve(&common)?;
            let rows = run_sweep(&cfg, &axis, &values.0, cycles)?;
            emit(common.out.as_deref(), &report::sweep_csv(&rows))
        }
        Command::Analytic {
            config,
            out,
            stage_loss_db,
            mu,
            m_max,
        } => {
            let text = match stage_loss_db {
                Some(loss) => {
                    let opt = analytic::optimal_stage_count(loss, mu, m_max)?;
                    analytic::p1_table_csv(&opt, loss, mu)
                }
                None => oracle_csv(&load_config(config.as_deref())?)?,
            };
            emit(out.as_deref(), &text)
        }
        Command::Validate { config } => {
            let cfg = load_config(config.as_deref())?;
            emit(None, &cfg.to_toml())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
