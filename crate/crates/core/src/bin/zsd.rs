use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;

use zerosum_dynamics::dynamics::{MatrixRunConfig, VisbrConfig};
use zerosum_dynamics::game::{resolve_game, Game, PolicyFile};
use zerosum_dynamics::harness::{
    run_experiment, Aggregation, ExperimentConfig, GameSource, RunConfig, SweepAxes,
};
use zerosum_dynamics::metrics::{
    nash_distribution, nash_gap_matrix, nash_gap_stochastic, regularized_nash_gap, DEFAULT_DAMPING,
};
use zerosum_dynamics::operators::{matrix_game_value, minimax_value_iteration};
use zerosum_dynamics::{Error, Player, Result};

#[derive(Parser)]
#[command(
    name = "zsd",
    version,
    about = "Independent learning dynamics for zero-sum games"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Override the base seed of the run configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the recording stride.
    #[arg(long, global = true)]
    stride: Option<u64>,
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    force: bool,
    /// Suppress warnings and progress on stderr.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the matrix-game dynamics.
    MatrixRun {
        #[arg(long)]
        game: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run VI-SBR on a stochastic game.
    SgRun {
        #[arg(long)]
        game: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact quantities of a game or joint policy, printed as JSON.
    Oracle {
        #[command(subcommand)]
        query: Oracle,
    },
    /// Run an experiment whose configuration includes the game and sweep axes.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum Oracle {
    /// Game value and optimal strategies (minimax values for stochastic games).
    Value {
        #[arg(long)]
        game: String,
    },
    /// Nash gap of a joint policy.
    Ng {
        #[arg(long)]
        game: String,
        #[arg(long)]
        policy: PathBuf,
        /// Best-response accuracy for stochastic games.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Entropy-regularized Nash gap of a joint policy (matrix games).
    Ngtau {
        #[arg(long)]
        game: String,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        tau: f64,
    },
    /// Nash distribution at temperature tau (matrix games).
    Nashdist {
        #[arg(long)]
        game: String,
        #[arg(long)]
        tau: f64,
        /// Accepted for symmetry with the other queries; unused.
        #[arg(long)]
        policy: Option<PathBuf>,
    },
}

/// Run configuration file for `matrix-run` / `sg-run`.
#[derive(Deserialize)]
struct RunFile<C> {
    #[serde(flatten)]
    run: C,
    #[serde(default = "one")]
    n_trajectories: u64,
    #[serde(default)]
    aggregation: Aggregation,
}

fn one() -> u64 {
    1
}

fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn matrix_game(source: &str) -> Result<zerosum_dynamics::MatrixGame> {
    match resolve_game(source)? {
        Game::Matrix(g) => Ok(g),
        Game::Stochastic(_) => Err(Error::InvalidConfig(
            "this query needs a matrix game".into(),
        )),
    }
}

fn experiment(global: &Global, config: &mut ExperimentConfig, out: &Path) -> Result<()> {
    if let Some(seed) = global.seed {
        config.run.set_seed(seed);
    }
    if let Some(stride) = global.stride {
        config.run.set_stride(stride);
    }
    let (manifest, _) = run_experiment(config, out, global.force)?;
    if !global.quiet {
        for w in &manifest.warnings {
            eprintln!("warning: {w}");
        }
        eprintln!(
            "wrote {} point(s) to {}",
            manifest.points.len(),
            out.display()
        );
    }
    Ok(())
}

fn print(value: serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(&value)?);
    Ok(())
}

fn oracle(query: Oracle) -> Result<()> {
    match query {
        Oracle::Value { game } => match resolve_game(&game)? {
            Game::Matrix(g) => {
                let v = matrix_game_value(g.payoff(Player::One))?;
                print(json!({ "value": v.value, "pi1": v.maximin, "pi2": v.minimax }))
            }
            Game::Stochastic(g) => {
                let v1 = minimax_value_iteration(&g, Player::One, 1e-10, 10_000_000)?;
                let v2 = minimax_value_iteration(&g, Player::Two, 1e-10, 10_000_000)?;
                print(json!({ "v1": v1.value, "v2": v2.value }))
            }
        },
        Oracle::Ng { game, policy, tol } => {
            let joint = PolicyFile::load(&policy)?;
            let ng = match resolve_game(&game)? {
                Game::Matrix(g) => nash_gap_matrix(&g, &joint)?,
                Game::Stochastic(g) => nash_gap_stochastic(&g, &joint, tol)?,
            };
            print(json!({ "ng": ng }))
        }
        Oracle::Ngtau { game, policy, tau } => {
            let joint = PolicyFile::load(&policy)?;
            let ng = regularized_nash_gap(&matrix_game(&game)?, &joint, tau)?;
            print(json!({ "ngtau": ng, "tau": tau }))
        }
        Oracle::Nashdist { game, tau, .. } => {
            let d =
                nash_distribution(&matrix_game(&game)?, tau, 1e-12, DEFAULT_DAMPING, 1_000_000)?;
            print(json!({
                "pi1": d.joint.pi1.row(0),
                "pi2": d.joint.pi2.row(0),
                "residual": d.residual,
                "iterations": d.iterations,
            }))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let global = cli.global;
    match cli.command {
        Command::MatrixRun { game, config, out } => {
            let file: RunFile<MatrixRunConfig> = load_json(&config)?;
            let mut exp = ExperimentConfig {
                game: GameSource::Named(game),
                run: RunConfig::Matrix(file.run),
                n_trajectories: file.n_trajectories,
                sweep: SweepAxes::default(),
                aggregation: file.aggregation,
                max_runs: 10_000,
            };
            experiment(&global, &mut exp, &out)
        }
        Command::SgRun { game, config, out } => {
            let file: RunFile<VisbrConfig> = load_json(&config)?;
            let mut exp = ExperimentConfig {
                game: GameSource::Named(game),
                run: RunConfig::Stochastic(file.run),
                n_trajectories: file.n_trajectories,
                sweep: SweepAxes::default(),
                aggregation: file.aggregation,
                max_runs: 10_000,
            };
            experiment(&global, &mut exp, &out)
        }
        Command::Oracle { query } => oracle(query),
        Command::Sweep { config, out } => {
            let mut exp: ExperimentConfig = load_json(&config)?;
            experiment(&global, &mut exp, &out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
