//! Seeded multi-trajectory experiments over sweep grids.
//!
//! Every sweep point gets a 64-bit key hashed from its own parameter values,
//! and trajectory `j` of that point runs with
//! `derive_seed(base_seed, [key, j])`. Seeds therefore do not depend on how the
//! sweep lists are ordered or on execution order, and runs are dispatched in
//! parallel.

pub mod aggregate;
pub mod output;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{
    derive_seed, run_matrix_dynamics, run_visbr, MatrixRunConfig, StepsizeSchedule, VisbrConfig,
};
use crate::error::{Error, Result};
use crate::game::{resolve_game, Game, GameSpec};
use crate::record::TrajectoryRecord;

pub use aggregate::{aggregate, rate_fit, AggregateSeries};
pub use output::{write_experiment, Manifest, PointEntry};

fn default_trajectories() -> u64 {
    1
}

fn default_max_runs() -> u64 {
    10_000
}

/// Where the game comes from: a `--game` style string (path or `builtin:*`) or
/// an inline document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GameSource {
    Named(String),
    Inline(GameSpec),
}

impl GameSource {
    pub fn resolve(&self) -> Result<Game> {
        match self {
            GameSource::Named(s) => resolve_game(s),
            GameSource::Inline(spec) => spec.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RunConfig {
    Matrix(MatrixRunConfig),
    Stochastic(VisbrConfig),
}

impl RunConfig {
    pub fn seed(&self) -> u64 {
        match self {
            RunConfig::Matrix(c) => c.seed,
            RunConfig::Stochastic(c) => c.seed,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            RunConfig::Matrix(c) => c.seed = seed,
            RunConfig::Stochastic(c) => c.seed = seed,
        }
    }

    pub fn set_stride(&mut self, stride: u64) {
        match self {
            RunConfig::Matrix(c) => c.record_stride = stride,
            RunConfig::Stochastic(c) => c.record_stride = stride,
        }
    }

    fn params(&self) -> SweepPoint {
        match self {
            RunConfig::Matrix(c) => SweepPoint {
                tau: c.tau,
                eps_bar: c.eps_bar,
                stepsize: c.stepsize,
                iterations: c.iterations,
                outer_iterations: None,
            },
            RunConfig::Stochastic(c) => SweepPoint {
                tau: c.tau,
                eps_bar: c.eps_bar,
                stepsize: c.stepsize,
                iterations: c.inner_iterations,
                outer_iterations: Some(c.outer_iterations),
            },
        }
    }

    fn with_params(&self, p: &SweepPoint, seed: u64) -> RunConfig {
        let mut run = self.clone();
        match &mut run {
            RunConfig::Matrix(c) => {
                c.tau = p.tau;
                c.eps_bar = p.eps_bar;
                c.stepsize = p.stepsize;
                c.iterations = p.iterations;
                c.seed = seed;
            }
            RunConfig::Stochastic(c) => {
                c.tau = p.tau;
                c.eps_bar = p.eps_bar;
                c.stepsize = p.stepsize;
                c.inner_iterations = p.iterations;
                if let Some(t) = p.outer_iterations {
                    c.outer_iterations = t;
                }
                c.seed = seed;
            }
        }
        run
    }
}

/// Values to sweep. An empty list keeps the base configuration's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepAxes {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tau: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eps_bar: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stepsize: Vec<StepsizeSchedule>,
    /// Inner iteration counts `K`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub iterations: Vec<u64>,
    /// Outer iteration counts `T` (stochastic runs only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outer_iterations: Vec<u64>,
    /// Use `eps_bar = tau` at every point.
    #[serde(default)]
    pub eps_bar_equals_tau: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Mean,
    Median,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub game: GameSource,
    pub run: RunConfig,
    #[serde(default = "default_trajectories")]
    pub n_trajectories: u64,
    #[serde(default)]
    pub sweep: SweepAxes,
    #[serde(default)]
    pub aggregation: Aggregation,
    /// Upper bound on sweep points times trajectories.
    #[serde(default = "default_max_runs")]
    pub max_runs: u64,
}

/// Parameters that vary across a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub tau: f64,
    pub eps_bar: f64,
    pub stepsize: StepsizeSchedule,
    pub iterations: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer_iterations: Option<u64>,
}

impl SweepPoint {
    /// Stable 64-bit identity derived from the point's own values.
    pub fn key(&self) -> u64 {
        let bytes = serde_json::to_vec(self).expect("sweep point serializes");
        let digest = Sha256::digest(&bytes);
        u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
    }
}

/// Seed of trajectory `j` at a sweep point.
pub fn trajectory_seed(base_seed: u64, point: &SweepPoint, j: u64) -> u64 {
    derive_seed(base_seed, &[point.key(), j])
}

fn axis<T: Copy>(values: &[T], base: T) -> Vec<T> {
    if values.is_empty() {
        vec![base]
    } else {
        values.to_vec()
    }
}

impl ExperimentConfig {
    /// Cross product of the sweep axes in the order tau, eps_bar, stepsize, K, T.
    pub fn sweep_points(&self) -> Vec<SweepPoint> {
        let base = self.run.params();
        let s = &self.sweep;
        let t_axis: Vec<Option<u64>> = match base.outer_iterations {
            Some(t) => axis(&s.outer_iterations, t).into_iter().map(Some).collect(),
            None => vec![None],
        };
        let mut points = Vec::new();
        for &tau in &axis(&s.tau, base.tau) {
            let eps_axis = if s.eps_bar_equals_tau {
                vec![tau]
            } else {
                axis(&s.eps_bar, base.eps_bar)
            };
            for &eps_bar in &eps_axis {
                for &stepsize in &axis(&s.stepsize, base.stepsize) {
                    for &iterations in &axis(&s.iterations, base.iterations) {
                        for &outer_iterations in &t_axis {
                            points.push(SweepPoint {
                                tau,
                                eps_bar,
                                stepsize,
                                iterations,
                                outer_iterations,
                            });
                        }
                    }
                }
            }
        }
        points
    }

    pub fn validate(&self) -> Result<Game> {
        if self.n_trajectories == 0 {
            return Err(Error::InvalidConfig(
                "n_trajectories must be at least 1".into(),
            ));
        }
        let game = self.game.resolve()?;
        match (&game, &self.run) {
            (Game::Matrix(_), RunConfig::Matrix(_))
            | (Game::Stochastic(_), RunConfig::Stochastic(_)) => {}
            _ => {
                return Err(Error::InvalidConfig(
                    "game type does not match the run configuration".into(),
                ))
            }
        }
        if !self.sweep.outer_iterations.is_empty() && matches!(self.run, RunConfig::Matrix(_)) {
            return Err(Error::InvalidConfig(
                "outer_iterations sweep needs a stochastic run".into(),
            ));
        }
        let points = self.sweep_points();
        let runs = points.len() as u64 * self.n_trajectories;
        if runs > self.max_runs {
            return Err(Error::InvalidConfig(format!(
                "{runs} runs exceed the cap of {}",
                self.max_runs
            )));
        }
        for p in &points {
            let run = self.run.with_params(p, 0);
            match (&game, &run) {
                (Game::Matrix(_), RunConfig::Matrix(c)) => c.validate()?,
                (Game::Stochastic(g), RunConfig::Stochastic(c)) => c.validate(g)?,
                _ => unreachable!(),
            }
        }
        Ok(game)
    }
}

/// All trajectories of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub point: SweepPoint,
    pub records: Vec<TrajectoryRecord>,
    pub aggregates: Vec<AggregateSeries>,
    /// Deduplicated stepsize-condition and game diagnostics.
    pub warnings: Vec<String>,
}

fn run_one(game: &Game, run: &RunConfig) -> Result<TrajectoryRecord> {
    match (game, run) {
        (Game::Matrix(g), RunConfig::Matrix(c)) => run_matrix_dynamics(g, c),
        (Game::Stochastic(g), RunConfig::Stochastic(c)) => run_visbr(g, c),
        _ => Err(Error::InvalidConfig(
            "game type does not match the run configuration".into(),
        )),
    }
}

/// Runs every trajectory of every sweep point (in parallel) and aggregates
/// per point. Nothing is written to disk.
pub fn execute(config: &ExperimentConfig) -> Result<(Game, Vec<PointResult>)> {
    let game = config.validate()?;
    let base_seed = config.run.seed();
    let points = config.sweep_points();
    let jobs: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|p| (0..config.n_trajectories).map(move |j| (p, j)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(p, j)| {
            let run = config
                .run
                .with_params(&points[p], trajectory_seed(base_seed, &points[p], j));
            run_one(&game, &run)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut results = Vec::with_capacity(points.len());
    let mut records = records.into_iter();
    for point in points {
        let recs: Vec<TrajectoryRecord> = records
            .by_ref()
            .take(config.n_trajectories as usize)
            .collect();
        let aggregates = aggregate(&recs)?;
        let mut warnings = Vec::new();
        for w in recs.iter().flat_map(|r| &r.warnings) {
            if !warnings.contains(w) {
                warnings.push(w.clone());
            }
        }
        results.push(PointResult {
            point,
            records: recs,
            aggregates,
            warnings,
        });
    }
    Ok((game, results))
}

/// Executes the experiment and writes one CSV per sweep point (per
/// aggregation statistic) plus `manifest.json` into `out_dir`.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: &Path,
    force: bool,
) -> Result<(Manifest, Vec<PointResult>)> {
    output::check_clobber(config, out_dir, force)?;
    let (game, results) = execute(config)?;
    let manifest = write_experiment(config, &game, &results, out_dir, force)?;
    Ok((manifest, results))
}
