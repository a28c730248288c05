//! Smoothed best-response learning on a zero-sum matrix game from realized
//! payoffs, with and without uniform exploration.

use serde::{Deserialize, Serialize};

use super::{check_condition, player_rng, Exploration, Learner, Smoothing, StepsizeSchedule};
use crate::error::{Error, Result};
use crate::game::{JointPolicy, MatrixGame, Player};
use crate::metrics::{nash_gap_matrix, regularized_nash_gap};
use crate::operators::softmax::{exploration_bound, DynamicsVariant, SoftmaxParams};
use crate::record::{Index, Metric, TrajectoryRecord};

fn default_stride() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRunConfig {
    pub variant: Exploration,
    pub tau: f64,
    /// Uniform mixing weight; must be 0 for the plain variant.
    #[serde(default)]
    pub eps_bar: f64,
    pub stepsize: StepsizeSchedule,
    /// Number of iterations `K`.
    pub iterations: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_stride")]
    pub record_stride: u64,
    /// Feed `q / ||q||_2` to the softmax (q storage is unchanged).
    #[serde(default)]
    pub normalize_q_in_softmax: bool,
}

impl MatrixRunConfig {
    pub fn validate(&self) -> Result<()> {
        self.softmax_params()?;
        if self.variant == Exploration::Plain && self.eps_bar != 0.0 {
            return Err(Error::InvalidConfig(
                "eps_bar must be 0 for the plain variant".into(),
            ));
        }
        self.stepsize.validate()?;
        if self.record_stride == 0 {
            return Err(Error::InvalidConfig(
                "record_stride must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn softmax_params(&self) -> Result<SoftmaxParams> {
        SoftmaxParams::new(self.tau, self.eps_bar)
    }

    pub fn dynamics_variant(&self) -> DynamicsVariant {
        match self.variant {
            Exploration::Plain => DynamicsVariant::MatrixPlain,
            Exploration::Explore => DynamicsVariant::MatrixExplore,
        }
    }

    pub fn smoothing(&self) -> Smoothing {
        Smoothing {
            tau: self.tau,
            eps_bar: self.eps_bar,
            normalize_q: self.normalize_q_in_softmax,
        }
    }

    /// Closed-form stepsize requirements that this configuration violates.
    pub fn condition_warnings(&self, a_max: usize) -> Result<Vec<String>> {
        let params = self.softmax_params()?;
        let ell = exploration_bound(self.dynamics_variant(), params, a_max, None)?.value();
        let (a0, b0) = self.stepsize.at(0);
        let c = self.stepsize.ratio();
        let tau = self.tau;
        let a2 = (a_max * a_max) as f64;
        let mut w = Vec::new();
        match self.variant {
            Exploration::Plain => {
                check_condition(
                    "matrix stepsizes",
                    tau <= 1.0,
                    format!("tau = {tau} > 1"),
                    &mut w,
                );
                check_condition(
                    "matrix stepsizes",
                    a0 < 2.0 / ell,
                    format!("alpha_0 = {a0} >= 2 / l_tau = {:?}", 2.0 / ell),
                    &mut w,
                );
                let b_cap = tau / (128.0 * a2);
                check_condition(
                    "matrix stepsizes",
                    b0 < b_cap,
                    format!("beta_0 = {b0} >= {b_cap:?}"),
                    &mut w,
                );
                let c_cap = (tau * ell.powi(3) / 32.0).min(ell * tau.powi(3) / (128.0 * a2));
                check_condition(
                    "matrix stepsizes",
                    c <= c_cap,
                    format!("stepsize ratio {c} > {c_cap:?}"),
                    &mut w,
                );
                if let StepsizeSchedule::Diminishing { beta, .. } = self.stepsize {
                    check_condition(
                        "diminishing stepsizes",
                        beta > 4.0,
                        format!("beta = {beta} <= 4"),
                        &mut w,
                    );
                }
            }
            Exploration::Explore => {
                check_condition(
                    "exploration setting",
                    self.eps_bar == tau,
                    format!("eps_bar = {} differs from tau = {tau}", self.eps_bar),
                    &mut w,
                );
                match self.stepsize {
                    StepsizeSchedule::Constant { alpha, beta } => {
                        check_condition(
                            "exploration setting",
                            alpha < 1.0 / ell,
                            format!("alpha = {alpha} >= 1 / l = {:?}", 1.0 / ell),
                            &mut w,
                        );
                        check_condition(
                            "exploration setting",
                            beta < 1.0,
                            format!("beta = {beta} >= 1"),
                            &mut w,
                        );
                        check_condition(
                            "exploration setting",
                            c <= ell / 2.0,
                            format!("stepsize ratio {c} > l / 2 = {:?}", ell / 2.0),
                            &mut w,
                        );
                    }
                    StepsizeSchedule::Diminishing { .. } => w.push(
                        "exploration setting: guarantees are stated for constant stepsizes only"
                            .into(),
                    ),
                }
            }
        }
        Ok(w)
    }
}

/// Both learners and the iteration counter.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixDynamicsState {
    pub learners: [Learner; 2],
    pub k: u64,
}

impl MatrixDynamicsState {
    pub fn learner(&self, player: Player) -> &Learner {
        &self.learners[player.index()]
    }

    pub fn joint_policy(&self) -> JointPolicy {
        JointPolicy::new(self.learners[0].pi.clone(), self.learners[1].pi.clone())
    }

    pub fn min_policy_entry(&self) -> f64 {
        self.learners[0]
            .pi
            .min_entry()
            .min(self.learners[1].pi.min_entry())
    }

    pub fn q_inf(&self) -> f64 {
        self.learners[0].q_inf().max(self.learners[1].q_inf())
    }
}

/// Zero q-functions, uniform policies, per-player streams derived from the seed.
pub fn init_matrix_state(game: &MatrixGame, config: &MatrixRunConfig) -> MatrixDynamicsState {
    let learner =
        |p: Player| Learner::new(1, game.n_actions(p), player_rng(config.seed, p.index()));
    MatrixDynamicsState {
        learners: [learner(Player::One), learner(Player::Two)],
        k: 0,
    }
}

/// Realized joint action and payoffs of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixStepOutcome {
    pub actions: [usize; 2],
    pub payoffs: [f64; 2],
}

/// One iteration: both policies move toward the smoothed response to their
/// stale q, both players sample from the updated policies, then each q is
/// updated at its own realized action only.
pub fn step_matrix(
    state: &mut MatrixDynamicsState,
    game: &MatrixGame,
    config: &MatrixRunConfig,
) -> MatrixStepOutcome {
    let (alpha, beta) = config.stepsize.at(state.k);
    let smoothing = config.smoothing();
    for learner in state.learners.iter_mut() {
        learner.update_policy(beta, &smoothing);
    }
    let a1 = state.learners[0].act(0);
    let a2 = state.learners[1].act(0);
    let r1 = game.payoff(Player::One)[(a1, a2)];
    let r2 = game.payoff(Player::Two)[(a2, a1)];
    state.learners[0].update_q(0, a1, r1, alpha);
    state.learners[1].update_q(0, a2, r2, alpha);
    state.k += 1;
    MatrixStepOutcome {
        actions: [a1, a2],
        payoffs: [r1, r2],
    }
}

fn record_matrix(
    record: &mut TrajectoryRecord,
    state: &MatrixDynamicsState,
    game: &MatrixGame,
    tau: f64,
) -> Result<()> {
    let joint = state.joint_policy();
    let index = Index { t: 0, k: state.k };
    record.push(index, Metric::Ng, nash_gap_matrix(game, &joint)?);
    record.push(
        index,
        Metric::NgTau,
        regularized_nash_gap(game, &joint, tau)?,
    );
    record.push(index, Metric::MinPi, state.min_policy_entry());
    record.push(index, Metric::QInf, state.q_inf());
    Ok(())
}

/// Runs `K` iterations, recording metrics after every `record_stride`-th step
/// and after the last one.
pub fn run_matrix_dynamics(
    game: &MatrixGame,
    config: &MatrixRunConfig,
) -> Result<TrajectoryRecord> {
    config.validate()?;
    if !game.is_zero_sum() {
        return Err(Error::InvalidConfig(
            "learning dynamics require a zero-sum game".into(),
        ));
    }
    let warnings = config.condition_warnings(game.a_max())?;
    let mut state = init_matrix_state(game, config);
    let mut record = TrajectoryRecord {
        config_echo: serde_json::to_value(config)?,
        warnings,
        series: Vec::new(),
        final_policy: state.joint_policy(),
        final_q: [Vec::new(), Vec::new()],
        final_v: None,
    };
    while state.k < config.iterations {
        step_matrix(&mut state, game, config);
        if state.k % config.record_stride == 0 || state.k == config.iterations {
            record_matrix(&mut record, &state, game, config.tau)?;
        }
    }
    record.final_policy = state.joint_policy();
    record.final_q = [state.learners[0].q.clone(), state.learners[1].q.clone()];
    Ok(record)
}
