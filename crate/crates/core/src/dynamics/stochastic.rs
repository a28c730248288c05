//! Value iteration with smoothed best-response inner loops (VI-SBR) on a
//! single continuing trajectory of a zero-sum stochastic game.
//!
//! Each outer iteration `t` runs `K` inner steps of matrix-game style learning
//! on the lookahead games induced by the players' current value functions
//! `v_t^i`, then sets `v_{t+1}^i(s) = pi^i(s)^T q^i(s)`. The environment state,
//! q-functions and policies carry over between outer iterations; the inner
//! stepsize schedule restarts at `k = 0`.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    check_condition, env_rng, player_rng, sample_index, Exploration, Learner, Smoothing,
    StepsizeSchedule,
};
use crate::error::{Error, Result};
use crate::game::{JointPolicy, Player, Policy, StochasticGame};
use crate::metrics::nash_gap_stochastic;
use crate::operators::bellman::{minimax_value_iteration, sup_dist};
use crate::operators::markov::stationary_distribution;
use crate::operators::softmax::{DynamicsVariant, SoftmaxParams};
use crate::record::{Index, Metric, TrajectoryRecord};

fn default_stride() -> u64 {
    1000
}

fn default_gap_tol() -> f64 {
    1e-6
}

fn default_value_error_budget() -> usize {
    4096
}

/// A player that does not learn and plays a fixed stationary policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrozenPolicy {
    pub player: Player,
    pub policy: Policy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisbrConfig {
    pub variant: Exploration,
    pub tau: f64,
    #[serde(default)]
    pub eps_bar: f64,
    /// Inner-loop schedule, restarted every outer iteration.
    pub stepsize: StepsizeSchedule,
    /// Outer iterations `T`.
    pub outer_iterations: u64,
    /// Inner iterations `K` per outer iteration.
    pub inner_iterations: u64,
    #[serde(default)]
    pub seed: u64,
    /// Record every `record_stride` inner steps (and at each outer boundary).
    #[serde(default = "default_stride")]
    pub record_stride: u64,
    /// Accuracy of the best-response solves behind the recorded Nash gap.
    #[serde(default = "default_gap_tol")]
    pub gap_tol: f64,
    /// Skip the `||v_t - v*||` diagnostic when `|S| |A1| |A2|` exceeds this.
    #[serde(default = "default_value_error_budget")]
    pub value_error_budget: usize,
    /// Optional non-learning opponent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frozen: Option<FrozenPolicy>,
}

impl VisbrConfig {
    pub fn validate(&self, game: &StochasticGame) -> Result<()> {
        SoftmaxParams::new(self.tau, self.eps_bar)?;
        if self.variant == Exploration::Plain && self.eps_bar != 0.0 {
            return Err(Error::InvalidConfig(
                "eps_bar must be 0 for the plain variant".into(),
            ));
        }
        self.stepsize.validate()?;
        if self.outer_iterations == 0 || self.inner_iterations == 0 {
            return Err(Error::InvalidConfig("T and K must be at least 1".into()));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidConfig(
                "record_stride must be positive".into(),
            ));
        }
        if !(self.gap_tol > 0.0) {
            return Err(Error::InvalidConfig("gap_tol must be positive".into()));
        }
        if let Some(f) = &self.frozen {
            f.policy
                .validate(game.n_states(), game.n_actions(f.player), "frozen policy")?;
        }
        Ok(())
    }

    pub fn dynamics_variant(&self) -> DynamicsVariant {
        match self.variant {
            Exploration::Plain => DynamicsVariant::StochasticPlain,
            Exploration::Explore => DynamicsVariant::StochasticExplore,
        }
    }

    pub fn smoothing(&self) -> Smoothing {
        Smoothing {
            tau: self.tau,
            eps_bar: self.eps_bar,
            normalize_q: false,
        }
    }

    /// Closed-form stepsize requirements that this configuration violates,
    /// plus a note on the ones that depend on unobservable constants.
    pub fn condition_warnings(&self, gamma: f64) -> Vec<String> {
        let mut w = Vec::new();
        let tau = self.tau;
        let tau_cap = 1.0 / (1.0 - gamma);
        check_condition(
            "stochastic stepsizes",
            tau <= tau_cap,
            format!("tau = {tau} > 1 / (1 - gamma) = {tau_cap}"),
            &mut w,
        );
        if self.variant == Exploration::Explore {
            check_condition(
                "exploration setting",
                self.eps_bar == tau,
                format!("eps_bar = {} differs from tau = {tau}", self.eps_bar),
                &mut w,
            );
        }
        match self.stepsize {
            StepsizeSchedule::Constant { beta, .. } => {
                check_condition(
                    "stochastic stepsizes",
                    beta < 1.0,
                    format!("beta = {beta} >= 1"),
                    &mut w,
                );
            }
            StepsizeSchedule::Diminishing { beta, h, .. } => {
                check_condition(
                    "stochastic stepsizes",
                    beta == 4.0,
                    format!("beta = {beta} != 4"),
                    &mut w,
                );
                check_condition(
                    "stochastic stepsizes",
                    h > 1.0,
                    format!("h = {h} <= 1"),
                    &mut w,
                );
                let b0 = beta / h;
                check_condition(
                    "stochastic stepsizes",
                    b0 < 1.0,
                    format!("beta_0 = {b0} >= 1"),
                    &mut w,
                );
            }
        }
        w.push(
            "stochastic stepsizes: bounds on alpha and beta/alpha involve mu_min and L_p and are not machine-checkable"
                .into(),
        );
        w
    }
}

/// Iterates of both players plus the environment.
#[derive(Debug, Clone, PartialEq)]
pub struct VisbrState {
    pub learners: [Learner; 2],
    /// `v_t^i`.
    pub v: [Vec<f64>; 2],
    /// Current environment state `S_k`.
    pub state: usize,
    pub t: u64,
    pub k: u64,
    /// Environment transitions sampled so far.
    pub transitions: u64,
    env: ChaCha8Rng,
    frozen: Option<Player>,
}

impl VisbrState {
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

    pub fn v_inf(&self) -> f64 {
        self.v.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `||v^1 + v^2||_inf`.
    pub fn l_sum(&self) -> f64 {
        self.v[0]
            .iter()
            .zip(&self.v[1])
            .fold(0.0, |m, (a, b)| m.max((a + b).abs()))
    }

    fn learns(&self, i: usize) -> bool {
        self.frozen.is_none_or(|p| p.index() != i)
    }
}

/// Zero values and q-functions, uniform policies (or the frozen policy), and
/// `S_0` drawn from the initial distribution.
pub fn init_visbr(game: &StochasticGame, config: &VisbrConfig) -> VisbrState {
    let n = game.n_states();
    let mut learners = [
        Learner::new(n, game.n_actions(Player::One), player_rng(config.seed, 0)),
        Learner::new(n, game.n_actions(Player::Two), player_rng(config.seed, 1)),
    ];
    if let Some(f) = &config.frozen {
        learners[f.player.index()].pi = f.policy.clone();
    }
    let mut env = env_rng(config.seed);
    let state = sample_index(&mut env, game.initial_dist());
    VisbrState {
        learners,
        v: [vec![0.0; n], vec![0.0; n]],
        state,
        t: 0,
        k: 0,
        transitions: 0,
        env,
        frozen: config.frozen.as_ref().map(|f| f.player),
    }
}

/// One inner step: policies move at every state using the stale q, actions are
/// drawn at the current state, the environment transitions, and each player's
/// q is updated at its own `(S_k, A_k)` toward `R + gamma v_t(S_{k+1})`.
pub fn inner_step(
    state: &mut VisbrState,
    game: &StochasticGame,
    config: &VisbrConfig,
) -> [usize; 2] {
    let (alpha, beta) = config.stepsize.at(state.k);
    let smoothing = config.smoothing();
    for i in 0..2 {
        if state.learns(i) {
            state.learners[i].update_policy(beta, &smoothing);
        }
    }
    let s = state.state;
    let a1 = state.learners[0].act(s);
    let a2 = state.learners[1].act(s);
    let next = sample_index(&mut state.env, game.transition_row(s, a1, a2));
    let gamma = game.gamma();
    for (i, player, own, opp) in [(0, Player::One, a1, a2), (1, Player::Two, a2, a1)] {
        if state.learns(i) {
            let target = game.reward(player, s)[(own, opp)] + gamma * state.v[i][next];
            state.learners[i].update_q(s, own, target, alpha);
        }
    }
    state.state = next;
    state.k += 1;
    state.transitions += 1;
    [a1, a2]
}

/// `v_{t+1}^i(s) = pi^i(s)^T q^i(s)`; everything else carries over and the
/// inner counter restarts.
pub fn outer_update(state: &mut VisbrState) {
    for i in 0..2 {
        if !state.learns(i) {
            continue;
        }
        let learner = &state.learners[i];
        state.v[i] = learner
            .q
            .iter()
            .zip(&learner.pi.0)
            .map(|(q, p)| q.iter().zip(p).map(|(a, b)| a * b).sum())
            .collect();
    }
    state.t += 1;
    state.k = 0;
}

struct Recorder<'a> {
    game: &'a StochasticGame,
    gap_tol: f64,
    v_star: Option<[Vec<f64>; 2]>,
}

impl Recorder<'_> {
    fn record(&self, record: &mut TrajectoryRecord, state: &VisbrState) -> Result<()> {
        let index = Index {
            t: state.t,
            k: state.k,
        };
        let joint = state.joint_policy();
        record.push(
            index,
            Metric::Ng,
            nash_gap_stochastic(self.game, &joint, self.gap_tol)?,
        );
        record.push(index, Metric::MinPi, state.min_policy_entry());
        record.push(index, Metric::QInf, state.q_inf());
        record.push(index, Metric::VInf, state.v_inf());
        record.push(index, Metric::LSum, state.l_sum());
        if let Some(v_star) = &self.v_star {
            let err = sup_dist(&state.v[0], &v_star[0]).max(sup_dist(&state.v[1], &v_star[1]));
            record.push(index, Metric::VErr, err);
        }
        Ok(())
    }
}

/// Runs `T` outer iterations of `K` inner steps each. Metrics are recorded at
/// `(0, 0)`, at every `record_stride`-th inner step and the last one, and at
/// `(t + 1, 0)` after each value update.
pub fn run_visbr(game: &StochasticGame, config: &VisbrConfig) -> Result<TrajectoryRecord> {
    config.validate(game)?;
    let mut warnings = config.condition_warnings(game.gamma());
    if game.initial_dist_defaulted() {
        warnings.push("initial distribution not given; using uniform".into());
    }
    let uniform = JointPolicy::new(
        Policy::uniform(game.n_states(), game.n_actions(Player::One)),
        Policy::uniform(game.n_states(), game.n_actions(Player::Two)),
    );
    if let Err(e) = stationary_distribution(game, &uniform) {
        warnings.push(format!(
            "ergodicity diagnostic under the uniform joint policy failed: {e}"
        ));
    }

    let size = game.n_states() * game.n_actions(Player::One) * game.n_actions(Player::Two);
    let v_star = if size <= config.value_error_budget {
        let v1 = minimax_value_iteration(game, Player::One, 1e-6, 1_000_000)?;
        let v2 = minimax_value_iteration(game, Player::Two, 1e-6, 1_000_000)?;
        Some([v1.value, v2.value])
    } else {
        None
    };
    let recorder = Recorder {
        game,
        gap_tol: config.gap_tol,
        v_star,
    };

    let mut state = init_visbr(game, config);
    let mut record = TrajectoryRecord {
        config_echo: serde_json::to_value(config)?,
        warnings,
        series: Vec::new(),
        final_policy: state.joint_policy(),
        final_q: [Vec::new(), Vec::new()],
        final_v: None,
    };
    recorder.record(&mut record, &state)?;
    for _ in 0..config.outer_iterations {
        while state.k < config.inner_iterations {
            inner_step(&mut state, game, config);
            if state.k % config.record_stride == 0 || state.k == config.inner_iterations {
                recorder.record(&mut record, &state)?;
            }
        }
        outer_update(&mut state);
        recorder.record(&mut record, &state)?;
    }
    record.final_policy = state.joint_policy();
    record.final_q = [state.learners[0].q.clone(), state.learners[1].q.clone()];
    record.final_v = Some(state.v.clone());
    Ok(record)
}
