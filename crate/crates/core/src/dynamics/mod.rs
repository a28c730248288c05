//! Independent smoothed best-response learners and their schedules.
//!
//! A [`Learner`] owns one player's q-table, policy and random stream. It is
//! only ever handed its own realized action, payoff and (for stochastic games)
//! the observed state, so no learner can read its opponent's policy, action or
//! payoff.

pub mod matrix;
pub mod stochastic;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::Policy;
use crate::operators::softmax::{mix_uniform, softmax_into};

pub use matrix::{
    init_matrix_state, run_matrix_dynamics, step_matrix, MatrixDynamicsState, MatrixRunConfig,
};
pub use stochastic::{
    init_visbr, inner_step, outer_update, run_visbr, FrozenPolicy, VisbrConfig, VisbrState,
};

/// Which smoothed best response drives the policy update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exploration {
    /// Softmax with temperature `tau`.
    Plain,
    /// Softmax mixed with the uniform policy at weight `eps_bar`.
    Explore,
}

/// Policy and q-function stepsizes `(alpha_k, beta_k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StepsizeSchedule {
    Constant {
        alpha: f64,
        beta: f64,
    },
    /// `alpha / (k + h)` and `beta / (k + h)`.
    Diminishing {
        alpha: f64,
        beta: f64,
        h: f64,
    },
}

impl StepsizeSchedule {
    pub fn at(&self, k: u64) -> (f64, f64) {
        match *self {
            StepsizeSchedule::Constant { alpha, beta } => (alpha, beta),
            StepsizeSchedule::Diminishing { alpha, beta, h } => {
                let d = k as f64 + h;
                (alpha / d, beta / d)
            }
        }
    }

    /// `c = beta / alpha`.
    pub fn ratio(&self) -> f64 {
        match *self {
            StepsizeSchedule::Constant { alpha, beta }
            | StepsizeSchedule::Diminishing { alpha, beta, .. } => beta / alpha,
        }
    }

    /// Both schedules are non-increasing, so checking `k = 0` covers every `k`:
    /// `alpha_k, beta_k` in `(0, 1]` and `beta_k <= alpha_k`.
    pub fn validate(&self) -> Result<()> {
        if let StepsizeSchedule::Diminishing { h, .. } = *self {
            if !(h >= 0.0) || !h.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "offset h must be >= 0, got {h}"
                )));
            }
        }
        let (a0, b0) = self.at(0);
        if !(a0 > 0.0 && a0 <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha_0 = {a0} is not in (0, 1]"
            )));
        }
        if !(b0 > 0.0 && b0 <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "beta_0 = {b0} is not in (0, 1]"
            )));
        }
        if b0 > a0 {
            return Err(Error::InvalidConfig(format!(
                "beta_0 = {b0} exceeds alpha_0 = {a0}"
            )));
        }
        Ok(())
    }
}

/// Smoothed best response applied to a q-row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smoothing {
    pub tau: f64,
    /// 0 for the plain variant.
    pub eps_bar: f64,
    /// Feed `q / ||q||_2` to the softmax instead of `q` (zero rows pass through).
    pub normalize_q: bool,
}

impl Smoothing {
    pub fn apply(&self, q: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        let input = if self.normalize_q {
            let norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                for (s, x) in scratch.iter_mut().zip(q) {
                    *s = x / norm;
                }
                &scratch[..q.len()]
            } else {
                q
            }
        } else {
            q
        };
        softmax_into(input, self.tau, out);
        mix_uniform(out, self.eps_bar);
    }
}

/// Draws an index from `p` by inverse CDF in index order.
pub fn sample_index<R: Rng + ?Sized>(rng: &mut R, p: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &w) in p.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // Rounding left `u` above the total mass; take the last action with mass.
    p.iter().rposition(|&w| w > 0.0).unwrap_or(p.len() - 1)
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministically combines a base seed with a path of stream labels.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(base), |acc, &p| {
        splitmix64(acc ^ splitmix64(p.wrapping_add(0x5851_F42D_4C95_7F2D)))
    })
}

pub(crate) const STREAM_PLAYER: [u64; 2] = [1, 2];
pub(crate) const STREAM_ENV: u64 = 3;

/// Random stream of `player_index` (0 or 1) for a run seed.
pub fn player_rng(seed: u64, player_index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &[STREAM_PLAYER[player_index]]))
}

pub(crate) fn env_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &[STREAM_ENV]))
}

/// One player's q-function, policy and private random stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Learner {
    /// `q[s][a]`; a single row for matrix games.
    pub q: Vec<Vec<f64>>,
    pub pi: Policy,
    rng: ChaCha8Rng,
    target: Vec<f64>,
    scratch: Vec<f64>,
}

impl Learner {
    /// Zero q-function and uniform policy.
    pub fn new(n_states: usize, n_actions: usize, rng: ChaCha8Rng) -> Self {
        Learner {
            q: vec![vec![0.0; n_actions]; n_states],
            pi: Policy::uniform(n_states, n_actions),
            rng,
            target: vec![0.0; n_actions],
            scratch: vec![0.0; n_actions],
        }
    }

    /// `pi(s) <- pi(s) + beta (smoothed(q(s)) - pi(s))` at every state.
    pub fn update_policy(&mut self, beta: f64, smoothing: &Smoothing) {
        for (q_row, pi_row) in self.q.iter().zip(self.pi.0.iter_mut()) {
            smoothing.apply(q_row, &mut self.target, &mut self.scratch);
            for (p, t) in pi_row.iter_mut().zip(&self.target) {
                *p += beta * (t - *p);
            }
        }
    }

    /// Samples an own action at state `s` from the current policy.
    pub fn act(&mut self, s: usize) -> usize {
        sample_index(&mut self.rng, self.pi.row(s))
    }

    /// `q(s, a) <- q(s, a) + alpha (target - q(s, a))`.
    pub fn update_q(&mut self, s: usize, a: usize, target: f64, alpha: f64) {
        let q = &mut self.q[s][a];
        *q += alpha * (target - *q);
    }

    pub fn q_inf(&self) -> f64 {
        self.q
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Checks the closed-form parts of the stepsize requirements. Returns one
/// human-readable warning per violated or uncheckable requirement.
pub(crate) fn check_condition(name: &str, holds: bool, detail: String, warnings: &mut Vec<String>) {
    if !holds {
        warnings.push(format!("{name}: {detail}"));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules() {
        let c = StepsizeSchedule::Constant {
            alpha: 0.5,
            beta: 0.01,
        };
        assert_eq!(c.at(0), (0.5, 0.01));
        assert_eq!(c.at(1000), (0.5, 0.01));
        assert!(c.validate().is_ok());
        let d = StepsizeSchedule::Diminishing {
            alpha: 10.0,
            beta: 1.0,
            h: 20.0,
        };
        assert_eq!(d.at(0), (0.5, 0.05));
        assert_eq!(d.at(30), (0.2, 0.02));
        assert!((d.ratio() - 0.1).abs() < 1e-15);
        assert!(d.validate().is_ok());
        assert!(StepsizeSchedule::Constant {
            alpha: 1.5,
            beta: 0.1
        }
        .validate()
        .is_err());
        assert!(StepsizeSchedule::Constant {
            alpha: 0.1,
            beta: 0.2
        }
        .validate()
        .is_err());
        assert!(StepsizeSchedule::Constant {
            alpha: 0.1,
            beta: 0.0
        }
        .validate()
        .is_err());
        assert!(StepsizeSchedule::Diminishing {
            alpha: 1.0,
            beta: 0.1,
            h: 0.0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn inverse_cdf_sampling() {
        struct Fixed(u64);
        impl rand::RngCore for Fixed {
            fn next_u32(&mut self) -> u32 {
                self.0 as u32
            }
            fn next_u64(&mut self) -> u64 {
                self.0
            }
            fn fill_bytes(&mut self, _: &mut [u8]) {
                unimplemented!()
            }
            fn try_fill_bytes(&mut self, _: &mut [u8]) -> std::result::Result<(), rand::Error> {
                unimplemented!()
            }
        }
        // rand maps the top 53 bits to [0, 1).
        let u = |x: f64| Fixed(((x * (1u64 << 53) as f64) as u64) << 11);
        let p = [0.2, 0.5, 0.3];
        assert_eq!(sample_index(&mut u(0.0), &p), 0);
        assert_eq!(sample_index(&mut u(0.19), &p), 0);
        assert_eq!(sample_index(&mut u(0.21), &p), 1);
        assert_eq!(sample_index(&mut u(0.71), &p), 2);
        assert_eq!(sample_index(&mut u(0.999_999), &[0.5, 0.5, 0.0]), 1);
    }

    #[test]
    fn seed_derivation_separates_streams() {
        let a = derive_seed(7, &[1]);
        let b = derive_seed(7, &[2]);
        let c = derive_seed(8, &[1]);
        assert!(a != b && a != c && b != c);
        assert_eq!(derive_seed(7, &[1, 2]), derive_seed(7, &[1, 2]));
        assert_ne!(derive_seed(7, &[1, 2]), derive_seed(7, &[2, 1]));
    }

    #[test]
    fn normalized_smoothing() {
        let s = Smoothing {
            tau: 1.0,
            eps_bar: 0.0,
            normalize_q: true,
        };
        let mut out = [0.0; 2];
        let mut scratch = [0.0; 2];
        s.apply(&[3.0, 4.0], &mut out, &mut scratch);
        let direct = crate::operators::softmax(&[0.6, 0.8], 1.0).unwrap();
        assert!((out[0] - direct[0]).abs() < 1e-15);
        s.apply(&[0.0, 0.0], &mut out, &mut scratch);
        assert_eq!(out, [0.5, 0.5]);
    }
}
