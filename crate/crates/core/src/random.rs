//! Random games and policies for experiments, fuzzing and tests.

use nalgebra::DMatrix;
use rand::Rng;

use crate::game::{JointPolicy, MatrixGame, Policy, StochasticGame};

/// A distribution drawn uniformly from the simplex (normalized exponentials).
pub fn random_distribution<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

pub fn random_policy<R: Rng + ?Sized>(rng: &mut R, n_states: usize, n_actions: usize) -> Policy {
    Policy(
        (0..n_states)
            .map(|_| random_distribution(rng, n_actions))
            .collect(),
    )
}

pub fn random_joint_matrix<R: Rng + ?Sized>(rng: &mut R, game: &MatrixGame) -> JointPolicy {
    use crate::game::Player;
    JointPolicy::matrix(
        random_distribution(rng, game.n_actions(Player::One)),
        random_distribution(rng, game.n_actions(Player::Two)),
    )
}

/// Zero-sum matrix game with payoffs uniform on `[-1, 1]`.
pub fn random_matrix_game<R: Rng + ?Sized>(rng: &mut R, n1: usize, n2: usize) -> MatrixGame {
    let r1 = DMatrix::from_fn(n1, n2, |_, _| rng.gen_range(-1.0..=1.0));
    MatrixGame::from_r1(r1).expect("random payoffs are in range")
}

/// Zero-sum stochastic game with uniform rewards and strictly positive random
/// transitions, so every joint policy induces an ergodic chain.
pub fn random_stochastic_game<R: Rng + ?Sized>(
    rng: &mut R,
    n_states: usize,
    n1: usize,
    n2: usize,
    gamma: f64,
) -> StochasticGame {
    let r1 = (0..n_states)
        .map(|_| DMatrix::from_fn(n1, n2, |_, _| rng.gen_range(-1.0..=1.0)))
        .collect();
    let transition = (0..n_states)
        .map(|_| {
            (0..n1)
                .map(|_| {
                    (0..n2)
                        .map(|_| random_distribution(rng, n_states))
                        .collect()
                })
                .collect()
        })
        .collect();
    StochasticGame::new(r1, None, transition, gamma, None).expect("random game is valid")
}
