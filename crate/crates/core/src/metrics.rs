//! Equilibrium-quality measures and the Nash-distribution oracle.
//!
//! The entropy-regularized gap doubles as the Lyapunov function of the policy
//! dynamics; both names refer to [`regularized_nash_gap`].

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{JointPolicy, MatrixGame, Player, StochasticGame};
use crate::operators::bellman::{best_response_value, expected_utility, policy_evaluation};
use crate::operators::softmax::{entropy_unchecked, softmax_into, tau_logsumexp};

fn mat_vec(x: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..x.nrows())
        .map(|i| (0..x.ncols()).map(|j| x[(i, j)] * v[j]).sum())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_shapes(x1: &DMatrix<f64>, x2: &DMatrix<f64>, pi1: &[f64], pi2: &[f64]) -> Result<()> {
    if x2.nrows() != x1.ncols() || x2.ncols() != x1.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "X1 is {:?} but X2 is {:?}",
            x1.shape(),
            x2.shape()
        )));
    }
    if pi1.len() != x1.nrows() || pi2.len() != x1.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "policies of length ({}, {}) for a {}x{} game",
            pi1.len(),
            pi2.len(),
            x1.nrows(),
            x1.ncols()
        )));
    }
    Ok(())
}

fn matrix_policies<'a>(
    game: &MatrixGame,
    joint: &'a JointPolicy,
) -> Result<(&'a [f64], &'a [f64])> {
    if joint.pi1.n_states() != 1 || joint.pi2.n_states() != 1 {
        return Err(Error::DimensionMismatch(
            "matrix-game policies need exactly one row".into(),
        ));
    }
    let (pi1, pi2) = (joint.pi1.row(0), joint.pi2.row(0));
    check_shapes(game.payoff(Player::One), game.payoff(Player::Two), pi1, pi2)?;
    Ok((pi1, pi2))
}

/// Best-response improvement of one player: `max_a (X pi_opp)(a) - pi^T X pi_opp`.
fn deviation_gain(x: &DMatrix<f64>, own: &[f64], opp: &[f64]) -> f64 {
    let payoff = mat_vec(x, opp);
    let best = payoff.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    best - dot(own, &payoff)
}

/// Entropy-regularized improvement of one player, using
/// `max_mu (mu^T x + tau H(mu)) = tau logsumexp(x / tau)`.
fn regularized_gain(x: &DMatrix<f64>, own: &[f64], opp: &[f64], tau: f64) -> f64 {
    let payoff = mat_vec(x, opp);
    tau_logsumexp(&payoff, tau) - dot(own, &payoff) - tau * entropy_unchecked(own)
}

/// Nash gap `sum_i max_mu (mu - pi^i)^T R_i pi^{-i}`.
pub fn nash_gap_matrix(game: &MatrixGame, joint: &JointPolicy) -> Result<f64> {
    let (pi1, pi2) = matrix_policies(game, joint)?;
    let gap = deviation_gain(game.payoff(Player::One), pi1, pi2)
        + deviation_gain(game.payoff(Player::Two), pi2, pi1);
    Ok(gap.max(0.0))
}

/// Entropy-regularized Nash gap with temperature `tau`.
pub fn regularized_nash_gap(game: &MatrixGame, joint: &JointPolicy, tau: f64) -> Result<f64> {
    let (pi1, pi2) = matrix_policies(game, joint)?;
    check_tau(tau)?;
    let gap = vx_unchecked(
        game.payoff(Player::One),
        game.payoff(Player::Two),
        pi1,
        pi2,
        tau,
    );
    Ok(gap.max(0.0))
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "tau must be positive, got {tau}"
        )));
    }
    Ok(())
}

fn vx_unchecked(x1: &DMatrix<f64>, x2: &DMatrix<f64>, pi1: &[f64], pi2: &[f64], tau: f64) -> f64 {
    regularized_gain(x1, pi1, pi2, tau) + regularized_gain(x2, pi2, pi1, tau)
}

/// Regularized gap of the auxiliary game `(X1, X2)`, which need not be zero-sum.
/// `X1` is `|A1| x |A2|`, `X2` is `|A2| x |A1|`.
pub fn generalized_gap_vx(
    x1: &DMatrix<f64>,
    x2: &DMatrix<f64>,
    pi1: &[f64],
    pi2: &[f64],
    tau: f64,
) -> Result<f64> {
    check_shapes(x1, x2, pi1, pi2)?;
    check_tau(tau)?;
    Ok(vx_unchecked(x1, x2, pi1, pi2, tau))
}

/// Unique joint policy with `pi^i = softmax_tau(R_i pi^{-i})` for both players.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NashDistribution {
    pub joint: JointPolicy,
    /// `max_i ||pi^i - softmax_tau(R_i pi^{-i})||_inf`.
    pub residual: f64,
    pub iterations: usize,
    /// Damping that produced the result.
    pub damping: f64,
}

pub const DEFAULT_DAMPING: f64 = 0.5;
const MIN_DAMPING: f64 = 1.0 / 16.0;

fn smoothed_responses(
    game: &MatrixGame,
    pi1: &[f64],
    pi2: &[f64],
    tau: f64,
) -> (Vec<f64>, Vec<f64>) {
    let x1 = mat_vec(game.payoff(Player::One), pi2);
    let x2 = mat_vec(game.payoff(Player::Two), pi1);
    let mut s1 = vec![0.0; x1.len()];
    let mut s2 = vec![0.0; x2.len()];
    softmax_into(&x1, tau, &mut s1);
    softmax_into(&x2, tau, &mut s2);
    (s1, s2)
}

/// Damped simultaneous fixed-point iteration
/// `pi <- (1 - damping) pi + damping softmax_tau(R pi_opp)` from uniform, run
/// until the fixed-point residual is at most `tol`.
pub fn nash_distribution_with_damping(
    game: &MatrixGame,
    tau: f64,
    tol: f64,
    damping: f64,
    max_iters: usize,
) -> Result<NashDistribution> {
    check_tau(tau)?;
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "damping must lie in (0, 1], got {damping}"
        )));
    }
    if !game.is_zero_sum() {
        return Err(Error::InvalidConfig(
            "Nash distribution requires a zero-sum game".into(),
        ));
    }
    let n1 = game.n_actions(Player::One);
    let n2 = game.n_actions(Player::Two);
    let mut pi1 = vec![1.0 / n1 as f64; n1];
    let mut pi2 = vec![1.0 / n2 as f64; n2];
    let mut residual = f64::INFINITY;
    for it in 0..=max_iters {
        let (s1, s2) = smoothed_responses(game, &pi1, &pi2, tau);
        residual = s1
            .iter()
            .zip(&pi1)
            .chain(s2.iter().zip(&pi2))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if !residual.is_finite() {
            break;
        }
        if residual <= tol {
            return Ok(NashDistribution {
                joint: JointPolicy::matrix(pi1, pi2),
                residual,
                iterations: it,
                damping,
            });
        }
        for (p, s) in pi1.iter_mut().zip(&s1) {
            *p += damping * (s - *p);
        }
        for (p, s) in pi2.iter_mut().zip(&s2) {
            *p += damping * (s - *p);
        }
    }
    Err(Error::NoConvergence {
        iters: max_iters,
        residual,
    })
}

/// [`nash_distribution_with_damping`] that halves the damping on
/// non-convergence, down to 1/16, before giving up.
pub fn nash_distribution(
    game: &MatrixGame,
    tau: f64,
    tol: f64,
    damping: f64,
    max_iters: usize,
) -> Result<NashDistribution> {
    let mut eta = damping;
    loop {
        match nash_distribution_with_damping(game, tau, tol, eta, max_iters) {
            Err(Error::NoConvergence { .. }) if eta / 2.0 >= MIN_DAMPING => eta /= 2.0,
            other => return other,
        }
    }
}

/// Per-player breakdown of the stochastic-game Nash gap.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StochasticGap {
    /// Sum over players, clamped at 0.
    pub total: f64,
    /// `U^i(best response, pi^{-i}) - U^i(pi^i, pi^{-i})` for players 1 and 2.
    pub per_player: [f64; 2],
    pub best_response_values: [Vec<f64>; 2],
    pub policy_values: [Vec<f64>; 2],
}

/// Nash gap of a stochastic game with utilities averaged under the initial
/// distribution. Best responses are accurate to `tol / 2` per player.
pub fn nash_gap_stochastic_detail(
    game: &StochasticGame,
    joint: &JointPolicy,
    tol: f64,
) -> Result<StochasticGap> {
    joint.validate_stochastic(game)?;
    let mut per_player = [0.0; 2];
    let mut brs: [Vec<f64>; 2] = Default::default();
    let mut vals: [Vec<f64>; 2] = Default::default();
    for player in Player::BOTH {
        let br = best_response_value(game, player, joint.get(player.other()), tol)?;
        let v = policy_evaluation(game, joint, player)?;
        per_player[player.index()] = expected_utility(game, &br.value) - expected_utility(game, &v);
        brs[player.index()] = br.value;
        vals[player.index()] = v;
    }
    Ok(StochasticGap {
        total: (per_player[0] + per_player[1]).max(0.0),
        per_player,
        best_response_values: brs,
        policy_values: vals,
    })
}

pub fn nash_gap_stochastic(game: &StochasticGame, joint: &JointPolicy, tol: f64) -> Result<f64> {
    nash_gap_stochastic_detail(game, joint, tol).map(|g| g.total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Policy;
    use crate::operators::softmax::softmax;
    use crate::random::{random_distribution, random_joint_matrix, random_matrix_game};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn nash_gap_matching_pennies() {
        let g = MatrixGame::matching_pennies();
        let uniform = JointPolicy::matrix(vec![0.5, 0.5], vec![0.5, 0.5]);
        assert_eq!(nash_gap_matrix(&g, &uniform).unwrap(), 0.0);
        // Both play their first action: player 1 already wins (gap 0), player 2
        // gains 2 by switching.
        let pure = JointPolicy::matrix(vec![1.0, 0.0], vec![1.0, 0.0]);
        assert_eq!(nash_gap_matrix(&g, &pure).unwrap(), 2.0);
    }

    #[test]
    fn nash_gap_corner_game_limit_policy() {
        let g = MatrixGame::corner_game(5.0).unwrap();
        let joint = JointPolicy::matrix(
            vec![1.0 / 3.0, 2.0 / 3.0, 0.0],
            vec![0.0, 2.0 / 3.0, 1.0 / 3.0],
        );
        // Enumerate pure deviations directly.
        let mut oracle = 0.0;
        for player in Player::BOTH {
            let x = g.payoff(player);
            let own = joint.get(player).row(0);
            let opp = joint.get(player.other()).row(0);
            let incumbent: f64 = (0..own.len())
                .map(|a| own[a] * (0..opp.len()).map(|b| x[(a, b)] * opp[b]).sum::<f64>())
                .sum();
            let best = (0..own.len())
                .map(|a| (0..opp.len()).map(|b| x[(a, b)] * opp[b]).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max);
            oracle += best - incumbent;
        }
        let ng = nash_gap_matrix(&g, &joint).unwrap();
        assert!((ng - oracle.max(0.0)).abs() < 1e-12);
        assert!((0.0..0.5).contains(&ng));
    }

    #[test]
    fn nash_gap_rejects_shape_mismatch() {
        let g = MatrixGame::matching_pennies();
        let bad = JointPolicy::matrix(vec![1.0], vec![0.5, 0.5]);
        assert!(matches!(
            nash_gap_matrix(&g, &bad),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            regularized_nash_gap(&g, &bad, 0.1),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn regularized_gap_zero_at_uniform_for_matching_pennies() {
        let g = MatrixGame::matching_pennies();
        let uniform = JointPolicy::matrix(vec![0.5, 0.5], vec![0.5, 0.5]);
        for tau in [0.01, 0.1, 1.0, 10.0] {
            assert!(regularized_nash_gap(&g, &uniform, tau).unwrap() < 1e-12);
        }
    }

    #[test]
    fn regularized_gap_handles_zero_entries() {
        let g = MatrixGame::rock_paper_scissors();
        let joint = JointPolicy::matrix(vec![1.0, 0.0, 0.0], vec![0.0, 0.5, 0.5]);
        let v = regularized_nash_gap(&g, &joint, 0.3).unwrap();
        assert!(v.is_finite() && v > 0.0);
    }

    #[test]
    fn smoothing_bias_inequality_on_random_games() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..200 {
            let g = random_matrix_game(&mut rng, 2, 2);
            let joint = random_joint_matrix(&mut rng, &g);
            let tau = rng.gen_range(0.01..2.0);
            let ng = nash_gap_matrix(&g, &joint).unwrap();
            let ngt = regularized_nash_gap(&g, &joint, tau).unwrap();
            assert!(ng <= ngt + 2.0 * tau * 2f64.ln() + 1e-9);
        }
    }

    #[test]
    fn vx_reduces_to_regularized_gap() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let g = random_matrix_game(&mut rng, 3, 2);
        let joint = random_joint_matrix(&mut rng, &g);
        let (x1, x2) = (g.payoff(Player::One), g.payoff(Player::Two));
        let vx = generalized_gap_vx(x1, x2, joint.pi1.row(0), joint.pi2.row(0), 0.4).unwrap();
        assert_eq!(vx, regularized_nash_gap(&g, &joint, 0.4).unwrap());
    }

    #[test]
    fn vx_entropy_only_case() {
        let x1 = DMatrix::zeros(3, 2);
        let x2 = DMatrix::zeros(2, 3);
        let tau = 0.7;
        let v = generalized_gap_vx(&x1, &x2, &[1.0 / 3.0; 3], &[0.5, 0.5], tau).unwrap();
        assert!(v.abs() < 1e-12);
        let pi1 = [0.2, 0.3, 0.5];
        let pi2 = [0.9, 0.1];
        let v = generalized_gap_vx(&x1, &x2, &pi1, &pi2, tau).unwrap();
        let expected =
            tau * ((3f64.ln() - entropy_unchecked(&pi1)) + (2f64.ln() - entropy_unchecked(&pi2)));
        assert!((v - expected).abs() < 1e-12);
        assert!(v > 0.0);
    }

    #[test]
    fn vx_matches_plug_in_maximizer() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..50 {
            let x1 = DMatrix::from_fn(3, 2, |_, _| rng.gen_range(-1.0..1.0));
            let x2 = DMatrix::from_fn(2, 3, |_, _| rng.gen_range(-1.0..1.0));
            let pi1 = random_distribution(&mut rng, 3);
            let pi2 = random_distribution(&mut rng, 2);
            let tau = rng.gen_range(0.05..1.0);
            let vx = generalized_gap_vx(&x1, &x2, &pi1, &pi2, tau).unwrap();
            // Plug the softmax maximizer into the objective directly.
            let mut plug = 0.0;
            for (x, own, opp) in [(&x1, &pi1, &pi2), (&x2, &pi2, &pi1)] {
                let payoff = mat_vec(x, opp);
                let mu = softmax(&payoff, tau).unwrap();
                plug += dot(&mu, &payoff) + tau * entropy_unchecked(&mu)
                    - dot(own, &payoff)
                    - tau * entropy_unchecked(own);
            }
            assert!((vx - plug).abs() < 1e-10);
        }
    }

    #[test]
    fn logsumexp_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for _ in 0..200 {
            let n = rng.gen_range(1..6);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let tau = rng.gen_range(0.01..2.0);
            let mu = softmax(&x, tau).unwrap();
            let attained = dot(&mu, &x) + tau * entropy_unchecked(&mu);
            assert!((tau_logsumexp(&x, tau) - attained).abs() <= 1e-10);
        }
    }

    #[test]
    fn nash_distribution_symmetric_games_are_uniform() {
        for (g, n) in [
            (MatrixGame::matching_pennies(), 2),
            (MatrixGame::rock_paper_scissors(), 3),
        ] {
            for tau in [0.1, 0.5, 2.0] {
                let nd = nash_distribution(&g, tau, 1e-10, DEFAULT_DAMPING, 100_000).unwrap();
                for p in nd.joint.pi1.row(0).iter().chain(nd.joint.pi2.row(0)) {
                    assert!((p - 1.0 / n as f64).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn nash_distribution_corner_game_is_self_consistent() {
        let g = MatrixGame::corner_game(5.0).unwrap();
        let tol = 1e-10;
        let nd = nash_distribution(&g, 0.2, tol, DEFAULT_DAMPING, 100_000).unwrap();
        assert!(nd.residual <= tol);
        let (pi1, pi2) = (nd.joint.pi1.row(0), nd.joint.pi2.row(0));
        let s1 = softmax(&mat_vec(g.payoff(Player::One), pi2), 0.2).unwrap();
        let s2 = softmax(&mat_vec(g.payoff(Player::Two), pi1), 0.2).unwrap();
        for (a, b) in s1.iter().zip(pi1).chain(s2.iter().zip(pi2)) {
            assert!((a - b).abs() <= tol);
        }
        assert!(pi1.iter().chain(pi2).all(|&p| p > 0.0));
        assert!(regularized_nash_gap(&g, &nd.joint, 0.2).unwrap() <= 1e-6);
    }

    #[test]
    fn nash_distribution_reports_no_convergence() {
        let g = MatrixGame::corner_game(5.0).unwrap();
        let err = nash_distribution_with_damping(&g, 0.2, 1e-14, 0.5, 3).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { iters: 3, .. }));
    }

    #[test]
    fn regularized_gap_quadratic_growth() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let g = random_matrix_game(&mut rng, 3, 3);
        for tau in [0.2, 0.5, 1.0] {
            let nd = nash_distribution(&g, tau, 1e-12, DEFAULT_DAMPING, 1_000_000).unwrap();
            for _ in 0..100 {
                let joint = random_joint_matrix(&mut rng, &g);
                let dist2: f64 = [Player::One, Player::Two]
                    .iter()
                    .map(|&p| {
                        joint
                            .get(p)
                            .row(0)
                            .iter()
                            .zip(nd.joint.get(p).row(0))
                            .map(|(a, b)| (a - b).powi(2))
                            .sum::<f64>()
                    })
                    .sum();
                let ngt = regularized_nash_gap(&g, &joint, tau).unwrap();
                assert!(ngt >= tau / 2.0 * dist2 - 1e-9);
            }
        }
    }

    #[test]
    fn gaps_are_permutation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let g = random_matrix_game(&mut rng, 3, 2);
        let joint = random_joint_matrix(&mut rng, &g);
        let perm1 = [2, 0, 1];
        let perm2 = [1, 0];
        let r1 = g.payoff(Player::One);
        let pr1 = DMatrix::from_fn(3, 2, |i, j| r1[(perm1[i], perm2[j])]);
        let pg = MatrixGame::from_r1(pr1).unwrap();
        let pj = JointPolicy::matrix(
            perm1.iter().map(|&i| joint.pi1.row(0)[i]).collect(),
            perm2.iter().map(|&j| joint.pi2.row(0)[j]).collect(),
        );
        assert!(
            (nash_gap_matrix(&g, &joint).unwrap() - nash_gap_matrix(&pg, &pj).unwrap()).abs()
                < 1e-12
        );
        assert!(
            (regularized_nash_gap(&g, &joint, 0.3).unwrap()
                - regularized_nash_gap(&pg, &pj, 0.3).unwrap())
            .abs()
                < 1e-12
        );
    }

    #[test]
    fn nash_gap_is_at_most_four() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..200 {
            let g = random_matrix_game(&mut rng, 3, 3);
            let joint = random_joint_matrix(&mut rng, &g);
            assert!(nash_gap_matrix(&g, &joint).unwrap() <= 4.0);
        }
    }

    #[test]
    fn stochastic_gap_single_state_equilibrium() {
        let game = StochasticGame::single_state(&MatrixGame::matching_pennies(), 0.5).unwrap();
        let joint = JointPolicy::new(Policy::uniform(1, 2), Policy::uniform(1, 2));
        let tol = 1e-6;
        assert!(nash_gap_stochastic(&game, &joint, tol).unwrap() <= 2.0 * tol);
    }
}
