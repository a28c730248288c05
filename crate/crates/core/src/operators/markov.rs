//! Ergodicity check and stationary distribution of the state chain induced by a
//! joint policy.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::game::{JointPolicy, StochasticGame};

/// Edges with probability at or below this are treated as absent.
const EDGE_EPS: f64 = 1e-12;

/// `P_pi(s, s') = sum_{a1, a2} pi1(a1|s) pi2(a2|s) p(s'|s, a1, a2)`.
pub fn induced_chain(game: &StochasticGame, joint: &JointPolicy) -> Result<DMatrix<f64>> {
    joint.validate_stochastic(game)?;
    let n = game.n_states();
    let mut p = DMatrix::zeros(n, n);
    for s in 0..n {
        for (a1, &p1) in joint.pi1.row(s).iter().enumerate() {
            for (a2, &p2) in joint.pi2.row(s).iter().enumerate() {
                let w = p1 * p2;
                for (t, &pt) in game.transition_row(s, a1, a2).iter().enumerate() {
                    p[(s, t)] += w * pt;
                }
            }
        }
    }
    Ok(p)
}

fn bfs_levels(p: &DMatrix<f64>, forward: bool) -> Vec<Option<usize>> {
    let n = p.nrows();
    let mut level = vec![None; n];
    level[0] = Some(0);
    let mut queue = VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        let lu = level[u].unwrap();
        for w in 0..n {
            let weight = if forward { p[(u, w)] } else { p[(w, u)] };
            if weight > EDGE_EPS && level[w].is_none() {
                level[w] = Some(lu + 1);
                queue.push_back(w);
            }
        }
    }
    level
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Checks irreducibility (every state reaches and is reached from state 0) and
/// aperiodicity (gcd of `level(u) + 1 - level(w)` over all edges is 1).
pub fn check_ergodic(p: &DMatrix<f64>) -> Result<()> {
    let n = p.nrows();
    let forward = bfs_levels(p, true);
    if let Some(s) = forward.iter().position(Option::is_none) {
        return Err(Error::NotErgodic(format!(
            "state {s} is unreachable from state 0"
        )));
    }
    if let Some(s) = bfs_levels(p, false).iter().position(Option::is_none) {
        return Err(Error::NotErgodic(format!(
            "state 0 is unreachable from state {s}"
        )));
    }
    let mut period = 0;
    for u in 0..n {
        for w in 0..n {
            if p[(u, w)] > EDGE_EPS {
                let lu = forward[u].unwrap() as isize;
                let lw = forward[w].unwrap() as isize;
                period = gcd(period, (lu + 1 - lw).unsigned_abs());
            }
        }
    }
    if period != 1 {
        return Err(Error::NotErgodic(format!("chain has period {period}")));
    }
    Ok(())
}

/// Stationary distribution of an irreducible aperiodic row-stochastic matrix.
pub fn stationary_of_chain(p: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_ergodic(p)?;
    let n = p.nrows();
    // Solve mu^T (P - I) = 0 with the last equation replaced by sum(mu) = 1.
    let mut a = p.transpose() - DMatrix::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let mu = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Solver("singular stationary system".into()))?;
    let mut mu: Vec<f64> = mu.iter().map(|x| x.max(0.0)).collect();
    let total: f64 = mu.iter().sum();
    mu.iter_mut().for_each(|x| *x /= total);
    Ok(mu)
}

/// Stationary state distribution under `joint`, or [`Error::NotErgodic`].
pub fn stationary_distribution(game: &StochasticGame, joint: &JointPolicy) -> Result<Vec<f64>> {
    stationary_of_chain(&induced_chain(game, joint)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{MatrixGame, Policy};
    use crate::random::{random_policy, random_stochastic_game};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chain_game(rows: &[[f64; 2]]) -> StochasticGame {
        let transition = rows.iter().map(|r| vec![vec![r.to_vec()]]).collect();
        StochasticGame::new(
            vec![DMatrix::zeros(1, 1); rows.len()],
            None,
            transition,
            0.5,
            None,
        )
        .unwrap()
    }

    fn trivial_policy(n: usize) -> JointPolicy {
        JointPolicy::new(Policy::uniform(n, 1), Policy::uniform(n, 1))
    }

    #[test]
    fn single_state() {
        let game = StochasticGame::single_state(&MatrixGame::matching_pennies(), 0.5).unwrap();
        let joint = JointPolicy::new(Policy::uniform(1, 2), Policy::uniform(1, 2));
        assert_eq!(stationary_distribution(&game, &joint).unwrap(), vec![1.0]);
    }

    #[test]
    fn doubly_stochastic_chain() {
        let game = chain_game(&[[0.5, 0.5], [0.5, 0.5]]);
        let mu = stationary_distribution(&game, &trivial_policy(2)).unwrap();
        assert!((mu[0] - 0.5).abs() < 1e-15 && (mu[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn periodic_and_reducible_chains_rejected() {
        let game = chain_game(&[[0.0, 1.0], [1.0, 0.0]]);
        let err = stationary_distribution(&game, &trivial_policy(2)).unwrap_err();
        assert!(matches!(err, Error::NotErgodic(ref m) if m.contains("period 2")));

        let game = chain_game(&[[1.0, 0.0], [0.5, 0.5]]);
        assert!(matches!(
            stationary_distribution(&game, &trivial_policy(2)),
            Err(Error::NotErgodic(_))
        ));
    }

    #[test]
    fn matches_power_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let game = random_stochastic_game(&mut rng, 3, 2, 2, 0.9);
            let joint =
                JointPolicy::new(random_policy(&mut rng, 3, 2), random_policy(&mut rng, 3, 2));
            let p = induced_chain(&game, &joint).unwrap();
            let mu = stationary_distribution(&game, &joint).unwrap();

            let mut x = vec![1.0, 0.0, 0.0];
            for _ in 0..1000 {
                x = (0..3)
                    .map(|t| (0..3).map(|s| x[s] * p[(s, t)]).sum())
                    .collect();
            }
            for s in 0..3 {
                assert!((mu[s] - x[s]).abs() < 1e-8);
            }
            let fixed: Vec<f64> = (0..3)
                .map(|t| (0..3).map(|s| mu[s] * p[(s, t)]).sum())
                .collect();
            for s in 0..3 {
                assert!((fixed[s] - mu[s]).abs() < 1e-10);
            }
        }
    }
}
