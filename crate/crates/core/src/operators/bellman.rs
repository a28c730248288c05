//! One-step lookahead operators on stochastic games and the single-agent
//! solvers used as exact oracles.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{JointPolicy, Player, Policy, StochasticGame};
use crate::operators::lp::matrix_game_value;

fn check_values(game: &StochasticGame, v: &[f64]) -> Result<()> {
    if v.len() != game.n_states() {
        return Err(Error::DimensionMismatch(format!(
            "value vector has {} entries, game has {} states",
            v.len(),
            game.n_states()
        )));
    }
    if let Some(x) = v.iter().find(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput(format!("value entry {x}")));
    }
    Ok(())
}

fn expect(row: &[f64], v: &[f64]) -> f64 {
    row.iter().zip(v).map(|(p, x)| p * x).sum()
}

/// Lookahead matrix at one state: `R_i(s, a, b) + gamma * E[v(S') | s, a, b]`,
/// rows indexed by `player`'s own action.
pub(crate) fn lookahead_at(
    game: &StochasticGame,
    v: &[f64],
    player: Player,
    s: usize,
) -> DMatrix<f64> {
    let r = game.reward(player, s);
    let gamma = game.gamma();
    DMatrix::from_fn(r.nrows(), r.ncols(), |a, b| {
        r[(a, b)] + gamma * expect(game.transition_row_for(player, s, a, b), v)
    })
}

/// `T^i(v)`: one lookahead matrix per state.
pub fn bellman_t(game: &StochasticGame, v: &[f64], player: Player) -> Result<Vec<DMatrix<f64>>> {
    check_values(game, v)?;
    Ok((0..game.n_states())
        .map(|s| lookahead_at(game, v, player, s))
        .collect())
}

/// Minimax Bellman operator: the matrix-game value of each state's lookahead.
pub fn minimax_bellman(game: &StochasticGame, v: &[f64], player: Player) -> Result<Vec<f64>> {
    check_values(game, v)?;
    (0..game.n_states())
        .map(|s| matrix_game_value(&lookahead_at(game, v, player, s)).map(|g| g.value))
        .collect()
}

/// Result of iterating the minimax Bellman operator to its fixed point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimaxFixedPoint {
    pub value: Vec<f64>,
    /// `||B(v) - v||_inf` at the returned `v`.
    pub residual: f64,
    pub iterations: usize,
}

/// Iterates `B^i` from zero until the sup-norm residual is at most `tol`.
pub fn minimax_value_iteration(
    game: &StochasticGame,
    player: Player,
    tol: f64,
    max_iters: usize,
) -> Result<MinimaxFixedPoint> {
    let mut v = vec![0.0; game.n_states()];
    for it in 1..=max_iters {
        let next = minimax_bellman(game, &v, player)?;
        let residual = sup_dist(&next, &v);
        v = next;
        if residual <= tol {
            // `residual` bounds ||B(v_prev) - v_prev||; report the one at the
            // returned iterate, which is smaller by contraction.
            let check = sup_dist(&minimax_bellman(game, &v, player)?, &v);
            return Ok(MinimaxFixedPoint {
                value: v,
                residual: check,
                iterations: it,
            });
        }
    }
    let residual = sup_dist(&minimax_bellman(game, &v, player)?, &v);
    Err(Error::NoConvergence {
        iters: max_iters,
        residual,
    })
}

pub(crate) fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Single-agent MDP faced by `player` when the opponent's policy is fixed.
struct InducedMdp {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    /// `reward[s][a]`
    reward: Vec<Vec<f64>>,
    /// `transition[s][a]` is a distribution over next states.
    transition: Vec<Vec<Vec<f64>>>,
}

impl InducedMdp {
    fn new(game: &StochasticGame, player: Player, opponent: &Policy) -> Result<Self> {
        let opp = player.other();
        opponent.validate(game.n_states(), game.n_actions(opp), "opponent policy")?;
        let n = game.n_states();
        let na = game.n_actions(player);
        let nb = game.n_actions(opp);
        let mut reward = vec![vec![0.0; na]; n];
        let mut transition = vec![vec![vec![0.0; n]; na]; n];
        for s in 0..n {
            let r = game.reward(player, s);
            let pb = opponent.row(s);
            for a in 0..na {
                for b in 0..nb {
                    reward[s][a] += pb[b] * r[(a, b)];
                    let row = game.transition_row_for(player, s, a, b);
                    for (t, p) in transition[s][a].iter_mut().zip(row) {
                        *t += pb[b] * p;
                    }
                }
            }
        }
        Ok(InducedMdp {
            n_states: n,
            n_actions: na,
            gamma: game.gamma(),
            reward,
            transition,
        })
    }

    fn q(&self, v: &[f64], s: usize, a: usize) -> f64 {
        self.reward[s][a] + self.gamma * expect(&self.transition[s][a], v)
    }

    fn greedy(&self, v: &[f64]) -> (Vec<f64>, Vec<usize>) {
        (0..self.n_states)
            .map(|s| {
                (0..self.n_actions).map(|a| (self.q(v, s, a), a)).fold(
                    (f64::NEG_INFINITY, 0),
                    |best, cur| if cur.0 > best.0 { cur } else { best },
                )
            })
            .unzip()
    }
}

/// Optimal values of `player` against a fixed opponent, with a greedy policy
/// attaining them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestResponse {
    pub value: Vec<f64>,
    /// Deterministic best-response action per state.
    pub policy: Vec<usize>,
    pub iterations: usize,
}

/// Solves the MDP induced by fixing the opponent's policy, by value iteration
/// from zero. Iteration stops once successive iterates are within
/// `tol (1 - gamma) / (2 gamma)`, so the returned values are within `tol / 2`
/// of optimal.
pub fn best_response_value(
    game: &StochasticGame,
    player: Player,
    opponent: &Policy,
    tol: f64,
) -> Result<BestResponse> {
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let mdp = InducedMdp::new(game, player, opponent)?;
    let gamma = game.gamma();
    let threshold = tol * (1.0 - gamma) / (2.0 * gamma);
    let mut v = vec![0.0; mdp.n_states];
    let mut iterations = 0;
    loop {
        let (next, policy) = mdp.greedy(&v);
        iterations += 1;
        let delta = sup_dist(&next, &v);
        v = next;
        if delta <= threshold {
            return Ok(BestResponse {
                value: v,
                policy,
                iterations,
            });
        }
    }
}

/// Exact discounted values `v_pi^i` of a joint policy from `player`'s side,
/// solving `(I - gamma P_pi) v = r_pi`.
pub fn policy_evaluation(
    game: &StochasticGame,
    joint: &JointPolicy,
    player: Player,
) -> Result<Vec<f64>> {
    joint.validate_stochastic(game)?;
    let n = game.n_states();
    let own = joint.get(player);
    let opp = joint.get(player.other());
    let mut r = DVector::zeros(n);
    let mut m = DMatrix::identity(n, n);
    for s in 0..n {
        let rew = game.reward(player, s);
        for (a, &pa) in own.row(s).iter().enumerate() {
            for (b, &pb) in opp.row(s).iter().enumerate() {
                let w = pa * pb;
                if w == 0.0 {
                    continue;
                }
                r[s] += w * rew[(a, b)];
                for (t, &p) in game.transition_row_for(player, s, a, b).iter().enumerate() {
                    m[(s, t)] -= game.gamma() * w * p;
                }
            }
        }
    }
    let v = m
        .lu()
        .solve(&r)
        .ok_or_else(|| Error::Solver("singular policy-evaluation system".into()))?;
    Ok(v.iter().cloned().collect())
}

/// `E_{S ~ p_o}[v(S)]`.
pub fn expected_utility(game: &StochasticGame, v: &[f64]) -> f64 {
    expect(game.initial_dist(), v)
}
