//! Game descriptions, policies and their validation.
//!
//! Payoffs are stored from each player's own perspective: `R1` is indexed
//! `(a1, a2)` and `R2` is indexed `(a2, a1)`, so in the zero-sum case
//! `R1 + R2^T = 0`. Every payoff must lie in `[-1, 1]`; out-of-range games are
//! rejected rather than rescaled.

use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for the zero-sum check, transition row sums and
/// probability vectors.
pub const EXACT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub const BOTH: [Player; 2] = [Player::One, Player::Two];

    pub fn other(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Player::One => 0,
            Player::Two => 1,
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Player::One => write!(f, "1"),
            Player::Two => write!(f, "2"),
        }
    }
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>> {
    let n_rows = rows.len();
    if n_rows == 0 {
        return Err(Error::DimensionMismatch(format!("{name} has no rows")));
    }
    let n_cols = rows[0].len();
    if n_cols == 0 {
        return Err(Error::DimensionMismatch(format!("{name} has no columns")));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n_cols) {
        return Err(Error::DimensionMismatch(format!(
            "{name} row {i} has {} entries, expected {n_cols}",
            r.len()
        )));
    }
    Ok(DMatrix::from_fn(n_rows, n_cols, |i, j| rows[i][j]))
}

pub(crate) fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn check_payoffs(m: &DMatrix<f64>, name: &str) -> Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            if !v.is_finite() {
                return Err(Error::NonFiniteInput(format!("{name}[{i}][{j}]")));
            }
            if v.abs() > 1.0 {
                return Err(Error::PayoffOutOfRange {
                    location: format!("{name}[{i}][{j}]"),
                    value: v,
                });
            }
        }
    }
    Ok(())
}

/// Largest entry of `|r1 + r2^T|` together with its location.
fn zero_sum_residual(r1: &DMatrix<f64>, r2: &DMatrix<f64>) -> (f64, usize, usize) {
    let mut worst = (0.0, 0, 0);
    for i in 0..r1.nrows() {
        for j in 0..r1.ncols() {
            let d = (r1[(i, j)] + r2[(j, i)]).abs();
            if d > worst.0 {
                worst = (d, i, j);
            }
        }
    }
    worst
}

/// A validated two-player matrix game.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGame {
    r1: DMatrix<f64>,
    r2: DMatrix<f64>,
    zero_sum: bool,
}

impl MatrixGame {
    /// Validates a zero-sum payoff pair.
    pub fn new(r1: DMatrix<f64>, r2: DMatrix<f64>) -> Result<Self> {
        Self::validate(r1, r2, true)
    }

    /// Builds the zero-sum game with `R2 = -R1^T`.
    pub fn from_r1(r1: DMatrix<f64>) -> Result<Self> {
        let r2 = -r1.transpose();
        Self::new(r1, r2)
    }

    /// Validates a payoff pair that need not be zero-sum. Such games are only
    /// meaningful for the generalized gap diagnostic.
    pub fn general(r1: DMatrix<f64>, r2: DMatrix<f64>) -> Result<Self> {
        Self::validate(r1, r2, false)
    }

    fn validate(r1: DMatrix<f64>, r2: DMatrix<f64>, require_zero_sum: bool) -> Result<Self> {
        if r1.nrows() == 0 || r1.ncols() == 0 {
            return Err(Error::DimensionMismatch("empty payoff matrix".into()));
        }
        if r2.nrows() != r1.ncols() || r2.ncols() != r1.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "R1 is {}x{} so R2 must be {}x{}, got {}x{}",
                r1.nrows(),
                r1.ncols(),
                r1.ncols(),
                r1.nrows(),
                r2.nrows(),
                r2.ncols()
            )));
        }
        check_payoffs(&r1, "R1")?;
        check_payoffs(&r2, "R2")?;
        let (residual, i, j) = zero_sum_residual(&r1, &r2);
        let zero_sum = residual <= EXACT_TOL;
        if require_zero_sum && !zero_sum {
            return Err(Error::NotZeroSum {
                location: format!("({i}, {j})"),
                residual,
            });
        }
        Ok(MatrixGame { r1, r2, zero_sum })
    }

    pub fn n_actions(&self, player: Player) -> usize {
        match player {
            Player::One => self.r1.nrows(),
            Player::Two => self.r2.nrows(),
        }
    }

    pub fn a_max(&self) -> usize {
        self.r1.nrows().max(self.r1.ncols())
    }

    /// Payoff matrix of `player`, rows indexed by its own action.
    pub fn payoff(&self, player: Player) -> &DMatrix<f64> {
        match player {
            Player::One => &self.r1,
            Player::Two => &self.r2,
        }
    }

    pub fn is_zero_sum(&self) -> bool {
        self.zero_sum
    }

    /// Re-runs validation on this game's payoffs.
    pub fn revalidate(&self) -> Result<Self> {
        Self::validate(self.r1.clone(), self.r2.clone(), self.zero_sum)
    }

    pub fn to_spec(&self) -> GameSpec {
        GameSpec::Matrix {
            r1: matrix_to_rows(&self.r1),
            r2: Some(matrix_to_rows(&self.r2)),
        }
    }

    pub fn matching_pennies() -> Self {
        Self::from_r1(DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]))
            .expect("matching pennies is valid")
    }

    pub fn rock_paper_scissors() -> Self {
        Self::from_r1(DMatrix::from_row_slice(
            3,
            3,
            &[0.0, -1.0, 1.0, 1.0, 0.0, -1.0, -1.0, 1.0, 0.0],
        ))
        .expect("rock-paper-scissors is valid")
    }

    /// The 3x3 game with corner payoff `n`, divided by `max(n, 1)` so that all
    /// payoffs lie in `[-1, 1]`. Scaling leaves the equilibria unchanged.
    pub fn corner_game(n: f64) -> Result<Self> {
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "corner game needs N > 0, got {n}"
            )));
        }
        let scale = n.max(1.0);
        let raw = [n, 1.0, -1.0, -1.0, 0.0, 1.0, 1.0, -1.0, 0.0];
        let scaled: Vec<f64> = raw.iter().map(|v| v / scale).collect();
        Self::from_r1(DMatrix::from_row_slice(3, 3, &scaled))
    }
}

/// A validated tabular two-player zero-sum stochastic game.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticGame {
    n_states: usize,
    n1: usize,
    n2: usize,
    /// Flat `p(s' | s, a1, a2)` stored at `((s * n1 + a1) * n2 + a2) * n_states + s'`.
    transition: Vec<f64>,
    r1: Vec<DMatrix<f64>>,
    r2: Vec<DMatrix<f64>>,
    gamma: f64,
    initial_dist: Vec<f64>,
    initial_dist_defaulted: bool,
}

impl StochasticGame {
    /// Validates a stochastic game. `r2` defaults to the antisymmetric counterpart
    /// of `r1` and `initial_dist` to the uniform distribution.
    pub fn new(
        r1: Vec<DMatrix<f64>>,
        r2: Option<Vec<DMatrix<f64>>>,
        transition: Vec<Vec<Vec<Vec<f64>>>>,
        gamma: f64,
        initial_dist: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n_states = r1.len();
        if n_states == 0 {
            return Err(Error::DimensionMismatch("game has no states".into()));
        }
        let (n1, n2) = (r1[0].nrows(), r1[0].ncols());
        if n1 == 0 || n2 == 0 {
            return Err(Error::DimensionMismatch("empty action set".into()));
        }
        for (s, m) in r1.iter().enumerate() {
            if m.nrows() != n1 || m.ncols() != n2 {
                return Err(Error::DimensionMismatch(format!(
                    "R1 state {s} is {}x{}, expected {n1}x{n2}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        let r2 = r2.unwrap_or_else(|| r1.iter().map(|m| -m.transpose()).collect());
        if r2.len() != n_states {
            return Err(Error::DimensionMismatch(format!(
                "R2 has {} states, expected {n_states}",
                r2.len()
            )));
        }
        for (s, m) in r2.iter().enumerate() {
            if m.nrows() != n2 || m.ncols() != n1 {
                return Err(Error::DimensionMismatch(format!(
                    "R2 state {s} is {}x{}, expected {n2}x{n1}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::BadDiscount(gamma));
        }

        if transition.len() != n_states {
            return Err(Error::DimensionMismatch(format!(
                "transition has {} states, expected {n_states}",
                transition.len()
            )));
        }
        let mut flat = Vec::with_capacity(n_states * n1 * n2 * n_states);
        for (s, per_a1) in transition.iter().enumerate() {
            if per_a1.len() != n1 {
                return Err(Error::DimensionMismatch(format!(
                    "transition[{s}] has {} rows, expected {n1}",
                    per_a1.len()
                )));
            }
            for (a1, per_a2) in per_a1.iter().enumerate() {
                if per_a2.len() != n2 {
                    return Err(Error::DimensionMismatch(format!(
                        "transition[{s}][{a1}] has {} rows, expected {n2}",
                        per_a2.len()
                    )));
                }
                for (a2, row) in per_a2.iter().enumerate() {
                    if row.len() != n_states {
                        return Err(Error::DimensionMismatch(format!(
                            "transition[{s}][{a1}][{a2}] has {} entries, expected {n_states}",
                            row.len()
                        )));
                    }
                    check_distribution_row(row).map_err(|(sum, min)| Error::BadTransitionRow {
                        location: format!("({s}, {a1}, {a2})"),
                        sum,
                        min,
                    })?;
                    flat.extend_from_slice(row);
                }
            }
        }

        for s in 0..n_states {
            check_payoffs(&r1[s], &format!("R1[{s}]"))?;
            check_payoffs(&r2[s], &format!("R2[{s}]"))?;
            let (residual, i, j) = zero_sum_residual(&r1[s], &r2[s]);
            if residual > EXACT_TOL {
                return Err(Error::NotZeroSum {
                    location: format!("({s}, {i}, {j})"),
                    residual,
                });
            }
        }

        let initial_dist_defaulted = initial_dist.is_none();
        let initial_dist = initial_dist.unwrap_or_else(|| vec![1.0 / n_states as f64; n_states]);
        if initial_dist.len() != n_states {
            return Err(Error::DimensionMismatch(format!(
                "initial_dist has {} entries, expected {n_states}",
                initial_dist.len()
            )));
        }
        check_distribution_row(&initial_dist).map_err(|(sum, min)| {
            Error::NotADistribution(format!("initial_dist (sum {sum}, min {min})"))
        })?;

        Ok(StochasticGame {
            n_states,
            n1,
            n2,
            transition: flat,
            r1,
            r2,
            gamma,
            initial_dist,
            initial_dist_defaulted,
        })
    }

    /// Embeds a matrix game as a single absorbing state with discount `gamma`.
    pub fn single_state(game: &MatrixGame, gamma: f64) -> Result<Self> {
        let (n1, n2) = (game.n_actions(Player::One), game.n_actions(Player::Two));
        let transition = vec![vec![vec![vec![1.0]; n2]; n1]];
        Self::new(
            vec![game.payoff(Player::One).clone()],
            Some(vec![game.payoff(Player::Two).clone()]),
            transition,
            gamma,
            None,
        )
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self, player: Player) -> usize {
        match player {
            Player::One => self.n1,
            Player::Two => self.n2,
        }
    }

    pub fn a_max(&self) -> usize {
        self.n1.max(self.n2)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    /// True when no initial distribution was supplied and the uniform default is in use.
    pub fn initial_dist_defaulted(&self) -> bool {
        self.initial_dist_defaulted
    }

    /// `p(. | s, a1, a2)`.
    pub fn transition_row(&self, s: usize, a1: usize, a2: usize) -> &[f64] {
        let start = ((s * self.n1 + a1) * self.n2 + a2) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    /// Transition row addressed from `player`'s perspective.
    pub fn transition_row_for(&self, player: Player, s: usize, own: usize, opp: usize) -> &[f64] {
        match player {
            Player::One => self.transition_row(s, own, opp),
            Player::Two => self.transition_row(s, opp, own),
        }
    }

    /// Reward matrix of `player` at state `s`, rows indexed by its own action.
    pub fn reward(&self, player: Player, s: usize) -> &DMatrix<f64> {
        match player {
            Player::One => &self.r1[s],
            Player::Two => &self.r2[s],
        }
    }

    pub fn revalidate(&self) -> Result<Self> {
        let mut g = Self::new(
            self.r1.clone(),
            Some(self.r2.clone()),
            self.transition_tensor(),
            self.gamma,
            Some(self.initial_dist.clone()),
        )?;
        g.initial_dist_defaulted = self.initial_dist_defaulted;
        Ok(g)
    }

    pub fn transition_tensor(&self) -> Vec<Vec<Vec<Vec<f64>>>> {
        (0..self.n_states)
            .map(|s| {
                (0..self.n1)
                    .map(|a1| {
                        (0..self.n2)
                            .map(|a2| self.transition_row(s, a1, a2).to_vec())
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    pub fn to_spec(&self) -> GameSpec {
        GameSpec::Stochastic {
            r1: self.r1.iter().map(matrix_to_rows).collect(),
            r2: Some(self.r2.iter().map(matrix_to_rows).collect()),
            transition: self.transition_tensor(),
            gamma: self.gamma,
            initial_dist: if self.initial_dist_defaulted {
                None
            } else {
                Some(self.initial_dist.clone())
            },
        }
    }
}

fn check_distribution_row(row: &[f64]) -> std::result::Result<(), (f64, f64)> {
    let sum: f64 = row.iter().sum();
    let min = row.iter().cloned().fold(f64::INFINITY, f64::min);
    if row.is_empty() || !sum.is_finite() || min < 0.0 || (sum - 1.0).abs() > EXACT_TOL {
        Err((sum, min))
    } else {
        Ok(())
    }
}

/// Checks that `row` is a probability vector within [`EXACT_TOL`].
pub fn check_distribution(row: &[f64], what: &str) -> Result<()> {
    check_distribution_row(row)
        .map_err(|(sum, min)| Error::NotADistribution(format!("{what} (sum {sum}, min {min})")))
}

/// Per-state mixed strategy of one player. Matrix games use a single row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Policy(pub Vec<Vec<f64>>);

impl Policy {
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Policy(vec![vec![1.0 / n_actions as f64; n_actions]; n_states])
    }

    pub fn single(row: Vec<f64>) -> Self {
        Policy(vec![row])
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.0[s]
    }

    pub fn n_states(&self) -> usize {
        self.0.len()
    }

    pub fn min_entry(&self) -> f64 {
        self.0
            .iter()
            .flat_map(|r| r.iter().cloned())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self, n_states: usize, n_actions: usize, what: &str) -> Result<()> {
        if self.0.len() != n_states {
            return Err(Error::DimensionMismatch(format!(
                "{what} has {} rows, expected {n_states}",
                self.0.len()
            )));
        }
        for (s, row) in self.0.iter().enumerate() {
            if row.len() != n_actions {
                return Err(Error::DimensionMismatch(format!(
                    "{what} row {s} has {} entries, expected {n_actions}",
                    row.len()
                )));
            }
            check_distribution(row, &format!("{what} row {s}"))?;
        }
        Ok(())
    }
}

/// Policies of both players.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPolicy {
    pub pi1: Policy,
    pub pi2: Policy,
}

impl JointPolicy {
    pub fn new(pi1: Policy, pi2: Policy) -> Self {
        JointPolicy { pi1, pi2 }
    }

    /// Joint policy of a matrix game.
    pub fn matrix(pi1: Vec<f64>, pi2: Vec<f64>) -> Self {
        JointPolicy {
            pi1: Policy::single(pi1),
            pi2: Policy::single(pi2),
        }
    }

    pub fn get(&self, player: Player) -> &Policy {
        match player {
            Player::One => &self.pi1,
            Player::Two => &self.pi2,
        }
    }

    pub fn get_mut(&mut self, player: Player) -> &mut Policy {
        match player {
            Player::One => &mut self.pi1,
            Player::Two => &mut self.pi2,
        }
    }

    pub fn validate_matrix(&self, game: &MatrixGame) -> Result<()> {
        self.pi1.validate(1, game.n_actions(Player::One), "pi1")?;
        self.pi2.validate(1, game.n_actions(Player::Two), "pi2")
    }

    pub fn validate_stochastic(&self, game: &StochasticGame) -> Result<()> {
        self.pi1
            .validate(game.n_states(), game.n_actions(Player::One), "pi1")?;
        self.pi2
            .validate(game.n_states(), game.n_actions(Player::Two), "pi2")
    }
}

/// On-disk policy document: each player's strategy is either a flat vector
/// (matrix games) or one row per state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyFile {
    pub pi1: PolicyRows,
    pub pi2: PolicyRows,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolicyRows {
    Single(Vec<f64>),
    PerState(Vec<Vec<f64>>),
}

impl From<PolicyRows> for Policy {
    fn from(rows: PolicyRows) -> Self {
        match rows {
            PolicyRows::Single(r) => Policy::single(r),
            PolicyRows::PerState(rs) => Policy(rs),
        }
    }
}

impl PolicyFile {
    pub fn load(path: &Path) -> Result<JointPolicy> {
        let text = std::fs::read_to_string(path)?;
        let file: PolicyFile = serde_json::from_str(&text)?;
        Ok(JointPolicy::new(file.pi1.into(), file.pi2.into()))
    }
}

/// Raw game document as read from disk. `R2` may be omitted, in which case the
/// zero-sum counterpart of `R1` is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum GameSpec {
    Matrix {
        #[serde(rename = "R1")]
        r1: Vec<Vec<f64>>,
        #[serde(rename = "R2", default, skip_serializing_if = "Option::is_none")]
        r2: Option<Vec<Vec<f64>>>,
    },
    Stochastic {
        #[serde(rename = "R1")]
        r1: Vec<Vec<Vec<f64>>>,
        #[serde(rename = "R2", default, skip_serializing_if = "Option::is_none")]
        r2: Option<Vec<Vec<Vec<f64>>>>,
        transition: Vec<Vec<Vec<Vec<f64>>>>,
        gamma: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        initial_dist: Option<Vec<f64>>,
    },
}

/// Either kind of validated game.
#[derive(Debug, Clone, PartialEq)]
pub enum Game {
    Matrix(MatrixGame),
    Stochastic(StochasticGame),
}

impl GameSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<Game> {
        match self {
            GameSpec::Matrix { r1, r2 } => {
                validate_matrix_game(r1, r2.as_deref()).map(Game::Matrix)
            }
            GameSpec::Stochastic {
                r1,
                r2,
                transition,
                gamma,
                initial_dist,
            } => {
                let r1 = r1
                    .iter()
                    .enumerate()
                    .map(|(s, m)| matrix_from_rows(m, &format!("R1[{s}]")))
                    .collect::<Result<Vec<_>>>()?;
                let r2 = r2
                    .as_ref()
                    .map(|ms| {
                        ms.iter()
                            .enumerate()
                            .map(|(s, m)| matrix_from_rows(m, &format!("R2[{s}]")))
                            .collect::<Result<Vec<_>>>()
                    })
                    .transpose()?;
                StochasticGame::new(r1, r2, transition.clone(), *gamma, initial_dist.clone())
                    .map(Game::Stochastic)
            }
        }
    }
}

/// Validates a zero-sum matrix game given as nested rows. `r2` defaults to `-R1^T`.
pub fn validate_matrix_game(r1: &[Vec<f64>], r2: Option<&[Vec<f64>]>) -> Result<MatrixGame> {
    let r1 = matrix_from_rows(r1, "R1")?;
    match r2 {
        Some(r2) => MatrixGame::new(r1, matrix_from_rows(r2, "R2")?),
        None => MatrixGame::from_r1(r1),
    }
}

/// Resolves a `--game` argument: a file path, or one of `builtin:mp`,
/// `builtin:rps`, `builtin:appF:N=<n>` (the corner game, see [`MatrixGame::corner_game`]).
pub fn resolve_game(source: &str) -> Result<Game> {
    if let Some(name) = source.strip_prefix("builtin:") {
        return match name {
            "mp" => Ok(Game::Matrix(MatrixGame::matching_pennies())),
            "rps" => Ok(Game::Matrix(MatrixGame::rock_paper_scissors())),
            other => {
                let n = other.strip_prefix("appF:N=").ok_or_else(|| {
                    Error::InvalidConfig(format!("unknown builtin game `{other}`"))
                })?;
                let n: f64 = n
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("bad N in `{other}`")))?;
                MatrixGame::corner_game(n).map(Game::Matrix)
            }
        };
    }
    GameSpec::load(Path::new(source))?.validate()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matching_pennies_validates() {
        let r1 = vec![vec![1.0, -1.0], vec![-1.0, 1.0]];
        let r2 = vec![vec![-1.0, 1.0], vec![1.0, -1.0]];
        let g = validate_matrix_game(&r1, Some(&r2)).unwrap();
        assert_eq!(g.a_max(), 2);
        assert!(g.is_zero_sum());
    }

    #[test]
    fn payoff_out_of_range_rejected() {
        let err = validate_matrix_game(&[vec![2.0]], Some(&[vec![-2.0]])).unwrap_err();
        assert!(matches!(err, Error::PayoffOutOfRange { .. }));
    }

    #[test]
    fn non_zero_sum_rejected() {
        let r1 = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let r2 = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        let err = validate_matrix_game(&r1, Some(&r2)).unwrap_err();
        assert!(matches!(err, Error::NotZeroSum { .. }));
        // The diagnostic constructor accepts it.
        let g = MatrixGame::general(matrix_from_rows(&r1, "R1").unwrap(), DMatrix::zeros(2, 2))
            .unwrap();
        assert!(!g.is_zero_sum());
    }

    #[test]
    fn ragged_and_mismatched_shapes_rejected() {
        let err = validate_matrix_game(&[vec![0.0, 0.0], vec![0.0]], None).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
        let err = validate_matrix_game(&[vec![0.0, 0.0]], Some(&[vec![0.0, 0.0]])).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
    }

    #[test]
    fn single_state_embedding_validates() {
        let g = StochasticGame::single_state(&MatrixGame::matching_pennies(), 0.5).unwrap();
        assert_eq!(g.n_states(), 1);
        assert_eq!(g.transition_row(0, 1, 0), &[1.0]);
        assert!(g.initial_dist_defaulted());
        assert_eq!(g.initial_dist(), &[1.0]);
    }

    fn two_state(row: Vec<f64>, gamma: f64) -> Result<StochasticGame> {
        let r1 = vec![DMatrix::zeros(1, 1), DMatrix::zeros(1, 1)];
        let transition = vec![vec![vec![row]], vec![vec![vec![0.5, 0.5]]]];
        StochasticGame::new(r1, None, transition, gamma, None)
    }

    #[test]
    fn bad_transition_row_rejected() {
        let err = two_state(vec![0.5, 0.4], 0.5).unwrap_err();
        assert!(matches!(err, Error::BadTransitionRow { .. }));
        let err = two_state(vec![1.5, -0.5], 0.5).unwrap_err();
        assert!(matches!(err, Error::BadTransitionRow { .. }));
    }

    #[test]
    fn discount_must_be_open_interval() {
        assert_eq!(
            two_state(vec![0.5, 0.5], 1.0).unwrap_err(),
            Error::BadDiscount(1.0)
        );
        assert_eq!(
            two_state(vec![0.5, 0.5], 0.0).unwrap_err(),
            Error::BadDiscount(0.0)
        );
        assert!(two_state(vec![0.5, 0.5], 0.99).is_ok());
    }

    #[test]
    fn stochastic_zero_sum_checked() {
        let r1 = vec![DMatrix::from_element(1, 1, 0.5)];
        let r2 = vec![DMatrix::from_element(1, 1, 0.5)];
        let err =
            StochasticGame::new(r1, Some(r2), vec![vec![vec![vec![1.0]]]], 0.5, None).unwrap_err();
        assert!(matches!(err, Error::NotZeroSum { .. }));
    }

    #[test]
    fn game_spec_json_defaults_r2() {
        let spec = GameSpec::from_json(r#"{"type":"matrix","R1":[[0.5,-1],[0,1]]}"#).unwrap();
        let Game::Matrix(g) = spec.validate().unwrap() else {
            panic!("expected matrix game")
        };
        assert_eq!(g.payoff(Player::Two)[(1, 0)], 1.0);
        assert_eq!(g.payoff(Player::Two)[(0, 1)], -0.0);

        let spec = GameSpec::from_json(
            r#"{"type":"stochastic","R1":[[[1,0]]],"transition":[[[[1.0],[1.0]]]],"gamma":0.9}"#,
        )
        .unwrap();
        let Game::Stochastic(g) = spec.validate().unwrap() else {
            panic!("expected stochastic game")
        };
        assert_eq!(g.reward(Player::Two, 0).shape(), (2, 1));
        assert_eq!(g.reward(Player::Two, 0)[(0, 0)], -1.0);
    }

    #[test]
    fn builtins_resolve() {
        assert!(matches!(resolve_game("builtin:mp"), Ok(Game::Matrix(_))));
        assert!(matches!(resolve_game("builtin:rps"), Ok(Game::Matrix(_))));
        let Ok(Game::Matrix(g)) = resolve_game("builtin:appF:N=5") else {
            panic!("corner game")
        };
        assert_eq!(g.payoff(Player::One)[(0, 0)], 1.0);
        assert!((g.payoff(Player::One)[(0, 1)] - 0.2).abs() < 1e-15);
        assert!(resolve_game("builtin:nope").is_err());
    }

    #[test]
    fn policy_validation() {
        let p = Policy::single(vec![0.3, 0.7]);
        assert!(p.validate(1, 2, "p").is_ok());
        assert!(Policy::single(vec![0.3, 0.6]).validate(1, 2, "p").is_err());
        assert!(Policy::single(vec![1.2, -0.2]).validate(1, 2, "p").is_err());
        assert!(p.validate(1, 3, "p").is_err());
    }
}
