//! Exact value of a finite two-player zero-sum matrix game.
//!
//! The payoff is shifted by `1 + max|X|` so that every entry is positive. The
//! column player's normalized program
//!
//! ```text
//! maximize 1^T z  subject to  X' z <= 1,  z >= 0
//! ```
//!
//! then has the slack basis as a feasible start, and its optimal dual is the
//! row player's `min 1^T y, X'^T y >= 1`. Both strategies come out of a single
//! dense tableau solved with Bland's rule.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-12;

/// Value of a matrix game with optimal strategies for both sides.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameValue {
    /// `max_x min_y x^T X y`.
    pub value: f64,
    /// Optimal mixed strategy of the row (maximizing) player.
    pub maximin: Vec<f64>,
    /// Optimal mixed strategy of the column (minimizing) player.
    pub minimax: Vec<f64>,
}

struct Tableau {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let cols = self.cols;
        let p = self.at(pr, pc);
        for c in 0..cols {
            self.data[pr * cols + c] /= p;
        }
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let f = self.at(r, pc);
            if f == 0.0 {
                continue;
            }
            for c in 0..cols {
                let delta = f * self.data[pr * cols + c];
                self.data[r * cols + c] -= delta;
            }
        }
        self.basis[pr] = pc;
    }
}

fn normalize(v: &mut [f64]) {
    for x in v.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let total: f64 = v.iter().sum();
    for x in v.iter_mut() {
        *x /= total;
    }
}

/// Solves the zero-sum game with row-player payoff `x`.
pub fn matrix_game_value(x: &DMatrix<f64>) -> Result<GameValue> {
    let (m, n) = x.shape();
    if m == 0 || n == 0 {
        return Err(Error::DimensionMismatch("empty payoff matrix".into()));
    }
    if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput(format!("payoff entry {bad}")));
    }
    let shift = 1.0 + x.amax();

    // Columns: z_0..z_{n-1}, slacks s_0..s_{m-1}, rhs. Last row is the objective.
    let cols = n + m + 1;
    let rows = m + 1;
    let mut t = Tableau {
        rows,
        cols,
        data: vec![0.0; rows * cols],
        basis: (n..n + m).collect(),
    };
    for i in 0..m {
        for j in 0..n {
            t.data[i * cols + j] = x[(i, j)] + shift;
        }
        t.data[i * cols + n + i] = 1.0;
        t.data[i * cols + cols - 1] = 1.0;
    }
    for j in 0..n {
        t.data[m * cols + j] = -1.0;
    }

    // Bland's rule guarantees termination; the bound only guards against
    // numerical breakdown.
    let max_pivots = 50 * (m + n + 1) * (m + n + 1);
    let mut pivots = 0;
    loop {
        let entering = (0..n + m).find(|&c| t.at(m, c) < -PIVOT_EPS);
        let Some(pc) = entering else { break };
        let mut leaving: Option<(usize, f64)> = None;
        for r in 0..m {
            let a = t.at(r, pc);
            if a > PIVOT_EPS {
                let ratio = t.at(r, cols - 1) / a;
                leaving = match leaving {
                    None => Some((r, ratio)),
                    Some((lr, lratio)) => {
                        if ratio < lratio - PIVOT_EPS
                            || (ratio <= lratio + PIVOT_EPS && t.basis[r] < t.basis[lr])
                        {
                            Some((r, ratio))
                        } else {
                            Some((lr, lratio))
                        }
                    }
                };
            }
        }
        let Some((pr, _)) = leaving else {
            return Err(Error::Solver(
                "unbounded program for a positive payoff matrix".into(),
            ));
        };
        t.pivot(pr, pc);
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::Solver(format!("no optimum after {pivots} pivots")));
        }
    }

    let optimum = t.at(m, cols - 1);
    if !(optimum > 0.0) {
        return Err(Error::Solver(format!("non-positive optimum {optimum}")));
    }
    let mut minimax = vec![0.0; n];
    for (r, &b) in t.basis.iter().enumerate() {
        if b < n {
            minimax[b] = t.at(r, cols - 1);
        }
    }
    let mut maximin: Vec<f64> = (0..m).map(|i| t.at(m, n + i)).collect();
    normalize(&mut minimax);
    normalize(&mut maximin);

    let value = 1.0 / optimum - shift;
    Ok(GameValue {
        value,
        maximin,
        minimax,
    })
}
