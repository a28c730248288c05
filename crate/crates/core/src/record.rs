//! Per-run output: sampled metric series plus final iterates.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::game::JointPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Nash gap.
    Ng,
    /// Entropy-regularized Nash gap (matrix games).
    NgTau,
    /// Smallest policy entry over both players (and all states).
    MinPi,
    /// Largest `|q|` over both players.
    QInf,
    /// Largest `|v|` over both players.
    VInf,
    /// `||v^1 + v^2||_inf`.
    LSum,
    /// `max_i ||v^i - v*^i||_inf` against the minimax fixed point.
    VErr,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Ng => "ng",
            Metric::NgTau => "ngtau",
            Metric::MinPi => "min_pi",
            Metric::QInf => "q_inf",
            Metric::VInf => "v_inf",
            Metric::LSum => "lsum",
            Metric::VErr => "v_err",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Position of a sample: outer iteration `t` (always 0 for matrix games) and
/// inner iteration `k`. Ordered lexicographically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Index {
    pub t: u64,
    pub k: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: u64,
    pub k: u64,
    pub metric: Metric,
    pub value: f64,
}

impl Sample {
    pub fn index(&self) -> Index {
        Index {
            t: self.t,
            k: self.k,
        }
    }
}

/// Output of one seeded run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    /// Full run configuration, including the seed.
    pub config_echo: serde_json::Value,
    pub warnings: Vec<String>,
    pub series: Vec<Sample>,
    pub final_policy: JointPolicy,
    pub final_q: [Vec<Vec<f64>>; 2],
    /// Value functions of both players (stochastic games only).
    pub final_v: Option<[Vec<f64>; 2]>,
}

impl TrajectoryRecord {
    pub(crate) fn push(&mut self, index: Index, metric: Metric, value: f64) {
        self.series.push(Sample {
            t: index.t,
            k: index.k,
            metric,
            value,
        });
    }

    /// Samples of one metric in recording order.
    pub fn metric(&self, metric: Metric) -> Vec<(Index, f64)> {
        self.series
            .iter()
            .filter(|s| s.metric == metric)
            .map(|s| (s.index(), s.value))
            .collect()
    }

    /// Metrics present, in first-appearance order.
    pub fn metrics(&self) -> Vec<Metric> {
        let mut seen = Vec::new();
        for s in &self.series {
            if !seen.contains(&s.metric) {
                seen.push(s.metric);
            }
        }
        seen
    }

    /// Last recorded value of `metric`.
    pub fn last(&self, metric: Metric) -> Option<f64> {
        self.series
            .iter()
            .rev()
            .find(|s| s.metric == metric)
            .map(|s| s.value)
    }

    /// Value of `metric` at `index`, if recorded.
    pub fn at(&self, metric: Metric, index: Index) -> Option<f64> {
        self.series
            .iter()
            .find(|s| s.metric == metric && s.index() == index)
            .map(|s| s.value)
    }

    /// True when indices are strictly increasing within every metric.
    pub fn indices_increasing(&self) -> bool {
        self.metrics()
            .into_iter()
            .all(|m| self.metric(m).windows(2).all(|w| w[0].0 < w[1].0))
    }
}
