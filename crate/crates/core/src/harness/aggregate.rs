//! Per-index statistics over trajectories and log-log rate fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::{Index, Metric, TrajectoryRecord};

/// Statistics of one metric across trajectories at every recorded index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSeries {
    pub metric: Metric,
    pub index: Vec<Index>,
    pub mean: Vec<f64>,
    /// Population standard deviation (0 for a single trajectory).
    pub std: Vec<f64>,
    pub median: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// Number of trajectories.
    pub n: usize,
}

impl AggregateSeries {
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// OLS slope of `log(mean)` against `log(k)` over `k >= k_min`.
    pub fn rate_fit(&self, k_min: u64) -> Result<f64> {
        let points: Vec<(u64, f64)> = self
            .index
            .iter()
            .map(|i| i.k)
            .zip(self.mean.iter().copied())
            .collect();
        rate_fit(&points, k_min)
    }
}

fn median_of(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Elementwise statistics over runs that share an identical index grid per
/// metric. Series are returned in the metric order of the first run.
pub fn aggregate(runs: &[TrajectoryRecord]) -> Result<Vec<AggregateSeries>> {
    let first = runs
        .first()
        .ok_or_else(|| Error::GridMismatch("no runs to aggregate".into()))?;
    let metrics = first.metrics();
    for (j, run) in runs.iter().enumerate().skip(1) {
        if run.metrics() != metrics {
            return Err(Error::GridMismatch(format!(
                "run {j} records a different set of metrics"
            )));
        }
    }
    let n = runs.len();
    let mut out = Vec::with_capacity(metrics.len());
    for metric in metrics {
        let columns: Vec<Vec<(Index, f64)>> = runs.iter().map(|r| r.metric(metric)).collect();
        let index: Vec<Index> = columns[0].iter().map(|&(i, _)| i).collect();
        for (j, col) in columns.iter().enumerate().skip(1) {
            if col.len() != index.len() || col.iter().zip(&index).any(|(a, b)| a.0 != *b) {
                return Err(Error::GridMismatch(format!(
                    "run {j} has a different index grid for {metric}"
                )));
            }
        }
        let mut series = AggregateSeries {
            metric,
            index,
            mean: Vec::new(),
            std: Vec::new(),
            median: Vec::new(),
            min: Vec::new(),
            max: Vec::new(),
            n,
        };
        let mut values = vec![0.0; n];
        for p in 0..series.index.len() {
            for (v, col) in values.iter_mut().zip(&columns) {
                *v = col[p].1;
            }
            let mean = values.iter().sum::<f64>() / n as f64;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            series.mean.push(mean);
            series.std.push(var.sqrt());
            series
                .min
                .push(values.iter().copied().fold(f64::INFINITY, f64::min));
            series
                .max
                .push(values.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            series.median.push(median_of(&mut values));
        }
        out.push(series);
    }
    Ok(out)
}

/// Ordinary least-squares slope of `log(value)` against `log(k)` over points
/// with `k >= k_min`.
pub fn rate_fit(points: &[(u64, f64)], k_min: u64) -> Result<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(k, v) in points.iter().filter(|p| p.0 >= k_min) {
        if !(v > 0.0) || k == 0 {
            return Err(Error::NonPositiveValues { index: k, value: v });
        }
        xs.push((k as f64).ln());
        ys.push(v.ln());
    }
    if xs.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "rate fit needs at least two points at or beyond k = {k_min}"
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidConfig(
            "rate fit needs at least two distinct indices".into(),
        ));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::JointPolicy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn record(values: &[(u64, f64)]) -> TrajectoryRecord {
        let mut r = TrajectoryRecord {
            config_echo: serde_json::Value::Null,
            warnings: vec![],
            series: vec![],
            final_policy: JointPolicy::matrix(vec![1.0], vec![1.0]),
            final_q: [vec![], vec![]],
            final_v: None,
        };
        for &(k, v) in values {
            r.push(Index { t: 0, k }, Metric::Ng, v);
        }
        r
    }

    #[test]
    fn single_run_and_symmetric_pair() {
        let a = aggregate(&[record(&[(1, 0.5), (2, 0.25)])]).unwrap();
        assert_eq!(a[0].mean, vec![0.5, 0.25]);
        assert_eq!(a[0].std, vec![0.0, 0.0]);
        assert_eq!(a[0].n, 1);
        let a = aggregate(&[record(&[(1, 0.3)]), record(&[(1, -0.3)])]).unwrap();
        assert_eq!(a[0].mean, vec![0.0]);
        assert_eq!(a[0].median, vec![0.0]);
    }

    #[test]
    fn grid_mismatch() {
        let err = aggregate(&[record(&[(1, 0.3)]), record(&[(2, 0.3)])]).unwrap_err();
        assert!(matches!(err, Error::GridMismatch(_)));
        let err = aggregate(&[record(&[(1, 0.3)]), record(&[(1, 0.3), (2, 0.1)])]).unwrap_err();
        assert!(matches!(err, Error::GridMismatch(_)));
        assert!(matches!(
            aggregate(&[]).unwrap_err(),
            Error::GridMismatch(_)
        ));
    }

    #[test]
    fn statistics_match_two_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let grid: Vec<u64> = (1..=30).collect();
        let table: Vec<Vec<f64>> = (0..100)
            .map(|_| grid.iter().map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let runs: Vec<_> = table
            .iter()
            .map(|row| {
                record(
                    &grid
                        .iter()
                        .copied()
                        .zip(row.iter().copied())
                        .collect::<Vec<_>>(),
                )
            })
            .collect();
        let a = &aggregate(&runs).unwrap()[0];
        for p in 0..grid.len() {
            let col: Vec<f64> = table.iter().map(|r| r[p]).collect();
            let mean = col.iter().sum::<f64>() / 100.0;
            let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 100.0;
            assert!((a.mean[p] - mean).abs() < 1e-12);
            assert!((a.std[p] - var.sqrt()).abs() < 1e-12);
            let mut sorted = col.clone();
            sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
            assert_eq!(a.median[p], 0.5 * (sorted[49] + sorted[50]));
            assert!(a.min[p] <= a.median[p] && a.median[p] <= a.max[p]);
        }
    }

    #[test]
    fn rate_fit_examples() {
        let exact: Vec<(u64, f64)> = (1..=50)
            .map(|k| (k * 100, 3.0 / (k * 100) as f64))
            .collect();
        assert!((rate_fit(&exact, 100).unwrap() + 1.0).abs() < 1e-9);
        let flat: Vec<(u64, f64)> = (1..=10).map(|k| (k, 0.7)).collect();
        assert!(rate_fit(&flat, 1).unwrap().abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noisy: Vec<(u64, f64)> = (0..20)
            .map(|i| {
                let k = (1000.0 * 100f64.powf(i as f64 / 19.0)).round() as u64;
                let c = 2.0 / k as f64;
                let z: f64 = (0..12).map(|_| rng.gen::<f64>()).sum::<f64>() - 6.0;
                (k, c + 0.01 * c * z)
            })
            .collect();
        let slope = rate_fit(&noisy, 1000).unwrap();
        assert!((-1.1..=-0.9).contains(&slope), "{slope}");

        let err = rate_fit(&[(1, 1.0), (2, 0.0), (3, 0.5)], 1).unwrap_err();
        assert!(matches!(err, Error::NonPositiveValues { index: 2, .. }));
        // Non-positive values before k_min are ignored.
        assert!(rate_fit(&[(1, -1.0), (2, 0.5), (4, 0.25)], 2).is_ok());
    }
}
