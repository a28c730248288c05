use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::check_distribution;

/// Temperature and exploration mix for the smoothed best response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxParams {
    pub tau: f64,
    /// Weight of the uniform component; 0 gives the plain softmax.
    pub eps_bar: f64,
}

impl SoftmaxParams {
    pub fn new(tau: f64, eps_bar: f64) -> Result<Self> {
        let p = SoftmaxParams { tau, eps_bar };
        p.validate()?;
        Ok(p)
    }

    pub fn plain(tau: f64) -> Result<Self> {
        Self::new(tau, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if !(0.0..=1.0).contains(&self.eps_bar) {
            return Err(Error::InvalidConfig(format!(
                "eps_bar must lie in [0, 1], got {}",
                self.eps_bar
            )));
        }
        Ok(())
    }
}

fn check_finite(q: &[f64]) -> Result<()> {
    if q.is_empty() {
        return Err(Error::DimensionMismatch("empty logit vector".into()));
    }
    if let Some(i) = q.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput(format!("logit {i} is {}", q[i])));
    }
    Ok(())
}

/// Writes `softmax(q / tau)` into `out` using max subtraction. Inputs are assumed
/// finite and non-empty.
pub(crate) fn softmax_into(q: &[f64], tau: f64, out: &mut [f64]) {
    let max = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &v) in out.iter_mut().zip(q) {
        *o = ((v - max) / tau).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Mixes `out` (a softmax output) with the uniform distribution in place.
pub(crate) fn mix_uniform(out: &mut [f64], eps_bar: f64) {
    if eps_bar == 0.0 {
        return;
    }
    let floor = eps_bar / out.len() as f64;
    for o in out.iter_mut() {
        *o = floor + (1.0 - eps_bar) * *o;
    }
}

/// `tau * log(sum exp(x / tau))`, evaluated stably.
pub(crate) fn tau_logsumexp(x: &[f64], tau: f64) -> f64 {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = x.iter().map(|v| ((v - max) / tau).exp()).sum();
    max + tau * sum.ln()
}

/// Softmax with temperature `tau`.
pub fn softmax(q: &[f64], tau: f64) -> Result<Vec<f64>> {
    check_finite(q)?;
    SoftmaxParams::plain(tau)?;
    let mut out = vec![0.0; q.len()];
    softmax_into(q, tau, &mut out);
    Ok(out)
}

/// `eps_bar / |A| + (1 - eps_bar) * softmax(q, tau)`.
pub fn softmax_explore(q: &[f64], params: SoftmaxParams) -> Result<Vec<f64>> {
    check_finite(q)?;
    params.validate()?;
    let mut out = vec![0.0; q.len()];
    softmax_into(q, params.tau, &mut out);
    mix_uniform(&mut out, params.eps_bar);
    Ok(out)
}

/// Shannon entropy with `0 log 0 = 0`. No validation.
pub(crate) fn entropy_unchecked(mu: &[f64]) -> f64 {
    -mu.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// Shannon entropy (natural log) of a probability vector.
pub fn entropy(mu: &[f64]) -> Result<f64> {
    check_distribution(mu, "entropy argument")?;
    Ok(entropy_unchecked(mu).max(0.0))
}

/// The four learning dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsVariant {
    /// Smoothed best-response learning on a matrix game.
    MatrixPlain,
    /// Matrix-game learning with the uniform exploration mix.
    MatrixExplore,
    /// Value iteration with smoothed best-response inner loops.
    StochasticPlain,
    /// VI-SBR with the uniform exploration mix.
    StochasticExplore,
}

impl DynamicsVariant {
    pub fn is_explore(self) -> bool {
        matches!(self, Self::MatrixExplore | Self::StochasticExplore)
    }
}

/// Guaranteed lower bound on every policy entry produced by a dynamics variant.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExplorationBound(pub f64);

impl ExplorationBound {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// `1 / ((a_max - 1) exp(x) + 1)`, written so that large `x` underflows to 0
/// instead of producing NaN.
fn softmax_floor(a_max: usize, x: f64) -> f64 {
    let e = (-x).exp();
    e / ((a_max as f64 - 1.0) + e)
}

/// Lower bound on policy entries for `variant`. Stochastic variants need `gamma`.
///
/// For very small temperatures the plain bounds underflow to 0.
pub fn exploration_bound(
    variant: DynamicsVariant,
    params: SoftmaxParams,
    a_max: usize,
    gamma: Option<f64>,
) -> Result<ExplorationBound> {
    params.validate()?;
    if a_max == 0 {
        return Err(Error::DimensionMismatch("a_max must be positive".into()));
    }
    let a = a_max as f64;
    let value = match variant {
        DynamicsVariant::MatrixPlain => softmax_floor(a_max, 2.0 / params.tau),
        DynamicsVariant::MatrixExplore => {
            params.eps_bar / a + (1.0 - params.eps_bar) * softmax_floor(a_max, 2.0 / params.tau)
        }
        DynamicsVariant::StochasticPlain => {
            let gamma = gamma.ok_or(Error::MissingGamma)?;
            softmax_floor(a_max, 2.0 / ((1.0 - gamma) * params.tau))
        }
        DynamicsVariant::StochasticExplore => {
            gamma.ok_or(Error::MissingGamma)?;
            params.eps_bar / a
        }
    };
    Ok(ExplorationBound(value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const E: f64 = std::f64::consts::E;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0, 0.0], 1.0).unwrap(), vec![0.5, 0.5]);
        let s = softmax(&[1.0, 0.0], 1.0).unwrap();
        assert!(close(&s, &[E / (E + 1.0), 1.0 / (E + 1.0)], 1e-15));
        assert!((s[0] - 0.731058).abs() < 1e-6);
        assert!(close(
            &softmax(&[1.0, 0.0], 0.5).unwrap(),
            &softmax(&[2.0, 0.0], 1.0).unwrap(),
            1e-15
        ));
    }

    #[test]
    fn softmax_small_temperature_does_not_overflow() {
        let s = softmax(&[1.0, 0.999, -1.0], 1e-4).unwrap();
        assert!(s.iter().all(|v| v.is_finite()));
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(s[0] > 0.99);
    }

    #[test]
    fn softmax_rejects_bad_input() {
        assert!(matches!(
            softmax(&[f64::NAN, 0.0], 1.0),
            Err(Error::NonFiniteInput(_))
        ));
        assert!(matches!(
            softmax(&[f64::INFINITY], 1.0),
            Err(Error::NonFiniteInput(_))
        ));
        assert!(softmax(&[0.0], 0.0).is_err());
    }

    #[test]
    fn softmax_explore_examples() {
        let q = [0.3, -0.7, 0.1];
        let p0 = SoftmaxParams::new(0.4, 0.0).unwrap();
        assert_eq!(softmax_explore(&q, p0).unwrap(), softmax(&q, 0.4).unwrap());
        let p1 = SoftmaxParams::new(0.4, 1.0).unwrap();
        assert!(close(
            &softmax_explore(&q, p1).unwrap(),
            &[1.0 / 3.0; 3],
            1e-15
        ));
        let s = softmax_explore(&[1.0, 0.0], SoftmaxParams::new(1.0, 0.5).unwrap()).unwrap();
        assert!(close(
            &s,
            &[0.25 + 0.5 * E / (E + 1.0), 0.25 + 0.5 / (E + 1.0)],
            1e-15
        ));
        assert!((s[0] - 0.615529).abs() < 1e-6);
        assert!((s[1] - 0.384470).abs() < 1e-6);
    }

    #[test]
    fn entropy_examples() {
        assert!((entropy(&[1.0 / 3.0; 3]).unwrap() - 3f64.ln()).abs() < 1e-15);
        assert_eq!(entropy(&[1.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!((entropy(&[0.5, 0.5]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(matches!(
            entropy(&[0.5, 0.6]),
            Err(Error::NotADistribution(_))
        ));
    }

    #[test]
    fn exploration_bound_examples() {
        let b = exploration_bound(
            DynamicsVariant::MatrixPlain,
            SoftmaxParams::plain(2.0).unwrap(),
            2,
            None,
        )
        .unwrap();
        assert!((b.value() - 1.0 / (E + 1.0)).abs() < 1e-15);
        assert!((b.value() - 0.268941).abs() < 1e-6);

        let b = exploration_bound(
            DynamicsVariant::MatrixExplore,
            SoftmaxParams::new(0.1, 0.1).unwrap(),
            3,
            None,
        )
        .unwrap();
        let expected = 0.1 / 3.0 + 0.9 / (2.0 * 20f64.exp() + 1.0);
        assert!((b.value() - expected).abs() < 1e-15);
        assert!((b.value() - 0.033333).abs() < 1e-6);

        let b = exploration_bound(
            DynamicsVariant::StochasticExplore,
            SoftmaxParams::new(0.3, 0.2).unwrap(),
            4,
            Some(0.9),
        )
        .unwrap();
        assert_eq!(b.value(), 0.05);

        let b = exploration_bound(
            DynamicsVariant::StochasticPlain,
            SoftmaxParams::plain(1.0).unwrap(),
            2,
            Some(0.5),
        )
        .unwrap();
        assert!((b.value() - 1.0 / (1.0 + 4f64.exp())).abs() < 1e-15);
    }

    #[test]
    fn stochastic_bound_requires_gamma() {
        let p = SoftmaxParams::new(0.1, 0.1).unwrap();
        for v in [
            DynamicsVariant::StochasticPlain,
            DynamicsVariant::StochasticExplore,
        ] {
            assert_eq!(exploration_bound(v, p, 2, None), Err(Error::MissingGamma));
        }
    }

    proptest! {
        #[test]
        fn softmax_is_distribution_above_exploration_floor(
            q in prop::collection::vec(-1.0f64..1.0, 1..6),
            tau in 0.05f64..5.0,
        ) {
            let s = softmax(&q, tau).unwrap();
            prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let qmax = q.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let floor = 1.0 / ((q.len() as f64 - 1.0) * (2.0 * qmax / tau).exp() + 1.0);
            for &p in &s {
                prop_assert!(p > 0.0);
                prop_assert!(p >= floor * (1.0 - 1e-12));
            }
        }

        #[test]
        fn softmax_is_shift_invariant(
            q in prop::collection::vec(-1.0f64..1.0, 1..6),
            c in -50.0f64..50.0,
            tau in 0.05f64..5.0,
        ) {
            let shifted: Vec<f64> = q.iter().map(|v| v + c).collect();
            let a = softmax(&q, tau).unwrap();
            let b = softmax(&shifted, tau).unwrap();
            prop_assert!(close(&a, &b, 1e-12));
        }

        #[test]
        fn explore_respects_floor(
            q in prop::collection::vec(-1.0f64..1.0, 1..6),
            tau in 0.01f64..2.0,
            eps in 0.0f64..1.0,
        ) {
            let s = softmax_explore(&q, SoftmaxParams::new(tau, eps).unwrap()).unwrap();
            prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let floor = eps / q.len() as f64;
            prop_assert!(s.iter().all(|&p| p >= floor * (1.0 - 1e-12)));
        }

        #[test]
        fn entropy_within_bounds(w in prop::collection::vec(0.0f64..1.0, 1..6)) {
            let total: f64 = w.iter().sum();
            prop_assume!(total > 1e-6);
            let mu: Vec<f64> = w.iter().map(|v| v / total).collect();
            let h = entropy_unchecked(&mu);
            prop_assert!(h >= -1e-15);
            prop_assert!(h <= (mu.len() as f64).ln() + 1e-12);
        }
    }
}
