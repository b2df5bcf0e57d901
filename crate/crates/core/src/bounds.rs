//! Average- and last-iterate suboptimality bounds built from a step-size
//! series, per-step expected stability indices and a distance guess `D`.
//!
//! ```text
//! avg  = D^2 / (2 S_1) + P_1 / S_1
//! last = avg + sum_{k=1}^{T-1} alpha_k / S_{k+1} * P_k / S_k
//! ```
//! with suffix sums `S_k = sum_{t>=k} alpha_t` and
//! `P_k = sum_{t>=k} alpha_t Delta_t`.

use thiserror::Error;

use crate::numerics::compensated_sum;
use crate::oracle::BatchOracle;
use crate::run::RunTrace;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error("empty horizon (T = 0)")]
    EmptyHorizon,
    #[error("alphas ({alphas}) and deltas ({deltas}) differ in length")]
    LengthMismatch { alphas: usize, deltas: usize },
    #[error("step sizes must be positive, got {value} at t = {t}")]
    NonPositiveAlpha { t: usize, value: f64 },
    #[error("distance D must be nonnegative, got {0}")]
    NegativeDistance(f64),
    #[error("no traces supplied")]
    NoTraces,
    #[error("batch {0} has no computable infimum (MissingBatchInf)")]
    MissingBatchInf(usize),
    #[error("expected {expected} lower-bound values, got {got}")]
    LowerBoundCount { expected: usize, got: usize },
}

/// Inputs to the suboptimality bounds; construct with [`BoundInput::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundInput {
    alphas: Vec<f64>,
    deltas: Vec<f64>,
    distance: f64,
    clamped: usize,
}

impl BoundInput {
    /// Negative `Delta_t` estimates are clamped to zero (and counted).
    pub fn new(alphas: Vec<f64>, deltas: Vec<f64>, distance: f64) -> Result<Self, BoundError> {
        if alphas.len() != deltas.len() {
            return Err(BoundError::LengthMismatch {
                alphas: alphas.len(),
                deltas: deltas.len(),
            });
        }
        if alphas.is_empty() {
            return Err(BoundError::EmptyHorizon);
        }
        if let Some((t, &value)) = alphas.iter().enumerate().find(|(_, a)| !(**a > 0.0)) {
            return Err(BoundError::NonPositiveAlpha { t: t + 1, value });
        }
        if !(distance >= 0.0) {
            return Err(BoundError::NegativeDistance(distance));
        }
        let mut clamped = 0;
        let deltas = deltas
            .into_iter()
            .map(|d| {
                if d < 0.0 {
                    clamped += 1;
                    0.0
                } else {
                    d
                }
            })
            .collect();
        if clamped > 0 {
            log::warn!("{clamped} negative delta estimates clamped to 0");
        }
        Ok(Self {
            alphas,
            deltas,
            distance,
            clamped,
        })
    }

    pub fn constant(
        alpha: f64,
        delta: f64,
        horizon: usize,
        distance: f64,
    ) -> Result<Self, BoundError> {
        Self::new(vec![alpha; horizon], vec![delta; horizon], distance)
    }

    pub fn horizon(&self) -> usize {
        self.alphas.len()
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn clamped_count(&self) -> usize {
        self.clamped
    }

    pub fn with_distance(&self, distance: f64) -> Result<Self, BoundError> {
        if !(distance >= 0.0) {
            return Err(BoundError::NegativeDistance(distance));
        }
        Ok(Self {
            distance,
            ..self.clone()
        })
    }

    /// `(S_k, P_k)` for k = 1..=T (0-based index k-1).
    fn suffix_sums(&self) -> (Vec<f64>, Vec<f64>) {
        let t = self.horizon();
        let weighted: Vec<f64> = self
            .alphas
            .iter()
            .zip(&self.deltas)
            .map(|(a, d)| a * d)
            .collect();
        let mut s = vec![0.0; t];
        let mut p = vec![0.0; t];
        // Neumaier running sums from the back
        let (mut s_sum, mut s_c, mut p_sum, mut p_c) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
        let add = |sum: &mut f64, c: &mut f64, v: f64| {
            let next = *sum + v;
            if sum.abs() >= v.abs() {
                *c += (*sum - next) + v;
            } else {
                *c += (v - next) + *sum;
            }
            *sum = next;
        };
        for k in (0..t).rev() {
            add(&mut s_sum, &mut s_c, self.alphas[k]);
            add(&mut p_sum, &mut p_c, weighted[k]);
            s[k] = s_sum + s_c;
            let pk = p_sum + p_c;
            p[k] = if pk.is_finite() { pk } else { p_sum };
        }
        (s, p)
    }
}

fn first_terms(input: &BoundInput, s1: f64, p1: f64) -> f64 {
    input.distance * input.distance / (2.0 * s1) + p1 / s1
}

pub fn omega_avg(input: &BoundInput) -> f64 {
    let s1 = compensated_sum(input.alphas.iter().copied());
    let p1 = compensated_sum(input.alphas.iter().zip(&input.deltas).map(|(a, d)| a * d));
    first_terms(input, s1, p1)
}

/// Last-iterate bound in O(T) via suffix sums.
pub fn omega_last(input: &BoundInput) -> f64 {
    let (s, p) = input.suffix_sums();
    let t = input.horizon();
    let tail = compensated_sum(
        (0..t.saturating_sub(1)).map(|k| input.alphas[k] / s[k + 1] * (p[k] / s[k])),
    );
    first_terms(input, s[0], p[0]) + tail
}

pub fn harmonic(n: usize) -> f64 {
    compensated_sum((1..=n).map(|s| 1.0 / s as f64))
}

/// Closed form of the last-iterate bound for constant `alpha` and
/// `Delta_t = alpha^nu`: `D^2 / (2 alpha T) + alpha^nu (1 + H_{T-1})`.
pub fn nu_illustration(alpha: f64, nu: f64, horizon: usize, distance: f64) -> f64 {
    debug_assert!(alpha > 0.0 && nu >= 0.0 && horizon >= 1 && distance >= 0.0);
    distance * distance / (2.0 * alpha * horizon as f64)
        + alpha.powf(nu) * (1.0 + harmonic(horizon - 1))
}

/// Per-step mean of the recorded deltas across traces, clamped at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaEstimate {
    pub deltas: Vec<f64>,
    pub alphas: Vec<f64>,
    /// True when traces of different lengths were cut to the shortest.
    pub truncated: bool,
}

pub fn estimate_expected_deltas(traces: &[&RunTrace]) -> Result<DeltaEstimate, BoundError> {
    let series: Vec<(Vec<f64>, Vec<f64>)> = traces
        .iter()
        .map(|t| {
            (
                t.records.iter().map(|r| r.alpha_t).collect(),
                t.deltas().collect(),
            )
        })
        .collect();
    estimate_from_series(&series)
}

/// Same as [`estimate_expected_deltas`] over raw `(alphas, deltas)` series.
pub fn estimate_from_series(series: &[(Vec<f64>, Vec<f64>)]) -> Result<DeltaEstimate, BoundError> {
    if series.is_empty() {
        return Err(BoundError::NoTraces);
    }
    let len = series.iter().map(|s| s.1.len()).min().unwrap_or(0);
    let truncated = series.iter().any(|s| s.1.len() != len);
    if truncated {
        log::warn!("traces differ in length; truncating to the shortest ({len} steps)");
    }
    let n = series.len() as f64;
    let deltas = (0..len)
        .map(|t| (compensated_sum(series.iter().map(|s| s.1[t])) / n).max(0.0))
        .collect();
    let alphas = series[0].0[..len].to_vec();
    Ok(DeltaEstimate {
        deltas,
        alphas,
        truncated,
    })
}

/// Interpolation constant and lower-bound estimation error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapDecomposition {
    pub sigma_sq: f64,
    pub eps_lb: f64,
}

pub fn decompose_gap(
    oracle: &dyn BatchOracle,
    x_star_loss: f64,
    lower: &[f64],
) -> Result<GapDecomposition, BoundError> {
    let nb = oracle.num_batches();
    if lower.len() != nb {
        return Err(BoundError::LowerBoundCount {
            expected: nb,
            got: lower.len(),
        });
    }
    let infs = (0..nb)
        .map(|b| oracle.batch_inf(b).ok_or(BoundError::MissingBatchInf(b)))
        .collect::<Result<Vec<_>, _>>()?;
    let mean_inf = compensated_sum(infs.iter().copied()) / nb as f64;
    let eps_lb = compensated_sum(infs.iter().zip(lower).map(|(i, c)| i - c)) / nb as f64;
    Ok(GapDecomposition {
        sigma_sq: x_star_loss - mean_inf,
        eps_lb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Direct O(T^2) evaluation of the last-iterate bound, straight from the
    // definition.
    fn omega_last_naive(alphas: &[f64], deltas: &[f64], d: f64) -> f64 {
        let t = alphas.len();
        let s = |k: usize| alphas[k..].iter().sum::<f64>();
        let p = |k: usize| {
            alphas[k..]
                .iter()
                .zip(&deltas[k..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
        };
        let mut out = d * d / (2.0 * s(0)) + p(0) / s(0);
        for k in 0..t - 1 {
            out += alphas[k] / s(k + 1) * (p(k) / s(k));
        }
        out
    }

    #[test]
    fn avg_examples() {
        let inp = BoundInput::new(vec![1.0, 1.0], vec![0.5, 0.5], 2.0).unwrap();
        assert_eq!(omega_avg(&inp), 1.5);
        let inp = BoundInput::new(vec![0.5, 2.0, 1.0], vec![0.0; 3], 3.0).unwrap();
        assert!((omega_avg(&inp) - 9.0 / 7.0).abs() < 1e-15);
        let inp = BoundInput::new(vec![0.1, 3.0, 0.7], vec![0.4; 3], 0.0).unwrap();
        assert!((omega_avg(&inp) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn last_examples() {
        let inp = BoundInput::new(vec![0.5], vec![0.3], 2.0).unwrap();
        assert!((omega_last(&inp) - (4.0 / 1.0 + 0.3)).abs() < 1e-15);
        let inp = BoundInput::constant(1.0, 1.0, 3, 0.0).unwrap();
        assert!((omega_last(&inp) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert_eq!(
            BoundInput::new(vec![], vec![], 1.0),
            Err(BoundError::EmptyHorizon)
        );
        assert!(matches!(
            BoundInput::new(vec![1.0, 0.0], vec![0.0; 2], 1.0),
            Err(BoundError::NonPositiveAlpha { t: 2, .. })
        ));
        assert!(BoundInput::new(vec![1.0], vec![0.0; 2], 1.0).is_err());
        let inp = BoundInput::new(vec![1.0, 1.0], vec![-1e-17, 1.0], 1.0).unwrap();
        assert_eq!(inp.clamped_count(), 1);
        assert_eq!(inp.deltas()[0], 0.0);
    }

    #[test]
    fn nu_matches_omega_last() {
        let (alpha, nu, t, d) = (2.0, 1.0, 5, 1.0);
        let inp = BoundInput::constant(alpha, alpha.powf(nu), t, d).unwrap();
        assert!((nu_illustration(alpha, nu, t, d) - omega_last(&inp)).abs() < 1e-13);
        // nu = 0: variance term independent of alpha
        let a = nu_illustration(0.1, 0.0, 10, 0.0);
        let b = nu_illustration(100.0, 0.0, 10, 0.0);
        assert!((a - b).abs() < 1e-15);
        // alpha = 1: nu irrelevant
        assert_eq!(
            nu_illustration(1.0, 0.3, 7, 2.0),
            nu_illustration(1.0, 3.0, 7, 2.0)
        );
    }

    #[test]
    fn estimate_examples() {
        let series = vec![
            (vec![1.0, 1.0], vec![1.0, 3.0]),
            (vec![1.0, 1.0], vec![3.0, 1.0]),
        ];
        let est = estimate_from_series(&series).unwrap();
        assert_eq!(est.deltas, vec![2.0, 2.0]);
        assert!(!est.truncated);
        let series = vec![
            (vec![1.0; 3], vec![1.0, 2.0, 3.0]),
            (vec![1.0; 2], vec![1.0, 2.0]),
        ];
        let est = estimate_from_series(&series).unwrap();
        assert_eq!(est.deltas.len(), 2);
        assert!(est.truncated);
        assert_eq!(estimate_from_series(&[]), Err(BoundError::NoTraces));
    }

    proptest! {
        #[test]
        fn last_matches_naive_and_dominates_avg(
            pairs in proptest::collection::vec((1e-3f64..10.0, 0.0f64..5.0), 1..60),
            d in 0.0f64..10.0,
        ) {
            let (alphas, deltas): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let inp = BoundInput::new(alphas.clone(), deltas.clone(), d).unwrap();
            let fast = omega_last(&inp);
            let naive = omega_last_naive(&alphas, &deltas, d);
            prop_assert!((fast - naive).abs() <= 1e-10 * naive.abs().max(1.0));
            prop_assert!(fast >= omega_avg(&inp) - 1e-12 * fast.abs());
        }

        #[test]
        fn bounds_monotone_in_delta_and_distance(
            pairs in proptest::collection::vec((1e-3f64..10.0, 0.0f64..5.0), 2..30),
            d in 0.0f64..10.0,
            idx in 0usize..30,
            bump in 1e-3f64..1.0,
        ) {
            let (alphas, deltas): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let base = BoundInput::new(alphas.clone(), deltas.clone(), d).unwrap();
            let mut bumped = deltas.clone();
            let i = idx % bumped.len();
            bumped[i] += bump;
            let up = BoundInput::new(alphas.clone(), bumped, d).unwrap();
            prop_assert!(omega_avg(&up) >= omega_avg(&base));
            prop_assert!(omega_last(&up) >= omega_last(&base));
            let far = base.with_distance(d + bump).unwrap();
            prop_assert!(omega_avg(&far) >= omega_avg(&base));
            prop_assert!(omega_last(&far) >= omega_last(&base));
            // bias term alone decreases in every alpha
            let mut a2 = alphas.clone();
            a2[i] += bump;
            let zero = vec![0.0; alphas.len()];
            let b0 = omega_avg(&BoundInput::new(alphas, zero.clone(), d.max(0.1)).unwrap());
            let b1 = omega_avg(&BoundInput::new(a2, zero, d.max(0.1)).unwrap());
            prop_assert!(b1 < b0);
        }
    }
}
