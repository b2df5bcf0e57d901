//! Single-batch 1-D toy `f(y) = ln(1 + e^-y) + max(y - 2, 0)`.

use crate::oracle::BatchOracle;

/// `ln(1 + e^t)` without overflow.
pub fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// `1 / (1 + e^-t)` without overflow.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

pub fn toy_loss(y: f64) -> f64 {
    softplus(-y) + (y - 2.0).max(0.0)
}

/// Subgradient; at the kink `y = 2` the max-term contributes slope 0.
pub fn toy_subgrad(y: f64) -> f64 {
    -sigmoid(-y) + if y > 2.0 { 1.0 } else { 0.0 }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ToyOracle;

impl ToyOracle {
    pub const KINK: f64 = 2.0;

    /// `inf f = f(2) = ln(1 + e^-2)`, attained at the kink.
    pub fn infimum() -> f64 {
        softplus(-Self::KINK)
    }

    /// Exact prox of the toy at `x` by safeguarded Newton on the smooth
    /// piece that contains the minimizer.
    pub fn prox(x: f64, alpha: f64) -> f64 {
        let k = Self::KINK;
        let left = -sigmoid(-k) + (k - x) / alpha;
        if left <= 0.0 && left + 1.0 >= 0.0 {
            return k;
        }
        let (offset, mut lo, mut hi) = if left > 0.0 {
            (0.0, x - alpha, k)
        } else {
            (1.0, k, x + alpha)
        };
        let h = |y: f64| offset - sigmoid(-y) + (y - x) / alpha;
        let dh = |y: f64| {
            let s = sigmoid(-y);
            s * (1.0 - s) + 1.0 / alpha
        };
        let mut y = 0.5 * (lo + hi);
        for _ in 0..200 {
            let hy = h(y);
            if hy == 0.0 {
                return y;
            }
            if hy > 0.0 {
                hi = y;
            } else {
                lo = y;
            }
            let newton = y - hy / dh(y);
            let next = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - y).abs() <= 1e-15 * y.abs().max(1.0) || hi - lo <= 1e-15 * y.abs().max(1.0) {
                return next;
            }
            y = next;
        }
        y
    }
}

impl BatchOracle for ToyOracle {
    fn dim(&self) -> usize {
        1
    }

    fn num_batches(&self) -> usize {
        1
    }

    fn loss(&self, x: &[f64], _batch: usize) -> f64 {
        toy_loss(x[0])
    }

    fn subgrad(&self, x: &[f64], _batch: usize) -> Vec<f64> {
        vec![toy_subgrad(x[0])]
    }

    fn exact_prox(&self, x: &[f64], _batch: usize, alpha: f64) -> Option<Vec<f64>> {
        Some(vec![Self::prox(x[0], alpha)])
    }

    fn has_exact_prox(&self) -> bool {
        true
    }

    fn batch_inf(&self, _batch: usize) -> Option<f64> {
        Some(Self::infimum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::prox_grid_oracle;

    #[test]
    fn spot_values() {
        assert!((toy_loss(-3.0) - 3.048_587_351_573_742).abs() < 1e-12);
        assert!((toy_subgrad(-3.0) + 0.952_574_126_822_433_4).abs() < 1e-12);
        assert!((toy_loss(10.0) - 8.000_045_398_899_218).abs() < 1e-12);
        assert_eq!(toy_subgrad(2.0), -sigmoid(-2.0));
    }

    #[test]
    fn infimum_at_kink() {
        let (y, v) = prox_grid_oracle(toy_loss, 0.0, 1e12, -3.0, 5.0, 1e-4);
        assert!((y - 2.0).abs() <= 1e-4);
        assert!((v - ToyOracle::infimum()).abs() <= 1e-6);
    }

    #[test]
    fn prox_matches_grid() {
        for &x in &[-3.0, 0.0, 1.9, 2.0, 4.0, 7.5] {
            for &alpha in &[1e-3, 0.1, 1.0, 3.0, 100.0, 1e6] {
                let y = ToyOracle::prox(x, alpha);
                let (yg, _) = prox_grid_oracle(toy_loss, x, alpha, -4.0, 9.0, 1e-4);
                assert!(
                    (y - yg).abs() <= 2e-4,
                    "x={x} alpha={alpha} prox={y} grid={yg}"
                );
            }
        }
    }

    #[test]
    fn prox_optimality() {
        for &x in &[-3.0, 0.5, 6.0] {
            for &alpha in &[0.01, 0.5, 2.0, 40.0] {
                let y = ToyOracle::prox(x, alpha);
                if y != 2.0 {
                    let d = toy_subgrad(y) + (y - x) / alpha;
                    assert!(d.abs() < 1e-12, "x={x} alpha={alpha} residual {d}");
                }
            }
        }
    }
}
