//! The finite-sum problem abstraction every stepper runs against.

/// A stochastic finite-sum objective `f(x) = mean_s f(x, s)` split into a
/// fixed set of batches.
///
/// `loss` and `subgrad` must be deterministic functions of `(x, batch)`.
pub trait BatchOracle: Send + Sync {
    fn dim(&self) -> usize;

    fn num_batches(&self) -> usize;

    fn loss(&self, x: &[f64], batch: usize) -> f64;

    /// One element of the subdifferential of `f(., batch)` at `x`.
    fn subgrad(&self, x: &[f64], batch: usize) -> Vec<f64>;

    fn loss_and_subgrad(&self, x: &[f64], batch: usize) -> (f64, Vec<f64>) {
        (self.loss(x, batch), self.subgrad(x, batch))
    }

    /// `argmin_y f(y, batch) + ||y - x||^2 / (2 alpha)`, when the problem can
    /// compute it exactly.
    fn exact_prox(&self, _x: &[f64], _batch: usize, _alpha: f64) -> Option<Vec<f64>> {
        None
    }

    fn has_exact_prox(&self) -> bool {
        false
    }

    /// `inf_z f(z, batch)`, when computable.
    fn batch_inf(&self, _batch: usize) -> Option<f64> {
        None
    }

    fn full_loss(&self, x: &[f64]) -> f64 {
        let n = self.num_batches();
        crate::numerics::compensated_sum((0..n).map(|b| self.loss(x, b))) / n as f64
    }
}
