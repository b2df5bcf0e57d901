//! Multiclass (softmax) logistic regression on sparse features, without bias
//! or regularization. Parameters are laid out class-major: `x[c * d + j]`.

use crate::numerics::norm_sq;
use crate::oracle::BatchOracle;

/// Sparse row: `(0-based feature index, value)` pairs.
pub type SparseRow = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegData {
    pub features: Vec<SparseRow>,
    /// Dense class indices in `0..num_classes`.
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub dim: usize,
    pub batch_size: usize,
}

impl LogRegData {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_batches(&self) -> usize {
        self.len() / self.batch_size
    }
}

#[derive(Debug, Clone)]
pub struct LogRegOracle {
    data: LogRegData,
    infima: Option<Vec<f64>>,
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|s| (s - m).exp()).sum::<f64>().ln()
}

impl LogRegOracle {
    pub fn new(data: LogRegData) -> Self {
        assert!(
            data.batch_size >= 1 && data.num_batches() >= 1,
            "need at least one full batch"
        );
        assert!(data.labels.iter().all(|&y| y < data.num_classes));
        Self { data, infima: None }
    }

    pub fn data(&self) -> &LogRegData {
        &self.data
    }

    /// Estimate `inf_z f(z, s)` for every batch by full-batch gradient
    /// descent with Armijo backtracking, stopping at gradient norm `1e-8`
    /// or after `max_iter` iterations. The estimates are upper bounds.
    pub fn with_estimated_batch_inf(mut self, max_iter: usize) -> Self {
        let infima = (0..self.num_batches())
            .map(|s| self.minimize_batch(s, max_iter))
            .collect();
        self.infima = Some(infima);
        self
    }

    fn minimize_batch(&self, batch: usize, max_iter: usize) -> f64 {
        let mut x = vec![0.0; self.dim()];
        let (mut f, mut g) = self.loss_and_subgrad(&x, batch);
        let mut step = 1.0;
        for _ in 0..max_iter {
            let gsq = norm_sq(&g);
            if gsq.sqrt() <= 1e-8 {
                break;
            }
            loop {
                let trial: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - step * gi).collect();
                let ft = self.loss(&trial, batch);
                if ft <= f - 0.5 * step * gsq {
                    x = trial;
                    break;
                }
                step *= 0.5;
                if step < 1e-20 {
                    return f;
                }
            }
            let (nf, ng) = self.loss_and_subgrad(&x, batch);
            f = nf;
            g = ng;
            step *= 2.0;
        }
        f
    }

    fn scores(&self, x: &[f64], row: &SparseRow) -> Vec<f64> {
        let d = self.data.dim;
        (0..self.data.num_classes)
            .map(|c| row.iter().map(|&(j, v)| x[c * d + j] * v).sum())
            .collect()
    }

    fn rows(&self, batch: usize) -> std::ops::Range<usize> {
        let bs = self.data.batch_size;
        batch * bs..(batch + 1) * bs
    }
}

impl BatchOracle for LogRegOracle {
    fn dim(&self) -> usize {
        self.data.num_classes * self.data.dim
    }

    fn num_batches(&self) -> usize {
        self.data.num_batches()
    }

    fn loss(&self, x: &[f64], batch: usize) -> f64 {
        let range = self.rows(batch);
        let n = range.len() as f64;
        range
            .map(|i| {
                let s = self.scores(x, &self.data.features[i]);
                log_sum_exp(&s) - s[self.data.labels[i]]
            })
            .sum::<f64>()
            / n
    }

    fn subgrad(&self, x: &[f64], batch: usize) -> Vec<f64> {
        self.loss_and_subgrad(x, batch).1
    }

    fn loss_and_subgrad(&self, x: &[f64], batch: usize) -> (f64, Vec<f64>) {
        let d = self.data.dim;
        let range = self.rows(batch);
        let n = range.len() as f64;
        let mut g = vec![0.0; self.dim()];
        let mut loss = 0.0;
        for i in range {
            let row = &self.data.features[i];
            let y = self.data.labels[i];
            let s = self.scores(x, row);
            let lse = log_sum_exp(&s);
            loss += lse - s[y];
            for (c, sc) in s.iter().enumerate() {
                let coef = ((sc - lse).exp() - if c == y { 1.0 } else { 0.0 }) / n;
                for &(j, v) in row {
                    g[c * d + j] += coef * v;
                }
            }
        }
        (loss / n, g)
    }

    fn batch_inf(&self, batch: usize) -> Option<f64> {
        self.infima.as_ref().map(|v| v[batch])
    }
}
