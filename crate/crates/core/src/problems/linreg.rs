//! Least-squares (optionally ridge) regression split into contiguous batches.

use std::io::{self, BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::numerics::{dot, norm_sq, spd_solve, Cholesky, DenseMatrix, NumericsError, SpdSystem};
use crate::oracle::BatchOracle;

/// Output of [`datagen_linreg`].
#[derive(Debug, Clone)]
pub struct GeneratedLinReg {
    pub a: DenseMatrix,
    pub b: Vec<f64>,
    /// Unit-norm planted solution; `b = A x_hat` before noise.
    pub x_hat: Vec<f64>,
    /// Columns that ended up identically zero after sparsification.
    pub zero_columns: usize,
}

/// Probability with which each entry is zeroed: `1 - 30 ln(n) / n`, clamped to [0, 1].
pub fn sparsify_probability(n: usize) -> f64 {
    let n = n as f64;
    (1.0 - 30.0 * n.ln() / n).clamp(0.0, 1.0)
}

/// Synthetic regression data:
///
/// 1. `A` with i.i.d. standard-normal entries, plus one;
/// 2. each column scaled by `10 * N(0, 1)`;
/// 3. each entry zeroed with [`sparsify_probability`];
/// 4. columns rescaled to norm 10 (zero columns stay zero);
/// 5. `x_hat ~ N(0, I)` normalized to unit norm, `b = A x_hat`;
/// 6. with `noise`, `b += N(0, I)`.
pub fn datagen_linreg(n: usize, d: usize, noise: bool, seed: u64) -> GeneratedLinReg {
    assert!(n >= 1 && d >= 1, "datagen needs n, d >= 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { rng.sample(StandardNormal) };

    let entries: Vec<f64> = (0..n * d).map(|_| normal() + 1.0).collect();
    let mut a = DenseMatrix::from_row_major(n, d, entries).expect("n*d entries");
    let col_scale: Vec<f64> = (0..d).map(|_| 10.0 * normal()).collect();
    for i in 0..n {
        for (v, s) in a.row_mut(i).iter_mut().zip(&col_scale) {
            *v *= s;
        }
    }

    let p_zero = sparsify_probability(n);
    if p_zero > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        for i in 0..n {
            for v in a.row_mut(i) {
                if rng.random::<f64>() < p_zero {
                    *v = 0.0;
                }
            }
        }
    }

    let mut zero_columns = 0;
    for j in 0..d {
        let norm = (0..n).map(|i| a[(i, j)] * a[(i, j)]).sum::<f64>().sqrt();
        if norm == 0.0 {
            zero_columns += 1;
            continue;
        }
        for i in 0..n {
            a[(i, j)] *= 10.0 / norm;
        }
    }
    if zero_columns > 0 {
        log::warn!(
            "{zero_columns} of {d} columns are zero after sparsification; left unnormalized"
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let mut x_hat: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let xn = norm_sq(&x_hat).sqrt();
    x_hat.iter_mut().for_each(|v| *v /= xn);
    let mut b = a.mul_vec(&x_hat);
    if noise {
        for v in b.iter_mut() {
            *v += rng.sample::<f64, _>(StandardNormal);
        }
    }
    GeneratedLinReg {
        a,
        b,
        x_hat,
        zero_columns,
    }
}

/// Write `n d`, then `n` rows of `d` floats, then one line of `n` targets.
pub fn write_linreg_text<W: Write>(mut w: W, a: &DenseMatrix, b: &[f64]) -> io::Result<()> {
    writeln!(w, "{} {}", a.rows(), a.cols())?;
    let join = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.17e}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    for i in 0..a.rows() {
        writeln!(w, "{}", join(a.row(i)))?;
    }
    writeln!(w, "{}", join(b))
}

pub fn read_linreg_text<R: BufRead>(r: R) -> io::Result<(DenseMatrix, Vec<f64>)> {
    let bad = |m: String| io::Error::new(io::ErrorKind::InvalidData, m);
    let mut tokens = Vec::new();
    for line in r.lines() {
        tokens.extend(line?.split_whitespace().map(str::to_owned));
    }
    let mut it = tokens.into_iter();
    let mut next_usize = |what: &str| -> io::Result<usize> {
        it.next()
            .ok_or_else(|| bad(format!("missing {what}")))?
            .parse()
            .map_err(|e| bad(format!("bad {what}: {e}")))
    };
    let n = next_usize("row count")?;
    let d = next_usize("column count")?;
    let vals: Vec<f64> = it
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| bad(format!("bad number `{t}`: {e}")))
        })
        .collect::<io::Result<_>>()?;
    if vals.len() != n * d + n {
        return Err(bad(format!(
            "expected {} numbers after the header, found {}",
            n * d + n,
            vals.len()
        )));
    }
    let b = vals[n * d..].to_vec();
    let a = DenseMatrix::from_row_major(n, d, vals[..n * d].to_vec())
        .map_err(|e| bad(e.to_string()))?;
    Ok((a, b))
}

#[derive(Debug, Clone)]
pub struct LinRegData {
    pub a: DenseMatrix,
    pub b: Vec<f64>,
    pub batch_size: usize,
    pub lambda: f64,
}

impl LinRegData {
    pub fn new(a: DenseMatrix, b: Vec<f64>, batch_size: usize, lambda: f64) -> Self {
        assert_eq!(a.rows(), b.len(), "A rows and b length differ");
        assert!(
            batch_size >= 1 && batch_size <= a.rows(),
            "batch size {batch_size} out of range"
        );
        assert!(lambda >= 0.0);
        Self {
            a,
            b,
            batch_size,
            lambda,
        }
    }
}

#[derive(Debug, Clone)]
struct Batch {
    a: DenseMatrix,
    b: Vec<f64>,
    /// `A_s^T A_s / |s|`
    gram: DenseMatrix,
    /// `A_s^T b_s / |s|`
    atb: Vec<f64>,
    inf: f64,
}

/// `f(x, s) = ||A_s x - b_s||^2 / (2|s|) + lambda ||x||^2 / 2`.
///
/// A trailing batch smaller than `batch_size` is dropped.
#[derive(Debug, Clone)]
pub struct LinRegOracle {
    dim: usize,
    lambda: f64,
    batches: Vec<Batch>,
}

impl LinRegOracle {
    pub fn new(data: &LinRegData) -> Self {
        let bs = data.batch_size;
        let nb = data.a.rows() / bs;
        let batches = (0..nb)
            .map(|k| {
                let a = data.a.row_block(k * bs, (k + 1) * bs);
                let b = data.b[k * bs..(k + 1) * bs].to_vec();
                let mut gram = a.gram();
                gram.scale(1.0 / bs as f64);
                let mut atb = a.tr_mul_vec(&b);
                atb.iter_mut().for_each(|v| *v /= bs as f64);
                let inf = least_squares_min(&a, &b, data.lambda).1;
                Batch {
                    a,
                    b,
                    gram,
                    atb,
                    inf,
                }
            })
            .collect();
        Self {
            dim: data.a.cols(),
            lambda: data.lambda,
            batches,
        }
    }

    fn residual(&self, x: &[f64], batch: usize) -> Vec<f64> {
        let bt = &self.batches[batch];
        bt.a.mul_vec(x)
            .iter()
            .zip(&bt.b)
            .map(|(p, t)| p - t)
            .collect()
    }

    /// Exact proximal step: solves
    /// `[A_s^T A_s / b + (lambda + 1/alpha) I] x+ = x / alpha + A_s^T b_s / b`.
    pub fn ridge_prox(
        &self,
        x: &[f64],
        batch: usize,
        alpha: f64,
    ) -> Result<Vec<f64>, NumericsError> {
        let bt = &self.batches[batch];
        let mut m = bt.gram.clone();
        m.add_diagonal(self.lambda + 1.0 / alpha);
        let rhs: Vec<f64> = x
            .iter()
            .zip(&bt.atb)
            .map(|(xi, c)| xi / alpha + c)
            .collect();
        spd_solve(&SpdSystem { matrix: m, rhs })
    }
}

/// Minimizer and minimum of `||A x - b||^2 / (2 rows) + lambda ||x||^2 / 2`.
///
/// For `lambda = 0` and at most as many rows as columns the minimum-norm
/// interpolant is used and the minimum is reported as exactly zero when
/// `A A^T` is positive definite.
pub fn least_squares_min(a: &DenseMatrix, b: &[f64], lambda: f64) -> (Vec<f64>, f64) {
    let rows = a.rows() as f64;
    let value = |x: &[f64]| {
        let r: Vec<f64> = a.mul_vec(x).iter().zip(b).map(|(p, t)| p - t).collect();
        norm_sq(&r) / (2.0 * rows) + 0.5 * lambda * norm_sq(x)
    };
    if lambda == 0.0 && a.rows() <= a.cols() {
        if let Ok(ch) = Cholesky::factor(&a.outer_gram()) {
            let x = a.tr_mul_vec(&ch.solve(b));
            return (x, 0.0);
        }
    }
    let mut m = a.gram();
    m.scale(1.0 / rows);
    m.add_diagonal(lambda);
    let mut rhs = a.tr_mul_vec(b);
    rhs.iter_mut().for_each(|v| *v /= rows);
    let x = match Cholesky::factor(&m) {
        Ok(ch) => ch.solve(&rhs),
        Err(_) => {
            // rank-deficient: tiny Tikhonov shift
            let trace: f64 = (0..m.rows()).map(|i| m[(i, i)]).sum();
            m.add_diagonal(1e-12 * trace.max(1.0));
            Cholesky::factor(&m)
                .map(|ch| ch.solve(&rhs))
                .unwrap_or_else(|_| vec![0.0; a.cols()])
        }
    };
    let v = value(&x);
    (x, v)
}

impl BatchOracle for LinRegOracle {
    fn dim(&self) -> usize {
        self.dim
    }

    fn num_batches(&self) -> usize {
        self.batches.len()
    }

    fn loss(&self, x: &[f64], batch: usize) -> f64 {
        let r = self.residual(x, batch);
        norm_sq(&r) / (2.0 * r.len() as f64) + 0.5 * self.lambda * norm_sq(x)
    }

    fn subgrad(&self, x: &[f64], batch: usize) -> Vec<f64> {
        self.loss_and_subgrad(x, batch).1
    }

    fn loss_and_subgrad(&self, x: &[f64], batch: usize) -> (f64, Vec<f64>) {
        let bt = &self.batches[batch];
        let r = self.residual(x, batch);
        let m = r.len() as f64;
        let mut g = bt.a.tr_mul_vec(&r);
        for (gi, xi) in g.iter_mut().zip(x) {
            *gi = *gi / m + self.lambda * xi;
        }
        (norm_sq(&r) / (2.0 * m) + 0.5 * self.lambda * dot(x, x), g)
    }

    fn exact_prox(&self, x: &[f64], batch: usize, alpha: f64) -> Option<Vec<f64>> {
        // the system matrix is SPD for alpha > 0
        self.ridge_prox(x, batch, alpha).ok()
    }

    fn has_exact_prox(&self) -> bool {
        true
    }

    fn batch_inf(&self, batch: usize) -> Option<f64> {
        Some(self.batches[batch].inf)
    }
}
