//! Numerical kernels: principal-branch Lambert W, a dense SPD solver, small
//! vector helpers and a brute-force 1-D proximal grid search used to validate
//! exact proximal steps.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("lambert_w0 is only defined here for z >= 0, got {0}")]
    Domain(f64),
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("matrix is not symmetric: |m[{i}][{j}] - m[{j}][{i}]| = {diff}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `x - step * g`
pub fn axpy_neg(x: &[f64], step: f64, g: &[f64]) -> Vec<f64> {
    x.iter().zip(g).map(|(xi, gi)| xi - step * gi).collect()
}

/// Neumaier-compensated sum. Falls back to the plain sum when non-finite
/// terms are present (the compensation would turn `inf - inf` into NaN).
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    let mut plain = 0.0_f64;
    for v in values {
        plain += v;
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    let out = sum + comp;
    if out.is_finite() {
        out
    } else {
        plain
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NumericsError> {
        if data.len() != rows * cols {
            return Err(NumericsError::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm_sq(&self.data).sqrt()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `self^T y`
    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, yi) in y.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * yi;
            }
        }
        out
    }

    /// Gram matrix `self^T self` (cols x cols).
    pub fn gram(&self) -> DenseMatrix {
        let mut g = DenseMatrix::zeros(self.cols, self.cols);
        for i in 0..self.rows {
            let r = self.row(i);
            for j in 0..self.cols {
                if r[j] == 0.0 {
                    continue;
                }
                for k in j..self.cols {
                    g.data[j * self.cols + k] += r[j] * r[k];
                }
            }
        }
        for j in 0..self.cols {
            for k in 0..j {
                g.data[j * self.cols + k] = g.data[k * self.cols + j];
            }
        }
        g
    }

    /// Outer Gram matrix `self self^T` (rows x rows).
    pub fn outer_gram(&self) -> DenseMatrix {
        let mut g = DenseMatrix::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in i..self.rows {
                let v = dot(self.row(i), self.row(j));
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }

    /// Copy of rows `range` as a new matrix.
    pub fn row_block(&self, start: usize, end: usize) -> DenseMatrix {
        DenseMatrix {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn add_diagonal(&mut self, s: f64) {
        for i in 0..self.rows.min(self.cols) {
            self.data[i * self.cols + i] += s;
        }
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// A symmetric positive-definite linear system `matrix * x = rhs`.
#[derive(Debug, Clone)]
pub struct SpdSystem {
    pub matrix: DenseMatrix,
    pub rhs: Vec<f64>,
}

impl SpdSystem {
    pub fn new(matrix: DenseMatrix, rhs: Vec<f64>) -> Result<Self, NumericsError> {
        if matrix.rows() != matrix.cols() {
            return Err(NumericsError::DimensionMismatch {
                expected: matrix.rows(),
                got: matrix.cols(),
            });
        }
        if rhs.len() != matrix.rows() {
            return Err(NumericsError::DimensionMismatch {
                expected: matrix.rows(),
                got: rhs.len(),
            });
        }
        let n = matrix.rows();
        for i in 0..n {
            for j in 0..i {
                let (a, b) = (matrix[(i, j)], matrix[(j, i)]);
                let diff = (a - b).abs();
                if diff > 1e-12 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE) {
                    return Err(NumericsError::NotSymmetric { i, j, diff });
                }
            }
        }
        Ok(Self { matrix, rhs })
    }
}

/// Lower-triangular Cholesky factor `L` with `M = L L^T`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DenseMatrix,
}

impl Cholesky {
    pub fn factor(m: &DenseMatrix) -> Result<Self, NumericsError> {
        let n = m.rows();
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut diag = m[(j, j)];
            for k in 0..j {
                diag -= l[(j, k)] * l[(j, k)];
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return Err(NumericsError::NotPositiveDefinite {
                    row: j,
                    pivot: diag,
                });
            }
            let ljj = diag.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = m[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Self { l })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.l.rows();
        let mut y = rhs.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }
}

/// Solve an SPD system by Cholesky factorization.
pub fn spd_solve(system: &SpdSystem) -> Result<Vec<f64>, NumericsError> {
    Ok(Cholesky::factor(&system.matrix)?.solve(&system.rhs))
}

/// Principal branch `W0(z)` of the Lambert W function for `z >= 0`.
///
/// Starts from `ln(1 + z)` and refines with Halley's method; for large `z`
/// the iteration runs on `w + ln w = ln z` so that `e^w` never overflows.
/// If the iterate leaves the bracket `[0, ln(1 + z)]` the result is computed
/// by bisection instead.
pub fn lambert_w0(z: f64) -> Result<f64, NumericsError> {
    if z.is_nan() || z < 0.0 {
        return Err(NumericsError::Domain(z));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    if z.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let upper = z.ln_1p();
    let mut w = upper;
    let mut ok = false;
    for _ in 0..64 {
        let next = if z < 1e3 {
            halley_direct(w, z)
        } else {
            halley_log(w, z)
        };
        if !next.is_finite() || next < 0.0 || next > upper * (1.0 + 1e-15) {
            break;
        }
        let step = (next - w).abs();
        w = next;
        if step <= 4.0 * f64::EPSILON * w {
            ok = true;
            break;
        }
    }
    if !ok {
        w = lambert_bisect(z, 0.0, upper);
    }
    Ok(w)
}

fn halley_direct(w: f64, z: f64) -> f64 {
    let ew = w.exp();
    let f = w * ew - z;
    let wp1 = w + 1.0;
    w - f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
}

// h(w) = w + ln w - ln z, h' = 1 + 1/w, h'' = -1/w^2
fn halley_log(w: f64, z: f64) -> f64 {
    let h = w + w.ln() - z.ln();
    let h1 = 1.0 + 1.0 / w;
    let h2 = -1.0 / (w * w);
    w - 2.0 * h * h1 / (2.0 * h1 * h1 - h * h2)
}

fn lambert_bisect(z: f64, mut lo: f64, mut hi: f64) -> f64 {
    // w e^w is increasing on [0, inf); compare in log space when possible.
    let above = |w: f64| if w > 0.0 { w.ln() + w > z.ln() } else { false };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if above(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Brute-force proximal step of a scalar function on a uniform grid.
///
/// Returns the grid minimizer of `f(y) + (y - x)^2 / (2 alpha)` over
/// `lo, lo + step, ..., hi` and the attained value (the Moreau envelope,
/// up to grid resolution).
pub fn prox_grid_oracle<F>(f: F, x: f64, alpha: f64, lo: f64, hi: f64, step: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    assert!(
        lo < hi && step > 0.0,
        "invalid grid [{lo}, {hi}] step {step}"
    );
    let n = ((hi - lo) / step).round() as usize;
    let mut best = (lo, f64::INFINITY);
    for k in 0..=n {
        let y = lo + k as f64 * step;
        let v = f(y) + (y - x) * (y - x) / (2.0 * alpha);
        if v < best.1 {
            best = (y, v);
        }
    }
    best
}
