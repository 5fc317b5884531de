//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};
use ndarray::{Array2, Array3};

/// `k(m, n) = κ(x, z shifted by (−m, −n))` by direct summation.
pub fn brute_kernel_correlation(x: &Array3<f64>, z: &Array3<f64>, gaussian_sigma: Option<f64>) -> Array2<f64> {
    let (rows, cols, depth) = x.dim();
    Array2::from_shape_fn((rows, cols), |(m, n)| {
        let mut dot = 0.0;
        let mut dist = 0.0;
        for p in 0..rows {
            for q in 0..cols {
                for d in 0..depth {
                    let a = x[[p, q, d]];
                    let b = z[[(p + m) % rows, (q + n) % cols, d]];
                    dot += a * b;
                    dist += (a - b) * (a - b);
                }
            }
        }
        match gaussian_sigma {
            None => dot,
            Some(s) => (-dist / (s * s)).exp(),
        }
    })
}

/// Circular shift: `out(p, q) = x(p + a, q + b)`.
pub fn shift(x: &Array3<f64>, a: usize, b: usize) -> Array3<f64> {
    let (rows, cols, depth) = x.dim();
    Array3::from_shape_fn((rows, cols, depth), |(p, q, d)| x[[(p + a) % rows, (q + b) % cols, d]])
}

/// Dual ridge regression over all circular shifts of `x`, solved densely:
/// `(K + λI) α = y` with `K_ij = κ(shift_i x, shift_j x)`.
pub fn dense_dual_ridge(x: &Array3<f64>, y: &Array2<f64>, lambda: f64, gaussian_sigma: Option<f64>) -> Array2<f64> {
    let (rows, cols, _) = x.dim();
    let n = rows * cols;
    let shifts: Vec<Array3<f64>> = (0..n).map(|i| shift(x, i / cols, i % cols)).collect();
    let kernel = |a: &Array3<f64>, b: &Array3<f64>| -> f64 {
        match gaussian_sigma {
            None => a.iter().zip(b.iter()).map(|(u, v)| u * v).sum(),
            Some(s) => (-a.iter().zip(b.iter()).map(|(u, v)| (u - v) * (u - v)).sum::<f64>() / (s * s)).exp(),
        }
    };
    let mut k = DMatrix::from_fn(n, n, |i, j| kernel(&shifts[i], &shifts[j]));
    for i in 0..n {
        k[(i, i)] += lambda;
    }
    let rhs = DVector::from_iterator(n, y.iter().copied());
    let alpha = k.lu().solve(&rhs).expect("regularized system is invertible");
    Array2::from_shape_fn((rows, cols), |(m, c)| alpha[m * cols + c])
}

/// Textbook Kalman filter with a constant-velocity model.
pub struct Kalman {
    pub x: Vector4<f64>,
    pub p: Matrix4<f64>,
    pub f: Matrix4<f64>,
    pub q: Matrix4<f64>,
    pub h: Matrix2x4<f64>,
    pub r: Matrix2<f64>,
}

impl Kalman {
    pub fn new(x: Vector4<f64>, p: Matrix4<f64>, q: Matrix4<f64>, r: Matrix2<f64>) -> Self {
        #[rustfmt::skip]
        let f = Matrix4::new(
            1.0, 0.0, 1.0, 0.0,
            0.0, 1.0, 0.0, 1.0,
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        );
        let h = Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0);
        Self { x, p, f, q, h, r }
    }

    pub fn step(&mut self, z: Vector2<f64>) {
        let x = self.f * self.x;
        let p = self.f * self.p * self.f.transpose() + self.q;
        let s = self.h * p * self.h.transpose() + self.r;
        let k = p * self.h.transpose() * s.try_inverse().unwrap();
        self.x = x + k * (z - self.h * x);
        self.p = (Matrix4::identity() - k * self.h) * p;
    }
}

/// Soft-margin SVM dual solved by pairwise projected ascent (SMO style) until
/// the maximal KKT violation drops below `tol`.
pub struct QpSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    /// Every bias in this interval is optimal. It collapses to a point when
    /// some multiplier is strictly inside (0, C).
    pub bias_range: (f64, f64),
}

pub fn solve_svm_dual(x: &[Vec<f64>], y: &[f64], c: f64, kernel: impl Fn(&[f64], &[f64]) -> f64, tol: f64) -> QpSolution {
    let n = x.len();
    let k: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| kernel(&x[i], &x[j])).collect()).collect();
    let mut alpha = vec![0.0; n];
    // grad_i = 1 − y_i Σ_j α_j y_j K_ij  (gradient of the dual objective)
    let mut grad = vec![1.0; n];
    for _ in 0..1_000_000 {
        // Maximal violating pair on the -y·grad ordering.
        let mut i_up = None;
        let mut best_up = f64::NEG_INFINITY;
        let mut i_low = None;
        let mut best_low = f64::INFINITY;
        for t in 0..n {
            let v = y[t] * grad[t];
            let can_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let can_low = (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c);
            if can_up && v > best_up {
                best_up = v;
                i_up = Some(t);
            }
            if can_low && v < best_low {
                best_low = v;
                i_low = Some(t);
            }
        }
        let (Some(i), Some(j)) = (i_up, i_low) else { break };
        if best_up - best_low < tol {
            break;
        }
        // Move along y_i e_i − y_j e_j, which keeps Σ α y fixed.
        let curvature = (k[i][i] + k[j][j] - 2.0 * k[i][j]).max(1e-12);
        let mut step = (best_up - best_low) / curvature;
        let room = |t: usize, dir: f64| -> f64 {
            // largest s ≥ 0 such that α_t + dir·s stays in [0, C]
            if dir > 0.0 {
                c - alpha[t]
            } else {
                alpha[t]
            }
        };
        step = step.min(room(i, y[i])).min(room(j, -y[j]));
        alpha[i] += y[i] * step;
        alpha[j] -= y[j] * step;
        alpha[i] = alpha[i].clamp(0.0, c);
        alpha[j] = alpha[j].clamp(0.0, c);
        for t in 0..n {
            grad[t] -= y[t] * step * (k[t][i] - k[t][j]);
        }
    }
    // Bias from free vectors, or the middle of the feasible interval.
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for t in 0..n {
        let v = y[t] * grad[t];
        let free = alpha[t] > 1e-9 && alpha[t] < c - 1e-9;
        let at_zero = alpha[t] <= 1e-9;
        // y_t f(x_t) ≥ 1 when α = 0, ≤ 1 when α = C, = 1 in between.
        if free || (at_zero && y[t] > 0.0) || (!at_zero && y[t] < 0.0) {
            lo = lo.max(v);
        }
        if free || (at_zero && y[t] < 0.0) || (!at_zero && y[t] > 0.0) {
            hi = hi.min(v);
        }
    }
    let free: Vec<usize> = (0..n).filter(|&t| alpha[t] > 1e-9 && alpha[t] < c - 1e-9).collect();
    let bias = if !free.is_empty() {
        free.iter().map(|&t| y[t] * grad[t]).sum::<f64>() / free.len() as f64
    } else {
        0.5 * (lo + hi)
    };
    QpSolution { alpha, bias, bias_range: (lo.min(hi), hi.max(lo)) }
}

pub fn qp_decision(sol: &QpSolution, x: &[Vec<f64>], y: &[f64], kernel: impl Fn(&[f64], &[f64]) -> f64, point: &[f64]) -> f64 {
    sol.alpha.iter().zip(x).zip(y).map(|((a, xi), yi)| a * yi * kernel(xi, point)).sum::<f64>() + sol.bias
}
