//! Small dense linear systems.

use crate::{Error, Result};

/// Relative pivot threshold below which a system is declared singular.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseSystem {
    /// Row-major n×n matrix.
    pub matrix: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

impl DenseSystem {
    pub fn new(matrix: Vec<Vec<f64>>, rhs: Vec<f64>) -> Result<Self> {
        let n = rhs.len();
        if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension(format!(
                "matrix is {}x{:?}, rhs has {n} entries",
                matrix.len(),
                matrix.first().map(|r| r.len())
            )));
        }
        Ok(Self { matrix, rhs })
    }

    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    pub fn residual_inf(&self, x: &[f64]) -> f64 {
        mat_vec(&self.matrix, x)
            .iter()
            .zip(&self.rhs)
            .map(|(ax, b)| (ax - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

/// LU factors with row permutation, stored in place.
struct Lu {
    lu: Vec<Vec<f64>>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(mut a: Vec<Vec<f64>>) -> Result<Self> {
        let n = a.len();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
                .expect("non-empty range");
            let pivot = a[p][k];
            if !(pivot.abs() >= PIVOT_TOLERANCE) {
                return Err(Error::Singular { column: k, pivot });
            }
            a.swap(k, p);
            perm.swap(k, p);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                a[i][k] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        a[i][j] -= f * a[k][j];
                    }
                }
            }
        }
        Ok(Self { lu: a, perm })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        for i in 0..n {
            for j in 0..i {
                y[i] -= self.lu[i][j] * y[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                y[i] -= self.lu[i][j] * y[j];
            }
            y[i] /= self.lu[i][i];
        }
        y
    }
}

/// Solves `A·x = b` by LU factorisation with partial pivoting, after scaling
/// each equation by its largest coefficient.
pub fn solve_linear(sys: &DenseSystem) -> Result<Vec<f64>> {
    let n = sys.dim();
    let mut a = sys.matrix.clone();
    let mut b = sys.rhs.clone();
    for i in 0..n {
        let scale = a[i].iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        if !scale.is_finite() || !b[i].is_finite() {
            return Err(Error::Domain(format!("non-finite entry in equation {i}")));
        }
        if scale == 0.0 {
            return Err(Error::Singular { column: i, pivot: 0.0 });
        }
        a[i].iter_mut().for_each(|v| *v /= scale);
        b[i] /= scale;
    }
    Ok(Lu::factor(a)?.solve(&b))
}

fn norm1(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    (0..n)
        .map(|j| a.iter().map(|r| r[j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// ‖A‖₁·‖A⁻¹‖₁ of the unscaled matrix; infinite when singular. Diagnostic
/// only.
pub fn condition_estimate(sys: &DenseSystem) -> f64 {
    let n = sys.dim();
    if n == 0 {
        return 1.0;
    }
    let Ok(lu) = Lu::factor(sys.matrix.clone()) else {
        return f64::INFINITY;
    };
    let mut inv_norm: f64 = 0.0;
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = lu.solve(&e);
        inv_norm = inv_norm.max(col.iter().map(|v| v.abs()).sum());
    }
    norm1(&sys.matrix) * inv_norm
}
