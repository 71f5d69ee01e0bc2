//! Small dense linear algebra.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Solves `A x = b` for square row-major `A` by Gaussian elimination with
/// partial pivoting. Fails when a pivot is negligible relative to the
/// largest entry of `A`.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    if a.len() != n || a.iter().any(|row| row.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.len(),
        });
    }
    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Err(Error::SingularSystem);
    }
    let tiny = scale * 1e-14;

    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        if m[pivot][col].abs() <= tiny {
            return Err(Error::SingularSystem);
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            if factor == 0.0 {
                continue;
            }
            let (upper, lower) = m.split_at_mut(row);
            for (a, b) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *a -= factor * b;
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| m[row][k] * x[k]).sum();
        x[row] = (rhs[row] - s) / m[row][row];
    }
    Ok(x)
}

/// Singular values of a row-major matrix, in no particular order.
pub fn singular_values(rows: &[Vec<f64>]) -> Vec<f64> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    let mat = DMatrix::from_fn(r, c, |i, j| rows[i][j]);
    mat.singular_values().iter().copied().collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
