//! Small dense matrices of jets, stored row-major.

use nalgebra::DMatrix;

use crate::error::{GeomError, Result};
use crate::jet::Jet;

/// Condition numbers above this are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

pub fn values(a: &[Jet], rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |r, c| a[r * cols + c].value())
}

pub fn mul(a: &[Jet], b: &[Jet], rows: usize, inner: usize, cols: usize) -> Vec<Jet> {
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let mut acc = &a[r * inner] * &b[c];
            for k in 1..inner {
                acc = &acc + &(&a[r * inner + k] * &b[k * cols + c]);
            }
            out.push(acc);
        }
    }
    out
}

/// Condition number and determinant of a square matrix.
pub fn conditioning(m: &DMatrix<f64>) -> (f64, f64) {
    let det = m.determinant();
    let sv = m.singular_values();
    let (hi, lo) = (sv.max(), sv.min());
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    (det, cond)
}

/// Inverse of a numeric square matrix, rejecting near-singular input.
pub fn checked_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (det, condition) = conditioning(m);
    if !(condition.is_finite() && condition <= MAX_CONDITION && det != 0.0) {
        return Err(GeomError::DegenerateHessian { det, condition });
    }
    m.clone()
        .try_inverse()
        .ok_or(GeomError::DegenerateHessian { det, condition })
}

/// Inverse of a square jet matrix: `(A0 + E)^-1 = Σ_k (−A0⁻¹E)^k A0⁻¹`,
/// exact to the jet order because `E` has no constant term.
pub fn inverse(a: &[Jet], dim: usize) -> Result<Vec<Jet>> {
    let first = a.first().ok_or_else(|| GeomError::InvalidInput("empty matrix".into()))?;
    let (space, order) = (first.space().clone(), first.order());
    let inv0 = checked_inverse(&values(a, dim, dim))?;
    let inv0: Vec<Jet> = (0..dim * dim)
        .map(|k| Jet::constant(&space, order, inv0[(k / dim, k % dim)]))
        .collect();
    let e: Vec<Jet> = a.iter().map(|j| j.add_scalar(-j.value())).collect();
    let step: Vec<Jet> = mul(&inv0, &e, dim, dim, dim).iter().map(|j| -j).collect();
    let mut term = inv0.clone();
    let mut sum = inv0;
    for _ in 0..order {
        term = mul(&step, &term, dim, dim, dim);
        for (s, t) in sum.iter_mut().zip(&term) {
            *s = &*s + t;
        }
    }
    Ok(sum)
}
