//! Dense symmetric matrices and the eigenvalue routines behind every
//! definiteness test in the crate.
//!
//! Eigenvalues come from cyclic Jacobi rotations. All matrices handled here
//! are small (order 2 to 8), where Jacobi is accurate to a few ulps and needs
//! no pivoting or shifting strategy.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;
const OFF_DIAGONAL_RTOL: f64 = 1e-14;

/// Symmetric matrix. Symmetry holds bit-for-bit: construction either checks
/// it or mirrors the upper triangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMatrix {
    inner: DMatrix<f64>,
}

impl SymMatrix {
    /// Builds from a square matrix, requiring `|a_ij - a_ji| <= tol`.
    /// The stored matrix is the exact average of the two triangles.
    pub fn from_matrix(m: DMatrix<f64>, tol: f64) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "symmetric matrix must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                let gap = (m[(i, j)] - m[(j, i)]).abs();
                if gap > tol || gap.is_nan() {
                    return Err(Error::NotSymmetric { row: i, col: j, gap });
                }
            }
        }
        Ok(Self::symmetrize(m))
    }

    /// Mirrors the upper triangle onto the lower one.
    pub fn from_upper(m: &DMatrix<f64>) -> Self {
        assert!(m.is_square() && m.nrows() > 0, "from_upper needs a square matrix");
        let n = m.nrows();
        let mut out = m.clone();
        for i in 0..n {
            for j in (i + 1)..n {
                out[(j, i)] = m[(i, j)];
            }
        }
        Self { inner: out }
    }

    /// `(m + mᵀ) / 2`.
    pub fn symmetrize(m: DMatrix<f64>) -> Self {
        assert!(m.is_square() && m.nrows() > 0, "symmetrize needs a square matrix");
        let n = m.nrows();
        let mut out = m;
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (out[(i, j)] + out[(j, i)]);
                out[(i, j)] = avg;
                out[(j, i)] = avg;
            }
        }
        Self { inner: out }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("rows of a symmetric matrix must all have length n".into()));
        }
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::from_matrix(m, 0.0)
    }

    pub fn identity(n: usize) -> Self {
        Self { inner: DMatrix::identity(n, n) }
    }

    pub fn zeros(n: usize) -> Self {
        Self { inner: DMatrix::zeros(n, n) }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        Self { inner: DMatrix::from_fn(n, n, |i, j| if i == j { values[i] } else { 0.0 }) }
    }

    pub fn order(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn scale(&self, k: f64) -> Self {
        Self { inner: &self.inner * k }
    }

    pub fn add(&self, other: &SymMatrix) -> Self {
        Self { inner: &self.inner + &other.inner }
    }

    pub fn sub(&self, other: &SymMatrix) -> Self {
        Self { inner: &self.inner - &other.inner }
    }

    /// `vᵀ M v`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        let n = self.order();
        assert_eq!(v.len(), n, "quadratic form dimension mismatch");
        v.iter()
            .enumerate()
            .map(|(i, vi)| vi * v.iter().enumerate().map(|(j, vj)| self.inner[(i, j)] * vj).sum::<f64>())
            .sum()
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.norm()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.order())
            .map(|i| (0..self.order()).map(|j| self.inner[(i, j)]).collect())
            .collect()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigenvalues(self)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *eigenvalues(self).last().expect("order >= 1")
    }

    pub fn min_eigenvalue(&self) -> f64 {
        eigenvalues(self)[0]
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("symmetric matrix rows must form a non-empty square".into()));
        }
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        let scale = m.amax().max(1.0);
        Self::from_matrix(m, 1e-12 * scale)
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        m.to_rows()
    }
}

/// All eigenvalues of `m`, ascending.
///
/// Cyclic Jacobi: sweeps over every off-diagonal pair until the off-diagonal
/// Frobenius norm drops below `1e-14 * ‖m‖_F`. A matrix with non-finite
/// entries yields NaNs instead of iterating.
pub fn eigenvalues(m: &SymMatrix) -> Vec<f64> {
    let n = m.order();
    let mut a = m.as_matrix().clone();
    if a.iter().any(|v| !v.is_finite()) {
        return vec![f64::NAN; n];
    }
    let scale = a.norm();
    if n == 1 || scale == 0.0 {
        return sorted_diagonal(&a);
    }
    let threshold = OFF_DIAGONAL_RTOL * scale;

    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) < threshold {
            return sorted_diagonal(&a);
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                rotate(&mut a, p, q);
            }
        }
    }
    if off_diagonal_norm(&a) < threshold {
        return sorted_diagonal(&a);
    }
    panic!("Jacobi eigenvalue iteration did not converge in {MAX_SWEEPS} sweeps");
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[(i, j)] * a[(i, j)];
            }
        }
    }
    acc.sqrt()
}

fn sorted_diagonal(a: &DMatrix<f64>) -> Vec<f64> {
    let mut d: Vec<f64> = (0..a.nrows()).map(|i| a[(i, i)]).collect();
    d.sort_by(f64::total_cmp);
    d
}

/// One Jacobi rotation zeroing `a[p][q]` (Golub & Van Loan, sym.schur2).
fn rotate(a: &mut DMatrix<f64>, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let app = a[(p, p)];
    let aqq = a[(q, q)];
    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    let n = a.nrows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
}

/// True iff the largest eigenvalue is at most `tol`.
pub fn is_negative_semidefinite(m: &SymMatrix, tol: f64) -> bool {
    debug_assert!(tol >= 0.0);
    m.max_eigenvalue() <= tol
}

/// True iff the smallest eigenvalue is at least `-tol`.
pub fn is_positive_semidefinite(m: &SymMatrix, tol: f64) -> bool {
    m.min_eigenvalue() >= -tol
}

/// Principal-minor test for negative semidefiniteness, orders 2 and 3 only.
///
/// `M <= 0` iff every principal minor of `-M` is non-negative. Minors are
/// compared against `tol` scaled by the matrix size.
pub fn is_nsd_by_minors(m: &SymMatrix, tol: f64) -> bool {
    let n = m.order();
    assert!(n == 2 || n == 3, "minor test implemented for orders 2 and 3");
    let neg = m.scale(-1.0);
    let a = |i: usize, j: usize| neg.get(i, j);
    let s = neg.frobenius_norm().max(1.0);
    let eps1 = tol * s;
    let eps2 = tol * s * s;
    let eps3 = tol * s * s * s;
    // 1x1 minors
    if (0..n).any(|i| a(i, i) < -eps1) {
        return false;
    }
    // 2x2 minors
    for i in 0..n {
        for j in (i + 1)..n {
            if a(i, i) * a(j, j) - a(i, j) * a(j, i) < -eps2 {
                return false;
            }
        }
    }
    if n == 3 {
        let det = a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1))
            - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
            + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
        if det < -eps3 {
            return false;
        }
    }
    true
}

/// `Mᵀ H + H M` as a symmetric matrix.
pub fn lyapunov_sum(m: &DMatrix<f64>, h: &SymMatrix) -> SymMatrix {
    let hm = h.as_matrix() * m;
    SymMatrix::symmetrize(hm.transpose() + hm)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(rows: &[&[f64]]) -> SymMatrix {
        SymMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn identity_eigenvalues() {
        assert_eq!(eigenvalues(&SymMatrix::identity(3)), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_eigenvalues_sorted() {
        assert_eq!(eigenvalues(&SymMatrix::diagonal(&[5.0, -2.0])), vec![-2.0, 5.0]);
    }

    #[test]
    fn two_by_two_from_characteristic_polynomial() {
        // λ² − 4λ + 3 = (λ − 1)(λ − 3)
        let ev = eigenvalues(&sym(&[&[2.0, 1.0], &[1.0, 2.0]]));
        assert!((ev[0] - 1.0).abs() < 1e-14);
        assert!((ev[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn nsd_cases() {
        assert!(is_negative_semidefinite(&SymMatrix::zeros(3), 0.0));
        assert!(!is_negative_semidefinite(&SymMatrix::identity(2), 0.0));
        // eigenvalues −1.5, −0.5
        let m = sym(&[&[-1.0, 0.5], &[0.5, -1.0]]);
        assert!(is_negative_semidefinite(&m, 0.0));
        let ev = eigenvalues(&m);
        assert!((ev[0] + 1.5).abs() < 1e-15 && (ev[1] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn minors_agree_on_simple_cases() {
        assert!(is_nsd_by_minors(&sym(&[&[-1.0, 0.5], &[0.5, -1.0]]), 0.0));
        assert!(!is_nsd_by_minors(&sym(&[&[-1.0, 2.0], &[2.0, -1.0]]), 0.0));
        assert!(!is_nsd_by_minors(&SymMatrix::identity(3), 0.0));
    }

    #[test]
    fn rejects_asymmetric_input() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 1.0]);
        assert!(matches!(SymMatrix::from_matrix(m, 1e-12), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn from_upper_mirrors() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 7.0, -3.0, 2.0]);
        let s = SymMatrix::from_upper(&m);
        assert_eq!(s.get(1, 0), 7.0);
    }

    #[test]
    fn serde_round_trip() {
        let m = sym(&[&[0.54, 0.88], &[0.88, 1.86]]);
        let json = serde_json::to_string(&m).unwrap();
        let back: SymMatrix = serde_json::from_str(&json).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn eigenvalues_of_order_eight() {
        // Tridiagonal (2, -1): eigenvalues 2 − 2 cos(kπ/9).
        let n = 8;
        let m = DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
            0 => 2.0,
            1 => -1.0,
            _ => 0.0,
        });
        let ev = eigenvalues(&SymMatrix::from_matrix(m, 0.0).unwrap());
        for (k, v) in ev.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / 9.0).cos();
            assert!((v - exact).abs() <= 1e-10 * exact.abs().max(1.0), "{v} vs {exact}");
        }
    }
}
