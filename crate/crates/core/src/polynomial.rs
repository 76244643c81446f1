//! Real polynomials in the differentiation operator `p`, plus the two
//! matrix-to-polynomial maps used for the input-output form of a plant:
//! `det(pI − A)` and `L·adj(pI − A)·B`.
//!
//! Both maps run the Faddeev–LeVerrier recurrence. When every input entry is
//! an integer the recurrence is carried out in `i128`, which makes the
//! coefficients exact; otherwise it runs in `f64`.

use std::fmt;

use nalgebra::{Complex, DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients in ascending degree. The zero polynomial is `[0.0]`; every
/// other polynomial has a nonzero leading coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![0.0] }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    /// `∏ (p − rᵢ)`.
    pub fn from_roots(roots: &[f64]) -> Self {
        roots
            .iter()
            .fold(Self::constant(1.0), |acc, r| acc.mul(&Self::new(vec![-r, 1.0])))
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == 0.0
    }

    pub fn leading(&self) -> f64 {
        *self.coeffs.last().unwrap()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn eval_complex(&self, s: Complex<f64>) -> Complex<f64> {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex::new(0.0, 0.0), |acc, c| acc * s + c)
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new(
            (0..n)
                .map(|i| self.coeffs.get(i).unwrap_or(&0.0) + other.coeffs.get(i).unwrap_or(&0.0))
                .collect(),
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    /// Multiplication by `p`.
    pub fn shift(&self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let mut c = Vec::with_capacity(self.coeffs.len() + 1);
        c.push(0.0);
        c.extend_from_slice(&self.coeffs);
        Self::new(c)
    }

    /// Polynomial long division, returning `(quotient, remainder)`.
    pub fn div_rem(&self, divisor: &Self) -> (Self, Self) {
        assert!(!divisor.is_zero(), "division by the zero polynomial");
        if self.degree() < divisor.degree() {
            return (Self::zero(), self.clone());
        }
        let mut rem = self.coeffs.clone();
        let dd = divisor.degree();
        let lead = divisor.leading();
        let mut quot = vec![0.0; self.degree() - dd + 1];
        for k in (0..quot.len()).rev() {
            let q = rem[k + dd] / lead;
            quot[k] = q;
            for (j, d) in divisor.coeffs.iter().enumerate() {
                rem[k + j] -= q * d;
            }
            rem[k + dd] = 0.0;
        }
        rem.truncate(dd.max(1));
        (Self::new(quot), Self::new(rem))
    }

    /// Strict Hurwitz test (all roots in the open left half-plane) via the
    /// Routh array. A zero in the first column counts as failure.
    pub fn is_hurwitz(&self) -> bool {
        if self.is_zero() {
            return false;
        }
        let n = self.degree();
        if n == 0 {
            return true;
        }
        let sign = self.leading().signum();
        // Descending coefficients, normalised to a positive leading term.
        let desc: Vec<f64> = self.coeffs.iter().rev().map(|c| c * sign).collect();
        if desc.iter().any(|c| *c <= 0.0) {
            return false;
        }
        let width = n / 2 + 1;
        let mut prev: Vec<f64> = (0..width).map(|i| *desc.get(2 * i).unwrap_or(&0.0)).collect();
        let mut cur: Vec<f64> = (0..width).map(|i| *desc.get(2 * i + 1).unwrap_or(&0.0)).collect();
        for _ in 1..n {
            if cur[0] <= 0.0 {
                return false;
            }
            let next: Vec<f64> = (0..width)
                .map(|i| {
                    let a = prev.get(i + 1).copied().unwrap_or(0.0);
                    let b = cur.get(i + 1).copied().unwrap_or(0.0);
                    (cur[0] * a - prev[0] * b) / cur[0]
                })
                .collect();
            prev = cur;
            cur = next;
        }
        cur[0] > 0.0
    }

    /// True when every coefficient is an integer-valued float.
    pub fn is_integral(&self) -> bool {
        self.coeffs.iter().all(|c| c.fract() == 0.0)
    }
}

impl TryFrom<Vec<f64>> for Polynomial {
    type Error = Error;

    fn try_from(c: Vec<f64>) -> Result<Self> {
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("polynomial coefficients must be finite".into()));
        }
        Ok(Self::new(c))
    }
}

impl From<Polynomial> for Vec<f64> {
    fn from(p: Polynomial) -> Self {
        p.coeffs
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0.0 {
                continue;
            }
            let mag = c.abs();
            if first {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if c < 0.0 { '-' } else { '+' })?;
            }
            first = false;
            match (k, mag == 1.0) {
                (0, _) => write!(f, "{mag}")?,
                (1, true) => write!(f, "p")?,
                (1, false) => write!(f, "{mag}p")?,
                (_, true) => write!(f, "p^{k}")?,
                (_, false) => write!(f, "{mag}p^{k}")?,
            }
        }
        Ok(())
    }
}

fn as_exact_int(v: f64) -> Option<i128> {
    // |v| < 2^52
    (v.fract() == 0.0 && v.abs() < 4_503_599_627_370_496.0).then_some(v as i128)
}

fn to_int_matrix(m: &DMatrix<f64>) -> Option<Vec<Vec<i128>>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| as_exact_int(m[(i, j)])).collect())
        .collect()
}

/// Faddeev–LeVerrier over the integers. Returns the characteristic
/// coefficients (ascending, monic) and the adjugate matrices `M_1..M_n`
/// where `adj(pI − A) = Σ_k M_k p^{n−k}`.
#[allow(clippy::type_complexity)]
fn leverrier_int(a: &[Vec<i128>]) -> (Vec<i128>, Vec<Vec<Vec<i128>>>) {
    let n = a.len();
    let mut c = vec![0i128; n + 1];
    c[n] = 1;
    let mut mats = Vec::with_capacity(n);
    let mut m_prev = vec![vec![0i128; n]; n];
    for k in 1..=n {
        // M_k = A M_{k−1} + c_{n−k+1} I
        let mut m = vec![vec![0i128; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0i128;
                for l in 0..n {
                    acc += a[i][l] * m_prev[l][j];
                }
                m[i][j] = acc;
            }
            m[i][i] += c[n - k + 1];
        }
        // c_{n−k} = −tr(A M_k) / k, exact for integer A.
        let mut tr = 0i128;
        for i in 0..n {
            for l in 0..n {
                tr += a[i][l] * m[l][i];
            }
        }
        debug_assert_eq!(tr % k as i128, 0, "Faddeev–LeVerrier division must be exact");
        c[n - k] = -tr / k as i128;
        mats.push(m.clone());
        m_prev = m;
    }
    (c, mats)
}

fn leverrier_float(a: &DMatrix<f64>) -> (Vec<f64>, Vec<DMatrix<f64>>) {
    let n = a.nrows();
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let mut mats = Vec::with_capacity(n);
    let mut m_prev = DMatrix::<f64>::zeros(n, n);
    let id = DMatrix::<f64>::identity(n, n);
    for k in 1..=n {
        let m = a * &m_prev + &id * c[n - k + 1];
        c[n - k] = -(a * &m).trace() / k as f64;
        mats.push(m.clone());
        m_prev = m;
    }
    (c, mats)
}

fn check_square(a: &DMatrix<f64>) -> Result<usize> {
    if !a.is_square() || a.nrows() == 0 {
        return Err(Error::Dimension(format!("expected a non-empty square matrix, got {}x{}", a.nrows(), a.ncols())));
    }
    Ok(a.nrows())
}

/// `det(pI − A)`, monic.
pub fn char_poly(a: &DMatrix<f64>) -> Result<Polynomial> {
    check_square(a)?;
    if let Some(ai) = to_int_matrix(a) {
        let (c, _) = leverrier_int(&ai);
        return Ok(Polynomial::new(c.into_iter().map(|v| v as f64).collect()));
    }
    let (c, _) = leverrier_float(a);
    Ok(Polynomial::new(c))
}

/// `L · adj(pI − A) · B`; degree at most `n − 1`.
pub fn numerator_poly(a: &DMatrix<f64>, b: &DVector<f64>, l: &RowDVector<f64>) -> Result<Polynomial> {
    let n = check_square(a)?;
    if b.len() != n || l.len() != n {
        return Err(Error::Dimension(format!(
            "numerator_poly: A is {n}x{n}, B has {} rows, L has {} columns",
            b.len(),
            l.len()
        )));
    }
    let bi: Option<Vec<i128>> = b.iter().map(|v| as_exact_int(*v)).collect();
    let li: Option<Vec<i128>> = l.iter().map(|v| as_exact_int(*v)).collect();
    let mut coeffs = vec![0.0; n];
    match (to_int_matrix(a), bi, li) {
        (Some(ai), Some(bi), Some(li)) => {
            let (_, mats) = leverrier_int(&ai);
            for (k, m) in mats.iter().enumerate() {
                let mut acc = 0i128;
                for i in 0..n {
                    for j in 0..n {
                        acc += li[i] * m[i][j] * bi[j];
                    }
                }
                // M_{k+1} multiplies p^{n−k−1}.
                coeffs[n - k - 1] = acc as f64;
            }
        }
        _ => {
            let (_, mats) = leverrier_float(a);
            for (k, m) in mats.iter().enumerate() {
                coeffs[n - k - 1] = (l * m * b)[(0, 0)];
            }
        }
    }
    Ok(Polynomial::new(coeffs))
}
