//! Composite control laws `u = u₁ + u₂`.
//!
//! `u₁` is a static stabilising gain (state or output feedback). `u₂` obeys
//! a first-order law driven by the unconstrained coordinate `ε = Φ⁻¹(ξ, t)`
//! and is what keeps the constraint aggregate
//!
//! ```text
//! ξ = (state or output energy) + p₂u₁² + p₃(|u₂| + δ)²
//! ```
//!
//! inside the funnel. With `p₂ = p₀(1+r)` and `p₃ = p₀(1+r⁻¹)`,
//! `p₀u² ≤ p₂u₁² + p₃u₂²`.

use nalgebra::{Complex, DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funnel::TransformSpec;
use crate::matrix::SymMatrix;
use crate::plant::{sign, OutputPlant, StatePlant};
use crate::polynomial::Polynomial;

/// Numerator of the `u₂` gain `2 / (p₃(|u₂| + δ))`.
pub const U2_GAIN: f64 = 2.0;

/// Default `u₂(0)`. Any nonzero start works; zero would sit on the switching
/// point of `sign(u₂)`.
pub const DEFAULT_U2_INIT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights", into = "RawWeights")]
pub struct ConstraintWeights {
    p0: f64,
    r: f64,
    p2: f64,
    p3: f64,
    delta: f64,
    mu: f64,
}

#[derive(Serialize, Deserialize)]
struct RawWeights {
    p0: f64,
    r: f64,
    delta: f64,
    mu: f64,
}

impl TryFrom<RawWeights> for ConstraintWeights {
    type Error = Error;
    fn try_from(w: RawWeights) -> Result<Self> {
        Self::new(w.p0, w.r, w.delta, w.mu)
    }
}

impl From<ConstraintWeights> for RawWeights {
    fn from(w: ConstraintWeights) -> Self {
        RawWeights { p0: w.p0, r: w.r, delta: w.delta, mu: w.mu }
    }
}

impl ConstraintWeights {
    pub fn new(p0: f64, r: f64, delta: f64, mu: f64) -> Result<Self> {
        for (name, v) in [("p0", p0), ("r", r), ("delta", delta), ("mu", mu)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(Self { p0, r, p2: p0 * (1.0 + r), p3: p0 * (1.0 + 1.0 / r), delta, mu })
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }
    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn p2(&self) -> f64 {
        self.p2
    }
    pub fn p3(&self) -> f64 {
        self.p3
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `p₃(|u₂| + δ)²`.
    pub fn u2_term(&self, u2: f64) -> f64 {
        let m = u2.abs() + self.delta;
        self.p3 * m * m
    }

    /// `−(2 / (p₃(|u₂| + δ)))·sign(u₂)·bracket` with `sign(0) = +1`.
    pub fn u2_rate(&self, u2: f64, bracket: f64) -> f64 {
        -(U2_GAIN / (self.p3 * (u2.abs() + self.delta))) * sign_plus(u2) * bracket
    }

    /// Time derivative of `(|u₂| + δ)²` under the `u₂` law. It no longer
    /// depends on `u₂` directly: `−(2·U2_GAIN/p₃)·bracket`.
    pub fn magnitude_rate(&self, bracket: f64) -> f64 {
        -(2.0 * U2_GAIN / self.p3) * bracket
    }
}

/// `sign` with `sign(0) = +1`, used for `u₂`.
pub fn sign_plus(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// `u₁ = Kx` plus the `u₂` law for full-state feedback.
#[derive(Debug, Clone, PartialEq)]
pub struct StateFeedbackLaw {
    pub k: RowDVector<f64>,
    pub weights: ConstraintWeights,
    pub p1: SymMatrix,
    /// `P₁ + p₂KᵀK`.
    pub p1_bar: SymMatrix,
    /// `A + BK`.
    pub a_bar: DMatrix<f64>,
    pub b: DVector<f64>,
    pub alpha: f64,
    pub transform: TransformSpec,
    pub u2_init: f64,
    p1_bar_a_bar: DMatrix<f64>,
    p1_bar_sq: DMatrix<f64>,
}

impl StateFeedbackLaw {
    pub fn new(
        plant: &StatePlant,
        p1: SymMatrix,
        k: RowDVector<f64>,
        weights: ConstraintWeights,
        alpha: f64,
        transform: TransformSpec,
        u2_init: f64,
    ) -> Result<Self> {
        let n = plant.order();
        if p1.order() != n || k.len() != n {
            return Err(Error::Dimension(format!("P1 and K must match plant order {n}")));
        }
        if !(alpha > 0.0) {
            return Err(Error::Config(format!("alpha must be positive, got {alpha}")));
        }
        if !(p1.min_eigenvalue() > 0.0) {
            return Err(Error::Config("P1 must be positive definite".into()));
        }
        let p1_bar = SymMatrix::symmetrize(p1.as_matrix() + k.transpose() * &k * weights.p2());
        let a_bar = plant.closed_loop(&k);
        let p1_bar_a_bar = p1_bar.as_matrix() * &a_bar;
        let p1_bar_sq = p1_bar.as_matrix() * p1_bar.as_matrix();
        Ok(Self {
            k,
            weights,
            p1,
            p1_bar,
            a_bar,
            b: plant.b.clone(),
            alpha,
            transform,
            u2_init,
            p1_bar_a_bar,
            p1_bar_sq,
        })
    }

    pub fn u1(&self, x: &DVector<f64>) -> f64 {
        (&self.k * x)[(0, 0)]
    }

    /// `xᵀP₁x + p₂u₁² + p₃(|u₂| + δ)²`.
    pub fn xi(&self, x: &DVector<f64>, u1: f64, u2: f64) -> f64 {
        self.p1.quadratic_form(x.as_slice()) + self.weights.p2() * u1 * u1 + self.weights.u2_term(u2)
    }

    /// `xᵀP̄₁x + p₃(|u₂| + δ)²`, equal to [`Self::xi`] when `u₁ = Kx`.
    pub fn xi_reduced(&self, x: &DVector<f64>, u2: f64) -> f64 {
        self.p1_bar.quadratic_form(x.as_slice()) + self.weights.u2_term(u2)
    }

    /// `αε + 2xᵀP̄₁Āx + 2xᵀP̄₁Bu₂ + μ·sign(ε)·xᵀP̄₁²x`.
    pub fn bracket(&self, x: &DVector<f64>, u2: f64, eps: f64) -> f64 {
        let p1b_x = self.p1_bar.as_matrix() * x;
        self.alpha * eps
            + 2.0 * x.dot(&(&self.p1_bar_a_bar * x))
            + 2.0 * p1b_x.dot(&self.b) * u2
            + self.weights.mu() * sign(eps) * x.dot(&(&self.p1_bar_sq * x))
    }

    pub fn u2_derivative(&self, x: &DVector<f64>, u2: f64, eps: f64) -> f64 {
        self.weights.u2_rate(u2, self.bracket(x, u2, eps))
    }
}

/// Controllable-canonical realisation `(A_f, B_f, C_f, D_f)` of a proper
/// single-input single-output transfer function.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterRealization {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: RowDVector<f64>,
    pub d: f64,
}

impl FilterRealization {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn output(&self, state: &DVector<f64>, input: f64) -> f64 {
        self.c.dot(&state.transpose()) + self.d * input
    }

    pub fn derivative(&self, state: &DVector<f64>, input: f64) -> DVector<f64> {
        &self.a * state + &self.b * input
    }

    /// `C(sI − A)⁻¹B + D`.
    pub fn transfer(&self, s: Complex<f64>) -> Complex<f64> {
        let m = self.order();
        if m == 0 {
            return Complex::new(self.d, 0.0);
        }
        let lhs = DMatrix::<Complex<f64>>::from_fn(m, m, |i, j| {
            let diag = if i == j { s } else { Complex::new(0.0, 0.0) };
            diag - Complex::new(self.a[(i, j)], 0.0)
        });
        let rhs = DVector::<Complex<f64>>::from_fn(m, |i, _| Complex::new(self.b[i], 0.0));
        let z = lhs.lu().solve(&rhs).expect("s is not an eigenvalue of the filter");
        let y: Complex<f64> = (0..m).map(|i| z[i] * self.c[i]).sum();
        y + self.d
    }
}

/// Realises `p·R(p) / Q̄(p)`.
///
/// When the degrees match the filter is biproper: `D_f` is the ratio of
/// leading coefficients and the strictly proper remainder goes into the
/// companion form.
pub fn realize_filter(r: &Polynomial, q_bar: &Polynomial) -> Result<FilterRealization> {
    if q_bar.is_zero() {
        return Err(Error::Degenerate("filter denominator is the zero polynomial".into()));
    }
    let m = q_bar.degree();
    let lead = q_bar.leading();
    let num = r.shift();
    if !r.is_zero() && num.degree() > m {
        return Err(Error::ImproperFilter { numerator: num.degree(), denominator: m });
    }
    let d = if !r.is_zero() && num.degree() == m { num.leading() / lead } else { 0.0 };
    let rem = num.sub(&q_bar.scale(d));
    let rem_coeffs = rem.coefficients();

    let a = DMatrix::from_fn(m, m, |i, j| {
        if i + 1 < m {
            if j == i + 1 {
                1.0
            } else {
                0.0
            }
        } else {
            -q_bar.coefficients()[j] / lead
        }
    });
    let b = DVector::from_fn(m, |i, _| if i + 1 == m { 1.0 } else { 0.0 });
    let c = RowDVector::from_fn(m, |_, j| if j < m { rem_coeffs.get(j).copied().unwrap_or(0.0) / lead } else { 0.0 });
    Ok(FilterRealization { a, b, c, d })
}

/// `u₁ = ky` plus the `u₂` law for output feedback, with the filter
/// `pR(p)/Q̄(p)` standing in for the derivative of the output response to `u₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFeedbackLaw {
    pub k: f64,
    pub weights: ConstraintWeights,
    pub p1: f64,
    /// `p₁ + k²p₂`.
    pub p1_bar: f64,
    pub filter: FilterRealization,
    pub q_bar: Polynomial,
    pub alpha: f64,
    pub transform: TransformSpec,
    pub u2_init: f64,
}

impl OutputFeedbackLaw {
    pub fn new(
        plant: &OutputPlant,
        p1: f64,
        k: f64,
        weights: ConstraintWeights,
        alpha: f64,
        transform: TransformSpec,
        u2_init: f64,
    ) -> Result<Self> {
        if !(p1 > 0.0) {
            return Err(Error::Config(format!("p1 must be positive, got {p1}")));
        }
        if !(alpha > 0.0) {
            return Err(Error::Config(format!("alpha must be positive, got {alpha}")));
        }
        let io = plant.io_form(k);
        if !io.q_bar.is_hurwitz() {
            return Err(Error::Config(format!("closed-loop denominator Q - kR = {} is not Hurwitz", io.q_bar)));
        }
        let filter = realize_filter(&io.r, &io.q_bar)?;
        Ok(Self {
            k,
            weights,
            p1,
            p1_bar: p1 + k * k * weights.p2(),
            filter,
            q_bar: io.q_bar,
            alpha,
            transform,
            u2_init,
        })
    }

    pub fn u1(&self, y: f64) -> f64 {
        self.k * y
    }

    /// `p₁y² + p₂u₁² + p₃(|u₂| + δ)²`.
    pub fn xi(&self, y: f64, u1: f64, u2: f64) -> f64 {
        self.p1 * y * y + self.weights.p2() * u1 * u1 + self.weights.u2_term(u2)
    }

    /// `p̄₁y² + p₃(|u₂| + δ)²`.
    pub fn xi_reduced(&self, y: f64, u2: f64) -> f64 {
        self.p1_bar * y * y + self.weights.u2_term(u2)
    }

    /// `αε + 2p̄₁y·w + μp̄₁²·sign(ε)·y²`, `w` being the filter output.
    pub fn bracket(&self, y: f64, w: f64, eps: f64) -> f64 {
        self.alpha * eps + 2.0 * self.p1_bar * y * w + self.weights.mu() * self.p1_bar * self.p1_bar * sign(eps) * y * y
    }

    pub fn u2_derivative(&self, y: f64, w: f64, u2: f64, eps: f64) -> f64 {
        self.weights.u2_rate(u2, self.bracket(y, w, eps))
    }
}

/// `ε̇ = (ξ̇ − ∂Φ/∂t) / (∂Φ/∂ε)`. Only used to cross-check the algebraic
/// `ε = Φ⁻¹(ξ, t)` against an integrated one.
pub fn eps_dot_reference(transform: &TransformSpec, xi_dot: f64, eps: f64, t: f64) -> f64 {
    (xi_dot - transform.dphi_dt(eps, t)) / transform.dphi_deps(eps, t)
}
