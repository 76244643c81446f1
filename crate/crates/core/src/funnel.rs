//! Time-varying funnels `(g_lo(t), g_hi(t))` and the coordinate change
//!
//! ```text
//! Φ(ε, t) = (g_hi(t) − g_lo(t))/2 · T(ε) + (g_lo(t) + g_hi(t))/2
//! ```
//!
//! which maps the whole real line of `ε` into the open funnel. `T` is one of
//! three strictly increasing squashing functions onto `(−1, 1)`, each with a
//! closed-form derivative and inverse, so interiority, invertibility and the
//! Jacobian sign hold analytically rather than by assumption.
//!
//! Boundedness of `ε` is therefore equivalent to the aggregate staying
//! strictly inside the funnel, and controllers may work on `ε` without
//! constraints.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid step of the numerical funnel audits.
pub const AUDIT_STEP: f64 = 1e-3;

/// `|s|` ceiling applied before inverting `T` at the funnel edge.
pub const INVERSE_CLAMP: f64 = 1.0 - 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveFamily {
    /// `a`
    Constant,
    /// `a·e^{c t} + b`
    ExpOffset,
    /// `a·cos(c t) + b`
    CosOffset,
}

/// A closed-form positive curve of time, used for funnel edges and set limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCurve", into = "RawCurve")]
pub struct BoundCurve {
    family: CurveFamily,
    a: f64,
    b: f64,
    c: f64,
}

#[derive(Serialize, Deserialize)]
struct RawCurve {
    family: CurveFamily,
    a: f64,
    #[serde(default)]
    b: f64,
    #[serde(default)]
    c: f64,
}

impl TryFrom<RawCurve> for BoundCurve {
    type Error = Error;
    fn try_from(r: RawCurve) -> Result<Self> {
        Self::new(r.family, r.a, r.b, r.c)
    }
}

impl From<BoundCurve> for RawCurve {
    fn from(c: BoundCurve) -> Self {
        RawCurve { family: c.family, a: c.a, b: c.b, c: c.c }
    }
}

impl BoundCurve {
    /// Validates that the curve stays strictly positive for all `t >= 0`.
    pub fn new(family: CurveFamily, a: f64, b: f64, c: f64) -> Result<Self> {
        if ![a, b, c].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidCurve("parameters must be finite".into()));
        }
        let (b, c) = match family {
            CurveFamily::Constant => (0.0, 0.0),
            _ => (b, c),
        };
        let curve = Self { family, a, b, c };
        let inf = curve.infimum();
        if !(inf > 0.0) {
            return Err(Error::InvalidCurve(format!("{curve:?} is not strictly positive on t >= 0 (infimum {inf})")));
        }
        Ok(curve)
    }

    pub fn constant(a: f64) -> Result<Self> {
        Self::new(CurveFamily::Constant, a, 0.0, 0.0)
    }

    pub fn exp_offset(a: f64, c: f64, b: f64) -> Result<Self> {
        Self::new(CurveFamily::ExpOffset, a, b, c)
    }

    pub fn cos_offset(a: f64, c: f64, b: f64) -> Result<Self> {
        Self::new(CurveFamily::CosOffset, a, b, c)
    }

    pub fn family(&self) -> CurveFamily {
        self.family
    }

    pub fn params(&self) -> (f64, f64, f64) {
        (self.a, self.b, self.c)
    }

    pub fn value(&self, t: f64) -> f64 {
        match self.family {
            CurveFamily::Constant => self.a,
            CurveFamily::ExpOffset => self.a * (self.c * t).exp() + self.b,
            CurveFamily::CosOffset => self.a * (self.c * t).cos() + self.b,
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self.family {
            CurveFamily::Constant => 0.0,
            CurveFamily::ExpOffset => self.a * self.c * (self.c * t).exp(),
            CurveFamily::CosOffset => -self.a * self.c * (self.c * t).sin(),
        }
    }

    /// `inf_{t >= 0}` in closed form (may be `−∞`).
    pub fn infimum(&self) -> f64 {
        let (a, b, c) = (self.a, self.b, self.c);
        match self.family {
            CurveFamily::Constant => a,
            CurveFamily::ExpOffset => {
                if c < 0.0 {
                    (a + b).min(b)
                } else if c == 0.0 || a >= 0.0 {
                    a + b
                } else {
                    f64::NEG_INFINITY
                }
            }
            CurveFamily::CosOffset => {
                if c == 0.0 {
                    a + b
                } else {
                    b - a.abs()
                }
            }
        }
    }

    /// `sup_{t >= 0}` in closed form (may be `+∞`).
    pub fn supremum(&self) -> f64 {
        let (a, b, c) = (self.a, self.b, self.c);
        match self.family {
            CurveFamily::Constant => a,
            CurveFamily::ExpOffset => {
                if c < 0.0 {
                    (a + b).max(b)
                } else if c == 0.0 || a <= 0.0 {
                    a + b
                } else {
                    f64::INFINITY
                }
            }
            CurveFamily::CosOffset => {
                if c == 0.0 {
                    a + b
                } else {
                    b + a.abs()
                }
            }
        }
    }

    /// `sup_{t >= 0} |d/dt curve|` in closed form.
    pub fn derivative_bound(&self) -> f64 {
        let (a, c) = (self.a, self.c);
        match self.family {
            CurveFamily::Constant => 0.0,
            CurveFamily::ExpOffset => {
                if c <= 0.0 {
                    (a * c).abs()
                } else if a == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            CurveFamily::CosOffset => (a * c).abs(),
        }
    }

    /// Both curves as `α·e^{ct}+β` or `α·cos(ct)+β` with a shared `c`, so the
    /// difference is again a curve of the same family.
    fn difference(&self, other: &BoundCurve) -> Option<(CurveFamily, f64, f64, f64)> {
        let lift = |k: &BoundCurve| match k.family {
            CurveFamily::Constant => (None, 0.0, k.a, 0.0),
            f => (Some(f), k.a, k.b, k.c),
        };
        let (f1, a1, b1, c1) = lift(self);
        let (f2, a2, b2, c2) = lift(other);
        let family = match (f1, f2) {
            (None, None) => CurveFamily::ExpOffset,
            (Some(f), None) | (None, Some(f)) => f,
            (Some(f), Some(g)) if f == g && c1 == c2 => f,
            _ => return None,
        };
        let c = if f1.is_some() { c1 } else { c2 };
        Some((family, a1 - a2, b1 - b2, c))
    }
}

/// Lower and upper funnel edges together with the declared bound `γ` on
/// `|∂Φ/∂t|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFunnel", into = "RawFunnel")]
pub struct FunnelBounds {
    lower: BoundCurve,
    upper: BoundCurve,
    gamma: f64,
    horizon: f64,
}

#[derive(Serialize, Deserialize)]
struct RawFunnel {
    lower: BoundCurve,
    upper: BoundCurve,
    gamma: f64,
    #[serde(default = "default_audit_horizon")]
    horizon: f64,
}

fn default_audit_horizon() -> f64 {
    100.0
}

impl TryFrom<RawFunnel> for FunnelBounds {
    type Error = Error;
    fn try_from(r: RawFunnel) -> Result<Self> {
        Self::new(r.lower, r.upper, r.gamma, r.horizon)
    }
}

impl From<FunnelBounds> for RawFunnel {
    fn from(f: FunnelBounds) -> Self {
        RawFunnel { lower: f.lower, upper: f.upper, gamma: f.gamma, horizon: f.horizon }
    }
}

impl FunnelBounds {
    /// Validates positive width (analytically when both edges share a family
    /// and rate, otherwise on a grid over `[0, horizon]`) and that `gamma`
    /// dominates the audited `sup |∂Φ/∂t|`.
    pub fn new(lower: BoundCurve, upper: BoundCurve, gamma: f64, horizon: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidFunnel(format!("gamma must be positive and finite, got {gamma}")));
        }
        if !(horizon > 0.0) {
            return Err(Error::InvalidFunnel(format!("audit horizon must be positive, got {horizon}")));
        }
        let funnel = Self { lower, upper, gamma, horizon };
        funnel.check_width()?;
        let audited = audit_gamma(&funnel, horizon);
        if audited > gamma {
            return Err(Error::InvalidFunnel(format!(
                "declared gamma {gamma} is below the audited sup |dPhi/dt| = {audited}"
            )));
        }
        Ok(funnel)
    }

    fn check_width(&self) -> Result<()> {
        let analytic = match self.upper.difference(&self.lower) {
            Some((family, a, b, c)) => match family {
                CurveFamily::ExpOffset => Some(BoundCurve { family, a, b, c }.infimum() > 0.0),
                CurveFamily::CosOffset => Some(BoundCurve { family, a, b, c }.infimum() > 0.0),
                CurveFamily::Constant => Some(a > 0.0),
            },
            None => None,
        };
        let ok = match analytic {
            Some(true) => true,
            Some(false) => false,
            None if self.upper.infimum() > self.lower.supremum() => true,
            None => grid(self.horizon).all(|t| self.upper.value(t) - self.lower.value(t) > 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidFunnel("upper edge does not stay strictly above the lower edge".into()))
        }
    }

    pub fn lower(&self) -> &BoundCurve {
        &self.lower
    }

    pub fn upper(&self) -> &BoundCurve {
        &self.upper
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `(g_lo(t), g_hi(t))`.
    pub fn at(&self, t: f64) -> (f64, f64) {
        (self.lower.value(t), self.upper.value(t))
    }

    pub fn contains(&self, xi: f64, t: f64) -> bool {
        let (lo, hi) = self.at(t);
        lo < xi && xi < hi
    }

    /// `inf_t g_hi(t)`, the level used by the certificate inequalities.
    pub fn upper_infimum(&self) -> f64 {
        self.upper.infimum()
    }

    /// `max(sup|g_lo'|, sup|g_hi'|)`. `∂Φ/∂t` is a convex combination of
    /// the two edge derivatives, so this always bounds it.
    pub fn analytic_gamma(&self) -> f64 {
        self.lower.derivative_bound().max(self.upper.derivative_bound())
    }
}

fn grid(horizon: f64) -> impl Iterator<Item = f64> {
    let n = (horizon / AUDIT_STEP).ceil() as usize;
    (0..=n).map(move |i| (i as f64 * AUDIT_STEP).min(horizon))
}

/// Grid estimate of `sup |∂Φ/∂t|` over `t ∈ [0, horizon]` and `|T| < 1`.
///
/// `∂Φ/∂t` is affine in `T`, so the supremum over `T` sits at `T = ±1`.
pub fn audit_gamma(funnel: &FunnelBounds, horizon: f64) -> f64 {
    grid(horizon)
        .map(|t| {
            let dl = funnel.lower.derivative(t);
            let du = funnel.upper.derivative(t);
            dl.abs().max(du.abs())
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    /// `ε / (1 + |ε|)`
    Rational,
    /// `tanh(ε/2) = (e^ε − 1)/(e^ε + 1)`
    TanhHalf,
    /// `(2/π)·atan(ε)`
    Arctan,
}

impl TransformKind {
    pub const ALL: [TransformKind; 3] = [TransformKind::Rational, TransformKind::TanhHalf, TransformKind::Arctan];

    pub fn squash(self, eps: f64) -> f64 {
        match self {
            TransformKind::Rational => eps / (1.0 + eps.abs()),
            TransformKind::TanhHalf => (0.5 * eps).tanh(),
            TransformKind::Arctan => 2.0 / PI * eps.atan(),
        }
    }

    pub fn squash_derivative(self, eps: f64) -> f64 {
        match self {
            TransformKind::Rational => {
                let d = 1.0 + eps.abs();
                1.0 / (d * d)
            }
            TransformKind::TanhHalf => {
                let c = (0.5 * eps).cosh();
                0.5 / (c * c)
            }
            TransformKind::Arctan => 2.0 / (PI * (1.0 + eps * eps)),
        }
    }

    /// `1 − |T(ε)|` without cancellation.
    pub fn squash_complement(self, eps: f64) -> f64 {
        let a = eps.abs();
        match self {
            TransformKind::Rational => 1.0 / (1.0 + a),
            TransformKind::TanhHalf => 2.0 / (a.exp() + 1.0),
            TransformKind::Arctan if a == 0.0 => 1.0,
            TransformKind::Arctan => 2.0 / PI * (1.0 / a).atan(),
        }
    }

    /// Inverse of `squash` on `(−1, 1)`.
    pub fn unsquash(self, s: f64) -> f64 {
        match self {
            TransformKind::Rational => s / (1.0 - s.abs()),
            TransformKind::TanhHalf => 2.0 * s.atanh(),
            TransformKind::Arctan => (0.5 * PI * s).tan(),
        }
    }
}

/// The coordinate change for one funnel and one squashing function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub kind: TransformKind,
    pub funnel: FunnelBounds,
}

/// Result of an inverse evaluation that may have hit the clamp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inverse {
    pub eps: f64,
    /// Normalised position `s ∈ (−1, 1)` before clamping.
    pub s: f64,
    pub clamped: bool,
}

impl TransformSpec {
    pub fn new(kind: TransformKind, funnel: FunnelBounds) -> Self {
        Self { kind, funnel }
    }

    pub fn eval_t(&self, eps: f64) -> f64 {
        self.kind.squash(eps)
    }

    /// Measured from the nearer edge, and kept strictly inside when `T`
    /// rounds to `±1`.
    pub fn phi(&self, eps: f64, t: f64) -> f64 {
        let (lo, hi) = self.funnel.at(t);
        let gap = 0.5 * (hi - lo) * self.kind.squash_complement(eps);
        if eps >= 0.0 {
            (hi - gap).min(hi.next_down())
        } else {
            (lo + gap).max(lo.next_up())
        }
    }

    /// `(2ξ − g_lo − g_hi)/(g_hi − g_lo)`: the position of `ξ` in the funnel
    /// rescaled to `(−1, 1)`.
    pub fn normalized(&self, xi: f64, t: f64) -> f64 {
        let (lo, hi) = self.funnel.at(t);
        (2.0 * xi - lo - hi) / (hi - lo)
    }

    /// Closed-form inverse. Fails when `ξ` is not strictly inside the funnel.
    pub fn phi_inv(&self, xi: f64, t: f64) -> Result<f64> {
        let (lo, hi) = self.funnel.at(t);
        if !(lo < xi && xi < hi) {
            return Err(Error::OutsideFunnel { xi, t, lower: lo, upper: hi });
        }
        Ok(self.phi_inv_saturating(xi, t).eps)
    }

    /// Inverse that never fails: `s` is clamped to `±(1 − 1e−15)` and the
    /// clamp is reported. Used inside integrator stages.
    pub fn phi_inv_saturating(&self, xi: f64, t: f64) -> Inverse {
        let s = self.normalized(xi, t);
        let clamped = !(s.abs() <= INVERSE_CLAMP);
        if !clamped && self.kind == TransformKind::TanhHalf {
            let (lo, hi) = self.funnel.at(t);
            return Inverse { eps: ((xi - lo) / (hi - xi)).ln(), s, clamped };
        }
        let sc = if s.is_nan() { 0.0 } else { s.clamp(-INVERSE_CLAMP, INVERSE_CLAMP) };
        Inverse { eps: self.kind.unsquash(sc), s, clamped }
    }

    /// `∂Φ/∂ε = (g_hi − g_lo)/2 · T'(ε) > 0`.
    pub fn dphi_deps(&self, eps: f64, t: f64) -> f64 {
        let (lo, hi) = self.funnel.at(t);
        0.5 * (hi - lo) * self.kind.squash_derivative(eps)
    }

    /// `∂Φ/∂t = (g_hi' − g_lo')/2 · T(ε) + (g_lo' + g_hi')/2`.
    pub fn dphi_dt(&self, eps: f64, t: f64) -> f64 {
        let dl = self.funnel.lower.derivative(t);
        let du = self.funnel.upper.derivative(t);
        0.5 * (du - dl) * self.kind.squash(eps) + 0.5 * (dl + du)
    }
}
