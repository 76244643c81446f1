//! Linear single-input plants `ẋ = Ax + Bu + Df`, the input-output
//! polynomial form of the measured variant `y = Lx`, and the composite
//! disturbance signal used by the reproduction scenarios.

use nalgebra::{DMatrix, DVector, RowDVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polynomial::{char_poly, numerator_poly, Polynomial};

#[derive(Debug, Clone, PartialEq)]
pub struct StatePlant {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub d: DVector<f64>,
    /// Bound on `|f(t)|`.
    pub f_bar: f64,
}

impl StatePlant {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, d: DVector<f64>, f_bar: f64) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() || n == 0 {
            return Err(Error::Dimension(format!("A must be square, got {}x{}", a.nrows(), a.ncols())));
        }
        if b.len() != n || d.len() != n {
            return Err(Error::Dimension(format!("B and D must have {n} rows (got {} and {})", b.len(), d.len())));
        }
        if !(f_bar >= 0.0) {
            return Err(Error::Config(format!("disturbance bound must be non-negative, got {f_bar}")));
        }
        Ok(Self { a, b, d, f_bar })
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// `A + B K`.
    pub fn closed_loop(&self, k: &RowDVector<f64>) -> DMatrix<f64> {
        &self.a + &self.b * k
    }

    /// Routh test on `det(pI − (A + BK))`.
    pub fn is_stabilized_by(&self, k: &RowDVector<f64>) -> bool {
        char_poly(&self.closed_loop(k)).map(|p| p.is_hurwitz()).unwrap_or(false)
    }
}

/// `A x + B u + D f`.
pub fn plant_derivative(plant: &StatePlant, x: &DVector<f64>, u: f64, f: f64) -> DVector<f64> {
    &plant.a * x + &plant.b * u + &plant.d * f
}

/// Polynomial description `Q(p) y = R(p) u + φ` and, for a static output
/// gain `k`, the closed-loop denominator `Q̄ = Q − kR`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IoForm {
    pub q: Polynomial,
    pub r: Polynomial,
    pub q_bar: Polynomial,
}

/// How a quoted reference polynomial compares with the derived ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceCheck {
    pub matches_q: bool,
    pub matches_q_bar: bool,
}

impl IoForm {
    pub fn check_reference(&self, reference: &Polynomial) -> ReferenceCheck {
        ReferenceCheck { matches_q: &self.q == reference, matches_q_bar: &self.q_bar == reference }
    }
}

pub fn derive_io_form(a: &DMatrix<f64>, b: &DVector<f64>, l: &RowDVector<f64>, k: f64) -> Result<IoForm> {
    let q = char_poly(a)?;
    let r = numerator_poly(a, b, l)?;
    if r.is_zero() {
        return Err(Error::Degenerate("L adj(pI - A) B vanishes identically".into()));
    }
    let q_bar = q.sub(&r.scale(k));
    Ok(IoForm { q, r, q_bar })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputPlant {
    pub base: StatePlant,
    pub l: RowDVector<f64>,
    pub q: Polynomial,
    pub r: Polynomial,
    /// Bound on the filtered lumped disturbance.
    pub phi_hat: f64,
}

impl OutputPlant {
    /// Derives `Q`, `R` and checks strict minimum phase (`R` Hurwitz) and
    /// `deg R < deg Q`.
    pub fn new(base: StatePlant, l: RowDVector<f64>, phi_hat: f64) -> Result<Self> {
        if l.len() != base.order() {
            return Err(Error::Dimension(format!("L must have {} columns, got {}", base.order(), l.len())));
        }
        if !(phi_hat >= 0.0) {
            return Err(Error::Config(format!("phi_hat must be non-negative, got {phi_hat}")));
        }
        let io = derive_io_form(&base.a, &base.b, &l, 0.0)?;
        if io.r.degree() >= io.q.degree() {
            return Err(Error::Config(format!("deg R = {} must be below deg Q = {}", io.r.degree(), io.q.degree())));
        }
        if !io.r.is_hurwitz() {
            return Err(Error::Config(format!("plant is not strictly minimum phase: R(p) = {}", io.r)));
        }
        Ok(Self { base, l, q: io.q, r: io.r, phi_hat })
    }

    pub fn output(&self, x: &DVector<f64>) -> f64 {
        self.l.dot(&x.transpose())
    }

    /// `A + k B L`.
    pub fn closed_loop(&self, k: f64) -> DMatrix<f64> {
        &self.base.a + (&self.base.b * &self.l) * k
    }

    pub fn io_form(&self, k: f64) -> IoForm {
        IoForm { q: self.q.clone(), r: self.r.clone(), q_bar: self.q.sub(&self.r.scale(k)) }
    }
}

/// Square wave plus slow sine plus saturated zero-order-hold noise:
///
/// `f(t) = amplitude·[sign(sin(ω_sq t)) + sine_gain·sin(ω_s t) + sat(d(t))]`
///
/// `d` holds one Gaussian draw per `sample_time` window with variance
/// `noise_power / sample_time` (the usual discrete stand-in for band-limited
/// white noise of the given power). `sat` clamps to `[−1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceSpec {
    pub amplitude: f64,
    pub square_freq: f64,
    pub sine_gain: f64,
    pub sine_freq: f64,
    pub noise_power: f64,
    pub sample_time: f64,
    pub seed: u64,
}

impl Default for DisturbanceSpec {
    fn default() -> Self {
        Self {
            amplitude: 0.1,
            square_freq: 1.7,
            sine_gain: 0.2,
            sine_freq: 0.3,
            noise_power: 0.3,
            sample_time: 0.2,
            seed: 0,
        }
    }
}

impl DisturbanceSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_time > 0.0) {
            return Err(Error::Config(format!("sample_time must be positive, got {}", self.sample_time)));
        }
        if !(self.noise_power >= 0.0) {
            return Err(Error::Config(format!("noise_power must be non-negative, got {}", self.noise_power)));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    /// `|amplitude|·(1 + |sine_gain| + 1)`, or without the noise term when
    /// the noise power is zero.
    pub fn bound(&self) -> f64 {
        let noise = if self.noise_power > 0.0 { 1.0 } else { 0.0 };
        self.amplitude.abs() * (1.0 + self.sine_gain.abs() + noise)
    }

    /// Hold window containing `t`.
    pub fn window(&self, t: f64) -> u64 {
        (t / self.sample_time).floor().max(0.0) as u64
    }

    /// Saturated noise value of window `k`; a pure function of `(seed, k)`.
    pub fn noise(&self, k: u64) -> f64 {
        if self.noise_power == 0.0 {
            return 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k);
        let sd = (self.noise_power / self.sample_time).sqrt();
        let normal = Normal::new(0.0, sd).expect("finite standard deviation");
        normal.sample(&mut rng).clamp(-1.0, 1.0)
    }

    /// Deterministic part, without the noise term.
    pub fn smooth_part(&self, t: f64) -> f64 {
        self.amplitude * (sign(((self.square_freq) * t).sin()) + self.sine_gain * (self.sine_freq * t).sin())
    }

    /// `f(t)` with the noise taken from window `k`. All stages of one
    /// integrator step share the window of the step start.
    pub fn value_in_window(&self, t: f64, k: u64) -> f64 {
        self.smooth_part(t) + self.amplitude * self.noise(k)
    }

    pub fn value(&self, t: f64) -> f64 {
        self.value_in_window(t, self.window(t))
    }
}

/// `sign` with `sign(0) = 0`.
pub fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}
