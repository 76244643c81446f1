//! Matrix-inequality certificates for the funnel controllers.
//!
//! A certificate `(α, τ₁..τ₅, H)` is feasible when
//!
//! * the ε-block is negative semidefinite at both disturbance vertices,
//! * `cτ₁ ≥ v̄²τ₂ + γ²τ₃`,
//! * the H-block `[[ĀᵀH+HĀ+βH, HB, HD], [·, −τ₄, 0], [·, ·, −τ₅]]` is
//!   negative semidefinite,
//! * `ρβ ≥ (inf ḡ/p₃)τ₄ + v̄²τ₅`,
//! * `H` dominates the energy floor and is positive definite.
//!
//! `α` enters the ε-block only, so [`search`] solves for `H` once and then
//! sweeps `α` with `τ₁..τ₃` in closed form.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::controller::{OutputFeedbackLaw, StateFeedbackLaw};
use crate::error::{Error, Result};
use crate::matrix::{lyapunov_sum, SymMatrix};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::parallel::map_indexed;
use crate::plant::{OutputPlant, StatePlant};

pub const NSD_TOL: f64 = 1e-10;
pub const PD_TOL: f64 = 1e-10;

const ALPHA_GRID_MIN: f64 = 1e-2;
const ALPHA_GRID_MAX: f64 = 1e4;
const ALPHA_GRID_PER_DECADE: usize = 40;
const BUDGET_SHRINK: f64 = 1.0 - 1e-6;
const H_RIDGE: f64 = 1e-8;
const START_SCALES: [f64; 8] = [1.1, 1.5, 2.0, 3.0, 5.0, 1.2, 8.0, 1.02];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    StateFeedback,
    OutputFeedback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateProblem {
    pub kind: ProblemKind,
    pub mu: f64,
    pub beta: f64,
    pub c: f64,
    pub p3: f64,
    /// `f̄` (state case) or `φ̂` (output case).
    pub vertex: f64,
    pub gamma: f64,
    /// `inf ḡ(t)`.
    pub inf_upper: f64,
    /// `DᵀD` (state case) or 1 (output case).
    pub coupling: f64,
    /// `λ_min(P̄₁)` (state case) or `p̄₁` (output case).
    pub rho_den: f64,
    /// `P̄₁` (state case) or `p̄₁LᵀL` (output case).
    pub floor: SymMatrix,
    pub a_bar: DMatrix<f64>,
    pub b: DVector<f64>,
    pub d: DVector<f64>,
}

impl CertificateProblem {
    pub fn state_feedback(plant: &StatePlant, law: &StateFeedbackLaw, beta: f64, c: f64) -> Result<Self> {
        let funnel = &law.transform.funnel;
        let p = Self {
            kind: ProblemKind::StateFeedback,
            mu: law.weights.mu(),
            beta,
            c,
            p3: law.weights.p3(),
            vertex: plant.f_bar,
            gamma: funnel.gamma(),
            inf_upper: funnel.upper_infimum(),
            coupling: plant.d.dot(&plant.d),
            rho_den: law.p1_bar.min_eigenvalue(),
            floor: law.p1_bar.clone(),
            a_bar: law.a_bar.clone(),
            b: plant.b.clone(),
            d: plant.d.clone(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn output_feedback(plant: &OutputPlant, law: &OutputFeedbackLaw, beta: f64, c: f64) -> Result<Self> {
        let funnel = &law.transform.funnel;
        let p = Self {
            kind: ProblemKind::OutputFeedback,
            mu: law.weights.mu(),
            beta,
            c,
            p3: law.weights.p3(),
            vertex: plant.phi_hat,
            gamma: funnel.gamma(),
            inf_upper: funnel.upper_infimum(),
            coupling: 1.0,
            rho_den: law.p1_bar,
            floor: SymMatrix::symmetrize(plant.l.transpose() * &plant.l * law.p1_bar),
            a_bar: plant.closed_loop(law.k),
            b: plant.base.b.clone(),
            d: plant.base.d.clone(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.order();
        if self.a_bar.ncols() != n || self.b.len() != n || self.d.len() != n || self.floor.order() != n {
            return Err(Error::Dimension(format!("certificate problem blocks must all have order {n}")));
        }
        for (name, v) in [("mu", self.mu), ("beta", self.beta), ("p3", self.p3), ("inf_upper", self.inf_upper), ("rho_den", self.rho_den)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("c", self.c), ("vertex", self.vertex), ("gamma", self.gamma)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.a_bar.nrows()
    }

    pub fn vertices(&self) -> [f64; 2] {
        [self.vertex, -self.vertex]
    }

    /// `ρ = inf ḡ / λ_min(P̄₁)` or `inf ḡ / p̄₁`.
    pub fn rho(&self) -> f64 {
        self.inf_upper / self.rho_den
    }

    fn h_budget(&self) -> f64 {
        self.rho() * self.beta
    }

    fn tau4_cost(&self) -> f64 {
        self.inf_upper / self.p3
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub alpha: f64,
    #[serde(rename = "tau")]
    pub taus: [f64; 5],
    #[serde(rename = "H")]
    pub h: SymMatrix,
}

impl Certificate {
    pub fn new(alpha: f64, taus: [f64; 5], h: SymMatrix) -> Result<Self> {
        let c = Self { alpha, taus, h };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if let Some(i) = self.taus.iter().position(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(Error::Config(format!("tau{} must be positive, got {}", i + 1, self.taus[i])));
        }
        if !(self.h.min_eigenvalue() > 0.0) {
            return Err(Error::Config("H must be positive definite".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serialises")
    }
}

/// `[[−α+0.5τ₁, 0.5vμ⁻¹κ, −0.5], [·, −τ₂, 0], [·, ·, −τ₃]]` in the stacked
/// coordinates `(ε, f, ∂Φ/∂t)`, with `κ` the problem's coupling.
pub fn assemble_eps_block(problem: &CertificateProblem, cert: &Certificate, v: f64) -> SymMatrix {
    let [t1, t2, t3, _, _] = cert.taus;
    let b = 0.5 * v / problem.mu * problem.coupling;
    SymMatrix::from_upper(&DMatrix::from_row_slice(
        3,
        3,
        &[-cert.alpha + 0.5 * t1, b, -0.5, 0.0, -t2, 0.0, 0.0, 0.0, -t3],
    ))
}

/// Both scalar inequalities.
pub fn check_scalar_side(problem: &CertificateProblem, cert: &Certificate) -> bool {
    let (eps, h) = scalar_slacks(problem, cert);
    eps >= 0.0 && h >= 0.0
}

/// `(cτ₁ − v̄²τ₂ − γ²τ₃, ρβ − (inf ḡ/p₃)τ₄ − v̄²τ₅)`.
pub fn scalar_slacks(problem: &CertificateProblem, cert: &Certificate) -> (f64, f64) {
    let [t1, t2, t3, t4, t5] = cert.taus;
    let v2 = problem.vertex * problem.vertex;
    let eps = problem.c * t1 - v2 * t2 - problem.gamma * problem.gamma * t3;
    let h = problem.h_budget() - problem.tau4_cost() * t4 - v2 * t5;
    (eps, h)
}

pub fn assemble_h_block(problem: &CertificateProblem, cert: &Certificate) -> SymMatrix {
    h_block(problem, &cert.h, cert.taus[3], cert.taus[4])
}

fn h_block(problem: &CertificateProblem, h: &SymMatrix, tau4: f64, tau5: f64) -> SymMatrix {
    let n = problem.order();
    let hm = h.as_matrix();
    let lyap = lyapunov_sum(&problem.a_bar, h);
    let hb = hm * &problem.b;
    let hd = hm * &problem.d;
    let mut m = DMatrix::zeros(n + 2, n + 2);
    m.view_mut((0, 0), (n, n)).copy_from(&(lyap.as_matrix() + hm * problem.beta));
    m.view_mut((0, n), (n, 1)).copy_from(&hb);
    m.view_mut((0, n + 1), (n, 1)).copy_from(&hd);
    m[(n, n)] = -tau4;
    m[(n + 1, n + 1)] = -tau5;
    SymMatrix::from_upper(&m)
}

/// `λ_min(H − floor)`.
pub fn dominance_margin(problem: &CertificateProblem, h: &SymMatrix) -> f64 {
    h.sub(&problem.floor).min_eigenvalue()
}

pub fn check_h_dominance(problem: &CertificateProblem, cert: &Certificate) -> bool {
    dominance_margin(problem, &cert.h) >= -NSD_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub feasible: bool,
    /// `λ_max` of the ε-block at `+v̄` and `−v̄`.
    pub eps_block: [f64; 2],
    /// `λ_max` of the H-block.
    pub h_block: f64,
    pub scalar_eps_slack: f64,
    pub scalar_h_slack: f64,
    /// `λ_min(H − floor)`.
    pub dominance: f64,
    pub h_min_eigenvalue: f64,
}

pub fn verify(problem: &CertificateProblem, cert: &Certificate) -> VerifyReport {
    let [vp, vm] = problem.vertices();
    let eps_block = [
        assemble_eps_block(problem, cert, vp).max_eigenvalue(),
        assemble_eps_block(problem, cert, vm).max_eigenvalue(),
    ];
    let h_block = assemble_h_block(problem, cert).max_eigenvalue();
    let (scalar_eps_slack, scalar_h_slack) = scalar_slacks(problem, cert);
    let dominance = dominance_margin(problem, &cert.h);
    let h_min_eigenvalue = cert.h.min_eigenvalue();
    let feasible = eps_block.iter().all(|m| *m <= NSD_TOL)
        && h_block <= NSD_TOL
        && scalar_eps_slack >= 0.0
        && scalar_h_slack >= 0.0
        && dominance >= -NSD_TOL
        && h_min_eigenvalue > PD_TOL
        && cert.taus.iter().all(|t| *t > 0.0)
        && cert.alpha > 0.0;
    VerifyReport { feasible, eps_block, h_block, scalar_eps_slack, scalar_h_slack, dominance, h_min_eigenvalue }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOptions {
    pub seed: u64,
    pub restarts: usize,
    pub max_evals: usize,
    /// Tried before the grid.
    pub alpha_hint: Option<f64>,
    /// Fall back to the `α` grid when the hint fails or is absent.
    pub sweep_alpha: bool,
    /// Use these `τ₁..τ₅` instead of choosing them.
    pub fixed_taus: Option<[f64; 5]>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { seed: 0, restarts: 16, max_evals: 6000, alpha_hint: None, sweep_alpha: true, fixed_taus: None }
    }
}

/// Returned when no certificate was found within the budget. This is not a
/// proof that none exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfeasibleReport {
    pub reason: String,
    /// Best `λ_max` of the H-block reached (negative is good).
    pub best_h_block: f64,
    /// Smallest `α` for which the ε-part alone has a solution, if any.
    pub alpha_lower_bound: Option<f64>,
    pub restarts: usize,
}

impl fmt::Display for InfeasibleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "no certificate found after {} restarts ({}); best H-block max eigenvalue {:.6e}; search budget exhausted, not a proof of infeasibility",
            self.restarts, self.reason, self.best_h_block
        )?;
        if let Some(a) = self.alpha_lower_bound {
            write!(f, "; eps-part needs alpha >= {a:.6}")?;
        }
        Ok(())
    }
}

impl std::error::Error for InfeasibleReport {}

/// `τ₁..τ₃` for a given `α`, or `None` when the ε-part cannot hold at that
/// `α`. `τ₂, τ₃` minimise the `α` threshold and `τ₁` sits mid-box.
pub fn eps_taus(problem: &CertificateProblem, alpha: f64) -> Option<[f64; 3]> {
    let v2 = problem.vertex * problem.vertex;
    let g2 = problem.gamma * problem.gamma;
    let b = 0.5 * problem.vertex / problem.mu * problem.coupling;
    let c = problem.c;
    if c <= 0.0 && (v2 > 0.0 || g2 > 0.0) {
        return None;
    }
    let t2 = if problem.vertex > 0.0 && b != 0.0 { b.abs() * (2.0 * c).sqrt() / problem.vertex } else { 1.0 };
    let t3 = if problem.gamma > 0.0 { (0.5 * c).sqrt() / problem.gamma } else { 1.0 / alpha };
    let lo = if c > 0.0 { (v2 * t2 + g2 * t3) / c } else { 0.0 };
    let hi = 2.0 * (alpha - b * b / t2 - 0.25 / t3);
    if !(hi > lo) {
        return None;
    }
    let t1 = if lo > 0.0 { 0.5 * (lo + hi) } else { 0.5 * hi };
    Some([t1, t2, t3])
}

/// `|b|·v̄·√(2/c) + γ/√(2c)`: the infimum of admissible `α` for the ε-part.
pub fn alpha_lower_bound(problem: &CertificateProblem) -> Option<f64> {
    if problem.c <= 0.0 {
        return (problem.vertex == 0.0 && problem.gamma == 0.0).then_some(0.0);
    }
    let b = 0.5 * problem.vertex / problem.mu * problem.coupling;
    Some(b.abs() * problem.vertex * (2.0 / problem.c).sqrt() + problem.gamma / (2.0 * problem.c).sqrt())
}

pub fn alpha_grid() -> Vec<f64> {
    let decades = (ALPHA_GRID_MAX / ALPHA_GRID_MIN).log10();
    let steps = (decades * ALPHA_GRID_PER_DECADE as f64).round() as usize;
    (0..=steps).map(|i| ALPHA_GRID_MIN * 10f64.powf(i as f64 / ALPHA_GRID_PER_DECADE as f64)).collect()
}

#[derive(Debug, Clone)]
struct HCandidate {
    h: SymMatrix,
    tau4: f64,
    tau5: f64,
    objective: f64,
}

struct HParam<'a> {
    problem: &'a CertificateProblem,
    n: usize,
    fixed: Option<(f64, f64)>,
}

impl HParam<'_> {
    fn tri_len(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    fn dim(&self) -> usize {
        self.tri_len() + if self.fixed.is_some() { 0 } else { 2 }
    }

    fn decode(&self, x: &[f64]) -> (SymMatrix, f64, f64) {
        let n = self.n;
        let mut l = DMatrix::zeros(n, n);
        let mut k = 0;
        for i in 0..n {
            for j in 0..=i {
                l[(i, j)] = x[k];
                k += 1;
            }
        }
        let h = SymMatrix::symmetrize(
            self.problem.floor.as_matrix() + &l * l.transpose() + DMatrix::identity(n, n) * H_RIDGE,
        );
        let (tau4, tau5) = match self.fixed {
            Some(t) => t,
            None => {
                let (t4, t5) = (x[k].exp(), x[k + 1].exp());
                let cost = self.problem.tau4_cost() * t4 + self.problem.vertex.powi(2) * t5;
                let budget = self.problem.h_budget() * BUDGET_SHRINK;
                let shrink = if cost > budget { budget / cost } else { 1.0 };
                (t4 * shrink, t5 * shrink)
            }
        };
        (h, tau4, tau5)
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let (h, t4, t5) = self.decode(x);
        if !(h.as_matrix().iter().all(|v| v.is_finite()) && t4.is_finite() && t5.is_finite()) {
            return f64::INFINITY;
        }
        let block = h_block(self.problem, &h, t4, t5).max_eigenvalue();
        block.max(10.0 * PD_TOL - h.min_eigenvalue())
    }

    fn start(&self, index: usize, seed: u64) -> Vec<f64> {
        let n = self.n;
        let floor = self.problem.floor.as_matrix();
        let scale = START_SCALES[index % START_SCALES.len()];
        let level = (floor.trace() / n as f64).max(1e-3);
        let m = floor * (scale - 1.0) + DMatrix::identity(n, n) * (0.05 * level * scale);
        let chol = m.cholesky().map(|c| c.l()).unwrap_or_else(|| DMatrix::identity(n, n) * level.sqrt());
        let mut x = Vec::with_capacity(self.dim());
        for i in 0..n {
            for j in 0..=i {
                x.push(chol[(i, j)]);
            }
        }
        if self.fixed.is_none() {
            let budget = self.problem.h_budget();
            let v2 = self.problem.vertex.powi(2);
            x.push((0.5 * budget / self.problem.tau4_cost()).ln());
            x.push(if v2 > 0.0 { (0.5 * budget / v2).ln() } else { 0.0 });
        }
        if index > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(index as u64);
            let spread = 0.3 * level.sqrt();
            for xi in x.iter_mut().take(self.tri_len()) {
                let z: f64 = rng.sample(StandardNormal);
                *xi += spread * z;
            }
            for xi in x.iter_mut().skip(self.tri_len()) {
                let z: f64 = rng.sample(StandardNormal);
                *xi += 0.5 * z;
            }
        }
        x
    }
}

fn search_h(problem: &CertificateProblem, opts: &SearchOptions) -> HCandidate {
    let param = HParam { problem, n: problem.order(), fixed: opts.fixed_taus.map(|t| (t[3], t[4])) };
    let nm = NelderMeadOptions { max_evals: opts.max_evals, f_tol: 1e-13, target: f64::NEG_INFINITY, initial_step: 0.25 };
    let runs = map_indexed(opts.restarts.max(1), |k| {
        let x0 = param.start(k, opts.seed);
        let mut m = nelder_mead(|x| param.objective(x), &x0, &nm);
        let again = nelder_mead(|x| param.objective(x), &m.x, &nm);
        if again.value < m.value {
            m = again;
        }
        let (h, tau4, tau5) = param.decode(&m.x);
        HCandidate { h, tau4, tau5, objective: m.value }
    });
    runs.into_iter()
        .reduce(|best, c| if c.objective < best.objective { c } else { best })
        .expect("at least one restart")
}

/// Searches for a feasible certificate. Any certificate returned has passed
/// [`verify`].
pub fn search(problem: &CertificateProblem, opts: &SearchOptions) -> Result<Certificate, InfeasibleReport> {
    let restarts = opts.restarts.max(1);
    let bound = alpha_lower_bound(problem);
    let fail = |reason: &str, best: f64| InfeasibleReport {
        reason: reason.to_string(),
        best_h_block: best,
        alpha_lower_bound: bound,
        restarts,
    };
    if let Some(t) = opts.fixed_taus {
        if t.iter().any(|x| !(*x > 0.0)) {
            return Err(fail("fixed tau values must be positive", f64::NAN));
        }
    }
    if bound.is_none() && opts.fixed_taus.is_none() {
        return Err(fail("scalar side c*tau1 >= v^2*tau2 + gamma^2*tau3 has no positive solution", f64::NAN));
    }

    let cand = search_h(problem, opts);
    if cand.objective > NSD_TOL {
        return Err(fail("H-block could not be made negative semidefinite", cand.objective));
    }

    let mut alphas: Vec<f64> = opts.alpha_hint.into_iter().collect();
    if opts.sweep_alpha || opts.alpha_hint.is_none() {
        alphas.extend(alpha_grid().into_iter().filter(|a| bound.is_none_or(|b| *a > b)));
    }
    for alpha in alphas {
        let taus = match opts.fixed_taus {
            Some(t) => t,
            None => match eps_taus(problem, alpha) {
                Some([t1, t2, t3]) => [t1, t2, t3, cand.tau4, cand.tau5],
                None => continue,
            },
        };
        let cert = Certificate { alpha, taus, h: cand.h.clone() };
        if verify(problem, &cert).feasible {
            return Ok(cert);
        }
    }
    Err(fail("no alpha tried satisfies the eps-block", cand.objective))
}
