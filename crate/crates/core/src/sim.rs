//! Fixed-step closed-loop simulation with funnel and constraint monitoring.
//!
//! The `u₂` law is integrated in the magnitude coordinate
//! `w = (|u₂| + δ)²`, whose rate `−(2·U2_GAIN/p₃)·bracket` is free of the
//! `1/(|u₂| + δ)` factor. The sign of `u₂` is carried between steps and
//! reset to `+1` whenever `w` reaches its floor `δ²`, where `u₂ = 0`.

use std::fmt::Write as _;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::controller::{eps_dot_reference, OutputFeedbackLaw, StateFeedbackLaw, U2_GAIN};
use crate::error::{Error, Result};
use crate::funnel::{BoundCurve, TransformSpec};
use crate::matrix::SymMatrix;
use crate::parallel::map_indexed;
use crate::plant::{plant_derivative, DisturbanceSpec, OutputPlant, StatePlant};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub step: f64,
    pub horizon: f64,
    pub record_stride: usize,
    pub seed: u64,
    /// Integrate `ε` through its differential equation alongside the
    /// algebraic inverse.
    pub track_eps_reference: bool,
    /// Start of the window over which [`ViolationReport::settled_sup`] is
    /// taken.
    pub settle_from: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { step: 1e-3, horizon: 100.0, record_stride: 100, seed: 0, track_eps_reference: false, settle_from: None }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::Config(format!("step must be positive, got {}", self.step)));
        }
        if !(self.horizon >= self.step) {
            return Err(Error::Config(format!("horizon {} shorter than step {}", self.horizon, self.step)));
        }
        if self.record_stride == 0 {
            return Err(Error::Config("record_stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.step).round() as usize
    }

    /// Integration steps per disturbance hold.
    pub fn hold_steps(&self, disturbance: &DisturbanceSpec) -> Result<u64> {
        let ratio = disturbance.sample_time / self.step;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio {
            return Err(Error::Config(format!(
                "sample_time {} is not an integer multiple of step {}",
                disturbance.sample_time, self.step
            )));
        }
        Ok(n as u64)
    }
}

/// Time-varying bounds of the constraint sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetLimits {
    /// `xᵀP₁x ≤ l_x(t)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<BoundCurve>,
    /// `p₁y² ≤ l_y(t)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<BoundCurve>,
    /// `p₀u² ≤ l_u(t)`.
    pub u: BoundCurve,
}

impl SetLimits {
    /// Whether `ḡ(t) ≤ inf{l(t)}` holds on a grid over the horizon, the
    /// condition under which funnel membership implies set membership.
    pub fn dominates(&self, transform: &TransformSpec, horizon: f64) -> bool {
        let steps = (horizon / 1e-2).ceil() as usize;
        (0..=steps).all(|i| {
            let t = i as f64 * 1e-2;
            let g = transform.funnel.upper().value(t);
            [self.x, self.y, Some(self.u)].iter().flatten().all(|l| g <= l.value(t) + 1e-12)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Option<f64>,
    pub u1: f64,
    pub u2: f64,
    pub u: f64,
    pub xi: f64,
    pub eps: f64,
    pub f: f64,
    pub v1: f64,
    pub v2: f64,
    pub in_funnel: bool,
    pub in_x: Option<bool>,
    pub in_y: Option<bool>,
    pub in_u: bool,
    pub eps_reference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub order: usize,
    pub records: Vec<Record>,
}

impl Trajectory {
    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        h.extend((1..=self.order).map(|i| format!("x{i}")));
        h.extend(["y", "u1", "u2", "u", "xi", "eps", "f", "V1", "V2", "in_funnel"].map(String::from));
        h
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header().join(",");
        out.push('\n');
        for r in &self.records {
            let _ = write!(out, "{}", r.t);
            for v in &r.x {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(
                out,
                ",{},{},{},{},{},{},{},{},{},{}",
                r.y.unwrap_or(f64::NAN),
                r.u1,
                r.u2,
                r.u,
                r.xi,
                r.eps,
                r.f,
                r.v1,
                r.v2,
                u8::from(r.in_funnel)
            );
        }
        out
    }
}

/// First occurrence and count of one kind of event.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EventCount {
    pub count: u64,
    pub first: Option<f64>,
}

impl EventCount {
    fn hit(&mut self, t: f64) {
        self.count += 1;
        self.first.get_or_insert(t);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    /// `min (ξ − g̲)`.
    pub funnel_lower: f64,
    /// `min (ḡ − ξ)`.
    pub funnel_upper: f64,
    pub set_x: Option<f64>,
    pub set_y: Option<f64>,
    pub set_u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub steps: u64,
    pub funnel: EventCount,
    pub set_x: EventCount,
    pub set_y: EventCount,
    pub set_u: EventCount,
    /// Steps at which some RK stage had `ξ` outside the funnel and the
    /// inverse transform was clamped.
    pub inverse_clamp: EventCount,
    pub non_finite: EventCount,
    pub margins: Margins,
    /// `sup ½ε²`.
    pub sup_v1: f64,
    /// `sup |ε|`.
    pub sup_abs_eps: f64,
    /// `sup |u|`.
    pub sup_abs_u: f64,
    /// `sup` of `xᵀP̄₁x` (state case) or `p̄₁y²` (output case) from
    /// `settle_from` on.
    pub settled_sup: Option<f64>,
    /// `sup |ε − ε_ref|` when the reference was tracked.
    pub eps_drift: Option<f64>,
}

impl ViolationReport {
    fn new() -> Self {
        Self {
            steps: 0,
            funnel: EventCount::default(),
            set_x: EventCount::default(),
            set_y: EventCount::default(),
            set_u: EventCount::default(),
            inverse_clamp: EventCount::default(),
            non_finite: EventCount::default(),
            margins: Margins {
                funnel_lower: f64::INFINITY,
                funnel_upper: f64::INFINITY,
                set_x: None,
                set_y: None,
                set_u: f64::INFINITY,
            },
            sup_v1: 0.0,
            sup_abs_eps: 0.0,
            sup_abs_u: 0.0,
            settled_sup: None,
            eps_drift: None,
        }
    }

    /// No funnel, set, clamp or non-finite events.
    pub fn is_clean(&self) -> bool {
        [self.funnel, self.set_x, self.set_y, self.set_u, self.inverse_clamp, self.non_finite]
            .iter()
            .all(|e| e.count == 0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub trajectory: Trajectory,
    pub report: ViolationReport,
}

/// One classical Runge–Kutta step.
pub fn rk4_step<F>(f: F, t: f64, z: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let k1 = f(t, z);
    let k2 = f(t + 0.5 * h, &(z + &k1 * (0.5 * h)));
    let k3 = f(t + 0.5 * h, &(z + &k2 * (0.5 * h)));
    let k4 = f(t + h, &(z + &k3 * h));
    z + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// What one closed loop has to provide to the shared integrator.
trait Loop {
    fn order(&self) -> usize;
    fn extra(&self) -> usize;
    fn transform(&self) -> &TransformSpec;
    fn delta(&self) -> f64;
    fn p3(&self) -> f64;
    fn initial(&self, x0: &[f64], u2: f64) -> DVector<f64>;
    /// `(ẋ and extra states, bracket, ξ̇ without the p₃ẇ term)`.
    fn rates(&self, z: &DVector<f64>, u2: f64, eps: f64, f: f64) -> (DVector<f64>, f64, f64);
    fn observe(&self, z: &DVector<f64>, u2: f64) -> Observed;
}

struct Observed {
    y: Option<f64>,
    u1: f64,
    xi: f64,
    x_energy: Option<f64>,
    settled: f64,
}

struct StateLoop<'a> {
    plant: &'a StatePlant,
    law: &'a StateFeedbackLaw,
}

impl Loop for StateLoop<'_> {
    fn order(&self) -> usize {
        self.plant.order()
    }
    fn extra(&self) -> usize {
        0
    }
    fn transform(&self) -> &TransformSpec {
        &self.law.transform
    }
    fn delta(&self) -> f64 {
        self.law.weights.delta()
    }
    fn p3(&self) -> f64 {
        self.law.weights.p3()
    }
    fn initial(&self, x0: &[f64], _u2: f64) -> DVector<f64> {
        DVector::from_column_slice(x0)
    }
    fn rates(&self, z: &DVector<f64>, u2: f64, eps: f64, f: f64) -> (DVector<f64>, f64, f64) {
        let x = z.rows(0, self.order()).into_owned();
        let u1 = self.law.u1(&x);
        let dx = plant_derivative(self.plant, &x, u1 + u2, f);
        let bracket = self.law.bracket(&x, u2, eps);
        let xi_dot = 2.0 * (self.law.p1_bar.as_matrix() * &x).dot(&dx);
        (dx, bracket, xi_dot)
    }
    fn observe(&self, z: &DVector<f64>, u2: f64) -> Observed {
        let x = z.rows(0, self.order()).into_owned();
        let u1 = self.law.u1(&x);
        Observed {
            y: None,
            u1,
            xi: self.law.xi(&x, u1, u2),
            x_energy: Some(self.law.p1.quadratic_form(x.as_slice())),
            settled: self.law.p1_bar.quadratic_form(x.as_slice()),
        }
    }
}

struct OutputLoop<'a> {
    plant: &'a OutputPlant,
    law: &'a OutputFeedbackLaw,
}

impl Loop for OutputLoop<'_> {
    fn order(&self) -> usize {
        self.plant.base.order()
    }
    fn extra(&self) -> usize {
        self.law.filter.order()
    }
    fn transform(&self) -> &TransformSpec {
        &self.law.transform
    }
    fn delta(&self) -> f64 {
        self.law.weights.delta()
    }
    fn p3(&self) -> f64 {
        self.law.weights.p3()
    }
    fn initial(&self, x0: &[f64], _u2: f64) -> DVector<f64> {
        let mut z = DVector::zeros(self.order() + self.extra());
        z.rows_mut(0, self.order()).copy_from_slice(x0);
        z
    }
    fn rates(&self, z: &DVector<f64>, u2: f64, eps: f64, f: f64) -> (DVector<f64>, f64, f64) {
        let n = self.order();
        let m = self.extra();
        let x = z.rows(0, n).into_owned();
        let xf = z.rows(n, m).into_owned();
        let y = self.plant.output(&x);
        let u1 = self.law.u1(y);
        let dx = plant_derivative(&self.plant.base, &x, u1 + u2, f);
        let w = self.law.filter.output(&xf, u2);
        let dxf = self.law.filter.derivative(&xf, u2);
        let bracket = self.law.bracket(y, w, eps);
        let y_dot = self.plant.l.dot(&dx.transpose());
        let xi_dot = 2.0 * self.law.p1_bar * y * y_dot;
        let mut out = DVector::zeros(n + m);
        out.rows_mut(0, n).copy_from(&dx);
        out.rows_mut(n, m).copy_from(&dxf);
        (out, bracket, xi_dot)
    }
    fn observe(&self, z: &DVector<f64>, u2: f64) -> Observed {
        let x = z.rows(0, self.order()).into_owned();
        let y = self.plant.output(&x);
        let u1 = self.law.u1(y);
        Observed {
            y: Some(y),
            u1,
            xi: self.law.xi(y, u1, u2),
            x_energy: None,
            settled: self.law.p1_bar * y * y,
        }
    }
}

/// Everything a run needs besides the loop itself.
#[derive(Debug, Clone, PartialEq)]
pub struct RunInputs<'a> {
    pub x0: &'a [f64],
    pub u2_init: f64,
    pub disturbance: DisturbanceSpec,
    pub limits: SetLimits,
    /// `p₀` of the input set `p₀u² ≤ l_u`.
    pub p0: f64,
    /// `p₁` of the output set, output case only.
    pub p1_output: Option<f64>,
    /// `H` of a certificate, for the `V₂ = xᵀHx` column.
    pub h: Option<&'a SymMatrix>,
}

pub fn run_state_feedback(
    plant: &StatePlant,
    law: &StateFeedbackLaw,
    inputs: &RunInputs<'_>,
    config: &SimConfig,
) -> Result<SimOutcome> {
    integrate(&StateLoop { plant, law }, inputs, config)
}

pub fn run_output_feedback(
    plant: &OutputPlant,
    law: &OutputFeedbackLaw,
    inputs: &RunInputs<'_>,
    config: &SimConfig,
) -> Result<SimOutcome> {
    integrate(&OutputLoop { plant, law }, inputs, config)
}

fn integrate<L: Loop>(lp: &L, inputs: &RunInputs<'_>, config: &SimConfig) -> Result<SimOutcome> {
    config.validate()?;
    inputs.disturbance.validate()?;
    let n = lp.order();
    if inputs.x0.len() != n {
        return Err(Error::Dimension(format!("x0 has {} entries, plant order is {n}", inputs.x0.len())));
    }
    if let Some(h) = inputs.h {
        if h.order() != n {
            return Err(Error::Dimension(format!("H has order {}, plant order is {n}", h.order())));
        }
    }
    let hold = config.hold_steps(&inputs.disturbance)?;
    let transform = *lp.transform();
    let delta = lp.delta();
    let floor = delta * delta;
    let p3 = lp.p3();

    // z = [x; extra; w; ε_ref?]
    let base = n + lp.extra();
    let w_idx = base;
    let ref_idx = base + 1;
    let len = base + 1 + usize::from(config.track_eps_reference);
    let mut z = DVector::zeros(len);
    z.rows_mut(0, base).copy_from(&lp.initial(inputs.x0, inputs.u2_init));
    z[w_idx] = (inputs.u2_init.abs() + delta).powi(2);
    let mut sigma = if inputs.u2_init < 0.0 { -1.0 } else { 1.0 };

    let u2_of = |w: f64, sigma: f64| sigma * (w.max(floor).sqrt() - delta);

    let obs0 = lp.observe(&z, inputs.u2_init);
    if !transform.funnel.contains(obs0.xi, 0.0) {
        let (lo, hi) = transform.funnel.at(0.0);
        return Err(Error::OutsideFunnel { xi: obs0.xi, t: 0.0, lower: lo, upper: hi });
    }
    if config.track_eps_reference {
        z[ref_idx] = transform.phi_inv(obs0.xi, 0.0)?;
    }

    let steps = config.steps();
    let mut report = ViolationReport::new();
    let mut records = Vec::with_capacity(steps / config.record_stride + 2);
    let mut drift: f64 = 0.0;

    let mut observe = |k: usize, z: &DVector<f64>, sigma: f64, f: f64, report: &mut ViolationReport| -> bool {
        let t = k as f64 * config.step;
        let u2 = u2_of(z[w_idx], sigma);
        let o = lp.observe(z, u2);
        let u = o.u1 + u2;
        let (lo, hi) = transform.funnel.at(t);
        let inv = transform.phi_inv_saturating(o.xi, t);
        let finite = z.iter().all(|v| v.is_finite()) && o.xi.is_finite();
        if !finite {
            report.non_finite.hit(t);
            return false;
        }
        let in_funnel = lo < o.xi && o.xi < hi;
        if !in_funnel {
            report.funnel.hit(t);
        }
        report.margins.funnel_lower = report.margins.funnel_lower.min(o.xi - lo);
        report.margins.funnel_upper = report.margins.funnel_upper.min(hi - o.xi);

        let in_x = match (o.x_energy, inputs.limits.x) {
            (Some(e), Some(l)) => {
                let gap = l.value(t) - e;
                report.margins.set_x = Some(report.margins.set_x.map_or(gap, |m| m.min(gap)));
                if gap < 0.0 {
                    report.set_x.hit(t);
                }
                Some(gap >= 0.0)
            }
            _ => None,
        };
        let in_y = match (o.y, inputs.p1_output, inputs.limits.y) {
            (Some(y), Some(p1), Some(l)) => {
                let gap = l.value(t) - p1 * y * y;
                report.margins.set_y = Some(report.margins.set_y.map_or(gap, |m| m.min(gap)));
                if gap < 0.0 {
                    report.set_y.hit(t);
                }
                Some(gap >= 0.0)
            }
            _ => None,
        };
        let u_gap = inputs.limits.u.value(t) - inputs.p0 * u * u;
        report.margins.set_u = report.margins.set_u.min(u_gap);
        if u_gap < 0.0 {
            report.set_u.hit(t);
        }

        report.sup_v1 = report.sup_v1.max(0.5 * inv.eps * inv.eps);
        report.sup_abs_eps = report.sup_abs_eps.max(inv.eps.abs());
        report.sup_abs_u = report.sup_abs_u.max(u.abs());
        if let Some(from) = config.settle_from {
            if t >= from - 1e-12 {
                report.settled_sup = Some(report.settled_sup.map_or(o.settled, |s| s.max(o.settled)));
            }
        }
        let eps_reference = config.track_eps_reference.then(|| z[ref_idx]);
        if let Some(r) = eps_reference {
            drift = drift.max((r - inv.eps).abs());
        }

        if k.is_multiple_of(config.record_stride) || k == steps {
            let x: Vec<f64> = z.rows(0, n).iter().copied().collect();
            let v2 = inputs.h.map_or(f64::NAN, |h| h.quadratic_form(&x));
            records.push(Record {
                t,
                x,
                y: o.y,
                u1: o.u1,
                u2,
                u,
                xi: o.xi,
                eps: inv.eps,
                f,
                v1: 0.5 * inv.eps * inv.eps,
                v2,
                in_funnel,
                in_x,
                in_y,
                in_u: u_gap >= 0.0,
                eps_reference,
            });
        }
        true
    };

    let dist = &inputs.disturbance;
    let mut noise = dist.amplitude * dist.noise(0);
    let mut noise_window = 0;
    observe(0, &z, sigma, dist.smooth_part(0.0) + noise, &mut report);

    for k in 0..steps {
        let t = k as f64 * config.step;
        let window = k as u64 / hold;
        if window != noise_window {
            noise = dist.amplitude * dist.noise(window);
            noise_window = window;
        }
        let at_floor = z[w_idx] <= floor;
        let clamped = std::cell::Cell::new(false);
        let rhs = |ts: f64, zs: &DVector<f64>| -> DVector<f64> {
            let f = dist.smooth_part(ts) + noise;
            let wv = zs[w_idx].max(floor);
            let u2 = u2_of(wv, sigma);
            let o = lp.observe(zs, u2);
            let inv = transform.phi_inv_saturating(o.xi, ts);
            if inv.clamped {
                clamped.set(true);
            }
            let (d_base, bracket, xi_dot_state) = lp.rates(zs, u2, inv.eps, f);
            let mut w_dot = -(2.0 * U2_GAIN / p3) * bracket;
            if at_floor {
                w_dot = w_dot.max(0.0);
            }
            let mut dz = DVector::zeros(len);
            dz.rows_mut(0, base).copy_from(&d_base);
            dz[w_idx] = w_dot;
            if config.track_eps_reference {
                let xi_dot = xi_dot_state + p3 * w_dot;
                dz[ref_idx] = eps_dot_reference(&transform, xi_dot, zs[ref_idx], ts);
            }
            dz
        };
        z = rk4_step(rhs, t, &z, config.step);
        if clamped.get() {
            report.inverse_clamp.hit(t);
        }
        if z[w_idx] <= floor {
            if config.track_eps_reference {
                let t_next = (k + 1) as f64 * config.step;
                let jump = p3 * (floor - z[w_idx]);
                let xi_ref = transform.phi(z[ref_idx], t_next) + jump;
                z[ref_idx] = transform.phi_inv_saturating(xi_ref, t_next).eps;
            }
            z[w_idx] = floor;
            sigma = 1.0;
        }
        report.steps += 1;
        let t_next = (k + 1) as f64 * config.step;
        let f_next = dist.smooth_part(t_next) + noise;
        if !observe(k + 1, &z, sigma, f_next, &mut report) {
            break;
        }
    }

    if config.track_eps_reference {
        report.eps_drift = Some(drift);
    }
    Ok(SimOutcome { trajectory: Trajectory { order: n, records }, report })
}

/// Terminal-state differences between successive step halvings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub steps: Vec<f64>,
    /// `‖z(hᵢ) − z(hᵢ₊₁)‖∞`.
    pub differences: Vec<f64>,
    /// `differencesᵢ / differencesᵢ₊₁`.
    pub ratios: Vec<f64>,
    /// `log₂` of the ratios.
    pub orders: Vec<f64>,
}

/// Runs `run(step)` for every step and compares terminal states.
pub fn convergence_study<F>(run: F, steps: &[f64]) -> Result<ConvergenceTable>
where
    F: Fn(f64) -> Result<Vec<f64>> + Sync + Send,
{
    if steps.len() < 3 {
        return Err(Error::Config("convergence study needs at least three step sizes".into()));
    }
    if steps.windows(2).any(|w| (w[0] / w[1] - 2.0).abs() > 1e-9) {
        return Err(Error::Config("step sizes must halve successively".into()));
    }
    let finals = map_indexed(steps.len(), |i| run(steps[i])).into_iter().collect::<Result<Vec<_>>>()?;
    let differences: Vec<f64> = finals
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .collect();
    let ratios: Vec<f64> = differences.windows(2).map(|d| d[0] / d[1]).collect();
    let orders = ratios.iter().map(|r| r.log2()).collect();
    Ok(ConvergenceTable { steps: steps.to_vec(), differences, ratios, orders })
}

/// `ẋ = Āx` integrated by RK4 to `horizon`; the disturbance-free linear
/// benchmark for [`convergence_study`].
pub fn linear_benchmark(a_bar: &nalgebra::DMatrix<f64>, x0: &[f64], step: f64, horizon: f64) -> Vec<f64> {
    let steps = (horizon / step).round() as usize;
    let mut x = DVector::from_column_slice(x0);
    for k in 0..steps {
        x = rk4_step(|_, x| a_bar * x, k as f64 * step, &x, step);
    }
    x.iter().copied().collect()
}

/// Runs `job(i)` for `i in 0..n` one after another.
pub fn run_batch_sequential<T, F>(n: usize, job: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    crate::parallel::map_indexed_sequential(n, job)
}

/// Runs `job(i)` for `i in 0..n` on the rayon pool; results in index order.
#[cfg(feature = "parallel")]
pub fn run_batch_parallel<T, F>(n: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_indexed(n, job)
}

/// Parallel when the `parallel` feature is enabled, sequential otherwise.
pub fn run_batch<T, F>(n: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_indexed(n, job)
}
