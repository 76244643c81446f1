//! Scenario documents: plant, weights, gains, funnel, optional certificate
//! and simulation settings in one JSON file, plus the built-in presets.

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};

use crate::controller::{ConstraintWeights, OutputFeedbackLaw, StateFeedbackLaw, DEFAULT_U2_INIT};
use crate::error::{Error, Result};
use crate::funnel::{BoundCurve, FunnelBounds, TransformKind, TransformSpec};
use crate::lmi::{search, verify, Certificate, CertificateProblem, InfeasibleReport, SearchOptions, VerifyReport};
use crate::matrix::SymMatrix;
use crate::plant::{DisturbanceSpec, OutputPlant, StatePlant};
use crate::sim::{run_output_feedback, run_state_feedback, RunInputs, SetLimits, SimConfig, SimOutcome};

pub const PRESETS: [&str; 3] = ["example2", "example3-exp", "example3-cos"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSection {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<f64>,
    #[serde(rename = "D")]
    pub d: Vec<f64>,
    /// Output row; its presence selects output feedback.
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub l: Option<Vec<f64>>,
    pub f_bar: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_hat: Option<f64>,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub disturbance: DisturbanceSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsSection {
    #[serde(rename = "P1", default, skip_serializing_if = "Option::is_none")]
    pub p1_matrix: Option<SymMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p1: Option<f64>,
    pub p0: f64,
    pub r: f64,
    pub delta: f64,
    pub mu: f64,
    pub limits: SetLimits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainsSection {
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k_row: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    pub alpha: f64,
    #[serde(default = "default_u2_init")]
    pub u2_init: f64,
}

fn default_u2_init() -> f64 {
    DEFAULT_U2_INIT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunnelSection {
    pub transform: TransformKind,
    pub lower: BoundCurve,
    pub upper: BoundCurve,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmiSection {
    pub beta: f64,
    pub c: f64,
}

impl Default for LmiSection {
    fn default() -> Self {
        Self { beta: 0.1, c: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub plant: PlantSection,
    pub weights: WeightsSection,
    pub gains: GainsSection,
    pub funnel: FunnelSection,
    #[serde(default)]
    pub lmi: LmiSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
    #[serde(default)]
    pub sim: SimConfig,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(c) = &cfg.certificate {
            c.validate()?;
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }

    pub fn build(&self) -> Result<Scenario> {
        Scenario::new(self.clone())
    }
}

/// FNV-1a over the seed bytes and a purpose label.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    seed.to_le_bytes()
        .iter()
        .chain(label.as_bytes())
        .fold(OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(PRIME))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Closed {
    State { plant: StatePlant, law: StateFeedbackLaw },
    Output { plant: OutputPlant, law: OutputFeedbackLaw },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub closed: Closed,
}

fn matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) || n == 0 {
        return Err(Error::Dimension("A must be a non-empty square matrix".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        let c = &config;
        let base = StatePlant::new(
            matrix(&c.plant.a)?,
            DVector::from_column_slice(&c.plant.b),
            DVector::from_column_slice(&c.plant.d),
            c.plant.f_bar,
        )?;
        if c.plant.x0.len() != base.order() {
            return Err(Error::Dimension(format!("x0 has {} entries, plant order is {}", c.plant.x0.len(), base.order())));
        }
        c.plant.disturbance.validate()?;
        c.sim.validate()?;
        let weights = ConstraintWeights::new(c.weights.p0, c.weights.r, c.weights.delta, c.weights.mu)?;
        let funnel = FunnelBounds::new(c.funnel.lower, c.funnel.upper, c.funnel.gamma, c.sim.horizon)?;
        let transform = TransformSpec::new(c.funnel.transform, funnel);

        let closed = match &c.plant.l {
            None => {
                let p1 = c.weights.p1_matrix.clone().ok_or_else(|| Error::Config("state feedback needs weights.P1".into()))?;
                let k = c.gains.k_row.as_ref().ok_or_else(|| Error::Config("state feedback needs gains.K".into()))?;
                let law = StateFeedbackLaw::new(
                    &base,
                    p1,
                    RowDVector::from_row_slice(k),
                    weights,
                    c.gains.alpha,
                    transform,
                    c.gains.u2_init,
                )?;
                if c.weights.limits.x.is_none() {
                    return Err(Error::Config("state feedback needs weights.limits.x".into()));
                }
                Closed::State { plant: base, law }
            }
            Some(l) => {
                let phi_hat = c.plant.phi_hat.ok_or_else(|| Error::Config("output feedback needs plant.phi_hat".into()))?;
                let p1 = c.weights.p1.ok_or_else(|| Error::Config("output feedback needs weights.p1".into()))?;
                let k = c.gains.k.ok_or_else(|| Error::Config("output feedback needs gains.k".into()))?;
                let plant = OutputPlant::new(base, RowDVector::from_row_slice(l), phi_hat)?;
                let law = OutputFeedbackLaw::new(&plant, p1, k, weights, c.gains.alpha, transform, c.gains.u2_init)?;
                if c.weights.limits.y.is_none() {
                    return Err(Error::Config("output feedback needs weights.limits.y".into()));
                }
                Closed::Output { plant, law }
            }
        };
        Ok(Self { config, closed })
    }

    pub fn name(&self) -> &str {
        &self.config.name
    }

    pub fn transform(&self) -> &TransformSpec {
        match &self.closed {
            Closed::State { law, .. } => &law.transform,
            Closed::Output { law, .. } => &law.transform,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.config.gains.alpha
    }

    /// The same scenario with another `α`.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        let mut cfg = self.config.clone();
        cfg.gains.alpha = alpha;
        Self::new(cfg)
    }

    pub fn problem(&self) -> Result<CertificateProblem> {
        let LmiSection { beta, c } = self.config.lmi;
        match &self.closed {
            Closed::State { plant, law } => CertificateProblem::state_feedback(plant, law, beta, c),
            Closed::Output { plant, law } => CertificateProblem::output_feedback(plant, law, beta, c),
        }
    }

    pub fn search_options(&self, seed: u64) -> SearchOptions {
        SearchOptions { seed: derive_seed(seed, "lmi-search"), ..SearchOptions::default() }
    }

    /// Searches with the scenario's `α` as hint.
    pub fn certify(&self, seed: u64) -> Result<std::result::Result<Certificate, InfeasibleReport>> {
        let opts = SearchOptions { alpha_hint: Some(self.alpha()), ..self.search_options(seed) };
        self.certify_with(&opts)
    }

    pub fn certify_with(&self, opts: &SearchOptions) -> Result<std::result::Result<Certificate, InfeasibleReport>> {
        Ok(search(&self.problem()?, opts))
    }

    pub fn verify(&self, cert: &Certificate) -> Result<VerifyReport> {
        Ok(verify(&self.problem()?, cert))
    }

    /// `ḡ ≤ inf{l}` over the horizon.
    pub fn limits_dominate_funnel(&self) -> bool {
        self.config.weights.limits.dominates(self.transform(), self.config.sim.horizon)
    }

    /// Runs the closed loop with the disturbance seed derived from `seed`.
    pub fn simulate(&self, seed: u64, h: Option<&SymMatrix>) -> Result<SimOutcome> {
        let cfg = SimConfig { seed, ..self.config.sim };
        self.simulate_with(&cfg, h)
    }

    pub fn simulate_with(&self, sim: &SimConfig, h: Option<&SymMatrix>) -> Result<SimOutcome> {
        let disturbance = self.config.plant.disturbance.with_seed(derive_seed(sim.seed, "disturbance"));
        let inputs = RunInputs {
            x0: &self.config.plant.x0,
            u2_init: self.config.gains.u2_init,
            disturbance,
            limits: self.config.weights.limits,
            p0: self.config.weights.p0,
            p1_output: self.config.weights.p1,
            h,
        };
        match &self.closed {
            Closed::State { plant, law } => run_state_feedback(plant, law, &inputs, sim),
            Closed::Output { plant, law } => run_output_feedback(plant, law, &inputs, sim),
        }
    }

    /// One run per seed; parallel when the `parallel` feature is enabled.
    pub fn run_seeds(&self, seeds: &[u64]) -> Vec<(u64, Result<SimOutcome>)> {
        crate::sim::run_batch(seeds.len(), |i| (seeds[i], self.simulate(seeds[i], None)))
    }

    pub fn run_seeds_sequential(&self, seeds: &[u64]) -> Vec<(u64, Result<SimOutcome>)> {
        crate::sim::run_batch_sequential(seeds.len(), |i| (seeds[i], self.simulate(seeds[i], None)))
    }
}

fn curve(r: Result<BoundCurve>) -> BoundCurve {
    r.expect("preset curve is valid")
}

fn example2() -> ScenarioConfig {
    ScenarioConfig {
        name: "example2".into(),
        plant: PlantSection {
            a: vec![vec![0.0, 1.0], vec![1.0, 2.0]],
            b: vec![0.0, 1.0],
            d: vec![0.1, 1.0],
            l: None,
            f_bar: 0.22,
            phi_hat: None,
            x0: vec![-1.0, 1.0],
            disturbance: DisturbanceSpec::default(),
        },
        weights: WeightsSection {
            p1_matrix: Some(SymMatrix::identity(2).scale(0.1)),
            p1: None,
            p0: 0.1,
            r: 0.1,
            delta: 0.01,
            mu: 0.01,
            limits: SetLimits {
                x: Some(curve(BoundCurve::exp_offset(1.0, -0.05, 0.5))),
                y: None,
                u: curve(BoundCurve::constant(1.0)),
            },
        },
        gains: GainsSection { k_row: Some(vec![-2.0, -4.0]), k: None, alpha: 11.6, u2_init: DEFAULT_U2_INIT },
        funnel: FunnelSection {
            transform: TransformKind::TanhHalf,
            lower: curve(BoundCurve::constant(0.01)),
            upper: curve(BoundCurve::exp_offset(0.9, -0.1, 0.1)),
            gamma: 1.475,
        },
        lmi: LmiSection::default(),
        certificate: None,
        sim: SimConfig { settle_from: Some(75.0), ..SimConfig::default() },
    }
}

fn example3(name: &str, lower: BoundCurve, upper: BoundCurve) -> ScenarioConfig {
    ScenarioConfig {
        name: name.into(),
        plant: PlantSection {
            a: vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![3.0, 5.0, 1.0]],
            b: vec![0.0, 0.0, 1.0],
            d: vec![0.1, 0.2, 1.0],
            l: Some(vec![1.0, 2.0, 1.0]),
            f_bar: 0.22,
            phi_hat: Some(0.22),
            x0: vec![1.1, 1.1, 1.1],
            disturbance: DisturbanceSpec::default(),
        },
        weights: WeightsSection {
            p1_matrix: None,
            p1: Some(0.1),
            p0: 0.01,
            r: 0.01,
            delta: 0.01,
            mu: 0.01,
            limits: SetLimits { x: None, y: Some(curve(BoundCurve::constant(8.0))), u: curve(BoundCurve::constant(8.0)) },
        },
        gains: GainsSection { k_row: None, k: Some(-4.0), alpha: 20.2, u2_init: DEFAULT_U2_INIT },
        funnel: FunnelSection { transform: TransformKind::TanhHalf, lower, upper, gamma: 1.75 },
        lmi: LmiSection::default(),
        certificate: None,
        sim: SimConfig::default(),
    }
}

pub fn preset(name: &str) -> Option<ScenarioConfig> {
    match name {
        "example2" => Some(example2()),
        "example3-exp" => Some(example3(
            name,
            curve(BoundCurve::exp_offset(4.95, -0.1, 0.05)),
            curve(BoundCurve::exp_offset(7.0, -0.1, 1.0)),
        )),
        "example3-cos" => Some(example3(
            name,
            curve(BoundCurve::cos_offset(1.0, 0.5, 1.05)),
            curve(BoundCurve::cos_offset(3.5, 0.5, 4.5)),
        )),
        _ => None,
    }
}
