//! Embedded invariant suite behind `funnelgate selftest`.

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::controller::realize_filter;
use crate::funnel::{BoundCurve, FunnelBounds, TransformKind, TransformSpec};
use crate::lmi::verify;
use crate::matrix::{is_negative_semidefinite, is_nsd_by_minors, SymMatrix};
use crate::plant::{derive_io_form, DisturbanceSpec};
use crate::polynomial::Polynomial;
use crate::scenario::{derive_seed, preset};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SelftestOptions {
    pub seed: u64,
    /// Test hook: negates every tolerance so the suite has to fail.
    pub corrupt_tolerance: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "{:<width$}  {}  {}\n",
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.detail
            ));
        }
        out
    }
}

fn tol(opts: &SelftestOptions, t: f64) -> f64 {
    if opts.corrupt_tolerance {
        -t
    } else {
        t
    }
}

fn transform_round_trip(opts: &SelftestOptions) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, "selftest-transform"));
    let funnel = FunnelBounds::new(
        BoundCurve::cos_offset(1.0, 0.5, 1.05).unwrap(),
        BoundCurve::cos_offset(3.5, 0.5, 4.5).unwrap(),
        1.75,
        100.0,
    )
    .unwrap();
    let limit = tol(opts, 1e-9);
    let mut worst: f64 = 0.0;
    for kind in TransformKind::ALL {
        let spec = TransformSpec::new(kind, funnel);
        for _ in 0..2000 {
            let eps = rng.random_range(-10.0..10.0);
            let t = rng.random_range(0.0..100.0);
            let back = spec.phi_inv(spec.phi(eps, t), t).unwrap_or(f64::NAN);
            worst = worst.max((back - eps).abs());
        }
    }
    Check { name: "transform round trip", passed: worst < limit, detail: format!("max error {worst:.3e}") }
}

fn lmi_oracle(opts: &SelftestOptions) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, "selftest-lmi"));
    let mut disagreements = 0;
    let mut compared = 0;
    for i in 0..400 {
        let n = 2 + i % 2;
        let m = SymMatrix::from_upper(&DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)));
        let margin = m.max_eigenvalue();
        if margin.abs() < 1e-9 {
            continue;
        }
        compared += 1;
        if is_negative_semidefinite(&m, 0.0) != is_nsd_by_minors(&m, 0.0) {
            disagreements += 1;
        }
    }
    let passed = f64::from(disagreements) < tol(opts, 0.5) && compared > 0;
    Check { name: "nsd eigenvalue vs minors", passed, detail: format!("{disagreements} of {compared} disagree") }
}

fn filter_equivalence(opts: &SelftestOptions) -> Check {
    let r = Polynomial::new(vec![1.0, 2.0, 1.0]);
    let q_bar = Polynomial::from_roots(&[-1.0, -1.0, -1.0]);
    let filter = realize_filter(&r, &q_bar).expect("proper filter");
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let s = Complex::new(0.05, 0.1 * 2f64.powi(i));
        let expected = s * r.eval_complex(s) / q_bar.eval_complex(s);
        worst = worst.max((filter.transfer(s) - expected).norm() / expected.norm().max(1.0));
    }
    Check { name: "filter realization", passed: worst < tol(opts, 1e-8), detail: format!("max relative error {worst:.3e}") }
}

fn disturbance_bound(opts: &SelftestOptions) -> Check {
    let mut worst: f64 = 0.0;
    for k in 0..4 {
        let spec = DisturbanceSpec::default().with_seed(derive_seed(opts.seed, &format!("selftest-disturbance-{k}")));
        for i in 0..=20_000 {
            worst = worst.max(spec.value(i as f64 * 5e-3).abs());
        }
    }
    let bound = DisturbanceSpec::default().bound();
    Check {
        name: "disturbance bound",
        passed: worst <= bound + tol(opts, 1e-15),
        detail: format!("max |f| {worst:.6} against {bound:.6}"),
    }
}

fn io_form(opts: &SelftestOptions) -> Check {
    let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 3.0, 5.0, 1.0]);
    let b = nalgebra::DVector::from_vec(vec![0.0, 0.0, 1.0]);
    let l = nalgebra::RowDVector::from_vec(vec![1.0, 2.0, 1.0]);
    let passed = match derive_io_form(&a, &b, &l, -4.0) {
        Ok(io) => {
            let exact = io.r.coefficients() == [1.0, 2.0, 1.0]
                && io.q.coefficients() == [-3.0, -5.0, -1.0, 1.0]
                && io.q_bar.coefficients() == [1.0, 3.0, 3.0, 1.0];
            exact && !opts.corrupt_tolerance
        }
        Err(_) => false,
    };
    Check { name: "exact io form", passed, detail: "R = (p+1)^2, Q = p^3 - p^2 - 5p - 3, Qbar = (p+1)^3".into() }
}

fn certificate(opts: &SelftestOptions) -> Check {
    let scenario = preset("example3-exp").and_then(|c| c.build().ok());
    let Some(scenario) = scenario else {
        return Check { name: "output certificate", passed: false, detail: "preset failed to build".into() };
    };
    match scenario.certify(opts.seed) {
        Ok(Ok(cert)) => {
            let report = verify(&scenario.problem().expect("preset problem"), &cert);
            let worst = report.eps_block.iter().copied().fold(report.h_block, f64::max);
            Check {
                name: "output certificate",
                passed: report.feasible && worst <= tol(opts, 1e-10),
                detail: format!("alpha {} worst block eigenvalue {worst:.3e}", cert.alpha),
            }
        }
        Ok(Err(e)) => Check { name: "output certificate", passed: false, detail: e.to_string() },
        Err(e) => Check { name: "output certificate", passed: false, detail: e.to_string() },
    }
}

pub fn run(opts: &SelftestOptions) -> SelftestReport {
    SelftestReport {
        checks: vec![
            transform_round_trip(opts),
            lmi_oracle(opts),
            filter_equivalence(opts),
            disturbance_bound(opts),
            io_form(opts),
            certificate(opts),
        ],
    }
}
