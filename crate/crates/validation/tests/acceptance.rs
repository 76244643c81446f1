//! One line per acceptance criterion; exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use funnelgate::funnel::{BoundCurve, FunnelBounds, TransformKind, TransformSpec};
use funnelgate::lmi::{SearchOptions, VerifyReport};
use funnelgate::matrix::{is_negative_semidefinite, is_nsd_by_minors, SymMatrix};
use funnelgate::plant::derive_io_form;
use funnelgate::polynomial::Polynomial;
use funnelgate::scenario::{derive_seed, preset, Scenario};
use funnelgate::sim::{convergence_study, linear_benchmark, SimConfig};
use nalgebra::{DMatrix, DVector, RowDVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MARGIN: f64 = -1e-10;
const SEEDS_EXAMPLE3: [u64; 5] = [1, 2, 3, 4, 5];

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    passed: bool,
    detail: String,
}

fn built(name: &str) -> Scenario {
    preset(name).expect("preset exists").build().expect("preset builds")
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn margins_ok(r: &VerifyReport) -> bool {
    r.feasible && r.eps_block.iter().all(|m| *m <= MARGIN) && r.h_block <= MARGIN
}

fn certificate_at_alpha(name: &str, seed: u64) -> Verdict {
    let scenario = built(name);
    let start = Instant::now();
    let opts = SearchOptions { alpha_hint: Some(scenario.alpha()), sweep_alpha: false, ..scenario.search_options(seed) };
    let found = scenario.certify_with(&opts).expect("problem assembles");
    let elapsed = start.elapsed();
    match found {
        Ok(cert) => {
            let r = scenario.verify(&cert).expect("problem assembles");
            Verdict {
                passed: margins_ok(&r) && cert.alpha == scenario.alpha() && elapsed < Duration::from_secs(10),
                detail: format!(
                    "alpha {} eps-block {:.3e}/{:.3e} H-block {:.3e} dominance {:.3e} in {:.2}s",
                    cert.alpha,
                    r.eps_block[0],
                    r.eps_block[1],
                    r.h_block,
                    r.dominance,
                    secs(elapsed)
                ),
            }
        }
        Err(report) => Verdict { passed: false, detail: format!("{report} ({:.2}s)", secs(elapsed)) },
    }
}

fn c1() -> Verdict {
    certificate_at_alpha("example2", 0)
}

fn c2() -> Verdict {
    let a = certificate_at_alpha("example3-exp", 0);
    let b = certificate_at_alpha("example3-cos", 0);
    Verdict { passed: a.passed && b.passed, detail: format!("exp: {}; cos: {}", a.detail, b.detail) }
}

fn c3() -> Verdict {
    let mut config = preset("example2").unwrap();
    config.sim = SimConfig { step: 1e-3, horizon: 100.0, settle_from: Some(75.0), ..config.sim };
    let scenario = config.build().unwrap();
    let (lo, hi) = scenario.transform().funnel.at(0.0);
    let funnel_ok = lo == 0.01 && (hi - 1.0).abs() < 1e-15 && scenario.transform().funnel.upper_infimum() == 0.1;
    let start = Instant::now();
    let out = scenario.simulate(1, None).expect("run starts inside the funnel");
    let elapsed = start.elapsed();
    let r = &out.report;
    let settled = r.settled_sup.unwrap_or(f64::INFINITY);
    let level = 0.1 * 1.05;
    Verdict {
        passed: funnel_ok
            && r.funnel.count == 0
            && r.set_x.count == 0
            && r.set_u.count == 0
            && r.non_finite.count == 0
            && settled <= level
            && elapsed < Duration::from_secs(30),
        detail: format!(
            "funnel {} set_x {} set_u {}; sup x'P1bar x over t>=75 = {settled:.4} (limit {level:.3}); {:.2}s",
            r.funnel.count,
            r.set_x.count,
            r.set_u.count,
            secs(elapsed)
        ),
    }
}

fn c4() -> Verdict {
    let start = Instant::now();
    let mut violations = 0;
    let mut runs = 0;
    let mut worst_margin = f64::INFINITY;
    for name in ["example3-exp", "example3-cos"] {
        for (_, out) in built(name).run_seeds(&SEEDS_EXAMPLE3) {
            let r = out.expect("run starts inside the funnel").report;
            runs += 1;
            violations += r.funnel.count + r.set_y.count + r.set_u.count + r.non_finite.count;
            worst_margin = worst_margin.min(r.margins.funnel_lower.min(r.margins.funnel_upper));
        }
    }
    let elapsed = start.elapsed();
    Verdict {
        passed: runs == 10 && violations == 0 && elapsed < Duration::from_secs(60),
        detail: format!("{runs} runs, {violations} violations, min funnel margin {worst_margin:.3e}; {:.2}s", secs(elapsed)),
    }
}

fn det_oracle(a: &DMatrix<f64>, s: f64) -> f64 {
    (DMatrix::identity(a.nrows(), a.nrows()) * s - a).determinant()
}

fn c5() -> Verdict {
    let config = preset("example3-exp").unwrap();
    let a = DMatrix::from_row_iterator(3, 3, config.plant.a.iter().flatten().copied());
    let b = DVector::from_vec(config.plant.b.clone());
    let l = RowDVector::from_vec(config.plant.l.clone().unwrap());
    let io = derive_io_form(&a, &b, &l, -4.0).expect("io form exists");
    let exact = io.r.coefficients() == [1.0, 2.0, 1.0]
        && io.q.coefficients() == [-3.0, -5.0, -1.0, 1.0]
        && io.q_bar.coefficients() == [1.0, 3.0, 3.0, 1.0];
    let oracle = [-3.0, -0.5, 0.5, 2.0, 7.0].iter().all(|&s| {
        let q = det_oracle(&a, s);
        let g = (l.clone() * (DMatrix::identity(3, 3) * s - &a).try_inverse().unwrap() * &b)[0];
        (io.q.eval(s) - q).abs() < 1e-9 && (io.r.eval(s) - g * q).abs() < 1e-9
    });
    let reference = Polynomial::from_roots(&[-1.0, -1.0, -1.0]);
    let check = io.check_reference(&reference);
    let flagged = !check.matches_q && check.matches_q_bar;
    Verdict {
        passed: exact && oracle && flagged,
        detail: format!(
            "R = {}, Q = {}, Qbar = {}; reference (p+1)^3 matches Q: {}, matches Qbar: {}",
            io.r, io.q, io.q_bar, check.matches_q, check.matches_q_bar
        ),
    }
}

fn random_funnel(rng: &mut ChaCha8Rng) -> FunnelBounds {
    let lower = match rng.random_range(0..3) {
        0 => BoundCurve::constant(rng.random_range(0.01..2.0)),
        1 => BoundCurve::exp_offset(rng.random_range(0.1..1.0), rng.random_range(-0.5..-0.01), rng.random_range(0.01..0.5)),
        _ => BoundCurve::cos_offset(rng.random_range(0.05..0.5), rng.random_range(0.1..2.0), rng.random_range(0.6..1.5)),
    }
    .unwrap();
    let base = lower.supremum() + rng.random_range(0.05..3.0);
    let a = rng.random_range(0.0..2.0);
    let upper = if rng.random_bool(0.5) {
        BoundCurve::exp_offset(a, rng.random_range(-0.5..-0.01), base)
    } else {
        BoundCurve::cos_offset(a, rng.random_range(0.01..0.5), base + a)
    }
    .unwrap();
    let gamma = lower.derivative_bound().max(upper.derivative_bound()).max(1e-6);
    FunnelBounds::new(lower, upper, gamma, 100.0).unwrap()
}

fn c6() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(0, "acceptance-transform"));
    let funnels: Vec<FunnelBounds> = (0..24).map(|_| random_funnel(&mut rng)).collect();
    let start = Instant::now();
    let mut fails = [[0usize; 4]; 3];
    let mut worst_round_trip = [0.0f64; 3];
    let h = 1e-5;
    for _ in 0..100_000 {
        let ki = rng.random_range(0..3);
        let spec = TransformSpec::new(TransformKind::ALL[ki], funnels[rng.random_range(0..funnels.len())]);
        let eps = rng.random_range(-50.0..50.0);
        let t = rng.random_range(h..100.0);
        let (lo, hi) = spec.funnel.at(t);
        let xi = spec.phi(eps, t);
        if !(lo < xi && xi < hi) {
            fails[ki][0] += 1;
        }
        let other = rng.random_range(-50.0..50.0);
        let (a, b) = if eps < other { (eps, other) } else { (other, eps) };
        if !(spec.phi(a, t) <= spec.phi(b, t)) || spec.dphi_deps(eps, t) <= 0.0 {
            fails[ki][1] += 1;
        }
        let e = 0.4 * eps;
        let err = (spec.phi_inv(spec.phi(e, t), t).map_or(f64::INFINITY, |v| v - e)).abs();
        worst_round_trip[ki] = worst_round_trip[ki].max(err);
        if !(err < 1e-9) {
            fails[ki][2] += 1;
        }
        let fd_e = (spec.phi(e + h, t) - spec.phi(e - h, t)) / (2.0 * h);
        let fd_t = (spec.phi(e, t + h) - spec.phi(e, t - h)) / (2.0 * h);
        if !((fd_e - spec.dphi_deps(e, t)).abs() < 1e-6 && (fd_t - spec.dphi_dt(e, t)).abs() < 1e-6) {
            fails[ki][3] += 1;
        }
    }
    let elapsed = start.elapsed();
    let total: usize = fails.iter().flatten().sum();
    let per_kind: Vec<String> = TransformKind::ALL
        .iter()
        .enumerate()
        .map(|(i, k)| {
            format!(
                "{k:?} interior/monotone/round-trip/derivative failures {}/{}/{}/{} (worst round trip {:.1e})",
                fails[i][0], fails[i][1], fails[i][2], fails[i][3], worst_round_trip[i]
            )
        })
        .collect();
    Verdict {
        passed: total == 0 && elapsed < Duration::from_secs(10),
        detail: format!("{}; {:.2}s", per_kind.join("; "), secs(elapsed)),
    }
}

fn c7() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(0, "acceptance-minors"));
    let (mut compared, mut disagreements, mut nsd) = (0, 0, 0);
    while compared < 1000 {
        let n = rng.random_range(2..=3);
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let noise = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.3..0.3));
        let m = SymMatrix::from_upper(&(-(g.transpose() * &g) + noise));
        if m.max_eigenvalue().abs() < 1e-9 {
            continue;
        }
        compared += 1;
        let by_eig = is_negative_semidefinite(&m, 0.0);
        nsd += usize::from(by_eig);
        if by_eig != is_nsd_by_minors(&m, 0.0) {
            disagreements += 1;
        }
    }
    Verdict { passed: disagreements == 0, detail: format!("{compared} matrices ({nsd} NSD), {disagreements} disagreements") }
}

fn c8() -> Verdict {
    let a_bar = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -2.0]);
    let table = convergence_study(|h| Ok(linear_benchmark(&a_bar, &[-1.0, 1.0], h, 10.0)), &[0.2, 0.1, 0.05, 0.025, 0.0125])
        .expect("valid step ladder");
    Verdict {
        passed: table.ratios.iter().all(|r| (12.0..=20.0).contains(r)),
        detail: format!("ratios {:?}", table.ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>()),
    }
}

fn c9() -> Verdict {
    let base = preset("example2").unwrap().plant.disturbance;
    let path = |seed: u64| {
        let spec = base.with_seed(derive_seed(seed, "disturbance"));
        (0..=100_000u64).map(move |i| spec.value(i as f64 * 1e-3))
    };
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        worst = worst.max(path(seed).fold(0.0, |m, f| m.max(f.abs())));
    }
    let same = path(3).map(f64::to_bits).eq(path(3).map(f64::to_bits));
    let distinct = !path(3).map(f64::to_bits).eq(path(4).map(f64::to_bits));
    Verdict {
        passed: worst <= 0.22 && same && distinct,
        detail: format!("max |f| {worst:.6} over 20 seeds; repeat identical {same}; seeds distinct {distinct}"),
    }
}

fn c10() -> Verdict {
    let mut config = preset("example2").unwrap();
    config.sim.track_eps_reference = true;
    let out = config.build().unwrap().simulate(1, None).expect("run starts inside the funnel");
    let drift = out.report.eps_drift.unwrap_or(f64::INFINITY);
    Verdict { passed: drift < 1e-3, detail: format!("sup |eps - eps_ref| = {drift:.3e}") }
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("certificate, state feedback, alpha 11.6", c1),
        ("certificate, output feedback, alpha 20.2", c2),
        ("containment and settling, state feedback", c3),
        ("containment, output feedback, 2 funnels x 5 seeds", c4),
        ("exact input-output polynomials", c5),
        ("transform property suite, 1e5 cases", c6),
        ("eigenvalue vs principal-minor NSD decision", c7),
        ("RK4 convergence order", c8),
        ("disturbance bound and determinism", c9),
        ("eps algebraic vs integrated", c10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        failed += usize::from(!v.passed);
        println!("C{:<2} {}  {name}: {}", i + 1, if v.passed { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
