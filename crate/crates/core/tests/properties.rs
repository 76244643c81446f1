use std::sync::OnceLock;

use funnelgate::controller::realize_filter;
use funnelgate::funnel::{audit_gamma, BoundCurve, FunnelBounds, TransformKind, TransformSpec};
use funnelgate::lmi::{assemble_eps_block, eps_taus, verify, Certificate, CertificateProblem, NSD_TOL};
use funnelgate::matrix::{is_negative_semidefinite, is_nsd_by_minors, SymMatrix};
use funnelgate::plant::{derive_io_form, DisturbanceSpec};
use funnelgate::polynomial::{char_poly, Polynomial};
use funnelgate::scenario::{preset, Closed, Scenario, ScenarioConfig, PRESETS};
use funnelgate::sim::{rk4_step, SimConfig};
use nalgebra::{Complex, DMatrix, DVector, RowDVector};
use proptest::prelude::*;

fn kind() -> impl Strategy<Value = TransformKind> {
    prop::sample::select(TransformKind::ALL.to_vec())
}

fn curve_pair() -> impl Strategy<Value = (BoundCurve, BoundCurve)> {
    let lower = prop_oneof![
        (0.01..2.0f64).prop_map(|a| BoundCurve::constant(a).unwrap()),
        (0.1..1.0f64, -0.5..-0.01f64, 0.01..0.5f64).prop_map(|(a, c, b)| BoundCurve::exp_offset(a, c, b).unwrap()),
        (0.05..0.5f64, 0.1..2.0f64, 0.6..1.5f64).prop_map(|(a, c, b)| BoundCurve::cos_offset(a, c, b).unwrap()),
    ];
    (lower, 0.05..3.0f64, 0.0..2.0f64, -0.5..-0.01f64, any::<bool>()).prop_map(|(lo, gap, a, c, exp)| {
        let base = lo.supremum() + gap;
        let hi = if exp {
            BoundCurve::exp_offset(a, c, base).unwrap()
        } else {
            BoundCurve::cos_offset(a, -c, base + a).unwrap()
        };
        (lo, hi)
    })
}

fn funnel_from(lo: BoundCurve, hi: BoundCurve) -> FunnelBounds {
    let gamma = lo.derivative_bound().max(hi.derivative_bound()).max(1e-6);
    FunnelBounds::new(lo, hi, gamma, 100.0).expect("generated funnel is valid")
}

fn built(name: &str) -> Scenario {
    preset(name).unwrap().build().unwrap()
}

fn problems() -> &'static [CertificateProblem] {
    static P: OnceLock<Vec<CertificateProblem>> = OnceLock::new();
    P.get_or_init(|| PRESETS.iter().map(|n| built(n).problem().unwrap()).collect())
}

fn random_sym(n: usize, values: &[f64]) -> SymMatrix {
    SymMatrix::from_upper(&DMatrix::from_fn(n, n, |i, j| values[i * 6 + j]))
}

fn transfer_oracle(a: &DMatrix<f64>, b: &DVector<f64>, l: &RowDVector<f64>, s: Complex<f64>) -> Complex<f64> {
    let n = a.nrows();
    let m = DMatrix::<Complex<f64>>::from_fn(n, n, |i, j| {
        let d = if i == j { s } else { Complex::new(0.0, 0.0) };
        d - Complex::new(a[(i, j)], 0.0)
    });
    let rhs = DVector::<Complex<f64>>::from_fn(n, |i, _| Complex::new(b[i], 0.0));
    let x = m.lu().solve(&rhs).expect("s is not an eigenvalue");
    (0..n).map(|i| x[i] * l[i]).sum()
}

/// `T U T⁻¹` with `U` upper triangular (negative integer diagonal) and `T`
/// unit lower triangular, so the result is an integer Hurwitz matrix.
fn stable_integer_matrix(n: usize, diag: &[i32], upper: &[i32], lower: &[i32]) -> DMatrix<f64> {
    let u = DMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Equal => -f64::from(diag[i]),
        std::cmp::Ordering::Less => f64::from(upper[i * 4 + j]),
        std::cmp::Ordering::Greater => 0.0,
    });
    let t = DMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Equal => 1.0,
        std::cmp::Ordering::Greater => f64::from(lower[i * 4 + j]),
        std::cmp::Ordering::Less => 0.0,
    });
    let t_inv = t.clone().try_inverse().unwrap().map(f64::round);
    (&t * u * t_inv).map(f64::round)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn trace_equals_eigenvalue_sum(n in 1usize..=6, values in prop::collection::vec(-10.0..10.0f64, 36)) {
        let m = random_sym(n, &values);
        let sum: f64 = m.eigenvalues().iter().sum();
        prop_assert!((m.trace() - sum).abs() < 1e-9);
    }

    #[test]
    fn char_poly_vanishes_at_eigenvalues(n in 1usize..=5, values in prop::collection::vec(-3.0..3.0f64, 36)) {
        let m = random_sym(n, &values);
        let p = char_poly(m.as_matrix()).unwrap();
        let scale = 1.0 + m.frobenius_norm().powi(n as i32);
        for lambda in m.eigenvalues() {
            prop_assert!(p.eval(lambda).abs() / scale < 1e-6);
        }
    }

    #[test]
    fn transform_is_interior_and_monotone(
        kind in kind(),
        curves in curve_pair(),
        e1 in -50.0..50.0f64,
        e2 in -50.0..50.0f64,
        t in 0.0..100.0f64,
    ) {
        let spec = TransformSpec::new(kind, funnel_from(curves.0, curves.1));
        let (lo, hi) = spec.funnel.at(t);
        let x1 = spec.phi(e1, t);
        prop_assert!(lo < x1 && x1 < hi);
        prop_assert!(spec.dphi_deps(e1, t) > 0.0);
        let (a, b) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        if b - a > 1e-9 && spec.phi(b, t) - spec.phi(a, t) > 0.0 {
            prop_assert!(spec.phi(a, t) < spec.phi(b, t));
        } else {
            prop_assert!(spec.phi(a, t) <= spec.phi(b, t));
        }
    }

    /// Strict to 1e-9 unless one ulp of `ξ` already spans more than that in
    /// `ε` (only `tanh_half` for large `|ε|`).
    #[test]
    fn transform_round_trip(kind in kind(), curves in curve_pair(), e in -20.0..20.0f64, t in 0.0..100.0f64) {
        let spec = TransformSpec::new(kind, funnel_from(curves.0, curves.1));
        let xi = spec.phi(e, t);
        let back = spec.phi_inv(xi, t).unwrap();
        let (lo, hi) = spec.funnel.at(t);
        let ulp = hi.abs().max(lo.abs()).max(xi.abs());
        let resolution = 4.0 * (ulp.next_up() - ulp) / spec.dphi_deps(e, t);
        prop_assert!((back - e).abs() < 1e-9_f64.max(resolution), "{kind:?} e={e} back={back}");
    }

    #[test]
    fn transform_partials_match_differences(kind in kind(), curves in curve_pair(), e in -20.0..20.0f64, t in 0.01..100.0f64) {
        let spec = TransformSpec::new(kind, funnel_from(curves.0, curves.1));
        let h = 1e-5;
        let fd_e = (spec.phi(e + h, t) - spec.phi(e - h, t)) / (2.0 * h);
        let fd_t = (spec.phi(e, t + h) - spec.phi(e, t - h)) / (2.0 * h);
        prop_assert!((fd_e - spec.dphi_deps(e, t)).abs() < 1e-6);
        prop_assert!((fd_t - spec.dphi_dt(e, t)).abs() < 1e-6);
    }

    #[test]
    fn nsd_eigenvalue_matches_minors(n in 2usize..=3, values in prop::collection::vec(-2.0..2.0f64, 36)) {
        let m = random_sym(n, &values);
        prop_assume!(m.max_eigenvalue().abs() >= 1e-9);
        prop_assert_eq!(is_negative_semidefinite(&m, 0.0), is_nsd_by_minors(&m, 0.0));
    }

    #[test]
    fn disturbance_is_deterministic_and_bounded(seed in any::<u64>(), other in any::<u64>()) {
        prop_assume!(seed != other);
        let a = DisturbanceSpec::default().with_seed(seed);
        let b = DisturbanceSpec::default().with_seed(other);
        let path = |d: &DisturbanceSpec| (0..2000).map(|i| d.value(i as f64 * 0.05).to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(path(&a), path(&a));
        prop_assert_ne!(path(&a), path(&b));
        let bound = 0.1 * (1.0 + 0.2 + 1.0);
        prop_assert!(path(&a).iter().all(|bits| f64::from_bits(*bits).abs() <= bound));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn io_form_matches_frequency_response(
        n in 1usize..=4,
        diag in prop::collection::vec(1i32..=4, 4),
        upper in prop::collection::vec(-3i32..=3, 16),
        lower in prop::collection::vec(-2i32..=2, 16),
        b in prop::collection::vec(-3i32..=3, 4),
        l in prop::collection::vec(-3i32..=3, 4),
        k in -5i32..=5,
    ) {
        let a = stable_integer_matrix(n, &diag, &upper, &lower);
        let b = DVector::from_iterator(n, b.iter().take(n).map(|v| f64::from(*v)));
        let l = RowDVector::from_iterator(n, l.iter().take(n).map(|v| f64::from(*v)));
        let io = derive_io_form(&a, &b, &l, f64::from(k));
        prop_assume!(io.is_ok());
        let io = io.unwrap();
        prop_assert!(io.q.is_integral() && io.r.is_integral() && io.q_bar.is_integral());
        prop_assert_eq!(&io.q_bar, &io.q.sub(&io.r.scale(f64::from(k))));
        for i in 0..10 {
            let s = Complex::new(0.2 * i as f64, 0.5 + 0.7 * i as f64);
            let expected = transfer_oracle(&a, &b, &l, s);
            let got = io.r.eval_complex(s) / io.q.eval_complex(s);
            prop_assert!((got - expected).norm() <= 1e-8 * expected.norm().max(1e-6), "s={s} got={got} expected={expected}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn eps_block_vertices_cover_the_interval(
        which in 0usize..3,
        alpha in 0.5..200.0f64,
        scale in prop::collection::vec(0.5..2.0f64, 3),
        frac in -1.0..1.0f64,
    ) {
        let problem = &problems()[which];
        let base = eps_taus(problem, alpha).unwrap_or([alpha, 1.0, 1.0]);
        let taus = [base[0] * scale[0], base[1] * scale[1], base[2] * scale[2], 1.0, 1.0];
        let cert = Certificate::new(alpha, taus, problem.floor.add(&SymMatrix::identity(problem.order()))).unwrap();
        let [vp, vm] = problem.vertices();
        let nsd = |v: f64| assemble_eps_block(problem, &cert, v).max_eigenvalue() <= NSD_TOL;
        if nsd(vp) && nsd(vm) {
            prop_assert!(nsd(frac * problem.vertex));
        }
    }

    #[test]
    fn eps_block_stays_feasible_when_alpha_doubles(
        which in 0usize..3,
        alpha in 0.5..200.0f64,
        scale in prop::collection::vec(0.5..2.0f64, 3),
    ) {
        let problem = &problems()[which];
        let base = eps_taus(problem, alpha).unwrap_or([alpha, 1.0, 1.0]);
        let taus = [base[0] * scale[0], base[1] * scale[1], base[2] * scale[2], 1.0, 1.0];
        let at = |a: f64| {
            let cert = Certificate::new(a, taus, problem.floor.add(&SymMatrix::identity(problem.order()))).unwrap();
            let [vp, vm] = problem.vertices();
            assemble_eps_block(problem, &cert, vp).max_eigenvalue().max(assemble_eps_block(problem, &cert, vm).max_eigenvalue())
        };
        if at(alpha) <= NSD_TOL {
            prop_assert!(at(2.0 * alpha) <= NSD_TOL);
        }
    }

    #[test]
    fn verify_is_pure(which in 0usize..3, alpha in 0.5..50.0f64, taus in prop::collection::vec(0.01..50.0f64, 5)) {
        let problem = &problems()[which];
        let cert = Certificate::new(alpha, [taus[0], taus[1], taus[2], taus[3], taus[4]], problem.floor.add(&SymMatrix::identity(problem.order()))).unwrap();
        prop_assert_eq!(verify(problem, &cert), verify(problem, &cert));
    }

    #[test]
    fn audited_gamma_within_declared(curves in curve_pair()) {
        let funnel = funnel_from(curves.0, curves.1);
        prop_assert!(audit_gamma(&funnel, 100.0) <= funnel.gamma());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn trajectories_respect_split_and_containment(which in 0usize..3, seed in any::<u64>()) {
        let scenario = built(PRESETS[which]);
        prop_assert!(scenario.limits_dominate_funnel());
        let sim = SimConfig { seed, horizon: 10.0, record_stride: 1, ..scenario.config.sim };
        let out = scenario.simulate_with(&sim, None).unwrap();
        let r = scenario.config.weights.r;
        for rec in &out.trajectory.records {
            let young = (1.0 + r) * rec.u1 * rec.u1 + (1.0 + 1.0 / r) * rec.u2 * rec.u2;
            prop_assert!(rec.u * rec.u <= young * (1.0 + 1e-12) + 1e-15);
            if rec.in_funnel {
                prop_assert!(rec.in_u);
                prop_assert!(rec.in_x.unwrap_or(true));
                prop_assert!(rec.in_y.unwrap_or(true));
            }
        }
    }

    #[test]
    fn runs_are_bitwise_deterministic(which in 0usize..3, seed in any::<u64>()) {
        let scenario = built(PRESETS[which]);
        let sim = SimConfig { seed, horizon: 5.0, ..scenario.config.sim };
        let a = scenario.simulate_with(&sim, None).unwrap();
        let b = scenario.simulate_with(&sim, None).unwrap();
        prop_assert_eq!(a.trajectory.to_csv(), b.trajectory.to_csv());
    }
}

#[test]
fn filter_step_response_is_decaying_exponential() {
    let Closed::Output { plant, .. } = &built("example3-exp").closed else {
        panic!("example3-exp is an output-feedback scenario");
    };
    let io = plant.io_form(-4.0);
    let filter = realize_filter(&io.r, &io.q_bar).unwrap();
    let h = 1e-3;
    let mut state = DVector::zeros(filter.order());
    let mut worst: f64 = 0.0;
    for k in 0..=10_000 {
        let t = k as f64 * h;
        worst = worst.max((filter.output(&state, 1.0) - (-t).exp()).abs());
        state = rk4_step(|_, s| filter.derivative(s, 1.0), t, &state, h);
    }
    assert!(worst < 1e-6, "max deviation {worst:.3e}");
}

#[test]
fn closed_loop_polynomial_is_triple_root() {
    let Closed::Output { plant, .. } = &built("example3-cos").closed else {
        panic!("example3-cos is an output-feedback scenario");
    };
    let io = plant.io_form(-4.0);
    assert_eq!(io.q_bar, Polynomial::from_roots(&[-1.0, -1.0, -1.0]));
}

#[test]
fn search_results_verify() {
    for name in ["example3-exp", "example3-cos"] {
        let scenario = built(name);
        let cert = scenario.certify(11).unwrap().expect("output certificate exists");
        assert!(scenario.verify(&cert).unwrap().feasible, "{name}");
    }
}

#[test]
fn config_round_trip() {
    for name in PRESETS {
        let config = preset(name).unwrap();
        let back = ScenarioConfig::from_json(&config.to_json()).unwrap();
        assert_eq!(config, back);
        assert_eq!(ScenarioConfig::from_json(&back.to_json()).unwrap(), back);
    }
}

#[test]
fn csv_is_rectangular_with_increasing_time() {
    for name in PRESETS {
        let csv = built(name).simulate(2, None).unwrap().trajectory.to_csv();
        let mut lines = csv.lines();
        let cols = lines.next().unwrap().split(',').count();
        let mut last = f64::NEG_INFINITY;
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), cols);
            let t: f64 = fields[0].parse().unwrap();
            assert!(t > last);
            last = t;
        }
    }
}

#[test]
fn disturbance_free_certified_loop_stays_in_funnel() {
    let mut config = preset("example3-exp").unwrap();
    config.plant.disturbance.amplitude = 0.0;
    let scenario = config.build().unwrap();
    let cert = scenario.certify(0).unwrap().unwrap();
    let out = scenario.simulate(0, Some(&cert.h)).unwrap();
    assert_eq!(out.report.funnel.count, 0);
    assert!(out.report.sup_v1.is_finite());
}
