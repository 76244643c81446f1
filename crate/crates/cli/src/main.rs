mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use funnelgate::lmi::{verify, Certificate, SearchOptions, VerifyReport};
use funnelgate::scenario::{preset, Closed, Scenario, ScenarioConfig, PRESETS};
use funnelgate::selftest::{self, SelftestOptions};
use funnelgate::sim::Trajectory;

use plot::{Band, Plot, Series};

const SEED_ENV: &str = "FUNNELGATE_SEED";

#[derive(Parser)]
#[command(name = "funnelgate", version, about = "Funnel-constrained control: certificates and closed-loop runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Source {
    /// example2, example3-exp, example3-cos or custom
    #[arg(long, default_value = "example2")]
    scenario: String,
    /// Scenario document (JSON); implies --scenario custom
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the scenario's alpha
    #[arg(long)]
    alpha: Option<f64>,
    /// Base seed; FUNNELGATE_SEED takes precedence
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Search for (or verify) a certificate
    Certify {
        #[command(flatten)]
        source: Source,
        /// tau1..tau5 as five comma-separated values; checks this alpha and these taus only
        #[arg(long)]
        tau: Option<String>,
    },
    /// Run the closed loop and write trajectory, violations and plots
    Simulate {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        no_plots: bool,
    },
    /// Run the embedded invariant suite
    Selftest {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, hide = true)]
        corrupt_tolerance: bool,
    },
}

enum Failure {
    /// Ran to completion with a negative verdict.
    Rejected,
    Config(String),
}

impl From<funnelgate::Error> for Failure {
    fn from(e: funnelgate::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn resolve_seed(flag: Option<u64>) -> Result<u64, Failure> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Failure::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(flag.unwrap_or(0)),
    }
}

fn load_config(source: &Source) -> Result<ScenarioConfig, Failure> {
    if let Some(path) = &source.config {
        let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        return ScenarioConfig::from_json(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())));
    }
    if source.scenario == "custom" {
        return Err(Failure::Config("--scenario custom needs --config".into()));
    }
    preset(&source.scenario).ok_or_else(|| {
        Failure::Config(format!("unknown scenario {:?}; expected one of {}, custom", source.scenario, PRESETS.join(", ")))
    })
}

fn parse_taus(text: &str) -> Result<[f64; 5], Failure> {
    let values: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::Config(format!("--tau: {e}")))?;
    let taus: [f64; 5] = values.try_into().map_err(|_| Failure::Config("--tau needs exactly five values".into()))?;
    if taus.iter().any(|t| !(*t > 0.0)) {
        return Err(Failure::Config("--tau values must be positive".into()));
    }
    Ok(taus)
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Failure::Config(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn print_margins(report: &VerifyReport) {
    println!("eps block max eigenvalue (+v)   {:+.6e}", report.eps_block[0]);
    println!("eps block max eigenvalue (-v)   {:+.6e}", report.eps_block[1]);
    println!("H block max eigenvalue          {:+.6e}", report.h_block);
    println!("scalar slack (eps side)         {:+.6e}", report.scalar_eps_slack);
    println!("scalar slack (H side)           {:+.6e}", report.scalar_h_slack);
    println!("dominance min eigenvalue        {:+.6e}", report.dominance);
    println!("H min eigenvalue                {:+.6e}", report.h_min_eigenvalue);
    println!("feasible                        {}", report.feasible);
}

fn certify(source: &Source, tau: Option<&str>) -> Outcome {
    let mut config = load_config(source)?;
    let seed = resolve_seed(source.seed)?;
    if let Some(a) = source.alpha {
        config.gains.alpha = a;
    }
    let scenario = config.build()?;
    let problem = scenario.problem()?;

    let supplied = config.certificate.clone().filter(|_| tau.is_none() && source.alpha.is_none());
    let found = if let Some(cert) = supplied {
        println!("verifying supplied certificate, alpha = {}", cert.alpha);
        Ok(cert)
    } else {
        let base = scenario.search_options(seed);
        let opts = match tau {
            Some(t) => SearchOptions { fixed_taus: Some(parse_taus(t)?), alpha_hint: Some(scenario.alpha()), sweep_alpha: false, ..base },
            None => SearchOptions { alpha_hint: Some(scenario.alpha()), sweep_alpha: source.alpha.is_none(), ..base },
        };
        scenario.certify_with(&opts)?
    };

    match found {
        Ok(cert) => {
            let report = verify(&problem, &cert);
            println!("scenario {} alpha {} tau {:?}", scenario.name(), cert.alpha, cert.taus);
            print_margins(&report);
            if report.feasible {
                write_file(&source.out.join("certificate.json"), &cert.to_json())?;
                Ok(())
            } else {
                Err(Failure::Rejected)
            }
        }
        Err(report) => {
            println!("scenario {}: {report}", scenario.name());
            Err(Failure::Rejected)
        }
    }
}

fn simulate(source: &Source, horizon: Option<f64>, step: Option<f64>, no_plots: bool) -> Outcome {
    let mut config = load_config(source)?;
    let seed = resolve_seed(source.seed)?;
    if let Some(a) = source.alpha {
        config.gains.alpha = a;
    }
    if let Some(h) = horizon {
        config.sim.horizon = h;
    }
    if let Some(s) = step {
        config.sim.step = s;
    }
    config.sim.seed = seed;
    let scenario = config.build()?;

    let cert: Option<Certificate> = match &config.certificate {
        Some(c) => Some(c.clone()),
        None => scenario.certify(seed)?.ok(),
    };
    let cert = cert.filter(|c| scenario.verify(c).map(|r| r.feasible).unwrap_or(false));
    if cert.is_none() {
        eprintln!("warning: no verified certificate for {}; simulating with alpha = {} anyway", scenario.name(), scenario.alpha());
    }

    let outcome = scenario.simulate(seed, cert.as_ref().map(|c| &c.h))?;
    let out = &source.out;
    write_file(&out.join("trajectory.csv"), &outcome.trajectory.to_csv())?;
    write_file(&out.join("violations.json"), &outcome.report.to_json())?;
    if let Some(c) = &cert {
        write_file(&out.join("certificate.json"), &c.to_json())?;
    }
    if !no_plots {
        for (name, svg) in plots(&scenario, &outcome.trajectory) {
            write_file(&out.join("plots").join(name), &svg)?;
        }
    }

    let r = &outcome.report;
    println!(
        "scenario {} seed {} steps {}: funnel {} set_x {} set_y {} set_u {} clamp {} non_finite {}",
        scenario.name(),
        seed,
        r.steps,
        r.funnel.count,
        r.set_x.count,
        r.set_y.count,
        r.set_u.count,
        r.inverse_clamp.count,
        r.non_finite.count
    );
    println!("funnel margins lower {:.6e} upper {:.6e}; sup V1 {:.6e}", r.margins.funnel_lower, r.margins.funnel_upper, r.sup_v1);
    if r.is_clean() {
        Ok(())
    } else {
        Err(Failure::Rejected)
    }
}

fn ellipse(m: &nalgebra::DMatrix<f64>, level: f64) -> Vec<(f64, f64)> {
    let Some(chol) = m.clone().cholesky() else {
        return Vec::new();
    };
    let l_inv_t = chol.l().transpose().try_inverse().unwrap_or_else(|| nalgebra::DMatrix::identity(2, 2));
    (0..=200)
        .map(|i| {
            let th = std::f64::consts::TAU * i as f64 / 200.0;
            let v = nalgebra::DVector::from_vec(vec![th.cos(), th.sin()]) * level.sqrt();
            let p = &l_inv_t * v;
            (p[0], p[1])
        })
        .collect()
}

/// `p₂u₁² + p₃(|u₂| + δ)² = level`.
fn input_level_set(p2: f64, p3: f64, delta: f64, level: f64) -> Vec<(f64, f64)> {
    (0..=200)
        .filter_map(|i| {
            let th = std::f64::consts::TAU * i as f64 / 200.0;
            let mag = (level / p3).sqrt() * th.sin().abs() - delta;
            (mag >= 0.0).then(|| ((level / p2).sqrt() * th.cos(), mag.copysign(th.sin())))
        })
        .collect()
}

fn plots(scenario: &Scenario, traj: &Trajectory) -> Vec<(&'static str, String)> {
    let funnel = scenario.transform().funnel;
    let rec = &traj.records;
    let mut xi = Plot::new("constraint aggregate", "t [s]", "xi");
    xi.bands.push(Band {
        lower: rec.iter().map(|r| (r.t, funnel.lower().value(r.t))).collect(),
        upper: rec.iter().map(|r| (r.t, funnel.upper().value(r.t))).collect(),
    });
    xi.series.push(Series::line("xi", rec.iter().map(|r| (r.t, r.xi)).collect()));
    xi.series.push(Series::dashed("lower", rec.iter().map(|r| (r.t, funnel.lower().value(r.t))).collect()));
    xi.series.push(Series::dashed("upper", rec.iter().map(|r| (r.t, funnel.upper().value(r.t))).collect()));
    let mut out = vec![("xi.svg", xi.render())];

    let g0 = funnel.upper().value(0.0);
    let g_inf = funnel.upper_infimum();
    match &scenario.closed {
        Closed::State { law, .. } => {
            if traj.order == 2 {
                let mut phase = Plot::new("phase plane", "x1", "x2");
                phase.series.push(Series::line("x", rec.iter().map(|r| (r.x[0], r.x[1])).collect()));
                phase.series.push(Series::dashed("x'P1x = upper(0)", ellipse(law.p1.as_matrix(), g0)));
                phase.series.push(Series::dashed("x'P1bar x = inf upper", ellipse(law.p1_bar.as_matrix(), g_inf)));
                out.push(("phase.svg", phase.render()));
            }
            let w = &law.weights;
            let mut inputs = Plot::new("input plane", "u1", "u2");
            inputs.series.push(Series::line("u", rec.iter().map(|r| (r.u1, r.u2)).collect()));
            inputs.series.push(Series::dashed("level upper(0)", input_level_set(w.p2(), w.p3(), w.delta(), g0)));
            inputs.series.push(Series::dashed("level inf upper", input_level_set(w.p2(), w.p3(), w.delta(), g_inf)));
            out.push(("inputs.svg", inputs.render()));
        }
        Closed::Output { .. } => {
            let mut ts = Plot::new("output and inputs", "t [s]", "value");
            ts.series.push(Series::line("y", rec.iter().map(|r| (r.t, r.y.unwrap_or(f64::NAN))).collect()));
            ts.series.push(Series::line("u1", rec.iter().map(|r| (r.t, r.u1)).collect()));
            ts.series.push(Series::line("u2", rec.iter().map(|r| (r.t, r.u2)).collect()));
            out.push(("signals.svg", ts.render()));
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Certify { source, tau } => certify(source, tau.as_deref()),
        Command::Simulate { source, horizon, step, no_plots } => simulate(source, *horizon, *step, *no_plots),
        Command::Selftest { seed, corrupt_tolerance } => resolve_seed(*seed).and_then(|seed| {
            let report = selftest::run(&SelftestOptions { seed, corrupt_tolerance: *corrupt_tolerance });
            print!("{}", report.table());
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Rejected)
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Rejected) => ExitCode::from(1),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
