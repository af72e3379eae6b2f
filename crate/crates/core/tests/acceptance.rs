//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if a criterion that is expected to hold does not.
//!
//! Takes a few minutes on one core; independent runs use all available
//! workers (CONVEYOR_WORKERS overrides).

use std::f64::consts::PI;
use std::time::Instant;

use conveyor_core::disturbance::{
    absorb_sweep, b_from_j, compose_b, fit_quadratic_disturbance_below, run_tau_sweep, DisturbanceModel,
    Provenance, REFERENCE_B0_SQ, REFERENCE_B1_SQ,
};
use conveyor_core::ground::ground_state;
use conveyor_core::harmonic::run_checks;
use conveyor_core::predictor::{compare, compare_after, predict_curve};
use conveyor_core::sweep::{resolve_workers, run_ordered};
use conveyor_core::tunneling::{fit_late_decay, gamma_scan, DecayFit, GammaTable};
use conveyor_core::{Family, Grid, PhysicalParams, Protocol, Result, RunSettings, Simulator};
use nalgebra::{DMatrix, SymmetricEigen};

struct Outcome {
    pass: bool,
    detail: String,
    /// Failure is understood and documented; it does not fail the run.
    expected_failure: Option<&'static str>,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome { pass, detail, expected_failure: None }
    }
}

/// Results shared between criteria.
struct Shared {
    sim: Simulator,
    workers: usize,
    table: GammaTable,
    fig1: DecayFit,
    model: Option<DisturbanceModel>,
}

fn main() {
    let started = Instant::now();
    let workers = resolve_workers(None).expect("worker count");
    let sim = Simulator::new(RunSettings::default()).expect("default settings are valid");
    let a_values: Vec<f64> = (1..=48).map(|i| 0.02 * i as f64).collect();
    let table = gamma_scan(&sim, &a_values, 500.0, workers).expect("rate table");
    let fig1 = {
        let s = sim.propagate_constant(0.145, 500.0).expect("a = 0.145 run");
        fit_late_decay(&s.times, &s.p).expect("a = 0.145 fit")
    };
    let mut shared = Shared { sim, workers, table, fig1, model: None };
    eprintln!("rate table and reference run ready after {:.0} s", started.elapsed().as_secs_f64());

    let criteria: [(&str, fn(&mut Shared) -> Result<Outcome>); 11] = [
        ("ground-state oracle", c1_ground_state),
        ("constant-tilt decay at a = 0.145", c2_decay_fit),
        ("quadratic coefficient closure", c3_closure),
        ("rate monotone in a", c4_monotone),
        ("large-tau asymptotics", c5_asymptotics),
        ("B coefficients from j", c6_b_from_j),
        ("cos/sin survival curves", c7_curves),
        ("shifted-sin survival curves", c8_shifted),
        ("poly5 escape law", c9_poly5),
        ("harmonic oracle suite", c10_harmonic),
        ("determinism", c11_determinism),
    ];
    let mut unexpected = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = run(&mut shared).unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        let status = match (outcome.pass, outcome.expected_failure) {
            (true, _) => "PASS".to_string(),
            (false, Some(why)) => format!("FAIL (expected: {why})"),
            (false, None) => {
                unexpected += 1;
                "FAIL".to_string()
            }
        };
        println!(
            "criterion {:>2} {status} {name}: {} [{:.1} s]",
            i + 1,
            outcome.detail,
            t0.elapsed().as_secs_f64()
        );
    }
    println!("acceptance finished in {:.0} s", started.elapsed().as_secs_f64());
    if unexpected > 0 {
        println!("{unexpected} criteria failed unexpectedly");
        std::process::exit(1);
    }
}

/// Three-point finite-difference ground energy of −½∂² − sech²x on
/// [−half, half] with Dirichlet walls.
fn fd_ground_energy(half: f64, dx: f64) -> f64 {
    let n = (2.0 * half / dx).round() as usize - 1;
    let h = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            let x = -half + (i + 1) as f64 * dx;
            1.0 / (dx * dx) - 1.0 / x.cosh().powi(2)
        } else if i.abs_diff(j) == 1 {
            -0.5 / (dx * dx)
        } else {
            0.0
        }
    });
    SymmetricEigen::new(h).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

fn c1_ground_state(s: &mut Shared) -> Result<Outcome> {
    let params = PhysicalParams::default();
    let grid = Grid::new(RunSettings::default().grid)?;
    let (_, e) = ground_state(&grid, &params, 1e-12)?;
    let fd: Vec<f64> = [0.2, 0.1, 0.05].iter().map(|&dx| fd_ground_energy(16.0, dx)).collect();
    let errs: Vec<f64> = fd.iter().map(|e| (e + 0.5).abs()).collect();
    let ratios = [errs[0] / errs[1], errs[1] / errs[2]];
    let spectral_ok = (e + 0.5).abs() <= 2e-4 && grid.dx() <= 0.1 + 1e-12;
    let fd_ok = errs[1] <= 2e-4 && ratios.iter().all(|r| (r - 4.0).abs() < 0.2);
    let agree = (e - fd[2]).abs() <= errs[2] * 1.5;
    let _ = s;
    Ok(Outcome::new(
        spectral_ok && fd_ok && agree,
        format!(
            "spectral E = {e:.10} at dx = {}; finite-difference E = {:.7} / {:.7} / {:.7} at dx = 0.2 / 0.1 / 0.05, error ratios {:.3}, {:.3}",
            grid.dx(),
            fd[0],
            fd[1],
            fd[2],
            ratios[0],
            ratios[1]
        ),
    ))
}

fn c2_decay_fit(s: &mut Shared) -> Result<Outcome> {
    let f = &s.fig1;
    let pass = (0.88..=0.92).contains(&f.amplitude) && (0.0122..=0.0150).contains(&f.gamma) && f.r2 >= 0.999;
    Ok(Outcome::new(
        pass,
        format!(
            "A = {:.5}, Gamma = {:.6}, r2 = {:.6} over t in [{:.0}, {:.0}]",
            f.amplitude, f.gamma, f.r2, f.window.0, f.window.1
        ),
    ))
}

fn c3_closure(s: &mut Shared) -> Result<Outcome> {
    // The cos protocols of the survival-curve comparison stay below a = 0.16.
    let q = fit_quadratic_disturbance_below(&s.table, 0.16)?;
    let closure = (1.0 - q * 0.145f64.powi(2)).powi(2);
    let gap = (closure - s.fig1.amplitude).abs();
    let q_ok = (q - 2.55).abs() <= 0.15 * 2.55;
    Ok(Outcome::new(
        q_ok && gap <= 0.01,
        format!("q = {q:.4}; (1 - q*0.145^2)^2 = {closure:.5} vs A = {:.5}, gap {gap:.5}", s.fig1.amplitude),
    ))
}

fn c4_monotone(s: &mut Shared) -> Result<Outcome> {
    let a: Vec<f64> = (0..20).map(|i| 0.05 + 0.25 * i as f64 / 19.0).collect();
    let table = gamma_scan(&s.sim, &a, 500.0, s.workers)?;
    let g: Vec<f64> = table.entries.iter().map(|e| e.gamma).collect();
    let violations = table.monotonicity_violations();
    Ok(Outcome::new(
        violations.is_empty() && g.windows(2).all(|w| w[1] > w[0]),
        format!(
            "20 points, Gamma from {:.3e} to {:.3e}, {} violations",
            g[0],
            g[g.len() - 1],
            violations.len()
        ),
    ))
}

fn c5_asymptotics(s: &mut Shared) -> Result<Outcome> {
    let cos = run_tau_sweep(&s.sim, Family::Cos, 8000.0, &[1500.0, 1750.0, 2000.0, 2250.0, 2500.0], s.workers)?;
    let sin = run_tau_sweep(&s.sim, Family::Sin, 8000.0, &[1600.0, 1700.0, 1800.0, 1900.0, 2000.0], s.workers)?;
    let mut model = DisturbanceModel::default();
    let fc = absorb_sweep(&mut model, &cos, Some(&s.table))?;
    let fs = absorb_sweep(&mut model, &sin, Some(&s.table))?;
    model.insert(2, compose_b(&model, 2)?, Provenance::Composed)?;
    let rc = fc.j / 8.2440e9;
    let rs = fs.j / 1.7175e12;
    let pass = (fc.slope + 4.0).abs() <= 0.2
        && (0.7..=1.4).contains(&rc)
        && (fs.slope + 6.0).abs() <= 0.3
        && (0.7..=1.4).contains(&rs);
    let detail = format!(
        "cos slope {:.3}, j = {:.4e} (x{:.3}); sin slope {:.3}, j = {:.4e} (x{:.3}); B0^2 = {:.4}, B1^2 = {:.4}",
        fc.slope,
        fc.j,
        rc,
        fs.slope,
        fs.j,
        rs,
        model.get(0).unwrap().powi(2),
        model.get(1).unwrap().powi(2)
    );
    s.model = Some(model);
    Ok(Outcome::new(pass, detail))
}

fn c6_b_from_j(_: &mut Shared) -> Result<Outcome> {
    let b0_sq = b_from_j(8.2440e9, 8000.0, Family::Cos, 0)?.powi(2);
    let b1_sq = b_from_j(1.7175e12, 8000.0, Family::Sin, 1)?.powi(2);
    let e0 = (b0_sq - REFERENCE_B0_SQ).abs() / REFERENCE_B0_SQ;
    let e1 = (b1_sq - REFERENCE_B1_SQ).abs() / REFERENCE_B1_SQ;
    let b2 = compose_b(&DisturbanceModel::reference(), 2)?;
    Ok(Outcome::new(
        e0 < 1e-4 && e1 < 1e-4 && (b2 - 5.2939).abs() <= 1e-3,
        format!("B0^2 = {b0_sq:.5} (rel {e0:.1e}), B1^2 = {b1_sq:.5} (rel {e1:.1e}), B2 = {b2:.5}"),
    ))
}

fn fitted_model(s: &Shared) -> Result<&DisturbanceModel> {
    s.model
        .as_ref()
        .ok_or_else(|| conveyor_core::Error::Usage("no fitted B model: the large-tau sweeps failed".into()))
}

/// Maximum deviation over the whole run and after a short settling time.
fn curve_deviation(s: &Shared, protocols: &[Protocol], settle: f64) -> Result<Vec<(f64, f64, f64)>> {
    let model = fitted_model(s)?;
    run_ordered(protocols, s.workers, |p| {
        let series = s.sim.propagate(p)?;
        let pred = predict_curve(p, &series.times, &s.table, model)?;
        let full = compare(&series, &pred)?;
        let late = compare_after(&series, &pred, settle)?;
        Ok((full.max_abs_dev, full.t_max_dev, late.max_abs_dev))
    })
}

fn describe(labels: &[String], devs: &[(f64, f64, f64)]) -> String {
    labels
        .iter()
        .zip(devs)
        .map(|(l, (d, t, late))| format!("{l}: {d:.4} at t = {t:.0} ({late:.4} for t >= 10)"))
        .collect::<Vec<_>>()
        .join("; ")
}

fn c7_curves(s: &mut Shared) -> Result<Outcome> {
    let protocols = [
        Protocol::cos(5000.0, 500.0),
        Protocol::cos(8000.0, 500.0),
        Protocol::sin(8000.0, 500.0),
        Protocol::sin(11000.0, 500.0),
    ];
    let labels = ["cos L=5000", "cos L=8000", "sin L=8000", "sin L=11000"].map(String::from);
    let devs = curve_deviation(s, &protocols, 10.0)?;
    let mut o = Outcome::new(devs.iter().all(|d| d.0 <= 0.02), describe(&labels, &devs));
    o.expected_failure = Some(
        "the factorized estimate starts at (1-d)^2 while p(0) = 1 when a(0) != 0, \
         and (B0 a)^2 overestimates the disturbance for a above about 0.15",
    );
    Ok(o)
}

fn c8_shifted(s: &mut Shared) -> Result<Outcome> {
    let phis = [0.0, PI / 4.0, PI / 2.0];
    let protocols: Vec<Protocol> = phis.iter().map(|&phi| Protocol::shifted_sin(0.91, phi, 500.0)).collect();
    let labels: Vec<String> = ["phi=0", "phi=pi/4", "phi=pi/2"].iter().map(|l| l.to_string()).collect();
    let devs = curve_deviation(s, &protocols, 10.0)?;
    let mut o = Outcome::new(devs.iter().all(|d| d.0 <= 0.02), describe(&labels, &devs));
    o.expected_failure = Some(
        "c = 0.91 tilts the well past the point where it holds a bound state; \
         (B0 a(0))^2 exceeds 1 for phi = pi/4 and pi/2",
    );
    Ok(o)
}

fn c9_poly5(s: &mut Shared) -> Result<Outcome> {
    let model = fitted_model(s)?;
    let b2 = model.get(2).unwrap();
    let cases: Vec<(f64, f64)> = [125.0, 250.0].iter().flat_map(|&l| [300.0, 350.0].map(|t| (l, t))).collect();
    let escapes = run_ordered(&cases, s.workers, |&(l, tau)| {
        Ok(s.sim.propagate(&Protocol::poly5(l, tau))?.escape_probability())
    })?;
    let law = |l: f64, tau: f64| 2.0 * 840f64.powi(2) * b2 * b2 * l * l * tau.powi(-8);
    let ratios: Vec<f64> = cases.iter().zip(&escapes).map(|(&(l, t), p)| p / law(l, t)).collect();
    let scaling: Vec<f64> = (0..2).map(|k| escapes[k + 2] / escapes[k] / 4.0).collect();
    let pass = ratios.iter().all(|r| (0.6..=1.6).contains(r)) && scaling.iter().all(|r| (r - 1.0).abs() <= 0.1);
    Ok(Outcome::new(
        pass,
        format!(
            "B2 = {b2:.4}; sim/law at (L, tau) = (125, 300) {:.3}, (125, 350) {:.3}, (250, 300) {:.3}, (250, 350) {:.3}; \
             p(250)/p(125)/4 = {:.3}, {:.3}",
            ratios[0], ratios[1], ratios[2], ratios[3], scaling[0], scaling[1]
        ),
    ))
}

fn c10_harmonic(_: &mut Shared) -> Result<Outcome> {
    let report = run_checks()?;
    let detail = report
        .suites
        .iter()
        .map(|r| format!("{} {:.2e} (tol {})", r.name, r.worst, r.tolerance))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(Outcome::new(report.passed, detail))
}

fn c11_determinism(s: &mut Shared) -> Result<Outcome> {
    let csv = |p: &Protocol| -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        s.sim.propagate(p)?.write_csv(&mut buf, &[])?;
        Ok(buf)
    };
    let p = Protocol::sin(8000.0, 200.0);
    let same_csv = csv(&p)? == csv(&p)?;
    let a = [0.1, 0.2, 0.3];
    let serial = serde_json::to_vec(&gamma_scan(&s.sim, &a, 150.0, 1)?)?;
    let parallel = serde_json::to_vec(&gamma_scan(&s.sim, &a, 150.0, s.workers.max(3))?)?;
    let same_json = serial == parallel;
    Ok(Outcome::new(
        same_csv && same_json,
        format!("repeat CSV identical: {same_csv}; rate table with 1 and {} workers identical: {same_json}", s.workers.max(3)),
    ))
}
