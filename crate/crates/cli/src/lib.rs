//! `conveyor` command-line driver.

pub mod config;
pub mod csvio;
pub mod plot;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use conveyor_core::disturbance::{
    absorb_sweep, fit_quadratic_disturbance, fit_quadratic_disturbance_below, run_tau_sweep, DisturbanceModel,
    Provenance, TauSweep,
};
use conveyor_core::fingerprint::fingerprint;
use conveyor_core::ground::ground_state;
use conveyor_core::harmonic::run_checks;
use conveyor_core::predictor::{compare_samples, predict_curve};
use conveyor_core::propagator::sig12;
use conveyor_core::sweep::resolve_workers;
use conveyor_core::tunneling::{gamma_scan, GammaTable};
use conveyor_core::{Error, Family, Grid, Protocol, Result, Simulator};
use serde::Serialize;

use config::{RunConfig, ScanConfig};
use plot::{render_svg, PlotOptions, Series};

#[derive(Parser, Debug)]
#[command(name = "conveyor", version, about = "Survival of a particle carried by a moving potential well")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Relax the trapped state in imaginary time and report its energy.
    GroundState(Common),
    /// Propagate one protocol and write p(t) as CSV.
    Propagate(Common),
    /// Tabulate Γ(a) and p_M(a) from constant-acceleration runs.
    GammaScan(GammaScanArgs),
    /// Escape probability 1 − p(τ) over a list of conveyance times.
    SweepTau(SweepArgs),
    /// Build a disturbance model from τ sweeps and/or a Γ table.
    FitDisturbance(FitArgs),
    /// Evaluate the closed-form survival prediction for one protocol.
    Predict(PredictArgs),
    /// Deviation between a simulated and a predicted series.
    Compare(CompareArgs),
    /// Run the moving-harmonic-trap consistency checks.
    HarmonicCheck(HarmonicArgs),
    /// Render CSV series as an SVG line plot.
    Plot(PlotArgs),
}

#[derive(Args, Debug, Default)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Protocol family: const, cos, sin, shifted_sin, poly5.
    #[arg(long)]
    pub protocol: Option<Family>,
    /// Transport distance.
    #[arg(long = "L")]
    pub length: Option<f64>,
    /// Conveyance time.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Acceleration of the `const` protocol.
    #[arg(long)]
    pub a: Option<f64>,
    /// Amplitude of the `shifted_sin` protocol.
    #[arg(long)]
    pub c: Option<f64>,
    /// Phase of the `shifted_sin` protocol.
    #[arg(long)]
    pub phi: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub gamma_table: Option<PathBuf>,
    #[arg(long)]
    pub b_model: Option<PathBuf>,
    /// Worker threads for independent runs (default: CONVEYOR_WORKERS or all cores).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Args, Debug)]
pub struct GammaScanArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub a_min: Option<f64>,
    #[arg(long)]
    pub a_max: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Duration of each constant-acceleration run.
    #[arg(long = "T")]
    pub duration: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated conveyance times.
    #[arg(long, value_delimiter = ',')]
    pub taus: Vec<f64>,
    /// Also write `tau,p_escape` as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    /// τ-sweep JSON files (cos fixes B0, sin fixes B1).
    #[arg(long = "sweep")]
    pub sweeps: Vec<PathBuf>,
    /// Restrict the prefactor fit to a ≤ this value.
    #[arg(long)]
    pub quadratic_a_max: Option<f64>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: Common,
    /// Sample spacing in time.
    #[arg(long, default_value_t = 1.0)]
    pub every: f64,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// CSV from `propagate` (columns t, p).
    #[arg(long)]
    pub sim: PathBuf,
    /// CSV from `predict` (columns t, p_fit).
    #[arg(long)]
    pub pred: PathBuf,
    /// Ignore samples before this time.
    #[arg(long)]
    pub t_start: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct HarmonicArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    /// CSV files to overlay.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub logx: bool,
    #[arg(long)]
    pub logy: bool,
    /// x column (default: first column).
    #[arg(long)]
    pub x: Option<String>,
    /// y column (default: second column).
    #[arg(long)]
    pub y: Option<String>,
}

/// Parse arguments, run, and map the outcome to an exit code: 0 success,
/// 1 invalid input, 2 numerical failure.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::GroundState(c) => ground_state_cmd(c),
        Command::Propagate(c) => propagate_cmd(c),
        Command::GammaScan(a) => gamma_scan_cmd(a),
        Command::SweepTau(a) => sweep_cmd(a),
        Command::FitDisturbance(a) => fit_cmd(a),
        Command::Predict(a) => predict_cmd(a),
        Command::Compare(a) => compare_cmd(a),
        Command::HarmonicCheck(a) => harmonic_cmd(a),
        Command::Plot(a) => plot_cmd(a),
    }
}

/// Merge the config file (if any) with command-line overrides and validate.
pub fn resolve_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.protocol = protocol_from_flags(cfg.protocol.take(), c)?;
    if c.out.is_some() {
        cfg.outputs.out = c.out.clone();
    }
    if c.gamma_table.is_some() {
        cfg.outputs.gamma_table = c.gamma_table.clone();
    }
    if c.b_model.is_some() {
        cfg.outputs.b_model = c.b_model.clone();
    }
    if c.workers.is_some() {
        cfg.workers = c.workers;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn protocol_from_flags(existing: Option<Protocol>, c: &Common) -> Result<Option<Protocol>> {
    let family = match (c.protocol, &existing) {
        (Some(f), _) => f,
        (None, Some(p)) => p.family(),
        (None, None) => {
            if c.length.is_some() || c.tau.is_some() || c.a.is_some() || c.c.is_some() || c.phi.is_some() {
                return Err(Error::Usage("protocol parameters given without --protocol".into()));
            }
            return Ok(None);
        }
    };
    let same = existing.as_ref().filter(|p| p.family() == family);
    let tau = c.tau.or(same.map(Protocol::tau));
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| Error::Usage(format!("the {family} protocol needs --{name}")));
    let protocol = match family {
        Family::ConstantA => {
            let old_a = match same {
                Some(Protocol::ConstantA { a, .. }) => Some(*a),
                _ => None,
            };
            Protocol::constant(need(c.a.or(old_a), "a")?, need(tau, "tau")?)
        }
        Family::Cos | Family::Sin | Family::Poly5 => {
            let old_l = match same {
                Some(Protocol::Cos { length, .. } | Protocol::Sin { length, .. } | Protocol::Poly5 { length, .. }) => {
                    Some(*length)
                }
                _ => None,
            };
            Protocol::from_family(family, need(c.length.or(old_l), "L")?, need(tau, "tau")?)?
        }
        Family::ShiftedSin => {
            let (old_c, old_phi) = match same {
                Some(Protocol::ShiftedSin { c, phi, .. }) => (Some(*c), Some(*phi)),
                _ => (None, None),
            };
            Protocol::shifted_sin(need(c.c.or(old_c), "c")?, c.phi.or(old_phi).unwrap_or(0.0), need(tau, "tau")?)
        }
        Family::Taylor => match same {
            Some(Protocol::Taylor { coeffs, tau: t }) => {
                Protocol::Taylor { coeffs: coeffs.clone(), tau: c.tau.unwrap_or(*t) }
            }
            _ => return Err(Error::Usage("taylor protocols must be given in the config file".into())),
        },
    };
    protocol.validate()?;
    Ok(Some(protocol))
}

fn output(path: Option<&Path>, body: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, body)?,
        None => std::io::stdout().write_all(body)?,
    }
    Ok(())
}

/// Pretty JSON with a top-level `fingerprint` entry.
fn json_with_fingerprint<T: Serialize>(value: &T, fp: &str) -> Result<Vec<u8>> {
    let mut v = serde_json::to_value(value)?;
    if let serde_json::Value::Object(map) = &mut v {
        map.insert("fingerprint".into(), serde_json::Value::String(fp.to_string()));
    }
    let mut text = serde_json::to_string_pretty(&v)?;
    text.push('\n');
    Ok(text.into_bytes())
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn load_gamma_table(path: Option<&PathBuf>) -> Result<GammaTable> {
    let path = path.ok_or_else(|| Error::Usage("--gamma-table is required".into()))?;
    let table: GammaTable = load_json(path)?;
    table.validate()?;
    Ok(table)
}

fn load_b_model(path: Option<&PathBuf>) -> Result<DisturbanceModel> {
    let path = path.ok_or_else(|| Error::Usage("--b-model is required".into()))?;
    let model: DisturbanceModel = load_json(path)?;
    model.validate()?;
    Ok(model)
}

fn ground_state_cmd(c: Common) -> Result<()> {
    let cfg = resolve_config(&c)?;
    let fp = cfg.fingerprint()?;
    let grid = Grid::new(cfg.grid)?;
    let (psi, energy) = ground_state(&grid, &cfg.params, cfg.ground_tol)?;
    let mut body = format!("# fingerprint: {fp}\n# energy: {}\nx,psi_re,psi_im\n", sig12(energy));
    for (x, a) in grid.x().iter().zip(psi.amplitudes()) {
        body.push_str(&format!("{},{},{}\n", sig12(*x), sig12(a.re), sig12(a.im)));
    }
    match &cfg.outputs.out {
        Some(path) => {
            std::fs::write(path, body)?;
            println!("{{\"energy\": {}, \"fingerprint\": \"{fp}\"}}", sig12(energy));
        }
        None => output(None, body.as_bytes())?,
    }
    Ok(())
}

fn propagate_cmd(c: Common) -> Result<()> {
    let cfg = resolve_config(&c)?;
    let protocol = cfg.require_protocol()?.clone();
    let fp = cfg.fingerprint()?;
    let series = Simulator::new(cfg.settings())?.propagate(&protocol)?;
    if series.meta.edge_warning {
        eprintln!("warning: the wavefunction reached the grid edge; consider a wider grid or stronger absorber");
    }
    let preamble = vec![
        format!("fingerprint: {fp}"),
        format!("protocol: {}", serde_json::to_string(&protocol)?),
        format!("ground_energy: {}", sig12(series.meta.ground_energy)),
        format!("edge_warning: {}", series.meta.edge_warning),
    ];
    let mut buf = Vec::new();
    series.write_csv(&mut buf, &preamble)?;
    output(cfg.outputs.out.as_deref(), &buf)
}

fn gamma_scan_cmd(a: GammaScanArgs) -> Result<()> {
    let mut cfg = resolve_config(&a.common)?;
    let mut scan = cfg.scan.unwrap_or_default();
    if let Some(v) = a.a_min {
        scan.a_min = v;
    }
    if let Some(v) = a.a_max {
        scan.a_max = v;
    }
    if let Some(v) = a.steps {
        scan.steps = v;
    }
    if let Some(v) = a.duration {
        scan.duration = v;
    }
    cfg.scan = Some(scan);
    cfg.validate()?;
    let fp = cfg.fingerprint()?;
    let workers = resolve_workers(cfg.workers)?;
    let sim = Simulator::new(cfg.settings())?;
    let table = gamma_scan(&sim, &scan_values(&scan)?, scan.duration, workers)?;
    let violations = table.monotonicity_violations();
    if !violations.is_empty() {
        eprintln!("warning: gamma decreases after entries {violations:?}");
    }
    output(cfg.outputs.out.as_deref(), &json_with_fingerprint(&table, &fp)?)
}

fn scan_values(scan: &ScanConfig) -> Result<Vec<f64>> {
    scan.values()
}

fn sweep_cmd(mut a: SweepArgs) -> Result<()> {
    if a.common.tau.is_none() {
        a.common.tau = a.taus.first().copied();
    }
    let mut cfg = resolve_config(&a.common)?;
    if !a.taus.is_empty() {
        cfg.taus = Some(a.taus.clone());
    }
    let taus = cfg.taus.clone().ok_or_else(|| Error::Usage("no taus given (use --taus)".into()))?;
    let protocol = cfg.require_protocol()?;
    let family = protocol.family();
    let length = match protocol {
        Protocol::Cos { length, .. } | Protocol::Sin { length, .. } | Protocol::Poly5 { length, .. } => *length,
        _ => return Err(Error::Usage("τ sweeps need a cos, sin or poly5 protocol".into())),
    };
    // The sweep is defined by (family, L, taus); the protocol's own tau is irrelevant.
    cfg.protocol = Some(Protocol::from_family(family, length, taus[0])?);
    let fp = cfg.fingerprint()?;
    let workers = resolve_workers(cfg.workers)?;
    let sim = Simulator::new(cfg.settings())?;
    let sweep = run_tau_sweep(&sim, family, length, &taus, workers)?;
    if let Some(path) = &a.csv {
        let mut body = format!("# fingerprint: {fp}\ntau,p_escape\n");
        for (t, p) in sweep.taus.iter().zip(&sweep.p_escape) {
            body.push_str(&format!("{},{}\n", sig12(*t), sig12(*p)));
        }
        std::fs::write(path, body)?;
    }
    output(cfg.outputs.out.as_deref(), &json_with_fingerprint(&sweep, &fp)?)
}

fn fit_cmd(a: FitArgs) -> Result<()> {
    let cfg = resolve_config(&a.common)?;
    let table = match &cfg.outputs.gamma_table {
        Some(_) => Some(load_gamma_table(cfg.outputs.gamma_table.as_ref())?),
        None => None,
    };
    let mut model = DisturbanceModel::default();
    let mut sources = Vec::new();
    for path in &a.sweeps {
        let sweep: TauSweep = load_json(path)?;
        let fit = absorb_sweep(&mut model, &sweep, table.as_ref())?;
        eprintln!(
            "{} sweep L={}: slope {:.4}, j {:.6e}",
            sweep.family, sweep.length, fit.slope, fit.j
        );
        sources.push(fingerprint(&sweep)?);
    }
    if let Some(t) = &table {
        let q = match a.quadratic_a_max {
            Some(a_max) => fit_quadratic_disturbance_below(t, a_max)?,
            None => fit_quadratic_disturbance(t)?,
        };
        model.quadratic_coefficient = Some(q);
        if model.get(0).is_none() {
            model.insert(0, q.sqrt(), Provenance::Quadratic)?;
        }
        sources.push(fingerprint(t)?);
    }
    if model.get(0).is_some() && model.get(1).is_some() && model.get(2).is_none() {
        model.compose(2)?;
    }
    if model.b.is_empty() {
        return Err(Error::Usage("nothing to fit: pass --sweep files and/or --gamma-table".into()));
    }
    let fp = fingerprint(&(cfg.fingerprint()?, sources, a.quadratic_a_max))?;
    output(cfg.outputs.out.as_deref(), &json_with_fingerprint(&model, &fp)?)
}

fn predict_cmd(a: PredictArgs) -> Result<()> {
    let cfg = resolve_config(&a.common)?;
    let protocol = cfg.require_protocol()?.clone();
    let table = load_gamma_table(cfg.outputs.gamma_table.as_ref())?;
    let model = load_b_model(cfg.outputs.b_model.as_ref())?;
    if !(a.every > 0.0) {
        return Err(Error::Usage("--every must be positive".into()));
    }
    let tau = protocol.tau();
    let n = (tau / a.every).round().max(1.0) as usize;
    let times: Vec<f64> = (0..=n).map(|i| if i == n { tau } else { i as f64 * a.every }).collect();
    let pred = predict_curve(&protocol, &times, &table, &model)?;
    let preamble = vec![
        format!("fingerprint: {}", cfg.fingerprint()?),
        format!("inputs: {}", pred.inputs),
        format!("protocol: {}", serde_json::to_string(&protocol)?),
    ];
    let mut buf = Vec::new();
    pred.write_csv(&mut buf, &preamble)?;
    output(cfg.outputs.out.as_deref(), &buf)
}

fn compare_cmd(a: CompareArgs) -> Result<()> {
    let sim = csvio::read_table(&a.sim)?;
    let pred = csvio::read_table(&a.pred)?;
    let (st, sp) = (sim.column("t")?, sim.column("p")?);
    let (pt, pp) = (pred.column("t")?, pred.column("p_fit")?);
    let report = compare_samples(&st, &sp, &pt, &pp, a.t_start.unwrap_or(f64::NEG_INFINITY))?;
    let fp = fingerprint(&(&st, &sp, &pt, &pp, a.t_start))?;
    output(a.out.as_deref(), &json_with_fingerprint(&report, &fp)?)
}

fn harmonic_cmd(a: HarmonicArgs) -> Result<()> {
    let report = run_checks()?;
    let fp = fingerprint(&"harmonic-check")?;
    output(a.out.as_deref(), &json_with_fingerprint(&report, &fp)?)?;
    if !report.passed {
        let failed: Vec<&str> = report.suites.iter().filter(|s| !s.passed).map(|s| s.name.as_str()).collect();
        return Err(Error::Accuracy(format!("harmonic checks failed: {}", failed.join(", "))));
    }
    Ok(())
}

fn plot_cmd(a: PlotArgs) -> Result<()> {
    let mut series = Vec::new();
    let (mut x_label, mut y_label) = (String::new(), String::new());
    for path in &a.inputs {
        let table = csvio::read_table(path)?;
        let (xn, x) = match &a.x {
            Some(name) => (name.clone(), table.column(name)?),
            None => table.column_at(0)?,
        };
        let (yn, y) = match &a.y {
            Some(name) => (name.clone(), table.column(name)?),
            None => table.column_at(1)?,
        };
        x_label = xn;
        y_label = yn.clone();
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        series.push(Series { label: format!("{stem}: {yn}"), x, y });
    }
    let svg = render_svg(&series, &PlotOptions { logx: a.logx, logy: a.logy, x_label, y_label })?;
    std::fs::write(&a.out, svg)?;
    Ok(())
}
