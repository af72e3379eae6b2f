//! Adiabatic tunneling rates Γ(a) from constant-acceleration runs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::params::PhysicalParams;
use crate::propagator::{AbsorberSpec, Simulator, SurvivalSeries};
use crate::protocols::Protocol;
use crate::sweep::run_ordered;

/// Samples with p below this are treated as numerical noise and excluded
/// from the usable record.
pub const SURVIVAL_FLOOR: f64 = 1e-12;
/// r² the automatic window search aims for.
pub const TARGET_R2: f64 = 0.999;
/// Entries fitted worse than this are flagged.
pub const FLAG_R2: f64 = 0.99;
/// Smallest window the automatic search may shrink to.
pub const MIN_WINDOW_POINTS: usize = 20;
/// Largest prefactor A a decay fit is expected to produce.
pub const MAX_PREFACTOR: f64 = 1.05;
/// Γ at the smallest tabulated a below which smaller a are taken as Γ = 0.
pub const GAMMA_NOISE_FLOOR: f64 = 1e-6;

/// Least-squares fit p(t) ≈ A·exp(−Γt) on a time window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub amplitude: f64,
    pub gamma: f64,
    pub window: (f64, f64),
    pub r2: f64,
    pub points: usize,
}

/// Straight line through (t, ln p) over samples with t in `window`.
pub fn fit_exponential_decay(times: &[f64], p: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    if times.len() != p.len() {
        return Err(Error::Usage("times and p differ in length".into()));
    }
    let (lo, hi) = window;
    let mut ts = Vec::new();
    let mut ys = Vec::new();
    for (&t, &v) in times.iter().zip(p) {
        if t >= lo && t <= hi {
            if !(v > 0.0) {
                return Err(Error::Fit(format!("p = {v} at t = {t} inside the fit window")));
            }
            ts.push(t);
            ys.push(v.ln());
        }
    }
    if ts.len() < 10 {
        return Err(Error::Fit(format!(
            "{} samples in window [{lo}, {hi}]; at least 10 required",
            ts.len()
        )));
    }
    let n = ts.len() as f64;
    let t_mean = ts.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for (t, y) in ts.iter().zip(&ys) {
        let (dt, dy) = (t - t_mean, y - y_mean);
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    let slope = sty / stt;
    let intercept = y_mean - slope * t_mean;
    let ss_res: f64 = ts
        .iter()
        .zip(&ys)
        .map(|(t, y)| (y - intercept - slope * t).powi(2))
        .sum();
    // A fit that matches ln p to within 1e-9 rms counts as exact even when
    // the data are flat and r² would be 0/0.
    let r2 = if syy <= f64::MIN_POSITIVE || ss_res <= 1e-18 * n {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(DecayFit {
        amplitude: intercept.exp(),
        gamma: (-slope).max(0.0),
        window,
        r2,
        points: ts.len(),
    })
}

pub fn fit_series(series: &SurvivalSeries, window: (f64, f64)) -> Result<DecayFit> {
    fit_exponential_decay(&series.times, &series.p, window)
}

/// Fit the latter half of the usable record (the part above
/// [`SURVIVAL_FLOOR`]), moving the left edge rightwards until r² reaches
/// [`TARGET_R2`] or the window is down to [`MIN_WINDOW_POINTS`] samples.
pub fn fit_late_decay(times: &[f64], p: &[f64]) -> Result<DecayFit> {
    let usable = p
        .iter()
        .position(|&v| !(v >= SURVIVAL_FLOOR))
        .unwrap_or(p.len());
    if usable < 2 {
        return Err(Error::Fit("survival falls below the noise floor immediately".into()));
    }
    let t_hi = times[usable - 1];
    let mut t_lo = 0.5 * t_hi;
    let mut fit = fit_exponential_decay(&times[..usable], &p[..usable], (t_lo, t_hi))?;
    while fit.r2 < TARGET_R2 {
        let next_lo = t_lo + 0.1 * (t_hi - t_lo);
        let count = times[..usable].iter().filter(|&&t| t >= next_lo && t <= t_hi).count();
        if count < MIN_WINDOW_POINTS {
            break;
        }
        t_lo = next_lo;
        fit = fit_exponential_decay(&times[..usable], &p[..usable], (t_lo, t_hi))?;
    }
    Ok(fit)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaEntry {
    pub a: f64,
    pub gamma: f64,
    #[serde(rename = "p_M")]
    pub p_m: f64,
    pub r2: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRuns {
    #[serde(rename = "T")]
    pub duration: f64,
    pub dt: f64,
    pub grid: GridSpec,
    pub absorber: AbsorberSpec,
}

/// Tabulated (a, Γ, p_M, r²) with a strictly increasing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaTable {
    pub params: PhysicalParams,
    pub runs: ScanRuns,
    pub entries: Vec<GammaEntry>,
}

impl GammaTable {
    pub fn new(params: PhysicalParams, runs: ScanRuns, mut entries: Vec<GammaEntry>) -> Result<Self> {
        entries.sort_by(|a, b| a.a.total_cmp(&b.a));
        let table = GammaTable { params, runs, entries };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.windows(2).any(|w| !(w[1].a > w[0].a)) {
            return Err(Error::Config("gamma table abscissae must be strictly increasing".into()));
        }
        if self.entries.iter().any(|e| !(e.gamma >= 0.0) || !e.a.is_finite()) {
            return Err(Error::Config("gamma table holds a negative or non-finite entry".into()));
        }
        Ok(())
    }

    /// Indices i where Γ decreases from entry i to i+1. Reported, not fatal.
    pub fn monotonicity_violations(&self) -> Vec<usize> {
        self.entries
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1].gamma < w[0].gamma)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn a_range(&self) -> Option<(f64, f64)> {
        Some((self.entries.first()?.a, self.entries.last()?.a))
    }

    /// Γ(|a|) by 4-point Lagrange interpolation through the nearest entries,
    /// clamped at zero.
    pub fn interpolate(&self, a: f64) -> Result<f64> {
        let a = a.abs();
        let e = &self.entries;
        if e.len() < 4 {
            return Err(Error::Usage(format!(
                "gamma table has {} entries; interpolation needs at least 4",
                e.len()
            )));
        }
        if a == 0.0 {
            return Ok(0.0);
        }
        let (lo, hi) = (e[0].a, e[e.len() - 1].a);
        if a < lo {
            return if e[0].gamma < GAMMA_NOISE_FLOOR {
                Ok(0.0)
            } else {
                Err(Error::Range(format!(
                    "a = {a} below the table range [{lo}, {hi}] where Γ is not negligible"
                )))
            };
        }
        if a > hi * (1.0 + 1e-12) {
            return Err(Error::Range(format!("a = {a} above the table range [{lo}, {hi}]")));
        }
        let upper = e.partition_point(|x| x.a <= a);
        let start = upper.saturating_sub(2).min(e.len() - 4);
        let nodes = &e[start..start + 4];
        let mut value = 0.0;
        for (j, nj) in nodes.iter().enumerate() {
            let mut basis = 1.0;
            for (m, nm) in nodes.iter().enumerate() {
                if m != j {
                    basis *= (a - nm.a) / (nj.a - nm.a);
                }
            }
            value += basis * nj.gamma;
        }
        Ok(value.max(0.0))
    }

    /// ∫₀^τ Γ(|a(t)|) dt over the whole protocol.
    pub fn integral(&self, protocol: &Protocol) -> Result<f64> {
        self.integral_between(protocol, 0.0, protocol.tau(), 1000)
    }

    /// ∫₀ᵗ Γ(|a(t′)|) dt′.
    pub fn integral_to(&self, protocol: &Protocol, t: f64) -> Result<f64> {
        protocol.acceleration(t)?;
        let panels = panels_for(1000, t, protocol.tau());
        self.integral_between(protocol, 0.0, t.clamp(0.0, protocol.tau()), panels)
    }

    /// Running integral evaluated at each (non-decreasing) time.
    pub fn cumulative_integral(&self, protocol: &Protocol, times: &[f64]) -> Result<Vec<f64>> {
        let tau = protocol.tau();
        let mut out = Vec::with_capacity(times.len());
        let mut acc = 0.0;
        let mut prev = 0.0;
        for &t in times {
            protocol.acceleration(t)?;
            let t = t.clamp(0.0, tau);
            if t < prev {
                return Err(Error::Usage("times must be non-decreasing".into()));
            }
            if t > prev {
                acc += self.integral_between(protocol, prev, t, panels_for(1000, t - prev, tau))?;
            }
            out.push(acc);
            prev = t;
        }
        Ok(out)
    }

    /// Composite Simpson, doubling the panel count until successive
    /// estimates agree to 1e-6 relative.
    fn integral_between(&self, protocol: &Protocol, t0: f64, t1: f64, min_panels: usize) -> Result<f64> {
        if t1 <= t0 {
            return Ok(0.0);
        }
        let f = |t: f64| self.interpolate(protocol.acceleration_unchecked(t));
        let mut panels = min_panels.max(2) + min_panels % 2;
        let mut previous = simpson(&f, t0, t1, panels)?;
        for _ in 0..16 {
            panels *= 2;
            let current = simpson(&f, t0, t1, panels)?;
            if (current - previous).abs() <= 1e-6 * current.abs() || current.abs() < 1e-300 {
                return Ok(current);
            }
            previous = current;
        }
        Err(Error::Numerical(format!(
            "Γ integral over [{t0}, {t1}] did not converge with {panels} panels"
        )))
    }
}

fn panels_for(total: usize, span: f64, tau: f64) -> usize {
    let n = ((total as f64) * span / tau).ceil() as usize;
    let n = n.max(16);
    n + n % 2
}

fn simpson(f: &impl Fn(f64) -> Result<f64>, t0: f64, t1: f64, panels: usize) -> Result<f64> {
    let h = (t1 - t0) / panels as f64;
    let mut acc = f(t0)? + f(t1)?;
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(t0 + i as f64 * h)?;
    }
    Ok(acc * h / 3.0)
}

/// Propagate each constant acceleration for `duration`, fit the late
/// exponential decay, and tabulate Γ and p_M.
pub fn gamma_scan(sim: &Simulator, a_values: &[f64], duration: f64, workers: usize) -> Result<GammaTable> {
    if a_values.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::Usage("scan accelerations must be positive".into()));
    }
    if a_values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Usage("scan accelerations must be strictly increasing".into()));
    }
    let entries = run_ordered(a_values, workers, |&a| {
        let series = sim.propagate_constant(a, duration)?;
        let fit = fit_late_decay(&series.times, &series.p)?;
        let mut flags = Vec::new();
        if fit.r2 < FLAG_R2 {
            flags.push("poor_fit".to_string());
        }
        if !(fit.amplitude > 0.0 && fit.amplitude <= MAX_PREFACTOR) {
            flags.push("prefactor_out_of_range".to_string());
        }
        if series.meta.edge_warning {
            flags.push("edge_flux".to_string());
        }
        Ok(GammaEntry {
            a,
            gamma: fit.gamma,
            p_m: fit.amplitude,
            r2: fit.r2,
            flags,
        })
    })?;
    let s = sim.settings();
    GammaTable::new(
        s.params,
        ScanRuns {
            duration,
            dt: s.dt,
            grid: s.grid,
            absorber: s.absorber,
        },
        entries,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(amplitude: f64, gamma: f64, t_end: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
        let times: Vec<f64> = (0..=n).map(|i| t_end * i as f64 / n as f64).collect();
        let p = times.iter().map(|t| amplitude * (-gamma * t).exp()).collect();
        (times, p)
    }

    fn table(points: &[(f64, f64)]) -> GammaTable {
        GammaTable::new(
            PhysicalParams::default(),
            ScanRuns { duration: 500.0, dt: 0.01, grid: GridSpec::default(), absorber: AbsorberSpec::default() },
            points
                .iter()
                .map(|&(a, gamma)| GammaEntry { a, gamma, p_m: 1.0, r2: 1.0, flags: vec![] })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn recovers_synthetic_exponential() {
        let (t, p) = synthetic(0.9, 0.01, 500.0, 500);
        let fit = fit_exponential_decay(&t, &p, (250.0, 500.0)).unwrap();
        assert!((fit.amplitude - 0.9).abs() < 1e-12);
        assert!((fit.gamma - 0.01).abs() < 1e-14);
        assert_eq!(fit.r2, 1.0);
        let late = fit_late_decay(&t, &p).unwrap();
        assert!((late.gamma - 0.01).abs() < 1e-14);
    }

    #[test]
    fn flat_series_has_zero_rate() {
        let t: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let p = vec![1.0; 100];
        let fit = fit_exponential_decay(&t, &p, (50.0, 99.0)).unwrap();
        assert_eq!(fit.gamma, 0.0);
        assert_eq!(fit.amplitude, 1.0);
        assert_eq!(fit.r2, 1.0);
    }

    #[test]
    fn fit_errors() {
        let t: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let mut p = vec![0.5; 100];
        assert!(matches!(fit_exponential_decay(&t, &p, (0.0, 5.0)), Err(Error::Fit(_))));
        p[60] = 0.0;
        assert!(matches!(fit_exponential_decay(&t, &p, (50.0, 99.0)), Err(Error::Fit(_))));
    }

    #[test]
    fn late_fit_ignores_samples_below_floor() {
        let (t, p) = synthetic(0.8, 0.5, 200.0, 2000);
        let fit = fit_late_decay(&t, &p).unwrap();
        assert!((fit.gamma - 0.5).abs() < 1e-10);
        assert!(fit.window.1 < 60.0);
    }

    #[test]
    fn interpolation_reproduces_nodes_and_cubics() {
        let cubic = |a: f64| 0.2 + a - 3.0 * a * a + 5.0 * a * a * a;
        let pts: Vec<(f64, f64)> = (1..=8).map(|i| (0.05 * i as f64, cubic(0.05 * i as f64))).collect();
        let t = table(&pts);
        for &(a, g) in &pts {
            assert_eq!(t.interpolate(a).unwrap(), g);
        }
        for a in [0.06, 0.123, 0.2, 0.33, 0.399] {
            assert!((t.interpolate(a).unwrap() - cubic(a)).abs() < 1e-12);
        }
        assert!((t.interpolate(-0.2).unwrap() - cubic(0.2)).abs() < 1e-12);
    }

    #[test]
    fn interpolation_domain_rules() {
        let t = table(&[(0.05, 1e-8), (0.1, 1e-4), (0.15, 1e-2), (0.2, 0.05)]);
        assert_eq!(t.interpolate(0.0).unwrap(), 0.0);
        assert_eq!(t.interpolate(0.01).unwrap(), 0.0);
        assert!(matches!(t.interpolate(0.25), Err(Error::Range(_))));
        let loud = table(&[(0.05, 1e-3), (0.1, 1e-2), (0.15, 2e-2), (0.2, 0.05)]);
        assert!(matches!(loud.interpolate(0.01), Err(Error::Range(_))));
        let short = table(&[(0.1, 1.0), (0.2, 2.0), (0.3, 3.0)]);
        assert!(matches!(short.interpolate(0.2), Err(Error::Usage(_))));
        let empty = table(&[]);
        assert!(empty.a_range().is_none());
    }

    #[test]
    fn integral_of_constant_and_zero_protocols() {
        let pts: Vec<(f64, f64)> = (1..=10).map(|i| (0.03 * i as f64, 0.1 * i as f64)).collect();
        let t = table(&pts);
        let g = t.interpolate(0.145).unwrap();
        let v = t.integral(&Protocol::constant(0.145, 300.0)).unwrap();
        assert!((v - g * 300.0).abs() < 1e-9 * v);
        assert_eq!(t.integral(&Protocol::constant(0.0, 300.0)).unwrap(), 0.0);
        let cum = t
            .cumulative_integral(&Protocol::constant(0.145, 300.0), &[0.0, 100.0, 300.0])
            .unwrap();
        assert!((cum[1] - g * 100.0).abs() < 1e-9 && (cum[2] - v).abs() < 1e-9);
    }

    #[test]
    fn integral_is_time_reversal_symmetric() {
        // Γ depends on |a|, so a(t) and a(τ − t) give the same integral.
        let pts: Vec<(f64, f64)> = (0..=12).map(|i| (0.025 * i as f64 + 0.001, (0.025 * i as f64).powi(3))).collect();
        let t = table(&pts);
        for p in [Protocol::cos(5000.0, 500.0), Protocol::sin(8000.0, 500.0)] {
            let forward = t.integral(&p).unwrap();
            let tau = p.tau();
            let n = 20_000;
            let h = tau / n as f64;
            let reversed: f64 = (0..n)
                .map(|i| {
                    let s = tau - (i as f64 + 0.5) * h;
                    t.interpolate(p.acceleration(s).unwrap()).unwrap() * h
                })
                .sum();
            assert!((forward - reversed).abs() < 1e-5 * forward, "{forward} vs {reversed}");
        }
    }

    #[test]
    fn table_json_round_trip() {
        let t = table(&[(0.1, 1e-4), (0.2, 0.05)]);
        let s = serde_json::to_string(&t).unwrap();
        assert!(s.contains("\"p_M\"") && s.contains("\"T\""));
        let back: GammaTable = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn rejects_unsorted_input() {
        let mut t = table(&[(0.1, 1e-4), (0.2, 0.05)]);
        t.entries.swap(0, 1);
        assert!(t.validate().is_err());
    }
}
