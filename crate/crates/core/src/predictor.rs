//! Closed-form survival prediction
//! p_fit(t) = (1 − d_ini)(1 − d_inst(t)) exp(−∫₀ᵗ Γ(|a|) dt′)
//! and its comparison against propagated series.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::disturbance::{disturbance_factor, DisturbanceModel};
use crate::error::{Error, Result};
use crate::fingerprint::fingerprint;
use crate::propagator::{sig12, SurvivalSeries};
use crate::protocols::{Endpoint, Protocol};
use crate::tunneling::GammaTable;

/// Times within this fraction of τ of the end count as t = τ.
const END_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionPoint {
    pub t: f64,
    pub p_fit: f64,
    pub d_ini: f64,
    pub d_inst: f64,
    pub gamma_integral: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub protocol: Protocol,
    pub points: Vec<PredictionPoint>,
    /// Hash of the Γ table, disturbance model and protocol.
    pub inputs: String,
}

impl Prediction {
    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    pub fn p_fit(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.p_fit).collect()
    }

    /// CSV with columns `t,p_fit,d_ini,d_inst,gamma_integral`.
    pub fn write_csv<W: Write>(&self, mut out: W, preamble: &[String]) -> Result<()> {
        for line in preamble {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "t,p_fit,d_ini,d_inst,gamma_integral")?;
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{},{}",
                sig12(p.t),
                sig12(p.p_fit),
                sig12(p.d_ini),
                sig12(p.d_inst),
                sig12(p.gamma_integral)
            )?;
        }
        Ok(())
    }
}

fn is_end(protocol: &Protocol, t: f64) -> bool {
    let tau = protocol.tau();
    (t - tau).abs() <= END_TOLERANCE * tau
}

/// Instantaneous factor: (B₀ a(t))² before the end, the final-endpoint
/// disturbance at t = τ.
fn instantaneous(protocol: &Protocol, t: f64, model: &DisturbanceModel) -> Result<f64> {
    if is_end(protocol, t) {
        return Ok(disturbance_factor(protocol, Endpoint::Final, model)?.d);
    }
    let b0 = model.coefficient(0)?;
    Ok((b0 * protocol.acceleration(t)?).powi(2).min(1.0))
}

fn point(t: f64, d_ini: f64, d_inst: f64, gamma_integral: f64) -> PredictionPoint {
    let p_fit = ((1.0 - d_ini) * (1.0 - d_inst) * (-gamma_integral).exp()).clamp(0.0, 1.0);
    PredictionPoint { t, p_fit, d_ini, d_inst, gamma_integral }
}

pub fn predict_point(protocol: &Protocol, t: f64, table: &GammaTable, model: &DisturbanceModel) -> Result<PredictionPoint> {
    let d_ini = disturbance_factor(protocol, Endpoint::Initial, model)?.d;
    let d_inst = instantaneous(protocol, t, model)?;
    let integral = table.integral_to(protocol, t)?;
    Ok(point(t, d_ini, d_inst, integral))
}

pub fn predict_survival(protocol: &Protocol, t: f64, table: &GammaTable, model: &DisturbanceModel) -> Result<f64> {
    Ok(predict_point(protocol, t, table, model)?.p_fit)
}

/// p_fit at each of `times` (non-decreasing), with the Γ integral
/// accumulated segment by segment.
pub fn predict_curve(protocol: &Protocol, times: &[f64], table: &GammaTable, model: &DisturbanceModel) -> Result<Prediction> {
    let d_ini = disturbance_factor(protocol, Endpoint::Initial, model)?.d;
    let integrals = table.cumulative_integral(protocol, times)?;
    let points = times
        .iter()
        .zip(integrals)
        .map(|(&t, g)| Ok(point(t, d_ini, instantaneous(protocol, t, model)?, g)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Prediction {
        protocol: protocol.clone(),
        points,
        inputs: fingerprint(&(table, model, protocol))?,
    })
}

/// 1 − (1 − d_ini)(1 − d_fin) exp(−∫₀^τ Γ dt). Without a table the
/// tunneling factor is taken as 1.
pub fn predict_escape_large_tau(protocol: &Protocol, model: &DisturbanceModel, table: Option<&GammaTable>) -> Result<f64> {
    let d_ini = disturbance_factor(protocol, Endpoint::Initial, model)?.d;
    let d_fin = disturbance_factor(protocol, Endpoint::Final, model)?.d;
    let integral = match table {
        Some(t) => t.integral(protocol)?,
        None => 0.0,
    };
    Ok(1.0 - (1.0 - d_ini) * (1.0 - d_fin) * (-integral).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub max_abs_dev: f64,
    pub mean_abs_dev: f64,
    /// (p_fit − p_sim)/p_sim at the last common sample.
    pub rel_dev_at_tau: f64,
    pub samples: usize,
    /// Time of the largest deviation.
    pub t_max_dev: f64,
}

/// Deviation over samples present in both series.
pub fn compare(sim: &SurvivalSeries, pred: &Prediction) -> Result<DeviationReport> {
    compare_after(sim, pred, f64::NEG_INFINITY)
}

/// As [`compare`], restricted to common samples with t ≥ `t_start`.
pub fn compare_after(sim: &SurvivalSeries, pred: &Prediction, t_start: f64) -> Result<DeviationReport> {
    compare_samples(&sim.times, &sim.p, &pred.times(), &pred.p_fit(), t_start)
}

/// Deviation between two sampled curves at the times they share (to within
/// 1e-9 of the time scale), restricted to t ≥ `t_start`. Both time lists
/// must be non-decreasing.
pub fn compare_samples(sim_t: &[f64], sim_p: &[f64], pred_t: &[f64], pred_p: &[f64], t_start: f64) -> Result<DeviationReport> {
    if sim_t.len() != sim_p.len() || pred_t.len() != pred_p.len() {
        return Err(Error::Usage("time and value columns differ in length".into()));
    }
    let scale = sim_t.last().copied().unwrap_or(1.0).abs().max(1.0);
    let tol = 1e-9 * scale;
    let mut pairs = Vec::new();
    let mut j = 0;
    for (&t, &p) in sim_t.iter().zip(sim_p) {
        while j < pred_t.len() && pred_t[j] < t - tol {
            j += 1;
        }
        if j < pred_t.len() && (pred_t[j] - t).abs() <= tol && t >= t_start {
            pairs.push((t, p, pred_p[j]));
        }
    }
    let Some(&(_, p_last, fit_last)) = pairs.last() else {
        return Err(Error::Usage("simulation and prediction share no sample times".into()));
    };
    let (mut max, mut t_max, mut sum) = (0.0, pairs[0].0, 0.0);
    for &(t, s, f) in &pairs {
        let d = (s - f).abs();
        sum += d;
        if d > max {
            max = d;
            t_max = t;
        }
    }
    Ok(DeviationReport {
        max_abs_dev: max,
        mean_abs_dev: sum / pairs.len() as f64,
        rel_dev_at_tau: (fit_last - p_last) / p_last,
        samples: pairs.len(),
        t_max_dev: t_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::params::PhysicalParams;
    use crate::propagator::{AbsorberSpec, RunMeta};
    use crate::tunneling::{GammaEntry, ScanRuns};

    fn table() -> GammaTable {
        let entries = (1..=40)
            .map(|i| {
                let a = 0.025 * i as f64;
                let gamma = if a < 0.1 { 0.0 } else { 0.0136 * ((a - 0.1) / 0.045).powi(2) };
                GammaEntry { a, gamma, p_m: 1.0, r2: 1.0, flags: vec![] }
            })
            .collect();
        GammaTable::new(
            PhysicalParams::default(),
            ScanRuns { duration: 500.0, dt: 0.01, grid: GridSpec::default(), absorber: AbsorberSpec::default() },
            entries,
        )
        .unwrap()
    }

    fn series(times: Vec<f64>, p: Vec<f64>, protocol: Protocol) -> SurvivalSeries {
        let norm = vec![1.0; times.len()];
        SurvivalSeries {
            times,
            p,
            norm,
            protocol,
            meta: RunMeta {
                dt: 0.01,
                steps: 0,
                grid: GridSpec::default(),
                absorber: AbsorberSpec::default(),
                ground_energy: -0.5,
                edge_warning: false,
            },
        }
    }

    #[test]
    fn zero_acceleration_survives() {
        let p = Protocol::constant(0.0, 100.0);
        let model = DisturbanceModel::reference();
        let times: Vec<f64> = (0..=10).map(|i| 10.0 * i as f64).collect();
        let pred = predict_curve(&p, &times, &table(), &model).unwrap();
        assert!(pred.points.iter().all(|x| x.p_fit == 1.0));
    }

    #[test]
    fn constant_acceleration_closure() {
        let model = DisturbanceModel::reference();
        let t = table();
        let p = Protocol::constant(0.145, 500.0);
        let gamma = t.interpolate(0.145).unwrap();
        let d: f64 = 2.64477 * 0.145 * 0.145;
        for time in [100.0, 300.0, 499.0] {
            let v = predict_survival(&p, time, &t, &model).unwrap();
            let expected = (1.0 - d).powi(2) * (-gamma * time).exp();
            assert!((v - expected).abs() < 1e-9, "{v} vs {expected}");
        }
    }

    #[test]
    fn starts_at_one_when_initial_acceleration_vanishes() {
        let model = DisturbanceModel::reference();
        for p in [Protocol::sin(8000.0, 500.0), Protocol::poly5(125.0, 200.0)] {
            let v = predict_survival(&p, 0.0, &table(), &model).unwrap();
            let d_ini = disturbance_factor(&p, Endpoint::Initial, &model).unwrap().d;
            assert!((v - (1.0 - d_ini)).abs() < 1e-15);
            assert!(d_ini < 1e-4);
        }
    }

    #[test]
    fn curve_matches_pointwise_evaluation() {
        let model = DisturbanceModel::reference();
        let t = table();
        let p = Protocol::cos(8000.0, 500.0);
        let times: Vec<f64> = (0..=20).map(|i| 25.0 * i as f64).collect();
        let pred = predict_curve(&p, &times, &t, &model).unwrap();
        for x in &pred.points {
            let single = predict_point(&p, x.t, &t, &model).unwrap();
            assert!((single.p_fit - x.p_fit).abs() < 1e-6 * x.p_fit.max(1e-12));
            assert!((0.0..=1.0).contains(&x.p_fit));
        }
        let end = pred.points.last().unwrap();
        let d_fin = disturbance_factor(&p, Endpoint::Final, &model).unwrap().d;
        assert_eq!(end.d_inst, d_fin);
    }

    #[test]
    fn large_tau_escape_two_routes() {
        let model = DisturbanceModel::from_squares(
            crate::disturbance::REFERENCE_B0_SQ,
            1.7175e12 / (32.0 * std::f64::consts::PI.powi(4) * 8000.0f64.powi(2)),
            crate::disturbance::Provenance::Fitted,
        )
        .unwrap();
        let p = Protocol::sin(8000.0, 2000.0);
        let escape = predict_escape_large_tau(&p, &model, None).unwrap();
        let j_route = 1.7175e12 * 2000.0f64.powi(-6);
        // (1 − d)² − 1 differs from −2d by d², far below this tolerance.
        assert!((escape - j_route).abs() < 1e-6 * j_route, "{escape} vs {j_route}");
        assert!((escape - 2.68e-8).abs() < 0.01e-8);
    }

    #[test]
    fn escape_decreases_with_tau() {
        let model = DisturbanceModel::reference();
        let mut last = 1.0;
        for tau in [300.0, 400.0, 600.0, 900.0] {
            let v = predict_escape_large_tau(&Protocol::cos(5000.0, tau), &model, Some(&table())).unwrap();
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn compare_identical_and_disjoint() {
        let model = DisturbanceModel::reference();
        let p = Protocol::cos(8000.0, 500.0);
        let times: Vec<f64> = (0..=10).map(|i| 50.0 * i as f64).collect();
        let pred = predict_curve(&p, &times, &table(), &model).unwrap();
        let sim = series(times.clone(), pred.p_fit(), p.clone());
        let r = compare(&sim, &pred).unwrap();
        assert_eq!((r.max_abs_dev, r.mean_abs_dev, r.rel_dev_at_tau), (0.0, 0.0, 0.0));
        assert_eq!(r.samples, 11);
        let other = series(vec![1.0, 3.0], vec![1.0, 1.0], p);
        assert!(matches!(compare(&other, &pred), Err(Error::Usage(_))));
    }

    #[test]
    fn csv_has_expected_header() {
        let model = DisturbanceModel::reference();
        let pred = predict_curve(&Protocol::sin(8000.0, 500.0), &[0.0, 250.0, 500.0], &table(), &model).unwrap();
        let mut buf = Vec::new();
        pred.write_csv(&mut buf, &["inputs x".into()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# inputs x"));
        assert_eq!(lines.next(), Some("t,p_fit,d_ini,d_inst,gamma_integral"));
        assert_eq!(lines.count(), 3);
    }
}
