//! Initial and final disturbance factors d = (B_n a⁽ⁿ⁾)².

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagator::Simulator;
use crate::protocols::{derivative_prefactor, Endpoint, Family, Protocol, DEFAULT_N_MAX};
use crate::sweep::run_ordered;
use crate::tunneling::GammaTable;

/// B₀² from the large-τ cos sweep at L = 8000.
pub const REFERENCE_B0_SQ: f64 = 2.64477;
/// B₁² from the large-τ sin sweep at L = 8000.
pub const REFERENCE_B1_SQ: f64 = 8.60949;
/// Largest ∫Γ dt a sweep point may carry and still count as asymptotic.
pub const REGIME_GAMMA_INTEGRAL: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// From a j-coefficient of an asymptotic escape sweep.
    Fitted,
    /// From the constant-acceleration prefactor slope 1 − √p_M ∝ a².
    Quadratic,
    /// B_n = B₀^(1−n) B₁^n.
    Composed,
    /// Supplied directly.
    Given,
}

/// Summary of a sweep that populated a coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSource {
    pub family: Family,
    #[serde(rename = "L")]
    pub length: f64,
    pub n: usize,
    pub tau_range: (f64, f64),
    pub j: f64,
    pub slope: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceModel {
    #[serde(rename = "B")]
    pub b: BTreeMap<usize, f64>,
    pub provenance: BTreeMap<usize, Provenance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadratic_coefficient: Option<f64>,
    #[serde(default)]
    pub source_sweeps: Vec<SweepSource>,
}

impl DisturbanceModel {
    /// Model with B₀ and B₁ set from their squares.
    pub fn from_squares(b0_sq: f64, b1_sq: f64, provenance: Provenance) -> Result<Self> {
        let mut model = DisturbanceModel::default();
        model.insert(0, b0_sq.sqrt(), provenance)?;
        model.insert(1, b1_sq.sqrt(), provenance)?;
        Ok(model)
    }

    /// B₀² = 2.64477, B₁² = 8.60949, and B₂ composed from them.
    pub fn reference() -> Self {
        let mut model = Self::from_squares(REFERENCE_B0_SQ, REFERENCE_B1_SQ, Provenance::Given)
            .expect("reference coefficients are positive");
        model.compose(2).expect("B0 and B1 are present");
        model
    }

    pub fn insert(&mut self, n: usize, b: f64, provenance: Provenance) -> Result<()> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::Usage(format!("B_{n} must be positive and finite, got {b}")));
        }
        self.b.insert(n, b);
        self.provenance.insert(n, provenance);
        Ok(())
    }

    pub fn get(&self, n: usize) -> Option<f64> {
        self.b.get(&n).copied()
    }

    /// Compute B_n by composition and store it. Existing fitted entries
    /// for n ≥ 2 are replaced.
    pub fn compose(&mut self, n: usize) -> Result<f64> {
        let b = compose_b(self, n)?;
        if n >= 2 {
            self.insert(n, b, Provenance::Composed)?;
        }
        Ok(b)
    }

    /// B_n if stored, otherwise composed on the fly.
    pub fn coefficient(&self, n: usize) -> Result<f64> {
        match self.get(n) {
            Some(b) => Ok(b),
            None => compose_b(self, n),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (&n, &b) in &self.b {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::Config(format!("B_{n} must be positive, got {b}")));
            }
            if !self.provenance.contains_key(&n) {
                return Err(Error::Config(format!("B_{n} has no provenance")));
            }
            if self.provenance[&n] == Provenance::Composed {
                let expected = compose_b(self, n)?;
                if (expected - b).abs() > 1e-12 * expected {
                    return Err(Error::Config(format!(
                        "composed B_{n} = {b} disagrees with B0^(1-n) B1^n = {expected}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// B_n = B₀^(1−n) B₁^n.
pub fn compose_b(model: &DisturbanceModel, n: usize) -> Result<f64> {
    let b0 = model
        .get(0)
        .ok_or_else(|| Error::Usage("composition needs B0".into()))?;
    let b1 = model
        .get(1)
        .ok_or_else(|| Error::Usage("composition needs B1".into()))?;
    let n = n as i32;
    Ok(b0.powi(1 - n) * b1.powi(n))
}

/// Slope of 1 − √p_M against a² through the origin, over entries with
/// p_M ∈ (0.5, 1] up to the point where 1 − √p_M stops growing with a.
pub fn fit_quadratic_disturbance(table: &GammaTable) -> Result<f64> {
    fit_quadratic_disturbance_below(table, f64::INFINITY)
}

/// As [`fit_quadratic_disturbance`], using only entries with a ≤ `a_max`.
pub fn fit_quadratic_disturbance_below(table: &GammaTable, a_max: f64) -> Result<f64> {
    let mut points: Vec<(f64, f64)> = Vec::new();
    for e in table.entries.iter().filter(|e| e.a <= a_max) {
        if !(e.p_m > 0.5 && e.p_m <= 1.0) {
            continue;
        }
        let d = 1.0 - e.p_m.sqrt();
        if points.last().is_some_and(|&(_, last)| d < last) {
            // Past the turnover the prefactor no longer tracks a step disturbance.
            break;
        }
        points.push((e.a * e.a, d));
    }
    if points.len() < 5 {
        return Err(Error::Fit(format!(
            "{} unsaturated entries with p_M in (0.5, 1]; at least 5 required",
            points.len()
        )));
    }
    let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = points.iter().map(|(x, y)| x * y).sum();
    Ok(sxy / sxx)
}

/// Escape probabilities 1 − p(τ) of one family at fixed L over several τ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauSweep {
    pub family: Family,
    #[serde(rename = "L")]
    pub length: f64,
    pub taus: Vec<f64>,
    pub p_escape: Vec<f64>,
}

impl TauSweep {
    pub fn new(family: Family, length: f64, taus: Vec<f64>, p_escape: Vec<f64>) -> Result<Self> {
        let sweep = TauSweep { family, length, taus, p_escape };
        sweep.validate()?;
        Ok(sweep)
    }

    pub fn validate(&self) -> Result<()> {
        if self.taus.len() != self.p_escape.len() {
            return Err(Error::Usage("taus and p_escape differ in length".into()));
        }
        if self.taus.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Usage("sweep taus must be strictly increasing".into()));
        }
        if self.p_escape.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Usage("p_escape values must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn protocol(&self, tau: f64) -> Result<Protocol> {
        Protocol::from_family(self.family, self.length, tau)
    }
}

/// Propagate the family at each τ and record 1 − p(τ).
pub fn run_tau_sweep(sim: &Simulator, family: Family, length: f64, taus: &[f64], workers: usize) -> Result<TauSweep> {
    let p_escape = run_ordered(taus, workers, |&tau| {
        let protocol = Protocol::from_family(family, length, tau)?;
        let series = sim.propagate(&protocol)?;
        Ok(series.escape_probability().clamp(0.0, 1.0))
    })?;
    TauSweep::new(family, length, taus.to_vec(), p_escape)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit {
    /// Prefactor of p_escape ≈ j τ^(−2n−4) at the fixed exponent.
    pub j: f64,
    /// Free log-log slope.
    pub slope: f64,
    /// Prefactor of the free log-log fit.
    pub free_prefactor: f64,
    pub n: usize,
}

/// Log-log fit of p_escape(τ). When a Γ table is given, every point must
/// satisfy ∫Γ dt < 10⁻³.
pub fn fit_asymptotic_escape(sweep: &TauSweep, n: usize, regime: Option<&GammaTable>) -> Result<AsymptoticFit> {
    sweep.validate()?;
    if sweep.taus.len() < 2 {
        return Err(Error::Fit("an asymptotic fit needs at least two sweep points".into()));
    }
    if let Some(&p) = sweep.p_escape.iter().find(|&&p| !(p > 0.0)) {
        return Err(Error::Fit(format!("p_escape = {p} cannot enter a log-log fit")));
    }
    if let Some(table) = regime {
        for &tau in &sweep.taus {
            let protocol = sweep.protocol(tau)?;
            let integral = match table.integral(&protocol) {
                Ok(v) => v,
                Err(Error::Range(msg)) => {
                    return Err(Error::Fit(format!(
                        "tau = {tau} reaches accelerations outside the gamma table ({msg}); use larger tau"
                    )))
                }
                Err(e) => return Err(e),
            };
            if integral >= REGIME_GAMMA_INTEGRAL {
                return Err(Error::Fit(format!(
                    "tau = {tau} is tunneling dominated (integral of gamma = {integral:.3e}); use larger tau"
                )));
            }
        }
    }
    let xs: Vec<f64> = sweep.taus.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = sweep.p_escape.iter().map(|p| p.ln()).collect();
    let m = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / m;
    let y_mean = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - x_mean) * (y - y_mean)).sum();
    let slope = sxy / sxx;
    let exponent = (2 * n + 4) as f64;
    let j = (y_mean + exponent * x_mean).exp();
    Ok(AsymptoticFit {
        j,
        slope,
        free_prefactor: (y_mean - slope * x_mean).exp(),
        n,
    })
}

/// B_n from a j-coefficient: B_n² = j / (2 g² L²).
pub fn b_from_j(j: f64, length: f64, family: Family, n: usize) -> Result<f64> {
    let (order, g) = derivative_prefactor(family)
        .ok_or_else(|| Error::Usage(format!("no endpoint-derivative prefactor for the {family} family")))?;
    if order != n {
        return Err(Error::Usage(format!(
            "the {family} family is discontinuous at order {order}, not {n}"
        )));
    }
    if !(j > 0.0 && length > 0.0) {
        return Err(Error::Usage("j and L must be positive".into()));
    }
    Ok((j / (2.0 * g * g * length * length)).sqrt())
}

/// Fit a sweep and store the resulting B_n in the model.
pub fn absorb_sweep(model: &mut DisturbanceModel, sweep: &TauSweep, regime: Option<&GammaTable>) -> Result<AsymptoticFit> {
    let (n, _) = derivative_prefactor(sweep.family)
        .ok_or_else(|| Error::Usage(format!("cannot fit B from a {} sweep", sweep.family)))?;
    let fit = fit_asymptotic_escape(sweep, n, regime)?;
    let b = b_from_j(fit.j, sweep.length, sweep.family, n)?;
    model.insert(n, b, Provenance::Fitted)?;
    model.source_sweeps.push(SweepSource {
        family: sweep.family,
        length: sweep.length,
        n,
        tau_range: (sweep.taus[0], *sweep.taus.last().unwrap()),
        j: fit.j,
        slope: fit.slope,
    });
    Ok(fit)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disturbance {
    pub d: f64,
    /// Leading discontinuous order, absent for a smooth endpoint.
    pub order: Option<usize>,
    /// |a⁽ⁿ⁾| at the endpoint.
    pub derivative: f64,
    pub smooth: bool,
}

/// d = (B_n a⁽ⁿ⁾(endpoint))² clamped to [0, 1].
pub fn disturbance_factor(protocol: &Protocol, endpoint: Endpoint, model: &DisturbanceModel) -> Result<Disturbance> {
    match protocol.leading_discontinuity(endpoint, DEFAULT_N_MAX) {
        Ok((n, value)) => {
            let b = model.coefficient(n)?;
            Ok(Disturbance {
                d: (b * value).powi(2).clamp(0.0, 1.0),
                order: Some(n),
                derivative: value.abs(),
                smooth: false,
            })
        }
        Err(Error::NoDiscontinuity { .. }) => Ok(Disturbance {
            d: 0.0,
            order: None,
            derivative: 0.0,
            smooth: true,
        }),
        Err(e) => Err(e),
    }
}
