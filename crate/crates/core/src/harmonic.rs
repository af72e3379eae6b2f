//! Exactly solvable moving harmonic trap mω²(x − X(t))²/2 + E(t)x, used as
//! an analytic oracle for the propagator and for the disturbance theory.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::disturbance::{compose_b, DisturbanceModel, Provenance};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridSpec};
use crate::params::PhysicalParams;
use crate::potential::harmonic_potential;
use crate::propagator::{Absorber, AbsorberSpec, Propagator};
use crate::wavefunction::{inner_product, Wavefunction};

pub const DEFAULT_J_MAX: usize = 64;
/// Largest norm the eigenfunction expansion may miss.
pub const TAIL_WEIGHT_LIMIT: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicSystem {
    pub mass: f64,
    pub omega: f64,
    pub hbar: f64,
}

impl Default for HarmonicSystem {
    fn default() -> Self {
        HarmonicSystem { mass: 1.0, omega: 1.0, hbar: 1.0 }
    }
}

impl HarmonicSystem {
    pub fn validate(&self) -> Result<()> {
        if [self.mass, self.omega, self.hbar].iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("harmonic system parameters must be positive: {self:?}")));
        }
        Ok(())
    }

    /// ε_j = ħω(j + ½).
    pub fn level(&self, j: usize) -> f64 {
        self.hbar * self.omega * (j as f64 + 0.5)
    }

    /// √(mω/ħ), the inverse oscillator length.
    fn inverse_length(&self) -> f64 {
        (self.mass * self.omega / self.hbar).sqrt()
    }

    fn physical_params(&self) -> PhysicalParams {
        PhysicalParams { mass: self.mass, hbar: self.hbar, ..PhysicalParams::default() }
    }
}

/// Trap position X(t) or field E(t).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Drive {
    /// Σ c_k t^k.
    Polynomial(Vec<f64>),
    /// A cos(Ωt).
    Sinusoidal { amplitude: f64, frequency: f64 },
}

/// Effective center x₀(t).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicMotion {
    pub center: Drive,
}

impl Drive {
    fn is_zero(&self) -> bool {
        match self {
            Drive::Polynomial(c) => c.iter().all(|&v| v == 0.0),
            Drive::Sinusoidal { amplitude, .. } => *amplitude == 0.0,
        }
    }

    fn scaled(&self, s: f64) -> Drive {
        match self {
            Drive::Polynomial(c) => Drive::Polynomial(c.iter().map(|v| v * s).collect()),
            Drive::Sinusoidal { amplitude, frequency } => {
                Drive::Sinusoidal { amplitude: amplitude * s, frequency: *frequency }
            }
        }
    }
}

/// x₀(t) = X(t) − E(t)/(mω²).
pub fn effective_center(position: &Drive, field: &Drive, sys: &HarmonicSystem) -> Result<HarmonicMotion> {
    sys.validate()?;
    let shifted = field.scaled(-1.0 / (sys.mass * sys.omega * sys.omega));
    if shifted.is_zero() {
        return Ok(HarmonicMotion { center: position.clone() });
    }
    if position.is_zero() {
        return Ok(HarmonicMotion { center: shifted });
    }
    let center = match (position, &shifted) {
        (Drive::Polynomial(p), Drive::Polynomial(q)) => {
            let mut c = vec![0.0; p.len().max(q.len())];
            for (i, v) in p.iter().enumerate() {
                c[i] += v;
            }
            for (i, v) in q.iter().enumerate() {
                c[i] += v;
            }
            Drive::Polynomial(c)
        }
        (
            Drive::Sinusoidal { amplitude: a1, frequency: f1 },
            Drive::Sinusoidal { amplitude: a2, frequency: f2 },
        ) if f1 == f2 => Drive::Sinusoidal { amplitude: a1 + a2, frequency: *f1 },
        _ => {
            return Err(Error::Usage(
                "position and field must both be polynomials or sinusoids of one frequency".into(),
            ))
        }
    };
    Ok(HarmonicMotion { center })
}

fn derivative(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(k, v)| k as f64 * v).collect()
}

fn horner(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &v| acc * t + v)
}

impl HarmonicMotion {
    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        HarmonicMotion { center: Drive::Polynomial(coeffs) }
    }

    pub fn sinusoidal(amplitude: f64, frequency: f64) -> Self {
        HarmonicMotion { center: Drive::Sinusoidal { amplitude, frequency } }
    }

    pub fn center_at(&self, t: f64) -> f64 {
        match &self.center {
            Drive::Polynomial(c) => horner(c, t),
            Drive::Sinusoidal { amplitude, frequency } => amplitude * (frequency * t).cos(),
        }
    }

    /// Number of nonzero terms in the ξ series; ⌊D/2⌋ + 1 for degree D.
    pub fn series_terms(&self) -> Option<usize> {
        match &self.center {
            Drive::Polynomial(c) => {
                let degree = c.iter().rposition(|&v| v != 0.0).unwrap_or(0);
                Some(degree / 2 + 1)
            }
            Drive::Sinusoidal { .. } => None,
        }
    }
}

/// ξ(t) = Σₙ (−1/ω²)ⁿ x₀⁽²ⁿ⁾(t) and ξ̇(t).
pub fn xi(motion: &HarmonicMotion, sys: &HarmonicSystem, t: f64) -> Result<(f64, f64)> {
    let w2 = sys.omega * sys.omega;
    match &motion.center {
        Drive::Polynomial(c) => {
            let mut term = c.clone();
            let (mut x, mut v) = (0.0, 0.0);
            let mut factor = 1.0;
            while !term.is_empty() {
                let d1 = derivative(&term);
                x += factor * horner(&term, t);
                v += factor * horner(&d1, t);
                term = derivative(&d1);
                factor *= -1.0 / w2;
            }
            Ok((x, v))
        }
        Drive::Sinusoidal { amplitude, frequency } => {
            let ratio = frequency / sys.omega;
            if (1.0 - ratio.abs()).abs() < 1e-12 {
                return Err(Error::Resonance { drive: *frequency, trap: sys.omega });
            }
            let gain = amplitude / (1.0 - ratio * ratio);
            Ok((gain * (frequency * t).cos(), -gain * frequency * (frequency * t).sin()))
        }
    }
}

/// Normalized oscillator eigenfunctions χ₀…χ_{j_max} at x.
pub fn hermite_functions(x: f64, sys: &HarmonicSystem, j_max: usize) -> Vec<f64> {
    let k = sys.inverse_length();
    let u = k * x;
    let mut out = Vec::with_capacity(j_max + 1);
    let h0 = k.sqrt() * PI.powf(-0.25) * (-0.5 * u * u).exp();
    out.push(h0);
    if j_max == 0 {
        return out;
    }
    out.push(2f64.sqrt() * u * h0);
    for n in 1..j_max {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * u * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
        out.push(next);
    }
    out
}

/// Trap ground state centered at `center` on the grid.
pub fn ground_wavefunction(grid: &Grid, sys: &HarmonicSystem, center: f64) -> Wavefunction {
    Wavefunction::from_fn(grid, |x| Complex64::new(hermite_functions(x - center, sys, 0)[0], 0.0))
}

/// c_j = ⟨e^{imξ̇₀x/ħ} χ_j(x − ξ₀) | ψ₀⟩ for j ≤ j_max.
pub fn project(psi0: &Wavefunction, grid: &Grid, sys: &HarmonicSystem, xi0: f64, xi_dot0: f64, j_max: usize) -> Result<Vec<Complex64>> {
    sys.validate()?;
    if psi0.grid_spec() != grid.spec() {
        return Err(Error::Usage("wavefunction and grid differ".into()));
    }
    let k_boost = sys.mass * xi_dot0 / sys.hbar;
    let mut c = vec![Complex64::new(0.0, 0.0); j_max + 1];
    for (&x, &psi) in grid.x().iter().zip(psi0.amplitudes()) {
        let weighted = psi * Complex64::cis(-k_boost * x);
        for (cj, h) in c.iter_mut().zip(hermite_functions(x - xi0, sys, j_max)) {
            *cj += weighted * h;
        }
    }
    let dx = grid.dx();
    c.iter_mut().for_each(|v| *v *= dx);
    let captured: f64 = c.iter().map(|v| v.norm_sqr()).sum();
    let tail = psi0.norm_sqr() - captured;
    if tail > TAIL_WEIGHT_LIMIT {
        return Err(Error::Accuracy(format!(
            "eigenfunction expansion to j = {j_max} misses weight {tail:.3e}"
        )));
    }
    Ok(c)
}

/// ψ(x,t) = e^{imξ̇x/ħ} Σ c_j e^{−iε_j t/ħ} χ_j(x − ξ), global phase dropped.
pub fn exact_evolve(coeffs: &[Complex64], motion: &HarmonicMotion, t: f64, sys: &HarmonicSystem, grid: &Grid) -> Result<Wavefunction> {
    sys.validate()?;
    if coeffs.is_empty() {
        return Err(Error::Usage("empty coefficient list".into()));
    }
    let (x_c, v_c) = xi(motion, sys, t)?;
    let j_max = coeffs.len() - 1;
    let phased: Vec<Complex64> = coeffs
        .iter()
        .enumerate()
        .map(|(j, c)| c * Complex64::cis(-sys.level(j) * t / sys.hbar))
        .collect();
    let k_boost = sys.mass * v_c / sys.hbar;
    let psi = Wavefunction::from_fn(grid, |x| {
        let sum: Complex64 = hermite_functions(x - x_c, sys, j_max)
            .iter()
            .zip(&phased)
            .map(|(h, c)| c * h)
            .sum();
        sum * Complex64::cis(k_boost * x)
    });
    let expected: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    let missing = (psi.norm_sqr() - expected).abs();
    if missing > TAIL_WEIGHT_LIMIT {
        return Err(Error::Accuracy(format!(
            "grid norm differs from the expansion norm by {missing:.3e} at t = {t}"
        )));
    }
    Ok(psi)
}

/// Ground-state survival amplitude after a sudden switch that displaces the
/// co-moving frame by (ξ, ξ̇).
pub fn survival_amplitude_ground(xi: f64, xi_dot: f64, sys: &HarmonicSystem) -> f64 {
    let w = sys.omega;
    (-(sys.mass * w / (4.0 * sys.hbar)) * (xi * xi + xi_dot * xi_dot / (w * w))).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionProbability {
    pub exact: f64,
    pub leading_order: f64,
}

/// Probability of leaving the ground state when the trap starts moving as
/// x⁽ⁿ⁾ tⁿ/n! from rest.
pub fn switch_transition_prob(n: usize, x_n: f64, sys: &HarmonicSystem) -> TransitionProbability {
    let s = sys.mass * sys.omega / (2.0 * sys.hbar) * x_n * x_n / sys.omega.powi(2 * n as i32);
    TransitionProbability { exact: -(-s).exp_m1(), leading_order: s }
}

/// Lowest-order transition probability |ħⁿ V₀ α⁽ⁿ⁾ / Δⁿ⁺¹|² for
/// ĥ + α(t)V̂ with a discontinuous n-th derivative of α.
pub fn perturbative_transition(v0_jk: f64, gap: f64, n: usize, alpha_n: f64, hbar: f64) -> Result<f64> {
    if gap == 0.0 {
        return Err(Error::Degeneracy);
    }
    let n = n as i32;
    Ok((hbar.powi(n) * v0_jk * alpha_n / gap.powi(n + 1)).powi(2))
}

/// ⟨1|mω²x̂|0⟩ = mω²√(ħ/2mω).
pub fn harmonic_coupling(sys: &HarmonicSystem) -> f64 {
    sys.mass * sys.omega * sys.omega * (sys.hbar / (2.0 * sys.mass * sys.omega)).sqrt()
}

/// Split-operator propagation of the trap with a uniform field m·a(t)·x.
pub struct TrapPropagator {
    grid: Grid,
    prop: Propagator,
    dt: f64,
}

impl TrapPropagator {
    pub fn new(grid: &Grid, sys: &HarmonicSystem, dt: f64) -> Result<Self> {
        sys.validate()?;
        let potential = harmonic_potential(grid, sys.mass, sys.omega, 0.0);
        let absorber = Absorber::new(AbsorberSpec::off(), grid)?;
        let prop = Propagator::new(grid, &potential, &absorber, &sys.physical_params(), dt)?;
        Ok(TrapPropagator { grid: grid.clone(), prop, dt })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Advance from t0 by `steps` steps under a(t).
    pub fn run(&mut self, psi: &mut Wavefunction, t0: f64, steps: usize, accel: &impl Fn(f64) -> f64) {
        for s in 0..steps {
            self.prop.step(psi, accel(t0 + (s as f64 + 0.5) * self.dt));
        }
    }
}

/// Phase-insensitive distance √(2(1 − |⟨a|b⟩|)) between unit states.
pub fn phase_free_distance(a: &Wavefunction, b: &Wavefunction) -> Result<f64> {
    Ok((2.0 * (1.0 - inner_product(a, b)?.norm()).max(0.0)).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    /// Worst observed value of the suite's metric.
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicReport {
    pub passed: bool,
    pub suites: Vec<SuiteResult>,
}

fn suite(name: &str, worst: f64, tolerance: f64, detail: String) -> SuiteResult {
    SuiteResult { name: name.into(), passed: worst <= tolerance, worst, tolerance, detail }
}

pub fn check_grid() -> Result<Grid> {
    Grid::new(GridSpec { x_min: -25.6, x_max: 25.6, n_points: 512 })
}

/// Worst infidelity 1 − |⟨exact|numeric⟩|² over t ∈ [0, 100] for a constant
/// field and a sinusoidally driven trap, both starting in the trap ground state.
pub fn check_evolution(dt: f64) -> Result<SuiteResult> {
    let sys = HarmonicSystem::default();
    let grid = check_grid()?;
    let w2 = sys.omega * sys.omega;
    let cases: Vec<(&str, HarmonicMotion, Box<dyn Fn(f64) -> f64>)> = vec![
        ("constant a=0.5", HarmonicMotion::polynomial(vec![-0.5 / w2]), Box::new(|_| 0.5)),
        (
            "sinusoidal A=0.5 Omega=0.3",
            HarmonicMotion::sinusoidal(0.5, 0.3),
            Box::new(move |t: f64| -w2 * 0.5 * (0.3 * t).cos()),
        ),
    ];
    let mut worst: f64 = 0.0;
    let mut detail = Vec::new();
    let steps_per_sample = (10.0 / dt).round() as usize;
    for (label, motion, accel) in cases {
        let psi0 = ground_wavefunction(&grid, &sys, 0.0);
        let (x0, v0) = xi(&motion, &sys, 0.0)?;
        let coeffs = project(&psi0, &grid, &sys, x0, v0, DEFAULT_J_MAX)?;
        let mut prop = TrapPropagator::new(&grid, &sys, dt)?;
        let mut psi = psi0.clone();
        let mut case_worst: f64 = 0.0;
        for k in 1..=10 {
            let t0 = (k - 1) as f64 * steps_per_sample as f64 * dt;
            prop.run(&mut psi, t0, steps_per_sample, &accel);
            let t = k as f64 * steps_per_sample as f64 * dt;
            let exact = exact_evolve(&coeffs, &motion, t, &sys, &grid)?;
            let infidelity = 1.0 - inner_product(&exact, &psi)?.norm_sqr();
            case_worst = case_worst.max(infidelity);
        }
        detail.push(format!("{label}: {case_worst:.3e}"));
        worst = worst.max(case_worst);
    }
    Ok(suite("exact_vs_split_operator", worst, 1e-6, detail.join("; ")))
}

/// |⟨χ₀|e^{imξ̇x/ħ}χ₀(x − ξ)⟩| on the grid against the closed form.
pub fn check_sudden_switch() -> Result<SuiteResult> {
    let sys = HarmonicSystem::default();
    let grid = check_grid()?;
    let before = ground_wavefunction(&grid, &sys, 0.0);
    let one = [Complex64::new(1.0, 0.0)];
    let mut worst: f64 = 0.0;
    for (x, v) in [(1.0, 0.0), (0.0, 1.0), (0.3, -0.7), (2.0, 0.5), (-1.5, 1.2)] {
        let after = exact_evolve(&one, &HarmonicMotion::polynomial(vec![x, v]), 0.0, &sys, &grid)?;
        let overlap = inner_product(&before, &after)?.norm();
        worst = worst.max((overlap - survival_amplitude_ground(x, v, &sys)).abs());
    }
    Ok(suite("sudden_switch_overlap", worst, 1e-8, "five (xi, xi_dot) displacements".into()))
}

/// Leading-order switch probability against the perturbative formula with
/// V₀ = ⟨1|mω²x̂|0⟩ and Δ = ħω.
pub fn check_switch_vs_perturbative() -> Result<SuiteResult> {
    let mut worst: f64 = 0.0;
    for (m, w, h) in [(1.0, 1.0, 1.0), (2.5, 0.7, 1.3), (0.4, 3.0, 0.2)] {
        let sys = HarmonicSystem { mass: m, omega: w, hbar: h };
        for n in 0..=5 {
            for x_n in [1e-3, 0.1, 2.0] {
                let morita = switch_transition_prob(n, x_n, &sys).leading_order;
                let pert = perturbative_transition(harmonic_coupling(&sys), h * w, n, x_n, h)?;
                worst = worst.max(((morita - pert) / morita).abs());
            }
        }
    }
    Ok(suite("switch_vs_perturbative", worst, 1e-12, "3 systems, n = 0..5".into()))
}

/// B₀^(1−n) B₁ⁿ with B₀ = |V/Δ|, B₁ = |ħV/Δ²| against |ħⁿV/Δⁿ⁺¹|.
pub fn check_composition() -> Result<SuiteResult> {
    let mut worst: f64 = 0.0;
    for (v, gap, h) in [(0.8f64, 1.3f64, 1.0f64), (2.0e-3, 0.05, 0.7), (15.0, 4.0, 2.2), (-0.6, 0.9, 1.1)] {
        let mut model = DisturbanceModel::default();
        model.insert(0, (v / gap).abs(), Provenance::Given)?;
        model.insert(1, (h * v / (gap * gap)).abs(), Provenance::Given)?;
        for n in 0..=5 {
            let composed = compose_b(&model, n)?;
            let direct = (h.powi(n as i32) * v / gap.powi(n as i32 + 1)).abs();
            worst = worst.max(((composed - direct) / direct).abs());
        }
    }
    Ok(suite("b_composition_identity", worst, 1e-12, "4 (V, gap, hbar) triples, n = 0..5".into()))
}

/// Escape probability from a grid run where x₀(t) = x⁽ⁿ⁾tⁿ/n! starts from
/// rest, measured against the co-moving ground state, compared to
/// 1 − exp(−(mω/2ħ)(x⁽ⁿ⁾)²/ω²ⁿ).
pub fn morita_escape(n: usize, x_n: f64, duration: f64, dt: f64) -> Result<(f64, f64)> {
    let sys = HarmonicSystem::default();
    let grid = check_grid()?;
    let factorial: f64 = (1..=n).map(|k| k as f64).product();
    let mut coeffs = vec![0.0; n + 1];
    coeffs[n] = x_n / factorial;
    let motion = HarmonicMotion::polynomial(coeffs.clone());
    let w2 = sys.omega * sys.omega;
    let accel = |t: f64| -w2 * horner(&coeffs, t);
    let mut psi = ground_wavefunction(&grid, &sys, 0.0);
    let steps = (duration / dt).round() as usize;
    let mut prop = TrapPropagator::new(&grid, &sys, duration / steps as f64)?;
    prop.run(&mut psi, 0.0, steps, &accel);
    let adiabatic = exact_evolve(&[Complex64::new(1.0, 0.0)], &motion, duration, &sys, &grid)?;
    let escape = 1.0 - inner_product(&adiabatic, &psi)?.norm_sqr();
    Ok((escape, switch_transition_prob(n, x_n, &sys).exact))
}

pub fn check_morita_grid() -> Result<SuiteResult> {
    let mut worst: f64 = 0.0;
    let mut detail = Vec::new();
    for (n, x_n) in [(0, 0.5), (1, 0.5), (2, 0.3)] {
        let (grid_value, formula) = morita_escape(n, x_n, 5.0, 0.001)?;
        let dev = (grid_value - formula).abs();
        detail.push(format!("n={n}: grid {grid_value:.9} formula {formula:.9}"));
        worst = worst.max(dev);
    }
    Ok(suite("morita_grid", worst, 1e-6, detail.join("; ")))
}

/// Local error of one split step started from the exact state, at dt and
/// dt/2; returns (error(dt), error(dt/2)).
pub fn single_step_errors(dt: f64) -> Result<(f64, f64)> {
    let sys = HarmonicSystem::default();
    let grid = check_grid()?;
    // x₀(t) = 0.2 t², a(t) = −0.2 ω² t².
    let motion = HarmonicMotion::polynomial(vec![0.0, 0.0, 0.2]);
    let accel = |t: f64| -0.2 * sys.omega * sys.omega * t * t;
    let psi0 = ground_wavefunction(&grid, &sys, 0.0);
    let (x0, v0) = xi(&motion, &sys, 0.0)?;
    let coeffs = project(&psi0, &grid, &sys, x0, v0, DEFAULT_J_MAX)?;
    let t = 1.7;
    let mut errors = [0.0; 2];
    for (e, h) in errors.iter_mut().zip([dt, dt / 2.0]) {
        let mut psi = exact_evolve(&coeffs, &motion, t, &sys, &grid)?;
        TrapPropagator::new(&grid, &sys, h)?.run(&mut psi, t, 1, &accel);
        let target = exact_evolve(&coeffs, &motion, t + h, &sys, &grid)?;
        *e = phase_free_distance(&target, &psi)?;
    }
    Ok((errors[0], errors[1]))
}

pub fn check_step_order() -> Result<SuiteResult> {
    let (e1, e2) = single_step_errors(0.1)?;
    let ratio = e1 / e2;
    let mut s = suite("single_step_order", (ratio - 8.0).abs(), 1.5, format!("errors {e1:.3e}, {e2:.3e}, ratio {ratio:.3}"));
    s.passed = s.passed && e1 < 1e-2;
    Ok(s)
}

pub fn run_checks() -> Result<HarmonicReport> {
    let suites = vec![
        check_evolution(0.01)?,
        check_sudden_switch()?,
        check_switch_vs_perturbative()?,
        check_composition()?,
        check_morita_grid()?,
        check_step_order()?,
    ];
    Ok(HarmonicReport { passed: suites.iter().all(|s| s.passed), suites })
}
