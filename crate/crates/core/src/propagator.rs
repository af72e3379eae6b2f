//! Strang-split evolution of the moving-frame Schrödinger equation
//! H = p²/2m + V_well(x) + m a(t) x with an absorbing edge mask.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ground::ground_state_of;
use crate::grid::{Grid, GridSpec};
use crate::params::PhysicalParams;
use crate::potential::well_potential;
use crate::protocols::Protocol;
use crate::split::Fourier;
use crate::wavefunction::{inner_product, Wavefunction};

/// Edge amplitude above which escaped flux is considered unabsorbed.
pub const EDGE_AMPLITUDE_LIMIT: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsorberSpec {
    /// Fraction of the half-width covered by the absorber on each edge.
    pub width_fraction: f64,
    pub strength: f64,
    pub order: i32,
}

impl Default for AbsorberSpec {
    fn default() -> Self {
        AbsorberSpec {
            width_fraction: 0.15,
            strength: 20.0,
            order: 3,
        }
    }
}

impl AbsorberSpec {
    pub fn off() -> Self {
        AbsorberSpec {
            width_fraction: 0.0,
            strength: 0.0,
            order: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.width_fraction) || !(self.strength >= 0.0) || self.order < 1 {
            return Err(Error::Config(format!("invalid absorber {self:?}")));
        }
        Ok(())
    }
}

/// Absorption rate W(x) ≥ 0: zero in the interior, rising as a power of the
/// depth into each edge layer.
#[derive(Clone, Debug)]
pub struct Absorber {
    spec: AbsorberSpec,
    samples: Vec<f64>,
}

impl Absorber {
    pub fn new(spec: AbsorberSpec, grid: &Grid) -> Result<Self> {
        spec.validate()?;
        let g = grid.spec();
        let center = 0.5 * (g.x_min + g.x_max);
        let half = 0.5 * (g.x_max - g.x_min);
        let layer = spec.width_fraction * half;
        let inner = half - layer;
        let samples = grid
            .x()
            .iter()
            .map(|&x| {
                let depth = (x - center).abs() - inner;
                if layer > 0.0 && depth > 0.0 {
                    spec.strength * (depth / layer).powi(spec.order)
                } else {
                    0.0
                }
            })
            .collect();
        Ok(Absorber { spec, samples })
    }

    pub fn spec(&self) -> AbsorberSpec {
        self.spec
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }
}

/// Reusable single-run stepping state: precomputed phases, FFT plans and buffers.
pub struct Propagator {
    x: Vec<f64>,
    static_half: Vec<Complex64>,
    kinetic: Vec<Complex64>,
    mask: Vec<f64>,
    linear: f64,
    half: Vec<Complex64>,
    half_masked: Vec<Complex64>,
    last_a: Option<f64>,
    fourier: Fourier,
    dt: f64,
}

impl Propagator {
    pub fn new(
        grid: &Grid,
        potential: &[f64],
        absorber: &Absorber,
        params: &PhysicalParams,
        dt: f64,
    ) -> Result<Self> {
        params.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {dt}")));
        }
        if potential.len() != grid.len() || absorber.samples.len() != grid.len() {
            return Err(Error::Usage("potential/absorber size does not match the grid".into()));
        }
        let n = grid.len();
        let hbar = params.hbar;
        let inv_n = 1.0 / n as f64;
        let kinetic = grid
            .k()
            .iter()
            .map(|&k| Complex64::from_polar(inv_n, -hbar * k * k * dt / (2.0 * params.mass)))
            .collect();
        let static_half = potential
            .iter()
            .map(|&v| Complex64::from_polar(1.0, -v * dt / (2.0 * hbar)))
            .collect();
        let mask = absorber.samples.iter().map(|&w| (-w * dt).exp()).collect();
        Ok(Propagator {
            x: grid.x().to_vec(),
            static_half,
            kinetic,
            mask,
            linear: -params.mass * dt / (2.0 * hbar),
            half: vec![Complex64::new(0.0, 0.0); n],
            half_masked: vec![Complex64::new(0.0, 0.0); n],
            last_a: None,
            fourier: Fourier::new(n),
            dt,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// One Strang step with the inertial term m·a_mid·x held at its midpoint value.
    pub fn step(&mut self, psi: &mut Wavefunction, a_mid: f64) {
        if self.last_a != Some(a_mid) {
            let phase = self.linear * a_mid;
            for (((h, hm), (&s, &x)), &m) in self
                .half
                .iter_mut()
                .zip(self.half_masked.iter_mut())
                .zip(self.static_half.iter().zip(&self.x))
                .zip(&self.mask)
            {
                *h = s * Complex64::cis(phase * x);
                *hm = *h * m;
            }
            self.last_a = Some(a_mid);
        }
        let amps = psi.amplitudes_mut();
        amps.iter_mut().zip(&self.half).for_each(|(c, h)| *c *= h);
        self.fourier.apply_in_momentum(amps, &self.kinetic);
        amps.iter_mut().zip(&self.half_masked).for_each(|(c, h)| *c *= h);
    }
}

/// One split-operator step built from scratch. Convenient for checks; runs
/// should hold a [`Propagator`] instead.
pub fn step(
    psi: &mut Wavefunction,
    grid: &Grid,
    static_potential: &[f64],
    a_mid: f64,
    dt: f64,
    absorber: &Absorber,
    params: &PhysicalParams,
) -> Result<()> {
    let mut prop = Propagator::new(grid, static_potential, absorber, params, dt)?;
    prop.step(psi, a_mid);
    Ok(())
}

/// Everything a propagation run depends on besides the protocol.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    pub params: PhysicalParams,
    pub grid: GridSpec,
    pub dt: f64,
    pub absorber: AbsorberSpec,
    pub sample_stride: usize,
    pub ground_tol: f64,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            params: PhysicalParams::default(),
            grid: GridSpec::default(),
            dt: 0.01,
            absorber: AbsorberSpec::default(),
            sample_stride: 100,
            ground_tol: 1e-12,
        }
    }
}

impl RunSettings {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.grid.validate()?;
        self.absorber.validate()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.sample_stride == 0 {
            return Err(Error::Config("sample_stride must be at least 1".into()));
        }
        if !(self.ground_tol > 0.0) {
            return Err(Error::Config("ground_tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub dt: f64,
    pub steps: usize,
    pub grid: GridSpec,
    pub absorber: AbsorberSpec,
    pub ground_energy: f64,
    /// Set when the amplitude at the outermost grid cells exceeded
    /// [`EDGE_AMPLITUDE_LIMIT`] at some sample.
    pub edge_warning: bool,
}

/// Sampled survival probability p(t) = |⟨Φ(0)|Φ(t)⟩|² and remaining norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalSeries {
    pub times: Vec<f64>,
    pub p: Vec<f64>,
    pub norm: Vec<f64>,
    pub protocol: Protocol,
    pub meta: RunMeta,
}

impl SurvivalSeries {
    pub fn final_survival(&self) -> f64 {
        *self.p.last().expect("series always holds t = 0")
    }

    pub fn escape_probability(&self) -> f64 {
        1.0 - self.final_survival()
    }

    /// CSV with columns `t,p,norm`, 12 significant digits, LF line endings.
    /// `preamble` lines are written first as `# ` comments.
    pub fn write_csv<W: Write>(&self, mut out: W, preamble: &[String]) -> Result<()> {
        for line in preamble {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "t,p,norm")?;
        for ((t, p), n) in self.times.iter().zip(&self.p).zip(&self.norm) {
            writeln!(out, "{},{},{}", sig12(*t), sig12(*p), sig12(*n))?;
        }
        Ok(())
    }
}

/// Twelve significant digits in scientific notation.
pub fn sig12(v: f64) -> String {
    format!("{v:.11e}")
}

/// Grid, static potential, absorber and initial trapped state, prepared once
/// and shared read-only by any number of runs.
pub struct Simulator {
    settings: RunSettings,
    grid: Grid,
    potential: Vec<f64>,
    absorber: Absorber,
    initial: Wavefunction,
    ground_energy: f64,
}

impl Simulator {
    pub fn new(settings: RunSettings) -> Result<Self> {
        settings.validate()?;
        let grid = Grid::new(settings.grid)?;
        let potential = well_potential(&grid, &settings.params, 0.0);
        Self::with_potential(settings, grid, potential)
    }

    /// Use an arbitrary static potential in place of the tanh² well.
    pub fn with_potential(settings: RunSettings, grid: Grid, potential: Vec<f64>) -> Result<Self> {
        settings.validate()?;
        let absorber = Absorber::new(settings.absorber, &grid)?;
        let (initial, ground_energy) =
            ground_state_of(&grid, &settings.params, &potential, 0.0, settings.ground_tol)?;
        Ok(Simulator {
            settings,
            grid,
            potential,
            absorber,
            initial,
            ground_energy,
        })
    }

    pub fn settings(&self) -> &RunSettings {
        &self.settings
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn initial_state(&self) -> &Wavefunction {
        &self.initial
    }

    pub fn ground_energy(&self) -> f64 {
        self.ground_energy
    }

    pub fn propagator(&self) -> Result<Propagator> {
        Propagator::new(
            &self.grid,
            &self.potential,
            &self.absorber,
            &self.settings.params,
            self.settings.dt,
        )
    }

    /// Number of steps and the exact step length that lands on τ.
    pub fn step_plan(&self, tau: f64) -> Result<(usize, f64)> {
        let dt = self.settings.dt;
        let steps = (tau / dt).round();
        if steps < 1.0 || (steps * dt - tau).abs() > 1e-6 * dt {
            return Err(Error::Config(format!("dt = {dt} does not divide tau = {tau}")));
        }
        Ok((steps as usize, tau / steps))
    }

    pub fn propagate(&self, protocol: &Protocol) -> Result<SurvivalSeries> {
        protocol.validate()?;
        let tau = protocol.tau();
        let (steps, dt) = self.step_plan(tau)?;
        let mut prop = Propagator::new(
            &self.grid,
            &self.potential,
            &self.absorber,
            &self.settings.params,
            dt,
        )?;
        let stride = self.settings.sample_stride;
        let mut psi = self.initial.clone();
        let capacity = steps / stride + 2;
        let mut times = Vec::with_capacity(capacity);
        let mut p = Vec::with_capacity(capacity);
        let mut norm = Vec::with_capacity(capacity);
        let mut edge_warning = false;

        let mut record = |psi: &Wavefunction, t: f64| -> Result<()> {
            let overlap = inner_product(&self.initial, psi)?;
            times.push(t);
            p.push(overlap.norm_sqr());
            norm.push(psi.norm_sqr());
            let a = psi.amplitudes();
            if a[0].norm().max(a[a.len() - 1].norm()) > EDGE_AMPLITUDE_LIMIT {
                edge_warning = true;
            }
            Ok(())
        };

        record(&psi, 0.0)?;
        for s in 0..steps {
            let t_mid = (s as f64 + 0.5) * dt;
            prop.step(&mut psi, protocol.acceleration_unchecked(t_mid));
            let done = s + 1;
            if done % stride == 0 || done == steps {
                let t = if done == steps { tau } else { done as f64 * dt };
                record(&psi, t)?;
            }
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("survival probability became non-finite".into()));
        }
        Ok(SurvivalSeries {
            times,
            p,
            norm,
            protocol: protocol.clone(),
            meta: RunMeta {
                dt,
                steps,
                grid: self.settings.grid,
                absorber: self.settings.absorber,
                ground_energy: self.ground_energy,
                edge_warning,
            },
        })
    }

    pub fn propagate_constant(&self, a: f64, duration: f64) -> Result<SurvivalSeries> {
        if !(a >= 0.0) {
            return Err(Error::Usage(format!("constant acceleration must be non-negative, got {a}")));
        }
        self.propagate(&Protocol::constant(a, duration))
    }
}

/// Run a protocol with freshly prepared settings.
pub fn propagate(protocol: &Protocol, settings: RunSettings) -> Result<SurvivalSeries> {
    Simulator::new(settings)?.propagate(protocol)
}

pub fn propagate_constant(a: f64, duration: f64, settings: RunSettings) -> Result<SurvivalSeries> {
    Simulator::new(settings)?.propagate_constant(a, duration)
}
