//! JSON run configuration with command-line overrides.

use std::path::{Path, PathBuf};

use conveyor_core::fingerprint::fingerprint;
use conveyor_core::propagator::AbsorberSpec;
use conveyor_core::{Error, GridSpec, PhysicalParams, Protocol, Result, RunSettings};
use serde::{Deserialize, Serialize};

fn default_dt() -> f64 {
    RunSettings::default().dt
}

fn default_stride() -> usize {
    RunSettings::default().sample_stride
}

fn default_ground_tol() -> f64 {
    RunSettings::default().ground_tol
}

/// Constant-acceleration scan over `steps` evenly spaced values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub a_min: f64,
    pub a_max: f64,
    pub steps: usize,
    #[serde(rename = "T")]
    pub duration: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig { a_min: 0.05, a_max: 0.30, steps: 20, duration: 500.0 }
    }
}

impl ScanConfig {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.steps == 0 || !(self.a_min > 0.0) || self.a_max < self.a_min {
            return Err(Error::Config(format!("invalid scan range {self:?}")));
        }
        if self.steps == 1 {
            return Ok(vec![self.a_min]);
        }
        let h = (self.a_max - self.a_min) / (self.steps - 1) as f64;
        Ok((0..self.steps).map(|i| self.a_min + h * i as f64).collect())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub out: Option<PathBuf>,
    pub gamma_table: Option<PathBuf>,
    pub b_model: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub params: PhysicalParams,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub absorber: AbsorberSpec,
    #[serde(default = "default_stride")]
    pub sample_stride: usize,
    #[serde(default = "default_ground_tol")]
    pub ground_tol: f64,
    #[serde(default)]
    pub protocol: Option<Protocol>,
    #[serde(default)]
    pub scan: Option<ScanConfig>,
    #[serde(default)]
    pub taus: Option<Vec<f64>>,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("every field has a default")
    }
}

/// The part of the configuration that determines numerical results.
#[derive(Serialize)]
struct NumericPart<'a> {
    params: &'a PhysicalParams,
    grid: &'a GridSpec,
    dt: f64,
    absorber: &'a AbsorberSpec,
    sample_stride: usize,
    ground_tol: f64,
    protocol: &'a Option<Protocol>,
    scan: &'a Option<ScanConfig>,
    taus: &'a Option<Vec<f64>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn settings(&self) -> RunSettings {
        RunSettings {
            params: self.params,
            grid: self.grid,
            dt: self.dt,
            absorber: self.absorber,
            sample_stride: self.sample_stride,
            ground_tol: self.ground_tol,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.settings().validate()?;
        if let Some(p) = &self.protocol {
            p.validate()?;
        }
        if let Some(s) = &self.scan {
            s.values()?;
        }
        Ok(())
    }

    /// Hash of every field that influences numbers; output paths and the
    /// worker count are excluded.
    pub fn fingerprint(&self) -> Result<String> {
        fingerprint(&NumericPart {
            params: &self.params,
            grid: &self.grid,
            dt: self.dt,
            absorber: &self.absorber,
            sample_stride: self.sample_stride,
            ground_tol: self.ground_tol,
            protocol: &self.protocol,
            scan: &self.scan,
            taus: &self.taus,
        })
    }

    pub fn to_canonical_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn require_protocol(&self) -> Result<&Protocol> {
        self.protocol
            .as_ref()
            .ok_or_else(|| Error::Usage("no protocol given (use --protocol or the config file)".into()))
    }
}
