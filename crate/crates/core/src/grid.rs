//! Uniform periodic grid and its discrete-Fourier momentum samples.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The three numbers that define a grid; this is what gets persisted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            x_min: -204.8,
            x_max: 204.8,
            n_points: 4096,
        }
    }
}

impl GridSpec {
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_points as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_min.is_finite() && self.x_max.is_finite()) || self.x_min >= self.x_max {
            return Err(Error::Config(format!(
                "grid interval [{}, {}] is empty or not finite",
                self.x_min, self.x_max
            )));
        }
        if self.n_points < 16 || !self.n_points.is_power_of_two() {
            return Err(Error::Config(format!(
                "grid size {} must be a power of two and at least 16",
                self.n_points
            )));
        }
        if !(self.x_min < 0.0 && self.x_max > 0.0) {
            return Err(Error::Config(format!(
                "grid [{}, {}] must contain the origin in its interior",
                self.x_min, self.x_max
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Grid {
    spec: GridSpec,
    dx: f64,
    x: Vec<f64>,
    k: Vec<f64>,
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.n_points;
        let dx = spec.dx();
        let x = (0..n).map(|j| spec.x_min + j as f64 * dx).collect();
        let dk = 2.0 * PI / (n as f64 * dx);
        let k = (0..n)
            .map(|j| {
                let m = if j < n / 2 { j as i64 } else { j as i64 - n as i64 };
                m as f64 * dk
            })
            .collect();
        Ok(Grid { spec, dx, x, k })
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn len(&self) -> usize {
        self.spec.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.spec.n_points == 0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Angular wavenumbers in standard DFT order: 0, dk, …, −dk.
    pub fn k(&self) -> &[f64] {
        &self.k
    }

    pub fn k_max(&self) -> f64 {
        PI / self.dx
    }

    /// Index of the mirror point −x on a symmetric grid.
    pub fn mirror_index(&self, j: usize) -> usize {
        (self.len() - j) % self.len()
    }
}

/// Build a grid, validating the interval and size.
pub fn build_grid(x_min: f64, x_max: f64, n_points: usize) -> Result<Grid> {
    Grid::new(GridSpec { x_min, x_max, n_points })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_spacing_and_cutoff() {
        let g = build_grid(-204.8, 204.8, 4096).unwrap();
        assert!((g.dx() - 0.1).abs() < 1e-12);
        assert!((g.k_max() - 31.415_926_535_897_93).abs() < 1e-9);
        assert_eq!(g.k()[0], 0.0);
        assert!((g.k()[2048] + g.k_max()).abs() < 1e-9);
        assert!(g.k()[4095] < 0.0);
    }

    #[test]
    fn rejects_bad_sizes_and_intervals() {
        assert!(matches!(build_grid(-1.0, 1.0, 15), Err(Error::Config(_))));
        assert!(matches!(build_grid(-1.0, 1.0, 8), Err(Error::Config(_))));
        assert!(matches!(build_grid(0.0, 0.0, 16), Err(Error::Config(_))));
        assert!(matches!(build_grid(1.0, -1.0, 16), Err(Error::Config(_))));
        assert!(matches!(build_grid(1.0, 3.0, 16), Err(Error::Config(_))));
    }

    #[test]
    fn mirror_points_are_negated() {
        let g = build_grid(-12.8, 12.8, 256).unwrap();
        for j in 1..g.len() {
            let m = g.mirror_index(j);
            assert!((g.x()[j] + g.x()[m]).abs() < 1e-12);
        }
    }
}
