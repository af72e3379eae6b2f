use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridSpec};

/// Complex amplitudes sampled on a [`Grid`]. Norms and overlaps use the
/// plain sum times `dx`.
#[derive(Clone, Debug, PartialEq)]
pub struct Wavefunction {
    spec: GridSpec,
    amplitudes: Vec<Complex64>,
}

impl Wavefunction {
    pub fn new(grid: &Grid, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.len() {
            return Err(Error::Usage(format!(
                "{} amplitudes for a grid of {} points",
                amplitudes.len(),
                grid.len()
            )));
        }
        Ok(Wavefunction { spec: grid.spec(), amplitudes })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> Complex64) -> Self {
        Wavefunction {
            spec: grid.spec(),
            amplitudes: grid.x().iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn grid_spec(&self) -> GridSpec {
        self.spec
    }

    pub fn dx(&self) -> f64 {
        self.spec.dx()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.dx()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sqr();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::Numerical(format!("cannot normalize state with norm² {n}")));
        }
        let s = 1.0 / n.sqrt();
        self.amplitudes.iter_mut().for_each(|c| *c *= s);
        Ok(())
    }

    /// Multiply by a unit phase so the largest-magnitude amplitude is real and positive.
    pub fn fix_phase(&mut self) {
        if let Some(peak) = self
            .amplitudes
            .iter()
            .copied()
            .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))
        {
            if peak.norm() > 0.0 {
                let rot = peak.conj() / peak.norm();
                self.amplitudes.iter_mut().for_each(|c| *c *= rot);
            }
        }
    }
}

/// ⟨ψ1|ψ2⟩ = Σ conj(ψ1) ψ2 dx.
pub fn inner_product(psi1: &Wavefunction, psi2: &Wavefunction) -> Result<Complex64> {
    if psi1.spec != psi2.spec {
        return Err(Error::Usage("inner product of states on different grids".into()));
    }
    let s: Complex64 = psi1
        .amplitudes
        .iter()
        .zip(&psi2.amplitudes)
        .map(|(a, b)| a.conj() * b)
        .sum();
    Ok(s * psi1.dx())
}

/// |⟨ψ1|ψ2⟩|².
pub fn fidelity(psi1: &Wavefunction, psi2: &Wavefunction) -> Result<f64> {
    Ok(inner_product(psi1, psi2)?.norm_sqr())
}
