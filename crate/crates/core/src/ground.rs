//! Initial trapped state by imaginary-time split-operator relaxation.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::params::PhysicalParams;
use crate::potential::well_potential;
use crate::split::Fourier;
use crate::wavefunction::Wavefunction;

const IMAGINARY_STEP: f64 = 0.01;
const CHECK_EVERY: usize = 10;
const MAX_STEPS: usize = 2_000_000;

/// Normalized ground state of p²/2m + V_well(x) and its energy.
pub fn ground_state(grid: &Grid, params: &PhysicalParams, tol: f64) -> Result<(Wavefunction, f64)> {
    let v = well_potential(grid, params, 0.0);
    ground_state_of(grid, params, &v, 0.0, tol)
}

/// Ground state of p²/2m + V for an arbitrary sampled potential. The search
/// starts from a Gaussian at `guess_center` and stops once energy estimates
/// taken `CHECK_EVERY` steps apart differ by less than `tol`.
pub fn ground_state_of(
    grid: &Grid,
    params: &PhysicalParams,
    potential: &[f64],
    guess_center: f64,
    tol: f64,
) -> Result<(Wavefunction, f64)> {
    params.validate()?;
    if potential.len() != grid.len() {
        return Err(Error::Usage("potential length does not match grid".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    let n = grid.len();
    let dtau = IMAGINARY_STEP;
    let inv_n = 1.0 / n as f64;
    let kinetic: Vec<Complex64> = grid
        .k()
        .iter()
        .map(|&k| Complex64::new((-params.hbar * k * k * dtau / (2.0 * params.mass)).exp() * inv_n, 0.0))
        .collect();
    let half: Vec<f64> = potential
        .iter()
        .map(|&v| (-v * dtau / (2.0 * params.hbar)).exp())
        .collect();

    let width = params.width;
    let mut psi = Wavefunction::from_fn(grid, |x| {
        Complex64::new((-(x - guess_center).powi(2) / (2.0 * width * width)).exp(), 0.0)
    });
    psi.normalize()?;
    let mut fourier = Fourier::new(n);
    let mut previous = f64::INFINITY;

    for step in 1..=MAX_STEPS {
        {
            let amps = psi.amplitudes_mut();
            amps.iter_mut().zip(&half).for_each(|(c, h)| *c *= h);
            fourier.apply_in_momentum(amps, &kinetic);
            amps.iter_mut().zip(&half).for_each(|(c, h)| *c *= h);
        }
        psi.normalize()?;
        if step % CHECK_EVERY == 0 {
            let e = energy(grid, params, potential, &psi, &mut fourier);
            if !e.is_finite() {
                return Err(Error::Numerical("energy estimate diverged".into()));
            }
            if (e - previous).abs() < tol {
                if e >= 0.0 {
                    return Err(Error::NoBoundState { energy: e });
                }
                psi.fix_phase();
                return Ok((psi, e));
            }
            previous = e;
        }
    }
    Err(Error::Numerical(format!(
        "imaginary-time relaxation did not converge to {tol} within {MAX_STEPS} steps"
    )))
}

/// ⟨H⟩ with the kinetic part evaluated exactly in momentum space.
pub fn energy_expectation(
    grid: &Grid,
    params: &PhysicalParams,
    potential: &[f64],
    psi: &Wavefunction,
) -> f64 {
    let mut fourier = Fourier::new(grid.len());
    energy(grid, params, potential, psi, &mut fourier)
}

fn energy(
    grid: &Grid,
    params: &PhysicalParams,
    potential: &[f64],
    psi: &Wavefunction,
    fourier: &mut Fourier,
) -> f64 {
    let norm = psi.norm_sqr();
    let pot: f64 = psi
        .amplitudes()
        .iter()
        .zip(potential)
        .map(|(c, v)| c.norm_sqr() * v)
        .sum::<f64>()
        * grid.dx();
    let mut spectrum = psi.amplitudes().to_vec();
    fourier.forward(&mut spectrum);
    let (mut weighted, mut total) = (0.0, 0.0);
    for (c, &k) in spectrum.iter().zip(grid.k()) {
        let w = c.norm_sqr();
        weighted += w * params.hbar * params.hbar * k * k / (2.0 * params.mass);
        total += w;
    }
    weighted / total + pot / norm
}
