//! FFT plumbing shared by the real- and imaginary-time split-operator steps.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) struct Fourier {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Fourier {
    pub(crate) fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Fourier {
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    /// ψ ← F⁻¹[factor · F ψ]. `factor` must already carry the 1/N of the
    /// unnormalized inverse transform.
    pub(crate) fn apply_in_momentum(&mut self, psi: &mut [Complex64], factor: &[Complex64]) {
        self.forward.process_with_scratch(psi, &mut self.scratch);
        psi.iter_mut().zip(factor).for_each(|(c, f)| *c *= f);
        self.inverse.process_with_scratch(psi, &mut self.scratch);
    }

    pub(crate) fn forward(&mut self, psi: &mut [Complex64]) {
        self.forward.process_with_scratch(psi, &mut self.scratch);
    }
}
