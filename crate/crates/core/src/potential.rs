use crate::grid::Grid;
use crate::params::PhysicalParams;

/// z[tanh²((x − center)/w) − 1] sampled on the grid, written as −z·sech² to
/// keep the tails accurate.
pub fn well_potential(grid: &Grid, params: &PhysicalParams, center: f64) -> Vec<f64> {
    grid.x()
        .iter()
        .map(|&x| well_value(x - center, params))
        .collect()
}

pub fn well_value(offset: f64, params: &PhysicalParams) -> f64 {
    let c = (offset / params.width).cosh();
    -params.depth / (c * c)
}

/// mω²(x − center)²/2, used for the exactly solvable harmonic trap.
pub fn harmonic_potential(grid: &Grid, mass: f64, omega: f64, center: f64) -> Vec<f64> {
    grid.x()
        .iter()
        .map(|&x| 0.5 * mass * omega * omega * (x - center) * (x - center))
        .collect()
}
