//! Acceleration schedules a(t) on [0, τ] with closed-form position,
//! velocity and one-sided endpoint derivatives.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default search depth for [`Protocol::leading_discontinuity`].
pub const DEFAULT_N_MAX: usize = 6;

/// Relative size below which an endpoint derivative counts as zero.
const ZERO_THRESHOLD: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum Protocol {
    /// a(t) ≡ a for a duration τ.
    #[serde(rename = "const")]
    ConstantA { a: f64, tau: f64 },
    /// a(t) = c cos(ωt), ω = π/τ, with c fixed by x₀(τ) = L.
    Cos {
        #[serde(rename = "L")]
        length: f64,
        tau: f64,
    },
    /// a(t) = c sin(2ωt), ω = π/τ, with c fixed by x₀(τ) = L.
    Sin {
        #[serde(rename = "L")]
        length: f64,
        tau: f64,
    },
    /// a(t) = c sin(2ωt + φ); the transported distance follows from c and φ.
    ShiftedSin { c: f64, phi: f64, tau: f64 },
    /// a(t) = a₀ t²(τ/2 − t)(τ − t)², a₀ = 840 L τ⁻⁷.
    Poly5 {
        #[serde(rename = "L")]
        length: f64,
        tau: f64,
    },
    /// a(t) = Σ coeffs[n] tⁿ.
    Taylor { coeffs: Vec<f64>, tau: f64 },
}

/// Protocol shape without its parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    #[serde(rename = "const")]
    ConstantA,
    Cos,
    Sin,
    ShiftedSin,
    Poly5,
    Taylor,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "const" => Family::ConstantA,
            "cos" => Family::Cos,
            "sin" => Family::Sin,
            "shifted_sin" => Family::ShiftedSin,
            "poly5" => Family::Poly5,
            "taylor" => Family::Taylor,
            other => return Err(Error::Usage(format!("unknown protocol family `{other}`"))),
        })
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::ConstantA => "const",
            Family::Cos => "cos",
            Family::Sin => "sin",
            Family::ShiftedSin => "shifted_sin",
            Family::Poly5 => "poly5",
            Family::Taylor => "taylor",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    Initial,
    Final,
}

/// Amplitude that makes a family start and end at rest-frame positions 0 and L.
pub fn amplitude_from_constraint(family: Family, length: f64, tau: f64) -> Result<f64> {
    if !(length > 0.0 && tau > 0.0) {
        return Err(Error::Usage(format!("L and tau must be positive (L={length}, tau={tau})")));
    }
    match family {
        Family::Cos => Ok(PI * PI * length / (2.0 * tau * tau)),
        Family::Sin => Ok(2.0 * PI * length / (tau * tau)),
        Family::Poly5 => Ok(840.0 * length / tau.powi(7)),
        other => Err(Error::Usage(format!(
            "the {other} protocol is not parameterized by a transport distance"
        ))),
    }
}

/// Leading prefactor g of a⁽ⁿ⁾(0) = g · L · τ^(−n−2) for the families that
/// carry a distance constraint, at their leading discontinuous order.
pub fn derivative_prefactor(family: Family) -> Option<(usize, f64)> {
    match family {
        Family::Cos => Some((0, PI * PI / 2.0)),
        Family::Sin => Some((1, 4.0 * PI * PI)),
        Family::Poly5 => Some((2, 840.0)),
        _ => None,
    }
}

impl Protocol {
    pub fn cos(length: f64, tau: f64) -> Self {
        Protocol::Cos { length, tau }
    }

    pub fn sin(length: f64, tau: f64) -> Self {
        Protocol::Sin { length, tau }
    }

    pub fn poly5(length: f64, tau: f64) -> Self {
        Protocol::Poly5 { length, tau }
    }

    pub fn constant(a: f64, tau: f64) -> Self {
        Protocol::ConstantA { a, tau }
    }

    pub fn shifted_sin(c: f64, phi: f64, tau: f64) -> Self {
        Protocol::ShiftedSin { c, phi, tau }
    }

    /// Build a protocol of the given family from a distance and duration.
    pub fn from_family(family: Family, length: f64, tau: f64) -> Result<Self> {
        match family {
            Family::Cos => Ok(Protocol::cos(length, tau)),
            Family::Sin => Ok(Protocol::sin(length, tau)),
            Family::Poly5 => Ok(Protocol::poly5(length, tau)),
            other => Err(Error::Usage(format!("cannot build a {other} protocol from (L, tau)"))),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Protocol::ConstantA { .. } => Family::ConstantA,
            Protocol::Cos { .. } => Family::Cos,
            Protocol::Sin { .. } => Family::Sin,
            Protocol::ShiftedSin { .. } => Family::ShiftedSin,
            Protocol::Poly5 { .. } => Family::Poly5,
            Protocol::Taylor { .. } => Family::Taylor,
        }
    }

    pub fn tau(&self) -> f64 {
        match self {
            Protocol::ConstantA { tau, .. }
            | Protocol::Cos { tau, .. }
            | Protocol::Sin { tau, .. }
            | Protocol::ShiftedSin { tau, .. }
            | Protocol::Poly5 { tau, .. }
            | Protocol::Taylor { tau, .. } => *tau,
        }
    }

    /// π/τ.
    pub fn omega(&self) -> f64 {
        PI / self.tau()
    }

    pub fn validate(&self) -> Result<()> {
        let tau = self.tau();
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::Config(format!("tau must be positive, got {tau}")));
        }
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be finite, got {v}")))
            }
        };
        match self {
            Protocol::ConstantA { a, .. } => finite("a", *a),
            Protocol::Cos { length, .. } | Protocol::Sin { length, .. } | Protocol::Poly5 { length, .. } => {
                if *length > 0.0 && length.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Config(format!("L must be positive, got {length}")))
                }
            }
            Protocol::ShiftedSin { c, phi, .. } => finite("c", *c).and(finite("phi", *phi)),
            Protocol::Taylor { coeffs, .. } => {
                if coeffs.is_empty() {
                    return Err(Error::Config("taylor protocol needs at least one coefficient".into()));
                }
                coeffs.iter().try_for_each(|&c| finite("coefficient", c))
            }
        }
    }

    /// Sine/cosine amplitude c for Cos, Sin and ShiftedSin.
    fn trig_amplitude(&self) -> Option<f64> {
        match self {
            Protocol::Cos { length, tau } => Some(PI * PI * length / (2.0 * tau * tau)),
            Protocol::Sin { length, tau } => Some(2.0 * PI * length / (tau * tau)),
            Protocol::ShiftedSin { c, .. } => Some(*c),
            _ => None,
        }
    }

    /// Coefficients of a(t) as a polynomial in t, for the polynomial variants.
    pub fn polynomial_coefficients(&self) -> Option<Vec<f64>> {
        match self {
            Protocol::ConstantA { a, .. } => Some(vec![*a]),
            Protocol::Poly5 { length, tau } => {
                let a0 = 840.0 * length / tau.powi(7);
                Some(vec![
                    0.0,
                    0.0,
                    0.5 * a0 * tau.powi(3),
                    -2.0 * a0 * tau * tau,
                    2.5 * a0 * tau,
                    -a0,
                ])
            }
            Protocol::Taylor { coeffs, .. } => Some(coeffs.clone()),
            _ => None,
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let tau = self.tau();
        let slack = 1e-9 * tau;
        if t.is_finite() && t >= -slack && t <= tau + slack {
            Ok(())
        } else {
            Err(Error::Range(format!("t = {t} outside [0, {tau}]")))
        }
    }

    pub fn acceleration(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.acceleration_unchecked(t))
    }

    /// a(t) without the range check; used inside propagation loops.
    pub(crate) fn acceleration_unchecked(&self, t: f64) -> f64 {
        let w = self.omega();
        match self {
            Protocol::Cos { .. } => self.trig_amplitude().unwrap() * (w * t).cos(),
            Protocol::Sin { .. } => self.trig_amplitude().unwrap() * (2.0 * w * t).sin(),
            Protocol::ShiftedSin { c, phi, .. } => c * (2.0 * w * t + phi).sin(),
            _ => horner(&self.polynomial_coefficients().unwrap(), t),
        }
    }

    pub fn velocity(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let w = self.omega();
        Ok(match self {
            Protocol::Cos { .. } => self.trig_amplitude().unwrap() / w * (w * t).sin(),
            Protocol::Sin { .. } => {
                self.trig_amplitude().unwrap() / (2.0 * w) * (1.0 - (2.0 * w * t).cos())
            }
            Protocol::ShiftedSin { c, phi, .. } => {
                c / (2.0 * w) * (phi.cos() - (2.0 * w * t + phi).cos())
            }
            _ => horner(&antiderivative(&self.polynomial_coefficients().unwrap()), t),
        })
    }

    pub fn position(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let w = self.omega();
        Ok(match self {
            Protocol::Cos { .. } => self.trig_amplitude().unwrap() / (w * w) * (1.0 - (w * t).cos()),
            Protocol::Sin { .. } => {
                self.trig_amplitude().unwrap() / (2.0 * w) * (t - (2.0 * w * t).sin() / (2.0 * w))
            }
            Protocol::ShiftedSin { c, phi, .. } => {
                c / (2.0 * w) * (t * phi.cos() - ((2.0 * w * t + phi).sin() - phi.sin()) / (2.0 * w))
            }
            _ => {
                let v = antiderivative(&self.polynomial_coefficients().unwrap());
                horner(&antiderivative(&v), t)
            }
        })
    }

    /// One-sided n-th derivative of a(t) at t = 0⁺ or t = τ⁻.
    pub fn endpoint_derivative(&self, n: usize, endpoint: Endpoint) -> f64 {
        self.endpoint_derivative_with_scale(n, endpoint).0
    }

    /// The derivative together with the magnitude its zero test is measured against.
    fn endpoint_derivative_with_scale(&self, n: usize, endpoint: Endpoint) -> (f64, f64) {
        let w = self.omega();
        match self {
            Protocol::Cos { .. } => {
                // a⁽ⁿ⁾(t) = c ωⁿ cos(ωt + nπ/2), cos(π + nπ/2) = −cos(nπ/2).
                let scale = self.trig_amplitude().unwrap() * w.powi(n as i32);
                let sign = match endpoint {
                    Endpoint::Initial => 1.0,
                    Endpoint::Final => -1.0,
                };
                (sign * scale * quarter_cos(n), scale.abs())
            }
            Protocol::Sin { .. } => {
                // a⁽ⁿ⁾(t) = c (2ω)ⁿ sin(2ωt + nπ/2), identical at both ends.
                let scale = self.trig_amplitude().unwrap() * (2.0 * w).powi(n as i32);
                (scale * quarter_sin(n), scale.abs())
            }
            Protocol::ShiftedSin { c, phi, .. } => {
                let scale = c * (2.0 * w).powi(n as i32);
                let arg = phi + n as f64 * PI / 2.0;
                (scale * arg.sin(), scale.abs())
            }
            Protocol::Poly5 { .. } => {
                // a(τ − t) = −a(t), so a⁽ⁿ⁾(τ) = (−1)ⁿ⁺¹ a⁽ⁿ⁾(0).
                let coeffs = self.polynomial_coefficients().unwrap();
                let (d0, s0) = polynomial_derivative_at(&coeffs, n, 0.0);
                match endpoint {
                    Endpoint::Initial => (d0, s0),
                    Endpoint::Final => {
                        let sign = if n % 2 == 0 { -1.0 } else { 1.0 };
                        (sign * d0, s0)
                    }
                }
            }
            Protocol::ConstantA { .. } | Protocol::Taylor { .. } => {
                let coeffs = self.polynomial_coefficients().unwrap();
                let t = match endpoint {
                    Endpoint::Initial => 0.0,
                    Endpoint::Final => self.tau(),
                };
                polynomial_derivative_at(&coeffs, n, t)
            }
        }
    }

    /// Smallest n ≤ n_max whose endpoint derivative is nonzero, with its value.
    pub fn leading_discontinuity(&self, endpoint: Endpoint, n_max: usize) -> Result<(usize, f64)> {
        // Scale the zero test by the largest derivative seen so far (in units
        // of τ) so tiny rounding residues do not count as discontinuities.
        let tau = self.tau();
        let mut reference: f64 = 0.0;
        for n in 0..=n_max {
            let (_, s) = self.endpoint_derivative_with_scale(n, endpoint);
            reference = reference.max(s * tau.powi(n as i32));
        }
        for n in 0..=n_max {
            let (d, s) = self.endpoint_derivative_with_scale(n, endpoint);
            let floor = ZERO_THRESHOLD * s.max(reference * tau.powi(-(n as i32)));
            if d.abs() > floor && d != 0.0 {
                return Ok((n, d));
            }
        }
        Err(Error::NoDiscontinuity { n_max })
    }

    /// Largest |a(t)|, from the closed form where available and dense
    /// sampling otherwise.
    pub fn max_abs_acceleration(&self) -> f64 {
        match self {
            Protocol::ConstantA { a, .. } => a.abs(),
            Protocol::Cos { .. } | Protocol::Sin { .. } => self.trig_amplitude().unwrap().abs(),
            _ => {
                let tau = self.tau();
                let n = 20_000;
                (0..=n)
                    .map(|i| self.acceleration_unchecked(tau * i as f64 / n as f64).abs())
                    .fold(0.0, f64::max)
            }
        }
    }
}

fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

/// Coefficients of ∫₀ᵗ p(s) ds.
fn antiderivative(coeffs: &[f64]) -> Vec<f64> {
    std::iter::once(0.0)
        .chain(coeffs.iter().enumerate().map(|(n, &c)| c / (n as f64 + 1.0)))
        .collect()
}

/// n-th derivative of Σ cₘ tᵐ at t, and the sum of the absolute values of its terms.
fn polynomial_derivative_at(coeffs: &[f64], n: usize, t: f64) -> (f64, f64) {
    let mut value = 0.0;
    let mut scale = 0.0;
    for (m, &c) in coeffs.iter().enumerate().skip(n) {
        let falling: f64 = ((m - n + 1)..=m).map(|k| k as f64).product();
        let term = c * falling * t.powi((m - n) as i32);
        value += term;
        scale += term.abs();
    }
    (value, scale)
}

fn quarter_cos(n: usize) -> f64 {
    [1.0, 0.0, -1.0, 0.0][n % 4]
}

fn quarter_sin(n: usize) -> f64 {
    [0.0, 1.0, 0.0, -1.0][n % 4]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn amplitudes_from_distance() {
        let c = amplitude_from_constraint(Family::Cos, 5000.0, 500.0).unwrap();
        assert!(close(c, PI * PI / 100.0, 1e-14));
        assert!((c - 0.098_696_0).abs() < 1e-7);
        let s = amplitude_from_constraint(Family::Sin, 8000.0, 500.0).unwrap();
        assert!((s - 0.201_062).abs() < 1e-6);
        let a0 = amplitude_from_constraint(Family::Poly5, 125.0, 100.0).unwrap();
        assert!(close(a0, 1.05e-9, 1e-12));
        assert!(matches!(
            amplitude_from_constraint(Family::ShiftedSin, 1.0, 1.0),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn accelerations_at_reference_times() {
        let cos = Protocol::cos(5000.0, 500.0);
        assert!((cos.acceleration(0.0).unwrap() - 0.098_696_0).abs() < 1e-7);
        assert_eq!(Protocol::sin(8000.0, 500.0).acceleration(0.0).unwrap(), 0.0);
        let p5 = Protocol::poly5(125.0, 100.0);
        assert!(p5.acceleration(50.0).unwrap().abs() < 1e-18);
        assert!(matches!(cos.acceleration(-1.0), Err(Error::Range(_))));
        assert!(matches!(cos.acceleration(500.1), Err(Error::Range(_))));
        let shifted = Protocol::shifted_sin(0.5, PI / 2.0, 100.0);
        assert!((shifted.acceleration(0.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn endpoints_reach_the_target() {
        for p in [
            Protocol::cos(5000.0, 500.0),
            Protocol::sin(8000.0, 500.0),
            Protocol::poly5(125.0, 100.0),
        ] {
            let l = match p {
                Protocol::Cos { length, .. } | Protocol::Sin { length, .. } | Protocol::Poly5 { length, .. } => length,
                _ => unreachable!(),
            };
            assert_eq!(p.position(0.0).unwrap(), 0.0);
            assert_eq!(p.velocity(0.0).unwrap(), 0.0);
            assert!((p.position(p.tau()).unwrap() - l).abs() < 1e-9 * l, "{p:?}");
        }
    }

    #[test]
    fn endpoint_derivatives_reference_values() {
        let cos = Protocol::cos(8000.0, 500.0);
        assert!((cos.endpoint_derivative(0, Endpoint::Initial) - 0.157_914).abs() < 1e-6);
        let sin = Protocol::sin(8000.0, 500.0);
        let d1 = sin.endpoint_derivative(1, Endpoint::Initial);
        assert!(close(d1, 4.0 * PI * PI * 8000.0 / 500f64.powi(3), 1e-13));
        assert!((d1 - 2.526_62e-3).abs() < 1e-8);
        let p5 = Protocol::poly5(125.0, 100.0);
        assert!(close(p5.endpoint_derivative(2, Endpoint::Initial), 1.05e-3, 1e-12));
        assert!(close(p5.endpoint_derivative(2, Endpoint::Final).abs(), 1.05e-3, 1e-12));
    }

    #[test]
    fn leading_discontinuities() {
        let cos = Protocol::cos(8000.0, 500.0);
        let (n, v) = cos.leading_discontinuity(Endpoint::Initial, DEFAULT_N_MAX).unwrap();
        assert_eq!(n, 0);
        assert!(close(v, PI * PI * 8000.0 / (2.0 * 250_000.0), 1e-14));
        let (n, v) = cos.leading_discontinuity(Endpoint::Final, DEFAULT_N_MAX).unwrap();
        assert_eq!(n, 0);
        assert!(v < 0.0);

        let sin = Protocol::sin(8000.0, 500.0);
        for e in [Endpoint::Initial, Endpoint::Final] {
            let (n, v) = sin.leading_discontinuity(e, DEFAULT_N_MAX).unwrap();
            assert_eq!(n, 1);
            let c = amplitude_from_constraint(Family::Sin, 8000.0, 500.0).unwrap();
            assert!(close(v, 2.0 * c * PI / 500.0, 1e-13));
        }

        let p5 = Protocol::poly5(125.0, 100.0);
        for e in [Endpoint::Initial, Endpoint::Final] {
            let (n, v) = p5.leading_discontinuity(e, DEFAULT_N_MAX).unwrap();
            assert_eq!(n, 2);
            assert!(close(v.abs(), 1.05e-3, 1e-12));
        }

        let taylor = Protocol::Taylor { coeffs: vec![0.0; 9].into_iter().chain([1e-3]).collect(), tau: 10.0 };
        assert!(matches!(
            taylor.leading_discontinuity(Endpoint::Initial, DEFAULT_N_MAX),
            Err(Error::NoDiscontinuity { n_max: 6 })
        ));
        // At τ the same polynomial has a nonzero value.
        assert_eq!(taylor.leading_discontinuity(Endpoint::Final, DEFAULT_N_MAX).unwrap().0, 0);
    }

    #[test]
    fn poly5_final_endpoint_is_exactly_antisymmetric() {
        let p = Protocol::poly5(250.0, 300.0);
        let t = Protocol::Taylor { coeffs: p.polynomial_coefficients().unwrap(), tau: 300.0 };
        for n in 0..=5 {
            let a = p.endpoint_derivative(n, Endpoint::Final);
            let b = t.endpoint_derivative(n, Endpoint::Final);
            let scale = p.endpoint_derivative(2, Endpoint::Initial).abs() * 300f64.powi(2 - n as i32);
            assert!((a - b).abs() < 1e-12 * scale, "n={n}: {a} vs {b}");
        }
        assert_eq!(t.leading_discontinuity(Endpoint::Final, 6).unwrap().0, 2);
    }

    #[test]
    fn json_descriptor_round_trip_and_strictness() {
        let p = Protocol::cos(5000.0, 500.0);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"variant":"cos","L":5000.0,"tau":500.0}"#);
        assert_eq!(serde_json::from_str::<Protocol>(&s).unwrap(), p);
        let c: Protocol = serde_json::from_str(r#"{"variant":"const","a":0.145,"tau":500}"#).unwrap();
        assert_eq!(c, Protocol::constant(0.145, 500.0));
        let bad = serde_json::from_str::<Protocol>(r#"{"variant":"cos","L":1,"tau":2,"phi":0}"#);
        assert!(bad.is_err());
        let bad = serde_json::from_str::<Protocol>(r#"{"variant":"cos","tau":2}"#);
        assert!(bad.is_err());
    }

    fn simpson_twice(p: &Protocol, t_end: f64, panels: usize) -> f64 {
        // x(T) = ∫₀ᵀ (T − s) a(s) ds.
        let h = t_end / panels as f64;
        let f = |s: f64| (t_end - s) * p.acceleration_unchecked(s);
        let mut acc = f(0.0) + f(t_end);
        for i in 1..panels {
            acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    }

    fn arbitrary_protocol() -> impl Strategy<Value = Protocol> {
        (0usize..4, 10.0f64..5000.0, 20.0f64..800.0, 0.0f64..6.3).prop_map(|(k, l, tau, phi)| match k {
            0 => Protocol::cos(l, tau),
            1 => Protocol::sin(l, tau),
            2 => Protocol::poly5(l, tau),
            _ => Protocol::shifted_sin(l / (tau * tau), phi, tau),
        })
    }

    proptest! {
        #[test]
        fn closed_form_position_matches_quadrature(p in arbitrary_protocol(), frac in 0.05f64..1.0) {
            let t = frac * p.tau();
            let quad = simpson_twice(&p, t, 4000);
            let exact = p.position(t).unwrap();
            let scale = p.max_abs_acceleration() * p.tau() * p.tau();
            prop_assert!((quad - exact).abs() < 1e-6 * scale, "{quad} vs {exact}");
        }

        #[test]
        fn endpoint_derivatives_match_one_sided_differences(p in arbitrary_protocol()) {
            let tau = p.tau();
            let h = 1e-4 * tau;
            let a = |t: f64| p.acceleration_unchecked(t);
            // Second-order one-sided stencils.
            let fwd = [
                a(0.0),
                (-3.0 * a(0.0) + 4.0 * a(h) - a(2.0 * h)) / (2.0 * h),
                (2.0 * a(0.0) - 5.0 * a(h) + 4.0 * a(2.0 * h) - a(3.0 * h)) / (h * h),
            ];
            let bwd = [
                a(tau),
                (3.0 * a(tau) - 4.0 * a(tau - h) + a(tau - 2.0 * h)) / (2.0 * h),
                (2.0 * a(tau) - 5.0 * a(tau - h) + 4.0 * a(tau - 2.0 * h) - a(tau - 3.0 * h)) / (h * h),
            ];
            for n in 0..=2 {
                let scale = p.max_abs_acceleration() * tau.powi(-(n as i32));
                let e0 = p.endpoint_derivative(n, Endpoint::Initial);
                let e1 = p.endpoint_derivative(n, Endpoint::Final);
                prop_assert!((e0 - fwd[n]).abs() <= 1e-4 * e0.abs().max(scale), "n={} {} vs {}", n, e0, fwd[n]);
                prop_assert!((e1 - bwd[n]).abs() <= 1e-4 * e1.abs().max(scale), "n={} {} vs {}", n, e1, bwd[n]);
            }
        }

        #[test]
        fn derivative_scaling_law(k in 0usize..3, l in 10.0f64..5000.0, tau in 20.0f64..800.0,
                                  s in 0.1f64..10.0, r in 0.2f64..5.0) {
            let family = [Family::Cos, Family::Sin, Family::Poly5][k];
            let (n, _) = derivative_prefactor(family).unwrap();
            let base = Protocol::from_family(family, l, tau).unwrap().endpoint_derivative(n, Endpoint::Initial);
            let scaled = Protocol::from_family(family, s * l, r * tau).unwrap().endpoint_derivative(n, Endpoint::Initial);
            let expected = base * s * r.powi(-(n as i32) - 2);
            prop_assert!((scaled - expected).abs() <= 1e-12 * expected.abs());
        }
    }

    #[test]
    fn prefactor_matches_endpoint_derivative() {
        for family in [Family::Cos, Family::Sin, Family::Poly5] {
            let (n, g) = derivative_prefactor(family).unwrap();
            let p = Protocol::from_family(family, 3000.0, 700.0).unwrap();
            let d = p.endpoint_derivative(n, Endpoint::Initial);
            assert!(close(d, g * 3000.0 * 700f64.powi(-(n as i32) - 2), 1e-13));
        }
    }
}
