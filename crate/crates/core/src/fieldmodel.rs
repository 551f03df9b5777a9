//! Windowed vector potential of two counterpropagating, elliptically
//! polarized plane waves.
//!
//! Temporal gauge: the scalar potential vanishes and E = −∂A/∂t. The
//! monochromatic part of A is the analytic antiderivative of the electric
//! field, and the sin² window multiplies A, not E. Times are measured in
//! laser cycles; one cycle is 2π/ω in natural units.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use num_complex::Complex64 as C64;

use crate::physconfig::{FieldParams, WindowParams};

pub type CVec3 = [C64; 3];

const ZERO3: CVec3 = [C64 { re: 0.0, im: 0.0 }; 3];

/// Circular Jones vector |l⟩ = (e_x + i e_y)/√2.
pub fn jones_left() -> CVec3 {
    [C64::new(FRAC_1_SQRT_2, 0.0), C64::new(0.0, FRAC_1_SQRT_2), C64::new(0.0, 0.0)]
}

/// Circular Jones vector |r⟩ = (e_x − i e_y)/√2.
pub fn jones_right() -> CVec3 {
    [C64::new(FRAC_1_SQRT_2, 0.0), C64::new(0.0, -FRAC_1_SQRT_2), C64::new(0.0, 0.0)]
}

/// Polarization of one beam in the circular basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JonesAmplitude {
    pub c_left: C64,
    pub c_right: C64,
}

impl JonesAmplitude {
    /// cos α |l⟩ + sin α |r⟩.
    pub fn from_angle(alpha: f64) -> Self {
        Self { c_left: C64::new(alpha.cos(), 0.0), c_right: C64::new(alpha.sin(), 0.0) }
    }

    pub fn vector(&self) -> CVec3 {
        let l = jones_left();
        let r = jones_right();
        [0, 1, 2].map(|i| self.c_left * l[i] + self.c_right * r[i])
    }
}

/// Spatial Fourier content of the potential at one instant:
/// A(z) = C₊ e^{ikz} + C₋ e^{−ikz} + c.c., in units of m₀/e.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FourierPotential {
    pub c_plus_k: CVec3,
    pub c_minus_k: CVec3,
}

impl FourierPotential {
    pub fn zero() -> Self {
        Self { c_plus_k: ZERO3, c_minus_k: ZERO3 }
    }

    pub fn is_zero(&self) -> bool {
        self.c_plus_k.iter().chain(self.c_minus_k.iter()).all(|c| c.re == 0.0 && c.im == 0.0)
    }

    /// Total coefficient of e^{+ikz}, i.e. C₊ + C₋*. The coefficient of
    /// e^{−ikz} is its complex conjugate.
    pub fn raising_harmonic(&self) -> CVec3 {
        [0, 1, 2].map(|i| self.c_plus_k[i] + self.c_minus_k[i].conj())
    }

    /// Reconstructs A(z) with complex arithmetic; the imaginary part is
    /// roundoff only.
    pub fn eval_complex(&self, k: f64, z: f64) -> CVec3 {
        let ep = C64::from_polar(1.0, k * z);
        let em = ep.conj();
        [0, 1, 2].map(|i| {
            let (p, m) = (self.c_plus_k[i], self.c_minus_k[i]);
            p * ep + m * em + p.conj() * em + m.conj() * ep
        })
    }

    pub fn eval(&self, k: f64, z: f64) -> [f64; 3] {
        self.eval_complex(k, z).map(|c| c.re)
    }
}

/// Window function: sin² ramps of `ramp_cycles` around a flat plateau,
/// zero outside [0, 2ΔT + T].
pub fn envelope(t_cycles: f64, window: &WindowParams) -> f64 {
    let ramp = window.ramp_cycles as f64;
    let plateau = window.plateau_cycles as f64;
    let end = 2.0 * ramp + plateau;
    if t_cycles <= 0.0 || t_cycles >= end {
        0.0
    } else if t_cycles < ramp {
        (PI * t_cycles / (2.0 * ramp)).sin().powi(2)
    } else if t_cycles <= ramp + plateau {
        1.0
    } else {
        (PI * (end - t_cycles) / (2.0 * ramp)).sin().powi(2)
    }
}

/// d envelope / d t, per cycle.
pub fn envelope_rate(t_cycles: f64, window: &WindowParams) -> f64 {
    let ramp = window.ramp_cycles as f64;
    let plateau = window.plateau_cycles as f64;
    let end = 2.0 * ramp + plateau;
    if t_cycles <= 0.0 || t_cycles >= end {
        0.0
    } else if t_cycles < ramp {
        // d/dt sin²(a t) = a sin(2 a t)
        let a = PI / (2.0 * ramp);
        a * (2.0 * a * t_cycles).sin()
    } else if t_cycles <= ramp + plateau {
        0.0
    } else {
        let a = PI / (2.0 * ramp);
        -a * (2.0 * a * (end - t_cycles)).sin()
    }
}

/// Unwindowed complex amplitudes a± with A±(z,t) = Re(a± e^{i(±kz − ωt)}).
fn beam_amplitudes(field: &FieldParams) -> (CVec3, CVec3) {
    // a = E/(iω) · J, so that −∂A/∂t reproduces Re(E J e^{i(±kz−ωt)})
    let scale = C64::new(0.0, -field.e_peak / field.omega);
    let plus = JonesAmplitude::from_angle(field.alpha_plus).vector().map(|c| scale * c);
    let minus = JonesAmplitude::from_angle(field.alpha_minus).vector().map(|c| scale * c);
    (plus, minus)
}

/// Fourier components of the windowed vector potential at `t_cycles`.
pub fn potential_at(t_cycles: f64, field: &FieldParams, window: &WindowParams) -> FourierPotential {
    let f = envelope(t_cycles, window);
    if f == 0.0 || field.e_peak == 0.0 {
        return FourierPotential::zero();
    }
    let (a_plus, a_minus) = beam_amplitudes(field);
    let carrier = C64::from_polar(0.5 * f, -TAU * t_cycles);
    FourierPotential {
        c_plus_k: a_plus.map(|c| c * carrier),
        c_minus_k: a_minus.map(|c| c * carrier),
    }
}

/// Real vector potential A(z, t) in units of m₀/e.
pub fn vector_potential_at(z: f64, t_cycles: f64, field: &FieldParams, window: &WindowParams) -> [f64; 3] {
    potential_at(t_cycles, field, window).eval(field.wavenumber(), z)
}

/// Electric field −∂A/∂t in units of E_S, including the envelope-derivative
/// term during the ramps.
pub fn electric_field_at(z: f64, t_cycles: f64, field: &FieldParams, window: &WindowParams) -> [f64; 3] {
    let f = envelope(t_cycles, window);
    let df_dt = envelope_rate(t_cycles, window) * field.omega / TAU;
    if (f == 0.0 && df_dt == 0.0) || field.e_peak == 0.0 {
        return [0.0; 3];
    }
    let (a_plus, a_minus) = beam_amplitudes(field);
    let k = field.wavenumber();
    let phase = -TAU * t_cycles;
    let w = C64::new(0.0, field.omega);
    let mut e = [0.0; 3];
    for (a, dir) in [(a_plus, 1.0), (a_minus, -1.0)] {
        let carrier = C64::from_polar(1.0, dir * k * z + phase);
        for i in 0..3 {
            let mono = a[i] * carrier;
            // −∂/∂t [f Re(a e^{iθ})] = −f' Re(a e^{iθ}) + f Re(iω a e^{iθ})
            e[i] += -df_dt * mono.re + f * (w * mono).re;
        }
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physconfig::HelicityRelation;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn window() -> WindowParams {
        WindowParams { ramp_cycles: 2, plateau_cycles: 3 }
    }

    fn field(alpha: f64, rel: HelicityRelation) -> FieldParams {
        FieldParams::new(0.746, 0.3769, alpha, rel)
    }

    fn norm(v: &CVec3) -> f64 {
        v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn envelope_examples() {
        let w = WindowParams { ramp_cycles: 4, plateau_cycles: 6 };
        assert_eq!(envelope(0.0, &w), 0.0);
        assert!((envelope(2.0, &w) - 0.5).abs() < 1e-15);
        assert_eq!(envelope(4.0 + 3.0, &w), 1.0);
        assert_eq!(envelope(14.0, &w), 0.0);
        assert_eq!(envelope(-1.0, &w), 0.0);
        assert_eq!(envelope(20.0, &w), 0.0);
        // mirror symmetric turn-off
        for t in [0.3, 1.7, 3.9] {
            assert!((envelope(t, &w) - envelope(14.0 - t, &w)).abs() < 1e-14);
        }
    }

    #[test]
    fn envelope_is_continuous_at_joints() {
        let w = window();
        for joint in [0.0, 2.0, 5.0, 7.0] {
            for eps in [1e-4, 1e-6, 1e-8] {
                let jump = (envelope(joint + eps, &w) - envelope(joint - eps, &w)).abs();
                assert!(jump < 10.0 * eps, "joint {joint} eps {eps} jump {jump}");
            }
        }
    }

    #[test]
    fn envelope_rate_matches_finite_difference() {
        let w = window();
        for t in [0.1, 0.9, 1.5, 3.0, 5.5, 6.9] {
            let h = 1e-6;
            let fd = (envelope(t + h, &w) - envelope(t - h, &w)) / (2.0 * h);
            assert!((fd - envelope_rate(t, &w)).abs() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn potential_vanishes_outside_window() {
        let f = field(0.3, HelicityRelation::Same);
        assert!(potential_at(0.0, &f, &window()).is_zero());
        assert!(potential_at(7.0, &f, &window()).is_zero());
        assert!(potential_at(-3.0, &f, &window()).is_zero());
    }

    #[test]
    fn linear_polarization_component_magnitudes() {
        let f = field(FRAC_PI_4, HelicityRelation::Opposite);
        let p = potential_at(3.3, &f, &window());
        let expected = f.e_peak / (2.0 * f.omega);
        assert!((norm(&p.c_plus_k) - expected).abs() < 1e-14);
        assert!((norm(&p.c_minus_k) - expected).abs() < 1e-14);
    }

    #[test]
    fn peak_potential_equals_xi_for_linear_beam() {
        // one beam only: the other amplitude set to zero by hand
        let f = field(FRAC_PI_4, HelicityRelation::Opposite);
        let w = WindowParams { ramp_cycles: 1, plateau_cycles: 4 };
        let mut peak: f64 = 0.0;
        for i in 0..2000 {
            let t = 1.0 + 4.0 * i as f64 / 2000.0;
            let mut p = potential_at(t, &f, &w);
            p.c_minus_k = ZERO3;
            let a = p.eval(f.wavenumber(), 0.37);
            peak = peak.max(a.iter().map(|x| x * x).sum::<f64>().sqrt());
        }
        assert!((peak - f.xi()).abs() < 1e-5 * f.xi(), "peak {peak} xi {}", f.xi());
    }

    #[test]
    fn potential_is_real_and_transverse() {
        let f = field(0.2 * FRAC_PI_4, HelicityRelation::Same);
        for t in [0.4, 2.5, 6.1] {
            let p = potential_at(t, &f, &window());
            assert_eq!(p.c_plus_k[2], C64::new(0.0, 0.0));
            assert_eq!(p.c_minus_k[2], C64::new(0.0, 0.0));
            for j in 0..32 {
                let z = j as f64 * 0.37;
                let a = p.eval_complex(f.wavenumber(), z);
                let scale = a.iter().map(|c| c.re.abs()).fold(f.xi(), f64::max);
                for c in a {
                    assert!(c.im.abs() < 1e-14 * scale);
                }
                assert_eq!(a[2].re, 0.0);
            }
        }
    }

    #[test]
    fn helicity_swap_exchanges_circular_components() {
        for alpha in [0.0, 0.1, 0.7, FRAC_PI_4, 1.3] {
            let a = JonesAmplitude::from_angle(alpha);
            let b = JonesAmplitude::from_angle(FRAC_PI_2 - alpha);
            assert!((a.c_left - b.c_right).norm() < 1e-15);
            assert!((a.c_right - b.c_left).norm() < 1e-15);
        }
    }

    #[test]
    fn circular_beam_rotates_with_constant_magnitude() {
        // Re(E|l⟩e^{-iωt}) has magnitude E/√2
        let f = field(0.0, HelicityRelation::Opposite);
        let expected = f.e_peak * FRAC_1_SQRT_2;
        let mut angles = Vec::new();
        for i in 0..8 {
            let t = 2.0 + i as f64 / 8.0;
            let e = single_beam_field(&f, t, 0.0);
            let mag = (e[0] * e[0] + e[1] * e[1]).sqrt();
            assert!((mag - expected).abs() < 1e-13, "mag {mag}");
            assert_eq!(e[2], 0.0);
            angles.push(e[1].atan2(e[0]));
        }
        // rotates by 2π/8 per eighth cycle
        for pair in angles.windows(2) {
            let d = (pair[1] - pair[0]).rem_euclid(TAU);
            assert!((d - TAU / 8.0).abs() < 1e-12 || (d - (TAU - TAU / 8.0)).abs() < 1e-12);
        }
    }

    fn single_beam_field(f: &FieldParams, t: f64, z: f64) -> [f64; 3] {
        let (a, _) = beam_amplitudes(f);
        let carrier = C64::from_polar(1.0, f.wavenumber() * z - TAU * t);
        let w = C64::new(0.0, f.omega);
        [0, 1, 2].map(|i| (w * a[i] * carrier).re)
    }

    #[test]
    fn electric_field_matches_finite_difference_of_potential() {
        let f = field(0.3, HelicityRelation::Same);
        let w = window();
        let z = 0.81;
        let period = f.period();
        for t in [0.37, 1.2, 3.4, 5.9] {
            let exact = electric_field_at(z, t, &f, &w);
            let mut errs = Vec::new();
            for h in [1e-3, 5e-4] {
                let ap = vector_potential_at(z, t + h, &f, &w);
                let am = vector_potential_at(z, t - h, &f, &w);
                let fd = [0, 1, 2].map(|i| -(ap[i] - am[i]) / (2.0 * h * period));
                errs.push((0..3).map(|i| (fd[i] - exact[i]).abs()).fold(0.0, f64::max));
            }
            assert!(errs[0] < 1e-4);
            // second order: halving h quarters the error
            let ratio = errs[0] / errs[1];
            assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio} at t={t}");
        }
    }

    #[test]
    fn zero_envelope_gives_zero_field() {
        let f = field(0.3, HelicityRelation::Same);
        assert_eq!(electric_field_at(0.2, 0.0, &f, &window()), [0.0; 3]);
        assert_eq!(electric_field_at(0.2, 9.0, &f, &window()), [0.0; 3]);
    }
}
