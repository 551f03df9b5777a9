//! Units, parameter conversions and the validated run configuration.
//!
//! Everything internal is in natural units with ħ = c = m₀ = 1. Field
//! strengths are stored as fractions of the critical field E_S, so the
//! vector potential amplitude eA/m₀ of one beam is e_peak / omega = ξ.

use std::f64::consts::{FRAC_PI_2, TAU};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result, Violation};

/// Critical field strength in V/m used for unit conversion.
pub const SCHWINGER_FIELD_V_PER_M: f64 = 1.3e18;

const ANGLE_TOLERANCE: f64 = 1e-12;

/// Relation between the two beams' polarization angles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HelicityRelation {
    /// α₊ = π/2 − α₋: both beams carry the same helicity.
    Same,
    /// α₊ = α₋: the beams carry opposite helicity.
    Opposite,
}

impl HelicityRelation {
    /// The angle of the counterpropagating beam implied by this relation.
    pub fn partner_angle(self, alpha_plus: f64) -> f64 {
        match self {
            HelicityRelation::Same => FRAC_PI_2 - alpha_plus,
            HelicityRelation::Opposite => alpha_plus,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldParams {
    /// Laser angular frequency in units of m₀.
    pub omega: f64,
    /// Peak electric field as a fraction of E_S.
    pub e_peak: f64,
    pub alpha_plus: f64,
    pub alpha_minus: f64,
    pub helicity_relation: HelicityRelation,
}

impl FieldParams {
    /// Builds field parameters with α₋ derived from the helicity relation.
    pub fn new(omega: f64, e_peak: f64, alpha_plus: f64, relation: HelicityRelation) -> Self {
        Self {
            omega,
            e_peak,
            alpha_plus,
            alpha_minus: relation.partner_angle(alpha_plus),
            helicity_relation: relation,
        }
    }

    pub fn xi(&self) -> f64 {
        xi(self)
    }

    /// |k±| = ω for light-like waves.
    pub fn wavenumber(&self) -> f64 {
        self.omega
    }

    /// One laser period in units of ħ/m₀.
    pub fn period(&self) -> f64 {
        TAU / self.omega
    }

    pub fn e_peak_si(&self) -> f64 {
        self.e_peak * SCHWINGER_FIELD_V_PER_M
    }

    /// Copy with a new α₊, keeping the helicity relation.
    pub fn with_alpha_plus(&self, alpha_plus: f64) -> Self {
        Self::new(self.omega, self.e_peak, alpha_plus, self.helicity_relation)
    }

    fn check(&self, out: &mut Vec<Violation>) {
        if !(self.omega.is_finite() && self.omega > 0.0) {
            out.push(Violation::new("field.omega", "omega > 0"));
        }
        if !(self.e_peak.is_finite() && self.e_peak >= 0.0) {
            out.push(Violation::new("field.e_peak", "e_peak must be finite and non-negative"));
        }
        let mut angles_ok = true;
        for (path, a) in [("field.alpha_plus", self.alpha_plus), ("field.alpha_minus", self.alpha_minus)] {
            if !(a.is_finite() && (0.0..=FRAC_PI_2).contains(&a)) {
                out.push(Violation::new(path, "alpha range: 0 <= alpha <= pi/2"));
                angles_ok = false;
            }
        }
        if angles_ok {
            let expected = self.helicity_relation.partner_angle(self.alpha_plus);
            if (expected - self.alpha_minus).abs() > ANGLE_TOLERANCE {
                out.push(Violation::new(
                    "field.helicity_relation",
                    format!(
                        "alpha_minus = {} inconsistent with {:?} helicity (expected {})",
                        self.alpha_minus, self.helicity_relation, expected
                    ),
                ));
            }
        }
    }
}

/// Classical nonlinearity parameter ξ = eE/(m₀cω) = (E/E_S)/(ω/m₀).
pub fn xi(field: &FieldParams) -> f64 {
    field.e_peak / field.omega
}

/// Converts an SI peak field strength to [`FieldParams`].
pub fn field_from_si(
    e_volts_per_meter: f64,
    omega_in_m0: f64,
    alpha_plus: f64,
    relation: HelicityRelation,
) -> Result<FieldParams> {
    if !(e_volts_per_meter.is_finite() && e_volts_per_meter > 0.0) {
        return Err(Error::InvalidInput(format!(
            "field strength must be positive, got {e_volts_per_meter} V/m"
        )));
    }
    if !(omega_in_m0.is_finite() && omega_in_m0 > 0.0) {
        return Err(Error::InvalidInput(format!("omega must be positive, got {omega_in_m0}")));
    }
    Ok(FieldParams::new(
        omega_in_m0,
        e_volts_per_meter / SCHWINGER_FIELD_V_PER_M,
        alpha_plus,
        relation,
    ))
}

/// sin²-shaped turn-on/off of `ramp_cycles` around a flat plateau.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WindowParams {
    pub ramp_cycles: u32,
    pub plateau_cycles: u32,
}

impl WindowParams {
    pub fn total_cycles(&self) -> u32 {
        2 * self.ramp_cycles + self.plateau_cycles
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericsParams {
    /// Momentum modes n ∈ [−n_cut, n_cut].
    pub n_cut: usize,
    pub steps_per_cycle: usize,
    /// Subspace momentum origin k₀ in units of m₀.
    #[serde(default)]
    pub k0_offset: [f64; 3],
    /// Minimum |ω_mn|² for a single pair to be retained.
    pub prune_threshold: f64,
    pub n_sector_max: usize,
}

impl NumericsParams {
    /// Numerical knobs at their documented defaults for a given truncation.
    pub fn with_cutoff(n_cut: usize) -> Self {
        Self {
            n_cut,
            steps_per_cycle: 1024,
            k0_offset: [0.0; 3],
            prune_threshold: 1e-6,
            n_sector_max: 6,
        }
    }

    /// Number of single-particle modes, 4·(2·n_cut + 1).
    pub fn basis_len(&self) -> usize {
        4 * (2 * self.n_cut + 1)
    }

    fn check(&self, out: &mut Vec<Violation>) {
        if self.n_cut < 1 {
            out.push(Violation::new("numerics.n_cut", "n_cut >= 1"));
        }
        if self.steps_per_cycle < 16 {
            out.push(Violation::new("numerics.steps_per_cycle", "steps_per_cycle >= 16"));
        }
        if self.k0_offset.iter().any(|x| !x.is_finite()) {
            out.push(Violation::new("numerics.k0_offset", "k0 components must be finite"));
        }
        if !(self.prune_threshold >= 0.0 && self.prune_threshold < 1.0) {
            out.push(Violation::new("numerics.prune_threshold", "0 <= prune_threshold < 1"));
        }
        if !(1..=8).contains(&self.n_sector_max) {
            out.push(Violation::new("numerics.n_sector_max", "1 <= n_sector_max <= 8"));
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub field: FieldParams,
    pub window: WindowParams,
    pub numerics: NumericsParams,
}

impl RunConfig {
    pub fn validate(self) -> Result<Self> {
        let violations = self.violations();
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(Error::Validation(violations))
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        self.field.check(&mut out);
        if self.window.ramp_cycles < 1 {
            out.push(Violation::new("window.ramp_cycles", "ramp_cycles >= 1"));
        }
        self.numerics.check(&mut out);
        out
    }

    /// Parses and validates a JSON document with keys `field`, `window`, `numerics`.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(s)?;
        cfg.validate()
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Content hash (SHA-256 of the compact JSON form), hex encoded.
    pub fn hash_hex(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Same configuration with the external field switched off.
    pub fn field_free(&self) -> Self {
        let mut c = self.clone();
        c.field.e_peak = 0.0;
        c
    }
}

/// Validates a configuration, returning it unchanged on success.
pub fn validate(config: RunConfig) -> Result<RunConfig> {
    config.validate()
}
