//! Wrapped polarization angles.
//!
//! Angles live on the full circle [0, 2π), matching the uniform 1/2π prior the
//! protocol analysis integrates over. Internally an angle is a binary fraction
//! of a turn stored in a `u64` (full turn = 2^64), so wrapping addition and
//! subtraction are native integer operations: they are exact, total,
//! commutative and associative. That is what lets the protocol's
//! transformation algebra (apply θ_A, θ_B, undo both, recover θ_X) hold
//! bit-for-bit instead of up to floating-point noise. Radians appear only at
//! the physics boundary (port probabilities, serialization), quantized to
//! 2^-64 of a turn — about 3.4e-19 rad, far below every statistical tolerance
//! in the project.

use std::f64::consts::TAU;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Radians spanned by one binary angle unit. Exact: division by a power of
/// two only shifts the exponent.
const RAD_PER_BAM: f64 = TAU / 18_446_744_073_709_551_616.0;
const BAM_PER_TURN: f64 = 18_446_744_073_709_551_616.0;
/// One quadrant (π/2) in binary angle units.
const QUADRANT: u64 = 1 << 62;

/// A linear-polarization direction on the agreed great circle, wrapped to
/// [0, 2π).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct PolarizationAngle(u64);

impl PolarizationAngle {
    pub const ZERO: Self = Self(0);
    /// π/2 — the vertical axis, and the alphabet separation of the protocol.
    pub const QUARTER_TURN: Self = Self(QUADRANT);
    /// π.
    pub const HALF_TURN: Self = Self(1 << 63);

    /// Wraps a radian value onto [0, 2π). Rejects non-finite input.
    pub fn from_radians(radians: f64) -> Result<Self> {
        if !radians.is_finite() {
            return Err(Error::NonFiniteAngle(radians));
        }
        let wrapped = radians.rem_euclid(TAU);
        let turns = wrapped / TAU;
        if turns >= 1.0 {
            // rem_euclid can round up to exactly 2π for inputs a hair below it
            return Ok(Self(0));
        }
        let scaled = turns * BAM_PER_TURN;
        Ok(Self(if scaled >= BAM_PER_TURN {
            u64::MAX
        } else {
            scaled as u64
        }))
    }

    /// Raw binary-angle value (turns scaled by 2^64).
    pub const fn bam(self) -> u64 {
        self.0
    }

    pub const fn from_bam(raw: u64) -> Self {
        Self(raw)
    }

    /// The angle in radians, guaranteed in [0, 2π).
    pub fn radians(self) -> f64 {
        let r = self.0 as f64 * RAD_PER_BAM;
        // `self.0 as f64` rounds up for the top few values of the last
        // quadrant; fold the sliver back (the circle is periodic).
        if r >= TAU {
            r - TAU
        } else {
            r
        }
    }

    /// Quadrant index 0..=3 (top two bits of the binary angle).
    pub const fn quadrant(self) -> u8 {
        (self.0 >> 62) as u8
    }

    /// (cos²φ, sin²φ) — the analyzer port probabilities. Exact 0/1 on the
    /// quadrant axes so that a pulse aligned with an analyzer axis never
    /// leaks a photon into the wrong port.
    pub fn port_probabilities(self) -> (f64, f64) {
        if self.0 & (QUADRANT - 1) == 0 {
            return if (self.0 >> 62) & 1 == 0 {
                (1.0, 0.0)
            } else {
                (0.0, 1.0)
            };
        }
        let c = self.radians().cos();
        let c2 = c * c;
        (c2, 1.0 - c2)
    }

    /// True when a wrapped angle *difference* flips the binary alphabet:
    /// the difference taken mod π lies strictly inside (π/4, 3π/4). Exact
    /// integer comparison; ties sit on the boundary and count as correct.
    pub const fn bit_error(self) -> bool {
        let half = self.0 % (1 << 63);
        half > (1 << 61) && half < 3 * (1 << 61)
    }
}

impl Add for PolarizationAngle {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self(self.0.wrapping_add(rhs.0))
    }
}

impl Sub for PolarizationAngle {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self(self.0.wrapping_sub(rhs.0))
    }
}

impl Neg for PolarizationAngle {
    type Output = Self;
    fn neg(self) -> Self {
        Self(self.0.wrapping_neg())
    }
}

impl Serialize for PolarizationAngle {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.radians())
    }
}

impl<'de> Deserialize<'de> for PolarizationAngle {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let radians = f64::deserialize(deserializer)?;
        Self::from_radians(radians).map_err(serde::de::Error::custom)
    }
}

/// Wraps a radian value onto [0, 2π). The canonical constructor for
/// [`PolarizationAngle`]; rejects non-finite input.
pub fn wrap_angle(radians: f64) -> Result<PolarizationAngle> {
    PolarizationAngle::from_radians(radians)
}

/// Binary-alphabet error condition on an estimate error Δ (radians):
/// cos(2Δ) < 0, i.e. Δ mod π strictly inside (π/4, 3π/4). Invariant under
/// Δ → Δ + π and Δ → −Δ; ties count as correct.
pub fn bit_error_condition(delta: f64) -> Result<bool> {
    if !delta.is_finite() {
        return Err(Error::NonFiniteAngle(delta));
    }
    Ok((2.0 * delta).cos() < 0.0)
}
