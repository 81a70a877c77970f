//! Photon-count statistics of phase-randomized coherent pulses.
//!
//! A pulse of mean photon number N at polarization angle φ, analyzed in the
//! fixed horizontal/vertical basis, yields independent Poisson counts with
//! means N·cos²φ and N·sin²φ. The vacuum pair (0, 0) carries no angle
//! information and is excluded wherever an estimate is required; the
//! non-vacuum conditioning supplies the 1/(1−e^{−N}) normalization of the
//! count distribution.
//!
//! One sometimes-quoted variant of this distribution squares the count
//! exponents (2n_H, 2n_V); that form does not sum to one, so the standard
//! linear-exponent Poisson product is implemented here and its normalization
//! is asserted in the tests.

use serde::{Deserialize, Serialize};

use crate::angle::PolarizationAngle;
use crate::error::{Error, Result};
use crate::numeric::ln_factorial;
use crate::rng::RngStream;

/// Photon counts from the two ports of a polarization analyzer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhotonCounts {
    pub n_h: u64,
    pub n_v: u64,
}

impl PhotonCounts {
    pub const VACUUM: Self = Self { n_h: 0, n_v: 0 };

    pub fn new(n_h: u64, n_v: u64) -> Self {
        Self { n_h, n_v }
    }

    pub fn total(self) -> u64 {
        self.n_h + self.n_v
    }

    /// A count pair is conclusive when at least one photon arrived.
    pub fn conclusive(self) -> bool {
        self.total() >= 1
    }
}

/// Outcome of a binary polarization measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasuredBit {
    Zero,
    One,
    Inconclusive,
}

impl MeasuredBit {
    pub fn conclusive(self) -> bool {
        !matches!(self, MeasuredBit::Inconclusive)
    }

    pub fn matches_bit(self, bit: u8) -> bool {
        matches!(
            (self, bit),
            (MeasuredBit::Zero, 0) | (MeasuredBit::One, 1)
        )
    }
}

/// Majority vote between the analyzer ports. Ties — including vacuum — are
/// inconclusive rather than coin-flipped, which keeps a noiseless channel at
/// exactly zero error rate.
pub fn measure_bit(counts: PhotonCounts) -> MeasuredBit {
    use std::cmp::Ordering::*;
    match counts.n_h.cmp(&counts.n_v) {
        Greater => MeasuredBit::Zero,
        Less => MeasuredBit::One,
        Equal => MeasuredBit::Inconclusive,
    }
}

/// Draws (n_H, n_V) for a pulse of mean `mean_n` at angle `phi`:
/// n_H ~ Poisson(N cos²φ) and n_V ~ Poisson(N sin²φ), independent.
pub fn sample_photon_counts(
    phi: PolarizationAngle,
    mean_n: f64,
    rng: &mut RngStream,
) -> Result<PhotonCounts> {
    if !mean_n.is_finite() || mean_n < 0.0 {
        return Err(Error::InvalidMean(mean_n));
    }
    let (c2, s2) = phi.port_probabilities();
    Ok(PhotonCounts {
        n_h: rng.poisson(mean_n * c2),
        n_v: rng.poisson(mean_n * s2),
    })
}

/// Draws a count pair conditioned on being non-vacuum, the conditioning under
/// which every angle estimate is defined. Splits a zero-truncated total
/// Poisson count binomially between the ports, which is distributionally
/// identical to redrawing vacuum pairs but costs O(1) redraws even at tiny
/// means.
pub fn sample_conclusive_counts(
    phi: PolarizationAngle,
    mean_n: f64,
    rng: &mut RngStream,
) -> Result<PhotonCounts> {
    if !mean_n.is_finite() || mean_n <= 0.0 {
        return Err(Error::InvalidMean(mean_n));
    }
    let n = rng.zero_truncated_poisson(mean_n);
    let (c2, _) = phi.port_probabilities();
    let n_h = rng.binomial(n, c2);
    Ok(PhotonCounts { n_h, n_v: n - n_h })
}

/// Probability of a conclusive count pair under the non-vacuum-conditioned
/// Poisson product:
/// e^{−N} (N cos²φ)^{n_H} (N sin²φ)^{n_V} / (n_H! n_V! (1 − e^{−N})).
pub fn photon_count_pmf(
    counts: PhotonCounts,
    phi: PolarizationAngle,
    mean_n: f64,
) -> Result<f64> {
    if !mean_n.is_finite() || mean_n <= 0.0 {
        return Err(Error::InvalidMean(mean_n));
    }
    if !counts.conclusive() {
        return Err(Error::VacuumCounts);
    }
    let (c2, s2) = phi.port_probabilities();
    let mean_h = mean_n * c2;
    let mean_v = mean_n * s2;
    if (counts.n_h > 0 && mean_h == 0.0) || (counts.n_v > 0 && mean_v == 0.0) {
        return Ok(0.0);
    }
    // log space; ln(1 − e^{−N}) via expm1 for stability at small N
    let mut logp = -mean_n - (-(-mean_n).exp_m1()).ln();
    if counts.n_h > 0 {
        logp += counts.n_h as f64 * mean_h.ln() - ln_factorial(counts.n_h);
    }
    if counts.n_v > 0 {
        logp += counts.n_v as f64 * mean_v.ln() - ln_factorial(counts.n_v);
    }
    Ok(logp.exp())
}

/// Fixed-basis polarization estimate with the correct-quadrant attribution.
///
/// The principal estimate tan²φ̂₀ = n_V/n_H lives on [0, π/2]; it is mapped
/// into the quadrant of `true_angle` by the unique reflection/translation
/// that preserves (cos², sin²). Granting the estimator the true quadrant is
/// the analysis idealization that effectively doubles the photons available
/// for estimation.
pub fn estimate_angle(
    counts: PhotonCounts,
    true_angle: PolarizationAngle,
) -> Result<PolarizationAngle> {
    if !counts.conclusive() {
        return Err(Error::VacuumCounts);
    }
    const QUADRANT: u64 = 1 << 62;
    let principal: u64 = if counts.n_h == 0 {
        QUADRANT // vertical axis
    } else if counts.n_v == 0 {
        0 // horizontal axis
    } else {
        let p = (counts.n_v as f64).sqrt().atan2((counts.n_h as f64).sqrt());
        let frac = p / std::f64::consts::FRAC_PI_2;
        (frac * QUADRANT as f64).round() as u64
    };
    let bam = match true_angle.quadrant() {
        0 => principal,
        1 => (1u64 << 63) - principal,
        2 => (1u64 << 63) + principal,
        _ => principal.wrapping_neg(), // 2^64 − principal, wrapping to 0 on the axis
    };
    Ok(PolarizationAngle::from_bam(bam))
}
