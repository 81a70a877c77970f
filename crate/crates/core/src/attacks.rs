//! Eavesdropper strategies as per-traversal hooks.
//!
//! Three strategies are modeled, all incoherent (Eve measures before any
//! classical postprocessing):
//!
//! * **Intercept-resend** — Eve absorbs each stage's pulse entirely, estimates
//!   its angle in the fixed basis, and injects a fresh pulse toward the
//!   receiver at the normal arrival power. Two resend policies exist: the
//!   idealized one resends at the original angle (the analysis
//!   overestimation, which leaves the legitimate parties' statistics
//!   untouched) and the operational one resends at her estimate, which is
//!   what a physical Eve could actually do and what leaks errors into Bob's
//!   bits.
//! * **Photon-number splitting** — Eve beam-splits a fraction off each pulse
//!   and forwards the remainder over her own lossless line. With the tap
//!   fraction set to the channel loss 1−t her presence is invisible to
//!   intensity monitoring.
//! * **Man-in-the-middle** — Eve severs the channel and plays both roles at
//!   once: she keeps Alice's pulse, answers Bob with her own pulse at her
//!   stage-1 estimate, rotates the kept pulse by her estimate of Bob's angle
//!   when returning it to Alice, and forwards Alice's final pulse to Bob while
//!   skimming what channel loss entitles her to. Every power she delivers
//!   equals what the legitimate parties expect, so only the in-protocol
//!   authentication can reveal her.
//!
//! Beam splitting acts on Poisson means exactly (thinning), so `tap_pulse`
//! conserves mean photon number to the last bit.

use serde::{Deserialize, Serialize};

use crate::angle::PolarizationAngle;
use crate::error::{Error, Result};
use crate::photon::{
    estimate_angle, measure_bit, sample_photon_counts, MeasuredBit, PhotonCounts,
};
use crate::rng::RngStream;

/// Which eavesdropper strategy is active for a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttackKind {
    None,
    InterceptResend {
        #[serde(default)]
        resend: ResendPolicy,
    },
    PhotonNumberSplitting {
        /// Fraction Eve splits off at each traversal; defaults to 1−t, the
        /// largest tap hidden by channel loss.
        #[serde(default)]
        tap_fraction: Option<f64>,
    },
    ManInTheMiddle,
}

impl AttackKind {
    pub fn is_none(&self) -> bool {
        matches!(self, AttackKind::None)
    }

    pub fn validate(&self) -> Result<()> {
        if let AttackKind::PhotonNumberSplitting {
            tap_fraction: Some(f),
        } = self
        {
            if !f.is_finite() || !(0.0..=1.0).contains(f) {
                return Err(Error::OutOfRange {
                    name: "tap_fraction",
                    lo: 0.0,
                    hi: 1.0,
                    value: *f,
                });
            }
        }
        Ok(())
    }
}

/// What an intercept-resend Eve injects toward the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResendPolicy {
    /// Resend at the original angle — the analysis idealization.
    #[default]
    Idealized,
    /// Resend at the estimated angle — the physically realizable attack.
    Operational,
}

/// Named photon-budget scenarios for the stage-1/stage-2 estimates:
/// (N₁, N₂) as functions of the source mean N and transmittance t.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackScenario {
    IrLossless,
    IrLossy,
    PnsLossless,
    PnsLossy,
}

impl AttackScenario {
    pub const ALL: [AttackScenario; 4] = [
        AttackScenario::IrLossless,
        AttackScenario::IrLossy,
        AttackScenario::PnsLossless,
        AttackScenario::PnsLossy,
    ];

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "ir_lossless" => Ok(Self::IrLossless),
            "ir_lossy" => Ok(Self::IrLossy),
            "pns_lossless" => Ok(Self::PnsLossless),
            "pns_lossy" => Ok(Self::PnsLossy),
            other => Err(Error::InvalidArgument(format!(
                "unknown attack scenario '{other}' (expected ir_lossless, ir_lossy, pns_lossless or pns_lossy)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::IrLossless => "ir_lossless",
            Self::IrLossy => "ir_lossy",
            Self::PnsLossless => "pns_lossless",
            Self::PnsLossy => "pns_lossy",
        }
    }

    /// Mean photon numbers Eve can access in stages 1 and 2.
    pub fn budgets(self, mean_n: f64, transmittance: f64) -> (f64, f64) {
        let t = transmittance;
        match self {
            Self::IrLossless => (mean_n, mean_n),
            Self::IrLossy => (mean_n, t * mean_n),
            Self::PnsLossless => (0.5 * mean_n, 0.5 * mean_n),
            Self::PnsLossy => ((1.0 - t) * mean_n, (1.0 - t) * t * mean_n),
        }
    }
}

/// Eve's per-pulse observations and decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EveState {
    pub counts_stage1: Option<PhotonCounts>,
    pub counts_stage2: Option<PhotonCounts>,
    pub phi1_hat: Option<PolarizationAngle>,
    pub theta_b_hat: Option<PolarizationAngle>,
    pub eve_bit: MeasuredBit,
}

impl Default for EveState {
    fn default() -> Self {
        Self {
            counts_stage1: None,
            counts_stage2: None,
            phi1_hat: None,
            theta_b_hat: None,
            eve_bit: MeasuredBit::Inconclusive,
        }
    }
}

/// Eve's working state for one pulse: her recorded estimates plus whatever
/// physical pulse she is holding (MIM keeps Alice's stage-1 remainder to
/// return it rotated in stage 2).
#[derive(Debug, Clone, Default)]
pub struct EveAgent {
    pub state: EveState,
    held_mean: f64,
    held_angle: Option<PolarizationAngle>,
}

/// Protocol traversal index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    One,
    Two,
    Three,
}

/// Beam-splitter tap on a phase-randomized coherent pulse: exact Poisson
/// thinning of the mean. Conserves the mean photon number exactly:
/// `eve + forwarded == pulse_mean` bit-for-bit, because the smaller share is
/// rederived as the complement of the larger one — that subtraction is exact
/// (Sterbenz) once the larger share is at least half the mean.
pub fn tap_pulse(pulse_mean: f64, fraction: f64) -> Result<(f64, f64)> {
    if !fraction.is_finite() || !(0.0..=1.0).contains(&fraction) {
        return Err(Error::OutOfRange {
            name: "tap fraction",
            lo: 0.0,
            hi: 1.0,
            value: fraction,
        });
    }
    let eve = fraction * pulse_mean;
    if fraction > 0.5 {
        Ok((eve, pulse_mean - eve))
    } else {
        let forwarded = pulse_mean - eve;
        Ok((pulse_mean - forwarded, forwarded))
    }
}

/// Eve's bit decision from stage-3 counts taken in her basis (rotated by
/// θ̂_B): a majority vote, inconclusive when her estimates are missing or the
/// vote ties.
pub fn eve_bit_decision(state: &EveState, stage3_counts: PhotonCounts) -> MeasuredBit {
    if state.phi1_hat.is_none() || state.theta_b_hat.is_none() {
        return MeasuredBit::Inconclusive;
    }
    measure_bit(stage3_counts)
}

fn lab_estimate(counts: PhotonCounts, incident: PolarizationAngle) -> Option<PolarizationAngle> {
    counts
        .conclusive()
        .then(|| estimate_angle(counts, incident).expect("conclusive counts"))
}

/// One intercept-resend traversal: Eve absorbs the full pulse, records her
/// estimate, and injects a fresh pulse at the normal arrival power t·mean.
/// Stage 3 is measured in her θ̂_B-rotated basis and fixes her bit guess.
pub fn ir_attack_step(
    stage: Stage,
    incident_mean: f64,
    incident_angle: PolarizationAngle,
    transmittance: f64,
    resend: ResendPolicy,
    agent: &mut EveAgent,
    rng: &mut RngStream,
) -> (f64, PolarizationAngle) {
    let forwarded_mean = transmittance * incident_mean;
    match stage {
        Stage::One | Stage::Two => {
            let counts = sample_photon_counts(incident_angle, incident_mean, rng)
                .expect("validated mean");
            let est = lab_estimate(counts, incident_angle);
            match stage {
                Stage::One => {
                    agent.state.counts_stage1 = Some(counts);
                    agent.state.phi1_hat = est;
                }
                _ => {
                    agent.state.counts_stage2 = Some(counts);
                    agent.state.theta_b_hat = match (agent.state.phi1_hat, est) {
                        (Some(p1), Some(p2)) => Some(p2 - p1),
                        _ => None,
                    };
                }
            }
            let angle_out = match resend {
                ResendPolicy::Idealized => incident_angle,
                ResendPolicy::Operational => est.unwrap_or(incident_angle),
            };
            (forwarded_mean, angle_out)
        }
        Stage::Three => {
            match agent.state.theta_b_hat {
                Some(basis) if agent.state.phi1_hat.is_some() => {
                    let counts = sample_photon_counts(incident_angle - basis, incident_mean, rng)
                        .expect("validated mean");
                    agent.state.eve_bit = eve_bit_decision(&agent.state, counts);
                    let angle_out = match resend {
                        ResendPolicy::Idealized => incident_angle,
                        ResendPolicy::Operational => lab_estimate(counts, incident_angle - basis)
                            .map(|rotated| basis + rotated)
                            .unwrap_or(incident_angle),
                    };
                    (forwarded_mean, angle_out)
                }
                _ => {
                    // no usable basis: no bit; operational Eve falls back to a
                    // lab-basis estimate for the resend
                    let counts = sample_photon_counts(incident_angle, incident_mean, rng)
                        .expect("validated mean");
                    let angle_out = match resend {
                        ResendPolicy::Idealized => incident_angle,
                        ResendPolicy::Operational => {
                            lab_estimate(counts, incident_angle).unwrap_or(incident_angle)
                        }
                    };
                    (forwarded_mean, angle_out)
                }
            }
        }
    }
}

/// One photon-number-splitting traversal: Eve siphons `tap_fraction` of the
/// mean and forwards the rest over her lossless line, so the receiver sees
/// (1−f)·mean. Stage 3 is measured in the θ̂_B basis for her bit.
pub fn pns_attack_step(
    stage: Stage,
    incident_mean: f64,
    incident_angle: PolarizationAngle,
    tap_fraction: f64,
    agent: &mut EveAgent,
    rng: &mut RngStream,
) -> (f64, PolarizationAngle) {
    let (eve_mean, forwarded_mean) = tap_pulse(incident_mean, tap_fraction).expect("validated");
    match stage {
        Stage::One => {
            let counts =
                sample_photon_counts(incident_angle, eve_mean, rng).expect("validated mean");
            agent.state.counts_stage1 = Some(counts);
            agent.state.phi1_hat = lab_estimate(counts, incident_angle);
        }
        Stage::Two => {
            let counts =
                sample_photon_counts(incident_angle, eve_mean, rng).expect("validated mean");
            agent.state.counts_stage2 = Some(counts);
            agent.state.theta_b_hat =
                match (agent.state.phi1_hat, lab_estimate(counts, incident_angle)) {
                    (Some(p1), Some(p2)) => Some(p2 - p1),
                    _ => None,
                };
        }
        Stage::Three => {
            if let Some(basis) = agent.state.theta_b_hat {
                let counts = sample_photon_counts(incident_angle - basis, eve_mean, rng)
                    .expect("validated mean");
                agent.state.eve_bit = eve_bit_decision(&agent.state, counts);
            }
        }
    }
    (forwarded_mean, incident_angle)
}

/// One man-in-the-middle traversal.
///
/// Stage 1: keep t²·mean of Alice's pulse, estimate φ̂₁ from the remaining
/// (1−t²)·mean (a uniformly random angle when the tap is vacuum), and answer
/// Bob with a fresh pulse of mean t·N at φ̂₁.
/// Stage 2: tap (1−t²) of Bob's pulse for θ̂_B = φ̂₂ − φ̂₁ (random on vacuum),
/// then return the kept pulse to Alice rotated by θ̂_B.
/// Stage 3: skim the loss allowance (1−t) off Alice's pulse, read the bit in
/// the θ̂_B basis, and forward the rest to Bob — who receives the bit without
/// error whenever θ̂_B was right.
pub fn mim_attack_step(
    stage: Stage,
    incident_mean: f64,
    incident_angle: PolarizationAngle,
    transmittance: f64,
    agent: &mut EveAgent,
    rng: &mut RngStream,
) -> (f64, PolarizationAngle) {
    let t = transmittance;
    match stage {
        Stage::One => {
            let eve_mean = (1.0 - t * t) * incident_mean;
            agent.held_mean = incident_mean - eve_mean;
            agent.held_angle = Some(incident_angle);
            let counts =
                sample_photon_counts(incident_angle, eve_mean, rng).expect("validated mean");
            agent.state.counts_stage1 = Some(counts);
            let phi1_hat = lab_estimate(counts, incident_angle)
                .unwrap_or_else(|| PolarizationAngle::from_bam(rng.next_u64()));
            agent.state.phi1_hat = Some(phi1_hat);
            (t * incident_mean, phi1_hat)
        }
        Stage::Two => {
            let eve_mean = (1.0 - t * t) * incident_mean;
            let counts =
                sample_photon_counts(incident_angle, eve_mean, rng).expect("validated mean");
            agent.state.counts_stage2 = Some(counts);
            let theta_b_hat = lab_estimate(counts, incident_angle)
                .map(|phi2_hat| phi2_hat - agent.state.phi1_hat.expect("set in stage 1"))
                .unwrap_or_else(|| PolarizationAngle::from_bam(rng.next_u64()));
            agent.state.theta_b_hat = Some(theta_b_hat);
            let held_angle = agent.held_angle.expect("set in stage 1");
            (agent.held_mean, held_angle + theta_b_hat)
        }
        Stage::Three => {
            let basis = agent.state.theta_b_hat.expect("set in stage 2");
            let (eve_mean, forwarded_mean) =
                tap_pulse(incident_mean, 1.0 - t).expect("validated");
            let counts = sample_photon_counts(incident_angle - basis, eve_mean, rng)
                .expect("validated mean");
            agent.state.eve_bit = eve_bit_decision(&agent.state, counts);
            (forwarded_mean, incident_angle)
        }
    }
}
