//! The three-stage protocol at pulse granularity.
//!
//! Per pulse: Alice draws a key bit X (polarization 0 or π/2) and a secret
//! rotation θ_A, and emits a coherent pulse of mean N at φ₁ = θ_X + θ_A. Bob
//! either retains the arrival for authentication or returns it with his own
//! rotation θ_B applied; Alice either retains that or returns it with θ_A
//! undone; Bob finally undoes θ_B and reads the bit in the {0, π/2} analyzer
//! basis. Each channel traversal thins the Poisson mean by the transmittance
//! t (exact for phase-randomized coherent states); an active attack replaces
//! the traversal with its own hook.
//!
//! After the pulse loop: pulses that completed all three stages and gave a
//! conclusive measurement are sifted; a random fraction of the sifted bits is
//! disclosed to estimate the error rate and removed from the key; retained
//! pulses are compared against the revealed transformations to bound the
//! fraction of man-in-the-middle activity.
//!
//! Everything is driven by per-pulse counter-based substreams of the session
//! seed, so a transcript is a pure function of (config, attack).

use serde::{Deserialize, Serialize};

use crate::angle::PolarizationAngle;
use crate::attacks::{
    ir_attack_step, mim_attack_step, pns_attack_step, AttackKind, EveAgent, EveState, Stage,
};
use crate::error::{Error, Result};
use crate::photon::{estimate_angle, sample_photon_counts, PhotonCounts};
pub use crate::photon::{measure_bit, MeasuredBit};
use crate::rng::RngStream;

pub const TRANSCRIPT_SCHEMA_VERSION: u32 = 1;

/// Stream id reserved for the error-rate disclosure draw (pulse i uses
/// stream i, so any pulse count below u64::MAX is collision-free).
const QBER_STREAM_ID: u64 = u64::MAX;

/// Run parameters for one protocol session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    /// Mean photon number N at Alice's source.
    pub mean_n: f64,
    /// Channel transmittance t per traversal.
    pub transmittance: f64,
    pub n_pulses: u64,
    /// Probability Bob retains a stage-1 arrival for authentication.
    #[serde(default = "default_retention")]
    pub p_auth_bob: f64,
    /// Probability Alice retains a stage-2 arrival for authentication.
    #[serde(default = "default_retention")]
    pub p_auth_alice: f64,
    /// Std-dev of a zero-mean Gaussian angle error at Bob's final analyzer
    /// (radians). Zero models perfect alignment.
    #[serde(default)]
    pub misalignment_sigma: f64,
    /// Fraction of the sifted key disclosed for error-rate estimation.
    #[serde(default = "default_qber_fraction")]
    pub qber_sample_fraction: f64,
    /// Optional abort threshold on the raw rate (bits/slot). No default
    /// enforcement; when set, the transcript flags sessions below it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_raw_rate: Option<f64>,
    pub seed: u64,
}

fn default_retention() -> f64 {
    0.1
}

fn default_qber_fraction() -> f64 {
    0.1
}

impl SessionConfig {
    /// Config with the default retention and disclosure fractions.
    pub fn new(mean_n: f64, transmittance: f64, n_pulses: u64, seed: u64) -> Self {
        Self {
            mean_n,
            transmittance,
            n_pulses,
            p_auth_bob: default_retention(),
            p_auth_alice: default_retention(),
            misalignment_sigma: 0.0,
            qber_sample_fraction: default_qber_fraction(),
            min_raw_rate: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !self.mean_n.is_finite() || self.mean_n <= 0.0 {
            return bad(format!("mean_n must be positive, got {}", self.mean_n));
        }
        if !self.transmittance.is_finite()
            || self.transmittance <= 0.0
            || self.transmittance > 1.0
        {
            return bad(format!(
                "transmittance must lie in (0, 1], got {}",
                self.transmittance
            ));
        }
        if self.n_pulses == 0 {
            return bad("n_pulses must be at least 1".into());
        }
        for (name, p) in [
            ("p_auth_bob", self.p_auth_bob),
            ("p_auth_alice", self.p_auth_alice),
            ("qber_sample_fraction", self.qber_sample_fraction),
        ] {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if !self.misalignment_sigma.is_finite() || self.misalignment_sigma < 0.0 {
            return bad(format!(
                "misalignment_sigma must be non-negative, got {}",
                self.misalignment_sigma
            ));
        }
        Ok(())
    }
}

/// What became of a pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fate {
    RetainedByBob,
    RetainedByAlice,
    Completed,
}

/// Full lifecycle of one pulse.
///
/// The stage angles obey φ₁ = θ_X + θ_A, φ₂ = φ₁ + θ_B and φ₃ = θ_X + θ_B
/// (wrapped); θ_A and θ_B are drawn for every pulse so the identities hold
/// uniformly even for retained pulses. Under an attack the recorded angles
/// remain the legitimate parties' nominal values — the attack's effect shows
/// up in counts and estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseRecord {
    pub bit: u8,
    pub theta_x: PolarizationAngle,
    pub theta_a: PolarizationAngle,
    pub theta_b: PolarizationAngle,
    pub phi1: PolarizationAngle,
    pub phi2: PolarizationAngle,
    pub phi3: PolarizationAngle,
    pub fate: Fate,
    /// Final analyzer counts; present only for completed pulses.
    pub bob_counts: Option<PhotonCounts>,
    /// Bob's measured bit; present only for completed pulses.
    pub bob_bit: Option<MeasuredBit>,
    /// The retaining party's angle estimate; absent when the retained pulse
    /// was vacuum (it then contributes nothing to authentication).
    pub auth_estimate: Option<PolarizationAngle>,
}

/// Per-side authentication comparison outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuthRate {
    pub errors: u64,
    pub samples: u64,
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AuthReport {
    pub bob: Option<AuthRate>,
    pub alice: Option<AuthRate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FateCounts {
    pub retained_by_bob: u64,
    pub retained_by_alice: u64,
    pub completed: u64,
}

/// Aggregate view of Eve's key extraction over completed pulses.
/// Inconclusive decisions count as coin flips in [`Self::agreement`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EveSummary {
    pub opportunities: u64,
    pub conclusive: u64,
    pub correct: u64,
}

impl EveSummary {
    /// Probability Eve's extracted bit agrees with X, scoring inconclusive
    /// decisions as random guesses.
    pub fn agreement(&self) -> Option<f64> {
        (self.opportunities > 0).then(|| {
            (self.correct as f64 + 0.5 * (self.opportunities - self.conclusive) as f64)
                / self.opportunities as f64
        })
    }

    /// Error rate over conclusive decisions only.
    pub fn conclusive_error_rate(&self) -> Option<f64> {
        (self.conclusive > 0).then(|| 1.0 - self.correct as f64 / self.conclusive as f64)
    }
}

/// Complete session history plus summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub schema_version: u32,
    pub config: SessionConfig,
    pub attack: AttackKind,
    pub fate_counts: FateCounts,
    /// Sifted-key pulse indices remaining after disclosure.
    pub sifted_bits: Vec<u64>,
    /// Indices disclosed (and discarded) for the error-rate estimate.
    pub disclosed: Vec<u64>,
    pub qber_estimate: f64,
    pub auth_error_rate_bob: Option<f64>,
    pub auth_error_rate_alice: Option<f64>,
    pub auth: AuthReport,
    /// Final key bits per pulse slot: |sifted after disclosure| / n_pulses.
    pub raw_rate: f64,
    /// Set when `min_raw_rate` is configured and the session fell below it.
    pub rate_abort: bool,
    pub eve: Option<EveSummary>,
    #[serde(default)]
    pub pulses: Vec<PulseRecord>,
}

impl Transcript {
    /// JSON document for export; the per-pulse array is included on request.
    pub fn to_json_value(&self, include_pulses: bool) -> serde_json::Value {
        let mut value = serde_json::to_value(self).expect("transcript serializes");
        if !include_pulses {
            value.as_object_mut().expect("object").remove("pulses");
        }
        value
    }
}

/// Runs a session and returns its transcript.
pub fn run_session(config: &SessionConfig, attack: &AttackKind) -> Result<Transcript> {
    Ok(run_session_detailed(config, attack)?.0)
}

/// Like [`run_session`], additionally returning Eve's per-pulse state for
/// diagnostics (empty under `AttackKind::None`).
pub fn run_session_detailed(
    config: &SessionConfig,
    attack: &AttackKind,
) -> Result<(Transcript, Vec<Option<EveState>>)> {
    config.validate()?;
    attack.validate()?;

    let n = config.n_pulses;
    let mut pulses = Vec::with_capacity(n as usize);
    let mut eve_states = Vec::with_capacity(if attack.is_none() { 0 } else { n as usize });
    let mut fate_counts = FateCounts::default();
    let mut eve_summary = (!attack.is_none()).then(EveSummary::default);

    for i in 0..n {
        let mut rng = RngStream::new(config.seed, i);
        let (record, eve) = run_pulse(config, attack, &mut rng);
        match record.fate {
            Fate::RetainedByBob => fate_counts.retained_by_bob += 1,
            Fate::RetainedByAlice => fate_counts.retained_by_alice += 1,
            Fate::Completed => fate_counts.completed += 1,
        }
        if let (Some(summary), Some(state)) = (eve_summary.as_mut(), eve.as_ref()) {
            if record.fate == Fate::Completed {
                summary.opportunities += 1;
                if state.eve_bit.conclusive() {
                    summary.conclusive += 1;
                    if state.eve_bit.matches_bit(record.bit) {
                        summary.correct += 1;
                    }
                }
            }
        }
        if !attack.is_none() {
            eve_states.push(eve);
        }
        pulses.push(record);
    }

    let sifted: Vec<u64> = pulses
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            p.fate == Fate::Completed && p.bob_bit.map(MeasuredBit::conclusive).unwrap_or(false)
        })
        .map(|(i, _)| i as u64)
        .collect();

    let disclosure = if sifted.is_empty() {
        QberDisclosure {
            qber: 0.0,
            disclosed: Vec::new(),
            kept: Vec::new(),
        }
    } else {
        let mut qber_rng = RngStream::new(config.seed, QBER_STREAM_ID);
        estimate_qber(&pulses, &sifted, config.qber_sample_fraction, &mut qber_rng)?
    };

    let auth = match authenticate(&pulses) {
        Ok(report) => report,
        // a session configured without retention simply has no auth data
        Err(Error::InsufficientAuthData) => AuthReport::default(),
        Err(other) => return Err(other),
    };

    let raw_rate = disclosure.kept.len() as f64 / n as f64;
    let rate_abort = config
        .min_raw_rate
        .map(|threshold| raw_rate < threshold)
        .unwrap_or(false);

    let transcript = Transcript {
        schema_version: TRANSCRIPT_SCHEMA_VERSION,
        config: config.clone(),
        attack: attack.clone(),
        fate_counts,
        sifted_bits: disclosure.kept,
        disclosed: disclosure.disclosed,
        qber_estimate: disclosure.qber,
        auth_error_rate_bob: auth.bob.map(|a| a.rate),
        auth_error_rate_alice: auth.alice.map(|a| a.rate),
        auth,
        raw_rate,
        rate_abort,
        eve: eve_summary,
        pulses,
    };
    Ok((transcript, eve_states))
}

/// One traversal: the physical channel (mean thinned by t) or the active
/// attack's replacement for it.
fn traverse(
    attack: &AttackKind,
    stage: Stage,
    mean: f64,
    angle: PolarizationAngle,
    transmittance: f64,
    agent: &mut EveAgent,
    rng: &mut RngStream,
) -> (f64, PolarizationAngle) {
    match attack {
        AttackKind::None => (transmittance * mean, angle),
        AttackKind::InterceptResend { resend } => {
            ir_attack_step(stage, mean, angle, transmittance, *resend, agent, rng)
        }
        AttackKind::PhotonNumberSplitting { tap_fraction } => {
            let fraction = tap_fraction.unwrap_or(1.0 - transmittance);
            pns_attack_step(stage, mean, angle, fraction, agent, rng)
        }
        AttackKind::ManInTheMiddle => {
            mim_attack_step(stage, mean, angle, transmittance, agent, rng)
        }
    }
}

fn run_pulse(
    config: &SessionConfig,
    attack: &AttackKind,
    rng: &mut RngStream,
) -> (PulseRecord, Option<EveState>) {
    let t = config.transmittance;
    let bit = rng.bit();
    let theta_x = if bit == 0 {
        PolarizationAngle::ZERO
    } else {
        PolarizationAngle::QUARTER_TURN
    };
    let theta_a = PolarizationAngle::from_bam(rng.next_u64());
    let theta_b = PolarizationAngle::from_bam(rng.next_u64());
    let phi1 = theta_x + theta_a;
    let phi2 = phi1 + theta_b;
    let phi3 = theta_x + theta_b;

    let mut agent = EveAgent::default();
    let record = |fate, bob_counts, bob_bit, auth_estimate| PulseRecord {
        bit,
        theta_x,
        theta_a,
        theta_b,
        phi1,
        phi2,
        phi3,
        fate,
        bob_counts,
        bob_bit,
        auth_estimate,
    };

    // stage 1: Alice -> Bob
    let (mean1, angle1) = traverse(attack, Stage::One, config.mean_n, phi1, t, &mut agent, rng);
    if rng.bernoulli(config.p_auth_bob) {
        let counts = sample_photon_counts(angle1, mean1, rng).expect("validated mean");
        let estimate = counts
            .conclusive()
            .then(|| estimate_angle(counts, angle1).expect("conclusive"));
        let rec = record(Fate::RetainedByBob, None, None, estimate);
        return (rec, eve_state(attack, agent));
    }

    // stage 2: Bob -> Alice, with θ_B applied
    let (mean2, angle2) = traverse(
        attack,
        Stage::Two,
        mean1,
        angle1 + theta_b,
        t,
        &mut agent,
        rng,
    );
    if rng.bernoulli(config.p_auth_alice) {
        let counts = sample_photon_counts(angle2, mean2, rng).expect("validated mean");
        let estimate = counts
            .conclusive()
            .then(|| estimate_angle(counts, angle2).expect("conclusive"));
        let rec = record(Fate::RetainedByAlice, None, None, estimate);
        return (rec, eve_state(attack, agent));
    }

    // stage 3: Alice -> Bob, with θ_A undone
    let (mean3, angle3) = traverse(
        attack,
        Stage::Three,
        mean2,
        angle2 - theta_a,
        t,
        &mut agent,
        rng,
    );

    // Bob undoes θ_B and reads the analyzer, with an optional basis error
    let mut analyzer_angle = angle3 - theta_b;
    if config.misalignment_sigma > 0.0 {
        let eps = config.misalignment_sigma * rng.standard_normal();
        analyzer_angle = analyzer_angle
            + PolarizationAngle::from_radians(eps).expect("finite misalignment draw");
    }
    let counts = sample_photon_counts(analyzer_angle, mean3, rng).expect("validated mean");
    let rec = record(
        Fate::Completed,
        Some(counts),
        Some(measure_bit(counts)),
        None,
    );
    (rec, eve_state(attack, agent))
}

fn eve_state(attack: &AttackKind, agent: EveAgent) -> Option<EveState> {
    (!attack.is_none()).then_some(agent.state)
}

/// Compares every retained pulse's stored estimate against the revealed true
/// transformation (φ₁ for Bob's retentions, φ₂ = φ₁ + θ_B for Alice's) under
/// the binary-alphabet error condition. Retained pulses whose measurement was
/// vacuum carry no estimate and drop out of the denominator.
///
/// Errors when no retained pulse on either side produced an estimate.
pub fn authenticate(pulses: &[PulseRecord]) -> Result<AuthReport> {
    let mut bob = (0u64, 0u64);
    let mut alice = (0u64, 0u64);
    for pulse in pulses {
        let (tally, truth) = match pulse.fate {
            Fate::RetainedByBob => (&mut bob, pulse.phi1),
            Fate::RetainedByAlice => (&mut alice, pulse.phi2),
            Fate::Completed => continue,
        };
        if let Some(estimate) = pulse.auth_estimate {
            tally.1 += 1;
            if (estimate - truth).bit_error() {
                tally.0 += 1;
            }
        }
    }
    if bob.1 == 0 && alice.1 == 0 {
        return Err(Error::InsufficientAuthData);
    }
    let rate = |(errors, samples): (u64, u64)| {
        (samples > 0).then(|| AuthRate {
            errors,
            samples,
            rate: errors as f64 / samples as f64,
        })
    };
    Ok(AuthReport {
        bob: rate(bob),
        alice: rate(alice),
    })
}

/// Result of the error-rate disclosure.
#[derive(Debug, Clone, PartialEq)]
pub struct QberDisclosure {
    pub qber: f64,
    /// Sifted indices disclosed and removed from the key.
    pub disclosed: Vec<u64>,
    /// Sifted indices remaining in the key.
    pub kept: Vec<u64>,
}

/// Discloses ⌈fraction·|sifted|⌉ uniformly chosen sifted bits, compares them
/// with Alice's bits, and removes them from the key.
pub fn estimate_qber(
    pulses: &[PulseRecord],
    sifted: &[u64],
    fraction: f64,
    rng: &mut RngStream,
) -> Result<QberDisclosure> {
    if sifted.is_empty() {
        return Err(Error::EmptySiftedSet);
    }
    if !fraction.is_finite() || !(0.0..=1.0).contains(&fraction) {
        return Err(Error::OutOfRange {
            name: "qber_sample_fraction",
            lo: 0.0,
            hi: 1.0,
            value: fraction,
        });
    }
    let sample_size = (fraction * sifted.len() as f64).ceil() as usize;
    let mut pool: Vec<u64> = sifted.to_vec();
    // partial Fisher-Yates: the first sample_size slots become the sample
    for i in 0..sample_size {
        let j = i + (rng.next_u64() % (pool.len() - i) as u64) as usize;
        pool.swap(i, j);
    }
    let mut disclosed: Vec<u64> = pool[..sample_size].to_vec();
    disclosed.sort_unstable();
    let mut kept: Vec<u64> = pool[sample_size..].to_vec();
    kept.sort_unstable();
    let mismatches = disclosed
        .iter()
        .filter(|&&i| {
            let p = &pulses[i as usize];
            !p.bob_bit.expect("sifted pulses are measured").matches_bit(p.bit)
        })
        .count();
    let qber = if sample_size == 0 {
        0.0
    } else {
        mismatches as f64 / sample_size as f64
    };
    Ok(QberDisclosure {
        qber,
        disclosed,
        kept,
    })
}
