//! Per-command JSON configuration documents. Unknown keys are rejected.

use std::path::PathBuf;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use qkd3_core::attacks::AttackKind;
use qkd3_core::protocol::SessionConfig;

pub fn default_trials() -> u64 {
    100_000
}

/// Default N sweep for the attack-error-probability curves.
fn attack_n_grid() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 3.0, 5.0, 7.0, 10.0, 15.0, 20.0]
}

fn attack_t_grid() -> Vec<f64> {
    vec![1.0, 0.75, 0.5, 0.25]
}

/// Default N sweep for the authentication-error curves.
fn auth_n_grid() -> Vec<f64> {
    vec![0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0]
}

fn auth_t_grid() -> Vec<f64> {
    vec![0.9, 0.5, 0.25, 0.1]
}

fn keyrate_n_grid() -> Vec<f64> {
    vec![1.0, 2.0, 3.0]
}

fn keyrate_t_grid() -> Vec<f64> {
    vec![0.5, 0.25, 0.1]
}

fn keyrate_q_grid() -> Vec<f64> {
    vec![0.0, 0.02, 0.05, 0.08, 0.11]
}

fn efficiency_n_grid() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 3.0, 5.0, 10.0]
}

fn efficiency_l_grid() -> Vec<f64> {
    (0..=10).map(|k| 5.0 * k as f64).collect()
}

fn default_alpha() -> f64 {
    0.2
}

fn default_passes() -> u64 {
    3
}

fn default_raw_rate() -> f64 {
    1.0
}

fn default_eve_scenario() -> String {
    "ir_lossy".to_owned()
}

fn specfun_x_grid() -> Vec<f64> {
    vec![0.0, 0.1, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0]
}

fn no_attack() -> AttackKind {
    AttackKind::None
}

fn ensure_grid(name: &str, grid: &[f64]) -> anyhow::Result<()> {
    if grid.is_empty() {
        bail!("{name} must not be empty");
    }
    if grid.iter().any(|v| !v.is_finite()) {
        bail!("{name} contains a non-finite value");
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSweepConfig {
    pub scenario: String,
    #[serde(default = "attack_n_grid")]
    pub mean_photon_grid: Vec<f64>,
    #[serde(default = "attack_t_grid")]
    pub transmittance_grid: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    pub seed: u64,
}

impl AttackSweepConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        qkd3_core::attacks::AttackScenario::parse(&self.scenario)?;
        ensure_grid("mean_photon_grid", &self.mean_photon_grid)?;
        ensure_grid("transmittance_grid", &self.transmittance_grid)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuthSweepConfig {
    #[serde(default = "auth_n_grid")]
    pub mean_photon_grid: Vec<f64>,
    #[serde(default = "auth_t_grid")]
    pub transmittance_grid: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    pub seed: u64,
}

impl AuthSweepConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        ensure_grid("mean_photon_grid", &self.mean_photon_grid)?;
        ensure_grid("transmittance_grid", &self.transmittance_grid)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyrateConfig {
    #[serde(default = "keyrate_n_grid")]
    pub mean_photon_grid: Vec<f64>,
    #[serde(default = "keyrate_t_grid")]
    pub transmittance_grid: Vec<f64>,
    #[serde(default = "keyrate_q_grid")]
    pub qber_grid: Vec<f64>,
    /// MIM fraction assumed in grid mode (overridden by transcript mode).
    #[serde(default)]
    pub mim_fraction: f64,
    /// Raw rate assumed in grid mode (bits/slot).
    #[serde(default = "default_raw_rate")]
    pub raw_rate: f64,
    /// Photon-budget scenario feeding Eve's error probability.
    #[serde(default = "default_eve_scenario")]
    pub eve_scenario: String,
    /// When set, N, t, Q, R and the MIM fraction are taken from this
    /// serialized transcript instead of the grids.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<PathBuf>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    pub seed: u64,
}

impl KeyrateConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        qkd3_core::attacks::AttackScenario::parse(&self.eve_scenario)?;
        if self.transcript.is_none() {
            ensure_grid("mean_photon_grid", &self.mean_photon_grid)?;
            ensure_grid("transmittance_grid", &self.transmittance_grid)?;
            ensure_grid("qber_grid", &self.qber_grid)?;
            if !(0.0..=1.0).contains(&self.mim_fraction) {
                bail!("mim_fraction must lie in [0, 1]");
            }
            if !self.raw_rate.is_finite() || self.raw_rate < 0.0 {
                bail!("raw_rate must be non-negative");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EfficiencyConfig {
    #[serde(default = "efficiency_n_grid")]
    pub mean_photon_grid: Vec<f64>,
    #[serde(default = "efficiency_l_grid")]
    pub length_km_grid: Vec<f64>,
    #[serde(default = "default_alpha")]
    pub alpha_db_per_km: f64,
    #[serde(default = "default_passes")]
    pub passes: u64,
}

impl EfficiencyConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        ensure_grid("mean_photon_grid", &self.mean_photon_grid)?;
        ensure_grid("length_km_grid", &self.length_km_grid)?;
        qkd3_core::analysis::Passes::parse(self.passes)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSimConfig {
    pub session: SessionConfig,
    #[serde(default = "no_attack")]
    pub attack: AttackKind,
    /// Trial count for the Monte Carlo references behind the inferred MIM
    /// fraction and Eve's error probability.
    #[serde(default = "default_trials")]
    pub trials: u64,
}

impl ProtocolSimConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        self.session.validate()?;
        self.attack.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecfunTableConfig {
    #[serde(default = "specfun_x_grid")]
    pub x_grid: Vec<f64>,
}

impl SpecfunTableConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        ensure_grid("x_grid", &self.x_grid)
    }
}

/// Loads a config document, rejecting unknown keys.
pub fn load<T: for<'de> Deserialize<'de>>(path: &PathBuf) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}
