//! The six experiment commands. Each returns a [`Table`] (row order fixed by
//! the grid definition) plus the rows it could not compute.

use anyhow::Context;
use serde_json::to_value;

use qkd3_core::analysis::{
    advantage_distance, key_rate, mc_pe_auth_mim, mc_pe_auth_norm, mc_pe_ir_pns, mim_fraction,
    qber_threshold, rate_efficiency, KeyRateInputs, Passes,
};
use qkd3_core::attacks::AttackScenario;
use qkd3_core::protocol::{run_session, Transcript};
use qkd3_core::specfun::{bessel_i0, i0_minus_l0, pe_auth_norm_analytic, struve_l0};

use crate::config::{
    AttackSweepConfig, AuthSweepConfig, EfficiencyConfig, KeyrateConfig, ProtocolSimConfig,
    SpecfunTableConfig,
};
use crate::output::{Cell, Meta, RowFailure, Table};

const STATUS_OK: &str = "ok";

fn f(v: f64) -> Cell {
    Cell::F64(v)
}

fn opt(v: Option<f64>) -> Cell {
    v.map(Cell::F64).unwrap_or(Cell::Null)
}

/// Eve's IR/PNS error probability over the (t, N) grid with the scenario's
/// photon budgets. Rows with a vanishing budget (e.g. a lossless tap) carry a
/// marker instead of numbers.
pub fn attack_sweep(config: AttackSweepConfig) -> anyhow::Result<(Table, Vec<RowFailure>)> {
    config.validate()?;
    let scenario = AttackScenario::parse(&config.scenario)?;
    let mut table = Table::new(
        Meta {
            command: "attack-sweep",
            seed: Some(config.seed),
            config: to_value(&config)?,
        },
        vec![
            "scenario",
            "mean_n",
            "transmittance",
            "n1",
            "n2",
            "p_hat",
            "ci_half_width",
            "trials",
            "seed",
            "status",
        ],
    );
    let mut row_index = 0u64;
    for &t in &config.transmittance_grid {
        for &n in &config.mean_photon_grid {
            let (n1, n2) = scenario.budgets(n, t);
            let seed = config.seed.wrapping_add(row_index);
            let mut row = vec![
                Cell::Str(scenario.name().into()),
                f(n),
                f(t),
                f(n1),
                f(n2),
            ];
            if n1 > 0.0 && n2 > 0.0 {
                let estimate = mc_pe_ir_pns(n1, n2, config.trials, seed)?;
                row.extend([
                    f(estimate.p_hat),
                    f(estimate.ci_half_width),
                    Cell::U64(estimate.trials),
                    Cell::U64(estimate.seed),
                    Cell::Str(STATUS_OK.into()),
                ]);
            } else {
                row.extend([
                    Cell::Null,
                    Cell::Null,
                    Cell::U64(config.trials),
                    Cell::U64(seed),
                    Cell::Str("degenerate_budget".into()),
                ]);
            }
            table.push(row);
            row_index += 1;
        }
    }
    Ok((table, Vec::new()))
}

/// Authentication error probabilities over (t, N): the Monte Carlo and
/// closed-form values without an attack, the MIM value, and their difference.
/// t = 1 rows omit the MIM columns with an explicit marker.
pub fn auth_sweep(config: AuthSweepConfig) -> anyhow::Result<(Table, Vec<RowFailure>)> {
    config.validate()?;
    let mut table = Table::new(
        Meta {
            command: "auth-sweep",
            seed: Some(config.seed),
            config: to_value(&config)?,
        },
        vec![
            "transmittance",
            "mean_n",
            "pe_norm_mc",
            "pe_norm_ci",
            "pe_norm_analytic",
            "pe_mim_mc",
            "pe_mim_ci",
            "difference",
            "trials",
            "status",
        ],
    );
    let mut failures = Vec::new();
    let mut row_index = 0u64;
    for &t in &config.transmittance_grid {
        for &n in &config.mean_photon_grid {
            let seed = config.seed.wrapping_add(2 * row_index);
            let mim_seed = config.seed.wrapping_add(2 * row_index + 1);
            row_index += 1;
            let norm = match mc_pe_auth_norm(t, n, config.trials, seed) {
                Ok(e) => e,
                Err(err) => {
                    failures.push(RowFailure {
                        row: table.rows.len(),
                        message: format!("t={t} N={n}: {err}"),
                    });
                    table.push(vec![
                        f(t),
                        f(n),
                        Cell::Null,
                        Cell::Null,
                        Cell::Null,
                        Cell::Null,
                        Cell::Null,
                        Cell::Null,
                        Cell::U64(config.trials),
                        Cell::Str(format!("error: {err}")),
                    ]);
                    continue;
                }
            };
            let analytic = pe_auth_norm_analytic(t, n)?;
            let (mim_mc, mim_ci, difference, status) = if t < 1.0 {
                let mim = mc_pe_auth_mim(t, n, config.trials, mim_seed)?;
                (
                    Some(mim.p_hat),
                    Some(mim.ci_half_width),
                    Some(mim.p_hat - norm.p_hat),
                    STATUS_OK,
                )
            } else {
                (None, None, None, "mim_undefined_t1")
            };
            table.push(vec![
                f(t),
                f(n),
                f(norm.p_hat),
                f(norm.ci_half_width),
                f(analytic),
                opt(mim_mc),
                opt(mim_ci),
                opt(difference),
                Cell::U64(config.trials),
                Cell::Str(status.into()),
            ]);
        }
    }
    Ok((table, failures))
}

fn keyrate_columns() -> Vec<&'static str> {
    vec![
        "mean_n",
        "transmittance",
        "qber",
        "raw_rate",
        "mim_fraction",
        "eve_pe",
        "key_rate",
        "qber_threshold",
        "status",
    ]
}

/// Secret key rate over the (N, t, Q) grid, or for a measured transcript.
pub fn keyrate(config: KeyrateConfig) -> anyhow::Result<(Table, Vec<RowFailure>)> {
    config.validate()?;
    let scenario = AttackScenario::parse(&config.eve_scenario)?;
    let mut table = Table::new(
        Meta {
            command: "keyrate",
            seed: Some(config.seed),
            config: to_value(&config)?,
        },
        keyrate_columns(),
    );
    if let Some(path) = &config.transcript {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading transcript {}", path.display()))?;
        let transcript: Transcript =
            serde_json::from_str(&text).context("parsing transcript document")?;
        let row = keyrate_transcript_row(&config, scenario, &transcript)?;
        table.push(row);
        return Ok((table, Vec::new()));
    }
    for &n in &config.mean_photon_grid {
        for &t in &config.transmittance_grid {
            let (n1, n2) = scenario.budgets(n, t);
            let eve = if n1 > 0.0 && n2 > 0.0 {
                Some(mc_pe_ir_pns(n1, n2, config.trials, config.seed)?)
            } else {
                None
            };
            for &q in &config.qber_grid {
                table.push(keyrate_row(
                    n,
                    t,
                    q,
                    config.raw_rate,
                    Some(config.mim_fraction),
                    eve.as_ref().map(|e| e.p_hat),
                    None,
                ));
            }
        }
    }
    Ok((table, Vec::new()))
}

/// Assembles one keyrate row, degrading gracefully to status markers when a
/// quantity is undefined (degenerate budget, Q > 1/2, Eve at chance level).
fn keyrate_row(
    n: f64,
    t: f64,
    q: f64,
    raw_rate: f64,
    fraction: Option<f64>,
    eve_pe: Option<f64>,
    forced_status: Option<String>,
) -> Vec<Cell> {
    let mut status: Vec<String> = forced_status.into_iter().collect();
    let mut rate = None;
    let mut threshold = None;
    if let (Some(fraction), Some(pe)) = (fraction, eve_pe) {
        let inputs = KeyRateInputs {
            raw_rate,
            mim_fraction: fraction,
            eve_pe: pe,
            qber: q,
        };
        match key_rate(&inputs) {
            Ok(k) => rate = Some(k),
            Err(err) => status.push(format!("key_rate: {err}")),
        }
        match qber_threshold(fraction, pe) {
            Ok(thr) => threshold = Some(thr),
            Err(_) => status.push("degenerate_eve_pe".into()),
        }
    } else if eve_pe.is_none() {
        status.push("degenerate_budget".into());
    }
    if status.is_empty() {
        status.push(STATUS_OK.into());
    }
    vec![
        f(n),
        f(t),
        f(q),
        f(raw_rate),
        opt(fraction),
        opt(eve_pe),
        opt(rate),
        opt(threshold),
        Cell::Str(status.join("; ")),
    ]
}

fn keyrate_transcript_row(
    config: &KeyrateConfig,
    scenario: AttackScenario,
    transcript: &Transcript,
) -> anyhow::Result<Vec<Cell>> {
    let n = transcript.config.mean_n;
    let t = transcript.config.transmittance;
    let q = transcript.qber_estimate;
    let raw_rate = transcript.raw_rate;
    let (n1, n2) = scenario.budgets(n, t);
    let eve_pe = if n1 > 0.0 && n2 > 0.0 {
        Some(mc_pe_ir_pns(n1, n2, config.trials, config.seed)?.p_hat)
    } else {
        None
    };
    // inferred MIM fraction from the measured authentication error rate
    let mut status = None;
    let fraction = match transcript.auth_error_rate_bob {
        Some(measured) if t < 1.0 => {
            let norm = pe_auth_norm_analytic(t, n)?;
            let mim = mc_pe_auth_mim(t, n, config.trials, config.seed.wrapping_add(1))?;
            match mim_fraction(measured, norm, mim.p_hat) {
                Ok(fraction) => Some(fraction),
                Err(err) => {
                    status = Some(format!("mim_fraction: {err}"));
                    None
                }
            }
        }
        Some(_) => {
            status = Some("mim_undefined_t1".into());
            None
        }
        None => {
            status = Some("no_auth_data".into());
            None
        }
    };
    let row = keyrate_row(n, t, q, raw_rate, fraction, eve_pe, status);
    Ok(row)
}

/// Raw-bit-rate efficiency over (N, l) plus the advantage distance.
pub fn efficiency(config: EfficiencyConfig) -> anyhow::Result<(Table, Vec<RowFailure>)> {
    config.validate()?;
    let passes = Passes::parse(config.passes)?;
    let mut table = Table::new(
        Meta {
            command: "efficiency",
            seed: None,
            config: to_value(&config)?,
        },
        vec![
            "mean_n",
            "length_km",
            "efficiency",
            "advantage_distance_km",
        ],
    );
    let mut failures = Vec::new();
    for &n in &config.mean_photon_grid {
        let advantage = advantage_distance(n, config.alpha_db_per_km);
        for &l in &config.length_km_grid {
            match (
                rate_efficiency(n, l, config.alpha_db_per_km, passes),
                &advantage,
            ) {
                (Ok(e), Ok(a)) => table.push(vec![f(n), f(l), f(e), f(*a)]),
                (res_e, res_a) => {
                    let message = res_e
                        .err()
                        .or(res_a.clone().err())
                        .map(|e| e.to_string())
                        .unwrap_or_default();
                    failures.push(RowFailure {
                        row: table.rows.len(),
                        message: format!("N={n} l={l}: {message}"),
                    });
                    table.push(vec![f(n), f(l), Cell::Null, Cell::Null]);
                }
            }
        }
    }
    Ok((table, failures))
}

pub struct ProtocolSimOutput {
    pub table: Table,
    pub failures: Vec<RowFailure>,
    pub transcript: Transcript,
}

/// Runs one protocol session and summarizes it: raw rate, QBER, both
/// authentication error rates, the inferred MIM fraction and the resulting
/// key rate (Eve's error probability from the conservative (N, tN) budgets).
pub fn protocol_sim(config: ProtocolSimConfig) -> anyhow::Result<ProtocolSimOutput> {
    config.validate()?;
    let session = &config.session;
    let transcript = run_session(session, &config.attack)?;
    let (n, t) = (session.mean_n, session.transmittance);

    // reference seeds derived from the session seed, one per reference
    let eve_pe = mc_pe_ir_pns(n, t * n, config.trials, session.seed ^ 0x65_76_65)?;

    let mut status: Vec<String> = Vec::new();
    let fraction = match transcript.auth_error_rate_bob {
        Some(measured) if t < 1.0 => {
            let norm = pe_auth_norm_analytic(t, n)?;
            let mim = mc_pe_auth_mim(t, n, config.trials, session.seed ^ 0x6d_69_6d)?;
            match mim_fraction(measured, norm, mim.p_hat) {
                Ok(fraction) => Some(fraction),
                Err(err) => {
                    status.push(format!("mim_fraction: {err}"));
                    None
                }
            }
        }
        Some(_) => {
            status.push("mim_undefined_t1".into());
            None
        }
        None => {
            status.push("no_auth_data".into());
            None
        }
    };
    let mut key = None;
    if let Some(fraction) = fraction {
        let inputs = KeyRateInputs {
            raw_rate: transcript.raw_rate,
            mim_fraction: fraction,
            eve_pe: eve_pe.p_hat,
            qber: transcript.qber_estimate,
        };
        match key_rate(&inputs) {
            Ok(k) => key = Some(k),
            Err(err) => status.push(format!("key_rate: {err}")),
        }
    }
    if status.is_empty() {
        status.push(STATUS_OK.into());
    }

    let mut table = Table::new(
        Meta {
            command: "protocol-sim",
            seed: Some(session.seed),
            config: to_value(&config)?,
        },
        vec![
            "mean_n",
            "transmittance",
            "n_pulses",
            "raw_rate",
            "qber",
            "auth_error_bob",
            "auth_error_alice",
            "sifted_bits",
            "inferred_mim_fraction",
            "eve_pe",
            "key_rate",
            "rate_abort",
            "status",
        ],
    );
    table.push(vec![
        f(n),
        f(t),
        Cell::U64(session.n_pulses),
        f(transcript.raw_rate),
        f(transcript.qber_estimate),
        opt(transcript.auth_error_rate_bob),
        opt(transcript.auth_error_rate_alice),
        Cell::U64(transcript.sifted_bits.len() as u64),
        opt(fraction),
        f(eve_pe.p_hat),
        opt(key),
        Cell::Str(transcript.rate_abort.to_string()),
        Cell::Str(status.join("; ")),
    ]);
    Ok(ProtocolSimOutput {
        table,
        failures: Vec::new(),
        transcript,
    })
}

/// Tabulated special-function values with the closed-form error probability
/// at tN = 2x. Domain violations fail the affected row only.
pub fn specfun_table(config: SpecfunTableConfig) -> anyhow::Result<(Table, Vec<RowFailure>)> {
    config.validate()?;
    let mut table = Table::new(
        Meta {
            command: "specfun-table",
            seed: None,
            config: to_value(&config)?,
        },
        vec![
            "x",
            "bessel_i0",
            "struve_l0",
            "i0_minus_l0",
            "pe_auth_norm_at_tn_2x",
            "status",
        ],
    );
    let mut failures = Vec::new();
    for &x in &config.x_grid {
        let values = bessel_i0(x)
            .and_then(|i0| struve_l0(x).map(|l0| (i0, l0)))
            .and_then(|(i0, l0)| i0_minus_l0(x).map(|d| (i0, l0, d)));
        match values {
            Ok((i0, l0, d)) => {
                // the probability column is defined for tN = 2x in (0, 700]
                let pe = (x > 0.0).then(|| pe_auth_norm_analytic(1.0, 2.0 * x).ok()).flatten();
                let status = if pe.is_some() || x == 0.0 {
                    STATUS_OK
                } else {
                    "pe_undefined"
                };
                table.push(vec![
                    f(x),
                    f(i0.value),
                    f(l0.value),
                    f(d.value),
                    opt(pe),
                    Cell::Str(status.into()),
                ]);
            }
            Err(err) => {
                failures.push(RowFailure {
                    row: table.rows.len(),
                    message: format!("x={x}: {err}"),
                });
                table.push(vec![
                    f(x),
                    Cell::Null,
                    Cell::Null,
                    Cell::Null,
                    Cell::Null,
                    Cell::Str(format!("error: {err}")),
                ]);
            }
        }
    }
    Ok((table, failures))
}
