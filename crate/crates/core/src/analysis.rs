//! Monte Carlo estimators for the attack and authentication error
//! probabilities, and the information-theoretic key-rate calculus built on
//! them.
//!
//! Every estimator splits its trials across counter-based substreams keyed by
//! trial index and accumulates integer error counts, so the returned estimate
//! is bitwise independent of how many worker threads ran it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angle::PolarizationAngle;
use crate::entropy::{binary_entropy, inverse_binary_entropy};
use crate::error::{ensure_in_range, Error, Result};
use crate::photon::{estimate_angle, sample_conclusive_counts, sample_photon_counts};
use crate::rng::RngStream;

/// A Monte Carlo probability estimate with its trial count and a z = 3
/// normal-approximation confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithCI {
    pub p_hat: f64,
    pub trials: u64,
    pub ci_half_width: f64,
    pub seed: u64,
}

impl EstimateWithCI {
    fn from_counts(errors: u64, trials: u64, seed: u64) -> Self {
        let p_hat = errors as f64 / trials as f64;
        Self {
            p_hat,
            trials,
            ci_half_width: 3.0 * (p_hat * (1.0 - p_hat) / trials as f64).sqrt(),
            seed,
        }
    }
}

/// Runs `trials` independent substreams of `seed` and counts successes of
/// `trial`. Integer accumulation keeps the count order-free, hence identical
/// under any rayon worker count.
fn count_parallel<F>(trials: u64, seed: u64, trial: F) -> u64
where
    F: Fn(&mut RngStream) -> bool + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(seed, i);
            trial(&mut rng) as u64
        })
        .sum()
}

fn uniform_angle(rng: &mut RngStream) -> PolarizationAngle {
    PolarizationAngle::from_bam(rng.next_u64())
}

/// Eve's error probability under intercept-resend/photon-number-splitting
/// with per-stage photon budgets (N₁, N₂): both stage angles are uniform,
/// both estimates are fixed-basis and quadrant-corrected from non-vacuum
/// counts, and Eve errs when her θ̂_B = φ̂₂ − φ̂₁ misses θ_B by more than π/4
/// on the binary alphabet.
pub fn mc_pe_ir_pns(n1: f64, n2: f64, trials: u64, seed: u64) -> Result<EstimateWithCI> {
    if !n1.is_finite() || n1 <= 0.0 {
        return Err(Error::InvalidMean(n1));
    }
    if !n2.is_finite() || n2 <= 0.0 {
        return Err(Error::InvalidMean(n2));
    }
    if trials < 1000 {
        return Err(Error::InvalidArgument(format!(
            "mc_pe_ir_pns needs at least 1000 trials, got {trials}"
        )));
    }
    let errors = count_parallel(trials, seed, |rng| {
        let phi1 = uniform_angle(rng);
        let phi2 = uniform_angle(rng);
        let c1 = sample_conclusive_counts(phi1, n1, rng).expect("validated");
        let c2 = sample_conclusive_counts(phi2, n2, rng).expect("validated");
        let e1 = estimate_angle(c1, phi1).expect("conclusive");
        let e2 = estimate_angle(c2, phi2).expect("conclusive");
        ((e2 - e1) - (phi2 - phi1)).bit_error()
    });
    Ok(EstimateWithCI::from_counts(errors, trials, seed))
}

/// Bob's authentication error probability without an attack: his fixed-basis,
/// quadrant-corrected estimate of a uniformly random φ₁ from a non-vacuum
/// pulse of mean t·N errs by more than π/4. The Monte Carlo twin of the
/// closed form in [`crate::specfun::pe_auth_norm_analytic`].
pub fn mc_pe_auth_norm(
    transmittance: f64,
    mean_n: f64,
    trials: u64,
    seed: u64,
) -> Result<EstimateWithCI> {
    ensure_in_range("transmittance", transmittance, 1e-12, 1.0)?;
    if !mean_n.is_finite() || mean_n <= 0.0 {
        return Err(Error::InvalidMean(mean_n));
    }
    let tn = transmittance * mean_n;
    let errors = count_parallel(trials, seed, move |rng| {
        let phi1 = uniform_angle(rng);
        let counts = sample_conclusive_counts(phi1, tn, rng).expect("validated");
        let estimate = estimate_angle(counts, phi1).expect("conclusive");
        (estimate - phi1).bit_error()
    });
    Ok(EstimateWithCI::from_counts(errors, trials, seed))
}

/// Bob's authentication error probability under a man-in-the-middle: Eve
/// estimates φ̂₁ from her (1−t²)N budget and Bob estimates the pulse she
/// resent at φ̂₁ from his tN arrival; the comparison is still against the
/// revealed φ₁.
///
/// Eve's draw is *not* vacuum-conditioned — a vacuum budget gives her no
/// information and she falls back to resending at a uniformly random angle,
/// which is what drives this probability to 1/2 as N → 0. Bob's draw is
/// conditioned as always (he only scores pulses he detected).
///
/// t = 1 is rejected: Eve's budget vanishes and the chain degenerates.
pub fn mc_pe_auth_mim(
    transmittance: f64,
    mean_n: f64,
    trials: u64,
    seed: u64,
) -> Result<EstimateWithCI> {
    if !transmittance.is_finite() || transmittance <= 0.0 || transmittance >= 1.0 {
        return Err(Error::OutOfRange {
            name: "transmittance (MIM requires t < 1)",
            lo: 0.0,
            hi: 1.0,
            value: transmittance,
        });
    }
    if !mean_n.is_finite() || mean_n <= 0.0 {
        return Err(Error::InvalidMean(mean_n));
    }
    let eve_mean = (1.0 - transmittance * transmittance) * mean_n;
    let bob_mean = transmittance * mean_n;
    let errors = count_parallel(trials, seed, move |rng| {
        let phi1 = uniform_angle(rng);
        let eve_counts = sample_photon_counts(phi1, eve_mean, rng).expect("validated");
        let phi1_hat = if eve_counts.conclusive() {
            estimate_angle(eve_counts, phi1).expect("conclusive")
        } else {
            uniform_angle(rng)
        };
        let bob_counts = sample_conclusive_counts(phi1_hat, bob_mean, rng).expect("validated");
        let bob_estimate = estimate_angle(bob_counts, phi1_hat).expect("conclusive");
        (bob_estimate - phi1).bit_error()
    });
    Ok(EstimateWithCI::from_counts(errors, trials, seed))
}

/// I(E:A) = 1 − h(P_e). Error probabilities above 1/2 are rejected — they
/// would mean the estimator is inverted, not that Eve knows less.
pub fn mutual_info_eve(pe: f64) -> Result<f64> {
    ensure_in_range("eve error probability", pe, 0.0, 0.5)?;
    Ok(1.0 - binary_entropy(pe)?)
}

/// Inputs for the one-way-postprocessing key rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateInputs {
    /// Raw key rate R in bits per pulse slot.
    pub raw_rate: f64,
    /// Estimated fraction f of pulses under MIM attack.
    pub mim_fraction: f64,
    /// Eve's error probability for the attack scenario under consideration.
    pub eve_pe: f64,
    /// Quantum bit error rate Q on the sifted key.
    pub qber: f64,
}

impl KeyRateInputs {
    pub fn validate(&self) -> Result<()> {
        if !self.raw_rate.is_finite() || self.raw_rate < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "raw_rate must be non-negative, got {}",
                self.raw_rate
            )));
        }
        ensure_in_range("mim_fraction", self.mim_fraction, 0.0, 1.0)?;
        ensure_in_range("eve_pe", self.eve_pe, 0.0, 1.0)?;
        ensure_in_range("qber", self.qber, 0.0, 0.5)?;
        Ok(())
    }
}

/// Secret key rate K = R·[(1−f)·h(P_e) − h(Q)] in bits per pulse slot.
/// Negative values mean the key must be aborted; callers decide.
pub fn key_rate(inputs: &KeyRateInputs) -> Result<f64> {
    inputs.validate()?;
    let eve_term = (1.0 - inputs.mim_fraction) * binary_entropy(inputs.eve_pe)?;
    Ok(inputs.raw_rate * (eve_term - binary_entropy(inputs.qber)?))
}

/// Largest tolerable QBER: the Q at which K crosses zero,
/// h(Q) = (1−f)·h(P_e). Returns 0 at f = 1 (full MIM kills the key).
pub fn qber_threshold(mim_fraction: f64, eve_pe: f64) -> Result<f64> {
    ensure_in_range("mim_fraction", mim_fraction, 0.0, 1.0)?;
    if !(eve_pe > 0.0 && eve_pe <= 0.5) {
        return Err(Error::OutOfRange {
            name: "eve_pe",
            lo: f64::MIN_POSITIVE,
            hi: 0.5,
            value: eve_pe,
        });
    }
    if mim_fraction == 1.0 {
        return Ok(0.0);
    }
    inverse_binary_entropy((1.0 - mim_fraction) * binary_entropy(eve_pe)?)
}

/// Estimated fraction of MIM activity from the measured authentication error
/// rate, clamped to [0, 1]:
/// f = (measured − norm) / (mim − norm).
///
/// Errors when mim ≤ norm — at large tN the two curves merge and the
/// denominator degenerates.
pub fn mim_fraction(measured: f64, norm: f64, mim: f64) -> Result<f64> {
    for (name, p) in [("measured", measured), ("norm", norm), ("mim", mim)] {
        ensure_in_range(name, p, 0.0, 1.0)?;
    }
    if mim <= norm {
        return Err(Error::DegenerateMimDenominator { mim, norm });
    }
    Ok(((measured - norm) / (mim - norm)).clamp(0.0, 1.0))
}

/// Fiber transmittance over `length_km` at `alpha_db_per_km`:
/// t(l) = 10^(−α·l/10).
pub fn transmittance(length_km: f64, alpha_db_per_km: f64) -> Result<f64> {
    if !length_km.is_finite() || length_km < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "length_km must be non-negative, got {length_km}"
        )));
    }
    if !alpha_db_per_km.is_finite() || alpha_db_per_km <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "alpha_db_per_km must be positive, got {alpha_db_per_km}"
        )));
    }
    Ok(10f64.powf(-alpha_db_per_km * length_km / 10.0))
}

/// How many channel traversals the multi-stage protocol pays for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Passes {
    Two,
    Three,
}

impl Passes {
    pub fn parse(n: u64) -> Result<Self> {
        match n {
            2 => Ok(Self::Two),
            3 => Ok(Self::Three),
            other => Err(Error::InvalidArgument(format!(
                "passes must be 2 or 3, got {other}"
            ))),
        }
    }

    pub fn count(self) -> f64 {
        match self {
            Self::Two => 2.0,
            Self::Three => 3.0,
        }
    }
}

/// Raw-bit-rate ratio of the multi-pass protocol at mean photon number N over
/// a single-pass weak-coherent source at mean 0.5:
/// E = (1 − e^{−N·t(passes·l)}) / (1 − e^{−0.5·t(l)}).
///
/// Detection probabilities force negative exponents; `Passes::Three` accounts
/// for all three traversals and is the variant consistent with the advantage
/// distance below.
pub fn rate_efficiency(
    mean_n: f64,
    length_km: f64,
    alpha_db_per_km: f64,
    passes: Passes,
) -> Result<f64> {
    if !mean_n.is_finite() || mean_n <= 0.0 {
        return Err(Error::InvalidMean(mean_n));
    }
    let t_multi = transmittance(passes.count() * length_km, alpha_db_per_km)?;
    let t_single = transmittance(length_km, alpha_db_per_km)?;
    Ok((-mean_n * t_multi).exp_m1() / (-0.5 * t_single).exp_m1())
}

/// Distance out to which the three-pass protocol beats the single-pass
/// mean-0.5 source: l = (5/α)·log₁₀(N/0.5), floored at zero.
pub fn advantage_distance(mean_n: f64, alpha_db_per_km: f64) -> Result<f64> {
    if !mean_n.is_finite() || mean_n <= 0.0 {
        return Err(Error::InvalidMean(mean_n));
    }
    if !alpha_db_per_km.is_finite() || alpha_db_per_km <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "alpha_db_per_km must be positive, got {alpha_db_per_km}"
        )));
    }
    Ok((5.0 / alpha_db_per_km * (mean_n / 0.5).log10()).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::pe_auth_norm_analytic;

    #[test]
    fn ir_pns_estimator_rejects_bad_domains() {
        assert!(mc_pe_ir_pns(0.0, 1.0, 10_000, 1).is_err());
        assert!(mc_pe_ir_pns(1.0, -1.0, 10_000, 1).is_err());
        assert!(mc_pe_ir_pns(1.0, 1.0, 10, 1).is_err());
    }

    #[test]
    fn ir_pns_large_n_limit_is_small() {
        let e = mc_pe_ir_pns(1e4, 1e4, 10_000, 2).unwrap();
        assert!(e.p_hat < 0.01, "p_hat {}", e.p_hat);
    }

    #[test]
    fn ir_pns_symmetric_in_budgets() {
        let a = mc_pe_ir_pns(2.0, 6.0, 200_000, 3).unwrap();
        let b = mc_pe_ir_pns(6.0, 2.0, 200_000, 4).unwrap();
        let joint = (a.ci_half_width.powi(2) + b.ci_half_width.powi(2)).sqrt();
        assert!(
            (a.p_hat - b.p_hat).abs() < joint,
            "{} vs {} (joint 3σ {joint})",
            a.p_hat,
            b.p_hat
        );
    }

    #[test]
    fn auth_norm_estimator_matches_closed_form_spot_checks() {
        for (t, n, seed) in [(1.0, 1.0, 5u64), (0.5, 4.0, 6), (0.25, 0.5, 7)] {
            let mc = mc_pe_auth_norm(t, n, 200_000, seed).unwrap();
            let analytic = pe_auth_norm_analytic(t, n).unwrap();
            assert!(
                (mc.p_hat - analytic).abs() < mc.ci_half_width,
                "t={t} N={n}: {} vs {analytic} ± {}",
                mc.p_hat,
                mc.ci_half_width
            );
        }
    }

    #[test]
    fn auth_mim_rejects_t_one_and_small_n_limit_is_half() {
        assert!(mc_pe_auth_mim(1.0, 1.0, 10_000, 1).is_err());
        let e = mc_pe_auth_mim(0.1, 1e-3, 100_000, 8).unwrap();
        assert!(
            (e.p_hat - 0.5).abs() < e.ci_half_width,
            "p_hat {} ± {}",
            e.p_hat,
            e.ci_half_width
        );
    }

    #[test]
    fn auth_mim_never_below_norm() {
        for (t, n, s) in [(0.1, 1.0, 11u64), (0.5, 2.0, 12), (0.25, 4.0, 13)] {
            let mim = mc_pe_auth_mim(t, n, 100_000, s).unwrap();
            let norm = mc_pe_auth_norm(t, n, 100_000, s + 100).unwrap();
            let joint = (mim.ci_half_width.powi(2) + norm.ci_half_width.powi(2)).sqrt();
            assert!(
                mim.p_hat >= norm.p_hat - joint,
                "t={t} N={n}: mim {} norm {}",
                mim.p_hat,
                norm.p_hat
            );
        }
    }

    #[test]
    fn ir_pns_non_increasing_in_each_budget() {
        // paired seeds; vary one budget with the other held fixed
        let grid = [1.0, 2.0, 5.0, 10.0, 20.0];
        let seed = 77;
        for fixed in [2.0, 5.0] {
            let mut prev_by_n1 = f64::INFINITY;
            let mut prev_by_n2 = f64::INFINITY;
            for &n in &grid {
                let by_n1 = mc_pe_ir_pns(n, fixed, 400_000, seed).unwrap();
                let by_n2 = mc_pe_ir_pns(fixed, n, 400_000, seed).unwrap();
                assert!(
                    by_n1.p_hat <= prev_by_n1 + by_n1.ci_half_width,
                    "N1={n}, N2={fixed}: {} after {prev_by_n1}",
                    by_n1.p_hat
                );
                assert!(
                    by_n2.p_hat <= prev_by_n2 + by_n2.ci_half_width,
                    "N1={fixed}, N2={n}: {} after {prev_by_n2}",
                    by_n2.p_hat
                );
                prev_by_n1 = by_n1.p_hat;
                prev_by_n2 = by_n2.p_hat;
            }
        }
    }

    #[test]
    fn estimator_determinism_is_exact() {
        let a = mc_pe_ir_pns(3.0, 3.0, 50_000, 42).unwrap();
        let b = mc_pe_ir_pns(3.0, 3.0, 50_000, 42).unwrap();
        assert_eq!(a, b);
        let c = mc_pe_ir_pns(3.0, 3.0, 50_000, 43).unwrap();
        assert_ne!(a.p_hat.to_bits(), c.p_hat.to_bits());
    }

    #[test]
    fn ci_half_width_formula() {
        let e = mc_pe_auth_norm(1.0, 1.0, 100_000, 21).unwrap();
        let expect = 3.0 * (e.p_hat * (1.0 - e.p_hat) / e.trials as f64).sqrt();
        assert_eq!(e.ci_half_width, expect);
        assert_eq!(e.trials, 100_000);
        assert_eq!(e.seed, 21);
    }

    #[test]
    fn mutual_info_landmarks() {
        assert_eq!(mutual_info_eve(0.5).unwrap(), 0.0);
        assert_eq!(mutual_info_eve(0.0).unwrap(), 1.0);
        assert!((mutual_info_eve(0.11).unwrap() - 0.5).abs() < 1e-4);
        assert!(mutual_info_eve(0.6).is_err());
    }

    #[test]
    fn key_rate_substitutions() {
        let k = key_rate(&KeyRateInputs {
            raw_rate: 0.8,
            mim_fraction: 0.0,
            eve_pe: 0.2,
            qber: 0.0,
        })
        .unwrap();
        assert!((k - 0.8 * binary_entropy(0.2).unwrap()).abs() < 1e-15);
        // f = 1 kills the key
        let k = key_rate(&KeyRateInputs {
            raw_rate: 0.8,
            mim_fraction: 1.0,
            eve_pe: 0.2,
            qber: 0.1,
        })
        .unwrap();
        assert!(k <= 0.0);
        // boundary: Q at threshold gives K = 0
        let f = 0.3;
        let pe = 0.2;
        let q = qber_threshold(f, pe).unwrap();
        let k = key_rate(&KeyRateInputs {
            raw_rate: 1.0,
            mim_fraction: f,
            eve_pe: pe,
            qber: q,
        })
        .unwrap();
        assert!(k.abs() < 1e-10, "k {k}");
    }

    #[test]
    fn qber_threshold_landmarks() {
        assert_eq!(qber_threshold(0.0, 0.5).unwrap(), 0.5);
        assert_eq!(qber_threshold(1.0, 0.3).unwrap(), 0.0);
        // f = 0.5, pe = 0.25: h(Q) = 0.5·h(0.25) → Q = 0.080984611...
        let q = qber_threshold(0.5, 0.25).unwrap();
        assert!((q - 0.080_984_611_108_481).abs() < 1e-9, "q {q}");
        assert!(qber_threshold(0.5, 0.0).is_err());
    }

    #[test]
    fn key_rate_sign_matches_threshold_everywhere() {
        for f in [0.0, 0.25, 0.75] {
            for pe in [0.1, 0.3, 0.5] {
                let q_star = qber_threshold(f, pe).unwrap();
                for (q, expect_positive) in
                    [(0.8 * q_star, true), ((q_star + 0.01).min(0.5), false)]
                {
                    let k = key_rate(&KeyRateInputs {
                        raw_rate: 1.0,
                        mim_fraction: f,
                        eve_pe: pe,
                        qber: q,
                    })
                    .unwrap();
                    if expect_positive {
                        assert!(k > 0.0, "f={f} pe={pe} q={q} k={k}");
                    } else {
                        assert!(k <= 1e-12, "f={f} pe={pe} q={q} k={k}");
                    }
                }
            }
        }
    }

    #[test]
    fn mim_fraction_examples() {
        assert_eq!(mim_fraction(0.2, 0.2, 0.4).unwrap(), 0.0);
        assert_eq!(mim_fraction(0.4, 0.2, 0.4).unwrap(), 1.0);
        // midpoint → 1/2 (dyadic values keep the arithmetic exact)
        assert_eq!(mim_fraction(0.375, 0.25, 0.5).unwrap(), 0.5);
        assert!((mim_fraction(0.3, 0.2, 0.4).unwrap() - 0.5).abs() < 1e-12);
        // clamping
        assert_eq!(mim_fraction(0.1, 0.2, 0.4).unwrap(), 0.0);
        assert_eq!(mim_fraction(0.5, 0.2, 0.4).unwrap(), 1.0);
        assert!(matches!(
            mim_fraction(0.3, 0.4, 0.4),
            Err(Error::DegenerateMimDenominator { .. })
        ));
    }

    #[test]
    fn transmittance_landmarks() {
        assert_eq!(transmittance(0.0, 0.2).unwrap(), 1.0);
        assert!((transmittance(50.0, 0.2).unwrap() - 0.1).abs() < 1e-15);
        assert!((transmittance(10.0, 0.2).unwrap() - 0.630_957_344_480_193_2).abs() < 1e-12);
        assert!(transmittance(-1.0, 0.2).is_err());
        assert!(transmittance(1.0, 0.0).is_err());
    }

    #[test]
    fn rate_efficiency_landmarks() {
        // l = 0, N = 0.5: equal sources
        let e = rate_efficiency(0.5, 0.0, 0.2, Passes::Three).unwrap();
        assert!((e - 1.0).abs() < 1e-12);
        // l = 0, N = 3
        let e = rate_efficiency(3.0, 0.0, 0.2, Passes::Three).unwrap();
        assert!((e - 2.414_960_542_893_017).abs() < 1e-12);
        // monotone decreasing in l
        let mut prev = f64::INFINITY;
        let mut l = 0.0;
        while l <= 60.0 {
            let e = rate_efficiency(3.0, l, 0.2, Passes::Three).unwrap();
            assert!(e < prev);
            prev = e;
            l += 5.0;
        }
    }

    #[test]
    fn advantage_distance_landmarks() {
        assert_eq!(advantage_distance(0.5, 0.2).unwrap(), 0.0);
        // floored at zero below N = 0.5
        assert_eq!(advantage_distance(0.25, 0.2).unwrap(), 0.0);
        assert!((advantage_distance(5.0, 0.2).unwrap() - 25.0).abs() < 1e-12);
        assert!(
            (advantage_distance(3.0, 0.2).unwrap() - 19.453_781_259_591_09).abs() < 1e-12
        );
    }

    #[test]
    fn passes_parse() {
        assert_eq!(Passes::parse(2).unwrap(), Passes::Two);
        assert_eq!(Passes::parse(3).unwrap(), Passes::Three);
        assert!(Passes::parse(4).is_err());
    }

    #[test]
    fn efficiency_crossing_matches_advantage_distance() {
        // bisect E(l) = 1 and compare with the closed form, N ∈ {1, 3, 10}
        for n in [1.0, 3.0, 10.0] {
            let f = |l: f64| rate_efficiency(n, l, 0.2, Passes::Three).unwrap() - 1.0;
            let (mut lo, mut hi) = (0.0f64, 200.0f64);
            assert!(f(lo) > 0.0 && f(hi) < 0.0);
            while hi - lo > 1e-9 {
                let mid = 0.5 * (lo + hi);
                if f(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let root = 0.5 * (lo + hi);
            let closed = advantage_distance(n, 0.2).unwrap();
            assert!(
                (root - closed).abs() < 1e-6,
                "N={n}: root {root} vs closed {closed}"
            );
        }
    }

    #[test]
    fn two_pass_variant_is_selectable_and_differs() {
        let two = rate_efficiency(3.0, 10.0, 0.2, Passes::Two).unwrap();
        let three = rate_efficiency(3.0, 10.0, 0.2, Passes::Three).unwrap();
        assert!(two > three, "fewer traversals lose fewer photons");
    }
}
