//! Counter-based deterministic random streams.
//!
//! Every stochastic routine in the crate draws from an [`RngStream`], which is
//! a ChaCha12 generator addressed by `(seed, stream_id)`. Identical addresses
//! produce identical sample sequences on every host and under any number of
//! worker threads, which is what makes the Monte Carlo estimators and protocol
//! sessions byte-reproducible: parallel code assigns one substream per trial
//! (or per pulse) instead of sharing a sequential generator.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

use crate::numeric::ln_factorial;

/// Mean below which Poisson sampling uses exact inversion by sequential
/// search; above it a transformed-rejection sampler takes over.
const POISSON_INVERSION_CUTOFF: f64 = 30.0;

/// A deterministic random substream addressed by `(seed, stream_id)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn bit(&mut self) -> u8 {
        (self.next_u64() & 1) as u8
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Standard normal deviate (Box–Muller, cosine branch).
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = loop {
            let u = self.uniform();
            if u > 0.0 {
                break u;
            }
        };
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Poisson sample. Inversion by sequential search below mean 30 (exact in
    /// the small-mean regime the protocol lives in), transformed rejection
    /// above it.
    ///
    /// Panics on a negative or non-finite mean; callers validate domains.
    pub fn poisson(&mut self, mean: f64) -> u64 {
        assert!(
            mean.is_finite() && mean >= 0.0,
            "poisson mean must be finite and non-negative, got {mean}"
        );
        if mean == 0.0 {
            0
        } else if mean < POISSON_INVERSION_CUTOFF {
            self.poisson_inversion(mean)
        } else {
            self.poisson_transformed_rejection(mean)
        }
    }

    fn poisson_inversion(&mut self, mean: f64) -> u64 {
        let u = self.uniform();
        let cap = (mean + 20.0 * mean.sqrt() + 100.0) as u64;
        let mut k = 0u64;
        let mut pmf = (-mean).exp();
        let mut cdf = pmf;
        while u >= cdf && k < cap {
            k += 1;
            pmf *= mean / k as f64;
            cdf += pmf;
        }
        k
    }

    /// Hörmann-style transformed rejection with squeeze, valid for mean >= 10.
    fn poisson_transformed_rejection(&mut self, mean: f64) -> u64 {
        let slam = mean.sqrt();
        let loglam = mean.ln();
        let b = 0.931 + 2.53 * slam;
        let a = -0.059 + 0.02483 * b;
        let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        let vr = 0.9277 - 3.6224 / (b - 2.0);
        loop {
            let u = self.uniform() - 0.5;
            let v = self.uniform();
            let us = 0.5 - u.abs();
            let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
            if us >= 0.07 && v <= vr {
                return k as u64;
            }
            if k < 0.0 || (us < 0.013 && v > us) {
                continue;
            }
            if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln()
                <= k * loglam - mean - ln_factorial(k as u64)
            {
                return k as u64;
            }
        }
    }

    /// Poisson conditioned on being >= 1 (the non-vacuum conditioning of the
    /// photon-count distribution). Sequential inversion on the truncated pmf
    /// for small means, rejection of zeros above the cutoff where vacuum is
    /// vanishingly rare.
    pub fn zero_truncated_poisson(&mut self, mean: f64) -> u64 {
        assert!(
            mean.is_finite() && mean > 0.0,
            "zero-truncated poisson mean must be positive, got {mean}"
        );
        if mean >= POISSON_INVERSION_CUTOFF {
            loop {
                let k = self.poisson(mean);
                if k > 0 {
                    return k;
                }
            }
        }
        let u = self.uniform();
        let cap = (mean + 20.0 * mean.sqrt() + 100.0) as u64;
        let mut k = 1u64;
        // P(1 | k >= 1) = N e^-N / (1 - e^-N), stable at tiny N via expm1.
        let mut pmf = mean * (-mean).exp() / (-(-mean).exp_m1());
        let mut cdf = pmf;
        while u >= cdf && k < cap {
            k += 1;
            pmf *= mean / k as f64;
            cdf += pmf;
        }
        k
    }

    /// Binomial(n, p) by direct Bernoulli counting. Photon counts in this
    /// project stay in the hundreds, so the O(n) loop is the simple, exact
    /// choice. p outside (0, 1) short-circuits so that quadrant-axis angles
    /// keep their exact zero/one port probabilities.
    pub fn binomial(&mut self, n: u64, p: f64) -> u64 {
        if p <= 0.0 {
            return 0;
        }
        if p >= 1.0 {
            return n;
        }
        let mut hits = 0;
        for _ in 0..n {
            if self.uniform() < p {
                hits += 1;
            }
        }
        hits
    }
}
