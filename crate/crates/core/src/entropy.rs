//! Binary entropy and its inverse, the currency of all mutual-information
//! accounting in the key-rate analysis.

use crate::error::{ensure_in_range, Result};

/// h(p) = −p log₂ p − (1−p) log₂(1−p), with h(0) = h(1) = 0 by continuity.
pub fn binary_entropy(p: f64) -> Result<f64> {
    ensure_in_range("probability", p, 0.0, 1.0)?;
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-(p * p.log2()) - (1.0 - p) * (1.0 - p).log2())
}

/// The unique p in [0, 0.5] with h(p) = y, found by bisection to an absolute
/// tolerance of 1e-12.
pub fn inverse_binary_entropy(y: f64) -> Result<f64> {
    ensure_in_range("entropy", y, 0.0, 1.0)?;
    if y == 0.0 {
        return Ok(0.0);
    }
    if y == 1.0 {
        return Ok(0.5);
    }
    let mut lo = 0.0f64;
    let mut hi = 0.5f64;
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if binary_entropy(mid)? < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
