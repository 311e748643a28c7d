use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::pmf::{scaled_convolve, Pmf, ScaledVar};

/// Laws at `n = infinity`, truncated at species `J`.
#[derive(Debug, Clone, Serialize)]
pub struct LimitLaws {
    /// Species beyond this index are ignored.
    pub truncation: usize,
    /// Bound on `P[some Z_j != 0, j > truncation]`; every law below is
    /// within this total variation of its untruncated counterpart.
    pub truncation_error: f64,
    /// `T_{0 inf}` on `[0, cap]`, mass above `cap` in the tail.
    pub total_weight: Pmf,
    /// `prod_{j <= J} P[Z_j = 0]`.
    pub rho_connect: f64,
    /// Certified interval for the untruncated product.
    pub rho_bracket: (f64, f64),
    /// `1 + sum_j Z_j` on `[0, count_cap]`, mass above in the tail.
    pub count: Pmf,
}

/// Truncated limit laws. `delta` bounds the neglected species' total mean.
pub fn limit_laws(model: &Model, delta: f64, cap: usize, count_cap: usize) -> Result<LimitLaws> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain("delta must lie in (0, 1)"));
    }
    if count_cap == 0 {
        return Err(Error::domain("count cap must be >= 1"));
    }
    let big_j = model.truncation_index(delta)?;
    let truncation_error = model.tail_mean_bound(big_j)?;

    let mut weight = Pmf::capped_zero(cap);
    let mut count = Pmf::capped_zero(count_cap);
    let mut ln_zero = 0.0;
    let mut zero_beyond_cap = 1.0;
    for j in 1..=big_j {
        let law = model.species_pmf(j)?;
        let p0 = law.prob(0);
        ln_zero += p0.ln();
        if j <= cap {
            weight = scaled_convolve(&weight, &ScaledVar::new(j, law.clone())?, cap)?;
        } else {
            zero_beyond_cap *= p0;
        }
        count = scaled_convolve(&count, &ScaledVar::new(1, law)?, count_cap)?;
    }
    if zero_beyond_cap < 1.0 {
        // Species past the cap only ever add weight above it.
        let probs: Vec<f64> = weight.probs().iter().map(|p| p * zero_beyond_cap).collect();
        let kept: f64 = probs.iter().sum();
        weight = Pmf::capped_from_parts(probs, (1.0 - kept).max(0.0));
    }
    // shift the count law by one
    let mut shifted = vec![0.0; count_cap + 1];
    shifted[1..].copy_from_slice(&count.probs()[..count_cap]);
    let count = Pmf::capped_from_parts(shifted, count.tail() + count.prob(count_cap));

    let rho = ln_zero.exp();
    Ok(LimitLaws {
        truncation: big_j,
        truncation_error,
        total_weight: weight,
        rho_connect: rho,
        rho_bracket: (rho * (1.0 - truncation_error), rho),
        count,
    })
}
