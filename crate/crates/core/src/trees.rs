//! Exact counts of unlabelled trees and the growth constants derived from them.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};

/// Rooted (`r_j`) and free (`m_j`) unlabelled tree counts for `1 <= j <= horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeCounts {
    rooted: Vec<BigUint>,
    unrooted: Vec<BigUint>,
}

impl TreeCounts {
    pub fn compute(horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::domain("tree-count horizon must be >= 1"));
        }
        let rooted = rooted_tree_counts(horizon);
        let unrooted = unrooted_tree_counts(&rooted)?;
        Ok(TreeCounts { rooted, unrooted })
    }

    pub fn horizon(&self) -> usize {
        self.rooted.len()
    }

    /// `r_j`, the number of rooted unlabelled trees on `j` vertices.
    pub fn rooted(&self, j: usize) -> &BigUint {
        &self.rooted[j - 1]
    }

    /// `m_j`, the number of free unlabelled trees on `j` vertices.
    pub fn unrooted(&self, j: usize) -> &BigUint {
        &self.unrooted[j - 1]
    }

    pub fn rooted_all(&self) -> &[BigUint] {
        &self.rooted
    }

    pub fn unrooted_all(&self) -> &[BigUint] {
        &self.unrooted
    }
}

/// `r_1..r_jmax` from the Euler-transform recurrence
/// `n r_{n+1} = sum_{k=1}^{n} (sum_{d | k} d r_d) r_{n+1-k}`.
pub fn rooted_tree_counts(jmax: usize) -> Vec<BigUint> {
    let mut r: Vec<BigUint> = Vec::with_capacity(jmax);
    // divisor sums s_k = sum_{d | k} d r_d, index k-1
    let mut dsum: Vec<BigUint> = Vec::with_capacity(jmax);
    if jmax == 0 {
        return r;
    }
    r.push(BigUint::one());
    for n in 1..jmax {
        // s_n needs r_1..r_n, all known now.
        let mut s = BigUint::zero();
        for d in (1..=n).filter(|d| n % d == 0) {
            s += &r[d - 1] * BigUint::from(d);
        }
        dsum.push(s);
        let mut acc = BigUint::zero();
        for k in 1..=n {
            acc += &dsum[k - 1] * &r[n - k];
        }
        debug_assert!((&acc % BigUint::from(n)).is_zero());
        r.push(acc / BigUint::from(n));
    }
    r
}

/// Free-tree counts from rooted ones:
/// `m_n = r_n - (1/2) sum_{i=1}^{n-1} r_i r_{n-i} + [n even] r_{n/2} / 2`.
pub fn unrooted_tree_counts(r: &[BigUint]) -> Result<Vec<BigUint>> {
    let mut m = Vec::with_capacity(r.len());
    for n in 1..=r.len() {
        let mut pairs = BigInt::zero();
        for i in 1..n {
            pairs += BigInt::from(&r[i - 1] * &r[n - i - 1]);
        }
        let mut twice: BigInt = BigInt::from(r[n - 1].clone()) * 2u32 - pairs;
        if n % 2 == 0 {
            twice += BigInt::from(r[n / 2 - 1].clone());
        }
        if twice.sign() == num_bigint::Sign::Minus || !(&twice % 2u32).is_zero() {
            return Err(Error::Internal(format!(
                "free-tree count for n={n} is not a non-negative integer; rooted counts are wrong"
            )));
        }
        m.push((twice / 2u32).to_biguint().expect("checked non-negative"));
    }
    Ok(m)
}

/// Natural logarithm of an arbitrary-precision integer.
pub fn big_ln(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        if let Some(v) = x.to_f64() {
            if v.is_finite() {
                return v.ln();
            }
        }
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().expect("64-bit value");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OtterConstants {
    /// Radius of convergence of the rooted-tree generating function.
    pub rho: f64,
    /// `m_j ~ c rho^{-j} j^{-5/2}`.
    pub c_unrooted: f64,
    /// `r_j ~ c' rho^{-j} j^{-3/2}`.
    pub c_rooted: f64,
    pub report: ConvergenceReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub horizon: usize,
    pub richardson_order: usize,
    /// Extrapolated rho at a few smaller horizons, for eyeballing stability.
    pub rho_history: Vec<(usize, f64)>,
    /// Unextrapolated ratio `r_{H-1} / r_H`.
    pub raw_ratio: f64,
    /// Difference between the order-K and order-(K-1) estimates of rho.
    pub rho_error_estimate: f64,
    /// Same for the two amplitude constants (relative).
    pub c_error_estimate: f64,
}

const RHO_ORDER: usize = 10;
const AMPLITUDE_ORDER: usize = 3;
const MIN_HORIZON: usize = 60;

/// Estimates Otter's constants from exact counts.
///
/// `rho` is the Richardson extrapolation (exact rational arithmetic) of the
/// ratio sequence `r_j / r_{j+1}`; the amplitudes extrapolate
/// `r_j rho^j j^{3/2}` and `m_j rho^j j^{5/2}`. Fails when the estimated error
/// exceeds `rel_target`.
pub fn otter_constants(counts: &TreeCounts, rel_target: f64) -> Result<OtterConstants> {
    let h = counts.horizon();
    if h < MIN_HORIZON {
        return Err(Error::InsufficientData(format!(
            "need tree counts to horizon >= {MIN_HORIZON}, have {h}"
        )));
    }
    let r = counts.rooted_all();
    let rho_at = |top: usize, order: usize| -> f64 {
        // ratios x_j = r_j / r_{j+1} for j = top-1-order .. top-1
        let start = top - 1 - order;
        let xs: Vec<BigRational> = (start..=top - 1)
            .map(|j| BigRational::new(BigInt::from(r[j - 1].clone()), BigInt::from(r[j].clone())))
            .collect();
        richardson_exact(&xs, start, order).to_f64().expect("rho fits a double")
    };
    let rho = rho_at(h, RHO_ORDER);
    let rho_lower = rho_at(h, RHO_ORDER - 1);
    let rho_error_estimate = (rho - rho_lower).abs();

    let amplitude = |counts: &[BigUint], power: f64, order: usize| -> f64 {
        let start = h - order;
        let seq: Vec<f64> = (start..=h)
            .map(|j| (big_ln(&counts[j - 1]) + j as f64 * rho.ln() + power * (j as f64).ln()).exp())
            .collect();
        richardson_f64(&seq, start, order)
    };
    let c_rooted = amplitude(r, 1.5, AMPLITUDE_ORDER);
    let c_unrooted = amplitude(counts.unrooted_all(), 2.5, AMPLITUDE_ORDER);
    let c_rooted_lower = amplitude(r, 1.5, AMPLITUDE_ORDER - 1);
    let c_unrooted_lower = amplitude(counts.unrooted_all(), 2.5, AMPLITUDE_ORDER - 1);
    let c_error_estimate = ((c_rooted - c_rooted_lower) / c_rooted)
        .abs()
        .max(((c_unrooted - c_unrooted_lower) / c_unrooted).abs());

    let rho_history = [h / 4, h / 2, 3 * h / 4]
        .into_iter()
        .filter(|&t| t >= RHO_ORDER + 4)
        .map(|t| (t, rho_at(t, RHO_ORDER)))
        .collect();
    let raw_ratio = big_ln(&r[h - 2]) - big_ln(&r[h - 1]);

    if rho_error_estimate / rho > rel_target {
        return Err(Error::InsufficientData(format!(
            "horizon {h} gives rho to ~{:.1e} and amplitudes to ~{c_error_estimate:.1e}, target {rel_target:.1e}",
            rho_error_estimate / rho
        )));
    }
    Ok(OtterConstants {
        rho,
        c_unrooted,
        c_rooted,
        report: ConvergenceReport {
            horizon: h,
            richardson_order: RHO_ORDER,
            rho_history,
            raw_ratio: raw_ratio.exp(),
            rho_error_estimate,
            c_error_estimate,
        },
    })
}

fn factorial(k: usize) -> BigInt {
    (1..=k).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

/// Order-`order` Richardson extrapolation of a sequence with an expansion in
/// powers of `1/j`; `xs[k]` is the term at index `start + k`.
fn richardson_exact(xs: &[BigRational], start: usize, order: usize) -> BigRational {
    let mut acc = BigRational::zero();
    for (k, x) in xs.iter().enumerate().take(order + 1) {
        let idx = BigInt::from(start + k).pow(order as u32);
        let denom = factorial(k) * factorial(order - k);
        let mut term = x * BigRational::new(idx, denom);
        if (k + order) % 2 == 1 {
            term = -term;
        }
        acc += term;
    }
    acc
}

fn richardson_f64(xs: &[f64], start: usize, order: usize) -> f64 {
    let fact = |k: usize| (1..=k).map(|i| i as f64).product::<f64>();
    xs.iter()
        .enumerate()
        .take(order + 1)
        .map(|(k, &x)| {
            let sign = if (k + order) % 2 == 1 { -1.0 } else { 1.0 };
            sign * x * ((start + k) as f64).powi(order as i32) / (fact(k) * fact(order - k))
        })
        .sum()
}
