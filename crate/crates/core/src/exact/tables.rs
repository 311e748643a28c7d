//! Dynamic-programming tables of weighted sums `sum_i i Z_i`, stored with a
//! per-column log scale so that conditional ratios survive even when the
//! absolute probabilities underflow (strongly tilted models).

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::pmf::{Pmf, MASS_TOL};

/// A capped pmf on `[0, cap]` stored as `true = v * exp(ln_scale)`, plus the
/// true mass above the cap.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledColumn {
    pub ln_scale: f64,
    pub v: Vec<f64>,
    pub overflow: f64,
}

impl ScaledColumn {
    pub fn delta_zero(cap: usize) -> Self {
        let mut v = vec![0.0; cap + 1];
        v[0] = 1.0;
        ScaledColumn { ln_scale: 0.0, v, overflow: 0.0 }
    }

    pub fn cap(&self) -> usize {
        self.v.len() - 1
    }

    /// True probability at `t` (may underflow to zero).
    pub fn prob(&self, t: usize) -> f64 {
        match self.v.get(t) {
            Some(&x) if x > 0.0 => (x.ln() + self.ln_scale).exp(),
            _ => 0.0,
        }
    }

    pub fn ln_prob(&self, t: usize) -> f64 {
        match self.v.get(t) {
            Some(&x) if x > 0.0 => x.ln() + self.ln_scale,
            _ => f64::NEG_INFINITY,
        }
    }

    pub fn window_mass(&self) -> f64 {
        self.v.iter().sum::<f64>() * self.ln_scale.exp()
    }

    /// Law of `A + j Z` with `A` this column and `Z ~ law`, same cap.
    pub fn add_scaled(&self, j: usize, law: &Pmf) -> ScaledColumn {
        let cap = self.cap();
        let mut raw = vec![0.0; cap + 1];
        for (y, py) in law.iter() {
            if py == 0.0 {
                continue;
            }
            let shift = j * y;
            if shift > cap {
                break;
            }
            for (t, &a) in self.v[..=cap - shift].iter().enumerate() {
                raw[t + shift] += a * py;
            }
        }
        let src_sum: f64 = self.v.iter().sum();
        let law_window: f64 = law.probs().iter().sum();
        let raw_sum: f64 = raw.iter().sum();
        let spill_scaled = (src_sum * law_window - raw_sum).max(0.0);
        let scale = self.ln_scale.exp();
        let overflow = self.overflow * (law_window + law.tail())
            + src_sum * scale * law.tail()
            + spill_scaled * scale;
        let top = raw.iter().copied().fold(0.0, f64::max);
        if top > 0.0 {
            for x in raw.iter_mut() {
                *x /= top;
            }
            ScaledColumn { ln_scale: self.ln_scale + top.ln(), v: raw, overflow }
        } else {
            ScaledColumn { ln_scale: self.ln_scale, v: raw, overflow }
        }
    }

    /// `sum_u self[u] * other[t - u]` as a log value.
    pub fn ln_convolve_at(&self, other: &ScaledColumn, t: usize) -> f64 {
        let mut acc = 0.0;
        let hi = t.min(self.cap());
        for u in 0..=hi {
            let w = t - u;
            if w <= other.cap() {
                acc += self.v[u] * other.v[w];
            }
        }
        if acc > 0.0 {
            acc.ln() + self.ln_scale + other.ln_scale
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn check_conservation(&self) -> Result<()> {
        let total = self.window_mass() + self.overflow;
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Internal(format!("column mass {total} is not 1")));
        }
        Ok(())
    }
}

/// `d[j][t] = P[sum_{i=j}^{n} i Z_i = t]` for `1 <= j <= n+1`, `0 <= t <= n`.
#[derive(Debug, Clone)]
pub struct SuffixTable {
    n: usize,
    cols: Vec<ScaledColumn>,
}

impl SuffixTable {
    pub fn build(species: &[Arc<Pmf>], n: usize) -> Result<Self> {
        if species.len() < n {
            return Err(Error::domain("suffix table needs the laws of Z_1..Z_n"));
        }
        let mut cols = vec![ScaledColumn::delta_zero(n); n + 1];
        for j in (1..=n).rev() {
            cols[j - 1] = cols[j].add_scaled(j, &species[j - 1]);
        }
        Ok(SuffixTable { n, cols })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Column `j`, `1 <= j <= n + 1`.
    pub fn column(&self, j: usize) -> &ScaledColumn {
        &self.cols[j - 1]
    }

    pub fn d(&self, j: usize, t: usize) -> f64 {
        self.column(j).prob(t)
    }

    pub fn ln_d(&self, j: usize, t: usize) -> f64 {
        self.column(j).ln_prob(t)
    }

    /// Overflow mass of column `j`.
    pub fn overflow(&self, j: usize) -> f64 {
        self.column(j).overflow
    }
}

/// `p[k][t] = P[sum_{i=from}^{k} i Z_i = t]` for `from - 1 <= k <= to`, capped.
#[derive(Debug, Clone)]
pub struct PrefixTable {
    from: usize,
    cols: Vec<ScaledColumn>,
}

impl PrefixTable {
    pub fn build(species: &[Arc<Pmf>], from: usize, to: usize, cap: usize) -> Result<Self> {
        if from == 0 || species.len() < to {
            return Err(Error::domain("prefix table needs laws of Z_from..Z_to with from >= 1"));
        }
        let mut cols = Vec::with_capacity(to + 2 - from);
        cols.push(ScaledColumn::delta_zero(cap));
        for j in from..=to {
            let next = cols.last().expect("non-empty").add_scaled(j, &species[j - 1]);
            cols.push(next);
        }
        Ok(PrefixTable { from, cols })
    }

    /// Law of `sum_{i=from}^{k} i Z_i`; `k = from - 1` is the empty sum.
    pub fn column(&self, k: usize) -> &ScaledColumn {
        &self.cols[k + 1 - self.from]
    }
}
