//! Truncated probability mass functions on the non-negative integers.
//!
//! A [`Pmf`] stores an explicit window of probabilities starting at `offset`
//! together with the mass lying above the window. Laws built from a closed
//! form are truncated so that the tail stays below a tolerance `tau`; capped
//! laws (the output of [`scaled_convolve`]) instead use the tail as an
//! overflow bucket for everything that landed above the cap.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

/// Default truncation tolerance for closed-form laws.
pub const DEFAULT_TAU: f64 = 1e-12;

/// Probabilities below this are flushed to zero.
pub const FLUSH: f64 = 1e-300;

/// Tolerance on `sum(probs) + tail == 1`.
pub const MASS_TOL: f64 = 1e-12;

const MAX_SUPPORT: usize = 50_000_000;

/// Largest relative tilted mass allowed beyond the window before a tilt with
/// `x > 1` is declared unrepresentable.
const MAX_TILTED_TAIL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pmf {
    offset: usize,
    probs: Vec<f64>,
    tail: f64,
    /// First moment of the mass above the window, `sum_{s >= end} s P[s]`.
    /// Exact for closed-form laws, a lower bound `end * tail` otherwise.
    tail_moment: f64,
    capped: bool,
}

impl Pmf {
    /// Point mass at `s`.
    pub fn point(s: usize) -> Self {
        Pmf {
            offset: s,
            probs: vec![1.0],
            tail: 0.0,
            tail_moment: 0.0,
            capped: false,
        }
    }

    /// Point mass at zero on the capped window `[0, cap]`.
    pub fn capped_zero(cap: usize) -> Self {
        let mut probs = vec![0.0; cap + 1];
        probs[0] = 1.0;
        Pmf {
            offset: 0,
            probs,
            tail: 0.0,
            tail_moment: 0.0,
            capped: true,
        }
    }

    /// Builds a law from an explicit table. The table must be a probability
    /// vector up to `tail`, the mass declared to sit above the window.
    pub fn from_table(offset: usize, probs: Vec<f64>, tail: f64) -> Result<Self> {
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::domain("table probabilities must lie in [0, 1]"));
        }
        if !(tail >= 0.0) {
            return Err(Error::domain("tail mass must be non-negative"));
        }
        let total: f64 = probs.iter().sum::<f64>() + tail;
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::domain(format!(
                "table mass {total} differs from 1 by more than {MASS_TOL:e}"
            )));
        }
        let end = offset + probs.len();
        Ok(Pmf {
            offset,
            probs,
            tail,
            tail_moment: tail * end as f64,
            capped: false,
        })
    }

    pub(crate) fn capped_from_parts(probs: Vec<f64>, overflow: f64) -> Self {
        let end = probs.len();
        Pmf {
            offset: 0,
            probs,
            tail: overflow,
            tail_moment: overflow * end as f64,
            capped: true,
        }
    }

    /// A law on `[0, probs.len())` obtained as exact ratios; `tail` is the
    /// mass above the window.
    pub(crate) fn exact_window(probs: Vec<f64>, tail: f64) -> Self {
        let end = probs.len();
        Pmf {
            offset: 0,
            probs,
            tail,
            tail_moment: tail * end as f64,
            capped: tail > 0.0,
        }
    }

    /// Poisson law with the given mean, truncated so the upper tail is below
    /// `tau`. Terms are generated in log space.
    pub fn poisson(mean: f64, tau: f64) -> Result<Self> {
        check_tau(tau)?;
        if !mean.is_finite() || mean < 0.0 {
            return Err(Error::domain(format!("Poisson mean must be finite and >= 0, got {mean}")));
        }
        if mean == 0.0 {
            return Ok(Pmf::point(0));
        }
        let ln_mean = mean.ln();
        from_log_terms(-mean, |s| ln_mean - ((s + 1) as f64).ln(), 0.0, tau)
    }

    /// Negative binomial law `P[s] = (1-p)^m C(m+s-1, s) p^s` with real shape `m`.
    pub fn negbinom(m: f64, p: f64, tau: f64) -> Result<Self> {
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::domain(format!("negative binomial shape must be > 0, got {m}")));
        }
        Self::negbinom_ln_shape(m.ln(), p, tau)
    }

    /// Negative binomial law with the shape given through its logarithm, for
    /// shapes that do not fit in a double (tree counts beyond a few hundred).
    pub fn negbinom_ln_shape(ln_m: f64, p: f64, tau: f64) -> Result<Self> {
        check_tau(tau)?;
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("negative binomial p must lie in (0,1), got {p}")));
        }
        if !ln_m.is_finite() {
            return Err(Error::domain("negative binomial shape must be finite and > 0"));
        }
        // m * ln(1-p) and m * p are both moderate even when m alone overflows.
        let ln_p = p.ln();
        let mp = (ln_m + ln_p).exp();
        let ln_p0 = -(ln_m + (-(-p).ln_1p()).ln()).exp();
        let m = ln_m.exp();
        let ratio = move |s: usize| {
            let s = s as f64;
            // p (m + s) / (s + 1)
            let num = if m.is_finite() { p * (m + s) } else { mp + p * s };
            num.ln() - (s + 1.0).ln()
        };
        from_log_terms(ln_p0, ratio, p, tau)
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Mass above the represented window.
    pub fn tail(&self) -> f64 {
        self.tail
    }

    pub fn is_capped(&self) -> bool {
        self.capped
    }

    /// One past the last represented support point.
    pub fn end(&self) -> usize {
        self.offset + self.probs.len()
    }

    /// `P[s]`; zero outside the window.
    pub fn prob(&self, s: usize) -> f64 {
        if s < self.offset {
            return 0.0;
        }
        self.probs.get(s - self.offset).copied().unwrap_or(0.0)
    }

    /// Sum of the window plus the tail.
    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum::<f64>() + self.tail
    }

    /// Iterator over `(s, P[s])` for the window.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.probs.iter().enumerate().map(move |(i, &p)| (self.offset + i, p))
    }

    /// Expected value, including the recorded tail moment.
    pub fn mean(&self) -> f64 {
        self.window_mean() + self.tail_moment
    }

    /// Contribution of the mass above the window to [`Pmf::mean`]. For capped
    /// laws this is only a lower bound.
    pub fn mean_tail_correction(&self) -> f64 {
        self.tail_moment
    }

    fn window_mean(&self) -> f64 {
        self.iter().map(|(s, p)| s as f64 * p).sum()
    }

    /// Reweights `P[i]` by `x^{j i}` and renormalizes.
    ///
    /// For `x > 1` the window must show geometric decay of the tilted terms at
    /// its upper end, with the extrapolated mass beyond the window small
    /// enough to keep as a tail; otherwise the tilt is reported as divergent.
    pub fn tilt(&self, j: usize, x: f64) -> Result<Pmf> {
        if j == 0 {
            return Err(Error::domain("tilt needs a positive component size"));
        }
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::domain(format!("tilt parameter must be > 0, got {x}")));
        }
        if x == 1.0 {
            return Ok(self.clone());
        }
        let step = j as f64 * x.ln();
        let lw: Vec<f64> = self
            .iter()
            .map(|(s, p)| if p > 0.0 { p.ln() + step * s as f64 } else { f64::NEG_INFINITY })
            .collect();
        let top = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(Error::domain("cannot tilt a law with an empty window"));
        }
        let w: Vec<f64> = lw.iter().map(|&l| (l - top).exp()).collect();
        let window: f64 = w.iter().sum();
        let end = self.end() as f64;

        // Tilted mass above the window, in units of exp(top).
        let beyond = if x < 1.0 {
            self.tail * (step * end - top).exp()
        } else {
            if self.tail == 0.0 {
                0.0
            } else {
                let n = w.len();
                if n < 2 || w[n - 2] == 0.0 {
                    return Err(Error::TiltDivergence { j, x });
                }
                let r = w[n - 1] / w[n - 2];
                if !(r < 1.0) {
                    return Err(Error::TiltDivergence { j, x });
                }
                let extrapolated = w[n - 1] * r / (1.0 - r);
                // The original tail sits at s >= end, so its tilted weight is
                // at least this much.
                let original = self.tail * (step * end - top).exp();
                let beyond = extrapolated.max(original);
                if beyond / window > MAX_TILTED_TAIL {
                    return Err(Error::TiltDivergence { j, x });
                }
                beyond
            }
        };
        let k = window + beyond;
        let mut probs: Vec<f64> = w.iter().map(|&v| v / k).collect();
        let mut tail = beyond / k;
        flush_small(&mut probs, &mut tail);
        Ok(Pmf {
            offset: self.offset,
            probs,
            tail,
            tail_moment: tail * end,
            capped: self.capped,
        })
        .map(|p| p.trimmed())
    }

    fn trimmed(mut self) -> Self {
        let lead = self.probs.iter().take_while(|&&p| p == 0.0).count();
        if lead > 0 && lead < self.probs.len() && !self.capped {
            self.probs.drain(..lead);
            self.offset += lead;
        }
        self
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau <= 1e-6 {
        Ok(())
    } else {
        Err(Error::domain(format!("truncation tolerance must lie in (0, 1e-6], got {tau}")))
    }
}

fn flush_small(probs: &mut [f64], tail: &mut f64) {
    for p in probs.iter_mut() {
        if *p < FLUSH && *p > 0.0 {
            *tail += *p;
            *p = 0.0;
        }
    }
}

/// Generates `ln P[s]` from `ln P[0]` and successive log-ratios, then keeps
/// the shortest prefix whose upper tail is below `tau`.
///
/// `ratio_limit` is the limit of `P[s+1]/P[s]` as `s` grows; it bounds the
/// geometric remainder after the last generated term.
fn from_log_terms(
    ln_p0: f64,
    ln_ratio: impl Fn(usize) -> f64,
    ratio_limit: f64,
    tau: f64,
) -> Result<Pmf> {
    let mut lp = vec![ln_p0];
    let stop = (tau * 1e-6).ln();
    loop {
        let s = lp.len() - 1;
        let lr = ln_ratio(s);
        let last = lp[s];
        if lr < 0.0 && last < stop {
            break;
        }
        if lp.len() > MAX_SUPPORT {
            return Err(Error::domain("law support too wide to represent"));
        }
        lp.push(last + lr);
    }
    let probs: Vec<f64> = lp.iter().map(|&l| l.exp()).collect();
    let n = probs.len();
    let r = ln_ratio(n - 1).exp().max(ratio_limit).min(0.999_999);
    let rem = probs[n - 1] * r / (1.0 - r);
    let rem_moment = rem * (n as f64 + 1.0 / (1.0 - r));

    // Upper tails P[X > s] for s = n-1 down to 0.
    let mut tails = vec![0.0; n];
    let mut moments = vec![0.0; n];
    let (mut acc, mut mom) = (rem, rem_moment);
    for s in (0..n).rev() {
        tails[s] = acc;
        moments[s] = mom;
        acc += probs[s];
        mom += s as f64 * probs[s];
    }
    let cut = (0..n).find(|&s| tails[s] < tau).unwrap_or(n - 1);
    let mut window = probs[..=cut].to_vec();
    let mut tail = tails[cut];
    let tail_moment = moments[cut];
    flush_small(&mut window, &mut tail);
    let lead = window.iter().take_while(|&&p| p == 0.0).count().min(window.len() - 1);
    window.drain(..lead);
    Ok(Pmf {
        offset: lead,
        probs: window,
        tail,
        tail_moment,
        capped: false,
    })
}

/// The summand `j * Z_j`: a component size together with the law of `Z_j`.
#[derive(Debug, Clone)]
pub struct ScaledVar {
    j: usize,
    law: Arc<Pmf>,
}

impl ScaledVar {
    pub fn new(j: usize, law: Arc<Pmf>) -> Result<Self> {
        if j == 0 {
            return Err(Error::domain("component size must be >= 1"));
        }
        Ok(ScaledVar { j, law })
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn law(&self) -> &Pmf {
        &self.law
    }
}

/// Law of `A + j Z` on the capped window `[0, cap]`, where `A ~ acc` is
/// capped at `cap` and independent of `Z ~ v.law`. Everything landing above
/// `cap`, and the tail mass of either input, goes to the overflow bucket.
pub fn scaled_convolve(acc: &Pmf, v: &ScaledVar, cap: usize) -> Result<Pmf> {
    if !acc.capped || acc.offset != 0 || acc.probs.len() != cap + 1 {
        return Err(Error::domain(format!("accumulator is not capped at {cap}")));
    }
    let j = v.j;
    let law = v.law();
    let mut out = vec![0.0; cap + 1];
    for (y, py) in law.iter() {
        if py == 0.0 {
            continue;
        }
        let shift = j * y;
        if shift > cap {
            break;
        }
        for (t, &a) in acc.probs[..=cap - shift].iter().enumerate() {
            out[t + shift] += a * py;
        }
    }
    let acc_window: f64 = acc.probs.iter().sum();
    let law_window: f64 = law.probs.iter().sum();
    let kept: f64 = out.iter().sum();
    let spill = (acc_window * law_window - kept).max(0.0);
    let mut overflow = acc.tail * (law_window + law.tail) + acc_window * law.tail + spill;
    flush_small(&mut out, &mut overflow);
    Ok(Pmf::capped_from_parts(out, overflow.min(1.0)))
}

/// The `r_j = 1` profile of deviations from Poisson behaviour of one species.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonProfile {
    pub j: usize,
    /// `eps_{j1}`.
    pub eps1: f64,
    /// `eps_{js}` for `s = 2, 3, ...` over the represented window.
    pub eps: Vec<f64>,
    /// `sum_{s >= 2} s eps_{js}` from mass above the window.
    pub tail_term: f64,
}

impl EpsilonProfile {
    /// `eps_{js}` for `s >= 1`.
    pub fn get(&self, s: usize) -> f64 {
        match s {
            0 => 0.0,
            1 => self.eps1,
            _ => self.eps.get(s - 2).copied().unwrap_or(0.0),
        }
    }

    /// Largest `eps_{js}` over `s >= 2`.
    pub fn max_higher(&self) -> f64 {
        self.eps.iter().copied().fold(0.0, f64::max)
    }
}

pub fn epsilon_profile(law: &Pmf, j: usize, q: f64, lambda_j: f64) -> Result<EpsilonProfile> {
    if !(lambda_j > 0.0) {
        return Err(Error::domain(format!("lambda(j) must be > 0, got {lambda_j}")));
    }
    if j == 0 || !(q > 0.0) {
        return Err(Error::domain("epsilon profile needs j >= 1 and q > 0"));
    }
    let scale = (j as f64).powf(q + 1.0);
    let a = lambda_j / scale;
    let mean = law.mean();
    if ((mean - a) / a).abs() > 1e-9 {
        return Err(Error::InconsistentModel(format!(
            "mean {mean} of Z_{j} disagrees with lambda(j) j^(-q-1) = {a}"
        )));
    }
    let eps1 = 1.0 - law.prob(1) / a;
    let eps: Vec<f64> = (2..law.end().max(2)).map(|s| law.prob(s) / a).collect();
    let tail_term = law.tail_moment / a;
    let higher: f64 = eps.iter().enumerate().map(|(i, e)| (i + 2) as f64 * e).sum::<f64>() + tail_term;
    if (eps1 - higher).abs() > 1e-9 {
        return Err(Error::InconsistentModel(format!(
            "eps_(j1) = {eps1} but sum s eps_(js) = {higher} for j = {j}"
        )));
    }
    Ok(EpsilonProfile { j, eps1, eps, tail_term })
}

/// Limit of `eps_{js}` for negative binomial species as the divisibility
/// index grows: `s^{-1} (1 - rho^j) rho^{(s-1) j}`.
pub fn negbinom_epsilon_limit(rho: f64, j: usize, s: usize) -> f64 {
    let pj = rho.powi(j as i32);
    (1.0 - pj) * pj.powi(s as i32 - 1) / s as f64
}
