//! Convergence profiles for the local limit theorem, the approximation by
//! `Q_n`, small-component asymptotics and gelation, each computed exactly at
//! finite `n` with a certified numerical error bar.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{
    bruteforce_with_normalizer, limit_laws, qn_law, suffix_table, tv_distance, ExactEngine, LimitLaws,
    QnOptions, ScaledColumn, SuffixTable,
};
use crate::model::Model;
use crate::pmf::Pmf;

/// Round-off allowance added to every certified error bar.
const ROUNDOFF: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceProfile {
    pub quantity: String,
    pub fingerprint: String,
    pub abscissae: Vec<usize>,
    pub values: Vec<f64>,
    pub error_bars: Vec<f64>,
    pub notes: Vec<String>,
}

impl ConvergenceProfile {
    fn new(quantity: &str, model: &Model, points: Vec<(usize, f64, f64)>) -> Result<Self> {
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::domain("profile abscissae must be strictly increasing"));
        }
        Ok(ConvergenceProfile {
            quantity: quantity.to_string(),
            fingerprint: model.fingerprint().to_string(),
            abscissae: points.iter().map(|p| p.0).collect(),
            values: points.iter().map(|p| p.1).collect(),
            error_bars: points.iter().map(|p| p.2.max(0.0)).collect(),
            notes: Vec::new(),
        })
    }

    /// Whether every value is below its predecessor by more than both error
    /// bars.
    pub fn strictly_decreasing(&self) -> bool {
        self.values
            .windows(2)
            .zip(self.error_bars.windows(2))
            .all(|(v, e)| v[1] + e[1] < v[0] - e[0])
    }

    pub fn last(&self) -> Option<f64> {
        self.values.last().copied()
    }
}

fn check_grid(grid: &[usize]) -> Result<()> {
    if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("grid must be non-empty and strictly increasing"));
    }
    Ok(())
}

/// Sum of truncated tail masses of `Z_1..Z_n`; bounds the change in any
/// probability computed from the truncated laws.
fn truncation_mass(model: &Model, n: usize) -> Result<f64> {
    Ok(model.species_laws(n)?.iter().map(|l| l.tail()).sum())
}

/// `ln prod_{lo < j <= hi} P[Z_j = 0]`.
fn ln_zeros(model: &Model, lo: usize, hi: usize) -> Result<f64> {
    (lo + 1..=hi).map(|j| Ok(model.species_pmf(j)?.prob(0).ln())).sum()
}

/// One point of the local limit profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LltPoint {
    pub b: usize,
    pub n: usize,
    pub l: usize,
    /// `P[T_bn = l]`.
    pub prob: f64,
    /// `|l^{1+q} P[T_bn = l] / lambda(l) - 1|`.
    pub h: f64,
    /// Largest `H_n(l)` over `b in {0, l/2, l-1}`.
    pub h_max_b: f64,
    /// Largest over that `b`-grid and `n in {l, 2l, 4l}`; a lower bound for
    /// the supremum over all `b < l <= n`.
    pub h_sup: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LltProfile {
    pub points: Vec<LltPoint>,
    pub profile: ConvergenceProfile,
}

/// `H_n(l) = |l^{1+q} P[T_bn = l] / lambda(l) - 1|` over `(b, n, l)`
/// triples with `b < l <= n` and strictly increasing `l`.
pub fn llt_profile(model: &Model, triples: &[(usize, usize, usize)]) -> Result<LltProfile> {
    for &(b, n, l) in triples {
        if !(b < l && l <= n) {
            return Err(Error::domain(format!("need b < l <= n, got ({b}, {n}, {l})")));
        }
    }
    let points: Vec<LltPoint> = triples
        .par_iter()
        .map(|&(b, n, l)| llt_point(model, b, n, l))
        .collect::<Result<_>>()?;
    let profile = ConvergenceProfile::new(
        "H_n(l)",
        model,
        points.iter().map(|p| (p.l, p.h, p.error)).collect(),
    )?;
    let mut profile = profile;
    profile.notes.push(
        "h_sup maximises over b in {0, l/2, l-1} and n in {l, 2l, 4l} (within the model horizon) only; it is a lower bound".into(),
    );
    Ok(LltProfile { points, profile })
}

fn llt_point(model: &Model, b: usize, n: usize, l: usize) -> Result<LltPoint> {
    let table = suffix_table(model, l)?;
    let scale = (l as f64).powf(1.0 + model.q()) / model.lambda(l)?;
    // P[T_bn = l] = P[T_bl = l] prod_{l<j<=n} P[Z_j = 0]
    let h_at = |b: usize, n: usize| -> Result<(f64, f64)> {
        let p = (table.ln_d(b + 1, l) + ln_zeros(model, l, n)?).exp();
        Ok((p, (scale * p - 1.0).abs()))
    };
    let (prob, h) = h_at(b, n)?;
    let b_grid: BTreeSet<usize> = [0, l / 2, l - 1].into_iter().collect();
    let mut h_max_b = h;
    for &bb in &b_grid {
        h_max_b = h_max_b.max(h_at(bb, n)?.1);
    }
    let mut h_sup = h_max_b;
    let within = |nn: usize| model.horizon().is_none_or(|h| nn <= h);
    for nn in [l, 2 * l, 4 * l].into_iter().filter(|&nn| within(nn)) {
        for &bb in &b_grid {
            h_sup = h_sup.max(h_at(bb, nn)?.1);
        }
    }
    let error = scale * (truncation_mass(model, l)? + ROUNDOFF);
    Ok(LltPoint { b, n, l, prob, h, h_max_b, h_sup, error })
}

/// `d_TV(L(C^(n)), Q_n)` over an `n`-grid within the enumeration guard.
pub fn tv_to_qn(model: &Model, ns: &[usize], delta: f64) -> Result<ConvergenceProfile> {
    check_grid(ns)?;
    let points: Vec<(usize, f64, f64)> = ns
        .par_iter()
        .map(|&n| {
            let q = qn_law(model, n, QnOptions::new(delta))?;
            let p = match bruteforce_with_normalizer(model, n) {
                Ok((law, _)) => law,
                Err(Error::ConditioningImpossible { .. }) => {
                    crate::exact::SpectrumLaw::point(n, crate::exact::Spectrum::giant(n))
                }
                Err(e) => return Err(e),
            };
            let d = tv_distance(&p, &q);
            Ok((n, d.value, p.uncovered + q.uncovered + d.error + ROUNDOFF))
        })
        .collect::<Result<_>>()?;
    let mut prof = ConvergenceProfile::new("d_TV(C^(n), Q_n)", model, points)?;
    prof.notes.push(format!("Q_n enumerated to within {delta:e} of its mass"));
    Ok(prof)
}

/// Small-count convergence: `d_TV(L(C_1..C_b), L(Z_1..Z_b))` from the
/// identity `sum_j P[T_0b = j] {1 - P[T_bn = n-j] / P[T_0n = n]}_+`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallCounts {
    pub profile: ConvergenceProfile,
    /// The same distance from the enumerated law, where `n` allows it.
    pub direct: Vec<Option<f64>>,
}

pub fn small_counts_convergence(model: &Model, ns: &[usize], b: usize) -> Result<SmallCounts> {
    check_grid(ns)?;
    if b == 0 || b >= ns[0] {
        return Err(Error::domain("need 1 <= b < min(n)"));
    }
    let rows: Vec<(f64, Option<f64>, f64)> = ns
        .par_iter()
        .map(|&n| {
            let identity = small_counts_identity(model, n, b)?;
            let direct = if n <= crate::exact::BRUTE_FORCE_GUARD {
                Some(small_counts_direct(model, n, b)?)
            } else {
                None
            };
            Ok((identity, direct, truncation_mass(model, n)? + ROUNDOFF))
        })
        .collect::<Result<_>>()?;
    let profile = ConvergenceProfile::new(
        &format!("d_TV(C_1..C_{b}, Z_1..Z_{b})"),
        model,
        ns.iter().zip(&rows).map(|(&n, r)| (n, r.0, r.2)).collect(),
    )?;
    Ok(SmallCounts { profile, direct: rows.iter().map(|r| r.1).collect() })
}

pub fn small_counts_identity(model: &Model, n: usize, b: usize) -> Result<f64> {
    let species = model.species_laws(n)?;
    let suffix = SuffixTable::build(&species, n)?;
    let ln_total = suffix.ln_d(1, n);
    if ln_total == f64::NEG_INFINITY {
        // every structure is a single component: C_1..C_b = 0 surely
        return Ok(0.0);
    }
    let mut prefix = ScaledColumn::delta_zero(n);
    for j in 1..=b {
        prefix = prefix.add_scaled(j, &species[j - 1]);
    }
    let mut sum = prefix.overflow;
    for j in 0..=n {
        let p = prefix.prob(j);
        if p == 0.0 {
            continue;
        }
        let ratio = (suffix.ln_d(b + 1, n - j) - ln_total).exp();
        sum += p * (1.0 - ratio).max(0.0);
    }
    Ok(sum)
}

pub fn small_counts_direct(model: &Model, n: usize, b: usize) -> Result<f64> {
    let (law, _) = bruteforce_with_normalizer(model, n)?;
    let species = model.species_laws(b)?;
    let marginal = law.prefix_law(b);
    let mut sum = 0.0;
    let mut covered = 0.0;
    for (s, &p) in &marginal {
        let prod: f64 = (1..=b).map(|j| species[j - 1].prob(s.count(j))).product();
        covered += prod;
        sum += (p - prod).abs();
    }
    sum += (1.0 - covered).max(0.0);
    Ok(0.5 * sum)
}

/// The four gelation discrepancies over an `n`-grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GelationProfile {
    /// `d_TV(L(n - Y_n), L(T_0inf))`.
    pub giant: ConvergenceProfile,
    /// `|P[K_n > b] - prod_{j<=b} P[Z_j = 0]|`.
    pub smallest: ConvergenceProfile,
    /// `d_TV(L(X_n), L(1 + sum_j Z_j))`.
    pub count: ConvergenceProfile,
    /// `|P[Y_n = K_n = n] - rho_connect|`.
    pub connect: ConvergenceProfile,
    /// `P[Y_n = n]` at each grid point.
    pub connect_prob: Vec<f64>,
    pub b: usize,
    pub limits: LimitSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitSummary {
    pub truncation: usize,
    pub truncation_error: f64,
    pub rho_connect: f64,
    pub rho_bracket: (f64, f64),
}

pub fn gelation_profile(model: &Model, ns: &[usize], delta: f64, b: usize) -> Result<GelationProfile> {
    check_grid(ns)?;
    if b == 0 || b >= ns[0] {
        return Err(Error::domain("need 1 <= b < min(n)"));
    }
    let top = *ns.last().expect("non-empty");
    let limits: LimitLaws = limit_laws(model, delta, top, top + 1)?;
    let eps = limits.truncation_error;
    let small_zero: f64 = (1..=b).map(|j| Ok(model.species_pmf(j)?.prob(0))).product::<Result<f64>>()?;

    let rows: Vec<[f64; 5]> = ns
        .par_iter()
        .map(|&n| gelation_row(model, n, b, &limits, small_zero))
        .collect::<Result<_>>()?;
    let pick = |k: usize| -> Vec<(usize, f64, f64)> {
        ns.iter().zip(&rows).map(|(&n, r)| (n, r[k], 0.0)).collect()
    };
    let with_err = |mut v: Vec<(usize, f64, f64)>, err: &dyn Fn(usize) -> f64| {
        for p in v.iter_mut() {
            p.2 = err(p.0);
        }
        v
    };
    let tm = |n: usize| truncation_mass(model, n).unwrap_or(f64::INFINITY) + ROUNDOFF;
    Ok(GelationProfile {
        giant: ConvergenceProfile::new("d_TV(n - Y_n, T_0inf)", model, with_err(pick(0), &|n| eps + tm(n)))?,
        smallest: ConvergenceProfile::new(
            &format!("|P[K_n > {b}] - P[Z_1..Z_{b} = 0]|"),
            model,
            with_err(pick(1), &tm),
        )?,
        count: ConvergenceProfile::new("d_TV(X_n, 1 + sum Z_j)", model, with_err(pick(2), &|n| eps + tm(n)))?,
        connect: ConvergenceProfile::new(
            "|P[Y_n = n] - rho_connect|",
            model,
            with_err(pick(3), &|n| limits.rho_connect * eps + tm(n)),
        )?,
        connect_prob: rows.iter().map(|r| r[4]).collect(),
        b,
        limits: LimitSummary {
            truncation: limits.truncation,
            truncation_error: eps,
            rho_connect: limits.rho_connect,
            rho_bracket: limits.rho_bracket,
        },
    })
}

fn tv_dense(p: &Pmf, q: &Pmf, len: usize) -> f64 {
    let mut sum = 0.0;
    for k in 0..len {
        sum += (p.prob(k) - q.prob(k)).abs();
    }
    0.5 * (sum + p.tail() + q.tail())
}

fn gelation_row(model: &Model, n: usize, b: usize, limits: &LimitLaws, small_zero: f64) -> Result<[f64; 5]> {
    let engine = match ExactEngine::new(model, n) {
        Ok(e) => e,
        Err(Error::ConditioningImpossible { .. }) => return Ok(degenerate_row(limits, small_zero)),
        Err(e) => return Err(e),
    };
    let y = engine.largest_component_law()?;
    let gap: Vec<f64> = (0..=n).map(|k| y.prob(n - k)).collect();
    let gap = Pmf::exact_window(gap, 0.0);
    let len = limits.total_weight.probs().len().max(n + 1);
    let giant = tv_dense(&gap, &limits.total_weight, len);
    let smallest = (engine.smallest_survival(b) - small_zero).abs();
    let x = engine.component_count_law(n)?;
    let count = tv_dense(&x, &limits.count, limits.count.probs().len().max(n + 1));
    let connect_prob = y.prob(n);
    let connect = (connect_prob - limits.rho_connect).abs();
    Ok([giant, smallest, count, connect, connect_prob])
}

/// Models with `P[T_0n = n] = 0` have nothing to condition on; the limit
/// objects are point masses and so are the finite-`n` stand-ins.
fn degenerate_row(limits: &LimitLaws, small_zero: f64) -> [f64; 5] {
    let giant = 1.0 - limits.total_weight.prob(0);
    let count = 1.0 - limits.count.prob(1);
    [giant, (1.0 - small_zero).abs(), count, (1.0 - limits.rho_connect).abs(), 1.0]
}
