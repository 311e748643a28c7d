//! Finite-range estimates of the regularity conditions on `lambda` and on the
//! shape of the species laws. Advisory only: nothing here rejects a model.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::pmf::epsilon_profile;

/// Exponents at which `lambda+(l) / l^beta` is sampled.
pub const BETAS: [f64; 3] = [0.1, 0.25, 0.5];

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub jmax: usize,
    pub smax: usize,
    /// `max_{2<=l<=jmax} max_{l/2<t<l} lambda(l-t)/lambda(l)`.
    pub l_hat: f64,
    /// `(beta, l, lambda+(l) / l^beta)` at `l = 1, 2, 4, ..`.
    pub growth: Vec<(f64, usize, f64)>,
    /// `(j, max_{2<=s<=smax} eps_js / gamma_s)`.
    pub eps_hat: Vec<(usize, f64)>,
    /// Fitted dominating sequence `gamma_s`, index `s - 2`.
    pub gamma: Vec<f64>,
    /// `sum_s s gamma_s`, truncated at `smax`.
    pub g_hat: f64,
    /// `L_s = max_{s<=l<=jmax} lambda(floor(l/s))/lambda(l)`, index `s - 2`.
    pub l_s: Vec<f64>,
    /// `sum_s L_s s^{1+q} gamma_s`, truncated at `smax`.
    pub g_q_hat: f64,
    /// `min_{j<=jmax} P[Z_j = 0]`.
    pub p0_hat: f64,
    pub flags: Vec<String>,
}

/// Estimates the condition constants from species `1..=jmax` and counts
/// `2..=smax`.
pub fn condition_diagnostics(model: &Model, jmax: usize, smax: usize) -> Result<ConditionReport> {
    if jmax < 2 || smax < 2 {
        return Err(Error::domain("need jmax >= 2 and smax >= 2"));
    }
    let q = model.q();
    let lam: Vec<f64> = (1..=jmax).map(|j| model.lambda(j)).collect::<Result<_>>()?;
    let lambda = |j: usize| lam[j - 1];
    let mut flags = Vec::new();

    let mut l_hat: f64 = 1.0;
    let mut l_hat_early: f64 = 1.0;
    for l in 2..=jmax {
        for t in l / 2 + 1..l {
            l_hat = l_hat.max(lambda(l - t) / lambda(l));
        }
        if l == 3 * jmax / 4 {
            l_hat_early = l_hat;
        }
    }
    if l_hat > l_hat_early * (1.0 + 1e-9) && jmax >= 8 {
        flags.push(format!("L-hat still growing in the last quarter of l <= {jmax}"));
    }

    let mut running = Vec::with_capacity(jmax);
    let mut top: f64 = 0.0;
    for j in 1..=jmax {
        top = top.max(lambda(j));
        running.push(top);
    }
    let mut growth = Vec::new();
    for &beta in &BETAS {
        let mut l = 1;
        let mut last = Vec::new();
        while l <= jmax {
            let v = running[l - 1] / (l as f64).powf(beta);
            growth.push((beta, l, v));
            last.push(v);
            l *= 2;
        }
        if last.len() >= 3 && last[last.len() - 1] > last[last.len() - 2] {
            flags.push(format!("lambda+(l)/l^{beta} increases at l = {}", l / 2));
        }
    }

    // eps_js with unit scaling, rows j, columns s = 2..smax
    let mut eps = Vec::with_capacity(jmax);
    let mut p0_hat: f64 = 1.0;
    for j in 1..=jmax {
        let law = model.species_pmf(j)?;
        p0_hat = p0_hat.min(law.prob(0));
        let mean = law.mean();
        if mean == 0.0 {
            eps.push(vec![0.0; smax - 1]);
            continue;
        }
        let prof = epsilon_profile(&law, j, q, mean * (j as f64).powf(q + 1.0))?;
        eps.push((2..=smax).map(|s| prof.get(s)).collect::<Vec<_>>());
    }
    let eps_max: Vec<f64> = eps.iter().map(|row| row.iter().copied().fold(0.0, f64::max)).collect();
    let gamma: Vec<f64> = (0..smax - 1)
        .map(|k| {
            eps.iter()
                .zip(&eps_max)
                .filter(|(_, &m)| m > 0.0)
                .map(|(row, &m)| row[k] / m)
                .fold(0.0, f64::max)
        })
        .collect();
    let eps_hat: Vec<(usize, f64)> = eps
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let v = row
                .iter()
                .zip(&gamma)
                .filter(|(_, &g)| g > 0.0)
                .map(|(&e, &g)| e / g)
                .fold(0.0, f64::max);
            (i + 1, v)
        })
        .collect();
    let half = jmax / 2;
    if jmax >= 8 && eps_hat[jmax - 1].1 > eps_hat[half - 1].1 {
        flags.push("eps-hat(j) does not decrease over the upper half of j".into());
    }

    let g_hat: f64 = gamma.iter().enumerate().map(|(k, g)| (k + 2) as f64 * g).sum();
    let last_share = (smax as f64 * gamma[smax - 2]) / g_hat.max(f64::MIN_POSITIVE);
    if g_hat > 0.0 && last_share > 1e-2 {
        flags.push(format!("G-hat not stabilised: last term is {:.1}% of the sum", 100.0 * last_share));
    }
    let l_s: Vec<f64> = (2..=smax)
        .map(|s| {
            (s..=jmax)
                .map(|l| lambda(l / s) / lambda(l))
                .fold(0.0, f64::max)
        })
        .collect();
    let g_q_hat: f64 = (2..=smax)
        .map(|s| l_s[s - 2] * (s as f64).powf(1.0 + q) * gamma[s - 2])
        .sum();

    let p0_at_end = model.species_pmf(jmax)?.prob(0);
    if p0_at_end <= p0_hat * (1.0 + 1e-12) && jmax > 1 && p0_hat < 1.0 {
        flags.push("p0-hat attained at jmax; later species may lower it".into());
    }
    if p0_hat <= 0.0 {
        flags.push("some species has P[Z_j = 0] = 0".into());
    }

    Ok(ConditionReport {
        jmax,
        smax,
        l_hat,
        growth,
        eps_hat,
        gamma,
        g_hat,
        l_s,
        g_q_hat,
        p0_hat,
        flags,
    })
}
