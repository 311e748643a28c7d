use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::exact::tables::{PrefixTable, ScaledColumn, SuffixTable};
use crate::model::Model;
use crate::pmf::{scaled_convolve, Pmf, ScaledVar};

/// Law of `T_bn = sum_{j=b+1}^{n} j Z_j` on `[0, n]`, overflow in the tail.
pub fn t_distribution(model: &Model, b: usize, n: usize) -> Result<Pmf> {
    if b >= n {
        return Err(Error::domain(format!("need b < n, got b = {b}, n = {n}")));
    }
    let mut acc = Pmf::capped_zero(n);
    for j in b + 1..=n {
        acc = scaled_convolve(&acc, &ScaledVar::new(j, model.species_pmf(j)?)?, n)?;
    }
    Ok(acc)
}

pub fn suffix_table(model: &Model, n: usize) -> Result<SuffixTable> {
    SuffixTable::build(&model.species_laws(n)?, n)
}

/// Exact conditional laws for one model and structure size `n`.
#[derive(Debug)]
pub struct ExactEngine {
    n: usize,
    species: Vec<Arc<Pmf>>,
    suffix: SuffixTable,
    prefix: OnceLock<PrefixTable>,
    ln_total: f64,
}

impl ExactEngine {
    pub fn new(model: &Model, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("n must be >= 1"));
        }
        let species = model.species_laws(n)?;
        let suffix = SuffixTable::build(&species, n)?;
        let ln_total = suffix.ln_d(1, n);
        if ln_total == f64::NEG_INFINITY {
            return Err(Error::ConditioningImpossible { n });
        }
        Ok(ExactEngine { n, species, suffix, prefix: OnceLock::new(), ln_total })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn species(&self) -> &[Arc<Pmf>] {
        &self.species
    }

    pub fn suffix(&self) -> &SuffixTable {
        &self.suffix
    }

    /// `T_{0k}` for `0 <= k <= n`, capped at `n`.
    pub fn prefix(&self) -> &PrefixTable {
        self.prefix.get_or_init(|| {
            PrefixTable::build(&self.species, 1, self.n, self.n).expect("species cover 1..n")
        })
    }

    /// `ln P[T_0n = n]`.
    pub fn ln_total(&self) -> f64 {
        self.ln_total
    }

    /// Law of the count `C_j` of components of size `j`.
    pub fn conditional_marginal(&self, j: usize) -> Result<Pmf> {
        let n = self.n;
        if j == 0 || j > n {
            return Err(Error::domain(format!("need 1 <= j <= n, got j = {j}")));
        }
        let before = self.prefix().column(j - 1);
        let after = self.suffix.column(j + 1);
        let law = &self.species[j - 1];
        let probs: Vec<f64> = (0..=n / j)
            .map(|y| {
                let py = law.prob(y);
                if py == 0.0 {
                    return 0.0;
                }
                (py.ln() + before.ln_convolve_at(after, n - j * y) - self.ln_total).exp()
            })
            .collect();
        exact_law(probs, 0.0, 1e-9)
    }

    /// `sum_{i<=k} ln P[Z_i = 0]` for `0 <= k <= n` (`-inf` once any is zero).
    fn ln_zero_runs(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = vec![0.0];
        for law in &self.species {
            acc += law.prob(0).ln();
            out.push(acc);
        }
        out
    }

    /// Law of the largest component size `Y_n` on `[0, n]`, from
    /// `P[Y_n <= k] = P[T_0k = n] prod_{k<j<=n} P[Z_j = 0] / P[T_0n = n]`.
    pub fn largest_component_law(&self) -> Result<Pmf> {
        let n = self.n;
        let pre = self.prefix();
        let zeros = self.ln_zero_runs();
        let cdf: Vec<f64> = (0..=n)
            .map(|k| {
                let ln_rest = if k == n { 0.0 } else { zeros[n] - zeros[k] };
                let ln_rest = if ln_rest.is_nan() { f64::NEG_INFINITY } else { ln_rest };
                (pre.column(k).ln_prob(n) + ln_rest - self.ln_total).exp()
            })
            .collect();
        exact_law(differences(&cdf)?, 0.0, 1e-9)
    }

    /// Law of the smallest component size `K_n` on `[0, n]`.
    pub fn smallest_component_law(&self) -> Result<Pmf> {
        let n = self.n;
        let survival: Vec<f64> = (0..=n).map(|b| self.smallest_survival(b)).collect();
        let mut probs = vec![0.0; n + 1];
        for k in 1..=n {
            let p = survival[k - 1] - survival[k];
            if p < -1e-12 {
                return Err(Error::Internal(format!("P[K_n > b] increases at b = {k}")));
            }
            probs[k] = p.max(0.0);
        }
        exact_law(probs, 0.0, 1e-9)
    }

    /// `P[K_n > b] = prod_{j<=b} P[Z_j = 0] P[T_bn = n] / P[T_0n = n]`
    /// for `0 <= b <= n`.
    pub fn smallest_survival(&self, b: usize) -> f64 {
        let ln_zero: f64 = self.species[..b].iter().map(|l| l.prob(0).ln()).sum();
        (ln_zero + self.suffix.ln_d(b + 1, self.n) - self.ln_total).exp()
    }

    /// Law of the number of components `X_n`, truncated at `kmax`; the mass
    /// of larger counts is the returned law's tail.
    pub fn component_count_law(&self, kmax: usize) -> Result<Pmf> {
        if kmax == 0 {
            return Err(Error::domain("kmax must be >= 1"));
        }
        let n = self.n;
        let width = kmax + 1;
        // f[t * width + k] = scaled P[sum_{i<=j} i Z_i = t, sum_{i<=j} Z_i = k]
        let mut f = vec![0.0; (n + 1) * width];
        f[0] = 1.0;
        let mut ln_scale = 0.0;
        for (idx, law) in self.species.iter().enumerate() {
            let j = idx + 1;
            let mut g = vec![0.0; (n + 1) * width];
            for (y, py) in law.iter() {
                if py == 0.0 {
                    continue;
                }
                if j * y > n || y > kmax {
                    break;
                }
                for t in 0..=n - j * y {
                    let src = &f[t * width..t * width + width - y];
                    let dst = &mut g[(t + j * y) * width + y..(t + j * y + 1) * width];
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d += s * py;
                    }
                }
            }
            let top = g.iter().copied().fold(0.0, f64::max);
            if top > 0.0 {
                g.iter_mut().for_each(|x| *x /= top);
                ln_scale += top.ln();
            }
            f = g;
        }
        let row = &f[n * width..(n + 1) * width];
        let probs: Vec<f64> = row
            .iter()
            .map(|&v| if v > 0.0 { (v.ln() + ln_scale - self.ln_total).exp() } else { 0.0 })
            .collect();
        let kept: f64 = probs.iter().sum();
        if kept > 1.0 + 1e-9 {
            return Err(Error::Internal(format!("count law mass {kept} exceeds 1")));
        }
        exact_law(probs, (1.0 - kept).max(0.0), 1e-9)
    }

    /// `E X_n` from the per-size marginals.
    pub fn mean_component_count(&self) -> Result<f64> {
        (1..=self.n).map(|j| self.conditional_marginal(j).map(|m| m.mean())).sum()
    }
}

/// Cumulative values to point masses; `cdf` must be non-decreasing.
fn differences(cdf: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(cdf.len());
    let mut prev = 0.0;
    for (k, &c) in cdf.iter().enumerate() {
        let p = c - prev;
        if p < -1e-12 {
            return Err(Error::Internal(format!("cumulative law decreases at {k}")));
        }
        out.push(p.max(0.0));
        prev = c;
    }
    Ok(out)
}

/// A law computed as a ratio of exact quantities; total mass is checked but
/// not forced.
fn exact_law(probs: Vec<f64>, tail: f64, tol: f64) -> Result<Pmf> {
    let total: f64 = probs.iter().sum::<f64>() + tail;
    if (total - 1.0).abs() > tol {
        return Err(Error::Internal(format!("conditional law has mass {total}")));
    }
    Ok(Pmf::exact_window(probs, tail))
}

/// `c_n = exp(sum_{j<=n} a_j) P[T_0n = n]`, Poisson families only.
pub fn partition_function(model: &Model, n: usize) -> Result<f64> {
    Ok(ln_partition_function(model, n)?.exp())
}

pub fn ln_partition_function(model: &Model, n: usize) -> Result<f64> {
    if !model.family().is_poisson() {
        return Err(Error::Family(format!(
            "partition function needs a Poisson family, not {}",
            model.family()
        )));
    }
    let species = model.species_laws(n)?;
    let col = SuffixTable::build(&species, n)?.column(1).clone();
    let sum_a: f64 = (1..=n).map(|j| model.nominal_mean(j)).sum::<Result<f64>>()?;
    Ok(sum_a + col.ln_prob(n))
}

/// `max_{b<l<=n} |l P[T_bn=l] - sum_{j=b+1}^{l} j a_j P[T_bn=l-j]|`.
pub fn poisson_recursion_residual(model: &Model, b: usize, n: usize) -> Result<f64> {
    if !model.family().is_poisson() {
        return Err(Error::Family(format!(
            "the Poisson recursion needs a Poisson family, not {}",
            model.family()
        )));
    }
    let t = t_distribution(model, b, n)?;
    let weights: Vec<f64> = (1..=n)
        .map(|j| Ok(j as f64 * model.species_pmf(j)?.mean()))
        .collect::<Result<_>>()?;
    Ok(poisson_residual_of(&t, &weights, b, n))
}

pub(crate) fn poisson_residual_of(t: &Pmf, j_means: &[f64], b: usize, n: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for l in b + 1..=n {
        let rhs: f64 = (b + 1..=l).map(|j| j_means[j - 1] * t.prob(l - j)).sum();
        worst = worst.max((l as f64 * t.prob(l) - rhs).abs());
    }
    worst
}

/// Residual of the perturbed recursion with unit scaling
/// (the exact identity for arbitrary species laws):
///
/// `l P[T=l] = sum_j j a_j P[T=l-j]
///           + sum_j j a_j {(1-e_j1) P[T^(j)=l-j] - P[T=l-j]}
///           + sum_{j<=l/2} sum_{s>=2} j a_j s e_js P[T^(j)=l-js]`.
pub fn general_recursion_residual(model: &Model, b: usize, n: usize) -> Result<f64> {
    if b >= n {
        return Err(Error::domain(format!("need b < n, got b = {b}, n = {n}")));
    }
    let species = model.species_laws(n)?;
    let suffix = SuffixTable::build(&species, n)?;
    let prefix = PrefixTable::build(&species, b + 1, n, n)?;
    let t: Vec<f64> = (0..=n).map(|l| suffix.d(b + 1, l)).collect();
    let q = model.q();
    let mut line = vec![0.0; n + 1];
    for j in b + 1..=n {
        let law = &species[j - 1];
        let a = law.mean();
        if a == 0.0 {
            continue;
        }
        let lam = a * (j as f64).powf(q + 1.0);
        let eps = crate::pmf::epsilon_profile(law, j, q, lam)?;
        let loo = leave_one_out(prefix.column(j - 1), suffix.column(j + 1), n);
        let ja = j as f64 * a;
        for l in j..=n {
            line[l] += ja * t[l - j];
            line[l] += ja * ((1.0 - eps.eps1) * loo[l - j] - t[l - j]);
            let mut s = 2;
            while j * s <= l {
                line[l] += ja * s as f64 * eps.get(s) * loo[l - j * s];
                s += 1;
            }
        }
    }
    Ok((b + 1..=n)
        .map(|l| (l as f64 * t[l] - line[l]).abs())
        .fold(0.0, f64::max))
}

fn leave_one_out(before: &ScaledColumn, after: &ScaledColumn, n: usize) -> Vec<f64> {
    (0..=n).map(|t| before.ln_convolve_at(after, t).exp()).collect()
}

/// `max_{l<=n, b in {0, l/2}} P[T_bn = l] l^{1+q} / lambda(l)`.
pub fn upper_bound_constant(model: &Model, n: usize) -> Result<f64> {
    let suffix = suffix_table(model, n)?;
    let q = model.q();
    let mut worst: f64 = 0.0;
    for l in 1..=n {
        let lam = model.lambda(l)?;
        let scale = (l as f64).powf(1.0 + q) / lam;
        for b in [0, l / 2] {
            worst = worst.max(suffix.d(b + 1, l) * scale);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Family, ModelSpec};

    fn poisson() -> Model {
        Model::new(ModelSpec::poisson_power(1.5, 1.0)).unwrap()
    }

    #[test]
    fn t_distribution_trivial_values() {
        let m = poisson();
        let t = t_distribution(&m, 0, 1).unwrap();
        let a1 = m.nominal_mean(1).unwrap();
        assert!((t.prob(1) - a1 * (-a1).exp()).abs() < 1e-15);
        let t = t_distribution(&m, 0, 9).unwrap();
        let zero: f64 = (1..=9).map(|j| m.species_pmf(j).unwrap().prob(0)).product();
        assert!((t.prob(0) - zero).abs() < 1e-15);
        assert!(t_distribution(&m, 9, 9).is_err());
    }

    #[test]
    fn suffix_agrees_with_t_distribution() {
        let m = poisson();
        let n = 30;
        let tab = suffix_table(&m, n).unwrap();
        for b in [0, n / 2, n - 1] {
            let t = t_distribution(&m, b, n).unwrap();
            assert!((tab.d(b + 1, n) - t.prob(n)).abs() < 1e-12, "b={b}");
        }
    }

    #[test]
    fn marginal_at_j_equals_n() {
        let m = poisson();
        let n = 9;
        let e = ExactEngine::new(&m, n).unwrap();
        let law = e.conditional_marginal(n).unwrap();
        let zeros: f64 = (1..n).map(|j| m.species_pmf(j).unwrap().prob(0)).product();
        let want = m.species_pmf(n).unwrap().prob(1) * zeros / e.ln_total().exp();
        assert!((law.prob(1) - want).abs() < 1e-14);
        let y = e.largest_component_law().unwrap();
        let k = e.smallest_component_law().unwrap();
        assert!((y.prob(n) - want).abs() < 1e-14);
        assert!((k.prob(n) - want).abs() < 1e-14);
        assert!((e.smallest_survival(0) - 1.0).abs() < 1e-14);
        let x = e.component_count_law(n).unwrap();
        assert!((x.prob(1) - y.prob(n)).abs() < 1e-14);
    }

    #[test]
    fn count_law_mean_matches_marginals() {
        let e = ExactEngine::new(&poisson(), 40).unwrap();
        let x = e.component_count_law(40).unwrap();
        assert!(x.tail() < 1e-12);
        assert!((x.mean() - e.mean_component_count().unwrap()).abs() < 1e-8);
    }

    #[test]
    fn partition_function_small_cases() {
        let m = poisson();
        let a1 = m.nominal_mean(1).unwrap();
        assert!((partition_function(&m, 1).unwrap() - a1).abs() < 1e-15);
        assert!(matches!(
            partition_function(&Model::new(ModelSpec::forest(Family::ForestUnlabelledRooted)).unwrap(), 3),
            Err(Error::Family(_))
        ));
    }

    #[test]
    fn poisson_recursion_holds_and_has_power() {
        let m = poisson();
        assert!(poisson_recursion_residual(&m, 0, 60).unwrap() < 1e-10);
        assert!(poisson_recursion_residual(&m, 59, 60).unwrap() < 1e-15);
        let law = m.species_pmf(1).unwrap();
        let mut probs = law.probs().to_vec();
        probs[1] += 1e-3;
        probs[0] -= 1e-3;
        let bent = Pmf::from_table(0, probs, law.tail()).unwrap();
        let t = {
            let mut acc = Pmf::capped_zero(60);
            for j in 1..=60 {
                let l = if j == 1 { Arc::new(bent.clone()) } else { m.species_pmf(j).unwrap() };
                acc = scaled_convolve(&acc, &ScaledVar::new(j, l).unwrap(), 60).unwrap();
            }
            acc
        };
        let weights: Vec<f64> = (1..=60).map(|j| j as f64 * m.nominal_mean(j).unwrap()).collect();
        assert!(poisson_residual_of(&t, &weights, 0, 60) > 1e-4);
    }

    #[test]
    fn general_recursion_on_poisson_and_forest() {
        assert!(general_recursion_residual(&poisson(), 0, 50).unwrap() < 1e-12);
        let m = Model::new(ModelSpec::forest(Family::ForestUnlabelledUnrooted)).unwrap();
        assert!(general_recursion_residual(&m, 0, 60).unwrap() < 1e-10);
        assert!(general_recursion_residual(&m, 7, 60).unwrap() < 1e-10);
    }

    #[test]
    fn degenerate_conditioning_is_reported() {
        use crate::model::CustomTable;
        let table = CustomTable { laws: vec![Pmf::point(0)], zero_beyond: true, tail_bound: None };
        let m = Model::new(ModelSpec::custom(1.0, table)).unwrap();
        assert!(matches!(ExactEngine::new(&m, 5), Err(Error::ConditioningImpossible { n: 5 })));
    }
}
