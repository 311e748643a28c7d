use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Model;

/// Largest `n` for which full partition enumeration is attempted.
pub const BRUTE_FORCE_GUARD: usize = 40;

/// A component spectrum: sparse `(size, count)` pairs with positive counts,
/// sorted by size.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Spectrum(Vec<(usize, usize)>);

impl Spectrum {
    pub fn empty() -> Self {
        Spectrum(Vec::new())
    }

    /// From a dense count vector, `counts[j-1]` being the count of size `j`.
    pub fn from_counts(counts: &[usize]) -> Self {
        Spectrum(
            counts
                .iter()
                .enumerate()
                .filter(|(_, &y)| y > 0)
                .map(|(i, &y)| (i + 1, y))
                .collect(),
        )
    }

    pub fn from_pairs(mut pairs: Vec<(usize, usize)>) -> Result<Self> {
        pairs.retain(|&(_, y)| y > 0);
        pairs.sort_unstable();
        if pairs.iter().any(|&(j, _)| j == 0) || pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::domain("spectrum pairs need distinct sizes >= 1"));
        }
        Ok(Spectrum(pairs))
    }

    /// Single component of size `n` (empty when `n == 0`).
    pub fn giant(n: usize) -> Self {
        if n == 0 {
            Spectrum::empty()
        } else {
            Spectrum(vec![(n, 1)])
        }
    }

    /// `sum_j j y_j`.
    pub fn weight(&self) -> usize {
        self.0.iter().map(|&(j, y)| j * y).sum()
    }

    /// `sum_j y_j`.
    pub fn components(&self) -> usize {
        self.0.iter().map(|&(_, y)| y).sum()
    }

    pub fn count(&self, j: usize) -> usize {
        self.0
            .binary_search_by_key(&j, |&(s, _)| s)
            .map(|i| self.0[i].1)
            .unwrap_or(0)
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.0
    }

    pub fn largest(&self) -> Option<usize> {
        self.0.last().map(|&(j, _)| j)
    }

    pub fn smallest(&self) -> Option<usize> {
        self.0.first().map(|&(j, _)| j)
    }

    /// Adds one component of size `j`.
    pub fn with_extra(&self, j: usize) -> Self {
        let mut pairs = self.0.clone();
        match pairs.binary_search_by_key(&j, |&(s, _)| s) {
            Ok(i) => pairs[i].1 += 1,
            Err(i) => pairs.insert(i, (j, 1)),
        }
        Spectrum(pairs)
    }

    /// Counts of sizes `1..=b` only.
    pub fn prefix(&self, b: usize) -> Spectrum {
        Spectrum(self.0.iter().copied().filter(|&(j, _)| j <= b).collect())
    }
}

impl fmt::Display for Spectrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (j, y)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{j}:{y}")?;
        }
        Ok(())
    }
}

/// A law on spectra. `uncovered` is probability mass that was not enumerated;
/// when `uncovered_min_weight` is set, all of it sits on spectra of at least
/// that weight.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumLaw {
    pub n: usize,
    pub entries: BTreeMap<Spectrum, f64>,
    pub uncovered: f64,
    pub uncovered_min_weight: Option<usize>,
}

impl Serialize for SpectrumLaw {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        #[derive(Serialize)]
        struct Entry<'a> {
            spectrum: &'a Spectrum,
            probability: f64,
        }
        let entries: Vec<Entry<'_>> = self
            .entries
            .iter()
            .map(|(s, &p)| Entry { spectrum: s, probability: p })
            .collect();
        let mut st = ser.serialize_struct("SpectrumLaw", 4)?;
        st.serialize_field("n", &self.n)?;
        st.serialize_field("entries", &entries)?;
        st.serialize_field("uncovered", &self.uncovered)?;
        st.serialize_field("uncovered_min_weight", &self.uncovered_min_weight)?;
        st.end()
    }
}

impl SpectrumLaw {
    pub fn point(n: usize, s: Spectrum) -> Self {
        SpectrumLaw {
            n,
            entries: BTreeMap::from([(s, 1.0)]),
            uncovered: 0.0,
            uncovered_min_weight: None,
        }
    }

    pub fn prob(&self, s: &Spectrum) -> f64 {
        self.entries.get(s).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn max_weight(&self) -> usize {
        self.entries.keys().map(Spectrum::weight).max().unwrap_or(0)
    }

    pub fn check_conservation(&self, tol: f64) -> Result<()> {
        let t = self.total() + self.uncovered;
        if (t - 1.0).abs() > tol || self.entries.values().any(|&p| p < 0.0) {
            return Err(Error::Internal(format!("spectrum law mass {t} is not 1")));
        }
        Ok(())
    }

    /// Law of `f(spectrum)`, as a dense vector over `0..=len-1`.
    pub fn pushforward(&self, len: usize, f: impl Fn(&Spectrum) -> usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (s, &p) in &self.entries {
            let k = f(s);
            if k < len {
                out[k] += p;
            }
        }
        out
    }

    /// Marginal law of the sizes `1..=b` part of the spectrum.
    pub fn prefix_law(&self, b: usize) -> BTreeMap<Spectrum, f64> {
        let mut out = BTreeMap::new();
        for (s, &p) in &self.entries {
            *out.entry(s.prefix(b)).or_insert(0.0) += p;
        }
        out
    }
}

/// Total variation distance with a certified half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TvDistance {
    pub value: f64,
    pub error: f64,
}

/// `(1/2) sum |p - q|` over the union of supports. Uncovered mass that provably
/// lies on spectra the other law does not charge is added exactly; the rest
/// widens `error`.
pub fn tv_distance(p: &SpectrumLaw, q: &SpectrumLaw) -> TvDistance {
    let mut sum = 0.0;
    for (s, &a) in &p.entries {
        sum += (a - q.prob(s)).abs();
    }
    for (s, &b) in &q.entries {
        if !p.entries.contains_key(s) {
            sum += b;
        }
    }
    let mut value = 0.5 * sum;
    let mut error = 0.0;
    for (this, other) in [(p, q), (q, p)] {
        if this.uncovered == 0.0 {
            continue;
        }
        let disjoint = other.uncovered == 0.0
            && this
                .uncovered_min_weight
                .is_some_and(|w| other.entries.is_empty() || other.max_weight() < w);
        if disjoint {
            value += 0.5 * this.uncovered;
        } else {
            error += this.uncovered;
        }
    }
    TvDistance { value, error }
}

/// Calls `f` with the dense count vector (`counts[j-1]` = copies of `j`) of
/// every partition of `n`.
pub fn for_each_partition(n: usize, mut f: impl FnMut(&[usize])) {
    fn rec(rest: usize, max_part: usize, counts: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if rest == 0 {
            f(counts);
            return;
        }
        for part in (1..=max_part.min(rest)).rev() {
            let most = rest / part;
            for y in (1..=most).rev() {
                counts[part - 1] = y;
                rec(rest - y * part, part - 1, counts, f);
            }
            counts[part - 1] = 0;
        }
    }
    let mut counts = vec![0; n];
    if n == 0 {
        f(&counts);
        return;
    }
    rec(n, n, &mut counts, &mut f);
}

/// The conditional spectrum law by enumerating every partition of `n`,
/// together with the normalizer `P[T_0n = n]` (as a logarithm).
pub fn bruteforce_with_normalizer(model: &Model, n: usize) -> Result<(SpectrumLaw, f64)> {
    if n == 0 {
        return Err(Error::domain("n must be >= 1"));
    }
    if n > BRUTE_FORCE_GUARD {
        return Err(Error::Size { n, guard: BRUTE_FORCE_GUARD });
    }
    let laws = model.species_laws(n)?;
    let ln_zero: Vec<f64> = laws.iter().map(|l| l.prob(0).ln()).collect();
    let base: f64 = ln_zero.iter().sum();
    let mut terms: Vec<(Spectrum, f64)> = Vec::new();
    for_each_partition(n, |counts| {
        let mut ln_w = base;
        for (i, &y) in counts.iter().enumerate() {
            if y > 0 {
                ln_w += laws[i].prob(y).ln() - ln_zero[i];
            }
        }
        if ln_w.is_nan() {
            // P[Z_j = 0] = 0 for some j: recompute without the shared base.
            ln_w = counts
                .iter()
                .enumerate()
                .map(|(i, &y)| laws[i].prob(y).ln())
                .sum();
        }
        if ln_w > f64::NEG_INFINITY {
            terms.push((Spectrum::from_counts(counts), ln_w));
        }
    });
    if terms.is_empty() {
        return Err(Error::ConditioningImpossible { n });
    }
    let top = terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = terms.iter().map(|t| (t.1 - top).exp()).sum();
    let ln_norm = top + z.ln();
    let entries = terms
        .into_iter()
        .map(|(s, w)| (s, (w - ln_norm).exp()))
        .collect();
    Ok((
        SpectrumLaw { n, entries, uncovered: 0.0, uncovered_min_weight: None },
        ln_norm,
    ))
}

/// The conditional law of the component spectrum of a size-`n` structure,
/// by full enumeration.
pub fn spectrum_law_bruteforce(model: &Model, n: usize) -> Result<SpectrumLaw> {
    bruteforce_with_normalizer(model, n).map(|(law, _)| law)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;

    #[test]
    fn partition_counts() {
        let expect = [1usize, 1, 2, 3, 5, 7, 11, 15, 22, 30, 42];
        for (n, &p) in expect.iter().enumerate() {
            let mut k = 0;
            for_each_partition(n, |c| {
                assert_eq!(c.iter().enumerate().map(|(i, y)| (i + 1) * y).sum::<usize>(), n);
                k += 1;
            });
            assert_eq!(k, p, "p({n})");
        }
        let mut k = 0;
        for_each_partition(40, |_| k += 1);
        assert_eq!(k, 37338);
    }

    #[test]
    fn spectrum_basics() {
        let s = Spectrum::from_counts(&[2, 0, 1]);
        assert_eq!(s.weight(), 5);
        assert_eq!(s.components(), 3);
        assert_eq!(s.to_string(), "1:2 3:1");
        assert_eq!(s.with_extra(2).weight(), 7);
        assert_eq!(s.with_extra(3).count(3), 2);
        assert_eq!(Spectrum::giant(0), Spectrum::empty());
    }

    #[test]
    fn n1_and_n2() {
        let m = Model::new(ModelSpec::poisson_power(1.5, 1.0)).unwrap();
        let law = spectrum_law_bruteforce(&m, 1).unwrap();
        assert_eq!(law.entries.len(), 1);
        assert!((law.prob(&Spectrum::giant(1)) - 1.0).abs() < 1e-15);

        let law = spectrum_law_bruteforce(&m, 2).unwrap();
        let (z1, z2) = (m.species_pmf(1).unwrap(), m.species_pmf(2).unwrap());
        let w_a = z1.prob(2) * z2.prob(0);
        let w_b = z1.prob(0) * z2.prob(1);
        assert!((law.prob(&Spectrum::from_counts(&[2])) - w_a / (w_a + w_b)).abs() < 1e-14);
        assert!((law.prob(&Spectrum::giant(2)) - w_b / (w_a + w_b)).abs() < 1e-14);
    }

    #[test]
    fn guard() {
        let m = Model::new(ModelSpec::poisson_power(1.5, 1.0)).unwrap();
        assert!(matches!(spectrum_law_bruteforce(&m, 41), Err(Error::Size { .. })));
    }

    #[test]
    fn tv_basics() {
        let a = SpectrumLaw::point(3, Spectrum::giant(3));
        let b = SpectrumLaw::point(3, Spectrum::from_counts(&[3]));
        assert_eq!(tv_distance(&a, &a).value, 0.0);
        assert_eq!(tv_distance(&a, &b), TvDistance { value: 1.0, error: 0.0 });
        let mut c = a.clone();
        c.entries.insert(Spectrum::giant(3), 0.9);
        c.uncovered = 0.1;
        c.uncovered_min_weight = Some(4);
        let d = tv_distance(&a, &c);
        assert!((d.value - 0.1).abs() < 1e-15 && d.error == 0.0);
        c.uncovered_min_weight = None;
        let d = tv_distance(&a, &c);
        assert!((d.value - 0.05).abs() < 1e-15 && (d.error - 0.1).abs() < 1e-15);
    }
}
