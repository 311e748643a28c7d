use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exact::spectrum::{Spectrum, SpectrumLaw};
use crate::exact::tables::{PrefixTable, ScaledColumn};
use crate::model::Model;
use crate::pmf::Pmf;

pub const DEFAULT_NODE_BUDGET: usize = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QnOptions {
    /// Largest mass left unenumerated.
    pub delta: f64,
    /// Upper limit on search nodes visited.
    pub node_budget: usize,
}

impl QnOptions {
    pub fn new(delta: f64) -> Self {
        QnOptions { delta, node_budget: DEFAULT_NODE_BUDGET }
    }
}

/// The law of `(Z_1..Z_n)` with one extra component of size `n - T_0n`
/// added whenever that is positive.
///
/// Every configuration of total weight at most `n` is enumerated. Heavier
/// ones are enumerated until the mass left out is below `delta`; it all sits
/// on spectra of weight above `n`.
pub fn qn_law(model: &Model, n: usize, opts: QnOptions) -> Result<SpectrumLaw> {
    if n == 0 {
        return Err(Error::domain("n must be >= 1"));
    }
    if !(opts.delta > 0.0 && opts.delta <= 1e-3) {
        return Err(Error::domain("delta must lie in (0, 1e-3]"));
    }
    let species = model.species_laws(n)?;

    let t_max = weight_cutoff(&species, n, opts.delta / 2.0)?;
    let prefix = PrefixTable::build(&species, 1, n, t_max)?;
    let cdfs: Vec<Vec<f64>> = (0..=n).map(|k| cumulative(prefix.column(k))).collect();
    let mut zero_runs = vec![(0.0f64, 0usize); n + 1];
    for j in 1..=n {
        let p0 = species[j - 1].prob(0);
        let (ln, zeros) = zero_runs[j - 1];
        zero_runs[j] = if p0 > 0.0 { (ln + p0.ln(), zeros) } else { (ln, zeros + 1) };
    }

    let mut search = Search {
        n,
        t_max,
        species: &species,
        cdfs: &cdfs,
        zero_runs: &zero_runs,
        allowance: opts.delta / 2.0,
        threshold: opts.delta / 2.0 / PRUNE_SLOTS,
        nodes: 0,
        budget: opts.node_budget,
        stack: Vec::new(),
        out: HashMap::new(),
    };
    search.visit(n, 0, 1.0)?;

    let entries: BTreeMap<Spectrum, f64> = search.out.into_iter().collect();
    let total: f64 = entries.values().sum();
    let uncovered = (1.0 - total).max(0.0);
    if uncovered > opts.delta {
        return Err(Error::Internal(format!("left {uncovered} unenumerated, above delta")));
    }
    Ok(SpectrumLaw { n, entries, uncovered, uncovered_min_weight: Some(n + 1) })
}

/// Subtrees lighter than `allowance / PRUNE_SLOTS` may be skipped.
const PRUNE_SLOTS: f64 = 1e5;

/// Smallest `t >= n` with `P[T_0n > t] < eps`.
fn weight_cutoff(species: &[Arc<Pmf>], n: usize, eps: f64) -> Result<usize> {
    let mut cap = 2 * n;
    loop {
        let mut col = ScaledColumn::delta_zero(cap);
        for (i, law) in species.iter().enumerate() {
            col = col.add_scaled(i + 1, law);
        }
        if col.overflow < eps {
            let mut above = col.overflow;
            let mut t = cap;
            while t > n {
                let p = col.prob(t);
                if above + p >= eps {
                    break;
                }
                above += p;
                t -= 1;
            }
            return Ok(t);
        }
        if cap > 1 << 20 {
            return Err(Error::Budget { budget: cap });
        }
        cap *= 2;
    }
}

fn cumulative(col: &ScaledColumn) -> Vec<f64> {
    let mut acc = 0.0;
    (0..=col.cap())
        .map(|t| {
            acc += col.prob(t);
            acc
        })
        .collect()
}

struct Search<'a> {
    n: usize,
    t_max: usize,
    species: &'a [Arc<Pmf>],
    /// `cdfs[k][t] = P[T_0k <= t]`.
    cdfs: &'a [Vec<f64>],
    /// `(sum ln P[Z_i = 0], #{i : P[Z_i = 0] = 0})` over `i <= k`.
    zero_runs: &'a [(f64, usize)],
    allowance: f64,
    threshold: f64,
    nodes: usize,
    budget: usize,
    /// Non-zero `(j, y)` chosen so far, in decreasing `j`.
    stack: Vec<(usize, usize)>,
    out: HashMap<Spectrum, f64>,
}

impl Search<'_> {
    /// Chooses `Z_level, Z_{level-1}, .., Z_1` given weight `w` so far.
    fn visit(&mut self, level: usize, w: usize, p: f64) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::Budget { budget: self.budget });
        }
        let room = self.t_max - w;
        let (mut level, mut p) = (level, p);
        if level > room {
            // species too heavy to fit are all zero
            let (hi_ln, hi_z) = self.zero_runs[level];
            let (lo_ln, lo_z) = self.zero_runs[room];
            if hi_z > lo_z {
                return Ok(());
            }
            p *= (hi_ln - lo_ln).exp();
            level = room;
        }
        if level == 0 {
            self.record(w, p);
            return Ok(());
        }
        let law = self.species[level - 1].clone();
        for (y, py) in law.iter() {
            let w2 = w + level * y;
            if w2 > self.t_max {
                break;
            }
            let p2 = p * py;
            if p2 == 0.0 {
                continue;
            }
            if w2 > self.n {
                let mass = p2 * self.cdfs[level - 1][self.t_max - w2];
                if mass < self.threshold && mass <= self.allowance {
                    self.allowance -= mass;
                    continue;
                }
            }
            if y > 0 {
                self.stack.push((level, y));
            }
            self.visit(level - 1, w2, p2)?;
            if y > 0 {
                self.stack.pop();
            }
        }
        Ok(())
    }

    fn record(&mut self, w: usize, p: f64) {
        let mut pairs: Vec<(usize, usize)> = self.stack.iter().rev().copied().collect();
        if w < self.n {
            let extra = self.n - w;
            match pairs.binary_search_by_key(&extra, |&(j, _)| j) {
                Ok(i) => pairs[i].1 += 1,
                Err(i) => pairs.insert(i, (extra, 1)),
            }
        }
        let s = Spectrum::from_pairs(pairs).expect("sizes are distinct and positive");
        *self.out.entry(s).or_insert(0.0) += p;
    }
}
