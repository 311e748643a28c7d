//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use convspec::exact::{for_each_partition, Spectrum, SpectrumLaw};
use convspec::{Family, Model, ModelSpec};

pub fn poisson_model() -> Model {
    Model::new(ModelSpec::poisson_power(1.5, 1.0)).unwrap()
}

pub fn forest_model() -> Model {
    Model::new(ModelSpec::forest(Family::ForestUnlabelledUnrooted)).unwrap()
}

pub fn ln_factorial(k: usize) -> f64 {
    (1..=k).map(|i| (i as f64).ln()).sum()
}

/// `sum over partitions y of n of prod_j a_j^{y_j} / y_j!`.
pub fn partition_sum(a: &dyn Fn(usize) -> f64, n: usize) -> f64 {
    let mut total = 0.0;
    for_each_partition(n, |counts| {
        let mut ln = 0.0;
        for (i, &y) in counts.iter().enumerate() {
            if y > 0 {
                ln += y as f64 * a(i + 1).ln() - ln_factorial(y);
            }
        }
        total += ln.exp();
    });
    total
}

/// `P[sum_{j<=n} j Z_j = n]` for independent `Z_j ~ Poisson(a_j)`, by
/// summing the Poisson mass function over all partitions of `n`.
pub fn poisson_point_mass(a: &dyn Fn(usize) -> f64, n: usize) -> f64 {
    let sum_a: f64 = (1..=n).map(a).sum();
    (-sum_a).exp() * partition_sum(a, n)
}

/// `P[sum_{j<=n} j Z_j = l]`, `0 <= l <= n`, for Poisson species through the
/// recursion `l p_l = sum_{j<=l} j a_j p_{l-j}`, started from
/// `p_0 = exp(-sum a_j)`.
pub fn poisson_recursion_law(a: &dyn Fn(usize) -> f64, n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n + 1];
    p[0] = (-(1..=n).map(a).sum::<f64>()).exp();
    for l in 1..=n {
        p[l] = (1..=l).map(|j| j as f64 * a(j) * p[l - j]).sum::<f64>() / l as f64;
    }
    p
}

/// Dense marginal of `C_j` from an enumerated law.
pub fn marginal(law: &SpectrumLaw, j: usize) -> Vec<f64> {
    law.pushforward(law.n / j + 1, |s| s.count(j))
}

pub fn max_abs_diff(a: &[f64], b: impl Fn(usize) -> f64) -> f64 {
    a.iter().enumerate().map(|(k, &x)| (x - b(k)).abs()).fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Tree enumeration by canonical forms.

/// Canonical string of a rooted tree given as child lists.
fn canon(children: &[Vec<usize>], v: usize, parent: usize) -> String {
    let mut parts: Vec<String> = children[v]
        .iter()
        .filter(|&&c| c != parent)
        .map(|&c| canon(children, c, v))
        .collect();
    parts.sort();
    format!("({})", parts.concat())
}

fn parse(s: &str) -> Vec<Vec<usize>> {
    // adjacency lists of the tree written as nested parentheses
    let mut adj: Vec<Vec<usize>> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    for ch in s.chars() {
        if ch == '(' {
            let id = adj.len();
            adj.push(Vec::new());
            if let Some(&p) = stack.last() {
                adj[p].push(id);
                adj[id].push(p);
            }
            stack.push(id);
        } else {
            stack.pop();
        }
    }
    adj
}

/// Canonical forms of all rooted unlabelled trees with `1..=nmax` vertices,
/// grown by attaching a leaf at every vertex of every smaller tree.
pub fn rooted_trees(nmax: usize) -> Vec<BTreeSet<String>> {
    let mut levels = vec![BTreeSet::from(["()".to_string()])];
    for _ in 2..=nmax {
        let mut next = BTreeSet::new();
        for t in levels.last().unwrap() {
            let adj = parse(t);
            for v in 0..adj.len() {
                let mut grown = adj.clone();
                let leaf = grown.len();
                grown.push(vec![v]);
                grown[v].push(leaf);
                next.insert(canon(&grown, 0, usize::MAX));
            }
        }
        levels.push(next);
    }
    levels
}

fn centroids(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut best = usize::MAX;
    let mut out = Vec::new();
    for v in 0..n {
        // largest component left after deleting v
        let mut worst = 0;
        for &w in &adj[v] {
            let mut seen = vec![false; n];
            seen[v] = true;
            let mut stack = vec![w];
            seen[w] = true;
            let mut size = 0;
            while let Some(x) = stack.pop() {
                size += 1;
                for &y in &adj[x] {
                    if !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
            worst = worst.max(size);
        }
        if worst < best {
            best = worst;
            out = vec![v];
        } else if worst == best {
            out.push(v);
        }
    }
    out
}

/// Number of free (unrooted) unlabelled trees with `k` vertices for
/// `k = 1..=nmax`: rooted forms re-rooted at a centroid, deduplicated.
pub fn free_tree_counts(nmax: usize) -> Vec<usize> {
    rooted_trees(nmax)
        .iter()
        .map(|level| {
            let free: BTreeSet<String> = level
                .iter()
                .map(|t| {
                    let adj = parse(t);
                    centroids(&adj)
                        .into_iter()
                        .map(|c| canon(&adj, c, usize::MAX))
                        .min()
                        .unwrap()
                })
                .collect();
            free.len()
        })
        .collect()
}

/// Every spectrum of weight `n` with its probability under the enumerated
/// law, for entrywise comparisons.
pub fn entries(law: &SpectrumLaw) -> Vec<(Spectrum, f64)> {
    law.entries.iter().map(|(s, &p)| (s.clone(), p)).collect()
}
