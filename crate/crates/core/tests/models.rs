mod common;

use common::*;
use convspec::trees::{rooted_tree_counts, unrooted_tree_counts};
use convspec::{otter_constants, Family, Model, ModelSpec, TreeCounts};
use num_bigint::BigUint;

const ROOTED: [u64; 10] = [1, 1, 2, 4, 9, 20, 48, 115, 286, 719];
const FREE: [u64; 10] = [1, 1, 1, 2, 3, 6, 11, 23, 47, 106];

fn as_u64(v: &[BigUint]) -> Vec<u64> {
    v.iter().map(|x| x.to_u64_digits().first().copied().unwrap_or(0)).collect()
}

#[test]
fn rooted_counts_match_enumeration() {
    let enumerated: Vec<u64> = rooted_trees(10).iter().map(|s| s.len() as u64).collect();
    assert_eq!(enumerated, ROOTED);
    assert_eq!(as_u64(&rooted_tree_counts(10)), ROOTED);
}

#[test]
fn free_counts_match_enumeration() {
    let enumerated: Vec<u64> = free_tree_counts(10).into_iter().map(|c| c as u64).collect();
    assert_eq!(enumerated, FREE);
    let r = rooted_tree_counts(10);
    assert_eq!(as_u64(&unrooted_tree_counts(&r).unwrap()), FREE);
}

#[test]
fn otter_rho_is_stable_across_horizons() {
    let a = otter_constants(&TreeCounts::compute(200).unwrap(), 1e-6).unwrap();
    let b = otter_constants(&TreeCounts::compute(400).unwrap(), 1e-6).unwrap();
    assert!((a.rho - b.rho).abs() < 5e-5 * b.rho, "{} {}", a.rho, b.rho);
    assert!((b.rho - 0.33832).abs() < 1e-5, "{}", b.rho);
    assert!((a.c_unrooted - b.c_unrooted).abs() < 1e-3 * b.c_unrooted);
}

fn lambdas(m: &Model, js: std::ops::RangeInclusive<usize>) -> Vec<f64> {
    js.map(|j| m.lambda(j).unwrap()).collect()
}

fn relative_oscillation(v: &[f64]) -> f64 {
    let hi = v.iter().copied().fold(f64::MIN, f64::max);
    let lo = v.iter().copied().fold(f64::MAX, f64::min);
    (hi - lo) / lo
}

#[test]
#[ignore = "lambda(j) still drifts by ~1.5% over j = 50..200; the O(1/j) correction is too slow for a 1% band"]
fn forest_lambda_oscillation_within_one_percent() {
    let m = forest_model();
    let osc = relative_oscillation(&lambdas(&m, 50..=200));
    assert!(osc < 0.01, "{osc}");
}

#[test]
fn forest_lambda_converges_to_amplitude() {
    let m = forest_model();
    let c = m.otter().unwrap().c_unrooted;
    let err = |j: usize| (m.lambda(j).unwrap() - c).abs() / c;
    assert!(err(400) < 0.005, "{}", err(400));
    assert!(err(400) < err(200) && err(200) < err(100) && err(100) < err(50));
    let osc_late = relative_oscillation(&lambdas(&m, 200..=400));
    let osc_early = relative_oscillation(&lambdas(&m, 50..=200));
    assert!(osc_late < osc_early / 2.0, "{osc_late} {osc_early}");
}

#[test]
fn labelled_forest_lambda_tends_to_stirling_constant() {
    let limit = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    for fam in [Family::ForestLabelledRooted, Family::ForestLabelledUnrooted] {
        let m = Model::new(ModelSpec::forest(fam)).unwrap();
        let v = m.lambda(400).unwrap();
        // Stirling: lambda(j) = limit * (1 - 1/(12 j) + ..)
        assert!((v / limit - 1.0).abs() < 1.0 / (12.0 * 400.0) * 1.01, "{fam:?} {v}");
    }
}

#[test]
fn forest_species_means() {
    let m = forest_model();
    let rho = m.otter().unwrap().rho;
    for j in [1usize, 3, 10] {
        let law = m.species_pmf(j).unwrap();
        let p = rho.powi(j as i32);
        let want = FREE[j - 1] as f64 * p / (1.0 - p);
        assert!((law.mean() - want).abs() < 1e-12 * want.max(1.0));
        let p0 = (1.0 - p).powf(FREE[j - 1] as f64);
        assert!((law.prob(0) - p0).abs() < 1e-14 * p0, "{} {p0}", law.prob(0));
    }
}

#[test]
fn tilted_forest_scales_p() {
    let m = forest_model();
    let x = 0.7;
    let t = m.tilted(x).unwrap();
    let rho = m.otter().unwrap().rho;
    let p = (rho * x).powi(4);
    let want = (1.0 - p).powf(2.0);
    assert!((t.species_pmf(4).unwrap().prob(0) - want).abs() < 1e-15);
}
