mod common;

use common::*;
use convspec::exact::{
    bruteforce_with_normalizer, general_recursion_residual, limit_laws, partition_function,
    poisson_recursion_residual, qn_law, spectrum_law_bruteforce, suffix_table, t_distribution, tv_distance,
    upper_bound_constant, ExactEngine, QnOptions, Spectrum,
};
use convspec::{Error, Model, ModelSpec, Pmf};

fn a_poisson(j: usize) -> f64 {
    (j as f64).powf(-2.5)
}

#[test]
fn t_distribution_point_mass_at_ten() {
    let m = poisson_model();
    let t = t_distribution(&m, 0, 10).unwrap();
    let want = poisson_point_mass(&a_poisson, 10);
    assert!((t.prob(10) - want).abs() < 1e-14, "{} vs {want}", t.prob(10));
}

#[test]
fn full_table_at_six_matches_dp_construction() {
    let m = poisson_model();
    let (law, ln_norm) = bruteforce_with_normalizer(&m, 6).unwrap();
    assert_eq!(law.entries.len(), 11);
    let t = t_distribution(&m, 0, 6).unwrap();
    assert!((ln_norm.exp() - t.prob(6)).abs() < 1e-10);
    // each spectrum's probability is its Poisson weight over P[T_06 = 6]
    for (s, p) in entries(&law) {
        let ln_w: f64 = (1..=6)
            .map(|j| {
                let y = s.count(j);
                let a = a_poisson(j);
                -a + y as f64 * a.ln() - ln_factorial(y)
            })
            .sum();
        assert!((p - ln_w.exp() / t.prob(6)).abs() < 1e-12, "{s}");
    }
    law.check_conservation(1e-10).unwrap();
}

#[test]
fn normalizer_matches_dp_for_both_models() {
    for m in [poisson_model(), forest_model()] {
        for n in [5, 12, 25] {
            let (_, ln_norm) = bruteforce_with_normalizer(&m, n).unwrap();
            let t = t_distribution(&m, 0, n).unwrap();
            assert!((ln_norm.exp() - t.prob(n)).abs() < 1e-10);
        }
    }
}

#[test]
fn suffix_columns_are_t_laws() {
    let m = forest_model();
    let n = 40;
    let tab = suffix_table(&m, n).unwrap();
    for b in [0, n / 2, n - 1] {
        let t = t_distribution(&m, b, n).unwrap();
        for l in 0..=n {
            assert!((tab.d(b + 1, l) - t.prob(l)).abs() < 1e-12);
        }
    }
    for j in 1..=n + 1 {
        tab.column(j).check_conservation().unwrap();
    }
}

fn assert_dp_matches_bruteforce(m: &Model, n: usize) {
    let brute = spectrum_law_bruteforce(m, n).unwrap();
    let e = ExactEngine::new(m, n).unwrap();
    for j in 1..=n {
        let dp = e.conditional_marginal(j).unwrap();
        let bf = marginal(&brute, j);
        assert!(max_abs_diff(&bf, |k| dp.prob(k)) < 1e-10, "C_{j}, n={n}");
    }
    let y = e.largest_component_law().unwrap();
    let bf = brute.pushforward(n + 1, |s| s.largest().unwrap());
    assert!(max_abs_diff(&bf, |k| y.prob(k)) < 1e-10, "Y_n, n={n}");
    let k = e.smallest_component_law().unwrap();
    let bf = brute.pushforward(n + 1, |s| s.smallest().unwrap());
    assert!(max_abs_diff(&bf, |i| k.prob(i)) < 1e-10, "K_n, n={n}");
    let x = e.component_count_law(n).unwrap();
    let bf = brute.pushforward(n + 1, |s| s.components());
    assert!(max_abs_diff(&bf, |i| x.prob(i)) < 1e-10, "X_n, n={n}");
}

#[test]
fn dp_laws_match_enumeration() {
    for m in [poisson_model(), forest_model()] {
        for n in [6, 12, 20] {
            assert_dp_matches_bruteforce(&m, n);
        }
    }
}

#[test]
fn labelled_forest_and_tilted_laws_match_enumeration() {
    let m = Model::new(ModelSpec::forest(convspec::Family::ForestLabelledRooted)).unwrap();
    assert_dp_matches_bruteforce(&m, 15);
    let m = poisson_model().tilted(1.7).unwrap();
    assert_dp_matches_bruteforce(&m, 15);
}

#[test]
fn count_mean_two_ways() {
    for m in [poisson_model(), forest_model()] {
        let e = ExactEngine::new(&m, 60).unwrap();
        let x = e.component_count_law(60).unwrap();
        assert!((x.mean() - e.mean_component_count().unwrap()).abs() < 1e-8);
    }
}

#[test]
fn tilting_leaves_conditional_laws_unchanged() {
    // Exact only for untruncated laws; a tiny tau keeps the dropped tails far
    // below P[T = n] on both sides of the tilt.
    let specs = [
        ModelSpec::poisson_power(1.5, 1.0),
        ModelSpec::forest(convspec::Family::ForestUnlabelledUnrooted),
    ];
    for spec in specs {
        let base = Model::new(spec.with_tau(1e-30)).unwrap();
        let law = spectrum_law_bruteforce(&base, 20).unwrap();
        let e0 = ExactEngine::new(&base, 20).unwrap();
        for x in [0.5, 2.0] {
            let tilted = base.tilted(x).unwrap();
            let other = spectrum_law_bruteforce(&tilted, 20).unwrap();
            // truncation may drop different negligible spectra on each side
            for (s, p) in law.entries.iter().chain(&other.entries) {
                assert!((law.prob(s) - other.prob(s)).abs() < 1e-9, "x={x} {s} {p}");
            }
            let e1 = ExactEngine::new(&tilted, 20).unwrap();
            for j in [1, 2, 7, 20] {
                let (a, b) = (e0.conditional_marginal(j).unwrap(), e1.conditional_marginal(j).unwrap());
                assert!(max_abs_diff(a.probs(), |k| b.prob(k)) < 1e-9, "x={x} j={j}");
            }
        }
    }
}

#[test]
fn partition_function_is_partition_sum() {
    let m = poisson_model();
    for n in [1, 5, 10, 20] {
        let c = partition_function(&m, n).unwrap();
        let want = partition_sum(&a_poisson, n);
        assert!((c - want).abs() < 1e-10 * want.max(1.0), "n={n}: {c} vs {want}");
    }
}

#[test]
fn partition_function_single_species() {
    // a_1 = t, a_j = 0 for j >= 2 gives c_n = t^n / n!
    let t = 2.5;
    let mut values = vec![1e-300; 9];
    values[0] = 1.0;
    let spec = ModelSpec::poisson_power(1.5, t)
        .with_lambda(convspec::LambdaSpec::Table { values, sup_beyond: Some(1e-300) });
    let m = Model::new(spec).unwrap();
    for n in [1usize, 4, 9] {
        let c = partition_function(&m, n).unwrap();
        let want = (n as f64 * t.ln() - ln_factorial(n)).exp();
        assert!((c - want).abs() < 1e-10 * want, "n={n}: {c} vs {want}");
    }
}

#[test]
fn poisson_recursion_residuals() {
    let m = poisson_model();
    for b in [0, 50, 199] {
        assert!(poisson_recursion_residual(&m, b, 200).unwrap() < 1e-10, "b={b}");
    }
    // a perturbed Z_1 breaks the identity
    let law = m.species_pmf(1).unwrap();
    let mut probs = law.probs().to_vec();
    probs[0] -= 1e-3;
    probs[1] += 1e-3;
    let bent = m.clone().with_override(1, Pmf::from_table(0, probs, law.tail()).unwrap());
    assert!(poisson_recursion_residual(&bent, 0, 200).unwrap() > 1e-4);
}

#[test]
fn general_recursion_forest() {
    let m = forest_model();
    assert!(general_recursion_residual(&m, 0, 100).unwrap() < 1e-9);
}

#[test]
fn upper_bound_constant_does_not_explode() {
    for m in [poisson_model(), forest_model()] {
        let k100 = upper_bound_constant(&m, 100).unwrap();
        let k400 = upper_bound_constant(&m, 400).unwrap();
        assert!(k100.is_finite() && k400 <= 2.0 * k100 + 1.0, "{k100} {k400}");
    }
}

#[test]
fn rho_connect_against_direct_sum() {
    let m = poisson_model();
    let l = limit_laws(&m, 1e-7, 10, 10).unwrap();
    // sum_{j<=10^6} j^{-5/2} summed from the small end, plus an integral
    // bracket for the rest
    let big = 1_000_000usize;
    let head: f64 = (1..=big).rev().map(a_poisson).sum();
    let tail_lo = (big as f64 + 1.0).powf(-1.5) / 1.5;
    let tail_hi = (big as f64).powf(-1.5) / 1.5;
    let (lo, hi) = ((-(head + tail_hi)).exp(), (-(head + tail_lo)).exp());
    assert!(l.rho_bracket.0 <= hi + 1e-13 && l.rho_bracket.1 >= lo - 1e-13);
    assert!((l.rho_connect - (lo + hi) / 2.0).abs() < 1e-7 * l.rho_connect);
}

#[test]
fn limit_single_unit() {
    let m = poisson_model();
    let l = limit_laws(&m, 1e-6, 20, 5).unwrap();
    let a1 = a_poisson(1);
    let rest: f64 = (2..=l.truncation).map(|j| (-a_poisson(j)).exp()).product();
    assert!((l.total_weight.prob(1) - a1 * (-a1).exp() * rest).abs() < 1e-12);
}

#[test]
fn qn_off_weight_mass_below_t_tail() {
    let m = poisson_model();
    let n = 20;
    let q = qn_law(&m, n, QnOptions::new(1e-6)).unwrap();
    let t = t_distribution(&m, 0, n).unwrap();
    let at_least_n = t.prob(n) + t.tail();
    let off: f64 = q.entries.iter().filter(|(s, _)| s.weight() != n).map(|(_, p)| p).sum();
    assert!(off <= at_least_n);
    assert!(q.total() >= 1.0 - 1e-6);
    q.check_conservation(1e-10).unwrap();
}

#[test]
fn tv_regression_brute_vs_qn() {
    let m = poisson_model();
    let p = spectrum_law_bruteforce(&m, 20).unwrap();
    let q = qn_law(&m, 20, QnOptions::new(1e-6)).unwrap();
    let d = tv_distance(&p, &q);
    assert!(d.value > 0.0 && d.value < 1.0);
    assert!((d.value - 0.13598640625).abs() < 1e-9, "{}", d.value);
    assert_eq!(tv_distance(&p, &p).value, 0.0);
}

#[test]
fn conditioning_impossible_is_reported() {
    use convspec::model::CustomTable;
    // only components of size 2 exist; odd n cannot be reached
    let table = CustomTable {
        laws: vec![Pmf::point(0), Pmf::from_table(0, vec![0.5, 0.5], 0.0).unwrap()],
        zero_beyond: true,
        tail_bound: None,
    };
    let m = Model::new(ModelSpec::custom(1.0, table)).unwrap();
    assert!(matches!(ExactEngine::new(&m, 3), Err(Error::ConditioningImpossible { n: 3 })));
    assert!(matches!(spectrum_law_bruteforce(&m, 3), Err(Error::ConditioningImpossible { n: 3 })));
    let e = ExactEngine::new(&m, 2).unwrap();
    assert_eq!(e.conditional_marginal(2).unwrap().prob(1), 1.0);
    let law = spectrum_law_bruteforce(&m, 2).unwrap();
    assert_eq!(law.prob(&Spectrum::giant(2)), 1.0);
}
