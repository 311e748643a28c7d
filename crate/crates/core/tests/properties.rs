use std::sync::Arc;

use convspec::exact::{spectrum_law_bruteforce, ExactEngine, Spectrum};
use convspec::model::CustomTable;
use convspec::samplers::{sample_spectrum_exact, SamplerState};
use convspec::{scaled_convolve, Model, ModelSpec, Pmf, ScaledVar};
use proptest::prelude::*;

fn finite_pmf() -> impl Strategy<Value = Pmf> {
    (prop::collection::vec(0.01f64..1.0, 1..6), 0usize..3).prop_map(|(w, offset)| {
        let total: f64 = w.iter().sum();
        Pmf::from_table(offset, w.iter().map(|x| x / total).collect(), 0.0).unwrap()
    })
}

fn custom_model(laws: Vec<Pmf>) -> Model {
    let table = CustomTable { laws, zero_beyond: true, tail_bound: None };
    Model::new(ModelSpec::custom(1.0, table)).unwrap()
}

/// Species laws that all put mass on zero, so every weight is reachable
/// through `Z_1`.
fn reachable_laws(len: usize) -> impl Strategy<Value = Vec<Pmf>> {
    prop::collection::vec(prop::collection::vec(0.05f64..1.0, 2..5), len).prop_map(|rows| {
        rows.into_iter()
            .map(|w| {
                let total: f64 = w.iter().sum();
                Pmf::from_table(0, w.iter().map(|x| x / total).collect(), 0.0).unwrap()
            })
            .collect()
    })
}

fn convolve_all(laws: &[(usize, Pmf)], cap: usize) -> Pmf {
    let mut acc = Pmf::capped_zero(cap);
    for (j, law) in laws {
        acc = scaled_convolve(&acc, &ScaledVar::new(*j, Arc::new(law.clone())).unwrap(), cap).unwrap();
    }
    acc
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn convolution_conserves_mass(a in finite_pmf(), b in finite_pmf(), cap in 1usize..30) {
        let c = convolve_all(&[(1, a), (3, b)], cap);
        prop_assert!((c.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn convolution_commutes(a in finite_pmf(), b in finite_pmf(), ja in 1usize..5, jb in 1usize..5) {
        let x = convolve_all(&[(ja, a.clone()), (jb, b.clone())], 40);
        let y = convolve_all(&[(jb, b), (ja, a)], 40);
        for s in 0..=40 {
            prop_assert!((x.prob(s) - y.prob(s)).abs() < 1e-15);
        }
        prop_assert!((x.tail() - y.tail()).abs() < 1e-15);
    }

    #[test]
    fn unit_tilt_is_neutral(a in finite_pmf(), j in 1usize..6) {
        prop_assert_eq!(a.tilt(j, 1.0).unwrap(), a.clone());
        let back = a.tilt(j, 1.3).unwrap().tilt(j, 1.0 / 1.3).unwrap();
        for (s, p) in a.iter() {
            prop_assert!((back.prob(s) - p).abs() < 1e-14);
        }
    }

    #[test]
    fn tilts_compose(a in finite_pmf(), j in 1usize..4, x in 0.3f64..3.0, y in 0.3f64..3.0) {
        let two = a.tilt(j, x).unwrap().tilt(j, y).unwrap();
        let one = a.tilt(j, x * y).unwrap();
        for (s, p) in one.iter() {
            prop_assert!((two.prob(s) - p).abs() < 1e-10);
        }
    }

    #[test]
    fn poisson_is_closed_under_tilting(mean in 0.05f64..20.0, j in 1usize..4, x in 0.2f64..1.0) {
        let tilted = Pmf::poisson(mean, 1e-14).unwrap().tilt(j, x).unwrap();
        let direct = Pmf::poisson(mean * x.powi(j as i32), 1e-14).unwrap();
        for s in 0..direct.end() {
            prop_assert!((tilted.prob(s) - direct.prob(s)).abs() < 1e-10);
        }
    }

    #[test]
    fn conditional_law_ignores_tilt(laws in reachable_laws(6), x in 0.3f64..3.0, n in 1usize..=6) {
        let base = custom_model(laws);
        let tilted = base.tilted(x).unwrap();
        let p = spectrum_law_bruteforce(&base, n).unwrap();
        let q = spectrum_law_bruteforce(&tilted, n).unwrap();
        for (s, v) in p.entries.iter().chain(&q.entries) {
            prop_assert!((p.prob(s) - q.prob(s)).abs() < 1e-12, "{} {}", s, v);
        }
    }

    #[test]
    fn conditional_law_sums_to_one(laws in reachable_laws(8), n in 1usize..=8) {
        let law = spectrum_law_bruteforce(&custom_model(laws), n).unwrap();
        prop_assert!(law.check_conservation(1e-12).is_ok());
        prop_assert!(law.entries.keys().all(|s| s.weight() == n));
    }

    #[test]
    fn sampler_hits_the_target_weight(laws in reachable_laws(8), n in 1usize..=8, seed in any::<u64>()) {
        let m = custom_model(laws);
        let e = ExactEngine::new(&m, n).unwrap();
        let law = spectrum_law_bruteforce(&m, n).unwrap();
        let mut st = SamplerState::new(seed);
        for _ in 0..20 {
            let s = sample_spectrum_exact(&e, &mut st).unwrap();
            prop_assert_eq!(s.weight(), n);
            prop_assert!(law.prob(&s) > 0.0);
        }
    }

    #[test]
    fn spectrum_counts_round_trip(counts in prop::collection::vec(0usize..4, 1..10)) {
        let s = Spectrum::from_counts(&counts);
        let w: usize = counts.iter().enumerate().map(|(i, c)| (i + 1) * c).sum();
        prop_assert_eq!(s.weight(), w);
        for (i, &c) in counts.iter().enumerate() {
            prop_assert_eq!(s.count(i + 1), c);
        }
    }
}
