mod common;

use common::{feature_instance, kernel_direct, mmd_sq_double_sum, normal_set};
use mmdkl::bounds;
use mmdkl::discrete::{self, DiscreteDist};
use mmdkl::estimators::{self, EstimatorConfig, Grams};
use mmdkl::kernels::{self, KernelFamily, KernelSpec};
use mmdkl::{seeds, SampleSet};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn plugin_matches_double_sum() {
    let mut rng = seeds::rng(41);
    for i in 0..40 {
        let family = if i % 2 == 0 {
            KernelFamily::GaussianRbf
        } else {
            KernelFamily::InversePolynomial
        };
        let gamma = rng.random_range(0.05..3.0);
        let dim = rng.random_range(1..=3);
        let (m, n) = (rng.random_range(1..=30), rng.random_range(1..=30));
        let x = normal_set(&mut rng, m, dim, 0.5);
        let y = normal_set(&mut rng, n, dim, 0.0);
        let spec = KernelSpec::new(family, gamma).unwrap();
        let g = Grams::compute(&spec, &x, &y).unwrap();
        let got = estimators::mmd_sq_plugin(&g.pp, &g.qq, &g.pq).unwrap();
        let want = mmd_sq_double_sum(family, gamma, &x, &y);
        assert!((got - want).abs() <= 1e-10, "{got} vs {want}");
    }
}

#[test]
fn kernel_eval_matches_closed_form() {
    let mut rng = seeds::rng(2);
    for _ in 0..200 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let gamma = rng.random_range(0.01..5.0);
        for family in [KernelFamily::GaussianRbf, KernelFamily::InversePolynomial] {
            let spec = KernelSpec::new(family, gamma).unwrap();
            let got = kernels::eval_kernel(&spec, &x, &y).unwrap();
            assert!((got - kernel_direct(family, gamma, &x, &y)).abs() <= 1e-15);
        }
    }
}

#[test]
fn woodbury_matches_feature_space() {
    for s in 0..30 {
        let inst = feature_instance(seeds::derive(77, 0, s));
        let want = inst.feature_space_value();
        let got = inst.gram_side_value();
        assert!((got - want).abs() <= 1e-8, "instance {s}: {got} vs {want}");
    }
}

#[test]
fn ub_dominates_plugin_over_lambda_plus_bound() {
    // ⟨d, (Ψ + λ)⁻¹ d⟩ >= ‖d‖² / (‖Ψ‖ + λ) and ‖Ψ‖ <= 1 when k(x, x) = 1
    let mut rng = seeds::rng(9);
    for _ in 0..10 {
        let x = normal_set(&mut rng, 40, 2, 1.0);
        let y = normal_set(&mut rng, 40, 2, 0.0);
        let spec = KernelSpec::rbf(0.5).unwrap();
        let g = Grams::compute(&spec, &x, &y).unwrap();
        let mmd = estimators::mmd_sq_plugin(&g.pp, &g.qq, &g.pq).unwrap();
        for lambda in [1e-3, 1e-2, 1e-1, 1.0] {
            let ub = estimators::ub_statistic_sq_from_grams(&g, lambda).unwrap();
            assert!(ub >= mmd / (1.0 + lambda) * (1.0 - 1e-9));
            assert!(ub <= mmd / lambda * (1.0 + 1e-9));
        }
    }
}

#[test]
fn identical_samples_give_zero_bounds() {
    let mut rng = seeds::rng(3);
    let x = normal_set(&mut rng, 50, 3, 0.0);
    let est = bounds::kl_bounds(&EstimatorConfig::default(), 1.0, &x, &x).unwrap();
    assert!(est.kl_lower.abs() <= 1e-9 && est.kl_upper.abs() <= 1e-9, "{est:?}");
}

#[test]
fn discrete_mmd_sup_is_sign_witness() {
    for i in 0..100 {
        let (p, q) = discrete::suite_pair(12, i, 2, 8).unwrap();
        let witness: f64 = p
            .probs()
            .iter()
            .zip(q.probs())
            .map(|(a, b)| (a - b).signum() * (a - b))
            .sum();
        assert!((discrete::exact_mmd_sup(&p, &q).unwrap() - witness).abs() <= 1e-15);
    }
}

fn arb_dist(k: usize) -> impl Strategy<Value = DiscreteDist> {
    prop::collection::vec(1e-3f64..1.0, k).prop_map(|w| DiscreteDist::from_weights(&w).unwrap())
}

fn arb_pair() -> impl Strategy<Value = (DiscreteDist, DiscreteDist)> {
    (2usize..=10).prop_flat_map(|k| (arb_dist(k), arb_dist(k)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn chain_holds_for_arbitrary_pairs((p, q) in arb_pair()) {
        let r = discrete::verify_chain(&p, &q).unwrap();
        prop_assert!(r.all_hold, "{:?}", r.violations);
    }

    #[test]
    fn kl_bracket_from_exact_mmds((p, q) in arb_pair()) {
        let kl = discrete::kl_discrete(&p, &q).unwrap();
        let sup = discrete::exact_mmd_sup(&p, &q).unwrap();
        let l2 = discrete::exact_mmd_l2(&p, &q, discrete::Nu::Reference).unwrap();
        let lo = bounds::kl_lower_from_mmd(sup).unwrap();
        let hi = bounds::kl_upper_from_mmd_sq(l2 * l2).unwrap();
        prop_assert!(lo <= kl + 1e-9 && kl <= hi + 1e-9, "{lo} {kl} {hi}");
    }

    #[test]
    fn plugin_mmd_is_symmetric_and_nonnegative(seed in any::<u64>(), m in 1usize..15, n in 1usize..15) {
        let mut rng = seeds::rng(seed);
        let x = normal_set(&mut rng, m, 2, 0.3);
        let y = normal_set(&mut rng, n, 2, 0.0);
        let spec = KernelSpec::inverse_polynomial(0.7).unwrap();
        let a = Grams::compute(&spec, &x, &y).unwrap();
        let b = Grams::compute(&spec, &y, &x).unwrap();
        let ab = estimators::mmd_sq_plugin(&a.pp, &a.qq, &a.pq).unwrap();
        let ba = estimators::mmd_sq_plugin(&b.pp, &b.qq, &b.pq).unwrap();
        prop_assert!(ab >= 0.0 && (ab - ba).abs() <= 1e-12);
    }

    #[test]
    fn ub_non_increasing_in_lambda(seed in any::<u64>()) {
        let mut rng = seeds::rng(seed);
        let x = normal_set(&mut rng, 30, 2, 0.7);
        let y = normal_set(&mut rng, 30, 2, 0.0);
        let g = Grams::compute(&KernelSpec::rbf(0.3).unwrap(), &x, &y).unwrap();
        let mut prev = f64::INFINITY;
        for lambda in [1e-3, 1e-2, 1e-1, 1.0] {
            let v = estimators::ub_statistic_sq_from_grams(&g, lambda).unwrap();
            prop_assert!(v <= prev * (1.0 + 1e-9));
            prev = v;
        }
    }

    #[test]
    fn woodbury_random_instances(seed in any::<u64>()) {
        let inst = feature_instance(seed);
        let want = inst.feature_space_value();
        prop_assert!((inst.gram_side_value() - want).abs() <= 1e-8);
    }
}

#[test]
fn lb_statistic_is_family_max() {
    let mut rng = seeds::rng(5);
    let x = normal_set(&mut rng, 30, 2, 0.4);
    let y = normal_set(&mut rng, 30, 2, 0.0);
    let family: Vec<KernelSpec> = [0.1, 0.3, 1.0]
        .iter()
        .map(|&g| KernelSpec::rbf(g).unwrap())
        .collect();
    let (lb, chosen) = estimators::lb_statistic(&family, &x, &y).unwrap();
    for k in &family {
        let v = mmd_sq_double_sum(KernelFamily::GaussianRbf, k.gamma(), &x, &y).max(0.0).sqrt();
        assert!(v <= lb + 1e-12);
    }
    let best = mmd_sq_double_sum(KernelFamily::GaussianRbf, chosen.gamma(), &x, &y).sqrt();
    assert!((best - lb).abs() <= 1e-10);
}

#[test]
fn sample_set_row_major() {
    let s = SampleSet::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
    assert_eq!(s.as_flat(), &[1.0, 2.0, 3.0, 4.0]);
}
