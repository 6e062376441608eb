//! The strided accumulator and its stripe decomposition against brute-force
//! enumeration of the clone pair.

use shuffle_dp::clones::{
    default_stride, delta_exact_small, delta_upper, eps_upper, stripe_divergence, Direction,
    SearchConfig, Termination, ORACLE_CAP,
};
use shuffle_dp::dist::{clone_joint_pmf, log_binom_pmf, CloneInstance, Side};

fn exact_cfg() -> SearchConfig {
    SearchConfig {
        iterations: 40,
        stride: 1,
        delta_budget: 1.0,
    }
}

/// Conditional hockey-stick divergence at count c by direct enumeration over a.
fn stripe_oracle(inst: &CloneInstance, c: u64, eps: f64, direction: Direction) -> f64 {
    let mass_c = log_binom_pmf(inst.n() - 1, inst.p(), c as i64)
        .unwrap()
        .prob();
    let mut acc = 0.0;
    for a in 0..=c as i64 + 1 {
        let p = clone_joint_pmf(inst, a, c as i64, Side::P).prob();
        let q = clone_joint_pmf(inst, a, c as i64, Side::Q).prob();
        let gap = match direction {
            Direction::Plus => p - eps.exp() * q,
            Direction::Minus => q - eps.exp() * p,
        };
        if gap > 0.0 {
            acc += gap;
        }
    }
    acc / mass_c
}

#[test]
fn stripe_spot_value_at_origin() {
    // c = 0, eps = 0, eps0 = ln 3: the conditional pair is (3/4, 1/4) vs
    // (1/4, 3/4), so the one-sided divergence is 1/2.
    let inst = CloneInstance::new(2, 3.0f64.ln()).unwrap();
    for direction in Direction::BOTH {
        let v = stripe_divergence(0, 0.0, &inst, direction).unwrap();
        assert!((v - 0.5).abs() < 1e-14, "stripe at origin: {v}");
    }
}

#[test]
fn stripe_matches_enumeration() {
    for &eps0 in &[0.5f64, 1.0, 3.0] {
        for &eps_frac in &[0.0f64, 0.5] {
            let eps = eps0 * eps_frac;
            let inst = CloneInstance::new(50, eps0).unwrap();
            for c in 0..40u64 {
                for direction in Direction::BOTH {
                    let got = stripe_divergence(c, eps, &inst, direction).unwrap();
                    let want = stripe_oracle(&inst, c, eps, direction);
                    assert!(
                        (got - want).abs() < 1e-12,
                        "stripe c={c} eps0={eps0} eps={eps}: {got} vs {want}"
                    );
                }
            }
        }
    }
}

#[test]
fn stripe_requires_eps_below_eps0() {
    let inst = CloneInstance::new(10, 1.0).unwrap();
    assert!(stripe_divergence(3, 1.0, &inst, Direction::Plus).is_err());
    assert!(stripe_divergence(3, 1.5, &inst, Direction::Plus).is_err());
    assert!(stripe_divergence(3, -0.1, &inst, Direction::Plus).is_err());
}

#[test]
fn stripe_decreasing_in_c() {
    for &(eps0, eps) in &[(0.5f64, 0.25f64), (1.0, 0.5)] {
        let inst = CloneInstance::new(600, eps0).unwrap();
        for direction in Direction::BOTH {
            let mut prev = f64::INFINITY;
            for c in 0..=500u64 {
                let v = stripe_divergence(c, eps, &inst, direction).unwrap();
                if v > 0.0 {
                    assert!(
                        v < prev,
                        "stripe not strictly decreasing at c={c} ({eps0}, {eps})"
                    );
                }
                prev = v;
            }
        }
    }
}

#[test]
fn exact_small_spot_value() {
    // Total variation of the n = 2, eps0 = ln 3 pair: 5/12.
    let inst = CloneInstance::new(2, 3.0f64.ln()).unwrap();
    let v = delta_exact_small(&inst, 0.0).unwrap();
    assert!((v - 5.0 / 12.0).abs() < 1e-15, "delta(2, ln 3, 0) = {v}");
}

#[test]
fn exact_small_is_capped() {
    let inst = CloneInstance::new(ORACLE_CAP + 1, 1.0).unwrap();
    assert!(delta_exact_small(&inst, 0.0).is_err());
}

#[test]
fn accumulator_equals_oracle_unstrided() {
    for &n in &[10u64, 50] {
        for &eps0 in &[0.1f64, 1.0, 3.0] {
            for &eps_frac in &[0.0f64, 0.5] {
                let eps = eps0 * eps_frac;
                let inst = CloneInstance::new(n, eps0).unwrap();
                let exact = delta_exact_small(&inst, eps).unwrap();
                let est = delta_upper(&inst, eps, &exact_cfg()).unwrap();
                assert!(
                    (est.value - exact).abs() < 1e-10,
                    "n={n} eps0={eps0} eps={eps}: {} vs {exact}",
                    est.value
                );
            }
        }
    }
}

#[test]
fn strided_runs_stay_sound() {
    let inst = CloneInstance::new(300, 1.0).unwrap();
    for &eps in &[0.0f64, 0.3] {
        let exact = delta_exact_small(&inst, eps).unwrap();
        for &stride in &[2u64, 7, 16] {
            let cfg = SearchConfig {
                iterations: 40,
                stride,
                delta_budget: 1.0,
            };
            let est = delta_upper(&inst, eps, &cfg).unwrap();
            assert!(
                est.value + 1e-12 >= exact,
                "stride {stride} undercut the exact value: {} < {exact}",
                est.value
            );
            assert!(est.value <= 1.0 + 1e-12);
        }
    }
}

#[test]
fn divergence_nonincreasing_in_eps() {
    let inst = CloneInstance::new(500, 2.0).unwrap();
    let cfg = SearchConfig::default_for(500);
    let mut prev = f64::INFINITY;
    for i in 0..20 {
        let eps = 2.0 * i as f64 / 20.0;
        let v = delta_upper(&inst, eps, &cfg).unwrap().value;
        assert!(v <= prev + 1e-12, "delta increased at eps={eps}");
        prev = v;
    }
}

#[test]
fn divergence_zero_at_and_beyond_eps0() {
    let inst = CloneInstance::new(100, 1.0).unwrap();
    let cfg = SearchConfig::default_for(100);
    for &eps in &[1.0f64, 1.5] {
        let est = delta_upper(&inst, eps, &cfg).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.terminated, Termination::Complete);
    }
}

#[test]
fn budget_exit_reports_budget_exceeded() {
    let inst = CloneInstance::new(1000, 1.0).unwrap();
    let cfg = SearchConfig {
        iterations: 40,
        stride: 1,
        delta_budget: 1e-9,
    };
    let est = delta_upper(&inst, 0.0, &cfg).unwrap();
    assert_eq!(est.terminated, Termination::BudgetExceeded);
    assert_eq!(est.value, 1e-9);
    assert!(!est.certifies(1e-6));
}

#[test]
fn config_validation() {
    let bad_stride = SearchConfig {
        iterations: 40,
        stride: 0,
        delta_budget: 1.0,
    };
    assert!(bad_stride.validate().is_err());
    let bad_budget = SearchConfig {
        iterations: 40,
        stride: 1,
        delta_budget: 1.5,
    };
    assert!(bad_budget.validate().is_err());
    assert!(SearchConfig::default_for(10_000_000).validate().is_ok());
    assert_eq!(default_stride(4999), 1);
    assert_eq!(default_stride(10_000_000), 2000);
}

#[test]
fn eps_upper_basic_shape() {
    let inst = CloneInstance::new(10_000, 1.0).unwrap();
    let cfg = SearchConfig::default_for(10_000);
    let eps = eps_upper(&inst, 1e-6, &cfg).unwrap();
    assert!(eps > 0.0 && eps < 1.0, "eps = {eps}");
    // The returned right endpoint certifies the target delta.
    let at = delta_upper(&inst, eps, &cfg).unwrap();
    assert!(at.certifies(1e-6), "returned eps does not certify");
}

#[test]
fn eps_upper_unrefined_and_degenerate() {
    let inst = CloneInstance::new(1000, 1.0).unwrap();
    let unrefined = SearchConfig {
        iterations: 0,
        stride: 1,
        delta_budget: 1.0,
    };
    assert_eq!(eps_upper(&inst, 1e-6, &unrefined).unwrap(), 1.0);

    let trivial = CloneInstance::new(1000, 0.0).unwrap();
    let cfg = SearchConfig::default_for(1000);
    assert_eq!(eps_upper(&trivial, 1e-6, &cfg).unwrap(), 0.0);
}

#[test]
fn eps_upper_monotone_in_n() {
    let cfg = |n: u64| SearchConfig::default_for(n);
    let mut prev = f64::INFINITY;
    for &n in &[1_000u64, 10_000, 100_000] {
        let inst = CloneInstance::new(n, 1.0).unwrap();
        let e = eps_upper(&inst, 1e-6, &cfg(n)).unwrap();
        assert!(e < prev, "amplification should improve with n");
        prev = e;
    }
}
