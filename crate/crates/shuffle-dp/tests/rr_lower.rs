//! Exact shuffled-2RR privacy against rational convolution oracles, plus the
//! deep-tail sweep.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use shuffle_dp::rr_lower::{
    eps_lower_2rr, rr_delta_exact, tail_sweep, tail_sweep_log, RrCountPair,
};

fn choose(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

fn binom_exact(n: u64, p: &BigRational, k: i64) -> BigRational {
    if k < 0 || k as u64 > n {
        return BigRational::zero();
    }
    let q = BigRational::one() - p;
    BigRational::from(choose(n, k as u64)) * p.pow(k as i32) * q.pow((n - k as u64) as i32)
}

/// Exact count pmfs for rational p1: world 0 is Bin(n, p1); world 1 is
/// Bin(n−1, p1) convolved with Bern(1−p1).
fn pair_exact(n: u64, p1: &BigRational) -> (Vec<BigRational>, Vec<BigRational>) {
    let pmf0: Vec<_> = (0..=n as i64).map(|c| binom_exact(n, p1, c)).collect();
    let pmf1: Vec<_> = (0..=n as i64)
        .map(|c| {
            binom_exact(n - 1, p1, c) * p1.clone()
                + binom_exact(n - 1, p1, c - 1) * (BigRational::one() - p1.clone())
        })
        .collect();
    (pmf0, pmf1)
}

fn assert_close(actual: f64, expected: f64, tol: f64, what: &str) {
    assert!(
        (actual - expected).abs() <= tol * expected.abs().max(1.0),
        "{what}: got {actual}, want {expected}"
    );
}

#[test]
fn spot_value_n2() {
    assert_close(
        rr_delta_exact(2, 3.0f64.ln(), 0.0).unwrap(),
        0.375,
        1e-15,
        "delta(2, ln 3, 0)",
    );
}

#[test]
fn pmf_vectors_n2() {
    // eps0 = ln 3 so p1 = 1/4: pmf0 = (9, 6, 1)/16, pmf1 = (3, 10, 3)/16.
    let pair = RrCountPair::new(2, 3.0f64.ln()).unwrap();
    let (p0, p1) = pair.pmf_vectors();
    for (got, want) in p0.iter().zip([9.0, 6.0, 1.0].map(|x| x / 16.0)) {
        assert_close(*got, want, 1e-14, "pmf0");
    }
    for (got, want) in p1.iter().zip([3.0, 10.0, 3.0].map(|x| x / 16.0)) {
        assert_close(*got, want, 1e-14, "pmf1");
    }
}

#[test]
fn matches_rational_convolution_oracle() {
    // eps0 values with rational p1: ln 3 -> 1/4 and ln(7/3) -> 3/10.
    for (eps0, p1) in [
        (3.0f64.ln(), BigRational::new(BigInt::from(1), BigInt::from(4))),
        (
            (7.0f64 / 3.0).ln(),
            BigRational::new(BigInt::from(3), BigInt::from(10)),
        ),
    ] {
        for n in [2u64, 5, 11, 20] {
            let (e0, e1) = pair_exact(n, &p1);
            let pair = RrCountPair::new(n, eps0).unwrap();
            let (g0, g1) = pair.pmf_vectors();
            for c in 0..=n as usize {
                assert_close(g0[c], e0[c].to_f64().unwrap(), 1e-12, "pmf0 oracle");
                assert_close(g1[c], e1[c].to_f64().unwrap(), 1e-12, "pmf1 oracle");
            }
            for eps_frac in [0.0f64, 0.3, 0.8] {
                let eps = eps0 * eps_frac;
                let level = eps.exp();
                let want = {
                    let d01: f64 = e0
                        .iter()
                        .zip(&e1)
                        .map(|(a, b)| (a.to_f64().unwrap() - level * b.to_f64().unwrap()).max(0.0))
                        .sum();
                    let d10: f64 = e0
                        .iter()
                        .zip(&e1)
                        .map(|(a, b)| (b.to_f64().unwrap() - level * a.to_f64().unwrap()).max(0.0))
                        .sum();
                    d01.max(d10)
                };
                assert_close(
                    rr_delta_exact(n, eps0, eps).unwrap(),
                    want,
                    1e-12,
                    &format!("delta n={n} eps={eps}"),
                );
            }
        }
    }
}

#[test]
fn delta_nonincreasing_and_vanishes_at_eps0() {
    let pair = RrCountPair::new(200, 1.5).unwrap();
    let mut prev = f64::INFINITY;
    for i in 0..=15 {
        let eps = 1.5 * i as f64 / 15.0;
        let d = pair.delta(eps);
        assert!(d <= prev + 1e-15, "delta increased at eps={eps}");
        prev = d;
    }
    assert!(pair.delta(1.5) <= 1e-15, "delta at eps0 should vanish");
    assert_eq!(pair.delta(2.0), 0.0);
}

#[test]
fn directions_balance_at_eps_zero() {
    // At eps = 0 both one-sided sums are the total variation distance.
    let pair = RrCountPair::new(50, 1.0).unwrap();
    let (p0, p1) = pair.pmf_vectors();
    let d01: f64 = p0.iter().zip(&p1).map(|(a, b)| (a - b).max(0.0)).sum();
    let d10: f64 = p0.iter().zip(&p1).map(|(a, b)| (b - a).max(0.0)).sum();
    assert_close(d01, d10, 1e-12, "one-sided sums at eps = 0");
    assert_close(pair.delta(0.0), d01, 1e-12, "tv distance");
}

#[test]
fn construction_domain() {
    assert!(RrCountPair::new(0, 1.0).is_err());
    assert!(RrCountPair::new(10, 0.0).is_err());
    assert!(RrCountPair::new(10, f64::NAN).is_err());
    assert!(RrCountPair::with_floor(10, 1.0, 0.5).is_err());
    let pair = RrCountPair::new(100, 2.0).unwrap();
    assert_eq!(pair.n(), 100);
    assert_eq!(pair.eps0(), 2.0);
    let (lo, hi) = pair.window();
    assert!(lo <= hi && hi <= 100);
}

#[test]
fn eps_lower_basics() {
    assert_eq!(eps_lower_2rr(1000, 1.0, 1e-6, 0).unwrap(), 0.0);
    let e = eps_lower_2rr(10_000, 1.0, 1e-6, 40).unwrap();
    assert!(e > 0.0 && e < 1.0, "amplification is partial here: {e}");
    assert!(eps_lower_2rr(1000, 1.0, 0.0, 40).is_err());
    assert!(eps_lower_2rr(1000, 1.0, 1.5, 40).is_err());
}

#[test]
fn eps_lower_left_endpoint_property() {
    // The returned eps still violates delta; a notch above it does not
    // (left endpoint of the bracketing interval).
    let (n, eps0, delta) = (5000u64, 1.0f64, 1e-6f64);
    let e = eps_lower_2rr(n, eps0, delta, 40).unwrap();
    let pair = RrCountPair::new(n, eps0).unwrap();
    assert!(pair.delta(e) > delta);
    assert!(pair.delta(e + 1e-9) <= delta * (1.0 + 1e-9));
}

#[test]
fn tail_sweep_grid_validation() {
    assert!(tail_sweep(1000, 1.0, &[]).is_err());
    assert!(tail_sweep(1000, 1.0, &[1e-3, 1e-3]).is_err());
    assert!(tail_sweep(1000, 1.0, &[1e-6, 1e-3]).is_err());
    assert!(tail_sweep(1000, 1.0, &[1e-3, 0.0]).is_err());
    assert!(tail_sweep_log(1000, 1.0, &[3.0, 2.0]).is_err());
    assert!(tail_sweep_log(1000, 1.0, &[-1.0, 2.0]).is_err());
}

#[test]
fn tail_sweep_shape() {
    let grid = [0.5, 1e-2, 1e-4, 1e-8, 1e-12];
    let out = tail_sweep(1000, 1.0, &grid).unwrap();
    assert_eq!(out.len(), grid.len());
    let mut prev = -1.0;
    for (i, &(d, e)) in out.iter().enumerate() {
        assert_eq!(d, grid[i]);
        assert!(e >= prev, "eps must not decrease as delta shrinks");
        assert!(e <= 1.0);
        prev = e;
    }
    // Huge delta admits strong amplification.
    assert!(out[0].1 < 0.2, "eps at delta = 0.5 should be small");
}

#[test]
fn tail_sweep_log_consistent_with_linear() {
    let grid = [1e-3, 1e-6, 1e-9];
    let linear = tail_sweep(2000, 1.0, &grid).unwrap();
    let logs: Vec<f64> = grid.iter().map(|d| -d.ln()).collect();
    let logged = tail_sweep_log(2000, 1.0, &logs).unwrap();
    for ((_, a), (_, b)) in linear.iter().zip(&logged) {
        assert_eq!(a, b, "log-domain sweep must agree where both apply");
    }
}

#[test]
fn tail_sweep_log_reaches_past_f64_underflow() {
    // ln(1/delta) = 900 is below the smallest positive double; the log-domain
    // sweep must still resolve a monotone, in-range eps there.
    let out = tail_sweep_log(1000, 1.0, &[100.0, 500.0, 900.0]).unwrap();
    assert_eq!(out.len(), 3);
    assert!(out[0].1 < out[2].1);
    assert!(out[2].1 > 0.99, "amplification is dead this deep: {}", out[2].1);
    assert!(out[2].1 <= 1.0);
}
