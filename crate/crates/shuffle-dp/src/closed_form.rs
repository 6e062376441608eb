//! Analytic amplification bounds: the closed-form central ε, its
//! approximate-DP extension, the generic-clones and k-ary randomized response
//! variants, ε₀ selection for frequency estimation, and DP-SGD noise
//! calibration. All logarithms are natural.

use crate::{Error, Result};

/// The local randomizer's guarantee.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalPrivacy {
    pub eps0: f64,
    pub delta0: f64,
}

impl LocalPrivacy {
    pub fn new(eps0: f64, delta0: f64) -> Result<Self> {
        if !eps0.is_finite() || eps0 < 0.0 {
            return Err(Error::parameter("eps0 must be finite and nonnegative"));
        }
        if !(0.0..1.0).contains(&delta0) {
            return Err(Error::parameter("delta0 must lie in [0, 1)"));
        }
        Ok(LocalPrivacy { eps0, delta0 })
    }
}

/// Whether a reported (ε, δ) is an upper bound, a lower bound, or exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundDirection {
    Upper,
    Lower,
    Exact,
}

impl BoundDirection {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundDirection::Upper => "upper",
            BoundDirection::Lower => "lower",
            BoundDirection::Exact => "exact",
        }
    }
}

/// A central-DP guarantee claim.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsDelta {
    pub eps: f64,
    pub delta: f64,
    pub direction: BoundDirection,
}

fn check_n(n: u64) -> Result<()> {
    if n < 1 {
        return Err(Error::parameter("n must be at least 1"));
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::parameter("delta must lie in (0, 1]"));
    }
    Ok(())
}

fn check_eps0_pos(eps0: f64) -> Result<()> {
    if !eps0.is_finite() || eps0 <= 0.0 {
        return Err(Error::parameter("eps0 must be finite and positive"));
    }
    Ok(())
}

/// Maximal ε₀ for which the closed-form bound applies at (n, δ).
pub fn admissible_eps0(n: u64, delta: f64) -> f64 {
    (n as f64 / (16.0 * (2.0 / delta).ln())).ln()
}

fn check_applicability(n: u64, eps0: f64, delta: f64) -> Result<()> {
    let boundary = admissible_eps0(n, delta);
    if eps0 > boundary {
        return Err(Error::applicability(
            format!(
                "closed-form bound requires eps0 <= ln(n / (16 ln(2/delta))); \
                 eps0 = {eps0} exceeds the admissible maximum for n = {n}, delta = {delta}"
            ),
            boundary,
        ));
    }
    Ok(())
}

/// Closed-form central ε for n shuffled reports of an ε₀-DP randomizer:
/// ln(1 + ((e^ε₀−1)/(e^ε₀+1)) · (8 √(e^ε₀ ln(4/δ))/√n + 8 e^ε₀/n)).
///
/// Applicable when ε₀ ≤ ln(n / (16 ln(2/δ))); otherwise returns an
/// applicability error carrying the admissible ε₀ (callers wanting a bound
/// anyway may fall back to the trivial ε = ε₀).
pub fn eps_closed_form(n: u64, eps0: f64, delta: f64) -> Result<f64> {
    check_n(n)?;
    check_eps0_pos(eps0)?;
    check_delta(delta)?;
    check_applicability(n, eps0, delta)?;
    let e0 = eps0.exp();
    let nf = n as f64;
    let amp = 8.0 * (e0 * (4.0 / delta).ln()).sqrt() / nf.sqrt() + 8.0 * e0 / nf;
    Ok(((e0 - 1.0) / (e0 + 1.0) * amp).ln_1p())
}

/// Approximate-DP variant: ε as in [`eps_closed_form`], with total
/// δ + (e^ε + 1)(1 + e^(−ε₀)/2) · n · δ₀, capped at 1.
pub fn approx_dp_bound(n: u64, lp: &LocalPrivacy, delta: f64) -> Result<EpsDelta> {
    check_eps0_pos(lp.eps0)?;
    let eps = eps_closed_form(n, lp.eps0, delta)?;
    let total = delta + (eps.exp() + 1.0) * (1.0 + (-lp.eps0).exp() / 2.0) * n as f64 * lp.delta0;
    Ok(EpsDelta {
        eps,
        delta: total.min(1.0),
        direction: BoundDirection::Upper,
    })
}

/// Generic clones bound: ln(1 + q · (4 √(2 ln(4/δ))/√(pn) + 4/(pn))) for a
/// randomizer that is a clone with probability p and leaks with bias q.
///
/// Applicable when p ≥ 8 ln(2/δ)/n.
pub fn eps_generic_clones(n: u64, p: f64, q: f64, delta: f64) -> Result<f64> {
    check_n(n)?;
    check_delta(delta)?;
    if !(p > 0.0 && p <= 1.0 / 3.0) {
        return Err(Error::parameter("clone probability p must lie in (0, 1/3]"));
    }
    if !(0.0..1.0).contains(&q) {
        return Err(Error::parameter("bias q must lie in [0, 1)"));
    }
    let boundary = 8.0 * (2.0 / delta).ln() / n as f64;
    if p < boundary {
        return Err(Error::applicability(
            format!("generic clones bound requires p >= 8 ln(2/delta)/n; p = {p} is too small"),
            boundary,
        ));
    }
    let pn = p * n as f64;
    Ok((q * (4.0 * (2.0 * (4.0 / delta).ln()).sqrt() / pn.sqrt() + 4.0 / pn)).ln_1p())
}

/// k-ary randomized response bound:
/// ln(1 + (e^ε₀−1) · (4 √(2(k+1) ln(4/δ))/√((e^ε₀+k−1)·k·n) + 4(k+1)/(k·n))).
///
/// Same ε₀ applicability condition as [`eps_closed_form`].
pub fn eps_krr(n: u64, k: u64, eps0: f64, delta: f64) -> Result<f64> {
    check_n(n)?;
    check_eps0_pos(eps0)?;
    check_delta(delta)?;
    if k < 2 {
        return Err(Error::parameter("alphabet size k must be at least 2"));
    }
    check_applicability(n, eps0, delta)?;
    let e0 = eps0.exp();
    let (kf, nf) = (k as f64, n as f64);
    let amp = 4.0 * (2.0 * (kf + 1.0) * (4.0 / delta).ln()).sqrt() / ((e0 + kf - 1.0) * kf * nf).sqrt()
        + 4.0 * (kf + 1.0) / (kf * nf);
    Ok(((e0 - 1.0) * amp).ln_1p())
}

/// ε₀ selection for real-summation / frequency estimation at target (ε, δ):
/// ε√n / (16 √(ln(1/δ))) when ε ≤ √(ln(1/δ)/n), else ln(ε²n / (100 ln(1/δ))).
pub fn eps0_for_frequency(n: u64, eps: f64, delta: f64) -> Result<f64> {
    check_n(n)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::parameter("target eps must lie in (0, 1)"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::parameter("delta must lie in (0, 1)"));
    }
    let nf = n as f64;
    let l = (1.0 / delta).ln();
    if eps <= (l / nf).sqrt() {
        Ok(eps * nf.sqrt() / (16.0 * l.sqrt()))
    } else {
        Ok((eps * eps * nf / (100.0 * l)).ln())
    }
}

/// DP-SGD accounting: Gaussian noise scale σ = (1 + √(2 ln(1/δ₀)))/ε₀ plus the
/// exact shuffled guarantee from [`approx_dp_bound`] (not its asymptotic form).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdAccounting {
    pub guarantee: EpsDelta,
    pub sigma: f64,
}

pub fn sgd_accounting(n: u64, lp: &LocalPrivacy, delta: f64) -> Result<SgdAccounting> {
    if !(lp.delta0 > 0.0 && lp.delta0 < 1.0) {
        return Err(Error::parameter(
            "Gaussian-mechanism calibration requires delta0 in (0, 1)",
        ));
    }
    check_eps0_pos(lp.eps0)?;
    let guarantee = approx_dp_bound(n, lp, delta)?;
    let sigma = (1.0 + (2.0 * (1.0 / lp.delta0).ln()).sqrt()) / lp.eps0;
    Ok(SgdAccounting { guarantee, sigma })
}
