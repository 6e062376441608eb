//! Log-space discrete-distribution primitives: binomial pmf/cdf and the joint
//! pmf of the clone pair (A, C).
//!
//! Everything is carried in natural-log space with log-sum-exp accumulation;
//! Pr(Bin(n−1, p) = c) underflows double precision for n = 10⁷ far from the
//! mean, so linear-space probabilities appear only at API boundaries.

use crate::{Error, Result};
use statrs::function::gamma::ln_gamma;

/// Log of mass zero.
pub const LOG_ZERO: f64 = f64::NEG_INFINITY;

/// A probability stored as its natural logarithm; `-inf` encodes mass 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogProb(pub f64);

impl LogProb {
    pub const ZERO: LogProb = LogProb(LOG_ZERO);

    /// The probability itself, in linear space.
    pub fn prob(self) -> f64 {
        self.0.exp()
    }

    pub fn is_zero(self) -> bool {
        self.0 == LOG_ZERO
    }
}

/// ln(e^a + e^b) without overflow.
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == LOG_ZERO {
        return b;
    }
    if b == LOG_ZERO {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Streaming log-sum-exp accumulator.
#[derive(Debug, Clone, Copy)]
pub struct LogSum {
    max: f64,
    /// Sum of exp(term − max); total = exp(max) · sum.
    sum: f64,
}

impl LogSum {
    pub fn new() -> Self {
        LogSum {
            max: LOG_ZERO,
            sum: 0.0,
        }
    }

    pub fn add(&mut self, term: f64) {
        if term == LOG_ZERO {
            return;
        }
        if term > self.max {
            self.sum = self.sum * (self.max - term).exp() + 1.0;
            self.max = term;
        } else {
            self.sum += (term - self.max).exp();
        }
    }

    pub fn log_total(&self) -> f64 {
        if self.sum == 0.0 {
            LOG_ZERO
        } else {
            self.max + self.sum.ln()
        }
    }
}

impl Default for LogSum {
    fn default() -> Self {
        Self::new()
    }
}

/// Kahan-compensated linear-space accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum
    }
}

fn check_prob(prob: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&prob) {
        return Err(Error::parameter(format!(
            "binomial success probability must lie in [0, 1], got {prob}"
        )));
    }
    Ok(())
}

/// ln C(n, k) via log-gamma.
fn ln_choose(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

pub(crate) fn log_binom_pmf_raw(n: u64, prob: f64, k: i64) -> f64 {
    if k < 0 || k as u64 > n {
        return LOG_ZERO;
    }
    let k = k as u64;
    if prob == 0.0 {
        return if k == 0 { 0.0 } else { LOG_ZERO };
    }
    if prob == 1.0 {
        return if k == n { 0.0 } else { LOG_ZERO };
    }
    ln_choose(n, k) + k as f64 * prob.ln() + (n - k) as f64 * (-prob).ln_1p()
}

/// ln Pr(Bin(n, prob) = k); mass 0 (log −∞) for k outside [0, n].
pub fn log_binom_pmf(n: u64, prob: f64, k: i64) -> Result<LogProb> {
    check_prob(prob)?;
    Ok(LogProb(log_binom_pmf_raw(n, prob, k)))
}

/// Sum of pmf(j) for j in [0, k], k ≤ mean. Descends from j = k so terms decay
/// geometrically, with compensated accumulation relative to the leading term.
fn lower_tail_sum(n: u64, prob: f64, k: u64) -> f64 {
    let lead = log_binom_pmf_raw(n, prob, k as i64);
    if lead == LOG_ZERO {
        return 0.0;
    }
    let mut acc = Kahan::default();
    acc.add(1.0);
    let mut factor = 1.0_f64;
    let mut j = k;
    while j > 0 {
        // pmf(j−1) / pmf(j)
        let ratio = (j as f64 * (1.0 - prob)) / (((n - j + 1) as f64) * prob);
        factor *= ratio;
        acc.add(factor);
        if factor < 1e-18 && ratio < 1.0 {
            break;
        }
        j -= 1;
    }
    (lead + acc.total().ln()).exp()
}

/// Sum of pmf(j) for j in [k, n], k > mean; mirror of `lower_tail_sum`.
fn upper_tail_sum(n: u64, prob: f64, k: u64) -> f64 {
    let lead = log_binom_pmf_raw(n, prob, k as i64);
    if lead == LOG_ZERO {
        return 0.0;
    }
    let mut acc = Kahan::default();
    acc.add(1.0);
    let mut factor = 1.0_f64;
    let mut j = k;
    while j < n {
        // pmf(j+1) / pmf(j)
        let ratio = (((n - j) as f64) * prob) / ((j + 1) as f64 * (1.0 - prob));
        factor *= ratio;
        acc.add(factor);
        if factor < 1e-18 && ratio < 1.0 {
            break;
        }
        j += 1;
    }
    (lead + acc.total().ln()).exp()
}

/// Pr(Bin(n, prob) ≥ k), summed from the lighter side so deep-tail survival
/// keeps full relative precision (1 − cdf would lose it to cancellation).
pub(crate) fn binom_sf_raw(n: u64, prob: f64, k: i64) -> f64 {
    if k <= 0 {
        return 1.0;
    }
    if k as u64 > n {
        return 0.0;
    }
    if prob == 0.0 {
        return 0.0;
    }
    if prob == 1.0 {
        return 1.0;
    }
    if k as f64 >= n as f64 * prob {
        upper_tail_sum(n, prob, k as u64)
    } else {
        1.0 - lower_tail_sum(n, prob, k as u64 - 1)
    }
}

pub(crate) fn binom_cdf_raw(n: u64, prob: f64, k: f64) -> f64 {
    if k.is_nan() {
        return f64::NAN;
    }
    let kf = k.floor();
    if kf < 0.0 {
        return 0.0;
    }
    if kf >= n as f64 {
        return 1.0;
    }
    let ki = kf as u64;
    if prob == 0.0 {
        return 1.0;
    }
    if prob == 1.0 {
        return 0.0;
    }
    if kf <= n as f64 * prob {
        lower_tail_sum(n, prob, ki)
    } else {
        1.0 - upper_tail_sum(n, prob, ki + 1)
    }
}

/// Pr(Bin(n, prob) ≤ k) = Pr(Bin(n, prob) ≤ floor(k)).
///
/// Exact summation from the lighter tail with compensated accumulation; no
/// normal approximation or continuity correction.
pub fn binom_cdf(n: u64, prob: f64, k: f64) -> Result<f64> {
    check_prob(prob)?;
    Ok(binom_cdf_raw(n, prob, k))
}

/// Which member of the clone distribution pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    P,
    Q,
}

/// A shuffle deployment: n reports from an ε₀-DP local randomizer, inducing
/// the clone-reduction pair over (A, C) with C ∼ Bin(n−1, p), A ∼ Bin(C, ½)
/// and a Bern(q) extra increment on one side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloneInstance {
    n: u64,
    eps0: f64,
    /// Clone probability e^(−ε₀).
    p: f64,
    /// Mixture bias e^(ε₀) / (e^(ε₀) + 1).
    q: f64,
}

impl CloneInstance {
    pub fn new(n: u64, eps0: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::parameter("report count n must be at least 1"));
        }
        if !eps0.is_finite() || eps0 < 0.0 {
            return Err(Error::parameter(format!(
                "local eps0 must be finite and nonnegative, got {eps0}"
            )));
        }
        let p = (-eps0).exp();
        Ok(CloneInstance {
            n,
            eps0,
            p,
            q: 1.0 / (1.0 + p),
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }
}

/// Joint pmf of the clone pair at (a, c); zero outside 0 ≤ c ≤ n−1,
/// 0 ≤ a ≤ c+1.
///
/// Side P is Pr(C=c)·(q·A_c(a) + (1−q)·A_c(a−1)) with A_c the Bin(c, ½) pmf;
/// side Q swaps q and 1−q.
pub fn clone_joint_pmf(inst: &CloneInstance, a: i64, c: i64, side: Side) -> LogProb {
    if c < 0 || c as u64 > inst.n - 1 || a < 0 || a > c + 1 {
        return LogProb::ZERO;
    }
    let log_c = log_binom_pmf_raw(inst.n - 1, inst.p, c);
    let log_a0 = log_binom_pmf_raw(c as u64, 0.5, a);
    let log_a1 = log_binom_pmf_raw(c as u64, 0.5, a - 1);
    let (w0, w1) = match side {
        Side::P => (inst.q, 1.0 - inst.q),
        Side::Q => (1.0 - inst.q, inst.q),
    };
    LogProb(log_c + log_add(w0.ln() + log_a0, w1.ln() + log_a1))
}
