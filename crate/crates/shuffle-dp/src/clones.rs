//! The numerical amplification bound: per-count divergence stripes, the
//! strided accumulator over the count distribution, an exhaustive small-n
//! oracle, and the binary search producing the ε upper bound.

use crate::dist::{binom_cdf_raw, binom_sf_raw, log_binom_pmf_raw, CloneInstance, Kahan, LOG_ZERO};
use crate::{Error, Result};

/// Largest n accepted by the brute-force oracle [`delta_exact_small`].
pub const ORACLE_CAP: u64 = 2000;

/// Direction of the hockey-stick divergence: `Plus` is D(P‖Q), `Minus` D(Q‖P).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Plus,
    Minus,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Plus, Direction::Minus];
}

/// Tuning knobs for the accumulator and the binary search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    /// Binary-search depth T.
    pub iterations: u32,
    /// Accumulator block width S.
    pub stride: u64,
    /// Early-exit threshold δ^U.
    pub delta_budget: f64,
}

impl SearchConfig {
    /// Defaults: T = 40, S = max(1, n/5000), full δ budget.
    pub fn default_for(n: u64) -> Self {
        SearchConfig {
            iterations: 40,
            stride: default_stride(n),
            delta_budget: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stride < 1 {
            return Err(Error::parameter("stride must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.delta_budget) {
            return Err(Error::parameter("delta budget must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Default block width: caps the accumulator at ~5000 blocks regardless of n.
pub fn default_stride(n: u64) -> u64 {
    (n / 5000).max(1)
}

/// Why the accumulator stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// max(δ_P, δ_Q) exceeded the budget; the returned value is the budget
    /// itself, meaning "not (ε, δ^U)-indistinguishable".
    BudgetExceeded,
    /// The uncovered count mass could no longer change the verdict.
    RemainderNegligible,
    /// Every block was consumed.
    Complete,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::BudgetExceeded => "budget-exceeded",
            Termination::RemainderNegligible => "remainder-negligible",
            Termination::Complete => "complete",
        }
    }
}

/// Result of one accumulator run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceEstimate {
    /// Accumulated Σ max{0, P − e^ε Q} weight.
    pub delta_p: f64,
    /// Mirror direction.
    pub delta_q: f64,
    /// Count mass ζ_C covered so far.
    pub mass_covered: f64,
    pub terminated: Termination,
    /// The certified δ upper bound (or the budget sentinel).
    pub value: f64,
}

impl DivergenceEstimate {
    /// True when the run certifies that the divergence is below `delta`.
    pub fn certifies(&self, delta: f64) -> bool {
        self.terminated != Termination::BudgetExceeded && self.value < delta
    }
}

fn stripe_divergence_raw(c: u64, eps: f64, inst: &CloneInstance, direction: Direction) -> f64 {
    let q = inst.q();
    let e_eps = eps.exp();
    // ε_{q,ε} = ln[((e^ε+1)q − 1) / ((e^ε+1)q − e^ε)]; positive for ε < ε₀.
    let eq = (((e_eps + 1.0) * q - 1.0) / ((e_eps + 1.0) * q - e_eps)).ln();
    let beta = match direction {
        Direction::Plus => 1.0 / (eq.exp() + 1.0),
        Direction::Minus => 1.0 / ((-eq).exp() + 1.0),
    };
    let tau = beta * (c as f64 + 1.0);
    // The derivation cuts at a < τ strictly, so an exactly integral τ drops to
    // τ − 1 in the "+" direction; otherwise floor semantics apply.
    let hi = if direction == Direction::Plus && tau == tau.floor() {
        tau as i64 - 1
    } else {
        tau.floor() as i64
    };
    // Telescoping the stripe sum against the boundary term leaves
    //   c₁·pmf(hi) − (e^ε − 1)·(mass strictly beyond the cut),
    // with c₁ = q − e^ε(1−q) > 0. Both factors are evaluated from the lighter
    // tail, so the deep-tail stripe keeps full relative precision.
    let c1 = q - e_eps * (1.0 - q);
    let v = if hi < 0 || hi as u64 > c {
        0.0
    } else {
        let pmf_hi = log_binom_pmf_raw(c, 0.5, hi).exp();
        let tail = match direction {
            Direction::Plus => binom_cdf_raw(c, 0.5, hi as f64 - 1.0),
            Direction::Minus => binom_sf_raw(c, 0.5, hi + 1),
        };
        c1 * pmf_hi - (e_eps - 1.0) * tail
    };
    v.max(0.0)
}

/// The per-count divergence stripe B(c, ε, ε₀, direction): the conditional
/// divergence at count c, before weighting by Pr(C = c).
///
/// Requires 0 ≤ ε < ε₀; callers must short-circuit ε ≥ ε₀ to δ = 0.
pub fn stripe_divergence(
    c: u64,
    eps: f64,
    inst: &CloneInstance,
    direction: Direction,
) -> Result<f64> {
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::parameter("eps must be finite and nonnegative"));
    }
    if eps >= inst.eps0() {
        return Err(Error::parameter(format!(
            "stripe requires eps < eps0 (got eps = {eps}, eps0 = {}); \
             at eps >= eps0 the divergence is 0",
            inst.eps0()
        )));
    }
    Ok(stripe_divergence_raw(c, eps, inst, direction))
}

/// Per-block masses of Bin(n_trials, p) for blocks [t·stride, t·stride + stride).
pub(crate) struct BlockMasses {
    pub stride: u64,
    pub masses: Vec<f64>,
    /// Number of counts, i.e. the support size n_trials + 1.
    pub support: u64,
}

pub(crate) fn block_masses(n_trials: u64, p: f64, stride: u64) -> BlockMasses {
    let support = n_trials + 1;
    let blocks = support.div_ceil(stride);
    let mut masses = vec![0.0_f64; blocks as usize];
    if n_trials == 0 || p == 0.0 {
        masses[0] += 1.0;
        return BlockMasses {
            stride,
            masses,
            support,
        };
    }
    if p == 1.0 {
        masses[(n_trials / stride) as usize] += 1.0;
        return BlockMasses {
            stride,
            masses,
            support,
        };
    }
    // Walk outward from the mode; pmf underflow far from the mode terminates
    // each arm (the lost mass is below f64 resolution).
    let mode = (((n_trials + 1) as f64) * p).floor().min(n_trials as f64) as u64;
    let peak = log_binom_pmf_raw(n_trials, p, mode as i64).exp();
    let mut t = peak;
    let mut j = mode;
    loop {
        masses[(j / stride) as usize] += t;
        if j == n_trials {
            break;
        }
        t *= (((n_trials - j) as f64) * p) / ((j + 1) as f64 * (1.0 - p));
        if t == 0.0 {
            break;
        }
        j += 1;
    }
    if mode > 0 {
        let mut t = peak;
        let mut j = mode;
        loop {
            t *= (j as f64 * (1.0 - p)) / (((n_trials - j + 1) as f64) * p);
            if t == 0.0 {
                break;
            }
            j -= 1;
            masses[(j / stride) as usize] += t;
            if j == 0 {
                break;
            }
        }
    }
    BlockMasses {
        stride,
        masses,
        support,
    }
}

/// Block order: increasing |t − T/2|, ties toward smaller t.
fn block_order(blocks: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..blocks).collect();
    order.sort_by_key(|&t| ((2 * t as i64 - blocks as i64).abs(), t));
    order
}

pub(crate) fn delta_upper_with_masses(
    inst: &CloneInstance,
    eps: f64,
    budget: f64,
    blocks: &BlockMasses,
) -> DivergenceEstimate {
    let mut delta_p = Kahan::default();
    let mut delta_q = Kahan::default();
    let mut zeta = Kahan::default();
    for &t in &block_order(blocks.masses.len()) {
        let mass = blocks.masses[t];
        let c_lo = t as u64 * blocks.stride;
        let c_hi = (c_lo + blocks.stride).min(blocks.support) - 1;
        zeta.add(mass);
        if mass > 0.0 {
            let w_p = stripe_divergence_raw(c_lo, eps, inst, Direction::Plus)
                .max(stripe_divergence_raw(c_hi, eps, inst, Direction::Plus));
            let w_q = stripe_divergence_raw(c_lo, eps, inst, Direction::Minus)
                .max(stripe_divergence_raw(c_hi, eps, inst, Direction::Minus));
            delta_p.add(mass * w_p);
            delta_q.add(mass * w_q);
        }
        let (dp, dq) = (delta_p.total(), delta_q.total());
        let covered = zeta.total().min(1.0);
        if dp.max(dq) > budget {
            return DivergenceEstimate {
                delta_p: dp,
                delta_q: dq,
                mass_covered: covered,
                terminated: Termination::BudgetExceeded,
                value: budget,
            };
        }
        let uncovered = (1.0 - covered).max(0.0);
        // Exit only once the remainder is also below double-precision
        // significance, so the returned value stays exact, not just a bound.
        if uncovered < dp.min(dq) && uncovered <= 1e-13 * dp.max(dq) {
            return DivergenceEstimate {
                delta_p: dp,
                delta_q: dq,
                mass_covered: covered,
                terminated: Termination::RemainderNegligible,
                value: dp.max(dq) + uncovered,
            };
        }
    }
    let (dp, dq) = (delta_p.total(), delta_q.total());
    let covered = zeta.total().min(1.0);
    DivergenceEstimate {
        delta_p: dp,
        delta_q: dq,
        mass_covered: covered,
        terminated: Termination::Complete,
        value: dp.max(dq) + (1.0 - covered).max(0.0),
    }
}

/// Upper bound on max{D_{e^ε}(P‖Q), D_{e^ε}(Q‖P)} via the strided accumulator.
///
/// Blocks of counts are weighted by the larger stripe value at their endpoints
/// (valid because stripes decrease in c) times the block's count mass, consumed
/// in order of increasing |t − T/2|. Exits early once the budget δ^U is
/// provably exceeded or the uncovered mass can no longer matter.
pub fn delta_upper(
    inst: &CloneInstance,
    eps: f64,
    cfg: &SearchConfig,
) -> Result<DivergenceEstimate> {
    cfg.validate()?;
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::parameter("eps must be finite and nonnegative"));
    }
    if eps >= inst.eps0() {
        return Ok(DivergenceEstimate {
            delta_p: 0.0,
            delta_q: 0.0,
            mass_covered: 1.0,
            terminated: Termination::Complete,
            value: 0.0,
        });
    }
    let blocks = block_masses(inst.n() - 1, inst.p(), cfg.stride);
    Ok(delta_upper_with_masses(inst, eps, cfg.delta_budget, &blocks))
}

/// Exhaustive enumeration of max over both directions of
/// Σ_{a,c} max{0, side₁(a,c) − e^ε side₂(a,c)} over the full support.
///
/// Deliberately brute force (the oracle for [`delta_upper`]); refuses
/// n > [`ORACLE_CAP`].
pub fn delta_exact_small(inst: &CloneInstance, eps: f64) -> Result<f64> {
    if inst.n() > ORACLE_CAP {
        return Err(Error::parameter(format!(
            "brute-force oracle is capped at n = {ORACLE_CAP}, got n = {}",
            inst.n()
        )));
    }
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::parameter("eps must be finite and nonnegative"));
    }
    let (q, e_eps) = (inst.q(), eps.exp());
    let mut sum_p = Kahan::default();
    let mut sum_q = Kahan::default();
    for c in 0..inst.n() {
        let wc = log_binom_pmf_raw(inst.n() - 1, inst.p(), c as i64).exp();
        if wc == 0.0 {
            continue;
        }
        let mut log_a_prev = LOG_ZERO; // A_c(a−1)
        let mut log_a = -(c as f64) * std::f64::consts::LN_2; // A_c(0)
        for a in 0..=c + 1 {
            let (ma, mb) = (log_a.exp(), log_a_prev.exp());
            let p_mass = wc * (q * ma + (1.0 - q) * mb);
            let q_mass = wc * ((1.0 - q) * ma + q * mb);
            sum_p.add((p_mass - e_eps * q_mass).max(0.0));
            sum_q.add((q_mass - e_eps * p_mass).max(0.0));
            log_a_prev = log_a;
            log_a += if a < c {
                (((c - a) as f64) / ((a + 1) as f64)).ln()
            } else {
                LOG_ZERO
            };
        }
    }
    Ok(sum_p.total().max(sum_q.total()))
}

fn eps_upper_search(
    inst: &CloneInstance,
    delta: f64,
    iterations: u32,
    blocks: &BlockMasses,
) -> f64 {
    let mut lo = 0.0_f64;
    let mut hi = inst.eps0();
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        if delta_upper_with_masses(inst, mid, delta, blocks).certifies(delta) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Smallest ε (upper bound) such that the clone pair is (ε, δ)-indistinguishable,
/// by binary search on [0, ε₀]; returns the right endpoint after
/// `cfg.iterations` halvings, tightening only on certified δ_t < δ.
pub fn eps_upper(inst: &CloneInstance, delta: f64, cfg: &SearchConfig) -> Result<f64> {
    cfg.validate()?;
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::parameter("delta must lie in (0, 1]"));
    }
    if inst.eps0() == 0.0 {
        return Ok(0.0);
    }
    let blocks = block_masses(inst.n() - 1, inst.p(), cfg.stride);
    Ok(eps_upper_search(inst, delta, cfg.iterations, &blocks))
}
