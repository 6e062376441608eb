//! Rényi-DP machinery: Rényi divergence of the clone pair and of the shuffled
//! binary randomized-response pair, RDP composition, conversion to (ε, δ),
//! and the advanced-composition baseline.

use crate::closed_form::{BoundDirection, EpsDelta};
use crate::clones::{eps_upper, SearchConfig};
use crate::dist::{log_add, log_binom_pmf_raw, CloneInstance, LogSum, LOG_ZERO};
use crate::rr_lower::RrCountPair;
use crate::{Error, Result};

/// A Rényi divergence value with the certified additive slack contributed by
/// support truncation (0 when the full support was enumerated).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdpValue {
    pub value: f64,
    pub slack: f64,
}

impl RdpValue {
    /// The certified upper bound: value + slack, capped at the likelihood-ratio
    /// bound ε₀ (always valid).
    pub fn bound(&self, eps0: f64) -> f64 {
        (self.value + self.slack).min(eps0)
    }
}

/// A sequence of (α, ε(α)) points.
#[derive(Debug, Clone, PartialEq)]
pub struct RdpCurve {
    pub points: Vec<(f64, f64)>,
    pub provenance: BoundDirection,
}

/// Default α grid: {1 + k/10 : k = 1..40} ∪ {2, …, 64} ∪ powers of 2 up to 4096.
pub fn default_alpha_grid() -> Vec<f64> {
    let mut grid: Vec<f64> = (1..=40).map(|k| 1.0 + k as f64 / 10.0).collect();
    grid.extend((2..=64).map(|k| k as f64));
    let mut pow = 128.0;
    while pow <= 4096.0 {
        grid.push(pow);
        pow *= 2.0;
    }
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    grid
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha <= 1.0 {
        return Err(Error::parameter("Renyi order alpha must be finite and > 1"));
    }
    Ok(())
}

/// max{D^α(P‖Q), D^α(Q‖P)} of the clone pair.
///
/// Sums P^α / Q^(α−1) in log space over the joint support. With mass_tol > 0
/// the count and inner windows are chosen so that the excluded mass m
/// satisfies m·e^((α−1)ε₀) ≤ mass_tol, and the certified slack from folding
/// m·e^((α−1)ε₀) into the sum is reported; with mass_tol = 0 the full support
/// is enumerated and the slack is 0.
pub fn rdp_clones(inst: &CloneInstance, alpha: f64, mass_tol: f64) -> Result<RdpValue> {
    Ok(rdp_clones_core(inst, alpha, mass_tol, u64::MAX)?.expect("unlimited budget"))
}

/// `rdp_clones` with a cap on enumerated support points; returns None when the
/// windows for this α would exceed the cap. Lets grid scans at large n skip
/// the α values whose honest enumeration is disproportionately expensive.
fn rdp_clones_core(
    inst: &CloneInstance,
    alpha: f64,
    mass_tol: f64,
    term_budget: u64,
) -> Result<Option<RdpValue>> {
    check_alpha(alpha)?;
    if !(mass_tol >= 0.0) {
        return Err(Error::parameter("mass_tol must be nonnegative"));
    }
    if inst.eps0() == 0.0 {
        return Ok(Some(RdpValue {
            value: 0.0,
            slack: 0.0,
        }));
    }
    let (n, p, q, eps0) = (inst.n(), inst.p(), inst.q(), inst.eps0());
    let (ln_q, ln_1q) = (q.ln(), (1.0 - q).ln());
    let a1 = alpha - 1.0;
    // Excluded-mass budget in log space, discounted by the worst-case factor
    // e^((α−1)ε₀) each excluded term can carry.
    let tol_eff_log = if mass_tol > 0.0 {
        mass_tol.ln() - a1 * eps0
    } else {
        LOG_ZERO
    };
    let n_trials = n - 1;
    let thr_c = if mass_tol > 0.0 {
        tol_eff_log - (2.0 * (n_trials as f64 + 1.0)).ln()
    } else {
        LOG_ZERO
    };
    let (c_lo, c_hi, c_truncated) = if mass_tol > 0.0 && n_trials > 0 && p < 1.0 {
        let mode = (((n_trials + 1) as f64) * p).floor().min(n_trials as f64) as u64;
        let mut lo = mode;
        while lo > 0 && log_binom_pmf_raw(n_trials, p, lo as i64 - 1) >= thr_c {
            lo -= 1;
        }
        let mut hi = mode;
        while hi < n_trials && log_binom_pmf_raw(n_trials, p, hi as i64 + 1) >= thr_c {
            hi += 1;
        }
        (lo, hi, lo > 0 || hi < n_trials)
    } else {
        (0, n_trials, false)
    };

    // By the mirror symmetry Q(a, c) = P(c+1−a, c), the two divergence
    // directions carry identical sums; one direction suffices.
    let mut s_p = LogSum::new();
    let mut inner_truncated = false;
    let mut terms_used: u64 = 0;
    for c in c_lo..=c_hi {
        let log_c = log_binom_pmf_raw(n_trials, p, c as i64);
        if log_c == LOG_ZERO {
            continue;
        }
        // Inner window on a: include a where the Bin(c, ½) mass clears the
        // per-count share of the exclusion budget.
        let thr_a = if mass_tol > 0.0 {
            tol_eff_log - (2.0 * (c as f64 + 2.0)).ln()
        } else {
            LOG_ZERO
        };
        let mid = (c / 2) as i64;
        let log_mid = log_binom_pmf_raw(c, 0.5, mid);
        if mass_tol > 0.0 && log_mid < thr_a {
            inner_truncated = true;
            continue;
        }
        let (mut a_lo, mut a_hi) = (mid, mid);
        if mass_tol > 0.0 {
            let mut l = log_mid;
            while a_lo > 0 {
                let step = ((a_lo as f64) / ((c as i64 - a_lo + 1) as f64)).ln();
                if l + step < thr_a {
                    break;
                }
                l += step;
                a_lo -= 1;
            }
            let mut l = log_mid;
            while (a_hi as u64) < c {
                let step = (((c as i64 - a_hi) as f64) / ((a_hi + 1) as f64)).ln();
                if l + step < thr_a {
                    break;
                }
                l += step;
                a_hi += 1;
            }
            if a_lo > 0 || (a_hi as u64) < c {
                inner_truncated = true;
            }
        } else {
            a_lo = 0;
            a_hi = c as i64;
        }
        terms_used += (a_hi - a_lo + 2) as u64;
        if terms_used > term_budget {
            return Ok(None);
        }
        // The mixtures reference A_c(a−1), so run one index past the window.
        let mut log_a = log_binom_pmf_raw(c, 0.5, a_lo);
        let mut log_a_prev = if a_lo == 0 {
            LOG_ZERO
        } else {
            log_binom_pmf_raw(c, 0.5, a_lo - 1)
        };
        for a in a_lo..=a_hi + 1 {
            let cur = if a as u64 <= c { log_a } else { LOG_ZERO };
            let log_p = log_c + log_add(ln_q + cur, ln_1q + log_a_prev);
            let log_q = log_c + log_add(ln_1q + cur, ln_q + log_a_prev);
            s_p.add(alpha * log_p - a1 * log_q);
            log_a_prev = cur;
            if (a as u64) < c {
                log_a += (((c as i64 - a) as f64) / ((a + 1) as f64)).ln();
            }
        }
    }
    let raw = (s_p.log_total() / a1).max(0.0);
    if c_truncated || inner_truncated {
        let fold = tol_eff_log + a1 * eps0; // = ln(mass_tol)
        let folded = (log_add(s_p.log_total(), fold) / a1).max(0.0);
        let bound = folded.min(eps0);
        Ok(Some(RdpValue {
            value: raw,
            slack: (bound - raw).max(0.0),
        }))
    } else {
        Ok(Some(RdpValue {
            value: raw,
            slack: 0.0,
        }))
    }
}

/// Curve of certified upper bounds min(value + slack, ε₀) over an α grid,
/// with a running-max envelope (the true curve is nondecreasing in α).
pub fn rdp_clones_curve(inst: &CloneInstance, alphas: &[f64], mass_tol: f64) -> Result<RdpCurve> {
    if alphas.is_empty() {
        return Err(Error::parameter("alpha grid must be nonempty"));
    }
    for w in alphas.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::parameter("alpha grid must be strictly increasing"));
        }
    }
    let mut points = Vec::with_capacity(alphas.len());
    let mut any_slack = false;
    let mut running = 0.0_f64;
    for &alpha in alphas {
        let v = rdp_clones(inst, alpha, mass_tol)?;
        any_slack |= v.slack > 0.0;
        running = running.max(v.bound(inst.eps0()));
        points.push((alpha, running));
    }
    Ok(RdpCurve {
        points,
        provenance: if any_slack {
            BoundDirection::Upper
        } else {
            BoundDirection::Exact
        },
    })
}

/// Rényi divergence of order α between the shuffled-2RR count distributions,
/// maximized over both directions. A lower bound on the general curve.
pub fn rdp_lower_2rr(n: u64, eps0: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let pair = RrCountPair::new(n, eps0)?;
    let a1 = alpha - 1.0;
    let (lo, hi) = pair.window();
    let mut s0 = LogSum::new();
    let mut s1 = LogSum::new();
    for c in lo..=hi {
        let l0 = pair.log_pmf0(c as i64);
        let l1 = pair.log_pmf1(c as i64);
        if l0 == LOG_ZERO || l1 == LOG_ZERO {
            continue;
        }
        s0.add(alpha * l0 - a1 * l1);
        s1.add(alpha * l1 - a1 * l0);
    }
    Ok((s0.log_total().max(s1.log_total()) / a1).max(0.0))
}

/// Adaptive RDP composition: pointwise ε(α) ← reps · ε(α).
pub fn rdp_compose(curve: &RdpCurve, reps: u64) -> RdpCurve {
    RdpCurve {
        points: curve
            .points
            .iter()
            .map(|&(a, e)| (a, reps as f64 * e))
            .collect(),
        provenance: curve.provenance,
    }
}

fn conversion_penalty(alpha: f64, delta: f64) -> f64 {
    ((alpha - 1.0) / alpha).ln() - (delta.ln() + alpha.ln()) / (alpha - 1.0)
}

/// Convert an RDP curve to an (ε, δ) guarantee:
/// min over points of ε(α) + ln((α−1)/α) − (ln δ + ln α)/(α−1).
pub fn rdp_to_dp(curve: &RdpCurve, delta: f64) -> Result<f64> {
    if curve.points.is_empty() {
        return Err(Error::parameter("RDP curve must be nonempty"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::parameter("delta must lie in (0, 1)"));
    }
    Ok(curve
        .points
        .iter()
        .map(|&(a, e)| e + conversion_penalty(a, delta))
        .fold(f64::INFINITY, f64::min))
}

/// Advanced composition of `reps` mechanisms each (ε, δ_each)-DP with slack δ':
/// the three-term minimum over basic composition and the two
/// advanced-composition refinements, with total
/// δ = 1 − (1 − δ_each)^reps (1 − δ').
pub fn advanced_composition(
    eps: f64,
    delta_each: f64,
    reps: u64,
    delta_slack: f64,
) -> Result<EpsDelta> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::parameter("eps must be finite and positive"));
    }
    if !(0.0..1.0).contains(&delta_each) {
        return Err(Error::parameter("delta_each must lie in [0, 1)"));
    }
    if reps < 1 {
        return Err(Error::parameter("reps must be at least 1"));
    }
    if !(delta_slack > 0.0 && delta_slack < 1.0) {
        return Err(Error::parameter("delta_slack must lie in (0, 1)"));
    }
    let r = reps as f64;
    let drift = r * eps * (eps.exp() - 1.0) / (eps.exp() + 1.0);
    let basic = r * eps;
    let hoeffding = drift + eps * (2.0 * r * (1.0 / delta_slack).ln()).sqrt();
    let refined = drift
        + eps * (2.0 * r * (std::f64::consts::E + r.sqrt() * eps / delta_slack).ln()).sqrt();
    let total = -((r * (-delta_each).ln_1p() + (-delta_slack).ln_1p()).exp_m1());
    Ok(EpsDelta {
        eps: basic.min(hoeffding).min(refined),
        delta: total,
        direction: BoundDirection::Upper,
    })
}

/// Per-α enumeration cap used by `compose_via_rdp` grid scans; roughly a few
/// seconds of work per α on one core.
const COMPOSE_TERM_BUDGET: u64 = 120_000_000;

/// Up to `want` indices of `alphas`, log-spaced in α−1, endpoints included.
fn coarse_indices(alphas: &[f64], want: usize) -> Vec<usize> {
    if alphas.len() <= want {
        return (0..alphas.len()).collect();
    }
    let lo = (alphas[0] - 1.0).ln();
    let hi = (alphas[alphas.len() - 1] - 1.0).ln();
    let mut out: Vec<usize> = (0..want)
        .map(|i| {
            let target = (lo + (hi - lo) * i as f64 / (want - 1) as f64).exp() + 1.0;
            match alphas.binary_search_by(|a| a.partial_cmp(&target).unwrap()) {
                Ok(j) => j,
                Err(j) => {
                    if j == 0 {
                        0
                    } else if j >= alphas.len()
                        || target - alphas[j - 1] <= alphas[j] - target
                    {
                        j - 1
                    } else {
                        j
                    }
                }
            }
        })
        .collect();
    out.dedup();
    out
}

/// Composition of `reps` shuffled rounds via the RDP route: per-α composition,
/// then conversion at the full δ budget.
///
/// Each grid point yields an independent certified candidate
/// reps·min(ε(α)+slack, ε₀) + penalty(α), so the minimum over any subset is a
/// valid upper bound. The scan therefore evaluates a log-spaced subset of the
/// grid, refines once around its argmin, skips α that provably cannot beat the
/// incumbent (ε(α) is nondecreasing), and falls back to the ε₀ cap for α whose
/// enumeration would blow past the per-α work cap.
pub fn compose_via_rdp(
    inst: &CloneInstance,
    reps: u64,
    delta_total: f64,
    mass_tol: f64,
    alphas: &[f64],
) -> Result<EpsDelta> {
    if reps < 1 {
        return Err(Error::parameter("reps must be at least 1"));
    }
    if !(delta_total > 0.0 && delta_total < 1.0) {
        return Err(Error::parameter("delta must lie in (0, 1)"));
    }
    if alphas.is_empty() {
        return Err(Error::parameter("alpha grid must be nonempty"));
    }
    for w in alphas.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::parameter("alpha grid must be strictly increasing"));
        }
    }
    for &alpha in alphas {
        check_alpha(alpha)?;
    }
    let eps0 = inst.eps0();
    let r = reps as f64;
    // Always-available candidates from the likelihood-ratio cap ε(α) ≤ ε₀.
    let mut best = alphas
        .iter()
        .map(|&a| r * eps0 + conversion_penalty(a, delta_total))
        .fold(f64::INFINITY, f64::min);

    let coarse = coarse_indices(alphas, 14);
    let mut value_floor = 0.0_f64;
    let mut over_budget = false;
    let mut best_idx = None;
    let scan = |idx: usize,
                    best: &mut f64,
                    best_idx: &mut Option<usize>,
                    value_floor: &mut f64,
                    over_budget: &mut bool|
     -> Result<()> {
        let alpha = alphas[idx];
        let pen = conversion_penalty(alpha, delta_total);
        if *over_budget || r * *value_floor + pen >= *best {
            return Ok(());
        }
        match rdp_clones_core(inst, alpha, mass_tol, COMPOSE_TERM_BUDGET)? {
            Some(v) => {
                *value_floor = value_floor.max(v.value);
                let candidate = r * v.bound(eps0) + pen;
                if candidate < *best {
                    *best = candidate;
                    *best_idx = Some(idx);
                }
            }
            None => *over_budget = true,
        }
        Ok(())
    };
    for &idx in &coarse {
        scan(idx, &mut best, &mut best_idx, &mut value_floor, &mut over_budget)?;
    }
    if let Some(center) = best_idx {
        let pos = coarse.binary_search(&center).unwrap_or(0);
        let lo = if pos == 0 { center } else { coarse[pos - 1] + 1 };
        let hi = if pos + 1 < coarse.len() {
            coarse[pos + 1]
        } else {
            center + 1
        };
        let gap = hi.saturating_sub(lo);
        if gap > 1 {
            let picks = gap.min(6);
            let mut value_floor = 0.0_f64; // refinement runs below the coarse α's
            let mut over_budget = false;
            let mut unused = None;
            for i in 0..picks {
                let idx = lo + gap * i / picks;
                if idx != center {
                    scan(idx, &mut best, &mut unused, &mut value_floor, &mut over_budget)?;
                }
            }
        }
    }
    Ok(EpsDelta {
        eps: best.max(0.0),
        delta: delta_total,
        direction: BoundDirection::Upper,
    })
}

/// Composition baseline: the numerical per-round bound at δ_total/(2·reps)
/// fed through advanced composition with slack δ_total/2.
pub fn compose_via_advanced(
    inst: &CloneInstance,
    reps: u64,
    delta_total: f64,
    cfg: &SearchConfig,
) -> Result<EpsDelta> {
    if reps < 1 {
        return Err(Error::parameter("reps must be at least 1"));
    }
    if !(delta_total > 0.0 && delta_total < 1.0) {
        return Err(Error::parameter("delta must lie in (0, 1)"));
    }
    let delta_each = delta_total / (2.0 * reps as f64);
    let per_round = eps_upper(inst, delta_each, cfg)?;
    if per_round == 0.0 {
        return Ok(EpsDelta {
            eps: 0.0,
            delta: delta_total,
            direction: BoundDirection::Upper,
        });
    }
    advanced_composition(per_round, delta_each, reps, delta_total / 2.0)
}
