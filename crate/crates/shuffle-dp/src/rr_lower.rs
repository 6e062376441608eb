//! Exact privacy of shuffled binary randomized response on the distinguished
//! neighboring pair (all zeros vs one flipped report): the lower-bound anchor
//! for every general upper bound, plus the deep-tail δ sweep.
//!
//! The observable statistic is the count of ones, so the two worlds are
//! c⁰ ∼ Bin(n, 1/(e^ε₀+1)) and c¹ ∼ Bin(n−1, 1/(e^ε₀+1)) + Bern(e^ε₀/(e^ε₀+1)).
//! All sums are taken term-by-term in log space so the deep tail (δ at or far
//! below the smallest positive double) stays exact; counts whose log-masses
//! fall below the scan floor — e^−820 by default, deeper when a sweep asks
//! for smaller δ — are outside the scanned window.

use crate::dist::{log_add, log_binom_pmf_raw, LogSum, LOG_ZERO};
use crate::{Error, Result};

const WINDOW_FLOOR: f64 = -820.0;

/// The pair of count distributions for shuffled binary randomized response.
#[derive(Debug, Clone)]
pub struct RrCountPair {
    n: u64,
    eps0: f64,
    /// Pr(report = 1 | truth = 0) = 1/(e^ε₀ + 1).
    p1: f64,
    /// Log-mass cutoff for the scanned window.
    floor: f64,
    /// Counts with log-mass above `floor` in either world.
    window: (u64, u64),
}

impl RrCountPair {
    pub fn new(n: u64, eps0: f64) -> Result<Self> {
        Self::with_floor(n, eps0, WINDOW_FLOOR)
    }

    /// A pair whose scanned window keeps counts with log-mass above `floor`;
    /// needed when resolving δ far below e^WINDOW_FLOOR, where ln δ is still a
    /// perfectly good double even though δ itself underflows.
    pub fn with_floor(n: u64, eps0: f64, floor: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::parameter("n must be at least 1"));
        }
        if !eps0.is_finite() || eps0 <= 0.0 {
            return Err(Error::parameter("eps0 must be finite and positive"));
        }
        if !(floor < 0.0) {
            return Err(Error::parameter("window floor must be negative"));
        }
        let p1 = 1.0 / (eps0.exp() + 1.0);
        let mut pair = RrCountPair {
            n,
            eps0,
            p1,
            floor,
            window: (0, n),
        };
        pair.window = pair.scan_window();
        Ok(pair)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    pub fn window(&self) -> (u64, u64) {
        self.window
    }

    /// ln Pr(c⁰ = c).
    pub fn log_pmf0(&self, c: i64) -> f64 {
        log_binom_pmf_raw(self.n, self.p1, c)
    }

    /// ln Pr(c¹ = c): the Bernoulli-shifted mixture of Bin(n−1, ·).
    pub fn log_pmf1(&self, c: i64) -> f64 {
        let base = self.p1.ln() + log_binom_pmf_raw(self.n - 1, self.p1, c);
        let shifted = (-self.p1).ln_1p() + log_binom_pmf_raw(self.n - 1, self.p1, c - 1);
        log_add(base, shifted)
    }

    fn scan_window(&self) -> (u64, u64) {
        let mode = (((self.n + 1) as f64) * self.p1).floor().min(self.n as f64) as u64;
        let mut lo = mode;
        while lo > 0 && self.log_pmf0(lo as i64 - 1).max(self.log_pmf1(lo as i64 - 1)) > self.floor
        {
            lo -= 1;
        }
        let mut hi = mode;
        while hi < self.n && self.log_pmf0(hi as i64 + 1).max(self.log_pmf1(hi as i64 + 1)) > self.floor
        {
            hi += 1;
        }
        (lo, hi)
    }

    /// ln of both one-sided hockey-stick sums at level e^ε, maximized; stays
    /// meaningful down to ln δ ≈ the window floor, far past f64 underflow.
    pub fn log_delta(&self, eps: f64) -> f64 {
        let (lo, hi) = self.window;
        let mut side0 = LogSum::new();
        let mut side1 = LogSum::new();
        for c in lo..=hi {
            let l0 = self.log_pmf0(c as i64);
            let l1 = self.log_pmf1(c as i64);
            let d01 = eps + l1 - l0;
            if d01 < 0.0 && l0 > LOG_ZERO {
                side0.add(l0 + (-d01.exp_m1()).ln());
            }
            let d10 = eps + l0 - l1;
            if d10 < 0.0 && l1 > LOG_ZERO {
                side1.add(l1 + (-d10.exp_m1()).ln());
            }
        }
        side0.log_total().max(side1.log_total())
    }

    /// Both one-sided hockey-stick sums at level e^ε, maximized:
    /// max{Σ_c max(pmf0 − e^ε pmf1, 0), Σ_c max(pmf1 − e^ε pmf0, 0)}.
    pub fn delta(&self, eps: f64) -> f64 {
        self.log_delta(eps).exp()
    }

    /// Dense pmf vectors over {0, …, n}; intended for small-n verification.
    pub fn pmf_vectors(&self) -> (Vec<f64>, Vec<f64>) {
        let p0 = (0..=self.n).map(|c| self.log_pmf0(c as i64).exp()).collect();
        let p1 = (0..=self.n).map(|c| self.log_pmf1(c as i64).exp()).collect();
        (p0, p1)
    }
}

/// max{D_{e^ε}(c⁰‖c¹), D_{e^ε}(c¹‖c⁰)} for shuffled binary randomized response.
pub fn rr_delta_exact(n: u64, eps0: f64, eps: f64) -> Result<f64> {
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::parameter("eps must be finite and nonnegative"));
    }
    Ok(RrCountPair::new(n, eps0)?.delta(eps))
}

/// Certified lower bound on the central ε at (n, ε₀, δ): binary search on
/// [0, ε₀] against the exact divergence, returning the left endpoint.
pub fn eps_lower_2rr(n: u64, eps0: f64, delta: f64, iterations: u32) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::parameter("delta must lie in (0, 1]"));
    }
    let floor = WINDOW_FLOOR.min(delta.ln() - 80.0);
    let pair = RrCountPair::with_floor(n, eps0, floor)?;
    Ok(search_log(&pair, delta.ln(), iterations))
}

/// Binary search for the largest ε (left endpoint) with ln δ(ε) > log_target.
fn search_log(pair: &RrCountPair, log_target: f64, iterations: u32) -> f64 {
    let mut lo = 0.0_f64;
    let mut hi = pair.eps0;
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        if pair.log_delta(mid) > log_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Exact lower-bound ε at each δ of a descending grid, at full search depth;
/// suitable for locating the δ at which amplification dies out.
pub fn tail_sweep(n: u64, eps0: f64, delta_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if delta_grid.is_empty() {
        return Err(Error::parameter("delta grid must be nonempty"));
    }
    for w in delta_grid.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::parameter("delta grid must be strictly descending"));
        }
    }
    if delta_grid.iter().any(|&d| !(d > 0.0 && d < 1.0)) {
        return Err(Error::parameter("delta grid values must lie in (0, 1)"));
    }
    let logs: Vec<f64> = delta_grid.iter().map(|d| -d.ln()).collect();
    let swept = tail_sweep_log(n, eps0, &logs)?;
    Ok(delta_grid
        .iter()
        .zip(swept)
        .map(|(&d, (_, e))| (d, e))
        .collect())
}

/// `tail_sweep` over a strictly ascending grid of ln(1/δ) values. The δ of
/// interest in the deep tail (ln(1/δ) on the order of n·e^(−ε₀)) underflows
/// f64, so the sweep that locates the amplification cutoff has to run on the
/// log scale end to end.
pub fn tail_sweep_log(n: u64, eps0: f64, log_inv_deltas: &[f64]) -> Result<Vec<(f64, f64)>> {
    if log_inv_deltas.is_empty() {
        return Err(Error::parameter("delta grid must be nonempty"));
    }
    for w in log_inv_deltas.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::parameter(
                "log(1/delta) grid must be strictly ascending",
            ));
        }
    }
    if log_inv_deltas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::parameter(
            "log(1/delta) grid values must be positive and finite",
        ));
    }
    let deepest = *log_inv_deltas.last().unwrap();
    let floor = WINDOW_FLOOR.min(-deepest - 80.0);
    let pair = RrCountPair::with_floor(n, eps0, floor)?;
    Ok(log_inv_deltas
        .iter()
        .map(|&l| (l, search_log(&pair, -l, 40)))
        .collect())
}
