//! Exact stationary states without time integration.
//!
//! An element `ρ_{n,n+k}` survives at `t → ∞` only when `F(n) = F(n+k) = 0`
//! (an *accumulator*). Amplitude flows down each diagonal toward smaller
//! `n`, passing rung `j` with transmittance `T_k(j)`; an accumulator at `n1`
//! collects everything from `n1` up to the first blocking rung `n2`, where
//! `F(n2) = 0` or `F(n2+k) = 0`:
//!
//! ```text
//! ρ_{n1,n1+k}(∞) = Σ_{m=n1}^{n2−1} ρ_{m,m+k}(0) · Π_{j=n1+1}^{m} T_k(j)
//! ```

use std::collections::BTreeMap;

use crate::error::Result;
use crate::fock::{DensityMatrix, LossProfile};
use crate::scalar::{czero, Real};

/// Segment products longer than this are accumulated in the log domain.
const LOG_PRODUCT_THRESHOLD: usize = 64;

/// First rung above an accumulator that absorbs the flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Blocking {
    At(usize),
    /// No blocking rung below the truncation; the segment runs to the cutoff.
    Cutoff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Accumulator {
    pub n: usize,
    pub k: usize,
    pub blocking: Blocking,
}

impl Accumulator {
    /// One past the last rung feeding this accumulator.
    pub fn segment_end(&self, n_max: usize) -> usize {
        match self.blocking {
            Blocking::At(n2) => n2,
            Blocking::Cutoff => n_max - self.k + 1,
        }
    }
}

/// Positions allowed to be nonzero in the stationary state.
#[derive(Debug, Clone, PartialEq)]
pub struct StationarySupport {
    pub n_max: usize,
    /// Sorted by `(k, n)`; `(0, 0)` is always first.
    pub accumulators: Vec<Accumulator>,
}

impl StationarySupport {
    pub fn contains(&self, n: usize, k: usize) -> bool {
        self.accumulators.iter().any(|a| a.n == n && a.k == k)
    }

    /// Membership for a matrix position in either triangle.
    pub fn contains_element(&self, n: usize, m: usize) -> bool {
        let (lo, hi) = if n <= m { (n, m) } else { (m, n) };
        self.contains(lo, hi - lo)
    }

    /// `(n, k)` pairs.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.accumulators.iter().map(|a| (a.n, a.k)).collect()
    }

    /// Fock levels touched by the support.
    pub fn levels(&self) -> Vec<usize> {
        let mut lv: Vec<usize> = self.accumulators.iter().flat_map(|a| [a.n, a.n + a.k]).collect();
        lv.sort_unstable();
        lv.dedup();
        lv
    }
}

/// Enumerates every accumulator with `n + k ≤ n_max`, zero-testing `F`
/// exactly.
pub fn stationary_support<T: Real>(profile: &LossProfile<T>, n_max: usize) -> StationarySupport {
    let dark: Vec<bool> = (0..=n_max).map(|n| profile.is_dark(n)).collect();
    let mut accumulators = Vec::new();
    for k in 0..=n_max {
        for n in 0..=n_max - k {
            if !(dark[n] && dark[n + k]) {
                continue;
            }
            let blocking = (n + 1..=n_max - k)
                .find(|&j| dark[j] || dark[j + k])
                .map_or(Blocking::Cutoff, Blocking::At);
            accumulators.push(Accumulator { n, k, blocking });
        }
    }
    StationarySupport { n_max, accumulators }
}

#[derive(Debug, Clone)]
pub struct StationaryReport<T: Real = f64> {
    pub rho: DensityMatrix<T>,
    pub support: StationarySupport,
    pub purity: T,
    /// `2|ρ_nm|` for each off-diagonal support element, keyed `(n, m)`, `n < m`.
    pub coherences: BTreeMap<(usize, usize), T>,
    pub warnings: Vec<String>,
}

fn segment_weights<T: Real>(profile: &LossProfile<T>, n1: usize, k: usize, end: usize) -> Vec<T> {
    let len = end.saturating_sub(n1);
    let mut weights = Vec::with_capacity(len);
    if len > LOG_PRODUCT_THRESHOLD {
        let mut log_w = T::zero();
        let mut dead = false;
        for m in n1..end {
            if m > n1 && !dead {
                let t = profile.transmittance(k, m);
                if t == T::zero() {
                    dead = true;
                } else {
                    log_w += t.ln();
                }
            }
            weights.push(if dead { T::zero() } else { log_w.exp() });
        }
    } else {
        let mut w = T::one();
        for m in n1..end {
            if m > n1 {
                w *= profile.transmittance(k, m);
            }
            weights.push(w);
        }
    }
    weights
}

/// Stationary state reached from `rho0`.
pub fn stationary_matrix<T: Real>(profile: &LossProfile<T>, rho0: &DensityMatrix<T>) -> Result<StationaryReport<T>> {
    rho0.validate()?;
    let n_max = rho0.n_max();
    let support = stationary_support(profile, n_max);
    let mut rho = DensityMatrix::zeros(rho0.dim());
    let mut warnings = Vec::new();
    let missing = (T::one() - rho0.trace().re).abs();
    let mut warned_cutoff = false;

    for acc in &support.accumulators {
        let (n1, k) = (acc.n, acc.k);
        let end = acc.segment_end(n_max);
        let weights = segment_weights(profile, n1, k, end);
        let value = (n1..end).zip(&weights).fold(czero(), |sum, (m, &w)| sum + rho0[(m, m + k)] * w);
        if k == 0 {
            rho[(n1, n1)] = crate::scalar::cre(value.re);
        } else {
            rho[(n1, n1 + k)] = value;
            rho[(n1 + k, n1)] = value.conj();
        }
        if acc.blocking == Blocking::Cutoff && missing > T::lit(1e-9) && !warned_cutoff {
            warned_cutoff = true;
            warnings.push(format!(
                "segment from ({n1},{k}) runs to the cutoff while {missing:e} of the initial trace lies beyond n_max = {n_max}"
            ));
        }
    }

    let coherences = support
        .accumulators
        .iter()
        .filter(|a| a.k > 0)
        .map(|a| ((a.n, a.n + a.k), T::lit(2.0) * rho[(a.n, a.n + a.k)].norm()))
        .collect();
    let purity = rho.purity();
    Ok(StationaryReport { rho, support, purity, coherences, warnings })
}
