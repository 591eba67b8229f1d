//! Loss profiles for the target families, and amplitude optimization.
//!
//! Off the required zeros every designed table holds `F = 1`; the
//! stationary state depends only on where `F` vanishes and on the
//! equality windows, so any positive value there gives the same result.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{coherent_density_matrix, default_cutoff, CoherentAmplitude, LossProfile, TailRule, TargetState};
use crate::metrics::fidelity;
use crate::optimize::{best_probe, golden_section_maximize};
use crate::scalar::{Real, C};
use crate::stationary::{stationary_matrix, StationaryReport};

/// Grid size of the coarse scan before refinement.
pub const GRID_POINTS: usize = 64;

/// Refinement stops once the golden-section bracket is this narrow.
pub const AMPLITUDE_TOL: f64 = 1e-6;

/// Secondary grid maxima within this fraction of the best flag the
/// objective as multimodal.
const MULTIMODAL_FRACTION: f64 = 0.999;

/// `f(n1) = 0`, `f = 1` elsewhere.
pub fn profile_for_fock<T: Real>(n1: usize, n_max: usize) -> Result<LossProfile<T>> {
    if n1 < 1 || n1 > n_max {
        return Err(Error::InvalidArgument(format!("Fock profile needs 1 <= n1 <= n_max, got n1 = {n1}, n_max = {n_max}")));
    }
    // keep the last stored value nonzero so the held tail adds no zeros
    let len = n_max.max(n1 + 1) + 1;
    let f = (0..len).map(|n| if n == n1 { T::zero() } else { T::one() }).collect();
    LossProfile::new(f, TailRule::HoldLast)
}

/// `F` zero exactly at `0`, `n` and `m`, and `1` elsewhere.
///
/// Full coherence needs `F(k) = F(k + m − n)` along the segment feeding
/// `ρ_nm`, i.e. for `k = n … m−1`; the table is checked against that.
pub fn profile_for_pair<T: Real>(n: usize, m: usize, n_max: usize) -> Result<LossProfile<T>> {
    if n >= m {
        return Err(Error::InvalidArgument(format!("pair profile needs n < m, got ({n}, {m})")));
    }
    let dn = m - n;
    if m + dn > n_max {
        return Err(Error::InvalidArgument(format!("pair ({n}, {m}) needs n_max >= {}, got {n_max}", m + dn)));
    }
    let ladder: Vec<T> = (0..=n_max).map(|k| if k == 0 || k == n || k == m { T::zero() } else { T::one() }).collect();
    for k in n..m {
        if ladder[k] != ladder[k + dn] {
            return Err(Error::InvalidProfile(format!("window F({k}) = F({}) cannot hold for pair ({n}, {m})", k + dn)));
        }
    }
    LossProfile::from_ladder(&ladder, TailRule::HoldLast)
}

/// `F` zero on `{0} ∪ {jN + n0}`, `1` elsewhere, repeated with period `N`.
pub fn profile_for_comb<T: Real>(spacing: usize, offset: usize, n_max: usize) -> Result<LossProfile<T>> {
    if spacing < 2 || offset >= spacing {
        return Err(Error::InvalidArgument(format!("comb profile needs N >= 2 and 0 <= n0 < N, got N = {spacing}, n0 = {offset}")));
    }
    let n_max = n_max.max(spacing);
    let ladder: Vec<T> = (0..=n_max).map(|k| if k == 0 || k % spacing == offset { T::zero() } else { T::one() }).collect();
    LossProfile::from_ladder(&ladder, TailRule::Periodic(spacing))
}

/// Canonical profile for a target family.
pub fn profile_for_target<T: Real>(target: &TargetState<T>, n_max: usize) -> Result<LossProfile<T>> {
    target.validate()?;
    match *target {
        TargetState::Fock { n } => profile_for_fock(n, n_max),
        TargetState::Pair { n, m, .. } => profile_for_pair(n, m, n_max),
        TargetState::Comb { spacing, offset, .. } => profile_for_comb(spacing, offset, n_max),
    }
}

/// Phase of the initial coherent amplitude that lines up with the target:
/// `φ/(m − n)` for pairs, the reference phase for combs, `0` otherwise.
pub fn initial_phase<T: Real>(target: &TargetState<T>) -> T {
    match *target {
        TargetState::Pair { n, m, phase } => phase / T::from_index(m - n),
        TargetState::Comb { reference, .. } => reference.arg(),
        TargetState::Fock { .. } => T::zero(),
    }
}

/// The target as it should be compared against the stationary state of a
/// coherent input of modulus `r`. Combs take `|α′|² = r² − (N − 1)/2`.
pub fn target_at_amplitude<T: Real>(target: &TargetState<T>, r: T) -> TargetState<T> {
    match *target {
        TargetState::Comb { spacing, offset, reference } => {
            let shifted = (r * r - (T::from_index(spacing) - T::one()) / T::lit(2.0)).max(T::zero()).sqrt();
            TargetState::Comb { spacing, offset, reference: C::from_polar(shifted, reference.arg()) }
        }
        other => other,
    }
}

/// Levels whose coherence characterizes the target: the pair itself, the
/// vacuum and the Fock level, or the two lowest comb teeth.
pub fn coherence_levels<T: Real>(target: &TargetState<T>) -> (usize, usize) {
    match *target {
        TargetState::Fock { n } => (0, n),
        TargetState::Pair { n, m, .. } => (n, m),
        TargetState::Comb { spacing, offset, .. } => {
            if offset == 0 {
                (0, spacing)
            } else {
                (offset, offset + spacing)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Coherence,
    Fidelity,
    Purity,
}

/// Stationary figures of merit for one coherent amplitude.
#[derive(Debug, Clone)]
pub struct AmplitudeEvaluation<T: Real = f64> {
    pub r: T,
    pub n_max: usize,
    pub coherence: T,
    pub fidelity: T,
    pub purity: T,
    pub report: StationaryReport<T>,
}

impl<T: Real> AmplitudeEvaluation<T> {
    pub fn objective(&self, objective: Objective) -> T {
        match objective {
            Objective::Coherence => self.coherence,
            Objective::Fidelity => self.fidelity,
            Objective::Purity => self.purity,
        }
    }
}

/// Stationary state reached from `|r e^{iθ}⟩` with the target's canonical
/// profile, truncated at the default cutoff for `r`.
pub fn evaluate_amplitude<T: Real>(target: &TargetState<T>, r: T) -> Result<AmplitudeEvaluation<T>> {
    target.validate()?;
    if !(r >= T::zero()) || !r.is_finite() {
        return Err(Error::InvalidArgument(format!("amplitude must be finite and non-negative, got {r}")));
    }
    let n_max = default_cutoff(r.to_f64_lossy(), target.reach());
    let profile = profile_for_target(target, n_max)?;
    let rho0 = coherent_density_matrix(CoherentAmplitude::polar(r, initial_phase(target)), n_max).rho;
    let report = stationary_matrix(&profile, &rho0)?;
    let (p, q) = coherence_levels(target);
    let coherence = T::lit(2.0) * report.rho[(p, q)].norm();
    let fidelity = fidelity(&report.rho, &target_at_amplitude(target, r));
    Ok(AmplitudeEvaluation { r, n_max, coherence, fidelity, purity: report.purity, report })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationMeta {
    pub bracket: (f64, f64),
    pub grid_points: usize,
    /// Golden-section evaluations after the grid scan.
    pub iterations: usize,
    /// The best grid point sat on an end of the bracket.
    pub boundary: bool,
    pub multimodal: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult<T: Real = f64> {
    pub r_opt: T,
    pub objective: T,
    /// Every `(r, objective)` evaluation in order.
    pub trace: Vec<(T, T)>,
    pub meta: OptimizationMeta,
}

/// Coarse grid scan followed by golden-section refinement around the best
/// grid point. Ties go to the smaller amplitude.
pub fn optimize_amplitude<T: Real>(
    target: &TargetState<T>,
    bracket: (T, T),
    objective: Objective,
) -> Result<OptimizationResult<T>> {
    let (lo, hi) = bracket;
    if !(lo >= T::zero() && lo < hi && hi.is_finite()) {
        return Err(Error::InvalidArgument(format!("bracket must satisfy 0 <= r_lo < r_hi, got ({lo}, {hi})")));
    }
    target.validate()?;
    let step = (hi - lo) / T::from_index(GRID_POINTS - 1);
    let grid: Vec<T> = (0..GRID_POINTS).map(|i| if i + 1 == GRID_POINTS { hi } else { lo + step * T::from_index(i) }).collect();
    let values: Vec<T> = grid
        .par_iter()
        .map(|&r| evaluate_amplitude(target, r).map(|e| e.objective(objective)))
        .collect::<Result<_>>()?;
    let mut trace: Vec<(T, T)> = grid.iter().copied().zip(values.iter().copied()).collect();
    let best_idx = (0..GRID_POINTS).fold(0, |b, i| if values[i] > values[b] { i } else { b });
    let best = values[best_idx];

    let mut warnings = Vec::new();
    let threshold = best * T::lit(MULTIMODAL_FRACTION);
    let peaks = (0..GRID_POINTS)
        .filter(|&i| {
            let left = i == 0 || values[i] > values[i - 1];
            let right = i + 1 == GRID_POINTS || values[i] >= values[i + 1];
            left && right && values[i] >= threshold
        })
        .count();
    let multimodal = peaks > 1;
    if multimodal {
        warnings.push(format!("objective has {peaks} grid maxima within 0.1% of the best; refining the global grid best"));
    }
    let boundary = best_idx == 0 || best_idx + 1 == GRID_POINTS;
    if boundary {
        warnings.push(format!("best grid point lies on the bracket edge r = {}", grid[best_idx]));
    }

    let a = grid[best_idx.saturating_sub(1)];
    let b = grid[(best_idx + 1).min(GRID_POINTS - 1)];
    let mut failure = None;
    let (_, _, probes) = golden_section_maximize(
        |r| match evaluate_amplitude(target, r) {
            Ok(e) => e.objective(objective),
            Err(e) => {
                failure.get_or_insert(e);
                T::neg_infinity()
            }
        },
        a,
        b,
        T::lit(AMPLITUDE_TOL),
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let iterations = probes.len();
    trace.extend(probes);
    let (r_opt, value) = best_probe(&trace);
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(OptimizationResult {
        r_opt,
        objective: value,
        trace,
        meta: OptimizationMeta {
            bracket: (lo.to_f64_lossy(), hi.to_f64_lossy()),
            grid_points: GRID_POINTS,
            iterations,
            boundary,
            multimodal,
            warnings,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow<T: Real = f64> {
    pub r: T,
    pub coherence: T,
    pub fidelity: T,
    pub purity: T,
    /// Nonzero upper-triangle support elements `(n, m, ρ_nm)`.
    pub rho_elements: Vec<(usize, usize, C<T>)>,
}

/// One stationary solve per amplitude, evaluated concurrently and returned
/// in input order.
pub fn sweep_amplitude<T: Real>(target: &TargetState<T>, r_values: &[T]) -> Result<Vec<SweepRow<T>>> {
    if r_values.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one amplitude".into()));
    }
    r_values
        .par_iter()
        .map(|&r| {
            let e = evaluate_amplitude(target, r)?;
            let rho_elements = e
                .report
                .support
                .accumulators
                .iter()
                .map(|a| (a.n, a.n + a.k, e.report.rho[(a.n, a.n + a.k)]))
                .filter(|x| x.2.norm() > T::zero())
                .collect();
            Ok(SweepRow { r, coherence: e.coherence, fidelity: e.fidelity, purity: e.purity, rho_elements })
        })
        .collect()
}
