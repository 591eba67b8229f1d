//! Acceptance checks with pinned tolerances.
//!
//! Each check returns a [`CriterionOutcome`]; the runs shared between
//! checks (the analytic-vs-ODE comparison and the elimination study) are
//! computed once by [`equivalence_runs`] and [`elimination_runs`].

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::designer::{
    evaluate_amplitude, initial_phase, optimize_amplitude, profile_for_target, sweep_amplitude, Objective,
};
use crate::elimination::{
    reduced_generator, second_order_generator, verify_against_all, ModeExpansion, ReductionReport, TermKind,
};
use crate::error::Result;
use crate::evolution::{evolve_matrix, EvolutionSettings};
use crate::fock::{bands_from_matrix, coherent_density_matrix, default_cutoff, CoherentAmplitude, LossProfile, TargetState};
use crate::metrics::{
    comb_state_vector, comb_state_vector_circle, maximize_gaussian_pair_coherence, overlap, pair02_optimal_amplitude,
    purity_condition_residual,
};
use crate::scalar::C;
use crate::special::factorial;
use crate::stationary::{stationary_matrix, stationary_support};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    /// Wall time of the work attributed to this criterion, seconds.
    pub seconds: f64,
}

impl CriterionOutcome {
    fn new(id: u8, name: &'static str, passed: bool, detail: String, seconds: f64) -> Self {
        Self { id, name, passed, detail, seconds }
    }

    fn failed(id: u8, name: &'static str, err: impl std::fmt::Display) -> Self {
        Self::new(id, name, false, format!("error: {err}"), 0.0)
    }

    /// `PASS [ 3] name: detail (1.23 s)`.
    pub fn line(&self) -> String {
        format!(
            "{} [{:>2}] {}: {} ({:.2} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

fn within(x: f64, want: f64, tol: f64) -> bool {
    (x - want).abs() <= tol
}

/// `q_k² = r^{2k} e^{−r²}/k!` by direct product, independent of the
/// log-gamma route used by the solver.
fn poisson_weight(k: usize, r: f64) -> f64 {
    let r2 = r * r;
    (1..=k).fold((-r2).exp(), |acc, j| acc * r2 / j as f64)
}

pub fn criterion_1() -> CriterionOutcome {
    let name = criterion_name(1);
    let start = Instant::now();
    let target = TargetState::Pair { n: 0, m: 2, phase: 0.0 };
    let run = || -> Result<(f64, f64, f64, f64)> {
        let opt = optimize_amplitude(&target, (0.2, 3.0), Objective::Coherence)?;
        let e = evaluate_amplitude(&target, opt.r_opt)?;
        Ok((opt.r_opt, e.coherence, e.report.rho[(0, 2)].norm(), e.report.rho[(0, 0)].re))
    };
    match run() {
        Ok((r, c, rho02, rho00)) => {
            let secs = start.elapsed().as_secs_f64();
            let ok = within(r, 1.207, 0.01)
                && within(c, 0.88, 0.005)
                && within(rho02, 0.44, 0.005)
                && within(rho00, 0.60, 0.03)
                && secs < 1.0;
            let detail = format!(
                "r_opt = {r:.6} (closed form {:.6}), c02 = {c:.6}, |rho02| = {rho02:.6}, rho00 = {rho00:.6} (reference 0.60)",
                pair02_optimal_amplitude::<f64>()
            );
            CriterionOutcome::new(1, name, ok, detail, secs)
        }
        Err(e) => CriterionOutcome::failed(1, name, e),
    }
}

pub fn criterion_2() -> CriterionOutcome {
    let name = criterion_name(2);
    let start = Instant::now();
    let run = || -> Result<(f64, f64, bool)> {
        let mut worst = 0.0f64;
        let mut monotone = true;
        for n1 in [1usize, 3, 5] {
            let target = TargetState::Fock { n: n1 };
            let grid: Vec<f64> = (1..=40).map(|i| 4.0 * i as f64 / 40.0).collect();
            let rows = sweep_amplitude(&target, &grid)?;
            for row in &rows {
                let rho00: f64 = (0..n1).map(|k| poisson_weight(k, row.r)).sum();
                worst = worst.max((row.fidelity - (1.0 - rho00)).abs());
            }
            monotone &= rows.windows(2).all(|w| w[1].fidelity > w[0].fidelity);
        }
        let f3 = evaluate_amplitude(&TargetState::Fock { n: 3 }, 3.0)?.fidelity;
        Ok((worst, f3, monotone))
    };
    match run() {
        Ok((worst, f3, monotone)) => {
            let ok = worst <= 1e-12 && within(f3, 1.0 - 6.232e-3, 1e-6) && monotone;
            let detail = format!(
                "max |F - (1 - sum q_k^2)| = {worst:.2e}, F(n1=3, r^2=9) = {f3:.9}, monotone on 40-point grids: {monotone}"
            );
            CriterionOutcome::new(2, name, ok, detail, start.elapsed().as_secs_f64())
        }
        Err(e) => CriterionOutcome::failed(2, name, e),
    }
}

/// One analytic-vs-ODE comparison.
#[derive(Debug, Clone)]
pub struct EquivalenceRun {
    pub label: String,
    pub r: f64,
    pub n_max: usize,
    pub t_end: f64,
    /// `max |ρ_stationary − ρ_ode(t_end)|`.
    pub max_deviation: f64,
    /// Smallest `ξ_k(n, t)` with `c_k = (α*)^k`, over all snapshots.
    pub min_xi: f64,
    /// Largest off-support magnitude in the stationary and final ODE states.
    pub off_support: f64,
    /// Largest `trace_error / (1 + γt)` over the snapshots.
    pub scaled_trace_error: f64,
    pub max_hermiticity_error: f64,
}

#[derive(Debug, Clone)]
pub struct EquivalenceRuns {
    pub runs: Vec<EquivalenceRun>,
    pub seconds: f64,
}

pub const EQUIVALENCE_N_MAX: usize = 60;

pub fn equivalence_targets() -> Vec<(&'static str, TargetState<f64>)> {
    let one = C::new(1.0, 0.0);
    vec![
        ("fock:3", TargetState::Fock { n: 3 }),
        ("pair:0,2", TargetState::Pair { n: 0, m: 2, phase: 0.0 }),
        ("pair:4,9", TargetState::Pair { n: 4, m: 9, phase: 0.0 }),
        ("comb:2,0", TargetState::Comb { spacing: 2, offset: 0, reference: one }),
        ("comb:3,1", TargetState::Comb { spacing: 3, offset: 1, reference: one }),
    ]
}

/// Smallest positive band rate `F²(n) + F²(n+k)` inside the truncation.
pub fn min_positive_rate(profile: &LossProfile<f64>, n_max: usize) -> f64 {
    let mut best = f64::INFINITY;
    for k in 0..=n_max {
        for n in 0..=n_max - k {
            let rate = profile.band_rate(k, n);
            if rate > 0.0 {
                best = best.min(rate);
            }
        }
    }
    best
}

fn equivalence_run(label: &str, target: &TargetState<f64>, r: f64) -> Result<EquivalenceRun> {
    let n_max = EQUIVALENCE_N_MAX;
    let gamma = 1.0;
    let profile = profile_for_target(target, n_max)?;
    let theta = initial_phase(target);
    let rho0 = coherent_density_matrix(CoherentAmplitude::polar(r, theta), n_max).rho;
    let report = stationary_matrix(&profile, &rho0)?;
    let t_end = 50.0 / (gamma * min_positive_rate(&profile, n_max));
    let settings = EvolutionSettings::new(gamma, t_end).with_uniform_snapshots(10).with_reference_phase(theta);
    let traj = evolve_matrix(&profile, &rho0, &settings)?;
    let last = traj.states.last().expect("trajectory has a final state");

    let mut min_xi = f64::INFINITY;
    for rho in &traj.states {
        for band in bands_from_matrix(rho, theta)? {
            // phase-only scale e^{-ikθ} → (α*)^k rescales by r^{-k}
            let scale = r.powi(band.offset as i32);
            min_xi = min_xi.min(band.min_real() / scale);
        }
    }
    let support = stationary_support(&profile, n_max);
    let mut off_support = 0.0f64;
    for n in 0..=n_max {
        for m in 0..=n_max {
            if !support.contains_element(n, m) {
                off_support = off_support.max(report.rho[(n, m)].norm()).max(last[(n, m)].norm());
            }
        }
    }
    let scaled_trace_error = traj
        .times
        .iter()
        .zip(&traj.diagnostics)
        .fold(0.0f64, |acc, (t, d)| acc.max(d.trace_error / (1.0 + gamma * t)));
    Ok(EquivalenceRun {
        label: label.to_string(),
        r,
        n_max,
        t_end,
        max_deviation: report.rho.max_abs_diff(last),
        min_xi,
        off_support,
        scaled_trace_error,
        max_hermiticity_error: traj.max_hermiticity_error(),
    })
}

/// Stationary solver against long-time integration for every criterion-3
/// profile and `r ∈ {1, 2, 3}`.
pub fn equivalence_runs() -> Result<EquivalenceRuns> {
    let start = Instant::now();
    let cases: Vec<(&str, TargetState<f64>, f64)> = equivalence_targets()
        .into_iter()
        .flat_map(|(label, t)| [1.0, 2.0, 3.0].map(move |r| (label, t, r)))
        .collect();
    let runs = cases.par_iter().map(|(label, t, r)| equivalence_run(label, t, *r)).collect::<Result<Vec<_>>>()?;
    Ok(EquivalenceRuns { runs, seconds: start.elapsed().as_secs_f64() })
}

fn worst_run(runs: &EquivalenceRuns, key: impl Fn(&EquivalenceRun) -> f64) -> (&EquivalenceRun, f64) {
    runs.runs
        .iter()
        .map(|r| (r, key(r)))
        .fold(None, |best: Option<(&EquivalenceRun, f64)>, x| match best {
            Some(b) if b.1 >= x.1 => Some(b),
            _ => Some(x),
        })
        .expect("at least one run")
}

pub fn criterion_3(runs: &EquivalenceRuns) -> CriterionOutcome {
    let (run, dev) = worst_run(runs, |r| r.max_deviation);
    let n_max = runs.runs.iter().map(|r| r.n_max).max().unwrap_or(0);
    let ok = dev <= 1e-6 && runs.seconds < 30.0 && n_max <= 60;
    let detail = format!(
        "{} runs, max |stationary - ODE| = {dev:.2e} ({} r = {}), n_max = {n_max}",
        runs.runs.len(),
        run.label,
        run.r
    );
    CriterionOutcome::new(3, criterion_name(3), ok, detail, runs.seconds)
}

pub fn criterion_4() -> CriterionOutcome {
    let name = criterion_name(4);
    let start = Instant::now();
    let run = || -> Result<Vec<(usize, usize, f64)>> {
        let mut out = Vec::new();
        for (spacing, offset) in [(2usize, 0usize), (2, 1), (3, 0), (3, 1), (3, 2)] {
            let target = TargetState::Comb { spacing, offset, reference: C::new(1.0, 0.0) };
            out.push((spacing, offset, evaluate_amplitude(&target, 3.0)?.purity));
        }
        Ok(out)
    };
    match run() {
        Ok(values) => {
            let ok = values.iter().all(|&(n, _, p)| match n {
                2 => within(p, 1.0 - 3.0 / 216.0, 0.005),
                _ => within(p, 1.0 - 8.0 / 216.0, 0.01),
            });
            let detail = values.iter().map(|(n, o, p)| format!("N={n} n0={o}: {p:.5}")).collect::<Vec<_>>().join(", ");
            CriterionOutcome::new(4, name, ok, format!("r^2 = 9: {detail}"), start.elapsed().as_secs_f64())
        }
        Err(e) => CriterionOutcome::failed(4, name, e),
    }
}

pub fn criterion_5() -> CriterionOutcome {
    let start = Instant::now();
    let alpha = C::new(3.0, 0.0);
    let mut worst = f64::INFINITY;
    for (spacing, offset) in [(2usize, 0usize), (2, 1), (3, 1)] {
        let n_max = default_cutoff(3.0, spacing);
        let a = comb_state_vector(spacing, offset, alpha, n_max);
        let b = comb_state_vector_circle(spacing, offset, alpha, n_max);
        worst = worst.min(overlap(&a, &b));
    }
    let ok = worst >= 1.0 - 1e-10;
    CriterionOutcome::new(
        5,
        criterion_name(5),
        ok,
        format!("min overlap = 1 - {:.2e}", 1.0 - worst),
        start.elapsed().as_secs_f64(),
    )
}

pub fn criterion_6() -> CriterionOutcome {
    let start = Instant::now();
    let (zeta, c) = maximize_gaussian_pair_coherence::<f64>();
    // ζ = Δn / (2√2 |α|) ⇒ Δn² = 8ζ²|α|²
    let spread = 8.0 * zeta * zeta;
    let ok = within(c, 0.843, 0.002);
    let detail = format!(
        "max coherence {c:.6} at zeta* = {zeta:.6}, i.e. dn^2 = {spread:.3} |alpha|^2 (stated 6.4 |alpha|^2; not asserted)"
    );
    CriterionOutcome::new(6, criterion_name(6), ok, detail, start.elapsed().as_secs_f64())
}

pub fn criterion_7(runs: &EquivalenceRuns) -> CriterionOutcome {
    let (run, min_xi) = worst_run(runs, |r| -r.min_xi);
    let min_xi = -min_xi;
    let ok = min_xi >= -1e-10;
    let detail = format!("min xi_k(n,t) = {min_xi:.3e} ({} r = {})", run.label, run.r);
    CriterionOutcome::new(7, criterion_name(7), ok, detail, 0.0)
}

pub fn criterion_8(runs: &EquivalenceRuns) -> CriterionOutcome {
    let (run, off) = worst_run(runs, |r| r.off_support);
    let ok = off < 1e-10;
    let detail = format!("max off-support magnitude = {off:.3e} ({} r = {})", run.label, run.r);
    CriterionOutcome::new(8, criterion_name(8), ok, detail, 0.0)
}

pub fn criterion_9() -> CriterionOutcome {
    let name = criterion_name(9);
    let start = Instant::now();
    let run = || -> Result<(f64, f64, String)> {
        let target = TargetState::Pair { n: 0, m: 2, phase: 0.0 };
        let p02 = evaluate_amplitude(&target, pair02_optimal_amplitude())?.purity;
        let mut highest = (f64::NEG_INFINITY, String::new());
        for (label, t) in equivalence_targets() {
            for r in [0.5, 1.0, 2.0, 3.0, 4.0] {
                let p = evaluate_amplitude(&t, r)?.purity;
                if p > highest.0 {
                    highest = (p, format!("{label} r = {r}"));
                }
            }
        }
        Ok((p02, highest.0, highest.1))
    };
    match run() {
        Ok((p02, high, at)) => {
            let ok = within(p02, 0.90, 0.01) && high < 1.0 - 1e-6;
            let detail = format!("pair(0,2) purity at r_opt = {p02:.5}; highest purity over r <= 4 = {high:.8} ({at})");
            CriterionOutcome::new(9, name, ok, detail, start.elapsed().as_secs_f64())
        }
        Err(e) => CriterionOutcome::failed(9, name, e),
    }
}

/// Ratios `residual(r²)/residual(2r²)` for the even comb.
pub fn residual_scaling(r2_values: &[f64]) -> Result<Vec<(f64, f64, f64)>> {
    let residual = |r2: f64| -> Result<f64> {
        let r = r2.sqrt();
        let n_max = default_cutoff(r, 2);
        let profile = crate::designer::profile_for_comb(2, 0, n_max)?;
        let rho0 = coherent_density_matrix(CoherentAmplitude::real(r), n_max).rho;
        purity_condition_residual(&rho0, &profile)
    };
    r2_values
        .iter()
        .map(|&r2| {
            let a = residual(r2)?;
            let b = residual(2.0 * r2)?;
            Ok((r2, a, a / b))
        })
        .collect()
}

pub fn criterion_10() -> CriterionOutcome {
    let name = criterion_name(10);
    let start = Instant::now();
    match residual_scaling(&[8.0, 16.0, 32.0, 64.0]) {
        Ok(rows) => {
            let ok = rows.iter().all(|&(_, _, ratio)| within(ratio, 2.0, 0.4));
            let detail = rows
                .iter()
                .map(|(r2, res, ratio)| format!("r^2 = {r2}: {res:.4e}, ratio {ratio:.3}"))
                .collect::<Vec<_>>()
                .join("; ");
            CriterionOutcome::new(10, name, ok, detail, start.elapsed().as_secs_f64())
        }
        Err(e) => CriterionOutcome::failed(10, name, e),
    }
}

pub const ELIMINATION_KEPT_DIM: usize = 12;
pub const ELIMINATION_LOSSY_DIM: usize = 4;

/// Elimination study at one `γ/κ`: the literal reduced generator first,
/// then two diagnostic generators sharing the same full run.
#[derive(Debug, Clone, Serialize)]
pub struct EliminationRun {
    pub ratio: f64,
    pub t_end: f64,
    pub literal: ReductionReport,
    /// Jumps `F_{n,0}` at rate `(n−1)!/γ`.
    pub second_order: ReductionReport,
    /// Jumps `F_{n,0}` at the literal rate `n!/((n+1)γ)`.
    pub swapped_literal_rate: ReductionReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct EliminationRuns {
    pub runs: Vec<EliminationRun>,
    pub seconds: f64,
}

/// `F₀₁ = κ a n̂` with its Hermitian partner, `κ = 1`.
pub fn elimination_expansion(ratio: f64) -> Result<ModeExpansion<f64>> {
    ModeExpansion::new(ELIMINATION_KEPT_DIM, ELIMINATION_LOSSY_DIM, ratio).with_coupling(0, 1, TermKind::ANhat, C::new(1.0, 0.0))
}

pub fn elimination_run(ratio: f64) -> Result<EliminationRun> {
    let kappa = 1.0;
    let expansion = elimination_expansion(ratio)?;
    let gamma = expansion.gamma;
    // three effective decay times, κ_eff = κ²/(2γ)
    let t_end = 3.0 * 2.0 * gamma / (kappa * kappa);
    let rho0 = coherent_density_matrix(CoherentAmplitude::real(1.0), ELIMINATION_KEPT_DIM - 1).rho;
    let settings = EvolutionSettings::new(gamma, t_end).with_uniform_snapshots(60).with_tolerances(1e-9, 1e-12);

    let literal = reduced_generator(&expansion)?;
    let second = second_order_generator(&expansion)?;
    let mut swapped = second.clone();
    for d in &mut swapped.dissipators {
        d.rate = factorial::<f64>(d.order) / ((d.order + 1) as f64 * gamma);
    }
    let mut reports = verify_against_all(&expansion, &[&literal, &second, &swapped], &rho0, &settings)?.into_iter();
    let mut next = || reports.next().expect("one report per generator");
    Ok(EliminationRun { ratio, t_end, literal: next(), second_order: next(), swapped_literal_rate: next() })
}

pub fn elimination_runs() -> Result<EliminationRuns> {
    let start = Instant::now();
    let runs = [10.0, 50.0].par_iter().map(|&r| elimination_run(r)).collect::<Result<Vec<_>>>()?;
    Ok(EliminationRuns { runs, seconds: start.elapsed().as_secs_f64() })
}

pub fn criterion_11(elim: &EliminationRuns) -> CriterionOutcome {
    let at = |ratio: f64| elim.runs.iter().find(|r| r.ratio == ratio).expect("ratio was run");
    let (r10, r50) = (at(10.0), at(50.0));
    let (d10, d50) = (r10.literal.max_trace_distance, r50.literal.max_trace_distance);
    let ok = d50 <= 0.05 && d50 < d10 && elim.seconds < 60.0;
    let detail = format!(
        "literal generator: max D = {d10:.4} at gamma/kappa = 10, {d50:.4} at 50; \
         F_n0 jumps at (n-1)!/gamma: {:.4}, {:.4}; F_n0 jumps at n!/((n+1)gamma): {:.4}, {:.4}",
        r10.second_order.max_trace_distance,
        r50.second_order.max_trace_distance,
        r10.swapped_literal_rate.max_trace_distance,
        r50.swapped_literal_rate.max_trace_distance,
    );
    CriterionOutcome::new(11, criterion_name(11), ok, detail, elim.seconds)
}

pub fn criterion_12(runs: &EquivalenceRuns, elim: &EliminationRuns) -> CriterionOutcome {
    let mut trace = worst_run(runs, |r| r.scaled_trace_error).1;
    let mut herm = worst_run(runs, |r| r.max_hermiticity_error).1;
    for run in &elim.runs {
        // the reports keep only the worst error, so charge it at t = 0
        for rep in [&run.literal, &run.second_order, &run.swapped_literal_rate] {
            trace = trace.max(rep.full_trace_error).max(rep.reduced_trace_error);
            herm = herm.max(rep.full_hermiticity_error).max(rep.reduced_hermiticity_error);
        }
    }
    let ok = trace <= 1e-8 && herm <= 1e-10;
    let detail = format!("max trace error / (1 + gamma t) = {trace:.2e}, max Hermiticity error = {herm:.2e}");
    CriterionOutcome::new(12, criterion_name(12), ok, detail, 0.0)
}

pub const CRITERIA: std::ops::RangeInclusive<u8> = 1..=12;

/// Every criterion in order.
pub fn run_all() -> Vec<CriterionOutcome> {
    run_selected(&CRITERIA.collect::<Vec<_>>())
}

/// The listed criteria in ascending order; shared runs are only computed
/// when a selected criterion needs them. Unknown ids are ignored.
pub fn run_selected(ids: &[u8]) -> Vec<CriterionOutcome> {
    let wants = |id: u8| ids.contains(&id);
    let runs = [3, 7, 8, 12].into_iter().any(wants).then(equivalence_runs);
    let elim = [11, 12].into_iter().any(wants).then(elimination_runs);
    let shared_failure = |id: u8, name: &'static str, e: &crate::error::Error| CriterionOutcome::failed(id, name, e);
    let mut out = Vec::new();
    for id in CRITERIA.filter(|&id| wants(id)) {
        let outcome = match (id, &runs, &elim) {
            (1, ..) => criterion_1(),
            (2, ..) => criterion_2(),
            (3, Some(Ok(r)), _) => criterion_3(r),
            (4, ..) => criterion_4(),
            (5, ..) => criterion_5(),
            (6, ..) => criterion_6(),
            (7, Some(Ok(r)), _) => criterion_7(r),
            (8, Some(Ok(r)), _) => criterion_8(r),
            (9, ..) => criterion_9(),
            (10, ..) => criterion_10(),
            (11, _, Some(Ok(el))) => criterion_11(el),
            (12, Some(Ok(r)), Some(Ok(el))) => criterion_12(r, el),
            (_, Some(Err(e)), _) if id != 11 => shared_failure(id, criterion_name(id), e),
            (_, _, Some(Err(e))) => shared_failure(id, criterion_name(id), e),
            _ => unreachable!("shared runs exist for every selected criterion"),
        };
        out.push(outcome);
    }
    out
}

pub fn criterion_name(id: u8) -> &'static str {
    match id {
        1 => "pair(0,2) optimum",
        2 => "Fock generation",
        3 => "analytic vs ODE",
        4 => "comb purity",
        5 => "comb construction identity",
        6 => "Gaussian pair maximum",
        7 => "band positivity",
        8 => "stationary support",
        9 => "stationary mixedness",
        10 => "purity-condition scaling",
        11 => "adiabatic elimination",
        12 => "conservation",
        _ => "unknown",
    }
}
