//! Reduced single-mode dynamics after eliminating a fast-decaying mode `b`.
//!
//! The two-mode Hamiltonian is expanded in powers of `b`,
//!
//! ```text
//! H = Σ_{m,n} F_mn ⊗ (b†)^m b^n,     F_mn = F_nm†,
//! ```
//!
//! with `b` damped by `γ(2bρb† − b†bρ − ρb†b)`. [`reduced_generator`]
//! keeps `F_00` as the Hamiltonian and emits one dissipator per `n ≥ 1`,
//! `L_n = F_{0,n}` at rate `n!/((n+1)γ)`. [`verify_reduction`] integrates
//! both models and reports their trace distance.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::EvolutionSettings;
use crate::fock::{DensityMatrix, LossProfile, TailRule};
use crate::lindblad::{
    first_factor_populations, partial_trace_second, product_state, second_factor_populations, trace_distance,
    LindbladGenerator, SparseOperator,
};
use crate::scalar::{cre, Real, C};
use crate::special::factorial;

/// Hermiticity tolerance for the reconstructed Hamiltonian.
const HERMITICITY_TOL: f64 = 1e-12;

/// Top-level population of either mode above which truncation is reported.
const TRUNCATION_WARN: f64 = 0.01;

/// Named kept-mode operators accepted in expansion terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKind {
    /// `a n̂`
    ANhat,
    /// `a`
    A,
    /// Explicit matrix supplied with the term.
    Matrix,
}

/// One contribution `coeff · op` to `F_mn`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionTerm<T: Real = f64> {
    pub m: usize,
    pub n: usize,
    pub kind: TermKind,
    pub coeff: C<T>,
    /// Row-major kept-space matrix for [`TermKind::Matrix`].
    pub matrix: Option<Vec<C<T>>>,
}

impl<T: Real> ExpansionTerm<T> {
    pub fn operator(&self, kept_dim: usize) -> Result<SparseOperator<T>> {
        let base = match self.kind {
            TermKind::A => SparseOperator::annihilation(kept_dim),
            TermKind::ANhat => SparseOperator::annihilation(kept_dim).matmul(&SparseOperator::number(kept_dim))?,
            TermKind::Matrix => {
                let data = self.matrix.as_ref().ok_or_else(|| {
                    Error::InvalidArgument(format!("term ({}, {}) of kind matrix carries no matrix", self.m, self.n))
                })?;
                SparseOperator::from_dense(kept_dim, data)?
            }
        };
        Ok(base.scaled(self.coeff))
    }
}

/// Expansion of a two-mode Hamiltonian in powers of the lossy mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeExpansion<T: Real = f64> {
    pub kept_dim: usize,
    pub lossy_dim: usize,
    pub gamma: T,
    pub terms: Vec<ExpansionTerm<T>>,
}

impl<T: Real> ModeExpansion<T> {
    pub fn new(kept_dim: usize, lossy_dim: usize, gamma: T) -> Self {
        Self { kept_dim, lossy_dim, gamma, terms: Vec::new() }
    }

    pub fn with_term(mut self, m: usize, n: usize, kind: TermKind, coeff: C<T>) -> Self {
        self.terms.push(ExpansionTerm { m, n, kind, coeff, matrix: None });
        self
    }

    pub fn with_matrix_term(mut self, m: usize, n: usize, coeff: C<T>, matrix: Vec<C<T>>) -> Self {
        self.terms.push(ExpansionTerm { m, n, kind: TermKind::Matrix, coeff, matrix: Some(matrix) });
        self
    }

    /// Adds `F_mn = coeff · op` together with its Hermitian partner `F_nm`.
    pub fn with_coupling(self, m: usize, n: usize, kind: TermKind, coeff: C<T>) -> Result<Self> {
        let op = ExpansionTerm { m, n, kind, coeff, matrix: None }.operator(self.kept_dim)?;
        let mut out = self.with_term(m, n, kind, coeff);
        if m != n {
            out = out.with_matrix_term(n, m, cre(T::one()), op.adjoint().to_dense());
        }
        Ok(out)
    }

    /// Summed `F_mn` for every index pair that appears.
    pub fn operators(&self) -> Result<BTreeMap<(usize, usize), SparseOperator<T>>> {
        let mut ops: BTreeMap<(usize, usize), SparseOperator<T>> = BTreeMap::new();
        for term in &self.terms {
            let op = term.operator(self.kept_dim)?;
            let slot = ops.entry((term.m, term.n)).or_insert_with(|| SparseOperator::zeros(self.kept_dim));
            *slot = slot.add(&op)?;
        }
        Ok(ops)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kept_dim < 2 || self.lossy_dim < 2 {
            return Err(Error::InvalidArgument(format!(
                "mode dimensions must be at least 2, got kept {} and lossy {}",
                self.kept_dim, self.lossy_dim
            )));
        }
        if !(self.gamma > T::zero()) || !self.gamma.is_finite() {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {}", self.gamma)));
        }
        let ops = self.operators()?;
        let zero = SparseOperator::zeros(self.kept_dim);
        for (&(m, n), op) in &ops {
            let partner = ops.get(&(n, m)).unwrap_or(&zero);
            let gap = op.add(&partner.adjoint().scaled(cre(-T::one())))?;
            let err = gap.entries().iter().fold(T::zero(), |acc, e| acc.max(e.2.norm()));
            if err > T::lit(HERMITICITY_TOL) {
                return Err(Error::InvalidArgument(format!(
                    "Hamiltonian is not Hermitian: F_{m}{n} differs from F_{n}{m}^dagger by {err:e}"
                )));
            }
        }
        Ok(())
    }

    /// `Σ F_mn ⊗ (b†)^m b^n` on the kept ⊗ lossy space.
    pub fn full_hamiltonian(&self) -> Result<SparseOperator<T>> {
        let b = SparseOperator::<T>::annihilation(self.lossy_dim);
        let bd = b.adjoint();
        let power = |op: &SparseOperator<T>, k: usize| -> Result<SparseOperator<T>> {
            (0..k).try_fold(SparseOperator::identity(self.lossy_dim), |acc, _| acc.matmul(op))
        };
        let mut h = SparseOperator::zeros(self.kept_dim * self.lossy_dim);
        for ((m, n), f) in self.operators()? {
            let lossy = power(&bd, m)?.matmul(&power(&b, n)?)?;
            h = h.add(&f.kron(&lossy))?;
        }
        Ok(h)
    }
}

/// One reduced dissipator `rate · 𝓛[op]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dissipator<T: Real = f64> {
    pub order: usize,
    pub rate: T,
    pub op: SparseOperator<T>,
}

/// Single-mode master equation left after elimination.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedGenerator<T: Real = f64> {
    pub hamiltonian: SparseOperator<T>,
    pub dissipators: Vec<Dissipator<T>>,
}

impl<T: Real> ReducedGenerator<T> {
    pub fn to_lindblad(&self) -> Result<LindbladGenerator<T>> {
        let mut generator = LindbladGenerator::new(self.hamiltonian.dim()).with_hamiltonian(self.hamiltonian.clone())?;
        for d in &self.dissipators {
            generator.add_channel(d.rate, d.op.clone())?;
        }
        Ok(generator)
    }

    /// Loss profile and rate equivalent to a single lowering dissipator
    /// `L|n⟩ = c_n |n−1⟩` whose entries share one phase, with no Hamiltonian.
    pub fn as_loss_profile(&self) -> Result<(LossProfile<T>, T)> {
        let not_ncl = |why: &str| Err(Error::InvalidArgument(format!("reduced generator is not a pure loss: {why}")));
        if self.hamiltonian.nnz() > 0 {
            return not_ncl("it has a Hamiltonian");
        }
        let [d] = self.dissipators.as_slice() else {
            return not_ncl("it needs exactly one dissipator");
        };
        let dim = d.op.dim();
        let mut ladder = vec![T::zero(); dim];
        let mut phase: Option<C<T>> = None;
        for &(i, j, v) in d.op.entries() {
            if j != i + 1 {
                return not_ncl("the dissipator is not a single lowering step");
            }
            let unit = v / v.norm();
            match phase {
                Some(p) if (p - unit).norm() > T::tol(1e-12) => return not_ncl("entries carry different phases"),
                _ => phase = Some(unit),
            }
            ladder[j] = v.norm();
        }
        Ok((LossProfile::from_ladder(&ladder, TailRule::Truncate)?, d.rate))
    }
}

/// Reduced generator with `L_n = F_{0,n}` at rate `n!/((n+1)γ)`.
pub fn reduced_generator<T: Real>(expansion: &ModeExpansion<T>) -> Result<ReducedGenerator<T>> {
    expansion.validate()?;
    let ops = expansion.operators()?;
    let hamiltonian = ops.get(&(0, 0)).cloned().unwrap_or_else(|| SparseOperator::zeros(expansion.kept_dim));
    let dissipators = ops
        .iter()
        .filter(|(&(m, n), op)| m == 0 && n >= 1 && op.nnz() > 0)
        .map(|(&(_, n), op)| Dissipator {
            order: n,
            rate: factorial::<T>(n) / (T::from_index(n + 1) * expansion.gamma),
            op: op.clone(),
        })
        .collect();
    Ok(ReducedGenerator { hamiltonian, dissipators })
}

/// Second-order elimination of the same expansion: the `b` mode is driven
/// out of vacuum only by `F_{n,0}(b†)^n`, so the jumps are `L_n = F_{n,0}`,
/// and the flux out of `|n⟩_b` gives the rate `(n−1)!/γ`.
pub fn second_order_generator<T: Real>(expansion: &ModeExpansion<T>) -> Result<ReducedGenerator<T>> {
    expansion.validate()?;
    let ops = expansion.operators()?;
    let hamiltonian = ops.get(&(0, 0)).cloned().unwrap_or_else(|| SparseOperator::zeros(expansion.kept_dim));
    let dissipators = ops
        .iter()
        .filter(|(&(m, n), op)| n == 0 && m >= 1 && op.nnz() > 0)
        .map(|(&(m, _), op)| Dissipator { order: m, rate: factorial::<T>(m - 1) / expansion.gamma, op: op.clone() })
        .collect();
    Ok(ReducedGenerator { hamiltonian, dissipators })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionReport {
    pub times: Vec<f64>,
    pub trace_distance: Vec<f64>,
    pub max_trace_distance: f64,
    /// Largest `|Tr ρ(t) − Tr ρ(0)|` along the full and reduced runs.
    pub full_trace_error: f64,
    pub reduced_trace_error: f64,
    pub full_hermiticity_error: f64,
    pub reduced_hermiticity_error: f64,
    /// Largest population in the top level of each mode.
    pub max_lossy_top_population: f64,
    pub max_kept_top_population: f64,
    /// `γ / max|F_mn|` over coupling terms (`m + n > 0`), in row-sum norm.
    pub coupling_ratio: f64,
    pub warnings: Vec<String>,
}

/// Compares the full two-mode run (traced over `b`) with the literal
/// [`reduced_generator`], both started from `rho0 ⊗ |0⟩⟨0|`.
///
/// `settings` supplies the end time, snapshots and tolerances; the decay
/// rate comes from the expansion.
pub fn verify_reduction<T: Real>(
    expansion: &ModeExpansion<T>,
    rho0: &DensityMatrix<T>,
    settings: &EvolutionSettings<T>,
) -> Result<ReductionReport> {
    let reduced = reduced_generator(expansion)?;
    verify_against(expansion, &reduced, rho0, settings)
}

/// [`verify_reduction`] against an arbitrary reduced generator.
pub fn verify_against<T: Real>(
    expansion: &ModeExpansion<T>,
    reduced: &ReducedGenerator<T>,
    rho0: &DensityMatrix<T>,
    settings: &EvolutionSettings<T>,
) -> Result<ReductionReport> {
    Ok(verify_against_all(expansion, &[reduced], rho0, settings)?.remove(0))
}

/// Integrates the full model once and compares it with each reduced
/// generator in turn.
pub fn verify_against_all<T: Real>(
    expansion: &ModeExpansion<T>,
    reduced: &[&ReducedGenerator<T>],
    rho0: &DensityMatrix<T>,
    settings: &EvolutionSettings<T>,
) -> Result<Vec<ReductionReport>> {
    expansion.validate()?;
    settings.validate()?;
    rho0.validate()?;
    let (d1, d2) = (expansion.kept_dim, expansion.lossy_dim);
    if rho0.dim() != d1 {
        return Err(Error::InvalidArgument(format!("initial state dimension {} != kept_dim {d1}", rho0.dim())));
    }
    let times = settings.output_times();

    let mut full = LindbladGenerator::new(d1 * d2).with_hamiltonian(expansion.full_hamiltonian()?)?;
    let b_full = SparseOperator::identity(d1).kron(&SparseOperator::annihilation(d2));
    full.add_channel(expansion.gamma, b_full)?;
    let vacuum = DensityMatrix::vacuum(d2);
    let full_states = full.evolve(&product_state(rho0, &vacuum), &times, settings.rel_tol, settings.abs_tol)?;
    let trace0 = rho0.trace().re.to_f64_lossy();

    let mut kept_states = Vec::with_capacity(full_states.len());
    let (mut full_trace_error, mut full_hermiticity_error) = (0.0f64, 0.0f64);
    let (mut lossy_top, mut full_kept_top) = (0.0f64, 0.0f64);
    for f in &full_states {
        kept_states.push(partial_trace_second(f, d1, d2)?);
        full_trace_error = full_trace_error.max((f.trace().re.to_f64_lossy() - trace0).abs());
        full_hermiticity_error = full_hermiticity_error.max(f.hermiticity_error().to_f64_lossy());
        lossy_top = lossy_top.max(second_factor_populations(f, d1, d2)[d2 - 1].to_f64_lossy());
        full_kept_top = full_kept_top.max(first_factor_populations(f, d1, d2)[d1 - 1].to_f64_lossy());
    }
    let ratio = coupling_ratio(expansion)?;

    reduced
        .iter()
        .map(|generator| {
            let reduced_states = generator.to_lindblad()?.evolve(rho0, &times, settings.rel_tol, settings.abs_tol)?;
            let mut report = ReductionReport {
                times: times.iter().map(|t| t.to_f64_lossy()).collect(),
                trace_distance: Vec::with_capacity(times.len()),
                max_trace_distance: 0.0,
                full_trace_error,
                reduced_trace_error: 0.0,
                full_hermiticity_error,
                reduced_hermiticity_error: 0.0,
                max_lossy_top_population: lossy_top,
                max_kept_top_population: full_kept_top,
                coupling_ratio: ratio,
                warnings: Vec::new(),
            };
            for (kept, r) in kept_states.iter().zip(&reduced_states) {
                let dist = trace_distance(kept, r)?;
                report.trace_distance.push(dist);
                report.max_trace_distance = report.max_trace_distance.max(dist);
                report.reduced_trace_error = report.reduced_trace_error.max((r.trace().re.to_f64_lossy() - trace0).abs());
                report.reduced_hermiticity_error = report.reduced_hermiticity_error.max(r.hermiticity_error().to_f64_lossy());
                report.max_kept_top_population = report.max_kept_top_population.max(r[(d1 - 1, d1 - 1)].re.to_f64_lossy());
            }
            if report.max_lossy_top_population > TRUNCATION_WARN {
                report.warnings.push(format!(
                    "lossy mode reaches {:.3e} population in its top level {}; raise lossy_dim",
                    report.max_lossy_top_population,
                    d2 - 1
                ));
            }
            if report.max_kept_top_population > TRUNCATION_WARN {
                report.warnings.push(format!(
                    "kept mode reaches {:.3e} population in its top level {}; raise kept_dim",
                    report.max_kept_top_population,
                    d1 - 1
                ));
            }
            for w in &report.warnings {
                log::warn!("{w}");
            }
            Ok(report)
        })
        .collect()
}

fn coupling_ratio<T: Real>(expansion: &ModeExpansion<T>) -> Result<f64> {
    let strongest = expansion
        .operators()?
        .iter()
        .filter(|(&(m, n), _)| m + n > 0)
        .fold(T::zero(), |acc, (_, op)| acc.max(op.row_sum_norm()));
    Ok(if strongest > T::zero() { (expansion.gamma / strongest).to_f64_lossy() } else { f64::INFINITY })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_density_matrix, CoherentAmplitude};
    use crate::scalar::czero;
    use crate::stationary::stationary_matrix;

    fn nonlinear(kept: usize, gamma: f64, kappa: f64) -> ModeExpansion<f64> {
        ModeExpansion::new(kept, 4, gamma).with_coupling(0, 1, TermKind::ANhat, cre(kappa)).unwrap()
    }

    #[test]
    fn literal_rates() {
        let gamma = 3.0;
        let expansion = ModeExpansion::new(5, 4, gamma)
            .with_coupling(0, 1, TermKind::A, cre(0.2))
            .unwrap()
            .with_coupling(0, 2, TermKind::A, cre(0.1))
            .unwrap()
            .with_coupling(0, 3, TermKind::ANhat, cre(0.1))
            .unwrap();
        let reduced = reduced_generator(&expansion).unwrap();
        let rates: Vec<(usize, f64)> = reduced.dissipators.iter().map(|d| (d.order, d.rate)).collect();
        assert_eq!(rates.len(), 3);
        assert!((rates[0].1 - 1.0 / (2.0 * gamma)).abs() < 1e-16);
        assert!((rates[1].1 - 2.0 / (3.0 * gamma)).abs() < 1e-16);
        assert!((rates[2].1 - 6.0 / (4.0 * gamma)).abs() < 1e-15);
    }

    #[test]
    fn literal_operator_is_f01() {
        let reduced = reduced_generator(&nonlinear(6, 10.0, 0.5)).unwrap();
        let want = SparseOperator::<f64>::annihilation(6).matmul(&SparseOperator::number(6)).unwrap().scaled(cre(0.5));
        assert_eq!(reduced.dissipators[0].op.to_dense(), want.to_dense());
        assert_eq!(reduced.hamiltonian.nnz(), 0);
    }

    #[test]
    fn linear_coupling_reduces_to_linear_loss() {
        let reduced = reduced_generator(&ModeExpansion::new(6, 3, 2.0f64).with_coupling(0, 1, TermKind::A, cre(0.4)).unwrap()).unwrap();
        let (profile, rate) = reduced.as_loss_profile().unwrap();
        for n in 1..6 {
            assert!((profile.f(n) - 0.4).abs() < 1e-15);
        }
        assert!((rate - 0.25).abs() < 1e-16);
    }

    #[test]
    fn rejects_non_hermitian() {
        let one_sided = ModeExpansion::new(4, 3, 1.0).with_term(0, 1, TermKind::A, cre(0.3));
        assert!(reduced_generator(&one_sided).is_err());
        let bad_diag = ModeExpansion::new(4, 3, 1.0).with_term(0, 0, TermKind::A, cre(0.3));
        assert!(bad_diag.validate().is_err());
        let hermitian = ModeExpansion::new(4, 3, 1.0).with_coupling(1, 1, TermKind::A, cre(0.3)).unwrap();
        assert!(hermitian.validate().is_err());
    }

    #[test]
    fn full_hamiltonian_is_hermitian() {
        let h = nonlinear(5, 10.0, 0.7).full_hamiltonian().unwrap();
        assert!(h.hermiticity_error() < 1e-15);
        assert_eq!(h.dim(), 20);
    }

    #[test]
    fn zero_hamiltonian_gives_zero_distance() {
        let expansion = ModeExpansion::<f64>::new(5, 3, 4.0);
        let rho0 = coherent_density_matrix(CoherentAmplitude::real(0.8), 4).rho;
        let settings = EvolutionSettings::new(4.0, 2.0).with_uniform_snapshots(4);
        let report = verify_reduction(&expansion, &rho0, &settings).unwrap();
        assert!(report.max_trace_distance < 1e-14);
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn second_order_matches_beam_splitter() {
        // H = g(a b† + a† b): F_10 = g a, decay rate of a is g²/γ
        let (g, gamma) = (0.2f64, 10.0f64);
        let expansion = ModeExpansion::new(6, 3, gamma).with_coupling(1, 0, TermKind::A, cre(g)).unwrap();
        let reduced = second_order_generator(&expansion).unwrap();
        assert!((reduced.dissipators[0].rate - 1.0 / gamma).abs() < 1e-16);
        let rho0 = coherent_density_matrix(CoherentAmplitude::real(1.0), 5).rho;
        let t_end = 2.0 * gamma / (g * g);
        let settings = EvolutionSettings::new(gamma, t_end).with_uniform_snapshots(10);
        let report = verify_against(&expansion, &reduced, &rho0, &settings).unwrap();
        assert!(report.max_trace_distance < 0.01, "distance {}", report.max_trace_distance);
        assert!(report.full_trace_error < 1e-8);
    }

    #[test]
    fn reduced_stationary_state_matches_solver() {
        // F_01 = κ a(n̂ − 1): the reduced dissipator is a lowering ladder with a zero at n = 1
        let (kept, kappa) = (10, 0.6);
        let shifted = SparseOperator::<f64>::annihilation(kept)
            .matmul(&SparseOperator::number(kept).add(&SparseOperator::identity(kept).scaled(cre(-1.0))).unwrap())
            .unwrap();
        let expansion = ModeExpansion::new(kept, 3, 20.0)
            .with_matrix_term(0, 1, cre(kappa), shifted.to_dense())
            .with_matrix_term(1, 0, cre(kappa), shifted.adjoint().to_dense());
        let reduced = reduced_generator(&expansion).unwrap();
        let (profile, rate) = reduced.as_loss_profile().unwrap();
        assert!(profile.is_dark(1) && profile.is_dark(0));
        let rho0 = coherent_density_matrix(CoherentAmplitude::polar(0.9, 0.3), kept - 1).rho;
        let slowest = (2..kept).map(|n| profile.big_f(n).powi(2)).fold(f64::INFINITY, f64::min) * rate;
        let t_end = 60.0 / slowest;
        let states = reduced.to_lindblad().unwrap().evolve(&rho0, &[0.0, t_end], 1e-11, 1e-14).unwrap();
        let exact = stationary_matrix(&profile, &rho0).unwrap().rho;
        assert!(states[1].max_abs_diff(&exact) < 1e-8, "diff {}", states[1].max_abs_diff(&exact));
        assert!(exact[(0, 1)] != czero());
    }
}
