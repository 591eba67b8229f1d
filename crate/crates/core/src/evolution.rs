//! Time integration of the nonlinear-coherent-loss master equation.
//!
//! In the Fock basis the generator couples `ρ_nm` only to `ρ_{n+1,m+1}`:
//!
//! ```text
//! dρ_nm/dt = 2γ F(n+1) F(m+1) ρ_{n+1,m+1} − γ (F²(n) + F²(m)) ρ_nm
//! ```
//!
//! so each diagonal `k = m − n` evolves on its own. Bands are integrated
//! independently (in parallel) and reassembled at the snapshot times.
//! Elements beyond the cutoff are held at zero.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{bands_from_matrix, matrix_from_bands, DensityMatrix, DiagonalBand, LossProfile};
use crate::ode::{integrate, OdeFailure, StepControl};
use crate::scalar::{czero, Real, C};

/// DOPRI5 is stable on the negative real axis up to |hλ| ≈ 3.3.
const STABILITY_LIMIT: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionSettings<T: Real = f64> {
    pub gamma: T,
    pub t_end: T,
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_step: T,
    /// Extra output times in `[0, t_end]`; `0` and `t_end` are always recorded.
    pub snapshot_times: Vec<T>,
    /// Phase θ of the band scales `c_k = e^{-ikθ}` used for diagnostics.
    pub reference_phase: T,
    pub max_steps: usize,
}

impl<T: Real> EvolutionSettings<T> {
    pub fn new(gamma: T, t_end: T) -> Self {
        Self {
            gamma,
            t_end,
            rel_tol: T::lit(1e-10),
            abs_tol: T::tol(1e-14),
            max_step: T::infinity(),
            snapshot_times: Vec::new(),
            reference_phase: T::zero(),
            max_steps: 5_000_000,
        }
    }

    pub fn with_snapshots(mut self, times: Vec<T>) -> Self {
        self.snapshot_times = times;
        self
    }

    /// `count` evenly spaced snapshots on `(0, t_end]`.
    pub fn with_uniform_snapshots(mut self, count: usize) -> Self {
        // the last point is t_end itself; t_end·n/n can round past it
        self.snapshot_times = (1..=count)
            .map(|i| if i == count { self.t_end } else { self.t_end * T::from_index(i) / T::from_index(count) })
            .collect();
        self
    }

    pub fn with_tolerances(mut self, rel_tol: T, abs_tol: T) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_reference_phase(mut self, phase: T) -> Self {
        self.reference_phase = phase;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.gamma > T::zero() && self.gamma.is_finite()) {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.t_end >= T::zero() && self.t_end.is_finite()) {
            return bad(format!("t_end must be non-negative, got {}", self.t_end));
        }
        let tol_ok = |x: T| x > T::zero() && x <= T::lit(1e-2);
        if !tol_ok(self.rel_tol) || !tol_ok(self.abs_tol) {
            return bad(format!("tolerances must lie in (0, 1e-2], got rel {} abs {}", self.rel_tol, self.abs_tol));
        }
        if !(self.max_step > T::zero()) {
            return bad("max_step must be positive".into());
        }
        if self.snapshot_times.windows(2).any(|w| w[1] < w[0]) {
            return bad("snapshot times must be sorted".into());
        }
        if self.snapshot_times.iter().any(|&t| t < T::zero() || t > self.t_end) {
            return bad("snapshot times must lie in [0, t_end]".into());
        }
        Ok(())
    }

    /// Strictly increasing output grid: 0, requested snapshots, `t_end`.
    pub fn output_times(&self) -> Vec<T> {
        let mut times = vec![T::zero()];
        for &t in self.snapshot_times.iter().chain(std::iter::once(&self.t_end)) {
            if t > *times.last().unwrap() {
                times.push(t);
            }
        }
        times
    }

    fn control(&self, spectral_bound: T) -> StepControl<T> {
        let mut max_step = self.max_step;
        if spectral_bound > T::zero() {
            max_step = max_step.min(T::lit(STABILITY_LIMIT) / spectral_bound);
        }
        StepControl { rel_tol: self.rel_tol, abs_tol: self.abs_tol, max_step, max_steps: self.max_steps }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diagnostics<T: Real = f64> {
    /// `|Tr ρ(t) − Tr ρ(0)|`; zero for off-diagonal bands.
    pub trace_error: T,
    /// Smallest `Re ξ_k(n, t)` over the bands present.
    pub min_band_value: T,
    pub hermiticity_error: T,
}

#[derive(Debug, Clone)]
pub struct Trajectory<T: Real, S> {
    pub times: Vec<T>,
    pub states: Vec<S>,
    pub diagnostics: Vec<Diagnostics<T>>,
}

impl<T: Real, S> Trajectory<T, S> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&S> {
        self.states.last()
    }

    pub fn max_trace_error(&self) -> T {
        self.diagnostics.iter().fold(T::zero(), |acc, d| acc.max(d.trace_error))
    }

    pub fn max_hermiticity_error(&self) -> T {
        self.diagnostics.iter().fold(T::zero(), |acc, d| acc.max(d.hermiticity_error))
    }

    pub fn min_band_value(&self) -> T {
        self.diagnostics.iter().fold(T::infinity(), |acc, d| acc.min(d.min_band_value))
    }
}

pub type BandTrajectory<T = f64> = Trajectory<T, DiagonalBand<T>>;
pub type MatrixTrajectory<T = f64> = Trajectory<T, DensityMatrix<T>>;

fn band_trace<T: Real>(band: &DiagonalBand<T>) -> T {
    if band.offset != 0 {
        return T::zero();
    }
    band.values.iter().fold(T::zero(), |acc, v| acc + (band.scale * *v).re)
}

/// Integrates one diagonal band.
pub fn evolve_band<T: Real>(
    profile: &LossProfile<T>,
    band: &DiagonalBand<T>,
    settings: &EvolutionSettings<T>,
) -> Result<BandTrajectory<T>> {
    settings.validate()?;
    if band.is_empty() {
        return Err(Error::InvalidArgument("band must hold at least one element".into()));
    }
    let k = band.offset;
    let len = band.len();
    let gamma = settings.gamma;
    let two = T::lit(2.0);
    // feed[n] couples ξ(n+1) into ξ(n); the last element has nothing above it.
    let feed: Vec<T> = (0..len)
        .map(|n| if n + 1 < len { two * gamma * profile.big_f(n + 1) * profile.big_f(n + k + 1) } else { T::zero() })
        .collect();
    let decay: Vec<T> = (0..len).map(|n| gamma * profile.band_rate(k, n)).collect();
    let bound = decay.iter().fold(T::zero(), |acc, &d| acc.max(d));

    let times = settings.output_times();
    let initial_trace = band_trace(band);
    let snapshot = |values: &[C<T>]| {
        let state = DiagonalBand { offset: k, scale: band.scale, values: values.to_vec() };
        let diag = Diagnostics {
            trace_error: (band_trace(&state) - initial_trace).abs(),
            min_band_value: state.min_real(),
            hermiticity_error: T::zero(),
        };
        (state, diag)
    };

    let mut out = Trajectory { times: times.clone(), states: Vec::with_capacity(times.len()), diagnostics: Vec::new() };
    let (s0, d0) = snapshot(&band.values);
    out.states.push(s0);
    out.diagnostics.push(d0);

    let mut y = band.values.clone();
    if bound == T::zero() || band.values.iter().all(|v| *v == czero()) {
        for _ in 1..times.len() {
            let (s, d) = snapshot(&y);
            out.states.push(s);
            out.diagnostics.push(d);
        }
        return Ok(out);
    }

    let rhs = |_t: T, y: &[C<T>], dy: &mut [C<T>]| {
        for n in 0..len {
            let up = if n + 1 < len { y[n + 1] * feed[n] } else { czero() };
            dy[n] = up - y[n] * decay[n];
        }
    };
    integrate(rhs, T::zero(), &mut y, &times[1..], &settings.control(bound), |_, state| {
        let (s, d) = snapshot(state);
        out.states.push(s);
        out.diagnostics.push(d);
    })
    .map_err(|e| ode_error(e, k))?;
    Ok(out)
}

fn ode_error<T: Real>(failure: OdeFailure<T>, k: usize) -> Error {
    match failure {
        OdeFailure::Underflow { t, step, component } => {
            Error::Stiffness { t: t.to_f64_lossy(), step: step.to_f64_lossy(), n: component, k }
        }
        OdeFailure::StepLimit(steps) => Error::StepLimit(steps),
    }
}

/// Integrates a whole density matrix by splitting it into bands,
/// evolving them concurrently and reassembling at every output time.
pub fn evolve_matrix<T: Real>(
    profile: &LossProfile<T>,
    rho0: &DensityMatrix<T>,
    settings: &EvolutionSettings<T>,
) -> Result<MatrixTrajectory<T>> {
    settings.validate()?;
    rho0.validate()?;
    let dim = rho0.dim();
    let bands = bands_from_matrix(rho0, settings.reference_phase)?;
    let evolved: Vec<BandTrajectory<T>> =
        bands.par_iter().map(|band| evolve_band(profile, band, settings)).collect::<Result<_>>()?;

    let times = settings.output_times();
    let trace0 = rho0.trace().re;
    let mut out = Trajectory { times: times.clone(), states: Vec::new(), diagnostics: Vec::new() };
    for i in 0..times.len() {
        let at: Vec<DiagonalBand<T>> = evolved.iter().map(|traj| traj.states[i].clone()).collect();
        let rho = matrix_from_bands(&at, dim)?;
        let min_band_value = at.iter().fold(T::infinity(), |acc, b| acc.min(b.min_real()));
        out.diagnostics.push(Diagnostics {
            trace_error: (rho.trace().re - trace0).abs(),
            min_band_value,
            hermiticity_error: rho.hermiticity_error(),
        });
        out.states.push(rho);
    }
    Ok(out)
}

/// `dρ/dt` of the master equation, element by element.
pub fn master_equation_rhs<T: Real>(profile: &LossProfile<T>, gamma: T, rho: &DensityMatrix<T>) -> DensityMatrix<T> {
    let dim = rho.dim();
    let two = T::lit(2.0);
    let mut out = DensityMatrix::zeros(dim);
    for n in 0..dim {
        for m in 0..dim {
            let up = if n + 1 < dim && m + 1 < dim {
                rho[(n + 1, m + 1)] * (two * gamma * profile.big_f(n + 1) * profile.big_f(m + 1))
            } else {
                czero()
            };
            let fn_ = profile.big_f(n);
            let fm = profile.big_f(m);
            out[(n, m)] = up - rho[(n, m)] * (gamma * (fn_ * fn_ + fm * fm));
        }
    }
    out
}

/// `max |dρ/dt|` over all elements.
pub fn stationarity_residual<T: Real>(profile: &LossProfile<T>, gamma: T, rho: &DensityMatrix<T>) -> T {
    master_equation_rhs(profile, gamma, rho).entries().iter().fold(T::zero(), |acc, z| acc.max(z.norm()))
}

/// Stationarity rule for convenience runs: `max |dρ/dt| < 1e-12 γ`.
pub fn is_stationary<T: Real>(profile: &LossProfile<T>, gamma: T, rho: &DensityMatrix<T>) -> bool {
    stationarity_residual(profile, gamma, rho) < T::tol(1e-12) * gamma
}

/// Integrates in chunks of `settings.t_end` until [`is_stationary`] holds
/// or `max_chunks` chunks have elapsed. Returns the final time and state.
pub fn evolve_until_stationary<T: Real>(
    profile: &LossProfile<T>,
    rho0: &DensityMatrix<T>,
    settings: &EvolutionSettings<T>,
    max_chunks: usize,
) -> Result<(T, DensityMatrix<T>, bool)> {
    let chunk = EvolutionSettings { snapshot_times: Vec::new(), ..settings.clone() };
    let mut rho = rho0.clone();
    let mut t = T::zero();
    for _ in 0..max_chunks {
        if is_stationary(profile, settings.gamma, &rho) {
            return Ok((t, rho, true));
        }
        let traj = evolve_matrix(profile, &rho, &chunk)?;
        rho = traj.states.into_iter().last().expect("trajectory has a final state");
        t += chunk.t_end;
    }
    let done = is_stationary(profile, settings.gamma, &rho);
    Ok((t, rho, done))
}

/// Weighted segment sum `Σ_{m=n1}^{n2−1} ξ_k(m,t) Π_{j=n1+1}^{m} T_k(j)` at
/// each snapshot. Its time derivative is the boundary flux at `n2`, so it is
/// constant when `n2` blocks the flow.
pub fn segment_invariant<T: Real>(
    trajectory: &BandTrajectory<T>,
    profile: &LossProfile<T>,
    n1: usize,
    n2: usize,
) -> Result<Vec<C<T>>> {
    let first = trajectory.states.first().ok_or_else(|| Error::InvalidArgument("empty trajectory".into()))?;
    let k = first.offset;
    if !(profile.is_dark(n1) && profile.is_dark(n1 + k)) {
        return Err(Error::InvalidArgument(format!("({n1}, {k}) is not an accumulator: F({n1}) or F({}) is nonzero", n1 + k)));
    }
    if n2 <= n1 {
        return Err(Error::InvalidArgument(format!("segment end {n2} must exceed start {n1}")));
    }
    let end = n2.min(first.len());
    let mut weights = Vec::with_capacity(end.saturating_sub(n1));
    let mut w = T::one();
    for m in n1..end {
        if m > n1 {
            w *= profile.transmittance(k, m);
        }
        weights.push(w);
    }
    Ok(trajectory
        .states
        .iter()
        .map(|band| (n1..end).zip(&weights).fold(czero(), |acc, (m, &w)| acc + band.values[m] * w))
        .collect())
}
