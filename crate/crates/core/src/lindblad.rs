//! Operator-form Lindblad dynamics on dense density matrices.
//!
//! ```text
//! dρ/dt = −i[H, ρ] + Σ_j κ_j (2 L_j ρ L_j† − L_j†L_j ρ − ρ L_j†L_j)
//! ```
//!
//! This is the general route: it knows nothing about Fock bands, so it is
//! used to cross-check the band integrator and to run two-mode models.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, LossProfile};
use crate::ode::{integrate, OdeFailure, StepControl};
use crate::scalar::{cre, czero, Real, C};

/// Square complex matrix stored as `(row, col, value)` triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator<T: Real = f64> {
    dim: usize,
    entries: Vec<(usize, usize, C<T>)>,
}

impl<T: Real> SparseOperator<T> {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: Vec::new() }
    }

    /// Duplicate positions are summed; exact zeros are dropped.
    pub fn from_triplets(dim: usize, triplets: impl IntoIterator<Item = (usize, usize, C<T>)>) -> Result<Self> {
        let mut dense = vec![czero(); dim * dim];
        for (i, j, v) in triplets {
            if i >= dim || j >= dim {
                return Err(Error::InvalidArgument(format!("operator entry ({i}, {j}) outside dimension {dim}")));
            }
            dense[i * dim + j] += v;
        }
        Self::from_dense(dim, &dense)
    }

    /// Row-major dense input.
    pub fn from_dense(dim: usize, data: &[C<T>]) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::InvalidArgument(format!("expected {} entries, got {}", dim * dim, data.len())));
        }
        let entries = data
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != czero())
            .map(|(idx, v)| (idx / dim, idx % dim, *v))
            .collect();
        Ok(Self { dim, entries })
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim, entries: (0..dim).map(|n| (n, n, cre(T::one()))).collect() }
    }

    /// Truncated annihilation operator, `a|n⟩ = √n |n−1⟩`.
    pub fn annihilation(dim: usize) -> Self {
        Self { dim, entries: (1..dim).map(|n| (n - 1, n, cre(T::from_index(n).sqrt()))).collect() }
    }

    pub fn number(dim: usize) -> Self {
        Self::diagonal(&(0..dim).map(T::from_index).collect::<Vec<_>>())
    }

    pub fn diagonal(values: &[T]) -> Self {
        let entries = values.iter().enumerate().filter(|(_, v)| **v != T::zero()).map(|(n, v)| (n, n, cre(*v))).collect();
        Self { dim: values.len(), entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, usize, C<T>)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn to_dense(&self) -> Vec<C<T>> {
        let mut out = vec![czero(); self.dim * self.dim];
        for &(i, j, v) in &self.entries {
            out[i * self.dim + j] += v;
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(|&(i, j, v)| (j, i, v.conj())).collect() }
    }

    pub fn scaled(&self, c: C<T>) -> Self {
        let entries = if c == czero() { Vec::new() } else { self.entries.iter().map(|&(i, j, v)| (i, j, v * c)).collect() };
        Self { dim: self.dim, entries }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Self::from_triplets(self.dim, self.entries.iter().chain(&other.entries).copied())
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let mut by_row: Vec<Vec<(usize, C<T>)>> = vec![Vec::new(); self.dim];
        for &(k, j, v) in &other.entries {
            by_row[k].push((j, v));
        }
        let products = self
            .entries
            .iter()
            .flat_map(|&(i, k, a)| by_row[k].iter().map(move |&(j, b)| (i, j, a * b)))
            .collect::<Vec<_>>();
        Self::from_triplets(self.dim, products)
    }

    /// `self ⊗ other` with index `i · dim(other) + j`.
    pub fn kron(&self, other: &Self) -> Self {
        let d2 = other.dim;
        let mut entries = Vec::with_capacity(self.nnz() * other.nnz());
        for &(i1, j1, a) in &self.entries {
            for &(i2, j2, b) in &other.entries {
                entries.push((i1 * d2 + i2, j1 * d2 + j2, a * b));
            }
        }
        Self { dim: self.dim * d2, entries }
    }

    /// Largest `|A_ij − conj(A_ji)|`.
    pub fn hermiticity_error(&self) -> T {
        let dense = self.to_dense();
        let d = self.dim;
        let mut worst = T::zero();
        for i in 0..d {
            for j in 0..d {
                worst = worst.max((dense[i * d + j] - dense[j * d + i].conj()).norm());
            }
        }
        worst
    }

    /// Maximum absolute row sum, an upper bound on the spectral radius.
    pub fn row_sum_norm(&self) -> T {
        let mut rows = vec![T::zero(); self.dim];
        for &(i, _, v) in &self.entries {
            rows[i] += v.norm();
        }
        rows.into_iter().fold(T::zero(), T::max)
    }

    /// `out += c · A ρ`.
    fn apply_left(&self, c: C<T>, rho: &[C<T>], out: &mut [C<T>]) {
        let d = self.dim;
        for &(i, k, v) in &self.entries {
            let f = v * c;
            let (src, dst) = (&rho[k * d..(k + 1) * d], &mut out[i * d..(i + 1) * d]);
            for (o, r) in dst.iter_mut().zip(src) {
                *o += f * r;
            }
        }
    }

    /// `out += c · ρ A`.
    fn apply_right(&self, c: C<T>, rho: &[C<T>], out: &mut [C<T>]) {
        let d = self.dim;
        for &(k, j, v) in &self.entries {
            let f = v * c;
            for i in 0..d {
                out[i * d + j] += rho[i * d + k] * f;
            }
        }
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::InvalidArgument(format!("operator dimensions differ: {} vs {}", self.dim, other.dim)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Channel<T: Real> {
    rate: T,
    op: SparseOperator<T>,
    op_dag: SparseOperator<T>,
    op_dag_op: SparseOperator<T>,
}

/// Hamiltonian plus weighted dissipators.
#[derive(Debug, Clone)]
pub struct LindbladGenerator<T: Real = f64> {
    dim: usize,
    hamiltonian: Option<SparseOperator<T>>,
    channels: Vec<Channel<T>>,
}

impl<T: Real> LindbladGenerator<T> {
    pub fn new(dim: usize) -> Self {
        Self { dim, hamiltonian: None, channels: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn with_hamiltonian(mut self, h: SparseOperator<T>) -> Result<Self> {
        if h.dim() != self.dim {
            return Err(Error::InvalidArgument(format!("Hamiltonian dimension {} != {}", h.dim(), self.dim)));
        }
        if h.nnz() > 0 {
            self.hamiltonian = Some(h);
        }
        Ok(self)
    }

    /// Adds `rate · (2LρL† − L†Lρ − ρL†L)`.
    pub fn add_channel(&mut self, rate: T, op: SparseOperator<T>) -> Result<()> {
        if op.dim() != self.dim {
            return Err(Error::InvalidArgument(format!("dissipator dimension {} != {}", op.dim(), self.dim)));
        }
        if !(rate >= T::zero()) || !rate.is_finite() {
            return Err(Error::InvalidArgument(format!("dissipator rate must be finite and non-negative, got {rate}")));
        }
        let op_dag = op.adjoint();
        let op_dag_op = op_dag.matmul(&op)?;
        self.channels.push(Channel { rate, op, op_dag, op_dag_op });
        Ok(())
    }

    pub fn hamiltonian(&self) -> Option<&SparseOperator<T>> {
        self.hamiltonian.as_ref()
    }

    /// `(rate, L)` for each dissipator.
    pub fn channels(&self) -> impl Iterator<Item = (T, &SparseOperator<T>)> {
        self.channels.iter().map(|c| (c.rate, &c.op))
    }

    /// Estimate of the fastest rate in the generator: `2‖H‖` plus
    /// `2κ(‖L†L‖ + ‖L‖²)` per channel, all in row-sum norm. Used to cap the
    /// step; the slack keeps the step controller clear of the stability edge.
    pub fn spectral_bound(&self) -> T {
        let h = self.hamiltonian.as_ref().map_or(T::zero(), |h| T::lit(2.0) * h.row_sum_norm());
        self.channels.iter().fold(h, |acc, c| {
            acc + T::lit(2.0) * c.rate * (c.op_dag_op.row_sum_norm() + c.op.row_sum_norm().powi(2))
        })
    }

    /// `out = 𝓛 ρ` for a row-major `dim × dim` matrix.
    pub fn apply(&self, rho: &[C<T>], out: &mut [C<T>]) {
        out.iter_mut().for_each(|z| *z = czero());
        let one = cre(T::one());
        if let Some(h) = &self.hamiltonian {
            let i = Complex::new(T::zero(), T::one());
            h.apply_left(-i, rho, out);
            h.apply_right(i, rho, out);
        }
        let mut tmp = vec![czero(); rho.len()];
        for c in &self.channels {
            let r = cre(c.rate);
            tmp.iter_mut().for_each(|z| *z = czero());
            c.op.apply_left(one, rho, &mut tmp);
            c.op_dag.apply_right(r * T::lit(2.0), &tmp, out);
            c.op_dag_op.apply_left(-r, rho, out);
            c.op_dag_op.apply_right(-r, rho, out);
        }
    }

    /// Integrates from `rho0`, returning the state at each of `times`
    /// (the first must be `0`).
    pub fn evolve(
        &self,
        rho0: &DensityMatrix<T>,
        times: &[T],
        rel_tol: T,
        abs_tol: T,
    ) -> Result<Vec<DensityMatrix<T>>> {
        if rho0.dim() != self.dim {
            return Err(Error::InvalidArgument(format!("state dimension {} != generator dimension {}", rho0.dim(), self.dim)));
        }
        if times.first() != Some(&T::zero()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("output times must start at 0 and increase strictly".into()));
        }
        let bound = self.spectral_bound();
        let control = StepControl {
            rel_tol,
            abs_tol,
            max_step: if bound > T::zero() { T::lit(3.0) / bound } else { T::infinity() },
            ..StepControl::default()
        };
        let mut states = vec![rho0.clone()];
        let mut y = rho0.entries().to_vec();
        let dim = self.dim;
        integrate(|_, y: &[C<T>], dy: &mut [C<T>]| self.apply(y, dy), T::zero(), &mut y, &times[1..], &control, |_, s| {
            states.push(DensityMatrix::from_entries(dim, s.to_vec()).expect("dimension preserved"));
        })
        .map_err(|e| match e {
            OdeFailure::Underflow { t, step, component } => Error::Stiffness {
                t: t.to_f64_lossy(),
                step: step.to_f64_lossy(),
                n: component / dim,
                k: (component % dim).abs_diff(component / dim),
            },
            OdeFailure::StepLimit(n) => Error::StepLimit(n),
        })?;
        Ok(states)
    }
}

/// `L = a f(n̂)` on a `dim`-level space, so `L|n⟩ = F(n)|n−1⟩`.
pub fn ncl_operator<T: Real>(profile: &LossProfile<T>, dim: usize) -> SparseOperator<T> {
    let entries = (1..dim).map(|n| (n - 1, n, cre(profile.big_f(n)))).filter(|e| e.2 != czero()).collect();
    SparseOperator { dim, entries }
}

/// The loss master equation as a general Lindblad generator.
pub fn ncl_generator<T: Real>(profile: &LossProfile<T>, gamma: T, dim: usize) -> Result<LindbladGenerator<T>> {
    let mut generator = LindbladGenerator::new(dim);
    generator.add_channel(gamma, ncl_operator(profile, dim))?;
    Ok(generator)
}

/// `Tr_B ρ` for `ρ` on `A ⊗ B` with `dim(B) = d2`.
pub fn partial_trace_second<T: Real>(rho: &DensityMatrix<T>, d1: usize, d2: usize) -> Result<DensityMatrix<T>> {
    if rho.dim() != d1 * d2 {
        return Err(Error::InvalidArgument(format!("state dimension {} != {d1} x {d2}", rho.dim())));
    }
    let mut out = DensityMatrix::zeros(d1);
    for i in 0..d1 {
        for j in 0..d1 {
            out[(i, j)] = (0..d2).fold(czero(), |acc, b| acc + rho[(i * d2 + b, j * d2 + b)]);
        }
    }
    Ok(out)
}

/// Population of each level of the second factor.
pub fn second_factor_populations<T: Real>(rho: &DensityMatrix<T>, d1: usize, d2: usize) -> Vec<T> {
    (0..d2).map(|b| (0..d1).fold(T::zero(), |acc, i| acc + rho[(i * d2 + b, i * d2 + b)].re)).collect()
}

/// Population of each level of the first factor.
pub fn first_factor_populations<T: Real>(rho: &DensityMatrix<T>, d1: usize, d2: usize) -> Vec<T> {
    (0..d1).map(|i| (0..d2).fold(T::zero(), |acc, b| acc + rho[(i * d2 + b, i * d2 + b)].re)).collect()
}

/// `ρ_A ⊗ ρ_B`.
pub fn product_state<T: Real>(a: &DensityMatrix<T>, b: &DensityMatrix<T>) -> DensityMatrix<T> {
    let (d1, d2) = (a.dim(), b.dim());
    let mut out = DensityMatrix::zeros(d1 * d2);
    for i1 in 0..d1 {
        for j1 in 0..d1 {
            let x = a[(i1, j1)];
            if x == czero() {
                continue;
            }
            for i2 in 0..d2 {
                for j2 in 0..d2 {
                    out[(i1 * d2 + i2, j1 * d2 + j2)] = x * b[(i2, j2)];
                }
            }
        }
    }
    out
}

/// `½‖a − b‖₁`, evaluated in double precision.
pub fn trace_distance<T: Real>(a: &DensityMatrix<T>, b: &DensityMatrix<T>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::InvalidArgument(format!("dimensions differ: {} vs {}", a.dim(), b.dim())));
    }
    let d = a.dim();
    let diff = DMatrix::from_fn(d, d, |i, j| {
        let z = a[(i, j)] - b[(i, j)];
        Complex::new(z.re.to_f64_lossy(), z.im.to_f64_lossy())
    });
    // symmetrize away round-off so the Hermitian solver sees exact symmetry
    let herm = (&diff + diff.adjoint()) * Complex::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    Ok(0.5 * eig.eigenvalues.iter().map(|x| x.abs()).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{master_equation_rhs, evolve_matrix, EvolutionSettings};
    use crate::fock::{coherent_density_matrix, CoherentAmplitude, TailRule};

    fn dense_mul(a: &[C<f64>], b: &[C<f64>], d: usize) -> Vec<C<f64>> {
        let mut out = vec![czero(); d * d];
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = (0..d).map(|k| a[i * d + k] * b[k * d + j]).sum();
            }
        }
        out
    }

    #[test]
    fn commutator_of_ladder_operators() {
        let d = 6;
        let a = SparseOperator::<f64>::annihilation(d);
        let ad = a.adjoint();
        let comm = a.matmul(&ad).unwrap().add(&ad.matmul(&a).unwrap().scaled(cre(-1.0))).unwrap();
        let dense = comm.to_dense();
        for n in 0..d - 1 {
            assert!((dense[n * d + n].re - 1.0).abs() < 1e-14);
        }
        // truncation artifact in the top level
        assert!((dense[(d - 1) * d + d - 1].re + (d as f64 - 1.0)).abs() < 1e-14);
        let n_op = ad.matmul(&a).unwrap().to_dense();
        for (x, y) in n_op.iter().zip(SparseOperator::<f64>::number(d).to_dense()) {
            assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn left_and_right_application_match_dense_products() {
        let d = 5;
        let a = SparseOperator::<f64>::annihilation(d).add(&SparseOperator::number(d).scaled(C::new(0.3, -0.7))).unwrap();
        let rho: Vec<C<f64>> = (0..d * d).map(|i| C::new(i as f64 * 0.1, (i % 3) as f64)).collect();
        let mut left = vec![czero(); d * d];
        a.apply_left(cre(1.0), &rho, &mut left);
        let mut right = vec![czero(); d * d];
        a.apply_right(cre(1.0), &rho, &mut right);
        let (dl, dr) = (dense_mul(&a.to_dense(), &rho, d), dense_mul(&rho, &a.to_dense(), d));
        for i in 0..d * d {
            assert!((left[i] - dl[i]).norm() < 1e-13);
            assert!((right[i] - dr[i]).norm() < 1e-13);
        }
    }

    #[test]
    fn kron_indexing() {
        let a = SparseOperator::<f64>::annihilation(3);
        let id = SparseOperator::<f64>::identity(2);
        let k = a.kron(&id);
        let dense = k.to_dense();
        // a ⊗ 1 maps |2,1⟩ to √2 |1,1⟩
        assert!((dense[(1 * 2 + 1) * 6 + 2 * 2 + 1].re - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn generator_matches_fock_equation() {
        let n_max = 9;
        let f: Vec<f64> = (0..=n_max).map(|n| 0.4 + 0.1 * (n as f64 - 3.0).abs()).collect();
        let profile = LossProfile::new(f, TailRule::Truncate).unwrap();
        let rho = coherent_density_matrix(CoherentAmplitude::polar(1.3, 0.4), n_max).rho;
        let generator = ncl_generator(&profile, 0.7, n_max + 1).unwrap();
        let mut out = vec![czero(); rho.entries().len()];
        generator.apply(rho.entries(), &mut out);
        let want = master_equation_rhs(&profile, 0.7, &rho);
        for (g, w) in out.iter().zip(want.entries()) {
            assert!((g - w).norm() < 1e-13);
        }
    }

    #[test]
    fn hamiltonian_rotation() {
        let d = 4;
        let h = SparseOperator::<f64>::number(d);
        let generator = LindbladGenerator::new(d).with_hamiltonian(h).unwrap();
        let psi: Vec<C<f64>> = vec![cre(0.5); 4];
        let rho0 = DensityMatrix::pure(&psi);
        let t = 0.8;
        let states = generator.evolve(&rho0, &[0.0, t], 1e-11, 1e-13).unwrap();
        for n in 0..d {
            for m in 0..d {
                let want = rho0[(n, m)] * C::from_polar(1.0, -(n as f64 - m as f64) * t);
                assert!((states[1][(n, m)] - want).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn operator_route_matches_band_route() {
        let n_max = 14;
        let ladder: Vec<f64> = (0..=n_max).map(|n| if n == 0 || n == 3 { 0.0 } else { 1.0 + 0.05 * n as f64 }).collect();
        let profile = LossProfile::from_ladder(&ladder, TailRule::Truncate).unwrap();
        let rho0 = coherent_density_matrix(CoherentAmplitude::polar(1.5, 1.1), n_max).rho;
        let generator = ncl_generator(&profile, 1.0, n_max + 1).unwrap();
        let ops = generator.evolve(&rho0, &[0.0, 0.5, 3.0], 1e-11, 1e-14).unwrap();
        let settings = EvolutionSettings::new(1.0, 3.0).with_snapshots(vec![0.5]);
        let bands = evolve_matrix(&profile, &rho0, &settings).unwrap();
        for (a, b) in ops.iter().zip(&bands.states) {
            assert!(a.max_abs_diff(b) < 1e-8);
        }
    }

    #[test]
    fn partial_trace_of_product() {
        let a = coherent_density_matrix(CoherentAmplitude::real(0.7f64), 5).rho;
        let b = DensityMatrix::<f64>::maximally_mixed(3);
        let prod = product_state(&a, &b);
        let back = partial_trace_second(&prod, 6, 3).unwrap();
        assert!(back.max_abs_diff(&a) < 1e-15);
        let pops = second_factor_populations(&prod, 6, 3);
        let total: f64 = a.trace().re;
        for p in pops {
            assert!((p - total / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn trace_distance_values() {
        let zero = DensityMatrix::<f64>::fock(3, 0).unwrap();
        let one = DensityMatrix::<f64>::fock(3, 1).unwrap();
        assert!((trace_distance(&zero, &one).unwrap() - 1.0).abs() < 1e-14);
        assert!(trace_distance(&zero, &zero).unwrap().abs() < 1e-15);
        let plus = DensityMatrix::pure(&[cre(std::f64::consts::FRAC_1_SQRT_2), cre(std::f64::consts::FRAC_1_SQRT_2), czero()]);
        // pure states: √(1 − |⟨a|b⟩|²)
        assert!((trace_distance(&zero, &plus).unwrap() - 0.5f64.sqrt()).abs() < 1e-14);
    }
}
