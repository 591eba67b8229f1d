//! Fock-basis primitives: loss profiles, density matrices, diagonal bands,
//! coherent states and target states.
//!
//! The nonlinear coherent loss is generated by the Lindblad operator
//! `L = a f(n̂)`. Every quantity downstream depends on `f` only through the
//! ladder amplitude `F(n) = √n · f(n)`, which vanishes at `n = 0` for any
//! profile.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cis, cre, czero, Real, C};
use crate::special::ln_factorial;

/// How `f(n)` continues beyond the stored table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailRule {
    /// `f(n) = 0` for `n > n_max`.
    Truncate,
    /// `f(n) = f(n_max)` for `n > n_max`.
    HoldLast,
    /// `F(n + N) = F(n)` for `n ≥ 1`.
    Periodic(usize),
}

/// Tabulated loss function `f(n)`, `n = 0..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossProfile<T: Real = f64> {
    f: Vec<T>,
    big_f: Vec<T>,
    tail: TailRule,
}

impl<T: Real> LossProfile<T> {
    pub fn new(f: Vec<T>, tail: TailRule) -> Result<Self> {
        if f.is_empty() {
            return Err(Error::InvalidProfile("empty f table".into()));
        }
        if let Some((n, v)) = f.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= T::zero())) {
            return Err(Error::InvalidProfile(format!("f({n}) = {v} is not a non-negative finite value")));
        }
        let big_f: Vec<T> = f
            .iter()
            .enumerate()
            .map(|(n, &v)| if n == 0 { T::zero() } else { T::from_index(n).sqrt() * v })
            .collect();
        let profile = Self { f, big_f, tail };
        if let TailRule::Periodic(period) = tail {
            profile.check_periodic(period)?;
        }
        Ok(profile)
    }

    /// Builds a profile from ladder amplitudes `F(n)`; `F(0)` is ignored.
    pub fn from_ladder(big_f: &[T], tail: TailRule) -> Result<Self> {
        if big_f.is_empty() {
            return Err(Error::InvalidProfile("empty F table".into()));
        }
        let f = big_f
            .iter()
            .enumerate()
            .map(|(n, &v)| {
                if n == 0 {
                    T::one()
                } else {
                    v / T::from_index(n).sqrt()
                }
            })
            .collect();
        Self::new(f, tail)
    }

    /// `f ≡ value` on `0..=n_max`, held beyond.
    pub fn constant(n_max: usize, value: T) -> Result<Self> {
        Self::new(vec![value; n_max + 1], TailRule::HoldLast)
    }

    fn check_periodic(&self, period: usize) -> Result<()> {
        if period == 0 {
            return Err(Error::InvalidProfile("periodic tail needs period >= 1".into()));
        }
        if self.n_max() < period {
            return Err(Error::InvalidProfile(format!(
                "periodic tail with period {period} needs n_max >= period (n_max = {})",
                self.n_max()
            )));
        }
        let tol = T::tol(1e-12);
        for n in 1..=self.n_max() - period {
            let (a, b) = (self.big_f[n], self.big_f[n + period]);
            let zero_mismatch = (a == T::zero()) != (b == T::zero());
            if zero_mismatch || (a - b).abs() > tol * a.max(b).max(T::one()) {
                return Err(Error::InvalidProfile(format!(
                    "table is not periodic with period {period}: F({n}) = {a}, F({}) = {b}",
                    n + period
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn n_max(&self) -> usize {
        self.f.len() - 1
    }

    #[inline]
    pub fn tail(&self) -> TailRule {
        self.tail
    }

    pub fn f_values(&self) -> &[T] {
        &self.f
    }

    /// Ladder amplitudes `F(0..=n_max)`.
    pub fn ladder(&self) -> &[T] {
        &self.big_f
    }

    /// `f(n)` with the tail rule applied.
    pub fn f(&self, n: usize) -> T {
        if n <= self.n_max() {
            return self.f[n];
        }
        match self.tail {
            TailRule::Truncate => T::zero(),
            TailRule::HoldLast => self.f[self.n_max()],
            TailRule::Periodic(_) => self.big_f(n) / T::from_index(n).sqrt(),
        }
    }

    /// `F(n) = √n f(n)`; `F(0) = 0` for every profile.
    pub fn big_f(&self, n: usize) -> T {
        if n <= self.n_max() {
            return self.big_f[n];
        }
        match self.tail {
            TailRule::Truncate => T::zero(),
            TailRule::HoldLast => T::from_index(n).sqrt() * self.f[self.n_max()],
            TailRule::Periodic(period) => {
                let excess = n - self.n_max();
                let shift = excess.div_ceil(period) * period;
                self.big_f[n - shift]
            }
        }
    }

    /// Exact zero test on `F`, used for support detection.
    #[inline]
    pub fn is_dark(&self, n: usize) -> bool {
        self.big_f(n) == T::zero()
    }

    /// Positions `n ≤ n_max` with `F(n) = 0`, always starting with 0.
    pub fn zeros(&self) -> Vec<usize> {
        (0..=self.n_max()).filter(|&n| self.big_f[n] == T::zero()).collect()
    }

    /// `T_k(n) = 2F(n)F(n+k) / (F²(n) + F²(n+k))`, with `0/0 := 0`.
    pub fn transmittance(&self, k: usize, n: usize) -> T {
        let a = self.big_f(n);
        if k == 0 {
            return if a > T::zero() { T::one() } else { T::zero() };
        }
        let b = self.big_f(n + k);
        let den = a * a + b * b;
        if den == T::zero() {
            T::zero()
        } else {
            (T::lit(2.0) * a * b / den).min(T::one())
        }
    }

    /// `Φ_k(n) = F²(n) + F²(n+k)`, the decay rate of `ξ_k(n)` in units of γ.
    #[inline]
    pub fn band_rate(&self, k: usize, n: usize) -> T {
        let a = self.big_f(n);
        let b = self.big_f(n + k);
        a * a + b * b
    }

    /// Same profile with every `f` value multiplied by `c > 0`.
    pub fn scaled(&self, c: T) -> Result<Self> {
        if !(c > T::zero()) {
            return Err(Error::InvalidArgument("scale must be positive".into()));
        }
        Self::new(self.f.iter().map(|&v| v * c).collect(), self.tail)
    }

    /// Restricts or extends the table to a new cutoff using the tail rule.
    pub fn resized(&self, n_max: usize) -> Result<Self> {
        let f = (0..=n_max).map(|n| self.f(n)).collect();
        match self.tail {
            TailRule::Periodic(p) if n_max < p => Self::new(f, TailRule::HoldLast),
            tail => Self::new(f, tail),
        }
    }

    /// Largest band rate over the table; bounds the generator's spectrum.
    pub fn max_rate(&self) -> T {
        let m = self.big_f.iter().fold(T::zero(), |acc, &v| acc.max(v));
        T::lit(2.0) * m * m
    }
}

/// `F(n)` for a profile.
#[inline]
pub fn big_f<T: Real>(profile: &LossProfile<T>, n: usize) -> T {
    profile.big_f(n)
}

/// Transmittance `T_k(n)` of a profile.
#[inline]
pub fn transmittance<T: Real>(profile: &LossProfile<T>, k: usize, n: usize) -> T {
    profile.transmittance(k, n)
}

/// Coherent-state amplitude `q_m(r) = r^m e^{-r²/2} / √(m!)`, evaluated in
/// the log domain.
pub fn coherent_weight<T: Real>(m: usize, r: T) -> T {
    if r == T::zero() {
        return if m == 0 { T::one() } else { T::zero() };
    }
    let ln_q = T::from_index(m) * r.ln() - r * r * T::lit(0.5) - T::lit(0.5) * ln_factorial::<T>(m);
    ln_q.exp()
}

/// Complex amplitude of an initial coherent state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentAmplitude<T: Real = f64> {
    pub alpha: C<T>,
}

impl<T: Real> CoherentAmplitude<T> {
    pub fn new(alpha: C<T>) -> Self {
        Self { alpha }
    }

    pub fn polar(r: T, phase: T) -> Self {
        Self { alpha: C::from_polar(r, phase) }
    }

    pub fn real(r: T) -> Self {
        Self::polar(r, T::zero())
    }

    #[inline]
    pub fn modulus(&self) -> T {
        self.alpha.norm()
    }

    #[inline]
    pub fn phase(&self) -> T {
        if self.alpha.norm() == T::zero() {
            T::zero()
        } else {
            self.alpha.arg()
        }
    }

    /// `q_0(r), …, q_{n_max}(r)`.
    pub fn weights(&self, n_max: usize) -> Vec<T> {
        let r = self.modulus();
        (0..=n_max).map(|m| coherent_weight(m, r)).collect()
    }

    /// Fock amplitudes `⟨n|α⟩`, `n = 0..=n_max`.
    pub fn state_vector(&self, n_max: usize) -> Vec<C<T>> {
        let phase = self.phase();
        self.weights(n_max)
            .into_iter()
            .enumerate()
            .map(|(n, q)| cis(phase * T::from_index(n)) * q)
            .collect()
    }

    /// Poisson mass lost beyond `n_max`.
    pub fn truncation_tail(&self, n_max: usize) -> T {
        let kept = self.weights(n_max).iter().fold(T::zero(), |acc, q| acc + *q * *q);
        (T::one() - kept).max(T::zero())
    }
}

/// Cutoff `⌈r² + 10r + 20 + k_max⌉`, which keeps the Poisson tail below 1e-12.
pub fn default_cutoff(r: f64, k_max: usize) -> usize {
    (r * r + 10.0 * r + 20.0 + k_max as f64).ceil() as usize
}

/// Hermitian Fock-basis density matrix, stored dense and row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T: Real = f64> {
    dim: usize,
    data: Vec<C<T>>,
}

impl<T: Real> DensityMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![czero(); dim * dim] }
    }

    /// Wraps raw row-major entries without validation.
    pub fn from_entries(dim: usize, data: Vec<C<T>>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::InvalidState(format!("{} entries for dimension {dim}", data.len())));
        }
        Ok(Self { dim, data })
    }

    /// `|n⟩⟨n|`.
    pub fn fock(dim: usize, n: usize) -> Result<Self> {
        if n >= dim {
            return Err(Error::InvalidArgument(format!("Fock level {n} outside dimension {dim}")));
        }
        let mut rho = Self::zeros(dim);
        rho[(n, n)] = cre(T::one());
        Ok(rho)
    }

    pub fn vacuum(dim: usize) -> Self {
        Self::fock(dim.max(1), 0).expect("dim >= 1")
    }

    /// `|ψ⟩⟨ψ|` for an (unnormalized) vector.
    pub fn pure(psi: &[C<T>]) -> Self {
        let dim = psi.len();
        let mut rho = Self::zeros(dim);
        for n in 0..dim {
            for m in 0..dim {
                rho[(n, m)] = psi[n] * psi[m].conj();
            }
        }
        rho
    }

    /// `I/d`.
    pub fn maximally_mixed(dim: usize) -> Self {
        let mut rho = Self::zeros(dim);
        let w = T::one() / T::from_index(dim);
        for n in 0..dim {
            rho[(n, n)] = cre(w);
        }
        rho
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn n_max(&self) -> usize {
        self.dim - 1
    }

    pub fn entries(&self) -> &[C<T>] {
        &self.data
    }

    pub fn entries_mut(&mut self) -> &mut [C<T>] {
        &mut self.data
    }

    pub fn trace(&self) -> C<T> {
        (0..self.dim).fold(czero(), |acc, n| acc + self[(n, n)])
    }

    /// `max |ρ_nm − conj(ρ_mn)|`.
    pub fn hermiticity_error(&self) -> T {
        let mut worst = T::zero();
        for n in 0..self.dim {
            for m in n..self.dim {
                worst = worst.max((self[(n, m)] - self[(m, n)].conj()).norm());
            }
        }
        worst
    }

    /// Checks Hermiticity (1e-12) and the sign of the diagonal (-1e-12).
    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > T::tol(1e-12) {
            return Err(Error::InvalidState(format!("not Hermitian: error {herm:e}")));
        }
        let tol = T::tol(1e-12);
        for n in 0..self.dim {
            let d = self[(n, n)];
            if d.im.abs() > tol || d.re < -tol || !d.re.is_finite() {
                return Err(Error::InvalidState(format!("diagonal entry ({n},{n}) = {d}")));
            }
        }
        Ok(())
    }

    /// `validate` plus unit trace within 1e-9.
    pub fn validate_normalized(&self) -> Result<()> {
        self.validate()?;
        let tr = self.trace().re;
        if (tr - T::one()).abs() > T::tol(1e-9) {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        Ok(())
    }

    /// `Tr ρ² = Σ |ρ_nm|²` (Hermitian input).
    pub fn purity(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr())
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).norm()))
    }

    /// `⟨ψ|ρ|ψ⟩` for a vector no longer than the matrix dimension.
    pub fn expectation(&self, psi: &[C<T>]) -> T {
        let d = psi.len().min(self.dim);
        let mut acc = czero::<T>();
        for n in 0..d {
            if psi[n] == czero() {
                continue;
            }
            for m in 0..d {
                acc += psi[n].conj() * self[(n, m)] * psi[m];
            }
        }
        acc.re
    }

    /// Embeds or truncates into another dimension.
    pub fn resized(&self, dim: usize) -> Self {
        let mut out = Self::zeros(dim);
        let d = dim.min(self.dim);
        for n in 0..d {
            for m in 0..d {
                out[(n, m)] = self[(n, m)];
            }
        }
        out
    }

    /// Mean photon number and its standard deviation.
    pub fn photon_statistics(&self) -> (T, T) {
        let (mut s0, mut s1, mut s2) = (T::zero(), T::zero(), T::zero());
        for n in 0..self.dim {
            let p = self[(n, n)].re;
            let x = T::from_index(n);
            s0 += p;
            s1 += p * x;
            s2 += p * x * x;
        }
        if s0 <= T::zero() {
            return (T::zero(), T::zero());
        }
        let mean = s1 / s0;
        let var = (s2 / s0 - mean * mean).max(T::zero());
        (mean, var.sqrt())
    }
}

impl<T: Real> std::ops::Index<(usize, usize)> for DensityMatrix<T> {
    type Output = C<T>;
    #[inline]
    fn index(&self, (n, m): (usize, usize)) -> &C<T> {
        &self.data[n * self.dim + m]
    }
}

impl<T: Real> std::ops::IndexMut<(usize, usize)> for DensityMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (n, m): (usize, usize)) -> &mut C<T> {
        &mut self.data[n * self.dim + m]
    }
}

/// Output of [`coherent_density_matrix`]: the truncated state and how much
/// Poisson mass the cutoff dropped.
#[derive(Debug, Clone)]
pub struct CoherentPreparation<T: Real = f64> {
    pub rho: DensityMatrix<T>,
    pub tail: T,
    /// Set when the dropped mass exceeds 1e-9.
    pub truncated: bool,
}

/// `ρ_nm = q_n q_m e^{i(n−m) arg α}` on `0..=n_max`.
pub fn coherent_density_matrix<T: Real>(alpha: CoherentAmplitude<T>, n_max: usize) -> CoherentPreparation<T> {
    let psi = alpha.state_vector(n_max);
    let rho = DensityMatrix::pure(&psi);
    let tail = alpha.truncation_tail(n_max);
    let truncated = tail > T::lit(1e-9);
    if truncated {
        log::warn!("coherent state |α| = {} loses {tail:e} beyond n_max = {n_max}", alpha.modulus());
    }
    CoherentPreparation { rho, tail, truncated }
}

/// One diagonal `ρ_{n,n+k} = c_k ξ_k(n)`, `n = 0..=n_max−k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalBand<T: Real = f64> {
    pub offset: usize,
    pub scale: C<T>,
    pub values: Vec<C<T>>,
}

impl<T: Real> DiagonalBand<T> {
    /// Unit-modulus scale `c_k = e^{-ik·phase}`, the phase of `(α*)^k`.
    pub fn scale_for(offset: usize, phase: T) -> C<T> {
        cis(-phase * T::from_index(offset))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `ρ_{n,n+k}` reconstructed from the band.
    #[inline]
    pub fn element(&self, n: usize) -> C<T> {
        self.scale * self.values[n]
    }

    /// Smallest real part; non-negative for phase-aligned coherent input.
    pub fn min_real(&self) -> T {
        self.values.iter().fold(T::infinity(), |acc, v| acc.min(v.re))
    }
}

/// Splits a Hermitian matrix into its `k ≥ 0` diagonals with
/// `c_k = e^{-ik·phase}`.
pub fn bands_from_matrix<T: Real>(rho: &DensityMatrix<T>, phase: T) -> Result<Vec<DiagonalBand<T>>> {
    let herm = rho.hermiticity_error();
    if herm > T::tol(1e-12) {
        return Err(Error::InvalidState(format!("not Hermitian: error {herm:e}")));
    }
    let dim = rho.dim();
    Ok((0..dim)
        .map(|k| {
            let scale = DiagonalBand::scale_for(k, phase);
            let inv = scale.conj();
            let values = (0..dim - k).map(|n| rho[(n, n + k)] * inv).collect();
            DiagonalBand { offset: k, scale, values }
        })
        .collect())
}

/// Inverse of [`bands_from_matrix`]; the lower triangle is filled by
/// conjugation. Missing bands are zero.
pub fn matrix_from_bands<T: Real>(bands: &[DiagonalBand<T>], dim: usize) -> Result<DensityMatrix<T>> {
    let mut rho = DensityMatrix::zeros(dim);
    for band in bands {
        let k = band.offset;
        if k >= dim || band.len() != dim - k {
            return Err(Error::InvalidArgument(format!(
                "band k = {k} of length {} does not fit dimension {dim}",
                band.len()
            )));
        }
        for n in 0..band.len() {
            let z = band.element(n);
            if k == 0 {
                rho[(n, n)] = cre(z.re);
            } else {
                rho[(n, n + k)] = z;
                rho[(n + k, n)] = z.conj();
            }
        }
    }
    Ok(rho)
}

/// Desired output state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetState<T: Real = f64> {
    /// `|n⟩`, `n ≥ 1`.
    Fock { n: usize },
    /// `(|n⟩ + e^{iφ}|m⟩)/√2`, `n < m`.
    Pair { n: usize, m: usize, phase: T },
    /// Coherent state `|α′⟩` restricted to photon numbers `≡ offset (mod spacing)`.
    Comb { spacing: usize, offset: usize, reference: C<T> },
}

impl<T: Real> TargetState<T> {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TargetState::Fock { n } if n < 1 => Err(Error::InvalidArgument("Fock target needs n >= 1".into())),
            TargetState::Pair { n, m, .. } if n >= m => {
                Err(Error::InvalidArgument(format!("pair target needs n < m, got ({n}, {m})")))
            }
            TargetState::Comb { spacing, offset, .. } if spacing < 2 || offset >= spacing => Err(
                Error::InvalidArgument(format!("comb target needs N >= 2 and 0 <= n0 < N, got N = {spacing}, n0 = {offset}")),
            ),
            _ => Ok(()),
        }
    }

    /// Highest Fock level the designed profile must resolve.
    pub fn reach(&self) -> usize {
        match *self {
            TargetState::Fock { n } => n,
            TargetState::Pair { n, m, .. } => 2 * m - n,
            TargetState::Comb { spacing, offset, .. } => offset + 2 * spacing,
        }
    }

    /// Normalized target vector truncated at `n_max`.
    pub fn state_vector(&self, n_max: usize) -> Vec<C<T>> {
        let dim = n_max + 1;
        let mut psi = vec![czero(); dim];
        match *self {
            TargetState::Fock { n } => {
                if n < dim {
                    psi[n] = cre(T::one());
                }
            }
            TargetState::Pair { n, m, phase } => {
                let s = T::FRAC_1_SQRT_2();
                if n < dim {
                    psi[n] = cre(s);
                }
                if m < dim {
                    psi[m] = cis(phase) * s;
                }
            }
            TargetState::Comb { spacing, offset, reference } => {
                return crate::metrics::comb_state_vector(spacing, offset, reference, n_max);
            }
        }
        psi
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fock_one(n_max: usize) -> LossProfile<f64> {
        let f = (0..=n_max).map(|n| (n as f64 - 1.0).abs()).collect();
        LossProfile::new(f, TailRule::HoldLast).unwrap()
    }

    #[test]
    fn big_f_examples() {
        let ones = LossProfile::constant(10, 1.0).unwrap();
        assert_eq!(big_f(&ones, 4), 2.0);
        assert_eq!(big_f(&ones, 0), 0.0);
        assert_eq!(big_f(&fock_one(10), 1), 0.0);
        assert_eq!(big_f(&fock_one(10), 0), 0.0);
    }

    #[test]
    fn tails() {
        let f = vec![1.0f64, 1.0, 0.5];
        let trunc = LossProfile::new(f.clone(), TailRule::Truncate).unwrap();
        assert_eq!(trunc.big_f(3), 0.0);
        let hold = LossProfile::new(f, TailRule::HoldLast).unwrap();
        assert!((hold.big_f(4) - 1.0).abs() < 1e-15);

        let ladder = [0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let periodic = LossProfile::from_ladder(&ladder, TailRule::Periodic(2)).unwrap();
        for n in 7..40 {
            assert_eq!(periodic.is_dark(n), n % 2 == 1, "n = {n}");
        }
    }

    #[test]
    fn rejects_bad_profiles() {
        assert!(LossProfile::new(vec![1.0, -0.1], TailRule::Truncate).is_err());
        assert!(LossProfile::new(vec![1.0, f64::NAN], TailRule::Truncate).is_err());
        assert!(LossProfile::<f64>::new(vec![], TailRule::Truncate).is_err());
        assert!(LossProfile::new(vec![1.0; 5], TailRule::Periodic(0)).is_err());
        // f ≡ 1 gives F = √n, which is not periodic
        assert!(LossProfile::new(vec![1.0; 8], TailRule::Periodic(2)).is_err());
        assert!(LossProfile::new(vec![1.0; 2], TailRule::Periodic(3)).is_err());
    }

    #[test]
    fn transmittance_examples() {
        let ones = LossProfile::constant(20, 1.0).unwrap();
        assert_eq!(transmittance(&ones, 0, 5), 1.0);
        let p = fock_one(20);
        // F(1) = 0, F(3) > 0
        assert_eq!(transmittance(&p, 2, 1), 0.0);
        // equal ladder amplitudes transmit perfectly
        let flat = LossProfile::from_ladder(&[0.0, 1.0, 1.0, 1.0], TailRule::Truncate).unwrap();
        assert_eq!(transmittance(&flat, 2, 1), 1.0);
        // both dark: 0/0 := 0
        let dark = LossProfile::new(vec![0.0; 6], TailRule::Truncate).unwrap();
        assert_eq!(transmittance(&dark, 2, 1), 0.0);
        assert_eq!(transmittance(&dark, 0, 3), 0.0);
    }

    #[test]
    fn coherent_weight_examples() {
        assert!((coherent_weight(0, 1.0f64) - (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(coherent_weight(0, 0.0f64), 1.0);
        assert_eq!(coherent_weight(3, 0.0f64), 0.0);
        let q = coherent_weight(171, 13.0f64);
        assert!(q.is_finite() && q > 0.0);
        // independent log evaluation with a summed ln(m!)
        let ln_fact: f64 = (1..=171).map(|j| (j as f64).ln()).sum();
        let want = (171.0 * 13.0f64.ln() - 84.5 - 0.5 * ln_fact).exp();
        assert!((q - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn coherent_matrix_examples() {
        let vac = coherent_density_matrix(CoherentAmplitude::real(0.0f64), 5).rho;
        assert_eq!(vac, DensityMatrix::vacuum(6));
        let prep = coherent_density_matrix(CoherentAmplitude::real(1.0f64), 31);
        assert!((prep.rho[(0, 0)].re - (-1.0f64).exp()).abs() < 1e-15);
        assert!(!prep.truncated);
        assert!(prep.rho.validate_normalized().is_ok());

        let small = coherent_density_matrix(CoherentAmplitude::real(3.0f64), 5);
        assert!(small.truncated);
    }

    #[test]
    fn coherent_bands_are_positive() {
        let alpha = CoherentAmplitude::polar(1.7f64, 2.1);
        let rho = coherent_density_matrix(alpha, 40).rho;
        for band in bands_from_matrix(&rho, alpha.phase()).unwrap() {
            for v in &band.values {
                assert!(v.re >= 0.0 && v.im.abs() < 1e-15, "k = {}: {v}", band.offset);
            }
        }
    }

    #[test]
    fn coherent_bands_match_closed_form() {
        let rho = coherent_density_matrix(CoherentAmplitude::real(1.0f64), 30).rho;
        let bands = bands_from_matrix(&rho, 0.0).unwrap();
        let fact = |n: usize| (1..=n).map(|j| j as f64).product::<f64>();
        for k in 0..5 {
            for n in 0..6 {
                let want = (-1.0f64).exp() / (fact(n) * fact(n + k)).sqrt();
                assert!((bands[k].values[n].re - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn vacuum_band() {
        let bands = bands_from_matrix(&DensityMatrix::<f64>::vacuum(4), 0.3).unwrap();
        let nonzero: Vec<_> = bands
            .iter()
            .flat_map(|b| b.values.iter().enumerate().filter(|(_, v)| v.norm() > 0.0).map(move |(n, _)| (b.offset, n)))
            .collect();
        assert_eq!(nonzero, vec![(0, 0)]);
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut rho = DensityMatrix::<f64>::vacuum(3);
        rho[(0, 1)] = C::new(0.1, 0.0);
        assert!(bands_from_matrix(&rho, 0.0).is_err());
        assert!(rho.validate().is_err());
    }

    #[test]
    fn target_validation() {
        assert!(TargetState::<f64>::Fock { n: 0 }.validate().is_err());
        assert!(TargetState::<f64>::Pair { n: 2, m: 2, phase: 0.0 }.validate().is_err());
        assert!(TargetState::<f64>::Comb { spacing: 1, offset: 0, reference: cre(1.0) }.validate().is_err());
        assert!(TargetState::<f64>::Comb { spacing: 3, offset: 3, reference: cre(1.0) }.validate().is_err());
        assert!(TargetState::<f64>::Pair { n: 4, m: 9, phase: 0.5 }.validate().is_ok());
    }

    #[test]
    fn f32_profile_and_weights() {
        let p = LossProfile::<f32>::constant(8, 1.0).unwrap();
        assert_eq!(p.big_f(4), 2.0);
        let w = CoherentAmplitude::<f32>::real(1.0).weights(20);
        let norm: f32 = w.iter().map(|q| q * q).sum();
        assert!((norm - 1.0).abs() < 1e-5);
    }
}
