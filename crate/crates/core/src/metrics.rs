//! State-quality measures and closed-form reference values.

use crate::error::{Error, Result};
use crate::fock::{coherent_weight, DensityMatrix, LossProfile, TailRule, TargetState};
use crate::optimize::golden_section_maximize;
use crate::scalar::{cis, cre, czero, Real, C};
use crate::special::erf;

/// `⟨ψ|ρ|ψ⟩` for the target's pure state.
pub fn fidelity<T: Real>(rho: &DensityMatrix<T>, target: &TargetState<T>) -> T {
    let psi = target.state_vector(rho.n_max());
    rho.expectation(&psi)
}

/// `2|ρ_nm|`.
pub fn coherence<T: Real>(rho: &DensityMatrix<T>, n: usize, m: usize) -> Result<T> {
    if n >= m || m > rho.n_max() {
        return Err(Error::InvalidArgument(format!(
            "coherence needs n < m <= n_max = {}, got ({n}, {m})",
            rho.n_max()
        )));
    }
    Ok(T::lit(2.0) * rho[(n, m)].norm())
}

/// `Tr ρ²`.
pub fn purity<T: Real>(rho: &DensityMatrix<T>) -> T {
    rho.purity()
}

/// Best-case pair coherence from a coherent state of modulus `r`,
/// `2 Σ_{k=n}^{m−1} q_k q_{k+m−n}`.
pub fn coherence_closed_form<T: Real>(n: usize, m: usize, r: T) -> Result<T> {
    if n >= m {
        return Err(Error::InvalidArgument(format!("pair needs n < m, got ({n}, {m})")));
    }
    let dn = m - n;
    let sum = (n..m).fold(T::zero(), |acc, k| acc + coherent_weight(k, r) * coherent_weight(k + dn, r));
    Ok(T::lit(2.0) * sum)
}

/// `c₀₂ = √2 (r² + r⁴/√3) e^{−r²}`.
pub fn pair02_coherence<T: Real>(r: T) -> T {
    let r2 = r * r;
    T::SQRT_2() * (r2 + r2 * r2 / T::lit(3.0).sqrt()) * (-r2).exp()
}

/// Amplitude maximizing [`pair02_coherence`]: `r² = (2 − √3 + √7)/2`.
pub fn pair02_optimal_amplitude<T: Real>() -> T {
    ((T::lit(2.0) - T::lit(3.0).sqrt() + T::lit(7.0).sqrt()) / T::lit(2.0)).sqrt()
}

/// Large-amplitude approximation of the optimal pair state.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PairApproximation<T: Real = f64> {
    pub zeta: T,
    pub alpha_opt_sq: T,
    pub coherence: T,
    pub rho_mm: T,
    pub rho_nn: T,
    pub rho_nm_abs: T,
    pub rho_00: T,
}

/// `2 erf(ζ) e^{−ζ²}`.
pub fn gaussian_pair_coherence<T: Real>(zeta: T) -> T {
    T::lit(2.0) * erf(zeta) * (-zeta * zeta).exp()
}

pub fn pair_gaussian_approximation<T: Real>(n: usize, m: usize) -> Result<PairApproximation<T>> {
    if n >= m || m < 2 {
        return Err(Error::InvalidArgument(format!("approximation needs m > n >= 0 and m >= 2, got ({n}, {m})")));
    }
    let alpha_opt_sq = T::from_index(m) - T::lit(0.5);
    let dn = T::from_index(m - n);
    let zeta = dn / (T::lit(2.0) * T::SQRT_2() * alpha_opt_sq.sqrt());
    let e = (-zeta * zeta).exp();
    let erf2 = erf(T::lit(2.0) * zeta);
    Ok(PairApproximation {
        zeta,
        alpha_opt_sq,
        coherence: T::lit(2.0) * erf(zeta) * e,
        rho_mm: T::lit(0.5),
        rho_nn: T::lit(0.5) * erf2,
        rho_nm_abs: erf(zeta) * e,
        rho_00: T::lit(0.5) * (T::one() - erf2),
    })
}

/// Maximum of [`gaussian_pair_coherence`] over `ζ`: `(ζ*, c_max)`.
pub fn maximize_gaussian_pair_coherence<T: Real>() -> (T, T) {
    let (z, c, _) = golden_section_maximize(gaussian_pair_coherence, T::lit(0.05), T::lit(2.0), T::tol(1e-10));
    (z, c)
}

/// Central-limit estimate of `q_k²(r)`.
pub fn gaussian_weight_sq<T: Real>(k: usize, r: T) -> T {
    let d = T::from_index(k) - r * r;
    (-(d * d) / (T::lit(2.0) * r * r)).exp() / ((T::lit(2.0) * T::PI()).sqrt() * r)
}

/// Large-amplitude purity of a comb state, `1 − (N² − 1)/(24 r²)`.
pub fn comb_purity_approx<T: Real>(spacing: usize, r: T) -> T {
    let n = T::from_index(spacing);
    T::one() - (n * n - T::one()) / (T::lit(24.0) * r * r)
}

/// Coherent state `|α′⟩` keeping only photon numbers `≡ offset (mod spacing)`,
/// renormalized.
pub fn comb_state_vector<T: Real>(spacing: usize, offset: usize, alpha: C<T>, n_max: usize) -> Vec<C<T>> {
    assert!(spacing >= 1 && offset < spacing, "comb needs spacing >= 1 and offset < spacing");
    let r = alpha.norm();
    let theta = alpha.arg();
    let mut psi: Vec<C<T>> = (0..=n_max)
        .map(|n| {
            if n % spacing == offset {
                cis(theta * T::from_index(n)) * coherent_weight(n, r)
            } else {
                czero()
            }
        })
        .collect();
    normalize(&mut psi);
    psi
}

/// The same comb built as `Σ_k e^{−2πi k n₀/N} |α′ e^{2πik/N}⟩`, renormalized.
pub fn comb_state_vector_circle<T: Real>(spacing: usize, offset: usize, alpha: C<T>, n_max: usize) -> Vec<C<T>> {
    assert!(spacing >= 1 && offset < spacing, "comb needs spacing >= 1 and offset < spacing");
    let r = alpha.norm();
    let two_pi_n = T::lit(2.0) * T::PI() / T::from_index(spacing);
    let mut psi = vec![czero(); n_max + 1];
    for j in 0..spacing {
        let rot = two_pi_n * T::from_index(j);
        let weight = cis(-rot * T::from_index(offset));
        let theta = alpha.arg() + rot;
        for (n, p) in psi.iter_mut().enumerate() {
            *p += weight * cis(theta * T::from_index(n)) * coherent_weight(n, r);
        }
    }
    normalize(&mut psi);
    psi
}

fn normalize<T: Real>(psi: &mut [C<T>]) {
    let norm = psi.iter().fold(T::zero(), |a, z| a + z.norm_sqr()).sqrt();
    if norm > T::zero() {
        psi.iter_mut().for_each(|z| *z /= norm);
    }
}

/// `|⟨a|b⟩|²`.
pub fn overlap<T: Real>(a: &[C<T>], b: &[C<T>]) -> T {
    a.iter().zip(b).fold(czero::<T>(), |acc, (x, y)| acc + x.conj() * y).norm_sqr()
}

/// Zero-delimited segments of a profile as `(start, length)`; a length of
/// `None` means the segment never ends.
pub fn zero_segments<T: Real>(profile: &LossProfile<T>) -> Vec<(usize, Option<usize>)> {
    let zeros = profile.zeros();
    let n_max = profile.n_max();
    let mut segments: Vec<(usize, Option<usize>)> = zeros.windows(2).map(|w| (w[0], Some(w[1] - w[0]))).collect();
    if let Some(&last) = zeros.last() {
        let horizon = match profile.tail() {
            TailRule::Periodic(p) => n_max + p + 1,
            _ => n_max + 1,
        };
        let next = (last + 1..=horizon).find(|&j| profile.is_dark(j));
        segments.push((last, next.map(|j| j - last)));
    }
    segments
}

/// Departure of `rho0` from the ratio condition under which the stationary
/// state of an equally spaced profile is pure.
///
/// For adjacent segments starting at `a` and `b` the condition asks
/// `ρ_{a+k,a+k}/ρ_{b+k,b+k} = ρ_{aa}/ρ_{bb}` for every offset `k` inside the
/// segment. With `d = ln(ρ_{a+k}/ρ_{b+k}) − ln(ρ_a/ρ_b)` the reported value
/// is `max 2|sinh(d/2)|`, the ratio mismatch divided by the geometric mean of
/// the two ratios. Only segment pairs starting within one standard deviation
/// of the mean photon number are scanned.
pub fn purity_condition_residual<T: Real>(rho0: &DensityMatrix<T>, profile: &LossProfile<T>) -> Result<T> {
    let segments = zero_segments(profile);
    if segments.len() < 2 {
        return Err(Error::InvalidArgument("purity condition needs at least two zero segments".into()));
    }
    let first = segments[0].1;
    if segments.iter().any(|s| s.1 != first) {
        return Err(Error::UnequalZeroSpacing { lengths: segments.iter().map(|s| s.1).collect() });
    }
    let len = first.expect("equal spacing of at least two segments is finite");
    let n_max = rho0.n_max();
    let (mean, sigma) = rho0.photon_statistics();
    let in_window = |n: usize| (T::from_index(n) - mean).abs() <= sigma;

    let usable: Vec<(usize, usize)> = segments
        .windows(2)
        .map(|w| (w[0].0, w[1].0))
        .filter(|&(_, b)| b <= n_max)
        .collect();
    let mut pairs: Vec<(usize, usize)> = usable.iter().copied().filter(|&(a, b)| in_window(a) && in_window(b)).collect();
    if pairs.is_empty() {
        let nearest = usable
            .iter()
            .copied()
            .min_by(|x, y| {
                let dx = (T::from_index(x.0) - mean).abs();
                let dy = (T::from_index(y.0) - mean).abs();
                dx.partial_cmp(&dy).unwrap_or(std::cmp::Ordering::Equal)
            })
            .ok_or_else(|| Error::InvalidArgument("no two zero segments fit inside the state's cutoff".into()))?;
        pairs.push(nearest);
    }

    let diag = |n: usize| -> Result<T> {
        let p = rho0[(n, n)].re;
        if p > T::zero() {
            Ok(p.ln())
        } else {
            Err(Error::InvalidState(format!("population at level {n} must be positive for the ratio condition")))
        }
    };
    let mut worst = T::zero();
    for (a, b) in pairs {
        let base = diag(a)? - diag(b)?;
        for k in 1..len {
            if b + k > n_max {
                break;
            }
            let d = diag(a + k)? - diag(b + k)? - base;
            worst = worst.max(T::lit(2.0) * (d / T::lit(2.0)).sinh().abs());
        }
    }
    Ok(worst)
}

/// `(ρ_{n1+k}/ρ_{n2+k}) / (ρ_{n1}/ρ_{n2})` on the diagonal of `rho0`.
pub fn diagonal_ratio_drift<T: Real>(rho0: &DensityMatrix<T>, n1: usize, n2: usize, k: usize) -> T {
    let p = |n: usize| rho0[(n, n)].re;
    (p(n1 + k) / p(n2 + k)) / (p(n1) / p(n2))
}

/// Diagonal matrix with the given populations.
pub fn diagonal_state<T: Real>(populations: &[T]) -> DensityMatrix<T> {
    let mut rho = DensityMatrix::zeros(populations.len());
    for (n, &p) in populations.iter().enumerate() {
        rho[(n, n)] = cre(p);
    }
    rho
}
