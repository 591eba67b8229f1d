//! Special functions: log-gamma and the error function.

use crate::scalar::Real;

const LANCZOS_G: f64 = 7.0;
// published g = 7 coefficients, kept digit for digit
#[allow(clippy::excessive_precision)]
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma<T: Real>(x: T) -> T {
    let half = T::lit(0.5);
    if x < half {
        // reflection: Γ(x)Γ(1-x) = π / sin(πx)
        let pi = T::PI();
        return (pi / (pi * x).sin().abs()).ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut acc = T::lit(LANCZOS_COEF[0]);
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += T::lit(c) / (x + T::from_index(i));
    }
    let t = x + T::lit(LANCZOS_G) + half;
    half * (T::TAU()).ln() + (x + half) * t.ln() - t + acc.ln()
}

/// `ln(n!)`.
#[inline]
pub fn ln_factorial<T: Real>(n: usize) -> T {
    if n < 2 {
        T::zero()
    } else {
        ln_gamma(T::from_index(n) + T::one())
    }
}

/// `n!` as a running product; exact in `f64` up to `22!`, infinite past `170!`.
pub fn factorial<T: Real>(n: usize) -> T {
    (2..=n).fold(T::one(), |acc, k| acc * T::from_index(k))
}

/// Error function.
///
/// Uses the all-positive series
/// `erf(x) = 2/√π · e^{-x²} · Σ 2ⁿ x^{2n+1} / (2n+1)!!`, which has no
/// cancellation; beyond |x| = 6 the result is ±1 to double precision.
pub fn erf<T: Real>(x: T) -> T {
    if x < T::zero() {
        return -erf(-x);
    }
    if x >= T::lit(6.0) {
        return T::one();
    }
    let x2 = x * x;
    let two = T::lit(2.0);
    let mut term = x;
    let mut sum = x;
    let mut n = 0usize;
    loop {
        n += 1;
        term *= two * x2 / T::from_index(2 * n + 1);
        sum += term;
        if term <= sum * T::epsilon() * T::lit(0.25) || n > 400 {
            break;
        }
    }
    two / T::PI().sqrt() * (-x2).exp() * sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorial_values() {
        assert_eq!(factorial::<f64>(0), 1.0);
        assert_eq!(factorial::<f64>(5), 120.0);
        assert_eq!(factorial::<f64>(20), 2_432_902_008_176_640_000.0);
        assert!((factorial::<f64>(30).ln() - ln_factorial::<f64>(30)).abs() < 1e-12);
    }

    #[test]
    fn ln_gamma_matches_factorials() {
        let mut ln_fact = 0.0f64;
        for n in 1..=170usize {
            ln_fact += (n as f64).ln();
            let got = ln_factorial::<f64>(n);
            assert!(
                (got - ln_fact).abs() <= 1e-13 * ln_fact.max(1.0),
                "n={n}: {got} vs {ln_fact}"
            );
        }
        assert_eq!(ln_factorial::<f64>(0), 0.0);
        assert_eq!(ln_factorial::<f64>(1), 0.0);
    }

    #[test]
    fn ln_gamma_half_integer() {
        // Γ(1/2) = √π
        let got = ln_gamma(0.5f64);
        assert!((got - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        let got = ln_gamma(0.25f64);
        // Γ(1/4) = 3.625609908221908...
        assert!((got - 3.625_609_908_221_908_f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn erf_reference_values() {
        let cases = [
            (0.0, 0.0),
            (0.1, 0.112_462_916_018_284_9),
            (0.5, 0.520_499_877_813_046_5),
            (1.0, 0.842_700_792_949_714_9),
            (2.0, 0.995_322_265_018_952_7),
            (3.0, 0.999_977_909_503_001_4),
            (4.5, 0.999_999_999_803_383_9),
        ];
        for (x, want) in cases {
            let got: f64 = erf(x);
            assert!((got - want).abs() < 1e-15, "erf({x}) = {got}, want {want}");
            assert!((erf::<f64>(-x) + want).abs() < 1e-15);
        }
        assert_eq!(erf(7.0f64), 1.0);
    }

    #[test]
    fn single_precision_is_usable() {
        assert!((erf(1.0f32) - 0.842_700_8).abs() < 1e-6);
        assert!((ln_factorial::<f32>(10) - 15.104_413).abs() < 1e-4);
    }
}
