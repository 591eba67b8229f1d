//! Coherent weights and log-gamma against an independent library.

use statrs::distribution::{Discrete, Poisson};
use statrs::function::gamma;

use ncl::fock::coherent_weight;
use ncl::special;

#[test]
fn coherent_weights_match_poisson_pmf() {
    for r in [0.3f64, 1.0, 2.5, 6.0, 14.0] {
        let poisson = Poisson::new(r * r).unwrap();
        for m in 0..(r * r + 12.0 * r + 20.0) as u64 {
            let want = poisson.pmf(m);
            let got = coherent_weight(m as usize, r).powi(2);
            // both sides exponentiate arguments of size ~r², so allow 1e-12 relative
            assert!((got - want).abs() <= 1e-12 * want, "r = {r}, m = {m}: {got} vs {want}");
        }
    }
}

#[test]
fn ln_gamma_matches() {
    for i in 1..400 {
        let x = i as f64 * 0.37;
        let want = gamma::ln_gamma(x);
        assert!((special::ln_gamma(x) - want).abs() <= 1e-12 * want.abs().max(1.0), "x = {x}");
    }
}
