use proptest::prelude::*;

use ncl::designer::{evaluate_amplitude, profile_for_pair, profile_for_target};
use ncl::evolution::{evolve_matrix, stationarity_residual, EvolutionSettings};
use ncl::fock::{bands_from_matrix, coherent_density_matrix, coherent_weight, matrix_from_bands, CoherentAmplitude};
use ncl::lindblad::ncl_generator;
use ncl::stationary::{stationary_matrix, stationary_support};
use ncl::{DensityMatrix, DensityMatrixF32, LossProfile, LossProfileF32, TailRule, TargetState, C};

/// Ladder with `F(0) = 0`, the given zeros and random positive values elsewhere.
fn ladder(len: usize, max_zeros: usize) -> impl Strategy<Value = Vec<f64>> {
    (
        prop::collection::vec(0.2f64..3.0, len),
        prop::collection::vec(1usize..len, 0..=max_zeros),
    )
        .prop_map(|(mut f, zeros)| {
            f[0] = 0.0;
            for z in zeros {
                f[z] = 0.0;
            }
            f
        })
}

/// Mixed state built from random pure components, so positive and unit trace.
fn random_state(dim: usize) -> impl Strategy<Value = DensityMatrix<f64>> {
    prop::collection::vec((prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim), 0.05f64..1.0), 1..4).prop_map(
        move |components| {
            let mut rho = DensityMatrix::zeros(dim);
            let mut total = 0.0;
            for (amps, w) in &components {
                let psi: Vec<C<f64>> = amps.iter().map(|&(a, b)| C::new(a, b)).collect();
                let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
                for n in 0..dim {
                    for m in 0..dim {
                        rho[(n, m)] += psi[n] * psi[m].conj() * (w / norm);
                    }
                }
                total += w;
            }
            for z in rho.entries_mut() {
                *z /= total;
            }
            rho
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transmittance_symmetric_and_bounded(f in ladder(30, 4), k in 0usize..12, n in 0usize..18) {
        let p = LossProfile::from_ladder(&f, TailRule::Truncate).unwrap();
        let t = p.transmittance(k, n);
        prop_assert!((0.0..=1.0 + 1e-15).contains(&t));
        let mut swapped = f.clone();
        swapped.swap(n, n + k);
        swapped[0] = 0.0;
        if n > 0 {
            let q = LossProfile::from_ladder(&swapped, TailRule::Truncate).unwrap();
            prop_assert!((q.transmittance(k, n) - t).abs() < 1e-15);
        }
    }

    #[test]
    fn bands_round_trip(rho in random_state(7), phase in -3.0f64..3.0) {
        let bands = bands_from_matrix(&rho, phase).unwrap();
        let back = matrix_from_bands(&bands, 7).unwrap();
        prop_assert!(back.max_abs_diff(&rho) < 1e-14);
    }

    #[test]
    fn evolution_conserves_trace_and_hermiticity(f in ladder(10, 2), rho in random_state(10), gamma in 0.1f64..2.0) {
        let p = LossProfile::from_ladder(&f, TailRule::Truncate).unwrap();
        let settings = EvolutionSettings::new(gamma, 3.0 / gamma).with_uniform_snapshots(6);
        let traj = evolve_matrix(&p, &rho, &settings).unwrap();
        for (t, d) in traj.times.iter().zip(&traj.diagnostics) {
            prop_assert!(d.trace_error <= 1e-8 * (1.0 + gamma * t));
            prop_assert!(d.hermiticity_error <= 1e-10);
        }
    }

    #[test]
    fn coherent_bands_stay_nonnegative(f in ladder(25, 3), r in 0.3f64..3.0, theta in -3.0f64..3.0) {
        let p = LossProfile::from_ladder(&f, TailRule::Truncate).unwrap();
        let rho = coherent_density_matrix(CoherentAmplitude::polar(r, theta), 24).rho;
        let settings = EvolutionSettings::new(1.0, 4.0).with_uniform_snapshots(8).with_reference_phase(theta);
        let traj = evolve_matrix(&p, &rho, &settings).unwrap();
        prop_assert!(traj.min_band_value() >= -1e-10);
    }

    #[test]
    fn band_route_matches_operator_route(f in ladder(8, 2), rho in random_state(8)) {
        let p = LossProfile::from_ladder(&f, TailRule::Truncate).unwrap();
        let settings = EvolutionSettings::new(0.7, 2.0);
        let bands = evolve_matrix(&p, &rho, &settings).unwrap();
        let ops = ncl_generator(&p, 0.7, 8).unwrap().evolve(&rho, &[0.0, 2.0], 1e-10, 1e-14).unwrap();
        prop_assert!(bands.last().unwrap().max_abs_diff(&ops[1]) < 1e-8);
    }

    #[test]
    fn stationary_state_is_a_fixed_point(f in ladder(40, 4), r in 0.2f64..3.0, theta in -3.0f64..3.0) {
        let p = LossProfile::from_ladder(&f, TailRule::Truncate).unwrap();
        let rho0 = coherent_density_matrix(CoherentAmplitude::polar(r, theta), 39).rho;
        let report = stationary_matrix(&p, &rho0).unwrap();
        prop_assert!(stationarity_residual(&p, 1.0, &report.rho) < 1e-12);
        prop_assert!((report.rho.trace().re - rho0.trace().re).abs() < 1e-12);
        let support = stationary_support(&p, 39);
        for n in 0..40 {
            for m in 0..40 {
                if !support.contains_element(n, m) {
                    prop_assert_eq!(report.rho[(n, m)], C::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn stationary_state_ignores_profile_scale(f in ladder(30, 3), c in 0.01f64..100.0, r in 0.2f64..2.5) {
        let p = LossProfile::from_ladder(&f, TailRule::Truncate).unwrap();
        let rho0 = coherent_density_matrix(CoherentAmplitude::real(r), 29).rho;
        let a = stationary_matrix(&p, &rho0).unwrap().rho;
        let b = stationary_matrix(&p.scaled(c).unwrap(), &rho0).unwrap().rho;
        prop_assert!(a.max_abs_diff(&b) < 1e-13);
    }

    #[test]
    fn coherent_input_with_a_zero_ends_mixed(f in ladder(40, 3), zero in 1usize..6, r in 0.5f64..3.0) {
        let mut f = f;
        f[zero] = 0.0;
        let p = LossProfile::from_ladder(&f, TailRule::Truncate).unwrap();
        let rho0 = coherent_density_matrix(CoherentAmplitude::real(r), 39).rho;
        prop_assert!(stationary_matrix(&p, &rho0).unwrap().purity < 1.0 - 1e-6);
    }

    #[test]
    fn pair_fidelity_identity(n in 1usize..5, dn in 1usize..5, r in 0.5f64..3.5, phase in -3.0f64..3.0) {
        let m = n + dn;
        let e = evaluate_amplitude(&TargetState::Pair { n, m, phase }, r).unwrap();
        let rho = &e.report.rho;
        let exact = 0.5 * (1.0 - rho[(0, 0)].re) + rho[(n, m)].norm();
        prop_assert!((e.fidelity - exact).abs() < 1e-12);
        // the looser bound ½ + |ρ_nm| − ρ₀₀ never exceeds the exact value
        prop_assert!(0.5 + rho[(n, m)].norm() - rho[(0, 0)].re <= e.fidelity + 1e-12);
    }

    #[test]
    fn pair_coherence_never_beats_closed_form_bound(n in 0usize..4, dn in 1usize..5, r in 0.3f64..3.5) {
        let e = evaluate_amplitude(&TargetState::Pair { n, m: n + dn, phase: 0.0 }, r).unwrap();
        // Cauchy–Schwarz on the flow sum
        prop_assert!(e.coherence <= 2.0 * (e.report.rho[(n, n)].re * e.report.rho[(n + dn, n + dn)].re).sqrt() + 1e-12);
    }
}

#[test]
fn coherent_weights_normalize() {
    for r in [0.5f64, 2.0, 5.0, 9.0] {
        let n_max = (r * r + 10.0 * r + 20.0).ceil() as usize;
        let total: f64 = (0..=n_max).map(|m| coherent_weight(m, r).powi(2)).sum();
        assert!((total - 1.0).abs() < 1e-9, "r = {r}: {total}");
    }
}

#[test]
fn single_precision_tracks_double() {
    let p64: LossProfile<f64> = profile_for_pair(1, 3, 30).unwrap();
    let p32: LossProfileF32 = profile_for_pair(1, 3, 30).unwrap();
    let rho64 = coherent_density_matrix(CoherentAmplitude::real(1.6f64), 30).rho;
    let rho32: DensityMatrixF32 = coherent_density_matrix(CoherentAmplitude::real(1.6f32), 30).rho;
    let a = stationary_matrix(&p64, &rho64).unwrap();
    let b = stationary_matrix(&p32, &rho32).unwrap();
    for n in 0..31 {
        for m in 0..31 {
            assert!((a.rho[(n, m)].re - b.rho[(n, m)].re as f64).abs() < 1e-5);
        }
    }
    let settings = EvolutionSettings::new(1.0f32, 5.0).with_tolerances(1e-5, 1e-8);
    let traj = evolve_matrix(&p32, &rho32, &settings).unwrap();
    assert!(traj.max_trace_error() < 1e-4);
}

#[test]
fn designed_profiles_have_the_intended_support() {
    let one = C::new(1.0, 0.0);
    let cases = [
        (TargetState::Fock { n: 3 }, vec![(0, 0), (0, 3), (3, 3)]),
        (TargetState::Pair { n: 0, m: 2, phase: 0.0 }, vec![(0, 0), (0, 2), (2, 2)]),
        (TargetState::Pair { n: 4, m: 9, phase: 0.0 }, vec![(0, 0), (0, 4), (0, 9), (4, 4), (4, 9), (9, 9)]),
    ];
    for (target, want) in cases {
        let p = profile_for_target(&target, 30).unwrap();
        let support = stationary_support(&p, 30);
        let mut got: Vec<(usize, usize)> = support.accumulators.iter().map(|a| (a.n, a.n + a.k)).collect();
        got.sort_unstable();
        assert_eq!(got, want, "{target:?}");
    }
    let comb = profile_for_target(&TargetState::Comb { spacing: 3, offset: 2, reference: one }, 20).unwrap();
    let levels: Vec<usize> = stationary_support(&comb, 20).accumulators.iter().filter(|a| a.k == 0).map(|a| a.n).collect();
    assert_eq!(levels, vec![0, 2, 5, 8, 11, 14, 17, 20]);
}
