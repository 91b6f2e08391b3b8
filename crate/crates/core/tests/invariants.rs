//! Property tests over randomly drawn sizes, parameters and states.

mod common;

use std::sync::Arc;

use bathgen::fock::{sector_dimension, FockBasis, LadderTable, StateVector};
use bathgen::hamiltonian::{build_hamiltonian, diagonalize, hamiltonian_terms, r_ratio, HamiltonianParams};
use bathgen::linalg;
use bathgen::partition::{build_partition, entanglement_entropy, reduced_density, von_neumann_entropy};
use bathgen::propagator::{build_ladder, PropagatorConfig};
use bathgen::states::{microcanonical_state, occupation_state, state_spectrum, PhaseChoice};
use bathgen::thermofit::{
    bose_einstein, fit_biexponential, fit_bose_einstein, fit_log_ratio, occupation_from_fdt, BosePoint, FitOptions,
    LmOptions,
};
use common::{max_diff, model, random_hermitian, random_state};
use faer::{c64, Mat};
use proptest::prelude::*;

/// Counts occupation tuples by brute recursion over the first mode.
fn count_tuples(modes: usize, particles: usize) -> u64 {
    if modes == 1 {
        return 1;
    }
    (0..=particles).map(|k| count_tuples(modes - 1, particles - k)).sum()
}

fn small_sector() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=4, 0usize..=6)
}

/// Production step: the fourth-order Taylor error stays near round-off.
const FINE_DT: f64 = 1.953125e-5;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn dimension_matches_enumeration(m in 1usize..=6, n in 0usize..=30) {
        let brute = count_tuples(m, n);
        prop_assert_eq!(sector_dimension(m, n), brute);
        let basis = FockBasis::with_cap(m, n, 1 << 22).unwrap();
        prop_assert_eq!(basis.dim() as u64, brute);
    }

    #[test]
    fn ranking_is_bijective(m in 1usize..=5, n in 0usize..=12) {
        let basis = FockBasis::new(m, n).unwrap();
        for (k, s) in basis.states().enumerate() {
            prop_assert_eq!(basis.index_of(s), Some(k));
            prop_assert_eq!(s.iter().map(|&x| x as usize).sum::<usize>(), n);
        }
    }

    #[test]
    fn creation_is_adjoint_of_annihilation((m, n) in small_sector(), mode in 0usize..4) {
        let mode = mode % m;
        let lower = FockBasis::new(m, n).unwrap();
        let upper = FockBasis::new(m, n + 1).unwrap();
        let create = LadderTable::creation(mode, &lower, &upper).unwrap().to_dense();
        let annihilate = LadderTable::annihilation(mode, &upper, &lower).unwrap().to_dense();
        let diff = &create - annihilate.adjoint().to_owned();
        prop_assert!(linalg::max_abs(diff.as_ref()) == 0.0);
    }

    #[test]
    fn canonical_commutator((m, n) in small_sector(), mode in 0usize..4, seed in any::<u64>()) {
        let mode = mode % m;
        let here = Arc::new(FockBasis::new(m, n).unwrap());
        let up = FockBasis::new(m, n + 1).unwrap();
        let psi = random_state(&here, seed);
        let raise = LadderTable::creation(mode, &here, &up).unwrap();
        let lower_back = LadderTable::annihilation(mode, &up, &here).unwrap();
        let b_bdag = lower_back.apply(&raise.apply(psi.amplitudes()));
        let bdag_b = if n == 0 {
            vec![c64::new(0.0, 0.0); here.dim()]
        } else {
            let down = FockBasis::new(m, n - 1).unwrap();
            let a = LadderTable::annihilation(mode, &here, &down).unwrap();
            LadderTable::creation(mode, &down, &here).unwrap().apply(&a.apply(psi.amplitudes()))
        };
        let comm: Vec<c64> = b_bdag.iter().zip(&bdag_b).map(|(x, y)| x - y).collect();
        prop_assert!(max_diff(&comm, psi.amplitudes()) < 1e-12);
    }

    #[test]
    fn hamiltonian_is_hermitian_and_conserves_number(
        m in 2usize..=4, n in 1usize..=5,
        delta in -5.0f64..20.0, j in 0.1f64..2.0, u in -2.0f64..2.0, up in -0.5f64..0.5,
    ) {
        let p = HamiltonianParams { level_spacing: delta, hopping: j, intra: u, inter: up, num_modes: m, num_particles: n };
        let basis = Arc::new(FockBasis::new(m, n).unwrap());
        let h = build_hamiltonian(&p, &basis).unwrap();
        prop_assert!(linalg::hermiticity_deviation(h.matrix()) <= 1e-12 * h.max_element());
        for s in basis.states() {
            hamiltonian_terms(&p, s, |target, _| {
                assert_eq!(target.iter().sum::<u32>(), n as u32);
            });
        }
    }

    #[test]
    fn inter_term_alone_is_self_adjoint(m in 2usize..=4, n in 2usize..=5, up in 0.05f64..1.0) {
        // Hopping must stay positive, so isolate the inter-mode term as a difference.
        let basis = Arc::new(FockBasis::new(m, n).unwrap());
        let p = HamiltonianParams { level_spacing: 0.0, hopping: 1.0, intra: 0.0, inter: up, num_modes: m, num_particles: n };
        let with = build_hamiltonian(&p, &basis).unwrap();
        let without = build_hamiltonian(&HamiltonianParams { inter: 0.0, ..p }, &basis).unwrap();
        let term = with.matrix() - without.matrix();
        prop_assert!(linalg::max_abs(term.as_ref()) > 0.0);
        prop_assert!(linalg::hermiticity_deviation(term.as_ref()) <= 1e-12 * linalg::max_abs(term.as_ref()));
    }

    #[test]
    fn spectrum_shift(n in 3usize..=6, c in -50.0f64..50.0) {
        let basis = Arc::new(FockBasis::new(4, n).unwrap());
        let h = build_hamiltonian(&model(4, n), &basis).unwrap();
        let e = diagonalize(&h).unwrap();
        let s = diagonalize(&h.shifted(c)).unwrap();
        for (a, b) in e.values().iter().zip(s.values()) {
            prop_assert!((a + c - b).abs() <= 1e-10 * (1.0 + b.abs()));
        }
        let (ra, rb) = (r_ratio(e.values()).unwrap().mean_r, r_ratio(s.values()).unwrap().mean_r);
        prop_assert!((ra - rb).abs() < 1e-6);
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn ladder_composition(seed in any::<u64>(), s1 in 0i64..5000, s2 in 0i64..5000) {
        let basis = Arc::new(FockBasis::new(3, 3).unwrap());
        let h = build_hamiltonian(&model(3, 3), &basis).unwrap();
        let ladder = build_ladder(&h, &PropagatorConfig { dt: 1e-3, depth: 12, ..Default::default() }).unwrap();
        let psi = random_state(&basis, seed);
        let direct = ladder.evolve_steps(psi.amplitudes(), s1 + s2);
        let chained = ladder.evolve_steps(&ladder.evolve_steps(psi.amplitudes(), s1), s2);
        prop_assert!(max_diff(&direct, &chained) < 1e-8);
    }

    #[test]
    fn ladder_matches_eigen_propagation(dim in 2usize..=40, seed in any::<u64>(), steps in 1i64..100_000) {
        let h = random_hermitian(dim, seed);
        let ladder = build_ladder(&h, &PropagatorConfig { dt: 0.01, depth: 17, ..Default::default() }).unwrap();
        let eig = diagonalize(&h).unwrap();
        let psi = random_state(h.basis(), seed ^ 0x55);
        let got = ladder.evolve_steps(psi.amplitudes(), steps);
        let want = eig.evolve(psi.amplitudes(), steps as f64 * 0.01);
        prop_assert!(max_diff(&got, &want) < 1e-6);
    }

    #[test]
    fn spectrum_mean_and_weights_are_conserved(seed in any::<u64>(), steps in 1i64..60_000) {
        let basis = Arc::new(FockBasis::new(3, 4).unwrap());
        let h = build_hamiltonian(&model(3, 4), &basis).unwrap();
        let eig = diagonalize(&h).unwrap();
        let psi = random_state(&basis, seed);
        let spec = state_spectrum(&eig, &psi, 0.0).unwrap();
        let direct = h.expectation(psi.amplitudes()).re;
        prop_assert!((spec.mean_energy - direct).abs() <= 1e-8 * direct.abs().max(1.0));

        let ladder = build_ladder(&h, &PropagatorConfig { dt: FINE_DT, depth: 16, ..Default::default() }).unwrap();
        let later = StateVector::new(basis.clone(), ladder.evolve_steps(psi.amplitudes(), steps)).unwrap();
        let spec_later = state_spectrum(&eig, &later, 0.0).unwrap();
        for (a, b) in spec.levels.iter().zip(&spec_later.levels) {
            prop_assert!((a.weight - b.weight).abs() < 1e-8);
        }
        prop_assert!((spec.mean_energy - spec_later.mean_energy).abs() < 1e-8 * direct.abs().max(1.0));
    }

    #[test]
    fn microcanonical_weights_are_static(lo_frac in 0.1f64..0.8, seed in any::<u64>()) {
        let basis = Arc::new(FockBasis::new(3, 4).unwrap());
        let h = build_hamiltonian(&model(3, 4), &basis).unwrap();
        let eig = diagonalize(&h).unwrap();
        let (e0, e1) = (eig.values()[0], eig.values()[eig.values().len() - 1]);
        let lo = e0 + lo_frac * (e1 - e0);
        let psi = microcanonical_state(&eig, lo, lo + 0.15 * (e1 - e0), PhaseChoice::Random { seed }).unwrap();
        prop_assert!(psi.is_normalized());
        let ladder = build_ladder(&h, &PropagatorConfig { dt: FINE_DT, depth: 16, ..Default::default() }).unwrap();
        let later = StateVector::new(basis.clone(), ladder.evolve_steps(psi.amplitudes(), 12_345)).unwrap();
        let (a, b) = (state_spectrum(&eig, &psi, 0.0).unwrap(), state_spectrum(&eig, &later, 0.0).unwrap());
        for (x, y) in a.levels.iter().zip(&b.levels) {
            prop_assert!((x.weight - y.weight).abs() < 1e-8);
        }
    }

    #[test]
    fn entropy_is_symmetric_under_complement(seed in any::<u64>(), mask in 1u32..31) {
        let m = 5;
        let basis = Arc::new(FockBasis::new(m, 4).unwrap());
        let system: Vec<usize> = (0..m).filter(|k| mask & (1 << k) != 0).collect();
        let rest: Vec<usize> = (0..m).filter(|k| mask & (1 << k) == 0).collect();
        let psi = random_state(&basis, seed);
        let s_sys = entanglement_entropy(&reduced_density(&psi, &build_partition(&basis, &system).unwrap()).unwrap()).unwrap();
        let s_res = entanglement_entropy(&reduced_density(&psi, &build_partition(&basis, &rest).unwrap()).unwrap()).unwrap();
        prop_assert!((s_sys - s_res).abs() < 1e-8);
        prop_assert!(s_sys <= build_partition(&basis, &system).unwrap().entropy_bound() + 1e-12);
    }

    #[test]
    fn partial_trace_matches_brute_force(seed in any::<u64>(), mask in 1u32..15) {
        let m = 4;
        let basis = Arc::new(FockBasis::new(m, 3).unwrap());
        let system: Vec<usize> = (0..m).filter(|k| mask & (1 << k) != 0).collect();
        let psi = random_state(&basis, seed);
        let rho = reduced_density(&psi, &build_partition(&basis, &system).unwrap()).unwrap();

        // Label each basis state by its (system, reservoir) occupation tuples.
        let split = |s: &[u32]| -> (Vec<u32>, Vec<u32>) {
            let sys = system.iter().map(|&k| s[k]).collect();
            let res = (0..m).filter(|k| !system.contains(k)).map(|k| s[k]).collect();
            (sys, res)
        };
        let mut sys_labels: Vec<Vec<u32>> = basis.states().map(|s| split(s).0).collect();
        sys_labels.sort();
        sys_labels.dedup();
        let d = sys_labels.len();
        let mut brute = Mat::<c64>::zeros(d, d);
        let amps = psi.amplitudes();
        for (a, sa) in basis.states().enumerate() {
            let (xa, ra) = split(sa);
            for (b, sb) in basis.states().enumerate() {
                let (xb, rb) = split(sb);
                if ra == rb {
                    let i = sys_labels.binary_search(&xa).unwrap();
                    let j = sys_labels.binary_search(&xb).unwrap();
                    brute[(i, j)] += amps[a] * amps[b].conj();
                }
            }
        }
        prop_assert_eq!(rho.dim(), d);
        let mut want = linalg::hermitian_eigenvalues(brute.as_ref()).unwrap();
        let mut got = rho.eigenvalues().unwrap();
        want.sort_by(f64::total_cmp);
        got.sort_by(f64::total_cmp);
        for (x, y) in want.iter().zip(&got) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        let s_brute = von_neumann_entropy(brute.as_ref()).unwrap();
        prop_assert!((s_brute - entanglement_entropy(&rho).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn full_ensemble_entropy_is_time_invariant(seed in any::<u64>(), p in 0.05f64..0.95, steps in 1i64..50_000) {
        let basis = Arc::new(FockBasis::new(3, 3).unwrap());
        let h = build_hamiltonian(&model(3, 3), &basis).unwrap();
        let ladder = build_ladder(&h, &PropagatorConfig { dt: FINE_DT, depth: 16, ..Default::default() }).unwrap();
        let (a, b) = (random_state(&basis, seed), random_state(&basis, seed.wrapping_add(1)));
        let ensemble = |x: &[c64], y: &[c64]| {
            Mat::<c64>::from_fn(x.len(), x.len(), |i, j| x[i] * x[j].conj() * p + y[i] * y[j].conj() * (1.0 - p))
        };
        let before = ensemble(a.amplitudes(), b.amplitudes());
        let (ea, eb) = (ladder.evolve_steps(a.amplitudes(), steps), ladder.evolve_steps(b.amplitudes(), steps));
        let after = ensemble(&ea, &eb);
        let (s0, s1) = (von_neumann_entropy(before.as_ref()).unwrap(), von_neumann_entropy(after.as_ref()).unwrap());
        prop_assert!((s0 - s1).abs() < 1e-6);
        let purity = |v: &[c64]| linalg::norm(v).powi(4);
        prop_assert!((purity(&ea) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn occupation_states_are_unentangled(first in 0u32..=6, mask in 1u32..15) {
        let basis = Arc::new(FockBasis::new(4, 6).unwrap());
        let system: Vec<usize> = (0..4).filter(|k| mask & (1 << k) != 0).collect();
        let psi = occupation_state(&basis, &[first, 6 - first, 0, 0]).unwrap();
        let s = entanglement_entropy(&reduced_density(&psi, &build_partition(&basis, &system).unwrap()).unwrap()).unwrap();
        prop_assert!(s.abs() <= 1e-10);
    }
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn fdt_inversion_round_trip(a in 0.01f64..5.0, n in 0.0f64..50.0, phase in -3.0f64..3.0) {
        // Both line strengths share an arbitrary complex phase.
        let rot = c64::cis(phase);
        let spectral = rot * a;
        let keldysh = rot * c64::new(0.0, -a * (2.0 * n + 1.0));
        let got = occupation_from_fdt(keldysh, spectral).unwrap();
        prop_assert!((got.occupation - n).abs() <= 1e-10 * (1.0 + n));
    }

    #[test]
    fn bose_fit_scales_with_energy(t in 2.0f64..200.0, c in 0.1f64..10.0, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<BosePoint> = (1..=6)
            .map(|k| {
                let e = k as f64 * t / 3.0;
                let n = bose_einstein(e, t);
                BosePoint { energy: e, occupation: n * (1.0 + 0.02 * (rng.random::<f64>() - 0.5)), sigma: 0.02 * n }
            })
            .collect();
        let scaled: Vec<BosePoint> = points.iter().map(|p| BosePoint { energy: p.energy * c, ..*p }).collect();
        let opts = LmOptions::default();
        let (f1, f2) = (fit_bose_einstein(&points, &opts).unwrap(), fit_bose_einstein(&scaled, &opts).unwrap());
        prop_assert!((f2.temperature - c * f1.temperature).abs() <= 1e-6 * f2.temperature);
    }

    #[test]
    fn fdt_beta_ignores_common_factor(beta in 0.005f64..0.2, width in 5.0f64..40.0, center in 5.0f64..50.0, k in 0.1f64..10.0) {
        let base = |e: f64| (-(e - center).powi(2) / (2.0 * width * width)).exp() + 1e-3;
        let common = |e: f64| k * (1.0 + 0.5 * (e / 7.0).sin());
        let samples: Vec<(f64, f64, f64)> = (0..60)
            .map(|i| {
                let e = 2.0 + i as f64;
                (e, base(e) * (-beta * e).exp(), base(e))
            })
            .collect();
        let modulated: Vec<(f64, f64, f64)> =
            samples.iter().map(|&(e, f, r)| (e, f * common(e), r * common(e))).collect();
        let (a, b) = (fit_log_ratio(&samples, None).unwrap(), fit_log_ratio(&modulated, None).unwrap());
        prop_assert!((a.beta - beta).abs() <= 1e-10 * beta);
        prop_assert!((a.beta - b.beta).abs() <= 1e-10 * beta);
    }
}

proptest! {
    #![proptest_config(config(8))]

    #[test]
    fn single_exponential_data_is_degenerate(a in 0.5f64..5.0, tau in 0.2f64..3.0, plateau in -2.0f64..5.0) {
        let ts: Vec<f64> = (0..150).map(|k| k as f64 * tau / 15.0).collect();
        let ys: Vec<f64> = ts.iter().map(|t| plateau + a * (-t / tau).exp()).collect();
        let fit = fit_biexponential(&ts, &ys, plateau, &FitOptions::default()).unwrap();
        prop_assert!(fit.a2 <= 1e-3 * fit.a1, "{:?}", fit);
        prop_assert!((fit.tau1 - tau).abs() <= 1e-3 * tau);
        let again = fit_biexponential(&ts, &ys, plateau, &FitOptions::default()).unwrap();
        prop_assert_eq!(fit, again);
    }
}
