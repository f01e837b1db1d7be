use decohere_core::coherence::{basis_change, mix, populations_coherences, purity, BasisSpec, MixtureSpec};
use decohere_core::evolution::{
    apply_kraus, evolve_unitary, integrate_master, lindblad_rhs, KrausSet, LindbladModel, TimeGrid,
};
use decohere_core::hilbert::{eig_hermitian, expm_hermitian_prop, spin, ComplexMatrix, QuantumState};
use decohere_core::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian(rng: &mut ChaCha20Rng, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))).collect()
}

fn random_hermitian(rng: &mut ChaCha20Rng, n: usize) -> ComplexMatrix {
    ComplexMatrix::new(n, n, gaussian(rng, n * n)).unwrap().hermitian_part()
}

fn random_state(rng: &mut ChaCha20Rng, n: usize) -> QuantumState {
    let g = ComplexMatrix::new(n, n, gaussian(rng, n * n)).unwrap();
    let rho = &g * &g.dagger();
    let tr = rho.trace().re;
    QuantumState::mixed(rho.scale_real(1.0 / tr).hermitian_part()).unwrap()
}

fn random_pure(rng: &mut ChaCha20Rng, n: usize) -> QuantumState {
    QuantumState::pure_normalized(gaussian(rng, n)).unwrap()
}

fn random_model(rng: &mut ChaCha20Rng, n: usize, channels: usize) -> LindbladModel {
    let h = random_hermitian(rng, n);
    let ops = (0..channels)
        .map(|k| (ComplexMatrix::new(n, n, gaussian(rng, n * n)).unwrap().scale_real(0.5), 0.2 + 0.3 * k as f64))
        .collect();
    LindbladModel::new(h, ops).unwrap()
}

fn decay_model(gamma: f64) -> LindbladModel {
    LindbladModel::new(
        ComplexMatrix::from_real_diagonal(&[0.0, 1.0]),
        vec![(ComplexMatrix::transition(2, 0, 1), gamma)],
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn unitary_evolution_preserves_purity_and_spectrum(seed in any::<u64>(), n in 2usize..6, t in -3.0f64..3.0) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let rho = random_state(&mut rng, n);
        let h = random_hermitian(&mut rng, n);
        let out = evolve_unitary(&rho, &h, t).unwrap();
        prop_assert!((purity(&out) - purity(&rho)).abs() < 1e-12);
        let before = eig_hermitian(&rho.density_matrix()).unwrap().values;
        let after = eig_hermitian(&out.density_matrix()).unwrap().values;
        for (a, b) in before.iter().zip(&after) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn basis_change_round_trips(seed in any::<u64>(), n in 2usize..6) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let rho = random_state(&mut rng, n);
        let u = expm_hermitian_prop(&random_hermitian(&mut rng, n), 1.0).unwrap();
        let there = basis_change(&rho, &u).unwrap();
        let back = basis_change(&there, &u.dagger()).unwrap();
        prop_assert!(back.density_matrix().max_abs_diff(&rho.density_matrix()) < 1e-12);
        prop_assert!((purity(&there) - purity(&rho)).abs() < 1e-12);
        // Populations in the rotated basis equal ⟨u_k|ρ|u_k⟩ for the columns of U†.
        let basis = BasisSpec::new("rotated", u.dagger()).unwrap();
        let pc = populations_coherences(&rho, &basis).unwrap();
        let direct = populations_coherences(&there, &BasisSpec::computational(n)).unwrap();
        for (a, b) in pc.populations.iter().zip(&direct.populations) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mixture_matches_weighted_projectors(seed in any::<u64>(), n in 2usize..5, k in 1usize..5) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..k).map(|i| 1.0 + i as f64).collect();
        let total: f64 = raw.iter().sum();
        let comps: Vec<(f64, QuantumState)> = raw.iter().map(|w| (w / total, random_pure(&mut rng, n))).collect();
        let mut expected = ComplexMatrix::zeros(n, n);
        for (w, psi) in &comps {
            let a = psi.amplitudes().unwrap();
            expected.axpy(Complex64::new(*w, 0.0), &ComplexMatrix::outer(a, a));
        }
        let rho = mix(&MixtureSpec::new(comps).unwrap()).unwrap();
        prop_assert!(rho.density_matrix().max_abs_diff(&expected) < 1e-12);
        let p = purity(&rho);
        prop_assert!(p <= 1.0 + 1e-12 && p >= 1.0 / n as f64 - 1e-12);
    }

    #[test]
    fn generator_is_trace_free_and_hermitian(seed in any::<u64>(), n in 2usize..5, channels in 0usize..3) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let model = random_model(&mut rng, n, channels);
        let rho = random_state(&mut rng, n);
        let d = lindblad_rhs(&rho, &model).unwrap();
        prop_assert!(d.trace().norm() < 1e-12);
        prop_assert!(d.hermiticity_defect() < 1e-12);
    }

    #[test]
    fn kraus_map_equals_integrated_decay(seed in any::<u64>(), gamma in 0.1f64..2.0) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let rho0 = random_state(&mut rng, 2);
        let model = LindbladModel::new(
            ComplexMatrix::zeros(2, 2),
            vec![(ComplexMatrix::transition(2, 0, 1), gamma)],
        ).unwrap();
        let grid = TimeGrid::new(0.0, 3.0, 3000, 500).unwrap();
        for s in integrate_master(&rho0, &model, &grid).unwrap() {
            let ks = KrausSet::amplitude_damping(1.0 - (-gamma * s.t).exp()).unwrap();
            let mapped = apply_kraus(&rho0, &ks).unwrap();
            prop_assert!(mapped.density_matrix().max_abs_diff(&s.state.density_matrix()) < 1e-9);
        }
    }
}

#[test]
fn rk4_converges_at_fourth_order() {
    // Driven, decaying qubit; reference from a much finer grid.
    let model = LindbladModel::new(
        &spin::s_x().scale_real(2.0) + &ComplexMatrix::from_real_diagonal(&[0.0, 0.4]),
        vec![(ComplexMatrix::transition(2, 0, 1), 0.7), (spin::pauli_z(), 0.1)],
    )
    .unwrap();
    let rho0 = QuantumState::basis(2, 1).unwrap();
    let final_state = |steps: usize| {
        let grid = TimeGrid::new(0.0, 4.0, steps, steps).unwrap();
        integrate_master(&rho0, &model, &grid).unwrap().pop().unwrap().state.into_density_matrix()
    };
    let reference = final_state(20_000);
    let errors: Vec<f64> = [25, 50, 100].iter().map(|&n| final_state(n).max_abs_diff(&reference)).collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 4.0).abs() < 0.4, "observed order {order} from {errors:?}");
    }
}

#[test]
fn decay_matches_closed_form() {
    let gamma = 1.3;
    let psi = QuantumState::pure(vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)]).unwrap();
    let grid = TimeGrid::new(0.0, 4.0, 2000, 100).unwrap();
    for s in integrate_master(&psi, &decay_model(gamma), &grid).unwrap() {
        let ee = 0.64 * (-gamma * s.t).exp();
        // H = diag(0, 1) rotates the coherence at unit frequency.
        let ge = Complex64::new(0.6, 0.0)
            * Complex64::new(0.0, 0.8).conj()
            * Complex64::from_polar((-0.5 * gamma * s.t).exp(), s.t);
        assert!((s.state.population(1) - ee).abs() < 1e-10);
        assert!((s.state.element(0, 1) - ge).norm() < 1e-10, "t = {}", s.t);
    }
}

#[test]
fn dephasing_kraus_matches_pure_dephasing_generator() {
    // L = σ_z at rate κ decays coherences by e^{-2κt}; the dephasing map with
    // q = (1 − e^{-2κt})/2 does the same.
    let kappa = 0.35;
    let model = LindbladModel::new(ComplexMatrix::zeros(2, 2), vec![(spin::pauli_z(), kappa)]).unwrap();
    let rho0 = QuantumState::pure(vec![Complex64::new(0.8, 0.0), Complex64::new(0.0, 0.6)]).unwrap();
    let grid = TimeGrid::new(0.0, 3.0, 3000, 300).unwrap();
    for s in integrate_master(&rho0, &model, &grid).unwrap() {
        let q = 0.5 * (1.0 - (-2.0 * kappa * s.t).exp());
        let mapped = apply_kraus(&rho0, &KrausSet::dephasing(q).unwrap()).unwrap();
        assert!(mapped.density_matrix().max_abs_diff(&s.state.density_matrix()) < 1e-10, "t = {}", s.t);
    }
}
