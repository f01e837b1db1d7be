//! Linear-algebra and propagation routines against straightforward
//! independent implementations.

use decohere_core::evolution::{evolve_unitary, integrate_master, LindbladModel, TimeGrid};
use decohere_core::hilbert::{
    eig_hermitian, expm_hermitian_prop, kron, matmul, partial_trace, propagate_density, ComplexMatrix, QuantumState,
    TensorFactorization,
};
use decohere_core::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

fn random_matrix(rng: &mut ChaCha20Rng, rows: usize, cols: usize) -> ComplexMatrix {
    let data =
        (0..rows * cols).map(|_| Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))).collect();
    ComplexMatrix::new(rows, cols, data).unwrap()
}

fn random_hermitian(rng: &mut ChaCha20Rng, n: usize) -> ComplexMatrix {
    random_matrix(rng, n, n).hermitian_part()
}

fn random_density(rng: &mut ChaCha20Rng, n: usize) -> ComplexMatrix {
    let g = random_matrix(rng, n, n);
    let rho = &g * &g.dagger();
    let tr = rho.trace().re;
    rho.scale_real(1.0 / tr).hermitian_part()
}

fn naive_matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut s = Complex64::new(0.0, 0.0);
            for k in 0..a.cols() {
                s += a[(i, k)] * b[(k, j)];
            }
            out[(i, j)] = s;
        }
    }
    out
}

/// `exp(-iHt)` by Taylor series with scaling and squaring.
fn taylor_expm(h: &ComplexMatrix, t: f64) -> ComplexMatrix {
    let n = h.rows();
    let a = h.scale(Complex64::new(0.0, -t));
    let norm = a.frobenius_norm();
    let squarings = (norm.max(1.0).log2().ceil() as u32) + 4;
    let a = a.scale_real(0.5f64.powi(squarings as i32));
    let mut term = ComplexMatrix::identity(n);
    let mut sum = ComplexMatrix::identity(n);
    for k in 1..30 {
        term = naive_matmul(&term, &a).scale_real(1.0 / k as f64);
        sum = &sum + &term;
    }
    for _ in 0..squarings {
        sum = naive_matmul(&sum, &sum);
    }
    sum
}

/// Partial trace by explicit multi-index summation over three factors.
fn naive_partial_trace_3(rho: &ComplexMatrix, dims: [usize; 3], keep: &[usize]) -> ComplexMatrix {
    let flat = |i: [usize; 3]| (i[0] * dims[1] + i[1]) * dims[2] + i[2];
    let kept_dim: usize = keep.iter().map(|&k| dims[k]).product();
    let mut out = ComplexMatrix::zeros(kept_dim, kept_dim);
    let all = |d: [usize; 3]| {
        let mut v = Vec::new();
        for a in 0..d[0] {
            for b in 0..d[1] {
                for c in 0..d[2] {
                    v.push([a, b, c]);
                }
            }
        }
        v
    };
    let kept_index = |i: [usize; 3]| keep.iter().fold(0, |acc, &k| acc * dims[k] + i[k]);
    for i in all(dims) {
        for j in all(dims) {
            let traced_equal = (0..3).filter(|k| !keep.contains(k)).all(|k| i[k] == j[k]);
            if traced_equal {
                out[(kept_index(i), kept_index(j))] += rho[(flat(i), flat(j))];
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matmul_matches_triple_loop(seed in any::<u64>(), r in 1usize..7, k in 1usize..7, c in 1usize..7) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let a = random_matrix(&mut rng, r, k);
        let b = random_matrix(&mut rng, k, c);
        prop_assert!(matmul(&a, &b).unwrap().max_abs_diff(&naive_matmul(&a, &b)) < 1e-12);
    }

    #[test]
    fn kron_matches_index_formula(seed in any::<u64>(), p in 1usize..4, q in 1usize..4, r in 1usize..4, s in 1usize..4) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let a = random_matrix(&mut rng, p, q);
        let b = random_matrix(&mut rng, r, s);
        let k = kron(&a, &b);
        prop_assert_eq!((k.rows(), k.cols()), (p * r, q * s));
        for i in 0..p { for j in 0..q { for u in 0..r { for v in 0..s {
            prop_assert_eq!(k[(i * r + u, j * s + v)], a[(i, j)] * b[(u, v)]);
        }}}}
    }

    #[test]
    fn kron_mixed_product(seed in any::<u64>(), n in 1usize..4, m in 1usize..4) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (a, c) = (random_matrix(&mut rng, n, n), random_matrix(&mut rng, n, n));
        let (b, d) = (random_matrix(&mut rng, m, m), random_matrix(&mut rng, m, m));
        let lhs = matmul(&kron(&a, &b), &kron(&c, &d)).unwrap();
        let rhs = kron(&matmul(&a, &c).unwrap(), &matmul(&b, &d).unwrap());
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-11);
    }

    #[test]
    fn partial_trace_matches_index_sum(
        seed in any::<u64>(),
        d0 in 1usize..4, d1 in 1usize..4, d2 in 1usize..4,
        keep_mask in 1u8..8,
    ) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let dims = [d0, d1, d2];
        let n = d0 * d1 * d2;
        let rho = random_matrix(&mut rng, n, n);
        let keep: Vec<usize> = (0..3).filter(|k| keep_mask & (1 << k) != 0).collect();
        let fact = TensorFactorization::new(dims.to_vec()).unwrap();
        let fast = partial_trace(&rho, &fact, &keep).unwrap();
        prop_assert!(fast.max_abs_diff(&naive_partial_trace_3(&rho, dims, &keep)) < 1e-12);
    }

    #[test]
    fn partial_trace_is_linear_and_trace_preserving(seed in any::<u64>(), alpha in -3.0f64..3.0) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let fact = TensorFactorization::new(vec![2, 3]).unwrap();
        let (x, y) = (random_matrix(&mut rng, 6, 6), random_matrix(&mut rng, 6, 6));
        let combo = &x + &y.scale_real(alpha);
        let lhs = partial_trace(&combo, &fact, &[1]).unwrap();
        let rhs = &partial_trace(&x, &fact, &[1]).unwrap() + &partial_trace(&y, &fact, &[1]).unwrap().scale_real(alpha);
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        prop_assert!((lhs.trace() - combo.trace()).norm() < 1e-12);
    }

    #[test]
    fn propagator_matches_taylor_series(seed in any::<u64>(), n in 1usize..6, t in -2.0f64..2.0) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let h = random_hermitian(&mut rng, n);
        let u = expm_hermitian_prop(&h, t).unwrap();
        prop_assert!(u.max_abs_diff(&taylor_expm(&h, t)) < 1e-10);
        prop_assert!(u.is_unitary(1e-10));
    }

    #[test]
    fn propagator_composes(seed in any::<u64>(), t1 in -2.0f64..2.0, t2 in -2.0f64..2.0) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let h = random_hermitian(&mut rng, 4);
        let composed = matmul(&expm_hermitian_prop(&h, t1).unwrap(), &expm_hermitian_prop(&h, t2).unwrap()).unwrap();
        prop_assert!(composed.max_abs_diff(&expm_hermitian_prop(&h, t1 + t2).unwrap()) < 1e-10);
    }

    #[test]
    fn eigendecomposition_reconstructs(seed in any::<u64>(), n in 1usize..8) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let h = random_hermitian(&mut rng, n);
        let eig = eig_hermitian(&h).unwrap();
        prop_assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        let back = eig.reconstruct_with(|l| Complex64::new(l, 0.0));
        prop_assert!(back.max_abs_diff(&h) < 1e-10);
        for k in 0..n {
            let v = eig.vector(k);
            let hv = h.apply(&v).unwrap();
            for (a, b) in hv.iter().zip(&v) {
                prop_assert!((a - b * eig.values[k]).norm() < 1e-10);
            }
        }
    }
}

#[test]
fn diagonal_fast_path_agrees_with_dense_path() {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let energies = [0.3, -1.2, 2.5, 0.0, 0.7];
    let h = ComplexMatrix::from_real_diagonal(&energies);
    let rho = random_density(&mut rng, 5);
    for t in [0.0, 0.4, 3.3, -1.0] {
        let fast = propagate_density(&rho, &h, t).unwrap();
        let u = taylor_expm(&h, t);
        let slow = naive_matmul(&naive_matmul(&u, &rho), &u.dagger());
        assert!(fast.max_abs_diff(&slow) < 1e-12, "t = {t}");
    }
}

#[test]
fn closed_master_equation_matches_unitary_evolution() {
    // RK4 on -i[H, ρ] against the spectral propagator.
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    let h = random_hermitian(&mut rng, 4);
    let rho0 = QuantumState::mixed(random_density(&mut rng, 4)).unwrap();
    let model = LindbladModel::closed(h.clone()).unwrap();
    let grid = TimeGrid::new(0.0, 2.0, 4000, 400).unwrap();
    for s in integrate_master(&rho0, &model, &grid).unwrap() {
        let exact = evolve_unitary(&rho0, &h, s.t).unwrap();
        assert!(s.state.density_matrix().max_abs_diff(&exact.density_matrix()) < 1e-9, "t = {}", s.t);
    }
}

#[test]
fn pure_and_mixed_unitary_paths_agree() {
    let mut rng = ChaCha20Rng::seed_from_u64(13);
    let h = random_hermitian(&mut rng, 3);
    let psi = QuantumState::pure_normalized(
        (0..3).map(|_| Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))).collect(),
    )
    .unwrap();
    let a = evolve_unitary(&psi, &h, 1.7).unwrap();
    let b = evolve_unitary(&psi.to_mixed(), &h, 1.7).unwrap();
    assert!(a.is_pure_repr() && !b.is_pure_repr());
    assert!(a.density_matrix().max_abs_diff(&b.density_matrix()) < 1e-12);
}
