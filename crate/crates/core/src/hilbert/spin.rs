//! Spin-1/2 operators. `S_z = diag(+1/2, -1/2)` with ħ = 1, so index 0 is
//! spin up.

use num_complex::Complex64;

use super::matrix::ComplexMatrix;

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).expect("2x2")
}

pub fn pauli_y() -> ComplexMatrix {
    let i = Complex64::new(0.0, 1.0);
    let z = Complex64::new(0.0, 0.0);
    ComplexMatrix::from_rows(&[vec![z, -i], vec![i, z]]).expect("2x2")
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_real_diagonal(&[1.0, -1.0])
}

pub fn s_x() -> ComplexMatrix {
    pauli_x().scale_real(0.5)
}

pub fn s_y() -> ComplexMatrix {
    pauli_y().scale_real(0.5)
}

pub fn s_z() -> ComplexMatrix {
    ComplexMatrix::from_real_diagonal(&[0.5, -0.5])
}

pub fn hadamard() -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_real_rows(&[&[s, s], &[s, -s]]).expect("2x2")
}
