//! Tensor-product structure and partial trace.

use num_complex::Complex64;

use super::matrix::ComplexMatrix;
use crate::error::{Error, Result};

/// Ordered subsystem dimensions of a composite Hilbert space. Factor 0 is the
/// slowest index, matching [`super::kron`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorFactorization {
    factor_dims: Vec<usize>,
}

impl TensorFactorization {
    pub fn new(factor_dims: Vec<usize>) -> Result<Self> {
        if factor_dims.is_empty() {
            return Err(Error::Shape("factorization needs at least one factor".into()));
        }
        if factor_dims.contains(&0) {
            return Err(Error::Shape(format!("zero-dimensional factor in {factor_dims:?}")));
        }
        Ok(Self { factor_dims })
    }

    /// `count` qubit factors.
    pub fn qubits(count: usize) -> Result<Self> {
        Self::new(vec![2; count])
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }

    pub fn total_dim(&self) -> usize {
        self.factor_dims.iter().product()
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.factor_dims.len()];
        for k in (0..self.factor_dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.factor_dims[k + 1];
        }
        strides
    }

    /// Flat-index offsets of every multi-index over the given factors, in
    /// lexicographic order (first listed factor slowest).
    fn offsets(&self, factors: &[usize]) -> Vec<usize> {
        let strides = self.strides();
        let mut offsets = vec![0usize];
        for &f in factors {
            let stride = strides[f];
            offsets =
                offsets.iter().flat_map(|&base| (0..self.factor_dims[f]).map(move |i| base + i * stride)).collect();
        }
        offsets
    }
}

/// Reduced matrix on the factors listed in `keep`, tracing out the rest.
/// Kept factors appear in ascending index order regardless of the order given.
pub fn partial_trace(rho: &ComplexMatrix, fact: &TensorFactorization, keep: &[usize]) -> Result<ComplexMatrix> {
    let n = fact.total_dim();
    if !rho.is_square() || rho.rows() != n {
        return Err(Error::Shape(format!(
            "{}x{} matrix does not match factorization {:?} (dim {n})",
            rho.rows(),
            rho.cols(),
            fact.factor_dims()
        )));
    }
    if keep.is_empty() {
        return Err(Error::Shape("partial trace must keep at least one factor".into()));
    }
    let nfac = fact.factor_dims().len();
    if let Some(&bad) = keep.iter().find(|&&k| k >= nfac) {
        return Err(Error::Shape(format!("factor index {bad} out of range for {nfac} factors")));
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    let traced: Vec<usize> = (0..nfac).filter(|k| !kept.contains(k)).collect();

    let kept_off = fact.offsets(&kept);
    let traced_off = fact.offsets(&traced);
    let m = kept_off.len();
    let mut out = vec![Complex64::new(0.0, 0.0); m * m];
    let data = rho.data();
    for (a, &oa) in kept_off.iter().enumerate() {
        for (b, &ob) in kept_off.iter().enumerate() {
            out[a * m + b] = traced_off.iter().map(|&oc| data[(oa + oc) * n + ob + oc]).sum();
        }
    }
    ComplexMatrix::new(m, m, out)
}
