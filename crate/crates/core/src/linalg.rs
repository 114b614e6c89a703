//! Minimal dense symmetric linear algebra.
//!
//! The only consumer is the pessimism penalty, which needs the inverse
//! square root of a regularized Laplacian (dimension = number of arms), so a
//! cyclic Jacobi eigensolver is plenty: it is simple, accurate on symmetric
//! matrices, and has no dependencies.

use crate::error::{Error, Result};

/// Row-major square symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    entries: Vec<f64>,
}

/// Eigendecomposition result: `values[i]` pairs with column `i` of `vectors`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors, column-major: `vectors[c]` is column c.
    pub vectors: Vec<Vec<f64>>,
}

const MAX_SWEEPS: usize = 100;
const OFF_DIAG_TOL: f64 = 1e-12;

impl SymmetricMatrix {
    /// Validates squareness, finiteness, and symmetry (within 1e-12).
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("matrix dimension must be positive"));
        }
        if entries.len() != dim * dim {
            return Err(Error::config(format!(
                "expected {} entries for dimension {dim}, got {}",
                dim * dim,
                entries.len()
            )));
        }
        if entries.iter().any(|e| !e.is_finite()) {
            return Err(Error::config("matrix entries must be finite"));
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                if (entries[i * dim + j] - entries[j * dim + i]).abs() > 1e-12 {
                    return Err(Error::config(format!("matrix is not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(SymmetricMatrix { dim, entries })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        Self::new(dim, entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, j)).collect()
    }

    /// Matrix product; the result is generally not symmetric so it is
    /// returned as raw row-major entries.
    pub fn multiply_raw(&self, other: &SymmetricMatrix) -> Result<Vec<f64>> {
        if self.dim != other.dim {
            return Err(Error::config("matrix dimension mismatch"));
        }
        let d = self.dim;
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for k in 0..d {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..d {
                    out[i * d + j] += aik * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    /// Eigenvalues (ascending) and orthonormal eigenvectors via cyclic
    /// Jacobi rotations. Fails if the off-diagonal mass has not dropped
    /// below 1e-12 after 100 sweeps.
    pub fn eigh(&self) -> Result<EigenDecomposition> {
        let d = self.dim;
        let mut a = self.entries.clone();
        // v accumulates rotations; starts as identity
        let mut v = vec![0.0; d * d];
        for i in 0..d {
            v[i * d + i] = 1.0;
        }

        let off = |a: &[f64]| -> f64 {
            let mut s = 0.0;
            for i in 0..d {
                for j in (i + 1)..d {
                    s += a[i * d + j] * a[i * d + j];
                }
            }
            s.sqrt()
        };

        let mut converged = false;
        for _ in 0..MAX_SWEEPS {
            if off(&a) < OFF_DIAG_TOL {
                converged = true;
                break;
            }
            for p in 0..d {
                for q in (p + 1)..d {
                    let apq = a[p * d + q];
                    if apq.abs() < OFF_DIAG_TOL / (d * d) as f64 {
                        continue;
                    }
                    let app = a[p * d + p];
                    let aqq = a[q * d + q];
                    // stable rotation angle computation
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = if theta >= 0.0 {
                        1.0 / (theta + (1.0 + theta * theta).sqrt())
                    } else {
                        -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;

                    for i in 0..d {
                        let aip = a[i * d + p];
                        let aiq = a[i * d + q];
                        a[i * d + p] = c * aip - s * aiq;
                        a[i * d + q] = s * aip + c * aiq;
                    }
                    for j in 0..d {
                        let apj = a[p * d + j];
                        let aqj = a[q * d + j];
                        a[p * d + j] = c * apj - s * aqj;
                        a[q * d + j] = s * apj + c * aqj;
                    }
                    for i in 0..d {
                        let vip = v[i * d + p];
                        let viq = v[i * d + q];
                        v[i * d + p] = c * vip - s * viq;
                        v[i * d + q] = s * vip + c * viq;
                    }
                }
            }
        }
        if !converged && off(&a) >= OFF_DIAG_TOL {
            return Err(Error::numeric(format!(
                "Jacobi eigensolver did not converge in {MAX_SWEEPS} sweeps"
            )));
        }

        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| a[i * d + i].partial_cmp(&a[j * d + j]).expect("finite eigenvalues"));
        let values = order.iter().map(|&i| a[i * d + i]).collect();
        let vectors = order
            .iter()
            .map(|&col| (0..d).map(|row| v[row * d + col]).collect())
            .collect();
        Ok(EigenDecomposition { values, vectors })
    }

    /// Inverse square root of a positive definite matrix:
    /// V diag(eigenvalue^-1/2) V^T. Returns a numeric-domain error if any
    /// eigenvalue is not strictly positive.
    pub fn inv_sqrt_psd(&self) -> Result<SymmetricMatrix> {
        let eig = self.eigh()?;
        if let Some(bad) = eig.values.iter().find(|&&l| l <= 0.0) {
            return Err(Error::numeric(format!(
                "inverse square root requires positive eigenvalues, found {bad}"
            )));
        }
        let d = self.dim;
        let mut out = vec![0.0; d * d];
        for (l, vec) in eig.values.iter().zip(&eig.vectors) {
            let w = 1.0 / l.sqrt();
            for i in 0..d {
                for j in 0..d {
                    out[i * d + j] += w * vec[i] * vec[j];
                }
            }
        }
        // symmetrize away rounding noise before the constructor checks it
        for i in 0..d {
            for j in (i + 1)..d {
                let m = 0.5 * (out[i * d + j] + out[j * d + i]);
                out[i * d + j] = m;
                out[j * d + i] = m;
            }
        }
        SymmetricMatrix::new(d, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_symmetric(dim: usize, seed: u64) -> SymmetricMatrix {
        let mut rng = crate::rng::rng_from_seed(seed);
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let x = rng.gen_range(-1.0..1.0);
                entries[i * dim + j] = x;
                entries[j * dim + i] = x;
            }
        }
        SymmetricMatrix::new(dim, entries).unwrap()
    }

    #[test]
    fn identity_eigenvalues() {
        let eig = SymmetricMatrix::identity(4).unwrap().eigh().unwrap();
        for l in eig.values {
            assert!((l - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_arm_laplacian_spectrum() {
        let m = SymmetricMatrix::new(2, vec![1.0, -1.0, -1.0, 1.0]).unwrap();
        let eig = m.eigh().unwrap();
        assert!(eig.values[0].abs() < 1e-12);
        assert!((eig.values[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn reconstruction_and_invariants() {
        for seed in 0..5u64 {
            let m = random_symmetric(8, seed);
            let eig = m.eigh().unwrap();
            let d = m.dim();
            // sum of eigenvalues = trace
            let trace: f64 = (0..d).map(|i| m.get(i, i)).sum();
            let sum: f64 = eig.values.iter().sum();
            assert!((trace - sum).abs() < 1e-9);
            // V diag(l) V^T reconstructs the matrix
            for i in 0..d {
                for j in 0..d {
                    let mut x = 0.0;
                    for (l, v) in eig.values.iter().zip(&eig.vectors) {
                        x += l * v[i] * v[j];
                    }
                    assert!((x - m.get(i, j)).abs() < 1e-9, "mismatch at ({i},{j})");
                }
            }
            // eigenvectors orthonormal
            for a in 0..d {
                for b in 0..d {
                    let dot: f64 = (0..d).map(|i| eig.vectors[a][i] * eig.vectors[b][i]).sum();
                    let expected = if a == b { 1.0 } else { 0.0 };
                    assert!((dot - expected).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn eigenvalue_product_matches_determinant_small() {
        // 3x3 determinant by cofactor expansion as an independent oracle
        let m = random_symmetric(3, 42);
        let det = m.get(0, 0) * (m.get(1, 1) * m.get(2, 2) - m.get(1, 2) * m.get(2, 1))
            - m.get(0, 1) * (m.get(1, 0) * m.get(2, 2) - m.get(1, 2) * m.get(2, 0))
            + m.get(0, 2) * (m.get(1, 0) * m.get(2, 1) - m.get(1, 1) * m.get(2, 0));
        let eig = m.eigh().unwrap();
        let product: f64 = eig.values.iter().product();
        assert!((det - product).abs() < 1e-10);
    }

    #[test]
    fn inv_sqrt_identity() {
        let m = SymmetricMatrix::identity(3).unwrap();
        let r = m.inv_sqrt_psd().unwrap();
        assert_eq!(r, m);
    }

    #[test]
    fn inv_sqrt_diagonal() {
        let m = SymmetricMatrix::new(2, vec![4.0, 0.0, 0.0, 9.0]).unwrap();
        let r = m.inv_sqrt_psd().unwrap();
        assert!((r.get(0, 0) - 0.5).abs() < 1e-12);
        assert!((r.get(1, 1) - 1.0 / 3.0).abs() < 1e-12);
        assert!(r.get(0, 1).abs() < 1e-12);
    }

    #[test]
    fn inv_sqrt_squares_to_inverse() {
        for seed in 10..13u64 {
            // build a PD matrix as A A^T + I
            let a = random_symmetric(5, seed);
            let raw = a.multiply_raw(&a).unwrap();
            let mut entries = raw;
            for i in 0..5 {
                entries[i * 5 + i] += 1.0;
            }
            let m = SymmetricMatrix::new(5, entries).unwrap();
            let r = m.inv_sqrt_psd().unwrap();
            // R * R * M should be the identity
            let rr = SymmetricMatrix::new(5, r.multiply_raw(&r).unwrap()).unwrap();
            let should_be_identity = rr.multiply_raw(&m).unwrap();
            for i in 0..5 {
                for j in 0..5 {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (should_be_identity[i * 5 + j] - expected).abs() < 1e-8,
                        "({i},{j}) -> {}",
                        should_be_identity[i * 5 + j]
                    );
                }
            }
            // R commutes with M
            let rm = r.multiply_raw(&m).unwrap();
            let mr = m.multiply_raw(&r).unwrap();
            for (x, y) in rm.iter().zip(&mr) {
                assert!((x - y).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn inv_sqrt_rejects_semidefinite() {
        let m = SymmetricMatrix::new(2, vec![1.0, -1.0, -1.0, 1.0]).unwrap();
        match m.inv_sqrt_psd() {
            Err(crate::error::Error::Numeric(_)) => {}
            other => panic!("expected numeric domain error, got {other:?}"),
        }
    }

    #[test]
    fn constructor_validation() {
        assert!(SymmetricMatrix::new(2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(SymmetricMatrix::new(2, vec![1.0, 2.0, 2.5, 1.0]).is_err());
        assert!(SymmetricMatrix::new(2, vec![1.0, f64::NAN, f64::NAN, 1.0]).is_err());
    }
}
