//! Small dense symmetric-matrix helpers used by the SPD geometries.
//!
//! Every matrix function goes through a symmetric eigendecomposition and
//! every product is re-symmetrized, which keeps iterated operations from
//! drifting off the symmetric manifold.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Reads a row-major length-p² coordinate slice into a matrix.
pub fn mat_from_coords(p: usize, coords: &[f64]) -> Result<DMatrix<f64>> {
    if coords.len() != p * p {
        return Err(Error::InvalidPoint(format!(
            "expected {} coordinates for a {p}x{p} matrix, got {}",
            p * p,
            coords.len()
        )));
    }
    Ok(DMatrix::from_row_slice(p, p, coords))
}

/// Row-major coordinates of a matrix.
pub fn coords_from_mat(m: &DMatrix<f64>) -> Vec<f64> {
    let (r, c) = m.shape();
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn symmetry_defect(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).norm() * 0.5
}

/// Eigendecomposition of a symmetric matrix: (eigenvalues, eigenvectors).
pub fn sym_eig(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let se = symmetrize(m).symmetric_eigen();
    let vals = se.eigenvalues.iter().copied().collect();
    (vals, se.eigenvectors)
}

/// Applies `f` to the spectrum of a symmetric matrix. The result is
/// re-symmetrized.
pub fn sym_func(m: &DMatrix<f64>, f: impl Fn(f64) -> Result<f64>) -> Result<DMatrix<f64>> {
    let (vals, q) = sym_eig(m);
    let mapped: Result<Vec<f64>> = vals.iter().map(|&l| f(l)).collect();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(mapped?));
    Ok(symmetrize(&(&q * d * q.transpose())))
}

pub fn sqrtm(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    sym_func(m, |l| {
        if l < -1e-10 {
            Err(Error::Numerical(format!("sqrt of eigenvalue {l}")))
        } else {
            Ok(l.max(0.0).sqrt())
        }
    })
}

pub fn inv_sqrtm(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    sym_func(m, |l| {
        if l <= 0.0 {
            Err(Error::InvalidPoint(format!("non-positive eigenvalue {l}")))
        } else {
            Ok(1.0 / l.sqrt())
        }
    })
}

pub fn logm(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    sym_func(m, |l| {
        if l <= 0.0 {
            Err(Error::InvalidPoint(format!("log of eigenvalue {l}")))
        } else {
            Ok(l.ln())
        }
    })
}

pub fn expm(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    sym_func(m, |l| Ok(l.exp()))
}

pub fn invm(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    sym_func(m, |l| {
        if l.abs() < 1e-300 {
            Err(Error::Numerical("singular matrix".into()))
        } else {
            Ok(1.0 / l)
        }
    })
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let (vals, _) = sym_eig(m);
    vals.iter().copied().fold(f64::INFINITY, f64::min)
}
