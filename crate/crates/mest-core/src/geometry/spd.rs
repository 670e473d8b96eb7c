//! Symmetric positive-definite matrices under two metrics.
//!
//! Affine-invariant: d(A,B) = ||log(A^{-1/2} B A^{-1/2})||_F, a Cartan-
//! Hadamard geometry with closed-form exp/log/transport.
//!
//! Bures-Wasserstein: d(A,B) is the 2-Wasserstein distance between centered
//! Gaussians with these covariances. Tangent vectors at A are symmetric
//! matrices U parameterizing the optimal-transport map, with
//! exp_A(U) = (I+U) A (I+U) and <U,V>_A = tr(U A V). The space is restricted
//! to spectra above a floor lambda_0, where a curvature upper bound holds.

use nalgebra::DMatrix;

use super::linalg::*;
use super::POINT_TOL;
use crate::error::{Error, Result};

pub fn check_symmetric(p: usize, coords: &[f64]) -> Result<()> {
    let m = mat_from_coords(p, coords)?;
    let defect = symmetry_defect(&m);
    if defect > POINT_TOL * (1.0 + m.norm()) {
        return Err(Error::InvalidPoint(format!(
            "matrix not symmetric, defect {defect}"
        )));
    }
    Ok(())
}

pub fn check_point_affine(p: usize, coords: &[f64]) -> Result<()> {
    check_symmetric(p, coords)?;
    let m = mat_from_coords(p, coords)?;
    let lmin = min_eigenvalue(&m);
    if lmin <= 0.0 {
        return Err(Error::InvalidPoint(format!(
            "matrix not positive definite, min eigenvalue {lmin}"
        )));
    }
    Ok(())
}

pub fn check_point_bw(p: usize, floor: f64, coords: &[f64]) -> Result<()> {
    check_symmetric(p, coords)?;
    let m = mat_from_coords(p, coords)?;
    let lmin = min_eigenvalue(&m);
    if lmin < floor - POINT_TOL {
        return Err(Error::InvalidPoint(format!(
            "min eigenvalue {lmin} below spectral floor {floor}"
        )));
    }
    Ok(())
}

/// Orders an argument pair lexicographically so that symmetric quantities
/// computed from one side round identically for (x, y) and (y, x).
fn canonical_pair<'a>(x: &'a [f64], y: &'a [f64]) -> (&'a [f64], &'a [f64]) {
    for (a, b) in x.iter().zip(y) {
        if a < b {
            return (x, y);
        }
        if a > b {
            return (y, x);
        }
    }
    (x, y)
}

pub fn dist_affine(p: usize, a: &[f64], b: &[f64]) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (a, b) = canonical_pair(a, b);
    let a = mat_from_coords(p, a)?;
    let b = mat_from_coords(p, b)?;
    let ai = inv_sqrtm(&a)?;
    let w = symmetrize(&(&ai * b * &ai));
    Ok(logm(&w)?.norm())
}

pub fn exp_affine(p: usize, a: &[f64], v: &[f64]) -> Result<super::Point> {
    let am = mat_from_coords(p, a)?;
    let vm = mat_from_coords(p, v)?;
    let s = sqrtm(&am)?;
    let si = inv_sqrtm(&am)?;
    let inner = symmetrize(&(&si * vm * &si));
    let e = expm(&inner)?;
    let out = symmetrize(&(&s * e * &s));
    Ok(super::Point(coords_from_mat(&out)))
}

pub fn log_affine(p: usize, a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let am = mat_from_coords(p, a)?;
    let bm = mat_from_coords(p, b)?;
    let s = sqrtm(&am)?;
    let si = inv_sqrtm(&am)?;
    let w = symmetrize(&(&si * bm * &si));
    let l = logm(&w)?;
    let out = symmetrize(&(&s * l * &s));
    Ok(coords_from_mat(&out))
}

pub fn inner_affine(p: usize, a: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
    let am = mat_from_coords(p, a)?;
    let um = mat_from_coords(p, u)?;
    let vm = mat_from_coords(p, v)?;
    let ai = invm(&am)?;
    Ok((&ai * um * &ai * vm).trace())
}

/// Transport along the affine-invariant geodesic: V -> E V E^T with
/// E = A^{1/2} (A^{-1/2} B A^{-1/2})^{1/2} A^{-1/2}.
pub fn transport_affine(p: usize, a: &[f64], b: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let am = mat_from_coords(p, a)?;
    let bm = mat_from_coords(p, b)?;
    let vm = mat_from_coords(p, v)?;
    let s = sqrtm(&am)?;
    let si = inv_sqrtm(&am)?;
    let w = symmetrize(&(&si * bm * &si));
    let e = &s * sqrtm(&w)? * &si;
    let out = symmetrize(&(&e * vm * e.transpose()));
    Ok(coords_from_mat(&out))
}

/// Geometric mean A # B = A^{1/2} (A^{-1/2} B A^{-1/2})^{1/2} A^{1/2},
/// the affine-invariant geodesic midpoint.
pub fn geometric_mean(p: usize, a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let am = mat_from_coords(p, a)?;
    let bm = mat_from_coords(p, b)?;
    let s = sqrtm(&am)?;
    let si = inv_sqrtm(&am)?;
    let w = symmetrize(&(&si * bm * &si));
    let out = symmetrize(&(&s * sqrtm(&w)? * &s));
    Ok(coords_from_mat(&out))
}

/// Orthonormal tangent basis at A: A^{1/2} B_k A^{1/2} for the canonical
/// Frobenius-orthonormal symmetric basis B_k (diagonal units first, then
/// symmetrized off-diagonal pairs in lexicographic order).
pub fn tangent_basis_affine(p: usize, a: &[f64]) -> Result<Vec<Vec<f64>>> {
    let am = mat_from_coords(p, a)?;
    let s = sqrtm(&am)?;
    let mut out = Vec::with_capacity(p * (p + 1) / 2);
    let mut push = |b: DMatrix<f64>| {
        let m = symmetrize(&(&s * b * &s));
        out.push(coords_from_mat(&m));
    };
    for i in 0..p {
        let mut b = DMatrix::zeros(p, p);
        b[(i, i)] = 1.0;
        push(b);
    }
    let c = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..p {
        for j in (i + 1)..p {
            let mut b = DMatrix::zeros(p, p);
            b[(i, j)] = c;
            b[(j, i)] = c;
            push(b);
        }
    }
    Ok(out)
}

pub fn dist_bw(p: usize, a: &[f64], b: &[f64]) -> Result<f64> {
    // d^2 = tr((T - I) A (T - I)) with T the optimal-transport map; unlike
    // the trace difference tr(A) + tr(B) - 2 tr((A^{1/2} B A^{1/2})^{1/2}),
    // this quadratic form does not cancel for nearby points.
    if a == b {
        return Ok(0.0);
    }
    let (a, b) = canonical_pair(a, b);
    let am = mat_from_coords(p, a)?;
    let bm = mat_from_coords(p, b)?;
    let u = ot_map(&am, &bm)? - DMatrix::identity(p, p);
    let d2 = (&u * &am * &u).trace();
    Ok(d2.max(0.0).sqrt())
}

/// Optimal-transport map from A to B: T = A^{-1/2} (A^{1/2} B A^{1/2})^{1/2} A^{-1/2}.
fn ot_map(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let s = sqrtm(a)?;
    let si = inv_sqrtm(a)?;
    let cross = sqrtm(&symmetrize(&(&s * b * &s)))?;
    Ok(symmetrize(&(&si * cross * &si)))
}

pub fn exp_bw(p: usize, floor: f64, a: &[f64], v: &[f64]) -> Result<super::Point> {
    let am = mat_from_coords(p, a)?;
    let vm = mat_from_coords(p, v)?;
    let mut t = DMatrix::identity(p, p);
    t += &vm;
    let out = symmetrize(&(&t * &am * t.transpose()));
    let lmin = min_eigenvalue(&out);
    if lmin < floor - POINT_TOL {
        return Err(Error::GuardViolation(format!(
            "step leaves the spectral floor: endpoint min eigenvalue {lmin} < {floor}"
        )));
    }
    Ok(super::Point(coords_from_mat(&out)))
}

pub fn log_bw(p: usize, a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let am = mat_from_coords(p, a)?;
    let bm = mat_from_coords(p, b)?;
    let t = ot_map(&am, &bm)?;
    let out = t - DMatrix::identity(p, p);
    Ok(coords_from_mat(&out))
}

pub fn inner_bw(p: usize, a: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
    let am = mat_from_coords(p, a)?;
    let um = mat_from_coords(p, u)?;
    let vm = mat_from_coords(p, v)?;
    Ok((um * am * vm).trace())
}
