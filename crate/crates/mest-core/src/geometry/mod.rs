//! Points, tangent vectors and geodesic primitives for the supported spaces.
//!
//! Supported spaces: Euclidean space, round spheres (curvature κ > 0,
//! radius 1/√κ), hyperbolic spaces in the hyperboloid model (κ < 0),
//! symmetric positive-definite matrices under the affine-invariant and the
//! Bures–Wasserstein metrics, and weighted metric trees.
//!
//! All operations are pure functions of their inputs; values are freely
//! shareable across threads.

pub mod euclidean;
pub mod hyperbolic;
pub mod linalg;
pub mod sphere;
pub mod spd;
pub mod tree;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use tree::{TreeEdge, TreeSpec};

/// Tolerance for point/tangent encoding invariants.
pub const POINT_TOL: f64 = 1e-9;
/// Maximal clamp applied to arccos/arccosh arguments before erroring out.
pub const ARG_CLAMP: f64 = 1e-12;
/// Fraction of the sphere cut-locus distance admitted by the guard.
pub const SPHERE_GUARD_FRAC: f64 = 0.99;

/// A point of a space, encoded as a flat coordinate vector.
///
/// Encodings: ambient vector for Euclidean/Sphere/Hyperbolic, row-major
/// symmetric matrix for the SPD kinds, `(edge id, offset)` for metric trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<f64>);

/// A tangent vector in the representation of its base point's space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tangent(pub Vec<f64>);

impl Point {
    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

impl Tangent {
    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn zero(dim: usize) -> Self {
        Tangent(vec![0.0; dim])
    }

    pub fn scaled(&self, s: f64) -> Self {
        Tangent(self.0.iter().map(|a| a * s).collect())
    }
}

/// Identifies one geodesic space together with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceSpec {
    Euclidean { dim: usize },
    Sphere { dim: usize, kappa: f64 },
    Hyperbolic { dim: usize, kappa: f64 },
    SpdAffine { dim: usize },
    SpdBuresWasserstein { dim: usize, spectral_floor: f64 },
    MetricTree { tree: TreeSpec },
}

// Flat vector helpers shared by the ambient-coordinate spaces.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn scaled(x: &[f64], alpha: f64) -> Vec<f64> {
    x.iter().map(|v| v * alpha).collect()
}

/// Clamps `v` into `[lo, hi]`, allowing overshoot up to [`ARG_CLAMP`].
pub(crate) fn clamp_arg(v: f64, lo: f64, hi: f64) -> Result<f64> {
    if v < lo - ARG_CLAMP || v > hi + ARG_CLAMP {
        return Err(Error::Numerical(format!(
            "argument {v} outside [{lo}, {hi}] beyond clamp tolerance"
        )));
    }
    Ok(v.clamp(lo, hi))
}

impl SpaceSpec {
    /// Checks the parameter invariants of the spec itself.
    pub fn validate(&self) -> Result<()> {
        match self {
            SpaceSpec::Euclidean { dim } => {
                if *dim == 0 {
                    return Err(Error::InvalidSpace("Euclidean dim must be positive".into()));
                }
            }
            SpaceSpec::Sphere { dim, kappa } => {
                if *dim < 2 {
                    return Err(Error::InvalidSpace("Sphere needs ambient dim >= 2".into()));
                }
                if !(*kappa > 0.0) {
                    return Err(Error::InvalidSpace("Sphere requires kappa > 0".into()));
                }
            }
            SpaceSpec::Hyperbolic { dim, kappa } => {
                if *dim < 2 {
                    return Err(Error::InvalidSpace("Hyperbolic needs ambient dim >= 2".into()));
                }
                if !(*kappa < 0.0) {
                    return Err(Error::InvalidSpace("Hyperbolic requires kappa < 0".into()));
                }
            }
            SpaceSpec::SpdAffine { dim } | SpaceSpec::SpdBuresWasserstein { dim, .. } => {
                let p = (*dim as f64).sqrt().round() as usize;
                if p == 0 || p * p != *dim {
                    return Err(Error::InvalidSpace(format!(
                        "SPD dim must be a perfect square p*p, got {dim}"
                    )));
                }
                if let SpaceSpec::SpdBuresWasserstein { spectral_floor, .. } = self {
                    if !(*spectral_floor > 0.0) {
                        return Err(Error::InvalidSpace("spectral_floor must be positive".into()));
                    }
                }
            }
            SpaceSpec::MetricTree { tree } => tree.validate()?,
        }
        Ok(())
    }

    /// Length of the flat coordinate encoding of points.
    pub fn ambient_dim(&self) -> usize {
        match self {
            SpaceSpec::Euclidean { dim }
            | SpaceSpec::Sphere { dim, .. }
            | SpaceSpec::Hyperbolic { dim, .. }
            | SpaceSpec::SpdAffine { dim }
            | SpaceSpec::SpdBuresWasserstein { dim, .. } => *dim,
            SpaceSpec::MetricTree { .. } => 2,
        }
    }

    /// Matrix side length for the SPD kinds.
    pub(crate) fn spd_p(&self) -> usize {
        (self.ambient_dim() as f64).sqrt().round() as usize
    }

    /// Intrinsic dimension of tangent spaces. Errors on metric trees.
    pub fn tangent_dim(&self) -> Result<usize> {
        match self {
            SpaceSpec::Euclidean { dim } => Ok(*dim),
            SpaceSpec::Sphere { dim, .. } | SpaceSpec::Hyperbolic { dim, .. } => Ok(dim - 1),
            SpaceSpec::SpdAffine { .. } | SpaceSpec::SpdBuresWasserstein { .. } => {
                let p = self.spd_p();
                Ok(p * (p + 1) / 2)
            }
            SpaceSpec::MetricTree { .. } => Err(Error::Unsupported(
                "metric trees have no global tangent dimension".into(),
            )),
        }
    }

    /// A canonical base point, used for sampling and self tests.
    pub fn origin(&self) -> Point {
        match self {
            SpaceSpec::Euclidean { dim } => Point(vec![0.0; *dim]),
            SpaceSpec::Sphere { dim, kappa } => {
                let mut c = vec![0.0; *dim];
                c[0] = 1.0 / kappa.sqrt();
                Point(c)
            }
            SpaceSpec::Hyperbolic { dim, kappa } => {
                let mut c = vec![0.0; *dim];
                c[dim - 1] = 1.0 / (-kappa).sqrt();
                Point(c)
            }
            SpaceSpec::SpdAffine { .. } => {
                let p = self.spd_p();
                Point(identity_coords(p, 1.0))
            }
            SpaceSpec::SpdBuresWasserstein { spectral_floor, .. } => {
                let p = self.spd_p();
                Point(identity_coords(p, spectral_floor + 1.0))
            }
            SpaceSpec::MetricTree { tree } => Point(vec![0.0, 0.5 * tree.edges[0].length.min(1.0)]),
        }
    }

    /// Verifies that `x` is a valid point encoding for this space.
    pub fn check_point(&self, x: &Point) -> Result<()> {
        if x.0.len() != self.ambient_dim() {
            return Err(Error::SpaceMismatch(format!(
                "point has {} coordinates, space expects {}",
                x.0.len(),
                self.ambient_dim()
            )));
        }
        match self {
            SpaceSpec::Euclidean { .. } => Ok(()),
            SpaceSpec::Sphere { kappa, .. } => sphere::check_point(*kappa, &x.0),
            SpaceSpec::Hyperbolic { kappa, .. } => hyperbolic::check_point(*kappa, &x.0),
            SpaceSpec::SpdAffine { .. } => spd::check_point_affine(self.spd_p(), &x.0),
            SpaceSpec::SpdBuresWasserstein { spectral_floor, .. } => {
                spd::check_point_bw(self.spd_p(), *spectral_floor, &x.0)
            }
            SpaceSpec::MetricTree { tree } => tree.check_point(&x.0),
        }
    }

    /// Verifies that `v` is a valid tangent encoding at base point `x`.
    pub fn check_tangent(&self, x: &Point, v: &Tangent) -> Result<()> {
        self.check_point(x)?;
        if v.0.len() != self.ambient_dim() {
            return Err(Error::SpaceMismatch(format!(
                "tangent has {} coordinates, space expects {}",
                v.0.len(),
                self.ambient_dim()
            )));
        }
        match self {
            SpaceSpec::Euclidean { .. } => Ok(()),
            SpaceSpec::Sphere { .. } => {
                let scale = 1.0 + dot(&v.0, &v.0).sqrt();
                if dot(&x.0, &v.0).abs() > POINT_TOL * scale * (1.0 + dot(&x.0, &x.0).sqrt()) {
                    Err(Error::InvalidTangent("not orthogonal to base point".into()))
                } else {
                    Ok(())
                }
            }
            SpaceSpec::Hyperbolic { .. } => {
                let scale = 1.0 + hyperbolic::minkowski(&v.0, &v.0).abs().sqrt();
                if hyperbolic::minkowski(&x.0, &v.0).abs()
                    > POINT_TOL * scale * (1.0 + hyperbolic::minkowski(&x.0, &x.0).abs().sqrt())
                {
                    Err(Error::InvalidTangent(
                        "not Minkowski-orthogonal to base point".into(),
                    ))
                } else {
                    Ok(())
                }
            }
            SpaceSpec::SpdAffine { .. } | SpaceSpec::SpdBuresWasserstein { .. } => {
                spd::check_symmetric(self.spd_p(), &v.0)
            }
            SpaceSpec::MetricTree { .. } => {
                Err(Error::Unsupported("metric trees have no tangent vectors".into()))
            }
        }
    }

    /// Geodesic distance between two points of this space.
    pub fn dist(&self, x: &Point, y: &Point) -> Result<f64> {
        self.check_point(x)?;
        self.check_point(y)?;
        match self {
            SpaceSpec::Euclidean { .. } => Ok(euclidean::dist(&x.0, &y.0)),
            SpaceSpec::Sphere { kappa, .. } => sphere::dist(*kappa, &x.0, &y.0),
            SpaceSpec::Hyperbolic { kappa, .. } => hyperbolic::dist(*kappa, &x.0, &y.0),
            SpaceSpec::SpdAffine { .. } => spd::dist_affine(self.spd_p(), &x.0, &y.0),
            SpaceSpec::SpdBuresWasserstein { .. } => spd::dist_bw(self.spd_p(), &x.0, &y.0),
            SpaceSpec::MetricTree { tree } => tree.dist(&x.0, &y.0),
        }
    }

    /// Riemannian exponential map at `x`.
    pub fn exp(&self, x: &Point, v: &Tangent) -> Result<Point> {
        self.check_tangent(x, v)?;
        let n = self.norm(x, v)?;
        if let Some(g) = self.injectivity_guard() {
            if n >= g {
                return Err(Error::GuardViolation(format!(
                    "tangent norm {n} exceeds guard {g}"
                )));
            }
        }
        match self {
            SpaceSpec::Euclidean { .. } => Ok(Point(euclidean::exp(&x.0, &v.0))),
            SpaceSpec::Sphere { kappa, .. } => Ok(Point(sphere::exp(*kappa, &x.0, &v.0))),
            SpaceSpec::Hyperbolic { kappa, .. } => Ok(Point(hyperbolic::exp(*kappa, &x.0, &v.0))),
            SpaceSpec::SpdAffine { .. } => spd::exp_affine(self.spd_p(), &x.0, &v.0),
            SpaceSpec::SpdBuresWasserstein { spectral_floor, .. } => {
                spd::exp_bw(self.spd_p(), *spectral_floor, &x.0, &v.0)
            }
            SpaceSpec::MetricTree { .. } => Err(Error::Unsupported(
                "exponential map is not defined on metric trees".into(),
            )),
        }
    }

    /// Riemannian logarithm: the tangent at `x` pointing to `y`.
    pub fn log(&self, x: &Point, y: &Point) -> Result<Tangent> {
        self.check_point(x)?;
        self.check_point(y)?;
        self.guard_pair(x, y)?;
        match self {
            SpaceSpec::Euclidean { .. } => Ok(Tangent(euclidean::log(&x.0, &y.0))),
            SpaceSpec::Sphere { kappa, .. } => sphere::log(*kappa, &x.0, &y.0).map(Tangent),
            SpaceSpec::Hyperbolic { kappa, .. } => hyperbolic::log(*kappa, &x.0, &y.0).map(Tangent),
            SpaceSpec::SpdAffine { .. } => spd::log_affine(self.spd_p(), &x.0, &y.0).map(Tangent),
            SpaceSpec::SpdBuresWasserstein { .. } => {
                spd::log_bw(self.spd_p(), &x.0, &y.0).map(Tangent)
            }
            SpaceSpec::MetricTree { .. } => Err(Error::Unsupported(
                "logarithm map is not defined on metric trees".into(),
            )),
        }
    }

    /// Parallel transport of `v` from `x` to `y` along the minimizing geodesic.
    pub fn transport(&self, x: &Point, y: &Point, v: &Tangent) -> Result<Tangent> {
        self.check_tangent(x, v)?;
        self.check_point(y)?;
        self.guard_pair(x, y)?;
        match self {
            SpaceSpec::Euclidean { .. } => Ok(v.clone()),
            SpaceSpec::Sphere { kappa, .. } => {
                sphere::transport(*kappa, &x.0, &y.0, &v.0).map(Tangent)
            }
            SpaceSpec::Hyperbolic { kappa, .. } => {
                hyperbolic::transport(*kappa, &x.0, &y.0, &v.0).map(Tangent)
            }
            SpaceSpec::SpdAffine { .. } => {
                spd::transport_affine(self.spd_p(), &x.0, &y.0, &v.0).map(Tangent)
            }
            SpaceSpec::SpdBuresWasserstein { .. } => Err(Error::Unsupported(
                "parallel transport has no closed form under the Bures-Wasserstein metric".into(),
            )),
            SpaceSpec::MetricTree { .. } => Err(Error::Unsupported(
                "parallel transport is not defined on metric trees".into(),
            )),
        }
    }

    /// Riemannian inner product of two tangents based at `x`.
    pub fn inner(&self, x: &Point, u: &Tangent, v: &Tangent) -> Result<f64> {
        self.check_tangent(x, u)?;
        self.check_tangent(x, v)?;
        match self {
            SpaceSpec::Euclidean { .. } | SpaceSpec::Sphere { .. } => Ok(dot(&u.0, &v.0)),
            SpaceSpec::Hyperbolic { .. } => Ok(hyperbolic::minkowski(&u.0, &v.0)),
            SpaceSpec::SpdAffine { .. } => spd::inner_affine(self.spd_p(), &x.0, &u.0, &v.0),
            SpaceSpec::SpdBuresWasserstein { .. } => {
                spd::inner_bw(self.spd_p(), &x.0, &u.0, &v.0)
            }
            SpaceSpec::MetricTree { .. } => {
                Err(Error::Unsupported("metric trees have no tangent vectors".into()))
            }
        }
    }

    /// Norm of a tangent vector at `x`.
    pub fn norm(&self, x: &Point, v: &Tangent) -> Result<f64> {
        Ok(self.inner(x, v, v)?.max(0.0).sqrt())
    }

    /// Point at parameter `t` on a minimizing geodesic from `x` to `y`.
    ///
    /// When the geodesic is non-unique (antipodal sphere points), one
    /// geodesic is selected deterministically; `geodesic_unique` exposes the
    /// multiplicity flag.
    pub fn geodesic_point(&self, x: &Point, y: &Point, t: f64) -> Result<Point> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidConfig(format!("t={t} outside [0,1]")));
        }
        match self {
            SpaceSpec::MetricTree { tree } => {
                self.check_point(x)?;
                self.check_point(y)?;
                tree.geodesic_point(&x.0, &y.0, t).map(Point)
            }
            SpaceSpec::Sphere { kappa, .. } => {
                self.check_point(x)?;
                self.check_point(y)?;
                sphere::geodesic_point(*kappa, &x.0, &y.0, t).map(Point)
            }
            _ => {
                let v = self.log(x, y)?;
                self.exp(x, &v.scaled(t))
            }
        }
    }

    /// Whether the minimizing geodesic from `x` to `y` is unique.
    pub fn geodesic_unique(&self, x: &Point, y: &Point) -> Result<bool> {
        match self {
            SpaceSpec::Sphere { kappa, .. } => {
                let d = self.dist(x, y)?;
                Ok(d < std::f64::consts::PI / kappa.sqrt() - 1e-12)
            }
            _ => Ok(true),
        }
    }

    /// Injectivity guard radius for exp/log, if bounded.
    pub fn injectivity_guard(&self) -> Option<f64> {
        match self {
            SpaceSpec::Sphere { kappa, .. } => {
                Some(SPHERE_GUARD_FRAC * std::f64::consts::PI / kappa.sqrt())
            }
            _ => None,
        }
    }

    fn guard_pair(&self, x: &Point, y: &Point) -> Result<()> {
        if let Some(g) = self.injectivity_guard() {
            let d = self.dist(x, y)?;
            if d >= g {
                return Err(Error::GuardViolation(format!(
                    "distance {d} exceeds guard {g} (near cut locus)"
                )));
            }
        }
        Ok(())
    }

    /// Deterministic orthonormal basis of the tangent space at `x`.
    pub fn tangent_basis(&self, x: &Point) -> Result<Vec<Tangent>> {
        self.check_point(x)?;
        let k = self.tangent_dim()?;
        match self {
            SpaceSpec::Euclidean { dim } => Ok((0..*dim)
                .map(|i| {
                    let mut v = vec![0.0; *dim];
                    v[i] = 1.0;
                    Tangent(v)
                })
                .collect()),
            SpaceSpec::SpdAffine { .. } => {
                Ok(spd::tangent_basis_affine(self.spd_p(), &x.0)?
                    .into_iter()
                    .map(Tangent)
                    .collect())
            }
            _ => {
                // Gram-Schmidt over projected ambient basis vectors, under
                // the space's own inner product.
                let dim = self.ambient_dim();
                let mut basis: Vec<Tangent> = Vec::with_capacity(k);
                for i in 0..dim {
                    if basis.len() == k {
                        break;
                    }
                    let mut cand = vec![0.0; dim];
                    cand[i] = 1.0;
                    let mut cand = self.project_to_tangent(x, &cand)?;
                    for b in &basis {
                        let c = self.inner(x, &Tangent(cand.clone()), b)?;
                        axpy(&mut cand, -c, &b.0);
                    }
                    let t = Tangent(cand);
                    let n = self.norm(x, &t)?;
                    if n > 1e-8 {
                        basis.push(t.scaled(1.0 / n));
                    }
                }
                if basis.len() != k {
                    return Err(Error::Numerical(
                        "failed to build a full tangent basis".into(),
                    ));
                }
                Ok(basis)
            }
        }
    }

    /// Projects an ambient vector onto the tangent space at `x`.
    pub(crate) fn project_to_tangent(&self, x: &Point, v: &[f64]) -> Result<Vec<f64>> {
        match self {
            SpaceSpec::Euclidean { .. } => Ok(v.to_vec()),
            SpaceSpec::Sphere { .. } => {
                let xx = dot(&x.0, &x.0);
                let mut out = v.to_vec();
                axpy(&mut out, -dot(v, &x.0) / xx, &x.0);
                Ok(out)
            }
            SpaceSpec::Hyperbolic { .. } => {
                let xx = hyperbolic::minkowski(&x.0, &x.0);
                let mut out = v.to_vec();
                axpy(&mut out, -hyperbolic::minkowski(v, &x.0) / xx, &x.0);
                Ok(out)
            }
            SpaceSpec::SpdAffine { .. } | SpaceSpec::SpdBuresWasserstein { .. } => {
                let p = self.spd_p();
                let m = linalg::mat_from_coords(p, v)?;
                Ok(linalg::coords_from_mat(&linalg::symmetrize(&m)))
            }
            SpaceSpec::MetricTree { .. } => {
                Err(Error::Unsupported("metric trees have no tangent vectors".into()))
            }
        }
    }

    /// Reconstructs a tangent from coordinates in the basis of `tangent_basis`.
    pub fn tangent_from_basis_coords(&self, basis: &[Tangent], coords: &[f64]) -> Tangent {
        let dim = self.ambient_dim();
        let mut v = vec![0.0; dim];
        for (c, b) in coords.iter().zip(basis) {
            axpy(&mut v, *c, &b.0);
        }
        Tangent(v)
    }

    /// Coordinates of tangent `v` in an orthonormal basis at `x`.
    pub fn tangent_to_basis_coords(
        &self,
        x: &Point,
        basis: &[Tangent],
        v: &Tangent,
    ) -> Result<Vec<f64>> {
        basis.iter().map(|b| self.inner(x, v, b)).collect()
    }
}

fn identity_coords(p: usize, scale: f64) -> Vec<f64> {
    let mut c = vec![0.0; p * p];
    for i in 0..p {
        c[i * p + i] = scale;
    }
    c
}
