//! Model-space comparison machinery: comparison triangles in the constant
//! curvature plane M_kappa, curvature upper-bound (thinness) certification,
//! and the strong-convexity modulus of half the squared distance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::geometry::{Point, SpaceSpec};

/// Excess up to this value counts as satisfying the comparison inequality;
/// distances run through inverse trig with ~1e-12 argument clamps.
pub const CAT_TOL: f64 = 1e-8;

/// Side lengths of a geodesic triangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangleSides {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl TriangleSides {
    pub fn perimeter(&self) -> f64 {
        self.a + self.b + self.c
    }

    pub fn satisfies_triangle_inequality(&self, tol: f64) -> bool {
        self.a <= self.b + self.c + tol
            && self.b <= self.a + self.c + tol
            && self.c <= self.a + self.b + tol
    }
}

/// Offending parameter pair of a failed comparison check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatWitness {
    pub s: f64,
    pub t: f64,
}

/// Outcome of a thinness check against the model space of curvature `kappa`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatReport {
    pub kappa: f64,
    pub n_pairs_checked: usize,
    /// Largest d(x, y) - d_kappa(xbar, ybar) found on the sampling grid.
    pub max_excess: f64,
    pub witness: Option<CatWitness>,
}

/// Diameter of the model space: infinite for kappa <= 0, pi/sqrt(kappa) else.
pub fn model_diameter(kappa: f64) -> f64 {
    if kappa <= 0.0 {
        f64::INFINITY
    } else {
        std::f64::consts::PI / kappa.sqrt()
    }
}

/// The 2-dimensional model space of curvature `kappa` as a [`SpaceSpec`].
pub fn model_space(kappa: f64) -> SpaceSpec {
    if kappa > 0.0 {
        SpaceSpec::Sphere { dim: 3, kappa }
    } else if kappa < 0.0 {
        SpaceSpec::Hyperbolic { dim: 3, kappa }
    } else {
        SpaceSpec::Euclidean { dim: 2 }
    }
}

/// Strong-convexity modulus of (1/2) d^2(., x0) on a CAT(kappa) space of
/// diameter D: sqrt(kappa) D / tan(sqrt(kappa) D) for kappa > 0, 1 otherwise.
pub fn strong_convexity_alpha(diameter: f64, kappa: f64) -> Result<f64> {
    if !(diameter > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "diameter must be positive, got {diameter}"
        )));
    }
    if kappa <= 0.0 {
        return Ok(1.0);
    }
    if diameter >= model_diameter(kappa) / 2.0 {
        return Err(Error::InvalidConfig(format!(
            "diameter {diameter} must be below D_kappa/2 = {}",
            model_diameter(kappa) / 2.0
        )));
    }
    let x = kappa.sqrt() * diameter;
    Ok(x / x.tan())
}

/// Canonical comparison triangle in M_kappa with side lengths
/// `c = d(x, y)` opposite the third vertex, `b = d(x, z)`, `a = d(y, z)`.
///
/// The first vertex sits at the model origin, the second along the first
/// basis direction, the third in the upper half plane.
pub fn comparison_triangle(kappa: f64, sides: &TriangleSides) -> Result<[Point; 3]> {
    if sides.a < 0.0 || sides.b < 0.0 || sides.c < 0.0 {
        return Err(Error::InvalidConfig("negative side length".into()));
    }
    if !sides.satisfies_triangle_inequality(1e-12) {
        return Err(Error::InvalidConfig(format!(
            "side lengths ({}, {}, {}) violate the triangle inequality",
            sides.a, sides.b, sides.c
        )));
    }
    if sides.perimeter() >= 2.0 * model_diameter(kappa) {
        return Err(Error::InvalidConfig(format!(
            "perimeter {} not below 2 D_kappa = {}",
            sides.perimeter(),
            2.0 * model_diameter(kappa)
        )));
    }
    let model = model_space(kappa);
    let origin = model.origin();
    let basis = model.tangent_basis(&origin)?;
    let (e1, e2) = (&basis[0], &basis[1]);
    let cos_angle = vertex_angle_cos(kappa, sides)?;
    let sin_angle = (1.0 - cos_angle * cos_angle).max(0.0).sqrt();
    let x = origin.clone();
    let y = model.exp(&origin, &e1.scaled(sides.c))?;
    let dir: Vec<f64> = e1
        .0
        .iter()
        .zip(&e2.0)
        .map(|(u, v)| cos_angle * u + sin_angle * v)
        .collect();
    let z = model.exp(&origin, &crate::geometry::Tangent(dir).scaled(sides.b))?;
    Ok([x, y, z])
}

/// Cosine of the angle at the first vertex, via the law of cosines of M_kappa.
fn vertex_angle_cos(kappa: f64, sides: &TriangleSides) -> Result<f64> {
    let (a, b, c) = (sides.a, sides.b, sides.c);
    if b == 0.0 || c == 0.0 {
        return Ok(1.0);
    }
    let raw = if kappa == 0.0 {
        (b * b + c * c - a * a) / (2.0 * b * c)
    } else if kappa > 0.0 {
        let r = 1.0 / kappa.sqrt();
        let (sa, sb, sc) = (a / r, b / r, c / r);
        let denom = sb.sin() * sc.sin();
        if denom == 0.0 {
            return Ok(1.0);
        }
        (sa.cos() - sb.cos() * sc.cos()) / denom
    } else {
        let r = 1.0 / (-kappa).sqrt();
        let (sa, sb, sc) = (a / r, b / r, c / r);
        (sb.cosh() * sc.cosh() - sa.cosh()) / (sb.sinh() * sc.sinh())
    };
    if raw < -1.0 - 1e-9 || raw > 1.0 + 1e-9 {
        return Err(Error::Numerical(format!(
            "infeasible side lengths: comparison angle cosine {raw}"
        )));
    }
    Ok(raw.clamp(-1.0, 1.0))
}

/// Thinness check of the triangle (x, y, z) against CAT(kappa), sampling a
/// `grid_n` x `grid_n` grid of parameter pairs on side x->y versus side x->z
/// (all three side pairings when `all_pairs` is set).
pub fn cat_check_with(
    space: &SpaceSpec,
    x: &Point,
    y: &Point,
    z: &Point,
    kappa: f64,
    grid_n: usize,
    all_pairs: bool,
) -> Result<CatReport> {
    if grid_n < 2 {
        return Err(Error::InvalidConfig("grid_n must be at least 2".into()));
    }
    let sides = TriangleSides {
        a: space.dist(y, z)?,
        b: space.dist(x, z)?,
        c: space.dist(x, y)?,
    };
    if sides.perimeter() >= 2.0 * model_diameter(kappa) {
        return Err(Error::InvalidConfig(format!(
            "triangle perimeter {} too large for kappa = {kappa}",
            sides.perimeter()
        )));
    }
    for (p, q) in [(x, y), (x, z), (y, z)] {
        if !space.geodesic_unique(p, q)? {
            return Err(Error::NonUniqueGeodesic(
                "triangle side has a non-unique geodesic".into(),
            ));
        }
    }
    let model = model_space(kappa);
    let [cx, cy, cz] = comparison_triangle(kappa, &sides)?;

    let pairings: &[((&Point, &Point), (&Point, &Point), (&Point, &Point), (&Point, &Point))] =
        if all_pairs {
            &[
                ((x, y), (x, z), (&cx, &cy), (&cx, &cz)),
                ((x, y), (y, z), (&cx, &cy), (&cy, &cz)),
                ((x, z), (y, z), (&cx, &cz), (&cy, &cz)),
            ]
        } else {
            &[((x, y), (x, z), (&cx, &cy), (&cx, &cz))]
        };

    let mut max_excess = f64::NEG_INFINITY;
    let mut witness = CatWitness { s: 0.0, t: 0.0 };
    let mut n_pairs = 0;
    for (side1, side2, cside1, cside2) in pairings {
        let excesses: Vec<Result<(f64, f64, f64)>> = exec::map_indexed(grid_n * grid_n, |idx| {
            let i = idx / grid_n;
            let j = idx % grid_n;
            let s = i as f64 / (grid_n - 1) as f64;
            let t = j as f64 / (grid_n - 1) as f64;
            let p = space.geodesic_point(side1.0, side1.1, s)?;
            let q = space.geodesic_point(side2.0, side2.1, t)?;
            let cp = model.geodesic_point(cside1.0, cside1.1, s)?;
            let cq = model.geodesic_point(cside2.0, cside2.1, t)?;
            let excess = space.dist(&p, &q)? - model.dist(&cp, &cq)?;
            Ok((s, t, excess))
        });
        for r in excesses {
            let (s, t, e) = r?;
            n_pairs += 1;
            if e > max_excess {
                max_excess = e;
                witness = CatWitness { s, t };
            }
        }
    }
    Ok(CatReport {
        kappa,
        n_pairs_checked: n_pairs,
        max_excess,
        witness: (max_excess > CAT_TOL).then_some(witness),
    })
}

/// Two-side thinness check with the default pairing.
pub fn cat_check(
    space: &SpaceSpec,
    x: &Point,
    y: &Point,
    z: &Point,
    kappa: f64,
    grid_n: usize,
) -> Result<CatReport> {
    cat_check_with(space, x, y, z, kappa, grid_n, false)
}

/// Strong-convexity slack of (1/2) d^2(., x0) along the geodesic x -> y at
/// parameter t, for a configuration of diameter at most D in a CAT(kappa)
/// space. Nonnegative when the curvature bound holds.
pub fn strong_convexity_probe(
    space: &SpaceSpec,
    x0: &Point,
    x: &Point,
    y: &Point,
    t: f64,
    diameter: f64,
    kappa: f64,
) -> Result<f64> {
    let dxy = space.dist(x, y)?;
    let dx0x = space.dist(x0, x)?;
    let dx0y = space.dist(x0, y)?;
    for d in [dxy, dx0x, dx0y] {
        if d > diameter + 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "pairwise distance {d} exceeds the stated diameter {diameter}"
            )));
        }
    }
    let alpha = strong_convexity_alpha(diameter, kappa)?;
    let mid = space.geodesic_point(x, y, t)?;
    let dmid = space.dist(&mid, x0)?;
    Ok((1.0 - t) / 2.0 * dx0x * dx0x + t / 2.0 * dx0y * dx0y
        - alpha * t * (1.0 - t) / 4.0 * dxy * dxy
        - 0.5 * dmid * dmid)
}
