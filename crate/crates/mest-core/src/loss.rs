//! Convex loss profiles and their Riemannian subgradients.
//!
//! A loss `l` turns the metric into a cost `phi(z, x) = l(d(z, x))`.
//! Power(2) gives barycenters, Power(1) geometric medians, Huber an
//! interpolation between the two.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, SpaceSpec, Tangent};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossSpec {
    /// l(u) = u^p with p >= 1.
    Power { p: f64 },
    /// l(u) = u^2 for u <= c, c(2u - c) beyond.
    Huber { c: f64 },
}

impl LossSpec {
    pub fn power(p: f64) -> Self {
        LossSpec::Power { p }
    }

    pub fn huber(c: f64) -> Self {
        LossSpec::Huber { c }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LossSpec::Power { p } => {
                if !(*p >= 1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "Power loss requires p >= 1, got {p}"
                    )));
                }
            }
            LossSpec::Huber { c } => {
                if !(*c > 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "Huber loss requires c > 0, got {c}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Whether the induced cost is differentiable everywhere away from z.
    /// Power(1) and powers in (1, 2) have a kink (or unbounded curvature)
    /// at zero and take the non-smooth solver path.
    pub fn is_smooth(&self) -> bool {
        match self {
            LossSpec::Power { p } => *p >= 2.0,
            LossSpec::Huber { .. } => true,
        }
    }

    /// l(u) for u >= 0.
    pub fn value(&self, u: f64) -> Result<f64> {
        if u < 0.0 {
            return Err(Error::InvalidConfig(format!("loss argument {u} < 0")));
        }
        Ok(match self {
            LossSpec::Power { p } => u.powf(*p),
            LossSpec::Huber { c } => {
                if u <= *c {
                    u * u
                } else {
                    c * (2.0 * u - c)
                }
            }
        })
    }

    /// One element of the subdifferential of l at u. At a kink with
    /// l'(0+) > 0 this returns 0, the canonical symmetric selection.
    pub fn subderivative(&self, u: f64) -> Result<f64> {
        if u < 0.0 {
            return Err(Error::InvalidConfig(format!("loss argument {u} < 0")));
        }
        Ok(match self {
            // At u = 0 the symmetrized subdifferential contains 0 for every
            // p >= 1, so 0 is a valid selection.
            LossSpec::Power { p } => {
                if u == 0.0 {
                    0.0
                } else {
                    p * u.powf(p - 1.0)
                }
            }
            // Huber is C^1: the one-sided derivatives agree at u = c.
            LossSpec::Huber { c } => 2.0 * u.min(*c),
        })
    }
}

/// phi(z, x) = l(d(z, x)).
pub fn cost(loss: &LossSpec, space: &SpaceSpec, z: &Point, x: &Point) -> Result<f64> {
    loss.value(space.dist(z, x)?)
}

/// A measurable subgradient selection g(z, x) of phi(z, .) at x:
/// g = -l'(d) Log_x(z) / d for d > 0, the zero tangent at d = 0.
pub fn cost_subgradient(
    loss: &LossSpec,
    space: &SpaceSpec,
    z: &Point,
    x: &Point,
) -> Result<Tangent> {
    let d = space.dist(z, x)?;
    if d == 0.0 {
        return Ok(Tangent::zero(space.ambient_dim()));
    }
    let l = space.log(x, z)?;
    let f = loss.subderivative(d)?;
    Ok(l.scaled(-f / d))
}

/// Convexity slack (1-t) phi(z,x) + t phi(z,y) - phi(z, gamma(t)).
/// Nonnegative whenever the cost is geodesically convex.
pub fn convexity_probe(
    loss: &LossSpec,
    space: &SpaceSpec,
    z: &Point,
    x: &Point,
    y: &Point,
    t: f64,
) -> Result<f64> {
    if !space.geodesic_unique(x, y)? {
        return Err(Error::NonUniqueGeodesic(
            "convexity probe requires a unique geodesic".into(),
        ));
    }
    let mid = space.geodesic_point(x, y, t)?;
    Ok((1.0 - t) * cost(loss, space, z, x)? + t * cost(loss, space, z, y)?
        - cost(loss, space, z, &mid)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn huber_branches() {
        let h = LossSpec::huber(1.0);
        assert_relative_eq!(h.value(0.5).unwrap(), 0.25);
        assert_relative_eq!(h.value(2.0).unwrap(), 3.0);
        assert_relative_eq!(h.subderivative(2.0).unwrap(), 2.0);
        assert_relative_eq!(h.subderivative(1.0).unwrap(), 2.0);
    }

    #[test]
    fn power_values() {
        let p2 = LossSpec::power(2.0);
        assert_relative_eq!(p2.value(3.0).unwrap(), 9.0);
        assert_relative_eq!(p2.subderivative(3.0).unwrap(), 6.0);
        let p1 = LossSpec::power(1.0);
        assert_relative_eq!(p1.subderivative(0.0).unwrap(), 0.0);
        assert_relative_eq!(p1.subderivative(0.5).unwrap(), 1.0);
    }

    #[test]
    fn negative_argument_rejected() {
        assert!(LossSpec::power(2.0).value(-0.1).is_err());
        assert!(LossSpec::power(0.5).validate().is_err());
    }

    #[test]
    fn euclidean_power2_subgradient() {
        let space = SpaceSpec::Euclidean { dim: 2 };
        let z = Point(vec![1.0, 0.0]);
        let x = Point(vec![0.0, 2.0]);
        let g = cost_subgradient(&LossSpec::power(2.0), &space, &z, &x).unwrap();
        // gradient of |x - z|^2 is 2(x - z)
        assert_relative_eq!(g.0[0], -2.0, epsilon = 1e-12);
        assert_relative_eq!(g.0[1], 4.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_distance_gives_zero_tangent() {
        let space = SpaceSpec::Euclidean { dim: 2 };
        let z = Point(vec![1.0, 1.0]);
        let g = cost_subgradient(&LossSpec::power(1.0), &space, &z, &z).unwrap();
        assert_eq!(g.0, vec![0.0, 0.0]);
    }

    #[test]
    fn sphere_median_subgradient_unit_norm() {
        let space = SpaceSpec::Sphere { dim: 3, kappa: 1.0 };
        let z = Point(vec![1.0, 0.0, 0.0]);
        let x = Point(vec![0.0, 1.0, 0.0]);
        let g = cost_subgradient(&LossSpec::power(1.0), &space, &z, &x).unwrap();
        let n = space.norm(&x, &g).unwrap();
        assert_relative_eq!(n, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn json_shapes() {
        let p: LossSpec = serde_json::from_str(r#"{"kind":"power","p":2}"#).unwrap();
        assert_eq!(p, LossSpec::power(2.0));
        let h: LossSpec = serde_json::from_str(r#"{"kind":"huber","c":1.0}"#).unwrap();
        assert_eq!(h, LossSpec::huber(1.0));
    }
}
