//! Round sphere of curvature κ > 0, embedded in ambient coordinates with
//! radius 1/√κ. Tangent vectors are ambient vectors orthogonal to the base
//! point; the metric is the ambient dot product.

use super::{axpy, clamp_arg, dot, scaled, POINT_TOL};
use crate::error::{Error, Result};

fn radius(kappa: f64) -> f64 {
    1.0 / kappa.sqrt()
}

pub fn check_point(kappa: f64, x: &[f64]) -> Result<()> {
    let c = kappa * dot(x, x);
    if (c - 1.0).abs() > POINT_TOL {
        return Err(Error::InvalidPoint(format!(
            "kappa*<x,x> = {c}, expected 1 within {POINT_TOL}"
        )));
    }
    Ok(())
}

pub fn dist(kappa: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    let r = radius(kappa);
    let c = clamp_arg(kappa * dot(x, y), -1.0, 1.0)?;
    // atan2(sin, cos) with the sine from a vector difference: accurate near
    // coincident and near antipodal points, where acos loses half the digits.
    let sqrt_k = kappa.sqrt();
    let mut sv = scaled(x, sqrt_k);
    axpy(&mut sv, -c * sqrt_k, y);
    let s = dot(&sv, &sv).sqrt();
    Ok(r * s.atan2(c))
}

pub fn exp(kappa: f64, x: &[f64], v: &[f64]) -> Vec<f64> {
    let r = radius(kappa);
    let n = dot(v, v).sqrt();
    if n == 0.0 {
        return x.to_vec();
    }
    let theta = n / r;
    let mut out = scaled(x, theta.cos());
    axpy(&mut out, r * theta.sin() / n, v);
    // Renormalize onto the sphere to absorb rounding drift.
    let s = 1.0 / (kappa * dot(&out, &out)).sqrt();
    scaled(&out, s)
}

pub fn log(kappa: f64, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let r = radius(kappa);
    let d = dist(kappa, x, y)?;
    if d == 0.0 {
        return Ok(vec![0.0; x.len()]);
    }
    let theta = d / r;
    // Unit tangent toward y: (y - cos(theta) x) / (r sin(theta)).
    let s = r * theta.sin();
    let mut u = y.to_vec();
    axpy(&mut u, -theta.cos(), x);
    let mut g = scaled(&u, d / s);
    // Project exactly onto the tangent space: for y within rounding of x the
    // cancellation above leaves a spurious component along x amplified by
    // 1/sin(theta), which would poison subgradient sums over many points.
    let c = dot(&g, x) / dot(x, x);
    axpy(&mut g, -c, x);
    Ok(g)
}

pub fn transport(kappa: f64, x: &[f64], y: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let d = dist(kappa, x, y)?;
    if d == 0.0 {
        return Ok(v.to_vec());
    }
    let u = scaled(&log(kappa, x, y)?, 1.0 / d);
    let w = scaled(&log(kappa, y, x)?, 1.0 / d);
    let c = dot(v, &u);
    let mut out = v.to_vec();
    axpy(&mut out, -c, &u);
    axpy(&mut out, -c, &w);
    Ok(out)
}

/// Geodesic interpolation. For antipodal points the direction is resolved
/// deterministically toward the lexicographically smallest orthonormal
/// completion of `x`.
pub fn geodesic_point(kappa: f64, x: &[f64], y: &[f64], t: f64) -> Result<Vec<f64>> {
    let r = radius(kappa);
    let d = dist(kappa, x, y)?;
    let theta_full = d / r;
    if theta_full < 1e-15 {
        return Ok(x.to_vec());
    }
    let u = if theta_full > std::f64::consts::PI - 1e-9 {
        // Antipodal tie-break: first coordinate direction orthogonal to x.
        let xx = dot(x, x);
        let mut cand = None;
        for i in 0..x.len() {
            let mut e = vec![0.0; x.len()];
            e[i] = 1.0;
            axpy(&mut e, -x[i] / xx, x);
            let n = dot(&e, &e).sqrt();
            if n > 1e-6 {
                cand = Some(scaled(&e, 1.0 / n));
                break;
            }
        }
        cand.ok_or_else(|| Error::Numerical("no orthonormal completion found".into()))?
    } else {
        let l = log(kappa, x, y)?;
        scaled(&l, 1.0 / d)
    };
    Ok(exp(kappa, x, &scaled(&u, t * d)))
}
