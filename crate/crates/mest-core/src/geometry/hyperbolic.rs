//! Hyperboloid model of curvature κ < 0: points x with Minkowski form
//! <x,x> = 1/κ and positive last coordinate. Tangent vectors are
//! Minkowski-orthogonal to the base point; the metric is the restriction of
//! the Minkowski form, which is positive definite there.

use super::{axpy, clamp_arg, scaled, POINT_TOL};
use crate::error::{Error, Result};

/// Minkowski form with signature (+,...,+,-) on the last coordinate.
pub fn minkowski(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    for i in 0..n - 1 {
        s += a[i] * b[i];
    }
    s - a[n - 1] * b[n - 1]
}

fn radius(kappa: f64) -> f64 {
    1.0 / (-kappa).sqrt()
}

pub fn check_point(kappa: f64, x: &[f64]) -> Result<()> {
    let q = minkowski(x, x);
    if (q - 1.0 / kappa).abs() > POINT_TOL * (1.0 + (1.0 / kappa).abs()) {
        return Err(Error::InvalidPoint(format!(
            "Minkowski form {q}, expected {} within tolerance",
            1.0 / kappa
        )));
    }
    if x[x.len() - 1] <= 0.0 {
        return Err(Error::InvalidPoint("last coordinate must be positive".into()));
    }
    Ok(())
}

pub fn dist(kappa: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    let r = radius(kappa);
    // The difference of two hyperboloid points is spacelike with
    // <x-y, x-y> = 4 r^2 sinh^2(theta/2); asinh is well-conditioned
    // everywhere, unlike acosh near 1.
    let mut diff = x.to_vec();
    axpy(&mut diff, -1.0, y);
    let q = clamp_arg(minkowski(&diff, &diff), 0.0, f64::INFINITY)?;
    Ok(2.0 * r * (q.sqrt() / (2.0 * r)).asinh())
}

pub fn exp(kappa: f64, x: &[f64], v: &[f64]) -> Vec<f64> {
    let r = radius(kappa);
    let n2 = minkowski(v, v);
    if n2 <= 0.0 {
        return x.to_vec();
    }
    let n = n2.sqrt();
    let theta = n / r;
    let mut out = scaled(x, theta.cosh());
    axpy(&mut out, r * theta.sinh() / n, v);
    // Rescale onto the hyperboloid to absorb rounding drift.
    let q = minkowski(&out, &out);
    let s = ((1.0 / kappa) / q).sqrt();
    scaled(&out, s)
}

pub fn log(kappa: f64, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let r = radius(kappa);
    let d = dist(kappa, x, y)?;
    if d == 0.0 {
        return Ok(vec![0.0; x.len()]);
    }
    let theta = d / r;
    let s = r * theta.sinh();
    let mut u = y.to_vec();
    axpy(&mut u, -theta.cosh(), x);
    let mut g = scaled(&u, d / s);
    // Project exactly onto the tangent space (Minkowski-orthogonal to x):
    // for y within rounding of x the cancellation above leaves a spurious
    // component along x amplified by 1/sinh(theta).
    let c = minkowski(&g, x) / minkowski(x, x);
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
    let c = minkowski(v, &u);
    let mut out = v.to_vec();
    axpy(&mut out, -c, &u);
    axpy(&mut out, -c, &w);
    Ok(out)
}
