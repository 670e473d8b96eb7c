//! Minimization of the empirical objective over the space.
//!
//! Smooth losses (Power p >= 2, Huber) run geodesic gradient descent with
//! Armijo backtracking. Non-smooth losses (Power p in [1, 2)) run decaying
//! subgradient steps with geodesic iterate averaging, followed by a local
//! descent polish, which is justified because the empirical objective is
//! differentiable away from the data points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::geometry::{Point, SpaceSpec, Tangent};
use crate::loss::{cost, cost_subgradient, LossSpec};
use crate::rng::stream_rng;
use crate::sampler::{SampleStats, Sampler};

const ARMIJO_C1: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepRule {
    /// Fixed step s0.
    Constant {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        s0: Option<f64>,
    },
    /// s0 / sqrt(k) at iteration k.
    Decaying {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        s0: Option<f64>,
    },
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::Decaying { s0: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Init {
    /// First data point: always feasible, inside the geodesic hull of the data.
    First,
    Point { coords: Point },
    /// Coordinate-wise average projected back onto the space.
    ExtrinsicMean,
}

impl Default for Init {
    fn default() -> Self {
        Init::First
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub step_rule: StepRule,
    #[serde(default = "default_true")]
    pub averaging: bool,
    #[serde(default = "default_tol_grad")]
    pub tol_grad: f64,
    #[serde(default = "default_tol_obj")]
    pub tol_obj: f64,
    #[serde(default)]
    pub init: Init,
    /// Keep the per-iteration objective trace in the result.
    #[serde(default = "default_true")]
    pub keep_trace: bool,
}

fn default_max_iters() -> usize {
    10_000
}

fn default_tol_grad() -> f64 {
    1e-8
}

fn default_tol_obj() -> f64 {
    1e-12
}

fn default_true() -> bool {
    true
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            max_iters: default_max_iters(),
            step_rule: StepRule::default(),
            averaging: true,
            tol_grad: default_tol_grad(),
            tol_obj: default_tol_obj(),
            init: Init::First,
            keep_trace: true,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        if !(self.tol_grad > 0.0) || !(self.tol_obj > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        let s0 = match self.step_rule {
            StepRule::Constant { s0 } | StepRule::Decaying { s0 } => s0,
        };
        if let Some(s0) = s0 {
            if !(s0 > 0.0) {
                return Err(Error::InvalidConfig("s0 must be positive".into()));
            }
        }
        Ok(())
    }

    fn s0(&self) -> Option<f64> {
        match self.step_rule {
            StepRule::Constant { s0 } | StepRule::Decaying { s0 } => s0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub x_hat: Point,
    pub objective: f64,
    pub grad_norm: f64,
    pub iters: usize,
    pub converged: bool,
    pub trace: Vec<(usize, f64)>,
}

/// Mean cost over the data.
pub fn empirical_objective(
    space: &SpaceSpec,
    loss: &LossSpec,
    data: &[Point],
    x: &Point,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidConfig("empty data".into()));
    }
    let mut acc = 0.0;
    for z in data {
        acc += cost(loss, space, z, x)?;
    }
    Ok(acc / data.len() as f64)
}

/// Mean subgradient over the data; an element of the subdifferential of the
/// empirical objective at `x`.
pub fn empirical_subgradient(
    space: &SpaceSpec,
    loss: &LossSpec,
    data: &[Point],
    x: &Point,
) -> Result<Tangent> {
    if data.is_empty() {
        return Err(Error::InvalidConfig("empty data".into()));
    }
    let mut acc = vec![0.0; space.ambient_dim()];
    for z in data {
        let g = cost_subgradient(loss, space, z, x)?;
        for (a, b) in acc.iter_mut().zip(&g.0) {
            *a += b;
        }
    }
    let n = data.len() as f64;
    Ok(Tangent(acc.into_iter().map(|v| v / n).collect()))
}

fn initial_point(space: &SpaceSpec, data: &[Point], init: &Init) -> Result<Point> {
    match init {
        Init::First => Ok(data[0].clone()),
        Init::Point { coords } => {
            space.check_point(coords)?;
            Ok(coords.clone())
        }
        Init::ExtrinsicMean => extrinsic_mean(space, data),
    }
}

/// Coordinate-wise average projected back onto the space.
fn extrinsic_mean(space: &SpaceSpec, data: &[Point]) -> Result<Point> {
    let dim = space.ambient_dim();
    let mut mean = vec![0.0; dim];
    for z in data {
        for (m, c) in mean.iter_mut().zip(&z.0) {
            *m += c;
        }
    }
    let n = data.len() as f64;
    for m in &mut mean {
        *m /= n;
    }
    match space {
        SpaceSpec::Euclidean { .. } => Ok(Point(mean)),
        SpaceSpec::Sphere { kappa, .. } => {
            let norm2: f64 = mean.iter().map(|v| v * v).sum();
            if norm2 < 1e-24 {
                return Err(Error::Numerical("extrinsic mean collapsed to the origin".into()));
            }
            let s = 1.0 / (kappa * norm2).sqrt();
            Ok(Point(mean.into_iter().map(|v| v * s).collect()))
        }
        SpaceSpec::Hyperbolic { kappa, .. } => {
            let q = crate::geometry::hyperbolic::minkowski(&mean, &mean);
            if q >= 0.0 {
                return Err(Error::Numerical("extrinsic mean left the hyperboloid cone".into()));
            }
            let s = ((1.0 / kappa) / q).sqrt();
            Ok(Point(mean.into_iter().map(|v| v * s).collect()))
        }
        SpaceSpec::SpdAffine { .. } | SpaceSpec::SpdBuresWasserstein { .. } => {
            // The average of SPD matrices is SPD.
            Ok(Point(mean))
        }
        SpaceSpec::MetricTree { .. } => Err(Error::Unsupported(
            "extrinsic mean is undefined on metric trees".into(),
        )),
    }
}

/// Rough data diameter: twice the largest distance from the initializer.
fn diameter_estimate(space: &SpaceSpec, data: &[Point], x0: &Point) -> Result<f64> {
    let mut m: f64 = 0.0;
    for z in data {
        m = m.max(space.dist(x0, z)?);
    }
    Ok(2.0 * m)
}

/// Exponential step with the norm clamped inside the guard.
fn guarded_step(space: &SpaceSpec, x: &Point, dir: &Tangent, s: f64) -> Result<Point> {
    let mut step = dir.scaled(s);
    if let Some(g) = space.injectivity_guard() {
        let n = space.norm(x, &step)?;
        let cap = 0.45 * g;
        if n > cap {
            step = step.scaled(cap / n);
        }
    }
    space.exp(x, &step)
}

/// Minimizes the empirical objective, returning the estimate with
/// diagnostics. Non-convergence within `max_iters` is reported through
/// `converged = false`, not as an error.
pub fn minimize(
    space: &SpaceSpec,
    loss: &LossSpec,
    data: &[Point],
    config: &EstimatorConfig,
) -> Result<EstimateResult> {
    loss.validate()?;
    config.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidConfig("empty data".into()));
    }
    if let SpaceSpec::MetricTree { tree } = space {
        return minimize_on_tree(space, tree, loss, data, config);
    }
    let x0 = initial_point(space, data, &config.init)?;
    let diam = diameter_estimate(space, data, &x0)?;
    let s0 = config.s0().unwrap_or_else(|| (diam / 2.0).max(1e-8));

    let f0 = empirical_objective(space, loss, data, &x0)?;
    let tol_grad = config.tol_grad * (1.0 + f0.abs());

    let mut trace: Vec<(usize, f64)> = Vec::new();
    let mut iters = 0usize;

    let (mut x, mut converged) = if loss.is_smooth() {
        (x0, false)
    } else {
        // Phase 1: decaying subgradient steps with geodesic averaging. A
        // short budget suffices: with continuous data the objective is
        // differentiable at almost every iterate, so the descent polish
        // below carries the convergence burden; this phase only needs to
        // land in the right basin at the right scale.
        let budget = config.max_iters.min(60);
        let mut xk = x0.clone();
        let mut avg = x0.clone();
        let mut best = (x0, f0);
        let mut done = false;
        let mut last_improvement = 0usize;
        for k in 1..=budget {
            let g = empirical_subgradient(space, loss, data, &xk)?;
            let gn = space.norm(&xk, &g)?;
            if gn <= tol_grad {
                done = true;
                break;
            }
            let s = match config.step_rule {
                StepRule::Constant { .. } => s0,
                StepRule::Decaying { .. } => s0 / (k as f64).sqrt(),
            };
            xk = guarded_step(space, &xk, &g, -s)?;
            let cand = if config.averaging {
                avg = space.geodesic_point(&avg, &xk, 1.0 / (k + 1) as f64)?;
                avg.clone()
            } else {
                xk.clone()
            };
            let f = empirical_objective(space, loss, data, &cand)?;
            iters += 1;
            if config.keep_trace {
                trace.push((iters, f));
            }
            if f < best.1 - config.tol_obj * (1.0 + best.1.abs()) {
                best = (cand, f);
                last_improvement = k;
            }
            // The averaged iterate stalls long before the budget; hand over
            // to the descent polish once 20 steps pass without progress.
            if k - last_improvement >= 20 {
                break;
            }
        }
        (best.0, done)
    };

    // Descent with Armijo backtracking. For non-smooth losses this is a
    // polish phase: the empirical objective is differentiable away from the
    // data points, so subgradients act as gradients there.
    let mut f = empirical_objective(space, loss, data, &x)?;
    if config.keep_trace && trace.is_empty() {
        trace.push((iters, f));
    }
    let mut step = s0;
    let mut grad_norm = space.norm(&x, &empirical_subgradient(space, loss, data, &x)?)?;
    while iters < config.max_iters {
        let g = empirical_subgradient(space, loss, data, &x)?;
        grad_norm = space.norm(&x, &g)?;
        if grad_norm <= tol_grad {
            converged = true;
            break;
        }
        let mut s = (step * 2.0).min(s0);
        let mut accepted = false;
        while s * grad_norm > 1e-18 * (1.0 + diam) {
            let cand = guarded_step(space, &x, &g, -s)?;
            let fc = empirical_objective(space, loss, data, &cand)?;
            // The required decrease is floored at the objective's rounding
            // noise, so ulp-level jitter is never accepted as progress.
            let required = (ARMIJO_C1 * s * grad_norm * grad_norm)
                .max(4.0 * f64::EPSILON * (1.0 + f.abs()));
            let armijo = fc < f - required;
            // Endgame: once the Armijo decrease drops below the objective's
            // rounding, certify progress by a strict gradient-norm decrease
            // instead (exact for the positions, unlike the objective).
            let shrinks = !armijo
                && fc <= f + 1e-12 * (1.0 + f.abs())
                && space.norm(&cand, &empirical_subgradient(space, loss, data, &cand)?)?
                    <= 0.9 * grad_norm;
            if armijo || shrinks {
                x = cand;
                f = fc;
                step = s;
                accepted = true;
                break;
            }
            // 0.6 rather than 0.5: with growth factor 2 the trial grid then
            // drifts between iterations (2 * 0.6^j is never 1), so a step
            // accepted just inside the stability boundary, where progress
            // per iteration is negligible, cannot be re-proposed forever.
            s *= 0.6;
        }
        iters += 1;
        if config.keep_trace {
            trace.push((iters, f));
        }
        if !accepted {
            // Step size underflow: the objective is stationary to within
            // the objective tolerance (kink minimum for non-smooth losses).
            converged = true;
            break;
        }
    }

    let objective = empirical_objective(space, loss, data, &x)?;
    Ok(EstimateResult {
        x_hat: x,
        objective,
        grad_norm,
        iters,
        converged,
        trace,
    })
}

/// Tree-space solver: the objective is convex along every edge, so a
/// golden-section search per edge followed by taking the best edge is exact
/// up to the line-search tolerance.
fn minimize_on_tree(
    space: &SpaceSpec,
    tree: &crate::geometry::TreeSpec,
    loss: &LossSpec,
    data: &[Point],
    config: &EstimatorConfig,
) -> Result<EstimateResult> {
    let mut best: Option<(Point, f64)> = None;
    let mut evals = 0usize;
    for (e, edge) in tree.edges.iter().enumerate() {
        let f = |s: f64| -> Result<f64> {
            empirical_objective(space, loss, data, &Point(vec![e as f64, s]))
        };
        let (mut lo, mut hi) = (0.0f64, edge.length);
        let phi = (5.0f64.sqrt() - 1.0) / 2.0;
        let mut m1 = hi - phi * (hi - lo);
        let mut m2 = lo + phi * (hi - lo);
        let mut f1 = f(m1)?;
        let mut f2 = f(m2)?;
        evals += 2;
        while hi - lo > 1e-10 * (1.0 + edge.length) && evals < config.max_iters * 4 {
            if f1 <= f2 {
                hi = m2;
                m2 = m1;
                f2 = f1;
                m1 = hi - phi * (hi - lo);
                f1 = f(m1)?;
            } else {
                lo = m1;
                m1 = m2;
                f1 = f2;
                m2 = lo + phi * (hi - lo);
                f2 = f(m2)?;
            }
            evals += 1;
        }
        let s = 0.5 * (lo + hi);
        let fm = f(s)?;
        let p = Point(tree.canonicalize(&[e as f64, s]));
        if best.as_ref().map_or(true, |(_, fb)| fm < *fb) {
            best = Some((p, fm));
        }
    }
    let (x_hat, objective) = best.expect("tree has at least one edge");
    Ok(EstimateResult {
        x_hat,
        objective,
        grad_norm: f64::NAN,
        iters: evals,
        converged: true,
        trace: Vec::new(),
    })
}

/// One row of a consistency experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub n: usize,
    pub median_error: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyTable {
    pub rows: Vec<ConsistencyRow>,
    /// Log-log least-squares slope of median error against n.
    pub slope: f64,
    pub sample_stats: SampleStats,
}

/// Replicated estimation at increasing sample sizes, reporting the median
/// distance to the designed minimizer and the log-log error slope.
pub fn consistency_curve(
    space: &SpaceSpec,
    loss: &LossSpec,
    sampler: &Sampler,
    x_star: &Point,
    n_grid: &[usize],
    reps: usize,
    config: &EstimatorConfig,
    seed: u64,
) -> Result<ConsistencyTable> {
    space.check_point(x_star)?;
    if n_grid.is_empty() || reps == 0 {
        return Err(Error::InvalidConfig("empty n grid or zero reps".into()));
    }
    let mut config = config.clone();
    config.keep_trace = false;
    let mut rows = Vec::with_capacity(n_grid.len());
    let mut total_stats = SampleStats::default();
    for (gi, &n) in n_grid.iter().enumerate() {
        if n == 0 {
            return Err(Error::InvalidConfig("n must be >= 1".into()));
        }
        let results: Vec<Result<(f64, SampleStats)>> = exec::map_indexed(reps, |rep| {
            let stream = (gi * reps + rep) as u64;
            let mut rng = stream_rng(seed, stream);
            let mut stats = SampleStats::default();
            let data: Result<Vec<Point>> =
                (0..n).map(|_| sampler.draw(&mut rng, &mut stats)).collect();
            let est = minimize(space, loss, &data?, &config)?;
            Ok((space.dist(&est.x_hat, x_star)?, stats))
        });
        let mut errs = Vec::with_capacity(reps);
        let mut failures = 0usize;
        for r in results {
            match r {
                Ok((e, stats)) => {
                    errs.push(e);
                    total_stats.merge(&stats);
                }
                Err(_) => failures += 1,
            }
        }
        if errs.is_empty() {
            return Err(Error::Estimation(format!(
                "all {reps} replications failed at n = {n}"
            )));
        }
        rows.push(ConsistencyRow {
            n,
            median_error: median(&mut errs),
            failures,
        });
    }
    let slope = loglog_slope(&rows);
    Ok(ConsistencyTable {
        rows,
        slope,
        sample_stats: total_stats,
    })
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite errors"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn loglog_slope(rows: &[ConsistencyRow]) -> f64 {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.median_error > 0.0)
        .map(|r| ((r.n as f64).ln(), r.median_error.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn euclid(dim: usize) -> SpaceSpec {
        SpaceSpec::Euclidean { dim }
    }

    #[test]
    fn objective_examples() {
        let space = euclid(1);
        let data = vec![Point(vec![-1.0]), Point(vec![1.0])];
        let f = empirical_objective(&space, &LossSpec::power(2.0), &data, &Point(vec![0.0])).unwrap();
        assert_relative_eq!(f, 1.0);
        let single = vec![Point(vec![2.0])];
        let f = empirical_objective(&space, &LossSpec::power(2.0), &single, &single[0]).unwrap();
        assert_relative_eq!(f, 0.0);
        assert!(empirical_objective(&space, &LossSpec::power(2.0), &[], &Point(vec![0.0])).is_err());
    }

    #[test]
    fn euclidean_mean_closed_form() {
        let space = euclid(3);
        let mut rng = crate::rng::stream_rng(11, 0);
        use rand::Rng;
        for _ in 0..20 {
            let n = rng.gen_range(2..30);
            let data: Vec<Point> = (0..n)
                .map(|_| Point((0..3).map(|_| rng.gen_range(-2.0..2.0)).collect()))
                .collect();
            let mean: Vec<f64> = (0..3)
                .map(|i| data.iter().map(|p| p.0[i]).sum::<f64>() / n as f64)
                .collect();
            let config = EstimatorConfig {
                tol_grad: 1e-11,
                ..EstimatorConfig::default()
            };
            let est = minimize(&space, &LossSpec::power(2.0), &data, &config).unwrap();
            assert!(est.converged);
            for (a, b) in est.x_hat.0.iter().zip(&mean) {
                assert_relative_eq!(a, b, epsilon = 5e-9);
            }
        }
    }

    #[test]
    fn one_dimensional_median() {
        let space = euclid(1);
        let data = vec![Point(vec![-1.0]), Point(vec![0.0]), Point(vec![1.0])];
        let est = minimize(&space, &LossSpec::power(1.0), &data, &EstimatorConfig::default())
            .unwrap();
        assert!(est.x_hat.0[0].abs() < 1e-6, "median {}", est.x_hat.0[0]);
    }

    #[test]
    fn trace_nonincreasing_for_smooth_descent() {
        let space = euclid(2);
        let data: Vec<Point> = (0..10)
            .map(|i| Point(vec![i as f64 * 0.1, (i % 3) as f64]))
            .collect();
        let est = minimize(&space, &LossSpec::power(2.0), &data, &EstimatorConfig::default())
            .unwrap();
        for w in est.trace.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-12);
        }
        assert_relative_eq!(
            est.objective,
            empirical_objective(&space, &LossSpec::power(2.0), &data, &est.x_hat).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn empirical_subgradient_linearity() {
        let space = euclid(2);
        let data = vec![Point(vec![1.0, 0.0]), Point(vec![0.0, 1.0])];
        let x = Point(vec![1.0, 1.0]);
        let g = empirical_subgradient(&space, &LossSpec::power(2.0), &data, &x).unwrap();
        // 2(x - mean)
        assert_relative_eq!(g.0[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(g.0[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn tree_star_median_at_hub() {
        // Star with three unit legs from the hub (node 0).
        let tree = crate::geometry::TreeSpec {
            nodes: 4,
            edges: vec![
                crate::geometry::TreeEdge { u: 0, v: 1, length: 1.0 },
                crate::geometry::TreeEdge { u: 0, v: 2, length: 1.0 },
                crate::geometry::TreeEdge { u: 0, v: 3, length: 1.0 },
            ],
        };
        let space = SpaceSpec::MetricTree { tree };
        let data = vec![
            Point(vec![0.0, 1.0]),
            Point(vec![1.0, 1.0]),
            Point(vec![2.0, 1.0]),
        ];
        let est = minimize(&space, &LossSpec::power(2.0), &data, &EstimatorConfig::default())
            .unwrap();
        // Hub canonicalizes to (edge 0, offset 0).
        assert_eq!(est.x_hat.0[0], 0.0);
        assert!(est.x_hat.0[1].abs() < 1e-6);
    }
}
