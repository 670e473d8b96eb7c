//! Sandwich covariance estimation and replicated CLT verification.
//!
//! The limit law of the rescaled error sqrt(n) Log_{x*}(x_hat) is the
//! centered Gaussian with covariance V = S^{-1} B S^{-1}, where S is the
//! Hessian of the population objective at the minimizer and B the second
//! moment of the score. Both are estimated by Monte-Carlo from the sampler
//! itself, so the verification error is separated from plug-in error.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::exec;
use crate::estimator::{minimize, EstimatorConfig};
use crate::geometry::{Point, SpaceSpec, Tangent};
use crate::loss::{cost, cost_subgradient, LossSpec};
use crate::rng::{stream_rng, STREAM_HESSIAN, STREAM_SCORE_COV};
use crate::sampler::{SampleStats, Sampler, SamplerSpec};

/// Row-major symmetric matrix in an orthonormal tangent basis.
pub type Matrix = Vec<Vec<f64>>;

pub const DEFAULT_B_SAMPLES: usize = 100_000;
/// Total function-evaluation budget for the Hessian stencil.
pub const DEFAULT_S_EVAL_BUDGET: usize = 1_000_000;

fn to_dmatrix(m: &Matrix) -> DMatrix<f64> {
    let k = m.len();
    DMatrix::from_fn(k, k, |i, j| m[i][j])
}

fn from_dmatrix(m: &DMatrix<f64>) -> Matrix {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn frobenius(m: &Matrix) -> f64 {
    m.iter()
        .flat_map(|r| r.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

/// ||a - b||_F / ||b||_F.
pub fn frobenius_rel_err(a: &Matrix, b: &Matrix) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .flat_map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (x - y) * (x - y)))
        .sum::<f64>()
        .sqrt();
    diff / frobenius(b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichCovariance {
    /// Hessian of the population objective at the minimizer.
    pub s: Matrix,
    /// Second moment of the score at the minimizer.
    pub b: Matrix,
    /// S^{-1} B S^{-1}, symmetrized.
    pub v: Matrix,
    /// Orthonormal tangent basis the matrices are expressed in.
    pub basis: Vec<Tangent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub n: usize,
    pub reps: usize,
    /// Rescaled errors sqrt(n) Log_{x*}(x_hat), one row per replication.
    pub errors: Vec<Vec<f64>>,
    pub empirical_cov: Matrix,
    pub v_hat: SandwichCovariance,
    pub frobenius_rel_err: f64,
    /// KS distance of the Mahalanobis-squared sample (under v_hat) from
    /// chi-square(tangent_dim).
    pub mahalanobis_ks: f64,
    pub mean_norm: f64,
    /// Empirical covariance of the normalized score sums, to be compared
    /// against B directly (the score-only half of the limit theorem).
    pub score_cov: Matrix,
    pub score_frobenius_rel_err: f64,
    pub n_failed: usize,
    pub sample_stats: SampleStats,
}

/// Monte-Carlo estimate of B = E[g g^T] at `x_star`, in `basis` coordinates.
pub fn score_covariance_b(
    space: &SpaceSpec,
    loss: &LossSpec,
    sampler: &Sampler,
    x_star: &Point,
    basis: &[Tangent],
    m: usize,
    seed: u64,
) -> Result<(Matrix, SampleStats)> {
    let k = basis.len();
    if m < k + 1 {
        return Err(Error::InvalidConfig(format!(
            "score covariance needs m >= {} samples, got {m}",
            k + 1
        )));
    }
    let mut rng = stream_rng(seed, STREAM_SCORE_COV);
    let mut stats = SampleStats::default();
    let mut acc = vec![vec![0.0; k]; k];
    for _ in 0..m {
        let z = sampler.draw(&mut rng, &mut stats)?;
        let g = cost_subgradient(loss, space, &z, x_star)?;
        let c = space.tangent_to_basis_coords(x_star, basis, &g)?;
        for i in 0..k {
            for j in 0..k {
                acc[i][j] += c[i] * c[j];
            }
        }
    }
    for row in &mut acc {
        for v in row {
            *v /= m as f64;
        }
    }
    Ok((acc, stats))
}

/// Monte-Carlo central-difference estimate of the Hessian S of the
/// population objective at `x_star`. One fixed sample is shared by every
/// stencil point (common random numbers), so the stencil bias dominates
/// the entry noise.
pub fn hessian_s(
    space: &SpaceSpec,
    loss: &LossSpec,
    sampler: &Sampler,
    x_star: &Point,
    basis: &[Tangent],
    h: f64,
    m: usize,
    seed: u64,
) -> Result<(Matrix, SampleStats)> {
    let k = basis.len();
    if !(h > 0.0) {
        return Err(Error::InvalidConfig("stencil width h must be positive".into()));
    }
    if let Some(g) = space.injectivity_guard() {
        if 2.0 * h >= g {
            return Err(Error::InvalidConfig(format!(
                "stencil width {h} too large for guard {g}"
            )));
        }
    }
    let mut rng = stream_rng(seed, STREAM_HESSIAN);
    let mut stats = SampleStats::default();
    let sample: Vec<Point> = (0..m)
        .map(|_| sampler.draw(&mut rng, &mut stats))
        .collect::<Result<_>>()?;

    // Mean cost over the fixed sample at exp(x*, sum_i u_i b_i).
    let phi = |u: &[f64]| -> Result<f64> {
        let v = space.tangent_from_basis_coords(basis, u);
        let x = space.exp(x_star, &v)?;
        let mut acc = 0.0;
        for z in &sample {
            acc += cost(loss, space, z, &x)?;
        }
        Ok(acc / m as f64)
    };

    let f0 = phi(&vec![0.0; k])?;
    // Diagonal and upper-triangle entries, evaluated in parallel.
    let entries: Vec<(usize, usize)> = (0..k)
        .flat_map(|i| (i..k).map(move |j| (i, j)))
        .collect();
    let values: Vec<Result<f64>> = exec::map_indexed(entries.len(), |idx| {
        let (i, j) = entries[idx];
        let mut u = vec![0.0; k];
        if i == j {
            u[i] = h;
            let fp = phi(&u)?;
            u[i] = -h;
            let fm = phi(&u)?;
            Ok((fp - 2.0 * f0 + fm) / (h * h))
        } else {
            u[i] = h;
            u[j] = h;
            let fpp = phi(&u)?;
            u[j] = -h;
            let fpm = phi(&u)?;
            u[i] = -h;
            u[j] = h;
            let fmp = phi(&u)?;
            u[j] = -h;
            let fmm = phi(&u)?;
            Ok((fpp - fpm - fmp + fmm) / (4.0 * h * h))
        }
    });
    let mut s = vec![vec![0.0; k]; k];
    for (idx, v) in values.into_iter().enumerate() {
        let (i, j) = entries[idx];
        let v = v?;
        s[i][j] = v;
        s[j][i] = v;
    }
    let eig = to_dmatrix(&s).symmetric_eigen();
    let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_eig <= 0.0 {
        return Err(Error::Estimation(format!(
            "Hessian estimate is not positive definite (min eigenvalue {min_eig}); \
             the experiment violates the positive-definiteness hypothesis"
        )));
    }
    Ok((s, stats))
}

/// V = S^{-1} B S^{-1}, symmetrized.
pub fn sandwich_v(s: &Matrix, b: &Matrix, basis: &[Tangent]) -> Result<SandwichCovariance> {
    let sm = to_dmatrix(s);
    let bm = to_dmatrix(b);
    let sinv = sm
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Estimation("singular Hessian S".into()))?;
    let v = &sinv * bm * &sinv;
    let v = (&v + v.transpose()) * 0.5;
    Ok(SandwichCovariance {
        s: s.clone(),
        b: b.clone(),
        v: from_dmatrix(&v),
        basis: basis.to_vec(),
    })
}

/// Estimates the full sandwich covariance at `x_star` from the sampler.
pub fn estimate_sandwich(
    space: &SpaceSpec,
    loss: &LossSpec,
    sampler: &Sampler,
    x_star: &Point,
    h: Option<f64>,
    seed: u64,
) -> Result<(SandwichCovariance, SampleStats)> {
    let basis = space.tangent_basis(x_star)?;
    let k = basis.len();
    let (b, stats_b) =
        score_covariance_b(space, loss, sampler, x_star, &basis, DEFAULT_B_SAMPLES, seed)?;
    let s_scale = (0..k).map(|i| b[i][i]).sum::<f64>().sqrt().max(1.0);
    let h = h.unwrap_or(1e-3 * (1.0 + s_scale));
    // Stencil points sharing one sample: 1 center, 2 per diagonal entry,
    // 4 per off-diagonal entry.
    let stencil = 1 + 2 * k + 4 * (k * (k - 1) / 2);
    let m_s = (DEFAULT_S_EVAL_BUDGET / stencil).max(1_000);
    let (s, stats_s) = hessian_s(space, loss, sampler, x_star, &basis, h, m_s, seed)?;
    let mut sand = sandwich_v(&s, &b, &basis)?;
    sand.basis = basis;
    let mut stats = stats_b;
    stats.merge(&stats_s);
    Ok((sand, stats))
}

fn sample_covariance(rows: &[Vec<f64>]) -> Matrix {
    let n = rows.len();
    let k = rows[0].len();
    let mean: Vec<f64> = (0..k)
        .map(|i| rows.iter().map(|r| r[i]).sum::<f64>() / n as f64)
        .collect();
    let denom = (n - 1).max(1) as f64;
    (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    rows.iter()
                        .map(|r| (r[i] - mean[i]) * (r[j] - mean[j]))
                        .sum::<f64>()
                        / denom
                })
                .collect()
        })
        .collect()
}

/// KS distance of `sample` from chi-square with `k` degrees of freedom.
fn ks_chi_square(sample: &[f64], k: usize) -> Result<f64> {
    let dist = ChiSquared::new(k as f64)
        .map_err(|e| Error::Numerical(format!("chi-square setup: {e}")))?;
    let mut s = sample.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite Mahalanobis values"));
    let n = s.len() as f64;
    let mut ks: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = dist.cdf(x);
        ks = ks.max((f - i as f64 / n).abs());
        ks = ks.max(((i + 1) as f64 / n - f).abs());
    }
    Ok(ks)
}

/// Replicated estimation at fixed n, comparing the rescaled errors to the
/// sandwich covariance. Aborts when more than 1% of the replications fail.
pub fn clt_experiment(
    space: &SpaceSpec,
    loss: &LossSpec,
    sampler_spec: &SamplerSpec,
    x_star: &Point,
    n: usize,
    reps: usize,
    est_config: &EstimatorConfig,
    seed: u64,
) -> Result<CltReport> {
    if reps < 2 || n == 0 {
        return Err(Error::InvalidConfig("need n >= 1 and reps >= 2".into()));
    }
    let sampler = Sampler::new(sampler_spec, space)?;
    space.check_point(x_star)?;
    if let (SamplerSpec::DiscreteSupport { support }, LossSpec::Power { p }) =
        (sampler_spec, loss)
    {
        if *p < 2.0 && support.iter().any(|a| a.point == *x_star) {
            return Err(Error::InvalidConfig(
                "discrete sampler with an atom at the minimizer breaks the \
                 differentiability hypothesis for non-smooth losses"
                    .into(),
            ));
        }
    }
    let basis = space.tangent_basis(x_star)?;
    let k = basis.len();
    let mut est_config = est_config.clone();
    est_config.keep_trace = false;

    // Per-replication rescaled error and normalized score sum.
    let results: Vec<Result<(Vec<f64>, Vec<f64>, SampleStats)>> = exec::map_indexed(reps, |rep| {
        let mut rng = stream_rng(seed, rep as u64);
        let mut stats = SampleStats::default();
        let data: Vec<Point> = (0..n)
            .map(|_| sampler.draw(&mut rng, &mut stats))
            .collect::<Result<_>>()?;
        let sqrt_n = (n as f64).sqrt();
        let mut score = vec![0.0; k];
        for z in &data {
            let g = cost_subgradient(loss, space, z, x_star)?;
            let c = space.tangent_to_basis_coords(x_star, &basis, &g)?;
            for (s, ci) in score.iter_mut().zip(&c) {
                *s += ci / sqrt_n;
            }
        }
        let est = minimize(space, loss, &data, &est_config)?;
        if !est.converged {
            return Err(Error::Estimation("replication did not converge".into()));
        }
        let l = space.log(x_star, &est.x_hat)?;
        let err: Vec<f64> = space
            .tangent_to_basis_coords(x_star, &basis, &l)?
            .into_iter()
            .map(|c| c * sqrt_n)
            .collect();
        Ok((err, score, stats))
    });

    let mut errors = Vec::with_capacity(reps);
    let mut scores = Vec::with_capacity(reps);
    let mut stats = SampleStats::default();
    let mut n_failed = 0usize;
    let mut first_err: Option<Error> = None;
    for r in results {
        match r {
            Ok((e, s, st)) => {
                errors.push(e);
                scores.push(s);
                stats.merge(&st);
            }
            Err(e) => {
                n_failed += 1;
                first_err.get_or_insert(e);
            }
        }
    }
    if n_failed * 100 > reps {
        return Err(Error::Estimation(format!(
            "{n_failed}/{reps} replications failed (first failure: {})",
            first_err.expect("failure recorded")
        )));
    }

    let (v_hat, sand_stats) = estimate_sandwich(space, loss, &sampler, x_star, None, seed)?;
    stats.merge(&sand_stats);

    let empirical_cov = sample_covariance(&errors);
    let score_cov = sample_covariance(&scores);
    let fre = frobenius_rel_err(&empirical_cov, &v_hat.v);
    let score_fre = frobenius_rel_err(&score_cov, &v_hat.b);

    let vinv = to_dmatrix(&v_hat.v)
        .try_inverse()
        .ok_or_else(|| Error::Estimation("singular sandwich covariance".into()))?;
    let maha: Vec<f64> = errors
        .iter()
        .map(|e| {
            let ev = nalgebra::DVector::from_column_slice(e);
            (ev.transpose() * &vinv * &ev)[(0, 0)]
        })
        .collect();
    let mahalanobis_ks = ks_chi_square(&maha, k)?;

    let mean: Vec<f64> = (0..k)
        .map(|i| errors.iter().map(|e| e[i]).sum::<f64>() / errors.len() as f64)
        .collect();
    let mean_norm = mean.iter().map(|v| v * v).sum::<f64>().sqrt();

    Ok(CltReport {
        n,
        reps,
        errors,
        empirical_cov,
        v_hat,
        frobenius_rel_err: fre,
        mahalanobis_ks,
        mean_norm,
        score_cov,
        score_frobenius_rel_err: score_fre,
        n_failed,
        sample_stats: stats,
    })
}
