//! Acceptance gate. Each test covers one numbered criterion and prints a
//! single `criterion NN <name>: pass` line when its pinned thresholds hold.

use std::time::Instant;

/// Writes directly to stdout so the per-criterion line survives libtest's
/// output capture.
macro_rules! report {
    ($($t:tt)*) => {{
        use std::io::Write;
        writeln!(std::io::stdout(), $($t)*).ok();
    }};
}

use mest_core::asymptotics::{clt_experiment, frobenius_rel_err, CltReport};
use mest_core::cat::{cat_check, strong_convexity_probe};
use mest_core::estimator::{consistency_curve, minimize, EstimatorConfig};
use mest_core::geometry::{Point, SpaceSpec, TreeEdge, TreeSpec};
use mest_core::harness::{random_point, selftest};
use mest_core::loss::{cost_subgradient, LossSpec};
use mest_core::rng::stream_rng;
use mest_core::sampler::{SampleStats, Sampler, SamplerSpec};

fn sphere() -> SpaceSpec {
    SpaceSpec::Sphere { dim: 3, kappa: 1.0 }
}

fn tight_config() -> EstimatorConfig {
    EstimatorConfig {
        tol_grad: 1e-11,
        keep_trace: false,
        ..EstimatorConfig::default()
    }
}

fn frobenius(m: &[Vec<f64>]) -> f64 {
    m.iter().flat_map(|r| r).map(|v| v * v).sum::<f64>().sqrt()
}

#[test]
fn criterion_01_euclidean_mean_equivalence() {
    let start = Instant::now();
    let space = SpaceSpec::Euclidean { dim: 3 };
    let mut rng = stream_rng(101, 0);
    use rand::Rng;
    let n = 1000;
    let data: Vec<Point> = (0..n)
        .map(|_| Point((0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()))
        .collect();
    let mean: Vec<f64> = (0..3)
        .map(|i| data.iter().map(|p| p.0[i]).sum::<f64>() / n as f64)
        .collect();
    let est = minimize(&space, &LossSpec::power(2.0), &data, &tight_config()).unwrap();
    assert!(est.converged);
    let err = est
        .x_hat
        .0
        .iter()
        .zip(&mean)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(err <= 1e-8, "deviation from the arithmetic mean: {err:e}");
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 1.0, "runtime {secs:.2}s exceeds 1s");
    report!("criterion 01 euclidean mean equivalence: pass ({err:.2e} <= 1e-8)");
}

fn gaussian_clt(space: &SpaceSpec, loss: LossSpec, scale: f64, n: usize, reps: usize, seed: u64) -> CltReport {
    let spec = SamplerSpec::TangentGaussian {
        center: space.origin(),
        scale,
        max_radius: None,
    };
    clt_experiment(space, &loss, &spec, &space.origin(), n, reps, &tight_config(), seed).unwrap()
}

#[test]
fn criterion_02_euclidean_clt_sanity() {
    let start = Instant::now();
    let space = SpaceSpec::Euclidean { dim: 2 };
    let report = gaussian_clt(&space, LossSpec::power(2.0), 1.0, 200, 2000, 202);
    // Oracle: V = Cov(Z) = identity.
    let identity = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let fre_oracle = frobenius_rel_err(&report.empirical_cov, &identity);
    assert!(fre_oracle <= 0.10, "rel err vs identity oracle: {fre_oracle}");
    assert!(
        report.frobenius_rel_err <= 0.10,
        "rel err vs sandwich: {}",
        report.frobenius_rel_err
    );
    assert!(
        report.mahalanobis_ks <= 0.04,
        "mahalanobis KS: {}",
        report.mahalanobis_ks
    );
    assert_eq!(report.n_failed, 0);
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 120.0, "runtime {secs:.1}s exceeds 2min");
    report!(
        "criterion 02 euclidean clt sanity: pass (rel err {:.3} <= 0.10, ks {:.3} <= 0.04)",
        report.frobenius_rel_err, report.mahalanobis_ks
    );
}

#[test]
fn criterion_03_sphere_barycenter_clt() {
    let start = Instant::now();
    let report = gaussian_clt(&sphere(), LossSpec::power(2.0), 0.15, 400, 1000, 303);
    assert!(
        report.frobenius_rel_err <= 0.15,
        "rel err vs sandwich: {}",
        report.frobenius_rel_err
    );
    let bound = 0.1 * frobenius(&report.v_hat.v).sqrt();
    assert!(
        report.mean_norm <= bound,
        "mean norm {} exceeds {bound}",
        report.mean_norm
    );
    assert_eq!(report.n_failed, 0);
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 600.0, "runtime {secs:.1}s exceeds 10min");
    report!(
        "criterion 03 sphere barycenter clt: pass (rel err {:.3} <= 0.15, mean norm {:.4} <= {bound:.4})",
        report.frobenius_rel_err, report.mean_norm
    );
}

#[test]
fn criterion_04_sphere_median_clt() {
    let start = Instant::now();
    let report = gaussian_clt(&sphere(), LossSpec::power(1.0), 0.15, 400, 1000, 404);
    assert!(
        report.frobenius_rel_err <= 0.20,
        "rel err vs sandwich: {}",
        report.frobenius_rel_err
    );
    assert_eq!(report.n_failed, 0);
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 600.0, "runtime {secs:.1}s exceeds 10min");
    report!(
        "criterion 04 sphere median clt: pass (rel err {:.3} <= 0.20)",
        report.frobenius_rel_err
    );
}

#[test]
fn criterion_05_median_variance_oracle() {
    // Z uniform on [-1, 1]: the sample-median CLT variance is
    // 1 / (4 f(0)^2) = 1.
    let space = SpaceSpec::Euclidean { dim: 1 };
    let spec = SamplerSpec::GeodesicBallUniform {
        center: space.origin(),
        scale: 1.0,
    };
    let report = clt_experiment(
        &space,
        &LossSpec::power(1.0),
        &spec,
        &space.origin(),
        400,
        2000,
        &tight_config(),
        505,
    )
    .unwrap();
    let var = report.empirical_cov[0][0];
    assert!(
        (0.85..=1.15).contains(&var),
        "empirical variance {var} outside [0.85, 1.15]"
    );
    report!("criterion 05 median variance oracle: pass (variance {var:.3} in [0.85, 1.15])");
}

#[test]
fn criterion_06_consistency_rate() {
    let space = sphere();
    let spec = SamplerSpec::TangentGaussian {
        center: space.origin(),
        scale: 0.25,
        max_radius: Some(0.75),
    };
    let sampler = Sampler::new(&spec, &space).unwrap();
    let n_grid = [100, 400, 1600, 6400];
    for loss in [LossSpec::power(1.0), LossSpec::power(2.0)] {
        let table = consistency_curve(
            &space,
            &loss,
            &sampler,
            &space.origin(),
            &n_grid,
            200,
            &tight_config(),
            606,
        )
        .unwrap();
        assert!(
            (-0.65..=-0.35).contains(&table.slope),
            "{loss:?}: slope {} outside [-0.65, -0.35]",
            table.slope
        );
        let total_failures: usize = table.rows.iter().map(|r| r.failures).sum();
        assert_eq!(total_failures, 0, "{loss:?}: estimator failures");
        report!(
            "criterion 06 consistency rate ({loss:?}): pass (slope {:.3} in [-0.65, -0.35])",
            table.slope
        );
    }
}

#[test]
fn criterion_07_strong_convexity() {
    let space = sphere();
    let origin = space.origin();
    let mut min_slack = f64::INFINITY;
    use rand::Rng;
    for i in 0..10_000u64 {
        let mut rng = stream_rng(707, i);
        let x0 = random_point(&space, &origin, 0.5, &mut rng).unwrap();
        let x = random_point(&space, &origin, 0.5, &mut rng).unwrap();
        let y = random_point(&space, &origin, 0.5, &mut rng).unwrap();
        let t: f64 = rng.gen();
        let slack = strong_convexity_probe(&space, &x0, &x, &y, t, 1.0, 1.0).unwrap();
        min_slack = min_slack.min(slack);
    }
    assert!(min_slack >= -1e-9, "sphere min slack {min_slack:e}");

    let e = SpaceSpec::Euclidean { dim: 3 };
    let eo = e.origin();
    let mut min_flat = f64::INFINITY;
    for i in 0..10_000u64 {
        let mut rng = stream_rng(708, i);
        let x0 = random_point(&e, &eo, 2.0, &mut rng).unwrap();
        let x = random_point(&e, &eo, 2.0, &mut rng).unwrap();
        let y = random_point(&e, &eo, 2.0, &mut rng).unwrap();
        let t: f64 = rng.gen();
        let slack = strong_convexity_probe(&e, &x0, &x, &y, t, 100.0, 0.0).unwrap();
        min_flat = min_flat.min(slack);
    }
    assert!(min_flat >= -1e-12, "euclidean min slack {min_flat:e}");
    report!(
        "criterion 07 strong convexity: pass (sphere {min_slack:.2e} >= -1e-9, euclidean {min_flat:.2e} >= -1e-12)"
    );
}

#[test]
fn criterion_08_subgradient_monotonicity() {
    // Geodesic convexity of the cost makes the subgradient field monotone:
    // <g(z,x), Log_x y> + <g(z,y), Log_y x> <= 0.
    let spaces = vec![
        (SpaceSpec::Euclidean { dim: 3 }, 1.0),
        (sphere(), 0.5),
        (SpaceSpec::SpdAffine { dim: 4 }, 0.8),
    ];
    let losses = [LossSpec::power(1.0), LossSpec::power(2.0), LossSpec::huber(1.0)];
    let mut worst = f64::INFINITY;
    for (si, (space, scale)) in spaces.iter().enumerate() {
        let origin = space.origin();
        for (li, loss) in losses.iter().enumerate() {
            for i in 0..10_000u64 {
                let mut rng = stream_rng(808 + (si * 3 + li) as u64, i);
                let z = random_point(space, &origin, *scale, &mut rng).unwrap();
                let x = random_point(space, &origin, *scale, &mut rng).unwrap();
                let y = random_point(space, &origin, *scale, &mut rng).unwrap();
                let gx = cost_subgradient(loss, space, &z, &x).unwrap();
                let gy = cost_subgradient(loss, space, &z, &y).unwrap();
                let v = -(space.inner(&x, &gx, &space.log(&x, &y).unwrap()).unwrap()
                    + space.inner(&y, &gy, &space.log(&y, &x).unwrap()).unwrap());
                worst = worst.min(v);
            }
        }
    }
    assert!(worst >= -1e-9, "min monotonicity value {worst:e}");
    report!("criterion 08 subgradient monotonicity: pass (min {worst:.2e} >= -1e-9)");
}

#[test]
fn criterion_09_geometry_property_suite() {
    let start = Instant::now();
    let spaces = vec![
        SpaceSpec::Euclidean { dim: 3 },
        sphere(),
        SpaceSpec::Hyperbolic { dim: 3, kappa: -1.0 },
        SpaceSpec::SpdAffine { dim: 4 },
        SpaceSpec::SpdBuresWasserstein { dim: 4, spectral_floor: 0.1 },
        SpaceSpec::MetricTree {
            tree: TreeSpec {
                nodes: 5,
                edges: vec![
                    TreeEdge { u: 0, v: 1, length: 1.0 },
                    TreeEdge { u: 0, v: 2, length: 0.5 },
                    TreeEdge { u: 1, v: 3, length: 2.0 },
                    TreeEdge { u: 1, v: 4, length: 0.7 },
                ],
            },
        },
    ];
    for space in &spaces {
        let report = selftest(space, 10_000, 909).unwrap();
        assert!(report.pass, "{space:?}: {report:?}");
    }
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 60.0, "runtime {secs:.1}s exceeds 1min");
    report!(
        "criterion 09 geometry property suite: pass ({} spaces x 10000 cases in {secs:.1}s)",
        spaces.len()
    );
}

#[test]
fn criterion_10_cat_certification() {
    let space = sphere();
    let origin = space.origin();
    let mut nondegenerate = 0usize;
    let mut flat_violations = 0usize;
    let mut max_own_excess = f64::NEG_INFINITY;
    let mut checked = 0usize;
    for i in 0..1000u64 {
        let mut rng = stream_rng(1010, i);
        let x = random_point(&space, &origin, 0.45, &mut rng).unwrap();
        let y = random_point(&space, &origin, 0.45, &mut rng).unwrap();
        let z = random_point(&space, &origin, 0.45, &mut rng).unwrap();
        // Against the sphere's own curvature: thinness must hold.
        let own = cat_check(&space, &x, &y, &z, 1.0, 32).unwrap();
        max_own_excess = max_own_excess.max(own.max_excess);
        checked += 1;
        // Against kappa = 0: positive curvature shows as positive excess on
        // nondegenerate triangles.
        let a = space.dist(&y, &z).unwrap();
        let b = space.dist(&x, &z).unwrap();
        let c = space.dist(&x, &y).unwrap();
        let min_side = a.min(b).min(c);
        let slack = (a + b - c).min(a + c - b).min(b + c - a);
        if min_side >= 0.05 && slack >= 0.01 {
            nondegenerate += 1;
            let flat = cat_check(&space, &x, &y, &z, 0.0, 32).unwrap();
            if flat.max_excess > 1e-9 {
                flat_violations += 1;
            }
        }
    }
    assert!(
        max_own_excess <= 1e-8,
        "sphere vs own kappa: max excess {max_own_excess:e}"
    );
    assert!(nondegenerate > 300, "only {nondegenerate} nondegenerate triangles");
    let frac = flat_violations as f64 / nondegenerate as f64;
    assert!(frac >= 0.95, "only {frac:.3} of nondegenerate triangles violate CAT(0)");

    // Metric trees are CAT(kappa) for every kappa; check kappa = 0.
    let tree = SpaceSpec::MetricTree {
        tree: TreeSpec {
            nodes: 4,
            edges: vec![
                TreeEdge { u: 0, v: 1, length: 1.0 },
                TreeEdge { u: 0, v: 2, length: 1.5 },
                TreeEdge { u: 0, v: 3, length: 0.5 },
            ],
        },
    };
    let mut max_tree_excess = f64::NEG_INFINITY;
    for i in 0..1000u64 {
        let mut rng = stream_rng(1011, i);
        let x = random_point(&tree, &tree.origin(), 1.0, &mut rng).unwrap();
        let y = random_point(&tree, &tree.origin(), 1.0, &mut rng).unwrap();
        let z = random_point(&tree, &tree.origin(), 1.0, &mut rng).unwrap();
        let r = cat_check(&tree, &x, &y, &z, 0.0, 16).unwrap();
        max_tree_excess = max_tree_excess.max(r.max_excess);
    }
    assert!(max_tree_excess <= 1e-9, "tree max excess {max_tree_excess:e}");
    report!(
        "criterion 10 cat certification: pass ({checked} sphere triangles, own excess {max_own_excess:.1e}, \
         {frac:.2} violate CAT(0), tree excess {max_tree_excess:.1e})"
    );
}

fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
        let mut r = vec![0.0; v.len()];
        for (pos, &i) in idx.iter().enumerate() {
            r[i] = pos as f64;
        }
        r
    };
    let rx = rank(xs);
    let ry = rank(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - mx)).sum();
    let sxx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = ry.iter().map(|b| (b - mx) * (b - mx)).sum();
    sxy / (sxx * syy).sqrt()
}

#[test]
fn criterion_11_robustness_contrast() {
    let space = sphere();
    let origin = space.origin();
    let spec = SamplerSpec::TangentGaussian {
        center: origin.clone(),
        scale: 0.2,
        max_radius: None,
    };
    let sampler = Sampler::new(&spec, &space).unwrap();
    let mut rng = stream_rng(1111, 0);
    let mut stats = SampleStats::default();
    let clean: Vec<Point> = (0..50)
        .map(|_| sampler.draw(&mut rng, &mut stats).unwrap())
        .collect();
    // 20% contamination: a tight cluster at distance 1.0 from the center.
    let basis = space.tangent_basis(&origin).unwrap();
    let far = space
        .exp(&origin, &space.tangent_from_basis_coords(&basis, &[1.0, 0.0]))
        .unwrap();
    let mut contaminated = clean.clone();
    for (j, p) in contaminated.iter_mut().take(10).enumerate() {
        let jitter = space.tangent_from_basis_coords(
            &space.tangent_basis(&far).unwrap(),
            &[0.01 * j as f64, 0.005 * j as f64],
        );
        *p = space.exp(&far, &jitter).unwrap();
    }
    let config = tight_config();
    let displacement = |loss: &LossSpec| -> f64 {
        let a = minimize(&space, loss, &clean, &config).unwrap().x_hat;
        let b = minimize(&space, loss, &contaminated, &config).unwrap().x_hat;
        space.dist(&a, &b).unwrap()
    };
    let disp_mean = displacement(&LossSpec::power(2.0));
    let disp_median = displacement(&LossSpec::power(1.0));
    assert!(
        disp_median < 0.5 * disp_mean,
        "median displacement {disp_median} not < 0.5 x {disp_mean}"
    );
    // Huber interpolates between the two as c grows.
    let cs = [0.05, 0.1, 0.2, 0.35, 0.5, 0.8, 1.2, 2.0];
    let disps: Vec<f64> = cs.iter().map(|&c| displacement(&LossSpec::huber(c))).collect();
    let rho = spearman(&cs, &disps);
    assert!(rho >= 0.9, "Spearman(displacement, c) = {rho}");
    report!(
        "criterion 11 robustness contrast: pass (median {disp_median:.4} < 0.5 x mean {disp_mean:.4}, spearman {rho:.3})"
    );
}

#[test]
fn criterion_12_reproducibility() {
    let space = SpaceSpec::Euclidean { dim: 2 };
    let spec = SamplerSpec::TangentGaussian {
        center: space.origin(),
        scale: 1.0,
        max_radius: None,
    };
    let run_clt = || {
        let r = clt_experiment(
            &space,
            &LossSpec::power(2.0),
            &spec,
            &space.origin(),
            100,
            40,
            &tight_config(),
            1212,
        )
        .unwrap();
        serde_json::to_string(&r).unwrap()
    };
    let run_consistency = || {
        let sampler = Sampler::new(&spec, &space).unwrap();
        let t = consistency_curve(
            &space,
            &LossSpec::power(2.0),
            &sampler,
            &space.origin(),
            &[50, 200],
            20,
            &tight_config(),
            1213,
        );
        serde_json::to_string(&t.unwrap()).unwrap()
    };
    let baseline_clt = run_clt();
    let baseline_cons = run_consistency();
    // Same seed, repeated run.
    assert_eq!(baseline_clt, run_clt());
    assert_eq!(baseline_cons, run_consistency());
    // Same seed, different thread counts.
    for threads in [1usize, 3] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let (clt, cons) = pool.install(|| (run_clt(), run_consistency()));
        assert_eq!(baseline_clt, clt, "clt output differs at {threads} threads");
        assert_eq!(baseline_cons, cons, "consistency output differs at {threads} threads");
    }
    report!("criterion 12 reproducibility: pass (byte-identical at 1 and 3 threads)");
}
