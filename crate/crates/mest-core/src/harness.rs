//! Experiment orchestration: configuration files, persistence, and the
//! property suites surfaced by the CLI (`selftest`, `cat-check`).
//!
//! All randomized work is keyed by (seed, stream) so outputs are identical
//! across runs and thread counts. Result files never contain wall-clock
//! data; timing lives in the side-car manifest.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::asymptotics::{clt_experiment, CltReport};
use crate::cat::{cat_check, CatReport, CAT_TOL};
use crate::error::{Error, Result};
use crate::estimator::{consistency_curve, minimize, ConsistencyTable, EstimateResult, EstimatorConfig};
use crate::exec;
use crate::geometry::{Point, SpaceSpec};
use crate::loss::LossSpec;
use crate::rng::{stream_rng, STREAM_SELFTEST};
use crate::sampler::{SampleStats, Sampler, SamplerSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub space: SpaceSpec,
    pub loss: LossSpec,
    pub sampler: SamplerSpec,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<Vec<usize>>,
    pub reps: usize,
    pub seed: u64,
    /// Population minimizer override for asymmetric samplers. Symmetric
    /// samplers carry their own minimizer by construction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_star: Option<Point>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.space.validate()?;
        self.loss.validate()?;
        self.estimator.validate()?;
        Sampler::new(&self.sampler, &self.space)?;
        if self.reps == 0 {
            return Err(Error::InvalidConfig("reps must be >= 1".into()));
        }
        if let Some(x) = &self.x_star {
            self.space.check_point(x)?;
        }
        Ok(())
    }

    /// The minimizer a CLT or consistency run verifies against: the
    /// sampler's designed center, or the explicit override.
    pub fn resolve_x_star(&self) -> Result<Point> {
        if let Some(x) = &self.x_star {
            return Ok(x.clone());
        }
        Sampler::new(&self.sampler, &self.space)?
            .designed_minimizer()
            .ok_or_else(|| {
                Error::InvalidConfig(
                    "sampler has no designed minimizer; supply x_star explicitly".into(),
                )
            })
    }

    pub fn run_clt(&self) -> Result<CltReport> {
        self.validate()?;
        let n = self
            .n
            .ok_or_else(|| Error::InvalidConfig("clt run needs `n`".into()))?;
        let x_star = self.resolve_x_star()?;
        clt_experiment(
            &self.space,
            &self.loss,
            &self.sampler,
            &x_star,
            n,
            self.reps,
            &self.estimator,
            self.seed,
        )
    }

    pub fn run_consistency(&self) -> Result<ConsistencyTable> {
        self.validate()?;
        let grid = self
            .n_grid
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig("consistency run needs `n_grid`".into()))?;
        let x_star = self.resolve_x_star()?;
        let sampler = Sampler::new(&self.sampler, &self.space)?;
        consistency_curve(
            &self.space,
            &self.loss,
            &sampler,
            &x_star,
            grid,
            self.reps,
            &self.estimator,
            self.seed,
        )
    }
}

/// Standalone estimation input: data are supplied, not sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateJob {
    pub space: SpaceSpec,
    pub loss: LossSpec,
    pub points: Vec<Point>,
    #[serde(default)]
    pub estimator: EstimatorConfig,
}

impl EstimateJob {
    pub fn run(&self) -> Result<EstimateResult> {
        self.space.validate()?;
        for p in &self.points {
            self.space.check_point(p)?;
        }
        minimize(&self.space, &self.loss, &self.points, &self.estimator)
    }
}

/// SHA-256 of the canonical JSON serialization.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let json = serde_json::to_vec(value)?;
    let mut h = Sha256::new();
    h.update(&json);
    Ok(format!("{:x}", h.finalize()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub wall_time_secs: f64,
}

/// Atomically writes `value` as JSON: temp file in the same directory,
/// then rename.
pub fn persist_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        serde_json::to_writer_pretty(&mut f, value)?;
        f.write_all(b"\n")?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// One row per replication: rep index then the tangent coordinates, at
/// 17 significant digits.
pub fn write_errors_csv(path: &Path, errors: &[Vec<f64>]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        for (i, row) in errors.iter().enumerate() {
            write!(f, "{i}")?;
            for v in row {
                write!(f, ",{v:.16e}")?;
            }
            writeln!(f)?;
        }
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Runs `work`, persists its report plus a manifest, and removes partial
/// outputs when anything fails.
pub fn run_persisted<C, T, F>(
    config: &C,
    seed: u64,
    out: &Path,
    errors_csv: Option<&Path>,
    work: F,
) -> Result<T>
where
    C: Serialize,
    T: Serialize,
    F: FnOnce() -> Result<(T, Vec<Vec<f64>>)>,
{
    let start = Instant::now();
    let cleanup = |paths: &[&Path]| {
        for p in paths {
            let _ = fs::remove_file(p);
        }
    };
    let result = (|| {
        let (report, errors) = work()?;
        persist_json(out, &report)?;
        if let Some(csv) = errors_csv {
            write_errors_csv(csv, &errors)?;
        }
        let manifest = RunManifest {
            config_hash: config_hash(config)?,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_secs: start.elapsed().as_secs_f64(),
        };
        persist_json(&manifest_path(out), &manifest)?;
        Ok(report)
    })();
    if result.is_err() {
        let mpath = manifest_path(out);
        let mut doomed: Vec<&Path> = vec![out, &mpath];
        if let Some(csv) = errors_csv {
            doomed.push(csv);
        }
        cleanup(&doomed);
    }
    result
}

/// Draws a random point within radius `scale` of `center` (tree spaces:
/// uniform edge and offset).
pub fn random_point<R: rand::Rng>(
    space: &SpaceSpec,
    center: &Point,
    scale: f64,
    rng: &mut R,
) -> Result<Point> {
    match space {
        SpaceSpec::MetricTree { tree } => {
            let e = rng.gen_range(0..tree.edges.len());
            let s: f64 = rng.gen_range(0.0..tree.edges[e].length);
            Ok(Point(vec![e as f64, s]))
        }
        _ => {
            let spec = SamplerSpec::GeodesicBallUniform {
                center: center.clone(),
                scale,
            };
            let sampler = Sampler::new(&spec, space)?;
            let mut stats = SampleStats::default();
            sampler.draw(rng, &mut stats)
        }
    }
}

/// Geometry property suite over seeded random cases: exp/log roundtrip,
/// transport isometry, geodesic speed, triangle inequality, and the SPD
/// affine midpoint identity A # B.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelftestReport {
    pub cases: usize,
    pub max_roundtrip: f64,
    pub max_transport_isometry: f64,
    pub max_speed_dev: f64,
    pub max_triangle_defect: f64,
    pub max_midpoint_dev: f64,
    pub pass: bool,
}

pub const ROUNDTRIP_TOL: f64 = 1e-8;
pub const TRANSPORT_TOL: f64 = 1e-10;
pub const SPEED_TOL: f64 = 1e-8;
pub const MIDPOINT_TOL: f64 = 1e-9;

pub fn selftest(space: &SpaceSpec, cases: usize, seed: u64) -> Result<SelftestReport> {
    space.validate()?;
    let origin = space.origin();
    let has_tangents = !matches!(space, SpaceSpec::MetricTree { .. });
    let has_transport = !matches!(
        space,
        SpaceSpec::MetricTree { .. } | SpaceSpec::SpdBuresWasserstein { .. }
    );
    // Stay well inside guards and (for BW) away from the spectral floor.
    let scale = match space {
        SpaceSpec::Sphere { kappa, .. } => 0.5 / kappa.sqrt(),
        SpaceSpec::SpdBuresWasserstein { .. } => 0.3,
        _ => 0.7,
    };

    struct Case {
        roundtrip: f64,
        transport: f64,
        speed: f64,
        triangle: f64,
        midpoint: f64,
    }

    let results: Vec<Result<Case>> = exec::map_indexed(cases, |i| {
        let mut rng = stream_rng(seed ^ STREAM_SELFTEST, i as u64);
        let x = random_point(space, &origin, scale, &mut rng)?;
        let y = random_point(space, &origin, scale, &mut rng)?;
        let z = random_point(space, &origin, scale, &mut rng)?;
        let dxy = space.dist(&x, &y)?;

        let mut c = Case {
            roundtrip: 0.0,
            transport: 0.0,
            speed: 0.0,
            triangle: 0.0,
            midpoint: 0.0,
        };

        if has_tangents {
            let v = space.log(&x, &y)?;
            let back = space.exp(&x, &v)?;
            c.roundtrip = space.dist(&back, &y)?;
            // Tangent-norm/distance agreement rides along.
            c.roundtrip = c.roundtrip.max((space.norm(&x, &v)? - dxy).abs());

            if has_transport {
                let w = space.log(&x, &z)?;
                let t = space.transport(&x, &y, &w)?;
                c.transport = (space.norm(&y, &t)? - space.norm(&x, &w)?).abs();
            }
        }

        use rand::Rng;
        let t: f64 = rng.gen();
        let gt = space.geodesic_point(&x, &y, t)?;
        c.speed = (space.dist(&x, &gt)? - t * dxy).abs();

        c.triangle = (space.dist(&x, &z)? - dxy - space.dist(&y, &z)?).max(0.0);

        if let SpaceSpec::SpdAffine { .. } = space {
            let mid = space.geodesic_point(&x, &y, 0.5)?;
            let sharp = crate::geometry::spd::geometric_mean(space.spd_p(), &x.0, &y.0)?;
            c.midpoint = mid
                .0
                .iter()
                .zip(&sharp)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
        }
        Ok(c)
    });

    let mut report = SelftestReport {
        cases,
        max_roundtrip: 0.0,
        max_transport_isometry: 0.0,
        max_speed_dev: 0.0,
        max_triangle_defect: 0.0,
        max_midpoint_dev: 0.0,
        pass: false,
    };
    for r in results {
        let c = r?;
        report.max_roundtrip = report.max_roundtrip.max(c.roundtrip);
        report.max_transport_isometry = report.max_transport_isometry.max(c.transport);
        report.max_speed_dev = report.max_speed_dev.max(c.speed);
        report.max_triangle_defect = report.max_triangle_defect.max(c.triangle);
        report.max_midpoint_dev = report.max_midpoint_dev.max(c.midpoint);
    }
    report.pass = report.max_roundtrip <= ROUNDTRIP_TOL
        && report.max_transport_isometry <= TRANSPORT_TOL
        && report.max_speed_dev <= SPEED_TOL
        && report.max_triangle_defect <= SPEED_TOL
        && report.max_midpoint_dev <= MIDPOINT_TOL;
    Ok(report)
}

/// Random-triangle CAT(kappa) certification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatSuiteReport {
    pub kappa: f64,
    pub triangles: usize,
    /// Triangles skipped for failing a precondition (perimeter bound,
    /// non-unique geodesics, degeneracy).
    pub skipped: usize,
    pub violations: usize,
    pub max_excess: f64,
    pub reports: Vec<CatReport>,
}

pub fn cat_suite(
    space: &SpaceSpec,
    kappa: f64,
    triangles: usize,
    scale: f64,
    seed: u64,
) -> Result<CatSuiteReport> {
    space.validate()?;
    let origin = space.origin();
    let results: Vec<Result<Option<CatReport>>> = exec::map_indexed(triangles, |i| {
        let mut rng = stream_rng(seed ^ STREAM_SELFTEST, (triangles + i) as u64);
        let x = random_point(space, &origin, scale, &mut rng)?;
        let y = random_point(space, &origin, scale, &mut rng)?;
        let z = random_point(space, &origin, scale, &mut rng)?;
        match cat_check(space, &x, &y, &z, kappa, 32) {
            Ok(r) => Ok(Some(r)),
            // Precondition failures (perimeter bound, non-unique geodesics,
            // guard) are skipped, not fatal.
            Err(Error::NonUniqueGeodesic(_))
            | Err(Error::GuardViolation(_))
            | Err(Error::InvalidConfig(_)) => Ok(None),
            Err(e) => Err(e),
        }
    });
    let mut report = CatSuiteReport {
        kappa,
        triangles,
        skipped: 0,
        violations: 0,
        max_excess: f64::NEG_INFINITY,
        reports: Vec::new(),
    };
    for r in results {
        match r? {
            None => report.skipped += 1,
            Some(cr) => {
                report.max_excess = report.max_excess.max(cr.max_excess);
                if cr.max_excess > CAT_TOL {
                    report.violations += 1;
                }
                report.reports.push(cr);
            }
        }
    }
    Ok(report)
}

/// Checks that the Monte-Carlo population objective over a tangent grid
/// around `x_star` is minimized at the center, validating a user-supplied
/// minimizer before a CLT run. Returns the grid-point offset norm of the
/// best grid point (0 when the center wins).
pub fn population_grid_check(
    space: &SpaceSpec,
    loss: &LossSpec,
    sampler: &Sampler,
    x_star: &Point,
    radius: f64,
    grid_n: usize,
    m: usize,
    seed: u64,
) -> Result<f64> {
    let basis = space.tangent_basis(x_star)?;
    let k = basis.len();
    if k > 3 {
        return Err(Error::Unsupported(
            "tangent-grid validation supports tangent dimension <= 3".into(),
        ));
    }
    let mut rng = stream_rng(seed, STREAM_SELFTEST);
    let mut stats = SampleStats::default();
    let sample: Vec<Point> = (0..m)
        .map(|_| sampler.draw(&mut rng, &mut stats))
        .collect::<Result<_>>()?;
    let side = 2 * grid_n + 1;
    let total = side.pow(k as u32);
    let values: Vec<Result<(f64, f64)>> = exec::map_indexed(total, |flat| {
        let mut idx = flat;
        let mut u = vec![0.0; k];
        for uj in u.iter_mut() {
            let offs = (idx % side) as i64 - grid_n as i64;
            idx /= side;
            *uj = offs as f64 * radius / grid_n as f64;
        }
        let v = space.tangent_from_basis_coords(&basis, &u);
        let x = space.exp(x_star, &v)?;
        let mut acc = 0.0;
        for z in &sample {
            acc += crate::loss::cost(loss, space, z, &x)?;
        }
        let offset_norm = u.iter().map(|a| a * a).sum::<f64>().sqrt();
        Ok((acc / m as f64, offset_norm))
    });
    let mut best: Option<(f64, f64)> = None;
    for v in values {
        let (f, off) = v?;
        if best.map_or(true, |(bf, _)| f < bf) {
            best = Some((f, off));
        }
    }
    Ok(best.expect("nonempty grid").1)
}
