//! Samplers with known population minimizers.
//!
//! The symmetric samplers push a sign-symmetric tangent law through the
//! exponential map at `center`, which makes `center` the unique population
//! minimizer for every loss in scope. Asymmetric samplers (discrete support,
//! contamination) carry no designed minimizer.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, SpaceSpec, Tangent};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedAtom {
    pub point: Point,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplerSpec {
    /// exp(center, scale * xi) with xi standard normal in an orthonormal
    /// tangent basis, rejected beyond `max_radius` (default: the guard).
    TangentGaussian {
        center: Point,
        scale: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_radius: Option<f64>,
    },
    /// exp(center, r * u) with direction uniform and radius law uniform in
    /// the ball of radius `scale`.
    GeodesicBallUniform { center: Point, scale: f64 },
    DiscreteSupport { support: Vec<WeightedAtom> },
    /// TangentGaussian(center, scale) with probability 1 - fraction, the
    /// fixed offset point otherwise.
    Contaminated {
        center: Point,
        scale: f64,
        fraction: f64,
        offset: Point,
    },
}

/// Rejection bookkeeping for guard-truncated draws.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub draws: u64,
    pub truncations: u64,
}

impl SampleStats {
    pub fn truncation_rate(&self) -> f64 {
        if self.draws == 0 {
            0.0
        } else {
            self.truncations as f64 / self.draws as f64
        }
    }

    pub fn merge(&mut self, other: &SampleStats) {
        self.draws += other.draws;
        self.truncations += other.truncations;
    }
}

/// A sampler bound to its space, with the tangent basis precomputed.
pub struct Sampler {
    spec: SamplerSpec,
    space: SpaceSpec,
    basis: Option<Vec<Tangent>>,
    cumulative: Vec<f64>,
}

impl Sampler {
    pub fn new(spec: &SamplerSpec, space: &SpaceSpec) -> Result<Self> {
        spec_validate(spec, space)?;
        let basis = match spec {
            SamplerSpec::TangentGaussian { center, .. }
            | SamplerSpec::GeodesicBallUniform { center, .. }
            | SamplerSpec::Contaminated { center, .. } => Some(space.tangent_basis(center)?),
            SamplerSpec::DiscreteSupport { .. } => None,
        };
        let cumulative = match spec {
            SamplerSpec::DiscreteSupport { support } => {
                let mut acc = 0.0;
                support
                    .iter()
                    .map(|a| {
                        acc += a.weight;
                        acc
                    })
                    .collect()
            }
            _ => Vec::new(),
        };
        Ok(Sampler {
            spec: spec.clone(),
            space: space.clone(),
            basis,
            cumulative,
        })
    }

    pub fn spec(&self) -> &SamplerSpec {
        &self.spec
    }

    /// The designed population minimizer, when the sampler has one by
    /// construction.
    pub fn designed_minimizer(&self) -> Option<Point> {
        match &self.spec {
            SamplerSpec::TangentGaussian { center, .. }
            | SamplerSpec::GeodesicBallUniform { center, .. } => Some(center.clone()),
            _ => None,
        }
    }

    pub fn draw<R: Rng>(&self, rng: &mut R, stats: &mut SampleStats) -> Result<Point> {
        stats.draws += 1;
        match &self.spec {
            SamplerSpec::TangentGaussian {
                center,
                scale,
                max_radius,
            } => self.draw_gaussian(center, *scale, *max_radius, rng, stats),
            SamplerSpec::GeodesicBallUniform { center, scale } => {
                if *scale == 0.0 {
                    return Ok(center.clone());
                }
                let basis = self.basis.as_ref().expect("basis precomputed");
                let k = basis.len();
                let dir = random_unit(k, rng);
                let u: f64 = rng.gen();
                let r = scale * u.powf(1.0 / k as f64);
                let v = self.space.tangent_from_basis_coords(basis, &dir);
                self.space.exp(center, &v.scaled(r))
            }
            SamplerSpec::DiscreteSupport { support } => {
                let u: f64 = rng.gen();
                let idx = self
                    .cumulative
                    .iter()
                    .position(|&c| u < c)
                    .unwrap_or(support.len() - 1);
                Ok(support[idx].point.clone())
            }
            SamplerSpec::Contaminated {
                center,
                scale,
                fraction,
                offset,
            } => {
                let u: f64 = rng.gen();
                if u < *fraction {
                    Ok(offset.clone())
                } else {
                    self.draw_gaussian(center, *scale, None, rng, stats)
                }
            }
        }
    }

    fn draw_gaussian<R: Rng>(
        &self,
        center: &Point,
        scale: f64,
        max_radius: Option<f64>,
        rng: &mut R,
        stats: &mut SampleStats,
    ) -> Result<Point> {
        if scale == 0.0 {
            return Ok(center.clone());
        }
        let basis = self.basis.as_ref().expect("basis precomputed");
        let k = basis.len();
        let cap = max_radius
            .or_else(|| self.space.injectivity_guard().map(|g| 0.999 * g))
            .unwrap_or(f64::INFINITY);
        for _ in 0..10_000 {
            let xi: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let norm = scale * xi.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm >= cap {
                stats.truncations += 1;
                continue;
            }
            let v = self.space.tangent_from_basis_coords(basis, &xi);
            return self.space.exp(center, &v.scaled(scale));
        }
        Err(Error::Numerical(
            "tangent Gaussian rejection sampling failed to land inside the guard".into(),
        ))
    }
}

fn random_unit<R: Rng>(k: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

fn spec_validate(spec: &SamplerSpec, space: &SpaceSpec) -> Result<()> {
    space.validate()?;
    match spec {
        SamplerSpec::TangentGaussian { center, scale, max_radius } => {
            space.check_point(center)?;
            if *scale < 0.0 {
                return Err(Error::InvalidConfig("scale must be nonnegative".into()));
            }
            if let Some(m) = max_radius {
                if !(*m > 0.0) {
                    return Err(Error::InvalidConfig("max_radius must be positive".into()));
                }
            }
        }
        SamplerSpec::GeodesicBallUniform { center, scale } => {
            space.check_point(center)?;
            if *scale < 0.0 {
                return Err(Error::InvalidConfig("scale must be nonnegative".into()));
            }
        }
        SamplerSpec::DiscreteSupport { support } => {
            if support.is_empty() {
                return Err(Error::InvalidConfig("empty discrete support".into()));
            }
            let total: f64 = support.iter().map(|a| a.weight).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidConfig(format!(
                    "weights sum to {total}, expected 1"
                )));
            }
            for a in support {
                if a.weight < 0.0 {
                    return Err(Error::InvalidConfig("negative weight".into()));
                }
                space.check_point(&a.point)?;
            }
        }
        SamplerSpec::Contaminated { center, scale, fraction, offset } => {
            space.check_point(center)?;
            space.check_point(offset)?;
            if *scale < 0.0 {
                return Err(Error::InvalidConfig("scale must be nonnegative".into()));
            }
            if !(0.0..1.0).contains(fraction) {
                return Err(Error::InvalidConfig(format!(
                    "contamination fraction {fraction} outside [0, 1)"
                )));
            }
        }
    }
    Ok(())
}
