//! Trails drawn from known ground-truth kinematics, with a controlled number
//! of outliers, for recovery tests where the optimum is known analytically.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::ingest::{Provenance, Trail, TrailSet};
use crate::models::{clip_velocity, KinematicState, ModelParams, MIN_SPEED};
use crate::validation::{allowed_misses, ValidationConfig, Validator};

const PITCH_LENGTH: f64 = 105.0;
const PITCH_WIDTH: f64 = 68.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Generator {
    ConstantSpeed { v_true: f64 },
    CappedAccel { a_true: f64, v_true: f64 },
    TwoSegment { t_inert_true: f64, v_final_true: f64 },
}

impl Generator {
    /// Ground-truth model whose reachable set the targets are drawn from.
    pub fn model(&self) -> ModelParams {
        match *self {
            Generator::ConstantSpeed { v_true } => ModelParams::ConstantSpeed { v_max: v_true },
            Generator::CappedAccel { a_true, v_true } => ModelParams::CappedAccel {
                a_max: a_true,
                v_max: v_true,
            },
            Generator::TwoSegment {
                t_inert_true,
                v_final_true,
            } => ModelParams::TwoSegment {
                t_inert: t_inert_true,
                keep_initial: true,
                v_const: Some(v_final_true),
                a_max: None,
                v_max: None,
            },
        }
    }

    fn speed_cap(&self) -> f64 {
        match *self {
            Generator::ConstantSpeed { v_true } | Generator::CappedAccel { v_true, .. } => v_true,
            Generator::TwoSegment { v_final_true, .. } => v_final_true,
        }
    }

    /// Center of the reachable set and an upper bound on its polar radius.
    fn frame(&self, s: &KinematicState, dt: f64) -> (Point2, f64) {
        match *self {
            Generator::ConstantSpeed { v_true } => (s.x0, v_true * dt),
            Generator::CappedAccel { v_true, .. } => {
                (s.x0 + clip_velocity(s.v0, v_true) * dt, 2.0 * v_true * dt)
            }
            Generator::TwoSegment {
                t_inert_true,
                v_final_true,
            } => {
                let speed = s.v0.norm();
                let t = t_inert_true.min(dt);
                let c = if speed < MIN_SPEED { s.x0 } else { s.x0 + s.v0 * t };
                (c, v_final_true * (dt - t))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSampling {
    /// Uniform over the area of the reachable set.
    #[default]
    Uniform,
    /// On the boundary of the reachable set.
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub generator: Generator,
    pub n_trails: usize,
    #[serde(default)]
    pub outlier_fraction: f64,
    #[serde(default)]
    pub outlier_offset: f64,
    pub seed: u64,
    pub dt: f64,
    #[serde(default)]
    pub sampling: TargetSampling,
}

impl SyntheticSpec {
    pub fn new(generator: Generator, n_trails: usize, seed: u64) -> Self {
        SyntheticSpec {
            generator,
            n_trails,
            outlier_fraction: 0.0,
            outlier_offset: 0.0,
            seed,
            dt: 1.0,
            sampling: TargetSampling::Uniform,
        }
    }

    pub fn with_outliers(mut self, fraction: f64, offset: f64) -> Self {
        self.outlier_fraction = fraction;
        self.outlier_offset = offset;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.model().validate()?;
        if self.n_trails == 0 {
            return Err(Error::Config("n_trails must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return Err(Error::Config(format!(
                "outlier_fraction must be in [0, 1), got {}",
                self.outlier_fraction
            )));
        }
        if !(self.outlier_offset.is_finite() && self.outlier_offset >= 0.0) {
            return Err(Error::Config("outlier_offset must be >= 0".into()));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config("dt must be > 0".into()));
        }
        if let Generator::TwoSegment { t_inert_true, .. } = self.generator {
            if t_inert_true >= self.dt {
                return Err(Error::Config("t_inert_true must be < dt".into()));
            }
        }
        Ok(())
    }

    /// Exact number of injected outliers, `⌊outlier_fraction · n_trails⌋`.
    pub fn n_outliers(&self) -> usize {
        // Nudge so products like 0.0002 · 10⁴ = 1.9999… still floor to 2.
        let exact = self.outlier_fraction * self.n_trails as f64;
        ((exact * (1.0 + 1e-12)).floor() as usize).min(self.n_trails)
    }
}

/// Independent random stream for trail `i`, so trails can be generated in
/// any order (or in parallel) with identical results.
fn trail_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn generate_trails(spec: &SyntheticSpec) -> Result<TrailSet> {
    spec.validate()?;
    let model = spec.generator.model();
    let dt = spec.dt;
    let n_out = spec.n_outliers();
    let mut is_outlier = vec![false; spec.n_trails];
    let mut pick = trail_rng(spec.seed, u64::MAX);
    for i in rand::seq::index::sample(&mut pick, spec.n_trails, n_out) {
        is_outlier[i] = true;
    }

    let mut trails = Vec::with_capacity(spec.n_trails);
    for (i, &outlier) in is_outlier.iter().enumerate() {
        let mut rng = trail_rng(spec.seed, i as u64);
        let x0 = Point2::new(rng.gen::<f64>() * PITCH_LENGTH, rng.gen::<f64>() * PITCH_WIDTH);
        let speed = rng.gen::<f64>() * spec.generator.speed_cap();
        let v0 = Point2::from_angle(rng.gen::<f64>() * TAU) * speed;
        let s = KinematicState::new(x0, v0);
        let (center, bound) = spec.generator.frame(&s, dt);
        let polar = |phi: f64| -> Result<f64> { Ok(model.boundary_point(&s, dt, phi)?.distance(center)) };

        let xt = if outlier {
            let phi = rng.gen::<f64>() * TAU;
            center + Point2::from_angle(phi) * (polar(phi)? + spec.outlier_offset)
        } else {
            match spec.sampling {
                TargetSampling::Boundary => {
                    let phi = rng.gen::<f64>() * TAU;
                    center + Point2::from_angle(phi) * polar(phi)?
                }
                TargetSampling::Uniform => loop {
                    let phi = rng.gen::<f64>() * TAU;
                    let rho = bound * rng.gen::<f64>().sqrt();
                    if rho <= polar(phi)? {
                        break center + Point2::from_angle(phi) * rho;
                    }
                },
            }
        };
        trails.push(Trail::new(x0, v0, xt, dt)?);
    }

    Ok(TrailSet {
        provenance: Provenance {
            source: "synthetic".into(),
            seed: Some(spec.seed),
            n_trails: trails.len(),
            n_candidates: None,
            dt: Some(dt),
            generator: Some(serde_json::to_value(spec)?),
        },
        trails,
    })
}

/// Smallest radius of the regular `n`-gon (vertices at angles `2πk/n`)
/// centred at the origin that contains `d`.
pub fn covering_polygon_radius(d: Point2, n: usize) -> f64 {
    let r = d.norm();
    if r == 0.0 {
        return 0.0;
    }
    let sector = TAU / n as f64;
    let theta = d.y.atan2(d.x).rem_euclid(TAU);
    let mid = ((theta / sector).floor() + 0.5) * sector;
    r * (theta - mid).cos() / (PI / n as f64).cos()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantSpeedOptimum {
    /// Smallest speed whose polygons satisfy the hit-ratio threshold.
    pub v_max: f64,
    /// The same quantile for exact disks, `|xt − x0| / dt`.
    pub v_max_disk: f64,
    /// Score of `ConstantSpeed(v_max)` from a full-scan validation.
    pub score: f64,
}

/// Best constant-speed model for `trails`: the smallest speed covering the
/// required number of trails, and its score.
pub fn analytic_optimum_constant_speed(
    trails: &TrailSet,
    cfg: &ValidationConfig,
) -> Result<ConstantSpeedOptimum> {
    cfg.validate()?;
    let dt = trails
        .common_dt()
        .ok_or_else(|| Error::Config("trails must share one dt".into()))?;
    let n = trails.len();
    let required = n - allowed_misses(cfg.hit_ratio_min, n);
    if required == 0 {
        return Err(Error::Config("threshold requires no correct predictions".into()));
    }
    let quantile = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[required - 1]
    };
    let disk = quantile(trails.trails.iter().map(|t| t.displacement() / dt).collect());
    let mut v_max = quantile(
        trails
            .trails
            .iter()
            .map(|t| covering_polygon_radius(t.xt - t.x0, cfg.n_vertices) / dt)
            .collect(),
    );

    let validator = Validator::new(*cfg)?;
    // Rounding can leave a boundary trail a few ulps outside; grow minimally.
    for _ in 0..64 {
        let r = validator.validate_reference(&ModelParams::ConstantSpeed { v_max }, &trails.trails)?;
        if r.score > 0.0 {
            return Ok(ConstantSpeedOptimum {
                v_max,
                v_max_disk: disk,
                score: r.score,
            });
        }
        v_max *= 1.0 + 4.0 * f64::EPSILON;
    }
    Err(Error::Config(format!(
        "could not reach the hit-ratio threshold near v_max = {v_max}"
    )))
}
