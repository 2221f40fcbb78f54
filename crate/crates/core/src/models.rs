//! Parametric motion models. Each maps a kinematic state `(x0, v0)` and a
//! time horizon to the boundary of the area a player can reach, which is
//! polygonised at evenly spaced angles.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{boundary_polygon_with, circle_polygon, AngleTable, Point2, Polygon};

pub const DEFAULT_N_VERTICES: usize = 200;

/// Below this speed (m/s) the direction of motion is treated as undefined.
pub const MIN_SPEED: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicState {
    pub x0: Point2,
    pub v0: Point2,
}

impl KinematicState {
    pub fn new(x0: Point2, v0: Point2) -> Self {
        KinematicState { x0, v0 }
    }
}

/// Model family together with its parameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelParams {
    /// Disk of radius `v_max·dt` around `x0`.
    ConstantSpeed { v_max: f64 },
    /// Disk of radius `½·a_max·dt²` around `x0 + v0·dt`.
    ConstantAccel { a_max: f64 },
    /// Acceleration up to a speed cap; star-shaped around `x0 + v0*·dt`.
    CappedAccel { a_max: f64, v_max: f64 },
    /// A straight inertial segment along `v0` followed by free constant-speed motion.
    TwoSegment {
        t_inert: f64,
        keep_initial: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        v_const: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a_max: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        v_max: Option<f64>,
    },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{name} must be finite and > 0, got {v}")))
    }
}

impl ModelParams {
    pub fn family(&self) -> ModelFamily {
        match self {
            ModelParams::ConstantSpeed { .. } => ModelFamily::ConstantSpeed,
            ModelParams::ConstantAccel { .. } => ModelFamily::ConstantAccel,
            ModelParams::CappedAccel { .. } => ModelFamily::CappedAccel,
            ModelParams::TwoSegment { .. } => ModelFamily::TwoSegment,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ModelParams::ConstantSpeed { v_max } => positive("v_max", v_max),
            ModelParams::ConstantAccel { a_max } => positive("a_max", a_max),
            ModelParams::CappedAccel { a_max, v_max } => {
                positive("a_max", a_max)?;
                positive("v_max", v_max)
            }
            ModelParams::TwoSegment {
                t_inert,
                keep_initial,
                v_const,
                a_max,
                v_max,
            } => {
                if !(t_inert.is_finite() && t_inert >= 0.0) {
                    return Err(Error::InvalidParams(format!(
                        "t_inert must be finite and >= 0, got {t_inert}"
                    )));
                }
                let accel = match (a_max, v_max) {
                    (Some(a), Some(v)) => {
                        positive("a_max", a)?;
                        positive("v_max", v)?;
                        true
                    }
                    (None, None) => false,
                    _ => {
                        return Err(Error::InvalidParams(
                            "a_max and v_max must be set together".into(),
                        ))
                    }
                };
                match v_const {
                    Some(v) => positive("v_const", v),
                    None if keep_initial && accel => Ok(()),
                    None => Err(Error::InvalidParams(
                        "v_const is required unless keep_initial is set and a_max/v_max are given"
                            .into(),
                    )),
                }
            }
        }
    }

    /// Center and radius for the models whose reachable set is a disk.
    fn disk(&self, s: &KinematicState, dt: f64) -> Result<Option<(Point2, f64)>> {
        Ok(match *self {
            ModelParams::ConstantSpeed { v_max } => Some((s.x0, v_max * dt)),
            ModelParams::ConstantAccel { a_max } => Some((s.x0 + s.v0 * dt, 0.5 * a_max * dt * dt)),
            ModelParams::CappedAccel { .. } => None,
            ModelParams::TwoSegment { .. } => Some(two_segment_disk(s, dt, self)?),
        })
    }

    /// Boundary point at angle `phi` (radians).
    pub fn boundary_point(&self, s: &KinematicState, dt: f64, phi: f64) -> Result<Point2> {
        check_dt(dt)?;
        match *self {
            ModelParams::ConstantSpeed { v_max } => Ok(constant_speed_boundary(s, dt, v_max, phi)),
            ModelParams::ConstantAccel { a_max } => Ok(constant_accel_boundary(s, dt, a_max, phi)),
            ModelParams::CappedAccel { a_max, v_max } => {
                Ok(capped_accel_boundary(s, dt, a_max, v_max, phi))
            }
            ModelParams::TwoSegment { .. } => two_segment_boundary(s, dt, self, phi),
        }
    }
}

impl fmt::Display for ModelParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelParams::ConstantSpeed { v_max } => write!(f, "constant_speed(v_max={v_max:.4})"),
            ModelParams::ConstantAccel { a_max } => write!(f, "constant_accel(a_max={a_max:.4})"),
            ModelParams::CappedAccel { a_max, v_max } => {
                write!(f, "capped_accel(a_max={a_max:.4}, v_max={v_max:.4})")
            }
            ModelParams::TwoSegment {
                t_inert,
                keep_initial,
                v_const,
                a_max,
                v_max,
            } => {
                write!(f, "two_segment(t_inert={t_inert:.4}, keep_initial={keep_initial}")?;
                if let Some(v) = v_const {
                    write!(f, ", v_const={v:.4}")?;
                }
                if let (Some(a), Some(v)) = (a_max, v_max) {
                    write!(f, ", a_max={a:.4}, v_max={v:.4}")?;
                }
                write!(f, ")")
            }
        }
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if dt.is_finite() && dt > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("dt must be finite and > 0, got {dt}")))
    }
}

/// Common interface of all motion models: a pure map from kinematic state
/// and horizon to a reachable-area polygon.
pub trait MotionModel: Send + Sync {
    fn reachable_polygon_with(
        &self,
        s: &KinematicState,
        dt: f64,
        angles: &AngleTable,
    ) -> Result<Polygon>;

    fn reachable_polygon(&self, s: &KinematicState, dt: f64, n_vertices: usize) -> Result<Polygon> {
        let angles = AngleTable::new(n_vertices)?;
        self.reachable_polygon_with(s, dt, &angles)
    }
}

impl MotionModel for ModelParams {
    fn reachable_polygon_with(
        &self,
        s: &KinematicState,
        dt: f64,
        angles: &AngleTable,
    ) -> Result<Polygon> {
        check_dt(dt)?;
        match self.disk(s, dt)? {
            Some((center, radius)) => circle_polygon(center, radius, angles),
            None => {
                let ModelParams::CappedAccel { a_max, v_max } = *self else {
                    unreachable!("only the capped model has a non-circular boundary")
                };
                let mut dirs = angles.directions().iter();
                boundary_polygon_with(
                    |_| capped_accel_point(s, dt, a_max, v_max, *dirs.next().unwrap()),
                    angles,
                )
            }
        }
    }
}

pub fn constant_speed_boundary(s: &KinematicState, dt: f64, v_max: f64, phi: f64) -> Point2 {
    s.x0 + Point2::from_angle(phi) * (v_max * dt)
}

pub fn constant_accel_boundary(s: &KinematicState, dt: f64, a_max: f64, phi: f64) -> Point2 {
    s.x0 + Point2::from_angle(phi) * (0.5 * a_max * dt * dt) + s.v0 * dt
}

/// Initial velocity scaled down to at most `v_max`.
pub fn clip_velocity(v0: Point2, v_max: f64) -> Point2 {
    let speed = v0.norm();
    if speed > v_max {
        v0 * (v_max / speed)
    } else {
        v0
    }
}

/// Time until `|v0* + a·t·u| = v_max`, the non-negative root of
/// `a²t² + 2a(v0*·u)t + |v0*|² − v_max² = 0`. `v0c` must already be clipped.
pub fn time_to_max_speed(v0c: Point2, a_max: f64, v_max: f64, u: Point2) -> f64 {
    let along = v0c.dot(u);
    let slack = (v_max * v_max - v0c.dot(v0c)).max(0.0);
    let root = (along * along + slack).sqrt();
    // Rationalised form avoids cancellation when moving along v0.
    let t = if along > 0.0 {
        slack / (along + root)
    } else {
        root - along
    };
    (t / a_max).max(0.0)
}

fn capped_accel_point(s: &KinematicState, dt: f64, a_max: f64, v_max: f64, u: Point2) -> Point2 {
    let v0c = clip_velocity(s.v0, v_max);
    let t_acc = time_to_max_speed(v0c, a_max, v_max, u).min(dt);
    s.x0 + v0c * dt + u * (a_max * t_acc * (dt - 0.5 * t_acc))
}

pub fn capped_accel_boundary(s: &KinematicState, dt: f64, a_max: f64, v_max: f64, phi: f64) -> Point2 {
    capped_accel_point(s, dt, a_max, v_max, Point2::from_angle(phi))
}

fn two_segment_disk(s: &KinematicState, dt: f64, p: &ModelParams) -> Result<(Point2, f64)> {
    let ModelParams::TwoSegment {
        t_inert,
        keep_initial,
        v_const,
        a_max,
        v_max,
    } = *p
    else {
        return Err(Error::InvalidParams(format!("expected two_segment parameters, got {p}")));
    };
    if dt <= t_inert {
        return Err(Error::Degenerate(format!(
            "reachable set is a point: dt = {dt} s <= t_inert = {t_inert} s"
        )));
    }
    let missing = || Error::InvalidParams("v_const is not set".into());
    let speed = s.v0.norm();
    let v_inert = if keep_initial {
        speed
    } else {
        v_const.ok_or_else(missing)?
    };
    let v_final = match (a_max, v_max) {
        (Some(a), Some(v)) => (v_inert + a * t_inert).min(v),
        _ => v_const.ok_or_else(missing)?,
    };
    let t_star = t_inert.min(dt);
    let first_leg = if speed < MIN_SPEED {
        Point2::ZERO
    } else {
        s.v0 * (v_inert * t_star / speed)
    };
    Ok((s.x0 + first_leg, v_final * (dt - t_star)))
}

pub fn two_segment_boundary(s: &KinematicState, dt: f64, p: &ModelParams, phi: f64) -> Result<Point2> {
    let (center, radius) = two_segment_disk(s, dt, p)?;
    Ok(center + Point2::from_angle(phi) * radius)
}

/// The four model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    ConstantSpeed,
    ConstantAccel,
    CappedAccel,
    TwoSegment,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 4] = [
        ModelFamily::ConstantSpeed,
        ModelFamily::ConstantAccel,
        ModelFamily::CappedAccel,
        ModelFamily::TwoSegment,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelFamily::ConstantSpeed => "constant_speed",
            ModelFamily::ConstantAccel => "constant_accel",
            ModelFamily::CappedAccel => "capped_accel",
            ModelFamily::TwoSegment => "two_segment",
        }
    }

    /// Short label (a)–(d).
    pub fn letter(self) -> char {
        match self {
            ModelFamily::ConstantSpeed => 'a',
            ModelFamily::ConstantAccel => 'b',
            ModelFamily::CappedAccel => 'c',
            ModelFamily::TwoSegment => 'd',
        }
    }

    /// Number of free parameters of the family, discrete ones included.
    pub fn param_count(self) -> usize {
        match self {
            ModelFamily::ConstantSpeed | ModelFamily::ConstantAccel => 1,
            ModelFamily::CappedAccel => 2,
            ModelFamily::TwoSegment => 5,
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        ModelFamily::ALL
            .into_iter()
            .find(|f| f.name() == s || s.len() == 1 && s.starts_with(f.letter()))
            .ok_or_else(|| Error::Config(format!("unknown model family `{s}`")))
    }
}
