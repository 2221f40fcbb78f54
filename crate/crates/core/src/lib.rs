//! Validation and parameter optimisation of reachable-area motion models for
//! football player tracking data.
//!
//! A [`Trail`](ingest::Trail) records where a player was, how fast they were
//! moving, and where they ended up after a fixed horizon. A motion model
//! predicts the area reachable within that horizon as a polygon; the
//! validation score rewards models whose polygons contain the reached
//! positions (up to a tolerated miss ratio) while covering as little area
//! as possible.

pub mod error;
pub mod geometry;
pub mod ingest;
pub mod models;
pub mod optimizer;
pub mod plot;
pub mod sum;
pub mod synthetic;
pub mod validation;

pub use error::{Error, Result};
pub use geometry::{point_in_polygon, polygon_area, Point2, Polygon};
pub use ingest::{Trail, TrailSet};
pub use models::{KinematicState, ModelFamily, ModelParams, MotionModel};
pub use validation::{validate, ValidationConfig, ValidationResult, Validator};
