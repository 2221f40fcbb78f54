//! Validation score of a motion model over a set of trails.
//!
//! A trail is predicted correctly when its reached position lies inside the
//! model's polygon. The score is the inverse mean area of the correct
//! predictions, or 0 when the hit ratio falls below `hit_ratio_min`.
//! Evaluation stops as soon as the number of misses makes a zero score
//! certain.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::AngleTable;
use crate::ingest::Trail;
use crate::models::{KinematicState, MotionModel, DEFAULT_N_VERTICES};
use crate::sum::ExactSum;

pub const DEFAULT_HIT_RATIO_MIN: f64 = 0.99975;

/// Trails per work unit when validating in parallel.
const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationConfig {
    pub hit_ratio_min: f64,
    pub n_vertices: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            hit_ratio_min: DEFAULT_HIT_RATIO_MIN,
            n_vertices: DEFAULT_N_VERTICES,
        }
    }
}

impl ValidationConfig {
    pub fn new(hit_ratio_min: f64, n_vertices: usize) -> Result<Self> {
        let cfg = ValidationConfig {
            hit_ratio_min,
            n_vertices,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `hit_ratio_min` must lie in (0, 1]; zero is rejected because the
    /// score is undefined when nothing needs to be predicted correctly.
    pub fn validate(&self) -> Result<()> {
        if !(self.hit_ratio_min > 0.0 && self.hit_ratio_min <= 1.0) {
            return Err(Error::Config(format!(
                "hit_ratio_min must be in (0, 1], got {}",
                self.hit_ratio_min
            )));
        }
        if self.n_vertices < 3 {
            return Err(Error::Config(format!(
                "n_vertices must be >= 3, got {}",
                self.n_vertices
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationResult {
    /// Validation score in 1/m².
    pub score: f64,
    /// Mean correct-prediction area in m²; absent when the score is 0.
    pub score_inv_m2: Option<f64>,
    pub hit_ratio: f64,
    pub n_correct: usize,
    pub n_incorrect: usize,
    pub n_trails: usize,
    pub sum_correct_area: f64,
    pub terminated_early: bool,
}

impl ValidationResult {
    fn zero(n_correct: usize, n_incorrect: usize, n_trails: usize, area: f64, early: bool) -> Self {
        ValidationResult {
            score: 0.0,
            score_inv_m2: None,
            hit_ratio: n_correct as f64 / n_trails as f64,
            n_correct,
            n_incorrect,
            n_trails,
            sum_correct_area: area,
            terminated_early: early,
        }
    }
}

/// `n_correct / n_total`.
pub fn hit_ratio(n_correct: usize, n_total: usize) -> Result<f64> {
    if n_total == 0 {
        return Err(Error::EmptyTrailSet);
    }
    if n_correct > n_total {
        return Err(Error::Config(format!("{n_correct} correct out of {n_total}")));
    }
    Ok(n_correct as f64 / n_total as f64)
}

/// Inverse mean area of the correct predictions, `n_correct / Σ area`.
pub fn precision(n_correct: usize, sum_correct_area: f64) -> Result<f64> {
    if n_correct == 0 {
        return Err(Error::Config("precision is undefined without correct predictions".into()));
    }
    if !(sum_correct_area > 0.0) {
        return Err(Error::Config(format!(
            "precision needs a positive area sum, got {sum_correct_area}"
        )));
    }
    Ok(n_correct as f64 / sum_correct_area)
}

/// Largest number of misses among `n_trails` that still keeps
/// `hit_ratio >= hit_ratio_min`. Derived from the same floating-point
/// comparison as the score definition so that stopping on
/// `n_incorrect > allowed_misses` agrees with a full scan.
pub fn allowed_misses(hit_ratio_min: f64, n_trails: usize) -> usize {
    let ok = |k: usize| (n_trails - k) as f64 / n_trails as f64 >= hit_ratio_min;
    if n_trails == 0 {
        return 0;
    }
    let guess = ((1.0 - hit_ratio_min) * n_trails as f64).floor();
    let mut k = if guess.is_finite() && guess > 0.0 {
        (guess as usize).min(n_trails)
    } else {
        0
    };
    while k < n_trails && ok(k + 1) {
        k += 1;
    }
    while k > 0 && !ok(k) {
        k -= 1;
    }
    k
}

/// Whether `hit_ratio_min <= 1 − n_outlier / n_trails`, i.e. the threshold
/// tolerates the expected number of outliers.
pub fn check_threshold_condition(hit_ratio_min: f64, n_outlier_estimate: usize, n_trails: usize) -> bool {
    if n_trails == 0 {
        return n_outlier_estimate == 0;
    }
    n_outlier_estimate <= n_trails
        && (n_trails - n_outlier_estimate) as f64 / n_trails as f64 >= hit_ratio_min
}

/// Outcome of one prediction: the polygon area when the reached position is
/// inside, `None` otherwise. Model errors count as misses.
pub fn evaluate_trail<M: MotionModel + ?Sized>(model: &M, trail: &Trail, angles: &AngleTable) -> Option<f64> {
    let state = KinematicState::new(trail.x0, trail.v0);
    let poly = model.reachable_polygon_with(&state, trail.dt, angles).ok()?;
    poly.contains(trail.xt).then(|| poly.area())
}

#[derive(Default)]
struct Tally {
    correct: usize,
    incorrect: usize,
    area: ExactSum,
}

/// Validation with a cached angle table; reuse one instance for many models.
#[derive(Debug, Clone)]
pub struct Validator {
    cfg: ValidationConfig,
    angles: AngleTable,
    parallel: bool,
}

impl Validator {
    pub fn new(cfg: ValidationConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Validator {
            angles: AngleTable::new(cfg.n_vertices)?,
            cfg,
            parallel: true,
        })
    }

    /// Enables or disables evaluation on the rayon thread pool. The score
    /// is identical either way.
    pub fn parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn config(&self) -> &ValidationConfig {
        &self.cfg
    }

    pub fn angles(&self) -> &AngleTable {
        &self.angles
    }

    pub fn evaluate_trail<M: MotionModel + ?Sized>(&self, model: &M, trail: &Trail) -> Option<f64> {
        evaluate_trail(model, trail, &self.angles)
    }

    /// Score with early termination once `n_incorrect` exceeds the miss budget.
    pub fn validate<M: MotionModel + ?Sized>(&self, model: &M, trails: &[Trail]) -> Result<ValidationResult> {
        let n = trails.len();
        if n == 0 {
            return Err(Error::EmptyTrailSet);
        }
        let budget = allowed_misses(self.cfg.hit_ratio_min, n);
        let (tally, aborted) = if self.parallel && n > CHUNK {
            self.scan_parallel(model, trails, budget)
        } else {
            self.scan_sequential(model, trails, budget)
        };
        let area = tally.area.value();
        if aborted {
            return Ok(ValidationResult::zero(tally.correct, tally.incorrect, n, area, true));
        }
        Ok(finish(tally.correct, tally.incorrect, n, area, self.cfg.hit_ratio_min))
    }

    fn scan_sequential<M: MotionModel + ?Sized>(&self, model: &M, trails: &[Trail], budget: usize) -> (Tally, bool) {
        let mut t = Tally::default();
        for trail in trails {
            match self.evaluate_trail(model, trail) {
                Some(a) => {
                    t.correct += 1;
                    t.area.add(a);
                }
                None => {
                    t.incorrect += 1;
                    if t.incorrect > budget {
                        return (t, true);
                    }
                }
            }
        }
        (t, false)
    }

    fn scan_parallel<M: MotionModel + ?Sized>(&self, model: &M, trails: &[Trail], budget: usize) -> (Tally, bool) {
        let misses = AtomicUsize::new(0);
        let abort = AtomicBool::new(false);
        let parts: Vec<Tally> = trails
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut t = Tally::default();
                for trail in chunk {
                    if abort.load(Ordering::Relaxed) {
                        break;
                    }
                    match self.evaluate_trail(model, trail) {
                        Some(a) => {
                            t.correct += 1;
                            t.area.add(a);
                        }
                        None => {
                            t.incorrect += 1;
                            if misses.fetch_add(1, Ordering::Relaxed) + 1 > budget {
                                abort.store(true, Ordering::Relaxed);
                            }
                        }
                    }
                }
                t
            })
            .collect();
        let mut total = Tally::default();
        for p in &parts {
            total.correct += p.correct;
            total.incorrect += p.incorrect;
            total.area.merge(&p.area);
        }
        let aborted = abort.load(Ordering::Relaxed);
        (total, aborted)
    }

    /// Full scan without early termination, straight from the score definition.
    pub fn validate_reference<M: MotionModel + ?Sized>(&self, model: &M, trails: &[Trail]) -> Result<ValidationResult> {
        let n = trails.len();
        if n == 0 {
            return Err(Error::EmptyTrailSet);
        }
        let mut correct = 0;
        let mut area = ExactSum::new();
        for trail in trails {
            if let Some(a) = self.evaluate_trail(model, trail) {
                correct += 1;
                area.add(a);
            }
        }
        Ok(finish(correct, n - correct, n, area.value(), self.cfg.hit_ratio_min))
    }
}

fn finish(correct: usize, incorrect: usize, n: usize, area: f64, hit_ratio_min: f64) -> ValidationResult {
    let ratio = correct as f64 / n as f64;
    if ratio < hit_ratio_min || correct == 0 {
        return ValidationResult::zero(correct, incorrect, n, area, false);
    }
    let score = correct as f64 / area;
    ValidationResult {
        score,
        score_inv_m2: Some(area / correct as f64),
        hit_ratio: ratio,
        n_correct: correct,
        n_incorrect: incorrect,
        n_trails: n,
        sum_correct_area: area,
        terminated_early: false,
    }
}

/// Validates `model` on `trails` with early termination.
pub fn validate<M: MotionModel + ?Sized>(model: &M, trails: &[Trail], cfg: &ValidationConfig) -> Result<ValidationResult> {
    Validator::new(*cfg)?.validate(model, trails)
}

/// Validates `model` on `trails` with a full scan.
pub fn validate_reference<M: MotionModel + ?Sized>(
    model: &M,
    trails: &[Trail],
    cfg: &ValidationConfig,
) -> Result<ValidationResult> {
    Validator::new(*cfg)?.validate_reference(model, trails)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{AngleTable, Point2, Polygon};
    use crate::models::ModelParams;

    /// Fixed 1 m × `area` m rectangle around x0, ignoring velocity and dt.
    struct Square {
        area: f64,
    }

    impl MotionModel for Square {
        fn reachable_polygon_with(&self, s: &KinematicState, _dt: f64, _a: &AngleTable) -> Result<Polygon> {
            let h = 0.5 * self.area;
            Polygon::new(vec![
                s.x0 + Point2::new(-0.5, -h),
                s.x0 + Point2::new(0.5, -h),
                s.x0 + Point2::new(0.5, h),
                s.x0 + Point2::new(-0.5, h),
            ])
        }
    }

    fn trail(x0: Point2, xt: Point2) -> Trail {
        Trail::new(x0, Point2::ZERO, xt, 1.0).unwrap()
    }

    /// `n` trails of which those listed in `misses` end 100 m away.
    fn square_trails(n: usize, misses: &[usize]) -> Vec<Trail> {
        (0..n)
            .map(|i| {
                let x0 = Point2::new(i as f64, 0.0);
                let off = if misses.contains(&i) { 100.0 } else { 0.1 };
                trail(x0, x0 + Point2::new(0.0, off))
            })
            .collect()
    }

    fn validator(h: f64) -> Validator {
        Validator::new(ValidationConfig::new(h, 200).unwrap()).unwrap()
    }

    #[test]
    fn hit_ratio_examples() {
        assert_eq!(hit_ratio(10, 10).unwrap(), 1.0);
        assert_eq!(hit_ratio(0, 10).unwrap(), 0.0);
        assert_eq!(hit_ratio(39_999, 40_000).unwrap(), 0.999975);
        assert!(hit_ratio(0, 0).is_err());
    }

    #[test]
    fn precision_examples() {
        assert_eq!(precision(10, 20.0).unwrap(), 0.5);
        assert_eq!(precision(1, 71.7).unwrap(), 1.0 / 71.7);
        assert!((precision(5, 5.0 * 144.0).unwrap() - 1.0 / 144.0).abs() < 1e-18);
        assert!(precision(0, 1.0).is_err());
    }

    #[test]
    fn threshold_condition_examples() {
        assert!(check_threshold_condition(0.99975, 125, 500_000));
        assert!(!check_threshold_condition(0.99975, 126, 500_000));
        assert!(check_threshold_condition(1.0, 0, 1234));
        assert!(!check_threshold_condition(1.0, 1, 1234));
    }

    #[test]
    fn miss_budget() {
        assert_eq!(allowed_misses(0.9, 10), 1);
        assert_eq!(allowed_misses(1.0, 10), 0);
        assert_eq!(allowed_misses(0.99975, 500_000), 125);
        assert_eq!(allowed_misses(0.99975, 10_000), 2);
        assert_eq!(allowed_misses(1e-9, 10), 9);
        for n in 1..300 {
            for h in [0.8, 0.9, 0.95, 0.99, 0.99975, 1.0, 0.3] {
                let k = allowed_misses(h, n);
                assert!(hit_ratio(n - k, n).unwrap() >= h);
                if k < n {
                    assert!(hit_ratio(n - k - 1, n).unwrap() < h);
                }
            }
        }
    }

    #[test]
    fn all_correct_score() {
        let r = validator(0.9).validate(&Square { area: 2.0 }, &square_trails(10, &[])).unwrap();
        assert_eq!(r.score, 0.5);
        assert_eq!(r.score_inv_m2, Some(2.0));
        assert_eq!((r.n_correct, r.n_incorrect), (10, 0));
        assert!(!r.terminated_early);
    }

    #[test]
    fn two_misses_abort_at_second() {
        let r = validator(0.9).validate(&Square { area: 2.0 }, &square_trails(10, &[3, 6])).unwrap();
        assert_eq!(r.score, 0.0);
        assert!(r.terminated_early);
        assert_eq!(r.n_incorrect, 2);
        assert_eq!(r.n_correct, 5);
        // Second miss on the final trail still yields 0.
        let r = validator(0.9).validate(&Square { area: 2.0 }, &square_trails(10, &[0, 9])).unwrap();
        assert_eq!(r.score, 0.0);
    }

    #[test]
    fn single_miss_does_not_abort() {
        let r = validator(0.9).validate(&Square { area: 2.0 }, &square_trails(10, &[4])).unwrap();
        assert_eq!(r.score, 9.0 / 18.0);
        assert_eq!(r.hit_ratio, 0.9);
        assert!(!r.terminated_early);
    }

    #[test]
    fn evaluate_trail_examples() {
        let model = ModelParams::ConstantSpeed { v_max: 8.0 };
        let angles = AngleTable::new(200).unwrap();
        let x0 = Point2::new(10.0, 10.0);
        let area = evaluate_trail(&model, &trail(x0, x0 + Point2::new(0.0, 4.0)), &angles).unwrap();
        let expected = 100.0 * 64.0 * (std::f64::consts::TAU / 200.0).sin();
        assert!((area - expected).abs() < 1e-10);
        assert!(evaluate_trail(&model, &trail(x0, x0 + Point2::new(9.0, 0.0)), &angles).is_none());
        let vertex = x0 + Point2::new(8.0, 0.0);
        assert!(evaluate_trail(&model, &trail(x0, vertex), &angles).is_some());
    }

    #[test]
    fn model_errors_count_as_misses() {
        let model = ModelParams::TwoSegment {
            t_inert: 2.0,
            keep_initial: true,
            v_const: Some(5.0),
            a_max: None,
            v_max: None,
        };
        let angles = AngleTable::new(200).unwrap();
        let x0 = Point2::ZERO;
        assert!(evaluate_trail(&model, &trail(x0, x0), &angles).is_none());
    }

    #[test]
    fn config_rejects_bad_threshold() {
        assert!(ValidationConfig::new(0.0, 200).is_err());
        assert!(ValidationConfig::new(1.01, 200).is_err());
        assert!(ValidationConfig::new(0.5, 2).is_err());
        assert!(validate(&Square { area: 1.0 }, &[], &ValidationConfig::default()).is_err());
    }

    #[test]
    fn parallel_matches_sequential_bitwise() {
        let model = ModelParams::ConstantSpeed { v_max: 7.0 };
        let trails: Vec<Trail> = (0..20_000)
            .map(|i| {
                let x0 = Point2::new((i % 105) as f64 + 0.37, (i % 68) as f64 * 0.91);
                let xt = x0 + Point2::from_angle(i as f64 * 0.7) * ((i % 7) as f64);
                Trail::new(x0, Point2::new(0.1 * (i % 5) as f64, 0.0), xt, 1.0).unwrap()
            })
            .collect();
        let v = validator(0.99);
        let par = v.validate(&model, &trails).unwrap();
        let seq = v.clone().parallel(false).validate(&model, &trails).unwrap();
        let reference = v.validate_reference(&model, &trails).unwrap();
        assert_eq!(par, seq);
        assert_eq!(par.score.to_bits(), reference.score.to_bits());
        assert!(par.score > 0.0);
    }

    #[test]
    fn result_json_fields() {
        let r = validator(0.9).validate(&Square { area: 2.0 }, &square_trails(10, &[])).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for key in ["score", "score_inv_m2", "hit_ratio", "n_correct", "n_incorrect", "sum_correct_area", "terminated_early"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }
}
