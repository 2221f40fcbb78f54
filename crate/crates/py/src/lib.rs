//! Python bindings: geometry helpers, motion models, validation, synthetic
//! data and parameter optimisation.

use pyo3::exceptions::{PyIOError, PyIndexError, PyValueError};
use pyo3::prelude::*;

use reachset::ingest::Trail;
use reachset::optimizer::{optimize_model_family, BayesianOptimizer, ParamSpace, DEFAULT_BUDGET_PER_COMBO};
use reachset::synthetic::{analytic_optimum_constant_speed, generate_trails, Generator, SyntheticSpec};
use reachset::validation::DEFAULT_HIT_RATIO_MIN;
use reachset::models::DEFAULT_N_VERTICES;
use reachset::{Error, KinematicState, ModelFamily, ModelParams, MotionModel, Point2, ValidationConfig, Validator};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        Error::File { ref source, .. } if matches!(**source, Error::Io(_)) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn points(v: Vec<(f64, f64)>) -> Vec<Point2> {
    v.into_iter().map(Point2::from).collect()
}

/// Area of a simple polygon given as a list of (x, y) vertices.
#[pyfunction]
fn polygon_area(vertices: Vec<(f64, f64)>) -> PyResult<f64> {
    reachset::polygon_area(&points(vertices)).map_err(to_py)
}

/// Whether `point` lies inside or on the boundary of the polygon.
#[pyfunction]
fn point_in_polygon(point: (f64, f64), vertices: Vec<(f64, f64)>) -> PyResult<bool> {
    let poly = reachset::Polygon::new(points(vertices)).map_err(to_py)?;
    Ok(reachset::point_in_polygon(Point2::from(point), &poly))
}

/// A motion model with fixed parameters.
#[pyclass(name = "Model", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: ModelParams,
}

impl PyModel {
    fn checked(inner: ModelParams) -> PyResult<Self> {
        inner.validate().map_err(to_py)?;
        Ok(PyModel { inner })
    }
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn constant_speed(v_max: f64) -> PyResult<Self> {
        Self::checked(ModelParams::ConstantSpeed { v_max })
    }

    #[staticmethod]
    fn constant_accel(a_max: f64) -> PyResult<Self> {
        Self::checked(ModelParams::ConstantAccel { a_max })
    }

    #[staticmethod]
    fn capped_accel(a_max: f64, v_max: f64) -> PyResult<Self> {
        Self::checked(ModelParams::CappedAccel { a_max, v_max })
    }

    #[staticmethod]
    #[pyo3(signature = (t_inert, keep_initial, v_const=None, a_max=None, v_max=None))]
    fn two_segment(
        t_inert: f64,
        keep_initial: bool,
        v_const: Option<f64>,
        a_max: Option<f64>,
        v_max: Option<f64>,
    ) -> PyResult<Self> {
        Self::checked(ModelParams::TwoSegment {
            t_inert,
            keep_initial,
            v_const,
            a_max,
            v_max,
        })
    }

    /// Parses `{"model": "<family>", ...parameters}`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: ModelParams = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Self::checked(inner)
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("model parameters serialise")
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.inner.family().name()
    }

    /// Vertices of the reachable-area polygon, counter-clockwise.
    #[pyo3(signature = (x0, v0, dt, n_vertices=DEFAULT_N_VERTICES))]
    fn reachable_polygon(&self, x0: (f64, f64), v0: (f64, f64), dt: f64, n_vertices: usize) -> PyResult<Vec<(f64, f64)>> {
        let s = KinematicState::new(x0.into(), v0.into());
        let poly = self.inner.reachable_polygon(&s, dt, n_vertices).map_err(to_py)?;
        Ok(poly.vertices().iter().map(|p| (p.x, p.y)).collect())
    }

    fn __repr__(&self) -> String {
        format!("Model({})", self.inner)
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }
}

/// Trails as rows `(x0, y0, vx0, vy0, xt, yt, dt)`.
#[pyclass(name = "TrailSet")]
struct PyTrailSet {
    inner: reachset::TrailSet,
}

#[pymethods]
impl PyTrailSet {
    #[new]
    fn new(rows: Vec<(f64, f64, f64, f64, f64, f64, f64)>) -> PyResult<Self> {
        let trails = rows
            .into_iter()
            .map(|(x, y, vx, vy, xt, yt, dt)| Trail::new(Point2::new(x, y), Point2::new(vx, vy), Point2::new(xt, yt), dt))
            .collect::<Result<Vec<_>, _>>()
            .map_err(to_py)?;
        Ok(PyTrailSet {
            inner: reachset::TrailSet::new(trails, "python"),
        })
    }

    /// Reads a trail CSV (and its provenance sidecar when present).
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyTrailSet {
            inner: reachset::TrailSet::load(path).map_err(to_py)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __getitem__(&self, i: isize) -> PyResult<(f64, f64, f64, f64, f64, f64, f64)> {
        let n = self.inner.len() as isize;
        let k = if i < 0 { i + n } else { i };
        if !(0..n).contains(&k) {
            return Err(PyIndexError::new_err("trail index out of range"));
        }
        let t = &self.inner.trails[k as usize];
        Ok((t.x0.x, t.x0.y, t.v0.x, t.v0.y, t.xt.x, t.xt.y, t.dt))
    }

    fn to_list(&self) -> Vec<(f64, f64, f64, f64, f64, f64, f64)> {
        self.inner
            .trails
            .iter()
            .map(|t| (t.x0.x, t.x0.y, t.v0.x, t.v0.y, t.xt.x, t.xt.y, t.dt))
            .collect()
    }
}

#[pyclass(name = "ValidationResult", frozen, get_all)]
struct PyValidationResult {
    score: f64,
    score_inv_m2: Option<f64>,
    hit_ratio: f64,
    n_correct: usize,
    n_incorrect: usize,
    n_trails: usize,
    terminated_early: bool,
}

#[pymethods]
impl PyValidationResult {
    fn __repr__(&self) -> String {
        format!(
            "ValidationResult(score={}, hit_ratio={}, n_correct={}, n_incorrect={})",
            self.score, self.hit_ratio, self.n_correct, self.n_incorrect
        )
    }
}

/// Scores `model` on `trails`; a score of 0 means the hit ratio fell below `hit_ratio_min`.
#[pyfunction]
#[pyo3(signature = (model, trails, hit_ratio_min=DEFAULT_HIT_RATIO_MIN, n_vertices=DEFAULT_N_VERTICES))]
fn validate(
    py: Python<'_>,
    model: &PyModel,
    trails: &PyTrailSet,
    hit_ratio_min: f64,
    n_vertices: usize,
) -> PyResult<PyValidationResult> {
    let cfg = ValidationConfig::new(hit_ratio_min, n_vertices).map_err(to_py)?;
    let validator = Validator::new(cfg).map_err(to_py)?;
    let r = py
        .detach(|| validator.validate(&model.inner, &trails.inner.trails))
        .map_err(to_py)?;
    Ok(PyValidationResult {
        score: r.score,
        score_inv_m2: r.score_inv_m2,
        hit_ratio: r.hit_ratio,
        n_correct: r.n_correct,
        n_incorrect: r.n_incorrect,
        n_trails: r.n_trails,
        terminated_early: r.terminated_early,
    })
}

/// Trails from known kinematics. `kind` is `constant_speed`, `capped_accel`
/// or `two_segment`; `v_true` is the top (or final) speed.
#[pyfunction]
#[pyo3(signature = (kind, n_trails, seed, v_true=8.0, a_true=20.0, t_inert_true=0.2, dt=1.0, outlier_fraction=0.0, outlier_offset=0.0))]
#[allow(clippy::too_many_arguments)]
fn generate_synthetic(
    kind: &str,
    n_trails: usize,
    seed: u64,
    v_true: f64,
    a_true: f64,
    t_inert_true: f64,
    dt: f64,
    outlier_fraction: f64,
    outlier_offset: f64,
) -> PyResult<PyTrailSet> {
    let generator = match kind {
        "constant_speed" => Generator::ConstantSpeed { v_true },
        "capped_accel" => Generator::CappedAccel { a_true, v_true },
        "two_segment" => Generator::TwoSegment {
            t_inert_true,
            v_final_true: v_true,
        },
        other => return Err(PyValueError::new_err(format!("unknown generator `{other}`"))),
    };
    let mut spec = SyntheticSpec::new(generator, n_trails, seed).with_outliers(outlier_fraction, outlier_offset);
    spec.dt = dt;
    Ok(PyTrailSet {
        inner: generate_trails(&spec).map_err(to_py)?,
    })
}

/// Smallest constant speed whose polygons cover the required share of trails,
/// and its score: `(v_max, score)`.
#[pyfunction]
#[pyo3(signature = (trails, hit_ratio_min=DEFAULT_HIT_RATIO_MIN, n_vertices=DEFAULT_N_VERTICES))]
fn constant_speed_optimum(trails: &PyTrailSet, hit_ratio_min: f64, n_vertices: usize) -> PyResult<(f64, f64)> {
    let cfg = ValidationConfig::new(hit_ratio_min, n_vertices).map_err(to_py)?;
    let o = analytic_optimum_constant_speed(&trails.inner, &cfg).map_err(to_py)?;
    Ok((o.v_max, o.score))
}

#[pyclass(name = "OptimizationResult", frozen, get_all)]
struct PyOptimizationResult {
    family: &'static str,
    best_params: PyModel,
    best_score: f64,
    best_score_inv_m2: Option<f64>,
    evaluations: usize,
    /// `(params, score)` for every evaluation, in order.
    trace: Vec<(PyModel, f64)>,
}

/// Searches the parameters of one model family over its default bounds.
/// `budget` counts evaluations per discrete parameter combination.
#[pyfunction]
#[pyo3(signature = (family, trails, budget=DEFAULT_BUDGET_PER_COMBO, seed=0, hit_ratio_min=DEFAULT_HIT_RATIO_MIN, n_vertices=DEFAULT_N_VERTICES))]
fn optimize(
    py: Python<'_>,
    family: &str,
    trails: &PyTrailSet,
    budget: usize,
    seed: u64,
    hit_ratio_min: f64,
    n_vertices: usize,
) -> PyResult<PyOptimizationResult> {
    let family: ModelFamily = family.parse().map_err(to_py)?;
    let cfg = ValidationConfig::new(hit_ratio_min, n_vertices).map_err(to_py)?;
    let dt = trails.inner.common_dt().ok_or_else(|| PyValueError::new_err("trails must share one horizon"))?;
    let space = ParamSpace::default_for(family, dt);
    let total = budget * space.combos().len();
    let bo = BayesianOptimizer::default();
    let r = py
        .detach(|| optimize_model_family(family, &trails.inner.trails, &cfg, &space, total, seed, &bo))
        .map_err(to_py)?;
    Ok(PyOptimizationResult {
        family: family.name(),
        best_params: PyModel { inner: r.best_params },
        best_score: r.best_score,
        best_score_inv_m2: r.best_score_inv_m2,
        evaluations: r.evaluations,
        trace: r
            .trace
            .into_iter()
            .map(|e| (PyModel { inner: e.params }, e.score))
            .collect(),
    })
}

#[pymodule]
#[pyo3(name = "reachset")]
fn reachset_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(polygon_area, m)?)?;
    m.add_function(wrap_pyfunction!(point_in_polygon, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(constant_speed_optimum, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyTrailSet>()?;
    m.add_class::<PyValidationResult>()?;
    m.add_class::<PyOptimizationResult>()?;
    m.add("DEFAULT_HIT_RATIO_MIN", DEFAULT_HIT_RATIO_MIN)?;
    m.add("DEFAULT_N_VERTICES", DEFAULT_N_VERTICES)?;
    Ok(())
}
