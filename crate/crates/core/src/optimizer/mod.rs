//! Parameter search for the motion models.
//!
//! Each model family has a few continuous parameters and, for the two-segment
//! model, two boolean switches. Every combination of switch values gets its
//! own continuous search (Bayesian optimisation by default); the family's
//! result is the best over those runs, and the best model is the family with
//! the highest score.

pub mod gp;

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Trail;
use crate::models::{ModelFamily, ModelParams};
use crate::validation::{ValidationConfig, Validator};
use gp::{expected_improvement, halton, GaussianProcess};

pub const DEFAULT_BUDGET_PER_COMBO: usize = 60;
pub const DEFAULT_INITIAL_POINTS: usize = 10;

/// Whether the two-segment model's first segment keeps the initial speed.
pub const KEEP_INITIAL: &str = "keep_initial";
/// Whether the two-segment model derives its final speed from `a_max`/`v_max`.
pub const ACCEL_LIMITED: &str = "accel_limited";

/// Search domain: box bounds for continuous parameters and the admissible
/// values of the boolean switches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpace {
    pub continuous: BTreeMap<String, (f64, f64)>,
    #[serde(default)]
    pub discrete: BTreeMap<String, Vec<bool>>,
}

impl ParamSpace {
    /// Bounds bracketing plausible player kinematics for horizon `dt`.
    pub fn default_for(family: ModelFamily, dt: f64) -> Self {
        let mut continuous = BTreeMap::new();
        let mut discrete = BTreeMap::new();
        let v_max = ("v_max".to_string(), (4.0, 15.0));
        let a_max = ("a_max".to_string(), (1.0, 30.0));
        match family {
            ModelFamily::ConstantSpeed => {
                continuous.extend([v_max]);
            }
            ModelFamily::ConstantAccel => {
                continuous.extend([a_max]);
            }
            ModelFamily::CappedAccel => {
                continuous.extend([a_max, v_max]);
            }
            ModelFamily::TwoSegment => {
                continuous.extend([
                    a_max,
                    v_max,
                    ("t_inert".to_string(), (0.01, 0.9 * dt)),
                    ("v_const".to_string(), (2.0, 12.0)),
                ]);
                discrete.insert(KEEP_INITIAL.to_string(), vec![true, false]);
                discrete.insert(ACCEL_LIMITED.to_string(), vec![true, false]);
            }
        }
        ParamSpace { continuous, discrete }
    }

    /// Checks bounds and, for the two-segment family, that `t_inert < dt`.
    pub fn validate(&self, family: ModelFamily, dt: f64) -> Result<()> {
        for (name, &(lo, hi)) in &self.continuous {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Config(format!("bounds for `{name}` must be finite with lower < upper, got [{lo}, {hi}]")));
            }
            if lo <= 0.0 && name != "t_inert" {
                return Err(Error::Config(format!("lower bound for `{name}` must be > 0")));
            }
        }
        if let Some(&(lo, hi)) = self.continuous.get("t_inert") {
            if lo < 0.0 || hi >= dt {
                return Err(Error::Config(format!(
                    "t_inert bounds must lie in [0, dt = {dt}), got [{lo}, {hi}]"
                )));
            }
        }
        for (name, values) in &self.discrete {
            if family != ModelFamily::TwoSegment || (name != KEEP_INITIAL && name != ACCEL_LIMITED) {
                return Err(Error::Config(format!("unknown discrete parameter `{name}` for {family}")));
            }
            if values.is_empty() {
                return Err(Error::Config(format!("discrete parameter `{name}` has no values")));
            }
        }
        for combo in self.combos() {
            for dim in active_dims(family, &combo) {
                if !self.continuous.contains_key(dim) {
                    return Err(Error::Config(format!("missing bounds for `{dim}` ({family})")));
                }
            }
        }
        Ok(())
    }

    /// Every assignment of the discrete parameters, in a fixed order.
    pub fn combos(&self) -> Vec<BTreeMap<String, bool>> {
        let mut out = vec![BTreeMap::new()];
        for (name, values) in &self.discrete {
            let mut values = values.clone();
            values.dedup();
            out = out
                .into_iter()
                .flat_map(|c| {
                    values.iter().map(move |&v| {
                        let mut c = c.clone();
                        c.insert(name.clone(), v);
                        c
                    })
                })
                .collect();
        }
        out
    }

    fn bounds(&self, dims: &[&str]) -> Vec<(f64, f64)> {
        dims.iter().map(|d| self.continuous[*d]).collect()
    }
}

fn flag(combo: &BTreeMap<String, bool>, name: &str) -> bool {
    combo.get(name).copied().unwrap_or(true)
}

/// Continuous parameters that take part in the search for one discrete combination.
pub fn active_dims(family: ModelFamily, combo: &BTreeMap<String, bool>) -> Vec<&'static str> {
    match family {
        ModelFamily::ConstantSpeed => vec!["v_max"],
        ModelFamily::ConstantAccel => vec!["a_max"],
        ModelFamily::CappedAccel => vec!["a_max", "v_max"],
        ModelFamily::TwoSegment => {
            let keep = flag(combo, KEEP_INITIAL);
            let accel = flag(combo, ACCEL_LIMITED);
            let mut dims = vec!["t_inert"];
            if !keep || !accel {
                dims.push("v_const");
            }
            if accel {
                dims.extend(["a_max", "v_max"]);
            }
            dims
        }
    }
}

/// Model parameters from a discrete combination and values for [`active_dims`].
pub fn build_params(family: ModelFamily, combo: &BTreeMap<String, bool>, values: &[f64]) -> ModelParams {
    let dims = active_dims(family, combo);
    debug_assert_eq!(dims.len(), values.len());
    let get = |name: &str| dims.iter().position(|d| *d == name).map(|i| values[i]);
    match family {
        ModelFamily::ConstantSpeed => ModelParams::ConstantSpeed { v_max: values[0] },
        ModelFamily::ConstantAccel => ModelParams::ConstantAccel { a_max: values[0] },
        ModelFamily::CappedAccel => ModelParams::CappedAccel {
            a_max: values[0],
            v_max: values[1],
        },
        ModelFamily::TwoSegment => ModelParams::TwoSegment {
            t_inert: get("t_inert").unwrap_or(0.0),
            keep_initial: flag(combo, KEEP_INITIAL),
            v_const: get("v_const"),
            a_max: get("a_max"),
            v_max: get("v_max"),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub params: ModelParams,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub family: ModelFamily,
    pub best_params: ModelParams,
    /// Best validation score in 1/m².
    pub best_score: f64,
    /// `1 / best_score` in m², absent when no evaluated point scored.
    pub best_score_inv_m2: Option<f64>,
    pub evaluations: usize,
    pub trace: Vec<TraceEntry>,
}

impl OptimizationResult {
    fn from_trace(family: ModelFamily, trace: Vec<TraceEntry>) -> Result<Self> {
        let best = trace
            .iter()
            .enumerate()
            .fold(None::<(usize, f64)>, |acc, (i, e)| match acc {
                Some((_, s)) if s >= e.score => acc,
                _ => Some((i, e.score)),
            })
            .ok_or_else(|| Error::Config("optimisation produced no evaluations".into()))?
            .0;
        let best_score = trace[best].score;
        Ok(OptimizationResult {
            family,
            best_params: trace[best].params.clone(),
            best_score,
            best_score_inv_m2: (best_score > 0.0).then(|| 1.0 / best_score),
            evaluations: trace.len(),
            trace,
        })
    }

    /// Writes the trace as CSV: `index,score,score_inv_m2,params` with params as JSON.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "family", "score", "score_inv_m2", "params"])?;
        for (i, e) in self.trace.iter().enumerate() {
            let inv = if e.score > 0.0 { (1.0 / e.score).to_string() } else { String::new() };
            w.write_record([
                i.to_string(),
                self.family.name().to_string(),
                e.score.to_string(),
                inv,
                serde_json::to_string(&e.params)?,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A black-box maximiser over a box, returning every evaluated point with its value.
pub trait ContinuousOptimizer: Sync {
    fn maximize(
        &self,
        bounds: &[(f64, f64)],
        budget: usize,
        seed: u64,
        objective: &mut dyn FnMut(&[f64]) -> Result<f64>,
    ) -> Result<Vec<(Vec<f64>, f64)>>;
}

/// Bayesian optimisation: a quasi-random initial design, then points
/// maximising expected improvement under a Gaussian-process surrogate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BayesianOptimizer {
    pub n_initial: usize,
    pub n_candidates: usize,
    /// Points (in parameter units) evaluated first, as part of the initial design.
    pub initial_points: Vec<Vec<f64>>,
}

impl Default for BayesianOptimizer {
    fn default() -> Self {
        BayesianOptimizer {
            n_initial: DEFAULT_INITIAL_POINTS,
            n_candidates: 2000,
            initial_points: Vec::new(),
        }
    }
}

fn to_unit(x: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    x.iter().zip(bounds).map(|(v, (lo, hi))| ((v - lo) / (hi - lo)).clamp(0.0, 1.0)).collect()
}

fn from_unit(u: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    u.iter().zip(bounds).map(|(v, (lo, hi))| lo + v * (hi - lo)).collect()
}

impl BayesianOptimizer {
    fn next_point(&self, xs: &[Vec<f64>], ys: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let dim = xs[0].len();
        let best_idx = (0..ys.len()).fold(0, |b, i| if ys[i] > ys[b] { i } else { b });
        let random_point = |rng: &mut ChaCha8Rng| (0..dim).map(|_| rng.gen::<f64>()).collect::<Vec<_>>();
        let Some(gp) = GaussianProcess::fit(xs, ys) else {
            return random_point(rng);
        };
        let best = ys[best_idx];

        // Global random candidates plus Gaussian perturbations of the incumbent
        // at several scales.
        let mut candidates: Vec<Vec<f64>> = (0..self.n_candidates).map(|_| random_point(rng)).collect();
        for scale in [0.2, 0.05, 0.01, 0.002] {
            for _ in 0..self.n_candidates / 8 {
                let p = xs[best_idx]
                    .iter()
                    .map(|&c| {
                        let g: f64 = rng.sample(StandardNormal);
                        (c + scale * g).clamp(0.0, 1.0)
                    })
                    .collect();
                candidates.push(p);
            }
        }

        let min_sep = 1e-9;
        let mut pick: Option<(f64, Vec<f64>)> = None;
        for c in candidates {
            if xs.iter().any(|x| x.iter().zip(&c).all(|(a, b)| (a - b).abs() < min_sep)) {
                continue;
            }
            let (m, s) = gp.predict(&c);
            let ei = expected_improvement(m, s, best);
            if pick.as_ref().is_none_or(|p| ei > p.0) {
                pick = Some((ei, c));
            }
        }
        pick.map(|p| p.1).unwrap_or_else(|| random_point(rng))
    }
}

impl ContinuousOptimizer for BayesianOptimizer {
    fn maximize(
        &self,
        bounds: &[(f64, f64)],
        budget: usize,
        seed: u64,
        objective: &mut dyn FnMut(&[f64]) -> Result<f64>,
    ) -> Result<Vec<(Vec<f64>, f64)>> {
        let n_initial = self.n_initial.max(self.initial_points.len()).max(1);
        if budget < n_initial {
            return Err(Error::Config(format!(
                "budget {budget} is smaller than the initial design of {n_initial} points"
            )));
        }
        let dim = bounds.len();
        for p in &self.initial_points {
            if p.len() != dim {
                return Err(Error::Config(format!(
                    "initial point has {} coordinates, expected {dim}",
                    p.len()
                )));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift: Vec<f64> = (0..dim).map(|_| rng.gen()).collect();

        let mut xs: Vec<Vec<f64>> = Vec::with_capacity(budget);
        let mut ys: Vec<f64> = Vec::with_capacity(budget);
        let mut trace = Vec::with_capacity(budget);
        let mut eval = |u: Vec<f64>, xs: &mut Vec<Vec<f64>>, ys: &mut Vec<f64>| -> Result<()> {
            let x = from_unit(&u, bounds);
            let y = objective(&x)?;
            trace.push((x, y));
            xs.push(u);
            ys.push(y);
            Ok(())
        };

        for p in &self.initial_points {
            eval(to_unit(p, bounds), &mut xs, &mut ys)?;
        }
        for i in self.initial_points.len()..n_initial {
            eval(halton(i as u64, dim, &shift), &mut xs, &mut ys)?;
        }
        while xs.len() < budget {
            let u = self.next_point(&xs, &ys, &mut rng);
            eval(u, &mut xs, &mut ys)?;
        }
        Ok(trace)
    }
}

/// Uniform random search; a cross-check backend for the Bayesian optimiser.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RandomSearch;

impl ContinuousOptimizer for RandomSearch {
    fn maximize(
        &self,
        bounds: &[(f64, f64)],
        budget: usize,
        seed: u64,
        objective: &mut dyn FnMut(&[f64]) -> Result<f64>,
    ) -> Result<Vec<(Vec<f64>, f64)>> {
        if budget == 0 {
            return Err(Error::Config("budget must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..budget)
            .map(|_| {
                let x: Vec<f64> = bounds.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect();
                let y = objective(&x)?;
                Ok((x, y))
            })
            .collect()
    }
}

/// Optimises the continuous parameters of `family` for one discrete combination.
#[allow(clippy::too_many_arguments)]
pub fn optimize_continuous(
    family: ModelFamily,
    combo: &BTreeMap<String, bool>,
    trails: &[Trail],
    validator: &Validator,
    space: &ParamSpace,
    budget: usize,
    seed: u64,
    optimizer: &dyn ContinuousOptimizer,
) -> Result<OptimizationResult> {
    let dims = active_dims(family, combo);
    for d in &dims {
        if !space.continuous.contains_key(*d) {
            return Err(Error::Config(format!("missing bounds for `{d}` ({family})")));
        }
    }
    let bounds = space.bounds(&dims);
    let mut entries = Vec::with_capacity(budget);
    let mut objective = |x: &[f64]| -> Result<f64> {
        let params = build_params(family, combo, x);
        let score = validator.validate(&params, trails)?.score;
        log::debug!("{params} -> {score:e}");
        entries.push(TraceEntry { params, score });
        Ok(score)
    };
    optimizer.maximize(&bounds, budget, seed, &mut objective)?;
    OptimizationResult::from_trace(family, entries)
}

/// Seed for the `i`-th discrete combination, decorrelated from its neighbours.
fn combo_seed(seed: u64, i: usize) -> u64 {
    let mut z = seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One continuous search per discrete combination, with `budget` split
/// evenly between them; returns the overall best with the concatenated trace.
pub fn optimize_model_family(
    family: ModelFamily,
    trails: &[Trail],
    cfg: &ValidationConfig,
    space: &ParamSpace,
    budget: usize,
    seed: u64,
    optimizer: &dyn ContinuousOptimizer,
) -> Result<OptimizationResult> {
    if trails.is_empty() {
        return Err(Error::EmptyTrailSet);
    }
    let dt = trails[0].dt;
    space.validate(family, dt)?;
    let validator = Validator::new(*cfg)?;
    let combos = space.combos();
    let per = budget / combos.len();
    let extra = budget % combos.len();
    let mut trace = Vec::with_capacity(budget);
    for (i, combo) in combos.iter().enumerate() {
        let b = per + usize::from(i < extra);
        let run = optimize_continuous(family, combo, trails, &validator, space, b, combo_seed(seed, i), optimizer)?;
        log::info!(
            "{family} {combo:?}: best {} score {:.6e} after {} evaluations",
            run.best_params,
            run.best_score,
            run.evaluations
        );
        trace.extend(run.trace);
    }
    OptimizationResult::from_trace(family, trace)
}

/// The family with the highest score. Ties go to the family with fewer
/// parameters, then to the lexicographically smaller name.
pub fn select_best_model(
    results: &BTreeMap<ModelFamily, OptimizationResult>,
) -> Option<(ModelFamily, &OptimizationResult)> {
    results
        .iter()
        .map(|(f, r)| (*f, r))
        .min_by(|(fa, a), (fb, b)| {
            b.best_score
                .total_cmp(&a.best_score)
                .then(fa.param_count().cmp(&fb.param_count()))
                .then(fa.name().cmp(fb.name()))
        })
}
