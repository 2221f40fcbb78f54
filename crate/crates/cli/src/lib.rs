//! Argument parsing and subcommand implementations for the `reachset` binary.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use reachset::ingest::{self, TrackingSchema, DEFAULT_DT, DEFAULT_N_TRAILS};
use reachset::models::DEFAULT_N_VERTICES;
use reachset::optimizer::{
    optimize_model_family, select_best_model, BayesianOptimizer, ContinuousOptimizer, OptimizationResult,
    ParamSpace, RandomSearch, DEFAULT_BUDGET_PER_COMBO,
};
use reachset::plot::{self, BoundaryPlotConfig};
use reachset::synthetic::{generate_trails, Generator, SyntheticSpec, TargetSampling};
use reachset::validation::{check_threshold_condition, DEFAULT_HIT_RATIO_MIN};
use reachset::{Error, ModelFamily, ModelParams, Result, TrailSet, ValidationConfig, ValidationResult, Validator};

#[derive(Debug, Parser)]
#[command(name = "reachset", version, about = "Validate and optimise reachable-area motion models on tracking data")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand. Unset values fall back to the
/// defaults in [`RunConfig::default`].
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Prediction horizon in seconds [default: 1]
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Minimum fraction of trails a model must predict correctly [default: 0.99975]
    #[arg(long, global = true)]
    pub hit_ratio_min: Option<f64>,
    /// Number of trails to sample or generate [default: 500000]
    #[arg(long, global = true)]
    pub n_trails: Option<usize>,
    /// Vertices per reachable-area polygon [default: 200]
    #[arg(long, global = true)]
    pub n_vertices: Option<usize>,
    /// Random seed [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads [default: available cores]
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Tracking-data schema (TOML); the Metrica sample layout when omitted
    #[arg(long, global = true)]
    pub schema: Option<PathBuf>,
    /// Output file or directory, depending on the subcommand
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub dt: f64,
    pub hit_ratio_min: f64,
    pub n_trails: usize,
    pub n_vertices: usize,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dt: DEFAULT_DT,
            hit_ratio_min: DEFAULT_HIT_RATIO_MIN,
            n_trails: DEFAULT_N_TRAILS,
            n_vertices: DEFAULT_N_VERTICES,
            seed: 0,
            threads: None,
        }
    }
}

impl GlobalArgs {
    pub fn resolve(&self) -> RunConfig {
        let d = RunConfig::default();
        RunConfig {
            dt: self.dt.unwrap_or(d.dt),
            hit_ratio_min: self.hit_ratio_min.unwrap_or(d.hit_ratio_min),
            n_trails: self.n_trails.unwrap_or(d.n_trails),
            n_vertices: self.n_vertices.unwrap_or(d.n_vertices),
            seed: self.seed.unwrap_or(d.seed),
            threads: self.threads,
        }
    }
}

impl RunConfig {
    fn validation(&self) -> Result<ValidationConfig> {
        ValidationConfig::new(self.hit_ratio_min, self.n_vertices)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample trails from tracking CSV files
    Trails(TrailsArgs),
    /// Score one model on a trail set
    Validate(ValidateArgs),
    /// Search parameters for one or more model families
    Optimize(OptimizeArgs),
    /// Generate synthetic trails with known kinematics
    Synth(SynthArgs),
    /// Draw boundary overlays and score charts as SVG
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct TrailsArgs {
    /// Tracking CSV files
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Trail set CSV
    pub trails: PathBuf,
    /// Model config file (JSON or TOML)
    #[arg(long, conflicts_with = "model_json", required_unless_present = "model_json")]
    pub model: Option<PathBuf>,
    /// Model config as an inline JSON object
    #[arg(long)]
    pub model_json: Option<String>,
    /// Expected outlier fraction, checked against --hit-ratio-min
    #[arg(long)]
    pub outlier_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Trail set CSV
    pub trails: PathBuf,
    /// Optimisation config file (JSON or TOML)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model families by name or letter, e.g. `a,b,c,d`
    #[arg(long, value_delimiter = ',')]
    pub families: Option<Vec<String>>,
    /// Evaluations per discrete parameter combination
    #[arg(long)]
    pub budget: Option<usize>,
    /// Expected outlier fraction, checked against --hit-ratio-min
    #[arg(long)]
    pub outlier_fraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GeneratorKind {
    ConstantSpeed,
    CappedAccel,
    TwoSegment,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Full generator spec (JSON or TOML); explicit flags override its fields
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = GeneratorKind::ConstantSpeed)]
    pub kind: GeneratorKind,
    /// True maximum speed (m/s)
    #[arg(long, default_value_t = 8.0)]
    pub v_true: f64,
    /// True maximum acceleration (m/s²), capped-accel only
    #[arg(long, default_value_t = 20.0)]
    pub a_true: f64,
    /// True inertial time (s), two-segment only
    #[arg(long, default_value_t = 0.2)]
    pub t_inert_true: f64,
    #[arg(long)]
    pub outlier_fraction: Option<f64>,
    /// Outlier displacement beyond the true boundary (m)
    #[arg(long)]
    pub outlier_offset: Option<f64>,
    /// Sample targets on the boundary instead of uniformly over the area
    #[arg(long)]
    pub boundary: bool,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Result JSON files for the score chart
    pub results: Vec<PathBuf>,
    /// Boundary overlay config (JSON or TOML); a default four-model setup when omitted
    #[arg(long)]
    pub models: Option<PathBuf>,
    /// Skip the boundary overlay
    #[arg(long)]
    pub no_boundaries: bool,
}

/// Optimisation settings read from `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeConfig {
    pub families: Vec<String>,
    pub budget_per_combo: usize,
    pub optimizer: OptimizerKind,
    pub bayesian: BayesianOptimizer,
    /// Search spaces keyed by family name or letter; defaults fill the rest.
    pub spaces: BTreeMap<String, ParamSpace>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Bayesian,
    Random,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            families: ModelFamily::ALL.iter().map(|f| f.name().to_string()).collect(),
            budget_per_combo: DEFAULT_BUDGET_PER_COMBO,
            optimizer: OptimizerKind::Bayesian,
            bayesian: BayesianOptimizer::default(),
            spaces: BTreeMap::new(),
        }
    }
}

/// Reads JSON, or TOML when the extension is `.toml`.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
    let parsed = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml")) {
        toml::from_str(&text).map_err(Error::from)
    } else {
        serde_json::from_str(&text).map_err(Error::from)
    };
    parsed.map_err(|e| e.in_file(path))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::from(e).in_file(dir))?;
    }
    fs::write(path, contents).map_err(|e| Error::from(e).in_file(path))
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn load_trails(path: &Path, run: &RunConfig) -> Result<TrailSet> {
    let set = TrailSet::load(path)?;
    if set.is_empty() {
        return Err(Error::EmptyTrailSet);
    }
    match set.common_dt() {
        Some(dt) if dt == run.dt => {}
        Some(dt) => warn!("trail set horizon is {dt} s; --dt {} is ignored for validation", run.dt),
        None => return Err(Error::Config(format!("{}: trails do not share one horizon", path.display()))),
    }
    Ok(set)
}

/// Outlier fraction given on the command line, else the synthetic generator's.
fn outlier_fraction(explicit: Option<f64>, set: &TrailSet) -> Option<f64> {
    explicit.or_else(|| {
        set.provenance
            .generator
            .as_ref()?
            .get("outlier_fraction")?
            .as_f64()
    })
}

fn warn_threshold(hit_ratio_min: f64, fraction: Option<f64>, n: usize) {
    let Some(f) = fraction else { return };
    let n_out = (f * n as f64).floor() as usize;
    if !check_threshold_condition(hit_ratio_min, n_out, n) {
        warn!(
            "hit_ratio_min = {hit_ratio_min} does not tolerate the expected {n_out} outliers among {n} trails; \
             valid models may score 0"
        );
    }
}

fn cmd_trails(args: &TrailsArgs, global: &GlobalArgs, run: &RunConfig) -> Result<()> {
    let schema = match &global.schema {
        Some(p) => TrackingSchema::load(p)?,
        None => TrackingSchema::metrica(),
    };
    let mut tracks = Vec::new();
    for input in &args.inputs {
        let parsed = ingest::parse_tracking_file(input, &schema)?;
        info!("{}: {} player tracks", input.display(), parsed.len());
        tracks.extend(parsed.into_iter().map(ingest::derive_velocities));
    }
    let mut set = ingest::extract_trails(&tracks, run.dt, run.n_trails, run.seed)?;
    set.provenance.source = args
        .inputs
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join(",");
    let out = global.out.clone().unwrap_or_else(|| PathBuf::from("trails.csv"));
    set.save(&out)?;
    info!("wrote {} trails to {}", set.len(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct ValidateReport<'a> {
    trails: String,
    model: &'a ModelParams,
    hit_ratio_min: f64,
    n_vertices: usize,
    #[serde(flatten)]
    result: &'a ValidationResult,
}

fn cmd_validate(args: &ValidateArgs, global: &GlobalArgs, run: &RunConfig) -> Result<()> {
    let model: ModelParams = match (&args.model, &args.model_json) {
        (Some(p), _) => load_config(p)?,
        (None, Some(s)) => serde_json::from_str(s).map_err(|e| Error::Config(format!("--model-json: {e}")))?,
        (None, None) => return Err(Error::Config("a model config is required".into())),
    };
    model.validate().map_err(|e| Error::Config(e.to_string()))?;
    let cfg = run.validation()?;
    let set = load_trails(&args.trails, run)?;
    warn_threshold(cfg.hit_ratio_min, outlier_fraction(args.outlier_fraction, &set), set.len());
    let result = Validator::new(cfg)?.validate(&model, &set.trails)?;
    info!("{model}: score {:e}, hit ratio {}", result.score, result.hit_ratio);
    let report = ValidateReport {
        trails: args.trails.display().to_string(),
        model: &model,
        hit_ratio_min: cfg.hit_ratio_min,
        n_vertices: cfg.n_vertices,
        result: &result,
    };
    let json = to_json(&report)?;
    match &global.out {
        Some(p) => write_file(p, &json),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

/// Per-family result without the trace, which goes to CSV.
#[derive(Serialize)]
struct FamilySummary<'a> {
    family: ModelFamily,
    best_params: &'a ModelParams,
    best_score: f64,
    best_score_inv_m2: Option<f64>,
    evaluations: usize,
    trace_csv: String,
}

#[derive(Serialize)]
struct OptimizeReport<'a> {
    trails: String,
    hit_ratio_min: f64,
    n_vertices: usize,
    seed: u64,
    budget_per_combo: usize,
    results: BTreeMap<&'static str, FamilySummary<'a>>,
    winner: Option<&'static str>,
}

fn parse_families(names: &[String]) -> Result<Vec<ModelFamily>> {
    if names.is_empty() {
        return Err(Error::Config("no model families selected".into()));
    }
    let mut out = Vec::new();
    for n in names {
        let f: ModelFamily = n.trim().parse()?;
        if !out.contains(&f) {
            out.push(f);
        }
    }
    Ok(out)
}

fn cmd_optimize(args: &OptimizeArgs, global: &GlobalArgs, run: &RunConfig) -> Result<()> {
    let mut config: OptimizeConfig = match &args.config {
        Some(p) => load_config(p)?,
        None => OptimizeConfig::default(),
    };
    if let Some(f) = &args.families {
        config.families = f.clone();
    }
    if let Some(b) = args.budget {
        config.budget_per_combo = b;
    }
    let families = parse_families(&config.families)?;
    let mut spaces = BTreeMap::new();
    for (k, v) in &config.spaces {
        spaces.insert(k.parse::<ModelFamily>()?, v.clone());
    }
    let cfg = run.validation()?;
    let set = load_trails(&args.trails, run)?;
    let dt = set.trails[0].dt;
    warn_threshold(cfg.hit_ratio_min, outlier_fraction(args.outlier_fraction, &set), set.len());
    let optimizer: &dyn ContinuousOptimizer = match config.optimizer {
        OptimizerKind::Bayesian => &config.bayesian,
        OptimizerKind::Random => &RandomSearch,
    };
    let out_dir = global.out.clone().unwrap_or_else(|| PathBuf::from("."));

    let mut results: BTreeMap<ModelFamily, OptimizationResult> = BTreeMap::new();
    for family in families {
        let space = spaces.get(&family).cloned().unwrap_or_else(|| ParamSpace::default_for(family, dt));
        space.validate(family, dt)?;
        let budget = config.budget_per_combo * space.combos().len();
        let r = optimize_model_family(family, &set.trails, &cfg, &space, budget, run.seed, optimizer)?;
        info!(
            "({}) {}: score⁻¹ {} m² with {}",
            family.letter(),
            family,
            r.best_score_inv_m2.map_or("n/a".to_string(), |v| format!("{v:.2}")),
            r.best_params
        );
        results.insert(family, r);
    }

    let mut summaries = BTreeMap::new();
    for (family, r) in &results {
        let name = format!("trace_{}.csv", family.name());
        let path = out_dir.join(&name);
        let mut buf = Vec::new();
        r.write_trace_csv(&mut buf)?;
        write_file(&path, &String::from_utf8(buf).expect("CSV output is UTF-8"))?;
        summaries.insert(
            family.name(),
            FamilySummary {
                family: *family,
                best_params: &r.best_params,
                best_score: r.best_score,
                best_score_inv_m2: r.best_score_inv_m2,
                evaluations: r.evaluations,
                trace_csv: name,
            },
        );
    }
    let winner = select_best_model(&results).map(|(f, _)| f.name());
    let report = OptimizeReport {
        trails: args.trails.display().to_string(),
        hit_ratio_min: cfg.hit_ratio_min,
        n_vertices: cfg.n_vertices,
        seed: run.seed,
        budget_per_combo: config.budget_per_combo,
        results: summaries,
        winner,
    };
    write_file(&out_dir.join("optimize.json"), &to_json(&report)?)
}

fn cmd_synth(args: &SynthArgs, global: &GlobalArgs, run: &RunConfig) -> Result<()> {
    let mut spec = match &args.config {
        Some(p) => load_config::<SyntheticSpec>(p)?,
        None => {
            let generator = match args.kind {
                GeneratorKind::ConstantSpeed => Generator::ConstantSpeed { v_true: args.v_true },
                GeneratorKind::CappedAccel => Generator::CappedAccel {
                    a_true: args.a_true,
                    v_true: args.v_true,
                },
                GeneratorKind::TwoSegment => Generator::TwoSegment {
                    t_inert_true: args.t_inert_true,
                    v_final_true: args.v_true,
                },
            };
            let mut spec = SyntheticSpec::new(generator, run.n_trails, run.seed);
            spec.dt = run.dt;
            spec
        }
    };
    if global.n_trails.is_some() {
        spec.n_trails = run.n_trails;
    }
    if global.seed.is_some() {
        spec.seed = run.seed;
    }
    if global.dt.is_some() {
        spec.dt = run.dt;
    }
    if let Some(f) = args.outlier_fraction {
        spec.outlier_fraction = f;
    }
    if let Some(o) = args.outlier_offset {
        spec.outlier_offset = o;
    }
    if args.boundary {
        spec.sampling = TargetSampling::Boundary;
    }
    let set = generate_trails(&spec)?;
    let out = global.out.clone().unwrap_or_else(|| PathBuf::from("synthetic.csv"));
    set.save(&out)?;
    info!("wrote {} synthetic trails ({} outliers) to {}", set.len(), spec.n_outliers(), out.display());
    Ok(())
}

fn cmd_plot(args: &PlotArgs, global: &GlobalArgs) -> Result<()> {
    let out_dir = global.out.clone().unwrap_or_else(|| PathBuf::from("."));
    if args.no_boundaries && args.results.is_empty() {
        return Err(Error::Config("nothing to plot: pass result JSONs or drop --no-boundaries".into()));
    }
    if !args.no_boundaries {
        let mut cfg = match &args.models {
            Some(p) => load_config::<BoundaryPlotConfig>(p)?,
            None => BoundaryPlotConfig::default(),
        };
        if let Some(dt) = global.dt {
            cfg.dt = dt;
        }
        if let Some(n) = global.n_vertices {
            cfg.n_vertices = n;
        }
        write_file(&out_dir.join("boundaries.svg"), &plot::boundary_overlay_svg(&cfg)?)?;
    }
    if !args.results.is_empty() {
        let bars = plot::load_bars(&args.results)?;
        write_file(&out_dir.join("scores.svg"), &plot::score_chart_svg(&bars)?)?;
    }
    Ok(())
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    let run = cli.global.resolve();
    if let Some(n) = run.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("--threads: {e}")))?;
    }
    match &cli.command {
        Command::Trails(a) => cmd_trails(a, &cli.global, &run),
        Command::Validate(a) => cmd_validate(a, &cli.global, &run),
        Command::Optimize(a) => cmd_optimize(a, &cli.global, &run),
        Command::Synth(a) => cmd_synth(a, &cli.global, &run),
        Command::Plot(a) => cmd_plot(a, &cli.global),
    }
}
