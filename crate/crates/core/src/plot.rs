//! SVG figures: reachable-area boundaries for a fixed kinematic state and a
//! bar chart of score⁻¹ per model.
//!
//! Output is plain SVG text with fixed float formatting, so identical inputs
//! give byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geometry::{Point2, Polygon};
use crate::models::{KinematicState, ModelParams, MotionModel, DEFAULT_N_VERTICES};

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 50.0;

/// Setup for the boundary overlay: one start state, one horizon, several models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundaryPlotConfig {
    pub state: KinematicState,
    pub dt: f64,
    pub n_vertices: usize,
    pub models: Vec<ModelParams>,
}

impl Default for BoundaryPlotConfig {
    /// Player at the origin running at 5 m/s along x, 1 s horizon, one
    /// representative parameter set per family.
    fn default() -> Self {
        BoundaryPlotConfig {
            state: KinematicState::new(Point2::ZERO, Point2::new(5.0, 0.0)),
            dt: 1.0,
            n_vertices: DEFAULT_N_VERTICES,
            models: vec![
                ModelParams::ConstantSpeed { v_max: 8.91 },
                ModelParams::ConstantAccel { a_max: 19.42 },
                ModelParams::CappedAccel { a_max: 19.42, v_max: 8.91 },
                ModelParams::TwoSegment {
                    t_inert: 0.22,
                    keep_initial: true,
                    v_const: None,
                    a_max: Some(19.42),
                    v_max: Some(8.91),
                },
            ],
        }
    }
}

impl BoundaryPlotConfig {
    /// One polygon per configured model, in order.
    pub fn polygons(&self) -> Result<Vec<Polygon>> {
        if self.models.is_empty() {
            return Err(Error::Config("boundary plot needs at least one model".into()));
        }
        self.models
            .iter()
            .map(|m| {
                m.validate()?;
                m.reachable_polygon(&self.state, self.dt, self.n_vertices)
            })
            .collect()
    }
}

fn legend(svg: &mut String, entries: &[(String, &str)]) {
    for (i, (label, color)) in entries.iter().enumerate() {
        let y = MARGIN + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<rect x="{:.1}" y="{:.1}" width="12" height="3" fill="{color}"/><text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#,
            WIDTH - 190.0,
            y - 4.0,
            WIDTH - 172.0,
            y,
            escape(label)
        );
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(svg: &mut String, title: &str) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="24" font-size="14" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

/// Closed boundary curves of every model, with axes in metres.
pub fn boundary_overlay_svg(cfg: &BoundaryPlotConfig) -> Result<String> {
    let polys = cfg.polygons()?;
    let (mut lo, mut hi) = (cfg.state.x0, cfg.state.x0);
    for p in polys.iter().flat_map(|p| p.vertices()) {
        lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    // Equal scaling on both axes so disks stay round.
    let plot_w = WIDTH - 2.0 * MARGIN - 150.0;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let scale = (plot_w / (hi.x - lo.x)).min(plot_h / (hi.y - lo.y));
    let to_px = |p: Point2| (MARGIN + (p.x - lo.x) * scale, HEIGHT - MARGIN - (p.y - lo.y) * scale);

    let mut svg = String::new();
    header(
        &mut svg,
        &format!(
            "Reachable boundaries, v0 = ({}, {}) m/s, dt = {} s",
            cfg.state.v0.x, cfg.state.v0.y, cfg.dt
        ),
    );
    // Axes through the start position.
    let (ox, oy) = to_px(cfg.state.x0);
    let (x_lo, _) = to_px(lo);
    let (x_hi, _) = to_px(hi);
    let (_, y_lo) = to_px(lo);
    let (_, y_hi) = to_px(hi);
    let _ = writeln!(
        svg,
        r##"<g stroke="#999" stroke-width="0.8"><line x1="{x_lo:.2}" y1="{oy:.2}" x2="{x_hi:.2}" y2="{oy:.2}"/><line x1="{ox:.2}" y1="{y_lo:.2}" x2="{ox:.2}" y2="{y_hi:.2}"/></g>"##
    );
    let _ = writeln!(
        svg,
        r#"<text x="{x_hi:.2}" y="{:.2}" font-size="10" text-anchor="end">x [m]</text><text x="{:.2}" y="{y_hi:.2}" font-size="10">y [m]</text>"#,
        oy - 4.0,
        ox + 4.0
    );
    let _ = writeln!(svg, r#"<circle cx="{ox:.2}" cy="{oy:.2}" r="3" fill="black"/>"#);

    let mut entries = Vec::new();
    for (i, (poly, model)) in polys.iter().zip(&cfg.models).enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut points = String::new();
        for (k, v) in poly.vertices().iter().enumerate() {
            let (x, y) = to_px(*v);
            if k > 0 {
                points.push(' ');
            }
            let _ = write!(points, "{x:.2},{y:.2}");
        }
        let _ = writeln!(
            svg,
            r#"<polygon points="{points}" fill="none" stroke="{color}" stroke-width="1.5"/>"#
        );
        entries.push((format!("({}) {}", model.family().letter(), model), color));
    }
    legend(&mut svg, &entries);
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// One bar of the score chart; `score_inv_m2` is `None` for a zero score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreBar {
    pub label: String,
    pub score_inv_m2: Option<f64>,
}

fn number(obj: &Value, field: &str, source: &str) -> Result<f64> {
    obj.get(field)
        .and_then(Value::as_f64)
        .ok_or_else(|| Error::Config(format!("{source}: field `{field}` is missing or not a number")))
}

fn inverse(score: f64, field: &str, source: &str) -> Result<Option<f64>> {
    if !(score.is_finite() && score >= 0.0) {
        return Err(Error::Config(format!("{source}: field `{field}` must be a finite score >= 0")));
    }
    Ok((score > 0.0).then(|| 1.0 / score))
}

fn bar_from_result(obj: &Value, source: &str) -> Result<ScoreBar> {
    if obj.get("best_score").is_some() || obj.get("family").is_some() {
        let family = obj
            .get("family")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Config(format!("{source}: field `family` is missing or not a string")))?;
        let score = number(obj, "best_score", source)?;
        return Ok(ScoreBar {
            label: family.to_string(),
            score_inv_m2: inverse(score, "best_score", source)?,
        });
    }
    let score = number(obj, "score", source)?;
    let label = obj
        .get("model")
        .and_then(|m| m.get("model"))
        .and_then(Value::as_str)
        .map_or_else(|| source.to_string(), str::to_string);
    Ok(ScoreBar {
        label,
        score_inv_m2: inverse(score, "score", source)?,
    })
}

/// Bars from one result document: an optimisation result, a validation
/// result, or an optimisation summary holding a `results` map of the former.
pub fn bars_from_json(doc: &Value, source: &str) -> Result<Vec<ScoreBar>> {
    if !doc.is_object() {
        return Err(Error::Config(format!("{source}: expected a JSON object")));
    }
    match doc.get("results") {
        Some(Value::Object(map)) => map
            .iter()
            .map(|(k, v)| bar_from_result(v, &format!("{source}: results.{k}")))
            .collect(),
        Some(_) => Err(Error::Config(format!("{source}: field `results` must be an object"))),
        None => Ok(vec![bar_from_result(doc, source)?]),
    }
}

/// Reads result JSON files and collects their bars in file order.
pub fn load_bars<P: AsRef<Path>>(paths: &[P]) -> Result<Vec<ScoreBar>> {
    if paths.is_empty() {
        return Err(Error::Config("score chart needs at least one result JSON".into()));
    }
    let mut bars = Vec::new();
    for p in paths {
        let p = p.as_ref();
        let text = std::fs::read_to_string(p).map_err(|e| Error::from(e).in_file(p))?;
        let doc: Value = serde_json::from_str(&text).map_err(|e| Error::from(e).in_file(p))?;
        let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("result");
        bars.extend(bars_from_json(&doc, stem)?);
    }
    Ok(bars)
}

/// Vertical bar chart of score⁻¹ (m²); lower is better.
pub fn score_chart_svg(bars: &[ScoreBar]) -> Result<String> {
    if bars.is_empty() {
        return Err(Error::Config("score chart needs at least one bar".into()));
    }
    let max = bars.iter().filter_map(|b| b.score_inv_m2).fold(0.0, f64::max);
    let top = if max > 0.0 { max * 1.1 } else { 1.0 };
    let plot_h = HEIGHT - 2.0 * MARGIN - 20.0;
    let slot = (WIDTH - 2.0 * MARGIN) / bars.len() as f64;
    let base = HEIGHT - MARGIN - 20.0;

    let mut svg = String::new();
    header(&mut svg, "Model comparison: score⁻¹ [m²] (lower is better)");
    let _ = writeln!(
        svg,
        r##"<line x1="{MARGIN}" y1="{base:.2}" x2="{:.2}" y2="{base:.2}" stroke="#333"/>"##,
        WIDTH - MARGIN
    );
    for (i, bar) in bars.iter().enumerate() {
        let cx = MARGIN + slot * (i as f64 + 0.5);
        let w = slot * 0.6;
        let color = COLORS[i % COLORS.len()];
        let (text_y, value_text) = match bar.score_inv_m2 {
            Some(v) => {
                let h = v / top * plot_h;
                let _ = writeln!(
                    svg,
                    r#"<rect x="{:.2}" y="{:.2}" width="{w:.2}" height="{h:.2}" fill="{color}"/>"#,
                    cx - w / 2.0,
                    base - h
                );
                (base - h - 4.0, format!("{v:.1}"))
            }
            None => (base - 4.0, "score 0".to_string()),
        };
        let _ = writeln!(
            svg,
            r#"<text x="{cx:.2}" y="{text_y:.2}" font-size="11" text-anchor="middle">{value_text}</text>"#
        );
        let _ = writeln!(
            svg,
            r#"<text x="{cx:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
            base + 16.0,
            escape(&bar.label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn default_overlay_has_four_closed_curves() {
        let cfg = BoundaryPlotConfig::default();
        let svg = boundary_overlay_svg(&cfg).unwrap();
        assert_eq!(svg.matches("<polygon").count(), 4);
        assert!(svg.trim_end().ends_with("</svg>"));
        // Independent area check: disk models against πr² (within the 200-gon deficit).
        let polys = cfg.polygons().unwrap();
        let pi = std::f64::consts::PI;
        let a = pi * 8.91f64.powi(2);
        let b = pi * (0.5f64 * 19.42).powi(2);
        assert!((polys[0].area() / a - 1.0).abs() < 2.1e-4);
        assert!((polys[1].area() / b - 1.0).abs() < 2.1e-4);
        assert!(polys[1].area() > polys[0].area());
        assert_eq!(boundary_overlay_svg(&cfg).unwrap(), svg);
    }

    #[test]
    fn overlay_rejects_bad_input() {
        let mut cfg = BoundaryPlotConfig::default();
        cfg.models.clear();
        assert!(boundary_overlay_svg(&cfg).is_err());
        cfg.models.push(ModelParams::ConstantSpeed { v_max: -1.0 });
        assert!(boundary_overlay_svg(&cfg).is_err());
    }

    #[test]
    fn bars_from_documents() {
        let opt = json!({"family": "two_segment", "best_score": 1.0 / 71.7});
        let bars = bars_from_json(&opt, "x").unwrap();
        assert_eq!(bars.len(), 1);
        assert!((bars[0].score_inv_m2.unwrap() - 71.7).abs() < 1e-9);

        let val = json!({"score": 0.0, "model": {"model": "constant_speed", "v_max": 1.0}});
        let bars = bars_from_json(&val, "x").unwrap();
        assert_eq!(bars[0], ScoreBar { label: "constant_speed".into(), score_inv_m2: None });

        let summary = json!({"results": {"a": {"family": "constant_speed", "best_score": 0.5}, "b": {"family": "constant_accel", "best_score": 0.25}}});
        assert_eq!(bars_from_json(&summary, "x").unwrap().len(), 2);
    }

    #[test]
    fn malformed_result_names_field() {
        let err = bars_from_json(&json!({"family": "c", "best_score": "oops"}), "r").unwrap_err();
        assert!(err.to_string().contains("best_score"), "{err}");
        let err = bars_from_json(&json!({"best_score": 0.1}), "r").unwrap_err();
        assert!(err.to_string().contains("family"), "{err}");
        let err = bars_from_json(&json!({"hit_ratio": 1.0}), "r").unwrap_err();
        assert!(err.to_string().contains("`score`"), "{err}");
        let err = bars_from_json(&json!({"results": []}), "r").unwrap_err();
        assert!(err.to_string().contains("results"), "{err}");
    }

    #[test]
    fn single_bar_chart() {
        let svg = score_chart_svg(&[ScoreBar { label: "d".into(), score_inv_m2: Some(71.7) }]).unwrap();
        assert_eq!(svg.matches("<rect").count(), 2); // background + bar
        assert!(svg.contains(">71.7<"));
        assert!(score_chart_svg(&[]).is_err());
    }
}
