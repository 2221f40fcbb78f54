//! Tracking-data ingestion: CSV parsing into per-player tracks, central
//! difference velocities, and seeded sampling of trails.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;

/// Prediction horizon in seconds.
pub const DEFAULT_DT: f64 = 1.0;
/// Number of trails sampled from tracking data.
pub const DEFAULT_N_TRAILS: usize = 500_000;

/// A column addressed either by its header name or by zero-based position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl ColumnRef {
    fn resolve(&self, header: &[String]) -> Result<usize> {
        match self {
            ColumnRef::Index(i) if *i < header.len() => Ok(*i),
            ColumnRef::Index(i) => Err(Error::MissingColumn(format!("#{i}"))),
            ColumnRef::Name(name) => header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn(name.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerColumns {
    pub id: String,
    pub x_col: ColumnRef,
    pub y_col: ColumnRef,
}

fn default_pitch_length() -> f64 {
    105.0
}

fn default_pitch_width() -> f64 {
    68.0
}

/// Layout of a tracking CSV file.
///
/// Players are either listed explicitly in `players`, or discovered from the
/// header: every column whose name starts with `player_prefix` holds an x
/// coordinate and the column right after it the matching y coordinate (the
/// layout of the Metrica Sports sample files).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingSchema {
    pub frame_col: ColumnRef,
    pub frame_rate_hz: f64,
    #[serde(default = "default_pitch_length")]
    pub pitch_length_m: f64,
    #[serde(default = "default_pitch_width")]
    pub pitch_width_m: f64,
    #[serde(default)]
    pub normalized: bool,
    /// Zero-based index of the row holding column names; earlier rows are skipped.
    #[serde(default)]
    pub header_row: usize,
    #[serde(default)]
    pub player_prefix: Option<String>,
    #[serde(default)]
    pub players: Vec<PlayerColumns>,
}

impl TrackingSchema {
    /// Schema for the Metrica Sports sample games (CSV variant).
    pub fn metrica() -> Self {
        TrackingSchema {
            frame_col: ColumnRef::Name("Frame".into()),
            frame_rate_hz: 25.0,
            pitch_length_m: 105.0,
            pitch_width_m: 68.0,
            normalized: true,
            header_row: 2,
            player_prefix: Some("Player".into()),
            players: Vec::new(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let schema: TrackingSchema = toml::from_str(s)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
        Self::from_toml_str(&text).map_err(|e| e.in_file(path))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("frame_rate_hz", self.frame_rate_hz),
            ("pitch_length_m", self.pitch_length_m),
            ("pitch_width_m", self.pitch_width_m),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.players.is_empty() && self.player_prefix.is_none() {
            return Err(Error::Config(
                "schema needs `players` or `player_prefix`".into(),
            ));
        }
        Ok(())
    }

    fn resolve_players(&self, header: &[String]) -> Result<Vec<(String, usize, usize)>> {
        let mut cols = Vec::new();
        for p in &self.players {
            cols.push((p.id.clone(), p.x_col.resolve(header)?, p.y_col.resolve(header)?));
        }
        if let Some(prefix) = &self.player_prefix {
            for (i, h) in header.iter().enumerate() {
                if h.starts_with(prefix.as_str()) && !cols.iter().any(|c| c.0 == *h) {
                    if i + 1 >= header.len() {
                        return Err(Error::MissingColumn(format!("{h} (y coordinate)")));
                    }
                    cols.push((h.clone(), i, i + 1));
                }
            }
        }
        if cols.is_empty() {
            return Err(Error::Config("no player columns matched the header".into()));
        }
        Ok(cols)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackFrame {
    pub frame: i64,
    pub position: Option<Point2>,
    pub velocity: Option<Point2>,
}

/// Time-ordered positions of one player. Frames are strictly increasing;
/// a frame with `position: None`, or a frame number that is absent
/// altogether, is a gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerTrack {
    pub player_id: String,
    pub frame_rate: f64,
    pub frames: Vec<TrackFrame>,
}

impl PlayerTrack {
    /// Builds a gap-free track of consecutive frames starting at `first_frame`.
    pub fn from_positions(
        player_id: impl Into<String>,
        frame_rate: f64,
        first_frame: i64,
        positions: impl IntoIterator<Item = Option<Point2>>,
    ) -> Self {
        let frames = positions
            .into_iter()
            .enumerate()
            .map(|(i, position)| TrackFrame {
                frame: first_frame + i as i64,
                position,
                velocity: None,
            })
            .collect();
        PlayerTrack {
            player_id: player_id.into(),
            frame_rate,
            frames,
        }
    }

    /// Index of `frame`, if present.
    fn index_of(&self, frame: i64, hint: usize) -> Option<usize> {
        if let Some(f) = self.frames.get(hint) {
            if f.frame == frame {
                return Some(hint);
            }
        }
        self.frames.binary_search_by_key(&frame, |f| f.frame).ok()
    }

    pub fn position_at(&self, frame: i64) -> Option<Point2> {
        self.index_of(frame, 0).and_then(|i| self.frames[i].position)
    }
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c.eq_ignore_ascii_case("nan") || c.eq_ignore_ascii_case("na")
}

fn parse_number(cell: &str, row: usize, column: &str) -> Result<f64> {
    let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
        row,
        message: format!("column `{column}`: cannot parse `{cell}` as a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row,
            message: format!("column `{column}`: non-finite value `{cell}`"),
        });
    }
    Ok(v)
}

/// Parses a tracking CSV into one track per player. Row numbers in errors
/// are one-based line numbers of the source.
pub fn parse_tracking<R: Read>(source: R, schema: &TrackingSchema) -> Result<Vec<PlayerTrack>> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(source);
    let mut records = reader.records();

    let mut header: Option<Vec<String>> = None;
    for i in 0..=schema.header_row {
        let rec = records.next().ok_or_else(|| Error::Parse {
            row: i + 1,
            message: "missing header row".into(),
        })??;
        if i == schema.header_row {
            header = Some(rec.iter().map(|s| s.trim().to_string()).collect());
        }
    }
    let header = header.expect("header row read above");
    let frame_col = schema.frame_col.resolve(&header)?;
    let player_cols = schema.resolve_players(&header)?;
    let (sx, sy) = if schema.normalized {
        (schema.pitch_length_m, schema.pitch_width_m)
    } else {
        (1.0, 1.0)
    };

    let mut tracks: Vec<PlayerTrack> = player_cols
        .iter()
        .map(|(id, _, _)| PlayerTrack {
            player_id: id.clone(),
            frame_rate: schema.frame_rate_hz,
            frames: Vec::new(),
        })
        .collect();

    let mut last_frame: Option<i64> = None;
    for rec in records {
        let rec = rec?;
        let row = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        let cell = |i: usize| rec.get(i).unwrap_or("");
        let frame_cell = cell(frame_col);
        let frame: i64 = frame_cell.trim().parse().map_err(|_| Error::Parse {
            row,
            message: format!("frame column `{}`: cannot parse `{frame_cell}`", header[frame_col]),
        })?;
        if let Some(prev) = last_frame {
            if frame <= prev {
                return Err(Error::Parse {
                    row,
                    message: format!("frame {frame} does not increase after {prev}"),
                });
            }
        }
        last_frame = Some(frame);

        for (track, (_, xc, yc)) in tracks.iter_mut().zip(&player_cols) {
            let (xs, ys) = (cell(*xc), cell(*yc));
            let position = if is_missing(xs) || is_missing(ys) {
                None
            } else {
                let x = parse_number(xs, row, &header[*xc])?;
                let y = parse_number(ys, row, &header[*yc])?;
                Some(Point2::new(x * sx, y * sy))
            };
            track.frames.push(TrackFrame {
                frame,
                position,
                velocity: None,
            });
        }
    }
    Ok(tracks)
}

/// Parses a tracking file, tagging every player id with the file stem so
/// tracks from several games stay distinct.
pub fn parse_tracking_file(path: impl AsRef<Path>, schema: &TrackingSchema) -> Result<Vec<PlayerTrack>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
    let mut tracks = parse_tracking(BufReader::new(file), schema).map_err(|e| e.in_file(path))?;
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    for t in &mut tracks {
        t.player_id = format!("{stem}:{}", t.player_id);
    }
    Ok(tracks)
}

/// Fills in central-difference velocities `(x[i+1] − x[i−1]) / (2 / frame_rate)`.
/// A frame gets no velocity when either neighbour is missing.
pub fn derive_velocities(mut track: PlayerTrack) -> PlayerTrack {
    let half_rate = 0.5 * track.frame_rate;
    let n = track.frames.len();
    let velocities: Vec<Option<Point2>> = (0..n)
        .map(|i| {
            if i == 0 || i + 1 == n {
                return None;
            }
            let (prev, cur, next) = (&track.frames[i - 1], &track.frames[i], &track.frames[i + 1]);
            if prev.frame != cur.frame - 1 || next.frame != cur.frame + 1 {
                return None;
            }
            match (prev.position, next.position) {
                (Some(a), Some(b)) => Some((b - a) * half_rate),
                _ => None,
            }
        })
        .collect();
    for (f, v) in track.frames.iter_mut().zip(velocities) {
        f.velocity = v;
    }
    track
}

/// One validation unit: position and velocity at `t0`, and the position
/// reached `dt` seconds later.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trail {
    pub x0: Point2,
    pub v0: Point2,
    pub xt: Point2,
    pub dt: f64,
}

impl Trail {
    pub fn new(x0: Point2, v0: Point2, xt: Point2, dt: f64) -> Result<Self> {
        let t = Trail { x0, v0, xt, dt };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParams(format!("trail dt must be > 0, got {}", self.dt)));
        }
        if !(self.x0.is_finite() && self.v0.is_finite() && self.xt.is_finite()) {
            return Err(Error::InvalidParams("trail has non-finite components".into()));
        }
        Ok(())
    }

    pub fn displacement(&self) -> f64 {
        self.xt.distance(self.x0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub seed: Option<u64>,
    pub n_trails: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_candidates: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrailSet {
    pub trails: Vec<Trail>,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct TrailRow {
    x0: f64,
    y0: f64,
    vx0: f64,
    vy0: f64,
    xt: f64,
    yt: f64,
    dt: f64,
}

impl TrailSet {
    pub fn new(trails: Vec<Trail>, source: impl Into<String>) -> Self {
        let provenance = Provenance {
            source: source.into(),
            n_trails: trails.len(),
            ..Provenance::default()
        };
        TrailSet { trails, provenance }
    }

    pub fn len(&self) -> usize {
        self.trails.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trails.is_empty()
    }

    /// The shared horizon of all trails, or `None` if they differ.
    pub fn common_dt(&self) -> Option<f64> {
        let first = self.trails.first()?.dt;
        self.trails.iter().all(|t| t.dt == first).then_some(first)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for t in &self.trails {
            w.serialize(TrailRow {
                x0: t.x0.x,
                y0: t.x0.y,
                vx0: t.v0.x,
                vy0: t.v0.y,
                xt: t.xt.x,
                yt: t.xt.y,
                dt: t.dt,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, source: impl Into<String>) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut trails = Vec::new();
        for (i, row) in r.deserialize::<TrailRow>().enumerate() {
            let row = row?;
            let trail = Trail::new(
                Point2::new(row.x0, row.y0),
                Point2::new(row.vx0, row.vy0),
                Point2::new(row.xt, row.yt),
                row.dt,
            )
            .map_err(|e| Error::Parse {
                row: i + 2,
                message: e.to_string(),
            })?;
            trails.push(trail);
        }
        Ok(TrailSet::new(trails, source))
    }

    /// Path of the JSON provenance file written next to a trail CSV.
    pub fn sidecar_path(csv_path: &Path) -> PathBuf {
        csv_path.with_extension("provenance.json")
    }

    /// Writes the CSV and its JSON provenance sidecar.
    pub fn save(&self, csv_path: impl AsRef<Path>) -> Result<()> {
        let path = csv_path.as_ref();
        let file = File::create(path).map_err(|e| Error::from(e).in_file(path))?;
        self.write_csv(std::io::BufWriter::new(file))?;
        let side = Self::sidecar_path(path);
        let json = serde_json::to_string_pretty(&self.provenance)?;
        std::fs::write(&side, json + "\n").map_err(|e| Error::from(e).in_file(&side))?;
        Ok(())
    }

    /// Reads a trail CSV, picking up the provenance sidecar when present.
    pub fn load(csv_path: impl AsRef<Path>) -> Result<Self> {
        let path = csv_path.as_ref();
        let file = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
        let mut set = Self::read_csv(BufReader::new(file), path.display().to_string())
            .map_err(|e| e.in_file(path))?;
        let side = Self::sidecar_path(path);
        if side.exists() {
            let text = std::fs::read_to_string(&side).map_err(|e| Error::from(e).in_file(&side))?;
            let mut prov: Provenance =
                serde_json::from_str(&text).map_err(|e| Error::from(e).in_file(&side))?;
            prov.n_trails = set.trails.len();
            set.provenance = prov;
        }
        Ok(set)
    }
}

/// Number of frames spanned by `dt`, which must be a whole multiple of the frame period.
pub fn horizon_frames(dt: f64, frame_rate: f64) -> Result<i64> {
    let steps = dt * frame_rate;
    let rounded = steps.round();
    if !(dt > 0.0) || rounded < 1.0 || (steps - rounded).abs() > 1e-9 * rounded.max(1.0) {
        return Err(Error::Config(format!(
            "dt = {dt} s is not a positive multiple of the frame period 1/{frame_rate} s"
        )));
    }
    Ok(rounded as i64)
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    track: u32,
    start: u32,
    end: u32,
}

fn enumerate_candidates(tracks: &[PlayerTrack], dt: f64) -> Result<Vec<Candidate>> {
    let mut out = Vec::new();
    for (ti, track) in tracks.iter().enumerate() {
        let steps = horizon_frames(dt, track.frame_rate)?;
        for (i, f) in track.frames.iter().enumerate() {
            if f.position.is_none() || f.velocity.is_none() {
                continue;
            }
            let hint = i + steps as usize;
            if let Some(j) = track.index_of(f.frame + steps, hint) {
                if track.frames[j].position.is_some() {
                    out.push(Candidate {
                        track: ti as u32,
                        start: i as u32,
                        end: j as u32,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Number of (player, frame) pairs from which a trail of horizon `dt` can be built.
pub fn count_candidates(tracks: &[PlayerTrack], dt: f64) -> Result<usize> {
    Ok(enumerate_candidates(tracks, dt)?.len())
}

/// Samples `n` trails uniformly without replacement from every (player,
/// frame) pair that has a position and velocity and a position `dt` later.
/// Tracks must already carry velocities (see [`derive_velocities`]).
pub fn extract_trails(tracks: &[PlayerTrack], dt: f64, n: usize, seed: u64) -> Result<TrailSet> {
    if n == 0 {
        return Err(Error::Config("number of trails must be >= 1".into()));
    }
    let candidates = enumerate_candidates(tracks, dt)?;
    if candidates.len() < n {
        return Err(Error::NotEnoughCandidates {
            requested: n,
            available: candidates.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = rand::seq::index::sample(&mut rng, candidates.len(), n);
    let trails = picked
        .iter()
        .map(|k| {
            let c = candidates[k];
            let track = &tracks[c.track as usize];
            let start = &track.frames[c.start as usize];
            let end = &track.frames[c.end as usize];
            Trail {
                x0: start.position.expect("candidate has a start position"),
                v0: start.velocity.expect("candidate has a velocity"),
                xt: end.position.expect("candidate has an end position"),
                dt,
            }
        })
        .collect();
    Ok(TrailSet {
        trails,
        provenance: Provenance {
            source: format!("{} tracks", tracks.len()),
            seed: Some(seed),
            n_trails: n,
            n_candidates: Some(candidates.len()),
            dt: Some(dt),
            generator: None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn schema_one_player() -> TrackingSchema {
        TrackingSchema::from_toml_str(
            r#"
            frame_col = "Frame"
            frame_rate_hz = 25.0
            normalized = true
            [[players]]
            id = "p1"
            x_col = "P1x"
            y_col = "P1y"
            "#,
        )
        .unwrap()
    }

    fn line_track(n: usize, rate: f64, v: Point2) -> PlayerTrack {
        let x0 = Point2::new(3.0, -2.0);
        PlayerTrack::from_positions(
            "p",
            rate,
            0,
            (0..n).map(|i| Some(x0 + v * (i as f64 / rate))),
        )
    }

    #[test]
    fn parses_normalized_midpoint() {
        let csv = "Frame,P1x,P1y,Ballx,Bally\n1,0.5,0.5,0.1,0.1\n2,0.5,0.5,0.1,0.1\n3,0.5,0.5,,\n";
        let tracks = parse_tracking(csv.as_bytes(), &schema_one_player()).unwrap();
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].frames.len(), 3);
        for f in &tracks[0].frames {
            assert_eq!(f.position, Some(Point2::new(52.5, 34.0)));
        }
    }

    #[test]
    fn empty_cells_are_gaps() {
        let csv = "Frame,P1x,P1y\n1,0.1,0.2\n2,,\n3,NaN,NaN\n4,0.3,0.4\n";
        let tracks = parse_tracking(csv.as_bytes(), &schema_one_player()).unwrap();
        let pos: Vec<bool> = tracks[0].frames.iter().map(|f| f.position.is_some()).collect();
        assert_eq!(pos, [true, false, false, true]);
    }

    #[test]
    fn header_mismatch_names_column() {
        let csv = "Frame,Px,Py\n1,0.1,0.2\n";
        let err = parse_tracking(csv.as_bytes(), &schema_one_player()).unwrap_err();
        assert!(matches!(&err, Error::MissingColumn(c) if c == "P1x"), "{err}");
        assert!(err.to_string().contains("P1x"));
    }

    #[test]
    fn malformed_row_reports_row_number() {
        let csv = "Frame,P1x,P1y\n1,0.1,0.2\n2,abc,0.2\n";
        let err = parse_tracking(csv.as_bytes(), &schema_one_player()).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 3, .. }), "{err}");
        let csv = "Frame,P1x,P1y\n2,0.1,0.2\n2,0.1,0.2\n";
        assert!(matches!(
            parse_tracking(csv.as_bytes(), &schema_one_player()),
            Err(Error::Parse { row: 3, .. })
        ));
    }

    #[test]
    fn unknown_schema_field_rejected() {
        let err = TrackingSchema::from_toml_str("frame_col = \"Frame\"\nframe_rate_hz = 25.0\nplayer_prefix = \"P\"\nfps = 3\n");
        assert!(err.is_err());
    }

    #[test]
    fn metrica_layout() {
        let csv = "\
,,,Home,,Home,,,
,,,11,,1,,,
Period,Frame,Time [s],Player11,,Player1,,Ball,
1,1,0.04,0.1,0.2,0.5,0.5,NaN,NaN
1,2,0.08,0.1,0.2,0.5,0.5,0.3,0.3
";
        let tracks = parse_tracking(csv.as_bytes(), &TrackingSchema::metrica()).unwrap();
        let ids: Vec<&str> = tracks.iter().map(|t| t.player_id.as_str()).collect();
        assert_eq!(ids, ["Player11", "Player1"]);
        let p = tracks[0].frames[0].position.unwrap();
        assert!((p.x - 10.5).abs() < 1e-12 && (p.y - 13.6).abs() < 1e-12);
    }

    #[test]
    fn central_difference_examples() {
        let t = PlayerTrack::from_positions(
            "p",
            25.0,
            0,
            [(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)].map(|p| Some(Point2::from(p))),
        );
        let t = derive_velocities(t);
        assert_eq!(t.frames[0].velocity, None);
        assert_eq!(t.frames[1].velocity, Some(Point2::new(25.0, 0.0)));
        assert_eq!(t.frames[2].velocity, None);

        let still = derive_velocities(PlayerTrack::from_positions("s", 25.0, 0, vec![Some(Point2::new(4.0, 4.0)); 5]));
        assert!(still.frames[1..4].iter().all(|f| f.velocity == Some(Point2::ZERO)));

        let gap = derive_velocities(PlayerTrack::from_positions(
            "g",
            25.0,
            0,
            [Some(Point2::ZERO), Some(Point2::ZERO), Some(Point2::ZERO), None, Some(Point2::ZERO)],
        ));
        assert_eq!(gap.frames[2].velocity, None);
        assert_eq!(gap.frames[1].velocity, Some(Point2::ZERO));
    }

    #[test]
    fn missing_frame_numbers_break_velocity() {
        let mut t = PlayerTrack::from_positions("p", 25.0, 0, vec![Some(Point2::ZERO); 4]);
        t.frames[2].frame = 5;
        t.frames[3].frame = 6;
        let t = derive_velocities(t);
        assert_eq!(t.frames[1].velocity, None);
        assert_eq!(t.frames[2].velocity, None);
    }

    #[test]
    fn candidate_counting_at_one_second() {
        let t = derive_velocities(line_track(26, 25.0, Point2::new(1.0, 0.0)));
        assert_eq!(count_candidates(&[t], 1.0).unwrap(), 0);
        let t = derive_velocities(line_track(27, 25.0, Point2::new(1.0, 0.0)));
        assert_eq!(count_candidates(std::slice::from_ref(&t), 1.0).unwrap(), 1);
        let set = extract_trails(std::slice::from_ref(&t), 1.0, 1, 0).unwrap();
        assert_eq!(set.trails[0].x0, t.frames[1].position.unwrap());
        assert_eq!(set.trails[0].xt, t.frames[26].position.unwrap());
    }

    #[test]
    fn too_few_candidates_reports_available() {
        let t = derive_velocities(line_track(30, 25.0, Point2::new(1.0, 0.0)));
        let err = extract_trails(&[t], 1.0, 10, 1).unwrap_err();
        assert!(matches!(err, Error::NotEnoughCandidates { requested: 10, available: 4 }));
        assert!(err.to_string().contains('4'));
    }

    #[test]
    fn dt_must_be_frame_multiple() {
        assert_eq!(horizon_frames(1.0, 25.0).unwrap(), 25);
        assert_eq!(horizon_frames(0.04, 25.0).unwrap(), 1);
        assert!(horizon_frames(0.05, 25.0).is_err());
        assert!(horizon_frames(0.0, 25.0).is_err());
    }

    #[test]
    fn sampling_is_deterministic_and_complete() {
        let tracks: Vec<PlayerTrack> = (0..3)
            .map(|k| derive_velocities(line_track(60, 25.0, Point2::new(k as f64, 1.0))))
            .collect();
        let total = count_candidates(&tracks, 1.0).unwrap();
        assert_eq!(total, 3 * 34);
        let a = extract_trails(&tracks, 1.0, 50, 42).unwrap();
        let b = extract_trails(&tracks, 1.0, 50, 42).unwrap();
        assert_eq!(a, b);
        let c = extract_trails(&tracks, 1.0, 50, 43).unwrap();
        assert_ne!(a.trails, c.trails);
        let all = extract_trails(&tracks, 1.0, total, 7).unwrap();
        let mut keys: Vec<[u64; 4]> = all
            .trails
            .iter()
            .map(|t| [t.x0.x, t.x0.y, t.v0.x, t.v0.y].map(f64::to_bits))
            .collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), total);
    }

    #[test]
    fn trail_csv_round_trip_and_sidecar() {
        let tracks = vec![derive_velocities(line_track(40, 25.0, Point2::new(0.3, 7.1)))];
        let set = extract_trails(&tracks, 0.4, 20, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trails.csv");
        set.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x0,y0,vx0,vy0,xt,yt,dt\n"));
        let back = TrailSet::load(&path).unwrap();
        assert_eq!(back.trails, set.trails);
        assert_eq!(back.provenance.seed, Some(9));
    }

    #[test]
    fn trail_csv_rejects_bad_dt() {
        let csv = "x0,y0,vx0,vy0,xt,yt,dt\n0,0,0,0,1,1,0\n";
        assert!(matches!(TrailSet::read_csv(csv.as_bytes(), "t"), Err(Error::Parse { row: 2, .. })));
    }

    proptest! {
        #[test]
        fn linear_motion_velocity_exact(
            vx in -12.0f64..12.0, vy in -12.0f64..12.0, n in 3usize..80, rate in prop_oneof![Just(25.0), Just(10.0), Just(50.0)],
        ) {
            let v = Point2::new(vx, vy);
            let t = derive_velocities(line_track(n, rate, v));
            for f in &t.frames[1..n - 1] {
                let got = f.velocity.unwrap();
                prop_assert!((got - v).norm() <= 1e-12 * v.norm().max(1.0) * 1e3);
            }
        }

        #[test]
        fn samples_never_reference_gaps(seed in any::<u64>(), gaps in proptest::collection::vec(0usize..90, 0..15)) {
            let mut t = line_track(90, 25.0, Point2::new(2.0, -1.0));
            for g in &gaps {
                t.frames[*g].position = None;
            }
            let t = derive_velocities(t);
            let total = count_candidates(std::slice::from_ref(&t), 0.2).unwrap();
            prop_assume!(total > 0);
            let set = extract_trails(std::slice::from_ref(&t), 0.2, total.min(10), seed).unwrap();
            for tr in &set.trails {
                let i = t.frames.iter().position(|f| f.position == Some(tr.x0)).unwrap();
                prop_assert_eq!(t.frames[i].velocity, Some(tr.v0));
                prop_assert_eq!(t.frames[i + 5].position, Some(tr.xt));
            }
        }
    }
}
