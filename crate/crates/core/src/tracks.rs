//! Storm tracks: CSV ingestion, interpolation, landfall detection, filtering
//! and packing of storms into multi-storm simulation runs.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::TrackError;

/// Header of the track CSV format.
pub const TRACK_CSV_HEADER: [&str; 8] = [
    "storm_id", "basin", "t_hours", "lat", "lon", "rmax_km", "pmin_hpa", "vmax_ms",
];

/// Default sampling step for landfall detection, hours.
pub const LANDFALL_SUBSTEP_HOURS: f64 = 0.25;

/// Saffir-Simpson category 1 floor, m/s.
pub const DEFAULT_MIN_VMAX: f64 = 33.0;

const PMIN_RANGE_HPA: (f64, f64) = (850.0, 1020.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Basin {
    NA,
    EP,
    NI,
    SI,
    WP,
    SP,
}

impl Basin {
    pub const ALL: [Basin; 6] = [
        Basin::NA,
        Basin::EP,
        Basin::NI,
        Basin::SI,
        Basin::WP,
        Basin::SP,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Basin::NA => "NA",
            Basin::EP => "EP",
            Basin::NI => "NI",
            Basin::SI => "SI",
            Basin::WP => "WP",
            Basin::SP => "SP",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Basin::NA => "North Atlantic",
            Basin::EP => "East Pacific",
            Basin::NI => "North Indian",
            Basin::SI => "South Indian",
            Basin::WP => "West Pacific",
            Basin::SP => "South Pacific",
        }
    }

    pub fn is_southern(self) -> bool {
        matches!(self, Basin::SI | Basin::SP)
    }
}

impl fmt::Display for Basin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Basin {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Basin::ALL
            .into_iter()
            .find(|b| b.code() == s.trim())
            .ok_or_else(|| format!("unknown basin code {s:?}"))
    }
}

/// One eye fix of a storm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    /// Hours since storm start.
    pub t: f64,
    pub lat: f64,
    /// Degrees in [-180, 180).
    pub lon: f64,
    /// Radius of maximum winds, km.
    pub r_max: f64,
    /// Central pressure, hPa.
    pub p_min: f64,
    /// Maximum sustained wind, m/s.
    pub v_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Storm {
    pub id: String,
    pub basin: Basin,
    pub points: Vec<TrackPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandfallEvent {
    pub t_landfall: f64,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunAssignment {
    pub run_id: usize,
    pub storms: BTreeMap<Basin, String>,
}

/// Wraps a longitude into [-180, 180). Values already in range are returned untouched.
pub fn normalize_lon(lon: f64) -> f64 {
    if (-180.0..180.0).contains(&lon) {
        lon
    } else {
        (lon + 180.0).rem_euclid(360.0) - 180.0
    }
}

/// Signed longitude difference `to - from` wrapped into [-180, 180).
pub fn lon_delta(from: f64, to: f64) -> f64 {
    normalize_lon(to - from)
}

impl Storm {
    /// Validates ordering and per-point invariants.
    pub fn new(id: impl Into<String>, basin: Basin, points: Vec<TrackPoint>) -> Result<Self, TrackError> {
        let storm = Storm {
            id: id.into(),
            basin,
            points,
        };
        storm.validate()?;
        Ok(storm)
    }

    pub fn validate(&self) -> Result<(), TrackError> {
        let invalid = |message: String| TrackError::Validation {
            storm_id: self.id.clone(),
            message,
        };
        if self.points.len() < 2 {
            return Err(invalid(format!(
                "a storm needs at least 2 track points, found {}",
                self.points.len()
            )));
        }
        for p in &self.points {
            let finite = [p.t, p.lat, p.lon, p.r_max, p.p_min, p.v_max]
                .iter()
                .all(|v| v.is_finite());
            if !finite {
                return Err(invalid(format!("non-finite value at t={}", p.t)));
            }
            if !(-90.0..=90.0).contains(&p.lat) {
                return Err(invalid(format!("latitude {} out of range at t={}", p.lat, p.t)));
            }
            if p.r_max <= 0.0 {
                return Err(invalid(format!("r_max must be positive at t={}", p.t)));
            }
            if !(PMIN_RANGE_HPA.0..=PMIN_RANGE_HPA.1).contains(&p.p_min) {
                return Err(invalid(format!(
                    "central pressure {} hPa outside [{}, {}] at t={}",
                    p.p_min, PMIN_RANGE_HPA.0, PMIN_RANGE_HPA.1, p.t
                )));
            }
            if p.v_max < 0.0 {
                return Err(invalid(format!("negative v_max at t={}", p.t)));
            }
        }
        for pair in self.points.windows(2) {
            if pair[1].t <= pair[0].t {
                return Err(invalid(format!(
                    "track times not strictly increasing ({} then {})",
                    pair[0].t, pair[1].t
                )));
            }
        }
        Ok(())
    }

    pub fn t_first(&self) -> f64 {
        self.points[0].t
    }

    pub fn t_last(&self) -> f64 {
        self.points[self.points.len() - 1].t
    }

    pub fn peak_vmax(&self) -> f64 {
        self.points.iter().map(|p| p.v_max).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Piecewise-linear state at time `t`; exact at knots.
    pub fn at(&self, t: f64) -> Result<TrackPoint, TrackError> {
        interpolate_track(self, t)
    }
}

#[derive(Debug, Deserialize)]
struct TrackRow {
    storm_id: String,
    basin: String,
    t_hours: f64,
    lat: f64,
    lon: f64,
    rmax_km: f64,
    pmin_hpa: f64,
    vmax_ms: f64,
}

/// Parses the track CSV. Storms come back in order of first appearance, each
/// with its points sorted by time.
pub fn parse_track_file(text: &str) -> Result<Vec<Storm>, TrackError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let headers = reader
        .headers()
        .map_err(|e| TrackError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if headers.iter().ne(TRACK_CSV_HEADER.iter().copied()) {
        return Err(TrackError::Parse {
            line: 1,
            message: format!("expected header `{}`", TRACK_CSV_HEADER.join(",")),
        });
    }

    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, (Basin, Vec<TrackPoint>)> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| TrackError::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let row: TrackRow = record.deserialize(Some(&headers)).map_err(|e| TrackError::Parse {
            line,
            message: e.to_string(),
        })?;
        let basin: Basin = row
            .basin
            .parse()
            .map_err(|message| TrackError::Parse { line, message })?;
        let point = TrackPoint {
            t: row.t_hours,
            lat: row.lat,
            lon: normalize_lon(row.lon),
            r_max: row.rmax_km,
            p_min: row.pmin_hpa,
            v_max: row.vmax_ms,
        };
        match groups.get_mut(&row.storm_id) {
            Some((b, points)) => {
                if *b != basin {
                    return Err(TrackError::Parse {
                        line,
                        message: format!(
                            "storm {} switches basin from {} to {}",
                            row.storm_id, b, basin
                        ),
                    });
                }
                points.push(point);
            }
            None => {
                order.push(row.storm_id.clone());
                groups.insert(row.storm_id, (basin, vec![point]));
            }
        }
    }

    order
        .into_iter()
        .map(|id| {
            let (basin, mut points) = groups.remove(&id).expect("grouped id");
            points.sort_by(|a, b| a.t.total_cmp(&b.t));
            Storm::new(id, basin, points)
        })
        .collect()
}

/// Serializes storms to the track CSV format, rows grouped per storm.
pub fn write_track_csv(storms: &[Storm]) -> String {
    let mut out = TRACK_CSV_HEADER.join(",");
    out.push('\n');
    for storm in storms {
        for p in &storm.points {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                storm.id, storm.basin, p.t, p.lat, p.lon, p.r_max, p.p_min, p.v_max
            ));
        }
    }
    out
}

/// Linear interpolation of every track parameter at `t`. Longitudes are
/// unwrapped across the antimeridian before blending.
pub fn interpolate_track(storm: &Storm, t: f64) -> Result<TrackPoint, TrackError> {
    let (first, last) = (storm.t_first(), storm.t_last());
    if !(t >= first && t <= last) {
        return Err(TrackError::OutOfRange { t, first, last });
    }
    let pts = &storm.points;
    let upper = pts.partition_point(|p| p.t < t);
    if pts[upper].t == t {
        return Ok(pts[upper]);
    }
    let (a, b) = (&pts[upper - 1], &pts[upper]);
    let lambda = (t - a.t) / (b.t - a.t);
    let mix = |x0: f64, x1: f64| (1.0 - lambda) * x0 + lambda * x1;
    let lon_b = a.lon + lon_delta(a.lon, b.lon);
    Ok(TrackPoint {
        t,
        lat: mix(a.lat, b.lat),
        lon: normalize_lon(mix(a.lon, lon_b)),
        r_max: mix(a.r_max, b.r_max),
        p_min: mix(a.p_min, b.p_min),
        v_max: mix(a.v_max, b.v_max),
    })
}

/// Regular lat-lon land/ocean raster. Cells outside the raster read as ocean.
#[derive(Debug, Clone, PartialEq)]
pub struct LandRaster {
    pub south: f64,
    pub west: f64,
    pub cell_deg: f64,
    pub rows: usize,
    pub cols: usize,
    cells: Vec<bool>,
}

impl LandRaster {
    pub fn new(south: f64, west: f64, cell_deg: f64, rows: usize, cols: usize, cells: Vec<bool>) -> Self {
        assert!(cell_deg > 0.0, "cell size must be positive");
        assert_eq!(cells.len(), rows * cols, "land raster size mismatch");
        Self {
            south,
            west,
            cell_deg,
            rows,
            cols,
            cells,
        }
    }

    /// Builds a raster by evaluating `is_land` at each cell center.
    pub fn from_fn(
        south: f64,
        west: f64,
        cell_deg: f64,
        rows: usize,
        cols: usize,
        mut is_land: impl FnMut(f64, f64) -> bool,
    ) -> Self {
        let mut cells = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let lat = south + (r as f64 + 0.5) * cell_deg;
            for c in 0..cols {
                let lon = normalize_lon(west + (c as f64 + 0.5) * cell_deg);
                cells.push(is_land(lat, lon));
            }
        }
        Self::new(south, west, cell_deg, rows, cols, cells)
    }

    pub fn cell_of(&self, lat: f64, lon: f64) -> Option<(usize, usize)> {
        let r = ((lat - self.south) / self.cell_deg).floor();
        let dlon = (lon - self.west).rem_euclid(360.0);
        let c = (dlon / self.cell_deg).floor();
        if r < 0.0 || c < 0.0 || r >= self.rows as f64 || c >= self.cols as f64 {
            return None;
        }
        Some((r as usize, c as usize))
    }

    pub fn is_land(&self, lat: f64, lon: f64) -> bool {
        self.cell_of(lat, lon)
            .map(|(r, c)| self.cells[r * self.cols + c])
            .unwrap_or(false)
    }
}

/// First ocean-to-land crossing of the eye, sampled every `substep` hours.
pub fn detect_landfall(storm: &Storm, land: &LandRaster, substep: f64) -> Option<LandfallEvent> {
    assert!(substep > 0.0, "landfall substep must be positive");
    let (first, last) = (storm.t_first(), storm.t_last());
    let mut prev_ocean = false;
    let mut k = 0usize;
    loop {
        let mut t = first + k as f64 * substep;
        let final_sample = t >= last;
        if final_sample {
            t = last;
        }
        let p = interpolate_track(storm, t).expect("sample time within track");
        let on_land = land.is_land(p.lat, p.lon);
        if on_land && prev_ocean {
            return Some(LandfallEvent {
                t_landfall: t,
                lat: p.lat,
                lon: p.lon,
            });
        }
        prev_ocean = !on_land;
        if final_sample {
            return None;
        }
        k += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterCriteria {
    pub min_vmax: f64,
    pub require_landfall: bool,
    pub substep: f64,
}

impl Default for FilterCriteria {
    fn default() -> Self {
        Self {
            min_vmax: DEFAULT_MIN_VMAX,
            require_landfall: true,
            substep: LANDFALL_SUBSTEP_HOURS,
        }
    }
}

/// Keeps storms reaching `min_vmax` (and landfalling, if required), in input order.
pub fn filter_storms<'a>(storms: &'a [Storm], criteria: &FilterCriteria, land: &LandRaster) -> Vec<&'a Storm> {
    storms
        .iter()
        .filter(|s| s.peak_vmax() >= criteria.min_vmax)
        .filter(|s| !criteria.require_landfall || detect_landfall(s, land, criteria.substep).is_some())
        .collect()
}

/// Round-robin packing: the i-th storm of every basin goes to run i. The run
/// count equals the largest per-basin storm count, which is optimal.
pub fn pack_runs(storms: &[Storm]) -> Vec<RunAssignment> {
    let mut per_basin: BTreeMap<Basin, usize> = BTreeMap::new();
    let mut runs: Vec<RunAssignment> = Vec::new();
    for storm in storms {
        let slot = per_basin.entry(storm.basin).or_insert(0);
        if *slot == runs.len() {
            runs.push(RunAssignment {
                run_id: runs.len(),
                storms: BTreeMap::new(),
            });
        }
        runs[*slot].storms.insert(storm.basin, storm.id.clone());
        *slot += 1;
    }
    runs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(t: f64, lat: f64, lon: f64, v_max: f64) -> TrackPoint {
        TrackPoint {
            t,
            lat,
            lon,
            r_max: 40.0,
            p_min: 960.0,
            v_max,
        }
    }

    fn storm(id: &str, basin: Basin, points: Vec<TrackPoint>) -> Storm {
        Storm::new(id, basin, points).unwrap()
    }

    const HEADER: &str = "storm_id,basin,t_hours,lat,lon,rmax_km,pmin_hpa,vmax_ms\n";

    #[test]
    fn parses_minimal_storm() {
        let text = format!("{HEADER}A,NA,0,20,-80,40,960,40\nA,NA,3,20.5,-80.5,40,955,42\n");
        let storms = parse_track_file(&text).unwrap();
        assert_eq!(storms.len(), 1);
        assert_eq!(storms[0].basin, Basin::NA);
        assert_eq!(storms[0].points.len(), 2);
    }

    #[test]
    fn empty_file_is_empty_list() {
        assert!(parse_track_file("").unwrap().is_empty());
        assert!(parse_track_file(HEADER).unwrap().is_empty());
    }

    #[test]
    fn interleaved_rows_group_and_sort() {
        let text = format!(
            "{HEADER}A,NA,3,20,-80,40,960,40\nB,WP,6,15,130,30,950,50\nA,NA,0,19,-79,40,960,41\nB,WP,0,14,131,30,950,45\nB,WP,3,14.5,130.5,30,950,47\n"
        );
        let storms = parse_track_file(&text).unwrap();
        let ids: Vec<_> = storms.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["A", "B"]);
        assert_eq!(storms[0].points.iter().map(|p| p.t).collect::<Vec<_>>(), [0.0, 3.0]);
        assert_eq!(storms[1].points.iter().map(|p| p.t).collect::<Vec<_>>(), [0.0, 3.0, 6.0]);
    }

    #[test]
    fn unknown_basin_reports_line() {
        let text = format!("{HEADER}A,NA,0,20,-80,40,960,40\nA,XX,3,20,-80,40,960,40\n");
        match parse_track_file(&text) {
            Err(TrackError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_number_reports_line() {
        let text = format!("{HEADER}A,NA,zero,20,-80,40,960,40\n");
        assert!(matches!(parse_track_file(&text), Err(TrackError::Parse { line: 2, .. })));
    }

    #[test]
    fn duplicate_times_rejected() {
        let text = format!("{HEADER}A,NA,0,20,-80,40,960,40\nA,NA,0,21,-80,40,960,40\n");
        assert!(matches!(parse_track_file(&text), Err(TrackError::Validation { .. })));
    }

    #[test]
    fn longitudes_normalized_on_parse() {
        let text = format!("{HEADER}A,WP,0,20,181,40,960,40\nA,WP,3,20,-190,40,960,40\n");
        let s = &parse_track_file(&text).unwrap()[0];
        assert_eq!(s.points[0].lon, -179.0);
        assert_eq!(s.points[1].lon, 170.0);
    }

    #[test]
    fn interpolation_examples() {
        let s = storm(
            "A",
            Basin::NA,
            vec![pt(0.0, 10.0, -80.0, 40.0), pt(3.0, 12.0, -81.0, 55.0)],
        );
        assert_eq!(interpolate_track(&s, 0.0).unwrap(), s.points[0]);
        assert_eq!(interpolate_track(&s, 3.0).unwrap(), s.points[1]);
        assert!((interpolate_track(&s, 1.5).unwrap().lat - 11.0).abs() < 1e-12);
        assert!((interpolate_track(&s, 1.0).unwrap().v_max - 45.0).abs() < 1e-12);
        assert!(matches!(interpolate_track(&s, 3.5), Err(TrackError::OutOfRange { .. })));
        assert!(matches!(interpolate_track(&s, -0.1), Err(TrackError::OutOfRange { .. })));
    }

    #[test]
    fn interpolation_unwraps_antimeridian() {
        let s = storm(
            "A",
            Basin::WP,
            vec![pt(0.0, 20.0, 179.0, 40.0), pt(2.0, 20.0, -179.0, 40.0)],
        );
        let mid = interpolate_track(&s, 1.0).unwrap();
        assert_eq!(mid.lon, -180.0);
        let q = interpolate_track(&s, 0.5).unwrap();
        assert!((q.lon - 179.5).abs() < 1e-12);
    }

    fn coast_raster(coast_lon: f64) -> LandRaster {
        // 0.01 degree cells, land east of `coast_lon`.
        LandRaster::from_fn(10.0, -90.0, 0.01, 2000, 2000, |_, lon| lon >= coast_lon)
    }

    #[test]
    fn ocean_only_track_has_no_landfall() {
        let land = coast_raster(-70.0);
        let s = storm(
            "A",
            Basin::NA,
            vec![pt(0.0, 20.0, -80.0, 40.0), pt(12.0, 21.0, -78.0, 40.0)],
        );
        assert!(detect_landfall(&s, &land, LANDFALL_SUBSTEP_HOURS).is_none());
    }

    #[test]
    fn landfall_no_later_than_landed_knot() {
        let land = coast_raster(-75.0);
        let s = storm(
            "A",
            Basin::NA,
            vec![
                pt(0.0, 20.0, -80.0, 40.0),
                pt(6.0, 20.0, -74.0, 40.0),
                pt(12.0, 20.0, -70.0, 40.0),
            ],
        );
        let ev = detect_landfall(&s, &land, LANDFALL_SUBSTEP_HOURS).unwrap();
        assert!(ev.t_landfall <= 6.0);
        assert!(land.is_land(ev.lat, ev.lon));
    }

    #[test]
    fn landfall_matches_analytic_crossing() {
        // Coast on a cell edge at -75.0; eye moves 1 degree per 2 hours.
        let land = coast_raster(-75.0);
        let s = storm(
            "A",
            Basin::NA,
            vec![pt(0.0, 20.05, -80.0, 40.0), pt(10.0, 20.05, -75.0 + 0.0, 40.0), pt(20.0, 20.05, -70.0, 40.0)],
        );
        let analytic = 10.0;
        let ev = detect_landfall(&s, &land, LANDFALL_SUBSTEP_HOURS).unwrap();
        assert!(ev.t_landfall >= analytic - 1e-9);
        assert!(ev.t_landfall - analytic <= LANDFALL_SUBSTEP_HOURS);

        let s2 = storm(
            "B",
            Basin::NA,
            vec![pt(0.0, 20.05, -80.0, 40.0), pt(13.0, 20.05, -70.0, 40.0)],
        );
        let analytic = 5.0 / 10.0 * 13.0;
        let ev = detect_landfall(&s2, &land, LANDFALL_SUBSTEP_HOURS).unwrap();
        assert!(ev.t_landfall >= analytic - 1e-9, "{} vs {}", ev.t_landfall, analytic);
        assert!(ev.t_landfall - analytic <= LANDFALL_SUBSTEP_HOURS + 1e-9);
    }

    #[test]
    fn storm_starting_on_land_needs_real_crossing() {
        let land = LandRaster::from_fn(10.0, -90.0, 0.1, 200, 200, |_, lon| {
            lon < -85.0 || lon >= -75.0
        });
        let s = storm(
            "A",
            Basin::NA,
            vec![pt(0.0, 20.0, -86.0, 40.0), pt(24.0, 20.0, -74.0, 40.0)],
        );
        let ev = detect_landfall(&s, &land, LANDFALL_SUBSTEP_HOURS).unwrap();
        assert!(ev.lon >= -75.0);
    }

    #[test]
    fn filter_examples() {
        let land = coast_raster(-75.0);
        let weak = storm(
            "weak",
            Basin::NA,
            vec![pt(0.0, 20.0, -80.0, 20.0), pt(12.0, 20.0, -70.0, 18.0)],
        );
        let strong = storm(
            "strong",
            Basin::NA,
            vec![pt(0.0, 20.0, -80.0, 30.0), pt(12.0, 20.0, -70.0, 40.0)],
        );
        let all = vec![weak, strong];
        let identity = FilterCriteria {
            min_vmax: 0.0,
            require_landfall: false,
            ..Default::default()
        };
        assert_eq!(filter_storms(&all, &identity, &land).len(), 2);
        let kept = filter_storms(&all, &FilterCriteria::default(), &land);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id, "strong");
    }

    #[test]
    fn packing_examples() {
        let mk = |id: &str, basin| storm(id, basin, vec![pt(0.0, 20.0, 0.0, 40.0), pt(3.0, 20.0, 0.0, 40.0)]);
        assert_eq!(pack_runs(&[mk("a", Basin::NA)]).len(), 1);

        let six: Vec<_> = Basin::ALL.iter().enumerate().map(|(i, &b)| mk(&i.to_string(), b)).collect();
        let runs = pack_runs(&six);
        assert_eq!(runs.len(), 1);
        assert_eq!(runs[0].storms.len(), 6);

        let mut mixed = Vec::new();
        for i in 0..5 {
            mixed.push(mk(&format!("na{i}"), Basin::NA));
        }
        for i in 0..3 {
            mixed.push(mk(&format!("wp{i}"), Basin::WP));
        }
        let runs = pack_runs(&mixed);
        assert_eq!(runs.len(), 5);
        let sizes: Vec<_> = runs.iter().map(|r| r.storms.len()).collect();
        assert_eq!(sizes, [2, 2, 2, 1, 1]);
    }

    #[test]
    fn basin_codes_round_trip() {
        for b in Basin::ALL {
            assert_eq!(b.code().parse::<Basin>().unwrap(), b);
        }
        assert!("XX".parse::<Basin>().is_err());
    }
}
