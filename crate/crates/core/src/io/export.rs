//! Run artifacts: step log, track files and summary.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde_json::json;

use super::scenario::scenario_to_toml;
use crate::engine::{metrics, RunRecord, VesselSnapshot};
use crate::error::{Error, Result};
use crate::kinematics::VesselId;

pub const STEP_LOG_FILE: &str = "steps.csv";
pub const KML_FILE: &str = "tracks.kml";
pub const GEOJSON_FILE: &str = "tracks.geojson";
pub const SUMMARY_FILE: &str = "summary.json";

pub const STEP_LOG_HEADER: &str = "time_s,vessel_id,lon_deg,lat_deg,speed_mps,heading_deg,ex_m,ey_m,e_theta_rad,u_x,u_y,u_v,u_theta,captured,critic_converged,actor_converged";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Format {
    Csv,
    Kml,
    GeoJson,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "kml" => Ok(Format::Kml),
            "geojson" => Ok(Format::GeoJson),
            other => Err(Error::validation(
                "formats",
                format!("unknown format {other:?} (expected csv, kml or geojson)"),
            )),
        }
    }
}

/// Parses a comma-separated format list such as `csv,kml`.
pub fn parse_formats(list: &str) -> Result<BTreeSet<Format>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect()
}

pub fn all_formats() -> BTreeSet<Format> {
    [Format::Csv, Format::Kml, Format::GeoJson]
        .into_iter()
        .collect()
}

/// Fixed-point decimal with at least nine significant digits.
pub fn fixed(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0.000000000".to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (8 - magnitude).max(1) as usize;
    format!("{x:.decimals$}")
}

fn step_row(time: f64, v: &VesselSnapshot) -> [String; 16] {
    let r = &v.record;
    [
        fixed(time),
        v.id.to_string(),
        fixed(v.lon.to_degrees()),
        fixed(v.lat.to_degrees()),
        fixed(v.speed),
        fixed(v.heading.to_degrees()),
        fixed(r.error.ex),
        fixed(r.error.ey),
        fixed(r.error.e_theta),
        fixed(r.control.u_x),
        fixed(r.control.u_y),
        fixed(r.polar.u_v),
        fixed(r.polar.u_theta),
        v.captured.to_string(),
        v.critic_converged.to_string(),
        v.actor_converged.to_string(),
    ]
}

pub fn step_log(record: &RunRecord) -> Result<String> {
    let csv_err = |e: csv::Error| Error::encode("step log", e);
    let mut w = csv::Writer::from_writer(Vec::with_capacity(64 + record.snapshots.len() * 256));
    w.write_record(STEP_LOG_HEADER.split(','))
        .map_err(csv_err)?;
    for snap in &record.snapshots {
        for v in &snap.vessels {
            w.write_record(step_row(snap.time, v)).map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::encode("step log", e))?;
    String::from_utf8(bytes).map_err(|e| Error::encode("step log", e))
}

struct Track {
    id: VesselId,
    role: &'static str,
    mission: String,
    captured: bool,
    capture_time_s: Option<f64>,
    coords: Vec<(f64, f64)>,
}

fn tracks(record: &RunRecord) -> Vec<Track> {
    let summary = metrics(record);
    let config = &record.config;
    let mut out = vec![Track {
        id: config.evader.vessel.id,
        role: "evader",
        mission: "evade".into(),
        captured: false,
        capture_time_s: None,
        coords: Vec::new(),
    }];
    for p in &config.pursuers {
        let m = summary.pursuer(p.vessel.id);
        out.push(Track {
            id: p.vessel.id,
            role: "pursuer",
            mission: m
                .and_then(|m| m.final_mission)
                .unwrap_or(p.mission)
                .to_string(),
            captured: m.is_some_and(|m| m.capture_time_s.is_some()),
            capture_time_s: m.and_then(|m| m.capture_time_s),
            coords: Vec::new(),
        });
    }
    for snap in &record.snapshots {
        for v in &snap.vessels {
            if let Some(t) = out.iter_mut().find(|t| t.id == v.id) {
                t.coords.push((v.lon.to_degrees(), v.lat.to_degrees()));
            }
        }
    }
    out
}

pub fn kml(record: &RunRecord) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<kml xmlns=\"http://www.opengis.net/kml/2.2\">\n<Document>\n");
    let _ = writeln!(
        out,
        "  <name>pursuit run (seed {})</name>",
        record.config.seed
    );
    for t in tracks(record) {
        out.push_str("  <Placemark>\n");
        let _ = writeln!(out, "    <name>{} {}</name>", t.role, t.id);
        let capture = match t.capture_time_s {
            Some(s) => format!("captured at {} s", fixed(s)),
            None => "not captured".into(),
        };
        let _ = writeln!(
            out,
            "    <description>mission: {}; {}</description>",
            t.mission, capture
        );
        out.push_str("    <ExtendedData>\n");
        let _ = writeln!(
            out,
            "      <Data name=\"vessel_id\"><value>{}</value></Data>",
            t.id
        );
        let _ = writeln!(
            out,
            "      <Data name=\"mission\"><value>{}</value></Data>",
            t.mission
        );
        let _ = writeln!(
            out,
            "      <Data name=\"captured\"><value>{}</value></Data>",
            t.captured
        );
        out.push_str("    </ExtendedData>\n");
        out.push_str("    <LineString>\n      <tessellate>1</tessellate>\n      <coordinates>");
        for (i, (lon, lat)) in t.coords.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{},{},0", fixed(*lon), fixed(*lat));
        }
        out.push_str("</coordinates>\n    </LineString>\n  </Placemark>\n");
    }
    out.push_str("</Document>\n</kml>\n");
    out
}

pub fn geojson(record: &RunRecord) -> Result<String> {
    let features: Vec<_> = tracks(record)
        .into_iter()
        .map(|t| {
            let coords: Vec<[f64; 2]> = t.coords.iter().map(|&(lon, lat)| [lon, lat]).collect();
            json!({
                "type": "Feature",
                "geometry": { "type": "LineString", "coordinates": coords },
                "properties": {
                    "vessel_id": t.id,
                    "role": t.role,
                    "mission": t.mission,
                    "captured": t.captured,
                    "capture_time_s": t.capture_time_s,
                },
            })
        })
        .collect();
    let doc = json!({ "type": "FeatureCollection", "features": features });
    serde_json::to_string_pretty(&doc).map_err(|e| Error::encode("geojson", e))
}

pub fn summary(record: &RunRecord) -> Result<String> {
    let m = metrics(record);
    let scenario = scenario_to_toml(&record.config).ok();
    let doc = json!({
        "seed": record.config.seed,
        "metrics": m,
        "scenario": scenario,
    });
    serde_json::to_string_pretty(&doc).map_err(|e| Error::encode("summary", e))
}

fn write(dir: &Path, name: &str, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

/// Writes the requested artifacts plus the summary into `out_dir`, creating
/// it if needed. Returns the written paths.
pub fn export_run(
    record: &RunRecord,
    formats: &BTreeSet<Format>,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    for f in formats {
        match f {
            Format::Csv => write(out_dir, STEP_LOG_FILE, &step_log(record)?, &mut written)?,
            Format::Kml => write(out_dir, KML_FILE, &kml(record), &mut written)?,
            Format::GeoJson => write(out_dir, GEOJSON_FILE, &geojson(record)?, &mut written)?,
        }
    }
    write(out_dir, SUMMARY_FILE, &summary(record)?, &mut written)?;
    Ok(written)
}
