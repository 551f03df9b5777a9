//! Parameter sweeps with a per-point cache keyed by the config hash.
//!
//! Plateau sweeps propagate the turn-on ramp, one plateau cycle and the
//! turn-off ramp once and compose every point from them. Other axes run each
//! point from scratch. Points are computed on the rayon pool; files are
//! written afterwards in the order of `values`.

use std::fs;
use std::path::{Path, PathBuf};

use pairstate::dynamics::{propagate, propagate_segments};
use pairstate::modebasis::ModeBasis;
use pairstate::physconfig::RunConfig;
use pairstate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::run::{analyze, ResultRow, RunOutcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    PlateauCycles,
    AlphaPlus,
    K0Z,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmitFlags {
    #[serde(default)]
    pub sectors: bool,
    #[serde(default)]
    pub pairs: bool,
    #[serde(default)]
    pub gdump: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: RunConfig,
    pub sweep_axis: SweepAxis,
    pub values: Vec<f64>,
    pub outputs: PathBuf,
    #[serde(default)]
    pub emit: EmitFlags,
}

impl SweepSpec {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: SweepSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidInput("sweep has no values".into()));
        }
        self.base.clone().validate()?;
        for &v in &self.values {
            if self.sweep_axis == SweepAxis::PlateauCycles && !(v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64) {
                return Err(Error::InvalidInput(format!("plateau_cycles values must be non-negative integers, got {v}")));
            }
            self.point_config(v).validate()?;
        }
        Ok(())
    }

    /// The base config with the swept field replaced by `value`.
    pub fn point_config(&self, value: f64) -> RunConfig {
        let mut c = self.base.clone();
        match self.sweep_axis {
            SweepAxis::PlateauCycles => c.window.plateau_cycles = value as u32,
            SweepAxis::AlphaPlus => c.field = c.field.with_alpha_plus(value),
            SweepAxis::K0Z => c.numerics.k0_offset[2] = value,
        }
        c
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CachedPoint {
    row: ResultRow,
    report: serde_json::Value,
}

#[derive(Debug)]
pub struct SweepResult {
    pub rows: Vec<ResultRow>,
    pub csv_path: PathBuf,
    pub json_path: PathBuf,
    pub computed: usize,
    pub reused: usize,
}

impl SweepResult {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }
}

fn point_dir(outputs: &Path) -> PathBuf {
    outputs.join("points")
}

fn load_cached(path: &Path) -> Option<CachedPoint> {
    let text = fs::read_to_string(path).ok()?;
    let point: CachedPoint = serde_json::from_str(&text).ok()?;
    point.row.error.is_none().then_some(point)
}

fn write_extras(spec: &SweepSpec, dir: &Path, hash: &str, basis: &ModeBasis, outcome: &RunOutcome) -> Result<()> {
    if spec.emit.sectors {
        outcome.report.write_sectors_csv(fs::File::create(dir.join(format!("{hash}_sectors.csv")))?)?;
    }
    if spec.emit.pairs {
        outcome.report.write_states_csv(basis, fs::File::create(dir.join(format!("{hash}_states.csv")))?)?;
    }
    if let (true, Some(g)) = (spec.emit.gdump, &outcome.g_blocks) {
        g.write_binary(std::io::BufWriter::new(fs::File::create(dir.join(format!("{hash}_g.bin")))?))?;
    }
    Ok(())
}

#[allow(clippy::large_enum_variant)]
enum Point {
    Cached(CachedPoint),
    Fresh(Result<RunOutcome>),
}

/// Runs every point not already cached under `spec.outputs` and writes
/// `sweep.csv` and `sweep.json` there.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let dir = point_dir(&spec.outputs);
    fs::create_dir_all(&dir)?;
    let configs: Vec<RunConfig> = spec.values.iter().map(|&v| spec.point_config(v)).collect();
    let cached: Vec<Option<CachedPoint>> =
        configs.iter().map(|c| load_cached(&dir.join(format!("{}.json", c.hash_hex())))).collect();

    let pending: Vec<usize> = (0..configs.len()).filter(|&i| cached[i].is_none()).collect();
    let keep_g = spec.emit.gdump;
    let basis_for = |c: &RunConfig| ModeBasis::build(&c.numerics, &c.field);

    let mut fresh: Vec<(usize, Result<RunOutcome>)> = if pending.is_empty() {
        Vec::new()
    } else if spec.sweep_axis == SweepAxis::PlateauCycles {
        let basis = basis_for(&spec.base);
        match propagate_segments(&spec.base, &basis) {
            Ok(segments) => pending
                .par_iter()
                .map(|&i| {
                    let c = &configs[i];
                    let r = segments
                        .compose(c.window.plateau_cycles)
                        .and_then(|u| analyze(spec.values[i], c, &basis, &u, keep_g));
                    (i, r)
                })
                .collect(),
            Err(e) => {
                let msg = e.to_string();
                pending.iter().map(|&i| (i, Err(Error::InvalidInput(format!("segment propagation failed: {msg}"))))).collect()
            }
        }
    } else {
        pending
            .par_iter()
            .map(|&i| {
                let c = &configs[i];
                let basis = basis_for(c);
                (i, propagate(c, &basis).and_then(|u| analyze(spec.values[i], c, &basis, &u, keep_g)))
            })
            .collect()
    };
    fresh.sort_by_key(|(i, _)| *i);
    let computed = fresh.len();
    let mut points: Vec<Option<Point>> = cached.into_iter().map(|c| c.map(Point::Cached)).collect();
    for (i, r) in fresh {
        points[i] = Some(Point::Fresh(r));
    }

    let mut rows = Vec::with_capacity(points.len());
    let mut details = Vec::with_capacity(points.len());
    let mut reused = 0;
    for (i, point) in points.into_iter().enumerate() {
        let c = &configs[i];
        let hash = c.hash_hex();
        match point.expect("every point is cached or computed") {
            Point::Cached(p) => {
                reused += 1;
                rows.push(p.row.clone());
                details.push(serde_json::to_value(&p)?);
            }
            Point::Fresh(Ok(outcome)) => {
                let mut outcome = outcome;
                outcome.row.sweep_value = spec.values[i];
                let point = CachedPoint { row: outcome.row.clone(), report: serde_json::to_value(&outcome.report)? };
                fs::write(dir.join(format!("{hash}.json")), serde_json::to_string_pretty(&point)?)?;
                write_extras(spec, &dir, &hash, &basis_for(c), &outcome)?;
                rows.push(outcome.row);
                details.push(serde_json::to_value(&point)?);
            }
            Point::Fresh(Err(e)) => {
                let row = ResultRow::failed(spec.values[i], c, e.to_string());
                details.push(serde_json::json!({ "row": &row }));
                rows.push(row);
            }
        }
    }

    let n_max = spec.base.numerics.n_sector_max;
    let csv_path = spec.outputs.join("sweep.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(csv_error)?;
    w.write_record(ResultRow::csv_header(n_max)).map_err(csv_error)?;
    for r in &rows {
        w.write_record(r.csv_record(n_max)).map_err(csv_error)?;
    }
    w.flush()?;
    let json_path = spec.outputs.join("sweep.json");
    let doc = serde_json::json!({ "spec": spec, "points": details });
    fs::write(&json_path, serde_json::to_string_pretty(&doc)?)?;

    Ok(SweepResult { rows, csv_path, json_path, computed, reused })
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
