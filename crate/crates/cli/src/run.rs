//! Single runs: propagation, pair analysis and the flat result row.

use pairstate::dynamics::{extract_g_blocks, propagate, GBlocks, Propagator};
use pairstate::modebasis::ModeBasis;
use pairstate::multipair::{pair_amplitudes, sector_observables, sector_probabilities, vacuum_amplitude, SectorReport};
use pairstate::physconfig::RunConfig;
use pairstate::Result;
use serde::{Deserialize, Serialize};

/// Number of single pairs listed in every row.
pub const TOP_PAIRS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    pub electron: usize,
    pub positron: usize,
    pub electron_mode: String,
    pub positron_mode: String,
    pub probability: f64,
}

/// One line of output; a failed point keeps only `sweep_value`,
/// `config_hash` and `error`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub config_hash: String,
    /// Total field duration in laser cycles (ramps included).
    pub total_cycles: f64,
    pub vacuum_probability: f64,
    /// c_N for N = 0..=n_sector_max.
    pub c_n: Vec<f64>,
    pub spin_electron: Vec<Option<f64>>,
    pub spin_positron: Vec<Option<f64>>,
    pub helicity_electron: Vec<Option<f64>>,
    pub helicity_positron: Vec<Option<f64>>,
    pub top_pairs: Vec<PairEntry>,
    pub unitarity_defect: f64,
    pub cond_g_mm: f64,
    pub discarded_mass: f64,
    pub error: Option<String>,
}

impl ResultRow {
    pub fn failed(sweep_value: f64, config: &RunConfig, error: String) -> Self {
        Self {
            sweep_value,
            config_hash: config.hash_hex(),
            total_cycles: config.window.total_cycles() as f64,
            vacuum_probability: f64::NAN,
            c_n: Vec::new(),
            spin_electron: Vec::new(),
            spin_positron: Vec::new(),
            helicity_electron: Vec::new(),
            helicity_positron: Vec::new(),
            top_pairs: Vec::new(),
            unitarity_defect: f64::NAN,
            cond_g_mm: f64::NAN,
            discarded_mass: f64::NAN,
            error: Some(error),
        }
    }

    pub fn csv_header(n_sector_max: usize) -> Vec<String> {
        let mut h: Vec<String> = ["sweep_value", "config_hash", "total_cycles", "vacuum_probability"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for prefix in ["c", "s+", "s-", "h+", "h-"] {
            for n in 0..=n_sector_max {
                h.push(format!("{prefix}_{n}"));
            }
        }
        for k in 1..=TOP_PAIRS {
            h.push(format!("pair{k}_electron"));
            h.push(format!("pair{k}_positron"));
            h.push(format!("pair{k}_probability"));
        }
        h.extend(["unitarity_defect", "cond_g_mm", "discarded_mass", "error"].iter().map(|s| s.to_string()));
        h
    }

    /// Fields in the order of [`ResultRow::csv_header`]; absent values are empty.
    pub fn csv_record(&self, n_sector_max: usize) -> Vec<String> {
        let num = |x: f64| if x.is_nan() { String::new() } else { x.to_string() };
        let mut r = vec![
            num(self.sweep_value),
            self.config_hash.clone(),
            num(self.total_cycles),
            num(self.vacuum_probability),
        ];
        let at = |v: &[f64], n: usize| v.get(n).map(|x| x.to_string()).unwrap_or_default();
        let opt = |v: &[Option<f64>], n: usize| v.get(n).copied().flatten().map(|x| x.to_string()).unwrap_or_default();
        r.extend((0..=n_sector_max).map(|n| at(&self.c_n, n)));
        for v in [&self.spin_electron, &self.spin_positron, &self.helicity_electron, &self.helicity_positron] {
            r.extend((0..=n_sector_max).map(|n| opt(v, n)));
        }
        for k in 0..TOP_PAIRS {
            match self.top_pairs.get(k) {
                Some(p) => r.extend([p.electron_mode.clone(), p.positron_mode.clone(), p.probability.to_string()]),
                None => r.extend([String::new(), String::new(), String::new()]),
            }
        }
        r.extend([
            num(self.unitarity_defect),
            num(self.cond_g_mm),
            num(self.discarded_mass),
            self.error.clone().unwrap_or_default(),
        ]);
        r
    }
}

/// Row plus the full sector report and, on request, the G-blocks.
#[derive(Clone, Debug, Serialize)]
pub struct RunOutcome {
    pub row: ResultRow,
    pub report: SectorReport,
    #[serde(skip)]
    pub g_blocks: Option<GBlocks>,
}

/// Pair analysis of an already computed propagator.
pub fn analyze(
    sweep_value: f64,
    config: &RunConfig,
    basis: &ModeBasis,
    u: &Propagator,
    keep_g: bool,
) -> Result<RunOutcome> {
    let g = extract_g_blocks(u, basis)?;
    let omega = pair_amplitudes(&g)?;
    let c_v = vacuum_amplitude(&g);
    let mut report = sector_probabilities(&omega, &c_v, basis, &config.numerics)?;
    sector_observables(&mut report);
    let obs = |f: fn(&pairstate::multipair::SectorObservables) -> f64| {
        report.sectors.iter().map(|s| s.observables.as_ref().map(f)).collect::<Vec<_>>()
    };
    let row = ResultRow {
        sweep_value,
        config_hash: config.hash_hex(),
        total_cycles: config.window.total_cycles() as f64,
        vacuum_probability: c_v.probability(),
        c_n: report.probabilities(),
        spin_electron: obs(|o| o.spin_electron),
        spin_positron: obs(|o| o.spin_positron),
        helicity_electron: obs(|o| o.helicity_electron),
        helicity_positron: obs(|o| o.helicity_positron),
        top_pairs: report
            .retained_pairs
            .iter()
            .take(TOP_PAIRS)
            .map(|p| PairEntry {
                electron: p.electron,
                positron: p.positron,
                electron_mode: basis.electron(p.electron).label.to_string(),
                positron_mode: basis.positron(p.positron).label.to_string(),
                probability: p.probability,
            })
            .collect(),
        unitarity_defect: u.unitarity_defect,
        cond_g_mm: omega.cond_mm,
        discarded_mass: report.discarded_mass,
        error: None,
    };
    Ok(RunOutcome { row, report, g_blocks: keep_g.then_some(g) })
}

/// Full pipeline for one configuration by direct propagation.
pub fn run_once(config: &RunConfig) -> Result<RunOutcome> {
    let config = config.clone().validate()?;
    let basis = ModeBasis::build(&config.numerics, &config.field);
    let u = propagate(&config, &basis)?;
    analyze(config.window.plateau_cycles as f64, &config, &basis, &u, false)
}
