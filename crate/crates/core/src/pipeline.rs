//! End-to-end run: `C` selection, sweep, marginals, MAP, slip statistics.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{current_threads, Exec};
use crate::forward::{ForwardSystem, StationSet};
use crate::green::GeometryParam;
use crate::grid::{DifferenceOperators, FaultGrid};
use crate::io;
use crate::posterior::{MapEstimate, Marginals, PosteriorGrid, SlipPosterior, SpectraCache};
use crate::posterior::slip_posterior;
use crate::scenario::{sha256_hex, ScenarioConfig};
use crate::solver::{COutcome, GlobalC};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// Where the global `C` came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CSource {
    Selected,
    Override,
}

/// Summary of the per-cell discrepancy constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellCStats {
    pub n_cells: usize,
    pub n_admissible: usize,
    pub min: f64,
    pub max: f64,
    pub geometric_mean: f64,
    pub n_zero: usize,
    pub n_bracket_top: usize,
    pub n_bracket_bottom: usize,
}

impl CellCStats {
    fn from_global(g: &GlobalC) -> Self {
        let cs: Vec<f64> = g.per_cell.iter().flatten().map(|s| s.c).collect();
        let pos: Vec<f64> = cs.iter().copied().filter(|c| *c > 0.0).collect();
        let gm = if pos.is_empty() {
            0.0
        } else {
            (pos.iter().map(|c| c.ln()).sum::<f64>() / pos.len() as f64).exp()
        };
        CellCStats {
            n_cells: g.per_cell.len(),
            n_admissible: cs.len(),
            min: cs.iter().copied().fold(f64::INFINITY, f64::min),
            max: g.c,
            geometric_mean: gm,
            n_zero: g.count(COutcome::BelowLowerEndpoint),
            n_bracket_top: g.count(COutcome::BracketTop),
            n_bracket_bottom: g.count(COutcome::BracketBottom),
        }
    }
}

/// Output of the `C` selection stage, reusable by later stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CSelectionRecord {
    pub global_c: f64,
    pub source: CSource,
    pub err_target: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<CellCStats>,
}

/// Versioned record of one run; carries everything needed to repeat it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub crate_version: String,
    pub config_hash: String,
    pub stations_hash: String,
    pub config: ScenarioConfig,
    /// Station table exactly as used (before any noise override).
    pub stations_csv: String,
    pub fault_grid: FaultGrid,
    pub c: CSelectionRecord,
    pub tau: f64,
    pub map: MapEstimate,
    pub posterior_mean: [f64; 3],
    pub posterior_std: [f64; 3],
    pub log_normalizer: f64,
    pub threads: usize,
    /// Wall-clock time; the only field that differs between repeated runs.
    pub wall_time_s: f64,
}

pub struct RunOutput {
    pub grid: FaultGrid,
    pub selection: CSelectionRecord,
    pub global: Option<GlobalC>,
    pub posterior: PosteriorGrid,
    pub marginals: Marginals,
    pub map: MapEstimate,
    pub slip: SlipPosterior,
    pub manifest: Manifest,
}

/// Fault grid, operators and the per-cell spectra for a config.
pub fn prepare(
    config: &ScenarioConfig,
    stations: &StationSet,
    exec: Exec,
) -> Result<(FaultGrid, DifferenceOperators, SpectraCache)> {
    config.validate()?;
    let st = config.effective_stations(stations);
    let grid = config.fault.build(&st).map_err(|e| e.at_stage("fault grid"))?;
    let ops = DifferenceOperators::new(&grid);
    let cache = SpectraCache::compute(&config.bx, &grid, &st, &config.medium, &ops, config.depth_guard_km, exec)
        .map_err(|e| e.at_stage("sweep"))?;
    if cache.n_admissible() == 0 {
        return Err(Error::Data("every cell of the box violates the depth guard".into()).at_stage("sweep"));
    }
    Ok((grid, ops, cache))
}

/// `err_rel · ‖𝒟u‖`.
pub fn err_target(config: &ScenarioConfig, stations: &StationSet) -> f64 {
    let st = config.effective_stations(stations);
    config.err_rel * st.data().component_mul(&st.weights()).norm()
}

/// Global `C` for the config, or the override when one is set.
pub fn select_c(
    config: &ScenarioConfig,
    stations: &StationSet,
    cache: &SpectraCache,
) -> Result<(CSelectionRecord, Option<GlobalC>)> {
    let target = err_target(config, stations);
    if let Some(c) = config.c_override {
        return Ok((
            CSelectionRecord {
                global_c: c,
                source: CSource::Override,
                err_target: target,
                cells: None,
            },
            None,
        ));
    }
    let g = crate::solver::select_c_global(&cache.cells, target).map_err(|e| e.at_stage("select C"))?;
    Ok((
        CSelectionRecord {
            global_c: g.c,
            source: CSource::Selected,
            err_target: target,
            cells: Some(CellCStats::from_global(&g)),
        },
        Some(g),
    ))
}

pub fn run_pipeline(config: &ScenarioConfig, stations: &StationSet, exec: Exec) -> Result<RunOutput> {
    let start = Instant::now();
    let (grid, ops, cache) = prepare(config, stations, exec)?;
    let (selection, global) = select_c(config, stations, &cache)?;
    let posterior = cache
        .posterior(selection.global_c, config.tau)
        .map_err(|e| e.at_stage("posterior"))?;
    let marginals = posterior.marginals();
    let map = posterior.map();
    let slip = slip_at(config, stations, &grid, &ops, &map.cell, selection.global_c)?;
    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config.hash(),
        stations_hash: sha256_hex(io::stations_csv(stations)?.as_bytes()),
        config: config.clone(),
        stations_csv: io::stations_csv(stations)?,
        fault_grid: grid.clone(),
        c: selection,
        tau: config.tau,
        map,
        posterior_mean: marginals.means(),
        posterior_std: marginals.stds(),
        log_normalizer: posterior.log_normalizer,
        threads: match exec {
            Exec::Sequential => 1,
            Exec::Parallel => current_threads(),
        },
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok(RunOutput {
        grid,
        selection,
        global,
        posterior,
        marginals,
        map,
        slip,
        manifest,
    })
}

/// Slip mean and standard deviation at a fixed geometry.
pub fn slip_at(
    config: &ScenarioConfig,
    stations: &StationSet,
    grid: &FaultGrid,
    ops: &DifferenceOperators,
    m: &GeometryParam,
    c: f64,
) -> Result<SlipPosterior> {
    let st = config.effective_stations(stations);
    let sys = ForwardSystem::assemble(m, grid, &st, &config.medium, config.depth_guard_km)
        .map_err(|e| e.at_stage("slip posterior"))?;
    slip_posterior(&sys, ops, &st.data(), c, config.tau).map_err(|e| e.at_stage("slip posterior"))
}

/// Re-creates the inputs recorded in a manifest.
pub fn inputs_from_manifest(manifest: &Manifest) -> Result<(ScenarioConfig, StationSet)> {
    if manifest.schema_version != MANIFEST_SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "unsupported manifest schema version {}",
            manifest.schema_version
        )));
    }
    let stations = io::parse_stations(&manifest.stations_csv, "manifest", io::StationMode::Measured)?;
    if sha256_hex(manifest.stations_csv.as_bytes()) != manifest.stations_hash {
        return Err(Error::Data("manifest station table does not match its hash".into()));
    }
    Ok((manifest.config.clone(), stations))
}

/// File names of the run bundle.
pub mod files {
    pub const POSTERIOR: &str = "posterior.csv";
    pub const MARGINAL_A: &str = "marginal_a.csv";
    pub const MARGINAL_B: &str = "marginal_b.csv";
    pub const MARGINAL_D: &str = "marginal_d.csv";
    pub const SLIP: &str = "slip.csv";
    pub const MANIFEST: &str = "manifest.json";
}

pub fn write_marginals(dir: &Path, marginals: &Marginals) -> Result<()> {
    io::write_marginal(&dir.join(files::MARGINAL_A), &marginals.a)?;
    io::write_marginal(&dir.join(files::MARGINAL_B), &marginals.b)?;
    io::write_marginal(&dir.join(files::MARGINAL_D), &marginals.d)?;
    Ok(())
}

pub fn write_bundle(dir: &Path, out: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    io::write_posterior(&dir.join(files::POSTERIOR), &out.posterior)?;
    write_marginals(dir, &out.marginals)?;
    io::write_slip(&dir.join(files::SLIP), &out.grid, &out.slip)?;
    io::write_json(&dir.join(files::MANIFEST), &out.manifest)?;
    Ok(())
}
