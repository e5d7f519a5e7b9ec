//! `faultpost` command-line driver.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use faultpost::io::{self, StationMode};
use faultpost::pipeline::{self, files, CSelectionRecord, Manifest};
use faultpost::scenario::{self, sha256_hex, NoiseLevels, SyntheticTruth};
use faultpost::{Error, ErrorKind, Exec, GeometryParam, Result, ScenarioConfig, StationSet};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "faultpost", version, about = "Posterior of planar fault geometry from surface displacements")]
struct Cli {
    /// Worker threads for the sweep (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run the sweep in a single loop without the thread pool.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fill a station template with synthetic displacements.
    Synth {
        /// Ground truth (JSON).
        #[arg(long)]
        truth: PathBuf,
        /// Station CSV; displacement columns may be blank.
        #[arg(long)]
        template: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output station CSV.
        #[arg(long)]
        out: PathBuf,
        /// Truth sidecar (default: OUT with extension .truth.json).
        #[arg(long)]
        truth_out: Option<PathBuf>,
    },
    /// Select the global regularization constant and cache it.
    SelectC {
        #[command(flatten)]
        inputs: Inputs,
        /// Output JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the posterior on the parameter box.
    Sweep {
        #[command(flatten)]
        inputs: Inputs,
        /// Cached output of `select-c`.
        #[arg(long)]
        c_file: Option<PathBuf>,
        /// Output posterior CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Marginals, MAP and standard deviations of a posterior table.
    Marginals {
        #[arg(long)]
        posterior: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Slip mean and standard deviation at one geometry.
    SlipStats {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        c_file: Option<PathBuf>,
        /// Geometry `a,b,d`.
        #[arg(long, value_parser = parse_geometry, conflicts_with = "posterior")]
        geometry: Option<GeometryParam>,
        /// Use the MAP cell of this posterior table.
        #[arg(long)]
        posterior: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full pipeline, or a re-run from a manifest.
    Run {
        #[command(flatten)]
        inputs: OptionalInputs,
        /// Re-run the inputs recorded in this manifest.
        #[arg(long, conflicts_with_all = ["config", "stations"])]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

/// Config file, station file and the flags overriding config fields.
#[derive(Args)]
struct Inputs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    stations: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct OptionalInputs {
    #[arg(long, required_unless_present = "manifest")]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    stations: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct Overrides {
    /// Relative error level (config default 0.05).
    #[arg(long)]
    err_rel: Option<f64>,
    /// Noise rescaling τ (config default 1).
    #[arg(long)]
    tau: Option<f64>,
    /// Fixed regularization constant instead of discrepancy selection.
    #[arg(long)]
    c_override: Option<f64>,
    /// Nodes per side of the fault grid.
    #[arg(long)]
    n_side: Option<usize>,
    /// Assumed noise `hor,ver` in mm replacing the station file's.
    #[arg(long, value_parser = parse_noise)]
    noise: Option<NoiseLevels>,
    #[arg(long)]
    depth_guard_km: Option<f64>,
}

impl Overrides {
    fn apply(&self, mut c: ScenarioConfig) -> Result<ScenarioConfig> {
        if let Some(v) = self.err_rel {
            c.err_rel = v;
        }
        if let Some(v) = self.tau {
            c.tau = v;
        }
        if let Some(v) = self.c_override {
            c.c_override = Some(v);
        }
        if let Some(v) = self.n_side {
            c.fault.n_side = v;
        }
        if let Some(v) = self.noise {
            c.noise = Some(v);
        }
        if let Some(v) = self.depth_guard_km {
            c.depth_guard_km = v;
        }
        c.validate()?;
        Ok(c)
    }
}

fn parse_floats<const N: usize>(s: &str) -> std::result::Result<[f64; N], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}")))
        .collect::<std::result::Result<_, _>>()?;
    v.try_into().map_err(|_| format!("expected {N} comma-separated numbers"))
}

fn parse_geometry(s: &str) -> std::result::Result<GeometryParam, String> {
    let [a, b, d] = parse_floats::<3>(s)?;
    Ok(GeometryParam::new(a, b, d))
}

fn parse_noise(s: &str) -> std::result::Result<NoiseLevels, String> {
    let [sigma_hor, sigma_ver] = parse_floats::<2>(s)?;
    Ok(NoiseLevels { sigma_hor, sigma_ver })
}

/// Output of `select-c`, tied to the inputs that produced it.
#[derive(Serialize, Deserialize)]
struct CCache {
    config_hash: String,
    stations_hash: String,
    selection: CSelectionRecord,
}

/// Sidecar written next to synthetic station files.
#[derive(Serialize)]
struct TruthRecord<'a> {
    truth: &'a SyntheticTruth,
    seed: u64,
    exact_displacements_mm: &'a [[f64; 3]],
}

fn load_inputs(config: &Path, stations: &Path, o: &Overrides) -> Result<(ScenarioConfig, StationSet)> {
    let cfg = o.apply(ScenarioConfig::load(config)?)?;
    let st = io::load_stations(stations, StationMode::Measured)?;
    Ok((cfg, st))
}

fn stations_hash(st: &StationSet) -> Result<String> {
    Ok(sha256_hex(io::stations_csv(st)?.as_bytes()))
}

/// Global `C` from the cache file when given, else selected afresh.
fn resolve_c(
    cfg: &ScenarioConfig,
    st: &StationSet,
    c_file: Option<&Path>,
    cache: &faultpost::posterior::SpectraCache,
) -> Result<CSelectionRecord> {
    if let Some(path) = c_file {
        let rec: CCache = io::read_json(path)?;
        if rec.config_hash != cfg.hash() || rec.stations_hash != stations_hash(st)? {
            return Err(Error::Config(format!(
                "{}: cached C was computed for different inputs",
                path.display()
            )));
        }
        return Ok(rec.selection);
    }
    Ok(pipeline::select_c(cfg, st, cache)?.0)
}

fn print_summary(map: &faultpost::posterior::MapEstimate, stds: [f64; 3]) {
    let m = map.cell;
    println!("map       a={:.4} b={:.4} d={:.3}", m.a, m.b, m.d);
    println!("std       a={:.3e} b={:.3e} d={:.3e}", stds[0], stds[1], stds[2]);
}

fn execute(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        faultpost::exec::init_threads(n);
    }
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
    match cli.command {
        Command::Synth {
            truth,
            template,
            seed,
            out,
            truth_out,
        } => {
            let t = SyntheticTruth::load(&truth)?;
            let tpl = io::load_stations(&template, StationMode::Template)?;
            let res = scenario::synth(&t, &tpl, seed)?;
            io::write_stations(&out, &res.stations)?;
            let side = truth_out.unwrap_or_else(|| out.with_extension("truth.json"));
            io::write_json(
                &side,
                &TruthRecord {
                    truth: &t,
                    seed,
                    exact_displacements_mm: &res.exact,
                },
            )?;
            log::info!("wrote {} and {}", out.display(), side.display());
        }
        Command::SelectC { inputs, out } => {
            let (cfg, st) = load_inputs(&inputs.config, &inputs.stations, &inputs.overrides)?;
            let (_, _, cache) = pipeline::prepare(&cfg, &st, exec)?;
            let (selection, _) = pipeline::select_c(&cfg, &st, &cache)?;
            io::write_json(
                &out,
                &CCache {
                    config_hash: cfg.hash(),
                    stations_hash: stations_hash(&st)?,
                    selection,
                },
            )?;
            println!("global_c  {}", selection.global_c);
        }
        Command::Sweep { inputs, c_file, out } => {
            let (cfg, st) = load_inputs(&inputs.config, &inputs.stations, &inputs.overrides)?;
            let (_, _, cache) = pipeline::prepare(&cfg, &st, exec)?;
            let sel = resolve_c(&cfg, &st, c_file.as_deref(), &cache)?;
            let post = cache.posterior(sel.global_c, cfg.tau)?;
            io::write_posterior(&out, &post)?;
            println!("global_c  {}", sel.global_c);
            print_summary(&post.map(), post.marginals().stds());
        }
        Command::Marginals { posterior, out_dir } => {
            let post = io::read_posterior(&posterior)?;
            let marginals = post.marginals();
            std::fs::create_dir_all(&out_dir)?;
            pipeline::write_marginals(&out_dir, &marginals)?;
            let map = post.map();
            io::write_json(&out_dir.join("summary.json"), &Summary::new(&map, &marginals))?;
            print_summary(&map, marginals.stds());
        }
        Command::SlipStats {
            inputs,
            c_file,
            geometry,
            posterior,
            out,
        } => {
            let (cfg, st) = load_inputs(&inputs.config, &inputs.stations, &inputs.overrides)?;
            let m = match (geometry, posterior) {
                (Some(m), _) => m,
                (None, Some(p)) => io::read_posterior(&p)?.map().cell,
                (None, None) => return Err(Error::Config("give --geometry or --posterior".into())),
            };
            let (grid, ops, cache) = pipeline::prepare(&cfg, &st, exec)?;
            let c = match (cfg.c_override, c_file.is_some()) {
                (Some(c), false) => c,
                _ => resolve_c(&cfg, &st, c_file.as_deref(), &cache)?.global_c,
            };
            let slip = pipeline::slip_at(&cfg, &st, &grid, &ops, &m, c)?;
            io::write_slip(&out, &grid, &slip)?;
            println!("global_c  {c}");
        }
        Command::Run {
            inputs,
            manifest,
            out_dir,
        } => {
            let (cfg, st) = match manifest {
                Some(path) => {
                    let m: Manifest = io::read_json(&path)?;
                    pipeline::inputs_from_manifest(&m)?
                }
                None => load_inputs(
                    inputs.config.as_deref().expect("required by clap"),
                    inputs.stations.as_deref().expect("required by clap"),
                    &inputs.overrides,
                )?,
            };
            let out = pipeline::run_pipeline(&cfg, &st, exec)?;
            pipeline::write_bundle(&out_dir, &out)?;
            println!("global_c  {}", out.selection.global_c);
            print_summary(&out.map, out.marginals.stds());
            log::info!("bundle in {} ({})", out_dir.display(), files::MANIFEST);
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct Summary {
    map: GeometryParam,
    map_index: [usize; 3],
    mean: [f64; 3],
    std: [f64; 3],
}

impl Summary {
    fn new(map: &faultpost::posterior::MapEstimate, m: &faultpost::posterior::Marginals) -> Self {
        Summary {
            map: map.cell,
            map_index: map.index,
            mean: m.means(),
            std: m.stds(),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numerical => 4,
            })
        }
    }
}
