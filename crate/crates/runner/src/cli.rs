//! `qxe` command line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use qxe::graphs::{build_periodic_lattice, build_ring, build_scale_free_capped, degree_histogram, Graph};
use qxe::io::{fmt_f64, write_atomic, CsvTable};
use qxe::operators::{WalkOperator, DENSE_GUARD};
use qxe::qdyn::{localized_state, uniform_state};
use qxe::series::{SeriesKind, SeriesMeta, VertexSeries};
use qxe::spectral::{eigendecompose, eigenphase_spacing_density, limiting_distribution, offdiagonal_signal, DEFAULT_DEGENERACY_TOL};
use qxe::xstats::{ee_detect_with_times, EEReport};

use crate::config::{Coin, ExperimentConfig, Initial, WalkSpec};
use crate::error::{Result, RunnerError};
use crate::experiment::run_experiment;
use crate::presets::{run_preset, PresetContext, PRESET_NAMES};
use crate::seeds::derive_seed;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "QXE_OUT";

#[derive(Debug, Parser)]
#[command(name = "qxe", version, about = "Quantum walk extreme-event experiments")]
pub struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; falls back to the config, then $QXE_OUT, then `out`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a graph and write its edge list.
    Graph(GraphArgs),
    /// Run the quantum walk described by --config.
    RunQuantum,
    /// Run the classical walk described by --config.
    RunClassical,
    /// Extreme events of a stored series.
    Analyze(AnalyzeArgs),
    /// Eigenphases, spacing density and limiting distribution.
    Spectral(SpectralArgs),
    /// Run a named reproduction pipeline.
    Preset {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(PRESET_NAMES))]
        name: String,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Family {
    Ring,
    Lattice,
    ScaleFree,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    /// Graph family; without it the graph section of --config is used.
    #[arg(long, value_enum)]
    pub family: Option<Family>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Lattice side lengths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub sides: Vec<usize>,
    #[arg(long, default_value_t = 2.3)]
    pub exponent: f64,
    #[arg(long, default_value_t = 2)]
    pub min_degree: usize,
    #[arg(long)]
    pub max_degree: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Series CSV (`t,v<i>,...`), with its `.meta.json` sidecar if present.
    #[arg(long)]
    pub series: PathBuf,
    /// Threshold multipliers; repeat for several.
    #[arg(long = "m", required = true)]
    pub m: Vec<f64>,
    /// Edge list supplying degrees when the series has no sidecar.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Leading steps to discard when the series has no sidecar.
    #[arg(long, default_value_t = 0)]
    pub transient: usize,
}

#[derive(Debug, Args)]
pub struct SpectralArgs {
    #[arg(long, value_enum)]
    pub coin: Option<CoinArg>,
    #[arg(long, default_value_t = 64)]
    pub bins: usize,
    /// Largest `t` of the off-diagonal signal.
    #[arg(long, default_value_t = 100)]
    pub t_max: i64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum CoinArg {
    Fourier,
    Grover,
}

/// Parses `std::env::args`, runs, and returns the process exit status.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn out_dir(cli: &Cli, cfg: Option<&ExperimentConfig>) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.and_then(|c| c.out.clone()))
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli.config.as_ref().ok_or_else(|| RunnerError::Invalid(vec!["--config: required by this command".into()]))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.validate()?;
    }
    Ok(cfg)
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Graph(args) => graph(cli, args),
        Command::RunQuantum => run_walk(cli, true),
        Command::RunClassical => run_walk(cli, false),
        Command::Analyze(args) => analyze(cli, args),
        Command::Spectral(args) => spectral(cli, args),
        Command::Preset { name } => {
            let out = out_dir(cli, None);
            let seed = cli.seed.unwrap_or(crate::config::DEFAULT_MASTER_SEED);
            let summary = run_preset(name, &PresetContext::new(&out, seed))?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}

fn graph(cli: &Cli, args: &GraphArgs) -> Result<()> {
    let (g, out) = match args.family {
        Some(family) => {
            let seed = derive_seed(cli.seed.unwrap_or(crate::config::DEFAULT_MASTER_SEED), "graph");
            let g = match family {
                Family::Ring => build_ring(args.n.ok_or_else(|| missing("--n"))?)?,
                Family::Lattice => build_periodic_lattice(&args.sides)?,
                Family::ScaleFree => {
                    let n = args.n.ok_or_else(|| missing("--n"))?;
                    let cap = args.max_degree.unwrap_or((n as f64).sqrt().floor() as usize);
                    build_scale_free_capped(n, args.exponent, args.min_degree, cap, seed)?
                }
            };
            (g, out_dir(cli, None))
        }
        None => {
            let cfg = load_config(cli)?;
            (cfg.build_graph()?, out_dir(cli, Some(&cfg)))
        }
    };
    let mut text = Vec::new();
    g.write_edge_list(&mut text)?;
    write_atomic(&out.join("graph.edges"), &text)?;
    let mut t = CsvTable::new(["k", "count"]);
    for (k, c) in degree_histogram(&g) {
        t.push(vec![k.to_string(), c.to_string()]);
    }
    t.write(&out.join("degrees.csv"))?;
    println!("vertices {} edges {} max degree {} fingerprint {}", g.vertex_count(), g.edge_count(), g.max_degree(), g.fingerprint());
    Ok(())
}

fn missing(flag: &str) -> RunnerError {
    RunnerError::Invalid(vec![format!("{flag}: required for this graph family")])
}

fn run_walk(cli: &Cli, quantum: bool) -> Result<()> {
    let cfg = load_config(cli)?;
    match (&cfg.walk, quantum) {
        (WalkSpec::Quantum { .. }, true) | (WalkSpec::Classical { .. }, false) => {}
        (WalkSpec::Quantum { .. }, false) => return Err(RunnerError::Invalid(vec!["walk.kind: config describes a quantum walk".into()])),
        (WalkSpec::Classical { .. }, true) => return Err(RunnerError::Invalid(vec!["walk.kind: config describes a classical walk".into()])),
    }
    let out = out_dir(cli, Some(&cfg));
    let outcome = run_experiment(&cfg, &out)?;
    println!(
        "{}: {} vertices, mean {} rms sigma {}",
        cfg.name,
        outcome.graph.vertex_count(),
        fmt_f64(outcome.moments.average_mean()),
        fmt_f64(outcome.moments.rms_sigma())
    );
    for r in &outcome.reports {
        println!("  m = {}: mean F {}", r.m, fmt_f64(r.mean_probability()));
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn load_series(args: &AnalyzeArgs) -> Result<VertexSeries> {
    if VertexSeries::sidecar_path(&args.series).exists() {
        return Ok(VertexSeries::load(&args.series)?);
    }
    let table = CsvTable::read(&args.series)?;
    let width = table.header.len().saturating_sub(1);
    let degrees = match &args.graph {
        Some(p) => {
            let g = Graph::load(p)?;
            table.header[1..]
                .iter()
                .map(|h| {
                    let v: usize = h.trim_start_matches('v').parse().unwrap_or(usize::MAX);
                    if v < g.vertex_count() {
                        Ok(g.degree(v))
                    } else {
                        Err(RunnerError::Invalid(vec![format!("--graph: column {h} is not a vertex of the graph")]))
                    }
                })
                .collect::<Result<Vec<_>>>()?
        }
        None => vec![0; width],
    };
    Ok(VertexSeries::from_csv(&table, SeriesKind::QuantumProbability, degrees, args.transient, SeriesMeta::default())?)
}

fn analyze(cli: &Cli, args: &AnalyzeArgs) -> Result<()> {
    let series = load_series(args)?;
    let (reports, _) = ee_detect_with_times(&series, &args.m)?;
    let mut t = CsvTable::new(["v", "k", "q", "count", "F", "m"]);
    for r in &reports {
        t.rows.extend(r.to_csv().rows);
    }
    let out = out_dir(cli, None);
    t.write(&out.join("ee.csv"))?;
    for r in &reports {
        println!("m = {}: mean F {} over {} samples", r.m, fmt_f64(EEReport::mean_probability(r)), r.samples);
    }
    println!("wrote {}", out.join("ee.csv").display());
    Ok(())
}

fn spectral(cli: &Cli, args: &SpectralArgs) -> Result<()> {
    let cfg = load_config(cli)?;
    let g = cfg.build_graph()?;
    let (coin, start, initial) = match cfg.walk {
        WalkSpec::Quantum { coin, start, initial, .. } => (coin, start, initial),
        WalkSpec::Classical { start, .. } => (Coin::Fourier, start, Initial::Localized),
    };
    let coin = match args.coin {
        Some(CoinArg::Fourier) => Coin::Fourier,
        Some(CoinArg::Grover) => Coin::Grover,
        None => coin,
    };
    let op = WalkOperator::new(g.clone(), coin.spec())?;
    let sd = eigendecompose(&op.dense_unitary(Some(DENSE_GUARD))?, DEFAULT_DEGENERACY_TOL)?;
    let out = out_dir(cli, Some(&cfg));
    write_spectral(&out, &g, &sd, start, initial, args)?;
    println!(
        "dimension {} classes {} degenerate {} smallest class gap {}",
        sd.dimension(),
        sd.classes.len(),
        sd.is_degenerate(),
        fmt_f64(sd.min_class_gap())
    );
    println!("wrote {}", out.display());
    Ok(())
}

fn write_spectral(out: &Path, g: &Graph, sd: &qxe::spectral::SpectralData, start: usize, initial: Initial, args: &SpectralArgs) -> Result<()> {
    sd.to_csv().write(&out.join("eigenphases.csv"))?;
    let h = eigenphase_spacing_density(sd, args.bins)?;
    let mut t = CsvTable::new(["omega", "count", "density"]);
    for (b, (&c, &d)) in h.counts.iter().zip(&h.density).enumerate() {
        t.push(vec![fmt_f64(h.bin_center(b)), c.to_string(), fmt_f64(d)]);
    }
    t.write(&out.join("spacing.csv"))?;
    let x = match initial {
        Initial::Localized => localized_state(g, start)?,
        Initial::Uniform => uniform_state(g),
    };
    let lim = limiting_distribution(sd, &x, g)?;
    let mut t = CsvTable::new(["v", "k", "limit"]);
    for (v, l) in lim.iter().enumerate() {
        t.push(vec![v.to_string(), g.degree(v).to_string(), fmt_f64(*l)]);
    }
    t.write(&out.join("limit.csv"))?;
    let mut t = CsvTable::new(["t", "re", "im"]);
    for s in 0..=args.t_max {
        let c = offdiagonal_signal(sd, s);
        t.push(vec![s.to_string(), fmt_f64(c.re), fmt_f64(c.im)]);
    }
    t.write(&out.join("signal.csv"))?;
    Ok(())
}
