//! Named pipelines that regenerate each table and figure of the study.
//!
//! Every preset writes one subdirectory per run (each with its own
//! manifest), a few top-level CSVs, `summary.json` with the measured
//! quantities and `preset.json` listing substitutions and run hashes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qxe::cdyn::binomial_exceedance;
use qxe::io::{fmt_f64, write_atomic, CsvTable};
use qxe::xstats::{
    batch_mean_se, degree_class_means, fit_exponential_decay, flux_fluctuation_fit, null_band, Collapse, DecayFit,
    DegreePoint, DegreeProfile, EEReport, FluxFit, RecurrenceStats,
};

use crate::config::{AnalysisSpec, Coin, CorrelationSpec, ExperimentConfig, GraphSpec, Initial, Observable, RunSpec, WalkSpec};
use crate::error::{Result, RunnerError};
use crate::experiment::{run_experiment_with, RunOutcome};
use crate::manifest::OutputDir;
use crate::seeds::derive_seed;

pub const PRESET_NAMES: [&str; 6] = ["table1", "table2", "fig2", "fig3", "fig45", "si-recurrence"];

pub const HORIZON: usize = 100_000;
pub const TRANSIENT: usize = 2000;
pub const LATTICE_SIDES: [&[usize]; 3] = [&[729], &[27, 27], &[9, 9, 9]];
pub const SF_VERTICES: usize = 1000;
/// Largest degree allowed in the thousand-vertex scale-free graph.
pub const SF_MAX_DEGREE: usize = 71;
pub const CLASSICAL_WALKERS: usize = 100;
pub const BATCHES: usize = 20;
pub const RECURRENCE_M: f64 = 3.0;
/// Degree of the vertex whose recurrence histogram is tested.
pub const RECURRENCE_DEGREE: usize = 11;
pub const DECAY_STRIDE: usize = 2;
pub const DECAY_FLOOR: f64 = 0.05;
pub const CORRELATION_LAGS: usize = 200;

pub struct PresetContext {
    pub out: PathBuf,
    pub seed: u64,
}

impl PresetContext {
    pub fn new(out: impl Into<PathBuf>, seed: u64) -> Self {
        PresetContext { out: out.into(), seed }
    }

    fn run(&self, cfg: &ExperimentConfig, dir: &str, substitutions: &[String]) -> Result<RunOutcome> {
        run_experiment_with(cfg, &self.out.join(dir), substitutions)
    }
}

#[derive(Serialize)]
struct PresetRecord<'a> {
    preset: &'a str,
    master_seed: u64,
    substitutions: Vec<String>,
    /// Run directory to content hash.
    runs: BTreeMap<String, String>,
    files: BTreeMap<String, String>,
}

/// Top-level bookkeeping for one preset invocation.
struct Record {
    dir: OutputDir,
    runs: BTreeMap<String, String>,
    substitutions: Vec<String>,
}

impl Record {
    fn new(ctx: &PresetContext, substitutions: Vec<String>) -> Result<Self> {
        Ok(Record { dir: OutputDir::new(&ctx.out)?, runs: BTreeMap::new(), substitutions })
    }

    fn add(&mut self, dir: &str, outcome: &RunOutcome) {
        self.runs.insert(dir.to_string(), outcome.manifest.content_hash());
    }

    fn finish<T: Serialize>(mut self, preset: &str, ctx: &PresetContext, summary: &T) -> Result<()> {
        self.dir.bytes("summary.json", serde_json::to_string_pretty(summary)?.as_bytes())?;
        let record = PresetRecord {
            preset,
            master_seed: ctx.seed,
            substitutions: self.substitutions,
            runs: self.runs,
            files: self.dir.into_files(),
        };
        write_atomic(&ctx.out.join("preset.json"), serde_json::to_string_pretty(&record)?.as_bytes())?;
        Ok(())
    }
}

fn run_spec() -> RunSpec {
    RunSpec { horizon: HORIZON, transient: TRANSIENT }
}

fn common_substitutions() -> Vec<String> {
    vec![
        format!("run.horizon: {HORIZON} steps"),
        format!("run.transient: first {TRANSIENT} steps discarded"),
        "sigma summary: root mean square of per-vertex standard deviations".into(),
    ]
}

fn lattice_label(sides: &[usize]) -> String {
    format!("{}d", sides.len())
}

fn quantum(coin: Coin, phase_noise: bool) -> WalkSpec {
    WalkSpec::Quantum { coin, start: 0, initial: Initial::Localized, phase_noise }
}

fn classical(walkers: usize) -> WalkSpec {
    WalkSpec::Classical { walkers, start: 0 }
}

fn config(name: &str, seed: u64, graph: GraphSpec, walk: WalkSpec, analysis: AnalysisSpec) -> ExperimentConfig {
    ExperimentConfig { name: name.to_string(), seed, out: None, graph, walk, run: run_spec(), analysis }
}

// ---------------------------------------------------------------------------
// Lattices

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LatticeMoments {
    pub lattice: String,
    pub classical_mean: f64,
    pub classical_mean_se: f64,
    pub classical_sigma: f64,
    pub classical_sigma_se: f64,
    pub quantum_mean: f64,
    pub quantum_sigma: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Table1Result {
    pub rows: Vec<LatticeMoments>,
    /// Single-walker occupation of a vertex of a regular graph.
    pub bernoulli_mean: f64,
    pub bernoulli_sigma: f64,
}

pub fn table1(ctx: &PresetContext) -> Result<Table1Result> {
    let mut rec = Record::new(ctx, {
        let mut s = common_substitutions();
        s.push(format!("classical standard errors: batch means over {BATCHES} consecutive blocks"));
        s
    })?;
    let mut rows = Vec::new();
    let mut table = CsvTable::new(["lattice", "walk", "mean", "mean_se", "sigma", "sigma_se"]);
    for sides in LATTICE_SIDES {
        let label = lattice_label(sides);
        let graph = GraphSpec::Lattice { sides: sides.to_vec() };
        let analysis = AnalysisSpec { m: vec![RECURRENCE_M], batches: BATCHES, ..AnalysisSpec::default() };
        let cname = format!("table1-classical-{label}");
        let c = ctx.run(&config(&cname, ctx.seed, graph.clone(), classical(1), analysis), &format!("classical_{label}"), &[])?;
        rec.add(&format!("classical_{label}"), &c);
        let qname = format!("table1-quantum-{label}");
        let q = ctx.run(
            &config(&qname, ctx.seed, graph, quantum(Coin::Fourier, false), AnalysisSpec { m: vec![RECURRENCE_M], ..AnalysisSpec::default() }),
            &format!("quantum_{label}"),
            &[],
        )?;
        rec.add(&format!("quantum_{label}"), &q);
        rec.dir.csv(&format!("moments_classical_{label}.csv"), &c.moments.to_csv())?;
        rec.dir.csv(&format!("moments_quantum_{label}.csv"), &q.moments.to_csv())?;

        let (_, mean_se) = batch_mean_se(&c.batches.iter().map(|b| b.mean).collect::<Vec<_>>());
        let (_, sigma_se) = batch_mean_se(&c.batches.iter().map(|b| b.sigma).collect::<Vec<_>>());
        let row = LatticeMoments {
            lattice: label.clone(),
            classical_mean: c.moments.average_mean(),
            classical_mean_se: mean_se,
            classical_sigma: c.moments.rms_sigma(),
            classical_sigma_se: sigma_se,
            quantum_mean: q.moments.average_mean(),
            quantum_sigma: q.moments.rms_sigma(),
        };
        table.push(vec![label.clone(), "classical".into(), fmt_f64(row.classical_mean), fmt_f64(mean_se), fmt_f64(row.classical_sigma), fmt_f64(sigma_se)]);
        table.push(vec![label, "quantum".into(), fmt_f64(row.quantum_mean), "nan".into(), fmt_f64(row.quantum_sigma), "nan".into()]);
        rows.push(row);
    }
    rec.dir.csv("table1.csv", &table)?;
    let p = 1.0 / 729.0;
    let result = Table1Result { rows, bernoulli_mean: p, bernoulli_sigma: (p * (1.0 - p)).sqrt() };
    rec.finish("table1", ctx, &result)?;
    Ok(result)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LatticeExtremes {
    pub lattice: String,
    /// Vertex-averaged exceedance probability of the walker counts.
    pub classical_f: f64,
    pub classical_se: f64,
    /// Vertex average of `P(w > q_i)` for `w ~ Binomial(W, 1/N)` at the
    /// empirical thresholds `q_i`.
    pub binomial_f: f64,
    pub quantum_f: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Table2Result {
    pub m: f64,
    pub walkers: usize,
    pub rows: Vec<LatticeExtremes>,
    /// `P(w >= 1)` for `w ~ Binomial(W, 1/N)`.
    pub integer_tail: f64,
}

pub fn table2(ctx: &PresetContext) -> Result<Table2Result> {
    let mut rec = Record::new(ctx, {
        let mut s = common_substitutions();
        s.push(format!("classical standard errors: batch means over {BATCHES} consecutive blocks"));
        s.push("classical thresholds: per-vertex empirical mean + m sigma with a strict exceedance".into());
        s
    })?;
    let m = RECURRENCE_M;
    let p = 1.0 / 729.0;
    let mut rows = Vec::new();
    let mut table = CsvTable::new(["lattice", "walk", "F", "se", "binomial"]);
    for sides in LATTICE_SIDES {
        let label = lattice_label(sides);
        let graph = GraphSpec::Lattice { sides: sides.to_vec() };
        let cname = format!("table2-classical-{label}");
        let analysis = AnalysisSpec { m: vec![m], batches: BATCHES, ..AnalysisSpec::default() };
        let c = ctx.run(&config(&cname, ctx.seed, graph.clone(), classical(CLASSICAL_WALKERS), analysis), &format!("classical_{label}"), &[])?;
        rec.add(&format!("classical_{label}"), &c);
        let qname = format!("table2-quantum-{label}");
        let q = ctx.run(
            &config(&qname, ctx.seed, graph, quantum(Coin::Fourier, false), AnalysisSpec { m: vec![m], ..AnalysisSpec::default() }),
            &format!("quantum_{label}"),
            &[],
        )?;
        rec.add(&format!("quantum_{label}"), &q);
        rec.dir.csv(&format!("ee_lattice_{label}.csv"), &q.reports[0].to_csv())?;
        rec.dir.csv(&format!("ee_lattice_{label}_crw.csv"), &c.reports[0].to_csv())?;

        let report = &c.reports[0];
        let oracle = report
            .entries
            .iter()
            .map(|e| binomial_exceedance(CLASSICAL_WALKERS, p, e.threshold))
            .collect::<qxe::Result<Vec<f64>>>()?;
        let (_, se) = batch_mean_se(&c.batches.iter().map(|b| b.f[0]).collect::<Vec<_>>());
        let row = LatticeExtremes {
            lattice: label.clone(),
            classical_f: report.mean_probability(),
            classical_se: se,
            binomial_f: oracle.iter().sum::<f64>() / oracle.len() as f64,
            quantum_f: q.reports[0].mean_probability(),
        };
        table.push(vec![label.clone(), "classical".into(), fmt_f64(row.classical_f), fmt_f64(se), fmt_f64(row.binomial_f)]);
        table.push(vec![label, "quantum".into(), fmt_f64(row.quantum_f), "nan".into(), "nan".into()]);
        rows.push(row);
    }
    rec.dir.csv("table2.csv", &table)?;
    let result = Table2Result { m, walkers: CLASSICAL_WALKERS, rows, integer_tail: binomial_exceedance(CLASSICAL_WALKERS, p, 0.0)? };
    rec.finish("table2", ctx, &result)?;
    Ok(result)
}

// ---------------------------------------------------------------------------
// Scale-free graph

/// Kinds of walk run on the thousand-vertex scale-free graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScaleFreeWalk {
    Fourier,
    Grover,
    FourierPhaseNoise,
    Classical,
}

impl ScaleFreeWalk {
    pub fn dir(self) -> &'static str {
        match self {
            ScaleFreeWalk::Fourier => "sf_fourier",
            ScaleFreeWalk::Grover => "sf_grover",
            ScaleFreeWalk::FourierPhaseNoise => "sf_fourier_noise",
            ScaleFreeWalk::Classical => "sf_crw",
        }
    }
}

pub fn scale_free_graph(seed: u64) -> GraphSpec {
    GraphSpec::ScaleFree {
        n: SF_VERTICES,
        exponent: 2.3,
        min_degree: 2,
        max_degree: Some(SF_MAX_DEGREE),
        seed: Some(derive_seed(seed, "sf-1000")),
    }
}

pub fn scale_free_config(walk: ScaleFreeWalk, seed: u64) -> ExperimentConfig {
    let w = match walk {
        ScaleFreeWalk::Fourier => quantum(Coin::Fourier, false),
        ScaleFreeWalk::Grover => quantum(Coin::Grover, false),
        ScaleFreeWalk::FourierPhaseNoise => quantum(Coin::Fourier, true),
        ScaleFreeWalk::Classical => classical(CLASSICAL_WALKERS),
    };
    let analysis = AnalysisSpec { profiles: true, recurrence_m: Some(RECURRENCE_M), ..AnalysisSpec::default() };
    config(walk.dir(), seed, scale_free_graph(seed), w, analysis)
}

fn scale_free_substitutions() -> Vec<String> {
    let mut s = common_substitutions();
    s.push(format!(
        "scale-free graph: configuration model, n = {SF_VERTICES}, exponent 2.3, degrees in [2, {SF_MAX_DEGREE}], giant component"
    ));
    s
}

/// One run on the shared scale-free graph, written to its own directory.
pub fn scale_free_run(ctx: &PresetContext, walk: ScaleFreeWalk) -> Result<RunOutcome> {
    ctx.run(&scale_free_config(walk, ctx.seed), walk.dir(), &scale_free_substitutions())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FluxSummary {
    pub walk: String,
    pub two_e: usize,
    pub fit: FluxFit,
    /// `1 / sqrt(2E)`.
    pub predicted_slope: f64,
    pub classes: Vec<DegreePoint>,
    /// Largest `|class mean - k/2E| / (k/2E)` over classes of at least
    /// five vertices.
    pub worst_relative_deviation: f64,
    /// Largest `|class mean - k/2E|` in units of the predicted vertex
    /// fluctuation `sqrt(k)/2E`.
    pub worst_sigma_deviation: f64,
}

pub fn flux_summary(outcome: &RunOutcome, walk: &str) -> Result<FluxSummary> {
    let two_e = outcome.graph.arc_count();
    let te = two_e as f64;
    let fit = flux_fluctuation_fit(&outcome.moments, true)?;
    let classes = degree_class_means(&outcome.moments.degrees, &outcome.moments.mean);
    let worst_relative_deviation = classes
        .iter()
        .filter(|c| c.vertices >= 5)
        .map(|c| (c.mean - c.degree as f64 / te).abs() / (c.degree as f64 / te))
        .fold(0.0, f64::max);
    let worst_sigma_deviation = classes
        .iter()
        .map(|c| (c.mean - c.degree as f64 / te).abs() / ((c.degree as f64).sqrt() / te))
        .fold(0.0, f64::max);
    Ok(FluxSummary { walk: walk.to_string(), two_e, fit, predicted_slope: 1.0 / te.sqrt(), classes, worst_relative_deviation, worst_sigma_deviation })
}

fn classes_csv(s: &FluxSummary) -> CsvTable {
    let mut t = CsvTable::new(["k", "vertices", "mean", "sem", "predicted"]);
    for c in &s.classes {
        t.push(vec![
            c.degree.to_string(),
            c.vertices.to_string(),
            fmt_f64(c.mean),
            fmt_f64(c.sem),
            fmt_f64(c.degree as f64 / s.two_e as f64),
        ]);
    }
    t
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Fig2Result {
    pub fourier: FluxSummary,
    pub grover: FluxSummary,
}

pub fn fig2_from(fourier: &RunOutcome, grover: &RunOutcome) -> Result<Fig2Result> {
    Ok(Fig2Result { fourier: flux_summary(fourier, "fourier")?, grover: flux_summary(grover, "grover")? })
}

pub fn fig2(ctx: &PresetContext) -> Result<Fig2Result> {
    let mut rec = Record::new(ctx, scale_free_substitutions())?;
    let f = scale_free_run(ctx, ScaleFreeWalk::Fourier)?;
    rec.add(ScaleFreeWalk::Fourier.dir(), &f);
    let g = scale_free_run(ctx, ScaleFreeWalk::Grover)?;
    rec.add(ScaleFreeWalk::Grover.dir(), &g);
    let result = fig2_from(&f, &g)?;
    let mut flux = CsvTable::new(["walk", "two_e", "slope", "intercept", "r_squared", "relative_residual", "predicted_slope"]);
    for s in [&result.fourier, &result.grover] {
        flux.push(vec![
            s.walk.clone(),
            s.two_e.to_string(),
            fmt_f64(s.fit.slope),
            fmt_f64(s.fit.intercept),
            fmt_f64(s.fit.r_squared),
            fmt_f64(s.fit.relative_residual),
            fmt_f64(s.predicted_slope),
        ]);
        rec.dir.csv(&format!("classes_{}.csv", s.walk), &classes_csv(s))?;
    }
    rec.dir.csv("flux.csv", &flux)?;
    rec.dir.csv("moments_fourier.csv", &f.moments.to_csv())?;
    rec.dir.csv("moments_grover.csv", &g.moments.to_csv())?;
    rec.dir.csv("ee_grover.csv", &ee_csv(&g.reports))?;
    rec.dir.csv("profiles_grover.csv", &qxe::xstats::profiles_to_csv(&g.profiles))?;
    rec.finish("fig2", ctx, &result)?;
    Ok(result)
}

fn ee_csv(reports: &[EEReport]) -> CsvTable {
    let mut t = CsvTable::new(["v", "k", "q", "count", "F", "m"]);
    for r in reports {
        t.rows.extend(r.to_csv().rows);
    }
    t
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Fig3Result {
    pub profiles: Vec<DegreeProfile>,
    pub collapse: Option<Collapse>,
    /// Exponent fitted to the classical `m = 3` profile.
    pub classical: Option<DegreeProfile>,
}

impl Fig3Result {
    pub fn profile(&self, m: f64) -> Option<&DegreeProfile> {
        self.profiles.iter().find(|p| p.m == m)
    }
}

pub fn fig3_from(fourier: &RunOutcome, classical: Option<&RunOutcome>) -> Fig3Result {
    Fig3Result {
        profiles: fourier.profiles.clone(),
        collapse: fourier.collapse.clone(),
        classical: classical.and_then(|c| c.profiles.iter().find(|p| p.m == RECURRENCE_M).cloned()),
    }
}

pub fn fig3(ctx: &PresetContext) -> Result<Fig3Result> {
    let mut subs = scale_free_substitutions();
    subs.push(format!("classical comparison: {CLASSICAL_WALKERS} walkers"));
    let mut rec = Record::new(ctx, subs)?;
    let f = scale_free_run(ctx, ScaleFreeWalk::Fourier)?;
    rec.add(ScaleFreeWalk::Fourier.dir(), &f);
    let c = scale_free_run(ctx, ScaleFreeWalk::Classical)?;
    rec.add(ScaleFreeWalk::Classical.dir(), &c);
    let result = fig3_from(&f, Some(&c));
    rec.dir.csv("profiles.csv", &qxe::xstats::profiles_to_csv(&result.profiles))?;
    rec.dir.csv("profiles_crw.csv", &qxe::xstats::profiles_to_csv(&c.profiles))?;
    let mut fits = CsvTable::new(["walk", "m", "gamma", "intercept", "r_squared"]);
    for (walk, p) in result.profiles.iter().map(|p| ("quantum", p)).chain(result.classical.iter().map(|p| ("classical", p))) {
        fits.push(vec![walk.into(), fmt_f64(p.m), fmt_f64(p.gamma), fmt_f64(p.intercept), fmt_f64(p.r_squared)]);
    }
    rec.dir.csv("fits.csv", &fits)?;
    if let Some(col) = &result.collapse {
        let mut t = CsvTable::new(["k", "m", "rescaled"]);
        for (k, vals) in &col.rescaled {
            for (p, v) in result.profiles.iter().zip(vals) {
                t.push(vec![k.to_string(), fmt_f64(p.m), fmt_f64(*v)]);
            }
        }
        rec.dir.csv("collapse.csv", &t)?;
    }
    rec.finish("fig3", ctx, &result)?;
    Ok(result)
}

// ---------------------------------------------------------------------------
// Correlations

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphCorrelations {
    pub graph: String,
    pub vertex: usize,
    pub neighbour: usize,
    pub samples: usize,
    pub auto: Vec<f64>,
    pub phase_cross: Vec<f64>,
    /// Mean `|C_00(tau)|` over the second half of the lag window.
    pub auto_tail: f64,
    pub phase_cross_max: f64,
    pub null_band: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Fig45Result {
    pub scale_free: GraphCorrelations,
    pub ring: GraphCorrelations,
    /// Decay fit of the scale-free autocorrelation, `None` if it failed.
    pub decay: Option<DecayFit>,
    pub decay_error: Option<String>,
}

fn correlation_run(ctx: &PresetContext, name: &str, graph: GraphSpec, rec: &mut Record) -> Result<GraphCorrelations> {
    let probe = config(name, ctx.seed, graph.clone(), quantum(Coin::Fourier, false), AnalysisSpec::default());
    let g = probe.build_graph()?;
    let (v, u) = (0, g.neighbors(0)[0]);
    let far = g.bfs_distances(0).iter().position(|d| *d == Some(2));
    let mut correlations = vec![
        CorrelationSpec { i: v, j: v, observable: Observable::Probability },
        CorrelationSpec { i: v, j: u, observable: Observable::Probability },
        CorrelationSpec { i: v, j: u, observable: Observable::Phase },
    ];
    if let Some(w) = far {
        correlations.push(CorrelationSpec { i: v, j: w, observable: Observable::Probability });
    }
    let analysis = AnalysisSpec { m: vec![RECURRENCE_M], correlations, tau_max: CORRELATION_LAGS, normalized: true, ..AnalysisSpec::default() };
    let out = ctx.run(&config(name, ctx.seed, graph, quantum(Coin::Fourier, false), analysis), name, &[])?;
    rec.add(name, &out);
    let auto = out.correlations[0].1.values.clone();
    let phase_cross = out.correlations[2].1.values.clone();
    let samples = out.correlations[0].1.samples;
    let tail = &auto[CORRELATION_LAGS / 2..];
    Ok(GraphCorrelations {
        graph: name.to_string(),
        vertex: v,
        neighbour: u,
        samples,
        auto_tail: tail.iter().map(|c| c.abs()).sum::<f64>() / tail.len() as f64,
        phase_cross_max: phase_cross.iter().map(|c| c.abs()).fold(0.0, f64::max),
        auto,
        phase_cross,
        null_band: null_band(samples),
    })
}

pub fn fig45(ctx: &PresetContext) -> Result<Fig45Result> {
    let mut subs = common_substitutions();
    subs.push("correlations: mean subtracted and normalised by both standard deviations".into());
    subs.push(format!("scale-free graph: n = 100, degrees in [2, 10], seed derived from label sf-100"));
    subs.push(format!("decay fit: every {DECAY_STRIDE}nd lag until C falls to {DECAY_FLOOR} C(0)"));
    let mut rec = Record::new(ctx, subs)?;
    let sf = GraphSpec::ScaleFree { n: 100, exponent: 2.3, min_degree: 2, max_degree: Some(10), seed: Some(derive_seed(ctx.seed, "sf-100")) };
    let scale_free = correlation_run(ctx, "sf100", sf, &mut rec)?;
    let ring = correlation_run(ctx, "ring100", GraphSpec::Ring { n: 100 }, &mut rec)?;
    let (decay, decay_error) = match fit_exponential_decay(&scale_free.auto, DECAY_STRIDE, DECAY_FLOOR) {
        Ok(d) => (Some(d), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let mut t = CsvTable::new(["graph", "series", "tau", "C"]);
    for gc in [&scale_free, &ring] {
        for (name, vals) in [("z_auto", &gc.auto), ("theta_cross", &gc.phase_cross)] {
            for (tau, c) in vals.iter().enumerate() {
                t.push(vec![gc.graph.clone(), name.into(), tau.to_string(), fmt_f64(*c)]);
            }
        }
    }
    rec.dir.csv("correlations.csv", &t)?;
    let result = Fig45Result { scale_free, ring, decay, decay_error };
    rec.finish("fig45", ctx, &result)?;
    Ok(result)
}

// ---------------------------------------------------------------------------
// Recurrence

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WalkRecurrence {
    pub walk: String,
    /// The tested vertex and its statistics.
    pub target: RecurrenceStats,
    /// Vertices with `F > 0.005` whose mean interval is off `1/F` by more
    /// than 20%, as `(vertex, F, mean interval)`.
    pub renewal_failures: Vec<(usize, f64, f64)>,
    pub renewal_checked: usize,
    /// Vertices with enough events whose geometric fit has `p > 0.01`.
    pub fits_passed: usize,
    pub fits_tested: usize,
}

pub fn recurrence_summary(outcome: &RunOutcome, walk: &str) -> Result<WalkRecurrence> {
    let samples = (HORIZON - TRANSIENT) as f64;
    let target = outcome
        .recurrence
        .iter()
        .filter(|s| s.sufficient)
        .min_by_key(|s| (s.degree.abs_diff(RECURRENCE_DEGREE), s.vertex))
        .cloned()
        .ok_or_else(|| RunnerError::Invalid(vec!["no vertex has enough extreme events".into()]))?;
    let mut renewal_failures = Vec::new();
    let mut renewal_checked = 0;
    for s in &outcome.recurrence {
        let f = s.exceedances as f64 / samples;
        if f > 0.005 {
            renewal_checked += 1;
            let mean = s.mean_interval.unwrap_or(f64::INFINITY);
            if (mean * f - 1.0).abs() > 0.2 {
                renewal_failures.push((s.vertex, f, mean));
            }
        }
    }
    let tested: Vec<_> = outcome.recurrence.iter().filter_map(|s| s.fit.as_ref()).collect();
    Ok(WalkRecurrence {
        walk: walk.to_string(),
        target,
        renewal_failures,
        renewal_checked,
        fits_passed: tested.iter().filter(|f| f.p_value > 0.01).count(),
        fits_tested: tested.len(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecurrenceResult {
    pub walks: Vec<WalkRecurrence>,
}

pub fn si_recurrence(ctx: &PresetContext) -> Result<RecurrenceResult> {
    let mut subs = scale_free_substitutions();
    subs.push(format!("extreme events for recurrence: m = {RECURRENCE_M}"));
    subs.push(format!("tested vertex: lowest-numbered vertex of degree {RECURRENCE_DEGREE} with enough events"));
    let mut rec = Record::new(ctx, subs)?;
    let mut walks = Vec::new();
    for (walk, label) in [
        (ScaleFreeWalk::Fourier, "fourier"),
        (ScaleFreeWalk::FourierPhaseNoise, "fourier_noise"),
        (ScaleFreeWalk::Grover, "grover"),
    ] {
        let out = scale_free_run(ctx, walk)?;
        rec.add(walk.dir(), &out);
        rec.dir.csv(&format!("recurrence_{label}.csv"), &qxe::xstats::recurrence_to_csv(&out.recurrence))?;
        let summary = recurrence_summary(&out, label)?;
        let mut h = CsvTable::new(["interval", "count"]);
        for (d, c) in &summary.target.histogram {
            h.push(vec![d.to_string(), c.to_string()]);
        }
        rec.dir.csv(&format!("intervals_{label}.csv"), &h)?;
        walks.push(summary);
    }
    let result = RecurrenceResult { walks };
    rec.finish("si-recurrence", ctx, &result)?;
    Ok(result)
}

/// Runs a preset by name and returns its summary as JSON.
pub fn run_preset(name: &str, ctx: &PresetContext) -> Result<serde_json::Value> {
    Ok(match name {
        "table1" => serde_json::to_value(table1(ctx)?)?,
        "table2" => serde_json::to_value(table2(ctx)?)?,
        "fig2" => serde_json::to_value(fig2(ctx)?)?,
        "fig3" => serde_json::to_value(fig3(ctx)?)?,
        "fig45" => serde_json::to_value(fig45(ctx)?)?,
        "si-recurrence" => serde_json::to_value(si_recurrence(ctx)?)?,
        other => return Err(RunnerError::UnknownPreset(other.to_string(), PRESET_NAMES.join(", "))),
    })
}

pub fn summary_path(out: &Path) -> PathBuf {
    out.join("summary.json")
}
