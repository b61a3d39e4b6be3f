//! One configured run: graph, walk, two streaming passes, analyses, files.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use qxe::cdyn::ClassicalEnsemble;
use qxe::graphs::Graph;
use qxe::io::{fmt_f64, CsvTable};
use qxe::operators::WalkOperator;
use qxe::qdyn::{localized_state, uniform_state, Evolution};
use qxe::series::{SeriesKind, SeriesMeta, SeriesObserver, SeriesRecorder, Tee, VertexSeries};
use qxe::xstats::{
    cross_correlation, degree_profile, profiles_to_csv, recurrence_from_times, recurrence_to_csv, scaling_collapse, Batched,
    Collapse, CorrelationProfile, DegreeProfile, EEReport, ExceedanceAccumulator, FitWeighting, MomentAccumulator,
    MomentTable, RecurrenceStats,
};

use crate::config::{CorrelationSpec, ExperimentConfig, GraphSpec, Initial, Observable, WalkSpec};
use crate::error::Result;
use crate::manifest::{GraphInfo, Manifest, OutputDir};

/// Per-batch estimates: vertex-averaged mean, RMS sigma and mean `F` per m.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchEstimate {
    pub mean: f64,
    pub sigma: f64,
    pub f: Vec<f64>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub graph: Graph,
    pub moments: MomentTable,
    pub reports: Vec<EEReport>,
    pub profiles: Vec<DegreeProfile>,
    pub collapse: Option<Collapse>,
    pub recurrence: Vec<RecurrenceStats>,
    pub correlations: Vec<(CorrelationSpec, CorrelationProfile)>,
    pub batches: Vec<BatchEstimate>,
    pub series: Option<VertexSeries>,
    pub phases: Option<VertexSeries>,
    pub manifest: Manifest,
}

/// Runs `cfg` and writes its artifacts into `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    run_experiment_with(cfg, out, &[])
}

/// [`run_experiment`] with extra substitution notes for the manifest.
pub fn run_experiment_with(cfg: &ExperimentConfig, out: &Path, substitutions: &[String]) -> Result<RunOutcome> {
    cfg.validate()?;
    let started = Instant::now();
    let g = cfg.build_graph()?;
    let mut dir = OutputDir::new(out)?;
    let mut graph_text = Vec::new();
    g.write_edge_list(&mut graph_text)?;
    dir.bytes("graph.edges", &graph_text)?;

    let mut seeds = BTreeMap::new();
    let mut substitutions = substitutions.to_vec();
    if let GraphSpec::ScaleFree { seed, max_degree, n, .. } = &cfg.graph {
        if seed.is_none() {
            seeds.insert("graph".to_string(), cfg.graph_seed());
        }
        if max_degree.is_none() {
            substitutions.push(format!("graph.max_degree: floor(sqrt({n})) = {}", (*n as f64).sqrt().floor()));
        }
    }
    let walk_seed = cfg.walk_seed();
    match cfg.walk {
        WalkSpec::Classical { .. } | WalkSpec::Quantum { phase_noise: true, .. } => {
            seeds.insert("walk".to_string(), walk_seed);
        }
        _ => {}
    }

    let runner = Driver::new(cfg, &g, walk_seed)?;
    let a = &cfg.analysis;
    let (horizon, transient) = (cfg.run.horizon, cfg.run.transient);
    let samples = horizon - transient;
    let all: Vec<usize> = (0..g.vertex_count()).collect();
    let degrees = g.degrees();

    // which vertices need a stored series
    let mut recorded: Vec<usize> = Vec::new();
    if a.record_series {
        recorded = if a.vertices.is_empty() { all.clone() } else { a.vertices.clone() };
    }
    recorded.extend(a.correlations.iter().flat_map(|c| [c.i, c.j]));
    recorded.sort_unstable();
    recorded.dedup();
    let want_phases = a.record_phase || a.correlations.iter().any(|c| c.observable == Observable::Phase);

    // pass 1: moments, batch moments, stored series
    let mut moments = MomentAccumulator::new(all.clone(), degrees.clone(), transient);
    let mut batch_moments = (a.batches >= 2)
        .then(|| Batched::new(transient, samples, a.batches, || MomentAccumulator::new(all.clone(), degrees.clone(), transient)))
        .transpose()?;
    let mut recorder = (!recorded.is_empty()).then(|| {
        let kind = match cfg.walk {
            WalkSpec::Quantum { .. } => SeriesKind::QuantumProbability,
            WalkSpec::Classical { .. } => SeriesKind::ClassicalCount,
        };
        let meta = SeriesMeta { graph_hash: g.fingerprint(), walk: cfg.walk.label(), seed: seeds.get("walk").copied() };
        let rec = SeriesRecorder::new(kind, recorded.clone(), recorded.iter().map(|&v| g.degree(v)).collect(), transient, meta);
        if want_phases {
            rec.with_phases()
        } else {
            rec
        }
    });
    {
        let mut tee: Vec<&mut dyn SeriesObserver> = vec![&mut moments];
        if let Some(b) = batch_moments.as_mut() {
            tee.push(b);
        }
        if let Some(r) = recorder.as_mut() {
            tee.push(r);
        }
        runner.run(want_phases, &mut Tee(tee))?;
    }
    let mt = moments.finish()?;

    // pass 2: exceedances against the full-run thresholds
    let mut exceed = ExceedanceAccumulator::new(&mt, &a.m, transient, false)?;
    let mut recurrent = a.recurrence_m.map(|m| ExceedanceAccumulator::new(&mt, &[m], transient, true)).transpose()?;
    let mut batch_exceed = None;
    if a.batches >= 2 {
        let mut fresh = (0..a.batches)
            .map(|_| ExceedanceAccumulator::new(&mt, &a.m, transient, false))
            .collect::<qxe::Result<Vec<_>>>()?
            .into_iter();
        batch_exceed = Some(Batched::new(transient, samples, a.batches, || fresh.next().expect("one per batch"))?);
    }
    {
        let mut tee: Vec<&mut dyn SeriesObserver> = vec![&mut exceed];
        if let Some(r) = recurrent.as_mut() {
            tee.push(r);
        }
        if let Some(b) = batch_exceed.as_mut() {
            tee.push(b);
        }
        runner.run(false, &mut Tee(tee))?;
    }
    let (reports, _) = exceed.finish();

    let mut notes = Vec::new();
    dir.csv("moments.csv", &mt.to_csv())?;
    let mut ee = CsvTable::new(["v", "k", "q", "count", "F", "m"]);
    for r in &reports {
        for row in r.to_csv().rows {
            ee.push(row);
        }
    }
    dir.csv("ee.csv", &ee)?;

    let mut profiles = Vec::new();
    let mut collapse = None;
    if a.profiles {
        for r in &reports {
            match degree_profile(r, FitWeighting::Ordinary) {
                Ok(p) => profiles.push(p),
                Err(e) => notes.push(format!("no degree profile for m = {}: {e}", r.m)),
            }
        }
        dir.csv("profiles.csv", &profiles_to_csv(&profiles))?;
        let mut fits = CsvTable::new(["m", "gamma", "intercept", "r_squared"]);
        for p in &profiles {
            fits.push(vec![fmt_f64(p.m), fmt_f64(p.gamma), fmt_f64(p.intercept), fmt_f64(p.r_squared)]);
        }
        dir.csv("fits.csv", &fits)?;
        if profiles.len() >= 2 {
            match scaling_collapse(&profiles) {
                Ok(c) => {
                    let mut t = CsvTable::new(["k", "m", "rescaled"]);
                    for (k, vals) in &c.rescaled {
                        for (p, v) in profiles.iter().zip(vals) {
                            t.push(vec![k.to_string(), fmt_f64(p.m), fmt_f64(*v)]);
                        }
                    }
                    dir.csv("collapse.csv", &t)?;
                    collapse = Some(c);
                }
                Err(e) => notes.push(format!("no scaling collapse: {e}")),
            }
        }
    }

    let mut recurrence = Vec::new();
    if let Some(acc) = recurrent {
        let (rep, times) = acc.finish();
        let times = times.expect("times kept");
        recurrence = rep[0].entries.iter().zip(&times[0]).map(|(e, t)| recurrence_from_times(e.vertex, e.degree, t)).collect();
        dir.csv("recurrence.csv", &recurrence_to_csv(&recurrence))?;
    }

    let mut batches = Vec::new();
    if let (Some(bm), Some(be)) = (batch_moments, batch_exceed) {
        let mut bt = CsvTable::new(["batch", "mean", "sigma"]);
        let mut ft = CsvTable::new(["batch", "m", "F"]);
        for (i, (m, e)) in bm.into_inner().into_iter().zip(be.into_inner()).enumerate() {
            let m = m.finish()?;
            let (reps, _) = e.finish();
            let est = BatchEstimate {
                mean: m.average_mean(),
                sigma: m.rms_sigma(),
                f: reps.iter().map(EEReport::mean_probability).collect(),
            };
            bt.push(vec![i.to_string(), fmt_f64(est.mean), fmt_f64(est.sigma)]);
            for (r, f) in reps.iter().zip(&est.f) {
                ft.push(vec![i.to_string(), fmt_f64(r.m), fmt_f64(*f)]);
            }
            batches.push(est);
        }
        dir.csv("batches.csv", &bt)?;
        dir.csv("batches_ee.csv", &ft)?;
    }

    let (series, phases) = match recorder {
        Some(r) => {
            let (s, p) = r.finish();
            (Some(s), p)
        }
        None => (None, None),
    };
    if a.record_series {
        if let Some(s) = &series {
            s.save(&dir.path("series.csv"))?;
            dir.adopt("series.csv")?;
            adopt_sidecar(&mut dir, "series.csv")?;
        }
        if let Some(p) = phases.as_ref().filter(|_| a.record_phase) {
            p.save(&dir.path("phases.csv"))?;
            dir.adopt("phases.csv")?;
            adopt_sidecar(&mut dir, "phases.csv")?;
        }
    }

    let mut correlations = Vec::new();
    for c in &a.correlations {
        let source = match c.observable {
            Observable::Probability => series.as_ref(),
            Observable::Phase => phases.as_ref(),
        }
        .expect("recorded above");
        let prof = cross_correlation(source, c.i, c.j, a.tau_max, a.normalized)?;
        let kind = match c.observable {
            Observable::Probability => "z",
            Observable::Phase => "theta",
        };
        dir.csv(&format!("corr_{kind}_{}_{}.csv", c.i, c.j), &prof.to_csv())?;
        correlations.push((c.clone(), prof));
    }

    dir.bytes("config.toml", cfg.to_toml()?.as_bytes())?;
    let manifest = Manifest {
        name: cfg.name.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: cfg.hash()?,
        master_seed: cfg.seed,
        seeds,
        graph: GraphInfo { fingerprint: g.fingerprint(), vertices: g.vertex_count(), arcs: g.arc_count(), max_degree: g.max_degree() },
        wall_time_s: started.elapsed().as_secs_f64(),
        substitutions,
        notes,
        files: dir.into_files(),
    };
    qxe::io::write_atomic(&out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(RunOutcome { graph: g, moments: mt, reports, profiles, collapse, recurrence, correlations, batches, series, phases, manifest })
}

fn adopt_sidecar(dir: &mut OutputDir, csv: &str) -> Result<()> {
    let side = VertexSeries::sidecar_path(&dir.path(csv));
    let name = side.file_name().expect("sidecar has a name").to_string_lossy().into_owned();
    dir.adopt(&name)
}

/// Replays the configured walk from scratch on every call.
struct Driver<'a> {
    cfg: &'a ExperimentConfig,
    graph: &'a Graph,
    op: Option<WalkOperator>,
    walk_seed: u64,
}

impl<'a> Driver<'a> {
    fn new(cfg: &'a ExperimentConfig, graph: &'a Graph, walk_seed: u64) -> Result<Self> {
        let op = match cfg.walk {
            WalkSpec::Quantum { coin, .. } => Some(WalkOperator::new(graph.clone(), coin.spec())?),
            WalkSpec::Classical { .. } => None,
        };
        Ok(Driver { cfg, graph, op, walk_seed })
    }

    fn run(&self, with_phases: bool, obs: &mut dyn SeriesObserver) -> Result<()> {
        let horizon = self.cfg.run.horizon;
        match (&self.cfg.walk, &self.op) {
            (WalkSpec::Quantum { start, initial, phase_noise, .. }, Some(op)) => {
                let x = match initial {
                    Initial::Localized => localized_state(self.graph, *start)?,
                    Initial::Uniform => uniform_state(self.graph),
                };
                let noise = phase_noise.then_some(self.walk_seed);
                Evolution::new(op, &x, noise)?.run(horizon, with_phases, false, obs);
            }
            (WalkSpec::Classical { walkers, start }, _) => {
                ClassicalEnsemble::new(self.graph.clone(), *walkers, *start, self.walk_seed)?.run(horizon, obs);
            }
            _ => unreachable!("operator built for quantum walks"),
        }
        Ok(())
    }
}
