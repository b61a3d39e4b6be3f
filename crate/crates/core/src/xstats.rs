//! Time-series statistics: moments, flux-fluctuation fits, extreme events,
//! degree profiles, scaling collapse, lagged correlations and recurrence.
//!
//! Every statistic excludes samples with `t < transient`. Series-based entry
//! points feed stored rows through the same accumulators that the streaming
//! pipelines use, so both routes produce identical numbers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, CsvTable};
use crate::series::{Frame, SeriesObserver, VertexSeries};

/// Minimum exceedance count for a recurrence fit.
pub const MIN_RECURRENCE_EVENTS: usize = 10;

/// Spread below which a scaling collapse is declared.
pub const COLLAPSE_THRESHOLD: f64 = 0.25;

// ---------------------------------------------------------------------------
// Moments

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    pub vertices: Vec<usize>,
    pub degrees: Vec<usize>,
    pub mean: Vec<f64>,
    /// Population standard deviation.
    pub sigma: Vec<f64>,
    pub samples: usize,
}

impl MomentTable {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// `mean + m * sigma` per vertex.
    pub fn thresholds(&self, m: f64) -> Vec<f64> {
        self.mean.iter().zip(&self.sigma).map(|(mu, s)| mu + m * s).collect()
    }

    /// Average of the per-vertex means.
    pub fn average_mean(&self) -> f64 {
        self.mean.iter().sum::<f64>() / self.len() as f64
    }

    /// Root mean square of the per-vertex standard deviations.
    pub fn rms_sigma(&self) -> f64 {
        (self.sigma.iter().map(|s| s * s).sum::<f64>() / self.len() as f64).sqrt()
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(["v", "k", "mean", "sigma"]);
        for i in 0..self.len() {
            t.push(vec![
                self.vertices[i].to_string(),
                self.degrees[i].to_string(),
                fmt_f64(self.mean[i]),
                fmt_f64(self.sigma[i]),
            ]);
        }
        t
    }
}

/// Welford accumulator over selected entries of each frame.
pub struct MomentAccumulator {
    vertices: Vec<usize>,
    degrees: Vec<usize>,
    columns: Vec<usize>,
    transient: usize,
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl MomentAccumulator {
    /// Reads `frame.values[v]` for each `v` in `vertices`.
    pub fn new(vertices: Vec<usize>, degrees: Vec<usize>, transient: usize) -> Self {
        let columns = vertices.clone();
        Self::with_columns(vertices, degrees, columns, transient)
    }

    fn with_columns(vertices: Vec<usize>, degrees: Vec<usize>, columns: Vec<usize>, transient: usize) -> Self {
        let w = vertices.len();
        MomentAccumulator { vertices, degrees, columns, transient, count: 0, mean: vec![0.0; w], m2: vec![0.0; w] }
    }

    pub fn finish(self) -> Result<MomentTable> {
        if self.count < 2 {
            return Err(Error::Argument(format!("need at least 2 post-transient samples, got {}", self.count)));
        }
        let n = self.count as f64;
        Ok(MomentTable {
            sigma: self.m2.iter().map(|m2| (m2 / n).max(0.0).sqrt()).collect(),
            vertices: self.vertices,
            degrees: self.degrees,
            mean: self.mean,
            samples: self.count,
        })
    }
}

impl SeriesObserver for MomentAccumulator {
    fn observe(&mut self, frame: &Frame<'_>) {
        if frame.t < self.transient {
            return;
        }
        self.count += 1;
        let n = self.count as f64;
        for (i, &c) in self.columns.iter().enumerate() {
            let x = frame.values[c];
            let delta = x - self.mean[i];
            self.mean[i] += delta / n;
            self.m2[i] += delta * (x - self.mean[i]);
        }
    }
}

/// Feeds the stored rows of `series` (indexed by column) into `observer`.
fn feed_rows(series: &VertexSeries, observer: &mut dyn SeriesObserver) {
    for (r, &t) in series.times.iter().enumerate() {
        observer.observe(&Frame { t, values: series.row(r), phases: None, state: None });
    }
}

fn columns(series: &VertexSeries) -> Vec<usize> {
    (0..series.width()).collect()
}

pub fn series_moments(series: &VertexSeries) -> Result<MomentTable> {
    let mut acc = MomentAccumulator::with_columns(
        series.vertices.clone(),
        series.degrees.clone(),
        columns(series),
        series.transient,
    );
    feed_rows(series, &mut acc);
    acc.finish()
}

/// Routes post-transient frames into `batches` consecutive blocks of equal
/// length, one inner observer per block. Samples beyond the last full block
/// go to the last block.
pub struct Batched<O> {
    transient: usize,
    batch_len: usize,
    inner: Vec<O>,
}

impl<O> Batched<O> {
    /// `samples` is the number of post-transient frames the run will emit.
    pub fn new(transient: usize, samples: usize, batches: usize, mut make: impl FnMut() -> O) -> Result<Self> {
        if batches < 2 || samples < 2 * batches {
            return Err(Error::Argument(format!("cannot split {samples} samples into {batches} batches")));
        }
        Ok(Batched { transient, batch_len: samples / batches, inner: (0..batches).map(|_| make()).collect() })
    }

    pub fn into_inner(self) -> Vec<O> {
        self.inner
    }
}

impl<O: SeriesObserver> SeriesObserver for Batched<O> {
    fn observe(&mut self, frame: &Frame<'_>) {
        if frame.t < self.transient {
            return;
        }
        let b = ((frame.t - self.transient) / self.batch_len).min(self.inner.len() - 1);
        self.inner[b].observe(frame);
    }
}

/// Mean of per-batch estimates and its batch-means standard error.
pub fn batch_mean_se(estimates: &[f64]) -> (f64, f64) {
    let b = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / b;
    let var = estimates.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (b - 1.0);
    (mean, (var / b).sqrt())
}

// ---------------------------------------------------------------------------
// Flux-fluctuation fit

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// RMS residual divided by the mean fluctuation.
    pub relative_residual: f64,
    pub points: usize,
}

/// Least squares of `sigma_i` against `sqrt(mean_i)`.
pub fn flux_fluctuation_fit(mt: &MomentTable, through_origin: bool) -> Result<FluxFit> {
    let distinct: std::collections::BTreeSet<_> = mt.degrees.iter().collect();
    if distinct.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 degree classes, got {}", distinct.len())));
    }
    let x: Vec<f64> = mt.mean.iter().map(|m| m.max(0.0).sqrt()).collect();
    let y = &mt.sigma;
    let line = if through_origin { fit_line_through_origin(&x, y, None)? } else { fit_line(&x, y, None)? };
    let n = x.len() as f64;
    let rms = (x.iter().zip(y).map(|(xi, yi)| (yi - line.predict(*xi)).powi(2)).sum::<f64>() / n).sqrt();
    let mean_y = y.iter().sum::<f64>() / n;
    Ok(FluxFit {
        slope: line.slope,
        intercept: line.intercept,
        r_squared: line.r_squared,
        relative_residual: rms / mean_y,
        points: x.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Line {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl Line {
    pub fn predict(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

fn weights_or_ones(w: Option<&[f64]>, n: usize) -> Vec<f64> {
    w.map_or_else(|| vec![1.0; n], <[f64]>::to_vec)
}

fn r_squared(x: &[f64], y: &[f64], w: &[f64], line: &Line) -> f64 {
    let sw: f64 = w.iter().sum();
    let ybar = y.iter().zip(w).map(|(yi, wi)| yi * wi).sum::<f64>() / sw;
    let ss_tot: f64 = y.iter().zip(w).map(|(yi, wi)| wi * (yi - ybar).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(y).zip(w).map(|((xi, yi), wi)| wi * (yi - line.predict(*xi)).powi(2)).sum();
    if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    }
}

/// Weighted ordinary least squares `y = a x + b`.
pub fn fit_line(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Result<Line> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Fit("need at least two paired points".into()));
    }
    let w = weights_or_ones(weights, x.len());
    let sw: f64 = w.iter().sum();
    let xbar = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ybar = y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * (xi - xbar).powi(2)).sum();
    if sxx <= f64::EPSILON * sw * xbar.abs().max(1.0) * 1e-6 || sxx == 0.0 {
        return Err(Error::Fit("abscissa has no spread".into()));
    }
    let sxy: f64 = x.iter().zip(y).zip(&w).map(|((xi, yi), wi)| wi * (xi - xbar) * (yi - ybar)).sum();
    let slope = sxy / sxx;
    let mut line = Line { slope, intercept: ybar - slope * xbar, r_squared: 0.0 };
    line.r_squared = r_squared(x, y, &w, &line);
    Ok(line)
}

/// Weighted least squares `y = a x`.
pub fn fit_line_through_origin(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Result<Line> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::Fit("need paired points".into()));
    }
    let w = weights_or_ones(weights, x.len());
    let sxx: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi * xi).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("abscissa is identically zero".into()));
    }
    let first = x[0];
    if x.iter().all(|&xi| xi == first) {
        return Err(Error::Fit("abscissa has no spread".into()));
    }
    let sxy: f64 = x.iter().zip(y).zip(&w).map(|((xi, yi), wi)| wi * xi * yi).sum();
    let mut line = Line { slope: sxy / sxx, intercept: 0.0, r_squared: 0.0 };
    line.r_squared = r_squared(x, y, &w, &line);
    Ok(line)
}

// ---------------------------------------------------------------------------
// Extreme events

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EEEntry {
    pub vertex: usize,
    pub degree: usize,
    pub threshold: f64,
    pub count: usize,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EEReport {
    pub m: f64,
    pub entries: Vec<EEEntry>,
    pub samples: usize,
}

impl EEReport {
    pub fn mean_probability(&self) -> f64 {
        self.entries.iter().map(|e| e.probability).sum::<f64>() / self.entries.len() as f64
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(["v", "k", "q", "count", "F", "m"]);
        for e in &self.entries {
            t.push(vec![
                e.vertex.to_string(),
                e.degree.to_string(),
                fmt_f64(e.threshold),
                e.count.to_string(),
                fmt_f64(e.probability),
                fmt_f64(self.m),
            ]);
        }
        t
    }
}

/// Counts strict exceedances of fixed per-vertex thresholds for several
/// `m` at once, optionally keeping the exceedance times.
pub struct ExceedanceAccumulator {
    vertices: Vec<usize>,
    degrees: Vec<usize>,
    columns: Vec<usize>,
    transient: usize,
    ms: Vec<f64>,
    thresholds: Vec<Vec<f64>>,
    counts: Vec<Vec<usize>>,
    times: Option<Vec<Vec<Vec<usize>>>>,
    samples: usize,
}

impl ExceedanceAccumulator {
    pub fn new(moments: &MomentTable, ms: &[f64], transient: usize, keep_times: bool) -> Result<Self> {
        let columns = moments.vertices.clone();
        Self::with_columns(moments, ms, columns, transient, keep_times)
    }

    fn with_columns(moments: &MomentTable, ms: &[f64], columns: Vec<usize>, transient: usize, keep_times: bool) -> Result<Self> {
        if let Some(&m) = ms.iter().find(|&&m| m < 0.0 || m.is_nan()) {
            return Err(Error::Argument(format!("threshold multiplier must be non-negative, got {m}")));
        }
        let w = moments.len();
        Ok(ExceedanceAccumulator {
            vertices: moments.vertices.clone(),
            degrees: moments.degrees.clone(),
            columns,
            transient,
            ms: ms.to_vec(),
            thresholds: ms.iter().map(|&m| moments.thresholds(m)).collect(),
            counts: vec![vec![0; w]; ms.len()],
            times: keep_times.then(|| vec![vec![Vec::new(); w]; ms.len()]),
            samples: 0,
        })
    }

    /// One report per `m`, plus exceedance times (`[m][vertex]`) if kept.
    pub fn finish(self) -> (Vec<EEReport>, Option<Vec<Vec<Vec<usize>>>>) {
        let samples = self.samples;
        let reports = self
            .ms
            .iter()
            .enumerate()
            .map(|(mi, &m)| EEReport {
                m,
                samples,
                entries: (0..self.vertices.len())
                    .map(|i| EEEntry {
                        vertex: self.vertices[i],
                        degree: self.degrees[i],
                        threshold: self.thresholds[mi][i],
                        count: self.counts[mi][i],
                        probability: if samples == 0 { 0.0 } else { self.counts[mi][i] as f64 / samples as f64 },
                    })
                    .collect(),
            })
            .collect();
        (reports, self.times)
    }
}

impl SeriesObserver for ExceedanceAccumulator {
    fn observe(&mut self, frame: &Frame<'_>) {
        if frame.t < self.transient {
            return;
        }
        self.samples += 1;
        for (mi, q) in self.thresholds.iter().enumerate() {
            for (i, &c) in self.columns.iter().enumerate() {
                if frame.values[c] > q[i] {
                    self.counts[mi][i] += 1;
                    if let Some(times) = self.times.as_mut() {
                        times[mi][i].push(frame.t);
                    }
                }
            }
        }
    }
}

/// Per-vertex extreme events above `mean_i + m sigma_i` (strict).
pub fn ee_detect(series: &VertexSeries, m: f64) -> Result<EEReport> {
    let (mut reports, _) = ee_detect_with_times(series, &[m])?;
    Ok(reports.remove(0))
}

/// [`ee_detect`] for several `m`, also returning exceedance times.
pub fn ee_detect_with_times(series: &VertexSeries, ms: &[f64]) -> Result<(Vec<EEReport>, Vec<Vec<Vec<usize>>>)> {
    let mt = series_moments(series)?;
    let mut acc = ExceedanceAccumulator::with_columns(&mt, ms, columns(series), series.transient, true)?;
    feed_rows(series, &mut acc);
    let (reports, times) = acc.finish();
    Ok((reports, times.expect("times kept")))
}

/// Two passes over a deterministic run: moments first, then exceedances
/// for every `m`. `run` must replay the identical sequence of frames on
/// each call.
pub fn two_pass_analysis<F>(
    mut run: F,
    vertices: Vec<usize>,
    degrees: Vec<usize>,
    transient: usize,
    ms: &[f64],
    keep_times: bool,
) -> Result<(MomentTable, Vec<EEReport>, Option<Vec<Vec<Vec<usize>>>>)>
where
    F: FnMut(&mut dyn SeriesObserver) -> Result<()>,
{
    let mut moments = MomentAccumulator::new(vertices, degrees, transient);
    run(&mut moments)?;
    let mt = moments.finish()?;
    let mut exceed = ExceedanceAccumulator::new(&mt, ms, transient, keep_times)?;
    run(&mut exceed)?;
    let (reports, times) = exceed.finish();
    Ok((mt, reports, times))
}

// ---------------------------------------------------------------------------
// Degree profiles and scaling collapse

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum FitWeighting {
    Ordinary,
    /// Weight each degree class by its vertex count.
    VertexCount,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreePoint {
    pub degree: usize,
    pub vertices: usize,
    pub mean: f64,
    /// Standard error of the mean across the class (0 for singletons).
    pub sem: f64,
}

/// Class means of `values` grouped by degree, ascending in degree.
pub fn degree_class_means(degrees: &[usize], values: &[f64]) -> Vec<DegreePoint> {
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (&k, &x) in degrees.iter().zip(values) {
        groups.entry(k).or_default().push(x);
    }
    groups
        .into_iter()
        .map(|(degree, xs)| {
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let sem = if xs.len() > 1 {
                (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt()
            } else {
                0.0
            };
            DegreePoint { degree, vertices: xs.len(), mean, sem }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeProfile {
    pub m: f64,
    pub points: Vec<DegreePoint>,
    /// Exponent of `F(k) ~ k^gamma`.
    pub gamma: f64,
    /// Natural-log intercept of the fit.
    pub intercept: f64,
    pub r_squared: f64,
    pub fitted_degrees: Vec<usize>,
}

impl DegreeProfile {
    pub fn predict(&self, k: usize) -> f64 {
        (self.intercept + self.gamma * (k as f64).ln()).exp()
    }
}

/// Minimum vertices in a degree class for it to enter the power-law fit.
pub const MIN_CLASS_SIZE: usize = 3;

/// Per-degree mean `F` and a least-squares fit of `ln F = gamma ln k + c`
/// over classes with at least [`MIN_CLASS_SIZE`] vertices and `F > 0`.
pub fn degree_profile(report: &EEReport, weighting: FitWeighting) -> Result<DegreeProfile> {
    let degrees: Vec<usize> = report.entries.iter().map(|e| e.degree).collect();
    let values: Vec<f64> = report.entries.iter().map(|e| e.probability).collect();
    let points = degree_class_means(&degrees, &values);
    fit_degree_profile(report.m, points, weighting)
}

pub fn fit_degree_profile(m: f64, points: Vec<DegreePoint>, weighting: FitWeighting) -> Result<DegreeProfile> {
    if points.len() < 4 {
        return Err(Error::Fit(format!("need at least 4 distinct degrees, got {}", points.len())));
    }
    let used: Vec<&DegreePoint> = points.iter().filter(|p| p.vertices >= MIN_CLASS_SIZE && p.mean > 0.0).collect();
    if used.len() < 2 {
        return Err(Error::Fit("fewer than two usable degree classes".into()));
    }
    let x: Vec<f64> = used.iter().map(|p| (p.degree as f64).ln()).collect();
    let y: Vec<f64> = used.iter().map(|p| p.mean.ln()).collect();
    let w: Option<Vec<f64>> = match weighting {
        FitWeighting::Ordinary => None,
        FitWeighting::VertexCount => Some(used.iter().map(|p| p.vertices as f64).collect()),
    };
    let line = fit_line(&x, &y, w.as_deref())?;
    let fitted_degrees = used.iter().map(|p| p.degree).collect();
    Ok(DegreeProfile { m, points, gamma: line.slope, intercept: line.intercept, r_squared: line.r_squared, fitted_degrees })
}

pub fn profiles_to_csv(profiles: &[DegreeProfile]) -> CsvTable {
    let mut t = CsvTable::new(["k", "F_mean", "F_sem", "m"]);
    for p in profiles {
        for pt in &p.points {
            t.push(vec![pt.degree.to_string(), fmt_f64(pt.mean), fmt_f64(pt.sem), fmt_f64(p.m)]);
        }
    }
    t
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Collapse {
    /// Max over shared degrees of `(max - min) / mean` of the rescaled values.
    pub spread: f64,
    pub collapsed: bool,
    /// `(k, rescaled value per profile)`.
    pub rescaled: Vec<(usize, Vec<f64>)>,
}

/// Divides each profile by its own fitted power law `exp(c_m) k^gamma_m`
/// and measures how far the rescaled curves disagree on the degrees that
/// all fits share.
pub fn scaling_collapse(profiles: &[DegreeProfile]) -> Result<Collapse> {
    if profiles.len() < 2 {
        return Err(Error::Argument("need at least two threshold values".into()));
    }
    if profiles.iter().any(|p| p.fitted_degrees.len() < 2 || !p.gamma.is_finite()) {
        return Err(Error::Argument("every profile needs a power-law fit".into()));
    }
    let shared: Vec<usize> = profiles[0]
        .fitted_degrees
        .iter()
        .copied()
        .filter(|k| profiles[1..].iter().all(|p| p.fitted_degrees.contains(k)))
        .collect();
    if shared.is_empty() {
        return Err(Error::Argument("profiles share no fitted degree".into()));
    }
    let mut spread = 0.0f64;
    let mut rescaled = Vec::with_capacity(shared.len());
    for &k in &shared {
        let vals: Vec<f64> = profiles
            .iter()
            .map(|p| {
                let pt = p.points.iter().find(|pt| pt.degree == k).expect("fitted degree present");
                pt.mean / p.predict(k)
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let (lo, hi) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        spread = spread.max((hi - lo) / mean);
        rescaled.push((k, vals));
    }
    Ok(Collapse { spread, collapsed: spread < COLLAPSE_THRESHOLD, rescaled })
}

// ---------------------------------------------------------------------------
// Correlations

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationProfile {
    pub i: usize,
    pub j: usize,
    pub values: Vec<f64>,
    pub normalized: bool,
    pub samples: usize,
}

impl CorrelationProfile {
    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(["tau", "C"]);
        for (tau, c) in self.values.iter().enumerate() {
            t.push(vec![tau.to_string(), fmt_f64(*c)]);
        }
        t
    }
}

fn mean_sigma(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// `C_ij(tau) = <X_i(t) X_j(t + tau)>` over post-transient samples. The
/// normalized mode subtracts means and divides by `sigma_i sigma_j`.
pub fn cross_correlation(series: &VertexSeries, i: usize, j: usize, tau_max: usize, normalized: bool) -> Result<CorrelationProfile> {
    let ci = series.column_of(i).ok_or(Error::Index { index: i, limit: series.width() })?;
    let cj = series.column_of(j).ok_or(Error::Index { index: j, limit: series.width() })?;
    let xi = series.post_transient(ci);
    let xj = series.post_transient(cj);
    correlate(&xi, &xj, tau_max, normalized).map(|values| CorrelationProfile { i, j, values, normalized, samples: xi.len() })
}

/// Lagged correlation of two equally long sample vectors.
pub fn correlate(xi: &[f64], xj: &[f64], tau_max: usize, normalized: bool) -> Result<Vec<f64>> {
    let n = xi.len();
    if xj.len() != n {
        return Err(Error::Shape { expected: n, got: xj.len() });
    }
    if 2 * tau_max >= n {
        return Err(Error::Argument(format!("tau_max {tau_max} must be below half the {n} samples")));
    }
    let (mi, si) = mean_sigma(xi);
    let (mj, sj) = mean_sigma(xj);
    if normalized && (si == 0.0 || sj == 0.0) {
        return Err(Error::DegenerateSeries("zero variance".into()));
    }
    let (oi, oj, scale) = if normalized { (mi, mj, 1.0 / (si * sj)) } else { (0.0, 0.0, 1.0) };
    Ok((0..=tau_max)
        .map(|tau| {
            let len = n - tau;
            let s: f64 = (0..len).map(|t| (xi[t] - oi) * (xj[t + tau] - oj)).sum();
            s / len as f64 * scale
        })
        .collect())
}

/// Half-width `4 / sqrt(samples)` of the band expected for uncorrelated series.
pub fn null_band(samples: usize) -> f64 {
    4.0 / (samples as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub amplitude: f64,
    pub r_squared: f64,
    /// Sampled lags below `window` entered the fit.
    pub window: usize,
}

/// Fits `C(tau) = A exp(-rate tau)` by least squares on `ln C` over the
/// initial decay window, using every `stride`-th lag. The window ends at the
/// first sampled lag where `C` falls to `floor * C(0)` or below zero.
///
/// A stride of 2 follows the envelope of profiles that alternate in sign
/// between even and odd lags, as coined walks do: amplitude scattered back
/// by a neighbour's coin returns after two steps.
pub fn fit_exponential_decay(values: &[f64], stride: usize, floor: f64) -> Result<DecayFit> {
    if stride == 0 {
        return Err(Error::Argument("stride must be positive".into()));
    }
    let c0 = *values.first().ok_or_else(|| Error::Fit("empty profile".into()))?;
    if c0 <= 0.0 {
        return Err(Error::Fit("profile does not start positive".into()));
    }
    let sampled: Vec<(usize, f64)> = values.iter().copied().enumerate().step_by(stride).collect();
    let len = sampled.iter().position(|&(_, c)| c <= floor * c0 || c <= 0.0).unwrap_or(sampled.len());
    if len < 3 {
        return Err(Error::Fit(format!("decay window of {len} sampled lags is too short")));
    }
    let x: Vec<f64> = sampled[..len].iter().map(|&(t, _)| t as f64).collect();
    let y: Vec<f64> = sampled[..len].iter().map(|&(_, c)| c.ln()).collect();
    let line = fit_line(&x, &y, None)?;
    Ok(DecayFit {
        rate: -line.slope,
        amplitude: line.intercept.exp(),
        r_squared: line.r_squared,
        window: sampled[len - 1].0 + 1,
    })
}

// ---------------------------------------------------------------------------
// Recurrence

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoodnessOfFit {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub bins: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceStats {
    pub vertex: usize,
    pub degree: usize,
    pub exceedances: usize,
    pub intervals: Vec<usize>,
    pub mean_interval: Option<f64>,
    /// Rate of the fitted (discretised) exponential, `ln(mean / (mean - 1))`.
    pub rate: Option<f64>,
    /// `(interval, count)` for every observed interval length.
    pub histogram: Vec<(usize, usize)>,
    pub fit: Option<GoodnessOfFit>,
    /// False when there are fewer than [`MIN_RECURRENCE_EVENTS`] exceedances.
    pub sufficient: bool,
}

/// Interval statistics from sorted exceedance times.
pub fn recurrence_from_times(vertex: usize, degree: usize, times: &[usize]) -> RecurrenceStats {
    let intervals: Vec<usize> = times.windows(2).map(|w| w[1] - w[0]).collect();
    let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
    for &d in &intervals {
        *hist.entry(d).or_default() += 1;
    }
    let mean_interval = (!intervals.is_empty()).then(|| intervals.iter().sum::<usize>() as f64 / intervals.len() as f64);
    let sufficient = times.len() >= MIN_RECURRENCE_EVENTS;
    let rate = mean_interval.and_then(|m| (m > 1.0).then(|| (m / (m - 1.0)).ln()));
    let fit = if sufficient { geometric_goodness_of_fit(&intervals) } else { None };
    RecurrenceStats {
        vertex,
        degree,
        exceedances: times.len(),
        intervals,
        mean_interval,
        rate,
        histogram: hist.into_iter().collect(),
        fit,
        sufficient,
    }
}

/// Pearson chi-squared test of integer intervals `>= 1` against the
/// geometric law `P(n) = p (1 - p)^(n - 1)` with `p = 1 / mean`, bins merged
/// until every expected count is at least 5.
pub fn geometric_goodness_of_fit(intervals: &[usize]) -> Option<GoodnessOfFit> {
    if intervals.is_empty() {
        return None;
    }
    let total = intervals.len() as f64;
    let mean = intervals.iter().sum::<usize>() as f64 / total;
    if mean <= 1.0 {
        return None;
    }
    let p = 1.0 / mean;
    let max_n = *intervals.iter().max()?;
    let mut observed = vec![0usize; max_n + 2];
    for &d in intervals {
        observed[d] += 1;
    }

    // (expected, observed) per merged bin; the last bin is the open tail
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut exp_acc, mut obs_acc) = (0.0, 0.0);
    let mut survival = 1.0; // P(N >= n)
    let mut n = 1;
    while n <= max_n {
        let pn = p * (1.0 - p).powi(n as i32 - 1);
        exp_acc += total * pn;
        obs_acc += observed[n] as f64;
        survival -= pn;
        n += 1;
        let tail_expected = total * survival.max(0.0);
        if exp_acc >= 5.0 && tail_expected >= 5.0 {
            bins.push((exp_acc, obs_acc));
            exp_acc = 0.0;
            obs_acc = 0.0;
        }
    }
    // open tail n > max_n has no observations
    exp_acc += total * survival.max(0.0);
    if exp_acc > 0.0 || obs_acc > 0.0 {
        match bins.last_mut() {
            Some(last) if exp_acc < 5.0 => {
                last.0 += exp_acc;
                last.1 += obs_acc;
            }
            _ => bins.push((exp_acc, obs_acc)),
        }
    }
    if bins.len() < 3 {
        return None;
    }
    let statistic: f64 = bins.iter().map(|(e, o)| (o - e).powi(2) / e).sum();
    let dof = bins.len() - 2;
    let p_value = 1.0 - ChiSquared::new(dof as f64).ok()?.cdf(statistic);
    Some(GoodnessOfFit { statistic, dof, p_value, bins: bins.len() })
}

/// Recurrence statistics at every vertex of `report`, with exceedances
/// recomputed from `series` using the report's thresholds.
pub fn recurrence_statistics(report: &EEReport, series: &VertexSeries) -> Result<Vec<RecurrenceStats>> {
    report
        .entries
        .iter()
        .map(|e| {
            let c = series.column_of(e.vertex).ok_or(Error::Index { index: e.vertex, limit: series.width() })?;
            let w = series.width();
            let times: Vec<usize> = series
                .times
                .iter()
                .enumerate()
                .filter(|(r, &t)| t >= series.transient && series.values[r * w + c] > e.threshold)
                .map(|(_, &t)| t)
                .collect();
            Ok(recurrence_from_times(e.vertex, e.degree, &times))
        })
        .collect()
}

pub fn recurrence_to_csv(stats: &[RecurrenceStats]) -> CsvTable {
    let mut t = CsvTable::new(["v", "k", "mean_rec", "rate"]);
    let opt = |x: Option<f64>| x.map_or_else(|| "nan".to_string(), fmt_f64);
    for s in stats {
        t.push(vec![s.vertex.to_string(), s.degree.to_string(), opt(s.mean_interval), opt(s.rate)]);
    }
    t
}
