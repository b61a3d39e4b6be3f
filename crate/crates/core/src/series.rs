//! Per-vertex time series and the streaming hook used to produce them.
//!
//! Long runs on a thousand vertices do not fit in memory as dense series, so
//! the simulators push one [`Frame`] per step into a [`SeriesObserver`].
//! [`SeriesRecorder`] is the observer that materialises a [`VertexSeries`];
//! the statistics module provides observers that accumulate moments and
//! exceedances directly.

use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, write_atomic, CsvTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    QuantumProbability,
    QuantumPhase,
    ClassicalCount,
}

/// One time step as seen by an observer. `values` holds one entry per
/// vertex of the graph: `z_v(t)` for quantum runs, walker counts for
/// classical runs.
pub struct Frame<'a> {
    pub t: usize,
    pub values: &'a [f64],
    pub phases: Option<&'a [f64]>,
    pub state: Option<&'a [C64]>,
}

pub trait SeriesObserver {
    fn observe(&mut self, frame: &Frame<'_>);
}

impl<F: FnMut(&Frame<'_>)> SeriesObserver for F {
    fn observe(&mut self, frame: &Frame<'_>) {
        self(frame)
    }
}

/// Fan a frame out to several observers.
pub struct Tee<'a>(pub Vec<&'a mut dyn SeriesObserver>);

impl SeriesObserver for Tee<'_> {
    fn observe(&mut self, frame: &Frame<'_>) {
        for o in self.0.iter_mut() {
            o.observe(frame);
        }
    }
}

/// Provenance stored next to an exported series.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub graph_hash: String,
    pub walk: String,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VertexSeries {
    pub kind: SeriesKind,
    pub times: Vec<usize>,
    /// Row-major, `times.len() x vertices.len()`.
    pub values: Vec<f64>,
    pub vertices: Vec<usize>,
    pub degrees: Vec<usize>,
    pub transient: usize,
    pub meta: SeriesMeta,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    kind: SeriesKind,
    vertices: Vec<usize>,
    degrees: Vec<usize>,
    transient: usize,
    #[serde(flatten)]
    meta: SeriesMeta,
}

impl VertexSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn width(&self) -> usize {
        self.vertices.len()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let w = self.width();
        &self.values[r * w..(r + 1) * w]
    }

    /// Column index of graph vertex `v`.
    pub fn column_of(&self, v: usize) -> Option<usize> {
        self.vertices.iter().position(|&x| x == v)
    }

    /// Samples of column `c` with `t >= transient`.
    pub fn post_transient(&self, c: usize) -> Vec<f64> {
        let w = self.width();
        self.times
            .iter()
            .enumerate()
            .filter(|(_, &t)| t >= self.transient)
            .map(|(r, _)| self.values[r * w + c])
            .collect()
    }

    pub fn post_transient_len(&self) -> usize {
        self.times.iter().filter(|&&t| t >= self.transient).count()
    }

    /// Replays the stored rows into `observer`, one frame per row. Each row
    /// is scattered into a vector indexed by graph vertex, with unrecorded
    /// vertices left at zero.
    pub fn replay(&self, observer: &mut dyn SeriesObserver) {
        let n = self.vertices.iter().copied().max().map_or(0, |m| m + 1);
        let mut buf = vec![0.0; n];
        for (r, &t) in self.times.iter().enumerate() {
            for (c, &v) in self.vertices.iter().enumerate() {
                buf[v] = self.row(r)[c];
            }
            observer.observe(&Frame { t, values: &buf, phases: None, state: None });
        }
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut header = vec!["t".to_string()];
        header.extend(self.vertices.iter().map(|v| format!("v{v}")));
        let mut table = CsvTable::new(header);
        for (r, &t) in self.times.iter().enumerate() {
            let mut row = vec![t.to_string()];
            row.extend(self.row(r).iter().map(|&x| fmt_f64(x)));
            table.push(row);
        }
        table
    }

    pub fn sidecar_path(csv: &Path) -> PathBuf {
        let mut p = csv.as_os_str().to_owned();
        p.push(".meta.json");
        PathBuf::from(p)
    }

    /// Writes `path` (CSV) and `path.meta.json`.
    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_csv().write(path)?;
        let sidecar = Sidecar {
            kind: self.kind,
            vertices: self.vertices.clone(),
            degrees: self.degrees.clone(),
            transient: self.transient,
            meta: self.meta.clone(),
        };
        write_atomic(&Self::sidecar_path(path), serde_json::to_string_pretty(&sidecar)?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let table = CsvTable::read(path)?;
        let sidecar: Sidecar = serde_json::from_str(&std::fs::read_to_string(Self::sidecar_path(path))?)?;
        Self::from_csv(&table, sidecar.kind, sidecar.degrees, sidecar.transient, sidecar.meta)
    }

    pub fn from_csv(
        table: &CsvTable,
        kind: SeriesKind,
        degrees: Vec<usize>,
        transient: usize,
        meta: SeriesMeta,
    ) -> Result<Self> {
        if table.header.first().map(String::as_str) != Some("t") {
            return Err(Error::Parse { line: 1, message: "first column must be `t`".into() });
        }
        let vertices = table.header[1..]
            .iter()
            .map(|h| {
                h.strip_prefix('v')
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Parse { line: 1, message: format!("bad column {h:?}") })
            })
            .collect::<Result<Vec<usize>>>()?;
        if degrees.len() != vertices.len() {
            return Err(Error::Shape { expected: vertices.len(), got: degrees.len() });
        }
        let mut times = Vec::with_capacity(table.rows.len());
        let mut values = Vec::with_capacity(table.rows.len() * vertices.len());
        for (i, row) in table.rows.iter().enumerate() {
            let parse_err = |what: &str| Error::Parse { line: i + 2, message: format!("bad {what}") };
            times.push(row[0].parse().map_err(|_| parse_err("time"))?);
            for cell in &row[1..] {
                values.push(cell.parse().map_err(|_| parse_err("value"))?);
            }
        }
        Ok(VertexSeries { kind, times, values, vertices, degrees, transient, meta })
    }
}

/// Observer that stores the selected vertices of every frame.
pub struct SeriesRecorder {
    series: VertexSeries,
    phases: Option<VertexSeries>,
}

impl SeriesRecorder {
    pub fn new(kind: SeriesKind, vertices: Vec<usize>, degrees: Vec<usize>, transient: usize, meta: SeriesMeta) -> Self {
        let series = VertexSeries { kind, times: Vec::new(), values: Vec::new(), vertices, degrees, transient, meta };
        SeriesRecorder { series, phases: None }
    }

    /// Also keep the phase channel of quantum frames.
    pub fn with_phases(mut self) -> Self {
        let mut ph = self.series.clone();
        ph.kind = SeriesKind::QuantumPhase;
        self.phases = Some(ph);
        self
    }

    pub fn finish(self) -> (VertexSeries, Option<VertexSeries>) {
        (self.series, self.phases)
    }
}

impl SeriesObserver for SeriesRecorder {
    fn observe(&mut self, frame: &Frame<'_>) {
        self.series.times.push(frame.t);
        for &v in &self.series.vertices {
            self.series.values.push(frame.values[v]);
        }
        if let (Some(ph), Some(theta)) = (self.phases.as_mut(), frame.phases) {
            ph.times.push(frame.t);
            for &v in &ph.vertices {
                ph.values.push(theta[v]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> VertexSeries {
        VertexSeries {
            kind: SeriesKind::QuantumProbability,
            times: vec![0, 1, 2],
            values: vec![0.25, 0.75, 0.5, 0.5, 1.0, 0.0],
            vertices: vec![3, 7],
            degrees: vec![2, 4],
            transient: 1,
            meta: SeriesMeta { graph_hash: "abc".into(), walk: "fourier".into(), seed: Some(4) },
        }
    }

    #[test]
    fn post_transient_skips_early_rows() {
        let s = sample();
        assert_eq!(s.post_transient(0), vec![0.5, 1.0]);
        assert_eq!(s.post_transient_len(), 2);
        assert_eq!(s.column_of(7), Some(1));
    }

    #[test]
    fn csv_layout_and_round_trip() {
        let s = sample();
        let text = String::from_utf8(s.to_csv().to_bytes()).unwrap();
        assert!(text.starts_with("t,v3,v7\n0,0.25,0.75\n"));
        let dir = std::env::temp_dir().join(format!("qxe-series-{}", std::process::id()));
        let path = dir.join("s.csv");
        s.save(&path).unwrap();
        let back = VertexSeries::load(&path).unwrap();
        assert_eq!(back, s);
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn recorder_selects_vertices() {
        let mut rec = SeriesRecorder::new(SeriesKind::ClassicalCount, vec![1], vec![2], 0, SeriesMeta::default());
        rec.observe(&Frame { t: 0, values: &[5.0, 6.0, 7.0], phases: None, state: None });
        rec.observe(&Frame { t: 1, values: &[1.0, 2.0, 3.0], phases: None, state: None });
        let (s, ph) = rec.finish();
        assert!(ph.is_none());
        assert_eq!(s.values, vec![6.0, 2.0]);
    }
}
