//! Classical random walkers and their analytic baselines.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::graphs::Graph;
use crate::series::{Frame, SeriesKind, SeriesMeta, SeriesObserver, SeriesRecorder, VertexSeries};

/// `W` independent walkers moving synchronously to uniform random neighbours.
pub struct ClassicalEnsemble {
    graph: Arc<Graph>,
    positions: Vec<usize>,
    counts: Vec<u32>,
    rng: ChaCha8Rng,
    t: usize,
}

impl ClassicalEnsemble {
    pub fn new(graph: impl Into<Arc<Graph>>, walkers: usize, start: usize, seed: u64) -> Result<Self> {
        let graph = graph.into();
        if walkers == 0 {
            return Err(Error::Argument("need at least one walker".into()));
        }
        if start >= graph.vertex_count() {
            return Err(Error::Index { index: start, limit: graph.vertex_count() });
        }
        let mut counts = vec![0u32; graph.vertex_count()];
        counts[start] = walkers as u32;
        Ok(ClassicalEnsemble {
            graph,
            positions: vec![start; walkers],
            counts,
            rng: ChaCha8Rng::seed_from_u64(seed),
            t: 0,
        })
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn time(&self) -> usize {
        self.t
    }

    pub fn advance(&mut self) {
        let g = &*self.graph;
        for p in self.positions.iter_mut() {
            let nbrs = g.neighbors(*p);
            let next = nbrs[self.rng.gen_range(0..nbrs.len())];
            self.counts[*p] -= 1;
            self.counts[next] += 1;
            *p = next;
        }
        self.t += 1;
    }

    /// Emits count frames for `t = now .. now + steps`.
    pub fn run(&mut self, steps: usize, observer: &mut dyn SeriesObserver) {
        let mut buf = vec![0.0; self.counts.len()];
        for _ in 0..steps {
            for (b, &c) in buf.iter_mut().zip(&self.counts) {
                *b = c as f64;
            }
            observer.observe(&Frame { t: self.t, values: &buf, phases: None, state: None });
            self.advance();
        }
    }
}

/// Counts series `w_i(t)` at every vertex for `t = 0 .. horizon`.
pub fn simulate_crw(
    g: &Graph,
    walkers: usize,
    horizon: usize,
    transient: usize,
    start: usize,
    seed: u64,
) -> Result<VertexSeries> {
    if horizon <= transient {
        return Err(Error::Argument(format!("horizon {horizon} must exceed transient {transient}")));
    }
    let mut ens = ClassicalEnsemble::new(g.clone(), walkers, start, seed)?;
    let meta = SeriesMeta { graph_hash: g.fingerprint(), walk: format!("crw:W={walkers}"), seed: Some(seed) };
    let vertices: Vec<usize> = (0..g.vertex_count()).collect();
    let mut rec = SeriesRecorder::new(SeriesKind::ClassicalCount, vertices, g.degrees(), transient, meta);
    ens.run(horizon, &mut rec);
    Ok(rec.finish().0)
}

/// `W k_i / 2E` for every vertex.
pub fn stationary_mean(g: &Graph, walkers: usize) -> Vec<f64> {
    let two_e = g.arc_count() as f64;
    (0..g.vertex_count()).map(|v| walkers as f64 * g.degree(v) as f64 / two_e).collect()
}

/// `P(w > q)` for `w ~ Binomial(W, p)`.
pub fn binomial_exceedance(walkers: usize, p: f64, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Argument(format!("probability {p} outside [0, 1]")));
    }
    if walkers == 0 {
        return Err(Error::Argument("need at least one walker".into()));
    }
    let first = if q < 0.0 { 0 } else { q.floor() as u64 + 1 };
    if first > walkers as u64 {
        return Ok(0.0);
    }
    if p == 0.0 {
        return Ok(if first == 0 { 1.0 } else { 0.0 });
    }
    if p == 1.0 {
        return Ok(1.0);
    }
    let n = walkers as u64;
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let tail: f64 = (first..=n)
        .map(|w| (ln_binomial(n, w) + w as f64 * lp + (n - w) as f64 * lq).exp())
        .sum();
    Ok(tail.min(1.0))
}
