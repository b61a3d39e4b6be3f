//! Arc-space state evolution and per-vertex observables.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graphs::Graph;
use crate::operators::WalkOperator;
use crate::series::{Frame, SeriesKind, SeriesMeta, SeriesObserver, SeriesRecorder, VertexSeries};

/// Tolerance on `||psi||^2 - 1` accepted by [`step`].
pub const STEP_NORM_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct ArcState {
    amplitudes: Vec<C64>,
}

impl ArcState {
    /// Wraps raw amplitudes; fails unless the norm is 1 within 1e-10.
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let s = ArcState { amplitudes };
        let dev = (s.norm_sqr() - 1.0).abs();
        if dev > 1e-10 {
            return Err(Error::Argument(format!("state norm deviates from 1 by {dev:.3e}")));
        }
        Ok(s)
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(C64::norm_sqr).sum()
    }

    /// Multiplies every amplitude by `exp(i phi)`.
    pub fn with_global_phase(&self, phi: f64) -> Self {
        let w = C64::from_polar(1.0, phi);
        ArcState { amplitudes: self.amplitudes.iter().map(|a| a * w).collect() }
    }
}

/// Equal real amplitudes `1/sqrt(k_v)` on the outgoing arcs of `v`.
pub fn localized_state(g: &Graph, v: usize) -> Result<ArcState> {
    if v >= g.vertex_count() {
        return Err(Error::Index { index: v, limit: g.vertex_count() });
    }
    let mut amplitudes = vec![C64::new(0.0, 0.0); g.arc_count()];
    let a = 1.0 / (g.degree(v) as f64).sqrt();
    for arc in g.arcs(v) {
        amplitudes[arc] = C64::new(a, 0.0);
    }
    Ok(ArcState { amplitudes })
}

/// All `2E` amplitudes equal to `1/sqrt(2E)`.
pub fn uniform_state(g: &Graph) -> ArcState {
    let m = g.arc_count();
    ArcState { amplitudes: vec![C64::new(1.0 / (m as f64).sqrt(), 0.0); m] }
}

fn randomize_phases<R: Rng>(amps: &mut [C64], rng: &mut R) {
    for a in amps.iter_mut() {
        let phi = rng.gen::<f64>() * TAU;
        *a *= C64::from_polar(1.0, phi);
    }
}

/// One application of `U = S C`, optionally followed by independent uniform
/// phases on every arc.
pub fn step<R: Rng>(op: &WalkOperator, state: &ArcState, phase_noise: Option<&mut R>) -> Result<ArcState> {
    if state.len() != op.dimension() {
        return Err(Error::Shape { expected: op.dimension(), got: state.len() });
    }
    let dev = (state.norm_sqr() - 1.0).abs();
    if dev > STEP_NORM_TOL {
        return Err(Error::Argument(format!("state norm deviates from 1 by {dev:.3e}")));
    }
    let mut out = vec![C64::new(0.0, 0.0); state.len()];
    op.apply(&state.amplitudes, &mut out);
    if let Some(rng) = phase_noise {
        randomize_phases(&mut out, rng);
    }
    Ok(ArcState { amplitudes: out })
}

pub fn vertex_probabilities_into(g: &Graph, amplitudes: &[C64], out: &mut [f64]) {
    for (v, z) in out.iter_mut().enumerate() {
        *z = amplitudes[g.arcs(v)].iter().map(C64::norm_sqr).sum();
    }
}

/// `z_v = sum of |psi_a|^2` over the outgoing arcs of `v`.
pub fn vertex_probabilities(g: &Graph, state: &ArcState) -> Vec<f64> {
    let mut out = vec![0.0; g.vertex_count()];
    vertex_probabilities_into(g, &state.amplitudes, &mut out);
    out
}

/// Vertex phases `arg(sum of psi_a over outgoing arcs)` in `(-pi, pi]`.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexPhases {
    pub theta: Vec<f64>,
    /// Vertices whose amplitude sum was exactly zero; their phase is set to 0.
    pub zero_sum: Vec<usize>,
}

fn phase_of(sum: C64) -> Option<f64> {
    if sum.re == 0.0 && sum.im == 0.0 {
        return None;
    }
    let th = sum.arg();
    // atan2 yields [-pi, pi]; fold -pi onto pi
    Some(if th <= -PI { PI } else { th })
}

pub fn vertex_phases_into(g: &Graph, amplitudes: &[C64], out: &mut [f64]) -> usize {
    let mut zeros = 0;
    for (v, th) in out.iter_mut().enumerate() {
        let sum: C64 = amplitudes[g.arcs(v)].iter().sum();
        *th = phase_of(sum).unwrap_or_else(|| {
            zeros += 1;
            0.0
        });
    }
    zeros
}

pub fn vertex_phases(g: &Graph, state: &ArcState) -> VertexPhases {
    let mut theta = Vec::with_capacity(g.vertex_count());
    let mut zero_sum = Vec::new();
    for v in 0..g.vertex_count() {
        let sum: C64 = state.amplitudes[g.arcs(v)].iter().sum();
        match phase_of(sum) {
            Some(th) => theta.push(th),
            None => {
                theta.push(0.0);
                zero_sum.push(v);
            }
        }
    }
    VertexPhases { theta, zero_sum }
}

/// Step-by-step driver holding the current state and an optional phase
/// noise stream.
pub struct Evolution<'a> {
    op: &'a WalkOperator,
    current: Vec<C64>,
    scratch: Vec<C64>,
    noise: Option<ChaCha8Rng>,
    t: usize,
}

impl<'a> Evolution<'a> {
    pub fn new(op: &'a WalkOperator, initial: &ArcState, phase_noise_seed: Option<u64>) -> Result<Self> {
        if initial.len() != op.dimension() {
            return Err(Error::Shape { expected: op.dimension(), got: initial.len() });
        }
        Ok(Evolution {
            op,
            current: initial.amplitudes.clone(),
            scratch: vec![C64::new(0.0, 0.0); initial.len()],
            noise: phase_noise_seed.map(ChaCha8Rng::seed_from_u64),
            t: 0,
        })
    }

    pub fn time(&self) -> usize {
        self.t
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.current
    }

    pub fn state(&self) -> ArcState {
        ArcState { amplitudes: self.current.clone() }
    }

    pub fn advance(&mut self) {
        self.op.apply(&self.current, &mut self.scratch);
        if let Some(rng) = self.noise.as_mut() {
            randomize_phases(&mut self.scratch, rng);
        }
        std::mem::swap(&mut self.current, &mut self.scratch);
        self.t += 1;
    }

    /// Emits frames for `t = now .. now + steps`, advancing after each one.
    /// `with_state` also exposes the raw amplitudes in each frame.
    pub fn run(&mut self, steps: usize, with_phases: bool, with_state: bool, observer: &mut dyn SeriesObserver) {
        let g = self.op.graph();
        let mut z = vec![0.0; g.vertex_count()];
        let mut theta = vec![0.0; if with_phases { g.vertex_count() } else { 0 }];
        for _ in 0..steps {
            vertex_probabilities_into(g, &self.current, &mut z);
            if with_phases {
                vertex_phases_into(g, &self.current, &mut theta);
            }
            observer.observe(&Frame {
                t: self.t,
                values: &z,
                phases: with_phases.then_some(theta.as_slice()),
                state: with_state.then_some(self.current.as_slice()),
            });
            self.advance();
        }
    }
}

/// Options for [`evolve_record`].
#[derive(Clone, Debug, Default)]
pub struct RecordOptions {
    pub horizon: usize,
    pub transient: usize,
    pub vertices: Vec<usize>,
    pub record_phase: bool,
    pub phase_noise_seed: Option<u64>,
}

/// Probability series (and optionally the phase series) at the selected
/// vertices for `t = 0 .. horizon`.
pub fn evolve_record(
    op: &WalkOperator,
    initial: &ArcState,
    opts: &RecordOptions,
) -> Result<(VertexSeries, Option<VertexSeries>)> {
    if opts.vertices.is_empty() {
        return Err(Error::Argument("no vertices selected for recording".into()));
    }
    if opts.horizon <= opts.transient {
        return Err(Error::Argument(format!(
            "horizon {} must exceed transient {}",
            opts.horizon, opts.transient
        )));
    }
    let g = op.graph();
    if let Some(&v) = opts.vertices.iter().find(|&&v| v >= g.vertex_count()) {
        return Err(Error::Index { index: v, limit: g.vertex_count() });
    }
    let degrees = opts.vertices.iter().map(|&v| g.degree(v)).collect();
    let meta = SeriesMeta {
        graph_hash: g.fingerprint(),
        walk: match opts.phase_noise_seed {
            Some(_) => format!("{}+phase-noise", op.coin().name()),
            None => op.coin().name().to_string(),
        },
        seed: opts.phase_noise_seed,
    };
    let mut rec = SeriesRecorder::new(SeriesKind::QuantumProbability, opts.vertices.clone(), degrees, opts.transient, meta);
    if opts.record_phase {
        rec = rec.with_phases();
    }
    let mut evo = Evolution::new(op, initial, opts.phase_noise_seed)?;
    evo.run(opts.horizon, opts.record_phase, false, &mut rec);
    Ok(rec.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{build_ring, build_scale_free};
    use crate::operators::CoinSpec;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn localized_on_ring() {
        let g = build_ring(3).unwrap();
        let s = localized_state(&g, 0).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert_eq!(s.amplitudes(), &[c(h, 0.0), c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(localized_state(&g, 3), Err(Error::Index { .. })));
    }

    #[test]
    fn localized_on_scale_free_vertex() {
        let g = build_scale_free(300, 2.3, 2, 4).unwrap();
        let v = (0..g.vertex_count()).find(|&v| g.degree(v) == 5).expect("degree-5 vertex");
        let s = localized_state(&g, v).unwrap();
        let nonzero: Vec<_> = s.amplitudes().iter().filter(|a| a.norm() > 0.0).collect();
        assert_eq!(nonzero.len(), 5);
        for a in nonzero {
            assert!((a.re - 1.0 / 5f64.sqrt()).abs() < 1e-16 && a.im == 0.0);
        }
        let z = vertex_probabilities(&g, &s);
        assert!((z[v] - 1.0).abs() < 1e-15);
        assert!((z.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_state_probabilities() {
        let g = build_ring(3).unwrap();
        let s = uniform_state(&g);
        assert!(s.amplitudes().iter().all(|a| *a == c(1.0 / 6f64.sqrt(), 0.0)));
        let g = build_scale_free(100, 2.3, 2, 2).unwrap();
        let s = uniform_state(&g);
        let z = vertex_probabilities(&g, &s);
        for v in 0..g.vertex_count() {
            assert!((z[v] - g.degree(v) as f64 / g.arc_count() as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn phases_of_localized_and_rotated_states() {
        let g = build_ring(7).unwrap();
        let s = localized_state(&g, 0).unwrap();
        let ph = vertex_phases(&g, &s);
        assert_eq!(ph.theta[0], 0.0);
        assert_eq!(ph.zero_sum, (1..7).collect::<Vec<_>>());

        let op = WalkOperator::new(g.clone(), CoinSpec::fourier()).unwrap();
        let mut evo = Evolution::new(&op, &s, None).unwrap();
        for _ in 0..5 {
            evo.advance();
        }
        let s5 = evo.state();
        let before = vertex_phases(&g, &s5);
        let after = vertex_phases(&g, &s5.with_global_phase(PI / 3.0));
        for v in 0..7 {
            let sum: C64 = s5.amplitudes()[g.arcs(v)].iter().sum();
            if sum.norm() < 1e-9 {
                continue;
            }
            let d = (after.theta[v] - before.theta[v] - PI / 3.0).rem_euclid(TAU);
            assert!(d < 1e-12 || TAU - d < 1e-12, "vertex {v}: {} -> {}", before.theta[v], after.theta[v]);
            assert!(after.theta[v] > -PI && after.theta[v] <= PI);
        }
    }

    #[test]
    fn step_checks_shape_and_norm() {
        let op = WalkOperator::new(build_ring(4).unwrap(), CoinSpec::Grover).unwrap();
        let small = uniform_state(&build_ring(3).unwrap());
        assert!(matches!(step::<ChaCha8Rng>(&op, &small, None), Err(Error::Shape { .. })));
        let s = localized_state(op.graph(), 1).unwrap();
        let next = step::<ChaCha8Rng>(&op, &s, None).unwrap();
        assert!((next.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phase_noise_is_reproducible() {
        let g = build_scale_free(80, 2.3, 2, 8).unwrap();
        let op = WalkOperator::new(g.clone(), CoinSpec::fourier()).unwrap();
        let s0 = localized_state(&g, 0).unwrap();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let mut s = s0.clone();
            for _ in 0..50 {
                s = step(&op, &s, Some(&mut rng)).unwrap();
            }
            s
        };
        let (a, b) = (run(), run());
        assert_eq!(a, b);
        assert!((a.norm_sqr() - 1.0).abs() < 1e-12);
        let plain = {
            let mut s = s0.clone();
            for _ in 0..50 {
                s = step::<ChaCha8Rng>(&op, &s, None).unwrap();
            }
            s
        };
        assert_ne!(a, plain);
    }

    #[test]
    fn record_rows_sum_to_one_and_repeat() {
        let g = build_ring(3).unwrap();
        let op = WalkOperator::new(g.clone(), CoinSpec::fourier()).unwrap();
        let s0 = localized_state(&g, 0).unwrap();
        let opts = RecordOptions { horizon: 10, transient: 0, vertices: vec![0, 1, 2], record_phase: true, phase_noise_seed: Some(3) };
        let (z, th) = evolve_record(&op, &s0, &opts).unwrap();
        assert_eq!(z.len(), 10);
        for r in 0..10 {
            assert!((z.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let (z2, th2) = evolve_record(&op, &s0, &opts).unwrap();
        assert_eq!(z, z2);
        assert_eq!(th, th2);
        assert_eq!(th.unwrap().kind, SeriesKind::QuantumPhase);

        let bad = RecordOptions { vertices: vec![], ..opts.clone() };
        assert!(evolve_record(&op, &s0, &bad).is_err());
        let bad = RecordOptions { horizon: 5, transient: 5, ..opts };
        assert!(evolve_record(&op, &s0, &bad).is_err());
    }
}
