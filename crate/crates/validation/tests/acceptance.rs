//! Acceptance suite: one PASS/FAIL line per criterion and a nonzero exit
//! status if any fails. Runs every pipeline at full size, which takes a few
//! minutes on one core.

use std::f64::consts::TAU;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use num_complex::Complex64 as C64;

use qxe::graphs::{build_ring, build_scale_free_capped, Graph};
use qxe::operators::{CoinSpec, WalkOperator};
use qxe::qdyn::{localized_state, vertex_probabilities_into, Evolution};
use qxe::spectral::{
    eigendecompose, eigenphase_spacing_density, limiting_distribution, offdiagonal_signal, time_average_error_bound, SpectralData,
    DEFAULT_DEGENERACY_TOL,
};
use qxe_runner::config::DEFAULT_MASTER_SEED;
use qxe_runner::presets::{self, PresetContext, ScaleFreeWalk};
use qxe_runner::seeds::derive_seed;

// Reference values of the study being reproduced.
const QUANTUM_SIGMA: [f64; 3] = [0.149e-2, 0.078e-2, 0.061e-2];
const QUANTUM_F: [f64; 3] = [0.0202, 0.0135, 0.0109];
const MEAN_OCCUPATION: f64 = 1.372e-3;
const INTEGER_TAIL: f64 = 0.1283;

type Outcome = Result<(bool, String), String>;

struct Suite {
    failed: usize,
    total: usize,
}

impl Suite {
    fn report(&mut self, name: &str, outcome: Outcome) {
        self.total += 1;
        let (pass, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        if !pass {
            self.failed += 1;
        }
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn sf_graph(ctx: &PresetContext) -> Result<Graph, String> {
    let cfg = presets::scale_free_config(ScaleFreeWalk::Fourier, ctx.seed);
    cfg.build_graph().map_err(err)
}

// ---------------------------------------------------------------------------

fn conservation(g: &Graph, steps: usize) -> Result<(f64, f64, Duration), String> {
    let started = Instant::now();
    let op = WalkOperator::new(g.clone(), CoinSpec::fourier()).map_err(err)?;
    let mut evo = Evolution::new(&op, &localized_state(g, 0).map_err(err)?, None).map_err(err)?;
    let mut z = vec![0.0; g.vertex_count()];
    let (mut norm_dev, mut sum_dev) = (0.0f64, 0.0f64);
    for _ in 0..=steps {
        let norm: f64 = evo.amplitudes().iter().map(|a| a.norm_sqr()).sum();
        vertex_probabilities_into(g, evo.amplitudes(), &mut z);
        norm_dev = norm_dev.max((norm - 1.0).abs());
        sum_dev = sum_dev.max((z.iter().sum::<f64>() - 1.0).abs());
        evo.advance();
    }
    Ok((norm_dev, sum_dev, started.elapsed()))
}

fn unitarity(ctx: &PresetContext) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for (label, g) in [("ring 729", build_ring(729).map_err(err)?), ("SF 1000", sf_graph(ctx)?)] {
        let (n, s, t) = conservation(&g, 10_000)?;
        pass &= n <= 1e-9 && s <= 1e-9 && t < Duration::from_secs(60);
        detail.push(format!("{label}: |norm-1| {n:.1e}, |sum z-1| {s:.1e}, {:.1}s", t.as_secs_f64()));
    }
    Ok((pass, detail.join("; ")))
}

fn small_graphs(seed: u64) -> Result<Vec<Graph>, String> {
    let mut out: Vec<Graph> = (3..=8).map(|n| build_ring(n).map_err(err)).collect::<Result<_, _>>()?;
    for n in [8, 10, 12, 14, 16, 20] {
        let g = build_scale_free_capped(n, 2.3, 2, 4, derive_seed(seed, &format!("small-sf-{n}"))).map_err(err)?;
        if g.arc_count() <= 64 {
            out.push(g);
        }
    }
    Ok(out)
}

fn oracle_equivalence(ctx: &PresetContext) -> Outcome {
    let graphs = small_graphs(ctx.seed)?;
    let (mut amp_dev, mut z_dev) = (0.0f64, 0.0f64);
    for g in &graphs {
        let op = WalkOperator::new(g.clone(), CoinSpec::fourier()).map_err(err)?;
        let u = op.dense_unitary(None).map_err(err)?;
        let d = g.arc_count();
        let x = localized_state(g, 0).map_err(err)?;
        let mut dense: Vec<C64> = x.amplitudes().to_vec();
        let mut evo = Evolution::new(&op, &x, None).map_err(err)?;
        let mut z = vec![0.0; g.vertex_count()];
        for _ in 0..20 {
            dense = (0..d).map(|i| (0..d).map(|j| u[(i, j)] * dense[j]).sum()).collect();
            evo.advance();
            for (a, b) in evo.amplitudes().iter().zip(&dense) {
                amp_dev = amp_dev.max((a - b).norm());
            }
            // <x|(U^t)* D_v U^t|x> with D_v the projector on the arcs leaving v
            vertex_probabilities_into(g, evo.amplitudes(), &mut z);
            for (v, zv) in z.iter().enumerate() {
                let form: f64 = g.arcs(v).map(|a| dense[a].norm_sqr()).sum();
                z_dev = z_dev.max((form - zv).abs());
            }
        }
    }
    Ok((
        amp_dev <= 1e-10 && z_dev <= 1e-12,
        format!("{} graphs, amplitude deviation {amp_dev:.1e}, z deviation {z_dev:.1e}", graphs.len()),
    ))
}

fn table1_classical(r: &presets::Table1Result) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for row in &r.rows {
        // the vertex average of the occupation is exactly 1/N at every step,
        // so only rounding separates it from the Bernoulli mean
        let mean_ok = (row.classical_mean - r.bernoulli_mean).abs() <= 3.0 * row.classical_mean_se + 1e-12 * r.bernoulli_mean;
        let sigma_ok = (row.classical_sigma - r.bernoulli_sigma).abs() <= 3.0 * row.classical_sigma_se;
        pass &= mean_ok && sigma_ok;
        detail.push(format!(
            "{}: mean {:.4e} (se {:.1e}) sigma {:.5e} (se {:.1e}, z {:.2})",
            row.lattice,
            row.classical_mean,
            row.classical_mean_se,
            row.classical_sigma,
            row.classical_sigma_se,
            (row.classical_sigma - r.bernoulli_sigma) / row.classical_sigma_se
        ));
    }
    Ok((pass, format!("Bernoulli sigma {:.5e}; {}", r.bernoulli_sigma, detail.join("; "))))
}

fn table1_quantum(r: &presets::Table1Result) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for (row, reference) in r.rows.iter().zip(QUANTUM_SIGMA) {
        let ratio = row.quantum_sigma / reference;
        pass &= (row.quantum_mean - MEAN_OCCUPATION).abs() <= 0.1 * MEAN_OCCUPATION && (1.0 / 1.5..=1.5).contains(&ratio);
        detail.push(format!("{}: <z> {:.4e} sigma {:.3e} (x{ratio:.2})", row.lattice, row.quantum_mean, row.quantum_sigma));
    }
    let decreasing = r.rows.windows(2).all(|w| w[1].quantum_sigma < w[0].quantum_sigma);
    Ok((pass && decreasing, format!("{}; decreasing {decreasing}", detail.join("; "))))
}

/// Largest `|T-average - limit|` at `t`, and the envelopes of that error
/// over `[t, 2t)` and `[2t, 4t)`.
fn convergence(g: &Graph, t: usize) -> Result<(f64, f64, f64, f64, bool), String> {
    let op = WalkOperator::new(g.clone(), CoinSpec::fourier()).map_err(err)?;
    let sd = eigendecompose(&op.dense_unitary(None).map_err(err)?, DEFAULT_DEGENERACY_TOL).map_err(err)?;
    let x = localized_state(g, 0).map_err(err)?;
    let limit = limiting_distribution(&sd, &x, g).map_err(err)?;
    let bound = (0..g.vertex_count())
        .map(|v| time_average_error_bound(&sd, &x, v, g))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?
        .into_iter()
        .fold(0.0, f64::max);
    let n = g.vertex_count();
    let mut sums = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut evo = Evolution::new(&op, &x, None).map_err(err)?;
    let (mut at_t, mut first, mut second) = (0.0, 0.0f64, 0.0f64);
    for step in 1..4 * t {
        vertex_probabilities_into(g, evo.amplitudes(), &mut z);
        for v in 0..n {
            sums[v] += z[v];
        }
        evo.advance();
        if step >= t {
            let e = (0..n).map(|v| (sums[v] / step as f64 - limit[v]).abs()).fold(0.0, f64::max);
            if step == t {
                at_t = e;
            }
            if step < 2 * t {
                first = first.max(e);
            } else {
                second = second.max(e);
            }
        }
    }
    Ok((at_t, bound / t as f64, first, second, sd.is_degenerate()))
}

fn eq5(ctx: &PresetContext) -> Outcome {
    // first derived seed giving a non-degenerate spectrum
    let mut sf = None;
    for i in 0..100 {
        let g = build_scale_free_capped(20, 2.3, 2, 4, derive_seed(ctx.seed, &format!("sf-20-{i}"))).map_err(err)?;
        let op = WalkOperator::new(g.clone(), CoinSpec::fourier()).map_err(err)?;
        let sd = eigendecompose(&op.dense_unitary(None).map_err(err)?, DEFAULT_DEGENERACY_TOL).map_err(err)?;
        if !sd.is_degenerate() {
            sf = Some(g);
            break;
        }
    }
    let sf = sf.ok_or("no non-degenerate 20-vertex graph among 100 seeds")?;
    let t = 100_000;
    let mut pass = true;
    let mut detail = Vec::new();
    for (label, g) in [("ring 3", build_ring(3).map_err(err)?), ("SF 20", sf)] {
        let (e, b, first, second, degenerate) = convergence(&g, t)?;
        let ratio = second / first;
        pass &= e <= 5e-3 && e <= b && (0.35..=0.65).contains(&ratio);
        detail.push(format!(
            "{label}{}: error at 1e5 {e:.2e} (bound {b:.2e}), envelope ratio {ratio:.3}",
            if degenerate { " (degenerate)" } else { "" }
        ));
    }
    Ok((pass, detail.join("; ")))
}

fn flux(r: &presets::Fig2Result) -> Outcome {
    let f = &r.fourier;
    let ratio = f.fit.slope / f.predicted_slope;
    let pass = f.worst_relative_deviation <= 0.15 && (1.0..=1.2).contains(&ratio);
    Ok((
        pass,
        format!(
            "2E {}; worst class-mean deviation {:.1}%; slope {:.4e} vs 1/sqrt(2E) {:.4e} (ratio {ratio:.3})",
            f.two_e,
            100.0 * f.worst_relative_deviation,
            f.fit.slope,
            f.predicted_slope
        ),
    ))
}

fn grover(r: &presets::Fig2Result) -> Outcome {
    let ratio = r.grover.fit.relative_residual / r.fourier.fit.relative_residual;
    let pass = ratio >= 3.0 && r.grover.worst_sigma_deviation > 5.0;
    Ok((
        pass,
        format!(
            "residual ratio {ratio:.2} (need >= 3); largest class deviation {:.2} predicted sigma (need > 5)",
            r.grover.worst_sigma_deviation
        ),
    ))
}

/// `P(w > q)` for `w ~ Binomial(walkers, p)`, summing the pmf upwards.
fn binomial_tail(walkers: u32, p: f64, q: f64) -> f64 {
    let mut pmf = (1.0 - p).powi(walkers as i32);
    let mut tail = 0.0;
    for w in 0..=walkers {
        if w as f64 > q {
            tail += pmf;
        }
        pmf *= (walkers - w) as f64 / (w + 1) as f64 * p / (1.0 - p);
    }
    tail
}

/// Vertex average of the binomial tail at each vertex's recorded threshold.
fn binomial_oracle(path: &std::path::Path) -> Result<f64, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let tails: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|line| line.split(',').nth(2).and_then(|q| q.parse::<f64>().ok()).map(|q| binomial_tail(100, 1.0 / 729.0, q)))
        .collect::<Option<_>>()
        .ok_or("malformed exceedance table")?;
    Ok(tails.iter().sum::<f64>() / tails.len() as f64)
}

fn table2(r: &presets::Table2Result, dir: &std::path::Path) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for row in &r.rows {
        let oracle = binomial_oracle(&dir.join(format!("ee_lattice_{}_crw.csv", row.lattice)))?;
        pass &= (oracle - row.binomial_f).abs() <= 1e-12;
        let z = (row.classical_f - row.binomial_f) / row.classical_se;
        pass &= z.abs() <= 3.0;
        detail.push(format!("{} classical {:.5} vs binomial {:.5} (z {z:.2})", row.lattice, row.classical_f, row.binomial_f));
    }
    let tail = 1.0 - (1.0 - 1.0f64 / 729.0).powi(100);
    let tail_ok = (tail * 1e4).round() / 1e4 == INTEGER_TAIL && (tail - r.integer_tail).abs() <= 1e-12;
    detail.push(format!("P(w>=1) {:.4}", r.integer_tail));
    for (row, reference) in r.rows.iter().zip(QUANTUM_F) {
        let ok = (row.quantum_f - reference).abs() <= 0.3 * reference;
        pass &= ok;
        detail.push(format!("{} quantum {:.4}", row.lattice, row.quantum_f));
    }
    let decreasing = r.rows.windows(2).all(|w| w[1].quantum_f < w[0].quantum_f);
    Ok((pass && tail_ok && decreasing, format!("{}; decreasing {decreasing}", detail.join("; "))))
}

fn fig3(r: &presets::Fig3Result, elapsed: Duration) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for m in [0.0, 1.0, 2.0, 3.0] {
        let expected = 0.17 - 0.09 * m;
        match r.profile(m) {
            Some(p) => {
                pass &= (p.gamma - expected).abs() <= 0.10;
                detail.push(format!("gamma_{m} {:.3} (target {expected:.2})", p.gamma));
            }
            None => {
                pass = false;
                detail.push(format!("gamma_{m} missing"));
            }
        }
    }
    // decreasing: negative fitted exponent and the lowest fitted degree class
    // above the highest one
    let decreasing = r.profile(3.0).is_some_and(|p| {
        let first = p.points.iter().find(|pt| Some(&pt.degree) == p.fitted_degrees.first());
        let last = p.points.iter().find(|pt| Some(&pt.degree) == p.fitted_degrees.last());
        p.gamma < 0.0 && matches!((first, last), (Some(a), Some(b)) if a.mean > b.mean)
    });
    let spread = r.collapse.as_ref().map_or(f64::INFINITY, |c| c.spread);
    pass &= decreasing && spread < 0.25 && elapsed < Duration::from_secs(1800);
    detail.push(format!("F(k) decreasing at m=3 {decreasing}; collapse spread {spread:.3}; {:.0}s", elapsed.as_secs_f64()));
    Ok((pass, detail.join("; ")))
}

fn fig45(r: &presets::Fig45Result) -> Outcome {
    let decay_ok = r.decay.as_ref().is_some_and(|d| d.r_squared > 0.8 && d.rate > 0.0);
    let decay = match (&r.decay, &r.decay_error) {
        (Some(d), _) => format!("SF decay rate {:.3} r2 {:.3} over {} lags", d.rate, d.r_squared, d.window),
        (None, Some(e)) => format!("SF decay fit failed: {e}"),
        _ => "no decay fit".into(),
    };
    let tail_ok = r.ring.auto_tail > r.scale_free.auto_tail;
    let phase_ok = r.scale_free.phase_cross_max > r.scale_free.null_band && r.ring.phase_cross_max > r.ring.null_band;
    Ok((
        decay_ok && tail_ok && phase_ok,
        format!(
            "{decay}; large-lag |C00| ring {:.3} vs SF {:.3}; phase C01 max SF {:.3} ring {:.3} vs band {:.4}",
            r.ring.auto_tail, r.scale_free.auto_tail, r.scale_free.phase_cross_max, r.ring.phase_cross_max, r.scale_free.null_band
        ),
    ))
}

fn recurrence(walks: &[presets::WalkRecurrence]) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for w in walks {
        let p = w.target.fit.as_ref().map_or(f64::NAN, |f| f.p_value);
        pass &= p > 0.01 && w.renewal_failures.is_empty();
        detail.push(format!(
            "{}: vertex {} (k={}) chi2 p {p:.2e}; mean interval within 20% of 1/F at {}/{} vertices; {}/{} vertex fits pass",
            w.walk,
            w.target.vertex,
            w.target.degree,
            w.renewal_checked - w.renewal_failures.len(),
            w.renewal_checked,
            w.fits_passed,
            w.fits_tested
        ));
    }
    Ok((pass, detail.join("; ")))
}

fn pair_counts(phases: &[f64], bins: usize) -> Vec<u64> {
    let width = TAU / bins as f64;
    let mut counts = vec![0u64; bins];
    for (r, a) in phases.iter().enumerate() {
        for (s, b) in phases.iter().enumerate() {
            if r != s {
                let mut omega = b - a;
                while omega < 0.0 {
                    omega += TAU;
                }
                while omega >= TAU {
                    omega -= TAU;
                }
                let mut k = 0;
                while k + 1 < bins && omega >= (k + 1) as f64 * width {
                    k += 1;
                }
                counts[k] += 1;
            }
        }
    }
    counts
}

fn omega(ctx: &PresetContext) -> Outcome {
    let mut cases: Vec<(String, SpectralData)> = Vec::new();
    let sf20 = build_scale_free_capped(20, 2.3, 2, 4, derive_seed(ctx.seed, "sf-20-0")).map_err(err)?;
    let sf100 = build_scale_free_capped(100, 2.3, 2, 10, derive_seed(ctx.seed, "sf-100")).map_err(err)?;
    for (label, g, coin) in [
        ("ring 3 fourier", build_ring(3).map_err(err)?, CoinSpec::fourier()),
        ("SF 20 fourier", sf20.clone(), CoinSpec::fourier()),
        ("SF 20 grover", sf20, CoinSpec::Grover),
        ("SF 100 fourier", sf100, CoinSpec::fourier()),
    ] {
        let op = WalkOperator::new(g, coin).map_err(err)?;
        let sd = eigendecompose(&op.dense_unitary(None).map_err(err)?, DEFAULT_DEGENERACY_TOL).map_err(err)?;
        cases.push((label.to_string(), sd));
    }
    let mut pass = true;
    let mut max_im = 0.0f64;
    for (_, sd) in &cases {
        let m = sd.dimension() as f64;
        for bins in [16, 64] {
            let h = eigenphase_spacing_density(sd, bins).map_err(err)?;
            pass &= h.counts == pair_counts(&sd.snapped_phases(), bins);
        }
        pass &= offdiagonal_signal(sd, 0) == C64::new(m * m - m, 0.0);
        for t in 0..=100 {
            max_im = max_im.max(offdiagonal_signal(sd, t).im.abs());
        }
    }
    pass &= max_im <= 1e-9;
    let labels: Vec<&str> = cases.iter().map(|(l, _)| l.as_str()).collect();
    Ok((pass, format!("{}; largest imaginary part {max_im:.1e}", labels.join(", "))))
}

fn main() {
    // test listers expect a harness; report no unit tests
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let seed = DEFAULT_MASTER_SEED;
    let root = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let ctx = |name: &str| PresetContext::new(root.join(name), seed);
    let sf_ctx = ctx("scale_free");
    let mut suite = Suite { failed: 0, total: 0 };

    suite.report("unitarity and conservation", unitarity(&sf_ctx));
    suite.report("oracle equivalence", oracle_equivalence(&sf_ctx));

    let t1 = presets::table1(&ctx("table1")).map_err(err);
    suite.report("table 1 classical", t1.as_ref().map_err(Clone::clone).and_then(table1_classical));
    suite.report("table 1 quantum", t1.as_ref().map_err(Clone::clone).and_then(table1_quantum));

    suite.report("time-average convergence", eq5(&sf_ctx));

    let started = Instant::now();
    let fourier = presets::scale_free_run(&sf_ctx, ScaleFreeWalk::Fourier).map_err(err);
    let fourier_time = started.elapsed();
    let grover_run = presets::scale_free_run(&sf_ctx, ScaleFreeWalk::Grover).map_err(err);
    let fig2 = match (&fourier, &grover_run) {
        (Ok(f), Ok(g)) => presets::fig2_from(f, g).map_err(err),
        (Err(e), _) | (_, Err(e)) => Err(e.clone()),
    };
    suite.report("flux-fluctuation relation", fig2.as_ref().map_err(Clone::clone).and_then(flux));
    suite.report("grover deviation", fig2.as_ref().map_err(Clone::clone).and_then(grover));

    let t2 = ctx("table2");
    suite.report("table 2", presets::table2(&t2).map_err(err).and_then(|r| table2(&r, &t2.out)));

    suite.report("degree profiles and collapse", fourier.as_ref().map_err(Clone::clone).and_then(|f| fig3(&presets::fig3_from(f, None), fourier_time)));

    suite.report("correlations", presets::fig45(&ctx("fig45")).map_err(err).and_then(|r| fig45(&r)));

    let noise = presets::scale_free_run(&sf_ctx, ScaleFreeWalk::FourierPhaseNoise).map_err(err);
    let walks = [(&fourier, "fourier"), (&noise, "fourier_noise"), (&grover_run, "grover")]
        .into_iter()
        .map(|(o, label)| o.as_ref().map_err(Clone::clone).and_then(|o| presets::recurrence_summary(o, label).map_err(err)))
        .collect::<Result<Vec<_>, _>>();
    suite.report("recurrence statistics", walks.and_then(|w| recurrence(&w)));

    suite.report("eigenphase spacing", omega(&sf_ctx));

    println!("{} of {} criteria passed; artifacts in {}", suite.total - suite.failed, suite.total, root.display());
    if suite.failed > 0 {
        std::process::exit(1);
    }
}
