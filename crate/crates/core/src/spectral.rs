//! Dense spectral analysis of the walk unitary.
//!
//! The eigensolver exploits normality: for a unitary `R` and any angle `a`,
//! `H = cos(a) (R + R^dagger)/2 + sin(a) (R - R^dagger)/2i` is Hermitian and
//! shares the eigenvectors of `R`, with eigenvalue `cos(theta - a)` for the
//! eigenphase `theta`. A Hermitian solve therefore yields orthonormal
//! eigenvectors even inside degenerate eigenspaces. Distinct phases that
//! land on (nearly) equal values of `H` are separated by restricting `R` to
//! the span of that cluster and repeating with a different angle.

use std::f64::consts::{PI, TAU};

use faer::{Mat, Side};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::graphs::Graph;
use crate::io::{fmt_f64, CsvTable};
use crate::qdyn::ArcState;

pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-8;

/// Max-norm bound on `U^dagger U - I` for input matrices.
pub const INPUT_UNITARITY_TOL: f64 = 1e-10;

/// Bound on `||U v - exp(i theta) v||` for accepted eigenpairs.
pub const RESIDUAL_TOL: f64 = 1e-8;

// Hermitian eigenvalues closer than this are refined as one cluster.
const CLUSTER_GAP: f64 = 1e-10;
// A restricted block within this max-norm of a scalar is a single eigenspace.
const SCALAR_BLOCK_TOL: f64 = 1e-11;
const SPLIT_ANGLES: [f64; 6] = [0.618_033_988_749_895, 2.236_067_977_499_79, 1.414_213_562_373_095, 0.301_029_995_663_981, 2.718_281_828_459_045, 1.732_050_807_568_877];

#[derive(Clone, Debug)]
pub struct SpectralData {
    /// Eigenphases in `(-pi, pi]`, ascending.
    pub phases: Vec<f64>,
    /// Column `r` is the unit eigenvector for `phases[r]`.
    pub vectors: Mat<C64>,
    /// Partition of eigen-indices into groups of equal phase.
    pub classes: Vec<Vec<usize>>,
    pub tolerance: f64,
}

fn fold_phase(theta: f64) -> f64 {
    if theta <= -PI {
        theta + TAU
    } else if theta > PI {
        theta - TAU
    } else {
        theta
    }
}

/// Shortest distance between two angles on the circle.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

pub fn unitarity_defect(u: &Mat<C64>) -> f64 {
    let prod = u.adjoint() * u;
    let mut worst = 0.0f64;
    for i in 0..prod.nrows() {
        for j in 0..prod.ncols() {
            let target = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            worst = worst.max((prod[(i, j)] - target).norm());
        }
    }
    worst
}

fn hermitian_part(r: &Mat<C64>, angle: f64) -> Mat<C64> {
    let (ca, sa) = (angle.cos(), angle.sin());
    let n = r.nrows();
    Mat::from_fn(n, n, |i, j| {
        let a = r[(i, j)];
        let b = r[(j, i)].conj();
        // cos * (a + b)/2 + sin * (a - b)/(2i)
        let re_part = (a + b) * 0.5;
        let im_part = (a - b) * C64::new(0.0, -0.5);
        re_part * ca + im_part * sa
    })
}

/// Orthonormal eigenvectors of the unitary `u` restricted to the invariant
/// subspace spanned by the columns of `basis`, returned as columns of a
/// matrix in the full space.
fn split_subspace(u: &Mat<C64>, basis: Mat<C64>, depth: usize) -> Result<Vec<Mat<C64>>> {
    let m = basis.ncols();
    if m == 1 {
        return Ok(vec![basis]);
    }
    let restricted = basis.adjoint() * (u * &basis);
    let trace: C64 = (0..m).map(|i| restricted[(i, i)]).sum::<C64>() / m as f64;
    let mut off_scalar = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            let target = if i == j { trace } else { C64::new(0.0, 0.0) };
            off_scalar = off_scalar.max((restricted[(i, j)] - target).norm());
        }
    }
    if off_scalar <= SCALAR_BLOCK_TOL || depth >= SPLIT_ANGLES.len() {
        return Ok(vec![basis]);
    }

    let h = hermitian_part(&restricted, SPLIT_ANGLES[depth]);
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("Hermitian eigensolver failed: {e:?}")))?;
    let values: Vec<f64> = (0..m).map(|i| evd.S()[i].re).collect();
    let w = evd.U();

    let mut out = Vec::new();
    let mut start = 0;
    for end in 1..=m {
        if end < m && values[end] - values[end - 1] <= CLUSTER_GAP {
            continue;
        }
        let cols = end - start;
        let sub = Mat::from_fn(m, cols, |i, j| w[(i, start + j)]);
        let lifted = &basis * &sub;
        if cols == 1 {
            out.push(lifted);
        } else {
            out.extend(split_subspace(u, lifted, depth + 1)?);
        }
        start = end;
    }
    Ok(out)
}

/// Eigendecomposition of a dense unitary with degeneracy classes grouping
/// phases within `degeneracy_tol` (circular distance, single linkage).
pub fn eigendecompose(u: &Mat<C64>, degeneracy_tol: f64) -> Result<SpectralData> {
    let n = u.nrows();
    if n == 0 || u.ncols() != n {
        return Err(Error::Validation(format!("expected a square matrix, got {}x{}", u.nrows(), u.ncols())));
    }
    let defect = unitarity_defect(u);
    if !(defect <= INPUT_UNITARITY_TOL) {
        return Err(Error::Validation(format!("matrix is not unitary (defect {defect:.3e})")));
    }
    let identity = Mat::<C64>::from_fn(n, n, |i, j| if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
    let blocks = split_subspace(u, identity, 0)?;

    let mut pairs: Vec<(f64, Vec<C64>)> = Vec::with_capacity(n);
    for block in blocks {
        let ub = u * &block;
        for c in 0..block.ncols() {
            let lambda: C64 = (0..n).map(|i| block[(i, c)].conj() * ub[(i, c)]).sum();
            let theta = fold_phase(lambda.arg());
            let e = C64::from_polar(1.0, theta);
            let residual = (0..n).map(|i| (ub[(i, c)] - e * block[(i, c)]).norm_sqr()).sum::<f64>().sqrt();
            if residual > RESIDUAL_TOL {
                return Err(Error::Numerical(format!("eigenpair residual {residual:.3e} exceeds {RESIDUAL_TOL:e}")));
            }
            pairs.push((theta, (0..n).map(|i| block[(i, c)]).collect()));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let phases: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let vectors = Mat::from_fn(n, n, |i, r| pairs[r].1[i]);
    let classes = group_phases(&phases, degeneracy_tol);
    Ok(SpectralData { phases, vectors, classes, tolerance: degeneracy_tol })
}

/// Single-linkage grouping of sorted phases on the circle.
fn group_phases(sorted: &[f64], tol: f64) -> Vec<Vec<usize>> {
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for (i, &th) in sorted.iter().enumerate() {
        match classes.last_mut() {
            Some(last) if circular_distance(sorted[*last.last().expect("non-empty")], th) <= tol => last.push(i),
            _ => classes.push(vec![i]),
        }
    }
    if classes.len() > 1 {
        let first = sorted[0];
        let last = sorted[sorted.len() - 1];
        if circular_distance(first, last) <= tol {
            let tail = classes.pop().expect("at least two classes");
            let mut merged = tail;
            merged.extend(classes[0].iter().copied());
            classes[0] = merged;
        }
    }
    classes
}

impl SpectralData {
    pub fn dimension(&self) -> usize {
        self.phases.len()
    }

    pub fn is_degenerate(&self) -> bool {
        self.classes.iter().any(|c| c.len() > 1)
    }

    /// Representative phase of a class (that of its first member).
    pub fn class_phase(&self, class: usize) -> f64 {
        self.phases[self.classes[class][0]]
    }

    /// Phase of every index replaced by the phase of its class.
    pub fn snapped_phases(&self) -> Vec<f64> {
        let mut out = self.phases.clone();
        for (c, members) in self.classes.iter().enumerate() {
            let phase = self.class_phase(c);
            for &r in members {
                out[r] = phase;
            }
        }
        out
    }

    pub fn class_ids(&self) -> Vec<usize> {
        let mut ids = vec![0; self.dimension()];
        for (c, members) in self.classes.iter().enumerate() {
            for &r in members {
                ids[r] = c;
            }
        }
        ids
    }

    /// Smallest circular gap between distinct classes.
    pub fn min_class_gap(&self) -> f64 {
        let reps: Vec<f64> = (0..self.classes.len()).map(|c| self.class_phase(c)).collect();
        let mut gap = f64::INFINITY;
        for i in 0..reps.len() {
            for j in i + 1..reps.len() {
                gap = gap.min(circular_distance(reps[i], reps[j]));
            }
        }
        gap
    }

    /// Dense projector `sum of v_r v_r^dagger` over one class.
    pub fn class_projector(&self, class: usize) -> Mat<C64> {
        let n = self.dimension();
        let members = &self.classes[class];
        let v = Mat::from_fn(n, members.len(), |i, j| self.vectors[(i, members[j])]);
        &v * v.adjoint()
    }

    /// `F_c x` for every class `c`, as rows of an `classes x M` matrix.
    fn projected_components(&self, x: &ArcState) -> Result<Vec<Vec<C64>>> {
        self.projected_components_by(x, &self.classes)
    }

    fn projected_components_by(&self, x: &ArcState, groups: &[Vec<usize>]) -> Result<Vec<Vec<C64>>> {
        let n = self.dimension();
        if x.len() != n {
            return Err(Error::Shape { expected: n, got: x.len() });
        }
        let amps = x.amplitudes();
        let coeff: Vec<C64> = (0..n).map(|r| (0..n).map(|i| self.vectors[(i, r)].conj() * amps[i]).sum()).collect();
        Ok(groups
            .iter()
            .map(|members| {
                let mut w = vec![C64::new(0.0, 0.0); n];
                for &r in members {
                    let cr = coeff[r];
                    for (i, wi) in w.iter_mut().enumerate() {
                        *wi += self.vectors[(i, r)] * cr;
                    }
                }
                w
            })
            .collect())
    }

    pub fn to_csv(&self) -> CsvTable {
        let ids = self.class_ids();
        let mut t = CsvTable::new(["r", "theta_r", "class_id"]);
        for (r, &th) in self.phases.iter().enumerate() {
            t.push(vec![r.to_string(), fmt_f64(th), ids[r].to_string()]);
        }
        t
    }
}

fn vertex_weights(g: &Graph, comps: &[Vec<C64>]) -> Vec<f64> {
    (0..g.vertex_count())
        .map(|v| comps.iter().map(|w| w[g.arcs(v)].iter().map(C64::norm_sqr).sum::<f64>()).sum())
        .collect()
}

/// `sum over classes of <x| F D_v F |x>` at vertex `v`: the long-time
/// average of `z_v(t)` started from `x`.
pub fn idempotent_quadratic_form(sd: &SpectralData, x: &ArcState, v: usize, g: &Graph) -> Result<f64> {
    if g.arc_count() != sd.dimension() {
        return Err(Error::Shape { expected: sd.dimension(), got: g.arc_count() });
    }
    if v >= g.vertex_count() {
        return Err(Error::Index { index: v, limit: g.vertex_count() });
    }
    let comps = sd.projected_components(x)?;
    Ok(comps.iter().map(|w| w[g.arcs(v)].iter().map(C64::norm_sqr).sum::<f64>()).sum())
}

/// [`idempotent_quadratic_form`] at every vertex.
pub fn limiting_distribution(sd: &SpectralData, x: &ArcState, g: &Graph) -> Result<Vec<f64>> {
    if g.arc_count() != sd.dimension() {
        return Err(Error::Shape { expected: sd.dimension(), got: g.arc_count() });
    }
    Ok(vertex_weights(g, &sd.projected_components(x)?))
}

/// The same sum taken over individual eigenvectors, ignoring degeneracy.
/// Differs from [`limiting_distribution`] only when classes have size > 1.
pub fn per_eigenvector_distribution(sd: &SpectralData, x: &ArcState, g: &Graph) -> Result<Vec<f64>> {
    if g.arc_count() != sd.dimension() {
        return Err(Error::Shape { expected: sd.dimension(), got: g.arc_count() });
    }
    let singles: Vec<Vec<usize>> = (0..sd.dimension()).map(|r| vec![r]).collect();
    Ok(vertex_weights(g, &sd.projected_components_by(x, &singles)?))
}

/// Constant `B` with `|T-average of z_v - limit| <= B / T` for every `T`:
/// the sum over class pairs of `|<x|F_c D_v F_d|x>| * 2 / |1 - exp(i(theta_d - theta_c))|`.
pub fn time_average_error_bound(sd: &SpectralData, x: &ArcState, v: usize, g: &Graph) -> Result<f64> {
    if v >= g.vertex_count() {
        return Err(Error::Index { index: v, limit: g.vertex_count() });
    }
    let comps = sd.projected_components(x)?;
    let arcs = g.arcs(v);
    let mut bound = 0.0;
    for c in 0..comps.len() {
        for d in 0..comps.len() {
            if c == d {
                continue;
            }
            let overlap: C64 = arcs.clone().map(|a| comps[c][a].conj() * comps[d][a]).sum();
            let denom = (C64::new(1.0, 0.0) - C64::from_polar(1.0, sd.class_phase(d) - sd.class_phase(c))).norm();
            bound += overlap.norm() * 2.0 / denom;
        }
    }
    Ok(bound)
}

/// Mean `k/2E` and fluctuation `sqrt(k)/2E` for a vertex of degree `k`.
pub fn predicted_mean_sigma(g: &Graph, k: usize) -> Result<(f64, f64)> {
    predicted_mean_sigma_for(g.arc_count(), k)
}

pub fn predicted_mean_sigma_for(two_e: usize, k: usize) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::Argument("degree must be positive".into()));
    }
    if two_e == 0 {
        return Err(Error::Argument("graph has no arcs".into()));
    }
    let m = two_e as f64;
    Ok((k as f64 / m, (k as f64).sqrt() / m))
}

/// Histogram of ordered-pair phase differences `(theta_s - theta_r) mod 2 pi`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpacingHistogram {
    pub counts: Vec<u64>,
    /// `counts / (pairs * bin_width)`, integrates to one over `[0, 2 pi)`.
    pub density: Vec<f64>,
    pub bin_width: f64,
    pub pairs: u64,
}

impl SpacingHistogram {
    pub fn bin_center(&self, b: usize) -> f64 {
        (b as f64 + 0.5) * self.bin_width
    }

    pub fn bin_of(&self, omega: f64) -> usize {
        ((omega / self.bin_width) as usize).min(self.counts.len() - 1)
    }
}

/// Spacing histogram of the class phases: members of a degeneracy class
/// share one phase, so their mutual spacing is exactly zero.
pub fn eigenphase_spacing_density(sd: &SpectralData, bins: usize) -> Result<SpacingHistogram> {
    spacing_density_of(&sd.snapped_phases(), bins)
}

pub fn spacing_density_of(phases: &[f64], bins: usize) -> Result<SpacingHistogram> {
    if bins < 8 {
        return Err(Error::Argument(format!("need at least 8 bins, got {bins}")));
    }
    if phases.len() < 2 {
        return Err(Error::Argument("need at least two eigenphases".into()));
    }
    let width = TAU / bins as f64;
    let mut counts = vec![0u64; bins];
    for (r, &a) in phases.iter().enumerate() {
        for (s, &b) in phases.iter().enumerate() {
            if r != s {
                let omega = (b - a).rem_euclid(TAU);
                counts[((omega / width) as usize).min(bins - 1)] += 1;
            }
        }
    }
    let pairs = (phases.len() * (phases.len() - 1)) as u64;
    let density = counts.iter().map(|&c| c as f64 / (pairs as f64 * width)).collect();
    Ok(SpacingHistogram { counts, density, bin_width: width, pairs })
}

/// Spacing density implied by the binned phase density `sigma`: the
/// circular autocorrelation of the bin occupations, without self pairs.
/// Pairs whose phase bins are `d` apart have spacings in `((d-1) w, (d+1) w)`,
/// so each offset is split evenly between spacing bins `d - 1` and `d`.
pub fn spacing_density_from_phase_density(phases: &[f64], bins: usize) -> Result<Vec<f64>> {
    if bins < 8 {
        return Err(Error::Argument(format!("need at least 8 bins, got {bins}")));
    }
    if phases.len() < 2 {
        return Err(Error::Argument("need at least two eigenphases".into()));
    }
    let width = TAU / bins as f64;
    let mut occupation = vec![0.0; bins];
    for &th in phases {
        occupation[((th.rem_euclid(TAU) / width) as usize).min(bins - 1)] += 1.0;
    }
    let m = phases.len() as f64;
    let offsets: Vec<f64> = (0..bins)
        .map(|d| {
            let pairs: f64 = (0..bins).map(|b| occupation[b] * occupation[(b + d) % bins]).sum();
            if d == 0 {
                pairs - m
            } else {
                pairs
            }
        })
        .collect();
    let norm = m * (m - 1.0) * width;
    Ok((0..bins).map(|b| 0.5 * (offsets[b] + offsets[(b + 1) % bins]) / norm).collect())
}

/// `sum over r != s of exp(i t (theta_s - theta_r))`, evaluated as
/// `|sum_r exp(i t theta_r)|^2 - M`.
pub fn offdiagonal_signal(sd: &SpectralData, t: i64) -> C64 {
    let m = sd.dimension() as f64;
    let s: C64 = sd.phases.iter().map(|&th| C64::from_polar(1.0, t as f64 * th)).sum();
    s * s.conj() - m
}

/// Integral approximation `(M^2 - M) * integral of Omega(omega) exp(i t omega)`
/// over the binned spacing density.
pub fn spacing_integral_signal(hist: &SpacingHistogram, m: usize, t: i64) -> C64 {
    let scale = (m * m - m) as f64;
    let integral: C64 = hist
        .density
        .iter()
        .enumerate()
        .map(|(b, &d)| C64::from_polar(d * hist.bin_width, t as f64 * hist.bin_center(b)))
        .sum();
    integral * scale
}

/// Relative deviation of [`spacing_integral_signal`] from the exact pair sum.
pub fn signal_relative_deviation(sd: &SpectralData, bins: usize, t: i64) -> Result<f64> {
    let hist = eigenphase_spacing_density(sd, bins)?;
    let exact = offdiagonal_signal(sd, t);
    let approx = spacing_integral_signal(&hist, sd.dimension(), t);
    let scale = (sd.dimension() * sd.dimension() - sd.dimension()) as f64;
    Ok((approx - exact).norm() / exact.norm().max(1e-12 * scale))
}

/// Spread of `s_r = sum over arcs of degree-k vertices of |v_ir|^2` across
/// eigenvectors `r`: returns `(mean, std / mean)`.
pub fn degree_weight_spread(sd: &SpectralData, g: &Graph, k: usize) -> Result<(f64, f64)> {
    let arcs: Vec<usize> = (0..g.vertex_count()).filter(|&v| g.degree(v) == k).flat_map(|v| g.arcs(v)).collect();
    if arcs.is_empty() {
        return Err(Error::Argument(format!("no vertices of degree {k}")));
    }
    let weights: Vec<f64> = (0..sd.dimension())
        .map(|r| arcs.iter().map(|&i| sd.vectors[(i, r)].norm_sqr()).sum())
        .collect();
    let n = weights.len() as f64;
    let mean = weights.iter().sum::<f64>() / n;
    let var = weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt() / mean))
}
