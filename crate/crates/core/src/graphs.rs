//! Undirected graphs stored in arc space.
//!
//! Every undirected edge `{u, v}` is kept as the two arcs `u -> v` and
//! `v -> u`. Arcs are grouped by tail vertex, so the outgoing arcs of `v`
//! occupy the contiguous index range `arcs(v)`. The walk state lives on these
//! arc indices and the shift operator is the arc reversal permutation.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::ops::Range;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Configuration-model pairings attempted before giving up on a degree sequence.
pub const MAX_PAIRING_RETRIES: usize = 200;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    heads: Vec<usize>,
    tails: Vec<usize>,
    offsets: Vec<usize>,
    reversal: Vec<usize>,
}

impl Graph {
    /// Builds a graph from per-vertex neighbour lists. The order of each list
    /// becomes the order of that vertex's outgoing arcs.
    pub fn from_adjacency(adjacency: Vec<Vec<usize>>) -> Result<Self> {
        let n = adjacency.len();
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no vertices".into()));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut heads = Vec::new();
        let mut tails = Vec::new();
        offsets.push(0);
        for (u, nbrs) in adjacency.iter().enumerate() {
            if nbrs.is_empty() {
                return Err(Error::InvalidGraph(format!("vertex {u} has degree 0")));
            }
            let mut seen = HashSet::with_capacity(nbrs.len());
            for &v in nbrs {
                if v >= n {
                    return Err(Error::InvalidGraph(format!("arc {u} -> {v} leaves the vertex range")));
                }
                if v == u {
                    return Err(Error::InvalidGraph(format!("self-loop at vertex {u}")));
                }
                if !seen.insert(v) {
                    return Err(Error::InvalidGraph(format!("multi-edge {u} -> {v}")));
                }
                heads.push(v);
                tails.push(u);
            }
            offsets.push(heads.len());
        }

        let index: HashMap<(usize, usize), usize> =
            (0..heads.len()).map(|a| ((tails[a], heads[a]), a)).collect();
        let mut reversal = Vec::with_capacity(heads.len());
        for a in 0..heads.len() {
            match index.get(&(heads[a], tails[a])) {
                Some(&b) => reversal.push(b),
                None => {
                    return Err(Error::InvalidGraph(format!(
                        "arc {} -> {} has no reverse",
                        tails[a], heads[a]
                    )))
                }
            }
        }

        let g = Graph { heads, tails, offsets, reversal };
        if !g.is_connected() {
            return Err(Error::InvalidGraph("graph is not connected".into()));
        }
        Ok(g)
    }

    /// Builds a graph from undirected edges; outgoing arcs are sorted by head.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!("edge ({u}, {v}) leaves the vertex range")));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        Self::from_adjacency(adjacency)
    }

    pub fn vertex_count(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of arcs, `2E`.
    pub fn arc_count(&self) -> usize {
        self.heads.len()
    }

    pub fn edge_count(&self) -> usize {
        self.heads.len() / 2
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.vertex_count()).map(|v| self.degree(v)).collect()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.vertex_count()).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    /// Outgoing arc indices of `v`.
    pub fn arcs(&self, v: usize) -> Range<usize> {
        self.offsets[v]..self.offsets[v + 1]
    }

    pub fn arc_offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.heads[self.arcs(v)]
    }

    pub fn head(&self, arc: usize) -> usize {
        self.heads[arc]
    }

    pub fn tail(&self, arc: usize) -> usize {
        self.tails[arc]
    }

    pub fn reverse(&self, arc: usize) -> usize {
        self.reversal[arc]
    }

    pub fn reversal(&self) -> &[usize] {
        &self.reversal
    }

    /// `(tail, head)` for every arc in index order.
    pub fn arc_list(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.tails.iter().copied().zip(self.heads.iter().copied())
    }

    /// Shortest-path distances from `source` (hop count).
    pub fn bfs_distances(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.vertex_count()];
        let mut queue = VecDeque::new();
        dist[source] = Some(0);
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or(0);
            for &w in self.neighbors(u) {
                if dist[w].is_none() {
                    dist[w] = Some(du + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.bfs_distances(0).iter().all(Option::is_some)
    }

    /// Stable content hash over the vertex count and the ordered arc list.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.vertex_count() as u64).to_le_bytes());
        for (t, h) in self.arc_list() {
            hasher.update((t as u64).to_le_bytes());
            hasher.update((h as u64).to_le_bytes());
        }
        let digest = hasher.finalize();
        let mut out = String::with_capacity(16);
        for byte in &digest[..8] {
            let _ = write!(out, "{byte:02x}");
        }
        out
    }

    /// Writes the arc list: a `# n=<n>` header followed by one `u v` line per
    /// arc in arc-index order, so a reload reproduces the arc ordering.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# n={}", self.vertex_count())?;
        for (t, h) in self.arc_list() {
            writeln!(out, "{t} {h}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_edge_list(&mut buf)?;
        crate::io::write_atomic(path, &buf)
    }

    /// Reads an edge-list file. Files listing both directions of every edge
    /// keep their arc order; files listing each edge once get head-sorted arcs.
    pub fn read_edge_list<R: BufRead>(input: R) -> Result<Self> {
        let mut n: Option<usize> = None;
        let mut pairs = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(value) = rest.trim().strip_prefix("n=") {
                    n = Some(value.trim().parse().map_err(|_| Error::Parse {
                        line: i + 1,
                        message: format!("bad vertex count {value:?}"),
                    })?);
                }
                continue;
            }
            let mut fields = line.split_whitespace();
            let mut next = || -> Result<usize> {
                fields
                    .next()
                    .and_then(|f| f.parse().ok())
                    .ok_or_else(|| Error::Parse { line: i + 1, message: format!("expected `u v`, got {line:?}") })
            };
            let u = next()?;
            let v = next()?;
            pairs.push((u, v));
        }
        let n = n.ok_or_else(|| Error::Parse { line: 1, message: "missing `# n=<n>` header".into() })?;

        let directed: HashSet<(usize, usize)> = pairs.iter().copied().collect();
        let symmetric = pairs.iter().all(|&(u, v)| directed.contains(&(v, u)));
        if symmetric {
            let mut adjacency = vec![Vec::new(); n];
            for &(u, v) in &pairs {
                if u >= n {
                    return Err(Error::InvalidGraph(format!("arc tail {u} leaves the vertex range")));
                }
                adjacency[u].push(v);
            }
            Self::from_adjacency(adjacency)
        } else if pairs.iter().any(|&(u, v)| directed.contains(&(v, u))) {
            Err(Error::InvalidGraph("edge list mixes one- and two-directional entries".into()))
        } else {
            Self::from_edges(n, &pairs)
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_edge_list(std::io::BufReader::new(file))
    }
}

/// Cycle on `n` vertices.
pub fn build_ring(n: usize) -> Result<Graph> {
    build_periodic_lattice(&[n])
}

/// Periodic lattice (torus) with the given side lengths, vertices in
/// row-major order (last coordinate fastest). Each vertex lists its arcs by
/// direction: `-e_0, +e_0, -e_1, +e_1, ...`, so every vertex sees the same
/// local orientation.
pub fn build_periodic_lattice(sides: &[usize]) -> Result<Graph> {
    if sides.is_empty() || sides.len() > 3 {
        return Err(Error::InvalidSize(format!("lattice dimension must be 1, 2 or 3, got {}", sides.len())));
    }
    if let Some(&s) = sides.iter().find(|&&s| s < 3) {
        return Err(Error::InvalidSize(format!("lattice side {s} is below 3")));
    }
    let n: usize = sides.iter().product();
    let dim = sides.len();
    let mut strides = vec![1usize; dim];
    for d in (0..dim.saturating_sub(1)).rev() {
        strides[d] = strides[d + 1] * sides[d + 1];
    }
    let adjacency = (0..n)
        .map(|v| {
            let mut nbrs = Vec::with_capacity(2 * dim);
            for d in 0..dim {
                let c = (v / strides[d]) % sides[d];
                let base = v - c * strides[d];
                let down = (c + sides[d] - 1) % sides[d];
                let up = (c + 1) % sides[d];
                nbrs.push(base + down * strides[d]);
                nbrs.push(base + up * strides[d]);
            }
            nbrs
        })
        .collect();
    Graph::from_adjacency(adjacency)
}

/// Scale-free graph from the configuration model.
///
/// Degrees follow a discrete power law `P(k) ~ k^-exponent` truncated to
/// `[min_degree, floor(sqrt(n))]` and are assigned in decreasing order, so
/// vertex 0 is a hub. Self-loops and multi-edges are removed by degree
/// preserving swaps; disconnected realisations are redrawn.
pub fn build_scale_free(n: usize, exponent: f64, min_degree: usize, seed: u64) -> Result<Graph> {
    if n < 50 {
        return Err(Error::InvalidSize(format!("scale-free graphs need n >= 50, got {n}")));
    }
    build_scale_free_capped(n, exponent, min_degree, (n as f64).sqrt().floor() as usize, seed)
}

/// [`build_scale_free`] with an explicit degree cutoff and no size floor
/// beyond `max_degree < n`.
pub fn build_scale_free_capped(n: usize, exponent: f64, min_degree: usize, max_degree: usize, seed: u64) -> Result<Graph> {
    if !(exponent > 2.0) {
        return Err(Error::Argument(format!("power-law exponent must exceed 2, got {exponent}")));
    }
    if min_degree < 2 {
        return Err(Error::Argument(format!("minimum degree must be at least 2, got {min_degree}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let degrees = sample_power_law_degrees(n, exponent, min_degree, max_degree, &mut rng)?;
    configuration_model(&degrees, &mut rng)
}

/// Draws `n` degrees from `P(k) ~ k^-exponent` on `[kmin, kmax]`, with even
/// sum, sorted in decreasing order.
pub fn sample_power_law_degrees<R: Rng>(
    n: usize,
    exponent: f64,
    kmin: usize,
    kmax: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if kmin == 0 || kmax < kmin || kmax >= n {
        return Err(Error::Argument(format!("bad degree range [{kmin}, {kmax}] for n = {n}")));
    }
    let weights: Vec<f64> = (kmin..=kmax).map(|k| (k as f64).powf(-exponent)).collect();
    let total: f64 = weights.iter().sum();
    let mut cdf = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in &weights {
        acc += w / total;
        cdf.push(acc);
    }
    let draw = |rng: &mut R| {
        let u: f64 = rng.gen();
        kmin + cdf.partition_point(|&c| c < u).min(cdf.len() - 1)
    };
    let mut degrees: Vec<usize> = (0..n).map(|_| draw(rng)).collect();
    while degrees.iter().sum::<usize>() % 2 == 1 {
        degrees[n - 1] = draw(rng);
    }
    degrees.sort_unstable_by(|a, b| b.cmp(a));
    Ok(degrees)
}

/// Random simple connected graph realising `degrees` exactly.
pub fn configuration_model<R: Rng>(degrees: &[usize], rng: &mut R) -> Result<Graph> {
    let n = degrees.len();
    let stubs_total: usize = degrees.iter().sum();
    if stubs_total % 2 == 1 {
        return Err(Error::Argument("degree sum is odd".into()));
    }
    if degrees.iter().any(|&k| k == 0 || k >= n) {
        return Err(Error::Argument("degrees must lie in [1, n - 1]".into()));
    }
    let mut stubs: Vec<usize> = degrees.iter().enumerate().flat_map(|(v, &k)| std::iter::repeat(v).take(k)).collect();

    for _ in 0..MAX_PAIRING_RETRIES {
        stubs.shuffle(rng);
        let edges: Vec<(usize, usize)> = stubs.chunks_exact(2).map(|p| (p[0], p[1])).collect();
        let Some(edges) = make_simple(edges, rng) else { continue };
        match Graph::from_edges(n, &edges) {
            Ok(g) => return Ok(g),
            Err(Error::InvalidGraph(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::GenerationFailure(format!(
        "no connected simple realisation after {MAX_PAIRING_RETRIES} pairings"
    )))
}

fn edge_key(u: usize, v: usize) -> (usize, usize) {
    (u.min(v), u.max(v))
}

/// Removes self-loops and multi-edges with double-edge swaps.
fn make_simple<R: Rng>(mut edges: Vec<(usize, usize)>, rng: &mut R) -> Option<Vec<(usize, usize)>> {
    let mut multiplicity: HashMap<(usize, usize), usize> = HashMap::new();
    for &(u, v) in &edges {
        *multiplicity.entry(edge_key(u, v)).or_default() += 1;
    }
    let is_bad = |e: (usize, usize), mult: &HashMap<(usize, usize), usize>| e.0 == e.1 || mult[&edge_key(e.0, e.1)] > 1;
    let budget = 100 * edges.len().max(1);
    let mut attempts = 0;
    loop {
        let Some(i) = edges.iter().position(|&e| is_bad(e, &multiplicity)) else {
            return Some(edges);
        };
        attempts += 1;
        if attempts > budget {
            return None;
        }
        let j = rng.gen_range(0..edges.len());
        if i == j {
            continue;
        }
        let (a, b) = edges[i];
        let (c, d) = if rng.gen() { edges[j] } else { (edges[j].1, edges[j].0) };
        let (e1, e2) = ((a, c), (b, d));
        if e1.0 == e1.1 || e2.0 == e2.1 || edge_key(e1.0, e1.1) == edge_key(e2.0, e2.1) {
            continue;
        }
        if multiplicity.get(&edge_key(e1.0, e1.1)).copied().unwrap_or(0) > 0
            || multiplicity.get(&edge_key(e2.0, e2.1)).copied().unwrap_or(0) > 0
        {
            continue;
        }
        for old in [edges[i], edges[j]] {
            let m = multiplicity.get_mut(&edge_key(old.0, old.1)).expect("edge present");
            *m -= 1;
        }
        *multiplicity.entry(edge_key(e1.0, e1.1)).or_default() += 1;
        *multiplicity.entry(edge_key(e2.0, e2.1)).or_default() += 1;
        edges[i] = e1;
        edges[j] = e2;
    }
}

/// Vertex count per degree.
pub fn degree_histogram(g: &Graph) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    for v in 0..g.vertex_count() {
        *hist.entry(g.degree(v)).or_insert(0) += 1;
    }
    hist
}

/// Maximum-likelihood exponent of a discrete power law truncated to
/// `[kmin, kmax]`, fitted to the degrees inside that window.
pub fn fit_degree_exponent(degrees: &[usize], kmin: usize, kmax: usize) -> Result<f64> {
    let sample: Vec<f64> = degrees.iter().filter(|&&k| k >= kmin && k <= kmax).map(|&k| k as f64).collect();
    if sample.len() < 2 || kmin == 0 || kmax <= kmin {
        return Err(Error::Fit("not enough degrees inside the fit window".into()));
    }
    let mean_log = sample.iter().map(|k| k.ln()).sum::<f64>() / sample.len() as f64;
    let neg_log_likelihood = |alpha: f64| {
        let z: f64 = (kmin..=kmax).map(|k| (k as f64).powf(-alpha)).sum();
        alpha * mean_log + z.ln()
    };
    // golden-section search; the likelihood is log-concave in alpha
    let (mut lo, mut hi) = (1.0001_f64, 8.0_f64);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (neg_log_likelihood(x1), neg_log_likelihood(x2));
    while hi - lo > 1e-9 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = neg_log_likelihood(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = neg_log_likelihood(x2);
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_invariants(g: &Graph) {
        let total: usize = g.degrees().iter().sum();
        assert_eq!(total, g.arc_count());
        for a in 0..g.arc_count() {
            let r = g.reverse(a);
            assert_ne!(r, a);
            assert_eq!(g.reverse(r), a);
            assert_eq!(g.head(a), g.tail(r));
        }
        for v in 0..g.vertex_count() {
            assert!(g.degree(v) >= 1);
            for a in g.arcs(v) {
                assert_eq!(g.tail(a), v);
            }
        }
        assert!(g.is_connected());
    }

    #[test]
    fn ring_of_three() {
        let g = build_ring(3).unwrap();
        assert_eq!(g.arc_count(), 6);
        assert_eq!(g.degrees(), vec![2, 2, 2]);
        // left neighbour first, then right
        assert_eq!(g.neighbors(0), &[2, 1]);
        assert_eq!(g.neighbors(1), &[0, 2]);
        check_invariants(&g);
    }

    #[test]
    fn ring_sizes() {
        assert_eq!(build_ring(500).unwrap().arc_count(), 1000);
        assert_eq!(build_ring(501).unwrap().arc_count(), 1002);
        assert_eq!(build_ring(729).unwrap().arc_count(), 1458);
        assert!(matches!(build_ring(2), Err(Error::InvalidSize(_))));
    }

    #[test]
    fn lattices_of_729() {
        for (sides, k) in [(vec![729], 2), (vec![27, 27], 4), (vec![9, 9, 9], 6)] {
            let g = build_periodic_lattice(&sides).unwrap();
            assert_eq!(g.vertex_count(), 729);
            assert!(g.degrees().iter().all(|&d| d == k));
            assert_eq!(g.arc_count(), 729 * k);
            check_invariants(&g);
        }
        assert!(build_periodic_lattice(&[9, 2]).is_err());
        assert!(build_periodic_lattice(&[3, 3, 3, 3]).is_err());
    }

    #[test]
    fn lattice_row_major_neighbours() {
        let g = build_periodic_lattice(&[3, 4]).unwrap();
        // vertex 5 = (1, 1): -e0 -> (0,1)=1, +e0 -> (2,1)=9, -e1 -> (1,0)=4, +e1 -> (1,2)=6
        assert_eq!(g.neighbors(5), &[1, 9, 4, 6]);
    }

    #[test]
    fn degree_histograms() {
        let ring = build_ring(5).unwrap();
        assert_eq!(degree_histogram(&ring), BTreeMap::from([(2, 5)]));
        let cube = build_periodic_lattice(&[9, 9, 9]).unwrap();
        assert_eq!(degree_histogram(&cube), BTreeMap::from([(6, 729)]));
    }

    #[test]
    fn scale_free_basic_properties() {
        let g = build_scale_free(1000, 2.3, 2, 11).unwrap();
        check_invariants(&g);
        let hist = degree_histogram(&g);
        assert!(hist.len() > 4);
        assert!(*hist.keys().next().unwrap() >= 2);
        assert_eq!(hist.values().sum::<usize>(), 1000);
        // degree-2 vertices are the largest class
        let (&mode, _) = hist.iter().max_by_key(|(_, &c)| c).unwrap();
        assert_eq!(mode, 2);
        let alpha = fit_degree_exponent(&g.degrees(), 2, 31).unwrap();
        assert!((2.0..=2.6).contains(&alpha), "fitted exponent {alpha}");
        // hubs come first
        assert_eq!(g.degree(0), g.max_degree());
    }

    #[test]
    fn scale_free_small_and_deterministic() {
        let a = build_scale_free(50, 2.3, 2, 3).unwrap();
        let b = build_scale_free(50, 2.3, 2, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.degrees().iter().sum::<usize>() % 2, 0);
        check_invariants(&a);
        assert!(build_scale_free(49, 2.3, 2, 3).is_err());
        assert!(build_scale_free(100, 2.0, 2, 3).is_err());
        assert!(build_scale_free(100, 2.3, 1, 3).is_err());
    }

    #[test]
    fn exponent_fit_recovers_sampled_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let degrees = sample_power_law_degrees(20000, 2.5, 2, 100, &mut rng).unwrap();
        let alpha = fit_degree_exponent(&degrees, 2, 100).unwrap();
        assert!((alpha - 2.5).abs() < 0.05, "{alpha}");
    }

    #[test]
    fn invalid_adjacency_is_rejected() {
        assert!(Graph::from_adjacency(vec![vec![1], vec![0], vec![]]).is_err());
        assert!(Graph::from_adjacency(vec![vec![0, 1], vec![0]]).is_err());
        assert!(Graph::from_adjacency(vec![vec![1, 1], vec![0, 0]]).is_err());
        assert!(Graph::from_adjacency(vec![vec![1], vec![]]).is_err());
        // two disjoint edges
        assert!(Graph::from_edges(4, &[(0, 1), (2, 3)]).is_err());
    }

    #[test]
    fn edge_list_round_trip_keeps_arc_order() {
        let g = build_periodic_lattice(&[3, 5]).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# n=15\n"));
        let back = Graph::read_edge_list(buf.as_slice()).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.fingerprint(), g.fingerprint());
    }

    #[test]
    fn one_directional_edge_list_sorts_heads() {
        let text = "# n=4\n0 2\n0 1\n1 2\n2 3\n";
        let g = Graph::read_edge_list(text.as_bytes()).unwrap();
        assert_eq!(g.neighbors(0), &[1, 2]);
        assert_eq!(g.neighbors(2), &[0, 1, 3]);
        assert!(Graph::read_edge_list("0 1\n".as_bytes()).is_err());
        assert!(Graph::read_edge_list("# n=3\n0 1\n1 0\n1 2\n".as_bytes()).is_err());
    }
}
