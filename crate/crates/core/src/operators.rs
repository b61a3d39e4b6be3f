//! Coin blocks, the arc-swap shift and the one-step walk operator `U = S C`.

use std::f64::consts::TAU;
use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::Graph;

/// Largest arc count for which dense matrices are built unless overridden.
pub const DENSE_GUARD: usize = 8192;

/// Per-block unitarity tolerance, max-norm of `B^dagger B - I`.
pub const BLOCK_UNITARITY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CoinSpec {
    Fourier { theta: f64 },
    Grover,
}

impl CoinSpec {
    /// Fourier coin with `theta = 2 pi`, the discrete Fourier transform.
    pub fn fourier() -> Self {
        CoinSpec::Fourier { theta: TAU }
    }

    pub fn block(&self, k: usize) -> Result<Mat<C64>> {
        match *self {
            CoinSpec::Fourier { theta } => fourier_coin(k, theta),
            CoinSpec::Grover => grover_coin(k),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CoinSpec::Fourier { .. } => "fourier",
            CoinSpec::Grover => "grover",
        }
    }
}

impl Default for CoinSpec {
    fn default() -> Self {
        Self::fourier()
    }
}

/// Entry `(a, b)` is `exp(i a b theta / k) / sqrt(k)`.
pub fn fourier_coin(k: usize, theta: f64) -> Result<Mat<C64>> {
    if k == 0 {
        return Err(Error::InvalidOrder(0));
    }
    if !theta.is_finite() {
        return Err(Error::Argument(format!("Fourier angle must be finite, got {theta}")));
    }
    let norm = 1.0 / (k as f64).sqrt();
    Ok(Mat::from_fn(k, k, |a, b| C64::from_polar(norm, (a * b) as f64 * theta / k as f64)))
}

/// Diagonal `(2 - k) / k`, off-diagonal `2 / k`.
pub fn grover_coin(k: usize) -> Result<Mat<C64>> {
    if k == 0 {
        return Err(Error::InvalidOrder(0));
    }
    let kf = k as f64;
    Ok(Mat::from_fn(k, k, |a, b| {
        if a == b {
            C64::new((2.0 - kf) / kf, 0.0)
        } else {
            C64::new(2.0 / kf, 0.0)
        }
    }))
}

/// Max-norm of `M^dagger M - I`.
pub fn unitarity_defect(m: &Mat<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for r in 0..m.nrows() {
                acc += m[(r, i)].conj() * m[(r, j)];
            }
            if i == j {
                acc -= 1.0;
            }
            worst = worst.max(acc.norm());
        }
    }
    worst
}

/// Block-diagonal coin followed by the arc reversal.
#[derive(Clone, Debug)]
pub struct WalkOperator {
    graph: Arc<Graph>,
    coin: CoinSpec,
    // row-major k x k blocks, concatenated in vertex order
    blocks: Vec<C64>,
    block_offsets: Vec<usize>,
}

impl WalkOperator {
    pub fn new(graph: impl Into<Arc<Graph>>, coin: CoinSpec) -> Result<Self> {
        let graph = graph.into();
        let n = graph.vertex_count();
        let mut blocks = Vec::new();
        let mut block_offsets = Vec::with_capacity(n + 1);
        block_offsets.push(0);
        let mut cache: Vec<Option<Mat<C64>>> = vec![None; graph.max_degree() + 1];
        for v in 0..n {
            let k = graph.degree(v);
            if cache[k].is_none() {
                let b = coin.block(k)?;
                let deviation = unitarity_defect(&b);
                if !(deviation <= BLOCK_UNITARITY_TOL) {
                    return Err(Error::NonUnitary { vertex: v, deviation });
                }
                cache[k] = Some(b);
            }
            let b = cache[k].as_ref().expect("cached block");
            for r in 0..k {
                for c in 0..k {
                    blocks.push(b[(r, c)]);
                }
            }
            block_offsets.push(blocks.len());
        }
        Ok(WalkOperator { graph, coin, blocks, block_offsets })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn shared_graph(&self) -> Arc<Graph> {
        Arc::clone(&self.graph)
    }

    pub fn coin(&self) -> CoinSpec {
        self.coin
    }

    pub fn dimension(&self) -> usize {
        self.graph.arc_count()
    }

    /// Coin block of vertex `v` in its outgoing-arc order.
    pub fn block(&self, v: usize) -> Mat<C64> {
        let k = self.graph.degree(v);
        let data = &self.blocks[self.block_offsets[v]..self.block_offsets[v + 1]];
        Mat::from_fn(k, k, |r, c| data[r * k + c])
    }

    /// `dst = S C src`.
    pub fn apply(&self, src: &[C64], dst: &mut [C64]) {
        let g = &*self.graph;
        let rev = g.reversal();
        debug_assert_eq!(src.len(), g.arc_count());
        debug_assert_eq!(dst.len(), g.arc_count());
        for v in 0..g.vertex_count() {
            let arcs = g.arcs(v);
            let k = arcs.len();
            let input = &src[arcs.clone()];
            let block = &self.blocks[self.block_offsets[v]..self.block_offsets[v + 1]];
            for (row, coeffs) in block.chunks_exact(k).enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (c, x) in coeffs.iter().zip(input) {
                    acc += c * x;
                }
                dst[rev[arcs.start + row]] = acc;
            }
        }
    }

    fn check_guard(&self, guard: Option<usize>) -> Result<usize> {
        let order = self.dimension();
        let limit = guard.unwrap_or(DENSE_GUARD);
        if order > limit {
            return Err(Error::SizeGuard { order, guard: limit });
        }
        Ok(order)
    }

    /// Dense block-diagonal coin `C` in global arc order.
    pub fn coin_dense(&self, guard: Option<usize>) -> Result<Mat<C64>> {
        let m = self.check_guard(guard)?;
        let mut c = Mat::<C64>::zeros(m, m);
        for v in 0..self.graph.vertex_count() {
            let arcs = self.graph.arcs(v);
            let b = self.block(v);
            for (r, ar) in arcs.clone().enumerate() {
                for (s, as_) in arcs.clone().enumerate() {
                    c[(ar, as_)] = b[(r, s)];
                }
            }
        }
        Ok(c)
    }

    /// Dense shift permutation: column `a` has its single one in row `reverse(a)`.
    pub fn shift_dense(&self, guard: Option<usize>) -> Result<Mat<C64>> {
        let m = self.check_guard(guard)?;
        let mut s = Mat::<C64>::zeros(m, m);
        for a in 0..m {
            s[(self.graph.reverse(a), a)] = C64::new(1.0, 0.0);
        }
        Ok(s)
    }

    /// Dense `U = S C` in global arc order. `guard` overrides [`DENSE_GUARD`].
    pub fn dense_unitary(&self, guard: Option<usize>) -> Result<Mat<C64>> {
        let m = self.check_guard(guard)?;
        let mut u = Mat::<C64>::zeros(m, m);
        for v in 0..self.graph.vertex_count() {
            let arcs = self.graph.arcs(v);
            let b = self.block(v);
            for (r, ar) in arcs.clone().enumerate() {
                let row = self.graph.reverse(ar);
                for (s, as_) in arcs.clone().enumerate() {
                    u[(row, as_)] = b[(r, s)];
                }
            }
        }
        Ok(u)
    }
}

/// Convenience wrapper for [`WalkOperator::new`].
pub fn assemble_walk_operator(graph: impl Into<Arc<Graph>>, coin: CoinSpec) -> Result<WalkOperator> {
    WalkOperator::new(graph, coin)
}
