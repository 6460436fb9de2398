//! Communication graphs and doubly stochastic mixing matrices.

use std::collections::BTreeSet;
use std::io::BufRead;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const DOUBLY_STOCHASTIC_TOL: f64 = 1e-12;
const MAX_CONNECT_ATTEMPTS: usize = 1000;

/// Simple undirected graph on nodes `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    adj: Vec<BTreeSet<usize>>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Self {
            adj: vec![BTreeSet::new(); n],
        }
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Self::empty(n);
        for i in 0..n {
            for j in i + 1..n {
                g.add_edge(i, j);
            }
        }
        g
    }

    /// Cycle `0 – 1 – … – n−1 – 0`; a single edge for `n = 2`.
    pub fn ring(n: usize) -> Self {
        let mut g = Self::empty(n);
        if n >= 2 {
            for i in 0..n {
                g.add_edge(i, (i + 1) % n);
            }
        }
        g
    }

    pub fn path(n: usize) -> Self {
        let mut g = Self::empty(n);
        for i in 1..n {
            g.add_edge(i - 1, i);
        }
        g
    }

    /// Erdős–Rényi `G(n, p)`, redrawn until connected.
    pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidParameter(format!("edge probability must lie in (0, 1], got {p}")));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("graph needs at least one node".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..MAX_CONNECT_ATTEMPTS {
            let mut g = Self::empty(n);
            for i in 0..n {
                for j in i + 1..n {
                    if rng.gen::<f64>() < p {
                        g.add_edge(i, j);
                    }
                }
            }
            if g.is_connected() {
                return Ok(g);
            }
        }
        Err(Error::CouldNotConnect {
            attempts: MAX_CONNECT_ATTEMPTS,
            p,
        })
    }

    /// Reads one `k l` edge per line (0-based). Blank lines and `#` comments
    /// are skipped; self loops are ignored. `n` fixes the node count.
    pub fn from_edge_list<R: BufRead>(reader: R, n: usize) -> Result<Self> {
        let mut g = Self::empty(n);
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { line: lineno + 1, msg };
            let ids: Vec<&str> = content.split_whitespace().collect();
            if ids.len() != 2 {
                return Err(err(format!("expected `k l`, found `{content}`")));
            }
            let parse = |s: &str| -> Result<usize> {
                let v: usize = s.parse().map_err(|_| err(format!("invalid node id `{s}`")))?;
                if v >= n {
                    return Err(err(format!("node {v} out of range for {n} nodes")));
                }
                Ok(v)
            };
            let (a, b) = (parse(ids[0])?, parse(ids[1])?);
            if a != b {
                g.add_edge(a, b);
            }
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        debug_assert_ne!(a, b);
        self.adj[a].insert(b);
        self.adj[b].insert(a);
    }

    pub fn num_nodes(&self) -> usize {
        self.adj.len()
    }

    pub fn degree(&self, k: usize) -> usize {
        self.adj[k].len()
    }

    pub fn neighbors(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[k].iter().copied()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].contains(&b)
    }

    /// Edges `(a, b)` with `a < b`, in ascending order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.num_nodes())
            .flat_map(|a| self.neighbors(a).filter(move |&b| b > a).map(move |b| (a, b)))
            .collect()
    }

    pub fn is_connected(&self) -> bool {
        let n = self.num_nodes();
        if n == 0 {
            return false;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(k) = stack.pop() {
            for l in self.neighbors(k) {
                if !seen[l] {
                    seen[l] = true;
                    stack.push(l);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// `K × K` doubly stochastic combination matrix with its mixing rate
/// `λ = ‖A − 11ᵀ/K‖₂`.
#[derive(Clone, Debug, PartialEq)]
pub struct MixingMatrix {
    weights: DMatrix<f64>,
    lambda: f64,
}

impl MixingMatrix {
    /// Validates nonnegativity and unit row/column sums (to 1e-12).
    pub fn new(weights: DMatrix<f64>) -> Result<Self> {
        let (r, c) = weights.shape();
        if r != c || r == 0 {
            return Err(Error::InvalidMixingMatrix(format!("expected a nonempty square matrix, got {r}x{c}")));
        }
        if let Some(v) = weights.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidMixingMatrix(format!("entry {v} is negative or non-finite")));
        }
        for k in 0..r {
            let row = weights.row(k).sum();
            let col = weights.column(k).sum();
            if (row - 1.0).abs() > DOUBLY_STOCHASTIC_TOL || (col - 1.0).abs() > DOUBLY_STOCHASTIC_TOL {
                return Err(Error::InvalidMixingMatrix(format!(
                    "row/column {k} sums to {row}/{col}, expected 1"
                )));
            }
        }
        let lambda = mixing_rate(&weights);
        Ok(Self { weights, lambda })
    }

    /// `11ᵀ/K`: exact averaging.
    pub fn averaging(k: usize) -> Result<Self> {
        Self::new(DMatrix::from_element(k, k, 1.0 / k as f64))
    }

    pub fn identity(k: usize) -> Result<Self> {
        Self::new(DMatrix::identity(k, k))
    }

    pub fn size(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weight(&self, k: usize, l: usize) -> f64 {
        self.weights[(k, l)]
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// Spectral norm of `A − 11ᵀ/K`, clamped to `[0, 1]`. Uses a symmetric
/// eigensolve when `A` is symmetric and an SVD otherwise.
pub fn mixing_rate(a: &DMatrix<f64>) -> f64 {
    let k = a.nrows();
    let centered = a - DMatrix::from_element(k, k, 1.0 / k as f64);
    let symmetric = (&centered - centered.transpose()).amax() == 0.0;
    let norm = if symmetric {
        centered.symmetric_eigenvalues().amax()
    } else {
        centered.singular_values().max()
    };
    norm.clamp(0.0, 1.0)
}

/// Lazy Metropolis weights `a_kl = 1 / (1 + max(d_k, d_l))` on edges, with
/// the remaining mass on the diagonal.
pub fn metropolis_weights(graph: &Graph) -> Result<MixingMatrix> {
    if !graph.is_connected() {
        return Err(Error::Disconnected);
    }
    let n = graph.num_nodes();
    let mut a = DMatrix::zeros(n, n);
    for (k, l) in graph.edges() {
        let w = 1.0 / (1 + graph.degree(k).max(graph.degree(l))) as f64;
        a[(k, l)] = w;
        a[(l, k)] = w;
    }
    for k in 0..n {
        let off: f64 = graph.neighbors(k).map(|l| a[(k, l)]).sum();
        a[(k, k)] = 1.0 - off;
    }
    MixingMatrix::new(a)
}
