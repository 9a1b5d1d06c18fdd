//! Time-varying weighted communication graphs.
//!
//! `[W_t]_{ij} > 0` means agent `i` receives from agent `j` at round `t`.
//! Generated sequences use Metropolis weights on an undirected edge set per
//! round, so every `W_t` is symmetric and doubly stochastic.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{self, Purpose};

pub type WeightMatrix = DMatrix<f64>;

/// Tolerance used when validating generated sequences.
pub const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Complete,
    Ring,
    /// One averaging pair per round; a spanning tree is covered in each window.
    GossipPairs,
    /// A random spanning tree spread over each window plus random extra edges.
    RandomWindow,
}

impl std::str::FromStr for GraphKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "complete" => Ok(Self::Complete),
            "ring" => Ok(Self::Ring),
            "gossip_pairs" => Ok(Self::GossipPairs),
            "random_window" => Ok(Self::RandomWindow),
            other => Err(invalid(format!("unknown graph kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Source {
    Generated { kind: GraphKind, seed: u64 },
    Explicit(Vec<WeightMatrix>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphSequence {
    agents: usize,
    horizon: usize,
    window: usize,
    zeta: f64,
    source: Source,
}

type Edge = (usize, usize);

impl GraphSequence {
    /// Wraps explicit per-round matrices (`matrices[t - 1]`). No stochasticity
    /// or connectivity checks are applied.
    pub fn from_matrices(matrices: Vec<WeightMatrix>, window: usize) -> Result<Self> {
        let horizon = matrices.len();
        if horizon == 0 || window == 0 {
            return Err(invalid("need at least one round and a positive window"));
        }
        let agents = matrices[0].nrows();
        if matrices.iter().any(|m| m.nrows() != agents || m.ncols() != agents) {
            return Err(invalid("weight matrices must all be square of the same size"));
        }
        let mut seq = Self {
            agents,
            horizon,
            window,
            zeta: 0.0,
            source: Source::Explicit(matrices),
        };
        seq.zeta = seq.scan_min_positive();
        Ok(seq)
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Smallest positive weight over all rounds.
    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn kind(&self) -> Option<GraphKind> {
        match self.source {
            Source::Generated { kind, .. } => Some(kind),
            Source::Explicit(_) => None,
        }
    }

    fn scan_min_positive(&self) -> f64 {
        (1..=self.horizon)
            .map(|t| {
                self.weights_unchecked(t)
                    .iter()
                    .copied()
                    .filter(|w| *w > 0.0)
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// `W_t` for `1 ≤ t ≤ horizon`.
    pub fn weights(&self, t: usize) -> Result<WeightMatrix> {
        if t == 0 || t > self.horizon {
            return Err(invalid(format!("round {t} out of range 1..={}", self.horizon)));
        }
        Ok(self.weights_unchecked(t))
    }

    pub(crate) fn weights_unchecked(&self, t: usize) -> WeightMatrix {
        match &self.source {
            Source::Explicit(ms) => ms[t - 1].clone(),
            Source::Generated { kind, seed } => {
                let edges = round_edges(*kind, self.agents, self.window, *seed, t);
                metropolis(self.agents, &edges)
            }
        }
    }

    /// Off-diagonal positive entries of `W_t` as `"sender receiver weight"`
    /// lines (0-based agents).
    pub fn edge_list(&self, t: usize) -> Result<String> {
        let w = self.weights(t)?;
        let mut out = String::new();
        for i in 0..self.agents {
            for j in 0..self.agents {
                if i != j && w[(i, j)] > 0.0 {
                    writeln!(out, "{j} {i} {}", w[(i, j)]).expect("write to string");
                }
            }
        }
        Ok(out)
    }
}

/// Metropolis weights: `1/(1 + max(deg_i, deg_j))` on edges, remainder on the diagonal.
fn metropolis(n: usize, edges: &BTreeSet<Edge>) -> WeightMatrix {
    let mut deg = vec![0usize; n];
    for &(a, b) in edges {
        deg[a] += 1;
        deg[b] += 1;
    }
    let mut w = DMatrix::zeros(n, n);
    for &(a, b) in edges {
        let v = 1.0 / (1 + deg[a].max(deg[b])) as f64;
        w[(a, b)] = v;
        w[(b, a)] = v;
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| w[(i, j)]).sum();
        w[(i, i)] = 1.0 - off;
    }
    w
}

fn ordered(a: usize, b: usize) -> Edge {
    (a.min(b), a.max(b))
}

fn random_tree<R: Rng>(n: usize, rng: &mut R) -> Vec<Edge> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    (1..n)
        .map(|m| ordered(perm[m], perm[rng.random_range(0..m)]))
        .collect()
}

fn random_pair<R: Rng>(n: usize, rng: &mut R) -> Edge {
    let a = rng.random_range(0..n);
    let mut b = rng.random_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    ordered(a, b)
}

/// Undirected edge set of round `t`; windows are `[kQ+1, (k+1)Q]`.
fn round_edges(kind: GraphKind, n: usize, window: usize, seed: u64, t: usize) -> BTreeSet<Edge> {
    let mut edges = BTreeSet::new();
    if n < 2 {
        return edges;
    }
    let k = (t - 1) / window;
    let offset = (t - 1) % window;
    match kind {
        GraphKind::Complete => {
            for a in 0..n {
                for b in a + 1..n {
                    edges.insert((a, b));
                }
            }
        }
        GraphKind::Ring => {
            for a in 0..n {
                edges.insert(ordered(a, (a + 1) % n));
            }
        }
        GraphKind::GossipPairs => {
            let mut rng = rng::stream(seed, Purpose::GraphWindow, k as u64, 0);
            let mut tree = random_tree(n, &mut rng);
            tree.shuffle(&mut rng);
            if offset < tree.len() {
                edges.insert(tree[offset]);
            } else {
                let mut r = rng::stream(seed, Purpose::GraphWindow, k as u64, offset as u64 + 1);
                edges.insert(random_pair(n, &mut r));
            }
        }
        GraphKind::RandomWindow => {
            let mut rng = rng::stream(seed, Purpose::GraphWindow, k as u64, 0);
            for e in random_tree(n, &mut rng) {
                if rng.random_range(0..window) == offset {
                    edges.insert(e);
                }
            }
            let mut r = rng::stream(seed, Purpose::GraphWindow, k as u64, offset as u64 + 1);
            let p = 1.0 / n as f64;
            for a in 0..n {
                for b in a + 1..n {
                    if r.random::<f64>() < p {
                        edges.insert((a, b));
                    }
                }
            }
        }
    }
    edges
}

/// Generates a validated sequence of `horizon` rounds.
pub fn generate_graphs(
    kind: GraphKind,
    agents: usize,
    horizon: usize,
    window: usize,
    seed: u64,
) -> Result<GraphSequence> {
    if agents == 0 || horizon == 0 || window == 0 {
        return Err(invalid("agents, horizon and window must all be at least 1"));
    }
    if kind == GraphKind::GossipPairs {
        if agents < 2 {
            return Err(Error::Construction {
                check: "joint_connectivity".into(),
                detail: "gossip_pairs needs at least two agents".into(),
            });
        }
        if window < agents - 1 {
            return Err(Error::Construction {
                check: "joint_connectivity".into(),
                detail: format!(
                    "gossip_pairs activates one edge per round; window {window} cannot cover \
                     a spanning tree of {agents} agents"
                ),
            });
        }
    }
    let mut seq = GraphSequence {
        agents,
        horizon,
        window,
        zeta: 0.0,
        source: Source::Generated { kind, seed },
    };
    for t in 1..=horizon {
        if !check_double_stochastic(&seq.weights_unchecked(t), STOCHASTIC_TOL) {
            return Err(Error::Construction {
                check: "double_stochastic".into(),
                detail: format!("round {t}"),
            });
        }
    }
    if !check_joint_connectivity(&seq, window) {
        return Err(Error::Construction {
            check: "joint_connectivity".into(),
            detail: format!("some window of length {window} is not strongly connected"),
        });
    }
    seq.zeta = seq.scan_min_positive();
    Ok(seq)
}

/// Row and column sums all within `tol` of one.
pub fn check_double_stochastic(w: &WeightMatrix, tol: f64) -> bool {
    if w.nrows() != w.ncols() {
        return false;
    }
    let rows_ok = w.row_iter().all(|r| (r.sum() - 1.0).abs() <= tol);
    let cols_ok = w.column_iter().all(|c| (c.sum() - 1.0).abs() <= tol);
    rows_ok && cols_ok
}

fn strongly_connected(adj: &[Vec<bool>]) -> bool {
    let n = adj.len();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                let e = if forward { adj[u][v] } else { adj[v][u] };
                if e && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    n <= 1 || (reach(true) && reach(false))
}

/// Whether the union graph over every full window `[kQ+1, (k+1)Q]` inside the
/// horizon is strongly connected. A horizon shorter than `Q` is checked as a
/// single partial window.
pub fn check_joint_connectivity(seq: &GraphSequence, window: usize) -> bool {
    if window == 0 {
        return false;
    }
    let n = seq.agents;
    let full = seq.horizon / window;
    let windows: Vec<(usize, usize)> = if full == 0 {
        vec![(1, seq.horizon)]
    } else {
        (0..full).map(|k| (k * window + 1, (k + 1) * window)).collect()
    };
    windows.into_iter().all(|(start, end)| {
        // adj[sender][receiver]
        let mut adj = vec![vec![false; n]; n];
        for t in start..=end {
            let w = seq.weights_unchecked(t);
            for i in 0..n {
                for j in 0..n {
                    if i != j && w[(i, j)] > 0.0 {
                        adj[j][i] = true;
                    }
                }
            }
        }
        strongly_connected(&adj)
    })
}

/// `Φ(t, s) = W_t W_{t−1} ⋯ W_s`.
pub fn transition_matrix(seq: &GraphSequence, t: usize, s: usize) -> Result<WeightMatrix> {
    if s == 0 || t < s {
        return Err(invalid(format!("transition matrix needs t ≥ s ≥ 1, got t={t}, s={s}")));
    }
    let mut phi = seq.weights(s)?;
    for u in s + 1..=t {
        phi = seq.weights(u)? * phi;
    }
    Ok(phi)
}

/// Geometric mixing rate `σ` and prefactor `Γ` bounding `|[Φ(t,s)]_{ij} − 1/n| ≤ Γσ^{t−s}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingConstants {
    pub sigma: f64,
    pub gamma: f64,
}

pub fn mixing_constants(agents: usize, zeta: f64, window: usize) -> Result<MixingConstants> {
    if agents == 0 || window == 0 {
        return Err(invalid("agents and window must be at least 1"));
    }
    if !(zeta > 0.0 && zeta <= 1.0) {
        return Err(invalid(format!("zeta must lie in (0, 1], got {zeta}")));
    }
    let n = agents as f64;
    let q = window as f64;
    let base = 1.0 - zeta / (4.0 * n * n);
    Ok(MixingConstants {
        sigma: base.powf(1.0 / q),
        gamma: base.powf((1.0 - 2.0 * q) / q),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> WeightMatrix {
        let n = rows.len();
        DMatrix::from_fn(n, n, |i, j| rows[i][j])
    }

    #[test]
    fn complete_and_ring_weights() {
        let seq = generate_graphs(GraphKind::Complete, 3, 4, 1, 0).unwrap();
        for t in 1..=4 {
            let w = seq.weights(t).unwrap();
            assert!(w.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        }
        let seq = generate_graphs(GraphKind::Ring, 2, 3, 1, 0).unwrap();
        assert_eq!(seq.weights(2).unwrap(), m(&[&[0.5, 0.5], &[0.5, 0.5]]));
        assert_eq!(seq.zeta(), 0.5);
    }

    #[test]
    fn generated_sequences_are_valid() {
        for kind in [GraphKind::Complete, GraphKind::Ring, GraphKind::GossipPairs, GraphKind::RandomWindow] {
            let seq = generate_graphs(kind, 10, 60, 12, 42).unwrap();
            assert!(check_joint_connectivity(&seq, 12));
            let mut min_pos = f64::INFINITY;
            for t in 1..=60 {
                let w = seq.weights(t).unwrap();
                assert_eq!(w, w.transpose());
                assert!(check_double_stochastic(&w, 1e-12));
                for i in 0..10 {
                    assert!(w[(i, i)] > 0.0);
                }
                min_pos = w.iter().copied().filter(|v| *v > 0.0).fold(min_pos, f64::min);
            }
            assert_eq!(seq.zeta(), min_pos);
        }
    }

    #[test]
    fn random_window_connects_each_window() {
        let seq = generate_graphs(GraphKind::RandomWindow, 10, 100, 5, 1).unwrap();
        assert!(check_joint_connectivity(&seq, 5));
    }

    #[test]
    fn infeasible_gossip_rejected() {
        let e = generate_graphs(GraphKind::GossipPairs, 1, 5, 1, 0).unwrap_err();
        assert!(matches!(e, Error::Construction { ref check, .. } if check == "joint_connectivity"));
        assert!(generate_graphs(GraphKind::GossipPairs, 10, 20, 5, 0).is_err());
        assert!(generate_graphs(GraphKind::GossipPairs, 10, 20, 9, 0).is_ok());
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_graphs(GraphKind::RandomWindow, 6, 20, 4, 9).unwrap();
        let b = generate_graphs(GraphKind::RandomWindow, 6, 20, 4, 9).unwrap();
        for t in 1..=20 {
            assert_eq!(a.weights(t).unwrap(), b.weights(t).unwrap());
        }
    }

    #[test]
    fn double_stochastic_examples() {
        assert!(check_double_stochastic(&m(&[&[0.5, 0.5], &[0.5, 0.5]]), 1e-12));
        assert!(!check_double_stochastic(&m(&[&[1.0, 0.0], &[0.5, 0.5]]), 1e-12));
        assert!(check_double_stochastic(&DMatrix::identity(4, 4), 1e-12));
    }

    #[test]
    fn joint_connectivity_examples() {
        let complete = generate_graphs(GraphKind::Complete, 4, 6, 1, 0).unwrap();
        assert!(check_joint_connectivity(&complete, 1));
        assert!(check_joint_connectivity(&complete, 3));

        let empty = GraphSequence::from_matrices(vec![DMatrix::identity(3, 3); 4], 2).unwrap();
        assert!(!check_joint_connectivity(&empty, 2));

        // round 1: 0 → 1, round 2: 1 → 0
        let fwd = m(&[&[1.0, 0.0], &[0.5, 0.5]]);
        let back = m(&[&[0.5, 0.5], &[0.0, 1.0]]);
        let alt = GraphSequence::from_matrices(vec![fwd.clone(), back.clone(), fwd, back], 1).unwrap();
        assert!(check_joint_connectivity(&alt, 2));
        assert!(!check_joint_connectivity(&alt, 1));
    }

    #[test]
    fn transition_matrix_examples() {
        let seq = generate_graphs(GraphKind::RandomWindow, 5, 10, 3, 2).unwrap();
        assert_eq!(transition_matrix(&seq, 4, 4).unwrap(), seq.weights(4).unwrap());
        let ident = GraphSequence::from_matrices(vec![DMatrix::identity(3, 3); 5], 1).unwrap();
        assert_eq!(transition_matrix(&ident, 5, 1).unwrap(), DMatrix::identity(3, 3));
        assert!(transition_matrix(&seq, 2, 3).is_err());
        assert!(transition_matrix(&seq, 11, 1).is_err());
        let ones = DMatrix::from_element(5, 1, 1.0);
        let out = transition_matrix(&seq, 10, 1).unwrap() * &ones;
        assert!(out.iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn mixing_constant_examples() {
        let c = mixing_constants(2, 0.25, 1).unwrap();
        assert_eq!(c.sigma, 0.984375);
        assert!((c.gamma - 1.0 / 0.984375).abs() < 1e-15);
        assert!((c.gamma - 1.015873).abs() < 1e-6);
        let c = mixing_constants(1, 1.0, 1).unwrap();
        assert_eq!(c.sigma, 0.75);
        assert!((c.gamma - 4.0 / 3.0).abs() < 1e-15);
        let sig: Vec<f64> = (1..6).map(|q| mixing_constants(4, 0.3, q).unwrap().sigma).collect();
        assert!(sig.windows(2).all(|w| w[1] > w[0]));
        assert!(mixing_constants(2, 0.0, 1).is_err());
        assert!(mixing_constants(2, 1.5, 1).is_err());
    }

    #[test]
    fn edge_list_format() {
        let seq = generate_graphs(GraphKind::Ring, 2, 1, 1, 0).unwrap();
        assert_eq!(seq.edge_list(1).unwrap(), "1 0 0.5\n0 1 0.5\n");
    }
}
