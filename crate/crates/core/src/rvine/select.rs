//! Sequential (tree-by-tree) structure selection and estimation.

use rayon::prelude::*;

use super::structure::VineEdge;
use super::RVineSpec;
use crate::bicop::{
    empirical_tau, independence_threshold, select_family, CopulaFamily, FittedBicop,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SelectOptions {
    pub candidates: Vec<CopulaFamily>,
    /// Assign the independence copula to pairs whose |tau| is below the 5%
    /// critical value instead of fitting them.
    pub independence_test: bool,
}

impl Default for SelectOptions {
    fn default() -> Self {
        SelectOptions {
            candidates: CopulaFamily::ALL.to_vec(),
            independence_test: true,
        }
    }
}

/// Edge of the tree under construction, with its conditional
/// pseudo-observations for the next tree.
struct Node {
    /// Conditioned pair; `a` is the copula's first argument.
    a: usize,
    b: usize,
    mask: u64,
    /// Endpoints in the previous tree (variables for tree 1).
    ends: (usize, usize),
    copula: FittedBicop,
    /// F(a | b, D)
    h_a: Vec<f64>,
    /// F(b | a, D)
    h_b: Vec<f64>,
}

impl Node {
    fn union(&self) -> u64 {
        self.mask | (1u64 << self.a) | (1u64 << self.b)
    }
}

struct Candidate {
    i: usize,
    j: usize,
    tau: f64,
}

/// Maximum spanning tree by Prim's algorithm. Ties go to the
/// lexicographically smallest `(i, j)`.
fn prim(n_nodes: usize, candidates: &[Candidate]) -> Vec<usize> {
    let mut in_tree = vec![false; n_nodes];
    in_tree[0] = true;
    let mut chosen = Vec::with_capacity(n_nodes.saturating_sub(1));
    for _ in 1..n_nodes {
        let mut best: Option<usize> = None;
        for (idx, c) in candidates.iter().enumerate() {
            if in_tree[c.i] == in_tree[c.j] {
                continue;
            }
            best = match best {
                None => Some(idx),
                Some(b) => {
                    let (wb, wc) = (candidates[b].tau.abs(), c.tau.abs());
                    if wc > wb || (wc == wb && (c.i, c.j) < (candidates[b].i, candidates[b].j)) {
                        Some(idx)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        let Some(b) = best else { break };
        in_tree[candidates[b].i] = true;
        in_tree[candidates[b].j] = true;
        chosen.push(b);
    }
    chosen
}

fn edge_label(a: usize, b: usize, mask: u64) -> String {
    let cond: Vec<String> = (0..64)
        .filter(|v| mask & (1u64 << v) != 0)
        .map(|v| (v + 1).to_string())
        .collect();
    if cond.is_empty() {
        format!("{},{}", a + 1, b + 1)
    } else {
        format!("{},{}|{}", a + 1, b + 1, cond.join(","))
    }
}

fn fit_pair(u: &[f64], v: &[f64], tau: f64, opts: &SelectOptions) -> Result<FittedBicop> {
    if opts.independence_test && tau.abs() < independence_threshold(u.len()) {
        return Ok(FittedBicop {
            n_obs: u.len(),
            ..FittedBicop::independence()
        });
    }
    select_family(u, v, &opts.candidates)
}

fn make_node(
    a: usize,
    b: usize,
    mask: u64,
    ends: (usize, usize),
    ua: &[f64],
    ub: &[f64],
    tau: f64,
    opts: &SelectOptions,
) -> Result<Node> {
    let copula = fit_pair(ua, ub, tau, opts).map_err(|e| Error::Edge {
        edge: edge_label(a, b, mask),
        source: Box::new(e),
    })?;
    let t = copula.transposed();
    let h_a = ua
        .iter()
        .zip(ub)
        .map(|(&x, &y)| copula.h_unchecked(x, y))
        .collect();
    let h_b = ua
        .iter()
        .zip(ub)
        .map(|(&x, &y)| t.h_unchecked(y, x))
        .collect();
    Ok(Node {
        a,
        b,
        mask,
        ends,
        copula,
        h_a,
        h_b,
    })
}

/// Selects and fits an R-vine to uniform pseudo-observations (one vector
/// per variable): each tree is the maximum spanning tree on |Kendall's tau|
/// among the edges allowed by the proximity condition.
pub fn select_and_fit(columns: &[Vec<f64>], opts: &SelectOptions) -> Result<RVineSpec> {
    let n = columns.len();
    if n < 2 {
        return Err(Error::DimensionMismatch(format!(
            "need at least 2 variables, got {n}"
        )));
    }
    if n > super::MAX_DIMENSION {
        return Err(Error::DimensionMismatch(format!(
            "at most {} variables",
            super::MAX_DIMENSION
        )));
    }
    let m = columns[0].len();
    if let Some(bad) = columns.iter().find(|c| c.len() != m) {
        return Err(Error::LengthMismatch {
            left: m,
            right: bad.len(),
        });
    }
    if m < 8 {
        return Err(Error::DegenerateSample(format!(
            "{m} observations, need at least 8"
        )));
    }
    if opts.candidates.is_empty() {
        return Err(Error::FitFailure("empty candidate set".into()));
    }

    let mut all_edges: Vec<VineEdge> = Vec::with_capacity(n * (n - 1) / 2);

    // tree 1
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let taus: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| empirical_tau(&columns[i], &columns[j]))
        .collect::<Result<_>>()?;
    let cands: Vec<Candidate> = pairs
        .iter()
        .zip(&taus)
        .map(|(&(i, j), &tau)| Candidate { i, j, tau })
        .collect();
    let chosen = prim(n, &cands);
    let mut nodes: Vec<Node> = chosen
        .par_iter()
        .map(|&c| {
            let Candidate { i, j, tau } = cands[c];
            make_node(i, j, 0, (i, j), &columns[i], &columns[j], tau, opts)
        })
        .collect::<Result<_>>()?;

    for tree in 2..n {
        push_edges(&mut all_edges, &nodes, tree - 1);
        let k = nodes.len();
        let mut joins = Vec::new();
        for i in 0..k {
            for j in i + 1..k {
                let (a, b) = (&nodes[i], &nodes[j]);
                let shared = a.ends.0 == b.ends.0
                    || a.ends.0 == b.ends.1
                    || a.ends.1 == b.ends.0
                    || a.ends.1 == b.ends.1;
                if shared {
                    joins.push((i, j));
                }
            }
        }
        let prepared: Vec<(usize, usize, u64, &[f64], &[f64])> = joins
            .iter()
            .map(|&(i, j)| {
                let (e1, e2) = (&nodes[i], &nodes[j]);
                let mask = e1.union() & e2.union();
                let c1 = if mask & (1u64 << e1.a) == 0 {
                    e1.a
                } else {
                    e1.b
                };
                let c2 = if mask & (1u64 << e2.a) == 0 {
                    e2.a
                } else {
                    e2.b
                };
                let p1 = if c1 == e1.a { &e1.h_a } else { &e1.h_b };
                let p2 = if c2 == e2.a { &e2.h_a } else { &e2.h_b };
                if c1 < c2 {
                    (c1, c2, mask, p1.as_slice(), p2.as_slice())
                } else {
                    (c2, c1, mask, p2.as_slice(), p1.as_slice())
                }
            })
            .collect();
        let taus: Vec<f64> = prepared
            .par_iter()
            .map(|(_, _, _, p, q)| empirical_tau(p, q))
            .collect::<Result<_>>()?;
        let cands: Vec<Candidate> = joins
            .iter()
            .zip(&taus)
            .map(|(&(i, j), &tau)| Candidate { i, j, tau })
            .collect();
        let chosen = prim(k, &cands);
        let next: Vec<Node> = chosen
            .par_iter()
            .map(|&c| {
                let cand = &cands[c];
                let join = joins
                    .iter()
                    .position(|&p| p == (cand.i, cand.j))
                    .expect("candidate join");
                let (a, b, mask, p, q) = prepared[join];
                make_node(a, b, mask, (cand.i, cand.j), p, q, cand.tau, opts)
            })
            .collect::<Result<_>>()?;
        nodes = next;
    }
    push_edges(&mut all_edges, &nodes, n - 1);

    RVineSpec::from_edges(n, &all_edges)
}

fn push_edges(out: &mut Vec<VineEdge>, nodes: &[Node], tree: usize) {
    for node in nodes {
        out.push(VineEdge {
            tree,
            conditioned: (node.a, node.b),
            conditioning: (0..64).filter(|v| node.mask & (1u64 << v) != 0).collect(),
            copula: node.copula,
        });
    }
}
