//! Lower-triangular structure matrices and the evaluation plan derived from
//! them.
//!
//! Column `k` of the matrix `M` (0-based) describes the edges whose first
//! conditioned variable is the diagonal entry `M[k][k]`. Row `i > k` holds the
//! partner `M[i][k]`, and the conditioning set is `{M[r][k] : r > i}`. Row
//! `n−1` is the first tree and row `k+1` the deepest tree of the column.
//! The pair copula stored at `(i, k)` is the copula of
//! `(F(M[k][k] | D), F(M[i][k] | D))`, in that argument order.

use std::collections::HashMap;

use crate::bicop::FittedBicop;
use crate::error::{Error, Result};

pub const MAX_DIMENSION: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Source {
    Var(usize),
    Forward(usize),
    Reverse(usize),
}

/// One pair copula located in the structure matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct VineEdge {
    /// Tree level, starting at 1.
    pub tree: usize,
    /// Conditioned pair `(x, y)`, 0-based; the copula's first argument is `x`.
    pub conditioned: (usize, usize),
    /// Conditioning variables, ascending, 0-based.
    pub conditioning: Vec<usize>,
    pub copula: FittedBicop,
}

#[derive(Debug, Clone)]
pub(crate) struct PlanEdge {
    pub col: usize,
    pub row: usize,
    pub tree: usize,
    pub x: usize,
    pub y: usize,
    pub mask: u64,
    pub copula: FittedBicop,
    pub u_src: Source,
    pub v_src: Source,
    pub need_forward: bool,
    pub need_reverse: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct Plan {
    /// Edges sorted by tree level.
    pub edges: Vec<PlanEdge>,
    /// Per column, plan indices from the deepest tree down to tree 1.
    pub columns: Vec<Vec<usize>>,
    pub diagonal: Vec<usize>,
}

fn bit(v: usize) -> u64 {
    1u64 << v
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidStructure(msg.into())
}

/// Checks the shape and labelling of a 1-based structure matrix and builds
/// the evaluation plan. Fails on anything that is not a regular vine.
pub(crate) fn build_plan(structure: &[Vec<usize>], copulas: &[Vec<FittedBicop>]) -> Result<Plan> {
    let n = structure.len();
    if n < 2 {
        return Err(invalid("dimension must be at least 2"));
    }
    if n > MAX_DIMENSION {
        return Err(invalid(format!("dimension {n} exceeds {MAX_DIMENSION}")));
    }
    if structure.iter().any(|r| r.len() != n)
        || copulas.len() != n
        || copulas.iter().any(|r| r.len() != n)
    {
        return Err(invalid("matrices must be square and of equal size"));
    }
    for (i, row) in structure.iter().enumerate() {
        for (k, &e) in row.iter().enumerate() {
            if k > i && e != 0 {
                return Err(invalid(format!(
                    "entry ({i},{k}) above the diagonal must be 0"
                )));
            }
            if k <= i && !(1..=n).contains(&e) {
                return Err(invalid(format!("entry ({i},{k}) = {e} outside 1..={n}")));
            }
        }
    }
    let diagonal: Vec<usize> = (0..n).map(|k| structure[k][k] - 1).collect();
    let mut seen = 0u64;
    for &d in &diagonal {
        if seen & bit(d) != 0 {
            return Err(invalid("diagonal is not a permutation"));
        }
        seen |= bit(d);
    }
    for k in 0..n {
        let mut col = bit(diagonal[k]);
        for row in structure.iter().skip(k + 1) {
            let v = row[k] - 1;
            if col & bit(v) != 0 {
                return Err(invalid(format!("column {k} repeats variable {}", v + 1)));
            }
            col |= bit(v);
        }
        // the partners of column k must be variables placed later on the diagonal
        let later: u64 = diagonal[k + 1..].iter().fold(0, |m, &d| m | bit(d));
        if col & !bit(diagonal[k]) & !later != 0 {
            return Err(invalid(format!(
                "column {k} references an earlier diagonal variable"
            )));
        }
    }

    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    let mut at: HashMap<(usize, usize), usize> = HashMap::new();
    let mut by_key: HashMap<(usize, usize, u64), usize> = HashMap::new();
    for k in 0..n - 1 {
        for i in (k + 1..n).rev() {
            let x = diagonal[k];
            let y = structure[i][k] - 1;
            let mask = structure[i + 1..]
                .iter()
                .fold(0u64, |m, r| m | bit(r[k] - 1));
            let copula = copulas[i][k];
            copula.check().map_err(|e| Error::Edge {
                edge: format!("({},{})", i, k),
                source: Box::new(e),
            })?;
            let key = (x.min(y), x.max(y), mask);
            if by_key.insert(key, edges.len()).is_some() {
                return Err(invalid(format!("edge {}-{} repeated", x + 1, y + 1)));
            }
            at.insert((i, k), edges.len());
            edges.push(PlanEdge {
                col: k,
                row: i,
                tree: n - i,
                x,
                y,
                mask,
                copula,
                u_src: Source::Var(x),
                v_src: Source::Var(y),
                need_forward: false,
                need_reverse: false,
            });
        }
    }

    // tree 1 must be a spanning tree
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut a: usize) -> usize {
        while p[a] != a {
            p[a] = p[p[a]];
            a = p[a];
        }
        a
    }
    for e in edges.iter().filter(|e| e.tree == 1) {
        let (ra, rb) = (find(&mut parent, e.x), find(&mut parent, e.y));
        if ra == rb {
            return Err(invalid("first tree contains a cycle"));
        }
        parent[ra] = rb;
    }

    for idx in 0..edges.len() {
        let e = edges[idx].clone();
        if e.tree == 1 {
            continue;
        }
        let below = at[&(e.row + 1, e.col)];
        edges[idx].u_src = Source::Forward(below);
        edges[below].need_forward = true;

        let mut found = None;
        for z in 0..n {
            if e.mask & bit(z) == 0 {
                continue;
            }
            let key = (e.y.min(z), e.y.max(z), e.mask & !bit(z));
            if let Some(&j) = by_key.get(&key) {
                if found.is_some() {
                    return Err(invalid(format!(
                        "ambiguous source for edge {}-{}",
                        e.x + 1,
                        e.y + 1
                    )));
                }
                found = Some(j);
            }
        }
        let j = found.ok_or_else(|| {
            invalid(format!(
                "no edge supplies F({} | conditioning) for edge {}-{} in tree {}",
                e.y + 1,
                e.x + 1,
                e.y + 1,
                e.tree
            ))
        })?;
        if edges[j].x == e.y {
            edges[idx].v_src = Source::Forward(j);
            edges[j].need_forward = true;
        } else {
            edges[idx].v_src = Source::Reverse(j);
            edges[j].need_reverse = true;
        }
    }

    let plan = finish_plan(n, edges, diagonal, &at);
    if !proximity_holds(&plan) {
        return Err(invalid("proximity condition violated"));
    }
    Ok(plan)
}

fn finish_plan(
    n: usize,
    edges: Vec<PlanEdge>,
    diagonal: Vec<usize>,
    at: &HashMap<(usize, usize), usize>,
) -> Plan {
    // reorder by tree level, remapping sources
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_by_key(|&i| (edges[i].tree, edges[i].col));
    let mut new_index = vec![0; edges.len()];
    for (new, &old) in order.iter().enumerate() {
        new_index[old] = new;
    }
    let remap = |s: Source| match s {
        Source::Var(v) => Source::Var(v),
        Source::Forward(j) => Source::Forward(new_index[j]),
        Source::Reverse(j) => Source::Reverse(new_index[j]),
    };
    let sorted: Vec<PlanEdge> = order
        .iter()
        .map(|&i| {
            let mut e = edges[i].clone();
            e.u_src = remap(e.u_src);
            e.v_src = remap(e.v_src);
            e
        })
        .collect();
    let columns = (0..n)
        .map(|k| (k + 1..n).map(|i| new_index[at[&(i, k)]]).collect())
        .collect();
    Plan {
        edges: sorted,
        columns,
        diagonal,
    }
}

fn union(e: &PlanEdge) -> u64 {
    e.mask | bit(e.x) | bit(e.y)
}

fn source_edge(s: Source) -> Option<usize> {
    match s {
        Source::Var(_) => None,
        Source::Forward(j) | Source::Reverse(j) => Some(j),
    }
}

/// Every edge in tree `t ≥ 3` joins two tree-`(t−1)` edges that share a
/// tree-`(t−2)` edge, namely the one whose variables form the conditioning set.
pub(crate) fn proximity_holds(plan: &Plan) -> bool {
    plan.edges.iter().filter(|e| e.tree >= 2).all(|e| {
        let (Some(a), Some(b)) = (source_edge(e.u_src), source_edge(e.v_src)) else {
            return false;
        };
        let (ea, eb) = (&plan.edges[a], &plan.edges[b]);
        if ea.tree != e.tree - 1 || eb.tree != e.tree - 1 {
            return false;
        }
        if union(ea) & union(eb) != e.mask {
            return false;
        }
        if e.tree == 2 {
            return true;
        }
        let shares = |p: &PlanEdge| {
            [source_edge(p.u_src), source_edge(p.v_src)]
                .into_iter()
                .flatten()
                .any(|s| union(&plan.edges[s]) == e.mask)
        };
        shares(ea) && shares(eb)
    })
}

/// Arranges a complete set of vine edges into a structure matrix by peeling
/// off one leaf variable per column.
pub(crate) fn edges_to_matrix(
    n: usize,
    edges: &[VineEdge],
) -> Result<(Vec<Vec<usize>>, Vec<Vec<FittedBicop>>)> {
    let mut structure = vec![vec![0usize; n]; n];
    let mut copulas = vec![vec![FittedBicop::independence(); n]; n];
    let mut remaining: Vec<&VineEdge> = edges.iter().collect();
    let mut vars: Vec<usize> = (0..n).collect();

    for k in 0..n {
        if k == n - 1 {
            structure[k][k] = vars[0] + 1;
            break;
        }
        let level = n - 1 - k;
        let top = remaining
            .iter()
            .find(|e| e.tree == level)
            .ok_or_else(|| invalid(format!("no edge in tree {level}")))?;
        let mut placed = false;
        for cand in [top.conditioned.0, top.conditioned.1] {
            if let Some(chain) = leaf_chain(cand, level, &remaining) {
                structure[k][k] = cand + 1;
                for (t, &ei) in chain.iter().enumerate() {
                    let e = remaining[ei];
                    let row = n - 1 - t;
                    let partner = if e.conditioned.0 == cand {
                        e.conditioned.1
                    } else {
                        e.conditioned.0
                    };
                    structure[row][k] = partner + 1;
                    copulas[row][k] = if e.conditioned.0 == cand {
                        e.copula
                    } else {
                        e.copula.transposed()
                    };
                }
                let mut drop = chain.clone();
                drop.sort_unstable_by(|a, b| b.cmp(a));
                for ei in drop {
                    remaining.remove(ei);
                }
                vars.retain(|&v| v != cand);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(invalid(format!("no leaf variable found for column {k}")));
        }
    }
    Ok((structure, copulas))
}

/// Indices (into `remaining`) of the edges containing `cand`, one per tree
/// from 1 to `levels`, if `cand` can be peeled off as a leaf.
fn leaf_chain(cand: usize, levels: usize, remaining: &[&VineEdge]) -> Option<Vec<usize>> {
    if remaining.iter().any(|e| e.conditioning.contains(&cand)) {
        return None;
    }
    let mut chain = Vec::with_capacity(levels);
    let mut expected: Vec<usize> = Vec::new();
    for t in 1..=levels {
        let hits: Vec<usize> = remaining
            .iter()
            .enumerate()
            .filter(|(_, e)| e.tree == t && (e.conditioned.0 == cand || e.conditioned.1 == cand))
            .map(|(i, _)| i)
            .collect();
        if hits.len() != 1 {
            return None;
        }
        let e = remaining[hits[0]];
        let mut cond = e.conditioning.clone();
        cond.sort_unstable();
        let mut exp = expected.clone();
        exp.sort_unstable();
        if cond != exp {
            return None;
        }
        let partner = if e.conditioned.0 == cand {
            e.conditioned.1
        } else {
            e.conditioned.0
        };
        expected.push(partner);
        chain.push(hits[0]);
    }
    Some(chain)
}
