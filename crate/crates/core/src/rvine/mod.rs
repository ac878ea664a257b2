//! Regular vines: sequential selection, joint copula density and sampling.

mod select;
mod structure;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bicop::{CopulaFamily, FittedBicop};
use crate::error::{Error, Result};

pub use select::{select_and_fit, SelectOptions};
use structure::{build_plan, Plan, Source};
pub use structure::{VineEdge, MAX_DIMENSION};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "RVineJson", try_from = "RVineJson")]
pub struct RVineSpec {
    structure: Vec<Vec<usize>>,
    copulas: Vec<Vec<FittedBicop>>,
    plan: Plan,
}

impl PartialEq for RVineSpec {
    fn eq(&self, other: &Self) -> bool {
        self.structure == other.structure && self.copulas == other.copulas
    }
}

/// Serialized form: square matrices listed row by row.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RVineJson {
    dimension: usize,
    structure: Vec<Vec<usize>>,
    families: Vec<Vec<String>>,
    theta: Vec<Vec<f64>>,
    theta2: Vec<Vec<f64>>,
}

impl From<RVineSpec> for RVineJson {
    fn from(v: RVineSpec) -> Self {
        let table = |f: &dyn Fn(&FittedBicop) -> f64| -> Vec<Vec<f64>> {
            v.copulas
                .iter()
                .map(|r| r.iter().map(f).collect())
                .collect()
        };
        RVineJson {
            dimension: v.structure.len(),
            families: v
                .copulas
                .iter()
                .map(|r| r.iter().map(|c| c.family.name().to_string()).collect())
                .collect(),
            theta: table(&|c| c.theta),
            theta2: table(&|c| c.theta2.unwrap_or(0.0)),
            structure: v.structure,
        }
    }
}

impl TryFrom<RVineJson> for RVineSpec {
    type Error = Error;

    fn try_from(doc: RVineJson) -> Result<Self> {
        let n = doc.dimension;
        let square = |m: usize, rows: Vec<usize>| m == n && rows.iter().all(|&r| r == n);
        if !square(
            doc.structure.len(),
            doc.structure.iter().map(Vec::len).collect(),
        ) || !square(
            doc.families.len(),
            doc.families.iter().map(Vec::len).collect(),
        ) || !square(doc.theta.len(), doc.theta.iter().map(Vec::len).collect())
            || !square(doc.theta2.len(), doc.theta2.iter().map(Vec::len).collect())
        {
            return Err(Error::InvalidStructure(format!("matrices must be {n}x{n}")));
        }
        let mut copulas = vec![vec![FittedBicop::independence(); n]; n];
        for i in 0..n {
            for k in 0..i {
                let family: CopulaFamily = doc.families[i][k].parse()?;
                let theta2 = (family == CopulaFamily::StudentT).then_some(doc.theta2[i][k]);
                copulas[i][k] = FittedBicop::new(family, doc.theta[i][k], theta2)?;
            }
        }
        RVineSpec::from_matrices(doc.structure, copulas)
    }
}

#[derive(Clone, Copy, Default)]
struct Slot {
    u: f64,
    v: f64,
    forward: f64,
    reverse: f64,
}

impl RVineSpec {
    /// Builds a vine from a 1-based lower-triangular structure matrix and the
    /// pair copulas at the matching positions (entries on or above the
    /// diagonal are ignored).
    pub fn from_matrices(
        structure: Vec<Vec<usize>>,
        copulas: Vec<Vec<FittedBicop>>,
    ) -> Result<Self> {
        let n = structure.len();
        let mut copulas = copulas;
        for (i, row) in copulas.iter_mut().enumerate() {
            for (k, c) in row.iter_mut().enumerate() {
                if k >= i {
                    *c = FittedBicop::independence();
                }
            }
        }
        if copulas.len() != n {
            return Err(Error::InvalidStructure("copula matrix size".into()));
        }
        let plan = build_plan(&structure, &copulas)?;
        Ok(RVineSpec {
            structure,
            copulas,
            plan,
        })
    }

    pub fn from_edges(n: usize, edges: &[VineEdge]) -> Result<Self> {
        if edges.len() != n * (n - 1) / 2 {
            return Err(Error::InvalidStructure(format!(
                "{} edges for dimension {n}, expected {}",
                edges.len(),
                n * (n - 1) / 2
            )));
        }
        let (structure, copulas) = structure::edges_to_matrix(n, edges)?;
        Self::from_matrices(structure, copulas)
    }

    pub fn dimension(&self) -> usize {
        self.structure.len()
    }

    pub fn structure(&self) -> &[Vec<usize>] {
        &self.structure
    }

    pub fn copula_at(&self, row: usize, col: usize) -> &FittedBicop {
        &self.copulas[row][col]
    }

    pub fn families(&self) -> Vec<Vec<CopulaFamily>> {
        self.copulas
            .iter()
            .map(|r| r.iter().map(|c| c.family).collect())
            .collect()
    }

    pub fn n_trees(&self) -> usize {
        self.dimension() - 1
    }

    /// All pair copulas with their conditioned and conditioning sets, in tree order.
    pub fn edges(&self) -> Vec<VineEdge> {
        self.plan
            .edges
            .iter()
            .map(|e| VineEdge {
                tree: e.tree,
                conditioned: (e.x, e.y),
                conditioning: (0..self.dimension())
                    .filter(|&v| e.mask & (1u64 << v) != 0)
                    .collect(),
                copula: e.copula,
            })
            .collect()
    }

    pub fn tree_edges(&self, tree: usize) -> Vec<VineEdge> {
        self.edges()
            .into_iter()
            .filter(|e| e.tree == tree)
            .collect()
    }

    /// Whether the proximity condition holds for the stored structure.
    pub fn satisfies_proximity(&self) -> bool {
        structure::proximity_holds(&self.plan)
    }

    pub fn total_loglik(&self) -> f64 {
        self.plan.edges.iter().map(|e| e.copula.loglik).sum()
    }

    fn resolve(&self, src: Source, vars: &[f64], slots: &[Slot]) -> f64 {
        match src {
            Source::Var(v) => vars[v],
            Source::Forward(j) => slots[j].forward,
            Source::Reverse(j) => slots[j].reverse,
        }
    }

    /// Log of the vine copula density at `u` (one value per variable).
    pub fn log_density(&self, u: &[f64]) -> Result<f64> {
        let n = self.dimension();
        if u.len() != n {
            return Err(Error::LengthMismatch {
                left: n,
                right: u.len(),
            });
        }
        let mut slots = vec![Slot::default(); self.plan.edges.len()];
        let mut total = 0.0;
        for (idx, e) in self.plan.edges.iter().enumerate() {
            let a = self.resolve(e.u_src, u, &slots);
            let b = self.resolve(e.v_src, u, &slots);
            total += e.copula.log_density_unchecked(a, b);
            let slot = &mut slots[idx];
            slot.u = a;
            slot.v = b;
            if e.need_forward {
                slot.forward = e.copula.h_unchecked(a, b);
            }
            if e.need_reverse {
                slot.reverse = e.copula.transposed().h_unchecked(b, a);
            }
        }
        Ok(total)
    }

    /// Transforms one row of independent uniforms into a vine draw.
    /// `w[0]` drives the last diagonal variable, `w[j]` column `n−1−j`.
    pub fn inverse_rosenblatt(&self, w: &[f64]) -> Result<Vec<f64>> {
        let n = self.dimension();
        let mut vars = vec![0.0; n];
        let mut slots = vec![Slot::default(); self.plan.edges.len()];
        vars[self.plan.diagonal[n - 1]] = w[0];
        for (j, k) in (0..n - 1).rev().enumerate() {
            let mut cur = w[j + 1];
            for &idx in &self.plan.columns[k] {
                let e = &self.plan.edges[idx];
                let v = self.resolve(e.v_src, &vars, &slots);
                let u = e.copula.inv_h_unchecked(cur, v)?;
                slots[idx] = Slot {
                    u,
                    v,
                    forward: cur,
                    reverse: 0.0,
                };
                cur = u;
            }
            vars[self.plan.diagonal[k]] = cur;
            for &idx in &self.plan.columns[k] {
                let e = &self.plan.edges[idx];
                if e.need_reverse {
                    let s = slots[idx];
                    slots[idx].reverse = e.copula.transposed().h_unchecked(s.v, s.u);
                }
            }
        }
        Ok(vars)
    }

    /// `rows` draws from the vine copula; each row consumes exactly `n`
    /// uniforms from a ChaCha20 stream seeded with `seed`.
    pub fn sample(&self, rows: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        let n = self.dimension();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let uniforms: Vec<f64> = (0..rows * n).map(|_| rng.random::<f64>()).collect();
        uniforms
            .par_chunks(n)
            .map(|w| self.inverse_rosenblatt(w))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
