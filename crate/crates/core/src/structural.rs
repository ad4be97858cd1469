//! Structure-aware uncertainty.
//!
//! An entity is worth querying when it is uncertain itself or when it can
//! help its outbound neighbours resolve their uncertainty. With the influence
//! matrix `W` (`w_ij = 1 / in_degree(j)` for each edge `i → j`) the score
//! vector is the fixed point of
//!
//! ```text
//! f = α·W·f + (1 − α)·u / Σu
//! ```
//!
//! solved by power iteration from `f₀ = u`.

use serde::{Deserialize, Serialize};

use crate::acquisition::AcquisitionVector;
use crate::dataset::{EntityId, KnowledgeGraph};
use crate::error::{config, Error, Result};

/// Sparse row-major influence matrix over KG1 entities.
#[derive(Clone, Debug, PartialEq)]
pub struct InfluenceMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    weights: Vec<f64>,
}

impl InfluenceMatrix {
    /// One entry per deduplicated directed edge; in-degrees are counted on
    /// the same deduplicated edge set.
    pub fn build(kg: &KnowledgeGraph) -> Self {
        let n = kg.num_entities();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut weights = Vec::new();
        row_ptr.push(0);
        for i in kg.entity_ids() {
            for &j in kg.simple_out(i) {
                cols.push(j.0);
                weights.push(1.0 / kg.simple_in(j).len() as f64);
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            weights,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn get(&self, i: EntityId, j: EntityId) -> f64 {
        let (a, b) = (self.row_ptr[i.idx()], self.row_ptr[i.idx() + 1]);
        self.cols[a..b]
            .binary_search(&j.0)
            .map(|k| self.weights[a + k])
            .unwrap_or(0.0)
    }

    /// Non-zero entries of row `i` as `(column, weight)`.
    pub fn row(&self, i: EntityId) -> impl Iterator<Item = (EntityId, f64)> + '_ {
        let (a, b) = (self.row_ptr[i.idx()], self.row_ptr[i.idx() + 1]);
        self.cols[a..b]
            .iter()
            .zip(&self.weights[a..b])
            .map(|(&c, &w)| (EntityId(c), w))
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.n];
        for (&c, &w) in self.cols.iter().zip(&self.weights) {
            s[c as usize] += w;
        }
        s
    }

    /// `out = W·x`, summing each row in stored column order.
    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
            *o = self.cols[a..b]
                .iter()
                .zip(&self.weights[a..b])
                .map(|(&c, &w)| w * x[c as usize])
                .sum();
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StructUncertaintyConfig {
    pub alpha: f64,
    pub eps: f64,
    pub max_iterations: usize,
}

impl Default for StructUncertaintyConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            eps: 1e-6,
            max_iterations: 1000,
        }
    }
}

impl StructUncertaintyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(config(format!("alpha {} outside [0, 1)", self.alpha)));
        }
        if !(self.eps > 0.0) {
            return Err(config("power-iteration tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(config("power iteration needs at least one step"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct StructUncertainty {
    pub scores: AcquisitionVector,
    pub converged: bool,
    pub iterations: usize,
    /// Amount subtracted from every input value to make it non-negative
    /// (zero when the input already was).
    pub shift: f64,
    /// L1 norm of the starting vector `f₀`.
    pub initial_mass: f64,
}

/// Solves the structure-aware fixed point for `u` covering every KG1 entity.
///
/// Inputs with negative entries (top-2 margins are never positive) are
/// shifted by their minimum first; ordering is unchanged.
pub fn structure_aware_uncertainty(
    w: &InfluenceMatrix,
    u: &AcquisitionVector,
    cfg: &StructUncertaintyConfig,
) -> Result<StructUncertainty> {
    cfg.validate()?;
    let n = w.dim();
    if u.len() != n || u.ids().iter().enumerate().any(|(i, e)| e.idx() != i) {
        return Err(Error::Domain(format!(
            "uncertainty vector covers {} entities, influence matrix has {n}",
            u.len()
        )));
    }
    let min = u.values().iter().copied().fold(f64::INFINITY, f64::min);
    let shift = if min < 0.0 { min } else { 0.0 };
    let base: Vec<f64> = u.values().iter().map(|&v| v - shift).collect();
    let mass: f64 = base.iter().sum();
    if !(mass > 0.0) {
        return Err(Error::Degenerate("uncertainty vector has no positive mass".into()));
    }
    let alpha = cfg.alpha;
    let teleport: Vec<f64> = base.iter().map(|&v| (1.0 - alpha) * (v / mass)).collect();
    let mut f = base;
    let initial_mass = mass;
    let mut next = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        iterations += 1;
        w.mul_vec(&f, &mut next);
        let mut delta = 0.0;
        for ((nx, &t), &old) in next.iter_mut().zip(&teleport).zip(&f) {
            *nx = alpha * *nx + t;
            delta += (*nx - old).abs();
        }
        std::mem::swap(&mut f, &mut next);
        if delta < cfg.eps {
            converged = true;
            break;
        }
    }
    Ok(StructUncertainty {
        scores: AcquisitionVector::new(u.ids().iter().copied().zip(f))?,
        converged,
        iterations,
        shift: -shift,
        initial_mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(edges: &[(&str, &str)]) -> KnowledgeGraph {
        KnowledgeGraph::from_uri_triples(edges.iter().map(|&(h, t)| (h, "r", t)))
    }

    fn vector(values: &[f64]) -> AcquisitionVector {
        AcquisitionVector::new(values.iter().enumerate().map(|(i, &v)| (EntityId(i as u32), v))).unwrap()
    }

    #[test]
    fn influence_weights() {
        let kg = graph(&[("a", "b")]);
        let w = InfluenceMatrix::build(&kg);
        assert_eq!(w.get(kg.entity("a").unwrap(), kg.entity("b").unwrap()), 1.0);

        let kg = graph(&[("a", "b"), ("c", "b"), ("c", "b")]);
        let w = InfluenceMatrix::build(&kg);
        let b = kg.entity("b").unwrap();
        assert_eq!(w.get(kg.entity("a").unwrap(), b), 0.5);
        assert_eq!(w.get(kg.entity("c").unwrap(), b), 0.5);
        assert_eq!(w.nnz(), 2);
    }

    #[test]
    fn alpha_zero_returns_normalized_input() {
        let kg = graph(&[("a", "b"), ("b", "c"), ("c", "a")]);
        let w = InfluenceMatrix::build(&kg);
        let u = vector(&[1.0, 3.0, 4.0]);
        let cfg = StructUncertaintyConfig {
            alpha: 0.0,
            ..Default::default()
        };
        let out = structure_aware_uncertainty(&w, &u, &cfg).unwrap();
        assert_eq!(out.scores.values(), &[1.0 / 8.0, 3.0 / 8.0, 4.0 / 8.0]);
        assert!(out.converged);
        assert_eq!(out.iterations, 2);
    }

    #[test]
    fn edgeless_graph_scales_by_one_minus_alpha() {
        let kg = KnowledgeGraph::from_parts(vec!["a".into(), "b".into()], vec![], vec![]).unwrap();
        let w = InfluenceMatrix::build(&kg);
        let out = structure_aware_uncertainty(&w, &vector(&[1.0, 3.0]), &StructUncertaintyConfig::default()).unwrap();
        assert!((out.scores.values()[0] - 0.9 * 0.25).abs() < 1e-15);
        assert!((out.scores.values()[1] - 0.9 * 0.75).abs() < 1e-15);
    }

    #[test]
    fn negative_margins_are_shifted() {
        let kg = KnowledgeGraph::from_parts(vec!["a".into(), "b".into(), "c".into()], vec![], vec![]).unwrap();
        let w = InfluenceMatrix::build(&kg);
        let cfg = StructUncertaintyConfig {
            alpha: 0.0,
            ..Default::default()
        };
        let out = structure_aware_uncertainty(&w, &vector(&[-3.0, -1.0, 0.0]), &cfg).unwrap();
        assert_eq!(out.shift, 3.0);
        assert_eq!(out.scores.values(), &[0.0, 2.0 / 5.0, 3.0 / 5.0]);
    }

    #[test]
    fn errors() {
        let kg = graph(&[("a", "b")]);
        let w = InfluenceMatrix::build(&kg);
        let bad = StructUncertaintyConfig {
            alpha: 1.0,
            ..Default::default()
        };
        assert!(matches!(structure_aware_uncertainty(&w, &vector(&[1.0, 1.0]), &bad), Err(Error::Config(_))));
        let zero = structure_aware_uncertainty(&w, &vector(&[0.0, 0.0]), &StructUncertaintyConfig::default());
        assert!(matches!(zero, Err(Error::Degenerate(_))));
        let flat = structure_aware_uncertainty(&w, &vector(&[-2.0, -2.0]), &StructUncertaintyConfig::default());
        assert!(matches!(flat, Err(Error::Degenerate(_))));
        let short = structure_aware_uncertainty(&w, &vector(&[1.0]), &StructUncertaintyConfig::default());
        assert!(matches!(short, Err(Error::Domain(_))));
    }

    #[test]
    fn iteration_cap_is_flagged() {
        let kg = graph(&[("a", "b"), ("b", "a")]);
        let w = InfluenceMatrix::build(&kg);
        let cfg = StructUncertaintyConfig {
            alpha: 0.9,
            eps: 1e-14,
            max_iterations: 3,
        };
        let out = structure_aware_uncertainty(&w, &vector(&[1.0, 5.0]), &cfg).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 3);
    }
}
