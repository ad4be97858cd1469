//! Graph-only acquisition baselines over KG1: degree, pagerank,
//! betweenness and random scores.

use std::collections::VecDeque;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::AcquisitionVector;
use crate::dataset::{EntityId, KnowledgeGraph};
use crate::error::{config, domain, Result};

/// Graphs with more entities than this use sampled betweenness by default.
pub const EXACT_BETWEENNESS_LIMIT: usize = 20_000;
pub const DEFAULT_BETWEENNESS_PIVOTS: usize = 256;

fn check_candidates(kg: &KnowledgeGraph, candidates: &[EntityId]) -> Result<()> {
    match candidates.iter().find(|e| !kg.contains(**e)) {
        Some(e) => Err(domain(format!("candidate {e} is not an entity of the graph"))),
        None => Ok(()),
    }
}

fn restrict(full: &[f64], candidates: &[EntityId]) -> Result<AcquisitionVector> {
    AcquisitionVector::new(candidates.iter().map(|&e| (e, full[e.idx()])))
}

/// In-degree plus out-degree on the simple (deduplicated) graph.
pub fn degree_scores(kg: &KnowledgeGraph, candidates: &[EntityId]) -> Result<AcquisitionVector> {
    check_candidates(kg, candidates)?;
    let full: Vec<f64> = kg
        .entity_ids()
        .map(|e| (kg.simple_out(e).len() + kg.simple_in(e).len()) as f64)
        .collect();
    restrict(&full, candidates)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeMode {
    /// Edges follow triple direction.
    #[default]
    Forward,
    /// Every edge reversed.
    Inverse,
    /// Both directions.
    Bidirectional,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PageRankConfig {
    pub damping: f64,
    pub edge_mode: EdgeMode,
    pub eps: f64,
    pub max_iters: usize,
}

impl Default for PageRankConfig {
    fn default() -> Self {
        Self {
            damping: 0.85,
            edge_mode: EdgeMode::Forward,
            eps: 1e-10,
            max_iters: 1000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PageRank {
    pub scores: AcquisitionVector,
    /// Ranks for every entity of the graph, summing to one.
    pub full: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

fn out_lists(kg: &KnowledgeGraph, mode: EdgeMode) -> Vec<Vec<EntityId>> {
    kg.entity_ids()
        .map(|e| match mode {
            EdgeMode::Forward => kg.simple_out(e).to_vec(),
            EdgeMode::Inverse => kg.simple_in(e).to_vec(),
            EdgeMode::Bidirectional => kg.undirected_neighbours(e),
        })
        .collect()
}

/// Pagerank with uniform teleport; dangling mass is spread uniformly.
/// Stops when the L1 change drops below `eps`, or after `max_iters` with
/// `converged = false`.
pub fn pagerank_scores(kg: &KnowledgeGraph, candidates: &[EntityId], cfg: &PageRankConfig) -> Result<PageRank> {
    if !(cfg.damping > 0.0 && cfg.damping < 1.0) {
        return Err(config(format!("damping {} outside (0, 1)", cfg.damping)));
    }
    check_candidates(kg, candidates)?;
    let n = kg.num_entities();
    if n == 0 {
        return Ok(PageRank {
            scores: restrict(&[], candidates)?,
            full: Vec::new(),
            converged: true,
            iterations: 0,
        });
    }
    let out = out_lists(kg, cfg.edge_mode);
    let d = cfg.damping;
    let nf = n as f64;
    let mut rank = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        let dangling: f64 = out
            .iter()
            .zip(&rank)
            .filter(|(o, _)| o.is_empty())
            .map(|(_, r)| r)
            .sum();
        let base = (1.0 - d) / nf + d * dangling / nf;
        next.iter_mut().for_each(|x| *x = base);
        for (i, targets) in out.iter().enumerate() {
            if targets.is_empty() {
                continue;
            }
            let share = d * rank[i] / targets.len() as f64;
            for t in targets {
                next[t.idx()] += share;
            }
        }
        let delta: f64 = next.iter().zip(&rank).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut rank, &mut next);
        if delta < cfg.eps {
            converged = true;
            break;
        }
    }
    Ok(PageRank {
        scores: restrict(&rank, candidates)?,
        full: rank,
        converged,
        iterations,
    })
}

/// Brandes single-source dependency accumulation on the directed simple graph.
fn brandes_from(kg: &KnowledgeGraph, s: usize, acc: &mut [f64]) {
    let n = kg.num_entities();
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![usize::MAX; n];
    let mut delta = vec![0.0f64; n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut stack = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    sigma[s] = 1.0;
    dist[s] = 0;
    queue.push_back(s);
    while let Some(v) = queue.pop_front() {
        stack.push(v);
        for w in kg.simple_out(EntityId(v as u32)) {
            let w = w.idx();
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
            if dist[w] == dist[v] + 1 {
                sigma[w] += sigma[v];
                preds[w].push(v);
            }
        }
    }
    while let Some(w) = stack.pop() {
        for &v in &preds[w] {
            delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
        }
        if w != s {
            acc[w] += delta[w];
        }
    }
}

const SOURCE_CHUNK: usize = 64;

/// Directed, unweighted betweenness. Exact when `pivots` is `None`;
/// otherwise an unbiased estimate from `pivots` uniformly sampled sources,
/// scaled by `n / pivots`.
pub fn betweenness_scores(
    kg: &KnowledgeGraph,
    candidates: &[EntityId],
    pivots: Option<usize>,
    seed: u64,
) -> Result<AcquisitionVector> {
    check_candidates(kg, candidates)?;
    let n = kg.num_entities();
    let (sources, scale): (Vec<usize>, f64) = match pivots {
        Some(k) if k < n => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = sample(&mut rng, n, k).into_vec();
            s.sort_unstable();
            (s, n as f64 / k as f64)
        }
        _ => ((0..n).collect(), 1.0),
    };
    // Fixed chunking keeps the floating-point reduction order independent
    // of the thread count.
    let partials: Vec<Vec<f64>> = sources
        .par_chunks(SOURCE_CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; n];
            for &s in chunk {
                brandes_from(kg, s, &mut acc);
            }
            acc
        })
        .collect();
    let mut full = vec![0.0; n];
    for p in partials {
        for (f, v) in full.iter_mut().zip(p) {
            *f += v;
        }
    }
    full.iter_mut().for_each(|x| *x *= scale);
    restrict(&full, candidates)
}

/// Exact betweenness below [`EXACT_BETWEENNESS_LIMIT`] entities, sampled above.
pub fn default_betweenness(kg: &KnowledgeGraph, candidates: &[EntityId], seed: u64) -> Result<AcquisitionVector> {
    let pivots = (kg.num_entities() > EXACT_BETWEENNESS_LIMIT).then_some(DEFAULT_BETWEENNESS_PIVOTS);
    betweenness_scores(kg, candidates, pivots, seed)
}

/// I.i.d. uniform(0, 1) scores, reproducible under `seed`.
pub fn random_scores(candidates: &[EntityId], seed: u64) -> Result<AcquisitionVector> {
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    AcquisitionVector::new(sorted.into_iter().map(|e| (e, rng.gen::<f64>())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(edges: &[(&str, &str)]) -> KnowledgeGraph {
        KnowledgeGraph::from_uri_triples(edges.iter().map(|&(h, t)| (h, "r", t)))
    }

    fn all(kg: &KnowledgeGraph) -> Vec<EntityId> {
        kg.entity_ids().collect()
    }

    #[test]
    fn degree_examples() {
        let kg = graph(&[("a", "b"), ("b", "c")]);
        let v = degree_scores(&kg, &all(&kg)).unwrap();
        assert_eq!(v.get(kg.entity("b").unwrap()), Some(2.0));

        let star = graph(&[("h", "1"), ("h", "2"), ("3", "h"), ("h", "4"), ("5", "h"), ("h", "1")]);
        let v = degree_scores(&star, &all(&star)).unwrap();
        assert_eq!(v.get(star.entity("h").unwrap()), Some(5.0));
        for leaf in ["1", "2", "3", "4", "5"] {
            assert_eq!(v.get(star.entity(leaf).unwrap()), Some(1.0));
        }
    }

    #[test]
    fn degree_of_isolated_entity_is_zero() {
        let kg = KnowledgeGraph::from_parts(vec!["solo".into()], vec![], vec![]).unwrap();
        let v = degree_scores(&kg, &[EntityId(0)]).unwrap();
        assert_eq!(v.get(EntityId(0)), Some(0.0));
    }

    #[test]
    fn unknown_candidate_is_domain_error() {
        let kg = graph(&[("a", "b")]);
        assert!(degree_scores(&kg, &[EntityId(9)]).is_err());
        assert!(betweenness_scores(&kg, &[EntityId(9)], None, 0).is_err());
    }

    #[test]
    fn pagerank_trivial_cases() {
        let kg = KnowledgeGraph::from_parts(vec!["solo".into()], vec![], vec![]).unwrap();
        let pr = pagerank_scores(&kg, &[EntityId(0)], &PageRankConfig::default()).unwrap();
        assert!((pr.full[0] - 1.0).abs() < 1e-12);

        let kg = graph(&[("a", "b"), ("b", "a")]);
        let pr = pagerank_scores(&kg, &all(&kg), &PageRankConfig::default()).unwrap();
        assert!(pr.converged);
        assert!((pr.full[0] - 0.5).abs() < 1e-12 && (pr.full[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pagerank_rejects_bad_damping() {
        let kg = graph(&[("a", "b")]);
        let cfg = PageRankConfig {
            damping: 1.0,
            ..Default::default()
        };
        assert!(pagerank_scores(&kg, &all(&kg), &cfg).is_err());
    }

    #[test]
    fn pagerank_flags_non_convergence() {
        let kg = graph(&[("a", "b"), ("b", "c"), ("c", "a"), ("a", "c")]);
        let cfg = PageRankConfig {
            max_iters: 2,
            eps: 1e-15,
            ..Default::default()
        };
        let pr = pagerank_scores(&kg, &all(&kg), &cfg).unwrap();
        assert!(!pr.converged);
        assert_eq!(pr.iterations, 2);
    }

    #[test]
    fn pagerank_edge_modes_differ_on_a_chain() {
        let kg = graph(&[("a", "b"), ("b", "c")]);
        let c = kg.entity("c").unwrap();
        let a = kg.entity("a").unwrap();
        let fwd = pagerank_scores(&kg, &all(&kg), &PageRankConfig::default()).unwrap();
        let inv = pagerank_scores(
            &kg,
            &all(&kg),
            &PageRankConfig {
                edge_mode: EdgeMode::Inverse,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(fwd.full[c.idx()] > fwd.full[a.idx()]);
        assert!(inv.full[a.idx()] > inv.full[c.idx()]);
    }

    #[test]
    fn betweenness_small_cases() {
        let kg = graph(&[("a", "b"), ("b", "c")]);
        let v = betweenness_scores(&kg, &all(&kg), None, 0).unwrap();
        assert_eq!(v.get(kg.entity("b").unwrap()), Some(1.0));
        assert_eq!(v.get(kg.entity("a").unwrap()), Some(0.0));
        assert_eq!(v.get(kg.entity("c").unwrap()), Some(0.0));

        let names = ["p", "q", "r", "s"];
        let mut edges = Vec::new();
        for x in names {
            for y in names {
                if x != y {
                    edges.push((x, y));
                }
            }
        }
        let kg = graph(&edges);
        let v = betweenness_scores(&kg, &all(&kg), None, 0).unwrap();
        assert!(v.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn random_scores_are_seeded() {
        let c: Vec<EntityId> = (0..20).map(EntityId).collect();
        let a = random_scores(&c, 5).unwrap();
        assert_eq!(a, random_scores(&c, 5).unwrap());
        assert_ne!(a, random_scores(&c, 6).unwrap());
        assert!(a.values().iter().all(|&x| (0.0..1.0).contains(&x)));
    }
}
