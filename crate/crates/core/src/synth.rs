//! Synthetic isomorphic graph pairs for tests, demos and benchmarks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{inject_bachelors, AlignmentStore, Dataset, EntityId, KnowledgeGraph, RelationId, Triple};
use crate::error::{config, Result};
use crate::seeds::derive_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub entities: usize,
    pub relations: usize,
    /// Average number of triples per entity (including the spanning tree).
    pub triples_per_entity: f64,
    /// Endpoint popularity exponent: entity `i` is drawn with weight
    /// `(i + 1)^-skew`. Zero gives a uniform random graph.
    pub skew: f64,
    /// Fraction of gold pairs whose KG2 side is deleted.
    pub bachelor_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            entities: 300,
            relations: 6,
            triples_per_entity: 5.0,
            skew: 0.0,
            bachelor_fraction: 0.0,
            seed: 0,
        }
    }
}

/// Two copies of one random connected graph. KG2 entities carry shuffled
/// names and ids so that neither order nor naming leaks the alignment.
pub fn isomorphic_pair(cfg: &SynthConfig) -> Result<Dataset> {
    if cfg.entities < 2 || cfg.relations == 0 {
        return Err(config("synthetic graphs need at least two entities and one relation"));
    }
    if !(cfg.triples_per_entity >= 1.0) || !(cfg.skew >= 0.0) {
        return Err(config("triples per entity must be ≥ 1 and skew non-negative"));
    }
    let n = cfg.entities;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "synth-graph", 0));
    let weights: Vec<f64> = (0..n).map(|i| (i as f64 + 1.0).powf(-cfg.skew)).collect();
    let total: f64 = weights.iter().sum();
    let cumulative: Vec<f64> = weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w / total;
            Some(*acc)
        })
        .collect();
    let pick = |rng: &mut ChaCha8Rng| -> usize {
        let x: f64 = rng.gen();
        cumulative.partition_point(|&c| c < x).min(n - 1)
    };

    let mut edges: Vec<(usize, usize, usize)> = Vec::new();
    // Spanning tree: every entity links to a popular earlier one.
    for i in 1..n {
        let j = loop {
            let j = pick(&mut rng);
            if j != i {
                break j % i.max(1);
            }
        };
        let r = rng.gen_range(0..cfg.relations);
        edges.push(if rng.gen_bool(0.5) { (i, r, j) } else { (j, r, i) });
    }
    let target = (cfg.triples_per_entity * n as f64).round() as usize;
    while edges.len() < target {
        let (h, t) = (pick(&mut rng), rng.gen_range(0..n));
        if h == t {
            continue;
        }
        let r = rng.gen_range(0..cfg.relations);
        edges.push(if rng.gen_bool(0.5) { (h, r, t) } else { (t, r, h) });
    }
    edges.sort_unstable();
    edges.dedup();

    let relations: Vec<String> = (0..cfg.relations).map(|r| format!("rel/{r}")).collect();
    let to_triple = |&(h, r, t): &(usize, usize, usize), ids: &[u32]| Triple {
        head: EntityId(ids[h]),
        relation: RelationId(r as u32),
        tail: EntityId(ids[t]),
    };

    let ids1: Vec<u32> = (0..n as u32).collect();
    let kg1 = KnowledgeGraph::from_parts(
        (0..n).map(|i| format!("kg1/e{i}")).collect(),
        relations.clone(),
        edges.iter().map(|e| to_triple(e, &ids1)).collect(),
    )?;

    let mut perm: Vec<u32> = (0..n as u32).collect();
    perm.shuffle(&mut rng);
    let mut labels: Vec<usize> = (0..n).collect();
    labels.shuffle(&mut rng);
    let names2: Vec<String> = labels.iter().map(|l| format!("kg2/x{l}")).collect();
    let mut triples2: Vec<Triple> = edges.iter().map(|e| to_triple(e, &perm)).collect();
    triples2.shuffle(&mut rng);
    let kg2 = KnowledgeGraph::from_parts(names2, relations, triples2)?;

    let store = AlignmentStore::new(n, (0..n).map(|i| (EntityId(i as u32), EntityId(perm[i]))))?;
    let data = Dataset { kg1, kg2, store };
    if cfg.bachelor_fraction > 0.0 {
        let (injected, _) = inject_bachelors(&data, cfg.bachelor_fraction, derive_seed(cfg.seed, "synth-bachelors", 0))?;
        return Ok(injected);
    }
    Ok(data)
}
