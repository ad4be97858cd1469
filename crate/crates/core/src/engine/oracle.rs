use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{AlignmentStore, EntityId};
use crate::error::{domain, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "entity", rename_all = "snake_case")]
pub enum Outcome {
    Counterpart(EntityId),
    Bachelor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleAnswer {
    pub query: EntityId,
    pub outcome: Outcome,
}

/// A label source. Implementations count every query they answer.
pub trait Oracle {
    fn answer(&mut self, queries: &[EntityId]) -> Result<Vec<OracleAnswer>>;

    /// Number of queries answered so far.
    fn accesses(&self) -> usize;
}

/// Answers from a gold alignment. The only component holding gold labels
/// during a simulated campaign's selection phase.
#[derive(Clone, Debug)]
pub struct SimulatedOracle {
    gold: BTreeMap<EntityId, EntityId>,
    num_entities1: usize,
    accesses: usize,
}

impl SimulatedOracle {
    pub fn new(store: &AlignmentStore) -> Self {
        Self {
            gold: store.gold().clone(),
            num_entities1: store.num_entities1(),
            accesses: 0,
        }
    }
}

impl Oracle for SimulatedOracle {
    fn answer(&mut self, queries: &[EntityId]) -> Result<Vec<OracleAnswer>> {
        if let Some(e) = queries.iter().find(|e| e.idx() >= self.num_entities1) {
            return Err(domain(format!("query {e} is not a KG1 entity")));
        }
        self.accesses += queries.len();
        Ok(queries
            .iter()
            .map(|&q| OracleAnswer {
                query: q,
                outcome: self.gold.get(&q).map_or(Outcome::Bachelor, |&b| Outcome::Counterpart(b)),
            })
            .collect())
    }

    fn accesses(&self) -> usize {
        self.accesses
    }
}
