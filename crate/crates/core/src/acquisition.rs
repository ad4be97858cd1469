use serde::{Deserialize, Serialize};

use crate::dataset::EntityId;
use crate::error::{domain, Result};

/// Which end of an [`AcquisitionVector`] is the most informative.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankOrder {
    #[default]
    HigherFirst,
    LowerFirst,
}

/// Per-entity acquisition scores over a candidate set.
///
/// Ids are kept sorted and unique; every value is finite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionVector {
    ids: Vec<EntityId>,
    values: Vec<f64>,
    order: RankOrder,
}

impl AcquisitionVector {
    pub fn new(pairs: impl IntoIterator<Item = (EntityId, f64)>) -> Result<Self> {
        let mut pairs: Vec<(EntityId, f64)> = pairs.into_iter().collect();
        pairs.sort_by_key(|p| p.0);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(domain("duplicate entity in acquisition vector"));
        }
        if let Some((e, v)) = pairs.iter().find(|(_, v)| !v.is_finite()) {
            return Err(domain(format!("non-finite acquisition score {v} for {e}")));
        }
        let (ids, values) = pairs.into_iter().unzip();
        Ok(Self {
            ids,
            values,
            order: RankOrder::HigherFirst,
        })
    }

    pub fn with_order(mut self, order: RankOrder) -> Self {
        self.order = order;
        self
    }

    pub fn order(&self) -> RankOrder {
        self.order
    }

    pub fn ids(&self) -> &[EntityId] {
        &self.ids
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, e: EntityId) -> Option<f64> {
        self.ids.binary_search(&e).ok().map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (EntityId, f64)> + '_ {
        self.ids.iter().copied().zip(self.values.iter().copied())
    }

    /// Score oriented so that larger always means "query first".
    pub fn priority(&self, e: EntityId) -> Option<f64> {
        self.get(e).map(|v| match self.order {
            RankOrder::HigherFirst => v,
            RankOrder::LowerFirst => -v,
        })
    }

    /// Entity ids ordered from most to least informative; ties by ascending id.
    pub fn ranking(&self) -> Vec<EntityId> {
        let mut idx: Vec<usize> = (0..self.ids.len()).collect();
        let sign = match self.order {
            RankOrder::HigherFirst => 1.0,
            RankOrder::LowerFirst => -1.0,
        };
        idx.sort_by(|&a, &b| {
            (sign * self.values[b])
                .total_cmp(&(sign * self.values[a]))
                .then(self.ids[a].cmp(&self.ids[b]))
        });
        idx.into_iter().map(|i| self.ids[i]).collect()
    }

    /// Restricts to `keep` (must be a subset of the covered ids).
    pub fn restrict<'a>(&self, keep: impl IntoIterator<Item = &'a EntityId>) -> Result<Self> {
        let mut ids = Vec::new();
        let mut values = Vec::new();
        for &e in keep {
            let v = self
                .get(e)
                .ok_or_else(|| domain(format!("entity {e} not covered by acquisition vector")))?;
            ids.push(e);
            values.push(v);
        }
        let mut out = Self::new(ids.into_iter().zip(values))?;
        out.order = self.order;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        assert!(AcquisitionVector::new([(EntityId(0), f64::NAN)]).is_err());
        assert!(AcquisitionVector::new([(EntityId(0), 1.0), (EntityId(0), 2.0)]).is_err());
    }

    #[test]
    fn ranking_respects_order_and_ties() {
        let v = AcquisitionVector::new([(EntityId(3), 1.0), (EntityId(1), 2.0), (EntityId(2), 2.0)]).unwrap();
        assert_eq!(v.ranking(), vec![EntityId(1), EntityId(2), EntityId(3)]);
        let v = v.with_order(RankOrder::LowerFirst);
        assert_eq!(v.ranking(), vec![EntityId(3), EntityId(1), EntityId(2)]);
        assert_eq!(v.priority(EntityId(3)), Some(-1.0));
    }
}
