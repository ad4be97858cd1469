//! Pool-based active-learning campaigns.

mod campaign;
mod log;
mod oracle;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::acquisition::AcquisitionVector;
use crate::dataset::EntityId;
use crate::error::{config, domain, Error, Result};
use crate::model::TrainConfig;
use crate::recognizer::RecognizerConfig;
use crate::structural::StructUncertaintyConfig;
use crate::topology::PageRankConfig;

pub use campaign::{run_campaign, Campaign, CampaignSnapshot, PendingBatch};
pub use log::{CampaignLog, CurveRow, Flag, IterationRecord, Timing};
pub use oracle::{Oracle, OracleAnswer, Outcome, SimulatedOracle};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "rand")]
    Random,
    #[serde(rename = "degree")]
    Degree,
    #[serde(rename = "pagerank")]
    PageRank,
    #[serde(rename = "betweenness")]
    Betweenness,
    /// Top-2 margin on raw scores.
    #[serde(rename = "uncertainty")]
    Uncertainty,
    #[serde(rename = "entropy")]
    Entropy,
    #[serde(rename = "least_conf")]
    LeastConfidence,
    #[serde(rename = "margin_prob")]
    MarginProbability,
    #[serde(rename = "bald")]
    Bald,
    #[serde(rename = "stddev")]
    StdDev,
    #[serde(rename = "struct_uncert")]
    StructUncertainty,
    /// Structure-aware uncertainty gated by the bachelor recognizer.
    #[serde(rename = "active_ea")]
    ActiveEa,
}

impl Strategy {
    pub const ALL: [Strategy; 12] = [
        Strategy::Random,
        Strategy::Degree,
        Strategy::PageRank,
        Strategy::Betweenness,
        Strategy::Uncertainty,
        Strategy::Entropy,
        Strategy::LeastConfidence,
        Strategy::MarginProbability,
        Strategy::Bald,
        Strategy::StdDev,
        Strategy::StructUncertainty,
        Strategy::ActiveEa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Random => "rand",
            Strategy::Degree => "degree",
            Strategy::PageRank => "pagerank",
            Strategy::Betweenness => "betweenness",
            Strategy::Uncertainty => "uncertainty",
            Strategy::Entropy => "entropy",
            Strategy::LeastConfidence => "least_conf",
            Strategy::MarginProbability => "margin_prob",
            Strategy::Bald => "bald",
            Strategy::StdDev => "stddev",
            Strategy::StructUncertainty => "struct_uncert",
            Strategy::ActiveEa => "active_ea",
        }
    }

    /// Scores depend on the alignment model.
    pub fn uses_model(self) -> bool {
        !matches!(
            self,
            Strategy::Random | Strategy::Degree | Strategy::PageRank | Strategy::Betweenness
        )
    }

    /// Needs stochastic scoring regardless of configuration.
    pub fn requires_sampling(self) -> bool {
        matches!(self, Strategy::Bald | Strategy::StdDev)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL.into_iter().find(|st| st.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Strategy::ALL.iter().map(|s| s.name()).collect();
            config(format!("unknown strategy {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

/// Monte Carlo dropout scoring.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McConfig {
    pub samples: usize,
    pub dropout: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            samples: 10,
            dropout: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub strategy: Strategy,
    /// Number of KG1 entities that may be queried, bachelors included.
    pub budget: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub struct_uncertainty: StructUncertaintyConfig,
    /// When off, `active_ea` treats every entity as matchable.
    pub recognizer_enabled: bool,
    pub recognizer: RecognizerConfig,
    pub model: TrainConfig,
    /// Continue training the previous model each round instead of
    /// re-initializing it.
    pub warm_start: bool,
    /// Replaces deterministic scores by the mean of dropout samples; `bald`
    /// and `stddev` fall back to [`McConfig::default`] when unset.
    pub mc: Option<McConfig>,
    /// Softmax temperature for probability-based strategies.
    pub temperature: f64,
    pub pagerank: PageRankConfig,
    /// Sampled betweenness with this many pivots; exact (or the size-based
    /// default) when unset.
    pub betweenness_pivots: Option<usize>,
    /// Evaluate Hit@1 every this many iterations (the last one always).
    pub evaluation_interval: usize,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::ActiveEa,
            budget: 0,
            batch_size: 100,
            seed: 0,
            struct_uncertainty: StructUncertaintyConfig::default(),
            recognizer_enabled: true,
            recognizer: RecognizerConfig::default(),
            model: TrainConfig::default(),
            warm_start: true,
            mc: None,
            temperature: 1.0,
            pagerank: PageRankConfig::default(),
            betweenness_pivots: None,
            evaluation_interval: 1,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self, num_entities1: usize) -> Result<()> {
        if self.batch_size == 0 || self.batch_size > self.budget || self.budget > num_entities1 {
            return Err(config(format!(
                "need 0 < batch size ({}) ≤ budget ({}) ≤ |E1| ({num_entities1})",
                self.batch_size, self.budget
            )));
        }
        if !(self.temperature > 0.0) {
            return Err(config("temperature must be positive"));
        }
        if self.evaluation_interval == 0 {
            return Err(config("evaluation interval must be positive"));
        }
        if let Some(mc) = self.sampling() {
            if mc.samples < 2 {
                return Err(config("dropout sampling needs at least two samples"));
            }
            if !(mc.dropout > 0.0 && mc.dropout < 1.0) {
                return Err(config("dropout rate for sampling must lie in (0, 1)"));
            }
        }
        self.struct_uncertainty.validate()?;
        self.model.validate()?;
        if self.strategy == Strategy::ActiveEa && self.recognizer_enabled {
            self.recognizer.validate()?;
        }
        Ok(())
    }

    /// Effective dropout sampling for this strategy, if any.
    pub fn sampling(&self) -> Option<McConfig> {
        match (&self.mc, self.strategy.requires_sampling()) {
            (Some(mc), _) => Some(mc.clone()),
            (None, true) => Some(McConfig::default()),
            (None, false) => None,
        }
    }
}

/// `f^π(e) = f^su(e) · f^b(e)`.
pub fn final_acquisition(f_su: &AcquisitionVector, f_b: &AcquisitionVector) -> Result<AcquisitionVector> {
    if f_su.ids() != f_b.ids() {
        return Err(domain("structural and recognizer scores cover different entities"));
    }
    AcquisitionVector::new(f_su.iter().zip(f_b.values()).map(|((e, s), b)| (e, s * b)))
}

/// Top `n` pool entities by score; ties go to the smaller id. Returns the
/// whole pool (ranked) when it holds fewer than `n` entities.
pub fn select_batch(scores: &AcquisitionVector, pool: &BTreeSet<EntityId>, n: usize) -> Result<Vec<EntityId>> {
    let restricted = scores.restrict(pool)?;
    Ok(restricted.ranking().into_iter().take(n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::RankOrder;

    fn vector(values: &[f64]) -> AcquisitionVector {
        AcquisitionVector::new(values.iter().enumerate().map(|(i, &v)| (EntityId(i as u32), v))).unwrap()
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.name()));
        }
        let err = "nope".parse::<Strategy>().unwrap_err().to_string();
        assert!(err.contains("active_ea") && err.contains("rand"));
    }

    #[test]
    fn final_acquisition_examples() {
        let su = vector(&[0.3, 0.5, 0.2]);
        assert_eq!(final_acquisition(&su, &vector(&[1.0, 1.0, 1.0])).unwrap(), su);
        let out = final_acquisition(&su, &vector(&[1.0, 0.0, 1.0])).unwrap();
        assert_eq!(out.values(), &[0.3, 0.0, 0.2]);
        assert!(final_acquisition(&su, &vector(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn select_batch_examples() {
        let pool: BTreeSet<EntityId> = (0..4).map(EntityId).collect();
        assert_eq!(select_batch(&vector(&[0.1, 0.9, 0.3, 0.2]), &pool, 1).unwrap(), vec![EntityId(1)]);
        assert_eq!(
            select_batch(&vector(&[0.5; 4]), &pool, 2).unwrap(),
            vec![EntityId(0), EntityId(1)]
        );
        let small: BTreeSet<EntityId> = [EntityId(2), EntityId(3)].into();
        assert_eq!(select_batch(&vector(&[0.1, 0.9, 0.3, 0.2]), &small, 5).unwrap().len(), 2);
        let low = vector(&[0.1, 0.9, 0.3, 0.2]).with_order(RankOrder::LowerFirst);
        assert_eq!(select_batch(&low, &pool, 1).unwrap(), vec![EntityId(0)]);
    }

    #[test]
    fn config_bounds() {
        let mut c = CampaignConfig {
            budget: 30,
            batch_size: 10,
            ..Default::default()
        };
        c.validate(60).unwrap();
        assert!(c.validate(20).is_err());
        c.batch_size = 40;
        assert!(c.validate(60).is_err());
        c.batch_size = 0;
        assert!(c.validate(60).is_err());
        let json = serde_json::to_string(&CampaignConfig::default()).unwrap();
        let back: CampaignConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, CampaignConfig::default());
        assert!(serde_json::from_str::<CampaignConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
