pub mod acquisition;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod recognizer;
pub mod seeds;
pub mod structural;
pub mod synth;
pub mod topology;
pub mod uncertainty;

pub use acquisition::{AcquisitionVector, RankOrder};
pub use dataset::{AlignmentStore, Dataset, EntityId, KnowledgeGraph, LabelState, RelationId, Triple};
pub use error::{Error, Result};
pub use model::{Model, Objective, ScoreMatrix, TrainConfig};
pub use engine::{run_campaign, Campaign, CampaignConfig, CampaignLog, Strategy};
