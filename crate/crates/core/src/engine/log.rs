use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::EntityId;
use crate::error::Result;
use crate::evaluation::LearningCurve;

use super::oracle::OracleAnswer;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    /// No positive labels yet: recognizer skipped, every entity treated as
    /// matchable.
    RecognizerColdStart,
    /// Too few labels for K folds; a single 80/20 split was used.
    RecognizerSingleSplit,
    /// At least one fold had no positive pair to train on.
    RecognizerUntrainedFold,
    /// Power iteration hit its iteration cap.
    PowerIterationCapped,
    /// Margin uncertainty carried no mass; a uniform vector was used.
    DegenerateUncertainty,
    /// Fewer than two open KG2 candidates; uncertainty is undefined and all
    /// pool entities tie.
    UncertaintyUndefined,
    /// The batch was committed before every query was answered.
    ForcedAdvance,
    /// Every gold pair is labelled, Hit@1 is undefined.
    TestSetEmpty,
}

/// Wall-clock information, excluded from reproducibility comparisons.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix_ms: u128,
    pub elapsed_ms: u128,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Selected entities, most informative first.
    pub batch: Vec<EntityId>,
    /// Acquisition score of each selected entity.
    pub scores: Vec<f64>,
    pub answers: Vec<OracleAnswer>,
    /// Budget spent after this iteration.
    pub spent: usize,
    /// `spent / |E1|`.
    pub proportion: f64,
    pub labelled_matchable: usize,
    pub labelled_bachelor: usize,
    pub pool_size: usize,
    pub test_size: usize,
    pub hit_at_1: Option<f64>,
    /// Recognizer decisions against the truth on the remaining pool.
    pub recognizer_micro_f1: Option<f64>,
    pub recognizer_gamma: Option<f64>,
    pub power_iterations: Option<usize>,
    /// Cumulative answered queries.
    pub oracle_accesses: usize,
    pub flags: Vec<Flag>,
    /// Set on the last iteration of a campaign.
    pub complete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

/// One row of the learning-curve CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub proportion: f64,
    pub hit_at_1: Option<f64>,
    pub recognizer_micro_f1: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CampaignLog {
    pub records: Vec<IterationRecord>,
}

impl CampaignLog {
    /// Copy with wall-clock fields removed.
    pub fn without_timing(&self) -> Self {
        Self {
            records: self
                .records
                .iter()
                .map(|r| IterationRecord {
                    timing: None,
                    ..r.clone()
                })
                .collect(),
        }
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { records })
    }

    pub fn curve_rows(&self) -> Vec<CurveRow> {
        self.records
            .iter()
            .map(|r| CurveRow {
                proportion: r.proportion,
                hit_at_1: r.hit_at_1,
                recognizer_micro_f1: r.recognizer_micro_f1,
            })
            .collect()
    }

    pub fn write_curve_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in self.curve_rows() {
            w.serialize(row).map_err(std::io::Error::from)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Hit@1 against annotation proportion, skipping unevaluated points.
    pub fn learning_curve(&self) -> Result<LearningCurve> {
        LearningCurve::new(
            self.records
                .iter()
                .filter_map(|r| r.hit_at_1.map(|h| (r.proportion, h)))
                .collect(),
        )
    }

    pub fn spent(&self) -> usize {
        self.records.last().map_or(0, |r| r.spent)
    }
}
