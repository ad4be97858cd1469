//! Campaign state behind the HTTP layer. Everything here is synchronous;
//! the router decides what runs in the background.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use alea_core::dataset::{Dataset, EntityId, KnowledgeGraph};
use alea_core::engine::{CampaignSnapshot, OracleAnswer, Outcome};
use alea_core::{Campaign, CampaignConfig};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

pub const SNAPSHOT_FILE: &str = "campaign.json";
pub const ANSWERS_FILE: &str = "answers.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// A batch is waiting for answers.
    Ready,
    /// Retraining and selecting the next batch.
    Busy,
    /// Budget spent or pool empty.
    Finished,
    /// The last background iteration failed; see `error`.
    Failed,
}

/// An annotator's answer, as sent over the wire: `"bachelor"` or
/// `{"counterpart": "<kg2 uri>"}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelOutcome {
    Counterpart(String),
    Bachelor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Out,
    In,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Neighbour {
    pub relation: String,
    pub entity: String,
    pub direction: Direction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub entity: String,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryCard {
    pub position: usize,
    pub entity: String,
    pub context: Vec<Neighbour>,
    pub candidates: Vec<Candidate>,
    pub answer: Option<LabelOutcome>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Queries {
    pub iteration: usize,
    pub phase: Phase,
    pub queries: Vec<QueryCard>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LastMetrics {
    pub iteration: usize,
    pub proportion: f64,
    pub hit_at_1: Option<f64>,
    pub recognizer_micro_f1: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub phase: Phase,
    pub strategy: String,
    pub iteration: usize,
    pub budget: usize,
    /// Committed answers.
    pub spent: usize,
    /// Answers recorded for the pending batch, not yet committed.
    pub answered: usize,
    /// `budget − spent − answered`.
    pub remaining: usize,
    pub batch_size: usize,
    pub pending: usize,
    pub last: Option<LastMetrics>,
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AckStatus {
    Recorded,
    /// Same answer seen before; nothing changed.
    Duplicate,
    /// The batch is complete and the next iteration started.
    IterationAdvancing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelAck {
    pub status: AckStatus,
    pub query: String,
    pub answered: usize,
    pub batch_size: usize,
    pub remaining: usize,
}

/// Answers for the pending batch, persisted next to the campaign snapshot.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
struct PendingAnswers {
    iteration: usize,
    answers: Vec<OracleAnswer>,
}

fn write_atomic(path: &Path, value: &impl Serialize) -> Result<(), ApiError> {
    let tmp = path.with_extension("json.tmp");
    let text = serde_json::to_vec(value).map_err(|e| ApiError::Persistence(e.to_string()))?;
    fs::write(&tmp, text).and_then(|_| fs::rename(&tmp, path)).map_err(|e| ApiError::Persistence(format!("{}: {e}", path.display())))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ApiError> {
    let text = fs::read(path).map_err(|e| ApiError::Persistence(format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&text).map_err(|e| ApiError::Persistence(format!("{}: {e}", path.display())))
}

pub fn neighbourhood(kg: &KnowledgeGraph, e: EntityId) -> Vec<Neighbour> {
    let out = kg.out_edges(e).iter().map(|&(r, t)| Neighbour {
        relation: kg.relation_uri(r).into(),
        entity: kg.uri(t).into(),
        direction: Direction::Out,
    });
    let inc = kg.in_edges(e).iter().map(|&(r, h)| Neighbour {
        relation: kg.relation_uri(r).into(),
        entity: kg.uri(h).into(),
        direction: Direction::In,
    });
    out.chain(inc).collect()
}

pub struct Session {
    /// Taken out while a background iteration runs.
    campaign: Option<Campaign>,
    answers: Vec<OracleAnswer>,
    cards: Vec<QueryCard>,
    phase: Phase,
    error: Option<String>,
    /// Summary fields frozen while the campaign is away.
    frozen: Option<StateSummary>,
    candidates: usize,
    dir: Option<PathBuf>,
}

impl Session {
    /// Starts a campaign, or resumes the one persisted in `dir` when
    /// `resume` is set, and selects the first pending batch.
    pub fn open(
        data: Dataset,
        config: CampaignConfig,
        dir: Option<PathBuf>,
        resume: bool,
        candidates: usize,
    ) -> Result<Self, ApiError> {
        let mut answers = Vec::new();
        let campaign = match (&dir, resume) {
            (Some(d), true) => {
                let snapshot: CampaignSnapshot = read_json(&d.join(SNAPSHOT_FILE))?;
                let campaign = Campaign::resume(data, snapshot)?;
                let path = d.join(ANSWERS_FILE);
                if path.exists() {
                    let saved: PendingAnswers = read_json(&path)?;
                    if saved.iteration == campaign.iteration() {
                        answers = saved.answers;
                    }
                }
                campaign
            }
            (None, true) => return Err(ApiError::BadRequest("resuming needs a session directory".into())),
            _ => Campaign::new(data, config)?,
        };
        let mut session = Self {
            campaign: Some(campaign),
            answers: Vec::new(),
            cards: Vec::new(),
            phase: Phase::Ready,
            error: None,
            frozen: None,
            candidates,
            dir,
        };
        if let Some(d) = &session.dir {
            fs::create_dir_all(d).map_err(|e| ApiError::Persistence(format!("{}: {e}", d.display())))?;
        }
        session.refresh_batch()?;
        for a in &answers {
            let pending = session.campaign().pending().map(|p| p.entities.clone()).unwrap_or_default();
            if !pending.contains(&a.query) {
                return Err(ApiError::Persistence("saved answers do not match the resumed batch".into()));
            }
        }
        session.answers = answers;
        session.persist_campaign()?;
        session.rebuild_answers_on_cards();
        Ok(session)
    }

    fn campaign(&self) -> &Campaign {
        self.campaign.as_ref().expect("campaign present outside background work")
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Proposes the next batch (if any) and rebuilds the query cards.
    fn refresh_batch(&mut self) -> Result<(), ApiError> {
        let campaign = self.campaign.as_mut().expect("campaign present");
        let entities = match campaign.propose()? {
            Some(p) => p.entities.clone(),
            None => Vec::new(),
        };
        let campaign = self.campaign();
        let mut cards = Vec::with_capacity(entities.len());
        for (position, &e) in entities.iter().enumerate() {
            let candidates = campaign
                .candidates(e, self.candidates)?
                .into_iter()
                .enumerate()
                .map(|(i, (c, score))| Candidate {
                    entity: campaign.kg2().uri(c).into(),
                    score,
                    rank: i + 1,
                })
                .collect();
            cards.push(QueryCard {
                position,
                entity: campaign.kg1().uri(e).into(),
                context: neighbourhood(campaign.kg1(), e),
                candidates,
                answer: None,
            });
        }
        self.cards = cards;
        self.phase = if entities.is_empty() { Phase::Finished } else { Phase::Ready };
        Ok(())
    }

    fn rebuild_answers_on_cards(&mut self) {
        let campaign = self.campaign.as_ref().expect("campaign present");
        for card in &mut self.cards {
            let e = campaign.kg1().entity(&card.entity);
            card.answer = self.answers.iter().find(|a| Some(a.query) == e).map(|a| match a.outcome {
                Outcome::Counterpart(b) => LabelOutcome::Counterpart(campaign.kg2().uri(b).into()),
                Outcome::Bachelor => LabelOutcome::Bachelor,
            });
        }
    }

    fn persist_campaign(&self) -> Result<(), ApiError> {
        if let Some(d) = &self.dir {
            write_atomic(&d.join(SNAPSHOT_FILE), &self.campaign().snapshot())?;
            self.persist_answers()?;
        }
        Ok(())
    }

    fn persist_answers(&self) -> Result<(), ApiError> {
        if let Some(d) = &self.dir {
            let saved = PendingAnswers {
                iteration: self.frozen.as_ref().map_or_else(|| self.campaign().iteration(), |s| s.iteration),
                answers: self.answers.clone(),
            };
            write_atomic(&d.join(ANSWERS_FILE), &saved)?;
        }
        Ok(())
    }

    pub fn state(&self) -> StateSummary {
        if let Some(f) = &self.frozen {
            return StateSummary {
                phase: self.phase,
                error: self.error.clone(),
                ..f.clone()
            };
        }
        let c = self.campaign();
        let cfg = c.config();
        let answered = self.answers.len();
        StateSummary {
            phase: self.phase,
            strategy: cfg.strategy.name().into(),
            iteration: c.iteration(),
            budget: cfg.budget,
            spent: c.spent(),
            answered,
            remaining: cfg.budget - c.spent() - answered,
            batch_size: cfg.batch_size,
            pending: self.cards.len(),
            last: c.log().records.last().map(|r| LastMetrics {
                iteration: r.iteration,
                proportion: r.proportion,
                hit_at_1: r.hit_at_1,
                recognizer_micro_f1: r.recognizer_micro_f1,
            }),
            error: self.error.clone(),
        }
    }

    pub fn queries(&self) -> Queries {
        let state = self.state();
        Queries {
            iteration: state.iteration,
            phase: self.phase,
            queries: if self.phase == Phase::Ready { self.cards.clone() } else { Vec::new() },
        }
    }

    fn check_open(&self) -> Result<(), ApiError> {
        match self.phase {
            Phase::Ready => Ok(()),
            Phase::Busy => Err(ApiError::Busy),
            Phase::Finished => Err(ApiError::Finished),
            Phase::Failed => Err(ApiError::Failed(self.error.clone().unwrap_or_default())),
        }
    }

    /// Records one answer. Returns the acknowledgment; a status of
    /// [`AckStatus::IterationAdvancing`] means the caller must run
    /// [`Session::begin_advance`].
    pub fn record(&mut self, query: &str, outcome: &LabelOutcome) -> Result<LabelAck, ApiError> {
        self.check_open()?;
        let campaign = self.campaign();
        let e1 = campaign.kg1().entity(query).ok_or_else(|| ApiError::UnknownEntity(query.into()))?;
        let pending = campaign.pending().map(|p| p.entities.as_slice()).unwrap_or_default();
        if !pending.contains(&e1) {
            return Err(ApiError::NotInBatch(query.into()));
        }
        let resolved = match outcome {
            LabelOutcome::Bachelor => Outcome::Bachelor,
            LabelOutcome::Counterpart(uri) => {
                Outcome::Counterpart(campaign.kg2().entity(uri).ok_or_else(|| ApiError::UnknownEntity(uri.clone()))?)
            }
        };
        let batch_size = pending.len();
        if let Some(prev) = self.answers.iter().find(|a| a.query == e1) {
            if prev.outcome == resolved {
                let state = self.state();
                return Ok(LabelAck {
                    status: AckStatus::Duplicate,
                    query: query.into(),
                    answered: state.answered,
                    batch_size,
                    remaining: state.remaining,
                });
            }
            return Err(ApiError::ConflictingLabel(format!("{query} already has a different answer")));
        }
        if let Outcome::Counterpart(b) = resolved {
            let taken = campaign.labels().consumed_targets().contains(&b)
                || self.answers.iter().any(|a| a.outcome == Outcome::Counterpart(b));
            if taken {
                return Err(ApiError::OneToOne(format!("{} is already matched", campaign.kg2().uri(b))));
            }
        }
        self.answers.push(OracleAnswer {
            query: e1,
            outcome: resolved,
        });
        self.rebuild_answers_on_cards();
        self.persist_answers()?;
        let state = self.state();
        let status = if self.answers.len() == batch_size {
            AckStatus::IterationAdvancing
        } else {
            AckStatus::Recorded
        };
        Ok(LabelAck {
            status,
            query: query.into(),
            answered: state.answered,
            batch_size,
            remaining: state.remaining,
        })
    }

    /// Hands the campaign and its answers to a background worker.
    pub fn begin_advance(&mut self) -> Result<(Campaign, Vec<OracleAnswer>), ApiError> {
        self.check_open()?;
        let frozen = self.state();
        let campaign = self.campaign.take().expect("checked open");
        self.frozen = Some(frozen);
        self.phase = Phase::Busy;
        Ok((campaign, self.answers.clone()))
    }

    /// Takes the campaign back after [`advance`] ran.
    pub fn finish_advance(&mut self, campaign: Campaign, outcome: Result<(), ApiError>) {
        self.campaign = Some(campaign);
        self.frozen = None;
        let result = outcome.and_then(|_| {
            self.answers.clear();
            self.refresh_batch()?;
            self.persist_campaign()
        });
        match result {
            Ok(()) => self.error = None,
            Err(e) => {
                self.error = Some(e.to_string());
                self.phase = Phase::Failed;
            }
        }
    }

    /// Synchronous commit, for callers without a runtime.
    pub fn advance_now(&mut self, forced: bool) -> Result<(), ApiError> {
        let (mut campaign, answers) = self.begin_advance()?;
        let outcome = advance(&mut campaign, &answers, forced);
        let failed = outcome.as_ref().err().map(|e| e.to_string());
        self.finish_advance(campaign, outcome);
        match failed {
            Some(msg) => Err(ApiError::Failed(msg)),
            None => Ok(()),
        }
    }

    /// KG2 entities matched by committed or pending answers; `None` while
    /// the campaign is busy.
    pub fn taken_targets(&self) -> Option<BTreeSet<EntityId>> {
        let mut taken = self.campaign.as_ref()?.labels().consumed_targets();
        taken.extend(self.answers.iter().filter_map(|a| match a.outcome {
            Outcome::Counterpart(b) => Some(b),
            Outcome::Bachelor => None,
        }));
        Some(taken)
    }

    pub fn log(&self) -> Option<&alea_core::CampaignLog> {
        self.campaign.as_ref().map(|c| c.log())
    }
}

/// Commits `answers`, retrains and selects the next batch: the expensive
/// part of an iteration.
pub fn advance(campaign: &mut Campaign, answers: &[OracleAnswer], forced: bool) -> Result<(), ApiError> {
    campaign.commit(answers, forced)?;
    campaign.propose()?;
    Ok(())
}
