use std::collections::BTreeSet;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::acquisition::AcquisitionVector;
use crate::dataset::{Dataset, EntityId, KnowledgeGraph, LabelState};
use crate::error::{domain, Error, Result};
use crate::evaluation::micro_f1;
use crate::model::{Model, ModelCheckpoint, ScoreMatrix, TrainConfig};
use crate::recognizer::{train_recognizer, RecognizerModel};
use crate::seeds::derive_seed;
use crate::structural::{structure_aware_uncertainty, InfluenceMatrix};
use crate::topology::{betweenness_scores, default_betweenness, degree_scores, pagerank_scores, random_scores};
use crate::uncertainty::{
    bald, entropy_uncertainty, expected_scores, least_confidence, margin_uncertainty, scores_to_probs,
    smallest_margin, std_dev_uncertainty, MarginInput,
};

use super::log::{CampaignLog, Flag, IterationRecord, Timing};
use super::oracle::{Oracle, OracleAnswer, Outcome};
use super::{final_acquisition, select_batch, CampaignConfig, Strategy};

pub const SNAPSHOT_FORMAT: &str = "alea-campaign";
pub const SNAPSHOT_VERSION: u32 = 1;

/// A selected batch waiting for answers.
#[derive(Clone, Debug, PartialEq)]
pub struct PendingBatch {
    pub iteration: usize,
    pub entities: Vec<EntityId>,
    pub scores: Vec<f64>,
    pub flags: Vec<Flag>,
    pub power_iterations: Option<usize>,
    pub recognizer_gamma: Option<f64>,
    /// Recognizer decisions over the pool the batch was drawn from.
    matchable: Option<AcquisitionVector>,
    started_unix_ms: u128,
    started: Instant,
}

/// Committed campaign state; enough to resume deterministically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignSnapshot {
    pub format: String,
    pub version: u32,
    pub config: CampaignConfig,
    pub num_entities1: usize,
    pub num_entities2: usize,
    pub labels: LabelState,
    pub oracle_accesses: usize,
    pub model: ModelCheckpoint,
    pub recognizer: Option<RecognizerModel>,
    pub log: CampaignLog,
}

struct Acquisition {
    scores: AcquisitionVector,
    power_iterations: Option<usize>,
    gamma: Option<f64>,
    matchable: Option<AcquisitionVector>,
}

pub struct Campaign {
    data: Dataset,
    config: CampaignConfig,
    train_cfg: TrainConfig,
    model: Model,
    recognizer: Option<RecognizerModel>,
    log: CampaignLog,
    spent: usize,
    accesses: usize,
    pending: Option<PendingBatch>,
    influence: Option<InfluenceMatrix>,
    graph_scores: Option<AcquisitionVector>,
}

fn effective_train_config(cfg: &CampaignConfig) -> TrainConfig {
    let mut t = cfg.model.clone();
    t.seed = derive_seed(cfg.seed, "ea-model", cfg.model.seed);
    t.dropout = cfg.sampling().map_or(0.0, |mc| mc.dropout);
    t
}

fn unix_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

impl Campaign {
    /// Validates the configuration and trains the initial model on any
    /// labels already present in `data`.
    pub fn new(data: Dataset, config: CampaignConfig) -> Result<Self> {
        data.validate()?;
        config.validate(data.kg1.num_entities())?;
        let train_cfg = effective_train_config(&config);
        let model = Model::train(&data.kg1, &data.kg2, &data.store.labels.positive_pairs(), &train_cfg)?;
        Ok(Self {
            data,
            config,
            train_cfg,
            model,
            recognizer: None,
            log: CampaignLog::default(),
            spent: 0,
            accesses: 0,
            pending: None,
            influence: None,
            graph_scores: None,
        })
    }

    pub fn resume(mut data: Dataset, snapshot: CampaignSnapshot) -> Result<Self> {
        if snapshot.format != SNAPSHOT_FORMAT || snapshot.version != SNAPSHOT_VERSION {
            return Err(Error::Integrity(format!(
                "unsupported snapshot {} v{}",
                snapshot.format, snapshot.version
            )));
        }
        if snapshot.num_entities1 != data.kg1.num_entities() || snapshot.num_entities2 != data.kg2.num_entities() {
            return Err(Error::Integrity("snapshot was taken on a different dataset".into()));
        }
        snapshot.config.validate(data.kg1.num_entities())?;
        data.store.labels = snapshot.labels;
        data.validate()?;
        let model = Model::from_checkpoint(&snapshot.model)?;
        let mut recognizer = snapshot.recognizer;
        if let Some(r) = recognizer.as_mut() {
            r.encode(&data.kg1, &data.kg2)?;
        }
        Ok(Self {
            train_cfg: effective_train_config(&snapshot.config),
            data,
            config: snapshot.config,
            model,
            recognizer,
            spent: snapshot.log.spent(),
            log: snapshot.log,
            accesses: snapshot.oracle_accesses,
            pending: None,
            influence: None,
            graph_scores: None,
        })
    }

    /// Committed state only; a pending batch is recomputed on resume.
    pub fn snapshot(&self) -> CampaignSnapshot {
        CampaignSnapshot {
            format: SNAPSHOT_FORMAT.into(),
            version: SNAPSHOT_VERSION,
            config: self.config.clone(),
            num_entities1: self.data.kg1.num_entities(),
            num_entities2: self.data.kg2.num_entities(),
            labels: self.data.store.labels.clone(),
            oracle_accesses: self.accesses,
            model: self.model.to_checkpoint(),
            recognizer: self.recognizer.clone(),
            log: self.log.clone(),
        }
    }

    pub fn config(&self) -> &CampaignConfig {
        &self.config
    }

    pub fn kg1(&self) -> &KnowledgeGraph {
        &self.data.kg1
    }

    pub fn kg2(&self) -> &KnowledgeGraph {
        &self.data.kg2
    }

    pub fn labels(&self) -> &LabelState {
        &self.data.store.labels
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn log(&self) -> &CampaignLog {
        &self.log
    }

    pub fn into_log(self) -> CampaignLog {
        self.log
    }

    pub fn iteration(&self) -> usize {
        self.log.records.len()
    }

    /// Answers committed so far; labels present at start are not charged.
    pub fn spent(&self) -> usize {
        self.spent
    }

    pub fn remaining(&self) -> usize {
        self.config.budget - self.spent()
    }

    pub fn oracle_accesses(&self) -> usize {
        self.accesses
    }

    pub fn is_finished(&self) -> bool {
        self.remaining() == 0 || self.data.store.labels.pool.is_empty()
    }

    pub fn pending(&self) -> Option<&PendingBatch> {
        self.pending.as_ref()
    }

    /// KG2 entities not yet matched by a positive label.
    pub fn open_columns(&self) -> Vec<EntityId> {
        let used = self.data.store.labels.consumed_targets();
        self.data.kg2.entity_ids().filter(|e| !used.contains(e)).collect()
    }

    /// Best `m` open KG2 candidates for `e1` under the current model.
    pub fn candidates(&self, e1: EntityId, m: usize) -> Result<Vec<(EntityId, f64)>> {
        let cols = self.open_columns();
        if cols.is_empty() {
            return Ok(Vec::new());
        }
        let s = self.model.score_matrix(&[e1], &cols)?;
        Ok(s.ranked_columns(0)
            .into_iter()
            .take(m)
            .map(|j| (s.cols()[j], s.values()[[0, j]]))
            .collect())
    }

    /// Scores the pool and selects the next batch. Returns the existing
    /// pending batch if there is one, `None` once the campaign is over.
    pub fn propose(&mut self) -> Result<Option<&PendingBatch>> {
        if self.pending.is_none() && !self.is_finished() {
            let started_unix_ms = unix_ms();
            let started = Instant::now();
            let iteration = self.iteration();
            let pool: Vec<EntityId> = self.data.store.labels.pool.iter().copied().collect();
            let n = self.config.batch_size.min(self.remaining()).min(pool.len());
            let mut flags = Vec::new();
            let acq = self.acquire(iteration, &pool, &mut flags)?;
            let entities = select_batch(&acq.scores, &self.data.store.labels.pool, n)?;
            let scores = entities.iter().map(|&e| acq.scores.get(e).expect("pool entity scored")).collect();
            self.pending = Some(PendingBatch {
                iteration,
                entities,
                scores,
                flags,
                power_iterations: acq.power_iterations,
                recognizer_gamma: acq.gamma,
                matchable: acq.matchable,
                started_unix_ms,
                started,
            });
        }
        Ok(self.pending.as_ref())
    }

    /// Applies answers to the pending batch, refreshes the model and logs the
    /// iteration. Unless `forced`, every batch entity must be answered;
    /// unanswered entities of a forced batch stay in the pool.
    pub fn commit(&mut self, answers: &[OracleAnswer], forced: bool) -> Result<&IterationRecord> {
        let pending = self.pending.as_ref().ok_or_else(|| domain("no pending batch"))?;
        let mut seen = BTreeSet::new();
        let mut targets = BTreeSet::new();
        let consumed = self.data.store.labels.consumed_targets();
        for a in answers {
            if !pending.entities.contains(&a.query) {
                return Err(domain(format!("{} is not in the pending batch", a.query)));
            }
            if !seen.insert(a.query) {
                return Err(domain(format!("{} answered twice", a.query)));
            }
            if let Outcome::Counterpart(b) = a.outcome {
                if !self.data.kg2.contains(b) {
                    return Err(domain(format!("counterpart {b} is not a KG2 entity")));
                }
                if consumed.contains(&b) || !targets.insert(b) {
                    return Err(Error::OneToOne(format!("KG2 entity {b} is already matched")));
                }
            }
        }
        if !forced && seen.len() != pending.entities.len() {
            return Err(domain(format!(
                "{} of {} queries answered",
                seen.len(),
                pending.entities.len()
            )));
        }
        let pending = self.pending.take().expect("checked above");
        let ordered: Vec<OracleAnswer> = pending
            .entities
            .iter()
            .filter_map(|e| answers.iter().find(|a| a.query == *e).copied())
            .collect();
        let labels = &mut self.data.store.labels;
        for a in &ordered {
            labels.pool.remove(&a.query);
            match a.outcome {
                Outcome::Counterpart(b) => {
                    labels.positives.insert(a.query, b);
                }
                Outcome::Bachelor => {
                    labels.bachelors.insert(a.query);
                }
            }
        }
        labels.validate(self.data.kg1.num_entities())?;
        self.accesses += ordered.len();
        self.spent += ordered.len();

        let iteration = pending.iteration;
        let round = iteration as u64 + 1;
        let positives = self.data.store.labels.positive_pairs();
        if self.config.warm_start {
            self.model.fit(&self.data.kg1, &self.data.kg2, &positives, &self.train_cfg, round)?;
        } else {
            let mut fresh = Model::init(&self.data.kg1, &self.data.kg2, &self.train_cfg)?;
            fresh.fit(&self.data.kg1, &self.data.kg2, &positives, &self.train_cfg, round)?;
            self.model = fresh;
        }

        let mut flags = pending.flags.clone();
        if forced && ordered.len() < pending.entities.len() {
            flags.push(Flag::ForcedAdvance);
        }
        let complete = self.is_finished();
        let test = self.data.store.test_pairs();
        let evaluate = complete || (iteration + 1) % self.config.evaluation_interval == 0;
        let hit_at_1 = if test.is_empty() {
            flags.push(Flag::TestSetEmpty);
            None
        } else if evaluate {
            Some(self.model.hit_at_1(&test)?)
        } else {
            None
        };
        let recognizer_micro_f1 = match &pending.matchable {
            Some(m) if !self.data.store.labels.pool.is_empty() => {
                let pool = &self.data.store.labels.pool;
                let pred: Vec<bool> = pool.iter().map(|&e| m.get(e) == Some(1.0)).collect();
                let truth: Vec<bool> = pool.iter().map(|&e| self.data.store.counterpart(e).is_some()).collect();
                Some(micro_f1(&pred, &truth)?)
            }
            _ => None,
        };
        flags.sort();
        flags.dedup();
        let labels = &self.data.store.labels;
        let spent = self.spent();
        self.log.records.push(IterationRecord {
            iteration,
            batch: pending.entities.clone(),
            scores: pending.scores.clone(),
            answers: ordered,
            spent,
            proportion: spent as f64 / self.data.kg1.num_entities() as f64,
            labelled_matchable: labels.positives.len(),
            labelled_bachelor: labels.bachelors.len(),
            pool_size: labels.pool.len(),
            test_size: test.len(),
            hit_at_1,
            recognizer_micro_f1,
            recognizer_gamma: pending.recognizer_gamma,
            power_iterations: pending.power_iterations,
            oracle_accesses: self.accesses,
            flags,
            complete,
            timing: Some(Timing {
                started_unix_ms: pending.started_unix_ms,
                elapsed_ms: pending.started.elapsed().as_millis(),
            }),
        });
        Ok(self.log.records.last().expect("just pushed"))
    }

    /// One full iteration against `oracle`.
    pub fn step(&mut self, oracle: &mut dyn Oracle) -> Result<Option<&IterationRecord>> {
        let batch = match self.propose()? {
            Some(p) => p.entities.clone(),
            None => return Ok(None),
        };
        let answers = oracle.answer(&batch)?;
        self.commit(&answers, false).map(Some)
    }

    fn acquire(&mut self, iteration: usize, pool: &[EntityId], flags: &mut Vec<Flag>) -> Result<Acquisition> {
        let seed = self.config.seed;
        let plain = |scores| Acquisition {
            scores,
            power_iterations: None,
            gamma: None,
            matchable: None,
        };
        match self.config.strategy {
            Strategy::Random => Ok(plain(random_scores(pool, derive_seed(seed, "rand", iteration as u64))?)),
            Strategy::Degree | Strategy::PageRank | Strategy::Betweenness => {
                if self.graph_scores.is_none() {
                    self.graph_scores = Some(self.graph_scores_all()?);
                }
                Ok(plain(self.graph_scores.as_ref().expect("computed").restrict(pool)?))
            }
            Strategy::StructUncertainty | Strategy::ActiveEa => self.structural(iteration, pool, flags),
            _ => Ok(plain(self.model_uncertainty(iteration, pool, flags)?)),
        }
    }

    fn graph_scores_all(&self) -> Result<AcquisitionVector> {
        let kg1 = &self.data.kg1;
        let all: Vec<EntityId> = kg1.entity_ids().collect();
        let seed = derive_seed(self.config.seed, "betweenness", 0);
        match self.config.strategy {
            Strategy::Degree => degree_scores(kg1, &all),
            Strategy::PageRank => Ok(pagerank_scores(kg1, &all, &self.config.pagerank)?.scores),
            _ => match self.config.betweenness_pivots {
                Some(k) => betweenness_scores(kg1, &all, Some(k), seed),
                None => default_betweenness(kg1, &all, seed),
            },
        }
    }

    /// Deterministic scores, or their dropout-sample mean when sampling is
    /// configured.
    fn expected_matrix(&self, iteration: usize, rows: &[EntityId], cols: &[EntityId]) -> Result<ScoreMatrix> {
        match self.config.mc.as_ref() {
            Some(mc) => expected_scores(&self.samples(iteration, rows, cols, mc.samples)?),
            None => self.model.score_matrix(rows, cols),
        }
    }

    fn samples(&self, iteration: usize, rows: &[EntityId], cols: &[EntityId], t: usize) -> Result<Vec<ScoreMatrix>> {
        self.model
            .mc_score_samples(rows, cols, t, derive_seed(self.config.seed, "mc-scoring", iteration as u64))
    }

    fn model_uncertainty(&self, iteration: usize, pool: &[EntityId], flags: &mut Vec<Flag>) -> Result<AcquisitionVector> {
        let cols = self.open_columns();
        if cols.len() < 2 {
            flags.push(Flag::UncertaintyUndefined);
            return AcquisitionVector::new(pool.iter().map(|&e| (e, 0.0)));
        }
        let temp = self.config.temperature;
        match self.config.strategy {
            Strategy::Uncertainty => margin_uncertainty(&self.expected_matrix(iteration, pool, &cols)?),
            Strategy::Entropy => entropy_uncertainty(&scores_to_probs(&self.expected_matrix(iteration, pool, &cols)?, temp)?),
            Strategy::LeastConfidence => {
                least_confidence(&scores_to_probs(&self.expected_matrix(iteration, pool, &cols)?, temp)?)
            }
            Strategy::MarginProbability => smallest_margin(MarginInput::Probabilities(&scores_to_probs(
                &self.expected_matrix(iteration, pool, &cols)?,
                temp,
            )?)),
            Strategy::Bald | Strategy::StdDev => {
                let t = self.config.sampling().expect("sampling strategies always sample").samples;
                let probs = self
                    .samples(iteration, pool, &cols, t)?
                    .iter()
                    .map(|s| scores_to_probs(s, temp))
                    .collect::<Result<Vec<_>>>()?;
                if self.config.strategy == Strategy::Bald {
                    bald(&probs)
                } else {
                    std_dev_uncertainty(&probs)
                }
            }
            other => unreachable!("{other} is not a model-uncertainty strategy"),
        }
    }

    fn structural(&mut self, iteration: usize, pool: &[EntityId], flags: &mut Vec<Flag>) -> Result<Acquisition> {
        let all: Vec<EntityId> = self.data.kg1.entity_ids().collect();
        let cols = self.open_columns();
        let u = if cols.len() < 2 {
            flags.push(Flag::UncertaintyUndefined);
            AcquisitionVector::new(all.iter().map(|&e| (e, 1.0)))?
        } else {
            margin_uncertainty(&self.expected_matrix(iteration, &all, &cols)?)?
        };
        if self.influence.is_none() {
            self.influence = Some(InfluenceMatrix::build(&self.data.kg1));
        }
        let w = self.influence.as_ref().expect("built");
        let solved = match structure_aware_uncertainty(w, &u, &self.config.struct_uncertainty) {
            Err(Error::Degenerate(_)) => {
                flags.push(Flag::DegenerateUncertainty);
                let flat = AcquisitionVector::new(all.iter().map(|&e| (e, 1.0)))?;
                structure_aware_uncertainty(w, &flat, &self.config.struct_uncertainty)?
            }
            other => other?,
        };
        if !solved.converged {
            flags.push(Flag::PowerIterationCapped);
        }
        let f_su = solved.scores.restrict(pool)?;
        let mut out = Acquisition {
            scores: f_su,
            power_iterations: Some(solved.iterations),
            gamma: None,
            matchable: None,
        };
        if self.config.strategy != Strategy::ActiveEa || !self.config.recognizer_enabled {
            return Ok(out);
        }
        let labels = &self.data.store.labels;
        if labels.positives.is_empty() {
            flags.push(Flag::RecognizerColdStart);
            return Ok(out);
        }
        let mut rcfg = self.config.recognizer.clone();
        rcfg.seed = derive_seed(self.config.seed, "recognizer", rcfg.seed ^ iteration as u64);
        let rec = train_recognizer(&self.data.kg1, &self.data.kg2, labels, &rcfg)?;
        if rec.single_split_fallback {
            flags.push(Flag::RecognizerSingleSplit);
        }
        if !rec.untrained_folds.is_empty() {
            flags.push(Flag::RecognizerUntrainedFold);
        }
        let (_, f_b) = rec.predict(pool, &cols)?;
        out.scores = final_acquisition(&out.scores, &f_b)?;
        out.gamma = Some(rec.gamma);
        out.matchable = Some(f_b);
        self.recognizer = Some(rec);
        Ok(out)
    }
}

/// Runs a campaign to completion against a simulated oracle.
pub fn run_campaign(data: Dataset, config: CampaignConfig) -> Result<CampaignLog> {
    let mut oracle = super::oracle::SimulatedOracle::new(&data.store);
    let mut campaign = Campaign::new(data, config)?;
    while campaign.step(&mut oracle)?.is_some() {}
    Ok(campaign.into_log())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::SimulatedOracle;
    use crate::recognizer::RecognizerConfig;
    use crate::synth::{isomorphic_pair, SynthConfig};

    fn toy() -> Dataset {
        isomorphic_pair(&SynthConfig {
            entities: 60,
            bachelor_fraction: 10.0 / 60.0,
            seed: 1,
            ..Default::default()
        })
        .unwrap()
    }

    fn cfg(strategy: Strategy) -> CampaignConfig {
        CampaignConfig {
            strategy,
            budget: 30,
            batch_size: 10,
            seed: 5,
            model: TrainConfig {
                epochs: 5,
                ..Default::default()
            },
            recognizer: RecognizerConfig {
                input_dim: 16,
                output_dim: 8,
                epochs: 5,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn bookkeeping_on_toy_dataset() {
        let data = toy();
        assert_eq!(data.store.bachelors1().len(), 10);
        let log = run_campaign(data, cfg(Strategy::Random)).unwrap();
        assert_eq!(log.records.len(), 3);
        let sizes: Vec<usize> = log.records.iter().map(|r| r.answers.len()).collect();
        assert_eq!(sizes, vec![10, 10, 10]);
        assert_eq!(log.records.iter().map(|r| r.pool_size).collect::<Vec<_>>(), vec![50, 40, 30]);
        let last = log.records.last().unwrap();
        assert_eq!(last.spent, 30);
        assert_eq!(last.labelled_matchable + last.labelled_bachelor, 30);
        assert_eq!(last.oracle_accesses, 30);
        assert!(last.complete);
    }

    #[test]
    fn labelling_everything_ends_with_empty_test_set() {
        let data = isomorphic_pair(&SynthConfig {
            entities: 12,
            ..Default::default()
        })
        .unwrap();
        let c = CampaignConfig {
            budget: 12,
            batch_size: 12,
            ..cfg(Strategy::Random)
        };
        let log = run_campaign(data, c).unwrap();
        assert_eq!(log.records.len(), 1);
        let r = &log.records[0];
        assert!(r.complete && r.hit_at_1.is_none());
        assert!(r.flags.contains(&Flag::TestSetEmpty));
    }

    #[test]
    fn commit_rejects_bad_answers() {
        let data = toy();
        let mut c = Campaign::new(data.clone(), cfg(Strategy::Degree)).unwrap();
        let batch = c.propose().unwrap().unwrap().entities.clone();
        let outside = data.kg1.entity_ids().find(|e| !batch.contains(e)).unwrap();
        let bogus = [OracleAnswer {
            query: outside,
            outcome: Outcome::Bachelor,
        }];
        assert!(c.commit(&bogus, true).is_err());
        let partial = [OracleAnswer {
            query: batch[0],
            outcome: Outcome::Bachelor,
        }];
        assert!(c.commit(&partial, false).is_err());
        let clash = [
            OracleAnswer {
                query: batch[0],
                outcome: Outcome::Counterpart(EntityId(0)),
            },
            OracleAnswer {
                query: batch[1],
                outcome: Outcome::Counterpart(EntityId(0)),
            },
        ];
        assert!(matches!(c.commit(&clash, true), Err(Error::OneToOne(_))));
        let r = c.commit(&partial, true).unwrap();
        assert!(r.flags.contains(&Flag::ForcedAdvance));
        assert_eq!(r.spent, 1);
    }

    #[test]
    fn active_ea_cold_start_then_recognizer() {
        let log = run_campaign(toy(), cfg(Strategy::ActiveEa)).unwrap();
        assert!(log.records[0].flags.contains(&Flag::RecognizerColdStart));
        assert!(log.records[0].recognizer_micro_f1.is_none());
        assert!(log.records[1].recognizer_gamma.is_some());
        assert!(log.records[1].recognizer_micro_f1.is_some());
    }

    #[test]
    fn snapshot_resume_continues_identically() {
        let data = toy();
        let config = cfg(Strategy::StructUncertainty);
        let full = run_campaign(data.clone(), config.clone()).unwrap().without_timing();

        let mut oracle = SimulatedOracle::new(&data.store);
        let mut c = Campaign::new(data.clone(), config).unwrap();
        c.step(&mut oracle).unwrap();
        let text = serde_json::to_string(&c.snapshot()).unwrap();
        drop(c);
        let snap: CampaignSnapshot = serde_json::from_str(&text).unwrap();
        let mut resumed = Campaign::resume(data, snap).unwrap();
        while resumed.step(&mut oracle).unwrap().is_some() {}
        assert_eq!(resumed.log().without_timing(), full);
    }

    #[test]
    fn every_strategy_runs() {
        for s in Strategy::ALL {
            let log = run_campaign(toy(), CampaignConfig { budget: 20, ..cfg(s) }).unwrap();
            assert_eq!(log.spent(), 20, "{s}");
        }
    }
}
