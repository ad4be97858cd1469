//! Bachelor recognizer: decides whether a KG1 entity has a counterpart.
//!
//! Two GCN encoders (one per graph, separate parameters) are trained with a
//! contrastive loss on labelled pairs. An entity's matchability score is its
//! best dot-product similarity against the KG2 candidates, and a threshold
//! tuned on held-out labels turns the score into a decision. K encoder pairs
//! are trained by K-fold cross-validation and their scores averaged.

pub mod gcn;

use std::collections::BTreeSet;

use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::AcquisitionVector;
use crate::dataset::{EntityId, KnowledgeGraph, LabelState};
use crate::error::{config, domain, Error, Result};
use crate::evaluation::micro_f1;
use crate::seeds::derive_seed;
use gcn::{backward, forward, GcnOptimizer, GcnParams, Neighbourhood, Optimizer};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecognizerConfig {
    pub layers: usize,
    pub input_dim: usize,
    pub output_dim: usize,
    /// Number of cross-validation folds (ensemble size).
    pub folds: usize,
    /// Hinge margin λ for negative pairs.
    pub margin: f64,
    /// Weight β of the negative-pair term.
    pub balance: f64,
    /// Corruptions per side per positive pair.
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Also optimize the initial entity features.
    pub train_features: bool,
    pub optimizer: Optimizer,
    /// Where corrupted entities are drawn from.
    pub negative_scope: NegativeScope,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeScope {
    /// Every entity of the graph.
    All,
    /// Only entities of the fold's training pairs.
    #[default]
    Labelled,
}

impl Default for RecognizerConfig {
    fn default() -> Self {
        Self {
            layers: 1,
            input_dim: 500,
            output_dim: 400,
            folds: 5,
            margin: 1.5,
            balance: 0.1,
            negatives: 10,
            epochs: 200,
            learning_rate: 0.1,
            train_features: true,
            optimizer: Optimizer::Sgd,
            negative_scope: NegativeScope::Labelled,
            seed: 0,
        }
    }
}

impl RecognizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(config("recognizer dimensions must be positive"));
        }
        if self.folds == 0 {
            return Err(config("recognizer needs at least one fold"));
        }
        if !(self.margin > 0.0) || !(self.balance >= 0.0) || !(self.learning_rate > 0.0) {
            return Err(config("recognizer margin, balance and learning rate must be positive"));
        }
        if self.negatives == 0 {
            return Err(config("recognizer negative count must be positive"));
        }
        Ok(())
    }
}

fn dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `Σ_pos ‖h¹ᵢ − h²ⱼ‖ + β·Σ_neg [λ − ‖h¹ᵢ − h²ⱼ‖]₊`.
pub fn contrastive_loss(
    h1: &Array2<f64>,
    h2: &Array2<f64>,
    positives: &[(EntityId, EntityId)],
    negatives: &[(EntityId, EntityId)],
    margin: f64,
    balance: f64,
) -> f64 {
    let pos: f64 = positives.iter().map(|&(a, b)| dist(h1.row(a.idx()), h2.row(b.idx()))).sum();
    let neg: f64 = negatives
        .iter()
        .map(|&(a, b)| (margin - dist(h1.row(a.idx()), h2.row(b.idx()))).max(0.0))
        .sum();
    pos + balance * neg
}

/// Loss gradient with respect to the encoder outputs.
fn contrastive_grad(
    h1: &Array2<f64>,
    h2: &Array2<f64>,
    positives: &[(EntityId, EntityId)],
    negatives: &[(EntityId, EntityId)],
    margin: f64,
    balance: f64,
) -> (Array2<f64>, Array2<f64>) {
    let mut g1 = Array2::zeros(h1.raw_dim());
    let mut g2 = Array2::zeros(h2.raw_dim());
    let mut push = |a: EntityId, b: EntityId, scale: f64| {
        let diff = &h1.row(a.idx()) - &h2.row(b.idx());
        let d = diff.dot(&diff).sqrt();
        if d > 0.0 {
            g1.row_mut(a.idx()).scaled_add(scale / d, &diff);
            g2.row_mut(b.idx()).scaled_add(-scale / d, &diff);
        }
        d
    };
    for &(a, b) in positives {
        push(a, b, 1.0);
    }
    for &(a, b) in negatives {
        let d = dist(h1.row(a.idx()), h2.row(b.idx()));
        if margin - d > 0.0 {
            push(a, b, -balance);
        }
    }
    (g1, g2)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Negatives {
    pub pairs: Vec<(EntityId, EntityId)>,
    /// Set when a pool was too small to avoid re-drawing the positive.
    pub with_replacement: bool,
}

/// For each positive pair, `per_side` corruptions of the KG1 entity and
/// `per_side` of the KG2 entity, drawn uniformly from `pool1` / `pool2`.
pub fn generate_negatives(
    positives: &[(EntityId, EntityId)],
    pool1: &[EntityId],
    pool2: &[EntityId],
    per_side: usize,
    seed: u64,
) -> Result<Negatives> {
    if pool1.is_empty() || pool2.is_empty() {
        return Err(domain("negative sampling needs non-empty candidate pools"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(positives.len() * per_side * 2);
    let mut with_replacement = false;
    let mut draw = |pool: &[EntityId], avoid: EntityId, rng: &mut ChaCha8Rng| -> EntityId {
        if pool.len() == 1 && pool[0] == avoid {
            with_replacement = true;
            return avoid;
        }
        loop {
            let e = pool[rng.gen_range(0..pool.len())];
            if e != avoid {
                return e;
            }
        }
    };
    for &(a, b) in positives {
        for _ in 0..per_side {
            pairs.push((draw(pool1, a, &mut rng), b));
        }
        for _ in 0..per_side {
            pairs.push((a, draw(pool2, b, &mut rng)));
        }
    }
    Ok(Negatives {
        pairs,
        with_replacement,
    })
}

/// One trained scoring function f^s_k: a pair of encoders and their outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldModel {
    pub encoder1: GcnParams,
    pub encoder2: GcnParams,
    #[serde(skip)]
    h1: Option<Array2<f64>>,
    #[serde(skip)]
    h2: Option<Array2<f64>>,
    /// Mean contrastive loss per epoch.
    pub loss_history: Vec<f64>,
    pub trained: bool,
}

impl FoldModel {
    fn fresh(nb1: &Neighbourhood, nb2: &Neighbourhood, cfg: &RecognizerConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "gcn-init", 0));
        let encoder1 = GcnParams::init(nb1.len(), cfg.input_dim, cfg.output_dim, cfg.layers, &mut rng);
        let encoder2 = GcnParams::init(nb2.len(), cfg.input_dim, cfg.output_dim, cfg.layers, &mut rng);
        Self {
            encoder1,
            encoder2,
            h1: None,
            h2: None,
            loss_history: Vec::new(),
            trained: false,
        }
    }

    /// Recomputes cached representations (needed after deserialization).
    pub fn encode(&mut self, kg1: &KnowledgeGraph, kg2: &KnowledgeGraph) -> Result<()> {
        self.h1 = Some(gcn::gcn_encode(kg1, &self.encoder1)?);
        self.h2 = Some(gcn::gcn_encode(kg2, &self.encoder2)?);
        Ok(())
    }

    pub fn representations(&self) -> Result<(&Array2<f64>, &Array2<f64>)> {
        match (&self.h1, &self.h2) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(domain("fold representations not computed; call encode first")),
        }
    }

    /// `f^s(e) = max_j ⟨h¹_e, h²_j⟩` over `columns`.
    pub fn scores(&self, candidates: &[EntityId], columns: &[EntityId]) -> Result<AcquisitionVector> {
        let (h1, h2) = self.representations()?;
        fold_scores(h1, h2, candidates, columns)
    }
}

/// Row-wise maximum similarity of `candidates` against `columns`.
pub fn fold_scores(
    h1: &Array2<f64>,
    h2: &Array2<f64>,
    candidates: &[EntityId],
    columns: &[EntityId],
) -> Result<AcquisitionVector> {
    if columns.is_empty() {
        return Err(domain("empty KG2 candidate set"));
    }
    if let Some(e) = candidates.iter().find(|e| e.idx() >= h1.nrows()) {
        return Err(domain(format!("candidate {e} outside KG1")));
    }
    if let Some(e) = columns.iter().find(|e| e.idx() >= h2.nrows()) {
        return Err(domain(format!("column {e} outside KG2")));
    }
    let sub2 = h2.select(ndarray::Axis(0), &columns.iter().map(|e| e.idx()).collect::<Vec<_>>());
    let sub1 = h1.select(ndarray::Axis(0), &candidates.iter().map(|e| e.idx()).collect::<Vec<_>>());
    let sims = sub1.dot(&sub2.t());
    AcquisitionVector::new(
        candidates
            .iter()
            .zip(sims.rows())
            .map(|(&e, row)| (e, row.iter().copied().fold(f64::NEG_INFINITY, f64::max))),
    )
}

/// Minimizes the contrastive loss over `positives`, drawing fresh
/// negatives every epoch.
pub fn train_fold(
    kg1: &KnowledgeGraph,
    kg2: &KnowledgeGraph,
    positives: &[(EntityId, EntityId)],
    cfg: &RecognizerConfig,
    seed: u64,
) -> Result<FoldModel> {
    cfg.validate()?;
    let nb1 = Neighbourhood::of(kg1);
    let nb2 = Neighbourhood::of(kg2);
    train_fold_with(&nb1, &nb2, positives, cfg, seed)
}

fn train_fold_with(
    nb1: &Neighbourhood,
    nb2: &Neighbourhood,
    positives: &[(EntityId, EntityId)],
    cfg: &RecognizerConfig,
    seed: u64,
) -> Result<FoldModel> {
    if positives.is_empty() {
        return Err(Error::Training {
            epoch: 0,
            message: "recognizer needs at least one matchable annotation".into(),
        });
    }
    let mut fold = FoldModel::fresh(nb1, nb2, cfg, seed);
    let (pool1, pool2): (Vec<EntityId>, Vec<EntityId>) = match cfg.negative_scope {
        NegativeScope::All => (
            (0..nb1.len() as u32).map(EntityId).collect(),
            (0..nb2.len() as u32).map(EntityId).collect(),
        ),
        NegativeScope::Labelled => positives.iter().copied().unzip(),
    };
    let mut opt1 = GcnOptimizer::new(cfg.optimizer, &fold.encoder1);
    let mut opt2 = GcnOptimizer::new(cfg.optimizer, &fold.encoder2);
    for epoch in 0..cfg.epochs {
        let neg = generate_negatives(positives, &pool1, &pool2, cfg.negatives, derive_seed(seed, "gcn-neg", epoch as u64))?;
        let (h1, t1) = forward(nb1, &fold.encoder1);
        let (h2, t2) = forward(nb2, &fold.encoder2);
        let loss = contrastive_loss(&h1, &h2, positives, &neg.pairs, cfg.margin, cfg.balance);
        if !loss.is_finite() {
            return Err(Error::Training {
                epoch,
                message: format!("contrastive loss is {loss}"),
            });
        }
        fold.loss_history.push(loss / positives.len() as f64);
        let (g1, g2) = contrastive_grad(&h1, &h2, positives, &neg.pairs, cfg.margin, cfg.balance);
        let grads1 = backward(nb1, &fold.encoder1, &t1, &g1);
        let grads2 = backward(nb2, &fold.encoder2, &t2, &g2);
        opt1.step(&mut fold.encoder1, &grads1, cfg.learning_rate, epoch as i32 + 1, cfg.train_features);
        opt2.step(&mut fold.encoder2, &grads2, cfg.learning_rate, epoch as i32 + 1, cfg.train_features);
    }
    fold.trained = true;
    fold.h1 = Some(forward(nb1, &fold.encoder1).0);
    fold.h2 = Some(forward(nb2, &fold.encoder2).0);
    Ok(fold)
}

/// A labelled validation score: `(f^s(e), e is matchable)`.
pub type Validation = Vec<(f64, bool)>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub gamma: f64,
    /// Mean micro-F1 across validation splits at `gamma`.
    pub quality: f64,
}

fn split_f1(split: &[(f64, bool)], gamma: f64) -> f64 {
    let pred: Vec<bool> = split.iter().map(|&(s, _)| s > gamma).collect();
    let truth: Vec<bool> = split.iter().map(|&(_, m)| m).collect();
    micro_f1(&pred, &truth).expect("split is non-empty")
}

/// Candidate thresholds: −∞, midpoints between consecutive distinct
/// observed scores, +∞.
pub fn threshold_grid(splits: &[Validation]) -> Vec<f64> {
    let mut scores: Vec<f64> = splits.iter().flatten().map(|&(s, _)| s).collect();
    scores.sort_by(f64::total_cmp);
    scores.dedup();
    let mut grid = vec![f64::NEG_INFINITY];
    grid.extend(scores.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0));
    grid.push(f64::INFINITY);
    grid
}

/// Picks the grid threshold maximizing mean micro-F1 across splits; ties go
/// to the smaller threshold.
pub fn search_threshold(splits: &[Validation]) -> Result<Threshold> {
    if splits.is_empty() || splits.iter().any(|s| s.is_empty()) {
        return Err(config("threshold search needs non-empty validation splits"));
    }
    let mut best = Threshold {
        gamma: f64::NEG_INFINITY,
        quality: f64::NEG_INFINITY,
    };
    for gamma in threshold_grid(splits) {
        let q = splits.iter().map(|s| split_f1(s, gamma)).sum::<f64>() / splits.len() as f64;
        if q > best.quality {
            best = Threshold { gamma, quality: q };
        }
    }
    Ok(best)
}

/// Averages per-fold scores and thresholds the mean at `gamma`.
/// Returns `(mean scores, decisions)` with decisions in {0, 1}.
pub fn ensemble_decision(fold_scores: &[AcquisitionVector], gamma: f64) -> Result<(AcquisitionVector, AcquisitionVector)> {
    let first = fold_scores.first().ok_or_else(|| domain("no fold scores"))?;
    if fold_scores.iter().any(|f| f.ids() != first.ids()) {
        return Err(domain("fold scores cover different candidates"));
    }
    let k = fold_scores.len() as f64;
    let mut mean = vec![0.0; first.len()];
    for f in fold_scores {
        for (m, v) in mean.iter_mut().zip(f.values()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= k);
    let decisions = AcquisitionVector::new(
        first
            .ids()
            .iter()
            .zip(&mean)
            .map(|(&e, &m)| (e, if m > gamma { 1.0 } else { 0.0 })),
    )?;
    Ok((AcquisitionVector::new(first.ids().iter().copied().zip(mean))?, decisions))
}

/// K-way stratified partition of labelled KG1 entities: positives first,
/// then bachelors, each shuffled and dealt round-robin.
pub fn stratified_folds(labels: &LabelState, k: usize, seed: u64) -> Vec<Vec<EntityId>> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "recognizer-partition", 0));
    let mut pos: Vec<EntityId> = labels.positives.keys().copied().collect();
    let mut neg: Vec<EntityId> = labels.bachelors.iter().copied().collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut folds = vec![Vec::new(); k];
    for (i, e) in pos.into_iter().chain(neg).enumerate() {
        folds[i % k].push(e);
    }
    folds
}

/// Trained K-fold ensemble plus its decision threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecognizerModel {
    pub folds: Vec<FoldModel>,
    pub gamma: f64,
    pub validation_quality: f64,
    /// Set when fewer labels than folds forced a single 80/20 split.
    pub single_split_fallback: bool,
    /// Folds whose training split held no positive pair; they keep their
    /// initial encoders.
    pub untrained_folds: Vec<usize>,
    /// Per-fold validation data, kept for diagnostics.
    pub validation: Vec<Validation>,
}

impl RecognizerModel {
    pub fn fold_scores(&self, candidates: &[EntityId], columns: &[EntityId]) -> Result<Vec<AcquisitionVector>> {
        self.folds.iter().map(|f| f.scores(candidates, columns)).collect()
    }

    /// Ensemble decision: mean fold score, thresholded at `gamma`.
    pub fn predict(&self, candidates: &[EntityId], columns: &[EntityId]) -> Result<(AcquisitionVector, AcquisitionVector)> {
        ensemble_decision(&self.fold_scores(candidates, columns)?, self.gamma)
    }

    pub fn encode(&mut self, kg1: &KnowledgeGraph, kg2: &KnowledgeGraph) -> Result<()> {
        for f in &mut self.folds {
            f.encode(kg1, kg2)?;
        }
        Ok(())
    }
}

/// KG2 entities minus the counterparts of `used`.
fn open_columns(n2: usize, used: impl Iterator<Item = EntityId>) -> Vec<EntityId> {
    let taken: BTreeSet<EntityId> = used.collect();
    (0..n2 as u32).map(EntityId).filter(|e| !taken.contains(e)).collect()
}

/// Trains the K-fold ensemble on the labelled part of `labels` and tunes the
/// shared threshold on the held-out folds.
pub fn train_recognizer(
    kg1: &KnowledgeGraph,
    kg2: &KnowledgeGraph,
    labels: &LabelState,
    cfg: &RecognizerConfig,
) -> Result<RecognizerModel> {
    cfg.validate()?;
    if labels.positives.is_empty() {
        return Err(Error::Training {
            epoch: 0,
            message: "recognizer needs at least one matchable annotation".into(),
        });
    }
    let nb1 = Neighbourhood::of(kg1);
    let nb2 = Neighbourhood::of(kg2);
    let total = labels.num_labelled();
    let (validation_sets, single_split_fallback): (Vec<Vec<EntityId>>, bool) = if total >= cfg.folds && cfg.folds >= 2 {
        (stratified_folds(labels, cfg.folds, cfg.seed), false)
    } else {
        // Too few labels for K folds: one model, 20 % held out (at least one).
        let mut items: Vec<EntityId> = labels.positives.keys().chain(labels.bachelors.iter()).copied().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "recognizer-partition", 1));
        items.shuffle(&mut rng);
        let hold = ((total as f64 * 0.2).round() as usize).max(1);
        (vec![items[..hold].to_vec()], cfg.folds >= 2)
    };
    let results: Vec<Result<(FoldModel, Validation, bool)>> = validation_sets
        .par_iter()
        .enumerate()
        .map(|(k, held_out)| {
            let held: BTreeSet<EntityId> = held_out.iter().copied().collect();
            let train: Vec<(EntityId, EntityId)> = labels
                .positives
                .iter()
                .filter(|(a, _)| !held.contains(a))
                .map(|(&a, &b)| (a, b))
                .collect();
            let seed = derive_seed(cfg.seed, "recognizer-fold", k as u64);
            let (fold, trained) = if train.is_empty() {
                let mut f = FoldModel::fresh(&nb1, &nb2, cfg, seed);
                f.h1 = Some(forward(&nb1, &f.encoder1).0);
                f.h2 = Some(forward(&nb2, &f.encoder2).0);
                (f, false)
            } else {
                (train_fold_with(&nb1, &nb2, &train, cfg, seed)?, true)
            };
            let columns = open_columns(kg2.num_entities(), train.iter().map(|p| p.1));
            let scores = fold.scores(held_out, &columns)?;
            let validation = held_out
                .iter()
                .map(|e| (scores.get(*e).expect("scored"), labels.positives.contains_key(e)))
                .collect();
            Ok((fold, validation, trained))
        })
        .collect();
    let mut folds = Vec::new();
    let mut validation = Vec::new();
    let mut untrained_folds = Vec::new();
    for (k, r) in results.into_iter().enumerate() {
        let (f, v, trained) = r?;
        if !trained {
            untrained_folds.push(k);
        }
        folds.push(f);
        validation.push(v);
    }
    let t = search_threshold(&validation)?;
    Ok(RecognizerModel {
        folds,
        gamma: t.gamma,
        validation_quality: t.quality,
        single_split_fallback,
        untrained_folds,
        validation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn ids(v: &[u32]) -> Vec<EntityId> {
        v.iter().map(|&i| EntityId(i)).collect()
    }

    #[test]
    fn contrastive_loss_examples() {
        let h1 = array![[1.0, 0.0], [0.0, 1.0]];
        let h2 = array![[1.0, 0.0], [0.0, -1.0]];
        // Coincident positive, negative at distance 2 > λ.
        let l = contrastive_loss(&h1, &h2, &[(EntityId(0), EntityId(0))], &[(EntityId(1), EntityId(1))], 1.5, 0.1);
        assert_eq!(l, 0.0);
        // Negative at distance 0 contributes β·λ.
        let l = contrastive_loss(&h1, &h2, &[], &[(EntityId(0), EntityId(0))], 1.5, 0.1);
        assert_eq!(l, 0.1 * 1.5);
    }

    #[test]
    fn negatives_count_exclusion_and_determinism() {
        let p1 = ids(&[0, 1, 2, 3]);
        let p2 = ids(&[0, 1, 2]);
        let pos = [(EntityId(1), EntityId(2))];
        let n = generate_negatives(&pos, &p1, &p2, 2, 9).unwrap();
        assert_eq!(n.pairs.len(), 4);
        assert!(!n.with_replacement);
        assert!(n.pairs.iter().all(|p| *p != pos[0]));
        assert_eq!(n, generate_negatives(&pos, &p1, &p2, 2, 9).unwrap());
        let tiny = generate_negatives(&pos, &ids(&[1]), &p2, 1, 0).unwrap();
        assert!(tiny.with_replacement);
        assert!(generate_negatives(&pos, &[], &p2, 1, 0).is_err());
    }

    #[test]
    fn fold_score_examples() {
        let h1 = array![[0.6, 0.8], [1.0, 0.0]];
        let h2 = array![[0.0, 1.0], [0.6, 0.8]];
        let s = fold_scores(&h1, &h2, &ids(&[0]), &ids(&[0, 1])).unwrap();
        assert!((s.values()[0] - 1.0).abs() < 1e-12);
        let s = fold_scores(&h1, &h2, &ids(&[1]), &ids(&[1])).unwrap();
        assert!((s.values()[0] - 0.6).abs() < 1e-12);
        assert!(fold_scores(&h1, &h2, &ids(&[0]), &[]).is_err());
    }

    #[test]
    fn threshold_examples() {
        let split = vec![(0.9, true), (0.8, true), (0.3, false), (0.1, false)];
        let t = search_threshold(&[split]).unwrap();
        assert_eq!(t.quality, 1.0);
        assert!(t.gamma > 0.3 && t.gamma < 0.8);
        let all = vec![(0.9, true), (0.2, true)];
        let t = search_threshold(&[all]).unwrap();
        assert_eq!(t.gamma, f64::NEG_INFINITY);
        assert!(search_threshold(&[]).is_err());
        assert!(search_threshold(&[vec![]]).is_err());
    }

    #[test]
    fn ensemble_decision_examples() {
        let a = AcquisitionVector::new([(EntityId(0), 0.9), (EntityId(1), 0.2)]).unwrap();
        let (_, single) = ensemble_decision(std::slice::from_ref(&a), 0.5).unwrap();
        assert_eq!(single.values(), &[1.0, 0.0]);
        let (mean, d) = ensemble_decision(&[a.clone(), a.clone(), a], 0.5).unwrap();
        assert!((mean.values()[0] - 0.9).abs() < 1e-15);
        assert_eq!(d.values()[0], 1.0);
    }

    #[test]
    fn partition_arithmetic() {
        let mut labels = LabelState::fresh(20);
        for i in 0..6 {
            labels.positives.insert(EntityId(i), EntityId(i));
            labels.pool.remove(&EntityId(i));
        }
        for i in 6..10 {
            labels.bachelors.insert(EntityId(i));
            labels.pool.remove(&EntityId(i));
        }
        let folds = stratified_folds(&labels, 5, 3);
        assert!(folds.iter().all(|f| f.len() == 2));
        let mut all: Vec<EntityId> = folds.concat();
        all.sort();
        assert_eq!(all, ids(&[0, 1, 2, 3, 4, 5, 6, 7, 8, 9]));
        for f in &folds {
            let p = f.iter().filter(|e| e.0 < 6).count();
            assert!(p == 1 || p == 2);
        }
    }

    fn small_pair() -> (KnowledgeGraph, KnowledgeGraph) {
        let mut t1 = Vec::new();
        let mut t2 = Vec::new();
        for i in 0..10 {
            for d in [1, 3] {
                t1.push((format!("a{i}"), format!("a{}", (i + d) % 10)));
                t2.push((format!("b{i}"), format!("b{}", (i + d) % 10)));
            }
        }
        (
            KnowledgeGraph::from_uri_triples(t1.iter().map(|(h, t)| (h.as_str(), "r", t.as_str()))),
            KnowledgeGraph::from_uri_triples(t2.iter().map(|(h, t)| (h.as_str(), "r", t.as_str()))),
        )
    }

    fn small_cfg() -> RecognizerConfig {
        RecognizerConfig {
            input_dim: 16,
            output_dim: 8,
            epochs: 30,
            ..Default::default()
        }
    }

    #[test]
    fn train_fold_loss_trends_down_and_is_deterministic() {
        let (k1, k2) = small_pair();
        let pos: Vec<_> = (0..5).map(|i| (k1.entity(&format!("a{i}")).unwrap(), k2.entity(&format!("b{i}")).unwrap())).collect();
        let cfg = small_cfg();
        let f = train_fold(&k1, &k2, &pos, &cfg, 11).unwrap();
        let h = &f.loss_history;
        let q = h.len() / 4;
        let head = h[..q].iter().sum::<f64>() / q as f64;
        let tail = h[h.len() - q..].iter().sum::<f64>() / q as f64;
        assert!(tail < head, "loss did not decrease: {head} → {tail}");
        assert_eq!(f, train_fold(&k1, &k2, &pos, &cfg, 11).unwrap());
        assert!(train_fold(&k1, &k2, &[], &cfg, 11).is_err());
    }

    #[test]
    fn zero_epochs_keeps_initial_encoders() {
        let (k1, k2) = small_pair();
        let cfg = RecognizerConfig { epochs: 0, ..small_cfg() };
        let f = train_fold(&k1, &k2, &[(EntityId(0), EntityId(0))], &cfg, 2).unwrap();
        let nb1 = Neighbourhood::of(&k1);
        let nb2 = Neighbourhood::of(&k2);
        let fresh = FoldModel::fresh(&nb1, &nb2, &cfg, 2);
        assert_eq!(f.encoder1, fresh.encoder1);
        assert_eq!(f.encoder2, fresh.encoder2);
    }

    #[test]
    fn few_labels_fall_back_to_single_split() {
        let (k1, k2) = small_pair();
        let mut labels = LabelState::fresh(10);
        for i in 0..3u32 {
            labels.positives.insert(EntityId(i), EntityId(i));
            labels.pool.remove(&EntityId(i));
        }
        let m = train_recognizer(&k1, &k2, &labels, &small_cfg()).unwrap();
        assert!(m.single_split_fallback);
        assert_eq!(m.folds.len(), 1);
        let none = LabelState::fresh(10);
        assert!(train_recognizer(&k1, &k2, &none, &small_cfg()).is_err());
    }
}
