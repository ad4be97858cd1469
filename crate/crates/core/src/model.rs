//! Translation-style embedding model for entity alignment.
//!
//! Both graphs are embedded into one space. Relation triples are fitted with
//! a margin ranking loss on `‖h + r − t‖` (relations sharing a URI across the
//! two graphs share one vector), and labelled pairs are pulled together while
//! corrupted pairs are pushed at least a margin further apart. Matching score
//! is the negative Euclidean distance between entity vectors.

use std::collections::{BTreeSet, HashMap};

use ndarray::{Array2, ArrayView1, ArrayViewMut1, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{EntityId, KnowledgeGraph};
use crate::error::{config, domain, Error, Result};
use crate::seeds::derive_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub margin: f64,
    /// Corruptions drawn per triple and per labelled pair.
    pub negatives: usize,
    pub triple_weight: f64,
    pub align_weight: f64,
    /// Dropout applied to embedding coordinates in stochastic scoring only.
    pub dropout: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            epochs: 40,
            learning_rate: 0.05,
            margin: 1.0,
            negatives: 2,
            triple_weight: 1.0,
            align_weight: 1.0,
            dropout: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(config("embedding dimension must be positive"));
        }
        if !(self.learning_rate > 0.0) || !(self.margin > 0.0) {
            return Err(config("learning rate and margin must be positive"));
        }
        if self.negatives == 0 {
            return Err(config("negative sample count must be positive"));
        }
        if !(self.triple_weight >= 0.0) || !(self.align_weight >= 0.0) {
            return Err(config("loss weights must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// Entity and relation embeddings for a pair of graphs.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub(crate) ent1: Array2<f64>,
    pub(crate) ent2: Array2<f64>,
    pub(crate) rel: Array2<f64>,
    /// KG1 relation id → row of `rel`.
    pub(crate) rel1: Vec<usize>,
    /// KG2 relation id → row of `rel`.
    pub(crate) rel2: Vec<usize>,
    pub(crate) dropout: f64,
}

/// Which graph an entity row lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Side {
    One,
    Two,
}

/// One margin-ranking term over relation triples of a single graph.
#[derive(Clone, Copy, Debug)]
pub(crate) struct TripleSample {
    pub side: Side,
    pub rel: usize,
    pub pos: (usize, usize),
    pub neg: (usize, usize),
}

/// One alignment term: pull `pos` together, rank it above `neg` by a margin.
#[derive(Clone, Copy, Debug)]
pub(crate) struct AlignSample {
    pub pos: (usize, usize),
    pub neg: (usize, usize),
}

#[derive(Clone, Debug)]
pub(crate) struct Gradient {
    pub ent1: Array2<f64>,
    pub ent2: Array2<f64>,
    pub rel: Array2<f64>,
}

fn shared_relations(kg1: &KnowledgeGraph, kg2: &KnowledgeGraph) -> (Vec<usize>, Vec<usize>, usize) {
    let mut rows: HashMap<&str, usize> = HashMap::new();
    let mut maps = [Vec::new(), Vec::new()];
    for (map, kg) in maps.iter_mut().zip([kg1, kg2]) {
        for uri in kg.relation_uris() {
            let next = rows.len();
            map.push(*rows.entry(uri.as_str()).or_insert(next));
        }
    }
    let [rel1, rel2] = maps;
    (rel1, rel2, rows.len())
}

fn normalize_rows(m: &mut Array2<f64>) {
    for mut row in m.rows_mut() {
        let n = row.dot(&row).sqrt();
        if n > 0.0 {
            row.mapv_inplace(|x| x / n);
        }
    }
}

fn uniform_init(rows: usize, dim: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let bound = 6.0 / (dim as f64).sqrt();
    Array2::from_shape_simple_fn((rows, dim), || rng.gen_range(-bound..bound))
}

#[inline]
fn euclid(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Accumulates `scale · ∂‖h + r − t‖` into the three gradient rows.
fn translation_grad(
    h: ArrayView1<f64>,
    r: ArrayView1<f64>,
    t: ArrayView1<f64>,
    scale: f64,
    mut gh: ArrayViewMut1<f64>,
    mut gr: ArrayViewMut1<f64>,
    mut gt: ArrayViewMut1<f64>,
) {
    let diff = &h + &r - &t;
    let norm = diff.dot(&diff).sqrt();
    if norm == 0.0 {
        return;
    }
    for k in 0..diff.len() {
        let g = scale * diff[k] / norm;
        gh[k] += g;
        gr[k] += g;
        gt[k] -= g;
    }
}

impl Model {
    /// Seeded random initialization with unit-norm entity rows.
    pub fn init(kg1: &KnowledgeGraph, kg2: &KnowledgeGraph, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let (rel1, rel2, nrel) = shared_relations(kg1, kg2);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "ea-init", 0));
        let mut ent1 = uniform_init(kg1.num_entities(), cfg.dim, &mut rng);
        let mut ent2 = uniform_init(kg2.num_entities(), cfg.dim, &mut rng);
        let rel = uniform_init(nrel, cfg.dim, &mut rng);
        normalize_rows(&mut ent1);
        normalize_rows(&mut ent2);
        Ok(Self {
            ent1,
            ent2,
            rel,
            rel1,
            rel2,
            dropout: cfg.dropout,
        })
    }

    /// Trains from a fresh seeded initialization.
    pub fn train(
        kg1: &KnowledgeGraph,
        kg2: &KnowledgeGraph,
        positives: &[(EntityId, EntityId)],
        cfg: &TrainConfig,
    ) -> Result<Self> {
        let mut m = Self::init(kg1, kg2, cfg)?;
        m.fit(kg1, kg2, positives, cfg, 0)?;
        Ok(m)
    }

    /// Continues training from the current parameters. `round` separates
    /// the sampling streams of successive refreshes.
    pub fn fit(
        &mut self,
        kg1: &KnowledgeGraph,
        kg2: &KnowledgeGraph,
        positives: &[(EntityId, EntityId)],
        cfg: &TrainConfig,
        round: u64,
    ) -> Result<()> {
        cfg.validate()?;
        self.check_shapes(kg1, kg2, cfg.dim)?;
        self.dropout = cfg.dropout;
        for &(a, b) in positives {
            if !kg1.contains(a) || !kg2.contains(b) {
                return Err(domain(format!("labelled pair ({a}, {b}) outside the graphs")));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "ea-train", round));
        for epoch in 0..cfg.epochs {
            let (triples, aligns) = self.draw_samples(kg1, kg2, positives, cfg, &mut rng);
            let mut order: Vec<usize> = (0..triples.len() + aligns.len()).collect();
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for i in order {
                epoch_loss += if i < triples.len() {
                    self.sgd_triple(&triples[i], cfg)
                } else {
                    self.sgd_align(&aligns[i - triples.len()], cfg)
                };
            }
            if !epoch_loss.is_finite() {
                return Err(Error::Training {
                    epoch,
                    message: format!("loss is {epoch_loss}"),
                });
            }
            normalize_rows(&mut self.ent1);
            normalize_rows(&mut self.ent2);
        }
        Ok(())
    }

    fn check_shapes(&self, kg1: &KnowledgeGraph, kg2: &KnowledgeGraph, dim: usize) -> Result<()> {
        if self.ent1.nrows() != kg1.num_entities()
            || self.ent2.nrows() != kg2.num_entities()
            || self.rel1.len() != kg1.num_relations()
            || self.rel2.len() != kg2.num_relations()
            || self.dim() != dim
        {
            return Err(config("model shape does not match graphs or configuration"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.ent1.ncols()
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    pub fn embedding1(&self, e: EntityId) -> ArrayView1<'_, f64> {
        self.ent1.row(e.idx())
    }

    pub fn embedding2(&self, e: EntityId) -> ArrayView1<'_, f64> {
        self.ent2.row(e.idx())
    }

    pub(crate) fn draw_samples(
        &self,
        kg1: &KnowledgeGraph,
        kg2: &KnowledgeGraph,
        positives: &[(EntityId, EntityId)],
        cfg: &TrainConfig,
        rng: &mut ChaCha8Rng,
    ) -> (Vec<TripleSample>, Vec<AlignSample>) {
        let mut triples = Vec::new();
        if cfg.triple_weight > 0.0 {
            for (side, kg, rmap) in [(Side::One, kg1, &self.rel1), (Side::Two, kg2, &self.rel2)] {
                let n = kg.num_entities();
                for t in kg.triples() {
                    for _ in 0..cfg.negatives {
                        let (h, tl) = (t.head.idx(), t.tail.idx());
                        let neg = if rng.gen_bool(0.5) {
                            (rng.gen_range(0..n), tl)
                        } else {
                            (h, rng.gen_range(0..n))
                        };
                        triples.push(TripleSample {
                            side,
                            rel: rmap[t.relation.idx()],
                            pos: (h, tl),
                            neg,
                        });
                    }
                }
            }
        }
        let mut aligns = Vec::new();
        if cfg.align_weight > 0.0 && !positives.is_empty() {
            let (n1, n2) = (kg1.num_entities(), kg2.num_entities());
            for &(a, b) in positives {
                for _ in 0..cfg.negatives {
                    let neg = if rng.gen_bool(0.5) {
                        (rng.gen_range(0..n1), b.idx())
                    } else {
                        (a.idx(), rng.gen_range(0..n2))
                    };
                    aligns.push(AlignSample {
                        pos: (a.idx(), b.idx()),
                        neg,
                    });
                }
            }
        }
        (triples, aligns)
    }

    fn table(&self, side: Side) -> &Array2<f64> {
        match side {
            Side::One => &self.ent1,
            Side::Two => &self.ent2,
        }
    }

    fn triple_terms(&self, s: &TripleSample, cfg: &TrainConfig) -> (f64, f64, f64) {
        let e = self.table(s.side);
        let r = self.rel.row(s.rel);
        let dp = euclid((&e.row(s.pos.0) + &r).view(), e.row(s.pos.1));
        let dn = euclid((&e.row(s.neg.0) + &r).view(), e.row(s.neg.1));
        let hinge = cfg.margin + dp - dn;
        (hinge.max(0.0) * cfg.triple_weight, dp, dn)
    }

    fn align_terms(&self, s: &AlignSample, cfg: &TrainConfig) -> (f64, f64, f64) {
        let dp = euclid(self.ent1.row(s.pos.0), self.ent2.row(s.pos.1));
        let dn = euclid(self.ent1.row(s.neg.0), self.ent2.row(s.neg.1));
        let loss = dp * dp + (cfg.margin + dp - dn).max(0.0);
        (loss * cfg.align_weight, dp, dn)
    }

    /// Adds the gradient of one triple term (times `scale`) into `g`.
    fn triple_grad(&self, s: &TripleSample, cfg: &TrainConfig, scale: f64, g: &mut Gradient) -> f64 {
        let (loss, _, _) = self.triple_terms(s, cfg);
        if loss <= 0.0 {
            return 0.0;
        }
        let w = scale * cfg.triple_weight;
        let e = self.table(s.side);
        let r = self.rel.row(s.rel);
        let ge = match s.side {
            Side::One => &mut g.ent1,
            Side::Two => &mut g.ent2,
        };
        for (pair, sign) in [(s.pos, w), (s.neg, -w)] {
            let mut gh = ndarray::Array1::zeros(e.ncols());
            let mut gt = ndarray::Array1::zeros(e.ncols());
            let mut gr = g.rel.row_mut(s.rel);
            translation_grad(e.row(pair.0), r, e.row(pair.1), sign, gh.view_mut(), gr.view_mut(), gt.view_mut());
            ge.row_mut(pair.0).scaled_add(1.0, &gh);
            ge.row_mut(pair.1).scaled_add(1.0, &gt);
        }
        loss
    }

    fn align_grad(&self, s: &AlignSample, cfg: &TrainConfig, scale: f64, g: &mut Gradient) -> f64 {
        let (loss, dp, dn) = self.align_terms(s, cfg);
        let w = scale * cfg.align_weight;
        let active = cfg.margin + dp - dn > 0.0;
        // d/dx of dp² is 2(a − b); hinge adds (a − b)/dp − (a' − b')/dn.
        let a = self.ent1.row(s.pos.0);
        let b = self.ent2.row(s.pos.1);
        let diff = &a - &b;
        let mut coef = 2.0;
        if active && dp > 0.0 {
            coef += 1.0 / dp;
        }
        g.ent1.row_mut(s.pos.0).scaled_add(w * coef, &diff);
        g.ent2.row_mut(s.pos.1).scaled_add(-w * coef, &diff);
        if active && dn > 0.0 {
            let ndiff = &self.ent1.row(s.neg.0) - &self.ent2.row(s.neg.1);
            g.ent1.row_mut(s.neg.0).scaled_add(-w / dn, &ndiff);
            g.ent2.row_mut(s.neg.1).scaled_add(w / dn, &ndiff);
        }
        loss
    }

    fn zero_grad(&self) -> Gradient {
        Gradient {
            ent1: Array2::zeros(self.ent1.raw_dim()),
            ent2: Array2::zeros(self.ent2.raw_dim()),
            rel: Array2::zeros(self.rel.raw_dim()),
        }
    }

    /// Full loss and gradient over a fixed sample set (no normalization).
    pub(crate) fn loss_and_grad(&self, triples: &[TripleSample], aligns: &[AlignSample], cfg: &TrainConfig) -> (f64, Gradient) {
        let mut g = self.zero_grad();
        let mut loss = 0.0;
        for s in triples {
            loss += self.triple_terms(s, cfg).0;
            self.triple_grad(s, cfg, 1.0, &mut g);
        }
        for s in aligns {
            loss += self.align_terms(s, cfg).0;
            self.align_grad(s, cfg, 1.0, &mut g);
        }
        (loss, g)
    }

    pub(crate) fn loss(&self, triples: &[TripleSample], aligns: &[AlignSample], cfg: &TrainConfig) -> f64 {
        triples.iter().map(|s| self.triple_terms(s, cfg).0).sum::<f64>()
            + aligns.iter().map(|s| self.align_terms(s, cfg).0).sum::<f64>()
    }

    // Per-sample SGD touches only a handful of rows; apply those directly.
    fn sgd_triple(&mut self, s: &TripleSample, cfg: &TrainConfig) -> f64 {
        let (loss, _, _) = self.triple_terms(s, cfg);
        if loss <= 0.0 {
            return 0.0;
        }
        let step = cfg.learning_rate * cfg.triple_weight;
        let dim = self.dim();
        let mut updates: Vec<(usize, ndarray::Array1<f64>)> = Vec::with_capacity(4);
        let mut grel = ndarray::Array1::<f64>::zeros(dim);
        {
            let e = self.table(s.side);
            let r = self.rel.row(s.rel);
            for (pair, sign) in [(s.pos, 1.0), (s.neg, -1.0)] {
                let mut gh = ndarray::Array1::zeros(dim);
                let mut gt = ndarray::Array1::zeros(dim);
                translation_grad(e.row(pair.0), r, e.row(pair.1), sign, gh.view_mut(), grel.view_mut(), gt.view_mut());
                updates.push((pair.0, gh));
                updates.push((pair.1, gt));
            }
        }
        let e = match s.side {
            Side::One => &mut self.ent1,
            Side::Two => &mut self.ent2,
        };
        for (row, grad) in updates {
            e.row_mut(row).scaled_add(-step, &grad);
        }
        self.rel.row_mut(s.rel).scaled_add(-step, &grel);
        loss
    }

    fn sgd_align(&mut self, s: &AlignSample, cfg: &TrainConfig) -> f64 {
        let (loss, dp, dn) = self.align_terms(s, cfg);
        let step = cfg.learning_rate * cfg.align_weight;
        let active = cfg.margin + dp - dn > 0.0;
        let diff = &self.ent1.row(s.pos.0) - &self.ent2.row(s.pos.1);
        let ndiff = &self.ent1.row(s.neg.0) - &self.ent2.row(s.neg.1);
        let mut coef = 2.0;
        if active && dp > 0.0 {
            coef += 1.0 / dp;
        }
        self.ent1.row_mut(s.pos.0).scaled_add(-step * coef, &diff);
        self.ent2.row_mut(s.pos.1).scaled_add(step * coef, &diff);
        if active && dn > 0.0 {
            self.ent1.row_mut(s.neg.0).scaled_add(step / dn, &ndiff);
            self.ent2.row_mut(s.neg.1).scaled_add(-step / dn, &ndiff);
        }
        loss
    }

    fn check_candidates(&self, rows: &[EntityId], cols: &[EntityId]) -> Result<()> {
        if cols.is_empty() {
            return Err(domain("empty target candidate set"));
        }
        if rows.is_empty() {
            return Err(domain("empty query candidate set"));
        }
        if let Some(e) = rows.iter().find(|e| e.idx() >= self.ent1.nrows()) {
            return Err(domain(format!("query candidate {e} outside KG1")));
        }
        if let Some(e) = cols.iter().find(|e| e.idx() >= self.ent2.nrows()) {
            return Err(domain(format!("target candidate {e} outside KG2")));
        }
        Ok(())
    }

    /// F(e¹, e²) = −‖e¹ − e²‖ for every query/target combination.
    pub fn score_matrix(&self, rows: &[EntityId], cols: &[EntityId]) -> Result<ScoreMatrix> {
        self.check_candidates(rows, cols)?;
        let mut values = Array2::zeros((rows.len(), cols.len()));
        values
            .axis_iter_mut(Axis(0))
            .into_par_iter()
            .zip(rows.par_iter())
            .for_each(|(mut out, &r)| {
                let a = self.ent1.row(r.idx());
                for (o, &c) in out.iter_mut().zip(cols) {
                    *o = -euclid(a, self.ent2.row(c.idx()));
                }
            });
        Ok(ScoreMatrix::new(rows.to_vec(), cols.to_vec(), values))
    }

    /// `samples` stochastic scorings, each with fresh inverted-dropout masks
    /// on every entity vector's coordinates.
    pub fn mc_score_samples(
        &self,
        rows: &[EntityId],
        cols: &[EntityId],
        samples: usize,
        seed: u64,
    ) -> Result<Vec<ScoreMatrix>> {
        if self.dropout <= 0.0 {
            return Err(Error::StochasticDisabled);
        }
        if samples < 2 {
            return Err(config("at least two stochastic samples are required"));
        }
        self.check_candidates(rows, cols)?;
        let keep = 1.0 - self.dropout;
        let dim = self.dim();
        let masked = |table: &Array2<f64>, ids: &[EntityId], rng: &mut ChaCha8Rng| -> Array2<f64> {
            let mut m = Array2::zeros((ids.len(), dim));
            for (mut out, &e) in m.rows_mut().into_iter().zip(ids) {
                for (o, &x) in out.iter_mut().zip(table.row(e.idx())) {
                    *o = if rng.gen_bool(keep) { x / keep } else { 0.0 };
                }
            }
            m
        };
        (0..samples)
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "mc-dropout", t as u64));
                let a = masked(&self.ent1, rows, &mut rng);
                let b = masked(&self.ent2, cols, &mut rng);
                let mut values = Array2::zeros((rows.len(), cols.len()));
                values
                    .axis_iter_mut(Axis(0))
                    .into_par_iter()
                    .enumerate()
                    .for_each(|(i, mut out)| {
                        for (j, o) in out.iter_mut().enumerate() {
                            *o = -euclid(a.row(i), b.row(j));
                        }
                    });
                Ok(ScoreMatrix::new(rows.to_vec(), cols.to_vec(), values))
            })
            .collect()
    }

    /// Hit@1 over `test`: each query competes against every test-side target.
    pub fn hit_at_1(&self, test: &[(EntityId, EntityId)]) -> Result<f64> {
        if test.is_empty() {
            return Err(domain("empty test set"));
        }
        let rows: Vec<EntityId> = test.iter().map(|p| p.0).collect();
        let cols: Vec<EntityId> = test.iter().map(|p| p.1).collect::<BTreeSet<_>>().into_iter().collect();
        hit_at_1(&self.score_matrix(&rows, &cols)?, test)
    }

    /// All trainable values: KG1 entities, KG2 entities, relations (row-major).
    pub fn parameters(&self) -> Vec<f64> {
        self.ent1.iter().chain(self.ent2.iter()).chain(self.rel.iter()).copied().collect()
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.ent1.len() + self.ent2.len() + self.rel.len() {
            return Err(domain("parameter vector has the wrong length"));
        }
        let mut it = values.iter().copied();
        for x in self.ent1.iter_mut().chain(self.ent2.iter_mut()).chain(self.rel.iter_mut()) {
            *x = it.next().expect("length checked");
        }
        Ok(())
    }

    pub fn to_checkpoint(&self) -> ModelCheckpoint {
        let dump = |m: &Array2<f64>| Matrix {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.iter().copied().collect(),
        };
        ModelCheckpoint {
            format: CHECKPOINT_FORMAT.to_owned(),
            version: CHECKPOINT_VERSION,
            dim: self.dim(),
            dropout: self.dropout,
            entities1: dump(&self.ent1),
            entities2: dump(&self.ent2),
            relations: dump(&self.rel),
            relation_rows1: self.rel1.clone(),
            relation_rows2: self.rel2.clone(),
        }
    }

    pub fn from_checkpoint(ck: &ModelCheckpoint) -> Result<Self> {
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(domain(format!("unsupported checkpoint {} v{}", ck.format, ck.version)));
        }
        let load = |m: &Matrix| -> Result<Array2<f64>> {
            if m.cols != ck.dim && m.rows > 0 {
                return Err(domain("checkpoint dimension mismatch"));
            }
            Array2::from_shape_vec((m.rows, m.cols), m.data.clone()).map_err(|e| domain(e.to_string()))
        };
        let rel = load(&ck.relations)?;
        if ck.relation_rows1.iter().chain(&ck.relation_rows2).any(|&r| r >= rel.nrows()) {
            return Err(domain("checkpoint relation map out of range"));
        }
        Ok(Self {
            ent1: load(&ck.entities1)?,
            ent2: load(&ck.entities2)?,
            rel,
            rel1: ck.relation_rows1.clone(),
            rel2: ck.relation_rows2.clone(),
            dropout: ck.dropout,
        })
    }
}

/// The training loss over one fixed draw of triples and corruptions,
/// without the per-epoch row normalization.
#[derive(Clone, Debug)]
pub struct Objective {
    triples: Vec<TripleSample>,
    aligns: Vec<AlignSample>,
    cfg: TrainConfig,
}

impl Objective {
    pub fn sample(
        model: &Model,
        kg1: &KnowledgeGraph,
        kg2: &KnowledgeGraph,
        positives: &[(EntityId, EntityId)],
        cfg: &TrainConfig,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (triples, aligns) = model.draw_samples(kg1, kg2, positives, cfg, &mut rng);
        Self {
            triples,
            aligns,
            cfg: cfg.clone(),
        }
    }

    pub fn value(&self, model: &Model) -> f64 {
        model.loss(&self.triples, &self.aligns, &self.cfg)
    }

    /// Analytic gradient, flattened in [`Model::parameters`] order.
    pub fn gradient(&self, model: &Model) -> Vec<f64> {
        let (_, g) = model.loss_and_grad(&self.triples, &self.aligns, &self.cfg);
        g.ent1.iter().chain(g.ent2.iter()).chain(g.rel.iter()).copied().collect()
    }
}

pub const CHECKPOINT_FORMAT: &str = "alea-ea-model";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Row-major dense matrix payload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

/// JSON container for a trained [`Model`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub format: String,
    pub version: u32,
    pub dim: usize,
    pub dropout: f64,
    pub entities1: Matrix,
    pub entities2: Matrix,
    pub relations: Matrix,
    pub relation_rows1: Vec<usize>,
    pub relation_rows2: Vec<usize>,
}

/// Matching scores between KG1 query rows and KG2 target columns.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMatrix {
    rows: Vec<EntityId>,
    cols: Vec<EntityId>,
    values: Array2<f64>,
}

impl ScoreMatrix {
    pub fn new(rows: Vec<EntityId>, cols: Vec<EntityId>, values: Array2<f64>) -> Self {
        assert_eq!(values.dim(), (rows.len(), cols.len()), "score matrix shape mismatch");
        Self { rows, cols, values }
    }

    pub fn rows(&self) -> &[EntityId] {
        &self.rows
    }

    pub fn cols(&self) -> &[EntityId] {
        &self.cols
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    pub fn row_of(&self, e: EntityId) -> Option<usize> {
        self.rows.iter().position(|&r| r == e)
    }

    /// Column indices of `row` sorted by descending score, ties by column id.
    pub fn ranked_columns(&self, row: usize) -> Vec<usize> {
        let r = self.values.row(row);
        let mut idx: Vec<usize> = (0..self.cols.len()).collect();
        idx.sort_by(|&a, &b| r[b].total_cmp(&r[a]).then(self.cols[a].cmp(&self.cols[b])));
        idx
    }
}

/// Fraction of `pairs` whose gold target is the row winner. Ties go to the
/// lowest column entity id.
pub fn hit_at_1(scores: &ScoreMatrix, pairs: &[(EntityId, EntityId)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(domain("empty test set"));
    }
    let row_index: HashMap<EntityId, usize> = scores.rows.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let mut hits = 0usize;
    for &(a, b) in pairs {
        let i = *row_index
            .get(&a)
            .ok_or_else(|| domain(format!("test entity {a} missing from score rows")))?;
        let row = scores.values.row(i);
        let mut best: Option<(f64, EntityId)> = None;
        for (&v, &c) in row.iter().zip(&scores.cols) {
            best = match best {
                Some((bv, bc)) if v < bv || (v == bv && c > bc) => Some((bv, bc)),
                _ => Some((v, c)),
            };
        }
        if best.map(|(_, c)| c) == Some(b) {
            hits += 1;
        }
    }
    Ok(hits as f64 / pairs.len() as f64)
}
