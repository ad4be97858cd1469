//! Knowledge graphs, alignment bookkeeping and OpenEA-format IO.
//!
//! URIs are interned to dense per-graph indices at load time. Everything
//! downstream works on [`EntityId`] / [`RelationId`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};

pub const TRIPLES_1: &str = "rel_triples_1";
pub const TRIPLES_2: &str = "rel_triples_2";
pub const LINKS: &str = "ent_links";
pub const BACHELORS_1: &str = "bachelors_1";
pub const ENTITIES_1: &str = "entities_1";
pub const ENTITIES_2: &str = "entities_2";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub u32);

impl EntityId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationId(pub u32);

impl RelationId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

/// A directed multi-relational graph with interned identifiers.
///
/// `out_adj`/`in_adj` mirror the triple list exactly (multiplicity kept).
/// `simple_out`/`simple_in` are the deduplicated, loop-free entity graph
/// used by centrality measures and the influence matrix.
#[derive(Clone, Debug)]
pub struct KnowledgeGraph {
    entities: Vec<String>,
    entity_index: HashMap<String, EntityId>,
    relations: Vec<String>,
    relation_index: HashMap<String, RelationId>,
    triples: Vec<Triple>,
    out_adj: Vec<Vec<(RelationId, EntityId)>>,
    in_adj: Vec<Vec<(RelationId, EntityId)>>,
    simple_out: Vec<Vec<EntityId>>,
    simple_in: Vec<Vec<EntityId>>,
}

impl PartialEq for KnowledgeGraph {
    fn eq(&self, other: &Self) -> bool {
        self.entities == other.entities
            && self.relations == other.relations
            && self.triples == other.triples
    }
}

impl KnowledgeGraph {
    /// Builds a graph from interned parts. Entity and relation ids must be
    /// valid indices into `entities` / `relations`.
    pub fn from_parts(
        entities: Vec<String>,
        relations: Vec<String>,
        triples: Vec<Triple>,
    ) -> Result<Self> {
        let entity_index = intern_map(&entities, EntityId)
            .map_err(|u| Error::Integrity(format!("duplicate entity uri {u:?}")))?;
        let relation_index = intern_map(&relations, RelationId)
            .map_err(|u| Error::Integrity(format!("duplicate relation uri {u:?}")))?;
        let n = entities.len();
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        for t in &triples {
            if t.head.idx() >= n || t.tail.idx() >= n || t.relation.idx() >= relations.len() {
                return Err(Error::Integrity(format!("triple {t:?} out of range")));
            }
            out_adj[t.head.idx()].push((t.relation, t.tail));
            in_adj[t.tail.idx()].push((t.relation, t.head));
        }
        let simplify = |adj: &Vec<Vec<(RelationId, EntityId)>>| -> Vec<Vec<EntityId>> {
            adj.iter()
                .enumerate()
                .map(|(i, nbrs)| {
                    let set: BTreeSet<EntityId> = nbrs
                        .iter()
                        .map(|&(_, e)| e)
                        .filter(|e| e.idx() != i)
                        .collect();
                    set.into_iter().collect()
                })
                .collect()
        };
        let simple_out = simplify(&out_adj);
        let simple_in = simplify(&in_adj);
        Ok(Self {
            entities,
            entity_index,
            relations,
            relation_index,
            triples,
            out_adj,
            in_adj,
            simple_out,
            simple_in,
        })
    }

    /// Interns string triples in first-appearance order.
    pub fn from_uri_triples<'a, I>(triples: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a str, &'a str)>,
    {
        let mut b = GraphBuilder::default();
        for (h, r, t) in triples {
            b.push(h, r, t);
        }
        b.build()
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn entity_ids(&self) -> impl Iterator<Item = EntityId> + '_ {
        (0..self.entities.len() as u32).map(EntityId)
    }

    pub fn uri(&self, e: EntityId) -> &str {
        &self.entities[e.idx()]
    }

    pub fn entity_uris(&self) -> &[String] {
        &self.entities
    }

    pub fn relation_uri(&self, r: RelationId) -> &str {
        &self.relations[r.idx()]
    }

    pub fn relation_uris(&self) -> &[String] {
        &self.relations
    }

    pub fn entity(&self, uri: &str) -> Option<EntityId> {
        self.entity_index.get(uri).copied()
    }

    pub fn relation(&self, uri: &str) -> Option<RelationId> {
        self.relation_index.get(uri).copied()
    }

    pub fn contains(&self, e: EntityId) -> bool {
        e.idx() < self.entities.len()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn out_edges(&self, e: EntityId) -> &[(RelationId, EntityId)] {
        &self.out_adj[e.idx()]
    }

    pub fn in_edges(&self, e: EntityId) -> &[(RelationId, EntityId)] {
        &self.in_adj[e.idx()]
    }

    pub fn simple_out(&self, e: EntityId) -> &[EntityId] {
        &self.simple_out[e.idx()]
    }

    pub fn simple_in(&self, e: EntityId) -> &[EntityId] {
        &self.simple_in[e.idx()]
    }

    /// Undirected simple neighbourhood (head/tail symmetrized, no self).
    pub fn undirected_neighbours(&self, e: EntityId) -> Vec<EntityId> {
        let mut v: Vec<EntityId> = self.simple_out[e.idx()]
            .iter()
            .chain(self.simple_in[e.idx()].iter())
            .copied()
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Removes `drop` together with every incident triple and re-indexes the
    /// survivors densely, preserving relative order. Returns the new graph and
    /// an old-id → new-id map.
    pub fn without_entities(&self, drop: &BTreeSet<EntityId>) -> (Self, Vec<Option<EntityId>>) {
        let mut remap = vec![None; self.entities.len()];
        let mut entities = Vec::with_capacity(self.entities.len() - drop.len().min(self.entities.len()));
        for (i, uri) in self.entities.iter().enumerate() {
            if !drop.contains(&EntityId(i as u32)) {
                remap[i] = Some(EntityId(entities.len() as u32));
                entities.push(uri.clone());
            }
        }
        let triples = self
            .triples
            .iter()
            .filter_map(|t| {
                Some(Triple {
                    head: remap[t.head.idx()]?,
                    relation: t.relation,
                    tail: remap[t.tail.idx()]?,
                })
            })
            .collect();
        let kg = Self::from_parts(entities, self.relations.clone(), triples)
            .expect("subgraph of a valid graph is valid");
        (kg, remap)
    }
}

fn intern_map<T: Copy>(uris: &[String], mk: fn(u32) -> T) -> std::result::Result<HashMap<String, T>, String> {
    let mut m = HashMap::with_capacity(uris.len());
    for (i, u) in uris.iter().enumerate() {
        if m.insert(u.clone(), mk(i as u32)).is_some() {
            return Err(u.clone());
        }
    }
    Ok(m)
}

#[derive(Default)]
struct GraphBuilder {
    entities: Vec<String>,
    entity_index: HashMap<String, EntityId>,
    relations: Vec<String>,
    relation_index: HashMap<String, RelationId>,
    triples: Vec<Triple>,
    closed: bool,
}

impl GraphBuilder {
    fn with_registry(uris: Vec<String>) -> Result<Self> {
        let entity_index = intern_map(&uris, EntityId)
            .map_err(|u| Error::Integrity(format!("duplicate entity uri {u:?}")))?;
        Ok(Self {
            entities: uris,
            entity_index,
            closed: true,
            ..Default::default()
        })
    }

    fn entity(&mut self, uri: &str) -> Option<EntityId> {
        if let Some(&e) = self.entity_index.get(uri) {
            return Some(e);
        }
        if self.closed {
            return None;
        }
        let e = EntityId(self.entities.len() as u32);
        self.entities.push(uri.to_owned());
        self.entity_index.insert(uri.to_owned(), e);
        Some(e)
    }

    fn relation(&mut self, uri: &str) -> RelationId {
        if let Some(&r) = self.relation_index.get(uri) {
            return r;
        }
        let r = RelationId(self.relations.len() as u32);
        self.relations.push(uri.to_owned());
        self.relation_index.insert(uri.to_owned(), r);
        r
    }

    fn push(&mut self, h: &str, r: &str, t: &str) -> bool {
        let (Some(head), Some(tail)) = (self.entity(h), self.entity(t)) else {
            return false;
        };
        let relation = self.relation(r);
        self.triples.push(Triple { head, relation, tail });
        true
    }

    fn build(self) -> KnowledgeGraph {
        KnowledgeGraph::from_parts(self.entities, self.relations, self.triples)
            .expect("builder output is consistent")
    }
}

/// Labelled state visible to acquisition strategies: no gold information.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelState {
    /// L⁺: queried KG1 entity → annotated KG2 counterpart.
    pub positives: BTreeMap<EntityId, EntityId>,
    /// L⁻: queried KG1 entities annotated as having no counterpart.
    pub bachelors: BTreeSet<EntityId>,
    /// U: unlabelled KG1 entities.
    pub pool: BTreeSet<EntityId>,
}

impl LabelState {
    pub fn fresh(num_entities1: usize) -> Self {
        Self {
            pool: (0..num_entities1 as u32).map(EntityId).collect(),
            ..Default::default()
        }
    }

    pub fn num_labelled(&self) -> usize {
        self.positives.len() + self.bachelors.len()
    }

    /// KG2 entities already consumed by a positive label.
    pub fn consumed_targets(&self) -> BTreeSet<EntityId> {
        self.positives.values().copied().collect()
    }

    pub fn positive_pairs(&self) -> Vec<(EntityId, EntityId)> {
        self.positives.iter().map(|(&a, &b)| (a, b)).collect()
    }

    /// Checks that positives, bachelors and pool partition `0..n1` and that
    /// positives are one-to-one.
    pub fn validate(&self, n1: usize) -> Result<()> {
        let mut seen = vec![false; n1];
        let mut mark = |e: EntityId, what: &str| -> Result<()> {
            let slot = seen
                .get_mut(e.idx())
                .ok_or_else(|| Error::Integrity(format!("{what} entity {e} outside KG1")))?;
            if *slot {
                return Err(Error::Integrity(format!("{what} entity {e} appears in two partitions")));
            }
            *slot = true;
            Ok(())
        };
        for &e in self.positives.keys() {
            mark(e, "positive")?;
        }
        for &e in &self.bachelors {
            mark(e, "bachelor")?;
        }
        for &e in &self.pool {
            mark(e, "pool")?;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Integrity(format!("entity #{i} is neither labelled nor pooled")));
        }
        let targets = self.consumed_targets();
        if targets.len() != self.positives.len() {
            return Err(Error::Integrity("positive labels are not one-to-one".into()));
        }
        Ok(())
    }
}

/// Gold alignment plus labelled state for one dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignmentStore {
    gold: BTreeMap<EntityId, EntityId>,
    gold_rev: BTreeMap<EntityId, EntityId>,
    bachelors1: BTreeSet<EntityId>,
    pub labels: LabelState,
}

impl AlignmentStore {
    /// Every KG1 entity without a gold counterpart becomes a bachelor.
    pub fn new(num_entities1: usize, pairs: impl IntoIterator<Item = (EntityId, EntityId)>) -> Result<Self> {
        let mut gold = BTreeMap::new();
        let mut gold_rev = BTreeMap::new();
        for (a, b) in pairs {
            if a.idx() >= num_entities1 {
                return Err(Error::Integrity(format!("gold pair references KG1 entity {a} outside graph")));
            }
            if gold.insert(a, b).is_some() {
                return Err(Error::Integrity(format!("KG1 entity {a} linked twice")));
            }
            if gold_rev.insert(b, a).is_some() {
                return Err(Error::Integrity(format!("KG2 entity {b} linked twice")));
            }
        }
        let bachelors1 = (0..num_entities1 as u32)
            .map(EntityId)
            .filter(|e| !gold.contains_key(e))
            .collect();
        Ok(Self {
            gold,
            gold_rev,
            bachelors1,
            labels: LabelState::fresh(num_entities1),
        })
    }

    pub fn gold(&self) -> &BTreeMap<EntityId, EntityId> {
        &self.gold
    }

    pub fn counterpart(&self, e1: EntityId) -> Option<EntityId> {
        self.gold.get(&e1).copied()
    }

    pub fn gold_source(&self, e2: EntityId) -> Option<EntityId> {
        self.gold_rev.get(&e2).copied()
    }

    pub fn bachelors1(&self) -> &BTreeSet<EntityId> {
        &self.bachelors1
    }

    pub fn num_entities1(&self) -> usize {
        self.gold.len() + self.bachelors1.len()
    }

    /// Gold pairs not yet used as positive labels: A^test = A ∖ L⁺.
    pub fn test_pairs(&self) -> Vec<(EntityId, EntityId)> {
        self.gold
            .iter()
            .filter(|(a, _)| !self.labels.positives.contains_key(a))
            .map(|(&a, &b)| (a, b))
            .collect()
    }

    pub fn validate(&self, num_entities2: usize) -> Result<()> {
        let n1 = self.num_entities1();
        for (&a, &b) in &self.gold {
            if b.idx() >= num_entities2 {
                return Err(Error::Integrity(format!("gold pair ({a}, {b}) references KG2 entity outside graph")));
            }
            if self.bachelors1.contains(&a) {
                return Err(Error::Integrity(format!("{a} is both matchable and bachelor")));
            }
        }
        if self.gold_rev.len() != self.gold.len() {
            return Err(Error::Integrity("gold alignment is not one-to-one".into()));
        }
        self.labels.validate(n1)?;
        for (a, b) in &self.labels.positives {
            if self.gold.get(a) != Some(b) {
                return Err(Error::Integrity(format!("positive label ({a}, {b}) not in gold")));
            }
        }
        if let Some(e) = self.labels.bachelors.iter().find(|e| !self.bachelors1.contains(e)) {
            return Err(Error::Integrity(format!("bachelor label {e} is matchable in gold")));
        }
        Ok(())
    }
}

/// Two graphs and their alignment.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub kg1: KnowledgeGraph,
    pub kg2: KnowledgeGraph,
    pub store: AlignmentStore,
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        if self.store.num_entities1() != self.kg1.num_entities() {
            return Err(Error::Integrity("alignment store does not cover KG1".into()));
        }
        self.store.validate(self.kg2.num_entities())
    }
}

fn read_file(dir: &Path, name: &str) -> Result<String> {
    let path = dir.join(name);
    fs::read_to_string(&path).map_err(|source| Error::Load { path, source })
}

fn records<'a>(file: &'a str, text: &'a str, width: usize) -> impl Iterator<Item = Result<(usize, Vec<&'a str>)>> + 'a {
    text.lines().enumerate().filter_map(move |(i, raw)| {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() {
            return None;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != width || fields.iter().any(|f| f.is_empty()) {
            return Some(Err(Error::Parse {
                file: file.to_owned(),
                line: i + 1,
                message: format!("expected {width} non-empty tab-separated fields, got {:?}", line),
            }));
        }
        Some(Ok((i + 1, fields)))
    })
}

fn load_graph(dir: &Path, triples_file: &str, registry_file: &str) -> Result<KnowledgeGraph> {
    let text = read_file(dir, triples_file)?;
    let mut builder = if dir.join(registry_file).exists() {
        let reg = read_file(dir, registry_file)?;
        let mut uris = Vec::new();
        for rec in records(registry_file, &reg, 1) {
            uris.push(rec?.1[0].to_owned());
        }
        GraphBuilder::with_registry(uris)?
    } else {
        GraphBuilder::default()
    };
    for rec in records(triples_file, &text, 3) {
        let (line, f) = rec?;
        if !builder.push(f[0], f[1], f[2]) {
            return Err(Error::Integrity(format!(
                "{triples_file}:{line}: entity not listed in {registry_file}"
            )));
        }
    }
    Ok(builder.build())
}

/// Loads an OpenEA-style directory (`rel_triples_1`, `rel_triples_2`,
/// `ent_links`). Optional `entities_1`/`entities_2` registries, written by
/// [`write_openea`], pin entity order and keep isolated entities.
pub fn load_openea(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let kg1 = load_graph(dir, TRIPLES_1, ENTITIES_1)?;
    let kg2 = load_graph(dir, TRIPLES_2, ENTITIES_2)?;
    let links = read_file(dir, LINKS)?;
    let mut pairs = Vec::new();
    for rec in records(LINKS, &links, 2) {
        let (line, f) = rec?;
        let a = kg1
            .entity(f[0])
            .ok_or_else(|| Error::Integrity(format!("{LINKS}:{line}: unknown KG1 entity {:?}", f[0])))?;
        let b = kg2
            .entity(f[1])
            .ok_or_else(|| Error::Integrity(format!("{LINKS}:{line}: unknown KG2 entity {:?}", f[1])))?;
        pairs.push((a, b));
    }
    let store = AlignmentStore::new(kg1.num_entities(), pairs)?;
    Ok(Dataset { kg1, kg2, store })
}

fn write_triples(path: &Path, kg: &KnowledgeGraph) -> Result<()> {
    let mut out = String::new();
    for t in kg.triples() {
        out.push_str(kg.uri(t.head));
        out.push('\t');
        out.push_str(kg.relation_uri(t.relation));
        out.push('\t');
        out.push_str(kg.uri(t.tail));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_lines<'a>(path: &Path, lines: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut out = String::new();
    for l in lines {
        out.push_str(l);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes the dataset in OpenEA layout plus `bachelors_1` and the entity
/// registries. Labelled state is not persisted here.
pub fn write_openea(dir: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_triples(&dir.join(TRIPLES_1), &data.kg1)?;
    write_triples(&dir.join(TRIPLES_2), &data.kg2)?;
    let mut links = String::new();
    for (&a, &b) in data.store.gold() {
        links.push_str(data.kg1.uri(a));
        links.push('\t');
        links.push_str(data.kg2.uri(b));
        links.push('\n');
    }
    fs::write(dir.join(LINKS), links)?;
    write_lines(
        &dir.join(BACHELORS_1),
        data.store.bachelors1().iter().map(|&e| data.kg1.uri(e)),
    )?;
    write_lines(&dir.join(ENTITIES_1), data.kg1.entity_uris().iter().map(String::as_str))?;
    write_lines(&dir.join(ENTITIES_2), data.kg2.entity_uris().iter().map(String::as_str))?;
    Ok(())
}

/// Number of gold pairs removed for a given fraction.
pub fn injection_count(fraction: f64, gold: usize) -> usize {
    // Absorb representation error such as 0.29 * 100 = 28.999999999999996.
    ((fraction * gold as f64) + 1e-9).floor() as usize
}

/// Simulates bachelors by deleting the KG2 side of uniformly sampled gold
/// pairs. The sample for a smaller fraction is a prefix of the sample for a
/// larger one under the same seed.
///
/// Labelled state is reset to a fresh pool.
pub fn inject_bachelors(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Vec<(EntityId, EntityId)>)> {
    if !(0.0..=1.0).contains(&fraction) || fraction.is_nan() {
        return Err(config(format!("bachelor fraction {fraction} outside [0, 1]")));
    }
    let mut order: Vec<(EntityId, EntityId)> = data.store.gold().iter().map(|(&a, &b)| (a, b)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let count = injection_count(fraction, order.len());
    let removed: Vec<(EntityId, EntityId)> = order[..count].to_vec();
    let drop: BTreeSet<EntityId> = removed.iter().map(|&(_, b)| b).collect();
    let (kg2, remap) = data.kg2.without_entities(&drop);
    let pairs = data
        .store
        .gold()
        .iter()
        .filter_map(|(&a, &b)| remap[b.idx()].map(|nb| (a, nb)));
    let store = AlignmentStore::new(data.kg1.num_entities(), pairs)?;
    let out = Dataset {
        kg1: data.kg1.clone(),
        kg2,
        store,
    };
    Ok((out, removed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) {
        fs::write(dir.join(name), body).unwrap();
    }

    fn minimal(dir: &Path) {
        write(dir, TRIPLES_1, "a\tr\tb\nb\tr\tc\n");
        write(dir, TRIPLES_2, "x\ts\ty\ny\ts\tz\n");
        write(dir, LINKS, "a\tx\n");
    }

    #[test]
    fn loads_minimal_dataset() {
        let tmp = tempfile::tempdir().unwrap();
        minimal(tmp.path());
        let d = load_openea(tmp.path()).unwrap();
        assert_eq!(d.kg1.triples().len(), 2);
        assert_eq!(d.kg2.triples().len(), 2);
        assert_eq!(d.store.gold().len(), 1);
        assert_eq!(d.store.labels.pool.len(), 3);
        d.validate().unwrap();
    }

    #[test]
    fn empty_links_make_everything_a_bachelor() {
        let tmp = tempfile::tempdir().unwrap();
        minimal(tmp.path());
        write(tmp.path(), LINKS, "");
        let d = load_openea(tmp.path()).unwrap();
        assert!(d.store.gold().is_empty());
        assert_eq!(d.store.bachelors1().len(), 3);
        assert_eq!(d.store.labels.pool.len(), 3);
    }

    #[test]
    fn unknown_link_entity_is_integrity_error() {
        let tmp = tempfile::tempdir().unwrap();
        minimal(tmp.path());
        write(tmp.path(), LINKS, "nope\tx\n");
        assert!(matches!(load_openea(tmp.path()), Err(Error::Integrity(_))));
    }

    #[test]
    fn missing_file_names_the_file() {
        let tmp = tempfile::tempdir().unwrap();
        minimal(tmp.path());
        fs::remove_file(tmp.path().join(LINKS)).unwrap();
        let err = load_openea(tmp.path()).unwrap_err();
        assert!(matches!(err, Error::Load { .. }));
        assert!(err.to_string().contains(LINKS));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let tmp = tempfile::tempdir().unwrap();
        minimal(tmp.path());
        write(tmp.path(), TRIPLES_1, "a\tr\tb\nb r c\n");
        match load_openea(tmp.path()) {
            Err(Error::Parse { line, file, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(file, TRIPLES_1);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_links_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        minimal(tmp.path());
        write(tmp.path(), LINKS, "a\tx\nb\tx\n");
        assert!(matches!(load_openea(tmp.path()), Err(Error::Integrity(_))));
    }

    #[test]
    fn simple_adjacency_dedups_parallel_edges_and_loops() {
        let kg = KnowledgeGraph::from_uri_triples([("a", "r", "b"), ("a", "s", "b"), ("a", "r", "a")]);
        let a = kg.entity("a").unwrap();
        let b = kg.entity("b").unwrap();
        assert_eq!(kg.out_edges(a).len(), 3);
        assert_eq!(kg.simple_out(a), &[b]);
        assert_eq!(kg.simple_in(b), &[a]);
        assert!(kg.simple_in(a).is_empty());
    }

    fn ten_pairs() -> Dataset {
        let mut t1 = Vec::new();
        let mut t2 = Vec::new();
        for i in 0..10 {
            t1.push((format!("a{i}"), format!("a{}", (i + 1) % 10)));
            t2.push((format!("b{i}"), format!("b{}", (i + 1) % 10)));
        }
        let kg1 = KnowledgeGraph::from_uri_triples(t1.iter().map(|(h, t)| (h.as_str(), "r", t.as_str())));
        let kg2 = KnowledgeGraph::from_uri_triples(t2.iter().map(|(h, t)| (h.as_str(), "r", t.as_str())));
        let pairs = (0..10).map(|i| {
            (kg1.entity(&format!("a{i}")).unwrap(), kg2.entity(&format!("b{i}")).unwrap())
        });
        let store = AlignmentStore::new(10, pairs).unwrap();
        Dataset { kg1, kg2, store }
    }

    #[test]
    fn injection_zero_is_identity() {
        let d = ten_pairs();
        let (out, removed) = inject_bachelors(&d, 0.0, 7).unwrap();
        assert!(removed.is_empty());
        assert_eq!(out.kg2, d.kg2);
        assert_eq!(out.store, d.store);
    }

    #[test]
    fn injection_one_removes_all_gold() {
        let d = ten_pairs();
        let (out, removed) = inject_bachelors(&d, 1.0, 7).unwrap();
        assert_eq!(removed.len(), 10);
        assert!(out.store.gold().is_empty());
        assert_eq!(out.store.bachelors1().len(), 10);
        assert_eq!(out.kg2.num_entities(), 0);
        assert_eq!(out.kg1, d.kg1);
    }

    #[test]
    fn injection_is_seeded_and_counts_exactly() {
        let d = ten_pairs();
        let (a, ra) = inject_bachelors(&d, 0.3, 11).unwrap();
        let (_, rb) = inject_bachelors(&d, 0.3, 11).unwrap();
        assert_eq!(ra.len(), 3);
        assert_eq!(ra, rb);
        assert_eq!(a.store.gold().len(), 7);
        assert_eq!(a.store.bachelors1().len(), 3);
        a.validate().unwrap();
    }

    #[test]
    fn injection_rejects_bad_fraction() {
        let d = ten_pairs();
        assert!(matches!(inject_bachelors(&d, 1.5, 0), Err(Error::Config(_))));
        assert!(matches!(inject_bachelors(&d, -0.1, 0), Err(Error::Config(_))));
    }

    #[test]
    fn write_then_load_round_trips() {
        let d = ten_pairs();
        let (inj, _) = inject_bachelors(&d, 0.5, 3).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        write_openea(tmp.path(), &inj).unwrap();
        let back = load_openea(tmp.path()).unwrap();
        back.validate().unwrap();
        assert_eq!(back.kg1, inj.kg1);
        assert_eq!(back.kg2, inj.kg2);
        assert_eq!(back.store.gold(), inj.store.gold());
        let bach = fs::read_to_string(tmp.path().join(BACHELORS_1)).unwrap();
        assert_eq!(bach.lines().count(), 5);
    }

    #[test]
    fn label_state_validation_catches_overlap() {
        let mut s = LabelState::fresh(3);
        s.validate(3).unwrap();
        s.bachelors.insert(EntityId(0));
        assert!(s.validate(3).is_err());
        s.pool.remove(&EntityId(0));
        s.validate(3).unwrap();
    }
}
