//! Synthetic question-answering benchmark with exact relations.
//!
//! A world is a bit vector of attributes and stands in for an image. A query
//! is a small boolean formula over attribute indices and stands in for a
//! binary question; its gold answer is the formula's value on the world. A
//! proposition `(formula, yes)` reads as the formula and `(formula, no)` as
//! its negation, so the relation between two propositions is decided exactly
//! by enumerating every attribute assignment.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::metric::{NO, YES};
use crate::relations::{
    build_graph, ImageId, ImplicationGraph, PropId, Proposition, PropositionSet, RelationKind,
    RelationRecord,
};

/// Upper bound on `n_attr`; the oracle enumerates `2^n_attr` assignments.
pub const MAX_ATTRS: usize = 20;
/// Rejection-sampling budget per query slot.
pub const SLOT_ROUNDS: usize = 1000;
/// Whole-world restarts before giving up.
pub const WORLD_ROUNDS: usize = 100;

pub const WORLDS_FILE: &str = "worlds.jsonl";
pub const QUERIES_FILE: &str = "queries.jsonl";
pub const PROPOSITIONS_FILE: &str = "propositions.jsonl";
pub const RELATIONS_FILE: &str = "relations.jsonl";
pub const MANIFEST_FILE: &str = "dataset.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub attr: usize,
    pub neg: bool,
}

impl Literal {
    pub fn pos(attr: usize) -> Self {
        Self { attr, neg: false }
    }

    pub fn neg(attr: usize) -> Self {
        Self { attr, neg: true }
    }

    pub fn eval(self, attrs: &[bool]) -> bool {
        attrs[self.attr] != self.neg
    }

    fn render(self) -> String {
        format!("a{} {}", self.attr, if self.neg { "off" } else { "on" })
    }
}

/// Single literal, or a conjunction / disjunction of two literals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Formula {
    Lit { lit: Literal },
    And { a: Literal, b: Literal },
    Or { a: Literal, b: Literal },
}

impl Formula {
    pub fn lit(l: Literal) -> Self {
        Self::Lit { lit: l }
    }

    /// Conjunction with operands in attribute order.
    pub fn and(a: Literal, b: Literal) -> Self {
        let (a, b) = if b < a { (b, a) } else { (a, b) };
        Self::And { a, b }
    }

    pub fn or(a: Literal, b: Literal) -> Self {
        let (a, b) = if b < a { (b, a) } else { (a, b) };
        Self::Or { a, b }
    }

    pub fn eval(&self, attrs: &[bool]) -> bool {
        match *self {
            Self::Lit { lit } => lit.eval(attrs),
            Self::And { a, b } => a.eval(attrs) && b.eval(attrs),
            Self::Or { a, b } => a.eval(attrs) || b.eval(attrs),
        }
    }

    pub fn literals(&self) -> Vec<Literal> {
        match *self {
            Self::Lit { lit } => vec![lit],
            Self::And { a, b } | Self::Or { a, b } => vec![a, b],
        }
    }

    pub fn max_attr(&self) -> usize {
        self.literals().iter().map(|l| l.attr).max().unwrap_or(0)
    }

    /// Question text, e.g. `Is a3 on and a5 off?`.
    pub fn render(&self) -> String {
        match *self {
            Self::Lit { lit } => format!("Is {}?", lit.render()),
            Self::And { a, b } => format!("Is {} and {}?", a.render(), b.render()),
            Self::Or { a, b } => format!("Is {} or {}?", a.render(), b.render()),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lit = |l: Literal| format!("{}a{}", if l.neg { "!" } else { "" }, l.attr);
        match *self {
            Self::Lit { lit: l } => write!(f, "{}", lit(l)),
            Self::And { a, b } => write!(f, "{} & {}", lit(a), lit(b)),
            Self::Or { a, b } => write!(f, "{} | {}", lit(a), lit(b)),
        }
    }
}

mod bits {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[bool], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|&b| u8::from(b)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<bool>, D::Error> {
        let raw = Vec::<u8>::deserialize(d)?;
        raw.into_iter()
            .map(|b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(serde::de::Error::custom(format!(
                    "attribute bit {other} is not 0/1"
                ))),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct World {
    pub id: ImageId,
    #[serde(with = "bits")]
    pub attributes: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub id: PropId,
    pub formula: Formula,
    pub surface_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledQuery {
    pub query: Query,
    /// Gold answer: `true` is "yes".
    pub gold: bool,
}

impl LabeledQuery {
    pub fn answer(&self) -> &'static str {
        if self.gold {
            YES
        } else {
            NO
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorldEntry {
    pub world: World,
    pub queries: Vec<LabeledQuery>,
}

/// Relation-kind tallies over a set of records.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KindCounts {
    pub forward: usize,
    pub backward: usize,
    pub equivalent: usize,
    pub unrelated: usize,
}

impl KindCounts {
    pub fn of<'a>(records: impl IntoIterator<Item = &'a RelationRecord>) -> Self {
        let mut c = Self::default();
        for r in records {
            *c.slot(r.kind) += 1;
        }
        c
    }

    fn slot(&mut self, kind: RelationKind) -> &mut usize {
        match kind {
            RelationKind::SufficientFor => &mut self.forward,
            RelationKind::NecessaryFor => &mut self.backward,
            RelationKind::Equivalent => &mut self.equivalent,
            RelationKind::Unrelated => &mut self.unrelated,
        }
    }

    pub fn get(&self, kind: RelationKind) -> usize {
        match kind {
            RelationKind::SufficientFor => self.forward,
            RelationKind::NecessaryFor => self.backward,
            RelationKind::Equivalent => self.equivalent,
            RelationKind::Unrelated => self.unrelated,
        }
    }

    pub fn total(&self) -> usize {
        self.forward + self.backward + self.equivalent + self.unrelated
    }

    pub fn fraction(&self, kind: RelationKind) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.get(kind) as f64 / t as f64,
        }
    }
}

/// Target shares of the four relation kinds for distribution matching.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KindDistribution {
    pub forward: f64,
    pub backward: f64,
    pub equivalent: f64,
    pub unrelated: f64,
}

impl KindDistribution {
    /// Label shares of the human-annotated Introspect pairs.
    pub const INTROSPECT: Self = Self {
        forward: 0.11,
        backward: 0.60,
        equivalent: 0.17,
        unrelated: 0.12,
    };

    pub fn weight(&self, kind: RelationKind) -> f64 {
        match kind {
            RelationKind::SufficientFor => self.forward,
            RelationKind::NecessaryFor => self.backward,
            RelationKind::Equivalent => self.equivalent,
            RelationKind::Unrelated => self.unrelated,
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> RelationKind {
        let total: f64 = RelationKind::ALL.iter().map(|&k| self.weight(k)).sum();
        let mut x = rng.gen::<f64>() * total;
        for k in RelationKind::ALL {
            x -= self.weight(k);
            if x < 0.0 {
                return k;
            }
        }
        RelationKind::Unrelated
    }

    fn validate(&self) -> Result<()> {
        let ws = RelationKind::ALL.map(|k| self.weight(k));
        if ws.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || ws.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "bad kind distribution {self:?}"
            )));
        }
        if ws[0] + ws[1] + ws[2] <= 0.0 {
            return Err(Error::InvalidConfig(
                "kind distribution has no related kinds".into(),
            ));
        }
        Ok(())
    }
}

/// Truth tables of every attribute over all `2^n_attr` assignments, packed
/// 64 assignments per word. Assignment `m` sets attribute `k` iff bit `k` of
/// `m` is set.
#[derive(Debug, Clone)]
pub struct Oracle {
    n_attr: usize,
    columns: Vec<Vec<u64>>,
    tail_mask: u64,
}

impl Oracle {
    pub fn new(n_attr: usize) -> Result<Self> {
        if n_attr == 0 || n_attr > MAX_ATTRS {
            return Err(Error::InvalidConfig(format!(
                "n_attr must be in 1..={MAX_ATTRS}, got {n_attr}"
            )));
        }
        let assignments = 1usize << n_attr;
        let words = assignments.div_ceil(64);
        let columns = (0..n_attr)
            .map(|k| {
                (0..words)
                    .map(|w| {
                        (0..64)
                            .filter(|b| ((w * 64 + b) >> k) & 1 == 1)
                            .fold(0u64, |acc, b| acc | (1 << b))
                    })
                    .collect()
            })
            .collect();
        let tail_mask = if assignments >= 64 {
            u64::MAX
        } else {
            (1u64 << assignments) - 1
        };
        Ok(Self {
            n_attr,
            columns,
            tail_mask,
        })
    }

    pub fn n_attr(&self) -> usize {
        self.n_attr
    }

    fn literal(&self, l: Literal, w: usize) -> u64 {
        let c = self.columns[l.attr][w];
        if l.neg {
            !c
        } else {
            c
        }
    }

    /// Set of assignments on which the proposition `(formula, answer)` holds.
    fn table(&self, formula: &Formula, yes: bool) -> Vec<u64> {
        let words = self.columns[0].len();
        (0..words)
            .map(|w| {
                let v = match *formula {
                    Formula::Lit { lit } => self.literal(lit, w),
                    Formula::And { a, b } => self.literal(a, w) & self.literal(b, w),
                    Formula::Or { a, b } => self.literal(a, w) | self.literal(b, w),
                };
                let v = if yes { v } else { !v };
                if w + 1 == words {
                    v & self.tail_mask
                } else {
                    v
                }
            })
            .collect()
    }

    fn check(&self, formula: &Formula) {
        assert!(
            formula.max_attr() < self.n_attr,
            "formula {formula} references an attribute beyond n_attr = {}",
            self.n_attr
        );
    }

    /// Whether every assignment satisfying `a` also satisfies `b`.
    pub fn implies(&self, a: (&Formula, bool), b: (&Formula, bool)) -> bool {
        self.check(a.0);
        self.check(b.0);
        let ta = self.table(a.0, a.1);
        let tb = self.table(b.0, b.1);
        ta.iter().zip(&tb).all(|(x, y)| x & !y == 0)
    }

    pub fn relation(&self, a: (&Formula, bool), b: (&Formula, bool)) -> RelationKind {
        self.check(a.0);
        self.check(b.0);
        let ta = self.table(a.0, a.1);
        let tb = self.table(b.0, b.1);
        let a_to_b = ta.iter().zip(&tb).all(|(x, y)| x & !y == 0);
        let b_to_a = ta.iter().zip(&tb).all(|(x, y)| y & !x == 0);
        match (a_to_b, b_to_a) {
            (true, true) => RelationKind::Equivalent,
            (true, false) => RelationKind::SufficientFor,
            (false, true) => RelationKind::NecessaryFor,
            (false, false) => RelationKind::Unrelated,
        }
    }
}

/// Relation of proposition `a` to proposition `b`, each given as
/// `(formula, answer is yes)`.
///
/// Panics if a formula references an attribute `>= n_attr`.
pub fn oracle_relation(
    a: (&Formula, bool),
    b: (&Formula, bool),
    n_attr: usize,
) -> Result<RelationKind> {
    Ok(Oracle::new(n_attr)?.relation(a, b))
}

pub fn truth_eval(formula: &Formula, world: &World) -> bool {
    formula.eval(&world.attributes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub seed: u64,
    pub n_worlds: usize,
    pub n_attr: usize,
    pub queries_per_world: usize,
    /// Attributes each world's queries draw from; small pools make
    /// related query pairs common.
    pub focus_attrs: usize,
    /// When set, each query after the first is rejection-sampled so that
    /// its relation to an earlier query follows this distribution.
    pub match_distribution: Option<KindDistribution>,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            n_worlds: 50,
            n_attr: 12,
            queries_per_world: 8,
            focus_attrs: 4,
            match_distribution: None,
        }
    }
}

impl GenerateConfig {
    fn validate(&self) -> Result<()> {
        if self.n_attr == 0 || self.n_attr > MAX_ATTRS {
            return Err(Error::InvalidConfig(format!(
                "n_attr must be in 1..={MAX_ATTRS}, got {}",
                self.n_attr
            )));
        }
        if self.queries_per_world < 2 {
            return Err(Error::InvalidConfig(
                "queries_per_world must be at least 2".into(),
            ));
        }
        if self.focus_attrs == 0 {
            return Err(Error::InvalidConfig("focus_attrs must be positive".into()));
        }
        if let Some(d) = &self.match_distribution {
            d.validate()?;
        }
        Ok(())
    }
}

/// Stored alongside the JSON Lines files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: GenerateConfig,
    pub kind_counts: KindCounts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub config: GenerateConfig,
    pub worlds: Vec<WorldEntry>,
    pub relations: Vec<RelationRecord>,
}

impl SyntheticDataset {
    pub fn n_attr(&self) -> usize {
        self.config.n_attr
    }

    pub fn kind_counts(&self) -> KindCounts {
        KindCounts::of(&self.relations)
    }

    pub fn propositions(&self) -> PropositionSet {
        let mut set = PropositionSet::new();
        for e in &self.worlds {
            for q in &e.queries {
                set.insert(Proposition {
                    id: q.query.id.clone(),
                    image_id: e.world.id.clone(),
                    question: q.query.surface_text.clone(),
                    answer: q.answer().to_owned(),
                })
                .expect("generated ids are unique");
            }
        }
        set
    }

    pub fn graph(&self) -> Result<ImplicationGraph> {
        build_graph(&self.propositions(), &self.relations)
    }

    pub fn entry(&self, image: &ImageId) -> Option<&WorldEntry> {
        self.worlds.iter().find(|e| &e.world.id == image)
    }

    /// Index of worlds and their queries by id.
    pub fn index(&self) -> DatasetIndex<'_> {
        let mut worlds = BTreeMap::new();
        let mut queries = BTreeMap::new();
        for e in &self.worlds {
            worlds.insert(e.world.id.clone(), &e.world);
            for q in &e.queries {
                queries.insert((e.world.id.clone(), q.query.id.clone()), q);
            }
        }
        DatasetIndex { worlds, queries }
    }

    /// Checks gold answers and stored relations against the formulas.
    pub fn verify(&self) -> Result<()> {
        let oracle = Oracle::new(self.n_attr())?;
        for e in &self.worlds {
            if e.world.attributes.len() != self.n_attr() {
                return Err(Error::InvalidConfig(format!(
                    "world {} has {} attributes, expected {}",
                    e.world.id,
                    e.world.attributes.len(),
                    self.n_attr()
                )));
            }
            for q in &e.queries {
                if q.query.formula.max_attr() >= self.n_attr() {
                    return Err(Error::InvalidConfig(format!(
                        "query {} references attribute {} >= {}",
                        q.query.id,
                        q.query.formula.max_attr(),
                        self.n_attr()
                    )));
                }
                if q.query.formula.eval(&e.world.attributes) != q.gold {
                    return Err(Error::InvalidConfig(format!(
                        "gold answer of {} disagrees with its formula",
                        q.query.id
                    )));
                }
            }
        }
        let index = self.index();
        for r in &self.relations {
            let get = |id: &PropId| {
                index
                    .queries
                    .get(&(r.image_id.clone(), id.clone()))
                    .ok_or_else(|| Error::DanglingReference {
                        image: r.image_id.clone(),
                        prop_i: r.prop_i.clone(),
                        prop_j: r.prop_j.clone(),
                        missing: id.clone(),
                    })
            };
            let (a, b) = (get(&r.prop_i)?, get(&r.prop_j)?);
            let kind = oracle.relation((&a.query.formula, a.gold), (&b.query.formula, b.gold));
            if kind != r.kind {
                return Err(Error::InvalidConfig(format!(
                    "relation {} / {} stored as {} but the oracle gives {}",
                    r.prop_i, r.prop_j, r.kind, kind
                )));
            }
        }
        Ok(())
    }

    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        io::write_jsonl(dir.join(WORLDS_FILE), self.worlds.iter().map(|e| &e.world))?;
        let queries: Vec<QueryRecord> = self
            .worlds
            .iter()
            .flat_map(|e| {
                e.queries.iter().map(|q| QueryRecord {
                    id: q.query.id.clone(),
                    image_id: e.world.id.clone(),
                    formula: q.query.formula,
                    surface_text: q.query.surface_text.clone(),
                })
            })
            .collect();
        io::write_jsonl(dir.join(QUERIES_FILE), &queries)?;
        let props: Vec<Proposition> = self.propositions().iter().cloned().collect();
        io::write_jsonl(dir.join(PROPOSITIONS_FILE), &props)?;
        io::write_jsonl(dir.join(RELATIONS_FILE), &self.relations)?;
        io::write_json(
            dir.join(MANIFEST_FILE),
            &Manifest {
                config: self.config.clone(),
                kind_counts: self.kind_counts(),
            },
        )
    }

    pub fn read_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest: Manifest = io::read_json(dir.join(MANIFEST_FILE))?;
        let worlds: Vec<World> = io::read_jsonl(dir.join(WORLDS_FILE))?;
        let queries: Vec<QueryRecord> = io::read_jsonl(dir.join(QUERIES_FILE))?;
        let props: PropositionSet = io::read_jsonl::<Proposition>(dir.join(PROPOSITIONS_FILE))?
            .into_iter()
            .collect::<Result<_>>()?;
        let relations: Vec<RelationRecord> = io::read_jsonl(dir.join(RELATIONS_FILE))?;

        let mut per_world: BTreeMap<ImageId, Vec<LabeledQuery>> = BTreeMap::new();
        for q in queries {
            let prop = props
                .get(&q.image_id, &q.id)
                .ok_or_else(|| Error::MissingPrediction {
                    image: q.image_id.clone(),
                    id: q.id.clone(),
                })?;
            let gold = match crate::metric::normalize_answer(&prop.answer).as_str() {
                YES => true,
                NO => false,
                _ => {
                    return Err(Error::NonBinaryAnswer {
                        image: q.image_id.clone(),
                        id: q.id.clone(),
                        answer: prop.answer.clone(),
                    })
                }
            };
            per_world.entry(q.image_id).or_default().push(LabeledQuery {
                query: Query {
                    id: q.id,
                    formula: q.formula,
                    surface_text: q.surface_text,
                },
                gold,
            });
        }
        let worlds = worlds
            .into_iter()
            .map(|w| WorldEntry {
                queries: per_world.remove(&w.id).unwrap_or_default(),
                world: w,
            })
            .collect();
        if let Some(orphan) = per_world.keys().next() {
            return Err(Error::InvalidConfig(format!(
                "queries reference unknown world {orphan}"
            )));
        }
        let ds = Self {
            config: manifest.config,
            worlds,
            relations,
        };
        ds.verify()?;
        Ok(ds)
    }
}

pub struct DatasetIndex<'a> {
    pub worlds: BTreeMap<ImageId, &'a World>,
    pub queries: BTreeMap<(ImageId, PropId), &'a LabeledQuery>,
}

#[derive(Serialize, Deserialize)]
struct QueryRecord {
    id: PropId,
    image_id: ImageId,
    formula: Formula,
    surface_text: String,
}

fn sample_formula(rng: &mut ChaCha8Rng, focus: &[usize]) -> Formula {
    let lit = |rng: &mut ChaCha8Rng, attr: usize| Literal {
        attr,
        neg: rng.gen_bool(0.5),
    };
    let shape = if focus.len() < 2 {
        0
    } else {
        rng.gen_range(0..3)
    };
    if shape == 0 {
        let attr = focus[rng.gen_range(0..focus.len())];
        return Formula::lit(lit(rng, attr));
    }
    let pick = index::sample(rng, focus.len(), 2);
    let a = lit(rng, focus[pick.index(0)]);
    let b = lit(rng, focus[pick.index(1)]);
    if shape == 1 {
        Formula::and(a, b)
    } else {
        Formula::or(a, b)
    }
}

fn sample_focus(rng: &mut ChaCha8Rng, n_attr: usize, size: usize) -> Vec<usize> {
    let mut v = index::sample(rng, n_attr, size.min(n_attr)).into_vec();
    v.sort_unstable();
    v
}

struct WorldDraft {
    formulas: Vec<Formula>,
    records: Vec<(usize, usize, RelationKind)>,
}

fn draft_all_pairs(
    rng: &mut ChaCha8Rng,
    oracle: &Oracle,
    attrs: &[bool],
    cfg: &GenerateConfig,
) -> Option<WorldDraft> {
    let focus = sample_focus(rng, cfg.n_attr, cfg.focus_attrs);
    let mut formulas: Vec<Formula> = Vec::with_capacity(cfg.queries_per_world);
    for _ in 0..SLOT_ROUNDS {
        if formulas.len() == cfg.queries_per_world {
            break;
        }
        let f = sample_formula(rng, &focus);
        if !formulas.contains(&f) {
            formulas.push(f);
        }
    }
    if formulas.len() < cfg.queries_per_world {
        return None;
    }
    let mut records = Vec::new();
    for i in 0..formulas.len() {
        for j in i + 1..formulas.len() {
            let kind = oracle.relation(
                (&formulas[i], formulas[i].eval(attrs)),
                (&formulas[j], formulas[j].eval(attrs)),
            );
            records.push((i, j, kind));
        }
    }
    Some(WorldDraft { formulas, records })
}

fn draft_matched(
    rng: &mut ChaCha8Rng,
    oracle: &Oracle,
    attrs: &[bool],
    cfg: &GenerateConfig,
    targets: &[RelationKind],
) -> Option<WorldDraft> {
    let focus = sample_focus(rng, cfg.n_attr, cfg.focus_attrs);
    let mut formulas = vec![sample_formula(rng, &focus)];
    let mut records = Vec::with_capacity(targets.len());
    for (slot, &target) in targets.iter().enumerate() {
        let j = slot + 1;
        let mut placed = false;
        for _ in 0..SLOT_ROUNDS {
            let i = rng.gen_range(0..j);
            let f = sample_formula(rng, &focus);
            if formulas.contains(&f) {
                continue;
            }
            let kind =
                oracle.relation((&formulas[i], formulas[i].eval(attrs)), (&f, f.eval(attrs)));
            if kind == target {
                formulas.push(f);
                records.push((i, j, kind));
                placed = true;
                break;
            }
        }
        if !placed {
            return None;
        }
    }
    Some(WorldDraft { formulas, records })
}

const TARGET_REDRAW: usize = 10;

/// Target kinds for the query slots of one world, at least one related.
fn draw_targets(
    dist: &KindDistribution,
    cfg: &GenerateConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<RelationKind> {
    loop {
        let t: Vec<_> = (1..cfg.queries_per_world)
            .map(|_| dist.sample(rng))
            .collect();
        if t.iter().any(|&k| k != RelationKind::Unrelated) {
            return t;
        }
    }
}

/// Draws a dataset; identical configs give identical datasets.
pub fn generate(cfg: &GenerateConfig) -> Result<SyntheticDataset> {
    cfg.validate()?;
    let oracle = Oracle::new(cfg.n_attr)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worlds = Vec::with_capacity(cfg.n_worlds);
    let mut relations = Vec::new();

    for n in 0..cfg.n_worlds {
        let id = ImageId(format!("w{n:04}"));
        let attrs: Vec<bool> = (0..cfg.n_attr).map(|_| rng.gen_bool(0.5)).collect();

        let mut targets = cfg
            .match_distribution
            .map(|d| draw_targets(&d, cfg, &mut rng));

        let mut draft = None;
        for round in 0..WORLD_ROUNDS {
            let d = match (&mut targets, &cfg.match_distribution) {
                (Some(t), Some(dist)) => {
                    // An equivalence class holds at most two formulas, so some
                    // target orders cannot be realized; reshuffle, and redraw
                    // the targets themselves now and then.
                    if round > 0 && round % TARGET_REDRAW == 0 {
                        *t = draw_targets(dist, cfg, &mut rng);
                    } else {
                        t.shuffle(&mut rng);
                    }
                    draft_matched(&mut rng, &oracle, &attrs, cfg, t)
                }
                _ => draft_all_pairs(&mut rng, &oracle, &attrs, cfg),
            };
            if let Some(d) = d {
                if d.records.iter().any(|r| r.2 != RelationKind::Unrelated) {
                    draft = Some(d);
                    break;
                }
            }
        }
        let draft = draft.ok_or_else(|| {
            Error::Infeasible(format!(
                "world {id}: no admissible query set after {WORLD_ROUNDS} rounds \
                 (n_attr={}, focus_attrs={}, queries_per_world={})",
                cfg.n_attr, cfg.focus_attrs, cfg.queries_per_world
            ))
        })?;

        let queries: Vec<LabeledQuery> = draft
            .formulas
            .iter()
            .enumerate()
            .map(|(k, f)| LabeledQuery {
                query: Query {
                    id: PropId(format!("{id}.q{k}")),
                    formula: *f,
                    surface_text: f.render(),
                },
                gold: f.eval(&attrs),
            })
            .collect();
        for (i, j, kind) in draft.records {
            relations.push(RelationRecord {
                image_id: id.clone(),
                prop_i: queries[i].query.id.clone(),
                prop_j: queries[j].query.id.clone(),
                kind,
            });
        }
        worlds.push(WorldEntry {
            world: World {
                id,
                attributes: attrs,
            },
            queries,
        });
    }

    Ok(SyntheticDataset {
        config: cfg.clone(),
        worlds,
        relations,
    })
}
