//! Propositions, relation kinds, and the per-image implication graph.
//!
//! A relation record annotates an unordered pair of propositions about the
//! same image with one of four kinds. Records are normalized into directed
//! `sufficient -> necessary` arrows; an equivalence becomes two arrows.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ImageId(pub String);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PropId(pub String);

macro_rules! string_id {
    ($t:ty) => {
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.pad(&self.0)
            }
        }

        impl From<&str> for $t {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $t {
            fn from(s: String) -> Self {
                Self(s)
            }
        }

        impl $t {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }
    };
}

string_id!(ImageId);
string_id!(PropId);

/// A question-answer pair about one image, read as a statement that is
/// either true or false for that image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposition {
    pub id: PropId,
    pub image_id: ImageId,
    pub question: String,
    pub answer: String,
}

impl Proposition {
    pub fn new(
        id: impl Into<PropId>,
        image_id: impl Into<ImageId>,
        question: impl Into<String>,
        answer: impl Into<String>,
    ) -> Result<Self> {
        let p = Self {
            id: id.into(),
            image_id: image_id.into(),
            question: question.into(),
            answer: answer.into(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let reason = if self.question.trim().is_empty() {
            "empty question"
        } else if self.answer.trim().is_empty() {
            "empty answer"
        } else {
            return Ok(());
        };
        Err(Error::InvalidProposition {
            image: self.image_id.clone(),
            id: self.id.clone(),
            reason,
        })
    }

    pub fn key(&self) -> PropKey {
        (self.image_id.clone(), self.id.clone())
    }
}

/// `(image_id, proposition id)`, unique within a dataset.
pub type PropKey = (ImageId, PropId);

/// Propositions indexed by `(image_id, id)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PropositionSet {
    by_key: BTreeMap<PropKey, Proposition>,
}

impl PropositionSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, prop: Proposition) -> Result<()> {
        prop.validate()?;
        let key = prop.key();
        if self.by_key.contains_key(&key) {
            return Err(Error::DuplicateProposition {
                image: key.0,
                id: key.1,
            });
        }
        self.by_key.insert(key, prop);
        Ok(())
    }

    pub fn get(&self, image: &ImageId, id: &PropId) -> Option<&Proposition> {
        // BTreeMap lookups need an owned tuple key.
        self.by_key.get(&(image.clone(), id.clone()))
    }

    pub fn contains(&self, image: &ImageId, id: &PropId) -> bool {
        self.get(image, id).is_some()
    }

    pub fn len(&self) -> usize {
        self.by_key.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_key.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Proposition> {
        self.by_key.values()
    }

    /// Propositions whose image is in `images`.
    pub fn restrict(&self, images: &BTreeSet<ImageId>) -> Self {
        Self {
            by_key: self
                .by_key
                .iter()
                .filter(|((img, _), _)| images.contains(img))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }
}

impl FromIterator<Proposition> for Result<PropositionSet> {
    fn from_iter<I: IntoIterator<Item = Proposition>>(iter: I) -> Self {
        let mut set = PropositionSet::new();
        for p in iter {
            set.insert(p)?;
        }
        Ok(set)
    }
}

/// How proposition `i` relates to proposition `j` in a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RelationKind {
    /// `i -> j`
    #[serde(rename = "forward")]
    SufficientFor,
    /// `i <- j`
    #[serde(rename = "backward")]
    NecessaryFor,
    /// `i <-> j`
    #[serde(rename = "equivalent")]
    Equivalent,
    /// `i - j`
    #[serde(rename = "unrelated")]
    Unrelated,
}

impl RelationKind {
    pub const ALL: [RelationKind; 4] = [
        RelationKind::SufficientFor,
        RelationKind::NecessaryFor,
        RelationKind::Equivalent,
        RelationKind::Unrelated,
    ];

    /// The kind seen from the other endpoint.
    pub fn invert(self) -> Self {
        match self {
            Self::SufficientFor => Self::NecessaryFor,
            Self::NecessaryFor => Self::SufficientFor,
            k => k,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::SufficientFor => "forward",
            Self::NecessaryFor => "backward",
            Self::Equivalent => "equivalent",
            Self::Unrelated => "unrelated",
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Self::SufficientFor => "->",
            Self::NecessaryFor => "<-",
            Self::Equivalent => "<->",
            Self::Unrelated => "-",
        }
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RelationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::UnknownKind(s.to_owned()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawRecord")]
pub struct RelationRecord {
    pub image_id: ImageId,
    pub prop_i: PropId,
    pub prop_j: PropId,
    pub kind: RelationKind,
}

#[derive(Deserialize)]
struct RawRecord {
    image_id: ImageId,
    prop_i: PropId,
    prop_j: PropId,
    kind: RelationKind,
}

impl TryFrom<RawRecord> for RelationRecord {
    type Error = Error;

    fn try_from(r: RawRecord) -> Result<Self> {
        RelationRecord::new(r.image_id, r.prop_i, r.prop_j, r.kind)
    }
}

impl RelationRecord {
    pub fn new(
        image_id: impl Into<ImageId>,
        prop_i: impl Into<PropId>,
        prop_j: impl Into<PropId>,
        kind: RelationKind,
    ) -> Result<Self> {
        let (image_id, prop_i, prop_j) = (image_id.into(), prop_i.into(), prop_j.into());
        if prop_i == prop_j {
            return Err(Error::SelfRelation {
                image: image_id,
                id: prop_i,
            });
        }
        Ok(Self {
            image_id,
            prop_i,
            prop_j,
            kind,
        })
    }

    /// The same relation with its endpoints swapped.
    pub fn swapped(&self) -> Self {
        Self {
            image_id: self.image_id.clone(),
            prop_i: self.prop_j.clone(),
            prop_j: self.prop_i.clone(),
            kind: self.kind.invert(),
        }
    }

    pub fn normalize(&self) -> Vec<ImplicationArrow> {
        normalize(self)
    }
}

/// A directed implication `sufficient -> necessary` between two
/// propositions of the same image.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ImplicationArrow {
    pub image_id: ImageId,
    pub sufficient: PropId,
    pub necessary: PropId,
}

impl ImplicationArrow {
    pub fn new(
        image_id: impl Into<ImageId>,
        sufficient: impl Into<PropId>,
        necessary: impl Into<PropId>,
    ) -> Self {
        Self {
            image_id: image_id.into(),
            sufficient: sufficient.into(),
            necessary: necessary.into(),
        }
    }
}

impl fmt::Display for ImplicationArrow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} -> {}",
            self.image_id, self.sufficient, self.necessary
        )
    }
}

pub fn normalize(record: &RelationRecord) -> Vec<ImplicationArrow> {
    let arrow = |s: &PropId, n: &PropId| ImplicationArrow {
        image_id: record.image_id.clone(),
        sufficient: s.clone(),
        necessary: n.clone(),
    };
    let (i, j) = (&record.prop_i, &record.prop_j);
    match record.kind {
        RelationKind::SufficientFor => vec![arrow(i, j)],
        RelationKind::NecessaryFor => vec![arrow(j, i)],
        RelationKind::Equivalent => vec![arrow(i, j), arrow(j, i)],
        RelationKind::Unrelated => Vec::new(),
    }
}

pub fn invert(kind: RelationKind) -> RelationKind {
    kind.invert()
}

/// Deduplicated implication arrows grouped by image.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ImplicationGraph {
    by_image: BTreeMap<ImageId, BTreeSet<(PropId, PropId)>>,
}

impl ImplicationGraph {
    /// Builds a graph straight from arrows, without annotation checks.
    pub fn from_arrows(arrows: impl IntoIterator<Item = ImplicationArrow>) -> Self {
        let mut g = Self::default();
        for a in arrows {
            g.by_image
                .entry(a.image_id)
                .or_default()
                .insert((a.sufficient, a.necessary));
        }
        g
    }

    pub fn len(&self) -> usize {
        self.by_image.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn images(&self) -> impl Iterator<Item = &ImageId> {
        self.by_image.keys()
    }

    pub fn contains(&self, arrow: &ImplicationArrow) -> bool {
        self.by_image
            .get(&arrow.image_id)
            .is_some_and(|s| s.contains(&(arrow.sufficient.clone(), arrow.necessary.clone())))
    }

    /// Arrows in `(image, sufficient, necessary)` order.
    pub fn arrows(&self) -> impl Iterator<Item = ImplicationArrow> + '_ {
        self.by_image.iter().flat_map(|(img, set)| {
            set.iter().map(move |(s, n)| ImplicationArrow {
                image_id: img.clone(),
                sufficient: s.clone(),
                necessary: n.clone(),
            })
        })
    }

    pub fn arrows_for<'a>(
        &'a self,
        image: &ImageId,
    ) -> impl Iterator<Item = (&'a PropId, &'a PropId)> {
        self.by_image
            .get(image)
            .into_iter()
            .flat_map(|set| set.iter().map(|(s, n)| (s, n)))
    }

    /// The subgraph over `images`.
    pub fn restrict(&self, images: &BTreeSet<ImageId>) -> Self {
        Self {
            by_image: self
                .by_image
                .iter()
                .filter(|(img, _)| images.contains(*img))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    /// The arrows re-expressed as `SufficientFor` records.
    pub fn to_records(&self) -> Vec<RelationRecord> {
        self.arrows()
            .map(|a| RelationRecord {
                image_id: a.image_id,
                prop_i: a.sufficient,
                prop_j: a.necessary,
                kind: RelationKind::SufficientFor,
            })
            .collect()
    }
}

#[derive(Default)]
struct PairState {
    unrelated: bool,
    arrows: bool,
}

/// Validates `records` against `props` and collects their arrows.
///
/// Repeated annotations of a pair are merged (in either orientation). A pair
/// that is annotated both as unrelated and as carrying an implication is a
/// [`Error::Conflict`].
pub fn build_graph(props: &PropositionSet, records: &[RelationRecord]) -> Result<ImplicationGraph> {
    let mut pairs: BTreeMap<(ImageId, PropId, PropId), PairState> = BTreeMap::new();
    let mut graph = ImplicationGraph::default();

    for r in records {
        if r.prop_i == r.prop_j {
            return Err(Error::SelfRelation {
                image: r.image_id.clone(),
                id: r.prop_i.clone(),
            });
        }
        for id in [&r.prop_i, &r.prop_j] {
            match props.locate(id, &r.image_id) {
                Lookup::Found => {}
                Lookup::OtherImage(prop_image) => {
                    return Err(Error::CrossImage {
                        record_image: r.image_id.clone(),
                        prop_image,
                        prop_i: r.prop_i.clone(),
                        prop_j: r.prop_j.clone(),
                    })
                }
                Lookup::Missing => {
                    return Err(Error::DanglingReference {
                        image: r.image_id.clone(),
                        prop_i: r.prop_i.clone(),
                        prop_j: r.prop_j.clone(),
                        missing: id.clone(),
                    })
                }
            }
        }

        let (lo, hi) = if r.prop_i < r.prop_j {
            (&r.prop_i, &r.prop_j)
        } else {
            (&r.prop_j, &r.prop_i)
        };
        let state = pairs
            .entry((r.image_id.clone(), lo.clone(), hi.clone()))
            .or_default();
        match r.kind {
            RelationKind::Unrelated => state.unrelated = true,
            _ => state.arrows = true,
        }
        if state.unrelated && state.arrows {
            return Err(Error::Conflict {
                image: r.image_id.clone(),
                prop_i: r.prop_i.clone(),
                prop_j: r.prop_j.clone(),
            });
        }
        for a in normalize(r) {
            graph
                .by_image
                .entry(a.image_id)
                .or_default()
                .insert((a.sufficient, a.necessary));
        }
    }
    Ok(graph)
}

enum Lookup {
    Found,
    OtherImage(ImageId),
    Missing,
}

impl PropositionSet {
    fn locate(&self, id: &PropId, image: &ImageId) -> Lookup {
        if self.contains(image, id) {
            return Lookup::Found;
        }
        match self.by_key.keys().find(|(_, pid)| pid == id) {
            Some((img, _)) => Lookup::OtherImage(img.clone()),
            None => Lookup::Missing,
        }
    }
}
