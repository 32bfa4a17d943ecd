//! Concept identity and the context relation.
//!
//! A concept is written `(a # b)`: `a` is its basic identity and `b` the
//! context it is defined in. Chaining is associative, so every concept is
//! stored as a flat list of atoms read left to right, with the universal
//! concept `T` implied at the end. `T` itself is the empty path.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::algebra::Sign;

/// Name of the universal concept.
pub const UNIVERSAL: &str = "T";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("empty atom name")]
    EmptyAtom,
    #[error("invalid atom name {name:?}: {reason}")]
    InvalidAtom { name: String, reason: &'static str },
    #[error("reserved atom `T` cannot be used as a concept segment")]
    ReservedAtom,
    #[error("a concept needs at least one segment")]
    EmptyPath,
    #[error("the universal concept T has no basic identity")]
    UniversalHasNoIdentity,
    #[error("unknown concept `{0}`")]
    UnknownConcept(ConceptPath),
}

/// A single concept name.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom(Arc<str>);

impl Atom {
    pub fn new(name: &str) -> Result<Atom, ModelError> {
        if name.is_empty() {
            return Err(ModelError::EmptyAtom);
        }
        if name == UNIVERSAL {
            return Err(ModelError::ReservedAtom);
        }
        if name.contains('"') {
            return Err(ModelError::InvalidAtom {
                name: name.to_string(),
                reason: "contains a double quote",
            });
        }
        if name.chars().any(char::is_control) {
            return Err(ModelError::InvalidAtom {
                name: name.to_string(),
                reason: "contains a control character",
            });
        }
        Ok(Atom(Arc::from(name)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// True when the name can be written without quotes.
    pub fn is_bare(&self) -> bool {
        is_ident(&self.0)
    }

    /// The name as it appears in declaration text, quoted when needed.
    pub fn to_source(&self) -> String {
        if self.is_bare() {
            self.0.to_string()
        } else {
            format!("\"{}\"", self.0)
        }
    }
}

pub(crate) fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_source())
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for Atom {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Atom {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Atom::new(&s).map_err(serde::de::Error::custom)
    }
}

/// A concept as a normalized chain of atoms; the empty chain is `T`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ConceptPath {
    segments: Vec<Atom>,
}

impl ConceptPath {
    /// Builds a concept from its segments, outermost identity first.
    pub fn new<I>(segments: I) -> Result<ConceptPath, ModelError>
    where
        I: IntoIterator<Item = Atom>,
    {
        let segments: Vec<Atom> = segments.into_iter().collect();
        if segments.is_empty() {
            return Err(ModelError::EmptyPath);
        }
        Ok(ConceptPath { segments })
    }

    /// Convenience constructor from raw names.
    pub fn from_names<'a, I>(names: I) -> Result<ConceptPath, ModelError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let atoms = names
            .into_iter()
            .map(Atom::new)
            .collect::<Result<Vec<_>, _>>()?;
        ConceptPath::new(atoms)
    }

    /// The universal concept `T`.
    pub fn universal() -> ConceptPath {
        ConceptPath::default()
    }

    /// The concept `(identity # context)`, flattened.
    pub fn of(identity: &ConceptPath, context: &ConceptPath) -> ConceptPath {
        let mut segments = identity.segments.clone();
        segments.extend(context.segments.iter().cloned());
        ConceptPath { segments }
    }

    pub fn is_universal(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn segments(&self) -> &[Atom] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// The context this concept is defined in. `T` is its own context.
    pub fn context(&self) -> ConceptPath {
        match self.segments.split_first() {
            Some((_, rest)) => ConceptPath {
                segments: rest.to_vec(),
            },
            None => ConceptPath::universal(),
        }
    }

    pub fn basic_identity(&self) -> Result<&Atom, ModelError> {
        self.segments
            .first()
            .ok_or(ModelError::UniversalHasNoIdentity)
    }

    /// The head segment as a single-atom concept.
    pub fn identity_concept(&self) -> Result<ConceptPath, ModelError> {
        self.basic_identity().map(|atom| ConceptPath {
            segments: vec![atom.clone()],
        })
    }

    /// True iff `self` is a property of `other`, i.e. directly in its context.
    pub fn is_property_of(&self, other: &ConceptPath) -> bool {
        !self.is_universal() && self.context() == *other
    }

    /// True iff `self` lies in the description subtree of `root` (or is `root`).
    pub fn is_within(&self, root: &ConceptPath) -> bool {
        self.segments.ends_with(&root.segments)
    }

    /// Replaces the trailing `from` context with `to`. `self` must lie within `from`.
    pub fn rebase(&self, from: &ConceptPath, to: &ConceptPath) -> Option<ConceptPath> {
        if !self.is_within(from) {
            return None;
        }
        let head = &self.segments[..self.segments.len() - from.segments.len()];
        let mut segments = head.to_vec();
        segments.extend(to.segments.iter().cloned());
        Some(ConceptPath { segments })
    }

    /// All contexts enclosing this concept, nearest first, ending with `T`.
    pub fn ancestors(&self) -> impl Iterator<Item = ConceptPath> + '_ {
        (1..=self.segments.len()).map(move |k| ConceptPath {
            segments: self.segments[k..].to_vec(),
        })
    }

    /// True when some atom occurs more than once in the chain.
    pub fn has_repeated_segment(&self) -> bool {
        let mut seen = BTreeSet::new();
        !self.segments.iter().all(|atom| seen.insert(atom))
    }

    /// Declaration-language form: segments joined by `#`, quoted when needed.
    pub fn to_source(&self) -> String {
        if self.is_universal() {
            return UNIVERSAL.to_string();
        }
        self.segments
            .iter()
            .map(Atom::to_source)
            .collect::<Vec<_>>()
            .join("#")
    }
}

/// Renders `Color # Royal_Elephant # Thailand`; the universal context is omitted.
impl fmt::Display for ConceptPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_universal() {
            return f.write_str(UNIVERSAL);
        }
        for (k, atom) in self.segments.iter().enumerate() {
            if k > 0 {
                f.write_str(" # ")?;
            }
            f.write_str(&atom.to_source())?;
        }
        Ok(())
    }
}

impl fmt::Debug for ConceptPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.to_source())
    }
}

impl FromStr for ConceptPath {
    type Err = crate::dsl::ConceptSyntaxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        crate::dsl::parse_concept(s)
    }
}

impl Serialize for ConceptPath {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_source())
    }
}

impl<'de> Deserialize<'de> for ConceptPath {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Categorical relations that govern description inheritance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Categorizer {
    /// Specialization, "a kind of".
    Ako,
    /// Decomposition, "part of".
    Partof,
    /// Equivalence.
    Eqv,
    /// Structural copy.
    Sc,
}

impl Categorizer {
    pub const ALL: [Categorizer; 4] = [
        Categorizer::Ako,
        Categorizer::Partof,
        Categorizer::Eqv,
        Categorizer::Sc,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            Categorizer::Ako => "ako",
            Categorizer::Partof => "partof",
            Categorizer::Eqv => "eqv",
            Categorizer::Sc => "sc",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Categorizer> {
        Categorizer::ALL
            .into_iter()
            .find(|cat| cat.keyword().eq_ignore_ascii_case(word))
    }
}

impl fmt::Display for Categorizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Categorizer::Ako => "AKO",
            Categorizer::Partof => "PARTOF",
            Categorizer::Eqv => "EQV",
            Categorizer::Sc => "SC",
        })
    }
}

impl FromStr for Categorizer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Categorizer::from_keyword(s).ok_or_else(|| format!("unknown categorizer `{s}`"))
    }
}

/// A directed interaction. Associations are symmetric and kept with their
/// endpoints in canonical (ascending) order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Interaction {
    pub source: ConceptPath,
    pub sign: Sign,
    pub target: ConceptPath,
}

impl Interaction {
    pub fn new(source: ConceptPath, sign: Sign, target: ConceptPath) -> Interaction {
        if sign == Sign::Association && target < source {
            Interaction {
                source: target,
                sign,
                target: source,
            }
        } else {
            Interaction {
                source,
                sign,
                target,
            }
        }
    }

    /// The ordered endpoint pair this interaction occupies.
    pub fn endpoints(&self) -> (ConceptPath, ConceptPath) {
        (self.source.clone(), self.target.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Assertion {
    Categorization {
        child: ConceptPath,
        kind: Categorizer,
        parent: ConceptPath,
    },
    Interaction(Interaction),
    /// "color of royal elephant is white"
    ValueAssignment {
        attribute: ConceptPath,
        value: Atom,
    },
}

impl Assertion {
    pub fn interaction(source: ConceptPath, sign: Sign, target: ConceptPath) -> Assertion {
        Assertion::Interaction(Interaction::new(source, sign, target))
    }

    /// Every concept the assertion mentions.
    pub fn concepts(&self) -> Vec<&ConceptPath> {
        match self {
            Assertion::Categorization { child, parent, .. } => vec![child, parent],
            Assertion::Interaction(edge) => vec![&edge.source, &edge.target],
            Assertion::ValueAssignment { attribute, .. } => vec![attribute],
        }
    }
}

/// The tree induced by the context relation, rooted at `T`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContextTree {
    children: BTreeMap<ConceptPath, BTreeSet<ConceptPath>>,
}

impl Default for ContextTree {
    fn default() -> Self {
        ContextTree::new()
    }
}

impl ContextTree {
    pub fn new() -> ContextTree {
        let mut children = BTreeMap::new();
        children.insert(ConceptPath::universal(), BTreeSet::new());
        ContextTree { children }
    }

    /// Inserts a concept together with every enclosing context.
    /// Returns true if the concept was not present before.
    pub fn insert(&mut self, concept: &ConceptPath) -> bool {
        if self.children.contains_key(concept) {
            return false;
        }
        let mut node = concept.clone();
        loop {
            let parent = node.context();
            let parent_known = self.children.contains_key(&parent);
            self.children.entry(node.clone()).or_default();
            self.children
                .entry(parent.clone())
                .or_default()
                .insert(node);
            if parent_known {
                return true;
            }
            node = parent;
        }
    }

    pub fn contains(&self, concept: &ConceptPath) -> bool {
        self.children.contains_key(concept)
    }

    /// Direct properties of a concept.
    pub fn properties(&self, concept: &ConceptPath) -> Option<&BTreeSet<ConceptPath>> {
        self.children.get(concept)
    }

    /// All concepts other than `T`, in canonical order.
    pub fn concepts(&self) -> impl Iterator<Item = &ConceptPath> {
        self.children.keys().filter(|c| !c.is_universal())
    }

    /// Number of concepts, not counting `T`.
    pub fn len(&self) -> usize {
        self.children.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Everything reachable from `concept` by descending context edges,
    /// excluding `concept` itself.
    pub fn description_closure(
        &self,
        concept: &ConceptPath,
    ) -> Result<BTreeSet<ConceptPath>, ModelError> {
        let kids = self
            .children
            .get(concept)
            .ok_or_else(|| ModelError::UnknownConcept(concept.clone()))?;
        let mut out = BTreeSet::new();
        let mut stack: Vec<&ConceptPath> = kids.iter().collect();
        while let Some(node) = stack.pop() {
            if out.insert(node.clone()) {
                stack.extend(self.children[node].iter());
            }
        }
        Ok(out)
    }
}
