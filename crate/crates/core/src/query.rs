//! Queries over a frozen knowledge base.
//!
//! * Q1/Q2 ask whether, and which, concepts are related by a categorizer.
//!   Besides the transitive closure of declared edges, a chained concept
//!   `(p # c)` is related to `(q # d)` when `p` relates to `q` and `c`
//!   relates to `d` (each possibly by equality): teeth of elephant is a kind
//!   of organ of animal. The rule is applied recursively along the chain.
//! * Q3/Q4 ask for net interactions: the parallel fold, over every simple
//!   directed path, of the chain fold of the signs along the path.
//!   Associations can be traversed in both directions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{chain_fold, parallel_fold, Sign};
use crate::compiler::{equivalence_classes, CompiledKb, FrozenKb};
use crate::model::{Categorizer, ConceptPath, Interaction};

pub const DEFAULT_MAX_PATH_LEN: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("unknown concept `{}`", .0.to_source())]
    UnknownConcept(ConceptPath),
    #[error("source and target are the same concept `{}`", .0.to_source())]
    SameEndpoints(ConceptPath),
    #[error("maximum path length must be at least 1")]
    ZeroMaxLen,
}

/// Direction of a categorical query.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hierarchy {
    /// Concepts the anchor relates to (its generalizations for AKO).
    Ancestors,
    /// Concepts related to the anchor (its specializations for AKO).
    Descendants,
}

/// Direction of an interaction query.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flow {
    /// Concepts the anchor influences.
    Affects,
    /// Concepts that influence the anchor.
    AffectedBy,
}

/// Which net signs a Q3/Q4 query accepts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SignFilter {
    Any,
    Exact(Sign),
}

impl SignFilter {
    pub fn accepts(self, sign: Sign) -> bool {
        match self {
            SignFilter::Any => true,
            SignFilter::Exact(s) => s == sign,
        }
    }
}

impl fmt::Display for SignFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignFilter::Any => f.write_str("any"),
            SignFilter::Exact(s) => write!(f, "{s}"),
        }
    }
}

impl FromStr for SignFilter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "any" {
            return Ok(SignFilter::Any);
        }
        s.parse()
            .map(SignFilter::Exact)
            .map_err(|e: crate::algebra::AlgebraError| e.to_string())
    }
}

impl Serialize for SignFilter {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SignFilter {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The four query forms.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "lowercase")]
pub enum QueryForm {
    /// Does `a` relate to `b` by `cat`?
    Q1 {
        a: ConceptPath,
        b: ConceptPath,
        cat: Categorizer,
    },
    /// What concepts are related to `a` by `cat`?
    Q2 {
        a: ConceptPath,
        cat: Categorizer,
        direction: Hierarchy,
    },
    /// Does `a` relate to `b` by an interaction (optionally a specific one)?
    Q3 {
        a: ConceptPath,
        b: ConceptPath,
        filter: SignFilter,
    },
    /// What concepts are related to `a` by an interaction?
    Q4 {
        a: ConceptPath,
        filter: SignFilter,
        direction: Flow,
    },
}

impl fmt::Display for QueryForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueryForm::Q1 { a, b, cat } => {
                write!(f, "q1 {cat} {} {}", a.to_source(), b.to_source())
            }
            QueryForm::Q2 { a, cat, direction } => {
                let dir = match direction {
                    Hierarchy::Ancestors => "ancestors",
                    Hierarchy::Descendants => "descendants",
                };
                write!(f, "q2 {cat} {} {dir}", a.to_source())
            }
            QueryForm::Q3 { a, b, filter } => {
                write!(f, "q3 {} {} sign={filter}", a.to_source(), b.to_source())
            }
            QueryForm::Q4 {
                a,
                filter,
                direction,
            } => {
                let dir = match direction {
                    Flow::Affects => "affects",
                    Flow::AffectedBy => "affected-by",
                };
                write!(f, "q4 {} {dir} sign={filter}", a.to_source())
            }
        }
    }
}

/// Precomputed categorizer closures, derivative relations included.
#[derive(Debug, Default)]
pub struct CategoryIndex {
    related: BTreeMap<Categorizer, BTreeMap<ConceptPath, BTreeSet<ConceptPath>>>,
}

static EMPTY: BTreeSet<ConceptPath> = BTreeSet::new();

impl CategoryIndex {
    pub(crate) fn build(kb: &CompiledKb) -> CategoryIndex {
        let classes = equivalence_classes(kb.categorizations(Categorizer::Eqv));
        let class_of: BTreeMap<&ConceptPath, &BTreeSet<ConceptPath>> = classes
            .iter()
            .flat_map(|class| class.iter().map(move |m| (m, class)))
            .collect();
        let concepts: Vec<&ConceptPath> = kb.concepts().collect();
        let related = Categorizer::ALL
            .into_iter()
            .map(|cat| (cat, closure_for(kb, cat, &concepts, &class_of)))
            .collect();
        CategoryIndex { related }
    }

    /// Concepts `concept` relates to by `cat`; never contains `concept`.
    pub fn related(&self, cat: Categorizer, concept: &ConceptPath) -> &BTreeSet<ConceptPath> {
        self.related
            .get(&cat)
            .and_then(|m| m.get(concept))
            .unwrap_or(&EMPTY)
    }

    fn related_or_equal(&self, cat: Categorizer, x: &ConceptPath, y: &ConceptPath) -> bool {
        x == y || self.related(cat, x).contains(y)
    }
}

fn closure_for(
    kb: &CompiledKb,
    cat: Categorizer,
    concepts: &[&ConceptPath],
    class_of: &BTreeMap<&ConceptPath, &BTreeSet<ConceptPath>>,
) -> BTreeMap<ConceptPath, BTreeSet<ConceptPath>> {
    let members = |x: &ConceptPath| -> BTreeSet<ConceptPath> {
        class_of
            .get(x)
            .map(|c| (*c).clone())
            .unwrap_or_else(|| BTreeSet::from([x.clone()]))
    };
    let mut declared: BTreeMap<&ConceptPath, Vec<&ConceptPath>> = BTreeMap::new();
    for (child, parent) in kb.categorizations(cat) {
        declared.entry(child).or_default().push(parent);
    }

    let mut related: BTreeMap<ConceptPath, BTreeSet<ConceptPath>> = BTreeMap::new();
    for &x in concepts {
        let mut direct = BTreeSet::new();
        if cat == Categorizer::Eqv {
            direct = members(x);
        } else {
            for member in members(x) {
                for parent in declared.get(&member).into_iter().flatten() {
                    direct.extend(members(parent));
                }
            }
        }
        direct.remove(x);
        related.insert(x.clone(), direct);
    }

    let empty = BTreeSet::new();
    loop {
        let mut changed = false;

        // transitivity
        for &x in concepts {
            let mut grown = related[x].clone();
            for y in &related[x] {
                grown.extend(related.get(y).unwrap_or(&empty).iter().cloned());
            }
            grown.remove(x);
            if grown.len() != related[x].len() {
                related.insert(x.clone(), grown);
                changed = true;
            }
        }

        // derivative relations: (h # c) relates to (h' # c')
        for &x in concepts.iter().filter(|x| x.len() >= 2) {
            let head = x.identity_concept().expect("non-universal");
            let context = x.context();
            let heads: Vec<ConceptPath> = std::iter::once(head.clone())
                .chain(related.get(&head).unwrap_or(&empty).iter().cloned())
                .collect();
            let contexts: Vec<ConceptPath> = std::iter::once(context.clone())
                .chain(related.get(&context).unwrap_or(&empty).iter().cloned())
                .collect();
            let mut found = Vec::new();
            for h in &heads {
                for c in &contexts {
                    let candidate = ConceptPath::of(h, c);
                    if candidate != *x
                        && kb.contains(&candidate)
                        && !related[x].contains(&candidate)
                    {
                        found.push(candidate);
                    }
                }
            }
            if !found.is_empty() {
                related.get_mut(x).expect("present").extend(found);
                changed = true;
            }
        }

        if !changed {
            return related;
        }
    }
}

fn require(kb: &CompiledKb, concept: &ConceptPath) -> Result<(), QueryError> {
    if kb.contains(concept) {
        Ok(())
    } else {
        Err(QueryError::UnknownConcept(concept.clone()))
    }
}

/// Q1: does `a` relate to `b` by `cat`?
pub fn q1(
    kb: &FrozenKb,
    a: &ConceptPath,
    b: &ConceptPath,
    cat: Categorizer,
) -> Result<bool, QueryError> {
    require(kb, a)?;
    require(kb, b)?;
    Ok(kb.index().related(cat, a).contains(b))
}

/// Derivative relation between two concepts, reflexive, independent of
/// whether the chained concepts themselves were ever declared.
pub fn derivative_subclassification(
    kb: &FrozenKb,
    p: &ConceptPath,
    q: &ConceptPath,
    cat: Categorizer,
) -> bool {
    let index = kb.index();
    if index.related_or_equal(cat, p, q) {
        return true;
    }
    if p.len() < 2 || q.len() < 2 {
        return false;
    }
    let (Ok(p_head), Ok(q_head)) = (p.identity_concept(), q.identity_concept()) else {
        return false;
    };
    index.related_or_equal(cat, &p_head, &q_head)
        && derivative_subclassification(kb, &p.context(), &q.context(), cat)
}

/// Q2: every concept related to `a` in the given direction, sorted.
pub fn q2(
    kb: &FrozenKb,
    a: &ConceptPath,
    cat: Categorizer,
    direction: Hierarchy,
) -> Result<Vec<ConceptPath>, QueryError> {
    require(kb, a)?;
    let index = kb.index();
    Ok(match direction {
        Hierarchy::Ancestors => index.related(cat, a).iter().cloned().collect(),
        Hierarchy::Descendants => kb
            .concepts()
            .filter(|y| index.related(cat, y).contains(a))
            .cloned()
            .collect(),
    })
}

/// One simple path and the chain fold of its signs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionPath {
    pub vertices: Vec<ConceptPath>,
    pub signs: Vec<Sign>,
    pub folded: Sign,
}

impl InteractionPath {
    fn new(vertices: Vec<ConceptPath>, signs: Vec<Sign>) -> InteractionPath {
        let folded = chain_fold(signs.iter().copied()).expect("paths have at least one edge");
        InteractionPath {
            vertices,
            signs,
            folded,
        }
    }
}

impl fmt::Display for InteractionPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.vertices[0].to_source())?;
        for (sign, v) in self.signs.iter().zip(&self.vertices[1..]) {
            write!(f, " -[{sign}]-> {}", v.to_source())?;
        }
        write!(f, "  => {}", self.folded)
    }
}

/// Net interaction between two concepts with its path evidence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetInteraction {
    pub source: ConceptPath,
    pub target: ConceptPath,
    /// `None` when no path exists.
    pub net: Option<Sign>,
    pub paths: Vec<InteractionPath>,
}

impl NetInteraction {
    fn from_paths(source: ConceptPath, target: ConceptPath, paths: Vec<InteractionPath>) -> Self {
        let net = parallel_fold(paths.iter().map(|p| p.folded)).ok();
        NetInteraction {
            source,
            target,
            net,
            paths,
        }
    }
}

/// Traversable view of a set of interactions.
#[derive(Clone, Debug, Default)]
pub struct InteractionGraph {
    forward: BTreeMap<ConceptPath, Vec<(ConceptPath, Sign)>>,
    backward: BTreeMap<ConceptPath, Vec<(ConceptPath, Sign)>>,
}

impl InteractionGraph {
    pub fn from_edges<I>(edges: I) -> InteractionGraph
    where
        I: IntoIterator<Item = Interaction>,
    {
        let mut graph = InteractionGraph::default();
        for edge in edges {
            graph.add(&edge.source, edge.sign, &edge.target);
            if edge.sign == Sign::Association {
                graph.add(&edge.target, edge.sign, &edge.source);
            }
        }
        for list in graph
            .forward
            .values_mut()
            .chain(graph.backward.values_mut())
        {
            list.sort();
            list.dedup();
        }
        graph
    }

    pub fn of_kb(kb: &CompiledKb) -> InteractionGraph {
        InteractionGraph::from_edges(kb.interactions().map(|(edge, _)| edge))
    }

    fn add(&mut self, from: &ConceptPath, sign: Sign, to: &ConceptPath) {
        self.forward
            .entry(from.clone())
            .or_default()
            .push((to.clone(), sign));
        self.backward
            .entry(to.clone())
            .or_default()
            .push((from.clone(), sign));
    }

    /// Immediate neighbours in the given direction.
    pub fn neighbours(&self, concept: &ConceptPath, flow: Flow) -> &[(ConceptPath, Sign)] {
        let map = match flow {
            Flow::Affects => &self.forward,
            Flow::AffectedBy => &self.backward,
        };
        map.get(concept).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Every simple path of at most `max_len` edges starting (or, for
    /// [`Flow::AffectedBy`], ending) at `anchor`, grouped by the other endpoint.
    /// Paths are always reported in source-to-target order.
    pub fn paths_from(
        &self,
        anchor: &ConceptPath,
        flow: Flow,
        max_len: usize,
    ) -> BTreeMap<ConceptPath, Vec<InteractionPath>> {
        let mut out: BTreeMap<ConceptPath, Vec<InteractionPath>> = BTreeMap::new();
        let mut walk = Walk {
            graph: self,
            flow,
            max_len,
            target: None,
            vertices: vec![anchor.clone()],
            signs: Vec::new(),
            on_path: BTreeSet::from([anchor.clone()]),
            found: &mut out,
        };
        walk.extend();
        out
    }

    /// Every simple path from `source` to `target` of at most `max_len` edges.
    pub fn paths(
        &self,
        source: &ConceptPath,
        target: &ConceptPath,
        max_len: usize,
    ) -> Vec<InteractionPath> {
        let mut out = BTreeMap::new();
        let mut walk = Walk {
            graph: self,
            flow: Flow::Affects,
            max_len,
            target: Some(target),
            vertices: vec![source.clone()],
            signs: Vec::new(),
            on_path: BTreeSet::from([source.clone()]),
            found: &mut out,
        };
        walk.extend();
        out.remove(target).unwrap_or_default()
    }

    pub fn net(
        &self,
        source: &ConceptPath,
        target: &ConceptPath,
        max_len: usize,
    ) -> NetInteraction {
        NetInteraction::from_paths(
            source.clone(),
            target.clone(),
            self.paths(source, target, max_len),
        )
    }
}

struct Walk<'a> {
    graph: &'a InteractionGraph,
    flow: Flow,
    max_len: usize,
    target: Option<&'a ConceptPath>,
    vertices: Vec<ConceptPath>,
    signs: Vec<Sign>,
    on_path: BTreeSet<ConceptPath>,
    found: &'a mut BTreeMap<ConceptPath, Vec<InteractionPath>>,
}

impl Walk<'_> {
    fn extend(&mut self) {
        if self.signs.len() == self.max_len {
            return;
        }
        let here = self.vertices.last().expect("nonempty").clone();
        for (next, sign) in self.graph.neighbours(&here, self.flow) {
            if self.on_path.contains(next) {
                continue;
            }
            self.vertices.push(next.clone());
            self.signs.push(*sign);
            if self.target.is_none_or(|t| t == next) {
                self.record(next.clone());
            }
            if self.target != Some(next) {
                self.on_path.insert(next.clone());
                self.extend();
                self.on_path.remove(next);
            }
            self.vertices.pop();
            self.signs.pop();
        }
    }

    fn record(&mut self, endpoint: ConceptPath) {
        let (mut vertices, mut signs) = (self.vertices.clone(), self.signs.clone());
        if self.flow == Flow::AffectedBy {
            vertices.reverse();
            signs.reverse();
        }
        self.found
            .entry(endpoint)
            .or_default()
            .push(InteractionPath::new(vertices, signs));
    }
}

/// All simple directed interaction paths from `a` to `b`.
pub fn enumerate_paths(
    kb: &FrozenKb,
    a: &ConceptPath,
    b: &ConceptPath,
    max_len: usize,
) -> Result<Vec<InteractionPath>, QueryError> {
    check_pair(kb, a, b, max_len)?;
    Ok(InteractionGraph::of_kb(kb).paths(a, b, max_len))
}

fn check_pair(
    kb: &CompiledKb,
    a: &ConceptPath,
    b: &ConceptPath,
    max_len: usize,
) -> Result<(), QueryError> {
    if a == b {
        return Err(QueryError::SameEndpoints(a.clone()));
    }
    require(kb, a)?;
    require(kb, b)?;
    if max_len == 0 {
        return Err(QueryError::ZeroMaxLen);
    }
    Ok(())
}

/// Q3: net interaction from `a` to `b`.
pub fn q3(
    kb: &FrozenKb,
    a: &ConceptPath,
    b: &ConceptPath,
    max_len: usize,
) -> Result<NetInteraction, QueryError> {
    check_pair(kb, a, b, max_len)?;
    Ok(InteractionGraph::of_kb(kb).net(a, b, max_len))
}

/// Q4: concepts whose net interaction with `a` passes `filter`.
pub fn q4(
    kb: &FrozenKb,
    a: &ConceptPath,
    filter: SignFilter,
    direction: Flow,
    max_len: usize,
) -> Result<BTreeSet<(ConceptPath, Sign)>, QueryError> {
    require(kb, a)?;
    if max_len == 0 {
        return Err(QueryError::ZeroMaxLen);
    }
    Ok(related_by_interaction(
        &InteractionGraph::of_kb(kb),
        a,
        filter,
        direction,
        max_len,
    ))
}

pub(crate) fn related_by_interaction(
    graph: &InteractionGraph,
    a: &ConceptPath,
    filter: SignFilter,
    direction: Flow,
    max_len: usize,
) -> BTreeSet<(ConceptPath, Sign)> {
    graph
        .paths_from(a, direction, max_len)
        .into_iter()
        .filter_map(|(other, paths)| {
            let net = parallel_fold(paths.iter().map(|p| p.folded)).ok()?;
            filter.accepts(net).then_some((other, net))
        })
        .collect()
}

/// Answer to any [`QueryForm`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "answer", rename_all = "snake_case")]
pub enum QueryAnswer {
    Holds {
        holds: bool,
    },
    Concepts {
        concepts: Vec<ConceptPath>,
    },
    Net {
        /// For a sign-filtered Q3: whether the net sign matches.
        #[serde(skip_serializing_if = "Option::is_none")]
        holds: Option<bool>,
        #[serde(flatten)]
        result: NetInteraction,
    },
    Signed {
        related: Vec<(ConceptPath, Sign)>,
    },
}

/// Runs any query form.
pub fn run(kb: &FrozenKb, form: &QueryForm, max_len: usize) -> Result<QueryAnswer, QueryError> {
    Ok(match form {
        QueryForm::Q1 { a, b, cat } => QueryAnswer::Holds {
            holds: q1(kb, a, b, *cat)?,
        },
        QueryForm::Q2 { a, cat, direction } => QueryAnswer::Concepts {
            concepts: q2(kb, a, *cat, *direction)?,
        },
        QueryForm::Q3 { a, b, filter } => {
            let result = q3(kb, a, b, max_len)?;
            let holds = match filter {
                SignFilter::Any => None,
                SignFilter::Exact(_) => Some(result.net.is_some_and(|s| filter.accepts(s))),
            };
            QueryAnswer::Net { holds, result }
        }
        QueryForm::Q4 {
            a,
            filter,
            direction,
        } => QueryAnswer::Signed {
            related: q4(kb, a, *filter, *direction, max_len)?
                .into_iter()
                .collect(),
        },
    })
}
