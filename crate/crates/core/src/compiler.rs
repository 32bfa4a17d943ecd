//! Inheritance compilation.
//!
//! [`compile`] turns a [`SourceKb`] into a [`CompiledKb`] in which every
//! inherited property, interaction and value has been materialized by
//! copying the parent's description subtree under the child and rewriting
//! the parent context to the child context. The result carries provenance
//! for every edge and value, and a [`CompileReport`] listing shadowed
//! declarations and consistency violations. A clean compilation can be
//! frozen into a shareable read-only [`FrozenKb`].
//!
//! Slot resolution: a local declaration always wins. Among inherited
//! candidates, structural copy beats specialization beats equivalence, and
//! within one categorizer the candidate copied by the nearest enclosing
//! concept wins. PARTOF carries membership only and copies nothing.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::Sign;
use crate::dsl::{Declaration, SourceKb, Span};
use crate::model::{Assertion, Atom, Categorizer, ConceptPath, ContextTree, Interaction};
use crate::query::CategoryIndex;

pub const DEFAULT_MAX_DEPTH: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompileOptions {
    /// Longest allowed context chain, in segments.
    pub max_depth: usize,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

/// Where a compiled edge or value came from.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Local,
    /// Copied from the description of `from`, a direct categorizer parent.
    InheritedFrom {
        from: ConceptPath,
        via: Categorizer,
    },
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Local => f.write_str("local"),
            Provenance::InheritedFrom { from, via } => {
                write!(f, "inherited from {} via {via}", from.to_source())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueEntry {
    pub value: Atom,
    pub provenance: Provenance,
    /// Differing candidates this entry took precedence over.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shadowed: Vec<Provenance>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeEntry {
    pub sign: Sign,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shadowed: Vec<Provenance>,
}

/// A position that holds at most one compiled assertion.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    Value(ConceptPath),
    Interaction(ConceptPath, ConceptPath),
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slot::Value(attr) => write!(f, "value of {}", attr.to_source()),
            Slot::Interaction(s, t) => {
                write!(f, "interaction {} -> {}", s.to_source(), t.to_source())
            }
        }
    }
}

/// A shadowed declaration: `chosen` won the slot over `shadowed`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Conflict {
    pub slot: Slot,
    pub chosen: Provenance,
    pub chosen_content: String,
    pub shadowed: Provenance,
    pub shadowed_content: String,
}

impl fmt::Display for Conflict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: `{}` ({}) shadows `{}` ({})",
            self.slot, self.chosen_content, self.chosen, self.shadowed_content, self.shadowed
        )
    }
}

fn render_path(path: &[ConceptPath], sep: &str) -> String {
    path.iter()
        .map(ConceptPath::to_source)
        .collect::<Vec<_>>()
        .join(sep)
}

fn render_candidates(candidates: &[(String, Provenance)]) -> String {
    candidates
        .iter()
        .map(|(content, prov)| format!("`{content}` ({prov})"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn render_located(values: &[(String, Span)]) -> String {
    values
        .iter()
        .map(|(v, span)| format!("`{v}` at {span}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// A consistency violation. Any of these prevents freezing.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("concept {concept} has {depth} segments, above the limit of {max}")]
    DepthExceeded {
        concept: ConceptPath,
        depth: usize,
        max: usize,
    },
    #[error("interaction from {0} to itself")]
    SelfInteraction(ConceptPath),
    #[error("conflicting local values for {attribute}: {}", render_located(.values))]
    ConflictingLocalValues {
        attribute: ConceptPath,
        values: Vec<(String, Span)>,
    },
    #[error("conflicting local interactions {} -> {}: {}", .from.to_source(), .to.to_source(), render_located(.signs))]
    ConflictingLocalInteractions {
        from: ConceptPath,
        to: ConceptPath,
        signs: Vec<(String, Span)>,
    },
    #[error("{kind} cycle: {}", render_path(.cycle, " -> "))]
    CategorizerCycle {
        kind: Categorizer,
        cycle: Vec<ConceptPath>,
    },
    #[error("inheritance cycle across categorizers: {}", render_path(.cycle, " -> "))]
    InheritanceCycle { cycle: Vec<ConceptPath> },
    #[error("{} {kind} {}: the child lies inside the parent's own description", .child.to_source(), .parent.to_source())]
    ChildInsideParent {
        child: ConceptPath,
        kind: Categorizer,
        parent: ConceptPath,
    },
    #[error("SC is irreflexive: {} sc {}", .0.to_source(), .0.to_source())]
    ScReflexive(ConceptPath),
    #[error("SC is antisymmetric: {} and {} are structural copies of each other", .0.to_source(), .1.to_source())]
    ScMutual(ConceptPath, ConceptPath),
    #[error("temporal cycle among precedence/cause/inhibit edges: {}", render_path(.cycle, " => "))]
    TemporalCycle { cycle: Vec<ConceptPath> },
    #[error("influence {} from {} to {} contradicts the precedence chain {}", .edge.sign, .edge.source.to_source(), .edge.target.to_source(), render_path(.chain, " => "))]
    TemporalInversion {
        edge: Interaction,
        chain: Vec<ConceptPath>,
    },
    #[error("contradictory inherited descriptions for {slot}: {}", render_candidates(.candidates))]
    InheritanceConflict {
        slot: Slot,
        candidates: Vec<(String, Provenance)>,
    },
    #[error("inheritance did not reach a fixed point after {0} rounds")]
    NotConverged(usize),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileStats {
    pub concepts: usize,
    pub interactions: usize,
    pub values: usize,
    pub categorizations: BTreeMap<Categorizer, usize>,
    pub inherited_interactions: usize,
    pub inherited_values: usize,
}

#[derive(Clone, Debug, Default)]
pub struct CompileReport {
    pub conflicts: Vec<Conflict>,
    pub errors: Vec<Violation>,
    /// Non-fatal notes, e.g. interactions not carried across an SC boundary.
    pub notes: Vec<String>,
    pub stats: CompileStats,
}

impl CompileReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

impl fmt::Display for CompileReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.stats;
        writeln!(
            f,
            "{} concepts, {} interactions ({} inherited), {} values ({} inherited)",
            s.concepts, s.interactions, s.inherited_interactions, s.values, s.inherited_values
        )?;
        for conflict in &self.conflicts {
            writeln!(f, "shadowed: {conflict}")?;
        }
        for note in &self.notes {
            writeln!(f, "note: {note}")?;
        }
        for err in &self.errors {
            writeln!(f, "error: {err}")?;
        }
        write!(f, "{} errors", self.errors.len())
    }
}

/// The compiled network: context tree, categorizer graphs, interaction
/// graph and value assignments, all with inheritance materialized.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompiledKb {
    pub(crate) tree: ContextTree,
    pub(crate) categorizations: BTreeMap<Categorizer, BTreeSet<(ConceptPath, ConceptPath)>>,
    pub(crate) interactions: BTreeMap<(ConceptPath, ConceptPath), EdgeEntry>,
    pub(crate) values: BTreeMap<ConceptPath, ValueEntry>,
}

impl CompiledKb {
    pub(crate) fn empty() -> CompiledKb {
        CompiledKb {
            tree: ContextTree::new(),
            categorizations: Categorizer::ALL
                .into_iter()
                .map(|c| (c, BTreeSet::new()))
                .collect(),
            interactions: BTreeMap::new(),
            values: BTreeMap::new(),
        }
    }

    pub fn context_tree(&self) -> &ContextTree {
        &self.tree
    }

    pub fn contains(&self, concept: &ConceptPath) -> bool {
        self.tree.contains(concept)
    }

    pub fn concepts(&self) -> impl Iterator<Item = &ConceptPath> {
        self.tree.concepts()
    }

    /// Declared `(child, parent)` pairs of one categorizer. EQV pairs are
    /// stored in both directions.
    pub fn categorizations(&self, kind: Categorizer) -> &BTreeSet<(ConceptPath, ConceptPath)> {
        &self.categorizations[&kind]
    }

    pub fn interactions(&self) -> impl Iterator<Item = (Interaction, &EdgeEntry)> {
        self.interactions.iter().map(|((s, t), entry)| {
            (
                Interaction {
                    source: s.clone(),
                    sign: entry.sign,
                    target: t.clone(),
                },
                entry,
            )
        })
    }

    pub fn interaction(&self, source: &ConceptPath, target: &ConceptPath) -> Option<&EdgeEntry> {
        self.interactions.get(&(source.clone(), target.clone()))
    }

    pub fn value(&self, attribute: &ConceptPath) -> Option<&ValueEntry> {
        self.values.get(attribute)
    }

    pub fn values(&self) -> impl Iterator<Item = (&ConceptPath, &ValueEntry)> {
        self.values.iter()
    }

    pub fn stats(&self) -> CompileStats {
        let inherited = |p: &Provenance| *p != Provenance::Local;
        CompileStats {
            concepts: self.tree.len(),
            interactions: self.interactions.len(),
            values: self.values.len(),
            categorizations: self
                .categorizations
                .iter()
                .map(|(k, v)| (*k, v.len()))
                .collect(),
            inherited_interactions: self
                .interactions
                .values()
                .filter(|e| inherited(&e.provenance))
                .count(),
            inherited_values: self
                .values
                .values()
                .filter(|e| inherited(&e.provenance))
                .count(),
        }
    }
}

/// Output of [`compile`]: the compiled network plus its report.
#[derive(Clone, Debug)]
pub struct Compilation {
    pub kb: CompiledKb,
    pub report: CompileReport,
}

#[derive(Debug, Clone, Error)]
#[error("cannot freeze a knowledge base with {} consistency error(s)", .errors.len())]
pub struct FreezeError {
    pub errors: Vec<Violation>,
}

impl Compilation {
    /// Seals the knowledge base. Refused while the report lists errors.
    pub fn freeze(self) -> Result<FrozenKb, FreezeError> {
        if !self.report.errors.is_empty() {
            return Err(FreezeError {
                errors: self.report.errors,
            });
        }
        Ok(FrozenKb::seal(self.kb, self.report.stats))
    }
}

/// A read-only, cheaply clonable handle to a compiled knowledge base.
///
/// There are no mutating methods; sharing across threads is free.
#[derive(Clone, Debug)]
pub struct FrozenKb {
    inner: Arc<FrozenInner>,
}

#[derive(Debug)]
struct FrozenInner {
    kb: CompiledKb,
    index: CategoryIndex,
    stats: CompileStats,
}

impl FrozenKb {
    pub(crate) fn seal(kb: CompiledKb, stats: CompileStats) -> FrozenKb {
        let index = CategoryIndex::build(&kb);
        FrozenKb {
            inner: Arc::new(FrozenInner { kb, index, stats }),
        }
    }

    pub fn stats(&self) -> &CompileStats {
        &self.inner.stats
    }

    pub(crate) fn index(&self) -> &CategoryIndex {
        &self.inner.index
    }

    /// Transitive closure of the SC relation as `(copy, original)` pairs.
    pub fn sc_closure(&self) -> BTreeSet<(ConceptPath, ConceptPath)> {
        sc_closure(&self.inner.kb)
    }
}

impl Deref for FrozenKb {
    type Target = CompiledKb;

    fn deref(&self) -> &CompiledKb {
        &self.inner.kb
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Rank {
    categorizer: u8,
    depth: usize,
}

const LOCAL_RANK: Rank = Rank {
    categorizer: 0,
    depth: 0,
};

fn categorizer_rank(kind: Categorizer) -> u8 {
    match kind {
        Categorizer::Sc => 1,
        Categorizer::Ako => 2,
        Categorizer::Eqv => 3,
        Categorizer::Partof => 4,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Content {
    Value(Atom),
    Sign(Sign),
}

impl fmt::Display for Content {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Content::Value(v) => write!(f, "{}", v.to_source()),
            Content::Sign(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Clone, Debug)]
struct Candidate {
    content: Content,
    provenance: Provenance,
    rank: Rank,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct State {
    tree: ContextTree,
    interactions: BTreeMap<(ConceptPath, ConceptPath), EdgeEntry>,
    values: BTreeMap<ConceptPath, ValueEntry>,
}

struct InheritanceEdge {
    child: ConceptPath,
    parent: ConceptPath,
    kind: Categorizer,
}

/// Compiles a parsed knowledge base. Never fails outright: problems are
/// collected in the report and block [`Compilation::freeze`].
pub fn compile(src: &SourceKb, options: &CompileOptions) -> Compilation {
    let mut report = CompileReport::default();
    let mut kb = CompiledKb::empty();

    let mut local_values: BTreeMap<ConceptPath, Vec<(Atom, Span)>> = BTreeMap::new();
    let mut local_edges: BTreeMap<(ConceptPath, ConceptPath), Vec<(Sign, Span)>> = BTreeMap::new();

    for (decl, span) in src.iter() {
        let concepts: Vec<&ConceptPath> = match decl {
            Declaration::Concept(c) => vec![c],
            Declaration::Assertion(a) => a.concepts(),
        };
        for c in concepts {
            kb.tree.insert(c);
        }
        match decl {
            Declaration::Concept(_) => {}
            Declaration::Assertion(Assertion::Categorization {
                child,
                kind,
                parent,
            }) => {
                let edges = kb.categorizations.get_mut(kind).expect("all kinds present");
                edges.insert((child.clone(), parent.clone()));
                if *kind == Categorizer::Eqv {
                    edges.insert((parent.clone(), child.clone()));
                }
            }
            Declaration::Assertion(Assertion::Interaction(edge)) => {
                if edge.source == edge.target {
                    report
                        .errors
                        .push(Violation::SelfInteraction(edge.source.clone()));
                    continue;
                }
                let slot = local_edges.entry(edge.endpoints()).or_default();
                if !slot.iter().any(|(s, _)| *s == edge.sign) {
                    slot.push((edge.sign, span));
                }
            }
            Declaration::Assertion(Assertion::ValueAssignment { attribute, value }) => {
                let slot = local_values.entry(attribute.clone()).or_default();
                if !slot.iter().any(|(v, _)| v == value) {
                    slot.push((value.clone(), span));
                }
            }
        }
    }

    for concept in kb.tree.concepts() {
        if concept.len() > options.max_depth {
            report.errors.push(Violation::DepthExceeded {
                concept: concept.clone(),
                depth: concept.len(),
                max: options.max_depth,
            });
        }
    }

    let mut locals: BTreeMap<Slot, Candidate> = BTreeMap::new();
    for (attribute, values) in local_values {
        if values.len() > 1 {
            report.errors.push(Violation::ConflictingLocalValues {
                attribute,
                values: values.iter().map(|(v, s)| (v.to_source(), *s)).collect(),
            });
            continue;
        }
        let (value, _) = values.into_iter().next().expect("nonempty");
        locals.insert(
            Slot::Value(attribute),
            Candidate {
                content: Content::Value(value),
                provenance: Provenance::Local,
                rank: LOCAL_RANK,
            },
        );
    }
    for ((source, target), signs) in local_edges {
        if signs.len() > 1 {
            report.errors.push(Violation::ConflictingLocalInteractions {
                from: source,
                to: target,
                signs: signs.iter().map(|(s, sp)| (s.to_string(), *sp)).collect(),
            });
            continue;
        }
        locals.insert(
            Slot::Interaction(source, target),
            Candidate {
                content: Content::Sign(signs[0].0),
                provenance: Provenance::Local,
                rank: LOCAL_RANK,
            },
        );
    }

    let structural = check_categorizers(&kb);
    let structurally_sound = structural.is_empty();
    report.errors.extend(structural);

    let base = State {
        tree: kb.tree.clone(),
        interactions: BTreeMap::new(),
        values: BTreeMap::new(),
    };
    let state = if structurally_sound && report.errors.is_empty() {
        let edges = inheritance_edges(&kb);
        run_inheritance(base, &locals, &edges, options, &mut report)
    } else {
        // Inheritance over an inconsistent categorizer graph may not
        // terminate; keep only local declarations.
        let (state, _) = resolve_round(&base, &locals, &[], options);
        state
    };

    kb.tree = state.tree;
    kb.interactions = state.interactions;
    kb.values = state.values;

    if structurally_sound {
        report.errors.extend(check_temporal(&kb));
    }
    report.stats = kb.stats();
    Compilation { kb, report }
}

/// Re-runs every consistency check on an already compiled network, e.g.
/// one loaded from a snapshot.
pub(crate) fn validate(kb: &CompiledKb, options: &CompileOptions) -> Vec<Violation> {
    let mut errors = Vec::new();
    for concept in kb.tree.concepts() {
        if concept.len() > options.max_depth {
            errors.push(Violation::DepthExceeded {
                concept: concept.clone(),
                depth: concept.len(),
                max: options.max_depth,
            });
        }
    }
    for (source, target) in kb.interactions.keys() {
        if source == target {
            errors.push(Violation::SelfInteraction(source.clone()));
        }
    }
    let structural = check_categorizers(kb);
    let sound = structural.is_empty();
    errors.extend(structural);
    if sound {
        errors.extend(check_temporal(kb));
    }
    errors
}

/// Cycle and axiom checks on the declared categorizer graphs.
fn check_categorizers(kb: &CompiledKb) -> Vec<Violation> {
    let mut errors = check_sc(kb).violations;
    for kind in [Categorizer::Ako, Categorizer::Partof, Categorizer::Sc] {
        let edges = &kb.categorizations[&kind];
        if kind == Categorizer::Sc && !errors.is_empty() {
            continue;
        }
        if let Some(cycle) = find_cycle(edges.iter().cloned()) {
            errors.push(Violation::CategorizerCycle { kind, cycle });
        }
    }
    if errors.is_empty() {
        let combined = kb.categorizations[&Categorizer::Ako]
            .iter()
            .chain(kb.categorizations[&Categorizer::Sc].iter())
            .cloned();
        if let Some(cycle) = find_cycle(combined) {
            errors.push(Violation::InheritanceCycle { cycle });
        }
    }
    for kind in [Categorizer::Ako, Categorizer::Sc, Categorizer::Eqv] {
        for (child, parent) in &kb.categorizations[&kind] {
            if child != parent && child.is_within(parent) {
                errors.push(Violation::ChildInsideParent {
                    child: child.clone(),
                    kind,
                    parent: parent.clone(),
                });
            }
        }
    }
    errors
}

/// Result of [`check_sc`].
#[derive(Clone, Debug, Default)]
pub struct ScCheck {
    pub violations: Vec<Violation>,
    /// `(copy, original)` pairs closed under transitivity.
    pub closure: BTreeSet<(ConceptPath, ConceptPath)>,
}

/// Checks the SC axioms on declared edges and materializes the closure.
pub fn check_sc(kb: &CompiledKb) -> ScCheck {
    let edges = &kb.categorizations[&Categorizer::Sc];
    let mut violations = Vec::new();
    for (a, b) in edges {
        if a == b {
            violations.push(Violation::ScReflexive(a.clone()));
        } else if a < b && edges.contains(&(b.clone(), a.clone())) {
            violations.push(Violation::ScMutual(a.clone(), b.clone()));
        }
    }
    ScCheck {
        violations,
        closure: sc_closure(kb),
    }
}

fn sc_closure(kb: &CompiledKb) -> BTreeSet<(ConceptPath, ConceptPath)> {
    let adjacency = adjacency(kb.categorizations[&Categorizer::Sc].iter().cloned());
    let mut closure = BTreeSet::new();
    for start in adjacency.keys() {
        for reached in reachable(&adjacency, start) {
            closure.insert((start.clone(), reached));
        }
    }
    closure
}

fn adjacency<I>(edges: I) -> BTreeMap<ConceptPath, BTreeSet<ConceptPath>>
where
    I: IntoIterator<Item = (ConceptPath, ConceptPath)>,
{
    let mut adj: BTreeMap<ConceptPath, BTreeSet<ConceptPath>> = BTreeMap::new();
    for (a, b) in edges {
        adj.entry(a).or_default().insert(b);
    }
    adj
}

fn reachable(
    adj: &BTreeMap<ConceptPath, BTreeSet<ConceptPath>>,
    start: &ConceptPath,
) -> BTreeSet<ConceptPath> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![start];
    while let Some(node) = stack.pop() {
        for next in adj.get(node).into_iter().flatten() {
            if seen.insert(next.clone()) {
                stack.push(next);
            }
        }
    }
    seen
}

/// Shortest path from `from` to `to`, both included. When `from == to` the
/// result is a shortest cycle through `from`.
fn witness_path(
    adj: &BTreeMap<ConceptPath, BTreeSet<ConceptPath>>,
    from: &ConceptPath,
    to: &ConceptPath,
) -> Option<Vec<ConceptPath>> {
    let mut parent: BTreeMap<&ConceptPath, &ConceptPath> = BTreeMap::new();
    let mut visited = BTreeSet::from([from]);
    let mut queue = VecDeque::from([from]);
    while let Some(node) = queue.pop_front() {
        for next in adj.get(node).into_iter().flatten() {
            if next == to {
                let mut path = vec![to.clone()];
                let mut cur = node;
                loop {
                    path.push(cur.clone());
                    if cur == from {
                        break;
                    }
                    cur = parent[cur];
                }
                path.reverse();
                return Some(path);
            }
            if visited.insert(next) {
                parent.insert(next, node);
                queue.push_back(next);
            }
        }
    }
    None
}

/// Some directed cycle, as a closed vertex sequence, if the edges contain one.
fn find_cycle<I>(edges: I) -> Option<Vec<ConceptPath>>
where
    I: IntoIterator<Item = (ConceptPath, ConceptPath)>,
{
    let adj = adjacency(edges);
    adj.keys()
        .find_map(|start| witness_path(&adj, start, start))
}

fn inheritance_edges(kb: &CompiledKb) -> Vec<InheritanceEdge> {
    let mut edges = Vec::new();
    for kind in [Categorizer::Sc, Categorizer::Ako] {
        for (child, parent) in &kb.categorizations[&kind] {
            edges.push(InheritanceEdge {
                child: child.clone(),
                parent: parent.clone(),
                kind,
            });
        }
    }
    // Each equivalence class shares its description through its least member.
    for class in equivalence_classes(&kb.categorizations[&Categorizer::Eqv]) {
        let mut members = class.into_iter();
        let representative = members.next().expect("classes are nonempty");
        for member in members {
            edges.push(InheritanceEdge {
                child: representative.clone(),
                parent: member.clone(),
                kind: Categorizer::Eqv,
            });
            edges.push(InheritanceEdge {
                child: member,
                parent: representative.clone(),
                kind: Categorizer::Eqv,
            });
        }
    }
    edges
}

pub(crate) fn equivalence_classes(
    pairs: &BTreeSet<(ConceptPath, ConceptPath)>,
) -> Vec<BTreeSet<ConceptPath>> {
    let adj = adjacency(pairs.iter().cloned());
    let mut assigned = BTreeSet::new();
    let mut classes = Vec::new();
    for start in adj.keys() {
        if assigned.contains(start) {
            continue;
        }
        let mut class = reachable(&adj, start);
        class.insert(start.clone());
        assigned.extend(class.iter().cloned());
        classes.push(class);
    }
    classes
}

fn run_inheritance(
    base: State,
    locals: &BTreeMap<Slot, Candidate>,
    edges: &[InheritanceEdge],
    options: &CompileOptions,
    report: &mut CompileReport,
) -> State {
    let limit = 4 * (edges.len() + 2) + options.max_depth;
    let (mut state, _) = resolve_round(&base, locals, &[], options);
    for _ in 0..limit {
        let (next, outcome) = resolve_round(&state, locals, edges, options);
        if next == state {
            report.conflicts.extend(outcome.conflicts);
            report.errors.extend(outcome.errors);
            report.notes.extend(outcome.notes);
            return next;
        }
        if !outcome.depth_errors.is_empty() {
            report.errors.extend(outcome.depth_errors);
            return next;
        }
        state = next;
    }
    report.errors.push(Violation::NotConverged(limit));
    state
}

#[derive(Default)]
struct RoundOutcome {
    conflicts: Vec<Conflict>,
    errors: Vec<Violation>,
    depth_errors: Vec<Violation>,
    notes: Vec<String>,
}

/// One Jacobi step: every slot is re-resolved from the local declarations
/// and the copies implied by the previous state.
fn resolve_round(
    prev: &State,
    locals: &BTreeMap<Slot, Candidate>,
    edges: &[InheritanceEdge],
    options: &CompileOptions,
) -> (State, RoundOutcome) {
    let mut outcome = RoundOutcome::default();
    let mut candidates: BTreeMap<Slot, Vec<Candidate>> = BTreeMap::new();
    for (slot, cand) in locals {
        candidates
            .entry(slot.clone())
            .or_default()
            .push(cand.clone());
    }

    let mut tree = prev.tree.clone();
    for edge in edges {
        let (parent, child) = (&edge.parent, &edge.child);
        let provenance = Provenance::InheritedFrom {
            from: parent.clone(),
            via: edge.kind,
        };
        let categorizer = categorizer_rank(edge.kind);
        let rank_at = |node: &ConceptPath| Rank {
            categorizer,
            depth: node.len() - parent.len(),
        };

        let mut subtree: Vec<&ConceptPath> = vec![parent];
        let description = prev.tree.description_closure(parent).unwrap_or_default();
        subtree.extend(description.iter());
        for node in subtree {
            let copy = node.rebase(parent, child).expect("inside parent");
            if copy.len() > options.max_depth && !tree.contains(&copy) {
                outcome.depth_errors.push(Violation::DepthExceeded {
                    depth: copy.len(),
                    concept: copy.clone(),
                    max: options.max_depth,
                });
            }
            tree.insert(&copy);
        }

        for (attribute, entry) in &prev.values {
            if let Some(copy) = attribute.rebase(parent, child) {
                candidates
                    .entry(Slot::Value(copy))
                    .or_default()
                    .push(Candidate {
                        content: Content::Value(entry.value.clone()),
                        provenance: provenance.clone(),
                        rank: rank_at(attribute),
                    });
            }
        }

        for ((source, target), entry) in &prev.interactions {
            let source_in = source.is_within(parent);
            let target_in = target.is_within(parent);
            if !source_in && !target_in {
                continue;
            }
            if edge.kind == Categorizer::Sc && !(source_in && target_in) {
                outcome.notes.push(format!(
                    "{} sc {}: interaction {} {} {} crosses the copied description and was not copied",
                    child.to_source(),
                    parent.to_source(),
                    source.to_source(),
                    entry.sign,
                    target.to_source()
                ));
                continue;
            }
            let new_source = source
                .rebase(parent, child)
                .unwrap_or_else(|| source.clone());
            let new_target = target
                .rebase(parent, child)
                .unwrap_or_else(|| target.clone());
            if new_source == new_target {
                continue;
            }
            let depth = [(source_in, source), (target_in, target)]
                .into_iter()
                .filter(|(inside, _)| *inside)
                .map(|(_, node)| rank_at(node).depth)
                .min()
                .expect("one endpoint inside");
            let copy = Interaction::new(new_source, entry.sign, new_target);
            candidates
                .entry(Slot::Interaction(copy.source, copy.target))
                .or_default()
                .push(Candidate {
                    content: Content::Sign(entry.sign),
                    provenance: provenance.clone(),
                    rank: Rank { categorizer, depth },
                });
        }
    }
    outcome.notes.sort();
    outcome.notes.dedup();

    let mut interactions = BTreeMap::new();
    let mut values = BTreeMap::new();
    for (slot, mut cands) in candidates {
        cands.sort_by(|a, b| {
            (a.rank, &a.provenance, &a.content).cmp(&(b.rank, &b.provenance, &b.content))
        });
        let best = cands[0].clone();
        let mut tied: Vec<(String, Provenance)> = cands
            .iter()
            .filter(|c| c.rank == best.rank && c.content != best.content)
            .map(|c| (c.content.to_string(), c.provenance.clone()))
            .collect();
        if !tied.is_empty() {
            tied.insert(0, (best.content.to_string(), best.provenance.clone()));
            outcome.errors.push(Violation::InheritanceConflict {
                slot: slot.clone(),
                candidates: tied,
            });
        }
        let mut shadowed = Vec::new();
        for cand in cands
            .iter()
            .filter(|c| c.rank > best.rank && c.content != best.content)
        {
            if shadowed.contains(&cand.provenance) {
                continue;
            }
            shadowed.push(cand.provenance.clone());
            outcome.conflicts.push(Conflict {
                slot: slot.clone(),
                chosen: best.provenance.clone(),
                chosen_content: best.content.to_string(),
                shadowed: cand.provenance.clone(),
                shadowed_content: cand.content.to_string(),
            });
        }
        match (slot, best.content) {
            (Slot::Value(attribute), Content::Value(value)) => {
                tree.insert(&attribute);
                values.insert(
                    attribute,
                    ValueEntry {
                        value,
                        provenance: best.provenance,
                        shadowed,
                    },
                );
            }
            (Slot::Interaction(source, target), Content::Sign(sign)) => {
                tree.insert(&source);
                tree.insert(&target);
                interactions.insert(
                    (source, target),
                    EdgeEntry {
                        sign,
                        provenance: best.provenance,
                        shadowed,
                    },
                );
            }
            _ => unreachable!("slot and content kinds always agree"),
        }
    }

    (
        State {
            tree,
            interactions,
            values,
        },
        outcome,
    )
}

/// Temporal consistency of the interaction graph: the precedence, cause and
/// inhibit edges must form a DAG, and no `+`/`-` influence may run against
/// a precedence chain.
pub fn check_temporal(kb: &CompiledKb) -> Vec<Violation> {
    let temporal: Vec<(ConceptPath, ConceptPath)> = kb
        .interactions
        .iter()
        .filter(|(_, e)| e.sign.is_temporal())
        .map(|((s, t), _)| (s.clone(), t.clone()))
        .collect();
    let adj = adjacency(temporal.iter().cloned());
    let mut violations = Vec::new();

    // One cycle report per strongly connected component.
    let mut in_reported_cycle: BTreeSet<ConceptPath> = BTreeSet::new();
    for (source, target) in &temporal {
        if in_reported_cycle.contains(source) {
            continue;
        }
        if let Some(back) = witness_path(&adj, target, source) {
            let mut cycle = vec![source.clone()];
            cycle.extend(back);
            let component: BTreeSet<ConceptPath> = reachable(&adj, source)
                .into_iter()
                .filter(|n| reachable(&adj, n).contains(source))
                .collect();
            in_reported_cycle.extend(component);
            violations.push(Violation::TemporalCycle { cycle });
        }
    }

    for ((source, target), entry) in &kb.interactions {
        if !matches!(entry.sign, Sign::Positive | Sign::Negative) {
            continue;
        }
        if let Some(chain) = witness_path(&adj, target, source) {
            violations.push(Violation::TemporalInversion {
                edge: Interaction {
                    source: source.clone(),
                    sign: entry.sign,
                    target: target.clone(),
                },
                chain,
            });
        }
    }
    violations
}
