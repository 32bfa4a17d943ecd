//! Decision-model formulation.
//!
//! Given decision concepts and a value concept, [`formulate`] assembles a
//! closed-world qualitative decision model from the knowledge base: it grows
//! backward from the value and forward from the decisions along direct
//! influence arcs, keeps the arcs among the collected concepts, and records
//! for every node and arc the query that introduced it. Precedence-only
//! (`p`) edges carry no influence and are never model arcs.
//!
//! With a context, seeds are read in that context (`Utility#Tourist` under
//! `Thailand` becomes `Utility#Tourist#Thailand`) and concepts outside the
//! context subtree are dropped, so context-specific overrides compiled into
//! the knowledge base shape the model.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::Sign;
use crate::compiler::FrozenKb;
use crate::model::{Categorizer, ConceptPath, Interaction};
use crate::query::{
    q2, Flow, Hierarchy, InteractionGraph, NetInteraction, QueryForm, SignFilter,
    DEFAULT_MAX_PATH_LEN,
};

pub const MODEL_FORMAT: &str = "ckn-decision-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulateError {
    #[error("unknown concept `{}`", .0.to_source())]
    UnknownConcept(ConceptPath),
    #[error("at least one decision concept is required")]
    NoDecision,
    #[error("depth must be at least 1")]
    ZeroDepth,
    #[error("`{}` cannot be both a decision and the value", .0.to_source())]
    ValueIsDecision(ConceptPath),
    #[error("value `{}` has no incoming influence within depth {depth}", .value.to_source())]
    Unformulatable { value: ConceptPath, depth: usize },
    #[error("`{}` is not a node of the model", .0.to_source())]
    NotInModel(ConceptPath),
    #[error("invalid model document: {0}")]
    InvalidDocument(String),
}

/// Role of a node in the decision model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Chance,
    Decision,
    Value,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            NodeKind::Chance => "chance",
            NodeKind::Decision => "decision",
            NodeKind::Value => "value",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FormulationSpec {
    pub decisions: Vec<ConceptPath>,
    pub value: ConceptPath,
    /// Number of hops explored from each seed.
    pub depth: usize,
    pub context: Option<ConceptPath>,
    /// Also add the AKO specializations of every chance node.
    pub expand_specializations: bool,
}

impl FormulationSpec {
    pub fn new(decisions: Vec<ConceptPath>, value: ConceptPath, depth: usize) -> FormulationSpec {
        FormulationSpec {
            decisions,
            value,
            depth,
            context: None,
            expand_specializations: false,
        }
    }

    pub fn in_context(mut self, context: ConceptPath) -> FormulationSpec {
        self.context = Some(context);
        self
    }
}

/// Model element introduced by a trace entry.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "element", rename_all = "lowercase")]
pub enum Traced {
    Node {
        concept: ConceptPath,
    },
    Arc {
        source: ConceptPath,
        target: ConceptPath,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    #[serde(flatten)]
    pub element: Traced,
    pub query: QueryForm,
}

impl fmt::Display for TraceEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.element {
            Traced::Node { concept } => write!(f, "node {}", concept.to_source())?,
            Traced::Arc { source, target } => {
                write!(f, "arc {} -> {}", source.to_source(), target.to_source())?
            }
        }
        write!(f, ": {}", self.query)
    }
}

/// A qualitative decision-model skeleton.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecisionModel {
    nodes: BTreeMap<ConceptPath, NodeKind>,
    arcs: BTreeSet<Interaction>,
    trace: Vec<TraceEntry>,
}

impl DecisionModel {
    pub fn nodes(&self) -> impl Iterator<Item = (&ConceptPath, NodeKind)> {
        self.nodes.iter().map(|(c, k)| (c, *k))
    }

    pub fn kind(&self, concept: &ConceptPath) -> Option<NodeKind> {
        self.nodes.get(concept).copied()
    }

    pub fn nodes_of(&self, kind: NodeKind) -> impl Iterator<Item = &ConceptPath> {
        self.nodes
            .iter()
            .filter(move |(_, k)| **k == kind)
            .map(|(c, _)| c)
    }

    pub fn value(&self) -> &ConceptPath {
        self.nodes_of(NodeKind::Value)
            .next()
            .expect("a model has exactly one value node")
    }

    pub fn arcs(&self) -> &BTreeSet<Interaction> {
        &self.arcs
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    pub fn graph(&self) -> InteractionGraph {
        InteractionGraph::from_edges(self.arcs.iter().cloned())
    }

    fn check(&self) -> Result<(), String> {
        let values = self.nodes_of(NodeKind::Value).count();
        if values != 1 {
            return Err(format!("expected exactly one value node, found {values}"));
        }
        if self.nodes_of(NodeKind::Decision).next().is_none() {
            return Err("no decision node".to_string());
        }
        for arc in &self.arcs {
            for end in [&arc.source, &arc.target] {
                if !self.nodes.contains_key(end) {
                    return Err(format!("arc endpoint {} is not a node", end.to_source()));
                }
            }
            if arc.sign == Sign::Precedence {
                return Err("precedence edges are not model arcs".to_string());
            }
        }
        Ok(())
    }
}

/// Builds a decision model by breadth-limited expansion over direct
/// interaction edges.
pub fn formulate(kb: &FrozenKb, spec: &FormulationSpec) -> Result<DecisionModel, FormulateError> {
    if spec.depth == 0 {
        return Err(FormulateError::ZeroDepth);
    }
    if spec.decisions.is_empty() {
        return Err(FormulateError::NoDecision);
    }
    let in_scope = |c: &ConceptPath| spec.context.as_ref().is_none_or(|ctx| c.is_within(ctx));
    let seed = |c: &ConceptPath| -> Result<ConceptPath, FormulateError> {
        let resolved = match &spec.context {
            Some(ctx) if !ctx.is_universal() && !c.is_within(ctx) => ConceptPath::of(c, ctx),
            _ => c.clone(),
        };
        if !kb.contains(&resolved) {
            return Err(FormulateError::UnknownConcept(resolved));
        }
        Ok(resolved)
    };
    if let Some(ctx) = &spec.context {
        if !kb.contains(ctx) {
            return Err(FormulateError::UnknownConcept(ctx.clone()));
        }
    }

    let value = seed(&spec.value)?;
    let mut nodes = BTreeMap::new();
    let mut trace = Vec::new();
    for d in &spec.decisions {
        let d = seed(d)?;
        if d == value {
            return Err(FormulateError::ValueIsDecision(d));
        }
        nodes.insert(d, NodeKind::Decision);
    }
    nodes.insert(value.clone(), NodeKind::Value);

    let graph = InteractionGraph::from_edges(
        kb.interactions()
            .map(|(edge, _)| edge)
            .filter(|e| e.sign != Sign::Precedence),
    );

    let mut grow = |starts: Vec<ConceptPath>, flow: Flow, nodes: &mut BTreeMap<_, _>| {
        let mut frontier = starts;
        for _ in 0..spec.depth {
            let mut next = Vec::new();
            for here in &frontier {
                for (other, _) in graph.neighbours(here, flow) {
                    if nodes.contains_key(other) || !in_scope(other) {
                        continue;
                    }
                    nodes.insert(other.clone(), NodeKind::Chance);
                    trace.push(TraceEntry {
                        element: Traced::Node {
                            concept: other.clone(),
                        },
                        query: QueryForm::Q4 {
                            a: here.clone(),
                            filter: SignFilter::Any,
                            direction: flow,
                        },
                    });
                    next.push(other.clone());
                }
            }
            frontier = next;
        }
    };
    grow(vec![value.clone()], Flow::AffectedBy, &mut nodes);
    let decisions: Vec<ConceptPath> = nodes
        .iter()
        .filter(|(_, k)| **k == NodeKind::Decision)
        .map(|(c, _)| c.clone())
        .collect();
    grow(decisions, Flow::Affects, &mut nodes);

    if spec.expand_specializations {
        let chance: Vec<ConceptPath> = nodes
            .iter()
            .filter(|(_, k)| **k == NodeKind::Chance)
            .map(|(c, _)| c.clone())
            .collect();
        for c in chance {
            let found = q2(kb, &c, Categorizer::Ako, Hierarchy::Descendants)
                .map_err(|_| FormulateError::UnknownConcept(c.clone()))?;
            for special in found {
                if nodes.contains_key(&special) || !in_scope(&special) {
                    continue;
                }
                nodes.insert(special.clone(), NodeKind::Chance);
                trace.push(TraceEntry {
                    element: Traced::Node { concept: special },
                    query: QueryForm::Q2 {
                        a: c.clone(),
                        cat: Categorizer::Ako,
                        direction: Hierarchy::Descendants,
                    },
                });
            }
        }
    }

    let arcs: BTreeSet<Interaction> = kb
        .interactions()
        .map(|(edge, _)| edge)
        .filter(|e| {
            e.sign != Sign::Precedence
                && nodes.contains_key(&e.source)
                && nodes.contains_key(&e.target)
        })
        .collect();
    for arc in &arcs {
        trace.push(TraceEntry {
            element: Traced::Arc {
                source: arc.source.clone(),
                target: arc.target.clone(),
            },
            query: QueryForm::Q3 {
                a: arc.source.clone(),
                b: arc.target.clone(),
                filter: SignFilter::Exact(arc.sign),
            },
        });
    }

    let reaches_value = arcs
        .iter()
        .any(|a| a.target == value || (a.sign == Sign::Association && a.source == value));
    if !reaches_value {
        return Err(FormulateError::Unformulatable {
            value,
            depth: spec.depth,
        });
    }
    Ok(DecisionModel { nodes, arcs, trace })
}

/// Net interaction between two model nodes over the model's arcs only.
/// Identical endpoints yield the no-path result.
pub fn model_query(
    model: &DecisionModel,
    source: &ConceptPath,
    target: &ConceptPath,
    max_len: usize,
) -> Result<NetInteraction, FormulateError> {
    for c in [source, target] {
        if !model.nodes.contains_key(c) {
            return Err(FormulateError::NotInModel(c.clone()));
        }
    }
    if source == target {
        return Ok(NetInteraction {
            source: source.clone(),
            target: target.clone(),
            net: None,
            paths: Vec::new(),
        });
    }
    Ok(model.graph().net(source, target, max_len.max(1)))
}

/// Net interaction from every decision to the value.
pub fn evaluate(model: &DecisionModel) -> Vec<NetInteraction> {
    let value = model.value();
    model
        .nodes_of(NodeKind::Decision)
        .map(|d| model_query(model, d, value, DEFAULT_MAX_PATH_LEN).expect("members"))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Dot,
    Json,
}

pub fn export(model: &DecisionModel, format: ExportFormat) -> String {
    match format {
        ExportFormat::Dot => to_dot(model),
        ExportFormat::Json => to_json(model),
    }
}

fn dot_id(concept: &ConceptPath) -> String {
    let text = concept.to_source();
    format!("\"{}\"", text.replace('\\', "\\\\").replace('"', "\\\""))
}

fn to_dot(model: &DecisionModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "// {MODEL_FORMAT} v{MODEL_VERSION}");
    out.push_str("digraph decision_model {\n  rankdir=LR;\n");
    for (concept, kind) in model.nodes() {
        let shape = match kind {
            NodeKind::Decision => "box",
            NodeKind::Value => "diamond",
            NodeKind::Chance => "ellipse",
        };
        let _ = writeln!(out, "  {} [shape={shape}];", dot_id(concept));
    }
    for arc in &model.arcs {
        let dir = if arc.sign == Sign::Association {
            ", dir=none"
        } else {
            ""
        };
        let _ = writeln!(
            out,
            "  {} -> {} [label=\"{}\"{dir}];",
            dot_id(&arc.source),
            dot_id(&arc.target),
            arc.sign
        );
    }
    out.push_str("}\n");
    out
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    version: u32,
    nodes: Vec<NodeRecord>,
    arcs: Vec<Interaction>,
    trace: Vec<TraceEntry>,
}

#[derive(Serialize, Deserialize)]
struct NodeRecord {
    concept: ConceptPath,
    kind: NodeKind,
}

fn to_json(model: &DecisionModel) -> String {
    let doc = ModelDocument {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        nodes: model
            .nodes()
            .map(|(concept, kind)| NodeRecord {
                concept: concept.clone(),
                kind,
            })
            .collect(),
        arcs: model.arcs.iter().cloned().collect(),
        trace: model.trace.clone(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("model is serializable");
    text.push('\n');
    text
}

/// Reads a model written by [`export`] in JSON form.
pub fn import_json(text: &str) -> Result<DecisionModel, FormulateError> {
    let invalid = |m: String| FormulateError::InvalidDocument(m);
    let doc: ModelDocument = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
    if doc.format != MODEL_FORMAT {
        return Err(invalid(format!("unexpected format {:?}", doc.format)));
    }
    if doc.version != MODEL_VERSION {
        return Err(invalid(format!(
            "version {} is not supported (expected {MODEL_VERSION})",
            doc.version
        )));
    }
    let mut nodes = BTreeMap::new();
    for record in doc.nodes {
        if nodes.insert(record.concept.clone(), record.kind).is_some() {
            return Err(invalid(format!("duplicate node {}", record.concept)));
        }
    }
    let model = DecisionModel {
        nodes,
        arcs: doc
            .arcs
            .into_iter()
            .map(|a| Interaction::new(a.source, a.sign, a.target))
            .collect(),
        trace: doc.trace,
    };
    model.check().map_err(invalid)?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::{compile, CompileOptions};
    use crate::dsl::parse;

    fn cp(s: &str) -> ConceptPath {
        s.parse().unwrap()
    }

    fn kb(text: &str) -> FrozenKb {
        let c = compile(&parse(text).unwrap().kb, &CompileOptions::default());
        assert!(c.report.is_ok(), "{}", c.report);
        c.freeze().unwrap()
    }

    const SMALL: &str = "influence+ Act Gain;\n\
                         influence- Act Risk;\n\
                         influence- Risk Loss;\n\
                         influence- Loss Gain;\n\
                         precede Weather Act;\n\
                         influence+ Weather Gain;\n\
                         concept Island;\n";

    fn spec(depth: usize) -> FormulationSpec {
        FormulationSpec::new(vec![cp("Act")], cp("Gain"), depth)
    }

    #[test]
    fn collects_nodes_and_arcs() {
        let kb = kb(SMALL);
        let model = formulate(&kb, &spec(3)).unwrap();
        let kinds: Vec<(String, NodeKind)> =
            model.nodes().map(|(c, k)| (c.to_source(), k)).collect();
        assert_eq!(
            kinds,
            vec![
                ("Act".into(), NodeKind::Decision),
                ("Gain".into(), NodeKind::Value),
                ("Loss".into(), NodeKind::Chance),
                ("Risk".into(), NodeKind::Chance),
                ("Weather".into(), NodeKind::Chance),
            ]
        );
        // the precedence edge is not an arc
        assert_eq!(model.arcs().len(), 5);
        assert!(model.arcs().iter().all(|a| a.sign != Sign::Precedence));
        assert!(model.check().is_ok());
    }

    #[test]
    fn every_non_seed_node_is_traced() {
        let kb = kb(SMALL);
        let model = formulate(&kb, &spec(3)).unwrap();
        for (concept, kind) in model.nodes() {
            let traced = model
                .trace()
                .iter()
                .any(|t| matches!(&t.element, Traced::Node { concept: c } if c == concept));
            assert_eq!(traced, kind == NodeKind::Chance, "{concept}");
        }
        for arc in model.arcs() {
            assert!(model.trace().iter().any(|t| t.element
                == Traced::Arc {
                    source: arc.source.clone(),
                    target: arc.target.clone()
                }));
        }
    }

    #[test]
    fn depth_is_monotone() {
        let kb = kb(SMALL);
        let mut previous: Option<DecisionModel> = None;
        for depth in 1..=4 {
            let model = formulate(&kb, &spec(depth)).unwrap();
            if let Some(prev) = previous {
                assert!(prev.nodes().all(|(c, k)| model.kind(c) == Some(k)));
                assert!(prev.arcs().is_subset(model.arcs()));
            }
            previous = Some(model);
        }
        let shallow = formulate(&kb, &spec(1)).unwrap();
        assert!(shallow.kind(&cp("Loss")).is_some());
        assert!(shallow.kind(&cp("Risk")).is_some());
    }

    #[test]
    fn isolated_value_is_unformulatable() {
        let kb = kb(SMALL);
        let spec = FormulationSpec::new(vec![cp("Act")], cp("Island"), 1);
        assert!(matches!(
            formulate(&kb, &spec),
            Err(FormulateError::Unformulatable { .. })
        ));
    }

    #[test]
    fn invalid_specs() {
        let kb = kb(SMALL);
        assert_eq!(
            formulate(&kb, &FormulationSpec::new(vec![cp("Act")], cp("Nope"), 2)),
            Err(FormulateError::UnknownConcept(cp("Nope")))
        );
        assert_eq!(
            formulate(&kb, &FormulationSpec::new(vec![], cp("Gain"), 2)),
            Err(FormulateError::NoDecision)
        );
        assert_eq!(formulate(&kb, &spec(0)), Err(FormulateError::ZeroDepth));
        assert_eq!(
            formulate(&kb, &FormulationSpec::new(vec![cp("Gain")], cp("Gain"), 2)),
            Err(FormulateError::ValueIsDecision(cp("Gain")))
        );
    }

    #[test]
    fn context_seeds_and_filter() {
        let kb = kb("influence+ Act#X Gain#X;\n\
                     influence+ Noise Gain#X;\n\
                     influence- Act#Y Gain#Y;\n");
        let model = formulate(&kb, &spec(2).in_context(cp("X"))).unwrap();
        let names: Vec<String> = model.nodes().map(|(c, _)| c.to_source()).collect();
        assert_eq!(names, vec!["Act#X", "Gain#X"]);
        let other = formulate(&kb, &spec(2).in_context(cp("Y"))).unwrap();
        let signs: Vec<Sign> = other.arcs().iter().map(|a| a.sign).collect();
        assert_eq!(signs, vec![Sign::Negative]);
    }

    #[test]
    fn specialization_expansion() {
        // Storm inherits Weather's arc into Gain unless it overrides it.
        let inherited = kb("influence+ Weather Gain;\n\
                            influence+ Act Gain;\n\
                            ako Storm Weather;\n");
        let plain = formulate(&inherited, &spec(1)).unwrap();
        assert_eq!(plain.kind(&cp("Storm")), Some(NodeKind::Chance));
        let kb = kb("influence+ Weather Gain;\n\
                     influence+ Act Gain;\n\
                     ako Storm Weather;\n\
                     precede Storm Gain;\n");
        let plain = formulate(&kb, &spec(1)).unwrap();
        assert_eq!(plain.kind(&cp("Storm")), None);
        let mut expanded_spec = spec(1);
        expanded_spec.expand_specializations = true;
        let expanded = formulate(&kb, &expanded_spec).unwrap();
        assert_eq!(expanded.kind(&cp("Storm")), Some(NodeKind::Chance));
        assert!(expanded
            .trace()
            .iter()
            .any(|t| matches!(t.query, QueryForm::Q2 { .. })));
    }

    #[test]
    fn model_query_paths() {
        let kb = kb(SMALL);
        let model = formulate(&kb, &spec(3)).unwrap();
        let net = model_query(&model, &cp("Act"), &cp("Gain"), 8).unwrap();
        let folded: BTreeSet<Sign> = net.paths.iter().map(|p| p.folded).collect();
        assert_eq!(folded, BTreeSet::from([Sign::Positive, Sign::Negative]));
        assert_eq!(net.net, Some(Sign::Association));
        let same = model_query(&model, &cp("Gain"), &cp("Gain"), 8).unwrap();
        assert_eq!(same.net, None);
        assert!(same.paths.is_empty());
        assert_eq!(
            model_query(&model, &cp("Island"), &cp("Gain"), 8),
            Err(FormulateError::NotInModel(cp("Island")))
        );
        assert_eq!(evaluate(&model), vec![net]);
    }

    #[test]
    fn dot_export() {
        let kb = kb(SMALL);
        let model = formulate(&kb, &spec(3)).unwrap();
        let dot = export(&model, ExportFormat::Dot);
        assert_eq!(dot.matches("shape=diamond").count(), 1);
        assert_eq!(dot.matches("shape=box").count(), 1);
        assert_eq!(dot.matches("shape=ellipse").count(), 3);
        assert!(dot.contains("\"Act\" -> \"Risk\" [label=\"-\"];"));
        assert_eq!(dot, export(&model, ExportFormat::Dot));
    }

    #[test]
    fn nodes_only_export() {
        let model = DecisionModel {
            nodes: BTreeMap::from([
                (cp("D"), NodeKind::Decision),
                (cp("\"a value\""), NodeKind::Value),
            ]),
            arcs: BTreeSet::new(),
            trace: Vec::new(),
        };
        let dot = export(&model, ExportFormat::Dot);
        assert!(!dot.contains("->"));
        assert!(dot.contains("\"\\\"a value\\\"\" [shape=diamond];"));
        assert_eq!(import_json(&export(&model, ExportFormat::Json)), Ok(model));
    }

    #[test]
    fn json_round_trip() {
        let kb = kb(SMALL);
        let model = formulate(&kb, &spec(3)).unwrap();
        let text = export(&model, ExportFormat::Json);
        let back = import_json(&text).unwrap();
        assert_eq!(back, model);
        assert_eq!(export(&back, ExportFormat::Json), text);
        let bumped = text.replace("\"version\": 1", "\"version\": 9");
        assert!(import_json(&bumped).is_err());
    }
}
