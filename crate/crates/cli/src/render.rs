use std::fmt::Write as _;
use std::path::PathBuf;

use serde_json::json;

use ckn_core::formulate::{DecisionModel, NodeKind};
use ckn_core::query::{NetInteraction, QueryAnswer, QueryForm};

pub fn pretty(value: &serde_json::Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    text.push('\n');
    text
}

pub fn answer_json(form: &QueryForm, answer: &QueryAnswer) -> String {
    pretty(&json!({
        "schema": "ckn-query",
        "version": 1,
        "query": form,
        "result": answer,
    }))
}

fn net_text(out: &mut String, net: &NetInteraction) {
    let sign = net
        .net
        .map(|s| s.to_string())
        .unwrap_or_else(|| "no path".to_string());
    let _ = writeln!(
        out,
        "{} -> {}: {sign}",
        net.source.to_source(),
        net.target.to_source()
    );
    for path in &net.paths {
        let _ = writeln!(out, "  {path}");
    }
}

pub fn answer_text(answer: &QueryAnswer) -> String {
    let mut out = String::new();
    match answer {
        QueryAnswer::Holds { holds } => {
            let _ = writeln!(out, "{holds}");
        }
        QueryAnswer::Concepts { concepts } => {
            for c in concepts {
                let _ = writeln!(out, "{}", c.to_source());
            }
            if concepts.is_empty() {
                out.push_str("(none)\n");
            }
        }
        QueryAnswer::Net { holds, result } => {
            if let Some(holds) = holds {
                let _ = writeln!(out, "{holds}");
            }
            net_text(&mut out, result);
        }
        QueryAnswer::Signed { related } => {
            for (c, sign) in related {
                let _ = writeln!(out, "{sign} {}", c.to_source());
            }
            if related.is_empty() {
                out.push_str("(none)\n");
            }
        }
    }
    out
}

pub fn model_text(
    model: &DecisionModel,
    evaluation: &[NetInteraction],
    written: &[PathBuf],
) -> String {
    let mut out = String::new();
    let count = |k| model.nodes_of(k).count();
    let _ = writeln!(
        out,
        "{} nodes ({} decision, {} value, {} chance), {} arcs",
        model.nodes().count(),
        count(NodeKind::Decision),
        count(NodeKind::Value),
        count(NodeKind::Chance),
        model.arcs().len()
    );
    for (concept, kind) in model.nodes() {
        let _ = writeln!(out, "  {kind:<8} {}", concept.to_source());
    }
    out.push_str("arcs:\n");
    for arc in model.arcs() {
        let _ = writeln!(
            out,
            "  {} -[{}]-> {}",
            arc.source.to_source(),
            arc.sign,
            arc.target.to_source()
        );
    }
    out.push_str("evaluation:\n");
    for net in evaluation {
        net_text(&mut out, net);
    }
    let _ = writeln!(out, "trace: {} queries", model.trace().len());
    for entry in model.trace() {
        let _ = writeln!(out, "  {entry}");
    }
    for path in written {
        let _ = writeln!(out, "wrote {}", path.display());
    }
    out
}
