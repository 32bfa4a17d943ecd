//! Versioned JSON snapshots of a frozen knowledge base.
//!
//! A snapshot stores the compiled network with provenance so that later
//! queries skip parsing and inheritance. The encoding is canonical: the same
//! knowledge base always produces the same bytes, which makes
//! [`fingerprint`] a stable identity for a build.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::algebra::Sign;
use crate::compiler::{
    validate, CompileOptions, CompileStats, CompiledKb, EdgeEntry, FrozenKb, Provenance,
    ValueEntry, Violation,
};
use crate::model::{Atom, Categorizer, ConceptPath};

pub const FORMAT: &str = "ckn-snapshot";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("not a snapshot: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("not a ckn snapshot (format {0:?})")]
    WrongFormat(String),
    #[error("snapshot version {found} is not supported (expected {VERSION})")]
    VersionMismatch { found: u32 },
    #[error("snapshot refers to undeclared concept {0}")]
    DanglingConcept(ConceptPath),
    #[error("duplicate {0} in snapshot")]
    Duplicate(String),
    #[error("snapshot fails consistency checks:\n{}", render(.0))]
    Inconsistent(Vec<Violation>),
}

fn render(errors: &[Violation]) -> String {
    errors
        .iter()
        .map(|e| format!("  {e}"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Serialize, Deserialize)]
struct Document {
    format: String,
    version: u32,
    concepts: Vec<ConceptPath>,
    categorizations: BTreeMap<Categorizer, Vec<(ConceptPath, ConceptPath)>>,
    interactions: Vec<EdgeRecord>,
    values: Vec<ValueRecord>,
    stats: CompileStats,
}

#[derive(Serialize, Deserialize)]
struct EdgeRecord {
    source: ConceptPath,
    sign: Sign,
    target: ConceptPath,
    provenance: Provenance,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    shadowed: Vec<Provenance>,
}

#[derive(Serialize, Deserialize)]
struct ValueRecord {
    attribute: ConceptPath,
    value: Atom,
    provenance: Provenance,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    shadowed: Vec<Provenance>,
}

fn document(kb: &FrozenKb) -> Document {
    Document {
        format: FORMAT.to_string(),
        version: VERSION,
        concepts: kb.concepts().cloned().collect(),
        categorizations: Categorizer::ALL
            .into_iter()
            .map(|c| (c, kb.categorizations(c).iter().cloned().collect()))
            .collect(),
        interactions: kb
            .interactions()
            .map(|(edge, entry)| EdgeRecord {
                source: edge.source,
                sign: edge.sign,
                target: edge.target,
                provenance: entry.provenance.clone(),
                shadowed: entry.shadowed.clone(),
            })
            .collect(),
        values: kb
            .values()
            .map(|(attribute, entry)| ValueRecord {
                attribute: attribute.clone(),
                value: entry.value.clone(),
                provenance: entry.provenance.clone(),
                shadowed: entry.shadowed.clone(),
            })
            .collect(),
        stats: kb.stats().clone(),
    }
}

/// Canonical pretty-printed JSON, newline terminated.
pub fn to_json(kb: &FrozenKb) -> String {
    let mut text = serde_json::to_string_pretty(&document(kb)).expect("snapshot is serializable");
    text.push('\n');
    text
}

/// Hex SHA-256 of the canonical snapshot.
pub fn fingerprint(kb: &FrozenKb) -> String {
    hex::encode(Sha256::digest(to_json(kb).as_bytes()))
}

/// Loads a snapshot, checking its version and re-running every consistency
/// check before sealing it.
pub fn from_json(text: &str, options: &CompileOptions) -> Result<FrozenKb, SnapshotError> {
    let header: Header = serde_json::from_str(text)?;
    if header.format != FORMAT {
        return Err(SnapshotError::WrongFormat(header.format));
    }
    if header.version != VERSION {
        return Err(SnapshotError::VersionMismatch {
            found: header.version,
        });
    }
    let doc: Document = serde_json::from_str(text)?;

    let mut kb = CompiledKb::empty();
    for concept in &doc.concepts {
        kb.tree.insert(concept);
    }
    let known = |c: &ConceptPath| {
        if kb.tree.contains(c) {
            Ok(())
        } else {
            Err(SnapshotError::DanglingConcept(c.clone()))
        }
    };

    let mut categorizations: BTreeMap<Categorizer, BTreeSet<(ConceptPath, ConceptPath)>> =
        BTreeMap::new();
    for (kind, pairs) in doc.categorizations {
        let set = categorizations.entry(kind).or_default();
        for (child, parent) in pairs {
            known(&child)?;
            known(&parent)?;
            set.insert((child, parent));
        }
    }

    let mut interactions = BTreeMap::new();
    for record in doc.interactions {
        known(&record.source)?;
        known(&record.target)?;
        let key = (record.source, record.target);
        if interactions.contains_key(&key) {
            return Err(SnapshotError::Duplicate(format!(
                "interaction {} -> {}",
                key.0, key.1
            )));
        }
        interactions.insert(
            key,
            EdgeEntry {
                sign: record.sign,
                provenance: record.provenance,
                shadowed: record.shadowed,
            },
        );
    }

    let mut values = BTreeMap::new();
    for record in doc.values {
        known(&record.attribute)?;
        if values.contains_key(&record.attribute) {
            return Err(SnapshotError::Duplicate(format!(
                "value of {}",
                record.attribute
            )));
        }
        values.insert(
            record.attribute,
            ValueEntry {
                value: record.value,
                provenance: record.provenance,
                shadowed: record.shadowed,
            },
        );
    }

    for (kind, set) in categorizations {
        kb.categorizations.insert(kind, set);
    }
    kb.interactions = interactions;
    kb.values = values;

    let errors = validate(&kb, options);
    if !errors.is_empty() {
        return Err(SnapshotError::Inconsistent(errors));
    }
    let stats = kb.stats();
    Ok(FrozenKb::seal(kb, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{compile, dsl};

    const SRC: &str = "value Color#Elephant gray;\n\
        ako Royal_Elephant Elephant;\n\
        ako Royal_Elephant#Thailand Royal_Elephant;\n\
        value Color#Royal_Elephant#Thailand white;\n\
        cause Presence#King#Thailand Presence#Royal_Elephant#Thailand;\n\
        assoc Presence#Mouse Presence#Elephant;\n\
        eqv Pachyderm Elephant;\n";

    fn frozen(text: &str) -> FrozenKb {
        let parsed = dsl::parse(text).unwrap();
        compile(&parsed.kb, &CompileOptions::default())
            .freeze()
            .unwrap()
    }

    #[test]
    fn round_trip_preserves_kb() {
        let kb = frozen(SRC);
        let text = to_json(&kb);
        let back = from_json(&text, &CompileOptions::default()).unwrap();
        assert_eq!(*back, *kb);
        assert_eq!(back.stats(), kb.stats());
        assert_eq!(to_json(&back), text);
    }

    #[test]
    fn fingerprint_is_stable_across_builds() {
        assert_eq!(fingerprint(&frozen(SRC)), fingerprint(&frozen(SRC)));
        let other = frozen("value Color#Elephant white;");
        assert_ne!(fingerprint(&frozen(SRC)), fingerprint(&other));
        assert_eq!(fingerprint(&other).len(), 64);
    }

    #[test]
    fn rejects_version_mismatch() {
        let text = to_json(&frozen(SRC)).replace("\"version\": 1", "\"version\": 2");
        assert!(matches!(
            from_json(&text, &CompileOptions::default()),
            Err(SnapshotError::VersionMismatch { found: 2 })
        ));
    }

    #[test]
    fn rejects_foreign_documents() {
        let opts = CompileOptions::default();
        assert!(matches!(
            from_json("{\"format\": \"other\", \"version\": 1}", &opts),
            Err(SnapshotError::WrongFormat(_))
        ));
        assert!(matches!(
            from_json("not json", &opts),
            Err(SnapshotError::Malformed(_))
        ));
    }

    #[test]
    fn rechecks_consistency_on_load() {
        let text = to_json(&frozen("precede A B; assoc A C;"));
        let tampered = text.replace("\"sign\": \"a\"", "\"sign\": \"p\"").replace(
            "\"source\": \"A\",\n      \"sign\": \"p\",\n      \"target\": \"C\"",
            "\"source\": \"B\",\n      \"sign\": \"p\",\n      \"target\": \"A\"",
        );
        assert_ne!(text, tampered);
        assert!(matches!(
            from_json(&tampered, &CompileOptions::default()),
            Err(SnapshotError::Inconsistent(_))
        ));
    }

    #[test]
    fn rejects_dangling_references() {
        let text = to_json(&frozen("precede A B;"));
        let tampered = text.replace("\"target\": \"B\"", "\"target\": \"Z\"");
        assert!(matches!(
            from_json(&tampered, &CompileOptions::default()),
            Err(SnapshotError::DanglingConcept(_))
        ));
    }
}
