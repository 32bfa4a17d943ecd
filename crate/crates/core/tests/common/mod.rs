#![allow(dead_code)]

use std::path::PathBuf;

use ckn_core::compiler::{compile, Compilation, CompileOptions, FrozenKb};
use ckn_core::dsl::parse;
use ckn_core::ConceptPath;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn fixture_text(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).expect("fixture readable")
}

pub fn compile_text(text: &str) -> Compilation {
    let parsed = parse(text).unwrap_or_else(|e| panic!("parse failed:\n{e}"));
    compile(&parsed.kb, &CompileOptions::default())
}

pub fn frozen(text: &str) -> FrozenKb {
    let compilation = compile_text(text);
    assert!(compilation.report.is_ok(), "{}", compilation.report);
    compilation.freeze().expect("clean compilation freezes")
}

pub fn fixture(name: &str) -> FrozenKb {
    frozen(&fixture_text(name))
}

pub fn cp(s: &str) -> ConceptPath {
    s.parse().unwrap_or_else(|e| panic!("{e}"))
}
