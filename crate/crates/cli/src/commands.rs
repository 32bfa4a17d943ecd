use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use ckn_core::compiler::{compile, Compilation, CompileOptions, FrozenKb};
use ckn_core::dsl::{self, SourceKb};
use ckn_core::formulate::{self, ExportFormat, FormulateError, FormulationSpec};
use ckn_core::query::{self, QueryError};
use ckn_core::snapshot::{self, SnapshotError};

use crate::args::{Cli, Command, ExportTo, Format, FormulateArgs, QueryCmd};
use crate::render;
use crate::repl;
use crate::Failure;

pub fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Build { files, out } => build(cli, files, out.as_deref()),
        Command::Check { files } => check(cli, files),
        Command::Query(q) => {
            let kb = load_kb(cli)?;
            print!("{}", answer(cli, &kb, q)?);
            Ok(())
        }
        Command::Formulate(args) => formulate_cmd(cli, args),
        Command::Export { model, to, out } => export(model, *to, out.as_deref()),
        Command::Repl => {
            let kb = load_kb(cli)?;
            repl::run(cli, &kb)
        }
    }
}

fn options(cli: &Cli) -> CompileOptions {
    CompileOptions {
        max_depth: cli.max_depth as usize,
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text)
        .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))
}

/// Reads and parses every file, reporting diagnostics per file.
fn load_sources(files: &[PathBuf]) -> Result<SourceKb, Failure> {
    let mut kb = SourceKb::new();
    let mut failed = 0;
    for path in files {
        let text = read(path)?;
        match dsl::parse(&text) {
            Ok(parsed) => {
                for w in &parsed.warnings {
                    eprintln!("{}:{w}", path.display());
                }
                kb.extend(parsed.kb);
            }
            Err(failure) => {
                failed += 1;
                for d in &failure.diagnostics {
                    eprintln!("{}:{d}", path.display());
                }
            }
        }
    }
    if failed > 0 {
        return Err(Failure::compile(format!(
            "{failed} file(s) failed to parse"
        )));
    }
    Ok(kb)
}

fn compile_files(cli: &Cli, files: &[PathBuf]) -> Result<Compilation, Failure> {
    let src = load_sources(files)?;
    Ok(compile(&src, &options(cli)))
}

fn report_json(compilation: &Compilation, snapshot: Option<(&Path, &str)>) -> String {
    let report = &compilation.report;
    let strings = |items: Vec<String>| serde_json::Value::from(items);
    let doc = json!({
        "schema": "ckn-build",
        "version": 1,
        "ok": report.is_ok(),
        "stats": report.stats,
        "conflicts": strings(report.conflicts.iter().map(ToString::to_string).collect()),
        "notes": strings(report.notes.clone()),
        "errors": strings(report.errors.iter().map(ToString::to_string).collect()),
        "snapshot": snapshot.map(|(p, _)| p.display().to_string()),
        "fingerprint": snapshot.map(|(_, f)| f.to_string()),
    });
    render::pretty(&doc)
}

/// Prints a compile report; failing reports go to stderr in text mode.
fn print_report(cli: &Cli, compilation: &Compilation, snapshot: Option<(&Path, &str)>) {
    match cli.format {
        Format::Json => {
            print!("{}", report_json(compilation, snapshot));
            for err in &compilation.report.errors {
                eprintln!("error: {err}");
            }
        }
        Format::Text if compilation.report.is_ok() => {
            println!("{}", compilation.report);
            if let Some((path, fingerprint)) = snapshot {
                println!("snapshot {} ({fingerprint})", path.display());
            }
        }
        Format::Text => eprintln!("{}", compilation.report),
    }
}

fn default_snapshot_path(first: &Path) -> PathBuf {
    let stem = first
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "kb".to_string());
    first.with_file_name(format!("{stem}.snapshot.json"))
}

fn build(cli: &Cli, files: &[PathBuf], out: Option<&Path>) -> Result<(), Failure> {
    let compilation = compile_files(cli, files)?;
    if !compilation.report.is_ok() {
        print_report(cli, &compilation, None);
        return Err(Failure::compile(""));
    }
    let path = out
        .map(Path::to_path_buf)
        .or_else(|| cli.snapshot.clone())
        .unwrap_or_else(|| default_snapshot_path(&files[0]));
    let frozen = compilation
        .clone()
        .freeze()
        .map_err(|e| Failure::compile(e.to_string()))?;
    write(&path, &snapshot::to_json(&frozen))?;
    print_report(
        cli,
        &compilation,
        Some((&path, &snapshot::fingerprint(&frozen))),
    );
    Ok(())
}

fn check(cli: &Cli, files: &[PathBuf]) -> Result<(), Failure> {
    let compilation = compile_files(cli, files)?;
    print_report(cli, &compilation, None);
    if compilation.report.is_ok() {
        Ok(())
    } else {
        Err(Failure::compile(""))
    }
}

/// The knowledge base named by `--kb` files or by the snapshot.
pub fn load_kb(cli: &Cli) -> Result<FrozenKb, Failure> {
    if !cli.kb.is_empty() {
        let compilation = compile_files(cli, &cli.kb)?;
        if !compilation.report.is_ok() {
            eprintln!("{}", compilation.report);
            return Err(Failure::compile(""));
        }
        return compilation
            .freeze()
            .map_err(|e| Failure::compile(e.to_string()));
    }
    let Some(path) = &cli.snapshot else {
        return Err(Failure::usage(
            "no knowledge base: pass --snapshot PATH, set CKN_SNAPSHOT, or give --kb FILE",
        ));
    };
    let text = read(path)?;
    snapshot::from_json(&text, &options(cli)).map_err(|e| {
        let message = format!("{}: {e}", path.display());
        match e {
            SnapshotError::Inconsistent(_) => Failure::compile(message),
            _ => Failure::usage(message),
        }
    })
}

fn query_failure(err: QueryError) -> Failure {
    match err {
        QueryError::UnknownConcept(_) => Failure::query(err.to_string()),
        QueryError::SameEndpoints(_) | QueryError::ZeroMaxLen => Failure::usage(err.to_string()),
    }
}

/// Runs one query and renders it in the selected format.
pub fn answer(cli: &Cli, kb: &FrozenKb, q: &QueryCmd) -> Result<String, Failure> {
    let form = q.to_form();
    let result = query::run(kb, &form, cli.max_path_len as usize).map_err(query_failure)?;
    Ok(match cli.format {
        Format::Text => render::answer_text(&result),
        Format::Json => render::answer_json(&form, &result),
    })
}

fn formulate_failure(err: FormulateError) -> Failure {
    match err {
        FormulateError::Unformulatable { .. } => Failure::query(err.to_string()),
        _ => Failure::usage(err.to_string()),
    }
}

fn formulate_cmd(cli: &Cli, args: &FormulateArgs) -> Result<(), Failure> {
    let kb = load_kb(cli)?;
    let spec = FormulationSpec {
        decisions: args.decisions.clone(),
        value: args.value.clone(),
        depth: args.depth as usize,
        context: args.context.clone(),
        expand_specializations: args.expand_specializations,
    };
    let model = formulate::formulate(&kb, &spec).map_err(formulate_failure)?;
    let model_json = formulate::export(&model, ExportFormat::Json);
    write(&args.out, &model_json)?;
    let mut written = vec![args.out.clone()];
    if let Some(dot) = &args.dot {
        write(dot, &formulate::export(&model, ExportFormat::Dot))?;
        written.push(dot.clone());
    }
    let evaluation = formulate::evaluate(&model);
    match cli.format {
        Format::Text => print!("{}", render::model_text(&model, &evaluation, &written)),
        Format::Json => {
            let doc = json!({
                "schema": "ckn-formulate",
                "version": 1,
                "model": serde_json::from_str::<serde_json::Value>(&model_json)
                    .expect("exported model is JSON"),
                "evaluation": evaluation,
                "written": written.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            });
            print!("{}", render::pretty(&doc));
        }
    }
    Ok(())
}

fn export(model: &Path, to: ExportTo, out: Option<&Path>) -> Result<(), Failure> {
    let text = read(model)?;
    let model = formulate::import_json(&text)
        .map_err(|e| Failure::usage(format!("{}: {e}", model.display())))?;
    let format = match to {
        ExportTo::Dot => ExportFormat::Dot,
        ExportTo::Json => ExportFormat::Json,
    };
    let rendered = formulate::export(&model, format);
    match out {
        Some(path) => write(path, &rendered),
        None => {
            print!("{rendered}");
            Ok(())
        }
    }
}
