use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

use ckn_core::query::{Flow, Hierarchy, SignFilter};
use ckn_core::{Categorizer, ConceptPath};

#[derive(Debug, Parser)]
#[command(
    name = "ckn",
    version,
    about = "Build, query and mine context-sensitive knowledge networks"
)]
pub struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    /// Longest context chain accepted when compiling.
    #[arg(long, global = true, default_value_t = 16,
          value_parser = clap::value_parser!(u32).range(1..))]
    pub max_depth: u32,

    /// Longest interaction path explored by q3, q4 and model queries.
    #[arg(long, global = true, default_value_t = 8,
          value_parser = clap::value_parser!(u32).range(1..))]
    pub max_path_len: u32,

    /// Snapshot written by `ckn build`.
    #[arg(long, global = true, env = "CKN_SNAPSHOT", value_name = "PATH")]
    pub snapshot: Option<PathBuf>,

    /// Compile these `.ckn` files instead of loading a snapshot.
    #[arg(long = "kb", global = true, value_name = "FILE")]
    pub kb: Vec<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse, compile and freeze knowledge-base files into a snapshot.
    Build {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Snapshot destination (defaults to --snapshot, then
        /// `<first file>.snapshot.json`).
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Parse and compile without writing anything.
    Check {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Ask the knowledge base a question.
    #[command(subcommand)]
    Query(QueryCmd),
    /// Extract a qualitative decision model.
    Formulate(FormulateArgs),
    /// Render a saved decision model.
    Export {
        /// Model written by `ckn formulate`.
        model: PathBuf,
        #[arg(long = "to", value_enum, default_value_t = ExportTo::Dot)]
        to: ExportTo,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Read queries from standard input, one per line.
    Repl,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExportTo {
    Dot,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum QueryCmd {
    /// Does A relate to B by a categorizer?
    Q1 {
        #[arg(long)]
        cat: Categorizer,
        a: ConceptPath,
        b: ConceptPath,
    },
    /// Which concepts relate to A by a categorizer?
    #[command(group(ArgGroup::new("direction").required(true).args(["ancestors", "descendants"])))]
    Q2 {
        #[arg(long)]
        cat: Categorizer,
        a: ConceptPath,
        /// Concepts A relates to.
        #[arg(long)]
        ancestors: bool,
        /// Concepts that relate to A.
        #[arg(long)]
        descendants: bool,
    },
    /// Net interaction from A to B, with path evidence.
    Q3 {
        a: ConceptPath,
        b: ConceptPath,
        /// Also report whether the net interaction is this sign.
        #[arg(long, allow_hyphen_values = true)]
        sign: Option<SignFilter>,
    },
    /// Concepts whose net interaction with A matches a sign.
    #[command(group(ArgGroup::new("flow").required(true).args(["affects", "affected_by"])))]
    Q4 {
        a: ConceptPath,
        #[arg(long, default_value = "any", allow_hyphen_values = true)]
        sign: SignFilter,
        /// Concepts A influences.
        #[arg(long)]
        affects: bool,
        /// Concepts that influence A.
        #[arg(long)]
        affected_by: bool,
    },
}

impl QueryCmd {
    pub fn to_form(&self) -> ckn_core::query::QueryForm {
        use ckn_core::query::QueryForm;
        match self {
            QueryCmd::Q1 { cat, a, b } => QueryForm::Q1 {
                a: a.clone(),
                b: b.clone(),
                cat: *cat,
            },
            QueryCmd::Q2 {
                cat, a, ancestors, ..
            } => QueryForm::Q2 {
                a: a.clone(),
                cat: *cat,
                direction: if *ancestors {
                    Hierarchy::Ancestors
                } else {
                    Hierarchy::Descendants
                },
            },
            QueryCmd::Q3 { a, b, sign } => QueryForm::Q3 {
                a: a.clone(),
                b: b.clone(),
                filter: sign.unwrap_or(SignFilter::Any),
            },
            QueryCmd::Q4 {
                a, sign, affects, ..
            } => QueryForm::Q4 {
                a: a.clone(),
                filter: *sign,
                direction: if *affects {
                    Flow::Affects
                } else {
                    Flow::AffectedBy
                },
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct FormulateArgs {
    /// Decision concept; repeat for several.
    #[arg(long = "decision", required = true, value_name = "CONCEPT")]
    pub decisions: Vec<ConceptPath>,
    /// Value concept.
    #[arg(long, value_name = "CONCEPT")]
    pub value: ConceptPath,
    /// Hops explored from the value and from each decision.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    pub depth: u32,
    /// Read the problem in this context and keep only concepts inside it.
    #[arg(long, value_name = "CONCEPT")]
    pub context: Option<ConceptPath>,
    /// Add the specializations of every chance node.
    #[arg(long)]
    pub expand_specializations: bool,
    /// Where to write the model as JSON.
    #[arg(long, value_name = "PATH", default_value = "model.json")]
    pub out: PathBuf,
    /// Also write the model as a DOT graph.
    #[arg(long, value_name = "PATH")]
    pub dot: Option<PathBuf>,
}

/// One REPL line: a query without the `ckn query` prefix.
#[derive(Debug, Parser)]
#[command(name = "query", no_binary_name = true, disable_version_flag = true)]
pub struct ReplLine {
    #[command(subcommand)]
    pub query: QueryCmd,
}
