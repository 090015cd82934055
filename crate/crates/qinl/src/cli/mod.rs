//! The `qinl` command line: argument parsing, run configuration and
//! output assembly. Every command produces a table rendering and a JSON
//! rendering; `--format` picks one.

mod commands;
mod render;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value as Json};

use qinl_core::migration::MigrationOptions;
use qinl_core::schema::SampleConfig;

use crate::surface::Direction;

pub const EXIT_OK: i32 = 0;
/// Violations, unproved equations, exhausted fuel, oversized searches.
pub const EXIT_FAILED: i32 = 1;
/// Unreadable or malformed input, unknown names.
pub const EXIT_ERROR: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "qinl",
    version,
    about = "Check, query and migrate .qinl schemas and instances"
)]
pub struct Cli {
    /// Resource bound for equality proofs and chase rounds.
    #[arg(long, global = true, env = "QINL_FUEL", default_value_t = 32, value_parser = clap::value_parser!(u32).range(1..))]
    pub fuel: u32,
    /// Seed for sampled attribute values.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Number of sampled values per attribute type when checking equations.
    #[arg(long = "sample", global = true, default_value_t = 256, value_parser = clap::value_parser!(u64).range(1..))]
    pub sample_size: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Migrate along mappings whose equations are not all proved.
    #[arg(long, global = true)]
    pub allow_unverified: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Typecheck every declaration, check instances and verify mappings.
    Check { file: PathBuf },
    /// Evaluate a named NRC expression.
    Eval {
        file: PathBuf,
        name: String,
        /// Instance supplying the entity sets, for expressions over a schema.
        #[arg(long)]
        instance: Option<String>,
    },
    /// Run a named comprehension query against an instance.
    Query {
        file: PathBuf,
        query: String,
        instance: String,
    },
    /// Migrate an instance along a mapping and print or write the result.
    Migrate {
        file: PathBuf,
        direction: Direction,
        mapping: String,
        instance: String,
        /// Write the instance here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Count the homomorphisms between two instances of one schema.
    Homs {
        file: PathBuf,
        from: String,
        to: String,
        /// Print every homomorphism.
        #[arg(long)]
        list: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Check { .. } => "check",
            Command::Eval { .. } => "eval",
            Command::Query { .. } => "query",
            Command::Migrate { .. } => "migrate",
            Command::Homs { .. } => "homs",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunConfig {
    pub fuel: u32,
    pub sample_size: usize,
    pub seed: u64,
    pub format: Format,
    pub allow_unverified: bool,
}

impl RunConfig {
    pub fn migration(&self) -> MigrationOptions {
        MigrationOptions {
            fuel: self.fuel,
            allow_unverified: self.allow_unverified,
        }
    }

    pub fn sampling(&self) -> SampleConfig {
        SampleConfig {
            sample_size: self.sample_size,
            seed: self.seed,
        }
    }

    fn to_json(self) -> Json {
        json!({
            "fuel": self.fuel,
            "sample_size": self.sample_size,
            "seed": self.seed,
            "format": match self.format { Format::Table => "table", Format::Json => "json" },
            "allow_unverified": self.allow_unverified,
        })
    }
}

/// One located message about the input file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: u32,
    pub column: u32,
    pub message: String,
}

/// What a command produced, before rendering.
#[derive(Debug)]
pub(crate) struct Outcome {
    pub code: i32,
    /// standard output in table mode
    pub table: String,
    /// command-specific fields of the JSON document
    pub fields: Map<String, Json>,
    pub diagnostics: Vec<Diagnostic>,
    /// free-form error, for failures without a location
    pub error: Option<String>,
    /// non-fatal remarks, printed to standard error in table mode
    pub warnings: Vec<String>,
}

impl Outcome {
    pub fn new() -> Self {
        Outcome {
            code: EXIT_OK,
            table: String::new(),
            fields: Map::new(),
            diagnostics: Vec::new(),
            error: None,
            warnings: Vec::new(),
        }
    }

    pub fn fail(code: i32, message: impl Into<String>) -> Self {
        let mut o = Outcome::new();
        o.code = code;
        o.error = Some(message.into());
        o
    }

    pub fn raise(&mut self, code: i32) {
        self.code = self.code.max(code);
    }
}

/// Parses `args` (including the program name) and runs the command,
/// writing to `out` and `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                let _ = err.write_all(rendered.as_bytes());
                EXIT_ERROR
            } else {
                let _ = out.write_all(rendered.as_bytes());
                EXIT_OK
            };
        }
    };
    let cfg = RunConfig {
        fuel: cli.fuel,
        sample_size: cli.sample_size as usize,
        seed: cli.seed,
        format: cli.format,
        allow_unverified: cli.allow_unverified,
    };
    let (outcome, file) = match &cli.command {
        Command::Check { file } => (commands::check(file, &cfg), file),
        Command::Eval { file, name, instance } => (commands::eval(file, name, instance.as_deref(), &cfg), file),
        Command::Query { file, query, instance } => (commands::query(file, query, instance, &cfg), file),
        Command::Migrate {
            file,
            direction,
            mapping,
            instance,
            out,
        } => (
            commands::migrate(file, *direction, mapping, instance, out.as_deref(), &cfg),
            file,
        ),
        Command::Homs { file, from, to, list } => (commands::homs(file, from, to, *list, &cfg), file),
    };
    emit(&cli.command, file, &cfg, outcome, out, err)
}

fn emit(
    command: &Command,
    file: &std::path::Path,
    cfg: &RunConfig,
    o: Outcome,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    match cfg.format {
        Format::Table => {
            let _ = out.write_all(o.table.as_bytes());
            for d in &o.diagnostics {
                let _ = writeln!(err, "{}:{}:{}: {}", file.display(), d.line, d.column, d.message);
            }
            for w in &o.warnings {
                let _ = writeln!(err, "warning: {}", w);
            }
            if let Some(e) = &o.error {
                let _ = writeln!(err, "error: {}", e);
            }
        }
        Format::Json => {
            let mut doc = Map::new();
            doc.insert("command".into(), command.name().into());
            doc.insert("file".into(), file.display().to_string().into());
            doc.insert("config".into(), cfg.to_json());
            doc.insert("exit_code".into(), o.code.into());
            doc.insert(
                "diagnostics".into(),
                o.diagnostics
                    .iter()
                    .map(|d| json!({"line": d.line, "column": d.column, "message": d.message}))
                    .collect(),
            );
            doc.insert("error".into(), o.error.clone().map_or(Json::Null, Json::from));
            doc.insert("warnings".into(), o.warnings.iter().cloned().map(Json::from).collect());
            doc.extend(o.fields);
            let text = serde_json::to_string_pretty(&Json::Object(doc)).expect("JSON values serialize");
            let _ = writeln!(out, "{}", text);
        }
    }
    o.code
}
