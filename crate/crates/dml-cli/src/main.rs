use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dml_cli::commands::{self, parse_tags, CliError, Limits, Report};
use dml_cli::suite::SuiteConfig;

#[derive(Parser)]
#[command(name = "dml", version, about = "Orbit-finite data monoids, guarded MSO over data words, register automata")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Print the JSON report instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[arg(long, global = true)]
    max_word_len: Option<usize>,
    #[arg(long, global = true)]
    max_values: Option<u32>,
    #[arg(long, global = true)]
    state_budget: Option<usize>,
    /// Run only the selftest checks whose name or keywords contain this.
    #[arg(long, global = true)]
    filter: Option<String>,
}

#[derive(Args)]
struct FormulaInput {
    /// File holding the formula.
    #[arg(long, short = 'f', required_unless_present = "expr")]
    formula: Option<PathBuf>,
    /// The formula itself.
    #[arg(long, short = 'e', conflicts_with = "formula")]
    expr: Option<String>,
}

impl FormulaInput {
    fn text(&self) -> Result<String, CliError> {
        match (&self.formula, &self.expr) {
            (_, Some(e)) => Ok(e.clone()),
            (Some(p), None) => read(p),
            (None, None) => Err(CliError("give --formula or --expr".into())),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse a formula and list its free variables and tags.
    Parse(FormulaInput),
    /// Evaluate a formula on a data word.
    Eval {
        #[command(flatten)]
        input: FormulaInput,
        /// Word such as "a@1 b@2".
        #[arg(long, short = 'w', allow_hyphen_values = true)]
        word: String,
        /// Bindings `x=2` or `X=1,3` (1-based positions); repeatable.
        #[arg(long = "assign", short = 'a')]
        assign: Vec<String>,
    },
    /// Decide rigidity of a two-variable guard, or the fragment of a sentence.
    Rigid {
        #[command(flatten)]
        input: FormulaInput,
        /// Guard variables, as `x,y`; defaults to the free variables in order.
        #[arg(long)]
        vars: Option<String>,
        /// Search words up to --max-word-len (5) over --max-values (4) values.
        #[arg(long)]
        bounded: bool,
        #[arg(long)]
        tags: Option<String>,
    },
    /// Decide satisfiability of a guarded sentence.
    Sat {
        #[command(flatten)]
        input: FormulaInput,
        #[arg(long)]
        tags: Option<String>,
    },
    /// Compile a rigidly guarded formula into an orbit-finite monoid.
    Compile {
        #[command(flatten)]
        input: FormulaInput,
        /// Write the recognizer here instead of standard output.
        #[arg(long, short = 'o')]
        out: Option<PathBuf>,
        #[arg(long)]
        tags: Option<String>,
    },
    /// Validate a presentation and report Green's relations and structure checks.
    Analyze {
        #[arg(long, short = 'p')]
        presentation: PathBuf,
    },
    /// Syntactic quotient of a recognizer.
    Quotient {
        #[arg(long, short = 'r')]
        recognizer: PathBuf,
        #[arg(long, short = 'o')]
        out: Option<PathBuf>,
    },
    /// Run a finite-memory automaton on a word.
    FmaRun {
        #[arg(long)]
        fma: PathBuf,
        #[arg(long, short = 'w', allow_hyphen_values = true)]
        word: String,
        /// Stop counting accepting runs here.
        #[arg(long, default_value_t = 16)]
        count_limit: usize,
    },
    /// Determinism and bounded unambiguity of a finite-memory automaton.
    FmaCheck {
        #[arg(long)]
        fma: PathBuf,
    },
    /// Run the acceptance suite and print the pass/fail matrix.
    Selftest {
        /// Recognizer file replacing the shipped L1 fixture.
        #[arg(long)]
        l1: Option<PathBuf>,
    },
}

fn read(p: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(p).map_err(|e| CliError(format!("{}: {e}", p.display())))
}

fn write(p: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(p, text).map_err(|e| CliError(format!("{}: {e}", p.display())))
}

fn tags(s: &Option<String>) -> Vec<dml_core::nominal::Tag> {
    s.as_deref().map(parse_tags).unwrap_or_default()
}

/// Places a command's artifact: written to `out`, printed ahead of the text
/// report, or embedded in the JSON one.
fn with_artifact(res: (Report, String), out: &Option<PathBuf>, json: bool) -> Result<Report, CliError> {
    let (mut report, artifact) = res;
    match out {
        Some(p) => write(p, &artifact)?,
        None if !json => report.text = format!("{artifact}\n{}", report.text),
        None => report.json["recognizer"] = artifact.into(),
    }
    Ok(report)
}

fn run(cli: &Cli) -> Result<Report, CliError> {
    let limits = Limits { max_word_len: cli.max_word_len, max_values: cli.max_values, state_budget: cli.state_budget };
    match &cli.command {
        Command::Parse(input) => commands::parse_cmd(&input.text()?),
        Command::Eval { input, word, assign } => commands::eval_cmd(&input.text()?, word, assign, &limits),
        Command::Rigid { input, vars, bounded, tags: t } => {
            let vars = match vars {
                None => None,
                Some(s) => {
                    let (x, y) = s.split_once(',').ok_or_else(|| CliError(format!("--vars `{s}` is not `x,y`")))?;
                    Some((x.trim().to_string(), y.trim().to_string()))
                }
            };
            commands::rigid_cmd(&input.text()?, vars, *bounded, &tags(t), &limits)
        }
        Command::Sat { input, tags: t } => commands::sat_cmd(&input.text()?, &tags(t), &limits),
        Command::Compile { input, out, tags: t } => {
            with_artifact(commands::compile_cmd(&input.text()?, &tags(t), &limits)?, out, cli.json)
        }
        Command::Analyze { presentation } => commands::analyze_cmd(&read(presentation)?, &limits),
        Command::Quotient { recognizer, out } => {
            with_artifact(commands::quotient_cmd(&read(recognizer)?)?, out, cli.json)
        }
        Command::FmaRun { fma, word, count_limit } => commands::fma_run_cmd(&read(fma)?, word, *count_limit),
        Command::FmaCheck { fma } => commands::fma_check_cmd(&read(fma)?, &limits),
        Command::Selftest { l1 } => {
            let mut cfg = SuiteConfig::default();
            if let Some(p) = l1 {
                cfg.l1_text = read(p)?;
            }
            commands::selftest_cmd(&cfg, cli.filter.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(r) => {
            let out =
                if cli.json { serde_json::to_string_pretty(&r.json).expect("JSON values serialize") } else { r.text };
            // A closed pipe (`dml ... | head`) is not an error worth reporting.
            let _ = writeln!(std::io::stdout(), "{out}");
            ExitCode::from(r.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
