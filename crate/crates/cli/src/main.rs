use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ebparse::{
    load_environment, load_lattice, load_lexicon, parse_category, verify_dump, BasicChart, Category,
    Environment, ExtChart, ForestDump, Grammar, InputChart, ProbTable, QuantifierRegistry, Tree,
};

#[derive(Parser)]
#[command(name = "ebparse", version, about = "Environment-based categorial grammar parser")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse sentences or a word lattice and print trees, forests or traces.
    Parse(ParseArgs),
    /// Re-check a JSON forest dump against the rules that supposedly built it.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct Sources {
    /// Environment file (entities and relations).
    #[arg(long, value_name = "FILE")]
    env: PathBuf,
    /// Lexicon file.
    #[arg(long, value_name = "FILE")]
    lexicon: PathBuf,
    /// Sentence to parse; repeat for a batch.
    #[arg(long, value_name = "WORDS", required_unless_present = "lattice", conflicts_with = "lattice")]
    input: Vec<String>,
    /// Word lattice file (`edge <i> <j> <word> [<weight>]` lines).
    #[arg(long, value_name = "FILE")]
    lattice: Option<PathBuf>,
}

#[derive(Args)]
struct ParseArgs {
    #[command(flatten)]
    sources: Sources,
    /// Goal category, e.g. `NP` or `S\NP_q`.
    #[arg(long, value_name = "CAT")]
    goal: String,
    #[arg(long, value_enum, default_value_t = Mode::Extended)]
    mode: Mode,
    /// Print every tree instead of the best one.
    #[arg(long)]
    all: bool,
    /// Annotate tree nodes with their denotations.
    #[arg(long)]
    denotations: bool,
    /// Dump the whole forest.
    #[arg(long, value_enum, value_name = "FORMAT")]
    forest: Option<ForestFormat>,
    /// Print the numbered rule firings of the best derivation.
    #[arg(long)]
    trace: bool,
    /// Production probabilities; selects the Viterbi tree (basic mode).
    #[arg(long, value_name = "FILE")]
    probs: Option<PathBuf>,
    /// Upper bound on trees printed by --all.
    #[arg(long, default_value_t = 1000)]
    max_trees: usize,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    sources: Sources,
    /// Forest dump produced by `parse --forest json`.
    #[arg(long, value_name = "FILE")]
    forest: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Basic,
    Extended,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ForestFormat {
    Dot,
    Json,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

struct Loaded {
    env: Environment,
    grammar: Grammar,
    inputs: Vec<(String, InputChart)>,
}

fn load(s: &Sources) -> Result<Loaded> {
    let env = load_environment(&read(&s.env)?).with_context(|| s.env.display().to_string())?;
    let grammar = load_lexicon(&read(&s.lexicon)?, &env, &QuantifierRegistry::builtin())
        .with_context(|| s.lexicon.display().to_string())?;
    let inputs = match &s.lattice {
        Some(path) => {
            let chart = load_lattice(&read(path)?).with_context(|| path.display().to_string())?;
            vec![(path.display().to_string(), chart)]
        }
        None => s.input.iter().map(|t| (t.clone(), InputChart::from_sentence(t))).collect(),
    };
    Ok(Loaded { env, grammar, inputs })
}

/// Output of one parse plus whether the goal was reached.
struct Outcome {
    text: String,
    warnings: Vec<String>,
    parsed: bool,
}

fn bracketed(trees: &[Tree], env: Option<&Environment>) -> String {
    trees.iter().map(|t| t.bracketed(env) + "\n").collect()
}

/// Bottom-up numbered listing of a single-component tree.
fn tree_trace(t: &Tree, env: &Environment, step: &mut usize, out: &mut String) {
    for c in &t.children {
        tree_trace(c, env, step, out);
    }
    if t.children.is_empty() {
        return;
    }
    *step += 1;
    let _ = writeln!(out, "({:>2}) {:<4} [{},{}, {}]  {}", step, t.rule, t.start, t.end, t.label, env.display(&t.denotation));
}

fn run_one(args: &ParseArgs, goal: &Category, probs: Option<&ProbTable>, l: &Loaded, input: &InputChart) -> Result<Outcome> {
    let env = args.denotations.then_some(&l.env);
    let mut text = String::new();
    let (warnings, best) = match args.mode {
        Mode::Basic => {
            let chart = BasicChart::parse(input, &l.grammar)?;
            let best = chart.best_goal(goal);
            if let Some(format) = args.forest {
                text += &render_forest(&chart.dump(&l.env), format);
            }
            if let Some(x) = best {
                let top = match probs {
                    Some(p) => chart.viterbi_tree(x, &chart.viterbi(p)?),
                    None => chart.best_tree(x),
                };
                if args.trace {
                    tree_trace(&top, &l.env, &mut 0, &mut text);
                } else if args.forest.is_none() {
                    let trees = if args.all { chart.trees(x, args.max_trees) } else { vec![top] };
                    text += &bracketed(&trees, env);
                }
            }
            (chart.warnings, best)
        }
        Mode::Extended => {
            let chart = ExtChart::parse(input, &l.grammar, &l.env)?;
            let best = chart.best_goal(goal);
            if let Some(format) = args.forest {
                text += &render_forest(&chart.dump(&l.env), format);
            }
            if let Some(x) = best {
                if args.trace {
                    text += &chart.trace(x, &l.env);
                } else if args.forest.is_none() {
                    let trees = if args.all { chart.trees(x, args.max_trees) } else { vec![chart.best_tree(x)] };
                    text += &bracketed(&trees, env);
                }
            }
            (chart.warnings, best)
        }
    };
    if best.is_none() && args.forest.is_none() {
        text += "no parse\n";
    }
    Ok(Outcome { text, warnings, parsed: best.is_some() })
}

fn render_forest(dump: &ForestDump, format: ForestFormat) -> String {
    match format {
        ForestFormat::Json => dump.to_json() + "\n",
        ForestFormat::Dot => dump.to_dot(),
    }
}

fn parse_goal(text: &str) -> Result<Category> {
    let goal = parse_category(text).with_context(|| format!("goal `{text}`"))?;
    if goal.has_structural_vars() {
        bail!("goal `{text}` contains category variables");
    }
    Ok(goal)
}

fn run_parse(args: &ParseArgs) -> Result<u8> {
    let goal = parse_goal(&args.goal)?;
    let probs = match &args.probs {
        Some(_) if args.mode == Mode::Extended => bail!("--probs requires --mode basic"),
        Some(p) => Some(ProbTable::load(&read(p)?).with_context(|| p.display().to_string())?),
        None => None,
    };
    let loaded = load(&args.sources)?;
    // sentences of a batch share the read-only grammar and environment
    let outcomes: Vec<Result<Outcome>> = std::thread::scope(|s| {
        let handles: Vec<_> = loaded
            .inputs
            .iter()
            .map(|(_, input)| s.spawn(|| run_one(args, &goal, probs.as_ref(), &loaded, input)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("parser thread panicked")).collect()
    });
    let batch = loaded.inputs.len() > 1;
    let mut code = 0;
    for ((label, _), outcome) in loaded.inputs.iter().zip(outcomes) {
        let outcome = outcome.with_context(|| format!("parsing `{label}`"))?;
        for w in &outcome.warnings {
            eprintln!("warning: {w}");
        }
        if batch {
            println!("# {label}");
        }
        print!("{}", outcome.text);
        if !outcome.parsed {
            code = 1;
        }
    }
    Ok(code)
}

fn run_verify(args: &VerifyArgs) -> Result<u8> {
    let loaded = load(&args.sources)?;
    let dump = ForestDump::from_json(&read(&args.forest)?).with_context(|| args.forest.display().to_string())?;
    let Some((_, input)) = loaded.inputs.first() else { bail!("no input") };
    match verify_dump(&dump, input, &loaded.grammar, &loaded.env) {
        Ok(n) => {
            println!("ok: {} items, {n} derivations verified", dump.items.len());
            Ok(0)
        }
        Err(errors) => {
            for e in &errors {
                println!("{e}");
            }
            Ok(1)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Parse(args) => run_parse(args),
        Command::Verify(args) => run_verify(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
