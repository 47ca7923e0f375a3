//! Command-line front end: script replay, a developer REPL, and wrappers
//! around conversion, scoring and dataset export.

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::evaluator::Registry;
use crate::inliner::{export_dataset, ExportOptions, Mode};
use crate::library::WorldState;
use crate::metacompute::HeuristicSalience;
use crate::multiwoz::{
    convert_dialogue, execute_to_state, load_dialogues, score, synthesize, write_dialogues, AnnotatedDialogue,
    AnnotatedTurn, Schema, SynthOptions,
};
use crate::program::{parse, Program};
use crate::session::{replay, Script, Session};

pub const EXIT_OK: i32 = 0;
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "dataflow", version, about = "Dataflow dialogue interpreter and tools")]
pub struct Cli {
    /// Number of most recent turns the salience model searches.
    #[arg(long, global = true, default_value_t = 6)]
    pub max_lookback: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run dialogue scripts and check each turn against its expectation.
    Replay(ReplayArgs),
    /// Read programs from standard input and evaluate them one per line.
    Repl(ReplArgs),
    /// Convert annotated slot-filling dialogues to programs.
    Convert(ConvertArgs),
    /// Evaluate converted programs back to per-turn states.
    Execute(ExecuteArgs),
    /// Compare predicted states with gold states.
    Score(ScoreArgs),
    /// Write per-turn source/target token records for dialogue scripts.
    Export(ExportArgs),
    /// Generate a synthetic annotated corpus from a schema.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Script files, one JSON record per utterance.
    #[arg(required = true)]
    pub scripts: Vec<PathBuf>,
    /// World fixture.
    #[arg(long)]
    pub fixtures: PathBuf,
    /// Print every evaluated node.
    #[arg(long)]
    pub trace: bool,
    /// Print the dataflow graph after each script.
    #[arg(long)]
    pub dump_graph: bool,
}

#[derive(Debug, Args)]
pub struct ReplArgs {
    #[arg(long)]
    pub fixtures: PathBuf,
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Annotated dialogues, one JSON record per line.
    pub dialogues: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    /// Where to write programs; standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExecuteArgs {
    /// Program file written by `convert`.
    pub programs: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    pub predicted: PathBuf,
    pub gold: PathBuf,
    /// Print the metrics as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(required = true)]
    pub scripts: Vec<PathBuf>,
    #[arg(long)]
    pub fixtures: PathBuf,
    /// Target representation: dataflow or inlined.
    #[arg(long, default_value = "dataflow")]
    pub mode: Mode,
    /// Number of previous turns included in each source.
    #[arg(long, default_value_t = 2)]
    pub context_window: usize,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub schema: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub dialogues: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Converted programs for one dialogue; `null` marks an unchanged state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramRecord {
    pub dialogue_id: String,
    pub programs: Vec<Option<String>>,
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

type CmdResult = Result<i32, String>;

/// Parses `args` and runs the command. Returns the process exit code.
pub fn run<I, T>(args: I, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    let mut io = Io { out, err };
    let result = match &cli.command {
        Command::Replay(a) => cmd_replay(a, cli.max_lookback, &mut io),
        Command::Repl(a) => cmd_repl(a, cli.max_lookback, input, &mut io),
        Command::Convert(a) => cmd_convert(a, &mut io),
        Command::Execute(a) => cmd_execute(a, &mut io),
        Command::Score(a) => cmd_score(a, &mut io),
        Command::Export(a) => cmd_export(a, cli.max_lookback, &mut io),
        Command::Synth(a) => cmd_synth(a, &mut io),
    };
    match result {
        Ok(code) => code,
        Err(message) => {
            let _ = writeln!(io.err, "error: {message}");
            EXIT_INPUT
        }
    }
}

fn io_err(e: std::io::Error) -> String {
    e.to_string()
}

fn load_world(path: &Path) -> Result<WorldState, String> {
    WorldState::load(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn session(world: WorldState, max_lookback: usize) -> Session {
    Session::new(
        Arc::new(Registry::standard()),
        world,
        Arc::new(HeuristicSalience::new(max_lookback)),
    )
}

fn cmd_replay(a: &ReplayArgs, max_lookback: usize, io: &mut Io<'_>) -> CmdResult {
    let world = load_world(&a.fixtures)?;
    let mut scripts = vec![];
    for path in &a.scripts {
        scripts.push((path, Script::load(path).map_err(|e| format!("{}: {e}", path.display()))?));
    }
    let (mut turns, mut mismatches) = (0, 0);
    for (path, script) in &scripts {
        let mut s = session(world.clone(), max_lookback);
        s.options.trace = a.trace;
        let report = replay(script, &mut s).map_err(|e| format!("{}: {e}", path.display()))?;
        writeln!(io.out, "== {}", path.file_name().unwrap_or_default().to_string_lossy()).map_err(io_err)?;
        for t in &report.turns {
            turns += 1;
            let status = if t.passed { "ok" } else { "FAIL" };
            writeln!(io.out, "turn {} {status}: {}", t.turn, t.utterance).map_err(io_err)?;
            writeln!(io.out, "  program  {}", t.program).map_err(io_err)?;
            writeln!(io.out, "  outcome  {}", t.actual).map_err(io_err)?;
            if !t.passed {
                mismatches += 1;
                if let Some(e) = &t.expected {
                    writeln!(io.out, "  expected {e}").map_err(io_err)?;
                }
            }
            writeln!(io.out, "  agent    {}", t.response).map_err(io_err)?;
            for entry in &t.trace {
                writeln!(io.out, "    trace  {entry}").map_err(io_err)?;
            }
        }
        if a.dump_graph {
            write!(io.out, "{}", s.graph().dump()).map_err(io_err)?;
        }
    }
    writeln!(
        io.out,
        "{} scripts, {turns} turns, {mismatches} mismatches",
        scripts.len()
    )
    .map_err(io_err)?;
    Ok(if mismatches == 0 { EXIT_OK } else { EXIT_MISMATCH })
}

fn cmd_repl(a: &ReplArgs, max_lookback: usize, input: &mut dyn BufRead, io: &mut Io<'_>) -> CmdResult {
    let mut s = session(load_world(&a.fixtures)?, max_lookback);
    s.options.trace = a.trace;
    let mut line = String::new();
    loop {
        write!(io.out, "> ").map_err(io_err)?;
        io.out.flush().map_err(io_err)?;
        line.clear();
        if input.read_line(&mut line).map_err(io_err)? == 0 {
            writeln!(io.out).map_err(io_err)?;
            return Ok(EXIT_OK);
        }
        let text = line.trim();
        match text {
            "" => continue,
            ":quit" | ":q" => return Ok(EXIT_OK),
            ":graph" => write!(io.out, "{}", s.graph().dump()).map_err(io_err)?,
            ":trace on" => s.options.trace = true,
            ":trace off" => s.options.trace = false,
            ":help" => writeln!(io.out, "programs are evaluated one per line; commands: :graph :trace on|off :quit")
                .map_err(io_err)?,
            _ if text.starts_with(':') => writeln!(io.err, "unknown command {text}").map_err(io_err)?,
            _ => match s.user_text(text) {
                Ok(report) => {
                    for entry in &report.evaluation.trace {
                        writeln!(io.out, "  trace  {entry}").map_err(io_err)?;
                    }
                    writeln!(io.out, "{}", s.outcome_text(report.outcome())).map_err(io_err)?;
                    writeln!(io.out, "{}", report.response).map_err(io_err)?;
                }
                Err(e) => writeln!(io.err, "error: {e}").map_err(io_err)?,
            },
        }
    }
}

fn load_schema(path: &Path) -> Result<Schema, String> {
    Schema::load(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_annotated(path: &Path) -> Result<Vec<AnnotatedDialogue>, String> {
    load_dialogues(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_convert(a: &ConvertArgs, io: &mut Io<'_>) -> CmdResult {
    let schema = load_schema(&a.schema)?;
    let dialogues = load_annotated(&a.dialogues)?;
    let mut lines = String::new();
    let (mut turns, mut refers, mut exact) = (0, 0, 0);
    for d in &dialogues {
        let converted = convert_dialogue(&d.turns, &schema).map_err(|e| format!("{}: {e}", d.dialogue_id))?;
        let record = ProgramRecord {
            dialogue_id: d.dialogue_id.clone(),
            programs: converted.programs.iter().map(|p| p.as_ref().map(Program::to_string)).collect(),
        };
        lines.push_str(&serde_json::to_string(&record).expect("records serialize"));
        lines.push('\n');
        turns += d.turns.len();
        refers += converted.refer_count();
        if execute_to_state(&converted.programs, &schema) == d.states() {
            exact += 1;
        } else {
            writeln!(io.err, "{}: executed states differ from the annotation", d.dialogue_id).map_err(io_err)?;
        }
    }
    let summary = format!(
        "converted {} dialogues, {turns} turns, {refers} refer calls; round trip exact on {exact}/{}",
        dialogues.len(),
        dialogues.len()
    );
    match &a.out {
        Some(path) => {
            std::fs::write(path, lines).map_err(|e| format!("{}: {e}", path.display()))?;
            writeln!(io.out, "{summary}").map_err(io_err)?;
        }
        None => {
            write!(io.out, "{lines}").map_err(io_err)?;
            writeln!(io.err, "{summary}").map_err(io_err)?;
        }
    }
    Ok(if exact == dialogues.len() { EXIT_OK } else { EXIT_MISMATCH })
}

fn cmd_execute(a: &ExecuteArgs, io: &mut Io<'_>) -> CmdResult {
    let schema = load_schema(&a.schema)?;
    let text = std::fs::read_to_string(&a.programs).map_err(|e| format!("{}: {e}", a.programs.display()))?;
    let mut out = vec![];
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let record: ProgramRecord =
            serde_json::from_str(line).map_err(|e| format!("{}:{}: {e}", a.programs.display(), i + 1))?;
        let mut programs = vec![];
        for p in &record.programs {
            programs.push(match p {
                Some(text) => Some(parse(text).map_err(|e| format!("{}: {e}", record.dialogue_id))?),
                None => None,
            });
        }
        let turns = execute_to_state(&programs, &schema)
            .into_iter()
            .map(|state| AnnotatedTurn {
                utterance: String::new(),
                state,
            })
            .collect();
        out.push(AnnotatedDialogue {
            dialogue_id: record.dialogue_id,
            turns,
        });
    }
    write!(io.out, "{}", write_dialogues(&out)).map_err(io_err)?;
    Ok(EXIT_OK)
}

fn cmd_score(a: &ScoreArgs, io: &mut Io<'_>) -> CmdResult {
    let predicted = load_annotated(&a.predicted)?;
    let gold = load_annotated(&a.gold)?;
    let states = |ds: &[AnnotatedDialogue]| ds.iter().map(AnnotatedDialogue::states).collect::<Vec<_>>();
    let metrics = score(&states(&predicted), &states(&gold)).map_err(|e| e.to_string())?;
    if a.json {
        writeln!(io.out, "{}", serde_json::to_string(&metrics).expect("metrics serialize")).map_err(io_err)?;
    } else {
        writeln!(io.out, "{metrics}").map_err(io_err)?;
    }
    Ok(EXIT_OK)
}

fn cmd_export(a: &ExportArgs, max_lookback: usize, io: &mut Io<'_>) -> CmdResult {
    let world = load_world(&a.fixtures)?;
    let mut dialogues = vec![];
    for path in &a.scripts {
        let script = Script::load(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let id = path.file_stem().unwrap_or_default().to_string_lossy().to_string();
        dialogues.push((id, script));
    }
    let options = ExportOptions {
        mode: a.mode,
        context: a.context_window,
        max_lookback,
        ..ExportOptions::default()
    };
    let records = export_dataset(&dialogues, &world, &options).map_err(|e| e.to_string())?;
    for r in records {
        writeln!(io.out, "{}", serde_json::to_string(&r).expect("records serialize")).map_err(io_err)?;
    }
    Ok(EXIT_OK)
}

fn cmd_synth(a: &SynthArgs, io: &mut Io<'_>) -> CmdResult {
    let schema = load_schema(&a.schema)?;
    let options = SynthOptions {
        dialogues: a.dialogues,
        seed: a.seed,
        ..SynthOptions::default()
    };
    write!(io.out, "{}", write_dialogues(&synthesize(&schema, &options))).map_err(io_err)?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str], input: &str) -> (i32, String, String) {
        let (mut out, mut err) = (vec![], vec![]);
        let code = run(
            std::iter::once("dataflow").chain(args.iter().copied()),
            &mut input.as_bytes(),
            &mut out,
            &mut err,
        );
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run_str(&["replay"], "").0, EXIT_INPUT);
        assert_eq!(run_str(&["bogus"], "").0, EXIT_INPUT);
        assert_eq!(run_str(&["--help"], "").0, EXIT_OK);
    }

    #[test]
    fn missing_files_exit_2() {
        let (code, _, err) = run_str(&["replay", "nope.jsonl", "--fixtures", "nope.json"], "");
        assert_eq!(code, EXIT_INPUT);
        assert!(err.starts_with("error: nope.json"), "{err}");
    }
}
