use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

use dataflow_dialogue::inliner::{export_dataset, ExportOptions, ExportRecord};
use dataflow_dialogue::library::WorldState;
use dataflow_dialogue::session::{Script, Session};

fn data(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(rel)
        .to_string_lossy()
        .into_owned()
}

fn dataflow(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_dataflow"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn replay_of_dinner_and_airport_dialogues_passes() {
    let fixtures = data("fixtures/calendar.json");
    for script in ["scripts/retreat_dinner.jsonl", "scripts/airport.jsonl"] {
        let out = dataflow(&["replay", &data(script), "--fixtures", &fixtures], "");
        assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
        assert!(stdout(&out).ends_with("0 mismatches\n"));
    }
}

#[test]
fn replay_is_deterministic() {
    let fixtures = data("fixtures/calendar.json");
    let run = || dataflow(&["replay", &data("scripts/retreat.jsonl"), "--fixtures", &fixtures, "--trace"], "").stdout;
    assert_eq!(run(), run());
}

#[test]
fn replay_mismatch_exits_1_with_diff() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wrong.jsonl");
    let text = std::fs::read_to_string(data("scripts/retreat.jsonl")).unwrap().replace("\"monday\"", "\"friday\"");
    std::fs::write(&path, text).unwrap();
    let out = dataflow(&["replay", path.to_str().unwrap(), "--fixtures", &data("fixtures/calendar.json")], "");
    assert_eq!(out.status.code(), Some(1));
    let report = stdout(&out);
    assert!(report.contains("FAIL"));
    assert!(report.contains("  outcome  monday"));
    assert!(report.contains("  expected friday"));
}

#[test]
fn input_errors_exit_2() {
    let out = dataflow(&["replay", "/nonexistent.jsonl", "--fixtures", &data("fixtures/calendar.json")], "");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    assert_eq!(dataflow(&["frobnicate"], "").status.code(), Some(2));
}

#[test]
fn repl_evaluates_lines_and_dumps_the_graph() {
    let fixtures = data("fixtures/calendar.json");
    let out = dataflow(&["repl", "--fixtures", &fixtures], "now()\n+(1, 2)\n:graph\n:quit\n");
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("DateTime(date=Date(year=2020, month=apr, day=20), time=Time(hour=8, minute=0))"));

    let mut session = Session::standard(WorldState::load(&fixtures).unwrap());
    session.user_text("now()").unwrap();
    session.user_text("+(1, 2)").unwrap();
    assert!(text.contains(&session.graph().dump()), "{text}");
}

#[test]
fn repl_reproduces_exception_then_repair() {
    let input = "findEvent(EventSpec(start=DateTimeSpec(month=feb, day=30)))\n\
                 revise(rootLoc=RoleConstraint(output), oldLoc=Constraint[DateTimeSpec](), new=DateTimeSpec(month=feb, day=28))\n";
    let out = dataflow(&["repl", "--fixtures", &data("fixtures/calendar.json")], input);
    let text = stdout(&out);
    let raised = text.find("raises InvalidDateException").expect("exception shown");
    let repaired = text.find("quarterly review").expect("repair shown");
    assert!(raised < repaired);
}

#[test]
fn score_of_identical_files_is_perfect() {
    let sample = data("multiwoz/sample_dialogues.jsonl");
    let out = dataflow(&["score", &sample, &sample, "--json"], "");
    assert_eq!(out.status.code(), Some(0));
    let metrics: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(metrics["joint_goal"], 1.0);
    assert_eq!(metrics["dialogue"], 1.0);
    let dialogues = dataflow_dialogue::multiwoz::load_dialogues(&sample).unwrap();
    let mean_len = dialogues.iter().map(|d| d.turns.len()).sum::<usize>() as f64 / dialogues.len() as f64;
    assert!((metrics["prefix"].as_f64().unwrap() - mean_len).abs() < 1e-9);
}

#[test]
fn export_matches_library_records() {
    let fixtures = data("fixtures/calendar.json");
    let scripts = [data("scripts/retreat.jsonl"), data("scripts/morning.jsonl")];
    for mode in ["dataflow", "inlined"] {
        let out = dataflow(
            &["export", &scripts[0], &scripts[1], "--fixtures", &fixtures, "--mode", mode, "--context-window", "2"],
            "",
        );
        assert_eq!(out.status.code(), Some(0));
        let got: Vec<ExportRecord> = stdout(&out).lines().map(|l| serde_json::from_str(l).unwrap()).collect();

        let dialogues: Vec<_> = [("retreat", &scripts[0]), ("morning", &scripts[1])]
            .iter()
            .map(|(id, p)| (id.to_string(), Script::load(p).unwrap()))
            .collect();
        let options = ExportOptions {
            mode: mode.parse().unwrap(),
            context: 2,
            ..ExportOptions::default()
        };
        let want = export_dataset(&dialogues, &WorldState::load(&fixtures).unwrap(), &options).unwrap();
        assert_eq!(got, want);
        assert_eq!(got.len(), 6);
        let third = &got[2];
        assert_eq!(third.source_tokens.iter().filter(|t| *t == "__User").count(), 3);
        assert_eq!(third.source_tokens.iter().filter(|t| *t == "__Agent").count(), 2);
    }
}

#[test]
fn synth_convert_execute_score_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let schema = data("multiwoz/schema.json");
    let corpus = dir.path().join("corpus.jsonl");
    let programs = dir.path().join("programs.jsonl");
    let states = dir.path().join("states.jsonl");

    let out = dataflow(&["synth", "--schema", &schema, "--dialogues", "40", "--seed", "5"], "");
    assert_eq!(out.status.code(), Some(0));
    std::fs::write(&corpus, &out.stdout).unwrap();

    let out = dataflow(
        &["convert", corpus.to_str().unwrap(), "--schema", &schema, "--out", programs.to_str().unwrap()],
        "",
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("round trip exact on 40/40"));

    let out = dataflow(&["execute", programs.to_str().unwrap(), "--schema", &schema], "");
    assert_eq!(out.status.code(), Some(0));
    std::fs::write(&states, &out.stdout).unwrap();

    let out = dataflow(&["score", states.to_str().unwrap(), corpus.to_str().unwrap()], "");
    assert!(stdout(&out).starts_with("joint_goal 1.000  dialogue 1.000"), "{}", stdout(&out));
}
