use std::collections::HashSet;

use chrono::NaiveDate;
use proptest::prelude::*;

use dataflow_dialogue::constraints::{merge_constraints, Clause, Constraint};
use dataflow_dialogue::evaluator::Outcome;
use dataflow_dialogue::graph::{DataflowGraph, EvalState, Speaker};
use dataflow_dialogue::inliner::{has_inlinable_calls, inline_turn};
use dataflow_dialogue::library::WorldState;
use dataflow_dialogue::multiwoz::{score, BeliefState};
use dataflow_dialogue::program::{extend_graph, linearize, parse, print, Arg, Expression, Program};
use dataflow_dialogue::session::Session;
use dataflow_dialogue::types::TypeTag;
use dataflow_dialogue::value::{read_value, structural_equal, Value};

fn world() -> WorldState {
    WorldState::from_json(r#"{"clock": "2020-04-20T08:00:00"}"#).unwrap()
}

fn arith() -> impl Strategy<Value = Expression> {
    let leaf = prop_oneof![
        4 => (1..50i32).prop_map(|n| Expression::Num(f64::from(n))),
        1 => Just(Expression::call("refer", vec![])),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        (prop::sample::select(vec!["+", "-", "*"]), inner.clone(), inner).prop_map(|(op, l, r)| {
            Expression::call(op, vec![Arg::keyword("left", l), Arg::keyword("right", r)])
        })
    })
}

fn revise(role: &str, new: Expression) -> Expression {
    Expression::call(
        "revise",
        vec![
            Arg::keyword("rootLoc", Expression::call("RoleConstraint", vec![Arg::positional(Expression::Enum("output".into()))])),
            Arg::keyword("oldLoc", Expression::call("RoleConstraint", vec![Arg::positional(Expression::Enum(role.into()))])),
            Arg::keyword("new", new),
        ],
    )
}

fn turn() -> impl Strategy<Value = Expression> {
    prop_oneof![
        3 => arith(),
        1 => (prop::sample::select(vec!["left", "right"]), arith()).prop_map(|(r, e)| revise(r, e)),
    ]
}

fn ast() -> impl Strategy<Value = Expression> {
    let ident = prop::sample::select(vec!["monday", "output", "feb", "x_1"]).prop_map(|s| Expression::Enum(s.into()));
    let leaf = prop_oneof![
        "[a-z '\\\\é]{0,6}".prop_map(Expression::Str),
        (-10_000i32..10_000, 1u8..4).prop_map(|(n, d)| Expression::Num(f64::from(n) / f64::from(d))),
        ident,
    ];
    leaf.prop_recursive(4, 40, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..3).prop_map(Expression::List),
            (
                prop::sample::select(vec!["f", "findEvent", "EventSpec", "+"]),
                prop::collection::vec(inner.clone(), 0..3),
                prop::collection::btree_map(prop::sample::select(vec!["a", "name", "start"]), inner, 0..3),
            )
                .prop_map(|(name, pos, kw)| {
                    let mut args: Vec<Arg> = pos.into_iter().map(Arg::positional).collect();
                    args.extend(kw.into_iter().map(|(k, v)| Arg::keyword(k, v)));
                    Expression::call(name, args)
                }),
        ]
    })
}

fn clause() -> impl Strategy<Value = Clause> {
    (prop::sample::select(vec!["name", "start", "end", "duration", "location"]), 0..4u8).prop_map(|(f, v)| Clause::PropertyEq {
        field: f.into(),
        value: Value::Num(f64::from(v)),
    })
}

fn event_constraint() -> impl Strategy<Value = Constraint> {
    prop::collection::vec(clause(), 1..4).prop_map(|clauses| Constraint {
        base: Some(TypeTag::named("Event")),
        clauses,
    })
}

fn belief_state() -> impl Strategy<Value = BeliefState> {
    prop::collection::vec(
        (
            prop::sample::select(vec!["hotel", "train", "taxi"]),
            prop::sample::select(vec!["area", "day", "book people"]),
            "[a-z0-9 :]{1,8}",
        ),
        0..6,
    )
    .prop_map(|triples| {
        let mut s = BeliefState::new();
        for (d, k, v) in triples {
            s.insert(d, k, v);
        }
        s
    })
}

/// Dialogues as lists of per-turn correctness, scored against distinct gold states.
fn scored(patterns: &[Vec<bool>]) -> dataflow_dialogue::multiwoz::Metrics {
    let state = |tag: String| {
        let mut s = BeliefState::new();
        s.insert("hotel", "area", tag);
        s
    };
    let gold: Vec<Vec<_>> = patterns
        .iter()
        .map(|p| (0..p.len()).map(|i| state(i.to_string())).collect())
        .collect();
    let predicted: Vec<Vec<_>> = patterns
        .iter()
        .zip(&gold)
        .map(|(p, g)| p.iter().zip(g).map(|(ok, s)| if *ok { s.clone() } else { state("x".into()) }).collect())
        .collect();
    score(&predicted, &gold).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn graph_is_append_only_and_acyclic(turns in prop::collection::vec(turn(), 1..6)) {
        let mut session = Session::standard(world());
        for expr in turns {
            let before: Vec<_> = session.graph().nodes().map(|(_, n)| n.clone()).collect();
            let _ = session.user_turn(&Program::new(expr));
            let g = session.graph();
            for ((_, now), then) in g.nodes().zip(&before) {
                prop_assert_eq!(&now.label, &then.label);
                prop_assert_eq!(&now.args, &then.args);
                if then.result.is_some() {
                    prop_assert_eq!(now.result, then.result);
                }
            }
            for (id, node) in g.nodes() {
                prop_assert!(node.args.iter().all(|(_, a)| *a < id));
                if node.state == EvalState::Evaluated {
                    let mut cur = id;
                    let mut steps = 0;
                    while let Some(next) = g.get(cur).result.filter(|r| *r != cur) {
                        cur = next;
                        steps += 1;
                        prop_assert!(steps <= g.len(), "result chain from {} does not end", id);
                    }
                    let end = g.get(cur);
                    prop_assert!(end.result == Some(cur) || end.state != EvalState::Evaluated);
                }
            }
            let turns: Vec<_> = g.turn_roots().iter().map(|t| t.turn).collect();
            prop_assert!(turns.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn extend_adds_exactly_the_program_nodes(expr in ast()) {
        let program = Program::new(expr);
        let mut g = DataflowGraph::new();
        extend_graph(&mut g, &Program::new(Expression::Num(1.0)), 0, Speaker::User).unwrap();
        let before = g.len();
        extend_graph(&mut g, &program, 2, Speaker::User).unwrap();
        prop_assert_eq!(g.len() - before, program.node_count());
    }

    #[test]
    fn parse_print_round_trip(expr in ast()) {
        let program = Program::new(expr);
        let text = print(&program);
        prop_assert_eq!(parse(&text).unwrap(), program.clone());
        prop_assert_eq!(print(&parse(&text).unwrap()), text);
    }

    #[test]
    fn linearize_is_injective(a in ast(), b in ast()) {
        let (a, b) = (Program::new(a), Program::new(b));
        prop_assert_eq!(linearize(&a) == linearize(&b), a == b);
    }

    #[test]
    fn inlining_is_idempotent(turns in prop::collection::vec(turn(), 2..6)) {
        let mut session = Session::standard(world());
        for expr in turns {
            let program = Program::new(expr);
            let Ok(inlined) = inline_turn(&session, &program) else {
                let _ = session.user_turn(&program);
                continue;
            };
            prop_assert!(!has_inlinable_calls(&inlined));
            prop_assert_eq!(inline_turn(&session, &inlined).unwrap(), inlined);
            session.user_turn(&program).unwrap();
        }
    }

    #[test]
    fn structural_equality_is_an_equivalence(turns in prop::collection::vec(arith(), 1..4)) {
        let mut session = Session::standard(world());
        for expr in turns {
            let _ = session.user_turn(&Program::new(expr));
        }
        let g = session.graph();
        let ids: Vec<_> = g.nodes().filter(|(id, _)| g.resolve_value(*id).is_ok()).map(|(id, _)| id).take(12).collect();
        for &a in &ids {
            prop_assert!(structural_equal(g, a, a).unwrap());
            for &b in &ids {
                let ab = structural_equal(g, a, b).unwrap();
                prop_assert_eq!(ab, structural_equal(g, b, a).unwrap());
                for &c in &ids {
                    if ab && structural_equal(g, b, c).unwrap() {
                        prop_assert!(structural_equal(g, a, c).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn merge_with_always_true_is_identity(c in event_constraint()) {
        prop_assert_eq!(merge_constraints(&c, &Constraint::always_true()).unwrap().constraint, c.clone());
        prop_assert_eq!(merge_constraints(&Constraint::always_true(), &c).unwrap().constraint, c);
    }

    #[test]
    fn new_clauses_survive_merges(old in event_constraint(), new in event_constraint()) {
        let merged = merge_constraints(&old, &new).unwrap().constraint;
        for clause in &new.clauses {
            prop_assert!(merged.clauses.contains(clause));
        }
        let new_fields: HashSet<_> = new.clauses.iter().filter_map(Clause::field).collect();
        for clause in &merged.clauses {
            if let Some(f) = clause.field() {
                if new_fields.contains(f) {
                    prop_assert!(new.clauses.contains(clause));
                }
            }
        }
    }

    #[test]
    fn date_constructor_follows_the_calendar(year in 1990i32..2040, month in 1u32..=12, day in 1u32..=31) {
        const MONTHS: [&str; 12] = ["jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec"];
        let mut session = Session::standard(world());
        let text = format!("Date(year={year}, month={}, day={day})", MONTHS[month as usize - 1]);
        let report = session.user_text(&text).unwrap();
        let valid = NaiveDate::from_ymd_opt(year, month, day).is_some();
        prop_assert_eq!(matches!(report.outcome(), Outcome::Value(_)), valid, "{}", text);
    }

    #[test]
    fn metric_bounds(patterns in prop::collection::vec(prop::collection::vec(any::<bool>(), 1..8), 1..6)) {
        let m = scored(&patterns);
        let longest = patterns.iter().map(Vec::len).max().unwrap() as f64;
        prop_assert!(0.0 <= m.prefix && m.prefix <= longest);
        for p in &patterns {
            let single = scored(std::slice::from_ref(p));
            if single.joint_goal == 1.0 {
                prop_assert_eq!(single.dialogue, 1.0);
                prop_assert_eq!(single.prefix, p.len() as f64);
            }
            prop_assert!(single.dialogue <= single.joint_goal);
        }
    }

    #[test]
    fn dialogue_accuracy_bounded_by_joint_goal_for_equal_lengths(
        (len, patterns) in (1usize..8).prop_flat_map(|n| (Just(n), prop::collection::vec(prop::collection::vec(any::<bool>(), n), 1..6)))
    ) {
        let m = scored(&patterns);
        prop_assert!(patterns.iter().all(|p| p.len() == len));
        prop_assert!(m.dialogue <= m.joint_goal + 1e-12);
    }

    #[test]
    fn belief_state_serde_round_trip(state in belief_state()) {
        let json = serde_json::to_string(&state).unwrap();
        prop_assert_eq!(serde_json::from_str::<BeliefState>(&json).unwrap(), state);
    }

    #[test]
    fn refer_results_satisfy_their_constraint(first in 1..50i32, second in arith()) {
        let mut session = Session::standard(world());
        session.user_text(&format!("'label{first}'")).unwrap();
        session.user_turn(&Program::new(second)).ok();
        let report = session.user_text("refer(Constraint[String]())").unwrap();
        let Outcome::Value(n) = report.outcome() else {
            return Err(TestCaseError::fail("refer found no string"));
        };
        prop_assert_eq!(read_value(session.graph(), *n).unwrap(), Value::str(format!("label{first}")));
    }
}
