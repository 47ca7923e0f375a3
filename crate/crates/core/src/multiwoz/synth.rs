use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AnnotatedDialogue, AnnotatedTurn, BeliefState, DomainSchema, Schema, SlotSchema};

#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub dialogues: usize,
    pub min_turns: usize,
    pub max_turns: usize,
    pub seed: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            dialogues: 200,
            min_turns: 2,
            max_turns: 8,
            seed: 0,
        }
    }
}

/// Random schema-driven dialogues with multi-domain states and values that
/// carry over between domains without being repeated by the user.
pub fn synthesize(schema: &Schema, options: &SynthOptions) -> Vec<AnnotatedDialogue> {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    (0..options.dialogues)
        .map(|i| {
            let n = rng.gen_range(options.min_turns..=options.max_turns.max(options.min_turns));
            AnnotatedDialogue {
                dialogue_id: format!("synth-{i:04}"),
                turns: dialogue(schema, n, &mut rng),
            }
        })
        .collect()
}

fn dialogue(schema: &Schema, turns: usize, rng: &mut ChaCha8Rng) -> Vec<AnnotatedTurn> {
    let mut state = BeliefState::new();
    let mut out = vec![];
    for _ in 0..turns {
        let mut words = vec![];
        let active: Vec<&DomainSchema> = schema.domains.iter().filter(|d| state.domain(&d.name).is_some()).collect();
        let inactive: Vec<&DomainSchema> = schema.domains.iter().filter(|d| state.domain(&d.name).is_none()).collect();
        let roll: f64 = rng.gen();
        if active.is_empty() || (roll < 0.3 && !inactive.is_empty()) {
            let d = *inactive.choose(rng).expect("schema has domains");
            words.push(format!("i need a {}", d.name));
            let k = rng.gen_range(1..=d.slots.len().min(3));
            for s in d.slots.choose_multiple(rng, k) {
                set_slot(schema, &mut state, d, s, rng, &mut words);
            }
        } else if roll < 0.75 {
            let d = *active.choose(rng).expect("non-empty");
            let s = d.slots.choose(rng).expect("domains have slots");
            words.push(format!("for the {}", d.name));
            set_slot(schema, &mut state, d, s, rng, &mut words);
        } else if roll < 0.85 {
            words.push("thanks".to_string());
        } else if roll < 0.95 {
            let d = *active.choose(rng).expect("non-empty");
            let filled: Vec<String> = state.domain(&d.name).into_iter().flatten().map(|(k, _)| k.clone()).collect();
            if filled.len() > 1 {
                let slot = filled.choose(rng).expect("non-empty");
                words.push(format!("any {slot} is fine for the {}", d.name));
                state.remove(&d.name, slot);
            } else {
                words.push("ok".to_string());
            }
        } else if active.len() > 1 {
            let d = *active.choose(rng).expect("non-empty");
            words.push(format!("forget the {}", d.name));
            let slots: Vec<String> = state.domain(&d.name).into_iter().flatten().map(|(k, _)| k.clone()).collect();
            for s in slots {
                state.remove(&d.name, &s);
            }
        } else {
            words.push("ok".to_string());
        }
        out.push(AnnotatedTurn {
            utterance: words.join(" "),
            state: state.clone(),
        });
    }
    out
}

/// Values already in the state, from other domains, that could fill `slot`:
/// same declared type, or same slot name when both are untyped.
fn reusable(schema: &Schema, state: &BeliefState, domain: &DomainSchema, slot: &SlotSchema) -> Vec<String> {
    state
        .triples()
        .filter(|(d, k, _)| {
            let other = schema.slot(d, k).ok().and_then(|s| s.value_type.as_ref());
            *d != domain.name
                && match (&slot.value_type, other) {
                    (Some(a), Some(b)) => a == b,
                    (None, None) => *k == slot.name,
                    _ => false,
                }
        })
        .map(|(_, _, v)| v.to_string())
        .filter(|v| state.get(&domain.name, &slot.name) != Some(v.as_str()))
        .collect()
}

fn set_slot(schema: &Schema, state: &mut BeliefState, d: &DomainSchema, s: &SlotSchema, rng: &mut ChaCha8Rng, words: &mut Vec<String>) {
    let reuse = reusable(schema, state, d, s);
    if !reuse.is_empty() && rng.gen_bool(0.5) {
        let v = reuse.choose(rng).expect("non-empty").clone();
        words.push(format!("the same {}", s.value_type.as_deref().unwrap_or(&s.name).to_lowercase()));
        state.insert(d.name.clone(), s.name.clone(), v);
        return;
    }
    let pool: Vec<String> = if s.values.is_empty() {
        (1..=5).map(|i| format!("{} {i}", s.name)).collect()
    } else {
        s.values.clone()
    };
    let current = state.get(&d.name, &s.name).map(str::to_string);
    let fresh: Vec<&String> = pool.iter().filter(|v| Some(*v) != current.as_ref()).collect();
    let v = (*fresh.choose(rng).unwrap_or(&&pool[0])).clone();
    words.push(format!("{} {v}", s.name));
    state.insert(d.name.clone(), s.name.clone(), v);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiwoz::tests::SCHEMA;

    #[test]
    fn deterministic_and_within_bounds() {
        let schema = Schema::from_json(SCHEMA).unwrap();
        let opts = SynthOptions {
            dialogues: 20,
            seed: 7,
            ..SynthOptions::default()
        };
        let a = synthesize(&schema, &opts);
        assert_eq!(a, synthesize(&schema, &opts));
        assert!(a.iter().all(|d| (2..=8).contains(&d.turns.len())));
        for d in &a {
            for t in &d.turns {
                for (dn, k, _) in t.state.triples() {
                    assert!(schema.slot(dn, k).is_ok());
                }
            }
        }
    }
}
