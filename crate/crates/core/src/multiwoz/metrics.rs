use std::fmt;

use serde::Serialize;
use thiserror::Error;

use super::BeliefState;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LengthMismatch {
    #[error("{predicted} predicted dialogues but {gold} gold dialogues")]
    Dialogues { predicted: usize, gold: usize },
    #[error("dialogue {index}: {predicted} predicted turns but {gold} gold turns")]
    Turns { index: usize, predicted: usize, gold: usize },
}

/// State-tracking accuracy over aligned dialogues.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    /// Fraction of turns whose whole state matches.
    pub joint_goal: f64,
    /// Fraction of dialogues with every turn matching.
    pub dialogue: f64,
    /// Mean number of turns before the first mismatch.
    pub prefix: f64,
    pub turns: usize,
    pub dialogues: usize,
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "joint_goal {:.3}  dialogue {:.3}  prefix {:.3}  ({} turns, {} dialogues)",
            self.joint_goal, self.dialogue, self.prefix, self.turns, self.dialogues
        )
    }
}

fn ratio(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

pub fn score(predicted: &[Vec<BeliefState>], gold: &[Vec<BeliefState>]) -> Result<Metrics, LengthMismatch> {
    if predicted.len() != gold.len() {
        return Err(LengthMismatch::Dialogues {
            predicted: predicted.len(),
            gold: gold.len(),
        });
    }
    let (mut turns, mut correct, mut perfect, mut prefix_total) = (0, 0, 0, 0);
    for (index, (p, g)) in predicted.iter().zip(gold).enumerate() {
        if p.len() != g.len() {
            return Err(LengthMismatch::Turns {
                index,
                predicted: p.len(),
                gold: g.len(),
            });
        }
        let matches: Vec<bool> = p.iter().zip(g).map(|(a, b)| a == b).collect();
        turns += matches.len();
        correct += matches.iter().filter(|m| **m).count();
        perfect += usize::from(matches.iter().all(|m| *m));
        prefix_total += matches.iter().take_while(|m| **m).count();
    }
    Ok(Metrics {
        joint_goal: ratio(correct, turns),
        dialogue: ratio(perfect, gold.len()),
        prefix: ratio(prefix_total, gold.len()),
        turns,
        dialogues: gold.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn states(n: usize) -> Vec<BeliefState> {
        (0..n)
            .map(|i| {
                let mut s = BeliefState::new();
                s.insert("hotel", "stars", i.to_string());
                s
            })
            .collect()
    }

    #[test]
    fn mismatched_lengths() {
        assert!(matches!(score(&[states(2)], &[]), Err(LengthMismatch::Dialogues { .. })));
        assert!(matches!(score(&[states(2)], &[states(3)]), Err(LengthMismatch::Turns { index: 0, .. })));
    }

    #[test]
    fn display() {
        let m = score(&[states(2)], &[states(2)]).unwrap();
        assert_eq!(m.to_string(), "joint_goal 1.000  dialogue 1.000  prefix 2.000  (2 turns, 1 dialogues)");
    }

    #[test]
    fn dialogue_accuracy_can_exceed_joint_goal_with_unequal_lengths() {
        let mut wrong = states(7);
        for s in &mut wrong {
            s.insert("hotel", "stars", "x");
        }
        let m = score(&[states(1), wrong], &[states(1), states(7)]).unwrap();
        assert_eq!((m.joint_goal, m.dialogue), (0.125, 0.5));
    }
}
