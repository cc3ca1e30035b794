//! Condition value recovery.
//!
//! A decoded program may carry a condition value that the graph has never
//! seen (a paraphrase or a misspelling), which makes an equality filter
//! silently empty. Recovery replaces such values with the closest entry in
//! the relation's value inventory under a longest-common-subsequence F1
//! score over words. Only equality filters are touched; numeric thresholds
//! are legitimate out-of-inventory values.

use crate::dsl::{Arg, OpKind, Program};
use crate::interp::normalize_value;
use crate::kg::{KnowledgeGraph, Literal};

/// Word-level LCS F1 between two strings. Both sides empty scores 1,
/// exactly one side empty scores 0.
pub fn rouge_l(reference: &str, candidate: &str) -> f64 {
    let r: Vec<&str> = reference.split_whitespace().collect();
    let c: Vec<&str> = candidate.split_whitespace().collect();
    lcs_f1(&r, &c)
}

/// Character-level LCS F1; same scoring rules as [`rouge_l`].
pub fn char_lcs_f1(a: &str, b: &str) -> f64 {
    let x: Vec<char> = a.chars().collect();
    let y: Vec<char> = b.chars().collect();
    lcs_f1(&x, &y)
}

fn lcs_f1<T: PartialEq>(a: &[T], b: &[T]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(a, b) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let recall = lcs / a.len() as f64;
    let precision = lcs / b.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            row[j + 1] = if x == y {
                prev[j] + 1
            } else {
                row[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut row);
    }
    prev[b.len()]
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryRecord {
    pub step: usize,
    pub original: String,
    pub outcome: RecoveryOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RecoveryOutcome {
    /// Value replaced by the best-scoring inventory entry.
    Replaced { value: String, score: f64 },
    /// The relation has no literal values; the step is left unchanged.
    NoCandidates,
}

/// Rewrites equality-filter values that are absent from the relation's
/// inventory (after trimming and case folding). Ties on the score pick the
/// lexicographically smallest inventory value. Running recovery on its own
/// output changes nothing.
pub fn recover_program(program: &Program, kg: &KnowledgeGraph) -> (Program, Vec<RecoveryRecord>) {
    let mut steps = program.steps().to_vec();
    let mut records = Vec::new();

    for (i, step) in steps.iter_mut().enumerate() {
        if step.op != OpKind::GenEntsetEqual {
            continue;
        }
        let (Arg::Rel(relation), Arg::Lit(literal)) = (&step.args[0], &step.args[1]) else {
            continue;
        };
        let needle = normalize_value(literal.text());
        if kg
            .value_inventory(relation)
            .any(|v| normalize_value(v) == needle)
        {
            continue;
        }

        let mut best: Option<(&str, f64)> = None;
        for value in kg.value_inventory(relation) {
            let score = rouge_l(&normalize_value(value), &needle);
            let better = match best {
                None => true,
                Some((held, held_score)) => {
                    score > held_score || (score == held_score && value < held)
                }
            };
            if better {
                best = Some((value, score));
            }
        }

        match best {
            Some((value, score)) => {
                records.push(RecoveryRecord {
                    step: i,
                    original: literal.text().to_string(),
                    outcome: RecoveryOutcome::Replaced {
                        value: value.to_string(),
                        score,
                    },
                });
                step.args[1] = Arg::Lit(Literal::new(value));
            }
            None => records.push(RecoveryRecord {
                step: i,
                original: literal.text().to_string(),
                outcome: RecoveryOutcome::NoCandidates,
            }),
        }
    }

    let recovered = Program::new(steps).expect("rewrite preserves structure");
    (recovered, records)
}
