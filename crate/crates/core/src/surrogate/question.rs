//! Question shape analysis.
//!
//! Questions follow eight fixed surface shapes. Parsing returns every
//! shape-conformant reading rather than committing to one: conjunctions
//! and aggregate keywords can be read more than one way, and downstream
//! linking decides which readings survive. A reading that violates the
//! shape grammar is simply not produced.

use crate::synthgen::{Aggr, Cond};

/// A `RELATION CONDITION VALUE` clause with unresolved phrases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub phrase: String,
    pub cond: Cond,
    pub value: String,
}

/// One reading of a question, mirroring the eight templates.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    T1 {
        phrase: String,
        entity: String,
    },
    T2 {
        phrase1: String,
        phrase2: String,
        entity: String,
    },
    T3 {
        phrase: String,
        type_word: String,
        clause: Clause,
    },
    T4 {
        phrase1: String,
        phrase2: String,
        type_word: String,
        clause: Clause,
    },
    T5 {
        type_word: String,
        clause: Clause,
    },
    T6 {
        type_word: String,
        clause1: Clause,
        clause2: Clause,
    },
    T7 {
        aggr: Aggr,
        phrase: String,
        type_word: String,
        clause: Clause,
    },
    T8 {
        aggr: Aggr,
        phrase: String,
        type_word: String,
        clause1: Clause,
        clause2: Clause,
    },
}

impl Shape {
    pub fn template_id(&self) -> u8 {
        match self {
            Shape::T1 { .. } => 1,
            Shape::T2 { .. } => 2,
            Shape::T3 { .. } => 3,
            Shape::T4 { .. } => 4,
            Shape::T5 { .. } => 5,
            Shape::T6 { .. } => 6,
            Shape::T7 { .. } => 7,
            Shape::T8 { .. } => 8,
        }
    }
}

/// All shape-conformant readings of the question. Empty means the text
/// matches no template at all.
pub fn parse_question(text: &str) -> Vec<Shape> {
    let trimmed = text.trim().trim_end_matches('?').trim();
    if let Some(rest) = trimmed.strip_prefix("what is ") {
        what_is_readings(rest)
    } else if let Some(rest) = trimmed.strip_prefix("what are ") {
        what_are_readings(rest)
    } else if let Some(rest) = trimmed.strip_prefix("how many ") {
        how_many_readings(rest)
    } else {
        Vec::new()
    }
}

fn what_is_readings(rest: &str) -> Vec<Shape> {
    let mut shapes = Vec::new();
    match rest.split_once(" whose ") {
        Some((head, tail)) => {
            let Some((x, type_word)) = head.rsplit_once(" of ") else {
                return shapes;
            };
            for split in clause_splits(tail) {
                match split {
                    (clause, None) => {
                        if let Some(clause) = parse_clause(&clause) {
                            shapes.push(Shape::T3 {
                                phrase: x.to_string(),
                                type_word: type_word.to_string(),
                                clause: clause.clone(),
                            });
                            if let Some((aggr, phrase)) = strip_aggr(x) {
                                shapes.push(Shape::T7 {
                                    aggr,
                                    phrase,
                                    type_word: type_word.to_string(),
                                    clause,
                                });
                            }
                        }
                    }
                    (first, Some(second)) => {
                        // Two conditions only combine with an aggregate.
                        let (Some(clause1), Some(clause2)) =
                            (parse_clause(&first), parse_clause(&second))
                        else {
                            continue;
                        };
                        if let Some((aggr, phrase)) = strip_aggr(x) {
                            shapes.push(Shape::T8 {
                                aggr,
                                phrase,
                                type_word: type_word.to_string(),
                                clause1,
                                clause2,
                            });
                        }
                    }
                }
            }
        }
        None => {
            if let Some((phrase, entity)) = rest.rsplit_once(" of ") {
                shapes.push(Shape::T1 {
                    phrase: phrase.to_string(),
                    entity: entity.to_string(),
                });
            }
        }
    }
    shapes
}

fn what_are_readings(rest: &str) -> Vec<Shape> {
    let mut shapes = Vec::new();
    match rest.split_once(" whose ") {
        Some((head, tail)) => {
            let Some((pair, type_word)) = head.rsplit_once(" of ") else {
                return shapes;
            };
            let Some(clause) = parse_clause(tail) else {
                return shapes;
            };
            for (phrase1, phrase2) in and_splits(pair) {
                shapes.push(Shape::T4 {
                    phrase1,
                    phrase2,
                    type_word: type_word.to_string(),
                    clause: clause.clone(),
                });
            }
        }
        None => {
            if let Some((pair, entity)) = rest.rsplit_once(" of ") {
                for (phrase1, phrase2) in and_splits(pair) {
                    shapes.push(Shape::T2 {
                        phrase1,
                        phrase2,
                        entity: entity.to_string(),
                    });
                }
            }
        }
    }
    shapes
}

fn how_many_readings(rest: &str) -> Vec<Shape> {
    let mut shapes = Vec::new();
    let Some((type_word, tail)) = rest.split_once(" whose ") else {
        return shapes;
    };
    for split in clause_splits(tail) {
        match split {
            (clause, None) => {
                if let Some(clause) = parse_clause(&clause) {
                    shapes.push(Shape::T5 {
                        type_word: type_word.to_string(),
                        clause,
                    });
                }
            }
            (first, Some(second)) => {
                let (Some(clause1), Some(clause2)) =
                    (parse_clause(&first), parse_clause(&second))
                else {
                    continue;
                };
                shapes.push(Shape::T6 {
                    type_word: type_word.to_string(),
                    clause1,
                    clause2,
                });
            }
        }
    }
    shapes
}

/// The undivided text plus every two-way division at an "and" word.
fn clause_splits(text: &str) -> Vec<(String, Option<String>)> {
    let mut splits = vec![(text.to_string(), None)];
    for (left, right) in and_splits(text) {
        splits.push((left, Some(right)));
    }
    splits
}

/// Two-way divisions of the text at each standalone "and".
fn and_splits(text: &str) -> Vec<(String, String)> {
    let words: Vec<&str> = text.split_whitespace().collect();
    let mut out = Vec::new();
    for (i, word) in words.iter().enumerate() {
        if *word == "and" && i > 0 && i + 1 < words.len() {
            out.push((words[..i].join(" "), words[i + 1..].join(" ")));
        }
    }
    out
}

fn strip_aggr(text: &str) -> Option<(Aggr, String)> {
    let (first, rest) = text.split_once(' ')?;
    let aggr = Aggr::ALL.into_iter().find(|a| a.surface() == first)?;
    Some((aggr, rest.to_string()))
}

/// Splits `RELATION CONDITION VALUE` at the first condition phrase, longest
/// surface first. Both sides must be non-empty.
fn parse_clause(text: &str) -> Option<Clause> {
    const SURFACES: [(&str, Cond); 5] = [
        ("greater than or equal to", Cond::Atleast),
        ("less than or equal to", Cond::Atmost),
        ("greater than", Cond::More),
        ("less than", Cond::Less),
        ("equal to", Cond::Equal),
    ];
    let words: Vec<&str> = text.split_whitespace().collect();
    for i in 1..words.len() {
        for (surface, cond) in SURFACES {
            let pattern: Vec<&str> = surface.split(' ').collect();
            if i + pattern.len() < words.len() && words[i..i + pattern.len()] == pattern[..] {
                return Some(Clause {
                    phrase: words[..i].join(" "),
                    cond,
                    value: words[i + pattern.len()..].join(" "),
                });
            }
        }
    }
    None
}
