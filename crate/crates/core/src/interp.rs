//! Program interpreter.
//!
//! Executes a type-checked program step by step against a knowledge graph.
//! Runtime failures (bad threshold, aggregate over nothing numeric) abort
//! the run and surface as an error outcome in the trace; they are the
//! "no answer" condition rather than a crash.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::dsl::{Arg, OpKind, Program, Step, TypeError};
use crate::kg::{KnowledgeGraph, Literal, NodeId, Object, Relation};

/// Runtime value held by a register.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    EntSet(BTreeSet<NodeId>),
    /// Bag of literals in canonical triple order, one entry per triple.
    LitSet(Vec<Literal>),
    /// Ordered pair of bags produced by concat_litsets.
    LitSets(Vec<Literal>, Vec<Literal>),
    Int(u64),
    Float(f64),
}

impl Value {
    /// An answer that carries no information: an empty set or bag, a pair
    /// with an empty half, or a zero count.
    pub fn is_null(&self) -> bool {
        match self {
            Value::EntSet(set) => set.is_empty(),
            Value::LitSet(bag) => bag.is_empty(),
            Value::LitSets(a, b) => a.is_empty() || b.is_empty(),
            Value::Int(n) => *n == 0,
            Value::Float(_) => false,
        }
    }

    /// Canonical text form: sets are sorted and newline-joined, the two
    /// blocks of a pair are separated by a blank line, floats are printed
    /// to six significant digits with at least one decimal.
    pub fn canonical_text(&self) -> String {
        match self {
            Value::EntSet(set) => {
                let items: Vec<&str> = set.iter().map(|n| n.as_str()).collect();
                items.join("\n")
            }
            Value::LitSet(bag) => sorted_texts(bag).join("\n"),
            Value::LitSets(a, b) => {
                format!("{}\n\n{}", sorted_texts(a).join("\n"), sorted_texts(b).join("\n"))
            }
            Value::Int(n) => n.to_string(),
            Value::Float(v) => format_float(*v),
        }
    }
}

fn sorted_texts(bag: &[Literal]) -> Vec<&str> {
    let mut texts: Vec<&str> = bag.iter().map(|l| l.text()).collect();
    texts.sort_unstable();
    texts
}

/// Six significant digits, positional, trailing zeros trimmed but keeping
/// at least one fractional digit.
pub fn format_float(v: f64) -> String {
    if v == 0.0 {
        return "0.0".to_string();
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).clamp(1, 12) as usize;
    let mut s = format!("{v:.decimals$}");
    while s.ends_with('0') && !s.ends_with(".0") {
        s.pop();
    }
    s
}

/// True when two answers agree: sets as sets, bags as sorted multisets,
/// numbers numerically with a small relative tolerance.
pub fn values_match(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::EntSet(x), Value::EntSet(y)) => x == y,
        (Value::LitSet(x), Value::LitSet(y)) => sorted_texts(x) == sorted_texts(y),
        (Value::LitSets(x0, x1), Value::LitSets(y0, y1)) => {
            sorted_texts(x0) == sorted_texts(y0) && sorted_texts(x1) == sorted_texts(y1)
        }
        (Value::Int(x), Value::Int(y)) => x == y,
        (x, y) => match (numeric_of(x), numeric_of(y)) {
            (Some(x), Some(y)) => (x - y).abs() <= 1e-6 * x.abs().max(y.abs()).max(1.0),
            _ => false,
        },
    }
}

fn numeric_of(v: &Value) -> Option<f64> {
    match v {
        Value::Int(n) => Some(*n as f64),
        Value::Float(x) => Some(*x),
        _ => None,
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum RuntimeErrorKind {
    #[error("threshold {text:?} is not numeric")]
    NonNumericThreshold { text: String },
    #[error("aggregate over a bag with no numeric values")]
    EmptyNumericAggregate,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("step {step}: {kind}")]
pub struct RuntimeError {
    pub step: usize,
    pub kind: RuntimeErrorKind,
}

/// Register values computed so far plus the final outcome. On failure the
/// registers cover the steps before the failing one.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionTrace {
    pub registers: Vec<Value>,
    pub outcome: Result<Value, RuntimeError>,
}

impl ExecutionTrace {
    pub fn answer(&self) -> Option<&Value> {
        self.outcome.as_ref().ok()
    }
}

/// Case- and whitespace-insensitive form used by the equality filter.
pub fn normalize_value(text: &str) -> String {
    text.trim().to_lowercase()
}

/// Type-checks, then runs. Type errors are static and returned directly;
/// runtime errors are part of the trace.
pub fn exec_program(program: &Program, kg: &KnowledgeGraph) -> Result<ExecutionTrace, TypeError> {
    program.type_check()?;
    let mut registers: Vec<Value> = Vec::with_capacity(program.steps().len());
    for (i, step) in program.steps().iter().enumerate() {
        match eval_step(step, &registers, kg) {
            Ok(value) => registers.push(value),
            Err(kind) => {
                return Ok(ExecutionTrace {
                    registers,
                    outcome: Err(RuntimeError { step: i, kind }),
                })
            }
        }
    }
    let answer = registers.last().expect("programs are non-empty").clone();
    Ok(ExecutionTrace {
        registers,
        outcome: Ok(answer),
    })
}

fn eval_step(
    step: &Step,
    registers: &[Value],
    kg: &KnowledgeGraph,
) -> Result<Value, RuntimeErrorKind> {
    let ent = |arg: &Arg| -> &BTreeSet<NodeId> {
        match arg {
            Arg::Register(k) => match &registers[*k] {
                Value::EntSet(set) => set,
                other => unreachable!("type check admitted {other:?} as entset"),
            },
            other => unreachable!("type check admitted {other:?} as entset"),
        }
    };
    let litset = |arg: &Arg| -> &[Literal] {
        match arg {
            Arg::Register(k) => match &registers[*k] {
                Value::LitSet(bag) => bag,
                other => unreachable!("type check admitted {other:?} as litset"),
            },
            other => unreachable!("type check admitted {other:?} as litset"),
        }
    };
    fn rel(arg: &Arg) -> &Relation {
        match arg {
            Arg::Rel(r) => r,
            other => unreachable!("type check admitted {other:?} as relation"),
        }
    }
    fn lit(arg: &Arg) -> &Literal {
        match arg {
            Arg::Lit(l) => l,
            other => unreachable!("type check admitted {other:?} as literal"),
        }
    }

    let value = match step.op {
        OpKind::GenEntsetDown => {
            let sources = ent(&step.args[0]);
            let relation = rel(&step.args[1]);
            let mut out = BTreeSet::new();
            for s in sources {
                for object in kg.objects(s, relation) {
                    if let Object::Entity(o) = object {
                        out.insert(o.clone());
                    }
                }
            }
            Value::EntSet(out)
        }
        OpKind::GenEntsetUp => {
            let relation = rel(&step.args[0]);
            let targets = ent(&step.args[1]);
            let mut out = BTreeSet::new();
            for o in targets {
                out.extend(kg.subjects_of_object(relation, o).cloned());
            }
            Value::EntSet(out)
        }
        OpKind::GenLitset => {
            let sources = ent(&step.args[0]);
            let relation = rel(&step.args[1]);
            let mut bag = Vec::new();
            for s in sources {
                for object in kg.objects(s, relation) {
                    if let Object::Literal(l) = object {
                        bag.push(l.clone());
                    }
                }
            }
            Value::LitSet(bag)
        }
        OpKind::GenEntsetEqual => {
            let relation = rel(&step.args[0]);
            let target = normalize_value(lit(&step.args[1]).text());
            let mut out = BTreeSet::new();
            for t in kg.triples_of_relation(relation) {
                if let Object::Literal(l) = &t.object {
                    if normalize_value(l.text()) == target {
                        out.insert(t.subject.clone());
                    }
                }
            }
            Value::EntSet(out)
        }
        OpKind::GenEntsetAtleast
        | OpKind::GenEntsetAtmost
        | OpKind::GenEntsetLess
        | OpKind::GenEntsetMore => {
            let relation = rel(&step.args[0]);
            let threshold_lit = lit(&step.args[1]);
            let threshold =
                threshold_lit
                    .numeric()
                    .ok_or_else(|| RuntimeErrorKind::NonNumericThreshold {
                        text: threshold_lit.text().to_string(),
                    })?;
            let keep: fn(f64, f64) -> bool = match step.op {
                OpKind::GenEntsetAtleast => |x, t| x >= t,
                OpKind::GenEntsetAtmost => |x, t| x <= t,
                OpKind::GenEntsetLess => |x, t| x < t,
                OpKind::GenEntsetMore => |x, t| x > t,
                _ => unreachable!(),
            };
            let mut out = BTreeSet::new();
            for t in kg.triples_of_relation(relation) {
                if let Object::Literal(l) = &t.object {
                    // Non-numeric values never satisfy a numeric filter.
                    if let Some(x) = l.numeric() {
                        if keep(x, threshold) {
                            out.insert(t.subject.clone());
                        }
                    }
                }
            }
            Value::EntSet(out)
        }
        OpKind::CountEntset => Value::Int(ent(&step.args[0]).len() as u64),
        OpKind::IntersectEntsets => {
            let a = ent(&step.args[0]);
            let b = ent(&step.args[1]);
            Value::EntSet(a.intersection(b).cloned().collect())
        }
        OpKind::MaximumLitset => Value::Float(fold_numeric(litset(&step.args[0]), f64::max)?),
        OpKind::MinimumLitset => Value::Float(fold_numeric(litset(&step.args[0]), f64::min)?),
        OpKind::AverageLitset => {
            let values = numeric_values_text_sorted(litset(&step.args[0]))?;
            let sum: f64 = values.iter().sum();
            Value::Float(sum / values.len() as f64)
        }
        OpKind::ConcatLitsets => Value::LitSets(
            litset(&step.args[0]).to_vec(),
            litset(&step.args[1]).to_vec(),
        ),
    };
    Ok(value)
}

fn fold_numeric(bag: &[Literal], pick: fn(f64, f64) -> f64) -> Result<f64, RuntimeErrorKind> {
    bag.iter()
        .filter_map(|l| l.numeric())
        .reduce(pick)
        .ok_or(RuntimeErrorKind::EmptyNumericAggregate)
}

/// Numeric members of the bag, ordered by literal text so the float sum is
/// independent of bag order.
fn numeric_values_text_sorted(bag: &[Literal]) -> Result<Vec<f64>, RuntimeErrorKind> {
    let mut pairs: Vec<(&str, f64)> = bag
        .iter()
        .filter_map(|l| l.numeric().map(|x| (l.text(), x)))
        .collect();
    if pairs.is_empty() {
        return Err(RuntimeErrorKind::EmptyNumericAggregate);
    }
    pairs.sort_unstable_by(|a, b| a.0.cmp(b.0));
    Ok(pairs.into_iter().map(|(_, x)| x).collect())
}
