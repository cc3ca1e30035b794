//! Program representation for the query DSL.
//!
//! A program is a straight-line sequence of steps `rN = op(arg, ...)`.
//! Registers are numbered consecutively from zero and every argument is
//! either an earlier register, a relation path, or a literal. There is no
//! control flow; the last register holds the answer.

mod parser;
mod token;

pub use parser::{parse_program, ParseError};
pub use token::{detokenize_program, tokenize_program};

use std::fmt;

use thiserror::Error;

use crate::kg::{Literal, Relation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValueType {
    EntSet,
    LitSet,
    LitSets,
    Int,
    Float,
    Rel,
    Lit,
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ValueType::EntSet => "entset",
            ValueType::LitSet => "litset",
            ValueType::LitSets => "litsets",
            ValueType::Int => "int",
            ValueType::Float => "float",
            ValueType::Rel => "rel",
            ValueType::Lit => "lit",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpKind {
    GenEntsetDown,
    GenEntsetUp,
    GenLitset,
    GenEntsetEqual,
    GenEntsetAtleast,
    GenEntsetAtmost,
    GenEntsetLess,
    GenEntsetMore,
    CountEntset,
    IntersectEntsets,
    MaximumLitset,
    MinimumLitset,
    AverageLitset,
    ConcatLitsets,
}

impl OpKind {
    pub const ALL: [OpKind; 14] = [
        OpKind::GenEntsetDown,
        OpKind::GenEntsetUp,
        OpKind::GenLitset,
        OpKind::GenEntsetEqual,
        OpKind::GenEntsetAtleast,
        OpKind::GenEntsetAtmost,
        OpKind::GenEntsetLess,
        OpKind::GenEntsetMore,
        OpKind::CountEntset,
        OpKind::IntersectEntsets,
        OpKind::MaximumLitset,
        OpKind::MinimumLitset,
        OpKind::AverageLitset,
        OpKind::ConcatLitsets,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::GenEntsetDown => "gen_entset_down",
            OpKind::GenEntsetUp => "gen_entset_up",
            OpKind::GenLitset => "gen_litset",
            OpKind::GenEntsetEqual => "gen_entset_equal",
            OpKind::GenEntsetAtleast => "gen_entset_atleast",
            OpKind::GenEntsetAtmost => "gen_entset_atmost",
            OpKind::GenEntsetLess => "gen_entset_less",
            OpKind::GenEntsetMore => "gen_entset_more",
            OpKind::CountEntset => "count_entset",
            OpKind::IntersectEntsets => "intersect_entsets",
            OpKind::MaximumLitset => "maximum_litset",
            OpKind::MinimumLitset => "minimum_litset",
            OpKind::AverageLitset => "average_litset",
            OpKind::ConcatLitsets => "concat_litsets",
        }
    }

    pub fn from_name(name: &str) -> Option<OpKind> {
        OpKind::ALL.into_iter().find(|op| op.name() == name)
    }

    pub fn params(self) -> &'static [ValueType] {
        use ValueType::*;
        match self {
            OpKind::GenEntsetDown => &[EntSet, Rel],
            OpKind::GenEntsetUp => &[Rel, EntSet],
            OpKind::GenLitset => &[EntSet, Rel],
            OpKind::GenEntsetEqual
            | OpKind::GenEntsetAtleast
            | OpKind::GenEntsetAtmost
            | OpKind::GenEntsetLess
            | OpKind::GenEntsetMore => &[Rel, Lit],
            OpKind::CountEntset => &[EntSet],
            OpKind::IntersectEntsets => &[EntSet, EntSet],
            OpKind::MaximumLitset | OpKind::MinimumLitset | OpKind::AverageLitset => &[LitSet],
            OpKind::ConcatLitsets => &[LitSet, LitSet],
        }
    }

    pub fn return_type(self) -> ValueType {
        match self {
            OpKind::GenEntsetDown
            | OpKind::GenEntsetUp
            | OpKind::GenEntsetEqual
            | OpKind::GenEntsetAtleast
            | OpKind::GenEntsetAtmost
            | OpKind::GenEntsetLess
            | OpKind::GenEntsetMore
            | OpKind::IntersectEntsets => ValueType::EntSet,
            OpKind::GenLitset => ValueType::LitSet,
            OpKind::CountEntset => ValueType::Int,
            OpKind::MaximumLitset | OpKind::MinimumLitset | OpKind::AverageLitset => {
                ValueType::Float
            }
            OpKind::ConcatLitsets => ValueType::LitSets,
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Arg {
    Register(usize),
    Rel(Relation),
    Lit(Literal),
}

impl Arg {
    /// Static type of the argument; registers resolve through `types`.
    fn value_type(&self, types: &[ValueType]) -> ValueType {
        match self {
            Arg::Register(k) => types[*k],
            Arg::Rel(_) => ValueType::Rel,
            Arg::Lit(_) => ValueType::Lit,
        }
    }
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::Register(k) => write!(f, "r{k}"),
            Arg::Rel(r) => write!(f, "\"{}\"", escape(r.as_str())),
            Arg::Lit(l) => write!(f, "\"{}\"", escape(l.text())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Step {
    pub register: usize,
    pub op: OpKind,
    pub args: Vec<Arg>,
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{} = {}(", self.register, self.op)?;
        for (i, arg) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{arg}")?;
        }
        f.write_str(")")
    }
}

/// Structural problems: wrong register numbering, references to registers
/// that do not exist yet, or wrong argument counts.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProgramError {
    #[error("program has no steps")]
    Empty,
    #[error("step {step}: register must be r{step}, found r{found}")]
    RegisterOrder { step: usize, found: usize },
    #[error("step {step}: argument references r{register} before it is assigned")]
    ForwardRegister { step: usize, register: usize },
    #[error("step {step}: {op} takes {expected} argument(s), found {found}")]
    Arity {
        step: usize,
        op: OpKind,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("step {step}, argument {arg}: {op} expects {expected}, found {found}")]
pub struct TypeError {
    pub step: usize,
    pub arg: usize,
    pub op: OpKind,
    pub expected: ValueType,
    pub found: ValueType,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Program {
    steps: Vec<Step>,
}

impl Program {
    /// Validates structure only; see [`Program::type_check`] for types.
    pub fn new(steps: Vec<Step>) -> Result<Self, ProgramError> {
        if steps.is_empty() {
            return Err(ProgramError::Empty);
        }
        for (i, step) in steps.iter().enumerate() {
            if step.register != i {
                return Err(ProgramError::RegisterOrder {
                    step: i,
                    found: step.register,
                });
            }
            let expected = step.op.params().len();
            if step.args.len() != expected {
                return Err(ProgramError::Arity {
                    step: i,
                    op: step.op,
                    expected,
                    found: step.args.len(),
                });
            }
            for arg in &step.args {
                if let Arg::Register(k) = arg {
                    if *k >= i {
                        return Err(ProgramError::ForwardRegister { step: i, register: *k });
                    }
                }
            }
        }
        Ok(Program { steps })
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        parse_program(text)
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    /// Type of every register. The answer type is the last element.
    pub fn type_check(&self) -> Result<Vec<ValueType>, TypeError> {
        let mut types: Vec<ValueType> = Vec::with_capacity(self.steps.len());
        for (i, step) in self.steps.iter().enumerate() {
            for (j, (arg, &expected)) in step.args.iter().zip(step.op.params()).enumerate() {
                let found = arg.value_type(&types);
                if found != expected {
                    return Err(TypeError {
                        step: i,
                        arg: j,
                        op: step.op,
                        expected,
                        found,
                    });
                }
            }
            types.push(step.op.return_type());
        }
        Ok(types)
    }

    /// Canonical rendering; parses back to an equal program.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, step) in self.steps.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(&step.to_string());
        }
        out
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Escapes backslash, double quote, newline, and tab.
pub(crate) fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out
}

/// Backslash-escapes newlines and tabs so arbitrary text fits in one field
/// of a tab-separated line. Inverse of [`unescape_field`].
pub fn escape_field(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out
}

/// Undoes [`escape_field`]. Unknown escapes and a trailing backslash are
/// reported rather than guessed at.
pub fn unescape_field(text: &str) -> Result<String, FieldError> {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some(other) => return Err(FieldError::BadEscape(other)),
            None => return Err(FieldError::TrailingBackslash),
        }
    }
    Ok(out)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FieldError {
    #[error("invalid escape \\{0} in field")]
    BadEscape(char),
    #[error("field ends with a bare backslash")]
    TrailingBackslash,
}
