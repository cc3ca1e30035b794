//! Text form parser for programs.
//!
//! One step per line: `rN = op_name(arg, ...)`. Arguments are registers
//! (`rK`) or double-quoted strings; the operation signature decides whether
//! a string is read as a relation or a literal. Blank lines are skipped.

use thiserror::Error;

use crate::kg::{Literal, Relation};

use super::{Arg, OpKind, Program, ProgramError, Step, ValueType};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}, column {col}: expected {expected}")]
    Expected {
        line: usize,
        col: usize,
        expected: &'static str,
    },
    #[error("line {line}: unknown operation {name:?}")]
    UnknownOp { line: usize, name: String },
    #[error("line {line}: {op} takes {expected} argument(s), found {found}")]
    Arity {
        line: usize,
        op: OpKind,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column {col}: unterminated string")]
    UnterminatedString { line: usize, col: usize },
    #[error("line {line}, column {col}: invalid escape \\{escape}")]
    InvalidEscape { line: usize, col: usize, escape: char },
    #[error("line {line}: register must be r{expected}, found r{found}")]
    RegisterOrder {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: argument references r{register} before it is assigned")]
    ForwardRegister { line: usize, register: usize },
    #[error("program has no steps")]
    Empty,
}

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    _text: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str, line: usize) -> Self {
        Cursor {
            chars: text.chars().collect(),
            pos: 0,
            line,
            _text: text,
        }
    }

    fn col(&self) -> usize {
        self.pos + 1
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn skip_spaces(&mut self) {
        while matches!(self.peek(), Some(c) if c == ' ' || c == '\t') {
            self.pos += 1;
        }
    }

    fn expect_char(&mut self, want: char, expected: &'static str) -> Result<(), ParseError> {
        if self.peek() == Some(want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(ParseError::Expected {
                line: self.line,
                col: self.col(),
                expected,
            })
        }
    }

    fn register(&mut self) -> Result<usize, ParseError> {
        let start = self.col();
        self.expect_char('r', "register like r0")?;
        let mut digits = String::new();
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            digits.push(self.bump().unwrap());
        }
        digits.parse().map_err(|_| ParseError::Expected {
            line: self.line,
            col: start,
            expected: "register like r0",
        })
    }

    fn ident(&mut self) -> String {
        let mut out = String::new();
        while matches!(self.peek(), Some(c) if c.is_ascii_lowercase() || c == '_') {
            out.push(self.bump().unwrap());
        }
        out
    }

    fn string(&mut self) -> Result<String, ParseError> {
        let open = self.col();
        self.expect_char('"', "opening quote")?;
        let mut out = String::new();
        loop {
            match self.bump() {
                None => {
                    return Err(ParseError::UnterminatedString {
                        line: self.line,
                        col: open,
                    })
                }
                Some('"') => return Ok(out),
                Some('\\') => match self.bump() {
                    Some('\\') => out.push('\\'),
                    Some('"') => out.push('"'),
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some(other) => {
                        return Err(ParseError::InvalidEscape {
                            line: self.line,
                            col: self.col() - 1,
                            escape: other,
                        })
                    }
                    None => {
                        return Err(ParseError::UnterminatedString {
                            line: self.line,
                            col: open,
                        })
                    }
                },
                Some(c) => out.push(c),
            }
        }
    }
}

pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut steps: Vec<Step> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let step = parse_step(raw, line_no, steps.len())?;
        steps.push(step);
    }
    if steps.is_empty() {
        return Err(ParseError::Empty);
    }
    // Structure was checked inline, so this cannot fail.
    Program::new(steps).map_err(|e| match e {
        ProgramError::Empty => ParseError::Empty,
        other => unreachable!("parser enforced structure: {other}"),
    })
}

fn parse_step(raw: &str, line: usize, step_index: usize) -> Result<Step, ParseError> {
    let mut cur = Cursor::new(raw, line);
    cur.skip_spaces();
    let register = cur.register()?;
    if register != step_index {
        return Err(ParseError::RegisterOrder {
            line,
            expected: step_index,
            found: register,
        });
    }
    cur.skip_spaces();
    cur.expect_char('=', "'='")?;
    cur.skip_spaces();
    let name_col = cur.col();
    let name = cur.ident();
    if name.is_empty() {
        return Err(ParseError::Expected {
            line,
            col: name_col,
            expected: "operation name",
        });
    }
    let op = OpKind::from_name(&name).ok_or(ParseError::UnknownOp {
        line,
        name: name.clone(),
    })?;
    cur.expect_char('(', "'('")?;

    let mut raw_args: Vec<RawArg> = Vec::new();
    cur.skip_spaces();
    if cur.peek() == Some(')') {
        cur.bump();
    } else {
        loop {
            cur.skip_spaces();
            let col = cur.col();
            let arg = match cur.peek() {
                Some('"') => RawArg::Text(cur.string()?),
                Some('r') => RawArg::Register(cur.register()?),
                _ => {
                    return Err(ParseError::Expected {
                        line,
                        col,
                        expected: "register or quoted string",
                    })
                }
            };
            raw_args.push(arg);
            cur.skip_spaces();
            match cur.bump() {
                Some(',') => continue,
                Some(')') => break,
                _ => {
                    return Err(ParseError::Expected {
                        line,
                        col: cur.col(),
                        expected: "',' or ')'",
                    })
                }
            }
        }
    }
    cur.skip_spaces();
    if cur.peek().is_some() {
        return Err(ParseError::Expected {
            line,
            col: cur.col(),
            expected: "end of line",
        });
    }

    let params = op.params();
    if raw_args.len() != params.len() {
        return Err(ParseError::Arity {
            line,
            op,
            expected: params.len(),
            found: raw_args.len(),
        });
    }

    let mut args = Vec::with_capacity(raw_args.len());
    for (raw_arg, &param) in raw_args.into_iter().zip(params) {
        let arg = match raw_arg {
            RawArg::Register(k) => {
                if k >= step_index {
                    return Err(ParseError::ForwardRegister { line, register: k });
                }
                Arg::Register(k)
            }
            // The signature slot decides the reading. A string that is not
            // a valid relation path stays a literal so the type checker can
            // report the mismatch.
            RawArg::Text(text) => match param {
                ValueType::Rel => match Relation::new(text.clone()) {
                    Ok(r) => Arg::Rel(r),
                    Err(_) => Arg::Lit(Literal::new(text)),
                },
                _ => Arg::Lit(Literal::new(text)),
            },
        };
        args.push(arg);
    }

    Ok(Step {
        register: step_index,
        op,
        args,
    })
}

enum RawArg {
    Register(usize),
    Text(String),
}
