//! Token stream form of a program.
//!
//! Decoders emit programs one token at a time, so the granularity matters:
//! relation paths split on `/` and string values split on whitespace, which
//! places disagreements between near-identical programs on the few tokens
//! that actually differ.
//!
//! String contents are tokenized in escaped form. The escaped text cannot
//! contain a bare `"` or a real newline, so the `"` delimiter token and the
//! `\n` step separator token never collide with content tokens.

use super::{escape, parse_program, Arg, ParseError, Program};

pub fn tokenize_program(program: &Program) -> Vec<String> {
    let mut tokens: Vec<String> = Vec::new();
    for (i, step) in program.steps().iter().enumerate() {
        if i > 0 {
            tokens.push("\n".into());
        }
        tokens.push(format!("r{}", step.register));
        tokens.push("=".into());
        tokens.push(step.op.name().into());
        tokens.push("(".into());
        for (j, arg) in step.args.iter().enumerate() {
            if j > 0 {
                tokens.push(",".into());
            }
            match arg {
                Arg::Register(k) => tokens.push(format!("r{k}")),
                Arg::Rel(r) => push_string_tokens(&mut tokens, r.as_str()),
                Arg::Lit(l) => push_string_tokens(&mut tokens, l.text()),
            }
        }
        tokens.push(")".into());
    }
    tokens
}

fn push_string_tokens(tokens: &mut Vec<String>, text: &str) {
    tokens.push("\"".into());
    let escaped = escape(text);
    let mut word = String::new();
    let mut chars = escaped.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '/' => {
                if !word.is_empty() {
                    tokens.push(std::mem::take(&mut word));
                }
                tokens.push("/".into());
            }
            ' ' => {
                if !word.is_empty() {
                    tokens.push(std::mem::take(&mut word));
                }
                let mut run = String::from(' ');
                while chars.peek() == Some(&' ') {
                    run.push(chars.next().unwrap());
                }
                tokens.push(run);
            }
            c => word.push(c),
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens.push("\"".into());
}

/// Inverse of [`tokenize_program`] for well-formed streams; reconstructs
/// the canonical text and parses it.
pub fn detokenize_program(tokens: &[String]) -> Result<Program, ParseError> {
    let mut text = String::new();
    let mut in_string = false;
    for token in tokens {
        if in_string {
            if token == "\"" {
                in_string = false;
                text.push('"');
            } else {
                text.push_str(token);
            }
            continue;
        }
        match token.as_str() {
            "\"" => {
                in_string = true;
                text.push('"');
            }
            "\n" => text.push('\n'),
            "=" => text.push_str(" = "),
            "," => text.push_str(", "),
            other => text.push_str(other),
        }
    }
    parse_program(&text)
}
