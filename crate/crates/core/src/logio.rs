//! On-disk decoder outputs: the token-distribution log (JSON lines) and the
//! beam file (TSV). The `score` pipeline only reads these two files, so any
//! external model that writes them plugs into the uncertainty machinery.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{escape_field, unescape_field};
use crate::surrogate::DecodeOutput;
use crate::uncertainty::{
    program_uncertainty, question_scores, BeamScore, DistError, ProgramUncertainty,
    QuestionScores, TokenDist,
};

/// One decoding position: the emitted token and every member's next-token
/// distribution, truncated to top-K entries plus a remainder bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogRecord {
    pub question_id: String,
    pub position: usize,
    pub token: String,
    pub context_hash: String,
    pub dists: Vec<TokenDist>,
}

/// One beam hypothesis with the evidence needed for sequence-level scores.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamRecord {
    pub question_id: String,
    pub rank: usize,
    pub avg_logprob: f64,
    pub token_len: usize,
    pub member_logprobs: Vec<f64>,
    pub program: String,
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("token log line {line}: {message}")]
    TokenLine { line: usize, message: String },
    #[error("beam file line {line}: {message}")]
    BeamLine { line: usize, message: String },
    #[error("question {question_id} has token records but no beams")]
    MissingBeams { question_id: String },
    #[error("question {question_id} has beams but no token records")]
    MissingTokens { question_id: String },
    #[error("question {question_id}: {source}")]
    BadDistributions {
        question_id: String,
        source: DistError,
    },
}

/// JSON-lines block for one decoded question.
pub fn token_log_lines(question_id: &str, output: &DecodeOutput) -> String {
    let mut out = String::new();
    for (position, record) in output.tokens.iter().enumerate() {
        let row = TokenLogRecord {
            question_id: question_id.to_string(),
            position,
            token: record.token.clone(),
            context_hash: record.context_hash.clone(),
            dists: record.member_dists.clone(),
        };
        out.push_str(&serde_json::to_string(&row).expect("plain data serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_token_log(text: &str) -> Result<Vec<TokenLogRecord>, LogError> {
    let mut records = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let record: TokenLogRecord =
            serde_json::from_str(raw).map_err(|e| LogError::TokenLine {
                line: idx + 1,
                message: e.to_string(),
            })?;
        records.push(record);
    }
    Ok(records)
}

/// TSV block for one decoded question: id, rank, average log-probability,
/// token count, comma-joined member log-probabilities, program
/// (field-escaped).
pub fn beam_lines(question_id: &str, output: &DecodeOutput) -> String {
    let mut out = String::new();
    for beam in &output.beams {
        let members = beam
            .member_logprobs
            .iter()
            .map(f64::to_string)
            .collect::<Vec<_>>()
            .join(",");
        out.push_str(&format!(
            "{question_id}\t{}\t{}\t{}\t{members}\t{}\n",
            beam.rank,
            beam.avg_logprob,
            beam.token_len,
            escape_field(&beam.program.render())
        ));
    }
    out
}

pub fn parse_beams(text: &str) -> Result<Vec<BeamRecord>, LogError> {
    let mut records = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let bad = |message: String| LogError::BeamLine { line, message };
        let cols: Vec<&str> = raw.split('\t').collect();
        if cols.len() != 6 {
            return Err(bad(format!("expected 6 columns, found {}", cols.len())));
        }
        let rank: usize = cols[1]
            .parse()
            .map_err(|_| bad(format!("bad rank {:?}", cols[1])))?;
        let avg_logprob: f64 = cols[2]
            .parse()
            .map_err(|_| bad(format!("bad log-probability {:?}", cols[2])))?;
        let token_len: usize = cols[3]
            .parse()
            .map_err(|_| bad(format!("bad token count {:?}", cols[3])))?;
        let member_logprobs = cols[4]
            .split(',')
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| bad(format!("bad member log-probability {v:?}")))
            })
            .collect::<Result<Vec<f64>, LogError>>()?;
        let program = unescape_field(cols[5]).map_err(|e| bad(e.to_string()))?;
        records.push(BeamRecord {
            question_id: cols[0].to_string(),
            rank,
            avg_logprob,
            token_len,
            member_logprobs,
            program,
        });
    }
    Ok(records)
}

/// Per-question uncertainty scores joined from the two logs, in the order
/// question ids first appear in the token log. Every question must appear
/// in both files.
pub fn join_scores(
    tokens: &[TokenLogRecord],
    beams: &[BeamRecord],
) -> Result<Vec<(String, QuestionScores, ProgramUncertainty)>, LogError> {
    let mut order: Vec<&str> = Vec::new();
    for record in tokens {
        if order.last() != Some(&record.question_id.as_str())
            && !order.contains(&record.question_id.as_str())
        {
            order.push(&record.question_id);
        }
    }
    let mut rows = Vec::with_capacity(order.len());
    for id in &order {
        let positions: Vec<&[TokenDist]> = tokens
            .iter()
            .filter(|t| t.question_id == *id)
            .map(|t| t.dists.as_slice())
            .collect();
        let token_scores =
            question_scores(positions.into_iter()).map_err(|source| LogError::BadDistributions {
                question_id: id.to_string(),
                source,
            })?;
        let beam_scores: Vec<BeamScore> = beams
            .iter()
            .filter(|b| b.question_id == *id)
            .map(|b| BeamScore {
                member_logprobs: b.member_logprobs.clone(),
                token_len: b.token_len,
            })
            .collect();
        if beam_scores.is_empty() {
            return Err(LogError::MissingBeams {
                question_id: id.to_string(),
            });
        }
        let program_scores =
            program_uncertainty(&beam_scores).map_err(|source| LogError::BadDistributions {
                question_id: id.to_string(),
                source,
            })?;
        rows.push((id.to_string(), token_scores, program_scores));
    }
    if let Some(beam) = beams.iter().find(|b| !order.contains(&b.question_id.as_str())) {
        return Err(LogError::MissingTokens {
            question_id: beam.question_id.clone(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{generate_toy_ehr_kg, ToyScale};
    use crate::surrogate::{Decoder, EnsembleConfig};

    fn decoded() -> (String, String) {
        let kg = generate_toy_ehr_kg(7, ToyScale::default());
        let decoder = Decoder::new(&kg, EnsembleConfig::default());
        let questions = [
            "what is /gender of /patient/1?",
            "how many patients whose /age greater than 30?",
        ];
        let mut tokens = String::new();
        let mut beams = String::new();
        for (i, q) in questions.iter().enumerate() {
            let out = decoder.decode(q).unwrap();
            let id = format!("q{:04}", i + 1);
            tokens.push_str(&token_log_lines(&id, &out));
            beams.push_str(&beam_lines(&id, &out));
        }
        (tokens, beams)
    }

    #[test]
    fn logs_roundtrip_and_join() {
        let (token_text, beam_text) = decoded();
        let tokens = parse_token_log(&token_text).unwrap();
        let beams = parse_beams(&beam_text).unwrap();
        assert!(tokens.len() > beams.len());
        let rows = join_scores(&tokens, &beams).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].0, "q0001");
        assert_eq!(rows[1].0, "q0002");
        // Unambiguous questions: every uncertainty is zero.
        for (_, token_scores, program_scores) in &rows {
            assert_eq!(token_scores.max_u_data, 0.0);
            assert!(program_scores.u_total.abs() < 1e-12);
        }
    }

    #[test]
    fn float_fields_roundtrip_exactly() {
        let (_, beam_text) = decoded();
        let beams = parse_beams(&beam_text).unwrap();
        let rewritten: String = beams
            .iter()
            .map(|b| {
                format!(
                    "{}\t{}\t{}\t{}\t{}\t{}\n",
                    b.question_id,
                    b.rank,
                    b.avg_logprob,
                    b.token_len,
                    b.member_logprobs
                        .iter()
                        .map(f64::to_string)
                        .collect::<Vec<_>>()
                        .join(","),
                    escape_field(&b.program)
                )
            })
            .collect();
        assert_eq!(parse_beams(&rewritten).unwrap(), beams);
    }

    #[test]
    fn join_rejects_widowed_questions() {
        let (token_text, beam_text) = decoded();
        let tokens = parse_token_log(&token_text).unwrap();
        let beams = parse_beams(&beam_text).unwrap();
        let only_first: Vec<BeamRecord> = beams
            .iter()
            .filter(|b| b.question_id == "q0001")
            .cloned()
            .collect();
        assert!(matches!(
            join_scores(&tokens, &only_first),
            Err(LogError::MissingBeams { question_id }) if question_id == "q0002"
        ));
        let only_first_tokens: Vec<TokenLogRecord> = tokens
            .iter()
            .filter(|t| t.question_id == "q0001")
            .cloned()
            .collect();
        assert!(matches!(
            join_scores(&only_first_tokens, &beams),
            Err(LogError::MissingTokens { question_id }) if question_id == "q0002"
        ));
    }

    #[test]
    fn malformed_lines_are_located() {
        assert!(matches!(
            parse_token_log("{\"broken\": true}"),
            Err(LogError::TokenLine { line: 1, .. })
        ));
        assert!(matches!(
            parse_beams("q1\t1\tx\t5\t-0.1\tprog"),
            Err(LogError::BeamLine { line: 1, .. })
        ));
        assert!(matches!(
            parse_beams("q1\t1\t-0.5"),
            Err(LogError::BeamLine { line: 1, .. })
        ));
    }
}
