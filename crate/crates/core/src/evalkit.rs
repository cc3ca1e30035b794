//! Ambiguity benchmark construction and the evaluation harness.
//!
//! A benchmark is a labeled set of questions against one graph. The `none`
//! stratum reuses the synthetic generator: every phrase is an explicit path
//! and every value an exact inventory string, so linking is unambiguous.
//! The `mild` stratum weakens exactly one slot (a vague relation word whose
//! rival value is only a fuzzy cousin, a misspelled value, or a code that
//! only one relation carries). The `high` stratum picks phrases the graph
//! genuinely cannot settle: title values present verbatim under two
//! relations, and codes shared between diagnosis and procedure records.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dsl::{escape_field, unescape_field, Arg, OpKind, Program, Step};
use crate::interp::{exec_program, normalize_value, values_match, Value};
use crate::kg::{KnowledgeGraph, Literal, Relation, ToySchema};
use crate::recovery::rouge_l;
use crate::surrogate::{Decoder, EnsembleConfig, VALUE_GATE};
use crate::synthgen::{generate_corpus, Aggr, Cond};
use crate::uncertainty::{
    program_uncertainty, question_scores, AmbiguityLabel, BeamScore, DistError, LabelReduction,
    ProgramUncertainty, QuestionScores,
};

/// Generic type words for questions whose record type is left open.
const NEUTRAL_TYPE_WORDS: &[&str] = &[
    "records", "entries", "items", "events", "rows", "cases", "charts", "reports",
];

#[derive(Debug, Clone)]
pub struct EvalCase {
    pub question_id: String,
    pub label: AmbiguityLabel,
    pub question: String,
    pub gold_program: Program,
    /// Canonical text of the gold answer on the benchmark graph.
    pub gold_answer: String,
}

/// Number of cases per ambiguity stratum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StrataConfig {
    pub none: usize,
    pub mild: usize,
    pub high: usize,
}

impl Default for StrataConfig {
    fn default() -> Self {
        StrataConfig {
            none: 400,
            mild: 150,
            high: 50,
        }
    }
}

impl StrataConfig {
    pub fn total(&self) -> usize {
        self.none + self.mild + self.high
    }
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("graph lacks material for the {0} stratum")]
    NotEnoughMaterial(&'static str),
}

/// A record family carrying paired title relations and a code relation.
struct TitleFamily<'a> {
    type_word: &'a str,
    vague_title: String,
    short: &'a Relation,
    long: &'a Relation,
    code: &'a Relation,
}

fn title_families<'a>(kg: &KnowledgeGraph, schema: &'a ToySchema) -> Vec<TitleFamily<'a>> {
    let mut families = Vec::new();
    for group in &schema.groups {
        let find = |suffix: &str| {
            group
                .relations
                .iter()
                .find(|r| r.as_str().ends_with(suffix) && kg.has_values(r))
        };
        let (Some(short), Some(long), Some(code)) = (
            find("_short_title"),
            find("_long_title"),
            find("_icd9_code"),
        ) else {
            continue;
        };
        families.push(TitleFamily {
            type_word: group.type_word,
            vague_title: format!("{} title", group.type_word),
            short,
            long,
            code,
        });
    }
    families
}

fn in_inventory(kg: &KnowledgeGraph, relation: &Relation, value: &str) -> bool {
    let normalized = normalize_value(value);
    kg.value_inventory(relation)
        .any(|v| normalize_value(v) == normalized)
}

/// Values held by `from` that are absent from `to` but have a fuzzy rival
/// there. Asking for such a value with a vague relation phrase leaves the
/// exact match ahead of the rival without eliminating it.
fn cousin_values(kg: &KnowledgeGraph, from: &Relation, to: &Relation) -> Vec<String> {
    kg.value_inventory(from)
        .filter(|v| !in_inventory(kg, to, v))
        .filter(|v| {
            kg.value_inventory(to)
                .any(|w| rouge_l(&normalize_value(v), &normalize_value(w)) >= VALUE_GATE)
        })
        .map(str::to_string)
        .collect()
}

/// Values present verbatim under both relations.
fn dual_values(kg: &KnowledgeGraph, a: &Relation, b: &Relation) -> Vec<String> {
    kg.value_inventory(a)
        .filter(|v| in_inventory(kg, b, v))
        .map(str::to_string)
        .collect()
}

fn filter_equal(register: usize, relation: &Relation, value: &str) -> Step {
    Step {
        register,
        op: OpKind::GenEntsetEqual,
        args: vec![
            Arg::Rel(relation.clone()),
            Arg::Lit(Literal::new(value)),
        ],
    }
}

fn count_program(relation: &Relation, value: &str) -> Program {
    Program::new(vec![
        filter_equal(0, relation, value),
        Step {
            register: 1,
            op: OpKind::CountEntset,
            args: vec![Arg::Register(0)],
        },
    ])
    .expect("fixed two-step shape")
}

fn lookup_program(filter_rel: &Relation, value: &str, project: &Relation) -> Program {
    Program::new(vec![
        filter_equal(0, filter_rel, value),
        Step {
            register: 1,
            op: OpKind::GenLitset,
            args: vec![Arg::Register(0), Arg::Rel(project.clone())],
        },
    ])
    .expect("fixed two-step shape")
}

fn aggregate_program(filter_rel: &Relation, value: &str, project: &Relation, aggr: Aggr) -> Program {
    Program::new(vec![
        filter_equal(0, filter_rel, value),
        Step {
            register: 1,
            op: OpKind::GenLitset,
            args: vec![Arg::Register(0), Arg::Rel(project.clone())],
        },
        Step {
            register: 2,
            op: aggr.op(),
            args: vec![Arg::Register(1)],
        },
    ])
    .expect("fixed three-step shape")
}

fn choose<'a, T>(rng: &mut ChaCha8Rng, pool: &'a [T]) -> &'a T {
    &pool[rng.random_range(0..pool.len())]
}

/// Question and gold program for one title-based case. The relation phrase
/// is the family's vague title word; the gold filters on `gold_rel`.
fn title_question(
    rng: &mut ChaCha8Rng,
    family: &TitleFamily<'_>,
    spoken_value: &str,
    gold_rel: &Relation,
    gold_value: &str,
    allow_aggregate: bool,
) -> (String, Program) {
    let relations = [family.short, family.long, family.code];
    // Shape: 0 lookup, 1 count, 2 aggregate (codes are numeric strings).
    let top = if allow_aggregate { 3 } else { 2 };
    match rng.random_range(0..top) {
        0 => {
            let project = *choose(rng, &relations);
            let question = format!(
                "what is {project} of {} whose {} {} {spoken_value}?",
                family.type_word,
                family.vague_title,
                Cond::Equal.surface(),
            );
            (question, lookup_program(gold_rel, gold_value, project))
        }
        1 => {
            let question = format!(
                "how many {} whose {} {} {spoken_value}?",
                family.type_word,
                family.vague_title,
                Cond::Equal.surface(),
            );
            (question, count_program(gold_rel, gold_value))
        }
        _ => {
            let aggr = *choose(rng, &Aggr::ALL);
            let question = format!(
                "what is {} {} of {} whose {} {} {spoken_value}?",
                aggr.surface(),
                family.code,
                family.type_word,
                family.vague_title,
                Cond::Equal.surface(),
            );
            (
                question,
                aggregate_program(gold_rel, gold_value, family.code, aggr),
            )
        }
    }
}

/// Builds the labeled question set. Within each stratum, draws are rejected
/// until the question is unique and its gold program reaches a non-null
/// answer; if unique material runs out, accepted cases repeat.
pub fn build_ambiguity_benchmark(
    kg: &KnowledgeGraph,
    schema: &ToySchema,
    strata: &StrataConfig,
    seed: u64,
) -> Result<Vec<EvalCase>, BuildError> {
    let families = title_families(kg, schema);
    if families.len() < 2 {
        return Err(BuildError::NotEnoughMaterial("high"));
    }

    struct Cousins {
        family: usize,
        source_is_short: bool,
        values: Vec<String>,
    }
    let mut cousins = Vec::new();
    for (i, f) in families.iter().enumerate() {
        for (source_is_short, from, to) in
            [(true, f.short, f.long), (false, f.long, f.short)]
        {
            let values = cousin_values(kg, from, to);
            if !values.is_empty() {
                cousins.push(Cousins {
                    family: i,
                    source_is_short,
                    values,
                });
            }
        }
    }
    // Typo material: multi-word cousins whose first word survives truncation.
    let typo_ok =
        |v: &str| v.split_whitespace().count() >= 3 && v.split(' ').next().unwrap().len() >= 4;
    let typo_pools: Vec<(usize, bool, Vec<String>)> = cousins
        .iter()
        .map(|c| {
            (
                c.family,
                c.source_is_short,
                c.values
                    .iter()
                    .filter(|v| typo_ok(v))
                    .cloned()
                    .collect::<Vec<_>>(),
            )
        })
        .filter(|(_, _, vs)| !vs.is_empty())
        .collect();
    let duals: Vec<(usize, Vec<String>)> = families
        .iter()
        .enumerate()
        .map(|(i, f)| (i, dual_values(kg, f.short, f.long)))
        .filter(|(_, vs)| !vs.is_empty())
        .collect();
    // Code pools are cross-family: unique codes resolve silently, shared
    // codes cannot be resolved at all.
    let code_rels: Vec<&Relation> = families.iter().map(|f| f.code).collect();
    let mut unique_codes: Vec<(usize, String)> = Vec::new();
    let mut shared_codes: Vec<String> = Vec::new();
    for (i, own) in code_rels.iter().enumerate() {
        for v in kg.value_inventory(own) {
            let elsewhere = code_rels
                .iter()
                .enumerate()
                .any(|(j, other)| j != i && in_inventory(kg, other, v));
            if elsewhere {
                if i == 0 {
                    shared_codes.push(v.to_string());
                }
            } else {
                unique_codes.push((i, v.to_string()));
            }
        }
    }

    if cousins.is_empty() {
        return Err(BuildError::NotEnoughMaterial("mild"));
    }
    if typo_pools.is_empty() || unique_codes.is_empty() {
        return Err(BuildError::NotEnoughMaterial("mild"));
    }
    if duals.is_empty() || shared_codes.is_empty() {
        return Err(BuildError::NotEnoughMaterial("high"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut drafts: Vec<(AmbiguityLabel, String, Program, String)> = Vec::new();

    // Sub-stratum sizes: vague wording, misspelled value, silently
    // resolvable code for mild; paired titles then shared codes for high.
    let hard = strata.mild / 10;
    let vague = (strata.mild - hard).div_ceil(2);
    let typo = strata.mild - hard - vague;
    let shared = strata.high * 2 / 5;
    let dual = strata.high - shared;

    let fill = |target: usize,
                    label: AmbiguityLabel,
                    name: &'static str,
                    rng: &mut ChaCha8Rng,
                    seen: &mut BTreeSet<String>,
                    drafts: &mut Vec<(AmbiguityLabel, String, Program, String)>,
                    mut draw: Box<dyn FnMut(&mut ChaCha8Rng) -> Option<(String, Program)> + '_>|
     -> Result<(), BuildError> {
        let start = drafts.len();
        let budget = target.saturating_mul(64);
        let mut attempts = 0;
        while drafts.len() - start < target && attempts < budget {
            attempts += 1;
            let Some((question, program)) = draw(rng) else {
                continue;
            };
            if seen.contains(&question) {
                continue;
            }
            let answer = exec_program(&program, kg)
                .ok()
                .and_then(|t| t.outcome.ok())
                .filter(|v| !v.is_null())
                .map(|v| v.canonical_text());
            let Some(answer) = answer else {
                continue;
            };
            seen.insert(question.clone());
            drafts.push((label, question, program, answer));
        }
        let made = drafts.len() - start;
        if made == 0 && target > 0 {
            return Err(BuildError::NotEnoughMaterial(name));
        }
        // Out of unique material: repeat accepted cases to hit the target.
        let mut i = 0;
        while drafts.len() - start < target {
            let repeat = drafts[start + i].clone();
            drafts.push(repeat);
            i += 1;
        }
        Ok(())
    };

    fill(
        vague,
        AmbiguityLabel::Mild,
        "mild",
        &mut rng,
        &mut seen,
        &mut drafts,
        Box::new(|rng| {
            let pool = choose(rng, &cousins);
            let f = &families[pool.family];
            let v = choose(rng, &pool.values);
            let gold_rel = if pool.source_is_short { f.short } else { f.long };
            Some(title_question(rng, f, v, gold_rel, v, true))
        }),
    )?;

    fill(
        typo,
        AmbiguityLabel::Mild,
        "mild",
        &mut rng,
        &mut seen,
        &mut drafts,
        Box::new(|rng| {
            let (family, source_is_short, values) = choose(rng, &typo_pools);
            let f = &families[*family];
            let v = choose(rng, values);
            let (first, rest) = v.split_once(' ').expect("typo pool is multi-word");
            let spoken = format!("{} {rest}", &first[..first.len() - 1]);
            if in_inventory(kg, f.short, &spoken) || in_inventory(kg, f.long, &spoken) {
                return None;
            }
            let gold_rel = if *source_is_short { f.short } else { f.long };
            Some(title_question(rng, f, &spoken, gold_rel, v, true))
        }),
    )?;

    fill(
        hard,
        AmbiguityLabel::Mild,
        "mild",
        &mut rng,
        &mut seen,
        &mut drafts,
        Box::new(|rng| {
            let (family, code) = choose(rng, &unique_codes);
            let tw = choose(rng, NEUTRAL_TYPE_WORDS);
            let question = format!("how many {tw} whose icd9 code {} {code}?", Cond::Equal.surface());
            Some((question, count_program(families[*family].code, code)))
        }),
    )?;

    fill(
        dual,
        AmbiguityLabel::High,
        "high",
        &mut rng,
        &mut seen,
        &mut drafts,
        Box::new(|rng| {
            let (family, values) = choose(rng, &duals);
            let f = &families[*family];
            let v = choose(rng, values);
            let gold_rel = if rng.random_range(0..2) == 0 {
                f.short
            } else {
                f.long
            };
            Some(title_question(rng, f, v, gold_rel, v, true))
        }),
    )?;

    fill(
        shared,
        AmbiguityLabel::High,
        "high",
        &mut rng,
        &mut seen,
        &mut drafts,
        Box::new(|rng| {
            let code = choose(rng, &shared_codes);
            let tw = choose(rng, NEUTRAL_TYPE_WORDS);
            let family = choose(rng, &families);
            let question = format!("how many {tw} whose icd9 code {} {code}?", Cond::Equal.surface());
            Some((question, count_program(family.code, code)))
        }),
    )?;

    // The unambiguous stratum reuses the synthetic generator, excluding any
    // question already taken, and draws evenly across templates.
    let corpus = generate_corpus(
        kg,
        schema,
        strata.none.div_ceil(crate::synthgen::TEMPLATE_IDS.len()),
        seed.wrapping_add(1),
        &seen,
    );
    let mut by_template: Vec<Vec<&crate::synthgen::SynthCase>> =
        vec![Vec::new(); crate::synthgen::TEMPLATE_IDS.len()];
    for case in &corpus.cases {
        by_template[(case.template_id - 1) as usize].push(case);
    }
    let mut none_cases: Vec<(AmbiguityLabel, String, Program, String)> = Vec::new();
    let mut row = 0;
    while none_cases.len() < strata.none {
        let before = none_cases.len();
        for cases in &by_template {
            if none_cases.len() == strata.none {
                break;
            }
            if let Some(case) = cases.get(row) {
                // The generator already verified a non-null answer.
                let answer = exec_program(&case.program, kg)
                    .expect("generated programs type-check")
                    .outcome
                    .expect("generated programs run")
                    .canonical_text();
                none_cases.push((
                    AmbiguityLabel::None,
                    case.question.clone(),
                    case.program.clone(),
                    answer,
                ));
            }
        }
        if none_cases.len() == before {
            return Err(BuildError::NotEnoughMaterial("none"));
        }
        row += 1;
    }

    none_cases.extend(drafts);
    Ok(none_cases
        .into_iter()
        .enumerate()
        .map(|(i, (label, question, gold_program, gold_answer))| EvalCase {
            question_id: format!("q{:04}", i + 1),
            label,
            question,
            gold_program,
            gold_answer,
        })
        .collect())
}

/// Outcome of decoding and scoring one case.
#[derive(Debug, Clone)]
pub struct QuestionResult {
    pub question_id: String,
    pub label: AmbiguityLabel,
    pub decode_failed: bool,
    /// Rank-1 answer matches the gold answer.
    pub correct: bool,
    /// Per-rank answer match, for the oracle top-k curve.
    pub beams_correct: Vec<bool>,
    pub token_scores: QuestionScores,
    pub program_scores: ProgramUncertainty,
    pub top_program: Option<String>,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("gold program for {question_id} does not produce an answer: {detail}")]
    GoldFailure {
        question_id: String,
        detail: String,
    },
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// Which per-question score a metric reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreKind {
    TokenUData,
    TokenUModel,
    TokenH,
    TokenHSingle,
    ProgramUTotal,
    ProgramUData,
    ProgramUModel,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 7] = [
        ScoreKind::TokenUData,
        ScoreKind::TokenUModel,
        ScoreKind::TokenH,
        ScoreKind::TokenHSingle,
        ScoreKind::ProgramUTotal,
        ScoreKind::ProgramUData,
        ScoreKind::ProgramUModel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScoreKind::TokenUData => "token_u_data",
            ScoreKind::TokenUModel => "token_u_model",
            ScoreKind::TokenH => "token_h",
            ScoreKind::TokenHSingle => "token_h_single",
            ScoreKind::ProgramUTotal => "program_u_total",
            ScoreKind::ProgramUData => "program_u_data",
            ScoreKind::ProgramUModel => "program_u_model",
        }
    }

    pub fn of(self, result: &QuestionResult) -> f64 {
        match self {
            ScoreKind::TokenUData => result.token_scores.max_u_data,
            ScoreKind::TokenUModel => result.token_scores.max_u_model,
            ScoreKind::TokenH => result.token_scores.max_h,
            ScoreKind::TokenHSingle => result.token_scores.max_h_single,
            ScoreKind::ProgramUTotal => result.program_scores.u_total,
            ScoreKind::ProgramUData => result.program_scores.u_data,
            ScoreKind::ProgramUModel => result.program_scores.u_model,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub results: Vec<QuestionResult>,
}

impl BenchOutcome {
    /// Fraction of cases whose rank-1 answer matches gold.
    pub fn execution_accuracy(&self) -> f64 {
        if self.results.is_empty() {
            return 0.0;
        }
        self.results.iter().filter(|r| r.correct).count() as f64 / self.results.len() as f64
    }

    /// Accuracy when an oracle may pick any of the first k hypotheses,
    /// for k = 1..=max_k.
    pub fn oracle_topk(&self, max_k: usize) -> Vec<f64> {
        (1..=max_k)
            .map(|k| {
                if self.results.is_empty() {
                    return 0.0;
                }
                let hits = self
                    .results
                    .iter()
                    .filter(|r| r.beams_correct.iter().take(k).any(|&c| c))
                    .count();
                hits as f64 / self.results.len() as f64
            })
            .collect()
    }

    /// Score and binary label vectors for a detection metric.
    pub fn score_label_pairs(
        &self,
        reduction: LabelReduction,
        kind: ScoreKind,
    ) -> (Vec<f64>, Vec<bool>) {
        let scores = self.results.iter().map(|r| kind.of(r)).collect();
        let labels = self
            .results
            .iter()
            .map(|r| reduction.positive(r.label))
            .collect();
        (scores, labels)
    }
}

/// Decodes every case and scores it against its gold answer.
pub fn run_benchmark(
    kg: &KnowledgeGraph,
    cases: &[EvalCase],
    config: &EnsembleConfig,
) -> Result<BenchOutcome, BenchError> {
    let decoder = Decoder::new(kg, config.clone());
    let mut results = Vec::with_capacity(cases.len());
    for case in cases {
        let gold = exec_program(&case.gold_program, kg)
            .map_err(|e| BenchError::GoldFailure {
                question_id: case.question_id.clone(),
                detail: e.to_string(),
            })?
            .outcome
            .map_err(|e| BenchError::GoldFailure {
                question_id: case.question_id.clone(),
                detail: e.to_string(),
            })?;
        // A mismatch against the recorded answer means the benchmark was
        // built against a different graph.
        if gold.canonical_text() != case.gold_answer {
            return Err(BenchError::GoldFailure {
                question_id: case.question_id.clone(),
                detail: "recorded answer does not match this graph".to_string(),
            });
        }

        let result = match decoder.decode(&case.question) {
            Err(_) => QuestionResult {
                question_id: case.question_id.clone(),
                label: case.label,
                decode_failed: true,
                correct: false,
                beams_correct: Vec::new(),
                token_scores: QuestionScores::default(),
                program_scores: ProgramUncertainty::default(),
                top_program: None,
            },
            Ok(out) => {
                let token_scores =
                    question_scores(out.tokens.iter().map(|t| t.member_dists.as_slice()))?;
                let beam_scores: Vec<BeamScore> = out
                    .beams
                    .iter()
                    .map(|b| BeamScore {
                        member_logprobs: b.member_logprobs.clone(),
                        token_len: b.token_len,
                    })
                    .collect();
                let program_scores = program_uncertainty(&beam_scores)?;
                let beams_correct: Vec<bool> = out
                    .beams
                    .iter()
                    .map(|b| answer_matches(kg, &b.program, &gold))
                    .collect();
                QuestionResult {
                    question_id: case.question_id.clone(),
                    label: case.label,
                    decode_failed: false,
                    correct: beams_correct[0],
                    beams_correct,
                    token_scores,
                    program_scores,
                    top_program: Some(out.beams[0].program.render()),
                }
            }
        };
        results.push(result);
    }
    Ok(BenchOutcome { results })
}

fn answer_matches(kg: &KnowledgeGraph, program: &Program, gold: &Value) -> bool {
    exec_program(program, kg)
        .ok()
        .and_then(|t| t.outcome.ok())
        .is_some_and(|v| values_match(&v, gold))
}

/// Fraction of predictions whose answer matches the gold answer of the
/// aligned case. Missing or failing predictions count as incorrect.
pub fn execution_accuracy(
    kg: &KnowledgeGraph,
    predictions: &[Option<Program>],
    cases: &[EvalCase],
) -> f64 {
    if cases.is_empty() {
        return 0.0;
    }
    let hits = predictions
        .iter()
        .zip(cases)
        .filter(|(prediction, case)| {
            let Some(program) = prediction else {
                return false;
            };
            let Ok(trace) = exec_program(&case.gold_program, kg) else {
                return false;
            };
            let Ok(gold) = trace.outcome else {
                return false;
            };
            answer_matches(kg, program, &gold)
        })
        .count();
    hits as f64 / cases.len() as f64
}

#[derive(Debug, Error)]
pub enum BenchFileError {
    #[error("line {line}: expected 5 tab-separated columns, found {found}")]
    ColumnCount { line: usize, found: usize },
    #[error("line {line}: unknown label {found:?}")]
    BadLabel { line: usize, found: String },
    #[error("line {line}: bad program field: {message}")]
    BadProgram { line: usize, message: String },
    #[error("line {line}: bad answer field: {message}")]
    BadAnswer { line: usize, message: String },
}

/// One line per case: id, label, question, program, answer (field-escaped).
pub fn benchmark_to_tsv(cases: &[EvalCase]) -> String {
    let mut out = String::new();
    for case in cases {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            case.question_id,
            case.label.as_str(),
            case.question,
            escape_field(&case.gold_program.render()),
            escape_field(&case.gold_answer)
        ));
    }
    out
}

pub fn benchmark_from_tsv(text: &str) -> Result<Vec<EvalCase>, BenchFileError> {
    let mut cases = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = raw.split('\t').collect();
        if cols.len() != 5 {
            return Err(BenchFileError::ColumnCount {
                line,
                found: cols.len(),
            });
        }
        let label = AmbiguityLabel::parse(cols[1]).ok_or_else(|| BenchFileError::BadLabel {
            line,
            found: cols[1].to_string(),
        })?;
        let program_text =
            unescape_field(cols[3]).map_err(|e| BenchFileError::BadProgram {
                line,
                message: e.to_string(),
            })?;
        let gold_program =
            Program::parse(&program_text).map_err(|e| BenchFileError::BadProgram {
                line,
                message: e.to_string(),
            })?;
        let gold_answer = unescape_field(cols[4]).map_err(|e| BenchFileError::BadAnswer {
            line,
            message: e.to_string(),
        })?;
        cases.push(EvalCase {
            question_id: cols[0].to_string(),
            label,
            question: cols[2].to_string(),
            gold_program,
            gold_answer,
        });
    }
    Ok(cases)
}
