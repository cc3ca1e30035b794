//! Synthetic question and program generation.
//!
//! Eight fixed question shapes, each paired with a program skeleton. Slots
//! are filled from an actual subject's triples, so every generated program
//! executes to a non-null answer on the graph it was sampled from. Each
//! template draws from its own seeded random stream: growing the corpus
//! never changes the cases already generated for a template.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dsl::{escape_field, unescape_field, Arg, OpKind, Program, Step};
use crate::interp::exec_program;
use crate::kg::{KnowledgeGraph, Literal, NodeId, Relation, ToySchema};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCase {
    pub template_id: u8,
    pub question: String,
    pub program: Program,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GenStats {
    pub rejected_duplicate: usize,
    pub rejected_excluded: usize,
    pub rejected_null: usize,
    /// Templates that could not reach the requested count.
    pub shortfall: Vec<(u8, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub cases: Vec<SynthCase>,
    pub stats: GenStats,
}

pub const TEMPLATE_IDS: [u8; 8] = [1, 2, 3, 4, 5, 6, 7, 8];

/// Comparison spoken in questions and its filter operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cond {
    Equal,
    Atleast,
    Atmost,
    Less,
    More,
}

impl Cond {
    pub const ALL: [Cond; 5] = [
        Cond::Equal,
        Cond::Atleast,
        Cond::Atmost,
        Cond::Less,
        Cond::More,
    ];

    pub fn surface(self) -> &'static str {
        match self {
            Cond::Equal => "equal to",
            Cond::Atleast => "greater than or equal to",
            Cond::Atmost => "less than or equal to",
            Cond::Less => "less than",
            Cond::More => "greater than",
        }
    }

    pub fn op(self) -> OpKind {
        match self {
            Cond::Equal => OpKind::GenEntsetEqual,
            Cond::Atleast => OpKind::GenEntsetAtleast,
            Cond::Atmost => OpKind::GenEntsetAtmost,
            Cond::Less => OpKind::GenEntsetLess,
            Cond::More => OpKind::GenEntsetMore,
        }
    }
}

/// Aggregate spoken in questions and its reduction operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggr {
    Minimum,
    Maximum,
    Average,
}

impl Aggr {
    pub const ALL: [Aggr; 3] = [Aggr::Minimum, Aggr::Maximum, Aggr::Average];

    pub fn surface(self) -> &'static str {
        match self {
            Aggr::Minimum => "minimum",
            Aggr::Maximum => "maximum",
            Aggr::Average => "average",
        }
    }

    pub fn op(self) -> OpKind {
        match self {
            Aggr::Minimum => OpKind::MinimumLitset,
            Aggr::Maximum => OpKind::MaximumLitset,
            Aggr::Average => OpKind::AverageLitset,
        }
    }
}

/// One entity family resolved against the graph.
struct Family<'a> {
    type_word: &'static str,
    /// Group relations that actually carry literal values.
    relations: Vec<&'a Relation>,
    /// Parallel to `relations`: every inventory value parses as a number.
    numeric: Vec<bool>,
    /// Subjects of this family with their literal triples per relation.
    subjects: Vec<(&'a NodeId, BTreeMap<&'a Relation, Vec<&'a Literal>>)>,
}

fn resolve_families<'a>(kg: &'a KnowledgeGraph, schema: &'a ToySchema) -> Vec<Family<'a>> {
    let by_subject = kg.subjects_with_literals();
    let mut families = Vec::new();
    for group in &schema.groups {
        let relations: Vec<&Relation> = group
            .relations
            .iter()
            .filter(|r| kg.value_inventory(r).next().is_some())
            .collect();
        if relations.is_empty() {
            continue;
        }
        let numeric = relations
            .iter()
            .map(|r| {
                kg.value_inventory(r)
                    .all(|v| Literal::new(v).numeric().is_some())
            })
            .collect();
        let rel_set: BTreeSet<&Relation> = relations.iter().copied().collect();
        let mut subjects = Vec::new();
        for (subject, pairs) in &by_subject {
            let mut per_rel: BTreeMap<&Relation, Vec<&Literal>> = BTreeMap::new();
            for (r, l) in pairs {
                if rel_set.contains(r) {
                    per_rel.entry(r).or_default().push(l);
                }
            }
            if !per_rel.is_empty() {
                subjects.push((*subject, per_rel));
            }
        }
        if !subjects.is_empty() {
            families.push(Family {
                type_word: group.type_word,
                relations,
                numeric,
                subjects,
            });
        }
    }
    families
}

/// A sampled condition: the relation, the spoken comparison, and the value.
struct Binding<'a> {
    relation: &'a Relation,
    cond: Cond,
    value: String,
}

impl Binding<'_> {
    fn filter_step(&self, register: usize) -> Step {
        Step {
            register,
            op: self.cond.op(),
            args: vec![
                Arg::Rel(self.relation.clone()),
                Arg::Lit(Literal::new(self.value.clone())),
            ],
        }
    }

    fn clause(&self) -> String {
        format!("{} {} {}", self.relation, self.cond.surface(), self.value)
    }
}

struct Sampler<'a> {
    kg: &'a KnowledgeGraph,
    families: Vec<Family<'a>>,
}

impl<'a> Sampler<'a> {
    /// Families eligible for a template: enough distinct relations and, if
    /// required, at least one fully numeric relation.
    fn eligible(&self, min_relations: usize, needs_numeric: bool) -> Vec<usize> {
        self.families
            .iter()
            .enumerate()
            .filter(|(_, f)| {
                f.relations.len() >= min_relations
                    && (!needs_numeric || f.numeric.iter().any(|&n| n))
            })
            .map(|(i, _)| i)
            .collect()
    }

    /// A condition on `relation` that the given subject satisfies. Strict
    /// comparisons need a second inventory value on the correct side.
    fn sample_binding(
        &self,
        rng: &mut ChaCha8Rng,
        relation: &'a Relation,
        own_values: &[&Literal],
        numeric: bool,
    ) -> Binding<'a> {
        let own = own_values[rng.random_range(0..own_values.len())];
        let mut options = vec![Cond::Equal];
        if numeric {
            if let Some(x) = own.numeric() {
                options.push(Cond::Atleast);
                options.push(Cond::Atmost);
                let below: Vec<&str> = self
                    .kg
                    .value_inventory(relation)
                    .filter(|v| Literal::new(*v).numeric().is_some_and(|w| w < x))
                    .collect();
                let above: Vec<&str> = self
                    .kg
                    .value_inventory(relation)
                    .filter(|v| Literal::new(*v).numeric().is_some_and(|w| w > x))
                    .collect();
                if !below.is_empty() {
                    options.push(Cond::More);
                }
                if !above.is_empty() {
                    options.push(Cond::Less);
                }
                let cond = options[rng.random_range(0..options.len())];
                let value = match cond {
                    Cond::More => below[rng.random_range(0..below.len())].to_string(),
                    Cond::Less => above[rng.random_range(0..above.len())].to_string(),
                    _ => own.text().to_string(),
                };
                return Binding {
                    relation,
                    cond,
                    value,
                };
            }
        }
        Binding {
            relation,
            cond: Cond::Equal,
            value: own.text().to_string(),
        }
    }
}

/// Draws one candidate (question, program) for the template, or None when
/// the graph cannot support the template at all.
fn draw(
    sampler: &Sampler<'_>,
    schema: &ToySchema,
    template_id: u8,
    rng: &mut ChaCha8Rng,
) -> Option<(String, Program)> {
    let need_relations = match template_id {
        1 | 5 => 1,
        2 | 3 | 6 | 7 => 2,
        4 | 8 => 3,
        _ => unreachable!("unknown template {template_id}"),
    };
    let needs_numeric = matches!(template_id, 7 | 8);
    let eligible = sampler.eligible(need_relations, needs_numeric);
    if eligible.is_empty() {
        return None;
    }
    let family = &sampler.families[eligible[rng.random_range(0..eligible.len())]];
    let (subject, per_rel) = &family.subjects[rng.random_range(0..family.subjects.len())];

    // Relations this subject actually carries, in family order.
    let held: Vec<usize> = family
        .relations
        .iter()
        .enumerate()
        .filter(|(_, r)| per_rel.contains_key(**r))
        .map(|(i, _)| i)
        .collect();

    let pick_distinct = |rng: &mut ChaCha8Rng, pool: &[usize], k: usize| -> Option<Vec<usize>> {
        if pool.len() < k {
            return None;
        }
        let mut chosen = Vec::with_capacity(k);
        let mut remaining: Vec<usize> = pool.to_vec();
        for _ in 0..k {
            let at = rng.random_range(0..remaining.len());
            chosen.push(remaining.swap_remove(at));
        }
        Some(chosen)
    };

    let bind = |rng: &mut ChaCha8Rng, idx: usize| {
        let r = family.relations[idx];
        sampler.sample_binding(rng, r, &per_rel[r], family.numeric[idx])
    };

    let pin_entity = |register: usize| -> Step {
        Step {
            register,
            op: OpKind::GenEntsetEqual,
            args: vec![
                Arg::Rel(schema.id_relation.clone()),
                Arg::Lit(Literal::new(subject.as_str())),
            ],
        }
    };
    let litset = |register: usize, source: usize, relation: &Relation| -> Step {
        Step {
            register,
            op: OpKind::GenLitset,
            args: vec![Arg::Register(source), Arg::Rel(relation.clone())],
        }
    };

    let case = match template_id {
        1 => {
            let idx = pick_distinct(rng, &held, 1)?;
            let r = family.relations[idx[0]];
            let question = format!("what is {r} of {subject}?");
            let program = Program::new(vec![pin_entity(0), litset(1, 0, r)]).unwrap();
            (question, program)
        }
        2 => {
            let idx = pick_distinct(rng, &held, 2)?;
            let (r1, r2) = (family.relations[idx[0]], family.relations[idx[1]]);
            let question = format!("what are {r1} and {r2} of {subject}?");
            let program = Program::new(vec![
                pin_entity(0),
                litset(1, 0, r1),
                litset(2, 0, r2),
                Step {
                    register: 3,
                    op: OpKind::ConcatLitsets,
                    args: vec![Arg::Register(1), Arg::Register(2)],
                },
            ])
            .unwrap();
            (question, program)
        }
        3 => {
            let idx = pick_distinct(rng, &held, 2)?;
            let r1 = family.relations[idx[0]];
            let b = bind(rng, idx[1]);
            let question = format!(
                "what is {r1} of {} whose {}?",
                family.type_word,
                b.clause()
            );
            let program = Program::new(vec![b.filter_step(0), litset(1, 0, r1)]).unwrap();
            (question, program)
        }
        4 => {
            let idx = pick_distinct(rng, &held, 3)?;
            let (r1, r2) = (family.relations[idx[0]], family.relations[idx[1]]);
            let b = bind(rng, idx[2]);
            let question = format!(
                "what are {r1} and {r2} of {} whose {}?",
                family.type_word,
                b.clause()
            );
            let program = Program::new(vec![
                b.filter_step(0),
                litset(1, 0, r1),
                litset(2, 0, r2),
                Step {
                    register: 3,
                    op: OpKind::ConcatLitsets,
                    args: vec![Arg::Register(1), Arg::Register(2)],
                },
            ])
            .unwrap();
            (question, program)
        }
        5 => {
            let idx = pick_distinct(rng, &held, 1)?;
            let b = bind(rng, idx[0]);
            let question = format!("how many {} whose {}?", family.type_word, b.clause());
            let program = Program::new(vec![
                b.filter_step(0),
                Step {
                    register: 1,
                    op: OpKind::CountEntset,
                    args: vec![Arg::Register(0)],
                },
            ])
            .unwrap();
            (question, program)
        }
        6 => {
            let idx = pick_distinct(rng, &held, 2)?;
            let b1 = bind(rng, idx[0]);
            let b2 = bind(rng, idx[1]);
            let question = format!(
                "how many {} whose {} and {}?",
                family.type_word,
                b1.clause(),
                b2.clause()
            );
            let program = Program::new(vec![
                b1.filter_step(0),
                b2.filter_step(1),
                Step {
                    register: 2,
                    op: OpKind::IntersectEntsets,
                    args: vec![Arg::Register(0), Arg::Register(1)],
                },
                Step {
                    register: 3,
                    op: OpKind::CountEntset,
                    args: vec![Arg::Register(2)],
                },
            ])
            .unwrap();
            (question, program)
        }
        7 => {
            let numeric_held: Vec<usize> = held
                .iter()
                .copied()
                .filter(|&i| family.numeric[i])
                .collect();
            if numeric_held.is_empty() {
                return None;
            }
            let r1_idx = numeric_held[rng.random_range(0..numeric_held.len())];
            // The clause may touch the aggregated relation itself:
            // "average /age of patients whose /age more than 40".
            let idx = pick_distinct(rng, &held, 1)?;
            let r1 = family.relations[r1_idx];
            let aggr = Aggr::ALL[rng.random_range(0..Aggr::ALL.len())];
            let b = bind(rng, idx[0]);
            let question = format!(
                "what is {} {r1} of {} whose {}?",
                aggr.surface(),
                family.type_word,
                b.clause()
            );
            let program = Program::new(vec![
                b.filter_step(0),
                litset(1, 0, r1),
                Step {
                    register: 2,
                    op: aggr.op(),
                    args: vec![Arg::Register(1)],
                },
            ])
            .unwrap();
            (question, program)
        }
        8 => {
            let numeric_held: Vec<usize> = held
                .iter()
                .copied()
                .filter(|&i| family.numeric[i])
                .collect();
            if numeric_held.is_empty() {
                return None;
            }
            let r1_idx = numeric_held[rng.random_range(0..numeric_held.len())];
            let idx = pick_distinct(rng, &held, 2)?;
            let r1 = family.relations[r1_idx];
            let aggr = Aggr::ALL[rng.random_range(0..Aggr::ALL.len())];
            let b1 = bind(rng, idx[0]);
            let b2 = bind(rng, idx[1]);
            let question = format!(
                "what is {} {r1} of {} whose {} and {}?",
                aggr.surface(),
                family.type_word,
                b1.clause(),
                b2.clause()
            );
            let program = Program::new(vec![
                b1.filter_step(0),
                b2.filter_step(1),
                Step {
                    register: 2,
                    op: OpKind::IntersectEntsets,
                    args: vec![Arg::Register(0), Arg::Register(1)],
                },
                litset(3, 2, r1),
                Step {
                    register: 4,
                    op: aggr.op(),
                    args: vec![Arg::Register(3)],
                },
            ])
            .unwrap();
            (question, program)
        }
        _ => unreachable!(),
    };
    Some(case)
}

/// Generates up to `per_template` unique cases for each of the eight
/// templates. Questions in `exclude` are dropped, duplicates are dropped,
/// and every retained program is verified to run to a non-null answer.
pub fn generate_corpus(
    kg: &KnowledgeGraph,
    schema: &ToySchema,
    per_template: usize,
    seed: u64,
    exclude: &BTreeSet<String>,
) -> SynthCorpus {
    let sampler = Sampler {
        kg,
        families: resolve_families(kg, schema),
    };
    let mut cases = Vec::new();
    let mut stats = GenStats::default();
    let mut seen: BTreeSet<String> = BTreeSet::new();

    for template_id in TEMPLATE_IDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(template_id as u64);
        let mut kept = 0usize;
        let budget = per_template.saturating_mul(64);
        let mut attempts = 0usize;
        while kept < per_template && attempts < budget {
            attempts += 1;
            // Draw failures are usually subject-specific; the budget bounds
            // the loop when a template is infeasible on this graph.
            let Some((question, program)) = draw(&sampler, schema, template_id, &mut rng) else {
                continue;
            };
            if exclude.contains(&question) {
                stats.rejected_excluded += 1;
                continue;
            }
            if seen.contains(&question) {
                stats.rejected_duplicate += 1;
                continue;
            }
            let ok = exec_program(&program, kg)
                .ok()
                .and_then(|t| t.outcome.ok())
                .is_some_and(|v| !v.is_null());
            if !ok {
                stats.rejected_null += 1;
                continue;
            }
            seen.insert(question.clone());
            cases.push(SynthCase {
                template_id,
                question,
                program,
            });
            kept += 1;
        }
        if kept < per_template {
            stats.shortfall.push((template_id, per_template - kept));
        }
    }

    SynthCorpus { cases, stats }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: expected 3 tab-separated columns, found {found}")]
    ColumnCount { line: usize, found: usize },
    #[error("line {line}: template id {found:?} is not in 1..=8")]
    BadTemplate { line: usize, found: String },
    #[error("line {line}: bad program field: {message}")]
    BadProgram { line: usize, message: String },
}

/// One line per case: template id, question, program (field-escaped).
pub fn corpus_to_tsv(cases: &[SynthCase]) -> String {
    let mut out = String::new();
    for case in cases {
        out.push_str(&format!(
            "{}\t{}\t{}\n",
            case.template_id,
            case.question,
            escape_field(&case.program.render())
        ));
    }
    out
}

pub fn corpus_from_tsv(text: &str) -> Result<Vec<SynthCase>, CorpusError> {
    let mut cases = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = raw.split('\t').collect();
        if cols.len() != 3 {
            return Err(CorpusError::ColumnCount {
                line,
                found: cols.len(),
            });
        }
        let template_id: u8 = cols[0]
            .parse()
            .ok()
            .filter(|t| (1..=8).contains(t))
            .ok_or_else(|| CorpusError::BadTemplate {
                line,
                found: cols[0].to_string(),
            })?;
        let program_text = unescape_field(cols[2]).map_err(|e| CorpusError::BadProgram {
            line,
            message: e.to_string(),
        })?;
        let program = Program::parse(&program_text).map_err(|e| CorpusError::BadProgram {
            line,
            message: e.to_string(),
        })?;
        cases.push(SynthCase {
            template_id,
            question: cols[1].to_string(),
            program,
        });
    }
    Ok(cases)
}
