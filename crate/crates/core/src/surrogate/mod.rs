//! Deterministic decoder ensemble over the question templates.
//!
//! Each ensemble member maps a question to a distribution over candidate
//! programs. Candidates come from linking the question's relation and value
//! phrases against the graph; members share the candidate set but weight it
//! differently through per-member relation preferences. The decoder then
//! exposes the ensemble the same way a beam-searched seq2seq model would:
//! ranked hypotheses with per-member sequence log-probabilities, plus
//! per-token next-token distributions along the top hypothesis.
//!
//! Linking scores are intentionally sharp. An unambiguous question collapses
//! to a single candidate, so every member emits the same one-hot token
//! distributions and measured uncertainty is exactly zero.

pub mod question;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dsl::{tokenize_program, Arg, OpKind, Program, Step};
use crate::interp::normalize_value;
use crate::kg::{KnowledgeGraph, Literal, Relation};
use crate::recovery::{char_lcs_f1, rouge_l};
use crate::synthgen::Cond;
use crate::uncertainty::TokenDist;

use question::{parse_question, Clause, Shape};

/// Minimum word overlap score for a vague phrase to name a relation.
pub const RELATION_GATE: f64 = 0.3;
/// Minimum word overlap score for a phrase to name an inventory value.
pub const VALUE_GATE: f64 = 0.5;
/// Exponent sharpening relation match scores.
const RELATION_SHARPNESS: i32 = 2;
/// Exponent sharpening value match scores.
const VALUE_SHARPNESS: i32 = 8;
/// Hard cap on the candidate pool per question.
const MAX_CANDIDATES: usize = 32;
/// Candidates scored this far below the best linking are pruned, the way a
/// beam search drops branches that fall out of the beam.
const RELATIVE_FLOOR: f64 = 1e-3;
/// Terminator appended to every hypothesis token stream.
pub const EOS_TOKEN: &str = "<eos>";
/// Placeholder lumping probability mass truncated from a token distribution.
pub const REST_TOKEN: &str = "<rest>";

/// How members differ from one another.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyKind {
    /// All members identical; disagreement is impossible.
    Uniform,
    /// Per-member relation preferences drawn from Gamma(alpha, 1). Larger
    /// alpha means members agree more closely.
    Dirichlet { alpha: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub members: usize,
    pub beam_width: usize,
    pub seed: u64,
    pub policy: PolicyKind,
    /// Tokens kept per member distribution before lumping into `<rest>`.
    pub top_k: usize,
    /// Relation that pins an entity by its own path.
    pub id_relation: Relation,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            members: 5,
            beam_width: 5,
            seed: 0,
            policy: PolicyKind::Dirichlet { alpha: 24.0 },
            top_k: 32,
            id_relation: Relation::new("/id").unwrap(),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("question does not match any template")]
    Unparseable,
    #[error("question matched a template but nothing in the graph links to it")]
    Unlinkable,
}

/// One ranked hypothesis out of the decoder.
#[derive(Debug, Clone)]
pub struct BeamHypothesis {
    /// 1-based rank by ensemble-average probability.
    pub rank: usize,
    pub program: Program,
    /// Length of the token stream including the terminator.
    pub token_len: usize,
    /// Ensemble-average sequence log-probability divided by `token_len`.
    pub avg_logprob: f64,
    /// Per-member sequence log-probabilities.
    pub member_logprobs: Vec<f64>,
}

/// Next-token distributions of every member at one decoding position.
#[derive(Debug, Clone)]
pub struct TokenRecord {
    /// Token actually taken (the top hypothesis path).
    pub token: String,
    /// Hash of the question and the decoded prefix at this position.
    pub context_hash: String,
    pub member_dists: Vec<TokenDist>,
}

#[derive(Debug, Clone)]
pub struct DecodeOutput {
    pub question: String,
    /// Ranked hypotheses, best first. Never empty.
    pub beams: Vec<BeamHypothesis>,
    /// Token records along the rank-1 hypothesis, terminator included.
    pub tokens: Vec<TokenRecord>,
}

impl DecodeOutput {
    pub fn top_program(&self) -> &Program {
        &self.beams[0].program
    }
}

/// A fully resolved candidate program with its linking score.
struct Candidate {
    program: Program,
    tokens: Vec<String>,
    /// Product of sharpened relation and value match scores.
    base: f64,
    /// Relations filled in from phrases; member preferences apply here.
    rel_slots: Vec<Relation>,
}

/// A relation resolved from a phrase with its match score.
#[derive(Clone)]
struct RelLink {
    relation: Relation,
    t: f64,
}

/// A clause resolved against one relation and one value.
#[derive(Clone)]
struct ClauseLink {
    relation: Relation,
    t: f64,
    cond: Cond,
    value: String,
    s: f64,
}

impl ClauseLink {
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

    fn base(&self) -> f64 {
        self.t.powi(RELATION_SHARPNESS) * self.s.powi(VALUE_SHARPNESS)
    }
}

pub struct Decoder<'a> {
    kg: &'a KnowledgeGraph,
    config: EnsembleConfig,
}

impl<'a> Decoder<'a> {
    pub fn new(kg: &'a KnowledgeGraph, config: EnsembleConfig) -> Self {
        Decoder { kg, config }
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    pub fn decode(&self, question: &str) -> Result<DecodeOutput, DecodeError> {
        let readings = parse_question(question);
        if readings.is_empty() {
            return Err(DecodeError::Unparseable);
        }
        let candidates = self.candidates(&readings);
        if candidates.is_empty() {
            return Err(DecodeError::Unlinkable);
        }

        // Per-member normalized probabilities over the candidate pool.
        let member_probs: Vec<Vec<f64>> = (0..self.config.members)
            .map(|m| {
                let weights: Vec<f64> = candidates
                    .iter()
                    .map(|c| {
                        c.base
                            * c.rel_slots
                                .iter()
                                .map(|r| self.relation_pref(m, r))
                                .product::<f64>()
                    })
                    .collect();
                let total: f64 = weights.iter().sum();
                weights.into_iter().map(|w| w / total).collect()
            })
            .collect();

        let beams = rank_beams(&candidates, &member_probs, self.config.beam_width);
        let tokens = self.token_records(question, &candidates, &member_probs, &beams[0]);
        Ok(DecodeOutput {
            question: question.to_string(),
            beams,
            tokens,
        })
    }

    /// Resolves every reading into candidate programs, deduplicated by
    /// program text and capped to the highest-scoring `MAX_CANDIDATES`.
    fn candidates(&self, readings: &[Shape]) -> Vec<Candidate> {
        let mut pool: BTreeMap<String, Candidate> = BTreeMap::new();
        for reading in readings {
            for candidate in self.resolve(reading) {
                let key = candidate.program.render();
                match pool.get(&key) {
                    Some(existing) if existing.base >= candidate.base => {}
                    _ => {
                        pool.insert(key, candidate);
                    }
                }
            }
        }
        let mut all: Vec<Candidate> = pool.into_values().collect();
        // Highest base first; the BTreeMap order makes ties stable by text.
        all.sort_by(|a, b| b.base.total_cmp(&a.base));
        all.truncate(MAX_CANDIDATES);
        if let Some(best) = all.first().map(|c| c.base) {
            all.retain(|c| c.base >= best * RELATIVE_FLOOR);
        }
        all
    }

    fn resolve(&self, reading: &Shape) -> Vec<Candidate> {
        let mut out = Vec::new();
        match reading {
            Shape::T1 { phrase, entity } => {
                let Some(pin) = self.pin_entity(entity) else {
                    return out;
                };
                for r in self.link_relation(phrase) {
                    out.push(self.candidate(
                        vec![pin.clone(), litset_step(1, 0, &r.relation)],
                        r.t.powi(RELATION_SHARPNESS),
                        vec![r.relation.clone()],
                    ));
                }
            }
            Shape::T2 {
                phrase1,
                phrase2,
                entity,
            } => {
                let Some(pin) = self.pin_entity(entity) else {
                    return out;
                };
                for r1 in self.link_relation(phrase1) {
                    for r2 in self.link_relation(phrase2) {
                        out.push(self.candidate(
                            vec![
                                pin.clone(),
                                litset_step(1, 0, &r1.relation),
                                litset_step(2, 0, &r2.relation),
                                concat_step(3, 1, 2),
                            ],
                            (r1.t * r2.t).powi(RELATION_SHARPNESS),
                            vec![r1.relation.clone(), r2.relation.clone()],
                        ));
                    }
                }
            }
            Shape::T3 { phrase, clause, .. } => {
                for r1 in self.link_relation(phrase) {
                    for c in self.link_clause(clause) {
                        out.push(self.candidate(
                            vec![c.filter_step(0), litset_step(1, 0, &r1.relation)],
                            r1.t.powi(RELATION_SHARPNESS) * c.base(),
                            vec![r1.relation.clone(), c.relation.clone()],
                        ));
                    }
                }
            }
            Shape::T4 {
                phrase1,
                phrase2,
                clause,
                ..
            } => {
                for r1 in self.link_relation(phrase1) {
                    for r2 in self.link_relation(phrase2) {
                        for c in self.link_clause(clause) {
                            out.push(self.candidate(
                                vec![
                                    c.filter_step(0),
                                    litset_step(1, 0, &r1.relation),
                                    litset_step(2, 0, &r2.relation),
                                    concat_step(3, 1, 2),
                                ],
                                (r1.t * r2.t).powi(RELATION_SHARPNESS) * c.base(),
                                vec![
                                    r1.relation.clone(),
                                    r2.relation.clone(),
                                    c.relation.clone(),
                                ],
                            ));
                        }
                    }
                }
            }
            Shape::T5 { clause, .. } => {
                for c in self.link_clause(clause) {
                    out.push(self.candidate(
                        vec![
                            c.filter_step(0),
                            Step {
                                register: 1,
                                op: OpKind::CountEntset,
                                args: vec![Arg::Register(0)],
                            },
                        ],
                        c.base(),
                        vec![c.relation.clone()],
                    ));
                }
            }
            Shape::T6 {
                clause1, clause2, ..
            } => {
                for c1 in self.link_clause(clause1) {
                    for c2 in self.link_clause(clause2) {
                        out.push(self.candidate(
                            vec![
                                c1.filter_step(0),
                                c2.filter_step(1),
                                intersect_step(2, 0, 1),
                                Step {
                                    register: 3,
                                    op: OpKind::CountEntset,
                                    args: vec![Arg::Register(2)],
                                },
                            ],
                            c1.base() * c2.base(),
                            vec![c1.relation.clone(), c2.relation.clone()],
                        ));
                    }
                }
            }
            Shape::T7 {
                aggr,
                phrase,
                clause,
                ..
            } => {
                for r1 in self.link_relation(phrase) {
                    for c in self.link_clause(clause) {
                        out.push(self.candidate(
                            vec![
                                c.filter_step(0),
                                litset_step(1, 0, &r1.relation),
                                Step {
                                    register: 2,
                                    op: aggr.op(),
                                    args: vec![Arg::Register(1)],
                                },
                            ],
                            r1.t.powi(RELATION_SHARPNESS) * c.base(),
                            vec![r1.relation.clone(), c.relation.clone()],
                        ));
                    }
                }
            }
            Shape::T8 {
                aggr,
                phrase,
                clause1,
                clause2,
                ..
            } => {
                for r1 in self.link_relation(phrase) {
                    for c1 in self.link_clause(clause1) {
                        for c2 in self.link_clause(clause2) {
                            out.push(self.candidate(
                                vec![
                                    c1.filter_step(0),
                                    c2.filter_step(1),
                                    intersect_step(2, 0, 1),
                                    litset_step(3, 2, &r1.relation),
                                    Step {
                                        register: 4,
                                        op: aggr.op(),
                                        args: vec![Arg::Register(3)],
                                    },
                                ],
                                r1.t.powi(RELATION_SHARPNESS) * c1.base() * c2.base(),
                                vec![
                                    r1.relation.clone(),
                                    c1.relation.clone(),
                                    c2.relation.clone(),
                                ],
                            ));
                        }
                    }
                }
            }
        }
        out
    }

    fn candidate(&self, steps: Vec<Step>, base: f64, rel_slots: Vec<Relation>) -> Candidate {
        let program = Program::new(steps).expect("template construction is well-formed");
        let mut tokens = tokenize_program(&program);
        tokens.push(EOS_TOKEN.to_string());
        Candidate {
            program,
            tokens,
            base,
            rel_slots,
        }
    }

    /// Pinning step for an explicit entity path, if the graph knows it.
    fn pin_entity(&self, entity: &str) -> Option<Step> {
        let known = self
            .kg
            .value_inventory(&self.config.id_relation)
            .any(|v| v == entity);
        if !known {
            return None;
        }
        Some(Step {
            register: 0,
            op: OpKind::GenEntsetEqual,
            args: vec![
                Arg::Rel(self.config.id_relation.clone()),
                Arg::Lit(Literal::new(entity)),
            ],
        })
    }

    /// Relations a phrase can name. An explicit path is taken verbatim;
    /// anything else is matched by word overlap against relation paths.
    fn link_relation(&self, phrase: &str) -> Vec<RelLink> {
        if phrase.starts_with('/') {
            return match Relation::new(phrase) {
                Ok(r) if self.kg.has_values(&r) => vec![RelLink { relation: r, t: 1.0 }],
                _ => Vec::new(),
            };
        }
        let phrase = normalize_value(phrase);
        let mut links = Vec::new();
        for relation in self.kg.literal_relations() {
            let path_words = relation
                .as_str()
                .split(['/', '_'])
                .filter(|w| !w.is_empty())
                .collect::<Vec<_>>()
                .join(" ");
            let t = rouge_l(&phrase, &path_words);
            if t >= RELATION_GATE {
                links.push(RelLink {
                    relation: relation.clone(),
                    t,
                });
            }
        }
        links
    }

    /// All (relation, value) resolutions of a condition clause.
    fn link_clause(&self, clause: &Clause) -> Vec<ClauseLink> {
        let mut out = Vec::new();
        for r in self.link_relation(&clause.phrase) {
            for (value, s) in self.link_value(&r.relation, clause.cond, &clause.value) {
                out.push(ClauseLink {
                    relation: r.relation.clone(),
                    t: r.t,
                    cond: clause.cond,
                    value,
                    s,
                });
            }
        }
        out
    }

    /// Values a phrase can mean under one relation. Numeric comparisons pass
    /// the phrase through as a threshold, provided it reads as a number. For
    /// equality, an exact match (after trim and casefold) preempts fuzzy
    /// lookup; otherwise inventory values are scored by word overlap
    /// weighted by character overlap.
    fn link_value(&self, relation: &Relation, cond: Cond, phrase: &str) -> Vec<(String, f64)> {
        if cond != Cond::Equal {
            if Literal::new(phrase).numeric().is_none() {
                return Vec::new();
            }
            return vec![(phrase.to_string(), 1.0)];
        }
        let normalized = normalize_value(phrase);
        let exact = self
            .kg
            .value_inventory(relation)
            .any(|v| normalize_value(v) == normalized);
        if exact {
            return vec![(phrase.to_string(), 1.0)];
        }
        let mut out = Vec::new();
        for v in self.kg.value_inventory(relation) {
            let v_norm = normalize_value(v);
            let w = rouge_l(&normalized, &v_norm);
            if w >= VALUE_GATE {
                out.push((v.to_string(), w * char_lcs_f1(&normalized, &v_norm)));
            }
        }
        out
    }

    /// Preference of member `m` for a relation. Deterministic in the seed,
    /// the member index, and the relation path; independent of call order.
    fn relation_pref(&self, member: usize, relation: &Relation) -> f64 {
        match self.config.policy {
            PolicyKind::Uniform => 1.0,
            PolicyKind::Dirichlet { alpha } => {
                let mut hasher = Sha256::new();
                hasher.update(self.config.seed.to_le_bytes());
                hasher.update((member as u64).to_le_bytes());
                hasher.update(relation.as_str().as_bytes());
                let digest = hasher.finalize();
                let mut seed = [0u8; 32];
                seed.copy_from_slice(&digest);
                let mut rng = ChaCha8Rng::from_seed(seed);
                Gamma::new(alpha, 1.0)
                    .expect("alpha is positive")
                    .sample(&mut rng)
            }
        }
    }

    /// Member next-token distributions at every position of the top beam.
    fn token_records(
        &self,
        question: &str,
        candidates: &[Candidate],
        member_probs: &[Vec<f64>],
        top: &BeamHypothesis,
    ) -> Vec<TokenRecord> {
        let path = candidates
            .iter()
            .find(|c| c.program == top.program)
            .map(|c| c.tokens.clone())
            .expect("top beam comes from the candidate pool");
        let mut alive: Vec<usize> = (0..candidates.len()).collect();
        let mut records = Vec::with_capacity(path.len());
        for (pos, step_token) in path.iter().enumerate() {
            let member_dists: Vec<TokenDist> = member_probs
                .iter()
                .map(|probs| {
                    let mut mass: BTreeMap<&str, f64> = BTreeMap::new();
                    let mut total = 0.0;
                    for &ci in &alive {
                        let token = candidates[ci].tokens[pos].as_str();
                        *mass.entry(token).or_insert(0.0) += probs[ci];
                        total += probs[ci];
                    }
                    truncate_dist(mass, total, self.config.top_k)
                })
                .collect();
            records.push(TokenRecord {
                token: step_token.clone(),
                context_hash: context_hash(question, &path[..pos]),
                member_dists,
            });
            alive.retain(|&ci| candidates[ci].tokens[pos] == *step_token);
        }
        records
    }
}

fn litset_step(register: usize, source: usize, relation: &Relation) -> Step {
    Step {
        register,
        op: OpKind::GenLitset,
        args: vec![Arg::Register(source), Arg::Rel(relation.clone())],
    }
}

fn concat_step(register: usize, a: usize, b: usize) -> Step {
    Step {
        register,
        op: OpKind::ConcatLitsets,
        args: vec![Arg::Register(a), Arg::Register(b)],
    }
}

fn intersect_step(register: usize, a: usize, b: usize) -> Step {
    Step {
        register,
        op: OpKind::IntersectEntsets,
        args: vec![Arg::Register(a), Arg::Register(b)],
    }
}

/// Ranks candidates by ensemble-average probability, best first.
fn rank_beams(
    candidates: &[Candidate],
    member_probs: &[Vec<f64>],
    beam_width: usize,
) -> Vec<BeamHypothesis> {
    let members = member_probs.len() as f64;
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    let avg = |ci: usize| -> f64 {
        member_probs.iter().map(|p| p[ci]).sum::<f64>() / members
    };
    order.sort_by(|&a, &b| {
        avg(b)
            .total_cmp(&avg(a))
            .then_with(|| candidates[a].program.render().cmp(&candidates[b].program.render()))
    });
    order.truncate(beam_width.max(1));
    order
        .into_iter()
        .enumerate()
        .map(|(i, ci)| {
            let token_len = candidates[ci].tokens.len();
            BeamHypothesis {
                rank: i + 1,
                program: candidates[ci].program.clone(),
                token_len,
                avg_logprob: avg(ci).ln() / token_len as f64,
                member_logprobs: member_probs.iter().map(|p| p[ci].ln()).collect(),
            }
        })
        .collect()
}

/// Keeps the `top_k` most probable tokens and lumps the remainder.
fn truncate_dist(mass: BTreeMap<&str, f64>, total: f64, top_k: usize) -> TokenDist {
    let mut dist: Vec<(String, f64)> = mass
        .into_iter()
        .map(|(tok, p)| (tok.to_string(), p / total))
        .collect();
    dist.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    if dist.len() > top_k {
        let rest: f64 = dist[top_k..].iter().map(|(_, p)| p).sum();
        dist.truncate(top_k);
        if rest > 1e-12 {
            dist.push((REST_TOKEN.to_string(), rest));
        }
    }
    dist
}

/// First 16 hex characters of a hash over the question and decoded prefix.
fn context_hash(question: &str, prefix: &[String]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(question.as_bytes());
    for token in prefix {
        hasher.update([0x1f]);
        hasher.update(token.as_bytes());
    }
    let digest = hasher.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}
