//! Reference implementations for the integration suites. Everything here
//! works from first principles - linear scans over raw triples, full DP
//! tables, all-pairs counting - so agreement with the library is evidence,
//! not tautology.

// Each test target compiles this module on its own and uses a subset.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::prelude::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kgprog::dsl::{Arg, OpKind, Program, Step, ValueType};
use kgprog::interp::{exec_program, normalize_value, RuntimeError, RuntimeErrorKind, Value};
use kgprog::kg::{generate_toy_ehr_kg, KnowledgeGraph, Literal, NodeId, Object, Relation, ToyScale};

pub const FIXTURE_TSV: &str = "\
/patient/1\t/gender\tf\tlit
/patient/1\t/age\t52\tlit
/patient/2\t/gender\tm\tlit
/patient/2\t/age\t70\tlit
/patient/1\t/hadm\t/adm/10\tent
/patient/2\t/hadm\t/adm/20\tent
/adm/10\t/diagnosis\t/diag/100\tent
/adm/20\t/diagnosis\t/diag/200\tent
/diag/100\t/short_title\tpneumonia\tlit
/diag/200\t/short_title\tsepsis\tlit
";

pub fn fixture_kg() -> KnowledgeGraph {
    KnowledgeGraph::parse_tsv(FIXTURE_TSV).expect("fixture parses")
}

/// Full-scan interpreter: every step walks the complete triple list, no
/// indexes. Returns the register file, or the first runtime error.
pub fn naive_exec(program: &Program, kg: &KnowledgeGraph) -> Result<Vec<Value>, RuntimeError> {
    let mut registers: Vec<Value> = Vec::new();
    for (i, step) in program.steps().iter().enumerate() {
        match naive_step(step, &registers, kg) {
            Ok(value) => registers.push(value),
            Err(kind) => return Err(RuntimeError { step: i, kind }),
        }
    }
    Ok(registers)
}

fn naive_step(
    step: &Step,
    registers: &[Value],
    kg: &KnowledgeGraph,
) -> Result<Value, RuntimeErrorKind> {
    let ent = |arg: &Arg| -> &BTreeSet<NodeId> {
        match arg {
            Arg::Register(k) => match &registers[*k] {
                Value::EntSet(set) => set,
                other => panic!("generator produced {other:?} where an entset was expected"),
            },
            other => panic!("generator produced {other:?} where an entset was expected"),
        }
    };
    let bag = |arg: &Arg| -> &[Literal] {
        match arg {
            Arg::Register(k) => match &registers[*k] {
                Value::LitSet(bag) => bag,
                other => panic!("generator produced {other:?} where a litset was expected"),
            },
            other => panic!("generator produced {other:?} where a litset was expected"),
        }
    };
    fn rel(arg: &Arg) -> &Relation {
        match arg {
            Arg::Rel(r) => r,
            other => panic!("generator produced {other:?} where a relation was expected"),
        }
    }
    fn lit(arg: &Arg) -> &Literal {
        match arg {
            Arg::Lit(l) => l,
            other => panic!("generator produced {other:?} where a literal was expected"),
        }
    }

    let value = match step.op {
        OpKind::GenEntsetDown => {
            let sources = ent(&step.args[0]);
            let relation = rel(&step.args[1]);
            let mut out = BTreeSet::new();
            for t in kg.triples() {
                if t.relation == *relation && sources.contains(&t.subject) {
                    if let Object::Entity(o) = &t.object {
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
            for t in kg.triples() {
                if t.relation == *relation {
                    if let Object::Entity(o) = &t.object {
                        if targets.contains(o) {
                            out.insert(t.subject.clone());
                        }
                    }
                }
            }
            Value::EntSet(out)
        }
        OpKind::GenLitset => {
            let sources = ent(&step.args[0]);
            let relation = rel(&step.args[1]);
            // The triple list is canonically sorted, so a single filtered
            // pass reproduces the engine's subject-then-object order.
            let mut out = Vec::new();
            for t in kg.triples() {
                if t.relation == *relation && sources.contains(&t.subject) {
                    if let Object::Literal(l) = &t.object {
                        out.push(l.clone());
                    }
                }
            }
            Value::LitSet(out)
        }
        OpKind::GenEntsetEqual => {
            let relation = rel(&step.args[0]);
            let target = normalize_value(lit(&step.args[1]).text());
            let mut out = BTreeSet::new();
            for t in kg.triples() {
                if t.relation == *relation {
                    if let Object::Literal(l) = &t.object {
                        if normalize_value(l.text()) == target {
                            out.insert(t.subject.clone());
                        }
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
            let mut out = BTreeSet::new();
            for t in kg.triples() {
                if t.relation != *relation {
                    continue;
                }
                let Object::Literal(l) = &t.object else {
                    continue;
                };
                let Some(x) = l.numeric() else { continue };
                let keep = match step.op {
                    OpKind::GenEntsetAtleast => x >= threshold,
                    OpKind::GenEntsetAtmost => x <= threshold,
                    OpKind::GenEntsetLess => x < threshold,
                    OpKind::GenEntsetMore => x > threshold,
                    _ => unreachable!(),
                };
                if keep {
                    out.insert(t.subject.clone());
                }
            }
            Value::EntSet(out)
        }
        OpKind::CountEntset => Value::Int(ent(&step.args[0]).len() as u64),
        OpKind::IntersectEntsets => {
            let a = ent(&step.args[0]);
            let b = ent(&step.args[1]);
            let mut out = BTreeSet::new();
            for node in a {
                if b.contains(node) {
                    out.insert(node.clone());
                }
            }
            Value::EntSet(out)
        }
        OpKind::MaximumLitset | OpKind::MinimumLitset => {
            let numerics: Vec<f64> = bag(&step.args[0]).iter().filter_map(Literal::numeric).collect();
            if numerics.is_empty() {
                return Err(RuntimeErrorKind::EmptyNumericAggregate);
            }
            let mut best = numerics[0];
            for &x in &numerics[1..] {
                if (step.op == OpKind::MaximumLitset && x > best)
                    || (step.op == OpKind::MinimumLitset && x < best)
                {
                    best = x;
                }
            }
            Value::Float(best)
        }
        OpKind::AverageLitset => {
            // Same text-ordered summation as the engine, so the float
            // result is bit-identical.
            let mut pairs: Vec<(&str, f64)> = bag(&step.args[0])
                .iter()
                .filter_map(|l| l.numeric().map(|x| (l.text(), x)))
                .collect();
            if pairs.is_empty() {
                return Err(RuntimeErrorKind::EmptyNumericAggregate);
            }
            pairs.sort_by(|a, b| a.0.cmp(b.0));
            let sum: f64 = pairs.iter().map(|(_, x)| x).sum();
            Value::Float(sum / pairs.len() as f64)
        }
        OpKind::ConcatLitsets => {
            Value::LitSets(bag(&step.args[0]).to_vec(), bag(&step.args[1]).to_vec())
        }
    };
    Ok(value)
}

/// Raw material for random program synthesis, collected by one triple scan.
pub struct KgPools {
    pub relations: Vec<Relation>,
    pub literal_texts: Vec<String>,
}

impl KgPools {
    pub fn scan(kg: &KnowledgeGraph) -> KgPools {
        let mut relations = BTreeSet::new();
        let mut literal_texts = BTreeSet::new();
        for t in kg.triples() {
            relations.insert(t.relation.clone());
            if let Object::Literal(l) = &t.object {
                literal_texts.insert(l.text().to_string());
            }
        }
        KgPools {
            relations: relations.into_iter().collect(),
            literal_texts: literal_texts.into_iter().collect(),
        }
    }
}

/// Random well-typed program of at most `max_steps` steps. Filters mix
/// in-graph and out-of-graph values, and numeric thresholds are textual
/// numbers most of the time so the runtime error path also gets exercised.
pub fn random_program(rng: &mut ChaCha8Rng, pools: &KgPools, max_steps: usize) -> Program {
    let target = rng.random_range(1..=max_steps);
    let mut steps: Vec<Step> = Vec::with_capacity(target);
    let mut types: Vec<ValueType> = Vec::with_capacity(target);

    for register in 0..target {
        let entsets: Vec<usize> = (0..register)
            .filter(|&k| types[k] == ValueType::EntSet)
            .collect();
        let litsets: Vec<usize> = (0..register)
            .filter(|&k| types[k] == ValueType::LitSet)
            .collect();

        let mut pool = vec![
            OpKind::GenEntsetEqual,
            OpKind::GenEntsetAtleast,
            OpKind::GenEntsetAtmost,
            OpKind::GenEntsetLess,
            OpKind::GenEntsetMore,
        ];
        if !entsets.is_empty() {
            pool.extend([
                OpKind::GenEntsetDown,
                OpKind::GenEntsetUp,
                OpKind::GenLitset,
                OpKind::CountEntset,
                OpKind::IntersectEntsets,
            ]);
        }
        if !litsets.is_empty() {
            pool.extend([
                OpKind::MaximumLitset,
                OpKind::MinimumLitset,
                OpKind::AverageLitset,
                OpKind::ConcatLitsets,
            ]);
        }
        let op = *pool.choose(rng).expect("pool is never empty");

        let args = op
            .params()
            .iter()
            .map(|param| match param {
                ValueType::EntSet => Arg::Register(*entsets.choose(rng).unwrap()),
                ValueType::LitSet => Arg::Register(*litsets.choose(rng).unwrap()),
                ValueType::Rel => Arg::Rel(random_relation(rng, pools)),
                ValueType::Lit => Arg::Lit(random_literal(rng, pools, op)),
                other => panic!("unexpected parameter type {other}"),
            })
            .collect();
        steps.push(Step { register, op, args });
        types.push(op.return_type());
    }
    Program::new(steps).expect("construction is well-formed by design")
}

fn random_relation(rng: &mut ChaCha8Rng, pools: &KgPools) -> Relation {
    if rng.random_bool(0.9) {
        pools.relations.choose(rng).cloned().unwrap()
    } else {
        Relation::new("/no_such_relation").unwrap()
    }
}

fn random_literal(rng: &mut ChaCha8Rng, pools: &KgPools, op: OpKind) -> Literal {
    if op == OpKind::GenEntsetEqual {
        if rng.random_bool(0.8) {
            Literal::new(pools.literal_texts.choose(rng).unwrap().clone())
        } else {
            Literal::new(format!("missing value {}", rng.random_range(0..1000)))
        }
    } else if rng.random_bool(0.85) {
        match rng.random_range(0..3) {
            0 => Literal::new(format!("{}", rng.random_range(-5..=120))),
            1 => Literal::new(format!("{:.1}", rng.random_range(-50..=1200) as f64 / 10.0)),
            _ => Literal::new(format!("{}e1", rng.random_range(0..=20))),
        }
    } else {
        // Non-numeric threshold: the step must abort identically in both
        // interpreters.
        Literal::new("seventy")
    }
}

/// Runs `cases` random programs on small toy graphs (all under 200
/// triples) and asserts the engine and the full-scan reference agree on
/// registers and on runtime errors alike.
pub fn assert_oracle_equivalence(cases: u64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let (patients, admissions) = [(1, 1), (2, 1), (3, 1)][case as usize % 3];
        let kg = generate_toy_ehr_kg(
            case / 30,
            ToyScale {
                patients,
                admissions_per_patient: admissions,
            },
        );
        assert!(kg.len() <= 200, "scale drifted: {} triples", kg.len());
        let pools = KgPools::scan(&kg);
        let program = random_program(&mut rng, &pools, 6);
        let trace = exec_program(&program, &kg)
            .unwrap_or_else(|e| panic!("type error in generated program: {e}\n{program:?}"));
        match (naive_exec(&program, &kg), trace.outcome) {
            (Ok(reference), Ok(_)) => {
                assert_eq!(trace.registers, reference, "program:\n{}", program.render());
            }
            (Err(expected), Err(found)) => {
                assert_eq!(found, expected, "program:\n{}", program.render());
            }
            (reference, found) => panic!(
                "divergent outcome for:\n{}\nreference {reference:?}\nengine {found:?}",
                program.render()
            ),
        }
    }
}

/// Existential boundary algebra over random thresholds:
/// atleast = more OR equal-numeric and atmost = less OR equal-numeric.
pub fn assert_boundary_algebra(kg: &KnowledgeGraph, cases: usize, seed: u64) {
    let relations: Vec<Relation> = kg.literal_relations().into_iter().cloned().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for _ in 0..cases {
        let relation = relations.choose(&mut rng).unwrap();
        // Mix values present under the relation with arbitrary numbers so
        // both exact hits and misses occur.
        let threshold = if rng.random_bool(0.5) {
            let values: Vec<&str> = kg.value_inventory(relation).collect();
            values.choose(&mut rng).map(|v| v.to_string())
        } else {
            None
        }
        .unwrap_or_else(|| format!("{}", rng.random_range(0..2200)));
        let Some(t) = Literal::new(threshold.clone()).numeric() else {
            continue;
        };

        let filter = |op: &str| -> BTreeSet<NodeId> {
            let text = format!(
                "r0 = gen_entset_{op}(\"{}\", \"{threshold}\")",
                relation.as_str()
            );
            let program = Program::parse(&text).unwrap();
            match exec_program(&program, kg).unwrap().outcome {
                Ok(Value::EntSet(set)) => set,
                Ok(other) => panic!("filter produced {other:?}"),
                Err(e) => panic!("threshold {threshold:?} should be numeric: {e}"),
            }
        };
        let equal_numeric: BTreeSet<NodeId> = kg
            .triples()
            .iter()
            .filter(|tr| tr.relation == *relation)
            .filter_map(|tr| match &tr.object {
                Object::Literal(l) if l.numeric() == Some(t) => Some(tr.subject.clone()),
                _ => None,
            })
            .collect();

        let union = |a: &BTreeSet<NodeId>, b: &BTreeSet<NodeId>| -> BTreeSet<NodeId> {
            a.union(b).cloned().collect()
        };
        assert_eq!(filter("atleast"), union(&filter("more"), &equal_numeric));
        assert_eq!(filter("atmost"), union(&filter("less"), &equal_numeric));
    }
}

/// Word-level LCS F1 via a full DP table, no rolling rows.
pub fn rouge_oracle(reference: &str, candidate: &str) -> f64 {
    let r: Vec<&str> = reference.split_whitespace().collect();
    let c: Vec<&str> = candidate.split_whitespace().collect();
    if r.is_empty() && c.is_empty() {
        return 1.0;
    }
    if r.is_empty() || c.is_empty() {
        return 0.0;
    }
    let mut table = vec![vec![0usize; c.len() + 1]; r.len() + 1];
    for i in 1..=r.len() {
        for j in 1..=c.len() {
            table[i][j] = if r[i - 1] == c[j - 1] {
                table[i - 1][j - 1] + 1
            } else {
                table[i - 1][j].max(table[i][j - 1])
            };
        }
    }
    let lcs = table[r.len()][c.len()] as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let recall = lcs / r.len() as f64;
    let precision = lcs / c.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// AUROC by all-pairs counting: ties between a positive and a negative
/// score contribute half.
pub fn auroc_oracle(scores: &[f64], labels: &[bool]) -> f64 {
    let mut hits = 0.0;
    let mut pairs = 0.0;
    for (i, &pos) in labels.iter().enumerate() {
        if !pos {
            continue;
        }
        for (j, &neg) in labels.iter().enumerate() {
            if neg {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                hits += 1.0;
            } else if scores[i] == scores[j] {
                hits += 0.5;
            }
        }
    }
    hits / pairs
}

/// Average precision recomputed from scratch at every distinct threshold:
/// predict positive where score >= t, then accumulate precision times the
/// recall gained at that threshold.
pub fn aupr_oracle(scores: &[f64], labels: &[bool]) -> f64 {
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();

    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for &t in &thresholds {
        let mut tp = 0.0;
        let mut predicted = 0.0;
        for (i, &s) in scores.iter().enumerate() {
            if s >= t {
                predicted += 1.0;
                if labels[i] {
                    tp += 1.0;
                }
            }
        }
        let recall = tp / pos;
        let precision = tp / predicted;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    ap
}
