//! Release gate. Each test covers one criterion, prints a single
//! pass/fail line (visible with --nocapture), and fails loudly otherwise.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::prelude::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kgprog::dsl::Program;
use kgprog::evalkit::{
    build_ambiguity_benchmark, run_benchmark, BenchOutcome, ScoreKind, StrataConfig,
};
use kgprog::interp::{exec_program, RuntimeErrorKind, Value};
use kgprog::kg::{generate_toy_ehr_kg, KnowledgeGraph, ToyScale, ToySchema};
use kgprog::recovery::{recover_program, rouge_l, RecoveryOutcome};
use kgprog::surrogate::EnsembleConfig;
use kgprog::synthgen::generate_corpus;
use kgprog::uncertainty::{
    aupr, auroc, detection_rate, entropy, token_uncertainty, LabelReduction, TokenDist,
};

use common::{
    assert_boundary_algebra, assert_oracle_equivalence, aupr_oracle, auroc_oracle, fixture_kg,
    random_program, rouge_oracle, KgPools,
};

fn criterion(number: usize, title: &str, body: impl FnOnce()) {
    let result = catch_unwind(AssertUnwindSafe(body));
    let verdict = if result.is_ok() { "pass" } else { "fail" };
    println!("criterion {number} ({title}): {verdict}");
    if let Err(cause) = result {
        resume_unwind(cause);
    }
}

fn run_text(kg: &KnowledgeGraph, text: &str) -> Value {
    exec_program(&Program::parse(text).unwrap(), kg)
        .unwrap()
        .outcome
        .unwrap()
}

#[test]
fn criterion_1_interpreter_matches_oracle() {
    criterion(1, "interpreter oracle equivalence", || {
        let start = Instant::now();
        assert_oracle_equivalence(1000, 1234);
        let elapsed = start.elapsed();
        assert!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    });
}

#[test]
fn criterion_2_fixture_semantics_and_boundaries() {
    criterion(2, "fixture semantics and boundary algebra", || {
        let kg = fixture_kg();
        assert_eq!(
            run_text(&kg, "r0 = gen_entset_equal(\"/gender\", \"F\")").canonical_text(),
            "/patient/1"
        );
        assert_eq!(
            run_text(
                &kg,
                "r0 = gen_entset_equal(\"/gender\", \"f\")\n\
                 r1 = gen_entset_down(r0, \"/hadm\")"
            )
            .canonical_text(),
            "/adm/10"
        );
        assert_eq!(
            run_text(
                &kg,
                "r0 = gen_entset_equal(\"/short_title\", \"sepsis\")\n\
                 r1 = gen_entset_up(\"/diagnosis\", r0)"
            )
            .canonical_text(),
            "/adm/20"
        );
        assert_eq!(
            run_text(
                &kg,
                "r0 = gen_entset_atleast(\"/age\", \"0\")\nr1 = gen_litset(r0, \"/age\")"
            )
            .canonical_text(),
            "52\n70"
        );
        assert_eq!(
            run_text(&kg, "r0 = gen_entset_atleast(\"/age\", \"70\")").canonical_text(),
            "/patient/2"
        );
        assert_eq!(
            run_text(&kg, "r0 = gen_entset_more(\"/age\", \"70\")"),
            Value::EntSet(BTreeSet::new())
        );
        assert_eq!(
            run_text(
                &kg,
                "r0 = gen_entset_atleast(\"/age\", \"0\")\n\
                 r1 = gen_litset(r0, \"/age\")\n\
                 r2 = average_litset(r1)"
            )
            .canonical_text(),
            "61.0"
        );
        assert_eq!(
            run_text(
                &kg,
                "r0 = gen_entset_equal(\"/hadm_id\", \"7\")\nr1 = count_entset(r0)"
            ),
            Value::Int(0)
        );
        let err = exec_program(
            &Program::parse("r0 = gen_entset_less(\"/age\", \"+inf\")").unwrap(),
            &kg,
        )
        .unwrap()
        .outcome
        .unwrap_err();
        assert!(matches!(err.kind, RuntimeErrorKind::NonNumericThreshold { .. }));

        let algebra_kg = generate_toy_ehr_kg(
            5,
            ToyScale {
                patients: 6,
                admissions_per_patient: 2,
            },
        );
        assert_boundary_algebra(&algebra_kg, 200, 77);
    });
}

fn random_dist(rng: &mut ChaCha8Rng, vocab: usize) -> TokenDist {
    let mut probs = vec![0.0f64; vocab];
    if rng.random_bool(0.15) {
        probs[rng.random_range(0..vocab)] = 1.0;
    } else {
        loop {
            let mut total = 0.0;
            for p in probs.iter_mut() {
                *p = if rng.random_bool(0.3) {
                    0.0
                } else {
                    rng.random::<f64>()
                };
                total += *p;
            }
            if total > 0.0 {
                for p in probs.iter_mut() {
                    *p /= total;
                }
                break;
            }
        }
    }
    probs
        .into_iter()
        .enumerate()
        .map(|(i, p)| (format!("t{i}"), p))
        .collect()
}

#[test]
fn criterion_3_entropy_decomposition_properties() {
    criterion(3, "entropy decomposition properties", || {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..10_000 {
            let vocab = rng.random_range(2..=64);
            let members = rng.random_range(1..=8);
            let dists: Vec<TokenDist> =
                (0..members).map(|_| random_dist(&mut rng, vocab)).collect();
            let t = token_uncertainty(&dists).unwrap();

            assert!(t.u_model >= -1e-9, "u_model {}", t.u_model);
            assert!(
                (t.u_data + t.u_model - t.h).abs() <= 1e-9,
                "decomposition drift: {} + {} vs {}",
                t.u_data,
                t.u_model,
                t.h
            );
            let cap = (vocab as f64).ln() + 1e-9;
            for dist in &dists {
                let dense: Vec<f64> = dist.iter().map(|(_, p)| *p).collect();
                let h_m = entropy(&dense);
                assert!((0.0..=cap).contains(&h_m), "member entropy {h_m}");
            }
            if members == 1 {
                assert_eq!(t.u_model, 0.0, "single member must carry no disagreement");
            }
        }

        // Analytic cases, exact to 1e-12.
        let ln2 = std::f64::consts::LN_2;
        let one_hot = |token: &str| vec![(token.to_string(), 1.0)];
        let split = token_uncertainty(&[one_hot("a"), one_hot("b")]).unwrap();
        assert!((split.u_model - ln2).abs() <= 1e-12);
        assert!(split.u_data.abs() <= 1e-12);

        let uniform = vec![("a".to_string(), 0.5), ("b".to_string(), 0.5)];
        let agree = token_uncertainty(&[uniform.clone(), uniform.clone()]).unwrap();
        assert!((agree.u_data - ln2).abs() <= 1e-12);
        assert!(agree.u_model.abs() <= 1e-12);

        let mixed = token_uncertainty(&[uniform, one_hot("a")]).unwrap();
        let h_expected = -(0.75f64.ln() * 0.75 + 0.25f64.ln() * 0.25);
        assert!((mixed.h - h_expected).abs() <= 1e-12);
        assert!((mixed.u_data - ln2 / 2.0).abs() <= 1e-12);
        assert!((mixed.u_model - (h_expected - ln2 / 2.0)).abs() <= 1e-12);
    });
}

#[test]
fn criterion_4_recovery_and_rouge() {
    criterion(4, "condition value recovery", || {
        // Worked repair: the truncated value must map to the full phrase,
        // not to its shorter cousin.
        let kg = KnowledgeGraph::parse_tsv(
            "/d/1\t/title\tphysical restraints status\tlit\n\
             /d/2\t/title\tphysical restraints\tlit\n\
             /d/3\t/title\tacute kidney failure\tlit\n",
        )
        .unwrap();
        let program = Program::parse(
            "r0 = gen_entset_equal(\"/title\", \"physical restrain status\")\n\
             r1 = count_entset(r0)",
        )
        .unwrap();
        let (repaired, records) = recover_program(&program, &kg);
        assert_eq!(records.len(), 1);
        match &records[0].outcome {
            RecoveryOutcome::Replaced { value, .. } => {
                assert_eq!(value, "physical restraints status");
            }
            other => panic!("expected a replacement, got {other:?}"),
        }
        assert_eq!(
            exec_program(&repaired, &kg).unwrap().outcome.unwrap(),
            Value::Int(1)
        );

        // Idempotence over random programs.
        let toy = generate_toy_ehr_kg(
            3,
            ToyScale {
                patients: 3,
                admissions_per_patient: 1,
            },
        );
        let pools = KgPools::scan(&toy);
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        for _ in 0..500 {
            let program = random_program(&mut rng, &pools, 6);
            let (once, _) = recover_program(&program, &toy);
            let (twice, changed) = recover_program(&once, &toy);
            assert_eq!(once, twice);
            assert!(
                changed
                    .iter()
                    .all(|r| matches!(r.outcome, RecoveryOutcome::NoCandidates)),
                "second pass rewrote a value: {changed:?}"
            );
        }

        // rouge_l against the full-table oracle, exact equality.
        let words = [
            "acute", "chronic", "renal", "cardiac", "failure", "status", "of", "the",
        ];
        for case in 0..1000 {
            let mut pick = ChaCha8Rng::seed_from_u64(9000 + case);
            let side = |rng: &mut ChaCha8Rng| -> String {
                let len = rng.random_range(0..8);
                (0..len)
                    .map(|_| *words.choose(rng).unwrap())
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            let a = side(&mut pick);
            let b = side(&mut pick);
            assert_eq!(rouge_l(&a, &b), rouge_oracle(&a, &b), "{a:?} vs {b:?}");
        }
    });
}

#[test]
fn criterion_5_synthetic_generation_scales() {
    criterion(5, "synthetic question generation", || {
        let kg = generate_toy_ehr_kg(
            1,
            ToyScale {
                patients: 50,
                admissions_per_patient: 2,
            },
        );
        let schema = ToySchema::standard();
        let start = Instant::now();
        let corpus = generate_corpus(&kg, &schema, 500, 1, &BTreeSet::new());
        let elapsed = start.elapsed();
        assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
        assert_eq!(
            corpus.cases.len(),
            8 * 500,
            "shortfall: {:?}",
            corpus.stats.shortfall
        );

        let mut questions = BTreeSet::new();
        for case in &corpus.cases {
            assert!(questions.insert(case.question.as_str()), "duplicate {:?}", case.question);
            let trace = exec_program(&case.program, &kg)
                .unwrap_or_else(|e| panic!("{:?} does not type-check: {e}", case.question));
            let answer = trace
                .outcome
                .unwrap_or_else(|e| panic!("{:?} fails at runtime: {e}", case.question));
            assert!(!answer.is_null(), "{:?} has a null answer", case.question);
        }

        let again = generate_corpus(&kg, &schema, 500, 1, &BTreeSet::new());
        assert_eq!(corpus.cases, again.cases, "same seed, different corpus");
    });
}

struct BenchRun {
    outcome: BenchOutcome,
    elapsed: Duration,
}

fn bench_run() -> &'static BenchRun {
    static RUN: OnceLock<BenchRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let kg = generate_toy_ehr_kg(
            1,
            ToyScale {
                patients: 50,
                admissions_per_patient: 2,
            },
        );
        let start = Instant::now();
        let cases =
            build_ambiguity_benchmark(&kg, &ToySchema::standard(), &StrataConfig::default(), 1)
                .expect("benchmark material");
        assert_eq!(cases.len(), 600);
        let outcome = run_benchmark(&kg, &cases, &EnsembleConfig::default()).expect("gold runs");
        BenchRun {
            outcome,
            elapsed: start.elapsed(),
        }
    })
}

#[test]
fn criterion_6_ambiguity_detection_benchmark() {
    criterion(6, "ambiguity detection benchmark", || {
        let run = bench_run();
        assert!(
            run.elapsed < Duration::from_secs(120),
            "took {:?}",
            run.elapsed
        );

        let (scores, labels) = run
            .outcome
            .score_label_pairs(LabelReduction::High, ScoreKind::TokenUData);
        let token_high = auroc(&scores, &labels).unwrap();
        assert!(token_high >= 0.95, "token u_data AUROC high {token_high}");

        let (scores, labels) = run
            .outcome
            .score_label_pairs(LabelReduction::MildAndHigh, ScoreKind::TokenUData);
        let token_mild = auroc(&scores, &labels).unwrap();
        assert!(
            token_mild >= 0.80,
            "token u_data AUROC mild and high {token_mild}"
        );

        // Raising the threshold can only shrink the flagged set.
        let all_scores: Vec<f64> = run
            .outcome
            .results
            .iter()
            .map(|r| ScoreKind::TokenUData.of(r))
            .collect();
        let peak = all_scores.iter().copied().fold(0.0_f64, f64::max);
        let mut last = f64::INFINITY;
        for i in 0..20 {
            let tau = peak * i as f64 / 19.0;
            let rate = detection_rate(&all_scores, tau);
            assert!(rate <= last, "detection rate rose at tau {tau}");
            last = rate;
        }

        let (scores, labels) = run
            .outcome
            .score_label_pairs(LabelReduction::High, ScoreKind::ProgramUData);
        let program_high = auroc(&scores, &labels).unwrap();
        assert!(
            token_high >= program_high,
            "token {token_high} vs program {program_high}"
        );
    });
}

#[test]
fn criterion_7_oracle_topk_curve() {
    criterion(7, "oracle top-k curve", || {
        let run = bench_run();
        let curve = run.outcome.oracle_topk(5);
        for pair in curve.windows(2) {
            assert!(pair[1] >= pair[0], "curve dipped: {curve:?}");
        }
        assert!(
            curve[4] > curve[0],
            "an oracle choice among 5 hypotheses must beat rank 1: {curve:?}"
        );
    });
}

#[test]
fn criterion_8_ranking_metrics_match_brute_force() {
    criterion(8, "ranking metrics against brute force", || {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let n = rng.random_range(2..=50);
            let mut scores = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            for i in 0..n {
                // A coarse grid half the time so ties are common.
                let score = if rng.random_bool(0.5) {
                    (rng.random_range(0..5) as f64) / 4.0
                } else {
                    rng.random::<f64>()
                };
                scores.push(score);
                // Guarantee both classes.
                labels.push(if i == 0 {
                    true
                } else if i == 1 {
                    false
                } else {
                    rng.random_bool(0.4)
                });
            }
            let roc = auroc(&scores, &labels).unwrap();
            let pr = aupr(&scores, &labels).unwrap();
            assert!(
                (roc - auroc_oracle(&scores, &labels)).abs() <= 1e-9,
                "auroc drift on {scores:?} {labels:?}"
            );
            assert!(
                (pr - aupr_oracle(&scores, &labels)).abs() <= 1e-9,
                "aupr drift on {scores:?} {labels:?}"
            );
        }
    });
}
