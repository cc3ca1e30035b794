//! Command line front end: graph generation, program execution and repair,
//! synthetic corpora, ensemble decoding, uncertainty scoring, the labeled
//! ambiguity benchmark, and interactive program selection.
//!
//! Exit codes: 0 on success, 1 for usage problems (bad flags or paths),
//! 2 for data problems (malformed content, failed questions, runtime
//! errors). Every failure prints a one-line diagnostic to stderr.

use std::collections::BTreeSet;
use std::fmt::Display;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use kgprog::dsl::Program;
use kgprog::evalkit::{
    benchmark_to_tsv, build_ambiguity_benchmark, run_benchmark, BenchOutcome, ScoreKind,
    StrataConfig,
};
use kgprog::interp::exec_program;
use kgprog::kg::{generate_toy_ehr_kg, KnowledgeGraph, ToySchema, ToyScale};
use kgprog::logio::{beam_lines, join_scores, parse_beams, parse_token_log, token_log_lines};
use kgprog::recovery::{recover_program, RecoveryOutcome};
use kgprog::surrogate::{Decoder, EnsembleConfig};
use kgprog::synthgen::{corpus_to_tsv, generate_corpus};
use kgprog::uncertainty::{
    aupr, auroc, detect, detection_rate, token_uncertainty, AmbiguityLabel, LabelReduction,
};

#[derive(Parser)]
#[command(
    name = "kgprog",
    version,
    about = "Knowledge-graph question answering with ensemble ambiguity detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Decoder settings shared by the subcommands that run the ensemble.
#[derive(Args)]
struct EnsembleArgs {
    /// Ensemble members
    #[arg(long, default_value_t = 5)]
    members: usize,
    /// Beam width (hypotheses kept per question)
    #[arg(long, default_value_t = 5)]
    beam: usize,
    /// Seed for member preference draws
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl EnsembleArgs {
    fn config(&self) -> Result<EnsembleConfig, CliError> {
        if self.members == 0 {
            return Err(usage("--members must be at least 1"));
        }
        if self.beam == 0 {
            return Err(usage("--beam must be at least 1"));
        }
        Ok(EnsembleConfig {
            members: self.members,
            beam_width: self.beam,
            seed: self.seed,
            ..EnsembleConfig::default()
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic EHR knowledge graph as TSV
    GenKg {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Patients in the graph
        #[arg(long, default_value_t = 10)]
        patients: usize,
        /// Admissions per patient
        #[arg(long, default_value_t = 2)]
        admissions: usize,
        /// Output file (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Type-check and run a program file, printing the answer
    Exec {
        /// Knowledge graph TSV
        #[arg(long)]
        kg: PathBuf,
        /// Program file
        #[arg(long)]
        program: PathBuf,
    },
    /// Repair equality-filter values that do not execute on the graph
    Recover {
        /// Knowledge graph TSV
        #[arg(long)]
        kg: PathBuf,
        /// Program file
        #[arg(long)]
        program: PathBuf,
        /// Output file for the repaired program (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate question-program training pairs from the graph
    GenSynth {
        /// Knowledge graph TSV
        #[arg(long)]
        kg: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Cases per question template
        #[arg(long = "per-template", default_value_t = 50)]
        per_template: usize,
        /// Output file (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decode a question file into beam and token-distribution logs
    Decode {
        /// Knowledge graph TSV
        #[arg(long)]
        kg: PathBuf,
        /// Question file: plain questions, "id<TAB>question" lines, or a
        /// benchmark TSV
        #[arg(long)]
        questions: PathBuf,
        #[command(flatten)]
        ensemble: EnsembleArgs,
        /// Output directory for beams.tsv and tokens.jsonl
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute per-question uncertainty scores from decode logs
    Score {
        /// Token-distribution log (JSON lines)
        #[arg(long)]
        tokens: PathBuf,
        /// Beam file (TSV)
        #[arg(long)]
        beams: PathBuf,
        /// Output CSV (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the labeled ambiguity benchmark, run it, and report metrics
    Bench {
        /// Knowledge graph TSV (generated from the seed when omitted)
        #[arg(long)]
        kg: Option<PathBuf>,
        /// Patients when generating the graph
        #[arg(long, default_value_t = 50)]
        patients: usize,
        /// Admissions per patient when generating the graph
        #[arg(long, default_value_t = 2)]
        admissions: usize,
        #[command(flatten)]
        ensemble: EnsembleArgs,
        /// Unambiguous cases
        #[arg(long, default_value_t = 400)]
        none: usize,
        /// Mildly ambiguous cases
        #[arg(long, default_value_t = 150)]
        mild: usize,
        /// Highly ambiguous cases
        #[arg(long, default_value_t = 50)]
        high: usize,
        /// Output directory for benchmark and metric files
        #[arg(long)]
        out: PathBuf,
    },
    /// Answer one question, asking for a choice when ambiguity is high
    Select {
        /// Knowledge graph TSV
        #[arg(long)]
        kg: PathBuf,
        /// Question text
        #[arg(long)]
        question: String,
        /// Ambiguity threshold on max token u_data
        #[arg(long, default_value_t = 0.5)]
        tau: f64,
        #[command(flatten)]
        ensemble: EnsembleArgs,
        /// Write a token heat map SVG here
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) => m,
        }
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

fn usage(msg: impl Display) -> CliError {
    CliError::Usage(msg.to_string())
}

fn data(msg: impl Display) -> CliError {
    CliError::Data(msg.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            // First paragraph of the clap report, collapsed to one line.
            let text = e.to_string();
            let summary: Vec<&str> = text
                .lines()
                .take_while(|l| !l.trim().is_empty())
                .map(str::trim)
                .collect();
            eprintln!("{} (run with --help for usage)", summary.join(" "));
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn read_input(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn write_output(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            fs::write(p, content).map_err(|e| usage(format!("cannot write {}: {e}", p.display())))
        }
        None => {
            print!("{content}");
            io::stdout().flush().map_err(|e| data(e.to_string()))
        }
    }
}

fn load_kg(path: &Path) -> Result<KnowledgeGraph, CliError> {
    KnowledgeGraph::parse_tsv(&read_input(path)?)
        .map_err(|e| data(format!("{}: {e}", path.display())))
}

fn load_program(path: &Path) -> Result<Program, CliError> {
    Program::parse(read_input(path)?.trim_end())
        .map_err(|e| data(format!("{}: {e}", path.display())))
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::GenKg {
            seed,
            patients,
            admissions,
            out,
        } => {
            let scale = ToyScale {
                patients,
                admissions_per_patient: admissions,
            };
            let kg = generate_toy_ehr_kg(seed, scale);
            eprintln!("{} triples", kg.len());
            write_output(out.as_deref(), &kg.to_tsv())
        }
        Command::Exec { kg, program } => {
            let kg = load_kg(&kg)?;
            let program = load_program(&program)?;
            let trace = exec_program(&program, &kg).map_err(|e| data(e.to_string()))?;
            let value = trace.outcome.map_err(|e| data(e.to_string()))?;
            println!("{}", value.canonical_text());
            Ok(())
        }
        Command::Recover { kg, program, out } => {
            let kg = load_kg(&kg)?;
            let program = load_program(&program)?;
            let (repaired, records) = recover_program(&program, &kg);
            for record in &records {
                match &record.outcome {
                    RecoveryOutcome::Replaced { value, score } => eprintln!(
                        "step {}: {:?} -> {:?} (score {:.3})",
                        record.step, record.original, value, score
                    ),
                    RecoveryOutcome::NoCandidates => eprintln!(
                        "step {}: {:?} has no candidate values",
                        record.step, record.original
                    ),
                }
            }
            let mut text = repaired.render();
            text.push('\n');
            write_output(out.as_deref(), &text)
        }
        Command::GenSynth {
            kg,
            seed,
            per_template,
            out,
        } => {
            let kg = load_kg(&kg)?;
            let corpus = generate_corpus(&kg, &ToySchema::standard(), per_template, seed, &BTreeSet::new());
            let s = &corpus.stats;
            eprintln!(
                "{} cases; rejected {} duplicate, {} null",
                corpus.cases.len(),
                s.rejected_duplicate,
                s.rejected_null
            );
            for (template, short) in &s.shortfall {
                eprintln!("template {template}: {short} case(s) short");
            }
            write_output(out.as_deref(), &corpus_to_tsv(&corpus.cases))
        }
        Command::Decode {
            kg,
            questions,
            ensemble,
            out,
        } => {
            let kg = load_kg(&kg)?;
            let config = ensemble.config()?;
            let items = parse_questions(&read_input(&questions)?);
            if items.is_empty() {
                return Err(data(format!("{}: no questions", questions.display())));
            }
            let mut seen_ids = BTreeSet::new();
            for (id, _) in &items {
                if !seen_ids.insert(id.as_str()) {
                    return Err(data(format!(
                        "duplicate question id {id:?} in {}",
                        questions.display()
                    )));
                }
            }
            fs::create_dir_all(&out)
                .map_err(|e| usage(format!("cannot create {}: {e}", out.display())))?;
            let decoder = Decoder::new(&kg, config);
            let mut beams = String::from(
                "# question_id\trank\tavg_logprob\ttoken_len\tmember_logprobs\tprogram\n",
            );
            let mut tokens = String::new();
            for (id, question) in &items {
                let decoded = decoder
                    .decode(question)
                    .map_err(|e| data(format!("{id}: {e}")))?;
                beams.push_str(&beam_lines(id, &decoded));
                tokens.push_str(&token_log_lines(id, &decoded));
            }
            let beams_path = out.join("beams.tsv");
            let tokens_path = out.join("tokens.jsonl");
            write_output(Some(&beams_path), &beams)?;
            write_output(Some(&tokens_path), &tokens)?;
            eprintln!(
                "decoded {} questions -> {}, {}",
                items.len(),
                beams_path.display(),
                tokens_path.display()
            );
            Ok(())
        }
        Command::Score { tokens, beams, out } => {
            let token_records =
                parse_token_log(&read_input(&tokens)?).map_err(|e| data(e.to_string()))?;
            let beam_records =
                parse_beams(&read_input(&beams)?).map_err(|e| data(e.to_string()))?;
            let rows =
                join_scores(&token_records, &beam_records).map_err(|e| data(e.to_string()))?;
            let mut csv = String::from(
                "question_id,max_u_data,max_u_model,max_H,max_H_single,U_total,U_model,U_data\n",
            );
            for (id, t, p) in &rows {
                csv.push_str(&format!(
                    "{id},{},{},{},{},{},{},{}\n",
                    t.max_u_data, t.max_u_model, t.max_h, t.max_h_single, p.u_total, p.u_model,
                    p.u_data
                ));
            }
            write_output(out.as_deref(), &csv)
        }
        Command::Bench {
            kg,
            patients,
            admissions,
            ensemble,
            none,
            mild,
            high,
            out,
        } => {
            let config = ensemble.config()?;
            fs::create_dir_all(&out)
                .map_err(|e| usage(format!("cannot create {}: {e}", out.display())))?;
            let kg = match kg {
                Some(path) => load_kg(&path)?,
                None => {
                    let kg = generate_toy_ehr_kg(
                        ensemble.seed,
                        ToyScale {
                            patients,
                            admissions_per_patient: admissions,
                        },
                    );
                    // Keep the generated graph with the results so they
                    // can be re-executed later.
                    write_output(Some(&out.join("kg.tsv")), &kg.to_tsv())?;
                    kg
                }
            };
            let strata = StrataConfig { none, mild, high };
            let cases =
                build_ambiguity_benchmark(&kg, &ToySchema::standard(), &strata, ensemble.seed)
                    .map_err(|e| data(e.to_string()))?;
            let outcome = run_benchmark(&kg, &cases, &config).map_err(|e| data(e.to_string()))?;
            write_output(Some(&out.join("benchmark.tsv")), &benchmark_to_tsv(&cases))?;
            write_output(Some(&out.join("results.csv")), &results_csv(&outcome))?;
            write_output(Some(&out.join("metrics.csv")), &metrics_csv(&outcome)?)?;
            write_output(
                Some(&out.join("curve.csv")),
                &curve_csv(&outcome, ensemble.beam),
            )?;
            write_output(Some(&out.join("sweep.csv")), &sweep_csv(&outcome))?;
            let (scores, labels) =
                outcome.score_label_pairs(LabelReduction::High, ScoreKind::TokenUData);
            let roc_high = auroc(&scores, &labels).map_err(|e| data(e.to_string()))?;
            let (scores, labels) =
                outcome.score_label_pairs(LabelReduction::MildAndHigh, ScoreKind::TokenUData);
            let roc_mild = auroc(&scores, &labels).map_err(|e| data(e.to_string()))?;
            println!("cases: {} (none {none}, mild {mild}, high {high})", cases.len());
            println!("execution accuracy: {:.4}", outcome.execution_accuracy());
            println!("auroc token_u_data high: {roc_high:.4}");
            println!("auroc token_u_data mild_and_high: {roc_mild:.4}");
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Select {
            kg,
            question,
            tau,
            ensemble,
            svg,
        } => {
            let kg = load_kg(&kg)?;
            let config = ensemble.config()?;
            let decoder = Decoder::new(&kg, config);
            let decoded = decoder.decode(&question).map_err(|e| data(e.to_string()))?;
            // The step separator token is a literal newline; show it as
            // an escape so the annotation stays on one line.
            let mut heats: Vec<(String, f64)> = Vec::with_capacity(decoded.tokens.len());
            for record in &decoded.tokens {
                let t = token_uncertainty(&record.member_dists).map_err(|e| data(e.to_string()))?;
                heats.push((record.token.replace('\n', "\\n"), t.u_data));
            }
            let max_u = heats.iter().map(|(_, u)| *u).fold(0.0_f64, f64::max);
            println!("question: {}", decoded.question);
            let annotated: Vec<String> = heats
                .iter()
                .map(|(token, u)| format!("{token}[{u:.2}]"))
                .collect();
            println!("tokens: {}", annotated.join(" "));
            println!("max_u_data: {max_u:.4}  tau: {tau:.4}");
            if let Some(path) = &svg {
                write_output(Some(path), &token_heat_svg(&heats))?;
            }
            let chosen = if detect(max_u, tau) {
                println!("ambiguous: choose 1-{}", decoded.beams.len());
                for beam in &decoded.beams {
                    println!(
                        "[{}] avg_logprob {:.4}  {}",
                        beam.rank,
                        beam.avg_logprob,
                        beam.program.render().replace('\n', "; ")
                    );
                }
                io::stdout().flush().map_err(|e| data(e.to_string()))?;
                let mut line = String::new();
                io::stdin()
                    .lock()
                    .read_line(&mut line)
                    .map_err(|e| data(e.to_string()))?;
                let choice: usize = line
                    .trim()
                    .parse()
                    .map_err(|_| data(format!("invalid selection {:?}", line.trim())))?;
                if choice == 0 || choice > decoded.beams.len() {
                    return Err(data(format!(
                        "selection {choice} out of range 1-{}",
                        decoded.beams.len()
                    )));
                }
                println!("selected: [{choice}]");
                &decoded.beams[choice - 1].program
            } else {
                decoded.top_program()
            };
            let trace = exec_program(chosen, &kg).map_err(|e| data(e.to_string()))?;
            let value = trace.outcome.map_err(|e| data(e.to_string()))?;
            println!("answer:");
            println!("{}", value.canonical_text());
            Ok(())
        }
    }
}

/// One `(id, question)` per line. Accepts bare questions, `id<TAB>question`
/// lines, and full benchmark rows (five columns with a label in the
/// second).
fn parse_questions(text: &str) -> Vec<(String, String)> {
    let mut items = Vec::new();
    for raw in text.lines() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let (id, question) = if cols.len() == 5 && AmbiguityLabel::parse(cols[1]).is_some() {
            (cols[0].to_string(), cols[2].to_string())
        } else if cols.len() >= 2 {
            (cols[0].to_string(), cols[1].to_string())
        } else {
            (format!("q{:04}", items.len() + 1), line.to_string())
        };
        items.push((id, question));
    }
    items
}

fn results_csv(outcome: &BenchOutcome) -> String {
    let mut csv = String::from("question_id,label,decode_failed,correct");
    for kind in ScoreKind::ALL {
        csv.push(',');
        csv.push_str(kind.name());
    }
    csv.push('\n');
    for result in &outcome.results {
        csv.push_str(&format!(
            "{},{},{},{}",
            result.question_id,
            result.label.as_str(),
            u8::from(result.decode_failed),
            u8::from(result.correct)
        ));
        for kind in ScoreKind::ALL {
            csv.push_str(&format!(",{}", kind.of(result)));
        }
        csv.push('\n');
    }
    csv
}

fn metrics_csv(outcome: &BenchOutcome) -> Result<String, CliError> {
    let mut csv = String::from("metric,score,reduction,value\n");
    csv.push_str(&format!(
        "execution_accuracy,,,{}\n",
        outcome.execution_accuracy()
    ));
    for kind in ScoreKind::ALL {
        for (reduction, name) in [
            (LabelReduction::High, "high"),
            (LabelReduction::MildAndHigh, "mild_and_high"),
        ] {
            let (scores, labels) = outcome.score_label_pairs(reduction, kind);
            let roc = auroc(&scores, &labels).map_err(|e| data(e.to_string()))?;
            let pr = aupr(&scores, &labels).map_err(|e| data(e.to_string()))?;
            csv.push_str(&format!("auroc,{},{name},{roc}\n", kind.name()));
            csv.push_str(&format!("aupr,{},{name},{pr}\n", kind.name()));
        }
    }
    Ok(csv)
}

fn curve_csv(outcome: &BenchOutcome, max_k: usize) -> String {
    let mut csv = String::from("k,accuracy\n");
    for (i, accuracy) in outcome.oracle_topk(max_k).iter().enumerate() {
        csv.push_str(&format!("{},{accuracy}\n", i + 1));
    }
    csv
}

/// Detection rate of the token u_data score over a 20-point threshold
/// sweep from zero to the highest observed score.
fn sweep_csv(outcome: &BenchOutcome) -> String {
    let scores: Vec<f64> = outcome
        .results
        .iter()
        .map(|r| ScoreKind::TokenUData.of(r))
        .collect();
    let peak = scores.iter().copied().fold(0.0_f64, f64::max);
    let mut csv = String::from("tau,detection_rate\n");
    for i in 0..20 {
        let tau = peak * i as f64 / 19.0;
        csv.push_str(&format!("{tau},{}\n", detection_rate(&scores, tau)));
    }
    csv
}

fn xml_escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

/// Inline heat map of per-token data uncertainty, shaded relative to the
/// highest value in the sequence.
fn token_heat_svg(heats: &[(String, f64)]) -> String {
    let peak = heats.iter().map(|(_, u)| *u).fold(0.0_f64, f64::max);
    let mut body = String::new();
    let mut x = 10.0;
    for (token, u) in heats {
        let width = 9.0 * token.chars().count().max(1) as f64 + 10.0;
        let alpha = if peak > 0.0 { u / peak } else { 0.0 };
        let mid = x + width / 2.0;
        body.push_str(&format!(
            "  <rect x=\"{x:.1}\" y=\"12\" width=\"{width:.1}\" height=\"34\" rx=\"4\" \
             fill=\"#d62728\" fill-opacity=\"{alpha:.3}\" stroke=\"#888888\"/>\n",
        ));
        body.push_str(&format!(
            "  <text x=\"{mid:.1}\" y=\"34\" text-anchor=\"middle\" \
             font-family=\"monospace\" font-size=\"13\">{}</text>\n",
            xml_escape(token)
        ));
        body.push_str(&format!(
            "  <text x=\"{mid:.1}\" y=\"60\" text-anchor=\"middle\" \
             font-family=\"monospace\" font-size=\"10\" fill=\"#555555\">{u:.2}</text>\n",
        ));
        x += width + 6.0;
    }
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"72\">\n{body}</svg>\n",
        x + 4.0
    )
}
