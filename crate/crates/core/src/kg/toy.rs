//! Synthetic EHR-shaped knowledge graph generator.
//!
//! The generated graph mimics a clinical record store: patients with
//! admissions, each admission carrying diagnoses, procedures,
//! prescriptions, and lab events. Every node carries an `/id` literal whose
//! text is the node path, so programs can pin a single entity by value.
//!
//! The title vocabulary is built so that fuzzy value lookups behave
//! predictably:
//! - base titles are three words, `qualifier middle tail`, where each
//!   middle/tail word is used by exactly one title, so two distinct base
//!   titles never share more than the qualifier;
//! - most diagnoses pair a short title `S` with a long title `S nos`;
//! - a few titles are duplicated verbatim across the short and long
//!   inventories;
//! - a few ICD9 codes appear in both the diagnosis and procedure code
//!   inventories.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{KnowledgeGraph, Literal, NodeId, Object, Relation, Triple};

/// Size knobs for the generator. Triple count grows roughly linearly in
/// `patients * admissions_per_patient`.
#[derive(Debug, Clone, Copy)]
pub struct ToyScale {
    pub patients: usize,
    pub admissions_per_patient: usize,
}

impl Default for ToyScale {
    fn default() -> Self {
        ToyScale {
            patients: 10,
            admissions_per_patient: 2,
        }
    }
}

/// Entity families of the toy graph: the surface word used in questions and
/// the literal relations every node of that family carries. `id_relation`
/// is the literal that pins a node to its own path.
#[derive(Debug, Clone)]
pub struct ToySchema {
    pub id_relation: Relation,
    pub groups: Vec<TypeGroup>,
}

#[derive(Debug, Clone)]
pub struct TypeGroup {
    pub type_word: &'static str,
    pub relations: Vec<Relation>,
}

impl ToySchema {
    pub fn standard() -> Self {
        let rel = |p: &str| Relation::new(p).unwrap();
        ToySchema {
            id_relation: rel("/id"),
            groups: vec![
                TypeGroup {
                    type_word: "patients",
                    relations: vec![rel("/gender"), rel("/age")],
                },
                TypeGroup {
                    type_word: "admissions",
                    relations: vec![
                        rel("/admission_type"),
                        rel("/admission_location"),
                        rel("/admit_year"),
                    ],
                },
                TypeGroup {
                    type_word: "diagnoses",
                    relations: vec![
                        rel("/diagnoses_short_title"),
                        rel("/diagnoses_long_title"),
                        rel("/diagnoses_icd9_code"),
                    ],
                },
                TypeGroup {
                    type_word: "procedures",
                    relations: vec![
                        rel("/procedures_short_title"),
                        rel("/procedures_long_title"),
                        rel("/procedures_icd9_code"),
                    ],
                },
                TypeGroup {
                    type_word: "prescriptions",
                    relations: vec![rel("/drug"), rel("/route"), rel("/formulary_drug_cd")],
                },
                TypeGroup {
                    type_word: "labs",
                    relations: vec![rel("/lab_name"), rel("/value"), rel("/flag")],
                },
            ],
        }
    }
}

/// Diagnosis titles as (short, long) pairs. Most long titles append "nos";
/// the last four are verbatim duplicates of their short title.
const DIAG_TITLES: &[(&str, &str)] = &[
    ("acute pharyngitis infection", "acute pharyngitis infection nos"),
    ("acute kidney insufficiency", "acute kidney insufficiency nos"),
    ("chronic airway obstruction", "chronic airway obstruction nos"),
    ("chronic liver cirrhosis", "chronic liver cirrhosis nos"),
    ("benign neoplasm colon", "benign neoplasm colon nos"),
    ("benign hypertension essential", "benign hypertension essential nos"),
    ("malignant lung carcinoma", "malignant lung carcinoma nos"),
    ("primary pulmonary embolism", "primary pulmonary embolism nos"),
    ("secondary anemia deficiency", "secondary anemia deficiency nos"),
    ("unspecified septicemia organism", "unspecified septicemia organism nos"),
    ("unspecified pneumonia bacterial", "unspecified pneumonia bacterial nos"),
    ("recurrent seizure disorder", "recurrent seizure disorder nos"),
    ("recurrent urinary calculus", "recurrent urinary calculus nos"),
    ("physical restraints", "physical restraints status"),
    ("acute cardiac arrest", "acute cardiac arrest"),
    ("chronic atrial fibrillation", "chronic atrial fibrillation"),
    ("primary diabetes mellitus", "primary diabetes mellitus"),
    ("secondary heart failure", "secondary heart failure"),
];

/// Procedure titles, same shape as DIAG_TITLES but with a disjoint word
/// pool so diagnosis values never fuzzily match procedure titles.
const PROC_TITLES: &[(&str, &str)] = &[
    ("open aortocoronary bypass", "open aortocoronary bypass nos"),
    ("open reduction fracture", "open reduction fracture nos"),
    ("closed bronchial biopsy", "closed bronchial biopsy nos"),
    ("percutaneous coronary angioplasty", "percutaneous coronary angioplasty nos"),
    ("percutaneous abdominal drainage", "percutaneous abdominal drainage nos"),
    ("laparoscopic gallbladder removal", "laparoscopic gallbladder removal nos"),
    ("endoscopic gastric lavage", "endoscopic gastric lavage nos"),
    ("partial hip replacement", "partial hip replacement nos"),
    ("total knee arthroplasty", "total knee arthroplasty nos"),
    ("revision spinal fusion", "revision spinal fusion nos"),
    ("venous catheterization central", "venous catheterization central"),
    ("continuous mechanical ventilation", "continuous mechanical ventilation"),
];

/// Codes reserved for diagnoses only, procedures only, and both.
const DIAG_ONLY_CODES: &[&str] = &["0388", "4260", "48240", "51884", "5845", "78039"];
const PROC_ONLY_CODES: &[&str] = &["3613", "3891", "4513", "7935", "8154"];
const SHARED_CODES: &[&str] = &["0389", "4019", "9671"];

const GENDERS: &[&str] = &["f", "m"];
const ADMISSION_TYPES: &[&str] = &["emergency", "elective", "urgent", "newborn"];
const ADMISSION_LOCATIONS: &[&str] = &[
    "emergency room admit",
    "transfer from hospital",
    "clinic referral",
    "physician referral",
];
const DRUGS: &[&str] = &[
    "aspirin",
    "warfarin",
    "heparin sodium",
    "insulin human",
    "metoprolol tartrate",
    "furosemide",
    "potassium chloride",
    "vancomycin",
];
const ROUTES: &[&str] = &["po", "iv", "im", "sc"];
const FORMULARY_CODES: &[&str] = &[
    "asa325", "warf5", "hep5000", "ins10", "metop25", "furos40", "kcl20", "vanc1",
];
const LAB_NAMES: &[&str] = &[
    "hematocrit",
    "hemoglobin",
    "white blood cells",
    "platelet count",
    "sodium",
    "potassium",
    "creatinine",
    "glucose",
];
const LAB_FLAGS: &[&str] = &["normal", "abnormal", "delta"];

struct Builder {
    triples: Vec<Triple>,
}

impl Builder {
    fn node(&mut self, path: String) -> NodeId {
        let node = NodeId::new(path).expect("generated paths are valid");
        self.lit(&node, "/id", node.as_str().to_string());
        node
    }

    fn lit(&mut self, subject: &NodeId, relation: &str, text: String) {
        self.triples.push(Triple {
            subject: subject.clone(),
            relation: Relation::new(relation).expect("generated relations are valid"),
            object: Object::Literal(Literal::new(text)),
        });
    }

    fn edge(&mut self, subject: &NodeId, relation: &str, object: &NodeId) {
        self.triples.push(Triple {
            subject: subject.clone(),
            relation: Relation::new(relation).expect("generated relations are valid"),
            object: Object::Entity(object.clone()),
        });
    }
}

/// Deterministic for a given (seed, scale) pair.
pub fn generate_toy_ehr_kg(seed: u64, scale: ToyScale) -> KnowledgeGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Builder {
        triples: Vec::new(),
    };

    // Cycle deliberately through title and code pools so that even small
    // graphs cover duplicated titles and shared codes; the rng only picks
    // per-node counts and numeric values.
    let mut diag_cursor = 0usize;
    let mut proc_cursor = 0usize;
    let mut diag_code_cursor = 0usize;
    let mut proc_code_cursor = 0usize;
    let diag_codes: Vec<&str> = DIAG_ONLY_CODES
        .iter()
        .chain(SHARED_CODES)
        .copied()
        .collect();
    let proc_codes: Vec<&str> = PROC_ONLY_CODES
        .iter()
        .chain(SHARED_CODES)
        .copied()
        .collect();

    let mut adm_n = 0usize;
    let mut diag_n = 0usize;
    let mut proc_n = 0usize;
    let mut rx_n = 0usize;
    let mut lab_n = 0usize;

    for p in 1..=scale.patients {
        let patient = b.node(format!("/patient/{p}"));
        b.lit(&patient, "/gender", GENDERS.choose(&mut rng).unwrap().to_string());
        b.lit(&patient, "/age", rng.random_range(18..=90).to_string());

        for _ in 0..scale.admissions_per_patient {
            adm_n += 1;
            let adm = b.node(format!("/admission/{adm_n}"));
            b.edge(&patient, "/hadm", &adm);
            b.lit(
                &adm,
                "/admission_type",
                ADMISSION_TYPES.choose(&mut rng).unwrap().to_string(),
            );
            b.lit(
                &adm,
                "/admission_location",
                ADMISSION_LOCATIONS.choose(&mut rng).unwrap().to_string(),
            );
            b.lit(&adm, "/admit_year", rng.random_range(2100..=2199).to_string());

            for _ in 0..rng.random_range(1..=3) {
                diag_n += 1;
                let diag = b.node(format!("/diagnosis/{diag_n}"));
                b.edge(&adm, "/diagnosis", &diag);
                let (short, long) = DIAG_TITLES[diag_cursor % DIAG_TITLES.len()];
                diag_cursor += 1;
                b.lit(&diag, "/diagnoses_short_title", short.to_string());
                b.lit(&diag, "/diagnoses_long_title", long.to_string());
                let code = diag_codes[diag_code_cursor % diag_codes.len()];
                diag_code_cursor += 1;
                b.lit(&diag, "/diagnoses_icd9_code", code.to_string());
            }

            for _ in 0..rng.random_range(1..=2) {
                proc_n += 1;
                let proc = b.node(format!("/procedure/{proc_n}"));
                b.edge(&adm, "/procedure", &proc);
                let (short, long) = PROC_TITLES[proc_cursor % PROC_TITLES.len()];
                proc_cursor += 1;
                b.lit(&proc, "/procedures_short_title", short.to_string());
                b.lit(&proc, "/procedures_long_title", long.to_string());
                let code = proc_codes[proc_code_cursor % proc_codes.len()];
                proc_code_cursor += 1;
                b.lit(&proc, "/procedures_icd9_code", code.to_string());
            }

            for _ in 0..rng.random_range(1..=3) {
                rx_n += 1;
                let rx = b.node(format!("/prescription/{rx_n}"));
                b.edge(&adm, "/prescription", &rx);
                let i = rng.random_range(0..DRUGS.len());
                b.lit(&rx, "/drug", DRUGS[i].to_string());
                b.lit(&rx, "/route", ROUTES.choose(&mut rng).unwrap().to_string());
                b.lit(&rx, "/formulary_drug_cd", FORMULARY_CODES[i].to_string());
            }

            for _ in 0..rng.random_range(1..=3) {
                lab_n += 1;
                let lab = b.node(format!("/labevent/{lab_n}"));
                b.edge(&adm, "/lab", &lab);
                b.lit(&lab, "/lab_name", LAB_NAMES.choose(&mut rng).unwrap().to_string());
                let value = rng.random_range(10..=4000) as f64 / 10.0;
                b.lit(&lab, "/value", format!("{value:.1}"));
                b.lit(&lab, "/flag", LAB_FLAGS.choose(&mut rng).unwrap().to_string());
            }
        }
    }

    KnowledgeGraph::from_triples(b.triples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn rel(p: &str) -> Relation {
        Relation::new(p).unwrap()
    }

    fn medium() -> KnowledgeGraph {
        generate_toy_ehr_kg(
            1,
            ToyScale {
                patients: 50,
                admissions_per_patient: 2,
            },
        )
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_toy_ehr_kg(7, ToyScale::default());
        let b = generate_toy_ehr_kg(7, ToyScale::default());
        assert_eq!(a, b);
        let c = generate_toy_ehr_kg(8, ToyScale::default());
        assert_ne!(a, c);
    }

    #[test]
    fn roundtrips_through_tsv() {
        let kg = generate_toy_ehr_kg(3, ToyScale::default());
        let again = KnowledgeGraph::parse_tsv(&kg.to_tsv()).unwrap();
        assert_eq!(kg, again);
    }

    #[test]
    fn duplicated_titles_appear_in_both_inventories() {
        let kg = medium();
        let short: BTreeSet<&str> = kg.value_inventory(&rel("/diagnoses_short_title")).collect();
        let long: BTreeSet<&str> = kg.value_inventory(&rel("/diagnoses_long_title")).collect();
        let dual: Vec<&&str> = short.intersection(&long).collect();
        assert!(dual.len() >= 3, "expected duplicated titles, got {dual:?}");
        assert!(long.contains("physical restraints status"));
        // Cousin pairs: a short title whose long form appends "nos".
        let cousins = short
            .iter()
            .filter(|s| long.contains(format!("{s} nos").as_str()))
            .count();
        assert!(cousins >= 8, "expected cousin pairs, found {cousins}");
    }

    #[test]
    fn shared_codes_appear_in_both_inventories() {
        let kg = medium();
        let diag: BTreeSet<&str> = kg.value_inventory(&rel("/diagnoses_icd9_code")).collect();
        let proc: BTreeSet<&str> = kg.value_inventory(&rel("/procedures_icd9_code")).collect();
        for code in SHARED_CODES {
            assert!(diag.contains(code) && proc.contains(code), "missing {code}");
        }
        assert!(diag.iter().any(|c| !proc.contains(*c)));
        assert!(proc.iter().any(|c| !diag.contains(*c)));
    }

    #[test]
    fn every_node_has_an_id_literal() {
        let kg = generate_toy_ehr_kg(2, ToyScale::default());
        let id = rel("/id");
        let subjects: BTreeSet<&NodeId> = kg.triples().iter().map(|t| &t.subject).collect();
        let entity_objects: BTreeSet<&NodeId> = kg
            .triples()
            .iter()
            .filter_map(|t| t.object.as_entity())
            .collect();
        for node in subjects.iter().chain(entity_objects.iter()) {
            let ids: Vec<&Object> = kg.objects(node, &id).collect();
            assert_eq!(ids.len(), 1, "node {node} should carry exactly one /id");
            assert_eq!(ids[0].text(), node.as_str());
        }
    }

    #[test]
    fn schema_relations_are_populated() {
        let kg = medium();
        for group in ToySchema::standard().groups {
            for relation in &group.relations {
                assert!(
                    kg.value_inventory(relation).next().is_some(),
                    "no values for {relation}"
                );
            }
        }
    }

    #[test]
    fn numeric_relations_parse_as_numbers() {
        let kg = medium();
        for relation in ["/age", "/admit_year", "/value"] {
            for text in kg.value_inventory(&rel(relation)) {
                assert!(
                    Literal::new(text).numeric().is_some(),
                    "{relation} value {text:?} should be numeric"
                );
            }
        }
    }

    #[test]
    fn base_titles_share_at_most_the_qualifier() {
        // Fuzzy value lookup depends on distinct base titles overlapping in
        // at most one word. Check the pools directly.
        let bases: Vec<Vec<&str>> = DIAG_TITLES
            .iter()
            .chain(PROC_TITLES)
            .map(|(s, _)| s.split_whitespace().collect())
            .collect();
        for (i, a) in bases.iter().enumerate() {
            for b in bases.iter().skip(i + 1) {
                let a_set: BTreeSet<&&str> = a.iter().collect();
                let shared = b.iter().filter(|w| a_set.contains(w)).count();
                assert!(shared <= 1, "titles {a:?} and {b:?} share {shared} words");
            }
        }
    }
}
