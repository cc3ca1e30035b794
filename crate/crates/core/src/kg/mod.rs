//! Immutable triple store with lookup indexes and a TSV loader.
//!
//! Triples are `(subject, relation, object)` where the object is either
//! another entity or a literal. The store is built once, sorted into a
//! canonical order, deduplicated, and never mutated afterwards, so it can
//! be shared freely across threads.

mod toy;

pub use toy::{generate_toy_ehr_kg, ToySchema, ToyScale};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KgError {
    #[error("line {line}: expected 4 tab-separated columns, found {found}")]
    ColumnCount { line: usize, found: usize },
    #[error("line {line}: unknown object kind {kind:?} (expected \"ent\" or \"lit\")")]
    BadObjectKind { line: usize, kind: String },
    #[error("line {line}: {source}")]
    BadField {
        line: usize,
        #[source]
        source: IdError,
    },
}

#[derive(Debug, Error)]
pub enum IdError {
    #[error("invalid node id {0:?}: must be non-empty, start with '/', and contain no whitespace")]
    InvalidNodeId(String),
    #[error("invalid relation {0:?}: must be non-empty and start with '/'")]
    InvalidRelation(String),
}

/// Slash-prefixed entity identifier, e.g. `/patient/1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(path: impl Into<String>) -> Result<Self, IdError> {
        let path = path.into();
        if path.is_empty() || !path.starts_with('/') || path.chars().any(|c| c.is_whitespace()) {
            return Err(IdError::InvalidNodeId(path));
        }
        Ok(NodeId(path))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Slash-prefixed relation identifier, e.g. `/diagnoses_short_title`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Relation(String);

impl Relation {
    pub fn new(path: impl Into<String>) -> Result<Self, IdError> {
        let path = path.into();
        if path.is_empty() || !path.starts_with('/') {
            return Err(IdError::InvalidRelation(path));
        }
        Ok(Relation(path))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A literal value. `numeric` is present exactly when the text parses as a
/// finite decimal number (optional sign, decimal point, exponent).
#[derive(Debug, Clone)]
pub struct Literal {
    text: String,
    numeric: Option<f64>,
}

impl Literal {
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        let numeric = parse_decimal(&text);
        Literal { text, numeric }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn numeric(&self) -> Option<f64> {
        self.numeric
    }
}

impl PartialEq for Literal {
    fn eq(&self, other: &Self) -> bool {
        self.text == other.text
    }
}

impl Eq for Literal {}

impl PartialOrd for Literal {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Literal {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.text.cmp(&other.text)
    }
}

impl std::hash::Hash for Literal {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.text.hash(state);
    }
}

/// Strict decimal parser: rejects inf/nan spellings and hex, accepts
/// optional sign, fraction, and exponent.
fn parse_decimal(text: &str) -> Option<f64> {
    if text.is_empty()
        || !text
            .chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | 'e' | 'E'))
    {
        return None;
    }
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Some(v),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Object {
    Entity(NodeId),
    Literal(Literal),
}

impl Object {
    pub fn kind_tag(&self) -> &'static str {
        match self {
            Object::Entity(_) => "ent",
            Object::Literal(_) => "lit",
        }
    }

    pub fn text(&self) -> &str {
        match self {
            Object::Entity(n) => n.as_str(),
            Object::Literal(l) => l.text(),
        }
    }

    pub fn as_entity(&self) -> Option<&NodeId> {
        match self {
            Object::Entity(n) => Some(n),
            Object::Literal(_) => None,
        }
    }

    pub fn as_literal(&self) -> Option<&Literal> {
        match self {
            Object::Entity(_) => None,
            Object::Literal(l) => Some(l),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Triple {
    pub subject: NodeId,
    pub relation: Relation,
    pub object: Object,
}

impl Triple {
    /// Canonical order key: matches lexicographic order of serialized lines.
    fn sort_key(&self) -> (&str, &str, &str, &str) {
        (
            self.subject.as_str(),
            self.relation.as_str(),
            self.object.text(),
            self.object.kind_tag(),
        )
    }
}

/// Immutable indexed triple store.
///
/// Indexes are derived from the triple list at construction time and are
/// never authoritative on their own.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    triples: Vec<Triple>,
    // (subject, relation) -> triple indices
    index_sr: HashMap<NodeId, HashMap<Relation, Vec<usize>>>,
    // (relation, entity object) -> subject list
    index_ro: HashMap<Relation, HashMap<NodeId, Vec<NodeId>>>,
    // relation -> triple indices
    index_r: HashMap<Relation, Vec<usize>>,
    // relation -> distinct literal texts among its objects
    value_inventory: HashMap<Relation, BTreeSet<String>>,
}

impl PartialEq for KnowledgeGraph {
    fn eq(&self, other: &Self) -> bool {
        self.triples == other.triples
    }
}

impl Eq for KnowledgeGraph {}

impl KnowledgeGraph {
    /// Builds the store: sorts into canonical order, drops exact duplicates,
    /// and derives all indexes.
    pub fn from_triples(mut triples: Vec<Triple>) -> Self {
        triples.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        triples.dedup();

        let mut index_sr: HashMap<NodeId, HashMap<Relation, Vec<usize>>> = HashMap::new();
        let mut index_ro: HashMap<Relation, HashMap<NodeId, Vec<NodeId>>> = HashMap::new();
        let mut index_r: HashMap<Relation, Vec<usize>> = HashMap::new();
        let mut value_inventory: HashMap<Relation, BTreeSet<String>> = HashMap::new();

        for (i, t) in triples.iter().enumerate() {
            index_sr
                .entry(t.subject.clone())
                .or_default()
                .entry(t.relation.clone())
                .or_default()
                .push(i);
            index_r.entry(t.relation.clone()).or_default().push(i);
            match &t.object {
                Object::Entity(o) => {
                    index_ro
                        .entry(t.relation.clone())
                        .or_default()
                        .entry(o.clone())
                        .or_default()
                        .push(t.subject.clone());
                }
                Object::Literal(l) => {
                    value_inventory
                        .entry(t.relation.clone())
                        .or_default()
                        .insert(l.text().to_string());
                }
            }
        }

        KnowledgeGraph {
            triples,
            index_sr,
            index_ro,
            index_r,
            value_inventory,
        }
    }

    /// Parses the TSV triple format: one triple per line, four tab-separated
    /// columns `subject relation object kind`, kind in {"ent","lit"}.
    /// Lines starting with `#` and blank lines are skipped.
    pub fn parse_tsv(source: &str) -> Result<Self, KgError> {
        let mut triples = Vec::new();
        for (idx, raw) in source.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = raw.split('\t').collect();
            if cols.len() != 4 {
                return Err(KgError::ColumnCount {
                    line,
                    found: cols.len(),
                });
            }
            let subject = NodeId::new(cols[0]).map_err(|source| KgError::BadField { line, source })?;
            let relation =
                Relation::new(cols[1]).map_err(|source| KgError::BadField { line, source })?;
            let object = match cols[3] {
                "ent" => Object::Entity(
                    NodeId::new(cols[2]).map_err(|source| KgError::BadField { line, source })?,
                ),
                "lit" => Object::Literal(Literal::new(cols[2])),
                other => {
                    return Err(KgError::BadObjectKind {
                        line,
                        kind: other.to_string(),
                    })
                }
            };
            triples.push(Triple {
                subject,
                relation,
                object,
            });
        }
        Ok(Self::from_triples(triples))
    }

    /// Canonical serialization: lexicographically sorted lines.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for t in &self.triples {
            out.push_str(t.subject.as_str());
            out.push('\t');
            out.push_str(t.relation.as_str());
            out.push('\t');
            out.push_str(t.object.text());
            out.push('\t');
            out.push_str(t.object.kind_tag());
            out.push('\n');
        }
        out
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Objects of all `(subject, relation, _)` triples, in canonical order.
    pub fn objects(&self, subject: &NodeId, relation: &Relation) -> impl Iterator<Item = &Object> {
        self.index_sr
            .get(subject)
            .and_then(|m| m.get(relation))
            .into_iter()
            .flatten()
            .map(move |&i| &self.triples[i].object)
    }

    /// Subjects of all `(_, relation, object-entity)` triples.
    pub fn subjects_of_object(
        &self,
        relation: &Relation,
        object: &NodeId,
    ) -> impl Iterator<Item = &NodeId> {
        self.index_ro
            .get(relation)
            .and_then(|m| m.get(object))
            .into_iter()
            .flatten()
    }

    /// All triples carrying `relation`, in canonical order.
    pub fn triples_of_relation(&self, relation: &Relation) -> impl Iterator<Item = &Triple> {
        self.index_r
            .get(relation)
            .into_iter()
            .flatten()
            .map(move |&i| &self.triples[i])
    }

    /// Distinct literal texts among objects of `relation` (sorted).
    pub fn value_inventory(&self, relation: &Relation) -> impl Iterator<Item = &str> {
        self.value_inventory
            .get(relation)
            .into_iter()
            .flatten()
            .map(|s| s.as_str())
    }

    pub fn has_values(&self, relation: &Relation) -> bool {
        self.value_inventory.contains_key(relation)
    }

    /// Relations that carry at least one literal object, sorted.
    pub fn literal_relations(&self) -> Vec<&Relation> {
        let mut rels: Vec<&Relation> = self.value_inventory.keys().collect();
        rels.sort();
        rels
    }

    /// All distinct relations, sorted.
    pub fn relations(&self) -> Vec<&Relation> {
        let mut rels: Vec<&Relation> = self.index_r.keys().collect();
        rels.sort();
        rels
    }

    /// All distinct subjects, sorted, grouped with their literal triples.
    /// Only subjects owning at least one literal are returned.
    pub fn subjects_with_literals(&self) -> BTreeMap<&NodeId, Vec<(&Relation, &Literal)>> {
        let mut map: BTreeMap<&NodeId, Vec<(&Relation, &Literal)>> = BTreeMap::new();
        for t in &self.triples {
            if let Object::Literal(l) = &t.object {
                map.entry(&t.subject).or_default().push((&t.relation, l));
            }
        }
        map
    }
}
