//! Noun lexicon: singular/plural pairs tagged with semantic categories.
//!
//! The interchange format is one entry per line,
//! `singular<TAB>plural<TAB>cat1,cat2,...`, where the category field is
//! optional and `#` starts a comment line. Tokens and category names are
//! lowercased on parse.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

/// The category names used for the class-level analysis, in reporting order.
pub const CANONICAL_CATEGORIES: &str = include_str!("../data/categories.txt");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LexiconError {
    #[error("line {line}: expected 2 or 3 tab-separated fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: empty {field}")]
    EmptyToken { line: usize, field: &'static str },
    #[error("lexicon contains no entries")]
    Empty,
    #[error("no categories requested")]
    NoCategories,
    #[error("unknown categories: {}", .0.join(", "))]
    UnknownCategories(Vec<String>),
    #[error("duplicate category name '{0}'")]
    DuplicateCategory(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NounEntry {
    pub singular: String,
    pub plural: String,
    /// Category tags in file order, without duplicates.
    pub categories: Vec<String>,
}

impl NounEntry {
    pub fn new(singular: &str, plural: &str, categories: &[&str]) -> Self {
        let mut cats: Vec<String> = Vec::new();
        for c in categories {
            let c = normalize(c);
            if !c.is_empty() && !cats.contains(&c) {
                cats.push(c);
            }
        }
        Self { singular: normalize(singular), plural: normalize(plural), categories: cats }
    }

    pub fn has_category(&self, name: &str) -> bool {
        self.categories.iter().any(|c| c == name)
    }
}

/// An ordered list of distinct category names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategorySet {
    names: Vec<String>,
}

impl CategorySet {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Self, LexiconError> {
        let mut out: Vec<String> = Vec::with_capacity(names.len());
        for n in names {
            let n = normalize(n.as_ref());
            if n.is_empty() {
                continue;
            }
            if out.contains(&n) {
                return Err(LexiconError::DuplicateCategory(n));
            }
            out.push(n);
        }
        Ok(Self { names: out })
    }

    /// Parses a comma-separated list (`"fruit,food"`).
    pub fn from_csv(list: &str) -> Result<Self, LexiconError> {
        let parts: Vec<&str> = list.split(',').collect();
        Self::new(&parts)
    }

    /// Parses one name per line; blank lines and `#` comments are skipped.
    pub fn from_lines(text: &str) -> Result<Self, LexiconError> {
        let parts: Vec<&str> =
            text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).collect();
        Self::new(&parts)
    }

    /// The twelve WordNet classes used for the class-level analysis.
    pub fn canonical() -> Self {
        Self::from_lines(CANONICAL_CATEGORIES).expect("bundled categories are valid")
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Immutable, validated noun list with a category index.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    entries: Vec<NounEntry>,
    category_index: BTreeMap<String, Vec<usize>>,
    category_order: Vec<String>,
}

/// A duplicate singular dropped during parsing (first occurrence wins).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DuplicateEntry {
    pub line: usize,
    pub singular: String,
    pub first_line: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseReport {
    pub duplicates: Vec<DuplicateEntry>,
    pub comment_lines: usize,
}

impl Lexicon {
    /// Builds a lexicon from entries, keeping the first of any duplicate singulars.
    pub fn from_entries(entries: Vec<NounEntry>) -> Self {
        let mut seen = HashSet::new();
        let entries: Vec<NounEntry> =
            entries.into_iter().filter(|e| seen.insert(e.singular.clone())).collect();
        let mut category_index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut category_order = Vec::new();
        for (i, e) in entries.iter().enumerate() {
            for c in &e.categories {
                let slot = category_index.entry(c.clone()).or_default();
                if slot.is_empty() {
                    category_order.push(c.clone());
                }
                slot.push(i);
            }
        }
        Self { entries, category_index, category_order }
    }

    pub fn entries(&self) -> &[NounEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, singular: &str) -> Option<&NounEntry> {
        self.entries.iter().find(|e| e.singular == singular)
    }

    /// Entry indices tagged with `category`, in lexicon order.
    pub fn members(&self, category: &str) -> &[usize] {
        self.category_index.get(category).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Categories in order of first appearance.
    pub fn categories(&self) -> CategorySet {
        CategorySet { names: self.category_order.clone() }
    }

    pub fn has_category(&self, name: &str) -> bool {
        self.category_index.contains_key(name)
    }

    /// Serializes back into the TSV interchange format.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = write!(out, "{}\t{}", e.singular, e.plural);
            if !e.categories.is_empty() {
                let _ = write!(out, "\t{}", e.categories.join(","));
            }
            out.push('\n');
        }
        out
    }
}

fn normalize(s: &str) -> String {
    s.trim().to_lowercase()
}

/// Parses the lexicon TSV format.
pub fn parse_lexicon(text: &str) -> Result<(Lexicon, ParseReport), LexiconError> {
    let mut report = ParseReport::default();
    let mut entries = Vec::new();
    let mut first_seen: HashMap<String, usize> = HashMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim_start().starts_with('#') {
            report.comment_lines += 1;
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(LexiconError::FieldCount { line: line_no, found: fields.len() });
        }
        let singular = normalize(fields[0]);
        let plural = normalize(fields[1]);
        if singular.is_empty() {
            return Err(LexiconError::EmptyToken { line: line_no, field: "singular" });
        }
        if plural.is_empty() {
            return Err(LexiconError::EmptyToken { line: line_no, field: "plural" });
        }
        let cats: Vec<&str> = fields.get(2).map(|f| f.split(',').collect()).unwrap_or_default();

        if let Some(&first_line) = first_seen.get(&singular) {
            report.duplicates.push(DuplicateEntry { line: line_no, singular, first_line });
            continue;
        }
        first_seen.insert(singular.clone(), line_no);
        entries.push(NounEntry::new(&singular, &plural, &cats));
    }

    if entries.is_empty() {
        return Err(LexiconError::Empty);
    }
    Ok((Lexicon::from_entries(entries), report))
}

/// Keeps entries tagged with at least one of `cats`.
///
/// The returned lexicon's category index is restricted to the requested
/// names; a noun carrying several requested tags appears once in the entry
/// list and under each tag in the index.
pub fn filter_by_categories(lex: &Lexicon, cats: &CategorySet) -> Result<Lexicon, LexiconError> {
    if cats.is_empty() {
        return Err(LexiconError::NoCategories);
    }
    let unknown: Vec<String> = cats.names().iter().filter(|c| !lex.has_category(c)).cloned().collect();
    if !unknown.is_empty() {
        return Err(LexiconError::UnknownCategories(unknown));
    }
    let wanted: HashSet<&str> = cats.names().iter().map(String::as_str).collect();
    let entries = lex
        .entries()
        .iter()
        .filter(|e| e.categories.iter().any(|c| wanted.contains(c.as_str())))
        .map(|e| NounEntry {
            singular: e.singular.clone(),
            plural: e.plural.clone(),
            categories: e.categories.iter().filter(|c| wanted.contains(c.as_str())).cloned().collect(),
        })
        .collect();
    Ok(Lexicon::from_entries(entries))
}

/// Number of entries indexed under each category.
pub fn category_sizes(lex: &Lexicon) -> BTreeMap<String, usize> {
    lex.category_index.iter().map(|(k, v)| (k.clone(), v.len())).collect()
}
