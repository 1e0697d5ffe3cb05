//! Numeral-noun phrase rendering: `"<digits> <plural>"`.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{Lexicon, NounEntry};

/// Largest allowed `hi - lo` span.
pub const MAX_RANGE_SPAN: u32 = 1000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PhraseError {
    #[error("quantity {0} is below 2; phrases always use a plural noun")]
    QuantityTooSmall(u32),
    #[error("invalid quantity range {lo}..{hi}: need 2 <= lo <= hi and hi - lo <= {MAX_RANGE_SPAN}")]
    InvalidRange { lo: u32, hi: u32 },
    #[error("cannot parse quantity range '{0}', expected LO..HI")]
    RangeSyntax(String),
}

/// Inclusive range of quantities, `2 <= lo <= hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RangeRepr", into = "RangeRepr")]
pub struct QuantityRange {
    lo: u32,
    hi: u32,
}

impl QuantityRange {
    pub fn new(lo: u32, hi: u32) -> Result<Self, PhraseError> {
        if lo < 2 || hi < lo || hi - lo > MAX_RANGE_SPAN {
            return Err(PhraseError::InvalidRange { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> u32 {
        self.lo
    }

    pub fn hi(&self) -> u32 {
        self.hi
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, n: u32) -> bool {
        (self.lo..=self.hi).contains(&n)
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> {
        self.lo..=self.hi
    }
}

impl Default for QuantityRange {
    /// `2..11`: the proxy with horizon 10 needs the pair (10, 11).
    fn default() -> Self {
        Self { lo: 2, hi: 11 }
    }
}

impl fmt::Display for QuantityRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.lo, self.hi)
    }
}

impl FromStr for QuantityRange {
    type Err = PhraseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (lo, hi) = s.split_once("..").ok_or_else(|| PhraseError::RangeSyntax(s.to_string()))?;
        let hi = hi.strip_prefix('=').unwrap_or(hi);
        let lo: u32 = lo.trim().parse().map_err(|_| PhraseError::RangeSyntax(s.to_string()))?;
        let hi: u32 = hi.trim().parse().map_err(|_| PhraseError::RangeSyntax(s.to_string()))?;
        Self::new(lo, hi)
    }
}

#[derive(Serialize, Deserialize)]
struct RangeRepr {
    lo: u32,
    hi: u32,
}

impl TryFrom<RangeRepr> for QuantityRange {
    type Error = PhraseError;
    fn try_from(r: RangeRepr) -> Result<Self, Self::Error> {
        Self::new(r.lo, r.hi)
    }
}

impl From<QuantityRange> for RangeRepr {
    fn from(r: QuantityRange) -> Self {
        Self { lo: r.lo, hi: r.hi }
    }
}

pub fn render_phrase(n: u32, entry: &NounEntry) -> Result<String, PhraseError> {
    if n < 2 {
        return Err(PhraseError::QuantityTooSmall(n));
    }
    Ok(format!("{n} {}", entry.plural))
}

/// Splits a phrase at its first space into quantity and plural.
pub fn split_phrase(phrase: &str) -> Option<(u32, &str)> {
    let (digits, plural) = phrase.split_once(' ')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || plural.is_empty() {
        return None;
    }
    Some((digits.parse().ok()?, plural))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub singular: String,
    pub quantity: u32,
    pub phrase: String,
}

/// Every phrase an embedding provider has to embed for a lexicon and range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhraseManifest {
    pub range: QuantityRange,
    /// Unique phrases, lexicon order major, quantity ascending minor.
    pub phrases: Vec<String>,
    /// One record per (noun, quantity), same ordering.
    pub provenance: Vec<Provenance>,
}

impl PhraseManifest {
    /// One phrase per line, trailing newline.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.phrases.len() * 12);
        for p in &self.phrases {
            out.push_str(p);
            out.push('\n');
        }
        out
    }

    /// Provenance records belonging to one noun.
    pub fn records_for<'a>(&'a self, singular: &'a str) -> impl Iterator<Item = &'a Provenance> {
        self.provenance.iter().filter(move |p| p.singular == singular)
    }
}

pub fn phrase_manifest(lex: &Lexicon, range: QuantityRange) -> PhraseManifest {
    let mut seen = HashSet::new();
    let mut phrases = Vec::new();
    let mut provenance = Vec::with_capacity(lex.len() * range.len());
    for entry in lex.entries() {
        for n in range.iter() {
            let phrase = render_phrase(n, entry).expect("range starts at 2");
            if seen.insert(phrase.clone()) {
                phrases.push(phrase.clone());
            }
            provenance.push(Provenance { singular: entry.singular.clone(), quantity: n, phrase });
        }
    }
    PhraseManifest { range, phrases, provenance }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::parse_lexicon;
    use proptest::prelude::*;

    #[test]
    fn renders_digits_and_plural() {
        let apple = NounEntry::new("apple", "apples", &[]);
        let sheep = NounEntry::new("sheep", "sheep", &[]);
        let book = NounEntry::new("book", "books", &[]);
        assert_eq!(render_phrase(2, &apple).unwrap(), "2 apples");
        assert_eq!(render_phrase(10, &sheep).unwrap(), "10 sheep");
        assert_eq!(render_phrase(11, &book).unwrap(), "11 books");
        assert_eq!(render_phrase(1, &book), Err(PhraseError::QuantityTooSmall(1)));
    }

    #[test]
    fn range_validation_and_parsing() {
        assert!(QuantityRange::new(1, 5).is_err());
        assert!(QuantityRange::new(5, 4).is_err());
        assert!(QuantityRange::new(2, 1003).is_err());
        assert!(QuantityRange::new(2, 1002).is_ok());
        assert_eq!("2..10".parse::<QuantityRange>().unwrap(), QuantityRange::new(2, 10).unwrap());
        assert_eq!("3..=4".parse::<QuantityRange>().unwrap(), QuantityRange::new(3, 4).unwrap());
        assert!("2-10".parse::<QuantityRange>().is_err());
        assert_eq!(QuantityRange::default().to_string(), "2..11");
    }

    #[test]
    fn one_noun_nine_phrases() {
        let (lex, _) = parse_lexicon("apple\tapples\n").unwrap();
        let m = phrase_manifest(&lex, QuantityRange::new(2, 10).unwrap());
        assert_eq!(m.phrases.len(), 9);
        assert_eq!(m.phrases[0], "2 apples");
        assert_eq!(m.phrases[8], "10 apples");
    }

    #[test]
    fn shared_plural_collapses() {
        // grid: {fish(a), fish(b)} x {2, 3} → phrases {"2 fish", "3 fish"}, 4 records
        let (lex, _) = parse_lexicon("fish\tfish\nfishes\tfish\n").unwrap();
        let m = phrase_manifest(&lex, QuantityRange::new(2, 3).unwrap());
        assert_eq!(m.phrases, vec!["2 fish", "3 fish"]);
        assert_eq!(m.provenance.len(), 4);
        assert_eq!(m.records_for("fishes").count(), 2);
    }

    #[test]
    fn single_quantity_range() {
        let (lex, _) = parse_lexicon("a\tas\nb\tbs\n").unwrap();
        let m = phrase_manifest(&lex, QuantityRange::new(2, 2).unwrap());
        assert_eq!(m.phrases, vec!["2 as", "2 bs"]);
    }

    proptest! {
        #[test]
        fn phrases_split_back(lo in 2u32..50, span in 0u32..20, plural in "[a-z]{1,8}( [a-z]{1,5})?") {
            let range = QuantityRange::new(lo, lo + span).unwrap();
            let entry = NounEntry::new("x", &plural, &[]);
            let lex = Lexicon::from_entries(vec![entry]);
            let m = phrase_manifest(&lex, range);
            prop_assert_eq!(m.phrases.len(), range.len());
            for (p, rec) in m.phrases.iter().zip(&m.provenance) {
                let (n, pl) = split_phrase(p).unwrap();
                prop_assert_eq!(n, rec.quantity);
                prop_assert_eq!(pl, plural.as_str());
            }
        }
    }
}
