//! Category word lists, trait coefficient tables and the tokenizer that feeds
//! them.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::marker::PhantomData;
use std::path::Path;

use serde::de::{Deserialize, Deserializer, MapAccess, Visitor};

use crate::error::{Error, Result};

/// The substitute lexicon shipped with the crate (68 categories).
pub const DEFAULT_LEXICON_JSON: &str = include_str!("../data/lexicon.json");
/// Illustrative Big5 trait and facet weights (5 traits + 30 facets).
pub const DEFAULT_COEFFICIENTS_JSON: &str = include_str!("../data/coefficients.json");

pub const BIG5_TRAITS: [&str; 5] = [
    "Openness",
    "Conscientiousness",
    "Extraversion",
    "Agreeableness",
    "Neuroticism",
];

/// A JSON object read as an ordered list of entries. Duplicate keys are an
/// error rather than a silent overwrite.
struct OrderedEntries<V>(Vec<(String, V)>);

impl<'de, V: Deserialize<'de>> Deserialize<'de> for OrderedEntries<V> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct EntriesVisitor<V>(PhantomData<V>);

        impl<'de, V: Deserialize<'de>> Visitor<'de> for EntriesVisitor<V> {
            type Value = OrderedEntries<V>;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a JSON object")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<Self::Value, A::Error> {
                let mut seen = HashSet::new();
                let mut entries = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, V>()? {
                    if !seen.insert(k.clone()) {
                        return Err(serde::de::Error::custom(format!("duplicate key {k:?}")));
                    }
                    entries.push((k, v));
                }
                Ok(OrderedEntries(entries))
            }
        }

        deserializer.deserialize_map(EntriesVisitor(PhantomData))
    }
}

#[derive(Debug, Clone)]
pub struct CategoryLexicon {
    names: Vec<String>,
    patterns: Vec<Vec<String>>,
    literal: HashMap<String, Vec<usize>>,
    prefix: HashMap<String, Vec<usize>>,
    longest_prefix: usize,
}

impl CategoryLexicon {
    /// Builds a lexicon from `(category, patterns)` pairs. Patterns are
    /// lowercased; a trailing `*` marks a prefix pattern.
    pub fn new(categories: Vec<(String, Vec<String>)>) -> Result<Self> {
        let mut names = Vec::with_capacity(categories.len());
        let mut patterns = Vec::with_capacity(categories.len());
        let mut literal: HashMap<String, Vec<usize>> = HashMap::new();
        let mut prefix: HashMap<String, Vec<usize>> = HashMap::new();
        let mut seen = HashSet::new();
        let mut longest_prefix = 0;

        for (idx, (name, pats)) in categories.into_iter().enumerate() {
            if !seen.insert(name.clone()) {
                return Err(Error::Format(format!("duplicate category {name:?}")));
            }
            if pats.is_empty() {
                return Err(Error::Format(format!("category {name:?} has no patterns")));
            }
            let mut stored = Vec::with_capacity(pats.len());
            for raw in pats {
                let pat = raw.trim().to_lowercase();
                let stem = pat.strip_suffix('*').unwrap_or(&pat);
                if stem.is_empty() {
                    return Err(Error::Format(format!("empty pattern in category {name:?}")));
                }
                if stem.contains('*') {
                    return Err(Error::Format(format!(
                        "pattern {raw:?} in category {name:?}: '*' may only end a pattern"
                    )));
                }
                let table = if pat.ends_with('*') { &mut prefix } else { &mut literal };
                let cats = table.entry(stem.to_string()).or_default();
                if !cats.contains(&idx) {
                    cats.push(idx);
                }
                if pat.ends_with('*') {
                    longest_prefix = longest_prefix.max(stem.chars().count());
                }
                stored.push(pat);
            }
            names.push(name);
            patterns.push(stored);
        }

        Ok(CategoryLexicon {
            names,
            patterns,
            literal,
            prefix,
            longest_prefix,
        })
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let OrderedEntries(entries) =
            serde_json::from_str::<OrderedEntries<Vec<String>>>(json).map_err(|e| Error::Format(e.to_string()))?;
        Self::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_json(&text)
    }

    /// The shipped 68-category substitute lexicon.
    pub fn shipped() -> Self {
        Self::from_json(DEFAULT_LEXICON_JSON).expect("shipped lexicon is valid")
    }

    pub fn categories(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn category_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn patterns(&self, category: &str) -> Option<&[String]> {
        self.category_index(category).map(|i| self.patterns[i].as_slice())
    }

    /// Indices of every category `token` belongs to, ascending and unique.
    pub fn categories_of(&self, token: &str) -> Vec<usize> {
        let mut hits: Vec<usize> = self.literal.get(token).cloned().unwrap_or_default();
        if !self.prefix.is_empty() {
            for (n, (i, c)) in token.char_indices().enumerate() {
                if n >= self.longest_prefix {
                    break;
                }
                if let Some(cats) = self.prefix.get(&token[..i + c.len_utf8()]) {
                    hits.extend_from_slice(cats);
                }
            }
        }
        hits.sort_unstable();
        hits.dedup();
        hits
    }

    /// Whether `token` matches any pattern of the named category.
    pub fn matches(&self, category: &str, token: &str) -> bool {
        self.category_index(category)
            .is_some_and(|i| self.categories_of(token).contains(&i))
    }
}

/// Lowercase word tokens of one text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenStream {
    pub tokens: Vec<String>,
    pub total_count: usize,
}

impl TokenStream {
    pub fn extend(&mut self, other: TokenStream) {
        self.tokens.extend(other.tokens);
        self.total_count = self.tokens.len();
    }
}

fn is_url(chunk: &str) -> bool {
    let lower = chunk.to_ascii_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
}

/// Drops URLs and @-mentions, strips `#`, lowercases, and splits on anything
/// that is not a letter, digit or apostrophe.
pub fn tokenize(text: &str) -> TokenStream {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        if is_url(chunk) {
            continue;
        }
        let mut cleaned = String::with_capacity(chunk.len());
        let mut chars = chunk.chars().peekable();
        while let Some(c) = chars.next() {
            match c {
                '@' => {
                    while chars.peek().is_some_and(|&n| n.is_alphanumeric() || n == '_') {
                        chars.next();
                    }
                    cleaned.push(' ');
                }
                '#' => cleaned.push(' '),
                '\u{2019}' => cleaned.push('\''),
                _ => cleaned.extend(c.to_lowercase()),
            }
        }
        for tok in cleaned.split(|c: char| !(c.is_alphanumeric() || c == '\'')) {
            let tok = tok.trim_matches('\'');
            if !tok.is_empty() {
                tokens.push(tok.to_string());
            }
        }
    }
    let total_count = tokens.len();
    TokenStream { tokens, total_count }
}

/// Per-category match counts, aligned with `CategoryLexicon::categories`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryCounts {
    pub counts: Vec<usize>,
}

impl CategoryCounts {
    pub fn get(&self, lexicon: &CategoryLexicon, category: &str) -> Option<usize> {
        lexicon.category_index(category).map(|i| self.counts[i])
    }

    pub fn add(&mut self, other: &CategoryCounts) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }
}

/// Counts, per category, the tokens matching any of its patterns. A token
/// may count toward several categories.
pub fn count_matches(tokens: &TokenStream, lexicon: &CategoryLexicon) -> CategoryCounts {
    let mut counts = vec![0; lexicon.len()];
    for tok in &tokens.tokens {
        for c in lexicon.categories_of(tok) {
            counts[c] += 1;
        }
    }
    CategoryCounts { counts }
}

/// Linear weights from category scores to personality traits and facets,
/// resolved against one lexicon.
#[derive(Debug, Clone)]
pub struct TraitCoefficients {
    traits: Vec<(String, Vec<(usize, f64)>)>,
}

impl TraitCoefficients {
    pub fn new(raw: Vec<(String, Vec<(String, f64)>)>, lexicon: &CategoryLexicon) -> Result<Self> {
        let mut traits = Vec::with_capacity(raw.len());
        let mut seen = HashSet::new();
        for (name, weights) in raw {
            if !seen.insert(name.clone()) {
                return Err(Error::Config(format!("duplicate trait {name:?}")));
            }
            let mut resolved = Vec::with_capacity(weights.len());
            for (cat, w) in weights {
                let idx = lexicon.category_index(&cat).ok_or_else(|| {
                    Error::Config(format!("trait {name:?} references unknown category {cat:?}"))
                })?;
                if !w.is_finite() {
                    return Err(Error::Config(format!("trait {name:?}: non-finite weight for {cat:?}")));
                }
                resolved.push((idx, w));
            }
            traits.push((name, resolved));
        }
        Ok(TraitCoefficients { traits })
    }

    pub fn from_json(json: &str, lexicon: &CategoryLexicon) -> Result<Self> {
        let OrderedEntries(entries) = serde_json::from_str::<OrderedEntries<OrderedEntries<f64>>>(json)
            .map_err(|e| Error::Config(format!("coefficients: {e}")))?;
        Self::new(entries.into_iter().map(|(k, OrderedEntries(v))| (k, v)).collect(), lexicon)
    }

    pub fn load(path: &Path, lexicon: &CategoryLexicon) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_json(&text, lexicon)
    }

    /// The shipped illustrative table, resolved against `lexicon`.
    pub fn shipped(lexicon: &CategoryLexicon) -> Result<Self> {
        Self::from_json(DEFAULT_COEFFICIENTS_JSON, lexicon)
    }

    pub fn empty() -> Self {
        TraitCoefficients { traits: Vec::new() }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.traits.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.traits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traits.is_empty()
    }

    pub fn weights(&self) -> &[(String, Vec<(usize, f64)>)] {
        &self.traits
    }

    /// Errors unless all five Big5 trait names are present.
    pub fn require_big5(&self) -> Result<()> {
        for t in BIG5_TRAITS {
            if !self.traits.iter().any(|(n, _)| n.eq_ignore_ascii_case(t)) {
                return Err(Error::Config(format!("coefficient table lacks Big5 trait {t}")));
            }
        }
        Ok(())
    }
}
