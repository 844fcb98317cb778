//! Emotion and sentiment lexicons as word feature vectors.
//!
//! Every lexicon is stored in one canonical TSV layout, `word \t v1 [\t v2 …]`,
//! with `#` comment lines. Nine lexicons are concatenated in a fixed order
//! into a 25-wide vector per word. Polynomial expansion is applied per
//! lexicon block, so a block of width `d` becomes `C(d + p, p)` monomials.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::corpus::read_file;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelKind {
    Numerical,
    /// 0/1 association flags.
    Nominal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LexiconSchema {
    pub name: &'static str,
    pub width: usize,
    pub label_kind: LabelKind,
}

impl LexiconSchema {
    /// File name inside a lexicon directory.
    pub fn file_name(&self) -> String {
        format!("{}.tsv", self.name)
    }

    pub fn by_name(name: &str) -> Result<LexiconSchema> {
        LEXICON_SCHEMAS
            .iter()
            .find(|s| s.name == name)
            .copied()
            .ok_or_else(|| Error::Invalid(format!("unknown lexicon schema `{name}`")))
    }
}

const fn schema(name: &'static str, width: usize, label_kind: LabelKind) -> LexiconSchema {
    LexiconSchema {
        name,
        width,
        label_kind,
    }
}

/// The nine lexicons in concatenation order.
pub const LEXICON_SCHEMAS: [LexiconSchema; 9] = [
    schema("nrc-emo-int", 1, LabelKind::Numerical),
    schema("sentiwordnet", 2, LabelKind::Numerical),
    schema("nrc-emo-lex", 1, LabelKind::Nominal),
    schema("nrc-hash-emo", 1, LabelKind::Numerical),
    schema("sentiment140", 3, LabelKind::Numerical),
    schema("emo-aff-neg", 3, LabelKind::Numerical),
    schema("hash-aff-neg", 3, LabelKind::Numerical),
    schema("hash-senti", 3, LabelKind::Numerical),
    schema("depechemood", 8, LabelKind::Numerical),
];

pub fn block_widths() -> Vec<usize> {
    LEXICON_SCHEMAS.iter().map(|s| s.width).collect()
}

/// Width of the concatenated raw vector (25).
pub fn raw_width() -> usize {
    LEXICON_SCHEMAS.iter().map(|s| s.width).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexiconTable {
    pub schema: LexiconSchema,
    pub entries: BTreeMap<String, Vec<f64>>,
    /// Rows that overwrote an earlier row for the same word.
    pub duplicates: usize,
}

impl LexiconTable {
    pub fn empty(schema: LexiconSchema) -> Self {
        LexiconTable {
            schema,
            entries: BTreeMap::new(),
            duplicates: 0,
        }
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.entries.get(word).map(Vec::as_slice)
    }
}

/// Parses canonical lexicon TSV. Words are lowercased; later rows win.
pub fn parse_lexicon_bytes(
    bytes: &[u8],
    source_name: &str,
    schema: LexiconSchema,
) -> Result<LexiconTable> {
    let mut table = LexiconTable::empty(schema);
    for (i, raw) in bytes.split(|b| *b == b'\n').enumerate() {
        let lineno = i + 1;
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        let line = std::str::from_utf8(raw)
            .map_err(|_| Error::parse(source_name, lineno, "invalid UTF-8"))?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != schema.width + 1 {
            return Err(Error::parse(
                source_name,
                lineno,
                format!(
                    "{} expects {} columns, found {}",
                    schema.name,
                    schema.width + 1,
                    fields.len()
                ),
            ));
        }
        let word = fields[0].trim().to_lowercase();
        if word.is_empty() {
            return Err(Error::parse(source_name, lineno, "empty word"));
        }
        let mut values = Vec::with_capacity(schema.width);
        for (k, field) in fields[1..].iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::parse(
                    source_name,
                    lineno,
                    format!("column {}: `{field}` is not a number", k + 2),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::parse(
                    source_name,
                    lineno,
                    format!("column {}: non-finite value", k + 2),
                ));
            }
            if schema.label_kind == LabelKind::Nominal && v != 0.0 && v != 1.0 {
                return Err(Error::parse(
                    source_name,
                    lineno,
                    format!("column {}: nominal value must be 0 or 1, got {v}", k + 2),
                ));
            }
            values.push(v);
        }
        if table.entries.insert(word, values).is_some() {
            table.duplicates += 1;
        }
    }
    if table.duplicates > 0 {
        log::warn!(
            "{source_name}: {} duplicate words, last row kept",
            table.duplicates
        );
    }
    Ok(table)
}

pub fn parse_lexicon(path: &Path, schema: LexiconSchema) -> Result<LexiconTable> {
    parse_lexicon_bytes(&read_file(path)?, &path.display().to_string(), schema)
}

/// All nine tables in concatenation order.
#[derive(Debug, Clone, PartialEq)]
pub struct LexiconSet {
    tables: Vec<LexiconTable>,
}

impl LexiconSet {
    pub fn new(tables: Vec<LexiconTable>) -> Result<Self> {
        if tables.len() != LEXICON_SCHEMAS.len()
            || tables
                .iter()
                .zip(LEXICON_SCHEMAS.iter())
                .any(|(t, s)| t.schema != *s)
        {
            return Err(Error::Invalid(
                "lexicon tables must follow the declared schema order".into(),
            ));
        }
        Ok(LexiconSet { tables })
    }

    /// Loads `<name>.tsv` for each schema; absent files give empty tables.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        if !dir.is_dir() {
            return Err(Error::Invalid(format!(
                "lexicon directory {} not found",
                dir.display()
            )));
        }
        let mut tables = Vec::with_capacity(LEXICON_SCHEMAS.len());
        for schema in LEXICON_SCHEMAS {
            let path = dir.join(schema.file_name());
            if path.exists() {
                let table = parse_lexicon(&path, schema)?;
                log::info!("{}: {} entries", path.display(), table.entries.len());
                tables.push(table);
            } else {
                log::info!("{} absent; its block stays zero", path.display());
                tables.push(LexiconTable::empty(schema));
            }
        }
        LexiconSet::new(tables)
    }

    pub fn tables(&self) -> &[LexiconTable] {
        &self.tables
    }
}

/// Raw 25-wide feature vector of one (lowercased) word. Misses are zero blocks.
pub fn word_features(word: &str, lexicons: &LexiconSet) -> Vec<f64> {
    let mut out = Vec::with_capacity(raw_width());
    for table in &lexicons.tables {
        match table.get(word) {
            Some(v) => out.extend_from_slice(v),
            None => out.extend(std::iter::repeat_n(0.0, table.schema.width)),
        }
    }
    out
}

/// `C(d + p, p)`: number of monomials of total degree ≤ p in d variables.
pub fn monomial_count(width: usize, degree: usize) -> usize {
    let (n, k) = (width + degree, degree.min(width));
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// All monomials of total degree ≤ `degree`, constant first, graded
/// lexicographic within each degree (`[a, b]`, p = 2 → `1, a, b, a², ab, b²`).
pub fn poly_expand(block: &[f64], degree: usize) -> Vec<f64> {
    let d = block.len();
    let mut out = Vec::with_capacity(monomial_count(d, degree));
    out.push(1.0);
    // Monomials of the previous degree, tagged with their lowest allowed next index.
    let mut frontier: Vec<(usize, f64)> = vec![(0, 1.0)];
    for _ in 0..degree {
        let mut next = Vec::new();
        for &(start, value) in &frontier {
            for (j, x) in block.iter().enumerate().skip(start) {
                next.push((j, value * x));
            }
        }
        out.extend(next.iter().map(|(_, v)| *v));
        frontier = next;
    }
    out
}

/// Per-block expansion of a raw vector laid out by `widths`.
pub fn expand_blocks(raw: &[f64], widths: &[usize], degree: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let mut offset = 0;
    for &w in widths {
        out.extend(poly_expand(&raw[offset..offset + w], degree));
        offset += w;
    }
    out
}

/// Width after per-block expansion of the nine lexicons.
pub fn expanded_width(degree: Option<usize>) -> usize {
    match degree {
        None => raw_width(),
        Some(p) => LEXICON_SCHEMAS
            .iter()
            .map(|s| monomial_count(s.width, p))
            .sum(),
    }
}

/// Sorted set of tokens seen in the corpora, indexed from 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

const VOCAB_HEADER: &str = "# emodyn vocabulary v1";
const FEATURES_HEADER: &str = "# emodyn word-features v1";

impl Vocabulary {
    pub fn from_words(words: impl IntoIterator<Item = String>) -> Result<Self> {
        let mut words: Vec<String> = words.into_iter().collect();
        words.sort();
        words.dedup();
        if words.is_empty() {
            return Err(Error::Empty("vocabulary".into()));
        }
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Ok(Vocabulary { words, index })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("{VOCAB_HEADER}\nindex\tword\n");
        for (i, w) in self.words.iter().enumerate() {
            out.push_str(&format!("{i}\t{w}\n"));
        }
        out
    }

    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l == VOCAB_HEADER => {}
            _ => return Err(Error::parse("vocabulary", 1, "missing version header")),
        }
        let mut words = Vec::new();
        for (i, line) in lines {
            if line == "index\tword" || line.is_empty() {
                continue;
            }
            let (idx, word) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse("vocabulary", i + 1, "expected index\\tword"))?;
            if idx.parse::<usize>().ok() != Some(words.len()) {
                return Err(Error::parse("vocabulary", i + 1, "indices must be dense"));
            }
            words.push(word.to_string());
        }
        let vocab = Vocabulary::from_words(words.clone())?;
        if vocab.words != words {
            return Err(Error::parse(
                "vocabulary",
                0,
                "words must be sorted and unique",
            ));
        }
        Ok(vocab)
    }
}

/// Vocabulary of tokenized documents from both corpora.
pub fn build_vocabulary<'a, I>(documents: I) -> Result<Vocabulary>
where
    I: IntoIterator<Item = &'a [String]>,
{
    Vocabulary::from_words(documents.into_iter().flatten().cloned())
}

/// One lexicon feature row per vocabulary word.
#[derive(Debug, Clone, PartialEq)]
pub struct WordFeatureMatrix {
    vocabulary: Vocabulary,
    degree: Option<usize>,
    cols: usize,
    data: Vec<f64>,
}

impl WordFeatureMatrix {
    /// `degree = None` keeps the raw 25 features; `Some(p)` expands each block.
    pub fn build(vocabulary: Vocabulary, lexicons: &LexiconSet, degree: Option<usize>) -> Self {
        let widths = block_widths();
        let cols = expanded_width(degree);
        let mut data = Vec::with_capacity(vocabulary.len() * cols);
        for word in vocabulary.words() {
            let raw = word_features(word, lexicons);
            match degree {
                None => data.extend(raw),
                Some(p) => data.extend(expand_blocks(&raw, &widths, p)),
            }
        }
        WordFeatureMatrix {
            vocabulary,
            degree,
            cols,
            data,
        }
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn degree(&self) -> Option<usize> {
        self.degree
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.data[index * self.cols..(index + 1) * self.cols]
    }

    pub fn lookup(&self, word: &str) -> Option<&[f64]> {
        self.vocabulary.index_of(word).map(|i| self.row(i))
    }

    pub fn to_tsv(&self) -> String {
        let degree = self.degree.map_or("none".to_string(), |p| p.to_string());
        let mut out = format!("{FEATURES_HEADER} cols={} degree={degree}\n", self.cols);
        for (i, w) in self.vocabulary.words().iter().enumerate() {
            out.push_str(w);
            for v in self.row(i) {
                out.push_str(&format!("\t{v}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let header = lines
            .next()
            .map(|(_, l)| l)
            .and_then(|l| l.strip_prefix(FEATURES_HEADER))
            .ok_or_else(|| Error::parse("word-features", 1, "missing version header"))?;
        let mut cols = None;
        let mut degree = None;
        for item in header.split_whitespace() {
            match item.split_once('=') {
                Some(("cols", v)) => cols = v.parse::<usize>().ok(),
                Some(("degree", "none")) => degree = Some(None),
                Some(("degree", v)) => degree = v.parse::<usize>().ok().map(Some),
                _ => return Err(Error::parse("word-features", 1, "bad header field")),
            }
        }
        let (Some(cols), Some(degree)) = (cols, degree) else {
            return Err(Error::parse(
                "word-features",
                1,
                "header needs cols and degree",
            ));
        };
        if degree.is_some_and(|p| p > 16) || cols != expanded_width(degree) {
            return Err(Error::parse(
                "word-features",
                1,
                "cols disagree with degree",
            ));
        }
        let mut words = Vec::new();
        let mut data = Vec::new();
        for (i, line) in lines {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != cols + 1 {
                return Err(Error::parse("word-features", i + 1, "wrong column count"));
            }
            words.push(fields[0].to_string());
            for f in &fields[1..] {
                let v: f64 = f
                    .parse()
                    .map_err(|_| Error::parse("word-features", i + 1, "non-numeric value"))?;
                data.push(v);
            }
        }
        let vocabulary = Vocabulary::from_words(words.clone())?;
        if vocabulary.words() != words.as_slice() {
            return Err(Error::parse(
                "word-features",
                0,
                "words must be sorted and unique",
            ));
        }
        Ok(WordFeatureMatrix {
            vocabulary,
            degree,
            cols,
            data,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set_with(name: &str, content: &str) -> LexiconSet {
        let tables = LEXICON_SCHEMAS
            .iter()
            .map(|s| {
                if s.name == name {
                    parse_lexicon_bytes(content.as_bytes(), name, *s).unwrap()
                } else {
                    LexiconTable::empty(*s)
                }
            })
            .collect();
        LexiconSet::new(tables).unwrap()
    }

    #[test]
    fn parse_single_value_row() {
        let t = parse_lexicon_bytes(
            b"# comment\nabandon\t0.4\n",
            "t",
            LexiconSchema::by_name("nrc-emo-int").unwrap(),
        )
        .unwrap();
        assert_eq!(t.get("abandon"), Some(&[0.4][..]));
    }

    #[test]
    fn nominal_rows_are_zero_one() {
        let schema = LexiconSchema::by_name("nrc-emo-lex").unwrap();
        let t = parse_lexicon_bytes(b"abandon\t1\ncalm\t0\n", "t", schema).unwrap();
        assert_eq!(t.get("abandon"), Some(&[1.0][..]));
        assert_eq!(t.get("calm"), Some(&[0.0][..]));
        assert!(parse_lexicon_bytes(b"calm\t0.5\n", "t", schema).is_err());
    }

    #[test]
    fn wrong_column_count_names_line() {
        let schema = LexiconSchema::by_name("depechemood").unwrap();
        let err = parse_lexicon_bytes(b"ok\t1\t1\t1\t1\t1\t1\t1\t1\nbad\t1\t2\t3\n", "dm", schema)
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn unknown_schema_and_non_numeric() {
        assert!(LexiconSchema::by_name("vader").is_err());
        let schema = LexiconSchema::by_name("nrc-emo-int").unwrap();
        assert!(parse_lexicon_bytes(b"word\tabc\n", "t", schema).is_err());
    }

    #[test]
    fn duplicates_last_wins() {
        let schema = LexiconSchema::by_name("nrc-emo-int").unwrap();
        let t = parse_lexicon_bytes(b"Rain\t0.1\nrain\t0.7\n", "t", schema).unwrap();
        assert_eq!(t.get("rain"), Some(&[0.7][..]));
        assert_eq!(t.duplicates, 1);
    }

    #[test]
    fn vocabulary_is_sorted_union() {
        let docs: Vec<Vec<String>> = ["rain rain go", "go away"]
            .iter()
            .map(|d| crate::corpus::tokenize(d))
            .collect();
        let v = build_vocabulary(docs.iter().map(Vec::as_slice)).unwrap();
        assert_eq!(v.words(), ["away", "go", "rain"]);
        let again = build_vocabulary(docs.iter().map(Vec::as_slice)).unwrap();
        assert_eq!(v, again);
        assert_eq!(Vocabulary::parse_tsv(&v.to_tsv()).unwrap(), v);
        assert!(build_vocabulary(std::iter::empty()).is_err());
    }

    #[test]
    fn word_features_layout() {
        let set = set_with("depechemood", "joyful\t1\t2\t3\t4\t5\t6\t7\t8\n");
        assert_eq!(raw_width(), 25);
        assert_eq!(word_features("nothing", &set), vec![0.0; 25]);
        let v = word_features("joyful", &set);
        assert_eq!(&v[..17], &[0.0; 17]);
        assert_eq!(&v[17..], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
    }

    #[test]
    fn expansion_examples() {
        assert_eq!(poly_expand(&[2.0], 3), vec![1.0, 2.0, 4.0, 8.0]);
        assert_eq!(
            poly_expand(&[2.0, 3.0], 2),
            vec![1.0, 2.0, 3.0, 4.0, 6.0, 9.0]
        );
        let sizes: Vec<usize> = block_widths()
            .iter()
            .map(|w| poly_expand(&vec![0.5; *w], 3).len())
            .collect();
        assert_eq!(sizes, [4, 10, 4, 4, 20, 20, 20, 20, 165]);
        assert_eq!(expanded_width(Some(3)), 267);
    }

    #[test]
    fn zero_block_expands_to_constant_basis() {
        let e = poly_expand(&[0.0; 3], 3);
        assert_eq!(e[0], 1.0);
        assert!(e[1..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn matrix_round_trips_through_tsv() {
        let set = set_with("sentiwordnet", "rain\t0.25\t0.5\n");
        let vocab = Vocabulary::from_words(["rain".to_string(), "go".to_string()]).unwrap();
        for degree in [None, Some(3)] {
            let m = WordFeatureMatrix::build(vocab.clone(), &set, degree);
            assert_eq!(m.cols(), expanded_width(degree));
            let back = WordFeatureMatrix::parse_tsv(&m.to_tsv()).unwrap();
            assert_eq!(back, m);
        }
        let raw = WordFeatureMatrix::build(vocab, &set, None);
        assert_eq!(raw.lookup("go").unwrap(), &[0.0; 25][..]);
        assert_eq!(&raw.lookup("rain").unwrap()[1..3], &[0.25, 0.5]);
    }
}
