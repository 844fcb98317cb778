//! Source (sentence-level) and target (song-level) datasets.
//!
//! Headlines TSV, one record per line:
//! `id \t text \t anger \t disgust \t fear \t joy \t sadness \t surprise \t valence`
//! with emotion scores in [0, 100] and valence in [−100, 100]. An optional
//! header line whose first field is `id` and `#` comment lines are skipped.
//!
//! Songs JSONL, one song per line:
//! `{"song_id": "s1", "verses": [{"verse_id": "s1v1", "text": "...", "gold": {...}}]}`
//! where `gold` is optional and carries the six emotion keys in [0, 10].

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SOURCE_SCORE_MAX: f64 = 100.0;
pub const GOLD_SCORE_MAX: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Anger,
    Disgust,
    Fear,
    Joy,
    Sadness,
    Surprise,
}

impl Emotion {
    pub const ALL: [Emotion; 6] = [
        Emotion::Anger,
        Emotion::Disgust,
        Emotion::Fear,
        Emotion::Joy,
        Emotion::Sadness,
        Emotion::Surprise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Anger => "anger",
            Emotion::Disgust => "disgust",
            Emotion::Fear => "fear",
            Emotion::Joy => "joy",
            Emotion::Sadness => "sadness",
            Emotion::Surprise => "surprise",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Emotion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Emotion::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Invalid(format!("unknown emotion `{s}`")))
    }
}

/// Six intensities in fixed key order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmotionScores {
    pub anger: f64,
    pub disgust: f64,
    pub fear: f64,
    pub joy: f64,
    pub sadness: f64,
    pub surprise: f64,
}

impl EmotionScores {
    pub fn from_array(v: [f64; 6]) -> Self {
        EmotionScores {
            anger: v[0],
            disgust: v[1],
            fear: v[2],
            joy: v[3],
            sadness: v[4],
            surprise: v[5],
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.anger,
            self.disgust,
            self.fear,
            self.joy,
            self.sadness,
            self.surprise,
        ]
    }

    pub fn get(&self, e: Emotion) -> f64 {
        self.to_array()[e.index()]
    }

    /// Index of the first value outside `[lo, hi]` (or non-finite).
    fn out_of_range(&self, lo: f64, hi: f64) -> Option<(usize, f64)> {
        self.to_array()
            .into_iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && *v >= lo && *v <= hi))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceRecord {
    pub id: String,
    pub text: String,
    /// [0, 100]
    pub scores: EmotionScores,
    /// [−100, 100]; parsed for validation only.
    pub valence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Verse {
    pub verse_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<EmotionScores>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SongSequence {
    pub song_id: String,
    pub verses: Vec<Verse>,
}

impl SongSequence {
    pub fn has_gold(&self) -> bool {
        self.verses.first().is_some_and(|v| v.gold.is_some())
    }

    /// Gold series for one emotion, if the song is annotated.
    pub fn gold_series(&self, e: Emotion) -> Option<Vec<f64>> {
        self.verses
            .iter()
            .map(|v| v.gold.map(|g| g.get(e)))
            .collect()
    }

    fn validate(&self, source_name: &str, line: usize) -> Result<()> {
        if self.verses.is_empty() {
            return Err(Error::parse(
                source_name,
                line,
                format!("song {} has no verses", self.song_id),
            ));
        }
        let annotated = self.verses.iter().filter(|v| v.gold.is_some()).count();
        if annotated != 0 && annotated != self.verses.len() {
            return Err(Error::parse(
                source_name,
                line,
                format!(
                    "song {} has gold on {annotated} of {} verses; expected all or none",
                    self.song_id,
                    self.verses.len()
                ),
            ));
        }
        for (i, v) in self.verses.iter().enumerate() {
            if let Some((col, value)) = v.gold.and_then(|g| g.out_of_range(0.0, GOLD_SCORE_MAX)) {
                return Err(Error::parse(
                    source_name,
                    line,
                    format!(
                        "verse {} ({}) gold {} = {value} outside [0, {GOLD_SCORE_MAX}]",
                        i + 1,
                        v.verse_id,
                        Emotion::ALL[col]
                    ),
                ));
            }
        }
        Ok(())
    }
}

fn lines<'a>(
    bytes: &'a [u8],
    source_name: &'a str,
) -> impl Iterator<Item = Result<(usize, String)>> + 'a {
    let name = source_name.to_string();
    bytes
        .split(|b| *b == b'\n')
        .enumerate()
        .map(move |(i, raw)| {
            let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
            std::str::from_utf8(raw)
                .map(|s| (i + 1, s.to_string()))
                .map_err(|_| Error::parse(&name, i + 1, "invalid UTF-8"))
        })
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Parses headlines TSV content.
pub fn parse_headlines(bytes: &[u8], source_name: &str) -> Result<Vec<SourceRecord>> {
    let mut out = Vec::new();
    for item in lines(bytes, source_name) {
        let (lineno, line) = item?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if out.is_empty() && fields[0] == "id" {
            continue;
        }
        if fields.len() != 9 {
            return Err(Error::parse(
                source_name,
                lineno,
                format!("expected 9 tab-separated columns, found {}", fields.len()),
            ));
        }
        let text = fields[1].trim();
        if text.is_empty() {
            return Err(Error::parse(source_name, lineno, "empty text"));
        }
        let mut values = [0.0; 7];
        for (k, field) in fields[2..].iter().enumerate() {
            let column = k + 3;
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::parse(
                    source_name,
                    lineno,
                    format!("column {column}: `{field}` is not a number"),
                )
            })?;
            let (lo, hi) = if k < 6 {
                (0.0, SOURCE_SCORE_MAX)
            } else {
                (-SOURCE_SCORE_MAX, SOURCE_SCORE_MAX)
            };
            if !(v.is_finite() && v >= lo && v <= hi) {
                return Err(Error::Range {
                    source_name: source_name.to_string(),
                    line: lineno,
                    column,
                    value: v,
                    lo,
                    hi,
                });
            }
            values[k] = v;
        }
        out.push(SourceRecord {
            id: fields[0].to_string(),
            text: text.to_string(),
            scores: EmotionScores::from_array(values[..6].try_into().unwrap()),
            valence: values[6],
        });
    }
    Ok(out)
}

pub fn load_headlines(path: &Path) -> Result<Vec<SourceRecord>> {
    let records = parse_headlines(&read_file(path)?, &path.display().to_string())?;
    log::info!("{}: {} source records", path.display(), records.len());
    Ok(records)
}

/// Serializes records back to canonical TSV (with header).
pub fn write_headlines(records: &[SourceRecord]) -> String {
    let mut out = String::from("id\ttext\tanger\tdisgust\tfear\tjoy\tsadness\tsurprise\tvalence\n");
    for r in records {
        out.push_str(&r.id);
        out.push('\t');
        out.push_str(&r.text);
        for v in r.scores.to_array() {
            out.push_str(&format!("\t{v}"));
        }
        out.push_str(&format!("\t{}\n", r.valence));
    }
    out
}

/// Parses songs JSONL content.
pub fn parse_songs(bytes: &[u8], source_name: &str) -> Result<Vec<SongSequence>> {
    let mut out = Vec::new();
    for item in lines(bytes, source_name) {
        let (lineno, line) = item?;
        if line.trim().is_empty() {
            continue;
        }
        let song: SongSequence = serde_json::from_str(&line)
            .map_err(|e| Error::parse(source_name, lineno, format!("malformed song: {e}")))?;
        song.validate(source_name, lineno)?;
        out.push(song);
    }
    Ok(out)
}

pub fn load_songs(path: &Path) -> Result<Vec<SongSequence>> {
    let songs = parse_songs(&read_file(path)?, &path.display().to_string())?;
    let verses: usize = songs.iter().map(|s| s.verses.len()).sum();
    log::info!("{}: {} songs, {verses} verses", path.display(), songs.len());
    Ok(songs)
}

pub fn write_songs(songs: &[SongSequence]) -> String {
    let mut out = String::new();
    for s in songs {
        out.push_str(&serde_json::to_string(s).expect("song serializes"));
        out.push('\n');
    }
    out
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Lowercases and splits on anything that is not alphanumeric, keeping
/// apostrophes that sit between two alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else if is_apostrophe(c)
            && !current.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric())
        {
            current.push('\'');
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}
