//! Pipeline configuration: `key = value` files plus programmatic overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::plot::PlotFormat;
use crate::ssm::{ParamSubset, SsmParams};
use crate::verse_model::DEFAULT_LAMBDAS;

/// Largest accepted polynomial degree. The 8-wide block already expands to
/// 1287 monomials at degree 5.
pub const MAX_POLY_DEGREE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Filter,
    Smoother,
    FilterEm,
    SmootherEm,
    VerseOnly,
}

impl Mode {
    pub fn uses_ssm(self) -> bool {
        self != Mode::VerseOnly
    }

    pub fn uses_em(self) -> bool {
        matches!(self, Mode::FilterEm | Mode::SmootherEm)
    }

    pub fn smooths(self) -> bool {
        matches!(self, Mode::Smoother | Mode::SmootherEm)
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "filter" => Ok(Mode::Filter),
            "smoother" => Ok(Mode::Smoother),
            "filter-em" => Ok(Mode::FilterEm),
            "smoother-em" => Ok(Mode::SmootherEm),
            "verse-only" => Ok(Mode::VerseOnly),
            _ => Err(Error::Invalid(format!(
                "unknown mode `{s}` (filter, smoother, filter-em, smoother-em, verse-only)"
            ))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Filter => "filter",
            Mode::Smoother => "smoother",
            Mode::FilterEm => "filter-em",
            Mode::SmootherEm => "smoother-em",
            Mode::VerseOnly => "verse-only",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub lexicon_dir: PathBuf,
    pub source: PathBuf,
    pub songs: PathBuf,
    pub output_dir: PathBuf,
    /// `None` keeps the raw 25-dimensional word vectors.
    pub poly_degree: Option<usize>,
    pub a: f64,
    pub c: f64,
    pub q: f64,
    pub r: f64,
    pub n_iter: usize,
    pub mode: Mode,
    /// Song-level folds for EM.
    pub k: usize,
    pub seed: u64,
    pub em_params: ParamSubset,
    pub lambdas: Vec<f64>,
    pub ridge_folds: usize,
    pub plot: Option<PlotFormat>,
    pub per_song: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            lexicon_dir: PathBuf::new(),
            source: PathBuf::new(),
            songs: PathBuf::new(),
            output_dir: PathBuf::from("out"),
            poly_degree: Some(3),
            a: 1.0,
            c: 1.0,
            q: 1.0,
            r: 5.0,
            n_iter: 10,
            mode: Mode::SmootherEm,
            k: 10,
            seed: 0,
            em_params: ParamSubset::default(),
            lambdas: DEFAULT_LAMBDAS.to_vec(),
            ridge_folds: 10,
            plot: None,
            per_song: false,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Invalid(format!("{key}: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Invalid(format!(
            "{key}: expected true or false, got `{value}`"
        ))),
    }
}

impl PipelineConfig {
    /// Sets one key. Keys are the file keys; `A`, `C`, `Q`, `R` are case-insensitive.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "lexicon_dir" => self.lexicon_dir = PathBuf::from(value),
            "source" => self.source = PathBuf::from(value),
            "songs" => self.songs = PathBuf::from(value),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "poly_degree" => {
                self.poly_degree = match value {
                    "none" | "0" => None,
                    v => Some(parse_num(key, v)?),
                }
            }
            "A" | "a" => self.a = parse_num(key, value)?,
            "C" | "c" => self.c = parse_num(key, value)?,
            "Q" | "q" => self.q = parse_num(key, value)?,
            "R" | "r" => self.r = parse_num(key, value)?,
            "n_iter" => self.n_iter = parse_num(key, value)?,
            "mode" => self.mode = value.parse()?,
            "k" => self.k = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "em_params" => self.em_params = value.parse()?,
            "lambdas" => {
                self.lambdas = value
                    .split(',')
                    .map(|v| parse_num(key, v.trim()))
                    .collect::<Result<_>>()?
            }
            "ridge_folds" => self.ridge_folds = parse_num(key, value)?,
            "plot" => {
                self.plot = match value {
                    "none" | "" => None,
                    v => Some(v.parse()?),
                }
            }
            "per_song" => self.per_song = parse_bool(key, value)?,
            other => return Err(Error::Invalid(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. Blank lines and `#`
    /// comments are ignored; values may be wrapped in double quotes.
    pub fn apply_text(&mut self, text: &str, source_name: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(source_name, i + 1, "expected `key = value`"))?;
            let value = value.trim();
            let value = value
                .strip_prefix('"')
                .and_then(|v| v.strip_suffix('"'))
                .unwrap_or(value);
            self.set(key, value)
                .map_err(|e| Error::parse(source_name, i + 1, e.to_string()))?;
        }
        Ok(())
    }

    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut config = PipelineConfig::default();
        config.apply_text(text, source_name)?;
        Ok(config)
    }

    /// Reads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = crate::corpus::read_file(path)?;
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::parse(&path.display().to_string(), 0, "not UTF-8"))?;
        let mut config = PipelineConfig::parse(&text, &path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut config.lexicon_dir,
            &mut config.source,
            &mut config.songs,
            &mut config.output_dir,
        ] {
            if !p.as_os_str().is_empty() && p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn ssm_params(&self) -> Result<SsmParams> {
        SsmParams::scalar(self.a, self.c, self.q, self.r)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("lexicon_dir", &self.lexicon_dir),
            ("source", &self.source),
            ("songs", &self.songs),
            ("output_dir", &self.output_dir),
        ] {
            if p.as_os_str().is_empty() {
                return Err(Error::Invalid(format!("{name} is not set")));
            }
        }
        if self.poly_degree.is_some_and(|p| p > MAX_POLY_DEGREE) {
            return Err(Error::Invalid(format!(
                "poly_degree must be at most {MAX_POLY_DEGREE}"
            )));
        }
        self.ssm_params()?;
        if self.mode.uses_em() && self.k < 2 {
            return Err(Error::Invalid("k must be at least 2".into()));
        }
        if self.ridge_folds < 2 {
            return Err(Error::Invalid("ridge_folds must be at least 2".into()));
        }
        if self.lambdas.is_empty() || self.lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::Invalid(
                "lambdas must be a non-empty list of positive values".into(),
            ));
        }
        Ok(())
    }
}

/// A one-parameter sweep such as `A=0.5,1,2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub key: char,
    pub values: Vec<f64>,
}

impl FromStr for Sweep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (key, values) = s
            .split_once('=')
            .ok_or_else(|| Error::Invalid(format!("sweep `{s}` is not KEY=v1,v2,…")))?;
        let key = match key.trim() {
            "A" | "a" => 'A',
            "C" | "c" => 'C',
            "Q" | "q" => 'Q',
            "R" | "r" => 'R',
            other => return Err(Error::Invalid(format!("cannot sweep `{other}`"))),
        };
        let values: Vec<f64> = values
            .split(',')
            .map(|v| parse_num("sweep", v.trim()))
            .collect::<Result<_>>()?;
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("sweep needs finite values".into()));
        }
        Ok(Sweep { key, values })
    }
}

impl Sweep {
    /// One config per value, each writing to `<output_dir>/sweep-<K>=<v>`.
    pub fn configs(&self, base: &PipelineConfig) -> Result<Vec<PipelineConfig>> {
        self.values
            .iter()
            .map(|v| {
                let mut c = base.clone();
                c.set(&self.key.to_string(), &v.to_string())?;
                c.output_dir = base.output_dir.join(format!("sweep-{}={v}", self.key));
                Ok(c)
            })
            .collect()
    }
}
