//! Dynamics traces and their CSV / SVG renderings.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::corpus::Emotion;
use crate::error::{Error, Result};

pub const PANEL_WIDTH: f64 = 800.0;
pub const PANEL_HEIGHT: f64 = 300.0;

pub const CSV_HEADER: &str = "song,emotion,verse_idx,series,value";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotFormat {
    Csv,
    Svg,
}

impl FromStr for PlotFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(PlotFormat::Csv),
            "svg" => Ok(PlotFormat::Svg),
            _ => Err(Error::Invalid(format!("unknown plot format `{s}`"))),
        }
    }
}

impl fmt::Display for PlotFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlotFormat::Csv => "csv",
            PlotFormat::Svg => "svg",
        })
    }
}

/// One song × emotion: every series has one value per verse.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsTrace {
    pub song_id: String,
    pub emotion: Emotion,
    pub verse_ids: Vec<String>,
    pub gold: Option<Vec<f64>>,
    pub verse: Vec<f64>,
    pub ssm_mean: Vec<f64>,
    pub ssm_std: Vec<f64>,
}

impl DynamicsTrace {
    pub fn len(&self) -> usize {
        self.verse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verse.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.verse_ids.len();
        let gold_ok = self.gold.as_ref().is_none_or(|g| g.len() == n);
        if !gold_ok || self.verse.len() != n || self.ssm_mean.len() != n || self.ssm_std.len() != n
        {
            return Err(Error::Dimension(format!(
                "trace {}/{} has series of unequal length",
                self.song_id, self.emotion
            )));
        }
        if n == 0 {
            return Err(Error::Empty(format!(
                "trace {}/{} has no verses",
                self.song_id, self.emotion
            )));
        }
        Ok(())
    }

    fn series(&self) -> Vec<(&'static str, Vec<f64>)> {
        let mut out = Vec::with_capacity(5);
        if let Some(g) = &self.gold {
            out.push(("gold", g.clone()));
        }
        out.push(("verse", self.verse.clone()));
        out.push(("ssm", self.ssm_mean.clone()));
        let band = |sign: f64| {
            self.ssm_mean
                .iter()
                .zip(&self.ssm_std)
                .map(|(m, s)| m + sign * s)
                .collect()
        };
        out.push(("ssm_lower", band(-1.0)));
        out.push(("ssm_upper", band(1.0)));
        out
    }
}

fn check_traces(traces: &[DynamicsTrace]) -> Result<()> {
    if traces.is_empty() {
        return Err(Error::Empty("no dynamics to plot".into()));
    }
    traces.iter().try_for_each(DynamicsTrace::validate)
}

/// Long format, one row per (trace, verse, series).
pub fn plot_csv(traces: &[DynamicsTrace]) -> Result<String> {
    check_traces(traces)?;
    let mut out = format!("{CSV_HEADER}\n");
    for t in traces {
        for (name, values) in t.series() {
            for (i, v) in values.iter().enumerate() {
                let _ = writeln!(out, "{},{},{i},{name},{v}", t.song_id, t.emotion);
            }
        }
    }
    Ok(out)
}

/// Rebuilds traces from [`plot_csv`] output. Verse ids are not part of the
/// long format and come back as `"<index>"`.
pub fn parse_dynamics_csv(text: &str, source_name: &str) -> Result<Vec<DynamicsTrace>> {
    type Key = (String, Emotion);
    let mut order: Vec<Key> = Vec::new();
    let mut data: BTreeMap<Key, BTreeMap<String, Vec<Option<f64>>>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.is_empty() || (i == 0 && line == CSV_HEADER) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::parse(source_name, lineno, "expected 5 columns"));
        }
        let emotion: Emotion = fields[1]
            .parse()
            .map_err(|_| Error::parse(source_name, lineno, "unknown emotion"))?;
        let idx: usize = fields[2]
            .parse()
            .map_err(|_| Error::parse(source_name, lineno, "bad verse_idx"))?;
        if idx > 100_000 {
            return Err(Error::parse(source_name, lineno, "verse_idx too large"));
        }
        let series = fields[3];
        if !matches!(series, "gold" | "verse" | "ssm" | "ssm_lower" | "ssm_upper") {
            return Err(Error::parse(
                source_name,
                lineno,
                format!("unknown series `{series}`"),
            ));
        }
        let value: f64 = fields[4]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| Error::parse(source_name, lineno, "bad value"))?;
        let key = (fields[0].to_string(), emotion);
        if !data.contains_key(&key) {
            order.push(key.clone());
        }
        let column = data
            .entry(key)
            .or_default()
            .entry(series.to_string())
            .or_default();
        if column.len() <= idx {
            column.resize(idx + 1, None);
        }
        if column[idx].replace(value).is_some() {
            return Err(Error::parse(source_name, lineno, "duplicate row"));
        }
    }
    let mut traces = Vec::with_capacity(order.len());
    for key in order {
        let mut cols = data.remove(&key).unwrap_or_default();
        let label = format!("{}/{}", key.0, key.1);
        let mut take = |name: &str| -> Result<Option<Vec<f64>>> {
            cols.remove(name)
                .map(|c| {
                    c.into_iter()
                        .collect::<Option<Vec<f64>>>()
                        .ok_or_else(|| Error::Invalid(format!("{label}: gap in series {name}")))
                })
                .transpose()
        };
        let missing = |name: &str| Error::Invalid(format!("{label}: missing series {name}"));
        let gold = take("gold")?;
        let verse = take("verse")?.ok_or_else(|| missing("verse"))?;
        let ssm_mean = take("ssm")?.ok_or_else(|| missing("ssm"))?;
        let upper = take("ssm_upper")?.ok_or_else(|| missing("ssm_upper"))?;
        take("ssm_lower")?;
        let ssm_std = upper
            .iter()
            .zip(&ssm_mean)
            .map(|(u, m)| (u - m).max(0.0))
            .collect();
        let trace = DynamicsTrace {
            song_id: key.0,
            emotion: key.1,
            verse_ids: (0..verse.len()).map(|i| i.to_string()).collect(),
            gold,
            verse,
            ssm_mean,
            ssm_std,
        };
        trace.validate()?;
        traces.push(trace);
    }
    Ok(traces)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// One 800×300 panel per trace, stacked vertically.
pub fn plot_svg(traces: &[DynamicsTrace]) -> Result<String> {
    check_traces(traces)?;
    let (left, right, top, bottom) = (50.0, 150.0, 30.0, 30.0);
    let plot_w = PANEL_WIDTH - left - right;
    let plot_h = PANEL_HEIGHT - top - bottom;
    let total_h = PANEL_HEIGHT * traces.len() as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PANEL_WIDTH}" height="{total_h}" viewBox="0 0 {PANEL_WIDTH} {total_h}" font-family="sans-serif" font-size="12">"#
    );
    for (pi, t) in traces.iter().enumerate() {
        let series = t.series();
        let (lo, hi) = series
            .iter()
            .flat_map(|(_, v)| v.iter())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(*v), hi.max(*v))
            });
        let (lo, hi) = if hi - lo < 1e-12 {
            (lo - 1.0, hi + 1.0)
        } else {
            (lo, hi)
        };
        let n = t.len();
        let x = |i: usize| {
            if n == 1 {
                left + plot_w / 2.0
            } else {
                left + plot_w * i as f64 / (n - 1) as f64
            }
        };
        let y = |v: f64| top + plot_h * (hi - v) / (hi - lo);
        let points = |vals: &[f64]| {
            vals.iter()
                .enumerate()
                .map(|(i, v)| format!("{:.2},{:.2}", x(i), y(*v)))
                .collect::<Vec<_>>()
                .join(" ")
        };

        let _ = writeln!(
            svg,
            r#"<g transform="translate(0,{})">"#,
            PANEL_HEIGHT * pi as f64
        );
        let _ = writeln!(
            svg,
            r#"<text x="{left}" y="18">{} / {}</text>"#,
            xml_escape(&t.song_id),
            t.emotion
        );
        let _ = writeln!(
            svg,
            r##"<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#999"/>"##
        );
        let _ = writeln!(
            svg,
            r#"<text x="4" y="{:.2}">{hi:.2}</text><text x="4" y="{:.2}">{lo:.2}</text>"#,
            top + 4.0,
            top + plot_h
        );

        let lower: Vec<f64> = t
            .ssm_mean
            .iter()
            .zip(&t.ssm_std)
            .map(|(m, s)| m - s)
            .collect();
        let upper: Vec<f64> = t
            .ssm_mean
            .iter()
            .zip(&t.ssm_std)
            .map(|(m, s)| m + s)
            .collect();
        let mut band: Vec<String> = upper
            .iter()
            .enumerate()
            .map(|(i, v)| format!("{:.2},{:.2}", x(i), y(*v)))
            .collect();
        band.extend(
            lower
                .iter()
                .enumerate()
                .rev()
                .map(|(i, v)| format!("{:.2},{:.2}", x(i), y(*v))),
        );
        let _ = writeln!(
            svg,
            r##"<polygon class="band" points="{}" fill="#d62728" fill-opacity="0.15" stroke="none"/>"##,
            band.join(" ")
        );
        let mut legend = vec![("±1σ", "#d62728", "band")];
        if let Some(g) = &t.gold {
            let _ = writeln!(
                svg,
                r##"<polyline class="gold" points="{}" fill="none" stroke="#000" stroke-width="2"/>"##,
                points(g)
            );
            legend.push(("gold", "#000", "gold"));
        }
        let _ = writeln!(
            svg,
            r##"<polyline class="verse" points="{}" fill="none" stroke="#1f77b4" stroke-dasharray="4 3"/>"##,
            points(&t.verse)
        );
        let _ = writeln!(
            svg,
            r##"<polyline class="ssm" points="{}" fill="none" stroke="#d62728" stroke-width="2"/>"##,
            points(&t.ssm_mean)
        );
        legend.push(("verse-level", "#1f77b4", "verse"));
        legend.push(("SSM", "#d62728", "ssm"));
        for (li, (label, color, _)) in legend.iter().enumerate() {
            let ly = top + 16.0 * li as f64 + 8.0;
            let lx = PANEL_WIDTH - right + 15.0;
            let _ = writeln!(
                svg,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/><text x="{}" y="{}">{label}</text>"#,
                lx + 20.0,
                lx + 26.0,
                ly + 4.0
            );
        }
        svg.push_str("</g>\n");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Renders `traces` and writes them to `path`.
pub fn emit_plot(traces: &[DynamicsTrace], format: PlotFormat, path: &Path) -> Result<()> {
    let body = match format {
        PlotFormat::Csv => plot_csv(traces)?,
        PlotFormat::Svg => plot_svg(traces)?,
    };
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(gold: Option<Vec<f64>>) -> DynamicsTrace {
        DynamicsTrace {
            song_id: "s1".into(),
            emotion: Emotion::Anger,
            verse_ids: vec!["a".into(), "b".into(), "c".into()],
            gold,
            verse: vec![1.0, 2.0, 3.0],
            ssm_mean: vec![1.5, 2.0, 2.5],
            ssm_std: vec![0.5, 0.4, 0.5],
        }
    }

    #[test]
    fn csv_rows_per_series() {
        let csv = plot_csv(&[trace(Some(vec![1.0, 1.0, 2.0]))]).unwrap();
        assert_eq!(csv.lines().count(), 1 + 3 * 5);
        let csv = plot_csv(&[trace(None)]).unwrap();
        assert_eq!(csv.lines().count(), 1 + 3 * 4);
        assert!(csv.contains("s1,anger,0,ssm_upper,2\n"));
    }

    #[test]
    fn csv_round_trip() {
        let t = trace(Some(vec![1.0, 1.0, 2.0]));
        let back = parse_dynamics_csv(&plot_csv(std::slice::from_ref(&t)).unwrap(), "d").unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].gold, t.gold);
        assert_eq!(back[0].ssm_mean, t.ssm_mean);
        for (a, b) in back[0].ssm_std.iter().zip(&t.ssm_std) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn overlapping_gold_and_ssm() {
        let mut t = trace(None);
        t.gold = Some(t.ssm_mean.clone());
        let svg = plot_svg(&[t]).unwrap();
        let line = |class: &str| {
            svg.lines()
                .find(|l| l.contains(&format!(r#"class="{class}""#)))
                .unwrap()
                .split("points=")
                .nth(1)
                .unwrap()
                .split(' ')
                .next()
                .unwrap()
                .to_string()
        };
        assert_eq!(line("gold"), line("ssm"));
        assert!(svg.contains(r#"width="800""#) && svg.contains(r#"height="300""#));
    }

    #[test]
    fn empty_and_ragged_rejected() {
        assert!(matches!(plot_csv(&[]), Err(Error::Empty(_))));
        let mut t = trace(None);
        t.ssm_std.pop();
        assert!(plot_svg(&[t]).is_err());
        assert!(emit_plot(
            &[trace(None)],
            PlotFormat::Csv,
            Path::new("/nonexistent/dir/x.csv")
        )
        .is_err());
    }
}
