//! Output files: `summary.csv`, `verdicts.json`, `plots/*.svg` and
//! `trajectories/*.csv`.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::run::{fmt_num, RunResult, Trend, Verdict};
use crate::svg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Style {
    Line,
    Points,
    Steps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub style: Style,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn line(label: &str, points: Vec<(f64, f64)>) -> Self {
        Series { label: label.into(), style: Style::Line, points }
    }

    pub fn points(label: &str, points: Vec<(f64, f64)>) -> Self {
        Series { label: label.into(), style: Style::Points, points }
    }

    pub fn steps(label: &str, points: Vec<(f64, f64)>) -> Self {
        Series { label: label.into(), style: Style::Steps, points }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Figure {
    pub name: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

impl Figure {
    pub fn new(name: &str, title: &str, x_label: &str, y_label: &str) -> Self {
        Figure { name: name.into(), title: title.into(), x_label: x_label.into(), y_label: y_label.into(), series: vec![] }
    }

    pub fn with(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }
}

/// A CSV file under `trajectories/`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Formats {
    pub csv: bool,
    pub json: bool,
    pub svg: bool,
}

impl Formats {
    pub const ALL: Formats = Formats { csv: true, json: true, svg: true };

    pub fn parse(text: &str) -> Result<Self> {
        let mut f = Formats { csv: false, json: false, svg: false };
        for part in text.split(',').map(str::trim) {
            match part {
                "csv" => f.csv = true,
                "json" => f.json = true,
                "svg" => f.svg = true,
                other => anyhow::bail!("unknown format {other:?}; expected csv, json or svg"),
            }
        }
        Ok(f)
    }
}

/// Contents of `verdicts.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictFile {
    pub all_pass: bool,
    pub errors: Vec<String>,
    pub verdicts: Vec<Verdict>,
    pub trends: Vec<Trend>,
}

impl VerdictFile {
    pub fn from_result(result: &RunResult) -> Self {
        VerdictFile {
            all_pass: result.all_pass(),
            errors: result.error.iter().cloned().collect(),
            verdicts: result.verdicts.clone(),
            trends: result.trends.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("verdicts serialize");
        s.push('\n');
        s
    }
}

pub fn summary_csv(result: &RunResult) -> String {
    let mut out = String::from("scenario,n,replica,quantity,value\n");
    for r in &result.rows {
        out.push_str(&format!("{},{},{},{},{}\n", r.scenario, r.n, r.replica, r.quantity, fmt_num(r.value)));
    }
    out
}

pub fn table_csv(t: &Table) -> String {
    let mut out = t.header.join(",");
    out.push('\n');
    for r in &t.rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

fn write(path: &Path, contents: &str) -> Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(contents.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

/// Writes the requested formats under `dir`. The full result is also kept as
/// `result.json` so that `report` can re-render it later.
pub fn emit_report(result: &RunResult, dir: &Path, formats: Formats) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    if formats.csv {
        write(&dir.join("summary.csv"), &summary_csv(result))?;
        if !result.tables.is_empty() {
            let tdir = dir.join("trajectories");
            fs::create_dir_all(&tdir)?;
            for t in &result.tables {
                write(&tdir.join(format!("{}.csv", t.name)), &table_csv(t))?;
            }
        }
    }
    if formats.json {
        write(&dir.join("verdicts.json"), &VerdictFile::from_result(result).to_json())?;
        write(&dir.join("result.json"), &serde_json::to_string(result)?)?;
    }
    if formats.svg && !result.figures.is_empty() {
        let pdir = dir.join("plots");
        fs::create_dir_all(&pdir)?;
        for fig in &result.figures {
            write(&pdir.join(format!("{}.svg", fig.name)), &svg::render(fig))?;
        }
    }
    Ok(())
}

pub fn load_result(path: &Path) -> Result<RunResult> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// One line per verdict.
pub fn verdict_lines(result: &RunResult) -> Vec<String> {
    result
        .verdicts
        .iter()
        .map(|v| {
            let metrics: Vec<String> = v.metrics.iter().map(|(k, x)| format!("{k}={x:.4}")).collect();
            format!(
                "{} {}{} [{}] {}",
                if v.pass { "PASS" } else { "FAIL" },
                v.criterion.map(|c| format!("criterion {c} ")).unwrap_or_default(),
                v.scenario,
                v.check,
                metrics.join(" ")
            )
        })
        .collect()
}
