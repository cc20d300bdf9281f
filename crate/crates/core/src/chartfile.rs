//! Reader and writer for the sectioned chart file format (see
//! `docs/chart_format.md`).

use crate::algebroid::{AlgebroidChart, BracketEntry};
use crate::error::{Error, Result};
use crate::metric::{MetricField, RiemannianAlgebroid};
use crate::scalar_field::ScalarField;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    None,
    Algebroid,
    Metric,
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::ChartFile {
        line,
        message: message.into(),
    }
}

fn parse_count(value: &str, line: usize, key: &str) -> Result<usize> {
    value
        .parse::<usize>()
        .ok()
        .filter(|&v| v > 0)
        .ok_or_else(|| err(line, format!("`{key}` must be a positive integer")))
}

/// Constant expression such as `pi - 0.1`.
fn parse_constant(text: &str, line: usize) -> Result<f64> {
    let f = ScalarField::parse(text.trim(), 0).map_err(|e| err(line, e.to_string()))?;
    f.as_constant()
        .ok_or_else(|| err(line, format!("`{}` is not a constant", text.trim())))
}

fn parse_expr(text: &str, n: usize, line: usize) -> Result<ScalarField> {
    ScalarField::parse(text.trim(), n).map_err(|e| err(line, e.to_string()))
}

fn parse_indices(text: &str, count: usize, line: usize) -> Result<Vec<usize>> {
    let idx: Vec<usize> = text
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| err(line, format!("bad index list `{}`", text.trim())))?;
    if idx.len() != count || idx.contains(&0) {
        return Err(err(line, format!("expected {count} indices counted from 1")));
    }
    Ok(idx.into_iter().map(|i| i - 1).collect())
}

/// Parses a chart file into a geometry.
pub fn parse(text: &str) -> Result<RiemannianAlgebroid> {
    let mut section = Section::None;
    let mut n = None;
    let mut r = None;
    let mut domain: Option<(usize, String)> = None;
    let mut anchor: Option<(usize, String)> = None;
    let mut brackets: Vec<(usize, String, String)> = Vec::new();
    let mut metric: Vec<(usize, String, String)> = Vec::new();
    let mut seen_metric = false;

    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with('[') {
            section = match content {
                "[algebroid]" => Section::Algebroid,
                "[metric]" => {
                    seen_metric = true;
                    Section::Metric
                }
                other => return Err(err(line, format!("unknown section {other}"))),
            };
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(line, "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim().to_string());
        match section {
            Section::None => return Err(err(line, "entry outside of a section")),
            Section::Algebroid => {
                if key == "n" {
                    n = Some(parse_count(&value, line, "n")?);
                } else if key == "r" {
                    r = Some(parse_count(&value, line, "r")?);
                } else if key == "domain" {
                    domain = Some((line, value));
                } else if key == "b" {
                    anchor = Some((line, value));
                } else if let Some(idx) = key.strip_prefix('C').filter(|s| s.starts_with(char::is_whitespace)) {
                    brackets.push((line, idx.to_string(), value));
                } else {
                    return Err(err(line, format!("unknown key `{key}` in [algebroid]")));
                }
            }
            Section::Metric => {
                if let Some(idx) = key.strip_prefix('g').filter(|s| s.starts_with(char::is_whitespace)) {
                    metric.push((line, idx.to_string(), value));
                } else {
                    return Err(err(line, format!("unknown key `{key}` in [metric]")));
                }
            }
        }
    }

    let last = text.lines().count().max(1);
    let n = n.ok_or_else(|| err(last, "missing `n`"))?;
    let r = r.ok_or_else(|| err(last, "missing `r`"))?;
    let (dline, dtext) = domain.ok_or_else(|| err(last, "missing `domain`"))?;
    let intervals: Vec<&str> = dtext.split(';').collect();
    if intervals.len() != n {
        return Err(err(dline, format!("domain needs {n} intervals, found {}", intervals.len())));
    }
    let mut dom = Vec::with_capacity(n);
    for iv in intervals {
        let (lo, hi) = iv
            .split_once(',')
            .ok_or_else(|| err(dline, format!("interval `{}` needs `lo, hi`", iv.trim())))?;
        let (lo, hi) = (parse_constant(lo, dline)?, parse_constant(hi, dline)?);
        if !(lo < hi) {
            return Err(err(dline, format!("empty interval [{lo}, {hi}]")));
        }
        dom.push((lo, hi));
    }

    let (bline, btext) = anchor.ok_or_else(|| err(last, "missing `b`"))?;
    let rows: Vec<&str> = btext.split(';').collect();
    if rows.len() != r {
        return Err(err(bline, format!("b needs {r} rows, found {}", rows.len())));
    }
    let mut b = Vec::with_capacity(r);
    for row in rows {
        let cells: Vec<&str> = row.split(',').collect();
        if cells.len() != n {
            return Err(err(bline, format!("b rows need {n} entries, found {}", cells.len())));
        }
        b.push(cells.iter().map(|c| parse_expr(c, n, bline)).collect::<Result<Vec<_>>>()?);
    }

    let mut entries = Vec::with_capacity(brackets.len());
    let mut bracket_lines = Vec::with_capacity(brackets.len());
    for (line, idx, value) in &brackets {
        let i = parse_indices(idx, 3, *line)?;
        if i.iter().any(|&v| v >= r) {
            return Err(err(*line, format!("bracket index out of range for r = {r}")));
        }
        if i[0] >= i[1] {
            return Err(err(*line, "bracket entries need s < t"));
        }
        if bracket_lines.iter().any(|(_, j)| *j == i) {
            return Err(err(*line, "duplicate bracket entry"));
        }
        bracket_lines.push((*line, i.clone()));
        entries.push(BracketEntry::new(i[0], i[1], i[2], parse_expr(value, n, *line)?));
    }
    let chart = AlgebroidChart::new(n, r, dom, b, entries).map_err(|e| err(bline, e.to_string()))?;

    if !seen_metric {
        return Err(err(last, "missing [metric] section"));
    }
    let mut g = Vec::with_capacity(metric.len());
    let mut seen = Vec::new();
    for (line, idx, value) in &metric {
        let i = parse_indices(idx, 2, *line)?;
        if i[0] >= r || i[1] >= r {
            return Err(err(*line, format!("metric index out of range for r = {r}")));
        }
        if i[0] > i[1] {
            return Err(err(*line, "metric entries need i <= j"));
        }
        if seen.contains(&i) {
            return Err(err(*line, "duplicate metric entry"));
        }
        seen.push(i.clone());
        g.push((i[0], i[1], parse_expr(value, n, *line)?));
    }
    let metric_line = metric.first().map_or(last, |m| m.0);
    let metric = MetricField::new(r, n, g).map_err(|e| err(metric_line, e.to_string()))?;
    RiemannianAlgebroid::new(chart, metric).map_err(|e| err(metric_line, e.to_string()))
}

pub fn load(path: &std::path::Path) -> Result<RiemannianAlgebroid> {
    parse(&std::fs::read_to_string(path)?)
}

/// Writes a geometry in chart file syntax. Zero bracket and metric entries are omitted.
pub fn write(geom: &RiemannianAlgebroid, comment: Option<&str>) -> String {
    let (n, r) = (geom.n(), geom.r());
    let chart = &geom.chart;
    let mut out = String::new();
    if let Some(c) = comment {
        for l in c.lines() {
            let _ = writeln!(out, "# {l}");
        }
    }
    out.push_str("[algebroid]\n");
    let _ = writeln!(out, "n = {n}");
    let _ = writeln!(out, "r = {r}");
    let dom: Vec<String> = chart.domain().iter().map(|(lo, hi)| format!("{lo:?}, {hi:?}")).collect();
    let _ = writeln!(out, "domain = {}", dom.join("; "));
    let rows: Vec<String> = (0..r)
        .map(|s| (0..n).map(|i| chart.anchor_field(s, i).to_string()).collect::<Vec<_>>().join(", "))
        .collect();
    let _ = writeln!(out, "b = {}", rows.join("; "));
    for s in 0..r {
        for t in s + 1..r {
            for u in 0..r {
                let f = chart.bracket_field(s, t, u);
                if f.as_constant() != Some(0.0) {
                    let _ = writeln!(out, "C {},{},{} = {f}", s + 1, t + 1, u + 1);
                }
            }
        }
    }
    out.push_str("\n[metric]\n");
    for i in 0..r {
        for j in i..r {
            let f = geom.metric.field(i, j);
            if f.as_constant() != Some(0.0) {
                let _ = writeln!(out, "g {},{} = {f}", i + 1, j + 1);
            }
        }
    }
    out
}
