use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::curves::{avg_jf_up_to, hours_to_threshold};
use super::experiment::MethodCurve;
use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::metrics::Curve;

pub const CSV_HEADER: [&str; 6] = ["method", "frame_selector", "type_selector", "seed", "elapsed_seconds", "mean_jf"];

/// `x` with six significant digits, without exponent notation.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let digits = |v: f64| (5 - v.abs().log10().floor() as i32).max(0) as usize;
    let mut s = format!("{:.*}", digits(x), x);
    // rounding may carry into a new leading digit
    let rounded: f64 = s.parse().unwrap_or(x);
    if digits(rounded) != digits(x) {
        s = format!("{:.*}", digits(rounded), rounded);
    }
    s
}

/// One CSV data row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub method: String,
    pub frame_selector: String,
    pub type_selector: String,
    pub seed: u64,
    pub elapsed_seconds: f64,
    pub mean_jf: f64,
}

pub fn csv_rows(curves: &[MethodCurve]) -> Vec<CsvRow> {
    let mut rows: Vec<CsvRow> = curves
        .iter()
        .flat_map(|c| {
            c.curve.points().iter().map(move |&(t, v)| CsvRow {
                method: c.method.name(),
                frame_selector: c.method.frames.to_string(),
                type_selector: c.method.types.to_string(),
                seed: c.seed,
                elapsed_seconds: t,
                mean_jf: v,
            })
        })
        .collect();
    rows.sort_by(|a, b| (&a.method, a.seed).cmp(&(&b.method, b.seed)).then(a.elapsed_seconds.total_cmp(&b.elapsed_seconds)));
    rows
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.position() {
        Some(p) => Error::Parse { line: p.line() as usize, message: format!("{}: {e}", path.display()) },
        None => Error::Config(format!("{}: {e}", path.display())),
    }
}

pub fn write_csv(path: &Path, curves: &[MethodCurve]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| csv_err(path, e);
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in csv_rows(curves) {
        w.write_record([
            r.method,
            r.frame_selector,
            r.type_selector,
            r.seed.to_string(),
            sig6(r.elapsed_seconds),
            sig6(r.mean_jf),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header: Vec<String> = r.headers().map_err(|e| csv_err(path, e))?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Parse { line: 1, message: format!("{}: unexpected header {}", path.display(), header.join(",")) });
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let bad = |what: &str| Error::Parse { line, message: format!("{}: bad {what}", path.display()) };
        rows.push(CsvRow {
            method: rec[0].to_string(),
            frame_selector: rec[1].to_string(),
            type_selector: rec[2].to_string(),
            seed: rec[3].parse().map_err(|_| bad("seed"))?,
            elapsed_seconds: rec[4].parse().map_err(|_| bad("elapsed_seconds"))?,
            mean_jf: rec[5].parse().map_err(|_| bad("mean_jf"))?,
        });
    }
    Ok(rows)
}

/// One line of the summary table: a method aggregated over its seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub frame_selector: String,
    pub type_selector: String,
    pub seeds: usize,
    /// Seconds until the seed-averaged curve reaches each threshold.
    pub times: Vec<Option<f64>>,
    pub avg_jf: f64,
}

/// Aggregates CSV rows per method. `cap` defaults to the largest elapsed
/// time in the rows.
pub fn summarize(rows: &[CsvRow], thresholds: &[f64], cap: Option<f64>) -> Result<Vec<ReportRow>> {
    let cap = cap.unwrap_or_else(|| rows.iter().map(|r| r.elapsed_seconds).fold(0.0, f64::max));
    let mut groups: BTreeMap<(&str, &str, &str), BTreeMap<u64, Vec<(f64, f64)>>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((&r.method, &r.frame_selector, &r.type_selector))
            .or_default()
            .entry(r.seed)
            .or_default()
            .push((r.elapsed_seconds, r.mean_jf));
    }
    groups
        .into_iter()
        .map(|((method, frames, types), seeds)| {
            let curves = seeds.into_values().map(Curve::from_points).collect::<Result<Vec<_>>>()?;
            let mean = Curve::mean_of(&curves);
            Ok(ReportRow {
                method: method.to_string(),
                frame_selector: frames.to_string(),
                type_selector: types.to_string(),
                seeds: curves.len(),
                times: hours_to_threshold(&mean, thresholds)?,
                avg_jf: if cap > 0.0 { avg_jf_up_to(&mean, cap)? } else { 0.0 },
            })
        })
        .collect()
}

/// Fixed-width table: time to each threshold (seconds) and average J&F up
/// to the cap.
pub fn format_report(rows: &[ReportRow], thresholds: &[f64], cap: f64) -> String {
    let width = rows.iter().map(|r| r.method.len()).max().unwrap_or(0).max(6);
    let mut out = format!("{:<width$}  {:<12} {:<14} {:>5}", "method", "frames", "types", "seeds");
    for t in thresholds {
        let _ = write!(out, " {:>10}", format!("s@{t:.2}"));
    }
    let _ = writeln!(out, " {:>12}", format!("avg@{}", sig6(cap)));
    for r in rows {
        let _ = write!(out, "{:<width$}  {:<12} {:<14} {:>5}", r.method, r.frame_selector, r.type_selector, r.seeds);
        for t in &r.times {
            let _ = write!(out, " {:>10}", t.map_or("n/r".to_string(), |s| format!("{s:.1}")));
        }
        let _ = writeln!(out, " {:>12.4}", r.avg_jf);
    }
    out
}

pub const MASK_MAGIC: &str = "EVAVOS-MASK v1";

/// Mask track as text: a header line, then per frame the `start length`
/// pairs of the runs of set pixels in row-major order.
pub fn write_mask_track(masks: &[Mask]) -> Result<String> {
    let (w, h) = masks.first().map_or((0, 0), |m| (m.width(), m.height()));
    if masks.iter().any(|m| m.width() != w || m.height() != h) {
        return Err(Error::Shape("mask track frames differ in size".into()));
    }
    let mut out = format!("{MASK_MAGIC} {w} {h} {}\n", masks.len());
    for m in masks {
        let mut pairs = Vec::new();
        let mut run: Option<(usize, usize)> = None;
        for p in m.ones() {
            run = match run {
                Some((s, l)) if s + l == p => Some((s, l + 1)),
                Some(r) => {
                    pairs.push(r);
                    Some((p, 1))
                }
                None => Some((p, 1)),
            };
        }
        pairs.extend(run);
        let line: Vec<String> = pairs.iter().map(|(s, l)| format!("{s} {l}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_mask_track(text: &str) -> Result<Vec<Mask>> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    let dims = header
        .strip_prefix(MASK_MAGIC)
        .ok_or_else(|| Error::Version(format!("expected `{MASK_MAGIC}`, got `{header}`")))?;
    let nums: Vec<usize> = dims.split_whitespace().map(str::parse).collect::<std::result::Result<_, _>>().map_err(|_| Error::Parse {
        line: 1,
        message: "bad dimensions".into(),
    })?;
    let [w, h, n] = nums[..] else {
        return Err(Error::Parse { line: 1, message: "expected width, height and frame count".into() });
    };
    let mut masks = Vec::with_capacity(n);
    for i in 0..n {
        let line = i + 2;
        let text = lines.next().ok_or(Error::Parse { line, message: "missing frame".into() })?;
        let vals: Vec<usize> =
            text.split_whitespace().map(str::parse).collect::<std::result::Result<_, _>>().map_err(|_| Error::Parse { line, message: "bad run".into() })?;
        if !vals.len().is_multiple_of(2) {
            return Err(Error::Parse { line, message: "odd number of run values".into() });
        }
        let mut m = Mask::empty(w, h);
        for r in vals.chunks(2) {
            if r[0] + r[1] > w * h {
                return Err(Error::Parse { line, message: "run past the end of the frame".into() });
            }
            (r[0]..r[0] + r[1]).for_each(|p| m.set_index(p, true));
        }
        masks.push(m);
    }
    Ok(masks)
}
