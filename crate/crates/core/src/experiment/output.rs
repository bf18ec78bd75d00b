use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use super::runner::{Curve, ExperimentResult, SpeedupRow, SweepAxis, VariantResult};
use crate::error::{Error, Result};
use crate::sim::{read_rows, write_rows, CsvRow};

pub const SUMMARY_HEADER: [&str; 12] = [
    "variant",
    "K",
    "P",
    "m",
    "eta",
    "mean_T",
    "stderr_T",
    "theory_T",
    "final_loss",
    "bound_kind",
    "bound",
    "diverged_replications",
];

pub const WALLCLOCK_HEADER: [&str; 3] = ["wallclock", "loss", "stderr"];

/// Which artifacts to write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Formats {
    pub csv: bool,
    pub plot: bool,
}

impl Default for Formats {
    fn default() -> Self {
        Formats { csv: true, plot: true }
    }
}

impl std::str::FromStr for Formats {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut f = Formats { csv: false, plot: false };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "csv" => f.csv = true,
                "plot" | "svg" => f.plot = true,
                other => return Err(Error::Validation(vec![format!("unknown output format {other:?}")])),
            }
        }
        Ok(f)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

/// Mean per-iteration curve in the trace schema.
pub fn iteration_rows(v: &VariantResult) -> Vec<CsvRow> {
    let c = &v.columns;
    (0..c.wallclock.len())
        .map(|i| CsvRow {
            iteration: i + 1,
            wallclock: c.wallclock[i],
            value: v.by_iteration.mean[i + 1],
            eta: c.eta[i],
            grad_norm: c.grad_norm[i],
            max_staleness: c.max_staleness[i],
            mean_staleness: c.mean_staleness[i],
        })
        .collect()
}

/// Bound series on the loss scale in the trace schema. Row `j` holds `b_j`,
/// with wallclock from the mean curve (zero for `j = 0`).
pub fn bound_rows(v: &VariantResult) -> Option<Vec<CsvRow>> {
    let b = v.bound.as_ref()?;
    let values = b.loss_scale();
    let etas = (v.columns.eta.len() + 1 == values.len()).then_some(&v.columns.eta);
    Some(
        values
            .iter()
            .enumerate()
            .map(|(j, &value)| CsvRow {
                iteration: j,
                wallclock: if j == 0 { 0.0 } else { v.columns.wallclock.get(j - 1).copied().unwrap_or(f64::NAN) },
                value,
                eta: match (j, etas) {
                    (0, _) | (_, None) => f64::NAN,
                    (j, Some(e)) => e[j - 1],
                },
                grad_norm: f64::NAN,
                max_staleness: f64::NAN,
                mean_staleness: f64::NAN,
            })
            .collect(),
    )
}

pub fn write_wallclock_curve<W: Write>(out: W, curve: &Curve) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(WALLCLOCK_HEADER)?;
    for i in 0..curve.x.len() {
        let se = curve.stderr.as_ref().map(|s| s[i]);
        w.write_record([curve.x[i].to_string(), curve.mean[i].to_string(), opt(se)])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn read_wallclock_curve(text: &str) -> Result<Curve> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers()?.clone();
    if headers.iter().ne(WALLCLOCK_HEADER) {
        return Err(Error::Parse { path: "<csv>".into(), message: format!("unexpected header {headers:?}") });
    }
    let p = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse { path: "<csv>".into(), message: format!("{s:?}: {e}") });
    let (mut x, mut mean, mut se) = (Vec::new(), Vec::new(), Vec::new());
    let mut has_se = true;
    for rec in r.records() {
        let rec = rec?;
        x.push(p(&rec[0])?);
        mean.push(p(&rec[1])?);
        if rec[2].is_empty() {
            has_se = false;
        } else {
            se.push(p(&rec[2])?);
        }
    }
    let has_se = has_se && !mean.is_empty();
    Ok(Curve { x, mean, stderr: has_se.then_some(se) })
}

pub fn write_summary<W: Write>(out: W, result: &ExperimentResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for v in &result.variants {
        let c = &v.config;
        w.write_record([
            v.name.clone(),
            c.wait_for.to_string(),
            c.learners.to_string(),
            c.batch_size.to_string(),
            c.schedule.ceiling().to_string(),
            opt(v.runtime.map(|r| r.value)),
            opt(v.runtime.map(|r| r.stderr)),
            opt(v.theory_runtime.map(|t| t.value)),
            v.final_loss.to_string(),
            v.bound.as_ref().map_or(String::new(), |b| b.kind.as_str().to_string()),
            opt(v.bound.as_ref().map(|b| b.series.last() + b.optimal_value)),
            v.diverged.len().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn write_speedup<W: Write>(out: W, rows: &[SpeedupRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["distribution", "P", "speedup", "stderr"])?;
    for r in rows {
        w.write_record([
            r.distribution.clone(),
            r.learners.to_string(),
            r.speedup.value.to_string(),
            r.speedup.stderr.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Writes every artifact of `result` into `dir` and returns the paths.
pub fn emit_outputs(result: &ExperimentResult, dir: &Path, formats: Formats) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    if formats.csv {
        let path = dir.join("summary.csv");
        write_summary(create(&path)?, result)?;
        written.push(path);
        for v in &result.variants {
            let path = dir.join(format!("{}.csv", v.name));
            write_rows(create(&path)?, "loss", &iteration_rows(v))?;
            written.push(path);
            let path = dir.join(format!("{}_wallclock.csv", v.name));
            write_wallclock_curve(create(&path)?, &v.by_wallclock)?;
            written.push(path);
            if let Some(rows) = bound_rows(v) {
                let path = dir.join(format!("{}_bound.csv", v.name));
                write_rows(create(&path)?, "bound", &rows)?;
                written.push(path);
            }
        }
        if !result.speedup.is_empty() {
            let path = dir.join("speedup.csv");
            write_speedup(create(&path)?, &result.speedup)?;
            written.push(path);
        }
    }
    if formats.plot {
        if !result.variants.is_empty() {
            let path = dir.join(format!("{}.svg", result.name));
            plot_wallclock(result, &path)?;
            written.push(path);
            let path = dir.join(format!("{}_iterations.svg", result.name));
            plot_iterations(result, &path)?;
            written.push(path);
        }
        if !result.speedup.is_empty() {
            let path = dir.join("speedup.svg");
            plot_speedup(&result.speedup, &path)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// `axis_value,variant,final_loss,loss_at_horizon,mean_T` for a sweep.
pub fn write_sweep_table<W: Write>(out: W, axis: SweepAxis, points: &[(f64, ExperimentResult)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([axis.to_string().as_str(), "variant", "final_loss", "loss_at_horizon", "mean_T"])?;
    for (value, res) in points {
        for v in &res.variants {
            w.write_record([
                value.to_string(),
                v.name.clone(),
                v.final_loss.to_string(),
                v.loss_at_horizon().to_string(),
                opt(v.runtime.map(|r| r.value)),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn emit_sweep(axis: SweepAxis, points: &[(f64, ExperimentResult)], dir: &Path, formats: Formats) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for (value, res) in points {
        written.extend(emit_outputs(res, &dir.join(format!("{axis}_{value}")), formats)?);
    }
    if formats.csv {
        let path = dir.join("sweep.csv");
        write_sweep_table(create(&path)?, axis, points)?;
        written.push(path);
    }
    Ok(written)
}

fn plot_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Parse { path: path.to_path_buf(), message: format!("plot: {e}") }
}

fn positive_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite() && *v > 0.0)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    if lo.is_finite() {
        (lo * 0.8, hi * 1.25)
    } else {
        (1e-6, 1.0)
    }
}

type Series = (String, Vec<(f64, f64)>, bool);

fn draw_lines(path: &Path, caption: &str, x_label: &str, series: &[Series]) -> Result<()> {
    let x_max = series.iter().flat_map(|s| s.1.iter().map(|p| p.0)).fold(0.0f64, f64::max).max(1e-9);
    let (y_lo, y_hi) = positive_range(series.iter().flat_map(|s| s.1.iter().map(|p| p.1)));
    let root = SVGBackend::new(path, (900, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(path, e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(caption, ("sans-serif", 22))
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(0.0..x_max, (y_lo..y_hi).log_scale())
        .map_err(|e| plot_err(path, e))?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc("loss")
        .draw()
        .map_err(|e| plot_err(path, e))?;
    let mut color_index: usize = 0;
    for (name, pts, dashed) in series {
        if !dashed {
            color_index += 1;
        }
        let color = Palette99::pick(color_index.saturating_sub(1)).to_rgba();
        let style = ShapeStyle { color, filled: false, stroke_width: if *dashed { 1 } else { 2 } };
        let pts: Vec<(f64, f64)> = pts.iter().copied().filter(|p| p.1.is_finite() && p.1 > 0.0).collect();
        chart
            .draw_series(LineSeries::new(pts, style))
            .map_err(|e| plot_err(path, e))?
            .label(name.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], style));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| plot_err(path, e))?;
    root.present().map_err(|e| plot_err(path, e))?;
    Ok(())
}

fn variant_series(result: &ExperimentResult, by_wallclock: bool) -> Vec<Series> {
    let mut out = Vec::new();
    for v in &result.variants {
        let curve = if by_wallclock { &v.by_wallclock } else { &v.by_iteration };
        out.push((v.name.clone(), curve.x.iter().copied().zip(curve.mean.iter().copied()).collect(), false));
        if let Some(b) = &v.bound {
            let per_iter = v.theory_runtime.map(|t| t.value).or(v.runtime.map(|r| r.value));
            let xs: Option<Vec<f64>> = if by_wallclock {
                per_iter.map(|t| (0..b.series.values.len()).map(|j| j as f64 * t).collect())
            } else {
                Some((0..b.series.values.len()).map(|j| j as f64).collect())
            };
            if let Some(xs) = xs {
                let limit = if by_wallclock { result.horizon } else { f64::INFINITY };
                let pts = xs.into_iter().zip(b.loss_scale()).filter(|p| p.0 <= limit).collect();
                out.push((format!("{} bound ({})", v.name, b.kind.as_str()), pts, true));
            }
        }
    }
    out
}

fn plot_wallclock(result: &ExperimentResult, path: &Path) -> Result<()> {
    draw_lines(path, &result.name, "wallclock", &variant_series(result, true))
}

fn plot_iterations(result: &ExperimentResult, path: &Path) -> Result<()> {
    draw_lines(path, &result.name, "iteration", &variant_series(result, false))
}

fn plot_speedup(rows: &[SpeedupRow], path: &Path) -> Result<()> {
    let mut names: Vec<&str> = Vec::new();
    for r in rows {
        if !names.contains(&r.distribution.as_str()) {
            names.push(&r.distribution);
        }
    }
    let x_max = rows.iter().map(|r| r.learners as f64).fold(1.0f64, f64::max);
    let y_max = rows.iter().map(|r| r.speedup.value).fold(1.0f64, f64::max) * 1.1;
    let root = SVGBackend::new(path, (900, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(path, e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption("sync over async runtime", ("sans-serif", 22))
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(0.0..x_max, 0.0..y_max)
        .map_err(|e| plot_err(path, e))?;
    chart.configure_mesh().x_desc("learners P").y_desc("speed-up").draw().map_err(|e| plot_err(path, e))?;
    for (i, name) in names.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        let pts: Vec<(f64, f64)> =
            rows.iter().filter(|r| r.distribution == *name).map(|r| (r.learners as f64, r.speedup.value)).collect();
        chart
            .draw_series(LineSeries::new(pts, color.stroke_width(2)))
            .map_err(|e| plot_err(path, e))?
            .label(name.to_string())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(|e| plot_err(path, e))?;
    root.present().map_err(|e| plot_err(path, e))?;
    Ok(())
}

/// Reads a curve CSV written by `emit_outputs` back into rows.
pub fn read_curve_file(path: &Path) -> Result<Vec<CsvRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_rows(&text)
}
