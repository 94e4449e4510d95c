//! Deterministic SVG rendering: learning curves with mean ± 2·std bands
//! across seeds, κ heatmaps over the arena plane, and trajectory plots.
//!
//! Output bytes depend only on the input rows: fixed-precision number
//! formatting, ordered grouping, no timestamps.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::{read_metrics_csv, MetricsRow};

const PALETTE: [&str; 6] = [
    "#1f6f8b", "#d1495b", "#66a182", "#edae49", "#8d5a97", "#404e5c",
];

struct Frame {
    width: f64,
    height: f64,
    left: f64,
    right: f64,
    top: f64,
    bottom: f64,
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        let (y_min, y_max) = pad_range(y_min, y_max);
        Frame {
            width: 640.0,
            height: 420.0,
            left: 70.0,
            right: 620.0,
            top: 40.0,
            bottom: 380.0,
            x_min,
            x_max: if x_max > x_min { x_max } else { x_min + 1.0 },
            y_min,
            y_max,
        }
    }

    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x_min) / (self.x_max - self.x_min) * (self.right - self.left)
    }

    fn py(&self, y: f64) -> f64 {
        self.bottom - (y - self.y_min) / (self.y_max - self.y_min) * (self.bottom - self.top)
    }

    fn axes(&self, title: &str, xlabel: &str, ylabel: &str) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n",
            self.left,
            self.top,
            self.right - self.left,
            self.bottom - self.top
        ));
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"24\" font-size=\"15\" text-anchor=\"middle\" font-family=\"sans-serif\">{}</text>\n",
            (self.left + self.right) / 2.0,
            title
        ));
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\" font-family=\"sans-serif\">{}</text>\n",
            (self.left + self.right) / 2.0,
            self.height - 8.0,
            xlabel
        ));
        s.push_str(&format!(
            "<text x=\"16\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\" font-family=\"sans-serif\" transform=\"rotate(-90 16 {:.1})\">{}</text>\n",
            (self.top + self.bottom) / 2.0,
            (self.top + self.bottom) / 2.0,
            ylabel
        ));
        for i in 0..=4 {
            let fx = self.x_min + (self.x_max - self.x_min) * i as f64 / 4.0;
            let fy = self.y_min + (self.y_max - self.y_min) * i as f64 / 4.0;
            s.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"middle\" font-family=\"sans-serif\">{}</text>\n",
                self.px(fx),
                self.bottom + 16.0,
                fmt_tick(fx)
            ));
            s.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"end\" font-family=\"sans-serif\">{}</text>\n",
                self.left - 6.0,
                self.py(fy) + 3.0,
                fmt_tick(fy)
            ));
        }
        s
    }
}

fn pad_range(lo: f64, hi: f64) -> (f64, f64) {
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    let span = (hi - lo).max(1e-9);
    (lo - 0.05 * span, hi + 0.05 * span)
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 10_000.0 {
        format!("{:.0}k", v / 1000.0)
    } else if v.abs() >= 10.0 || v == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn svg_open(width: f64, height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

/// One labelled group of runs, each run a series of (step, value).
pub struct CurveGroup {
    pub label: String,
    pub runs: Vec<Vec<(f64, f64)>>,
}

/// Learning curves: per group the mean across runs with a mean ± 2·std band
/// when the group holds more than one run.
pub fn render_curves(title: &str, ylabel: &str, groups: &[CurveGroup]) -> String {
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    let mut stats: Vec<(usize, Vec<(f64, f64, f64)>)> = Vec::new(); // (group, (x, mean, std))
    for (gi, g) in groups.iter().enumerate() {
        let xs: Vec<f64> = g
            .runs
            .iter()
            .map(|r| r.iter().map(|(x, _)| *x).collect::<Vec<f64>>())
            .reduce(|a, b| a.into_iter().filter(|x| b.contains(x)).collect())
            .unwrap_or_default();
        let mut rows = Vec::with_capacity(xs.len());
        for x in xs {
            let ys: Vec<f64> = g
                .runs
                .iter()
                .filter_map(|r| r.iter().find(|(rx, _)| *rx == x).map(|(_, y)| *y))
                .collect();
            let mean = ys.iter().sum::<f64>() / ys.len() as f64;
            let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / ys.len() as f64;
            let std = var.sqrt();
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(mean - 2.0 * std);
            y_max = y_max.max(mean + 2.0 * std);
            rows.push((x, mean, std));
        }
        stats.push((gi, rows));
    }
    if !x_min.is_finite() {
        x_min = 0.0;
        x_max = 1.0;
        y_min = 0.0;
        y_max = 1.0;
    }

    let frame = Frame::new(x_min, x_max, y_min, y_max);
    let mut svg = svg_open(frame.width, frame.height);
    svg.push_str(&frame.axes(title, "environment steps", ylabel));
    for (gi, rows) in &stats {
        if rows.is_empty() {
            continue;
        }
        let color = PALETTE[gi % PALETTE.len()];
        let multi = groups[*gi].runs.len() > 1;
        if multi {
            let mut band = String::from("<path d=\"");
            for (i, (x, m, s)) in rows.iter().enumerate() {
                let cmd = if i == 0 { 'M' } else { 'L' };
                band.push_str(&format!(
                    "{cmd}{:.1},{:.1} ",
                    frame.px(*x),
                    frame.py(m + 2.0 * s)
                ));
            }
            for (x, m, s) in rows.iter().rev() {
                band.push_str(&format!(
                    "L{:.1},{:.1} ",
                    frame.px(*x),
                    frame.py(m - 2.0 * s)
                ));
            }
            band.push_str(&format!(
                "Z\" fill=\"{color}\" opacity=\"0.18\" stroke=\"none\"/>\n"
            ));
            svg.push_str(&band);
        }
        let mut line = String::from("<polyline points=\"");
        for (x, m, _) in rows {
            line.push_str(&format!("{:.1},{:.1} ", frame.px(*x), frame.py(*m)));
        }
        line.push_str(&format!(
            "\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"/>\n"
        ));
        svg.push_str(&line);
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" font-family=\"sans-serif\" fill=\"{color}\">{}</text>\n",
            frame.right - 90.0,
            frame.top + 16.0 + 14.0 * *gi as f64,
            groups[*gi].label
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Bins κ diagnostics over the arena plane and renders one heatmap panel
/// per (action dimension, primitive) pair.
pub fn render_kappa_heatmap(
    rows: &[KappaRow],
    act_dim: usize,
    n_prims: usize,
    half_extent: f64,
    bins: usize,
) -> String {
    let panel = 190.0;
    let gap = 34.0;
    let width = 60.0 + n_prims as f64 * (panel + gap);
    let height = 70.0 + act_dim as f64 * (panel + gap);
    let mut svg = svg_open(width, height);
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"24\" font-size=\"14\" text-anchor=\"middle\" font-family=\"sans-serif\">kappa over the arena plane (mean per cell, 0=white, 1=dark)</text>\n",
        width / 2.0
    ));
    for j in 0..act_dim {
        for i in 0..n_prims {
            let ox = 60.0 + i as f64 * (panel + gap);
            let oy = 50.0 + j as f64 * (panel + gap);
            let mut sums = vec![0.0f64; bins * bins];
            let mut counts = vec![0u32; bins * bins];
            for row in rows {
                let bx = (((row.x as f64 + half_extent) / (2.0 * half_extent)) * bins as f64)
                    .clamp(0.0, bins as f64 - 1.0) as usize;
                let by = (((row.y as f64 + half_extent) / (2.0 * half_extent)) * bins as f64)
                    .clamp(0.0, bins as f64 - 1.0) as usize;
                sums[by * bins + bx] += row.kappa[j * n_prims + i] as f64;
                counts[by * bins + bx] += 1;
            }
            let cell = panel / bins as f64;
            for by in 0..bins {
                for bx in 0..bins {
                    let c = counts[by * bins + bx];
                    let v = if c > 0 {
                        sums[by * bins + bx] / c as f64
                    } else {
                        continue;
                    };
                    let shade = (255.0 * (1.0 - v.clamp(0.0, 1.0))) as u8;
                    svg.push_str(&format!(
                        "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"rgb({shade},{shade},255)\"/>\n",
                        ox + bx as f64 * cell,
                        // SVG y grows downward; arena y grows upward.
                        oy + (bins - 1 - by) as f64 * cell,
                        cell + 0.5,
                        cell + 0.5
                    ));
                }
            }
            svg.push_str(&format!(
                "<rect x=\"{ox:.1}\" y=\"{oy:.1}\" width=\"{panel:.1}\" height=\"{panel:.1}\" fill=\"none\" stroke=\"#333\"/>\n"
            ));
            svg.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\" font-family=\"sans-serif\">kappa[a{j}, pi{i}]</text>\n",
                ox + panel / 2.0,
                oy + panel + 14.0
            ));
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Planar trajectories, one polyline per instance.
pub fn render_trajectories(paths: &BTreeMap<usize, Vec<(f32, f32)>>, half_extent: f64) -> String {
    let frame = Frame::new(-half_extent, half_extent, -half_extent, half_extent);
    let mut svg = svg_open(frame.width, frame.height);
    svg.push_str(&frame.axes("relative trajectories", "x (m)", "y (m)"));
    svg.push_str(&format!(
        "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"4\" fill=\"#d1495b\"/>\n",
        frame.px(0.0),
        frame.py(0.0)
    ));
    for (env_id, path) in paths {
        if path.is_empty() {
            continue;
        }
        let color = PALETTE[env_id % PALETTE.len()];
        let mut line = String::from("<polyline points=\"");
        for (x, y) in path {
            line.push_str(&format!(
                "{:.1},{:.1} ",
                frame.px(*x as f64),
                frame.py(*y as f64)
            ));
        }
        line.push_str(&format!(
            "\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\" opacity=\"0.85\"/>\n"
        ));
        svg.push_str(&line);
    }
    svg.push_str("</svg>\n");
    svg
}

/// A parsed κ-diagnostics CSV row.
#[derive(Clone, Debug)]
pub struct KappaRow {
    pub x: f32,
    pub y: f32,
    pub kappa: Vec<f32>,
}

pub fn read_kappa_csv(path: &Path) -> Result<(Vec<KappaRow>, usize, usize)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::config(format!("{}: empty kappa csv", path.display())))?;
    let cols: Vec<&str> = header.split(',').collect();
    let kappa_cols: Vec<usize> = cols
        .iter()
        .enumerate()
        .filter(|(_, c)| c.starts_with("kappa_"))
        .map(|(i, _)| i)
        .collect();
    if kappa_cols.is_empty() {
        return Err(Error::config(format!(
            "{}: no kappa_* columns",
            path.display()
        )));
    }
    let act_dim = cols
        .iter()
        .filter(|c| c.starts_with("kappa_") && c.ends_with("_p0"))
        .count();
    let n_prims = kappa_cols.len() / act_dim.max(1);
    let mut rows = Vec::new();
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let parse = |s: &str| -> Result<f32> {
            s.parse()
                .map_err(|_| Error::config(format!("bad kappa csv value '{s}'")))
        };
        rows.push(KappaRow {
            x: parse(f[2])?,
            y: parse(f[3])?,
            kappa: kappa_cols
                .iter()
                .map(|i| parse(f[*i]))
                .collect::<Result<Vec<f32>>>()?,
        });
    }
    Ok((rows, act_dim, n_prims))
}

pub fn read_trajectory_csv(path: &Path) -> Result<BTreeMap<usize, Vec<(f32, f32)>>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    lines
        .next()
        .ok_or_else(|| Error::config(format!("{}: empty trajectory csv", path.display())))?;
    let mut paths: BTreeMap<usize, Vec<(f32, f32)>> = BTreeMap::new();
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let env_id: usize = f[0]
            .parse()
            .map_err(|_| Error::config("bad env_id in trajectory csv"))?;
        let x: f32 = f[2].parse().map_err(|_| Error::config("bad s0"))?;
        let y: f32 = f[3].parse().map_err(|_| Error::config("bad s1"))?;
        paths.entry(env_id).or_default().push((x, y));
    }
    Ok(paths)
}

/// Renders learning-curve SVGs for a set of run directories, grouped by
/// method. Returns the written file paths.
pub fn plot_run_dirs(run_dirs: &[PathBuf], out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut by_method: BTreeMap<String, Vec<Vec<MetricsRow>>> = BTreeMap::new();
    for dir in run_dirs {
        let rows = read_metrics_csv(&dir.join("metrics.csv"))?;
        if rows.is_empty() {
            continue;
        }
        by_method
            .entry(rows[0].method.to_string())
            .or_default()
            .push(rows);
    }
    if by_method.is_empty() {
        return Err(Error::config("no metrics rows found in the given run dirs"));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let extract: [(&str, fn(&MetricsRow) -> f64); 3] = [
        ("eval_return", |r| r.eval_return),
        ("eval_final_dist", |r| r.eval_final_dist),
        ("eval_success", |r| r.eval_success),
    ];
    for (name, f) in extract {
        let groups: Vec<CurveGroup> = by_method
            .iter()
            .map(|(label, runs)| CurveGroup {
                label: label.clone(),
                runs: runs
                    .iter()
                    .map(|rows| rows.iter().map(|r| (r.step as f64, f(r))).collect())
                    .collect(),
            })
            .collect();
        let svg = render_curves(name, name, &groups);
        let path = out_dir.join(format!("curves_{name}.svg"));
        std::fs::write(&path, svg)?;
        written.push(path);
    }
    Ok(written)
}
