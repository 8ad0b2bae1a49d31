//! SVG plots of study tables with resonance guide lines.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::ensemble::{resonance_lines, two_photon_lines};

use super::output::{Sidecar, Table};
use super::CliError;

const SIZE: (u32, u32) = (960, 600);

/// A vertical guide at a predicted resonance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuideLine {
    pub delta_tilde: f64,
    pub dotted: bool,
}

fn draw_err<E: std::error::Error>(e: E) -> CliError {
    CliError::Render(e.to_string())
}

fn finite_range(values: impl IntoIterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .into_iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        return None;
    }
    if lo == hi {
        let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
        return Some((lo - pad, hi + pad));
    }
    let pad = 0.05 * (hi - lo);
    Some((lo - pad, hi + pad))
}

/// Maximal runs of finite points, so NaN cells break the curve.
fn segments(xs: &[f64], ys: &[f64]) -> Vec<Vec<(f64, f64)>> {
    let mut out = vec![Vec::new()];
    for (&x, &y) in xs.iter().zip(ys) {
        if x.is_finite() && y.is_finite() {
            out.last_mut().expect("nonempty").push((x, y));
        } else if !out.last().expect("nonempty").is_empty() {
            out.push(Vec::new());
        }
    }
    out.retain(|s| !s.is_empty());
    out
}

fn require(table: &Table, path: &Path, names: &[&str]) -> Result<(), CliError> {
    let missing: Vec<&str> = names
        .iter()
        .copied()
        .filter(|n| !table.columns.iter().any(|c| c == n))
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(CliError::MissingColumns {
            file: path.display().to_string(),
            columns: missing.join(", "),
        })
    }
}

/// Line plot of `series` against `xs` with vertical guides.
pub fn line_plot(
    out: &Path,
    title: &str,
    x_label: &str,
    xs: &[f64],
    series: &[(String, Vec<f64>)],
    guides: &[GuideLine],
    log_x: bool,
) -> Result<(), CliError> {
    if xs.is_empty() || series.is_empty() {
        return Err(CliError::EmptyPlot(out.display().to_string()));
    }
    let (x0, x1) = if log_x {
        let lo = xs.iter().copied().filter(|x| *x > 0.0).fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(lo < hi) {
            return Err(CliError::EmptyPlot(out.display().to_string()));
        }
        (lo, hi)
    } else {
        finite_range(xs.iter().copied()).ok_or_else(|| CliError::EmptyPlot(out.display().to_string()))?
    };
    let (y0, y1) = finite_range(series.iter().flat_map(|(_, ys)| ys.iter().copied()))
        .ok_or_else(|| CliError::EmptyPlot(out.display().to_string()))?;
    let root = SVGBackend::new(out, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err)?;
    let mut builder = ChartBuilder::on(&root);
    builder
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(44)
        .y_label_area_size(90);
    macro_rules! draw {
        ($chart:expr) => {{
            let mut chart = $chart;
            chart
                .configure_mesh()
                .x_desc(x_label)
                .y_label_formatter(&|y| format!("{y:.2e}"))
                .draw()
                .map_err(draw_err)?;
            for g in guides.iter().filter(|g| g.delta_tilde >= x0 && g.delta_tilde <= x1) {
                let pts = vec![(g.delta_tilde, y0), (g.delta_tilde, y1)];
                if g.dotted {
                    chart
                        .draw_series(DashedLineSeries::new(pts, 3, 5, BLACK.mix(0.6).stroke_width(1)))
                        .map_err(draw_err)?;
                } else {
                    chart
                        .draw_series(LineSeries::new(pts, BLACK.mix(0.6).stroke_width(1)))
                        .map_err(draw_err)?;
                }
            }
            for (i, (name, ys)) in series.iter().enumerate() {
                let color = Palette99::pick(i).to_rgba();
                let mut first = true;
                for seg in segments(xs, ys) {
                    let s = chart
                        .draw_series(LineSeries::new(seg, color.stroke_width(2)))
                        .map_err(draw_err)?;
                    if first {
                        s.label(name.as_str()).legend(move |(x, y)| {
                            PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2))
                        });
                        first = false;
                    }
                }
            }
            chart
                .configure_series_labels()
                .background_style(WHITE.mix(0.85))
                .border_style(BLACK)
                .draw()
                .map_err(draw_err)?;
        }};
    }
    if log_x {
        draw!(builder.build_cartesian_2d((x0..x1).log_scale(), y0..y1).map_err(draw_err)?);
    } else {
        draw!(builder.build_cartesian_2d(x0..x1, y0..y1).map_err(draw_err)?);
    }
    root.present().map_err(draw_err)?;
    Ok(())
}

/// Cell edges halfway between sorted distinct values.
fn edges(values: &[f64], log: bool) -> Vec<f64> {
    let t: Vec<f64> = values.iter().map(|&v| if log { v.ln() } else { v }).collect();
    let n = t.len();
    let mut e = Vec::with_capacity(n + 1);
    let half = |i: usize| if n > 1 { 0.5 * (t[i + 1] - t[i]) } else { 0.5 };
    e.push(t[0] - half(0));
    for i in 0..n - 1 {
        e.push(0.5 * (t[i] + t[i + 1]));
    }
    e.push(t[n - 1] + half(n.saturating_sub(2)));
    if log {
        e.iter_mut().for_each(|x| *x = x.exp());
    }
    e
}

fn distinct(values: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Colour map of `z` over a rectangular `(x, y)` grid with a logarithmic
/// `x` axis.
pub fn surface_plot(
    out: &Path,
    title: &str,
    (x_label, y_label): (&str, &str),
    xs: &[f64],
    ys: &[f64],
    zs: &[f64],
) -> Result<(), CliError> {
    let ux = distinct(xs);
    let uy = distinct(ys);
    let (z0, z1) = match finite_range(zs.iter().copied()) {
        Some(r) if !ux.is_empty() && !uy.is_empty() => r,
        _ => return Err(CliError::EmptyPlot(out.display().to_string())),
    };
    let (lo, hi) = zs
        .iter()
        .filter(|z| z.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &z| (a.min(z), b.max(z)));
    let title = format!("{title}, blue {lo:.3e} to red {hi:.3e}");
    let ex = edges(&ux, true);
    let ey = edges(&uy, false);
    let root = SVGBackend::new(out, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(&title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(44)
        .y_label_area_size(60)
        .build_cartesian_2d((ex[0]..ex[ux.len()]).log_scale(), ey[0]..ey[uy.len()])
        .map_err(draw_err)?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc(y_label)
        .disable_mesh()
        .draw()
        .map_err(draw_err)?;
    let index = |u: &[f64], v: f64| u.binary_search_by(|p| p.total_cmp(&v)).ok();
    let cells = xs.iter().zip(ys).zip(zs).filter_map(|((&x, &y), &z)| {
        let (i, j) = (index(&ux, x)?, index(&uy, y)?);
        let color = if z.is_finite() {
            let s = (z - z0) / (z1 - z0);
            HSLColor(0.66 * (1.0 - s), 0.85, 0.5).filled()
        } else {
            RGBColor(200, 200, 200).filled()
        };
        Some(Rectangle::new([(ex[i], ey[j]), (ex[i + 1], ey[j + 1])], color))
    });
    chart.draw_series(cells).map_err(draw_err)?;
    root.present().map_err(draw_err)?;
    Ok(())
}

/// Vertical bars of `weights` at `nodes`.
pub fn stem_plot(out: &Path, title: &str, nodes: &[f64], weights: &[f64]) -> Result<(), CliError> {
    let (x0, x1) = finite_range(nodes.iter().copied()).ok_or_else(|| CliError::EmptyPlot(out.display().to_string()))?;
    let y1 = weights.iter().copied().filter(|w| w.is_finite()).fold(0.0, f64::max) * 1.1;
    let y1 = if y1 > 0.0 { y1 } else { 1.0 };
    let root = SVGBackend::new(out, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(44)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, 0.0..y1)
        .map_err(draw_err)?;
    chart.configure_mesh().x_desc("g/kappa").y_desc("weight").draw().map_err(draw_err)?;
    chart
        .draw_series(
            nodes
                .iter()
                .zip(weights)
                .map(|(&g, &p)| PathElement::new(vec![(g, 0.0), (g, p)], BLUE.stroke_width(3))),
        )
        .map_err(draw_err)?;
    root.present().map_err(draw_err)?;
    Ok(())
}

/// Sidecar in the same directory that lists `csv` among its files.
fn find_sidecar(csv: &Path) -> Option<Sidecar> {
    let dir = csv.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = csv.file_name()?.to_str()?;
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .ok()?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    entries.sort();
    entries
        .into_iter()
        .filter_map(|p| Sidecar::read(&p))
        .find(|s| s.files.iter().any(|f| f == name))
}

fn config_f64(sidecar: &Sidecar, section: &str, key: &str) -> Option<f64> {
    sidecar.config.get(section)?.get(key)?.as_f64()
}

/// Resonance guides for the study that produced `sidecar`: three-photon
/// lines solid and pump-plus-scan two-photon lines dotted for the
/// three-photon studies, all two-photon lines for spectra.
pub fn guides_for(sidecar: &Sidecar) -> Vec<GuideLine> {
    let Some(g_f) = config_f64(sidecar, "physics", "g_f") else {
        return Vec::new();
    };
    let three = |g: f64| -> Vec<GuideLine> {
        let mut v: Vec<GuideLine> = resonance_lines(g, g_f)
            .map(|r| r.lines)
            .unwrap_or_default()
            .into_iter()
            .map(|l| GuideLine {
                delta_tilde: l.delta_tilde,
                dotted: false,
            })
            .collect();
        v.extend(
            two_photon_lines(g, g_f)
                .unwrap_or_default()
                .into_iter()
                .filter(|l| l.pump_photons == 1)
                .map(|l| GuideLine {
                    delta_tilde: l.delta_tilde,
                    dotted: true,
                }),
        );
        v.sort_by(|a, b| a.delta_tilde.total_cmp(&b.delta_tilde));
        v
    };
    match sidecar.study.as_str() {
        "three-photon" => three(config_f64(sidecar, "three_photon", "g").unwrap_or(g_f)),
        "mask-study" => three(config_f64(sidecar, "mask_study", "g").unwrap_or(g_f)),
        "spectrum" => {
            let g = config_f64(sidecar, "spectrum", "g").unwrap_or(g_f);
            two_photon_lines(g, g_f)
                .unwrap_or_default()
                .into_iter()
                .map(|l| GuideLine {
                    delta_tilde: l.delta_tilde,
                    dotted: false,
                })
                .collect()
        }
        _ => Vec::new(),
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("plot").to_string()
}

/// Couplet of the lower state in a masked series name such as `1+_2-_drive1`.
fn series_level(name: &str) -> Option<String> {
    let from = name.split('_').next()?;
    Some(from.trim_end_matches(['+', '-']).to_string())
}

/// Renders one CSV produced by a study; returns the SVG files written.
pub fn render_file(csv: &Path, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let table = Table::read(csv)?;
    if table.rows.is_empty() {
        return Err(CliError::EmptyPlot(csv.display().to_string()));
    }
    fs::create_dir_all(out_dir)?;
    let sidecar = find_sidecar(csv);
    let name = stem(csv);
    let svg = |suffix: &str| out_dir.join(format!("{name}{suffix}.svg"));
    let col = |c: &str| table.column(c).expect("column presence checked");
    let first = table.columns.first().map(String::as_str).unwrap_or("");
    let mut written = Vec::new();
    match first {
        "delta_tilde" => {
            if table.columns.len() < 2 {
                return Err(CliError::MissingColumns {
                    file: csv.display().to_string(),
                    columns: "at least one rate column".into(),
                });
            }
            let xs = col("delta_tilde");
            let guides = sidecar.as_ref().map(guides_for).unwrap_or_default();
            let series: Vec<(String, Vec<f64>)> =
                table.columns[1..].iter().map(|c| (c.clone(), col(c))).collect();
            let is_mask = sidecar.as_ref().is_some_and(|s| s.study == "mask-study");
            if is_mask && series.len() > 1 {
                let mut groups: BTreeMap<String, Vec<(String, Vec<f64>)>> = BTreeMap::new();
                for s in &series[1..] {
                    let level = series_level(&s.0).unwrap_or_default();
                    groups.entry(level).or_insert_with(|| vec![series[0].clone()]).push(s.clone());
                }
                for (level, group) in groups {
                    let path = svg(&format!("_n{level}"));
                    let title = format!("{name}: transitions from couplet {level}");
                    line_plot(&path, &title, "delta_tilde", &xs, &group, &guides, false)?;
                    written.push(path);
                }
            } else {
                let path = svg("");
                line_plot(&path, &name, "delta_tilde", &xs, &series, &guides, false)?;
                written.push(path);
            }
        }
        "g" if table.columns.iter().any(|c| c == "tau_w") => {
            require(&table, csv, &["g", "tau_w", "pvr_con", "pvr_unc"])?;
            for kind in ["con", "unc"] {
                let path = svg(&format!("_{kind}"));
                let title = format!("{name}: peak-to-valley ratio ({kind})");
                surface_plot(
                    &path,
                    &title,
                    ("kappa tau_w", "g/kappa"),
                    &col("tau_w"),
                    &col("g"),
                    &col(&format!("pvr_{kind}")),
                )?;
                written.push(path);
            }
        }
        "g" => {
            require(&table, csv, &["g", "weight"])?;
            let path = svg("");
            stem_plot(&path, &name, &col("g"), &col("weight"))?;
            written.push(path);
        }
        "gamma" if table.columns.iter().any(|c| c == "tau_w") => {
            require(&table, csv, &["gamma", "tau_w", "pvr_con", "pvr_unc"])?;
            let gammas = col("gamma");
            let taus = col("tau_w");
            for kind in ["con", "unc"] {
                let zs = col(&format!("pvr_{kind}"));
                let mut by_gamma: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::new();
                for ((&g, &t), &z) in gammas.iter().zip(&taus).zip(&zs) {
                    match by_gamma.last_mut() {
                        Some(last) if last.0 == g => {
                            last.1.push(t);
                            last.2.push(z);
                        }
                        _ => by_gamma.push((g, vec![t], vec![z])),
                    }
                }
                let xs = by_gamma[0].1.clone();
                if by_gamma.iter().any(|b| b.1 != xs) {
                    return Err(CliError::Render(format!(
                        "{}: window grids differ between decay rates",
                        csv.display()
                    )));
                }
                let series: Vec<(String, Vec<f64>)> = by_gamma
                    .into_iter()
                    .map(|(g, _, z)| (format!("gamma = {g}"), z))
                    .collect();
                let path = svg(&format!("_{kind}"));
                let title = format!("{name}: peak-to-valley ratio ({kind})");
                line_plot(&path, &title, "kappa tau_w", &xs, &series, &[], true)?;
                written.push(path);
            }
        }
        "gamma" => {
            require(&table, csv, &["gamma", "tau_con", "tau_unc"])?;
            let path = svg("");
            let series = vec![("tau_con".to_string(), col("tau_con")), ("tau_unc".to_string(), col("tau_unc"))];
            line_plot(&path, &format!("{name}: optimal window"), "gamma/kappa", &col("gamma"), &series, &[], false)?;
            written.push(path);
        }
        other => {
            return Err(CliError::Render(format!(
                "{}: unrecognized table starting with column `{other}`",
                csv.display()
            )))
        }
    }
    Ok(written)
}

/// Renders every file; plots go to `out_dir` or next to each CSV.
pub fn render_plots(files: &[PathBuf], out_dir: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    if files.is_empty() {
        return Err(CliError::EmptyPlot("no input files".into()));
    }
    let mut written = Vec::new();
    for f in files {
        let dir = out_dir
            .map(Path::to_path_buf)
            .or_else(|| f.parent().map(Path::to_path_buf))
            .filter(|d| !d.as_os_str().is_empty())
            .unwrap_or_else(|| PathBuf::from("."));
        written.extend(render_file(f, &dir)?);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segments_split_at_nan() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let ys = [1.0, f64::NAN, 2.0, 3.0, f64::NAN];
        let s = segments(&xs, &ys);
        assert_eq!(s, vec![vec![(0.0, 1.0)], vec![(2.0, 2.0), (3.0, 3.0)]]);
    }

    #[test]
    fn edges_bracket_values() {
        let e = edges(&[1.0, 2.0, 4.0], false);
        assert_eq!(e, vec![0.5, 1.5, 3.0, 5.0]);
        let l = edges(&[0.1, 1.0, 10.0], true);
        assert!((l[1] - 0.1f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn series_levels() {
        assert_eq!(series_level("0_1-_drive1").as_deref(), Some("0"));
        assert_eq!(series_level("2+_3-_drive2").as_deref(), Some("2"));
    }
}
