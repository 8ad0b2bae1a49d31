//! Computation of each study into in-memory tables.

use rayon::prelude::*;
use serde_json::json;

use crate::ensemble::{build_distribution_with, spectrum_sweep, CouplingDistribution, RateKind};
use crate::error::PcsError;
use crate::hilbert::DressedLabel;
use crate::liouville::{DriveField, TransitionMask};
use crate::pvr::{fit_gamma_points, GammaPoint, LinearFit, PvrEvaluator, WindowKind, PEAK_DELTA_TILDE};

use super::config::{linear_grid, log_grid, DistributionModel, RunConfig};
use super::output::{csv_bytes, format_number, FailureRecord, Table};
use super::{CliError, Study};

/// Files and diagnostics produced by one study.
#[derive(Debug, Default)]
pub struct StudyOutput {
    pub files: Vec<(String, Vec<u8>)>,
    pub cells: usize,
    pub failures: Vec<FailureRecord>,
    pub summary: serde_json::Value,
}

impl StudyOutput {
    fn table(&mut self, name: &str, table: &Table) -> Result<(), CliError> {
        self.files.push((name.to_string(), table.to_csv()?));
        Ok(())
    }

    fn fail(&mut self, location: String, error: &PcsError) {
        self.failures.push(FailureRecord {
            location,
            error: error.to_string(),
        });
    }
}

/// Distribution selected by the `distribution` section.
pub fn distribution(config: &RunConfig) -> Result<CouplingDistribution, PcsError> {
    let d = &config.distribution;
    match d.model {
        DistributionModel::Mask => build_distribution_with(&d.geometry(), d.nodes, d.samples, config.seed),
        DistributionModel::Point => CouplingDistribution::point(d.g.unwrap_or(config.physics.g_f)),
    }
}

fn distribution_table(dist: &CouplingDistribution) -> Table {
    let mut t = Table::new(vec!["g".into(), "weight".into()]);
    for (g, p) in dist.iter() {
        t.push(vec![g, p]);
    }
    t
}

fn parse_kinds(names: &[String]) -> Result<Vec<RateKind>, CliError> {
    names
        .iter()
        .map(|k| k.parse().map_err(|e: PcsError| CliError::Config(vec![e.to_string()])))
        .collect()
}

fn sweep(
    out: &mut StudyOutput,
    config: &RunConfig,
    grid: &[f64],
    dist: &CouplingDistribution,
    kinds: &[RateKind],
    mask: &TransitionMask,
    label: &str,
) -> Result<Vec<Vec<f64>>, CliError> {
    let table = spectrum_sweep(&config.physics.params(), grid, dist, kinds, mask)?;
    out.cells += grid.len() * dist.len();
    for f in &table.failures {
        out.fail(format!("{label}delta_tilde={} g={}", f.delta_tilde, f.g), &f.error);
    }
    Ok(table.rows.into_iter().map(|r| r.values).collect())
}

fn detuning_table(grid: &[f64], names: &[String], columns: &[Vec<Vec<f64>>]) -> Table {
    let mut header = vec!["delta_tilde".to_string()];
    header.extend(names.iter().cloned());
    let mut t = Table::new(header);
    for (i, &dt) in grid.iter().enumerate() {
        let mut row = vec![dt];
        for c in columns {
            row.extend_from_slice(&c[i]);
        }
        t.push(row);
    }
    t
}

fn spectrum(config: &RunConfig) -> Result<StudyOutput, CliError> {
    let s = &config.spectrum;
    let kinds = parse_kinds(&s.kinds)?;
    let dist = match s.g {
        Some(g) => CouplingDistribution::point(g)?,
        None => distribution(config)?,
    };
    let grid = linear_grid(s.start, s.stop, s.points);
    let mut out = StudyOutput::default();
    let values = sweep(&mut out, config, &grid, &dist, &kinds, &TransitionMask::new(), "")?;
    let names: Vec<String> = kinds.iter().map(|k| k.name().to_string()).collect();
    out.table("spectrum.csv", &detuning_table(&grid, &names, &[values]))?;
    out.table("distribution.csv", &distribution_table(&dist))?;
    Ok(out)
}

fn three_photon(config: &RunConfig) -> Result<StudyOutput, CliError> {
    let s = &config.three_photon;
    let kinds = parse_kinds(&s.kinds)?;
    let dist = CouplingDistribution::point(s.g.unwrap_or(config.physics.g_f))?;
    let grid = linear_grid(s.start, s.stop, s.points);
    let mut out = StudyOutput::default();
    let values = sweep(&mut out, config, &grid, &dist, &kinds, &TransitionMask::new(), "")?;
    let names: Vec<String> = kinds.iter().map(|k| k.name().to_string()).collect();
    out.table("three_photon.csv", &detuning_table(&grid, &names, &[values]))?;
    Ok(out)
}

/// Every transition `|n>_ε ↔ |n+1>_ε'` with `n < levels`, for both fields.
pub fn mask_series(levels: usize) -> Vec<(DressedLabel, DressedLabel, DriveField)> {
    let mut out = Vec::new();
    for n in 0..levels {
        let froms = if n == 0 {
            vec![DressedLabel::Ground]
        } else {
            vec![DressedLabel::Minus(n), DressedLabel::Plus(n)]
        };
        for field in [DriveField::Drive1, DriveField::Drive2] {
            for &from in &froms {
                for to in [DressedLabel::Minus(n + 1), DressedLabel::Plus(n + 1)] {
                    out.push((from, to, field));
                }
            }
        }
    }
    out
}

/// Column name of a masked series, e.g. `0_1-_drive1`.
pub fn series_name(from: DressedLabel, to: DressedLabel, field: DriveField) -> String {
    format!("{from}_{to}_{field}")
}

fn mask_study(config: &RunConfig) -> Result<StudyOutput, CliError> {
    let s = &config.mask_study;
    let kinds = parse_kinds(std::slice::from_ref(&s.kind))?;
    let dist = CouplingDistribution::point(s.g.unwrap_or(config.physics.g_f))?;
    let grid = linear_grid(s.start, s.stop, s.points);
    let mut out = StudyOutput::default();
    let mut names = vec!["unmasked".to_string()];
    let mut columns = vec![sweep(&mut out, config, &grid, &dist, &kinds, &TransitionMask::new(), "unmasked ")?];
    for (from, to, field) in mask_series(s.levels) {
        let name = series_name(from, to, field);
        let mask = TransitionMask::single(from, to, field);
        columns.push(sweep(&mut out, config, &grid, &dist, &kinds, &mask, &format!("{name} "))?);
        names.push(name);
    }
    out.table("mask_study.csv", &detuning_table(&grid, &names, &columns))?;
    Ok(out)
}

/// Ratios on a window grid for both window kinds; failed cells are NaN.
fn ratio_rows(ev: &Result<PvrEvaluator, PcsError>, taus: &[f64]) -> Vec<[Result<f64, PcsError>; 2]> {
    taus.iter()
        .map(|&tau| {
            WindowKind::BOTH.map(|kind| match ev {
                Ok(ev) => ev.pvr(tau, kind),
                Err(e) => Err(e.clone()),
            })
        })
        .collect()
}

fn pvr_surface(config: &RunConfig) -> Result<StudyOutput, CliError> {
    let s = &config.pvr_surface;
    let params = config.physics.params().with_delta_tilde(PEAK_DELTA_TILDE);
    let gs = linear_grid(s.g_start, s.g_stop, s.g_points);
    let taus = log_grid(s.tau_start, s.tau_stop, s.tau_points);
    let blocks: Vec<Vec<[Result<f64, PcsError>; 2]>> = gs
        .par_iter()
        .map(|&g| {
            let ev = CouplingDistribution::point(g).and_then(|d| PvrEvaluator::new(&params, &d));
            ratio_rows(&ev, &taus)
        })
        .collect();
    let mut out = StudyOutput::default();
    let mut t = Table::new(vec!["g".into(), "tau_w".into(), "pvr_con".into(), "pvr_unc".into()]);
    for (&g, block) in gs.iter().zip(&blocks) {
        for (&tau, pair) in taus.iter().zip(block) {
            let mut row = vec![g, tau];
            for (kind, r) in WindowKind::BOTH.iter().zip(pair) {
                out.cells += 1;
                match r {
                    Ok(v) => row.push(*v),
                    Err(e) => {
                        out.fail(format!("g={g} tau_w={tau} {}", kind.name()), e);
                        row.push(f64::NAN);
                    }
                }
            }
            t.push(row);
        }
    }
    out.table("pvr_surface.csv", &t)?;
    Ok(out)
}

fn fit_json(fit: &Result<LinearFit, PcsError>) -> serde_json::Value {
    match fit {
        Ok(f) => json!({ "slope": f.slope, "intercept": f.intercept, "r": f.r }),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn window_opt(config: &RunConfig) -> Result<StudyOutput, CliError> {
    let s = &config.window_opt;
    let dist = distribution(config)?;
    let base = config.physics.params().with_delta_tilde(PEAK_DELTA_TILDE);
    let taus = log_grid(s.tau_start, s.tau_stop, s.tau_points);
    let mut out = StudyOutput::default();
    let mut points = Vec::with_capacity(s.gammas.len());
    let mut curves = Table::new(vec!["gamma".into(), "tau_w".into(), "pvr_con".into(), "pvr_unc".into()]);
    for &gamma in &s.gammas {
        let ev = PvrEvaluator::new(&base.with_gamma(gamma), &dist);
        for (&tau, pair) in taus.iter().zip(ratio_rows(&ev, &taus)) {
            let mut row = vec![gamma, tau];
            for (kind, r) in WindowKind::BOTH.iter().zip(pair) {
                out.cells += 1;
                row.push(r.unwrap_or_else(|e| {
                    out.fail(format!("gamma={gamma} tau_w={tau} {}", kind.name()), &e);
                    f64::NAN
                }));
            }
            curves.push(row);
        }
        let [con, unc] = WindowKind::BOTH.map(|kind| match &ev {
            Ok(ev) => ev.optimize_in(kind, s.tau_start, s.tau_stop, s.tau_points),
            Err(e) => Err(e.clone()),
        });
        points.push(GammaPoint { gamma, con, unc });
    }
    let mut optima = Table::new(
        ["gamma", "tau_con", "pvr_con", "boundary_con", "tau_unc", "pvr_unc", "boundary_unc"]
            .map(String::from)
            .to_vec(),
    );
    for pt in &points {
        let mut row = vec![pt.gamma];
        for (kind, r) in [(WindowKind::Conditional, &pt.con), (WindowKind::Unconditional, &pt.unc)] {
            out.cells += 1;
            match r {
                Ok(o) => row.extend([o.tau_opt, o.pvr_max, if o.at_boundary { 1.0 } else { 0.0 }]),
                Err(e) => {
                    out.fail(format!("gamma={} optimum {}", pt.gamma, kind.name()), e);
                    row.extend([f64::NAN; 3]);
                }
            }
        }
        optima.push(row);
    }
    let (con, unc) = match fit_gamma_points(points, config.physics.kappa) {
        Ok(sweep) => (sweep.con, sweep.unc),
        Err(e) => (Err(e.clone()), Err(e)),
    };
    let fit_row = |name: &str, fit: &Result<LinearFit, PcsError>| {
        let v = fit.as_ref().map_or([f64::NAN; 3], |f| [f.slope, f.intercept, f.r]);
        let mut row = vec![name.to_string()];
        row.extend(v.iter().map(|&x| format_number(x)));
        row
    };
    let header = ["window", "slope", "intercept", "r"].map(String::from);
    let fits = csv_bytes(&header, [fit_row("con", &con), fit_row("unc", &unc)])?;
    out.summary = json!({ "fit_con": fit_json(&con), "fit_unc": fit_json(&unc) });
    out.table("window_opt.csv", &optima)?;
    out.table("window_curves.csv", &curves)?;
    out.files.push(("window_fit.csv".into(), fits));
    out.table("distribution.csv", &distribution_table(&dist))?;
    Ok(out)
}

/// Runs `study` on an already validated and resolved configuration.
pub fn compute(study: Study, config: &RunConfig) -> Result<StudyOutput, CliError> {
    match study {
        Study::Spectrum => spectrum(config),
        Study::ThreePhoton => three_photon(config),
        Study::MaskStudy => mask_study(config),
        Study::PvrSurface => pvr_surface(config),
        Study::WindowOpt => window_opt(config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_series_counts() {
        assert_eq!(mask_series(1).len(), 4);
        assert_eq!(mask_series(3).len(), 4 + 8 + 8);
        let names: Vec<String> = mask_series(3).into_iter().map(|(a, b, f)| series_name(a, b, f)).collect();
        assert_eq!(names[0], "0_1-_drive1");
        assert!(names.contains(&"2+_3-_drive2".to_string()));
        let unique: std::collections::BTreeSet<_> = names.iter().collect();
        assert_eq!(unique.len(), names.len());
    }
}
