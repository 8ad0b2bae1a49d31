//! Run configuration read from a TOML file with one flat section per study.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ensemble::{MaskGeometry, RateKind, DEFAULT_SAMPLES, DEFAULT_SEED};
use crate::hilbert::SystemParams;
use crate::pvr::{GRID_POINTS, TAU_MAX, TAU_MIN};

use super::{CliError, Study};

/// Physical rates, drive amplitudes and truncations, in units of κ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConfig {
    pub g_f: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub drive1: f64,
    pub drive2: f64,
    pub n_max: usize,
    pub m_max: usize,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            g_f: 9.0,
            kappa: 1.0,
            gamma: 2.0,
            drive1: 0.5,
            drive2: 0.5,
            n_max: 5,
            m_max: 3,
        }
    }
}

impl PhysicsConfig {
    /// Parameters at `g = g_f` and `δ̃ = 0`.
    pub fn params(&self) -> SystemParams {
        let mut p = SystemParams::new(self.g_f, self.gamma, self.drive1, self.drive2, 0.0)
            .with_truncation(self.n_max, self.m_max);
        p.kappa = self.kappa;
        p
    }
}

/// How the coupling strength is distributed over the atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistributionModel {
    /// Geometric model of atoms passing a mask in front of the mode.
    Mask,
    /// Every atom has the coupling `g`.
    Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistributionConfig {
    pub model: DistributionModel,
    pub nodes: usize,
    pub samples: usize,
    pub waist_ratio: f64,
    pub mask_length_fraction: f64,
    /// Lower support cut-off `F`; the mask corner value when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
    pub g_max: f64,
    pub transit_half_length: f64,
    /// Coupling of the point model; `g_f` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
}

impl Default for DistributionConfig {
    fn default() -> Self {
        let geom = MaskGeometry::default();
        Self {
            model: DistributionModel::Mask,
            nodes: 20,
            samples: DEFAULT_SAMPLES,
            waist_ratio: geom.waist_ratio,
            mask_length_fraction: geom.mask_length_fraction,
            cutoff: None,
            g_max: geom.g_max,
            transit_half_length: geom.transit_half_length,
            g: None,
        }
    }
}

impl DistributionConfig {
    pub fn geometry(&self) -> MaskGeometry {
        let mut geom = MaskGeometry {
            waist_ratio: self.waist_ratio,
            mask_length_fraction: self.mask_length_fraction,
            cutoff: 0.0,
            g_max: self.g_max,
            transit_half_length: self.transit_half_length,
        };
        geom.cutoff = self.cutoff.unwrap_or_else(|| geom.corner_fraction());
        geom
    }
}

/// Sweep of the scan detuning, tabulating ensemble rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub kinds: Vec<String>,
    /// Fixed coupling instead of the ensemble.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            start: -2.0,
            stop: 4.0,
            points: 200,
            kinds: vec!["w2".into(), "diff2".into()],
            g: None,
        }
    }
}

/// Sweep of the scan detuning at a single coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThreePhotonConfig {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub kinds: Vec<String>,
    /// Coupling; `g_f` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
}

impl Default for ThreePhotonConfig {
    fn default() -> Self {
        Self {
            start: -0.9,
            stop: 3.0,
            points: 391,
            kinds: vec!["a3".into(), "s_a2".into()],
            g: None,
        }
    }
}

/// One sweep per removed dressed transition and field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskStudyConfig {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub kind: String,
    /// Transitions `|n> ↔ |n+1>` are masked for `n < levels`.
    pub levels: usize,
    /// Coupling; `g_f` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
}

impl Default for MaskStudyConfig {
    fn default() -> Self {
        Self {
            start: -0.9,
            stop: 3.0,
            points: 196,
            kind: "a3".into(),
            levels: 3,
            g: None,
        }
    }
}

/// Peak-to-valley ratio over fixed couplings and window times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PvrSurfaceConfig {
    pub g_start: f64,
    pub g_stop: f64,
    pub g_points: usize,
    pub tau_start: f64,
    pub tau_stop: f64,
    pub tau_points: usize,
}

impl Default for PvrSurfaceConfig {
    fn default() -> Self {
        Self {
            g_start: 7.5,
            g_stop: 10.0,
            g_points: 11,
            tau_start: TAU_MIN,
            tau_stop: TAU_MAX,
            tau_points: GRID_POINTS,
        }
    }
}

/// Optimal window over a list of atomic decay rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowOptConfig {
    pub gammas: Vec<f64>,
    pub tau_start: f64,
    pub tau_stop: f64,
    pub tau_points: usize,
}

impl Default for WindowOptConfig {
    fn default() -> Self {
        Self {
            gammas: vec![0.2, 2.0, 5.0, 7.0, 10.0],
            tau_start: TAU_MIN,
            tau_stop: TAU_MAX,
            tau_points: GRID_POINTS,
        }
    }
}

/// Complete configuration of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
    #[serde(skip_serializing)]
    pub workers: Option<usize>,
    pub seed: u64,
    pub physics: PhysicsConfig,
    pub distribution: DistributionConfig,
    pub spectrum: SpectrumConfig,
    pub three_photon: ThreePhotonConfig,
    pub mask_study: MaskStudyConfig,
    pub pvr_surface: PvrSurfaceConfig,
    pub window_opt: WindowOptConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: None,
            workers: None,
            seed: DEFAULT_SEED,
            physics: PhysicsConfig::default(),
            distribution: DistributionConfig::default(),
            spectrum: SpectrumConfig::default(),
            three_photon: ThreePhotonConfig::default(),
            mask_study: MaskStudyConfig::default(),
            pvr_surface: PvrSurfaceConfig::default(),
            window_opt: WindowOptConfig::default(),
        }
    }
}

/// Points `start, …, stop`, or just `start` when `points == 1`.
pub fn linear_grid(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..points)
            .map(|i| {
                if i + 1 == points {
                    stop
                } else {
                    start + (stop - start) * i as f64 / (points - 1) as f64
                }
            })
            .collect(),
    }
}

/// Logarithmically spaced points from `start` to `stop`.
pub fn log_grid(start: f64, stop: f64, points: usize) -> Vec<f64> {
    linear_grid(start.ln(), stop.ln(), points)
        .into_iter()
        .enumerate()
        .map(|(i, x)| match i {
            0 => start,
            _ if i + 1 == points => stop,
            _ => x.exp(),
        })
        .collect()
}

struct Problems(Vec<String>);

impl Problems {
    fn check(&mut self, ok: bool, field: &str, reason: &str) {
        if !ok {
            self.0.push(format!("{field}: {reason}"));
        }
    }

    fn positive(&mut self, field: &str, v: f64) {
        self.check(v > 0.0 && v.is_finite(), field, "must be positive and finite");
    }

    fn grid(&mut self, section: &str, start: f64, stop: f64, points: usize) {
        self.check(start.is_finite(), &format!("{section}.start"), "must be finite");
        self.check(stop.is_finite(), &format!("{section}.stop"), "must be finite");
        self.check(points >= 1, &format!("{section}.points"), "grid must be nonempty");
        self.check(
            points <= 1 || stop > start,
            &format!("{section}.stop"),
            "must exceed start when points > 1",
        );
    }

    fn log_range(&mut self, section: &str, start: f64, stop: f64, points: usize) {
        self.positive(&format!("{section}.tau_start"), start);
        self.check(
            stop > start && stop.is_finite(),
            &format!("{section}.tau_stop"),
            "must be finite and exceed tau_start",
        );
        self.check(points >= 3, &format!("{section}.tau_points"), "need at least 3 points");
    }

    fn kinds(&mut self, field: &str, kinds: &[String]) {
        self.check(!kinds.is_empty(), field, "must list at least one rate");
        for k in kinds {
            self.check(k.parse::<RateKind>().is_ok(), field, &format!("unknown rate `{k}`"));
        }
    }
}

impl RunConfig {
    /// Parses TOML text; unknown keys and type mismatches are errors.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(vec![e.message().trim().to_string()]))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(list) => CliError::Config(
                list.into_iter()
                    .map(|m| format!("{}: {m}", path.display()))
                    .collect(),
            ),
            other => other,
        })
    }

    /// Checks the shared sections and the section of `study`, reporting
    /// every offending field at once.
    pub fn validate(&self, study: Study) -> Result<(), CliError> {
        let mut p = Problems(Vec::new());
        let ph = &self.physics;
        p.positive("physics.g_f", ph.g_f);
        p.positive("physics.kappa", ph.kappa);
        p.positive("physics.gamma", ph.gamma);
        p.check(ph.drive1 >= 0.0 && ph.drive1.is_finite(), "physics.drive1", "must be nonnegative and finite");
        p.check(ph.drive2 >= 0.0 && ph.drive2.is_finite(), "physics.drive2", "must be nonnegative and finite");
        p.check(ph.n_max >= 2, "physics.n_max", "must be at least 2");
        p.check(ph.m_max >= 1, "physics.m_max", "must be at least 1");
        if let Some(w) = self.workers {
            p.check(w >= 1, "workers", "must be at least 1");
        }
        if study.uses_ensemble() {
            let d = &self.distribution;
            match d.model {
                DistributionModel::Mask => {
                    p.check(d.nodes >= 8, "distribution.nodes", "must be at least 8");
                    p.check(d.samples >= 1, "distribution.samples", "must be positive");
                    p.positive("distribution.g_max", d.g_max);
                    p.positive("distribution.waist_ratio", d.waist_ratio);
                    p.check(
                        d.mask_length_fraction > 0.0 && d.mask_length_fraction < 0.5,
                        "distribution.mask_length_fraction",
                        "must lie in (0, 0.5)",
                    );
                    p.check(
                        d.transit_half_length >= 0.0 && d.transit_half_length.is_finite(),
                        "distribution.transit_half_length",
                        "must be nonnegative and finite",
                    );
                    if let Some(f) = d.cutoff {
                        p.check(f > 0.0 && f < 1.0, "distribution.cutoff", "must lie in (0, 1)");
                    }
                }
                DistributionModel::Point => {
                    if let Some(g) = d.g {
                        p.positive("distribution.g", g);
                    }
                }
            }
        }
        match study {
            Study::Spectrum => {
                let s = &self.spectrum;
                p.grid("spectrum", s.start, s.stop, s.points);
                p.kinds("spectrum.kinds", &s.kinds);
                if let Some(g) = s.g {
                    p.positive("spectrum.g", g);
                }
            }
            Study::ThreePhoton => {
                let s = &self.three_photon;
                p.grid("three_photon", s.start, s.stop, s.points);
                p.kinds("three_photon.kinds", &s.kinds);
                if let Some(g) = s.g {
                    p.positive("three_photon.g", g);
                }
            }
            Study::MaskStudy => {
                let s = &self.mask_study;
                p.grid("mask_study", s.start, s.stop, s.points);
                p.kinds("mask_study.kind", std::slice::from_ref(&s.kind));
                p.check(s.levels >= 1, "mask_study.levels", "must be at least 1");
                p.check(
                    s.levels < ph.n_max,
                    "mask_study.levels",
                    "masked couplets must stay below physics.n_max",
                );
                if let Some(g) = s.g {
                    p.positive("mask_study.g", g);
                }
            }
            Study::PvrSurface => {
                let s = &self.pvr_surface;
                p.positive("pvr_surface.g_start", s.g_start);
                p.check(s.g_points >= 1, "pvr_surface.g_points", "grid must be nonempty");
                p.check(
                    s.g_points <= 1 || (s.g_stop > s.g_start && s.g_stop.is_finite()),
                    "pvr_surface.g_stop",
                    "must be finite and exceed g_start when g_points > 1",
                );
                p.log_range("pvr_surface", s.tau_start, s.tau_stop, s.tau_points);
            }
            Study::WindowOpt => {
                let s = &self.window_opt;
                p.check(!s.gammas.is_empty(), "window_opt.gammas", "must list at least one decay rate");
                for (i, &g) in s.gammas.iter().enumerate() {
                    p.positive(&format!("window_opt.gammas[{i}]"), g);
                }
                p.log_range("window_opt", s.tau_start, s.tau_stop, s.tau_points);
            }
        }
        if p.0.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(p.0))
        }
    }

    /// Output directory: `override_dir`, then the file value, then `pcs-out`.
    pub fn output_dir(&self, override_dir: Option<&Path>) -> PathBuf {
        override_dir
            .map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("pcs-out"))
    }

    /// Configuration with defaults that depend on other fields made explicit.
    pub fn resolved(&self) -> RunConfig {
        let mut c = self.clone();
        c.distribution.cutoff = Some(c.distribution.geometry().cutoff);
        let g_f = c.physics.g_f;
        c.distribution.g.get_or_insert(g_f);
        c.three_photon.g.get_or_insert(g_f);
        c.mask_study.g.get_or_insert(g_f);
        c
    }
}
