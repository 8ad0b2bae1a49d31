//! Property tests of structural invariants.

use faer::{c64, Mat};
use proptest::prelude::*;

use pcs_core::cli::output::Table;
use pcs_core::ensemble::{build_distribution_with, resonance_lines, MaskGeometry};
use pcs_core::hilbert::{drive_operator, make_operators};
use pcs_core::linalg::{dagger, max_abs, trace};
use pcs_core::liouville::{apply_mask, build_liouville_parts};
use pcs_core::spectral::{nested_kernel, window_kernel};
use pcs_core::{DressedLabel, DriveField, SystemParams, TransitionMask};

fn params() -> impl Strategy<Value = SystemParams> {
    (5.0..12.0f64, 0.8..1.2f64, 0.2..4.0f64, 0.1..1.0f64, 0.1..1.0f64, 0.2..3.0f64).prop_map(
        |(g_f, ratio, gamma, e1, e2, dt)| {
            SystemParams::new(g_f, gamma, e1, e2, dt)
                .with_coupling(ratio * g_f)
                .with_truncation(3, 2)
        },
    )
}

fn density(d: usize) -> impl Strategy<Value = Mat<c64>> {
    prop::collection::vec(-1.0..1.0f64, 2 * d * d).prop_map(move |v| {
        let a = Mat::from_fn(d, d, |i, j| c64::new(v[2 * (i + d * j)], v[2 * (i + d * j) + 1]));
        let rho = &a * dagger(a.as_ref());
        let tr = trace(rho.as_ref());
        Mat::from_fn(d, d, |i, j| rho[(i, j)] / tr)
    })
}

fn label() -> impl Strategy<Value = DressedLabel> {
    prop_oneof![
        Just(DressedLabel::Ground),
        (1..=3usize).prop_map(DressedLabel::Plus),
        (1..=3usize).prop_map(DressedLabel::Minus),
    ]
}

fn mask() -> impl Strategy<Value = TransitionMask> {
    prop::collection::vec((label(), label(), prop::bool::ANY), 0..5).prop_map(|entries| {
        entries.into_iter().fold(TransitionMask::new(), |m, (a, b, first)| {
            m.with(a, b, if first { DriveField::Drive1 } else { DriveField::Drive2 })
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generator_preserves_trace_and_hermiticity(p in params(), rho in density(8), t in 0.0..2.0f64) {
        let parts = build_liouville_parts(&p, &TransitionMask::new()).unwrap();
        let l_rho = parts.generator_at(t).apply(rho.as_ref());
        prop_assert!(trace(l_rho.as_ref()).norm() < 1e-12);
        let skew = &l_rho - l_rho.adjoint();
        prop_assert!(max_abs(skew.as_ref()) < 1e-12);
    }

    #[test]
    fn masking_is_idempotent(m in mask(), e in 0.1..2.0f64) {
        let ops = make_operators(3).unwrap();
        let drive = drive_operator(&ops, e);
        for field in [DriveField::Drive1, DriveField::Drive2] {
            let once = apply_mask(&drive, &m, field).unwrap();
            let twice = apply_mask(&once, &m, field).unwrap();
            prop_assert_eq!(once, twice);
        }
    }

    #[test]
    fn window_kernels_are_averages_of_decays(mu in 1e-6..60.0f64) {
        let w = window_kernel(c64::new(mu, 0.0));
        let n = nested_kernel(c64::new(mu, 0.0));
        prop_assert!(w.im == 0.0 && n.im == 0.0);
        prop_assert!(w.re > 0.0 && w.re <= 1.0);
        prop_assert!(n.re > 0.0 && n.re <= 0.5);
        // a decaying exponential averages higher under the weight 2(1 - s)
        prop_assert!(2.0 * n.re >= w.re - 1e-15);
    }

    #[test]
    fn window_kernels_are_continuous_at_series_edge(phase in 0.0..std::f64::consts::TAU) {
        let dir = c64::from_polar(1.0, phase);
        for kernel in [window_kernel, nested_kernel] {
            let inside = kernel(dir * (0.5 - 1e-12));
            let outside = kernel(dir * (0.5 + 1e-12));
            prop_assert!((inside - outside).norm() < 1e-10);
        }
    }

    #[test]
    fn distribution_lies_in_support(cutoff in 0.3..0.74f64, nodes in 8..40usize, seed in any::<u64>()) {
        let geom = MaskGeometry { cutoff, ..MaskGeometry::default() };
        let dist = build_distribution_with(&geom, nodes, 20_000, seed).unwrap();
        prop_assert!(dist.len() <= nodes);
        for (g, p) in dist.iter() {
            prop_assert!(g > cutoff * geom.g_max && g <= geom.g_max);
            prop_assert!(p >= 0.0);
        }
        let total: f64 = dist.weights().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn resonance_lines_conserve_energy(g in 1.0..20.0f64, g_f in 1.0..20.0f64) {
        let lines = resonance_lines(g, g_f).unwrap();
        prop_assert_eq!(lines.lines.len(), 6);
        for line in &lines.lines {
            prop_assert_eq!(line.pump_photons + line.scan_photons, 3);
            // photon energies relative to the cavity: pump -g_f, scan +g_f dt
            let photons = -f64::from(line.pump_photons) * g_f
                + f64::from(line.scan_photons) * g_f * line.delta_tilde;
            let level = f64::from(line.branch) * 3f64.sqrt() * g;
            prop_assert!((photons - level).abs() < 1e-9 * (g + g_f));
        }
        prop_assert!(lines.lines.windows(2).all(|w| w[0].delta_tilde <= w[1].delta_tilde));
    }

    #[test]
    fn csv_roundtrip_is_exact(rows in prop::collection::vec(prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, 3), 0..20)) {
        let mut table = Table::new(vec!["a".into(), "b".into(), "c".into()]);
        rows.iter().for_each(|r| table.push(r.clone()));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, table.to_csv().unwrap()).unwrap();
        let back = Table::read(&path).unwrap();
        prop_assert_eq!(back, table);
    }
}
