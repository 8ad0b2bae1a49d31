use std::ffi::CStr;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use pcs_ffi::*;

fn params() -> PcsParams {
    let mut p = std::mem::MaybeUninit::<PcsParams>::uninit();
    assert_eq!(unsafe { pcs_params_default(p.as_mut_ptr()) }, PcsStatus::Ok);
    let mut p = unsafe { p.assume_init() };
    p.n_max = 4;
    p.m_max = 2;
    p
}

fn last_error() -> String {
    let e = pcs_last_error();
    assert!(!e.is_null());
    unsafe { CStr::from_ptr(e) }.to_string_lossy().into_owned()
}

#[test]
fn default_params_match_core() {
    let p = params();
    assert_eq!((p.g_f, p.g, p.kappa, p.gamma), (9.0, 9.0, 1.0, 2.0));
    assert_eq!((p.drive1, p.drive2), (0.5, 0.5));
}

#[test]
fn rates_match_core() {
    let mut p = params();
    p.delta_tilde = 2f64.sqrt() - 1.0;
    let mut w = 0.0;
    assert_eq!(unsafe { pcs_w_multi(&p, 2, &mut w) }, PcsStatus::Ok);
    let core = pcs_core::SystemParams::new(9.0, 2.0, 0.5, 0.5, p.delta_tilde).with_truncation(4, 2);
    let expect = pcs_core::correlations::w_multi(2, &core).unwrap().value;
    assert_eq!(w, expect);
    let mut d = 0.0;
    assert_eq!(unsafe { pcs_difference_rate(&p, 2, &mut d) }, PcsStatus::Ok);
    assert!(d < w && d > 0.0);
    let mut c = 0.0;
    assert_eq!(unsafe { pcs_windowed_rate(&p, 1e-3, PcsWindow::Conditional, &mut c) }, PcsStatus::Ok);
    assert!(c.is_finite());
}

#[test]
fn invalid_parameters_report_status_and_message() {
    let mut p = params();
    p.kappa = -1.0;
    let mut w = 0.0;
    assert_eq!(unsafe { pcs_w_multi(&p, 2, &mut w) }, PcsStatus::InvalidArgument);
    assert!(last_error().contains("kappa"));
    let mut p = params();
    p.n_max = 1;
    assert_eq!(unsafe { pcs_w_multi(&p, 2, &mut w) }, PcsStatus::InvalidTruncation);
    assert_eq!(unsafe { pcs_w_multi(ptr::null(), 2, &mut w) }, PcsStatus::NullPointer);
    assert_eq!(unsafe { pcs_w_multi(&params(), 2, ptr::null_mut()) }, PcsStatus::NullPointer);
    let name = unsafe { CStr::from_ptr(pcs_status_name(PcsStatus::BufferTooSmall)) };
    assert_eq!(name.to_str().unwrap(), "buffer too small");
}

#[test]
fn resonance_lines_query_and_fill() {
    let mut len = 0usize;
    let mut pump_only = true;
    let s = unsafe { pcs_resonance_lines(9.0, 9.0, ptr::null_mut(), 0, &mut len, &mut pump_only) };
    assert_eq!(s, PcsStatus::Ok);
    assert_eq!(len, 6);
    assert!(!pump_only);
    let mut small = [PcsResonance {
        pump_photons: 0,
        scan_photons: 0,
        branch: 0,
        delta_tilde: 0.0,
    }; 3];
    let s = unsafe { pcs_resonance_lines(9.0, 9.0, small.as_mut_ptr(), 3, &mut len, ptr::null_mut()) };
    assert_eq!(s, PcsStatus::BufferTooSmall);
    let mut lines = [small[0]; 6];
    let s = unsafe { pcs_resonance_lines(9.0, 9.0, lines.as_mut_ptr(), 6, &mut len, ptr::null_mut()) };
    assert_eq!(s, PcsStatus::Ok);
    let r3 = 3f64.sqrt();
    let expect = [-1.0 / r3, (1.0 - r3) / 2.0, 2.0 - r3, 1.0 / r3, (1.0 + r3) / 2.0, 2.0 + r3];
    for (l, e) in lines.iter().zip(expect) {
        assert!((l.delta_tilde - e).abs() < 1e-14);
        assert_eq!(l.pump_photons + l.scan_photons, 3);
    }
    assert_eq!(
        unsafe { pcs_resonance_lines(-1.0, 9.0, ptr::null_mut(), 0, &mut len, ptr::null_mut()) },
        PcsStatus::InvalidArgument
    );
}

#[test]
fn distribution_handles() {
    let mut d: *mut PcsDistribution = ptr::null_mut();
    assert_eq!(unsafe { pcs_distribution_mask(10.0, 8, 50_000, 3, &mut d) }, PcsStatus::Ok);
    let mut n = 0usize;
    assert_eq!(unsafe { pcs_distribution_len(d, &mut n) }, PcsStatus::Ok);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    assert_eq!(
        unsafe { pcs_distribution_get(d, nodes.as_mut_ptr(), weights.as_mut_ptr(), n - 1) },
        PcsStatus::BufferTooSmall
    );
    assert_eq!(
        unsafe { pcs_distribution_get(d, nodes.as_mut_ptr(), weights.as_mut_ptr(), n) },
        PcsStatus::Ok
    );
    assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(nodes.iter().all(|&g| g > 7.0 && g <= 10.0));
    unsafe { pcs_distribution_free(d) };
    unsafe { pcs_distribution_free(ptr::null_mut()) };

    let mut d: *mut PcsDistribution = ptr::null_mut();
    assert_eq!(unsafe { pcs_distribution_mask(10.0, 2, 1000, 3, &mut d) }, PcsStatus::InvalidArgument);
    assert!(d.is_null());
    let (g, w) = ([8.0, 9.0], [0.25, 0.5]);
    assert_eq!(
        unsafe { pcs_distribution_from_nodes(g.as_ptr(), w.as_ptr(), 2, &mut d) },
        PcsStatus::InvalidArgument
    );
    assert!(last_error().contains("sum to 1"));
}

#[test]
fn pvr_handle_round_trip() {
    let p = params();
    let (g, w) = ([9.0], [1.0]);
    let mut d: *mut PcsDistribution = ptr::null_mut();
    assert_eq!(unsafe { pcs_distribution_from_nodes(g.as_ptr(), w.as_ptr(), 1, &mut d) }, PcsStatus::Ok);
    let mut ev: *mut PcsPvr = ptr::null_mut();
    assert_eq!(unsafe { pcs_pvr_new(&p, d, &mut ev) }, PcsStatus::Ok);
    let mut r = 0.0;
    assert_eq!(unsafe { pcs_pvr_ratio(ev, 0.1, PcsWindow::Conditional, &mut r) }, PcsStatus::Ok);
    assert!(r > 0.0);
    assert_eq!(unsafe { pcs_pvr_ratio(ev, -1.0, PcsWindow::Conditional, &mut r) }, PcsStatus::InvalidArgument);
    let (mut tau, mut best, mut edge) = (0.0, 0.0, true);
    assert_eq!(
        unsafe { pcs_pvr_optimize(ev, PcsWindow::Unconditional, &mut tau, &mut best, &mut edge) },
        PcsStatus::Ok
    );
    assert!(tau > 1e-3 && tau < 10.0 && !edge && best > 0.0);
    unsafe {
        pcs_pvr_free(ev);
        pcs_distribution_free(d);
    }
}

fn target_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = manifest.join("include").join("pcs_sim.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["pcs_last_error", "pcs_pvr_new", "pcs_distribution_free", "PCS_STATUS_OK"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let lib = target_dir().join("libpcs_ffi.a");
    assert!(lib.is_file(), "static library not found at {}", lib.display());
    let tmp = tempfile::tempdir().unwrap();
    let exe = tmp.path().join("smoke");
    let status = Command::new("cc")
        .arg("-std=c11")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests").join("c").join("smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
