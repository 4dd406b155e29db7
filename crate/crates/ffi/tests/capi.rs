use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use elastoed_ffi::*;

fn small_config() -> *mut ElastoedConfig {
    let config = elastoed_config_new();
    for (k, v) in [("mesh_target", "400"), ("subdomains", "18"), ("sensors", "8"), ("grid_points", "12")] {
        let (k, v) = (CString::new(k).unwrap(), CString::new(v).unwrap());
        assert_eq!(unsafe { elastoed_config_set(config, k.as_ptr(), v.as_ptr()) }, ElastoedStatus::Ok);
    }
    config
}

fn last_error() -> String {
    unsafe {
        let needed = elastoed_last_error(ptr::null_mut(), 0);
        let mut buf = vec![0 as c_char; needed];
        assert_eq!(elastoed_last_error(buf.as_mut_ptr(), buf.len()), needed);
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn evaluate_gradient_and_optimize() {
    let config = small_config();
    let mut problem = ptr::null_mut();
    unsafe {
        assert_eq!(elastoed_problem_new(config, &mut problem), ElastoedStatus::Ok);
        assert_eq!(elastoed_problem_activations(problem), 3);
        assert_eq!(elastoed_problem_parameters(problem), 36);
        let l = elastoed_problem_length(problem);
        assert!((l - (4.0 + 2.0 * std::f64::consts::PI * 1e-3)).abs() < 1e-12);

        let design = [0.4, 1.7, 3.1];
        let mut phi = 0.0;
        assert_eq!(elastoed_problem_evaluate(problem, design.as_ptr(), 3, &mut phi), ElastoedStatus::Ok);
        let mut phi_g = 0.0;
        let mut grad = [0.0; 3];
        assert_eq!(
            elastoed_problem_gradient(problem, design.as_ptr(), 3, &mut phi_g, grad.as_mut_ptr()),
            ElastoedStatus::Ok
        );
        assert_eq!(phi, phi_g);
        let h = 1e-6;
        let (mut plus, mut minus) = (0.0, 0.0);
        elastoed_problem_evaluate(problem, [0.4 + h, 1.7, 3.1].as_ptr(), 3, &mut plus);
        elastoed_problem_evaluate(problem, [0.4 - h, 1.7, 3.1].as_ptr(), 3, &mut minus);
        assert!(((plus - minus) / (2.0 * h) - grad[0]).abs() <= 1e-5 * grad[0].abs().max(1.0));

        let mut best = [0.0; 3];
        let mut best_phi = 0.0;
        assert_eq!(elastoed_problem_optimize(problem, best.as_mut_ptr(), 3, &mut best_phi), ElastoedStatus::Ok);
        assert!(best_phi <= phi);
        let mut again = 0.0;
        elastoed_problem_evaluate(problem, best.as_ptr(), 3, &mut again);
        assert_eq!(again, best_phi);

        assert_eq!(
            elastoed_problem_optimize(problem, best.as_mut_ptr(), 2, &mut best_phi),
            ElastoedStatus::BufferTooSmall
        );
        assert!(last_error().contains("3 needed"));
        elastoed_problem_free(problem);
        elastoed_config_free(config);
    }
}

#[test]
fn errors_are_reported_with_codes_and_messages() {
    unsafe {
        let config = elastoed_config_new();
        let key = CString::new("noise_variance").unwrap();
        let value = CString::new("-1").unwrap();
        assert_eq!(elastoed_config_set(config, key.as_ptr(), value.as_ptr()), ElastoedStatus::Ok);
        let mut problem = ptr::null_mut();
        assert_eq!(elastoed_problem_new(config, &mut problem), ElastoedStatus::InvalidConfig);
        assert!(problem.is_null());
        assert!(last_error().contains("noise"), "{}", last_error());

        let unknown = CString::new("colour").unwrap();
        assert_eq!(elastoed_config_set(config, unknown.as_ptr(), value.as_ptr()), ElastoedStatus::InvalidConfig);
        assert_eq!(elastoed_config_set(ptr::null_mut(), key.as_ptr(), value.as_ptr()), ElastoedStatus::NullPointer);
        assert_eq!(elastoed_config_set(config, key.as_ptr(), ptr::null()), ElastoedStatus::NullPointer);
        let bad_utf8 = [0xffu8 as c_char, 0];
        assert_eq!(elastoed_config_set(config, bad_utf8.as_ptr(), value.as_ptr()), ElastoedStatus::InvalidUtf8);

        let text = CString::new("sensors = 8\nsubdomains = x\n").unwrap();
        let mut parsed = ptr::null_mut();
        assert_eq!(elastoed_config_parse(text.as_ptr(), &mut parsed), ElastoedStatus::InvalidConfig);
        assert!(last_error().contains("line 2"));

        let mut phi = 0.0;
        assert_eq!(elastoed_problem_evaluate(ptr::null(), [1.0].as_ptr(), 1, &mut phi), ElastoedStatus::NullPointer);
        assert!(elastoed_problem_length(ptr::null()).is_nan());
        elastoed_config_free(config);
        elastoed_config_free(ptr::null_mut());
        elastoed_problem_free(ptr::null_mut());
    }
}

#[test]
fn empty_design_is_a_dimension_error() {
    let config = small_config();
    unsafe {
        let mut problem = ptr::null_mut();
        assert_eq!(elastoed_problem_new(config, &mut problem), ElastoedStatus::Ok);
        let mut phi = 0.0;
        let mut grad = [0.0; 1];
        let status = elastoed_problem_gradient(problem, [0.0].as_ptr(), 0, &mut phi, grad.as_mut_ptr());
        assert_eq!(status, ElastoedStatus::Dimension, "{}", last_error());
        elastoed_problem_free(problem);
        elastoed_config_free(config);
    }
}

#[test]
fn run_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config();
    let key = CString::new("output_dir").unwrap();
    let value = CString::new(dir.path().to_str().unwrap()).unwrap();
    unsafe {
        assert_eq!(elastoed_config_set(config, key.as_ptr(), value.as_ptr()), ElastoedStatus::Ok);
        let mut phi = 0.0;
        assert_eq!(elastoed_run(config, &mut phi), ElastoedStatus::Ok);
        assert!(phi > 0.0);
        elastoed_config_free(config);
    }
    for name in ["config.txt", "trace.txt", "design.txt", "outline.txt", "mesh.txt"] {
        assert!(dir.path().join(name).is_file());
    }
}

#[test]
fn version_is_the_package_version() {
    let v = unsafe { CStr::from_ptr(elastoed_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "elastoed.h"

int main(void) {
    ElastoedConfig *config = elastoed_config_new();
    if (elastoed_config_set(config, "mesh_target", "400") != ELASTOED_STATUS_OK) return 1;
    if (elastoed_config_set(config, "subdomains", "18") != ELASTOED_STATUS_OK) return 1;
    if (elastoed_config_set(config, "sensors", "8") != ELASTOED_STATUS_OK) return 1;
    if (elastoed_config_set(config, "bogus", "1") != ELASTOED_STATUS_INVALID_CONFIG) return 2;
    char message[256];
    if (elastoed_last_error(message, sizeof message) > sizeof message) return 3;
    ElastoedProblem *problem = NULL;
    if (elastoed_problem_new(config, &problem) != ELASTOED_STATUS_OK) return 4;
    double design[2] = {0.5, 2.5};
    double phi = 0.0;
    if (elastoed_problem_evaluate(problem, design, 2, &phi) != ELASTOED_STATUS_OK) return 5;
    printf("%s %.6f\n", message, phi);
    elastoed_problem_free(problem);
    elastoed_config_free(config);
    return 0;
}
"#;

/// Compiles a C program against the generated header and the static library.
#[test]
fn header_compiles_and_links_from_c() {
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().and_then(|d| d.parent()).unwrap();
    let archive = lib_dir.join("libelastoed_ffi.a");
    assert!(archive.is_file(), "static library missing at {}", archive.display());
    let dir = tempfile::tempdir().unwrap();
    let source = dir.path().join("smoke.c");
    std::fs::write(&source, C_PROGRAM).unwrap();
    let binary = dir.path().join("smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(crate_dir.join("include"))
        .arg(&source)
        .arg(&archive)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&binary)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&binary).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("invalid configuration: unknown key 'bogus'"), "{stdout}");
}
