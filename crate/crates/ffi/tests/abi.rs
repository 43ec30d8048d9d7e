//! The C ABI exercised from Rust through the same symbols a C caller links.

use std::ffi::CStr;
use std::ptr;

use trajsample_ffi::*;

/// Two models over horizon 2: three proposals near y = 0, one at y = 10.
fn two_models() -> *mut TsMixture {
    let sizes = [3usize, 1];
    let weights = [1.0, 1.0, 2.0, 5.0];
    let coords = [
        0.0, 0.0, 1.0, 0.0, //
        0.0, 0.2, 1.0, 0.2, //
        0.0, -0.2, 1.0, -0.2, //
        0.0, 10.0, 1.0, 10.0,
    ];
    let mut handle = ptr::null_mut();
    let status = unsafe { ts_mixture_new(sizes.as_ptr(), 2, weights.as_ptr(), coords.as_ptr(), 2, &mut handle) };
    assert_eq!(status, TsStatus::Ok);
    assert!(!handle.is_null());
    handle
}

fn last_error() -> String {
    let p = ts_last_error_message();
    assert!(!p.is_null(), "no error recorded");
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

#[test]
fn mixture_shape_and_normalized_weights() {
    let mix = two_models();
    let (mut len, mut horizon) = (0, 0);
    assert_eq!(unsafe { ts_mixture_shape(mix, &mut len, &mut horizon) }, TsStatus::Ok);
    assert_eq!((len, horizon), (4, 2));
    let mut w = [0.0; 4];
    assert_eq!(unsafe { ts_mixture_weights(mix, w.as_mut_ptr(), 4) }, TsStatus::Ok);
    assert_eq!(w, [0.125, 0.125, 0.25, 0.5]);
    assert_eq!(unsafe { ts_mixture_weights(mix, w.as_mut_ptr(), 3) }, TsStatus::InvalidArgument);
    unsafe { ts_mixture_free(mix) };
}

#[test]
fn risk_of_known_candidates() {
    let mix = two_models();
    // one candidate on y = 0 and one on y = 10
    let cands = [0.0, 0.0, 1.0, 0.0, 0.0, 10.0, 1.0, 10.0];
    let mut r = f64::NAN;
    assert_eq!(unsafe { ts_risk(mix, cands.as_ptr(), 2, TS_LOSS_MIN_ADE, 2, &mut r) }, TsStatus::Ok);
    assert!((r - (0.125 * 0.2 + 0.25 * 0.2)).abs() < 1e-12, "{r}");
    // only the first candidate counts with k = 1
    assert_eq!(unsafe { ts_risk(mix, cands.as_ptr(), 2, TS_LOSS_MIN_FDE, 1, &mut r) }, TsStatus::Ok);
    assert!((r - (0.125 * 0.2 + 0.25 * 0.2 + 0.5 * 10.0)).abs() < 1e-12, "{r}");
    unsafe { ts_mixture_free(mix) };
}

#[test]
fn optimize_covers_both_modes() {
    let mix = two_models();
    let mut out = [0.0; 8];
    let mut r = f64::NAN;
    let status = unsafe { ts_optimize(mix, 2, TS_LOSS_MIN_ADE, 2, 7, out.as_mut_ptr(), &mut r) };
    assert_eq!(status, TsStatus::Ok);
    // the heavier y = 10 proposal ranks first
    assert!((out[1] - 10.0).abs() < 1e-6 && (out[5]).abs() < 0.2 + 1e-9, "{out:?}");
    let mut check = f64::NAN;
    assert_eq!(unsafe { ts_risk(mix, out.as_ptr(), 2, TS_LOSS_MIN_ADE, 2, &mut check) }, TsStatus::Ok);
    assert!((check - r).abs() < 1e-12);
    // seeded: same seed, same bits
    let mut again = [0.0; 8];
    unsafe { ts_optimize(mix, 2, TS_LOSS_MIN_ADE, 2, 7, again.as_mut_ptr(), ptr::null_mut()) };
    assert_eq!(out, again);
    unsafe { ts_mixture_free(mix) };
}

#[test]
fn every_sampler_code_runs() {
    let mix = two_models();
    for code in [
        TS_SAMPLER_UNIFORM,
        TS_SAMPLER_CATEGORICAL,
        TS_SAMPLER_TOPK,
        TS_SAMPLER_KMEANS,
        TS_SAMPLER_NMS,
        TS_SAMPLER_NMS_KMEANS,
        TS_SAMPLER_OURS,
    ] {
        let mut out = [f64::NAN; 4];
        assert_eq!(unsafe { ts_sample(mix, code, 1, 3, out.as_mut_ptr()) }, TsStatus::Ok, "sampler {code}");
        assert!(out.iter().all(|v| v.is_finite()));
    }
    let mut out = [0.0; 4];
    assert_eq!(unsafe { ts_sample(mix, TS_SAMPLER_TOPK, 1, 0, out.as_mut_ptr()) }, TsStatus::Ok);
    assert_eq!(out, [0.0, 10.0, 1.0, 10.0]);
    assert_eq!(unsafe { ts_sample(mix, 99, 1, 0, out.as_mut_ptr()) }, TsStatus::InvalidArgument);
    assert!(last_error().contains("sampler code 99"));
    unsafe { ts_mixture_free(mix) };
}

#[test]
fn min_ade_k_matches_hand_computation() {
    let reference = [0.0, 0.0, 1.0, 0.0];
    let cands = [0.0, 3.0, 1.0, 3.0, 0.0, 1.0, 1.0, 1.0];
    let mut v = f64::NAN;
    assert_eq!(unsafe { ts_min_ade_k(reference.as_ptr(), cands.as_ptr(), 2, 2, 2, &mut v) }, TsStatus::Ok);
    assert_eq!(v, 1.0);
    assert_eq!(unsafe { ts_min_ade_k(reference.as_ptr(), cands.as_ptr(), 2, 2, 1, &mut v) }, TsStatus::Ok);
    assert_eq!(v, 3.0);
    assert_eq!(unsafe { ts_min_ade_k(reference.as_ptr(), cands.as_ptr(), 2, 2, 3, &mut v) }, TsStatus::InvalidArgument);
}

#[test]
fn errors_set_status_and_message() {
    let sizes = [1usize];
    let coords = [0.0, 0.0];
    let mut handle = ptr::null_mut();

    let status = unsafe { ts_mixture_new(sizes.as_ptr(), 1, ptr::null(), coords.as_ptr(), 1, &mut handle) };
    assert_eq!(status, TsStatus::NullPointer);
    assert!(last_error().contains("weights"));
    assert!(handle.is_null());

    let negative = [-1.0];
    let status = unsafe { ts_mixture_new(sizes.as_ptr(), 1, negative.as_ptr(), coords.as_ptr(), 1, &mut handle) };
    assert_eq!(status, TsStatus::InvalidData);
    assert!(last_error().contains("weight"));

    let zero = [0.0];
    let status = unsafe { ts_mixture_new(sizes.as_ptr(), 1, zero.as_ptr(), coords.as_ptr(), 1, &mut handle) };
    assert_eq!(status, TsStatus::InvalidData);

    let nan = [f64::NAN, 0.0];
    let one = [1.0];
    let status = unsafe { ts_mixture_new(sizes.as_ptr(), 1, one.as_ptr(), nan.as_ptr(), 1, &mut handle) };
    assert_eq!(status, TsStatus::InvalidData);

    let status = unsafe { ts_mixture_new(sizes.as_ptr(), 0, one.as_ptr(), coords.as_ptr(), 1, &mut handle) };
    assert_eq!(status, TsStatus::InvalidArgument);

    // success clears the message
    let status = unsafe { ts_mixture_new(sizes.as_ptr(), 1, one.as_ptr(), coords.as_ptr(), 1, &mut handle) };
    assert_eq!(status, TsStatus::Ok);
    assert!(ts_last_error_message().is_null());

    let mut r = 0.0;
    assert_eq!(unsafe { ts_risk(ptr::null(), coords.as_ptr(), 1, 0, 1, &mut r) }, TsStatus::NullPointer);
    assert_eq!(unsafe { ts_risk(handle, coords.as_ptr(), 1, 9, 1, &mut r) }, TsStatus::InvalidArgument);
    assert_eq!(unsafe { ts_risk(handle, coords.as_ptr(), 1, 0, 2, &mut r) }, TsStatus::InvalidArgument);
    let mut out = [0.0; 4];
    // k = 2 candidates from a single proposal
    assert_eq!(unsafe { ts_sample(handle, TS_SAMPLER_TOPK, 2, 0, out.as_mut_ptr()) }, TsStatus::InvalidArgument);
    assert_eq!(unsafe { ts_optimize(handle, 1, 0, 1, 0, ptr::null_mut(), ptr::null_mut()) }, TsStatus::NullPointer);
    unsafe {
        ts_mixture_free(handle);
        ts_mixture_free(ptr::null_mut());
    }
}

#[test]
fn errors_are_per_thread() {
    let mut r = 0.0;
    assert_eq!(unsafe { ts_risk(ptr::null(), ptr::null(), 0, 0, 1, &mut r) }, TsStatus::NullPointer);
    std::thread::spawn(|| assert!(ts_last_error_message().is_null())).join().unwrap();
    assert!(last_error().contains("mixture"));
}

#[test]
fn header_declares_the_exported_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/trajsample.h")).unwrap();
    for symbol in [
        "typedef struct TsMixture TsMixture;",
        "TS_STATUS_OK = 0",
        "TS_STATUS_PANIC = 4",
        "#define TS_SAMPLER_OURS 6",
        "#define TS_LOSS_MIN_FDE 1",
        "ts_mixture_new(",
        "void ts_mixture_free(struct TsMixture *mixture);",
        "ts_mixture_shape(",
        "ts_mixture_weights(",
        "ts_risk(",
        "ts_optimize(",
        "ts_sample(",
        "ts_min_ade_k(",
        "const char *ts_last_error_message(void);",
    ] {
        assert!(header.contains(symbol), "missing `{symbol}`:\n{header}");
    }
}

/// Compiles `tests/c/smoke.c` against the header and the static library and
/// runs it. Skipped when no C compiler is installed.
#[test]
fn c_program_links_and_runs() {
    let manifest = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    // the test binary sits in target/<profile>/deps, next to the library
    let exe = std::env::current_exe().unwrap();
    let deps = exe.parent().unwrap();
    let Some(staticlib) = [deps, deps.parent().unwrap()]
        .iter()
        .map(|dir| dir.join("libtrajsample_ffi.a"))
        .find(|p| p.exists())
    else {
        eprintln!("skipping: libtrajsample_ffi.a was not built");
        return;
    };
    let exe = tempfile::tempdir().unwrap();
    let binary = exe.path().join("smoke");
    let compiled = std::process::Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&staticlib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&binary)
        .output();
    let compiled = match compiled {
        Ok(out) => out,
        Err(err) => {
            eprintln!("skipping: no C compiler ({err})");
            return;
        }
    };
    assert!(compiled.status.success(), "{}", String::from_utf8_lossy(&compiled.stderr));
    let run = std::process::Command::new(&binary).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("risk "));
}
