use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use repchain_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(repchain_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

fn params(p_gen: f64, p_swap: f64, n: u32) -> *mut RepchainParams {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { repchain_params_new(p_gen, p_swap, n, &mut p) }, RepchainStatus::Ok);
    p
}

#[test]
fn distributions_round_trip() {
    unsafe {
        let p = params(0.5, 0.5, 1);
        assert_eq!(repchain_params_set_t_trunc(p, 64), RepchainStatus::Ok);
        let mut d = ptr::null_mut();
        assert_eq!(repchain_waiting_time(p, &mut d), RepchainStatus::Ok);
        assert_eq!(repchain_distributions_levels(d), 2);
        let len = repchain_distributions_len(d);
        assert_eq!(len, 65);

        let mut pmf = vec![0.0; len];
        assert_eq!(repchain_distributions_pmf(d, 1, pmf.as_mut_ptr(), len), RepchainStatus::Ok);
        assert!((pmf[1] - 0.125).abs() < 1e-15);
        assert!((pmf[2] - 0.171875).abs() < 1e-15);

        let mut cdf = vec![0.0; len];
        assert_eq!(repchain_distributions_cdf(d, 1, cdf.as_mut_ptr(), len), RepchainStatus::Ok);
        assert!((cdf[2] - 0.296875).abs() < 1e-15);

        let mut short = vec![0.0; 3];
        assert_eq!(
            repchain_distributions_pmf(d, 1, short.as_mut_ptr(), 3),
            RepchainStatus::BufferTooSmall
        );
        assert!(last_error().contains("need 65"));
        assert_eq!(
            repchain_distributions_pmf(d, 2, pmf.as_mut_ptr(), len),
            RepchainStatus::OutOfRange
        );

        let mut w = ptr::null_mut();
        assert_eq!(repchain_werner_profile(p, d, &mut w), RepchainStatus::Ok);
        let mut werner = vec![0.0; len];
        assert_eq!(repchain_werner_profile_level(w, 1, werner.as_mut_ptr(), len), RepchainStatus::Ok);
        assert!(werner[0].is_nan());
        assert_eq!(werner[1], 1.0);

        repchain_werner_profile_free(w);
        repchain_distributions_free(d);
        repchain_params_free(p);
    }
}

#[test]
fn invalid_arguments_report_messages() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(repchain_params_new(1.5, 0.5, 1, &mut p), RepchainStatus::InvalidArgument);
        assert!(p.is_null());
        assert!(last_error().contains("p_gen"));

        let p = params(0.5, 0.5, 1);
        assert_eq!(repchain_params_set_w0(p, 2.0), RepchainStatus::InvalidArgument);
        assert_eq!(repchain_params_set_t_coh(p, f64::INFINITY), RepchainStatus::Ok);
        assert_eq!(repchain_params_set_distillation(p, 1), RepchainStatus::Ok);
        let mut d = ptr::null_mut();
        assert_eq!(repchain_waiting_time(p, &mut d), RepchainStatus::Unsupported);
        assert!(d.is_null());

        assert_eq!(repchain_waiting_time(ptr::null(), &mut d), RepchainStatus::NullPointer);
        assert_eq!(repchain_waiting_time(p, ptr::null_mut()), RepchainStatus::NullPointer);
        repchain_params_free(p);
        repchain_params_free(ptr::null_mut());
    }
}

#[test]
fn planning_helpers() {
    unsafe {
        let mut m = 0;
        assert_eq!(repchain_required_samples(0.01, 0.01, &mut m), RepchainStatus::Ok);
        assert_eq!(m, 26492);

        let p = params(0.1, 0.5, 4);
        let mut t = 0;
        assert_eq!(repchain_choose_truncation(p, 0.99, &mut t), RepchainStatus::Ok);
        assert_eq!(t, 256_000);
        assert_eq!(repchain_choose_truncation(p, 1.0, &mut t), RepchainStatus::InvalidArgument);

        assert_eq!(repchain_params_set_t_trunc(p, 0), RepchainStatus::Ok);
        let (mut lo, mut hi) = (f64::NAN, f64::NAN);
        assert_eq!(repchain_mean_bounds(p, &mut lo, &mut hi), RepchainStatus::Ok);
        assert_eq!(lo, 0.0);
        assert!((hi - 2560.0).abs() < 1e-9);
        repchain_params_free(p);
    }
}

#[test]
fn campaign_is_reproducible() {
    unsafe {
        let p = params(0.3, 0.6, 2);
        assert_eq!(repchain_params_set_w0(p, 0.9), RepchainStatus::Ok);
        let run = || {
            let mut c = ptr::null_mut();
            assert_eq!(repchain_run_campaign(p, 500, 9, &mut c), RepchainStatus::Ok);
            let len = repchain_campaign_len(c);
            let mut times = vec![0u64; len];
            let mut werner = vec![0.0; len];
            assert_eq!(
                repchain_campaign_samples(c, times.as_mut_ptr(), werner.as_mut_ptr(), len),
                RepchainStatus::Ok
            );
            let (mut mean, mut se, mut eps) = (0.0, 0.0, 0.0);
            assert_eq!(repchain_campaign_summary(c, &mut mean, &mut se, &mut eps), RepchainStatus::Ok);
            repchain_campaign_free(c);
            (times, werner, mean, se, eps)
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
        assert_eq!(a.0.len(), 500);
        assert!(a.0.iter().all(|&t| t >= 1));
        assert!(a.4 > 0.07 && a.4 < 0.08);
        repchain_params_free(p);
    }
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/repchain.h");
    let text = std::fs::read_to_string(&header).expect("header generated by build script");
    for name in [
        "repchain_params_new",
        "repchain_waiting_time",
        "repchain_run_campaign",
        "repchain_last_error_message",
        "REPCHAIN_STATUS_BUFFER_TOO_SMALL",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }

    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("header-check");
    std::fs::create_dir_all(&dir).unwrap();
    let source = dir.join("check.c");
    std::fs::write(
        &source,
        "#include \"repchain.h\"\n\
         int main(void) {\n\
           RepchainParams *p = 0;\n\
           RepchainStatus s = repchain_params_new(0.5, 0.5, 1, &p);\n\
           repchain_params_free(p);\n\
           return s == REPCHAIN_STATUS_OK ? 0 : 1;\n\
         }\n",
    )
    .unwrap();
    let include = header.parent().unwrap();
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(include)
        .arg(&source)
        .status();
    match status {
        Ok(s) => assert!(s.success(), "header failed to compile"),
        Err(_) => eprintln!("no C compiler found; skipping compile check"),
    }
}
