use std::ffi::CStr;
use std::ptr;

use sirconvex_ffi::*;

fn last_error() -> String {
    let p = sir_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn homogeneous_profile_round_trip() {
    unsafe {
        let mut raw = ptr::null_mut();
        assert_eq!(sir_profile_homogeneous(0.5, 0.5, 1000, &mut raw), SirStatus::Ok);
        let mut profile = ptr::null_mut();
        assert_eq!(sir_profile_calibrate(raw, 3.0, &mut profile), SirStatus::Ok);
        sir_profile_free(raw);

        let mut r0 = 0.0;
        assert_eq!(sir_profile_r0(profile, &mut r0), SirStatus::Ok);
        assert!((r0 - 3.0).abs() < 1e-12);

        let mut traj = ptr::null_mut();
        assert_eq!(sir_trajectory_compute(profile, 0, &mut traj), SirStatus::Ok);
        let (mut step, mut found) = (0, false);
        assert_eq!(sir_trajectory_hit_step(traj, &mut step, &mut found), SirStatus::Ok);
        assert!(found);
        assert_eq!(step, 667);

        let mut len = 0;
        assert_eq!(sir_trajectory_len(traj, &mut len), SirStatus::Ok);
        let mut values = vec![0.0; len];
        let mut written = 0;
        assert_eq!(
            sir_trajectory_values(traj, values.as_mut_ptr(), values.len(), &mut written),
            SirStatus::Ok
        );
        assert_eq!(written, len);
        for (n, r) in values.iter().enumerate() {
            assert!((r - 3.0 * (1000 - n) as f64 / 1000.0).abs() < 1e-12);
        }
        let (mut violation, mut at, mut passed) = (f64::NAN, 0, false);
        assert_eq!(
            sir_trajectory_check_convexity(traj, &mut violation, &mut at, &mut passed),
            SirStatus::Ok
        );
        assert!(passed && violation.abs() < 1e-12);

        let mut cost = 0;
        assert_eq!(sir_cost_of_region(profile, 0, 0, &mut cost), SirStatus::Ok);
        assert_eq!(cost, 667);

        sir_trajectory_free(traj);
        sir_profile_free(profile);
    }
}

#[test]
fn gamma_and_explicit_profiles() {
    unsafe {
        let mut gamma = ptr::null_mut();
        assert_eq!(
            sir_profile_gamma(0.1, SirCorrelation::Equal, 100_000, 3.0, 200, &mut gamma),
            SirStatus::Ok
        );
        let mut len = 0;
        assert_eq!(sir_profile_len(gamma, &mut len), SirStatus::Ok);
        assert_eq!(len, 200);
        let mut traj = ptr::null_mut();
        assert_eq!(sir_trajectory_compute(gamma, 10, &mut traj), SirStatus::Ok);
        let (mut step, mut found) = (0, false);
        assert_eq!(sir_trajectory_hit_step(traj, &mut step, &mut found), SirStatus::Ok);
        assert!(found && step < 66_667);
        sir_trajectory_free(traj);
        sir_profile_free(gamma);

        let s = [0.4, 0.2];
        let phi = [0.3, 0.1];
        let w = [1.0, 1.0];
        let mut explicit = ptr::null_mut();
        assert_eq!(
            sir_profile_explicit(s.as_ptr(), phi.as_ptr(), w.as_ptr(), 2, 100, &mut explicit),
            SirStatus::Ok
        );
        let mut r0 = 0.0;
        sir_profile_r0(explicit, &mut r0);
        assert!((r0 - 100.0 * (0.5 * 0.2 * 0.1 + 0.5 * 0.4 * 0.3)).abs() < 1e-12);
        sir_profile_free(explicit);
    }
}

#[test]
fn enumeration_oracle() {
    let s = [0.3, 0.3];
    let mut out = 0.0;
    unsafe {
        assert_eq!(sir_brute_force_r(s.as_ptr(), s.as_ptr(), 2, 0, &mut out), SirStatus::Ok);
        assert!((out - 0.09).abs() < 1e-15);
        let ten = [0.1; 10];
        assert_eq!(
            sir_brute_force_r(ten.as_ptr(), ten.as_ptr(), 10, 0, &mut out),
            SirStatus::Engine
        );
    }
    assert!(last_error().contains("at most 9"));
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut profile = ptr::null_mut();
        assert_eq!(
            sir_profile_homogeneous(1.5, 0.5, 10, &mut profile),
            SirStatus::InvalidArgument
        );
        assert!(profile.is_null());
        assert!(last_error().contains("sigma"));

        assert_eq!(
            sir_profile_homogeneous(0.5, 0.5, 10, ptr::null_mut()),
            SirStatus::NullPointer
        );
        let mut r0 = 0.0;
        assert_eq!(sir_profile_r0(ptr::null(), &mut r0), SirStatus::NullPointer);
        assert!(last_error().contains("profile"));

        assert_eq!(sir_profile_homogeneous(0.5, 0.5, 10, &mut profile), SirStatus::Ok);
        let mut calibrated = ptr::null_mut();
        assert_eq!(
            sir_profile_calibrate(profile, 100.0, &mut calibrated),
            SirStatus::Engine
        );
        assert!(last_error().contains("maximal achievable R0"));

        let mut traj = ptr::null_mut();
        assert_eq!(sir_trajectory_compute(profile, 0, &mut traj), SirStatus::Ok);
        let mut small = [0.0; 2];
        let mut written = 0;
        assert_eq!(
            sir_trajectory_values(traj, small.as_mut_ptr(), small.len(), &mut written),
            SirStatus::BufferTooSmall
        );
        assert!(written > 2);

        let mut cost = 0;
        assert_eq!(sir_cost_of_region(profile, 10, 0, &mut cost), SirStatus::Engine);

        sir_trajectory_free(traj);
        sir_profile_free(profile);
        sir_profile_free(ptr::null_mut());
        sir_trajectory_free(ptr::null_mut());
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(sir_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
