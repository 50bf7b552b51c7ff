//! C interface to the `sirconvex` engine.
//!
//! Profiles and trajectories are opaque heap handles owned by the caller and
//! released with the matching `*_free` function. Every fallible call returns a
//! [`SirStatus`]; on failure a description is available from
//! [`sir_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sirconvex::density::{r_trajectory_with, RTrajectory, TrajectoryOptions};
use sirconvex::diagnostics::check_convexity;
use sirconvex::error::Error;
use sirconvex::interventions::{cost_of_region, Region};
use sirconvex::profile::{
    build_profile, calibrate_r0, Correlation, Coupling, ProfileSpec, SpreadingAtom, SpreadingProfile,
};
use sirconvex::sim::brute_force_r;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SirStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The engine rejected the input or could not proceed.
    Engine = 3,
    /// A caller-provided buffer is too small; the required length was written.
    BufferTooSmall = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SirCorrelation {
    Equal = 0,
    Independent = 1,
}

/// Opaque spreading profile.
pub struct SirProfile(SpreadingProfile);

/// Opaque `R(n)` trajectory.
pub struct SirTrajectory(RTrajectory);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

struct Failure(SirStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InvalidParameter { .. } => SirStatus::InvalidArgument,
            _ => SirStatus::Engine,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SirStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> SirStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => SirStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SirStatus::Panic
        }
    }
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn borrow<'a, T>(handle: *const T, what: &str) -> Result<&'a T, Failure> {
    handle.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(data: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

fn boxed(profile: SpreadingProfile) -> *mut SirProfile {
    Box::into_raw(Box::new(SirProfile(profile)))
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sir_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sir_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    VERSION.as_ptr()
}

/// Single-atom profile `(sigma, iota)`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sir_profile_homogeneous(
    sigma: f64,
    iota: f64,
    n0: u64,
    out: *mut *mut SirProfile,
) -> SirStatus {
    guard(|| {
        let profile = build_profile(&ProfileSpec::homogeneous(sigma, iota, n0))?;
        write(out, boxed(profile), "out")
    })
}

/// Gamma profile of shape `k` quantized to `atom_count` atoms and calibrated
/// to `target_r0`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sir_profile_gamma(
    k: f64,
    correlation: SirCorrelation,
    n0: u64,
    target_r0: f64,
    atom_count: usize,
    out: *mut *mut SirProfile,
) -> SirStatus {
    guard(|| {
        let correlation = match correlation {
            SirCorrelation::Equal => Correlation::Equal,
            SirCorrelation::Independent => Correlation::Independent,
        };
        let spec = ProfileSpec::gamma(k, correlation, n0, target_r0).with_atom_count(atom_count);
        write(out, boxed(build_profile(&spec)?), "out")
    })
}

/// Profile from `len` atoms given as parallel arrays. Masses are normalized.
///
/// # Safety
/// `s`, `phi` and `w` must point to `len` readable values; `out` must be valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn sir_profile_explicit(
    s: *const f64,
    phi: *const f64,
    w: *const f64,
    len: usize,
    n0: u64,
    out: *mut *mut SirProfile,
) -> SirStatus {
    guard(|| {
        let (s, phi, w) = (slice(s, len, "s")?, slice(phi, len, "phi")?, slice(w, len, "w")?);
        let atoms = (0..len).map(|i| SpreadingAtom::new(s[i], phi[i], w[i])).collect();
        write(out, boxed(SpreadingProfile::new(atoms, n0, Coupling::Fixed)?), "out")
    })
}

/// New profile rescaled so that `R0 == target_r0`.
///
/// # Safety
/// `profile` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sir_profile_calibrate(
    profile: *const SirProfile,
    target_r0: f64,
    out: *mut *mut SirProfile,
) -> SirStatus {
    guard(|| {
        let profile = borrow(profile, "profile")?;
        write(out, boxed(calibrate_r0(&profile.0, target_r0)?), "out")
    })
}

/// # Safety
/// `profile` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sir_profile_r0(profile: *const SirProfile, out: *mut f64) -> SirStatus {
    guard(|| write(out, borrow(profile, "profile")?.0.r0(), "out"))
}

/// # Safety
/// `profile` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sir_profile_len(profile: *const SirProfile, out: *mut usize) -> SirStatus {
    guard(|| write(out, borrow(profile, "profile")?.0.len(), "out"))
}

/// Releases a profile. Null is ignored.
///
/// # Safety
/// `profile` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sir_profile_free(profile: *mut SirProfile) {
    if !profile.is_null() {
        drop(Box::from_raw(profile));
    }
}

/// `R(n)` from step 0 until it drops below 1, plus `overshoot` steps.
///
/// # Safety
/// `profile` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sir_trajectory_compute(
    profile: *const SirProfile,
    overshoot: u64,
    out: *mut *mut SirTrajectory,
) -> SirStatus {
    guard(|| {
        let profile = borrow(profile, "profile")?;
        let options = TrajectoryOptions {
            overshoot,
            max_steps: None,
        };
        let traj = r_trajectory_with(&profile.0, options)?;
        write(out, Box::into_raw(Box::new(SirTrajectory(traj))), "out")
    })
}

/// # Safety
/// `traj` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sir_trajectory_len(traj: *const SirTrajectory, out: *mut usize) -> SirStatus {
    guard(|| write(out, borrow(traj, "traj")?.0.len(), "out"))
}

/// Copies `R(0), R(1), ...` into `buffer`. Writes the number of values to
/// `written`; if `capacity` is too small nothing is copied and
/// `SIR_STATUS_BUFFER_TOO_SMALL` is returned.
///
/// # Safety
/// `traj` must be a live handle, `buffer` valid for `capacity` writes and
/// `written` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sir_trajectory_values(
    traj: *const SirTrajectory,
    buffer: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> SirStatus {
    guard(|| {
        let values = &borrow(traj, "traj")?.0.values;
        write(written, values.len(), "written")?;
        if capacity < values.len() {
            return Err(Failure(
                SirStatus::BufferTooSmall,
                format!("need {} values, capacity {capacity}", values.len()),
            ));
        }
        if !values.is_empty() {
            if buffer.is_null() {
                return Err(null("buffer"));
            }
            ptr::copy_nonoverlapping(values.as_ptr(), buffer, values.len());
        }
        Ok(())
    })
}

/// First step with `R < 1`. `found` is set to false when `R` never crossed.
///
/// # Safety
/// `traj` must be a live handle; `step` and `found` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sir_trajectory_hit_step(
    traj: *const SirTrajectory,
    step: *mut u64,
    found: *mut bool,
) -> SirStatus {
    guard(|| {
        let hit = borrow(traj, "traj")?.0.hit_step;
        write(step, hit.unwrap_or(0), "step")?;
        write(found, hit.is_some(), "found")
    })
}

/// Largest growth of the per-step decrease of `R` and where it occurs.
///
/// # Safety
/// `traj` must be a live handle; the outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sir_trajectory_check_convexity(
    traj: *const SirTrajectory,
    max_violation: *mut f64,
    location: *mut u64,
    passed: *mut bool,
) -> SirStatus {
    guard(|| {
        let report = check_convexity(&borrow(traj, "traj")?.0.values)?;
        write(max_violation, report.max_violation, "max_violation")?;
        write(location, report.location, "location")?;
        write(passed, report.passed, "passed")
    })
}

/// Releases a trajectory. Null is ignored.
///
/// # Safety
/// `traj` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sir_trajectory_free(traj: *mut SirTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Infections before the herd-immunity crossing with `vaccines` doses given
/// at step `timing`.
///
/// # Safety
/// `profile` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sir_cost_of_region(
    profile: *const SirProfile,
    vaccines: u64,
    timing: u64,
    out: *mut u64,
) -> SirStatus {
    guard(|| {
        let region = Region::new("region", borrow(profile, "profile")?.0.clone());
        write(out, cost_of_region(&region, vaccines, timing)?, "out")
    })
}

/// Exact `R(n)` of at most nine individuals by enumeration.
///
/// # Safety
/// `s` and `phi` must point to `len` readable values; `out` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn sir_brute_force_r(
    s: *const f64,
    phi: *const f64,
    len: usize,
    n: usize,
    out: *mut f64,
) -> SirStatus {
    guard(|| {
        let (s, phi) = (slice(s, len, "s")?, slice(phi, len, "phi")?);
        let nodes: Vec<(f64, f64)> = s.iter().copied().zip(phi.iter().copied()).collect();
        write(out, brute_force_r(&nodes, n)?, "out")
    })
}
