//! C ABI over `sme-core`.
//!
//! Every handle is opaque and owned by the caller once created; release it
//! with the matching `*_free`. Fallible calls return an [`SmeStatus`]; the
//! message of the last failure on the calling thread is available through
//! [`sme_last_error`]. Panics are caught at the boundary and reported as
//! [`SmeStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sme_core::config::{experiment_from, KeyValues};
use sme_core::controller::{ControllerKind, Rhythm};
use sme_core::env::{env_step, initial_world, reset, EnvConfig, ResetMode, WorldState};
use sme_core::experiment::{curve_of, run_experiment, ExperimentConfig, LearningCurve};
use sme_core::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmeStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Dimension = 3,
    Degenerate = 4,
    InsufficientData = 5,
    ExplorationMode = 6,
    Parse = 7,
    Io = 8,
    /// The handle is in the wrong state for the call (e.g. no results yet).
    State = 9,
    Panic = 10,
}

/// Controller selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmeController {
    Sme = 0,
    CpgRbf = 1,
}

/// Episode reset behaviour for [`sme_env_reset`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmeReset {
    Full = 0,
    PoseOnly = 1,
    None = 2,
}

/// Feature generator of one controller.
pub struct SmeRhythm {
    inner: Rhythm,
}

/// Surrogate hexapod with its current world state.
pub struct SmeEnv {
    cfg: EnvConfig,
    world: WorldState,
}

/// Resolved experiment configuration plus the learning curve of its last run.
pub struct SmeExperiment {
    cfg: ExperimentConfig,
    curve: Option<LearningCurve>,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> SmeStatus {
    match e {
        Error::Dimension { .. } => SmeStatus::Dimension,
        Error::Degenerate(_) => SmeStatus::Degenerate,
        Error::Config(_) => SmeStatus::Config,
        Error::InsufficientData(_) => SmeStatus::InsufficientData,
        Error::ExplorationMode { .. } => SmeStatus::ExplorationMode,
        Error::Parse { .. } => SmeStatus::Parse,
        Error::Io(_) => SmeStatus::Io,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (SmeStatus, String)>) -> SmeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SmeStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside sme-ffi".into());
            SmeStatus::Panic
        }
    }
}

fn core(e: Error) -> (SmeStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (SmeStatus, String) {
    (SmeStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `p` must be null or point to a live `T`.
unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, (SmeStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

/// # Safety
/// `p` must be null or point to a live `T` not aliased elsewhere.
unsafe fn handle_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (SmeStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes) and returns the full message length.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn sme_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sme_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

fn controller_kind(c: SmeController) -> ControllerKind {
    match c {
        SmeController::Sme => ControllerKind::Sme,
        SmeController::CpgRbf => ControllerKind::CpgRbf,
    }
}

/// Creates the default feature generator of `controller`.
///
/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn sme_rhythm_new(controller: SmeController, out: *mut *mut SmeRhythm) -> SmeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = Rhythm::new(controller_kind(controller)).map_err(core)?;
        *out = Box::into_raw(Box::new(SmeRhythm { inner }));
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle from [`sme_rhythm_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sme_rhythm_free(h: *mut SmeRhythm) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Number of features; 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live rhythm handle.
#[no_mangle]
pub unsafe extern "C" fn sme_rhythm_n_features(h: *const SmeRhythm) -> usize {
    h.as_ref().map_or(0, |r| r.inner.n_features())
}

/// Copies the current features into `buf`, which must hold exactly
/// [`sme_rhythm_n_features`] values.
///
/// # Safety
/// `h` must be a live rhythm handle; `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sme_rhythm_features(h: *const SmeRhythm, buf: *mut f64, len: usize) -> SmeStatus {
    guard(|| {
        let r = handle(h, "rhythm")?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let f = r.inner.features();
        if f.len() != len {
            return Err((
                SmeStatus::Dimension,
                format!("feature buffer holds {len} values, need {}", f.len()),
            ));
        }
        ptr::copy_nonoverlapping(f.as_ptr(), buf, len);
        Ok(())
    })
}

/// Advances the generator by one control step.
///
/// # Safety
/// `h` must be a live rhythm handle.
#[no_mangle]
pub unsafe extern "C" fn sme_rhythm_advance(h: *mut SmeRhythm) -> SmeStatus {
    guard(|| {
        handle_mut(h, "rhythm")?.inner.advance();
        Ok(())
    })
}

/// Returns the generator to its initial state.
///
/// # Safety
/// `h` must be a live rhythm handle.
#[no_mangle]
pub unsafe extern "C" fn sme_rhythm_reset(h: *mut SmeRhythm) -> SmeStatus {
    guard(|| {
        handle_mut(h, "rhythm")?.inner.reset();
        Ok(())
    })
}

/// Creates the default hexapod surrogate at its neutral pose.
///
/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn sme_env_new(out: *mut *mut SmeEnv) -> SmeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = EnvConfig::default();
        let world = initial_world(&cfg);
        *out = Box::into_raw(Box::new(SmeEnv { cfg, world }));
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle from [`sme_env_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sme_env_free(h: *mut SmeEnv) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Number of joint commands [`sme_env_step`] expects.
///
/// # Safety
/// `h` must be null or a live env handle.
#[no_mangle]
pub unsafe extern "C" fn sme_env_n_joints(h: *const SmeEnv) -> usize {
    h.as_ref().map_or(0, |e| e.cfg.geometry.n_joints())
}

/// # Safety
/// `h` must be a live env handle.
#[no_mangle]
pub unsafe extern "C" fn sme_env_reset(h: *mut SmeEnv, mode: SmeReset) -> SmeStatus {
    guard(|| {
        let e = handle_mut(h, "env")?;
        let mode = match mode {
            SmeReset::Full => ResetMode::Full,
            SmeReset::PoseOnly => ResetMode::PoseOnly,
            SmeReset::None => ResetMode::None,
        };
        e.world = reset(&e.world, &e.cfg, mode);
        Ok(())
    })
}

/// Applies one step of joint commands and writes the step reward.
///
/// # Safety
/// `h` must be a live env handle; `commands` valid for `len` doubles;
/// `reward` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn sme_env_step(
    h: *mut SmeEnv,
    commands: *const f64,
    len: usize,
    reward: *mut f64,
) -> SmeStatus {
    guard(|| {
        let e = handle_mut(h, "env")?;
        if commands.is_null() {
            return Err(null("commands"));
        }
        if reward.is_null() {
            return Err(null("reward"));
        }
        let cmds = std::slice::from_raw_parts(commands, len);
        let (next, r) = env_step(&e.world, cmds, &e.cfg).map_err(core)?;
        e.world = next;
        *reward = r;
        Ok(())
    })
}

/// Writes the body pose `(x, y, psi)`.
///
/// # Safety
/// `h` must be a live env handle; the outputs valid for one write each.
#[no_mangle]
pub unsafe extern "C" fn sme_env_pose(h: *const SmeEnv, x: *mut f64, y: *mut f64, psi: *mut f64) -> SmeStatus {
    guard(|| {
        let e = handle(h, "env")?;
        if x.is_null() || y.is_null() || psi.is_null() {
            return Err(null("pose output"));
        }
        *x = e.world.x;
        *y = e.world.y;
        *psi = e.world.psi;
        Ok(())
    })
}

/// Parses a `key = value` configuration (same schema as the CLI config
/// file) into an experiment handle.
///
/// # Safety
/// `config` must be a NUL-terminated string; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn sme_experiment_new(config: *const c_char, out: *mut *mut SmeExperiment) -> SmeStatus {
    guard(|| {
        if config.is_null() {
            return Err(null("config"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(config)
            .to_str()
            .map_err(|e| (SmeStatus::Config, format!("config is not UTF-8: {e}")))?;
        let kv = KeyValues::parse(text).map_err(core)?;
        let cfg = experiment_from(&kv).map_err(core)?;
        *out = Box::into_raw(Box::new(SmeExperiment { cfg, curve: None }));
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle from [`sme_experiment_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sme_experiment_free(h: *mut SmeExperiment) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Runs every repetition with at most `jobs` worker threads and stores the
/// learning curve in the handle.
///
/// # Safety
/// `h` must be a live experiment handle.
#[no_mangle]
pub unsafe extern "C" fn sme_experiment_run(h: *mut SmeExperiment, jobs: usize) -> SmeStatus {
    guard(|| {
        let x = handle_mut(h, "experiment")?;
        let results = run_experiment(&x.cfg, jobs).map_err(core)?;
        x.curve = Some(curve_of(&results));
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a live experiment handle.
#[no_mangle]
pub unsafe extern "C" fn sme_experiment_repetitions(h: *const SmeExperiment) -> usize {
    h.as_ref().map_or(0, |x| x.cfg.repetitions)
}

/// # Safety
/// `h` must be null or a live experiment handle.
#[no_mangle]
pub unsafe extern "C" fn sme_experiment_episodes(h: *const SmeExperiment) -> usize {
    h.as_ref().map_or(0, |x| x.cfg.episodes)
}

fn curve_ref(x: &SmeExperiment) -> Result<&LearningCurve, (SmeStatus, String)> {
    x.curve
        .as_ref()
        .ok_or_else(|| (SmeStatus::State, "experiment has not been run".into()))
}

/// Copies the episodic rewards of `repetition`; `len` must equal the
/// episode count.
///
/// # Safety
/// `h` must be a live experiment handle; `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sme_experiment_rewards(
    h: *const SmeExperiment,
    repetition: usize,
    buf: *mut f64,
    len: usize,
) -> SmeStatus {
    guard(|| {
        let x = handle(h, "experiment")?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let curve = curve_ref(x)?;
        let rewards = curve.rewards.get(repetition).ok_or_else(|| {
            (
                SmeStatus::Dimension,
                format!("repetition {repetition} out of range ({})", curve.repetitions()),
            )
        })?;
        if rewards.len() != len {
            return Err((
                SmeStatus::Dimension,
                format!("reward buffer holds {len} values, need {}", rewards.len()),
            ));
        }
        ptr::copy_nonoverlapping(rewards.as_ptr(), buf, len);
        Ok(())
    })
}

/// Median over repetitions of the mean of each run's last few episodes.
///
/// # Safety
/// `h` must be a live experiment handle; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn sme_experiment_final_reward(h: *const SmeExperiment, out: *mut f64) -> SmeStatus {
    guard(|| {
        let x = handle(h, "experiment")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = curve_ref(x)?.final_reward();
        Ok(())
    })
}
