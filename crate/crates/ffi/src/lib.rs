//! C ABI over the surf library.
//!
//! Every fallible function returns a [`SurfStatus`]; on failure the message
//! is kept per thread and read with [`surf_last_error_message`]. Handles are
//! opaque pointers released by their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use surf::agent::SacAgent;
use surf::reward::{preference_from_returns, RewardEnsemble};
use surf::runner::{Checkpoint, ExperimentConfig, Trainer};
use surf::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SurfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Contract = 4,
    NotReady = 5,
    Conflict = 6,
    NotFound = 7,
    Config = 8,
    Format = 9,
    Io = 10,
    Panic = 11,
}

impl From<&Error> for SurfStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Dimension(_) => SurfStatus::Dimension,
            Error::Contract(_) => SurfStatus::Contract,
            Error::NotReady(_) => SurfStatus::NotReady,
            Error::Conflict(_) => SurfStatus::Conflict,
            Error::NotFound(_) => SurfStatus::NotFound,
            Error::Config(_) => SurfStatus::Config,
            Error::Format(_) => SurfStatus::Format,
            Error::Io(_) => SurfStatus::Io,
        }
    }
}

/// Experiment settings, built from defaults, a file or `key=value` pairs.
pub struct SurfConfig(ExperimentConfig);

/// A training run in progress.
pub struct SurfTrainer(Trainer);

/// A learned reward ensemble.
pub struct SurfReward(RewardEnsemble);

/// A policy restored from a checkpoint.
pub struct SurfPolicy(SacAgent);

/// Summary of a finished run.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct SurfRunSummary {
    pub final_return: f64,
    /// NaN when no held-out labels exist.
    pub heldout_accuracy: f64,
    pub labels_used: usize,
    pub sessions: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Fail {
    Null(&'static str),
    Arg(String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

type FfiResult = std::result::Result<(), Fail>;

fn guard(f: impl FnOnce() -> FfiResult) -> SurfStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SurfStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            SurfStatus::NullPointer
        }
        Ok(Err(Fail::Arg(msg))) => {
            set_error(msg);
            SurfStatus::InvalidArgument
        }
        Ok(Err(Fail::Lib(e))) => {
            let status = SurfStatus::from(&e);
            set_error(e.to_string());
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SurfStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> std::result::Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &'static str) -> std::result::Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &'static str) -> std::result::Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Arg(format!("{what} is not valid UTF-8")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> std::result::Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn emit<T>(out: *mut *mut T, value: T) -> FfiResult {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Copies the calling thread's last error message, NUL-terminated and
/// truncated to `capacity`, into `buf`. Returns the full message length
/// excluding the terminator, or 0 when there is no error.
///
/// # Safety
/// `buf` must be null or point to `capacity` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn surf_last_error_message(buf: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && capacity > 0 {
            let n = bytes.len().min(capacity - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Bradley-Terry probability that the second segment is preferred, given the
/// two predicted returns.
#[no_mangle]
pub extern "C" fn surf_preference_prob(return0: f64, return1: f64) -> f64 {
    preference_from_returns(return0, return1)
}

/// # Safety
/// `out` must be a valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn surf_config_new(out: *mut *mut SurfConfig) -> SurfStatus {
    guard(|| emit(out, SurfConfig(ExperimentConfig::default())))
}

/// Parses a `key = value` config file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn surf_config_load(path: *const c_char, out: *mut *mut SurfConfig) -> SurfStatus {
    guard(|| {
        let cfg = ExperimentConfig::load(Path::new(text(path, "path")?))?;
        emit(out, SurfConfig(cfg))
    })
}

/// # Safety
/// `cfg` must be a live config handle; `key` and `value` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn surf_config_set(cfg: *mut SurfConfig, key: *const c_char, value: *const c_char) -> SurfStatus {
    guard(|| {
        let cfg = deref_mut(cfg, "cfg")?;
        cfg.0.set(text(key, "key")?, text(value, "value")?)?;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn surf_config_free(cfg: *mut SurfConfig) {
    release(cfg);
}

/// Validates `cfg` and builds a trainer. The config handle stays owned by the
/// caller.
///
/// # Safety
/// `cfg` must be a live config handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn surf_trainer_new(cfg: *const SurfConfig, out: *mut *mut SurfTrainer) -> SurfStatus {
    guard(|| {
        let cfg = deref(cfg, "cfg")?;
        emit(out, SurfTrainer(Trainer::new(cfg.0.clone())?))
    })
}

/// Runs state-entropy pre-training; a no-op when already done.
///
/// # Safety
/// `t` must be a live trainer handle.
#[no_mangle]
pub unsafe extern "C" fn surf_trainer_pretrain(t: *mut SurfTrainer) -> SurfStatus {
    guard(|| {
        deref_mut(t, "trainer")?.0.pretrain()?;
        Ok(())
    })
}

/// Advances the main loop by up to `steps` environment steps, pre-training
/// first if needed. `taken` may be null.
///
/// # Safety
/// `t` must be a live trainer handle; `taken` null or valid.
#[no_mangle]
pub unsafe extern "C" fn surf_trainer_advance(t: *mut SurfTrainer, steps: usize, taken: *mut usize) -> SurfStatus {
    guard(|| {
        let tr = &mut deref_mut(t, "trainer")?.0;
        tr.pretrain()?;
        let n = tr.advance(steps)?;
        if !taken.is_null() {
            *taken = n;
        }
        Ok(())
    })
}

/// Runs to completion and fills `summary`.
///
/// # Safety
/// `t` must be a live trainer handle and `summary` valid.
#[no_mangle]
pub unsafe extern "C" fn surf_trainer_run(t: *mut SurfTrainer, summary: *mut SurfRunSummary) -> SurfStatus {
    guard(|| {
        let tr = &mut deref_mut(t, "trainer")?.0;
        let out = deref_mut(summary, "summary")?;
        let s = tr.run()?;
        *out = SurfRunSummary {
            final_return: s.final_return,
            heldout_accuracy: s.heldout_accuracy.unwrap_or(f64::NAN),
            labels_used: s.labels_used,
            sessions: s.sessions,
        };
        Ok(())
    })
}

/// Environment steps taken so far, or 0 for a null handle.
///
/// # Safety
/// `t` must be null or a live trainer handle.
#[no_mangle]
pub unsafe extern "C" fn surf_trainer_env_steps(t: *const SurfTrainer) -> usize {
    t.as_ref().map_or(0, |t| t.0.env_steps())
}

/// Preference labels consumed so far, or 0 for a null handle.
///
/// # Safety
/// `t` must be null or a live trainer handle.
#[no_mangle]
pub unsafe extern "C" fn surf_trainer_labels_used(t: *const SurfTrainer) -> usize {
    t.as_ref().map_or(0, |t| t.0.labels_used())
}

/// Writes the current reward ensemble and policy to `path`.
///
/// # Safety
/// `t` must be a live trainer handle and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn surf_trainer_save_checkpoint(t: *const SurfTrainer, path: *const c_char) -> SurfStatus {
    guard(|| {
        let tr = deref(t, "trainer")?;
        tr.0.checkpoint().save(Path::new(text(path, "path")?))?;
        Ok(())
    })
}

/// # Safety
/// `t` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn surf_trainer_free(t: *mut SurfTrainer) {
    release(t);
}

/// # Safety
/// `path` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn surf_reward_load(path: *const c_char, out: *mut *mut SurfReward) -> SurfStatus {
    guard(|| {
        let ck = Checkpoint::load(Path::new(text(path, "path")?))?;
        let ens = ck
            .ensemble
            .ok_or_else(|| Error::NotFound("checkpoint has no reward ensemble".into()))?;
        emit(out, SurfReward(ens))
    })
}

/// Mean ensemble reward of one `(state, action)`.
///
/// # Safety
/// `r` must be a live handle, `state` and `action` must hold the given
/// counts, and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn surf_reward_eval(
    r: *const SurfReward,
    state: *const f64,
    state_len: usize,
    action: *const f64,
    action_len: usize,
    out: *mut f64,
) -> SurfStatus {
    guard(|| {
        let ens = &deref(r, "reward")?.0;
        let v = ens.ensemble_reward(slice(state, state_len, "state")?, slice(action, action_len, "action")?)?;
        *deref_mut(out, "out")? = v;
        Ok(())
    })
}

/// # Safety
/// `r` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn surf_reward_free(r: *mut SurfReward) {
    release(r);
}

/// # Safety
/// `path` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn surf_policy_load(path: *const c_char, out: *mut *mut SurfPolicy) -> SurfStatus {
    guard(|| {
        let ck = Checkpoint::load(Path::new(text(path, "path")?))?;
        emit(out, SurfPolicy(ck.agent()?))
    })
}

/// Action dimension of the policy, or 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live policy handle.
#[no_mangle]
pub unsafe extern "C" fn surf_policy_action_dim(p: *const SurfPolicy) -> usize {
    p.as_ref().map_or(0, |p| p.0.action_dim())
}

/// Deterministic action for `state`, written to `action[0..action_len]`.
///
/// # Safety
/// `p` must be a live handle; `state` and `action` must hold the given counts.
#[no_mangle]
pub unsafe extern "C" fn surf_policy_act(
    p: *const SurfPolicy,
    state: *const f64,
    state_len: usize,
    action: *mut f64,
    action_len: usize,
) -> SurfStatus {
    guard(|| {
        let agent = &deref(p, "policy")?.0;
        if action_len != agent.action_dim() {
            return Err(Fail::Arg(format!(
                "action buffer holds {action_len} values, policy emits {}",
                agent.action_dim()
            )));
        }
        if action.is_null() {
            return Err(Fail::Null("action"));
        }
        let a = agent.mean_action(slice(state, state_len, "state")?)?;
        std::slice::from_raw_parts_mut(action, action_len).copy_from_slice(&a);
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn surf_policy_free(p: *mut SurfPolicy) {
    release(p);
}
