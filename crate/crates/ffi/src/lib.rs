//! C interface to the nballs simulator.
//!
//! Every function returns an [`NballsStatus`]; on failure the message is
//! available from [`nballs_last_error`] on the same thread. Handles are
//! opaque and must be released with the matching `*_free` function.

use std::cell::RefCell;
use std::collections::VecDeque;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::DMatrix;
use nballs::experiment::{parse_config, run};
use nballs::sim::{sample_state, BallState, CollisionEvent, CollisionKind, MassConfig, Simulator};
use nballs::tangent::{lyapunov_spectrum, sigma_estimate, tau_e0, TauOutcome};
use nballs::Error;

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NballsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The orbit reached a singular (triple or floor-plus-pair) collision.
    Singular = 3,
    /// The configuration text could not be parsed or validated.
    Config = 4,
    Io = 5,
    /// The output buffer is too small; the required length was stored.
    BufferTooSmall = 6,
    /// The experiment ran and raised red flags (see its report).
    RedFlag = 7,
    Internal = 8,
}

/// One collision. `kind` is 0 for the floor and `i` for the pair `(i, i+1)`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NballsEvent {
    pub n: u64,
    pub t: f64,
    pub kind: u32,
}

/// Masses and energy.
pub struct NballsConfig {
    cfg: MassConfig,
}

/// Event-driven simulator owning its configuration.
pub struct NballsSimulator {
    sim: Option<Simulator<'static>>,
    cfg: *mut MassConfig,
    pending: VecDeque<CollisionEvent>,
}

impl Drop for NballsSimulator {
    fn drop(&mut self) {
        // the simulator borrows `cfg`, so it goes first
        self.sim = None;
        // SAFETY: `cfg` came from `Box::into_raw` in `make_simulator` and is freed only here.
        unsafe { drop(Box::from_raw(self.cfg)) };
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> NballsStatus {
    match e {
        Error::SingularOrbit(_) | Error::SingularEventInRange(_) | Error::SingularEncountered(_) => NballsStatus::Singular,
        Error::UnknownKey { .. } | Error::TypeMismatch { .. } | Error::MissingRequired(_) | Error::Syntax { .. } => {
            NballsStatus::Config
        }
        Error::Io { .. } => NballsStatus::Io,
        _ => NballsStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<NballsStatus, (NballsStatus, String)>) -> NballsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            NballsStatus::Internal
        }
    }
}

fn fail(e: Error) -> (NballsStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (NballsStatus, String) {
    (NballsStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `p` must be null or point to `len` readable values.
unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (NballsStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated)
/// and stores its length without the NUL in `len_out`.
///
/// # Safety
/// `buf` must be null or writable for `cap` bytes; `len_out` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn nballs_last_error(buf: *mut c_char, cap: usize, len_out: *mut usize) -> NballsStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    if !len_out.is_null() {
        *len_out = msg.len();
    }
    if buf.is_null() || cap < msg.len() + 1 {
        return NballsStatus::BufferTooSmall;
    }
    ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, msg.len());
    *buf.add(msg.len()) = 0;
    NballsStatus::Ok
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nballs_version() -> *const c_char {
    concat!("nballs ", env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Creates a configuration from `n` strictly decreasing masses and an energy.
///
/// # Safety
/// `masses` must point to `n` doubles; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn nballs_config_new(masses: *const f64, n: usize, energy: f64, out: *mut *mut NballsConfig) -> NballsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let m = slice(masses, n, "masses")?;
        let cfg = MassConfig::new(m, energy).map_err(fail)?;
        *out = Box::into_raw(Box::new(NballsConfig { cfg }));
        Ok(NballsStatus::Ok)
    })
}

/// # Safety
/// `cfg` must be null or a handle from [`nballs_config_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nballs_config_free(cfg: *mut NballsConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Number of balls.
///
/// # Safety
/// `cfg` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn nballs_config_balls(cfg: *const NballsConfig) -> usize {
    cfg.as_ref().map_or(0, |c| c.cfg.n())
}

fn make_simulator(cfg: &MassConfig, state: BallState) -> Result<*mut NballsSimulator, (NballsStatus, String)> {
    let owned = Box::into_raw(Box::new(cfg.clone()));
    // SAFETY: `owned` stays alive until the handle is dropped, after the simulator.
    let r: &'static MassConfig = unsafe { &*owned };
    match Simulator::new(r, state) {
        Ok(sim) => Ok(Box::into_raw(Box::new(NballsSimulator { sim: Some(sim), cfg: owned, pending: VecDeque::new() }))),
        Err(e) => {
            unsafe { drop(Box::from_raw(owned)) };
            Err(fail(e))
        }
    }
}

/// Simulator started from the state sampled with `seed` on the energy surface.
///
/// # Safety
/// `cfg` must be a valid handle; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn nballs_simulator_new(cfg: *const NballsConfig, seed: u64, out: *mut *mut NballsSimulator) -> NballsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let c = &cfg.as_ref().ok_or_else(|| null("cfg"))?.cfg;
        let s0 = sample_state(c, seed).map_err(fail)?;
        *out = make_simulator(c, s0)?;
        Ok(NballsStatus::Ok)
    })
}

/// Simulator started from explicit heights `q` and velocities `v` (bottom ball first).
///
/// # Safety
/// `q` and `v` must point to `n` doubles; `cfg` must be valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nballs_simulator_from_state(
    cfg: *const NballsConfig,
    t: f64,
    q: *const f64,
    v: *const f64,
    n: usize,
    out: *mut *mut NballsSimulator,
) -> NballsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let c = &cfg.as_ref().ok_or_else(|| null("cfg"))?.cfg;
        let state = BallState::new(t, slice(q, n, "q")?.to_vec(), slice(v, n, "v")?.to_vec());
        *out = make_simulator(c, state)?;
        Ok(NballsStatus::Ok)
    })
}

/// # Safety
/// `sim` must be null or a live simulator handle.
#[no_mangle]
pub unsafe extern "C" fn nballs_simulator_free(sim: *mut NballsSimulator) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advances to the next collision and describes it in `event`.
///
/// Simultaneous commuting collisions are returned one per call, in order.
///
/// # Safety
/// `sim` must be a live handle; `event` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn nballs_simulator_step(sim: *mut NballsSimulator, event: *mut NballsEvent) -> NballsStatus {
    guard(|| {
        let h = sim.as_mut().ok_or_else(|| null("sim"))?;
        if event.is_null() {
            return Err(null("event"));
        }
        if h.pending.is_empty() {
            let s = h.sim.as_mut().expect("live simulator");
            h.pending.extend(s.step_regular().map_err(fail)?);
        }
        let ev = h.pending.pop_front().expect("a regular step yields events");
        *event = NballsEvent {
            n: ev.n,
            t: ev.t,
            kind: match ev.kind {
                CollisionKind::Floor => 0,
                CollisionKind::Pair(i) => i as u32,
            },
        };
        Ok(NballsStatus::Ok)
    })
}

/// Copies the current state (time, heights, velocities) out of the simulator.
///
/// # Safety
/// `t` must be writable; `q` and `v` must be writable for `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn nballs_simulator_state(sim: *const NballsSimulator, t: *mut f64, q: *mut f64, v: *mut f64, n: usize) -> NballsStatus {
    guard(|| {
        let h = sim.as_ref().ok_or_else(|| null("sim"))?;
        if t.is_null() || q.is_null() || v.is_null() {
            return Err(null("output"));
        }
        let s = h.sim.as_ref().expect("live simulator").state();
        if n != s.n() {
            return Err((NballsStatus::InvalidArgument, format!("state has {} balls, buffers hold {n}", s.n())));
        }
        *t = s.t;
        ptr::copy_nonoverlapping(s.q.as_ptr(), q, n);
        ptr::copy_nonoverlapping(s.v.as_ptr(), v, n);
        Ok(NballsStatus::Ok)
    })
}

/// Lyapunov exponents per collision (descending) of the orbit sampled with
/// `seed`, over `steps` collisions. `out` receives `2 (N - 1)` values.
///
/// # Safety
/// `cfg` must be valid; `out` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn nballs_lyapunov(
    cfg: *const NballsConfig,
    seed: u64,
    steps: usize,
    every: usize,
    out: *mut f64,
    len: usize,
) -> NballsStatus {
    guard(|| {
        let c = &cfg.as_ref().ok_or_else(|| null("cfg"))?.cfg;
        if out.is_null() {
            return Err(null("out"));
        }
        let need = 2 * (c.n() - 1);
        if len < need {
            return Err((NballsStatus::BufferTooSmall, format!("need {need} values")));
        }
        let s0 = sample_state(c, seed).map_err(fail)?;
        let spec = lyapunov_spectrum(c, &s0, steps, every).map_err(fail)?;
        ptr::copy_nonoverlapping(spec.per_event.as_ptr(), out, need);
        Ok(NballsStatus::Ok)
    })
}

/// Time after which every sampled closed-cone vector has `Q > e0`; a
/// negative value means the cutoff was reached first.
///
/// # Safety
/// `cfg` must be valid; `tau` writable.
#[no_mangle]
pub unsafe extern "C" fn nballs_tau(
    cfg: *const NballsConfig,
    seed: u64,
    e0: f64,
    interior: usize,
    boundary: usize,
    cutoff: usize,
    tau: *mut f64,
) -> NballsStatus {
    guard(|| {
        let c = &cfg.as_ref().ok_or_else(|| null("cfg"))?.cfg;
        if tau.is_null() {
            return Err(null("tau"));
        }
        let s0 = sample_state(c, seed).map_err(fail)?;
        let r = tau_e0(c, &s0, e0, interior, boundary, cutoff, seed).map_err(fail)?;
        *tau = match r.outcome {
            TauOutcome::Finite { tau, .. } => tau,
            TauOutcome::Exceeded { .. } => -1.0,
        };
        Ok(NballsStatus::Ok)
    })
}

/// Least expansion `sigma` on the cone of a `2d x 2d` matrix given row-major.
///
/// # Safety
/// `m` must point to `(2d)^2` doubles; `sigma` writable.
#[no_mangle]
pub unsafe extern "C" fn nballs_sigma(m: *const f64, d: usize, seed: u64, sigma: *mut f64) -> NballsStatus {
    guard(|| {
        if sigma.is_null() {
            return Err(null("sigma"));
        }
        if d == 0 {
            return Err((NballsStatus::InvalidArgument, "dimension must be positive".into()));
        }
        let entries = slice(m, 4 * d * d, "m")?;
        let mat = DMatrix::from_row_slice(2 * d, 2 * d, entries);
        *sigma = sigma_estimate(&mat, nballs::tangent::DEFAULT_STARTS, 1e-12, seed).map_err(fail)?.value;
        Ok(NballsStatus::Ok)
    })
}

/// Parses and runs an experiment configuration, writing its artifacts.
/// Returns [`NballsStatus::RedFlag`] when the run raised red flags.
///
/// # Safety
/// `config_text` must be a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn nballs_run_experiment(config_text: *const c_char) -> NballsStatus {
    guard(|| {
        if config_text.is_null() {
            return Err(null("config_text"));
        }
        let text = CStr::from_ptr(config_text)
            .to_str()
            .map_err(|_| (NballsStatus::InvalidArgument, "configuration is not UTF-8".to_string()))?;
        let cfg = parse_config(text).map_err(fail)?;
        let outcome = run(&cfg).map_err(fail)?;
        if outcome.red_flags.is_empty() {
            Ok(NballsStatus::Ok)
        } else {
            let codes: Vec<&str> = outcome.red_flags.iter().map(|f| f.code.as_str()).collect();
            set_error(format!("red flags: {}", codes.join(", ")));
            Ok(NballsStatus::RedFlag)
        }
    })
}
