//! C ABI over `holdline`.
//!
//! Objects are opaque handles created by `hl_*_new`/`hl_*_load`/`hl_*_run`
//! functions and released with the matching `hl_*_free`. Every fallible call
//! returns an [`HlStatus`]; on failure [`hl_last_error`] describes it. Strings
//! are NUL-terminated UTF-8. Handles may be shared between threads for
//! reading, but the last-error slot is per thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use holdline::adp::{checkpoint, train, AdpError, Policy};
use holdline::control::Scheme;
use holdline::experiment::{ExperimentError, SchemeSetup};
use holdline::metrics::RunReport;
use holdline::model::{builtin_line, BusLineConfig, HyperParams, BUILTIN_LINES};
use holdline::simulator::{export, EpisodeLog, Simulation};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Validation = 4,
    Diverged = 5,
    OutOfRange = 6,
    Panic = 7,
}

/// A validated bus line ready to simulate.
pub struct HlLine {
    sim: Simulation,
}

/// A trained or loaded holding policy.
pub struct HlNetwork {
    policy: Policy,
}

/// The log and indices of one simulated episode.
pub struct HlEpisode {
    log: EpisodeLog,
    report: RunReport,
}

/// Headline indices of an episode.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HlReport {
    pub fsi: f64,
    pub ssi: f64,
    pub sum_sigma: f64,
    pub n_stages: usize,
    pub bunching: bool,
    pub a_sigma: f64,
    pub a_bar: f64,
    pub sigma_a: f64,
    pub n_controlled: usize,
}

/// One activation of a bus at a stop. Bus and stop ids are 0-based.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HlStage {
    pub time_s: f64,
    pub bus: usize,
    pub stop: usize,
    pub hold_s: f64,
    pub controlled: bool,
    pub mean_h_s: f64,
    pub sigma_h_s: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

struct Failure(HlStatus, String);

impl From<AdpError> for Failure {
    fn from(e: AdpError) -> Self {
        let status = match e {
            AdpError::Diverged { .. } => HlStatus::Diverged,
            AdpError::Io(_) => HlStatus::Io,
            _ => HlStatus::Validation,
        };
        Failure(status, e.to_string())
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Adp(inner) => inner.into(),
            other => Failure(HlStatus::Validation, other.to_string()),
        }
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(HlStatus::InvalidArgument, message.into())
}

fn validation(e: impl std::fmt::Display) -> Failure {
    Failure(HlStatus::Validation, e.to_string())
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> HlStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => HlStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            HlStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(HlStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure(HlStatus::NullPointer, format!("{what} is null")))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(HlStatus::NullPointer, "output pointer is null".into()));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(HlStatus::NullPointer, "output pointer is null".into()));
    }
    *out = value;
    Ok(())
}

fn line_handle(config: BusLineConfig) -> Result<HlLine, Failure> {
    Ok(HlLine { sim: Simulation::new(config).map_err(validation)? })
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn hl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `name` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn hl_line_builtin(name: *const c_char, out: *mut *mut HlLine) -> HlStatus {
    guard(|| {
        let name = text(name, "name")?;
        if !BUILTIN_LINES.iter().any(|n| n.eq_ignore_ascii_case(name)) {
            return Err(invalid(format!("unknown line {name:?}")));
        }
        store(out, line_handle(builtin_line(name).map_err(validation)?)?)
    })
}

/// Loads a line from a TOML file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn hl_line_load(path: *const c_char, out: *mut *mut HlLine) -> HlStatus {
    guard(|| {
        let path = text(path, "path")?;
        let config = BusLineConfig::load(path).map_err(|e| {
            let status = if Path::new(path).exists() { HlStatus::Validation } else { HlStatus::Io };
            Failure(status, e.to_string())
        })?;
        store(out, line_handle(config)?)
    })
}

/// # Safety
/// `line` must be null or a handle from `hl_line_builtin`/`hl_line_load` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hl_line_free(line: *mut HlLine) {
    if !line.is_null() {
        drop(Box::from_raw(line));
    }
}

/// Number of stops and buses.
///
/// # Safety
/// `line` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn hl_line_size(line: *const HlLine, n_stops: *mut usize, n_buses: *mut usize) -> HlStatus {
    guard(|| {
        let line = handle(line, "line")?;
        write(n_stops, line.sim.config().n_stops())?;
        write(n_buses, line.sim.config().n_buses())
    })
}

/// Expected system headway of the line, in seconds.
///
/// # Safety
/// `line` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hl_line_esh(line: *const HlLine, out: *mut f64) -> HlStatus {
    guard(|| write(out, handle(line, "line")?.sim.esh_s()))
}

/// Trains a Q-learning policy (`scheme` is "OQL" or "QL<n>S") with default
/// settings apart from the episode count and seed.
///
/// # Safety
/// `line` must be a live handle, `scheme` a NUL-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hl_network_train(
    line: *const HlLine,
    scheme: *const c_char,
    episodes: usize,
    seed: u64,
    out: *mut *mut HlNetwork,
) -> HlStatus {
    guard(|| {
        let line = handle(line, "line")?;
        let scheme: Scheme = text(scheme, "scheme")?.parse().map_err(invalid)?;
        let Scheme::QLearning { lookahead } = scheme else {
            return Err(invalid(format!("scheme {scheme} does not learn")));
        };
        let hyper = HyperParams { lookahead, episodes, seed, ..HyperParams::default() };
        hyper.validate().map_err(|e| invalid(e.to_string()))?;
        let trained = train(&line.sim, &hyper)?;
        store(out, HlNetwork { policy: trained.policy })
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn hl_network_load(path: *const c_char, out: *mut *mut HlNetwork) -> HlStatus {
    guard(|| {
        let policy = checkpoint::load(Path::new(text(path, "path")?))?;
        store(out, HlNetwork { policy })
    })
}

/// # Safety
/// `network` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hl_network_save(network: *const HlNetwork, path: *const c_char) -> HlStatus {
    guard(|| {
        let network = handle(network, "network")?;
        Ok(checkpoint::save(&network.policy, Path::new(text(path, "path")?))?)
    })
}

/// Input width of the network: two per bus, one per stop and the hold.
///
/// # Safety
/// `network` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hl_network_inputs(network: *const HlNetwork, out: *mut usize) -> HlStatus {
    guard(|| write(out, handle(network, "network")?.policy.network.net.inputs()))
}

/// Evaluates the network on `len` normalised inputs.
///
/// # Safety
/// `network` must be a live handle, `inputs` must point to `len` values and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn hl_network_forward(
    network: *const HlNetwork,
    inputs: *const f64,
    len: usize,
    out: *mut f64,
) -> HlStatus {
    guard(|| {
        let net = &handle(network, "network")?.policy.network.net;
        if len != net.inputs() {
            return Err(invalid(format!("expected {} inputs, got {len}", net.inputs())));
        }
        let x = handle(inputs, "inputs").map(|_| std::slice::from_raw_parts(inputs, len))?;
        write(out, net.forward(x))
    })
}

/// # Safety
/// `network` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hl_network_free(network: *mut HlNetwork) {
    if !network.is_null() {
        drop(Box::from_raw(network));
    }
}

/// Simulates one episode under `scheme`. Q-learning schemes need `network`;
/// the others ignore it and accept null.
///
/// # Safety
/// `line` must be a live handle, `network` null or live, `scheme` a
/// NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hl_episode_run(
    line: *const HlLine,
    scheme: *const c_char,
    network: *const HlNetwork,
    seed: u64,
    out: *mut *mut HlEpisode,
) -> HlStatus {
    guard(|| {
        let line = handle(line, "line")?;
        let scheme: Scheme = text(scheme, "scheme")?.parse().map_err(invalid)?;
        let mut setup = SchemeSetup::new(scheme);
        if scheme.is_learning() {
            let network = handle(network, "network")?;
            if let Scheme::QLearning { lookahead } = scheme {
                if network.policy.lookahead != lookahead {
                    return Err(invalid(format!("network was trained for look-ahead {}", network.policy.lookahead)));
                }
            }
            setup = setup.with_policy(network.policy.clone());
        }
        let mut controller = setup.controller(&line.sim)?;
        let log = line.sim.run(controller.as_mut(), seed).map_err(validation)?;
        let report = RunReport::from_log(&log).map_err(validation)?;
        store(out, HlEpisode { log, report })
    })
}

/// # Safety
/// `episode` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hl_episode_report(episode: *const HlEpisode, out: *mut HlReport) -> HlStatus {
    guard(|| {
        let r = &handle(episode, "episode")?.report;
        write(
            out,
            HlReport {
                fsi: r.stability.fsi,
                ssi: r.stability.ssi,
                sum_sigma: r.stability.sum_sigma,
                n_stages: r.stability.n_t,
                bunching: r.stability.bunching,
                a_sigma: r.interference.a_sigma,
                a_bar: r.interference.a_bar,
                sigma_a: r.interference.sigma_a,
                n_controlled: r.interference.n_m,
            },
        )
    })
}

/// # Safety
/// `episode` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hl_episode_stage_count(episode: *const HlEpisode, out: *mut usize) -> HlStatus {
    guard(|| write(out, handle(episode, "episode")?.log.stages.len()))
}

/// # Safety
/// `episode` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hl_episode_stage(episode: *const HlEpisode, index: usize, out: *mut HlStage) -> HlStatus {
    guard(|| {
        let stages = &handle(episode, "episode")?.log.stages;
        let s = stages
            .get(index)
            .ok_or_else(|| Failure(HlStatus::OutOfRange, format!("stage {index} of {}", stages.len())))?;
        write(
            out,
            HlStage {
                time_s: s.time_s,
                bus: s.bus,
                stop: s.stop,
                hold_s: s.hold_s,
                controlled: s.controlled,
                mean_h_s: s.mean_h_s,
                sigma_h_s: s.sigma_h_s,
            },
        )
    })
}

/// Writes stages.csv, passengers.csv and trajectories.csv into `dir`.
///
/// # Safety
/// `episode` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hl_episode_export(episode: *const HlEpisode, dir: *const c_char) -> HlStatus {
    guard(|| {
        let episode = handle(episode, "episode")?;
        let dir = Path::new(text(dir, "dir")?);
        std::fs::create_dir_all(dir).map_err(|e| Failure(HlStatus::Io, e.to_string()))?;
        export::write_episode(&episode.log, dir).map_err(|e| Failure(HlStatus::Io, e.to_string()))
    })
}

/// # Safety
/// `episode` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hl_episode_free(episode: *mut HlEpisode) {
    if !episode.is_null() {
        drop(Box::from_raw(episode));
    }
}
