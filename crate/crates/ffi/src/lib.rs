//! C ABI over the scatwave core.
//!
//! Objects cross the boundary as opaque handles created by `scw_*_new` and
//! released by the matching `scw_*_free`. Every fallible call returns a
//! [`ScwStatus`]; the message of the last failure on the calling thread is
//! available from [`scw_last_error`]. Complex arrays are interleaved
//! `(re, im)` doubles of length `2 n`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use scatwave::cli::{execute_config, ExperimentConfig, ExperimentName};
use scatwave::dynamics::ConjugatedState;
use scatwave::jost::{jost_traces, scattering_from_traces, SpatialGrid};
use scatwave::krein::KreinConvention;
use scatwave::potential::Potential;
use scatwave::spectral::{make_k_grid, ModeTable};
use scatwave::waveop::WaveOperator;
use scatwave::{Error, C64};

/// Result of every fallible call. Codes 2 and 3 match the CLI exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScwStatus {
    Ok = 0,
    /// A run completed but some acceptance criterion failed.
    CriterionFailed = 1,
    InvalidArgument = 2,
    Numerical = 3,
    NullPointer = 4,
    LengthMismatch = 5,
    Panic = 6,
}

/// A static barrier.
pub struct ScwPotential {
    inner: Potential,
}

/// A stationary wave operator with its mode table.
pub struct ScwWaveOperator {
    op: WaveOperator,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn from_error(e: Error) -> ScwStatus {
    let code = e.exit_code();
    set_error(e.to_string());
    if code == 3 {
        ScwStatus::Numerical
    } else {
        ScwStatus::InvalidArgument
    }
}

/// Runs `f`, mapping errors and panics to a status.
fn guarded(f: impl FnOnce() -> Result<(), ScwStatus>) -> ScwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ScwStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside scatwave".into());
            ScwStatus::Panic
        }
    }
}

fn null(what: &str) -> ScwStatus {
    set_error(format!("{what} is null"));
    ScwStatus::NullPointer
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, ScwStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        ScwStatus::InvalidArgument
    })
}

unsafe fn read_state(p: *const f64, n: usize) -> Result<Vec<C64>, ScwStatus> {
    if p.is_null() {
        return Err(null("input state"));
    }
    let raw = std::slice::from_raw_parts(p, 2 * n);
    Ok(raw.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect())
}

unsafe fn write_state(p: *mut f64, u: &[C64]) -> Result<(), ScwStatus> {
    if p.is_null() {
        return Err(null("output state"));
    }
    let out = std::slice::from_raw_parts_mut(p, 2 * u.len());
    for (o, z) in out.chunks_exact_mut(2).zip(u) {
        o[0] = z.re;
        o[1] = z.im;
    }
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL
/// terminated, truncated to `len`) and returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn scw_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Square barrier of height `v0` on `[a, b]`; `c_floor <= 0` uses the
/// default positivity floor.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn scw_potential_square(a: f64, b: f64, v0: f64, c_floor: f64, out: *mut *mut ScwPotential) -> ScwStatus {
    guarded(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = if c_floor > 0.0 { Potential::square_with_floor(a, b, v0, c_floor) } else { Potential::square(a, b, v0) };
        let p = p.map_err(from_error)?;
        *out = Box::into_raw(Box::new(ScwPotential { inner: p }));
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle from [`scw_potential_square`], freed once.
#[no_mangle]
pub unsafe extern "C" fn scw_potential_free(p: *mut ScwPotential) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Transmission and reflection at real momentum `k != 0`, each written as
/// `(re, im)`.
///
/// # Safety
/// `p` must be a live handle; `transmission` and `reflection` must each
/// point to two writable doubles.
#[no_mangle]
pub unsafe extern "C" fn scw_scattering(
    p: *const ScwPotential,
    h: f64,
    k: f64,
    transmission: *mut f64,
    reflection: *mut f64,
) -> ScwStatus {
    guarded(|| {
        let p = p.as_ref().ok_or_else(|| null("potential"))?;
        if k == 0.0 || !k.is_finite() {
            set_error(format!("k must be a nonzero finite real, got {k}"));
            return Err(ScwStatus::InvalidArgument);
        }
        let t = jost_traces(&p.inner, h, C64::new(k.abs(), 0.0)).map_err(from_error)?;
        let sc = scattering_from_traces(k, p.inner.a(), p.inner.b(), &t);
        write_state(transmission, &[sc.transmission])?;
        write_state(reflection, &[sc.reflection])
    })
}

/// Wave operator for interface parameter `θ` on `n` nodes over
/// `[x_min, x_max]` with `n_k` spectral nodes per half-line.
///
/// # Safety
/// `p` must be a live handle and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn scw_wave_operator_new(
    p: *const ScwPotential,
    h: f64,
    theta_re: f64,
    theta_im: f64,
    x_min: f64,
    x_max: f64,
    n: usize,
    k_min: f64,
    k_max: f64,
    n_k: usize,
    out: *mut *mut ScwWaveOperator,
) -> ScwStatus {
    guarded(|| {
        let p = p.as_ref().ok_or_else(|| null("potential"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let build = || {
            let grid = SpatialGrid::new(x_min, x_max, n, p.inner.a(), p.inner.b())?;
            let sgrid = Arc::new(make_k_grid(k_min, k_max, n_k)?);
            let table = Arc::new(ModeTable::build(&p.inner, h, &grid, sgrid)?);
            WaveOperator::new(table, C64::new(theta_re, theta_im), KreinConvention::Corrected)
        };
        let op = build().map_err(from_error)?;
        *out = Box::into_raw(Box::new(ScwWaveOperator { op }));
        Ok(())
    })
}

/// # Safety
/// `w` must be null or a handle from [`scw_wave_operator_new`], freed once.
#[no_mangle]
pub unsafe extern "C" fn scw_wave_operator_free(w: *mut ScwWaveOperator) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

/// Number of spatial nodes; 0 for a null handle.
///
/// # Safety
/// `w` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn scw_wave_operator_len(w: *const ScwWaveOperator) -> usize {
    w.as_ref().map_or(0, |w| w.op.table().grid().n())
}

/// Position of node `i`; NaN when out of range.
///
/// # Safety
/// `w` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn scw_wave_operator_node(w: *const ScwWaveOperator, i: usize) -> f64 {
    match w.as_ref() {
        Some(w) if i < w.op.table().grid().n() => w.op.table().grid().x(i),
        _ => f64::NAN,
    }
}

enum Action {
    Forward,
    Inverse,
    Propagate(f64),
}

unsafe fn act(w: *const ScwWaveOperator, input: *const f64, n: usize, output: *mut f64, action: Action) -> ScwStatus {
    guarded(|| {
        let w = w.as_ref().ok_or_else(|| null("wave operator"))?;
        if n != w.op.table().grid().n() {
            set_error(format!("state has {n} nodes, the operator {}", w.op.table().grid().n()));
            return Err(ScwStatus::LengthMismatch);
        }
        let phi = read_state(input, n)?;
        let u = match action {
            Action::Forward => w.op.apply(&phi),
            Action::Inverse => w.op.apply_inverse(&phi).map(|s| s.state),
            Action::Propagate(t) => ConjugatedState::new(&w.op, &phi).map(|s| s.at(t)),
        }
        .map_err(from_error)?;
        write_state(output, &u)
    })
}

/// `W̃φ` for a state of `n` nodes.
///
/// # Safety
/// `w` must be a live handle; `input` and `output` must each hold `2 n`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn scw_wave_operator_apply(
    w: *const ScwWaveOperator,
    input: *const f64,
    n: usize,
    output: *mut f64,
) -> ScwStatus {
    act(w, input, n, output, Action::Forward)
}

/// `W̃⁻¹φ` for a state of `n` nodes.
///
/// # Safety
/// As for [`scw_wave_operator_apply`].
#[no_mangle]
pub unsafe extern "C" fn scw_wave_operator_apply_inverse(
    w: *const ScwWaveOperator,
    input: *const f64,
    n: usize,
    output: *mut f64,
) -> ScwStatus {
    act(w, input, n, output, Action::Inverse)
}

/// The conjugated propagator `W̃ e^{−itH₀} W̃⁻¹φ` at time `t`.
///
/// # Safety
/// As for [`scw_wave_operator_apply`].
#[no_mangle]
pub unsafe extern "C" fn scw_propagate(
    w: *const ScwWaveOperator,
    input: *const f64,
    n: usize,
    t: f64,
    output: *mut f64,
) -> ScwStatus {
    act(w, input, n, output, Action::Propagate(t))
}

/// Runs an experiment from a JSON config (null for the defaults) and writes
/// reports to `out_dir`. `experiment` may be null to keep the config's
/// choice; `threads = 0` uses the default pool. Returns
/// [`ScwStatus::CriterionFailed`] when the run completes with a failing
/// criterion.
///
/// # Safety
/// String arguments must be null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn scw_run_experiment(
    config_json: *const c_char,
    experiment: *const c_char,
    out_dir: *const c_char,
    quick: bool,
    threads: usize,
) -> ScwStatus {
    guarded(|| {
        let mut cfg = if config_json.is_null() {
            ExperimentConfig::default()
        } else {
            ExperimentConfig::from_json(read_str(config_json, "config")?).map_err(from_error)?
        };
        if !experiment.is_null() {
            let name = read_str(experiment, "experiment")?;
            cfg.experiment = ExperimentName::EACH
                .into_iter()
                .chain([ExperimentName::All])
                .find(|e| e.as_str() == name)
                .ok_or_else(|| {
                    set_error(format!("unknown experiment {name}"));
                    ScwStatus::InvalidArgument
                })?;
        }
        if quick {
            cfg = cfg.quick();
        }
        let out = read_str(out_dir, "out_dir")?;
        let threads = (threads > 0).then_some(threads);
        let summary = execute_config(&cfg, Path::new(out), threads, quick).map_err(from_error)?;
        if summary.pass {
            Ok(())
        } else {
            set_error("a criterion failed".into());
            Err(ScwStatus::CriterionFailed)
        }
    })
}
