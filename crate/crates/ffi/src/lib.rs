//! C interface to `tonebif`.
//!
//! Objects cross the boundary as opaque heap handles that the caller releases
//! with the matching `*_free` function. Every fallible call returns a
//! [`TbStatus`]; on failure a description is available from
//! [`tb_last_error_message`] on the same thread. Panics are caught and
//! reported as [`TbStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use tonebif::artifacts::{read_model, write_model};
use tonebif::bifurcation::analyze_schedule;
use tonebif::constants::HEARING_THRESHOLD;
use tonebif::dynamics::integrate_scalar;
use tonebif::envelope::{segment_envelope, upper_envelope};
use tonebif::synthesis::{envelope_gap, synthesize};
use tonebif::{
    analyze, build_model, read_wav, write_wav, AnalysisConfig, AudioBuffer, ControllerModel, Error, FitConfig,
    SpectralVector,
};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TbStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument was out of range or a string was not valid UTF-8.
    InvalidArgument = 2,
    /// A file could not be read, written or parsed.
    Io = 3,
    /// The recording could not be analyzed (no partials, no envelope, silence).
    Analysis = 4,
    /// The model could not be fitted to the envelope.
    Fit = 5,
    /// A trajectory escaped or left the invariant leaf.
    Numeric = 6,
    /// The output buffer is too small; the required length was written.
    BufferTooSmall = 7,
    /// The library panicked; the handle arguments should be treated as lost.
    Panic = 8,
}

/// A mono recording or synthesized note.
pub struct TbAudio(AudioBuffer);

/// Frequencies and amplitudes of the analyzed partials.
pub struct TbSpectral(SpectralVector);

/// A fitted oscillator model.
pub struct TbModel(ControllerModel);

/// Scalar amplitude sampled over a model's duration.
pub struct TbTrace {
    rho: Vec<f64>,
    sample_rate: u32,
    spectral: SpectralVector,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

struct Failure {
    status: TbStatus,
    message: String,
}

impl Failure {
    fn new(status: TbStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } | Error::WavParse { .. } | Error::UnsupportedFormat { .. } | Error::Artifact { .. } => {
                TbStatus::Io
            }
            Error::InvalidInput(_) => TbStatus::InvalidArgument,
            Error::MissingPartial { .. } | Error::DegenerateEnvelope | Error::SilentSignal { .. } => {
                TbStatus::Analysis
            }
            Error::BlowUp { .. } | Error::Domain { .. } | Error::LeafViolation { .. } => TbStatus::Numeric,
            _ => TbStatus::Fit,
        };
        Self::new(status, e.to_string())
    }
}

/// Runs `body`, recording any failure or panic as the thread's last error.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> TbStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => TbStatus::Ok,
        Ok(Err(f)) => {
            set_last_error(f.message);
            f.status
        }
        Err(payload) => {
            let detail = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {detail}"));
            TbStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(ptr: *const T, name: &str) -> Result<&'a T, Failure> {
    ptr.as_ref()
        .ok_or_else(|| Failure::new(TbStatus::NullPointer, format!("{name} is null")))
}

unsafe fn path_arg(ptr: *const c_char, name: &str) -> Result<PathBuf, Failure> {
    if ptr.is_null() {
        return Err(Failure::new(TbStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| Failure::new(TbStatus::InvalidArgument, format!("{name} is not valid UTF-8")))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(TbStatus::NullPointer, "output handle pointer is null"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Copies `source` into `(dest, capacity)` and reports the full length.
unsafe fn copy_out(source: &[f64], dest: *mut f64, capacity: usize, written: *mut usize) -> Result<(), Failure> {
    if !written.is_null() {
        *written = source.len();
    }
    if capacity < source.len() {
        return Err(Failure::new(
            TbStatus::BufferTooSmall,
            format!("buffer holds {capacity} values, {} needed", source.len()),
        ));
    }
    if source.is_empty() {
        return Ok(());
    }
    if dest.is_null() {
        return Err(Failure::new(TbStatus::NullPointer, "output buffer is null"));
    }
    std::ptr::copy_nonoverlapping(source.as_ptr(), dest, source.len());
    Ok(())
}

unsafe fn release<T>(ptr: *mut T) {
    if !ptr.is_null() {
        drop(Box::from_raw(ptr));
    }
}

/// Message describing the last failure on this thread, or null if the most
/// recent call returning a [`TbStatus`] succeeded. The pointer stays valid
/// until the next such call from the same thread.
#[no_mangle]
pub extern "C" fn tb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(std::ptr::null(), |m| m.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Reads a PCM or float WAV file, averaging channels to mono.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tb_audio_read(path: *const c_char, out: *mut *mut TbAudio) -> TbStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        emit(out, TbAudio(read_wav(path)?))
    })
}

/// Wraps `len` samples in `[-1, 1]` taken at `sample_rate` Hz.
///
/// # Safety
/// `samples` must point to `len` readable values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tb_audio_from_samples(
    samples: *const f64,
    len: usize,
    sample_rate: u32,
    out: *mut *mut TbAudio,
) -> TbStatus {
    guard(|| {
        if samples.is_null() && len > 0 {
            return Err(Failure::new(TbStatus::NullPointer, "samples is null"));
        }
        let data = if len == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(samples, len).to_vec()
        };
        emit(out, TbAudio(AudioBuffer::new(data, sample_rate)?))
    })
}

/// Writes 16-bit PCM, clipping samples outside `[-1, 1]`.
///
/// # Safety
/// `audio` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tb_audio_write(audio: *const TbAudio, path: *const c_char) -> TbStatus {
    guard(|| {
        let audio = borrow(audio, "audio")?;
        let path = path_arg(path, "path")?;
        write_wav(&audio.0, path)?;
        Ok(())
    })
}

/// Number of samples, or 0 for a null handle.
///
/// # Safety
/// `audio` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tb_audio_len(audio: *const TbAudio) -> usize {
    audio.as_ref().map_or(0, |a| a.0.len())
}

/// Sample rate in Hz, or 0 for a null handle.
///
/// # Safety
/// `audio` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tb_audio_sample_rate(audio: *const TbAudio) -> u32 {
    audio.as_ref().map_or(0, |a| a.0.sample_rate)
}

/// Copies the samples into `dest`. `written` (optional) receives the sample
/// count even when `capacity` is too small.
///
/// # Safety
/// `audio` must be a live handle; `dest` must have room for `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn tb_audio_copy_samples(
    audio: *const TbAudio,
    dest: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> TbStatus {
    guard(|| copy_out(&borrow(audio, "audio")?.0.samples, dest, capacity, written))
}

/// # Safety
/// `audio` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tb_audio_free(audio: *mut TbAudio) {
    release(audio);
}

/// Finds the fundamental and `partials - 1` overtones of a recording.
///
/// # Safety
/// `audio` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tb_analyze(audio: *const TbAudio, partials: usize, out: *mut *mut TbSpectral) -> TbStatus {
    guard(|| {
        let audio = borrow(audio, "audio")?;
        let config = AnalysisConfig {
            partials,
            ..AnalysisConfig::default()
        };
        emit(out, TbSpectral(analyze(&audio.0, &config)?.spectral))
    })
}

/// Number of partials, not counting the constant term.
///
/// # Safety
/// `spectral` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tb_spectral_partials(spectral: *const TbSpectral) -> usize {
    spectral.as_ref().map_or(0, |s| s.0.n)
}

/// Sum of amplitudes relative to the fundamental's, or NaN for a null handle.
///
/// # Safety
/// `spectral` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tb_spectral_rho_sum(spectral: *const TbSpectral) -> f64 {
    spectral.as_ref().map_or(f64::NAN, |s| s.0.rho_sum)
}

/// Copies frequencies (Hz) and amplitudes, constant term first. Both buffers
/// need `partials + 1` slots; `written` (optional) receives that count.
///
/// # Safety
/// `spectral` must be a live handle; each buffer must have room for `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn tb_spectral_copy(
    spectral: *const TbSpectral,
    frequencies_hz: *mut f64,
    amplitudes: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> TbStatus {
    guard(|| {
        let sv = &borrow(spectral, "spectral")?.0;
        copy_out(&sv.nu, frequencies_hz, capacity, written)?;
        copy_out(&sv.d, amplitudes, capacity, written)
    })
}

/// # Safety
/// `spectral` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tb_spectral_free(spectral: *mut TbSpectral) {
    release(spectral);
}

/// Fits a model to the recording's envelope with default settings.
///
/// # Safety
/// `audio` and `spectral` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tb_fit(
    audio: *const TbAudio,
    spectral: *const TbSpectral,
    out: *mut *mut TbModel,
) -> TbStatus {
    guard(|| {
        let audio = &borrow(audio, "audio")?.0;
        let sv = &borrow(spectral, "spectral")?.0;
        let gamma = upper_envelope(audio, envelope_gap(audio.sample_rate, sv.fundamental_hz()))?;
        let plan = segment_envelope(&gamma, HEARING_THRESHOLD)?;
        let (model, _) = build_model(sv, &gamma, &plan, &FitConfig::default())?;
        emit(out, TbModel(model))
    })
}

/// Loads a model written by `tb_model_write` or the command-line tool.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tb_model_read(path: *const c_char, out: *mut *mut TbModel) -> TbStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        emit(out, TbModel(read_model(path)?))
    })
}

/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tb_model_write(model: *const TbModel, path: *const c_char) -> TbStatus {
    guard(|| {
        let model = borrow(model, "model")?;
        write_model(path_arg(path, "path")?, &model.0)?;
        Ok(())
    })
}

/// Note length in seconds, or NaN for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tb_model_duration(model: *const TbModel) -> f64 {
    model.as_ref().map_or(f64::NAN, |m| m.0.duration())
}

/// Number of bifurcation events the schedule causes.
///
/// # Safety
/// `model` must be a live handle and `count` writable.
#[no_mangle]
pub unsafe extern "C" fn tb_model_event_count(model: *const TbModel, count: *mut usize) -> TbStatus {
    guard(|| {
        let m = &borrow(model, "model")?.0;
        if count.is_null() {
            return Err(Failure::new(TbStatus::NullPointer, "count is null"));
        }
        *count = analyze_schedule(&m.schedule, &m.params, &m.spectral, m.duration()).events.len();
        Ok(())
    })
}

/// Whether the schedule runs a hysteresis cycle, and its switch times
/// (NaN when none is found). `t_up` and `t_down` may be null.
///
/// # Safety
/// `model` must be a live handle and `found` writable.
#[no_mangle]
pub unsafe extern "C" fn tb_model_hysteresis(
    model: *const TbModel,
    found: *mut bool,
    t_up: *mut f64,
    t_down: *mut f64,
) -> TbStatus {
    guard(|| {
        let m = &borrow(model, "model")?.0;
        if found.is_null() {
            return Err(Failure::new(TbStatus::NullPointer, "found is null"));
        }
        let h = analyze_schedule(&m.schedule, &m.params, &m.spectral, m.duration()).hysteresis;
        *found = h.found;
        if !t_up.is_null() {
            *t_up = h.t_up.unwrap_or(f64::NAN);
        }
        if !t_down.is_null() {
            *t_down = h.t_down.unwrap_or(f64::NAN);
        }
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tb_model_free(model: *mut TbModel) {
    release(model);
}

/// Integrates the scalar amplitude over the model's duration at `sample_rate`.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tb_simulate(model: *const TbModel, sample_rate: u32, out: *mut *mut TbTrace) -> TbStatus {
    guard(|| {
        let m = &borrow(model, "model")?.0;
        if sample_rate == 0 {
            return Err(Failure::new(TbStatus::InvalidArgument, "sample rate must be positive"));
        }
        let dt = 1.0 / f64::from(sample_rate);
        let series = integrate_scalar(m.rho0, &m.schedule, &m.params, m.duration(), dt)?;
        emit(
            out,
            TbTrace {
                rho: series.values,
                sample_rate,
                spectral: m.spectral.clone(),
            },
        )
    })
}

/// Number of samples, or 0 for a null handle.
///
/// # Safety
/// `trace` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tb_trace_len(trace: *const TbTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.rho.len())
}

/// Copies the amplitude series; `written` (optional) receives its length.
///
/// # Safety
/// `trace` must be a live handle; `dest` must have room for `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn tb_trace_copy_rho(
    trace: *const TbTrace,
    dest: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> TbStatus {
    guard(|| copy_out(&borrow(trace, "trace")?.rho, dest, capacity, written))
}

/// Sums the partials along the trace, scaled down only if it would clip.
///
/// # Safety
/// `trace` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tb_trace_synthesize(trace: *const TbTrace, out: *mut *mut TbAudio) -> TbStatus {
    guard(|| {
        let t = borrow(trace, "trace")?;
        let r1: Vec<f64> = t.rho.iter().map(|r| r / t.spectral.rho_sum).collect();
        emit(out, TbAudio(synthesize(&r1, &t.spectral, None, t.sample_rate)?.buffer))
    })
}

/// # Safety
/// `trace` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tb_trace_free(trace: *mut TbTrace) {
    release(trace);
}
