#ifndef TONEBIF_H
#define TONEBIF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result of every fallible call.
typedef enum TbStatus {
  TB_STATUS_OK = 0,
  // A required pointer argument was null.
  TB_STATUS_NULL_POINTER = 1,
  // An argument was out of range or a string was not valid UTF-8.
  TB_STATUS_INVALID_ARGUMENT = 2,
  // A file could not be read, written or parsed.
  TB_STATUS_IO = 3,
  // The recording could not be analyzed (no partials, no envelope, silence).
  TB_STATUS_ANALYSIS = 4,
  // The model could not be fitted to the envelope.
  TB_STATUS_FIT = 5,
  // A trajectory escaped or left the invariant leaf.
  TB_STATUS_NUMERIC = 6,
  // The output buffer is too small; the required length was written.
  TB_STATUS_BUFFER_TOO_SMALL = 7,
  // The library panicked; the handle arguments should be treated as lost.
  TB_STATUS_PANIC = 8,
} TbStatus;

// A mono recording or synthesized note.
typedef struct TbAudio TbAudio;

// A fitted oscillator model.
typedef struct TbModel TbModel;

// Frequencies and amplitudes of the analyzed partials.
typedef struct TbSpectral TbSpectral;

// Scalar amplitude sampled over a model's duration.
typedef struct TbTrace TbTrace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread, or null if the most
// recent call returning a [`TbStatus`] succeeded. The pointer stays valid
// until the next such call from the same thread.
const char *tb_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *tb_version(void);

// Reads a PCM or float WAV file, averaging channels to mono.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum TbStatus tb_audio_read(const char *path, struct TbAudio **out);

// Wraps `len` samples in `[-1, 1]` taken at `sample_rate` Hz.
//
// # Safety
// `samples` must point to `len` readable values and `out` must be writable.
enum TbStatus tb_audio_from_samples(const double *samples,
                                    size_t len,
                                    uint32_t sample_rate,
                                    struct TbAudio **out);

// Writes 16-bit PCM, clipping samples outside `[-1, 1]`.
//
// # Safety
// `audio` must be a live handle and `path` a NUL-terminated string.
enum TbStatus tb_audio_write(const struct TbAudio *audio, const char *path);

// Number of samples, or 0 for a null handle.
//
// # Safety
// `audio` must be null or a live handle.
size_t tb_audio_len(const struct TbAudio *audio);

// Sample rate in Hz, or 0 for a null handle.
//
// # Safety
// `audio` must be null or a live handle.
uint32_t tb_audio_sample_rate(const struct TbAudio *audio);

// Copies the samples into `dest`. `written` (optional) receives the sample
// count even when `capacity` is too small.
//
// # Safety
// `audio` must be a live handle; `dest` must have room for `capacity` values.
enum TbStatus tb_audio_copy_samples(const struct TbAudio *audio,
                                    double *dest,
                                    size_t capacity,
                                    size_t *written);

// # Safety
// `audio` must be null or a handle not yet freed.
void tb_audio_free(struct TbAudio *audio);

// Finds the fundamental and `partials - 1` overtones of a recording.
//
// # Safety
// `audio` must be a live handle and `out` writable.
enum TbStatus tb_analyze(const struct TbAudio *audio, size_t partials, struct TbSpectral **out);

// Number of partials, not counting the constant term.
//
// # Safety
// `spectral` must be null or a live handle.
size_t tb_spectral_partials(const struct TbSpectral *spectral);

// Sum of amplitudes relative to the fundamental's, or NaN for a null handle.
//
// # Safety
// `spectral` must be null or a live handle.
double tb_spectral_rho_sum(const struct TbSpectral *spectral);

// Copies frequencies (Hz) and amplitudes, constant term first. Both buffers
// need `partials + 1` slots; `written` (optional) receives that count.
//
// # Safety
// `spectral` must be a live handle; each buffer must have room for `capacity` values.
enum TbStatus tb_spectral_copy(const struct TbSpectral *spectral,
                               double *frequencies_hz,
                               double *amplitudes,
                               size_t capacity,
                               size_t *written);

// # Safety
// `spectral` must be null or a handle not yet freed.
void tb_spectral_free(struct TbSpectral *spectral);

// Fits a model to the recording's envelope with default settings.
//
// # Safety
// `audio` and `spectral` must be live handles and `out` writable.
enum TbStatus tb_fit(const struct TbAudio *audio,
                     const struct TbSpectral *spectral,
                     struct TbModel **out);

// Loads a model written by `tb_model_write` or the command-line tool.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum TbStatus tb_model_read(const char *path, struct TbModel **out);

// # Safety
// `model` must be a live handle and `path` a NUL-terminated string.
enum TbStatus tb_model_write(const struct TbModel *model, const char *path);

// Note length in seconds, or NaN for a null handle.
//
// # Safety
// `model` must be null or a live handle.
double tb_model_duration(const struct TbModel *model);

// Number of bifurcation events the schedule causes.
//
// # Safety
// `model` must be a live handle and `count` writable.
enum TbStatus tb_model_event_count(const struct TbModel *model, size_t *count);

// Whether the schedule runs a hysteresis cycle, and its switch times
// (NaN when none is found). `t_up` and `t_down` may be null.
//
// # Safety
// `model` must be a live handle and `found` writable.
enum TbStatus tb_model_hysteresis(const struct TbModel *model,
                                  bool *found,
                                  double *t_up,
                                  double *t_down);

// # Safety
// `model` must be null or a handle not yet freed.
void tb_model_free(struct TbModel *model);

// Integrates the scalar amplitude over the model's duration at `sample_rate`.
//
// # Safety
// `model` must be a live handle and `out` writable.
enum TbStatus tb_simulate(const struct TbModel *model, uint32_t sample_rate, struct TbTrace **out);

// Number of samples, or 0 for a null handle.
//
// # Safety
// `trace` must be null or a live handle.
size_t tb_trace_len(const struct TbTrace *trace);

// Copies the amplitude series; `written` (optional) receives its length.
//
// # Safety
// `trace` must be a live handle; `dest` must have room for `capacity` values.
enum TbStatus tb_trace_copy_rho(const struct TbTrace *trace,
                                double *dest,
                                size_t capacity,
                                size_t *written);

// Sums the partials along the trace, scaled down only if it would clip.
//
// # Safety
// `trace` must be a live handle and `out` writable.
enum TbStatus tb_trace_synthesize(const struct TbTrace *trace, struct TbAudio **out);

// # Safety
// `trace` must be null or a handle not yet freed.
void tb_trace_free(struct TbTrace *trace);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TONEBIF_H */
