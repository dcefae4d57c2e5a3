use std::ffi::{CStr, CString};
use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::ptr;

use tempfile::TempDir;
use tonebif_ffi::*;

const RATE: u32 = 44_100;

fn last_error() -> String {
    let message = tb_last_error_message();
    assert!(!message.is_null());
    unsafe { CStr::from_ptr(message) }.to_string_lossy().into_owned()
}

fn c_path(path: &Path) -> CString {
    CString::new(path.to_str().unwrap()).unwrap()
}

/// Harmonic note that rises over 50 ms from near silence, holds and then fades.
fn note_samples() -> Vec<f64> {
    let amplitudes = [0.5, 0.25, 0.12];
    (0..(1.5 * f64::from(RATE)) as usize)
        .map(|k| {
            let t = k as f64 / f64::from(RATE);
            let envelope = if t < 0.1 {
                0.0
            } else if t < 0.15 {
                (t - 0.1) / 0.05
            } else if t < 1.0 {
                1.0
            } else {
                (-(t - 1.0) * 8.0).exp()
            };
            let carrier: f64 = amplitudes
                .iter()
                .enumerate()
                .map(|(i, a)| a * (2.0 * PI * 220.0 * (i + 1) as f64 * t).sin())
                .sum();
            0.9 * envelope * carrier
        })
        .collect()
}

unsafe fn audio_from(samples: &[f64]) -> *mut TbAudio {
    let mut audio = ptr::null_mut();
    assert_eq!(tb_audio_from_samples(samples.as_ptr(), samples.len(), RATE, &mut audio), TbStatus::Ok);
    audio
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(tb_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn audio_round_trips_through_a_file() {
    let dir = TempDir::new().unwrap();
    let path = c_path(&dir.path().join("tone.wav"));
    let samples: Vec<f64> = (0..4410).map(|k| 0.5 * (k as f64 * 0.05).sin()).collect();
    unsafe {
        let audio = audio_from(&samples);
        assert_eq!(tb_audio_write(audio, path.as_ptr()), TbStatus::Ok);
        tb_audio_free(audio);

        let mut read = ptr::null_mut();
        assert_eq!(tb_audio_read(path.as_ptr(), &mut read), TbStatus::Ok);
        assert_eq!(tb_audio_len(read), samples.len());
        assert_eq!(tb_audio_sample_rate(read), RATE);

        let mut written = 0;
        let mut small = [0.0; 4];
        let status = tb_audio_copy_samples(read, small.as_mut_ptr(), small.len(), &mut written);
        assert_eq!(status, TbStatus::BufferTooSmall);
        assert_eq!(written, samples.len());
        assert!(last_error().contains("needed"));

        let mut back = vec![0.0; written];
        assert_eq!(tb_audio_copy_samples(read, back.as_mut_ptr(), back.len(), ptr::null_mut()), TbStatus::Ok);
        assert!(tb_last_error_message().is_null());
        for (a, b) in samples.iter().zip(&back) {
            assert!((a - b).abs() < 1.0 / 32768.0 + 1e-12);
        }
        tb_audio_free(read);
    }
}

#[test]
fn missing_file_is_an_io_error_naming_the_path() {
    let path = CString::new("/nonexistent/dir/note.wav").unwrap();
    let mut audio = ptr::null_mut();
    let status = unsafe { tb_audio_read(path.as_ptr(), &mut audio) };
    assert_eq!(status, TbStatus::Io);
    assert!(audio.is_null());
    assert!(last_error().contains("note.wav"));
}

#[test]
fn null_arguments_are_rejected() {
    unsafe {
        let mut audio = ptr::null_mut();
        assert_eq!(tb_audio_read(ptr::null(), &mut audio), TbStatus::NullPointer);
        assert_eq!(tb_audio_from_samples(ptr::null(), 3, RATE, &mut audio), TbStatus::NullPointer);
        let mut spectral = ptr::null_mut();
        assert_eq!(tb_analyze(ptr::null(), 6, &mut spectral), TbStatus::NullPointer);
        assert_eq!(tb_audio_len(ptr::null()), 0);
        assert!(tb_model_duration(ptr::null()).is_nan());
        tb_audio_free(ptr::null_mut());
        tb_model_free(ptr::null_mut());
    }
}

#[test]
fn invalid_arguments_are_reported() {
    unsafe {
        let mut audio = ptr::null_mut();
        let samples = [0.1, 0.2];
        assert_eq!(tb_audio_from_samples(samples.as_ptr(), 2, 0, &mut audio), TbStatus::InvalidArgument);
        let bad = [0xffu8, 0xfe, 0];
        assert_eq!(tb_audio_read(bad.as_ptr().cast(), &mut audio), TbStatus::InvalidArgument);
        assert!(last_error().contains("UTF-8"));
    }
}

#[test]
fn pipeline_runs_end_to_end() {
    let dir = TempDir::new().unwrap();
    let model_path = c_path(&dir.path().join("model.json"));
    unsafe {
        let audio = audio_from(&note_samples());

        let mut spectral = ptr::null_mut();
        assert_eq!(tb_analyze(audio, 3, &mut spectral), TbStatus::Ok, "{}", last_error());
        assert_eq!(tb_spectral_partials(spectral), 3);
        let mut freqs = [0.0; 4];
        let mut amps = [0.0; 4];
        let mut count = 0;
        assert_eq!(tb_spectral_copy(spectral, freqs.as_mut_ptr(), amps.as_mut_ptr(), 4, &mut count), TbStatus::Ok);
        assert_eq!(count, 4);
        assert_eq!(freqs[0], 0.0);
        for (i, f) in freqs[1..].iter().enumerate() {
            assert!((f - 220.0 * (i + 1) as f64).abs() < 1.0, "{freqs:?}");
        }
        assert!((amps[2] / amps[1] - 0.5).abs() < 0.02, "{amps:?}");
        let rho_sum = tb_spectral_rho_sum(spectral);
        assert!((rho_sum - amps.iter().sum::<f64>() / amps[1]).abs() < 1e-12);

        let mut model = ptr::null_mut();
        assert_eq!(tb_fit(audio, spectral, &mut model), TbStatus::Ok, "{}", last_error());
        assert!((tb_model_duration(model) - 1.5).abs() < 1e-3);
        assert_eq!(tb_model_write(model, model_path.as_ptr()), TbStatus::Ok);

        let mut reloaded = ptr::null_mut();
        assert_eq!(tb_model_read(model_path.as_ptr(), &mut reloaded), TbStatus::Ok);
        let mut events = 0;
        assert_eq!(tb_model_event_count(reloaded, &mut events), TbStatus::Ok);
        let mut found = true;
        let (mut up, mut down) = (0.0, 0.0);
        assert_eq!(tb_model_hysteresis(reloaded, &mut found, &mut up, &mut down), TbStatus::Ok);
        if !found {
            assert!(up.is_nan() && down.is_nan());
        }

        let mut trace = ptr::null_mut();
        assert_eq!(tb_simulate(reloaded, RATE, &mut trace), TbStatus::Ok, "{}", last_error());
        let len = tb_trace_len(trace);
        assert_eq!(len, tb_audio_len(audio));
        let mut rho = vec![0.0; len];
        assert_eq!(tb_trace_copy_rho(trace, rho.as_mut_ptr(), len, ptr::null_mut()), TbStatus::Ok);
        assert!(rho.iter().all(|r| r.is_finite() && *r >= 0.0));

        let mut synth = ptr::null_mut();
        assert_eq!(tb_trace_synthesize(trace, &mut synth), TbStatus::Ok);
        assert_eq!(tb_audio_len(synth), len);
        let mut out = vec![0.0; len];
        assert_eq!(tb_audio_copy_samples(synth, out.as_mut_ptr(), len, ptr::null_mut()), TbStatus::Ok);
        assert!(out.iter().all(|s| s.abs() <= 1.0));

        tb_audio_free(synth);
        tb_trace_free(trace);
        tb_model_free(reloaded);
        tb_model_free(model);
        tb_spectral_free(spectral);
        tb_audio_free(audio);
    }
}

#[test]
fn silence_cannot_be_fitted() {
    unsafe {
        let audio = audio_from(&vec![0.0; RATE as usize]);
        let mut spectral = ptr::null_mut();
        let status = tb_analyze(audio, 3, &mut spectral);
        assert_ne!(status, TbStatus::Ok);
        assert!(matches!(status, TbStatus::Analysis | TbStatus::Fit), "{status:?}: {}", last_error());
        tb_audio_free(audio);
    }
}

#[test]
fn malformed_model_file_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("model.json");
    std::fs::write(&file, "[1, 2").unwrap();
    let path = c_path(&file);
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { tb_model_read(path.as_ptr(), &mut model) }, TbStatus::Io);
    assert!(last_error().contains("model.json"));
}

#[test]
fn header_declares_the_interface_and_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include").join("tonebif.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "tb_audio_read",
        "tb_analyze",
        "tb_fit",
        "tb_simulate",
        "tb_trace_synthesize",
        "tb_last_error_message",
        "typedef struct TbModel TbModel;",
        "TB_STATUS_BUFFER_TOO_SMALL = 7",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }

    let dir = TempDir::new().unwrap();
    let source = dir.path().join("use.c");
    std::fs::write(
        &source,
        "#include \"tonebif.h\"\nint main(void) { TbAudio *a = 0; return tb_audio_read(\"x.wav\", &a) == TB_STATUS_OK; }\n",
    )
    .unwrap();
    let compiler = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    match Command::new(&compiler)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&source)
        .output()
    {
        Ok(out) => assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr)),
        Err(e) => eprintln!("skipping C compile check: {compiler} unavailable ({e})"),
    }
}
