//! Command-line front end: `analyze`, `fit`, `simulate` and `verify`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use crate::artifacts::{
    read_model, write_json, write_model, write_text, write_trace, EnvelopeFile, VerifyFile,
};
use crate::audio_io::{read_wav, write_wav, AudioBuffer};
use crate::bifurcation::{analyze_schedule, narrate};
use crate::constants::{DEFAULT_PARTIALS, DEFAULT_SAMPLE_RATE, HEARING_THRESHOLD};
use crate::controller::{build_model, FitConfig, SustainMode};
use crate::dynamics::{integrate_full, integrate_scalar, leaf_residual, reconstruct_amplitudes};
use crate::envelope::{segment_envelope, upper_envelope};
use crate::error::{Error, Result};
use crate::spectral::{analyze, Analysis, AnalysisConfig, Window};
use crate::synthesis::{
    envelope_gap, envelope_max_error, partial_ratio_report, synthesize, verify_modulation_bound,
};

#[derive(Debug, Parser)]
#[command(name = "tonebif", version, about = "Fit and re-synthesize musical tones with a bifurcation-controlled oscillator model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract the spectral vector of a recorded note.
    Analyze(AnalyzeArgs),
    /// Fit a model to a recorded note.
    Fit(FitArgs),
    /// Integrate a model, synthesize audio and report bifurcations.
    Simulate(SimulateArgs),
    /// Compare an original recording with its resynthesis.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct SpectralOptions {
    /// Number of partials, fundamental included.
    #[arg(long = "partials", visible_alias = "np", default_value_t = DEFAULT_PARTIALS)]
    pub partials: usize,
    #[arg(long, value_enum, default_value_t = Window::Rect)]
    pub window: Window,
    /// Search for the fundamental near this frequency instead of the largest peak.
    #[arg(long)]
    pub fundamental: Option<f64>,
    /// Drop partials quieter than this fraction of the spectrum maximum.
    #[arg(long)]
    pub min_amplitude: Option<f64>,
}

impl SpectralOptions {
    fn config(&self) -> AnalysisConfig {
        AnalysisConfig {
            partials: self.partials,
            window: self.window,
            fundamental_hint: self.fundamental,
            min_amplitude: self.min_amplitude,
        }
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub spectral: SpectralOptions,
    #[arg(long, default_value = "spectral.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub spectral: SpectralOptions,
    /// Offset of the unstable sustain level below the envelope.
    #[arg(long, default_value_t = 0.03)]
    pub epsilon: f64,
    /// Largest tracking error tolerated on a subinterval.
    #[arg(long, default_value_t = crate::constants::FIT_TOLERANCE)]
    pub tolerance: f64,
    /// Audibility threshold that delimits the delay and release.
    #[arg(long, default_value_t = HEARING_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value_t = SustainMode::Auto)]
    pub sustain: SustainMode,
    #[arg(long)]
    pub rho0: Option<f64>,
    #[arg(long)]
    pub mu0: Option<f64>,
    #[arg(long, default_value = "model.json")]
    pub out: PathBuf,
    /// Defaults to `envelope.json` beside the model.
    #[arg(long)]
    pub envelope: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub model: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE)]
    pub rate: u32,
    /// Integrate every oscillator instead of the scalar amplitude alone.
    #[arg(long)]
    pub full: bool,
    #[arg(long, default_value = "out.wav")]
    pub out: PathBuf,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Add Cartesian coordinates to the trace (requires --full).
    #[arg(long, requires = "full")]
    pub trace_xy: bool,
    /// The narrative goes next to it with a `.txt` extension.
    #[arg(long, default_value = "report.json")]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub original: PathBuf,
    pub synthesized: PathBuf,
    #[arg(long = "partials", visible_alias = "np", default_value_t = DEFAULT_PARTIALS)]
    pub partials: usize,
    #[arg(long, default_value = "verify.json")]
    pub out: PathBuf,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Analyze(args) => cmd_analyze(&args),
        Command::Fit(args) => cmd_fit(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Verify(args) => cmd_verify(&args),
    }
}

fn analyze_file(path: &Path, options: &SpectralOptions) -> Result<(AudioBuffer, Analysis)> {
    let buffer = read_wav(path)?;
    let analysis = analyze(&buffer, &options.config())?;
    Ok((buffer, analysis))
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<()> {
    let (_, analysis) = analyze_file(&args.input, &args.spectral)?;
    let sv = &analysis.spectral;
    println!("partial  frequency_hz  amplitude");
    println!("{:>7}  {:>12.3}  {:>9.5}", 0, 0.0, sv.d[0]);
    for p in &analysis.peaks {
        println!("{:>7}  {:>12.3}  {:>9.5}", p.index, p.frequency, p.amplitude);
    }
    println!("rho_sum = {:.5}", sv.rho_sum);
    write_json(&args.out, sv)
}

pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    let (buffer, analysis) = analyze_file(&args.input, &args.spectral)?;
    let gap = envelope_gap(buffer.sample_rate, analysis.spectral.fundamental_hz());
    let gamma = upper_envelope(&buffer, gap)?;
    let plan = segment_envelope(&gamma, args.threshold)?;
    let config = FitConfig {
        epsilon: args.epsilon,
        tolerance: args.tolerance,
        sustain: args.sustain,
        rho0: args.rho0,
        mu0: args.mu0,
        ..FitConfig::default()
    };
    let (model, report) = build_model(&analysis.spectral, &gamma, &plan, &config)?;

    println!(
        "a = {}, b = {:.6}, alpha = {:.6}, rho0 = {:.6}",
        model.params.a, model.params.b, model.params.alpha, model.rho0
    );
    println!("{:<8} {:>10} {:>10} {:>14} {:>10}", "segment", "start", "end", "mu", "max_err");
    for interval in &report.intervals {
        let label = format!("{:?}", interval.label).to_lowercase();
        let mut start = interval.start;
        let ends = interval.breaking_points.iter().copied().chain([interval.end]);
        for (mu, end) in interval.mus.iter().zip(ends) {
            println!("{label:<8} {start:>10.4} {end:>10.4} {mu:>14.6} {:>10.5}", interval.max_error);
            start = end;
        }
    }

    write_model(&args.out, &model)?;
    let envelope_path = args.envelope.clone().unwrap_or_else(|| sibling(&args.out, "envelope.json"));
    write_json(envelope_path, &EnvelopeFile::new(&gamma, &model.plan))
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let model = read_model(&args.model)?;
    let dt = 1.0 / f64::from(args.rate);
    let duration = model.duration();
    let sv = &model.spectral;

    let (rho, trajectory) = if args.full {
        let traj = integrate_full(&model, duration, dt)?;
        let residual = leaf_residual(&traj, sv);
        println!("leaf residual: absolute {:.3e}, relative {:.3e}", residual.absolute, residual.relative);
        if !residual.on_leaf() {
            return Err(Error::LeafViolation {
                residual: residual.relative,
            });
        }
        let rho: Vec<f64> = traj.radii(1).iter().map(|r| r * sv.rho_sum).collect();
        (rho, Some(traj))
    } else {
        (integrate_scalar(model.rho0, &model.schedule, &model.params, duration, dt)?.values, None)
    };

    let r1: Vec<f64> = rho.iter().map(|r| r / sv.rho_sum).collect();
    let synthesis = synthesize(&r1, sv, None, args.rate)?;
    if synthesis.gain != 1.0 {
        warn!("output normalized by gain {}", synthesis.gain);
    }
    let written = write_wav(&synthesis.buffer, &args.out)?;
    if written.clipped > 0 {
        warn!("{} samples clipped", written.clipped);
    }

    let scaled: Vec<Vec<f64>> = reconstruct_amplitudes(&r1, sv)
        .into_iter()
        .map(|series| series.into_iter().map(|r| r * synthesis.gain).collect())
        .collect();
    let modulation = verify_modulation_bound(&synthesis.buffer, &scaled, sv)?;
    if let Some(w) = &modulation.warning {
        warn!("{w}");
    }
    info!("modulation bound {}", if modulation.pass { "holds" } else { "fails" });

    if let Some(path) = &args.trace {
        write_trace(path, &rho, dt, &model, trajectory.as_ref(), args.trace_xy)?;
    }

    let report = analyze_schedule(&model.schedule, &model.params, sv, duration);
    let text = narrate(&report.events, &report.inventories);
    print!("{text}");
    write_json(&args.report, &report)?;
    write_text(args.report.with_extension("txt"), &text)
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<()> {
    let config = AnalysisConfig {
        partials: args.partials,
        ..AnalysisConfig::default()
    };
    let original = read_wav(&args.original)?;
    let synthesized = read_wav(&args.synthesized)?;
    let reference = analyze(&original, &config)?;
    let resynth = analyze(&synthesized, &config)?;

    let ratios_original = partial_ratio_report(&original, args.partials)?;
    let ratios_synthesized = partial_ratio_report(&synthesized, args.partials)?;
    let deltas: Vec<f64> = ratios_original
        .iter()
        .zip(&ratios_synthesized)
        .map(|(a, b)| b - a)
        .collect();
    let max_delta = deltas.iter().fold(0.0f64, |m, d| m.max(d.abs()));

    let f_orig = reference.spectral.fundamental_hz();
    let f_synth = resynth.spectral.fundamental_hz();
    let warning = ((f_synth - f_orig).abs() > 0.03 * f_orig).then(|| {
        format!("fundamentals differ by more than 3%: {f_orig:.3} Hz vs {f_synth:.3} Hz")
    });
    if let Some(w) = &warning {
        warn!("{w}");
    }

    let gap = envelope_gap(original.sample_rate, f_orig);
    let envelope_error = envelope_max_error(&original, &synthesized, gap)?;

    // Amplitudes of the synthesized partials are recovered from its envelope.
    let sv = &resynth.spectral;
    let gamma = upper_envelope(&synthesized, envelope_gap(synthesized.sample_rate, f_synth))?;
    let dt = synthesized.dt();
    let r1: Vec<f64> = (0..synthesized.len())
        .map(|k| gamma.eval(k as f64 * dt) / sv.rho_sum)
        .collect();
    let modulation = verify_modulation_bound(&synthesized, &reconstruct_amplitudes(&r1, sv), sv)?;

    println!("partial  original  synthesized     delta");
    for (i, ((a, b), d)) in ratios_original.iter().zip(&ratios_synthesized).zip(&deltas).enumerate() {
        println!("{:>7}  {a:>8.4}  {b:>11.4}  {d:>8.4}", i + 1);
    }
    println!("envelope max error {envelope_error:.5}");

    write_json(
        &args.out,
        &VerifyFile {
            fundamental_original: f_orig,
            fundamental_synthesized: f_synth,
            ratios_original,
            ratios_synthesized,
            deltas,
            max_delta,
            envelope_max_error: envelope_error,
            modulation,
            warning,
        },
    )
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().map_or_else(|| PathBuf::from(name), |dir| dir.join(name))
}
