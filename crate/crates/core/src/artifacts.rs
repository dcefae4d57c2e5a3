//! On-disk formats exchanged between pipeline stages.
//!
//! JSON floats are written with 17 significant digits so every value
//! survives a round trip bit for bit and identical runs produce identical
//! files.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::controller::ControllerModel;
use crate::dynamics::{AmplitudeParams, Trajectory};
use crate::envelope::{EnvelopeCurve, SegmentKind, SegmentPlan};
use crate::error::{Error, Result};
use crate::schedule::{MuSchedule, MuStep};
use crate::spectral::SpectralVector;
use crate::synthesis::ModulationReport;

/// Pretty JSON formatter that prints `f64` in scientific notation with 17
/// significant digits.
struct ExactFloats<'a>(PrettyFormatter<'a>);

impl Formatter for ExactFloats<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes `value` as pretty JSON with exact floats.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, ExactFloats(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .expect("artifact types serialize without error");
    out.push(b'\n');
    String::from_utf8(out).expect("JSON output is UTF-8")
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_json_string(value)).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Artifact {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Fitted model as stored in `model.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub n: usize,
    pub nu: Vec<f64>,
    pub omega: Vec<f64>,
    pub c: Vec<f64>,
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub rho_sum: f64,
    pub rho0: f64,
    pub schedule: Vec<MuStep>,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    pub borders: Vec<f64>,
    pub labels: Vec<SegmentKind>,
    pub breaking_points: Vec<Vec<f64>>,
}

impl From<&ControllerModel> for ModelFile {
    fn from(m: &ControllerModel) -> Self {
        Self {
            n: m.spectral.n,
            nu: m.spectral.nu.clone(),
            omega: m.spectral.omega.clone(),
            c: m.spectral.d.clone(),
            a: m.params.a,
            b: m.params.b,
            alpha: m.params.alpha,
            rho_sum: m.spectral.rho_sum,
            rho0: m.rho0,
            schedule: m.schedule.steps().to_vec(),
            x0: m.x0.clone(),
            y0: m.y0.clone(),
            borders: m.plan.borders.clone(),
            labels: m.plan.labels.clone(),
            breaking_points: m.plan.breaking_points.clone(),
        }
    }
}

impl ModelFile {
    /// Rebuilds the model; frequencies and the amplitude sum are recomputed
    /// from `nu` and `c`.
    pub fn into_model(self) -> Result<ControllerModel> {
        let spectral = SpectralVector::from_parts(self.nu, self.c)?;
        if spectral.n != self.n {
            return Err(Error::InvalidInput(format!(
                "model declares n = {} but lists {} partials",
                self.n, spectral.n
            )));
        }
        let model = ControllerModel {
            spectral,
            params: AmplitudeParams::new(self.a, self.b, self.alpha),
            schedule: MuSchedule::new(self.schedule)?,
            plan: SegmentPlan::with_breaking_points(self.borders, self.labels, self.breaking_points)?,
            rho0: self.rho0,
            x0: self.x0,
            y0: self.y0,
        };
        model.validate()?;
        Ok(model)
    }
}

pub fn write_model(path: impl AsRef<Path>, model: &ControllerModel) -> Result<()> {
    write_json(path, &ModelFile::from(model))
}

pub fn read_model(path: impl AsRef<Path>) -> Result<ControllerModel> {
    let path = path.as_ref();
    read_json::<ModelFile>(path)?.into_model().map_err(|e| match e {
        Error::InvalidInput(message) => Error::Artifact {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

pub fn read_spectral(path: impl AsRef<Path>) -> Result<SpectralVector> {
    let path = path.as_ref();
    let sv: SpectralVector = read_json(path)?;
    sv.validate().map_err(|e| Error::Artifact {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(sv)
}

/// Envelope knots and segmentation as stored in `envelope.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFile {
    pub sample_rate: f64,
    pub start: f64,
    pub end: f64,
    pub knot_times: Vec<f64>,
    pub knot_values: Vec<f64>,
    pub borders: Vec<f64>,
    pub labels: Vec<SegmentKind>,
    pub breaking_points: Vec<Vec<f64>>,
}

impl EnvelopeFile {
    pub fn new(gamma: &EnvelopeCurve, plan: &SegmentPlan) -> Self {
        Self {
            sample_rate: gamma.sample_rate(),
            start: gamma.start(),
            end: gamma.end(),
            knot_times: gamma.knot_times().to_vec(),
            knot_values: gamma.knot_values().to_vec(),
            borders: plan.borders.clone(),
            labels: plan.labels.clone(),
            breaking_points: plan.breaking_points.clone(),
        }
    }

    pub fn curve(&self) -> Result<EnvelopeCurve> {
        EnvelopeCurve::from_knots(
            self.knot_times.clone(),
            self.knot_values.clone(),
            (self.start, self.end),
            self.sample_rate,
        )
    }

    pub fn plan(&self) -> Result<SegmentPlan> {
        SegmentPlan::with_breaking_points(
            self.borders.clone(),
            self.labels.clone(),
            self.breaking_points.clone(),
        )
    }
}

/// Comparison of an original and a synthesized note, stored in `verify.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyFile {
    pub fundamental_original: f64,
    pub fundamental_synthesized: f64,
    pub ratios_original: Vec<f64>,
    pub ratios_synthesized: Vec<f64>,
    pub deltas: Vec<f64>,
    pub max_delta: f64,
    pub envelope_max_error: f64,
    pub modulation: ModulationReport,
    pub warning: Option<String>,
}

/// Writes `t, rho, r_0..r_n, mu` rows, optionally followed by `x_i, y_i`.
///
/// `rho` is the scalar amplitude sampled every `dt`; the radii are derived
/// from it unless a full trajectory is supplied.
pub fn write_trace(
    path: impl AsRef<Path>,
    rho: &[f64],
    dt: f64,
    model: &ControllerModel,
    full: Option<&Trajectory>,
    with_xy: bool,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let count = model.spectral.n + 1;
    write_trace_rows(&mut out, rho, dt, model, full, with_xy, count).map_err(|e| Error::io(path, e))
}

fn write_trace_rows(
    out: &mut impl Write,
    rho: &[f64],
    dt: f64,
    model: &ControllerModel,
    full: Option<&Trajectory>,
    with_xy: bool,
    count: usize,
) -> io::Result<()> {
    let mut header = vec!["t".to_string(), "rho".to_string()];
    header.extend((0..count).map(|i| format!("r_{i}")));
    header.push("mu".into());
    let xy = with_xy && full.is_some();
    if xy {
        for i in 0..count {
            header.push(format!("x_{i}"));
            header.push(format!("y_{i}"));
        }
    }
    writeln!(out, "{}", header.join(","))?;

    let sv = &model.spectral;
    let mut row = String::new();
    for (k, &value) in rho.iter().enumerate() {
        row.clear();
        let t = k as f64 * dt;
        push_field(&mut row, t);
        push_field(&mut row, value);
        for i in 0..count {
            let r = match full {
                Some(traj) => traj.radius(i, k),
                None => sv.ratio(i).abs() * value / sv.rho_sum,
            };
            push_field(&mut row, r);
        }
        push_field(&mut row, model.schedule.evaluate(t));
        if let (true, Some(traj)) = (xy, full) {
            for i in 0..count {
                push_field(&mut row, traj.x[i][k]);
                push_field(&mut row, traj.y[i][k]);
            }
        }
        writeln!(out, "{row}")?;
    }
    out.flush()
}

fn push_field(row: &mut String, value: f64) {
    use std::fmt::Write as _;
    if !row.is_empty() {
        row.push(',');
    }
    let _ = write!(row, "{value:.16e}");
}
