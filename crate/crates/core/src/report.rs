//! JSON reports with 17 significant digits and CSV plot series.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;

use crate::bubble::checks::AnnulusArea;
use crate::continuation::StageReport;
use crate::error::{CmlError, Result};
use crate::measure::FluxProfile;

/// Writes floats as `d.dddddddddddddddde±x`, enough digits to round-trip.
struct ExactFloats<'a>(PrettyFormatter<'a>);

impl Formatter for ExactFloats<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        if v.is_finite() {
            write!(w, "{v:.16e}")
        } else {
            w.write_all(b"null")
        }
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
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

/// Pretty JSON with every float at 17 significant digits.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut buf, ExactFloats(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .map_err(|e| CmlError::InvalidInput(format!("serialization: {e}")))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

/// Parses a report and writes it back out in canonical form.
pub fn reemit(json: &str) -> Result<String> {
    let v: Value = serde_json::from_str(json)
        .map_err(|e| CmlError::InvalidInput(format!("report JSON: {e}")))?;
    to_json(&v)
}

/// Top-level record written by every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub exit_code: i32,
    pub hypothesis_violation: bool,
    #[serde(default)]
    pub stages: Vec<StageReport>,
    #[serde(default)]
    pub flux: Option<FluxProfile>,
    #[serde(default)]
    pub annuli: Vec<AnnulusArea>,
    /// Command-specific payload.
    #[serde(default)]
    pub details: Value,
}

impl RunReport {
    pub fn new(command: &str) -> Self {
        RunReport {
            command: command.to_string(),
            exit_code: 0,
            hypothesis_violation: false,
            stages: Vec::new(),
            flux: None,
            annuli: Vec::new(),
            details: Value::Null,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| CmlError::InvalidInput(format!("{}: {e}", path.display())))
    }
}

pub const STAGES_CSV: &str = "stages.csv";
pub const FLUX_CSV: &str = "flux.csv";
pub const ANNULI_CSV: &str = "annuli.csv";
pub const REPORT_JSON: &str = "report.json";

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn stages_csv(stages: &[StageReport]) -> String {
    let mut s = String::from("stage,area,gbDefect\n");
    for st in stages {
        s.push_str(&format!(
            "{},{},{}\n",
            st.k,
            num(st.area),
            num(st.gb_defect)
        ));
    }
    s
}

pub fn flux_csv(flux: Option<&FluxProfile>) -> String {
    let mut s = String::from("r,flux\n");
    for f in flux.map(|p| p.samples()).unwrap_or_default() {
        s.push_str(&format!("{},{}\n", num(f.r), num(f.flux)));
    }
    s
}

pub fn annuli_csv(annuli: &[AnnulusArea]) -> String {
    let mut s = String::from("index,inner,outer,area\n");
    for (j, a) in annuli.iter().enumerate() {
        s.push_str(&format!(
            "{j},{},{},{}\n",
            num(a.inner),
            num(a.outer),
            num(a.area)
        ));
    }
    s
}

/// Writes the three plot series into `dir`; missing series give header-only files.
pub fn emit_plot_data(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let files = [
        (STAGES_CSV, stages_csv(&report.stages)),
        (FLUX_CSV, flux_csv(report.flux.as_ref())),
        (ANNULI_CSV, annuli_csv(&report.annuli)),
    ];
    let mut out = Vec::new();
    for (name, body) in files {
        let p = dir.join(name);
        std::fs::write(&p, body)?;
        out.push(p);
    }
    Ok(out)
}

/// Writes `report.json` plus the CSV series.
pub fn write_report(report: &RunReport, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let p = dir.join(REPORT_JSON);
    std::fs::write(&p, to_json(report)?)?;
    emit_plot_data(report, dir)?;
    Ok(p)
}
