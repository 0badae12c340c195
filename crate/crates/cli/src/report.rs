//! The run report and its text and JSON renderings.

use std::fmt::Write;

use ballmaps_core::map::PointRecord;
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct InputRecord {
    pub path: String,
    pub kind: &'static str,
    pub sha256: String,
    pub name: Option<String>,
    pub exact: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Settings {
    pub samples: usize,
    pub seed: u64,
    pub sampling: String,
    pub rank_tol: f64,
    pub vanish_tol: f64,
    pub frame_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lift: Option<&'static str>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PointResult {
    pub index: usize,
    pub point: Option<PointRecord>,
    pub label: String,
    pub mode: &'static str,
    pub summary: String,
    pub result: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Residual {
    pub point: Option<usize>,
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub within: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerdictRow {
    pub name: String,
    pub value: serde_json::Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub command: &'static str,
    pub input: InputRecord,
    pub settings: Settings,
    pub points: Vec<PointResult>,
    pub residuals: Vec<Residual>,
    pub verdicts: Vec<VerdictRow>,
    /// Full library report where one exists; structured output only.
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<f64>,
}

pub fn mode(exact: bool) -> &'static str {
    if exact {
        "exact"
    } else {
        "float"
    }
}

impl RunReport {
    pub fn new(command: &'static str, input: InputRecord, settings: Settings) -> Self {
        RunReport {
            command,
            input,
            settings,
            points: Vec::new(),
            residuals: Vec::new(),
            verdicts: Vec::new(),
            details: serde_json::Value::Null,
            timing_ms: None,
        }
    }

    pub fn residual(
        &mut self,
        point: Option<usize>,
        name: impl Into<String>,
        value: f64,
        tolerance: f64,
    ) {
        self.residuals.push(Residual {
            point,
            name: name.into(),
            value,
            tolerance,
            within: value <= tolerance,
        });
    }

    pub fn verdict(&mut self, name: impl Into<String>, value: impl Serialize) {
        self.verdicts.push(VerdictRow {
            name: name.into(),
            value: serde_json::to_value(value).expect("verdict values serialize"),
        });
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let s = &self.settings;
        let name = self.input.name.as_deref().unwrap_or("-");
        let _ = writeln!(out, "command   {}", self.command);
        let _ = writeln!(
            out,
            "input     {} ({} {name}, {})",
            self.input.path,
            self.input.kind,
            mode(self.input.exact)
        );
        let _ = writeln!(out, "sha256    {}", self.input.sha256);
        let _ = write!(
            out,
            "settings  samples {} seed {} rank-tol {:e} vanish-tol {:e} frame-tol {:e}",
            s.samples, s.seed, s.rank_tol, s.vanish_tol, s.frame_tol
        );
        if let Some(order) = s.order {
            let _ = write!(out, " order {order}");
        }
        if let Some(lift) = s.lift {
            let _ = write!(out, " lift {lift}");
        }
        let _ = writeln!(out, "\nsampling  {}", s.sampling);
        if !self.points.is_empty() {
            let _ = writeln!(out, "\npoints");
            for p in &self.points {
                let _ = writeln!(out, "  [{}] {} ({})", p.index, p.label, p.mode);
                match &p.error {
                    Some(e) => {
                        let _ = writeln!(out, "      error: {e}");
                    }
                    None => {
                        for line in p.summary.lines() {
                            let _ = writeln!(out, "      {line}");
                        }
                    }
                }
            }
        }
        if !self.residuals.is_empty() {
            let _ = writeln!(out, "\nresiduals");
            let width = self
                .residuals
                .iter()
                .map(|r| r.name.chars().count())
                .max()
                .unwrap_or(0);
            for r in &self.residuals {
                let at = r.point.map_or("   ".to_string(), |k| format!("[{k}]"));
                let flag = if r.within { "ok" } else { "EXCEEDS" };
                let _ = writeln!(
                    out,
                    "  {at} {:<width$}  {:e}  (tol {:e}) {flag}",
                    r.name, r.value, r.tolerance
                );
            }
        }
        if !self.verdicts.is_empty() {
            let _ = writeln!(out, "\nverdicts");
            for v in &self.verdicts {
                let value = match &v.value {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                let _ = writeln!(out, "  {} = {value}", v.name);
            }
        }
        if let Some(ms) = self.timing_ms {
            let _ = writeln!(out, "\ntiming    {ms:.1} ms");
        }
        out
    }
}
