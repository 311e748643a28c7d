//! CSV and JSON renderings of laws, profiles and sample dumps.
//!
//! CSV files open with `# key: value` metadata lines followed by a header
//! row. JSON documents are `{"schema": .., "meta": {..}, "data": ..}`.

use std::fmt::Write as _;

use serde::Serialize;

use crate::asymptotics::ConvergenceProfile;
use crate::error::{Error, Result};
use crate::exact::{Spectrum, SpectrumLaw};
use crate::pmf::Pmf;

pub const SCHEMA: &str = "convspec/1";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Meta {
    pub kind: String,
    pub n: Option<usize>,
    pub fingerprint: String,
    pub tolerance: f64,
    pub uncovered: f64,
    pub extra: Vec<(String, String)>,
}

impl Meta {
    pub fn new(kind: &str, fingerprint: &str, tolerance: f64) -> Self {
        Meta {
            kind: kind.to_string(),
            n: None,
            fingerprint: fingerprint.to_string(),
            tolerance,
            uncovered: 0.0,
            extra: Vec::new(),
        }
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    pub fn with_uncovered(mut self, u: f64) -> Self {
        self.uncovered = u;
        self
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.extra.push((key.to_string(), value.to_string()));
        self
    }

    fn csv_preamble(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# schema: {SCHEMA}");
        let _ = writeln!(out, "# kind: {}", self.kind);
        if let Some(n) = self.n {
            let _ = writeln!(out, "# n: {n}");
        }
        let _ = writeln!(out, "# fingerprint: {}", self.fingerprint);
        let _ = writeln!(out, "# tolerance: {:e}", self.tolerance);
        let _ = writeln!(out, "# uncovered: {:e}", self.uncovered);
        for (k, v) in &self.extra {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out
    }
}

/// `value,probability` rows of the represented window; the tail mass goes to
/// the `uncovered` metadata line.
pub fn pmf_csv(meta: &Meta, label: &str, law: &Pmf) -> String {
    let meta = meta.clone().with_uncovered(law.tail());
    let mut out = meta.csv_preamble();
    let _ = writeln!(out, "{label},probability");
    for (s, p) in law.iter() {
        let _ = writeln!(out, "{s},{p:e}");
    }
    out
}

/// `spectrum,weight,components,probability`, spectra written as `j:y`
/// pairs separated by spaces.
pub fn spectrum_law_csv(meta: &Meta, law: &SpectrumLaw) -> String {
    let meta = meta.clone().with_n(law.n).with_uncovered(law.uncovered);
    let mut out = meta.csv_preamble();
    out.push_str("spectrum,weight,components,probability\n");
    for (s, p) in &law.entries {
        let _ = writeln!(out, "{s},{},{},{p:e}", s.weight(), s.components());
    }
    out
}

pub fn profile_csv(meta: &Meta, profile: &ConvergenceProfile) -> String {
    let mut meta = meta.clone().with("quantity", &profile.quantity);
    for note in &profile.notes {
        meta = meta.with("note", note);
    }
    let mut out = meta.csv_preamble();
    out.push_str("abscissa,value,error_bar\n");
    for ((a, v), e) in profile.abscissae.iter().zip(&profile.values).zip(&profile.error_bars) {
        let _ = writeln!(out, "{a},{v:e},{e:e}");
    }
    out
}

/// One row per sample: `n` then `j:y` pairs separated by `;`.
pub fn samples_csv(meta: &Meta, n: usize, samples: &[Spectrum]) -> String {
    let mut out = meta.clone().with_n(n).csv_preamble();
    out.push_str("n,spectrum\n");
    for s in samples {
        let pairs: Vec<String> = s.pairs().iter().map(|(j, y)| format!("{j}:{y}")).collect();
        let _ = writeln!(out, "{n},{}", pairs.join(";"));
    }
    out
}

/// Generic table with the metadata preamble.
pub fn table_csv(meta: &Meta, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = meta.csv_preamble();
    out.push_str(&header.join(","));
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

pub fn to_json<T: Serialize>(meta: &Meta, data: &T) -> Result<String> {
    #[derive(Serialize)]
    struct Doc<'a, T> {
        schema: &'static str,
        meta: &'a Meta,
        data: &'a T,
    }
    serde_json::to_string_pretty(&Doc { schema: SCHEMA, meta, data })
        .map_err(|e| Error::Internal(format!("JSON encoding failed: {e}")))
}
