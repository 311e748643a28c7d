//! Model specification files.
//!
//! A model file is TOML:
//!
//! ```toml
//! family = "poisson-power"   # any Family name
//! q = 1.5                    # required unless the family fixes it
//! A = 1.0                    # power-law amplitude (default 1)
//! tau = 1e-12                # truncation tolerance (default 1e-12)
//! tilt = 1.0                 # tilting parameter x (default 1)
//! horizon = 400              # tree-count horizon for forests (default 400)
//!
//! [lambda]                   # power-law family only; default constant = 1
//! constant = 1.0             # or: values = [...] and optional sup_beyond = ...
//!
//! [table]                    # custom-table only
//! zero_beyond = true         # species past the table are identically zero
//! tail_bound = 0.0           # bound on sum_{j > len} E Z_j (optional)
//! rows = [[1, 0, 0.6], [1, 1, 0.4]]   # (j, s, P[Z_j = s])
//! ```
//!
//! Every error carries the 1-based line it refers to.

use std::collections::BTreeMap;

use serde::Deserialize;
use toml::Spanned;

use crate::error::{Error, Result};
use crate::model::{CustomTable, Family, LambdaSpec, ModelSpec, DEFAULT_HORIZON};
use crate::pmf::{Pmf, DEFAULT_TAU, MASS_TOL};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    family: Spanned<String>,
    q: Option<Spanned<f64>>,
    #[serde(rename = "A")]
    amplitude: Option<Spanned<f64>>,
    tau: Option<Spanned<f64>>,
    tilt: Option<Spanned<f64>>,
    horizon: Option<Spanned<i64>>,
    lambda: Option<Spanned<RawLambda>>,
    table: Option<Spanned<RawTable>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLambda {
    constant: Option<f64>,
    values: Option<Vec<f64>>,
    sup_beyond: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTable {
    #[serde(default)]
    zero_beyond: bool,
    tail_bound: Option<f64>,
    rows: Vec<Spanned<(i64, i64, f64)>>,
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn at<T>(src: &str, item: &Spanned<T>, msg: impl Into<String>) -> Error {
    Error::Parse {
        line: line_of(src, item.span().start),
        msg: msg.into(),
    }
}

/// Parses a model file into a [`ModelSpec`].
pub fn parse_model_spec(src: &str) -> Result<ModelSpec> {
    let raw: RawSpec = toml::from_str(src).map_err(|e| Error::Parse {
        line: e.span().map(|s| line_of(src, s.start)).unwrap_or(1),
        msg: e.message().to_string(),
    })?;

    let family: Family = raw
        .family
        .get_ref()
        .parse()
        .map_err(|e: Error| at(src, &raw.family, e.to_string()))?;

    let q = match (family.fixed_q(), &raw.q) {
        (Some(fixed), Some(q)) if *q.get_ref() != fixed => {
            return Err(at(src, q, format!("family {family} fixes q = {fixed}")));
        }
        (Some(fixed), _) => fixed,
        (None, Some(q)) => {
            if !(*q.get_ref() > 0.0) {
                return Err(at(src, q, "q must be > 0"));
            }
            *q.get_ref()
        }
        (None, None) => return Err(at(src, &raw.family, format!("family {family} needs q"))),
    };

    let positive = |v: &Option<Spanned<f64>>, name: &str, default: f64| -> Result<f64> {
        match v {
            None => Ok(default),
            Some(s) if *s.get_ref() > 0.0 && s.get_ref().is_finite() => Ok(*s.get_ref()),
            Some(s) => Err(at(src, s, format!("{name} must be finite and > 0"))),
        }
    };
    let amplitude = positive(&raw.amplitude, "A", 1.0)?;
    let tilt = positive(&raw.tilt, "tilt", 1.0)?;
    let tau = match &raw.tau {
        None => DEFAULT_TAU,
        Some(t) if *t.get_ref() > 0.0 && *t.get_ref() <= 1e-6 => *t.get_ref(),
        Some(t) => return Err(at(src, t, "tau must lie in (0, 1e-6]")),
    };
    let horizon = match &raw.horizon {
        None => DEFAULT_HORIZON,
        Some(h) if *h.get_ref() >= 1 => *h.get_ref() as usize,
        Some(h) => return Err(at(src, h, "horizon must be >= 1")),
    };

    let lambda = match &raw.lambda {
        None => LambdaSpec::Constant(1.0),
        Some(l) => {
            if family != Family::PoissonPower {
                return Err(at(src, l, "[lambda] only applies to the poisson-power family"));
            }
            let inner = l.get_ref();
            match (&inner.constant, &inner.values) {
                (Some(c), None) if *c > 0.0 && inner.sup_beyond.is_none() => LambdaSpec::Constant(*c),
                (None, Some(v)) if !v.is_empty() && v.iter().all(|x| *x > 0.0) => LambdaSpec::Table {
                    values: v.clone(),
                    sup_beyond: inner.sup_beyond,
                },
                _ => {
                    return Err(at(
                        src,
                        l,
                        "[lambda] needs either a positive constant or a non-empty list of positive values",
                    ))
                }
            }
        }
    };

    let custom = match (&raw.table, family) {
        (Some(t), Family::CustomTable) => Some(parse_table(src, t)?),
        (Some(t), _) => return Err(at(src, t, "[table] only applies to the custom-table family")),
        (None, Family::CustomTable) => {
            return Err(at(src, &raw.family, "custom-table family needs a [table] section"))
        }
        (None, _) => None,
    };

    let spec = ModelSpec {
        family,
        q,
        amplitude,
        lambda,
        horizon: custom.as_ref().map(|c| c.laws.len()).unwrap_or(horizon),
        tau,
        tilt,
        custom,
    };
    spec.validate().map_err(|e| at(src, &raw.family, e.to_string()))?;
    Ok(spec)
}

fn parse_table(src: &str, table: &Spanned<RawTable>) -> Result<CustomTable> {
    let inner = table.get_ref();
    let mut by_j: BTreeMap<usize, (usize, BTreeMap<usize, f64>)> = BTreeMap::new();
    for row in &inner.rows {
        let (j, s, p) = *row.get_ref();
        if j < 1 || s < 0 {
            return Err(at(src, row, "rows need j >= 1 and s >= 0"));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(at(src, row, format!("probability {p} is outside [0, 1]")));
        }
        let line = line_of(src, row.span().start);
        let entry = by_j.entry(j as usize).or_insert((line, BTreeMap::new()));
        if entry.1.insert(s as usize, p).is_some() {
            return Err(at(src, row, format!("duplicate row for j = {j}, s = {s}")));
        }
    }
    let max_j = by_j.keys().next_back().copied().unwrap_or(0);
    if max_j == 0 {
        return Err(at(src, table, "table has no rows"));
    }
    let mut laws = Vec::with_capacity(max_j);
    for j in 1..=max_j {
        let Some((line, rows)) = by_j.get(&j) else {
            return Err(at(src, table, format!("table has no rows for j = {j}")));
        };
        let lo = *rows.keys().next().expect("non-empty");
        let hi = *rows.keys().next_back().expect("non-empty");
        let probs: Vec<f64> = (lo..=hi).map(|s| rows.get(&s).copied().unwrap_or(0.0)).collect();
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Parse {
                line: *line,
                msg: format!("probabilities for j = {j} sum to {total}, not 1"),
            });
        }
        laws.push(Pmf::from_table(lo, probs, 0.0).map_err(|e| Error::Parse {
            line: *line,
            msg: e.to_string(),
        })?);
    }
    if let Some(b) = inner.tail_bound {
        if !(b >= 0.0) {
            return Err(at(src, table, "tail_bound must be >= 0"));
        }
    }
    Ok(CustomTable {
        laws,
        zero_beyond: inner.zero_beyond,
        tail_bound: inner.tail_bound,
    })
}
