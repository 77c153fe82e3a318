use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Value};
use torus_zeros::suites::{Bound, CheckRecord, Extremum};

use crate::args::Format;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionEcho {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

/// The effective configuration of one run, defaults filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub region: RegionEcho,
    pub grid: [usize; 2],
    pub tolerances: BTreeMap<String, f64>,
    /// Cap on paired theta-series terms.
    pub series_depth: usize,
    pub thread_count: usize,
    pub output_dir: String,
    pub seed: u64,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub config_echo: RunConfig,
    pub records: Value,
    pub pass: bool,
    pub summary: Value,
}

impl Report {
    /// Pretty JSON with LF line endings and a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// A JSON number, or `"inf"`, `"-inf"`, `"nan"` for values JSON cannot hold.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn bound(b: Bound) -> &'static str {
    match b {
        Bound::Max => "max",
        Bound::Min => "min",
    }
}

pub fn check_record(r: &CheckRecord) -> Value {
    json!({
        "check": r.check,
        "case": r.case,
        "value": num(r.value),
        "tolerance": num(r.tolerance),
        "bound": bound(r.bound),
        "pass": r.pass,
    })
}

pub fn extremum(e: &Extremum) -> Value {
    json!({
        "check": e.check,
        "worst": num(e.worst),
        "case": e.case,
        "tolerance": num(e.tolerance),
        "bound": bound(e.bound),
        "count": e.count,
        "failures": e.failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_numbers_are_strings() {
        assert_eq!(num(f64::INFINITY), json!("inf"));
        assert_eq!(num(f64::NEG_INFINITY), json!("-inf"));
        assert_eq!(num(f64::NAN), json!("nan"));
        assert_eq!(num(0.25), json!(0.25));
    }
}
