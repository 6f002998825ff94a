//! Report serialization: canonical JSON, a text table and plot rows.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rust_decimal::{Decimal, RoundingStrategy};
use serde::Serialize;
use serde_json::Value;

use super::{Aggregate, MetricsReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Table,
    Plotdata,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(Self::Json),
            "table" => Ok(Self::Table),
            "plotdata" => Ok(Self::Plotdata),
            other => Err(format!("unknown report format `{other}` (json, table, plotdata)")),
        }
    }
}

/// Rounds half to even at 4 decimals, working on the shortest decimal
/// representation of `x` so that printed ties round as they read.
pub fn round4(x: f64) -> String {
    let shortest = format!("{x}");
    match Decimal::from_str(&shortest) {
        Ok(d) => format!("{:.4}", d.round_dp_with_strategy(4, RoundingStrategy::MidpointNearestEven)),
        Err(_) => format!("{x:.4}"),
    }
}

fn write_canonical(v: &Value, out: &mut String) {
    match v {
        Value::Null | Value::Bool(_) | Value::String(_) => out.push_str(&v.to_string()),
        Value::Number(n) => match (n.as_i64(), n.as_u64(), n.as_f64()) {
            (Some(i), _, _) => write!(out, "{i}").unwrap(),
            (_, Some(u), _) => write!(out, "{u}").unwrap(),
            (_, _, Some(f)) if f.is_finite() => out.push_str(&round4(f)),
            _ => out.push_str("null"),
        },
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let sorted: BTreeMap<&String, &Value> = map.iter().collect();
            out.push('{');
            for (i, (k, item)) in sorted.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_canonical(item, out);
            }
            out.push('}');
        }
    }
}

/// Sorted keys, floats fixed at 4 decimals, no whitespace, trailing newline.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("reports serialize");
    let mut out = String::new();
    write_canonical(&v, &mut out);
    out.push('\n');
    out
}

fn cell(x: Option<f64>) -> String {
    x.map(round4).unwrap_or_else(|| "-".into())
}

fn row(out: &mut String, r: &MetricsReport, k: &str, a: &Aggregate) {
    writeln!(
        out,
        "{:<12} {:<14} {:>4} {:>9} {:>9} {:>9} {:>7}",
        r.strategy,
        r.attributor,
        k,
        cell(a.precision),
        cell(a.recall),
        cell(a.f1),
        a.n_units
    )
    .unwrap();
}

/// One row per strategy, attributor and cut-off.
pub fn table(reports: &[MetricsReport]) -> String {
    let mut out = format!(
        "{:<12} {:<14} {:>4} {:>9} {:>9} {:>9} {:>7}\n",
        "strategy", "attributor", "k", "precision", "recall", "f1", "units"
    );
    for r in reports {
        for (k, a) in &r.per_k {
            row(&mut out, r, &k.to_string(), a);
        }
        if let Some(a) = &r.pooled {
            row(&mut out, r, "all", a);
        }
    }
    out
}

/// Tab-separated (strategy, mean units per sentence), one row per strategy.
pub fn plotdata(reports: &[MetricsReport]) -> String {
    let mut by_strategy: BTreeMap<&str, Option<f64>> = BTreeMap::new();
    for r in reports {
        let m = r.ablation.as_ref().and_then(|a| a.mean_units_per_sentence);
        let slot = by_strategy.entry(r.strategy.as_str()).or_insert(None);
        if slot.is_none() {
            *slot = m;
        }
    }
    let mut out = String::from("strategy\tmean_units_per_sentence\n");
    for (s, m) in by_strategy {
        writeln!(out, "{s}\t{}", cell(m)).unwrap();
    }
    out
}

pub fn emit_reports(reports: &[MetricsReport], format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => canonical_json(&reports),
        ReportFormat::Table => table(reports),
        ReportFormat::Plotdata => plotdata(reports),
    }
}

pub fn emit_report(report: &MetricsReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => canonical_json(report),
        _ => emit_reports(std::slice::from_ref(report), format),
    }
}
