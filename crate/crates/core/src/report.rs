//! Ranking reports and their CSV/JSON forms.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const CSV_COLUMNS: [&str; 11] = [
    "id",
    "serialization",
    "err_lqr",
    "lqr_bar",
    "err_ddp",
    "err",
    "time_est",
    "time_meas",
    "r_lqr",
    "r_ddp",
    "r",
];

/// One decomposition (or the baseline, id 0) with everything computed for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub id: usize,
    pub serialization: String,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_f64")]
    pub err_lqr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_f64")]
    pub lqr_bar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_f64")]
    pub err_ddp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_f64")]
    pub err: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_f64")]
    pub time_est: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_f64")]
    pub time_meas: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_lqr: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_ddp: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub artifacts: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

impl ReportRow {
    pub fn new(id: usize, serialization: String, description: String) -> Self {
        ReportRow {
            id,
            serialization,
            description,
            err_lqr: None,
            lqr_bar: None,
            err_ddp: None,
            err: None,
            time_est: None,
            time_meas: None,
            r_lqr: None,
            r_ddp: None,
            r: None,
            artifacts: Vec::new(),
            errors: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub system: String,
    /// Baseline first, then decompositions in enumeration order.
    pub rows: Vec<ReportRow>,
}

/// Dense ranks `1..K` over the present values; equal values share the
/// smaller rank, `+∞` sorts last and NaN or absent values get no rank.
pub fn dense_ranks(values: &[Option<f64>]) -> Vec<Option<usize>> {
    let mut distinct: Vec<f64> = values.iter().flatten().copied().filter(|v| !v.is_nan()).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    values
        .iter()
        .map(|v| match v {
            Some(v) if !v.is_nan() => distinct.iter().position(|d| d == v).map(|p| p + 1),
            _ => None,
        })
        .collect()
}

impl RankingReport {
    /// Recomputes the rank columns over every row except the baseline.
    pub fn rerank(&mut self) {
        let ranked: Vec<usize> = (0..self.rows.len()).filter(|&i| self.rows[i].id != 0).collect();
        let column = |f: &dyn Fn(&ReportRow) -> Option<f64>| -> Vec<Option<usize>> {
            dense_ranks(&ranked.iter().map(|&i| f(&self.rows[i])).collect::<Vec<_>>())
        };
        let r_lqr = column(&|r| r.err_lqr);
        let r_ddp = column(&|r| r.err_ddp);
        let r = column(&|r| r.err);
        for (k, &i) in ranked.iter().enumerate() {
            self.rows[i].r_lqr = r_lqr[k];
            self.rows[i].r_ddp = r_ddp[k];
            self.rows[i].r = r[k];
        }
    }

    pub fn has_errors(&self) -> bool {
        self.rows.iter().any(|r| !r.errors.is_empty())
    }

    pub fn row(&self, id: usize) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.id == id)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(CSV_COLUMNS).expect("in-memory write");
        for r in &self.rows {
            let rank = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
            w.write_record([
                r.id.to_string(),
                r.serialization.clone(),
                fmt_opt(r.err_lqr),
                fmt_opt(r.lqr_bar),
                fmt_opt(r.err_ddp),
                fmt_opt(r.err),
                fmt_opt(r.time_est),
                fmt_opt(r.time_meas),
                rank(r.r_lqr),
                rank(r.r_ddp),
                rank(r.r),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Writes `report.csv` and `report.json` into `dir`.
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        let ctx = |p: &Path, e: io::Error| io::Error::new(e.kind(), format!("{}: {e}", p.display()));
        fs::create_dir_all(dir).map_err(|e| ctx(dir, e))?;
        let csv_path = dir.join("report.csv");
        fs::write(&csv_path, self.to_csv()).map_err(|e| ctx(&csv_path, e))?;
        let json_path = dir.join("report.json");
        fs::write(&json_path, self.to_json()).map_err(|e| ctx(&json_path, e))
    }

    /// Fixed-width table for terminals.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:>4}  {:>10} {:>10} {:>10} {:>10} {:>10}  {:>5} {:>5} {:>3}  {}\n",
            "id", "time_est", "err_lqr", "err_ddp", "err", "time_meas", "r_lqr", "r_ddp", "r", "decomposition"
        );
        for r in &self.rows {
            let num = |v: Option<f64>| match v {
                Some(v) if v.is_infinite() => "inf".to_string(),
                Some(v) => format!("{v:.3e}"),
                None => "-".into(),
            };
            let rank = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
            out += &format!(
                "{:>4}  {:>10} {:>10} {:>10} {:>10} {:>10}  {:>5} {:>5} {:>3}  {}{}\n",
                r.id,
                num(r.time_est),
                num(r.err_lqr),
                num(r.err_ddp),
                num(r.err),
                num(r.time_meas),
                rank(r.r_lqr),
                rank(r.r_ddp),
                rank(r.r),
                r.description,
                if r.errors.is_empty() { String::new() } else { format!("  [{}]", r.errors.join("; ")) }
            );
        }
        out
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        None => String::new(),
        Some(v) if v == f64::INFINITY => "inf".into(),
        Some(v) if v == f64::NEG_INFINITY => "-inf".into(),
        Some(v) => format!("{v}"),
    }
}

/// Finite numbers as JSON numbers, infinities as the strings "inf"/"-inf".
mod opt_f64 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) if x.is_finite() => s.serialize_f64(*x),
            Some(x) if *x > 0.0 => s.serialize_str("inf"),
            Some(x) if *x < 0.0 => s.serialize_str("-inf"),
            Some(_) => s.serialize_str("nan"),
            None => s.serialize_none(),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Ok(match Option::<Raw>::deserialize(d)? {
            None => None,
            Some(Raw::Num(x)) => Some(x),
            Some(Raw::Text(t)) => Some(match t.as_str() {
                "inf" => f64::INFINITY,
                "-inf" => f64::NEG_INFINITY,
                _ => f64::NAN,
            }),
        })
    }
}
