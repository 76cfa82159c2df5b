//! Run reports: per-seed per-configuration metric rows with provenance.

use crate::error::{Error, Result};
use crate::io_util::fmt_f64;
use std::path::Path;

pub const REPORT_HEADER: &str = "config_hash,version,seed,setting,a_full,aurc,e_aurc,ece,mmd,eps_bayes_mean,eps_approx_mean,eps_rank_mean,holds_frac";

/// One metric row. Optional columns are empty in the CSV when the command
/// did not compute them.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub config_hash: String,
    pub version: String,
    pub seed: u64,
    /// What the row varies, e.g. `sigma=0.33`, `model=mlp[32,32]`,
    /// `score=temp`, `shift=shear`.
    pub setting: String,
    pub a_full: f64,
    pub aurc: f64,
    pub e_aurc: f64,
    pub ece: Option<f64>,
    pub mmd: Option<f64>,
    pub eps_bayes_mean: Option<f64>,
    pub eps_approx_mean: Option<f64>,
    pub eps_rank_mean: Option<f64>,
    pub holds_frac: Option<f64>,
}

impl ReportRow {
    pub fn new(config_hash: &str, seed: u64, setting: impl Into<String>) -> Self {
        // Settings become unquoted CSV fields; keep them comma-free.
        let setting = setting.into().replace(',', ";");
        ReportRow {
            config_hash: config_hash.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            setting,
            a_full: f64::NAN,
            aurc: f64::NAN,
            e_aurc: f64::NAN,
            ece: None,
            mmd: None,
            eps_bayes_mean: None,
            eps_approx_mean: None,
            eps_rank_mean: None,
            holds_frac: None,
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// A set of report rows, serializable to `report.csv`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub rows: Vec<ReportRow>,
}

impl RunReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.config_hash,
                r.version,
                r.seed,
                r.setting,
                fmt_f64(r.a_full),
                fmt_f64(r.aurc),
                fmt_f64(r.e_aurc),
                opt(r.ece),
                opt(r.mmd),
                opt(r.eps_bayes_mean),
                opt(r.eps_approx_mean),
                opt(r.eps_rank_mean),
                opt(r.holds_frac),
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::io_util::write_atomic(path, &self.to_csv())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let malformed = |reason: String| Error::Malformed {
            path: path.display().to_string(),
            reason,
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| malformed("empty report".into()))?;
        if header != REPORT_HEADER {
            return Err(malformed(format!("unexpected header `{header}`")));
        }
        let parse_opt = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse::<f64>().map(Some).map_err(|_| malformed(format!("bad float `{s}`")))
            }
        };
        let mut rows = Vec::new();
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 13 {
                return Err(malformed(format!("row has {} fields, expected 13", f.len())));
            }
            rows.push(ReportRow {
                config_hash: f[0].to_string(),
                version: f[1].to_string(),
                seed: f[2].parse().map_err(|_| malformed(format!("bad seed `{}`", f[2])))?,
                setting: f[3].to_string(),
                a_full: f[4].parse().map_err(|_| malformed("bad a_full".into()))?,
                aurc: f[5].parse().map_err(|_| malformed("bad aurc".into()))?,
                e_aurc: f[6].parse().map_err(|_| malformed("bad e_aurc".into()))?,
                ece: parse_opt(f[7])?,
                mmd: parse_opt(f[8])?,
                eps_bayes_mean: parse_opt(f[9])?,
                eps_approx_mean: parse_opt(f[10])?,
                eps_rank_mean: parse_opt(f[11])?,
                holds_frac: parse_opt(f[12])?,
            });
        }
        Ok(RunReport { rows })
    }

    /// Per-seed values of a metric for one setting, in seed order.
    pub fn metric(&self, setting: &str, pick: impl Fn(&ReportRow) -> f64) -> Vec<f64> {
        let mut rows: Vec<&ReportRow> =
            self.rows.iter().filter(|r| r.setting == setting).collect();
        rows.sort_by_key(|r| r.seed);
        rows.iter().map(|r| pick(r)).collect()
    }

    pub fn settings(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.setting) {
                out.push(r.setting.clone());
            }
        }
        out
    }
}

/// Directory-safe name for a setting string.
pub fn sanitize(setting: &str) -> String {
    setting
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_round_trips() {
        let mut report = RunReport::default();
        let mut row = ReportRow::new("deadbeef00000000", 3, "sigma=0.33");
        row.a_full = 0.9;
        row.aurc = 0.05;
        row.e_aurc = 0.01;
        row.ece = Some(0.02);
        report.rows.push(row);
        let dir = std::env::temp_dir().join("selgap_report_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("report.csv");
        report.write_csv(&path).unwrap();
        let back = RunReport::read_csv(&path).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn metric_is_seed_ordered() {
        let mut report = RunReport::default();
        for seed in [2u64, 0, 1] {
            let mut row = ReportRow::new("h", seed, "s");
            row.e_aurc = seed as f64;
            report.rows.push(row);
        }
        assert_eq!(report.metric("s", |r| r.e_aurc), vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn sanitize_makes_directory_names() {
        assert_eq!(sanitize("model=mlp[32x32]"), "model_mlp_32x32_");
        assert_eq!(sanitize("sigma=0.33"), "sigma_0.33");
    }
}
