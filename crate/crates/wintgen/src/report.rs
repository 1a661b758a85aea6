//! Line-delimited scan reports: one record per grid point plus a summary
//! object, with fixed key order and fixed 17-significant-digit float
//! formatting so identical runs produce byte-identical output.

use std::collections::BTreeMap;
use std::io::{self, Write};

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::ddvv::{report_from_geometry, DdvvReport};
use crate::error::Result;
use crate::geometry::point_geometry;
use crate::moebius::moebius_factor;

/// Fixed float formatting: 17 significant digits, scientific.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "null".to_string()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => fmt_f64(x),
        None => "null".to_string(),
    }
}

fn fmt_point(p: &[f64]) -> String {
    let parts: Vec<String> = p.iter().map(|&v| fmt_f64(v)).collect();
    format!("[{}]", parts.join(","))
}

#[derive(Debug, Clone)]
pub struct PointRecord {
    pub point: Vec<f64>,
    pub s: f64,
    pub s_perp: f64,
    pub h2: f64,
    pub deficit: f64,
    pub umbilic: bool,
    pub equality: bool,
    pub mu0: Option<f64>,
    pub rho: Option<f64>,
    pub residuals: BTreeMap<String, f64>,
}

impl PointRecord {
    fn to_line(&self) -> String {
        let mut res = String::from("{");
        let mut first = true;
        for (k, v) in &self.residuals {
            if !first {
                res.push(',');
            }
            first = false;
            res.push_str(&format!("\"{k}\":{}", fmt_f64(*v)));
        }
        res.push('}');
        format!(
            "{{\"point\":{},\"s\":{},\"s_perp\":{},\"h2\":{},\"deficit\":{},\
             \"umbilic\":{},\"equality\":{},\"mu0\":{},\"rho\":{},\"residuals\":{}}}",
            fmt_point(&self.point),
            fmt_f64(self.s),
            fmt_f64(self.s_perp),
            fmt_f64(self.h2),
            fmt_f64(self.deficit),
            self.umbilic,
            self.equality,
            fmt_opt(self.mu0),
            fmt_opt(self.rho),
            res,
        )
    }
}

#[derive(Debug, Clone)]
pub struct Summary {
    pub version: String,
    pub points_total: usize,
    pub points_evaluated: usize,
    pub wintgen_ideal_on_grid: bool,
    pub umbilic_free: bool,
    pub min_deficit: Option<f64>,
    pub max_deficit: Option<f64>,
    pub worst_residuals: BTreeMap<String, f64>,
    pub skipped: Vec<(Vec<f64>, String)>,
    pub config_echo: String,
}

impl Summary {
    fn to_line(&self) -> String {
        let skips: Vec<String> = self
            .skipped
            .iter()
            .map(|(p, why)| {
                format!(
                    "{{\"point\":{},\"reason\":{}}}",
                    fmt_point(p),
                    serde_json::to_string(why).unwrap()
                )
            })
            .collect();
        let mut res = String::from("{");
        let mut first = true;
        for (k, v) in &self.worst_residuals {
            if !first {
                res.push(',');
            }
            first = false;
            res.push_str(&format!("\"{k}\":{}", fmt_f64(*v)));
        }
        res.push('}');
        format!(
            "{{\"summary\":{{\"version\":{},\"points_total\":{},\"points_evaluated\":{},\
             \"wintgen_ideal_on_grid\":{},\"umbilic_free\":{},\"min_deficit\":{},\
             \"max_deficit\":{},\"worst_residuals\":{},\"skipped\":[{}],\
             \"config\":{}}}}}",
            serde_json::to_string(&self.version).unwrap(),
            self.points_total,
            self.points_evaluated,
            self.wintgen_ideal_on_grid,
            self.umbilic_free,
            fmt_opt(self.min_deficit),
            fmt_opt(self.max_deficit),
            res,
            skips.join(","),
            serde_json::to_string(&self.config_echo).unwrap(),
        )
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub records: Vec<PointRecord>,
    pub summary: Summary,
}

impl Report {
    pub fn write_jsonl<W: Write + ?Sized>(&self, w: &mut W) -> io::Result<()> {
        for r in &self.records {
            writeln!(w, "{}", r.to_line())?;
        }
        writeln!(w, "{}", self.summary.to_line())
    }

    pub fn write_csv<W: Write + ?Sized>(&self, w: &mut W) -> io::Result<()> {
        let m = self.records.first().map(|r| r.point.len()).unwrap_or(0);
        let mut header: Vec<String> = (0..m).map(|i| format!("x{}", i + 1)).collect();
        header.extend(
            ["s", "s_perp", "h2", "deficit", "umbilic", "equality", "mu0", "rho"]
                .iter()
                .map(|s| s.to_string()),
        );
        writeln!(w, "{}", header.join(","))?;
        for r in &self.records {
            let mut row: Vec<String> = r.point.iter().map(|&v| fmt_f64(v)).collect();
            row.push(fmt_f64(r.s));
            row.push(fmt_f64(r.s_perp));
            row.push(fmt_f64(r.h2));
            row.push(fmt_f64(r.deficit));
            row.push(format!("{}", r.umbilic));
            row.push(format!("{}", r.equality));
            row.push(r.mu0.map(fmt_f64).unwrap_or_default());
            row.push(r.rho.map(fmt_f64).unwrap_or_default());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn record_from(rep: &DdvvReport, rho: Option<f64>) -> PointRecord {
    PointRecord {
        point: rep.point.clone(),
        s: rep.s,
        s_perp: rep.s_perp,
        h2: rep.h2,
        deficit: rep.deficit,
        umbilic: rep.is_umbilic,
        equality: rep.is_equality,
        mu0: rep.canonical.as_ref().map(|c| c.mu0),
        rho,
        residuals: BTreeMap::new(),
    }
}

/// Scan the configured grid. Per-point failures become skips, never errors.
pub fn run_check(cfg: &RunConfig) -> Result<Report> {
    let spec = cfg.to_spec()?;
    let c = spec.options.ambient_c;
    let tol = spec.options.tol_exact;
    let pts = spec.grid(&cfg.domain.grid, 0.0);
    let results: Vec<(Vec<f64>, std::result::Result<PointRecord, String>)> = pts
        .par_iter()
        .map(|x| {
            let out = point_geometry(&spec, x)
                .map(|geo| {
                    let rep = report_from_geometry(&geo, c, tol);
                    let rho = moebius_factor(&geo).ok();
                    record_from(&rep, rho)
                })
                .map_err(|e| e.to_string());
            (x.clone(), out)
        })
        .collect();

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (x, r) in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(why) => skipped.push((x, why)),
        }
    }
    let min_deficit = records
        .iter()
        .map(|r| r.deficit)
        .min_by(|a, b| a.partial_cmp(b).unwrap());
    let max_deficit = records
        .iter()
        .map(|r| r.deficit)
        .max_by(|a, b| a.partial_cmp(b).unwrap());
    let summary = Summary {
        version: env!("CARGO_PKG_VERSION").to_string(),
        points_total: pts.len(),
        points_evaluated: records.len(),
        wintgen_ideal_on_grid: !records.is_empty() && records.iter().all(|r| r.equality),
        umbilic_free: !records.is_empty() && records.iter().all(|r| !r.umbilic),
        min_deficit,
        max_deficit,
        worst_residuals: BTreeMap::new(),
        skipped,
        config_echo: cfg.to_string_pretty()?,
    };
    Ok(Report { records, summary })
}
