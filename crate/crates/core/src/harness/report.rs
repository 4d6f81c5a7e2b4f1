//! Cross-run comparison tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::record::{aggregate, load_runs, Aggregate, RunSummary};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub from: String,
    pub to: String,
    /// `100 · (mean_to − mean_from) / |mean_from|`; absent when the base mean is 0.
    pub percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<Aggregate>,
    pub improvements: Vec<Improvement>,
}

/// Groups the runs by label and compares every ordered pair of labels.
pub fn build_report(runs: &[RunSummary]) -> Result<Report> {
    if runs.is_empty() {
        return Err(Error::invalid("report needs at least one run"));
    }
    let mut groups: BTreeMap<&str, Vec<RunSummary>> = BTreeMap::new();
    for r in runs {
        groups.entry(r.label.as_str()).or_default().push(r.clone());
    }
    let rows = groups
        .iter()
        .map(|(label, runs)| aggregate(label, runs))
        .collect::<Result<Vec<_>>>()?;
    let mut improvements = Vec::new();
    for a in &rows {
        for b in &rows {
            if a.label != b.label {
                improvements.push(Improvement {
                    from: a.label.clone(),
                    to: b.label.clone(),
                    percent: (a.mean != 0.0).then(|| 100.0 * (b.mean - a.mean) / a.mean.abs()),
                });
            }
        }
    }
    Ok(Report { rows, improvements })
}

pub fn report_dirs(dirs: &[impl AsRef<Path>]) -> Result<Report> {
    let mut runs = Vec::new();
    for d in dirs {
        runs.extend(load_runs(d.as_ref())?);
    }
    build_report(&runs)
}

fn fmt_ci(ci: Option<(f64, f64)>) -> String {
    ci.map_or_else(|| "-".into(), |(lo, hi)| format!("[{lo:.3}, {hi:.3}]"))
}

/// Human-readable table.
pub fn render(report: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<24} {:>4} {:>8} {:>8} {:>18} {:>8} {:>18}",
        "label", "runs", "mean", "iqm", "iqm 95% ci", "gap", "gap 95% ci"
    );
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{:<24} {:>4} {:>8.3} {:>8.3} {:>18} {:>8.3} {:>18}",
            r.label,
            r.runs,
            r.mean,
            r.iqm,
            fmt_ci(r.iqm_ci),
            r.optimality_gap,
            fmt_ci(r.optimality_gap_ci)
        );
    }
    for i in &report.improvements {
        let pct = i.percent.map_or_else(|| "n/a".into(), |p| format!("{p:+.1}%"));
        let _ = writeln!(s, "{} -> {}: {pct}", i.from, i.to);
    }
    s
}

/// Writes `report.json`, `report.csv` and `improvements.csv` into `out`.
pub fn write_report(out: &Path, report: &Report) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join("report.json"), serde_json::to_string_pretty(report)? + "\n")?;
    let ci = |c: Option<(f64, f64)>| c.map_or_else(|| ",".to_string(), |(lo, hi)| format!("{lo},{hi}"));
    let mut csv = String::from("label,runs,mean,iqm,iqm_lo,iqm_hi,optimality_gap,gap_lo,gap_hi\n");
    for r in &report.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            r.label,
            r.runs,
            r.mean,
            r.iqm,
            ci(r.iqm_ci),
            r.optimality_gap,
            ci(r.optimality_gap_ci)
        );
    }
    fs::write(out.join("report.csv"), csv)?;
    let mut imp = String::from("from,to,percent\n");
    for i in &report.improvements {
        let _ = writeln!(
            imp,
            "{},{},{}",
            i.from,
            i.to,
            i.percent.map_or(String::new(), |p| p.to_string())
        );
    }
    fs::write(out.join("improvements.csv"), imp)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(label: &str, seed: u64, score: f64) -> RunSummary {
        RunSummary {
            label: label.into(),
            env: "chain-5".into(),
            seed,
            env_steps: 1,
            final_raw: score,
            final_normalized: score,
            random_ref: 0.0,
            expert_ref: 1.0,
            guide_calls: 0,
            updates: 0,
            episodes: 0,
            clamped_log_probs: 0,
            floored_guides: 0,
        }
    }

    #[test]
    fn single_run_single_row() {
        let r = build_report(&[run("a", 0, 0.5)]).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert!(r.improvements.is_empty());
    }

    #[test]
    fn identical_groups_show_no_improvement() {
        let runs = vec![run("a", 0, 0.5), run("a", 1, 0.7), run("b", 0, 0.5), run("b", 1, 0.7)];
        let r = build_report(&runs).unwrap();
        assert!(r.improvements.iter().all(|i| i.percent == Some(0.0)));
    }

    #[test]
    fn improvement_sign_follows_means() {
        let runs = vec![run("a", 0, 0.2), run("a", 1, 0.4), run("b", 0, 0.9), run("b", 1, 0.5)];
        let r = build_report(&runs).unwrap();
        let ab = r.improvements.iter().find(|i| i.from == "a").unwrap();
        assert!((ab.percent.unwrap() - 133.33333333333334).abs() < 1e-9);
    }
}
