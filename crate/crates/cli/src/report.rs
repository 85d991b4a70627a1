//! Human-readable tables and CSV emission for evaluation reports and scene
//! statistics. JSON mirrors of everything here are written by the commands
//! via serde.

use std::io::Write;
use std::path::Path;

use urbanseg_core::metrics::EvalReport;
use urbanseg_core::model::{BuildingCategory, UrbanClass};
use urbanseg_core::stats::{long_tail, SceneSummary};

use crate::driver::SceneTiming;
use crate::error::CliError;

const CATEGORY_ABBR: [&str; 7] = ["Co", "Re", "Of", "Cu", "Tr", "Mu", "Te"];

fn fmt_opt(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.3}"),
        None => "-".to_string(),
    }
}

/// One-row AP / AP50 / AP25 table followed by the per-category mIoU columns.
pub fn render_eval_table(name: &str, report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<12} {:>7} {:>7} {:>7}",
        "scene", "AP", "AP50", "AP25"
    ));
    for abbr in CATEGORY_ABBR {
        out.push_str(&format!(" {abbr:>6}"));
    }
    out.push_str(&format!(" {:>6}\n", "mIoU"));
    out.push_str(&format!(
        "{:<12} {:>7.3} {:>7.3} {:>7.3}",
        name, report.ap, report.ap50, report.ap25
    ));
    for value in report.miou.per_category {
        out.push_str(&format!(" {:>6}", fmt_opt(value)));
    }
    out.push_str(&format!(" {:>6}\n", fmt_opt(report.miou.mean)));
    out.push_str(&format!(
        "({} ground-truth instances, {} predictions, AP range {})\n",
        report.counts.ground_truth,
        report.counts.predictions,
        report.ap_range.label()
    ));
    out
}

/// Per-scene point counts by urban class, scenes as columns.
pub fn render_point_table(summaries: &[SceneSummary]) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<12}", "category"));
    for s in summaries {
        out.push_str(&format!(" {:>14}", s.name));
    }
    out.push('\n');
    for class in UrbanClass::ALL {
        out.push_str(&format!("{:<12}", class.name()));
        for s in summaries {
            out.push_str(&format!(" {:>14}", s.points_by_class[class.code() as usize]));
        }
        out.push('\n');
    }
    out.push_str(&format!("{:<12}", "total"));
    for s in summaries {
        out.push_str(&format!(" {:>14}", s.total_points));
    }
    out.push('\n');
    out
}

/// Building category and height histograms, one scene per row.
pub fn render_building_table(summaries: &[SceneSummary]) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<12}", "scene"));
    for abbr in CATEGORY_ABBR {
        out.push_str(&format!(" {abbr:>6}"));
    }
    out.push_str(&format!(" {:>6} {:>6} {:>6} {:>6}\n", "Unl", "L", "H", "SH"));
    for s in summaries {
        out.push_str(&format!("{:<12}", s.name));
        for count in s.buildings_by_category {
            out.push_str(&format!(" {count:>6}"));
        }
        out.push_str(&format!(" {:>6}", s.unlabeled_buildings));
        for count in s.buildings_by_height {
            out.push_str(&format!(" {count:>6}"));
        }
        out.push('\n');
    }
    out
}

pub fn render_correlation_table(summaries: &[SceneSummary], matrix: &[Vec<f64>]) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<12}", ""));
    for s in summaries {
        out.push_str(&format!(" {:>10}", s.name));
    }
    out.push('\n');
    for (i, s) in summaries.iter().enumerate() {
        out.push_str(&format!("{:<12}", s.name));
        for value in &matrix[i] {
            out.push_str(&format!(" {value:>10.2}"));
        }
        out.push('\n');
    }
    out
}

pub fn render_long_tails(summaries: &[SceneSummary]) -> String {
    let mut out = String::new();
    for s in summaries {
        out.push_str(&format!("{}:", s.name));
        for (class, count) in long_tail(s) {
            out.push_str(&format!(" {}={}", class.name(), count));
        }
        out.push('\n');
    }
    out
}

pub fn render_timing(timing: &SceneTiming) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:>6} {:>9} {:>9} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}\n",
        "block", "points", "proposals", "provide", "select", "assign", "merge", "score", "total"
    ));
    for t in &timing.blocks {
        out.push_str(&format!(
            "{:>6} {:>9} {:>9} {:>8.1}ms {:>8.1}ms {:>8.1}ms {:>8.1}ms {:>8.1}ms {:>8.1}ms\n",
            t.block,
            t.points,
            t.proposals,
            t.provide_ms,
            t.select_ms,
            t.assign_ms,
            t.merge_ms,
            t.score_ms,
            t.total_ms
        ));
    }
    out.push_str(&format!(
        "scene total {:.1} ms on {} threads\n",
        timing.total_ms, timing.threads
    ));
    out
}

pub fn write_summaries_csv(path: &Path, summaries: &[SceneSummary]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(e.to_string()))?;
    let mut header = vec!["scene".to_string()];
    header.extend(UrbanClass::ALL.iter().map(|c| format!("points_{}", c.name())));
    header.push("total_points".to_string());
    header.extend(
        BuildingCategory::LABELED
            .iter()
            .map(|c| format!("buildings_{}", c.name())),
    );
    header.push("buildings_unlabeled".to_string());
    header.extend(["low_rise", "high_rise", "super_high_rise", "total_buildings"].map(String::from));
    w.write_record(&header).map_err(|e| CliError::Io(e.to_string()))?;
    for s in summaries {
        let mut row = vec![s.name.clone()];
        row.extend(s.points_by_class.iter().map(|v| v.to_string()));
        row.push(s.total_points.to_string());
        row.extend(s.buildings_by_category.iter().map(|v| v.to_string()));
        row.push(s.unlabeled_buildings.to_string());
        row.extend(s.buildings_by_height.iter().map(|v| v.to_string()));
        row.push(s.total_buildings.to_string());
        w.write_record(&row).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(())
}

pub fn write_correlation_csv(
    path: &Path,
    summaries: &[SceneSummary],
    matrix: &[Vec<f64>],
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(e.to_string()))?;
    let mut header = vec![String::new()];
    header.extend(summaries.iter().map(|s| s.name.clone()));
    w.write_record(&header).map_err(|e| CliError::Io(e.to_string()))?;
    for (i, s) in summaries.iter().enumerate() {
        let mut row = vec![s.name.clone()];
        row.extend(matrix[i].iter().map(|v| format!("{v:.4}")));
        w.write_record(&row).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let file = std::fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut w = std::io::BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    w.write_all(b"\n")
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(())
}
